//! Acceptance checks. Run with `cargo test --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use offcut_core::assembly::{snap_rotation, Pose, SceneMesh, CONTACT_TOL_MM, ROTATION_SNAP_DEG};
use offcut_core::cutplan::{PackingMode, QuarterTurn, ViolationKind, PLAN_ROTATION_STEP_DEG};
use offcut_core::geom::{Polygon, Vec2, Vec3};
use offcut_core::inventory::NewScrap;
use offcut_core::part::{Edge, Face, Hexahedron, Part};
use offcut_core::session::digest;
use offcut_core::{export, persist, scripts, DesignCommand, Document, PartId, ScrapId, Session, SpawnSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64()))
}

fn pine(dims: [f64; 3]) -> NewScrap {
    NewScrap { dims, material_kind: "pine".into(), tag: None, grain: None, color_rgb: None }
}

// ---------------------------------------------------------------- defaults

fn defaults() -> Outcome {
    let start = Instant::now();
    let doc = Document::default();
    ensure(doc.settings.kerf_blade_mm == 3.0, || format!("kerf {}", doc.settings.kerf_blade_mm))?;
    ensure(!doc.settings.resaw_allowed, || "resaw enabled".into())?;
    ensure(doc.settings.rotation_snap && ROTATION_SNAP_DEG == 15.0, || "rotation snap".into())?;
    ensure(snap_rotation([7.4, 22.6, 38.0]) == [0.0, 30.0, 45.0], || "snap step".into())?;
    ensure(PLAN_ROTATION_STEP_DEG == 90, || "plan rotation step".into())?;
    let allowed: Vec<u16> = (0..360).filter(|d| QuarterTurn::from_degrees(*d).is_some()).collect();
    ensure(allowed == [0, 90, 180, 270], || format!("plan rotations {allowed:?}"))?;
    let mut d = Document::default();
    let s = d.register_scrap(pine([500.0, 300.0, 18.0])).unwrap();
    ensure(d.plans[&s].kerf_blade_mm == 3.0, || "plan kerf".into())?;
    ensure(d.plans[&s].mode == PackingMode::AutoResolve, || "plan mode".into())?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("kerf 3.0 mm, resaw off, 15° snap on, plan rotations {allowed:?}"))
}

// ------------------------------------------------------ geometry invariants

fn world_corners(part: &Part) -> Vec<Vec3> {
    (0..8).map(|i| part.pose.apply(&part.vertices.corner(i))).collect()
}

/// Independent solid check: each face's corners lie on one plane within
/// `tol`, every corner is on the inner side of every face plane, and the
/// signed volume (sum of tetrahedra from the centroid) is positive.
fn solid_defect(h: &Hexahedron, tol: f64) -> Option<String> {
    let pts: Vec<Vec3> = (0..8).map(|i| h.corner(i)).collect();
    let center = pts.iter().sum::<Vec3>() / 8.0;
    let mut volume = 0.0;
    for face in Face::ALL {
        let c = face.corners().map(|i| pts[i]);
        let n = (c[2] - c[0]).cross(&(c[3] - c[1]));
        if n.norm() < 1e-12 {
            return Some(format!("face {face} degenerate"));
        }
        let n = n.normalize();
        let mid = (c[0] + c[1] + c[2] + c[3]) / 4.0;
        if n.dot(&(mid - center)) <= 0.0 {
            return Some(format!("face {face} faces inward"));
        }
        if let Some(p) = c.iter().find(|p| n.dot(&(*p - mid)).abs() > tol) {
            return Some(format!("face {face} not planar at {p:?}"));
        }
        if pts.iter().any(|p| n.dot(&(p - mid)) > tol) {
            return Some(format!("corner outside face {face}"));
        }
        for k in 0..4 {
            let (a, b) = (c[k] - center, c[(k + 1) % 4] - center);
            volume += (mid - center).dot(&a.cross(&b)) / 6.0;
        }
    }
    (volume <= 0.0).then(|| format!("volume {volume}"))
}

fn random_edit(rng: &mut ChaCha8Rng, doc: &Document) -> DesignCommand {
    let max_id = doc.parts.keys().last().map_or(1, |p| p.0 + 1);
    let part = |rng: &mut ChaCha8Rng| PartId(rng.random_range(1..max_id + 1));
    let pick = rng.random_range(0..100);
    let p = part(rng);
    match pick {
        0..=17 => {
            let scrap = (rng.random_bool(0.8)).then(|| ScrapId(rng.random_range(1..=2)));
            let t = match scrap {
                Some(s) if rng.random_bool(0.9) => doc.scrap(s).map(|s| s.thickness_mm).unwrap_or(18.0),
                _ => [12.0, 18.0, 25.0][rng.random_range(0..3)],
            };
            let dims = [rng.random_range(20..400) as f64, rng.random_range(20..200) as f64, t];
            DesignCommand::SpawnPart { spec: SpawnSpec { scrap, dims: Some(dims), ..Default::default() } }
        }
        18..=47 => DesignCommand::PushPullFace {
            part: p,
            face: Face::ALL[rng.random_range(0..6)],
            delta_mm: rng.random_range(-150.0..150.0),
        },
        48..=74 => {
            let edges = Edge::all();
            let edge = edges[rng.random_range(0..edges.len())];
            let axis = if rng.random_bool(0.9) {
                if rng.random_bool(0.5) {
                    edge.0
                } else {
                    edge.1
                }
            } else {
                Face::ALL[rng.random_range(0..6)]
            };
            let delta_mm =
                if rng.random_bool(0.2) { rng.random_range(-1.0..1.0) } else { rng.random_range(-120.0..120.0) };
            DesignCommand::MoveEdge { part: p, edge, axis, delta_mm }
        }
        75..=86 => DesignCommand::DuplicatePart { part: p, link: rng.random_bool(0.6) },
        _ => {
            let n = rng.random_range(1..=3);
            let mut parts = vec![p];
            for _ in 1..n {
                parts.push(part(rng));
            }
            DesignCommand::LinkParts { parts }
        }
    }
}

fn geometry_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ff_c07);
    let (mut applied, mut rejected) = (0usize, 0usize);
    for seq in 0..10_000 {
        let mut s = Session::new();
        for _ in 0..2 {
            let t = [18.0, 20.0][rng.random_range(0..2)];
            let dims = [rng.random_range(300..1500) as f64, rng.random_range(100..600) as f64, t];
            s.apply(DesignCommand::RegisterScrap { scrap: pine(dims) });
        }
        let steps = rng.random_range(4..=12);
        for step in 0..steps {
            let cmd = random_edit(&mut rng, s.document());
            let label = format!("sequence {seq} step {step} {}", cmd.name());
            let before = s.document().clone();
            let event = s.apply(cmd);
            let doc = s.document();
            if event.ok {
                applied += 1;
            } else {
                rejected += 1;
                ensure(*doc == before, || format!("{label}: rejected edit changed the document"))?;
            }
            for part in doc.parts.values() {
                if let Some(defect) = solid_defect(&part.vertices, 1e-6) {
                    return Err(format!("{label}: {} {defect}", part.id));
                }
                if let Some(scrap) = part.source.scrap() {
                    let t = doc.scrap(scrap).unwrap().thickness_mm;
                    ensure((part.z_extent() - t).abs() <= 1e-6, || {
                        format!("{label}: {} is {} thick on a {t} mm scrap", part.id, part.z_extent())
                    })?;
                }
            }
            ensure(
                !doc.violations
                    .iter()
                    .any(|v| matches!(v.kind, ViolationKind::ResawViolation | ViolationKind::InvalidGeometry)),
                || format!("{label}: {:?}", doc.violations),
            )?;
        }
    }
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "10000 sequences, {applied} edits applied, {rejected} rejected unchanged, {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- packing

#[derive(Clone, Copy)]
struct Rect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// Exhaustive 1 mm grid: does a `w`×`h` rectangle (either orientation)
/// fit inside `l`×`wd` at least `kerf` away from every obstacle?
fn grid_oracle(l: f64, wd: f64, kerf: f64, obstacles: &[Rect], w: f64, h: f64) -> bool {
    for (w, h) in [(w, h), (h, w)] {
        let mut y = 0.0;
        while y + h <= wd {
            let mut x = 0.0;
            while x + w <= l {
                let clash = obstacles
                    .iter()
                    .any(|o| x < o.x + o.w + kerf && o.x < x + w + kerf && y < o.y + o.h + kerf && o.y < y + h + kerf);
                if !clash {
                    return true;
                }
                x += 1.0;
            }
            y += 1.0;
        }
    }
    false
}

fn point_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

fn inside(poly: &[Vec2], p: Vec2) -> bool {
    let mut odd = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x) {
            odd = !odd;
        }
    }
    odd
}

/// Minimum distance between two polygon boundaries, zero when they touch
/// or intersect.
fn polygon_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    if a.iter().any(|p| inside(b, *p)) || b.iter().any(|p| inside(a, *p)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (from, to) in [(a, b), (b, a)] {
        for p in from {
            for i in 0..to.len() {
                best = best.min(point_segment(*p, to[i], to[(i + 1) % to.len()]));
            }
        }
    }
    best
}

fn packing_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9ac4);
    let (mut agree, mut placements, mut fits, mut pairs) = (0usize, 0usize, 0usize, 0usize);
    for instance in 0..100 {
        let mut d = Document::default();
        let dims = [rng.random_range(60..=300) as f64, rng.random_range(60..=300) as f64, 18.0];
        let s = d.register_scrap(pine(dims)).unwrap();
        let (l, w) = (d.scrap(s).unwrap().length_mm, d.scrap(s).unwrap().width_mm);
        d.set_plan_mode(s, PackingMode::Manual).unwrap();
        let kerf = d.plans[&s].kerf_blade_mm;
        let n = rng.random_range(1..=5);
        for _ in 0..n {
            let (pw, ph) = (rng.random_range(10..=180) as f64, rng.random_range(10..=180) as f64);
            let obstacles: Vec<Rect> = d.plans[&s]
                .placements
                .keys()
                .map(|p| {
                    let b = d.placed_outline(*p).unwrap().bbox();
                    Rect { x: b.min.x, y: b.min.y, w: b.width(), h: b.height() }
                })
                .collect();
            let expected = grid_oracle(l, w, kerf, &obstacles, pw, ph);
            let p =
                d.spawn_part(SpawnSpec { scrap: Some(s), dims: Some([pw, ph, 18.0]), ..Default::default() }).unwrap();
            let got = !d.violations.iter().any(|v| v.parts.contains(&p));
            placements += 1;
            ensure(got == expected, || format!("instance {instance} {p}: place_auto fits={got}, oracle {expected}"))?;
            agree += 1;
            if got {
                fits += 1;
                let b = d.placed_outline(p).unwrap().bbox();
                let r = Rect { x: b.min.x, y: b.min.y, w: b.width(), h: b.height() };
                ensure(
                    r.x >= 0.0
                        && r.y >= 0.0
                        && r.x + r.w <= l
                        && r.y + r.h <= w
                        && r.x.fract() == 0.0
                        && r.y.fract() == 0.0,
                    || format!("instance {instance} {p}: placed off grid or sheet"),
                )?;
            }
        }
        let ids: Vec<PartId> = d.plans[&s].placements.keys().copied().collect();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                let flagged = d.violations.iter().any(|v| {
                    v.kind == ViolationKind::Overlap2D && v.parts.contains(&ids[i]) && v.parts.contains(&ids[j])
                });
                if flagged {
                    continue;
                }
                pairs += 1;
                let a = d.placed_outline(ids[i]).unwrap();
                let b = d.placed_outline(ids[j]).unwrap();
                let dist = polygon_distance(a.vertices(), b.vertices());
                ensure(dist >= kerf - 1e-6, || {
                    format!("instance {instance}: {} and {} are {dist} mm apart", ids[i], ids[j])
                })?;
            }
        }
    }
    within(start.elapsed(), 120.0)?;
    Ok(format!(
        "{agree}/{placements} placements agree with the grid oracle ({fits} fit), {pairs} unflagged pairs ≥ 3 mm apart"
    ))
}

// ------------------------------------------------------------ auto_resolve

fn scrambled_plan(seed: u64) -> (Document, ScrapId) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut d = Document::default();
        let dims = [rng.random_range(200..=300) as f64, rng.random_range(200..=300) as f64, 18.0];
        let s = d.register_scrap(pine(dims)).unwrap();
        let (l, w) = (d.scrap(s).unwrap().length_mm, d.scrap(s).unwrap().width_mm);
        d.set_plan_mode(s, PackingMode::Manual).unwrap();
        let n = rng.random_range(2..=5);
        for _ in 0..n {
            let dims = [rng.random_range(20..=90) as f64, rng.random_range(20..=90) as f64, 18.0];
            d.spawn_part(SpawnSpec { scrap: Some(s), dims: Some(dims), ..Default::default() }).unwrap();
        }
        if !d.violations.is_empty() {
            continue;
        }
        let ids: Vec<PartId> = d.plans[&s].placements.keys().copied().collect();
        for id in &ids {
            let fp = d.footprint(*id).unwrap().bbox();
            let rot = QuarterTurn::ALL[rng.random_range(0..4)];
            let (pw, ph) = if rot.degrees() % 180 == 0 { (fp.width(), fp.height()) } else { (fp.height(), fp.width()) };
            let pl = d.plans.get_mut(&s).unwrap().placements.get_mut(id).unwrap();
            pl.rotation_deg = rot;
            pl.position_mm = [rng.random_range(0.0..=l - pw), rng.random_range(0.0..=w - ph)];
            pl.pinned = false;
        }
        d.refresh_derived();
        if d.violations.iter().any(|v| v.kind == ViolationKind::Overlap2D) {
            return (d, s);
        }
    }
}

fn auto_resolve_check() -> Outcome {
    let start = Instant::now();
    let mut max_iter = 0;
    for seed in 0..100u64 {
        let mut digests = Vec::new();
        for _ in 0..2 {
            let (mut d, s) = scrambled_plan(seed);
            let report = d.resolve_plan(s).unwrap();
            max_iter = max_iter.max(report.iterations);
            ensure(report.iterations <= 64, || format!("seed {seed}: {} iterations", report.iterations))?;
            ensure(report.residual_overlaps == 0 && d.violations.is_empty(), || {
                format!(
                    "seed {seed}: residual {} after {} iterations, {} violations",
                    report.residual_overlaps,
                    report.iterations,
                    d.violations.len()
                )
            })?;
            let settled = d.clone();
            let again = d.resolve_plan(s).unwrap();
            ensure(again.moved.is_empty() && d == settled, || {
                format!("seed {seed}: not a fixed point, moved {:?}", again.moved)
            })?;
            digests.push(digest(&d));
        }
        ensure(digests[0] == digests[1], || format!("seed {seed}: digests differ"))?;
    }
    Ok(format!(
        "100 configurations resolved, max {max_iter} iterations, fixed points, stable digests, {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

// ------------------------------------------------------------- 3D resolve

struct Planes(Vec<(Vec3, f64)>);

impl Planes {
    fn of(part: &Part) -> Planes {
        let pts = world_corners(part);
        let center = pts.iter().sum::<Vec3>() / 8.0;
        let planes = Face::ALL
            .iter()
            .map(|f| {
                let c = f.corners().map(|i| pts[i]);
                let mut n = (c[2] - c[0]).cross(&(c[3] - c[1])).normalize();
                let mid = (c[0] + c[1] + c[2] + c[3]) / 4.0;
                if n.dot(&(mid - center)) < 0.0 {
                    n = -n;
                }
                (n, n.dot(&mid))
            })
            .collect();
        Planes(planes)
    }

    /// How far `p` is inside, negative when outside.
    fn depth(&self, p: &Vec3) -> f64 {
        self.0.iter().map(|(n, d)| d - n.dot(p)).fold(f64::INFINITY, f64::min)
    }
}

fn bounds(pts: &[Vec3]) -> (Vec3, Vec3) {
    let lo = pts.iter().fold(Vec3::repeat(f64::INFINITY), |m, p| m.inf(p));
    let hi = pts.iter().fold(Vec3::repeat(f64::NEG_INFINITY), |m, p| m.sup(p));
    (lo, hi)
}

/// Deepest 0.5 mm lattice point lying inside both parts.
fn sampled_penetration(a: &Part, b: &Part) -> f64 {
    let (pa, pb) = (Planes::of(a), Planes::of(b));
    let (alo, ahi) = bounds(&world_corners(a));
    let (blo, bhi) = bounds(&world_corners(b));
    let (lo, hi) = (alo.sup(&blo), ahi.inf(&bhi));
    if (0..3).any(|k| lo[k] >= hi[k]) {
        return 0.0;
    }
    let step = 0.5;
    let start = lo.map(|v| (v / step).floor() * step);
    let mut worst: f64 = 0.0;
    let mut x = start.x;
    while x <= hi.x {
        let mut y = start.y;
        while y <= hi.y {
            let mut z = start.z;
            while z <= hi.z {
                let p = Vec3::new(x, y, z);
                worst = worst.max(pa.depth(&p).min(pb.depth(&p)));
                z += step;
            }
            y += step;
        }
        x += step;
    }
    worst
}

fn random_dims(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random_range(10.0..40.0), rng.random_range(10.0..40.0), rng.random_range(10.0..40.0)]
}

fn random_euler(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random_range(-180.0..180.0), rng.random_range(-90.0..90.0), rng.random_range(-180.0..180.0)]
}

fn resolution_3d() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x3d);
    let (mut mtv_cases, mut unresolved, mut worst_sample, mut worst_mtv) = (0, 0, 0.0f64, 0.0f64);
    for case in 0..1000 {
        let mut d = Document::default();
        d.set_rotation_snap(false);
        let room = case % 2 == 1;
        let axis_aligned = !room && case % 4 == 0;
        if room {
            d.load_scene_mesh(SceneMesh::box_room([400.0, 400.0, 300.0]).triangles).unwrap();
            let dims = random_dims(&mut rng);
            let b = d
                .spawn_part(SpawnSpec { dims: Some(dims), position: Some([200.0, 200.0, 150.0]), ..Default::default() })
                .unwrap();
            let mut t = [200.0, 200.0, 150.0];
            let (axis, high) = (rng.random_range(0..3), rng.random_bool(0.5));
            let limit = [400.0, 400.0, 300.0][axis];
            t[axis] = if high { limit - rng.random_range(0.0..20.0) } else { rng.random_range(-20.0..0.0) };
            let euler = random_euler(&mut rng);
            if d.propose_move(b, t, euler).is_err() {
                unresolved += 1;
            }
            let part = d.part(b).unwrap();
            let corners = world_corners(part);
            let mut samples = Vec::new();
            for e in Edge::all() {
                let [i, j] = e.corners();
                let (p, q) = (corners[i], corners[j]);
                let n = ((q - p).norm() / 0.5).ceil() as usize;
                samples.extend((0..=n).map(|k| p + (q - p) * (k as f64 / n as f64)));
            }
            for p in samples {
                let out = [-p.x, -p.y, -p.z, p.x - 400.0, p.y - 400.0, p.z - 300.0].into_iter().fold(0.0, f64::max);
                worst_sample = worst_sample.max(out);
            }
        } else {
            let (ea, eb) =
                if axis_aligned { ([0.0; 3], [0.0; 3]) } else { (random_euler(&mut rng), random_euler(&mut rng)) };
            let a = d.spawn_part(SpawnSpec { dims: Some(random_dims(&mut rng)), ..Default::default() }).unwrap();
            let ta = [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)];
            d.propose_move(a, ta, ea).unwrap();
            let b = d
                .spawn_part(SpawnSpec {
                    dims: Some(random_dims(&mut rng)),
                    position: Some([1e4; 3]),
                    ..Default::default()
                })
                .unwrap();
            let tb = [
                ta[0] + rng.random_range(-25.0..25.0),
                ta[1] + rng.random_range(-25.0..25.0),
                ta[2] + rng.random_range(-25.0..25.0),
            ];
            match d.propose_move(b, tb, eb) {
                Ok(pose) => {
                    let pose: Pose = pose.clone();
                    if axis_aligned {
                        mtv_cases += 1;
                        let (alo, ahi) = bounds(&world_corners(d.part(a).unwrap()));
                        let bx = d.part(b).unwrap().vertices.extents();
                        let (blo, bhi) = (Vec3::from(tb), Vec3::from(tb) + Vec3::from(bx));
                        let mut expected = Vec3::zeros();
                        let overlaps: Vec<(f64, f64)> = (0..3).map(|k| (ahi[k] - blo[k], bhi[k] - alo[k])).collect();
                        if overlaps.iter().all(|(f, r)| *f > CONTACT_TOL_MM && *r > CONTACT_TOL_MM) {
                            let k = (0..3)
                                .min_by(|&i, &j| {
                                    overlaps[i].0.min(overlaps[i].1).total_cmp(&overlaps[j].0.min(overlaps[j].1))
                                })
                                .unwrap();
                            let (f, r) = overlaps[k];
                            expected[k] = if f < r { f } else { -r };
                        }
                        let moved = pose.translation_vec() - Vec3::from(tb);
                        let err = (moved - expected).norm();
                        worst_mtv = worst_mtv.max(err);
                        ensure(err <= 1e-6, || format!("case {case}: displacement {moved:?}, MTV {expected:?}"))?;
                    }
                }
                Err(_) => unresolved += 1,
            }
            let (pa, pb) = (d.part(a).unwrap(), d.part(b).unwrap());
            let exact = d.intersection_test(a, b).unwrap().depth();
            ensure(exact <= CONTACT_TOL_MM, || format!("case {case}: SAT depth {exact}"))?;
            worst_sample = worst_sample.max(sampled_penetration(pa, pb));
        }
        ensure(worst_sample <= 1e-3, || format!("case {case}: sampled penetration {worst_sample}"))?;
    }
    Ok(format!(
        "1000 configurations, sampled penetration ≤ {worst_sample:.1e} mm, {mtv_cases} axis-aligned MTVs within {worst_mtv:.1e} mm, {unresolved} unresolved, {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

// ------------------------------------------------------------------ replay

fn offcut(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_offcut")).args(args).env_remove("OFFCUT_KERF_MM").output().unwrap()
}

/// Digests recorded on x86_64 Linux; any other platform must reproduce them.
const PINNED: [(&str, &str); 2] = [
    ("chair", "9bf2b3f73ff85d91f067ad2a88a8a8e3a66ce44b71483aa532e0c437d23b63c9"),
    ("slant_shelf", "78827e22ed15d7305a7efec0e43dad1876ab6af7f8c0382c2edf1b4cda6f3348"),
];

fn replay_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    for ((name, pinned), script) in PINNED.iter().zip([scripts::CHAIR, scripts::SLANT_SHELF]) {
        let path = dir.path().join(format!("{name}.json"));
        std::fs::write(&path, script).unwrap();
        let out = dir.path().join(format!("{name}.offcut.json"));
        let first = offcut(&["replay", path.to_str().unwrap(), "--digest", "--out", out.to_str().unwrap()]);
        let second = offcut(&["replay", path.to_str().unwrap(), "--digest"]);
        ensure(first.status.success() && second.status.success(), || format!("{name}: replay failed"))?;
        ensure(first.stdout == second.stdout, || format!("{name}: digests differ between runs"))?;
        let got = String::from_utf8(first.stdout).unwrap();
        ensure(got.trim() == *pinned, || format!("{name}: digest {} differs from the recorded {pinned}", got.trim()))?;
        let v = offcut(&["validate", out.to_str().unwrap()]);
        ensure(v.status.code() == Some(0), || {
            format!("{name}: validate exited {:?}: {}", v.status.code(), String::from_utf8_lossy(&v.stdout))
        })?;
        notes.push(format!("{name} {}", &pinned[..12]));
    }
    Ok(format!("{}; validate exits 0 on both", notes.join(", ")))
}

// ------------------------------------------------------------------- usage

fn usage_oracle() -> Outcome {
    let session = Session::run_script(&scripts::commands(scripts::CHAIR)).unwrap();
    let doc = session.document();
    let report = doc.usage_report();
    let mut total_cells = 0.0;
    let mut used_cells = 0.0;
    let mut by_group: BTreeMap<String, f64> = BTreeMap::new();
    let mut worst: f64 = 0.0;
    for scrap in doc.inventory.iter() {
        let outlines: Vec<(Polygon, Option<String>)> = doc.plans[&scrap.id]
            .placements
            .keys()
            .map(|p| (doc.placed_outline(*p).unwrap(), doc.part(*p).unwrap().assembly.clone()))
            .collect();
        let (l, w) = (scrap.length_mm as usize, scrap.width_mm as usize);
        let mut used = 0.0;
        for j in 0..w {
            for i in 0..l {
                let c = Vec2::new(i as f64 + 0.5, j as f64 + 0.5);
                let hit = outlines.iter().find(|(o, _)| {
                    let b = o.bbox();
                    c.x >= b.min.x && c.x <= b.max.x && c.y >= b.min.y && c.y <= b.max.y && inside(o.vertices(), c)
                });
                if let Some((_, g)) = hit {
                    used += 1.0;
                    if let Some(g) = g {
                        *by_group.entry(g.clone()).or_default() += 1.0;
                    }
                }
            }
        }
        total_cells += (l * w) as f64;
        used_cells += used;
        let row = report.scraps.iter().find(|u| u.scrap == scrap.id).unwrap();
        let diff = (row.used_fraction - used / (l * w) as f64).abs() * 100.0;
        worst = worst.max(diff);
        ensure(diff <= 0.1, || format!("scrap #{}: {:.3} pp off", scrap.id, diff))?;
    }
    let overall = used_cells / total_cells;
    let diff = (report.overall_fraction - overall).abs() * 100.0;
    worst = worst.max(diff);
    ensure(diff <= 0.1, || format!("overall: report {:.4}, oracle {overall:.4}", report.overall_fraction))?;
    ensure(report.groups.len() == by_group.len(), || "assembly sets differ".into())?;
    for (g, cells) in &by_group {
        let diff = (report.groups[g] - cells / total_cells).abs() * 100.0;
        worst = worst.max(diff);
        ensure(diff <= 0.1, || format!("assembly {g}: {diff:.3} pp off"))?;
    }
    let groups: Vec<String> = report.groups.iter().map(|(g, f)| format!("{g} {:.2}%", f * 100.0)).collect();
    Ok(format!(
        "overall {:.2}% ({}), worst deviation {worst:.4} pp",
        report.overall_fraction * 100.0,
        groups.join(", ")
    ))
}

// ------------------------------------------------------------------ export

fn same_polygon(a: &Polygon, b: &Polygon, tol: f64) -> bool {
    a.len() == b.len()
        && a.vertices().iter().all(|p| b.vertices().iter().any(|q| (p - q).norm() <= tol))
        && b.vertices().iter().all(|p| a.vertices().iter().any(|q| (p - q).norm() <= tol))
}

fn export_round_trip() -> Outcome {
    let mut chair = Session::run_script(&scripts::commands(scripts::CHAIR)).unwrap();
    let shelf = Session::run_script(&scripts::commands(scripts::SLANT_SHELF)).unwrap();
    let (mut rows, mut polys) = (0, 0);
    for session in [&chair, &shelf] {
        let doc = session.document();
        let csv_text = export::cut_list_csv(doc).unwrap();
        let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
        for record in reader.records() {
            let record = record.unwrap();
            rows += 1;
            let dims: Vec<f64> = (3..6).map(|k| record[k].parse().unwrap()).collect();
            for id in record[0].split(';') {
                let id = PartId(id.parse().unwrap());
                let model = doc.measure_part(id).unwrap();
                ensure(dims == model, || format!("{id}: cut list {dims:?}, model {model:?}"))?;
            }
        }
        for scrap in doc.inventory.iter() {
            for svg in [export::plan_svg_document(doc, scrap.id).unwrap(), export::overlay_svg(doc, scrap.id).unwrap()]
            {
                let parsed = export::parse_svg_cuts(&svg).unwrap();
                ensure(parsed.len() == doc.plans[&scrap.id].placements.len(), || {
                    format!("scrap #{}: cut count", scrap.id)
                })?;
                for (id, poly) in parsed {
                    polys += 1;
                    let model = doc.placed_outline(id).unwrap();
                    ensure(same_polygon(&poly, &model, 1e-6), || format!("{id}: svg {poly:?}, model {model:?}"))?;
                }
            }
        }
    }
    // a document carrying violations
    chair.apply_json(r#"{"cmd": "set_plan_mode", "scrap": 1, "mode": "manual"}"#);
    chair.apply_json(r#"{"cmd": "move_cut", "part": 1, "position_mm": [1100, 500]}"#);
    ensure(!chair.document().violations.is_empty(), || "expected violations".into())?;
    let dir = tempfile::tempdir().unwrap();
    for session in [&chair, &shelf] {
        let path = dir.path().join("doc.json");
        persist::save(session, &path).unwrap();
        let back = persist::load(&path).unwrap();
        ensure(back.document() == session.document(), || "loaded document differs".into())?;
        ensure(back.document().violations == session.document().violations, || "violations differ".into())?;
        ensure(back.history() == session.history(), || "history differs".into())?;
    }
    Ok(format!(
        "{rows} cut list rows exact, {polys} SVG polygons within 1e-6 mm, save/load equal with {} violations",
        chair.document().violations.len()
    ))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("defaults", defaults),
        ("geometry invariants", geometry_invariants),
        ("kerf packing oracle", packing_oracle),
        ("auto_resolve", auto_resolve_check),
        ("3D resolution", resolution_3d),
        ("replay determinism", replay_determinism),
        ("usage oracle", usage_oracle),
        ("export round-trip", export_round_trip),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
