//! Independent oracles for the planner, the polygon kernel and viewpoint
//! selection.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use coguide::frames::{FrameId, Path, Pose, Vec3};
use coguide::guidance::{find_guiding_viewpoint, GuidanceParams};
use coguide::planner::{find_path, plan, postprocess, voxel_clear, PlanRequest};
use coguide::poly2d::*;
use coguide::voxel_map::{CellState, OccupancyMap};
use coguide_sim::world::{Aabb, Cylinder, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ═══════════════════════════════════════════════════════════════════════
// Planner: A* against Dijkstra on the same integer cost model
// ═══════════════════════════════════════════════════════════════════════

const N: usize = 32;

fn random_map(rng: &mut ChaCha8Rng) -> OccupancyMap {
    let mut m = OccupancyMap::new(0.1, Vec3::zeros(), [N, N, N]).unwrap();
    let unknown = rng.gen_range(0.0..0.3);
    let occupied = rng.gen_range(0.0..0.25);
    let states: Vec<CellState> = (0..N * N * N)
        .map(|_| {
            let u: f64 = rng.gen();
            if u < occupied {
                CellState::Occupied
            } else if u < occupied + unknown {
                CellState::Unknown
            } else {
                CellState::Free
            }
        })
        .collect();
    let mut k = 0;
    m.fill_with(|_| {
        k += 1;
        states[k - 1]
    });
    m
}

fn step_cost(map: &OccupancyMap, to: [usize; 3], d: [i64; 3], penalty: f64) -> u64 {
    let mult = if map.state_at(to) == CellState::Unknown { penalty } else { 1.0 };
    let len = ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt();
    (len * 1e6 * mult).round() as u64
}

fn dijkstra(map: &OccupancyMap, s: [usize; 3], t: [usize; 3], d_min: f64, penalty: f64) -> Option<u64> {
    let idx = |v: [usize; 3]| (v[2] * N + v[1]) * N + v[0];
    let ok = |v: [usize; 3]| map.state_at(v) != CellState::Occupied && map.obs_dist_at(v) >= d_min - 1e-9;
    let mut dist = vec![u64::MAX; N * N * N];
    let mut heap = BinaryHeap::from([Reverse((0u64, s))]);
    dist[idx(s)] = 0;
    while let Some(Reverse((d, v))) = heap.pop() {
        if v == t {
            return Some(d);
        }
        if d > dist[idx(v)] {
            continue;
        }
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let w = [v[0] as i64 + dx, v[1] as i64 + dy, v[2] as i64 + dz];
                    if (dx, dy, dz) == (0, 0, 0) || w.iter().any(|&c| c < 0 || c >= N as i64) {
                        continue;
                    }
                    let w = [w[0] as usize, w[1] as usize, w[2] as usize];
                    if ok(w) {
                        let nd = d + step_cost(map, w, [dx, dy, dz], penalty);
                        if nd < dist[idx(w)] {
                            dist[idx(w)] = nd;
                            heap.push(Reverse((nd, w)));
                        }
                    }
                }
            }
        }
    }
    None
}

/// True when some voxel whose closed cell contains `p` is clear, so points on
/// a shared face, edge or corner count as clear if any adjacent voxel is.
fn closed_cell_clear(map: &OccupancyMap, p: &Vec3, d_min: f64) -> bool {
    let o = map.origin();
    let res = map.resolution();
    let dims = map.dims();
    let mut options: [Vec<usize>; 3] = Default::default();
    for a in 0..3 {
        let u = (p[a] - o[a]) / res;
        let r = u.round();
        let cand: Vec<i64> = if (u - r).abs() < 1e-9 { vec![r as i64 - 1, r as i64] } else { vec![u.floor() as i64] };
        options[a] = cand.into_iter().filter(|&i| i >= 0 && i < dims[a] as i64).map(|i| i as usize).collect();
    }
    options[0].iter().any(|&i| {
        options[1].iter().any(|&j| {
            options[2].iter().any(|&k| {
                let idx = [i, j, k];
                map.state_at(idx) != CellState::Occupied && map.obs_dist_at(idx) >= d_min - 1e-9
            })
        })
    })
}

/// Returns (cases with a start and goal, connected cases, problems).
pub fn planner_oracle() -> (usize, usize, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut problems = Vec::new();
    let (mut cases, mut connected) = (0, 0);
    for case in 0..200 {
        let map = random_map(&mut rng);
        let d_min = [0.0, 0.1, 0.15][case % 3];
        let penalty = [1.0, 2.0, 3.5][case % 3];
        let mut pick = || {
            (0..1000)
                .map(|_| [rng.gen_range(0..N), rng.gen_range(0..N), rng.gen_range(0..N)])
                .find(|&v| voxel_clear(&map, v, d_min))
        };
        let (Some(s), Some(t)) = (pick(), pick()) else { continue };
        cases += 1;
        let mut req = PlanRequest::new(
            &map,
            Pose::new(map.center_of(s), 0.0, FrameId::Local),
            Pose::new(map.center_of(t), 0.0, FrameId::Local),
            d_min,
        );
        req.unknown_penalty = penalty;
        let res = find_path(&req);
        let oracle = dijkstra(&map, s, t, d_min, penalty);
        if res.cost_units != oracle {
            problems.push(format!("case {case}: A* {:?} vs Dijkstra {oracle:?}", res.cost_units));
        }
        let Some(raw) = res.path else { continue };
        connected += 1;
        let short = postprocess(&raw, &map, d_min);
        let raw_pos: Vec<Vec3> = raw.positions().collect();
        for p in short.positions() {
            if map.obs_dist(&p) < d_min - 1e-9 {
                problems.push(format!("case {case}: waypoint {p:?} closer than {d_min}"));
            }
        }
        // new shortcut segments must stay clear at every sample; kept raw
        // steps join 26-neighbours that are clear themselves
        for w in short.poses().windows(2) {
            let kept = raw_pos.windows(2).any(|r| r[0] == w[0].position && r[1] == w[1].position);
            if kept {
                continue;
            }
            let (a, b) = (w[0].position, w[1].position);
            let n = ((b - a).norm() / 0.005).ceil() as usize;
            for k in 0..=n {
                let p = a + (b - a) * (k as f64 / n as f64);
                if !closed_cell_clear(&map, &p, d_min) {
                    problems.push(format!("case {case}: shortcut through {p:?}"));
                    break;
                }
            }
        }
    }
    (cases, connected, problems)
}

// ═══════════════════════════════════════════════════════════════════════
// Polygons: 1 mm scanline rasterization of the raw rings
// ═══════════════════════════════════════════════════════════════════════

const PIXEL: f64 = 1e-3;

fn rings(m: &MultiPolygon) -> Vec<Vec<Vec2>> {
    m.parts.iter().flat_map(|p| std::iter::once(p.outer.clone()).chain(p.holes.iter().cloned())).collect()
}

fn centers_below(x: f64) -> i64 {
    (x / PIXEL - 0.5).ceil() as i64
}

/// Area of the region where `pred` holds over the even-odd membership in
/// each set, counted at 1 mm pixel centers.
fn raster_area(sets: &[&MultiPolygon], pred: impl Fn(&[bool]) -> bool) -> f64 {
    let all: Vec<Vec<Vec<Vec2>>> = sets.iter().map(|m| rings(m)).collect();
    let ys = all.iter().flatten().flatten().map(|p| p.y);
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), y| (l.min(y), h.max(y)));
    if !lo.is_finite() {
        return 0.0;
    }
    let mut count = 0i64;
    let mut events: Vec<(f64, usize)> = Vec::new();
    for j in (lo / PIXEL).floor() as i64 - 1..=(hi / PIXEL).ceil() as i64 + 1 {
        let y = (j as f64 + 0.5) * PIXEL;
        events.clear();
        for (k, rs) in all.iter().enumerate() {
            for r in rs {
                for i in 0..r.len() {
                    let (a, b) = (r[i], r[(i + 1) % r.len()]);
                    if (a.y > y) != (b.y > y) {
                        events.push((a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y), k));
                    }
                }
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut inside = vec![false; sets.len()];
        for w in 0..events.len() {
            inside[events[w].1] ^= true;
            if w + 1 < events.len() && pred(&inside) {
                count += centers_below(events[w + 1].0) - centers_below(events[w].0);
            }
        }
    }
    count as f64 * PIXEL * PIXEL
}

fn star(rng: &mut ChaCha8Rng, c: Vec2, r_min: f64, r_max: f64, n: usize) -> Vec<Vec2> {
    let step = 2.0 * PI / n as f64;
    (0..n)
        .map(|k| {
            let a = step * (k as f64 + rng.gen_range(-0.25..0.25));
            c + Vec2::new(a.cos(), a.sin()) * rng.gen_range(r_min..r_max)
        })
        .collect()
}

fn random_shape(rng: &mut ChaCha8Rng) -> MultiPolygon {
    let c = Vec2::new(rng.gen_range(0.6..1.4), rng.gen_range(0.6..1.4));
    match rng.gen_range(0..3) {
        0 => {
            let n = rng.gen_range(5..25);
            Polygon::new(star(rng, c, 0.3, 0.6, n), vec![]).into()
        }
        1 => {
            let (n, m) = (rng.gen_range(8..25), rng.gen_range(3..10));
            let outer = star(rng, c, 0.4, 0.6, n);
            Polygon::new(outer, vec![star(rng, c, 0.05, 0.2, m)]).into()
        }
        _ => (0..rng.gen_range(1..4)).fold(MultiPolygon::empty(), |acc, _| {
            let x0 = rng.gen_range(0..6) as f64 * 0.25;
            let y0 = rng.gen_range(0..6) as f64 * 0.25;
            let w = rng.gen_range(1..4) as f64 * 0.25;
            let h = rng.gen_range(1..4) as f64 * 0.25;
            union(&acc, &Polygon::rect(Vec2::new(x0, y0), Vec2::new(x0 + w, y0 + h)).into())
        }),
    }
}

/// Returns (worst symmetric difference over its bound, worst relative
/// inclusion-exclusion error, POI shortfall count, problems).
pub fn polygon_oracle() -> (f64, f64, usize, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut problems = Vec::new();
    let (mut worst_ratio, mut worst_ie) = (0.0f64, 0.0f64);
    for case in 0..200 {
        let a = random_shape(&mut rng);
        let b = random_shape(&mut rng);
        let op = [BooleanOp::Union, BooleanOp::Intersection, BooleanOp::Difference][case % 3];
        let out = boolean_op(op, &a, &b);
        let sym = raster_area(&[&a, &b, &out], |s| {
            let want = match op {
                BooleanOp::Union => s[0] || s[1],
                BooleanOp::Intersection => s[0] && s[1],
                BooleanOp::Difference => s[0] && !s[1],
            };
            want != s[2]
        });
        let bound = 2.0 * (a.perimeter() + b.perimeter() + out.perimeter()) * PIXEL;
        worst_ratio = worst_ratio.max(sym / bound);
        if sym > bound {
            problems.push(format!("case {case} {op:?}: {sym} > {bound}"));
        }
        let lhs = union(&a, &b).area() + intersection(&a, &b).area();
        let rhs = a.area() + b.area();
        let rel = (lhs - rhs).abs() / rhs;
        worst_ie = worst_ie.max(rel);
        if rel > 1e-6 {
            problems.push(format!("case {case}: inclusion-exclusion off by {rel}"));
        }
    }
    let mut shortfalls = 0;
    for case in 0..50 {
        let c = Vec2::new(1.0, 1.0);
        let n = rng.gen_range(5..20);
        let outer = star(&mut rng, c, 0.3, 1.0, n);
        let holes = if case % 3 == 0 { vec![star(&mut rng, c, 0.05, 0.15, 5)] } else { vec![] };
        let poly = Polygon::new(outer, holes);
        let precision = 0.02;
        let Ok((p, r)) = pole_of_inaccessibility(&poly, precision) else {
            problems.push(format!("poi case {case}: no result"));
            continue;
        };
        let (lo, hi) = poly.bbox();
        let step = precision / 4.0;
        let mut brute = f64::NEG_INFINITY;
        for i in 0..=((hi.x - lo.x) / step) as usize {
            for j in 0..=((hi.y - lo.y) / step) as usize {
                let q = Vec2::new(lo.x + i as f64 * step, lo.y + j as f64 * step);
                brute = brute.max(poly.signed_distance(&q));
            }
        }
        if !poly.contains(&p) || r < brute - precision {
            shortfalls += 1;
            problems.push(format!("poi case {case}: {r} vs grid {brute}"));
        }
    }
    (worst_ratio, worst_ie, shortfalls, problems)
}

// ═══════════════════════════════════════════════════════════════════════
// Viewpoints: validity and brute-force prefix optimality
// ═══════════════════════════════════════════════════════════════════════

fn random_world(rng: &mut ChaCha8Rng) -> World {
    let mut w = World { boxes: Vec::new(), cylinders: Vec::new() };
    for _ in 0..rng.gen_range(2..7) {
        let c = Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.0);
        let h = Vec3::new(rng.gen_range(0.1..1.5), rng.gen_range(0.1..1.5), 0.0);
        let top = if rng.gen_bool(0.8) { 3.0 } else { rng.gen_range(0.5..1.2) };
        w.boxes.push(Aabb::new(c - h, c + h + Vec3::new(0.0, 0.0, top)));
    }
    for _ in 0..rng.gen_range(0..8) {
        w.cylinders.push(Cylinder {
            x: rng.gen_range(-5.0..5.0),
            y: rng.gen_range(-5.0..5.0),
            radius: rng.gen_range(0.1..0.4),
            z_min: 0.0,
            z_max: 3.0,
        });
    }
    w
}

fn segment_distance2(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

fn path_distance(p: &Vec2, path: &Path) -> f64 {
    let pts: Vec<Vec2> = path.positions().map(|q| Vec2::new(q.x, q.y)).collect();
    if pts.len() == 1 {
        return (p - pts[0]).norm();
    }
    pts.windows(2).map(|w| segment_distance2(p, &w[0], &w[1])).fold(f64::INFINITY, f64::min)
}

/// True when no 0.5 mm sample of the segment lies in an occupied voxel.
fn sampled_los(map: &OccupancyMap, a: &Vec3, b: &Vec3) -> bool {
    let n = ((b - a).norm() / 5e-4).ceil().max(1.0) as usize;
    (0..=n).all(|k| {
        let p = a + (b - a) * (k as f64 / n as f64);
        map.index_of(&p).map_or(true, |i| map.state_at(i) != CellState::Occupied)
    })
}

/// Leading waypoints seen from `p`, each sight line cast in the waypoint's
/// horizontal slice and no longer than `d_ray`.
fn slice_prefix(map: &OccupancyMap, p: &Vec2, path: &Path, d_ray: f64) -> usize {
    path.positions()
        .take_while(|w| {
            let q = Vec3::new(p.x, p.y, w.z);
            (q - w).norm() < d_ray && sampled_los(map, w, &q)
        })
        .count()
}

pub struct ViewpointSummary {
    pub worlds: usize,
    pub returned: usize,
    pub problems: Vec<String>,
}

pub fn viewpoint_oracle() -> ViewpointSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = GuidanceParams { d_s: 0.4, ..GuidanceParams::default() };
    let mut out = ViewpointSummary { worlds: 0, returned: 0, problems: Vec::new() };
    let z = 1.55;
    while out.worlds < 100 {
        let world = random_world(&mut rng);
        let mut map = OccupancyMap::new(0.1, Vec3::new(-6.0, -6.0, 0.0), [120, 120, 30]).unwrap();
        world.rasterize(&mut map);
        let mut sample = |clear: f64| {
            (0..200)
                .map(|_| Vec3::new(rng.gen_range(-5.5..5.5), rng.gen_range(-5.5..5.5), z))
                .find(|p| map.obs_dist(p) > clear)
        };
        let (Some(s), Some(g), Some(x_p)) = (sample(params.d_s), sample(params.d_s), sample(params.d_p)) else {
            continue;
        };
        let req = PlanRequest::new(&map, Pose::new(s, 0.0, FrameId::Local), Pose::new(g, 0.0, FrameId::Local), params.d_s);
        let Some(path) = plan(&req).path else { continue };
        out.worlds += 1;
        let search = find_guiding_viewpoint(&map, &path, &x_p, &params);
        let Some(v) = search.viewpoint else { continue };
        out.returned += 1;
        let id = out.worlds;
        let v2 = Vec2::new(v.x, v.y);
        let wp0 = path.first().unwrap().position;
        if map.obs_dist(&v) <= params.d_p {
            out.problems.push(format!("world {id}: (a) obs_dist {}", map.obs_dist(&v)));
        }
        if path_distance(&v2, &path) < params.d_buffer - 1e-6 {
            out.problems.push(format!("world {id}: (b) {} from path", path_distance(&v2, &path)));
        }
        if !sampled_los(&map, &v, &wp0) {
            out.problems.push(format!("world {id}: (c) no line of sight to the first waypoint"));
        }
        let got = slice_prefix(&map, &v2, &path, params.d_ray);
        let o = map.origin();
        let mut best = 0;
        for i in 0..120 {
            for j in 0..120 {
                let c = Vec2::new(o.x + (i as f64 + 0.5) * 0.1, o.y + (j as f64 + 0.5) * 0.1);
                if search.safe_closest.contains(&c) && path_distance(&c, &path) >= params.d_buffer {
                    best = best.max(slice_prefix(&map, &c, &path, params.d_ray));
                }
            }
        }
        if got < best {
            out.problems.push(format!("world {id}: (d) prefix {got} < grid best {best}"));
        }
    }
    out
}
