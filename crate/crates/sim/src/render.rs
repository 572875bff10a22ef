//! Top-down SVG renders of worlds and trajectories.

use crate::world::World;
use coguide::frames::Vec3;
use coguide::poly2d::{svg_layers, union, MultiPolygon, Polygon, Vec2};

/// Footprints of all obstacles crossing the horizontal plane at `z`.
pub fn world_slice(world: &World, z: f64) -> MultiPolygon {
    let mut parts: Vec<MultiPolygon> = Vec::new();
    for b in world.boxes.iter().filter(|b| b.min.z <= z && b.max.z >= z) {
        parts.push(Polygon::rect(Vec2::new(b.min.x, b.min.y), Vec2::new(b.max.x, b.max.y)).into());
    }
    for c in world.cylinders.iter().filter(|c| c.z_min <= z && c.z_max >= z) {
        let ring = (0..24)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 24.0;
                Vec2::new(c.x + c.radius * a.cos(), c.y + c.radius * a.sin())
            })
            .collect();
        parts.push(Polygon::new(ring, Vec::new()).into());
    }
    parts.into_iter().fold(MultiPolygon::empty(), |acc, m| union(&acc, &m))
}

/// World slice with one polyline per trajectory.
pub fn trajectories_svg(world: &World, z: f64, trajectories: &[(&str, &[Vec3], &str)]) -> String {
    let slice = world_slice(world, z);
    let lines: Vec<(&str, Vec<Vec2>, &str)> = trajectories
        .iter()
        .map(|(name, pts, color)| (*name, pts.iter().map(|p| p.xy()).collect(), *color))
        .collect();
    let line_refs: Vec<(&str, &[Vec2], &str)> = lines.iter().map(|(n, p, c)| (*n, p.as_slice(), *c)).collect();
    svg_layers(&[("obstacles", &slice, "#444444")], &line_refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::make_gap_world;

    #[test]
    fn gap_slice_has_gap() {
        let w = make_gap_world(0.4, 0.1);
        let s = world_slice(&w, 1.5);
        assert!(!s.contains(&Vec2::new(0.0, 0.0)));
        assert!(s.contains(&Vec2::new(0.0, 1.0)));
        let svg = trajectories_svg(&w, 1.5, &[("p", &[Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)], "red")]);
        assert!(svg.starts_with("<svg"));
    }
}
