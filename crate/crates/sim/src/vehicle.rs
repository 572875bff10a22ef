//! Point-mass multirotor following a waypoint list.

use coguide::frames::{wrap_angle, Path, Pose, Vec3};
use std::collections::VecDeque;
use std::f64::consts::PI;

/// Distance under which the active waypoint counts as reached.
pub const CONSUME_RADIUS: f64 = 0.05;
/// Maximum yaw rate.
pub const MAX_YAW_RATE: f64 = PI;

#[derive(Debug, Clone, PartialEq)]
pub struct UavState {
    /// Pose in the frame the waypoints are expressed in.
    pub pose: Pose,
    pub path: VecDeque<Pose>,
}

impl UavState {
    pub fn new(pose: Pose) -> Self {
        UavState { pose, path: VecDeque::new() }
    }

    pub fn idle(&self) -> bool {
        self.path.is_empty()
    }

    /// Replaces the active path.
    pub fn set_path(&mut self, path: &Path) {
        self.path = path.poses().iter().copied().collect();
    }
}

/// Motion of one step: translation in the control frame and yaw change.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Motion {
    pub translation: Vec3,
    pub yaw: f64,
}

/// Flies toward the active waypoint at `speed` without overshooting it,
/// drops waypoints within [`CONSUME_RADIUS`], and slews the heading toward
/// the waypoint heading at no more than [`MAX_YAW_RATE`].
pub fn uav_step(state: &mut UavState, speed: f64, dt: f64) -> Motion {
    while let Some(w) = state.path.front() {
        if (w.position - state.pose.position).norm() <= CONSUME_RADIUS && state.path.len() > 1 {
            state.path.pop_front();
        } else {
            break;
        }
    }
    let Some(target) = state.path.front().copied() else {
        return Motion::default();
    };
    let d = target.position - state.pose.position;
    let dist = d.norm();
    let step = (speed * dt).min(dist);
    let translation = if dist > 0.0 { d * (step / dist) } else { Vec3::zeros() };
    let want = wrap_angle(target.heading - state.pose.heading);
    let max = MAX_YAW_RATE * dt;
    let yaw = want.clamp(-max, max);
    state.pose.position += translation;
    state.pose.heading = wrap_angle(state.pose.heading + yaw);
    if (target.position - state.pose.position).norm() <= CONSUME_RADIUS {
        state.path.pop_front();
    }
    Motion { translation, yaw }
}
