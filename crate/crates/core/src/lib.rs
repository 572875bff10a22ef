//! Cooperative guidance stack for a sensor-rich primary vehicle steering a
//! sensor-poor secondary vehicle through cluttered space.

pub mod frames;
pub mod guidance;
pub mod voxel_map;
pub mod planner;
pub mod poly2d;
