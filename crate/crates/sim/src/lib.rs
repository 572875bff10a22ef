//! Deterministic simulation of a primary and a secondary multirotor running
//! the cooperative guidance loop: worlds, sensors, noise models, a wire
//! codec, vehicle kinematics and a seeded experiment runner.

pub mod codec;
pub mod experiment;
pub mod lidar;
pub mod localization;
pub mod render;
pub mod vehicle;
pub mod world;
