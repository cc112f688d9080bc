//! Desk-scale human-robot collaboration toolkit: a hierarchical task
//! planner whose wait actions are released by human-intent classifiers
//! (eye gaze against areas of interest, or wearable IMU streams through
//! a recurrent network), plus a deterministic fixed-tick simulator that
//! measures how long the robot idles at each handover.

pub mod action;
pub mod gaze;
pub mod geom;
pub mod htn;
pub mod imu;
pub mod sim;
pub mod world;

pub use action::{IntentLabel, ObjectId, PerceiveChannel, PrimitiveAction, WaitCondition};
pub use geom::{Aabb, Quat, Vec3};
pub use world::{WorldState, TICK_S};
