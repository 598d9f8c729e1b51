//! Planar multi-object grasp planning.
//!
//! The crate covers convex-polygon geometry, friction-cone contact analysis,
//! the necessary-condition grasp planner with Monte-Carlo robustness, a
//! quasi-static grasp simulator, a learned grasp-count classifier ensemble
//! and a decluttering benchmark harness.

pub mod bench;
pub mod config;
pub mod contact;
pub mod error;
pub mod geometry;
pub mod mlp;
pub mod mognet;
pub mod planning;
pub mod rng;
pub mod scene;
pub mod sim;

pub use error::{GraspError, Result};
