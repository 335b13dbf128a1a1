//! Proving motion-planning infeasibility on a discretized configuration
//! space.
//!
//! The obstacle region is built incrementally by sampling; after each round
//! the free cells are segmented into connected components. Once start and
//! goal land in different components no path exists at this resolution,
//! because sampled obstacle cells are always a subset of the true ones.

pub mod bitmap;
pub mod engine;
pub mod geometry;
pub mod kinematics;
pub mod oracle;
pub mod sampler;
pub mod scenario;
pub mod segmentation;

pub use bitmap::{write_pgm, CSpaceBitmap, GridError, GridSpec};
pub use engine::{
    prove_infeasibility, prove_with_timeout, write_stats_csv, Completion, EngineError, EngineParams, IterationRecord, Run,
    Verdict, VerdictKind,
};
pub use geometry::{GeometryError, Point2, Polygon2, Triangle2};
pub use kinematics::{
    collision_check, CollisionCause, CollisionReport, Configuration, KinematicsError, Link, Obstacle, RigidBody, RobotModel,
    SerialChain,
};
pub use sampler::{SampleSet, SampleStats, SamplerError, SamplerParams};
pub use scenario::{load_scenario, parse_scenario, suggest_resolution, Scenario, ScenarioError};
pub use segmentation::{segment, segment_check, Connectivity, LabelField, SegmentError};
