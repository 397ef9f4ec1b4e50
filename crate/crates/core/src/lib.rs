//! Localization by registering semantic object maps.
//!
//! A vehicle builds a map of object centroids from its own observations. Every
//! vehicle object is associated with every reference object of the same class,
//! pairs of associations that preserve inter-object distance are joined in a
//! consistency graph, and the maximum clique of that graph gives the largest
//! mutually consistent correspondence set. A least-squares rigid fit over the
//! clique registers the vehicle map to the reference map.

pub mod association;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod mapper;
pub mod maxclique;
pub mod registration;
pub mod submap;
pub mod synth;
pub mod tracker;
pub mod types;

pub use association::{
    build_consistency_graph, generate_associations, pairwise_distance_error, Association,
    ConsistencyGraph,
};
pub use error::{Error, Result};
pub use graph::Graph;
pub use maxclique::{
    greedy_clique, max_clique, max_clique_colored, max_clique_with, CliqueOptions, CliqueResult,
};
pub use registration::{fit_rigid, register, RegistrationParams, RegistrationResult};
pub use submap::partition_submaps;
pub use types::{apply_transform, ObjectMap, Point3, RigidTransform, SemanticObject, SubmapSet, TimedPose};
