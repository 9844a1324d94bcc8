//! Topological analysis of small ReLU/softmax classifiers.
//!
//! The crate is organised around the life cycle of a classification
//! experiment on manifold-shaped data:
//!
//! - [`data`] samples labelled manifolds (annulus, torus, ball/shell, linked tori).
//! - [`separator`] builds explicit distance-quotient separators and checks
//!   whether class images can be enclosed in disjoint convex discs.
//! - [`nn`] trains dense ReLU networks with a softmax head and traces the
//!   per-layer point clouds.
//! - [`moves`] decomposes each layer's action into scaling, rotation,
//!   reflection, translation, bending and quotienting evidence.
//! - [`simplex`] maps logits onto the probability simplex and checks that
//!   every class lands inside the Voronoi cell of its vertex.
//! - [`embedding`] provides Isomap projections and ε-graph component counts
//!   for inspecting high-dimensional activations.
//! - [`io`] reads and writes the plain-text dataset, cloud and checkpoint formats.

pub mod cloud;
pub mod data;
pub mod embedding;
pub mod error;
pub mod io;
pub mod linalg;
pub mod moves;
pub mod nn;
pub mod separator;
pub mod simplex;

pub use cloud::PointCloud;
pub use data::{generate, LabeledPointSet, Shape, ShapeSpec};
pub use embedding::{epsilon_components, isomap, ComponentAssignment, EpsRule, IsomapEmbedding};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use moves::{
    classify_relu_action, decompose_linear, layer_move_summary, LinearMoveReport, MoveReport,
    ReluAction, ReluActionReport, TopologicalMove,
};
pub use nn::{
    forward, head, trace_activations, train, Activation, ActivationTrace, Hyperparams, LayerSpec,
    Network, NetworkSpec, TrainingOutcome,
};
pub use separator::{
    disc_separability_check, kernel_collision_witness, lift_to_rk, urysohn_multiclass,
    urysohn_pair, KernelWitness, ScalarField, SeparabilityVerdict,
};
pub use simplex::{
    separation_verdict, softmax_map, voronoi_cell_of, Cell, SeparationVerdict, SimplexPoint,
};
