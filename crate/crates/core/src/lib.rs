//! Semi-supervised anomaly detection on attributed graphs.
//!
//! A bias-free graph convolutional network maps every node to an embedding.
//! Training pulls normal-labeled nodes toward a fixed center `c` and, through a
//! sigmoid surrogate of the AUC, pushes anomalous-labeled nodes away from it.
//! The anomaly score of a node is its squared distance to `c`.
//!
//! ```no_run
//! use gcnad::datagen::{generate_synthetic, make_split, SplitSpec, SynthConfig};
//! use gcnad::eval::evaluate;
//! use gcnad::trainer::{train, TrainConfig};
//!
//! let (graph, truth) = generate_synthetic(&SynthConfig::default()).unwrap();
//! let split = make_split(&truth, &SplitSpec::default()).unwrap();
//! let cfg = TrainConfig::default();
//! let out = train::<f64>(&graph, &split, &truth, &cfg).unwrap();
//! let report = evaluate(&out.model, &out.center, &graph, &split, &truth, cfg.mode).unwrap();
//! println!("test AUC {:.3}", report.test_auc);
//! ```

pub mod adjacency;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod labels;
pub mod model;
pub mod objective;
pub mod real;
pub mod rng;
pub mod trainer;

pub use adjacency::{normalized_adjacency, propagate, NormalizedAdjacency};
pub use error::{Error, ErrorKind, Result};
pub use graph::{build_graph, identity_attributes, rescale_attributes, AttributedGraph};
pub use labels::{GroundTruth, Label, LabelSplit};
pub use model::{init_model, Activation, GcnModel};
pub use objective::{Center, Objective, ObjectiveValue};
pub use real::{Precision, Real};
pub use trainer::{train, Mode, TrainConfig, TrainHistory, TrainOutcome};
