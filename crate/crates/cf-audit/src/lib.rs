//! Counterfactual explanation auditing for black-box classifiers.
//!
//! The library has two core procedures:
//!
//! * **Local Risk Assessment (LRA)** — given an instance `x` and query access
//!   to a classifier, estimate how much of the counterfactual region around
//!   `x` is *unjustified*, i.e. not ε-connected to any correctly predicted
//!   training instance of the counterfactual class.
//! * **Vulnerability Evaluation (VE)** — given a generated counterfactual
//!   `E(x)`, decide whether it is justified (binary score `J`), and benchmark
//!   counterfactual generators (Growing Spheres, HCLS, LORE-lite) on
//!   instances with significant local risk.
//!
//! Supporting modules provide uniform hyperball/layer samplers ([`geometry`]),
//! ε-graph clustering with incremental merging ([`connect`]), trainable
//! black-box model families ([`classifiers`]), baseline counterfactual
//! generators ([`generators`]), dataset handling ([`data`]), and brute-force
//! reference implementations for validation ([`oracles`]).

pub mod classifiers;
pub mod cli;
pub mod connect;
pub mod data;
pub mod error;
pub mod generators;
pub mod geometry;
pub mod lra;
pub mod oracles;
pub mod ve;

pub use error::AuditError;

/// Library version embedded in reports and serialized models.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
