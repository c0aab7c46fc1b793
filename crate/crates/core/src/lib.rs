//! Successive incomplete-block regression sweeps over hypercube arrangements
//! of variable indices, and confidence sets of models by likelihood-ratio
//! testing against the comprehensive model — with screening and penalised
//! comparators, seeded simulation experiments, and a verification suite of
//! exact identities and Monte-Carlo bounds.
//!
//! The pipeline: near-duplicate columns are paired under one representative;
//! the representatives are arranged at random in a cube whose fibres define
//! small regressions; variables among the most significant in most of their
//! fibres survive to a second, square arrangement fitted on a held-out part
//! of the sample, where retention requires significance at a chosen level.
//! Rerandomising the arrangements and voting yields the comprehensive model,
//! whose submodels are then tested one by one to form the confidence set.
//!
//! ```
//! use coxset::confset::{build_confidence_set, ConfSetConfig};
//! use coxset::reduction::{cox_reduce, ReductionConfig};
//! use coxset::simulation::{centred, generate, CovariateLaw, GenSpec};
//! use coxset::stats::SigmaMode;
//!
//! let spec = GenSpec {
//!     n: 120,
//!     p: 27,
//!     support: vec![1, 5],
//!     theta: vec![1.5, 1.2],
//!     sigma: 1.0,
//!     law: CovariateLaw::IidGaussian,
//!     seed: 9,
//! };
//! let (y, x) = centred(&generate(&spec).unwrap());
//!
//! let cfg = ReductionConfig {
//!     rerandomisations: 3,
//!     alpha: 0.01,
//!     seed: 4,
//!     ..ReductionConfig::default()
//! };
//! let outcome = cox_reduce(&y, &x, &cfg).unwrap();
//! assert!(outcome.comprehensive.contains(&1));
//!
//! // assess submodels on the first-round part, re-centred
//! let rows = &outcome.subsample.0;
//! let y_a = coxset::linalg::centre_vector(&y.select_rows(rows)).unwrap().0;
//! let x_a = coxset::linalg::centre_matrix(&x.select_rows(rows)).unwrap().values;
//! let mcs = build_confidence_set(
//!     &y_a,
//!     &x_a,
//!     &outcome.comprehensive,
//!     &ConfSetConfig {
//!         s_max: 3,
//!         sigma: SigmaMode::Known(1.0),
//!         ..ConfSetConfig::default()
//!     },
//! )
//! .unwrap();
//! assert!(mcs.accepted_count >= 1);
//! ```

pub mod comparators;
pub mod confset;
pub mod data;
pub mod dist;
pub mod error;
pub mod hypercube;
pub mod linalg;
pub mod reduction;
pub mod report;
pub mod rng;
pub mod simulation;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
