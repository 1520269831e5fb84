//! Multiple systems estimation for sparse capture-recapture data.
//!
//! Counts of individuals on every combination of `t` lists are modelled as
//! independent Poisson variables with a log-linear mean built from an
//! intercept, one main effect per list and a chosen set of two-list
//! interactions. Pairs of lists that never share an individual get an
//! interaction estimate of minus infinity, which is handled exactly by
//! dropping the affected cells before the Newton iterations start.
//!
//! Around that fitting core the crate provides:
//!
//! - [`estimability`]: linear-programming existence checks, the identifiability
//!   criterion for the all-pairs model, and an audit over every model;
//! - [`inference`]: Poisson tail p-values for two-list terms and forward
//!   stepwise selection;
//! - [`bootstrap`]: multinomial resampling with BCa intervals whose
//!   acceleration comes from a count-weighted jackknife;
//! - [`simulation`]: model-based Monte Carlo studies.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and thread pools live in the `mse` companion crate; anything that
//! fans out work takes an [`Executor`] so callers decide how it runs.

#![no_std]

extern crate alloc;

pub mod bootstrap;
pub mod capture_data;
pub mod datasets;
pub mod error;
pub mod estimability;
pub mod exec;
pub mod inference;
pub mod loglinear;
pub mod math;
pub mod rng;
pub mod simplex;
pub mod simulation;

pub use crate::capture_data::{CaptureDataset, CaptureHistory, CellCounts, ListPair};
pub use crate::datasets::{builtin_dataset, BuiltinDataset};
pub use crate::error::{Error, Result};
pub use crate::estimability::{check_all_models, check_model, EstimabilityReport, Verdict};
pub use crate::exec::{Executor, Sequential};
pub use crate::inference::{estimate_population, p_value, stepwise, Method};
pub use crate::loglinear::{fit, FitResult, ModelSpec, PairSet};
