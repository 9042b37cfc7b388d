//! Two-class support vector machine trained by SMO.

mod cache;
pub mod calibrate;
pub mod kernel;
pub mod smo;

pub use cache::KernelCache;
pub use calibrate::{calibrate_probability, fit_sigmoid, CalibratedSvm, Sigmoid};
pub use kernel::KernelSpec;
pub use smo::{
    kkt_report, smo_train, smo_train_observed, KktReport, SmoConfig, SolverState, SupportVector,
    SvmModel,
};
