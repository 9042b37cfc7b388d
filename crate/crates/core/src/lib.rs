//! Failure classification for pipeline sensor data.
//!
//! The crate covers the whole experiment flow: loading or generating sensor
//! readings, labeling them with a two-component Gaussian mixture, treating
//! class imbalance, training classifiers (an SMO-trained SVM, five baseline
//! learners and stacked ensembles), and scoring them with weighted
//! confusion-matrix metrics and ROC AUC.
//!
//! ```no_run
//! use rigline::dataset::{generate_synthetic, split_train_test, SyntheticGenConfig};
//! use rigline::evaluation::evaluate;
//! use rigline::learners::Registry;
//!
//! let data = generate_synthetic(&SyntheticGenConfig::sensor_default(5000, 0.13, 1, 2.0))?;
//! let (train, test) = split_train_test(&data, 0.66, 2, true)?;
//! let model = Registry::with_defaults().learner("model3")?.fit(&train, 3)?;
//! println!("{:?}", evaluate(model.as_ref(), &test)?.summary);
//! # Ok::<(), rigline::Error>(())
//! ```

pub mod dataset;
pub mod doc;
pub mod em;
pub mod error;
pub mod evaluation;
pub mod imbalance;
pub mod learners;
pub mod pipeline;
pub mod seeds;
pub mod stacking;
pub mod svm;

pub use dataset::{ClassLabel, Dataset, Instance};
pub use error::{Error, Result};
pub use learners::{Classifier, Learner, Registry, TrainedModel};
