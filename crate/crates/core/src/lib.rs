//! Robust estimation of multiple inlier structures without a user-supplied
//! inlier threshold.
//!
//! Each iteration of the estimator
//!
//! 1. samples `M` elemental subsets and keeps the hypothesis whose sorted
//!    Mahalanobis distances have the smallest sum over the first `n_ε` points,
//! 2. grows segment widths over that distance sequence and applies an
//!    expansion criterion to find the structure's scale `σ̂`,
//! 3. recovers the structure with one-dimensional mean shift over `N` more
//!    subsets drawn from the points within `σ̂`, and refits it by total least
//!    squares.
//!
//! Classified points are removed and the loop repeats until too few points
//! remain. Structures come back sorted by strength `n_in / σ_tls`.
//!
//! ```
//! use mulinl::model::{DataPoint, ModelKind};
//! use mulinl::pipeline::{run, EstimatorConfig};
//!
//! let points: Vec<DataPoint> = (0..100)
//!     .map(|i| DataPoint::new(vec![i as f64, 2.0 * i as f64 + 1.0]))
//!     .collect();
//! let config = EstimatorConfig { trials: 100, ..Default::default() };
//! let result = run(&points, ModelKind::Line2D.model(), &config).unwrap();
//! assert_eq!(result.structures[0].inliers.len(), 100);
//! ```

pub mod bench;
pub mod error;
pub mod io;
pub mod mean_shift;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod scale;
pub mod synth;

pub use error::{Error, Result};
pub use model::{CarrierBundle, DataPoint, Hypothesis, ModelKind, ProblemModel};
pub use pipeline::{run, EstimationResult, EstimatorConfig, StructureEstimate};
