//! Exact spherical cap discrepancy of generic point sets, its smooth local
//! pieces and their gradients, and first-order optimality checks.
//!
//! ```
//! use capdisc::{discrepancy, Family, PointSet};
//!
//! let x = PointSet::from_points(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
//! let r = discrepancy(&x, Family::Reduced).unwrap();
//! assert!((r.value - 0.8535533905932738).abs() < 1e-12);
//! ```

pub mod capmeasure;
pub mod discrepancy;
pub mod error;
mod linalg;
pub mod optimality;
pub mod oracle;
pub mod pointset;
pub mod scan;
pub mod smooth;

pub use capmeasure::{
    cap_measure, cap_measure_derivative, cap_measure_extended, cap_measure_quadrature, normalizing_constant,
};
pub use discrepancy::{
    cap_params, discrepancy, discrepancy_with, empirical_measure, generalized_discrepancy,
    generalized_discrepancy_with, local_discrepancy, CapParams, DiscrepancyOptions, DiscrepancyResult,
    EmpiricalMeasure, Family, LocalDiscrepancy, Side, Witness,
};
pub use error::{Error, Result};
pub use pointset::{is_generic, sample_uniform_sphere, GenericityReport, IndexSet, PointSet};
