//! Discretized tensor calculus on uniform grids for the F-Einstein-Hilbert
//! functional `∫ F(S_g) v^g`, its Euler-Lagrange tensor `E_F` and the
//! first and second variations, with finite-difference oracles in `t`.

#![allow(clippy::needless_range_loop)]

pub mod curvature;
pub mod einstein;
pub mod error;
pub mod ffunc;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod numeric;
pub mod oracle;
pub mod report;
pub mod tensor;
pub mod variation;
pub mod warped;

pub use curvature::{CurvatureBundle, Geometry};
pub use einstein::{EinsteinForm, EinsteinPackage};
pub use error::{GeomError, Result};
pub use ffunc::FScalarFunction;
pub use field::{
    CovectorField, Field, ScalarField, SymTensor2Field, Tensor2Field, Tensor3Field, Tensor4Field, VectorField,
};
pub use grid::{Axis, Boundary, ChartSpec};
pub use tensor::MetricField;
pub use metrics::MetricSpec;
pub use oracle::{MetricFamily, Scenario, Suite, Tolerances};
pub use report::{ReportEntry, Status, VerificationReport};
pub use variation::{SecondVariationTerms, VariationDirection};
pub use warped::WarpedParams;
