//! Estimators, regression fits and goodness-of-fit tests.

mod estimate;
mod fit;
mod gof;

pub use estimate::{neumaier_sum, quantile, EstimateRow, Moments};
pub use fit::{fit, FitModel, FitResult};
pub use gof::{
    chi_square_gof, chi_square_sf, histogram, to_pmf, total_variation, two_sample_chi_square,
    ChiSquareResult,
};
