//! The Ruelle operator on cylinder grids, its Perron eigen-triple, discrete
//! measures, Wasserstein distances and spectral diagnostics.

mod diagnostics;
mod eigen;
mod measure;
mod operator;
mod wasserstein;

pub use diagnostics::{
    fit_geometric, normalize_potential, qnorm_decay, spectral_gap_estimate, test_functions, GapEstimate,
    GeometricFit, NormalizedPotential, QDecay, FIT_FLOOR, NORMALIZATION_TOL,
};
pub use eigen::{eigen_triple, eigen_triple_warm, solve, EigenTriple, SolveConfig};
pub use measure::DiscreteMeasure;
pub use operator::{DualStep, Operator};
pub use wasserstein::{transport, wasserstein, TransportPlan, MAX_SUPPORT};
