//! Numerical proxies for pathwise uniqueness: one-step defects against a fine
//! reference solution, the defect function `f` on nested dyadic grids, the
//! oscillation functional under Lipschitz perturbations, and self-convergence gaps.

mod defect;
mod gap;
mod oscillation;

pub use defect::{
    defect_series, one_step_defect, one_step_series, reference_solution, trivial_bound, DefectLevel, DefectMode,
    DefectSeries, OneStepLevel, OneStepSeries, BOREL_HOLDER_EXPONENT,
};
pub use gap::{gap_series, two_solution_gap, GapLevel, GapSeries};
pub use oscillation::{
    oscillation, phi, zeta_proxy, LipschitzPerturbation, OscillationReport, PairKind, ZetaFit,
};
