//! Phase-space observables and the estimators applied to simulated records.

mod fit;
mod observables;
mod readout;
mod telegraph;
mod wigner;

pub use fit::{
    fit_damped_cosine, fit_exponential, fit_wigner_cuts, levenberg_marquardt, wigner_cut_models,
    CutKind, FitResult, LmOptions, LmOutcome, WignerCutData, WignerCutParams, CUT_PARAM_NAMES,
};
pub use observables::{cat_observables, half_space_projector, z_operator, CatObservables};
pub use readout::readout_fidelity;
pub use telegraph::{
    autocorrelation, autocorrelation_time, dwell_estimator, dwell_from_counts, poisson_upper_limit,
    required_trace_duration, DwellEstimate, TelegraphTrace,
};
pub use wigner::{wigner, wigner_point, GridSpec, WignerGrid};
