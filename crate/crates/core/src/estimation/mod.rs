//! Trial ensembles, survival curves and exponential-tail fits.

mod ensemble;
mod exit;
mod fit;
mod survival;

pub use ensemble::{
    contraction_curve, ergodic_curve, estimate_contraction_rate, estimate_ergodic_rate,
    estimate_exit_upper_bound, exit_curve, reference_partners, EnsembleOptions, ReferenceSampling,
    TailEstimate, DEFAULT_BURN_IN, DEFAULT_SPACING, MIN_FIT_TRIALS,
};
pub use exit::{ExitSpec, IntervalSet};
pub use fit::{
    extrapolate_slope_in_h, fit_exponential_tail, fit_line, fit_survival_function, polyfit,
    Extrapolation, FitPolicy, LineFit, PolyFit, RateEstimate, TailKind,
};
pub use survival::{SurvivalCurve, SURVIVAL_HEADER};
