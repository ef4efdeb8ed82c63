//! Exact simulation of the one-axis twisting echo on a collective spin.
//!
//! States live in the symmetric (Dicke) subspace of N two-level atoms, indexed
//! by `k = 0..=N` with `m = k - N/2`.

pub mod baselines;
pub mod dissipation;
pub mod echo;
pub mod error;
pub mod grid;
pub mod numeric;
pub mod oracle;
pub mod rotation;
pub mod rydberg;
pub mod spin;
pub mod wigner;

pub use baselines::{
    best_squeezing, ghz_noisy_bound, qcrb_curve, squeezing_curve, BaselineCurve, BaselineKind, BaselinePoint, QcrbAxis,
};
pub use dissipation::{
    cavity_map, cavity_sigma_total, dephasing_channel, echo_with_dephasing, optimize_cavity, scatter_noise,
    CavityMap, CavityOptimum, CavityParams, Detuning, SigmaBreakdown,
};
pub use echo::{
    analytic_slope, gain_sweep, noisy_sensitivity, numeric_slope, optimal_twisting, run_echo, DetectionNoise,
    EchoResult, GainRow, OptimalTwisting, SweepAxis,
};
pub use error::{Error, Result};
pub use grid::{GridSpec, Scale};
pub use oracle::{oracle_check, OracleReport};
pub use rotation::{apply_rotation, wigner_small_d, WignerSmallD};
pub use rydberg::{
    critical_atom_number, detuning_window, interaction_range, rydberg_gain_curve, twisting_rate, DetuningWindow,
    RydbergParams,
};
pub use spin::{
    apply_twist, make_css, moments, Axis, CollectiveOperators, DickeState, Moments, SpinCovariance,
    SpinDensityMatrix, SpinState, TwistSign, C64,
};
pub use wigner::{wigner_grid, Multipoles, WignerGrid};
