//! Consistency between modules that compute the same physics by different routes.

use twistlab::baselines::{qcrb_delta_phi, QcrbAxis};
use twistlab::dissipation::{echo_with_dephasing, raising_squared, dephasing_for_twist, DephasedEcho, MIN_TROTTER_STEPS};
use twistlab::echo::{analytic_slope, default_q_grid, heisenberg_asymptote};
use twistlab::spin::spin_of;
use twistlab::{
    gain_sweep, make_css, numeric_slope, optimal_twisting, run_echo, Axis, DetectionNoise, SpinDensityMatrix,
    SpinState, SweepAxis, TwistSign,
};

#[test]
fn twisted_variance_feeds_the_bound() {
    let n = 30;
    let q = optimal_twisting(n).unwrap().q_opt;
    let var = make_css(n).unwrap().twisted(q, TwistSign::Forward).unwrap().moments(Axis::Y).variance;
    let bound = qcrb_delta_phi(n, q, QcrbAxis::Y).unwrap();
    assert!((bound - 1.0 / (2.0 * var.sqrt())).abs() < 1e-14);
}

#[test]
fn slopes_agree_across_sizes() {
    for n in [2usize, 10, 100, 1000] {
        let top = 2.0 * (n as f64).sqrt();
        for q in twistlab::grid::logspace(top / 200.0, top, 6) {
            let a = analytic_slope(n, q).unwrap();
            let b = numeric_slope(n, q).unwrap();
            assert!(((b - a) / a).abs() < 1e-6, "N={n} Q={q}");
        }
    }
}

#[test]
fn heisenberg_scaling_is_monotone() {
    let mut prev = f64::INFINITY;
    for n in [100usize, 300, 1000, 3000] {
        let d = optimal_twisting(n).unwrap().delta_phi_min;
        let scaled = d * n as f64;
        assert!(scaled >= 1.0 && scaled <= std::f64::consts::E.sqrt() * 1.05);
        assert!(scaled < prev);
        assert!(scaled > heisenberg_asymptote(n) * n as f64);
        prev = scaled;
    }
}

#[test]
fn q_sweep_peaks_at_the_optimum() {
    let n = 1000;
    let grid = default_q_grid(n);
    let rows = gain_sweep(n, &SweepAxis::Twist { q: grid, noise: DetectionNoise::NONE }).unwrap();
    let best = rows
        .iter()
        .filter_map(|r| r.gain_db.map(|g| (r.parameter, g)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let o = optimal_twisting(n).unwrap();
    assert!((best.0 / o.q_opt - 1.0).abs() < 0.03, "{best:?}");
    assert!((best.1 - 10.0 * (n as f64 / std::f64::consts::E).log10()).abs() < 0.1);
}

#[test]
fn coherence_decay_over_full_echo() {
    let (n, q, d) = (100, 5.0, 20.0);
    let g = dephasing_for_twist(n, q, d);
    let echo = DephasedEcho::new(n, q, g, MIN_TROTTER_STEPS).unwrap();
    let fin = echo.state_at(0.0).unwrap();
    let css = SpinDensityMatrix::from_pure(&make_css(n).unwrap());
    let ratio = raising_squared(&fin) / raising_squared(&css);
    assert!((ratio.re / (-4.0 * g).exp() - 1.0).abs() < 1e-6);
    assert!(ratio.im.abs() < 1e-9);
}

#[test]
fn large_density_echo_is_feasible() {
    let n = 1000;
    let q = optimal_twisting(n).unwrap().q_opt;
    let r = echo_with_dephasing(n, q, 1e4, 0.0).unwrap();
    let clean = run_echo(n, q, 0.0).unwrap();
    let s = spin_of(n);
    assert!(r.var_sy > s / 2.0);
    assert!(r.slope < clean.slope && r.slope > 0.9 * clean.slope);
}
