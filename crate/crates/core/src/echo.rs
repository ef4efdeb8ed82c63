//! The unitary twisting echo: twist, small y-rotation, untwist.

use rayon::prelude::*;

use crate::error::{ensure_atoms, ensure_finite, Error, Result};
use crate::grid::logspace;
use crate::numeric::minimize_bracketed;
use crate::spin::{apply_twist, make_css, spin_of, Axis, DickeState, SpinState, TwistSign};

/// Relative slope mismatch that triggers the Richardson fallback.
pub const SLOPE_TOLERANCE: f64 = 1e-6;

/// Slopes below this multiple of S are reported as undefined sensitivity.
pub const UNDEFINED_SLOPE: f64 = 1e-10;

/// One evaluation of the echo at a given rotation angle.
#[derive(Clone, Debug, PartialEq)]
pub struct EchoResult {
    pub n_atoms: usize,
    pub phi: f64,
    pub q: f64,
    pub mean_sy: f64,
    pub var_sy: f64,
    /// d⟨S_y⟩/dφ at `phi`.
    pub slope: f64,
    /// Signal amplification d⟨S_y⟩/d(Sφ).
    pub gain_g: f64,
    pub delta_phi: Option<f64>,
    pub metrological_gain_db: Option<f64>,
}

impl EchoResult {
    pub(crate) fn assemble(n_atoms: usize, q: f64, phi: f64, mean_sy: f64, var_sy: f64, slope: f64) -> Self {
        let s = spin_of(n_atoms);
        let delta_phi = sensitivity_from_moments(n_atoms, var_sy, slope);
        Self {
            n_atoms,
            phi,
            q,
            mean_sy,
            var_sy,
            slope,
            gain_g: slope / s,
            delta_phi,
            metrological_gain_db: delta_phi.map(|d| gain_db(n_atoms, d)),
        }
    }

    pub fn gain_linear(&self) -> Option<f64> {
        self.delta_phi.map(|d| gain_linear(self.n_atoms, d))
    }
}

/// `Δφ = ΔS_y / |∂φ⟨S_y⟩|`, or `None` when the slope vanishes.
pub fn sensitivity_from_moments(n_atoms: usize, var_sy: f64, slope: f64) -> Option<f64> {
    if !slope.is_finite() || slope.abs() <= UNDEFINED_SLOPE * spin_of(n_atoms) {
        None
    } else {
        Some(var_sy.max(0.0).sqrt() / slope.abs())
    }
}

/// `1/(N Δφ²)`
pub fn gain_linear(n_atoms: usize, delta_phi: f64) -> f64 {
    1.0 / (n_atoms as f64 * delta_phi * delta_phi)
}

/// `-10 log10(N Δφ²)`
pub fn gain_db(n_atoms: usize, delta_phi: f64) -> f64 {
    -10.0 * (n_atoms as f64 * delta_phi * delta_phi).log10()
}

fn check_q(q: f64) -> Result<()> {
    ensure_finite("Q", q)?;
    if q < 0.0 {
        return Err(Error::OutOfRange {
            name: "Q",
            value: q,
            reason: "twisting strength must be non-negative",
        });
    }
    Ok(())
}

/// The CSS after the forward twist, reused for every rotation angle.
#[derive(Clone, Debug)]
pub struct EchoPipeline {
    n_atoms: usize,
    q: f64,
    twisted: DickeState,
}

impl EchoPipeline {
    pub fn new(n_atoms: usize, q: f64) -> Result<Self> {
        ensure_atoms(n_atoms, 1)?;
        check_q(q)?;
        let twisted = apply_twist(&make_css(n_atoms)?, q, TwistSign::Forward)?;
        Ok(Self { n_atoms, q, twisted })
    }

    pub fn twisted_state(&self) -> &DickeState {
        &self.twisted
    }

    /// Final state `U(-Q) R_y(φ) U(Q) |CSS_x⟩`.
    pub fn state_at(&self, phi: f64) -> Result<DickeState> {
        ensure_finite("phi", phi)?;
        self.twisted
            .rotated(Axis::Y, phi)?
            .twisted(self.q, TwistSign::Reverse)
    }

    pub fn mean_sy(&self, phi: f64) -> Result<f64> {
        Ok(self.state_at(phi)?.moments(Axis::Y).mean)
    }

    /// Central difference of ⟨S_y⟩ around `phi` with step `h`.
    pub fn central_difference(&self, phi: f64, h: f64) -> Result<f64> {
        Ok((self.mean_sy(phi + h)? - self.mean_sy(phi - h)?) / (2.0 * h))
    }

    fn default_step(&self) -> f64 {
        1e-6 / spin_of(self.n_atoms)
    }

    fn richardson(&self, phi: f64) -> Result<f64> {
        let h = 1e-4 / spin_of(self.n_atoms);
        let d1 = self.central_difference(phi, h)?;
        let d2 = self.central_difference(phi, 2.0 * h)?;
        Ok((4.0 * d1 - d2) / 3.0)
    }

    /// Slope at φ = 0, cross-checked against the closed form where it applies.
    pub fn slope_at_zero(&self) -> Result<f64> {
        let d = self.central_difference(0.0, self.default_step())?;
        match analytic_slope(self.n_atoms, self.q) {
            Ok(a) if relative_mismatch(d, a) > SLOPE_TOLERANCE => self.richardson(0.0),
            _ => Ok(d),
        }
    }

    pub fn run(&self, phi: f64) -> Result<EchoResult> {
        let state = self.state_at(phi)?;
        let m = state.moments(Axis::Y);
        let slope = if phi == 0.0 {
            self.slope_at_zero()?
        } else {
            self.central_difference(phi, self.default_step())?
        };
        Ok(EchoResult::assemble(self.n_atoms, self.q, phi, m.mean, m.variance, slope))
    }
}

fn relative_mismatch(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        ((value - reference) / reference).abs()
    }
}

/// Final echo state for the given parameters.
pub fn echo_state(n_atoms: usize, q: f64, phi: f64) -> Result<DickeState> {
    EchoPipeline::new(n_atoms, q)?.state_at(phi)
}

/// Twist, rotate about y by `phi`, untwist; moments of S_y and the local slope.
pub fn run_echo(n_atoms: usize, q: f64, phi: f64) -> Result<EchoResult> {
    EchoPipeline::new(n_atoms, q)?.run(phi)
}

/// Finite-difference slope of ⟨S_y⟩ at φ = 0 from the exact pipeline.
pub fn numeric_slope(n_atoms: usize, q: f64) -> Result<f64> {
    EchoPipeline::new(n_atoms, q)?.slope_at_zero()
}

/// Closed-form slope `S(2S-1) sin x cos^(2S-2) x`, `x = Q/2S`.
pub fn analytic_slope(n_atoms: usize, q: f64) -> Result<f64> {
    ensure_atoms(n_atoms, 1)?;
    check_q(q)?;
    let s = spin_of(n_atoms);
    let x = q / (2.0 * s);
    match n_atoms {
        // S(2S-1) = 0 for a single atom; the cosine power vanishes for two.
        1 => Ok(0.0),
        2 => Ok(x.sin()),
        _ if x >= std::f64::consts::FRAC_PI_2 => Err(Error::SlopeDomain(x)),
        _ => Ok(s * (2.0 * s - 1.0) * x.sin() * ((2.0 * s - 2.0) * x.cos().ln()).exp()),
    }
}

/// Optimal twisting strength and the resulting sensitivity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalTwisting {
    pub q_opt: f64,
    pub delta_phi_min: f64,
}

/// `Q_opt = 2S·arccot(√(2S-2))` and `Δφ = √(S/2)/slope(Q_opt)`.
pub fn optimal_twisting(n_atoms: usize) -> Result<OptimalTwisting> {
    ensure_atoms(n_atoms, 2)?;
    let s = spin_of(n_atoms);
    let k = (2.0 * s - 2.0).sqrt();
    // arccot(k) = atan(1/k), with arccot(0) = π/2.
    let arccot = if k == 0.0 { std::f64::consts::FRAC_PI_2 } else { (1.0 / k).atan() };
    let q_opt = 2.0 * s * arccot;
    let slope = analytic_slope(n_atoms, q_opt)?;
    Ok(OptimalTwisting {
        q_opt,
        delta_phi_min: (s / 2.0).sqrt() / slope,
    })
}

/// Asymptotic optimum `√e / N`.
pub fn heisenberg_asymptote(n_atoms: usize) -> f64 {
    std::f64::consts::E.sqrt() / n_atoms as f64
}

/// Minimizes the exact-pipeline Δφ over Q, independent of the closed forms.
pub fn numeric_optimal_twisting(n_atoms: usize) -> Result<OptimalTwisting> {
    ensure_atoms(n_atoms, 2)?;
    let s = spin_of(n_atoms);
    let var0 = s / 2.0;
    let cost = |q: f64| match EchoPipeline::new(n_atoms, q).and_then(|p| {
        let h = p.default_step();
        p.central_difference(0.0, h)
    }) {
        Ok(slope) if slope.abs() > 0.0 => var0.sqrt() / slope.abs(),
        _ => f64::INFINITY,
    };
    let hi = (2.0 * s * 1.5).min(4.0 * (n_atoms as f64).sqrt()).max(0.5);
    let (q_opt, delta_phi_min) = minimize_bracketed(cost, 1e-2, hi, 48, true)?;
    Ok(OptimalTwisting { q_opt, delta_phi_min })
}

/// Detection noise `ΔS_meas = r·ΔS_CSS`, with `ΔS_CSS = √(S/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionNoise {
    pub r_det: f64,
}

impl DetectionNoise {
    pub const NONE: DetectionNoise = DetectionNoise { r_det: 0.0 };

    pub fn new(r_det: f64) -> Result<Self> {
        ensure_finite("r_det", r_det)?;
        if r_det < 0.0 {
            return Err(Error::OutOfRange {
                name: "r_det",
                value: r_det,
                reason: "detection noise ratio must be non-negative",
            });
        }
        Ok(Self { r_det })
    }

    /// From atom-number resolution, `Δn = 2 ΔS_meas`.
    pub fn from_delta_n(n_atoms: usize, delta_n: f64) -> Result<Self> {
        ensure_atoms(n_atoms, 1)?;
        ensure_finite("delta_n", delta_n)?;
        if delta_n < 0.0 {
            return Err(Error::OutOfRange {
                name: "delta_n",
                value: delta_n,
                reason: "resolution must be non-negative",
            });
        }
        Self::new(delta_n / 2.0 / (spin_of(n_atoms) / 2.0).sqrt())
    }

    pub fn delta_s_meas(&self, n_atoms: usize) -> f64 {
        self.r_det * (spin_of(n_atoms) / 2.0).sqrt()
    }

    pub fn delta_n(&self, n_atoms: usize) -> f64 {
        2.0 * self.delta_s_meas(n_atoms)
    }
}

/// `Δφ = √(Var S_y(0) + ΔS_meas²)/|slope|` on the exact pipeline.
pub fn noisy_sensitivity(n_atoms: usize, q: f64, noise: DetectionNoise) -> Result<Option<f64>> {
    let p = EchoPipeline::new(n_atoms, q)?;
    let var0 = p.state_at(0.0)?.moments(Axis::Y).variance;
    let slope = p.slope_at_zero()?;
    let meas = noise.delta_s_meas(n_atoms);
    Ok(sensitivity_from_moments(n_atoms, var0 + meas * meas, slope))
}

/// One row of a gain sweep. `None` marks an undefined sensitivity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainRow {
    pub parameter: f64,
    pub delta_phi: Option<f64>,
    pub gain_db: Option<f64>,
    pub gain_linear: Option<f64>,
}

impl GainRow {
    fn new(n_atoms: usize, parameter: f64, delta_phi: Option<f64>) -> Self {
        Self {
            parameter,
            delta_phi,
            gain_db: delta_phi.map(|d| gain_db(n_atoms, d)),
            gain_linear: delta_phi.map(|d| gain_linear(n_atoms, d)),
        }
    }
}

/// The swept parameter of [`gain_sweep`].
#[derive(Clone, Debug, PartialEq)]
pub enum SweepAxis {
    /// Twisting strengths at fixed detection noise.
    Twist { q: Vec<f64>, noise: DetectionNoise },
    /// Atom-number resolutions Δn at fixed twisting strength.
    Resolution { delta_n: Vec<f64>, q: f64 },
}

/// Metrological gain over a grid, evaluated in parallel and returned in grid order.
pub fn gain_sweep(n_atoms: usize, axis: &SweepAxis) -> Result<Vec<GainRow>> {
    ensure_atoms(n_atoms, 1)?;
    match axis {
        SweepAxis::Twist { q, noise } => {
            if q.is_empty() {
                return Err(Error::Grid("empty Q grid".into()));
            }
            q.par_iter()
                .map(|&qv| Ok(GainRow::new(n_atoms, qv, noisy_sensitivity(n_atoms, qv, *noise)?)))
                .collect()
        }
        SweepAxis::Resolution { delta_n, q } => {
            if delta_n.is_empty() {
                return Err(Error::Grid("empty delta_n grid".into()));
            }
            // Variance and slope do not depend on Δn; compute them once.
            let p = EchoPipeline::new(n_atoms, *q)?;
            let var0 = p.state_at(0.0)?.moments(Axis::Y).variance;
            let slope = p.slope_at_zero()?;
            delta_n
                .iter()
                .map(|&dn| {
                    let meas = DetectionNoise::from_delta_n(n_atoms, dn)?.delta_s_meas(n_atoms);
                    Ok(GainRow::new(
                        n_atoms,
                        dn,
                        sensitivity_from_moments(n_atoms, var0 + meas * meas, slope),
                    ))
                })
                .collect()
        }
    }
}

/// Default Q grid: 200 log-spaced points from 0.1 up to `Nπ/2`.
pub fn default_q_grid(n_atoms: usize) -> Vec<f64> {
    logspace(0.1, n_atoms as f64 * std::f64::consts::FRAC_PI_2, 200)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::DenseSpin;
    use proptest::prelude::*;

    #[test]
    fn perfect_echo_at_zero_angle() {
        for (n, q) in [(1, 0.7), (2, 1.0), (10, 3.3), (301, 17.0)] {
            let r = run_echo(n, q, 0.0).unwrap();
            let s = spin_of(n);
            assert!(r.mean_sy.abs() < 1e-12);
            assert!((r.var_sy - s / 2.0).abs() < 1e-10 * s);
        }
    }

    #[test]
    fn two_atoms_slope_is_sine() {
        for q in [0.1, 1.0, 2.5] {
            let a = analytic_slope(2, q).unwrap();
            assert!((a - (q / 2.0).sin()).abs() < 1e-15);
            let n = numeric_slope(2, q).unwrap();
            assert!((n - a).abs() < 1e-6 * a);
        }
    }

    #[test]
    fn zero_twist_has_zero_slope_and_no_sensitivity() {
        assert_eq!(analytic_slope(100, 0.0).unwrap(), 0.0);
        assert!(numeric_slope(100, 0.0).unwrap().abs() < 1e-6);
        assert!(run_echo(100, 0.0, 0.0).unwrap().delta_phi.is_none());
    }

    #[test]
    fn analytic_slope_domain() {
        assert!(matches!(analytic_slope(10, 10.0 * 1.6), Err(Error::SlopeDomain(_))));
        assert!((analytic_slope(2, 4.0).unwrap() - 2f64.sin()).abs() < 1e-15);
        assert!(analytic_slope(0, 1.0).is_err());
        assert!(analytic_slope(10, -1.0).is_err());
    }

    #[test]
    fn slope_matches_closed_form_at_1000() {
        let q = 31.64;
        let a = analytic_slope(1000, q).unwrap();
        let n = numeric_slope(1000, q).unwrap();
        assert!(((n - a) / a).abs() < 1e-6, "{n} vs {a}");
    }

    #[test]
    fn slope_matches_dense_derivative() {
        // d/dφ ⟨ψ_t|R† B R|ψ_t⟩ at 0 = ⟨ψ_t| i[S_y, B] |ψ_t⟩, B = V† S_y V.
        let (n, q) = (4, 2.0);
        let dense = DenseSpin::new(n);
        let psi = dense.twist(q, 1.0) * dense.css();
        let v = dense.twist(q, -1.0);
        let sy = dense.op(Axis::Y);
        let b = v.adjoint() * sy * &v;
        let comm = (sy * &b - &b * sy).map(|c| c * crate::spin::C64::new(0.0, 1.0));
        let want = psi.dotc(&(comm * &psi)).re;
        let got = numeric_slope(n, q).unwrap();
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn closed_form_optimum_at_1000() {
        let o = optimal_twisting(1000).unwrap();
        assert!((o.q_opt / 1000f64.sqrt() - 1.0).abs() < 1e-3);
        assert!((o.q_opt - 31.64).abs() < 0.01);
        assert!((o.delta_phi_min / heisenberg_asymptote(1000) - 1.0).abs() < 0.01);
    }

    #[test]
    fn two_atom_optimum_agrees_with_scan() {
        let o = optimal_twisting(2).unwrap();
        assert!((o.q_opt - std::f64::consts::PI).abs() < 1e-12);
        let best = crate::grid::linspace(0.01, std::f64::consts::PI - 1e-3, 3000)
            .into_iter()
            .map(|q| (q, numeric_slope(2, q).unwrap() / 0.5f64.sqrt()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!((best.0 - o.q_opt).abs() < 2e-3);
        assert!(optimal_twisting(1).is_err());
    }

    #[test]
    fn numeric_optimum_matches_closed_form() {
        let n = 200;
        let a = optimal_twisting(n).unwrap();
        let b = numeric_optimal_twisting(n).unwrap();
        assert!((a.q_opt - b.q_opt).abs() / a.q_opt < 1e-4);
        assert!((a.delta_phi_min - b.delta_phi_min).abs() / a.delta_phi_min < SLOPE_TOLERANCE, "{a:?} {b:?}");
    }

    #[test]
    fn noise_factor() {
        let q = optimal_twisting(1000).unwrap().q_opt;
        let clean = noisy_sensitivity(1000, q, DetectionNoise::NONE).unwrap().unwrap();
        let noisy = noisy_sensitivity(1000, q, DetectionNoise::new(1.0).unwrap())
            .unwrap()
            .unwrap();
        assert!((noisy / clean - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn delta_n_round_trip() {
        let d = DetectionNoise::from_delta_n(1000, 10.0).unwrap();
        assert!((d.delta_n(1000) - 10.0).abs() < 1e-12);
        assert!((d.r_det - 10.0 / 1000f64.sqrt()).abs() < 1e-12);
        assert!(DetectionNoise::new(-1.0).is_err());
    }

    #[test]
    fn sweep_rows_and_nulls() {
        let rows = gain_sweep(
            50,
            &SweepAxis::Twist {
                q: vec![0.0, 1.0, 7.0],
                noise: DetectionNoise::NONE,
            },
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].gain_db.is_none());
        assert!(rows[1].gain_db.is_some());
        assert_eq!(rows[2].parameter, 7.0);

        let q = optimal_twisting(1000).unwrap().q_opt;
        let rows = gain_sweep(
            1000,
            &SweepAxis::Resolution {
                delta_n: vec![0.0, 1.0, 10.0, 100.0],
                q,
            },
        )
        .unwrap();
        for w in rows.windows(2) {
            assert!(w[1].gain_db.unwrap() < w[0].gain_db.unwrap());
        }
        let direct = noisy_sensitivity(1000, q, DetectionNoise::from_delta_n(1000, 10.0).unwrap())
            .unwrap()
            .unwrap();
        assert!((rows[2].delta_phi.unwrap() / direct - 1.0).abs() < 1e-12);
        assert!(gain_sweep(10, &SweepAxis::Twist { q: vec![], noise: DetectionNoise::NONE }).is_err());
    }

    #[test]
    fn default_grid_reaches_ghz_point() {
        let g = default_q_grid(1000);
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.1);
        assert_eq!(*g.last().unwrap(), 500.0 * std::f64::consts::PI);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn amplification_bounded(n in 2usize..80, frac in 0.0f64..1.0) {
            let q = frac * 2.0 * (n as f64).sqrt();
            let r = run_echo(n, q, 0.0).unwrap();
            prop_assert!(r.gain_g <= (n as f64).sqrt() + 1e-6);
        }

        #[test]
        fn sensitivity_contract(n in 2usize..60, q in 0.1f64..5.0, phi in -0.05f64..0.05) {
            let r = run_echo(n, q, phi).unwrap();
            if let Some(d) = r.delta_phi {
                prop_assert!((d - r.var_sy.sqrt() / r.slope.abs()).abs() <= 1e-12 * d);
            }
        }
    }
}
