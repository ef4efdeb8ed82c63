//! Rydberg-dressed twisting: interaction strength, range, the detuning
//! window and the largest atom number it admits.

use rayon::prelude::*;

use crate::echo::{analytic_slope, gain_db, optimal_twisting};
use crate::error::{ensure_atoms, ensure_finite, Error, Result};
use crate::spin::spin_of;

/// Rydberg population above which the perturbative dressing picture is doubtful.
pub const EPSILON_WARNING: f64 = 0.3;

/// Relative agreement demanded between redundant parameter specifications.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

/// Default Rydberg population.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Range of the dimensionless interaction figure `C₆/(Γa⁶)` considered realistic.
pub const C_TILDE_BAND: (f64, f64) = (1e10, 1e11);

/// Dressing parameters. Rates are angular frequencies, lengths in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RydbergParams {
    pub n_atoms: usize,
    /// Rabi frequency of the dressing laser.
    pub omega: f64,
    /// Detuning from the Rydberg state; its sign sets the sign of the twist.
    pub delta_r: f64,
    pub c6: f64,
    /// Lattice spacing.
    pub spacing: f64,
    /// Rydberg linewidth.
    pub gamma: f64,
    /// Optional stated Rydberg population, checked against Ω and δ.
    pub epsilon: Option<f64>,
    /// Optional stated `C₆/(Γa⁶)`, checked against the other fields.
    pub c_tilde: Option<f64>,
}

fn out_of_range(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::OutOfRange { name, value, reason }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

impl RydbergParams {
    pub fn validate(&self) -> Result<()> {
        ensure_atoms(self.n_atoms, 1)?;
        for (name, v) in [
            ("Omega", self.omega),
            ("delta_R", self.delta_r),
            ("C6", self.c6),
            ("a", self.spacing),
            ("Gamma", self.gamma),
        ] {
            ensure_finite(name, v)?;
        }
        if self.omega <= 0.0 {
            return Err(out_of_range("Omega", self.omega, "Rabi frequency must be positive"));
        }
        if self.delta_r == 0.0 {
            return Err(out_of_range("delta_R", self.delta_r, "detuning must be non-zero"));
        }
        if self.c6 <= 0.0 {
            return Err(out_of_range("C6", self.c6, "van der Waals coefficient must be positive"));
        }
        if self.spacing <= 0.0 {
            return Err(out_of_range("a", self.spacing, "lattice spacing must be positive"));
        }
        if self.gamma <= 0.0 {
            return Err(out_of_range("Gamma", self.gamma, "linewidth must be positive"));
        }
        if let Some(eps) = self.epsilon {
            let derived = self.derived_epsilon();
            if relative_gap(eps, derived) > CONSISTENCY_TOLERANCE {
                return Err(Error::Inconsistent(format!(
                    "epsilon = {eps} but N·Omega²/(8·delta_R²) = {derived}"
                )));
            }
        }
        if let Some(ct) = self.c_tilde {
            let derived = self.derived_c_tilde();
            if relative_gap(ct, derived) > CONSISTENCY_TOLERANCE {
                return Err(Error::Inconsistent(format!(
                    "C_tilde = {ct} but C6/(Gamma·a^6) = {derived}"
                )));
            }
        }
        Ok(())
    }

    /// `ε = N↑Ω²/(4δ²)` with `N↑ = N/2`.
    pub fn derived_epsilon(&self) -> f64 {
        0.5 * self.n_atoms as f64 * self.omega * self.omega / (4.0 * self.delta_r * self.delta_r)
    }

    pub fn derived_c_tilde(&self) -> f64 {
        self.c6 / (self.gamma * self.spacing.powi(6))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwistingRate {
    /// `Ω⁴/(16δ³)`
    pub chi: f64,
    /// `ε²C₆/(32N²L⁶)` with the sign of δ.
    pub chi_from_range: f64,
    pub epsilon: f64,
    pub range: f64,
    pub warning: Option<String>,
}

/// Twisting strength from the dressing parameters, computed two ways.
pub fn twisting_rate(params: &RydbergParams) -> Result<TwistingRate> {
    params.validate()?;
    let p = params;
    let chi = p.omega.powi(4) / (16.0 * p.delta_r.powi(3));
    let eps = p.derived_epsilon();
    let range = interaction_range(p.delta_r.abs(), p.c6)?;
    let n = p.n_atoms as f64;
    let chi_from_range = p.delta_r.signum() * eps * eps * p.c6 / (32.0 * n * n * range.powi(6));
    if relative_gap(chi, chi_from_range) > CONSISTENCY_TOLERANCE {
        return Err(Error::Inconsistent(format!(
            "twisting rates disagree: {chi} vs {chi_from_range}"
        )));
    }
    let warning = (eps > EPSILON_WARNING)
        .then(|| format!("Rydberg population epsilon = {eps:.3} exceeds {EPSILON_WARNING}; dressing is not perturbative"));
    Ok(TwistingRate {
        chi,
        chi_from_range,
        epsilon: eps,
        range,
        warning,
    })
}

/// `L = ½ (C₆/(2δ))^(1/6)`
pub fn interaction_range(delta_r: f64, c6: f64) -> Result<f64> {
    ensure_finite("delta_R", delta_r)?;
    ensure_finite("C6", c6)?;
    if delta_r <= 0.0 {
        return Err(out_of_range("delta_R", delta_r, "range needs a positive detuning"));
    }
    if c6 < 0.0 {
        return Err(out_of_range("C6", c6, "van der Waals coefficient must be non-negative"));
    }
    Ok(0.5 * (c6 / (2.0 * delta_r)).powf(1.0 / 6.0))
}

/// Allowed detuning range in units of Γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetuningWindow {
    /// Ceiling from fitting the ensemble inside the interaction range.
    pub delta_max: f64,
    /// Floor from limiting scattering to one event per atom.
    pub delta_min: f64,
    pub feasible: bool,
}

fn check_design(epsilon: f64, c_tilde: f64) -> Result<()> {
    ensure_finite("epsilon", epsilon)?;
    ensure_finite("C_tilde", c_tilde)?;
    if epsilon <= 0.0 {
        return Err(out_of_range("epsilon", epsilon, "Rydberg population must be positive"));
    }
    if c_tilde <= 0.0 {
        return Err(out_of_range("C_tilde", c_tilde, "must be positive"));
    }
    Ok(())
}

/// `δ_max/Γ = C̃/(2⁹N²)` and `δ_min/Γ = N^(3/2)/(2ε)`.
pub fn detuning_window(n_atoms: usize, epsilon: f64, c_tilde: f64) -> Result<DetuningWindow> {
    ensure_atoms(n_atoms, 2)?;
    check_design(epsilon, c_tilde)?;
    let n = n_atoms as f64;
    let delta_max = c_tilde / (512.0 * n * n);
    let delta_min = n.powf(1.5) / (2.0 * epsilon);
    Ok(DetuningWindow {
        delta_max,
        delta_min,
        feasible: delta_max > delta_min,
    })
}

/// Closed-form window closure `(C̃ε/2⁸)^(2/7)`.
pub fn critical_atom_number(epsilon: f64, c_tilde: f64) -> Result<f64> {
    check_design(epsilon, c_tilde)?;
    Ok((c_tilde * epsilon / 256.0).powf(2.0 / 7.0))
}

/// Largest integer N with an open window, found by bisection on [`detuning_window`].
/// `None` when even two atoms do not fit.
pub fn largest_feasible_atoms(epsilon: f64, c_tilde: f64) -> Result<Option<usize>> {
    check_design(epsilon, c_tilde)?;
    let open = |n: usize| detuning_window(n, epsilon, c_tilde).map(|w| w.feasible);
    if !open(2)? {
        return Ok(None);
    }
    let mut lo = 2usize;
    let mut hi = 4usize;
    while open(hi)? {
        lo = hi;
        hi = hi.checked_mul(2).ok_or(Error::NoConvergence(64))?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if open(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Largest twisting strength above the critical number: detuning at its
/// ceiling and one scattering event per atom, `Q = εC̃/(2⁸N³)`.
pub fn max_twist(n_atoms: usize, epsilon: f64, c_tilde: f64) -> Result<f64> {
    ensure_atoms(n_atoms, 1)?;
    check_design(epsilon, c_tilde)?;
    Ok(epsilon * c_tilde / (256.0 * (n_atoms as f64).powi(3)))
}

/// One point of the gain-versus-N curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RydbergGainRow {
    pub n_atoms: usize,
    pub q_ideal: f64,
    pub gain_ideal_db: f64,
    pub q: f64,
    pub gain_db: f64,
    /// Whether the twist was limited by [`max_twist`].
    pub limited: bool,
    /// `1/Δφ²`: the number of unentangled atoms with the same sensitivity.
    pub equivalent_atoms: f64,
}

fn unitary_delta_phi(n_atoms: usize, q: f64) -> Result<f64> {
    let slope = analytic_slope(n_atoms, q)?;
    Ok((spin_of(n_atoms) / 2.0).sqrt() / slope)
}

/// Metrological gain of the unitary echo with and without the dressing limits.
pub fn rydberg_gain_point(n_atoms: usize, epsilon: f64, c_tilde: f64) -> Result<RydbergGainRow> {
    ensure_atoms(n_atoms, 2)?;
    let n_cr = critical_atom_number(epsilon, c_tilde)?;
    let ideal = optimal_twisting(n_atoms)?;
    let limited = n_atoms as f64 > n_cr;
    let q = if limited {
        max_twist(n_atoms, epsilon, c_tilde)?
    } else {
        ideal.q_opt
    };
    let dphi = unitary_delta_phi(n_atoms, q)?;
    Ok(RydbergGainRow {
        n_atoms,
        q_ideal: ideal.q_opt,
        gain_ideal_db: gain_db(n_atoms, ideal.delta_phi_min),
        q,
        gain_db: gain_db(n_atoms, dphi),
        limited,
        equivalent_atoms: 1.0 / (dphi * dphi),
    })
}

pub fn rydberg_gain_curve(n_grid: &[usize], epsilon: f64, c_tilde: f64) -> Result<Vec<RydbergGainRow>> {
    if n_grid.is_empty() {
        return Err(Error::Grid("empty atom-number grid".into()));
    }
    n_grid
        .par_iter()
        .map(|&n| rydberg_gain_point(n, epsilon, c_tilde))
        .collect()
}

/// Gain envelope over a band of `C̃` values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainBandRow {
    pub n_atoms: usize,
    pub gain_low_db: f64,
    pub gain_high_db: f64,
}

/// Lower and upper gain for `C̃` at the two ends of `band`. Gain grows with C̃.
pub fn rydberg_gain_band(n_grid: &[usize], epsilon: f64, band: (f64, f64)) -> Result<Vec<GainBandRow>> {
    let (lo, hi) = (band.0.min(band.1), band.0.max(band.1));
    let low = rydberg_gain_curve(n_grid, epsilon, lo)?;
    let high = rydberg_gain_curve(n_grid, epsilon, hi)?;
    Ok(low
        .iter()
        .zip(&high)
        .map(|(a, b)| GainBandRow {
            n_atoms: a.n_atoms,
            gain_low_db: a.gain_db,
            gain_high_db: b.gain_db,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> RydbergParams {
        RydbergParams {
            n_atoms: 100,
            omega: 2.0 * std::f64::consts::PI * 1e6,
            delta_r: 2.0 * std::f64::consts::PI * 40e6,
            c6: 2.0 * std::f64::consts::PI * 1e-33,
            spacing: 400e-9,
            gamma: 2.0 * std::f64::consts::PI * 1e3,
            epsilon: None,
            c_tilde: None,
        }
    }

    #[test]
    fn quartic_scaling_and_sign() {
        let p = sample();
        let a = twisting_rate(&p).unwrap().chi;
        let b = twisting_rate(&RydbergParams { omega: 2.0 * p.omega, ..p }).unwrap().chi;
        assert!((b / a - 16.0).abs() < 1e-12);
        let neg = twisting_rate(&RydbergParams { delta_r: -p.delta_r, ..p }).unwrap();
        assert!(neg.chi < 0.0 && neg.chi_from_range < 0.0);
        assert!(a > 0.0);
    }

    #[test]
    fn range_power_law() {
        let l1 = interaction_range(1e6, 1e-30).unwrap();
        let l2 = interaction_range(64e6, 1e-30).unwrap();
        assert!((l2 / l1 - 0.5).abs() < 1e-14);
        assert_eq!(interaction_range(1e6, 0.0).unwrap(), 0.0);
        assert!(interaction_range(-1.0, 1.0).is_err());
    }

    #[test]
    fn over_specification_is_checked() {
        let p = sample();
        let ok = RydbergParams {
            epsilon: Some(p.derived_epsilon()),
            c_tilde: Some(p.derived_c_tilde()),
            ..p
        };
        assert!(twisting_rate(&ok).is_ok());
        let bad = RydbergParams {
            epsilon: Some(p.derived_epsilon() * 1.01),
            ..p
        };
        assert!(matches!(twisting_rate(&bad), Err(Error::Inconsistent(_))));
        let bad = RydbergParams {
            c_tilde: Some(p.derived_c_tilde() * 0.5),
            ..p
        };
        assert!(matches!(twisting_rate(&bad), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn strong_dressing_warns() {
        let p = RydbergParams {
            omega: sample().delta_r,
            ..sample()
        };
        assert!(twisting_rate(&p).unwrap().warning.is_some());
        assert!(twisting_rate(&sample()).unwrap().warning.is_none());
    }

    #[test]
    fn critical_number_for_reference_design() {
        let n_cr = critical_atom_number(0.1, 1e11).unwrap();
        assert!((n_cr - 147.5).abs() < 0.1, "{n_cr}");
        let found = largest_feasible_atoms(0.1, 1e11).unwrap().unwrap();
        assert!((found as f64 - n_cr).abs() <= 1.0);
        assert!(detuning_window(found, 0.1, 1e11).unwrap().feasible);
        assert!(!detuning_window(found + 1, 0.1, 1e11).unwrap().feasible);
        // lower edge of the band: (10¹⁰·0.1/256)^(2/7)
        let low = critical_atom_number(0.1, 1e10).unwrap();
        assert!((low - (1e9f64 / 256.0).powf(2.0 / 7.0)).abs() < 1e-9);
    }

    #[test]
    fn max_twist_meets_sqrt_n_at_closure() {
        let n_cr = critical_atom_number(0.1, 1e11).unwrap();
        let q = 0.1 * 1e11 / (256.0 * n_cr.powi(3));
        assert!((q / n_cr.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gain_curve_shape() {
        let grid: Vec<usize> = (2..=400).collect();
        let rows = rydberg_gain_curve(&grid, 0.1, 1e11).unwrap();
        let n_cr = critical_atom_number(0.1, 1e11).unwrap();
        for r in &rows {
            if (r.n_atoms as f64) <= n_cr {
                assert!(!r.limited);
                assert!((r.gain_db - r.gain_ideal_db).abs() < 1e-9);
            }
        }
        // continuity across the closure
        for w in rows.windows(2).filter(|w| (w[0].n_atoms as f64 - n_cr).abs() < 10.0) {
            assert!((w[1].gain_db - w[0].gain_db).abs() < 0.1, "{:?}", w);
        }
        let best = rows.iter().max_by(|a, b| a.gain_db.total_cmp(&b.gain_db)).unwrap();
        // Just past the closure the capped twist is still close to Q_opt, where
        // the gain is flat in Q, so the peak sits a few atoms above N_cr.
        assert!((best.n_atoms as f64 - n_cr).abs() <= 0.05 * n_cr, "{}", best.n_atoms);
        let last = rows.last().unwrap();
        assert!(last.gain_db < best.gain_db - 3.0);
    }

    #[test]
    fn band_is_ordered() {
        let rows = rydberg_gain_band(&[50, 100, 200, 400], 0.1, C_TILDE_BAND).unwrap();
        for r in rows {
            assert!(r.gain_low_db <= r.gain_high_db + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn two_rate_formulas_agree(
            n in 2usize..5000,
            omega in 1e4f64..1e8,
            delta in 1e6f64..1e10,
            c6 in 1e-35f64..1e-28,
            neg in proptest::bool::ANY,
        ) {
            let p = RydbergParams {
                n_atoms: n,
                omega,
                delta_r: if neg { -delta } else { delta },
                c6,
                spacing: 5e-7,
                gamma: 1e4,
                epsilon: None,
                c_tilde: None,
            };
            let r = twisting_rate(&p).unwrap();
            prop_assert!(relative_gap(r.chi, r.chi_from_range) < CONSISTENCY_TOLERANCE);
            prop_assert!((r.chi - 4.0 * p.delta_r * r.epsilon.powi(2) / (n * n) as f64).abs() <= 1e-9 * r.chi.abs());
        }

        #[test]
        fn rescaling_all_rates_changes_nothing(lambda in 1e-3f64..1e3) {
            let p = sample();
            let q = RydbergParams {
                omega: p.omega * lambda,
                delta_r: p.delta_r * lambda,
                c6: p.c6 * lambda,
                gamma: p.gamma * lambda,
                ..p
            };
            let (a, b) = (twisting_rate(&p).unwrap(), twisting_rate(&q).unwrap());
            prop_assert!(relative_gap(a.chi / p.gamma, b.chi / q.gamma) < 1e-12);
            prop_assert!(relative_gap(a.range, b.range) < 1e-12);
            prop_assert!(relative_gap(a.epsilon, b.epsilon) < 1e-12);
            prop_assert!(relative_gap(p.derived_c_tilde(), q.derived_c_tilde()) < 1e-12);
        }
    }
}
