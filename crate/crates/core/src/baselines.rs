//! Reference sensitivities: quantum Cramér-Rao bound of the twisted state,
//! direct-detection spin squeezing, and a GHZ state read out with finite
//! atom-number resolution.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use rayon::prelude::*;

use crate::echo::{gain_db, DetectionNoise};
use crate::error::{ensure_atoms, ensure_finite, Error, Result};
use crate::numeric::minimize_bracketed;
use crate::spin::{apply_twist, make_css, spin_of, Axis, DickeState, SpinState, TwistSign, C64};

/// Points in the operating-angle scan of the GHZ Fisher information.
pub const GHZ_PHASE_SCAN: usize = 512;

/// Kernel support in standard deviations.
const KERNEL_CUTOFF: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    /// QCRB maximized over the rotation axis.
    Qcrb,
    /// QCRB for rotations about y only.
    QcrbSy,
    SqueezingDirect,
    GhzNoisy,
    Sql,
    Heisenberg,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Qcrb => "qcrb",
            BaselineKind::QcrbSy => "qcrb_sy",
            BaselineKind::SqueezingDirect => "squeezing_direct",
            BaselineKind::GhzNoisy => "ghz_noisy",
            BaselineKind::Sql => "sql",
            BaselineKind::Heisenberg => "heisenberg",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselinePoint {
    pub parameter: f64,
    pub delta_phi: Option<f64>,
    pub gain_db: Option<f64>,
}

impl BaselinePoint {
    fn new(n_atoms: usize, parameter: f64, delta_phi: Option<f64>) -> Self {
        Self {
            parameter,
            delta_phi,
            gain_db: delta_phi.map(|d| gain_db(n_atoms, d)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineCurve {
    pub label: BaselineKind,
    pub points: Vec<BaselinePoint>,
}

fn nonempty(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        Err(Error::Grid(format!("empty {what} grid")))
    } else {
        Ok(())
    }
}

fn twisted_css(n_atoms: usize, q: f64) -> Result<DickeState> {
    apply_twist(&make_css(n_atoms)?, q, TwistSign::Forward)
}

/// Generator of the phase in the QCRB.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcrbAxis {
    /// Best rotation axis: largest eigenvalue of the spin covariance.
    Optimal,
    /// Rotation about y, as in the echo.
    Y,
}

/// `Δφ = 1/(2ΔS)` for the twisted state, with `ΔS` along the chosen axis.
pub fn qcrb_delta_phi(n_atoms: usize, q: f64, axis: QcrbAxis) -> Result<f64> {
    let state = twisted_css(n_atoms, q)?;
    let var = match axis {
        QcrbAxis::Optimal => state.covariance().max_variance(),
        QcrbAxis::Y => state.moments(Axis::Y).variance,
    };
    Ok(1.0 / (2.0 * var.sqrt()))
}

pub fn qcrb_curve(n_atoms: usize, q_grid: &[f64], axis: QcrbAxis) -> Result<BaselineCurve> {
    ensure_atoms(n_atoms, 1)?;
    nonempty(q_grid, "Q")?;
    let points = q_grid
        .par_iter()
        .map(|&q| Ok(BaselinePoint::new(n_atoms, q, Some(qcrb_delta_phi(n_atoms, q, axis)?))))
        .collect::<Result<_>>()?;
    Ok(BaselineCurve {
        label: match axis {
            QcrbAxis::Optimal => BaselineKind::Qcrb,
            QcrbAxis::Y => BaselineKind::QcrbSy,
        },
        points,
    })
}

/// Best quadrature of the twisted state in the y-z plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Squeezing {
    pub q: f64,
    /// Angle from z toward y of the least-noisy quadrature, radians.
    pub angle: f64,
    pub var_min: f64,
    pub mean_sx: f64,
    pub delta_phi: Option<f64>,
}

/// Direct-detection squeezing sensitivity `√(Var_min + ΔS_meas²)/|⟨S_x⟩|`.
pub fn squeezing_point(n_atoms: usize, q: f64, noise: DetectionNoise) -> Result<Squeezing> {
    let state = twisted_css(n_atoms, q)?;
    let c = state.covariance();
    let (vyy, vzz, cyz) = (c.cov[1][1], c.cov[2][2], c.cov[1][2]);
    let half_diff = (vzz - vyy) / 2.0;
    let var_min = ((vyy + vzz) / 2.0 - half_diff.hypot(cyz)).max(0.0);
    let angle = (cyz.atan2(half_diff) + PI) / 2.0;
    let mean_sx = c.mean[0];
    let meas = noise.delta_s_meas(n_atoms);
    let delta_phi = if mean_sx.abs() <= 1e-10 * spin_of(n_atoms) {
        None
    } else {
        Some((var_min + meas * meas).sqrt() / mean_sx.abs())
    };
    Ok(Squeezing {
        q,
        angle,
        var_min,
        mean_sx,
        delta_phi,
    })
}

/// Squeezing along a Q grid, with the quadrature angle unwrapped modulo π.
pub fn squeezing_scan(n_atoms: usize, q_grid: &[f64], noise: DetectionNoise) -> Result<Vec<Squeezing>> {
    ensure_atoms(n_atoms, 1)?;
    nonempty(q_grid, "Q")?;
    let mut rows: Vec<Squeezing> = q_grid
        .par_iter()
        .map(|&q| squeezing_point(n_atoms, q, noise))
        .collect::<Result<_>>()?;
    for i in 1..rows.len() {
        let prev = rows[i - 1].angle;
        let a = &mut rows[i].angle;
        *a -= PI * ((*a - prev) / PI).round();
    }
    Ok(rows)
}

pub fn squeezing_curve(n_atoms: usize, q_grid: &[f64], noise: DetectionNoise) -> Result<BaselineCurve> {
    let points = squeezing_scan(n_atoms, q_grid, noise)?
        .into_iter()
        .map(|s| BaselinePoint::new(n_atoms, s.q, s.delta_phi))
        .collect();
    Ok(BaselineCurve {
        label: BaselineKind::SqueezingDirect,
        points,
    })
}

/// Twisting strength minimizing the direct-detection squeezing Δφ.
pub fn best_squeezing(n_atoms: usize, noise: DetectionNoise) -> Result<Squeezing> {
    ensure_atoms(n_atoms, 2)?;
    let cost = |q: f64| {
        squeezing_point(n_atoms, q, noise)
            .ok()
            .and_then(|s| s.delta_phi)
            .unwrap_or(f64::INFINITY)
    };
    let hi = 4.0 * (n_atoms as f64).sqrt();
    let (q, _) = minimize_bracketed(cost, 1e-3, hi, 160, true)?;
    squeezing_point(n_atoms, q, noise)
}

/// Squeezing Δφ versus detection resolution at a fixed twist.
pub fn squeezing_noise_curve(n_atoms: usize, q: f64, delta_n_grid: &[f64]) -> Result<BaselineCurve> {
    nonempty(delta_n_grid, "delta_n")?;
    let points = delta_n_grid
        .iter()
        .map(|&dn| {
            let noise = DetectionNoise::from_delta_n(n_atoms, dn)?;
            Ok(BaselinePoint::new(n_atoms, dn, squeezing_point(n_atoms, q, noise)?.delta_phi))
        })
        .collect::<Result<_>>()?;
    Ok(BaselineCurve {
        label: BaselineKind::SqueezingDirect,
        points,
    })
}

/// Outcome statistics of an S_x measurement on `R_y(φ)(|+y⟩ + |-y⟩)/√2`.
///
/// With `x = Nφ` the probabilities are `p_k = (a_k + b_k cos x + c_k sin x)/2`.
#[derive(Clone, Debug)]
pub struct GhzReadout {
    n_atoms: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl GhzReadout {
    pub fn new(n_atoms: usize) -> Result<Self> {
        ensure_atoms(n_atoms, 1)?;
        let css = make_css(n_atoms)?;
        let plus = css.rotated(Axis::Z, FRAC_PI_2)?;
        let minus = css.rotated(Axis::Z, -FRAC_PI_2)?;
        // S_x outcomes become S_z outcomes after R_y(-π/2).
        let u = plus.rotated(Axis::Y, -FRAC_PI_2)?;
        let v = minus.rotated(Axis::Y, -FRAC_PI_2)?;
        let mut a = Vec::with_capacity(n_atoms + 1);
        let mut b = Vec::with_capacity(n_atoms + 1);
        let mut c = Vec::with_capacity(n_atoms + 1);
        for (x, y) in u.amplitudes().iter().zip(v.amplitudes()) {
            let z: C64 = x.conj() * y;
            a.push(x.norm_sqr() + y.norm_sqr());
            b.push(2.0 * z.re);
            c.push(-2.0 * z.im);
        }
        Ok(Self { n_atoms, a, b, c })
    }

    pub fn probabilities(&self, phi: f64) -> Vec<f64> {
        let x = self.n_atoms as f64 * phi;
        let (s, c) = x.sin_cos();
        (0..=self.n_atoms)
            .map(|k| 0.5 * (self.a[k] + self.b[k] * c + self.c[k] * s))
            .collect()
    }

    /// Classical Fisher information at `x = Nφ` of the record smeared by a
    /// Gaussian of width `sigma_m` in units of m.
    fn fisher(&self, smeared: &Smeared, x: f64) -> f64 {
        let nf = self.n_atoms as f64;
        let (s, c) = x.sin_cos();
        smeared
            .a
            .iter()
            .zip(&smeared.b)
            .zip(&smeared.c)
            .map(|((&a, &b), &cc)| {
                let p = 0.5 * (a + b * c + cc * s);
                let dp = 0.5 * nf * (-b * s + cc * c);
                if p > 1e-300 {
                    dp * dp / p
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            * smeared.weight
    }

    fn smear(&self, sigma_m: f64) -> Smeared {
        if KERNEL_CUTOFF * sigma_m * 2.0 <= 1.0 {
            // Kernels around neighbouring m do not overlap: the smeared Fisher
            // information equals the discrete one.
            return Smeared {
                a: self.a.clone(),
                b: self.b.clone(),
                c: self.c.clone(),
                weight: 1.0,
            };
        }
        // Grid step min(1, Δn/8) in n = 2m.
        let step = (1.0f64).min(2.0 * sigma_m / 8.0) / 2.0;
        let s = spin_of(self.n_atoms);
        let reach = KERNEL_CUTOFF * sigma_m;
        let lo = -s - reach;
        let points = ((2.0 * (s + reach)) / step).ceil() as usize + 1;
        let norm = 1.0 / (sigma_m * (2.0 * PI).sqrt());
        let mut a = vec![0.0; points];
        let mut b = vec![0.0; points];
        let mut c = vec![0.0; points];
        for k in 0..=self.n_atoms {
            let m = k as f64 - s;
            let first = (((m - reach) - lo) / step).floor().max(0.0) as usize;
            let last = ((((m + reach) - lo) / step).ceil() as usize).min(points - 1);
            for i in first..=last {
                let y = lo + step * i as f64 - m;
                let g = norm * (-0.5 * (y / sigma_m).powi(2)).exp();
                a[i] += g * self.a[k];
                b[i] += g * self.b[k];
                c[i] += g * self.c[k];
            }
        }
        Smeared { a, b, c, weight: step }
    }

    /// Largest Fisher information over `x = Nφ ∈ [0, π]` for resolution Δn.
    pub fn best_fisher(&self, delta_n: f64) -> Result<(f64, f64)> {
        ensure_finite("delta_n", delta_n)?;
        if delta_n < 0.0 {
            return Err(Error::OutOfRange {
                name: "delta_n",
                value: delta_n,
                reason: "resolution must be non-negative",
            });
        }
        // Δn resolves n = 2m, so the spread in m is Δn/2.
        let smeared = self.smear(delta_n / 2.0);
        let nf = self.n_atoms as f64;
        let best = (0..GHZ_PHASE_SCAN)
            .map(|i| {
                let x = PI * i as f64 / (GHZ_PHASE_SCAN - 1) as f64;
                (x / nf, self.fisher(&smeared, x))
            })
            .max_by(|p, q| p.1.total_cmp(&q.1))
            .expect("scan is non-empty");
        Ok(best)
    }
}

struct Smeared {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Quadrature weight of each sample.
    weight: f64,
}

/// One point of the noisy GHZ bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhzBound {
    pub delta_n: f64,
    pub fisher: f64,
    pub phi_star: f64,
    pub delta_phi: f64,
}

pub fn ghz_bound_points(n_atoms: usize, delta_n_grid: &[f64]) -> Result<Vec<GhzBound>> {
    nonempty(delta_n_grid, "delta_n")?;
    let readout = GhzReadout::new(n_atoms)?;
    delta_n_grid
        .par_iter()
        .map(|&dn| {
            let (phi_star, fisher) = readout.best_fisher(dn)?;
            Ok(GhzBound {
                delta_n: dn,
                fisher,
                phi_star,
                delta_phi: 1.0 / fisher.sqrt(),
            })
        })
        .collect()
}

/// Cramér-Rao bound `1/√F` of the GHZ readout versus Δn.
pub fn ghz_noisy_bound(n_atoms: usize, delta_n_grid: &[f64]) -> Result<BaselineCurve> {
    let points = ghz_bound_points(n_atoms, delta_n_grid)?
        .into_iter()
        .map(|g| BaselinePoint::new(n_atoms, g.delta_n, Some(g.delta_phi)))
        .collect();
    Ok(BaselineCurve {
        label: BaselineKind::GhzNoisy,
        points,
    })
}

/// Flat reference lines: SQL at 0 dB and the Heisenberg limit at 10·log₁₀N.
pub fn reference_curve(n_atoms: usize, kind: BaselineKind, grid: &[f64]) -> Result<BaselineCurve> {
    ensure_atoms(n_atoms, 1)?;
    let n = n_atoms as f64;
    let delta_phi = match kind {
        BaselineKind::Sql => 1.0 / n.sqrt(),
        BaselineKind::Heisenberg => 1.0 / n,
        other => return Err(Error::Inconsistent(format!("{other} is not a reference line"))),
    };
    Ok(BaselineCurve {
        label: kind,
        points: grid.iter().map(|&p| BaselinePoint::new(n_atoms, p, Some(delta_phi))).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echo::{optimal_twisting, run_echo};
    use crate::grid::logspace;
    use crate::numeric::power_law_exponent;

    #[test]
    fn css_sits_at_sql() {
        for axis in [QcrbAxis::Optimal, QcrbAxis::Y] {
            let d = qcrb_delta_phi(100, 0.0, axis).unwrap();
            assert!((d * 10.0 - 1.0).abs() < 1e-12, "{axis:?} {d}");
        }
        let s = squeezing_point(100, 0.0, DetectionNoise::NONE).unwrap();
        assert!((gain_db(100, s.delta_phi.unwrap())).abs() < 1e-10);
    }

    #[test]
    fn ghz_point_reaches_heisenberg_along_best_axis() {
        for n in [4, 10, 1000] {
            let q = n as f64 * FRAC_PI_2;
            let d = qcrb_delta_phi(n, q, QcrbAxis::Optimal).unwrap();
            assert!((d * n as f64 - 1.0).abs() < 1e-9, "N={n} {d}");
        }
    }

    #[test]
    fn echo_never_beats_qcrb() {
        let n = 200;
        for q in logspace(0.1, 2.0 * (n as f64).sqrt(), 25) {
            let echo = run_echo(n, q, 0.0).unwrap().metrological_gain_db.unwrap();
            let bound = gain_db(n, qcrb_delta_phi(n, q, QcrbAxis::Y).unwrap());
            assert!(echo <= bound + 1e-9, "Q={q} {echo} {bound}");
        }
    }

    #[test]
    fn quadrature_angle_is_continuous() {
        let rows = squeezing_scan(300, &logspace(0.01, 60.0, 300), DetectionNoise::NONE).unwrap();
        for w in rows.windows(2) {
            assert!((w[1].angle - w[0].angle).abs() < FRAC_PI_2);
        }
    }

    #[test]
    fn squeezing_beats_sql_and_loses_to_echo_under_noise() {
        let n = 1000;
        let s = best_squeezing(n, DetectionNoise::NONE).unwrap();
        assert!(gain_db(n, s.delta_phi.unwrap()) > 10.0);
        // r ≈ 1.4: past the point where squeezing drops below the SQL, yet
        // the echo keeps most of its gain.
        let noise = DetectionNoise::from_delta_n(n, 1.4 * (n as f64).sqrt()).unwrap();
        let sq = best_squeezing(n, noise).unwrap();
        assert!(gain_db(n, sq.delta_phi.unwrap()) < 0.0);
        let q = optimal_twisting(n).unwrap().q_opt;
        let echo = crate::echo::noisy_sensitivity(n, q, noise).unwrap().unwrap();
        assert!(gain_db(n, echo) > 20.0);
    }

    #[test]
    fn squeezing_exponent() {
        let ns = [100usize, 300, 1000, 3000];
        let d: Vec<f64> = ns
            .iter()
            .map(|&n| best_squeezing(n, DetectionNoise::NONE).unwrap().delta_phi.unwrap())
            .collect();
        let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let k = power_law_exponent(&x, &d).unwrap();
        assert!((-0.90..=-0.78).contains(&k), "{k}");
    }

    #[test]
    fn noiseless_ghz_is_heisenberg_limited() {
        for n in [2, 4, 10] {
            let g = ghz_bound_points(n, &[0.0]).unwrap()[0];
            assert!((g.delta_phi * n as f64 - 1.0).abs() < 1e-6, "N={n} {}", g.delta_phi);
        }
    }

    #[test]
    fn ghz_probabilities_are_normalized() {
        let r = GhzReadout::new(7).unwrap();
        for phi in [0.0, 0.1, 0.33] {
            let s: f64 = r.probabilities(phi).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ghz_fisher_decreases_with_resolution() {
        let pts = ghz_bound_points(40, &[0.0, 0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0]).unwrap();
        assert!(pts[4].fisher < 0.5 * pts[0].fisher);
        for w in pts.windows(2) {
            // Once the fringe is washed out F sits at a ~1e-8 numerical floor.
            assert!(w[1].fisher <= w[0].fisher * (1.0 + 1e-9) + 1e-6, "{:?}", w);
        }
    }

    #[test]
    fn echo_beats_ghz_at_single_atom_resolution() {
        let n = 1000;
        let ghz = ghz_bound_points(n, &[1.0]).unwrap()[0];
        let q = optimal_twisting(n).unwrap().q_opt;
        let noise = DetectionNoise::from_delta_n(n, 1.0).unwrap();
        let echo = crate::echo::noisy_sensitivity(n, q, noise).unwrap().unwrap();
        assert!(echo < ghz.delta_phi);
    }

    #[test]
    fn reference_lines() {
        let h = reference_curve(1000, BaselineKind::Heisenberg, &[1.0]).unwrap();
        assert!((h.points[0].gain_db.unwrap() - 30.0).abs() < 1e-12);
        let s = reference_curve(1000, BaselineKind::Sql, &[1.0]).unwrap();
        assert!(s.points[0].gain_db.unwrap().abs() < 1e-12);
        assert!(reference_curve(10, BaselineKind::Qcrb, &[1.0]).is_err());
    }
}
