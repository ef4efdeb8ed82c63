//! Cavity-mediated twisting: collective dephasing, scattering noise and the
//! total phase variance of the echo.

use nalgebra::DMatrix;

use crate::echo::EchoResult;
use crate::error::{ensure_atoms, ensure_finite, Error, Result};
use crate::numeric::minimize_bracketed;
use crate::spin::{make_css, spin_of, Axis, CollectiveOperators, SpinDensityMatrix, SpinState, C64};

/// Minimum number of interleaved twist/dephase steps per half of the echo.
pub const MIN_TROTTER_STEPS: usize = 32;

/// Step-doubling stops once the relative change falls to this level.
pub const TROTTER_TOLERANCE: f64 = 1e-6;

const MAX_TROTTER_STEPS: usize = 1 << 14;

/// Largest atom number for the density-matrix echo, dimension `N + 1`.
pub const DENSITY_MAX_ATOMS: usize = 2000;

/// Default spin-flip probability per scattered photon.
pub const DEFAULT_FLIP_PROBABILITY: f64 = 0.5;

/// Hardware parameters of the cavity implementation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityParams {
    pub n_atoms: usize,
    /// Single-atom cooperativity.
    pub eta: f64,
    /// Normalized laser-cavity detuning.
    pub d: f64,
    /// Spin-flip probability per scattering event.
    pub r: f64,
    pub q: f64,
}

impl CavityParams {
    pub fn new(n_atoms: usize, eta: f64, d: f64, r: f64, q: f64) -> Result<Self> {
        let p = Self { n_atoms, eta, d, r, q };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_atoms(self.n_atoms, 1)?;
        for (name, v) in [("eta", self.eta), ("d", self.d), ("r", self.r), ("Q", self.q)] {
            ensure_finite(name, v)?;
        }
        if self.eta <= 0.0 {
            return Err(out_of_range("eta", self.eta, "cooperativity must be positive"));
        }
        if self.d == 0.0 {
            return Err(out_of_range("d", self.d, "detuning must be non-zero"));
        }
        if !(0.0..=1.0).contains(&self.r) {
            return Err(out_of_range("r", self.r, "flip probability must lie in [0, 1]"));
        }
        if self.q < 0.0 {
            return Err(out_of_range("Q", self.q, "twisting strength must be non-negative"));
        }
        Ok(())
    }
}

fn out_of_range(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::OutOfRange { name, value, reason }
}

/// Cavity drive mapped onto twisting, dephasing and scattering, each as a
/// dimensionless product with the interaction time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityMap {
    /// `χt = Q/(2S)`; carries the sign of the detuning.
    pub chi_t: f64,
    pub gamma_t: f64,
    pub gamma_sc_t: f64,
}

impl CavityMap {
    pub fn q(&self, n_atoms: usize) -> f64 {
        2.0 * spin_of(n_atoms) * self.chi_t
    }

    pub fn dephasing_per_twist(&self) -> f64 {
        self.gamma_t / self.chi_t
    }

    pub fn scattering_per_twist(&self) -> f64 {
        self.gamma_sc_t / self.chi_t
    }
}

/// `Q/2S = pΦ²d/(1+d²)²`, `γ = 2χ/d`, `Γ_sc = χ(1/d + d)/(2η)`.
pub fn cavity_map(photons: f64, phase: f64, d: f64, eta: f64) -> Result<CavityMap> {
    ensure_finite("p", photons)?;
    ensure_finite("Phi", phase)?;
    ensure_finite("d", d)?;
    ensure_finite("eta", eta)?;
    if phase <= 0.0 {
        return Err(out_of_range("Phi", phase, "must be positive"));
    }
    if d == 0.0 {
        return Err(out_of_range("d", d, "detuning must be non-zero"));
    }
    if eta <= 0.0 {
        return Err(out_of_range("eta", eta, "cooperativity must be positive"));
    }
    if photons < 0.0 {
        return Err(out_of_range("p", photons, "photon number must be non-negative"));
    }
    let chi_t = photons * phase * phase * d / (1.0 + d * d).powi(2);
    Ok(CavityMap {
        chi_t,
        gamma_t: 2.0 * chi_t / d,
        gamma_sc_t: chi_t * (1.0 / d + d) / (2.0 * eta),
    })
}

/// Dephasing accumulated over one twist of strength `Q`: `γt = Q/(S|d|)`.
pub fn dephasing_for_twist(n_atoms: usize, q: f64, d: f64) -> f64 {
    q / (spin_of(n_atoms) * d.abs())
}

/// Exact S_z-dephasing: `ρ_{mm'} e^{-γt(m-m')²/2}`.
pub fn dephasing_channel(rho: &SpinDensityMatrix, gamma_t: f64) -> Result<SpinDensityMatrix> {
    check_gamma(gamma_t)?;
    let mut out = rho.clone();
    let dim = out.dim();
    let m = out.elements_mut();
    for c in 0..dim {
        for r in 0..dim {
            let dm = r as f64 - c as f64;
            m[(r, c)] *= (-0.5 * gamma_t * dm * dm).exp();
        }
    }
    Ok(out)
}

fn check_gamma(gamma_t: f64) -> Result<()> {
    ensure_finite("gamma_t", gamma_t)?;
    if gamma_t < 0.0 {
        return Err(out_of_range("gamma_t", gamma_t, "dephasing must be non-negative"));
    }
    Ok(())
}

/// Twisting by `theta_total = ±Q/2S` interleaved with dephasing `gamma_total`,
/// in `steps` equal slices. Acts on any matrix, not only states.
fn twist_dephase(mat: &mut DMatrix<C64>, n_atoms: usize, theta_total: f64, gamma_total: f64, steps: usize) {
    let dim = n_atoms + 1;
    let theta = theta_total / steps as f64;
    let gamma = gamma_total / steps as f64;
    let m = |k: usize| k as f64 - n_atoms as f64 / 2.0;
    let twist: Vec<C64> = (0..dim).map(|k| C64::from_polar(1.0, -theta * m(k) * m(k))).collect();
    // Dephasing depends only on |r - c|.
    let damp: Vec<f64> = (0..dim).map(|j| (-0.5 * gamma * (j * j) as f64).exp()).collect();
    for c in 0..dim {
        let tc = twist[c].conj();
        for r in 0..dim {
            let f = twist[r] * tc;
            let g = damp[r.abs_diff(c)];
            let x = &mut mat[(r, c)];
            for _ in 0..steps {
                *x = *x * f * g;
            }
        }
    }
}

fn relative_change(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let scale = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / scale
}

/// Runs one half of the echo with step doubling; returns the result and the
/// step count that met the tolerance.
fn converged_half(
    start: &DMatrix<C64>,
    n_atoms: usize,
    theta_total: f64,
    gamma_total: f64,
    min_steps: usize,
) -> Result<(DMatrix<C64>, usize)> {
    let mut steps = min_steps.max(MIN_TROTTER_STEPS);
    let mut prev = start.clone();
    twist_dephase(&mut prev, n_atoms, theta_total, gamma_total, steps);
    loop {
        let next_steps = steps * 2;
        let mut next = start.clone();
        twist_dephase(&mut next, n_atoms, theta_total, gamma_total, next_steps);
        let change = relative_change(&next, &prev);
        if change <= TROTTER_TOLERANCE {
            return Ok((next, next_steps));
        }
        if next_steps >= MAX_TROTTER_STEPS {
            return Err(Error::TrotterNonConvergence {
                steps: next_steps,
                change,
            });
        }
        prev = next;
        steps = next_steps;
    }
}

/// Density-matrix echo with collective dephasing during both twists.
#[derive(Clone, Debug)]
pub struct DephasedEcho {
    n_atoms: usize,
    q: f64,
    gamma_t: f64,
    steps: usize,
    half: SpinDensityMatrix,
}

impl DephasedEcho {
    /// Prepares the CSS and applies the forward twist with dephasing `gamma_t`.
    pub fn new(n_atoms: usize, q: f64, gamma_t: f64, min_steps: usize) -> Result<Self> {
        ensure_atoms(n_atoms, 1)?;
        if n_atoms > DENSITY_MAX_ATOMS {
            return Err(Error::TooManyAtoms {
                got: n_atoms,
                max: DENSITY_MAX_ATOMS,
                context: "the density-matrix echo",
            });
        }
        ensure_finite("Q", q)?;
        if q < 0.0 {
            return Err(out_of_range("Q", q, "twisting strength must be non-negative"));
        }
        check_gamma(gamma_t)?;
        let rho = SpinDensityMatrix::from_pure(&make_css(n_atoms)?);
        let theta = q / (2.0 * spin_of(n_atoms));
        let (half, steps) = converged_half(rho.elements(), n_atoms, theta, gamma_t, min_steps)?;
        Ok(Self {
            n_atoms,
            q,
            gamma_t,
            steps,
            half: SpinDensityMatrix::from_raw(n_atoms, half),
        })
    }

    pub fn trotter_steps(&self) -> usize {
        self.steps
    }

    pub fn gamma_t(&self) -> f64 {
        self.gamma_t
    }

    pub fn half_state(&self) -> &SpinDensityMatrix {
        &self.half
    }

    fn untwist(&self, mat: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let theta = -self.q / (2.0 * spin_of(self.n_atoms));
        Ok(converged_half(mat, self.n_atoms, theta, self.gamma_t, self.steps)?.0)
    }

    pub fn state_at(&self, phi: f64) -> Result<SpinDensityMatrix> {
        let rotated = self.half.rotated(Axis::Y, phi)?;
        Ok(SpinDensityMatrix::from_raw(self.n_atoms, self.untwist(rotated.elements())?))
    }

    /// Moments of S_y at `phi`. The slope is exact: the channel is linear, so
    /// d⟨S_y⟩/dφ = Tr(S_y · C(-i[S_y, ρ_φ])) with C the untwisting half.
    pub fn run(&self, phi: f64) -> Result<EchoResult> {
        let rotated = self.half.rotated(Axis::Y, phi)?;
        let ops = CollectiveOperators::new(self.n_atoms);
        let derivative = self.untwist(&sy_commutator(&ops, rotated.elements()))?;
        let slope = trace_with(&ops, Axis::Y, &derivative).re;
        let fin = SpinDensityMatrix::from_raw(self.n_atoms, self.untwist(rotated.elements())?);
        let m = fin.moments(Axis::Y);
        Ok(EchoResult::assemble(self.n_atoms, self.q, phi, m.mean, m.variance, slope))
    }
}

/// `-i[S_y, X]` using the banded S_y.
fn sy_commutator(ops: &CollectiveOperators, x: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = ops.dim();
    let mut out = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    let minus_i = C64::new(0.0, -1.0);
    for c in 0..dim {
        for r in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for j in r.saturating_sub(1)..=(r + 1).min(dim - 1) {
                acc += ops.element(Axis::Y, r, j) * x[(j, c)];
            }
            for j in c.saturating_sub(1)..=(c + 1).min(dim - 1) {
                acc -= x[(r, j)] * ops.element(Axis::Y, j, c);
            }
            out[(r, c)] = minus_i * acc;
        }
    }
    out
}

/// `Tr(S_axis X)` for a general matrix.
fn trace_with(ops: &CollectiveOperators, axis: Axis, x: &DMatrix<C64>) -> C64 {
    let dim = ops.dim();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..dim {
        for j in k.saturating_sub(1)..=(k + 1).min(dim - 1) {
            acc += ops.element(axis, k, j) * x[(j, k)];
        }
    }
    acc
}

/// Final density matrix of the dephased echo.
pub fn dephased_echo_state(n_atoms: usize, q: f64, gamma_t: f64, phi: f64, min_steps: usize) -> Result<SpinDensityMatrix> {
    DephasedEcho::new(n_atoms, q, gamma_t, min_steps)?.state_at(phi)
}

/// Echo in the cavity implementation, with `γt = Q/(S|d|)` per twist.
pub fn echo_with_dephasing(n_atoms: usize, q: f64, d: f64, phi: f64) -> Result<EchoResult> {
    ensure_finite("d", d)?;
    if d == 0.0 {
        return Err(out_of_range("d", d, "detuning must be non-zero"));
    }
    echo_with_dephasing_rate(n_atoms, q, dephasing_for_twist(n_atoms, q, d), phi)
}

/// Echo with an explicit dephasing `γt` per twist.
pub fn echo_with_dephasing_rate(n_atoms: usize, q: f64, gamma_t: f64, phi: f64) -> Result<EchoResult> {
    DephasedEcho::new(n_atoms, q, gamma_t, MIN_TROTTER_STEPS)?.run(phi)
}

/// `Tr(ρ S₊²)`
pub fn raising_squared(rho: &SpinDensityMatrix) -> C64 {
    let ops = CollectiveOperators::new(rho.n_atoms());
    let a = ops.ladder();
    let e = rho.elements();
    (0..rho.n_atoms().saturating_sub(1))
        .map(|k| e[(k, k + 2)] * (a[k] * a[k + 1]))
        .sum()
}

/// Var(S_y)/(S/2) after the echo at φ = 0 with dephasing `γt` per twist:
/// `[S² + S/2 - e^{-4γt}(S² - S/2)]/S`.
pub fn variance_growth_exact(n_atoms: usize, gamma_t: f64) -> f64 {
    let s = spin_of(n_atoms);
    (s * s + s / 2.0 - (-4.0 * gamma_t).exp() * (s * s - s / 2.0)) / s
}

/// Lowest-order variance growth `1 + 4Q/d`.
pub fn variance_growth_closed_form(q: f64, d: f64) -> f64 {
    1.0 + 4.0 * q / d.abs()
}

/// `σ₀² ≈ e^{Q²/2S}/Q²`
pub fn sigma0_sq(n_atoms: usize, q: f64) -> f64 {
    (q * q / (2.0 * spin_of(n_atoms))).exp() / (q * q)
}

/// Dephasing part of the dissipative variance, `4e^{Q²/2S}/(Q|d|)`.
pub fn sigma_dephasing_sq(n_atoms: usize, q: f64, d: f64) -> f64 {
    4.0 * (q * q / (2.0 * spin_of(n_atoms))).exp() / (q * d.abs())
}

/// Scattering part, `2rQ(1/|d| + |d|)/(3Sη)`.
pub fn scatter_noise(n_atoms: usize, q: f64, d: f64, eta: f64, r: f64) -> f64 {
    let d = d.abs();
    2.0 * r * q * (1.0 / d + d) / (3.0 * spin_of(n_atoms) * eta)
}

/// RMS spin flips from scattering, `√(rQ(1/|d| + |d|)/(3η))`.
pub fn scatter_spin_rms(q: f64, d: f64, eta: f64, r: f64) -> f64 {
    let d = d.abs();
    (r * q * (1.0 / d + d) / (3.0 * eta)).sqrt()
}

/// Normalized phase variances `σ² = 2S·Var(φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaBreakdown {
    pub sigma0_sq: f64,
    pub sigma_dephasing_sq: f64,
    pub sigma_scatter_sq: f64,
    pub sigma_total_sq: f64,
}

impl SigmaBreakdown {
    pub fn gain_db(&self) -> f64 {
        -10.0 * self.sigma_total_sq.log10()
    }
}

pub fn cavity_sigma_total(params: &CavityParams) -> Result<SigmaBreakdown> {
    params.validate()?;
    if params.q == 0.0 {
        return Err(out_of_range("Q", 0.0, "phase variance diverges without twisting"));
    }
    Ok(sigma_breakdown(params))
}

fn sigma_breakdown(p: &CavityParams) -> SigmaBreakdown {
    let a = sigma0_sq(p.n_atoms, p.q);
    let b = sigma_dephasing_sq(p.n_atoms, p.q, p.d);
    let c = scatter_noise(p.n_atoms, p.q, p.d, p.eta, p.r);
    SigmaBreakdown {
        sigma0_sq: a,
        sigma_dephasing_sq: b,
        sigma_scatter_sq: c,
        sigma_total_sq: a + b + c,
    }
}

/// Twisting strength of the approximate optimum, `Qd = √(6Sη/r)`.
pub fn approximate_optimal_q(n_atoms: usize, eta: f64, r: f64, d: f64) -> f64 {
    (6.0 * spin_of(n_atoms) * eta / r).sqrt() / d.abs()
}

/// Closed-form total variance at the approximate optimum,
/// `r(1+d²)/(6Sη) + √(32r(1+1/d²)/(3Sη))`.
pub fn approximate_sigma_total(n_atoms: usize, eta: f64, r: f64, d: f64) -> f64 {
    let s = spin_of(n_atoms);
    r * (1.0 + d * d) / (6.0 * s * eta) + (32.0 * r * (1.0 + 1.0 / (d * d)) / (3.0 * s * eta)).sqrt()
}

/// Large-detuning plateau `√(32r/(3Sη))`.
pub fn sigma_plateau(n_atoms: usize, eta: f64, r: f64) -> f64 {
    (32.0 * r / (3.0 * spin_of(n_atoms) * eta)).sqrt()
}

/// Detuning for [`optimize_cavity`]: held fixed or optimized as well.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Detuning {
    Fixed(f64),
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityOptimum {
    pub q: f64,
    pub d: f64,
    pub sigma: SigmaBreakdown,
}

const D_SEARCH: (f64, f64) = (1e-2, 1e6);

/// Minimizes the total phase variance over Q, and over d when it is free.
pub fn optimize_cavity(n_atoms: usize, eta: f64, r: f64, detuning: Detuning) -> Result<CavityOptimum> {
    match detuning {
        Detuning::Fixed(d) => optimize_q(n_atoms, eta, r, d),
        Detuning::Free => {
            CavityParams::new(n_atoms, eta, 1.0, r, 0.0)?;
            let cost = |d: f64| optimize_q(n_atoms, eta, r, d).map_or(f64::INFINITY, |o| o.sigma.sigma_total_sq);
            let (d, _) = minimize_bracketed(cost, D_SEARCH.0, D_SEARCH.1, 96, true)?;
            optimize_q(n_atoms, eta, r, d)
        }
    }
}

fn optimize_q(n_atoms: usize, eta: f64, r: f64, d: f64) -> Result<CavityOptimum> {
    let base = CavityParams::new(n_atoms, eta, d, r, 0.0)?;
    let s = spin_of(n_atoms);
    let total = |q: f64| sigma_breakdown(&CavityParams { q, ..base }).sigma_total_sq;
    // σ₀² alone is minimal at √(2S); dissipation only pushes the optimum lower,
    // and the exponential makes anything far above √(2S) irrelevant.
    let hi = 8.0 * (2.0 * s).sqrt();
    let (q, _) = minimize_bracketed(total, 1e-6 * hi, hi, 256, true)?;
    Ok(CavityOptimum {
        q,
        d,
        sigma: sigma_breakdown(&CavityParams { q, ..base }),
    })
}
