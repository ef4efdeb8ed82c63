//! Spherical Wigner quasiprobability of a collective-spin state.
//!
//! `W(θ,φ) = c Σ_{k,q} ρ_kq Y_kq(θ,φ)` with multipoles
//! `ρ_kq = Tr(ρ T_kq†)` of the orthonormal spherical tensor operators
//! `T_kq = √((2k+1)/(2S+1)) Σ_m ⟨S m; k q|S m+q⟩ |m+q⟩⟨m|`.
//! The constant `c = √((2S+1)/4π)` makes `∫ W dΩ = Tr ρ`.

use std::f64::consts::PI;

use crate::error::{ensure_atoms, Error, Result};
use crate::spin::{SpinState, C64};
use crate::DickeState;

/// Largest atom number accepted by [`wigner_grid`]. Beyond it the alternating
/// Racah sums lose more than ~1e-11 to cancellation.
pub const WIGNER_MAX_ATOMS: usize = 60;

/// Clebsch–Gordan coefficients from the Racah formula with log-factorials.
/// Angular momenta are passed doubled so half-integers stay integral.
struct ClebschGordan {
    ln_fact: Vec<f64>,
}

impl ClebschGordan {
    fn new(max: usize) -> Self {
        let mut ln_fact = vec![0.0; max + 2];
        for i in 1..ln_fact.len() {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        Self { ln_fact }
    }

    fn lf(&self, twice: i64) -> f64 {
        debug_assert!(twice >= 0 && twice % 2 == 0);
        self.ln_fact[(twice / 2) as usize]
    }

    /// `⟨j1 m1; j2 m2 | j m⟩`, all arguments doubled.
    fn coefficient(&self, j1: i64, m1: i64, j2: i64, m2: i64, j: i64, m: i64) -> f64 {
        if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
            return 0.0;
        }
        if j > j1 + j2 || j < (j1 - j2).abs() || (j1 + j2 + j) % 2 != 0 {
            return 0.0;
        }
        let prefactor = 0.5
            * (((j + 1) as f64).ln() + self.lf(j + j1 - j2) + self.lf(j - j1 + j2) + self.lf(j1 + j2 - j)
                - self.lf(j1 + j2 + j + 2)
                + self.lf(j + m)
                + self.lf(j - m)
                + self.lf(j1 - m1)
                + self.lf(j1 + m1)
                + self.lf(j2 - m2)
                + self.lf(j2 + m2));
        // z runs over doubled even values keeping every factorial argument ≥ 0.
        let z_min = 0.max(j2 - j - m1).max(j1 - j + m2);
        let z_max = (j1 + j2 - j).min(j1 - m1).min(j2 + m2);
        let mut sum = 0.0;
        let mut z = z_min;
        while z <= z_max {
            let ln_den = self.lf(z)
                + self.lf(j1 + j2 - j - z)
                + self.lf(j1 - m1 - z)
                + self.lf(j2 + m2 - z)
                + self.lf(j - j2 + m1 + z)
                + self.lf(j - j1 - m2 + z);
            let sign = if (z / 2) % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (prefactor - ln_den).exp();
            z += 2;
        }
        sum
    }
}

/// Multipole components `ρ_kq`, indexed `[k][q + k]`.
#[derive(Clone, Debug)]
pub struct Multipoles {
    n_atoms: usize,
    rho_kq: Vec<Vec<C64>>,
}

impl Multipoles {
    pub fn of_state<S: AsDensity + ?Sized>(state: &S) -> Self {
        let n = state.atoms();
        let dim = n + 1;
        let rho = |r: usize, c: usize| state.element(r, c);
        let cg = ClebschGordan::new(4 * n + 4);
        let two_s = n as i64;
        let mut rho_kq = Vec::with_capacity(dim);
        for k in 0..dim {
            let norm = ((2 * k + 1) as f64 / dim as f64).sqrt();
            let mut row = Vec::with_capacity(2 * k + 1);
            for q in -(k as i64)..=(k as i64) {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..dim {
                    let r = c as i64 + q;
                    if r < 0 || r >= dim as i64 {
                        continue;
                    }
                    let two_m = 2 * c as i64 - two_s;
                    let coef = cg.coefficient(two_s, two_m, 2 * k as i64, 2 * q, two_s, two_m + 2 * q);
                    acc += rho(r as usize, c) * coef;
                }
                row.push(acc * norm);
            }
            rho_kq.push(row);
        }
        Self { n_atoms: n, rho_kq }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn get(&self, k: usize, q: i64) -> C64 {
        self.rho_kq[k][(q + k as i64) as usize]
    }

    /// `Σ |ρ_kq|²`, equal to the purity `Tr ρ²`.
    pub fn weight(&self) -> f64 {
        self.rho_kq.iter().flatten().map(|c| c.norm_sqr()).sum()
    }
}

/// Read access to density-matrix elements of pure or mixed states.
pub trait AsDensity {
    fn atoms(&self) -> usize;
    fn element(&self, row: usize, col: usize) -> C64;
}

impl AsDensity for DickeState {
    fn atoms(&self) -> usize {
        self.n_atoms()
    }

    fn element(&self, row: usize, col: usize) -> C64 {
        self.amplitudes()[row] * self.amplitudes()[col].conj()
    }
}

impl AsDensity for crate::SpinDensityMatrix {
    fn atoms(&self) -> usize {
        self.n_atoms()
    }

    fn element(&self, row: usize, col: usize) -> C64 {
        self.elements()[(row, col)]
    }
}

/// Orthonormal associated Legendre functions with the Condon–Shortley phase,
/// `Y_kq(θ,φ) = P̄_k^q(cos θ) e^{iqφ}`, for `0 ≤ q ≤ k ≤ k_max`, indexed `[k][q]`.
#[allow(clippy::needless_range_loop)]
fn normalized_legendre(k_max: usize, theta: f64) -> Vec<Vec<f64>> {
    let (x, s) = (theta.cos(), theta.sin());
    let mut p: Vec<Vec<f64>> = (0..=k_max).map(|k| vec![0.0; k + 1]).collect();
    p[0][0] = 1.0 / (4.0 * PI).sqrt();
    for q in 1..=k_max {
        p[q][q] = -((2 * q + 1) as f64 / (2 * q) as f64).sqrt() * s * p[q - 1][q - 1];
    }
    for q in 0..k_max {
        p[q + 1][q] = ((2 * q + 3) as f64).sqrt() * x * p[q][q];
    }
    for q in 0..=k_max {
        for k in q + 2..=k_max {
            let (kf, qf) = (k as f64, q as f64);
            let a = ((4.0 * kf * kf - 1.0) / (kf * kf - qf * qf)).sqrt();
            let km1 = kf - 1.0;
            let a_prev = ((4.0 * km1 * km1 - 1.0) / (km1 * km1 - qf * qf)).sqrt();
            p[k][q] = a * (x * p[k - 1][q] - p[k - 2][q] / a_prev);
        }
    }
    p
}

/// `W` sampled on `θ_i = πi/(n_θ-1)` (both poles included) and periodic `φ_j = 2πj/n_φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub n_atoms: usize,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Row-major, `values[i * phi.len() + j]` at `(theta[i], phi[j])`.
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.phi.len() + j]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Position `(i, j)` of the largest sample.
    pub fn argmax(&self) -> (usize, usize) {
        let idx = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        (idx / self.phi.len(), idx % self.phi.len())
    }

    /// `∫ W dΩ` by Clenshaw–Curtis in cos θ and the trapezoid rule in φ.
    /// Exact for `n_θ - 1 ≥ 2S` and `n_φ ≥ 2S + 1`.
    pub fn integrate(&self) -> f64 {
        let w = clenshaw_curtis(self.theta.len() - 1);
        let dphi = 2.0 * PI / self.phi.len() as f64;
        (0..self.theta.len())
            .map(|i| {
                let ring: f64 = (0..self.phi.len()).map(|j| self.at(i, j)).sum();
                w[i] * ring * dphi
            })
            .sum()
    }

    /// Sum of `|W| dΩ` over samples where W is negative.
    pub fn negative_volume(&self) -> f64 {
        let w = clenshaw_curtis(self.theta.len() - 1);
        let dphi = 2.0 * PI / self.phi.len() as f64;
        (0..self.theta.len())
            .map(|i| {
                let ring: f64 = (0..self.phi.len()).map(|j| self.at(i, j).min(0.0)).sum();
                -w[i] * ring * dphi
            })
            .sum()
    }
}

/// Clenshaw–Curtis weights on `x_j = cos(jπ/n)`, `j = 0..=n`, for `∫_{-1}^{1}`.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0, 1.0];
    }
    let nf = n as f64;
    (0..=n)
        .map(|j| {
            let c = if j == 0 || j == n { 1.0 } else { 2.0 };
            let mut s = 0.0;
            for k in 1..=n / 2 {
                let b = if 2 * k == n { 1.0 } else { 2.0 };
                s += b / (4.0 * (k * k) as f64 - 1.0) * (2.0 * (k * j) as f64 * PI / nf).cos();
            }
            c / nf * (1.0 - s)
        })
        .collect()
}

/// Samples the spherical Wigner function of a pure or mixed state.
pub fn wigner_grid<S: AsDensity + ?Sized>(state: &S, n_theta: usize, n_phi: usize) -> Result<WignerGrid> {
    let n = state.atoms();
    ensure_atoms(n, 1)?;
    if n > WIGNER_MAX_ATOMS {
        return Err(Error::TooManyAtoms {
            got: n,
            max: WIGNER_MAX_ATOMS,
            context: "the Wigner function",
        });
    }
    if n_theta < 2 || n_phi < 2 {
        return Err(Error::Grid(format!(
            "Wigner grid needs at least 2 points per axis, got {n_theta} x {n_phi}"
        )));
    }
    let mp = Multipoles::of_state(state);
    let k_max = n;
    let scale = ((n + 1) as f64 / (4.0 * PI)).sqrt();
    let theta: Vec<f64> = (0..n_theta)
        .map(|i| if i + 1 == n_theta { PI } else { PI * i as f64 / (n_theta - 1) as f64 })
        .collect();
    let phi: Vec<f64> = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
    let mut values = Vec::with_capacity(n_theta * n_phi);
    for &t in &theta {
        let p = normalized_legendre(k_max, t);
        // f[q + k_max] = Σ_k ρ_kq P̄_k^|q|, with Y_{k,-q} = (-1)^q conj(Y_kq).
        let f: Vec<C64> = (-(k_max as i64)..=k_max as i64)
            .map(|q| {
                let qa = q.unsigned_abs() as usize;
                let sign = if q < 0 && qa % 2 == 1 { -1.0 } else { 1.0 };
                (qa..=k_max).map(|k| mp.get(k, q) * (sign * p[k][qa])).sum()
            })
            .collect();
        for &ph in &phi {
            let w: f64 = f
                .iter()
                .enumerate()
                .map(|(i, fq)| (fq * C64::from_polar(1.0, (i as f64 - k_max as f64) * ph)).re)
                .sum();
            values.push(scale * w);
        }
    }
    Ok(WignerGrid {
        n_atoms: n,
        theta,
        phi,
        values,
    })
}
