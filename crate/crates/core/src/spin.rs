//! Collective spin S = N/2 in the symmetric (Dicke) subspace.
//!
//! Basis index `k = 0..=N` labels `|S, m⟩` with `m = k - S`. The atom count
//! `N` is stored instead of `S` so half-integer spins never need
//! floating-point indexing.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{ensure_atoms, ensure_finite, Error, Result};

pub type C64 = Complex64;

/// Tolerance for normalization checks on externally supplied states.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Eigenvalue floor below which a density matrix is reported as non-positive.
pub const POSITIVITY_FLOOR: f64 = -1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Direction of one-axis twisting: `+χ S_z²` or `-χ S_z²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwistSign {
    Forward,
    Reverse,
}

impl TwistSign {
    pub fn value(self) -> f64 {
        match self {
            TwistSign::Forward => 1.0,
            TwistSign::Reverse => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// First and symmetrized second moments of (S_x, S_y, S_z).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinCovariance {
    pub mean: [f64; 3],
    /// `cov[i][j] = ⟨{S_i, S_j}⟩/2 - ⟨S_i⟩⟨S_j⟩`
    pub cov: [[f64; 3]; 3],
}

impl SpinCovariance {
    pub fn variance(&self, axis: Axis) -> f64 {
        let i = axis.index();
        self.cov[i][i]
    }

    /// Largest variance over all spin directions.
    pub fn max_variance(&self) -> f64 {
        let m = Matrix3::from_fn(|i, j| self.cov[i][j]);
        SymmetricEigen::new(m).eigenvalues.max()
    }
}

#[inline]
pub fn spin_of(n_atoms: usize) -> f64 {
    n_atoms as f64 / 2.0
}

/// `m` for basis index `k`.
#[inline]
pub fn m_value(n_atoms: usize, k: usize) -> f64 {
    (2.0 * k as f64 - n_atoms as f64) / 2.0
}

/// `m²`, exact for half-integer m.
#[inline]
pub(crate) fn m_squared(n_atoms: usize, k: usize) -> f64 {
    let two_m = 2.0 * k as f64 - n_atoms as f64;
    two_m * two_m / 4.0
}

/// Diagonal of S_z and the ladder elements `⟨m+1|S₊|m⟩ = √(S(S+1) - m(m+1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveOperators {
    n_atoms: usize,
    sz_diag: Vec<f64>,
    ladder: Vec<f64>,
}

impl CollectiveOperators {
    pub fn new(n_atoms: usize) -> Self {
        let sz_diag = (0..=n_atoms).map(|k| m_value(n_atoms, k)).collect();
        // S(S+1) - m(m+1) = (S - m)(S + m + 1) = (N - k)(k + 1)
        let ladder = (0..n_atoms)
            .map(|k| (((n_atoms - k) * (k + 1)) as f64).sqrt())
            .collect();
        Self {
            n_atoms,
            sz_diag,
            ladder,
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.n_atoms + 1
    }

    pub fn sz_diag(&self) -> &[f64] {
        &self.sz_diag
    }

    pub fn ladder(&self) -> &[f64] {
        &self.ladder
    }

    /// `out = S_axis · v`
    pub fn apply_into(&self, axis: Axis, v: &[C64], out: &mut [C64]) {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        match axis {
            Axis::Z => {
                for ((o, &x), &m) in out.iter_mut().zip(v).zip(&self.sz_diag) {
                    *o = x * m;
                }
            }
            Axis::X | Axis::Y => {
                // (S₊v)[k] = a[k-1] v[k-1],  (S₋v)[k] = a[k] v[k+1]
                for k in 0..n {
                    let up = if k > 0 {
                        v[k - 1] * self.ladder[k - 1]
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    let down = if k + 1 < n {
                        v[k + 1] * self.ladder[k]
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    out[k] = match axis {
                        Axis::X => (up + down) * 0.5,
                        // (S₊ - S₋)/(2i) = -i/2 (S₊ - S₋)
                        _ => (up - down) * C64::new(0.0, -0.5),
                    };
                }
            }
        }
    }

    pub fn apply(&self, axis: Axis, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        self.apply_into(axis, v, &mut out);
        out
    }

    /// Matrix element `⟨row|S_axis|col⟩`.
    pub fn element(&self, axis: Axis, row: usize, col: usize) -> C64 {
        match axis {
            Axis::Z if row == col => C64::new(self.sz_diag[row], 0.0),
            Axis::X if row == col + 1 => C64::new(0.5 * self.ladder[col], 0.0),
            Axis::X if col == row + 1 => C64::new(0.5 * self.ladder[row], 0.0),
            Axis::Y if row == col + 1 => C64::new(0.0, -0.5 * self.ladder[col]),
            Axis::Y if col == row + 1 => C64::new(0.0, 0.5 * self.ladder[row]),
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn dense(&self, axis: Axis) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim(), self.dim(), |r, c| self.element(axis, r, c))
    }

    fn band(&self, axis: Axis, k: usize) -> std::ops::RangeInclusive<usize> {
        match axis {
            Axis::Z => k..=k,
            _ => k.saturating_sub(1)..=(k + 1).min(self.n_atoms),
        }
    }
}

/// Anything with well-defined collective-spin moments.
pub trait SpinState {
    fn n_atoms(&self) -> usize;
    fn moments(&self, axis: Axis) -> Moments;
    fn covariance(&self) -> SpinCovariance;

    fn spin(&self) -> f64 {
        spin_of(self.n_atoms())
    }
}

/// Mean and variance of `S_axis` via banded operator action.
pub fn moments<S: SpinState + ?Sized>(state: &S, axis: Axis) -> Moments {
    state.moments(axis)
}

/// Pure state of N two-level atoms in the symmetric subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeState {
    n_atoms: usize,
    amps: Vec<C64>,
}

impl DickeState {
    /// Wraps amplitudes ordered by `m = -S..S`. They must already be normalized.
    pub fn from_amplitudes(n_atoms: usize, amps: Vec<C64>) -> Result<Self> {
        ensure_atoms(n_atoms, 1)?;
        if amps.len() != n_atoms + 1 {
            return Err(Error::Dimension {
                expected: n_atoms + 1,
                got: amps.len(),
            });
        }
        let state = Self { n_atoms, amps };
        let norm = state.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(n_atoms: usize, mut amps: Vec<C64>) -> Result<Self> {
        let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized(norm * norm));
        }
        for c in &mut amps {
            *c /= norm;
        }
        Self::from_amplitudes(n_atoms, amps)
    }

    pub(crate) fn from_raw(n_atoms: usize, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), n_atoms + 1);
        Self { n_atoms, amps }
    }

    /// Dicke state `|S, m⟩` with `m = k - S`.
    pub fn dicke(n_atoms: usize, k: usize) -> Result<Self> {
        ensure_atoms(n_atoms, 1)?;
        if k > n_atoms {
            return Err(Error::OutOfRange {
                name: "basis index",
                value: k as f64,
                reason: "must not exceed N",
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); n_atoms + 1];
        amps[k] = C64::new(1.0, 0.0);
        Ok(Self { n_atoms, amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &DickeState) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn twisted(&self, q: f64, sign: TwistSign) -> Result<Self> {
        apply_twist(self, q, sign)
    }

    pub fn rotated(&self, axis: Axis, angle: f64) -> Result<Self> {
        crate::rotation::apply_rotation(self, axis, angle)
    }
}

impl SpinState for DickeState {
    fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    fn moments(&self, axis: Axis) -> Moments {
        let ops = CollectiveOperators::new(self.n_atoms);
        let w = ops.apply(axis, &self.amps);
        let mean: f64 = self.amps.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        let second: f64 = w.iter().map(|c| c.norm_sqr()).sum();
        Moments {
            mean,
            variance: (second - mean * mean).max(0.0),
        }
    }

    fn covariance(&self) -> SpinCovariance {
        let ops = CollectiveOperators::new(self.n_atoms);
        let images: Vec<Vec<C64>> = Axis::ALL.iter().map(|&a| ops.apply(a, &self.amps)).collect();
        let dot = |u: &[C64], v: &[C64]| -> C64 { u.iter().zip(v).map(|(a, b)| a.conj() * b).sum() };
        let mut mean = [0.0; 3];
        for i in 0..3 {
            mean[i] = dot(&self.amps, &images[i]).re;
        }
        let mut cov = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                // Re⟨S_i ψ|S_j ψ⟩ = ⟨{S_i, S_j}⟩/2
                let c = dot(&images[i], &images[j]).re - mean[i] * mean[j];
                cov[i][j] = c;
                cov[j][i] = c;
            }
        }
        SpinCovariance { mean, cov }
    }
}

/// Coherent spin state polarized along +x: `S_x|ψ⟩ = S|ψ⟩`.
///
/// Amplitudes are `2^(-S) √C(2S, S+m)`, built in log space so that large N
/// does not overflow the binomial coefficients.
pub fn make_css(n_atoms: usize) -> Result<DickeState> {
    ensure_atoms(n_atoms, 1)?;
    let half_log2 = 0.5 * n_atoms as f64 * std::f64::consts::LN_2;
    let mut ln_binom = 0.0_f64;
    let mut amps = Vec::with_capacity(n_atoms + 1);
    for k in 0..=n_atoms {
        if k > 0 {
            ln_binom += (((n_atoms - k + 1) as f64) / k as f64).ln();
        }
        amps.push(C64::new((0.5 * ln_binom - half_log2).exp(), 0.0));
    }
    // Cumulative log sums drift by ~1e-15 per term; renormalize once.
    let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in &mut amps {
        *c /= norm;
    }
    Ok(DickeState::from_raw(n_atoms, amps))
}

/// `exp(-i·sign·(Q/2S)·S_z²)|ψ⟩`, with `Q = 2Sχt` the twisting strength.
pub fn apply_twist(state: &DickeState, q: f64, sign: TwistSign) -> Result<DickeState> {
    ensure_finite("Q", q)?;
    if q < 0.0 {
        return Err(Error::OutOfRange {
            name: "Q",
            value: q,
            reason: "twisting strength must be non-negative",
        });
    }
    let n = state.n_atoms;
    let theta = sign.value() * q / (2.0 * spin_of(n));
    let amps = state
        .amps
        .iter()
        .enumerate()
        .map(|(k, &c)| c * C64::from_polar(1.0, -theta * m_squared(n, k)))
        .collect();
    Ok(DickeState::from_raw(n, amps))
}

/// Density matrix on the symmetric subspace, `ρ[(k, k')] = ⟨m|ρ|m'⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinDensityMatrix {
    n_atoms: usize,
    elems: DMatrix<C64>,
}

impl SpinDensityMatrix {
    pub fn from_pure(state: &DickeState) -> Self {
        let a = state.amplitudes();
        let n = a.len();
        let elems = DMatrix::from_fn(n, n, |r, c| a[r] * a[c].conj());
        Self {
            n_atoms: state.n_atoms,
            elems,
        }
    }

    /// Validates dimension, Hermiticity and unit trace (both within 1e-12).
    pub fn from_matrix(n_atoms: usize, elems: DMatrix<C64>) -> Result<Self> {
        ensure_atoms(n_atoms, 1)?;
        if elems.nrows() != n_atoms + 1 || elems.ncols() != n_atoms + 1 {
            return Err(Error::Dimension {
                expected: n_atoms + 1,
                got: elems.nrows().max(elems.ncols()),
            });
        }
        let rho = Self { n_atoms, elems };
        let herm = rho.hermiticity_error();
        if herm > 1e-12 {
            return Err(Error::Inconsistent(format!(
                "density matrix not Hermitian (max deviation {herm:e})"
            )));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-12 {
            return Err(Error::Inconsistent(format!("density matrix trace {tr} != 1")));
        }
        Ok(rho)
    }

    pub(crate) fn from_raw(n_atoms: usize, elems: DMatrix<C64>) -> Self {
        Self { n_atoms, elems }
    }

    pub fn dim(&self) -> usize {
        self.n_atoms + 1
    }

    pub fn elements(&self) -> &DMatrix<C64> {
        &self.elems
    }

    pub(crate) fn elements_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.elems
    }

    pub fn into_elements(self) -> DMatrix<C64> {
        self.elems
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.elems[(k, k)].re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.elems[(r, c)] - self.elems[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.elems.clone()).eigenvalues.min()
    }

    /// Smallest eigenvalue if it falls below [`POSITIVITY_FLOOR`]. Roundoff on
    /// large matrices makes this a warning, not an error.
    pub fn positivity_warning(&self) -> Option<f64> {
        let lam = self.min_eigenvalue();
        (lam < POSITIVITY_FLOOR).then_some(lam)
    }

    pub fn purity(&self) -> f64 {
        self.elems.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn twisted(&self, q: f64, sign: TwistSign) -> Result<Self> {
        ensure_finite("Q", q)?;
        if q < 0.0 {
            return Err(Error::OutOfRange {
                name: "Q",
                value: q,
                reason: "twisting strength must be non-negative",
            });
        }
        let mut out = self.clone();
        twist_in_place(&mut out, sign.value() * q / (2.0 * spin_of(self.n_atoms)));
        Ok(out)
    }

    pub fn rotated(&self, axis: Axis, angle: f64) -> Result<Self> {
        crate::rotation::rotate_density(self, axis, angle)
    }

    /// `Tr(ρ A)` for a dense operator.
    pub fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        (op * &self.elems).trace()
    }

    fn band_expectation(&self, ops: &CollectiveOperators, a: Axis, b: Axis) -> C64 {
        // Tr(ρ A B) = Σ_{k,j,l} ρ_{lk} A_{kj} B_{jl}, all banded.
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.dim() {
            for j in ops.band(a, k) {
                let akj = ops.element(a, k, j);
                if akj.norm_sqr() == 0.0 {
                    continue;
                }
                for l in ops.band(b, j) {
                    acc += self.elems[(l, k)] * akj * ops.element(b, j, l);
                }
            }
        }
        acc
    }
}

/// Multiplies ρ_{kk'} by `exp(-iθ(m_k² - m_k'²))`.
pub(crate) fn twist_in_place(rho: &mut SpinDensityMatrix, theta: f64) {
    let n = rho.n_atoms;
    let phases: Vec<C64> = (0..=n)
        .map(|k| C64::from_polar(1.0, -theta * m_squared(n, k)))
        .collect();
    for c in 0..=n {
        let pc = phases[c].conj();
        for (r, pr) in phases.iter().enumerate() {
            rho.elems[(r, c)] *= pr * pc;
        }
    }
}

impl SpinState for SpinDensityMatrix {
    fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    fn moments(&self, axis: Axis) -> Moments {
        let ops = CollectiveOperators::new(self.n_atoms);
        let mean = self.band_expectation_single(&ops, axis);
        let second = self.band_expectation(&ops, axis, axis).re;
        Moments {
            mean,
            variance: (second - mean * mean).max(0.0),
        }
    }

    fn covariance(&self) -> SpinCovariance {
        let ops = CollectiveOperators::new(self.n_atoms);
        let mut mean = [0.0; 3];
        for (i, &a) in Axis::ALL.iter().enumerate() {
            mean[i] = self.band_expectation_single(&ops, a);
        }
        let mut cov = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                // Re Tr(ρ S_i S_j) = ⟨{S_i, S_j}⟩/2 for Hermitian ρ.
                let c = self.band_expectation(&ops, Axis::ALL[i], Axis::ALL[j]).re - mean[i] * mean[j];
                cov[i][j] = c;
                cov[j][i] = c;
            }
        }
        SpinCovariance { mean, cov }
    }
}

impl SpinDensityMatrix {
    fn band_expectation_single(&self, ops: &CollectiveOperators, a: Axis) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.dim() {
            for j in ops.band(a, k) {
                acc += self.elems[(j, k)] * ops.element(a, k, j);
            }
        }
        acc.re
    }
}
