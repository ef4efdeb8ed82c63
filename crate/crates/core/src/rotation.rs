//! Spin rotations and the Wigner small-d matrix.
//!
//! Column `m` of `d^S(β)` is the eigenvector of `cos β S_z + sin β S_x` with
//! eigenvalue `m`. Each column is built from a twisted three-term recursion:
//! ratio recursions run inward from both ends of the `m'` range and are
//! joined at the index where they agree best, so no step ever follows the
//! exponentially growing solution of the recurrence. Cost is O(N²) for the
//! full matrix with no factorials, which keeps N in the thousands stable.

use nalgebra::DMatrix;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{ensure_finite, Result};
use crate::spin::{m_value, spin_of, Axis, DickeState, SpinDensityMatrix, SpinState, C64};

/// `β` folded into `[0, π]` plus the bookkeeping needed to recover `d(β)`.
#[derive(Clone, Copy, Debug)]
struct ReducedAngle {
    beta: f64,
    /// `d(-β) = d(β)ᵀ`
    transpose: bool,
    /// `d(β ± 2π) = (-1)^(2S) d(β)`
    sign: f64,
}

fn reduce_angle(n_atoms: usize, beta: f64) -> ReducedAngle {
    let parity = if n_atoms % 2 == 1 { -1.0 } else { 1.0 };
    let mut b = beta.rem_euclid(4.0 * PI);
    if b > 2.0 * PI {
        b -= 4.0 * PI;
    }
    let mut sign = 1.0;
    if b > PI {
        b -= 2.0 * PI;
        sign = parity;
    } else if b <= -PI {
        b += 2.0 * PI;
        sign = parity;
    }
    ReducedAngle {
        beta: b.abs(),
        transpose: b < 0.0,
        sign,
    }
}

/// Entries of `d(β)` below this are dropped when `βS ≤ 1`.
const BAND_CUTOFF: f64 = 1e-22;

/// Half-width `w` of the numerically nonzero band of `d(β)`, if narrower than the matrix.
///
/// `|d_{m+j,m}| ≤ (βS)^j/j! · e^{βS}`, from the power series of `exp(-iβS_y)`
/// and `‖S_y‖ = S`. Only used for `βS ≤ 1`, where the diagonal is positive.
fn band_half_width(n_atoms: usize, beta: f64) -> Option<usize> {
    let x = beta * spin_of(n_atoms);
    if x > 1.0 {
        return None;
    }
    let mut bound = x.exp();
    let mut w = 0;
    while bound >= BAND_CUTOFF {
        w += 1;
        bound *= x / w as f64;
        if w >= n_atoms {
            return None;
        }
    }
    Some(w.max(1))
}

/// Generates columns of `d^S(β)` for `0 ≤ β ≤ π`.
struct ColumnSolver {
    n_atoms: usize,
    m: Vec<f64>,
    half_ladder: Vec<f64>,
    cos_b: f64,
    sin_b: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    guard: f64,
    band: Option<usize>,
}

impl ColumnSolver {
    fn new(n_atoms: usize, beta: f64) -> Self {
        let dim = n_atoms + 1;
        let m = (0..dim).map(|k| m_value(n_atoms, k)).collect();
        let half_ladder = (0..n_atoms)
            .map(|k| 0.5 * (((n_atoms - k) * (k + 1)) as f64).sqrt())
            .collect();
        Self {
            n_atoms,
            m,
            half_ladder,
            cos_b: beta.cos(),
            sin_b: beta.sin(),
            lower: vec![0.0; dim],
            upper: vec![0.0; dim],
            guard: f64::EPSILON * (1.0 + spin_of(n_atoms)),
            band: band_half_width(n_atoms, beta),
        }
    }

    #[inline]
    fn nonzero(&self, x: f64) -> f64 {
        if x == 0.0 {
            self.guard
        } else {
            x
        }
    }

    /// Writes `d_{m', m}` into `out` for `m'` in the returned inclusive range,
    /// with `m` given by `col`. Entries outside the range are left untouched.
    fn column(&mut self, col: usize, out: &mut [f64]) -> (usize, usize) {
        let dim = self.n_atoms + 1;
        let lambda = self.m[col];
        if self.sin_b == 0.0 {
            out.fill(0.0);
            out[col] = 1.0;
            return (col, col);
        }
        let (lo, hi) = match self.band {
            Some(w) => (col.saturating_sub(w), (col + w).min(dim - 1)),
            None => (0, dim - 1),
        };
        let alpha = |k: usize| self.m[k] * self.cos_b - lambda;
        let off = |k: usize| self.sin_b * self.half_ladder[k];

        // lower[k] = v_k / v_{k+1}, from the bottom of the range.
        let mut carry = 0.0;
        for k in lo..hi {
            let den = self.nonzero(alpha(k) + carry);
            self.lower[k] = -off(k) / den;
            carry = off(k) * self.lower[k];
        }
        // upper[k] = v_k / v_{k-1}, from the top of the range.
        let mut carry = 0.0;
        for k in (lo + 1..=hi).rev() {
            let den = self.nonzero(alpha(k) + carry);
            self.upper[k] = -off(k - 1) / den;
            carry = off(k - 1) * self.upper[k];
        }
        // Residual of row k when both ratio chains meet there.
        let mut twist = lo;
        let mut best = f64::INFINITY;
        for k in lo..=hi {
            let mut g = alpha(k);
            if k > lo {
                g += off(k - 1) * self.lower[k - 1];
            }
            if k < hi {
                g += off(k) * self.upper[k + 1];
            }
            if g.abs() < best {
                best = g.abs();
                twist = k;
            }
        }

        out[twist] = 1.0;
        for k in (lo..twist).rev() {
            out[k] = self.lower[k] * out[k + 1];
        }
        let mut top_negative = false;
        for k in twist + 1..=hi {
            out[k] = self.upper[k] * out[k - 1];
            top_negative ^= self.upper[k].is_sign_negative();
        }

        // Phase convention: sign d_{S,m}(β) = (-1)^(S-m) for 0 < β < π, which
        // within the band is equivalent to a positive diagonal.
        let flip = match self.band {
            Some(_) => out[col] < 0.0,
            None => top_negative != ((self.n_atoms - col) % 2 == 1),
        };
        let norm = out[lo..=hi].iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = if flip { -1.0 } else { 1.0 } / norm;
        for x in out[lo..=hi].iter_mut() {
            *x *= scale;
        }
        (lo, hi)
    }
}

/// Dense Wigner small-d matrix `d_{m'm}(β) = ⟨m'|exp(-iβS_y)|m⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerSmallD {
    n_atoms: usize,
    beta: f64,
    /// Column-major, `data[col * dim + row]`.
    data: Vec<f64>,
}

impl WignerSmallD {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.n_atoms + 1
    }

    /// Element `d_{m'm}` by basis indices `(k', k)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.dim() + row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        let d = self.dim();
        &self.data[col * d..(col + 1) * d]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dim(), self.dim(), &self.data)
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let dim = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for (col, &c) in v.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            for (o, &d) in out.iter_mut().zip(self.column(col)) {
                *o += c * d;
            }
        }
        out
    }
}

/// Builds `d^S(β)` for `S = N/2` and any finite `β`.
pub fn wigner_small_d(n_atoms: usize, beta: f64) -> Result<WignerSmallD> {
    ensure_finite("rotation angle", beta)?;
    let dim = n_atoms + 1;
    let red = reduce_angle(n_atoms, beta);
    let mut data = vec![0.0; dim * dim];
    let mut solver = ColumnSolver::new(n_atoms, red.beta);
    let mut col_buf = vec![0.0; dim];
    for col in 0..dim {
        col_buf.fill(0.0);
        solver.column(col, &mut col_buf);
        for (row, &x) in col_buf.iter().enumerate() {
            let idx = if red.transpose {
                row * dim + col
            } else {
                col * dim + row
            };
            data[idx] = red.sign * x;
        }
    }
    Ok(WignerSmallD {
        n_atoms,
        beta,
        data,
    })
}

/// `exp(-iβS_y)v` without storing the matrix.
pub(crate) fn rotate_y(n_atoms: usize, beta: f64, v: &[C64]) -> Vec<C64> {
    let dim = n_atoms + 1;
    let red = reduce_angle(n_atoms, beta);
    let mut solver = ColumnSolver::new(n_atoms, red.beta);
    let mut col_buf = vec![0.0; dim];
    let mut out = vec![C64::new(0.0, 0.0); dim];
    for col in 0..dim {
        if !red.transpose && v[col].re == 0.0 && v[col].im == 0.0 {
            continue;
        }
        let (lo, hi) = solver.column(col, &mut col_buf);
        let (band, vb) = (&col_buf[lo..=hi], &v[lo..=hi]);
        if red.transpose {
            // out[col] = Σ_row d(|β|)[row][col] v[row]
            let acc: C64 = band.iter().zip(vb).map(|(&d, &x)| x * d).sum();
            out[col] = acc * red.sign;
        } else {
            let c = v[col] * red.sign;
            for (o, &d) in out[lo..=hi].iter_mut().zip(band) {
                *o += c * d;
            }
        }
    }
    out
}

fn rotate_z_in_place(n_atoms: usize, angle: f64, v: &mut [C64]) {
    for (k, c) in v.iter_mut().enumerate() {
        *c *= C64::from_polar(1.0, -angle * m_value(n_atoms, k));
    }
}

/// `exp(-i·angle·S_axis)|ψ⟩`.
///
/// z is diagonal, y uses the small-d matrix, and x is composed as
/// `R_z(-π/2) R_y(angle) R_z(π/2)`.
pub fn apply_rotation(state: &DickeState, axis: Axis, angle: f64) -> Result<DickeState> {
    ensure_finite("rotation angle", angle)?;
    let n = state.n_atoms();
    let amps = match axis {
        Axis::Z => {
            let mut v = state.amplitudes().to_vec();
            rotate_z_in_place(n, angle, &mut v);
            v
        }
        Axis::Y => rotate_y(n, angle, state.amplitudes()),
        Axis::X => {
            let mut v = state.amplitudes().to_vec();
            rotate_z_in_place(n, FRAC_PI_2, &mut v);
            let mut v = rotate_y(n, angle, &v);
            rotate_z_in_place(n, -FRAC_PI_2, &mut v);
            v
        }
    };
    Ok(DickeState::from_raw(n, amps))
}

/// `R ρ R†` for `R = exp(-i·angle·S_axis)`.
pub fn rotate_density(rho: &SpinDensityMatrix, axis: Axis, angle: f64) -> Result<SpinDensityMatrix> {
    ensure_finite("rotation angle", angle)?;
    let n = rho.n_atoms();
    let dim = n + 1;
    let z_phases = |a: f64| -> Vec<C64> { (0..dim).map(|k| C64::from_polar(1.0, -a * m_value(n, k))).collect() };
    let conj_diag = |m: &mut DMatrix<C64>, p: &[C64]| {
        for c in 0..dim {
            for r in 0..dim {
                m[(r, c)] *= p[r] * p[c].conj();
            }
        }
    };
    let conj_y = |m: &DMatrix<C64>, beta: f64| -> Result<DMatrix<C64>> {
        // d is real, so D(X + iY)Dᵀ = DXDᵀ + i DYDᵀ with real GEMMs.
        let d = wigner_small_d(n, beta)?.to_dmatrix();
        let re = m.map(|c| c.re);
        let im = m.map(|c| c.im);
        let re = &d * re * d.transpose();
        let im = &d * im * d.transpose();
        Ok(DMatrix::from_fn(dim, dim, |r, c| C64::new(re[(r, c)], im[(r, c)])))
    };
    let elems = match axis {
        Axis::Z => {
            let mut m = rho.elements().clone();
            conj_diag(&mut m, &z_phases(angle));
            m
        }
        Axis::Y => conj_y(rho.elements(), angle)?,
        Axis::X => {
            let mut m = rho.elements().clone();
            conj_diag(&mut m, &z_phases(FRAC_PI_2));
            let mut m = conj_y(&m, angle)?;
            conj_diag(&mut m, &z_phases(-FRAC_PI_2));
            m
        }
    };
    Ok(SpinDensityMatrix::from_raw(n, elems))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::spin::make_css;
    use proptest::prelude::*;

    fn half_spin_d(beta: f64) -> [[f64; 2]; 2] {
        // rows/cols ordered m = -1/2, +1/2
        let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
        [[c, s], [-s, c]]
    }

    #[test]
    fn banded_columns_match_full_solve() {
        for (n, beta) in [(40, 1e-9), (300, 2e-6), (1000, 1e-3), (64, 1.0 / 32.0)] {
            let mut banded = ColumnSolver::new(n, beta);
            assert!(banded.band.is_some());
            let mut full = ColumnSolver::new(n, beta);
            full.band = None;
            let (mut a, mut b) = (vec![0.0; n + 1], vec![0.0; n + 1]);
            for col in [0, n / 3, n / 2, n] {
                a.fill(0.0);
                banded.column(col, &mut a);
                full.column(col, &mut b);
                let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(err < 1e-14, "N={n} beta={beta} col={col} err={err:e}");
            }
        }
        assert_eq!(band_half_width(100, 0.1), None);
    }

    #[test]
    fn spin_half_closed_form() {
        for beta in [0.3, 1.2, 2.9, -0.7, 4.0, 7.5, -11.0] {
            let d = wigner_small_d(1, beta).unwrap();
            let want = half_spin_d(beta);
            for r in 0..2 {
                for c in 0..2 {
                    assert!((d.get(r, c) - want[r][c]).abs() < 1e-14, "beta {beta} ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn spin_one_closed_form() {
        // d^1 with rows/cols m = -1, 0, 1.
        let beta: f64 = 0.83;
        let (c, s) = (beta.cos(), beta.sin());
        let r2 = std::f64::consts::SQRT_2;
        let want = [
            [(1.0 + c) / 2.0, s / r2, (1.0 - c) / 2.0],
            [-s / r2, c, s / r2],
            [(1.0 - c) / 2.0, -s / r2, (1.0 + c) / 2.0],
        ];
        let d = wigner_small_d(2, beta).unwrap();
        for r in 0..3 {
            for k in 0..3 {
                assert!((d.get(r, k) - want[r][k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_angle_is_identity() {
        let s = make_css(9).unwrap();
        assert_eq!(s.rotated(Axis::Y, 0.0).unwrap(), s);
        assert_eq!(s.rotated(Axis::Z, 0.0).unwrap(), s);
    }

    #[test]
    fn z_quarter_turn_maps_x_to_y() {
        let n = 40;
        let s = make_css(n).unwrap().rotated(Axis::Z, FRAC_PI_2).unwrap();
        assert!((s.moments(Axis::Y).mean - spin_of(n)).abs() < 1e-10);
    }

    #[test]
    fn y_quarter_turn_maps_z_to_x() {
        let n = 25;
        let up = DickeState::dicke(n, n).unwrap();
        let s = up.rotated(Axis::Y, FRAC_PI_2).unwrap();
        let css = make_css(n).unwrap();
        assert!((s.inner(&css).norm() - 1.0).abs() < 1e-12);
        assert!((s.moments(Axis::X).mean - spin_of(n)).abs() < 1e-10);
    }

    #[test]
    fn large_n_columns_are_orthonormal() {
        let n = 2000;
        let d = wigner_small_d(n, 1.1).unwrap();
        for &(a, b) in &[(0, 0), (3, 3), (1000, 1000), (1000, 1001), (7, 1500), (2000, 2000)] {
            let dot: f64 = d.column(a).iter().zip(d.column(b)).map(|(x, y)| x * y).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-11, "({a},{b}) {dot}");
        }
    }

    #[test]
    fn tiny_angles_are_first_order_accurate() {
        // d_{m+1,m}(β) ≈ -(β/2)·a_m for small β, as -sin(β/2) for spin 1/2.
        let n = 1000;
        let beta = 1e-9;
        let d = wigner_small_d(n, beta).unwrap();
        for k in [0usize, 100, 500, 999] {
            let a = (((n - k) * (k + 1)) as f64).sqrt();
            let got = d.get(k + 1, k);
            assert!((got / (-0.5 * beta * a) - 1.0).abs() < 1e-8, "k={k} {got}");
        }
    }

    proptest! {
        #[test]
        fn y_rotations_compose(n in 1usize..40, a in -4.0f64..4.0, b in -4.0f64..4.0, seed in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let amps = (0..=n).map(|k| C64::new(seed[k % 6], seed[(k + 3) % 6] + 0.1)).collect();
            let s = DickeState::normalized(n, amps).unwrap();
            let two = s.rotated(Axis::Y, a).unwrap().rotated(Axis::Y, b).unwrap();
            let one = s.rotated(Axis::Y, a + b).unwrap();
            for (x, y) in two.amplitudes().iter().zip(one.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-10);
            }
            prop_assert!((one.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn x_rotation_preserves_norm(n in 1usize..300, angle in -7.0f64..7.0) {
            let s = make_css(n).unwrap().rotated(Axis::X, angle).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }
}
