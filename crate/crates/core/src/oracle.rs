//! Dense reference simulation for small atom numbers.
//!
//! Everything here goes through generic dense matrix exponentials
//! (`nalgebra`'s Padé `exp`), not through the banded operators, the
//! small-d recursion, or the closed-form CSS amplitudes used by the main
//! pipeline. It is the independent check for those routes.

use nalgebra::{DMatrix, DVector};

use crate::dissipation::dephased_echo_state;
use crate::echo::echo_state;
use crate::error::{ensure_atoms, Error, Result};
use crate::spin::{spin_of, Axis, CollectiveOperators, Moments, SpinState, C64};

/// Largest atom number accepted by [`oracle_check`].
pub const ORACLE_MAX_ATOMS: usize = 12;

/// Agreement required between the pipeline and the dense oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Dense S_x, S_y, S_z assembled directly from `S₊`.
#[derive(Clone, Debug)]
pub struct DenseSpin {
    n_atoms: usize,
    sx: DMatrix<C64>,
    sy: DMatrix<C64>,
    sz: DMatrix<C64>,
}

impl DenseSpin {
    pub fn new(n_atoms: usize) -> Self {
        let dim = n_atoms + 1;
        let s = spin_of(n_atoms);
        let mut sp = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        for k in 0..n_atoms {
            let m = k as f64 - s;
            sp[(k + 1, k)] = C64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
        let sm = sp.adjoint();
        let sx = (&sp + &sm).map(|c| c * 0.5);
        let sy = (&sp - &sm).map(|c| c * C64::new(0.0, -0.5));
        let sz = DMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                C64::new(r as f64 - s, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self { n_atoms, sx, sy, sz }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn op(&self, axis: Axis) -> &DMatrix<C64> {
        match axis {
            Axis::X => &self.sx,
            Axis::Y => &self.sy,
            Axis::Z => &self.sz,
        }
    }

    pub fn raising(&self) -> DMatrix<C64> {
        &self.sx + self.sy.map(|c| c * C64::new(0.0, 1.0))
    }

    /// `exp(-i t H)`
    pub fn propagator(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
        h.map(|c| c * C64::new(0.0, -t)).exp()
    }

    pub fn rotation(&self, axis: Axis, angle: f64) -> DMatrix<C64> {
        Self::propagator(self.op(axis), angle)
    }

    /// `exp(-i·sign·(Q/2S)·S_z²)` by dense exponentiation.
    pub fn twist(&self, q: f64, sign: f64) -> DMatrix<C64> {
        let sz2 = &self.sz * &self.sz;
        Self::propagator(&sz2, sign * q / (2.0 * spin_of(self.n_atoms)))
    }

    /// +x coherent state as `exp(-iπ/2 S_y)|S, S⟩`.
    pub fn css(&self) -> DVector<C64> {
        let dim = self.n_atoms + 1;
        let mut top = DVector::from_element(dim, C64::new(0.0, 0.0));
        top[dim - 1] = C64::new(1.0, 0.0);
        self.rotation(Axis::Y, std::f64::consts::FRAC_PI_2) * top
    }

    /// Twist, rotate about y by `phi`, untwist, starting from the +x CSS.
    pub fn echo_state(&self, q: f64, phi: f64) -> DVector<C64> {
        let u = self.twist(q, 1.0);
        let u_inv = self.twist(q, -1.0);
        u_inv * self.rotation(Axis::Y, phi) * u * self.css()
    }

    pub fn moments(&self, psi: &DVector<C64>, axis: Axis) -> Moments {
        let op = self.op(axis);
        let w = op * psi;
        let mean = psi.dotc(&w).re;
        let second = w.dotc(&w).re;
        Moments {
            mean,
            variance: second - mean * mean,
        }
    }

    pub fn moments_rho(&self, rho: &DMatrix<C64>, axis: Axis) -> Moments {
        let op = self.op(axis);
        let mean = (op * rho).trace().re;
        let second = (op * op * rho).trace().re;
        Moments {
            mean,
            variance: second - mean * mean,
        }
    }
}

/// One compared quantity in an [`OracleReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub quantity: String,
    pub pipeline: f64,
    pub oracle: f64,
}

impl OracleRow {
    pub fn abs_error(&self) -> f64 {
        (self.pipeline - self.oracle).abs()
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.abs_error() <= tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub n_atoms: usize,
    pub q: f64,
    pub phi: f64,
    pub tolerance: f64,
    pub rows: Vec<OracleRow>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed(self.tolerance))
    }

    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(OracleRow::abs_error).fold(0.0, f64::max)
    }
}

/// Compares the banded pipeline against dense exponentials: all spin moments
/// after the pure echo, after the density-matrix echo with zero dephasing,
/// and the twisted-frame identity `U†S₊U = S₊ exp(i(Q/2S)(2S_z+1))`.
pub fn oracle_check(n_atoms: usize, q: f64, phi: f64) -> Result<OracleReport> {
    ensure_atoms(n_atoms, 1)?;
    if n_atoms > ORACLE_MAX_ATOMS {
        return Err(Error::TooManyAtoms {
            got: n_atoms,
            max: ORACLE_MAX_ATOMS,
            context: "the dense oracle",
        });
    }
    let dense = DenseSpin::new(n_atoms);
    let psi_dense = dense.echo_state(q, phi);
    let rho_dense = &psi_dense * psi_dense.adjoint();

    let psi = echo_state(n_atoms, q, phi)?;
    let rho = dephased_echo_state(n_atoms, q, 0.0, phi, 32)?;

    let mut rows = Vec::new();
    for axis in Axis::ALL {
        let name = match axis {
            Axis::X => "Sx",
            Axis::Y => "Sy",
            Axis::Z => "Sz",
        };
        let want = dense.moments(&psi_dense, axis);
        let want_rho = dense.moments_rho(&rho_dense, axis);
        let got = psi.moments(axis);
        let got_rho = rho.moments(axis);
        rows.push(OracleRow {
            quantity: format!("pure mean {name}"),
            pipeline: got.mean,
            oracle: want.mean,
        });
        rows.push(OracleRow {
            quantity: format!("pure var {name}"),
            pipeline: got.variance,
            oracle: want.variance,
        });
        rows.push(OracleRow {
            quantity: format!("density mean {name}"),
            pipeline: got_rho.mean,
            oracle: want_rho.mean,
        });
        rows.push(OracleRow {
            quantity: format!("density var {name}"),
            pipeline: got_rho.variance,
            oracle: want_rho.variance,
        });
    }
    rows.push(OracleRow {
        quantity: "twisted-frame S+ identity residual".into(),
        pipeline: twisted_raising_residual(n_atoms, q),
        oracle: 0.0,
    });
    Ok(OracleReport {
        n_atoms,
        q,
        phi,
        tolerance: ORACLE_TOLERANCE,
        rows,
    })
}

/// Max-norm of `U†S₊U - S₊ exp(iθ(2S_z + 1))` with `U = exp(-iθS_z²)`,
/// `θ = Q/2S`, where the right side is built from the banded ladder elements.
pub fn twisted_raising_residual(n_atoms: usize, q: f64) -> f64 {
    let dense = DenseSpin::new(n_atoms);
    let u = dense.twist(q, 1.0);
    let lhs = u.adjoint() * dense.raising() * &u;
    let ops = CollectiveOperators::new(n_atoms);
    let theta = q / (2.0 * spin_of(n_atoms));
    let dim = n_atoms + 1;
    let rhs = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c + 1 {
            let m = ops.sz_diag()[c];
            ops.ladder()[c] * C64::from_polar(1.0, theta * (2.0 * m + 1.0))
        } else {
            C64::new(0.0, 0.0)
        }
    });
    (lhs - rhs).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::wigner_small_d;
    use crate::spin::make_css;
    use proptest::prelude::*;

    #[test]
    fn dense_css_matches_binomial_amplitudes() {
        for n in [1, 2, 5, 10] {
            let dense = DenseSpin::new(n).css();
            let css = make_css(n).unwrap();
            for (a, b) in dense.iter().zip(css.amplitudes()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn small_d_matches_dense_exponential_up_to_100() {
        for &(n, beta) in &[(4usize, 0.3), (7, 2.2), (30, 1.0), (60, 2.9), (100, 0.45), (100, 1.7), (101, -2.5)] {
            let d = wigner_small_d(n, beta).unwrap();
            let dense = DenseSpin::new(n).rotation(Axis::Y, beta);
            let mut worst = 0.0_f64;
            for r in 0..=n {
                for c in 0..=n {
                    worst = worst.max((dense[(r, c)] - C64::new(d.get(r, c), 0.0)).norm());
                }
            }
            assert!(worst < 1e-10, "N={n} beta={beta} err={worst:e}");
        }
    }

    #[test]
    fn x_and_z_rotations_match_dense() {
        let n = 4;
        let dense = DenseSpin::new(n);
        let s = make_css(n).unwrap().twisted(1.3, crate::spin::TwistSign::Forward).unwrap();
        let v = DVector::from_column_slice(s.amplitudes());
        for axis in Axis::ALL {
            let want = dense.rotation(axis, 0.77) * &v;
            let got = s.rotated(axis, 0.77).unwrap();
            for (a, b) in want.iter().zip(got.amplitudes()) {
                assert!((a - b).norm() < 1e-10, "{axis:?}");
            }
        }
    }

    #[test]
    fn y_rotation_matches_dense_at_small_n() {
        let n = 4;
        let s = make_css(n).unwrap().twisted(2.0, crate::spin::TwistSign::Forward).unwrap();
        let want = DenseSpin::new(n).rotation(Axis::Y, 0.3) * DVector::from_column_slice(s.amplitudes());
        let got = s.rotated(Axis::Y, 0.3).unwrap();
        for (a, b) in want.iter().zip(got.amplitudes()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn report_passes() {
        for n in [2, 3, 4] {
            let r = oracle_check(n, 1.3, 0.05).unwrap();
            assert!(r.passed(), "N={n} max err {:e}", r.max_error());
        }
        assert!(oracle_check(50, 1.0, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn twisted_frame_identity(n in 1usize..=6, q in 0.0f64..20.0) {
            prop_assert!(twisted_raising_residual(n, q) < 1e-10);
        }

        #[test]
        fn random_moments_match_dense(seed in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let n = 3;
            let amps: Vec<C64> = (0..=n).map(|k| C64::new(seed[2 * k], seed[2 * k + 1] + 0.05)).collect();
            let s = crate::spin::DickeState::normalized(n, amps).unwrap();
            let dense = DenseSpin::new(n);
            let v = DVector::from_column_slice(s.amplitudes());
            for axis in Axis::ALL {
                let a = s.moments(axis);
                let b = dense.moments(&v, axis);
                prop_assert!((a.mean - b.mean).abs() < 1e-12);
                prop_assert!((a.variance - b.variance).abs() < 1e-12);
            }
        }
    }
}
