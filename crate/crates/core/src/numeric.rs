//! Small scalar minimizers used by the optimal-parameter searches.

use crate::error::{Error, Result};
use crate::grid::{linspace, logspace};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Returns `(x, f(x))`. The bracket is assumed to contain a single minimum.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            let x = 0.5 * (a + b);
            let fx = f(x);
            let best = [(x, fx), (c, fc), (d, fd)]
                .into_iter()
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            return Ok(best);
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    Err(Error::NoConvergence(max_iter))
}

/// Coarse scan followed by golden-section refinement around the best scan point.
///
/// With `log = true` the scan and refinement happen in `ln x`, which suits
/// parameters spanning decades (twisting strength, detuning).
pub fn minimize_bracketed<F>(mut f: F, lo: f64, hi: f64, scan_points: usize, log: bool) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let xs = if log {
        logspace(lo, hi, scan_points)
    } else {
        linspace(lo, hi, scan_points)
    };
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let (best, _) = vals
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|p, q| p.1.total_cmp(q.1))
        .ok_or(Error::NoConvergence(0))?;
    let left = xs[best.saturating_sub(1)];
    let right = xs[(best + 1).min(xs.len() - 1)];
    if log {
        let (x, fx) = golden_section(|u| f(u.exp()), left.ln(), right.ln(), 1e-12, 200)?;
        Ok((x.exp(), fx))
    } else {
        golden_section(f, left, right, 1e-12, 200)
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn power_law_exponent(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Inconsistent(format!(
            "power-law fit needs two or more paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Inconsistent("power-law fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Inconsistent("power-law fit needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| (x - 1.3).powi(2) + 2.0, -5.0, 5.0, 1e-12, 200).unwrap();
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_power_law() {
        let x = [1.0, 10.0, 100.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.75)).collect();
        assert!((power_law_exponent(&x, &y).unwrap() + 0.75).abs() < 1e-12);
        assert!(power_law_exponent(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn log_bracketed_minimum() {
        // e^{x^2/2S}/x^2 has its minimum at x = sqrt(2S).
        let s = 500.0;
        let (x, _) =
            minimize_bracketed(|q: f64| (q * q / (2.0 * s)).exp() / (q * q), 0.1, 1000.0, 64, true).unwrap();
        assert!((x - (2.0 * s).sqrt()).abs() < 1e-5);
    }
}
