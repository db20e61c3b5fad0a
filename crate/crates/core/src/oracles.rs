//! Deliberately naive reference computations for cross-checking the solver.
//! Nothing here goes through the adaptive quadrature.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::func::FunctionSet;
use crate::phase::Phase;

pub use crate::partition::brute_force_partition;

/// Midpoint-rule residuals `∫ f_j e^{i g}` with `points` uniform cells.
pub fn riemann_residual(
    fset: &FunctionSet,
    phase: Option<&dyn Phase>,
    points: usize,
) -> Result<Vec<Complex64>> {
    if points < 10_000 {
        return Err(Error::invalid(
            "riemann_residual needs at least 10^4 points",
        ));
    }
    let [a, b] = fset.domain();
    let h = (b - a) / points as f64;
    let mut sums = vec![Complex64::new(0.0, 0.0); fset.len()];
    for i in 0..points {
        let x = a + h * (i as f64 + 0.5);
        let g = phase.map_or(0.0, |p| p.value(x));
        let e = Complex64::new(g.cos(), g.sin());
        for (s, f) in sums.iter_mut().zip(fset.entries()) {
            *s += e * f.value(x);
        }
    }
    Ok(sums.into_iter().map(|s| s * h).collect())
}

/// Central differences `(Q(u + h e_k) - Q(u - h e_k)) / 2h`, column by column.
pub fn fd_jacobian<F>(mut q: F, u: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let m = u.len();
    let mut cols = Vec::with_capacity(m);
    let mut rows = None;
    let mut point = u.to_vec();
    for k in 0..m {
        point[k] = u[k] + h;
        let plus = q(&point)?;
        point[k] = u[k] - h;
        let minus = q(&point)?;
        point[k] = u[k];
        if *rows.get_or_insert(plus.len()) != plus.len() || plus.len() != minus.len() {
            return Err(Error::invalid("Q changed its output length"));
        }
        cols.push(
            plus.iter()
                .zip(&minus)
                .map(|(p, q)| (p - q) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    let rows = match rows {
        Some(r) => r,
        None => q(u)?.len(),
    };
    Ok(DMatrix::from_fn(rows, m, |j, k| cols[k][j]))
}
