//! Input functions, their Gram matrices, and the scan for the dependence
//! bounds `L` and `R` that decide between the split-and-correct construction
//! and recursion.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{Phase, SmoothPhase};
use crate::quadrature::{integrate, merge_knots, QuadratureOptions};

/// A real function on `[0, 1]`.
///
/// The first four kinds are closed forms that appear in problem files. The
/// remaining kinds are combinators the solver builds internally: affine
/// pullbacks for recursion on subintervals, and products with `cos g` /
/// `sin g` for orthogonalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    /// `Σ coeffs[k] x^k`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `constant + Σ_k a_k cos(2πkx) + b_k sin(2πkx)`, `terms[k-1] = [a_k, b_k]`.
    Trigonometric {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        terms: Vec<[f64; 2]>,
    },
    /// Piecewise-linear interpolation through `(xs, ys)`.
    Sampled {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
    /// `exp(-(x - center)^2 / (2 width^2)) · Σ coeffs[k] x^k`.
    GaussianPolynomial {
        center: f64,
        width: f64,
        coeffs: Vec<f64>,
    },
    /// `inner(offset + scale · x)`.
    Affine {
        inner: Box<FunctionSpec>,
        offset: f64,
        scale: f64,
    },
    Sum {
        terms: Vec<FunctionSpec>,
    },
    Product {
        factors: Vec<FunctionSpec>,
    },
    Scaled {
        factor: f64,
        inner: Box<FunctionSpec>,
    },
    /// `cos(g(x))`.
    PhaseCos {
        phase: Box<SmoothPhase>,
    },
    /// `sin(g(x))`.
    PhaseSin {
        phase: Box<SmoothPhase>,
    },
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl FunctionSpec {
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        FunctionSpec::Polynomial { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        FunctionSpec::Polynomial { coeffs: vec![c] }
    }

    pub fn trigonometric(constant: f64, terms: Vec<[f64; 2]>) -> Self {
        FunctionSpec::Trigonometric { constant, terms }
    }

    pub fn sampled(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let f = FunctionSpec::Sampled { xs, ys };
        f.validate()?;
        Ok(f)
    }

    pub fn gaussian_polynomial(center: f64, width: f64, coeffs: Vec<f64>) -> Self {
        FunctionSpec::GaussianPolynomial {
            center,
            width,
            coeffs,
        }
    }

    /// `self(a + (b - a) x)`: the restriction to `[a, b]` rescaled to `[0, 1]`.
    pub fn pullback(&self, a: f64, b: f64) -> Self {
        FunctionSpec::Affine {
            inner: Box::new(self.clone()),
            offset: a,
            scale: b - a,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        FunctionSpec::Scaled {
            factor,
            inner: Box::new(self),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionSpec::Polynomial { coeffs } => finite(coeffs, "polynomial coefficient"),
            FunctionSpec::Trigonometric { constant, terms } => {
                finite(&[*constant], "trigonometric constant")?;
                finite(&terms.concat(), "trigonometric coefficient")
            }
            FunctionSpec::Sampled { xs, ys } => {
                if xs.len() != ys.len() {
                    return Err(Error::invalid("sampled xs and ys differ in length"));
                }
                if xs.len() < 2 {
                    return Err(Error::invalid("sampled function needs at least two points"));
                }
                finite(xs, "sample abscissa")?;
                finite(ys, "sample value")?;
                if xs[0] != 0.0 || xs[xs.len() - 1] != 1.0 {
                    return Err(Error::invalid("sampled xs must start at 0 and end at 1"));
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("sampled xs must be strictly increasing"));
                }
                Ok(())
            }
            FunctionSpec::GaussianPolynomial {
                center,
                width,
                coeffs,
            } => {
                finite(&[*center], "gaussian center")?;
                if !(*width > 0.0) || !width.is_finite() {
                    return Err(Error::invalid("gaussian width must be positive"));
                }
                finite(coeffs, "polynomial coefficient")
            }
            FunctionSpec::Affine {
                inner,
                offset,
                scale,
            } => {
                let hi = offset + scale;
                if !(*scale > 0.0) || *offset < -1e-12 || hi > 1.0 + 1e-12 {
                    return Err(Error::invalid("affine pullback must map [0,1] into [0,1]"));
                }
                inner.validate()
            }
            FunctionSpec::Sum { terms } => terms.iter().try_for_each(FunctionSpec::validate),
            FunctionSpec::Product { factors } => {
                factors.iter().try_for_each(FunctionSpec::validate)
            }
            FunctionSpec::Scaled { factor, inner } => {
                finite(&[*factor], "scale factor")?;
                inner.validate()
            }
            FunctionSpec::PhaseCos { .. } | FunctionSpec::PhaseSin { .. } => Ok(()),
        }
    }

    /// Unchecked evaluation; callers keep `x` in `[0, 1]`.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            FunctionSpec::Polynomial { coeffs } => horner(coeffs, x),
            FunctionSpec::Trigonometric { constant, terms } => {
                let mut acc = *constant;
                for (k, [a, b]) in terms.iter().enumerate() {
                    let w = 2.0 * PI * (k + 1) as f64 * x;
                    acc += a * w.cos() + b * w.sin();
                }
                acc
            }
            FunctionSpec::Sampled { xs, ys } => {
                let i = xs.partition_point(|&t| t <= x);
                if i == 0 {
                    return ys[0];
                }
                if i >= xs.len() {
                    return ys[ys.len() - 1];
                }
                let (x0, x1) = (xs[i - 1], xs[i]);
                let t = (x - x0) / (x1 - x0);
                ys[i - 1] + t * (ys[i] - ys[i - 1])
            }
            FunctionSpec::GaussianPolynomial {
                center,
                width,
                coeffs,
            } => {
                let z = (x - center) / width;
                (-0.5 * z * z).exp() * horner(coeffs, x)
            }
            FunctionSpec::Affine {
                inner,
                offset,
                scale,
            } => inner.value((offset + scale * x).clamp(0.0, 1.0)),
            FunctionSpec::Sum { terms } => terms.iter().map(|t| t.value(x)).sum(),
            FunctionSpec::Product { factors } => factors.iter().map(|t| t.value(x)).product(),
            FunctionSpec::Scaled { factor, inner } => factor * inner.value(x),
            FunctionSpec::PhaseCos { phase } => phase.value(x).cos(),
            FunctionSpec::PhaseSin { phase } => phase.value(x).sin(),
        }
    }

    /// Points in `[0, 1]` where the function may fail to be smooth.
    pub fn knots(&self) -> Vec<f64> {
        match self {
            FunctionSpec::Polynomial { .. }
            | FunctionSpec::Trigonometric { .. }
            | FunctionSpec::GaussianPolynomial { .. } => Vec::new(),
            FunctionSpec::Sampled { xs, .. } => xs.clone(),
            FunctionSpec::Affine {
                inner,
                offset,
                scale,
            } => inner
                .knots()
                .into_iter()
                .map(|k| (k - offset) / scale)
                .filter(|k| (0.0..=1.0).contains(k))
                .collect(),
            FunctionSpec::Sum { terms: parts } | FunctionSpec::Product { factors: parts } => {
                merge_knots(parts.iter().flat_map(FunctionSpec::knots).collect())
            }
            FunctionSpec::Scaled { inner, .. } => inner.knots(),
            FunctionSpec::PhaseCos { phase } | FunctionSpec::PhaseSin { phase } => {
                crate::phase::Phase::knots(phase.as_ref())
            }
        }
    }
}

fn finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be finite")))
    }
}

/// Checked evaluation of `spec` at `x ∈ [0, 1]`.
pub fn eval_function(spec: &FunctionSpec, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(spec.value(x))
}

/// `n ≥ 1` functions considered on a closed interval `[a, b] ⊆ [0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSet {
    entries: Vec<FunctionSpec>,
    domain: [f64; 2],
}

impl FunctionSet {
    pub fn new(entries: Vec<FunctionSpec>, domain: [f64; 2]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("a function set needs at least one function"));
        }
        let [a, b] = domain;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::invalid(format!(
                "domain [{a}, {b}] is not inside [0, 1]"
            )));
        }
        for f in &entries {
            f.validate()?;
        }
        Ok(Self { entries, domain })
    }

    /// A set on the whole unit interval.
    pub fn unit(entries: Vec<FunctionSpec>) -> Result<Self> {
        Self::new(entries, [0.0, 1.0])
    }

    pub fn entries(&self) -> &[FunctionSpec] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    /// Same functions, considered on `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(self.entries.clone(), [a, b])
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.entries[i].clone()).collect(),
            self.domain,
        )
    }

    /// Union of the members' knots, restricted to the domain.
    pub fn knots(&self) -> Vec<f64> {
        let [a, b] = self.domain;
        let mut k: Vec<f64> = self.entries.iter().flat_map(FunctionSpec::knots).collect();
        k.retain(|&x| x >= a && x <= b);
        merge_knots(k)
    }

    /// `∫_domain |f_j|` for every member.
    pub fn l1_norms(&self, quad: &QuadratureOptions) -> Result<Vec<f64>> {
        let [a, b] = self.domain;
        let n = self.len();
        let out = integrate(
            |x, out: &mut [f64]| {
                for (o, f) in out.iter_mut().zip(&self.entries) {
                    *o = f.value(x).abs();
                }
            },
            n,
            a,
            b,
            &self.knots(),
            quad,
        )?;
        Ok(out.values)
    }
}

fn gram_on(
    fset: &FunctionSet,
    a: f64,
    b: f64,
    knots: &[f64],
    quad: &QuadratureOptions,
) -> Result<DMatrix<f64>> {
    let n = fset.len();
    if a >= b {
        return Ok(DMatrix::zeros(n, n));
    }
    let pairs = n * (n + 1) / 2;
    let mut vals = vec![0.0; n];
    let out = integrate(
        |x, out: &mut [f64]| {
            for (v, f) in vals.iter_mut().zip(fset.entries()) {
                *v = f.value(x);
            }
            let mut idx = 0;
            for j in 0..n {
                for k in j..n {
                    out[idx] = vals[j] * vals[k];
                    idx += 1;
                }
            }
        },
        pairs,
        a,
        b,
        knots,
        quad,
    )?;
    let mut m = DMatrix::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for k in j..n {
            m[(j, k)] = out.values[idx];
            m[(k, j)] = out.values[idx];
            idx += 1;
        }
    }
    Ok(m)
}

/// `G_jk = ∫_a^b f_j f_k`, symmetric by construction.
pub fn gram_matrix(
    fset: &FunctionSet,
    interval: [f64; 2],
    quad: &QuadratureOptions,
) -> Result<DMatrix<f64>> {
    let [a, b] = interval;
    if !(a < b) {
        return Err(Error::invalid(format!(
            "gram interval [{a}, {b}] must satisfy a < b"
        )));
    }
    gram_on(fset, a, b, &fset.knots(), quad)
}

/// Numerical rank of a symmetric positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RankInfo {
    pub rank: usize,
    /// Unit eigenvector of the smallest eigenvalue, when rank-deficient.
    pub kernel: Option<DVector<f64>>,
    /// `λ_min / λ_max`; compare against the threshold to judge the margin.
    pub eigen_ratio: f64,
}

pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> RankInfo {
    let n = m.nrows();
    if n == 0 {
        return RankInfo {
            rank: 0,
            kernel: None,
            eigen_ratio: 0.0,
        };
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lmax = eig.eigenvalues.max();
    let (imin, lmin) = eig.eigenvalues.argmin();
    if !(lmax > 0.0) {
        let mut v = DVector::zeros(n);
        v[0] = 1.0;
        return RankInfo {
            rank: 0,
            kernel: Some(v),
            eigen_ratio: 0.0,
        };
    }
    let rank = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > rel_tol * lmax)
        .count();
    let kernel = (rank < n).then(|| canonical_sign(eig.eigenvectors.column(imin).into_owned()));
    RankInfo {
        rank,
        kernel,
        eigen_ratio: lmin / lmax,
    }
}

/// Flip `v` so that its first non-negligible entry is positive.
fn canonical_sign(v: DVector<f64>) -> DVector<f64> {
    let v = v.normalize();
    match v.iter().find(|c| c.abs() > 1e-12) {
        Some(&c) if c < 0.0 => -v,
        _ => v,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceBounds {
    /// Right end of the longest initial interval `[a, L]` on which the family
    /// is dependent (`a` when there is none).
    pub left: f64,
    /// Left end of the longest final interval `[R, b]` on which it is dependent.
    pub right: f64,
    /// Coefficients with `Σ a_j f_j ≈ 0` on `[a, L]`, empty when `L = a`.
    pub left_kernel: Vec<f64>,
    pub right_kernel: Vec<f64>,
}

impl DependenceBounds {
    /// `L < R`: independent on both sides of any `p ∈ (L, R)`.
    pub fn is_split_case(&self) -> bool {
        self.left < self.right
    }
}

/// Rank test with every function normalized by its norm on the whole domain,
/// so that wildly different amplitudes do not masquerade as dependence.
struct ScaledRank {
    scale: Vec<f64>,
    rel_tol: f64,
}

impl ScaledRank {
    fn new(full_gram: &DMatrix<f64>, rel_tol: f64) -> Self {
        let scale = full_gram
            .diagonal()
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        Self { scale, rel_tol }
    }

    fn scaled(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let n = g.nrows();
        DMatrix::from_fn(n, n, |j, k| g[(j, k)] * self.scale[j] * self.scale[k])
    }

    fn rank(&self, g: &DMatrix<f64>) -> RankInfo {
        let mut info = numerical_rank(&self.scaled(g), self.rel_tol);
        if let Some(v) = info.kernel.take() {
            let raw = DVector::from_iterator(
                v.len(),
                v.iter()
                    .zip(&self.scale)
                    .map(|(c, s)| if *s > 0.0 { c * s } else { *c }),
            );
            info.kernel = Some(canonical_sign(raw));
        }
        info
    }

    fn deficient(&self, g: &DMatrix<f64>) -> bool {
        self.rank(g).rank < g.nrows()
    }
}

/// Effective rank of the set on its domain, with the scaled criterion used
/// throughout the solver.
pub fn effective_rank(
    fset: &FunctionSet,
    rel_tol: f64,
    quad: &QuadratureOptions,
) -> Result<RankInfo> {
    let [a, b] = fset.domain();
    let g = gram_matrix(fset, [a, b], quad)?;
    Ok(ScaledRank::new(&g, rel_tol).rank(&g))
}

/// Greedy maximal independent subset (in index order) on `[a, b]`.
pub fn independent_subset(
    fset: &FunctionSet,
    interval: [f64; 2],
    rel_tol: f64,
    quad: &QuadratureOptions,
) -> Result<Vec<usize>> {
    let g = gram_matrix(fset, interval, quad)?;
    let test = ScaledRank::new(&g, rel_tol);
    let scaled = test.scaled(&g);
    let mut chosen: Vec<usize> = Vec::new();
    for j in 0..fset.len() {
        let mut trial = chosen.clone();
        trial.push(j);
        let sub = DMatrix::from_fn(trial.len(), trial.len(), |r, c| {
            scaled[(trial[r], trial[c])]
        });
        if numerical_rank(&sub, rel_tol).rank == trial.len() {
            chosen = trial;
        }
    }
    Ok(chosen)
}

/// Scans for the dependence bounds `L` and `R` on a uniform grid of
/// `scan_points` points, then refines each by bisection to `1e-6`.
pub fn dependence_bounds(
    fset: &FunctionSet,
    scan_points: usize,
    rel_tol: f64,
    quad: &QuadratureOptions,
) -> Result<DependenceBounds> {
    if scan_points < 3 {
        return Err(Error::invalid("scan_points must be at least 3"));
    }
    let [a, b] = fset.domain();
    let n = fset.len();
    let knots = fset.knots();
    let h = (b - a) / (scan_points - 1) as f64;
    let grid: Vec<f64> = (0..scan_points).map(|i| a + h * i as f64).collect();

    let cells = grid
        .windows(2)
        .map(|w| gram_on(fset, w[0], w[1], &knots, quad))
        .collect::<Result<Vec<_>>>()?;
    let mut prefix = Vec::with_capacity(scan_points);
    prefix.push(DMatrix::zeros(n, n));
    for c in &cells {
        let next = prefix.last().unwrap() + c;
        prefix.push(next);
    }
    let full = prefix.last().unwrap().clone();
    let test = ScaledRank::new(&full, rel_tol);

    let mut suffix = vec![DMatrix::zeros(n, n); scan_points];
    for i in (0..scan_points - 1).rev() {
        suffix[i] = &suffix[i + 1] + &cells[i];
    }

    const REFINE: f64 = 1e-6;

    // Left bound: largest grid point x with [a, x] deficient.
    let last_left = (1..scan_points).rev().find(|&i| test.deficient(&prefix[i]));
    let (left, left_kernel) = match last_left {
        None => (a, Vec::new()),
        Some(i) => {
            let mut lo = grid[i];
            let mut lo_gram = prefix[i].clone();
            if i + 1 < scan_points {
                let mut hi = grid[i + 1];
                while hi - lo > REFINE {
                    let mid = 0.5 * (lo + hi);
                    let g = &prefix[i] + gram_on(fset, grid[i], mid, &knots, quad)?;
                    if test.deficient(&g) {
                        lo = mid;
                        lo_gram = g;
                    } else {
                        hi = mid;
                    }
                }
            }
            let k = test
                .rank(&lo_gram)
                .kernel
                .map(|v| v.iter().copied().collect())
                .unwrap_or_default();
            (lo, k)
        }
    };

    // Right bound: smallest grid point x with [x, b] deficient.
    let first_right = (0..scan_points - 1).find(|&i| test.deficient(&suffix[i]));
    let (right, right_kernel) = match first_right {
        None => (b, Vec::new()),
        Some(i) => {
            let mut hi = grid[i];
            let mut hi_gram = suffix[i].clone();
            if i > 0 {
                let mut lo = grid[i - 1];
                while hi - lo > REFINE {
                    let mid = 0.5 * (lo + hi);
                    let g = &suffix[i] + gram_on(fset, mid, grid[i], &knots, quad)?;
                    if test.deficient(&g) {
                        hi = mid;
                        hi_gram = g;
                    } else {
                        lo = mid;
                    }
                }
            }
            let k = test
                .rank(&hi_gram)
                .kernel
                .map(|v| v.iter().copied().collect())
                .unwrap_or_default();
            (hi, k)
        }
    };

    Ok(DependenceBounds {
        left,
        right,
        left_kernel,
        right_kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> FunctionSpec {
        FunctionSpec::polynomial(vec![0.0, 1.0])
    }

    /// 1 on [0, 0.45], linear taper to 0 at 0.5, zero after.
    pub(crate) fn left_taper() -> FunctionSpec {
        FunctionSpec::sampled(vec![0.0, 0.45, 0.5, 1.0], vec![1.0, 1.0, 0.0, 0.0]).unwrap()
    }

    pub(crate) fn right_taper() -> FunctionSpec {
        FunctionSpec::sampled(vec![0.0, 0.5, 0.55, 1.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(eval_function(&x(), 0.5).unwrap(), 0.5);
        let s = FunctionSpec::sampled(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(eval_function(&s, 0.25).unwrap(), 0.5);
        let t = FunctionSpec::trigonometric(1.0, vec![]);
        assert_eq!(eval_function(&t, 0.7).unwrap(), 1.0);
        assert!(matches!(
            eval_function(&x(), 1.5),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            eval_function(&x(), -0.1),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn trigonometric_terms_use_integer_frequencies() {
        let t = FunctionSpec::trigonometric(0.5, vec![[1.0, 0.0], [0.0, 2.0]]);
        let x0: f64 = 0.1;
        let expected = 0.5 + (2.0 * PI * x0).cos() + 2.0 * (4.0 * PI * x0).sin();
        assert!((t.value(x0) - expected).abs() < 1e-15);
    }

    #[test]
    fn sampled_invariants_are_enforced() {
        assert!(FunctionSpec::sampled(vec![0.0, 0.5], vec![1.0, 1.0]).is_err());
        assert!(FunctionSpec::sampled(vec![0.0, 0.6, 0.6, 1.0], vec![1.0; 4]).is_err());
        assert!(FunctionSpec::sampled(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(FunctionSpec::sampled(vec![0.0], vec![1.0]).is_err());
        assert!(FunctionSet::unit(vec![]).is_err());
    }

    #[test]
    fn gram_examples() {
        let q = QuadratureOptions::default();
        let pair = FunctionSet::unit(vec![FunctionSpec::constant(1.0), x()]).unwrap();
        let g = gram_matrix(&pair, [0.0, 1.0], &q).unwrap();
        let expected = [[1.0, 0.5], [0.5, 1.0 / 3.0]];
        for j in 0..2 {
            for k in 0..2 {
                assert!((g[(j, k)] - expected[j][k]).abs() < 1e-14);
            }
        }
        let one = FunctionSet::unit(vec![FunctionSpec::constant(1.0)]).unwrap();
        assert!((gram_matrix(&one, [0.0, 1.0], &q).unwrap()[(0, 0)] - 1.0).abs() < 1e-14);
        let dup = FunctionSet::unit(vec![FunctionSpec::constant(1.0); 2]).unwrap();
        let g = gram_matrix(&dup, [0.0, 1.0], &q).unwrap();
        assert!(g.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn rank_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let info = numerical_rank(&m, 1e-8);
        assert_eq!(info.rank, 1);
        let k = info.kernel.unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((k[0] - s).abs() < 1e-12 && (k[1] + s).abs() < 1e-12);

        assert_eq!(numerical_rank(&DMatrix::identity(3, 3), 1e-8).rank, 3);
        let hilbert = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0 / 3.0]);
        let info = numerical_rank(&hilbert, 1e-8);
        assert_eq!(info.rank, 2);
        assert!(info.kernel.is_none());
        assert_eq!(numerical_rank(&DMatrix::zeros(0, 0), 1e-8).rank, 0);
    }

    #[test]
    fn bounds_for_independent_pair() {
        let pair = FunctionSet::unit(vec![FunctionSpec::constant(1.0), x()]).unwrap();
        let b = dependence_bounds(&pair, 256, 1e-8, &Default::default()).unwrap();
        assert_eq!(b.left, 0.0);
        assert_eq!(b.right, 1.0);
        assert!(b.is_split_case());
        assert!(b.left_kernel.is_empty() && b.right_kernel.is_empty());

        let one = FunctionSet::unit(vec![FunctionSpec::constant(1.0)]).unwrap();
        let b = dependence_bounds(&one, 256, 1e-8, &Default::default()).unwrap();
        assert_eq!((b.left, b.right), (0.0, 1.0));
    }

    #[test]
    fn bounds_for_disjoint_supports_meet_in_the_middle() {
        let fset = FunctionSet::unit(vec![left_taper(), right_taper()]).unwrap();
        let q = QuadratureOptions::default();
        let b = dependence_bounds(&fset, 256, 1e-8, &q).unwrap();
        assert!(!b.is_split_case(), "{b:?}");
        assert!(
            (b.left - 0.5).abs() < 2e-3 && (b.right - 0.5).abs() < 2e-3,
            "{b:?}"
        );
        assert!((0.5 * (b.left + b.right) - 0.5).abs() < 1e-5);
        // left kernel certifies dependence on [0, L]: it kills the first function
        assert!(b.left_kernel[0].abs() < 1e-3 && b.left_kernel[1].abs() > 0.99);
        let g = gram_matrix(&fset, [0.0, b.left], &q).unwrap();
        let a = DVector::from_vec(b.left_kernel.clone());
        let residual = (a.transpose() * &g * &a)[(0, 0)];
        assert!(residual < 1e-8 * g.diagonal().max(), "residual {residual}");
    }

    #[test]
    fn monotone_rank_on_growing_prefixes() {
        let fset = FunctionSet::unit(vec![
            FunctionSpec::constant(1.0),
            x(),
            FunctionSpec::polynomial(vec![0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let q = QuadratureOptions::default();
        let full = gram_matrix(&fset, [0.0, 1.0], &q).unwrap();
        let test = ScaledRank::new(&full, 1e-8);
        let mut prev = 0;
        for i in 1..=64 {
            let x0 = i as f64 / 64.0;
            let r = test.rank(&gram_matrix(&fset, [0.0, x0], &q).unwrap()).rank;
            assert!(r >= prev, "rank dropped at {x0}");
            prev = r;
        }
    }

    #[test]
    fn subset_extraction_skips_dependent_members() {
        let fset = FunctionSet::unit(vec![
            FunctionSpec::constant(1.0),
            FunctionSpec::constant(2.0),
            x(),
        ])
        .unwrap();
        let s = independent_subset(&fset, [0.0, 1.0], 1e-8, &Default::default()).unwrap();
        assert_eq!(s, vec![0, 2]);
    }

    #[test]
    fn affine_pullback_rescales() {
        let f = x().pullback(0.5, 1.0);
        assert!((f.value(0.0) - 0.5).abs() < 1e-15);
        assert!((f.value(1.0) - 1.0).abs() < 1e-15);
        let s = left_taper().pullback(0.0, 0.5);
        assert_eq!(s.knots(), vec![0.0, 0.9, 1.0]);
    }
}
