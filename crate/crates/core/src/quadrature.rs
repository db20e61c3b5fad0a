//! Knot-aligned adaptive Gauss–Legendre quadrature.
//!
//! Every integral in the solver is split at the structural knots of its
//! integrand (sampled breakpoints, ramp ends, bump supports) so that the
//! integrand is smooth on each panel. Panels are then bisected adaptively,
//! comparing a panel's rule against the sum over its two halves.

use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::{FunctionSet, FunctionSpec};
use crate::phase::Phase;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureOptions {
    /// Absolute error target for the whole integral.
    pub abs_tol: f64,
    pub max_panel_depth: usize,
    /// Gauss–Legendre order used on every panel.
    pub nodes_per_panel: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_panel_depth: 30,
            nodes_per_panel: 15,
        }
    }
}

impl QuadratureOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid("quadrature abs_tol must be positive"));
        }
        if self.nodes_per_panel < 2 {
            return Err(Error::invalid("nodes_per_panel must be at least 2"));
        }
        Ok(())
    }

    /// Same options with the tolerance divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol / factor,
            ..*self
        }
    }
}

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Cached rule of the given order.
    pub fn cached(order: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature rule cache poisoned");
        guard
            .entry(order)
            .or_insert_with(|| Arc::new(GaussLegendre::new(order)))
            .clone()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Values the adaptive integrator can accumulate.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(&self) -> f64;
    fn to_complex(self) -> Complex64;
}

impl QuadValue for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl QuadValue for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Result of a vector-valued integration.
#[derive(Clone, Debug)]
pub struct Integral<T> {
    pub values: Vec<T>,
    pub error_bound: f64,
}

struct PanelRule<'a, T, F> {
    rule: &'a GaussLegendre,
    integrand: F,
    dim: usize,
    scratch: Vec<T>,
}

impl<T: QuadValue, F: FnMut(f64, &mut [T])> PanelRule<'_, T, F> {
    fn apply(&mut self, a: f64, b: f64) -> Vec<T> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = vec![T::default(); self.dim];
        for (x, w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            (self.integrand)(mid + half * x, &mut self.scratch);
            for (s, v) in acc.iter_mut().zip(&self.scratch) {
                *s = *s + *v * (w * half);
            }
        }
        acc
    }
}

/// Integrates a `dim`-component integrand over `[a, b]`, splitting first at
/// every knot strictly inside the interval.
pub fn integrate<T, F>(
    integrand: F,
    dim: usize,
    a: f64,
    b: f64,
    knots: &[f64],
    opts: &QuadratureOptions,
) -> Result<Integral<T>>
where
    T: QuadValue,
    F: FnMut(f64, &mut [T]),
{
    opts.validate()?;
    if !(a < b) {
        if a == b {
            return Ok(Integral {
                values: vec![T::default(); dim],
                error_bound: 0.0,
            });
        }
        return Err(Error::invalid(format!(
            "integration interval [{a}, {b}] is reversed"
        )));
    }
    let rule = GaussLegendre::cached(opts.nodes_per_panel);
    let mut panel = PanelRule {
        rule: &rule,
        integrand,
        dim,
        scratch: vec![T::default(); dim],
    };

    let mut edges = Vec::with_capacity(knots.len() + 2);
    edges.push(a);
    edges.extend(knots.iter().copied().filter(|&k| k > a && k < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (b - a));

    let total = b - a;
    let mut values = vec![T::default(); dim];
    let mut error_bound = 0.0;
    let mut converged = true;
    let mut stack: Vec<(f64, f64, Vec<T>, usize)> = Vec::new();

    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let whole = panel.apply(lo, hi);
        stack.push((lo, hi, whole, 0));
        while let Some((pa, pb, whole, depth)) = stack.pop() {
            let mid = 0.5 * (pa + pb);
            let left = panel.apply(pa, mid);
            let right = panel.apply(mid, pb);
            let mut err = 0.0f64;
            let mut size = 0.0f64;
            for i in 0..dim {
                let refined = left[i] + right[i];
                err = err.max((refined - whole[i]).magnitude());
                size = size.max(refined.magnitude());
            }
            let local_tol = (opts.abs_tol * (pb - pa) / total).max(8.0 * f64::EPSILON * size);
            if err <= local_tol || depth >= opts.max_panel_depth || mid <= pa || mid >= pb {
                if err > local_tol {
                    converged = false;
                }
                for i in 0..dim {
                    values[i] = values[i] + left[i] + right[i];
                }
                error_bound += err;
            } else {
                stack.push((mid, pb, right, depth + 1));
                stack.push((pa, mid, left, depth + 1));
            }
        }
    }

    if !converged {
        return Err(Error::Accuracy {
            estimate: values.into_iter().map(QuadValue::to_complex).collect(),
            error_bound,
        });
    }
    Ok(Integral {
        values,
        error_bound,
    })
}

pub(crate) fn merge_knots(mut knots: Vec<f64>) -> Vec<f64> {
    knots.retain(|k| k.is_finite());
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots
}

/// `∫_a^b f(x) e^{i g(x)} dx`, with `g ≡ 0` when no phase is given.
pub fn integrate_product(
    f: &FunctionSpec,
    phase: Option<&dyn Phase>,
    interval: [f64; 2],
    opts: &QuadratureOptions,
) -> Result<Complex64> {
    let [a, b] = interval;
    if !(a < b) {
        return Err(Error::invalid(format!(
            "interval [{a}, {b}] must satisfy a < b"
        )));
    }
    let mut knots = f.knots();
    if let Some(p) = phase {
        knots.extend(p.knots());
    }
    let knots = merge_knots(knots);
    let out = integrate(
        |x, out: &mut [Complex64]| {
            let g = phase.map_or(0.0, |p| p.value(x));
            out[0] = Complex64::from_polar(f.value(x), g);
        },
        1,
        a,
        b,
        &knots,
        opts,
    )?;
    Ok(out.values[0])
}

/// Residuals `∫ f_j e^{i g}` over the set's domain, one per function.
pub fn residual_vector(
    fset: &FunctionSet,
    phase: Option<&dyn Phase>,
    opts: &QuadratureOptions,
) -> Result<Vec<Complex64>> {
    let [a, b] = fset.domain();
    let mut knots = fset.knots();
    if let Some(p) = phase {
        knots.extend(p.knots());
    }
    let knots = merge_knots(knots);
    let entries = fset.entries();
    let out = integrate(
        |x, out: &mut [Complex64]| {
            let g = phase.map_or(0.0, |p| p.value(x));
            let e = Complex64::from_polar(1.0, g);
            for (o, f) in out.iter_mut().zip(entries) {
                *o = e * f.value(x);
            }
        },
        entries.len(),
        a,
        b,
        &knots,
        opts,
    )?;
    Ok(out.values)
}

/// `∫_a^b |f|`, used for scale-aware tolerances.
pub fn l1_norm(f: &FunctionSpec, interval: [f64; 2], opts: &QuadratureOptions) -> Result<f64> {
    let [a, b] = interval;
    let knots = merge_knots(f.knots());
    let out = integrate(
        |x, out: &mut [f64]| out[0] = f.value(x).abs(),
        1,
        a,
        b,
        &knots,
        opts,
    )?;
    Ok(out.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::StepPhase;
    use std::f64::consts::PI;

    struct LinearPhase;
    impl Phase for LinearPhase {
        fn value(&self, x: f64) -> f64 {
            2.0 * PI * x
        }
        fn knots(&self) -> Vec<f64> {
            Vec::new()
        }
    }

    fn constant() -> FunctionSpec {
        FunctionSpec::polynomial(vec![1.0])
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(7);
        // exact through degree 13
        let s: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(12))
            .sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        let wsum: f64 = rule.weights.iter().sum();
        assert!((wsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_without_phase() {
        let v = integrate_product(&constant(), None, [0.0, 1.0], &Default::default()).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn step_phase_cancels() {
        let step = StepPhase::new(vec![0.0, 0.5, 1.0], vec![PI, 0.0]).unwrap();
        let v =
            integrate_product(&constant(), Some(&step), [0.0, 1.0], &Default::default()).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn full_turn_phase_cancels() {
        let v = integrate_product(
            &constant(),
            Some(&LinearPhase),
            [0.0, 1.0],
            &Default::default(),
        )
        .unwrap();
        assert!(v.norm() < 1e-12, "{v}");
    }

    #[test]
    fn residuals_of_simple_families() {
        let odd = FunctionSet::unit(vec![FunctionSpec::polynomial(vec![-0.5, 1.0])]).unwrap();
        let r = residual_vector(&odd, None, &Default::default()).unwrap();
        assert!(r[0].norm() < 1e-15);

        let pair =
            FunctionSet::unit(vec![constant(), FunctionSpec::polynomial(vec![0.0, 1.0])]).unwrap();
        let r = residual_vector(&pair, None, &Default::default()).unwrap();
        assert!((r[0].re - 1.0).abs() < 1e-14 && (r[1].re - 0.5).abs() < 1e-14);

        let step = StepPhase::new(vec![0.0, 0.5, 1.0], vec![PI, 0.0]).unwrap();
        let one = FunctionSet::unit(vec![constant()]).unwrap();
        let r = residual_vector(&one, Some(&step), &Default::default()).unwrap();
        assert!(r[0].norm() < 1e-15);
    }

    #[test]
    fn depth_limit_reports_accuracy_error() {
        let opts = QuadratureOptions {
            abs_tol: 1e-300,
            max_panel_depth: 2,
            nodes_per_panel: 3,
        };
        let err = integrate(
            |x: f64, out: &mut [f64]| out[0] = (50.0 * x).sin(),
            1,
            0.0,
            1.0,
            &[],
            &opts,
        )
        .unwrap_err();
        match err {
            Error::Accuracy {
                estimate,
                error_bound,
            } => {
                assert_eq!(estimate.len(), 1);
                assert!(error_bound > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reversed_interval_is_rejected() {
        assert!(integrate_product(&constant(), None, [0.5, 0.2], &Default::default()).is_err());
    }
}
