//! Problems on the real line (and on `R^N` through marginals), moved to
//! `[0, 1]` by the logistic map `t = 1 / (1 + e^{-x})`.
//!
//! For `f ∈ L¹(R)` the transformed function `f(x(t)) / (t (1 - t))`, with
//! `x(t) = ln(t / (1 - t))`, has the same integral against any phase `g` as
//! `f` has against `g ∘ t`. Note `1 / (t (1 - t)) = e^x + 2 + e^{-x}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::FunctionSpec;
use crate::jet::bump_profile_value;
use crate::phase::{Phase, SmoothPhase};
use crate::quadrature::{integrate, merge_knots, QuadratureOptions};

/// Fraction of the total mass allowed outside a function's significant range.
pub const TAIL_MASS: f64 = 1e-12;

/// Logistic coordinates beyond this are indistinguishable from 0 or 1.
const MAX_ABS_X: f64 = 30.0;

pub const DEFAULT_SAMPLES: usize = 16385;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RealLineFunction {
    /// `exp(-(x - center)^2 / (2 width^2)) · Σ coeffs[k] x^k`.
    GaussianPolynomial {
        center: f64,
        width: f64,
        coeffs: Vec<f64>,
    },
    /// `amplitude · exp(-1 / (1 - s^2))`, `s = (x - center) / half_width`,
    /// zero for `|s| ≥ 1`.
    SmoothBump {
        center: f64,
        half_width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Piecewise-linear through `(xs, ys)`, zero outside `[xs[0], xs[last]]`.
    Sampled { xs: Vec<f64>, ys: Vec<f64> },
    Scaled {
        factor: f64,
        inner: Box<RealLineFunction>,
    },
}

fn one() -> f64 {
    1.0
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = (x - x0) / (x1 - x0);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

impl RealLineFunction {
    pub fn gaussian(center: f64, width: f64) -> Self {
        Self::gaussian_polynomial(center, width, vec![1.0])
    }

    pub fn gaussian_polynomial(center: f64, width: f64, coeffs: Vec<f64>) -> Self {
        RealLineFunction::GaussianPolynomial {
            center,
            width,
            coeffs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            RealLineFunction::GaussianPolynomial {
                center,
                width,
                coeffs,
            } => {
                if !(width.is_finite() && *width > 0.0) || !center.is_finite() || !finite(coeffs) {
                    return Err(Error::invalid("gaussian_polynomial needs a finite center, positive width and finite coefficients"));
                }
            }
            RealLineFunction::SmoothBump {
                center,
                half_width,
                amplitude,
            } => {
                if !(half_width.is_finite() && *half_width > 0.0)
                    || !center.is_finite()
                    || !amplitude.is_finite()
                {
                    return Err(Error::invalid(
                        "smooth_bump needs a finite center and amplitude and a positive half_width",
                    ));
                }
            }
            RealLineFunction::Sampled { xs, ys } => {
                if xs.len() != ys.len() || xs.len() < 2 {
                    return Err(Error::invalid(
                        "sampled real-line function needs matching xs, ys of length >= 2",
                    ));
                }
                if !finite(xs) || !finite(ys) || xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid(
                        "sampled xs must be finite and strictly increasing",
                    ));
                }
            }
            RealLineFunction::Scaled { factor, inner } => {
                if !factor.is_finite() {
                    return Err(Error::invalid("scale factor must be finite"));
                }
                inner.validate()?;
            }
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            RealLineFunction::GaussianPolynomial {
                center,
                width,
                coeffs,
            } => {
                let z = (x - center) / width;
                (-0.5 * z * z).exp() * horner(coeffs, x)
            }
            RealLineFunction::SmoothBump {
                center,
                half_width,
                amplitude,
            } => amplitude * bump_profile_value((x - center) / half_width),
            RealLineFunction::Sampled { xs, ys } => interp(xs, ys, x),
            RealLineFunction::Scaled { factor, inner } => factor * inner.value(x),
        }
    }

    pub fn knots(&self) -> Vec<f64> {
        match self {
            RealLineFunction::GaussianPolynomial { .. } => Vec::new(),
            RealLineFunction::SmoothBump {
                center, half_width, ..
            } => vec![center - half_width, center + half_width],
            RealLineFunction::Sampled { xs, .. } => xs.clone(),
            RealLineFunction::Scaled { inner, .. } => inner.knots(),
        }
    }

    /// An interval outside which `|f|` carries at most [`TAIL_MASS`] of its
    /// mass (for compactly supported kinds: the support).
    pub fn significant_range(&self) -> [f64; 2] {
        match self {
            RealLineFunction::GaussianPolynomial {
                center,
                width,
                coeffs,
            } => {
                // Grow the radius until the polynomial-weighted Gaussian tail
                // bound falls below the threshold relative to a mass estimate.
                let poly_bound = |r: f64| {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c.abs() * r.powi(k as i32))
                        .sum::<f64>()
                };
                let mass = (0..=64)
                    .map(|i| {
                        let x = center + width * (-8.0 + 0.25 * i as f64);
                        self.value(x).abs() * 0.25 * width
                    })
                    .sum::<f64>()
                    .max(f64::MIN_POSITIVE);
                let mut k = 4.0;
                while k < 60.0 {
                    let r = center.abs() + k * width;
                    let tail = poly_bound(r) * (-0.5 * k * k).exp() * width * (1.0 + 2.0 / k);
                    if tail < 0.1 * TAIL_MASS * mass {
                        break;
                    }
                    k += 0.5;
                }
                [center - k * width, center + k * width]
            }
            RealLineFunction::SmoothBump {
                center, half_width, ..
            } => [center - half_width, center + half_width],
            RealLineFunction::Sampled { xs, .. } => [xs[0], xs[xs.len() - 1]],
            RealLineFunction::Scaled { inner, .. } => inner.significant_range(),
        }
    }
}

/// `σ(x) = 1 / (1 + e^{-x})`.
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `1 / (σ(x) (1 - σ(x)))`, the Jacobian of the inverse map.
fn logistic_jacobian(x: f64) -> f64 {
    x.exp() + 2.0 + (-x).exp()
}

fn transformed(
    f: &RealLineFunction,
    samples: usize,
    weight: impl Fn(f64) -> f64,
) -> Result<FunctionSpec> {
    f.validate()?;
    if samples < 3 {
        return Err(Error::invalid("need at least three samples"));
    }
    let [lo, hi] = f.significant_range();
    let (lo, hi) = (lo.max(-MAX_ABS_X), hi.min(MAX_ABS_X));
    if !(lo < hi) {
        return Err(Error::invalid(
            "function has no significant mass inside |x| <= 30",
        ));
    }
    let mut xs = Vec::with_capacity(samples + 2);
    let mut ys = Vec::with_capacity(samples + 2);
    xs.push(0.0);
    ys.push(0.0);
    for i in 0..samples {
        let x = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
        let t = logistic(x);
        if t <= *xs.last().unwrap() || t >= 1.0 {
            continue;
        }
        let v = f.value(x) * weight(x);
        if !v.is_finite() {
            return Err(Error::invalid(format!(
                "transformed value at x = {x} is not finite"
            )));
        }
        xs.push(t);
        ys.push(v);
    }
    // outside the significant range the function is treated as 0
    xs.push(1.0);
    ys.push(0.0);
    FunctionSpec::sampled(xs, ys)
}

/// `f(x(t)) / (t (1 - t))` sampled at `samples` points uniform in `x` over
/// the significant range (hence clustered near 0 and 1 in `t`), zero at the
/// ends. Preserves `∫ f e^{i g}` integrals.
pub fn to_unit_interval(f: &RealLineFunction, samples: usize) -> Result<FunctionSpec> {
    let spec = transformed(f, samples, logistic_jacobian)?;
    check_integrable(f)?;
    Ok(spec)
}

/// `f(x(t)) / sqrt(t (1 - t))`: the unitary version of the map, which
/// preserves `∫ f_j^* f_k` inner products.
pub fn to_unit_interval_l2(f: &RealLineFunction, samples: usize) -> Result<FunctionSpec> {
    transformed(f, samples, |x| logistic_jacobian(x).sqrt())
}

/// Rejects functions whose transformed mass does not settle: comparing a
/// coarse and a fine Riemann sum in `x` of `|f|`.
fn check_integrable(f: &RealLineFunction) -> Result<()> {
    let [lo, hi] = f.significant_range();
    let sum = |m: usize| {
        let h = (hi - lo) / m as f64;
        (0..m)
            .map(|i| f.value(lo + h * (i as f64 + 0.5)).abs())
            .sum::<f64>()
            * h
    };
    let (coarse, fine) = (sum(2000), sum(4000));
    if !coarse.is_finite()
        || !fine.is_finite()
        || (coarse - fine).abs() > 1e-3 * fine.max(1e-300) + 1e-12
    {
        return Err(Error::invalid(
            "function does not look integrable on its significant range",
        ));
    }
    Ok(())
}

/// `x ↦ g(σ(x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushedPhase {
    pub phase: SmoothPhase,
}

impl PushedPhase {
    /// `g` vanishes for `|x|` beyond this radius.
    pub fn support_radius(&self) -> f64 {
        match self.phase.support_margins() {
            Some((l, r)) => {
                let delta = l.min(r);
                if delta >= 0.5 {
                    0.0
                } else {
                    ((1.0 - delta) / delta).ln()
                }
            }
            None => f64::INFINITY,
        }
    }
}

impl Phase for PushedPhase {
    fn value(&self, x: f64) -> f64 {
        self.phase.value(logistic(x))
    }

    fn knots(&self) -> Vec<f64> {
        self.phase
            .knots()
            .into_iter()
            .filter(|&t| t > 0.0 && t < 1.0)
            .map(|t| (t / (1.0 - t)).ln())
            .collect()
    }
}

pub fn phase_pushforward(g: &SmoothPhase) -> PushedPhase {
    PushedPhase { phase: g.clone() }
}

/// `∫_R f e^{i g}` by direct quadrature over the significant range of `f`.
pub fn integrate_real_line(
    f: &RealLineFunction,
    phase: Option<&dyn Phase>,
    quad: &QuadratureOptions,
) -> Result<Complex64> {
    let [lo, hi] = f.significant_range();
    let mut knots = f.knots();
    if let Some(p) = phase {
        knots.extend(p.knots());
    }
    let knots = merge_knots(knots);
    let out = integrate(
        |x, o: &mut [Complex64]| {
            let g = phase.map_or(0.0, |p| p.value(x));
            o[0] = Complex64::from_polar(f.value(x), g);
        },
        1,
        lo,
        hi,
        &knots,
        quad,
    )?;
    Ok(out.values[0])
}

/// A function on `R^N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiFunction {
    /// `Π_i factors[i](x_i)`.
    Separable { factors: Vec<RealLineFunction> },
    /// Values on a tensor grid, row-major (last axis fastest).
    Gridded {
        axes: Vec<Vec<f64>>,
        values: Vec<f64>,
    },
}

impl MultiFunction {
    pub fn dimension(&self) -> usize {
        match self {
            MultiFunction::Separable { factors } => factors.len(),
            MultiFunction::Gridded { axes, .. } => axes.len(),
        }
    }
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = 0.5 * (axis[i + 1] - axis[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// `F(x_axis) = ∫ f` over every other coordinate.
pub fn marginalize(
    f: &MultiFunction,
    axis: usize,
    quad: &QuadratureOptions,
) -> Result<RealLineFunction> {
    let dim = f.dimension();
    if axis >= dim {
        return Err(Error::invalid(format!(
            "axis {axis} out of range for dimension {dim}"
        )));
    }
    match f {
        MultiFunction::Separable { factors } => {
            let mut factor = 1.0;
            for (i, h) in factors.iter().enumerate() {
                if i != axis {
                    h.validate()?;
                    factor *= integrate_real_line(h, None, quad)?.re;
                }
            }
            Ok(RealLineFunction::Scaled {
                factor,
                inner: Box::new(factors[axis].clone()),
            })
        }
        MultiFunction::Gridded { axes, values } => {
            if dim > 3 {
                return Err(Error::Unsupported(format!(
                    "gridded marginals need N <= 3, got {dim}"
                )));
            }
            if axes
                .iter()
                .any(|a| a.len() < 2 || a.windows(2).any(|w| w[1] <= w[0]))
            {
                return Err(Error::invalid(
                    "grid axes must be strictly increasing with >= 2 points",
                ));
            }
            let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
            let total: usize = shape.iter().product();
            if values.len() != total {
                return Err(Error::invalid(format!(
                    "grid has {} values, expected {total}",
                    values.len()
                )));
            }
            let weights: Vec<Vec<f64>> = axes.iter().map(|a| trapezoid_weights(a)).collect();
            let mut ys = vec![0.0; shape[axis]];
            let mut idx = vec![0usize; dim];
            for v in values {
                let w: f64 = (0..dim)
                    .filter(|&d| d != axis)
                    .map(|d| weights[d][idx[d]])
                    .product();
                ys[idx[axis]] += w * v;
                for d in (0..dim).rev() {
                    idx[d] += 1;
                    if idx[d] < shape[d] {
                        break;
                    }
                    idx[d] = 0;
                }
            }
            Ok(RealLineFunction::Sampled {
                xs: axes[axis].clone(),
                ys,
            })
        }
    }
}
