//! Phase-only orthogonalization: unimodular smooth factors `e^{i g_j}` that
//! make `φ_j = f_j e^{i g_j}` pairwise orthogonal.
//!
//! Phases are fixed from the last function backwards. With `g_n = 0`, each
//! `g_j` annihilates the family `f_j^* φ_k` (`k > j`) after negation, so
//! `⟨φ_j, φ_k⟩ = ∫ f_j^* φ_k e^{-i g_j} = 0`. Inner products conjugate their
//! first argument.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::driver::{
    realify, solve_annihilating_phase, ComplexFunction, SolveOptions, SolveReport,
};
use crate::error::{Error, Result};
use crate::func::{FunctionSet, FunctionSpec};
use crate::phase::SmoothPhase;
use crate::quadrature::{integrate, merge_knots, QuadratureOptions};

use super::real_line::{phase_pushforward, to_unit_interval_l2, PushedPhase, RealLineFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orthogonalization {
    pub phases: Vec<SmoothPhase>,
    /// One report per solved level, from `j = n - 1` down to `j = 1`.
    pub levels: Vec<SolveReport>,
    /// `max_{j<k} |⟨φ_j, φ_k⟩|`, recomputed after all phases are known.
    pub max_inner_product: f64,
}

fn product(a: &FunctionSpec, b: &FunctionSpec) -> FunctionSpec {
    FunctionSpec::Product {
        factors: vec![a.clone(), b.clone()],
    }
}

/// `Σ ± terms`, `None` when every term is absent.
fn signed_sum(terms: Vec<(f64, Option<FunctionSpec>)>) -> Option<FunctionSpec> {
    let present: Vec<FunctionSpec> = terms
        .into_iter()
        .filter_map(|(s, t)| t.map(|t| if s == 1.0 { t } else { t.scaled(s) }))
        .collect();
    match present.len() {
        0 => None,
        1 => present.into_iter().next(),
        _ => Some(FunctionSpec::Sum { terms: present }),
    }
}

fn mul(a: Option<&FunctionSpec>, b: Option<&FunctionSpec>) -> Option<FunctionSpec> {
    Some(product(a?, b?))
}

/// `conj(f) · h · e^{i g}` as a complex function.
fn conj_times_phased(f: &ComplexFunction, h: &ComplexFunction, g: &SmoothPhase) -> ComplexFunction {
    let (a, b) = (Some(&f.re), f.im.as_ref());
    let (c, d) = (Some(&h.re), h.im.as_ref());
    // conj(a + ib)(c + id) = (ac + bd) + i(ad - bc)
    let p = signed_sum(vec![(1.0, mul(a, c)), (1.0, mul(b, d))]);
    let q = signed_sum(vec![(1.0, mul(a, d)), (-1.0, mul(b, c))]);
    let trivial = g.segments.iter().all(|s| s.from == 0.0 && s.to == 0.0)
        && g.correction.u.iter().all(|u| *u == 0.0);
    let (re, im) = if trivial {
        (p, q)
    } else {
        let cos = FunctionSpec::PhaseCos {
            phase: Box::new(g.clone()),
        };
        let sin = FunctionSpec::PhaseSin {
            phase: Box::new(g.clone()),
        };
        (
            signed_sum(vec![
                (1.0, mul(p.as_ref(), Some(&cos))),
                (-1.0, mul(q.as_ref(), Some(&sin))),
            ]),
            signed_sum(vec![
                (1.0, mul(p.as_ref(), Some(&sin))),
                (1.0, mul(q.as_ref(), Some(&cos))),
            ]),
        )
    };
    ComplexFunction {
        re: re.unwrap_or_else(|| FunctionSpec::constant(0.0)),
        im,
    }
}

/// `⟨φ_j, φ_k⟩ = ∫ conj(f_j e^{i g_j}) f_k e^{i g_k}` for every pair.
pub fn inner_products(
    functions: &[ComplexFunction],
    phases: &[SmoothPhase],
    quad: &QuadratureOptions,
) -> Result<Vec<Vec<Complex64>>> {
    let n = functions.len();
    if phases.len() != n {
        return Err(Error::invalid("one phase per function required"));
    }
    let mut knots: Vec<f64> = Vec::new();
    for f in functions {
        knots.extend(f.re.knots());
        if let Some(im) = &f.im {
            knots.extend(im.knots());
        }
    }
    for g in phases {
        knots.extend(crate::phase::Phase::knots(g));
    }
    let knots = merge_knots(knots);
    let mut vals = vec![Complex64::new(0.0, 0.0); n];
    let out = integrate(
        |x, out: &mut [Complex64]| {
            for (v, (f, g)) in vals.iter_mut().zip(functions.iter().zip(phases)) {
                *v = f.value(x) * Complex64::from_polar(1.0, crate::phase::Phase::value(g, x));
            }
            let mut idx = 0;
            for j in 0..n {
                for k in j..n {
                    out[idx] = vals[j].conj() * vals[k];
                    idx += 1;
                }
            }
        },
        n * (n + 1) / 2,
        0.0,
        1.0,
        &knots,
        quad,
    )?;
    let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let mut values = out.values.into_iter();
    #[allow(clippy::needless_range_loop)] // fills both triangles
    for j in 0..n {
        for k in j..n {
            let z = values.next().expect("one value per pair");
            m[j][k] = z;
            m[k][j] = z.conj();
        }
    }
    Ok(m)
}

/// Phases `g_1, …, g_n` on `[0, 1]` making `f_j e^{i g_j}` pairwise
/// orthogonal.
pub fn orthogonalize(
    functions: &[ComplexFunction],
    opts: &SolveOptions,
) -> Result<Orthogonalization> {
    let n = functions.len();
    if n == 0 {
        return Err(Error::invalid("nothing to orthogonalize"));
    }
    for f in functions {
        f.re.validate()?;
        if let Some(im) = &f.im {
            im.validate()?;
        }
    }
    let mut phases = vec![SmoothPhase::zero(); n];
    let mut levels = Vec::new();
    for j in (0..n - 1).rev() {
        let family: Vec<ComplexFunction> = (j + 1..n)
            .map(|k| conj_times_phased(&functions[j], &functions[k], &phases[k]))
            .collect();
        let fset: FunctionSet = realify(&family)?;
        let (g, report) = solve_annihilating_phase(&fset, opts)
            .map_err(|e| Error::SolverFailure(format!("orthogonalization level {}: {e}", j + 1)))?;
        phases[j] = g.negated();
        levels.push(report);
    }
    let quad = QuadratureOptions {
        abs_tol: opts.quad.abs_tol.min(0.01 * opts.residual_tol),
        ..opts.quad
    };
    let m = inner_products(functions, &phases, &quad)?;
    let mut max_inner = 0.0f64;
    for (j, row) in m.iter().enumerate() {
        for z in &row[j + 1..] {
            max_inner = max_inner.max(z.norm());
        }
    }
    Ok(Orthogonalization {
        phases,
        levels,
        max_inner_product: max_inner,
    })
}

/// A complex function on the real line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexRealLineFunction {
    pub re: RealLineFunction,
    #[serde(default)]
    pub im: Option<RealLineFunction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealLineOrthogonalization {
    /// Phases of the unit-interval problem.
    pub unit: Orthogonalization,
    /// The same phases as functions on `R`.
    pub phases: Vec<PushedPhase>,
}

/// Orthogonalization on `R`: each function is moved to `[0, 1]` by the
/// inner-product-preserving logistic map, solved there, and the phases are
/// pushed back.
pub fn orthogonalize_real_line(
    functions: &[ComplexRealLineFunction],
    samples: usize,
    opts: &SolveOptions,
) -> Result<RealLineOrthogonalization> {
    let unit: Vec<ComplexFunction> = functions
        .iter()
        .map(|f| {
            Ok(ComplexFunction {
                re: to_unit_interval_l2(&f.re, samples)?,
                im: f
                    .im
                    .as_ref()
                    .map(|im| to_unit_interval_l2(im, samples))
                    .transpose()?,
            })
        })
        .collect::<Result<_>>()?;
    let result = orthogonalize(&unit, opts)?;
    let phases = result.phases.iter().map(phase_pushforward).collect();
    Ok(RealLineOrthogonalization {
        unit: result,
        phases,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn single_function_gets_zero_phase() {
        let out = orthogonalize(
            &[ComplexFunction::real(FunctionSpec::constant(1.0))],
            &opts(),
        )
        .unwrap();
        assert_eq!(out.phases, vec![SmoothPhase::zero()]);
        assert!(out.levels.is_empty());
    }

    #[test]
    fn orthogonal_pair_is_left_alone_when_trivial_allowed() {
        let f1 = ComplexFunction::real(FunctionSpec::constant(1.0));
        let f2 = ComplexFunction::new(
            FunctionSpec::trigonometric(0.0, vec![[1.0, 0.0]]),
            FunctionSpec::trigonometric(0.0, vec![[0.0, 1.0]]),
        );
        let o = SolveOptions {
            allow_trivial: true,
            ..opts()
        };
        let out = orthogonalize(&[f1, f2], &o).unwrap();
        assert_eq!(out.phases[0], SmoothPhase::zero().negated());
        assert!(out.max_inner_product < 1e-9);
    }

    #[test]
    fn equal_constants_become_orthogonal() {
        let f = ComplexFunction::real(FunctionSpec::constant(1.0));
        let funcs = vec![f.clone(), f];
        let out = orthogonalize(&funcs, &opts()).unwrap();
        assert!(out.max_inner_product < 1e-8, "{}", out.max_inner_product);
        assert_eq!(out.phases[1], SmoothPhase::zero());
        let m = inner_products(&funcs, &out.phases, &QuadratureOptions::default()).unwrap();
        assert!((m[0][0].re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn conjugated_product_matches_pointwise() {
        let f = ComplexFunction::new(
            FunctionSpec::polynomial(vec![1.0, 2.0]),
            FunctionSpec::polynomial(vec![0.5, -1.0]),
        );
        let h = ComplexFunction::new(
            FunctionSpec::constant(0.3),
            FunctionSpec::polynomial(vec![0.0, 0.0, 1.0]),
        );
        let step = crate::phase::StepPhase::new(vec![0.0, 0.5, 1.0], vec![PI, 0.5 * PI]).unwrap();
        let g = crate::phase::mollify(&step, 0.05).unwrap();
        let p = conj_times_phased(&f, &h, &g);
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let expect = f.value(x).conj()
                * h.value(x)
                * Complex64::from_polar(1.0, crate::phase::Phase::value(&g, x));
            assert!((p.value(x) - expect).norm() < 1e-14);
        }
    }
}
