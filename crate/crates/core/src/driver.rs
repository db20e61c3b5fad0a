//! End-to-end solver: dependence scan, the split or recursive case, ε
//! continuation, and independent re-verification.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::corrector::{build_bump_basis, newton_correct, NewtonOptions};
use crate::error::{Error, Result};
use crate::func::{dependence_bounds, independent_subset, FunctionSet, FunctionSpec};
use crate::partition::{solve_partition, PartitionOptions};
use crate::phase::{build_g0, mollify, SmoothPhase};
use crate::quadrature::{residual_vector, QuadratureOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Absolute bound on every `|∫ f_j e^{i g}|`.
    pub residual_tol: f64,
    pub quad: QuadratureOptions,
    pub scan_points: usize,
    pub rank_tol: f64,
    pub max_eps_halvings: usize,
    pub seed: u64,
    /// Return `g ≡ 0` when the residuals already vanish without a phase.
    pub allow_trivial: bool,
    pub newton_max_iter: usize,
    /// Relative tolerance of the breakpoint solves.
    pub partition_tol: f64,
    pub partition_seeds: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-9,
            quad: QuadratureOptions::default(),
            scan_points: 256,
            rank_tol: 1e-8,
            max_eps_halvings: 12,
            seed: 0,
            allow_trivial: false,
            newton_max_iter: 50,
            partition_tol: 1e-9,
            partition_seeds: 32,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::invalid("residual_tol must be positive"));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::invalid("rank_tol must lie in (0, 1)"));
        }
        if self.scan_points < 3 {
            return Err(Error::invalid("scan_points must be at least 3"));
        }
        self.quad.validate()
    }

    /// Quadrature accurate enough to certify residuals below `tol`.
    fn quad_for(&self, tol: f64) -> QuadratureOptions {
        QuadratureOptions {
            abs_tol: self.quad.abs_tol.min(0.01 * tol),
            ..self.quad
        }
    }

    fn partition_options(&self) -> PartitionOptions {
        PartitionOptions {
            tol: self.partition_tol,
            seeds: self.partition_seeds,
            rank_tol: self.rank_tol,
            seed: self.seed,
            quad: self.quad,
            ..PartitionOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    /// Nothing left to annihilate; `g ≡ 0` on the interval.
    Trivial,
    /// Independent on both sides of a split point: one corrected step phase.
    Split,
    /// Dependent on both sides of every split point: recurse on two halves.
    Recurse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Subinterval of the original domain this step worked on.
    pub interval: [f64; 2],
    pub depth: usize,
    pub case: CaseKind,
    /// Split point `p` or recursion point `q`, in original coordinates.
    pub split: Option<f64>,
    pub n_effective: usize,
    pub r_left: usize,
    pub r_right: usize,
    pub eps: Option<f64>,
    pub newton_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub residuals: Vec<Complex64>,
    pub max_residual: f64,
    pub eps_final: f64,
    pub newton_iters: usize,
    pub recursion_trace: Vec<TraceEntry>,
    pub r_left: usize,
    pub r_right: usize,
    /// Seconds.
    pub wall_time: f64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// A complex-valued function `re + i·im` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexFunction {
    pub re: FunctionSpec,
    #[serde(default)]
    pub im: Option<FunctionSpec>,
}

impl ComplexFunction {
    pub fn real(re: FunctionSpec) -> Self {
        Self { re, im: None }
    }

    pub fn new(re: FunctionSpec, im: FunctionSpec) -> Self {
        Self { re, im: Some(im) }
    }

    pub fn value(&self, x: f64) -> Complex64 {
        Complex64::new(
            self.re.value(x),
            self.im.as_ref().map_or(0.0, |f| f.value(x)),
        )
    }
}

/// Splits complex functions into real ones, `(Re₁, Im₁, …, Reₙ, Imₙ)`;
/// purely real entries contribute only their real part.
pub fn realify(functions: &[ComplexFunction]) -> Result<FunctionSet> {
    let mut entries = Vec::with_capacity(2 * functions.len());
    for f in functions {
        entries.push(f.re.clone());
        if let Some(im) = &f.im {
            entries.push(im.clone());
        }
    }
    FunctionSet::unit(entries)
}

/// Relative jump allowed in derivatives `0..=4` across phase boundaries.
pub const CONTINUITY_TOL: f64 = 1e-5;

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

struct Solver<'a> {
    opts: &'a SolveOptions,
    trace: Vec<TraceEntry>,
    newton_iters: usize,
    max_depth: usize,
}

impl Solver<'_> {
    /// Annihilates `fset` (on `[0, 1]`) to absolute accuracy `tol`.
    /// `outer` maps `[0, 1]` back to the original coordinates for the trace.
    fn solve_unit(
        &mut self,
        fset: &FunctionSet,
        tol: f64,
        outer: [f64; 2],
        depth: usize,
    ) -> Result<SmoothPhase> {
        let opts = self.opts;
        let to_outer = |x: f64| outer[0] + (outer[1] - outer[0]) * x;
        let trivial = |solver: &mut Self, n: usize| {
            solver.trace.push(TraceEntry {
                interval: outer,
                depth,
                case: CaseKind::Trivial,
                split: None,
                n_effective: n,
                r_left: 0,
                r_right: 0,
                eps: None,
                newton_iters: 0,
            });
            SmoothPhase::zero()
        };

        let norms = fset.l1_norms(&opts.quad)?;
        let scale = norms.iter().copied().fold(0.0, f64::max);
        let kept: Vec<usize> = (0..fset.len())
            .filter(|&j| scale > 0.0 && norms[j] >= opts.rank_tol * scale)
            .collect();
        if kept.is_empty() {
            return Ok(trivial(self, 0));
        }
        let fset = fset.subset(&kept)?;
        let n = fset.len();
        if opts.allow_trivial {
            let r = residual_vector(&fset, None, &opts.quad_for(tol))?;
            if max_abs(&r) < tol {
                return Ok(trivial(self, n));
            }
        }
        if depth > self.max_depth {
            return Err(Error::SolverFailure(format!(
                "recursion exceeded depth {} without reducing the family",
                self.max_depth
            )));
        }

        let bounds = dependence_bounds(&fset, opts.scan_points, opts.rank_tol, &opts.quad)?;
        if bounds.is_split_case() {
            self.split_case(&fset, 0.5 * (bounds.left + bounds.right), tol, outer, depth)
        } else {
            let (lo, hi) = (bounds.right, bounds.left);
            let mid = 0.5 * (lo + hi);
            // a structural knot inside the admissible range makes the cleanest cut
            let q = fset
                .knots()
                .into_iter()
                .filter(|&k| k >= lo && k <= hi && k > 0.0 && k < 1.0)
                .min_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()))
                .unwrap_or(mid)
                .clamp(1e-3, 1.0 - 1e-3);

            let left_idx = independent_subset(&fset, [0.0, q], opts.rank_tol, &opts.quad)?;
            let right_idx = independent_subset(&fset, [q, 1.0], opts.rank_tol, &opts.quad)?;
            self.trace.push(TraceEntry {
                interval: outer,
                depth,
                case: CaseKind::Recurse,
                split: Some(to_outer(q)),
                n_effective: n,
                r_left: left_idx.len(),
                r_right: right_idx.len(),
                eps: None,
                newton_iters: 0,
            });
            // Dependent members inherit the error of the subset through their
            // expansion coefficients; leave room for that.
            let side_tol = 0.05 * tol;
            let pulled = |idx: &[usize], a: f64, b: f64| -> Result<Option<FunctionSet>> {
                if idx.is_empty() {
                    return Ok(None);
                }
                let entries = idx
                    .iter()
                    .map(|&i| fset.entries()[i].pullback(a, b))
                    .collect();
                Ok(Some(FunctionSet::unit(entries)?))
            };
            let left = match pulled(&left_idx, 0.0, q)? {
                Some(sub) => {
                    self.solve_unit(&sub, side_tol / q, [to_outer(0.0), to_outer(q)], depth + 1)?
                }
                None => SmoothPhase::zero(),
            };
            let right = match pulled(&right_idx, q, 1.0)? {
                Some(sub) => self.solve_unit(
                    &sub,
                    side_tol / (1.0 - q),
                    [to_outer(q), to_outer(1.0)],
                    depth + 1,
                )?,
                None => SmoothPhase::zero(),
            };
            SmoothPhase::concat(&left.affine_image(0.0, q), &right.affine_image(q, 1.0))
        }
    }

    fn split_case(
        &mut self,
        fset: &FunctionSet,
        p: f64,
        tol: f64,
        outer: [f64; 2],
        depth: usize,
    ) -> Result<SmoothPhase> {
        let opts = self.opts;
        let popts = opts.partition_options();
        let left = solve_partition(&fset.restrict(0.0, p)?, &popts)?;
        let right = solve_partition(&fset.restrict(p, 1.0)?, &popts)?;
        let g0 = build_g0(&left, &right)?;
        let quad = opts.quad_for(tol);
        let newton = NewtonOptions {
            tol: 0.1 * tol,
            max_iter: opts.newton_max_iter,
        };

        let mut eps = g0.min_gap() / 8.0;
        let mut last_err = None;
        for _ in 0..=opts.max_eps_halvings {
            let attempt = mollify(&g0, eps).and_then(|phase| {
                let basis = build_bump_basis(fset, &g0, p, 2.0 * eps, opts.seed, &quad)?;
                let out = newton_correct(fset, &phase, &basis, &newton, &quad)?;
                Ok((phase.with_correction(basis.bumps, out.u), out.iterations))
            });
            match attempt {
                Ok((phase, iters)) => {
                    let to_outer = |x: f64| outer[0] + (outer[1] - outer[0]) * x;
                    self.newton_iters += iters;
                    self.trace.push(TraceEntry {
                        interval: outer,
                        depth,
                        case: CaseKind::Split,
                        split: Some(to_outer(p)),
                        n_effective: fset.len(),
                        r_left: left.len(),
                        r_right: right.len(),
                        eps: Some(eps * (outer[1] - outer[0])),
                        newton_iters: iters,
                    });
                    return Ok(phase);
                }
                Err(e @ (Error::CorrectorFailure { .. } | Error::BasisFailure { .. })) => {
                    last_err = Some(e);
                    eps *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        Err(Error::SolverFailure(format!(
            "no convergence after {} eps halvings (last: {})",
            opts.max_eps_halvings,
            last_err.map_or_else(String::new, |e| e.to_string())
        )))
    }
}

/// Finds a compactly supported smooth phase `g` on the set's domain with
/// `|∫ f_j e^{i g}| < residual_tol` for every member.
pub fn solve_annihilating_phase(
    fset: &FunctionSet,
    opts: &SolveOptions,
) -> Result<(SmoothPhase, SolveReport)> {
    opts.validate()?;
    let start = Instant::now();
    let [a, b] = fset.domain();
    let len = b - a;
    let unit = if [a, b] == [0.0, 1.0] {
        fset.clone()
    } else {
        FunctionSet::unit(fset.entries().iter().map(|f| f.pullback(a, b)).collect())?
    };
    let mut solver = Solver {
        opts,
        trace: Vec::new(),
        newton_iters: 0,
        max_depth: 2 * fset.len() + 2,
    };
    let unit_phase = solver.solve_unit(&unit, 0.5 * opts.residual_tol / len, [a, b], 0)?;
    let phase = if [a, b] == [0.0, 1.0] {
        unit_phase
    } else {
        unit_phase.affine_image(a, b)
    };

    let residuals = residual_vector(fset, Some(&phase), &opts.quad_for(opts.residual_tol))?;
    let max_residual = max_abs(&residuals);
    let top = solver.trace.first();
    let mut report = SolveReport {
        max_residual,
        eps_final: solver
            .trace
            .iter()
            .filter_map(|t| t.eps)
            .fold(0.0, |m: f64, e| if m == 0.0 { e } else { m.min(e) }),
        newton_iters: solver.newton_iters,
        r_left: top.map_or(0, |t| t.r_left),
        r_right: top.map_or(0, |t| t.r_right),
        recursion_trace: solver.trace,
        residuals,
        wall_time: 0.0,
        checks: Vec::new(),
        passed: true,
    };
    report.checks = structural_checks(&phase, [a, b]);
    report.checks.push(Check {
        name: "residual".into(),
        passed: max_residual < opts.residual_tol,
        value: max_residual,
        threshold: opts.residual_tol,
    });
    report.passed = report.checks.iter().all(|c| c.passed);
    report.wall_time = start.elapsed().as_secs_f64();
    if max_residual >= opts.residual_tol {
        return Err(Error::SolverFailure(format!(
            "final residual {max_residual:.3e} exceeds tolerance {:.3e}",
            opts.residual_tol
        )));
    }
    Ok((phase, report))
}

fn structural_checks(phase: &SmoothPhase, domain: [f64; 2]) -> Vec<Check> {
    let margin = phase.support_margins().map_or(0.0, |(l, r)| l.min(r));
    let same_domain = (phase.domain()[0] - domain[0]).abs() < 1e-12
        && (phase.domain()[1] - domain[1]).abs() < 1e-12;
    let defect = phase.continuity_defect();
    vec![
        Check {
            name: "compact_support".into(),
            passed: same_domain && margin > 0.0,
            value: margin,
            threshold: 0.0,
        },
        Check {
            name: "continuity".into(),
            passed: defect < CONTINUITY_TOL,
            value: defect,
            threshold: CONTINUITY_TOL,
        },
    ]
}

/// Re-checks a phase against a family with a fresh, ten times tighter
/// quadrature, plus the compact-support and continuity invariants.
pub fn verify(fset: &FunctionSet, phase: &SmoothPhase, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    phase.validate()?;
    let start = Instant::now();
    let quad = opts.quad_for(opts.residual_tol).tightened(10.0);
    let residuals = residual_vector(fset, Some(phase), &quad)?;
    let max_residual = max_abs(&residuals);
    let mut checks = structural_checks(phase, fset.domain());
    checks.push(Check {
        name: "residual".into(),
        passed: max_residual < opts.residual_tol,
        value: max_residual,
        threshold: opts.residual_tol,
    });
    let passed = checks.iter().all(|c| c.passed);
    Ok(SolveReport {
        residuals,
        max_residual,
        eps_final: phase.epsilon,
        newton_iters: 0,
        recursion_trace: Vec::new(),
        r_left: 0,
        r_right: 0,
        wall_time: start.elapsed().as_secs_f64(),
        checks,
        passed,
    })
}
