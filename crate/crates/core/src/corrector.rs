//! Bump-basis correction of a mollified phase.
//!
//! With `g_u = g + Σ u_k h_k`, the map `F_j(u) = ∫ f_j e^{i g_u}` is packed
//! into the real vector `Q(u) = (Im F_1, …, Im F_n, Re F_1, …, Re F_n)`. The
//! first `n` bumps live left of the split point, where `e^{i g_0} = ±1`, so
//! they only move the imaginary parts; the last `n` live right of it, where
//! `e^{i g_0} = ±i`, and only move the real parts. Newton's method on `Q`
//! removes the error introduced by mollification.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::FunctionSet;
use crate::jet::{bump_profile, bump_profile_value, Jet};
use crate::phase::{Phase, StepPhase};
use crate::quadrature::{integrate, merge_knots, residual_vector, QuadratureOptions};

/// `amplitude · exp(-1 / (1 - s²))`, `s = (x - center) / half_width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
    #[serde(default = "unit_amplitude")]
    pub amplitude: f64,
}

fn unit_amplitude() -> f64 {
    1.0
}

impl Bump {
    pub fn new(center: f64, half_width: f64) -> Self {
        Self {
            center,
            half_width,
            amplitude: 1.0,
        }
    }

    pub fn support(&self) -> [f64; 2] {
        [self.center - self.half_width, self.center + self.half_width]
    }

    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * bump_profile_value((x - self.center) / self.half_width)
    }

    pub(crate) fn jet(&self, x: f64) -> Jet {
        bump_profile(Jet::affine(x, self.center, 1.0 / self.half_width)).scale(self.amplitude)
    }
}

/// `2n` bumps, `n` on each side of `split`, all at distance at least `eps0`
/// from every knot of the step phase they were built for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionBasis {
    pub bumps: Vec<Bump>,
    pub eps0: f64,
    pub u: Vec<f64>,
    pub split: f64,
    /// `|det DQ_0(0)| / Π row norms` of the accepted basis.
    pub scaled_det: f64,
}

impl CorrectionBasis {
    pub fn n(&self) -> usize {
        self.bumps.len() / 2
    }
}

/// `g + Σ u_k h_k` as a [`Phase`].
struct Corrected<'a> {
    base: &'a dyn Phase,
    bumps: &'a [Bump],
    u: &'a [f64],
}

impl Phase for Corrected<'_> {
    fn value(&self, x: f64) -> f64 {
        let mut g = self.base.value(x);
        for (b, u) in self.bumps.iter().zip(self.u) {
            if *u != 0.0 {
                g += u * b.value(x);
            }
        }
        g
    }

    fn knots(&self) -> Vec<f64> {
        let mut k = self.base.knots();
        for b in self.bumps {
            k.extend(b.support());
        }
        k
    }
}

fn check_len(basis: &CorrectionBasis, u: &[f64]) -> Result<()> {
    if u.len() != basis.bumps.len() {
        return Err(Error::invalid(format!(
            "correction vector has length {}, basis has {} bumps",
            u.len(),
            basis.bumps.len()
        )));
    }
    Ok(())
}

/// `F_j(u) = ∫ f_j exp(i (g + Σ u_k h_k))`.
pub fn f_vector(
    fset: &FunctionSet,
    phase: &dyn Phase,
    basis: &CorrectionBasis,
    u: &[f64],
    quad: &QuadratureOptions,
) -> Result<Vec<Complex64>> {
    check_len(basis, u)?;
    let corrected = Corrected {
        base: phase,
        bumps: &basis.bumps,
        u,
    };
    residual_vector(fset, Some(&corrected), quad)
}

/// Packs `F` as `(Im F_1, …, Im F_n, Re F_1, …, Re F_n)`.
pub fn pack(f: &[Complex64]) -> Vec<f64> {
    f.iter()
        .map(|z| z.im)
        .chain(f.iter().map(|z| z.re))
        .collect()
}

pub fn q_vector(
    fset: &FunctionSet,
    phase: &dyn Phase,
    basis: &CorrectionBasis,
    u: &[f64],
    quad: &QuadratureOptions,
) -> Result<Vec<f64>> {
    Ok(pack(&f_vector(fset, phase, basis, u, quad)?))
}

/// `∂Q/∂u`, from `∂F_j/∂u_k = i ∫ f_j h_k exp(i g_u)`; column `k` is
/// integrated over the support of `h_k` only.
pub fn jacobian(
    fset: &FunctionSet,
    phase: &dyn Phase,
    basis: &CorrectionBasis,
    u: &[f64],
    quad: &QuadratureOptions,
) -> Result<DMatrix<f64>> {
    check_len(basis, u)?;
    let n = fset.len();
    let m = basis.bumps.len();
    let corrected = Corrected {
        base: phase,
        bumps: &basis.bumps,
        u,
    };
    let mut knots = fset.knots();
    knots.extend(corrected.knots());
    let knots = merge_knots(knots);
    let entries = fset.entries();
    let mut jac = DMatrix::zeros(2 * n, m);
    for (k, bump) in basis.bumps.iter().enumerate() {
        let [lo, hi] = bump.support();
        let col = integrate(
            |x, out: &mut [Complex64]| {
                let w = Complex64::new(0.0, bump.value(x))
                    * Complex64::from_polar(1.0, corrected.value(x));
                for (o, f) in out.iter_mut().zip(entries) {
                    *o = w * f.value(x);
                }
            },
            n,
            lo,
            hi,
            &knots,
            quad,
        )?;
        for (j, d) in col.values.iter().enumerate() {
            jac[(j, k)] = d.im;
            jac[(n + j, k)] = d.re;
        }
    }
    Ok(jac)
}

/// `|det M| / Π_i ‖row_i‖`, zero when some row vanishes.
pub fn scaled_determinant(m: &DMatrix<f64>) -> f64 {
    let norms: f64 = m.row_iter().map(|r| r.norm()).product();
    if norms == 0.0 || !norms.is_finite() {
        return 0.0;
    }
    (m.clone().lu().determinant() / norms).abs()
}

const SINGULAR_SCALED_DET: f64 = 1e-10;
const MAX_BASIS_ATTEMPTS: usize = 32;

/// Places `n` bumps on each side of `split` and checks that `DQ_0(0)`, taken
/// against the unmollified `step`, is non-singular.
///
/// Bumps go into the constant pieces of the step, kept `eps0` away from every
/// knot. Each of the `n` bumps of a side is handed to the piece with the most
/// usable length per bump; a piece holding `c` bumps is cut into `c` equal
/// shares with a bump centred in each. Singular bases are retried with
/// seeded random widths and offsets inside the same shares.
pub fn build_bump_basis(
    fset: &FunctionSet,
    step: &StepPhase,
    split: f64,
    eps0: f64,
    seed: u64,
    quad: &QuadratureOptions,
) -> Result<CorrectionBasis> {
    let n = fset.len();
    if n == 0 {
        return Err(Error::invalid("bump basis needs at least one function"));
    }
    if !(eps0 > 0.0) || 2.0 * eps0 >= step.min_gap() {
        return Err(Error::invalid(format!(
            "eps0 = {eps0} must be positive and below half the minimum knot gap {}",
            step.min_gap()
        )));
    }
    let split_known = step.knots.iter().any(|k| (k - split).abs() <= 1e-12);
    if !split_known {
        return Err(Error::invalid(
            "split point is not a knot of the step phase",
        ));
    }

    let usable: Vec<[f64; 2]> = step
        .knots
        .windows(2)
        .map(|w| [w[0] + eps0, w[1] - eps0])
        .collect();
    let left: Vec<usize> = (0..usable.len())
        .filter(|&i| step.knots[i + 1] <= split + 1e-12)
        .collect();
    let right: Vec<usize> = (0..usable.len())
        .filter(|&i| step.knots[i] >= split - 1e-12)
        .collect();

    let shares = |pieces: &[usize]| -> Vec<[f64; 2]> {
        let mut counts = vec![0usize; pieces.len()];
        for _ in 0..n {
            let best = (0..pieces.len())
                .max_by(|&a, &b| {
                    let la = (usable[pieces[a]][1] - usable[pieces[a]][0]) / (counts[a] + 1) as f64;
                    let lb = (usable[pieces[b]][1] - usable[pieces[b]][0]) / (counts[b] + 1) as f64;
                    // prefer the earlier piece on ties
                    la.total_cmp(&lb).then(b.cmp(&a))
                })
                .expect("each side has a piece");
            counts[best] += 1;
        }
        let mut out = Vec::with_capacity(n);
        for (p, &c) in pieces.iter().zip(&counts) {
            let [lo, hi] = usable[*p];
            let w = (hi - lo) / c.max(1) as f64;
            for s in 0..c {
                out.push([lo + w * s as f64, lo + w * (s + 1) as f64]);
            }
        }
        out
    };
    let mut all_shares = shares(&left);
    all_shares.extend(shares(&right));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_det = 0.0f64;
    for attempt in 0..MAX_BASIS_ATTEMPTS {
        let bumps: Vec<Bump> = all_shares
            .iter()
            .map(|&[lo, hi]| {
                let share = hi - lo;
                if attempt == 0 {
                    Bump::new(0.5 * (lo + hi), 0.5 * share)
                } else {
                    let hw = 0.5 * share * rng.random_range(0.4..1.0);
                    let offset = rng.random_range(0.0..=(share - 2.0 * hw));
                    Bump::new(lo + hw + offset, hw)
                }
            })
            .collect();
        let mut basis = CorrectionBasis {
            bumps,
            eps0,
            u: vec![0.0; 2 * n],
            split,
            scaled_det: 0.0,
        };
        let jac = jacobian(fset, step, &basis, &basis.u, quad)?;
        let det = scaled_determinant(&jac);
        best_det = best_det.max(det);
        if det >= SINGULAR_SCALED_DET {
            basis.scaled_det = det;
            return Ok(basis);
        }
    }
    Err(Error::BasisFailure {
        attempts: MAX_BASIS_ATTEMPTS,
        best_scaled_det: best_det,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Target for `‖Q‖₂`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// `‖Q‖₂` before every iteration and after the last one.
    pub norms: Vec<f64>,
}

impl NewtonOutcome {
    pub fn final_norm(&self) -> f64 {
        *self.norms.last().expect("at least the starting norm")
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const MAX_STEP: f64 = std::f64::consts::E * std::f64::consts::PI;
const MAX_BACKTRACKS: usize = 10;
/// Give up once `‖Q‖` has failed to halve over this many iterations; the
/// driver then retries with a smaller `eps`.
const STALL_WINDOW: usize = 8;

/// Damped Newton on `Q(u) = 0` from `u = 0`, halving the step until the
/// Armijo condition `‖Q(u + λδ)‖² ≤ (1 - 2·10⁻⁴ λ) ‖Q(u)‖²` holds.
pub fn newton_correct(
    fset: &FunctionSet,
    phase: &dyn Phase,
    basis: &CorrectionBasis,
    opts: &NewtonOptions,
    quad: &QuadratureOptions,
) -> Result<NewtonOutcome> {
    let mut u = vec![0.0; basis.bumps.len()];
    let mut q = q_vector(fset, phase, basis, &u, quad)?;
    let mut norms = vec![norm(&q)];
    for iter in 0..opts.max_iter {
        let current = *norms.last().unwrap();
        if current < opts.tol {
            return Ok(NewtonOutcome {
                u,
                iterations: iter,
                norms,
            });
        }
        let jac = jacobian(fset, phase, basis, &u, quad)?;
        let rhs = -DVector::from_column_slice(&q);
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                let svd = jac.svd(true, true);
                let cut = 1e-12 * svd.singular_values.max();
                svd.solve(&rhs, cut)
                    .map_err(|e| Error::SolverFailure(e.to_string()))?
            }
        };
        // bumps peak at 1/e, so this caps the change of g at π per step
        let mut lambda = (MAX_STEP / step.amax()).min(1.0);
        let mut accepted = false;
        for _ in 0..=MAX_BACKTRACKS {
            let trial: Vec<f64> = u
                .iter()
                .zip(step.iter())
                .map(|(a, d)| a + lambda * d)
                .collect();
            let tq = match q_vector(fset, phase, basis, &trial, quad) {
                Ok(tq) => tq,
                // too oscillatory to integrate: certainly not a good step
                Err(Error::Accuracy { .. }) => {
                    lambda *= 0.5;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let tn = norm(&tq);
            if tn * tn <= (1.0 - 2e-4 * lambda) * current * current {
                u = trial;
                q = tq;
                norms.push(tn);
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        let k = norms.len();
        let stalled = k > STALL_WINDOW && norms[k - 1] > 0.5 * norms[k - 1 - STALL_WINDOW];
        if !accepted || stalled {
            return Err(Error::CorrectorFailure {
                best_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
                iterations: iter + usize::from(accepted),
            });
        }
    }
    let last = *norms.last().unwrap();
    if last < opts.tol {
        Ok(NewtonOutcome {
            u,
            iterations: opts.max_iter,
            norms,
        })
    } else {
        Err(Error::CorrectorFailure {
            best_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
            iterations: opts.max_iter,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::FunctionSpec;
    use crate::partition::Partition;
    use crate::phase::{build_g0, mollify};

    fn four_level() -> StepPhase {
        let left = Partition::new([0.0, 0.5], vec![0.25]).unwrap();
        let right = Partition::new([0.5, 1.0], vec![0.75]).unwrap();
        build_g0(&left, &right).unwrap()
    }

    fn ones() -> FunctionSet {
        FunctionSet::unit(vec![FunctionSpec::constant(1.0)]).unwrap()
    }

    fn quad() -> QuadratureOptions {
        QuadratureOptions {
            abs_tol: 1e-13,
            ..Default::default()
        }
    }

    #[test]
    fn bump_shape() {
        let b = Bump::new(0.5, 0.1);
        assert!((b.value(0.5) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(b.value(0.4), 0.0);
        assert_eq!(b.value(0.61), 0.0);
        assert_eq!(b.support(), [0.4, 0.6]);
        assert!((b.value(0.45) - b.value(0.55)).abs() < 1e-15);
    }

    #[test]
    fn basis_respects_sides_and_margins() {
        let step = four_level();
        let eps0 = 0.02;
        let basis = build_bump_basis(&ones(), &step, 0.5, eps0, 0, &quad()).unwrap();
        assert_eq!(basis.bumps.len(), 2);
        assert!(basis.bumps[0].support()[1] <= 0.5 - eps0);
        assert!(basis.bumps[1].support()[0] >= 0.5 + eps0);
        for b in &basis.bumps {
            let [lo, hi] = b.support();
            for k in &step.knots {
                assert!(lo >= k + eps0 - 1e-12 || hi <= k - eps0 + 1e-12);
            }
        }
        // with equal pieces the first one wins
        assert!((basis.bumps[0].center - 0.125).abs() < 1e-12);
    }

    #[test]
    fn single_function_pivot_is_nonzero() {
        let basis = build_bump_basis(&ones(), &four_level(), 0.5, 0.02, 0, &quad()).unwrap();
        let jac = jacobian(&ones(), &four_level(), &basis, &[0.0, 0.0], &quad()).unwrap();
        // left bump sits where e^{i g0} = -1: dIm F/du = -∫h
        let mass = integrate(
            |x, o: &mut [f64]| o[0] = basis.bumps[0].value(x),
            1,
            0.0,
            1.0,
            &basis.bumps[0].support(),
            &quad(),
        )
        .unwrap()
        .values[0];
        assert!((jac[(0, 0)] + mass).abs() < 1e-12);
        assert!(jac[(1, 0)].abs() < 1e-15);
        assert!(jac[(0, 1)].abs() < 1e-15);
        assert!(jac[(1, 1)].abs() > 1e-3);
    }

    #[test]
    fn duplicate_functions_exhaust_attempts() {
        let dup = FunctionSet::unit(vec![
            FunctionSpec::constant(1.0),
            FunctionSpec::constant(2.0),
        ])
        .unwrap();
        let step = four_level();
        let err = build_bump_basis(&dup, &step, 0.5, 0.02, 3, &quad()).unwrap_err();
        assert!(matches!(err, Error::BasisFailure { attempts: 32, .. }));
    }

    #[test]
    fn bad_eps0_is_rejected() {
        assert!(build_bump_basis(&ones(), &four_level(), 0.5, 0.2, 0, &quad()).is_err());
        assert!(build_bump_basis(&ones(), &four_level(), 0.4, 0.02, 0, &quad()).is_err());
    }

    #[test]
    fn f_vector_examples() {
        let basis = build_bump_basis(&ones(), &four_level(), 0.5, 0.02, 0, &quad()).unwrap();
        let g = mollify(&four_level(), 0.01).unwrap();
        let f0 = f_vector(&ones(), &g, &basis, &[0.0, 0.0], &quad()).unwrap();
        let direct = residual_vector(&ones(), Some(&g), &quad()).unwrap();
        assert!((f0[0] - direct[0]).norm() < 1e-14);

        let exact = f_vector(&ones(), &four_level(), &basis, &[0.0, 0.0], &quad()).unwrap();
        assert!(exact[0].norm() < 1e-14);

        let mut flat = basis.clone();
        for b in &mut flat.bumps {
            b.amplitude = 0.0;
        }
        let a = f_vector(&ones(), &g, &flat, &[0.0, 0.0], &quad()).unwrap();
        let b = f_vector(&ones(), &g, &flat, &[3.0, -1.0], &quad()).unwrap();
        assert_eq!(a, b);
        assert!(f_vector(&ones(), &g, &basis, &[0.0], &quad()).is_err());
    }

    #[test]
    fn pack_order() {
        assert_eq!(pack(&[Complex64::new(0.0, 0.0)]), vec![0.0, 0.0]);
        assert_eq!(pack(&[Complex64::new(0.0, 1.0)]), vec![1.0, 0.0]);
        assert_eq!(
            pack(&[Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)]),
            vec![2.0, 4.0, 1.0, 3.0]
        );
    }

    #[test]
    fn zero_function_gives_zero_jacobian() {
        let zero = FunctionSet::unit(vec![FunctionSpec::constant(0.0)]).unwrap();
        let basis = CorrectionBasis {
            bumps: vec![Bump::new(0.125, 0.05), Bump::new(0.625, 0.05)],
            eps0: 0.02,
            u: vec![0.0; 2],
            split: 0.5,
            scaled_det: 0.0,
        };
        let jac = jacobian(&zero, &four_level(), &basis, &[0.3, 0.1], &quad()).unwrap();
        assert_eq!(jac.amax(), 0.0);
    }

    #[test]
    fn newton_recovers_mollified_single_function() {
        let step = four_level();
        let eps = 0.02;
        let g = mollify(&step, eps).unwrap();
        let basis = build_bump_basis(&ones(), &step, 0.5, 2.0 * eps, 0, &quad()).unwrap();
        let out = newton_correct(&ones(), &g, &basis, &NewtonOptions::default(), &quad()).unwrap();
        assert!(out.final_norm() < 1e-10);
        assert!(out.iterations >= 1);
        let f = f_vector(&ones(), &g, &basis, &out.u, &quad()).unwrap();
        assert!(f[0].norm() < 1e-10);
    }

    #[test]
    fn newton_on_exact_phase_takes_no_steps() {
        let step = four_level();
        let basis = build_bump_basis(&ones(), &step, 0.5, 0.02, 0, &quad()).unwrap();
        let out =
            newton_correct(&ones(), &step, &basis, &NewtonOptions::default(), &quad()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.u, vec![0.0, 0.0]);
    }

    #[test]
    fn mollification_error_shrinks_with_eps() {
        let step = four_level();
        let basis = build_bump_basis(&ones(), &step, 0.5, 0.1, 0, &quad()).unwrap();
        let mut last = f64::INFINITY;
        for eps in [0.04, 0.02, 0.01] {
            let g = mollify(&step, eps).unwrap();
            let q = norm(&q_vector(&ones(), &g, &basis, &[0.0, 0.0], &quad()).unwrap());
            assert!(q < last, "eps {eps}: {q} >= {last}");
            last = q;
        }
    }
}
