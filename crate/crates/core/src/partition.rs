//! Classical Hobby–Rice breakpoints: `a < α_1 < … < α_r < b` such that
//! `Σ_m (-1)^m ∫_{α_{m-1}}^{α_m} f_j = 0` for every member of the family.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::{effective_rank, FunctionSet};
use crate::quadrature::{integrate, QuadratureOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub interval: [f64; 2],
    pub breakpoints: Vec<f64>,
}

impl Partition {
    pub fn new(interval: [f64; 2], breakpoints: Vec<f64>) -> Result<Self> {
        let p = Self {
            interval,
            breakpoints,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn empty(interval: [f64; 2]) -> Self {
        Self {
            interval,
            breakpoints: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.interval;
        if !(a < b) {
            return Err(Error::invalid("partition interval must satisfy a < b"));
        }
        let mut prev = a;
        for &x in &self.breakpoints {
            if !(x > prev) {
                return Err(Error::invalid(
                    "breakpoints must be strictly increasing inside (a, b)",
                ));
            }
            prev = x;
        }
        if !self.breakpoints.is_empty() && !(prev < b) {
            return Err(Error::invalid("last breakpoint must lie below b"));
        }
        Ok(())
    }

    /// All interval ends: `a, α_1, …, α_r, b`.
    pub fn edges(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(self.len() + 2);
        e.push(self.interval[0]);
        e.extend(&self.breakpoints);
        e.push(self.interval[1]);
        e
    }

    /// Smallest distance between consecutive edges.
    pub fn min_gap(&self) -> f64 {
        self.edges()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionOptions {
    /// Residual target, relative to `max_j ∫|f_j|`.
    pub tol: f64,
    pub seeds: usize,
    pub max_iter: usize,
    pub rank_tol: f64,
    pub seed: u64,
    pub quad: QuadratureOptions,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            seeds: 32,
            max_iter: 60,
            rank_tol: 1e-8,
            seed: 0,
            quad: QuadratureOptions::default(),
        }
    }
}

/// Breakpoints closer than this fraction of the interval are degenerate:
/// such a pair cancels itself and belongs to a shorter partition.
const MIN_RELATIVE_GAP: f64 = 1e-4;

/// `Σ_{m=1}^{r+1} (-1)^m ∫_{α_{m-1}}^{α_m} f_j` for every `j`.
pub fn hr_residual(
    fset: &FunctionSet,
    partition: &Partition,
    quad: &QuadratureOptions,
) -> Result<Vec<f64>> {
    let [a, b] = partition.interval;
    let [da, db] = fset.domain();
    if (a - da).abs() > 1e-12 || (b - db).abs() > 1e-12 {
        return Err(Error::invalid(
            "partition interval differs from the function set's domain",
        ));
    }
    partition.validate()?;
    residual_raw(fset, &partition.breakpoints, quad)
}

fn residual_raw(
    fset: &FunctionSet,
    breakpoints: &[f64],
    quad: &QuadratureOptions,
) -> Result<Vec<f64>> {
    let [a, b] = fset.domain();
    let mut knots = fset.knots();
    knots.extend_from_slice(breakpoints);
    let entries = fset.entries();
    let out = integrate(
        |x, out: &mut [f64]| {
            // interval index i (0-based) carries sign (-1)^(i+1)
            let i = breakpoints.partition_point(|&t| t <= x);
            let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
            for (o, f) in out.iter_mut().zip(entries) {
                *o = sign * f.value(x);
            }
        },
        fset.len(),
        a,
        b,
        &knots,
        quad,
    )?;
    Ok(out.values)
}

/// Cumulative integrals `F_j(x) = ∫_a^x f_j`, cached at the family's knots so
/// that a residual only integrates the two partial panels around each
/// breakpoint. Families of sampled data carry thousands of knots.
struct Antiderivative<'a> {
    fset: &'a FunctionSet,
    edges: Vec<f64>,
    prefix: Vec<Vec<f64>>,
    quad: QuadratureOptions,
}

impl<'a> Antiderivative<'a> {
    fn new(fset: &'a FunctionSet, quad: &QuadratureOptions) -> Result<Self> {
        let [a, b] = fset.domain();
        let mut edges = vec![a];
        edges.extend(fset.knots().into_iter().filter(|&k| k > a && k < b));
        edges.push(b);
        let mut prefix = Vec::with_capacity(edges.len());
        let mut acc = vec![0.0; fset.len()];
        prefix.push(acc.clone());
        let this = Self {
            fset,
            edges,
            prefix: Vec::new(),
            quad: *quad,
        };
        for w in this.edges.windows(2) {
            for (s, v) in acc.iter_mut().zip(this.piece(w[0], w[1])?) {
                *s += v;
            }
            prefix.push(acc.clone());
        }
        Ok(Self { prefix, ..this })
    }

    /// Integral over `[lo, hi]`, which must not straddle a knot, with the
    /// tolerance share proportional to its length.
    fn piece(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let [a, b] = self.fset.domain();
        if hi <= lo {
            return Ok(vec![0.0; self.fset.len()]);
        }
        let quad = QuadratureOptions {
            abs_tol: self.quad.abs_tol * (hi - lo) / (b - a),
            ..self.quad
        };
        let entries = self.fset.entries();
        let out = integrate(
            |x, out: &mut [f64]| {
                for (o, f) in out.iter_mut().zip(entries) {
                    *o = f.value(x);
                }
            },
            self.fset.len(),
            lo,
            hi,
            &[],
            &quad,
        )?;
        Ok(out.values)
    }

    fn at(&self, x: f64) -> Result<Vec<f64>> {
        let k = self
            .edges
            .partition_point(|&e| e <= x)
            .saturating_sub(1)
            .min(self.edges.len() - 2);
        let tail = self.piece(self.edges[k], x)?;
        Ok(self.prefix[k]
            .iter()
            .zip(tail)
            .map(|(p, t)| p + t)
            .collect())
    }

    /// Same quantity as [`hr_residual`].
    fn residual(&self, breakpoints: &[f64]) -> Result<Vec<f64>> {
        let b = self.fset.domain()[1];
        let mut out = vec![0.0; self.fset.len()];
        let mut prev = self.prefix[0].clone();
        for (m, &x) in breakpoints.iter().chain(std::iter::once(&b)).enumerate() {
            let cur = if x == b {
                self.prefix[self.edges.len() - 1].clone()
            } else {
                self.at(x)?
            };
            let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
            for ((o, c), p) in out.iter_mut().zip(&cur).zip(&prev) {
                *o += sign * (c - p);
            }
            prev = cur;
        }
        Ok(out)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn feasible(breaks: &[f64], a: f64, b: f64) -> bool {
    let min_gap = MIN_RELATIVE_GAP * (b - a);
    let mut prev = a;
    for &x in breaks {
        if !(x - prev >= min_gap) {
            return false;
        }
        prev = x;
    }
    b - prev >= min_gap
}

/// Damped Gauss–Newton on the breakpoint system from one starting point.
/// The Jacobian is `∂R_j/∂α_m = 2 (-1)^m f_j(α_m)`.
fn newton_from(
    cumulative: &Antiderivative,
    start: Vec<f64>,
    tol: f64,
    opts: &PartitionOptions,
) -> Result<Option<(Vec<f64>, f64)>> {
    let fset = cumulative.fset;
    let [a, b] = fset.domain();
    let n = fset.len();
    let r = start.len();
    if !feasible(&start, a, b) {
        return Ok(None);
    }
    let mut breaks = start;
    let mut res = cumulative.residual(&breaks)?;
    for _ in 0..opts.max_iter {
        let norm = inf_norm(&res);
        if norm < tol {
            return Ok(Some((breaks, norm)));
        }
        let jac = DMatrix::from_fn(n, r, |j, m| {
            let sign = if m % 2 == 0 { -2.0 } else { 2.0 };
            sign * fset.entries()[j].value(breaks[m])
        });
        let rhs = -DVector::from_column_slice(&res);
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let step = match svd.solve(&rhs, 1e-12 * smax.max(f64::MIN_POSITIVE)) {
            Ok(s) => s,
            Err(_) => return Ok(None),
        };
        let current = sq_norm(&res);
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-6 {
            let trial: Vec<f64> = breaks
                .iter()
                .zip(step.iter())
                .map(|(x, d)| x + lambda * d)
                .collect();
            if feasible(&trial, a, b) {
                let trial_res = cumulative.residual(&trial)?;
                if sq_norm(&trial_res) <= (1.0 - 1e-4 * lambda) * current {
                    breaks = trial;
                    res = trial_res;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Ok(None);
        }
    }
    let norm = inf_norm(&res);
    Ok((norm < tol).then_some((breaks, norm)))
}

fn seeds_for(r: usize, a: f64, b: f64, opts: &PartitionOptions) -> Vec<Vec<f64>> {
    let mut seeds = Vec::with_capacity(opts.seeds.max(1));
    seeds.push(
        (1..=r)
            .map(|m| a + (b - a) * m as f64 / (r + 1) as f64)
            .collect(),
    );
    let mut rng =
        ChaCha8Rng::seed_from_u64(opts.seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    while seeds.len() < opts.seeds.max(1) {
        let mut s: Vec<f64> = (0..r).map(|_| rng.random_range(a..b)).collect();
        s.sort_by(f64::total_cmp);
        seeds.push(s);
    }
    seeds
}

/// Lexicographic comparison on `(residual, breakpoints)`.
fn better(cand: &(Vec<f64>, f64), best: &Option<(Vec<f64>, f64)>) -> bool {
    match best {
        None => true,
        Some((bx, bn)) => match cand.1.total_cmp(bn) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => cand.0 < *bx,
        },
    }
}

/// Finds a breakpoint partition of `fset.domain()` whose alternating
/// integrals all vanish.
///
/// Tries `r = rank, …, n` breakpoints from a deterministic multistart, keeping
/// the smallest `r` that converges (ties: smallest residual, then smallest
/// breakpoints). Falls back to a grid search polished by Newton.
pub fn solve_partition(fset: &FunctionSet, opts: &PartitionOptions) -> Result<Partition> {
    let [a, b] = fset.domain();
    let n = fset.len();
    let scale = fset.l1_norms(&opts.quad)?.into_iter().fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(Partition::empty([a, b]));
    }
    let tol = opts.tol * scale;
    let cumulative = Antiderivative::new(fset, &opts.quad)?;
    let empty = cumulative.residual(&[])?;
    if inf_norm(&empty) < tol {
        return Ok(Partition::empty([a, b]));
    }
    let rank = effective_rank(fset, opts.rank_tol, &opts.quad)?.rank.max(1);

    for r in rank..=n {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for seed in seeds_for(r, a, b, opts) {
            if let Some(found) = newton_from(&cumulative, seed, tol, opts)? {
                if better(&found, &best) {
                    best = Some(found);
                }
            }
        }
        if let Some((breaks, _)) = best {
            return Partition::new([a, b], breaks);
        }
    }

    // Exhaustive grid at the effective rank, then polish.
    let grid_n = ((1e7f64).powf(1.0 / rank as f64).floor() as usize).clamp(rank + 2, 201);
    let coarse = brute_force_partition(fset, rank, grid_n, &opts.quad)?;
    let coarse_res = inf_norm(&hr_residual(fset, &coarse, &opts.quad)?);
    if let Some((breaks, _)) = newton_from(&cumulative, coarse.breakpoints.clone(), tol, opts)? {
        return Partition::new([a, b], breaks);
    }
    Err(Error::PartitionFailure {
        best: coarse,
        residual: coarse_res,
    })
}

/// Exhaustive search over increasing `r`-tuples of interior points of a
/// uniform grid with `grid_n` points (ends included), minimizing the largest
/// residual. Ties keep the lexicographically smallest tuple.
pub fn brute_force_partition(
    fset: &FunctionSet,
    r: usize,
    grid_n: usize,
    quad: &QuadratureOptions,
) -> Result<Partition> {
    if r < 1 {
        return Err(Error::invalid("brute force needs r >= 1"));
    }
    if grid_n < r + 2 {
        return Err(Error::invalid("grid_n must be at least r + 2"));
    }
    let budget = (grid_n as f64).powi(r as i32);
    if budget > 1e7 {
        return Err(Error::Budget(budget));
    }
    let [a, b] = fset.domain();
    let n = fset.len();
    let h = (b - a) / (grid_n - 1) as f64;
    let grid: Vec<f64> = (0..grid_n)
        .map(|i| if i + 1 == grid_n { b } else { a + h * i as f64 })
        .collect();

    // cumulative[i][j] = ∫_a^{grid_i} f_j
    let knots = fset.knots();
    let entries = fset.entries();
    let mut cumulative = vec![vec![0.0; n]; grid_n];
    for i in 1..grid_n {
        let cell = integrate(
            |x, out: &mut [f64]| {
                for (o, f) in out.iter_mut().zip(entries) {
                    *o = f.value(x);
                }
            },
            n,
            grid[i - 1],
            grid[i],
            &knots,
            quad,
        )?;
        cumulative[i] = cumulative[i - 1]
            .iter()
            .zip(&cell.values)
            .map(|(p, v)| p + v)
            .collect();
    }

    struct Search<'a> {
        cumulative: &'a [Vec<f64>],
        last: usize,
        r: usize,
        best: Option<(Vec<usize>, f64)>,
        current: Vec<usize>,
    }

    impl Search<'_> {
        fn score(&self) -> f64 {
            let n = self.cumulative[0].len();
            let mut worst = 0.0f64;
            for j in 0..n {
                let mut total = 0.0;
                let mut prev = 0;
                for (m, &idx) in self
                    .current
                    .iter()
                    .chain(std::iter::once(&self.last))
                    .enumerate()
                {
                    let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
                    total += sign * (self.cumulative[idx][j] - self.cumulative[prev][j]);
                    prev = idx;
                }
                worst = worst.max(total.abs());
            }
            worst
        }

        fn walk(&mut self, from: usize) {
            if self.current.len() == self.r {
                let s = self.score();
                // rounding-level differences count as ties
                if self.best.as_ref().is_none_or(|(_, b)| s < b - 1e-12 * b) {
                    self.best = Some((self.current.clone(), s));
                }
                return;
            }
            let remaining = self.r - self.current.len();
            for i in from..=(self.last - remaining) {
                self.current.push(i);
                self.walk(i + 1);
                self.current.pop();
            }
        }
    }

    let mut search = Search {
        cumulative: &cumulative,
        last: grid_n - 1,
        r,
        best: None,
        current: Vec::with_capacity(r),
    };
    search.walk(1);
    let (idx, _) = search.best.expect("grid admits at least one tuple");
    Partition::new([a, b], idx.into_iter().map(|i| grid[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::FunctionSpec;

    fn unit(entries: Vec<FunctionSpec>) -> FunctionSet {
        FunctionSet::unit(entries).unwrap()
    }

    fn one() -> FunctionSpec {
        FunctionSpec::constant(1.0)
    }

    fn x() -> FunctionSpec {
        FunctionSpec::polynomial(vec![0.0, 1.0])
    }

    #[test]
    fn residual_examples() {
        let q = QuadratureOptions::default();
        let f = unit(vec![one()]);
        let r = hr_residual(&f, &Partition::new([0.0, 1.0], vec![0.5]).unwrap(), &q).unwrap();
        assert!(r[0].abs() < 1e-15);
        let r = hr_residual(
            &f,
            &Partition::new([0.0, 1.0], vec![1.0 / 3.0]).unwrap(),
            &q,
        )
        .unwrap();
        assert!((r[0] - 1.0 / 3.0).abs() < 1e-14);
        let pair = unit(vec![one(), x()]);
        let r = hr_residual(
            &pair,
            &Partition::new([0.0, 1.0], vec![0.25, 0.75]).unwrap(),
            &q,
        )
        .unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new([0.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(Partition::new([0.0, 1.0], vec![1.0]).is_err());
        assert!(Partition::new([0.0, 1.0], vec![0.0]).is_err());
        assert!(Partition::new([0.0, 1.0], vec![]).is_ok());
    }

    #[test]
    fn mismatched_domain_is_rejected() {
        let f = unit(vec![one()]);
        let p = Partition::new([0.0, 0.5], vec![0.25]).unwrap();
        assert!(hr_residual(&f, &p, &Default::default()).is_err());
    }

    #[test]
    fn solves_known_partitions() {
        let opts = PartitionOptions::default();
        let p = solve_partition(&unit(vec![one()]), &opts).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p.breakpoints[0] - 0.5).abs() < 1e-12);

        let p = solve_partition(&unit(vec![one(), x()]), &opts).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p.breakpoints[0] - 0.25).abs() < 1e-9);
        assert!((p.breakpoints[1] - 0.75).abs() < 1e-9);

        let dup = unit(vec![one(), FunctionSpec::constant(2.0)]);
        let p = solve_partition(&dup, &opts).unwrap();
        assert_eq!(p.breakpoints.len(), 1);
        assert!((p.breakpoints[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn subinterval_partition() {
        let f = FunctionSet::new(vec![one()], [0.5, 1.0]).unwrap();
        let p = solve_partition(&f, &PartitionOptions::default()).unwrap();
        assert!((p.breakpoints[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn cached_residual_matches_direct() {
        let ramp = FunctionSpec::sampled(
            vec![0.0, 0.2, 0.3, 0.35, 0.9, 1.0],
            vec![0.0, 0.0, 1.0, -0.5, 2.0, 2.0],
        )
        .unwrap();
        let f = FunctionSet::new(
            vec![
                ramp,
                x(),
                FunctionSpec::trigonometric(0.1, vec![[1.0, -0.3]]),
            ],
            [0.1, 0.95],
        )
        .unwrap();
        let quad = QuadratureOptions::default();
        let cumulative = Antiderivative::new(&f, &quad).unwrap();
        for breaks in [
            vec![],
            vec![0.3],
            vec![0.25, 0.35, 0.5],
            vec![0.2, 0.31, 0.9],
        ] {
            let direct = residual_raw(&f, &breaks, &quad).unwrap();
            let cached = cumulative.residual(&breaks).unwrap();
            for (d, c) in direct.iter().zip(&cached) {
                assert!((d - c).abs() < 1e-12, "{breaks:?}: {d} vs {c}");
            }
        }
    }

    #[test]
    fn zero_family_gets_empty_partition() {
        let f = unit(vec![FunctionSpec::constant(0.0)]);
        let p = solve_partition(&f, &PartitionOptions::default()).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn brute_force_examples() {
        let q = QuadratureOptions::default();
        let p = brute_force_partition(&unit(vec![one()]), 1, 101, &q).unwrap();
        assert!((p.breakpoints[0] - 0.5).abs() < 1e-12);
        let p = brute_force_partition(&unit(vec![one(), x()]), 2, 101, &q).unwrap();
        assert!((p.breakpoints[0] - 0.25).abs() < 1e-12);
        assert!((p.breakpoints[1] - 0.75).abs() < 1e-12);

        // For x - 1/2 a single breakpoint β leaves the residual β - β², so
        // the grid minimizer is the first interior point.
        let odd = unit(vec![FunctionSpec::polynomial(vec![-0.5, 1.0])]);
        let p = brute_force_partition(&odd, 1, 101, &q).unwrap();
        assert!((p.breakpoints[0] - 0.01).abs() < 1e-12);
        let r = hr_residual(&odd, &p, &q).unwrap();
        assert!((r[0] - (0.01 - 0.0001)).abs() < 1e-12);
    }

    #[test]
    fn brute_force_guards() {
        let q = QuadratureOptions::default();
        let f = unit(vec![one()]);
        assert!(matches!(
            brute_force_partition(&f, 4, 101, &q),
            Err(Error::Budget(_))
        ));
        assert!(brute_force_partition(&f, 0, 101, &q).is_err());
        assert!(brute_force_partition(&f, 3, 4, &q).is_err());
    }
}
