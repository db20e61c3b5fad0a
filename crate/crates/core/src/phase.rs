//! Step phases and their C-infinity mollifications.
//!
//! A [`StepPhase`] takes the four values `0, π, π/2, 3π/2`, so its multiplier
//! is `±1` left of the split point and `±i` right of it. [`mollify`] replaces
//! every jump (including the implicit jumps from 0 at both ends) by a flat ramp
//! `a + (b - a) ψ((x - x0)/(x1 - x0))`, `ψ(t) = B(t)/(B(t) + B(1 - t))`,
//! `B(t) = exp(-1/t)`, which has every derivative zero at both ends. Plain
//! concatenation of levels and ramps is therefore C-infinity.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corrector::Bump;
use crate::error::{Error, Result};
use crate::jet::{smooth_step, smooth_step_value, Jet, JET_ORDER};
use crate::partition::Partition;
use crate::quadrature::merge_knots;

/// Anything that can serve as the phase `g` in `∫ f e^{i g}`.
pub trait Phase {
    fn value(&self, x: f64) -> f64;
    /// Points where `g` may fail to be smooth (or changes formula).
    fn knots(&self) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPhase {
    /// Interval ends, `0 = k_0 < k_1 < … < k_K = 1`.
    pub knots: Vec<f64>,
    /// `levels[i]` holds on `[k_i, k_{i+1})`.
    pub levels: Vec<f64>,
}

impl StepPhase {
    pub fn new(knots: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if knots.len() != levels.len() + 1 || levels.is_empty() {
            return Err(Error::invalid("step phase needs one level per interval"));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("step knots must be strictly increasing"));
        }
        Ok(Self { knots, levels })
    }

    pub fn min_gap(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the interval containing `x` (right-continuous).
    pub fn interval_of(&self, x: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= x);
        i.saturating_sub(1).min(self.levels.len() - 1)
    }
}

impl Phase for StepPhase {
    fn value(&self, x: f64) -> f64 {
        self.levels[self.interval_of(x)]
    }

    fn knots(&self) -> Vec<f64> {
        self.knots.clone()
    }
}

/// Builds the four-level step phase from Hobby–Rice partitions of `[a, p]`
/// and `[p, b]`.
///
/// On the left the `m`-th interval `[α_m, α_{m+1})` gets `π` for even `m` and
/// `0` for odd `m`; on the right `[β_m, β_{m+1})` gets `3π/2` for even `m` and
/// `π/2` for odd `m`. The multiplier therefore reproduces the sign pattern
/// `(-1)^{m+1}` on the left and `i (-1)^{m+1}` on the right.
pub fn build_g0(left: &Partition, right: &Partition) -> Result<StepPhase> {
    let p = left.interval[1];
    if (right.interval[0] - p).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "partitions do not share the split point ({} vs {})",
            p, right.interval[0]
        )));
    }
    let mut knots = left.edges();
    knots.pop();
    let mut levels: Vec<f64> = (0..=left.len())
        .map(|m| if m % 2 == 0 { PI } else { 0.0 })
        .collect();
    knots.extend(right.edges());
    levels.extend((0..=right.len()).map(|m| if m % 2 == 0 { 1.5 * PI } else { 0.5 * PI }));
    StepPhase::new(knots, levels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Level,
    Ramp,
}

/// A constant (`from == to`) or a flat ramp from `from` to `to` on `[x0, x1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(rename = "type")]
    pub kind: SegmentKind,
    pub from: f64,
    pub to: f64,
    pub x0: f64,
    pub x1: f64,
}

impl Segment {
    pub fn level(value: f64, x0: f64, x1: f64) -> Self {
        Self {
            kind: SegmentKind::Level,
            from: value,
            to: value,
            x0,
            x1,
        }
    }

    pub fn ramp(from: f64, to: f64, x0: f64, x1: f64) -> Self {
        Self {
            kind: SegmentKind::Ramp,
            from,
            to,
            x0,
            x1,
        }
    }

    fn value(&self, x: f64) -> f64 {
        match self.kind {
            SegmentKind::Level => self.from,
            SegmentKind::Ramp => {
                let t = (x - self.x0) / (self.x1 - self.x0);
                self.from + (self.to - self.from) * smooth_step_value(t)
            }
        }
    }

    fn jet(&self, x: f64) -> Jet {
        match self.kind {
            SegmentKind::Level => Jet::constant(self.from),
            SegmentKind::Ramp => {
                let t = Jet::affine(x, self.x0, 1.0 / (self.x1 - self.x0));
                Jet::constant(self.from) + smooth_step(t).scale(self.to - self.from)
            }
        }
    }
}

/// Bump-basis correction `Σ u_k h_k` carried by a phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub bumps: Vec<Bump>,
    pub u: Vec<f64>,
}

impl Correction {
    fn value(&self, x: f64) -> f64 {
        self.bumps
            .iter()
            .zip(&self.u)
            .map(|(b, u)| if *u == 0.0 { 0.0 } else { u * b.value(x) })
            .sum()
    }
}

/// Compactly supported smooth phase: tiled level/ramp segments plus a bump
/// correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothPhase {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub correction: Correction,
    /// Ramp half-width used by the mollification.
    pub epsilon: f64,
}

impl SmoothPhase {
    /// `g ≡ 0` on `[a, b]`.
    pub fn zero_on(a: f64, b: f64) -> Self {
        Self {
            segments: vec![Segment::level(0.0, a, b)],
            correction: Correction::default(),
            epsilon: 0.0,
        }
    }

    pub fn zero() -> Self {
        Self::zero_on(0.0, 1.0)
    }

    pub fn domain(&self) -> [f64; 2] {
        [
            self.segments[0].x0,
            self.segments[self.segments.len() - 1].x1,
        ]
    }

    fn segment_index(&self, x: f64) -> usize {
        let i = self.segments.partition_point(|s| s.x0 <= x);
        i.saturating_sub(1)
    }

    /// The mollified base without its correction term.
    pub fn base_value(&self, x: f64) -> f64 {
        self.segments[self.segment_index(x)].value(x)
    }

    /// `g^(order)(x)`, correction included, for `order ≤ 4`.
    pub fn derivative(&self, x: f64, order: usize) -> f64 {
        self.jet(x).derivative(order)
    }

    fn jet(&self, x: f64) -> Jet {
        let mut j = self.segments[self.segment_index(x)].jet(x);
        for (b, u) in self.correction.bumps.iter().zip(&self.correction.u) {
            if *u != 0.0 {
                j = j + b.jet(x).scale(*u);
            }
        }
        j
    }

    /// Attach (replace) the correction `Σ u_k h_k`.
    pub fn with_correction(mut self, bumps: Vec<Bump>, u: Vec<f64>) -> Self {
        self.correction = Correction { bumps, u };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::invalid("phase has no segments"));
        }
        for w in self.segments.windows(2) {
            if (w[0].x1 - w[1].x0).abs() > 1e-12 {
                return Err(Error::invalid("phase segments leave a gap or overlap"));
            }
        }
        if self.segments.iter().any(|s| !(s.x1 > s.x0)) {
            return Err(Error::invalid("phase segment with non-positive length"));
        }
        if self.correction.bumps.len() != self.correction.u.len() {
            return Err(Error::invalid("correction needs one coefficient per bump"));
        }
        Ok(())
    }

    /// The phase of `[0, 1]` transported to `[a, b]` by `x ↦ a + (b - a) x`.
    pub fn affine_image(&self, a: f64, b: f64) -> Self {
        let s = b - a;
        let map = |x: f64| a + s * x;
        Self {
            segments: self
                .segments
                .iter()
                .map(|seg| Segment {
                    x0: map(seg.x0),
                    x1: map(seg.x1),
                    ..seg.clone()
                })
                .collect(),
            correction: Correction {
                bumps: self
                    .correction
                    .bumps
                    .iter()
                    .map(|bump| Bump {
                        center: map(bump.center),
                        half_width: s * bump.half_width,
                        amplitude: bump.amplitude,
                    })
                    .collect(),
                u: self.correction.u.clone(),
            },
            epsilon: self.epsilon * s,
        }
    }

    /// Joins a phase on `[a, q]` with one on `[q, b]`.
    pub fn concat(left: &SmoothPhase, right: &SmoothPhase) -> Result<Self> {
        if (left.domain()[1] - right.domain()[0]).abs() > 1e-12 {
            return Err(Error::invalid("phases to concatenate do not meet"));
        }
        let mut segments = left.segments.clone();
        segments.extend(right.segments.iter().cloned());
        segments.last_mut().unwrap().x1 = right.domain()[1];
        let mut bumps = left.correction.bumps.clone();
        bumps.extend(right.correction.bumps.iter().cloned());
        let mut u = left.correction.u.clone();
        u.extend(&right.correction.u);
        let eps = match (left.epsilon > 0.0, right.epsilon > 0.0) {
            (true, true) => left.epsilon.min(right.epsilon),
            (true, false) => left.epsilon,
            _ => right.epsilon,
        };
        let phase = Self {
            segments,
            correction: Correction { bumps, u },
            epsilon: eps,
        };
        phase.validate()?;
        Ok(phase)
    }

    /// `-g`.
    pub fn negated(&self) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    from: -s.from,
                    to: -s.to,
                    ..s.clone()
                })
                .collect(),
            correction: Correction {
                bumps: self.correction.bumps.clone(),
                u: self.correction.u.iter().map(|u| -u).collect(),
            },
            epsilon: self.epsilon,
        }
    }

    /// Whether `g` vanishes identically near both ends, and on how much.
    pub fn support_margins(&self) -> Option<(f64, f64)> {
        let first = &self.segments[0];
        let last = &self.segments[self.segments.len() - 1];
        let zero_level = |s: &Segment| s.kind == SegmentKind::Level && s.from == 0.0;
        if !zero_level(first) || !zero_level(last) {
            return None;
        }
        let [a, b] = self.domain();
        let lo = first.x1;
        let hi = last.x0;
        if self
            .correction
            .bumps
            .iter()
            .zip(&self.correction.u)
            .any(|(bump, u)| {
                *u != 0.0
                    && (bump.center - bump.half_width < lo || bump.center + bump.half_width > hi)
            })
        {
            return None;
        }
        Some((lo - a, b - hi))
    }

    /// Largest relative jump of derivatives `0..=4` across segment and bump
    /// boundaries, comparing one-sided analytic values and a central finite
    /// difference of the next-lower derivative.
    pub fn continuity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.segments.windows(2) {
            let x = w[0].x1;
            let (l, r) = (w[0].jet(x), w[1].jet(x));
            for k in 0..=JET_ORDER {
                let (a, b) = (l.derivative(k), r.derivative(k));
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
            }
        }
        let mut points: Vec<f64> = self.segments.iter().skip(1).map(|s| s.x0).collect();
        for b in &self.correction.bumps {
            points.push(b.center - b.half_width);
            points.push(b.center + b.half_width);
        }
        let [lo, hi] = self.domain();
        let h = 1e-6 * self.epsilon.clamp(1e-3, 1.0);
        for x in points {
            if x - h <= lo || x + h >= hi {
                continue;
            }
            let here = self.jet(x);
            for k in 1..=JET_ORDER {
                let fd = (self.jet(x + h).derivative(k - 1) - self.jet(x - h).derivative(k - 1))
                    / (2.0 * h);
                let an = here.derivative(k);
                // a jump in g^(k-1) makes the difference quotient blow up like 1/h
                worst = worst.max((fd - an).abs() / an.abs().max(1.0) * h);
            }
        }
        worst
    }

    /// Dense samples `x,g,re_exp,im_exp` at `n` uniform points of the domain.
    pub fn samples_csv(&self, n: usize) -> String {
        let [a, b] = self.domain();
        let mut out = String::from("x,g,re_exp,im_exp\n");
        let n = n.max(2);
        for i in 0..n {
            let x = if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            };
            let g = self.value(x);
            let _ = writeln!(out, "{},{},{},{}", x, g, g.cos(), g.sin());
        }
        out
    }

    /// Dense samples `x,g,dg` at `n` uniform points of the domain.
    pub fn derivative_csv(&self, n: usize) -> String {
        let [a, b] = self.domain();
        let mut out = String::from("x,g,dg\n");
        let n = n.max(2);
        for i in 0..n {
            let x = if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            };
            let j = self.jet(x);
            let _ = writeln!(out, "{},{},{}", x, j.value(), j.derivative(1));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("phase serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: SmoothPhase =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("phase JSON: {e}")))?;
        p.validate()?;
        Ok(p)
    }
}

impl Phase for SmoothPhase {
    fn value(&self, x: f64) -> f64 {
        self.base_value(x) + self.correction.value(x)
    }

    fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.segments.iter().map(|s| s.x0).collect();
        k.push(self.domain()[1]);
        for (b, u) in self.correction.bumps.iter().zip(&self.correction.u) {
            if *u != 0.0 {
                k.push(b.center - b.half_width);
                k.push(b.center + b.half_width);
            }
        }
        merge_knots(k)
    }
}

/// `g` or one of its first four derivatives at `x`.
pub fn eval_phase(phase: &SmoothPhase, x: f64, order: usize) -> Result<f64> {
    let [a, b] = phase.domain();
    if !(a..=b).contains(&x) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            lo: a,
            hi: b,
        });
    }
    if order > JET_ORDER {
        return Err(Error::invalid(format!(
            "derivative order {order} exceeds {JET_ORDER}"
        )));
    }
    Ok(if order == 0 {
        phase.value(x)
    } else {
        phase.derivative(x, order)
    })
}

/// Replaces every jump of `step` by a flat ramp of half-width `eps`.
///
/// Interior jumps at `k` ramp over `[k - eps, k + eps]`. At the two ends the
/// phase starts and finishes at 0: `Level(0)` on `[a, a + eps/2]`, then a ramp
/// to the first level on `[a + eps/2, a + 3eps/2]`, mirrored at `b`.
pub fn mollify(step: &StepPhase, eps: f64) -> Result<SmoothPhase> {
    let k = &step.knots;
    let levels = &step.levels;
    let count = levels.len();
    let (a, b) = (k[0], k[count]);
    let delta = 0.5 * eps;
    let edge = delta + eps;
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    // Room needed inside each interval: ramps eat eps at interior knots and
    // 3eps/2 at the ends.
    for i in 0..count {
        let left_use = if i == 0 { edge } else { eps };
        let right_use = if i + 1 == count { edge } else { eps };
        if k[i + 1] - k[i] <= left_use + right_use {
            return Err(Error::invalid(format!(
                "eps = {eps} too large for interval [{}, {}]",
                k[i],
                k[i + 1]
            )));
        }
    }
    let mut segments = vec![
        Segment::level(0.0, a, a + delta),
        Segment::ramp(0.0, levels[0], a + delta, a + edge),
    ];
    for i in 0..count {
        let start = if i == 0 { a + edge } else { k[i] + eps };
        let end = if i + 1 == count {
            b - edge
        } else {
            k[i + 1] - eps
        };
        segments.push(Segment::level(levels[i], start, end));
        if i + 1 < count {
            segments.push(Segment::ramp(levels[i], levels[i + 1], end, k[i + 1] + eps));
        }
    }
    segments.push(Segment::ramp(levels[count - 1], 0.0, b - edge, b - delta));
    segments.push(Segment::level(0.0, b - delta, b));
    let phase = SmoothPhase {
        segments,
        correction: Correction::default(),
        epsilon: eps,
    };
    phase.validate()?;
    Ok(phase)
}
