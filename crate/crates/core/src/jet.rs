//! Truncated Taylor arithmetic, used to differentiate the flat-ramp and bump
//! profiles analytically up to fourth order.

use std::ops::{Add, Mul, Neg, Sub};

pub(crate) const JET_ORDER: usize = 4;
const LEN: usize = JET_ORDER + 1;

/// Taylor coefficients `c[k] = f^(k)(x) / k!`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Jet(pub [f64; LEN]);

const FACTORIAL: [f64; LEN] = [1.0, 1.0, 2.0, 6.0, 24.0];

impl Jet {
    pub const ZERO: Jet = Jet([0.0; LEN]);

    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Jet(c)
    }

    /// The affine map `x -> (x - origin) * slope` seeded at `x`.
    pub fn affine(x: f64, origin: f64, slope: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = (x - origin) * slope;
        c[1] = slope;
        Jet(c)
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn derivative(&self, order: usize) -> f64 {
        self.0[order] * FACTORIAL[order]
    }

    pub fn scale(self, s: f64) -> Self {
        Jet(self.0.map(|c| c * s))
    }

    pub fn exp(self) -> Self {
        let mut h = [0.0; LEN];
        h[0] = self.0[0].exp();
        for k in 1..LEN {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.0[j] * h[k - j];
            }
            h[k] = acc / k as f64;
        }
        Jet(h)
    }

    pub fn div(self, rhs: Jet) -> Self {
        let b0 = rhs.0[0];
        let mut q = [0.0; LEN];
        for k in 0..LEN {
            let mut acc = self.0[k];
            for j in 1..=k {
                acc -= rhs.0[j] * q[k - j];
            }
            q[k] = acc / b0;
        }
        Jet(q)
    }

    pub fn recip(self) -> Self {
        Jet::constant(1.0).div(self)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(rhs.0) {
            *a += b;
        }
        Jet(c)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.map(|c| -c))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut c = [0.0; LEN];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate().take(LEN - i) {
                c[i + j] += a * b;
            }
        }
        Jet(c)
    }
}

/// `exp(-1/t)` for `t > 0`, zero otherwise.
fn flat_exp(t: Jet) -> Jet {
    if t.value() <= 0.0 {
        Jet::ZERO
    } else {
        (-t.recip()).exp()
    }
}

/// The C-infinity step `B(t) / (B(t) + B(1 - t))`, `B(t) = exp(-1/t)`.
pub(crate) fn smooth_step(t: Jet) -> Jet {
    if t.value() <= 0.0 {
        return Jet::ZERO;
    }
    if t.value() >= 1.0 {
        return Jet::constant(1.0);
    }
    let left = flat_exp(t);
    let right = flat_exp(Jet::constant(1.0) - t);
    left.div(left + right)
}

pub(crate) fn smooth_step_value(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let left = (-1.0 / t).exp();
        let right = (-1.0 / (1.0 - t)).exp();
        left / (left + right)
    }
}

/// `exp(-1 / (1 - s^2))` on `|s| < 1`, zero outside.
pub(crate) fn bump_profile(s: Jet) -> Jet {
    let v = s.value();
    if v.abs() >= 1.0 {
        return Jet::ZERO;
    }
    let one_minus = Jet::constant(1.0) - s * s;
    (-one_minus.recip()).exp()
}

pub(crate) fn bump_profile_value(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}
