//! Outward-rounded interval arithmetic over `f64`.
//!
//! Every primitive widens its result by one ulp in each direction, which
//! covers the half-ulp error of round-to-nearest (and the few-ulp error of
//! the libm transcendental functions after the extra widening applied
//! there).

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

pub type IntervalBox = Vec<Interval>;

fn down(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x.next_down()
    }
}

fn up(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x.next_up()
    }
}

// Directed rounding for sums and products: the exact rounding error is
// recovered (TwoSum / fma), so results that were computed exactly are not
// widened.
fn sum_error(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    let e = sum_error(a, b, s);
    if s.is_finite() && e >= 0.0 { s } else { down(s) }
}

fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    let e = sum_error(a, b, s);
    if s.is_finite() && e <= 0.0 { s } else { up(s) }
}

fn product_error(a: f64, b: f64, p: f64) -> f64 {
    a.mul_add(b, -p)
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Interval {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Interval {
        Interval { lo: x, hi: x }
    }

    pub fn symmetric(r: f64) -> Interval {
        Interval::new(-r, r)
    }

    /// Tightest enclosure of an exact rational.
    pub fn from_rational(q: &Rational) -> Interval {
        let f = q.to_f64().unwrap_or(f64::NAN);
        if !f.is_finite() {
            return if q.is_zero() {
                Interval::point(0.0)
            } else if *q > Rational::zero() {
                Interval::new(f64::MAX, f64::INFINITY)
            } else {
                Interval::new(f64::NEG_INFINITY, f64::MIN)
            };
        }
        match Rational::from_float(f) {
            Some(exact) if exact == *q => Interval::point(f),
            _ => Interval::new(f.next_down(), f.next_up()),
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        if self.lo.is_infinite() || self.hi.is_infinite() {
            if self.lo.is_infinite() && self.hi.is_infinite() {
                return 0.0;
            }
            return if self.lo.is_infinite() {
                self.hi.min(0.0) - 1.0
            } else {
                self.lo.max(0.0) + 1.0
            };
        }
        let m = 0.5 * self.lo + 0.5 * self.hi;
        m.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn scale(&self, k: f64) -> Interval {
        Interval::point(k) * *self
    }

    pub fn split(&self) -> (Interval, Interval) {
        let m = self.mid();
        (Interval::new(self.lo, m), Interval::new(m, self.hi))
    }

    pub fn powi(&self, n: u32) -> Interval {
        match n {
            0 => Interval::point(1.0),
            1 => *self,
            _ => {
                let pow_lo = |x: f64| down(x.powi(n as i32)).max(if n % 2 == 0 { 0.0 } else { f64::NEG_INFINITY });
                let pow_hi = |x: f64| up(x.powi(n as i32));
                if n % 2 == 1 {
                    Interval {
                        lo: down(self.lo.powi(n as i32)),
                        hi: pow_hi(self.hi),
                    }
                } else if self.lo >= 0.0 {
                    Interval {
                        lo: pow_lo(self.lo),
                        hi: pow_hi(self.hi),
                    }
                } else if self.hi <= 0.0 {
                    Interval {
                        lo: pow_lo(self.hi),
                        hi: pow_hi(self.lo),
                    }
                } else {
                    Interval {
                        lo: 0.0,
                        hi: pow_hi(self.lo.abs().max(self.hi)),
                    }
                }
            }
        }
    }

    pub fn cos(&self) -> Interval {
        if *self == Interval::point(0.0) {
            return Interval::point(1.0);
        }
        trig_enclosure(*self, f64::cos, 0.0)
    }

    pub fn sin(&self) -> Interval {
        if *self == Interval::point(0.0) {
            return *self;
        }
        // sin attains its maximum at pi/2 + 2k pi, i.e. where cos(x - pi/2) does.
        trig_enclosure(*self, f64::sin, FRAC_PI_2)
    }

    pub fn exp(&self) -> Interval {
        if *self == Interval::point(0.0) {
            return Interval::point(1.0);
        }
        Interval {
            lo: down(down(self.lo.exp())).max(0.0),
            hi: up(up(self.hi.exp())),
        }
    }

    /// Natural log restricted to the positive part of `self`. Returns `None`
    /// when no point of `self` is in the domain; the flag reports clipping.
    pub fn ln(&self) -> Option<(Interval, bool)> {
        if self.hi <= 0.0 {
            return None;
        }
        if *self == Interval::point(1.0) {
            return Some((Interval::point(0.0), false));
        }
        let clipped = self.lo <= 0.0;
        let lo = if clipped {
            f64::NEG_INFINITY
        } else {
            down(down(self.lo.ln()))
        };
        Some((
            Interval {
                lo,
                hi: up(up(self.hi.ln())),
            },
            clipped,
        ))
    }
}

/// Enclosure of a shifted cosine: `f(x) = cos(x - shift)` on `iv`, with `f`
/// evaluated directly for the endpoints.
fn trig_enclosure(iv: Interval, f: fn(f64) -> f64, shift: f64) -> Interval {
    if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.width() >= 2.0 * PI {
        return Interval::new(-1.0, 1.0);
    }
    let (fa, fb) = (f(iv.lo), f(iv.hi));
    let mut lo = down(down(fa.min(fb))).max(-1.0);
    let mut hi = up(up(fa.max(fb))).min(1.0);
    // Extrema of cos(x - shift) sit at x = shift + j pi; j even gives +1,
    // j odd gives -1. The slack makes the containment test conservative.
    let first = ((iv.lo - shift) / PI - 1e-9).ceil() as i64;
    let last = ((iv.hi - shift) / PI + 1e-9).floor() as i64;
    for j in first..=last {
        if j.rem_euclid(2) == 0 {
            hi = 1.0;
        } else {
            lo = -1.0;
        }
    }
    Interval { lo, hi }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, rhs.lo),
            hi: add_up(self.hi, rhs.hi),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, -rhs.hi),
            hi: add_up(self.hi, -rhs.lo),
        }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

// 0 * inf is taken as 0, the limit relevant for bounds.
fn mul_bound(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let pairs = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in pairs {
            let p = mul_bound(a, b);
            let (l, h) = if p == 0.0 {
                (0.0, 0.0)
            } else if !p.is_finite() || p.abs() < f64::MIN_POSITIVE {
                // Overflow or subnormal range: fma error is not reliable.
                (down(p), up(p))
            } else {
                let e = product_error(a, b, p);
                (if e >= 0.0 { p } else { down(p) }, if e <= 0.0 { p } else { up(p) })
            };
            lo = lo.min(l);
            hi = hi.max(h);
        }
        Interval { lo, hi }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_power_keeps_sign() {
        let x = Interval::new(-1.0, 2.0);
        let sq = x.powi(2);
        assert_eq!(sq.lo, 0.0);
        assert!(sq.hi >= 4.0 && sq.hi < 4.0 + 1e-12);
    }

    #[test]
    fn cos_over_zero_to_four_contains_min() {
        let c = Interval::new(0.0, 4.0).cos();
        assert_eq!(c.lo, -1.0);
        assert_eq!(c.hi, 1.0);
    }

    #[test]
    fn sin_small_interval_is_tight() {
        let s = Interval::new(0.1, 0.2).sin();
        assert!(s.lo <= 0.1f64.sin() && s.hi >= 0.2f64.sin());
        assert!(s.hi < 0.21);
    }

    #[test]
    fn sin_peak_included() {
        let s = Interval::new(1.0, 2.0).sin();
        assert_eq!(s.hi, 1.0);
        assert!(s.lo <= 1.0f64.sin().min(2.0f64.sin()));
    }

    #[test]
    fn log_domain() {
        assert!(Interval::new(-2.0, -1.0).ln().is_none());
        let (iv, clipped) = Interval::new(-1.0, 1.0).ln().unwrap();
        assert!(clipped);
        assert!(iv.hi >= 0.0);
    }

    #[test]
    fn rational_enclosure_exact_when_dyadic() {
        let q = Rational::new(3.into(), 4.into());
        assert_eq!(Interval::from_rational(&q), Interval::point(0.75));
        let third = Rational::new(1.into(), 3.into());
        let iv = Interval::from_rational(&third);
        assert!(iv.lo < 1.0 / 3.0 + 1e-17 && iv.hi > 1.0 / 3.0 - 1e-17 && iv.lo < iv.hi);
    }

    #[test]
    fn mul_with_infinity() {
        let a = Interval::new(0.0, f64::INFINITY);
        let b = Interval::new(-1.0, 1.0);
        let p = a * b;
        assert_eq!(p.lo, f64::NEG_INFINITY);
        assert_eq!(p.hi, f64::INFINITY);
    }
}
