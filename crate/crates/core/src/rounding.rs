//! Rational recovery of float coefficients and the coarse-to-fine precision
//! ladder that turns a float classifier into candidate rational polynomials.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::polynomial::{FloatPoly, PolyError, RatPoly};
use crate::Rational;

/// Recovered coefficients with a larger denominator make the rung unusable.
pub const DENOMINATOR_CAP: u64 = 1_000_000;

/// Relative threshold below which float coefficients are treated as noise.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionLadder {
    tolerances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("ladder tolerances must be positive and strictly decreasing")]
pub struct LadderError;

impl PrecisionLadder {
    pub fn new(tolerances: Vec<f64>) -> Result<PrecisionLadder, LadderError> {
        let positive = tolerances.iter().all(|t| *t > 0.0 && t.is_finite());
        let decreasing = tolerances.windows(2).all(|w| w[0] > w[1]);
        if tolerances.is_empty() || !positive || !decreasing {
            return Err(LadderError);
        }
        Ok(PrecisionLadder { tolerances })
    }

    pub fn tolerances(&self) -> &[f64] {
        &self.tolerances
    }
}

impl Default for PrecisionLadder {
    fn default() -> Self {
        PrecisionLadder {
            tolerances: vec![0.5, 1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-9],
        }
    }
}

/// The rational with the smallest denominator within `tol` of `f`.
///
/// That rational is always a convergent or semiconvergent of the continued
/// fraction of `f`; it is found by walking the continued fraction of the
/// interval `[f - tol, f + tol]` with exact arithmetic.
pub fn recover_rational(f: f64, tol: f64) -> Rational {
    assert!(f.is_finite() && tol > 0.0, "recover_rational needs finite f and tol > 0");
    let x = Rational::from_float(f).expect("finite");
    let t = Rational::from_float(tol).expect("finite");
    simplest_between(&(&x - &t), &(&x + &t))
}

/// Simplest rational (smallest denominator, then smallest magnitude) in
/// the closed interval `[lo, hi]`.
pub fn simplest_between(lo: &Rational, hi: &Rational) -> Rational {
    debug_assert!(lo <= hi);
    if !lo.is_positive() && !hi.is_negative() {
        return Rational::zero();
    }
    if hi.is_negative() {
        return -simplest_positive(&-hi, &-lo);
    }
    simplest_positive(lo, hi)
}

fn simplest_positive(lo: &Rational, hi: &Rational) -> Rational {
    // Continued-fraction terms shared by both endpoints, then the smallest
    // admissible next term; rebuilt bottom-up.
    let mut terms: Vec<BigInt> = Vec::new();
    let (mut lo, mut hi) = (lo.clone(), hi.clone());
    loop {
        let fl = lo.floor();
        if fl == lo {
            terms.push(fl.to_integer());
            break;
        }
        let next = &fl + Rational::one();
        if next <= hi {
            terms.push(next.to_integer());
            break;
        }
        terms.push(fl.to_integer());
        let (nlo, nhi) = ((&hi - &fl).recip(), (&lo - &fl).recip());
        lo = nlo;
        hi = nhi;
    }
    let mut acc = Rational::from_integer(terms.pop().expect("at least one term"));
    while let Some(a) = terms.pop() {
        acc = Rational::from_integer(a) + acc.recip();
    }
    acc
}

/// Candidate rational polynomials for `p`, coarsest first, each a positive
/// multiple of a primitive integer polynomial (the sign of `p` is kept). Rungs whose
/// recovery exceeds the denominator cap or collapses to zero are skipped,
/// and consecutive duplicates are merged (keeping the coarser tolerance).
pub fn round_ladder(p: &FloatPoly, ladder: &PrecisionLadder) -> Result<Vec<(RatPoly, f64)>, PolyError> {
    let p = p.drop_noise(NOISE_FLOOR);
    let scale = p.max_abs_coeff();
    if p.is_zero() || !(scale > 0.0) || !scale.is_finite() {
        return Err(PolyError::ZeroPolynomial);
    }
    let mut out: Vec<(RatPoly, f64)> = Vec::new();
    for &tol in ladder.tolerances() {
        let Some(q) = round_at(&p, scale, tol) else { continue };
        // Primitive integer form, but with the classifier's sign kept.
        let Ok((normal, flipped)) = q.normalize() else { continue };
        let normal = if flipped { normal.neg() } else { normal };
        if out.last().is_some_and(|(prev, _)| *prev == normal) {
            continue;
        }
        out.push((normal, tol));
    }
    Ok(out)
}

/// `p / scale` with every coefficient recovered at `tol`; `None` when a
/// denominator exceeds the cap.
pub fn round_at(p: &FloatPoly, scale: f64, tol: f64) -> Option<RatPoly> {
    let cap = BigInt::from(DENOMINATOR_CAP);
    let mut terms = Vec::with_capacity(p.len());
    for (m, c) in p.terms() {
        let q = recover_rational(c / scale, tol);
        if *q.denom() > cap {
            return None;
        }
        terms.push((m.clone(), q));
    }
    Some(RatPoly::from_terms(p.nvars(), terms))
}

/// Fraction of `points` on which `candidate` and `reference` agree in sign.
pub fn sign_agreement(candidate: &RatPoly, reference: &FloatPoly, points: &[Vec<f64>]) -> usize {
    points
        .iter()
        .filter(|pt| {
            let a = candidate.eval_f64(pt);
            let b = reference.eval_f64(pt);
            a.signum() == b.signum() && a != 0.0 && b != 0.0
        })
        .count()
}

/// Largest denominator among the coefficients, as `f64` for reporting.
pub fn max_denominator(p: &RatPoly) -> f64 {
    p.terms()
        .map(|(_, c)| c.denom().to_f64().unwrap_or(f64::INFINITY))
        .fold(1.0, f64::max)
}
