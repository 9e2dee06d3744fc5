//! Multivariate polynomials over the common variables, the monomial
//! feature map of the polynomial kernel, and symbolic expansion of a
//! kernel classifier into a single polynomial.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Neg;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::formula::{Expr, Formula, Interval, Rel};
use crate::svm::KernelParams;
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("zero polynomial")]
    ZeroPolynomial,
}

/// Exponent vector; ordered graded-lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(n: usize) -> Monomial {
        Monomial(vec![0; n])
    }

    pub fn var(n: usize, i: usize) -> Monomial {
        let mut e = vec![0; n];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }

    /// True when every exponent is even, so the monomial is nonnegative.
    pub fn is_even(&self) -> bool {
        self.0.iter().all(|e| e % 2 == 0)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Coefficient ring for [`Poly`].
pub trait Coeff: Clone + Num + Neg<Output = Self> + PartialOrd {}
impl<T: Clone + Num + Neg<Output = T> + PartialOrd> Coeff for T {}

#[derive(Debug, Clone, PartialEq)]
pub struct Poly<C> {
    nvars: usize,
    terms: BTreeMap<Monomial, C>,
}

pub type RatPoly = Poly<Rational>;
pub type FloatPoly = Poly<f64>;

impl<C: Coeff> Poly<C> {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(Monomial::var(nvars, i), C::one());
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, C)>) -> Self {
        let mut p = Poly::zero(nvars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Leading term under graded-lex order.
    pub fn leading(&self) -> Option<(&Monomial, &C)> {
        self.terms.iter().next_back()
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&Monomial::one(self.nvars))
    }

    pub fn add_term(&mut self, m: Monomial, c: C) {
        debug_assert_eq!(m.0.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().clone() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Poly::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn scale(&self, k: &C) -> Self {
        Poly::from_terms(
            self.nvars,
            self.terms.iter().map(|(m, c)| (m.clone(), c.clone() * k.clone())),
        )
    }

    pub fn neg(&self) -> Self {
        self.scale(&-C::one())
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Poly::constant(self.nvars, C::one());
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Direct evaluation (sum of coefficient times monomial value).
    pub fn eval(&self, point: &[C]) -> C {
        let mut total = C::zero();
        for (m, c) in &self.terms {
            let mut v = c.clone();
            for (e, x) in m.0.iter().zip(point) {
                for _ in 0..*e {
                    v = v * x.clone();
                }
            }
            total = total + v;
        }
        total
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        Poly::from_terms(self.nvars, self.terms.iter().map(|(m, c)| (m.clone(), f(c))))
    }

    /// Substitutes `var := with` (a polynomial over the same variables).
    pub fn substitute(&self, var: usize, with: &Self) -> Self {
        let mut powers: Vec<Self> = vec![Poly::constant(self.nvars, C::one())];
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[var] as usize;
            while powers.len() <= e {
                let next = powers.last().expect("nonempty").mul(with);
                powers.push(next);
            }
            let mut rest = m.clone();
            rest.0[var] = 0;
            let term = Poly::from_terms(self.nvars, [(rest, c.clone())]);
            out = out.add(&term.mul(&powers[e]));
        }
        out
    }

    /// Degree of `var` across all terms.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m.0[var]).max().unwrap_or(0)
    }

    pub fn uses_var(&self, var: usize) -> bool {
        self.degree_in(var) > 0
    }

    /// Re-embeds the polynomial into `nvars_new` variables via `map`.
    pub fn remap(&self, nvars_new: usize, map: impl Fn(usize) -> usize) -> Self {
        Poly::from_terms(
            nvars_new,
            self.terms.iter().map(|(m, c)| {
                let mut e = vec![0; nvars_new];
                for (i, &k) in m.0.iter().enumerate() {
                    if k > 0 {
                        e[map(i)] += k;
                    }
                }
                (Monomial(e), c.clone())
            }),
        )
    }
}

impl Poly<f64> {
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval_f64(point)).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Drops coefficients below `rel * max|coefficient|`.
    pub fn drop_noise(&self, rel: f64) -> Self {
        let floor = rel * self.max_abs_coeff();
        Poly::from_terms(
            self.nvars,
            self.terms
                .iter()
                .filter(|(_, c)| c.abs() >= floor)
                .map(|(m, c)| (m.clone(), *c)),
        )
    }
}

impl Poly<Rational> {
    pub fn to_float(&self) -> FloatPoly {
        self.map_coeffs(|c| c.to_f64().unwrap_or(f64::NAN))
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c.to_f64().unwrap_or(f64::NAN) * m.eval_f64(point))
            .sum()
    }

    pub fn max_abs_coeff(&self) -> Rational {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Converts a transcendental-free expression over `nvars` variables.
    pub fn from_expr(e: &Expr, nvars: usize) -> Option<RatPoly> {
        Some(match e {
            Expr::Var(i) => Poly::var(nvars, *i),
            Expr::Const(q) => Poly::constant(nvars, q.clone()),
            Expr::Add(a, b) => Self::from_expr(a, nvars)?.add(&Self::from_expr(b, nvars)?),
            Expr::Sub(a, b) => Self::from_expr(a, nvars)?.sub(&Self::from_expr(b, nvars)?),
            Expr::Mul(a, b) => Self::from_expr(a, nvars)?.mul(&Self::from_expr(b, nvars)?),
            Expr::Pow(a, n) => Self::from_expr(a, nvars)?.pow(*n),
            Expr::Neg(a) => Self::from_expr(a, nvars)?.neg(),
            Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) | Expr::Log(_) => return None,
        })
    }

    /// Expression in sum-of-terms form; `var_map` sends polynomial variable
    /// indices to expression variable indices.
    pub fn to_expr(&self, var_map: &dyn Fn(usize) -> usize) -> Expr {
        let mut acc: Option<Expr> = None;
        for (m, c) in self.terms.iter().rev() {
            let negative = c.is_negative();
            let mag = c.abs();
            let mut factors: Vec<Expr> = Vec::new();
            if !mag.is_one() || m.is_constant() {
                factors.push(Expr::Const(mag));
            }
            for (i, &e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(Expr::Var(var_map(i))),
                    _ => factors.push(Expr::Pow(Box::new(Expr::Var(var_map(i))), e)),
                }
            }
            let term = factors
                .into_iter()
                .reduce(|a, b| Expr::Mul(Box::new(a), Box::new(b)))
                .expect("a term has at least one factor");
            acc = Some(match acc {
                None if negative => Expr::Neg(Box::new(term)),
                None => term,
                Some(a) if negative => Expr::Sub(Box::new(a), Box::new(term)),
                Some(a) => Expr::Add(Box::new(a), Box::new(term)),
            });
        }
        acc.unwrap_or_else(|| Expr::int(0))
    }

    /// Canonical primitive integer form: denominators cleared, content
    /// divided out, leading coefficient positive. Reports whether the sign
    /// was flipped.
    pub fn normalize(&self) -> Result<(RatPoly, bool), PolyError> {
        let (_, lead) = self.leading().ok_or(PolyError::ZeroPolynomial)?;
        let flip = lead.is_negative();
        let lcm = self
            .terms
            .values()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = self
            .terms
            .values()
            .map(|c| (c * Rational::from_integer(lcm.clone())).to_integer())
            .collect();
        let gcd = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        let factor = Rational::new(if flip { -lcm } else { lcm }, gcd);
        Ok((self.scale(&factor), flip))
    }

    /// Interval enclosure over a box of the polynomial's variables.
    pub fn eval_interval(&self, bx: &[Interval]) -> Interval {
        let mut acc = Interval::point(0.0);
        for (m, c) in &self.terms {
            let mut t = Interval::from_rational(c);
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    t = t * bx[i].powi(e);
                }
            }
            acc = acc + t;
        }
        acc
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> PolyDisplay<'a> {
        PolyDisplay { poly: self, names }
    }
}

/// Canonical printing: graded-lex descending, `*` between factors, `^` for
/// powers.
pub struct PolyDisplay<'a> {
    poly: &'a RatPoly,
    names: &'a [String],
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.poly.terms.iter().rev().enumerate() {
            let negative = c.is_negative();
            match (k, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mag = c.abs();
            let mut factors: Vec<String> = Vec::new();
            if !mag.is_one() || m.is_constant() {
                if mag.is_integer() {
                    factors.push(mag.numer().to_string());
                } else {
                    factors.push(format!("({}/{})", mag.numer(), mag.denom()));
                }
            }
            for (i, &e) in m.0.iter().enumerate() {
                let name = self.names.get(i).cloned().unwrap_or_else(|| format!("v{i}"));
                match e {
                    0 => {}
                    1 => factors.push(name),
                    _ => factors.push(format!("{name}^{e}")),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

/// Number of monomials of total degree <= m in n variables: C(n+m, n).
pub fn feature_dim(n: usize, m: u32) -> usize {
    let m = m as usize;
    let mut acc: u128 = 1;
    for i in 1..=n.min(m) {
        acc = acc * (n + m + 1 - i) as u128 / i as u128;
    }
    acc as usize
}

/// Every monomial of degree <= m, in ascending graded-lex order (constant
/// first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMap {
    pub n: usize,
    pub m: u32,
    pub monomials: Vec<Monomial>,
}

impl FeatureMap {
    pub fn new(n: usize, m: u32) -> FeatureMap {
        let mut monomials = Vec::with_capacity(feature_dim(n, m));
        let mut exps = vec![0u32; n];
        fn rec(i: usize, left: u32, exps: &mut Vec<u32>, out: &mut Vec<Monomial>) {
            if i == exps.len() {
                out.push(Monomial(exps.clone()));
                return;
            }
            for e in 0..=left {
                exps[i] = e;
                rec(i + 1, left - e, exps, out);
            }
            exps[i] = 0;
        }
        rec(0, m, &mut exps, &mut monomials);
        monomials.sort();
        FeatureMap { n, m, monomials }
    }

    pub fn dim(&self) -> usize {
        self.monomials.len()
    }

    /// The monomial feature vector of `point`.
    pub fn phi(&self, point: &[f64]) -> Vec<f64> {
        self.monomials.iter().map(|m| m.eval_f64(point)).collect()
    }
}

/// Expands `sum_i alpha_i * label_i * (beta <sv_i, x> + theta)^m + b` into a
/// polynomial in `x`.
pub fn expand_classifier(
    svs: &[Vec<f64>],
    alphas: &[f64],
    labels: &[f64],
    b: f64,
    kernel: &KernelParams,
) -> FloatPoly {
    assert_eq!(svs.len(), alphas.len());
    assert_eq!(svs.len(), labels.len());
    let n = svs.first().map_or(0, Vec::len);
    let mut out = Poly::constant(n, b);
    for ((sv, &alpha), &label) in svs.iter().zip(alphas).zip(labels) {
        let mut linear = Poly::constant(n, kernel.theta);
        for (i, &s) in sv.iter().enumerate() {
            linear.add_term(Monomial::var(n, i), kernel.beta * s);
        }
        out = out.add(&linear.pow(kernel.m).scale(&(alpha * label)));
    }
    out
}

/// Side convention for turning a polynomial into an atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Orientation {
    Positive,
    Negative,
    NonNegative,
    NonPositive,
}

impl Orientation {
    pub fn rel(self) -> Rel {
        match self {
            Orientation::Positive => Rel::Gt,
            Orientation::Negative => Rel::Lt,
            Orientation::NonNegative => Rel::Ge,
            Orientation::NonPositive => Rel::Le,
        }
    }
}

/// `p orientation 0` as a single-atom formula.
pub fn poly_to_formula(p: &RatPoly, orientation: Orientation, var_map: &dyn Fn(usize) -> usize) -> Formula {
    Formula::atom(p.to_expr(var_map), orientation.rel())
}
