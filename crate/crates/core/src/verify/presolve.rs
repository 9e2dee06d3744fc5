//! Exact symbolic simplification of a conjunction of atoms before interval
//! search.
//!
//! Every rule preserves the solution set inside the box (projected onto the
//! variables that remain), so "no solution of the residual" means "no
//! solution of the original". Eliminated variables are recorded as steps
//! that rebuild a full point from a residual one; such points are always
//! re-certified against the original formula by the caller.
//!
//! Transcendental subterms (`sin(..)`, `log(..)`, ...) are treated as opaque
//! extra variables of the polynomial view; a variable that occurs inside one
//! is never eliminated.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::formula::{Atom, Expr, Interval, Rel};
use crate::polynomial::{Monomial, RatPoly};
use crate::rounding::simplest_between;
use crate::Rational;

/// Upper limit on the bound pairs one elimination may create.
const MAX_FM_PAIRS: usize = 64;

/// Bounded variables up to which every shift combination is tried.
const MAX_SHIFT_ENUM: usize = 3;

#[derive(Debug, Clone)]
pub(crate) struct PAtom {
    /// Polynomial view over the real variables followed by the opaque ones.
    pub p: RatPoly,
    /// The same quantity over the real variables, kept close to the input
    /// shape because interval evaluation is tighter on factored forms.
    pub expr: Expr,
    pub rel: Rel,
}

#[derive(Debug, Clone)]
pub(crate) struct Bound {
    p: RatPoly,
    expr: Expr,
    strict: bool,
}

#[derive(Debug, Clone)]
pub(crate) enum Step {
    /// `var := value`, with `value` free of opaque terms.
    Subst { var: usize, value: RatPoly },
    /// `var` projected away; any value between the bounds works.
    Project { var: usize, lower: Vec<Bound>, upper: Vec<Bound> },
}

#[derive(Debug, Clone, Default)]
pub(crate) struct PresolveOptions {
    /// Variables to keep when another choice exists.
    pub protected: BTreeSet<usize>,
    /// Allow Fourier–Motzkin projection of linear variables.
    pub project: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Conjunct {
    nvars: usize,
    opaque: Vec<Expr>,
    pub atoms: Vec<PAtom>,
    pub steps: Vec<Step>,
}

/// Allowed signs of the left-hand side: bit 0 negative, bit 1 zero, bit 2
/// positive.
fn sign_set(rel: Rel) -> u8 {
    match rel {
        Rel::Lt => 0b001,
        Rel::Le => 0b011,
        Rel::Eq => 0b010,
        Rel::Ge => 0b110,
        Rel::Gt => 0b100,
    }
}

fn swap_signs(s: u8) -> u8 {
    (s & 0b010) | ((s & 0b001) << 2) | ((s & 0b100) >> 2)
}

fn rel_of(s: u8) -> Option<Rel> {
    match s {
        0b001 => Some(Rel::Lt),
        0b011 => Some(Rel::Le),
        0b010 => Some(Rel::Eq),
        0b110 => Some(Rel::Ge),
        0b100 => Some(Rel::Gt),
        _ => None,
    }
}

/// Sign information for a polynomial whose terms all share one sign and
/// whose monomials are even in every variable except `nonneg` (assumed
/// non-negative).
struct Definite {
    sign: i8,
    has_const: bool,
    has_pure_nonneg: bool,
}

fn definite(p: &RatPoly, nonneg: Option<usize>) -> Option<Definite> {
    let mut sign = 0i8;
    let mut has_const = false;
    let mut has_pure_nonneg = false;
    for (m, c) in p.terms() {
        let s = if c.is_positive() { 1 } else { -1 };
        if sign != 0 && s != sign {
            return None;
        }
        sign = s;
        let even = m.0.iter().enumerate().all(|(i, e)| Some(i) == nonneg || e % 2 == 0);
        if !even {
            return None;
        }
        if m.is_constant() {
            has_const = true;
        } else if let Some(k) = nonneg {
            if m.0[k] > 0 && m.0.iter().enumerate().all(|(i, e)| i == k || *e == 0) {
                has_pure_nonneg = true;
            }
        }
    }
    Some(Definite { sign, has_const, has_pure_nonneg })
}

/// Sign of a polynomial whose terms share one sign, when each variable in
/// `nonneg` is non-negative (strictly positive if flagged) and every other
/// variable occurs in even powers only. The flag says the value is never 0.
fn shifted_sign(p: &RatPoly, nonneg: &BTreeMap<usize, bool>) -> Option<(i8, bool)> {
    let mut sign = 0i8;
    let mut strict = false;
    for (m, c) in p.terms() {
        let s = if c.is_positive() { 1 } else { -1 };
        if sign != 0 && s != sign {
            return None;
        }
        sign = s;
        let mut term_strict = true;
        for (i, &e) in m.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            match nonneg.get(&i) {
                Some(&pos) => term_strict &= pos,
                None if e % 2 == 0 => term_strict = false,
                None => return None,
            }
        }
        strict |= term_strict;
    }
    Some((sign, strict))
}

/// Whether `q >= 0` (`q > 0` when `strict`) is impossible given the sign
/// structure of [`shifted_sign`].
fn contradicts(q: &RatPoly, strict: bool, nonneg: &BTreeMap<usize, bool>) -> bool {
    if q.is_zero() {
        return strict;
    }
    match shifted_sign(q, nonneg) {
        Some((sign, never_zero)) => sign < 0 && (never_zero || strict),
        None => false,
    }
}

/// Candidate multipliers `λ > 0` that make `qi + λ qj` non-positive term by
/// term: every monomial that can take either sign must cancel and every
/// other coefficient must be `<= 0`.
fn pair_multipliers(qi: &RatPoly, qj: &RatPoly, nonneg: &BTreeMap<usize, bool>) -> Vec<Rational> {
    let mut lo: Option<Rational> = None;
    let mut hi: Option<Rational> = None;
    let mut fixed: Option<Rational> = None;
    let monomials: BTreeSet<&Monomial> = qi.terms().chain(qj.terms()).map(|(m, _)| m).collect();
    for m in monomials {
        let (a, b) = (qi.coeff(m), qj.coeff(m));
        let signed = m.0.iter().enumerate().any(|(k, e)| e % 2 == 1 && !nonneg.contains_key(&k));
        if signed {
            // a + λ b = 0
            if b.is_zero() {
                if !a.is_zero() {
                    return Vec::new();
                }
                continue;
            }
            let l = -a / b;
            if fixed.as_ref().is_some_and(|f| *f != l) {
                return Vec::new();
            }
            fixed = Some(l);
        } else if b.is_positive() {
            // λ <= -a / b
            let l = -a / b;
            if hi.as_ref().map_or(true, |h| l < *h) {
                hi = Some(l);
            }
        } else if b.is_negative() {
            let l = -a / b;
            if lo.as_ref().map_or(true, |x| l > *x) {
                lo = Some(l);
            }
        } else if a.is_positive() {
            return Vec::new();
        }
    }
    let zero = Rational::zero();
    let lo = lo.map_or(zero.clone(), |l| l.max(zero.clone()));
    if let Some(f) = fixed {
        let ok = f.is_positive() && f >= lo && hi.as_ref().map_or(true, |h| f <= *h);
        return if ok { vec![f] } else { Vec::new() };
    }
    match hi {
        Some(h) if h < lo => Vec::new(),
        Some(h) => {
            let mid = (lo.clone() + h.clone()) / Rational::from_integer(2.into());
            [lo, mid, h].into_iter().filter(|l| l.is_positive()).collect()
        }
        None => [lo.clone(), lo + Rational::one()].into_iter().filter(|l| l.is_positive()).collect(),
    }
}

/// Exact square root of a non-negative rational, when it is rational.
fn rational_sqrt(q: &Rational) -> Option<Rational> {
    if q.is_negative() {
        return None;
    }
    let (n, d) = (q.numer().sqrt(), q.denom().sqrt());
    (&n * &n == *q.numer() && &d * &d == *q.denom()).then(|| Rational::new(n, d))
}

/// `p = a * var + r` with `a` a nonzero constant and `r` free of `var`.
fn linear_in(p: &RatPoly, var: usize) -> Option<(Rational, RatPoly)> {
    if p.degree_in(var) != 1 {
        return None;
    }
    let unit = Monomial::var(p.nvars(), var);
    let mut a = None;
    for (m, c) in p.terms() {
        if m.0[var] > 0 {
            if *m != unit {
                return None;
            }
            a = Some(c.clone());
        }
    }
    let a = a?;
    let mut r = p.clone();
    r.add_term(unit, -a.clone());
    Some((a, r))
}

impl Conjunct {
    pub fn new(atoms: &[Atom], nvars: usize) -> Conjunct {
        let mut opaque: Vec<Expr> = Vec::new();
        for a in atoms {
            collect_opaque(&a.lhs, &mut opaque);
        }
        let ext = nvars + opaque.len();
        let atoms = atoms
            .iter()
            .map(|a| PAtom {
                p: to_poly(&a.lhs, nvars, &opaque, ext),
                expr: a.lhs.clone(),
                rel: a.rel,
            })
            .collect();
        Conjunct { nvars, opaque, atoms, steps: Vec::new() }
    }

    fn ext(&self) -> usize {
        self.nvars + self.opaque.len()
    }

    /// Real variables that occur inside opaque terms.
    fn pinned(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for e in &self.opaque {
            e.collect_vars(&mut out);
        }
        out
    }

    fn poly_expr(&self, p: &RatPoly) -> Expr {
        let mut e = p.to_expr(&|i| i);
        for (k, o) in self.opaque.iter().enumerate() {
            e = e.substitute(self.nvars + k, o);
        }
        e
    }

    pub fn free_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for a in &self.atoms {
            a.expr.collect_vars(&mut out);
        }
        out
    }

    pub fn atoms_as_formula_atoms(&self) -> Vec<Atom> {
        self.atoms.iter().map(|a| Atom::new(a.expr.fold_constants(), a.rel)).collect()
    }

    /// Runs the rules to a fixpoint. `false` means the conjunction has no
    /// solution in the box.
    pub fn presolve(&mut self, bx: &[Interval], opts: &PresolveOptions) -> bool {
        for _round in 0..256 {
            if !self.drop_decided() || !self.merge_duplicates() || !self.merge_parallel() {
                return false;
            }
            if self.eliminate_equality(bx, opts) {
                continue;
            }
            match self.reparametrize() {
                Some(true) => continue,
                Some(false) => {}
                None => return false,
            }
            if !self.shift_to_bounds() {
                return false;
            }
            if opts.project && self.project(bx, opts) {
                continue;
            }
            break;
        }
        true
    }

    /// Removes atoms whose truth is fixed by sign structure alone; `false`
    /// when one of them can never hold.
    fn drop_decided(&mut self) -> bool {
        let mut keep = Vec::with_capacity(self.atoms.len());
        for a in self.atoms.drain(..) {
            let possible = if a.p.is_zero() {
                Some(0b010)
            } else {
                definite(&a.p, None).map(|d| {
                    let strict = if d.sign > 0 { 0b100 } else { 0b001 };
                    if d.has_const {
                        strict
                    } else {
                        strict | 0b010
                    }
                })
            };
            match possible {
                Some(s) if s & sign_set(a.rel) == 0 => return false,
                Some(s) if s & !sign_set(a.rel) == 0 => {}
                _ => keep.push(a),
            }
        }
        self.atoms = keep;
        true
    }

    /// Combines atoms over the same polynomial (up to a constant factor).
    fn merge_duplicates(&mut self) -> bool {
        let mut groups: BTreeMap<Vec<(Monomial, Rational)>, Vec<(usize, bool)>> = BTreeMap::new();
        for (i, a) in self.atoms.iter().enumerate() {
            let Ok((np, flip)) = a.p.normalize() else { continue };
            let key: Vec<(Monomial, Rational)> = np.terms().map(|(m, c)| (m.clone(), c.clone())).collect();
            groups.entry(key).or_default().push((i, flip));
        }
        let mut remove = BTreeSet::new();
        for members in groups.values().filter(|g| g.len() > 1) {
            let (first, first_flip) = members[0];
            let mut allowed = 0b111;
            for &(i, flip) in members {
                let s = sign_set(self.atoms[i].rel);
                allowed &= if flip != first_flip { swap_signs(s) } else { s };
            }
            if allowed == 0 {
                return false;
            }
            if let Some(rel) = rel_of(allowed) {
                self.atoms[first].rel = rel;
                remove.extend(members[1..].iter().map(|(i, _)| *i));
            }
        }
        let mut i = 0;
        self.atoms.retain(|_| {
            i += 1;
            !remove.contains(&(i - 1))
        });
        true
    }

    /// Atoms `k·q + c rel 0` sharing the same non-constant part `q` are
    /// bounds on `q`; they are intersected into at most two atoms (or one
    /// equality), or the conjunct is infeasible.
    fn merge_parallel(&mut self) -> bool {
        // (value, strict) bounds on q per group.
        type Side = Option<(Rational, bool)>;
        struct Group {
            q: RatPoly,
            members: Vec<usize>,
            lo: Side,
            hi: Side,
        }
        let tighter = |cur: &mut Side, v: Rational, strict: bool, lower: bool| {
            let replace = match cur {
                None => true,
                Some((c, cs)) => {
                    if lower {
                        v > *c || (v == *c && strict && !*cs)
                    } else {
                        v < *c || (v == *c && strict && !*cs)
                    }
                }
            };
            if replace {
                *cur = Some((v, strict));
            }
        };
        let mut groups: BTreeMap<Vec<(Monomial, Rational)>, Group> = BTreeMap::new();
        for (i, a) in self.atoms.iter().enumerate() {
            let c = a.p.constant_term();
            let mut r = a.p.clone();
            r.add_term(Monomial::one(r.nvars()), -c.clone());
            let Ok((q, _)) = r.normalize() else { continue };
            let (Some((_, kr)), Some((_, kq))) = (r.leading(), q.leading()) else { continue };
            let k = kr / kq;
            // k·q + c rel 0  <=>  q rel' -c/k
            let v = -(&c / &k);
            let rel = if k.is_positive() { a.rel } else { a.rel.flip() };
            let key: Vec<(Monomial, Rational)> = q.terms().map(|(m, c)| (m.clone(), c.clone())).collect();
            let g = groups.entry(key).or_insert_with(|| Group { q: q.clone(), members: Vec::new(), lo: None, hi: None });
            g.members.push(i);
            match rel {
                Rel::Gt => tighter(&mut g.lo, v, true, true),
                Rel::Ge => tighter(&mut g.lo, v, false, true),
                Rel::Lt => tighter(&mut g.hi, v, true, false),
                Rel::Le => tighter(&mut g.hi, v, false, false),
                Rel::Eq => {
                    tighter(&mut g.lo, v.clone(), false, true);
                    tighter(&mut g.hi, v, false, false);
                }
            }
        }
        let mut remove = BTreeSet::new();
        let mut add = Vec::new();
        let ext = self.ext();
        for g in groups.values().filter(|g| g.members.len() > 1) {
            let mut lower_atom = None;
            let mut upper_atom = None;
            if let (Some((l, ls)), Some((h, hs))) = (&g.lo, &g.hi) {
                if l > h || (l == h && (*ls || *hs)) {
                    return false;
                }
                if l == h {
                    let p = g.q.sub(&RatPoly::constant(ext, l.clone()));
                    remove.extend(g.members.iter().copied());
                    add.push(PAtom { expr: self.poly_expr(&p), p, rel: Rel::Eq });
                    continue;
                }
            }
            if let Some((l, strict)) = &g.lo {
                let p = g.q.sub(&RatPoly::constant(ext, l.clone()));
                lower_atom = Some(PAtom { expr: self.poly_expr(&p), p, rel: if *strict { Rel::Gt } else { Rel::Ge } });
            }
            if let Some((h, strict)) = &g.hi {
                let p = RatPoly::constant(ext, h.clone()).sub(&g.q);
                upper_atom = Some(PAtom { expr: self.poly_expr(&p), p, rel: if *strict { Rel::Gt } else { Rel::Ge } });
            }
            let replacement: Vec<PAtom> = lower_atom.into_iter().chain(upper_atom).collect();
            if replacement.len() < g.members.len() {
                remove.extend(g.members.iter().copied());
                add.extend(replacement);
            }
        }
        let mut i = 0;
        self.atoms.retain(|_| {
            i += 1;
            !remove.contains(&(i - 1))
        });
        self.atoms.extend(add);
        true
    }

    fn candidate_vars(&self, opts: &PresolveOptions) -> Vec<usize> {
        let pinned = self.pinned();
        let mut vars: Vec<usize> = (0..self.nvars).filter(|v| !pinned.contains(v)).collect();
        vars.sort_by_key(|v| (opts.protected.contains(v), *v));
        vars
    }

    fn substitute(&mut self, var: usize, value: &RatPoly) {
        let value_expr = self.poly_expr(value);
        for a in &mut self.atoms {
            if a.p.uses_var(var) {
                a.p = a.p.substitute(var, value);
                a.expr = a.expr.substitute(var, &value_expr);
            }
        }
    }

    /// Atoms `value - lo >= 0` and `hi - value >= 0`.
    fn box_atoms(&self, value: &RatPoly, iv: Interval) -> Vec<PAtom> {
        let mut out = Vec::new();
        let ext = self.ext();
        if iv.lo.is_finite() {
            let lo = Rational::from_float(iv.lo).expect("finite");
            let p = value.sub(&RatPoly::constant(ext, lo));
            out.push(PAtom { expr: self.poly_expr(&p), p, rel: Rel::Ge });
        }
        if iv.hi.is_finite() {
            let hi = Rational::from_float(iv.hi).expect("finite");
            let p = RatPoly::constant(ext, hi).sub(value);
            out.push(PAtom { expr: self.poly_expr(&p), p, rel: Rel::Ge });
        }
        out
    }

    /// Solves an equality for a variable it contains linearly with a constant
    /// coefficient and substitutes the solution everywhere. Among the
    /// choices, unprotected variables come first, then those leaving the
    /// fewest equalities with no linear variable, then the smallest degree
    /// the rewritten atoms reach, then the fewest atoms touched.
    fn eliminate_equality(&mut self, bx: &[Interval], opts: &PresolveOptions) -> bool {
        let vars = self.candidate_vars(opts);
        let opaque = self.nvars..self.ext();
        let mut best: Option<((bool, usize, u32, usize), usize, usize, RatPoly)> = None;
        for v in vars {
            for (i, a) in self.atoms.iter().enumerate() {
                if a.rel != Rel::Eq {
                    continue;
                }
                let Some((coef, rest)) = linear_in(&a.p, v) else { continue };
                if opaque.clone().any(|k| rest.uses_var(k)) {
                    continue;
                }
                let value = rest.scale(&(-coef.recip()));
                let others: Vec<&PAtom> =
                    self.atoms.iter().enumerate().filter(|&(j, b)| j != i && b.p.uses_var(v)).map(|(_, b)| b).collect();
                let rewritten: Vec<(Rel, RatPoly)> = others.iter().map(|b| (b.rel, b.p.substitute(v, &value))).collect();
                let stuck = rewritten
                    .iter()
                    .filter(|(rel, q)| {
                        *rel == Rel::Eq
                            && !(0..self.nvars).any(|w| {
                                linear_in(q, w).is_some_and(|(_, r)| !opaque.clone().any(|k| r.uses_var(k)))
                            })
                    })
                    .count();
                let degree = rewritten.iter().map(|(_, q)| q.degree()).max().unwrap_or(0);
                let key = (opts.protected.contains(&v), stuck, degree, others.len());
                if best.as_ref().map_or(true, |(k, ..)| key < *k) {
                    best = Some((key, v, i, value));
                }
            }
        }
        let Some((_, v, i, value)) = best else { return false };
        self.atoms.remove(i);
        self.substitute(v, &value);
        let extra = self.box_atoms(&value, bx[v]);
        self.atoms.extend(extra);
        self.steps.push(Step::Subst { var: v, value });
        true
    }

    /// For an inequality `a*v + r (rel) 0`, writes `a*v + r = ±s` with
    /// `s >= 0` and checks whether another atom becomes sign-definite in
    /// the remaining variables and `s`. Returns `None` on infeasibility,
    /// `Some(true)` when an equality was derived.
    fn reparametrize(&mut self) -> Option<bool> {
        let pinned = self.pinned();
        let ext = self.ext();
        let s = ext;
        for ia in 0..self.atoms.len() {
            let a = &self.atoms[ia];
            if a.rel == Rel::Eq {
                continue;
            }
            let strict = a.rel.is_strict();
            let sigma = match a.rel {
                Rel::Gt | Rel::Ge => Rational::one(),
                _ => -Rational::one(),
            };
            for v in 0..self.nvars {
                if pinned.contains(&v) {
                    continue;
                }
                let Some((coef, rest)) = linear_in(&a.p, v) else { continue };
                // v = (sigma*s - rest) / coef
                let rest = rest.remap(ext + 1, |i| i);
                let mut value = rest.neg();
                value.add_term(Monomial::var(ext + 1, s), sigma.clone());
                let value = value.scale(&coef.recip());
                for (ic, c) in self.atoms.iter().enumerate() {
                    if ic == ia || !c.p.uses_var(v) {
                        continue;
                    }
                    let reduced = c.p.remap(ext + 1, |i| i).substitute(v, &value);
                    let possible = if reduced.is_zero() {
                        0b010
                    } else {
                        let Some(d) = definite(&reduced, Some(s)) else { continue };
                        let side = if d.sign > 0 { 0b100 } else { 0b001 };
                        if d.has_const || (strict && d.has_pure_nonneg) {
                            side
                        } else {
                            side | 0b010
                        }
                    };
                    let feasible = possible & sign_set(c.rel);
                    if feasible == 0 {
                        return None;
                    }
                    if feasible == 0b010 && !reduced.is_zero() {
                        let has_pure = definite(&reduced, Some(s)).is_some_and(|d| d.has_pure_nonneg);
                        if has_pure {
                            // Every term vanishes, so s = 0.
                            self.atoms[ia].rel = Rel::Eq;
                            return Some(true);
                        }
                    }
                }
            }
        }
        Some(false)
    }

    /// Non-equality atoms as `q >= 0` / `q > 0`, with equalities contributing
    /// both `p >= 0` and `-p >= 0`.
    fn oriented(&self) -> Vec<(RatPoly, bool)> {
        let mut out = Vec::new();
        for a in &self.atoms {
            match a.rel {
                Rel::Gt | Rel::Ge => out.push((a.p.clone(), a.rel.is_strict())),
                Rel::Lt | Rel::Le => out.push((a.p.neg(), a.rel.is_strict())),
                Rel::Eq => {
                    out.push((a.p.clone(), false));
                    out.push((a.p.neg(), false));
                }
            }
        }
        out
    }

    /// Single-variable bounds implied by the atoms: `var -> [lower, upper]`
    /// with each bound as `(value, strict)`. Sources are linear atoms alone
    /// or in pairs that cancel a variable, and atoms that become univariate
    /// of degree at most two once their non-positive even terms are dropped
    /// (roots must be rational).
    fn implied_bounds(&self) -> BTreeMap<usize, [Option<(Rational, bool)>; 2]> {
        let ext = self.ext();
        let oriented = self.oriented();
        let real_only = |q: &RatPoly| !(self.nvars..ext).any(|i| q.uses_var(i));
        let lin: Vec<&(RatPoly, bool)> =
            oriented.iter().filter(|(q, _)| q.degree() == 1 && real_only(q)).collect();
        let mut univariate: Vec<(RatPoly, bool)> = Vec::new();
        for i in 0..lin.len() {
            univariate.push(lin[i].clone());
            for j in i + 1..lin.len() {
                for v in 0..self.nvars {
                    let unit = Monomial::var(ext, v);
                    let (ci, cj) = (lin[i].0.coeff(&unit), lin[j].0.coeff(&unit));
                    if ci.is_zero() || cj.is_zero() || ci.is_positive() == cj.is_positive() {
                        continue;
                    }
                    let q = lin[i].0.scale(&cj.abs()).add(&lin[j].0.scale(&ci.abs()));
                    univariate.push((q, lin[i].1 || lin[j].1));
                }
            }
        }
        for (q, strict) in &oriented {
            if q.degree() < 2 {
                continue;
            }
            // q >= 0 and the dropped terms are <= 0, so the rest is >= 0.
            for v in 0..self.nvars {
                let rest = RatPoly::from_terms(
                    ext,
                    q.terms()
                        .filter(|(m, c)| m.0[v] > 0 || !(c.is_negative() && m.is_even()))
                        .map(|(m, c)| (m.clone(), c.clone())),
                );
                univariate.push((rest, *strict));
            }
        }

        let mut found: Vec<(usize, usize, Rational, bool)> = Vec::new();
        for (q, strict) in univariate {
            let vars: Vec<usize> = (0..ext).filter(|&v| q.uses_var(v)).collect();
            let [v] = vars[..] else { continue };
            if v >= self.nvars {
                continue;
            }
            let c2 = q.coeff(&Monomial::var(ext, v).mul(&Monomial::var(ext, v)));
            let c1 = q.coeff(&Monomial::var(ext, v));
            let c0 = q.constant_term();
            match q.degree() {
                1 => {
                    let at = -c0 / c1.clone();
                    found.push((v, usize::from(c1.is_negative()), at, strict));
                }
                2 if c2.is_negative() => {
                    // Between the roots of c2 v^2 + c1 v + c0.
                    let disc = c1.clone() * c1.clone() - Rational::from_integer(4.into()) * c2.clone() * c0;
                    let Some(root) = rational_sqrt(&disc) else { continue };
                    let two_a = Rational::from_integer(2.into()) * c2;
                    let r1 = (-c1.clone() - root.clone()) / two_a.clone();
                    let r2 = (-c1 + root) / two_a;
                    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
                    found.push((v, 0, lo, strict));
                    found.push((v, 1, hi, strict));
                }
                _ => {}
            }
        }

        let mut out: BTreeMap<usize, [Option<(Rational, bool)>; 2]> = BTreeMap::new();
        for (v, side, at, strict) in found {
            let slot = &mut out.entry(v).or_insert([None, None])[side];
            let tighter = match slot {
                None => true,
                Some((b, s)) => {
                    let better = if side == 0 { at > *b } else { at < *b };
                    better || (at == *b && strict && !*s)
                }
            };
            if tighter {
                *slot = Some((at, strict));
            }
        }
        out
    }

    /// Writes bounded variables as `bound ± s` with `s >= 0` and looks for an atom, or a
    /// non-negative combination of two, that is then sign-definite against
    /// its relation. `false` means the conjunction is infeasible; nothing is
    /// changed otherwise.
    fn shift_to_bounds(&self) -> bool {
        let bounds = self.implied_bounds();
        let pinned = self.pinned();
        let ext = self.ext();
        let oriented = self.oriented();
        // Each bounded variable stays put or moves to one of its bounds; all
        // combinations are tried for a few variables, "lower, else upper"
        // and "upper, else lower" beyond that.
        let choices: Vec<(usize, Vec<usize>)> = bounds
            .iter()
            .filter(|(v, _)| !pinned.contains(v))
            .map(|(&v, sides)| (v, (0..2).filter(|&k| sides[k].is_some()).collect()))
            .collect();
        let plans: Vec<Vec<Option<usize>>> = if choices.len() <= MAX_SHIFT_ENUM {
            let mut plans = vec![Vec::new()];
            for (_, sides) in &choices {
                plans = plans
                    .into_iter()
                    .flat_map(|p| {
                        std::iter::once(None).chain(sides.iter().map(|&k| Some(k))).map(move |c| {
                            let mut p = p.clone();
                            p.push(c);
                            p
                        })
                    })
                    .collect();
            }
            plans
        } else {
            [0usize, 1]
                .iter()
                .map(|&prefer| {
                    choices.iter().map(|(_, sides)| Some(if sides.contains(&prefer) { prefer } else { sides[0] })).collect()
                })
                .collect()
        };
        for plan in plans {
            let mut shifted_vars = BTreeMap::new();
            let mut subst = Vec::new();
            for ((v, _), side) in choices.iter().zip(&plan) {
                let Some(side) = *side else { continue };
                let (at, strict) = bounds[v][side].as_ref().expect("chosen side exists");
                // v = at + s_v or v = at - s_v, reusing v's slot for s_v.
                let mut value = RatPoly::constant(ext, at.clone());
                value.add_term(Monomial::var(ext, *v), if side == 0 { Rational::one() } else { -Rational::one() });
                subst.push((*v, value));
                shifted_vars.insert(*v, *strict);
            }
            let reduced: Vec<(RatPoly, bool)> = oriented
                .iter()
                .map(|(q, strict)| {
                    let mut q = q.clone();
                    for (v, value) in &subst {
                        q = q.substitute(*v, value);
                    }
                    (q, *strict)
                })
                .collect();
            for (i, (qi, si)) in reduced.iter().enumerate() {
                if contradicts(qi, *si, &shifted_vars) {
                    return false;
                }
                for (qj, sj) in &reduced[i + 1..] {
                    for lambda in pair_multipliers(qi, qj, &shifted_vars) {
                        let combo = qi.add(&qj.scale(&lambda));
                        if contradicts(&combo, *si || *sj, &shifted_vars) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Fourier–Motzkin projection of one variable that only occurs linearly
    /// in inequalities.
    fn project(&mut self, bx: &[Interval], opts: &PresolveOptions) -> bool {
        let mut best: Option<(usize, usize)> = None;
        for v in self.candidate_vars(opts) {
            let mut users = 0;
            let (mut lo, mut hi) = (usize::from(bx[v].lo.is_finite()), usize::from(bx[v].hi.is_finite()));
            let mut ok = true;
            for a in &self.atoms {
                if !a.p.uses_var(v) {
                    continue;
                }
                users += 1;
                match (a.rel, linear_in(&a.p, v)) {
                    (Rel::Eq, _) | (_, None) => {
                        ok = false;
                        break;
                    }
                    (rel, Some((coef, _))) => {
                        let lower = matches!(rel, Rel::Gt | Rel::Ge) == coef.is_positive();
                        if lower {
                            lo += 1;
                        } else {
                            hi += 1;
                        }
                    }
                }
            }
            if !ok || users == 0 || lo * hi > MAX_FM_PAIRS {
                continue;
            }
            let cost = lo * hi;
            if best.is_none_or(|(_, c)| cost < c) {
                best = Some((v, cost));
            }
        }
        let Some((v, _)) = best else { return false };

        let ext = self.ext();
        let mut lower: Vec<Bound> = Vec::new();
        let mut upper: Vec<Bound> = Vec::new();
        let mut keep = Vec::new();
        for a in self.atoms.drain(..) {
            if !a.p.uses_var(v) {
                keep.push(a);
                continue;
            }
            let (coef, rest) = linear_in(&a.p, v).expect("checked above");
            let value = rest.scale(&(-coef.recip()));
            let is_lower = matches!(a.rel, Rel::Gt | Rel::Ge) == coef.is_positive();
            let b = Bound { p: value, expr: Expr::int(0), strict: a.rel.is_strict() };
            if is_lower {
                lower.push(b);
            } else {
                upper.push(b);
            }
        }
        self.atoms = keep;
        if bx[v].lo.is_finite() {
            let c = Rational::from_float(bx[v].lo).expect("finite");
            lower.push(Bound { p: RatPoly::constant(ext, c), expr: Expr::int(0), strict: false });
        }
        if bx[v].hi.is_finite() {
            let c = Rational::from_float(bx[v].hi).expect("finite");
            upper.push(Bound { p: RatPoly::constant(ext, c), expr: Expr::int(0), strict: false });
        }
        for b in lower.iter_mut().chain(upper.iter_mut()) {
            b.expr = self.poly_expr(&b.p);
        }
        for l in &lower {
            for u in &upper {
                let p = u.p.sub(&l.p);
                let rel = if l.strict || u.strict { Rel::Gt } else { Rel::Ge };
                let expr = Expr::Sub(Box::new(u.expr.clone()), Box::new(l.expr.clone()));
                self.atoms.push(PAtom { p, expr, rel });
            }
        }
        self.steps.push(Step::Project { var: v, lower, upper });
        true
    }

    /// Extends a point that satisfies the residual atoms to the eliminated
    /// variables. Projected variables get a random admissible value when a
    /// generator is supplied, else the simplest one.
    pub fn rebuild(&self, point: &mut [Rational], mut rng: Option<&mut rand_chacha::ChaCha8Rng>) -> bool {
        for step in self.steps.iter().rev() {
            match step {
                Step::Subst { var, value } => {
                    let mut ext = point.to_vec();
                    ext.resize(value.nvars(), Rational::zero());
                    point[*var] = value.eval(&ext);
                }
                Step::Project { var, lower, upper } => {
                    let Some(v) = self.pick_between(point, lower, upper, rng.as_deref_mut()) else {
                        return false;
                    };
                    point[*var] = v;
                }
            }
        }
        true
    }

    fn bound_value(&self, point: &[Rational], b: &Bound) -> Option<(Rational, Rational)> {
        if (self.nvars..self.ext()).all(|k| !b.p.uses_var(k)) {
            let mut ext = point.to_vec();
            ext.resize(b.p.nvars(), Rational::zero());
            let v = b.p.eval(&ext);
            return Some((v.clone(), v));
        }
        let bx: Vec<Interval> = point.iter().map(Interval::from_rational).collect();
        let iv = b.expr.eval_interval(&bx).ok()?;
        if !(iv.lo.is_finite() && iv.hi.is_finite()) {
            return None;
        }
        Some((Rational::from_float(iv.lo)?, Rational::from_float(iv.hi)?))
    }

    fn pick_between(
        &self,
        point: &[Rational],
        lower: &[Bound],
        upper: &[Bound],
        rng: Option<&mut rand_chacha::ChaCha8Rng>,
    ) -> Option<Rational> {
        // (value, strict) of the tightest bound on each side.
        let mut lo: Option<(Rational, bool)> = None;
        for b in lower {
            let (_, hi) = self.bound_value(point, b)?;
            let exact = self.bound_value(point, b).is_some_and(|(l, h)| l == h);
            let strict = b.strict || !exact;
            if lo.as_ref().is_none_or(|(v, s)| hi > *v || (hi == *v && strict && !s)) {
                lo = Some((hi, strict));
            }
        }
        let mut up: Option<(Rational, bool)> = None;
        for b in upper {
            let (low, _) = self.bound_value(point, b)?;
            let exact = self.bound_value(point, b).is_some_and(|(l, h)| l == h);
            let strict = b.strict || !exact;
            if up.as_ref().is_none_or(|(v, s)| low < *v || (low == *v && strict && !s)) {
                up = Some((low, strict));
            }
        }
        let (lo, lo_strict) = lo?;
        let (hi, hi_strict) = up?;
        if lo > hi {
            return None;
        }
        if lo == hi {
            return (!lo_strict && !hi_strict).then_some(lo);
        }
        let width = &hi - &lo;
        match rng {
            Some(rng) => {
                let k: u32 = rng.gen_range(1..65_536);
                Some(&lo + width * Rational::new(k.into(), 65_536.into()))
            }
            None => {
                let quarter = &width / Rational::from_integer(4.into());
                Some(simplest_between(&(&lo + &quarter), &(&hi - &quarter)))
            }
        }
    }
}

fn collect_opaque(e: &Expr, out: &mut Vec<Expr>) {
    match e {
        Expr::Var(_) | Expr::Const(_) => {}
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
            collect_opaque(a, out);
            collect_opaque(b, out);
        }
        Expr::Pow(a, _) | Expr::Neg(a) => collect_opaque(a, out),
        Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) | Expr::Log(_) => {
            if !out.contains(e) {
                out.push(e.clone());
            }
        }
    }
}

fn to_poly(e: &Expr, nvars: usize, opaque: &[Expr], ext: usize) -> RatPoly {
    let rec = |x: &Expr| to_poly(x, nvars, opaque, ext);
    match e {
        Expr::Var(i) => RatPoly::var(ext, *i),
        Expr::Const(q) => RatPoly::constant(ext, q.clone()),
        Expr::Add(a, b) => rec(a).add(&rec(b)),
        Expr::Sub(a, b) => rec(a).sub(&rec(b)),
        Expr::Mul(a, b) => rec(a).mul(&rec(b)),
        Expr::Pow(a, n) => rec(a).pow(*n),
        Expr::Neg(a) => rec(a).neg(),
        Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) | Expr::Log(_) => {
            let k = opaque.iter().position(|o| o == e).expect("collected");
            RatPoly::var(ext, nvars + k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_formula, Formula};

    fn conj(src: &str, names: &[&str]) -> Conjunct {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let f = parse_formula(src, &names).unwrap();
        let atoms: Vec<Atom> = f.atoms().into_iter().cloned().collect();
        Conjunct::new(&atoms, names.len())
    }

    fn bx(n: usize) -> Vec<Interval> {
        vec![Interval::new(-10.0, 10.0); n]
    }

    fn all() -> PresolveOptions {
        PresolveOptions { protected: BTreeSet::new(), project: true }
    }

    #[test]
    fn same_polynomial_opposite_relations() {
        let mut c = conj("y - x^2 > 0 && y - x^2 <= 0", &["x", "y"]);
        assert!(!c.presolve(&bx(2), &PresolveOptions::default()));
    }

    #[test]
    fn parallel_atoms_are_intersected() {
        let mut c = conj("x*y - 6 > 2 && x*y - 6 <= 1", &["x", "y"]);
        assert!(!c.presolve(&bx(2), &PresolveOptions::default()));
        // 1 <= xy and 2xy <= 2 pin xy = 1; nothing is linear, so it stays.
        let mut c = conj("x*y >= 1 && 2*x*y <= 2 && x*y > -3", &["x", "y"]);
        assert!(c.presolve(&bx(2), &PresolveOptions::default()));
        assert_eq!(c.atoms.len(), 1);
        assert_eq!(c.atoms[0].rel, Rel::Eq);
    }

    #[test]
    fn two_sided_bound_becomes_equality() {
        let mut c = conj("x >= 0 && x <= 0", &["x"]);
        assert!(c.presolve(&bx(1), &PresolveOptions::default()));
        assert!(c.atoms.is_empty());
        let mut pt = vec![Rational::from_integer(7.into())];
        assert!(c.rebuild(&mut pt, None));
        assert!(pt[0].is_zero());
    }

    #[test]
    fn coincident_line_is_square_free() {
        // x + y > 0 forces (x + y)^2 > 0.
        let mut c = conj("x + y > 0 && x^2 + 2*x*y + y^2 <= 0", &["x", "y"]);
        assert!(!c.presolve(&bx(2), &PresolveOptions::default()));
        let mut c = conj("x + y = 0 && x^2 + 2*x*y + y^2 > 0", &["x", "y"]);
        assert!(!c.presolve(&bx(2), &PresolveOptions::default()));
    }

    #[test]
    fn derived_equality_from_touching_constraint() {
        let mut c = conj(
            "-y1 + x1 - 2 >= 0 && -y1^2 - x1^2 + 2*x1*y1 - 2*y1 + 2*x1 >= 0",
            &["x1", "y1"],
        );
        assert!(c.presolve(&bx(2), &PresolveOptions::default()));
        assert!(c.steps.iter().any(|s| matches!(s, Step::Subst { .. })));
    }

    #[test]
    fn touching_point_excluded_by_derived_bounds() {
        // The two linear atoms imply x > 1 and y > 1; shifted there, the
        // disc becomes -2s - s^2 - t^2 - z^2 < 0.
        let src = "2*y - x - 1 > 0 && x - y >= 0 && 1 - z^2 - x^2 - (y - 1)^2 >= 0";
        let mut c = conj(src, &["x", "y", "z"]);
        assert!(!c.presolve(&bx(3), &PresolveOptions::default()));
        // Non-strict, the point (1, 1, 0) is a solution.
        let mut c = conj(&src.replace('>', ">=").replace(">==", ">="), &["x", "y", "z"]);
        assert!(c.presolve(&bx(3), &PresolveOptions::default()));
    }

    #[test]
    fn tangent_curves_separated_by_a_combination() {
        // y^2 <= 1 gives y >= -1; with y = s - 1 the atoms are s^2 - 3s > 0
        // and 2s - s^2 - x^2 >= 0, whose sum with weight 3/2 is <= 0.
        let mut c = conj("y^2 - y - 2 > 0 && x^2 + y^2 - 1 <= 0", &["x", "y"]);
        assert!(!c.presolve(&bx(2), &PresolveOptions::default()));
        let mut c = conj("y^2 - y - 2 >= 0 && x^2 + y^2 - 1 <= 0", &["x", "y"]);
        assert!(c.presolve(&bx(2), &PresolveOptions::default()));
    }

    #[test]
    fn definition_chain_reduces_to_its_root() {
        let names = ["vc", "fa", "fr", "ac", "vc1"];
        let src = "vc < 49.61 && fa = 0.5418*vc^2 && fr = 1000 - fa && ac = 0.0005*fr && vc1 = vc + ac";
        let mut c = conj(src, &names);
        let keep = PresolveOptions { protected: BTreeSet::from([4]), project: true };
        assert!(c.presolve(&vec![Interval::new(-2000.0, 2000.0); 5], &keep));
        assert!(c.atoms.iter().all(|a| a.rel != Rel::Eq));
        assert_eq!(c.free_vars(), BTreeSet::from([0]));
    }

    #[test]
    fn projection_decides_linear_systems() {
        let mut c = conj("y - x > 0 && x + y > 0 && y <= 0", &["x", "y"]);
        assert!(!c.presolve(&bx(2), &all()));
        let mut c = conj("y - x > 0 && x + y > 0 && y <= 1", &["x", "y"]);
        assert!(c.presolve(&bx(2), &all()));
    }

    #[test]
    fn projection_through_transcendental_terms() {
        // 20y > 15x^2 - 4 and y <= 4/5 - cos(x) give 15x^2 + 20cos(x) < 20.
        let mut c = conj("15*x^2 < 4 + 20*y && y + cos(x) - 0.8 <= 0", &["x", "y"]);
        assert!(c.presolve(&bx(2), &all()));
        assert_eq!(c.free_vars(), BTreeSet::from([0]));
    }

    #[test]
    fn rebuild_chain_of_definitions() {
        let names: Vec<String> = ["vc", "fa", "fr"].iter().map(|s| s.to_string()).collect();
        let f: Formula = parse_formula("vc < 49.61 && fa = 0.5418*vc^2 && fr = 1000 - fa", &names).unwrap();
        let atoms: Vec<Atom> = f.atoms().into_iter().cloned().collect();
        let mut c = Conjunct::new(&atoms, 3);
        let big = vec![Interval::new(-2000.0, 2000.0); 3];
        assert!(c.presolve(&big, &PresolveOptions::default()));
        assert_eq!(c.free_vars(), BTreeSet::from([0]));
        let mut pt = vec![Rational::from_integer(10.into()), Rational::zero(), Rational::zero()];
        assert!(c.rebuild(&mut pt, None));
        let q: Vec<f64> = pt.iter().map(|r| num_traits::ToPrimitive::to_f64(r).unwrap()).collect();
        assert!((q[1] - 54.18).abs() < 1e-9 && (q[2] - 945.82).abs() < 1e-9);
    }
}
