//! Quantifier-free nonlinear real arithmetic: expressions, atoms, formulas
//! and interpolation problems.
//!
//! Variables are referred to by index into the owning [`Problem`]'s
//! variable list; names only matter when parsing and printing.

mod eval;
pub mod interval;
mod parse;
mod print;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::Rational;

pub use interval::{Interval, IntervalBox};
pub use parse::{parse_expr, parse_formula, parse_problem};
pub use print::{ExprDisplay, FormulaDisplay};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("parse error at {line}:{col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("undeclared variable `{name}` at {line}:{col}")]
    UndeclaredVariable {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("bad degree at {line}:{col}: {message}")]
    BadDegree {
        line: usize,
        col: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("transcendental function present in exact evaluation")]
    TranscendentalPresent,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Var(usize),
    Const(Rational),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Integer power with exponent >= 1.
    Pow(Box<Expr>, u32),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

impl Expr {
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn constant(q: Rational) -> Expr {
        Expr::Const(q)
    }

    pub fn int(v: i64) -> Expr {
        Expr::Const(Rational::from_integer(v.into()))
    }

    pub fn is_zero_const(&self) -> bool {
        matches!(self, Expr::Const(q) if num_traits::Zero::is_zero(q))
    }

    /// True when no sin/cos/exp/log node occurs.
    pub fn is_algebraic(&self) -> bool {
        match self {
            Expr::Var(_) | Expr::Const(_) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.is_algebraic() && b.is_algebraic()
            }
            Expr::Pow(a, _) | Expr::Neg(a) => a.is_algebraic(),
            Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) | Expr::Log(_) => false,
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Expr::Var(i) => {
                out.insert(*i);
            }
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Pow(a, _)
            | Expr::Neg(a)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Exp(a)
            | Expr::Log(a) => a.collect_vars(out),
        }
    }

    /// Replaces every occurrence of `Var(var)` by `with`.
    pub fn substitute(&self, var: usize, with: &Expr) -> Expr {
        let sub = |e: &Expr| Box::new(e.substitute(var, with));
        match self {
            Expr::Var(i) if *i == var => with.clone(),
            Expr::Var(_) | Expr::Const(_) => self.clone(),
            Expr::Add(a, b) => Expr::Add(sub(a), sub(b)),
            Expr::Sub(a, b) => Expr::Sub(sub(a), sub(b)),
            Expr::Mul(a, b) => Expr::Mul(sub(a), sub(b)),
            Expr::Pow(a, n) => Expr::Pow(sub(a), *n),
            Expr::Neg(a) => Expr::Neg(sub(a)),
            Expr::Sin(a) => Expr::Sin(sub(a)),
            Expr::Cos(a) => Expr::Cos(sub(a)),
            Expr::Exp(a) => Expr::Exp(sub(a)),
            Expr::Log(a) => Expr::Log(sub(a)),
        }
    }

    /// Same value with the constant summands of the top-level sum combined
    /// exactly, so that e.g. `4/5 - (x - 1/5)` becomes `-x + 1`. Interval
    /// evaluation then sees one exact constant instead of two rounded ones.
    pub fn fold_constants(&self) -> Expr {
        fn walk(e: &Expr, positive: bool, konst: &mut Rational, terms: &mut Vec<(bool, Expr)>) {
            match e {
                Expr::Add(a, b) => {
                    walk(a, positive, konst, terms);
                    walk(b, positive, konst, terms);
                }
                Expr::Sub(a, b) => {
                    walk(a, positive, konst, terms);
                    walk(b, !positive, konst, terms);
                }
                Expr::Neg(a) => walk(a, !positive, konst, terms),
                Expr::Const(q) => {
                    if positive {
                        *konst += q;
                    } else {
                        *konst -= q;
                    }
                }
                other => terms.push((positive, other.clone())),
            }
        }
        let mut konst = Rational::from_integer(0.into());
        let mut terms = Vec::new();
        walk(self, true, &mut konst, &mut terms);
        let mut out: Option<Expr> = None;
        for (positive, t) in terms {
            out = Some(match (out, positive) {
                (None, true) => t,
                (None, false) => Expr::Neg(Box::new(t)),
                (Some(acc), true) => Expr::Add(Box::new(acc), Box::new(t)),
                (Some(acc), false) => Expr::Sub(Box::new(acc), Box::new(t)),
            });
        }
        match out {
            None => Expr::Const(konst),
            Some(acc) if konst == Rational::from_integer(0.into()) => acc,
            Some(acc) => Expr::Add(Box::new(acc), Box::new(Expr::Const(konst))),
        }
    }

    /// Renumbers variables through `map` (old index -> new index).
    pub fn remap_vars(&self, map: &dyn Fn(usize) -> usize) -> Expr {
        let r = |e: &Expr| Box::new(e.remap_vars(map));
        match self {
            Expr::Var(i) => Expr::Var(map(*i)),
            Expr::Const(_) => self.clone(),
            Expr::Add(a, b) => Expr::Add(r(a), r(b)),
            Expr::Sub(a, b) => Expr::Sub(r(a), r(b)),
            Expr::Mul(a, b) => Expr::Mul(r(a), r(b)),
            Expr::Pow(a, n) => Expr::Pow(r(a), *n),
            Expr::Neg(a) => Expr::Neg(r(a)),
            Expr::Sin(a) => Expr::Sin(r(a)),
            Expr::Cos(a) => Expr::Cos(r(a)),
            Expr::Exp(a) => Expr::Exp(r(a)),
            Expr::Log(a) => Expr::Log(r(a)),
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Gt => ">",
            Rel::Le => "<=",
            Rel::Ge => ">=",
            Rel::Eq => "=",
        }
    }

    /// Relation obtained by multiplying both sides by -1.
    pub fn flip(self) -> Rel {
        match self {
            Rel::Lt => Rel::Gt,
            Rel::Gt => Rel::Lt,
            Rel::Le => Rel::Ge,
            Rel::Ge => Rel::Le,
            Rel::Eq => Rel::Eq,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Rel::Lt | Rel::Gt)
    }

    /// Does `v rel 0` hold?
    pub fn holds<T: PartialOrd + num_traits::Zero>(self, v: &T) -> bool {
        let zero = T::zero();
        match self {
            Rel::Lt => *v < zero,
            Rel::Gt => *v > zero,
            Rel::Le => *v <= zero,
            Rel::Ge => *v >= zero,
            Rel::Eq => *v == zero,
        }
    }
}

/// `lhs rel 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub lhs: Expr,
    pub rel: Rel,
}

impl Atom {
    pub fn new(lhs: Expr, rel: Rel) -> Atom {
        Atom { lhs, rel }
    }

    /// Negation as a negation-free formula.
    pub fn negated(&self) -> Formula {
        let complement = |rel| Formula::Atom(Atom::new(self.lhs.clone(), rel));
        match self.rel {
            Rel::Lt => complement(Rel::Ge),
            Rel::Gt => complement(Rel::Le),
            Rel::Le => complement(Rel::Gt),
            Rel::Ge => complement(Rel::Lt),
            Rel::Eq => Formula::or(complement(Rel::Lt), complement(Rel::Gt)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(Atom),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
}

impl Formula {
    pub fn atom(lhs: Expr, rel: Rel) -> Formula {
        Formula::Atom(Atom::new(lhs, rel))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn not(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }

    /// Pushes negations into the atoms. With `negate` set the result is
    /// equivalent to the negation of `self`.
    pub fn to_nnf(&self, negate: bool) -> Formula {
        match (self, negate) {
            (Formula::Atom(a), false) => Formula::Atom(a.clone()),
            (Formula::Atom(a), true) => a.negated(),
            (Formula::Not(f), _) => f.to_nnf(!negate),
            (Formula::And(a, b), false) => Formula::and(a.to_nnf(false), b.to_nnf(false)),
            (Formula::And(a, b), true) => Formula::or(a.to_nnf(true), b.to_nnf(true)),
            (Formula::Or(a, b), false) => Formula::or(a.to_nnf(false), b.to_nnf(false)),
            (Formula::Or(a, b), true) => Formula::and(a.to_nnf(true), b.to_nnf(true)),
        }
    }

    pub fn is_nnf(&self) -> bool {
        match self {
            Formula::Atom(_) => true,
            Formula::And(a, b) | Formula::Or(a, b) => a.is_nnf() && b.is_nnf(),
            Formula::Not(_) => false,
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| out.push(a));
        out
    }

    fn visit_atoms<'a>(&'a self, f: &mut dyn FnMut(&'a Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
            Formula::Not(a) => a.visit_atoms(f),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| a.lhs.collect_vars(&mut out));
        out
    }

    pub fn is_algebraic(&self) -> bool {
        self.atoms().iter().all(|a| a.lhs.is_algebraic())
    }

    /// Evaluates with floats, `None` when an atom hits a domain error.
    pub fn holds_float(&self, point: &[f64]) -> Option<bool> {
        Some(match self {
            Formula::Atom(a) => a.rel.holds(&a.lhs.eval_float(point).ok()?),
            Formula::And(a, b) => a.holds_float(point)? && b.holds_float(point)?,
            Formula::Or(a, b) => a.holds_float(point)? || b.holds_float(point)?,
            Formula::Not(a) => !a.holds_float(point)?,
        })
    }

    pub fn remap_vars(&self, map: &dyn Fn(usize) -> usize) -> Formula {
        match self {
            Formula::Atom(a) => Formula::atom(a.lhs.remap_vars(map), a.rel),
            Formula::And(a, b) => Formula::and(a.remap_vars(map), b.remap_vars(map)),
            Formula::Or(a, b) => Formula::or(a.remap_vars(map), b.remap_vars(map)),
            Formula::Not(a) => Formula::not(a.remap_vars(map)),
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> FormulaDisplay<'a> {
        FormulaDisplay {
            formula: self,
            names,
        }
    }
}

/// An interpolation query `<phi, psi>` together with its variable
/// declarations and run options.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub vars: Vec<String>,
    /// Indices into `vars`, in declaration order.
    pub common: Vec<usize>,
    pub phi: Formula,
    pub psi: Formula,
    pub degree: u32,
    pub options: BTreeMap<String, String>,
}

impl Problem {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn common_names(&self) -> Vec<String> {
        self.common.iter().map(|&i| self.vars[i].clone()).collect()
    }

    pub fn is_common(&self, var: usize) -> bool {
        self.common.contains(&var)
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vars {};", self.vars.join(", "))?;
        writeln!(f, "common {};", self.common_names().join(", "))?;
        writeln!(f, "phi: {};", self.phi.display(&self.vars))?;
        writeln!(f, "psi: {};", self.psi.display(&self.vars))?;
        writeln!(f, "degree: {};", self.degree)?;
        for (k, v) in &self.options {
            writeln!(f, "option {k} = {v};")?;
        }
        Ok(())
    }
}
