use std::fmt;

use num_traits::Signed;

use super::{Expr, Formula};
use crate::Rational;

/// Printing that reparses to the same tree.
pub struct ExprDisplay<'a> {
    pub(super) expr: &'a Expr,
    pub(super) names: &'a [String],
}

pub struct FormulaDisplay<'a> {
    pub(super) formula: &'a Formula,
    pub(super) names: &'a [String],
}

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const PRIMARY: u8 = 5;

fn const_level(q: &Rational) -> u8 {
    if !q.is_integer() {
        // Printed as a parenthesised fraction.
        PRIMARY
    } else if q.is_negative() {
        UNARY
    } else {
        PRIMARY
    }
}

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => SUM,
        Expr::Mul(..) => PRODUCT,
        Expr::Neg(..) => UNARY,
        Expr::Pow(..) => 4,
        Expr::Const(q) => const_level(q),
        _ => PRIMARY,
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, q: &Rational) -> fmt::Result {
    if q.is_integer() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "({}/{})", q.numer(), q.denom())
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, names: &[String], min: u8) -> fmt::Result {
    let paren = level(e) < min;
    if paren {
        write!(f, "(")?;
    }
    match e {
        Expr::Var(i) => match names.get(*i) {
            Some(n) => write!(f, "{n}")?,
            None => write!(f, "v{i}")?,
        },
        Expr::Const(q) => write_const(f, q)?,
        Expr::Add(a, b) => {
            write_expr(f, a, names, SUM)?;
            write!(f, " + ")?;
            write_expr(f, b, names, PRODUCT)?;
        }
        Expr::Sub(a, b) => {
            write_expr(f, a, names, SUM)?;
            write!(f, " - ")?;
            write_expr(f, b, names, PRODUCT)?;
        }
        Expr::Mul(a, b) => {
            write_expr(f, a, names, PRODUCT)?;
            write!(f, " * ")?;
            write_expr(f, b, names, UNARY)?;
        }
        Expr::Neg(a) => {
            write!(f, "-")?;
            // A bare literal after `-` would be read back as a negative constant.
            let min = if matches!(**a, Expr::Const(_)) { PRIMARY + 1 } else { UNARY };
            write_expr(f, a, names, min)?;
        }
        Expr::Pow(a, n) => {
            write_expr(f, a, names, PRIMARY)?;
            write!(f, "^{n}")?;
        }
        Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Log(a) => {
            let name = match e {
                Expr::Sin(_) => "sin",
                Expr::Cos(_) => "cos",
                Expr::Exp(_) => "exp",
                _ => "log",
            };
            write!(f, "{name}(")?;
            write_expr(f, a, names, 0)?;
            write!(f, ")")?;
        }
    }
    if paren {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.expr, self.names, 0)
    }
}

fn formula_level(g: &Formula) -> u8 {
    match g {
        Formula::Or(..) => 1,
        Formula::And(..) => 2,
        Formula::Not(..) => 3,
        Formula::Atom(..) => 4,
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, g: &Formula, names: &[String], min: u8) -> fmt::Result {
    let paren = formula_level(g) < min;
    if paren {
        write!(f, "(")?;
    }
    match g {
        Formula::Atom(a) => {
            write_expr(f, &a.lhs, names, 0)?;
            write!(f, " {} 0", a.rel.symbol())?;
        }
        Formula::Or(a, b) => {
            write_formula(f, a, names, 1)?;
            write!(f, " || ")?;
            write_formula(f, b, names, 2)?;
        }
        Formula::And(a, b) => {
            write_formula(f, a, names, 2)?;
            write!(f, " && ")?;
            write_formula(f, b, names, 3)?;
        }
        Formula::Not(a) => {
            write!(f, "!")?;
            write_formula(f, a, names, 3)?;
        }
    }
    if paren {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self.formula, self.names, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::{parse_expr, parse_formula};
    use super::super::parse_problem;

    fn names() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn expression_round_trips() {
        for src in [
            "x - (y - 1)",
            "-3 * x",
            "-(3)",
            "-3^2",
            "(-3)^2",
            "x * (2/3) + -4",
            "x - -y",
            "--3",
            "sin(x + y) * cos(x)^2",
            "(x + y)^2",
            "exp(-x) - log(y)",
        ] {
            let e = parse_expr(src, &names()).unwrap();
            let printed = e.display(&names()).to_string();
            let back = parse_expr(&printed, &names()).unwrap();
            assert_eq!(e, back, "{src} printed as {printed}");
        }
    }

    #[test]
    fn formula_round_trips() {
        for src in [
            "x < 0 || y > 0 && x = 0",
            "(x < 0 || y > 0) && x = 0",
            "!(x < 0 && y >= 1)",
            "(x + y)^2 > 0",
        ] {
            let f = parse_formula(src, &names()).unwrap();
            let printed = f.display(&names()).to_string();
            assert_eq!(f, parse_formula(&printed, &names()).unwrap(), "{printed}");
        }
    }

    #[test]
    fn problem_round_trip() {
        let p = parse_problem(
            "vars vc, fa, vc1; common vc1; phi: vc < 49.61 && fa = 0.5418*vc^2; psi: vc1 >= 49.61; degree: 1; option box = 100;",
        )
        .unwrap();
        assert_eq!(p, parse_problem(&p.to_string()).unwrap());
    }
}
