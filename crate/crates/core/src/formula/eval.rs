use num_traits::{One, Zero};

use super::{EvalError, Expr, Interval};
use crate::Rational;

impl Expr {
    /// Round-to-nearest evaluation; `point[i]` is the value of `Var(i)`.
    pub fn eval_float(&self, point: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Var(i) => point[*i],
            Expr::Const(q) => num_traits::ToPrimitive::to_f64(q).unwrap_or(f64::NAN),
            Expr::Add(a, b) => a.eval_float(point)? + b.eval_float(point)?,
            Expr::Sub(a, b) => a.eval_float(point)? - b.eval_float(point)?,
            Expr::Mul(a, b) => a.eval_float(point)? * b.eval_float(point)?,
            Expr::Pow(a, n) => a.eval_float(point)?.powi(*n as i32),
            Expr::Neg(a) => -a.eval_float(point)?,
            Expr::Sin(a) => a.eval_float(point)?.sin(),
            Expr::Cos(a) => a.eval_float(point)?.cos(),
            Expr::Exp(a) => a.eval_float(point)?.exp(),
            Expr::Log(a) => {
                let v = a.eval_float(point)?;
                if v <= 0.0 {
                    return Err(EvalError::Domain("log of a non-positive value"));
                }
                v.ln()
            }
        })
    }

    pub fn eval_rational(&self, point: &[Rational]) -> Result<Rational, EvalError> {
        Ok(match self {
            Expr::Var(i) => point[*i].clone(),
            Expr::Const(q) => q.clone(),
            Expr::Add(a, b) => a.eval_rational(point)? + b.eval_rational(point)?,
            Expr::Sub(a, b) => a.eval_rational(point)? - b.eval_rational(point)?,
            Expr::Mul(a, b) => a.eval_rational(point)? * b.eval_rational(point)?,
            Expr::Pow(a, n) => {
                let base = a.eval_rational(point)?;
                num_traits::pow::pow(base, *n as usize)
            }
            Expr::Neg(a) => -a.eval_rational(point)?,
            Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) | Expr::Log(_) => {
                return Err(EvalError::TranscendentalPresent)
            }
        })
    }

    /// Sound enclosure of the range of `self` over `bx`.
    pub fn eval_interval(&self, bx: &[Interval]) -> Result<Interval, EvalError> {
        self.eval_interval_checked(bx).map(|(iv, _)| iv)
    }

    /// As [`Expr::eval_interval`], also reporting whether some point of the
    /// box was outside the domain of a `log` (the enclosure then only covers
    /// the points where the expression is defined).
    pub fn eval_interval_checked(&self, bx: &[Interval]) -> Result<(Interval, bool), EvalError> {
        let mut clipped = false;
        let iv = self.interval_rec(bx, &mut clipped)?;
        Ok((iv, clipped))
    }

    fn interval_rec(&self, bx: &[Interval], clipped: &mut bool) -> Result<Interval, EvalError> {
        Ok(match self {
            Expr::Var(i) => bx[*i],
            Expr::Const(q) => Interval::from_rational(q),
            Expr::Add(a, b) => a.interval_rec(bx, clipped)? + b.interval_rec(bx, clipped)?,
            Expr::Sub(a, b) => a.interval_rec(bx, clipped)? - b.interval_rec(bx, clipped)?,
            Expr::Mul(a, b) => {
                if a == b {
                    a.interval_rec(bx, clipped)?.powi(2)
                } else {
                    a.interval_rec(bx, clipped)? * b.interval_rec(bx, clipped)?
                }
            }
            Expr::Pow(a, n) => a.interval_rec(bx, clipped)?.powi(*n),
            Expr::Neg(a) => -a.interval_rec(bx, clipped)?,
            Expr::Sin(a) => a.interval_rec(bx, clipped)?.sin(),
            Expr::Cos(a) => a.interval_rec(bx, clipped)?.cos(),
            Expr::Exp(a) => a.interval_rec(bx, clipped)?.exp(),
            Expr::Log(a) => {
                let arg = a.interval_rec(bx, clipped)?;
                let (iv, c) = arg
                    .ln()
                    .ok_or(EvalError::Domain("log argument is non-positive on the whole box"))?;
                *clipped |= c;
                iv
            }
        })
    }

    /// Constant folding of rational subtrees; used by the parser.
    pub(crate) fn const_value(&self) -> Option<Rational> {
        match self {
            Expr::Const(q) => Some(q.clone()),
            Expr::Var(_) | Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) | Expr::Log(_) => None,
            Expr::Add(a, b) => Some(a.const_value()? + b.const_value()?),
            Expr::Sub(a, b) => Some(a.const_value()? - b.const_value()?),
            Expr::Mul(a, b) => Some(a.const_value()? * b.const_value()?),
            Expr::Pow(a, n) => {
                let base = a.const_value()?;
                let mut acc = Rational::one();
                for _ in 0..*n {
                    acc *= &base;
                }
                Some(acc)
            }
            Expr::Neg(a) => Some(-a.const_value()?),
        }
        .filter(|q: &Rational| !q.denom().is_zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse::parse_expr;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn float_examples() {
        let vars = names(&["x", "y"]);
        let e = parse_expr("y - x^2", &vars).unwrap();
        assert_eq!(e.eval_float(&[2.0, 5.0]).unwrap(), 1.0);
        let c = parse_expr("cos(x)", &vars).unwrap();
        assert_eq!(c.eval_float(&[0.0, 0.0]).unwrap(), 1.0);
        let l = parse_expr("log(x)", &vars).unwrap();
        assert!(matches!(l.eval_float(&[-1.0, 0.0]), Err(EvalError::Domain(_))));
    }

    #[test]
    fn rational_examples() {
        let vars = names(&["x", "y"]);
        let e = parse_expr("15*x^2 - 20*y - 4", &vars).unwrap();
        assert_eq!(e.eval_rational(&[q(1, 1), q(1, 1)]).unwrap(), q(-9, 1));
        let s = parse_expr("x + y", &vars).unwrap();
        assert_eq!(s.eval_rational(&[q(1, 3), q(2, 3)]).unwrap(), q(1, 1));
        let t = parse_expr("sin(x)", &vars).unwrap();
        assert_eq!(
            t.eval_rational(&[q(0, 1), q(0, 1)]),
            Err(EvalError::TranscendentalPresent)
        );
    }

    #[test]
    fn interval_examples() {
        let vars = names(&["x", "y"]);
        let sq = parse_expr("x^2", &vars).unwrap();
        let iv = sq
            .eval_interval(&[Interval::new(-1.0, 2.0), Interval::point(0.0)])
            .unwrap();
        assert_eq!(iv.lo, 0.0);
        assert!((iv.hi - 4.0).abs() < 1e-12);

        let c = parse_expr("cos(x)", &vars).unwrap();
        let iv = c
            .eval_interval(&[Interval::new(0.0, 4.0), Interval::point(0.0)])
            .unwrap();
        assert_eq!((iv.lo, iv.hi), (-1.0, 1.0));

        let e = parse_expr("y - x^2", &vars).unwrap();
        let iv = e
            .eval_interval(&[Interval::new(-1.0, 1.0), Interval::new(0.0, 1.0)])
            .unwrap();
        assert!(iv.lo <= -1.0 && iv.lo > -1.0 - 1e-12);
        assert!(iv.hi >= 1.0 && iv.hi < 1.0 + 1e-12);
    }

    #[test]
    fn log_over_negative_box_is_domain_error() {
        let vars = names(&["x"]);
        let l = parse_expr("log(x)", &vars).unwrap();
        assert!(l.eval_interval(&[Interval::new(-3.0, -1.0)]).is_err());
        let (_, clipped) = l.eval_interval_checked(&[Interval::new(-3.0, 1.0)]).unwrap();
        assert!(clipped);
    }
}
