//! Second-order Taylor enclosures via interval forward differentiation.
//!
//! For a box `B` and an expansion point `c` in it,
//!
//!   e(x) ∈ e(c) + ∇e(c)·(x − c) + ½ (x − c)ᵀ H(B) (x − c)
//!
//! where `H(B)` encloses the Hessian over the box. Expanding at a vertex
//! makes every `x − c` single-signed, which is what decides atoms whose
//! boundary touches the other side at a split point.

use crate::formula::{Expr, Interval};

#[derive(Debug, Clone)]
struct D2 {
    v: Interval,
    g: Vec<Interval>,
    /// Row-major n×n.
    h: Vec<Interval>,
}

fn zero() -> Interval {
    Interval::point(0.0)
}

impl D2 {
    fn constant(v: Interval, n: usize) -> D2 {
        D2 { v, g: vec![zero(); n], h: vec![zero(); n * n] }
    }

    fn n(&self) -> usize {
        self.g.len()
    }

    fn add(&self, o: &D2, sign: f64) -> D2 {
        let s = |a: Interval, b: Interval| if sign > 0.0 { a + b } else { a - b };
        D2 {
            v: s(self.v, o.v),
            g: self.g.iter().zip(&o.g).map(|(a, b)| s(*a, *b)).collect(),
            h: self.h.iter().zip(&o.h).map(|(a, b)| s(*a, *b)).collect(),
        }
    }

    fn mul(&self, o: &D2) -> D2 {
        let n = self.n();
        let mut h = vec![zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                h[k] = self.h[k] * o.v + self.g[i] * o.g[j] + self.g[j] * o.g[i] + self.v * o.h[k];
            }
        }
        D2 {
            v: self.v * o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| *a * o.v + self.v * *b).collect(),
            h,
        }
    }

    /// f(self) given enclosures of f, f', f'' at `self.v`.
    fn chain(&self, f: Interval, d1: Interval, d2: Interval) -> D2 {
        let n = self.n();
        let mut h = vec![zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                h[k] = d1 * self.h[k] + d2 * (self.g[i] * self.g[j]);
            }
        }
        D2 { v: f, g: self.g.iter().map(|a| d1 * *a).collect(), h }
    }
}

fn recip(iv: Interval) -> Option<Interval> {
    if iv.contains_zero() {
        return None;
    }
    Some(Interval {
        lo: (1.0 / iv.hi).next_down(),
        hi: (1.0 / iv.lo).next_up(),
    })
}

fn eval(e: &Expr, bx: &[Interval], slot: &dyn Fn(usize) -> Option<usize>, n: usize) -> Option<D2> {
    let rec = |x: &Expr| eval(x, bx, slot, n);
    Some(match e {
        Expr::Var(i) => {
            let mut d = D2::constant(bx[*i], n);
            if let Some(k) = slot(*i) {
                d.g[k] = Interval::point(1.0);
            }
            d
        }
        Expr::Const(q) => D2::constant(Interval::from_rational(q), n),
        Expr::Add(a, b) => rec(a)?.add(&rec(b)?, 1.0),
        Expr::Sub(a, b) => rec(a)?.add(&rec(b)?, -1.0),
        Expr::Mul(a, b) => rec(a)?.mul(&rec(b)?),
        Expr::Neg(a) => {
            let d = rec(a)?;
            D2 { v: -d.v, g: d.g.iter().map(|x| -*x).collect(), h: d.h.iter().map(|x| -*x).collect() }
        }
        Expr::Pow(a, k) => {
            let d = rec(a)?;
            match *k {
                0 => D2::constant(Interval::point(1.0), n),
                1 => d,
                k => {
                    let d1 = d.v.powi(k - 1).scale(k as f64);
                    let d2 = d.v.powi(k - 2).scale((k * (k - 1)) as f64);
                    d.chain(d.v.powi(k), d1, d2)
                }
            }
        }
        Expr::Sin(a) => {
            let d = rec(a)?;
            let (s, c) = (d.v.sin(), d.v.cos());
            d.chain(s, c, -s)
        }
        Expr::Cos(a) => {
            let d = rec(a)?;
            let (s, c) = (d.v.sin(), d.v.cos());
            d.chain(c, -s, -c)
        }
        Expr::Exp(a) => {
            let d = rec(a)?;
            let x = d.v.exp();
            d.chain(x, x, x)
        }
        Expr::Log(a) => {
            let d = rec(a)?;
            let (l, clipped) = d.v.ln()?;
            if clipped {
                return None;
            }
            let r = recip(d.v)?;
            d.chain(l, r, -(r * r))
        }
    })
}

/// Enclosure of `e` over `bx` from second-order expansions at the box
/// midpoint and (for at most three active dimensions) every vertex,
/// intersected. `None` if differentiation is not possible on the box.
pub(crate) fn enclosure(e: &Expr, bx: &[Interval], active: &[usize]) -> Option<Interval> {
    let n = active.len();
    if n == 0 {
        return None;
    }
    let slot = |v: usize| active.iter().position(|&a| a == v);
    let hess = eval(e, bx, &slot, n)?.h;

    let mut centers: Vec<Vec<f64>> = vec![active.iter().map(|&d| bx[d].mid()).collect()];
    if n <= 3 {
        for mask in 0..(1usize << n) {
            centers.push(
                active
                    .iter()
                    .enumerate()
                    .map(|(k, &d)| if mask >> k & 1 == 1 { bx[d].hi } else { bx[d].lo })
                    .collect(),
            );
        }
    }

    let mut best: Option<Interval> = None;
    for c in centers {
        let mut at = bx.to_vec();
        for (k, &d) in active.iter().enumerate() {
            at[d] = Interval::point(c[k]);
        }
        let Some(p) = eval(e, &at, &slot, n) else { continue };
        let dx: Vec<Interval> = active.iter().enumerate().map(|(k, &d)| bx[d] - Interval::point(c[k])).collect();
        let mut acc = p.v;
        for i in 0..n {
            acc = acc + p.g[i] * dx[i];
        }
        let half = Interval::point(0.5);
        for i in 0..n {
            acc = acc + half * hess[i * n + i] * dx[i].powi(2);
            for j in (i + 1)..n {
                acc = acc + hess[i * n + j] * (dx[i] * dx[j]);
            }
        }
        best = Some(match best {
            None => acc,
            Some(b) => Interval { lo: b.lo.max(acc.lo), hi: b.hi.min(acc.hi) },
        });
    }
    best.filter(|b| b.lo <= b.hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_expr;

    #[test]
    fn touching_minimum_at_vertex_is_nonnegative() {
        let names = vec!["x".to_string()];
        let e = parse_expr("15*x^2 + 20*cos(x) - 20", &names).unwrap();
        let bx = vec![Interval::new(0.0, 0.125)];
        let natural = e.eval_interval(&bx).unwrap();
        assert!(natural.lo < 0.0);
        let t = enclosure(&e, &bx, &[0]).unwrap();
        assert!(t.lo >= 0.0, "{t}");
    }

    #[test]
    fn enclosure_contains_samples() {
        let names = vec!["x".to_string(), "y".to_string()];
        let e = parse_expr("x^3 - 2*x*y + sin(y) + exp(x) * y", &names).unwrap();
        let bx = vec![Interval::new(-0.3, 0.2), Interval::new(0.1, 0.4)];
        let t = enclosure(&e, &bx, &[0, 1]).unwrap();
        for i in 0..=10 {
            for j in 0..=10 {
                let p = [-0.3 + 0.05 * i as f64, 0.1 + 0.03 * j as f64];
                let v = e.eval_float(&p).unwrap();
                assert!(t.lo <= v + 1e-12 && v - 1e-12 <= t.hi, "{v} not in {t}");
            }
        }
    }
}
