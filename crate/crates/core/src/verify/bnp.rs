//! Interval branch-and-prune over a negation-normal formula.

use std::collections::VecDeque;

use super::taylor;
use crate::formula::{Atom, Formula, Interval, Rel};
use crate::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Tri {
    True,
    False,
    Unknown,
}

fn atom_tri(a: &Atom, bx: &[Interval], active: &[usize]) -> Tri {
    let (iv, clipped) = match a.lhs.eval_interval_checked(bx) {
        Ok(r) => r,
        // No point of the box is in the domain, so the atom is false there.
        Err(_) => return Tri::False,
    };
    let tri = decide(a.rel, iv, clipped);
    if tri != Tri::Unknown || clipped {
        return tri;
    }
    let vars: Vec<usize> = {
        let mut s = std::collections::BTreeSet::new();
        a.lhs.collect_vars(&mut s);
        active.iter().copied().filter(|v| s.contains(v)).collect()
    };
    match taylor::enclosure(&a.lhs, bx, &vars) {
        Some(t) => {
            let lo = iv.lo.max(t.lo);
            let hi = iv.hi.min(t.hi);
            if lo > hi {
                return Tri::Unknown;
            }
            decide(a.rel, Interval { lo, hi }, false)
        }
        None => Tri::Unknown,
    }
}

fn decide(rel: Rel, iv: Interval, clipped: bool) -> Tri {
    let (t, f) = match rel {
        Rel::Lt => (iv.hi < 0.0, iv.lo >= 0.0),
        Rel::Le => (iv.hi <= 0.0, iv.lo > 0.0),
        Rel::Gt => (iv.lo > 0.0, iv.hi <= 0.0),
        Rel::Ge => (iv.lo >= 0.0, iv.hi < 0.0),
        Rel::Eq => (iv.lo == 0.0 && iv.hi == 0.0, iv.lo > 0.0 || iv.hi < 0.0),
    };
    if f {
        Tri::False
    } else if t && !clipped {
        Tri::True
    } else {
        Tri::Unknown
    }
}

/// Three-valued truth of an NNF formula over a box.
pub(crate) fn formula_tri(f: &Formula, bx: &[Interval], active: &[usize]) -> Tri {
    match f {
        Formula::Atom(a) => atom_tri(a, bx, active),
        Formula::And(a, b) => match formula_tri(a, bx, active) {
            Tri::False => Tri::False,
            ta => match (ta, formula_tri(b, bx, active)) {
                (_, Tri::False) => Tri::False,
                (Tri::True, Tri::True) => Tri::True,
                _ => Tri::Unknown,
            },
        },
        Formula::Or(a, b) => match formula_tri(a, bx, active) {
            Tri::True => Tri::True,
            ta => match (ta, formula_tri(b, bx, active)) {
                (_, Tri::True) => Tri::True,
                (Tri::False, Tri::False) => Tri::False,
                _ => Tri::Unknown,
            },
        },
        Formula::Not(a) => match formula_tri(a, bx, active) {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        },
    }
}

pub(crate) struct SearchLimits {
    pub min_width: f64,
    pub max_boxes: usize,
    /// Stop once this many points were accepted.
    pub want: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SearchReport {
    /// Every box was discarded.
    pub exhausted_queue: bool,
    pub boxes: usize,
    /// Boxes dropped undecided because they reached the width floor.
    pub tiny: usize,
    pub accepted: usize,
}

/// Rational point at the middle of `bx` for the `active` dimensions and at
/// `base` elsewhere.
fn midpoint(bx: &[Interval], active: &[usize], base: &[Rational]) -> Vec<Rational> {
    let mut p = base.to_vec();
    for &d in active {
        p[d] = Rational::from_float(bx[d].mid()).expect("finite midpoint");
    }
    p
}

/// Breadth-first branch-and-prune. Boxes are processed in creation order;
/// each undecided box has its midpoint offered to `accept` (which performs
/// exact certification) before being bisected along its widest active
/// dimension, ties to the lowest index.
pub(crate) fn search(
    f: &Formula,
    bx: &[Interval],
    active: &[usize],
    base: &[Rational],
    limits: &SearchLimits,
    accept: &mut dyn FnMut(&[Rational]) -> bool,
) -> SearchReport {
    let mut report = SearchReport { exhausted_queue: false, boxes: 0, tiny: 0, accepted: 0 };
    let mut queue: VecDeque<Vec<Interval>> = VecDeque::from([bx.to_vec()]);
    let float_base: Vec<f64> = base
        .iter()
        .map(|q| num_traits::ToPrimitive::to_f64(q).unwrap_or(0.0))
        .collect();
    while let Some(b) = queue.pop_front() {
        if report.boxes >= limits.max_boxes {
            return report;
        }
        report.boxes += 1;
        let tri = formula_tri(f, &b, active);
        if tri == Tri::False {
            continue;
        }
        let mut fp = float_base.clone();
        for &d in active {
            fp[d] = b[d].mid();
        }
        let plausible = tri == Tri::True || f.holds_float(&fp) == Some(true);
        if plausible && accept(&midpoint(&b, active, base)) {
            report.accepted += 1;
            if report.accepted >= limits.want {
                return report;
            }
        }
        let widest = active
            .iter()
            .copied()
            .max_by(|&i, &j| b[i].width().total_cmp(&b[j].width()).then(j.cmp(&i)));
        let Some(d) = widest else {
            // Nothing to split: the formula is constant on this box.
            if tri != Tri::True {
                report.tiny += 1;
            }
            continue;
        };
        if !(b[d].width() >= limits.min_width) || b[d].mid() <= b[d].lo || b[d].mid() >= b[d].hi {
            report.tiny += 1;
            continue;
        }
        let (l, r) = b[d].split();
        let mut left = b.clone();
        left[d] = l;
        let mut right = b;
        right[d] = r;
        queue.push_back(left);
        queue.push_back(right);
    }
    report.exhausted_queue = true;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn limits() -> SearchLimits {
        SearchLimits { min_width: 1e-4, max_boxes: 100_000, want: 1 }
    }

    #[test]
    fn disjoint_intervals_prune_away() {
        let f = parse_formula("x + 1 < 0 && x - 1 >= 0", &names(&["x"])).unwrap();
        let bx = vec![Interval::new(-10.0, 10.0)];
        let base = vec![Rational::from_integer(0.into())];
        let r = search(&f, &bx, &[0], &base, &limits(), &mut |_| true);
        assert!(r.exhausted_queue);
        assert_eq!(r.accepted, 0);
        assert_eq!(r.tiny, 0);
    }

    #[test]
    fn finds_point_in_open_interval() {
        let f = parse_formula("x > 0 && x < 2", &names(&["x"])).unwrap();
        let bx = vec![Interval::new(-10.0, 10.0)];
        let base = vec![Rational::from_integer(0.into())];
        let mut got = Vec::new();
        let r = search(&f, &bx, &[0], &base, &limits(), &mut |p| {
            got.push(p.to_vec());
            true
        });
        assert_eq!(r.accepted, 1);
        let x = num_traits::ToPrimitive::to_f64(&got[0][0]).unwrap();
        assert!(x > 0.0 && x < 2.0);
    }

    #[test]
    fn tri_of_disjunction() {
        let f = parse_formula("x < -1 || x > 1", &names(&["x"])).unwrap();
        assert_eq!(formula_tri(&f, &[Interval::new(2.0, 3.0)], &[0]), Tri::True);
        assert_eq!(formula_tri(&f, &[Interval::new(-0.5, 0.5)], &[0]), Tri::False);
        assert_eq!(formula_tri(&f, &[Interval::new(0.0, 3.0)], &[0]), Tri::Unknown);
    }
}
