//! The box domain: one interval per variable.

use std::collections::BTreeMap;
use std::fmt;

use crate::formula::{Atom, Formula, Rel, Var, VarSet};
use crate::lattice::{
    interval_join, AbstractDomain, Branch, DomainError, ExtendedInt, Interval, Kleene,
};

/// The interval denoted by `x rel c`, or `None` for `≠`.
pub fn rel_bound(rel: Rel, c: i64) -> Option<Interval> {
    Some(match rel {
        Rel::Le => Interval::at_most(c),
        Rel::Lt => c.checked_sub(1).map_or(Interval::empty(), Interval::at_most),
        Rel::Ge => Interval::at_least(c),
        Rel::Gt => c.checked_add(1).map_or(Interval::empty(), Interval::at_least),
        Rel::Eq => Interval::singleton(c),
        Rel::Neq => return None,
    })
}

/// What an atom means to a box: nothing, a contradiction, or a bound.
enum Unary {
    Ground(bool),
    Bound(Var, Interval),
}

fn classify(a: &Atom) -> Option<Unary> {
    if let Some(truth) = a.ground_truth() {
        return truth.ok().map(Unary::Ground);
    }
    let (x, rel, c) = a.as_unary_bound()?;
    Some(Unary::Bound(x, rel_bound(rel, c.ok()?)?))
}

/// Selects the split variable among `(name, interval)` pairs: smallest
/// width among non-singletons, ties broken by name.
pub(crate) fn pick_split<'a>(
    items: impl Iterator<Item = (&'a Var, Interval)>,
) -> Option<(&'a Var, Interval)> {
    let mut best: Option<(u128, &'a Var, Interval)> = None;
    for (x, itv) in items {
        if itv.is_empty() || itv.is_singleton() {
            continue;
        }
        let w = itv.width().unwrap_or(u128::MAX);
        let better = match &best {
            None => true,
            Some((bw, bx, _)) => w < *bw || (w == *bw && x < *bx),
        };
        if better {
            best = Some((w, x, itv));
        }
    }
    best.map(|(_, x, itv)| (x, itv))
}

/// The two bound branches `x = l` and `x ≥ l + 1`.
pub(crate) fn bound_branches(x: &Var, itv: Interval) -> Result<Vec<Branch>, DomainError> {
    let ExtendedInt::Finite(l) = itv.lo() else {
        return Err(DomainError::InfiniteLowerBound(x.clone()));
    };
    Ok(vec![
        Branch::Bound(x.clone(), Interval::singleton(l)),
        Branch::Bound(x.clone(), Interval::at_least(l + 1)),
    ])
}

#[derive(Clone, Default, PartialEq, Eq)]
pub struct BoxDomain {
    env: BTreeMap<Var, Interval>,
    failed: bool,
    stamp: u64,
}

impl BoxDomain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, x: &Var) -> Option<Interval> {
        self.env.get(x).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Interval)> {
        self.env.iter()
    }

    /// Intersects the interval of `x` with `bound`, registering `x` if new.
    pub fn restrict(&mut self, x: &Var, bound: Interval) {
        match self.env.get_mut(x) {
            Some(cur) => {
                let next = interval_join(*cur, bound);
                if next != *cur {
                    *cur = next;
                    self.stamp += 1;
                }
            }
            None => {
                self.env.insert(x.clone(), bound);
                self.stamp += 1;
            }
        }
    }

    fn fail(&mut self) {
        if !self.failed {
            self.failed = true;
            self.stamp += 1;
        }
    }

    pub fn is_failed(&self) -> bool {
        self.failed || self.env.values().any(Interval::is_empty)
    }

    /// Pointwise join over the union of both domains.
    pub fn join(&mut self, other: &BoxDomain) {
        if other.failed {
            self.fail();
        }
        for (x, itv) in &other.env {
            self.restrict(x, *itv);
        }
    }

    /// `self ≤ other` in the information order.
    pub fn leq(&self, other: &BoxDomain) -> bool {
        if other.is_failed() {
            return true;
        }
        !self.is_failed()
            && self.env.iter().all(|(x, itv)| itv.leq(&other.env.get(x).copied().unwrap_or_default()))
    }

    fn check(phi: &Formula) -> Result<Vec<Unary>, ()> {
        let mut out = Vec::new();
        for c in phi.conjuncts() {
            let Formula::Atom(a) = c else { return Err(()) };
            out.push(classify(a).ok_or(())?);
        }
        Ok(out)
    }
}

impl AbstractDomain for BoxDomain {
    fn supports(&self, phi: &Formula) -> bool {
        Self::check(phi).is_ok()
    }

    fn interpret(&mut self, phi: &Formula) -> Result<(), DomainError> {
        let parts = Self::check(phi).map_err(|_| DomainError::not_supported("box", phi))?;
        for p in parts {
            match p {
                Unary::Ground(true) => {}
                Unary::Ground(false) => self.fail(),
                Unary::Bound(x, itv) => self.restrict(&x, itv),
            }
        }
        Ok(())
    }

    fn closure(&mut self) {}

    fn state(&self) -> Kleene {
        Kleene::from_bool(!self.is_failed())
    }

    fn project(&self, x: &Var) -> Interval {
        if self.failed {
            return Interval::empty();
        }
        self.env.get(x).copied().unwrap_or_default()
    }

    fn vars(&self) -> VarSet {
        self.env.keys().cloned().collect()
    }

    fn has_var(&self, x: &Var) -> bool {
        self.env.contains_key(x)
    }

    fn embed(&mut self, x: &Var, bound: Interval) {
        if self.env.contains_key(x) {
            self.restrict(x, bound);
        }
    }

    fn split(&self) -> Result<Vec<Branch>, DomainError> {
        if self.is_failed() {
            return Ok(Vec::new());
        }
        match pick_split(self.env.iter().map(|(x, i)| (x, *i))) {
            None => Ok(Vec::new()),
            Some((x, itv)) => bound_branches(x, itv),
        }
    }

    fn refine(&mut self, branch: &Branch) -> Result<(), DomainError> {
        match branch {
            Branch::Bound(x, itv) => {
                self.embed(x, *itv);
                Ok(())
            }
            _ => Err(DomainError::InvalidBranch),
        }
    }

    fn contains(&self, point: &dyn Fn(&Var) -> Option<i64>) -> bool {
        !self.failed && self.env.iter().all(|(x, itv)| point(x).is_some_and(|v| itv.contains(v)))
    }

    fn stamp(&self) -> u64 {
        self.stamp
    }
}

impl fmt::Debug for BoxDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.failed {
            return f.write_str("{failed}");
        }
        f.debug_map().entries(self.env.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{cst, var};

    fn iv(a: i64, b: i64) -> Interval {
        Interval::new(a, b)
    }

    fn x() -> Var {
        Var::new("x")
    }

    #[test]
    fn interpret_conjunction_of_bounds() {
        let mut b = BoxDomain::new();
        let phi = var("x").gt(2).and(var("x").le(4)).and(var("y").gt(0));
        b.interpret(&phi).unwrap();
        assert_eq!(b.project(&x()), iv(3, 4));
        assert_eq!(b.project(&Var::new("y")), Interval::at_least(1));

        let mut b = BoxDomain::new();
        b.interpret(&var("x").eq_to(7)).unwrap();
        assert_eq!(b.project(&x()), iv(7, 7));
    }

    #[test]
    fn mirror_shapes_and_ground_atoms() {
        let mut b = BoxDomain::new();
        b.interpret(&cst(3).lt(var("x"))).unwrap();
        assert_eq!(b.project(&x()), Interval::at_least(4));
        b.interpret(&cst(3).le(cst(4))).unwrap();
        assert_eq!(b.state(), Kleene::True);
        b.interpret(&cst(5).le(cst(4))).unwrap();
        assert_eq!(b.state(), Kleene::False);
    }

    #[test]
    fn unsupported_shapes() {
        let mut b = BoxDomain::new();
        let err = b.interpret(&(var("x") + var("y")).le(3)).unwrap_err();
        assert!(matches!(err, DomainError::NotSupported { .. }));
        assert!(!b.supports(&var("x").ne_to(3)));
        assert!(!b.supports(&var("x").le(3).or(var("x").ge(5))));
        assert_eq!(b, BoxDomain::new());
    }

    #[test]
    fn join_examples() {
        let mut a = BoxDomain::new();
        a.interpret(&var("x").ge(3)).unwrap();
        let mut b = BoxDomain::new();
        b.interpret(&var("x").le(4)).unwrap();
        a.join(&b);
        assert_eq!(a.project(&x()), iv(3, 4));

        let mut e = BoxDomain::new();
        let mut y = BoxDomain::new();
        y.restrict(&Var::new("y"), iv(1, 2));
        e.join(&y);
        assert_eq!(e.project(&Var::new("y")), iv(1, 2));

        let mut p = BoxDomain::new();
        p.restrict(&x(), iv(1, 2));
        let mut q = BoxDomain::new();
        q.restrict(&x(), iv(4, 5));
        p.join(&q);
        assert_eq!(p.state(), Kleene::False);
        assert!(p.project(&x()).is_empty());
    }

    #[test]
    fn state_and_projection() {
        let mut b = BoxDomain::new();
        assert_eq!(b.state(), Kleene::True);
        b.restrict(&x(), iv(1, 3));
        assert_eq!(b.state(), Kleene::True);
        assert_eq!(b.project(&Var::new("y")), Interval::bottom());
    }

    #[test]
    fn split_examples() {
        let mut b = BoxDomain::new();
        b.restrict(&x(), iv(1, 3));
        assert_eq!(
            b.split().unwrap(),
            vec![Branch::Bound(x(), iv(1, 1)), Branch::Bound(x(), Interval::at_least(2))]
        );
        let mut left = b.clone();
        left.refine(&b.split().unwrap()[1]).unwrap();
        assert_eq!(left.project(&x()), iv(2, 3));

        let mut s = BoxDomain::new();
        s.restrict(&x(), iv(5, 5));
        assert!(s.split().unwrap().is_empty());

        b.restrict(&Var::new("y"), iv(0, 1));
        assert!(matches!(&b.split().unwrap()[0], Branch::Bound(v, _) if v.name() == "y"));
    }

    #[test]
    fn split_needs_finite_lower_bound() {
        let mut b = BoxDomain::new();
        b.restrict(&x(), Interval::at_most(3));
        assert_eq!(b.split(), Err(DomainError::InfiniteLowerBound(x())));
    }
}
