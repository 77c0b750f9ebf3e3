use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use indexmap::IndexMap;

use crate::element::Element;
use crate::formula::{relax_candidates, substitute_fixed, vars, Formula, Label, Var, VarSet};
use crate::lattice::{
    interval_join, AbstractDomain, Branch, CloneMap, DomainError, Interval, Kleene,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TransferStatus {
    Pending,
    Transferred,
}

/// Holds formulas in `a1` until enough of their variables are fixed for
/// `a2` to take them. Meanwhile their relaxations are sent to `a2`.
pub struct DelayedProduct {
    a1: Box<Element>,
    a2: Box<Element>,
    table: IndexMap<Rc<Formula>, TransferStatus>,
    relaxed: Vec<Rc<Formula>>,
    /// Stamp of `a1` at the last transfer pass.
    seen_a1: Option<u64>,
    stamp: u64,
}

impl DelayedProduct {
    pub fn new(a1: Element, a2: Element) -> Self {
        DelayedProduct {
            a1: Box::new(a1),
            a2: Box::new(a2),
            table: IndexMap::new(),
            relaxed: Vec::new(),
            seen_a1: None,
            stamp: 0,
        }
    }

    pub fn a1(&self) -> &Element {
        &self.a1
    }

    pub fn a2(&self) -> &Element {
        &self.a2
    }

    pub fn table(&self) -> &IndexMap<Rc<Formula>, TransferStatus> {
        &self.table
    }

    /// Every relaxed formula joined into `a2` on the way to this element.
    pub fn relaxed(&self) -> &[Rc<Formula>] {
        &self.relaxed
    }

    pub fn pending(&self) -> impl Iterator<Item = &Formula> {
        self.table.iter().filter(|(_, s)| **s == TransferStatus::Pending).map(|(f, _)| &**f)
    }

    pub fn fork(&self, map: &mut CloneMap) -> Self {
        DelayedProduct {
            a1: Box::new(self.a1.fork(map)),
            a2: Box::new(self.a2.fork(map)),
            table: self.table.clone(),
            relaxed: self.relaxed.clone(),
            seen_a1: self.seen_a1,
            stamp: self.stamp,
        }
    }

    pub fn join(&mut self, other: &DelayedProduct) {
        let (s1, s2) = (self.a1.stamp(), self.a2.stamp());
        self.a1.join(&other.a1);
        self.a2.join(&other.a2);
        let mut changed = s1 != self.a1.stamp() || s2 != self.a2.stamp();
        for (f, s) in &other.table {
            match self.table.get_mut(f) {
                Some(cur) if *s > *cur => {
                    *cur = *s;
                    changed = true;
                }
                Some(_) => {}
                None => {
                    self.table.insert(f.clone(), *s);
                    changed = true;
                }
            }
        }
        for r in &other.relaxed {
            if !self.relaxed.contains(r) {
                self.relaxed.push(r.clone());
                changed = true;
            }
        }
        if changed {
            self.seen_a1 = None;
            self.stamp += 1;
        }
    }

    pub fn leq(&self, other: &DelayedProduct) -> bool {
        self.a1.leq(&other.a1)
            && self.a2.leq(&other.a2)
            && self.table.iter().all(|(f, s)| other.table.get(f).is_some_and(|t| s <= t))
    }

    fn fits_a2(&self, phi: &Formula) -> bool {
        let a2_vars = self.a2.vars();
        self.a2.supports(phi) && vars(phi).is_subset(&a2_vars)
    }

    /// One pass over the pending formulas: transfer the instantiated ones,
    /// relax the others.
    fn transfer(&mut self) {
        let now = self.a1.stamp();
        if self.seen_a1 == Some(now) {
            return;
        }
        self.seen_a1 = Some(now);
        let pending: Vec<Rc<Formula>> = self
            .table
            .iter()
            .filter(|(_, s)| **s == TransferStatus::Pending)
            .map(|(f, _)| f.clone())
            .collect();
        for phi in pending {
            let mut fixed = BTreeMap::new();
            let mut lb = BTreeMap::new();
            let mut ub = BTreeMap::new();
            for v in vars(&phi) {
                let h = self.a1.project(&v);
                if let Some(c) = h.as_singleton() {
                    fixed.insert(v.clone(), c);
                }
                lb.insert(v.clone(), h.lo());
                ub.insert(v, h.hi());
            }
            let instantiated = substitute_fixed(&phi, &fixed);
            if self.fits_a2(&instantiated) && self.a2.interpret(&instantiated).is_ok() {
                self.table.insert(phi, TransferStatus::Transferred);
                self.stamp += 1;
                continue;
            }
            let candidate = relax_candidates(&instantiated, &lb, &ub)
                .into_iter()
                .map(|(_, f)| f)
                .find(|f| self.fits_a2(f));
            if let Some(r) = candidate {
                let before = self.a2.stamp();
                if self.a2.interpret(&r).is_ok() && self.a2.stamp() != before {
                    self.relaxed.push(Rc::new(r));
                    self.stamp += 1;
                }
            }
        }
    }

    fn unsupported(&self, phi: &Formula) -> DomainError {
        DomainError::not_supported("delayed product", phi)
    }
}

impl AbstractDomain for DelayedProduct {
    fn supports(&self, phi: &Formula) -> bool {
        match phi {
            Formula::Annotated(inner, Label::Index(1)) => self.a1.supports(inner),
            Formula::Annotated(inner, Label::Index(2)) => self.a2.supports(inner),
            Formula::Annotated(..) => false,
            _ => {
                self.a2.supports(phi)
                    || self.a1.supports(phi)
                    || (matches!(phi, Formula::And(..))
                        && phi.conjuncts().into_iter().all(|c| self.supports(c)))
            }
        }
    }

    fn interpret(&mut self, phi: &Formula) -> Result<(), DomainError> {
        match phi {
            Formula::Annotated(inner, Label::Index(1)) => self.a1.interpret(inner),
            Formula::Annotated(inner, Label::Index(2)) => self.a2.interpret(inner),
            Formula::Annotated(_, Label::Index(i)) => Err(DomainError::UnknownComponentIndex(*i)),
            Formula::Annotated(_, Label::Name(n)) => Err(DomainError::UnknownComponentName(n.clone())),
            _ if self.a2.supports(phi) => self.a2.interpret(phi),
            _ if self.a1.supports(phi) => {
                self.a1.interpret(phi)?;
                let key = Rc::new(phi.strip_annotations());
                if !self.table.contains_key(&key) {
                    self.table.insert(key, TransferStatus::Pending);
                    self.seen_a1 = None;
                    self.stamp += 1;
                }
                Ok(())
            }
            Formula::And(..) if self.supports(phi) => {
                phi.conjuncts().into_iter().try_for_each(|c| self.interpret(c))
            }
            _ => Err(self.unsupported(phi)),
        }
    }

    fn closure(&mut self) {
        loop {
            let before = self.stamp();
            self.a1.closure();
            self.transfer();
            self.a2.closure();
            if self.stamp() == before || self.state() == Kleene::False {
                return;
            }
        }
    }

    fn state(&self) -> Kleene {
        self.a1.state().and(self.a2.state())
    }

    fn project(&self, x: &Var) -> Interval {
        interval_join(self.a1.project(x), self.a2.project(x))
    }

    fn vars(&self) -> VarSet {
        let mut v = self.a1.vars();
        v.extend(self.a2.vars());
        v
    }

    fn has_var(&self, x: &Var) -> bool {
        self.a1.has_var(x) || self.a2.has_var(x)
    }

    fn embed(&mut self, x: &Var, bound: Interval) {
        self.a1.embed(x, bound);
        self.a2.embed(x, bound);
    }

    fn split(&self) -> Result<Vec<Branch>, DomainError> {
        let wrap = |i: usize, bs: Vec<Branch>| {
            bs.into_iter().map(|b| Branch::Component(i, Box::new(b))).collect::<Vec<_>>()
        };
        let first = self.a1.split()?;
        if !first.is_empty() {
            return Ok(wrap(0, first));
        }
        Ok(wrap(1, self.a2.split()?))
    }

    fn refine(&mut self, branch: &Branch) -> Result<(), DomainError> {
        match branch {
            Branch::Bound(x, itv) => {
                self.embed(x, *itv);
                Ok(())
            }
            // Bound branches are applied to both coordinates so the
            // products of a and of its branch stay comparable.
            Branch::Component(_, b) if matches!(**b, Branch::Bound(..)) => self.refine(b),
            Branch::Component(0, b) => self.a1.refine(b),
            Branch::Component(1, b) => self.a2.refine(b),
            _ => Err(DomainError::InvalidBranch),
        }
    }

    fn contains(&self, point: &dyn Fn(&Var) -> Option<i64>) -> bool {
        self.a1.contains(point) && self.a2.contains(point)
    }

    fn stamp(&self) -> u64 {
        self.stamp + self.a1.stamp() + self.a2.stamp()
    }
}

impl fmt::Debug for DelayedProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Delayed")
            .field("a1", &self.a1)
            .field("a2", &self.a2)
            .field("table", &self.table)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::var;

    /// DP(IPC(Box×Oct), Oct) with x, y, z in [lo..hi] in the box and y, z
    /// known to the second octagon.
    fn c3(x: (i64, i64)) -> DelayedProduct {
        let inner = Element::product(vec![Element::boxed(), Element::octagon()]);
        let mut dp = DelayedProduct::new(Element::ipc(inner), Element::octagon());
        dp.interpret(&var("x").ge(x.0).and(var("x").le(x.1)).at(1).at(1)).unwrap();
        for n in ["y", "z"] {
            dp.interpret(&var(n).ge(0).and(var(n).le(10)).at(1).at(1)).unwrap();
            dp.interpret(&var(n).ge(0).at(2)).unwrap();
        }
        dp
    }

    fn sum() -> Formula {
        (var("x") + var("y") + var("z")).le(5)
    }

    #[test]
    fn routing() {
        let mut dp = c3((0, 10));
        dp.interpret(&(var("y") - var("z")).le(3)).unwrap();
        assert!(dp.table().is_empty());
        dp.interpret(&sum()).unwrap();
        assert_eq!(dp.table().len(), 1);
        assert_eq!(dp.pending().count(), 1);
        assert!(!dp.supports(&var("x").le(1).or(var("x").ge(3))));
    }

    #[test]
    fn fixed_variable_transfers() {
        let mut dp = c3((2, 2));
        dp.interpret(&sum()).unwrap();
        dp.closure();
        assert_eq!(dp.pending().count(), 0);
        assert_eq!(dp.a2().project(&Var::new("y")), Interval::new(0, 3));
    }

    #[test]
    fn bounded_variable_relaxes() {
        let mut dp = c3((1, 4));
        dp.interpret(&sum()).unwrap();
        dp.closure();
        assert_eq!(dp.pending().count(), 1);
        assert_eq!(dp.relaxed().len(), 1);
        assert_eq!(dp.a2().project(&Var::new("y")), Interval::new(0, 4));
    }

    #[test]
    fn unbounded_variables_leave_a2_alone() {
        let inner = Element::product(vec![Element::boxed(), Element::octagon()]);
        let mut dp = DelayedProduct::new(Element::ipc(inner), Element::octagon());
        for n in ["x", "y", "z"] {
            dp.interpret(&var(n).le(10).at(1).at(1)).unwrap();
        }
        dp.interpret(&sum()).unwrap();
        let before = dp.a2().stamp();
        dp.closure();
        assert_eq!(dp.a2().stamp(), before);
        assert!(dp.relaxed().is_empty());
    }
}
