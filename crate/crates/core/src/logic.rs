//! Logic completion: conjunction, disjunction, implication and negation
//! over the constraint language of an underlying element.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use crate::boxdom::rel_bound;
use crate::element::Element;
use crate::formula::{negate_atom, Atom, Formula, Label, Rel, Var, VarSet};
use crate::ipc::entailment;
use crate::lattice::{
    interval_join, AbstractDomain, Branch, CloneMap, DomainError, Interval, Kleene,
};

/// Negation normal form: implications removed, negations folded into atoms
/// and annotations pushed down to atoms.
pub fn nnf(phi: &Formula) -> Formula {
    to_nnf(phi, false, &mut Vec::new())
}

/// `labels` holds the enclosing annotations, outermost first.
fn to_nnf(phi: &Formula, negate: bool, labels: &mut Vec<Label>) -> Formula {
    match phi {
        Formula::Atom(a) => {
            let a = if negate { negate_atom(a) } else { a.clone() };
            labels.iter().rev().fold(Formula::Atom(a), |f, l| f.at(l.clone()))
        }
        Formula::And(l, r) | Formula::Or(l, r) => {
            let (l, r) = (to_nnf(l, negate, labels), to_nnf(r, negate, labels));
            if matches!(phi, Formula::And(..)) != negate {
                l.and(r)
            } else {
                l.or(r)
            }
        }
        Formula::Imply(l, r) => {
            let (nl, r) = (to_nnf(l, !negate, labels), to_nnf(r, negate, labels));
            if negate {
                nl.and(r)
            } else {
                nl.or(r)
            }
        }
        Formula::Not(f) => to_nnf(f, !negate, labels),
        Formula::Annotated(f, l) => {
            labels.push(l.clone());
            let out = to_nnf(f, negate, labels);
            labels.pop();
            out
        }
    }
}

fn is_literal(phi: &Formula) -> bool {
    literal_atom(phi).is_some()
}

fn literal_atom(phi: &Formula) -> Option<&Atom> {
    match phi {
        Formula::Atom(a) => Some(a),
        Formula::Annotated(f, _) => literal_atom(f),
        _ => None,
    }
}

/// Rebuilds `lit` around a different atom, keeping its annotations.
fn with_atom(lit: &Formula, a: Atom) -> Formula {
    match lit {
        Formula::Annotated(f, l) => with_atom(f, a).at(l.clone()),
        _ => Formula::Atom(a),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClauseStatus {
    Unknown,
    Entailed,
}

#[derive(Clone, Debug)]
pub struct Clause {
    pub formula: Rc<Formula>,
    pub status: ClauseStatus,
}

pub struct LogicCompletion {
    base: Box<Element>,
    clauses: Vec<Clause>,
    failed: bool,
    stamp: u64,
}

impl LogicCompletion {
    pub fn new(base: Element) -> Self {
        LogicCompletion { base: Box::new(base), clauses: Vec::new(), failed: false, stamp: 0 }
    }

    pub fn base(&self) -> &Element {
        &self.base
    }

    pub fn base_mut(&mut self) -> &mut Element {
        &mut self.base
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn fork(&self, map: &mut CloneMap) -> Self {
        LogicCompletion {
            base: Box::new(self.base.fork(map)),
            clauses: self.clauses.clone(),
            failed: self.failed,
            stamp: self.stamp,
        }
    }

    /// The literal as the base should receive it.
    fn to_base<'a>(&self, lit: &'a Formula) -> &'a Formula {
        match lit {
            Formula::Annotated(inner, _) if !self.base.routes_labels() => inner,
            _ => lit,
        }
    }

    /// Rewrites literals the base cannot take. `x ≠ c` becomes
    /// `x < c ∨ x > c`; anything else unsupported is an error.
    fn adapt(&self, phi: &Formula) -> Result<Formula, DomainError> {
        match phi {
            Formula::And(l, r) => Ok(self.adapt(l)?.and(self.adapt(r)?)),
            Formula::Or(l, r) => Ok(self.adapt(l)?.or(self.adapt(r)?)),
            lit => {
                if self.base.supports(self.to_base(lit)) {
                    return Ok(lit.clone());
                }
                let atom = literal_atom(lit)
                    .filter(|a| a.rel == Rel::Neq)
                    .ok_or_else(|| DomainError::not_supported("logic completion base", lit))?;
                let relabel = |a: Atom| with_atom(lit, a);
                let lt = relabel(Atom::new(atom.left.clone(), Rel::Lt, atom.right.clone()));
                let gt = relabel(Atom::new(atom.left.clone(), Rel::Gt, atom.right.clone()));
                for part in [&lt, &gt] {
                    if !self.base.supports(self.to_base(part)) {
                        return Err(DomainError::not_supported("logic completion base", lit));
                    }
                }
                Ok(lt.or(gt))
            }
        }
    }

    /// Joins an NNF formula whose literals are known to be supported.
    fn join_formula(&mut self, phi: &Formula) {
        for c in phi.conjuncts() {
            if is_literal(c) {
                let target = self.to_base(c).clone();
                if let Err(e) = self.base.interpret(&target) {
                    panic!("literal accepted at interpretation time was rejected later: {e}");
                }
            } else {
                self.clauses.push(Clause { formula: Rc::new(c.clone()), status: ClauseStatus::Unknown });
            }
        }
        self.stamp += 1;
    }

    /// Three-valued evaluation on the hulls of the base.
    pub fn eval3(&self, phi: &Formula) -> Kleene {
        let hull = |v: &Var| self.base.project(v);
        eval_with(phi, &hull)
    }

    fn set_entailed(&mut self, i: usize) {
        if self.clauses[i].status != ClauseStatus::Entailed {
            self.clauses[i].status = ClauseStatus::Entailed;
            self.stamp += 1;
        }
    }

    fn fail(&mut self) {
        if !self.failed {
            self.failed = true;
            self.stamp += 1;
        }
    }

    /// When every live disjunct bounds the same variable, the hull of those
    /// bounds holds whichever disjunct is eventually chosen.
    fn narrow_by_disjunct_hull(&mut self, disjuncts: &[&Formula]) {
        let mut common: Option<BTreeMap<Var, Interval>> = None;
        for d in disjuncts {
            let mut bounds: BTreeMap<Var, Interval> = BTreeMap::new();
            for lit in d.conjuncts() {
                let Some(atom) = literal_atom(lit) else { continue };
                let Some((x, rel, Ok(c))) = atom.as_unary_bound() else { continue };
                let Some(b) = rel_bound(rel, c) else { continue };
                let cur = bounds.get(&x).copied().unwrap_or_else(|| self.base.project(&x));
                bounds.insert(x, interval_join(cur, b));
            }
            common = Some(match common {
                None => bounds,
                Some(acc) => acc
                    .into_iter()
                    .filter_map(|(x, h)| bounds.get(&x).map(|b| (x, h.hull(b))))
                    .collect(),
            });
            if common.as_ref().is_some_and(BTreeMap::is_empty) {
                return;
            }
        }
        for (x, h) in common.unwrap_or_default() {
            let cur = self.base.project(&x);
            let next = interval_join(cur, h);
            if next != cur {
                self.base.embed(&x, next);
            }
        }
    }

    /// One unit-propagation sweep; returns whether anything changed.
    fn propagate_clauses(&mut self) -> bool {
        let mut progress = false;
        let mut i = 0;
        while i < self.clauses.len() {
            if self.clauses[i].status == ClauseStatus::Entailed {
                i += 1;
                continue;
            }
            let f = self.clauses[i].formula.clone();
            let disjuncts = f.disjuncts();
            let values: Vec<Kleene> = disjuncts.iter().map(|d| self.eval3(d)).collect();
            if values.contains(&Kleene::True) {
                self.set_entailed(i);
                progress = true;
            } else {
                let live: Vec<&Formula> = disjuncts
                    .iter()
                    .zip(&values)
                    .filter(|(_, v)| **v != Kleene::False)
                    .map(|(d, _)| *d)
                    .collect();
                match live.as_slice() {
                    [] => {
                        self.fail();
                        return true;
                    }
                    [only] => {
                        let only = (*only).clone();
                        self.join_formula(&only);
                        self.set_entailed(i);
                        progress = true;
                    }
                    _ => {
                        let before = self.base.stamp();
                        self.narrow_by_disjunct_hull(&live);
                        progress |= self.base.stamp() != before;
                    }
                }
            }
            i += 1;
        }
        progress
    }

    pub fn join(&mut self, other: &LogicCompletion) {
        self.base.join(&other.base);
        for c in &other.clauses {
            match self.clauses.iter().position(|d| d.formula == c.formula) {
                Some(i) => {
                    if c.status == ClauseStatus::Entailed {
                        self.set_entailed(i);
                    }
                }
                None => {
                    self.clauses.push(c.clone());
                    self.stamp += 1;
                }
            }
        }
        if other.failed {
            self.fail();
        }
    }

    pub fn leq(&self, other: &LogicCompletion) -> bool {
        (other.failed || !self.failed)
            && self.base.leq(&other.base)
            && self.clauses.iter().all(|c| {
                other.clauses.iter().any(|d| {
                    d.formula == c.formula
                        && (c.status == ClauseStatus::Unknown || d.status == ClauseStatus::Entailed)
                })
            })
    }

    fn disjunct(&self, clause: usize, disjunct: usize) -> Option<Formula> {
        let c = self.clauses.get(clause)?;
        c.formula.disjuncts().get(disjunct).map(|d| (*d).clone())
    }
}

/// Kleene evaluation of an NNF formula by hull entailment of its atoms.
pub fn eval_with(phi: &Formula, hull: &dyn Fn(&Var) -> Interval) -> Kleene {
    match phi {
        Formula::Atom(a) => entailment(a, hull),
        Formula::Annotated(f, _) => eval_with(f, hull),
        Formula::And(l, r) => {
            let a = eval_with(l, hull);
            if a == Kleene::False {
                a
            } else {
                a.and(eval_with(r, hull))
            }
        }
        Formula::Or(l, r) => {
            let a = eval_with(l, hull);
            if a == Kleene::True {
                a
            } else {
                a.or(eval_with(r, hull))
            }
        }
        Formula::Imply(..) | Formula::Not(_) => eval_with(&nnf(phi), hull),
    }
}

impl AbstractDomain for LogicCompletion {
    fn supports(&self, phi: &Formula) -> bool {
        self.adapt(&nnf(phi)).is_ok()
    }

    fn interpret(&mut self, phi: &Formula) -> Result<(), DomainError> {
        let normal = self.adapt(&nnf(phi))?;
        self.join_formula(&normal);
        Ok(())
    }

    /// Alternates the base closure with unit propagation over the clauses
    /// until neither makes progress.
    fn closure(&mut self) {
        loop {
            if self.failed {
                return;
            }
            let before = self.base.stamp();
            self.base.closure();
            let progress = self.propagate_clauses();
            if !progress && self.base.stamp() == before {
                return;
            }
        }
    }

    fn state(&self) -> Kleene {
        if self.failed {
            return Kleene::False;
        }
        let mut acc = self.base.state();
        for c in &self.clauses {
            if acc == Kleene::False {
                break;
            }
            if c.status == ClauseStatus::Unknown {
                acc = acc.and(self.eval3(&c.formula));
            }
        }
        acc
    }

    fn project(&self, x: &Var) -> Interval {
        self.base.project(x)
    }

    fn vars(&self) -> VarSet {
        self.base.vars()
    }

    fn has_var(&self, x: &Var) -> bool {
        self.base.has_var(x)
    }

    fn embed(&mut self, x: &Var, bound: Interval) {
        self.base.embed(x, bound);
    }

    /// Branches on the first undecided clause, one branch per disjunct that
    /// is not already false; otherwise splits the base.
    fn split(&self) -> Result<Vec<Branch>, DomainError> {
        if self.failed {
            return Ok(Vec::new());
        }
        for (i, c) in self.clauses.iter().enumerate() {
            if c.status == ClauseStatus::Entailed || self.eval3(&c.formula) != Kleene::Unknown {
                continue;
            }
            let branches: Vec<Branch> = c
                .formula
                .disjuncts()
                .iter()
                .enumerate()
                .filter(|(_, d)| self.eval3(d) != Kleene::False)
                .map(|(k, _)| Branch::Disjunct { clause: i, disjunct: k })
                .collect();
            return Ok(branches);
        }
        Ok(self.base.split()?.into_iter().map(|b| Branch::Base(Box::new(b))).collect())
    }

    fn refine(&mut self, branch: &Branch) -> Result<(), DomainError> {
        match branch {
            Branch::Disjunct { clause, disjunct } => {
                let d = self.disjunct(*clause, *disjunct).ok_or(DomainError::InvalidBranch)?;
                self.join_formula(&d);
                self.set_entailed(*clause);
                Ok(())
            }
            Branch::Base(b) => self.base.refine(b),
            Branch::Bound(x, itv) => {
                self.embed(x, *itv);
                Ok(())
            }
            Branch::Component(..) => Err(DomainError::InvalidBranch),
        }
    }

    fn contains(&self, point: &dyn Fn(&Var) -> Option<i64>) -> bool {
        !self.failed
            && self.base.contains(point)
            && self.clauses.iter().all(|c| c.formula.holds(point).unwrap_or(false))
    }

    fn stamp(&self) -> u64 {
        self.stamp + self.base.stamp()
    }
}

impl fmt::Debug for LogicCompletion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown: Vec<Cow<'_, str>> = self
            .clauses
            .iter()
            .map(|c| match c.status {
                ClauseStatus::Unknown => Cow::Owned(c.formula.to_string()),
                ClauseStatus::Entailed => Cow::Borrowed("<entailed>"),
            })
            .collect();
        f.debug_struct("Logic").field("base", &self.base).field("clauses", &shown).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxdom::BoxDomain;
    use crate::formula::var;
    use crate::ipc::Ipc;

    fn iv(a: i64, b: i64) -> Interval {
        Interval::new(a, b)
    }

    fn lbox(bounds: &[(&str, i64, i64)]) -> LogicCompletion {
        let mut b = BoxDomain::new();
        for (n, lo, hi) in bounds {
            b.restrict(&Var::new(n), iv(*lo, *hi));
        }
        LogicCompletion::new(Element::Box(b))
    }

    fn x() -> Var {
        Var::new("x")
    }

    #[test]
    fn implication_becomes_one_clause() {
        let mut l = LogicCompletion::new(Element::ipc(Element::boxed()));
        for n in ["x", "y", "z"] {
            l.interpret(&var(n).ge(0).at(1).at(1)).unwrap();
        }
        let phi = var("x").gt(4).and(var("x").lt(7)).implies((var("y") + var("z")).le(4));
        l.interpret(&phi).unwrap();
        assert_eq!(l.clauses().len(), 1);
        let expect = var("x").le(4).or(var("x").ge(7)).or((var("y") + var("z")).le(4));
        assert_eq!(*l.clauses()[0].formula, expect);
    }

    #[test]
    fn atomic_conjunct_goes_to_base() {
        let mut l = lbox(&[]);
        l.interpret(&var("x").le(3)).unwrap();
        assert!(l.clauses().is_empty());
        assert_eq!(l.project(&x()), Interval::at_most(3));
    }

    #[test]
    fn disjunction_kept_as_clause() {
        let mut l = lbox(&[("x", 0, 9)]);
        l.interpret(&var("x").eq_to(1).or(var("x").eq_to(2))).unwrap();
        assert_eq!(l.clauses().len(), 1);
    }

    #[test]
    fn eval3_examples() {
        let phi = var("x").eq_to(1).or(var("x").eq_to(2));
        assert_eq!(lbox(&[("x", 1, 2)]).eval3(&phi), Kleene::Unknown);
        assert_eq!(lbox(&[("x", 1, 1)]).eval3(&phi), Kleene::True);
        assert_eq!(lbox(&[("x", 5, 9)]).eval3(&phi), Kleene::False);
    }

    #[test]
    fn unit_propagation_forces_remaining_disjunct() {
        let mut l = lbox(&[("x", 2, 9)]);
        l.interpret(&var("x").eq_to(1).or(var("x").eq_to(2))).unwrap();
        l.closure();
        assert_eq!(l.project(&x()), iv(2, 2));
        assert_eq!(l.clauses()[0].status, ClauseStatus::Entailed);
        assert_eq!(l.state(), Kleene::True);
    }

    #[test]
    fn two_unknown_disjuncts_leave_other_variables() {
        let mut l = lbox(&[("x", 0, 9), ("y", 0, 9)]);
        l.interpret(&var("x").le(2).or(var("y").le(2))).unwrap();
        l.closure();
        assert_eq!(l.project(&x()), iv(0, 9));
        assert_eq!(l.project(&Var::new("y")), iv(0, 9));
        assert_eq!(l.state(), Kleene::Unknown);
    }

    #[test]
    fn all_false_disjuncts_fail() {
        let mut l = lbox(&[("x", 5, 9)]);
        l.interpret(&var("x").eq_to(1).or(var("x").eq_to(2))).unwrap();
        l.closure();
        assert_eq!(l.state(), Kleene::False);
    }

    #[test]
    fn split_on_clause() {
        let mut l = lbox(&[("x", 0, 9)]);
        l.interpret(&var("x").eq_to(1).or(var("x").eq_to(2))).unwrap();
        let branches = l.split().unwrap();
        assert_eq!(branches.len(), 2);
        let mut first = l.fork(&mut CloneMap::new());
        first.refine(&branches[0]).unwrap();
        assert_eq!(first.project(&x()), iv(1, 1));
        let mut second = l.fork(&mut CloneMap::new());
        second.refine(&branches[1]).unwrap();
        assert_eq!(second.project(&x()), iv(2, 2));
        assert_eq!(second.clauses()[0].status, ClauseStatus::Entailed);
    }

    #[test]
    fn split_skips_false_disjunct_and_delegates() {
        let mut l = lbox(&[("x", 1, 9)]);
        l.interpret(&var("x").eq_to(0).or(var("x").ge(5)).or(var("x").eq_to(3))).unwrap();
        assert_eq!(l.split().unwrap().len(), 2);
        let plain = lbox(&[("x", 1, 3)]);
        assert_eq!(
            plain.split().unwrap()[0],
            Branch::Base(Box::new(Branch::Bound(x(), iv(1, 1))))
        );
    }

    #[test]
    fn disequality_falls_back_to_strict_bounds() {
        let mut l = lbox(&[("x", 0, 4)]);
        l.interpret(&var("x").ne_to(0)).unwrap();
        assert_eq!(l.clauses().len(), 1);
        l.closure();
        assert_eq!(l.project(&x()), iv(1, 4));
    }

    #[test]
    fn unsupported_atom_is_rejected() {
        let mut l = lbox(&[("x", 0, 4)]);
        let err = l.interpret(&(var("x") + var("y")).le(1).or(var("x").eq_to(0))).unwrap_err();
        assert!(matches!(err, DomainError::NotSupported { .. }));
        assert!(l.clauses().is_empty());
    }

    #[test]
    fn hull_of_disjuncts_narrows() {
        let mut l = lbox(&[("x", 0, 9)]);
        l.interpret(&var("x").eq_to(0).or(var("x").eq_to(1))).unwrap();
        l.closure();
        assert_eq!(l.project(&x()), iv(0, 1));
    }

    #[test]
    fn nnf_pushes_labels_and_negations() {
        let phi = var("x").le(1).and(var("y").le(2)).at(1).negated();
        assert_eq!(nnf(&phi), var("x").gt(1).at(1).or(var("y").gt(2).at(1)));
        let imp = var("x").le(1).implies(var("y").le(2)).negated();
        assert_eq!(nnf(&imp), var("x").le(1).and(var("y").gt(2)));
    }

    #[test]
    fn ipc_base_gets_clause_literal() {
        let mut ipc = Ipc::new(Element::boxed());
        ipc.interpret(&var("x").ge(0).and(var("x").le(9)).at(1)).unwrap_or_else(|_| {
            // A box takes conjunctions as a whole.
            unreachable!()
        });
        let mut l = LogicCompletion::new(Element::Ipc(ipc));
        l.interpret(&var("x").ne_to(3).and(var("x").eq_to(3).or(var("x").le(1)))).unwrap();
        l.closure();
        assert_eq!(l.project(&x()), iv(0, 1));
    }
}
