use std::fmt;

use crate::boxdom::{bound_branches, pick_split};
use crate::element::Element;
use crate::formula::{Formula, Label, Var, VarSet};
use crate::lattice::{
    interval_join, AbstractDomain, Branch, CloneMap, DomainError, Interval, Kleene,
};

/// Coordinatewise product of elements. Formulas are routed by a 1-based
/// index annotation, or to the single component that supports them.
pub struct DirectProduct {
    parts: Vec<Element>,
}

enum Route<'a> {
    To(usize, &'a Formula),
    Split(Vec<&'a Formula>),
}

impl DirectProduct {
    pub fn new(parts: Vec<Element>) -> Self {
        DirectProduct { parts }
    }

    pub fn components(&self) -> &[Element] {
        &self.parts
    }

    pub fn components_mut(&mut self) -> &mut [Element] {
        &mut self.parts
    }

    pub fn fork(&self, map: &mut CloneMap) -> Self {
        DirectProduct { parts: self.parts.iter().map(|p| p.fork(map)).collect() }
    }

    pub fn join(&mut self, other: &DirectProduct) {
        for (a, b) in self.parts.iter_mut().zip(&other.parts) {
            a.join(b);
        }
    }

    pub fn leq(&self, other: &DirectProduct) -> bool {
        self.parts.len() == other.parts.len()
            && self.parts.iter().zip(&other.parts).all(|(a, b)| a.leq(b))
    }

    fn route<'a>(&self, phi: &'a Formula) -> Result<Route<'a>, DomainError> {
        match phi {
            Formula::Annotated(inner, Label::Index(i)) => {
                if *i == 0 || *i > self.parts.len() {
                    return Err(DomainError::UnknownComponentIndex(*i));
                }
                Ok(Route::To(i - 1, inner))
            }
            Formula::Annotated(_, Label::Name(n)) => Err(DomainError::UnknownComponentName(n.clone())),
            _ => {
                let supporters: Vec<usize> =
                    (0..self.parts.len()).filter(|&i| self.parts[i].supports(phi)).collect();
                match supporters.as_slice() {
                    [i] => Ok(Route::To(*i, phi)),
                    [] if matches!(phi, Formula::And(..)) => Ok(Route::Split(phi.conjuncts())),
                    [] => Err(DomainError::not_supported("direct product", phi)),
                    _ => Err(DomainError::AmbiguousTarget(phi.to_string())),
                }
            }
        }
    }

    fn check(&self, phi: &Formula) -> Result<(), DomainError> {
        match self.route(phi)? {
            Route::To(i, f) => {
                if self.parts[i].supports(f) {
                    Ok(())
                } else {
                    Err(DomainError::not_supported("direct product component", f))
                }
            }
            Route::Split(parts) => parts.into_iter().try_for_each(|c| self.check(c)),
        }
    }

    fn apply(&mut self, phi: &Formula) -> Result<(), DomainError> {
        match self.route(phi)? {
            Route::To(i, f) => self.parts[i].interpret(f),
            Route::Split(parts) => parts.into_iter().try_for_each(|c| self.apply(c)),
        }
    }
}

impl AbstractDomain for DirectProduct {
    fn supports(&self, phi: &Formula) -> bool {
        self.check(phi).is_ok()
    }

    fn interpret(&mut self, phi: &Formula) -> Result<(), DomainError> {
        self.check(phi)?;
        self.apply(phi)
    }

    fn closure(&mut self) {
        for p in &mut self.parts {
            p.closure();
        }
    }

    fn state(&self) -> Kleene {
        Kleene::all(self.parts.iter().map(Element::state))
    }

    fn project(&self, x: &Var) -> Interval {
        self.parts.iter().fold(Interval::bottom(), |acc, p| interval_join(acc, p.project(x)))
    }

    fn vars(&self) -> VarSet {
        self.parts.iter().flat_map(Element::vars).collect()
    }

    fn has_var(&self, x: &Var) -> bool {
        self.parts.iter().any(|p| p.has_var(x))
    }

    fn embed(&mut self, x: &Var, bound: Interval) {
        for p in &mut self.parts {
            p.embed(x, bound);
        }
    }

    fn split(&self) -> Result<Vec<Branch>, DomainError> {
        if self.state() == Kleene::False {
            return Ok(Vec::new());
        }
        let hulls: Vec<(Var, Interval)> =
            self.vars().into_iter().map(|v| (v.clone(), self.project(&v))).collect();
        match pick_split(hulls.iter().map(|(v, i)| (v, *i))) {
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
            Branch::Component(i, b) => {
                self.parts.get_mut(*i).ok_or(DomainError::InvalidBranch)?.refine(b)
            }
            _ => Err(DomainError::InvalidBranch),
        }
    }

    fn contains(&self, point: &dyn Fn(&Var) -> Option<i64>) -> bool {
        self.parts.iter().all(|p| p.contains(point))
    }

    fn stamp(&self) -> u64 {
        self.parts.iter().map(Element::stamp).sum()
    }
}

impl fmt::Debug for DirectProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Product").field(&self.parts).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::var;

    fn box_oct() -> DirectProduct {
        DirectProduct::new(vec![Element::boxed(), Element::octagon()])
    }

    #[test]
    fn index_routing() {
        let mut p = box_oct();
        p.interpret(&var("x").gt(4).and(var("x").lt(7)).at(1)).unwrap();
        p.interpret(&(var("y") + var("z")).le(4).at(2)).unwrap();
        assert_eq!(p.components()[0].project(&Var::new("x")), Interval::new(5, 6));
        assert!(!p.components()[0].has_var(&Var::new("y")));
        assert!(p.components()[1].has_var(&Var::new("y")));
    }

    #[test]
    fn unannotated_routing() {
        let mut p = box_oct();
        let err = p.interpret(&var("x").gt(4)).unwrap_err();
        assert!(matches!(err, DomainError::AmbiguousTarget(_)));
        p.interpret(&(var("y") - var("z")).le(3)).unwrap();
        assert!(p.components()[1].has_var(&Var::new("y")));
        let err = p.interpret(&(var("y") * var("z")).le(3)).unwrap_err();
        assert!(matches!(err, DomainError::NotSupported { .. }));
        assert!(matches!(
            p.interpret(&var("x").le(1).at(3)),
            Err(DomainError::UnknownComponentIndex(3))
        ));
    }

    #[test]
    fn coordinatewise_laws() {
        let mut p = box_oct();
        p.interpret(&var("x").ge(0).and(var("x").le(9)).at(1)).unwrap();
        p.interpret(&var("x").le(4).at(2)).unwrap();
        p.closure();
        assert_eq!(p.project(&Var::new("x")), Interval::new(0, 4));
        assert_eq!(p.state(), Kleene::True);
        p.interpret(&var("x").ge(6).at(2)).unwrap();
        p.closure();
        assert_eq!(p.state(), Kleene::False);
    }

    #[test]
    fn join_and_order() {
        let mut a = box_oct();
        a.interpret(&var("x").le(4).at(1)).unwrap();
        let mut b = box_oct();
        b.interpret(&var("x").ge(1).at(1)).unwrap();
        assert!(!a.leq(&b));
        a.join(&b);
        assert!(b.leq(&a));
        assert_eq!(a.project(&Var::new("x")), Interval::new(1, 4));
    }
}
