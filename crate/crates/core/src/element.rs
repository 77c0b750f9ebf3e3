//! A closed sum over every domain and transformer of the crate, so that
//! transformers can be stacked at run time.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use crate::boxdom::BoxDomain;
use crate::formula::{Formula, Var, VarSet};
use crate::ipc::Ipc;
use crate::lattice::{AbstractDomain, Branch, CloneMap, DomainError, Handle, Interval, Kleene};
use crate::logic::LogicCompletion;
use crate::octagon::Octagon;
use crate::products::{DelayedProduct, DirectProduct, SharedProduct};

pub enum Element {
    Box(BoxDomain),
    Octagon(Octagon),
    Product(DirectProduct),
    Ipc(Ipc),
    Logic(LogicCompletion),
    Delayed(DelayedProduct),
    Shared(SharedProduct),
    /// A component owned jointly with other elements.
    Ref(Handle),
}

/// The shape of a composed domain, as written in declarations such as
/// `L(IPC(Box×Oct))`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum DomainKind {
    Box,
    Octagon,
    Product(Vec<DomainKind>),
    Ipc(std::boxed::Box<DomainKind>),
    Logic(std::boxed::Box<DomainKind>),
    Delayed(std::boxed::Box<DomainKind>, std::boxed::Box<DomainKind>),
}

impl DomainKind {
    pub fn product(parts: impl IntoIterator<Item = DomainKind>) -> Self {
        DomainKind::Product(parts.into_iter().collect())
    }

    pub fn ipc(base: DomainKind) -> Self {
        DomainKind::Ipc(std::boxed::Box::new(base))
    }

    pub fn logic(base: DomainKind) -> Self {
        DomainKind::Logic(std::boxed::Box::new(base))
    }

    pub fn delayed(a1: DomainKind, a2: DomainKind) -> Self {
        DomainKind::Delayed(std::boxed::Box::new(a1), std::boxed::Box::new(a2))
    }

    /// The sub-domains a declaration can bind.
    pub fn params(&self) -> Vec<&DomainKind> {
        match self {
            DomainKind::Box | DomainKind::Octagon => Vec::new(),
            DomainKind::Product(ps) => ps.iter().collect(),
            DomainKind::Ipc(b) | DomainKind::Logic(b) => vec![b],
            DomainKind::Delayed(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainKind::Box => f.write_str("Box"),
            DomainKind::Octagon => f.write_str("Oct"),
            DomainKind::Product(ps) => {
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str("×")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
            DomainKind::Ipc(b) => write!(f, "IPC({b})"),
            DomainKind::Logic(b) => write!(f, "L({b})"),
            DomainKind::Delayed(a, b) => write!(f, "DP({a},{b})"),
        }
    }
}

impl fmt::Debug for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

macro_rules! each {
    ($s:expr, $d:ident => $e:expr, $h:ident => $r:expr) => {
        match $s {
            Element::Box($d) => $e,
            Element::Octagon($d) => $e,
            Element::Product($d) => $e,
            Element::Ipc($d) => $e,
            Element::Logic($d) => $e,
            Element::Delayed($d) => $e,
            Element::Shared($d) => $e,
            Element::Ref($h) => $r,
        }
    };
}

impl Element {
    pub fn boxed() -> Self {
        Element::Box(BoxDomain::new())
    }

    pub fn octagon() -> Self {
        Element::Octagon(Octagon::new())
    }

    pub fn ipc(base: Element) -> Self {
        Element::Ipc(Ipc::new(base))
    }

    pub fn logic(base: Element) -> Self {
        Element::Logic(LogicCompletion::new(base))
    }

    pub fn product(parts: Vec<Element>) -> Self {
        Element::Product(DirectProduct::new(parts))
    }

    pub fn delayed(a1: Element, a2: Element) -> Self {
        Element::Delayed(DelayedProduct::new(a1, a2))
    }

    /// Wraps the element for joint ownership.
    pub fn into_handle(self) -> Handle {
        Rc::new(RefCell::new(self))
    }

    /// The bottom element of a kind.
    pub fn bottom(kind: &DomainKind) -> Self {
        match kind {
            DomainKind::Box => Element::boxed(),
            DomainKind::Octagon => Element::octagon(),
            DomainKind::Product(ps) => Element::product(ps.iter().map(Element::bottom).collect()),
            DomainKind::Ipc(b) => Element::ipc(Element::bottom(b)),
            DomainKind::Logic(b) => Element::logic(Element::bottom(b)),
            DomainKind::Delayed(a, b) => Element::delayed(Element::bottom(a), Element::bottom(b)),
        }
    }

    /// The kind of the element; `None` for a shared product.
    pub fn kind(&self) -> Option<DomainKind> {
        Some(match self {
            Element::Box(_) => DomainKind::Box,
            Element::Octagon(_) => DomainKind::Octagon,
            Element::Product(p) => {
                DomainKind::Product(p.components().iter().map(Element::kind).collect::<Option<_>>()?)
            }
            Element::Ipc(i) => DomainKind::ipc(i.base().kind()?),
            Element::Logic(l) => DomainKind::logic(l.base().kind()?),
            Element::Delayed(d) => DomainKind::delayed(d.a1().kind()?, d.a2().kind()?),
            Element::Shared(_) => return None,
            Element::Ref(h) => return h.borrow().kind(),
        })
    }

    /// Deep copy; handles reached twice are copied once.
    pub fn fork(&self, map: &mut CloneMap) -> Element {
        match self {
            Element::Box(b) => Element::Box(b.clone()),
            Element::Octagon(o) => Element::Octagon(o.clone()),
            Element::Product(p) => Element::Product(p.fork(map)),
            Element::Ipc(i) => Element::Ipc(i.fork(map)),
            Element::Logic(l) => Element::Logic(l.fork(map)),
            Element::Delayed(d) => Element::Delayed(d.fork(map)),
            Element::Shared(s) => Element::Shared(s.fork(map)),
            Element::Ref(h) => Element::Ref(map.fork_handle(h)),
        }
    }

    /// Whether annotated formulas should reach this element with their
    /// annotation, because it dispatches on it.
    pub fn routes_labels(&self) -> bool {
        match self {
            Element::Product(_) | Element::Delayed(_) | Element::Shared(_) => true,
            Element::Ref(h) => h.borrow().routes_labels(),
            _ => false,
        }
    }

    /// Joins `other` into `self`. Both must have the same kind.
    pub fn join(&mut self, other: &Element) {
        if let Element::Ref(h) = other {
            if let Element::Ref(mine) = self {
                if Rc::ptr_eq(mine, h) {
                    return;
                }
            }
            // A snapshot avoids borrowing a handle that `self` may reach.
            let snapshot = h.borrow().fork(&mut CloneMap::new());
            return self.join(&snapshot);
        }
        match (self, other) {
            (Element::Ref(h), o) => h.borrow_mut().join(o),
            (Element::Box(a), Element::Box(b)) => a.join(b),
            (Element::Octagon(a), Element::Octagon(b)) => a.join(b),
            (Element::Product(a), Element::Product(b)) => a.join(b),
            (Element::Ipc(a), Element::Ipc(b)) => a.join(b),
            (Element::Logic(a), Element::Logic(b)) => a.join(b),
            (Element::Delayed(a), Element::Delayed(b)) => a.join(b),
            (Element::Shared(a), Element::Shared(b)) => a.join(b),
            (a, b) => panic!("join of elements of different kinds: {a:?} and {b:?}"),
        }
    }

    /// `self ≤ other`; elements of different kinds are incomparable. Any
    /// element with no point is treated as the top of its kind.
    pub fn leq(&self, other: &Element) -> bool {
        if other.state() == Kleene::False && self.kind() == other.kind() {
            return true;
        }
        match (self, other) {
            (Element::Ref(a), Element::Ref(b)) if Rc::ptr_eq(a, b) => true,
            (Element::Ref(a), b) => a.borrow().leq(b),
            (a, Element::Ref(b)) => a.leq(&b.borrow()),
            (Element::Box(a), Element::Box(b)) => a.leq(b),
            (Element::Octagon(a), Element::Octagon(b)) => a.leq(b),
            (Element::Product(a), Element::Product(b)) => a.leq(b),
            (Element::Ipc(a), Element::Ipc(b)) => a.leq(b),
            (Element::Logic(a), Element::Logic(b)) => a.leq(b),
            (Element::Delayed(a), Element::Delayed(b)) => a.leq(b),
            (Element::Shared(a), Element::Shared(b)) => a.leq(b),
            _ => false,
        }
    }

    /// Hull of every variable of the element.
    pub fn hulls(&self) -> Vec<(Var, Interval)> {
        self.vars().into_iter().map(|v| {
            let h = self.project(&v);
            (v, h)
        }).collect()
    }
}

impl Clone for Element {
    fn clone(&self) -> Self {
        self.fork(&mut CloneMap::new())
    }
}

impl AbstractDomain for Element {
    fn supports(&self, phi: &Formula) -> bool {
        each!(self, d => d.supports(phi), h => h.borrow().supports(phi))
    }

    fn interpret(&mut self, phi: &Formula) -> Result<(), DomainError> {
        each!(self, d => d.interpret(phi), h => h.borrow_mut().interpret(phi))
    }

    fn closure(&mut self) {
        each!(self, d => d.closure(), h => h.borrow_mut().closure())
    }

    fn state(&self) -> Kleene {
        each!(self, d => d.state(), h => h.borrow().state())
    }

    fn project(&self, x: &Var) -> Interval {
        each!(self, d => d.project(x), h => h.borrow().project(x))
    }

    fn vars(&self) -> VarSet {
        each!(self, d => d.vars(), h => h.borrow().vars())
    }

    fn has_var(&self, x: &Var) -> bool {
        each!(self, d => d.has_var(x), h => h.borrow().has_var(x))
    }

    fn embed(&mut self, x: &Var, bound: Interval) {
        each!(self, d => d.embed(x, bound), h => h.borrow_mut().embed(x, bound))
    }

    fn split(&self) -> Result<Vec<Branch>, DomainError> {
        each!(self, d => d.split(), h => h.borrow().split())
    }

    fn refine(&mut self, branch: &Branch) -> Result<(), DomainError> {
        each!(self, d => d.refine(branch), h => h.borrow_mut().refine(branch))
    }

    fn contains(&self, point: &dyn Fn(&Var) -> Option<i64>) -> bool {
        each!(self, d => d.contains(point), h => h.borrow().contains(point))
    }

    fn stamp(&self) -> u64 {
        each!(self, d => d.stamp(), h => h.borrow().stamp())
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        each!(self, d => fmt::Debug::fmt(d, f), h => write!(f, "&{:?}", h.borrow()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::var;

    #[test]
    fn kind_round_trip() {
        let k = DomainKind::logic(DomainKind::ipc(DomainKind::product([
            DomainKind::Box,
            DomainKind::Octagon,
        ])));
        assert_eq!(k.to_string(), "L(IPC(Box×Oct))");
        assert_eq!(Element::bottom(&k).kind(), Some(k));
    }

    #[test]
    fn fork_preserves_aliasing_inside_the_copy() {
        let shared = Element::boxed().into_handle();
        let p = Element::product(vec![Element::Ref(shared.clone()), Element::Ref(shared.clone())]);
        let mut map = CloneMap::new();
        let mut q = p.fork(&mut map);
        q.interpret(&var("x").le(3).at(1)).unwrap();
        let Element::Product(q) = &q else { unreachable!() };
        let (Element::Ref(a), Element::Ref(b)) = (&q.components()[0], &q.components()[1]) else {
            unreachable!()
        };
        assert!(Rc::ptr_eq(a, b));
        assert!(!Rc::ptr_eq(a, &shared));
        assert_eq!(b.borrow().project(&Var::new("x")), Interval::at_most(3));
        assert_eq!(shared.borrow().project(&Var::new("x")), Interval::bottom());
    }

    #[test]
    fn ref_join_and_order() {
        let h = Element::boxed().into_handle();
        let mut a = Element::Ref(h.clone());
        let mut b = Element::boxed();
        b.interpret(&var("x").ge(1)).unwrap();
        assert!(a.leq(&b));
        a.join(&b);
        assert!(b.leq(&a));
        assert_eq!(h.borrow().project(&Var::new("x")), Interval::at_least(1));
    }
}
