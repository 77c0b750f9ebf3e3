use std::fmt;
use std::rc::Rc;

use crate::element::{DomainKind, Element};
use crate::formula::{Formula, Label, Var, VarSet};
use crate::lattice::{
    interval_join, AbstractDomain, Branch, CloneMap, DomainError, Handle, Interval, Kleene,
};

/// Parameters of a declaration: nothing (a private bottom element), a
/// declared name, or a tuple matched against the parameters of the kind.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dep {
    Bottom,
    Named(String),
    Tuple(Vec<Dep>),
}

impl Dep {
    pub fn named(n: &str) -> Self {
        Dep::Named(n.to_string())
    }

    pub fn tuple(items: impl IntoIterator<Item = Dep>) -> Self {
        Dep::Tuple(items.into_iter().collect())
    }

    fn names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Dep::Bottom => {}
            Dep::Named(n) => out.push(n),
            Dep::Tuple(ds) => ds.iter().for_each(|d| d.names(out)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decl {
    pub name: String,
    pub kind: DomainKind,
    pub deps: Dep,
}

impl Decl {
    pub fn new(name: &str, kind: DomainKind, deps: Dep) -> Self {
        Decl { name: name.to_string(), kind, deps }
    }
}

/// How a dependency reaches the components that name it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SharingMode {
    /// One element, owned jointly.
    #[default]
    Alias,
    /// Private copies merged with the named element by join exchange.
    Exchange,
}

/// A direct product whose components have names and may depend on
/// earlier components.
pub struct SharedProduct {
    names: Rc<Vec<String>>,
    comps: Vec<Handle>,
    /// Private views and the component each one mirrors (exchange mode).
    links: Vec<(Handle, usize)>,
    mode: SharingMode,
}

struct Builder<'a> {
    decl: &'a str,
    names: &'a [String],
    kinds: &'a [DomainKind],
    comps: &'a [Handle],
    mode: SharingMode,
    links: Vec<(Handle, usize)>,
}

impl Builder<'_> {
    fn arity(&self, detail: String) -> DomainError {
        DomainError::ArityMismatch { decl: self.decl.to_string(), detail }
    }

    fn bind(&mut self, kind: &DomainKind, dep: &Dep) -> Result<Element, DomainError> {
        match dep {
            Dep::Bottom => Ok(Element::bottom(kind)),
            Dep::Named(n) => {
                let j = self.names.iter().position(|m| m == n).expect("names are resolved first");
                if self.kinds[j] == *kind {
                    return Ok(match self.mode {
                        SharingMode::Alias => Element::Ref(self.comps[j].clone()),
                        SharingMode::Exchange => {
                            let view = self.comps[j].borrow().fork(&mut CloneMap::new()).into_handle();
                            self.links.push((view.clone(), j));
                            Element::Ref(view)
                        }
                    });
                }
                match kind.params().as_slice() {
                    [only] => {
                        let inner = self.bind(only, dep)?;
                        Ok(assemble(kind, vec![inner]))
                    }
                    _ => Err(self.arity(format!("`{n}` is {}, expected {kind}", self.kinds[j]))),
                }
            }
            Dep::Tuple(ds) => {
                let params = kind.params();
                if params.len() == ds.len() {
                    let parts = params
                        .iter()
                        .zip(ds)
                        .map(|(k, d)| self.bind(k, d))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(assemble(kind, parts))
                } else if let [only] = params.as_slice() {
                    let inner = self.bind(only, dep)?;
                    Ok(assemble(kind, vec![inner]))
                } else {
                    Err(self.arity(format!(
                        "{kind} takes {} parameter(s), got {}",
                        params.len(),
                        ds.len()
                    )))
                }
            }
        }
    }
}

fn assemble(kind: &DomainKind, mut parts: Vec<Element>) -> Element {
    match kind {
        DomainKind::Box => Element::boxed(),
        DomainKind::Octagon => Element::octagon(),
        DomainKind::Product(_) => Element::product(parts),
        DomainKind::Ipc(_) => Element::ipc(parts.remove(0)),
        DomainKind::Logic(_) => Element::logic(parts.remove(0)),
        DomainKind::Delayed(..) => {
            let a2 = parts.pop().expect("two parts");
            Element::delayed(parts.pop().expect("two parts"), a2)
        }
    }
}

impl SharedProduct {
    pub fn build(decls: &[Decl], mode: SharingMode) -> Result<Self, DomainError> {
        let mut names: Vec<String> = Vec::new();
        let mut kinds: Vec<DomainKind> = Vec::new();
        let mut comps: Vec<Handle> = Vec::new();
        let mut links = Vec::new();
        for d in decls {
            if names.contains(&d.name) {
                return Err(DomainError::DuplicateName(d.name.clone()));
            }
            let mut used = Vec::new();
            d.deps.names(&mut used);
            for n in used {
                if !names.iter().any(|m| m == n) {
                    let err = if decls.iter().any(|e| e.name == n) {
                        DomainError::ForwardReference { decl: d.name.clone(), dep: n.to_string() }
                    } else {
                        DomainError::UnknownDependency { decl: d.name.clone(), dep: n.to_string() }
                    };
                    return Err(err);
                }
            }
            let mut b = Builder {
                decl: &d.name,
                names: &names,
                kinds: &kinds,
                comps: &comps,
                mode,
                links: Vec::new(),
            };
            let elem = b.bind(&d.kind, &d.deps)?;
            links.append(&mut b.links);
            names.push(d.name.clone());
            kinds.push(d.kind.clone());
            comps.push(elem.into_handle());
        }
        Ok(SharedProduct { names: Rc::new(names), comps, links, mode })
    }

    pub fn mode(&self) -> SharingMode {
        self.mode
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn components(&self) -> &[Handle] {
        &self.comps
    }

    pub fn component(&self, name: &str) -> Option<&Handle> {
        self.index_of(name).map(|i| &self.comps[i])
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn fork(&self, map: &mut CloneMap) -> Self {
        let comps = self.comps.iter().map(|h| map.fork_handle(h)).collect();
        let links = self.links.iter().map(|(v, j)| (map.fork_handle(v), *j)).collect();
        SharedProduct { names: self.names.clone(), comps, links, mode: self.mode }
    }

    pub fn join(&mut self, other: &SharedProduct) {
        for (a, b) in self.comps.iter().zip(&other.comps) {
            if !Rc::ptr_eq(a, b) {
                let snapshot = b.borrow().fork(&mut CloneMap::new());
                a.borrow_mut().join(&snapshot);
            }
        }
    }

    pub fn leq(&self, other: &SharedProduct) -> bool {
        self.comps.len() == other.comps.len()
            && self.comps.iter().zip(&other.comps).all(|(a, b)| a.borrow().leq(&b.borrow()))
    }

    /// Exchanges information between every private view and the element it
    /// mirrors until nothing changes.
    pub fn rho(&mut self) {
        loop {
            let before = self.stamp();
            for (view, j) in &self.links {
                let target = &self.comps[*j];
                let t = target.borrow().fork(&mut CloneMap::new());
                view.borrow_mut().join(&t);
                let v = view.borrow().fork(&mut CloneMap::new());
                target.borrow_mut().join(&v);
            }
            if self.stamp() == before {
                return;
            }
        }
    }

    /// Empties every component once one of them has no point. A component
    /// can evaluate to false before its failure reaches the elements it
    /// shares, and the two sharing modes would disagree on the rest.
    fn spread_failure(&mut self) {
        for c in &self.comps {
            let mut c = c.borrow_mut();
            if c.state() != Kleene::False {
                if let Some(v) = c.vars().into_iter().next() {
                    c.embed(&v, Interval::empty());
                }
            }
        }
        if self.mode == SharingMode::Exchange {
            self.rho();
        }
    }

    fn target(&self, phi: &Formula) -> Result<Option<usize>, DomainError> {
        match phi {
            Formula::Annotated(_, Label::Name(n)) => {
                self.index_of(n).map(Some).ok_or_else(|| DomainError::UnknownComponentName(n.clone()))
            }
            Formula::Annotated(_, Label::Index(i)) => {
                if *i == 0 || *i > self.comps.len() {
                    Err(DomainError::UnknownComponentIndex(*i))
                } else {
                    Ok(Some(i - 1))
                }
            }
            Formula::And(..) => Ok(None),
            _ => Err(DomainError::MissingAnnotation(phi.to_string())),
        }
    }

    fn check(&self, phi: &Formula) -> Result<(), DomainError> {
        match (self.target(phi)?, phi) {
            (Some(i), Formula::Annotated(inner, _)) => {
                if self.comps[i].borrow().supports(inner) {
                    Ok(())
                } else {
                    Err(DomainError::not_supported("shared product component", inner))
                }
            }
            _ => phi.conjuncts().into_iter().try_for_each(|c| self.check(c)),
        }
    }

    fn apply(&mut self, phi: &Formula) -> Result<(), DomainError> {
        match (self.target(phi)?, phi) {
            (Some(i), Formula::Annotated(inner, _)) => self.comps[i].borrow_mut().interpret(inner),
            _ => phi.conjuncts().into_iter().try_for_each(|c| self.apply(c)),
        }
    }
}

impl AbstractDomain for SharedProduct {
    fn supports(&self, phi: &Formula) -> bool {
        self.check(phi).is_ok()
    }

    /// In exchange mode the views are refreshed first, so a component sees
    /// the variables its dependencies already hold.
    fn interpret(&mut self, phi: &Formula) -> Result<(), DomainError> {
        if self.mode == SharingMode::Exchange {
            self.rho();
        }
        self.check(phi)?;
        self.apply(phi)
    }

    /// Closes every component, then merges shared views, until no component
    /// changes.
    fn closure(&mut self) {
        loop {
            let before = self.stamp();
            for c in &self.comps {
                c.borrow_mut().closure();
            }
            if self.mode == SharingMode::Exchange {
                self.rho();
            }
            if self.state() == Kleene::False {
                self.spread_failure();
                return;
            }
            if self.stamp() == before {
                return;
            }
        }
    }

    fn state(&self) -> Kleene {
        Kleene::all(self.comps.iter().map(|c| c.borrow().state()))
    }

    fn project(&self, x: &Var) -> Interval {
        self.comps.iter().fold(Interval::bottom(), |acc, c| interval_join(acc, c.borrow().project(x)))
    }

    fn vars(&self) -> VarSet {
        self.comps.iter().flat_map(|c| c.borrow().vars()).collect()
    }

    fn has_var(&self, x: &Var) -> bool {
        self.comps.iter().any(|c| c.borrow().has_var(x))
    }

    fn embed(&mut self, x: &Var, bound: Interval) {
        for c in &self.comps {
            c.borrow_mut().embed(x, bound);
        }
    }

    /// Splits the first component whose state is undecided.
    fn split(&self) -> Result<Vec<Branch>, DomainError> {
        for (i, c) in self.comps.iter().enumerate() {
            let c = c.borrow();
            match c.state() {
                Kleene::False => return Ok(Vec::new()),
                Kleene::Unknown => {
                    let bs = c.split()?;
                    if !bs.is_empty() {
                        return Ok(bs.into_iter().map(|b| Branch::Component(i, Box::new(b))).collect());
                    }
                }
                Kleene::True => {}
            }
        }
        Ok(Vec::new())
    }

    fn refine(&mut self, branch: &Branch) -> Result<(), DomainError> {
        match branch {
            Branch::Bound(x, itv) => {
                self.embed(x, *itv);
                Ok(())
            }
            Branch::Component(i, b) => {
                self.comps.get(*i).ok_or(DomainError::InvalidBranch)?.borrow_mut().refine(b)
            }
            _ => Err(DomainError::InvalidBranch),
        }
    }

    fn contains(&self, point: &dyn Fn(&Var) -> Option<i64>) -> bool {
        self.comps.iter().all(|c| c.borrow().contains(point))
    }

    fn stamp(&self) -> u64 {
        self.comps.iter().map(|c| c.borrow().stamp()).sum()
    }
}

impl fmt::Debug for SharedProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (n, c) in self.names.iter().zip(&self.comps) {
            m.entry(n, &*c.borrow());
        }
        m.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::var;

    fn d1() -> Vec<Decl> {
        vec![
            Decl::new("box", DomainKind::Box, Dep::Bottom),
            Decl::new("lbox", DomainKind::logic(DomainKind::Box), Dep::tuple([Dep::named("box")])),
            Decl::new("ipc", DomainKind::ipc(DomainKind::Box), Dep::tuple([Dep::named("box")])),
        ]
    }

    fn c4(mode: SharingMode) -> SharedProduct {
        let mut s = SharedProduct::build(&d1(), mode).unwrap();
        for n in ["x", "y"] {
            s.interpret(&var(n).ge(0).and(var(n).le(9)).at("box")).unwrap();
        }
        s.rho();
        s.interpret(&var("x").eq_to(0).or(var("x").eq_to(1)).at("lbox")).unwrap();
        s.interpret(&(var("x") * var("y")).le(5).at("ipc")).unwrap();
        s
    }

    #[test]
    fn declaration_errors() {
        let mut bad = d1();
        bad.swap(0, 1);
        assert!(matches!(
            SharedProduct::build(&bad, SharingMode::Alias),
            Err(DomainError::ForwardReference { .. })
        ));
        let unknown =
            vec![Decl::new("l", DomainKind::logic(DomainKind::Box), Dep::tuple([Dep::named("b")]))];
        assert!(matches!(
            SharedProduct::build(&unknown, SharingMode::Alias),
            Err(DomainError::UnknownDependency { .. })
        ));
        let arity = vec![
            Decl::new("box", DomainKind::Box, Dep::Bottom),
            Decl::new("l", DomainKind::logic(DomainKind::Box), Dep::tuple([Dep::named("box"), Dep::named("box")])),
        ];
        assert!(matches!(
            SharedProduct::build(&arity, SharingMode::Alias),
            Err(DomainError::ArityMismatch { .. })
        ));
        let dup = vec![Decl::new("a", DomainKind::Box, Dep::Bottom), Decl::new("a", DomainKind::Box, Dep::Bottom)];
        assert!(matches!(SharedProduct::build(&dup, SharingMode::Alias), Err(DomainError::DuplicateName(_))));
    }

    #[test]
    fn failure_reaches_every_component() {
        // the propagator's atom turns false on the exchanged hulls before
        // it narrows anything
        for mode in [SharingMode::Alias, SharingMode::Exchange] {
            let mut s = SharedProduct::build(&d1(), mode).unwrap();
            s.interpret(&var("x").ge(7).and(var("x").le(8)).and(var("y").ge(1)).and(var("y").le(9)).at("box"))
                .unwrap();
            s.interpret(&var("x").eq_to(6).or(var("y").gt(2)).at("lbox")).unwrap();
            s.interpret(&(var("x") - (var("y") + var("y"))).gt(2).at("ipc")).unwrap();
            s.closure();
            for c in s.components() {
                assert_eq!(c.borrow().state(), Kleene::False, "{mode:?}");
            }
            let stamp = s.stamp();
            s.rho();
            assert_eq!(s.stamp(), stamp);
        }
    }

    #[test]
    fn alias_wiring_shares_one_box() {
        let s = SharedProduct::build(&d1(), SharingMode::Alias).unwrap();
        s.component("box").unwrap().borrow_mut().interpret(&var("x").le(4)).unwrap();
        assert_eq!(s.component("ipc").unwrap().borrow().project(&Var::new("x")), Interval::at_most(4));
        assert_eq!(s.component("lbox").unwrap().borrow().project(&Var::new("x")), Interval::at_most(4));
    }

    #[test]
    fn bottom_dependencies_share_nothing() {
        let d2 = vec![
            Decl::new("box", DomainKind::Box, Dep::Bottom),
            Decl::new("lbox", DomainKind::logic(DomainKind::Box), Dep::Bottom),
        ];
        let s = SharedProduct::build(&d2, SharingMode::Alias).unwrap();
        s.component("box").unwrap().borrow_mut().interpret(&var("x").le(4)).unwrap();
        assert_eq!(s.component("lbox").unwrap().borrow().project(&Var::new("x")), Interval::bottom());
    }

    #[test]
    fn routing_errors() {
        let mut s = SharedProduct::build(&d1(), SharingMode::Alias).unwrap();
        assert!(matches!(s.interpret(&var("x").le(1)), Err(DomainError::MissingAnnotation(_))));
        assert!(matches!(
            s.interpret(&var("x").le(1).at("nosuch")),
            Err(DomainError::UnknownComponentName(_))
        ));
        s.interpret(&var("x").gt(1).at("box")).unwrap();
        assert_eq!(s.project(&Var::new("x")), Interval::at_least(2));
    }

    #[test]
    fn c4_closure_in_both_modes() {
        for mode in [SharingMode::Alias, SharingMode::Exchange] {
            let mut s = c4(mode);
            s.closure();
            for c in s.components() {
                assert_eq!(c.borrow().project(&Var::new("x")), Interval::new(0, 1), "{mode:?}");
            }
        }
    }

    #[test]
    fn exchange_matches_alias() {
        let mut a = c4(SharingMode::Alias);
        let mut e = c4(SharingMode::Exchange);
        a.closure();
        e.closure();
        assert!(a.leq(&e) && e.leq(&a));
    }

    #[test]
    fn rho_is_idempotent() {
        let mut e = c4(SharingMode::Exchange);
        e.closure();
        let before = e.stamp();
        e.rho();
        assert_eq!(e.stamp(), before);
    }

    #[test]
    fn fork_keeps_links_private() {
        let mut e = c4(SharingMode::Exchange);
        let mut f = e.fork(&mut CloneMap::new());
        f.interpret(&var("y").le(2).at("box")).unwrap();
        f.closure();
        e.closure();
        assert_eq!(f.component("ipc").unwrap().borrow().project(&Var::new("y")), Interval::new(0, 2));
        assert_eq!(e.component("ipc").unwrap().borrow().project(&Var::new("y")), Interval::new(0, 9));
    }
}
