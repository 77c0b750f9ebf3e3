//! Interval propagator completion: an underlying element paired with HC4
//! propagators compiled from arbitrary arithmetic atoms.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;

use crate::element::Element;
use crate::formula::{Atom, BinOp, Expr, Formula, Rel, Var, VarSet};
use crate::lattice::{
    interval_arith, interval_inv_narrow, interval_join, AbstractDomain, Branch, CloneMap,
    DomainError, ExtendedInt, Interval, Kleene, Side,
};

/// Upper bound on propagator invocations in one closure. Stopping early is
/// sound; it only matters for slowly converging cycles over huge domains.
const MAX_STEPS: usize = 2_000_000;

/// Forward interval evaluation. Overflow widens to the unconstrained
/// interval.
pub fn eval_interval(e: &Expr, hull: &dyn Fn(&Var) -> Interval) -> Interval {
    match e {
        Expr::Const(c) => Interval::singleton(*c),
        Expr::Var(v) => hull(v),
        Expr::Neg(s) => eval_interval(s, hull).neg(),
        Expr::Bin(op, l, r) => {
            interval_arith(*op, eval_interval(l, hull), eval_interval(r, hull)).unwrap_or_default()
        }
    }
}

fn step(v: ExtendedInt, delta: i64) -> ExtendedInt {
    v.checked_add(ExtendedInt::Finite(delta)).unwrap_or(v)
}

/// Entailment of `l rel r` given the hulls of both sides.
pub fn relation_state(rel: Rel, l: Interval, r: Interval) -> Kleene {
    if l.is_empty() || r.is_empty() {
        return Kleene::False;
    }
    let k = |t: bool, f: bool| {
        if t {
            Kleene::True
        } else if f {
            Kleene::False
        } else {
            Kleene::Unknown
        }
    };
    match rel {
        Rel::Le => k(l.hi() <= r.lo(), l.lo() > r.hi()),
        Rel::Lt => k(l.hi() < r.lo(), l.lo() >= r.hi()),
        Rel::Ge => k(l.lo() >= r.hi(), l.hi() < r.lo()),
        Rel::Gt => k(l.lo() > r.hi(), l.hi() <= r.lo()),
        Rel::Eq => {
            let same = l.is_singleton() && l == r;
            k(same, interval_join(l, r).is_empty())
        }
        Rel::Neq => {
            let same = l.is_singleton() && l == r;
            k(interval_join(l, r).is_empty(), same)
        }
    }
}

/// Entailment test of an atom on variable hulls.
pub fn entailment(a: &Atom, hull: &dyn Fn(&Var) -> Interval) -> Kleene {
    relation_state(a.rel, eval_interval(&a.left, hull), eval_interval(&a.right, hull))
}

/// Narrowing of both sides of `l rel r` at the root of the expression trees.
fn narrow_root(rel: Rel, l: Interval, r: Interval) -> (Interval, Interval) {
    match rel {
        Rel::Le => (
            interval_join(l, Interval::at_most(r.hi())),
            interval_join(r, Interval::at_least(l.lo())),
        ),
        Rel::Lt => (
            interval_join(l, Interval::at_most(step(r.hi(), -1))),
            interval_join(r, Interval::at_least(step(l.lo(), 1))),
        ),
        Rel::Ge => {
            let (r2, l2) = narrow_root(Rel::Le, r, l);
            (l2, r2)
        }
        Rel::Gt => {
            let (r2, l2) = narrow_root(Rel::Lt, r, l);
            (l2, r2)
        }
        Rel::Eq => {
            let m = interval_join(l, r);
            (m, m)
        }
        Rel::Neq => (punch(l, r), punch(r, l)),
    }
}

/// Removes the value of `other` from `itv` when `other` is a singleton
/// sitting at an endpoint of `itv`.
fn punch(itv: Interval, other: Interval) -> Interval {
    let Some(c) = other.as_singleton() else { return itv };
    if itv.is_singleton() && itv.lo() == c {
        Interval::empty()
    } else if itv.lo() == c {
        Interval::new(c + 1, itv.hi())
    } else if itv.hi() == c {
        Interval::new(itv.lo(), c - 1)
    } else {
        itv
    }
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Const(i64),
    Var(usize),
    Neg(usize),
    Bin(BinOp, usize, usize),
}

/// A compiled HC4-revise propagator for one atom.
pub struct Propagator {
    atom: Atom,
    nodes: Vec<Node>,
    left: usize,
    right: usize,
    vars: Vec<Var>,
}

/// Result of one revise pass.
#[derive(Debug, Default)]
pub struct Revision {
    /// Indices (into `Propagator::vars`) of variables whose hull shrank.
    pub narrowed: Vec<usize>,
    pub failed: bool,
}

impl Propagator {
    pub fn compile(atom: &Atom) -> Propagator {
        let mut p = Propagator {
            atom: atom.clone(),
            nodes: Vec::new(),
            left: 0,
            right: 0,
            vars: Vec::new(),
        };
        p.left = p.push(&atom.left);
        p.right = p.push(&atom.right);
        p
    }

    fn push(&mut self, e: &Expr) -> usize {
        let node = match e {
            Expr::Const(c) => Node::Const(*c),
            Expr::Var(v) => {
                let k = match self.vars.iter().position(|w| w == v) {
                    Some(k) => k,
                    None => {
                        self.vars.push(v.clone());
                        self.vars.len() - 1
                    }
                };
                Node::Var(k)
            }
            Expr::Neg(s) => Node::Neg(self.push(s)),
            Expr::Bin(op, l, r) => {
                let l = self.push(l);
                let r = self.push(r);
                Node::Bin(*op, l, r)
            }
        };
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn atom(&self) -> &Atom {
        &self.atom
    }

    /// Variables the propagator reacts on.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn forward(&self, hulls: &[Interval]) -> Vec<Interval> {
        let mut val: Vec<Interval> = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let v = match *n {
                Node::Const(c) => Interval::singleton(c),
                Node::Var(k) => hulls[k],
                Node::Neg(s) => val[s].neg(),
                Node::Bin(op, l, r) => interval_arith(op, val[l], val[r]).unwrap_or_default(),
            };
            val.push(v);
        }
        val
    }

    /// Entailment on the given hulls (indexed like `vars`).
    pub fn state_on(&self, hulls: &[Interval]) -> Kleene {
        if hulls.iter().any(Interval::is_empty) {
            return Kleene::False;
        }
        let val = self.forward(hulls);
        relation_state(self.atom.rel, val[self.left], val[self.right])
    }

    pub fn state_of(&self, elem: &Element) -> Kleene {
        let hulls: Vec<Interval> = self.vars.iter().map(|v| elem.project(v)).collect();
        self.state_on(&hulls)
    }

    /// One HC4-revise pass on the given hulls: forward evaluation, root
    /// narrowing and backward narrowing. Returns the new hulls.
    pub fn revise_hulls(&self, hulls: &[Interval]) -> Option<Vec<Interval>> {
        if hulls.iter().any(Interval::is_empty) {
            return None;
        }
        let mut val = self.forward(hulls);
        let (l, r) = narrow_root(self.atom.rel, val[self.left], val[self.right]);
        if l.is_empty() || r.is_empty() {
            return None;
        }
        val[self.left] = l;
        val[self.right] = r;
        let mut out = hulls.to_vec();
        // Children always have smaller indices than their parent.
        for i in (0..self.nodes.len()).rev() {
            let t = val[i];
            match self.nodes[i] {
                Node::Const(c) => {
                    if !t.contains(c) {
                        return None;
                    }
                }
                Node::Var(k) => {
                    out[k] = interval_join(out[k], t);
                    if out[k].is_empty() {
                        return None;
                    }
                }
                Node::Neg(s) => {
                    val[s] = interval_join(val[s], t.neg());
                    if val[s].is_empty() {
                        return None;
                    }
                }
                Node::Bin(op, a, b) => {
                    val[a] = interval_join(val[a], interval_inv_narrow(op, t, val[b], Side::Left));
                    val[b] = interval_join(val[b], interval_inv_narrow(op, t, val[a], Side::Right));
                    if val[a].is_empty() || val[b].is_empty() {
                        return None;
                    }
                }
            }
        }
        Some(out)
    }

    /// Applies one revise pass to `elem`, writing narrowed hulls back
    /// through `embed`.
    pub fn revise(&self, elem: &mut Element) -> Revision {
        let hulls: Vec<Interval> = self.vars.iter().map(|v| elem.project(v)).collect();
        match self.revise_hulls(&hulls) {
            None => {
                if let Some(v) = self.vars.first() {
                    elem.embed(v, Interval::empty());
                }
                Revision { narrowed: Vec::new(), failed: true }
            }
            Some(out) => {
                let mut narrowed = Vec::new();
                for (k, (old, new)) in hulls.iter().zip(&out).enumerate() {
                    if old != new {
                        elem.embed(&self.vars[k], *new);
                        narrowed.push(k);
                    }
                }
                Revision { narrowed, failed: false }
            }
        }
    }
}

impl fmt::Debug for Propagator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "prop({})", self.atom)
    }
}

pub struct Ipc {
    base: Box<Element>,
    props: Vec<Rc<Propagator>>,
    /// `props[fresh..]` have not run yet.
    fresh: usize,
    /// Stamp of `base` when the last closure reached its fixpoint.
    closed_at: Option<u64>,
    /// Hulls of the watched variables at the end of the last closure.
    snapshot: Rc<HashMap<Var, Interval>>,
    watch: Rc<HashMap<Var, Vec<usize>>>,
    watched: usize,
    failed: bool,
    stamp: u64,
}

impl Ipc {
    pub fn new(base: Element) -> Self {
        Ipc {
            base: Box::new(base),
            props: Vec::new(),
            fresh: 0,
            closed_at: None,
            snapshot: Rc::default(),
            watch: Rc::default(),
            watched: 0,
            failed: false,
            stamp: 0,
        }
    }

    pub fn base(&self) -> &Element {
        &self.base
    }

    pub fn base_mut(&mut self) -> &mut Element {
        &mut self.base
    }

    pub fn propagators(&self) -> &[Rc<Propagator>] {
        &self.props
    }

    pub fn fork(&self, map: &mut CloneMap) -> Self {
        Ipc {
            base: Box::new(self.base.fork(map)),
            props: self.props.clone(),
            fresh: self.fresh,
            closed_at: self.closed_at,
            snapshot: self.snapshot.clone(),
            watch: self.watch.clone(),
            watched: self.watched,
            failed: self.failed,
            stamp: self.stamp,
        }
    }

    pub fn add_propagator(&mut self, atom: &Atom) -> Result<(), DomainError> {
        for v in atom.vars() {
            if !self.base.has_var(&v) {
                return Err(DomainError::UnregisteredVariable(v));
            }
        }
        self.props.push(Rc::new(Propagator::compile(atom)));
        self.stamp += 1;
        Ok(())
    }

    fn index_watchers(&mut self) {
        if self.watched == self.props.len() {
            return;
        }
        let watch = Rc::make_mut(&mut self.watch);
        for (i, p) in self.props.iter().enumerate().skip(self.watched) {
            for v in p.vars() {
                watch.entry(v.clone()).or_default().push(i);
            }
        }
        self.watched = self.props.len();
    }

    /// Runs the propagators to a fixpoint (or a failure) with a worklist
    /// woken by hull changes.
    pub fn propagate(&mut self) {
        if self.failed {
            return;
        }
        if self.closed_at == Some(self.base.stamp()) && self.fresh == self.props.len() {
            return;
        }
        self.index_watchers();
        let n = self.props.len();
        let mut queued = vec![false; n];
        let mut queue = VecDeque::new();
        let wake = |i: usize, queue: &mut VecDeque<usize>, queued: &mut Vec<bool>| {
            if !queued[i] {
                queued[i] = true;
                queue.push_back(i);
            }
        };
        if self.closed_at.is_none() {
            for i in 0..n {
                wake(i, &mut queue, &mut queued);
            }
        } else {
            for (v, old) in self.snapshot.iter() {
                if self.base.project(v) != *old {
                    for &i in &self.watch[v] {
                        wake(i, &mut queue, &mut queued);
                    }
                }
            }
            for i in self.fresh..n {
                wake(i, &mut queue, &mut queued);
            }
        }
        let mut steps = 0;
        let mut failed = false;
        while let Some(i) = queue.pop_front() {
            queued[i] = false;
            steps += 1;
            let p = self.props[i].clone();
            let rev = p.revise(&mut self.base);
            if rev.failed {
                failed = true;
                break;
            }
            for k in rev.narrowed {
                for &j in &self.watch[&p.vars()[k]] {
                    wake(j, &mut queue, &mut queued);
                }
            }
            if steps >= MAX_STEPS {
                break;
            }
        }
        if failed {
            // Ground atoms cannot empty the base, so the failure is kept here.
            self.failed = true;
            self.stamp += 1;
        }
        let snapshot: HashMap<Var, Interval> =
            self.watch.keys().map(|v| (v.clone(), self.base.project(v))).collect();
        self.snapshot = Rc::new(snapshot);
        self.closed_at = Some(self.base.stamp());
        self.fresh = n;
    }

    /// Coordinatewise join used by explicit sharing.
    pub fn join(&mut self, other: &Ipc) {
        self.base.join(&other.base);
        for p in &other.props {
            if !self.props.iter().any(|q| q.atom == p.atom) {
                self.props.push(p.clone());
                self.stamp += 1;
            }
        }
        if other.failed && !self.failed {
            self.failed = true;
            self.stamp += 1;
        }
    }

    pub fn leq(&self, other: &Ipc) -> bool {
        (other.failed || !self.failed)
            && self.base.leq(&other.base)
            && self.props.iter().all(|p| other.props.iter().any(|q| q.atom == p.atom))
    }

    fn forward_target<'a>(&self, phi: &'a Formula) -> Option<&'a Formula> {
        match phi {
            Formula::Annotated(inner, _) if !self.base.routes_labels() => Some(inner),
            Formula::Annotated(..) => Some(phi),
            _ => None,
        }
    }
}

impl AbstractDomain for Ipc {
    fn supports(&self, phi: &Formula) -> bool {
        if let Some(target) = self.forward_target(phi) {
            return self.base.supports(target);
        }
        match phi {
            Formula::Atom(a) => a.vars().iter().all(|v| self.base.has_var(v)),
            _ => false,
        }
    }

    fn interpret(&mut self, phi: &Formula) -> Result<(), DomainError> {
        if let Some(target) = self.forward_target(phi) {
            return self.base.interpret(target);
        }
        match phi {
            Formula::Atom(a) => self.add_propagator(a),
            _ => Err(DomainError::not_supported("interval propagators", phi)),
        }
    }

    /// Propagates only; the underlying element's own closure is left to
    /// whoever owns it.
    fn closure(&mut self) {
        self.propagate();
    }

    fn state(&self) -> Kleene {
        if self.failed {
            return Kleene::False;
        }
        let mut acc = self.base.state();
        let mut cache: HashMap<&Var, Interval> = HashMap::new();
        for p in &self.props {
            if acc == Kleene::False {
                break;
            }
            let hulls: Vec<Interval> = p
                .vars()
                .iter()
                .map(|v| *cache.entry(v).or_insert_with(|| self.base.project(v)))
                .collect();
            acc = acc.and(p.state_on(&hulls));
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

    fn split(&self) -> Result<Vec<Branch>, DomainError> {
        Ok(self.base.split()?.into_iter().map(|b| Branch::Base(Box::new(b))).collect())
    }

    fn refine(&mut self, branch: &Branch) -> Result<(), DomainError> {
        match branch {
            Branch::Base(b) => self.base.refine(b),
            Branch::Bound(x, itv) => {
                self.embed(x, *itv);
                Ok(())
            }
            _ => Err(DomainError::InvalidBranch),
        }
    }

    fn contains(&self, point: &dyn Fn(&Var) -> Option<i64>) -> bool {
        !self.failed
            && self.base.contains(point)
            && self.props.iter().all(|p| p.atom.holds(point).unwrap_or(false))
    }

    fn stamp(&self) -> u64 {
        self.stamp + self.base.stamp()
    }
}

impl fmt::Debug for Ipc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ipc").field("base", &self.base).field("props", &self.props.len()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{cst, var};

    fn iv(a: i64, b: i64) -> Interval {
        Interval::new(a, b)
    }

    fn revise(atom: Formula, hulls: &[(&str, Interval)]) -> Option<Vec<(String, Interval)>> {
        let p = Propagator::compile(atom.as_atom().unwrap());
        let h: Vec<Interval> = p
            .vars()
            .iter()
            .map(|v| hulls.iter().find(|(n, _)| *n == v.name()).unwrap().1)
            .collect();
        let out = p.revise_hulls(&h)?;
        Some(p.vars().iter().map(|v| v.name().to_string()).zip(out).collect())
    }

    #[test]
    fn ge_pins_both() {
        let out = revise(var("x").ge(var("y")), &[("x", iv(1, 2)), ("y", iv(2, 3))]).unwrap();
        assert_eq!(out, vec![("x".into(), iv(2, 2)), ("y".into(), iv(2, 2))]);
    }

    #[test]
    fn sum_bound() {
        let out = revise((var("x") + var("y")).le(5), &[("x", iv(0, 10)), ("y", iv(2, 8))]).unwrap();
        assert_eq!(out, vec![("x".into(), iv(0, 3)), ("y".into(), iv(2, 5))]);
    }

    #[test]
    fn product_keeps_y_when_x_may_be_zero() {
        let out = revise((var("x") * var("y")).le(5), &[("x", iv(0, 1)), ("y", iv(0, 100))]).unwrap();
        assert_eq!(out[1], ("y".into(), iv(0, 100)));
    }

    #[test]
    fn disequality_punches_endpoints() {
        let out = revise(var("x").ne_to(0), &[("x", iv(0, 4))]).unwrap();
        assert_eq!(out[0].1, iv(1, 4));
        let out = revise(var("x").ne_to(2), &[("x", iv(0, 4))]).unwrap();
        assert_eq!(out[0].1, iv(0, 4));
        assert!(revise(var("x").ne_to(2), &[("x", iv(2, 2))]).is_none());
    }

    #[test]
    fn repeated_variable_intersects_occurrences() {
        // x + x = 4 with x in [0..9]: each occurrence gives x <= 4.
        let out = revise((var("x") + var("x")).eq_to(4), &[("x", iv(0, 9))]).unwrap();
        assert_eq!(out[0].1, iv(0, 4));
    }

    #[test]
    fn entailment_cases() {
        let h = |a: Interval, b: Interval| move |v: &Var| if v.name() == "x" { a } else { b };
        let a = (var("x") + var("y")).le(5);
        let a = a.as_atom().unwrap();
        assert_eq!(entailment(a, &h(iv(0, 3), iv(2, 5))), Kleene::Unknown);
        assert_eq!(entailment(a, &h(iv(0, 1), iv(2, 4))), Kleene::True);
        assert_eq!(entailment(a, &h(iv(3, 4), iv(3, 5))), Kleene::False);
        let e = var("x").eq_to(1);
        assert_eq!(entailment(e.as_atom().unwrap(), &h(iv(1, 2), iv(0, 0))), Kleene::Unknown);
        assert_eq!(entailment(e.as_atom().unwrap(), &h(iv(1, 1), iv(0, 0))), Kleene::True);
        let g = cst(3).le(4);
        assert_eq!(entailment(g.as_atom().unwrap(), &h(iv(0, 0), iv(0, 0))), Kleene::True);
    }
}
