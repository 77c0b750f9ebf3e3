//! Integer octagons over a coherent difference-bound matrix.
//!
//! Variable `i` owns two matrix indices, `2i` for `+x_i` and `2i + 1` for
//! `-x_i`. Entry `(r, c)` bounds `lit(c) - lit(r)`. `+∞` is stored as
//! `i64::MAX`.

use std::cell::Cell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use crate::boxdom::{bound_branches, pick_split};
use crate::formula::{Atom, Formula, LinearForm, Rel, Var, VarSet};
use crate::lattice::{AbstractDomain, Branch, DomainError, ExtendedInt, Interval, Kleene};

const INF: i64 = i64::MAX;

thread_local! {
    static SKIP_STRENGTHENING: Cell<bool> = const { Cell::new(false) };
}

/// Test hook: makes full closure skip its strengthening pass on the current
/// thread, so that oracle suites have a fault to detect.
#[doc(hidden)]
pub fn inject_closure_fault(on: bool) {
    SKIP_STRENGTHENING.with(|c| c.set(on));
}

fn add(a: i64, b: i64) -> i64 {
    if a == INF || b == INF {
        INF
    } else {
        a.saturating_add(b)
    }
}

fn half(v: i64) -> i64 {
    if v == INF {
        INF
    } else {
        v.div_euclid(2)
    }
}

fn bar(i: usize) -> usize {
    i ^ 1
}

/// A single octagonal inequality `lit(col) - lit(row) ≤ w`, by variable.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Edge {
    /// `sign · x ≤ c`
    Unary { x: Var, positive: bool, c: i64 },
    /// `s1 · x + s2 · y ≤ c`
    Binary { x: Var, sx: bool, y: Var, sy: bool, c: i64 },
    Ground(bool),
}

/// Decomposes an atom into octagonal inequalities.
fn edges_of(a: &Atom) -> Option<Vec<Edge>> {
    let lf = LinearForm::of_atom(a)?;
    let k = lf.constant;
    // lf = Σ + k  ⋈  0, expressed as a list of (sign of Σ, bound) pairs.
    let parts: Vec<(i64, i64)> = match a.rel {
        Rel::Le => vec![(1, k.checked_neg()?)],
        Rel::Lt => vec![(1, k.checked_neg()?.checked_sub(1)?)],
        Rel::Ge => vec![(-1, k)],
        Rel::Gt => vec![(-1, k.checked_sub(1)?)],
        Rel::Eq => vec![(1, k.checked_neg()?), (-1, k)],
        Rel::Neq => {
            return lf.coeffs.is_empty().then(|| vec![Edge::Ground(k != 0)]);
        }
    };
    let terms: Vec<(&Var, i64)> = lf.coeffs.iter().map(|(v, c)| (v, *c)).collect();
    let mut out = Vec::new();
    for (sign, c) in parts {
        match terms.as_slice() {
            [] => out.push(Edge::Ground(0 <= c)),
            [(x, a)] => {
                let a = a.checked_mul(sign)?;
                let bound = c.div_euclid(a.abs());
                out.push(Edge::Unary { x: (*x).clone(), positive: a > 0, c: bound });
            }
            [(x, a), (y, b)] if a.abs() == 1 && b.abs() == 1 => out.push(Edge::Binary {
                x: (*x).clone(),
                sx: a * sign > 0,
                y: (*y).clone(),
                sy: b * sign > 0,
                c,
            }),
            _ => return None,
        }
    }
    Some(out)
}

fn edges_of_formula(phi: &Formula) -> Option<Vec<Edge>> {
    let mut out = Vec::new();
    for c in phi.conjuncts() {
        let Formula::Atom(a) = c else { return None };
        out.extend(edges_of(a)?);
    }
    Some(out)
}

#[derive(Clone)]
pub struct Octagon {
    vars: Rc<Vec<Var>>,
    index: Rc<HashMap<Var, usize>>,
    dbm: Vec<i64>,
    /// The matrix was tightly closed before the entries in `pending` moved.
    closed: bool,
    empty: bool,
    pending: Vec<(usize, usize)>,
    stamp: u64,
}

impl Default for Octagon {
    fn default() -> Self {
        Octagon {
            vars: Rc::default(),
            index: Rc::default(),
            dbm: Vec::new(),
            closed: true,
            empty: false,
            pending: Vec::new(),
            stamp: 0,
        }
    }
}

impl Octagon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an octagon from a raw `2n × 2n` row-major matrix where `None`
    /// stands for `+∞`. The matrix is made coherent by taking the minimum of
    /// each entry and its mirror, and the diagonal is capped at 0.
    pub fn from_matrix(vars: Vec<Var>, entries: &[Option<i64>]) -> Self {
        let mut o = Octagon::new();
        for v in &vars {
            o.register(v);
        }
        let d = o.dim();
        assert_eq!(entries.len(), d * d, "matrix size must be (2n)^2");
        for r in 0..d {
            for c in 0..d {
                if let Some(w) = entries[r * d + c] {
                    o.set(r, c, w);
                }
            }
        }
        o.closed = d == 0;
        o.pending.clear();
        o
    }

    pub fn dim(&self) -> usize {
        2 * self.vars.len()
    }

    pub fn variables(&self) -> &[Var] {
        &self.vars
    }

    pub fn index_of(&self, x: &Var) -> Option<usize> {
        self.index.get(x).copied()
    }

    /// Entry `(r, c)`; `None` is `+∞`.
    pub fn entry(&self, r: usize, c: usize) -> Option<i64> {
        let v = self.dbm[r * self.dim() + c];
        (v != INF).then_some(v)
    }

    /// All entries, row-major.
    pub fn entries(&self) -> Vec<Option<i64>> {
        self.dbm.iter().map(|&v| (v != INF).then_some(v)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn is_closed(&self) -> bool {
        self.closed && self.pending.is_empty()
    }

    fn at(&self, r: usize, c: usize) -> i64 {
        self.dbm[r * self.dim() + c]
    }

    /// Adds `x` with unconstrained rows and columns; returns its index.
    pub fn register(&mut self, x: &Var) -> usize {
        if let Some(i) = self.index.get(x) {
            return *i;
        }
        let old = self.dim();
        let new = old + 2;
        let mut dbm = vec![INF; new * new];
        for r in 0..old {
            dbm[r * new..r * new + old].copy_from_slice(&self.dbm[r * old..(r + 1) * old]);
        }
        dbm[old * new + old] = 0;
        dbm[(old + 1) * new + old + 1] = 0;
        self.dbm = dbm;
        let i = self.vars.len();
        Rc::make_mut(&mut self.vars).push(x.clone());
        Rc::make_mut(&mut self.index).insert(x.clone(), i);
        self.stamp += 1;
        i
    }

    /// Tightens `(r, c)` and its coherent mirror to `w`.
    fn set(&mut self, r: usize, c: usize, w: i64) {
        let d = self.dim();
        if w >= self.dbm[r * d + c] {
            return;
        }
        self.dbm[r * d + c] = w;
        self.dbm[bar(c) * d + bar(r)] = w;
        self.stamp += 1;
        if self.closed {
            self.pending.push((r, c));
        }
    }

    fn add_edge(&mut self, e: &Edge) {
        match e {
            Edge::Ground(true) => {}
            Edge::Ground(false) => self.mark_empty(),
            Edge::Unary { x, positive, c } => {
                let i = self.register(x);
                let Some(w) = c.checked_mul(2) else { return };
                let (p, n) = (2 * i, 2 * i + 1);
                if *positive {
                    self.set(n, p, w);
                } else {
                    self.set(p, n, w);
                }
            }
            Edge::Binary { x, sx, y, sy, c } => {
                let i = self.register(x);
                let j = self.register(y);
                let col = if *sx { 2 * i } else { 2 * i + 1 };
                let row = if *sy { 2 * j + 1 } else { 2 * j };
                self.set(row, col, *c);
            }
        }
    }

    fn mark_empty(&mut self) {
        if !self.empty {
            self.empty = true;
            self.stamp += 1;
        }
        self.pending.clear();
    }

    /// Tight closure from scratch: shortest paths, integer tightening and
    /// one strengthening pass.
    pub fn full_closure(&mut self) {
        if self.empty {
            return;
        }
        let d = self.dim();
        let before = self.dbm.clone();
        for k in 0..d {
            for i in 0..d {
                let ik = self.dbm[i * d + k];
                if ik == INF {
                    continue;
                }
                for j in 0..d {
                    let v = add(ik, self.dbm[k * d + j]);
                    if v < self.dbm[i * d + j] {
                        self.dbm[i * d + j] = v;
                    }
                }
                if self.dbm[i * d + i] < 0 {
                    self.mark_empty();
                    return;
                }
            }
        }
        self.finish(SKIP_STRENGTHENING.with(Cell::get));
        if self.dbm != before {
            self.stamp += 1;
        }
    }

    /// Integer tightening, strengthening and the consistency check.
    fn finish(&mut self, skip_strengthening: bool) {
        let d = self.dim();
        for i in 0..d {
            let v = self.dbm[i * d + bar(i)];
            if v != INF {
                self.dbm[i * d + bar(i)] = 2 * v.div_euclid(2);
            }
        }
        if !skip_strengthening {
            let halves: Vec<i64> = (0..d).map(|i| half(self.dbm[i * d + bar(i)])).collect();
            for i in 0..d {
                for j in 0..d {
                    let v = add(halves[i], halves[bar(j)]);
                    if v < self.dbm[i * d + j] {
                        self.dbm[i * d + j] = v;
                    }
                }
            }
        }
        if (0..d).any(|i| self.dbm[i * d + i] < 0) {
            self.mark_empty();
            return;
        }
        self.closed = true;
        self.pending.clear();
    }

    /// Shortest-path repair after tightening the single entry `(a, b)` of
    /// an otherwise closed matrix.
    fn insert_edge(&mut self, a: usize, b: usize) {
        let d = self.dim();
        let w = self.dbm[a * d + b];
        if w == INF {
            return;
        }
        if add(self.dbm[b * d + a], w) < 0 {
            self.mark_empty();
            return;
        }
        let col_a: Vec<i64> = (0..d).map(|i| self.dbm[i * d + a]).collect();
        let row_b: Vec<i64> = self.dbm[b * d..(b + 1) * d].to_vec();
        for (i, &ia) in col_a.iter().enumerate() {
            if ia == INF {
                continue;
            }
            let through = add(ia, w);
            let row = &mut self.dbm[i * d..(i + 1) * d];
            for (cell, &bj) in row.iter_mut().zip(&row_b) {
                let v = add(through, bj);
                if v < *cell {
                    *cell = v;
                }
            }
        }
    }

    /// Closure reusing the closed state: each moved entry (and its mirror)
    /// is repaired in quadratic time, then tightening and strengthening run
    /// once.
    pub fn incremental_closure(&mut self) {
        if self.empty || self.is_closed() {
            return;
        }
        if !self.closed {
            self.full_closure();
            return;
        }
        let pending = std::mem::take(&mut self.pending);
        let before_stamp = self.stamp;
        for (r, c) in pending {
            self.insert_edge(r, c);
            if self.empty {
                return;
            }
            self.insert_edge(bar(c), bar(r));
            if self.empty {
                return;
            }
        }
        self.finish(false);
        if self.stamp == before_stamp {
            self.stamp += 1;
        }
    }

    /// Pointwise minimum over the union of both variable sets.
    pub fn join(&mut self, other: &Octagon) {
        if other.empty {
            self.mark_empty();
            return;
        }
        let map: Vec<usize> = other.vars.iter().map(|v| self.register(v)).collect();
        let od = other.dim();
        let tr = |i: usize| 2 * map[i / 2] + (i & 1);
        for r in 0..od {
            for c in 0..od {
                let w = other.dbm[r * od + c];
                if w != INF && r != c {
                    self.set(tr(r), tr(c), w);
                }
            }
        }
    }

    fn closed_copy(&self) -> std::borrow::Cow<'_, Octagon> {
        if self.is_closed() || self.empty {
            std::borrow::Cow::Borrowed(self)
        } else {
            let mut c = self.clone();
            c.closure();
            std::borrow::Cow::Owned(c)
        }
    }

    /// `self ≤ other`: every constraint of `self` is implied by `other`.
    pub fn leq(&self, other: &Octagon) -> bool {
        let (a, b) = (self.closed_copy(), other.closed_copy());
        if b.empty {
            return true;
        }
        if a.empty {
            return false;
        }
        let d = a.dim();
        let tr: Vec<Option<usize>> = (0..d)
            .map(|i| b.index_of(&a.vars[i / 2]).map(|j| 2 * j + (i & 1)))
            .collect();
        for r in 0..d {
            for c in 0..d {
                let w = a.at(r, c);
                if w == INF || r == c {
                    continue;
                }
                let bw = match (tr[r], tr[c]) {
                    (Some(br), Some(bc)) => b.at(br, bc),
                    _ => INF,
                };
                if bw > w {
                    return false;
                }
            }
        }
        true
    }

    /// Interval of `x` read from the current matrix.
    fn raw_project(&self, x: &Var) -> Interval {
        if self.empty {
            return Interval::empty();
        }
        let Some(i) = self.index_of(x) else {
            return Interval::bottom();
        };
        let (p, n) = (2 * i, 2 * i + 1);
        let up = self.at(n, p);
        let down = self.at(p, n);
        let hi = if up == INF { ExtendedInt::PosInf } else { ExtendedInt::Finite(half(up)) };
        let lo = if down == INF {
            ExtendedInt::NegInf
        } else {
            // ceil(-down / 2) = -floor(down / 2)
            ExtendedInt::Finite(-half(down))
        };
        Interval::new(lo, hi)
    }
}

impl AbstractDomain for Octagon {
    fn supports(&self, phi: &Formula) -> bool {
        edges_of_formula(phi).is_some()
    }

    fn interpret(&mut self, phi: &Formula) -> Result<(), DomainError> {
        let edges = edges_of_formula(phi).ok_or_else(|| DomainError::not_supported("octagon", phi))?;
        for e in &edges {
            self.add_edge(e);
        }
        Ok(())
    }

    fn closure(&mut self) {
        if self.empty || self.is_closed() {
            return;
        }
        if self.closed && self.pending.len() <= self.dim() {
            self.incremental_closure();
        } else {
            self.closed = false;
            self.pending.clear();
            self.full_closure();
        }
    }

    fn state(&self) -> Kleene {
        Kleene::from_bool(!self.closed_copy().empty)
    }

    /// Reads the bounds without closing first; on a closed octagon they are
    /// exact.
    fn project(&self, x: &Var) -> Interval {
        self.raw_project(x)
    }

    fn vars(&self) -> VarSet {
        self.vars.iter().cloned().collect()
    }

    fn has_var(&self, x: &Var) -> bool {
        self.index.contains_key(x)
    }

    fn embed(&mut self, x: &Var, bound: Interval) {
        let Some(i) = self.index_of(x) else { return };
        if bound.is_empty() {
            self.mark_empty();
            return;
        }
        if let ExtendedInt::Finite(u) = bound.hi() {
            if let Some(w) = u.checked_mul(2) {
                self.set(2 * i + 1, 2 * i, w);
            }
        }
        if let ExtendedInt::Finite(l) = bound.lo() {
            if let Some(w) = l.checked_mul(-2) {
                self.set(2 * i, 2 * i + 1, w);
            }
        }
    }

    fn split(&self) -> Result<Vec<Branch>, DomainError> {
        let o = self.closed_copy();
        if o.empty {
            return Ok(Vec::new());
        }
        let items = o.vars.iter().map(|v| (v, o.raw_project(v)));
        match pick_split(items) {
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
        if self.empty {
            return false;
        }
        let d = self.dim();
        let mut lits = Vec::with_capacity(d);
        for v in self.vars.iter() {
            let Some(val) = point(v) else { return false };
            lits.push(val as i128);
            lits.push(-(val as i128));
        }
        (0..d).all(|r| {
            (0..d).all(|c| {
                let w = self.at(r, c);
                w == INF || lits[c] - lits[r] <= w as i128
            })
        })
    }

    fn stamp(&self) -> u64 {
        self.stamp
    }
}

impl fmt::Debug for Octagon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            return f.write_str("Octagon(empty)");
        }
        let lit = |i: usize| {
            let s = if i.is_multiple_of(2) { "+" } else { "-" };
            format!("{s}{}", self.vars[i / 2])
        };
        let d = self.dim();
        let mut list = f.debug_list();
        for r in 0..d {
            for c in 0..d {
                let w = self.at(r, c);
                if w != INF && r != c {
                    list.entry(&format_args!("{} {} <= {}", lit(c), lit(bar(r)), w));
                }
            }
        }
        list.finish()
    }
}
