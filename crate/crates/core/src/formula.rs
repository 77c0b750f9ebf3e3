//! Quantifier-free arithmetic formulas over integer variables.
//!
//! Formulas are built programmatically (there is no surface syntax). Every
//! abstract domain in this crate interprets some fragment of [`Formula`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;
use std::sync::Arc;

use thiserror::Error;

use crate::lattice::ExtendedInt;

/// An interned variable name. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: impl AsRef<str>) -> Self {
        Var(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

impl From<String> for Var {
    fn from(s: String) -> Self {
        Var(Arc::from(s))
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type VarSet = BTreeSet<Var>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }
}

/// Integer arithmetic expression. There is no division.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Const(i64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("integer overflow while evaluating `{0}`")]
    Overflow(String),
    #[error("variable `{0}` has no value")]
    Unbound(Var),
}

/// Shorthand for `Expr::Var`.
pub fn var(name: impl AsRef<str>) -> Expr {
    Expr::Var(Var::new(name))
}

/// Shorthand for `Expr::Const`.
pub fn cst(value: i64) -> Expr {
    Expr::Const(value)
}

impl Expr {
    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn le(self, rhs: impl Into<Expr>) -> Formula {
        Formula::atom(self, Rel::Le, rhs.into())
    }
    pub fn lt(self, rhs: impl Into<Expr>) -> Formula {
        Formula::atom(self, Rel::Lt, rhs.into())
    }
    pub fn ge(self, rhs: impl Into<Expr>) -> Formula {
        Formula::atom(self, Rel::Ge, rhs.into())
    }
    pub fn gt(self, rhs: impl Into<Expr>) -> Formula {
        Formula::atom(self, Rel::Gt, rhs.into())
    }
    pub fn eq_to(self, rhs: impl Into<Expr>) -> Formula {
        Formula::atom(self, Rel::Eq, rhs.into())
    }
    pub fn ne_to(self, rhs: impl Into<Expr>) -> Formula {
        Formula::atom(self, Rel::Neq, rhs.into())
    }

    pub fn collect_vars(&self, out: &mut VarSet) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    /// Variables in left-to-right order of first occurrence.
    pub fn vars_in_order(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expr::Neg(e) => e.vars_in_order(out),
            Expr::Bin(_, l, r) => {
                l.vars_in_order(out);
                r.vars_in_order(out);
            }
        }
    }

    pub fn occurrences(&self, x: &Var) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(v) => usize::from(v == x),
            Expr::Neg(e) => e.occurrences(x),
            Expr::Bin(_, l, r) => l.occurrences(x) + r.occurrences(x),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(e) => e.is_ground(),
            Expr::Bin(_, l, r) => l.is_ground() && r.is_ground(),
        }
    }

    pub fn eval(&self, env: &dyn Fn(&Var) -> Option<i64>) -> Result<i64, EvalError> {
        let overflow = || EvalError::Overflow(self.to_string());
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(v) => env(v).ok_or_else(|| EvalError::Unbound(v.clone())),
            Expr::Neg(e) => e.eval(env)?.checked_neg().ok_or_else(overflow),
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval(env)?, r.eval(env)?);
                match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                }
                .ok_or_else(overflow)
            }
        }
    }

    /// Value of a variable-free expression.
    pub fn ground_value(&self) -> Option<Result<i64, EvalError>> {
        self.is_ground().then(|| self.eval(&|_| None))
    }

    fn substitute(&self, bindings: &BTreeMap<Var, i64>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(v) => match bindings.get(v) {
                Some(c) => Expr::Const(*c),
                None => self.clone(),
            },
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(bindings))),
            Expr::Bin(op, l, r) => Expr::bin(*op, l.substitute(bindings), r.substitute(bindings)),
        }
    }

    /// Splits off the single additive occurrence of `x`: returns `(s, rest)`
    /// such that `self = s*x + rest` with `s = ±1`. `rest = None` stands for 0.
    /// Fails when `x` is absent or sits under a multiplication.
    fn split_term(&self, x: &Var) -> Option<(i64, Option<Expr>)> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(v) => (v == x).then_some((1, None)),
            Expr::Neg(e) => {
                let (s, rest) = e.split_term(x)?;
                Some((-s, rest.map(|r| Expr::Neg(Box::new(r)))))
            }
            Expr::Bin(BinOp::Mul, _, _) => None,
            Expr::Bin(op, l, r) => {
                if l.occurrences(x) > 0 {
                    let (s, rest) = l.split_term(x)?;
                    let rest = match rest {
                        Some(lr) => Expr::bin(*op, lr, (**r).clone()),
                        None if *op == BinOp::Add => (**r).clone(),
                        None => Expr::Neg(r.clone()),
                    };
                    Some((s, Some(rest)))
                } else {
                    let (s, rest) = r.split_term(x)?;
                    let s = if *op == BinOp::Sub { -s } else { s };
                    let rest = match rest {
                        Some(rr) => Expr::bin(*op, (**l).clone(), rr),
                        None => (**l).clone(),
                    };
                    Some((s, Some(rest)))
                }
            }
        }
    }
}

impl From<i64> for Expr {
    fn from(c: i64) -> Self {
        Expr::Const(c)
    }
}

impl From<Var> for Expr {
    fn from(v: Var) -> Self {
        Expr::Var(v)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::bin(BinOp::Add, self, rhs)
    }
}

impl ops::Add<i64> for Expr {
    type Output = Expr;
    fn add(self, rhs: i64) -> Expr {
        Expr::bin(BinOp::Add, self, Expr::Const(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::bin(BinOp::Sub, self, rhs)
    }
}

impl ops::Sub<i64> for Expr {
    type Output = Expr;
    fn sub(self, rhs: i64) -> Expr {
        Expr::bin(BinOp::Sub, self, Expr::Const(rhs))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::bin(BinOp::Mul, self, rhs)
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(op, l, r) => {
                let paren = |e: &Expr, f: &mut fmt::Formatter<'_>, tight: bool| match e {
                    Expr::Bin(BinOp::Add | BinOp::Sub, ..) if tight => write!(f, "({e})"),
                    _ => write!(f, "{e}"),
                };
                paren(l, f, *op == BinOp::Mul)?;
                write!(f, " {} ", op.symbol())?;
                paren(r, f, *op != BinOp::Add)
            }
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    Neq,
}

impl Rel {
    /// Integer complement.
    pub fn complement(self) -> Rel {
        match self {
            Rel::Le => Rel::Gt,
            Rel::Gt => Rel::Le,
            Rel::Lt => Rel::Ge,
            Rel::Ge => Rel::Lt,
            Rel::Eq => Rel::Neq,
            Rel::Neq => Rel::Eq,
        }
    }

    /// Relation obtained by swapping the two sides.
    pub fn mirror(self) -> Rel {
        match self {
            Rel::Le => Rel::Ge,
            Rel::Ge => Rel::Le,
            Rel::Lt => Rel::Gt,
            Rel::Gt => Rel::Lt,
            r => r,
        }
    }

    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            Rel::Le => a <= b,
            Rel::Lt => a < b,
            Rel::Ge => a >= b,
            Rel::Gt => a > b,
            Rel::Eq => a == b,
            Rel::Neq => a != b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Eq => "=",
            Rel::Neq => "!=",
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub rel: Rel,
    pub left: Expr,
    pub right: Expr,
}

impl Atom {
    pub fn new(left: Expr, rel: Rel, right: Expr) -> Self {
        Atom { rel, left, right }
    }

    pub fn vars(&self) -> VarSet {
        let mut out = VarSet::new();
        self.left.collect_vars(&mut out);
        self.right.collect_vars(&mut out);
        out
    }

    pub fn holds(&self, env: &dyn Fn(&Var) -> Option<i64>) -> Result<bool, EvalError> {
        Ok(self.rel.holds(self.left.eval(env)?, self.right.eval(env)?))
    }

    /// Mirror form `right rel' left`.
    pub fn mirrored(&self) -> Atom {
        Atom::new(self.right.clone(), self.rel.mirror(), self.left.clone())
    }

    pub fn is_ground(&self) -> bool {
        self.left.is_ground() && self.right.is_ground()
    }

    /// Truth value of a variable-free atom.
    pub fn ground_truth(&self) -> Option<Result<bool, EvalError>> {
        self.is_ground().then(|| self.holds(&|_| None))
    }

    /// If the atom is `x ⋈ c` or `c ⋈ x` with `c` variable-free, returns
    /// `(x, ⋈, c)` oriented with the variable on the left.
    pub fn as_unary_bound(&self) -> Option<(Var, Rel, Result<i64, EvalError>)> {
        match (&self.left, &self.right) {
            (Expr::Var(x), r) if r.is_ground() => Some((x.clone(), self.rel, r.eval(&|_| None))),
            (l, Expr::Var(x)) if l.is_ground() => {
                Some((x.clone(), self.rel.mirror(), l.eval(&|_| None)))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.rel.symbol(), self.right)
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Target of an annotated formula: a 1-based component index (direct
/// product) or a component name (shared product).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Index(usize),
    Name(String),
}

impl From<usize> for Label {
    fn from(i: usize) -> Self {
        Label::Index(i)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Name(s.to_string())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Index(i) => write!(f, "{i}"),
            Label::Name(n) => f.write_str(n),
        }
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Atom(Atom),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Imply(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    Annotated(Box<Formula>, Label),
}

impl Formula {
    pub fn atom(left: Expr, rel: Rel, right: Expr) -> Formula {
        Formula::Atom(Atom::new(left, rel, right))
    }

    pub fn and(self, rhs: Formula) -> Formula {
        Formula::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Formula) -> Formula {
        Formula::Or(Box::new(self), Box::new(rhs))
    }

    pub fn implies(self, rhs: Formula) -> Formula {
        Formula::Imply(Box::new(self), Box::new(rhs))
    }

    pub fn negated(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    /// Annotates the formula with a component target.
    pub fn at(self, label: impl Into<Label>) -> Formula {
        Formula::Annotated(Box::new(self), label.into())
    }

    /// Left-nested conjunction; `None` for an empty iterator.
    pub fn all(items: impl IntoIterator<Item = Formula>) -> Option<Formula> {
        items.into_iter().reduce(Formula::and)
    }

    /// Left-nested disjunction; `None` for an empty iterator.
    pub fn any(items: impl IntoIterator<Item = Formula>) -> Option<Formula> {
        items.into_iter().reduce(Formula::or)
    }

    pub fn as_atom(&self) -> Option<&Atom> {
        match self {
            Formula::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// The formula with every annotation removed.
    pub fn strip_annotations(&self) -> Formula {
        match self {
            Formula::Atom(_) => self.clone(),
            Formula::And(l, r) => l.strip_annotations().and(r.strip_annotations()),
            Formula::Or(l, r) => l.strip_annotations().or(r.strip_annotations()),
            Formula::Imply(l, r) => l.strip_annotations().implies(r.strip_annotations()),
            Formula::Not(f) => f.strip_annotations().negated(),
            Formula::Annotated(f, _) => f.strip_annotations(),
        }
    }

    /// Conjuncts of a (possibly nested) conjunction, in order.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::And(l, r) => {
                    go(l, out);
                    go(r, out);
                }
                _ => out.push(f),
            }
        }
        go(self, &mut out);
        out
    }

    /// Disjuncts of a (possibly nested) disjunction, in order.
    pub fn disjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::Or(l, r) => {
                    go(l, out);
                    go(r, out);
                }
                _ => out.push(f),
            }
        }
        go(self, &mut out);
        out
    }

    /// Visits every atom, ignoring connectives and annotations.
    pub fn for_each_atom(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Imply(l, r) => {
                l.for_each_atom(f);
                r.for_each_atom(f);
            }
            Formula::Not(g) | Formula::Annotated(g, _) => g.for_each_atom(f),
        }
    }

    pub fn holds(&self, env: &dyn Fn(&Var) -> Option<i64>) -> Result<bool, EvalError> {
        Ok(match self {
            Formula::Atom(a) => a.holds(env)?,
            Formula::And(l, r) => l.holds(env)? && r.holds(env)?,
            Formula::Or(l, r) => l.holds(env)? || r.holds(env)?,
            Formula::Imply(l, r) => !l.holds(env)? || r.holds(env)?,
            Formula::Not(g) => !g.holds(env)?,
            Formula::Annotated(g, _) => g.holds(env)?,
        })
    }

    fn map_atoms(&self, f: &impl Fn(&Atom) -> Atom) -> Formula {
        match self {
            Formula::Atom(a) => Formula::Atom(f(a)),
            Formula::And(l, r) => l.map_atoms(f).and(r.map_atoms(f)),
            Formula::Or(l, r) => l.map_atoms(f).or(r.map_atoms(f)),
            Formula::Imply(l, r) => l.map_atoms(f).implies(r.map_atoms(f)),
            Formula::Not(g) => g.map_atoms(f).negated(),
            Formula::Annotated(g, t) => Formula::Annotated(Box::new(g.map_atoms(f)), t.clone()),
        }
    }
}

impl From<Atom> for Formula {
    fn from(a: Atom) -> Self {
        Formula::Atom(a)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::And(l, r) => write!(f, "({l} /\\ {r})"),
            Formula::Or(l, r) => write!(f, "({l} \\/ {r})"),
            Formula::Imply(l, r) => write!(f, "({l} => {r})"),
            Formula::Not(g) => write!(f, "~({g})"),
            Formula::Annotated(g, t) => write!(f, "({g}):{t}"),
        }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// The set of variables occurring in `phi`, annotations ignored.
pub fn vars(phi: &Formula) -> VarSet {
    let mut out = VarSet::new();
    phi.for_each_atom(&mut |a| {
        a.left.collect_vars(&mut out);
        a.right.collect_vars(&mut out);
    });
    out
}

/// Replaces every bound variable by its value. This is the exhaustive
/// application of the instantiation rewriting, so the result mentions no
/// variable of `bindings`.
pub fn substitute_fixed(phi: &Formula, bindings: &BTreeMap<Var, i64>) -> Formula {
    if bindings.is_empty() {
        return phi.clone();
    }
    phi.map_atoms(&|a| {
        Atom::new(a.left.substitute(bindings), a.rel, a.right.substitute(bindings))
    })
}

/// Complementary integer relation on the same two sides.
pub fn negate_atom(a: &Atom) -> Atom {
    Atom::new(a.left.clone(), a.rel.complement(), a.right.clone())
}

/// Rewrites the atom as `x ⋈ e` with `x` not occurring in `e`. Requires `x`
/// to occur exactly once, additively, and `⋈` to be an inequality.
pub fn isolate(atom: &Atom, x: &Var) -> Option<(Rel, Expr)> {
    if matches!(atom.rel, Rel::Eq | Rel::Neq) {
        return None;
    }
    let (in_left, in_right) = (atom.left.occurrences(x), atom.right.occurrences(x));
    if in_left + in_right != 1 {
        return None;
    }
    let minus = |a: Expr, b: Option<Expr>| match b {
        Some(b) => a - b,
        None => a,
    };
    let rest_or_zero = |r: Option<Expr>| r.unwrap_or(Expr::Const(0));
    if in_left == 1 {
        // s*x + rest ⋈ right
        let (s, rest) = atom.left.split_term(x)?;
        if s == 1 {
            Some((atom.rel, minus(atom.right.clone(), rest)))
        } else {
            // -x ⋈ right - rest  <=>  x ⋈' rest - right
            Some((atom.rel.mirror(), rest_or_zero(rest) - atom.right.clone()))
        }
    } else {
        // left ⋈ s*x + rest
        let (s, rest) = atom.right.split_term(x)?;
        if s == 1 {
            Some((atom.rel.mirror(), minus(atom.left.clone(), rest)))
        } else {
            Some((atom.rel, rest_or_zero(rest) - atom.left.clone()))
        }
    }
}

/// All single-variable relaxations of an atomic formula, in order of first
/// occurrence of the isolated variable. `x ≤ e` becomes `lb(x) ≤ e` and
/// `x ≥ e` becomes `ub(x) ≥ e` (strict forms likewise). Each result keeps
/// every solution of `phi` that respects the given bounds.
pub fn relax_candidates(
    phi: &Formula,
    lb: &BTreeMap<Var, ExtendedInt>,
    ub: &BTreeMap<Var, ExtendedInt>,
) -> Vec<(Var, Formula)> {
    let Some(atom) = phi.as_atom() else {
        return Vec::new();
    };
    let mut order = Vec::new();
    atom.left.vars_in_order(&mut order);
    atom.right.vars_in_order(&mut order);
    order
        .into_iter()
        .filter_map(|x| {
            let (rel, e) = isolate(atom, &x)?;
            let bound = match rel {
                Rel::Le | Rel::Lt => lb.get(&x).copied(),
                Rel::Ge | Rel::Gt => ub.get(&x).copied(),
                Rel::Eq | Rel::Neq => None,
            }?;
            let ExtendedInt::Finite(b) = bound else {
                return None;
            };
            Some((x, Formula::atom(Expr::Const(b), rel, e)))
        })
        .collect()
}

/// The first relaxation of [`relax_candidates`], if any.
pub fn relax(
    phi: &Formula,
    lb: &BTreeMap<Var, ExtendedInt>,
    ub: &BTreeMap<Var, ExtendedInt>,
) -> Option<Formula> {
    relax_candidates(phi, lb, ub).into_iter().next().map(|(_, f)| f)
}

/// `c0 + Σ coeff·var` with integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearForm {
    pub coeffs: BTreeMap<Var, i64>,
    pub constant: i64,
}

impl LinearForm {
    fn constant(c: i64) -> Self {
        LinearForm { coeffs: BTreeMap::new(), constant: c }
    }

    fn scale(mut self, k: i64) -> Option<Self> {
        self.constant = self.constant.checked_mul(k)?;
        for c in self.coeffs.values_mut() {
            *c = c.checked_mul(k)?;
        }
        self.coeffs.retain(|_, c| *c != 0);
        Some(self)
    }

    fn add(mut self, other: LinearForm, sign: i64) -> Option<Self> {
        self.constant = self.constant.checked_add(other.constant.checked_mul(sign)?)?;
        for (v, c) in other.coeffs {
            let e = self.coeffs.entry(v).or_insert(0);
            *e = e.checked_add(c.checked_mul(sign)?)?;
        }
        self.coeffs.retain(|_, c| *c != 0);
        Some(self)
    }

    /// Linear form of `e`, or `None` when `e` is not linear (or overflows).
    pub fn of(e: &Expr) -> Option<LinearForm> {
        match e {
            Expr::Const(c) => Some(LinearForm::constant(*c)),
            Expr::Var(v) => Some(LinearForm { coeffs: BTreeMap::from([(v.clone(), 1)]), constant: 0 }),
            Expr::Neg(e) => LinearForm::of(e)?.scale(-1),
            Expr::Bin(BinOp::Add, l, r) => LinearForm::of(l)?.add(LinearForm::of(r)?, 1),
            Expr::Bin(BinOp::Sub, l, r) => LinearForm::of(l)?.add(LinearForm::of(r)?, -1),
            Expr::Bin(BinOp::Mul, l, r) => {
                let (l, r) = (LinearForm::of(l)?, LinearForm::of(r)?);
                if l.coeffs.is_empty() {
                    r.scale(l.constant)
                } else if r.coeffs.is_empty() {
                    l.scale(r.constant)
                } else {
                    None
                }
            }
        }
    }

    /// `left - right` of an atom.
    pub fn of_atom(a: &Atom) -> Option<LinearForm> {
        LinearForm::of(&a.left)?.add(LinearForm::of(&a.right)?, -1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_of(pairs: &[(&str, i64)]) -> impl Fn(&Var) -> Option<i64> {
        let owned: Vec<(String, i64)> = pairs.iter().map(|(n, c)| (n.to_string(), *c)).collect();
        move |v: &Var| owned.iter().find(|(n, _)| n == v.name()).map(|(_, c)| *c)
    }

    fn names(s: &VarSet) -> Vec<&str> {
        s.iter().map(Var::name).collect()
    }

    #[test]
    fn vars_of_formulas() {
        let c = (var("x") + var("y") + var("z")).le(5);
        assert_eq!(names(&vars(&c)), ["x", "y", "z"]);
        assert!(vars(&cst(3).le(4)).is_empty());
        let c4 = var("x").eq_to(0).or(var("x").eq_to(1)).and((var("x") * var("y")).le(5));
        assert_eq!(names(&vars(&c4)), ["x", "y"]);
        assert_eq!(names(&vars(&var("x").le(3).at("box"))), ["x"]);
    }

    #[test]
    fn substitution_examples() {
        let c = (var("x") + var("y") + var("z")).le(5);
        let one = substitute_fixed(&c, &BTreeMap::from([(Var::new("x"), 2)]));
        assert_eq!(one, (cst(2) + var("y") + var("z")).le(5));
        let all = substitute_fixed(
            &c,
            &BTreeMap::from([(Var::new("x"), 2), (Var::new("y"), 1), (Var::new("z"), 0)]),
        );
        assert_eq!(all, (cst(2) + cst(1) + cst(0)).le(5));
        let d = (var("y") - var("z")).le(3);
        assert_eq!(substitute_fixed(&d, &BTreeMap::from([(Var::new("x"), 2)])), d);
    }

    #[test]
    fn relax_examples() {
        let c = (var("x") + var("y") + var("z")).le(5);
        let lb = BTreeMap::from([(Var::new("x"), ExtendedInt::Finite(0))]);
        let r = relax(&c, &lb, &BTreeMap::new()).unwrap();
        // 0 <= 5 - (y + z), i.e. y + z <= 5 - 0
        assert_eq!(r, cst(0).le(cst(5) - (var("y") + var("z"))));
        let lf = LinearForm::of_atom(r.as_atom().unwrap()).unwrap();
        assert_eq!(lf.constant, -5);
        assert_eq!(lf.coeffs.values().copied().collect::<Vec<_>>(), [1, 1]);

        let c = var("x").ge(var("y") + 1);
        let ub = BTreeMap::from([(Var::new("x"), ExtendedInt::Finite(7))]);
        assert_eq!(relax(&c, &BTreeMap::new(), &ub), Some(cst(7).ge(var("y") + 1)));

        let c = var("x").le(var("x") + 1);
        let lb = BTreeMap::from([(Var::new("x"), ExtendedInt::Finite(0))]);
        assert_eq!(relax(&c, &lb, &lb), None);
    }

    #[test]
    fn relax_needs_finite_bound() {
        let c = (var("x") + var("y")).le(5);
        let lb = BTreeMap::from([(Var::new("x"), ExtendedInt::NegInf)]);
        assert!(relax_candidates(&c, &lb, &BTreeMap::new()).is_empty());
    }

    #[test]
    fn isolate_handles_signs_and_sides() {
        // 3 - x >= y  <=>  x <= 3 - y
        let a = Atom::new(cst(3) - var("x"), Rel::Ge, var("y"));
        let (rel, e) = isolate(&a, &Var::new("x")).unwrap();
        for x in -4..4 {
            for y in -4..4 {
                let env = env_of(&[("x", x), ("y", y)]);
                let isolated = rel.holds(x, e.eval(&env).unwrap());
                assert_eq!(a.holds(&env).unwrap(), isolated, "x={x} y={y}");
            }
        }
        // y < 2 - (z - x)  puts x on the right with positive sign
        let a = Atom::new(var("y"), Rel::Lt, cst(2) - (var("z") - var("x")));
        let (rel, e) = isolate(&a, &Var::new("x")).unwrap();
        for x in -3..3 {
            for y in -3..3 {
                for z in -3..3 {
                    let env = env_of(&[("x", x), ("y", y), ("z", z)]);
                    assert_eq!(a.holds(&env).unwrap(), rel.holds(x, e.eval(&env).unwrap()));
                }
            }
        }
        assert!(isolate(&Atom::new(var("x") * var("y"), Rel::Le, cst(1)), &Var::new("x")).is_none());
    }

    #[test]
    fn negation_examples() {
        let a = Atom::new(var("x"), Rel::Le, cst(4));
        assert_eq!(negate_atom(&a).rel, Rel::Gt);
        assert_eq!(negate_atom(&Atom::new(var("x"), Rel::Eq, cst(3))).rel, Rel::Neq);
        assert_eq!(negate_atom(&Atom::new(var("x"), Rel::Gt, var("y"))).rel, Rel::Le);
    }

    #[test]
    fn linear_forms() {
        let lf = LinearForm::of(&(cst(2) * (var("x") - var("y")) + var("y"))).unwrap();
        assert_eq!(lf.coeffs, BTreeMap::from([(Var::new("x"), 2), (Var::new("y"), -1)]));
        assert!(LinearForm::of(&(var("x") * var("y"))).is_none());
        let lf = LinearForm::of(&(var("x") - var("x"))).unwrap();
        assert!(lf.coeffs.is_empty());
    }

    #[test]
    fn evaluation_overflow_is_reported() {
        let e = cst(i64::MAX) + cst(1);
        assert!(matches!(e.eval(&|_| None), Err(EvalError::Overflow(_))));
    }
}
