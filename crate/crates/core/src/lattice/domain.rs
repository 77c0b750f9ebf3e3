use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

use super::{Interval, Kleene};
use crate::element::Element;
use crate::formula::{Formula, Var, VarSet};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("formula not supported by {domain}: {formula}")]
    NotSupported { domain: &'static str, formula: String },
    #[error("several components can interpret {0}; annotate it")]
    AmbiguousTarget(String),
    #[error("variable `{0}` must be declared in the underlying domain first")]
    UnregisteredVariable(Var),
    #[error("no component named `{0}`")]
    UnknownComponentName(String),
    #[error("no component at index {0}")]
    UnknownComponentIndex(usize),
    #[error("formula must name its target component: {0}")]
    MissingAnnotation(String),
    #[error("declaration `{decl}` depends on undeclared `{dep}`")]
    UnknownDependency { decl: String, dep: String },
    #[error("declaration `{decl}` uses `{dep}` before it is declared")]
    ForwardReference { decl: String, dep: String },
    #[error("declaration `{decl}`: {detail}")]
    ArityMismatch { decl: String, detail: String },
    #[error("duplicate declaration `{0}`")]
    DuplicateName(String),
    #[error("cannot split on `{0}`: its lower bound is not finite")]
    InfiniteLowerBound(Var),
    #[error("branch does not apply to this element")]
    InvalidBranch,
}

impl DomainError {
    pub fn not_supported(domain: &'static str, phi: &Formula) -> Self {
        DomainError::NotSupported { domain, formula: phi.to_string() }
    }
}

/// One alternative produced by `split`. A branch is applied to a copy of the
/// element that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Branch {
    /// Restrict a variable in every store that holds it.
    Bound(Var, Interval),
    /// Commit to one disjunct of a clause of a logic completion.
    Disjunct { clause: usize, disjunct: usize },
    /// Forward to the underlying element of a transformer.
    Base(Box<Branch>),
    /// Forward to the n-th component of a product.
    Component(usize, Box<Branch>),
}

/// A component shared between several owners.
pub type Handle = Rc<RefCell<Element>>;

/// Tracks already copied handles during a deep copy so that aliasing inside
/// the copied group is preserved and nothing is shared with the original.
#[derive(Default)]
pub struct CloneMap {
    copies: HashMap<*const RefCell<Element>, Handle>,
}

impl CloneMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fork_handle(&mut self, h: &Handle) -> Handle {
        let key = Rc::as_ptr(h);
        if let Some(copy) = self.copies.get(&key) {
            return copy.clone();
        }
        let inner = h.borrow().fork(self);
        let copy = Rc::new(RefCell::new(inner));
        self.copies.insert(key, copy.clone());
        copy
    }

    /// The copy of `h` made so far, if any.
    pub fn get(&self, h: &Handle) -> Option<Handle> {
        self.copies.get(&Rc::as_ptr(h)).cloned()
    }
}

/// Operations every abstract domain provides. Order and join follow the
/// constraint-programming convention: moving up the lattice adds information,
/// so the join of two elements is the conjunction of what they say.
pub trait AbstractDomain {
    /// Whether `interpret` would accept `phi` (without side effects).
    fn supports(&self, phi: &Formula) -> bool;

    /// Joins the interpretation of `phi`. Failure to interpret is an error,
    /// distinct from the formula being inconsistent with the element.
    fn interpret(&mut self, phi: &Formula) -> Result<(), DomainError>;

    /// Extensive inference: removes inconsistent values only.
    fn closure(&mut self);

    fn state(&self) -> Kleene;

    /// An over-approximation of the values of `x`.
    fn project(&self, x: &Var) -> Interval;

    fn vars(&self) -> VarSet;

    fn has_var(&self, x: &Var) -> bool {
        self.vars().contains(x)
    }

    /// Joins `x ∈ bound` if the element knows `x`; otherwise does nothing.
    fn embed(&mut self, x: &Var, bound: Interval);

    /// A finite decomposition; empty when the element cannot be split.
    fn split(&self) -> Result<Vec<Branch>, DomainError>;

    /// Applies one alternative produced by `split`.
    fn refine(&mut self, branch: &Branch) -> Result<(), DomainError>;

    /// Membership of a full assignment in the concretization.
    fn contains(&self, point: &dyn Fn(&Var) -> Option<i64>) -> bool;

    /// A counter that grows whenever the element gains information.
    fn stamp(&self) -> u64;
}
