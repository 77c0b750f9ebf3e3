//! Extended-integer intervals, Kleene logic and the abstract domain contract.

mod domain;
mod interval;
mod kleene;

pub use domain::{AbstractDomain, Branch, CloneMap, DomainError, Handle};
pub use interval::{
    interval_arith, interval_inv_narrow, interval_join, ArithError, ExtendedInt, Interval, Side,
};
pub use kleene::{kleene_and, kleene_or, Kleene};
