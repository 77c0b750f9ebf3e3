//! Constraint solving with composable abstract domains.
//!
//! Domains (boxes, octagons) and transformers (interval propagators, logic
//! completion, direct, delayed and shared products) all implement
//! [`AbstractDomain`] and can be stacked through [`Element`]. The [`search`]
//! module solves and minimizes over any element, and [`fjssp`] builds
//! flexible job shop models on top.

pub mod boxdom;
pub mod check;
pub mod fjssp;
pub mod element;
pub mod formula;
pub mod ipc;
pub mod lattice;
pub mod logic;
pub mod octagon;
pub mod oracle;
pub mod products;
pub mod search;

pub use element::{DomainKind, Element};
pub use lattice::{AbstractDomain, DomainError, Interval, Kleene};
