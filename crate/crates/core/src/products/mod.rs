//! Product transformers: direct, delayed and shared.

mod delayed;
mod direct;
mod shared;

pub use delayed::{DelayedProduct, TransferStatus};
pub use direct::DirectProduct;
pub use shared::{Decl, Dep, SharedProduct, SharingMode};
