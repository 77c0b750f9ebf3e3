//! Flexible job shop scheduling: `.fjs` instances, the FJS1, FJS2 and
//! box-ipc models, and a brute-force oracle.

mod instance;
mod model;
mod oracle;

pub use instance::{horizon, parse_fjs, random_instance, Alternative, FjsInstance, ParseError, Task};
pub use model::{
    build, build_box_ipc, build_box_ipc_with, build_fjs1, build_fjs1_with, build_fjs2,
    build_fjs2_with, duration, machine, makespan, start, target, FjsModel, ModelKind,
};
pub use oracle::{fjssp_oracle, fjssp_oracle_capped, verify_schedule, OracleError, ORACLE_NODE_CAP};

use std::time::Duration;

use crate::lattice::DomainError;
use crate::products::SharingMode;
use crate::search::{minimize, Budget, Outcome};

/// Builds the model of `kind` and minimizes its makespan.
pub fn solve_instance(
    inst: &FjsInstance,
    kind: ModelKind,
    horizon_override: Option<i64>,
    budget: Budget,
) -> Result<Outcome, DomainError> {
    let model = build(inst, kind, horizon_override);
    let root = model.element(SharingMode::Alias)?;
    minimize(root, &model.objective(), &model.strategy(), budget)
}

/// Shorthand for a time budget in seconds.
pub fn seconds(s: u64) -> Budget {
    Budget::time(Duration::from_secs(s))
}
