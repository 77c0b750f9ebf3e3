use std::collections::BTreeMap;

use thiserror::Error;

use super::instance::FjsInstance;
use super::model::{duration, machine, makespan, start};
use crate::formula::Var;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("enumeration exceeded {cap} nodes")]
    SizeGuard { cap: u64 },
    #[error("no schedule ends by {0}")]
    NoScheduleWithin(i64),
}

/// Node cap of [`fjssp_oracle`].
pub const ORACLE_NODE_CAP: u64 = 20_000_000;

struct Enum<'a> {
    inst: &'a FjsInstance,
    next: Vec<usize>,
    job_ready: Vec<i64>,
    machine_free: Vec<i64>,
    best: i64,
    nodes: u64,
    cap: u64,
}

impl Enum<'_> {
    fn go(&mut self, current: i64, left: usize) -> Result<(), OracleError> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(OracleError::SizeGuard { cap: self.cap });
        }
        if left == 0 {
            self.best = self.best.min(current);
            return Ok(());
        }
        for j in 0..self.inst.jobs.len() {
            let t = self.next[j];
            if t == self.inst.jobs[j].len() {
                continue;
            }
            for alt in &self.inst.jobs[j][t].alternatives {
                let m = alt.machine - 1;
                let begin = self.job_ready[j].max(self.machine_free[m]);
                let end = begin + alt.duration;
                if end.max(current) >= self.best {
                    continue;
                }
                let (old_ready, old_free) = (self.job_ready[j], self.machine_free[m]);
                self.next[j] += 1;
                self.job_ready[j] = end;
                self.machine_free[m] = end;
                let r = self.go(current.max(end), left - 1);
                self.next[j] -= 1;
                self.job_ready[j] = old_ready;
                self.machine_free[m] = old_free;
                r?;
            }
        }
        Ok(())
    }
}

/// Optimal makespan by enumerating dispatch orders: each step appends the
/// next task of some job to the end of one of its machines, as early as
/// possible. Every semi-active schedule arises this way.
pub fn fjssp_oracle(inst: &FjsInstance, h: i64) -> Result<i64, OracleError> {
    fjssp_oracle_capped(inst, h, ORACLE_NODE_CAP)
}

pub fn fjssp_oracle_capped(inst: &FjsInstance, h: i64, cap: u64) -> Result<i64, OracleError> {
    let mut e = Enum {
        inst,
        next: vec![0; inst.jobs.len()],
        job_ready: vec![0; inst.jobs.len()],
        machine_free: vec![0; inst.n_machines],
        best: h.saturating_add(1),
        nodes: 0,
        cap,
    };
    e.go(0, inst.n_tasks())?;
    if e.best > h {
        return Err(OracleError::NoScheduleWithin(h));
    }
    Ok(e.best)
}

/// Checks an assignment of the model variables against the instance and
/// returns the makespan it realizes.
pub fn verify_schedule(inst: &FjsInstance, sol: &BTreeMap<Var, i64>) -> Result<i64, String> {
    let get = |v: &Var| sol.get(v).copied().ok_or_else(|| format!("`{v}` is unassigned"));
    let mut end = 0;
    let mut runs: Vec<(usize, i64, i64, (usize, usize))> = Vec::new();
    for (j, t) in inst.task_ids() {
        let (s, d, m) = (get(&start(j, t))?, get(&duration(j, t))?, get(&machine(j, t))?);
        if s < 0 {
            return Err(format!("task ({}, {}) starts at {s}", j + 1, t + 1));
        }
        let m = usize::try_from(m).map_err(|_| format!("machine {m} of task ({}, {})", j + 1, t + 1))?;
        match inst.task(j, t).duration_on(m) {
            Some(expected) if expected == d => {}
            _ => return Err(format!("task ({}, {}) cannot run {d} on machine {m}", j + 1, t + 1)),
        }
        if t > 0 {
            let prev_end = get(&start(j, t - 1))? + get(&duration(j, t - 1))?;
            if prev_end > s {
                return Err(format!("task ({}, {}) starts before its predecessor ends", j + 1, t + 1));
            }
        }
        end = end.max(s + d);
        runs.push((m, s, s + d, (j, t)));
    }
    runs.sort();
    for w in runs.windows(2) {
        let ((m1, _, e1, a), (m2, s2, _, b)) = (w[0], w[1]);
        if m1 == m2 && s2 < e1 {
            return Err(format!(
                "tasks ({}, {}) and ({}, {}) overlap on machine {m1}",
                a.0 + 1,
                a.1 + 1,
                b.0 + 1,
                b.1 + 1
            ));
        }
    }
    if let Some(ms) = sol.get(&makespan()) {
        if *ms < end {
            return Err(format!("makespan {ms} is below the last completion {end}"));
        }
    }
    Ok(end)
}
