//! Propagate-and-search: depth-first solving, the `dms` branching strategy
//! and branch-and-bound minimization.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use web_time::Instant;

use crate::boxdom::{bound_branches, pick_split};
use crate::element::Element;
use crate::formula::Var;
use crate::lattice::{AbstractDomain, Branch, DomainError, ExtendedInt, Interval, Kleene};

/// Variable phases for first-fail branching. An empty strategy leaves
/// branching to the element's own `split`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Strategy {
    phases: Vec<Vec<Var>>,
}

impl Strategy {
    pub fn none() -> Self {
        Self::default()
    }

    /// Smallest width first within the first phase that still has an
    /// unfixed variable; lower bound first.
    pub fn dms(phases: Vec<Vec<Var>>) -> Self {
        Strategy { phases }
    }

    pub fn phases(&self) -> &[Vec<Var>] {
        &self.phases
    }

    /// Whether every strategy variable is fixed in `e`.
    pub fn all_fixed(&self, e: &Element) -> bool {
        self.phases.iter().flatten().all(|v| e.project(v).is_singleton())
    }

    /// The branches for `e`; the element's own split when every strategy
    /// variable is fixed.
    pub fn branch(&self, e: &Element) -> Result<Vec<Branch>, DomainError> {
        for phase in &self.phases {
            let hulls: Vec<(&Var, Interval)> = phase.iter().map(|v| (v, e.project(v))).collect();
            if let Some((x, itv)) = pick_split(hulls.into_iter()) {
                return bound_branches(x, itv);
            }
        }
        e.split()
    }
}

/// Resource limits of one search. `None` means unlimited.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Budget {
    pub time: Option<Duration>,
    pub nodes: Option<u64>,
}

impl Budget {
    pub fn time(limit: Duration) -> Self {
        Budget { time: Some(limit), nodes: None }
    }

    pub fn nodes(limit: u64) -> Self {
        Budget { time: None, nodes: Some(limit) }
    }

    pub fn unlimited() -> Self {
        Self::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Sat,
    Unsat,
    Timeout,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "Optimal",
            Status::Sat => "Sat",
            Status::Unsat => "Unsat",
            Status::Timeout => "Timeout",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes: u64,
    pub solutions: u64,
    pub best_objective: Option<i64>,
    /// Node count when the best objective was found.
    pub nodes_to_best: u64,
    pub time_to_best: Duration,
    pub total_time: Duration,
    pub status: Status,
    /// Objective of every recorded solution, in order.
    pub history: Vec<i64>,
    /// Nodes left undecided because neither the strategy nor the element
    /// could split them.
    pub undecided: u64,
}

impl SearchStats {
    fn new() -> Self {
        SearchStats {
            nodes: 0,
            solutions: 0,
            best_objective: None,
            nodes_to_best: 0,
            time_to_best: Duration::ZERO,
            total_time: Duration::ZERO,
            status: Status::Unsat,
            history: Vec::new(),
            undecided: 0,
        }
    }
}

/// Result of [`minimize`]: statistics and the best assignment found.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub stats: SearchStats,
    pub best: Option<BTreeMap<Var, i64>>,
}

struct Dfs<'a> {
    strategy: &'a Strategy,
    budget: Budget,
    start: Instant,
    stats: SearchStats,
}

impl Dfs<'_> {
    fn out_of_budget(&self) -> bool {
        self.budget.time.is_some_and(|t| self.start.elapsed() >= t)
            || self.budget.nodes.is_some_and(|n| self.stats.nodes >= n)
    }

    /// Runs the tree, calling `before` on entry to every node and `found`
    /// on every solution node. Returns whether the tree was exhausted.
    fn run(
        &mut self,
        root: Element,
        mut before: impl FnMut(&mut Element),
        mut found: impl FnMut(&Element, &mut SearchStats),
    ) -> Result<bool, DomainError> {
        let mut stack = vec![root];
        while let Some(mut node) = stack.pop() {
            if self.out_of_budget() {
                return Ok(false);
            }
            self.stats.nodes += 1;
            before(&mut node);
            node.closure();
            let state = node.state();
            if state == Kleene::False {
                continue;
            }
            if state == Kleene::True && self.strategy.all_fixed(&node) {
                self.stats.solutions += 1;
                found(&node, &mut self.stats);
                continue;
            }
            let branches = self.strategy.branch(&node)?;
            if branches.is_empty() {
                self.stats.undecided += 1;
                continue;
            }
            for b in branches[1..].iter().rev() {
                let mut child = node.clone();
                child.refine(b)?;
                stack.push(child);
            }
            node.refine(&branches[0])?;
            stack.push(node);
        }
        Ok(true)
    }
}

/// Depth-first enumeration of the solution elements of `root`.
pub fn solve(
    root: Element,
    strategy: &Strategy,
    budget: Budget,
) -> Result<(Vec<Element>, SearchStats), DomainError> {
    let mut dfs = Dfs { strategy, budget, start: Instant::now(), stats: SearchStats::new() };
    let mut out = Vec::new();
    let complete = dfs.run(root, |_| {}, |e, _| out.push(e.clone()))?;
    let mut stats = dfs.stats;
    stats.total_time = dfs.start.elapsed();
    stats.status = match (complete, stats.solutions) {
        (false, _) => Status::Timeout,
        (true, 0) => Status::Unsat,
        (true, _) => Status::Sat,
    };
    Ok((out, stats))
}

/// Branch and bound on `objective`. Values are read from lower bounds, so
/// the strategy should fix every variable of interest.
pub fn minimize(
    root: Element,
    objective: &Var,
    strategy: &Strategy,
    budget: Budget,
) -> Result<Outcome, DomainError> {
    let start = Instant::now();
    let mut dfs = Dfs { strategy, budget, start, stats: SearchStats::new() };
    let mut best: Option<(i64, BTreeMap<Var, i64>)> = None;
    let bound_cell = std::cell::Cell::new(None::<i64>);
    let complete = dfs.run(
        root,
        |node| {
            if let Some(b) = bound_cell.get() {
                node.embed(objective, Interval::at_most(b - 1));
            }
        },
        |node, stats| {
            let ExtendedInt::Finite(v) = node.project(objective).lo() else { return };
            if best.as_ref().is_some_and(|(b, _)| *b <= v) {
                return;
            }
            let point = node
                .vars()
                .into_iter()
                .filter_map(|x| node.project(&x).lo().finite().map(|c| (x, c)))
                .collect();
            best = Some((v, point));
            bound_cell.set(Some(v));
            stats.best_objective = Some(v);
            stats.nodes_to_best = stats.nodes;
            stats.time_to_best = start.elapsed();
            stats.history.push(v);
        },
    )?;
    let mut stats = dfs.stats;
    stats.total_time = start.elapsed();
    stats.status = match (complete, &best) {
        (true, Some(_)) => Status::Optimal,
        (true, None) => Status::Unsat,
        (false, _) => Status::Timeout,
    };
    Ok(Outcome { stats, best: best.map(|(_, p)| p) })
}

/// The points of the hull of `vars` that `e` contains, in lexicographic
/// order; `None` if the hull is unbounded or larger than `cap` points.
pub fn concretize(e: &Element, vars: &[Var], cap: u128) -> Option<Vec<Vec<i64>>> {
    let hulls: Vec<Interval> = vars.iter().map(|v| e.project(v)).collect();
    let mut size: u128 = 1;
    for h in &hulls {
        if h.is_empty() {
            return Some(Vec::new());
        }
        size = size.checked_mul(h.width()?)?;
        if size > cap {
            return None;
        }
    }
    let mut out = Vec::new();
    let mut point: Vec<i64> = hulls.iter().map(|h| h.lo().finite().unwrap_or(0)).collect();
    loop {
        let env = |x: &Var| vars.iter().position(|v| v == x).map(|i| point[i]);
        if e.contains(&env) {
            out.push(point.clone());
        }
        let mut i = vars.len();
        loop {
            if i == 0 {
                return Some(out);
            }
            i -= 1;
            let hi = hulls[i].hi().finite().unwrap_or(0);
            if point[i] < hi {
                point[i] += 1;
                break;
            }
            point[i] = hulls[i].lo().finite().unwrap_or(0);
        }
    }
}
