//! Browser demo: a Gantt chart of solved `.fjs` instances, an octagon
//! explorer and a propagation explorer. Every export takes text and returns
//! JSON; failures come back as `{"error": "..."}`.

mod parse;

use std::collections::BTreeMap;
use std::time::Duration;

use domcoop::element::Element;
use domcoop::fjssp::{duration, machine, parse_fjs, solve_instance, start, ModelKind};
use domcoop::formula::{vars, Formula, Var};
use domcoop::lattice::{AbstractDomain, Interval};
use domcoop::logic::eval_with;
use domcoop::octagon::Octagon;
use domcoop::search::Budget;
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

pub use parse::{parse_line, parse_lines, Line};

#[derive(Serialize, Debug)]
struct ErrorOut {
    error: String,
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v),
        Err(error) => serde_json::to_string(&ErrorOut { error }),
    }
    .expect("output serializes")
}

#[derive(Serialize, Debug)]
pub struct Bar {
    pub job: usize,
    pub task: usize,
    pub machine: i64,
    pub start: i64,
    pub duration: i64,
}

#[derive(Serialize, Debug)]
pub struct Schedule {
    pub status: String,
    pub makespan: Option<i64>,
    pub nodes: u64,
    pub time_ms: u64,
    pub n_machines: usize,
    pub bars: Vec<Bar>,
}

pub fn schedule(text: &str, domain: &str, node_limit: u64, time_limit_ms: u64) -> Result<Schedule, String> {
    let inst = parse_fjs(text).map_err(|e| e.to_string())?;
    let kind: ModelKind = domain.parse()?;
    let budget = Budget { time: Some(Duration::from_millis(time_limit_ms)), nodes: Some(node_limit) };
    let out = solve_instance(&inst, kind, None, budget).map_err(|e| e.to_string())?;
    let mut bars = Vec::new();
    if let Some(best) = &out.best {
        for (j, t) in inst.task_ids() {
            let get = |v: Var| best.get(&v).copied().unwrap_or(0);
            bars.push(Bar {
                job: j + 1,
                task: t + 1,
                machine: get(machine(j, t)),
                start: get(start(j, t)),
                duration: get(duration(j, t)),
            });
        }
    }
    Ok(Schedule {
        status: out.stats.status.to_string(),
        makespan: out.stats.best_objective,
        nodes: out.stats.nodes,
        time_ms: out.stats.total_time.as_millis() as u64,
        n_machines: inst.n_machines,
        bars,
    })
}

/// Solves a `.fjs` instance with `domain` (`fjs1`, `fjs2` or `box-ipc`).
#[wasm_bindgen]
pub fn solve_fjs(text: &str, domain: &str, node_limit: u32, time_limit_ms: u32) -> String {
    to_json(schedule(text, domain, node_limit as u64, time_limit_ms as u64))
}

#[derive(Serialize, Debug, PartialEq)]
pub struct Bound {
    pub var: String,
    pub lo: Option<i64>,
    pub hi: Option<i64>,
}

fn bound(e: &impl AbstractDomain, x: &Var) -> Bound {
    let i: Interval = e.project(x);
    if i.is_empty() {
        return Bound { var: x.name().to_string(), lo: Some(1), hi: Some(0) };
    }
    Bound { var: x.name().to_string(), lo: i.lo().finite(), hi: i.hi().finite() }
}

#[derive(Serialize, Debug)]
pub struct OctagonView {
    pub vars: Vec<String>,
    /// Row-major `2n × 2n`, `null` for no bound.
    pub before: Vec<Option<i64>>,
    pub after: Vec<Option<i64>>,
    pub empty: bool,
    pub bounds: Vec<Bound>,
    /// Integer points of the first two variables inside `[-window..window]`.
    pub points: Vec<[i64; 2]>,
    pub window: i64,
}

pub fn octagon_view(text: &str, window: i64) -> Result<OctagonView, String> {
    let mut o = Octagon::new();
    for line in parse_lines(text)? {
        let f = match line {
            Line::Domain(x, lo, hi) => domcoop::formula::var(&x).ge(lo).and(domcoop::formula::var(&x).le(hi)),
            Line::Constraint(f) => f,
        };
        o.interpret(&f).map_err(|e| format!("{f}: {e}"))?;
    }
    let before = o.entries();
    o.closure();
    let vs: Vec<Var> = o.variables().to_vec();
    let mut points = Vec::new();
    if vs.len() == 2 && !o.is_empty() {
        for x in -window..=window {
            for y in -window..=window {
                let p = |v: &Var| Some(if *v == vs[0] { x } else { y });
                if o.contains(&p) {
                    points.push([x, y]);
                }
            }
        }
    }
    Ok(OctagonView {
        vars: vs.iter().map(|v| v.name().to_string()).collect(),
        before,
        after: if o.is_empty() { Vec::new() } else { o.entries() },
        empty: o.is_empty(),
        bounds: vs.iter().map(|v| bound(&o, v)).collect(),
        points,
        window,
    })
}

/// Interprets `±x ± y <= c` lines in an octagon and closes it.
#[wasm_bindgen]
pub fn explore_octagon(text: &str, window: i32) -> String {
    to_json(octagon_view(text, window.clamp(1, 50) as i64))
}

#[derive(Serialize, Debug)]
pub struct Status {
    pub constraint: String,
    pub state: String,
}

#[derive(Serialize, Debug)]
pub struct Propagation {
    pub before: Vec<Bound>,
    pub after: Vec<Bound>,
    pub state: String,
    pub constraints: Vec<Status>,
}

pub fn propagation(text: &str) -> Result<Propagation, String> {
    let mut e = Element::logic(Element::ipc(Element::boxed()));
    let mut order: Vec<Var> = Vec::new();
    let mut constraints: Vec<Formula> = Vec::new();
    let mut domains = BTreeMap::new();
    for line in parse_lines(text)? {
        match line {
            Line::Domain(x, lo, hi) => {
                let v = Var::new(&x);
                if !order.contains(&v) {
                    order.push(v.clone());
                }
                domains.insert(v, (lo, hi));
            }
            Line::Constraint(f) => {
                for v in vars(&f) {
                    if !domains.contains_key(&v) {
                        return Err(format!("`{v}` has no domain; add a line `{v} in lo..hi`"));
                    }
                }
                constraints.push(f);
            }
        }
    }
    for v in &order {
        let (lo, hi) = domains[v];
        let b = domcoop::formula::var(v.name()).ge(lo).and(domcoop::formula::var(v.name()).le(hi));
        e.interpret(&b.at(1).at(1)).map_err(|err| err.to_string())?;
    }
    let before = order.iter().map(|v| bound(&e, v)).collect();
    for c in &constraints {
        e.interpret(c).map_err(|err| format!("{c}: {err}"))?;
    }
    e.closure();
    let hull = |x: &Var| e.project(x);
    Ok(Propagation {
        before,
        after: order.iter().map(|v| bound(&e, v)).collect(),
        state: e.state().to_string(),
        constraints: constraints
            .iter()
            .map(|c| Status { constraint: c.to_string(), state: eval_with(c, &hull).to_string() })
            .collect(),
    })
}

/// Propagates constraints over `x in lo..hi` domains and reports the
/// narrowed domains and each constraint's entailment.
#[wasm_bindgen]
pub fn propagate(text: &str) -> String {
    to_json(propagation(text))
}
