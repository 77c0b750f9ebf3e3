use std::fmt;
use std::str::FromStr;

use super::instance::{horizon, FjsInstance, Task};
use crate::element::{DomainKind, Element};
use crate::formula::{cst, var, Expr, Formula, Var};
use crate::lattice::{AbstractDomain, DomainError};
use crate::products::{Decl, Dep, SharedProduct, SharingMode};
use crate::search::Strategy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Fjs1,
    Fjs2,
    BoxIpc,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Fjs1, ModelKind::Fjs2, ModelKind::BoxIpc];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Fjs1 => "fjs1",
            ModelKind::Fjs2 => "fjs2",
            ModelKind::BoxIpc => "box-ipc",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown domain `{s}` (expected fjs1, fjs2 or box-ipc)"))
    }
}

pub fn start(j: usize, t: usize) -> Var {
    Var::new(format!("s_{}_{}", j + 1, t + 1))
}

pub fn duration(j: usize, t: usize) -> Var {
    Var::new(format!("d_{}_{}", j + 1, t + 1))
}

pub fn machine(j: usize, t: usize) -> Var {
    Var::new(format!("m_{}_{}", j + 1, t + 1))
}

pub fn makespan() -> Var {
    Var::new("makespan")
}

/// A flexible job shop model: declarations of a shared product, the
/// annotated constraints to interpret in it, and the branching phases.
#[derive(Clone, Debug)]
pub struct FjsModel {
    pub kind: ModelKind,
    pub decls: Vec<Decl>,
    pub constraints: Vec<Formula>,
    pub phases: Vec<Vec<Var>>,
    pub horizon: i64,
}

impl FjsModel {
    pub fn strategy(&self) -> Strategy {
        Strategy::dms(self.phases.clone())
    }

    pub fn objective(&self) -> Var {
        makespan()
    }

    /// Builds the shared product and interprets every constraint.
    pub fn element(&self, mode: SharingMode) -> Result<Element, DomainError> {
        let mut s = SharedProduct::build(&self.decls, mode)?;
        for c in &self.constraints {
            s.interpret(c)?;
        }
        Ok(Element::Shared(s))
    }

    /// Number of constraints annotated with `name`.
    pub fn count_for(&self, name: &str) -> usize {
        self.constraints.iter().filter(|c| target(c) == Some(name)).count()
    }
}

/// The component name a constraint is annotated with.
pub fn target(phi: &Formula) -> Option<&str> {
    match phi {
        Formula::Annotated(_, crate::formula::Label::Name(n)) => Some(n),
        _ => None,
    }
}

fn between(x: &Var, lo: i64, hi: i64) -> Formula {
    var(x.name()).ge(lo).and(var(x.name()).le(hi))
}

fn ev(x: &Var) -> Expr {
    var(x.name())
}

/// The duration term of a task: its constant if all alternatives agree.
fn dur_term(task: &Task, d: &Var, fixed: bool) -> Expr {
    match task.fixed_duration() {
        Some(c) if fixed => cst(c),
        _ => ev(d),
    }
}

struct Parts {
    bounds_box: Vec<Formula>,
    bounds_oct: Vec<Formula>,
    /// Job precedences and the makespan bound, with the duration as a
    /// constant when fixed, and whether the duration was fixed.
    precedences: Vec<(Formula, bool)>,
    /// The same precedences, always over the duration variable.
    precedences_symbolic: Vec<Formula>,
    no_overlap: Vec<Formula>,
    alternatives: Vec<Formula>,
    phases: Vec<Vec<Var>>,
}

fn parts(inst: &FjsInstance, h: i64, split_no_overlap: bool) -> Parts {
    let mut p = Parts {
        bounds_box: Vec::new(),
        bounds_oct: Vec::new(),
        precedences: Vec::new(),
        precedences_symbolic: Vec::new(),
        no_overlap: Vec::new(),
        alternatives: Vec::new(),
        phases: vec![Vec::new(), Vec::new(), Vec::new(), vec![makespan()]],
    };
    let ms = makespan();
    for (j, t) in inst.task_ids() {
        let task = inst.task(j, t);
        let (s, d, m) = (start(j, t), duration(j, t), machine(j, t));
        p.bounds_box.push(between(&s, 0, h));
        p.bounds_oct.push(between(&s, 0, h));
        p.bounds_box.push(between(&d, task.min_duration(), task.max_duration()));
        p.bounds_box.push(between(&m, task.min_machine() as i64, task.max_machine() as i64));
        p.phases[0].push(d.clone());
        p.phases[1].push(m.clone());
        p.phases[2].push(s.clone());

        let next = if t + 1 < inst.jobs[j].len() { start(j, t + 1) } else { ms.clone() };
        let fixed = task.fixed_duration().is_some();
        p.precedences.push(((ev(&s) + dur_term(task, &d, true)).le(ev(&next)), fixed));
        p.precedences_symbolic.push((ev(&s) + ev(&d)).le(ev(&next)));

        let choices = task.alternatives.iter().map(|a| {
            ev(&m).eq_to(a.machine as i64).and(ev(&d).eq_to(a.duration))
        });
        p.alternatives.push(Formula::any(choices).expect("tasks have an alternative"));
    }
    p.bounds_box.push(between(&ms, 0, h));
    p.bounds_oct.push(between(&ms, 0, h));

    let ids: Vec<(usize, usize)> = inst.task_ids().collect();
    for (a, &(j1, t1)) in ids.iter().enumerate() {
        for &(j2, t2) in &ids[a + 1..] {
            if j1 == j2 {
                continue;
            }
            let (s1, d1, m1) = (start(j1, t1), duration(j1, t1), machine(j1, t1));
            let (s2, d2, m2) = (start(j2, t2), duration(j2, t2), machine(j2, t2));
            let tag = |f: Formula| if split_no_overlap { f.at(2) } else { f };
            let same = tag(ev(&m1).eq_to(ev(&m2)));
            let before = tag((ev(&s1) + ev(&d1)).le(ev(&s2)));
            let after = tag((ev(&s2) + ev(&d2)).le(ev(&s1)));
            p.no_overlap.push(same.implies(before.or(after)));
        }
    }
    p
}

fn decl(name: &str, kind: DomainKind, deps: Dep) -> Decl {
    Decl::new(name, kind, deps)
}

fn box_oct() -> DomainKind {
    DomainKind::product([DomainKind::Box, DomainKind::Octagon])
}

/// FJS1: octagon for precedences over fixed durations, everything else in
/// `L(IPC(Box×Oct))`.
pub fn build_fjs1(inst: &FjsInstance) -> FjsModel {
    build_fjs1_with(inst, horizon(inst))
}

pub fn build_fjs1_with(inst: &FjsInstance, h: i64) -> FjsModel {
    let p = parts(inst, h, false);
    let decls = vec![
        decl("box", DomainKind::Box, Dep::Bottom),
        decl("oct", DomainKind::Octagon, Dep::Bottom),
        decl(
            "any",
            DomainKind::logic(DomainKind::ipc(box_oct())),
            Dep::tuple([Dep::tuple([Dep::named("box"), Dep::named("oct")])]),
        ),
    ];
    let mut cs: Vec<Formula> = p.bounds_box.into_iter().map(|f| f.at("box")).collect();
    cs.extend(p.bounds_oct.into_iter().map(|f| f.at("oct")));
    for (f, fixed) in p.precedences {
        cs.push(f.at(if fixed { "oct" } else { "any" }));
    }
    cs.extend(p.no_overlap.into_iter().map(|f| f.at("any")));
    cs.extend(p.alternatives.into_iter().map(|f| f.at("any")));
    FjsModel { kind: ModelKind::Fjs1, decls, constraints: cs, phases: p.phases, horizon: h }
}

/// FJS2: precedences go through a delayed product that moves them to the
/// octagon once durations are known.
pub fn build_fjs2(inst: &FjsInstance) -> FjsModel {
    build_fjs2_with(inst, horizon(inst))
}

pub fn build_fjs2_with(inst: &FjsInstance, h: i64) -> FjsModel {
    let p = parts(inst, h, true);
    let prec = DomainKind::delayed(DomainKind::ipc(box_oct()), DomainKind::Octagon);
    let decls = vec![
        decl("box", DomainKind::Box, Dep::Bottom),
        decl("oct", DomainKind::Octagon, Dep::Bottom),
        decl(
            "prec",
            prec.clone(),
            Dep::tuple([
                Dep::tuple([Dep::tuple([Dep::named("box"), Dep::named("oct")])]),
                Dep::named("oct"),
            ]),
        ),
        decl(
            "no_overlap",
            DomainKind::logic(DomainKind::product([DomainKind::Box, prec])),
            Dep::tuple([Dep::named("box"), Dep::named("prec")]),
        ),
        decl("alternatives", DomainKind::logic(DomainKind::Box), Dep::tuple([Dep::named("box")])),
    ];
    let mut cs: Vec<Formula> = p.bounds_box.into_iter().map(|f| f.at("box")).collect();
    cs.extend(p.bounds_oct.into_iter().map(|f| f.at("oct")));
    cs.extend(p.precedences_symbolic.into_iter().map(|f| f.at("prec")));
    cs.extend(p.no_overlap.into_iter().map(|f| f.at("no_overlap")));
    cs.extend(p.alternatives.into_iter().map(|f| f.at("alternatives")));
    FjsModel { kind: ModelKind::Fjs2, decls, constraints: cs, phases: p.phases, horizon: h }
}

/// Baseline: a box and one `L(IPC(Box))` holding every constraint.
pub fn build_box_ipc(inst: &FjsInstance) -> FjsModel {
    build_box_ipc_with(inst, horizon(inst))
}

pub fn build_box_ipc_with(inst: &FjsInstance, h: i64) -> FjsModel {
    let p = parts(inst, h, false);
    let decls = vec![
        decl("box", DomainKind::Box, Dep::Bottom),
        decl(
            "all",
            DomainKind::logic(DomainKind::ipc(DomainKind::Box)),
            Dep::tuple([Dep::named("box")]),
        ),
    ];
    let mut cs: Vec<Formula> = p.bounds_box.into_iter().map(|f| f.at("box")).collect();
    cs.extend(p.precedences_symbolic.into_iter().map(|f| f.at("all")));
    cs.extend(p.no_overlap.into_iter().map(|f| f.at("all")));
    cs.extend(p.alternatives.into_iter().map(|f| f.at("all")));
    FjsModel { kind: ModelKind::BoxIpc, decls, constraints: cs, phases: p.phases, horizon: h }
}

pub fn build(inst: &FjsInstance, kind: ModelKind, h: Option<i64>) -> FjsModel {
    let h = h.unwrap_or_else(|| horizon(inst));
    match kind {
        ModelKind::Fjs1 => build_fjs1_with(inst, h),
        ModelKind::Fjs2 => build_fjs2_with(inst, h),
        ModelKind::BoxIpc => build_box_ipc_with(inst, h),
    }
}
