//! Randomized self-checks against the brute-force oracles. Each trial draws
//! one problem from a seeded generator and returns a description of the
//! first disagreement, if any.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::element::{DomainKind, Element};
use crate::fjssp::{
    fjssp_oracle, horizon, random_instance, solve_instance, verify_schedule, ModelKind,
};
use crate::formula::{var, Formula, Var};
use crate::lattice::{AbstractDomain, Kleene};
use crate::octagon::Octagon;
use crate::oracle::{
    brute_force, octagon_closure_oracle, point_set, random_atom, random_clause, random_dbm,
    random_linear, random_octagonal, random_range, random_unary, var_names,
};
use crate::products::{Decl, Dep, SharedProduct, SharingMode};
use crate::search::{concretize, solve, Budget, Status, Strategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    Octagon,
    Ipc,
    Enumeration,
    Delayed,
    Sharing,
    Fjssp,
    Extensive,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Octagon,
        Suite::Ipc,
        Suite::Enumeration,
        Suite::Delayed,
        Suite::Sharing,
        Suite::Fjssp,
        Suite::Extensive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Octagon => "octagon",
            Suite::Ipc => "ipc",
            Suite::Enumeration => "enumeration",
            Suite::Delayed => "delayed",
            Suite::Sharing => "sharing",
            Suite::Fjssp => "fjssp",
            Suite::Extensive => "extensive",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Octagon => 500,
            Suite::Ipc => 1000,
            Suite::Enumeration => 200,
            Suite::Delayed => 200,
            Suite::Sharing => 100,
            Suite::Fjssp => 20,
            Suite::Extensive => 300,
        }
    }

    pub fn trial(self, rng: &mut ChaCha8Rng) -> Result<(), String> {
        match self {
            Suite::Octagon => octagon_trial(rng),
            Suite::Ipc => ipc_trial(rng),
            Suite::Enumeration => enumeration_trial(rng),
            Suite::Delayed => delayed_trial(rng),
            Suite::Sharing => sharing_trial(rng),
            Suite::Fjssp => fjssp_trial(rng, Duration::from_secs(10)),
            Suite::Extensive => extensive_trial(rng),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|k| k.name()).collect();
            format!("unknown suite `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: usize,
    pub failed: usize,
    /// The first few failures, with their trial numbers.
    pub failures: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

/// Runs `trials` trials of `suite`; trial `i` uses seed `seed + i`.
pub fn run_suite(suite: Suite, seed: u64, trials: usize) -> SuiteReport {
    let start = Instant::now();
    let mut report =
        SuiteReport { suite, passed: 0, failed: 0, failures: Vec::new(), elapsed: Duration::ZERO };
    for i in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        match suite.trial(&mut rng) {
            Ok(()) => report.passed += 1,
            Err(e) => {
                report.failed += 1;
                if report.failures.len() < 5 {
                    report.failures.push(format!("trial {i}: {e}"));
                }
            }
        }
    }
    report.elapsed = start.elapsed();
    report
}

fn bounds(vars: &[Var], ranges: &[(i64, i64)]) -> Formula {
    Formula::all(
        vars.iter().zip(ranges).map(|(v, (lo, hi))| var(v.name()).ge(*lo).and(var(v.name()).le(*hi))),
    )
    .expect("at least one variable")
}

fn all_of(items: &[Formula]) -> Option<Formula> {
    Formula::all(items.iter().cloned())
}

/// Solutions of `items` and the bounds on the grid.
fn reference(items: &[Formula], vars: &[Var], ranges: &[(i64, i64)]) -> BTreeSet<Vec<i64>> {
    let mut all = vec![bounds(vars, ranges)];
    all.extend(items.iter().cloned());
    point_set(brute_force(&all_of(&all).unwrap(), vars, ranges))
}

/// Octagon closure against the path-relaxation oracle, both from scratch
/// and after adding one constraint to a closed octagon.
pub fn octagon_trial(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.gen_range(1..=5);
    let lo = if rng.gen_bool(0.5) { -8 } else { -2 };
    let m = random_dbm(rng, n, lo);
    let vars = var_names(n);
    let mut o = Octagon::from_matrix(vars.clone(), &m);
    o.closure();
    let expect = octagon_closure_oracle(n, &m);
    compare_octagon(&o, &expect, "full")?;
    if o.is_empty() {
        return Ok(());
    }
    let extra = if n == 1 { random_unary(rng, &vars, 6) } else { random_octagonal(rng, &vars) };
    o.interpret(&extra).map_err(|e| e.to_string())?;
    let raw = o.entries();
    o.closure();
    compare_octagon(&o, &octagon_closure_oracle(n, &raw), &format!("after {extra}"))
}

fn compare_octagon(o: &Octagon, expect: &Option<Vec<Option<i64>>>, what: &str) -> Result<(), String> {
    match expect {
        None if o.is_empty() => Ok(()),
        None => Err(format!("{what}: oracle finds no integer point, octagon is not empty")),
        Some(_) if o.is_empty() => Err(format!("{what}: octagon empty, oracle consistent")),
        Some(m) if *m == o.entries() => Ok(()),
        Some(m) => Err(format!("{what}: matrix differs\n  got    {:?}\n  oracle {m:?}", o.entries())),
    }
}

/// IPC closure keeps every solution; a `True` state only on solution
/// hulls; closure is extensive.
pub fn ipc_trial(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.gen_range(1..=4);
    let vars = var_names(n);
    let ranges: Vec<(i64, i64)> = (0..n).map(|_| random_range(rng, 8)).collect();
    let atoms: Vec<Formula> =
        (0..rng.gen_range(1..=4)).map(|_| Formula::Atom(random_atom(rng, &vars))).collect();
    let mut e = Element::ipc(Element::boxed());
    e.interpret(&bounds(&vars, &ranges).at(1)).map_err(|err| err.to_string())?;
    for a in &atoms {
        e.interpret(a).map_err(|err| err.to_string())?;
    }
    let before = e.clone();
    e.closure();
    if !before.leq(&e) {
        return Err("closure is not extensive".into());
    }
    let sols = reference(&atoms, &vars, &ranges);
    for p in &sols {
        for (v, x) in vars.iter().zip(p) {
            if !e.project(v).contains(*x) {
                return Err(format!("solution {p:?} lost on {v}: {:?} with {atoms:?}", e.project(v)));
            }
        }
    }
    match e.state() {
        Kleene::False if !sols.is_empty() => Err(format!("state False with solutions {sols:?}")),
        Kleene::True => {
            let hull: Vec<(i64, i64)> = vars
                .iter()
                .map(|v| {
                    let h = e.project(v);
                    (h.lo().finite().unwrap_or(0), h.hi().finite().unwrap_or(-1))
                })
                .collect();
            let inside = reference(&[], &vars, &hull).len();
            let good = reference(&atoms, &vars, &hull).len();
            if inside != good {
                Err(format!("state True but {} of {inside} hull points fail", inside - good))
            } else {
                Ok(())
            }
        }
        _ => Ok(()),
    }
}

/// Search over `L(IPC(Box))` finds exactly the brute-force solutions.
pub fn enumeration_trial(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.gen_range(1..=3);
    let vars = var_names(n);
    let ranges: Vec<(i64, i64)> = (0..n).map(|_| random_range(rng, 6)).collect();
    let clauses: Vec<Formula> = (0..rng.gen_range(0..=3)).map(|_| random_clause(rng, &vars)).collect();
    let mut e = Element::logic(Element::ipc(Element::boxed()));
    e.interpret(&bounds(&vars, &ranges).at(1).at(1)).map_err(|err| err.to_string())?;
    for c in &clauses {
        e.interpret(c).map_err(|err| format!("{c}: {err}"))?;
    }
    let (found, stats) = solve(e, &Strategy::none(), Budget::unlimited()).map_err(|e| e.to_string())?;
    if stats.undecided > 0 {
        return Err(format!("{} undecided nodes", stats.undecided));
    }
    let mut got = BTreeSet::new();
    for s in &found {
        got.extend(concretize(s, &vars, 100_000).ok_or("unbounded solution element")?);
    }
    let expect = reference(&clauses, &vars, &ranges);
    if got != expect {
        return Err(format!("clauses {clauses:?}: got {got:?}, expected {expect:?}"));
    }
    Ok(())
}

fn c3_system(rng: &mut ChaCha8Rng, vars: &[Var]) -> (Vec<Formula>, Vec<Formula>) {
    // (to the box of a1, to the product as a whole)
    let unary = vec![random_unary(rng, vars, 5)];
    let mut rest = vec![random_linear(rng, vars, 8), random_octagonal(rng, vars)];
    if rng.gen_bool(0.3) {
        rest.push((var("x") * var("y")).le(rng.gen_range(0..=9)));
    }
    if rng.gen_bool(0.5) {
        let two: Vec<Var> = vars.choose_multiple(rng, 2).cloned().collect();
        rest.push(random_linear(rng, &two, 6));
    }
    (unary, rest)
}

fn delayed_root(vars: &[Var], ranges: &[(i64, i64)]) -> Result<Element, String> {
    let a1 = Element::ipc(Element::product(vec![Element::boxed(), Element::octagon()]));
    let mut dp = Element::delayed(a1, Element::octagon());
    let b = bounds(vars, ranges);
    dp.interpret(&b.clone().at(1).at(1)).map_err(|e| e.to_string())?;
    dp.interpret(&b.at(2)).map_err(|e| e.to_string())?;
    Ok(dp)
}

/// Full search through `DP(IPC(Box×Oct), Oct)` finds exactly the
/// brute-force solutions, and each relaxed formula holds on the solutions
/// of the branch that joined it.
pub fn delayed_trial(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let vars = var_names(3);
    let ranges: Vec<(i64, i64)> = (0..3).map(|_| random_range(rng, 5)).collect();
    let (unary, rest) = c3_system(rng, &vars);
    let mut dp = delayed_root(&vars, &ranges)?;
    for u in &unary {
        dp.interpret(&u.clone().at(1).at(1)).map_err(|e| e.to_string())?;
    }
    for f in &rest {
        dp.interpret(f).map_err(|e| format!("{f}: {e}"))?;
    }
    let strategy = Strategy::dms(vec![vars.clone()]);
    let (found, _) = solve(dp, &strategy, Budget::unlimited()).map_err(|e| e.to_string())?;
    let mut got = BTreeSet::new();
    for s in &found {
        let pts = concretize(s, &vars, 10_000).ok_or("unbounded solution element")?;
        let Element::Delayed(d) = s else { unreachable!() };
        for r in d.relaxed() {
            for p in &pts {
                let env = |x: &Var| vars.iter().position(|v| v == x).map(|i| p[i]);
                if !r.holds(&env).unwrap_or(false) {
                    return Err(format!("relaxed {r} fails at {p:?}"));
                }
            }
        }
        got.extend(pts);
    }
    let mut all = unary.clone();
    all.extend(rest.iter().cloned());
    let expect = reference(&all, &vars, &ranges);
    if got != expect {
        return Err(format!("system {all:?}: got {got:?}, expected {expect:?}"));
    }
    Ok(())
}

/// `box; L(Box) lbox(box); IPC(Box) ipc(box)`.
pub fn d1_decls() -> Vec<Decl> {
    vec![
        Decl::new("box", DomainKind::Box, Dep::Bottom),
        Decl::new("lbox", DomainKind::logic(DomainKind::Box), Dep::tuple([Dep::named("box")])),
        Decl::new("ipc", DomainKind::ipc(DomainKind::Box), Dep::tuple([Dep::named("box")])),
    ]
}

/// Explicit exchange and aliasing give equal components after closure, and
/// the exchange is idempotent.
pub fn sharing_trial(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.gen_range(2..=3);
    let vars = var_names(n);
    let ranges: Vec<(i64, i64)> = (0..n).map(|_| random_range(rng, 9)).collect();
    let clause = Formula::any((0..rng.gen_range(1..=3)).map(|_| random_unary(rng, &vars, 9))).unwrap();
    let props: Vec<Formula> =
        (0..rng.gen_range(1..=2)).map(|_| Formula::Atom(random_atom(rng, &vars))).collect();
    let build = |mode| -> Result<SharedProduct, String> {
        let mut s = SharedProduct::build(&d1_decls(), mode).map_err(|e| e.to_string())?;
        s.interpret(&bounds(&vars, &ranges).at("box")).map_err(|e| e.to_string())?;
        s.interpret(&clause.clone().at("lbox")).map_err(|e| e.to_string())?;
        for p in &props {
            s.interpret(&p.clone().at("ipc")).map_err(|e| e.to_string())?;
        }
        s.closure();
        Ok(s)
    };
    let alias = build(SharingMode::Alias)?;
    let mut exch = build(SharingMode::Exchange)?;
    for ((name, a), b) in alias.names().iter().zip(alias.components()).zip(exch.components()) {
        let (a, b) = (a.borrow(), b.borrow());
        if !(a.leq(&b) && b.leq(&a)) {
            return Err(format!("component {name} differs: alias {a:?}, exchange {b:?}"));
        }
    }
    let stamp = exch.stamp();
    exch.rho();
    if exch.stamp() != stamp {
        return Err("exchange is not idempotent".into());
    }
    Ok(())
}

/// Both models reach the oracle optimum on a tiny instance, with verified
/// schedules.
pub fn fjssp_trial(rng: &mut ChaCha8Rng, limit: Duration) -> Result<(), String> {
    let inst = random_instance(rng, 8);
    let opt = fjssp_oracle(&inst, horizon(&inst)).map_err(|e| e.to_string())?;
    for kind in [ModelKind::Fjs1, ModelKind::Fjs2] {
        let out = solve_instance(&inst, kind, None, Budget::time(limit)).map_err(|e| e.to_string())?;
        if out.stats.status != Status::Optimal || out.stats.best_objective != Some(opt) {
            return Err(format!(
                "{kind}: {} with {:?}, oracle {opt}\n{}",
                out.stats.status,
                out.stats.best_objective,
                inst.to_fjs()
            ));
        }
        let best = out.best.as_ref().ok_or("no assignment")?;
        let realized = verify_schedule(&inst, best).map_err(|e| format!("{kind}: {e}"))?;
        if realized != opt {
            return Err(format!("{kind}: schedule ends at {realized}, objective {opt}"));
        }
    }
    Ok(())
}

fn random_element(rng: &mut ChaCha8Rng) -> Result<(String, Element), String> {
    let n = rng.gen_range(1..=3);
    let vars = var_names(n);
    let ranges: Vec<(i64, i64)> = (0..n).map(|_| random_range(rng, 8)).collect();
    let b = bounds(&vars, &ranges);
    let e = match rng.gen_range(0..6) {
        0 => {
            let mut e = Element::boxed();
            e.interpret(&b).map_err(|e| e.to_string())?;
            ("box", e)
        }
        1 => {
            let mut e = Element::octagon();
            e.interpret(&b).map_err(|e| e.to_string())?;
            if n > 1 {
                e.interpret(&random_octagonal(rng, &vars)).map_err(|e| e.to_string())?;
            }
            ("octagon", e)
        }
        2 => {
            let mut e = Element::ipc(Element::boxed());
            e.interpret(&b.at(1)).map_err(|e| e.to_string())?;
            e.interpret(&Formula::Atom(random_atom(rng, &vars))).map_err(|e| e.to_string())?;
            ("ipc", e)
        }
        3 => {
            let mut e = Element::logic(Element::ipc(Element::boxed()));
            e.interpret(&b.at(1).at(1)).map_err(|e| e.to_string())?;
            e.interpret(&random_clause(rng, &vars)).map_err(|e| e.to_string())?;
            ("logic", e)
        }
        4 => {
            let vars = var_names(3);
            let ranges: Vec<(i64, i64)> = (0..3).map(|_| random_range(rng, 5)).collect();
            let mut e = delayed_root(&vars, &ranges)?;
            e.interpret(&random_linear(rng, &vars, 8)).map_err(|e| e.to_string())?;
            ("delayed", e)
        }
        _ => {
            let mut s = SharedProduct::build(&d1_decls(), SharingMode::Alias).map_err(|e| e.to_string())?;
            s.interpret(&b.at("box")).map_err(|e| e.to_string())?;
            s.interpret(&random_unary(rng, &vars, 8).or(random_unary(rng, &vars, 8)).at("lbox"))
                .map_err(|e| e.to_string())?;
            s.interpret(&Formula::Atom(random_atom(rng, &vars)).at("ipc")).map_err(|e| e.to_string())?;
            ("shared", Element::Shared(s))
        }
    };
    Ok((e.0.to_string(), e.1))
}

/// Closure only moves up: the element before closure is below the element
/// after it, for every kind of domain.
pub fn extensive_trial(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (kind, mut e) = random_element(rng)?;
    let before = e.clone();
    e.closure();
    if !before.leq(&e) {
        return Err(format!("{kind}: closure is not extensive on {before:?}"));
    }
    Ok(())
}
