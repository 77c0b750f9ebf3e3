//! Randomized properties of formulas, lattices, domains, products, search
//! and the scheduling models. Problems come from the seeded generators in
//! `domcoop::oracle`; proptest drives the seeds.

use std::collections::{BTreeMap, BTreeSet};

use domcoop::element::Element;
use domcoop::fjssp::{
    build_fjs1, build_fjs2, duration, machine, makespan, random_instance, start, target,
    FjsInstance,
};
use domcoop::formula::{
    negate_atom, relax_candidates, substitute_fixed, var, vars, BinOp, Formula, Var,
};
use domcoop::ipc::Propagator;
use domcoop::lattice::{
    interval_arith, interval_inv_narrow, interval_join, AbstractDomain, ExtendedInt, Interval,
    Kleene, Side,
};
use domcoop::logic::{eval_with, ClauseStatus};
use domcoop::octagon::Octagon;
use domcoop::oracle::{
    brute_force, point_set, random_atom, random_clause, random_dbm, random_linear,
    random_octagonal, random_range, random_unary, var_names,
};
use domcoop::products::{SharedProduct, SharingMode, TransferStatus};
use domcoop::search::{concretize, minimize, solve, Budget, Strategy as Search};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn bounds(vs: &[Var], ranges: &[(i64, i64)]) -> Formula {
    Formula::all(vs.iter().zip(ranges).map(|(v, (lo, hi))| var(v.name()).ge(*lo).and(var(v.name()).le(*hi))))
        .unwrap()
}

fn grid(vs: &[Var], ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    brute_force(&bounds(vs, ranges), vs, ranges)
}

fn env<'a>(vs: &'a [Var], p: &'a [i64]) -> impl Fn(&Var) -> Option<i64> + 'a {
    move |x| vs.iter().position(|v| v == x).map(|i| p[i])
}

fn holds(phi: &Formula, vs: &[Var], p: &[i64]) -> bool {
    phi.holds(&env(vs, p)).unwrap_or(false)
}

fn iv(a: i64, b: i64) -> Interval {
    Interval::new(a, b)
}

fn small_interval() -> impl Strategy<Value = Interval> {
    prop_oneof![
        (-8i64..=8, 0i64..=6).prop_map(|(a, w)| iv(a, (a + w).min(8))),
        Just(Interval::bottom()),
        Just(Interval::empty()),
        (-8i64..=8).prop_map(Interval::at_least),
        (-8i64..=8).prop_map(Interval::at_most),
    ]
}

fn finite_interval() -> impl Strategy<Value = Interval> {
    (-8i64..=8, 0i64..=5).prop_map(|(a, w)| iv(a, (a + w).min(8)))
}

fn op() -> impl Strategy<Value = BinOp> {
    prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul)]
}

fn apply(op: BinOp, a: i64, b: i64) -> i64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // ---- formulas

    #[test]
    fn atom_and_negation_disagree_everywhere(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(r.gen_range(1..=3));
        let a = random_atom(&mut r, &vs);
        let n = negate_atom(&a);
        for p in grid(&vs, &vec![(-4, 4); vs.len()]) {
            let e = env(&vs, &p);
            if let (Ok(x), Ok(y)) = (a.holds(&e), n.holds(&e)) {
                prop_assert!(x ^ y, "{a} and {n} at {p:?}");
            }
        }
    }

    #[test]
    fn substitution_is_idempotent_and_removes_bound_vars(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(3);
        let phi = random_clause(&mut r, &vs);
        let mut b: BTreeMap<Var, i64> = BTreeMap::new();
        for v in &vs {
            if r.gen_bool(0.5) {
                b.insert(v.clone(), r.gen_range(-3..=5));
            }
        }
        let once = substitute_fixed(&phi, &b);
        prop_assert_eq!(substitute_fixed(&once, &b), once.clone());
        let expect: BTreeSet<Var> = vars(&phi).into_iter().filter(|v| !b.contains_key(v)).collect();
        prop_assert_eq!(vars(&once).into_iter().collect::<BTreeSet<_>>(), expect);
    }

    #[test]
    fn relaxations_keep_bounded_solutions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(r.gen_range(1..=3));
        let ranges: Vec<_> = vs.iter().map(|_| random_range(&mut r, 5)).collect();
        let phi = random_linear(&mut r, &vs, 8);
        let lb = vs.iter().zip(&ranges).map(|(v, g)| (v.clone(), ExtendedInt::Finite(g.0))).collect();
        let ub = vs.iter().zip(&ranges).map(|(v, g)| (v.clone(), ExtendedInt::Finite(g.1))).collect();
        for (_, relaxed) in relax_candidates(&phi, &lb, &ub) {
            for p in brute_force(&phi, &vs, &ranges) {
                prop_assert!(holds(&relaxed, &vs, &p), "{phi} relaxed to {relaxed} loses {p:?}");
            }
        }
    }

    // ---- intervals

    #[test]
    fn join_laws(a in small_interval(), b in small_interval(), c in small_interval()) {
        prop_assert_eq!(interval_join(a, b), interval_join(b, a));
        prop_assert_eq!(interval_join(interval_join(a, b), c), interval_join(a, interval_join(b, c)));
        prop_assert_eq!(interval_join(a, a), a);
        prop_assert_eq!(interval_join(Interval::bottom(), a), a);
        prop_assert!(a.leq(&interval_join(a, b)));
    }

    #[test]
    fn arithmetic_contains_every_result(op in op(), a in finite_interval(), b in finite_interval()) {
        let res = interval_arith(op, a, b).unwrap();
        for x in a.iter() {
            for y in b.iter() {
                prop_assert!(res.contains(apply(op, x, y)), "{x} {op:?} {y} outside {res:?}");
            }
        }
    }

    #[test]
    fn inverse_narrowing_keeps_feasible_values(
        op in op(), unknown in finite_interval(), known in finite_interval(), result in finite_interval(),
    ) {
        for side in [Side::Left, Side::Right] {
            let narrowed = interval_inv_narrow(op, result, known, side);
            for v in unknown.iter() {
                let feasible = known.iter().any(|k| {
                    let out = if side == Side::Left { apply(op, v, k) } else { apply(op, k, v) };
                    result.contains(out)
                });
                if feasible {
                    prop_assert!(narrowed.contains(v), "{v} dropped by {op:?} {side:?}: {narrowed:?}");
                }
            }
        }
    }

    // ---- boxes

    #[test]
    fn box_split_covers_and_shrinks(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(r.gen_range(1..=3));
        let ranges: Vec<_> = vs.iter().map(|_| random_range(&mut r, 6)).collect();
        let mut e = Element::boxed();
        e.interpret(&bounds(&vs, &ranges)).unwrap();
        let width = |e: &Element| -> u128 { vs.iter().map(|v| e.project(v).width().unwrap_or(0)).sum() };
        let parent = point_set(concretize(&e, &vs, 10_000).unwrap());
        let branches = e.split().unwrap();
        if parent.len() <= 1 {
            prop_assert!(branches.is_empty());
        } else {
            let mut union = BTreeSet::new();
            for b in &branches {
                let mut child = e.clone();
                child.refine(b).unwrap();
                prop_assert!(width(&child) < width(&e));
                union.extend(concretize(&child, &vs, 10_000).unwrap());
            }
            prop_assert_eq!(union, parent);
        }
    }

    #[test]
    fn box_interpretation_is_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(r.gen_range(1..=3));
        let ranges: Vec<_> = vs.iter().map(|_| random_range(&mut r, 6)).collect();
        let atoms: Vec<Formula> = (0..r.gen_range(1..=3)).map(|_| random_unary(&mut r, &vs, 6)).collect();
        let phi = Formula::all(atoms).unwrap();
        let mut e = Element::boxed();
        e.interpret(&bounds(&vs, &ranges)).unwrap();
        let before = e.clone();
        e.interpret(&phi).unwrap();
        let got = point_set(concretize(&e, &vs, 10_000).unwrap());
        let all = bounds(&vs, &ranges).and(phi.clone());
        prop_assert_eq!(got.clone(), point_set(brute_force(&all, &vs, &ranges)));
        // joining the formula keeps the formula's solutions of the old box
        for p in concretize(&before, &vs, 10_000).unwrap() {
            if holds(&phi, &vs, &p) {
                prop_assert!(got.contains(&p));
            }
        }
    }

    // ---- octagons

    #[test]
    fn octagon_closure_sound_and_tight(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(r.gen_range(2..=3));
        let ranges: Vec<_> = vs.iter().map(|_| { let (a, b) = random_range(&mut r, 12); (a - 6, b - 6) }).collect();
        let cs: Vec<Formula> = (0..r.gen_range(1..=4)).map(|_| random_octagonal(&mut r, &vs)).collect();
        let mut o = Octagon::new();
        o.interpret(&bounds(&vs, &ranges)).unwrap();
        for c in &cs {
            o.interpret(c).unwrap();
        }
        o.closure();
        let mut all = vec![bounds(&vs, &ranges)];
        all.extend(cs.iter().cloned());
        let sols = brute_force(&Formula::all(all).unwrap(), &vs, &ranges);
        prop_assert_eq!(o.is_empty(), sols.is_empty());
        for p in &sols {
            prop_assert!(o.contains(&env(&vs, p)));
        }
        for (i, v) in vs.iter().enumerate() {
            let h = o.project(v);
            if let Some(lo) = h.lo().finite() {
                prop_assert!(sols.iter().any(|p| p[i] == lo), "{v} >= {lo} not attained");
            }
            if let Some(hi) = h.hi().finite() {
                prop_assert!(sols.iter().any(|p| p[i] == hi), "{v} <= {hi} not attained");
            }
        }
    }

    #[test]
    fn octagon_incremental_equals_batch_and_stays_coherent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=4);
        let vs = var_names(n);
        let m = random_dbm(&mut r, n, -3);
        let cs: Vec<Formula> = (0..3)
            .map(|_| if n == 1 { random_unary(&mut r, &vs, 5) } else { random_octagonal(&mut r, &vs) })
            .collect();
        let mut inc = Octagon::from_matrix(vs.clone(), &m);
        inc.full_closure();
        let mut batch = inc.clone();
        for c in &cs {
            inc.interpret(c).unwrap();
            inc.incremental_closure();
            batch.interpret(c).unwrap();
        }
        batch.full_closure();
        prop_assert_eq!(inc.is_empty(), batch.is_empty());
        if !inc.is_empty() {
            prop_assert_eq!(inc.entries(), batch.entries());
            let d = 2 * n;
            let e = inc.entries();
            for a in 0..d {
                for b in 0..d {
                    prop_assert_eq!(e[a * d + b], e[(b ^ 1) * d + (a ^ 1)]);
                }
            }
        }
    }

    // ---- interval propagators

    #[test]
    fn atom_state_matches_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(r.gen_range(1..=3));
        let ranges: Vec<_> = vs.iter().map(|_| random_range(&mut r, 5)).collect();
        let a = random_atom(&mut r, &vs);
        let mut e = Element::boxed();
        e.interpret(&bounds(&vs, &ranges)).unwrap();
        let phi = Formula::Atom(a.clone());
        let pts = grid(&vs, &ranges);
        match Propagator::compile(&a).state_of(&e) {
            Kleene::True => prop_assert!(pts.iter().all(|p| holds(&phi, &vs, p))),
            Kleene::False => prop_assert!(pts.iter().all(|p| !holds(&phi, &vs, p))),
            Kleene::Unknown => {}
        }
    }

    #[test]
    fn propagator_order_does_not_change_surviving_solutions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(r.gen_range(1..=3));
        let ranges: Vec<_> = vs.iter().map(|_| random_range(&mut r, 6)).collect();
        let atoms: Vec<Formula> = (0..r.gen_range(2..=4)).map(|_| Formula::Atom(random_atom(&mut r, &vs))).collect();
        let run = |order: &mut dyn Iterator<Item = &Formula>| {
            let mut e = Element::ipc(Element::boxed());
            e.interpret(&bounds(&vs, &ranges).at(1)).unwrap();
            for a in order {
                e.interpret(a).unwrap();
            }
            e.closure();
            grid(&vs, &ranges).into_iter().filter(|p| e.contains(&env(&vs, p))).collect::<BTreeSet<_>>()
        };
        let fwd = run(&mut atoms.iter());
        let back = run(&mut atoms.iter().rev());
        prop_assert_eq!(&fwd, &back);
        let mut all = vec![bounds(&vs, &ranges)];
        all.extend(atoms.iter().cloned());
        prop_assert_eq!(fwd, point_set(brute_force(&Formula::all(all).unwrap(), &vs, &ranges)));
    }

    // ---- logic completion

    #[test]
    fn eval3_matches_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(r.gen_range(1..=3));
        let ranges: Vec<_> = vs.iter().map(|_| random_range(&mut r, 5)).collect();
        let phi = random_clause(&mut r, &vs);
        let hull = |x: &Var| vs.iter().position(|v| v == x).map_or(Interval::bottom(), |i| iv(ranges[i].0, ranges[i].1));
        let pts = grid(&vs, &ranges);
        match eval_with(&phi, &hull) {
            Kleene::True => prop_assert!(pts.iter().all(|p| holds(&phi, &vs, p)), "{phi}"),
            Kleene::False => prop_assert!(pts.iter().all(|p| !holds(&phi, &vs, p)), "{phi}"),
            Kleene::Unknown => {}
        }
    }

    #[test]
    fn logic_split_covers_and_entailment_is_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(r.gen_range(1..=3));
        let ranges: Vec<_> = vs.iter().map(|_| random_range(&mut r, 5)).collect();
        let clauses: Vec<Formula> = (0..r.gen_range(1..=3)).map(|_| random_clause(&mut r, &vs)).collect();
        let mut e = Element::logic(Element::ipc(Element::boxed()));
        e.interpret(&bounds(&vs, &ranges).at(1).at(1)).unwrap();
        for c in &clauses {
            e.interpret(c).unwrap();
        }
        e.closure();
        let solutions = |e: &Element| -> BTreeSet<Vec<i64>> {
            let (found, _) = solve(e.clone(), &Search::none(), Budget::unlimited()).unwrap();
            found.iter().flat_map(|s| concretize(s, &vs, 10_000).unwrap()).collect()
        };
        let mut all = vec![bounds(&vs, &ranges)];
        all.extend(clauses.iter().cloned());
        let parent = solutions(&e);
        prop_assert_eq!(&parent, &point_set(brute_force(&Formula::all(all).unwrap(), &vs, &ranges)));
        let entailed = |e: &Element| -> Vec<bool> {
            let Element::Logic(l) = e else { unreachable!() };
            l.clauses().iter().map(|c| c.status == ClauseStatus::Entailed).collect()
        };
        let branches = e.split().unwrap();
        if !branches.is_empty() {
            let mut union = BTreeSet::new();
            for b in &branches {
                let mut child = e.clone();
                child.refine(b).unwrap();
                child.closure();
                for (was, now) in entailed(&e).into_iter().zip(entailed(&child)) {
                    prop_assert!(!was || now, "entailed clause reverted");
                }
                union.extend(solutions(&child));
            }
            prop_assert_eq!(union, parent);
        }
    }

    // ---- products

    #[test]
    fn transfer_table_only_moves_forward(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(3);
        let ranges: Vec<_> = vs.iter().map(|_| random_range(&mut r, 4)).collect();
        let a1 = Element::ipc(Element::product(vec![Element::boxed(), Element::octagon()]));
        let mut e = Element::delayed(a1, Element::octagon());
        e.interpret(&bounds(&vs, &ranges).at(1).at(1)).unwrap();
        e.interpret(&bounds(&vs, &ranges).at(2)).unwrap();
        for _ in 0..2 {
            e.interpret(&random_linear(&mut r, &vs, 8)).unwrap();
        }
        let table = |e: &Element| -> Vec<TransferStatus> {
            let Element::Delayed(d) = e else { unreachable!() };
            d.table().values().copied().collect()
        };
        let strategy = Search::dms(vec![vs.clone()]);
        e.closure();
        // follow a random path to a leaf
        loop {
            let branches = strategy.branch(&e).unwrap();
            if branches.is_empty() || e.state() == Kleene::False {
                break;
            }
            let mut child = e.clone();
            child.refine(&branches[r.gen_range(0..branches.len())]).unwrap();
            child.closure();
            for (was, now) in table(&e).into_iter().zip(table(&child)) {
                prop_assert!(was <= now);
            }
            e = child;
        }
    }

    #[test]
    fn exchange_is_idempotent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(2);
        let ranges: Vec<_> = vs.iter().map(|_| random_range(&mut r, 9)).collect();
        let mut s = SharedProduct::build(&domcoop::check::d1_decls(), SharingMode::Exchange).unwrap();
        s.interpret(&bounds(&vs, &ranges).at("box")).unwrap();
        s.interpret(&Formula::Atom(random_atom(&mut r, &vs)).at("ipc")).unwrap();
        s.interpret(&random_unary(&mut r, &vs, 9).or(random_unary(&mut r, &vs, 9)).at("lbox")).unwrap();
        s.closure();
        s.rho();
        let once = Element::Shared(s);
        let mut twice = once.clone();
        let Element::Shared(t) = &mut twice else { unreachable!() };
        t.rho();
        prop_assert!(once.leq(&twice) && twice.leq(&once));
    }

    // ---- search

    #[test]
    fn minimize_agrees_with_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(r.gen_range(1..=3));
        let ranges: Vec<_> = vs.iter().map(|_| random_range(&mut r, 6)).collect();
        let clauses: Vec<Formula> = (0..r.gen_range(0..=3)).map(|_| random_clause(&mut r, &vs)).collect();
        let mut e = Element::logic(Element::ipc(Element::boxed()));
        e.interpret(&bounds(&vs, &ranges).at(1).at(1)).unwrap();
        for c in &clauses {
            e.interpret(c).unwrap();
        }
        let mut all = vec![bounds(&vs, &ranges)];
        all.extend(clauses.iter().cloned());
        let expect = brute_force(&Formula::all(all).unwrap(), &vs, &ranges).iter().map(|p| p[0]).min();
        let out = minimize(e, &vs[0], &Search::dms(vec![vs.clone()]), Budget::unlimited()).unwrap();
        prop_assert_eq!(out.stats.best_objective, expect);
        prop_assert!(out.stats.history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn search_is_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs = var_names(3);
        let ranges: Vec<_> = vs.iter().map(|_| random_range(&mut r, 5)).collect();
        let clauses: Vec<Formula> = (0..3).map(|_| random_clause(&mut r, &vs)).collect();
        let run = || {
            let mut e = Element::logic(Element::ipc(Element::boxed()));
            e.interpret(&bounds(&vs, &ranges).at(1).at(1)).unwrap();
            for c in &clauses {
                e.interpret(c).unwrap();
            }
            let (found, stats) = solve(e, &Search::dms(vec![vs.clone()]), Budget::unlimited()).unwrap();
            let pts: Vec<Vec<Vec<i64>>> = found.iter().map(|s| concretize(s, &vs, 10_000).unwrap()).collect();
            (stats.nodes, pts)
        };
        prop_assert_eq!(run(), run());
    }
}

/// A random semi-active schedule: tasks dispatched in random job order,
/// each on a random alternative, as early as possible.
fn random_schedule(inst: &FjsInstance, r: &mut ChaCha8Rng) -> BTreeMap<Var, i64> {
    let mut next = vec![0; inst.n_jobs()];
    let mut job_ready = vec![0; inst.n_jobs()];
    let mut free = vec![0; inst.n_machines];
    let mut sol = BTreeMap::new();
    let mut end = 0;
    for _ in 0..inst.n_tasks() {
        let open: Vec<usize> = (0..inst.n_jobs()).filter(|&j| next[j] < inst.jobs[j].len()).collect();
        let j = open[r.gen_range(0..open.len())];
        let t = next[j];
        let alts = &inst.task(j, t).alternatives;
        let a = alts[r.gen_range(0..alts.len())];
        let s = job_ready[j].max(free[a.machine - 1]);
        sol.insert(start(j, t), s);
        sol.insert(duration(j, t), a.duration);
        sol.insert(machine(j, t), a.machine as i64);
        job_ready[j] = s + a.duration;
        free[a.machine - 1] = s + a.duration;
        end = end.max(s + a.duration);
        next[j] += 1;
    }
    sol.insert(makespan(), end);
    sol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn feasible_schedules_satisfy_both_models(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 8);
        let sol = random_schedule(&inst, &mut r);
        let e = |x: &Var| sol.get(x).copied();
        for m in [build_fjs1(&inst), build_fjs2(&inst)] {
            for c in &m.constraints {
                prop_assert!(c.strip_annotations().holds(&e).unwrap(), "{:?}: {c} fails", m.kind);
            }
        }
    }

    #[test]
    fn fjs1_precedence_goes_to_octagon_iff_duration_fixed(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 8);
        let m = build_fjs1(&inst);
        for (j, t) in inst.task_ids() {
            let next = if t + 1 < inst.jobs[j].len() { start(j, t + 1) } else { makespan() };
            let s = start(j, t);
            let prec: Vec<&Formula> = m.constraints.iter().filter(|c| {
                let f = c.strip_annotations();
                let Some(a) = f.as_atom() else { return false };
                let mut left = BTreeSet::new();
                a.left.collect_vars(&mut left);
                left.contains(&s) && a.right == var(next.name())
            }).collect();
            prop_assert_eq!(prec.len(), 1);
            let fixed = inst.task(j, t).fixed_duration().is_some();
            prop_assert_eq!(target(prec[0]), Some(if fixed { "oct" } else { "any" }));
        }
    }
}
