//! Brute-force reference implementations and random problem generators,
//! shared by the check suites, the property tests and the acceptance run.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::formula::{cst, var, Atom, BinOp, Expr, Formula, Rel, Var};

/// All points of the grid `ranges` (inclusive) satisfying `phi`, in
/// lexicographic order of `vars`.
pub fn brute_force(phi: &Formula, vars: &[Var], ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut point: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|(lo, hi)| lo > hi) {
        return out;
    }
    loop {
        let env = |x: &Var| vars.iter().position(|v| v == x).map(|i| point[i]);
        if phi.holds(&env).unwrap_or(false) {
            out.push(point.clone());
        }
        let mut i = vars.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if point[i] < ranges[i].1 {
                point[i] += 1;
                break;
            }
            point[i] = ranges[i].0;
        }
    }
}

/// Tight closure of a `2n × 2n` octagonal matrix (`None` is `+∞`) by
/// relaxing every path until nothing changes, then halving unary bounds
/// and combining them. `None` when the octagon has no integer point.
///
/// Input entries are made coherent first (each entry and its mirror take
/// their minimum) and the diagonal is capped at 0.
pub fn octagon_closure_oracle(n: usize, entries: &[Option<i64>]) -> Option<Vec<Option<i64>>> {
    let d = 2 * n;
    let bar = |i: usize| if i.is_multiple_of(2) { i + 1 } else { i - 1 };
    let mut m: Vec<Option<i128>> = vec![None; d * d];
    let lower = |a: Option<i128>, b: Option<i128>| match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    };
    for r in 0..d {
        for c in 0..d {
            let e = entries[r * d + c].map(i128::from);
            let mirror = entries[bar(c) * d + bar(r)].map(i128::from);
            m[r * d + c] = lower(e, mirror);
        }
        m[r * d + r] = lower(m[r * d + r], Some(0));
    }
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..d {
            for k in 0..d {
                let Some(ik) = m[i * d + k] else { continue };
                for j in 0..d {
                    let Some(kj) = m[k * d + j] else { continue };
                    if m[i * d + j].is_none_or(|ij| ik + kj < ij) {
                        m[i * d + j] = Some(ik + kj);
                        changed = true;
                    }
                }
            }
        }
        if (0..d).any(|i| m[i * d + i].is_some_and(|v| v < 0)) {
            return None;
        }
    }
    for i in 0..d {
        if let Some(v) = m[i * d + bar(i)] {
            m[i * d + bar(i)] = Some(2 * v.div_euclid(2));
        }
    }
    let unary: Vec<Option<i128>> = (0..d).map(|i| m[i * d + bar(i)]).collect();
    for i in 0..d {
        for j in 0..d {
            if let (Some(a), Some(b)) = (unary[i], unary[bar(j)]) {
                let v = a.div_euclid(2) + b.div_euclid(2);
                m[i * d + j] = lower(m[i * d + j], Some(v));
            }
        }
    }
    if (0..d).any(|i| m[i * d + i].is_some_and(|v| v < 0)) {
        return None;
    }
    Some(m.into_iter().map(|v| v.map(|x| x as i64)).collect())
}

/// A random `2n × 2n` matrix with entries in `[lo..8]` or `+∞`, mirrored
/// entries equal.
pub fn random_dbm(rng: &mut impl Rng, n: usize, lo: i64) -> Vec<Option<i64>> {
    let d = 2 * n;
    let bar = |i: usize| i ^ 1;
    let mut m = vec![None; d * d];
    for r in 0..d {
        for c in 0..d {
            if r == c {
                m[r * d + c] = Some(0);
                continue;
            }
            let (mr, mc) = (bar(c), bar(r));
            if (mr, mc) < (r, c) {
                m[r * d + c] = m[mr * d + mc];
                continue;
            }
            m[r * d + c] = rng.gen_bool(0.55).then(|| rng.gen_range(lo..=8));
        }
    }
    m
}

pub fn var_names(n: usize) -> Vec<Var> {
    ["x", "y", "z", "w", "v"].iter().take(n).map(Var::new).collect()
}

fn random_rel(rng: &mut impl Rng) -> Rel {
    *[Rel::Le, Rel::Lt, Rel::Ge, Rel::Gt, Rel::Eq, Rel::Neq].choose(rng).unwrap()
}

/// A random expression of depth at most `depth` over `vars` with `+`, `-`,
/// `*` and small constants.
pub fn random_expr(rng: &mut impl Rng, vars: &[Var], depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.4) {
        return if rng.gen_bool(0.75) {
            var(vars.choose(rng).unwrap().name())
        } else {
            cst(rng.gen_range(-3..=8))
        };
    }
    let op = *[BinOp::Add, BinOp::Add, BinOp::Sub, BinOp::Mul].choose(rng).unwrap();
    let l = random_expr(rng, vars, depth - 1);
    let r = random_expr(rng, vars, depth - 1);
    Expr::bin(op, l, r)
}

/// A random atom mentioning at least one variable.
pub fn random_atom(rng: &mut impl Rng, vars: &[Var]) -> Atom {
    loop {
        let left = random_expr(rng, vars, 2);
        let right = if rng.gen_bool(0.6) { cst(rng.gen_range(0..=12)) } else { random_expr(rng, vars, 1) };
        let a = Atom::new(left, random_rel(rng), right);
        if !a.vars().is_empty() {
            return a;
        }
    }
}

/// A random formula built from atoms with `∧`, `∨`, `⇒` and `¬`.
pub fn random_clause(rng: &mut impl Rng, vars: &[Var]) -> Formula {
    let lit = |rng: &mut _| Formula::Atom(random_atom(rng, vars));
    match rng.gen_range(0..6) {
        0 => lit(rng),
        1 => lit(rng).implies(lit(rng)),
        2 => lit(rng).and(lit(rng)).negated(),
        3 => lit(rng).or(lit(rng).and(lit(rng))),
        _ => {
            let k = rng.gen_range(2..=3);
            Formula::any((0..k).map(|_| lit(rng))).unwrap()
        }
    }
}

/// A random unary atom `x ⋈ c`.
pub fn random_unary(rng: &mut impl Rng, vars: &[Var], hi: i64) -> Formula {
    let x = var(vars.choose(rng).unwrap().name());
    let c = rng.gen_range(0..=hi);
    let rel = *[Rel::Le, Rel::Lt, Rel::Ge, Rel::Gt, Rel::Eq].choose(rng).unwrap();
    Formula::atom(x, rel, cst(c))
}

/// A random domain `[lo..hi]` inside `[0..max]`.
pub fn random_range(rng: &mut impl Rng, max: i64) -> (i64, i64) {
    let a = rng.gen_range(0..=max);
    let b = rng.gen_range(0..=max);
    (a.min(b), a.max(b))
}

/// A linear atom `Σ c·v ⋈ k` over all of `vars` with coefficients in
/// `{-1, 1, 2}`, the shape that instantiation and relaxation rewrite.
pub fn random_linear(rng: &mut impl Rng, vars: &[Var], k_max: i64) -> Formula {
    let mut e: Option<Expr> = None;
    for v in vars {
        let c = *[-1i64, 1, 1, 2].choose(rng).unwrap();
        let term = if c == 1 { var(v.name()) } else { cst(c) * var(v.name()) };
        e = Some(match e {
            None => term,
            Some(acc) => acc + term,
        });
    }
    let rel = *[Rel::Le, Rel::Lt, Rel::Ge, Rel::Gt].choose(rng).unwrap();
    Formula::atom(e.expect("at least one variable"), rel, cst(rng.gen_range(0..=k_max)))
}

/// A random octagonal atom `±x ± y ≤ c` over two distinct variables.
pub fn random_octagonal(rng: &mut impl Rng, vars: &[Var]) -> Formula {
    let picked: Vec<&Var> = vars.choose_multiple(rng, 2).collect();
    let sign = |rng: &mut _, v: &Var| {
        if Rng::gen_bool(rng, 0.5) {
            var(v.name())
        } else {
            -var(v.name())
        }
    };
    let l = sign(rng, picked[0]) + sign(rng, picked[1]);
    l.le(rng.gen_range(-3..=6))
}

/// Points as a set, for order-insensitive comparison.
pub fn point_set(points: impl IntoIterator<Item = Vec<i64>>) -> BTreeSet<Vec<i64>> {
    points.into_iter().collect()
}
