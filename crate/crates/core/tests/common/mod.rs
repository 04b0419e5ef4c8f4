#![allow(dead_code)]

use std::collections::BTreeSet;

use num_traits::One;
use omega_cop::eval::evaluate_stationary;
use omega_cop::graph::Support;
use omega_cop::model::{Acceptance, LabeledMdp, Letter, Row};
use omega_cop::rational::rat;
use omega_cop::synthesis::StationaryPolicy;
use omega_cop::{ProductMdp, Rat};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random product given at MDP level: up to `max_states` states, two
/// actions, rows with up to three successors and small denominators.
pub fn random_product(seed: u64, max_states: usize) -> ProductMdp {
    random_product_relabeled(seed, max_states, None)
}

/// Same instance as [`random_product`], with states renamed by a random
/// permutation drawn from `perm_seed`.
pub fn random_product_relabeled(
    seed: u64,
    max_states: usize,
    perm_seed: Option<u64>,
) -> ProductMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_states);
    let mut kernel = Vec::with_capacity(n);
    for _ in 0..n {
        let mut rows: Vec<Option<Vec<(usize, Rat)>>> = vec![None, None];
        let enabled: Vec<usize> = match rng.gen_range(0..4) {
            0 => vec![0],
            1 => vec![1],
            _ => vec![0, 1],
        };
        for a in enabled {
            let k = rng.gen_range(1..=3.min(n));
            let mut succ: Vec<usize> = Vec::new();
            while succ.len() < k {
                let t = rng.gen_range(0..n);
                if !succ.contains(&t) {
                    succ.push(t);
                }
            }
            let weights: Vec<i64> = succ.iter().map(|_| rng.gen_range(1..=3)).collect();
            let total: i64 = weights.iter().sum();
            rows[a] = Some(
                succ.into_iter()
                    .zip(weights)
                    .map(|(t, w)| (t, rat(w, total)))
                    .collect(),
            );
        }
        kernel.push(rows);
    }
    let acceptance = |rng: &mut ChaCha8Rng| -> Vec<(Vec<usize>, Vec<usize>)> {
        let pairs = rng.gen_range(1..=2);
        (0..pairs)
            .map(|_| {
                let inf: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
                let fin: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.2)).collect();
                (inf, fin)
            })
            .collect()
    };
    let mut obj = acceptance(&mut rng);
    let mut con = acceptance(&mut rng);
    let mut perm: Vec<usize> = (0..n).collect();
    if let Some(ps) = perm_seed {
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(ps));
    }
    // state i becomes perm[i]
    let mut relabeled: Vec<Vec<Option<Row>>> = vec![Vec::new(); n];
    for (i, rows) in kernel.into_iter().enumerate() {
        relabeled[perm[i]] = rows
            .into_iter()
            .map(|r| r.map(|r| r.into_iter().map(|(t, p)| (perm[t], p)).collect()))
            .collect();
    }
    for pairs in [&mut obj, &mut con] {
        for (inf, fin) in pairs.iter_mut() {
            for v in inf.iter_mut().chain(fin.iter_mut()) {
                *v = perm[*v];
            }
        }
    }
    let mdp = LabeledMdp::new(
        vec![],
        (0..n).map(|i| format!("s{i}")).collect(),
        perm[0],
        vec!["a".into(), "b".into()],
        vec![Letter::EMPTY; n],
        relabeled,
    );
    ProductMdp::synthetic(mdp, Acceptance::mdp_level(obj), Acceptance::mdp_level(con))
        .expect("random product builds")
}

/// Maximal ECs by exhaustive subset search: for each state set `T` the
/// largest action assignment keeping runs inside `T` is unique, so the
/// maximal ECs are the inclusion-maximal sets that form an EC.
pub fn brute_force_mecs(support: &Support) -> Vec<BTreeSet<usize>> {
    let n = support.num_states();
    let mut ecs: Vec<BTreeSet<usize>> = Vec::new();
    for mask in 1u32..(1 << n) {
        let t: BTreeSet<usize> = (0..n).filter(|v| mask >> v & 1 == 1).collect();
        let act: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                support.succ[v]
                    .iter()
                    .filter(|(_, succ)| succ.iter().all(|s| t.contains(s)))
                    .map(|(a, _)| *a)
                    .collect()
            })
            .collect();
        if t.iter().any(|&v| act[v].is_empty()) {
            continue;
        }
        // strongly connected under the kept actions
        let reach = |from: usize| {
            let mut seen = BTreeSet::from([from]);
            let mut stack = vec![from];
            while let Some(v) = stack.pop() {
                for &a in &act[v] {
                    for &s in support.successors(v, a).unwrap() {
                        if seen.insert(s) {
                            stack.push(s);
                        }
                    }
                }
            }
            seen
        };
        if t.iter().all(|&v| reach(v) == t) {
            ecs.push(t);
        }
    }
    let mut maximal: Vec<BTreeSet<usize>> = ecs
        .iter()
        .filter(|t| !ecs.iter().any(|u| u != *t && t.is_subset(u)))
        .cloned()
        .collect();
    maximal.sort();
    maximal
}

/// Deterministic stationary policy from one action index per state
/// (`choice[v]` is reduced modulo the number of enabled actions).
pub fn deterministic(product: &ProductMdp, choice: &[usize]) -> StationaryPolicy {
    let rows = (0..product.num_states())
        .map(|v| {
            let acts = product.enabled_actions(v);
            vec![(acts[choice[v] % acts.len()], Rat::one())]
        })
        .collect();
    StationaryPolicy::new(product, rows).unwrap()
}

/// All deterministic stationary policies (product of enabled-action counts).
pub fn all_deterministic(product: &ProductMdp) -> Vec<StationaryPolicy> {
    let counts: Vec<usize> = (0..product.num_states())
        .map(|v| product.enabled_actions(v).len())
        .collect();
    let mut out = Vec::new();
    let mut choice = vec![0; counts.len()];
    loop {
        out.push(deterministic(product, &choice));
        let mut i = 0;
        loop {
            if i == counts.len() {
                return out;
            }
            choice[i] += 1;
            if choice[i] < counts[i] {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Exact `(objective, constraint)` of a stationary policy.
pub fn values(product: &ProductMdp, pi: &StationaryPolicy) -> (Rat, Rat) {
    let r = evaluate_stationary(product, pi).unwrap();
    (r.objective, r.constraint)
}

/// Best objective over all mixtures of two deterministic policies with
/// weights in `{0, 1/4, 1/2, 3/4, 1}` that meet the threshold, or `None`.
pub fn grid_optimum(product: &ProductMdp, p: &Rat) -> Option<Rat> {
    let vals: Vec<(Rat, Rat)> = all_deterministic(product)
        .iter()
        .map(|pi| values(product, pi))
        .collect();
    let weights: Vec<Rat> = (0..=4).map(|k| rat(k, 4)).collect();
    let mut best: Option<Rat> = None;
    for (o1, c1) in &vals {
        for (o2, c2) in &vals {
            for w in &weights {
                let mu = Rat::one() - w;
                let c = w * c1 + &mu * c2;
                if c >= *p {
                    let o = w * o1 + &mu * o2;
                    if best.as_ref().is_none_or(|b| o > *b) {
                        best = Some(o);
                    }
                }
            }
        }
    }
    best
}

/// Standard-form optimum by enumerating every basis in floating point.
/// `None` when no basis is feasible.
pub fn basis_enumeration(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let m = a.len();
    let n = c.len();
    if m > n {
        return None;
    }
    let mut best: Option<f64> = None;
    let mut cols: Vec<usize> = (0..m).collect();
    loop {
        if let Some(x) = solve_f64(a, b, &cols) {
            if x.iter().all(|v| *v >= -1e-9) {
                let val: f64 = cols.iter().zip(&x).map(|(&j, v)| c[j] * v).sum();
                if best.is_none_or(|bv| val > bv) {
                    best = Some(val);
                }
            }
        }
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if cols[i] < n - m + i {
                cols[i] += 1;
                for k in i + 1..m {
                    cols[k] = cols[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn solve_f64(a: &[Vec<f64>], b: &[f64], cols: &[usize]) -> Option<Vec<f64>> {
    let m = a.len();
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = cols.iter().map(|&j| a[i][j]).collect();
            row.push(b[i]);
            row
        })
        .collect();
    for p in 0..m {
        let piv = (p..m).max_by(|&x, &y| t[x][p].abs().partial_cmp(&t[y][p].abs()).unwrap())?;
        if t[piv][p].abs() < 1e-10 {
            return None;
        }
        t.swap(p, piv);
        let pivot = t[p].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != p {
                let f = row[p] / pivot[p];
                for (x, y) in row[p..].iter_mut().zip(&pivot[p..]) {
                    *x -= f * y;
                }
            }
        }
    }
    Some((0..m).map(|i| t[i][m] / t[i][i]).collect())
}
