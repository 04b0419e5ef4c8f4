//! Exact evaluation of stationary and mixture policies through the induced
//! Markov chain, plus a Monte Carlo cross-check.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graph::tarjan;
use crate::linalg;
use crate::model::ProductMdp;
use crate::rational::{fmt_rat, to_f64, Rat};
use crate::synthesis::{MixturePolicy, StationaryPolicy};
use crate::Side;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bscc {
    pub states: Vec<usize>,
    pub objective: bool,
    pub constraint: bool,
    /// Probability of being absorbed here from the initial state.
    pub probability: Rat,
}

impl Bscc {
    pub fn class(&self) -> &'static str {
        match (self.objective, self.constraint) {
            (true, true) => "both",
            (true, false) => "objective",
            (false, true) => "constraint",
            (false, false) => "neither",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvaluationReport {
    pub objective: Rat,
    pub constraint: Rat,
    pub bsccs: Vec<Bscc>,
}

impl EvaluationReport {
    pub fn value(&self, side: Side) -> &Rat {
        match side {
            Side::Objective => &self.objective,
            Side::Constraint => &self.constraint,
        }
    }

    pub fn to_json(&self, product: &ProductMdp) -> Value {
        let bsccs: Vec<Value> = self
            .bsccs
            .iter()
            .map(|b| {
                json!({
                    "states": b.states.iter().map(|&v| product.name(v)).collect::<Vec<_>>(),
                    "class": b.class(),
                    "probability": fmt_rat(&b.probability),
                })
            })
            .collect();
        json!({
            "objective": fmt_rat(&self.objective),
            "constraint": fmt_rat(&self.constraint),
            "bsccs": bsccs,
        })
    }
}

/// Sparse rows of the chain induced by `policy`.
fn induced_chain(
    product: &ProductMdp,
    policy: &StationaryPolicy,
) -> Result<Vec<Vec<(usize, Rat)>>> {
    if policy.num_states() != product.num_states() {
        return Err(Error::Policy("policy does not cover the product".into()));
    }
    let mut chain = Vec::with_capacity(product.num_states());
    for v in 0..product.num_states() {
        let mut acc: std::collections::BTreeMap<usize, Rat> = Default::default();
        for (a, pa) in policy.row(v) {
            let row = product
                .row(v, *a)
                .ok_or_else(|| Error::Policy(format!("disabled action at {}", product.name(v))))?;
            for (t, p) in row {
                *acc.entry(*t).or_insert_with(Rat::zero) += pa * p;
            }
        }
        if acc.is_empty() {
            return Err(Error::Policy(format!("no row for {}", product.name(v))));
        }
        chain.push(acc.into_iter().collect());
    }
    Ok(chain)
}

pub fn evaluate_stationary(
    product: &ProductMdp,
    policy: &StationaryPolicy,
) -> Result<EvaluationReport> {
    let chain = induced_chain(product, policy)?;
    let n = chain.len();
    // restrict to the part reachable from the initial state
    let mut reach = vec![false; n];
    let mut stack = vec![product.initial()];
    reach[product.initial()] = true;
    while let Some(v) = stack.pop() {
        for (t, _) in &chain[v] {
            if !reach[*t] {
                reach[*t] = true;
                stack.push(*t);
            }
        }
    }
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            if reach[v] {
                chain[v].iter().map(|(t, _)| *t).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    let (comp, comps) = tarjan(&adj);
    let mut bottom_of = vec![None; n];
    let mut bsccs = Vec::new();
    for (c, states) in comps.iter().enumerate() {
        if !reach[states[0]] {
            continue;
        }
        if states
            .iter()
            .all(|&v| chain[v].iter().all(|(t, _)| comp[*t] == c))
        {
            for &v in states {
                bottom_of[v] = Some(bsccs.len());
            }
            let sts = states.iter().map(|&v| product.state(v));
            bsccs.push(Bscc {
                states: states.clone(),
                objective: product.acceptance(Side::Objective).accepts(sts.clone()),
                constraint: product.acceptance(Side::Constraint).accepts(sts),
                probability: Rat::zero(),
            });
        }
    }
    if let Some(b) = bottom_of[product.initial()] {
        bsccs[b].probability = Rat::one();
    } else {
        // absorption probabilities: (I - Q) X = R over transient states
        let transient: Vec<usize> = (0..n)
            .filter(|&v| reach[v] && bottom_of[v].is_none())
            .collect();
        let mut pos = vec![usize::MAX; n];
        for (i, &v) in transient.iter().enumerate() {
            pos[v] = i;
        }
        let m = transient.len();
        let k = bsccs.len();
        let mut a = vec![vec![Rat::zero(); m]; m];
        let mut r = vec![vec![Rat::zero(); k]; m];
        for (i, &v) in transient.iter().enumerate() {
            a[i][i] += Rat::one();
            for (t, p) in &chain[v] {
                match bottom_of[*t] {
                    Some(b) => r[i][b] += p,
                    None => a[i][pos[*t]] -= p,
                }
            }
        }
        let x = linalg::solve(&a, &r).expect("transient block of a finite chain is nonsingular");
        let i0 = pos[product.initial()];
        for (b, bscc) in bsccs.iter_mut().enumerate() {
            bscc.probability = x[i0][b].clone();
        }
    }
    let sum = |f: fn(&Bscc) -> bool| {
        bsccs
            .iter()
            .filter(|b| f(b))
            .map(|b| b.probability.clone())
            .sum::<Rat>()
    };
    Ok(EvaluationReport {
        objective: sum(|b| b.objective),
        constraint: sum(|b| b.constraint),
        bsccs,
    })
}

/// `λ · report(first) + (1-λ) · report(second)`; BSCC masses are combined
/// per state set.
pub fn evaluate_mixture(product: &ProductMdp, m: &MixturePolicy) -> Result<EvaluationReport> {
    let r1 = evaluate_stationary(product, &m.first)?;
    if m.lambda.is_one() {
        return Ok(r1);
    }
    let r2 = evaluate_stationary(product, &m.second)?;
    if m.lambda.is_zero() {
        return Ok(r2);
    }
    let mu = Rat::one() - &m.lambda;
    let mut bsccs: Vec<Bscc> = Vec::new();
    for (b, w) in r1
        .bsccs
        .iter()
        .map(|b| (b, &m.lambda))
        .chain(r2.bsccs.iter().map(|b| (b, &mu)))
    {
        let mass = &b.probability * w;
        match bsccs.iter_mut().find(|x| x.states == b.states) {
            Some(x) => x.probability += mass,
            None => bsccs.push(Bscc {
                probability: mass,
                ..b.clone()
            }),
        }
    }
    bsccs.retain(|b| !b.probability.is_zero());
    bsccs.sort_by(|a, b| a.states.cmp(&b.states));
    Ok(EvaluationReport {
        objective: &m.lambda * &r1.objective + &mu * &r2.objective,
        constraint: &m.lambda * &r1.constraint + &mu * &r2.constraint,
        bsccs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Half-width of the 95% normal-approximation interval.
    pub half_width: f64,
}

impl Estimate {
    fn from_hits(hits: usize, n: usize) -> Self {
        let mean = hits as f64 / n as f64;
        Estimate {
            mean,
            half_width: 1.96 * (mean * (1.0 - mean) / n as f64).sqrt(),
        }
    }

    pub fn covers(&self, x: f64) -> bool {
        (self.mean - x).abs() <= self.half_width + 1e-12
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloReport {
    pub objective: Estimate,
    pub constraint: Estimate,
    pub episodes: usize,
    pub horizon: usize,
}

impl MonteCarloReport {
    pub fn to_json(&self) -> Value {
        json!({
            "objective": { "estimate": self.objective.mean, "half_width": self.objective.half_width },
            "constraint": { "estimate": self.constraint.mean, "half_width": self.constraint.half_width },
            "episodes": self.episodes,
            "horizon": self.horizon,
            "method": "heuristic: acceptance of the states visited in the second half of each episode",
        })
    }
}

/// Floating-point sampler for one stationary policy.
pub(crate) struct Sampler {
    actions: Vec<Vec<(usize, f64)>>,
    succ: Vec<Vec<Vec<(usize, f64)>>>,
}

pub(crate) fn pick<R: Rng>(rng: &mut R, dist: &[(usize, f64)]) -> usize {
    let mut u: f64 = rng.gen();
    for (x, p) in dist {
        if u < *p {
            return *x;
        }
        u -= p;
    }
    dist.last().expect("nonempty distribution").0
}

impl Sampler {
    pub(crate) fn new(product: &ProductMdp, policy: &StationaryPolicy) -> Self {
        let conv =
            |row: &[(usize, Rat)]| row.iter().map(|(x, p)| (*x, to_f64(p))).collect::<Vec<_>>();
        Sampler {
            actions: (0..product.num_states())
                .map(|v| conv(policy.row(v)))
                .collect(),
            succ: (0..product.num_states())
                .map(|v| {
                    (0..product.num_actions())
                        .map(|a| product.row(v, a).map(|r| conv(r)).unwrap_or_default())
                        .collect()
                })
                .collect(),
        }
    }

    pub(crate) fn step<R: Rng>(&self, rng: &mut R, v: usize) -> usize {
        let a = pick(rng, &self.actions[v]);
        pick(rng, &self.succ[v][a])
    }

    pub(crate) fn action<R: Rng>(&self, rng: &mut R, v: usize) -> usize {
        pick(rng, &self.actions[v])
    }
}

/// Simulates `episodes` runs of length `horizon`. Episode `i` draws from the
/// ChaCha stream `i` of `seed`, so results do not depend on scheduling.
pub fn monte_carlo(
    product: &ProductMdp,
    policy: &MixturePolicy,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if horizon < 2 {
        return Err(Error::Precondition("horizon must be at least 2".into()));
    }
    if episodes == 0 {
        return Err(Error::Precondition("need at least one episode".into()));
    }
    let s1 = Sampler::new(product, &policy.first);
    let s2 = Sampler::new(product, &policy.second);
    let lambda = to_f64(&policy.lambda);
    let (hits_a, hits_b) = (0..episodes)
        .into_par_iter()
        .map(|ep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ep as u64);
            let sampler = if rng.gen::<f64>() < lambda { &s1 } else { &s2 };
            let mut v = product.initial();
            let mut seen = vec![false; product.num_states()];
            for t in 0..horizon {
                if t >= horizon / 2 {
                    seen[v] = true;
                }
                v = sampler.step(&mut rng, v);
            }
            let tail: Vec<_> = (0..seen.len())
                .filter(|&u| seen[u])
                .map(|u| product.state(u))
                .collect();
            let a = product
                .acceptance(Side::Objective)
                .accepts(tail.iter().copied());
            let b = product
                .acceptance(Side::Constraint)
                .accepts(tail.iter().copied());
            (a as usize, b as usize)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    Ok(MonteCarloReport {
        objective: Estimate::from_hits(hits_a, episodes),
        constraint: Estimate::from_hits(hits_b, episodes),
        episodes,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::rat;
    use crate::synthesis::plan;

    fn constant(product: &ProductMdp, a: usize) -> StationaryPolicy {
        let rows = (0..product.num_states())
            .map(|_| vec![(a, Rat::one())])
            .collect();
        StationaryPolicy::new(product, rows).unwrap()
    }

    #[test]
    fn fig1_constant_policies() {
        let f = fixtures::fig1();
        let ra = evaluate_stationary(&f.product, &constant(&f.product, 0)).unwrap();
        assert_eq!((ra.objective, ra.constraint), (rat(1, 2), rat(1, 1)));
        let rb = evaluate_stationary(&f.product, &constant(&f.product, 1)).unwrap();
        assert_eq!((rb.objective, rb.constraint), (rat(3, 5), rat(3, 5)));
    }

    #[test]
    fn fig3_mixture_values() {
        let f = fixtures::fig3();
        let p = plan(&f.product, &rat(9, 10)).unwrap();
        let r = evaluate_mixture(&f.product, &p.policy).unwrap();
        assert_eq!((r.objective, r.constraint), (rat(3, 10), rat(9, 10)));
        let total: Rat = r.bsccs.iter().map(|b| b.probability.clone()).sum();
        assert!(total.is_one());
    }

    #[test]
    fn fig1_optimum() {
        let f = fixtures::fig1();
        let p = plan(&f.product, &f.threshold).unwrap();
        assert_eq!(p.solution.value, rat(21, 40));
        let r = evaluate_mixture(&f.product, &p.policy).unwrap();
        assert_eq!((r.objective, r.constraint), (rat(21, 40), rat(9, 10)));
    }

    #[test]
    fn fig2_outperforms_stationary() {
        let f = fixtures::fig2();
        let p = plan(&f.product, &f.threshold).unwrap();
        let r = evaluate_mixture(&f.product, &p.policy).unwrap();
        assert_eq!((r.objective, r.constraint), (rat(1, 10), rat(9, 10)));
    }

    #[test]
    fn lambda_one_is_first_component() {
        let f = fixtures::fig1();
        let pi = constant(&f.product, 1);
        let m = MixturePolicy::new(Rat::one(), pi.clone(), constant(&f.product, 0)).unwrap();
        assert_eq!(
            evaluate_mixture(&f.product, &m).unwrap(),
            evaluate_stationary(&f.product, &pi).unwrap()
        );
    }

    #[test]
    fn monte_carlo_fig1_always_a() {
        let f = fixtures::fig1();
        let m = MixturePolicy::pure(constant(&f.product, 0));
        let r = monte_carlo(&f.product, &m, 10_000, 100, 7).unwrap();
        assert!(r.objective.covers(0.5), "{:?}", r.objective);
        assert_eq!(r.constraint.mean, 1.0);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_checks_horizon() {
        let f = fixtures::fig3();
        let p = plan(&f.product, &rat(9, 10)).unwrap();
        let a = monte_carlo(&f.product, &p.policy, 500, 50, 3).unwrap();
        let b = monte_carlo(&f.product, &p.policy, 500, 50, 3).unwrap();
        assert_eq!(a, b);
        assert!(monte_carlo(&f.product, &p.policy, 10, 1, 3).is_err());
    }

    #[test]
    fn report_json_uses_fraction_strings() {
        let f = fixtures::fig1();
        let r = evaluate_stationary(&f.product, &constant(&f.product, 1)).unwrap();
        let j = r.to_json(&f.product);
        assert_eq!(j["objective"], "3/5");
        assert!(j["bsccs"].as_array().unwrap().len() >= 2);
    }
}
