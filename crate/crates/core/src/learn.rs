//! Model-based learning: uniform exploration with periodic resets,
//! empirical models, replanning and convergence tracking against the true
//! model.

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{evaluate_mixture, pick};
use crate::graph::decompose;
use crate::lp;
use crate::model::{build_product, LabeledMdp, ProductMdp, RabinAutomaton};
use crate::rational::{to_f64, Rat};
use crate::synthesis::{plan, policy_from_point, MixturePolicy, StationaryPolicy};

/// Sampling access to the true MDP.
pub struct Simulator<'a> {
    mdp: &'a LabeledMdp,
    rows: Vec<Vec<Vec<(usize, f64)>>>,
    enabled: Vec<Vec<usize>>,
    state: usize,
    rng: ChaCha8Rng,
}

impl<'a> Simulator<'a> {
    pub fn new(mdp: &'a LabeledMdp, seed: u64) -> Self {
        let rows = (0..mdp.num_states())
            .map(|s| {
                (0..mdp.num_actions())
                    .map(|a| {
                        mdp.row(s, a).map_or_else(Vec::new, |r| {
                            r.iter().map(|(t, p)| (*t, to_f64(p))).collect()
                        })
                    })
                    .collect()
            })
            .collect();
        let enabled = (0..mdp.num_states())
            .map(|s| mdp.enabled_actions(s))
            .collect();
        Simulator {
            mdp,
            rows,
            enabled,
            state: mdp.initial(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn reset(&mut self) {
        self.state = self.mdp.initial();
    }

    pub fn enabled(&self, s: usize) -> &[usize] {
        &self.enabled[s]
    }

    /// Plays `a` and returns the successor.
    pub fn step(&mut self, a: usize) -> usize {
        let next = pick(&mut self.rng, &self.rows[self.state][a]);
        self.state = next;
        next
    }

    pub fn uniform_action(&mut self) -> usize {
        let acts = &self.enabled[self.state];
        acts[self.rng.gen_range(0..acts.len())]
    }
}

/// Transition counts `N(s,a)`, `N(s,a,s')`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmpiricalModel {
    counts: Vec<Vec<Vec<u64>>>,
    totals: Vec<Vec<u64>>,
    enabled: Vec<Vec<bool>>,
    steps: u64,
}

impl EmpiricalModel {
    pub fn new(mdp: &LabeledMdp) -> Self {
        let (n, m) = (mdp.num_states(), mdp.num_actions());
        EmpiricalModel {
            counts: vec![vec![vec![0; n]; m]; n],
            totals: vec![vec![0; m]; n],
            enabled: (0..n)
                .map(|s| (0..m).map(|a| mdp.row(s, a).is_some()).collect())
                .collect(),
            steps: 0,
        }
    }

    pub fn record(&mut self, s: usize, a: usize, t: usize) {
        self.counts[s][a][t] += 1;
        self.totals[s][a] += 1;
        self.steps += 1;
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.totals[s][a]
    }

    pub fn count(&self, s: usize, a: usize, t: usize) -> u64 {
        self.counts[s][a][t]
    }

    /// Every enabled state–action pair has been tried.
    pub fn covered(&self) -> bool {
        self.enabled
            .iter()
            .zip(&self.totals)
            .all(|(en, tot)| en.iter().zip(tot).all(|(e, n)| !e || *n > 0))
    }

    /// `N(s,a,s') / N(s,a)`; `None` before `(s,a)` has been visited.
    pub fn estimate_row(&self, s: usize, a: usize) -> Option<Vec<(usize, Rat)>> {
        let n = self.totals[s][a];
        (n > 0).then(|| {
            self.counts[s][a]
                .iter()
                .enumerate()
                .filter(|(_, c)| **c > 0)
                .map(|(t, c)| (t, Rat::new((*c).into(), n.into())))
                .collect()
        })
    }

    /// Estimate MDP sharing states, actions and labels with `truth`;
    /// requires coverage.
    pub fn estimate(&self, truth: &LabeledMdp) -> Option<LabeledMdp> {
        if !self.covered() {
            return None;
        }
        let kernel = (0..truth.num_states())
            .map(|s| {
                (0..truth.num_actions())
                    .map(|a| self.estimate_row(s, a))
                    .collect()
            })
            .collect();
        Some(truth.with_kernel(kernel))
    }

    /// Largest `|P̂ - P|` over all visited rows.
    pub fn linf_error(&self, truth: &LabeledMdp) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..truth.num_states() {
            for (a, row) in truth.enabled(s) {
                let n = self.totals[s][a];
                if n == 0 {
                    continue;
                }
                let mut exact = vec![0.0; truth.num_states()];
                for (t, p) in row {
                    exact[*t] = to_f64(p);
                }
                for (t, e) in exact.iter().enumerate() {
                    worst = worst.max((self.counts[s][a][t] as f64 / n as f64 - e).abs());
                }
            }
        }
        worst
    }
}

/// Uniform-random exploration for `steps` steps, resetting to the initial
/// state every `reset_period` steps.
pub fn explore(
    sim: &mut Simulator<'_>,
    model: &mut EmpiricalModel,
    steps: u64,
    reset_period: u64,
) -> Result<()> {
    if reset_period == 0 {
        return Err(Error::Precondition(
            "reset period must be at least 1".into(),
        ));
    }
    for _ in 0..steps {
        if model.steps > 0 && model.steps.is_multiple_of(reset_period) {
            sim.reset();
        }
        let s = sim.state();
        let a = sim.uniform_action();
        let t = sim.step(a);
        model.record(s, a, t);
    }
    Ok(())
}

/// `sqrt(ln(2·pairs·|S|/δ) / (2N))`, or 1 when `N = 0`.
pub fn hoeffding_radius(n: u64, delta: f64, pairs: usize, states: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    ((2.0 * pairs as f64 * states as f64 / delta).ln() / (2.0 * n as f64))
        .sqrt()
        .min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanStatus {
    Optimal,
    /// The estimate was infeasible; the policy maximises the constraint.
    Fallback,
    /// Not every state–action pair has been visited yet.
    Uncovered,
}

impl PlanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanStatus::Optimal => "optimal",
            PlanStatus::Fallback => "fallback",
            PlanStatus::Uncovered => "uncovered",
        }
    }
}

/// Plans on `product`; an infeasible program falls back to maximising the
/// constraint probability alone.
pub fn replan(product: &ProductMdp, p: &Rat) -> Result<(MixturePolicy, PlanStatus)> {
    match plan(product, p) {
        Ok(pl) => Ok((pl.policy, PlanStatus::Optimal)),
        Err(Error::Infeasible) => {
            let dec = decompose(product);
            let lp = lp::build_weighted(&dec, product, &Rat::zero(), &Rat::from_integer(1.into()));
            let sol = lp::solve(&lp)?;
            let d = lp::decompose(&lp, &sol.x)?;
            let pi = policy_from_point(&lp, &d.first, &dec, product)?;
            Ok((MixturePolicy::pure(pi), PlanStatus::Fallback))
        }
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub seed: u64,
    pub k: u64,
    /// `max(0, p - P[constraint])` of the learned policy on the true model.
    pub eps_constraint: f64,
    /// `q* - P[objective]`; negative when the learned policy trades
    /// constraint for objective.
    pub eps_suboptimality: f64,
    pub status: PlanStatus,
}

#[derive(Clone, Debug)]
pub struct Experiment<'a> {
    pub mdp: &'a LabeledMdp,
    pub objective: &'a RabinAutomaton,
    pub constraint: &'a RabinAutomaton,
    pub threshold: Rat,
    pub schedule: Vec<u64>,
    pub reset_period: u64,
}

/// `2^lo, …, 2^hi`.
pub fn doubling_schedule(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|e| 1u64 << e).collect()
}

impl Experiment<'_> {
    fn run_seed(
        &self,
        truth: &ProductMdp,
        optimum: &Rat,
        seed: u64,
    ) -> Result<Vec<ConvergenceRecord>> {
        let mut sim = Simulator::new(self.mdp, seed);
        let mut model = EmpiricalModel::new(self.mdp);
        let mut out = Vec::with_capacity(self.schedule.len());
        let mut schedule = self.schedule.clone();
        schedule.sort_unstable();
        schedule.dedup();
        for &k in &schedule {
            let todo = k - model.steps();
            explore(&mut sim, &mut model, todo, self.reset_period)?;
            let (policy, status) = match model.estimate(self.mdp) {
                None => (
                    MixturePolicy::pure(StationaryPolicy::uniform(truth)),
                    PlanStatus::Uncovered,
                ),
                Some(est) => {
                    let est_product = build_product(&est, self.objective, self.constraint)?;
                    let (pi, status) = replan(&est_product, &self.threshold)?;
                    (pi.transfer(&est_product, truth), status)
                }
            };
            let report = evaluate_mixture(truth, &policy)?;
            let violation = &self.threshold - &report.constraint;
            out.push(ConvergenceRecord {
                seed,
                k,
                eps_constraint: if violation.is_positive() {
                    to_f64(&violation)
                } else {
                    0.0
                },
                eps_suboptimality: to_f64(&(optimum - &report.objective)),
                status,
            });
        }
        Ok(out)
    }

    /// Records for every seed, in seed order then schedule order.
    pub fn run(&self, seeds: &[u64]) -> Result<Vec<ConvergenceRecord>> {
        if self.schedule.contains(&0) {
            return Err(Error::Precondition(
                "schedule entries must be positive".into(),
            ));
        }
        let truth = build_product(self.mdp, self.objective, self.constraint)?;
        let optimum = plan(&truth, &self.threshold)?.solution.value;
        let per_seed: Vec<Result<Vec<ConvergenceRecord>>> = seeds
            .par_iter()
            .map(|&s| self.run_seed(&truth, &optimum, s))
            .collect();
        let mut out = Vec::new();
        for r in per_seed {
            out.extend(r?);
        }
        Ok(out)
    }
}

pub const CSV_HEADER: &str = "seed,k,eps_constraint,eps_suboptimality,status";

pub fn to_csv(records: &[ConvergenceRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format!(
            "{},{},{:.6},{:.6},{}\n",
            r.seed,
            r.k,
            r.eps_constraint,
            r.eps_suboptimality,
            r.status.as_str()
        ));
    }
    s
}

/// Median per checkpoint `k` of the selected column.
pub fn median_at(
    records: &[ConvergenceRecord],
    k: u64,
    column: fn(&ConvergenceRecord) -> f64,
) -> Option<f64> {
    let mut v: Vec<f64> = records.iter().filter(|r| r.k == k).map(column).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::decompose;
    use crate::rational::rat;

    #[test]
    fn fig2_exploration_covers_all_pairs() {
        let f = fixtures::fig2();
        let mut sim = Simulator::new(&f.mdp, 1);
        let mut model = EmpiricalModel::new(&f.mdp);
        explore(&mut sim, &mut model, 100, 10).unwrap();
        assert!(model.covered());
        assert_eq!(f.mdp.num_pairs(), 4);
    }

    #[test]
    fn fig1_rows_converge() {
        let f = fixtures::fig1();
        let mut sim = Simulator::new(&f.mdp, 2);
        let mut model = EmpiricalModel::new(&f.mdp);
        explore(&mut sim, &mut model, 10_000, 10).unwrap();
        assert!(model.linf_error(&f.mdp) <= 0.05);
        let est = model.estimate(&f.mdp).unwrap();
        assert!(est.validate().is_valid());
    }

    #[test]
    fn radius_properties() {
        assert_eq!(hoeffding_radius(0, 0.05, 3, 2), 1.0);
        let r = hoeffding_radius(200, 0.05, 2, 2);
        assert!((r - 0.11263).abs() < 1e-4, "{r}");
        assert!(hoeffding_radius(10, 0.05, 3, 2) > hoeffding_radius(11, 0.05, 3, 2));
    }

    #[test]
    fn exact_estimate_replans_to_truth() {
        let f = fixtures::fig1();
        let (pi, status) = replan(&f.product, &f.threshold).unwrap();
        assert_eq!(status, PlanStatus::Optimal);
        assert_eq!(
            evaluate_mixture(&f.product, &pi).unwrap().objective,
            rat(21, 40)
        );
    }

    #[test]
    fn infeasible_estimate_falls_back() {
        // an estimate that never saw s0 --b--> s2 leaves only the unsafe
        // outcome behind b and the constraint can reach at most 1/2 + ...
        let f = fixtures::fig1();
        let mut kernel: Vec<Vec<Option<crate::model::Row>>> = (0..f.mdp.num_states())
            .map(|s| {
                (0..f.mdp.num_actions())
                    .map(|a| f.mdp.row(s, a).cloned())
                    .collect()
            })
            .collect();
        kernel[0][1] = Some(vec![(3, rat(1, 1))]);
        kernel[0][0] = Some(vec![(2, rat(1, 2)), (3, rat(1, 2))]);
        let est = f.mdp.with_kernel(kernel);
        let product = build_product(&est, &f.objective, &f.constraint).unwrap();
        let (pi, status) = replan(&product, &f.threshold).unwrap();
        assert_eq!(status, PlanStatus::Fallback);
        let r = evaluate_mixture(&product, &pi).unwrap();
        assert_eq!(r.constraint, rat(1, 2));
    }

    #[test]
    fn deterministic_model_is_exact_once_covered() {
        let f = fixtures::fig2();
        let exp = Experiment {
            mdp: &f.mdp,
            objective: &f.objective,
            constraint: &f.constraint,
            threshold: f.threshold.clone(),
            schedule: vec![64, 128],
            reset_period: 10,
        };
        let recs = exp.run(&[5]).unwrap();
        for r in &recs {
            assert_eq!(r.status, PlanStatus::Optimal);
            assert_eq!(r.eps_constraint, 0.0);
            assert_eq!(r.eps_suboptimality, 0.0);
        }
    }

    #[test]
    fn csv_format() {
        let recs = vec![ConvergenceRecord {
            seed: 3,
            k: 256,
            eps_constraint: 0.0,
            eps_suboptimality: -0.125,
            status: PlanStatus::Fallback,
        }];
        assert_eq!(
            to_csv(&recs),
            format!("{CSV_HEADER}\n3,256,0.000000,-0.125000,fallback\n")
        );
        assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn graphs_agree_when_estimate_is_close() {
        let f = fixtures::fig1();
        let mut sim = Simulator::new(&f.mdp, 9);
        let mut model = EmpiricalModel::new(&f.mdp);
        explore(&mut sim, &mut model, 20_000, 10).unwrap();
        let est = build_product(
            &model.estimate(&f.mdp).unwrap(),
            &f.objective,
            &f.constraint,
        )
        .unwrap();
        assert_eq!(decompose(&est).mecs, decompose(&f.product).mecs);
    }
}
