//! Policies built from LP points: stationary policies, two-component
//! mixtures and the single-MEC shortcut.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::graph::{decompose as mec_decomposition, EndComponent, MecDecomposition};
use crate::lp::{self, ConstrainedLp, Decomposition, LpSolution, LpVar};
use crate::model::{PolicyMemoryKernel, ProductMdp};
use crate::rational::{fmt_rat, is_prob, parse_rat, Rat};
use crate::Side;

/// Memoryless randomised policy on product states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StationaryPolicy {
    rows: Vec<Vec<(usize, Rat)>>,
}

fn uniform_over(actions: impl IntoIterator<Item = usize>) -> Vec<(usize, Rat)> {
    let acts: Vec<usize> = actions.into_iter().collect();
    let p = Rat::new(1.into(), (acts.len() as i64).into());
    acts.into_iter().map(|a| (a, p.clone())).collect()
}

impl StationaryPolicy {
    /// Checks that every row is a distribution over enabled actions.
    pub fn new(product: &ProductMdp, rows: Vec<Vec<(usize, Rat)>>) -> Result<Self> {
        if rows.len() != product.num_states() {
            return Err(Error::Policy(format!(
                "policy has {} rows, product has {} states",
                rows.len(),
                product.num_states()
            )));
        }
        let mut clean = Vec::with_capacity(rows.len());
        for (v, row) in rows.into_iter().enumerate() {
            let mut merged: BTreeMap<usize, Rat> = BTreeMap::new();
            for (a, p) in row {
                if p.is_negative() {
                    return Err(Error::Policy(format!(
                        "negative probability at {}",
                        product.name(v)
                    )));
                }
                if p.is_zero() {
                    continue;
                }
                if product.row(v, a).is_none() {
                    return Err(Error::Policy(format!(
                        "disabled action at {}",
                        product.name(v)
                    )));
                }
                *merged.entry(a).or_insert_with(Rat::zero) += p;
            }
            let sum: Rat = merged.values().sum();
            if !sum.is_one() {
                return Err(Error::Policy(format!(
                    "row of {} sums to {}",
                    product.name(v),
                    fmt_rat(&sum)
                )));
            }
            clean.push(merged.into_iter().collect());
        }
        Ok(StationaryPolicy { rows: clean })
    }

    pub fn uniform(product: &ProductMdp) -> Self {
        StationaryPolicy {
            rows: (0..product.num_states())
                .map(|v| uniform_over(product.enabled_actions(v)))
                .collect(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, v: usize) -> &[(usize, Rat)] {
        &self.rows[v]
    }

    pub fn prob(&self, v: usize, a: usize) -> Rat {
        self.rows[v]
            .iter()
            .find(|(b, _)| *b == a)
            .map_or_else(Rat::zero, |(_, p)| p.clone())
    }

    pub fn to_json(&self, product: &ProductMdp) -> Value {
        let actions = product.mdp().actions();
        let mut out = Map::new();
        for (v, row) in self.rows.iter().enumerate() {
            let dist: Map<String, Value> = row
                .iter()
                .map(|(a, p)| (actions[*a].clone(), Value::String(fmt_rat(p))))
                .collect();
            out.insert(product.name(v), Value::Object(dist));
        }
        Value::Object(out)
    }

    /// Reads a `{"s|q|q'": {action: "num/den"}}` map. Every product state
    /// must be present.
    pub fn from_json(product: &ProductMdp, value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("policy must be an object".into()))?;
        let mut rows = vec![None; product.num_states()];
        for (name, dist) in obj {
            let st = product
                .parse_name(name)
                .ok_or_else(|| Error::Parse(format!("unknown product state {name:?}")))?;
            let Some(v) = product.index_of(st) else {
                continue;
            };
            let dist = dist
                .as_object()
                .ok_or_else(|| Error::Parse(format!("row of {name:?} must be an object")))?;
            let mut row = Vec::new();
            for (a, p) in dist {
                let a = product
                    .mdp()
                    .action_index(a)
                    .ok_or_else(|| Error::Parse(format!("unknown action {a:?}")))?;
                let p = p.as_str().ok_or_else(|| {
                    Error::Parse("probabilities must be \"num/den\" strings".into())
                })?;
                row.push((a, parse_rat(p)?));
            }
            rows[v] = Some(row);
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(v, r)| r.ok_or_else(|| Error::Policy(format!("no row for {}", product.name(v)))))
            .collect::<Result<Vec<_>>>()?;
        StationaryPolicy::new(product, rows)
    }

    /// Moves the policy to another product over the same automata, matching
    /// states by their `(s, q, q')` coordinates. Unmatched states, and rows
    /// without mass on enabled actions, become uniform.
    pub fn transfer(&self, from: &ProductMdp, to: &ProductMdp) -> StationaryPolicy {
        let rows = (0..to.num_states())
            .map(|v| {
                let enabled = to.enabled_actions(v);
                let kept: Vec<(usize, Rat)> = from
                    .index_of(to.state(v))
                    .map(|u| {
                        self.rows[u]
                            .iter()
                            .filter(|(a, _)| enabled.contains(a))
                            .cloned()
                            .collect()
                    })
                    .unwrap_or_default();
                let mass: Rat = kept.iter().map(|(_, p)| p).sum();
                if mass.is_zero() {
                    uniform_over(enabled)
                } else {
                    kept.into_iter().map(|(a, p)| (a, p / &mass)).collect()
                }
            })
            .collect();
        StationaryPolicy { rows }
    }
}

/// Follows `first` with probability `lambda` and `second` otherwise, for the
/// whole run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixturePolicy {
    pub lambda: Rat,
    pub first: StationaryPolicy,
    pub second: StationaryPolicy,
}

impl MixturePolicy {
    pub fn new(lambda: Rat, first: StationaryPolicy, second: StationaryPolicy) -> Result<Self> {
        if !is_prob(&lambda) {
            return Err(Error::Policy(format!(
                "mixture weight {} outside [0, 1]",
                fmt_rat(&lambda)
            )));
        }
        if first.num_states() != second.num_states() {
            return Err(Error::Policy(
                "mixture components live on different products".into(),
            ));
        }
        Ok(MixturePolicy {
            lambda,
            first,
            second,
        })
    }

    pub fn pure(policy: StationaryPolicy) -> Self {
        MixturePolicy {
            lambda: Rat::one(),
            second: policy.clone(),
            first: policy,
        }
    }

    /// `λ ∈ {0, 1}` or both components equal.
    pub fn is_stationary(&self) -> bool {
        self.lambda.is_zero() || self.lambda.is_one() || self.first == self.second
    }

    pub fn to_json(&self, product: &ProductMdp) -> Value {
        json!({
            "lambda": fmt_rat(&self.lambda),
            "policy1": self.first.to_json(product),
            "policy2": self.second.to_json(product),
        })
    }

    /// Accepts the mixture format or a bare stationary map.
    pub fn from_json(product: &ProductMdp, value: &Value) -> Result<Self> {
        match value.get("lambda") {
            None => Ok(MixturePolicy::pure(StationaryPolicy::from_json(
                product, value,
            )?)),
            Some(l) => {
                let l = l
                    .as_str()
                    .ok_or_else(|| Error::Parse("lambda must be a \"num/den\" string".into()))?;
                let first = StationaryPolicy::from_json(product, &value["policy1"])?;
                let second = match value.get("policy2") {
                    Some(p) => StationaryPolicy::from_json(product, p)?,
                    None => first.clone(),
                };
                MixturePolicy::new(parse_rat(l)?, first, second)
            }
        }
    }

    pub fn transfer(&self, from: &ProductMdp, to: &ProductMdp) -> MixturePolicy {
        MixturePolicy {
            lambda: self.lambda.clone(),
            first: self.first.transfer(from, to),
            second: self.second.transfer(from, to),
        }
    }
}

/// Uniform over `act` inside the EC, uniform over enabled actions elsewhere.
pub fn uniform_ec_policy(ec: &EndComponent, product: &ProductMdp) -> StationaryPolicy {
    let mut policy = StationaryPolicy::uniform(product);
    for (&v, acts) in &ec.act {
        if !acts.is_empty() {
            policy.rows[v] = uniform_over(acts.iter().copied());
        }
    }
    policy
}

fn set_ec_rows(rows: &mut [Vec<(usize, Rat)>], ec: &EndComponent) {
    for (&v, acts) in &ec.act {
        if !acts.is_empty() {
            rows[v] = uniform_over(acts.iter().copied());
        }
    }
}

/// Stationary policy realising a point with at most one positive variable
/// per MEC.
pub fn policy_from_point(
    lp: &ConstrainedLp,
    x: &[Rat],
    dec: &MecDecomposition,
    product: &ProductMdp,
) -> Result<StationaryPolicy> {
    if !lp.satisfies_equalities(x) {
        return Err(Error::Precondition("point violates the flow rows".into()));
    }
    if let Some((m, n)) = lp
        .positives_per_mec(x, dec)
        .into_iter()
        .find(|&(_, n)| n > 1)
    {
        return Err(Error::Precondition(format!(
            "MEC {} has {n} positive variables",
            m + 1
        )));
    }
    let mut rows: Vec<Vec<(usize, Rat)>> = (0..product.num_states())
        .map(|v| uniform_over(product.enabled_actions(v)))
        .collect();
    for mec in &dec.mecs {
        set_ec_rows(&mut rows, mec);
    }
    for (j, var) in lp.vars.iter().enumerate() {
        if !x[j].is_positive() {
            continue;
        }
        match *var {
            LpVar::Exit { state, action } => rows[state] = vec![(action, Rat::one())],
            LpVar::Stay { mec, side } => {
                let class = &dec.class[mec];
                let witness = match &class.joint {
                    Some(j) => Some(&j.ec),
                    None => match side {
                        Side::Objective => class.objective.as_ref().map(|w| &w.ec),
                        Side::Constraint => class.constraint.as_ref().map(|w| &w.ec),
                    },
                };
                if let Some(ec) = witness {
                    set_ec_rows(&mut rows, ec);
                }
            }
        }
    }
    Ok(StationaryPolicy { rows })
}

/// Mixture of the policies of the two decomposition vertices.
pub fn synthesize(
    lp: &ConstrainedLp,
    solution: &LpSolution,
    dec: &MecDecomposition,
    product: &ProductMdp,
) -> Result<(Decomposition, MixturePolicy)> {
    let d = lp::decompose(lp, &solution.x)?;
    let first = policy_from_point(lp, &d.first, dec, product)?;
    let second = if d.lambda.is_one() {
        first.clone()
    } else {
        policy_from_point(lp, &d.second, dec, product)?
    };
    let m = MixturePolicy::new(d.lambda.clone(), first, second)?;
    Ok((d, m))
}

/// Shortcut for products that form a single MEC: a joint witness alone, a
/// `(1-p, p)` mix of the two single witnesses, or the one witness that is
/// required. `None` when the product is not one MEC.
pub fn single_mec_policy(
    dec: &MecDecomposition,
    product: &ProductMdp,
    p: &Rat,
) -> Option<Result<MixturePolicy>> {
    if dec.mecs.len() != 1 {
        return None;
    }
    let class = &dec.class[0];
    let witness = |side: Side| {
        let w = match side {
            Side::Objective => class.objective.as_ref(),
            Side::Constraint => class.constraint.as_ref(),
        };
        w.map(|w| uniform_ec_policy(&w.ec, product))
    };
    let out = if let Some(j) = &class.joint {
        Ok(MixturePolicy::pure(uniform_ec_policy(&j.ec, product)))
    } else {
        match (witness(Side::Objective), witness(Side::Constraint)) {
            (Some(a), Some(b)) => MixturePolicy::new(Rat::one() - p, a, b),
            (_, Some(b)) => Ok(MixturePolicy::pure(b)),
            (Some(a), None) if p.is_zero() => Ok(MixturePolicy::pure(a)),
            (None, None) if p.is_zero() => {
                Ok(MixturePolicy::pure(StationaryPolicy::uniform(product)))
            }
            _ => Err(Error::Infeasible),
        }
    };
    Some(out)
}

/// Everything produced by one planning call.
#[derive(Clone, Debug)]
pub struct Plan {
    pub dec: MecDecomposition,
    pub lp: ConstrainedLp,
    pub solution: LpSolution,
    pub decomposition: Decomposition,
    pub policy: MixturePolicy,
}

/// Decompose, solve and synthesise. Products forming a single MEC use the
/// shortcut policy; the LP is still solved for its value.
pub fn plan(product: &ProductMdp, p: &Rat) -> Result<Plan> {
    let dec = mec_decomposition(product);
    let lp = lp::build_lp(&dec, product, p)?;
    let solution = lp::solve(&lp)?;
    let (decomposition, mut policy) = synthesize(&lp, &solution, &dec, product)?;
    if let Some(shortcut) = single_mec_policy(&dec, product, p) {
        policy = shortcut?;
    }
    Ok(Plan {
        dec,
        lp,
        solution,
        decomposition,
        policy,
    })
}

/// Two self-looping memory states; memory `i` plays component `i`.
pub fn as_memory_policy(m: &MixturePolicy, product: &ProductMdp) -> PolicyMemoryKernel {
    let n = product.num_states();
    let update = (0..2)
        .map(|u| {
            (0..n)
                .map(|v| {
                    (0..product.num_actions())
                        .map(|a| {
                            let targets: BTreeSet<usize> = product
                                .row(v, a)
                                .map(|r| r.iter().map(|(t, _)| *t).collect())
                                .unwrap_or_default();
                            (0..n)
                                .map(|t| targets.contains(&t).then(|| vec![(u, Rat::one())]))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    PolicyMemoryKernel {
        memory_states: 2,
        initial: vec![m.lambda.clone(), Rat::one() - &m.lambda],
        update,
        select: vec![m.first.rows.clone(), m.second.rows.clone()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::rat;

    fn fig3_plan() -> (ProductMdp, Plan) {
        let f = fixtures::fig3();
        let plan = plan(&f.product, &rat(9, 10)).unwrap();
        (f.product, plan)
    }

    #[test]
    fn fig3_first_component() {
        let (product, plan) = fig3_plan();
        let pi = &plan.policy.first;
        assert_eq!(pi.row(0), &[(0, rat(1, 1))]);
        // joint witness of EC2 is {v1, v4, v5}
        let joint = plan.dec.class[1].joint.as_ref().unwrap();
        assert_eq!(joint.ec.states, vec![1, 4, 5]);
        for (&v, acts) in &joint.ec.act {
            let expect = uniform_over(acts.iter().copied());
            assert_eq!(pi.row(v), expect.as_slice(), "state {}", product.name(v));
        }
    }

    #[test]
    fn fig3_second_component() {
        let (_, plan) = fig3_plan();
        let pi = &plan.policy.second;
        assert_eq!(pi.row(0), &[(1, rat(1, 1))]);
        assert_eq!(pi.row(3), &[(0, rat(1, 1))]);
        assert_eq!(plan.policy.lambda, rat(2, 5));
    }

    #[test]
    fn zero_point_on_single_mec_is_uniform_over_act() {
        let f = fixtures::single_mec();
        let dec = mec_decomposition(&f.product);
        let lp = lp::build_lp(&dec, &f.product, &rat(0, 1)).unwrap();
        // all-zero is not feasible here (the MEC row has rhs 1), so use the
        // stay-nowhere default through the uniform EC policy instead
        let pi = uniform_ec_policy(&dec.mecs[0], &f.product);
        assert_eq!(pi, StationaryPolicy::uniform(&f.product));
        assert!(
            policy_from_point(&lp, &vec![Rat::zero(); lp.num_vars()], &dec, &f.product).is_err()
        );
    }

    #[test]
    fn rejects_two_positive_per_mec() {
        let f = fixtures::single_mec();
        let dec = mec_decomposition(&f.product);
        let lp = lp::build_lp(&dec, &f.product, &rat(1, 2)).unwrap();
        let x = vec![rat(1, 2), rat(1, 2)];
        assert!(matches!(
            policy_from_point(&lp, &x, &dec, &f.product),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn memory_policy_structure() {
        let (product, plan) = fig3_plan();
        let k = as_memory_policy(&plan.policy, &product);
        k.check().unwrap();
        assert_eq!(k.initial, vec![rat(2, 5), rat(3, 5)]);
        assert_eq!(k.select[0], plan.policy.first.rows);
        assert_eq!(k.select[1], plan.policy.second.rows);
        for u in 0..2 {
            for per_s in &k.update[u] {
                for per_a in per_s {
                    for row in per_a.iter().flatten() {
                        assert_eq!(row, &vec![(u, rat(1, 1))]);
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let (product, plan) = fig3_plan();
        let text = plan.policy.to_json(&product);
        let back = MixturePolicy::from_json(&product, &text).unwrap();
        assert_eq!(back, plan.policy);
        assert_eq!(text["lambda"], "2/5");
    }

    #[test]
    fn policies_only_use_enabled_actions() {
        let f = fixtures::fig1();
        let plan = plan(&f.product, &f.threshold).unwrap();
        for pi in [&plan.policy.first, &plan.policy.second] {
            StationaryPolicy::new(&f.product, pi.rows.clone()).unwrap();
        }
    }

    #[test]
    fn transfer_keeps_rows_of_shared_states() {
        let f = fixtures::fig1();
        let plan = plan(&f.product, &f.threshold).unwrap();
        let moved = plan.policy.first.transfer(&f.product, &f.product);
        assert_eq!(moved, plan.policy.first);
    }

    #[test]
    fn single_mec_shortcut_mixes() {
        let f = fixtures::single_mec();
        let dec = mec_decomposition(&f.product);
        let m = single_mec_policy(&dec, &f.product, &rat(1, 3))
            .unwrap()
            .unwrap();
        assert_eq!(m.lambda, rat(2, 3));
        assert!(single_mec_policy(
            &mec_decomposition(&fixtures::fig3().product),
            &f.product,
            &rat(1, 2)
        )
        .is_none());
    }
}
