//! Almost-sure constraints through a Lagrange multiplier: maximise
//! `P[objective] + λ·P[constraint]` without a constraint row.

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::evaluate_stationary;
use crate::graph::MecDecomposition;
use crate::lp::{self, ConstrainedLp, LpVar};
use crate::model::ProductMdp;
use crate::rational::{fmt_rat, pow, Rat};
use crate::synthesis::{policy_from_point, StationaryPolicy};

/// `2 / (1 - p_min^size)`.
pub fn lambda_bound(p_min: &Rat, size: u32) -> Result<Rat> {
    if !p_min.is_positive() || *p_min >= Rat::one() {
        return Err(Error::Precondition(format!(
            "p_min = {} must lie strictly between 0 and 1",
            fmt_rat(p_min)
        )));
    }
    if size == 0 {
        return Err(Error::Precondition("state space must be nonempty".into()));
    }
    Ok(Rat::from_integer(2.into()) / (Rat::one() - pow(p_min, size)))
}

/// Bound for a product, using `|S|·|Q|·|Q'|` as the exponent.
pub fn lambda_bound_for(product: &ProductMdp) -> Result<Rat> {
    let p_min = product
        .mdp()
        .p_min()
        .ok_or_else(|| Error::Precondition("MDP has no probabilistic branching".into()))?;
    let (s, q, q2) = product.shape();
    lambda_bound(&p_min, (s * q * q2) as u32)
}

#[derive(Clone, Debug)]
pub struct WeightedSolution {
    pub lambda: Rat,
    pub lp: ConstrainedLp,
    pub x: Vec<Rat>,
    /// LP value, equal to the weighted value of `policy`.
    pub value: Rat,
    pub policy: StationaryPolicy,
}

fn stationary_optimum(
    lp: ConstrainedLp,
    dec: &MecDecomposition,
    product: &ProductMdp,
    lambda: Rat,
) -> Result<WeightedSolution> {
    let sol = lp::solve(&lp)?;
    // without the inequality row the optimum is a vertex of the flow polytope
    let d = lp::decompose(&lp, &sol.x)?;
    let policy = policy_from_point(&lp, &d.first, dec, product)?;
    Ok(WeightedSolution {
        lambda,
        value: sol.value,
        x: d.first,
        lp,
        policy,
    })
}

pub fn solve_weighted(
    product: &ProductMdp,
    dec: &MecDecomposition,
    lambda: &Rat,
) -> Result<WeightedSolution> {
    if lambda.is_negative() {
        return Err(Error::Precondition("multiplier must be nonnegative".into()));
    }
    let lp = lp::build_weighted(dec, product, &Rat::one(), lambda);
    stationary_optimum(lp, dec, product, lambda.clone())
}

/// Maximises mass in jointly accepting components only, i.e. the
/// probability of the intersection language.
pub fn solve_intersection(
    product: &ProductMdp,
    dec: &MecDecomposition,
) -> Result<WeightedSolution> {
    let mut lp = lp::build_weighted(dec, product, &Rat::zero(), &Rat::zero());
    for (j, var) in lp.vars.iter().enumerate() {
        if let LpVar::Stay { mec, .. } = var {
            if dec.class[*mec].has_joint() {
                lp.objective[j] = Rat::one();
            }
        }
    }
    stationary_optimum(lp, dec, product, Rat::zero())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub lambda: Rat,
    pub objective: Rat,
    pub constraint: Rat,
    pub weighted_value: Rat,
    /// `1 - 1/λ` (taken as 0 for `λ ≤ 1`).
    pub bound: Rat,
    pub slack: Rat,
}

impl FeasibilityReport {
    pub fn holds(&self) -> bool {
        !self.slack.is_negative()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lambda": fmt_rat(&self.lambda),
            "weighted_value": fmt_rat(&self.weighted_value),
            "constraint_prob": fmt_rat(&self.constraint),
            "objective_prob": fmt_rat(&self.objective),
            "bound": fmt_rat(&self.bound),
            "slack": fmt_rat(&self.slack),
        })
    }
}

/// Exact check of `P[constraint] ≥ 1 - 1/λ` for `policy`.
pub fn check_feasibility_gap(
    product: &ProductMdp,
    policy: &StationaryPolicy,
    lambda: &Rat,
) -> Result<FeasibilityReport> {
    let r = evaluate_stationary(product, policy)?;
    let bound = if *lambda > Rat::one() {
        Rat::one() - lambda.recip()
    } else {
        Rat::zero()
    };
    Ok(FeasibilityReport {
        lambda: lambda.clone(),
        weighted_value: &r.objective + lambda * &r.constraint,
        slack: &r.constraint - &bound,
        objective: r.objective,
        constraint: r.constraint,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::decompose;
    use crate::rational::rat;

    #[test]
    fn bound_values() {
        assert_eq!(lambda_bound(&rat(1, 2), 2).unwrap(), rat(8, 3));
        assert_eq!(lambda_bound(&rat(1, 2), 1).unwrap(), rat(4, 1));
        assert!(lambda_bound(&rat(1, 1), 1).is_err());
        assert!(lambda_bound(&rat(0, 1), 1).is_err());
        assert!(lambda_bound(&rat(1, 100), 3).unwrap() < lambda_bound(&rat(1, 10), 3).unwrap());
    }

    fn preferred(f: &fixtures::Fixture, lambda: &Rat) -> usize {
        let dec = decompose(&f.product);
        let sol = solve_weighted(&f.product, &dec, lambda).unwrap();
        let row = sol.policy.row(f.product.initial());
        assert_eq!(row.len(), 1);
        row[0].0
    }

    #[test]
    fn ex_dep_crossover() {
        let p = rat(3, 4);
        let f = fixtures::ex_dep(p.clone());
        // a preferred iff 1 + λ/2 > p + λ, i.e. λ < 2(1 - p) = 1/2
        assert_eq!(preferred(&f, &rat(0, 1)), 0);
        assert_eq!(preferred(&f, &rat(49, 100)), 0);
        assert_eq!(preferred(&f, &rat(51, 100)), 1);
        assert_eq!(preferred(&f, &rat(4, 1)), 1);
    }

    #[test]
    fn bound_multiplier_gives_almost_sure_constraint() {
        let f = fixtures::ex_dep(rat(3, 4));
        let dec = decompose(&f.product);
        let lambda = lambda_bound_for(&f.product).unwrap();
        let sol = solve_weighted(&f.product, &dec, &lambda).unwrap();
        let rep = check_feasibility_gap(&f.product, &sol.policy, &lambda).unwrap();
        assert!(rep.constraint.is_one());
        assert!(rep.holds());
        assert_eq!(rep.weighted_value, sol.value);
    }

    #[test]
    fn intersection_is_infeasible_but_lagrangian_is_not() {
        let f = fixtures::ex_dep(rat(1, 4));
        let dec = decompose(&f.product);
        let inter = solve_intersection(&f.product, &dec).unwrap();
        let r = evaluate_stationary(&f.product, &inter.policy).unwrap();
        assert!(r.constraint < Rat::one());
        let lambda = lambda_bound_for(&f.product).unwrap();
        let lag = solve_weighted(&f.product, &dec, &lambda).unwrap();
        assert!(evaluate_stationary(&f.product, &lag.policy)
            .unwrap()
            .constraint
            .is_one());
    }

    #[test]
    fn below_crossover_violates_constraint_with_bound_intact() {
        let f = fixtures::ex_dep(rat(9, 10));
        let dec = decompose(&f.product);
        let lambda = rat(1, 10);
        let sol = solve_weighted(&f.product, &dec, &lambda).unwrap();
        let rep = check_feasibility_gap(&f.product, &sol.policy, &lambda).unwrap();
        assert!(rep.holds());
        assert!(rep.constraint < Rat::one());
    }
}
