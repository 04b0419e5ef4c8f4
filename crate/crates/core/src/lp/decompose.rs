//! Splits an optimal point into a convex combination of at most two
//! vertices of the flow polytope (the program without its `≥` row).

use num_traits::{One, Signed, Zero};

use super::ConstrainedLp;
use crate::error::{Error, Result};
use crate::linalg::null_space;
use crate::rational::{fmt_rat, Rat};

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    /// Weight of `first`.
    pub lambda: Rat,
    /// The endpoint with the larger objective value.
    pub first: Vec<Rat>,
    pub second: Vec<Rat>,
}

impl Decomposition {
    pub fn combined(&self) -> Vec<Rat> {
        let mu = Rat::one() - &self.lambda;
        self.first
            .iter()
            .zip(&self.second)
            .map(|(a, b)| &self.lambda * a + &mu * b)
            .collect()
    }
}

/// Decomposes a basic optimal point `x`. The restriction of the flow rows to
/// the support of `x` has a null space of dimension at most one; walking the
/// null direction in both senses until a coordinate hits zero yields the two
/// vertices.
pub fn decompose(lp: &ConstrainedLp, x: &[Rat]) -> Result<Decomposition> {
    if !lp.satisfies_equalities(x) {
        return Err(Error::Precondition("point violates the flow rows".into()));
    }
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j].is_positive()).collect();
    let restricted: Vec<Vec<Rat>> = lp
        .eq
        .iter()
        .map(|row| support.iter().map(|&j| row[j].clone()).collect())
        .collect();
    let basis = null_space(&restricted, support.len());
    match basis.len() {
        0 => Ok(Decomposition {
            lambda: Rat::one(),
            first: x.to_vec(),
            second: x.to_vec(),
        }),
        1 => {
            let dir = &basis[0];
            // largest step in each sense keeping the support nonnegative
            let mut t_max: Option<Rat> = None;
            let mut t_min: Option<Rat> = None;
            for (k, &j) in support.iter().enumerate() {
                let d = &dir[k];
                if d.is_negative() {
                    let t = -&x[j] / d;
                    if t_max.as_ref().is_none_or(|m| t < *m) {
                        t_max = Some(t);
                    }
                } else if d.is_positive() {
                    let t = -&x[j] / d;
                    if t_min.as_ref().is_none_or(|m| t > *m) {
                        t_min = Some(t);
                    }
                }
            }
            let (Some(t_max), Some(t_min)) = (t_max, t_min) else {
                return Err(Error::Unbounded);
            };
            let walk = |t: &Rat| {
                let mut y = x.to_vec();
                for (k, &j) in support.iter().enumerate() {
                    y[j] = &x[j] + t * &dir[k];
                    if y[j].is_negative() {
                        y[j] = Rat::zero();
                    }
                }
                y
            };
            let hi = walk(&t_max);
            let lo = walk(&t_min);
            let lambda = -&t_min / (&t_max - &t_min);
            if lp.objective_value(&lo) > lp.objective_value(&hi) {
                Ok(Decomposition {
                    lambda: Rat::one() - lambda,
                    first: lo,
                    second: hi,
                })
            } else {
                Ok(Decomposition {
                    lambda,
                    first: hi,
                    second: lo,
                })
            }
        }
        d => Err(Error::Precondition(format!(
            "point is not basic: null space of its support has dimension {d} (objective {})",
            fmt_rat(&lp.objective_value(x))
        ))),
    }
}
