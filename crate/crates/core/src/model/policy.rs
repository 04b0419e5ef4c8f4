use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::model::Row;
use crate::rational::Rat;

/// A general finite-memory policy `(U, μ, δ_U, σ)` over a finite state space.
///
/// Memory updates are indexed by `(memory, state, action, successor)`; the
/// action selector by `(memory, state)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyMemoryKernel {
    pub memory_states: usize,
    pub initial: Vec<Rat>,
    /// `update[u][s][a][s']` is a distribution over memory states, or `None`
    /// when the transition cannot occur.
    pub update: Vec<Vec<Vec<Vec<Option<Row>>>>>,
    /// `select[u][s]` is a distribution over actions.
    pub select: Vec<Vec<Row>>,
}

impl PolicyMemoryKernel {
    pub fn check(&self) -> Result<()> {
        check_dist(
            &self.initial.iter().cloned().enumerate().collect::<Vec<_>>(),
            "initial memory",
        )?;
        for (u, rows) in self.select.iter().enumerate() {
            for (s, row) in rows.iter().enumerate() {
                check_dist(row, &format!("action selector at memory {u}, state {s}"))?;
            }
        }
        for per_u in &self.update {
            for per_s in per_u {
                for per_a in per_s {
                    for row in per_a.iter().flatten() {
                        check_dist(row, "memory update")?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_dist(row: &[(usize, Rat)], what: &str) -> Result<()> {
    let mut sum = Rat::zero();
    for (_, p) in row {
        if p.is_negative() {
            return Err(Error::Policy(format!("{what}: negative probability")));
        }
        sum += p;
    }
    if !sum.is_one() {
        return Err(Error::Policy(format!("{what}: row does not sum to 1")));
    }
    Ok(())
}
