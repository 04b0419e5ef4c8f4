//! Two-state deterministic MDP on which translating objective and
//! constraint into reward machines independently loses every good policy.
//!
//! MDP: `s0 --a--> s0`, `s0 --b--> s1`, `s1 --a--> s1`, `s1 --b--> s0`;
//! objective `□◇s0`, constraint `□◇s1`, threshold 1.

use std::collections::HashMap;

use num_traits::Zero;

use crate::fixtures::{self, Fixture};
use crate::rational::Rat;

pub const A: usize = 0;
pub const B: usize = 1;

/// Deterministic successor of MDP state `s` under action `a`.
pub fn mdp_step(s: usize, a: usize) -> usize {
    if a == A {
        s
    } else {
        1 - s
    }
}

/// Reward machine reading actions of the deterministic MDP:
/// `delta[state][action] = (next, reward)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableRm {
    pub states: Vec<&'static str>,
    pub initial: usize,
    pub delta: Vec<[(usize, u8); 2]>,
}

impl TableRm {
    pub fn step(&self, u: usize, a: usize) -> (usize, u8) {
        self.delta[u][a]
    }

    /// Rewards along a finite action sequence.
    pub fn run(&self, actions: &[usize]) -> Vec<u8> {
        let mut u = self.initial;
        actions
            .iter()
            .map(|&a| {
                let (next, r) = self.step(u, a);
                u = next;
                r
            })
            .collect()
    }

    /// Limit average of the lasso `prefix · cycle^ω`.
    pub fn lasso_average(&self, prefix: &[usize], cycle: &[usize]) -> Rat {
        assert!(!cycle.is_empty(), "cycle must be nonempty");
        let mut u = self.initial;
        for &a in prefix {
            u = self.step(u, a).0;
        }
        // iterate the cycle until the machine state at its start repeats
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let mut sums = Vec::new();
        while !seen.contains_key(&u) {
            seen.insert(u, sums.len());
            let mut total = 0u64;
            for &a in cycle {
                let (next, r) = self.step(u, a);
                total += r as u64;
                u = next;
            }
            sums.push(total);
        }
        let start = seen[&u];
        let loops = (sums.len() - start) as i64;
        let total: u64 = sums[start..].iter().sum();
        Rat::new((total as i64).into(), (loops * cycle.len() as i64).into())
    }
}

/// Machine for `□◇s0`; it never pays.
pub fn rm_objective() -> TableRm {
    TableRm {
        states: vec!["s0,v0", "s0,v1", "s1,v0", "bot"],
        initial: 0,
        delta: vec![
            [(1, 0), (2, 0)],
            [(1, 0), (3, 0)],
            [(2, 0), (1, 0)],
            [(3, 0), (3, 0)],
        ],
    }
}

/// Machine for `□◇s1`: pays 1 for staying in `s1` after one `b`.
pub fn rm_constraint() -> TableRm {
    TableRm {
        states: vec!["s0,v0", "s1,v1", "bot"],
        initial: 0,
        delta: vec![[(0, 0), (1, 0)], [(1, 1), (2, 0)], [(2, 0), (2, 0)]],
    }
}

pub struct Bundle {
    pub fixture: Fixture,
    pub objective: TableRm,
    pub constraint: TableRm,
}

pub fn independent_translation_counterexample() -> Bundle {
    Bundle {
        fixture: fixtures::appendix_c(),
        objective: rm_objective(),
        constraint: rm_constraint(),
    }
}

/// Deterministic policy with two memory states, starting in memory 0:
/// action `select[m][s]`, then memory `update[m][s]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryPolicy {
    pub select: [[usize; 2]; 2],
    pub update: [[usize; 2]; 2],
}

impl MemoryPolicy {
    /// All 256 policies.
    pub fn enumerate() -> Vec<MemoryPolicy> {
        (0u32..256)
            .map(|bits| {
                let bit = |i: u32| ((bits >> i) & 1) as usize;
                MemoryPolicy {
                    select: [[bit(0), bit(1)], [bit(2), bit(3)]],
                    update: [[bit(4), bit(5)], [bit(6), bit(7)]],
                }
            })
            .collect()
    }

    /// The action sequence as a lasso `(prefix, cycle)`.
    pub fn lasso(&self) -> (Vec<usize>, Vec<usize>) {
        let (mut m, mut s) = (0, 0);
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut actions = Vec::new();
        while !seen.contains_key(&(m, s)) {
            seen.insert((m, s), actions.len());
            let a = self.select[m][s];
            actions.push(a);
            m = self.update[m][s];
            s = mdp_step(s, a);
        }
        let start = seen[&(m, s)];
        (actions[..start].to_vec(), actions[start..].to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumerationReport {
    pub policies: usize,
    /// Policies earning limit average 1 on the constraint machine.
    pub constraint_optimal: usize,
    /// Of those, how many earn a positive objective average.
    pub with_objective_reward: usize,
}

pub fn enumerate_independent(bundle: &Bundle) -> EnumerationReport {
    let mut report = EnumerationReport {
        policies: 0,
        constraint_optimal: 0,
        with_objective_reward: 0,
    };
    for pi in MemoryPolicy::enumerate() {
        report.policies += 1;
        let (prefix, cycle) = pi.lasso();
        let con = bundle.constraint.lasso_average(&prefix, &cycle);
        if con == Rat::from_integer(1.into()) {
            report.constraint_optimal += 1;
            if !bundle.objective.lasso_average(&prefix, &cycle).is_zero() {
                report.with_objective_reward += 1;
            }
        }
    }
    report
}
