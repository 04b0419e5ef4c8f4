use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Deserialize;

use super::{index_of, Letter};
use crate::error::{Error, Result};
use crate::rational::{fmt_rat, parse_rat, Rat};

/// Successor distribution of one state-action pair, sorted by successor.
pub type Row = Vec<(usize, Rat)>;

/// Finite MDP with an atomic-proposition labelling and an exact kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledMdp {
    aps: Vec<String>,
    states: Vec<String>,
    initial: usize,
    actions: Vec<String>,
    labels: Vec<Letter>,
    kernel: Vec<Vec<Option<Row>>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    RowSum {
        state: String,
        action: String,
        sum: String,
    },
    NonPositive {
        state: String,
        action: String,
        successor: String,
    },
    DeadState {
        state: String,
    },
    EmptyStateSpace,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, action, sum } => {
                write!(f, "row sum ≠ 1 at ({state}, {action}): {sum}")
            }
            Violation::NonPositive {
                state,
                action,
                successor,
            } => {
                write!(
                    f,
                    "non-positive probability at ({state}, {action}) → {successor}"
                )
            }
            Violation::DeadState { state } => write!(f, "dead state {state}: no enabled action"),
            Violation::EmptyStateSpace => write!(f, "empty state space"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpFile {
    atomic_propositions: Vec<String>,
    states: Vec<String>,
    initial: String,
    actions: Vec<String>,
    #[serde(default)]
    labels: BTreeMap<String, Vec<String>>,
    transitions: Vec<TransitionEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    from: String,
    action: String,
    to: Vec<(String, String)>,
}

impl LabeledMdp {
    /// Assembles an MDP without checking the kernel invariants; see
    /// [`LabeledMdp::validate`].
    pub fn new(
        aps: Vec<String>,
        states: Vec<String>,
        initial: usize,
        actions: Vec<String>,
        labels: Vec<Letter>,
        kernel: Vec<Vec<Option<Row>>>,
    ) -> Self {
        assert!(
            aps.len() <= 64,
            "at most 64 atomic propositions are supported"
        );
        assert_eq!(labels.len(), states.len());
        assert_eq!(kernel.len(), states.len());
        let kernel = kernel
            .into_iter()
            .map(|rows| {
                let mut rows = rows;
                rows.resize(actions.len(), None);
                rows.into_iter().map(|r| r.map(normalise_row)).collect()
            })
            .collect();
        LabeledMdp {
            aps,
            states,
            initial,
            actions,
            labels,
            kernel,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MdpFile = serde_json::from_str(text)?;
        if file.atomic_propositions.len() > 64 {
            return Err(Error::Parse("more than 64 atomic propositions".into()));
        }
        let initial = index_of(&file.states, &file.initial, "state")?;
        let mut labels = vec![Letter::EMPTY; file.states.len()];
        for (s, names) in &file.labels {
            let i = index_of(&file.states, s, "state")?;
            labels[i] = Letter::from_names(&file.atomic_propositions, names)?;
        }
        let mut kernel = vec![vec![None; file.actions.len()]; file.states.len()];
        for t in &file.transitions {
            let s = index_of(&file.states, &t.from, "state")?;
            let a = index_of(&file.actions, &t.action, "action")?;
            if kernel[s][a].is_some() {
                return Err(Error::Parse(format!(
                    "duplicate transition entry ({}, {})",
                    t.from, t.action
                )));
            }
            let mut row = Vec::with_capacity(t.to.len());
            for (succ, p) in &t.to {
                row.push((index_of(&file.states, succ, "state")?, parse_rat(p)?));
            }
            kernel[s][a] = Some(row);
        }
        Ok(LabeledMdp::new(
            file.atomic_propositions,
            file.states,
            initial,
            file.actions,
            labels,
            kernel,
        ))
    }

    /// Parses and rejects anything [`LabeledMdp::validate`] complains about.
    pub fn from_json_validated(text: &str) -> Result<Self> {
        let mdp = Self::from_json(text)?;
        let report = mdp.validate();
        if !report.is_valid() {
            let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Invalid(msgs.join("; ")));
        }
        Ok(mdp)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let labels: serde_json::Map<String, serde_json::Value> = self
            .states
            .iter()
            .enumerate()
            .filter(|(i, _)| self.labels[*i] != Letter::EMPTY)
            .map(|(i, s)| {
                (
                    s.clone(),
                    serde_json::json!(self.labels[i].names(&self.aps)),
                )
            })
            .collect();
        let mut transitions = Vec::new();
        for s in 0..self.num_states() {
            for (a, row) in self.enabled(s) {
                let to: Vec<_> = row
                    .iter()
                    .map(|(t, p)| serde_json::json!([self.states[*t], fmt_rat(p)]))
                    .collect();
                transitions.push(serde_json::json!({
                    "from": self.states[s],
                    "action": self.actions[a],
                    "to": to,
                }));
            }
        }
        serde_json::json!({
            "atomic_propositions": self.aps,
            "states": self.states,
            "initial": self.states[self.initial],
            "actions": self.actions,
            "labels": labels,
            "transitions": transitions,
        })
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.states.is_empty() {
            violations.push(Violation::EmptyStateSpace);
        }
        for s in 0..self.num_states() {
            let mut any = false;
            for (a, row) in self.enabled(s) {
                any = true;
                let mut sum = Rat::zero();
                for (t, p) in row {
                    if !p.is_positive() {
                        violations.push(Violation::NonPositive {
                            state: self.states[s].clone(),
                            action: self.actions[a].clone(),
                            successor: self.states[*t].clone(),
                        });
                    }
                    sum += p;
                }
                if !sum.is_one() {
                    violations.push(Violation::RowSum {
                        state: self.states[s].clone(),
                        action: self.actions[a].clone(),
                        sum: fmt_rat(&sum),
                    });
                }
            }
            if !any {
                violations.push(Violation::DeadState {
                    state: self.states[s].clone(),
                });
            }
        }
        ValidationReport { violations }
    }

    pub fn aps(&self) -> &[String] {
        &self.aps
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn label(&self, s: usize) -> Letter {
        self.labels[s]
    }

    pub fn row(&self, s: usize, a: usize) -> Option<&Row> {
        self.kernel[s][a].as_ref()
    }

    /// Enabled actions of `s` in action order, with their rows.
    pub fn enabled(&self, s: usize) -> impl Iterator<Item = (usize, &Row)> + '_ {
        self.kernel[s]
            .iter()
            .enumerate()
            .filter_map(|(a, r)| r.as_ref().map(|r| (a, r)))
    }

    pub fn enabled_actions(&self, s: usize) -> Vec<usize> {
        self.enabled(s).map(|(a, _)| a).collect()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|s| s == name)
    }

    /// Number of enabled state-action pairs.
    pub fn num_pairs(&self) -> usize {
        (0..self.num_states())
            .map(|s| self.enabled(s).count())
            .sum()
    }

    /// Smallest positive kernel entry.
    pub fn p_min(&self) -> Option<Rat> {
        self.kernel
            .iter()
            .flatten()
            .flatten()
            .flat_map(|row| row.iter().map(|(_, p)| p))
            .filter(|p| p.is_positive())
            .min()
            .cloned()
    }

    /// Same shape, different kernel; used for empirical estimates.
    pub fn with_kernel(&self, kernel: Vec<Vec<Option<Row>>>) -> Self {
        LabeledMdp::new(
            self.aps.clone(),
            self.states.clone(),
            self.initial,
            self.actions.clone(),
            self.labels.clone(),
            kernel,
        )
    }
}

fn normalise_row(row: Row) -> Row {
    let mut merged: BTreeMap<usize, Rat> = BTreeMap::new();
    for (t, p) in row {
        *merged.entry(t).or_insert_with(Rat::zero) += p;
    }
    merged.into_iter().collect()
}
