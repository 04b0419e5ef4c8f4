//! The MEC-level linear program, its exact solution and the two-vertex
//! decomposition of an optimum.
//!
//! Variables: per MEC `C` two "stay" variables `x_{C,obj}`, `x_{C,con}` (mass
//! that enters `C` and never leaves, committed to an accepting sub-component
//! for the objective or the constraint) and one "exit" variable `x_{v,a}` per
//! state `v ∈ C` and enabled action `a ∉ act(v)`. Each MEC contributes one
//! flow-conservation row: its own variables sum to the mass flowing in along
//! exit variables of other MECs, weighted by the exit distribution
//! conditioned on leaving (or to 1 for the MEC of the initial state).

mod decompose;
mod simplex;

use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};

pub use decompose::{decompose, Decomposition};
pub use simplex::{maximize, SimplexResult};

use crate::error::{Error, Result};
use crate::graph::MecDecomposition;
use crate::model::ProductMdp;
use crate::rational::{fmt_rat, is_prob, Rat};
use crate::Side;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LpVar {
    Stay { mec: usize, side: Side },
    Exit { state: usize, action: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedLp {
    pub vars: Vec<LpVar>,
    /// MEC index of each equality row (MECs unreachable from the initial MEC
    /// are pruned).
    pub row_mecs: Vec<usize>,
    pub eq: Vec<Vec<Rat>>,
    pub rhs: Vec<Rat>,
    pub objective: Vec<Rat>,
    /// Coefficients and threshold of the `≥` row, absent for unconstrained
    /// (weighted) programs.
    pub constraint: Option<(Vec<Rat>, Rat)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub value: Rat,
    pub x: Vec<Rat>,
}

/// `(objective, constraint)` coefficient of a variable.
fn coefficients(var: LpVar, dec: &MecDecomposition) -> (Rat, Rat) {
    let zero = Rat::zero;
    match var {
        LpVar::Exit { .. } => (zero(), zero()),
        LpVar::Stay { mec, side } => {
            let c = &dec.class[mec];
            if c.has_joint() {
                return (Rat::one(), Rat::one());
            }
            let hit = |s: Side| {
                if side == s && c.has(s) {
                    Rat::one()
                } else {
                    zero()
                }
            };
            (hit(Side::Objective), hit(Side::Constraint))
        }
    }
}

/// Variables and flow rows shared by the constrained and weighted programs.
fn skeleton(
    dec: &MecDecomposition,
    product: &ProductMdp,
) -> (Vec<LpVar>, Vec<usize>, Vec<Vec<Rat>>, Vec<Rat>) {
    let init_mec = dec.initial_mec(product);
    let kept = dec.reachable_from(init_mec);
    let mut row_of = vec![None; dec.mecs.len()];
    for (r, &m) in kept.iter().enumerate() {
        row_of[m] = Some(r);
    }
    let mut vars = Vec::new();
    for &m in &kept {
        vars.push(LpVar::Stay {
            mec: m,
            side: Side::Objective,
        });
        vars.push(LpVar::Stay {
            mec: m,
            side: Side::Constraint,
        });
        let mec = &dec.mecs[m];
        for &v in &mec.states {
            for (a, _) in product.enabled(v) {
                if !mec.act[&v].contains(&a) {
                    vars.push(LpVar::Exit {
                        state: v,
                        action: a,
                    });
                }
            }
        }
    }
    let mut eq = vec![vec![Rat::zero(); vars.len()]; kept.len()];
    for (j, var) in vars.iter().enumerate() {
        match *var {
            LpVar::Stay { mec, .. } => eq[row_of[mec].unwrap()][j] = Rat::one(),
            LpVar::Exit { state, action } => {
                let own = dec.mec_of[state];
                eq[row_of[own].unwrap()][j] += Rat::one();
                let row = product.row(state, action).unwrap();
                let leave: Rat = row
                    .iter()
                    .filter(|(t, _)| dec.mec_of[*t] != own)
                    .map(|(_, p)| p.clone())
                    .sum();
                debug_assert!(leave.is_positive(), "maximality guarantees an exit");
                for (t, p) in row {
                    let target = dec.mec_of[*t];
                    if target != own {
                        eq[row_of[target].expect("successor MEC is reachable")][j] -= p / &leave;
                    }
                }
            }
        }
    }
    let rhs = kept
        .iter()
        .map(|&m| {
            if m == init_mec {
                Rat::one()
            } else {
                Rat::zero()
            }
        })
        .collect();
    (vars, kept, eq, rhs)
}

/// Constrained program: maximise objective mass subject to constraint mass ≥ `p`.
pub fn build_lp(dec: &MecDecomposition, product: &ProductMdp, p: &Rat) -> Result<ConstrainedLp> {
    if !is_prob(p) {
        return Err(Error::Precondition(format!(
            "threshold {} outside [0, 1]",
            fmt_rat(p)
        )));
    }
    let (vars, row_mecs, eq, rhs) = skeleton(dec, product);
    let (objective, con): (Vec<Rat>, Vec<Rat>) = vars.iter().map(|&v| coefficients(v, dec)).unzip();
    Ok(ConstrainedLp {
        vars,
        row_mecs,
        eq,
        rhs,
        objective,
        constraint: Some((con, p.clone())),
    })
}

/// Unconstrained program maximising `w_obj·objective + w_con·constraint`.
pub fn build_weighted(
    dec: &MecDecomposition,
    product: &ProductMdp,
    w_obj: &Rat,
    w_con: &Rat,
) -> ConstrainedLp {
    let (vars, row_mecs, eq, rhs) = skeleton(dec, product);
    let objective = vars
        .iter()
        .map(|&v| {
            let (o, c) = coefficients(v, dec);
            o * w_obj + c * w_con
        })
        .collect();
    ConstrainedLp {
        vars,
        row_mecs,
        eq,
        rhs,
        objective,
        constraint: None,
    }
}

fn dot(a: &[Rat], x: &[Rat]) -> Rat {
    a.iter()
        .zip(x)
        .filter(|(c, _)| !c.is_zero())
        .map(|(c, v)| c * v)
        .sum()
}

impl ConstrainedLp {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, var: LpVar) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }

    pub fn objective_value(&self, x: &[Rat]) -> Rat {
        dot(&self.objective, x)
    }

    pub fn constraint_value(&self, x: &[Rat]) -> Option<Rat> {
        self.constraint.as_ref().map(|(c, _)| dot(c, x))
    }

    /// Equality rows and non-negativity hold exactly.
    pub fn satisfies_equalities(&self, x: &[Rat]) -> bool {
        x.len() == self.vars.len()
            && x.iter().all(|v| !v.is_negative())
            && self
                .eq
                .iter()
                .zip(&self.rhs)
                .all(|(row, b)| dot(row, x) == *b)
    }

    pub fn is_feasible(&self, x: &[Rat]) -> bool {
        self.satisfies_equalities(x)
            && self
                .constraint
                .as_ref()
                .is_none_or(|(c, p)| dot(c, x) >= *p)
    }

    /// Number of positive variables attached to each kept MEC.
    pub fn positives_per_mec(&self, x: &[Rat], dec: &MecDecomposition) -> Vec<(usize, usize)> {
        self.row_mecs
            .iter()
            .map(|&m| {
                let n = self
                    .vars
                    .iter()
                    .zip(x)
                    .filter(|(v, val)| {
                        val.is_positive()
                            && match **v {
                                LpVar::Stay { mec, .. } => mec == m,
                                LpVar::Exit { state, .. } => dec.mec_of[state] == m,
                            }
                    })
                    .count();
                (m, n)
            })
            .collect()
    }

    pub fn var_name(&self, j: usize, product: &ProductMdp) -> String {
        match self.vars[j] {
            LpVar::Stay { mec, side } => {
                format!(
                    "x_EC{}_{}",
                    mec + 1,
                    if side == Side::Objective { "A" } else { "B" }
                )
            }
            LpVar::Exit { state, action } => {
                format!(
                    "x_{}_{}",
                    product.name(state),
                    product.mdp().actions()[action]
                )
            }
        }
    }

    /// Plain-text dump in an LP-format-like syntax with exact coefficients.
    pub fn dump(&self, product: &ProductMdp) -> String {
        let term_list = |coefs: &[Rat]| {
            let mut s = String::new();
            for (j, c) in coefs.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let sign = if c.is_negative() { '-' } else { '+' };
                let _ = write!(
                    s,
                    " {sign} {} {}",
                    fmt_rat(&c.abs()),
                    self.var_name(j, product)
                );
            }
            if s.is_empty() {
                s.push_str(" 0");
            }
            s
        };
        let mut out = String::from("maximize\n");
        let _ = writeln!(out, "  obj:{}", term_list(&self.objective));
        out.push_str("subject to\n");
        if let Some((c, p)) = &self.constraint {
            let _ = writeln!(out, "  constr:{} >= {}", term_list(c), fmt_rat(p));
        }
        for (r, row) in self.eq.iter().enumerate() {
            let _ = writeln!(
                out,
                "  flow_EC{}:{} = {}",
                self.row_mecs[r] + 1,
                term_list(row),
                fmt_rat(&self.rhs[r])
            );
        }
        out.push_str("bounds\n  all variables >= 0\nend\n");
        out
    }
}

/// Exact optimum of the program (the inequality gets one slack column).
pub fn solve(lp: &ConstrainedLp) -> Result<LpSolution> {
    let n = lp.num_vars();
    let mut a = lp.eq.clone();
    let mut b = lp.rhs.clone();
    let mut c = lp.objective.clone();
    if let Some((coefs, p)) = &lp.constraint {
        for row in &mut a {
            row.push(Rat::zero());
        }
        let mut row = coefs.clone();
        row.push(-Rat::one());
        a.push(row);
        b.push(p.clone());
        c.push(Rat::zero());
    }
    let res = maximize(&a, &b, &c)?;
    let x: Vec<Rat> = res.x.into_iter().take(n).collect();
    let value = lp.objective_value(&x);
    Ok(LpSolution { value, x })
}
