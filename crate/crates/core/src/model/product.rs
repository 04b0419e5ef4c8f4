use std::collections::{BTreeSet, HashMap, VecDeque};

use super::{LabeledMdp, Letter, RabinAutomaton, Row};
use crate::error::{Error, Result};
use crate::graph::Support;

/// Which product coordinate an acceptance pair ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coord {
    /// States of the objective automaton.
    Objective,
    /// States of the constraint automaton.
    Constraint,
    /// MDP states directly (used by fixtures that are given at product level).
    Mdp,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentPair {
    pub coord: Coord,
    pub inf: BTreeSet<usize>,
    pub fin: BTreeSet<usize>,
}

/// Rabin acceptance over product states.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Acceptance {
    pub pairs: Vec<ComponentPair>,
}

impl Acceptance {
    pub fn from_automaton(aut: &RabinAutomaton, coord: Coord) -> Self {
        Acceptance {
            pairs: aut
                .pairs()
                .iter()
                .map(|p| ComponentPair {
                    coord,
                    inf: p.inf.clone(),
                    fin: p.fin.clone(),
                })
                .collect(),
        }
    }

    pub fn mdp_level(pairs: Vec<(Vec<usize>, Vec<usize>)>) -> Self {
        Acceptance {
            pairs: pairs
                .into_iter()
                .map(|(inf, fin)| ComponentPair {
                    coord: Coord::Mdp,
                    inf: inf.into_iter().collect(),
                    fin: fin.into_iter().collect(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn in_inf(&self, pair: usize, st: ProductState) -> bool {
        let p = &self.pairs[pair];
        p.inf.contains(&st.coord(p.coord))
    }

    pub fn in_fin(&self, pair: usize, st: ProductState) -> bool {
        let p = &self.pairs[pair];
        p.fin.contains(&st.coord(p.coord))
    }

    /// Rabin condition on a set of recurrent product states.
    pub fn accepts<I>(&self, states: I) -> bool
    where
        I: IntoIterator<Item = ProductState> + Clone,
    {
        (0..self.len()).any(|i| {
            let mut hit = false;
            for st in states.clone() {
                if self.in_fin(i, st) {
                    return false;
                }
                hit |= self.in_inf(i, st);
            }
            hit
        })
    }
}

/// Component coordinates `(s, q, q')` of a product state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductState {
    pub s: usize,
    pub q: usize,
    pub q2: usize,
}

impl ProductState {
    pub fn coord(self, c: Coord) -> usize {
        match c {
            Coord::Objective => self.q,
            Coord::Constraint => self.q2,
            Coord::Mdp => self.s,
        }
    }
}

/// Reachable fragment of `S × Q × Q'` with the lifted kernel.
#[derive(Clone, Debug)]
pub struct ProductMdp {
    mdp: LabeledMdp,
    objective: RabinAutomaton,
    constraint: RabinAutomaton,
    letter_obj: Vec<Letter>,
    letter_con: Vec<Letter>,
    states: Vec<ProductState>,
    index: HashMap<ProductState, usize>,
    rows: Vec<Vec<Option<Row>>>,
    acc_obj: Acceptance,
    acc_con: Acceptance,
}

/// Synchronises `mdp` with the objective and constraint automata.
pub fn build_product(
    mdp: &LabeledMdp,
    obj: &RabinAutomaton,
    con: &RabinAutomaton,
) -> Result<ProductMdp> {
    ProductMdp::assemble(
        mdp.clone(),
        obj.clone(),
        con.clone(),
        Acceptance::from_automaton(obj, Coord::Objective),
        Acceptance::from_automaton(con, Coord::Constraint),
    )
}

fn translate_letters(mdp: &LabeledMdp, aut: &RabinAutomaton) -> Result<Vec<Letter>> {
    let mine: BTreeSet<&String> = mdp.aps().iter().collect();
    let theirs: BTreeSet<&String> = aut.aps().iter().collect();
    if mine != theirs {
        return Err(Error::ApMismatch(format!(
            "MDP has {:?}, automaton has {:?}",
            mdp.aps(),
            aut.aps()
        )));
    }
    let map: Vec<usize> = mdp
        .aps()
        .iter()
        .map(|a| aut.aps().iter().position(|b| b == a).unwrap())
        .collect();
    Ok((0..mdp.num_states())
        .map(|s| {
            let l = mdp.label(s);
            map.iter()
                .enumerate()
                .filter(|(i, _)| l.contains(*i))
                .fold(Letter::EMPTY, |acc, (_, &j)| acc.with(j))
        })
        .collect())
}

impl ProductMdp {
    /// Product with MDP-level acceptance and one-state automata; the product
    /// state space is then the reachable part of the MDP itself.
    pub fn synthetic(
        mdp: LabeledMdp,
        objective: Acceptance,
        constraint: Acceptance,
    ) -> Result<Self> {
        let obj = RabinAutomaton::trivial(mdp.aps().to_vec(), false);
        let con = RabinAutomaton::trivial(mdp.aps().to_vec(), false);
        ProductMdp::assemble(mdp, obj, con, objective, constraint)
    }

    pub fn assemble(
        mdp: LabeledMdp,
        objective: RabinAutomaton,
        constraint: RabinAutomaton,
        acc_obj: Acceptance,
        acc_con: Acceptance,
    ) -> Result<Self> {
        let letter_obj = translate_letters(&mdp, &objective)?;
        let letter_con = translate_letters(&mdp, &constraint)?;
        let init = ProductState {
            s: mdp.initial(),
            q: objective.initial(),
            q2: constraint.initial(),
        };
        let mut states = vec![init];
        let mut index = HashMap::from([(init, 0usize)]);
        let mut rows: Vec<Vec<Option<Row>>> = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            let st = states[v];
            let q = objective.step(st.q, letter_obj[st.s]);
            let q2 = constraint.step(st.q2, letter_con[st.s]);
            let mut lifted = vec![None; mdp.num_actions()];
            for (a, row) in mdp.enabled(st.s) {
                let mut out = Vec::with_capacity(row.len());
                for (t, p) in row {
                    let succ = ProductState { s: *t, q, q2 };
                    let id = *index.entry(succ).or_insert_with(|| {
                        states.push(succ);
                        queue.push_back(states.len() - 1);
                        states.len() - 1
                    });
                    out.push((id, p.clone()));
                }
                out.sort_by_key(|(id, _)| *id);
                lifted[a] = Some(out);
            }
            if rows.len() <= v {
                rows.resize(v + 1, Vec::new());
            }
            rows[v] = lifted;
        }
        Ok(ProductMdp {
            mdp,
            objective,
            constraint,
            letter_obj,
            letter_con,
            states,
            index,
            rows,
            acc_obj,
            acc_con,
        })
    }

    pub fn mdp(&self) -> &LabeledMdp {
        &self.mdp
    }

    pub fn objective_automaton(&self) -> &RabinAutomaton {
        &self.objective
    }

    pub fn constraint_automaton(&self) -> &RabinAutomaton {
        &self.constraint
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn state(&self, v: usize) -> ProductState {
        self.states[v]
    }

    pub fn states(&self) -> &[ProductState] {
        &self.states
    }

    pub fn index_of(&self, st: ProductState) -> Option<usize> {
        self.index.get(&st).copied()
    }

    pub fn row(&self, v: usize, a: usize) -> Option<&Row> {
        self.rows[v][a].as_ref()
    }

    pub fn enabled(&self, v: usize) -> impl Iterator<Item = (usize, &Row)> + '_ {
        self.rows[v]
            .iter()
            .enumerate()
            .filter_map(|(a, r)| r.as_ref().map(|r| (a, r)))
    }

    pub fn enabled_actions(&self, v: usize) -> Vec<usize> {
        self.enabled(v).map(|(a, _)| a).collect()
    }

    pub fn acceptance(&self, side: crate::Side) -> &Acceptance {
        match side {
            crate::Side::Objective => &self.acc_obj,
            crate::Side::Constraint => &self.acc_con,
        }
    }

    /// Automaton coordinates after leaving MDP state `s` from `(q, q2)`.
    pub fn step_automata(&self, q: usize, q2: usize, s: usize) -> (usize, usize) {
        (
            self.objective.step(q, self.letter_obj[s]),
            self.constraint.step(q2, self.letter_con[s]),
        )
    }

    /// Successor coordinates of `st` when the MDP moves to `s_next`.
    pub fn successor(&self, st: ProductState, s_next: usize) -> ProductState {
        let (q, q2) = self.step_automata(st.q, st.q2, st.s);
        ProductState { s: s_next, q, q2 }
    }

    /// `"s|q|q'"` encoding used in policy files.
    pub fn name(&self, v: usize) -> String {
        self.name_of(self.states[v])
    }

    pub fn name_of(&self, st: ProductState) -> String {
        format!(
            "{}|{}|{}",
            self.mdp.states()[st.s],
            self.objective.states()[st.q],
            self.constraint.states()[st.q2]
        )
    }

    pub fn parse_name(&self, name: &str) -> Option<ProductState> {
        let mut it = name.split('|');
        let s = self.mdp.state_index(it.next()?)?;
        let (qn, q2n) = (it.next()?, it.next()?);
        let q = self.objective.states().iter().position(|x| x == qn)?;
        let q2 = self.constraint.states().iter().position(|x| x == q2n)?;
        if it.next().is_some() {
            return None;
        }
        Some(ProductState { s, q, q2 })
    }

    /// Positive-probability successor structure.
    pub fn support(&self) -> Support {
        Support {
            succ: (0..self.num_states())
                .map(|v| {
                    self.enabled(v)
                        .map(|(a, row)| (a, row.iter().map(|(t, _)| *t).collect()))
                        .collect()
                })
                .collect(),
        }
    }

    /// Cardinalities `(|S|, |Q|, |Q'|)` of the component state spaces.
    pub fn shape(&self) -> (usize, usize, usize) {
        (
            self.mdp.num_states(),
            self.objective.num_states(),
            self.constraint.num_states(),
        )
    }
}
