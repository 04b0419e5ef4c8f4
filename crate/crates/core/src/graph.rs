//! End-component machinery: maximal end components, accepting sub-components
//! for one or both Rabin conditions, and the DAG between MECs.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::model::{Acceptance, ProductMdp, ProductState};
use crate::Side;

/// Positive-probability successor structure: `succ[v]` lists the enabled
/// actions of `v` with their successor sets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Support {
    pub succ: Vec<Vec<(usize, Vec<usize>)>>,
}

impl Support {
    pub fn num_states(&self) -> usize {
        self.succ.len()
    }

    pub fn successors(&self, v: usize, a: usize) -> Option<&[usize]> {
        self.succ[v]
            .iter()
            .find(|(b, _)| *b == a)
            .map(|(_, s)| s.as_slice())
    }
}

/// `(T, act)`: a set of states and, per state, the actions kept inside `T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndComponent {
    pub states: Vec<usize>,
    pub act: BTreeMap<usize, BTreeSet<usize>>,
}

impl EndComponent {
    pub fn contains(&self, v: usize) -> bool {
        self.states.binary_search(&v).is_ok()
    }

    pub fn actions(&self, v: usize) -> Option<&BTreeSet<usize>> {
        self.act.get(&v)
    }

    /// Singleton without internal actions.
    pub fn is_trivial(&self) -> bool {
        self.act.values().all(|a| a.is_empty())
    }

    pub fn has_actions(&self) -> bool {
        !self.is_trivial()
    }

    /// Closure and strong connectivity under `act`.
    pub fn is_end_component(&self, support: &Support) -> bool {
        if self.states.is_empty() {
            return false;
        }
        for (&v, acts) in &self.act {
            for &a in acts {
                match support.successors(v, a) {
                    Some(succ) if succ.iter().all(|t| self.contains(*t)) => {}
                    _ => return false,
                }
            }
        }
        if self.states.len() == 1 {
            return true;
        }
        let idx = |v: usize| self.states.binary_search(&v).unwrap();
        let adj: Vec<Vec<usize>> = self
            .states
            .iter()
            .map(|&v| {
                let mut out = Vec::new();
                for &a in &self.act[&v] {
                    out.extend(support.successors(v, a).unwrap().iter().map(|&t| idx(t)));
                }
                out
            })
            .collect();
        let (_, comps) = tarjan(&adj);
        comps.len() == 1
    }
}

/// Witness accepting end component for one Rabin condition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AecWitness {
    pub ec: EndComponent,
    pub pair: usize,
}

/// Witness end component accepting for both conditions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointWitness {
    pub ec: EndComponent,
    pub pair_obj: usize,
    pub pair_con: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MecClass {
    pub objective: Option<AecWitness>,
    pub constraint: Option<AecWitness>,
    pub joint: Option<JointWitness>,
}

impl MecClass {
    pub fn has(&self, side: Side) -> bool {
        match side {
            Side::Objective => self.objective.is_some(),
            Side::Constraint => self.constraint.is_some(),
        }
    }

    pub fn has_joint(&self) -> bool {
        self.joint.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MecDecomposition {
    pub mecs: Vec<EndComponent>,
    pub mec_of: Vec<usize>,
    pub class: Vec<MecClass>,
    pub dag: Vec<(usize, usize)>,
}

/// Iterative Tarjan. Returns the component id of every node and the
/// components in reverse topological order (sinks first).
pub fn tarjan(adj: &[Vec<usize>]) -> (Vec<usize>, Vec<Vec<usize>>) {
    const NONE: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![NONE; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![NONE; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != NONE {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            if *next < adj[v].len() {
                let w = adj[v][*next];
                *next += 1;
                if index[w] == NONE {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut c = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = comps.len();
                        c.push(w);
                        if w == v {
                            break;
                        }
                    }
                    c.sort_unstable();
                    comps.push(c);
                }
            }
        }
    }
    (comp, comps)
}

/// Maximal end components of the sub-MDP given by `allowed`: `allowed[v]` is
/// `None` for excluded states and otherwise the candidate actions of `v`.
/// Every included state ends up in exactly one returned component; states
/// with no internal action form trivial singletons.
pub fn mec_decompose_within(
    support: &Support,
    allowed: &[Option<BTreeSet<usize>>],
) -> Vec<EndComponent> {
    let n = support.num_states();
    let mut act: Vec<BTreeSet<usize>> = allowed
        .iter()
        .map(|a| a.clone().unwrap_or_default())
        .collect();
    let included = |v: usize| allowed[v].is_some();
    let mut comp;
    loop {
        // drop actions leaving the included set, then split by SCC
        let mut adj = vec![Vec::new(); n];
        for v in (0..n).filter(|&v| included(v)) {
            act[v].retain(|&a| {
                support
                    .successors(v, a)
                    .is_some_and(|s| s.iter().all(|&t| included(t)))
            });
            for &a in &act[v] {
                adj[v].extend_from_slice(support.successors(v, a).unwrap());
            }
        }
        comp = tarjan(&adj).0;
        let mut changed = false;
        for v in (0..n).filter(|&v| included(v)) {
            let before = act[v].len();
            act[v].retain(|&a| {
                support
                    .successors(v, a)
                    .unwrap()
                    .iter()
                    .all(|&t| comp[t] == comp[v])
            });
            changed |= act[v].len() != before;
        }
        if !changed {
            break;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in (0..n).filter(|&v| included(v)) {
        groups.entry(comp[v]).or_default().push(v);
    }
    let mut ecs: Vec<EndComponent> = groups
        .into_values()
        .map(|states| {
            let act = states.iter().map(|&v| (v, act[v].clone())).collect();
            EndComponent { states, act }
        })
        .collect();
    ecs.sort_by_key(|ec| ec.states[0]);
    ecs
}

/// MECs of the whole support, ordered by smallest member.
pub fn mec_decompose(support: &Support) -> Vec<EndComponent> {
    let allowed: Vec<Option<BTreeSet<usize>>> = support
        .succ
        .iter()
        .map(|acts| Some(acts.iter().map(|(a, _)| *a).collect()))
        .collect();
    mec_decompose_within(support, &allowed)
}

/// Nontrivial sub-ECs of `ec` that avoid every state in `forbidden`.
fn sub_ecs(
    support: &Support,
    ec: &EndComponent,
    forbidden: impl Fn(usize) -> bool,
) -> Vec<EndComponent> {
    let mut allowed = vec![None; support.num_states()];
    for &v in &ec.states {
        if !forbidden(v) {
            allowed[v] = Some(ec.act[&v].clone());
        }
    }
    mec_decompose_within(support, &allowed)
        .into_iter()
        .filter(|e| e.has_actions())
        .collect()
}

/// Maximal accepting sub-ECs of `ec` for pair `pair`, ordered by their
/// smallest accepting state.
pub fn accepting_sub_ecs(
    support: &Support,
    ec: &EndComponent,
    acc: &Acceptance,
    states: &[ProductState],
    pair: usize,
) -> Vec<EndComponent> {
    let mut out: Vec<(usize, EndComponent)> = sub_ecs(support, ec, |v| acc.in_fin(pair, states[v]))
        .into_iter()
        .filter_map(|e| {
            let first = e
                .states
                .iter()
                .copied()
                .find(|&v| acc.in_inf(pair, states[v]))?;
            Some((first, e))
        })
        .collect();
    out.sort_by_key(|(k, _)| *k);
    out.into_iter().map(|(_, e)| e).collect()
}

/// Maximal sub-ECs of `ec` accepting for both pairs simultaneously.
pub fn joint_accepting_sub_ecs(
    support: &Support,
    ec: &EndComponent,
    (acc_a, pair_a): (&Acceptance, usize),
    (acc_b, pair_b): (&Acceptance, usize),
    states: &[ProductState],
) -> Vec<EndComponent> {
    let forbidden = |v: usize| acc_a.in_fin(pair_a, states[v]) || acc_b.in_fin(pair_b, states[v]);
    let mut out: Vec<(usize, EndComponent)> = sub_ecs(support, ec, forbidden)
        .into_iter()
        .filter_map(|e| {
            let hit_a = e
                .states
                .iter()
                .copied()
                .find(|&v| acc_a.in_inf(pair_a, states[v]))?;
            let hit_b = e
                .states
                .iter()
                .copied()
                .find(|&v| acc_b.in_inf(pair_b, states[v]))?;
            Some((hit_a.min(hit_b), e))
        })
        .collect();
    out.sort_by_key(|(k, _)| *k);
    out.into_iter().map(|(_, e)| e).collect()
}

/// First accepting witness inside `mec`, trying pairs in order.
pub fn find_aec(
    support: &Support,
    mec: &EndComponent,
    acc: &Acceptance,
    states: &[ProductState],
) -> Option<AecWitness> {
    (0..acc.len()).find_map(|pair| {
        accepting_sub_ecs(support, mec, acc, states, pair)
            .into_iter()
            .next()
            .map(|ec| AecWitness { ec, pair })
    })
}

/// First witness accepting for both conditions, trying pair combinations in
/// lexicographic order.
pub fn find_joint_aec(
    support: &Support,
    mec: &EndComponent,
    acc_a: &Acceptance,
    acc_b: &Acceptance,
    states: &[ProductState],
) -> Option<JointWitness> {
    for i in 0..acc_a.len() {
        for j in 0..acc_b.len() {
            if let Some(ec) = joint_accepting_sub_ecs(support, mec, (acc_a, i), (acc_b, j), states)
                .into_iter()
                .next()
            {
                return Some(JointWitness {
                    ec,
                    pair_obj: i,
                    pair_con: j,
                });
            }
        }
    }
    None
}

/// Edges `(i, j)`, `i ≠ j`, whenever some enabled action of a state in MEC
/// `i` reaches MEC `j`.
pub fn mec_dag(support: &Support, mec_of: &[usize]) -> Vec<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for (v, acts) in support.succ.iter().enumerate() {
        for (_, succ) in acts {
            for &t in succ {
                if mec_of[v] != mec_of[t] {
                    edges.insert((mec_of[v], mec_of[t]));
                }
            }
        }
    }
    edges.into_iter().collect()
}

/// Full decomposition of a product: MECs, per-MEC classification, DAG.
pub fn decompose(product: &ProductMdp) -> MecDecomposition {
    let support = product.support();
    decompose_support(
        &support,
        product.states(),
        product.acceptance(Side::Objective),
        product.acceptance(Side::Constraint),
    )
}

pub fn decompose_support(
    support: &Support,
    states: &[ProductState],
    acc_a: &Acceptance,
    acc_b: &Acceptance,
) -> MecDecomposition {
    let mecs = mec_decompose(support);
    let mut mec_of = vec![0; support.num_states()];
    for (i, m) in mecs.iter().enumerate() {
        for &v in &m.states {
            mec_of[v] = i;
        }
    }
    let class = mecs
        .iter()
        .map(|m| MecClass {
            objective: find_aec(support, m, acc_a, states),
            constraint: find_aec(support, m, acc_b, states),
            joint: find_joint_aec(support, m, acc_a, acc_b, states),
        })
        .collect();
    let dag = mec_dag(support, &mec_of);
    MecDecomposition {
        mecs,
        mec_of,
        class,
        dag,
    }
}

impl MecDecomposition {
    pub fn initial_mec(&self, product: &ProductMdp) -> usize {
        self.mec_of[product.initial()]
    }

    /// MEC indices reachable in the DAG from `start` (inclusive), ascending.
    pub fn reachable_from(&self, start: usize) -> Vec<usize> {
        let mut seen = vec![false; self.mecs.len()];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for &(a, b) in &self.dag {
                if a == i && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        (0..self.mecs.len()).filter(|&i| seen[i]).collect()
    }

    /// Topological order of the DAG, or `None` if it has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.mecs.len();
        let mut indeg = vec![0; n];
        for &(_, b) in &self.dag {
            indeg[b] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &(a, b) in &self.dag {
                if a == i {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        ready.push(b);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Diagnostic JSON dump.
    pub fn to_json(&self, product: &ProductMdp) -> serde_json::Value {
        #[derive(Serialize)]
        struct MecDump {
            states: Vec<String>,
            actions: BTreeMap<String, Vec<String>>,
            has_a: bool,
            has_b: bool,
            has_ab: bool,
        }
        let actions = product.mdp().actions();
        let mecs: Vec<MecDump> = self
            .mecs
            .iter()
            .zip(&self.class)
            .map(|(m, c)| MecDump {
                states: m.states.iter().map(|&v| product.name(v)).collect(),
                actions: m
                    .act
                    .iter()
                    .map(|(&v, acts)| {
                        (
                            product.name(v),
                            acts.iter().map(|&a| actions[a].clone()).collect(),
                        )
                    })
                    .collect(),
                has_a: c.objective.is_some(),
                has_b: c.constraint.is_some(),
                has_ab: c.joint.is_some(),
            })
            .collect();
        let mut value = serde_json::json!({ "mecs": mecs, "dag": self.dag });
        // keep the documented key spelling
        for m in value["mecs"].as_array_mut().unwrap() {
            let obj = m.as_object_mut().unwrap();
            for (from, to) in [("has_a", "has_A"), ("has_b", "has_B"), ("has_ab", "has_AB")] {
                let x = obj.remove(from).unwrap();
                obj.insert(to.into(), x);
            }
        }
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn fig3_has_five_mecs() {
        let f = fixtures::fig3();
        let dec = decompose(&f.product);
        let (a, b) = (0, 1);
        let states: Vec<Vec<usize>> = dec.mecs.iter().map(|m| m.states.clone()).collect();
        assert_eq!(
            states,
            vec![vec![0], vec![1, 4, 5], vec![2], vec![3], vec![6]]
        );
        assert!(dec.mecs[0].is_trivial());
        assert_eq!(dec.mecs[1].act[&5], set(&[b]));
        assert_eq!(dec.mecs[1].act[&1], set(&[a, b]));
        assert_eq!(dec.mecs[1].act[&4], set(&[a, b]));
        assert_eq!(dec.mecs[2].act[&2], set(&[a, b]));
        assert_eq!(dec.mecs[3].act[&3], set(&[a]));
        assert_eq!(dec.mecs[4].act[&6], set(&[a, b]));
    }

    #[test]
    fn fig3_classification() {
        let f = fixtures::fig3();
        let dec = decompose(&f.product);
        let flags: Vec<(bool, bool, bool)> = dec
            .class
            .iter()
            .map(|c| {
                (
                    c.objective.is_some(),
                    c.constraint.is_some(),
                    c.joint.is_some(),
                )
            })
            .collect();
        assert_eq!(
            flags,
            vec![
                (false, false, false),
                (true, true, true),
                (false, false, false),
                (false, true, false),
                (true, false, false),
            ]
        );
        let w = dec.class[1].objective.as_ref().unwrap();
        assert!(w.ec.contains(4));
        let j = dec.class[1].joint.as_ref().unwrap();
        assert_eq!(j.ec.states, vec![1, 4, 5]);
        for c in &dec.class {
            if c.joint.is_some() {
                assert!(c.objective.is_some() && c.constraint.is_some());
            }
        }
    }

    #[test]
    fn fig3_dag() {
        let f = fixtures::fig3();
        let dec = decompose(&f.product);
        assert_eq!(dec.dag, vec![(0, 1), (0, 2), (0, 3), (1, 3), (3, 4)]);
        assert!(dec.topological_order().is_some());
    }

    #[test]
    fn mec_without_accepting_states_has_no_witness() {
        let f = fixtures::fig3();
        let support = f.product.support();
        let dec = decompose(&f.product);
        let acc_a = f.product.acceptance(Side::Objective);
        let acc_b = f.product.acceptance(Side::Constraint);
        assert!(find_aec(&support, &dec.mecs[2], acc_a, f.product.states()).is_none());
        assert!(find_aec(&support, &dec.mecs[2], acc_b, f.product.states()).is_none());
        assert!(find_joint_aec(&support, &dec.mecs[3], acc_a, acc_b, f.product.states()).is_none());
        let empty = Acceptance::default();
        assert!(
            find_joint_aec(&support, &dec.mecs[1], acc_a, &empty, f.product.states()).is_none()
        );
    }

    #[test]
    fn absorbing_state_is_one_mec() {
        let support = Support {
            succ: vec![vec![(0, vec![0])]],
        };
        let mecs = mec_decompose(&support);
        assert_eq!(mecs.len(), 1);
        assert_eq!(mecs[0].act[&0], set(&[0]));
    }

    #[test]
    fn deep_chain_does_not_overflow() {
        let n = 200_000;
        let succ = (0..n)
            .map(|v| vec![(0, vec![(v + 1).min(n - 1)])])
            .collect();
        let mecs = mec_decompose(&Support { succ });
        assert_eq!(mecs.len(), n);
        assert!(mecs[n - 1].has_actions());
    }

    #[test]
    fn fig3_dump_has_documented_keys() {
        let f = fixtures::fig3();
        let dec = decompose(&f.product);
        let v = dec.to_json(&f.product);
        assert_eq!(v["mecs"].as_array().unwrap().len(), 5);
        assert_eq!(v["mecs"][1]["has_AB"], serde_json::json!(true));
        assert_eq!(v["dag"][0], serde_json::json!([0, 1]));
    }
}
