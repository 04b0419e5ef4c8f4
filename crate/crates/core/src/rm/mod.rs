//! Translation of the constrained problem into two reward machines sharing
//! the state `(E, f)`: `E` is the set of MDP transitions seen so far and `f`
//! the commitment flag. Committal actions `1..=2|V|` extend the action set;
//! they leave the environment untouched.

pub mod counterexample;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{evaluate_stationary, pick, Sampler};
use crate::graph::{
    accepting_sub_ecs, decompose_support, joint_accepting_sub_ecs, EndComponent, Support,
};
use crate::model::{Acceptance, ProductMdp, ProductState};
use crate::rational::to_f64;
use crate::synthesis::{MixturePolicy, StationaryPolicy};
use crate::Side;

/// MDP-level transition `(s, a, s')`.
pub type Transition = (usize, usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flag {
    Top,
    Bottom,
    /// Committed to index `index` (1-based), currently heading for `side`.
    Committed {
        index: usize,
        side: Side,
    },
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::Top => write!(f, "top"),
            Flag::Bottom => write!(f, "bottom"),
            Flag::Committed { index, side } => {
                write!(
                    f,
                    "{index}:{}",
                    if *side == Side::Objective { "A" } else { "B" }
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RmState {
    pub e: BTreeSet<Transition>,
    pub flag: Flag,
}

impl Default for RmState {
    fn default() -> Self {
        RmState {
            e: BTreeSet::new(),
            flag: Flag::Top,
        }
    }
}

/// Action of the extended product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExtAction {
    Env(usize),
    /// 1-based committal action.
    Commit(usize),
}

/// BFS distances to a target set inside an EC and the distance-decreasing
/// actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShortestPaths {
    pub dist: BTreeMap<usize, usize>,
    pub allowed: BTreeMap<usize, BTreeSet<usize>>,
}

pub fn shortest_path_actions(
    support: &Support,
    ec: &EndComponent,
    targets: &BTreeSet<usize>,
) -> Result<ShortestPaths> {
    let mut pred: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&v, acts) in &ec.act {
        for &a in acts {
            for &t in support.successors(v, a).unwrap_or(&[]) {
                pred.entry(t).or_default().push(v);
            }
        }
    }
    let mut dist = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &t in targets {
        if ec.contains(t) {
            dist.insert(t, 0);
            queue.push_back(t);
        }
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        for &u in pred.get(&v).map_or(&[][..], |p| p.as_slice()) {
            if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(u) {
                e.insert(d + 1);
                queue.push_back(u);
            }
        }
    }
    if dist.len() != ec.states.len() {
        return Err(Error::Precondition(
            "target set unreachable inside the end component".into(),
        ));
    }
    let allowed = ec
        .act
        .iter()
        .map(|(&v, acts)| {
            let keep = if dist[&v] == 0 {
                acts.clone()
            } else {
                acts.iter()
                    .copied()
                    .filter(|&a| {
                        support
                            .successors(v, a)
                            .unwrap_or(&[])
                            .iter()
                            .any(|t| dist.get(t) == Some(&(dist[&v] - 1)))
                    })
                    .collect()
            };
            (v, keep)
        })
        .collect();
    Ok(ShortestPaths { dist, allowed })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexedEc {
    pub ec: EndComponent,
    pub objective: bool,
    pub constraint: bool,
    /// `[objective, constraint]` Inf-states of the first accepting pair.
    pub targets: [BTreeSet<usize>; 2],
    pub paths: [Option<ShortestPaths>; 2],
}

fn side_slot(side: Side) -> usize {
    match side {
        Side::Objective => 0,
        Side::Constraint => 1,
    }
}

impl IndexedEc {
    pub fn is_joint(&self) -> bool {
        self.objective && self.constraint
    }

    pub fn accepts(&self, side: Side) -> bool {
        match side {
            Side::Objective => self.objective,
            Side::Constraint => self.constraint,
        }
    }

    pub fn targets(&self, side: Side) -> &BTreeSet<usize> {
        &self.targets[side_slot(side)]
    }

    pub fn allowed(&self, side: Side, v: usize) -> Option<&BTreeSet<usize>> {
        self.paths[side_slot(side)]
            .as_ref()
            .and_then(|p| p.allowed.get(&v))
    }
}

/// The full state space `S × Q × Q'` in lexicographic order.
pub fn full_states(product: &ProductMdp) -> Vec<ProductState> {
    let (ns, nq, nq2) = product.shape();
    let mut out = Vec::with_capacity(ns * nq * nq2);
    for s in 0..ns {
        for q in 0..nq {
            for q2 in 0..nq2 {
                out.push(ProductState { s, q, q2 });
            }
        }
    }
    out
}

/// Product graph over the full state space induced by the transitions `e`.
pub fn induced_support(product: &ProductMdp, e: &BTreeSet<Transition>) -> Support {
    let (ns, nq, nq2) = product.shape();
    let pos = |st: ProductState| (st.s * nq + st.q) * nq2 + st.q2;
    let mut by_source: Vec<BTreeMap<usize, Vec<usize>>> = vec![BTreeMap::new(); ns];
    for &(s, a, t) in e {
        by_source[s].entry(a).or_default().push(t);
    }
    Support {
        succ: full_states(product)
            .into_iter()
            .map(|st| {
                let (q, q2) = product.step_automata(st.q, st.q2, st.s);
                by_source[st.s]
                    .iter()
                    .map(|(&a, ts)| {
                        let mut succ: Vec<usize> = ts
                            .iter()
                            .map(|&t| pos(ProductState { s: t, q, q2 }))
                            .collect();
                        succ.sort_unstable();
                        succ.dedup();
                        (a, succ)
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Indexed accepting ECs of the graph induced by `E`: slot `2j+1` holds the
/// jointly accepting EC containing the state at position `j` (or else an
/// objective-accepting one), slot `2j+2` a constraint-accepting one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EcIndex {
    shape: (usize, usize, usize),
    ecs: Vec<IndexedEc>,
    slots: Vec<Option<usize>>,
}

fn first_accepting_pair(
    acc: &Acceptance,
    ec: &EndComponent,
    states: &[ProductState],
) -> Option<usize> {
    (0..acc.len()).find(|&i| {
        ec.states.iter().all(|&v| !acc.in_fin(i, states[v]))
            && ec.states.iter().any(|&v| acc.in_inf(i, states[v]))
    })
}

pub fn enumerate_ecs(product: &ProductMdp, e: &BTreeSet<Transition>) -> EcIndex {
    let states = full_states(product);
    let support = induced_support(product, e);
    let acc_a = product.acceptance(Side::Objective);
    let acc_b = product.acceptance(Side::Constraint);
    let dec = decompose_support(&support, &states, acc_a, acc_b);
    let mut ecs: Vec<IndexedEc> = Vec::new();
    let mut intern = |ec: EndComponent| -> usize {
        if let Some(i) = ecs.iter().position(|x| x.ec == ec) {
            return i;
        }
        let mut targets: [BTreeSet<usize>; 2] = Default::default();
        let mut paths: [Option<ShortestPaths>; 2] = Default::default();
        let mut flags = [false; 2];
        for (k, acc) in [acc_a, acc_b].into_iter().enumerate() {
            if let Some(pair) = first_accepting_pair(acc, &ec, &states) {
                flags[k] = true;
                targets[k] = ec
                    .states
                    .iter()
                    .copied()
                    .filter(|&v| acc.in_inf(pair, states[v]))
                    .collect();
                paths[k] = Some(
                    shortest_path_actions(&support, &ec, &targets[k])
                        .expect("accepting EC reaches its targets"),
                );
            }
        }
        ecs.push(IndexedEc {
            ec,
            objective: flags[0],
            constraint: flags[1],
            targets,
            paths,
        });
        ecs.len() - 1
    };
    let mut slots = vec![None; 2 * states.len()];
    for (m, mec) in dec.mecs.iter().enumerate() {
        if !mec.has_actions() || dec.class[m] == Default::default() {
            continue;
        }
        let mut joint = Vec::new();
        for i in 0..acc_a.len() {
            for j in 0..acc_b.len() {
                joint.extend(joint_accepting_sub_ecs(
                    &support,
                    mec,
                    (acc_a, i),
                    (acc_b, j),
                    &states,
                ));
            }
        }
        let single = |acc: &Acceptance| -> Vec<EndComponent> {
            (0..acc.len())
                .flat_map(|i| accepting_sub_ecs(&support, mec, acc, &states, i))
                .collect()
        };
        let (only_a, only_b) = (single(acc_a), single(acc_b));
        for &v in &mec.states {
            let containing = |list: &[EndComponent]| list.iter().find(|ec| ec.contains(v)).cloned();
            if let Some(ec) = containing(&joint) {
                slots[2 * v] = Some(intern(ec));
            } else {
                slots[2 * v] = containing(&only_a).map(&mut intern);
                slots[2 * v + 1] = containing(&only_b).map(&mut intern);
            }
        }
    }
    EcIndex {
        shape: product.shape(),
        ecs,
        slots,
    }
}

impl EcIndex {
    /// `2|V|`, the number of committal actions.
    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn position(&self, st: ProductState) -> usize {
        let (_, nq, nq2) = self.shape;
        (st.s * nq + st.q) * nq2 + st.q2
    }

    /// Entry at 1-based index `i`.
    pub fn get(&self, i: usize) -> Option<&IndexedEc> {
        i.checked_sub(1)
            .and_then(|k| self.slots.get(k))
            .copied()
            .flatten()
            .map(|e| &self.ecs[e])
    }

    /// Number of nonempty indices.
    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The two indices `(2j+1, 2j+2)` of position `j`.
    pub fn indices_of(&self, pos: usize) -> [usize; 2] {
        [2 * pos + 1, 2 * pos + 2]
    }
}

/// One step of the shared reward-machine state on the extended transition
/// `(v, a, v2)`. Returns whether `E` grew.
pub fn rm_step(
    rm: &mut RmState,
    index: &EcIndex,
    product: &ProductMdp,
    v: ProductState,
    a: ExtAction,
    v2: ProductState,
) -> Result<bool> {
    match a {
        ExtAction::Env(act) => {
            let ok = product
                .mdp()
                .row(v.s, act)
                .is_some_and(|row| row.iter().any(|(t, _)| *t == v2.s))
                && product.successor(v, v2.s) == v2;
            if !ok {
                return Err(Error::Invalid(format!(
                    "observation {} --{}--> {} is not a transition",
                    product.name_of(v),
                    act,
                    product.name_of(v2)
                )));
            }
            if rm.e.insert((v.s, act, v2.s)) {
                rm.flag = Flag::Top;
                return Ok(true);
            }
        }
        ExtAction::Commit(i) => {
            if i == 0 || i > index.capacity() || v != v2 {
                return Err(Error::Invalid(format!("malformed committal action {i}")));
            }
            if rm.flag == Flag::Top {
                rm.flag = match index.get(i) {
                    Some(ec) if ec.objective => Flag::Committed {
                        index: i,
                        side: Side::Objective,
                    },
                    Some(ec) if ec.constraint => Flag::Committed {
                        index: i,
                        side: Side::Constraint,
                    },
                    _ => Flag::Bottom,
                };
                return Ok(false);
            }
        }
    }
    if let Flag::Committed { index: i, side } = rm.flag {
        let ec = index.get(i).expect("committed index is nonempty");
        if ec.is_joint() && ec.targets(side).contains(&index.position(v2)) {
            rm.flag = Flag::Committed {
                index: i,
                side: side.other(),
            };
        } else {
            let pv = index.position(v);
            if ec.ec.contains(pv) {
                let compliant = matches!(a, ExtAction::Env(act) if ec.allowed(side, pv).is_some_and(|s| s.contains(&act)));
                if !compliant {
                    rm.flag = Flag::Bottom;
                }
            }
        }
    }
    Ok(false)
}

/// `(r_objective, r_constraint)` emitted on arriving at `v`.
pub fn rm_rewards(rm: &RmState, index: &EcIndex, v: ProductState) -> (u8, u8) {
    match rm.flag {
        Flag::Committed { index: i, .. } => match index.get(i) {
            Some(ec) if ec.ec.contains(index.position(v)) => {
                (ec.objective as u8, ec.constraint as u8)
            }
            _ => (0, 0),
        },
        _ => (0, 0),
    }
}

/// Shared memo of EC indices keyed by `E`.
pub struct IndexCache<'a> {
    product: &'a ProductMdp,
    map: Mutex<HashMap<Vec<Transition>, Arc<EcIndex>>>,
    /// Floating-point product rows for sampling.
    rows: Vec<Vec<Vec<(usize, f64)>>>,
}

impl<'a> IndexCache<'a> {
    pub fn new(product: &'a ProductMdp) -> Self {
        let rows = (0..product.num_states())
            .map(|v| {
                (0..product.num_actions())
                    .map(|a| {
                        product.row(v, a).map_or_else(Vec::new, |r| {
                            r.iter().map(|(t, p)| (*t, to_f64(p))).collect()
                        })
                    })
                    .collect()
            })
            .collect();
        IndexCache {
            product,
            map: Mutex::new(HashMap::new()),
            rows,
        }
    }

    pub fn get(&self, e: &BTreeSet<Transition>) -> Arc<EcIndex> {
        let key: Vec<Transition> = e.iter().copied().collect();
        if let Some(ix) = self.map.lock().unwrap().get(&key) {
            return ix.clone();
        }
        let ix = Arc::new(enumerate_ecs(self.product, e));
        self.map.lock().unwrap().entry(key).or_insert(ix).clone()
    }
}

/// A policy over the extended action set.
pub trait ExtendedPolicy {
    /// Called at the start of every episode.
    fn start(&mut self, rng: &mut ChaCha8Rng);
    fn choose(
        &mut self,
        v: usize,
        rm: &RmState,
        index: &EcIndex,
        rng: &mut ChaCha8Rng,
    ) -> ExtAction;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Joint,
    Objective,
    Constraint,
}

struct Component {
    sampler: Sampler,
    /// Classification of the BSCC each recurrent state belongs to.
    kind: Vec<Option<Kind>>,
}

impl Component {
    fn new(product: &ProductMdp, pi: &StationaryPolicy) -> Result<Self> {
        let report = evaluate_stationary(product, pi)?;
        let mut kind = vec![None; product.num_states()];
        for b in &report.bsccs {
            let k = match (b.objective, b.constraint) {
                (true, true) => Some(Kind::Joint),
                (true, false) => Some(Kind::Objective),
                (false, true) => Some(Kind::Constraint),
                (false, false) => None,
            };
            for &v in &b.states {
                kind[v] = k;
            }
        }
        Ok(Component {
            sampler: Sampler::new(product, pi),
            kind,
        })
    }
}

/// Plays a mixture component until its run sits in a recurrent class that
/// the index can certify, commits to that class and then follows
/// shortest-path actions inside it.
pub struct CommitmentPolicy<'a> {
    product: &'a ProductMdp,
    lambda: f64,
    components: [Arc<Component>; 2],
    active: usize,
    commit: bool,
}

impl<'a> CommitmentPolicy<'a> {
    pub fn new(product: &'a ProductMdp, policy: &MixturePolicy) -> Result<Self> {
        let first = Arc::new(Component::new(product, &policy.first)?);
        let second = if policy.first == policy.second {
            first.clone()
        } else {
            Arc::new(Component::new(product, &policy.second)?)
        };
        Ok(CommitmentPolicy {
            product,
            lambda: to_f64(&policy.lambda),
            components: [first, second],
            active: 0,
            commit: true,
        })
    }

    /// Same behaviour without ever playing a committal action.
    pub fn never_commit(mut self) -> Self {
        self.commit = false;
        self
    }

    fn commit_index(&self, kind: Kind, pos: usize, index: &EcIndex) -> Option<usize> {
        let [first, second] = index.indices_of(pos);
        let at = |i: usize| index.get(i);
        let joint = at(first).filter(|e| e.is_joint()).map(|_| first);
        match kind {
            Kind::Joint => joint,
            Kind::Objective => at(first)
                .filter(|e| e.objective && !e.constraint)
                .map(|_| first)
                .or(joint),
            Kind::Constraint => at(second)
                .filter(|e| e.constraint)
                .map(|_| second)
                .or(joint),
        }
    }
}

impl Clone for CommitmentPolicy<'_> {
    fn clone(&self) -> Self {
        CommitmentPolicy {
            product: self.product,
            lambda: self.lambda,
            components: self.components.clone(),
            active: self.active,
            commit: self.commit,
        }
    }
}

impl ExtendedPolicy for CommitmentPolicy<'_> {
    fn start(&mut self, rng: &mut ChaCha8Rng) {
        self.active = if rng.gen::<f64>() < self.lambda { 0 } else { 1 };
    }

    fn choose(
        &mut self,
        v: usize,
        rm: &RmState,
        index: &EcIndex,
        rng: &mut ChaCha8Rng,
    ) -> ExtAction {
        let comp = &self.components[self.active];
        let pos = index.position(self.product.state(v));
        match rm.flag {
            Flag::Top if self.commit => {
                if let Some(i) = comp.kind[v].and_then(|k| self.commit_index(k, pos, index)) {
                    return ExtAction::Commit(i);
                }
            }
            Flag::Committed { index: i, side } => {
                if let Some(allowed) = index.get(i).and_then(|ec| ec.allowed(side, pos)) {
                    let acts: Vec<usize> = allowed.iter().copied().collect();
                    if !acts.is_empty() {
                        return ExtAction::Env(acts[rng.gen_range(0..acts.len())]);
                    }
                }
            }
            _ => {}
        }
        ExtAction::Env(comp.sampler.action(rng, v))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub step: usize,
    pub env_state: String,
    pub action: String,
    pub e_size: usize,
    pub flag: Flag,
    pub r_a: u8,
    pub r_b: u8,
}

pub const TRACE_HEADER: &str = "step,env_state,action,E_size,flag,r_A,r_B";

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.step, r.env_state, r.action, r.e_size, r.flag, r.r_a, r.r_b
        ));
    }
    s
}

/// Runs the extended product for `horizon` steps and returns the average
/// rewards of both machines. Committal actions count as steps.
pub fn simulate_limit_average<P: ExtendedPolicy>(
    product: &ProductMdp,
    cache: &IndexCache<'_>,
    policy: &mut P,
    horizon: usize,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<(f64, f64)> {
    if horizon == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    let mut rm = RmState::default();
    let mut index = cache.get(&rm.e);
    let mut v = product.initial();
    let (mut sum_a, mut sum_b) = (0u64, 0u64);
    for step in 0..horizon {
        let a = policy.choose(v, &rm, &index, rng);
        let next = match a {
            ExtAction::Env(act) => {
                let row = &cache.rows[v][act];
                if row.is_empty() {
                    return Err(Error::Policy(format!(
                        "disabled action at {}",
                        product.name(v)
                    )));
                }
                pick(rng, row)
            }
            ExtAction::Commit(_) => v,
        };
        if rm_step(
            &mut rm,
            &index,
            product,
            product.state(v),
            a,
            product.state(next),
        )? {
            index = cache.get(&rm.e);
        }
        let (ra, rb) = rm_rewards(&rm, &index, product.state(next));
        sum_a += ra as u64;
        sum_b += rb as u64;
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRow {
                step,
                env_state: product.name(next),
                action: match a {
                    ExtAction::Env(act) => product.mdp().actions()[act].clone(),
                    ExtAction::Commit(i) => format!("commit{i}"),
                },
                e_size: rm.e.len(),
                flag: rm.flag,
                r_a: ra,
                r_b: rb,
            });
        }
        v = next;
    }
    Ok((sum_a as f64 / horizon as f64, sum_b as f64 / horizon as f64))
}

/// Mean averages of the commitment policy over `episodes` runs per seed.
/// Episode `e` of seed `s` uses ChaCha stream `e` of seed `s`.
pub fn average_over_seeds(
    product: &ProductMdp,
    policy: &CommitmentPolicy<'_>,
    seeds: &[u64],
    episodes: usize,
    horizon: usize,
) -> Result<(f64, f64)> {
    let cache = IndexCache::new(product);
    let jobs: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|&s| (0..episodes).map(move |e| (s, e)))
        .collect();
    let results: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(seed, ep)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ep as u64);
            let mut p = policy.clone();
            p.start(&mut rng);
            simulate_limit_average(product, &cache, &mut p, horizon, &mut rng, None)
        })
        .collect();
    let mut total = (0.0, 0.0);
    for r in &results {
        let (a, b) = r.as_ref().map_err(|e| Error::Policy(e.to_string()))?;
        total.0 += a;
        total.1 += b;
    }
    let n = results.len().max(1) as f64;
    Ok((total.0 / n, total.1 / n))
}

/// Finite-memory policy on the original MDP: tracks automaton states and
/// the reward-machine state, and resolves committal actions internally so
/// only MDP actions reach the environment.
pub struct WrappedPolicy<'a, P: ExtendedPolicy> {
    product: &'a ProductMdp,
    cache: IndexCache<'a>,
    inner: P,
    rm: RmState,
    index: Arc<EcIndex>,
    current: ProductState,
    last_action: Option<usize>,
}

impl<'a, P: ExtendedPolicy> WrappedPolicy<'a, P> {
    pub fn new(product: &'a ProductMdp, mut inner: P, rng: &mut ChaCha8Rng) -> Self {
        let cache = IndexCache::new(product);
        let rm = RmState::default();
        let index = cache.get(&rm.e);
        inner.start(rng);
        WrappedPolicy {
            product,
            cache,
            inner,
            rm,
            index,
            current: product.state(product.initial()),
            last_action: None,
        }
    }

    pub fn memory(&self) -> (ProductState, &RmState) {
        (self.current, &self.rm)
    }

    /// Next MDP action at the current MDP state.
    pub fn act(&mut self, rng: &mut ChaCha8Rng) -> Result<usize> {
        let v = self
            .product
            .index_of(self.current)
            .ok_or_else(|| Error::Policy("memory left the reachable product".into()))?;
        for _ in 0..=self.index.capacity() + 1 {
            match self.inner.choose(v, &self.rm, &self.index, rng) {
                ExtAction::Env(a) => {
                    self.last_action = Some(a);
                    return Ok(a);
                }
                c @ ExtAction::Commit(_) => {
                    rm_step(
                        &mut self.rm,
                        &self.index,
                        self.product,
                        self.current,
                        c,
                        self.current,
                    )?;
                }
            }
        }
        Err(Error::Policy(
            "policy keeps committing without acting".into(),
        ))
    }

    /// Memory update after the environment moved to `s_next`.
    pub fn observe(&mut self, s_next: usize) -> Result<()> {
        let a = self
            .last_action
            .take()
            .ok_or_else(|| Error::Policy("observe without act".into()))?;
        let next = self.product.successor(self.current, s_next);
        if rm_step(
            &mut self.rm,
            &self.index,
            self.product,
            self.current,
            ExtAction::Env(a),
            next,
        )? {
            self.index = self.cache.get(&self.rm.e);
        }
        self.current = next;
        Ok(())
    }
}
