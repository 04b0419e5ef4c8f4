use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Deserialize;

use super::{index_of, Letter};
use crate::error::{Error, Result};

/// One Rabin acceptance pair: visit `inf` infinitely often, `fin` finitely often.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RabinPair {
    pub inf: BTreeSet<usize>,
    pub fin: BTreeSet<usize>,
}

/// Deterministic Rabin automaton over the alphabet `2^aps`.
#[derive(Clone, Debug, PartialEq)]
pub struct RabinAutomaton {
    aps: Vec<String>,
    states: Vec<String>,
    initial: usize,
    explicit: HashMap<(usize, Letter), usize>,
    default: Vec<Option<usize>>,
    pairs: Vec<RabinPair>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DraFile {
    states: Vec<String>,
    initial: String,
    aps: Vec<String>,
    transitions: Vec<DraTransition>,
    #[serde(default)]
    default: BTreeMap<String, String>,
    rabin_pairs: Vec<DraPair>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DraTransition {
    from: String,
    letter: Vec<String>,
    to: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DraPair {
    inf: Vec<String>,
    fin: Vec<String>,
}

impl RabinAutomaton {
    /// Builds an automaton and checks that the transition function is total.
    pub fn new(
        aps: Vec<String>,
        states: Vec<String>,
        initial: usize,
        transitions: Vec<(usize, Letter, usize)>,
        default: Vec<Option<usize>>,
        pairs: Vec<RabinPair>,
    ) -> Result<Self> {
        if aps.len() > 64 {
            return Err(Error::Invalid("more than 64 atomic propositions".into()));
        }
        if initial >= states.len() {
            return Err(Error::Invalid(
                "initial automaton state out of range".into(),
            ));
        }
        let n = states.len();
        let mut explicit = HashMap::new();
        for (q, l, t) in transitions {
            if q >= n || t >= n {
                return Err(Error::Invalid(
                    "automaton transition references unknown state".into(),
                ));
            }
            if let Some(prev) = explicit.insert((q, l), t) {
                if prev != t {
                    return Err(Error::Invalid(format!(
                        "nondeterministic transition from {} on {:?}",
                        states[q],
                        l.names(&aps)
                    )));
                }
            }
        }
        let mut default = default;
        default.resize(n, None);
        for pair in &pairs {
            if pair.inf.iter().chain(&pair.fin).any(|&q| q >= n) {
                return Err(Error::Invalid("Rabin pair references unknown state".into()));
            }
        }
        let aut = RabinAutomaton {
            aps,
            states,
            initial,
            explicit,
            default,
            pairs,
        };
        aut.check_total()?;
        Ok(aut)
    }

    fn check_total(&self) -> Result<()> {
        for q in 0..self.states.len() {
            if self.default[q].is_some() {
                continue;
            }
            if self.aps.len() > 20 {
                return Err(Error::Invalid(format!(
                    "state {} has no default successor and too many letters to enumerate",
                    self.states[q]
                )));
            }
            for bits in 0..1u64 << self.aps.len() {
                if !self.explicit.contains_key(&(q, Letter(bits))) {
                    return Err(Error::Invalid(format!(
                        "transition function not total: state {} on {:?}",
                        self.states[q],
                        Letter(bits).names(&self.aps)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DraFile = serde_json::from_str(text)?;
        let st = |name: &str| index_of(&file.states, name, "automaton state");
        let initial = st(&file.initial)?;
        let mut transitions = Vec::new();
        for t in &file.transitions {
            transitions.push((
                st(&t.from)?,
                Letter::from_names(&file.aps, &t.letter)?,
                st(&t.to)?,
            ));
        }
        let mut default = vec![None; file.states.len()];
        for (from, to) in &file.default {
            default[st(from)?] = Some(st(to)?);
        }
        let mut pairs = Vec::new();
        for p in &file.rabin_pairs {
            pairs.push(RabinPair {
                inf: p.inf.iter().map(|q| st(q)).collect::<Result<_>>()?,
                fin: p.fin.iter().map(|q| st(q)).collect::<Result<_>>()?,
            });
        }
        RabinAutomaton::new(file.aps, file.states, initial, transitions, default, pairs)
    }

    /// One-state automaton accepting everything (`pairs = [({q0}, ∅)]`) or
    /// nothing (no pairs).
    pub fn trivial(aps: Vec<String>, accepting: bool) -> Self {
        let pairs = if accepting {
            vec![RabinPair {
                inf: BTreeSet::from([0]),
                fin: BTreeSet::new(),
            }]
        } else {
            vec![]
        };
        RabinAutomaton::new(aps, vec!["q0".into()], 0, vec![], vec![Some(0)], pairs)
            .expect("trivial automaton is well formed")
    }

    pub fn aps(&self) -> &[String] {
        &self.aps
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn pairs(&self) -> &[RabinPair] {
        &self.pairs
    }

    pub fn step(&self, q: usize, letter: Letter) -> usize {
        match self.explicit.get(&(q, letter)) {
            Some(&t) => t,
            None => self.default[q].expect("transition function is total"),
        }
    }

    /// True iff some pair accepts a run whose infinitely-visited set is `inf_set`.
    pub fn accepts_set(&self, inf_set: &BTreeSet<usize>) -> bool {
        self.pairs
            .iter()
            .any(|p| p.fin.is_disjoint(inf_set) && !p.inf.is_disjoint(inf_set))
    }
}

/// Decides acceptance of the ultimately periodic word `prefix · cycle^ω`.
///
/// The automaton state at the start of a cycle iteration need not repeat after
/// one iteration; the cycle is replayed until the start state recurs (at most
/// `|Q|` times), and the states visited from then on are the ones seen
/// infinitely often.
pub fn accepts_lasso(aut: &RabinAutomaton, prefix: &[Letter], cycle: &[Letter]) -> Result<bool> {
    if cycle.is_empty() {
        return Err(Error::Precondition("lasso cycle must be nonempty".into()));
    }
    let mut q = prefix.iter().fold(aut.initial(), |q, &l| aut.step(q, l));
    let mut starts: Vec<usize> = Vec::new();
    let period_start = loop {
        if let Some(pos) = starts.iter().position(|&s| s == q) {
            break pos;
        }
        starts.push(q);
        for &l in cycle {
            q = aut.step(q, l);
        }
    };
    let mut seen = BTreeSet::new();
    let mut q = starts[period_start];
    for _ in period_start..starts.len() {
        for &l in cycle {
            seen.insert(q);
            q = aut.step(q, l);
        }
    }
    Ok(aut.accepts_set(&seen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn letters(aut: &RabinAutomaton, names: &[&[&str]]) -> Vec<Letter> {
        names
            .iter()
            .map(|n| Letter::from_names(aut.aps(), n).unwrap())
            .collect()
    }

    #[test]
    fn eventually_target_accepts() {
        let aut = fixtures::dra_eventually("t", &["t", "u"]);
        let (p, c) = (letters(&aut, &[&[]]), letters(&aut, &[&["t"]]));
        assert!(accepts_lasso(&aut, &p, &c).unwrap());
        let c = letters(&aut, &[&[]]);
        assert!(!accepts_lasso(&aut, &p, &c).unwrap());
    }

    #[test]
    fn always_safe_rejects_after_violation() {
        let aut = fixtures::dra_always_not("u", &["t", "u"]);
        let p = letters(&aut, &[&["u"]]);
        let c = letters(&aut, &[&[]]);
        assert!(!accepts_lasso(&aut, &p, &c).unwrap());
        assert!(accepts_lasso(&aut, &[], &c).unwrap());
    }

    #[test]
    fn empty_pairs_reject_everything() {
        let aut = RabinAutomaton::trivial(vec!["t".into()], false);
        let c = letters(&aut, &[&["t"]]);
        assert!(!accepts_lasso(&aut, &[], &c).unwrap());
    }

    #[test]
    fn empty_cycle_is_an_error() {
        let aut = RabinAutomaton::trivial(vec![], true);
        assert!(accepts_lasso(&aut, &[], &[]).is_err());
    }

    #[test]
    fn partial_transition_function_is_rejected() {
        let aps = vec!["p".to_string()];
        let res = RabinAutomaton::new(
            aps,
            vec!["q".into()],
            0,
            vec![(0, Letter(1), 0)],
            vec![None],
            vec![],
        );
        assert!(matches!(res, Err(Error::Invalid(_))));
    }

    #[test]
    fn json_loading_uses_defaults() {
        let text = r#"{"states":["q0","q1"],"initial":"q0","aps":["t"],
            "transitions":[{"from":"q0","letter":["t"],"to":"q1"}],
            "default":{"q0":"q0","q1":"q1"},
            "rabin_pairs":[{"inf":["q1"],"fin":[]}]}"#;
        let aut = RabinAutomaton::from_json(text).unwrap();
        assert_eq!(aut.step(0, Letter::EMPTY), 0);
        assert_eq!(aut.step(0, Letter(1)), 1);
        assert_eq!(aut.step(1, Letter::EMPTY), 1);
    }

    // Oracle: simulate the run for many cycle repetitions and take the states
    // seen in the last |Q| repetitions.
    fn simulate(aut: &RabinAutomaton, prefix: &[Letter], cycle: &[Letter]) -> bool {
        let mut q = prefix.iter().fold(aut.initial(), |q, &l| aut.step(q, l));
        let reps = 10 * aut.num_states();
        let mut tail = BTreeSet::new();
        for r in 0..reps {
            for &l in cycle {
                if r >= reps - aut.num_states() {
                    tail.insert(q);
                }
                q = aut.step(q, l);
            }
        }
        aut.accepts_set(&tail)
    }

    fn random_automaton(n: usize, seed_table: Vec<usize>, pairs: Vec<(u8, u8)>) -> RabinAutomaton {
        // two propositions -> four letters
        let aps = vec!["p".to_string(), "r".to_string()];
        let mut trans = Vec::new();
        for q in 0..n {
            for l in 0..4u64 {
                trans.push((q, Letter(l), seed_table[q * 4 + l as usize] % n));
            }
        }
        let pairs = pairs
            .into_iter()
            .map(|(i, f)| RabinPair {
                inf: (0..n).filter(|q| i >> q & 1 == 1).collect(),
                fin: (0..n).filter(|q| f >> q & 1 == 1).collect(),
            })
            .collect();
        RabinAutomaton::new(
            aps,
            (0..n).map(|q| format!("q{q}")).collect(),
            0,
            trans,
            vec![],
            pairs,
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn lasso_agrees_with_long_simulation(
            n in 1usize..5,
            table in prop::collection::vec(0usize..8, 20),
            pairs in prop::collection::vec((any::<u8>(), any::<u8>()), 0..3),
            prefix in prop::collection::vec(0u64..4, 0..5),
            cycle in prop::collection::vec(0u64..4, 1..5),
        ) {
            let aut = random_automaton(n, table, pairs);
            let prefix: Vec<Letter> = prefix.into_iter().map(Letter).collect();
            let cycle: Vec<Letter> = cycle.into_iter().map(Letter).collect();
            prop_assert_eq!(accepts_lasso(&aut, &prefix, &cycle).unwrap(), simulate(&aut, &prefix, &cycle));
        }
    }
}
