//! Built-in problem instances, addressable by name.
//!
//! `fig1`, `fig2` and `appendix-c` are ordinary MDP + automaton triples.
//! `fig3-product` and `single-mec` are given directly at product level with
//! acceptance over MDP states. `ex-dep` is the two-action trade-off family
//! (see [`ex_dep`]).

use std::collections::BTreeSet;

use crate::model::{
    build_product, Acceptance, LabeledMdp, Letter, ProductMdp, RabinAutomaton, RabinPair,
};
use crate::rational::{one, rat, Rat};
use crate::{Error, Result};

pub const NAMES: &[&str] = &[
    "fig1",
    "fig2",
    "fig3-product",
    "appendix-c",
    "ex-dep",
    "single-mec",
];

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub mdp: LabeledMdp,
    pub objective: RabinAutomaton,
    pub constraint: RabinAutomaton,
    pub product: ProductMdp,
    /// Threshold used by the accompanying examples.
    pub threshold: Rat,
}

pub fn by_name(name: &str) -> Result<Fixture> {
    Ok(match name {
        "fig1" => fig1(),
        "fig2" => fig2(),
        "fig3" | "fig3-product" => fig3(),
        "appendix-c" => appendix_c(),
        "ex-dep" => ex_dep(rat(3, 4)),
        "single-mec" => single_mec(),
        _ => {
            return Err(Error::Parse(format!(
                "unknown fixture {name:?}; known: {}",
                NAMES.join(", ")
            )))
        }
    })
}

fn from_files(name: &str, mdp: &str, obj: &str, con: &str, threshold: Rat) -> Fixture {
    let mdp = LabeledMdp::from_json_validated(mdp).expect("fixture MDP is valid");
    let objective = RabinAutomaton::from_json(obj).expect("fixture automaton is valid");
    let constraint = RabinAutomaton::from_json(con).expect("fixture automaton is valid");
    let product = build_product(&mdp, &objective, &constraint).expect("fixture product builds");
    Fixture {
        name: name.into(),
        mdp,
        objective,
        constraint,
        product,
        threshold,
    }
}

fn synthetic(name: &str, mdp: &str, obj: Acceptance, con: Acceptance, threshold: Rat) -> Fixture {
    let mdp = LabeledMdp::from_json_validated(mdp).expect("fixture MDP is valid");
    let product = ProductMdp::synthetic(mdp.clone(), obj, con).expect("fixture product builds");
    Fixture {
        name: name.into(),
        objective: product.objective_automaton().clone(),
        constraint: product.constraint_automaton().clone(),
        mdp,
        product,
        threshold,
    }
}

/// Reach-avoid trade-off: reach `t` (objective), never see `u` (constraint).
pub fn fig1() -> Fixture {
    from_files(
        "fig1",
        include_str!("../fixtures/fig1.mdp.json"),
        include_str!("../fixtures/fig1.objective.json"),
        include_str!("../fixtures/fig1.constraint.json"),
        rat(9, 10),
    )
}

/// Deterministic two-state MDP where optimal policies need memory.
pub fn fig2() -> Fixture {
    from_files(
        "fig2",
        include_str!("../fixtures/fig2.mdp.json"),
        include_str!("../fixtures/fig2.objective.json"),
        include_str!("../fixtures/fig2.constraint.json"),
        rat(9, 10),
    )
}

/// Seven-state product with five MECs; objective pair `({v4, v6}, ∅)`,
/// constraint pair `({v3, v5}, ∅)`.
pub fn fig3() -> Fixture {
    synthetic(
        "fig3-product",
        include_str!("../fixtures/fig3.mdp.json"),
        Acceptance::mdp_level(vec![(vec![4, 6], vec![])]),
        Acceptance::mdp_level(vec![(vec![5, 3], vec![])]),
        rat(9, 10),
    )
}

/// Two-state deterministic MDP; objective `□◇s0`, constraint `□◇s1`.
pub fn appendix_c() -> Fixture {
    from_files(
        "appendix-c",
        include_str!("../fixtures/appendix-c.mdp.json"),
        include_str!("../fixtures/appendix-c.objective.json"),
        include_str!("../fixtures/appendix-c.constraint.json"),
        one(),
    )
}

/// Whole MDP is one MEC with an objective AEC `{x}` and a constraint AEC
/// `{y}` but no joint one.
pub fn single_mec() -> Fixture {
    synthetic(
        "single-mec",
        include_str!("../fixtures/single-mec.mdp.json"),
        Acceptance::mdp_level(vec![(vec![0], vec![1])]),
        Acceptance::mdp_level(vec![(vec![1], vec![0])]),
        rat(1, 2),
    )
}

/// Action `a` reaches a state satisfying both specifications or only the
/// objective, each with probability 1/2; action `b` satisfies both with
/// probability `p` and only the constraint otherwise.
pub fn ex_dep(p: Rat) -> Fixture {
    assert!(p > rat(0, 1) && p <= one(), "ex_dep needs 0 < p ≤ 1");
    let aps = vec!["phi".to_string(), "psi".to_string()];
    let states: Vec<String> = ["s0", "both", "phi_only", "psi_only"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let labels = vec![Letter::EMPTY, Letter(0b11), Letter(0b01), Letter(0b10)];
    let sink = |s: usize| vec![Some(vec![(s, one())]), Some(vec![(s, one())])];
    let mut b_row = vec![(1, p.clone())];
    if p < one() {
        b_row.push((3, one() - &p));
    }
    let kernel = vec![
        vec![Some(vec![(1, rat(1, 2)), (2, rat(1, 2))]), Some(b_row)],
        sink(1),
        sink(2),
        sink(3),
    ];
    let mdp = LabeledMdp::new(
        aps.clone(),
        states,
        0,
        vec!["a".into(), "b".into()],
        labels,
        kernel,
    );
    let objective = dra_eventually("phi", &["phi", "psi"]);
    let constraint = dra_eventually("psi", &["phi", "psi"]);
    let product = build_product(&mdp, &objective, &constraint).expect("fixture product builds");
    Fixture {
        name: "ex-dep".into(),
        mdp,
        objective,
        constraint,
        product,
        threshold: one(),
    }
}

fn two_state(
    aps: &[&str],
    ap: &str,
    to_one: [usize; 2],
    other: [usize; 2],
    pair: (usize, Option<usize>),
) -> RabinAutomaton {
    let aps: Vec<String> = aps.iter().map(|s| s.to_string()).collect();
    let i = aps
        .iter()
        .position(|a| a == ap)
        .expect("proposition listed");
    let mut trans = Vec::new();
    for q in 0..2 {
        for bits in 0..1u64 << aps.len() {
            let l = Letter(bits);
            trans.push((q, l, if l.contains(i) { to_one[q] } else { other[q] }));
        }
    }
    let pairs = vec![RabinPair {
        inf: BTreeSet::from([pair.0]),
        fin: pair.1.into_iter().collect(),
    }];
    RabinAutomaton::new(aps, vec!["q0".into(), "q1".into()], 0, trans, vec![], pairs)
        .expect("well-formed automaton")
}

/// `◇ap`: `q1` once `ap` has been read.
pub fn dra_eventually(ap: &str, aps: &[&str]) -> RabinAutomaton {
    two_state(aps, ap, [1, 1], [0, 1], (1, None))
}

/// `□¬ap`: `q1` is a rejecting sink entered on `ap`.
pub fn dra_always_not(ap: &str, aps: &[&str]) -> RabinAutomaton {
    two_state(aps, ap, [1, 1], [0, 1], (0, Some(1)))
}

/// `□◇ap`: `q1` iff the last letter contained `ap`.
pub fn dra_infinitely_often(ap: &str, aps: &[&str]) -> RabinAutomaton {
    two_state(aps, ap, [1, 1], [0, 0], (1, None))
}

/// `◇□¬ap`, the complement of [`dra_infinitely_often`].
pub fn dra_finitely_often(ap: &str, aps: &[&str]) -> RabinAutomaton {
    two_state(aps, ap, [1, 1], [0, 0], (0, Some(1)))
}
