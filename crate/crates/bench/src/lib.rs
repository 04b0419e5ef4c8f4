//! Scalable instances for the benchmarks.

use omega_cop::model::{Acceptance, LabeledMdp, Letter};
use omega_cop::rational::{one, rat};
use omega_cop::ProductMdp;

/// Ring of `n` states. Action `a` moves forward with probability 1/2 and
/// stays otherwise; action `b` jumps back to state 0 or to the middle.
/// The objective wants the last state infinitely often, the constraint the
/// middle one while avoiding the last.
pub fn ring(n: usize) -> ProductMdp {
    assert!(n >= 3);
    let mid = n / 2;
    let kernel = (0..n)
        .map(|i| {
            let next = (i + 1) % n;
            vec![
                Some(vec![(i, rat(1, 2)), (next, rat(1, 2))]),
                Some(if i == 0 {
                    vec![(mid, one())]
                } else {
                    vec![(0, rat(1, 3)), (mid, rat(2, 3))]
                }),
            ]
        })
        .collect();
    let mdp = LabeledMdp::new(
        vec![],
        (0..n).map(|i| format!("r{i}")).collect(),
        0,
        vec!["a".into(), "b".into()],
        vec![Letter::EMPTY; n],
        kernel,
    );
    let objective = Acceptance::mdp_level(vec![(vec![n - 1], vec![])]);
    let constraint = Acceptance::mdp_level(vec![(vec![mid], vec![n - 1])]);
    ProductMdp::synthetic(mdp, objective, constraint).expect("ring product builds")
}

#[cfg(test)]
mod tests {
    use super::*;
    use omega_cop::synthesis::plan;

    #[test]
    fn ring_plans() {
        let pl = plan(&ring(8), &rat(1, 2)).unwrap();
        assert!(pl.solution.value > rat(0, 1));
    }
}
