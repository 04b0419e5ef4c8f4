//! Two-phase primal simplex over exact rationals with Bland's rule.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rat;

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<Rat>,
    pub value: Rat,
    pub basis: Vec<usize>,
}

struct Tableau {
    rows: Vec<Vec<Rat>>, // last column is the rhs
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Rat {
        self.rows[i].last().unwrap()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = Rat::one() / &self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v = &*v * &inv;
            }
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximises `cost · x` over the columns in `allowed`, from the current
    /// feasible basis.
    fn optimise(&mut self, cost: &[Rat], allowed: usize) -> Result<()> {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut reduced = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero() && !self.rows[i][j].is_zero() {
                        reduced -= &cost[b] * &self.rows[i][j];
                    }
                }
                if reduced.is_positive() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return Ok(()) };
            let mut leave: Option<(usize, Rat)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][j];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match &leave {
                    None => true,
                    Some((r, best)) => {
                        ratio < *best || (ratio == *best && self.basis[i] < self.basis[*r])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, j);
        }
    }
}

/// Maximises `c · x` subject to `A x = b`, `x ≥ 0`.
pub fn maximize(a: &[Vec<Rat>], b: &[Rat], c: &[Rat]) -> Result<SimplexResult> {
    let m = a.len();
    let n = c.len();
    let mut rows = Vec::with_capacity(m);
    for (i, (row, rhs)) in a.iter().zip(b).enumerate() {
        let flip = rhs.is_negative();
        let mut t: Vec<Rat> = row
            .iter()
            .map(|v| if flip { -v.clone() } else { v.clone() })
            .collect();
        for k in 0..m {
            t.push(if k == i { Rat::one() } else { Rat::zero() });
        }
        t.push(if flip { -rhs.clone() } else { rhs.clone() });
        rows.push(t);
    }
    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
    };

    // phase 1: drive artificial mass to zero
    let mut phase1 = vec![Rat::zero(); n + m];
    for v in phase1.iter_mut().skip(n) {
        *v = -Rat::one();
    }
    tab.optimise(&phase1, n + m)?;
    if (0..m).any(|i| tab.basis[i] >= n && !tab.rhs(i).is_zero()) {
        return Err(Error::Infeasible);
    }
    // pivot remaining (zero-level) artificials out, dropping redundant rows
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| !tab.rows[i][j].is_zero()) {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.rows.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(Rat::zero(), m));
    tab.optimise(&cost, n)?;

    let mut x = vec![Rat::zero(); n];
    for (i, &bv) in tab.basis.iter().enumerate() {
        x[bv] = tab.rhs(i).clone();
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(SimplexResult {
        x,
        value,
        basis: tab.basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    #[test]
    fn trivial_program() {
        let r = maximize(&[vec![rat(1, 1)]], &[rat(1, 1)], &[rat(1, 1)]).unwrap();
        assert_eq!(r.value, rat(1, 1));
    }

    #[test]
    fn infeasible_program() {
        // x + y = 1, x + y = 2
        let a = vec![vec![rat(1, 1), rat(1, 1)], vec![rat(1, 1), rat(1, 1)]];
        assert!(matches!(
            maximize(&a, &[rat(1, 1), rat(2, 1)], &[rat(1, 1), rat(0, 1)]),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn unbounded_program() {
        // x - y = 0, maximise x
        let a = vec![vec![rat(1, 1), rat(-1, 1)]];
        assert!(matches!(
            maximize(&a, &[rat(0, 1)], &[rat(1, 1), rat(0, 1)]),
            Err(Error::Unbounded)
        ));
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let a = vec![vec![rat(1, 1), rat(1, 1)], vec![rat(2, 1), rat(2, 1)]];
        let r = maximize(&a, &[rat(1, 1), rat(2, 1)], &[rat(1, 1), rat(2, 1)]).unwrap();
        assert_eq!(r.value, rat(2, 1));
    }

    /// Brute force: every choice of `m` columns that yields a nonnegative
    /// basic solution is a vertex; the best vertex is the optimum.
    fn enumerate_vertices(a: &[Vec<Rat>], b: &[Rat], c: &[Rat]) -> Option<Rat> {
        // keep a maximal independent set of rows (the system is consistent)
        let n = c.len();
        let mut rows: Vec<Vec<Rat>> = Vec::new();
        let mut rhs: Vec<Rat> = Vec::new();
        for (row, bi) in a.iter().zip(b) {
            let mut trial = rows.clone();
            trial.push(row.clone());
            if crate::linalg::null_space(&trial, n).len() == n - trial.len() {
                rows = trial;
                rhs.push(bi.clone());
            }
        }
        let (a, b) = (&rows[..], &rhs[..]);
        let m = a.len();
        let mut best: Option<Rat> = None;
        let mut cols: Vec<usize> = (0..m).collect();
        loop {
            let sub: Vec<Vec<Rat>> = a
                .iter()
                .map(|row| cols.iter().map(|&j| row[j].clone()).collect())
                .collect();
            let rhs: Vec<Vec<Rat>> = b.iter().map(|v| vec![v.clone()]).collect();
            if let Some(sol) = crate::linalg::solve(&sub, &rhs) {
                if sol.iter().all(|r| !r[0].is_negative()) {
                    let val: Rat = cols.iter().zip(&sol).map(|(&j, r)| &c[j] * &r[0]).sum();
                    if best.as_ref().is_none_or(|bv| val > *bv) {
                        best = Some(val);
                    }
                }
            }
            // next combination
            let mut i = m;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if cols[i] < n - m + i {
                    cols[i] += 1;
                    for k in i + 1..m {
                        cols[k] = cols[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn matches_vertex_enumeration(
            n in 2usize..7,
            m in 1usize..4,
            entries in prop::collection::vec(-3i64..4, 18),
            costs in prop::collection::vec(-3i64..4, 6),
        ) {
            let m = m.min(n);
            // bounded feasible region: first row is a positive simplex row
            let mut a: Vec<Vec<Rat>> = vec![(0..n).map(|j| rat(1 + (j as i64 % 2), 1)).collect()];
            for r in 1..m {
                a.push((0..n).map(|j| rat(entries[(r * n + j) % 18], 1)).collect());
            }
            // make the system feasible by construction: b = A · x0 with x0 ≥ 0
            let x0: Vec<Rat> = (0..n).map(|j| rat((j as i64 * 7 + 3) % 4, 4)).collect();
            let b: Vec<Rat> = a.iter().map(|row| row.iter().zip(&x0).map(|(p, q)| p * q).sum()).collect();
            let c: Vec<Rat> = (0..n).map(|j| rat(costs[j], 1)).collect();
            let got = maximize(&a, &b, &c).unwrap();
            for (row, bi) in a.iter().zip(&b) {
                let lhs: Rat = row.iter().zip(&got.x).map(|(p, q)| p * q).sum();
                prop_assert_eq!(&lhs, bi);
            }
            prop_assert!(got.x.iter().all(|v| !v.is_negative()));
            let brute = enumerate_vertices(&a, &b, &c).unwrap();
            prop_assert_eq!(got.value, brute);
        }
    }
}
