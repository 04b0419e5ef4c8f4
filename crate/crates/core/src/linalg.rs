//! Exact dense linear algebra over the rationals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::rational::Rat;

fn row_to_integers(row: &[Rat]) -> Vec<BigInt> {
    let lcm = row.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    row.iter().map(|r| r.numer() * (&lcm / r.denom())).collect()
}

/// Solves `A X = B` for square nonsingular `A` by fraction-free (Bareiss)
/// elimination followed by rational back substitution. `b` holds one
/// right-hand side per column. Returns `None` if `A` is singular.
pub fn solve(a: &[Vec<Rat>], b: &[Vec<Rat>]) -> Option<Vec<Vec<Rat>>> {
    let n = a.len();
    let k = b.first().map_or(0, |r| r.len());
    if n == 0 {
        return Some(Vec::new());
    }
    let mut m: Vec<Vec<BigInt>> = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| {
            let mut full = ra.clone();
            full.extend_from_slice(rb);
            row_to_integers(&full)
        })
        .collect();
    let cols = n + k;
    let mut prev = BigInt::one();
    for p in 0..n {
        let pivot = (p..n).find(|&i| !m[i][p].is_zero())?;
        m.swap(p, pivot);
        for i in p + 1..n {
            for j in p + 1..cols {
                let v = (&m[i][j] * &m[p][p] - &m[i][p] * &m[p][j]) / &prev;
                m[i][j] = v;
            }
            m[i][p] = BigInt::zero();
        }
        prev = m[p][p].clone();
    }
    let mut x = vec![vec![Rat::zero(); k]; n];
    for c in 0..k {
        for i in (0..n).rev() {
            let mut acc = Rat::from_integer(m[i][n + c].clone());
            for j in i + 1..n {
                if !m[i][j].is_zero() {
                    acc -= Rat::from_integer(m[i][j].clone()) * &x[j][c];
                }
            }
            x[i][c] = acc / Rat::from_integer(m[i][i].clone());
        }
    }
    Some(x)
}

/// Basis of the right null space of `a` (rows × cols).
pub fn null_space(a: &[Vec<Rat>], cols: usize) -> Vec<Vec<Rat>> {
    let mut m: Vec<Vec<Rat>> = a.to_vec();
    let rows = m.len();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Rat::one() / &m[r][c];
        for x in &mut m[r][c..cols] {
            *x = &*x * &inv;
        }
        let pivot = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row[c..cols].iter_mut().zip(&pivot[c..cols]) {
                    *x -= &f * y;
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivot_cols.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rat::zero(); cols];
            v[f] = Rat::one();
            for (i, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -m[i][f].clone();
            }
            v
        })
        .collect()
}
