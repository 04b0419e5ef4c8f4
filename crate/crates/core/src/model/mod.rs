//! Labelled MDPs, deterministic Rabin automata, the synchronised product and
//! general finite-memory policies.

mod automaton;
mod mdp;
mod policy;
mod product;

pub use automaton::{accepts_lasso, RabinAutomaton, RabinPair};
pub use mdp::{LabeledMdp, Row, ValidationReport, Violation};
pub use policy::PolicyMemoryKernel;
pub use product::{build_product, Acceptance, ComponentPair, Coord, ProductMdp, ProductState};

/// A valuation of the atomic propositions, encoded as a bitmask over an
/// ordered proposition list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(pub u64);

impl Letter {
    pub const EMPTY: Letter = Letter(0);

    pub fn contains(self, ap: usize) -> bool {
        self.0 >> ap & 1 == 1
    }

    pub fn with(self, ap: usize) -> Letter {
        Letter(self.0 | 1 << ap)
    }

    /// Builds a letter from proposition names against an ordered list.
    pub fn from_names<S: AsRef<str>>(aps: &[String], names: &[S]) -> Result<Letter, crate::Error> {
        let mut l = Letter::EMPTY;
        for n in names {
            let i = aps.iter().position(|a| a == n.as_ref()).ok_or_else(|| {
                crate::Error::Parse(format!("unknown atomic proposition {:?}", n.as_ref()))
            })?;
            l = l.with(i);
        }
        Ok(l)
    }

    pub fn names(self, aps: &[String]) -> Vec<String> {
        (0..aps.len())
            .filter(|&i| self.contains(i))
            .map(|i| aps[i].clone())
            .collect()
    }
}

pub(crate) fn index_of(names: &[String], name: &str, what: &str) -> Result<usize, crate::Error> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| crate::Error::Parse(format!("unknown {what} {name:?}")))
}
