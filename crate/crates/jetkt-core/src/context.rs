//! Variable declarations shared by every algebraic object.
//!
//! A [`JetContext`] fixes the independent variables `x_1..x_n`, the dependent
//! variables `u^1..u^m`, and the antifield tiers.  Tier `i` carries `rank_i`
//! antifield components of antighost number `i` and parity `i mod 2`.  All
//! polynomials, operators and sections hold an `Arc` to their context, and
//! binary operations insist that both sides were built over equal contexts.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Parity of a symbol or homogeneous expression: even (bosonic) or odd (fermionic).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn from_antighost(tier: usize) -> Parity {
        if tier % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn combine(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn is_odd(self) -> bool {
        self == Parity::Odd
    }
}

/// One antifield tier: `rank` components at the given antighost number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierSpec {
    pub rank: usize,
}

/// Declarations of independent variables, dependent variables and antifield tiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JetContext {
    independents: Vec<String>,
    dependents: Vec<String>,
    tiers: Vec<TierSpec>,
}

impl JetContext {
    /// A context with no antifields.
    pub fn new(independents: Vec<String>, dependents: Vec<String>) -> Arc<JetContext> {
        Arc::new(JetContext {
            independents,
            dependents,
            tiers: Vec::new(),
        })
    }

    /// A context with antifield tiers; `tiers[i]` describes antighost number `i + 1`.
    pub fn with_tiers(
        independents: Vec<String>,
        dependents: Vec<String>,
        tiers: Vec<TierSpec>,
    ) -> Arc<JetContext> {
        Arc::new(JetContext {
            independents,
            dependents,
            tiers,
        })
    }

    /// Clone this context with extra dependent variables appended.
    ///
    /// Existing symbol indices stay valid, so polynomials over the original
    /// context may be reinterpreted over the extension.
    pub fn extend_dependents(self: &Arc<Self>, fresh: &[&str]) -> Arc<JetContext> {
        let mut dependents = self.dependents.clone();
        dependents.extend(fresh.iter().map(|s| s.to_string()));
        Arc::new(JetContext {
            independents: self.independents.clone(),
            dependents,
            tiers: self.tiers.clone(),
        })
    }

    pub fn n_independent(&self) -> usize {
        self.independents.len()
    }

    pub fn n_dependent(&self) -> usize {
        self.dependents.len()
    }

    /// Number of antifield tiers (0 for a plain jet space).
    pub fn n_tiers(&self) -> usize {
        self.tiers.len()
    }

    /// Rank of tier `tier` (antighost numbers are 1-based).
    pub fn tier_rank(&self, tier: usize) -> usize {
        self.tiers[tier - 1].rank
    }

    /// Total number of antifield components across all tiers.
    pub fn total_antifield_rank(&self) -> usize {
        self.tiers.iter().map(|t| t.rank).sum()
    }

    pub fn independent_name(&self, i: usize) -> &str {
        &self.independents[i]
    }

    pub fn dependent_name(&self, j: usize) -> &str {
        &self.dependents[j]
    }

    pub fn independent_index(&self, name: &str) -> Option<usize> {
        self.independents.iter().position(|s| s == name)
    }

    pub fn dependent_index(&self, name: &str) -> Option<usize> {
        self.dependents.iter().position(|s| s == name)
    }

    /// Flatten (tier, component) to a single index over all antifields, tier-major.
    pub fn antifield_flat_index(&self, tier: usize, component: usize) -> usize {
        let before: usize = self.tiers[..tier - 1].iter().map(|t| t.rank).sum();
        before + component
    }

    /// Inverse of [`antifield_flat_index`](Self::antifield_flat_index).
    pub fn antifield_from_flat(&self, flat: usize) -> (usize, usize) {
        let mut rest = flat;
        for (i, t) in self.tiers.iter().enumerate() {
            if rest < t.rank {
                return (i + 1, rest);
            }
            rest -= t.rank;
        }
        panic!("antifield index {flat} out of range");
    }
}

/// Check that two contexts agree, returning a context-mismatch error otherwise.
pub fn require_same_context(a: &Arc<JetContext>, b: &Arc<JetContext>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::ContextMismatch(format!(
            "left declares ({:?}; {:?}; {} tiers), right declares ({:?}; {:?}; {} tiers)",
            a.independents, a.dependents, a.tiers.len(),
            b.independents, b.dependents, b.tiers.len(),
        )))
    }
}
