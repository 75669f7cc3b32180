//! Multi-indices and the symbols a differential polynomial is built from.

use std::cmp::Ordering;
use std::sync::Arc;

use crate::context::{JetContext, Parity};

/// A multi-index of partial derivatives, stored sparsely as sorted
/// `(independent index, multiplicity)` pairs with positive multiplicities.
///
/// Ordering is graded lexicographic: first by total order `|σ|`, then
/// lexicographically on the dense exponent vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex {
    entries: Vec<(usize, u32)>,
}

impl MultiIndex {
    pub fn empty() -> MultiIndex {
        MultiIndex::default()
    }

    /// The first-order multi-index `∂/∂x_i`.
    pub fn single(i: usize) -> MultiIndex {
        MultiIndex {
            entries: vec![(i, 1)],
        }
    }

    pub fn from_pairs(mut pairs: Vec<(usize, u32)>) -> MultiIndex {
        pairs.retain(|&(_, m)| m > 0);
        pairs.sort_unstable_by_key(|&(i, _)| i);
        MultiIndex { entries: pairs }
    }

    /// Total order `|σ|`.
    pub fn order(&self) -> u32 {
        self.entries.iter().map(|&(_, m)| m).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Multiplicity of the independent variable `i`.
    pub fn multiplicity(&self, i: usize) -> u32 {
        self.entries
            .iter()
            .find(|&&(j, _)| j == i)
            .map_or(0, |&(_, m)| m)
    }

    pub fn pairs(&self) -> &[(usize, u32)] {
        &self.entries
    }

    /// `σ + τ`.
    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        let mut pairs = self.entries.clone();
        for &(i, m) in &other.entries {
            match pairs.iter_mut().find(|(j, _)| *j == i) {
                Some((_, mm)) => *mm += m,
                None => pairs.push((i, m)),
            }
        }
        MultiIndex::from_pairs(pairs)
    }

    /// `σ + 1_i`.
    pub fn raised(&self, i: usize) -> MultiIndex {
        self.plus(&MultiIndex::single(i))
    }

    /// `σ − τ`, if `τ ≤ σ` componentwise.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut pairs = Vec::with_capacity(self.entries.len());
        for &(i, m) in &self.entries {
            let sub = other.multiplicity(i);
            if sub > m {
                return None;
            }
            if m - sub > 0 {
                pairs.push((i, m - sub));
            }
        }
        for &(i, m) in &other.entries {
            if m > 0 && self.multiplicity(i) == 0 {
                return None;
            }
        }
        Some(MultiIndex { entries: pairs })
    }

    /// Does `other ≤ self` hold componentwise?
    pub fn contains(&self, other: &MultiIndex) -> bool {
        other
            .entries
            .iter()
            .all(|&(i, m)| self.multiplicity(i) >= m)
    }

    /// Componentwise least common multiple (max of multiplicities).
    pub fn lcm(&self, other: &MultiIndex) -> MultiIndex {
        let mut pairs = self.entries.clone();
        for &(i, m) in &other.entries {
            match pairs.iter_mut().find(|(j, _)| *j == i) {
                Some((_, mm)) => *mm = (*mm).max(m),
                None => pairs.push((i, m)),
            }
        }
        MultiIndex::from_pairs(pairs)
    }

    /// Product of binomial coefficients `∏_i C(σ_i, μ_i)`, the multiplicity
    /// of `μ ≤ σ` in the graded Leibniz expansion of `D_σ`.
    pub fn binomial(&self, sub: &MultiIndex) -> u64 {
        let mut result: u64 = 1;
        for &(i, m) in &self.entries {
            result *= binom(m as u64, sub.multiplicity(i) as u64);
        }
        result
    }

    /// All multi-indices `μ ≤ σ` componentwise, in graded-lex order.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::empty()];
        for &(i, m) in &self.entries {
            let mut next = Vec::with_capacity(out.len() * (m as usize + 1));
            for prefix in &out {
                for k in 0..=m {
                    let mut pairs = prefix.entries.clone();
                    if k > 0 {
                        pairs.push((i, k));
                    }
                    next.push(MultiIndex { entries: pairs });
                }
            }
            out = next;
        }
        out.sort();
        out
    }

    /// Enumerate every multi-index of total order exactly `order` over `n`
    /// independent variables, in graded-lex order.
    pub fn all_of_order(n: usize, order: u32) -> Vec<MultiIndex> {
        fn rec(n: usize, pos: usize, left: u32, acc: &mut Vec<(usize, u32)>, out: &mut Vec<MultiIndex>) {
            if pos == n {
                if left == 0 {
                    out.push(MultiIndex::from_pairs(acc.clone()));
                }
                return;
            }
            if pos + 1 == n {
                if left > 0 {
                    acc.push((pos, left));
                    out.push(MultiIndex::from_pairs(acc.clone()));
                    acc.pop();
                } else {
                    out.push(MultiIndex::from_pairs(acc.clone()));
                }
                return;
            }
            for k in (0..=left).rev() {
                if k > 0 {
                    acc.push((pos, k));
                }
                rec(n, pos + 1, left - k, acc, out);
                if k > 0 {
                    acc.pop();
                }
            }
        }
        let mut out = Vec::new();
        rec(n, 0, order, &mut Vec::new(), &mut out);
        out.sort();
        out
    }

    /// Enumerate every multi-index of total order at most `max_order`.
    pub fn all_up_to_order(n: usize, max_order: u32) -> Vec<MultiIndex> {
        (0..=max_order)
            .flat_map(|k| MultiIndex::all_of_order(n, k))
            .collect()
    }

    fn dense_cmp(&self, other: &MultiIndex) -> Ordering {
        let mut a = self.entries.iter().peekable();
        let mut b = other.entries.iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&&(ia, ma)), Some(&&(ib, mb))) => {
                    if ia < ib {
                        // `self` has a nonzero exponent at an earlier slot.
                        return Ordering::Greater;
                    }
                    if ib < ia {
                        return Ordering::Less;
                    }
                    match ma.cmp(&mb) {
                        Ordering::Equal => {
                            a.next();
                            b.next();
                        }
                        ord => return ord,
                    }
                }
            }
        }
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.dense_cmp(other))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u64 = 1;
    for i in 0..k {
        result = result * (n - i) / (i + 1);
    }
    result
}

/// A single generator of the polynomial algebra: an independent variable,
/// a jet coordinate of a dependent variable, or an antifield jet coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum JetSymbol {
    /// The independent variable `x_i`.
    Independent(usize),
    /// The jet coordinate `u^j_σ`.
    Dependent { component: usize, sigma: MultiIndex },
    /// The antifield jet coordinate at the given tier (antighost number ≥ 1).
    Antifield {
        tier: usize,
        component: usize,
        sigma: MultiIndex,
    },
}

impl JetSymbol {
    pub fn dependent(component: usize, sigma: MultiIndex) -> JetSymbol {
        JetSymbol::Dependent { component, sigma }
    }

    pub fn antifield(tier: usize, component: usize, sigma: MultiIndex) -> JetSymbol {
        JetSymbol::Antifield {
            tier,
            component,
            sigma,
        }
    }

    pub fn parity(&self) -> Parity {
        match self {
            JetSymbol::Independent(_) | JetSymbol::Dependent { .. } => Parity::Even,
            JetSymbol::Antifield { tier, .. } => Parity::from_antighost(*tier),
        }
    }

    /// Antighost number: 0 for base and dependent coordinates, the tier otherwise.
    pub fn antighost(&self) -> usize {
        match self {
            JetSymbol::Antifield { tier, .. } => *tier,
            _ => 0,
        }
    }

    /// Jet order of the coordinate (0 for independent variables).
    pub fn jet_order(&self) -> u32 {
        match self {
            JetSymbol::Independent(_) => 0,
            JetSymbol::Dependent { sigma, .. } | JetSymbol::Antifield { sigma, .. } => {
                sigma.order()
            }
        }
    }

    /// The same coordinate differentiated once more by `x_i`.
    ///
    /// Independent variables are not jet coordinates; callers handle the
    /// `D_i(x_k) = δ_ik` case separately.
    pub fn raised(&self, i: usize) -> JetSymbol {
        match self {
            JetSymbol::Independent(_) => panic!("raised() called on an independent variable"),
            JetSymbol::Dependent { component, sigma } => JetSymbol::Dependent {
                component: *component,
                sigma: sigma.raised(i),
            },
            JetSymbol::Antifield {
                tier,
                component,
                sigma,
            } => JetSymbol::Antifield {
                tier: *tier,
                component: *component,
                sigma: sigma.raised(i),
            },
        }
    }

    fn sort_key(&self) -> (u8, usize, usize, &MultiIndex) {
        static EMPTY: MultiIndex = MultiIndex { entries: Vec::new() };
        match self {
            JetSymbol::Independent(i) => (0, *i, 0, &EMPTY),
            JetSymbol::Dependent { component, sigma } => (1, *component, 0, sigma),
            JetSymbol::Antifield {
                tier,
                component,
                sigma,
            } => (2, *tier, *component, sigma),
        }
    }

    /// Validate the symbol against a context's declared ranges.
    pub fn in_context(&self, ctx: &Arc<JetContext>) -> bool {
        match self {
            JetSymbol::Independent(i) => *i < ctx.n_independent(),
            JetSymbol::Dependent { component, .. } => *component < ctx.n_dependent(),
            JetSymbol::Antifield {
                tier, component, ..
            } => *tier >= 1 && *tier <= ctx.n_tiers() && *component < ctx.tier_rank(*tier),
        }
    }
}

impl Ord for JetSymbol {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for JetSymbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
