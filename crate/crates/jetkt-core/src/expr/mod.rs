//! Graded-commutative differential polynomials with exact rational coefficients.
//!
//! A [`DiffPoly`] is a finite sum of monomials in the symbols of its context:
//! independent variables, jet coordinates `u^j_σ`, and antifield jet
//! coordinates.  Antifields of odd antighost number anticommute; everything
//! else commutes.  Monomials are kept sorted in the global symbol order, and
//! every product or derivative tracks the Koszul sign of the permutation that
//! restores that order.
//!
//! Derivatives are left derivatives: `∂^L/∂s` strips `s` from the left of a
//! sorted monomial, paying `(−1)` for each odd factor it moves past.

pub(crate) mod render;
mod symbol;

pub use render::{render_poly, render_symbol};
pub use symbol::{JetSymbol, MultiIndex};

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::context::{require_same_context, JetContext, Parity};
use crate::error::Result;

/// Exact rational coefficient.
pub type Coeff = BigRational;

/// Shorthand for an integer-valued coefficient.
pub fn coeff_int(n: i64) -> Coeff {
    BigRational::from_integer(BigInt::from(n))
}

/// Shorthand for the fraction `num/den`.
pub fn coeff_frac(num: i64, den: i64) -> Coeff {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A product of symbol powers, sorted in the global symbol order.
///
/// Odd symbols appear with exponent exactly 1 (their squares vanish).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial {
    factors: Vec<(JetSymbol, u32)>,
}

impl Monomial {
    pub fn unit() -> Monomial {
        Monomial::default()
    }

    pub fn of_symbol(sym: JetSymbol) -> Monomial {
        Monomial {
            factors: vec![(sym, 1)],
        }
    }

    /// Build from factor pairs; returns `None` if an odd symbol repeats.
    pub fn from_factors(mut factors: Vec<(JetSymbol, u32)>) -> Option<Monomial> {
        factors.retain(|&(_, e)| e > 0);
        factors.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(JetSymbol, u32)> = Vec::with_capacity(factors.len());
        for (sym, e) in factors {
            match merged.last_mut() {
                Some((last, le)) if *last == sym => *le += e,
                _ => merged.push((sym, e)),
            }
        }
        for (sym, e) in &merged {
            if sym.parity().is_odd() && *e > 1 {
                return None;
            }
        }
        Some(Monomial { factors: merged })
    }

    pub fn factors(&self) -> &[(JetSymbol, u32)] {
        &self.factors
    }

    pub fn is_unit(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn exponent_of(&self, sym: &JetSymbol) -> u32 {
        self.factors
            .iter()
            .find(|(s, _)| s == sym)
            .map_or(0, |&(_, e)| e)
    }

    /// Total degree, counting exponents.
    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    /// Degree in dependent-variable jet coordinates only.
    pub fn dependent_degree(&self) -> u32 {
        self.factors
            .iter()
            .filter(|(s, _)| matches!(s, JetSymbol::Dependent { .. }))
            .map(|&(_, e)| e)
            .sum()
    }

    /// Degree in independent (base) variables only.
    pub fn base_degree(&self) -> u32 {
        self.factors
            .iter()
            .filter(|(s, _)| matches!(s, JetSymbol::Independent(_)))
            .map(|&(_, e)| e)
            .sum()
    }

    /// Total antighost number, weighted by exponents.
    pub fn antighost(&self) -> usize {
        self.factors
            .iter()
            .map(|(s, e)| s.antighost() * *e as usize)
            .sum()
    }

    pub fn parity(&self) -> Parity {
        let odd_count: u32 = self
            .factors
            .iter()
            .filter(|(s, _)| s.parity().is_odd())
            .map(|&(_, e)| e)
            .sum();
        if odd_count % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Highest jet order among the coordinates in this monomial.
    pub fn max_jet_order(&self) -> u32 {
        self.factors
            .iter()
            .map(|(s, _)| s.jet_order())
            .max()
            .unwrap_or(0)
    }

    /// Multiply two sorted monomials, tracking the Koszul sign.
    ///
    /// Returns `None` when an odd symbol would square to zero; otherwise the
    /// merged monomial together with `+1`/`−1`.
    fn mul(&self, other: &Monomial) -> Option<(Monomial, i8)> {
        // Koszul sign: each odd factor of `other` moves left past every
        // strictly greater odd factor of `self`.
        let self_odd: Vec<&JetSymbol> = self
            .factors
            .iter()
            .filter(|(s, _)| s.parity().is_odd())
            .map(|(s, _)| s)
            .collect();
        let mut transpositions = 0usize;
        for (sym, _) in other.factors.iter().filter(|(s, _)| s.parity().is_odd()) {
            if self.exponent_of(sym) > 0 {
                return None;
            }
            transpositions += self_odd.iter().filter(|s| **s > sym).count();
        }
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        let merged = Monomial::from_factors(factors)?;
        let sign = if transpositions % 2 == 0 { 1 } else { -1 };
        Some((merged, sign))
    }

    /// Left derivative by `sym`: `(coefficient, remaining monomial)`, or
    /// `None` when the symbol does not occur.
    fn partial_left(&self, sym: &JetSymbol) -> Option<(Coeff, Monomial)> {
        let pos = self.factors.iter().position(|(s, _)| s == sym)?;
        let mut factors = self.factors.clone();
        let (_, exp) = factors[pos];
        if sym.parity().is_odd() {
            let odd_before = factors[..pos]
                .iter()
                .filter(|(s, _)| s.parity().is_odd())
                .count();
            factors.remove(pos);
            let sign = if odd_before % 2 == 0 { 1 } else { -1 };
            Some((coeff_int(sign), Monomial { factors }))
        } else {
            if exp == 1 {
                factors.remove(pos);
            } else {
                factors[pos].1 = exp - 1;
            }
            Some((coeff_int(exp as i64), Monomial { factors }))
        }
    }
}

/// A graded-commutative differential polynomial over exact rationals.
#[derive(Debug, Clone)]
pub struct DiffPoly {
    ctx: Arc<JetContext>,
    terms: BTreeMap<Monomial, Coeff>,
}

impl PartialEq for DiffPoly {
    fn eq(&self, other: &Self) -> bool {
        self.ctx == other.ctx && self.terms == other.terms
    }
}

impl Eq for DiffPoly {}

impl DiffPoly {
    pub fn zero(ctx: &Arc<JetContext>) -> DiffPoly {
        DiffPoly {
            ctx: Arc::clone(ctx),
            terms: BTreeMap::new(),
        }
    }

    pub fn one(ctx: &Arc<JetContext>) -> DiffPoly {
        DiffPoly::constant(ctx, Coeff::one())
    }

    pub fn constant(ctx: &Arc<JetContext>, c: Coeff) -> DiffPoly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::unit(), c);
        }
        DiffPoly {
            ctx: Arc::clone(ctx),
            terms,
        }
    }

    pub fn from_symbol(ctx: &Arc<JetContext>, sym: JetSymbol) -> DiffPoly {
        debug_assert!(sym.in_context(ctx), "symbol outside context: {sym:?}");
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::of_symbol(sym), Coeff::one());
        DiffPoly {
            ctx: Arc::clone(ctx),
            terms,
        }
    }

    pub fn from_term(ctx: &Arc<JetContext>, mono: Monomial, c: Coeff) -> DiffPoly {
        let mut p = DiffPoly::zero(ctx);
        p.add_term(mono, c);
        p
    }

    pub fn context(&self) -> &Arc<JetContext> {
        &self.ctx
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    pub fn coefficient_of(&self, mono: &Monomial) -> Coeff {
        self.terms.get(mono).cloned().unwrap_or_else(Coeff::zero)
    }

    /// Add `c · mono` in place, dropping the entry if it cancels.
    pub fn add_term(&mut self, mono: Monomial, c: Coeff) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(mono);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().clone() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn checked_add(&self, other: &DiffPoly) -> Result<DiffPoly> {
        require_same_context(&self.ctx, &other.ctx)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &DiffPoly) -> Result<DiffPoly> {
        require_same_context(&self.ctx, &other.ctx)?;
        let mut out = DiffPoly::zero(&self.ctx);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if let Some((m, sign)) = ma.mul(mb) {
                    let mut c = ca.clone() * cb.clone();
                    if sign < 0 {
                        c = -c;
                    }
                    out.add_term(m, c);
                }
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, c: &Coeff) -> DiffPoly {
        if c.is_zero() {
            return DiffPoly::zero(&self.ctx);
        }
        DiffPoly {
            ctx: Arc::clone(&self.ctx),
            terms: self
                .terms
                .iter()
                .map(|(m, v)| (m.clone(), v.clone() * c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> DiffPoly {
        let mut out = DiffPoly::one(&self.ctx);
        for _ in 0..e {
            out = out.checked_mul(self).expect("same context");
        }
        out
    }

    /// Left partial derivative `∂^L/∂sym`.
    pub fn partial_left(&self, sym: &JetSymbol) -> DiffPoly {
        let mut out = DiffPoly::zero(&self.ctx);
        for (m, c) in &self.terms {
            if let Some((factor, rest)) = m.partial_left(sym) {
                out.add_term(rest, c.clone() * factor);
            }
        }
        out
    }

    /// Every symbol occurring in this polynomial.
    pub fn symbols(&self) -> BTreeSet<JetSymbol> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().iter().map(|(s, _)| s.clone()))
            .collect()
    }

    pub fn max_jet_order(&self) -> u32 {
        self.terms.keys().map(Monomial::max_jet_order).max().unwrap_or(0)
    }

    pub fn max_dependent_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::dependent_degree).max().unwrap_or(0)
    }

    pub fn max_base_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::base_degree).max().unwrap_or(0)
    }

    /// Parity shared by every term, or `None` for zero or mixed polynomials.
    pub fn uniform_parity(&self) -> Option<Parity> {
        let mut it = self.terms.keys().map(Monomial::parity);
        let first = it.next()?;
        it.all(|p| p == first).then_some(first)
    }

    /// Antighost number shared by every term, or `None` for zero or mixed.
    pub fn uniform_antighost(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(Monomial::antighost);
        let first = it.next()?;
        it.all(|g| g == first).then_some(first)
    }

    /// Is the parity of every term equal to `p` (vacuously true for zero)?
    pub fn has_parity(&self, p: Parity) -> bool {
        self.terms.keys().all(|m| m.parity() == p)
    }

    /// Substitute a polynomial for an even symbol.
    ///
    /// Only even symbols can be replaced by arbitrary polynomials without
    /// re-deriving signs; that is the only case normal-form reduction needs.
    pub fn substitute_even(&self, sym: &JetSymbol, replacement: &DiffPoly) -> Result<DiffPoly> {
        require_same_context(&self.ctx, replacement.context())?;
        assert!(
            !sym.parity().is_odd(),
            "substitute_even called with an odd symbol"
        );
        let mut out = DiffPoly::zero(&self.ctx);
        let mut powers: Vec<DiffPoly> = vec![DiffPoly::one(&self.ctx)];
        for (m, c) in &self.terms {
            let e = m.exponent_of(sym);
            if e == 0 {
                out.add_term(m.clone(), c.clone());
                continue;
            }
            while powers.len() <= e as usize {
                let next = powers.last().unwrap().checked_mul(replacement)?;
                powers.push(next);
            }
            let rest_factors: Vec<(JetSymbol, u32)> = m
                .factors()
                .iter()
                .filter(|(s, _)| s != sym)
                .cloned()
                .collect();
            let rest = Monomial::from_factors(rest_factors).expect("no odd symbol repeats");
            let rest_poly = DiffPoly::from_term(&self.ctx, rest, c.clone());
            out = out.checked_add(&rest_poly.checked_mul(&powers[e as usize])?)?;
        }
        Ok(out)
    }

    /// Render in the canonical text form (same grammar the CLI parses).
    pub fn render(&self) -> String {
        render_poly(self)
    }
}

impl Add for &DiffPoly {
    type Output = DiffPoly;
    fn add(self, rhs: &DiffPoly) -> DiffPoly {
        self.checked_add(rhs).expect("context mismatch in +")
    }
}

impl Sub for &DiffPoly {
    type Output = DiffPoly;
    fn sub(self, rhs: &DiffPoly) -> DiffPoly {
        self.checked_add(&rhs.neg()).expect("context mismatch in -")
    }
}

impl Mul for &DiffPoly {
    type Output = DiffPoly;
    fn mul(self, rhs: &DiffPoly) -> DiffPoly {
        self.checked_mul(rhs).expect("context mismatch in *")
    }
}

impl Neg for &DiffPoly {
    type Output = DiffPoly;
    fn neg(self) -> DiffPoly {
        self.scaled(&-Coeff::one())
    }
}

impl std::fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render())
    }
}
