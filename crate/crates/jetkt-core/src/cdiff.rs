//! Matrix operators in total derivatives (C-differential operators).
//!
//! A [`CDiffOp`] is a rows×cols matrix whose entries are finite sums
//! `Σ a_σ D_σ` with differential-polynomial coefficients, kept in normal
//! order (all `D_σ` to the right of coefficients).  Composition renormalizes
//! eagerly through the Leibniz rule, so equal operators have equal
//! representations.
//!
//! The formal adjoint follows the classical termwise rule
//! `(a·D_σ)* = (−1)^{|σ|} D_σ ∘ a`, expanded to normal order as
//! `(−1)^{|σ|} Σ_{μ≤σ} C(σ,μ) D_μ(a)·D_{σ−μ}`, with a plain matrix
//! transpose.  With the left-derivative conventions of [`crate::expr`] this
//! rule satisfies the divergence identity, is an involution, and is a graded
//! anti-homomorphism for composition — including on odd coefficients.
//!
//! [`MultiLinOp`] packages an element of the polynomial dual module as its
//! *first-slot operator form*: the constant (antifield-free) part plus the
//! antifield linearization of the rest.  The projector
//! [`MultiLinOp::selfadjoint_project`] averages the operator form with its
//! adjoint; because the adjoint is an involution at the operator level, the
//! projector is exactly idempotent.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::context::{require_same_context, JetContext, Parity};
use crate::error::{Error, Result};
use crate::expr::{coeff_frac, coeff_int, DiffPoly, JetSymbol, MultiIndex};
use crate::jetcalc::{linearize_columns, total_derivative_sigma, FiberVar};

/// A matrix operator in total derivatives with polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CDiffOp {
    ctx: Arc<JetContext>,
    rows: usize,
    cols: usize,
    entries: Vec<BTreeMap<MultiIndex, DiffPoly>>,
}

impl CDiffOp {
    pub fn zero(ctx: &Arc<JetContext>, rows: usize, cols: usize) -> CDiffOp {
        CDiffOp {
            ctx: Arc::clone(ctx),
            rows,
            cols,
            entries: vec![BTreeMap::new(); rows * cols],
        }
    }

    pub fn identity(ctx: &Arc<JetContext>, n: usize) -> CDiffOp {
        let mut op = CDiffOp::zero(ctx, n, n);
        for i in 0..n {
            op.add_term(i, i, MultiIndex::empty(), DiffPoly::one(ctx));
        }
        op
    }

    /// The 1×1 operator `D_σ`.
    pub fn d_sigma(ctx: &Arc<JetContext>, sigma: MultiIndex) -> CDiffOp {
        let mut op = CDiffOp::zero(ctx, 1, 1);
        op.add_term(0, 0, sigma, DiffPoly::one(ctx));
        op
    }

    /// The 1×1 multiplication operator by `f`.
    pub fn scalar(f: DiffPoly) -> CDiffOp {
        let ctx = Arc::clone(f.context());
        let mut op = CDiffOp::zero(&ctx, 1, 1);
        op.add_term(0, 0, MultiIndex::empty(), f);
        op
    }

    pub fn context(&self) -> &Arc<JetContext> {
        &self.ctx
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, r: usize, c: usize) -> &BTreeMap<MultiIndex, DiffPoly> {
        &self.entries[r * self.cols + c]
    }

    /// Add `coeff·D_σ` to entry `(r, c)`, merging σ-terms.
    pub fn add_term(&mut self, r: usize, c: usize, sigma: MultiIndex, coeff: DiffPoly) {
        if coeff.is_zero() {
            return;
        }
        let slot = &mut self.entries[r * self.cols + c];
        match slot.entry(sigma) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().checked_add(&coeff).expect("same context");
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(BTreeMap::is_empty)
    }

    /// Highest |σ| over all entries.
    pub fn order(&self) -> u32 {
        self.entries
            .iter()
            .flat_map(|e| e.keys().map(MultiIndex::order))
            .max()
            .unwrap_or(0)
    }

    pub fn checked_add(&self, other: &CDiffOp) -> Result<CDiffOp> {
        require_same_context(&self.ctx, &other.ctx)?;
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::SignatureMismatch(format!(
                "adding a {}×{} operator to a {}×{} operator",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = self.clone();
        for r in 0..other.rows {
            for c in 0..other.cols {
                for (sigma, coeff) in other.entry(r, c) {
                    out.add_term(r, c, sigma.clone(), coeff.clone());
                }
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, k: &crate::expr::Coeff) -> CDiffOp {
        let mut out = CDiffOp::zero(&self.ctx, self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                for (sigma, coeff) in self.entry(r, c) {
                    out.add_term(r, c, sigma.clone(), coeff.scaled(k));
                }
            }
        }
        out
    }

    pub fn neg(&self) -> CDiffOp {
        self.scaled(&coeff_int(-1))
    }

    /// Map every coefficient polynomial through `f` (used for on-shell
    /// reduction of operators and for applying derivations entrywise).
    pub fn map_coefficients<F>(&self, mut f: F) -> Result<CDiffOp>
    where
        F: FnMut(&DiffPoly) -> Result<DiffPoly>,
    {
        let mut out = CDiffOp::zero(&self.ctx, self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                for (sigma, coeff) in self.entry(r, c) {
                    out.add_term(r, c, sigma.clone(), f(coeff)?);
                }
            }
        }
        Ok(out)
    }

    /// Apply to a component tuple: `(Δp)_r = Σ_c Σ_σ a_σ·D_σ(p_c)`.
    pub fn apply(&self, p: &[DiffPoly]) -> Result<Vec<DiffPoly>> {
        if p.len() != self.cols {
            return Err(Error::SignatureMismatch(format!(
                "applying a {}×{} operator to a {}-component section",
                self.rows,
                self.cols,
                p.len()
            )));
        }
        let mut out = vec![DiffPoly::zero(&self.ctx); self.rows];
        for (c, p_c) in p.iter().enumerate() {
            require_same_context(&self.ctx, p_c.context())?;
            for r in 0..self.rows {
                for (sigma, coeff) in self.entry(r, c) {
                    let term = coeff.checked_mul(&total_derivative_sigma(p_c, sigma))?;
                    out[r] = out[r].checked_add(&term)?;
                }
            }
        }
        Ok(out)
    }

    /// Composition `self ∘ inner`, renormalized so all `D_σ` stand right of
    /// coefficients: `(a D_σ)∘(b D_τ) = Σ_{μ≤σ} C(σ,μ)·a·D_μ(b)·D_{σ−μ+τ}`.
    pub fn compose(&self, inner: &CDiffOp) -> Result<CDiffOp> {
        require_same_context(&self.ctx, &inner.ctx)?;
        if self.cols != inner.rows {
            return Err(Error::SignatureMismatch(format!(
                "composing a {}×{} operator with a {}×{} operator",
                self.rows, self.cols, inner.rows, inner.cols
            )));
        }
        let mut out = CDiffOp::zero(&self.ctx, self.rows, inner.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                for (sigma, a) in self.entry(r, k) {
                    for c in 0..inner.cols {
                        for (tau, b) in inner.entry(k, c) {
                            for mu in sigma.sub_indices() {
                                let binom = sigma.binomial(&mu);
                                let coeff = a
                                    .checked_mul(&total_derivative_sigma(b, &mu))?
                                    .scaled(&coeff_int(binom as i64));
                                let rest = sigma.checked_sub(&mu).expect("μ ≤ σ");
                                out.add_term(r, c, rest.plus(tau), coeff);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Formal adjoint: transpose with entrywise
    /// `(a·D_σ)* = (−1)^{|σ|} Σ_{μ≤σ} C(σ,μ) D_μ(a)·D_{σ−μ}`.
    pub fn adjoint(&self) -> CDiffOp {
        let mut out = CDiffOp::zero(&self.ctx, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                for (sigma, a) in self.entry(r, c) {
                    let sign = if sigma.order() % 2 == 0 { 1 } else { -1 };
                    for mu in sigma.sub_indices() {
                        let binom = sigma.binomial(&mu) as i64;
                        let coeff =
                            total_derivative_sigma(a, &mu).scaled(&coeff_int(sign * binom));
                        let rest = sigma.checked_sub(&mu).expect("μ ≤ σ");
                        out.add_term(c, r, rest, coeff);
                    }
                }
            }
        }
        out
    }

    /// Glue a grid of blocks into one operator.  `blocks[i][j]` must agree in
    /// row count along each block row and column count along each block
    /// column.
    pub fn from_blocks(ctx: &Arc<JetContext>, blocks: &[Vec<CDiffOp>]) -> CDiffOp {
        let row_heights: Vec<usize> = blocks.iter().map(|row| row[0].rows).collect();
        let col_widths: Vec<usize> = blocks[0].iter().map(|b| b.cols).collect();
        let rows = row_heights.iter().sum();
        let cols = col_widths.iter().sum();
        let mut out = CDiffOp::zero(ctx, rows, cols);
        let mut r0 = 0;
        for (bi, row) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for (bj, block) in row.iter().enumerate() {
                assert_eq!(block.rows, row_heights[bi], "ragged block row");
                assert_eq!(block.cols, col_widths[bj], "ragged block column");
                for r in 0..block.rows {
                    for c in 0..block.cols {
                        for (sigma, coeff) in block.entry(r, c) {
                            out.add_term(r0 + r, c0 + c, sigma.clone(), coeff.clone());
                        }
                    }
                }
                c0 += block.cols;
            }
            r0 += row_heights[bi];
        }
        out
    }
}

/// An element of the polynomial dual module in first-slot operator form.
///
/// `base` is the antifield-free part (one polynomial per dual slot, in
/// tier-major flat order); `op` is the antifield linearization of the
/// antifield-dependent part — a square operator from antifield columns to
/// dual-slot rows.  All projector and differential computations act on this
/// operator form directly; nothing is reassembled into a polynomial, which
/// is what makes `selfadjoint_project` exactly idempotent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiLinOp {
    ctx: Arc<JetContext>,
    base: Vec<DiffPoly>,
    op: CDiffOp,
    arity: usize,
    parity: Parity,
}

impl MultiLinOp {
    /// Build from the flat dual-slot components of a polynomial element.
    ///
    /// Every component must live at a single antifield polynomial degree
    /// `d ≥ 0` (graded homogeneity in the antifields); `d = 0` components
    /// populate `base`, the rest are linearized into the operator form.
    ///
    /// The element's parity is its *total* parity — polynomial parity
    /// combined with the parity of the dual slot's tier — and must be
    /// uniform across all nonzero components.
    pub fn from_components(components: &[DiffPoly]) -> Result<MultiLinOp> {
        let ctx = components
            .first()
            .map(DiffPoly::context)
            .cloned()
            .ok_or_else(|| Error::SignatureMismatch("empty dual section".into()))?;
        let rank = ctx.total_antifield_rank();
        if components.len() != rank {
            return Err(Error::SignatureMismatch(format!(
                "dual section with {} components over a context with {} antifield components",
                components.len(),
                rank
            )));
        }
        let mut parity: Option<Parity> = None;
        for (flat, f) in components.iter().enumerate() {
            if f.is_zero() {
                continue;
            }
            let (tier, _) = ctx.antifield_from_flat(flat);
            let poly_parity = f.uniform_parity().ok_or_else(|| {
                Error::ParityMismatch(format!("dual component {flat} is not parity-homogeneous"))
            })?;
            let total = poly_parity.combine(Parity::from_antighost(tier));
            match parity {
                None => parity = Some(total),
                Some(p) if p == total => {}
                Some(_) => {
                    return Err(Error::ParityMismatch(
                        "dual section mixes total parities across slots".into(),
                    ))
                }
            }
        }
        let parity = parity.unwrap_or(Parity::Even);
        let mut degrees: Vec<usize> = Vec::new();
        for f in components {
            for (m, _) in f.terms() {
                let d = m
                    .factors()
                    .iter()
                    .filter(|(s, _)| matches!(s, JetSymbol::Antifield { .. }))
                    .map(|&(_, e)| e as usize)
                    .sum();
                if !degrees.contains(&d) {
                    degrees.push(d);
                }
            }
        }
        degrees.retain(|&d| d > 0);
        if degrees.len() > 1 {
            return Err(Error::SignatureMismatch(format!(
                "dual section mixes antifield degrees {degrees:?}; split it by degree first"
            )));
        }
        let arity = degrees.first().copied().unwrap_or(0);
        let mut base = Vec::with_capacity(rank);
        let mut positive = Vec::with_capacity(rank);
        for f in components {
            let mut b = DiffPoly::zero(&ctx);
            let mut pos = DiffPoly::zero(&ctx);
            for (m, c) in f.terms() {
                let has_antifield = m
                    .factors()
                    .iter()
                    .any(|(s, _)| matches!(s, JetSymbol::Antifield { .. }));
                if has_antifield {
                    pos.add_term(m.clone(), c.clone());
                } else {
                    b.add_term(m.clone(), c.clone());
                }
            }
            base.push(b);
            positive.push(pos);
        }
        let op = if arity == 0 {
            CDiffOp::zero(&ctx, rank, rank)
        } else {
            linearize_columns(&positive, &FiberVar::antifields(&ctx))?
        };
        Ok(MultiLinOp {
            ctx,
            base,
            op,
            arity,
            parity,
        })
    }

    pub fn context(&self) -> &Arc<JetContext> {
        &self.ctx
    }

    pub fn base(&self) -> &[DiffPoly] {
        &self.base
    }

    pub fn operator(&self) -> &CDiffOp {
        &self.op
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub(crate) fn from_parts(
        ctx: Arc<JetContext>,
        base: Vec<DiffPoly>,
        op: CDiffOp,
        arity: usize,
        parity: Parity,
    ) -> MultiLinOp {
        MultiLinOp {
            ctx,
            base,
            op,
            arity,
            parity,
        }
    }

    /// The projector onto the self-adjoint subspace: the operator form is
    /// averaged with its adjoint, the antifield-free part passes through.
    pub fn selfadjoint_project(&self) -> MultiLinOp {
        let symmetrized = self
            .op
            .checked_add(&self.op.adjoint())
            .expect("square operator form")
            .scaled(&coeff_frac(1, 2));
        MultiLinOp {
            ctx: Arc::clone(&self.ctx),
            base: self.base.clone(),
            op: symmetrized,
            arity: self.arity,
            parity: self.parity,
        }
    }

    pub fn is_selfadjoint(&self) -> bool {
        self.op == self.op.adjoint()
    }

    pub fn checked_add(&self, other: &MultiLinOp) -> Result<MultiLinOp> {
        require_same_context(&self.ctx, &other.ctx)?;
        let base = self
            .base
            .iter()
            .zip(&other.base)
            .map(|(a, b)| a.checked_add(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiLinOp {
            ctx: Arc::clone(&self.ctx),
            base,
            op: self.op.checked_add(&other.op)?,
            arity: self.arity.max(other.arity),
            parity: self.parity,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.base.iter().all(DiffPoly::is_zero) && self.op.is_zero()
    }
}
