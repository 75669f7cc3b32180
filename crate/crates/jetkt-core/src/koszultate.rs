//! The antifield resolution of an equation system: the odd differential δ,
//! the dual-shift differential on dual sections, the total differential on
//! multilinear operator forms, and truncated homology via the Euler
//! embedding.
//!
//! # Structure
//!
//! A [`KTSetup`] couples a solved [`EquationSystem`] (residual tuple `F`)
//! with a chain of compatibility operators `Δ_1, …, Δ_{k−2}` satisfying
//! `Δ_1(F) = 0` and `Δ_{i+1}∘Δ_i = 0` identically.  The context's antifield
//! tiers mirror the chain: tier 1 has one odd antifield per equation, tier
//! `i+1` has one antifield (parity `i+1 mod 2`) per row of `Δ_i`.
//!
//! The differential δ is the odd evolutionary derivation with
//! `δ(c¹_a) = F_a` and `δ(c^{i+1}_b) = (Δ_i c^i)_b`; it lowers antighost
//! degree by one and `δ² = 0` follows from the two chain identities.
//!
//! # Sign conventions
//!
//! Dual sections carry tier slots; the dual-shift differential uses the
//! alternating normalization: output tier `i` is
//! `(−1)^{p(θ)}·(−1)^i·Δ_i*(θ_{i+1})`, where `p(θ)` is the uniform total
//! parity (entry parity combined with slot-tier parity).  On operator forms
//! the transported differential is derived from the left-derivative chain
//! rule and reads, for an element with operator part `B` and antifield-free
//! part `b`:
//!
//! ```text
//! B ↦ colsign∘δ_c(B) + B∘Δ_blk + (−1)^{p}·Δ*_alt∘B
//! b ↦ π_0[ B(F,0,…,0) ] + (−1)^{p}·Δ*_alt(b)
//! ```
//!
//! where `colsign` scales column `c` by `(−1)^{tier(c)}` (the commutator of
//! a left partial derivative with the odd derivation δ), `Δ_blk` is the
//! block subdiagonal of the chain, `Δ*_alt` the alternating dual shift, and
//! `π_0` the antifield-free part.  Both lines transport the polynomial
//! differential faithfully — the drop term `π_0[B(F,…)]` is exactly the
//! antifield-free residue of δ acting on the antifield-linear layer — so
//! the square of the map vanishes because the square of the polynomial
//! differential does.  The self-adjoint projector commutes with the map on
//! its own image (`S∘T∘S = T∘S`); on a skew linear layer the drop is
//! nonzero while the projected input is zero, so raw commutation stops at
//! the arity-1 → arity-0 edge, matching the subspace form in which the
//! exactness argument uses it.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::cdiff::{CDiffOp, MultiLinOp};
use crate::context::{require_same_context, JetContext, Parity};
use crate::error::{Error, Result};
use crate::expr::{coeff_int, Coeff, DiffPoly, JetSymbol, Monomial, MultiIndex};
use crate::jetcalc::{euler, evolutionary_apply, linearize, linearize_columns, EquationSystem, FiberVar};
use crate::linalg::{LinearSystem, RankProbe};
use crate::par;

/// Extra total jet weight granted to the boundary window of a homology
/// computation beyond the cycle window's jet order.  Boundary monomials are
/// bounded by the *sum* of jet orders across all factors, not per factor:
/// the relations that reduce a window cycle come from low-weight boundary
/// monomials, and the weight bound keeps that window from exploding
/// combinatorially while still covering every per-factor order up to the
/// same total.
const BOUNDARY_JET_SUM_SLACK: u32 = 4;

/// Boundary monomials are differentiated and absorbed in chunks of this
/// size, so the stream can stop early once all candidate classes die.
const BOUNDARY_CHUNK: usize = 512;

/// A validated equation-plus-compatibility-chain package.
#[derive(Debug, Clone)]
pub struct KTSetup {
    system: EquationSystem,
    compat: Vec<CDiffOp>,
    images: Vec<(FiberVar, DiffPoly)>,
}

impl KTSetup {
    /// Validate shapes and both chain identities (`Δ_1(F) = 0` and
    /// `Δ_{i+1}∘Δ_i = 0`, exactly, off shell) and build the setup.
    pub fn new(system: EquationSystem, compat: Vec<CDiffOp>) -> Result<KTSetup> {
        let setup = KTSetup::new_unvalidated(system, compat)?;
        if let Some(d1) = setup.compat.first() {
            let image = d1.apply(&setup.system.residuals())?;
            if let Some((b, nonzero)) = image.iter().enumerate().find(|(_, f)| !f.is_zero()) {
                return Err(Error::CompatibilityFailure(format!(
                    "the first compatibility operator does not annihilate the residuals: \
                     component {b} gives {}",
                    nonzero.render()
                )));
            }
        }
        for i in 0..setup.compat.len().saturating_sub(1) {
            let composed = setup.compat[i + 1].compose(&setup.compat[i])?;
            if !composed.is_zero() {
                return Err(Error::CompatibilityFailure(format!(
                    "compatibility operators at stages {} and {} do not compose to zero",
                    i + 1,
                    i + 2
                )));
            }
        }
        Ok(setup)
    }

    /// Build with shape checks only, skipping the two chain identities.
    ///
    /// Intended for diagnostics: a deliberately corrupted chain can be
    /// assembled and then exposed by [`kt_delta_squared_check`].
    pub fn new_unvalidated(system: EquationSystem, compat: Vec<CDiffOp>) -> Result<KTSetup> {
        let ctx = Arc::clone(system.context());
        if ctx.n_tiers() != compat.len() + 1 {
            return Err(Error::SignatureMismatch(format!(
                "context declares {} antifield tiers but the chain has {} operators \
                 (expected tiers = operators + 1)",
                ctx.n_tiers(),
                compat.len()
            )));
        }
        if ctx.tier_rank(1) != system.n_equations() {
            return Err(Error::SignatureMismatch(format!(
                "tier 1 has rank {} but the system has {} equations",
                ctx.tier_rank(1),
                system.n_equations()
            )));
        }
        for (i, op) in compat.iter().enumerate() {
            require_same_context(&ctx, op.context())?;
            let stage = i + 1;
            if op.cols() != ctx.tier_rank(stage) || op.rows() != ctx.tier_rank(stage + 1) {
                return Err(Error::SignatureMismatch(format!(
                    "compatibility operator {stage} is {}×{}, expected {}×{}",
                    op.rows(),
                    op.cols(),
                    ctx.tier_rank(stage + 1),
                    ctx.tier_rank(stage)
                )));
            }
            for r in 0..op.rows() {
                for c in 0..op.cols() {
                    for coeff in op.entry(r, c).values() {
                        if coeff
                            .symbols()
                            .iter()
                            .any(|s| matches!(s, JetSymbol::Antifield { .. }))
                        {
                            return Err(Error::CompatibilityFailure(format!(
                                "compatibility operator {stage} has an antifield-dependent \
                                 coefficient at entry ({r}, {c})"
                            )));
                        }
                    }
                }
            }
        }
        let mut images = Vec::with_capacity(ctx.total_antifield_rank());
        for (a, f) in system.residuals().into_iter().enumerate() {
            images.push((FiberVar::Antifield { tier: 1, component: a }, f));
        }
        for (i, op) in compat.iter().enumerate() {
            let tier = i + 1;
            let image = op.apply(&antifield_tuple(&ctx, tier))?;
            for (b, f) in image.into_iter().enumerate() {
                images.push((FiberVar::Antifield { tier: tier + 1, component: b }, f));
            }
        }
        Ok(KTSetup {
            system,
            compat,
            images,
        })
    }

    pub fn system(&self) -> &EquationSystem {
        &self.system
    }

    pub fn context(&self) -> &Arc<JetContext> {
        self.system.context()
    }

    pub fn compat_ops(&self) -> &[CDiffOp] {
        &self.compat
    }

    /// A setup with an empty chain encodes a normal equation.
    pub fn is_normal(&self) -> bool {
        self.compat.is_empty()
    }

    /// The generating section in flat slot order: residuals on tier 1,
    /// `Δ_i` applied to the tier-`i` antifields above.
    pub fn generator_flat(&self) -> Vec<DiffPoly> {
        self.images.iter().map(|(_, f)| f.clone()).collect()
    }
}

/// The flat tuple of unprolonged tier-`tier` antifield coordinates.
fn antifield_tuple(ctx: &Arc<JetContext>, tier: usize) -> Vec<DiffPoly> {
    (0..ctx.tier_rank(tier))
        .map(|b| DiffPoly::from_symbol(ctx, JetSymbol::antifield(tier, b, MultiIndex::empty())))
        .collect()
}

fn antifield_free_part(f: &DiffPoly) -> DiffPoly {
    let mut out = DiffPoly::zero(f.context());
    for (m, c) in f.terms() {
        if m.antighost() == 0 {
            out.add_term(m.clone(), c.clone());
        }
    }
    out
}

/// The odd differential: evolutionary derivation sending `c¹ ↦ F` and
/// `c^{i+1} ↦ Δ_i(c^i)`, extended to prolongations and products.
pub fn kt_delta(setup: &KTSetup, f: &DiffPoly) -> Result<DiffPoly> {
    require_same_context(setup.context(), f.context())?;
    evolutionary_apply(&setup.images, f)
}

/// Outcome of evaluating δ² over a full truncation basis.
#[derive(Debug, Clone)]
pub struct DeltaSquaredReport {
    /// How many basis monomials were checked.
    pub checked: usize,
    /// Pairs `(monomial, δ²(monomial))` with a nonzero second entry.
    pub failures: Vec<(DiffPoly, DiffPoly)>,
}

impl DeltaSquaredReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Evaluate δ² on every monomial of the truncation window.
pub fn kt_delta_squared_check(
    setup: &KTSetup,
    trunc: &TruncationSpec,
) -> Result<DeltaSquaredReport> {
    let ctx = setup.context();
    let basis = monomial_basis(ctx, trunc);
    let checked = basis.len();
    let results: Vec<Result<Option<(DiffPoly, DiffPoly)>>> = par::map_collect(basis, |m| {
        let poly = DiffPoly::from_term(ctx, m, coeff_int(1));
        let twice = kt_delta(setup, &kt_delta(setup, &poly)?)?;
        Ok((!twice.is_zero()).then_some((poly, twice)))
    });
    let mut failures = Vec::new();
    for r in results {
        if let Some(pair) = r? {
            failures.push(pair);
        }
    }
    Ok(DeltaSquaredReport { checked, failures })
}

/// Finite window bounds for basis enumeration.
///
/// `poly_degree_max` bounds the total degree in dependent-variable jets
/// only; antifield content is governed by `antighost_max` and base
/// variables by `base_degree_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationSpec {
    pub antighost_max: usize,
    pub jet_order_max: u32,
    pub poly_degree_max: u32,
    pub base_degree_max: u32,
}

impl TruncationSpec {
    pub fn with_jet_order(mut self, jet_order_max: u32) -> TruncationSpec {
        self.jet_order_max = jet_order_max;
        self
    }
}

/// All monomials within the truncation bounds, in canonical order.
pub fn monomial_basis(ctx: &Arc<JetContext>, trunc: &TruncationSpec) -> Vec<Monomial> {
    enumerate_monomials(ctx, trunc, None, None)
}

/// The monomials of the truncation with antighost number exactly `p`.
pub fn monomial_window(ctx: &Arc<JetContext>, trunc: &TruncationSpec, p: usize) -> Vec<Monomial> {
    enumerate_monomials(ctx, trunc, Some(p), None)
}

/// Like [`monomial_window`], additionally bounding the total jet weight
/// (the sum of `jet order × exponent` over all factors).
fn monomial_window_weighted(
    ctx: &Arc<JetContext>,
    trunc: &TruncationSpec,
    p: usize,
    jet_sum_max: u32,
) -> Vec<Monomial> {
    enumerate_monomials(ctx, trunc, Some(p), Some(jet_sum_max))
}

fn enumerate_monomials(
    ctx: &Arc<JetContext>,
    trunc: &TruncationSpec,
    exact_antighost: Option<usize>,
    jet_sum_max: Option<u32>,
) -> Vec<Monomial> {
    let mut pool: Vec<JetSymbol> = Vec::new();
    for i in 0..ctx.n_independent() {
        pool.push(JetSymbol::Independent(i));
    }
    for j in 0..ctx.n_dependent() {
        for sigma in MultiIndex::all_up_to_order(ctx.n_independent(), trunc.jet_order_max) {
            pool.push(JetSymbol::dependent(j, sigma));
        }
    }
    for tier in 1..=ctx.n_tiers() {
        for b in 0..ctx.tier_rank(tier) {
            for sigma in MultiIndex::all_up_to_order(ctx.n_independent(), trunc.jet_order_max) {
                pool.push(JetSymbol::antifield(tier, b, sigma));
            }
        }
    }
    let mut out = Vec::new();
    let mut factors: Vec<(JetSymbol, u32)> = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        pool: &[JetSymbol],
        idx: usize,
        base_left: u32,
        dep_left: u32,
        ag_left: usize,
        jet_left: u32,
        factors: &mut Vec<(JetSymbol, u32)>,
        exact: Option<usize>,
        ag_used: usize,
        out: &mut Vec<Monomial>,
    ) {
        if idx == pool.len() {
            if exact.map_or(true, |p| ag_used == p) {
                out.push(
                    Monomial::from_factors(factors.clone())
                        .expect("enumeration never repeats odd symbols"),
                );
            }
            return;
        }
        let sym = &pool[idx];
        let max_exp = match sym {
            JetSymbol::Independent(_) => base_left,
            JetSymbol::Dependent { .. } => dep_left,
            JetSymbol::Antifield { tier, .. } => {
                let by_budget = (ag_left / tier) as u32;
                if sym.parity().is_odd() {
                    by_budget.min(1)
                } else {
                    by_budget
                }
            }
        };
        for exp in 0..=max_exp {
            let jet_cost = sym.jet_order() * exp;
            if jet_cost > jet_left {
                break;
            }
            let (nb, nd, na, nu) = match sym {
                JetSymbol::Independent(_) => (base_left - exp, dep_left, ag_left, ag_used),
                JetSymbol::Dependent { .. } => (base_left, dep_left - exp, ag_left, ag_used),
                JetSymbol::Antifield { tier, .. } => {
                    let weight = tier * exp as usize;
                    (base_left, dep_left, ag_left - weight, ag_used + weight)
                }
            };
            if exp > 0 {
                factors.push((sym.clone(), exp));
            }
            recurse(
                pool,
                idx + 1,
                nb,
                nd,
                na,
                jet_left - jet_cost,
                factors,
                exact,
                nu,
                out,
            );
            if exp > 0 {
                factors.pop();
            }
        }
    }
    recurse(
        &pool,
        0,
        trunc.base_degree_max,
        trunc.poly_degree_max,
        exact_antighost.unwrap_or(trunc.antighost_max).min(trunc.antighost_max),
        jet_sum_max.unwrap_or(u32::MAX),
        &mut factors,
        exact_antighost,
        0,
        &mut out,
    );
    out.sort();
    out
}

/// A section of the dual module: one polynomial per antifield slot,
/// organized by tier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualSection {
    ctx: Arc<JetContext>,
    tiers: Vec<Vec<DiffPoly>>,
}

impl DualSection {
    pub fn zero(ctx: &Arc<JetContext>) -> DualSection {
        let tiers = (1..=ctx.n_tiers())
            .map(|t| vec![DiffPoly::zero(ctx); ctx.tier_rank(t)])
            .collect();
        DualSection {
            ctx: Arc::clone(ctx),
            tiers,
        }
    }

    pub fn from_tiers(ctx: &Arc<JetContext>, tiers: Vec<Vec<DiffPoly>>) -> Result<DualSection> {
        if tiers.len() != ctx.n_tiers() {
            return Err(Error::SignatureMismatch(format!(
                "dual section with {} tiers over a context with {}",
                tiers.len(),
                ctx.n_tiers()
            )));
        }
        for (i, tier) in tiers.iter().enumerate() {
            if tier.len() != ctx.tier_rank(i + 1) {
                return Err(Error::SignatureMismatch(format!(
                    "tier {} has {} components, expected {}",
                    i + 1,
                    tier.len(),
                    ctx.tier_rank(i + 1)
                )));
            }
            for f in tier {
                require_same_context(ctx, f.context())?;
            }
        }
        Ok(DualSection {
            ctx: Arc::clone(ctx),
            tiers,
        })
    }

    pub fn from_flat(ctx: &Arc<JetContext>, flat: Vec<DiffPoly>) -> Result<DualSection> {
        if flat.len() != ctx.total_antifield_rank() {
            return Err(Error::SignatureMismatch(format!(
                "flat dual section of length {} over a context with total rank {}",
                flat.len(),
                ctx.total_antifield_rank()
            )));
        }
        let mut tiers = Vec::with_capacity(ctx.n_tiers());
        let mut it = flat.into_iter();
        for t in 1..=ctx.n_tiers() {
            tiers.push(it.by_ref().take(ctx.tier_rank(t)).collect());
        }
        DualSection::from_tiers(ctx, tiers)
    }

    pub fn context(&self) -> &Arc<JetContext> {
        &self.ctx
    }

    /// Components of tier `t` (1-based).
    pub fn tier(&self, t: usize) -> &[DiffPoly] {
        &self.tiers[t - 1]
    }

    pub fn flat(&self) -> Vec<DiffPoly> {
        self.tiers.iter().flatten().cloned().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.tiers.iter().flatten().all(DiffPoly::is_zero)
    }

    pub fn checked_add(&self, other: &DualSection) -> Result<DualSection> {
        require_same_context(&self.ctx, &other.ctx)?;
        let tiers = self
            .tiers
            .iter()
            .zip(&other.tiers)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| x.checked_add(y))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DualSection {
            ctx: Arc::clone(&self.ctx),
            tiers,
        })
    }

    pub fn scaled(&self, k: &Coeff) -> DualSection {
        DualSection {
            ctx: Arc::clone(&self.ctx),
            tiers: self
                .tiers
                .iter()
                .map(|t| t.iter().map(|f| f.scaled(k)).collect())
                .collect(),
        }
    }

    /// Apply `f` to every component.
    pub fn map<F>(&self, mut f: F) -> Result<DualSection>
    where
        F: FnMut(&DiffPoly) -> Result<DiffPoly>,
    {
        let tiers = self
            .tiers
            .iter()
            .map(|t| t.iter().map(&mut f).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(DualSection {
            ctx: Arc::clone(&self.ctx),
            tiers,
        })
    }

    /// Uniform total parity: component parity combined with slot-tier
    /// parity, equal across all nonzero components.  Zero sections count
    /// as even.
    pub fn total_parity(&self) -> Result<Parity> {
        let mut parity: Option<Parity> = None;
        for (i, tier) in self.tiers.iter().enumerate() {
            for f in tier {
                if f.is_zero() {
                    continue;
                }
                let poly = f.uniform_parity().ok_or_else(|| {
                    Error::ParityMismatch(format!(
                        "tier-{} component is not parity-homogeneous",
                        i + 1
                    ))
                })?;
                let total = poly.combine(Parity::from_antighost(i + 1));
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
        }
        Ok(parity.unwrap_or(Parity::Even))
    }
}

/// The dual-shift differential on dual sections: output tier `i` is
/// `(−1)^{p(θ)}·(−1)^i·Δ_i*(θ_{i+1})`, the top tier maps to zero.
pub fn lphi_star(setup: &KTSetup, theta: &DualSection) -> Result<DualSection> {
    let ctx = setup.context();
    require_same_context(ctx, theta.context())?;
    let sign = if theta.total_parity()?.is_odd() { -1 } else { 1 };
    let mut tiers: Vec<Vec<DiffPoly>> = Vec::with_capacity(ctx.n_tiers());
    for i in 1..=ctx.n_tiers() {
        if i < ctx.n_tiers() {
            let alt = if i % 2 == 1 { -1 } else { 1 };
            let shifted = setup.compat[i - 1].adjoint().apply(theta.tier(i + 1))?;
            tiers.push(
                shifted
                    .into_iter()
                    .map(|f| f.scaled(&coeff_int(sign * alt)))
                    .collect(),
            );
        } else {
            tiers.push(vec![DiffPoly::zero(ctx); ctx.tier_rank(i)]);
        }
    }
    DualSection::from_tiers(ctx, tiers)
}

/// The edge map out of the dual chain into the dependent-variable dual:
/// `(−1)^{p(θ)}·[ℓ_F*(θ_1) + Σ_i (ℓ^u of Δ_i(c^i))*(θ_{i+1})]`.
///
/// For a normal setup this is `±ℓ_F*` applied to the single tier.
pub fn kappa_edge(setup: &KTSetup, theta: &DualSection) -> Result<Vec<DiffPoly>> {
    let ctx = setup.context();
    require_same_context(ctx, theta.context())?;
    let sign = if theta.total_parity()?.is_odd() { -1 } else { 1 };
    let lf = linearize(&setup.system.residuals())?;
    let mut out = lf.adjoint().apply(theta.tier(1))?;
    for (i, op) in setup.compat.iter().enumerate() {
        let tier = i + 1;
        let image = op.apply(&antifield_tuple(ctx, tier))?;
        let lu = linearize_columns(&image, &FiberVar::dependents(ctx))?;
        let contribution = lu.adjoint().apply(theta.tier(tier + 1))?;
        for (o, c) in out.iter_mut().zip(contribution) {
            *o = o.checked_add(&c)?;
        }
    }
    Ok(out
        .into_iter()
        .map(|f| f.scaled(&coeff_int(sign)))
        .collect())
}

/// The block-subdiagonal chain operator on the flat antifield module:
/// block `(tier i+1, tier i)` holds `Δ_i`.
fn block_shift(setup: &KTSetup) -> CDiffOp {
    let ctx = setup.context();
    let rank = ctx.total_antifield_rank();
    let mut out = CDiffOp::zero(ctx, rank, rank);
    for (i, op) in setup.compat.iter().enumerate() {
        let tier = i + 1;
        for r in 0..op.rows() {
            for c in 0..op.cols() {
                for (sigma, coeff) in op.entry(r, c) {
                    out.add_term(
                        ctx.antifield_flat_index(tier + 1, r),
                        ctx.antifield_flat_index(tier, c),
                        sigma.clone(),
                        coeff.clone(),
                    );
                }
            }
        }
    }
    out
}

/// The alternating dual shift on the flat module: block `(tier i, tier
/// i+1)` holds `(−1)^i·Δ_i*`.
fn dual_block_shift(setup: &KTSetup) -> CDiffOp {
    let ctx = setup.context();
    let rank = ctx.total_antifield_rank();
    let mut out = CDiffOp::zero(ctx, rank, rank);
    for (i, op) in setup.compat.iter().enumerate() {
        let tier = i + 1;
        let alt = if tier % 2 == 1 { -1 } else { 1 };
        let adj = op.adjoint();
        for r in 0..adj.rows() {
            for c in 0..adj.cols() {
                for (sigma, coeff) in adj.entry(r, c) {
                    out.add_term(
                        ctx.antifield_flat_index(tier, r),
                        ctx.antifield_flat_index(tier + 1, c),
                        sigma.clone(),
                        coeff.scaled(&coeff_int(alt)),
                    );
                }
            }
        }
    }
    out
}

/// Scale column `c` of a flat-module operator by `(−1)^{tier(c)}`.
fn scale_columns_by_tier(op: &CDiffOp) -> CDiffOp {
    let ctx = op.context();
    let mut out = CDiffOp::zero(ctx, op.rows(), op.cols());
    for r in 0..op.rows() {
        for c in 0..op.cols() {
            let (tier, _) = ctx.antifield_from_flat(c);
            let sign = if tier % 2 == 1 { -1 } else { 1 };
            for (sigma, coeff) in op.entry(r, c) {
                out.add_term(r, c, sigma.clone(), coeff.scaled(&coeff_int(sign)));
            }
        }
    }
    out
}

/// The total differential on multilinear operator forms.
///
/// Both parts transport the polynomial differential exactly: the operator
/// part carries the antifield-positive layers, and the antifield-free part
/// receives the arity-drop of the linear layer (the operator applied to the
/// tuple of equation residuals, restricted to its antifield-free terms).
/// The result's parity is flipped and the square of the map is zero.
///
/// The map commutes with [`MultiLinOp::selfadjoint_project`] on the
/// self-adjoint subspace (`S∘T∘S = T∘S`); raw commutation fails exactly at
/// the arity-1 → arity-0 edge, where the drop of a skew linear layer is
/// visible to the faithful transport but erased by the projector.
pub fn total_differential(setup: &KTSetup, psi: &MultiLinOp) -> Result<MultiLinOp> {
    let ctx = setup.context();
    require_same_context(ctx, psi.context())?;
    let sign = if psi.parity().is_odd() { -1 } else { 1 };
    let b = psi.operator();

    let delta_coeffs = b.map_coefficients(|f| kt_delta(setup, f))?;
    let mut op_out = scale_columns_by_tier(&delta_coeffs);
    op_out = op_out.checked_add(&b.compose(&block_shift(setup))?)?;
    op_out = op_out.checked_add(&dual_block_shift(setup).compose(b)?.scaled(&coeff_int(sign)))?;

    let mut generator_pad = vec![DiffPoly::zero(ctx); ctx.total_antifield_rank()];
    for (a, f) in setup.system.residuals().into_iter().enumerate() {
        generator_pad[ctx.antifield_flat_index(1, a)] = f;
    }
    let dropped = b.apply(&generator_pad)?;
    let shifted_base = dual_block_shift(setup).apply(psi.base())?;
    let base_out = dropped
        .iter()
        .zip(&shifted_base)
        .map(|(d, s)| antifield_free_part(d).checked_add(&s.scaled(&coeff_int(sign))))
        .collect::<Result<Vec<_>>>()?;

    Ok(MultiLinOp::from_parts(
        Arc::clone(ctx),
        base_out,
        op_out,
        psi.arity(),
        psi.parity().flip(),
    ))
}

/// Result of a truncated homology computation at one antighost degree.
#[derive(Debug, Clone)]
pub struct HomologyResult {
    /// Dimension in the base window.
    pub dimension: usize,
    /// Dimensions in the base window and the jet-order+1 window.
    pub window_dimensions: (usize, usize),
    /// Whether the two windows agree.
    pub stable: bool,
    /// Representative cycles from the base window.
    pub representatives: Vec<DiffPoly>,
}

/// Homology of the δ-complex of densities modulo total divergences, at
/// antighost degree `p`, over a finite truncation window.
///
/// Divergence-triviality is decided through the Euler operator over all
/// fiber variables (a density is a total divergence exactly when its Euler
/// image vanishes).  Cycles are monomial-window combinations `z` with
/// `E(δz) = 0`; boundary classes are spanned by `E(δw)` for `w` in the
/// antighost-`p+1` window, bounded by total jet weight (jet order summed
/// over all factors) up to the cycle window's jet order plus a fixed slack.
/// The reported dimension is computed in both the given window and the next
/// jet window; equality sets the `stable` flag.
pub fn truncated_homology(
    setup: &KTSetup,
    trunc: &TruncationSpec,
    p: usize,
) -> Result<HomologyResult> {
    if p < 1 {
        return Err(Error::TruncationTooSmall(
            "homology is graded by antighost number ≥ 1".into(),
        ));
    }
    if trunc.antighost_max < p + 1 {
        return Err(Error::TruncationTooSmall(format!(
            "the window must cover antighost {} to span boundaries; got antighost_max = {}",
            p + 1,
            trunc.antighost_max
        )));
    }
    let (dim_lo, representatives) = homology_window(setup, trunc, p)?;
    let (dim_hi, _) = homology_window(setup, &trunc.with_jet_order(trunc.jet_order_max + 1), p)?;
    Ok(HomologyResult {
        dimension: dim_lo,
        window_dimensions: (dim_lo, dim_hi),
        stable: dim_lo == dim_hi,
        representatives,
    })
}

type EulerCoords = Vec<((usize, Monomial), Coeff)>;

fn euler_coordinates(f: &DiffPoly, vars: &[FiberVar]) -> EulerCoords {
    let mut out = Vec::new();
    for (i, component) in euler(f, vars).into_iter().enumerate() {
        for (m, c) in component.terms() {
            out.push(((i, m.clone()), c.clone()));
        }
    }
    out
}

fn homology_window(
    setup: &KTSetup,
    trunc: &TruncationSpec,
    p: usize,
) -> Result<(usize, Vec<DiffPoly>)> {
    let ctx = setup.context();
    let vars = FiberVar::all(ctx);
    let cycle_monos = monomial_window(ctx, trunc, p);
    if cycle_monos.is_empty() {
        return Ok((0, Vec::new()));
    }

    let data: Vec<Result<(EulerCoords, EulerCoords)>> =
        par::map_collect(cycle_monos.clone(), |m| {
            let z = DiffPoly::from_term(ctx, m, coeff_int(1));
            let dz = kt_delta(setup, &z)?;
            Ok((euler_coordinates(&dz, &vars), euler_coordinates(&z, &vars)))
        });
    let mut cycle_data = Vec::with_capacity(data.len());
    for d in data {
        cycle_data.push(d?);
    }

    let mut registry: BTreeMap<(usize, Monomial), usize> = BTreeMap::new();
    let coord_id = |registry: &mut BTreeMap<(usize, Monomial), usize>,
                        key: (usize, Monomial)| {
        let next = registry.len();
        *registry.entry(key).or_insert(next)
    };

    // Kernel of z ↦ E(δz) over the cycle window.
    let mut kernel_rows: Vec<BTreeMap<usize, Coeff>> = Vec::new();
    for (col, (e_dz, _)) in cycle_data.iter().enumerate() {
        for (key, coeff) in e_dz {
            let id = coord_id(&mut registry, key.clone());
            if kernel_rows.len() <= id {
                kernel_rows.resize_with(id + 1, BTreeMap::new);
            }
            kernel_rows[id].insert(col, coeff.clone());
        }
    }
    let mut system = LinearSystem::new(cycle_monos.len());
    for row in &kernel_rows {
        let entries: Vec<(usize, Coeff)> = row.iter().map(|(c, v)| (*c, v.clone())).collect();
        system.add_row(&entries);
    }
    let kernel = system.kernel_basis();
    if kernel.is_empty() {
        return Ok((0, Vec::new()));
    }

    // Candidate classes: kernel combinations whose own divergence-class
    // coordinates are nonzero (a zero vector is already a total divergence).
    let mut pending: Vec<(Vec<Coeff>, Vec<(usize, Coeff)>)> = Vec::new();
    for alpha in kernel {
        let mut row: BTreeMap<usize, Coeff> = BTreeMap::new();
        for (col, a) in alpha.iter().enumerate() {
            if num_traits::Zero::is_zero(a) {
                continue;
            }
            for (key, coeff) in &cycle_data[col].1 {
                let id = coord_id(&mut registry, key.clone());
                let slot = row.entry(id).or_insert_with(|| coeff_int(0));
                *slot += a * coeff;
            }
        }
        let entries: Vec<(usize, Coeff)> = row
            .into_iter()
            .filter(|(_, v)| !num_traits::Zero::is_zero(v))
            .collect();
        if !entries.is_empty() {
            pending.push((alpha, entries));
        }
    }

    // Boundary classes from the antighost-(p+1) window with jet slack,
    // streamed in chunks: large boundary windows are cut short as soon as
    // every candidate class is covered.
    let trace = std::env::var_os("JETKT_TRACE_HOMOLOGY").is_some();
    let phase_start = std::time::Instant::now();
    let mut probe = RankProbe::new();
    if !pending.is_empty() {
        let jet_sum_bound = trunc.jet_order_max + BOUNDARY_JET_SUM_SLACK;
        let boundary_trunc = trunc.with_jet_order(jet_sum_bound);
        let mut boundary_monos =
            monomial_window_weighted(ctx, &boundary_trunc, p + 1, jet_sum_bound);
        if trace {
            eprintln!(
                "homology p={p} jet={}: cycles={} kernel_pending={} boundary={}",
                trunc.jet_order_max,
                cycle_monos.len(),
                pending.len(),
                boundary_monos.len()
            );
        }
        // Low-jet boundaries cover low-jet cycles; visiting them first lets
        // the stream stop long before the high-order tail.
        boundary_monos.sort_by_key(|m| {
            m.factors()
                .iter()
                .map(|(s, e)| s.jet_order() * e)
                .sum::<u32>()
        });
        for chunk in boundary_monos.chunks(BOUNDARY_CHUNK) {
            let chunk_data: Vec<Result<EulerCoords>> = par::map_collect(chunk.to_vec(), |w| {
                let wp = DiffPoly::from_term(ctx, w, coeff_int(1));
                let dw = kt_delta(setup, &wp)?;
                Ok(euler_coordinates(&dw, &vars))
            });
            let mut absorbed = false;
            for coords in chunk_data {
                let coords = coords?;
                let mut row: BTreeMap<usize, Coeff> = BTreeMap::new();
                for (key, coeff) in coords {
                    let id = coord_id(&mut registry, key);
                    let slot = row.entry(id).or_insert_with(|| coeff_int(0));
                    *slot += coeff;
                }
                let entries: Vec<(usize, Coeff)> = row
                    .into_iter()
                    .filter(|(_, v)| !num_traits::Zero::is_zero(v))
                    .collect();
                if !entries.is_empty() {
                    absorbed |= probe.try_absorb(&entries);
                }
            }
            if absorbed {
                pending.retain(|(_, entries)| !probe.in_span(entries));
                if pending.is_empty() {
                    break;
                }
            }
            if trace {
                let max_sum: u32 = chunk
                    .last()
                    .map(|m| m.factors().iter().map(|(s, e)| s.jet_order() * e).sum())
                    .unwrap_or(0);
                eprintln!(
                    "  chunk done: probe_rank={} pending={} jet_sum≤{} elapsed={:.1?}",
                    probe.rank(),
                    pending.len(),
                    max_sum,
                    phase_start.elapsed()
                );
            }
        }
    }

    // Surviving classes, counted modulo boundaries and each other.
    let mut dim = 0;
    let mut representatives = Vec::new();
    for (alpha, entries) in pending {
        if probe.try_absorb(&entries) {
            dim += 1;
            let mut z = DiffPoly::zero(ctx);
            for (col, a) in alpha.iter().enumerate() {
                if !num_traits::Zero::is_zero(a) {
                    z.add_term(cycle_monos[col].clone(), a.clone());
                }
            }
            representatives.push(z);
        }
    }
    Ok((dim, representatives))
}
