//! Differential calculus on (horizontal) jet spaces.
//!
//! Total derivatives treat every jet coordinate — dependent variables and
//! antifields alike — as a function of the base variables: `D_i` raises the
//! multi-index of each coordinate it meets.  On top of them this module
//! builds the Euler operator (variational derivative), evolutionary
//! derivations, linearizations (Fréchet derivatives packaged as operators in
//! total derivatives), horizontal forms with their differential, and
//! equation systems in solved form with normal-form reduction.
//!
//! Sign conventions: a derivation `X` acts as `X(f) = Σ_s X(s)·∂^L f/∂s`
//! with the image `X(s)` multiplied from the *left* of the left partial
//! derivative; the Euler operator is `E(f)_t = Σ_σ (−1)^{|σ|} D_σ(∂^L
//! f/∂(t,σ))`.

mod forms;
mod system;

pub use forms::HorizontalForm;
pub use system::{EquationSystem, IdealDecomposition};

use std::sync::Arc;

use crate::cdiff::CDiffOp;
use crate::context::{require_same_context, JetContext};
use crate::error::{Error, Result};
use crate::expr::{DiffPoly, JetSymbol, MultiIndex};

/// A fiber coordinate a derivation or Euler operator can target: a dependent
/// variable or a single antifield component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FiberVar {
    Dependent(usize),
    Antifield { tier: usize, component: usize },
}

impl FiberVar {
    /// The jet symbol of this coordinate at multi-index `sigma`.
    pub fn at(self, sigma: MultiIndex) -> JetSymbol {
        match self {
            FiberVar::Dependent(j) => JetSymbol::dependent(j, sigma),
            FiberVar::Antifield { tier, component } => {
                JetSymbol::antifield(tier, component, sigma)
            }
        }
    }

    /// Does `sym` sit on this coordinate's jet tower?  If so, return its σ.
    fn matches(self, sym: &JetSymbol) -> Option<MultiIndex> {
        match (self, sym) {
            (FiberVar::Dependent(j), JetSymbol::Dependent { component, sigma }) if *component == j => {
                Some(sigma.clone())
            }
            (
                FiberVar::Antifield { tier, component },
                JetSymbol::Antifield {
                    tier: t,
                    component: b,
                    sigma,
                },
            ) if *t == tier && *b == component => Some(sigma.clone()),
            _ => None,
        }
    }

    /// Every fiber coordinate of the context: dependents, then antifields in
    /// tier-major order.
    pub fn all(ctx: &Arc<JetContext>) -> Vec<FiberVar> {
        let mut out: Vec<FiberVar> = (0..ctx.n_dependent()).map(FiberVar::Dependent).collect();
        for tier in 1..=ctx.n_tiers() {
            for component in 0..ctx.tier_rank(tier) {
                out.push(FiberVar::Antifield { tier, component });
            }
        }
        out
    }

    /// The dependent coordinates only.
    pub fn dependents(ctx: &Arc<JetContext>) -> Vec<FiberVar> {
        (0..ctx.n_dependent()).map(FiberVar::Dependent).collect()
    }

    /// The antifield coordinates only, tier-major.
    pub fn antifields(ctx: &Arc<JetContext>) -> Vec<FiberVar> {
        let mut out = Vec::new();
        for tier in 1..=ctx.n_tiers() {
            for component in 0..ctx.tier_rank(tier) {
                out.push(FiberVar::Antifield { tier, component });
            }
        }
        out
    }
}

/// The total derivative `D_i`.
pub fn total_derivative(f: &DiffPoly, i: usize) -> DiffPoly {
    let ctx = f.context();
    assert!(i < ctx.n_independent(), "base index out of range");
    let mut out = f.partial_left(&JetSymbol::Independent(i));
    for sym in f.symbols() {
        if matches!(sym, JetSymbol::Independent(_)) {
            continue;
        }
        let raised = DiffPoly::from_symbol(ctx, sym.raised(i));
        let partial = f.partial_left(&sym);
        if !partial.is_zero() {
            out = &out + &(&raised * &partial);
        }
    }
    out
}

/// The iterated total derivative `D_σ`.
pub fn total_derivative_sigma(f: &DiffPoly, sigma: &MultiIndex) -> DiffPoly {
    let mut out = f.clone();
    for &(i, m) in sigma.pairs() {
        for _ in 0..m {
            out = total_derivative(&out, i);
        }
    }
    out
}

/// Multi-indices σ with `(t, σ)` occurring in `f`, for a fiber coordinate `t`.
fn occurring_sigmas(f: &DiffPoly, t: FiberVar) -> Vec<MultiIndex> {
    f.symbols()
        .into_iter()
        .filter_map(|sym| t.matches(&sym))
        .collect()
}

/// The Euler operator (variational derivative) of a density with respect to
/// the listed fiber coordinates: `E(f)_t = Σ_σ (−1)^{|σ|} D_σ(∂^L f/∂(t,σ))`.
///
/// Annihilates total divergences in every listed direction.
pub fn euler(f: &DiffPoly, targets: &[FiberVar]) -> Vec<DiffPoly> {
    let ctx = f.context();
    targets
        .iter()
        .map(|&t| {
            let mut component = DiffPoly::zero(ctx);
            for sigma in occurring_sigmas(f, t) {
                let partial = f.partial_left(&t.at(sigma.clone()));
                let mut term = total_derivative_sigma(&partial, &sigma);
                if sigma.order() % 2 == 1 {
                    term = -&term;
                }
                component = &component + &term;
            }
            component
        })
        .collect()
}

/// Apply the evolutionary derivation with generating components `phi`:
/// `Ev_φ(f) = Σ_{t,σ} D_σ(φ_t)·∂^L f/∂(t,σ)`.
///
/// The derivation's parity is the parity of `φ` relative to its targets; the
/// left-multiplied-image convention makes it a graded derivation commuting
/// with every `D_i`.
pub fn evolutionary_apply(phi: &[(FiberVar, DiffPoly)], f: &DiffPoly) -> Result<DiffPoly> {
    let ctx = f.context();
    let mut out = DiffPoly::zero(ctx);
    for (t, phi_t) in phi {
        require_same_context(ctx, phi_t.context())?;
        for sigma in occurring_sigmas(f, *t) {
            let partial = f.partial_left(&t.at(sigma.clone()));
            if partial.is_zero() {
                continue;
            }
            let image = total_derivative_sigma(phi_t, &sigma);
            out = &out + &(&image * &partial);
        }
    }
    Ok(out)
}

/// Linearization (Fréchet derivative) of a tuple of functions with respect to
/// the given fiber coordinates: entry `(r, c) = Σ_σ (∂^L f_r/∂(c,σ))·D_σ`.
pub fn linearize_columns(components: &[DiffPoly], cols: &[FiberVar]) -> Result<CDiffOp> {
    let ctx = components
        .first()
        .map(DiffPoly::context)
        .expect("linearize of an empty tuple");
    for f in components {
        require_same_context(ctx, f.context())?;
    }
    let mut op = CDiffOp::zero(ctx, components.len(), cols.len());
    for (r, f) in components.iter().enumerate() {
        for (c, &t) in cols.iter().enumerate() {
            for sigma in occurring_sigmas(f, t) {
                let coeff = f.partial_left(&t.at(sigma.clone()));
                op.add_term(r, c, sigma, coeff);
            }
        }
    }
    Ok(op)
}

/// Linearization with respect to the dependent variables only.
pub fn linearize(components: &[DiffPoly]) -> Result<CDiffOp> {
    let ctx = components
        .first()
        .map(DiffPoly::context)
        .expect("linearize of an empty tuple");
    linearize_columns(components, &FiberVar::dependents(ctx))
}

/// Linearization with respect to dependents and all antifields (the extended
/// mode used on horizontal jets).
pub fn linearize_extended(components: &[DiffPoly]) -> Result<CDiffOp> {
    let ctx = components
        .first()
        .map(DiffPoly::context)
        .expect("linearize of an empty tuple");
    linearize_columns(components, &FiberVar::all(ctx))
}

/// Check that every component of `fs` shares the context `ctx`.
pub fn require_components_in(ctx: &Arc<JetContext>, fs: &[DiffPoly]) -> Result<()> {
    for f in fs {
        require_same_context(ctx, f.context())?;
    }
    Ok(())
}

/// Pair two component tuples: `⟨p, q⟩ = Σ p_a·q_a`.
pub fn pairing(p: &[DiffPoly], q: &[DiffPoly]) -> Result<DiffPoly> {
    if p.len() != q.len() {
        return Err(Error::SignatureMismatch(format!(
            "pairing of tuples with {} and {} components",
            p.len(),
            q.len()
        )));
    }
    let ctx = p.first().map(DiffPoly::context).expect("empty pairing");
    let mut out = DiffPoly::zero(ctx);
    for (a, b) in p.iter().zip(q) {
        out = out.checked_add(&a.checked_mul(b)?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::TierSpec;
    use crate::expr::{coeff_frac, coeff_int};

    fn ctx2() -> Arc<JetContext> {
        JetContext::with_tiers(
            vec!["x".into(), "t".into()],
            vec!["u".into()],
            vec![TierSpec { rank: 1 }],
        )
    }

    fn u(ctx: &Arc<JetContext>, pairs: &[(usize, u32)]) -> DiffPoly {
        DiffPoly::from_symbol(ctx, JetSymbol::dependent(0, MultiIndex::from_pairs(pairs.to_vec())))
    }

    fn c(ctx: &Arc<JetContext>, pairs: &[(usize, u32)]) -> DiffPoly {
        DiffPoly::from_symbol(
            ctx,
            JetSymbol::antifield(1, 0, MultiIndex::from_pairs(pairs.to_vec())),
        )
    }

    #[test]
    fn total_derivative_of_base_variable() {
        let ctx = ctx2();
        let x = DiffPoly::from_symbol(&ctx, JetSymbol::Independent(0));
        assert_eq!(total_derivative(&x, 0), DiffPoly::one(&ctx));
        assert_eq!(total_derivative(&x, 1), DiffPoly::zero(&ctx));
    }

    #[test]
    fn total_derivative_leibniz() {
        let ctx = ctx2();
        // D_x(u·u_x) = u_x² + u·u_xx
        let f = &u(&ctx, &[]) * &u(&ctx, &[(0, 1)]);
        let expected = &u(&ctx, &[(0, 1)]).pow(2) + &(&u(&ctx, &[]) * &u(&ctx, &[(0, 2)]));
        assert_eq!(total_derivative(&f, 0), expected);
    }

    #[test]
    fn total_derivative_preserves_antifield_parity() {
        let ctx = ctx2();
        assert_eq!(total_derivative(&c(&ctx, &[]), 0), c(&ctx, &[(0, 1)]));
    }

    #[test]
    fn total_derivatives_commute_on_sample() {
        let ctx = ctx2();
        let x = DiffPoly::from_symbol(&ctx, JetSymbol::Independent(0));
        let f = &(&x * &u(&ctx, &[(0, 1), (1, 1)])) * &(&c(&ctx, &[(1, 1)]) + &u(&ctx, &[]).pow(2));
        let dxdt = total_derivative(&total_derivative(&f, 0), 1);
        let dtdx = total_derivative(&total_derivative(&f, 1), 0);
        assert_eq!(dxdt, dtdx);
    }

    #[test]
    fn sigma_derivative_matches_iteration() {
        let ctx = ctx2();
        let sigma = MultiIndex::from_pairs(vec![(0, 2), (1, 1)]);
        assert_eq!(
            total_derivative_sigma(&u(&ctx, &[]), &sigma),
            u(&ctx, &[(0, 2), (1, 1)])
        );
    }

    #[test]
    fn euler_examples() {
        let ctx = ctx2();
        let targets = [FiberVar::Dependent(0)];
        // E(u_x²/2) = −u_xx
        let f = u(&ctx, &[(0, 1)]).pow(2).scaled(&coeff_frac(1, 2));
        assert_eq!(euler(&f, &targets), vec![-&u(&ctx, &[(0, 2)])]);
        // E(u³/6) = u²/2
        let g = u(&ctx, &[]).pow(3).scaled(&coeff_frac(1, 6));
        assert_eq!(
            euler(&g, &targets),
            vec![u(&ctx, &[]).pow(2).scaled(&coeff_frac(1, 2))]
        );
        // E annihilates the divergence D_x(u·u_xx)
        let div = total_derivative(&(&u(&ctx, &[]) * &u(&ctx, &[(0, 2)])), 0);
        assert_eq!(euler(&div, &targets), vec![DiffPoly::zero(&ctx)]);
    }

    #[test]
    fn evolutionary_with_ux_generator_is_dx() {
        let ctx = ctx2();
        let f = &u(&ctx, &[]) * &u(&ctx, &[(0, 1)]);
        let phi = [(FiberVar::Dependent(0), u(&ctx, &[(0, 1)]))];
        assert_eq!(
            evolutionary_apply(&phi, &f).unwrap(),
            total_derivative(&f, 0)
        );
    }

    #[test]
    fn evolutionary_commutes_with_total_derivative() {
        let ctx = ctx2();
        let f = &(&u(&ctx, &[]).pow(2) * &c(&ctx, &[(0, 1)])) + &u(&ctx, &[(1, 1)]);
        let phi = [
            (FiberVar::Dependent(0), &u(&ctx, &[(0, 1)]) * &u(&ctx, &[])),
            (
                FiberVar::Antifield { tier: 1, component: 0 },
                &c(&ctx, &[]) * &u(&ctx, &[]),
            ),
        ];
        let lhs = evolutionary_apply(&phi, &total_derivative(&f, 0)).unwrap();
        let rhs = total_derivative(&evolutionary_apply(&phi, &f).unwrap(), 0);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn linearize_kdv() {
        let ctx = ctx2();
        // F = u_t − u·u_x − u_xxx → ℓ_F = D_t − u_x − u·D_x − D_x³
        let f = &(&u(&ctx, &[(1, 1)]) - &(&u(&ctx, &[]) * &u(&ctx, &[(0, 1)]))) - &u(&ctx, &[(0, 3)]);
        let op = linearize(&[f]).unwrap();
        let mut expected = CDiffOp::zero(&ctx, 1, 1);
        expected.add_term(0, 0, MultiIndex::single(1), DiffPoly::one(&ctx));
        expected.add_term(0, 0, MultiIndex::empty(), -&u(&ctx, &[(0, 1)]));
        expected.add_term(0, 0, MultiIndex::single(0), -&u(&ctx, &[]));
        expected.add_term(
            0,
            0,
            MultiIndex::from_pairs(vec![(0, 3)]),
            DiffPoly::constant(&ctx, coeff_int(-1)),
        );
        assert_eq!(op, expected);
    }
}
