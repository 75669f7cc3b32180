//! Canonical text rendering of differential polynomials.
//!
//! The form is stable under re-parsing and is used verbatim in CLI output
//! and golden tests: terms sorted by (antighost, total degree, symbol
//! order); coefficients as `p/q`; dependent coordinates as `u[j]_{x^a t^b}`;
//! antifields as `c{tier}[b]_{x^a t^b}`.  The subscript braces are omitted
//! for order-zero coordinates, exponent `^1` is never written, and a
//! coefficient of `±1` on a non-constant monomial is folded into the sign.

use std::sync::Arc;

use num_traits::{One, Signed};

use crate::context::JetContext;
use crate::expr::{Coeff, DiffPoly, JetSymbol, Monomial, MultiIndex};

/// Render the multi-index part `_{x^a t^b}`, or an empty string for order 0.
pub(crate) fn render_sigma_suffix(ctx: &Arc<JetContext>, sigma: &MultiIndex) -> String {
    if sigma.is_empty() {
        return String::new();
    }
    let body = sigma
        .pairs()
        .iter()
        .map(|&(i, m)| {
            let name = ctx.independent_name(i);
            if m == 1 {
                name.to_string()
            } else {
                format!("{name}^{m}")
            }
        })
        .collect::<Vec<_>>()
        .join(" ");
    format!("_{{{body}}}")
}

/// Render one symbol in canonical form.
pub fn render_symbol(ctx: &Arc<JetContext>, sym: &JetSymbol) -> String {
    match sym {
        JetSymbol::Independent(i) => ctx.independent_name(*i).to_string(),
        JetSymbol::Dependent { component, sigma } => {
            format!("u[{component}]{}", render_sigma_suffix(ctx, sigma))
        }
        JetSymbol::Antifield {
            tier,
            component,
            sigma,
        } => format!("c{tier}[{component}]{}", render_sigma_suffix(ctx, sigma)),
    }
}

fn render_monomial(ctx: &Arc<JetContext>, mono: &Monomial) -> String {
    mono.factors()
        .iter()
        .map(|(sym, e)| {
            let s = render_symbol(ctx, sym);
            if *e == 1 {
                s
            } else {
                format!("{s}^{e}")
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

/// Render a nonnegative rational as `p` or `p/q`.
pub(crate) fn render_coeff_abs(c: &Coeff) -> String {
    let c = c.abs();
    if c.denom().is_one() {
        format!("{}", c.numer())
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// Canonical text form of a polynomial; `0` for the zero polynomial.
pub fn render_poly(p: &DiffPoly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let ctx = p.context();
    let mut terms: Vec<(&Monomial, &Coeff)> = p.terms().collect();
    terms.sort_by(|a, b| {
        (a.0.antighost(), a.0.degree(), a.0)
            .cmp(&(b.0.antighost(), b.0.degree(), b.0))
    });
    let mut out = String::new();
    for (idx, (mono, coeff)) in terms.iter().enumerate() {
        let negative = coeff.is_negative();
        if idx == 0 {
            if negative {
                out.push('-');
            }
        } else if negative {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        let abs = render_coeff_abs(coeff);
        if mono.is_unit() {
            out.push_str(&abs);
        } else if abs == "1" {
            out.push_str(&render_monomial(ctx, mono));
        } else {
            out.push_str(&abs);
            out.push('*');
            out.push_str(&render_monomial(ctx, mono));
        }
    }
    out
}
