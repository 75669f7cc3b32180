//! Equation systems in solved, autoreduced form and reduction modulo their
//! differential ideal.
//!
//! Each equation reads `u^{j_a}_{σ_a} = rhs_a` with a *leading* jet symbol on
//! the left.  Solved form demands: leadings are pairwise distinct and none is
//! a derivative of another, and no right-hand side contains a *principal*
//! symbol (a derivative of any leading).  Reduction then repeatedly
//! substitutes the largest principal symbol present — largest in the global
//! symbol order — by the prolonged right-hand side.  A step budget converts
//! non-terminating orientations into a reported error instead of a hang.

use std::sync::Arc;

use crate::cdiff::CDiffOp;
use crate::context::{require_same_context, JetContext};
use crate::error::{Error, Result};
use crate::expr::{render_symbol, DiffPoly, JetSymbol, MultiIndex};
use crate::jetcalc::total_derivative_sigma;

/// Upper bound on substitution steps in one reduction.  Orderly orientations
/// (for example evolution equations) stay far below it; circular
/// orientations such as `u_x = u_yy, u_y = u_xx` blow up in jet order and
/// hit the budget quickly.
const MAX_REDUCTION_STEPS: usize = 5_000;

/// A system of equations in solved, autoreduced form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquationSystem {
    ctx: Arc<JetContext>,
    leadings: Vec<(usize, MultiIndex)>,
    rhs: Vec<DiffPoly>,
}

/// The result of dividing a polynomial by the residuals of a system:
/// `f = Λ(F) + remainder` with a 1×m operator `Λ` and a fully reduced
/// remainder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdealDecomposition {
    pub lambda: CDiffOp,
    pub remainder: DiffPoly,
}

impl EquationSystem {
    /// Validate and build a system from `(leading symbol, right-hand side)`
    /// pairs.
    pub fn new(equations: Vec<(JetSymbol, DiffPoly)>) -> Result<EquationSystem> {
        let ctx = match equations.first() {
            Some((_, rhs)) => Arc::clone(rhs.context()),
            None => {
                return Err(Error::NotSolvedForm {
                    index: 0,
                    reason: "the system has no equations".into(),
                })
            }
        };
        let mut leadings = Vec::with_capacity(equations.len());
        let mut rhs_list = Vec::with_capacity(equations.len());
        for (index, (lead, rhs)) in equations.into_iter().enumerate() {
            require_same_context(&ctx, rhs.context())?;
            let (component, sigma) = match lead {
                JetSymbol::Dependent { component, sigma } => (component, sigma),
                other => {
                    return Err(Error::NotSolvedForm {
                        index,
                        reason: format!(
                            "left-hand side {} is not a dependent jet symbol",
                            render_symbol(&ctx, &other)
                        ),
                    })
                }
            };
            if component >= ctx.n_dependent() {
                return Err(Error::NotSolvedForm {
                    index,
                    reason: format!("left-hand side component {component} is out of range"),
                });
            }
            for sym in rhs.symbols() {
                if matches!(sym, JetSymbol::Antifield { .. }) {
                    return Err(Error::NotSolvedForm {
                        index,
                        reason: format!(
                            "right-hand side contains the antifield {}",
                            render_symbol(&ctx, &sym)
                        ),
                    });
                }
            }
            leadings.push((component, sigma));
            rhs_list.push(rhs);
        }
        for a in 0..leadings.len() {
            for b in 0..leadings.len() {
                if a == b || leadings[a].0 != leadings[b].0 {
                    continue;
                }
                if leadings[b].1.checked_sub(&leadings[a].1).is_some() {
                    let sa = JetSymbol::dependent(leadings[a].0, leadings[a].1.clone());
                    let sb = JetSymbol::dependent(leadings[b].0, leadings[b].1.clone());
                    return Err(Error::LeadingOverlap(format!(
                        "leading {} is a derivative of leading {}",
                        render_symbol(&ctx, &sb),
                        render_symbol(&ctx, &sa)
                    )));
                }
            }
        }
        let system = EquationSystem {
            ctx,
            leadings,
            rhs: rhs_list,
        };
        for (index, rhs) in system.rhs.iter().enumerate() {
            for sym in rhs.symbols() {
                if system.principal(&sym).is_some() {
                    return Err(Error::NotAutoreduced {
                        index,
                        symbol: render_symbol(&system.ctx, &sym),
                    });
                }
            }
        }
        system.check_confluence()?;
        Ok(system)
    }

    pub fn context(&self) -> &Arc<JetContext> {
        &self.ctx
    }

    pub fn n_equations(&self) -> usize {
        self.rhs.len()
    }

    pub fn leading(&self, index: usize) -> JetSymbol {
        JetSymbol::dependent(self.leadings[index].0, self.leadings[index].1.clone())
    }

    pub fn right_hand_side(&self, index: usize) -> &DiffPoly {
        &self.rhs[index]
    }

    /// The residual tuple `F`, one `lhs − rhs` per equation.
    pub fn residuals(&self) -> Vec<DiffPoly> {
        self.leadings
            .iter()
            .zip(&self.rhs)
            .map(|((component, sigma), rhs)| {
                let lead = DiffPoly::from_symbol(
                    &self.ctx,
                    JetSymbol::dependent(*component, sigma.clone()),
                );
                &lead - rhs
            })
            .collect()
    }

    /// Match a symbol against the leadings: the first equation whose leading
    /// it prolongs, together with the prolongation index.
    fn principal(&self, sym: &JetSymbol) -> Option<(usize, MultiIndex)> {
        let JetSymbol::Dependent { component, sigma } = sym else {
            return None;
        };
        self.leadings
            .iter()
            .enumerate()
            .find_map(|(a, (comp_a, sigma_a))| {
                if comp_a == component {
                    sigma.checked_sub(sigma_a).map(|tau| (a, tau))
                } else {
                    None
                }
            })
    }

    fn largest_principal(&self, f: &DiffPoly) -> Option<(JetSymbol, usize, MultiIndex)> {
        f.symbols()
            .into_iter()
            .rev()
            .find_map(|sym| self.principal(&sym).map(|(a, tau)| (sym, a, tau)))
    }

    /// Normal form modulo the system: substitute principal symbols, largest
    /// first, until none remain.
    pub fn reduce(&self, f: &DiffPoly) -> Result<DiffPoly> {
        require_same_context(&self.ctx, f.context())?;
        let mut current = f.clone();
        for step in 0.. {
            let Some((sym, a, tau)) = self.largest_principal(&current) else {
                return Ok(current);
            };
            if step >= MAX_REDUCTION_STEPS {
                return Err(Error::NonTerminating {
                    steps: MAX_REDUCTION_STEPS,
                });
            }
            let value = total_derivative_sigma(&self.rhs[a], &tau);
            current = current.substitute_even(&sym, &value)?;
        }
        unreachable!()
    }

    /// Whether `f` reduces to zero.
    pub fn is_in_ideal(&self, f: &DiffPoly) -> Result<bool> {
        Ok(self.reduce(f)?.is_zero())
    }

    /// Divide `f` by the residual tuple: `f = Λ(F) + remainder`, tracking
    /// the eliminating operator `Λ` (a 1×m row) exactly.
    pub fn ideal_decompose(&self, f: &DiffPoly) -> Result<IdealDecomposition> {
        require_same_context(&self.ctx, f.context())?;
        let mut lambda = CDiffOp::zero(&self.ctx, 1, self.n_equations());
        let mut current = f.clone();
        for step in 0.. {
            let Some((sym, a, tau)) = self.largest_principal(&current) else {
                return Ok(IdealDecomposition {
                    lambda,
                    remainder: current,
                });
            };
            if step >= MAX_REDUCTION_STEPS {
                return Err(Error::NonTerminating {
                    steps: MAX_REDUCTION_STEPS,
                });
            }
            let value = total_derivative_sigma(&self.rhs[a], &tau);
            // Replace s^k by v^k term by term; the discrepancy per term is
            // c·rest·(s^k − v^k) = c·rest·(Σ_{i+j=k−1} s^i v^j)·D_τ(F_a),
            // which lands in the Λ column of equation a.
            let s_poly = DiffPoly::from_symbol(&self.ctx, sym.clone());
            let mut next = DiffPoly::zero(&self.ctx);
            for (mono, coeff) in current.terms() {
                let k = mono.exponent_of(&sym);
                if k == 0 {
                    next.add_term(mono.clone(), coeff.clone());
                    continue;
                }
                let rest_factors: Vec<(JetSymbol, u32)> = mono
                    .factors()
                    .iter()
                    .filter(|(s, _)| s != &sym)
                    .cloned()
                    .collect();
                let rest = crate::expr::Monomial::from_factors(rest_factors)
                    .expect("removing an even factor keeps the monomial valid");
                let rest_poly = DiffPoly::from_term(&self.ctx, rest, coeff.clone());
                next = next.checked_add(&rest_poly.checked_mul(&value.pow(k))?)?;
                let mut divided = DiffPoly::zero(&self.ctx);
                for i in 0..k {
                    divided =
                        divided.checked_add(&s_poly.pow(i).checked_mul(&value.pow(k - 1 - i))?)?;
                }
                lambda.add_term(0, a, tau.clone(), rest_poly.checked_mul(&divided)?);
            }
            current = next;
        }
        unreachable!()
    }

    /// Confluence surrogate: every pair of equations sharing a dependent must
    /// reduce the least common prolongation of their leadings — and each of
    /// its first prolongations — to the same normal form regardless of which
    /// equation fires first.
    fn check_confluence(&self) -> Result<()> {
        let n = self.ctx.n_independent();
        for a in 0..self.leadings.len() {
            for b in (a + 1)..self.leadings.len() {
                if self.leadings[a].0 != self.leadings[b].0 {
                    continue;
                }
                let lcm = self.leadings[a].1.lcm(&self.leadings[b].1);
                let mut probes = vec![lcm.clone()];
                probes.extend((0..n).map(|i| lcm.raised(i)));
                for sigma in probes {
                    let via_a = self.reduce(&total_derivative_sigma(
                        &self.rhs[a],
                        &sigma.checked_sub(&self.leadings[a].1).expect("σ ⊇ σ_a"),
                    ))?;
                    let via_b = self.reduce(&total_derivative_sigma(
                        &self.rhs[b],
                        &sigma.checked_sub(&self.leadings[b].1).expect("σ ⊇ σ_b"),
                    ))?;
                    if via_a != via_b {
                        let sym = JetSymbol::dependent(self.leadings[a].0, sigma);
                        return Err(Error::NonConfluent {
                            symbol: render_symbol(&self.ctx, &sym),
                            first: via_a.render(),
                            second: via_b.render(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}
