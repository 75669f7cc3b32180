//! Lowering: resolve a parsed [`ProblemAst`] into core objects — a jet
//! context with the inferred antifield tiers, the equation system in solved
//! form, compatibility operators, and validated named artifacts.
//!
//! Failures split into two families that map to distinct exit codes:
//! positioned [`Diagnostic`]s (bad references, malformed equations — parse
//! errors to the caller) and [`Validation`] failures (the file is
//! well-formed but the declared objects are rejected by the core library).

use std::collections::BTreeMap;
use std::sync::Arc;

use jetkt_core::cdiff::CDiffOp;
use jetkt_core::conslaw::{Cosymmetry, Provenance};
use jetkt_core::expr::{coeff_frac, coeff_int, Coeff, DiffPoly, JetSymbol, MultiIndex};
use jetkt_core::jetcalc::EquationSystem;
use jetkt_core::{JetContext, TierSpec};
use num_traits::{Signed, Zero};

use crate::dsl::{
    AntifieldDecl, DiagCode, Diagnostic, ExprAst, Pos, ProblemAst, Subscript, SymbolRef,
};

/// A lowering failure: either a positioned diagnostic (exit 2) or a
/// validation rejection from the core library (exit 3).
#[derive(Debug)]
pub enum LowerError {
    Diag(Diagnostic),
    Validation(String),
}

impl From<Diagnostic> for LowerError {
    fn from(d: Diagnostic) -> LowerError {
        LowerError::Diag(d)
    }
}

fn validation(e: jetkt_core::Error) -> LowerError {
    LowerError::Validation(e.to_string())
}

/// The fully resolved problem.
pub struct Problem {
    pub ctx: Arc<JetContext>,
    pub system: Option<EquationSystem>,
    pub compat_ops: Vec<(String, CDiffOp)>,
    pub densities: Vec<(String, DiffPoly)>,
    pub currents: Vec<(String, Vec<DiffPoly>)>,
    pub cosymmetries: Vec<(String, Cosymmetry)>,
    /// Declared antifield aliases, tier-indexed (tier → name), for rendering.
    pub antifield_names: BTreeMap<usize, String>,
}

impl Problem {
    /// The equation system, or a validation error for commands that need one.
    pub fn system(&self) -> Result<&EquationSystem, LowerError> {
        self.system.as_ref().ok_or_else(|| {
            LowerError::Validation("the problem file declares no equations".into())
        })
    }
}

/// Resolve an AST against itself: build the context, then lower every
/// expression.
pub fn lower(ast: &ProblemAst) -> Result<Problem, LowerError> {
    let names = NameTable::build(ast)?;
    let ctx = names.ctx.clone();

    // Equations: solved-form leading symbols, duplicate detection, rhs.
    let mut equations = Vec::new();
    let mut leadings: Vec<(JetSymbol, Pos)> = Vec::new();
    for eq in &ast.equations {
        let (lead, lead_pos) = leading_symbol(&names, &eq.lhs)?;
        if let Some((_, first)) = leadings.iter().find(|(s, _)| *s == lead) {
            return Err(Diagnostic::new(
                DiagCode::DuplicateLeading,
                lead_pos,
                format!("leading derivative already solved for at {first}"),
            )
            .into());
        }
        leadings.push((lead.clone(), lead_pos));
        let rhs = lower_scalar(&names, &eq.rhs)?;
        equations.push((lead, rhs));
    }
    let system = if equations.is_empty() {
        None
    } else {
        Some(EquationSystem::new(equations).map_err(validation)?)
    };

    // Compatibility operators: rows grouped by name in first-appearance
    // order, each entry an operator polynomial with parity-homogeneous
    // coefficients.
    let mut compat_ops: Vec<(String, CDiffOp)> = Vec::new();
    for (name, rows) in &names.compat_groups {
        let cols = rows[0].entries.len();
        let mut op = CDiffOp::zero(&ctx, rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            if row.entries.len() != cols {
                return Err(Diagnostic::new(
                    DiagCode::Shape,
                    row.pos,
                    format!(
                        "operator `{name}` rows disagree: {} entries here, {cols} in the first row",
                        row.entries.len()
                    ),
                )
                .into());
            }
            for (c, entry) in row.entries.iter().enumerate() {
                let lowered = lower_operator_entry(&names, entry)?;
                for (sigma, coeff) in lowered {
                    op.add_term(r, c, sigma, coeff);
                }
            }
        }
        compat_ops.push((name.clone(), op));
    }

    // Named artifacts, validated against the system where one exists.
    let mut densities = Vec::new();
    for d in &ast.densities {
        densities.push((d.name.clone(), lower_scalar(&names, &d.exprs[0])?));
    }
    let mut currents = Vec::new();
    for cur in &ast.currents {
        if cur.exprs.len() != ctx.n_independent() {
            return Err(Diagnostic::new(
                DiagCode::Shape,
                cur.pos,
                format!(
                    "current `{}` has {} components; one per independent variable ({}) is required",
                    cur.name,
                    cur.exprs.len(),
                    ctx.n_independent()
                ),
            )
            .into());
        }
        let comps = cur
            .exprs
            .iter()
            .map(|e| lower_scalar(&names, e))
            .collect::<Result<Vec<_>, _>>()?;
        currents.push((cur.name.clone(), comps));
    }
    let mut cosymmetries = Vec::new();
    for co in &ast.cosymmetries {
        let comps = co
            .exprs
            .iter()
            .map(|e| lower_scalar(&names, e))
            .collect::<Result<Vec<_>, _>>()?;
        let system = system.as_ref().ok_or_else(|| {
            LowerError::Validation(format!(
                "cosymmetry `{}` requires an equation system",
                co.name
            ))
        })?;
        let validated =
            Cosymmetry::new(system, comps, Provenance::User).map_err(validation)?;
        cosymmetries.push((co.name.clone(), validated));
    }

    Ok(Problem {
        ctx,
        system,
        compat_ops,
        densities,
        currents,
        cosymmetries,
        antifield_names: names.antifield_names,
    })
}

// ---------------------------------------------------------------------------
// Name resolution
// ---------------------------------------------------------------------------

struct NameTable<'a> {
    ctx: Arc<JetContext>,
    independents: BTreeMap<String, usize>,
    dependents: BTreeMap<String, usize>,
    /// alias → (tier, rank)
    antifield_aliases: BTreeMap<String, (usize, usize)>,
    antifield_names: BTreeMap<usize, String>,
    compat_groups: Vec<(String, Vec<&'a crate::dsl::CompatRow>)>,
}

impl<'a> NameTable<'a> {
    fn build(ast: &'a ProblemAst) -> Result<NameTable<'a>, LowerError> {
        let mut independents = BTreeMap::new();
        for (i, (name, pos)) in ast.independents.iter().enumerate() {
            check_name(name, *pos)?;
            if independents.insert(name.clone(), i).is_some() {
                return Err(duplicate_name(name, *pos).into());
            }
        }
        let mut dependents = BTreeMap::new();
        for (j, (name, pos)) in ast.dependents.iter().enumerate() {
            check_name(name, *pos)?;
            if independents.contains_key(name) || dependents.insert(name.clone(), j).is_some() {
                return Err(duplicate_name(name, *pos).into());
            }
        }

        // Group compat rows by operator name, keeping first-appearance order.
        let mut compat_groups: Vec<(String, Vec<&crate::dsl::CompatRow>)> = Vec::new();
        for row in &ast.compat_rows {
            match compat_groups.iter_mut().find(|(n, _)| *n == row.name) {
                Some((_, rows)) => rows.push(row),
                None => compat_groups.push((row.name.clone(), vec![row])),
            }
        }

        // Tier structure: tier 1 is the equations; each compatibility
        // operator contributes the next tier with one antifield per row.
        let mut tier_ranks: Vec<usize> = Vec::new();
        if !ast.equations.is_empty() {
            tier_ranks.push(ast.equations.len());
            for (_, rows) in &compat_groups {
                tier_ranks.push(rows.len());
            }
        } else if !compat_groups.is_empty() {
            let pos = compat_groups[0].1[0].pos;
            return Err(Diagnostic::new(
                DiagCode::Shape,
                pos,
                "compatibility operators require equations to act on",
            )
            .into());
        }

        // Explicit antifield declarations must agree with the inferred tiers.
        let mut antifield_aliases = BTreeMap::new();
        let mut antifield_names = BTreeMap::new();
        for decl in &ast.antifields {
            check_name(&decl.name, decl.pos)?;
            let AntifieldDecl { name, rank, tier, pos } = decl;
            let tier = *tier as usize;
            if tier == 0 || tier > tier_ranks.len() {
                return Err(Diagnostic::new(
                    DiagCode::Shape,
                    *pos,
                    format!(
                        "antifield `{name}` declares tier {tier}, but the file provides {} tier(s)",
                        tier_ranks.len()
                    ),
                )
                .into());
            }
            if *rank as usize != tier_ranks[tier - 1] {
                return Err(Diagnostic::new(
                    DiagCode::Shape,
                    *pos,
                    format!(
                        "antifield `{name}` declares {rank} component(s), but tier {tier} has {}",
                        tier_ranks[tier - 1]
                    ),
                )
                .into());
            }
            if independents.contains_key(name)
                || dependents.contains_key(name)
                || antifield_aliases
                    .insert(name.clone(), (tier, *rank as usize))
                    .is_some()
            {
                return Err(duplicate_name(name, *pos).into());
            }
            antifield_names.insert(tier, name.clone());
        }

        let ind: Vec<String> = ast.independents.iter().map(|(n, _)| n.clone()).collect();
        let dep: Vec<String> = ast.dependents.iter().map(|(n, _)| n.clone()).collect();
        let ctx = if tier_ranks.is_empty() {
            JetContext::new(ind, dep)
        } else {
            JetContext::with_tiers(
                ind,
                dep,
                tier_ranks.iter().map(|&rank| TierSpec { rank }).collect(),
            )
        };
        Ok(NameTable {
            ctx,
            independents,
            dependents,
            antifield_aliases,
            antifield_names,
            compat_groups,
        })
    }

    fn tier_rank(&self, tier: usize) -> usize {
        self.ctx.tier_rank(tier)
    }

    /// Resolve one symbol reference to a jet symbol.
    ///
    /// Bracketed references (`u[1]`, `c2[0]`) resolve as the canonical forms
    /// the renderer produces — dependent or antifield by index — before any
    /// declared alias, so canonical output re-parses to the same symbol
    /// regardless of the declared names.
    fn resolve(&self, s: &SymbolRef) -> Result<JetSymbol, Diagnostic> {
        if let Some(k) = s.component {
            if s.name == "u" {
                let k = k as usize;
                return if k < self.ctx.n_dependent() {
                    Ok(JetSymbol::dependent(k, self.sigma(&s.subscript, s.pos)?))
                } else {
                    Err(Diagnostic::new(
                        DiagCode::UnknownSymbol,
                        s.pos,
                        format!("dependent component {k} is out of range"),
                    ))
                };
            }
            if let Some(tier) = self.canonical_tier(&s.name)? {
                let component = self.component_index(s, self.tier_rank(tier))?;
                return Ok(JetSymbol::antifield(
                    tier,
                    component,
                    self.sigma(&s.subscript, s.pos)?,
                ));
            }
            if let Some(&(tier, rank)) = self.antifield_aliases.get(&s.name) {
                let component = self.component_index(s, rank)?;
                return Ok(JetSymbol::antifield(
                    tier,
                    component,
                    self.sigma(&s.subscript, s.pos)?,
                ));
            }
            return Err(Diagnostic::new(
                DiagCode::UnknownSymbol,
                s.pos,
                format!("`{}` takes no component index", s.name),
            ));
        }
        if let Some(&i) = self.independents.get(&s.name) {
            if s.subscript != Subscript::None {
                return Err(Diagnostic::new(
                    DiagCode::UnknownSymbol,
                    s.pos,
                    format!("`{}` is an independent variable; it takes no subscript", s.name),
                ));
            }
            return Ok(JetSymbol::Independent(i));
        }
        if let Some(&j) = self.dependents.get(&s.name) {
            return Ok(JetSymbol::dependent(j, self.sigma(&s.subscript, s.pos)?));
        }
        if let Some(&(tier, rank)) = self.antifield_aliases.get(&s.name) {
            let component = self.component_index(s, rank)?;
            return Ok(JetSymbol::antifield(
                tier,
                component,
                self.sigma(&s.subscript, s.pos)?,
            ));
        }
        Err(Diagnostic::new(
            DiagCode::UnknownSymbol,
            s.pos,
            format!("unknown symbol `{}`", s.name),
        ))
    }

    /// `c<digits>` naming an existing tier, as the canonical renderer writes.
    fn canonical_tier(&self, name: &str) -> Result<Option<usize>, Diagnostic> {
        let Some(digits) = name.strip_prefix('c') else {
            return Ok(None);
        };
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Ok(None);
        }
        match digits.parse::<usize>() {
            Ok(tier) if tier >= 1 && tier <= self.ctx.n_tiers() => Ok(Some(tier)),
            _ => Ok(None),
        }
    }

    fn component_index(&self, s: &SymbolRef, rank: usize) -> Result<usize, Diagnostic> {
        match s.component {
            Some(k) if (k as usize) < rank => Ok(k as usize),
            Some(k) => Err(Diagnostic::new(
                DiagCode::UnknownSymbol,
                s.pos,
                format!("component {k} of `{}` is out of range (rank {rank})", s.name),
            )),
            None if rank == 1 => Ok(0),
            None => Err(Diagnostic::new(
                DiagCode::UnknownSymbol,
                s.pos,
                format!("`{}` has {rank} components; write `{}[k]`", s.name, s.name),
            )),
        }
    }

    fn sigma(&self, sub: &Subscript, pos: Pos) -> Result<MultiIndex, Diagnostic> {
        match sub {
            Subscript::None => Ok(MultiIndex::empty()),
            Subscript::Sugar(letters) => {
                let mut pairs: Vec<(usize, u32)> = Vec::new();
                for ch in letters.chars() {
                    let name = ch.to_string();
                    let i = *self.independents.get(&name).ok_or_else(|| {
                        Diagnostic::new(
                            DiagCode::UnknownSymbol,
                            pos,
                            format!("subscript letter `{ch}` names no independent variable"),
                        )
                    })?;
                    match pairs.iter_mut().find(|(d, _)| *d == i) {
                        Some((_, m)) => *m += 1,
                        None => pairs.push((i, 1)),
                    }
                }
                Ok(MultiIndex::from_pairs(pairs))
            }
            Subscript::Braced(parts) => {
                let mut pairs: Vec<(usize, u32)> = Vec::new();
                for (name, exp) in parts {
                    let i = *self.independents.get(name).ok_or_else(|| {
                        Diagnostic::new(
                            DiagCode::UnknownSymbol,
                            pos,
                            format!("subscript `{name}` names no independent variable"),
                        )
                    })?;
                    match pairs.iter_mut().find(|(d, _)| *d == i) {
                        Some((_, m)) => *m += exp,
                        None => pairs.push((i, *exp)),
                    }
                }
                Ok(MultiIndex::from_pairs(pairs))
            }
        }
    }

    fn direction(&self, ch: char, pos: Pos) -> Result<usize, Diagnostic> {
        self.independents.get(&ch.to_string()).copied().ok_or_else(|| {
            Diagnostic::new(
                DiagCode::UnknownSymbol,
                pos,
                format!("derivative letter `{ch}` names no independent variable"),
            )
        })
    }
}

fn check_name(name: &str, pos: Pos) -> Result<(), Diagnostic> {
    if name == "D" {
        return Err(Diagnostic::new(
            DiagCode::Shape,
            pos,
            "`D` is reserved for total-derivative factors",
        ));
    }
    Ok(())
}

fn duplicate_name(name: &str, pos: Pos) -> Diagnostic {
    Diagnostic::new(DiagCode::Shape, pos, format!("`{name}` is already declared"))
}

/// The equation left side must be a single derivative of a dependent.
fn leading_symbol(names: &NameTable, lhs: &ExprAst) -> Result<(JetSymbol, Pos), LowerError> {
    match lhs {
        ExprAst::Symbol(s) => match names.resolve(s) {
            Ok(sym @ JetSymbol::Dependent { .. }) => Ok((sym, s.pos)),
            Ok(_) => Err(Diagnostic::new(
                DiagCode::SolvedForm,
                s.pos,
                "equation must be solved for a derivative of a dependent variable",
            )
            .into()),
            Err(d) => Err(d.into()),
        },
        other => Err(Diagnostic::new(
            DiagCode::SolvedForm,
            other.pos(),
            "equation left side must be a single derivative, as in `u_t = …`",
        )
        .into()),
    }
}

// ---------------------------------------------------------------------------
// Expression lowering
// ---------------------------------------------------------------------------

/// Operator-entry values: scalars until a `D_…` factor appears, then 1×1
/// operators composed in writing order.
enum OpValue {
    Scalar(DiffPoly),
    Operator(CDiffOp),
}

impl OpValue {
    fn into_operator(self) -> CDiffOp {
        match self {
            OpValue::Scalar(f) => CDiffOp::scalar(f),
            OpValue::Operator(op) => op,
        }
    }
}

fn parse_int_coeff(digits: &str, pos: Pos) -> Result<Coeff, Diagnostic> {
    digits
        .parse::<i64>()
        .map(coeff_int)
        .map_err(|_| Diagnostic::new(DiagCode::Number, pos, format!("number `{digits}` is too large")))
}

/// Lower a scalar expression; `D_…` factors are rejected.
fn lower_scalar(names: &NameTable, e: &ExprAst) -> Result<DiffPoly, LowerError> {
    match lower_value(names, e)? {
        OpValue::Scalar(f) => Ok(f),
        OpValue::Operator(_) => Err(Diagnostic::new(
            DiagCode::Syntax,
            e.pos(),
            "total-derivative factors are only allowed in `compat` operator entries",
        )
        .into()),
    }
}

/// Lower an operator entry to its `σ → coefficient` table, checking that the
/// coefficients share a single parity.
fn lower_operator_entry(
    names: &NameTable,
    e: &ExprAst,
) -> Result<Vec<(MultiIndex, DiffPoly)>, LowerError> {
    let op = lower_value(names, e)?.into_operator();
    let entry = op.entry(0, 0);
    let mut parity = None;
    for coeff in entry.values() {
        for (mono, _) in coeff.terms() {
            let p = mono.parity();
            match parity {
                None => parity = Some(p),
                Some(q) if q == p => {}
                Some(_) => {
                    return Err(Diagnostic::new(
                        DiagCode::ParityOperator,
                        e.pos(),
                        "operator entry mixes even and odd coefficients",
                    )
                    .into());
                }
            }
        }
    }
    Ok(entry
        .iter()
        .map(|(sigma, coeff)| (sigma.clone(), coeff.clone()))
        .collect())
}

fn lower_value(names: &NameTable, e: &ExprAst) -> Result<OpValue, LowerError> {
    let ctx = &names.ctx;
    match e {
        ExprAst::Int(digits, pos) => {
            let c = parse_int_coeff(digits, *pos)?;
            Ok(OpValue::Scalar(DiffPoly::from_term(
                ctx,
                jetkt_core::expr::Monomial::unit(),
                c,
            )))
        }
        ExprAst::Symbol(s) => {
            let sym = names.resolve(s)?;
            Ok(OpValue::Scalar(DiffPoly::from_symbol(ctx, sym)))
        }
        ExprAst::DTotal { letters, pos } => {
            let mut pairs: Vec<(usize, u32)> = Vec::new();
            for ch in letters.chars() {
                let i = names.direction(ch, *pos)?;
                match pairs.iter_mut().find(|(d, _)| *d == i) {
                    Some((_, m)) => *m += 1,
                    None => pairs.push((i, 1)),
                }
            }
            Ok(OpValue::Operator(CDiffOp::d_sigma(
                ctx,
                MultiIndex::from_pairs(pairs),
            )))
        }
        ExprAst::Neg(inner) => match lower_value(names, inner)? {
            OpValue::Scalar(f) => Ok(OpValue::Scalar(-&f)),
            OpValue::Operator(op) => Ok(OpValue::Operator(op.neg())),
        },
        ExprAst::Add(a, b) => lower_sum(names, a, b, false),
        ExprAst::Sub(a, b) => lower_sum(names, a, b, true),
        ExprAst::Mul(a, b) => {
            let lhs = lower_value(names, a)?;
            let rhs = lower_value(names, b)?;
            match (lhs, rhs) {
                (OpValue::Scalar(f), OpValue::Scalar(g)) => {
                    Ok(OpValue::Scalar(f.checked_mul(&g).map_err(validation)?))
                }
                (lhs, rhs) => {
                    let lhs = lhs.into_operator();
                    let rhs = rhs.into_operator();
                    Ok(OpValue::Operator(lhs.compose(&rhs).map_err(validation)?))
                }
            }
        }
        ExprAst::Div(a, b, pos) => {
            let lhs = lower_value(names, a)?;
            let rhs = lower_value(names, b)?;
            let divisor = match rhs {
                OpValue::Scalar(f) => constant_of(&f),
                OpValue::Operator(_) => None,
            };
            let divisor = divisor.ok_or_else(|| {
                Diagnostic::new(DiagCode::Number, *pos, "division requires a constant divisor")
            })?;
            if divisor.is_zero() {
                return Err(Diagnostic::new(DiagCode::Number, *pos, "division by zero").into());
            }
            let inverse = coeff_frac(1, 1) / divisor;
            match lhs {
                OpValue::Scalar(f) => Ok(OpValue::Scalar(f.scaled(&inverse))),
                OpValue::Operator(op) => Ok(OpValue::Operator(op.scaled(&inverse))),
            }
        }
        ExprAst::Pow(base, exp, _) => match lower_value(names, base)? {
            OpValue::Scalar(f) => Ok(OpValue::Scalar(f.pow(*exp))),
            OpValue::Operator(op) => {
                let mut out = CDiffOp::identity(&names.ctx, 1);
                for _ in 0..*exp {
                    out = out.compose(&op).map_err(validation)?;
                }
                Ok(OpValue::Operator(out))
            }
        },
    }
}

fn lower_sum(
    names: &NameTable,
    a: &ExprAst,
    b: &ExprAst,
    subtract: bool,
) -> Result<OpValue, LowerError> {
    let lhs = lower_value(names, a)?;
    let rhs = lower_value(names, b)?;
    match (lhs, rhs) {
        (OpValue::Scalar(f), OpValue::Scalar(g)) => {
            let g = if subtract { -&g } else { g };
            Ok(OpValue::Scalar(f.checked_add(&g).map_err(validation)?))
        }
        (lhs, rhs) => {
            let lhs = lhs.into_operator();
            let rhs = rhs.into_operator();
            let rhs = if subtract { rhs.neg() } else { rhs };
            Ok(OpValue::Operator(lhs.checked_add(&rhs).map_err(validation)?))
        }
    }
}

/// The rational value of a constant polynomial, if it is one.
fn constant_of(f: &DiffPoly) -> Option<Coeff> {
    if f.is_zero() {
        return Some(coeff_int(0));
    }
    let mut terms = f.terms();
    let (mono, c) = terms.next()?;
    if terms.next().is_none() && mono.is_unit() {
        Some(c.clone())
    } else {
        None
    }
}

/// Signed check used by the renderer; re-exported here so `emit` need not
/// depend on num-traits directly.
pub fn coeff_is_negative(c: &Coeff) -> bool {
    c.is_negative()
}
