//! Conservation laws and cosymmetries of normal systems.
//!
//! For a system in solved form with residual tuple `F` (see
//! [`EquationSystem`]), a *cosymmetry* is a tuple `ψ` with one component per
//! equation satisfying the adjoint condition `ℓ_F*(ψ) ≡ 0` on shell.
//! Cosymmetries are the characteristics of conservation laws: a conserved
//! current `ω` (a horizontal form of degree `n−1` whose total divergence
//! vanishes on shell) determines a cosymmetry, and conversely every
//! cosymmetry arises from a current up to trivial terms.
//!
//! Two independent routes decide whether a given cosymmetry corresponds to a
//! conservation law, and this module implements both so they can be checked
//! against each other:
//!
//! * the **factorization route** ([`factorization_certificate`]): solve
//!   `ℓ_ψ + Δ* = ∇∘ℓ_F` on shell, where `Δ` is the operator with
//!   `Δ(F) = ℓ_F*(ψ)` read off by ideal decomposition and `∇` ranges over
//!   self-adjoint operators of bounded order;
//! * the **skew-witness route** ([`skew_witness_search`]): decide whether
//!   the tuple `ψ` itself is the image `□(F)` of a *skew*-adjoint
//!   C-differential operator (`□* = −□`), which characterizes the
//!   cosymmetries of trivial laws.
//!
//! The two routes agree on which cosymmetries are genuine, but they are not
//! interchangeable term by term: the skew-witness route needs operators of
//! positive order even for inputs that a direct pairing computation handles
//! at order zero.  [`compare_routes`] runs both on a solved basis of
//! cosymmetries and reports explicit instances of that asymmetry.
//!
//! All searches are bounded ansatz computations over exact rational
//! coefficients: a "not found" verdict is always qualified by the bound it
//! was established under, and is upgraded to a certain rejection only when a
//! normal-form obstruction makes membership impossible at any order.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::cdiff::CDiffOp;
use crate::context::JetContext;
use crate::error::{Error, Result};
use crate::expr::{coeff_int, Coeff, DiffPoly, JetSymbol, Monomial, MultiIndex};
use crate::jetcalc::{linearize, pairing, total_derivative, EquationSystem, HorizontalForm};
use crate::koszultate::{monomial_basis, KTSetup, TruncationSpec};
use crate::linalg::LinearSystem;
use crate::par;

/// Step budget for the greedy divergence splitter in
/// [`current_from_cosymmetry`]; exceeding it means the pairing could not be
/// written as a total divergence within the polynomial class explored.
const MAX_SPLIT_STEPS: usize = 4096;

/// How a cosymmetry entered the computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Produced by an ansatz solve ([`cosymmetry_solve`]) or derived from a
    /// conserved current.
    Solver,
    /// Supplied by the caller and validated on construction.
    User,
}

impl Provenance {
    /// Stable lowercase label, used by serialization layers.
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Solver => "solver",
            Provenance::User => "user",
        }
    }
}

/// A validated cosymmetry of a fixed system: components are kept in normal
/// form and satisfy `ℓ_F*(ψ) ≡ 0` on shell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cosymmetry {
    components: Vec<DiffPoly>,
    jet_order: u32,
    degree: u32,
    provenance: Provenance,
}

impl Cosymmetry {
    /// Validate `components` against `system`: reduce each component to
    /// normal form and check the adjoint condition on shell.
    ///
    /// Components must be antifield-free and number one per equation.
    pub fn new(
        system: &EquationSystem,
        components: Vec<DiffPoly>,
        provenance: Provenance,
    ) -> Result<Cosymmetry> {
        let m = system.n_equations();
        if components.len() != m {
            return Err(Error::SignatureMismatch(format!(
                "cosymmetry with {} components against a system of {} equations",
                components.len(),
                m
            )));
        }
        require_antifield_free(&components)?;
        let reduced = components
            .iter()
            .map(|f| system.reduce(f))
            .collect::<Result<Vec<_>>>()?;
        let adjoint = linearize(&system.residuals())?.adjoint();
        for image in adjoint.apply(&reduced)? {
            let residue = system.reduce(&image)?;
            if !residue.is_zero() {
                return Err(Error::NotCosymmetry(format!(
                    "adjoint condition leaves the on-shell residue {}",
                    residue.render()
                )));
            }
        }
        let (jet_order, degree) = shape_of(&reduced);
        Ok(Cosymmetry {
            components: reduced,
            jet_order,
            degree,
            provenance,
        })
    }

    /// Components in normal form, one per equation.
    pub fn components(&self) -> &[DiffPoly] {
        &self.components
    }

    /// Highest jet order appearing in any component.
    pub fn jet_order(&self) -> u32 {
        self.jet_order
    }

    /// Highest total monomial degree appearing in any component.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// A conserved current together with the operator certifying its divergence:
/// `div ω = witness(F)` holds identically, so the divergence vanishes on
/// shell.
#[derive(Debug, Clone)]
pub struct ConservedCurrent {
    form: HorizontalForm,
    witness: CDiffOp,
}

impl ConservedCurrent {
    /// The degree-`n−1` horizontal form.
    pub fn form(&self) -> &HorizontalForm {
        &self.form
    }

    /// The `1×m` operator `Λ` with `div ω = Λ(F)` identically.
    pub fn witness(&self) -> &CDiffOp {
        &self.witness
    }
}

/// Outcome of searching for a skew-adjoint operator `□` with `□(F) = ψ`.
#[derive(Debug, Clone)]
pub enum SkewWitnessVerdict {
    /// A witness was found; it satisfies `□* = −□` and `□(F) = ψ`
    /// identically.
    Member(CDiffOp),
    /// No witness exists with operator order up to `bound`.  When
    /// `nonmember_certain` is set, the normal form of `ψ` is nonzero, which
    /// rules out a witness of *any* order.
    NotFoundUpToBound { bound: u32, nonmember_certain: bool },
}

impl SkewWitnessVerdict {
    pub fn is_member(&self) -> bool {
        matches!(self, SkewWitnessVerdict::Member(_))
    }
}

/// Outcome of the factorization route for one cosymmetry.
#[derive(Debug, Clone)]
pub enum CertificateVerdict {
    /// Operators with `Δ(F) = ℓ_F*(ψ)` identically and
    /// `ℓ_ψ + Δ* = ∇∘ℓ_F` on shell, `∇` self-adjoint.
    Certified { nabla: CDiffOp, delta: CDiffOp },
    /// No self-adjoint `∇` of order up to `bound` closes the identity.
    NotFoundUpToBound { bound: u32 },
}

impl CertificateVerdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, CertificateVerdict::Certified { .. })
    }
}

/// Both routes run on a single cosymmetry.
#[derive(Debug, Clone)]
pub struct RouteComparison {
    pub cosymmetry: Cosymmetry,
    /// Whether `ℓ_F*(ψ) + ℓ_ψ*(F)` vanishes identically (off shell).
    pub pairing_residual_is_zero: bool,
    pub certificate: CertificateVerdict,
    pub skew_witness: SkewWitnessVerdict,
}

/// A tuple that vanishes on shell yet admits no order-zero skew witness,
/// demonstrating that the two routes price the same triviality differently.
#[derive(Debug, Clone)]
pub struct AsymmetryInstance {
    pub components: Vec<DiffPoly>,
    pub vanishes_on_shell: bool,
    /// Search restricted to operator order 0 — expected to fail.
    pub witness_at_zero: SkewWitnessVerdict,
    /// Search at `bound` — expected to succeed.
    pub witness_at_bound: SkewWitnessVerdict,
    pub bound: u32,
}

/// Report of [`compare_routes`]: both routes on a solved cosymmetry basis,
/// plus explicit order asymmetry instances.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub entries: Vec<RouteComparison>,
    pub asymmetry: Vec<AsymmetryInstance>,
}

// ---------------------------------------------------------------------------
// Ansatz machinery
// ---------------------------------------------------------------------------

/// Coordinate label for one scalar equation in an affine ansatz system:
/// either a monomial slot of a component tuple or a `(row, column, σ)`
/// coefficient slot of an operator identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum CoordKey {
    Slot {
        index: usize,
        mono: Monomial,
    },
    Entry {
        row: usize,
        col: usize,
        sigma: MultiIndex,
        mono: Monomial,
    },
}

/// A sparse affine system `A·x = b` with rows keyed by [`CoordKey`], built
/// incrementally and solved exactly.
struct AffineSolver {
    n_unknowns: usize,
    rows: BTreeMap<CoordKey, BTreeMap<usize, Coeff>>,
    rhs: BTreeMap<CoordKey, Coeff>,
}

impl AffineSolver {
    fn new(n_unknowns: usize) -> AffineSolver {
        AffineSolver {
            n_unknowns,
            rows: BTreeMap::new(),
            rhs: BTreeMap::new(),
        }
    }

    fn add_matrix(&mut self, key: CoordKey, col: usize, c: &Coeff) {
        if num_traits::Zero::is_zero(c) {
            return;
        }
        let entry = self
            .rows
            .entry(key)
            .or_default()
            .entry(col)
            .or_insert_with(|| coeff_int(0));
        *entry = &*entry + c;
    }

    fn add_rhs(&mut self, key: CoordKey, c: &Coeff) {
        if num_traits::Zero::is_zero(c) {
            return;
        }
        let entry = self.rhs.entry(key).or_insert_with(|| coeff_int(0));
        *entry = &*entry + c;
    }

    /// Row keys in canonical order: the union of matrix and right-hand-side
    /// keys, so an unmatched right-hand side shows up as an inconsistent
    /// zero row rather than being silently dropped.
    fn keys(&self) -> Vec<CoordKey> {
        let mut keys: BTreeSet<CoordKey> = self.rows.keys().cloned().collect();
        keys.extend(self.rhs.keys().cloned());
        keys.into_iter().collect()
    }

    fn assemble(&self) -> (LinearSystem, Vec<Coeff>) {
        let mut sys = LinearSystem::new(self.n_unknowns);
        let mut rhs = Vec::new();
        for key in self.keys() {
            let entries: Vec<(usize, Coeff)> = self
                .rows
                .get(&key)
                .map(|row| {
                    row.iter()
                        .filter(|(_, v)| !num_traits::Zero::is_zero(*v))
                        .map(|(c, v)| (*c, v.clone()))
                        .collect()
                })
                .unwrap_or_default();
            sys.add_row(&entries);
            rhs.push(self.rhs.get(&key).cloned().unwrap_or_else(|| coeff_int(0)));
        }
        (sys, rhs)
    }

    /// One exact solution of `A·x = b`, or `None` when inconsistent.
    fn solve(&self) -> Option<Vec<Coeff>> {
        let (sys, rhs) = self.assemble();
        sys.solve(&rhs)
    }

    /// Canonical kernel basis of the homogeneous part (the right-hand side
    /// must be empty).
    fn kernel(&self) -> Vec<Vec<Coeff>> {
        debug_assert!(self.rhs.is_empty());
        let (sys, _) = self.assemble();
        sys.kernel_basis()
    }
}

/// Scatter the terms of a tuple component into `Slot` coordinates.
fn slot_coords(index: usize, poly: &DiffPoly) -> Vec<(CoordKey, Coeff)> {
    poly.terms()
        .map(|(mono, c)| {
            (
                CoordKey::Slot {
                    index,
                    mono: mono.clone(),
                },
                c.clone(),
            )
        })
        .collect()
}

/// Scatter every coefficient of an operator into `Entry` coordinates.
fn entry_coords(op: &CDiffOp) -> Vec<(CoordKey, Coeff)> {
    let mut out = Vec::new();
    for row in 0..op.rows() {
        for col in 0..op.cols() {
            for (sigma, poly) in op.entry(row, col) {
                for (mono, c) in poly.terms() {
                    out.push((
                        CoordKey::Entry {
                            row,
                            col,
                            sigma: sigma.clone(),
                            mono: mono.clone(),
                        },
                        c.clone(),
                    ));
                }
            }
        }
    }
    out
}

/// Maximal dependent jet order and maximal total monomial degree over a
/// slice of polynomials.
fn shape_of(polys: &[DiffPoly]) -> (u32, u32) {
    let mut jet = 0;
    let mut degree = 0;
    for poly in polys {
        for (mono, _) in poly.terms() {
            degree = degree.max(mono.degree());
            for (sym, _) in mono.factors() {
                if matches!(sym, JetSymbol::Dependent { .. }) {
                    jet = jet.max(sym.jet_order());
                }
            }
        }
    }
    (jet, degree)
}

/// Bounds spanned by a slice of polynomials, split the way
/// [`TruncationSpec`] counts them: dependent jet order, dependent degree,
/// and base degree.
fn spanning_bounds(polys: &[DiffPoly]) -> (u32, u32, u32) {
    let mut jet = 0;
    let mut dep_degree = 0;
    let mut base_degree = 0;
    for poly in polys {
        for (mono, _) in poly.terms() {
            let mut dep = 0;
            let mut base = 0;
            for (sym, e) in mono.factors() {
                match sym {
                    JetSymbol::Independent(_) => base += e,
                    JetSymbol::Dependent { .. } => {
                        dep += e;
                        jet = jet.max(sym.jet_order());
                    }
                    JetSymbol::Antifield { .. } => {}
                }
            }
            dep_degree = dep_degree.max(dep);
            base_degree = base_degree.max(base);
        }
    }
    (jet, dep_degree, base_degree)
}

/// Antifield-free scalar monomials within the given bounds.
fn scalar_window(
    ctx: &Arc<JetContext>,
    jet_order_max: u32,
    poly_degree_max: u32,
    base_degree_max: u32,
) -> Vec<Monomial> {
    monomial_basis(
        ctx,
        &TruncationSpec {
            antighost_max: 0,
            jet_order_max,
            poly_degree_max,
            base_degree_max,
        },
    )
}

fn require_antifield_free(components: &[DiffPoly]) -> Result<()> {
    for poly in components {
        if poly.symbols().iter().any(|s| s.antighost() > 0) {
            return Err(Error::SignatureMismatch(
                "cosymmetry data must be antifield-free".into(),
            ));
        }
    }
    Ok(())
}

fn require_tuple(system: &EquationSystem, tuple: &[DiffPoly]) -> Result<()> {
    if tuple.len() != system.n_equations() {
        return Err(Error::SignatureMismatch(format!(
            "tuple with {} components against a system of {} equations",
            tuple.len(),
            system.n_equations()
        )));
    }
    require_antifield_free(tuple)
}

/// Index set for an operator-coefficient ansatz: one unknown per
/// `(row, col, σ, monomial)` with `|σ| ≤ bound` and the monomial drawn from
/// `window`.
fn operator_ansatz_terms(
    rows: usize,
    cols: usize,
    n_independent: usize,
    bound: u32,
    window: &[Monomial],
) -> Vec<(usize, usize, MultiIndex, Monomial)> {
    let sigmas = MultiIndex::all_up_to_order(n_independent, bound);
    let mut terms = Vec::with_capacity(rows * cols * sigmas.len() * window.len());
    for r in 0..rows {
        for c in 0..cols {
            for sigma in &sigmas {
                for mono in window {
                    terms.push((r, c, sigma.clone(), mono.clone()));
                }
            }
        }
    }
    terms
}

/// The single-term operator `mono·D_σ` at position `(r, c)`.
fn single_term_op(
    ctx: &Arc<JetContext>,
    rows: usize,
    cols: usize,
    term: &(usize, usize, MultiIndex, Monomial),
) -> CDiffOp {
    let (r, c, sigma, mono) = term;
    let mut op = CDiffOp::zero(ctx, rows, cols);
    op.add_term(
        *r,
        *c,
        sigma.clone(),
        DiffPoly::from_term(ctx, mono.clone(), coeff_int(1)),
    );
    op
}

/// Linear combination `Σ x_k·basis_k` of single-term operators, each mapped
/// through `shape` (used to symmetrize or antisymmetrize the basis).
fn combine_ansatz<F>(
    ctx: &Arc<JetContext>,
    rows: usize,
    cols: usize,
    terms: &[(usize, usize, MultiIndex, Monomial)],
    solution: &[Coeff],
    shape: F,
) -> Result<CDiffOp>
where
    F: Fn(&CDiffOp) -> Result<CDiffOp>,
{
    let mut out = CDiffOp::zero(ctx, rows, cols);
    for (term, x) in terms.iter().zip(solution) {
        if num_traits::Zero::is_zero(x) {
            continue;
        }
        let basis = shape(&single_term_op(ctx, rows, cols, term))?;
        out = out.checked_add(&basis.scaled(x))?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Solve the cosymmetry condition `ℓ_F*(ψ) ≡ 0` (on shell) over an ansatz of
/// normal-form monomials within `bounds`, returning a canonical basis of the
/// solution space.
///
/// The ansatz runs over antifield-free monomials that are stable under
/// reduction (so the basis is parametrized by true on-shell coordinates),
/// one copy per equation slot.  The `antighost_max` field of `bounds` is
/// ignored.
pub fn cosymmetry_solve(
    system: &EquationSystem,
    bounds: &TruncationSpec,
) -> Result<Vec<Cosymmetry>> {
    let ctx = system.context().clone();
    let m = system.n_equations();
    let candidates = scalar_window(
        &ctx,
        bounds.jet_order_max,
        bounds.poly_degree_max,
        bounds.base_degree_max,
    );
    let mut window = Vec::with_capacity(candidates.len());
    for mono in candidates {
        let poly = DiffPoly::from_term(&ctx, mono.clone(), coeff_int(1));
        if system.reduce(&poly)? == poly {
            window.push(mono);
        }
    }
    if window.is_empty() {
        return Err(Error::EmptyAnsatz(
            "no reduction-stable monomials within the requested bounds; raise jet, degree, or base bounds".into(),
        ));
    }

    let adjoint = linearize(&system.residuals())?.adjoint();
    let w = window.len();
    let unknowns: Vec<(usize, usize)> = (0..m)
        .flat_map(|slot| (0..w).map(move |k| (slot, k)))
        .collect();
    let columns = par::map_collect(unknowns, |(slot, k)| -> Result<Vec<(CoordKey, Coeff)>> {
        let mut tuple = vec![DiffPoly::zero(&ctx); m];
        tuple[slot] = DiffPoly::from_term(&ctx, window[k].clone(), coeff_int(1));
        let image = adjoint.apply(&tuple)?;
        let mut coords = Vec::new();
        for (r, component) in image.iter().enumerate() {
            coords.extend(slot_coords(r, &system.reduce(component)?));
        }
        Ok(coords)
    });

    let mut solver = AffineSolver::new(m * w);
    for (col, coords) in columns.into_iter().enumerate() {
        for (key, c) in coords? {
            solver.add_matrix(key, col, &c);
        }
    }

    let mut basis = Vec::new();
    for vector in solver.kernel() {
        let mut components = Vec::with_capacity(m);
        for slot in 0..m {
            let mut component = DiffPoly::zero(&ctx);
            for (k, mono) in window.iter().enumerate() {
                let x = &vector[slot * w + k];
                if !num_traits::Zero::is_zero(x) {
                    component = component
                        .checked_add(&DiffPoly::from_term(&ctx, mono.clone(), x.clone()))?;
                }
            }
            components.push(component);
        }
        basis.push(Cosymmetry::new(system, components, Provenance::Solver)?);
    }
    Ok(basis)
}

/// The pairing residual `ℓ_F*(ψ) + ℓ_ψ*(F)`, computed identically (off
/// shell).
///
/// It vanishes identically whenever `ψ` is the image of the residual tuple
/// under a skew-adjoint operator, and — unlike the skew-witness search — it
/// costs a single operator application.  For a cosymmetry it vanishes on
/// shell but in general not identically.
pub fn adjoint_pairing_residual(
    system: &EquationSystem,
    psi: &[DiffPoly],
) -> Result<Vec<DiffPoly>> {
    require_tuple(system, psi)?;
    let residuals = system.residuals();
    let from_system = linearize(&residuals)?.adjoint().apply(psi)?;
    let from_psi = linearize(psi)?.adjoint().apply(&residuals)?;
    from_system
        .iter()
        .zip(&from_psi)
        .map(|(a, b)| a.checked_add(b))
        .collect()
}

/// Search for a skew-adjoint operator `□` (`□* = −□`) with `□(F) = ψ`
/// identically, with operator order at most `bound`.
///
/// Every image `□(F)` lies in the differential ideal of the system, so a
/// nonzero normal form of `ψ` certifies that no witness exists at any
/// order; the verdict records that distinction.  The coefficient ansatz is
/// drawn from the monomial span of `ψ` and the residuals.
pub fn skew_witness_search(
    system: &EquationSystem,
    psi: &[DiffPoly],
    bound: u32,
) -> Result<SkewWitnessVerdict> {
    require_tuple(system, psi)?;
    let ctx = system.context().clone();
    let m = system.n_equations();
    let residuals = system.residuals();

    for component in psi {
        if !system.reduce(component)?.is_zero() {
            return Ok(SkewWitnessVerdict::NotFoundUpToBound {
                bound,
                nonmember_certain: true,
            });
        }
    }

    let mut span: Vec<DiffPoly> = psi.to_vec();
    span.extend(residuals.iter().cloned());
    let (jet, deg, base) = spanning_bounds(&span);
    let window = scalar_window(&ctx, jet, deg, base);
    let terms = operator_ansatz_terms(m, m, ctx.n_independent(), bound, &window);

    // Parametrize directly over the skew space: the antisymmetrized basis
    // `E − E*` spans it, so only the application constraint is needed.
    let columns = par::map_collect(terms.clone(), |term| -> Result<Vec<(CoordKey, Coeff)>> {
        let e = single_term_op(&ctx, m, m, &term);
        let skew = e.checked_add(&e.adjoint().neg())?;
        let image = skew.apply(&residuals)?;
        let mut coords = Vec::new();
        for (slot, component) in image.iter().enumerate() {
            coords.extend(slot_coords(slot, component));
        }
        Ok(coords)
    });

    let mut solver = AffineSolver::new(terms.len());
    for (col, coords) in columns.into_iter().enumerate() {
        for (key, c) in coords? {
            solver.add_matrix(key, col, &c);
        }
    }
    for (slot, component) in psi.iter().enumerate() {
        for (key, c) in slot_coords(slot, component) {
            solver.add_rhs(key, &c);
        }
    }

    match solver.solve() {
        Some(solution) => {
            let witness = combine_ansatz(&ctx, m, m, &terms, &solution, |e| {
                e.checked_add(&e.adjoint().neg())
            })?;
            debug_assert_eq!(witness.apply(&residuals)?, psi.to_vec());
            Ok(SkewWitnessVerdict::Member(witness))
        }
        None => Ok(SkewWitnessVerdict::NotFoundUpToBound {
            bound,
            nonmember_certain: false,
        }),
    }
}

/// Run the factorization route on a validated cosymmetry: read off `Δ` with
/// `Δ(F) = ℓ_F*(ψ)` by ideal decomposition, then search for a self-adjoint
/// `∇` of order at most `bound` with `ℓ_ψ + Δ* = ∇∘ℓ_F` on shell.
pub fn factorization_certificate(
    system: &EquationSystem,
    psi: &Cosymmetry,
    bound: u32,
) -> Result<CertificateVerdict> {
    let ctx = system.context().clone();
    let m = system.n_equations();
    let image = linearize(&system.residuals())?
        .adjoint()
        .apply(psi.components())?;

    let mut delta_rows = Vec::with_capacity(image.len());
    for component in &image {
        let decomposition = system.ideal_decompose(component)?;
        if !decomposition.remainder.is_zero() {
            return Err(Error::CertificateRejected(format!(
                "adjoint image is not in the differential ideal; residue {}",
                decomposition.remainder.render()
            )));
        }
        delta_rows.push(vec![decomposition.lambda]);
    }
    let delta = CDiffOp::from_blocks(&ctx, &delta_rows);

    let ell_psi = linearize(psi.components())?;
    let gap = ell_psi
        .checked_add(&delta.adjoint())?
        .map_coefficients(|f| system.reduce(f))?;
    if gap.is_zero() {
        return Ok(CertificateVerdict::Certified {
            nabla: CDiffOp::zero(&ctx, m, m),
            delta,
        });
    }

    let ell_f = linearize(&system.residuals())?;
    let mut span: Vec<DiffPoly> = system.residuals();
    for row in 0..gap.rows() {
        for col in 0..gap.cols() {
            span.extend(gap.entry(row, col).values().cloned());
        }
    }
    let (jet, deg, base) = spanning_bounds(&span);
    let window = scalar_window(&ctx, jet, deg, base);
    let terms = operator_ansatz_terms(m, m, ctx.n_independent(), bound, &window);

    // Parametrize over the self-adjoint space via the symmetrized basis
    // `E + E*`; the constraint is the composition identity on shell.
    let columns = par::map_collect(terms.clone(), |term| -> Result<Vec<(CoordKey, Coeff)>> {
        let e = single_term_op(&ctx, m, m, &term);
        let symmetric = e.checked_add(&e.adjoint())?;
        let composed = symmetric
            .compose(&ell_f)?
            .map_coefficients(|f| system.reduce(f))?;
        Ok(entry_coords(&composed))
    });

    let mut solver = AffineSolver::new(terms.len());
    for (col, coords) in columns.into_iter().enumerate() {
        for (key, c) in coords? {
            solver.add_matrix(key, col, &c);
        }
    }
    for (key, c) in entry_coords(&gap) {
        solver.add_rhs(key, &c);
    }

    match solver.solve() {
        Some(solution) => {
            let nabla = combine_ansatz(&ctx, m, m, &terms, &solution, |e| {
                e.checked_add(&e.adjoint())
            })?;
            Ok(CertificateVerdict::Certified { nabla, delta })
        }
        None => Ok(CertificateVerdict::NotFoundUpToBound { bound }),
    }
}

/// Decide whether a degree-`n−1` horizontal form is a conserved current of
/// the system: decompose its total divergence against the residuals and
/// report the witness `Λ` with `div ω = Λ(F) + remainder`.
///
/// The form is conserved exactly when the remainder vanishes; the returned
/// flag says so and the witness is returned either way.
pub fn current_divergence_check(
    system: &EquationSystem,
    omega: &HorizontalForm,
) -> Result<(bool, CDiffOp)> {
    let divergence = omega.horizontal_d().density()?;
    let decomposition = system.ideal_decompose(&divergence)?;
    Ok((decomposition.remainder.is_zero(), decomposition.lambda))
}

/// The cosymmetry of a conserved current: `ψ = Λ*(1)` where
/// `div ω = Λ(F)`.
///
/// Fails with [`Error::NotConserved`] when the divergence does not lie in
/// the differential ideal.
pub fn current_to_cosymmetry(
    system: &EquationSystem,
    omega: &HorizontalForm,
) -> Result<Cosymmetry> {
    let (conserved, lambda) = current_divergence_check(system, omega)?;
    if !conserved {
        let remainder = system
            .ideal_decompose(&omega.horizontal_d().density()?)?
            .remainder;
        return Err(Error::NotConserved(format!(
            "divergence has the on-shell residue {}",
            remainder.render()
        )));
    }
    let characteristic = lambda
        .adjoint()
        .apply(&[DiffPoly::one(system.context())])?;
    Cosymmetry::new(system, characteristic, Provenance::Solver)
}

/// Reconstruct a conserved current from a cosymmetry by splitting the
/// pairing `⟨ψ, F⟩` into a total divergence, term by term.
///
/// The splitter is a bounded greedy integration; `Ok(None)` reports that it
/// gave up within its budget, not that no current exists.  On success the
/// witness `Λ` is the multiplication row `Λ(G) = Σ ψ_a·G_a`, so
/// `div ω = Λ(F)` holds identically.
pub fn current_from_cosymmetry(
    system: &EquationSystem,
    psi: &Cosymmetry,
) -> Result<Option<ConservedCurrent>> {
    let ctx = system.context().clone();
    let target = pairing(psi.components(), &system.residuals())?;
    let flux = match divergence_split(&ctx, &target) {
        Some(flux) => flux,
        None => return Ok(None),
    };
    let form = HorizontalForm::from_current(&flux)?;
    let mut witness = CDiffOp::zero(&ctx, 1, system.n_equations());
    for (slot, component) in psi.components().iter().enumerate() {
        if !component.is_zero() {
            witness.add_term(0, slot, MultiIndex::empty(), component.clone());
        }
    }
    Ok(Some(ConservedCurrent { form, witness }))
}

/// Greedy term-by-term splitting of `target` as `Σ_i D_i(J^i)`.
///
/// Each step integrates the current leading term by parts in one direction,
/// preferring the highest-jet factor; pure base terms integrate exactly in
/// the first direction.  Gives up (returns `None`) when a term has no jet
/// factor to lower or when the step budget runs out.
fn divergence_split(ctx: &Arc<JetContext>, target: &DiffPoly) -> Option<Vec<DiffPoly>> {
    let n = ctx.n_independent();
    let mut flux = vec![DiffPoly::zero(ctx); n];
    let mut remainder = target.clone();
    for _ in 0..MAX_SPLIT_STEPS {
        if remainder.is_zero() {
            return Some(flux);
        }
        // Highest fiber jet first; pure base monomials last.
        let (mono, coeff) = remainder
            .terms()
            .max_by_key(|(mono, _)| {
                let jet = mono
                    .factors()
                    .iter()
                    .filter(|(sym, _)| !matches!(sym, JetSymbol::Independent(_)))
                    .map(|(sym, _)| sym.jet_order() as i64)
                    .max()
                    .unwrap_or(-1);
                (jet, (*mono).clone())
            })
            .map(|(m, c)| (m.clone(), c.clone()))?;

        let fiber = mono
            .factors()
            .iter()
            .filter(|(sym, _)| !matches!(sym, JetSymbol::Independent(_)))
            .map(|(sym, _)| sym.clone())
            .max_by_key(|sym| (sym.jet_order(), sym.clone()));

        let step = match fiber {
            None => {
                // x^a·t^b·…  integrates exactly against the first variable.
                let x0 = JetSymbol::Independent(0);
                let a = mono.exponent_of(&x0);
                let mut factors = mono.factors().to_vec();
                bump(&mut factors, &x0, 1);
                let primitive = Monomial::from_factors(factors)?;
                let scale = &coeff / &coeff_int(i64::from(a) + 1);
                DiffPoly::from_term(ctx, primitive, scale)
            }
            Some(sym) => {
                let (direction, lowered) = lower_once(&sym)?;
                let mut factors = mono.factors().to_vec();
                bump(&mut factors, &sym, -1);
                bump(&mut factors, &lowered, 1);
                let primitive = Monomial::from_factors(factors)?;
                let multiplicity = primitive.exponent_of(&lowered);
                let scale = &coeff / &coeff_int(i64::from(multiplicity));
                let term = DiffPoly::from_term(ctx, primitive, scale);
                let direction_slot = direction;
                flux[direction_slot] = flux[direction_slot].checked_add(&term).ok()?;
                remainder = (&remainder - &total_derivative(&term, direction_slot)).clone();
                continue;
            }
        };
        flux[0] = flux[0].checked_add(&step).ok()?;
        remainder = (&remainder - &total_derivative(&step, 0)).clone();
    }
    remainder.is_zero().then_some(flux)
}

/// Lower a jet symbol by one derivative in its last active direction.
/// Returns `None` for order-zero symbols, which cannot be integrated by
/// parts within the polynomial class.
fn lower_once(sym: &JetSymbol) -> Option<(usize, JetSymbol)> {
    let sigma = match sym {
        JetSymbol::Independent(_) => return None,
        JetSymbol::Dependent { sigma, .. } | JetSymbol::Antifield { sigma, .. } => sigma,
    };
    let (direction, _) = *sigma.pairs().last()?;
    let lowered_sigma = sigma.checked_sub(&MultiIndex::single(direction))?;
    let lowered = match sym {
        JetSymbol::Independent(_) => unreachable!(),
        JetSymbol::Dependent { component, .. } => JetSymbol::dependent(*component, lowered_sigma),
        JetSymbol::Antifield {
            tier, component, ..
        } => JetSymbol::antifield(*tier, *component, lowered_sigma),
    };
    Some((direction, lowered))
}

/// Adjust the exponent of `sym` in a factor list by `delta`, keeping the
/// list free of zero exponents (order is restored by `Monomial::from_factors`).
fn bump(factors: &mut Vec<(JetSymbol, u32)>, sym: &JetSymbol, delta: i32) {
    if let Some(pos) = factors.iter().position(|(s, _)| s == sym) {
        let next = factors[pos].1 as i32 + delta;
        if next <= 0 {
            factors.remove(pos);
        } else {
            factors[pos].1 = next as u32;
        }
    } else if delta > 0 {
        factors.push((sym.clone(), delta as u32));
    }
}

/// Run both conservation-law routes on a solved cosymmetry basis of a
/// normal system and report them side by side, together with explicit
/// instances where the skew-witness route needs positive operator order.
///
/// `bounds` controls the cosymmetry ansatz; `witness_bound` caps the
/// operator order of both searches.  Fails with
/// [`Error::NotNormalEquation`] when the setup carries compatibility tiers,
/// since the two routes are only comparable for normal systems.
pub fn compare_routes(
    setup: &KTSetup,
    bounds: &TruncationSpec,
    witness_bound: u32,
) -> Result<CompareReport> {
    if !setup.is_normal() {
        return Err(Error::NotNormalEquation(
            "route comparison requires a system without compatibility tiers".into(),
        ));
    }
    let system = setup.system();
    let basis = cosymmetry_solve(system, bounds)?;

    let mut entries = Vec::with_capacity(basis.len());
    for cosymmetry in basis {
        let residual = adjoint_pairing_residual(system, cosymmetry.components())?;
        let pairing_residual_is_zero = residual.iter().all(DiffPoly::is_zero);
        let certificate = factorization_certificate(system, &cosymmetry, witness_bound)?;
        let skew_witness = skew_witness_search(system, cosymmetry.components(), witness_bound)?;
        entries.push(RouteComparison {
            cosymmetry,
            pairing_residual_is_zero,
            certificate,
            skew_witness,
        });
    }

    let bound = witness_bound.max(1);
    let asymmetry = asymmetry_instances(system, bound)?;
    Ok(CompareReport { entries, asymmetry })
}

/// Two canonical shell-vanishing tuples whose minimal skew witnesses have
/// order one: `D_x(F_0)` and `u·D_x(F_0) + ½·u_x·F_0` placed in the first
/// slot.  Both are images of skew operators (`D_x` and `u·D_x + ½u_x`), yet
/// neither admits an order-zero witness on a scalar equation.
fn asymmetry_instances(system: &EquationSystem, bound: u32) -> Result<Vec<AsymmetryInstance>> {
    let ctx = system.context().clone();
    let m = system.n_equations();
    let u = DiffPoly::from_symbol(&ctx, JetSymbol::dependent(0, MultiIndex::empty()));
    let u_x = DiffPoly::from_symbol(&ctx, JetSymbol::dependent(0, MultiIndex::single(0)));

    let mut d_x = CDiffOp::zero(&ctx, m, m);
    d_x.add_term(0, 0, MultiIndex::single(0), DiffPoly::one(&ctx));

    let mut order_one = CDiffOp::zero(&ctx, m, m);
    order_one.add_term(0, 0, MultiIndex::single(0), u);
    order_one.add_term(0, 0, MultiIndex::empty(), u_x.scaled(&crate::expr::coeff_frac(1, 2)));

    let residuals = system.residuals();
    let mut instances = Vec::with_capacity(2);
    for generator in [d_x, order_one] {
        let components = generator.apply(&residuals)?;
        let mut vanishes = true;
        for component in &components {
            if !system.reduce(component)?.is_zero() {
                vanishes = false;
            }
        }
        let witness_at_zero = skew_witness_search(system, &components, 0)?;
        let witness_at_bound = skew_witness_search(system, &components, bound)?;
        instances.push(AsymmetryInstance {
            components,
            vanishes_on_shell: vanishes,
            witness_at_zero,
            witness_at_bound,
            bound,
        });
    }
    Ok(instances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::TierSpec;
    use crate::expr::coeff_frac;
    use crate::linalg::RankProbe;

    fn scalar_context() -> Arc<JetContext> {
        JetContext::with_tiers(
            vec!["x".into(), "t".into()],
            vec!["u".into()],
            vec![TierSpec { rank: 1 }],
        )
    }

    fn u(ctx: &Arc<JetContext>, pairs: &[(usize, u32)]) -> DiffPoly {
        DiffPoly::from_symbol(ctx, JetSymbol::dependent(0, MultiIndex::from_pairs(pairs.to_vec())))
    }

    fn base(ctx: &Arc<JetContext>, var: usize) -> DiffPoly {
        DiffPoly::from_symbol(ctx, JetSymbol::Independent(var))
    }

    fn kdv_system() -> EquationSystem {
        let ctx = scalar_context();
        let rhs = &(&u(&ctx, &[]) * &u(&ctx, &[(0, 1)])) + &u(&ctx, &[(0, 3)]);
        EquationSystem::new(vec![(JetSymbol::dependent(0, MultiIndex::single(1)), rhs)]).unwrap()
    }

    fn heat_system() -> EquationSystem {
        let ctx = scalar_context();
        let rhs = u(&ctx, &[(0, 2)]);
        EquationSystem::new(vec![(JetSymbol::dependent(0, MultiIndex::single(1)), rhs)]).unwrap()
    }

    fn burgers_system() -> EquationSystem {
        let ctx = scalar_context();
        let rhs = &(&u(&ctx, &[]) * &u(&ctx, &[(0, 1)])) + &u(&ctx, &[(0, 2)]);
        EquationSystem::new(vec![(JetSymbol::dependent(0, MultiIndex::single(1)), rhs)]).unwrap()
    }

    fn bounds(jet: u32, degree: u32, base: u32) -> TruncationSpec {
        TruncationSpec {
            antighost_max: 0,
            jet_order_max: jet,
            poly_degree_max: degree,
            base_degree_max: base,
        }
    }

    /// Absorb each solved cosymmetry into a rank probe and then check the
    /// expected tuples lie in their span.
    fn assert_spans(basis: &[Cosymmetry], expected: &[DiffPoly]) {
        let mut registry: BTreeMap<Monomial, usize> = BTreeMap::new();
        let mut coords = |poly: &DiffPoly| -> Vec<(usize, Coeff)> {
            poly.terms()
                .map(|(mono, c)| {
                    let next = registry.len();
                    (*registry.entry(mono.clone()).or_insert(next), c.clone())
                })
                .collect()
        };
        let rows: Vec<Vec<(usize, Coeff)>> = basis
            .iter()
            .map(|psi| coords(&psi.components()[0]))
            .collect();
        let expected_rows: Vec<Vec<(usize, Coeff)>> = expected.iter().map(&mut coords).collect();
        let mut probe = RankProbe::new();
        for row in &rows {
            probe.try_absorb(row);
        }
        let rank = probe.rank();
        for (row, poly) in expected_rows.iter().zip(expected) {
            assert!(
                !probe.try_absorb(row),
                "{} is not in the solved span",
                poly.render()
            );
        }
        assert_eq!(probe.rank(), rank);
    }

    #[test]
    fn heat_cosymmetries_span_backward_polynomials() {
        let system = heat_system();
        let ctx = system.context().clone();
        let basis = cosymmetry_solve(&system, &bounds(0, 0, 2)).unwrap();
        assert_eq!(basis.len(), 3);
        let x = base(&ctx, 0);
        let t = base(&ctx, 1);
        let quadratic = &(&x * &x) - &t.scaled(&coeff_int(2));
        assert_spans(&basis, &[DiffPoly::one(&ctx), x, quadratic]);
        for psi in &basis {
            assert_eq!(psi.provenance(), Provenance::Solver);
        }
    }

    #[test]
    fn kdv_cosymmetries_recover_classical_basis() {
        let system = kdv_system();
        let ctx = system.context().clone();
        let basis = cosymmetry_solve(&system, &bounds(2, 2, 0)).unwrap();
        assert_eq!(basis.len(), 3);
        let hamiltonian = &u(&ctx, &[(0, 2)]) + &(&u(&ctx, &[]) * &u(&ctx, &[])).scaled(&coeff_frac(1, 2));
        assert_spans(&basis, &[DiffPoly::one(&ctx), u(&ctx, &[]), hamiltonian]);
    }

    #[test]
    fn burgers_cosymmetries_within_bounds_are_constants() {
        let system = burgers_system();
        let ctx = system.context().clone();
        let basis = cosymmetry_solve(&system, &bounds(2, 2, 0)).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(basis[0].components(), &[DiffPoly::one(&ctx)]);
    }

    #[test]
    fn cosymmetry_validation_rejects_non_solutions() {
        let system = kdv_system();
        let ctx = system.context().clone();
        let err =
            Cosymmetry::new(&system, vec![u(&ctx, &[(0, 1)])], Provenance::User).unwrap_err();
        assert!(matches!(err, Error::NotCosymmetry(_)), "{err}");
        // The classical characteristics pass the same validation.
        let hamiltonian = &u(&ctx, &[(0, 2)]) + &(&u(&ctx, &[]) * &u(&ctx, &[])).scaled(&coeff_frac(1, 2));
        assert!(Cosymmetry::new(&system, vec![hamiltonian], Provenance::User).is_ok());
    }

    #[test]
    fn pairing_residual_vanishes_exactly_on_skew_images() {
        let system = kdv_system();
        let ctx = system.context().clone();
        let residual_of = |psi: DiffPoly| {
            adjoint_pairing_residual(&system, &[psi]).unwrap()[0].clone()
        };
        assert!(residual_of(u(&ctx, &[])).is_zero());
        // ψ = D_x(F) is a skew image, so the residual vanishes identically.
        let f = system.residuals()[0].clone();
        assert!(residual_of(total_derivative(&f, 0)).is_zero());
        // ψ = u_x is neither a cosymmetry nor a skew image.
        assert!(!residual_of(u(&ctx, &[(0, 1)])).is_zero());
    }

    #[test]
    fn skew_witness_found_for_derivative_image() {
        let system = kdv_system();
        let f = system.residuals()[0].clone();
        let psi = vec![total_derivative(&f, 0)];
        match skew_witness_search(&system, &psi, 1).unwrap() {
            SkewWitnessVerdict::Member(witness) => {
                assert!(witness.checked_add(&witness.adjoint()).unwrap().is_zero());
                assert_eq!(witness.apply(&system.residuals()).unwrap(), psi);
            }
            other => panic!("expected a witness, got {other:?}"),
        }
    }

    #[test]
    fn skew_witness_needs_positive_order() {
        let system = kdv_system();
        let ctx = system.context().clone();
        let f = system.residuals()[0].clone();
        let psi = vec![
            (&(&u(&ctx, &[]) * &total_derivative(&f, 0))
                + &(&u(&ctx, &[(0, 1)]) * &f).scaled(&coeff_frac(1, 2)))
                .clone(),
        ];
        // Order zero: the only skew multiplication operator is zero.
        match skew_witness_search(&system, &psi, 0).unwrap() {
            SkewWitnessVerdict::NotFoundUpToBound {
                bound,
                nonmember_certain,
            } => {
                assert_eq!(bound, 0);
                assert!(!nonmember_certain, "the tuple vanishes on shell");
            }
            other => panic!("expected a bounded failure, got {other:?}"),
        }
        // Order one: u·D_x + ½u_x is skew and maps F onto the tuple.
        match skew_witness_search(&system, &psi, 1).unwrap() {
            SkewWitnessVerdict::Member(witness) => {
                assert!(witness.checked_add(&witness.adjoint()).unwrap().is_zero());
                assert_eq!(witness.apply(&system.residuals()).unwrap(), psi);
            }
            other => panic!("expected a witness, got {other:?}"),
        }
    }

    #[test]
    fn skew_witness_rejects_nonmembers_with_certainty() {
        let system = kdv_system();
        let ctx = system.context().clone();
        match skew_witness_search(&system, &[DiffPoly::one(&ctx)], 2).unwrap() {
            SkewWitnessVerdict::NotFoundUpToBound {
                nonmember_certain, ..
            } => assert!(nonmember_certain),
            other => panic!("expected certain rejection, got {other:?}"),
        }
    }

    #[test]
    fn skew_witness_for_zero_is_zero() {
        let system = kdv_system();
        let ctx = system.context().clone();
        match skew_witness_search(&system, &[DiffPoly::zero(&ctx)], 0).unwrap() {
            SkewWitnessVerdict::Member(witness) => assert!(witness.is_zero()),
            other => panic!("expected the zero witness, got {other:?}"),
        }
    }

    #[test]
    fn certificates_for_the_kdv_basis() {
        let system = kdv_system();
        let ctx = system.context().clone();
        let residuals = system.residuals();
        let adjoint = linearize(&residuals).unwrap().adjoint();
        let candidates = vec![
            DiffPoly::one(&ctx),
            u(&ctx, &[]),
            &u(&ctx, &[(0, 2)]) + &(&u(&ctx, &[]) * &u(&ctx, &[])).scaled(&coeff_frac(1, 2)),
        ];
        for component in candidates {
            let psi = Cosymmetry::new(&system, vec![component], Provenance::User).unwrap();
            match factorization_certificate(&system, &psi, 1).unwrap() {
                CertificateVerdict::Certified { nabla, delta } => {
                    assert!(nabla.is_zero());
                    // Δ(F) = ℓ_F*(ψ) holds identically.
                    assert_eq!(
                        delta.apply(&residuals).unwrap(),
                        adjoint.apply(psi.components()).unwrap()
                    );
                    // For this hierarchy the factor is self-adjoint.
                    assert_eq!(delta, delta.adjoint());
                }
                other => panic!("expected a certificate, got {other:?}"),
            }
        }
    }

    #[test]
    fn certificate_rejects_foreign_characteristics() {
        // x is a cosymmetry of the heat equation but its adjoint image under
        // the Burgers linearization is not even in the Burgers ideal.
        let heat = heat_system();
        let ctx = heat.context().clone();
        let psi = Cosymmetry::new(&heat, vec![base(&ctx, 0)], Provenance::User).unwrap();
        let err = factorization_certificate(&burgers_system(), &psi, 1).unwrap_err();
        assert!(matches!(err, Error::CertificateRejected(_)), "{err}");
    }

    #[test]
    fn divergence_check_recognizes_the_classical_currents() {
        let system = kdv_system();
        let ctx = system.context().clone();
        let f = system.residuals()[0].clone();
        // (J^x, J^t) = (−(u²/2 + u_xx), u): divergence is exactly F.
        let density_flux = -&(&(&u(&ctx, &[]) * &u(&ctx, &[])).scaled(&coeff_frac(1, 2))
            + &u(&ctx, &[(0, 2)]));
        let omega = HorizontalForm::from_current(&[density_flux, u(&ctx, &[])]).unwrap();
        let (conserved, witness) = current_divergence_check(&system, &omega).unwrap();
        assert!(conserved);
        assert_eq!(
            witness.apply(&[f]).unwrap()[0],
            omega.horizontal_d().density().unwrap()
        );

        // (u_x, 0) is not conserved: its divergence reduces to u_xx ≠ 0.
        let bad = HorizontalForm::from_current(&[u(&ctx, &[(0, 1)]), DiffPoly::zero(&ctx)])
            .unwrap();
        let (conserved, _) = current_divergence_check(&system, &bad).unwrap();
        assert!(!conserved);
    }

    #[test]
    fn currents_map_to_their_characteristics() {
        let system = kdv_system();
        let ctx = system.context().clone();
        // Mass: divergence F, characteristic 1.
        let mass_flux = -&(&(&u(&ctx, &[]) * &u(&ctx, &[])).scaled(&coeff_frac(1, 2))
            + &u(&ctx, &[(0, 2)]));
        let mass = HorizontalForm::from_current(&[mass_flux, u(&ctx, &[])]).unwrap();
        let psi = current_to_cosymmetry(&system, &mass).unwrap();
        assert_eq!(psi.components(), &[DiffPoly::one(&ctx)]);

        // Momentum: divergence 2u·F, characteristic 2u.
        let u0 = u(&ctx, &[]);
        let momentum_flux = -&(&(&(&u0 * &u0) * &u0).scaled(&coeff_frac(2, 3))
            .checked_add(&(&u0 * &u(&ctx, &[(0, 2)])).scaled(&coeff_int(2)))
            .unwrap()
            - &(&u(&ctx, &[(0, 1)]) * &u(&ctx, &[(0, 1)])));
        let momentum =
            HorizontalForm::from_current(&[momentum_flux, &u0 * &u0]).unwrap();
        let psi = current_to_cosymmetry(&system, &momentum).unwrap();
        assert_eq!(psi.components(), &[u0.scaled(&coeff_int(2))]);

        // d̄ of a 0-form in two variables is a 1-form, i.e. a current, and
        // an exact one is conserved with zero characteristic.
        let mut eta = HorizontalForm::zero(&ctx, 0);
        eta.add_component(vec![], &u0 * &u(&ctx, &[(0, 1)]));
        let psi = current_to_cosymmetry(&system, &eta.horizontal_d()).unwrap();
        assert!(psi.components().iter().all(DiffPoly::is_zero));

        // Non-conserved currents are rejected.
        let bad = HorizontalForm::from_current(&[u(&ctx, &[(0, 1)]), DiffPoly::zero(&ctx)])
            .unwrap();
        let err = current_to_cosymmetry(&system, &bad).unwrap_err();
        assert!(matches!(err, Error::NotConserved(_)), "{err}");
    }

    #[test]
    fn characteristics_round_trip_through_currents() {
        let system = kdv_system();
        let ctx = system.context().clone();
        for component in [DiffPoly::one(&ctx), u(&ctx, &[])] {
            let psi = Cosymmetry::new(&system, vec![component], Provenance::User).unwrap();
            let current = current_from_cosymmetry(&system, &psi)
                .unwrap()
                .expect("splitter handles the classical pairings");
            // The witness identity div ω = Λ(F) holds identically.
            let divergence = current.form().horizontal_d().density().unwrap();
            let via_witness = current.witness().apply(&system.residuals()).unwrap();
            assert_eq!(divergence, via_witness[0]);
            // And the current maps back to the cosymmetry it came from.
            let back = current_to_cosymmetry(&system, current.form()).unwrap();
            assert_eq!(back.components(), psi.components());
        }
    }

    #[test]
    fn route_comparison_on_the_kdv_basis() {
        let system = kdv_system();
        let setup = KTSetup::new(system, vec![]).unwrap();
        let report = compare_routes(&setup, &bounds(2, 2, 0), 1).unwrap();

        assert_eq!(report.entries.len(), 3);
        for entry in &report.entries {
            assert!(entry.pairing_residual_is_zero);
            assert!(entry.certificate.is_certified());
            // Nontrivial characteristics have nonzero normal form, so the
            // skew search rejects them with certainty.
            match &entry.skew_witness {
                SkewWitnessVerdict::NotFoundUpToBound {
                    nonmember_certain, ..
                } => assert!(nonmember_certain),
                other => panic!("expected certain rejection, got {other:?}"),
            }
        }

        assert_eq!(report.asymmetry.len(), 2);
        for instance in &report.asymmetry {
            assert!(instance.vanishes_on_shell);
            assert!(!instance.witness_at_zero.is_member());
            assert!(instance.witness_at_bound.is_member());
            assert_eq!(instance.bound, 1);
        }
    }

    #[test]
    fn route_comparison_requires_a_normal_system() {
        let ctx = JetContext::with_tiers(
            vec!["x".into(), "y".into()],
            vec!["u".into()],
            vec![TierSpec { rank: 2 }, TierSpec { rank: 1 }],
        );
        let system = EquationSystem::new(vec![
            (JetSymbol::dependent(0, MultiIndex::single(0)), DiffPoly::zero(&ctx)),
            (JetSymbol::dependent(0, MultiIndex::single(1)), DiffPoly::zero(&ctx)),
        ])
        .unwrap();
        let mut d1 = CDiffOp::zero(&ctx, 1, 2);
        d1.add_term(0, 0, MultiIndex::single(1), DiffPoly::one(&ctx));
        d1.add_term(0, 1, MultiIndex::single(0), -&DiffPoly::one(&ctx));
        let setup = KTSetup::new(system, vec![d1]).unwrap();
        let err = compare_routes(&setup, &bounds(1, 1, 0), 1).unwrap_err();
        assert!(matches!(err, Error::NotNormalEquation(_)), "{err}");
    }
}
