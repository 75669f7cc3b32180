//! Horizontal differential forms and the horizontal differential.
//!
//! A degree-q horizontal form is `Σ_I f_I dx_I` with strictly increasing
//! index lists `I` and differential-polynomial coefficients.  The horizontal
//! differential inserts `dx_i` on the *left*:
//! `d̄(f dx_I) = Σ_i D_i(f)·dx_i ∧ dx_I`, and `dx_i ∧ dx_I` sorts into
//! canonical order with the sign `(−1)^{#{j ∈ I : j < i}}`.
//!
//! Conserved currents are encoded in the interior-product basis of
//! codimension-one forms: `ϖ_i = (−1)^{i−1}·dx_1∧…∧d̂x_i∧…∧dx_n` (1-based
//! omission), so that `d̄(Σ_i J_i ϖ_i) = (Σ_i D_i J_i)·vol`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::context::{require_same_context, JetContext};
use crate::error::{Error, Result};
use crate::expr::{coeff_int, DiffPoly};
use crate::jetcalc::total_derivative;

/// A horizontal form: coefficients indexed by strictly increasing lists of
/// base-coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HorizontalForm {
    ctx: Arc<JetContext>,
    degree: usize,
    components: BTreeMap<Vec<usize>, DiffPoly>,
}

impl HorizontalForm {
    pub fn zero(ctx: &Arc<JetContext>, degree: usize) -> HorizontalForm {
        assert!(degree <= ctx.n_independent(), "form degree exceeds base dimension");
        HorizontalForm {
            ctx: Arc::clone(ctx),
            degree,
            components: BTreeMap::new(),
        }
    }

    /// A density `f·vol` (top-degree form).
    pub fn from_density(f: DiffPoly) -> HorizontalForm {
        let ctx = Arc::clone(f.context());
        let n = ctx.n_independent();
        let mut form = HorizontalForm::zero(&ctx, n);
        form.add_component((0..n).collect(), f);
        form
    }

    /// The codimension-one form `Σ_i J_i ϖ_i` of a current.
    pub fn from_current(current: &[DiffPoly]) -> Result<HorizontalForm> {
        let ctx = current
            .first()
            .map(DiffPoly::context)
            .cloned()
            .ok_or_else(|| Error::SignatureMismatch("empty current".into()))?;
        let n = ctx.n_independent();
        if current.len() != n {
            return Err(Error::SignatureMismatch(format!(
                "current with {} components over a base of dimension {n}",
                current.len()
            )));
        }
        let mut form = HorizontalForm::zero(&ctx, n - 1);
        for (i, j_i) in current.iter().enumerate() {
            require_same_context(&ctx, j_i.context())?;
            let index: Vec<usize> = (0..n).filter(|&k| k != i).collect();
            let sign = if i % 2 == 0 { 1 } else { -1 };
            form.add_component(index, j_i.scaled(&coeff_int(sign)));
        }
        Ok(form)
    }

    /// Recover current components from a codimension-one form: `J_i` is the
    /// ϖ_i-coordinate, i.e. `(−1)^{i−1}` times the coefficient of the form
    /// omitting `dx_i`.
    pub fn current_components(&self) -> Result<Vec<DiffPoly>> {
        let n = self.ctx.n_independent();
        if self.degree + 1 != n {
            return Err(Error::SignatureMismatch(format!(
                "degree-{} form is not a current over a base of dimension {n}",
                self.degree
            )));
        }
        let mut current = Vec::with_capacity(n);
        for i in 0..n {
            let index: Vec<usize> = (0..n).filter(|&k| k != i).collect();
            let coeff = self.component(&index);
            let sign = if i % 2 == 0 { 1 } else { -1 };
            current.push(coeff.scaled(&coeff_int(sign)));
        }
        Ok(current)
    }

    /// The single coefficient of a top-degree form.
    pub fn density(&self) -> Result<DiffPoly> {
        let n = self.ctx.n_independent();
        if self.degree != n {
            return Err(Error::SignatureMismatch(format!(
                "degree-{} form is not a density over a base of dimension {n}",
                self.degree
            )));
        }
        Ok(self.component(&(0..n).collect::<Vec<_>>()))
    }

    pub fn context(&self) -> &Arc<JetContext> {
        &self.ctx
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, index: &[usize]) -> DiffPoly {
        self.components
            .get(index)
            .cloned()
            .unwrap_or_else(|| DiffPoly::zero(&self.ctx))
    }

    pub fn components(&self) -> impl Iterator<Item = (&Vec<usize>, &DiffPoly)> {
        self.components.iter()
    }

    /// Add `f·dx_index` where `index` is already strictly increasing.
    pub fn add_component(&mut self, index: Vec<usize>, f: DiffPoly) {
        assert_eq!(index.len(), self.degree, "component index of wrong length");
        assert!(
            index.windows(2).all(|w| w[0] < w[1]),
            "component index must be strictly increasing"
        );
        assert!(
            index.iter().all(|&i| i < self.ctx.n_independent()),
            "component index out of range"
        );
        if f.is_zero() {
            return;
        }
        match self.components.entry(index) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(f);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().checked_add(&f).expect("same context");
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn checked_add(&self, other: &HorizontalForm) -> Result<HorizontalForm> {
        require_same_context(&self.ctx, &other.ctx)?;
        if self.degree != other.degree {
            return Err(Error::SignatureMismatch(format!(
                "adding a degree-{} form to a degree-{} form",
                self.degree, other.degree
            )));
        }
        let mut out = self.clone();
        for (index, f) in &other.components {
            out.add_component(index.clone(), f.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> HorizontalForm {
        let mut out = HorizontalForm::zero(&self.ctx, self.degree);
        for (index, f) in &self.components {
            out.add_component(index.clone(), -f);
        }
        out
    }

    /// The horizontal differential `d̄`.
    pub fn horizontal_d(&self) -> HorizontalForm {
        let n = self.ctx.n_independent();
        let mut out = HorizontalForm::zero(&self.ctx, (self.degree + 1).min(n));
        if self.degree == n {
            return out;
        }
        for (index, f) in &self.components {
            for i in 0..n {
                if index.contains(&i) {
                    continue;
                }
                let df = total_derivative(f, i);
                if df.is_zero() {
                    continue;
                }
                let before = index.iter().filter(|&&j| j < i).count();
                let sign = if before % 2 == 0 { 1 } else { -1 };
                let mut new_index = index.clone();
                new_index.push(i);
                new_index.sort_unstable();
                out.add_component(new_index, df.scaled(&coeff_int(sign)));
            }
        }
        out
    }

    /// The divergence `Σ_i D_i(J_i)` of a current, as a density coefficient.
    pub fn current_divergence(current: &[DiffPoly]) -> Result<DiffPoly> {
        let form = HorizontalForm::from_current(current)?;
        form.horizontal_d().density()
    }
}
