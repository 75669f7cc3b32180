//! Exact sparse linear algebra over the rationals.
//!
//! Rows are stored as sorted sparse integer vectors with denominators
//! cleared, content divided out, and a positive leading entry.  Forward
//! elimination is fraction-free (cross-multiplication followed by content
//! reduction), which keeps intermediate entries reduced without rational
//! arithmetic in the inner loop.  Pivoting is deterministic: lowest column
//! with a nonzero entry; among candidate rows the one with fewest nonzeros,
//! ties broken by lowest row index.  Every caller therefore sees canonical
//! kernels, reduced row-echelon forms, and solutions.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::expr::Coeff;

/// Sparse rational vector: sorted `(column, value)` pairs with nonzero values.
pub type QVec = Vec<(usize, Coeff)>;

type Row = Vec<(usize, BigInt)>;

/// Clear denominators and divide out integer content; normalize the sign of
/// the leading entry to positive.  Returns the row together with the
/// (nonzero) factor `λ` such that the row equals `λ` times the input.
fn to_int_row(entries: &[(usize, Coeff)]) -> (Row, Coeff) {
    let mut lcm = BigInt::one();
    for (_, v) in entries {
        if !v.is_zero() {
            lcm = lcm.lcm(v.denom());
        }
    }
    let mut row: Row = entries
        .iter()
        .filter(|(_, v)| !v.is_zero())
        .map(|(c, v)| (*c, v.numer() * (&lcm / v.denom())))
        .collect();
    row.sort_by_key(|&(c, _)| c);
    let (content, flipped) = reduce_content(&mut row);
    let mut scale = Coeff::new(lcm, content);
    if flipped {
        scale = -scale;
    }
    (row, scale)
}

/// Divide out the integer content and make the leading entry positive.
/// Returns the content divided out and whether the sign was flipped.
fn reduce_content(row: &mut Row) -> (BigInt, bool) {
    row.retain(|(_, v)| !v.is_zero());
    if row.is_empty() {
        return (BigInt::one(), false);
    }
    let mut g = BigInt::zero();
    for (_, v) in row.iter() {
        g = g.gcd(v);
    }
    let negative = row[0].1.is_negative();
    for (_, v) in row.iter_mut() {
        *v = &*v / &g;
        if negative {
            *v = -&*v;
        }
    }
    (g, negative)
}

/// `a_scale·a − b_scale·b`, merged over sorted columns.
fn combine(a: &Row, a_scale: &BigInt, b: &Row, b_scale: &BigInt) -> Row {
    let mut out = Row::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(ca, ref va)), Some(&(cb, ref vb))) if ca == cb => {
                let v = va * a_scale - vb * b_scale;
                if !v.is_zero() {
                    out.push((ca, v));
                }
                i += 1;
                j += 1;
            }
            (Some(&(ca, ref va)), Some(&(cb, _))) if ca < cb => {
                out.push((ca, va * a_scale));
                i += 1;
            }
            (Some(_), Some(&(cb, ref vb))) => {
                out.push((cb, -(vb * b_scale)));
                j += 1;
            }
            (Some(&(ca, ref va)), None) => {
                out.push((ca, va * a_scale));
                i += 1;
            }
            (None, Some(&(cb, ref vb))) => {
                out.push((cb, -(vb * b_scale)));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

fn entry_at(row: &Row, col: usize) -> Option<&BigInt> {
    row.binary_search_by_key(&col, |&(c, _)| c)
        .ok()
        .map(|i| &row[i].1)
}

/// Row echelon form: pivot rows paired with their (strictly increasing)
/// pivot columns.
fn echelon(mut rows: Vec<Row>) -> Vec<(usize, Row)> {
    rows.retain(|r| !r.is_empty());
    let mut pivots: Vec<(usize, Row)> = Vec::new();
    while !rows.is_empty() {
        let min_col = rows.iter().map(|r| r[0].0).min().unwrap();
        let mut best = usize::MAX;
        for (i, r) in rows.iter().enumerate() {
            if r[0].0 == min_col && (best == usize::MAX || r.len() < rows[best].len()) {
                best = i;
            }
        }
        let pivot = rows.remove(best);
        let pv = pivot[0].1.clone();
        for r in rows.iter_mut() {
            if r[0].0 == min_col {
                let rv = r[0].1.clone();
                *r = combine(r, &pv, &pivot, &rv);
                reduce_content(r);
            }
        }
        rows.retain(|r| !r.is_empty());
        pivots.push((min_col, pivot));
    }
    pivots
}

type QRow = Vec<(usize, Coeff)>;

fn to_rational(row: &Row) -> QRow {
    row.iter()
        .map(|(c, v)| (*c, Coeff::from_integer(v.clone())))
        .collect()
}

fn q_entry(row: &QRow, col: usize) -> Coeff {
    row.binary_search_by_key(&col, |&(c, _)| c)
        .ok()
        .map(|i| row[i].1.clone())
        .unwrap_or_else(Coeff::zero)
}

fn q_axpy(target: &mut QRow, scale: &Coeff, source: &QRow) {
    if scale.is_zero() {
        return;
    }
    let mut out = QRow::with_capacity(target.len() + source.len());
    let (mut i, mut j) = (0, 0);
    while i < target.len() || j < source.len() {
        match (target.get(i), source.get(j)) {
            (Some(&(ca, ref va)), Some(&(cb, ref vb))) if ca == cb => {
                let v = va + &(scale * vb);
                if !v.is_zero() {
                    out.push((ca, v));
                }
                i += 1;
                j += 1;
            }
            (Some(&(ca, ref va)), Some(&(cb, _))) if ca < cb => {
                out.push((ca, va.clone()));
                i += 1;
            }
            (Some(_), Some(&(cb, ref vb))) => {
                out.push((cb, scale * vb));
                j += 1;
            }
            (Some(&(ca, ref va)), None) => {
                out.push((ca, va.clone()));
                i += 1;
            }
            (None, Some(&(cb, ref vb))) => {
                out.push((cb, scale * vb));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    *target = out;
}

/// Reduced row echelon form with unit pivots, from an echelon factorization.
fn rref(pivots: Vec<(usize, Row)>) -> Vec<(usize, QRow)> {
    let mut rows: Vec<(usize, QRow)> = pivots
        .into_iter()
        .map(|(c, r)| {
            let mut q = to_rational(&r);
            let inv = q_entry(&q, c);
            for (_, v) in q.iter_mut() {
                *v = &*v / &inv;
            }
            (c, q)
        })
        .collect();
    for i in (0..rows.len()).rev() {
        let (col, lower) = rows[i].clone();
        for (_, upper) in rows.iter_mut().take(i) {
            let coeff = -q_entry(upper, col);
            q_axpy(upper, &coeff, &lower);
        }
    }
    rows
}

/// A sparse homogeneous system `A·x = 0` assembled row by row.
///
/// Rows are stored normalized (integer, content-free, positive leading
/// entry) together with the factor relating each stored row to the row as
/// added, so `solve` can scale external right-hand sides consistently.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    ncols: usize,
    rows: Vec<Row>,
    scales: Vec<Coeff>,
}

impl LinearSystem {
    pub fn new(ncols: usize) -> LinearSystem {
        LinearSystem {
            ncols,
            rows: Vec::new(),
            scales: Vec::new(),
        }
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Add one equation `Σ entries[c]·x_c = 0`.
    ///
    /// Zero rows are kept so that `solve` sees one right-hand-side entry per
    /// added row; elimination skips them.
    pub fn add_row(&mut self, entries: &[(usize, Coeff)]) {
        debug_assert!(entries.iter().all(|&(c, _)| c < self.ncols));
        let (row, scale) = to_int_row(entries);
        self.rows.push(row);
        self.scales.push(scale);
    }

    pub fn rank(&self) -> usize {
        echelon(self.rows.clone()).len()
    }

    /// Canonical kernel basis: one vector per free column (ascending), each
    /// with entry 1 at its free column and zeros at the other free columns.
    pub fn kernel_basis(&self) -> Vec<Vec<Coeff>> {
        let rref_rows = rref(echelon(self.rows.clone()));
        let pivot_cols: Vec<usize> = rref_rows.iter().map(|&(c, _)| c).collect();
        let mut basis = Vec::new();
        for free in 0..self.ncols {
            if pivot_cols.contains(&free) {
                continue;
            }
            let mut v = vec![Coeff::zero(); self.ncols];
            v[free] = Coeff::one();
            for (pcol, row) in &rref_rows {
                let a = q_entry(row, free);
                if !a.is_zero() {
                    v[*pcol] = -a;
                }
            }
            basis.push(v);
        }
        basis
    }

    /// One solution of `A·x = b` with zero free variables, or `None` when
    /// inconsistent.
    pub fn solve(&self, rhs: &[Coeff]) -> Option<Vec<Coeff>> {
        assert_eq!(rhs.len(), self.rows.len(), "one rhs entry per row");
        let aug_col = self.ncols;
        let mut rows: Vec<Row> = Vec::with_capacity(self.rows.len());
        for ((row, scale), b) in self.rows.iter().zip(&self.scales).zip(rhs) {
            let mut entries: Vec<(usize, Coeff)> = to_rational(row);
            let b = scale * b;
            if !b.is_zero() {
                entries.push((aug_col, -b));
            }
            rows.push(to_int_row(&entries).0);
        }
        let pivots = echelon(rows);
        if pivots.iter().any(|&(c, _)| c == aug_col) {
            return None;
        }
        let rref_rows = rref(pivots);
        let mut x = vec![Coeff::zero(); self.ncols];
        for (pcol, row) in &rref_rows {
            x[*pcol] = -q_entry(row, aug_col);
        }
        Some(x)
    }

    /// Reduced row echelon form of the row span, dense, pivots equal to 1.
    pub fn rref_dense(&self) -> Vec<Vec<Coeff>> {
        rref(echelon(self.rows.clone()))
            .into_iter()
            .map(|(_, row)| {
                let mut v = vec![Coeff::zero(); self.ncols];
                for (c, val) in row {
                    v[c] = val;
                }
                v
            })
            .collect()
    }
}

/// Incremental independence tester: absorb vectors one at a time, learning
/// whether each enlarges the span so far.
#[derive(Debug, Clone, Default)]
pub struct RankProbe {
    pivots: Vec<(usize, Row)>,
}

impl RankProbe {
    pub fn new() -> RankProbe {
        RankProbe::default()
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Reduce `v` against the span absorbed so far; if a nonzero remainder
    /// survives, keep it and report `true`.
    pub fn try_absorb(&mut self, entries: &[(usize, Coeff)]) -> bool {
        let row = self.remainder(entries);
        if row.is_empty() {
            false
        } else {
            let col = row[0].0;
            let pos = self
                .pivots
                .binary_search_by_key(&col, |&(c, _)| c)
                .unwrap_err();
            self.pivots.insert(pos, (col, row));
            true
        }
    }

    /// Whether `v` already lies in the span absorbed so far, without
    /// enlarging it.
    pub fn in_span(&self, entries: &[(usize, Coeff)]) -> bool {
        self.remainder(entries).is_empty()
    }

    fn remainder(&self, entries: &[(usize, Coeff)]) -> Row {
        let mut row = to_int_row(entries).0;
        for (col, pivot) in &self.pivots {
            if row.is_empty() {
                break;
            }
            if let Some(rv) = entry_at(&row, *col) {
                let rv = rv.clone();
                let pv = entry_at(pivot, *col).expect("pivot entry").clone();
                row = combine(&row, &pv, pivot, &rv);
                reduce_content(&mut row);
            }
        }
        row
    }
}
