//! Exact sparse linear algebra over the rationals.
//!
//! Everything integer-valued in the library (ranks, Betti numbers, kernels,
//! span membership, snake-lemma lifts) goes through [`Echelon`], an
//! incremental column-echelon basis that remembers how each of its vectors
//! was combined from the inserted items.

use std::collections::HashMap;

use num_traits::{One, Zero};

use crate::error::{FeecError, Result};
use crate::rational::{to_f64, Q};

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseVec {
    entries: Vec<(usize, Q)>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn unit(index: usize) -> Self {
        SparseVec { entries: vec![(index, Q::one())] }
    }

    /// Builds from unsorted entries, summing duplicates and dropping zeros.
    pub fn from_entries(mut entries: Vec<(usize, Q)>) -> Self {
        entries.sort_by_key(|(i, _)| *i);
        let mut out: Vec<(usize, Q)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match out.last_mut() {
                Some((j, w)) if *j == i => *w += v,
                _ => out.push((i, v)),
            }
        }
        out.retain(|(_, v)| !v.is_zero());
        SparseVec { entries: out }
    }

    pub fn from_dense(values: &[Q]) -> Self {
        SparseVec {
            entries: values.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(i, v)| (i, v.clone())).collect(),
        }
    }

    pub fn to_dense(&self, len: usize) -> Vec<Q> {
        let mut out = vec![Q::zero(); len];
        for (i, v) in &self.entries {
            out[*i] = v.clone();
        }
        out
    }

    pub fn to_dense_f64(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (i, v) in &self.entries {
            out[*i] = to_f64(v);
        }
        out
    }

    pub fn entries(&self) -> &[(usize, Q)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn leading(&self) -> Option<(usize, &Q)> {
        self.entries.first().map(|(i, v)| (*i, v))
    }

    pub fn get(&self, index: usize) -> Q {
        match self.entries.binary_search_by_key(&index, |(i, _)| *i) {
            Ok(pos) => self.entries[pos].1.clone(),
            Err(_) => Q::zero(),
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|(i, _)| *i)
    }

    pub fn scale(&self, factor: &Q) -> SparseVec {
        if factor.is_zero() {
            return SparseVec::new();
        }
        SparseVec { entries: self.entries.iter().map(|(i, v)| (*i, v * factor)).collect() }
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: &Q, other: &SparseVec) {
        if factor.is_zero() || other.is_zero() {
            return;
        }
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let mut a = std::mem::take(&mut self.entries).into_iter().peekable();
        let mut b = other.entries.iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (Some((i, _)), Some((j, _))) if i < j => out.push(a.next().unwrap()),
                (Some((i, _)), Some((j, _))) if i > j => {
                    let (j, w) = b.next().unwrap();
                    out.push((*j, w * factor));
                }
                (Some(_), Some(_)) => {
                    let (i, v) = a.next().unwrap();
                    let (_, w) = b.next().unwrap();
                    let s = v + w * factor;
                    if !s.is_zero() {
                        out.push((i, s));
                    }
                }
                (Some(_), None) => out.push(a.next().unwrap()),
                (None, Some(_)) => {
                    let (j, w) = b.next().unwrap();
                    out.push((*j, w * factor));
                }
                (None, None) => break,
            }
        }
        self.entries = out;
    }

    pub fn add(&self, other: &SparseVec) -> SparseVec {
        let mut out = self.clone();
        out.axpy(&Q::one(), other);
        out
    }

    pub fn sub(&self, other: &SparseVec) -> SparseVec {
        let mut out = self.clone();
        out.axpy(&-Q::one(), other);
        out
    }

    pub fn dot(&self, other: &SparseVec) -> Q {
        let mut acc = Q::zero();
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        while let (Some((i, v)), Some((j, w))) = (a.peek(), b.peek()) {
            if i < j {
                a.next();
            } else if i > j {
                b.next();
            } else {
                acc += v * w;
                a.next();
                b.next();
            }
        }
        acc
    }

    /// Keeps entries whose index passes `keep`, renumbering through `map`.
    pub fn remap(&self, map: impl Fn(usize) -> Option<usize>) -> SparseVec {
        SparseVec::from_entries(self.entries.iter().filter_map(|(i, v)| map(*i).map(|j| (j, v.clone()))).collect())
    }
}

/// Column-major sparse rational matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMatrix {
    rows: usize,
    cols: Vec<SparseVec>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols: vec![SparseVec::new(); cols] }
    }

    pub fn from_columns(rows: usize, cols: Vec<SparseVec>) -> Self {
        debug_assert!(cols.iter().all(|c| c.max_index().is_none_or(|m| m < rows)));
        SparseMatrix { rows, cols }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix { rows: n, cols: (0..n).map(SparseVec::unit).collect() }
    }

    pub fn from_dense(rows: usize, cols: usize, entry: impl Fn(usize, usize) -> Q) -> Self {
        SparseMatrix {
            rows,
            cols: (0..cols).map(|c| SparseVec::from_entries((0..rows).map(|r| (r, entry(r, c))).collect())).collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, c: usize) -> &SparseVec {
        &self.cols[c]
    }

    pub fn columns(&self) -> &[SparseVec] {
        &self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Q {
        self.cols[c].get(r)
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(SparseVec::is_zero)
    }

    pub fn mul_vec(&self, x: &SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        for (c, v) in x.entries() {
            out.axpy(v, &self.cols[*c]);
        }
        out
    }

    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.ncols() != other.nrows() {
            return Err(FeecError::Shape(format!(
                "{}x{} times {}x{}",
                self.rows,
                self.ncols(),
                other.rows,
                other.ncols()
            )));
        }
        Ok(SparseMatrix { rows: self.rows, cols: other.cols.iter().map(|c| self.mul_vec(c)).collect() })
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut buckets: Vec<Vec<(usize, Q)>> = vec![Vec::new(); self.rows];
        for (c, col) in self.cols.iter().enumerate() {
            for (r, v) in col.entries() {
                buckets[*r].push((c, v.clone()));
            }
        }
        SparseMatrix { rows: self.cols.len(), cols: buckets.into_iter().map(|e| SparseVec { entries: e }).collect() }
    }

    pub fn sub(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.rows != other.rows || self.ncols() != other.ncols() {
            return Err(FeecError::Shape("subtraction of differently shaped matrices".into()));
        }
        Ok(SparseMatrix { rows: self.rows, cols: self.cols.iter().zip(&other.cols).map(|(a, b)| a.sub(b)).collect() })
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.ncols() != other.ncols() {
            return Err(FeecError::Shape("vstack column mismatch".into()));
        }
        let off = self.rows;
        Ok(SparseMatrix {
            rows: self.rows + other.rows,
            cols: self
                .cols
                .iter()
                .zip(&other.cols)
                .map(|(a, b)| {
                    let mut e = a.entries.clone();
                    e.extend(b.entries().iter().map(|(i, v)| (i + off, v.clone())));
                    SparseVec { entries: e }
                })
                .collect(),
        })
    }

    /// Places `self` and `other` side by side.
    pub fn hstack(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.rows != other.rows {
            return Err(FeecError::Shape("hstack row mismatch".into()));
        }
        let mut cols = self.cols.clone();
        cols.extend(other.cols.iter().cloned());
        Ok(SparseMatrix { rows: self.rows, cols })
    }

    pub fn scale(&self, factor: &Q) -> SparseMatrix {
        SparseMatrix { rows: self.rows, cols: self.cols.iter().map(|c| c.scale(factor)).collect() }
    }

    pub fn select_columns(&self, which: &[usize]) -> SparseMatrix {
        SparseMatrix { rows: self.rows, cols: which.iter().map(|&c| self.cols[c].clone()).collect() }
    }

    pub fn rank(&self) -> usize {
        let mut ech = Echelon::new(self.rows);
        for c in &self.cols {
            ech.insert(c.clone());
        }
        ech.rank()
    }

    /// Kernel basis: one vector per column that reduces to zero, in column order.
    pub fn kernel(&self) -> Vec<SparseVec> {
        let mut ech = Echelon::new(self.rows);
        for c in &self.cols {
            ech.insert(c.clone());
        }
        ech.kernel().to_vec()
    }

    /// Indices of columns forming a basis of the column space (first-come pivots).
    pub fn pivot_columns(&self) -> Vec<usize> {
        let mut ech = Echelon::new(self.rows);
        for c in &self.cols {
            ech.insert(c.clone());
        }
        ech.basis_items().to_vec()
    }

    pub fn to_dense_f64(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols.len());
        for (c, col) in self.cols.iter().enumerate() {
            for (r, v) in col.entries() {
                m[(*r, c)] = to_f64(v);
            }
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<Q>> {
        let mut m = vec![vec![Q::zero(); self.cols.len()]; self.rows];
        for (c, col) in self.cols.iter().enumerate() {
            for (r, v) in col.entries() {
                m[*r][c] = v.clone();
            }
        }
        m
    }
}

/// Result of reducing a vector against an [`Echelon`] basis.
#[derive(Clone, Debug)]
pub struct Reduction {
    /// What is left after eliminating every pivot it touches; zero iff the vector is in the span.
    pub remainder: SparseVec,
    /// Coefficients over the inserted items such that `v = Σ coeff_i item_i + remainder`.
    pub coefficients: SparseVec,
}

/// Incremental echelon basis over the rationals with combination tracking.
///
/// Each stored vector has a distinct leading (smallest) index, normalized to 1.
/// Every inserted item is numbered in insertion order, and each stored vector
/// records the combination of inserted items it equals.
#[derive(Clone, Debug)]
pub struct Echelon {
    dim: usize,
    vectors: Vec<SparseVec>,
    combos: Vec<SparseVec>,
    pivot_of: HashMap<usize, usize>,
    basis_items: Vec<usize>,
    kernel: Vec<SparseVec>,
    items: usize,
}

impl Echelon {
    pub fn new(dim: usize) -> Self {
        Echelon {
            dim,
            vectors: Vec::new(),
            combos: Vec::new(),
            pivot_of: HashMap::new(),
            basis_items: Vec::new(),
            kernel: Vec::new(),
            items: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn item_count(&self) -> usize {
        self.items
    }

    /// Items that became basis vectors, in insertion order.
    pub fn basis_items(&self) -> &[usize] {
        &self.basis_items
    }

    /// Combinations of inserted items that vanish, one per dependent item.
    pub fn kernel(&self) -> &[SparseVec] {
        &self.kernel
    }

    pub fn reduce(&self, v: &SparseVec) -> Reduction {
        let mut rem = v.clone();
        let mut coeffs = SparseVec::new();
        let mut skipped: Vec<(usize, Q)> = Vec::new();
        // Entries with no pivot are parked so elimination continues past them.
        while let Some((lead, val)) = rem.leading() {
            let val = val.clone();
            match self.pivot_of.get(&lead) {
                Some(&b) => {
                    rem.axpy(&-val.clone(), &self.vectors[b]);
                    coeffs.axpy(&val, &self.combos[b]);
                }
                None => {
                    skipped.push((lead, val));
                    rem.entries.remove(0);
                }
            }
        }
        Reduction { remainder: SparseVec::from_entries(skipped), coefficients: coeffs }
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce(v).remainder.is_zero()
    }

    /// Inserts the next item. Returns `true` if it enlarged the span.
    pub fn insert(&mut self, v: SparseVec) -> bool {
        let item = self.items;
        self.items += 1;
        let red = self.reduce(&v);
        if red.remainder.is_zero() {
            let mut k = SparseVec::unit(item);
            k.axpy(&-Q::one(), &red.coefficients);
            self.kernel.push(k);
            return false;
        }
        let (lead, lv) = red.remainder.leading().map(|(i, v)| (i, v.clone())).unwrap();
        let inv = lv.recip();
        let mut combo = SparseVec::unit(item);
        combo.axpy(&-Q::one(), &red.coefficients);
        self.pivot_of.insert(lead, self.vectors.len());
        self.vectors.push(red.remainder.scale(&inv));
        self.combos.push(combo.scale(&inv));
        self.basis_items.push(item);
        true
    }

    /// Solves `Σ x_i item_i = v`, or `None` when `v` is outside the span.
    pub fn solve(&self, v: &SparseVec) -> Option<SparseVec> {
        let red = self.reduce(v);
        red.remainder.is_zero().then_some(red.coefficients)
    }
}
