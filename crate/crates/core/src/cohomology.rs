//! Exact cohomology of cochain complexes over the rationals: Betti numbers,
//! relative and high-order complexes, and Mayer–Vietoris long exact sequences.

use std::collections::BTreeMap;

use num_traits::One;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{FeecError, Result};
use crate::exact::{Echelon, SparseMatrix, SparseVec};
use crate::polyform::PolyForm;
use crate::rational::{qi, Q};
use crate::report;
use crate::simplicial::{boundary_complex, Simplex, SimplicialComplex};
use crate::whitney::{highorder_span, Membership};

/// A finite cochain complex `C^0 → C^1 → ⋯ → C^N` with exact differentials.
#[derive(Clone, Debug, PartialEq)]
pub struct CochainComplexView {
    dims: Vec<usize>,
    differentials: Vec<SparseMatrix>,
    labels: Vec<Vec<String>>,
}

impl CochainComplexView {
    /// Validates shapes and `d^{k+1} d^k = 0`.
    pub fn new(dims: Vec<usize>, differentials: Vec<SparseMatrix>, labels: Vec<Vec<String>>) -> Result<Self> {
        if dims.is_empty() || differentials.len() + 1 != dims.len() {
            return Err(FeecError::Shape(format!(
                "{} spaces need {} differentials",
                dims.len(),
                dims.len().max(1) - 1
            )));
        }
        if labels.len() != dims.len() || labels.iter().zip(&dims).any(|(l, d)| l.len() != *d) {
            return Err(FeecError::Shape("one label per basis element".into()));
        }
        for (k, d) in differentials.iter().enumerate() {
            if d.ncols() != dims[k] || d.nrows() != dims[k + 1] {
                return Err(FeecError::Shape(format!(
                    "d^{k} is {}x{}, expected {}x{}",
                    d.nrows(),
                    d.ncols(),
                    dims[k + 1],
                    dims[k]
                )));
            }
        }
        let bad = differentials.par_windows(2).enumerate().find_map_first(|(k, w)| match w[1].matmul(&w[0]) {
            Ok(p) if p.is_zero() => None,
            _ => Some(k + 1),
        });
        if let Some(degree) = bad {
            return Err(FeecError::NotAComplex { degree });
        }
        Ok(CochainComplexView { dims, differentials, labels })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Highest degree `N`.
    pub fn top(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn labels(&self, k: usize) -> &[String] {
        &self.labels[k]
    }

    /// `d^k`, with a zero map out of the top degree.
    pub fn differential(&self, k: usize) -> SparseMatrix {
        match self.differentials.get(k) {
            Some(d) => d.clone(),
            None => SparseMatrix::zeros(0, self.dims.get(k).copied().unwrap_or(0)),
        }
    }

    pub fn differentials(&self) -> &[SparseMatrix] {
        &self.differentials
    }

    /// Representatives of `H^k` and a solver for classes.
    pub fn cohomology(&self, k: usize) -> CohomologyBasis {
        let dim = self.dims[k];
        let mut echelon = Echelon::new(dim);
        if k > 0 {
            for c in self.differentials[k - 1].columns() {
                echelon.insert(c.clone());
            }
        }
        let cocycles: Vec<SparseVec> = match self.differentials.get(k) {
            Some(d) => d.kernel(),
            None => (0..dim).map(SparseVec::unit).collect(),
        };
        let mut representatives = Vec::new();
        let mut items = Vec::new();
        for z in cocycles {
            let item = echelon.item_count();
            if echelon.insert(z.clone()) {
                representatives.push(z);
                items.push(item);
            }
        }
        CohomologyBasis { degree: k, representatives, items, echelon }
    }
}

/// Cocycles spanning `H^k` modulo coboundaries.
#[derive(Clone, Debug)]
pub struct CohomologyBasis {
    pub degree: usize,
    pub representatives: Vec<SparseVec>,
    items: Vec<usize>,
    echelon: Echelon,
}

impl CohomologyBasis {
    pub fn dim(&self) -> usize {
        self.representatives.len()
    }

    /// Coordinates of the class of a cocycle, or `None` if it is not a cocycle.
    pub fn class_of(&self, z: &SparseVec) -> Option<SparseVec> {
        let x = self.echelon.solve(z)?;
        Some(SparseVec::from_entries(self.items.iter().enumerate().map(|(j, &i)| (j, x.get(i))).collect()))
    }
}

/// Per-degree maps `f^k: A^k → B^k` commuting with the differentials.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMorphism {
    maps: Vec<SparseMatrix>,
}

impl ComplexMorphism {
    pub fn new(source: &CochainComplexView, target: &CochainComplexView, maps: Vec<SparseMatrix>) -> Result<Self> {
        if maps.len() != source.dims.len() || source.dims.len() != target.dims.len() {
            return Err(FeecError::Shape("morphism needs one map per degree of equal-length complexes".into()));
        }
        for (k, f) in maps.iter().enumerate() {
            if f.ncols() != source.dims[k] || f.nrows() != target.dims[k] {
                return Err(FeecError::Shape(format!("f^{k} has the wrong shape")));
            }
            if k < source.top() {
                let left = maps[k + 1].matmul(&source.differentials[k])?;
                let right = target.differentials[k].matmul(f)?;
                if left != right {
                    return Err(FeecError::Shape(format!("f does not commute with d in degree {k}")));
                }
            }
        }
        Ok(ComplexMorphism { maps })
    }

    pub fn map(&self, k: usize) -> &SparseMatrix {
        &self.maps[k]
    }

    /// The induced map `H^k(A) → H^k(B)` on representative coordinates.
    pub fn on_cohomology(&self, k: usize, source: &CohomologyBasis, target: &CohomologyBasis) -> SparseMatrix {
        let cols = source
            .representatives
            .iter()
            .map(|r| target.class_of(&self.maps[k].mul_vec(r)).expect("morphisms map cocycles to cocycles"))
            .collect();
        SparseMatrix::from_columns(target.dim(), cols)
    }
}

/// Exact ranks of the differentials, `rank d^k` for `k < N`.
pub fn differential_ranks(c: &CochainComplexView) -> Vec<usize> {
    c.differentials.par_iter().map(|d| d.rank()).collect()
}

/// `b_k = dim C^k − rank d^k − rank d^{k−1}` from precomputed ranks.
pub fn betti_from_ranks(c: &CochainComplexView, ranks: &[usize]) -> Vec<usize> {
    (0..c.dims.len())
        .map(|k| {
            let out = ranks.get(k).copied().unwrap_or(0);
            let incoming = if k > 0 { ranks[k - 1] } else { 0 };
            c.dims[k] - out - incoming
        })
        .collect()
}

/// `b_k = dim ker d^k − rank d^{k−1}`.
pub fn betti(c: &CochainComplexView) -> Vec<usize> {
    betti_from_ranks(c, &differential_ranks(c))
}

/// `(Σ (−1)^k dim C^k, Σ (−1)^k b_k)`.
pub fn euler_poincare(c: &CochainComplexView) -> (i64, i64) {
    let alt = |xs: &[usize]| xs.iter().enumerate().map(|(k, &x)| if k % 2 == 0 { x as i64 } else { -(x as i64) }).sum();
    (alt(&c.dims), alt(&betti(c)))
}

/// Cochain complex of `k` padded with zero spaces up to degree `top`.
fn simplicial_complex_view(k: &SimplicialComplex, top: usize) -> CochainComplexView {
    let dims: Vec<usize> = (0..=top).map(|d| k.count(d)).collect();
    let differentials = (0..top).map(|d| k.coboundary(d)).collect();
    let labels = (0..=top).map(|d| k.simplices(d).iter().map(Simplex::key).collect()).collect();
    CochainComplexView::new(dims, differentials, labels).expect("coboundaries form a complex")
}

/// The Whitney complex `Λ^0 → ⋯ → Λ^N` in the simplex bases.
pub fn whitney_complex(k: &SimplicialComplex) -> CochainComplexView {
    simplicial_complex_view(k, k.dim())
}

/// The complex `X^0_n → ⋯ → X^N_n` in echelon bases of the spanning sets.
pub fn highorder_complex(k: &SimplicialComplex, n: usize) -> Result<CochainComplexView> {
    let spaces = (0..=k.dim()).into_par_iter().map(|d| highorder_span(k, d, n)).collect::<Result<Vec<_>>>()?;
    let differentials = (0..k.dim())
        .into_par_iter()
        .map(|d| {
            let (src, dst) = (&spaces[d], &spaces[d + 1]);
            let position: BTreeMap<usize, usize> = dst.basis().iter().enumerate().map(|(j, &i)| (i, j)).collect();
            let cols = src
                .basis()
                .iter()
                .map(|&g| {
                    let image = src.combine(&SparseVec::unit(g))?.into_iter().map(|(s, p)| (s, p.d())).collect();
                    match dst.membership_top(&image)? {
                        Membership::Member(x) => Ok(x.remap(|i| position.get(&i).copied())),
                        Membership::NotInSpan => Err(FeecError::SpanNotDStable { degree: d }),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SparseMatrix::from_columns(dst.dim(), cols))
        })
        .collect::<Result<Vec<_>>>()?;
    let dims = spaces.iter().map(|s| s.dim()).collect();
    let labels = spaces.iter().map(|s| s.basis().iter().map(|&i| s.generators[i].label()).collect()).collect();
    CochainComplexView::new(dims, differentials, labels)
}

/// Cochains of `k` vanishing on the subcomplex `l`.
pub fn relative_complex(k: &SimplicialComplex, l: &SimplicialComplex) -> Result<CochainComplexView> {
    if let Some(s) = l.iter().find(|s| !k.contains(s)) {
        return Err(FeecError::NotSubcomplex(format!("{s} is not in the ambient complex")));
    }
    let keep: Vec<Vec<usize>> =
        (0..=k.dim()).map(|d| (0..k.count(d)).filter(|&i| !l.contains(&k.simplices(d)[i])).collect()).collect();
    let dims = keep.iter().map(Vec::len).collect();
    let differentials = (0..k.dim())
        .map(|d| {
            let rows: BTreeMap<usize, usize> = keep[d + 1].iter().enumerate().map(|(j, &i)| (i, j)).collect();
            let full = k.coboundary(d);
            let cols = keep[d].iter().map(|&c| full.column(c).remap(|r| rows.get(&r).copied())).collect();
            SparseMatrix::from_columns(keep[d + 1].len(), cols)
        })
        .collect();
    let labels = keep.iter().enumerate().map(|(d, ix)| ix.iter().map(|&i| k.simplices(d)[i].key()).collect()).collect();
    CochainComplexView::new(dims, differentials, labels)
}

/// A primitive `v` of the closed form `u` on one simplex, `v = A u` with `dv = u`.
pub fn simplex_exactness_witness(u: &PolyForm, base: usize) -> Result<PolyForm> {
    if u.degree() == 0 {
        return Err(FeecError::DegreeOutOfRange { degree: 0, min: 1, max: u.host().dim() });
    }
    if !u.d().is_zero() {
        return Err(FeecError::NotClosed);
    }
    u.koszul(base)
}

/// Short-sequence checks in one degree of `0 → A → B → C → 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeExactness {
    pub degree: usize,
    pub dim_a: usize,
    pub dim_b: usize,
    pub dim_c: usize,
    pub rank_f: usize,
    pub rank_g: usize,
    pub composition_zero: bool,
}

impl DegreeExactness {
    pub fn injective(&self) -> bool {
        self.rank_f == self.dim_a
    }

    pub fn surjective(&self) -> bool {
        self.rank_g == self.dim_c
    }

    pub fn middle_exact(&self) -> bool {
        self.composition_zero && self.rank_f + self.rank_g == self.dim_b
    }

    pub fn ok(&self) -> bool {
        self.injective() && self.surjective() && self.middle_exact()
    }
}

/// One node of the long exact sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeExactness {
    pub label: String,
    pub dim: usize,
    pub rank_in: usize,
    pub rank_out: usize,
    pub composition_zero: bool,
}

impl NodeExactness {
    pub fn ok(&self) -> bool {
        self.composition_zero && self.rank_in + self.rank_out == self.dim
    }
}

/// Everything verified for one gluing `K = K' ∪ T`.
#[derive(Clone, Debug)]
pub struct MayerVietorisReport {
    pub cell: Simplex,
    pub degrees: Vec<DegreeExactness>,
    pub nodes: Vec<NodeExactness>,
    pub betti_a: Vec<usize>,
    pub betti_b: Vec<usize>,
    pub betti_c: Vec<usize>,
    /// Connecting maps `δ^k: H^k(C) → H^{k+1}(A)`; `None` when a lift failed.
    pub connecting: Vec<Option<SparseMatrix>>,
    f: Vec<SparseMatrix>,
    g: Vec<SparseMatrix>,
}

impl MayerVietorisReport {
    pub fn ok(&self) -> bool {
        self.degrees.iter().all(DegreeExactness::ok)
            && self.nodes.iter().all(NodeExactness::ok)
            && self.connecting.iter().all(Option::is_some)
    }

    pub fn to_json(&self) -> Value {
        let degrees: Vec<Value> = self
            .degrees
            .iter()
            .map(|e| {
                let mut v = json!({
                    "degree": e.degree,
                    "ok": e.ok() && self.connecting[e.degree].is_some(),
                    "ranks": {
                        "dim_a": e.dim_a, "dim_b": e.dim_b, "dim_c": e.dim_c,
                        "rank_f": e.rank_f, "rank_g": e.rank_g,
                        "composition_zero": e.composition_zero,
                    },
                });
                if !v["ok"].as_bool().unwrap_or(false) {
                    v["matrices"] =
                        json!({"f": report::matrix(&self.f[e.degree]), "g": report::matrix(&self.g[e.degree])});
                }
                v
            })
            .collect();
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .map(|n| json!({"node": n.label, "dim": n.dim, "rank_in": n.rank_in, "rank_out": n.rank_out, "ok": n.ok()}))
            .collect();
        json!({
            "cell": self.cell.key(),
            "ok": self.ok(),
            "betti": {"a": self.betti_a, "b": self.betti_b, "c": self.betti_c},
            "exactness": degrees,
            "long_sequence": nodes,
        })
    }
}

/// Block-diagonal sum of two complexes of equal length.
fn direct_sum(a: &CochainComplexView, b: &CochainComplexView) -> CochainComplexView {
    let dims = a.dims.iter().zip(&b.dims).map(|(x, y)| x + y).collect();
    let differentials = a
        .differentials
        .iter()
        .zip(&b.differentials)
        .map(|(da, db)| {
            let shift = da.nrows();
            let cols = da.columns().iter().cloned().chain(db.columns().iter().map(|c| c.remap(|r| Some(r + shift))));
            SparseMatrix::from_columns(da.nrows() + db.nrows(), cols.collect())
        })
        .collect();
    let labels = a
        .labels
        .iter()
        .zip(&b.labels)
        .map(|(x, y)| x.iter().cloned().chain(y.iter().map(|s| format!("{s}'"))).collect())
        .collect();
    CochainComplexView::new(dims, differentials, labels).expect("sum of complexes")
}

fn rank(m: &SparseMatrix) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        0
    } else {
        m.rank()
    }
}

fn solve_columns(m: &SparseMatrix, rhs: &SparseVec) -> Option<SparseVec> {
    let mut e = Echelon::new(m.nrows());
    for c in m.columns() {
        e.insert(c.clone());
    }
    e.solve(rhs)
}

/// Exactness of `0 → Λ(K) → Λ(K') ⊕ Λ(T) → Λ(∂T) → 0` and of its long sequence in cohomology.
pub fn mayer_vietoris_check(k_prime: &SimplicialComplex, t: &Simplex) -> Result<MayerVietorisReport> {
    if k_prime.contains(t) {
        return Err(FeecError::InvalidParameter(format!("{t} is already in the complex")));
    }
    let boundary = boundary_complex(t);
    if !boundary.is_subcomplex_of(k_prime) {
        return Err(FeecError::NotSubcomplex(format!("boundary of {t} is not contained in the complex")));
    }
    let k = if k_prime.is_empty() { SimplicialComplex::closure_of(t) } else { k_prime.with_cell(t) };
    let closure = SimplicialComplex::closure_of(t);
    let top = k.dim();
    let a = simplicial_complex_view(&k, top);
    let (a1, a2) = (simplicial_complex_view(k_prime, top), simplicial_complex_view(&closure, top));
    let b = direct_sum(&a1, &a2);
    let c = simplicial_complex_view(&boundary, top);

    let f: Vec<SparseMatrix> = (0..=top)
        .map(|d| {
            let n1 = k_prime.count(d);
            let mut cols: Vec<Vec<(usize, Q)>> = vec![Vec::new(); k.count(d)];
            for (r, s) in k_prime.simplices(d).iter().enumerate() {
                cols[k.index_of(s).expect("subcomplex")].push((r, Q::one()));
            }
            for (r, s) in closure.simplices(d).iter().enumerate() {
                cols[k.index_of(s).expect("subcomplex")].push((n1 + r, Q::one()));
            }
            SparseMatrix::from_columns(b.dims[d], cols.into_iter().map(SparseVec::from_entries).collect())
        })
        .collect();
    let g: Vec<SparseMatrix> = (0..=top)
        .map(|d| {
            let n1 = k_prime.count(d);
            let mut cols: Vec<Vec<(usize, Q)>> = vec![Vec::new(); b.dims[d]];
            for (r, s) in boundary.simplices(d).iter().enumerate() {
                cols[k_prime.index_of(s).expect("boundary in K'")].push((r, Q::one()));
                cols[n1 + closure.index_of(s).expect("face of T")].push((r, qi(-1)));
            }
            SparseMatrix::from_columns(c.dims[d], cols.into_iter().map(SparseVec::from_entries).collect())
        })
        .collect();
    let fm = ComplexMorphism::new(&a, &b, f.clone())?;
    let gm = ComplexMorphism::new(&b, &c, g.clone())?;

    let degrees = (0..=top)
        .map(|d| -> Result<DegreeExactness> {
            Ok(DegreeExactness {
                degree: d,
                dim_a: a.dims[d],
                dim_b: b.dims[d],
                dim_c: c.dims[d],
                rank_f: rank(&f[d]),
                rank_g: rank(&g[d]),
                composition_zero: g[d].matmul(&f[d])?.is_zero(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ha: Vec<CohomologyBasis> = (0..=top).map(|d| a.cohomology(d)).collect();
    let hb: Vec<CohomologyBasis> = (0..=top).map(|d| b.cohomology(d)).collect();
    let hc: Vec<CohomologyBasis> = (0..=top).map(|d| c.cohomology(d)).collect();

    let connecting: Vec<Option<SparseMatrix>> = (0..=top)
        .map(|d| {
            if d == top {
                return Some(SparseMatrix::zeros(0, hc[d].dim()));
            }
            let cols = hc[d]
                .representatives
                .iter()
                .map(|z| {
                    let lift = solve_columns(&g[d], z)?;
                    let db = b.differentials[d].mul_vec(&lift);
                    let pre = solve_columns(&f[d + 1], &db)?;
                    ha[d + 1].class_of(&pre)
                })
                .collect::<Option<Vec<_>>>()?;
            Some(SparseMatrix::from_columns(ha[d + 1].dim(), cols))
        })
        .collect();

    // the long sequence H^0(A) → H^0(B) → H^0(C) → H^1(A) → ⋯ → H^N(C) → 0
    let mut nodes_dims = Vec::new();
    let mut maps: Vec<Option<SparseMatrix>> = Vec::new();
    for d in 0..=top {
        nodes_dims.push((format!("H^{d}(A)"), ha[d].dim()));
        maps.push(Some(fm.on_cohomology(d, &ha[d], &hb[d])));
        nodes_dims.push((format!("H^{d}(B)"), hb[d].dim()));
        maps.push(Some(gm.on_cohomology(d, &hb[d], &hc[d])));
        nodes_dims.push((format!("H^{d}(C)"), hc[d].dim()));
        maps.push(connecting[d].clone());
    }
    let nodes = nodes_dims
        .into_iter()
        .enumerate()
        .map(|(i, (label, dim))| -> Result<NodeExactness> {
            let incoming = if i == 0 { Some(SparseMatrix::zeros(dim, 0)) } else { maps[i - 1].clone() };
            let outgoing = maps[i].clone();
            let (rank_in, rank_out, composition_zero) = match (&incoming, &outgoing) {
                (Some(m_in), Some(m_out)) => (rank(m_in), rank(m_out), m_out.matmul(m_in)?.is_zero()),
                _ => (0, 0, false),
            };
            Ok(NodeExactness { label, dim, rank_in, rank_out, composition_zero })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MayerVietorisReport {
        cell: t.clone(),
        degrees,
        nodes,
        betti_a: betti(&a),
        betti_b: betti(&b),
        betti_c: betti(&c),
        connecting,
        f,
        g,
    })
}

/// Mayer–Vietoris checks for every step of assembling `k` cell by cell:
/// vertices first, then edges, then higher simplices, each level in lexicographic order.
pub fn mayer_vietoris_filtration(k: &SimplicialComplex) -> Result<Vec<MayerVietorisReport>> {
    let cells: Vec<Simplex> = k.iter().cloned().collect();
    let mut partial = SimplicialComplex::empty();
    let mut reports = Vec::with_capacity(cells.len());
    for t in cells {
        reports.push(mayer_vietoris_check(&partial, &t)?);
        partial = if partial.is_empty() { SimplicialComplex::closure_of(&t) } else { partial.with_cell(&t) };
    }
    Ok(reports)
}

/// `{"betti": […], "euler": χ}` for a complex.
pub fn betti_json(c: &CochainComplexView) -> Value {
    let (chi, _) = euler_poincare(c);
    json!({"betti": betti(c), "euler": chi})
}
