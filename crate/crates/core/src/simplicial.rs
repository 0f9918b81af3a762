//! Finite simplicial complexes, incidence numbers, coboundary matrices,
//! affine realizations, barycentric subdivision and built-in test geometries.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};

use crate::error::{FeecError, Result};
use crate::exact::{SparseMatrix, SparseVec};
use crate::rational::{qi, round_decimal, to_f64, Q};

/// A simplex given by its strictly increasing vertex ids.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex(Vec<usize>);

impl Simplex {
    /// Sorts the vertices; rejects empty and repeated vertex lists.
    pub fn new(mut vertices: Vec<usize>) -> Result<Self> {
        let original = vertices.clone();
        vertices.sort_unstable();
        if vertices.is_empty() || vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(FeecError::DegenerateCell(original));
        }
        Ok(Simplex(vertices))
    }

    /// Caller guarantees the vertices are strictly increasing and non-empty.
    pub(crate) fn from_sorted(vertices: Vec<usize>) -> Self {
        debug_assert!(!vertices.is_empty() && vertices.windows(2).all(|w| w[0] < w[1]));
        Simplex(vertices)
    }

    pub fn vertex(v: usize) -> Self {
        Simplex(vec![v])
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// Local position of vertex `v`.
    pub fn position(&self, v: usize) -> Option<usize> {
        self.0.binary_search(&v).ok()
    }

    pub fn is_face_of(&self, other: &Simplex) -> bool {
        self.0.iter().all(|v| other.0.binary_search(v).is_ok())
    }

    /// Codimension-one faces, the `l`-th omitting the `l`-th vertex.
    pub fn facets(&self) -> Vec<Simplex> {
        if self.0.len() < 2 {
            return Vec::new();
        }
        (0..self.0.len())
            .map(|l| {
                let mut v = self.0.clone();
                v.remove(l);
                Simplex(v)
            })
            .collect()
    }

    /// All faces of dimension `k`, lexicographically ordered.
    pub fn faces(&self, k: usize) -> Vec<Simplex> {
        let n = self.0.len();
        if k + 1 > n {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut idx: Vec<usize> = (0..=k).collect();
        loop {
            out.push(Simplex(idx.iter().map(|&i| self.0[i]).collect()));
            let Some(i) = (0..=k).rev().find(|&i| idx[i] != n - k - 1 + i) else {
                return out;
            };
            idx[i] += 1;
            for j in i + 1..=k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    pub fn union(&self, other: &Simplex) -> Simplex {
        let set: BTreeSet<usize> = self.0.iter().chain(&other.0).copied().collect();
        Simplex(set.into_iter().collect())
    }

    /// Dash-joined vertex ids, the key used by every file format.
    pub fn key(&self) -> String {
        self.0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("-")
    }

    pub fn parse_key(key: &str) -> Result<Simplex> {
        let vertices = key
            .split('-')
            .map(|p| p.trim().parse::<usize>().map_err(|_| FeecError::Parse(format!("bad simplex key {key:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let s = Simplex::new(vertices)?;
        if s.key() != key.trim() {
            return Err(FeecError::Parse(format!("simplex key {key:?} is not increasing")));
        }
        Ok(s)
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `(-1)^l` when `face` is `host` with its `l`-th vertex removed, else 0.
pub fn incidence_number(host: &Simplex, face: &Simplex) -> i32 {
    if host.0.len() != face.0.len() + 1 {
        return 0;
    }
    let mut skipped = None;
    let mut j = 0;
    for (l, v) in host.0.iter().enumerate() {
        if j < face.0.len() && face.0[j] == *v {
            j += 1;
        } else if skipped.is_none() {
            skipped = Some(l);
        } else {
            return 0;
        }
    }
    match skipped {
        Some(l) if j == face.0.len() => {
            if l % 2 == 0 {
                1
            } else {
                -1
            }
        }
        _ => 0,
    }
}

/// A finite simplicial complex with canonically indexed simplices.
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    simplices: Vec<Vec<Simplex>>,
    index: Vec<HashMap<Simplex, usize>>,
    maximal: Vec<Simplex>,
}

impl PartialEq for SimplicialComplex {
    fn eq(&self, other: &Self) -> bool {
        self.simplices == other.simplices
    }
}

impl Eq for SimplicialComplex {}

impl SimplicialComplex {
    pub fn empty() -> Self {
        SimplicialComplex { simplices: Vec::new(), index: Vec::new(), maximal: Vec::new() }
    }

    /// Every non-empty subset of every cell.
    pub fn build_closure(cells: &[Vec<usize>]) -> Result<Self> {
        if cells.is_empty() {
            return Err(FeecError::EmptyComplex);
        }
        let cells = cells.iter().map(|c| Simplex::new(c.clone())).collect::<Result<Vec<_>>>()?;
        Ok(Self::from_cells(cells))
    }

    pub(crate) fn from_cells(cells: impl IntoIterator<Item = Simplex>) -> Self {
        let mut by_dim: Vec<BTreeSet<Simplex>> = Vec::new();
        for cell in cells {
            let top = cell.dim();
            if by_dim.len() <= top {
                by_dim.resize_with(top + 1, BTreeSet::new);
            }
            if by_dim[top].contains(&cell) {
                continue;
            }
            for k in 0..=top {
                for face in cell.faces(k) {
                    by_dim[k].insert(face);
                }
            }
        }
        let simplices: Vec<Vec<Simplex>> = by_dim.into_iter().map(|s| s.into_iter().collect()).collect();
        Self::from_sorted_levels(simplices)
    }

    fn from_sorted_levels(simplices: Vec<Vec<Simplex>>) -> Self {
        let index: Vec<HashMap<Simplex, usize>> =
            simplices.iter().map(|level| level.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect()).collect();
        let mut has_coface: Vec<Vec<bool>> = simplices.iter().map(|l| vec![false; l.len()]).collect();
        for k in 1..simplices.len() {
            for s in &simplices[k] {
                for f in s.facets() {
                    has_coface[k - 1][index[k - 1][&f]] = true;
                }
            }
        }
        let maximal = simplices
            .iter()
            .zip(&has_coface)
            .flat_map(|(level, flags)| level.iter().zip(flags).filter(|(_, c)| !**c).map(|(s, _)| s.clone()))
            .collect();
        SimplicialComplex { simplices, index, maximal }
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    /// Top dimension; 0 for the empty complex.
    pub fn dim(&self) -> usize {
        self.simplices.len().saturating_sub(1)
    }

    /// Number of populated dimensions (`dim + 1`, or 0 when empty).
    pub fn levels(&self) -> usize {
        self.simplices.len()
    }

    pub fn simplices(&self, k: usize) -> &[Simplex] {
        self.simplices.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices(k).len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.simplices.iter().map(Vec::len).collect()
    }

    pub fn total_count(&self) -> usize {
        self.simplices.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Simplex> {
        self.simplices.iter().flatten()
    }

    pub fn vertex_ids(&self) -> Vec<usize> {
        self.simplices(0).iter().map(|s| s.0[0]).collect()
    }

    pub fn index_of(&self, s: &Simplex) -> Option<usize> {
        self.index.get(s.dim()).and_then(|m| m.get(s).copied())
    }

    pub fn require(&self, s: &Simplex) -> Result<usize> {
        self.index_of(s).ok_or_else(|| FeecError::SimplexNotFound(s.clone()))
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.index_of(s).is_some()
    }

    /// Simplices that are not a face of any other simplex.
    pub fn maximal_simplices(&self) -> &[Simplex] {
        &self.maximal
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.simplices
            .iter()
            .enumerate()
            .map(|(k, l)| if k % 2 == 0 { l.len() as i64 } else { -(l.len() as i64) })
            .sum()
    }

    /// The coboundary `d: C^k -> C^{k+1}` for `0 <= k < dim`.
    pub fn coboundary_matrix(&self, k: usize) -> Result<IncidenceMatrix> {
        if self.dim() == 0 || k >= self.dim() {
            return Err(FeecError::DegreeOutOfRange { degree: k, min: 0, max: self.dim().saturating_sub(1) });
        }
        Ok(IncidenceMatrix { degree: k, matrix: self.coboundary(k) })
    }

    /// Coboundary for any `k`, with empty shapes outside the populated range.
    pub fn coboundary(&self, k: usize) -> SparseMatrix {
        let rows = self.count(k + 1);
        let mut cols: Vec<Vec<(usize, Q)>> = vec![Vec::new(); self.count(k)];
        for (r, s) in self.simplices(k + 1).iter().enumerate() {
            for (l, f) in s.facets().into_iter().enumerate() {
                let c = self.index[k][&f];
                cols[c].push((r, qi(if l % 2 == 0 { 1 } else { -1 })));
            }
        }
        SparseMatrix::from_columns(rows, cols.into_iter().map(SparseVec::from_entries).collect())
    }

    /// Members meeting `t`.
    pub fn star(&self, t: &Simplex) -> Result<Vec<Simplex>> {
        self.require(t)?;
        Ok(self.iter().filter(|s| s.0.iter().any(|v| t.position(*v).is_some())).cloned().collect())
    }

    pub fn is_subcomplex_of(&self, other: &SimplicialComplex) -> bool {
        self.iter().all(|s| other.contains(s))
    }

    /// `self` together with the closure of `cell`.
    pub fn with_cell(&self, cell: &Simplex) -> SimplicialComplex {
        Self::from_cells(self.maximal.iter().cloned().chain(std::iter::once(cell.clone())))
    }

    /// Closure of the codimension-one simplices having exactly one top-dimensional coface.
    pub fn boundary_subcomplex(&self) -> SimplicialComplex {
        if self.dim() == 0 {
            return SimplicialComplex::empty();
        }
        let d = self.dim();
        let mut cofaces = vec![0usize; self.count(d - 1)];
        for s in self.simplices(d) {
            for f in s.facets() {
                cofaces[self.index[d - 1][&f]] += 1;
            }
        }
        let cells: Vec<Simplex> =
            self.simplices(d - 1).iter().zip(&cofaces).filter(|(_, c)| **c == 1).map(|(s, _)| s.clone()).collect();
        if cells.is_empty() {
            SimplicialComplex::empty()
        } else {
            Self::from_cells(cells)
        }
    }

    /// Sub-collection of the simplices contained in `t`, as a complex.
    pub fn closure_of(t: &Simplex) -> SimplicialComplex {
        Self::from_cells([t.clone()])
    }
}

/// The complex of proper faces of `t` (empty for a vertex).
pub fn boundary_complex(t: &Simplex) -> SimplicialComplex {
    let facets = t.facets();
    if facets.is_empty() {
        SimplicialComplex::empty()
    } else {
        SimplicialComplex::from_cells(facets)
    }
}

/// Matrix of `d` on cochains of degree `degree`, rows indexed by `(degree+1)`-simplices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceMatrix {
    pub degree: usize,
    pub matrix: SparseMatrix,
}

impl IncidenceMatrix {
    pub fn entry(&self, row: usize, col: usize) -> i32 {
        let v = self.matrix.get(row, col);
        if v.is_zero() {
            0
        } else if v.is_positive() {
            1
        } else {
            -1
        }
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row_nonzeros(&self) -> Vec<usize> {
        let mut counts = vec![0; self.nrows()];
        for c in self.matrix.columns() {
            for (r, _) in c.entries() {
                counts[*r] += 1;
            }
        }
        counts
    }
}

/// Vertex coordinates in a common Cartesian space, as exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineRealization {
    ambient_dim: usize,
    coords: BTreeMap<usize, Vec<Q>>,
}

impl AffineRealization {
    pub fn new(ambient_dim: usize, coords: BTreeMap<usize, Vec<Q>>) -> Result<Self> {
        if let Some((v, p)) = coords.iter().find(|(_, p)| p.len() != ambient_dim) {
            return Err(FeecError::Shape(format!("vertex {v} has {} coordinates, expected {ambient_dim}", p.len())));
        }
        Ok(AffineRealization { ambient_dim, coords })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn point(&self, v: usize) -> Result<&[Q]> {
        self.coords.get(&v).map(Vec::as_slice).ok_or_else(|| FeecError::SimplexNotFound(Simplex::vertex(v)))
    }

    pub fn point_f64(&self, v: usize) -> Result<Vec<f64>> {
        Ok(self.point(v)?.iter().map(to_f64).collect())
    }

    pub fn coordinates(&self) -> &BTreeMap<usize, Vec<Q>> {
        &self.coords
    }

    /// Edge vectors `x_i - x_0` of `t`.
    pub fn edge_vectors(&self, t: &Simplex) -> Result<Vec<Vec<Q>>> {
        let x0 = self.point(t.0[0])?;
        t.0[1..].iter().map(|&v| Ok(self.point(v)?.iter().zip(x0).map(|(a, b)| a - b).collect())).collect()
    }

    /// Gram matrix of the edge vectors of `t`.
    pub fn gram(&self, t: &Simplex) -> Result<Vec<Vec<Q>>> {
        let e = self.edge_vectors(t)?;
        Ok(e.iter().map(|a| e.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect()).collect())
    }

    /// `k`-volume of the realized simplex.
    pub fn volume(&self, t: &Simplex) -> Result<f64> {
        let g = self.gram(t)?;
        let det = determinant(&g);
        let fact: f64 = (1..=t.dim()).map(|i| i as f64).product();
        Ok(to_f64(&det).max(0.0).sqrt() / fact)
    }

    /// Longest realized edge of the complex.
    pub fn max_edge_length(&self, k: &SimplicialComplex) -> Result<f64> {
        let mut h: f64 = 0.0;
        for e in k.simplices(1) {
            h = h.max(to_f64(&self.gram(e)?[0][0]).sqrt());
        }
        Ok(h)
    }

    /// Every simplex must span an affine subspace of its own dimension.
    pub fn validate(&self, k: &SimplicialComplex) -> Result<()> {
        for v in k.vertex_ids() {
            self.point(v)?;
        }
        for s in k.iter().filter(|s| s.dim() > 0) {
            let e = self.edge_vectors(s)?;
            let m = SparseMatrix::from_dense(self.ambient_dim, e.len(), |r, c| e[c][r].clone());
            let rank = m.rank();
            if rank != s.dim() {
                return Err(FeecError::InvalidRealization { simplex: s.clone(), rank });
            }
        }
        Ok(())
    }
}

/// Determinant of a small dense rational matrix.
pub fn determinant(m: &[Vec<Q>]) -> Q {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m.to_vec();
    let mut det = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else {
            return Q::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        let pivot = a[c][c].clone();
        det *= &pivot;
        for r in c + 1..n {
            if a[r][c].is_zero() {
                continue;
            }
            let f = &a[r][c] / &pivot;
            for j in c..n {
                let t = &f * &a[c][j];
                a[r][j] -= t;
            }
        }
    }
    det
}

/// Inverse of a small dense rational matrix, `None` when singular.
pub fn inverse(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero())?;
        a.swap(p, c);
        let inv = a[c][c].recip();
        for j in 0..2 * n {
            a[c][j] = &a[c][j] * &inv;
        }
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                for j in 0..2 * n {
                    let t = &f * &a[c][j];
                    a[r][j] -= t;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// A complex together with a realization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mesh {
    pub complex: SimplicialComplex,
    pub realization: AffineRealization,
}

impl Mesh {
    pub fn new(complex: SimplicialComplex, realization: AffineRealization) -> Result<Self> {
        realization.validate(&complex)?;
        Ok(Mesh { complex, realization })
    }

    /// Reads `{"vertices": [[x, ...], ...], "cells": [[i, ...], ...]}`.
    ///
    /// Numbers are taken as exact decimals; `"p/q"` strings are also accepted.
    /// Vertex ids that are unused or sparse are renumbered densely in sorted order.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: MeshFile = serde_json::from_str(text).map_err(|e| FeecError::Parse(e.to_string()))?;
        let used: BTreeSet<usize> = raw.cells.iter().flatten().copied().collect();
        for &v in &used {
            if v >= raw.vertices.len() {
                return Err(FeecError::Parse(format!("cell references missing vertex {v}")));
            }
        }
        let renumber: HashMap<usize, usize> = used.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let cells: Vec<Vec<usize>> = raw.cells.iter().map(|c| c.iter().map(|v| renumber[v]).collect()).collect();
        let complex = SimplicialComplex::build_closure(&cells)?;
        let ambient = raw.vertices.first().map(Vec::len).unwrap_or(0);
        let mut coords = BTreeMap::new();
        for &v in &used {
            let p = raw.vertices[v]
                .iter()
                .map(|x| match x {
                    serde_json::Value::Number(n) => crate::rational::parse_rational(&n.to_string()),
                    serde_json::Value::String(s) => crate::rational::parse_rational(s),
                    other => Err(FeecError::Parse(format!("bad coordinate {other}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            coords.insert(renumber[&v], p);
        }
        let realization = AffineRealization::new(ambient, coords).map_err(|e| FeecError::Parse(e.to_string()))?;
        Mesh::new(complex, realization)
    }

    /// Writes the vertices in id order and the maximal simplices as cells.
    pub fn to_json_value(&self) -> serde_json::Value {
        let ids = self.complex.vertex_ids();
        let position: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let vertices: Vec<serde_json::Value> = ids
            .iter()
            .map(|v| {
                serde_json::Value::Array(self.realization.coords[v].iter().map(crate::report::rational_value).collect())
            })
            .collect();
        let cells: Vec<serde_json::Value> = self
            .complex
            .maximal_simplices()
            .iter()
            .map(|s| serde_json::json!(s.vertices().iter().map(|v| position[v]).collect::<Vec<_>>()))
            .collect();
        serde_json::json!({ "vertices": vertices, "cells": cells })
    }

    pub fn subdivide(&self) -> Result<Subdivision> {
        barycentric_subdivision(&self.complex, &self.realization)
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    vertices: Vec<Vec<serde_json::Value>>,
    cells: Vec<Vec<usize>>,
}

/// Result of one barycentric subdivision.
#[derive(Clone, Debug)]
pub struct Subdivision {
    pub mesh: Mesh,
    /// For each fine vertex id, the coarse simplex whose barycenter it is.
    pub parent_faces: Vec<Simplex>,
}

impl Subdivision {
    /// Smallest coarse simplex containing the realized fine simplex.
    pub fn carrier(&self, fine: &Simplex) -> Simplex {
        fine.vertices()
            .iter()
            .map(|&v| &self.parent_faces[v])
            .max_by_key(|s| s.dim())
            .cloned()
            .expect("simplex is non-empty")
    }

    /// Barycentric coordinates of fine vertex `v` with respect to `host`.
    pub fn barycentric(&self, v: usize, host: &Simplex) -> Vec<Q> {
        let g = &self.parent_faces[v];
        let w = Q::new(1.into(), (g.vertices().len() as i64).into());
        host.vertices().iter().map(|u| if g.position(*u).is_some() { w.clone() } else { Q::zero() }).collect()
    }
}

/// Replaces every top simplex by the simplices spanned by barycenters of its face flags.
///
/// Fine vertex ids enumerate coarse simplices by dimension then lexicographic order,
/// so coarse vertices keep their positions when the input ids are dense.
pub fn barycentric_subdivision(k: &SimplicialComplex, r: &AffineRealization) -> Result<Subdivision> {
    r.validate(k)?;
    let mut fine_id: HashMap<Simplex, usize> = HashMap::new();
    let mut parent_faces = Vec::with_capacity(k.total_count());
    let mut coords = BTreeMap::new();
    for s in k.iter() {
        let id = parent_faces.len();
        fine_id.insert(s.clone(), id);
        let w = Q::new(1.into(), (s.vertices().len() as i64).into());
        let mut p = vec![Q::zero(); r.ambient_dim()];
        for &v in s.vertices() {
            for (acc, x) in p.iter_mut().zip(r.point(v)?) {
                *acc += x * &w;
            }
        }
        coords.insert(id, p);
        parent_faces.push(s.clone());
    }
    let mut cells = Vec::new();
    for top in k.maximal_simplices() {
        for perm in permutations(top.vertices()) {
            let mut chain = Vec::with_capacity(perm.len());
            for i in 0..perm.len() {
                let mut face: Vec<usize> = perm[..=i].to_vec();
                face.sort_unstable();
                chain.push(fine_id[&Simplex::from_sorted(face)]);
            }
            chain.sort_unstable();
            cells.push(Simplex::from_sorted(chain));
        }
    }
    let complex = SimplicialComplex::from_cells(cells);
    let realization = AffineRealization::new(r.ambient_dim(), coords)?;
    Ok(Subdivision { mesh: Mesh { complex, realization }, parent_faces })
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let first = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, first);
            out.push(p);
        }
    }
    out
}

/// Built-in test geometries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshKind {
    /// Closure of one `n`-simplex at the origin and the unit vectors.
    Simplex(usize),
    /// Boundary of an `(n+1)`-simplex.
    Sphere(usize),
    /// Regular `N`-gon with unit edges.
    Circle(usize),
    /// Periodic `m x n` grid realized as a product of two unit-edge polygons in 4-space.
    FlatTorus(usize, usize),
    /// Periodic `m x n` grid on a torus of revolution in 3-space (radii 2 and 1).
    RingTorus(usize, usize),
    /// Three triangles sharing the edge `{0,1}`.
    Book,
}

impl FromStr for MeshKind {
    type Err = FeecError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<usize>> {
            params
                .split(',')
                .filter(|p| !p.trim().is_empty())
                .map(|p| {
                    p.trim().parse().map_err(|_| FeecError::InvalidParameter(format!("bad parameter {p:?} in {s:?}")))
                })
                .collect()
        };
        let expect = |n: usize| -> Result<Vec<usize>> {
            let v = nums()?;
            if v.len() != n {
                return Err(FeecError::InvalidParameter(format!("{name} takes {n} parameter(s), got {s:?}")));
            }
            Ok(v)
        };
        match name {
            "simplex" => Ok(MeshKind::Simplex(expect(1)?[0])),
            "sphere" => Ok(MeshKind::Sphere(expect(1)?[0])),
            "circle" => Ok(MeshKind::Circle(expect(1)?[0])),
            "torus" | "flat_torus" => {
                let v = expect(2)?;
                Ok(MeshKind::FlatTorus(v[0], v[1]))
            }
            "ring" | "ring_torus" => {
                let v = expect(2)?;
                Ok(MeshKind::RingTorus(v[0], v[1]))
            }
            "book" => {
                expect(0)?;
                Ok(MeshKind::Book)
            }
            _ => Err(FeecError::InvalidParameter(format!("unknown mesh kind {name:?}"))),
        }
    }
}

impl fmt::Display for MeshKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshKind::Simplex(n) => write!(f, "simplex:{n}"),
            MeshKind::Sphere(n) => write!(f, "sphere:{n}"),
            MeshKind::Circle(n) => write!(f, "circle:{n}"),
            MeshKind::FlatTorus(m, n) => write!(f, "torus:{m},{n}"),
            MeshKind::RingTorus(m, n) => write!(f, "ring:{m},{n}"),
            MeshKind::Book => write!(f, "book"),
        }
    }
}

const DIGITS: u32 = 12;

fn unit_vectors(n: usize) -> BTreeMap<usize, Vec<Q>> {
    let mut coords = BTreeMap::new();
    coords.insert(0, vec![Q::zero(); n]);
    for i in 0..n {
        let mut p = vec![Q::zero(); n];
        p[i] = Q::one();
        coords.insert(i + 1, p);
    }
    coords
}

fn polygon(n: usize) -> Vec<[Q; 2]> {
    let radius = 0.5 / (std::f64::consts::PI / n as f64).sin();
    (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            [round_decimal(radius * a.cos(), DIGITS), round_decimal(radius * a.sin(), DIGITS)]
        })
        .collect()
}

fn torus_cells(m: usize, n: usize) -> Vec<Vec<usize>> {
    let v = |i: usize, j: usize| (i % m) * n + (j % n);
    let mut cells = Vec::with_capacity(2 * m * n);
    for i in 0..m {
        for j in 0..n {
            cells.push(vec![v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
            cells.push(vec![v(i, j), v(i, j + 1), v(i + 1, j + 1)]);
        }
    }
    cells
}

/// Builds one of the built-in geometries.
pub fn generate(kind: MeshKind) -> Result<Mesh> {
    let bad = |msg: &str| Err(FeecError::InvalidParameter(format!("{kind}: {msg}")));
    let (cells, ambient, coords): (Vec<Vec<usize>>, usize, BTreeMap<usize, Vec<Q>>) = match kind {
        MeshKind::Simplex(n) => (vec![(0..=n).collect()], n, unit_vectors(n)),
        MeshKind::Sphere(n) => {
            let top = Simplex::from_sorted((0..=n + 1).collect());
            let cells = top.facets().into_iter().map(|s| s.0).collect();
            (cells, n + 1, unit_vectors(n + 1))
        }
        MeshKind::Circle(n) => {
            if n < 3 {
                return bad("need at least 3 vertices");
            }
            let cells = (0..n).map(|i| vec![i, (i + 1) % n]).collect();
            let coords = polygon(n).into_iter().enumerate().map(|(i, p)| (i, p.to_vec())).collect();
            (cells, 2, coords)
        }
        MeshKind::FlatTorus(m, n) => {
            if m < 3 || n < 3 {
                return bad("need m, n >= 3");
            }
            let (a, b) = (polygon(m), polygon(n));
            let mut coords = BTreeMap::new();
            for i in 0..m {
                for j in 0..n {
                    coords.insert(i * n + j, vec![a[i][0].clone(), a[i][1].clone(), b[j][0].clone(), b[j][1].clone()]);
                }
            }
            (torus_cells(m, n), 4, coords)
        }
        MeshKind::RingTorus(m, n) => {
            if m < 3 || n < 3 {
                return bad("need m, n >= 3");
            }
            let tau = 2.0 * std::f64::consts::PI;
            let mut coords = BTreeMap::new();
            for i in 0..m {
                let phi = tau * i as f64 / m as f64;
                for j in 0..n {
                    let theta = tau * j as f64 / n as f64;
                    let rho = 2.0 + theta.cos();
                    coords.insert(
                        i * n + j,
                        vec![
                            round_decimal(rho * phi.cos(), DIGITS),
                            round_decimal(rho * phi.sin(), DIGITS),
                            round_decimal(theta.sin(), DIGITS),
                        ],
                    );
                }
            }
            (torus_cells(m, n), 3, coords)
        }
        MeshKind::Book => {
            let pts: [[i64; 3]; 5] = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, -1, 1]];
            let coords = pts.iter().enumerate().map(|(i, p)| (i, p.iter().map(|&x| qi(x)).collect())).collect();
            (vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 1, 4]], 3, coords)
        }
    };
    let complex = SimplicialComplex::build_closure(&cells)?;
    Mesh::new(complex, AffineRealization::new(ambient, coords)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[usize]) -> Simplex {
        Simplex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn closure_of_a_triangle() {
        let k = SimplicialComplex::build_closure(&[vec![2, 0, 1]]).unwrap();
        assert_eq!(k.simplices(0), &[s(&[0]), s(&[1]), s(&[2])]);
        assert_eq!(k.simplices(1), &[s(&[0, 1]), s(&[0, 2]), s(&[1, 2])]);
        assert_eq!(k.simplices(2), &[s(&[0, 1, 2])]);
    }

    #[test]
    fn hollow_triangle_and_book_counts() {
        let hollow = SimplicialComplex::build_closure(&[vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert_eq!(hollow.counts(), vec![3, 3]);
        let book = SimplicialComplex::build_closure(&[vec![0, 1, 2], vec![0, 1, 3], vec![0, 1, 4]]).unwrap();
        assert_eq!(book.counts(), vec![5, 7, 3]);
    }

    #[test]
    fn closure_errors() {
        assert!(matches!(SimplicialComplex::build_closure(&[]), Err(FeecError::EmptyComplex)));
        assert!(matches!(SimplicialComplex::build_closure(&[vec![0, 1, 1]]), Err(FeecError::DegenerateCell(_))));
    }

    #[test]
    fn incidence_numbers() {
        assert_eq!(incidence_number(&s(&[0, 1, 2]), &s(&[1, 2])), 1);
        assert_eq!(incidence_number(&s(&[0, 1, 2]), &s(&[0, 2])), -1);
        assert_eq!(incidence_number(&s(&[0, 1, 2]), &s(&[0, 1])), 1);
        assert_eq!(incidence_number(&s(&[0, 1, 2]), &s(&[0, 1, 3])), 0);
        assert_eq!(incidence_number(&s(&[0, 1, 2]), &s(&[3])), 0);
    }

    #[test]
    fn hollow_triangle_coboundary() {
        let k = generate(MeshKind::Sphere(1)).unwrap().complex;
        let d = k.coboundary_matrix(0).unwrap();
        assert_eq!((d.nrows(), d.ncols()), (3, 3));
        for r in 0..3 {
            let row: Vec<i32> = (0..3).map(|c| d.entry(r, c)).collect();
            assert_eq!(row.iter().filter(|x| **x == 1).count(), 1);
            assert_eq!(row.iter().filter(|x| **x == -1).count(), 1);
        }
        assert_eq!(d.matrix.rank(), 2);
    }

    #[test]
    fn triangle_coboundary_row() {
        let k = generate(MeshKind::Simplex(2)).unwrap().complex;
        let d = k.coboundary_matrix(1).unwrap();
        // columns are ordered {0,1},{0,2},{1,2}
        assert_eq!((0..3).map(|c| d.entry(0, c)).collect::<Vec<_>>(), vec![1, -1, 1]);
        assert!(k.coboundary_matrix(2).is_err());
    }

    #[test]
    fn coboundaries_compose_to_zero() {
        for kind in [MeshKind::Simplex(4), MeshKind::Sphere(3), MeshKind::FlatTorus(3, 3), MeshKind::Book] {
            let k = generate(kind).unwrap().complex;
            for deg in 0..k.dim() {
                let d = k.coboundary_matrix(deg).unwrap();
                assert!(d.row_nonzeros().iter().all(|&n| n == deg + 2));
                if deg + 1 < k.dim() {
                    let next = k.coboundary_matrix(deg + 1).unwrap();
                    assert!(next.matrix.matmul(&d.matrix).unwrap().is_zero());
                }
            }
        }
    }

    #[test]
    fn star_and_boundary() {
        let book = generate(MeshKind::Book).unwrap().complex;
        let star = book.star(&s(&[0, 1])).unwrap();
        assert_eq!(star.len(), 12);
        assert!([2, 3, 4].iter().all(|&v| !star.contains(&s(&[v]))));
        let tri = generate(MeshKind::Simplex(2)).unwrap().complex;
        let hollow = generate(MeshKind::Sphere(1)).unwrap().complex;
        assert_eq!(boundary_complex(&s(&[0, 1, 2])), hollow);
        assert_eq!(tri.boundary_subcomplex(), hollow);
        assert_eq!(hollow.star(&s(&[0])).unwrap(), vec![s(&[0]), s(&[0, 1]), s(&[0, 2])]);
        assert!(hollow.star(&s(&[0, 1, 2])).is_err());
    }

    #[test]
    fn generator_shapes() {
        let t = generate(MeshKind::FlatTorus(3, 3)).unwrap().complex;
        assert_eq!(t.counts(), vec![9, 27, 18]);
        assert_eq!(t.euler_characteristic(), 0);
        assert_eq!(generate(MeshKind::Sphere(1)).unwrap().complex.counts(), vec![3, 3]);
        assert_eq!(generate(MeshKind::RingTorus(4, 5)).unwrap().complex.counts(), vec![20, 60, 40]);
        assert!(generate(MeshKind::Circle(2)).is_err());
        assert!(generate(MeshKind::FlatTorus(2, 3)).is_err());
    }

    #[test]
    fn circle_has_unit_edges() {
        let m = generate(MeshKind::Circle(24)).unwrap();
        for e in m.complex.simplices(1) {
            assert!((m.realization.volume(e).unwrap() - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn book_pages_are_distinct_planes() {
        let m = generate(MeshKind::Book).unwrap();
        let normals: Vec<Vec<Q>> = m
            .complex
            .simplices(2)
            .iter()
            .map(|t| {
                let e = m.realization.edge_vectors(t).unwrap();
                vec![
                    &e[0][1] * &e[1][2] - &e[0][2] * &e[1][1],
                    &e[0][2] * &e[1][0] - &e[0][0] * &e[1][2],
                    &e[0][0] * &e[1][1] - &e[0][1] * &e[1][0],
                ]
            })
            .collect();
        for i in 0..3 {
            for j in i + 1..3 {
                let m =
                    SparseMatrix::from_dense(
                        3,
                        2,
                        |r, c| if c == 0 { normals[i][r].clone() } else { normals[j][r].clone() },
                    );
                assert_eq!(m.rank(), 2);
            }
        }
    }

    #[test]
    fn subdivision_counts_and_volume() {
        let edge = generate(MeshKind::Simplex(1)).unwrap().subdivide().unwrap();
        assert_eq!(edge.mesh.complex.counts(), vec![3, 2]);
        let tri = generate(MeshKind::Simplex(2)).unwrap().subdivide().unwrap();
        assert_eq!(tri.mesh.complex.counts()[0], 7);
        assert_eq!(tri.mesh.complex.count(2), 6);
        let torus = generate(MeshKind::FlatTorus(3, 3)).unwrap();
        let fine = torus.subdivide().unwrap();
        assert_eq!(fine.mesh.complex.count(2), 6 * 18);
        let total = |m: &Mesh| -> f64 {
            m.complex.simplices(m.complex.dim()).iter().map(|t| m.realization.volume(t).unwrap()).sum()
        };
        assert!((total(&torus) - total(&fine.mesh)).abs() <= 1e-12 * total(&torus));
        for v in 0..9 {
            assert_eq!(fine.parent_faces[v], Simplex::vertex(v));
        }
    }

    #[test]
    fn realization_rejects_collinear_triangle() {
        let k = SimplicialComplex::build_closure(&[vec![0, 1, 2]]).unwrap();
        let coords = [(0, vec![qi(0), qi(0)]), (1, vec![qi(1), qi(1)]), (2, vec![qi(2), qi(2)])].into_iter().collect();
        let r = AffineRealization::new(2, coords).unwrap();
        assert!(matches!(Mesh::new(k, r), Err(FeecError::InvalidRealization { rank: 1, .. })));
    }

    #[test]
    fn mesh_json_round_trip_and_renumbering() {
        let m = generate(MeshKind::Circle(5)).unwrap();
        let text = m.to_json_value().to_string();
        assert_eq!(Mesh::from_json(&text).unwrap(), m);
        let sparse = r#"{"vertices": [[0,0],[9,9],[1,0],["1/2","3/4"]], "cells": [[3,0,2]]}"#;
        let loaded = Mesh::from_json(sparse).unwrap();
        assert_eq!(loaded.complex.vertex_ids(), vec![0, 1, 2]);
        assert_eq!(loaded.realization.point(2).unwrap()[0], crate::rational::q(1, 2));
        assert!(matches!(Mesh::from_json("{"), Err(FeecError::Parse(_))));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("torus:3,4".parse::<MeshKind>().unwrap(), MeshKind::FlatTorus(3, 4));
        assert_eq!("book".parse::<MeshKind>().unwrap(), MeshKind::Book);
        assert!("torus:3".parse::<MeshKind>().is_err());
        assert!("cube:3".parse::<MeshKind>().is_err());
        assert_eq!(MeshKind::RingTorus(4, 5).to_string(), "ring:4,5");
    }

    #[test]
    fn faces_enumeration() {
        let t = s(&[1, 3, 5, 7]);
        assert_eq!(t.faces(1).len(), 6);
        assert_eq!(t.faces(3), vec![t.clone()]);
        assert_eq!(t.faces(0), vec![s(&[1]), s(&[3]), s(&[5]), s(&[7])]);
        assert_eq!(t.faces(2)[0], s(&[1, 3, 5]));
        assert!(t.faces(4).is_empty());
        assert_eq!(Simplex::parse_key("1-3-5").unwrap(), s(&[1, 3, 5]));
        assert!(Simplex::parse_key("3-1").is_err());
    }
}
