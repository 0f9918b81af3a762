//! The metric layer: Whitney mass matrices from the piecewise-flat metric,
//! discrete harmonic forms, Hodge decomposition, Poincaré and inf-sup
//! constants, Fortin projections and multilevel harmonic-gap studies.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, SVD};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::cohomology::{betti_from_ranks, differential_ranks, whitney_complex};
use crate::error::{FeecError, Result};
use crate::polyform::{edge_directions, EvaluableForm, PolyForm};
use crate::quadrature::SimplexRule;
use crate::rational::{factorial, to_f64, Q};
use crate::report;
use crate::simplicial::{determinant, inverse, AffineRealization, Mesh, Simplex};
use crate::whitney::{prolongation, whitney_component, Cochain};

/// Thresholds of the numerical protocols.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Singular values at most this times the largest count as zero.
    pub null_space: f64,
    /// Allowed `|β_h C_h − 1|`.
    pub reciprocity: f64,
    /// Allowed max/min ratio of constants across levels.
    pub stability: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { null_space: 1e-8, reciprocity: 1e-9, stability: 1.5 }
    }
}

impl Tolerances {
    /// Applies `name=value`.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(FeecError::InvalidParameter(format!("tolerance {name} must be positive")));
        }
        match name {
            "null_space" => self.null_space = value,
            "reciprocity" => self.reciprocity = value,
            "stability" => self.stability = value,
            _ => return Err(FeecError::InvalidParameter(format!("unknown tolerance {name:?}"))),
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "null_space": report::float(self.null_space),
            "reciprocity": report::float(self.reciprocity),
            "stability": report::float(self.stability),
        })
    }
}

/// Volume and barycentric-gradient Gram matrix `∇λ_i · ∇λ_j` of a realized simplex.
#[derive(Clone, Debug)]
pub struct HostGeometry {
    pub simplex: Simplex,
    pub volume: f64,
    pub gradient_gram: Vec<Vec<Q>>,
}

impl HostGeometry {
    pub fn new(r: &AffineRealization, s: &Simplex) -> Result<Self> {
        let d = s.dim();
        let volume = r.volume(s)?;
        if d > 0 && volume <= 0.0 {
            return Err(FeecError::DegenerateSimplex(s.clone()));
        }
        let inv = inverse(&r.gram(s)?).ok_or_else(|| FeecError::DegenerateSimplex(s.clone()))?;
        // ∇λ_i, i ≥ 1, is the dual basis of the edge vectors; ∇λ_0 = −Σ ∇λ_i
        let mut g = vec![vec![Q::zero(); d + 1]; d + 1];
        for i in 0..d {
            for j in 0..d {
                g[i + 1][j + 1] = inv[i][j].clone();
            }
        }
        for i in 1..=d {
            let row: Q = (1..=d).map(|j| g[i][j].clone()).sum();
            g[i][0] = -row.clone();
            g[0][i] = -row;
        }
        g[0][0] = (1..=d).flat_map(|i| (1..=d).map(move |j| (i, j))).map(|(i, j)| g[i][j].clone()).sum();
        Ok(HostGeometry { simplex: s.clone(), volume, gradient_gram: g })
    }

    pub fn gradient_gram_f64(&self) -> DMatrix<f64> {
        let n = self.gradient_gram.len();
        DMatrix::from_fn(n, n, |i, j| to_f64(&self.gradient_gram[i][j]))
    }

    /// `∫ λ_T · λ_{T'}` over this simplex for all pairs of local `k`-faces, divided by the volume.
    pub fn local_mass(&self, k: usize) -> Vec<Vec<Q>> {
        let d = self.simplex.dim();
        let faces: Vec<Vec<usize>> = self
            .simplex
            .faces(k)
            .iter()
            .map(|t| t.vertices().iter().map(|v| self.simplex.position(*v).expect("face")).collect())
            .collect();
        let kf = Q::from_integer(factorial(k));
        let scale = &kf * &kf / Q::from_integer(((d + 1) * (d + 2)).into());
        let minor = |a: &[usize], b: &[usize]| -> Q {
            let m: Vec<Vec<Q>> =
                a.iter().map(|&i| b.iter().map(|&j| self.gradient_gram[i][j].clone()).collect()).collect();
            determinant(&m)
        };
        faces
            .iter()
            .map(|a| {
                faces
                    .iter()
                    .map(|b| {
                        let mut total = Q::zero();
                        for (p, &i) in a.iter().enumerate() {
                            let ra: Vec<usize> = a.iter().copied().filter(|&x| x != i).collect();
                            for (q, &j) in b.iter().enumerate() {
                                let rb: Vec<usize> = b.iter().copied().filter(|&x| x != j).collect();
                                let weight = if i == j { Q::from_integer(2.into()) } else { Q::one() };
                                let term = weight * minor(&ra, &rb);
                                if (p + q) % 2 == 0 {
                                    total += term;
                                } else {
                                    total -= term;
                                }
                            }
                        }
                        total * &scale
                    })
                    .collect()
            })
            .collect()
    }
}

/// The Gram matrix of the Whitney `k`-forms in the piecewise-flat `L²` product.
#[derive(Clone, Debug)]
pub struct MassMatrix {
    pub degree: usize,
    pub matrix: DMatrix<f64>,
    /// Volumes of the simplices carrying the integrals.
    pub volumes: Vec<(Simplex, f64)>,
    /// Barycentric-gradient Gram matrices of the same simplices.
    pub gradient_grams: Vec<(Simplex, DMatrix<f64>)>,
}

fn assemble_mass(mesh: &Mesh, geometry: &[HostGeometry], k: usize) -> Result<MassMatrix> {
    let complex = &mesh.complex;
    let n = complex.count(k);
    let hosts: Vec<&HostGeometry> = geometry.iter().filter(|g| g.simplex.dim() >= k).collect();
    let locals: Vec<(Vec<usize>, Vec<Vec<f64>>)> = hosts
        .par_iter()
        .map(|g| {
            let idx = g.simplex.faces(k).iter().map(|t| complex.index_of(t).expect("closed complex")).collect();
            let local = g.local_mass(k).iter().map(|row| row.iter().map(|x| to_f64(x) * g.volume).collect()).collect();
            (idx, local)
        })
        .collect();
    let mut matrix = DMatrix::zeros(n, n);
    for (idx, local) in &locals {
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                matrix[(i, j)] += local[a][b];
            }
        }
    }
    if n > 0 && Cholesky::new(matrix.clone()).is_none() {
        return Err(FeecError::SolverBreakdown {
            what: format!("mass matrix of degree {k} is not positive definite"),
            condition: f64::INFINITY,
        });
    }
    Ok(MassMatrix {
        degree: k,
        matrix,
        volumes: hosts.iter().map(|g| (g.simplex.clone(), g.volume)).collect(),
        gradient_grams: hosts.iter().map(|g| (g.simplex.clone(), g.gradient_gram_f64())).collect(),
    })
}

fn host_geometry(mesh: &Mesh) -> Result<Vec<HostGeometry>> {
    mesh.complex.maximal_simplices().par_iter().map(|s| HostGeometry::new(&mesh.realization, s)).collect()
}

/// `M_{TT'} = Σ_S ∫_S λ_T · λ_{T'}` over the maximal simplices.
pub fn mass_matrix(mesh: &Mesh, k: usize) -> Result<MassMatrix> {
    if k > mesh.complex.dim() {
        return Err(FeecError::DegreeOutOfRange { degree: k, min: 0, max: mesh.complex.dim() });
    }
    assemble_mass(mesh, &host_geometry(mesh)?, k)
}

/// An `M`-orthonormal basis of the discrete harmonic `k`-cochains.
#[derive(Clone, Debug)]
pub struct HarmonicBasis {
    pub degree: usize,
    /// One column per basis cochain.
    pub vectors: DMatrix<f64>,
    /// All singular values of the stacked system, descending.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
}

impl HarmonicBasis {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }
}

/// The split `u = dα + h + r`.
#[derive(Clone, Debug)]
pub struct HodgeParts {
    pub degree: usize,
    pub input: Vec<f64>,
    pub alpha: Vec<f64>,
    pub exact: Vec<f64>,
    pub harmonic: Vec<f64>,
    pub remainder: Vec<f64>,
    /// `M`-norms of the input and of the three parts.
    pub norms: [f64; 4],
    /// `‖u − (dα + h + r)‖_M / ‖u‖_M`.
    pub reconstruction_error: f64,
    /// `(|⟨dα,h⟩| + |⟨dα,r⟩| + |⟨h,r⟩|) / ‖u‖²`.
    pub orthogonality_defect: f64,
    /// `max_β |⟨h, dβ⟩|` over unit coordinate cochains, relative to `‖u‖_M`.
    pub coexact_defect: f64,
    /// `max |D h|`.
    pub closed_defect: f64,
}

impl HodgeParts {
    pub fn to_json(&self) -> Value {
        json!({
            "degree": self.degree,
            "alpha": report::floats(&self.alpha),
            "exact": report::floats(&self.exact),
            "harmonic": report::floats(&self.harmonic),
            "remainder": report::floats(&self.remainder),
            "norms": {
                "input": report::float(self.norms[0]),
                "exact": report::float(self.norms[1]),
                "harmonic": report::float(self.norms[2]),
                "remainder": report::float(self.norms[3]),
            },
            "checks": {
                "reconstruction": report::float(self.reconstruction_error),
                "orthogonality": report::float(self.orthogonality_defect),
                "coexact": report::float(self.coexact_defect),
                "closed": report::float(self.closed_defect),
            },
        })
    }
}

/// A Poincaré or inf-sup constant; `vacuous` when the relevant space is `{0}` (value 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralConstant {
    pub value: f64,
    pub vacuous: bool,
}

/// Output of a Fortin projection.
#[derive(Clone, Debug)]
pub struct FortinResult {
    pub cochain: Vec<f64>,
    pub multiplier: Vec<f64>,
    /// `‖D_Pᵀ M' (D Φu) − ⟨dX_h, du⟩‖ / ‖⟨dX_h, du⟩‖`.
    pub constraint_residual: f64,
}

/// Where the right-hand sides `⟨u, v⟩` and `⟨du, q⟩` of a Fortin projection come from.
pub enum FortinSource<'a> {
    /// A cochain on the same level.
    InSpace(&'a [f64]),
    /// A cochain on a finer nested level; `p_k` and `p_k1` prolong degrees `k` and `k + 1`.
    Fine { fine: &'a HodgeLevel, p_k: &'a DMatrix<f64>, p_k1: &'a DMatrix<f64>, cochain: &'a [f64] },
    /// A form and its exterior derivative known pointwise, integrated by quadrature.
    Evaluable { u: &'a dyn EvaluableForm, du: &'a dyn EvaluableForm },
}

/// Everything the metric computations need on one mesh.
#[derive(Clone, Debug)]
pub struct HodgeLevel {
    pub mesh: Mesh,
    pub betti: Vec<usize>,
    pub tolerances: Tolerances,
    ranks: Vec<usize>,
    pivots: Vec<Vec<usize>>,
    incidence: Vec<DMatrix<f64>>,
    masses: Vec<MassMatrix>,
    factors: Vec<Option<Cholesky<f64, Dyn>>>,
    geometry: Vec<HostGeometry>,
}

fn vector(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

impl HodgeLevel {
    pub fn new(mesh: Mesh) -> Result<Self> {
        Self::with_tolerances(mesh, Tolerances::default())
    }

    pub fn with_tolerances(mesh: Mesh, tolerances: Tolerances) -> Result<Self> {
        let complex = &mesh.complex;
        let view = whitney_complex(complex);
        let ranks = differential_ranks(&view);
        let betti = betti_from_ranks(&view, &ranks);
        let top = complex.dim();
        let pivots = (0..top).into_par_iter().map(|k| complex.coboundary(k).pivot_columns()).collect();
        let incidence = (0..=top)
            .map(|k| if k < top { complex.coboundary(k).to_dense_f64() } else { DMatrix::zeros(0, complex.count(k)) })
            .collect();
        let geometry = host_geometry(&mesh)?;
        let masses =
            (0..=top).into_par_iter().map(|k| assemble_mass(&mesh, &geometry, k)).collect::<Result<Vec<_>>>()?;
        let factors = masses.iter().map(|m| Cholesky::new(m.matrix.clone())).collect();
        Ok(HodgeLevel { mesh, betti, tolerances, ranks, pivots, incidence, masses, factors, geometry })
    }

    pub fn dim(&self) -> usize {
        self.mesh.complex.dim()
    }

    pub fn count(&self, k: usize) -> usize {
        self.mesh.complex.count(k)
    }

    fn check_degree(&self, k: usize) -> Result<()> {
        if k > self.dim() {
            return Err(FeecError::DegreeOutOfRange { degree: k, min: 0, max: self.dim() });
        }
        Ok(())
    }

    pub fn mass(&self, k: usize) -> &MassMatrix {
        &self.masses[k]
    }

    /// Dense `D_k`, empty rows for the top degree.
    pub fn incidence(&self, k: usize) -> &DMatrix<f64> {
        &self.incidence[k]
    }

    /// Exact rank of `D_k`.
    pub fn rank(&self, k: usize) -> usize {
        self.ranks.get(k).copied().unwrap_or(0)
    }

    fn lower(&self, k: usize) -> Result<DMatrix<f64>> {
        self.factors[k].as_ref().map(|c| c.l()).ok_or_else(|| FeecError::SolverBreakdown {
            what: format!("Cholesky factorization of the degree-{k} mass matrix"),
            condition: f64::INFINITY,
        })
    }

    pub fn inner(&self, k: usize, x: &[f64], y: &[f64]) -> f64 {
        (vector(x).transpose() * &self.masses[k].matrix * vector(y))[(0, 0)]
    }

    pub fn norm(&self, k: usize, x: &[f64]) -> f64 {
        self.inner(k, x, x).max(0.0).sqrt()
    }

    pub fn h(&self) -> Result<f64> {
        self.mesh.realization.max_edge_length(&self.mesh.complex)
    }

    /// Numerical null space of `[D_k ; D_{k−1}ᵀ M_k]`, certified against the exact Betti number.
    pub fn harmonic_basis(&self, k: usize) -> Result<HarmonicBasis> {
        self.check_degree(k)?;
        let n = self.count(k);
        let upper = &self.incidence[k];
        let lower =
            if k > 0 { self.incidence[k - 1].transpose() * &self.masses[k].matrix } else { DMatrix::zeros(0, n) };
        let rows = (upper.nrows() + lower.nrows()).max(n);
        let mut stacked = DMatrix::zeros(rows, n);
        stacked.view_mut((0, 0), (upper.nrows(), n)).copy_from(upper);
        stacked.view_mut((upper.nrows(), 0), (lower.nrows(), n)).copy_from(&lower);
        let svd = SVD::new(stacked, false, true);
        let v_t = svd.v_t.expect("requested V");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let threshold = self.tolerances.null_space * singular_values.first().copied().unwrap_or(0.0);
        let null: Vec<usize> = order.iter().copied().filter(|&i| svd.singular_values[i] <= threshold).collect();
        if null.len() != self.betti[k] {
            return Err(FeecError::HarmonicBettiMismatch {
                degree: k,
                found: null.len(),
                expected: self.betti[k],
                singular_values,
            });
        }
        let raw = DMatrix::from_fn(n, null.len(), |r, c| v_t[(null[c], r)]);
        let vectors = if null.is_empty() {
            raw
        } else {
            let gram = raw.transpose() * &self.masses[k].matrix * &raw;
            let l = Cholesky::new(gram)
                .ok_or_else(|| FeecError::SolverBreakdown {
                    what: "harmonic Gram matrix".into(),
                    condition: f64::INFINITY,
                })?
                .l();
            l.solve_lower_triangular(&raw.transpose()).expect("triangular factor is invertible").transpose()
        };
        Ok(HarmonicBasis { degree: k, vectors, singular_values, threshold })
    }

    /// `u = dα + h + r` with `dα` the `M`-closest coboundary and `h` the harmonic projection.
    pub fn hodge_decompose(&self, k: usize, u: &[f64]) -> Result<HodgeParts> {
        self.check_degree(k)?;
        let n = self.count(k);
        if u.len() != n {
            return Err(FeecError::Shape(format!("cochain has {} entries, expected {n}", u.len())));
        }
        let m = &self.masses[k].matrix;
        let uv = vector(u);
        let (alpha, exact) = if k == 0 || self.rank(k - 1) == 0 {
            (DVector::zeros(if k == 0 { 0 } else { self.count(k - 1) }), DVector::zeros(n))
        } else {
            let d = &self.incidence[k - 1];
            let lt = self.lower(k)?.transpose();
            let b = &lt * d;
            let rhs = &lt * &uv;
            let svd = SVD::new(b, true, true);
            let (su, sv) = (svd.u.expect("requested U"), svd.v_t.expect("requested V"));
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
            let r = self.rank(k - 1);
            let (smax, smin) = (svd.singular_values[order[0]], svd.singular_values[order[r - 1]]);
            let condition = smax / smin;
            if smin.is_nan() || smin <= 0.0 || condition > 1e14 {
                return Err(FeecError::SolverBreakdown {
                    what: "least-squares solve for the exact part".into(),
                    condition,
                });
            }
            let mut alpha = DVector::zeros(d.ncols());
            for &i in &order[..r] {
                let coef = su.column(i).dot(&rhs) / svd.singular_values[i];
                alpha += sv.row(i).transpose() * coef;
            }
            let exact = d * &alpha;
            (alpha, exact)
        };
        let basis = self.harmonic_basis(k)?;
        let hm = &basis.vectors;
        let rest = &uv - &exact;
        let harmonic = hm * (hm.transpose() * (m * &rest));
        let remainder = &rest - &harmonic;
        let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * m * b)[(0, 0)];
        let nu = ip(&uv, &uv).max(0.0).sqrt();
        let norms = [
            nu,
            ip(&exact, &exact).max(0.0).sqrt(),
            ip(&harmonic, &harmonic).max(0.0).sqrt(),
            ip(&remainder, &remainder).max(0.0).sqrt(),
        ];
        let scale = if nu > 0.0 { nu } else { 1.0 };
        let back = &uv - (&exact + &harmonic + &remainder);
        let orthogonality =
            (ip(&exact, &harmonic).abs() + ip(&exact, &remainder).abs() + ip(&harmonic, &remainder).abs())
                / (scale * scale);
        let coexact = if k > 0 { (self.incidence[k - 1].transpose() * (m * &harmonic)).amax() / scale } else { 0.0 };
        let closed = (&self.incidence[k] * &harmonic).amax();
        Ok(HodgeParts {
            degree: k,
            input: u.to_vec(),
            alpha: alpha.as_slice().to_vec(),
            exact: exact.as_slice().to_vec(),
            harmonic: harmonic.as_slice().to_vec(),
            remainder: remainder.as_slice().to_vec(),
            norms,
            reconstruction_error: ip(&back, &back).max(0.0).sqrt() / scale,
            orthogonality_defect: orthogonality,
            coexact_defect: coexact,
            closed_defect: closed,
        })
    }

    /// `C_h = λ_min^{−1/2}` for `D_kᵀ M_{k+1} D_k v = λ M_k v` on the complement of `ker D_k`.
    pub fn poincare_constant(&self, k: usize) -> Result<SpectralConstant> {
        if k >= self.dim() {
            return Err(FeecError::DegreeOutOfRange { degree: k, min: 0, max: self.dim().saturating_sub(1) });
        }
        let n = self.count(k);
        let kernel = n - self.rank(k);
        if kernel == n {
            return Ok(SpectralConstant { value: 0.0, vacuous: true });
        }
        let d = &self.incidence[k];
        let stiffness = d.transpose() * &self.masses[k + 1].matrix * d;
        let l = self.lower(k)?;
        let y = l.solve_lower_triangular(&stiffness).expect("triangular factor is invertible");
        let c = l.solve_lower_triangular(&y.transpose()).expect("triangular factor is invertible");
        let sym = (&c + c.transpose()) * 0.5;
        let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let lambda = eig[kernel];
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(FeecError::SolverBreakdown {
                what: "non-positive eigenvalue on the complement of ker d".into(),
                condition: f64::INFINITY,
            });
        }
        Ok(SpectralConstant { value: lambda.powf(-0.5), vacuous: false })
    }

    /// `β_h`: the smallest non-zero singular value of `L_{k+1}ᵀ D_k L_k^{−T}` with `M = L Lᵀ`.
    pub fn inf_sup_constant(&self, k: usize) -> Result<SpectralConstant> {
        if k >= self.dim() {
            return Err(FeecError::DegreeOutOfRange { degree: k, min: 0, max: self.dim().saturating_sub(1) });
        }
        let r = self.rank(k);
        if r == 0 {
            return Ok(SpectralConstant { value: 0.0, vacuous: true });
        }
        let z = self.lower(k + 1)?.transpose() * &self.incidence[k];
        let w =
            self.lower(k)?.solve_lower_triangular(&z.transpose()).expect("triangular factor is invertible").transpose();
        let mut sv: Vec<f64> = SVD::new(w, false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        Ok(SpectralConstant { value: sv[r - 1], vacuous: false })
    }

    /// `(⟨u, λ_T⟩)_T` for a pointwise form, by quadrature on each maximal simplex.
    pub fn l2_pairing(&self, u: &dyn EvaluableForm, k: usize) -> Result<Vec<f64>> {
        self.check_degree(k)?;
        if u.degree() != k {
            return Err(FeecError::DegreeMismatch { expected: k, found: u.degree() });
        }
        let complex = &self.mesh.complex;
        let parts = self
            .geometry
            .par_iter()
            .filter(|g| g.simplex.dim() >= k)
            .map(|g| -> Result<Vec<(usize, f64)>> {
                let s = &g.simplex;
                let d = s.dim();
                let dirs = edge_directions(d);
                let subsets = subsets(d, k);
                let grad = g.gradient_gram_f64();
                let metric = DMatrix::from_fn(subsets.len(), subsets.len(), |a, b| {
                    let m = DMatrix::from_fn(k, k, |i, j| grad[(subsets[a][i] + 1, subsets[b][j] + 1)]);
                    if k == 0 {
                        1.0
                    } else {
                        m.determinant()
                    }
                });
                let faces = s.faces(k);
                let forms: Vec<PolyForm> = faces.iter().map(|t| whitney_component(s, t)).collect::<Result<_>>()?;
                let rule = SimplexRule::default_for(d);
                let pick = |set: &[usize]| -> Vec<Vec<f64>> { set.iter().map(|&i| dirs[i].clone()).collect() };
                let mut acc = vec![0.0; faces.len()];
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let uc = DVector::from_iterator(subsets.len(), subsets.iter().map(|set| u.eval(s, p, &pick(set))));
                    let mu = &metric * uc;
                    for (slot, form) in acc.iter_mut().zip(&forms) {
                        let vc = subsets.iter().map(|set| form.eval(p, &pick(set)));
                        *slot += w * vc.zip(mu.iter()).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                Ok(faces
                    .iter()
                    .zip(acc)
                    .map(|(t, a)| (complex.index_of(t).expect("closed complex"), a * g.volume))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![0.0; self.count(k)];
        for part in parts {
            for (i, a) in part {
                out[i] += a;
            }
        }
        Ok(out)
    }

    /// Solves `⟨Φu, v⟩ + ⟨p, dv⟩ = ⟨u, v⟩`, `⟨q, dΦu⟩ = ⟨q, du⟩` for `v ∈ Λ^k`, `p, q ∈ dΛ^k`.
    pub fn fortin_project(&self, k: usize, source: &FortinSource) -> Result<FortinResult> {
        self.check_degree(k)?;
        let n = self.count(k);
        let m = &self.masses[k].matrix;
        let d = &self.incidence[k];
        let pivots: &[usize] = if k < self.dim() { &self.pivots[k] } else { &[] };
        let dp = d.select_columns(pivots.iter());
        let (b1, b2) = match source {
            FortinSource::InSpace(u) => {
                if u.len() != n {
                    return Err(FeecError::Shape(format!("cochain has {} entries, expected {n}", u.len())));
                }
                let uv = vector(u);
                let b2 = if k < self.dim() {
                    dp.transpose() * (&self.masses[k + 1].matrix * (d * &uv))
                } else {
                    DVector::zeros(0)
                };
                (m * uv, b2)
            }
            FortinSource::Fine { fine, p_k, p_k1, cochain } => {
                if p_k.ncols() != n || cochain.len() != p_k.nrows() {
                    return Err(FeecError::Shape("prolongation does not match the levels".into()));
                }
                let uf = vector(cochain);
                let b1 = p_k.transpose() * (&fine.masses[k].matrix * &uf);
                let b2 = if k < self.dim() {
                    (*p_k1 * &dp).transpose() * (&fine.masses[k + 1].matrix * (&fine.incidence[k] * &uf))
                } else {
                    DVector::zeros(0)
                };
                (b1, b2)
            }
            FortinSource::Evaluable { u, du } => {
                let b1 = vector(&self.l2_pairing(*u, k)?);
                let b2 = if k < self.dim() {
                    dp.transpose() * vector(&self.l2_pairing(*du, k + 1)?)
                } else {
                    DVector::zeros(0)
                };
                (b1, b2)
            }
        };
        let r = dp.ncols();
        let coupling =
            d.transpose() * (if k < self.dim() { &self.masses[k + 1].matrix * &dp } else { DMatrix::zeros(0, 0) });
        let mut system = DMatrix::zeros(n + r, n + r);
        system.view_mut((0, 0), (n, n)).copy_from(m);
        system.view_mut((0, n), (n, r)).copy_from(&coupling);
        system.view_mut((n, 0), (r, n)).copy_from(&coupling.transpose());
        let mut rhs = DVector::zeros(n + r);
        rhs.rows_mut(0, n).copy_from(&b1);
        rhs.rows_mut(n, r).copy_from(&b2);
        let lu = system.lu();
        let diag = lu.u().diagonal().map(f64::abs);
        let condition = if diag.is_empty() { 1.0 } else { diag.max() / diag.min() };
        let x = lu
            .solve(&rhs)
            .filter(|x| x.iter().all(|v| v.is_finite()) && condition < 1e14)
            .ok_or_else(|| FeecError::SolverBreakdown { what: "Fortin saddle-point system".into(), condition })?;
        let phi = x.rows(0, n).into_owned();
        let constraint = coupling.transpose() * &phi - &b2;
        let b2n = b2.norm();
        Ok(FortinResult {
            cochain: phi.as_slice().to_vec(),
            multiplier: x.rows(n, r).iter().copied().collect(),
            constraint_residual: if b2n > 0.0 { constraint.norm() / b2n } else { constraint.norm() },
        })
    }
}

fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    rec(0, d, k, &mut cur, &mut out);
    out
}

pub fn harmonic_basis(mesh: &Mesh, k: usize) -> Result<HarmonicBasis> {
    HodgeLevel::new(mesh.clone())?.harmonic_basis(k)
}

/// Decomposes a cochain; exact coefficients are converted to floats.
pub fn hodge_decompose(u: &Cochain, mesh: &Mesh) -> Result<HodgeParts> {
    HodgeLevel::new(mesh.clone())?.hodge_decompose(u.degree, &u.to_f64())
}

pub fn poincare_constant(mesh: &Mesh, k: usize) -> Result<SpectralConstant> {
    HodgeLevel::new(mesh.clone())?.poincare_constant(k)
}

pub fn inf_sup_constant(mesh: &Mesh, k: usize) -> Result<SpectralConstant> {
    HodgeLevel::new(mesh.clone())?.inf_sup_constant(k)
}

/// A chain of barycentric subdivisions with Whitney prolongations between consecutive levels.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub levels: Vec<HodgeLevel>,
    /// `prolongations[j][k]` maps degree-`k` cochains of level `j` to level `j + 1`.
    pub prolongations: Vec<Vec<DMatrix<f64>>>,
}

impl Hierarchy {
    pub fn new(mesh: Mesh, levels: usize, tolerances: Tolerances) -> Result<Self> {
        if levels == 0 {
            return Err(FeecError::InvalidParameter("need at least one level".into()));
        }
        let mut meshes = vec![mesh];
        let mut prolongations = Vec::new();
        for _ in 1..levels {
            let coarse = meshes.last().expect("non-empty");
            let sub = coarse.subdivide()?;
            let p = (0..=coarse.complex.dim())
                .into_par_iter()
                .map(|k| prolongation(&coarse.complex, &sub, k).map(|m| m.to_dense_f64()))
                .collect::<Result<Vec<_>>>()?;
            prolongations.push(p);
            meshes.push(sub.mesh);
        }
        let levels =
            meshes.into_par_iter().map(|m| HodgeLevel::with_tolerances(m, tolerances)).collect::<Result<Vec<_>>>()?;
        Ok(Hierarchy { levels, prolongations })
    }

    /// Prolongation of degree `k` from level `from` to level `to`.
    pub fn prolongation(&self, from: usize, to: usize, k: usize) -> DMatrix<f64> {
        let n = self.levels[from].count(k);
        (from..to).fold(DMatrix::identity(n, n), |acc, j| &self.prolongations[j][k] * acc)
    }

    /// Operator norm, in the finest mass norm, of `I − P Φ_j` on the finest harmonic space,
    /// for every coarser level `j`.
    pub fn fortin_harmonic_errors(&self, k: usize) -> Result<Vec<f64>> {
        let last = self.levels.len() - 1;
        let fine = &self.levels[last];
        let h = fine.harmonic_basis(k)?.vectors;
        (0..last)
            .map(|j| {
                let p_k = self.prolongation(j, last, k);
                let p_k1 = if k < fine.dim() { self.prolongation(j, last, k + 1) } else { DMatrix::zeros(0, 0) };
                let mut err = DMatrix::zeros(h.nrows(), h.ncols());
                for c in 0..h.ncols() {
                    let col: Vec<f64> = h.column(c).iter().copied().collect();
                    let src = FortinSource::Fine { fine, p_k: &p_k, p_k1: &p_k1, cochain: &col };
                    let phi = self.levels[j].fortin_project(k, &src)?;
                    let e = h.column(c) - &p_k * vector(&phi.cochain);
                    err.set_column(c, &e);
                }
                if h.ncols() == 0 {
                    return Ok(0.0);
                }
                let gram = err.transpose() * &fine.masses[k].matrix * &err;
                let top = SymmetricEigen::new((&gram + gram.transpose()) * 0.5).eigenvalues.max();
                Ok(top.max(0.0).sqrt())
            })
            .collect()
    }
}

/// One level of a [`SpectralReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRecord {
    pub h: f64,
    pub poincare: Option<f64>,
    pub infsup: Option<f64>,
    pub vacuous: bool,
    pub harmonic_dim: usize,
    pub betti: usize,
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport {
    pub degree: usize,
    pub levels: Vec<LevelRecord>,
    pub tolerances: Tolerances,
}

impl SpectralReport {
    pub fn to_json(&self) -> Value {
        json!({
            "degree": self.degree,
            "levels": self.levels.iter().map(|l| json!({
                "h": report::float(l.h),
                "poincare": report::optional_float(l.poincare),
                "infsup": report::optional_float(l.infsup),
                "vacuous": l.vacuous,
                "harmonic_dim": l.harmonic_dim,
                "betti": l.betti,
                "gap": report::optional_float(l.gap),
            })).collect::<Vec<_>>(),
            "thresholds": self.tolerances.to_json(),
        })
    }

    /// Largest `|β_h C_h − 1|` over non-vacuous levels.
    pub fn reciprocity_defect(&self) -> f64 {
        self.levels
            .iter()
            .filter_map(|l| match (l.poincare, l.infsup) {
                (Some(c), Some(b)) if !l.vacuous => Some((b * c - 1.0).abs()),
                _ => None,
            })
            .fold(0.0, f64::max)
    }

    /// `max C_h / min C_h` over non-vacuous levels.
    pub fn poincare_spread(&self) -> Option<f64> {
        let cs: Vec<f64> = self.levels.iter().filter(|l| !l.vacuous).filter_map(|l| l.poincare).collect();
        if cs.is_empty() {
            return None;
        }
        Some(cs.iter().copied().fold(f64::MIN, f64::max) / cs.iter().copied().fold(f64::MAX, f64::min))
    }
}

/// Largest principal angle sine between `span(A)` and `span(B)`, both `M`-orthonormal.
pub fn subspace_gap(a: &DMatrix<f64>, b: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 && b.ncols() == 0 {
        return 0.0;
    }
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    let c = a.transpose() * m * b;
    let smin = SVD::new(c, false, false).singular_values.min();
    (1.0 - smin.min(1.0).powi(2)).max(0.0).sqrt()
}

fn spectral_record(level: &HodgeLevel, k: usize, harmonic: &HarmonicBasis, gap: Option<f64>) -> Result<LevelRecord> {
    let (poincare, infsup, vacuous) = if k < level.dim() {
        let c = level.poincare_constant(k)?;
        let b = level.inf_sup_constant(k)?;
        (Some(c.value), Some(b.value), c.vacuous)
    } else {
        (None, None, true)
    };
    Ok(LevelRecord {
        h: level.h()?,
        poincare,
        infsup,
        vacuous,
        harmonic_dim: harmonic.dim(),
        betti: level.betti[k],
        gap,
    })
}

/// Constants and harmonic gaps over `levels` barycentric refinements of `mesh`.
pub fn harmonic_gap_study(mesh: &Mesh, levels: usize, k: usize, tolerances: Tolerances) -> Result<SpectralReport> {
    if levels < 2 {
        return Err(FeecError::InvalidParameter("a gap study needs at least 2 levels".into()));
    }
    if k > mesh.complex.dim() {
        return Err(FeecError::DegreeOutOfRange { degree: k, min: 0, max: mesh.complex.dim() });
    }
    let hierarchy = Hierarchy::new(mesh.clone(), levels, tolerances)?;
    spectral_study(&hierarchy, k, tolerances)
}

/// The per-level records of a built hierarchy.
pub fn spectral_study(hierarchy: &Hierarchy, k: usize, tolerances: Tolerances) -> Result<SpectralReport> {
    let bases = hierarchy.levels.par_iter().map(|l| l.harmonic_basis(k)).collect::<Result<Vec<_>>>()?;
    let records = (0..hierarchy.levels.len())
        .into_par_iter()
        .map(|j| {
            let gap = (j > 0).then(|| {
                let lifted = &hierarchy.prolongations[j - 1][k] * &bases[j - 1].vectors;
                subspace_gap(&lifted, &bases[j].vectors, &hierarchy.levels[j].masses[k].matrix)
            });
            spectral_record(&hierarchy.levels[j], k, &bases[j], gap)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralReport { degree: k, levels: records, tolerances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;
    use crate::simplicial::{generate, MeshKind, SimplicialComplex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn triangle_mesh(points: [[i64; 2]; 3]) -> Mesh {
        let k = SimplicialComplex::build_closure(&[vec![0, 1, 2]]).unwrap();
        let coords: BTreeMap<usize, Vec<Q>> =
            points.iter().enumerate().map(|(i, p)| (i, vec![qi(p[0]), qi(p[1])])).collect();
        Mesh::new(k, AffineRealization::new(2, coords).unwrap()).unwrap()
    }

    #[test]
    fn scalar_mass_against_sampling() {
        // area 1: vertices (0,0), (2,0), (0,1)
        let mesh = triangle_mesh([[0, 0], [2, 0], [0, 1]]);
        let m = mass_matrix(&mesh, 0).unwrap().matrix;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples = 400_000;
        let mut acc = [[0.0f64; 3]; 3];
        for _ in 0..samples {
            let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
            if a + b > 1.0 {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            let l = [1.0 - a - b, a, b];
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += l[i] * l[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let mc = acc[i][j] / samples as f64;
                assert!((m[(i, j)] - mc).abs() < 2e-3, "{i}{j}: {} vs {mc}", m[(i, j)]);
            }
            assert!((m[(i, i)] - 1.0 / 6.0).abs() < 1e-15);
        }
        assert!((m[(0, 1)] - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn top_degree_mass_is_inverse_volume() {
        // area 3; λ_T is the area form divided by the area, so ∫ |λ_T|² = 1/3
        let mesh = triangle_mesh([[0, 0], [2, 0], [0, 3]]);
        let m = mass_matrix(&mesh, 2).unwrap().matrix;
        assert!((m[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        let m1 = mass_matrix(&generate(MeshKind::Simplex(3)).unwrap(), 3).unwrap().matrix;
        assert!((m1[(0, 0)] - 6.0).abs() < 1e-13);
    }

    #[test]
    fn edge_mass_on_a_unit_segment() {
        // λ_{01} = dx on [0,1]: ∫ 1 = 1
        let mesh = generate(MeshKind::Simplex(1)).unwrap();
        assert!((mass_matrix(&mesh, 1).unwrap().matrix[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mass_matches_quadrature_of_whitney_forms() {
        let mesh = triangle_mesh([[0, 0], [3, 1], [1, 2]]);
        let level = HodgeLevel::new(mesh.clone()).unwrap();
        let m = level.mass(1).matrix.clone();
        for (i, t) in mesh.complex.simplices(1).iter().enumerate() {
            let form = crate::whitney::whitney_form(&mesh.complex, t).unwrap();
            let pairing = level.l2_pairing(&form, 1).unwrap();
            for j in 0..3 {
                assert!((pairing[j] - m[(j, i)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn mass_is_spd() {
        let mesh = generate(MeshKind::Book).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..=2 {
            let m = mass_matrix(&mesh, k).unwrap().matrix;
            assert!((&m - m.transpose()).amax() <= 1e-13 * m.amax());
            for _ in 0..100 {
                let x = DVector::from_fn(m.nrows(), |_, _| rng.random::<f64>() - 0.5);
                assert!((x.transpose() * &m * &x)[(0, 0)] > 0.0);
            }
        }
    }

    #[test]
    fn harmonic_dimensions() {
        let torus = HodgeLevel::new(generate(MeshKind::FlatTorus(3, 3)).unwrap()).unwrap();
        for k in 0..=2 {
            assert_eq!(torus.harmonic_basis(k).unwrap().dim(), [1, 2, 1][k]);
        }
        let sphere = HodgeLevel::new(generate(MeshKind::Sphere(2)).unwrap()).unwrap();
        assert_eq!(sphere.harmonic_basis(1).unwrap().dim(), 0);
        let simplex = HodgeLevel::new(generate(MeshKind::Simplex(2)).unwrap()).unwrap();
        let h = simplex.harmonic_basis(0).unwrap().vectors;
        assert!((h[(0, 0)] - h[(1, 0)]).abs() < 1e-12 && (h[(1, 0)] - h[(2, 0)]).abs() < 1e-12);
    }

    #[test]
    fn torus_harmonic_periods() {
        // cycle sums along the two coordinate loops i -> i+1 (j fixed) and j -> j+1 (i fixed)
        let (m, n) = (3usize, 3usize);
        let mesh = generate(MeshKind::FlatTorus(m, n)).unwrap();
        let level = HodgeLevel::new(mesh.clone()).unwrap();
        let h = level.harmonic_basis(1).unwrap().vectors;
        let v = |i: usize, j: usize| (i % m) * n + (j % n);
        let period = |col: usize, steps: Vec<(usize, usize)>| -> f64 {
            steps
                .iter()
                .map(|&(a, b)| {
                    let e = Simplex::new(vec![a, b]).unwrap();
                    let s = if a < b { 1.0 } else { -1.0 };
                    s * h[(mesh.complex.index_of(&e).unwrap(), col)]
                })
                .sum()
        };
        let loop_i: Vec<(usize, usize)> = (0..m).map(|i| (v(i, 0), v(i + 1, 0))).collect();
        let loop_j: Vec<(usize, usize)> = (0..n).map(|j| (v(0, j), v(0, j + 1))).collect();
        let p = DMatrix::from_fn(2, 2, |r, c| period(c, if r == 0 { loop_i.clone() } else { loop_j.clone() }));
        // the period matrix is invertible, and with L = 3 unit edges per loop the harmonic
        // forms are a·dx + b·dy, so the periods of an M-orthonormal basis have norm L/sqrt(area) per column
        assert!(p.determinant().abs() > 1e-6);
        let area: f64 = level.mass(2).volumes.iter().map(|(_, a)| a).sum();
        let expected = 3.0 / area.sqrt();
        for c in 0..2 {
            let norm = (p[(0, c)].powi(2) + p[(1, c)].powi(2)).sqrt();
            assert!((norm - expected).abs() < 1e-8 * expected, "{norm} vs {expected}");
        }
    }

    #[test]
    fn decomposition_examples() {
        let level = HodgeLevel::new(generate(MeshKind::FlatTorus(4, 4)).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a0: Vec<f64> = (0..level.count(0)).map(|_| rng.random::<f64>() - 0.5).collect();
        let du: Vec<f64> = (level.incidence(0) * vector(&a0)).as_slice().to_vec();
        let parts = level.hodge_decompose(1, &du).unwrap();
        assert!(parts.norms[2] < 1e-10 * parts.norms[0] && parts.norms[3] < 1e-10 * parts.norms[0]);
        let diff: Vec<f64> = parts.exact.iter().zip(&du).map(|(a, b)| a - b).collect();
        assert!(level.norm(1, &diff) < 1e-10 * parts.norms[0]);

        let h = level.harmonic_basis(1).unwrap().vectors;
        let col: Vec<f64> = h.column(1).iter().copied().collect();
        let parts = level.hodge_decompose(1, &col).unwrap();
        assert!(parts.norms[1] < 1e-10 && parts.norms[3] < 1e-10);

        for _ in 0..5 {
            let u: Vec<f64> = (0..level.count(1)).map(|_| rng.random::<f64>() - 0.5).collect();
            let p = level.hodge_decompose(1, &u).unwrap();
            assert!(p.reconstruction_error <= 1e-10);
            assert!(p.orthogonality_defect <= 1e-9);
            assert!(p.coexact_defect <= 1e-9 && p.closed_defect <= 1e-10);
        }
    }

    #[test]
    fn poincare_on_circles() {
        let mut normalized = Vec::new();
        for n in [12, 24, 48] {
            let level = HodgeLevel::new(generate(MeshKind::Circle(n)).unwrap()).unwrap();
            let c = level.poincare_constant(0).unwrap();
            let b = level.inf_sup_constant(0).unwrap();
            let length: f64 = level.mass(1).volumes.iter().map(|(_, v)| v).sum();
            assert!((length - n as f64).abs() < 1e-9);
            // continuous oracle: λ_min = (2π/L)² on a circle of length L
            let oracle = length / (2.0 * std::f64::consts::PI);
            if n >= 24 {
                assert!((c.value / oracle - 1.0).abs() <= 0.1);
                assert!((b.value * oracle - 1.0).abs() <= 0.1);
            }
            assert!((b.value * c.value - 1.0).abs() <= 1e-9);
            normalized.push(c.value / length);
        }
        assert!((normalized[0] / normalized[1] - 1.0).abs() <= 0.05);
    }

    #[test]
    fn poincare_vacuous_and_range() {
        let level = HodgeLevel::new(generate(MeshKind::Simplex(1)).unwrap()).unwrap();
        assert!(level.poincare_constant(1).is_err());
        let c = level.poincare_constant(0).unwrap();
        assert!(!c.vacuous && c.value > 0.0);
    }

    #[test]
    fn fortin_is_a_projection() {
        let level = HodgeLevel::new(generate(MeshKind::FlatTorus(3, 3)).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 0..=2 {
            let u: Vec<f64> = (0..level.count(k)).map(|_| rng.random::<f64>() - 0.5).collect();
            let r = level.fortin_project(k, &FortinSource::InSpace(&u)).unwrap();
            let diff: Vec<f64> = r.cochain.iter().zip(&u).map(|(a, b)| a - b).collect();
            assert!(level.norm(k, &diff) <= 1e-10 * level.norm(k, &u));
            assert!(r.constraint_residual < 1e-9);
            assert!(r.multiplier.iter().all(|p| p.abs() < 1e-9));
        }
    }

    #[test]
    fn fortin_reproduces_nested_coarse_forms() {
        let h = Hierarchy::new(generate(MeshKind::Sphere(2)).unwrap(), 2, Tolerances::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 0..=1 {
            let u: Vec<f64> = (0..h.levels[0].count(k)).map(|_| rng.random::<f64>() - 0.5).collect();
            let fine = (&h.prolongations[0][k] * vector(&u)).as_slice().to_vec();
            let src = FortinSource::Fine {
                fine: &h.levels[1],
                p_k: &h.prolongations[0][k],
                p_k1: &h.prolongations[0][k + 1],
                cochain: &fine,
            };
            let r = h.levels[0].fortin_project(k, &src).unwrap();
            let diff: Vec<f64> = r.cochain.iter().zip(&u).map(|(a, b)| a - b).collect();
            assert!(h.levels[0].norm(k, &diff) <= 1e-10 * h.levels[0].norm(k, &u));
        }
    }

    #[test]
    fn fortin_of_evaluable_whitney_form_is_itself() {
        let mesh = generate(MeshKind::Book).unwrap();
        let level = HodgeLevel::new(mesh.clone()).unwrap();
        let t = Simplex::new(vec![0, 2]).unwrap();
        let u = crate::whitney::whitney_form(&mesh.complex, &t).unwrap();
        let du = u.d();
        let r = level.fortin_project(1, &FortinSource::Evaluable { u: &u, du: &du }).unwrap();
        let idx = mesh.complex.index_of(&t).unwrap();
        for (i, x) in r.cochain.iter().enumerate() {
            assert!((x - if i == idx { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_study_trivial_cases() {
        let sphere = harmonic_gap_study(&generate(MeshKind::Sphere(2)).unwrap(), 2, 1, Tolerances::default()).unwrap();
        assert!(sphere.levels.iter().all(|l| l.harmonic_dim == 0));
        assert_eq!(sphere.levels[1].gap, Some(0.0));
        let circle = harmonic_gap_study(&generate(MeshKind::Circle(8)).unwrap(), 3, 0, Tolerances::default()).unwrap();
        for l in &circle.levels[1..] {
            assert!(l.gap.unwrap() < 1e-7);
        }
        assert_eq!(circle.levels[0].gap, None);
        assert!(circle.reciprocity_defect() <= 1e-9);
        assert!(harmonic_gap_study(&generate(MeshKind::Circle(8)).unwrap(), 1, 0, Tolerances::default()).is_err());
    }

    #[test]
    fn tolerances_parse() {
        let mut t = Tolerances::default();
        t.set("null_space", 1e-9).unwrap();
        assert_eq!(t.null_space, 1e-9);
        assert!(t.set("bogus", 1.0).is_err());
        assert!(t.set("stability", -1.0).is_err());
    }
}
