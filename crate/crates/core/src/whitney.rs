//! Whitney forms, their degrees of freedom, interpolation, and the
//! high-order spaces `X^k_n` spanned by hat-function multiples of Whitney forms.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{FeecError, Result};
use crate::exact::{Echelon, SparseMatrix, SparseVec};
use crate::polyform::{integrate_evaluable, random_coefficient, CompatibleForm, EvaluableForm, Key, PolyForm};
use crate::rational::{factorial, format_fraction, parse_rational, to_f64, Q};
use crate::report;
use crate::simplicial::{Simplex, SimplicialComplex, Subdivision};

/// Component on `host` of the Whitney form of its face `t`:
/// `k! Σ_i (-1)^i λ_{t_i} dλ_{t_0} ∧ .. (omit t_i) .. ∧ dλ_{t_k}`.
pub fn whitney_component(host: &Simplex, t: &Simplex) -> Result<PolyForm> {
    if !t.is_face_of(host) {
        return Err(FeecError::NotAFace { face: t.clone(), host: host.clone() });
    }
    let local: Vec<usize> = t.vertices().iter().map(|v| host.position(*v).expect("face vertex")).collect();
    let k = t.dim();
    let kf = Q::from_integer(factorial(k));
    let mut out = PolyForm::zero(host.clone(), k);
    for (i, &p) in local.iter().enumerate() {
        let mut alpha = vec![0; host.vertices().len()];
        alpha[p] = 1;
        let rest: Vec<usize> = local.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &q)| q).collect();
        let c = if i % 2 == 0 { kf.clone() } else { -kf.clone() };
        out = out.add(&PolyForm::monomial(host.clone(), &alpha, &rest, c)?)?;
    }
    Ok(out)
}

/// The Whitney form `λ_T` as a compatible family over `k`.
pub fn whitney_form(k: &SimplicialComplex, t: &Simplex) -> Result<CompatibleForm> {
    k.require(t)?;
    let comps = k.iter().filter(|s| t.is_face_of(s)).map(|s| whitney_component(s, t)).collect::<Result<Vec<_>>>()?;
    CompatibleForm::from_components(t.dim(), comps)
}

/// Degree of freedom `μ_T(u) = ∫_T u`, exact for polynomial forms.
pub fn dof(u: &CompatibleForm, t: &Simplex) -> Result<Q> {
    if u.degree() != t.dim() {
        return Err(FeecError::DegreeMismatch { expected: t.dim(), found: u.degree() });
    }
    u.component(t).integrate()
}

/// Degree of freedom of an evaluable form, by quadrature.
pub fn dof_evaluable(u: &dyn EvaluableForm, t: &Simplex) -> Result<f64> {
    integrate_evaluable(u, t)
}

/// Coefficients of a Whitney-space element in the basis `(λ_T)`.
#[derive(Clone, Debug, PartialEq)]
pub enum CochainValues {
    Exact(Vec<Q>),
    Float(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cochain {
    pub degree: usize,
    pub values: CochainValues,
}

impl Cochain {
    pub fn exact(degree: usize, values: Vec<Q>) -> Self {
        Cochain { degree, values: CochainValues::Exact(values) }
    }

    pub fn float(degree: usize, values: Vec<f64>) -> Self {
        Cochain { degree, values: CochainValues::Float(values) }
    }

    pub fn zero(k: &SimplicialComplex, degree: usize) -> Self {
        Self::exact(degree, vec![Q::zero(); k.count(degree)])
    }

    pub fn indicator(k: &SimplicialComplex, t: &Simplex) -> Result<Self> {
        let i = k.require(t)?;
        let mut v = vec![Q::zero(); k.count(t.dim())];
        v[i] = Q::one();
        Ok(Self::exact(t.dim(), v))
    }

    pub fn len(&self) -> usize {
        match &self.values {
            CochainValues::Exact(v) => v.len(),
            CochainValues::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_exact(&self) -> Option<&[Q]> {
        match &self.values {
            CochainValues::Exact(v) => Some(v),
            CochainValues::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match &self.values {
            CochainValues::Exact(v) => v.iter().map(to_f64).collect(),
            CochainValues::Float(v) => v.clone(),
        }
    }

    pub fn to_sparse(&self) -> Option<SparseVec> {
        self.as_exact().map(SparseVec::from_dense)
    }

    /// `{"degree": k, "values": {"i0-..-ik": "p/q" | float}}`, zero entries omitted.
    pub fn to_json(&self, k: &SimplicialComplex) -> Value {
        let simplices = k.simplices(self.degree);
        let mut values = serde_json::Map::new();
        match &self.values {
            CochainValues::Exact(v) => {
                for (s, x) in simplices.iter().zip(v).filter(|(_, x)| !x.is_zero()) {
                    values.insert(s.key(), Value::String(format_fraction(x)));
                }
            }
            CochainValues::Float(v) => {
                for (s, x) in simplices.iter().zip(v).filter(|(_, x)| **x != 0.0) {
                    values.insert(s.key(), report::float(*x));
                }
            }
        }
        json!({ "degree": self.degree, "values": values })
    }

    /// Reads the JSON form; missing keys are zero. Any float value makes the cochain floating.
    pub fn from_json(k: &SimplicialComplex, value: &Value) -> Result<Self> {
        let degree =
            value["degree"].as_u64().ok_or_else(|| FeecError::Parse("cochain: missing degree".into()))? as usize;
        let map = value["values"].as_object().ok_or_else(|| FeecError::Parse("cochain: missing values".into()))?;
        let n = k.count(degree);
        let mut exact = vec![Q::zero(); n];
        let mut floats: Option<Vec<f64>> = None;
        for (key, x) in map {
            let s = Simplex::parse_key(key)?;
            if s.dim() != degree {
                return Err(FeecError::Parse(format!("cochain key {key} has the wrong dimension")));
            }
            let i = k.require(&s)?;
            match x {
                Value::String(t) => exact[i] = parse_rational(t)?,
                Value::Number(num) => {
                    let f = floats.get_or_insert_with(|| vec![0.0; n]);
                    f[i] = num.as_f64().ok_or_else(|| FeecError::Parse(format!("bad value for {key}")))?;
                }
                _ => return Err(FeecError::Parse(format!("bad value for {key}"))),
            }
        }
        Ok(match floats {
            Some(mut f) => {
                for (a, e) in f.iter_mut().zip(&exact) {
                    *a += to_f64(e);
                }
                Cochain::float(degree, f)
            }
            None => Cochain::exact(degree, exact),
        })
    }
}

/// Interpolant `Π u` with coefficients `μ_T(u)`, exact.
pub fn interpolate(u: &CompatibleForm, k: &SimplicialComplex, degree: usize) -> Result<Cochain> {
    if degree > k.dim() {
        return Err(FeecError::DegreeOutOfRange { degree, min: 0, max: k.dim() });
    }
    if u.degree() != degree {
        return Err(FeecError::DegreeMismatch { expected: degree, found: u.degree() });
    }
    let values = k.simplices(degree).iter().map(|t| dof(u, t)).collect::<Result<Vec<_>>>()?;
    Ok(Cochain::exact(degree, values))
}

/// Interpolant of an evaluable form, by quadrature on each simplex.
pub fn interpolate_evaluable(u: &dyn EvaluableForm, k: &SimplicialComplex, degree: usize) -> Result<Cochain> {
    if degree > k.dim() {
        return Err(FeecError::DegreeOutOfRange { degree, min: 0, max: k.dim() });
    }
    if u.degree() != degree {
        return Err(FeecError::DegreeMismatch { expected: degree, found: u.degree() });
    }
    let values = k.simplices(degree).par_iter().map(|t| integrate_evaluable(u, t)).collect::<Result<Vec<_>>>()?;
    Ok(Cochain::float(degree, values))
}

/// `Σ c_T λ_T` as a compatible form.
pub fn cochain_to_form(k: &SimplicialComplex, c: &Cochain) -> Result<CompatibleForm> {
    let values =
        c.as_exact().ok_or_else(|| FeecError::InvalidParameter("cochain_to_form needs exact coefficients".into()))?;
    if values.len() != k.count(c.degree) {
        return Err(FeecError::Shape(format!("{} coefficients for {} simplices", values.len(), k.count(c.degree))));
    }
    let mut comps = Vec::new();
    for s in k.iter().filter(|s| s.dim() >= c.degree) {
        let mut comp = PolyForm::zero(s.clone(), c.degree);
        for t in s.faces(c.degree) {
            let x = &values[k.index_of(&t).expect("closed complex")];
            if !x.is_zero() {
                comp = comp.add(&whitney_component(s, &t)?.scale(x))?;
            }
        }
        comps.push(comp);
    }
    CompatibleForm::from_components(c.degree, comps)
}

/// `[μ_{T'}(λ_T)]` with rows `T'` and columns `T`, computed from the forms.
pub fn duality_matrix(k: &SimplicialComplex, degree: usize) -> Result<SparseMatrix> {
    let simplices = k.simplices(degree);
    let cols = simplices
        .iter()
        .map(|t| {
            let form = whitney_form(k, t)?;
            let entries =
                simplices.iter().enumerate().map(|(r, s)| Ok((r, dof(&form, s)?))).collect::<Result<Vec<_>>>()?;
            Ok(SparseVec::from_entries(entries))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SparseMatrix::from_columns(simplices.len(), cols))
}

/// `D Π u − Π du`, zero exactly when interpolation commutes with `d` on `u`.
pub fn commuting_defect(k: &SimplicialComplex, u: &CompatibleForm) -> Result<SparseVec> {
    let deg = u.degree();
    if deg >= k.dim() {
        return Err(FeecError::DegreeOutOfRange { degree: deg, min: 0, max: k.dim().saturating_sub(1) });
    }
    let left = k.coboundary(deg).mul_vec(&interpolate(u, k, deg)?.to_sparse().expect("exact"));
    let right = interpolate(&u.d(), k, deg + 1)?.to_sparse().expect("exact");
    Ok(left.sub(&right))
}

/// `max |D Π u − Π du|` for a pointwise form and its derivative, by quadrature.
pub fn commuting_defect_evaluable(k: &SimplicialComplex, u: &dyn EvaluableForm, du: &dyn EvaluableForm) -> Result<f64> {
    let deg = u.degree();
    if deg >= k.dim() {
        return Err(FeecError::DegreeOutOfRange { degree: deg, min: 0, max: k.dim().saturating_sub(1) });
    }
    let pu = interpolate_evaluable(u, k, deg)?.to_f64();
    let pdu = interpolate_evaluable(du, k, deg + 1)?.to_f64();
    let d = k.coboundary(deg).to_dense_f64();
    let left = d * nalgebra::DVector::from_vec(pu);
    Ok(left.iter().zip(&pdu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Prolongation of Whitney `degree`-forms from the coarse complex to its subdivision:
/// entry `(t, T)` is `μ_t(λ_T)` for fine `t` and coarse `T`.
pub fn prolongation(coarse: &SimplicialComplex, sub: &Subdivision, degree: usize) -> Result<SparseMatrix> {
    let fine = &sub.mesh.complex;
    let rows = fine
        .simplices(degree)
        .par_iter()
        .map(|t| {
            let carrier = sub.carrier(t);
            let images: Vec<Vec<Q>> = t.vertices().iter().map(|&v| sub.barycentric(v, &carrier)).collect();
            carrier
                .faces(degree)
                .into_iter()
                .map(|face| {
                    let value = whitney_component(&carrier, &face)?.pullback(t, &images)?.integrate()?;
                    Ok((coarse.require(&face)?, value))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols: Vec<Vec<(usize, Q)>> = vec![Vec::new(); coarse.count(degree)];
    for (r, row) in rows.into_iter().enumerate() {
        for (c, v) in row {
            if !v.is_zero() {
                cols[c].push((r, v));
            }
        }
    }
    Ok(SparseMatrix::from_columns(fine.count(degree), cols.into_iter().map(SparseVec::from_entries).collect()))
}

/// A generator `λ_{m_1} ⋯ λ_{m_s} · λ_T` of a high-order space
/// (for degree 0 there is no `T` and the product has `n` factors).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub hats: Vec<usize>,
    pub whitney: Option<Simplex>,
}

impl Generator {
    pub fn support(&self) -> Simplex {
        let mut v = self.hats.clone();
        if let Some(t) = &self.whitney {
            v.extend_from_slice(t.vertices());
        }
        v.sort_unstable();
        v.dedup();
        Simplex::from_sorted(v)
    }

    /// Component on a simplex containing the support.
    pub fn component(&self, host: &Simplex, degree: usize) -> Result<PolyForm> {
        let mut out = match &self.whitney {
            Some(t) => whitney_component(host, t)?,
            None => PolyForm::constant(host.clone(), Q::one()),
        };
        for &v in &self.hats {
            let i =
                host.position(v).ok_or_else(|| FeecError::NotAFace { face: Simplex::vertex(v), host: host.clone() })?;
            out = PolyForm::lambda(host.clone(), i).wedge(&out)?;
        }
        debug_assert_eq!(out.degree(), degree);
        Ok(out)
    }

    pub fn label(&self) -> String {
        let hats: Vec<String> = self.hats.iter().map(|v| format!("λ{v}")).collect();
        match &self.whitney {
            Some(t) => format!("{}λ[{}]", hats.join(""), t.key()),
            None => hats.join(""),
        }
    }
}

/// Outcome of a span-membership solve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Membership {
    /// Coefficients over the spanning set (supported on the basis generators).
    Member(SparseVec),
    NotInSpan,
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member(_))
    }
}

/// The space `X^k_n` with its spanning set, coefficient matrix and an echelon basis.
#[derive(Clone, Debug)]
pub struct HighOrderSpace {
    pub degree: usize,
    pub order: usize,
    pub generators: Vec<Generator>,
    maximal: Vec<Simplex>,
    max_index: HashMap<Simplex, usize>,
    frame: HashMap<(usize, Key), usize>,
    /// Per generator, its components on the maximal simplices containing its support.
    top: Vec<Vec<(usize, PolyForm)>>,
    matrix: SparseMatrix,
    echelon: Echelon,
}

/// Spanning set of `X^k_n`: `n - 1` hats times a Whitney `k`-form for `k ≥ 1`,
/// products of `n` hats for `k = 0`; products vanishing everywhere are skipped.
pub fn highorder_span(k: &SimplicialComplex, degree: usize, order: usize) -> Result<HighOrderSpace> {
    if order == 0 {
        return Err(FeecError::InvalidParameter("order n must be at least 1".into()));
    }
    if degree > k.dim() {
        return Err(FeecError::DegreeOutOfRange { degree, min: 0, max: k.dim() });
    }
    let hats = if degree == 0 { order } else { order - 1 };
    let mut generators = Vec::new();
    let seeds: Vec<Option<Simplex>> =
        if degree == 0 { vec![None] } else { k.simplices(degree).iter().cloned().map(Some).collect() };
    let vertices = k.vertex_ids();
    for seed in seeds {
        let mut stack: Vec<(Vec<usize>, Option<Simplex>)> = vec![(Vec::new(), seed.as_ref().cloned())];
        while let Some((multiset, support)) = stack.pop() {
            if multiset.len() == hats {
                generators.push(Generator { hats: multiset, whitney: seed.clone() });
                continue;
            }
            let start = multiset.last().copied();
            for &v in vertices.iter().rev().filter(|&&v| start.is_none_or(|s| v >= s)) {
                let next = match &support {
                    Some(s) => s.union(&Simplex::vertex(v)),
                    None => Simplex::vertex(v),
                };
                if k.contains(&next) {
                    let mut m = multiset.clone();
                    m.push(v);
                    stack.push((m, Some(next)));
                }
            }
        }
    }
    let maximal: Vec<Simplex> = k.maximal_simplices().iter().filter(|s| s.dim() >= degree).cloned().collect();
    let max_index: HashMap<Simplex, usize> = maximal.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let top = generators
        .par_iter()
        .map(|g| {
            let support = g.support();
            maximal
                .iter()
                .enumerate()
                .filter(|(_, s)| support.is_face_of(s))
                .map(|(i, s)| Ok((i, g.component(s, degree)?)))
                .filter(|r| r.as_ref().map(|(_, p)| !p.is_zero()).unwrap_or(true))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut frame: HashMap<(usize, Key), usize> = HashMap::new();
    let mut cols = Vec::with_capacity(generators.len());
    for comps in &top {
        let mut entries = Vec::new();
        for (s, p) in comps {
            for (key, c) in p.terms() {
                let next = frame.len();
                let row = *frame.entry((*s, key.clone())).or_insert(next);
                entries.push((row, c.clone()));
            }
        }
        cols.push(entries);
    }
    let rows = frame.len();
    let mut echelon = Echelon::new(rows);
    let cols: Vec<SparseVec> = cols.into_iter().map(SparseVec::from_entries).collect();
    for c in &cols {
        echelon.insert(c.clone());
    }
    Ok(HighOrderSpace {
        degree,
        order,
        generators,
        maximal,
        max_index,
        frame,
        top,
        matrix: SparseMatrix::from_columns(rows, cols),
        echelon,
    })
}

impl HighOrderSpace {
    pub fn dim(&self) -> usize {
        self.echelon.rank()
    }

    /// Coefficient matrix: one column per generator over the shared term frame.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Generators forming a basis, in spanning-set order.
    pub fn basis(&self) -> &[usize] {
        self.echelon.basis_items()
    }

    pub fn generator_form(&self, k: &SimplicialComplex, i: usize) -> Result<CompatibleForm> {
        let top: BTreeMap<Simplex, PolyForm> =
            self.top[i].iter().map(|(s, p)| (self.maximal[*s].clone(), p.clone())).collect();
        CompatibleForm::from_maximal(k, self.degree, &top)
    }

    /// Components on the maximal simplices of `Σ c_i g_i`.
    pub fn combine(&self, coefficients: &SparseVec) -> Result<BTreeMap<Simplex, PolyForm>> {
        let mut out: BTreeMap<usize, PolyForm> = BTreeMap::new();
        for (i, c) in coefficients.entries() {
            for (s, p) in &self.top[*i] {
                let term = p.scale(c);
                let slot = out.entry(*s).or_insert_with(|| PolyForm::zero(self.maximal[*s].clone(), self.degree));
                *slot = slot.add(&term)?;
            }
        }
        Ok(out.into_iter().filter(|(_, p)| !p.is_zero()).map(|(s, p)| (self.maximal[s].clone(), p)).collect())
    }

    /// Random coefficients over the basis generators, drawn from `{-9..9}/{1..9}`.
    pub fn random_coefficients(&self, rng: &mut impl Rng) -> SparseVec {
        SparseVec::from_entries(self.basis().iter().map(|&i| (i, random_coefficient(rng))).collect())
    }

    /// A random element as a compatible form on `k`.
    pub fn random_form(&self, k: &SimplicialComplex, rng: &mut impl Rng) -> Result<CompatibleForm> {
        CompatibleForm::from_maximal(k, self.degree, &self.combine(&self.random_coefficients(rng))?)
    }

    /// Frame coordinates of a form given by its maximal-simplex components,
    /// or `None` when it uses a term no generator has.
    fn frame_vector(&self, top: &BTreeMap<Simplex, PolyForm>) -> Option<SparseVec> {
        let mut entries = Vec::new();
        for (s, p) in top {
            if p.is_zero() {
                continue;
            }
            let si = *self.max_index.get(s)?;
            for (key, c) in p.terms() {
                entries.push((*self.frame.get(&(si, key.clone()))?, c.clone()));
            }
        }
        Some(SparseVec::from_entries(entries))
    }

    /// Membership of a form given on (at least) the maximal simplices.
    pub fn membership_top(&self, top: &BTreeMap<Simplex, PolyForm>) -> Result<Membership> {
        if let Some(p) = top.values().find(|p| p.degree() != self.degree) {
            return Err(FeecError::DegreeMismatch { expected: self.degree, found: p.degree() });
        }
        let relevant: BTreeMap<Simplex, PolyForm> =
            top.iter().filter(|(s, _)| self.max_index.contains_key(*s)).map(|(s, p)| (s.clone(), p.clone())).collect();
        Ok(match self.frame_vector(&relevant).and_then(|v| self.echelon.solve(&v)) {
            Some(x) => Membership::Member(x),
            None => Membership::NotInSpan,
        })
    }
}

/// Solves for `u` in the spanning set of `space` with one global unknown vector.
pub fn membership(u: &CompatibleForm, space: &HighOrderSpace) -> Result<Membership> {
    if u.degree() != space.degree {
        return Err(FeecError::DegreeMismatch { expected: space.degree, found: u.degree() });
    }
    let top: BTreeMap<Simplex, PolyForm> = space.maximal.iter().map(|s| (s.clone(), u.component(s))).collect();
    space.membership_top(&top)
}

/// `u_{[S]} = Σ_p (-1)^p u_{S_p} du_{S_0} ∧ .. (omit p) .. ∧ du_{S_last}` over the listed indices.
pub fn bracket(u: &[PolyForm], indices: &[usize]) -> Result<PolyForm> {
    let host = u[0].host().clone();
    let mut out = PolyForm::zero(host.clone(), indices.len().saturating_sub(1));
    for (p, &i) in indices.iter().enumerate() {
        let mut term = u[i].clone();
        for (q, &j) in indices.iter().enumerate() {
            if q != p {
                term = term.wedge(&u[j].d())?;
            }
        }
        out = out.add(&if p % 2 == 0 { term } else { term.scale(&-Q::one()) })?;
    }
    Ok(out)
}

/// Checks `u_{[0..a-1]} ∧ u_{[a..a+b]} = (-1)^{a-1} Σ_{i<a} (-1)^i u_i u_{[0..î..a+b]}`
/// for functions `u_0..u_{a+b}` on one simplex.
pub fn bracket_identity_holds(u: &[PolyForm], a: usize, b: usize) -> Result<bool> {
    let first: Vec<usize> = (0..a).collect();
    let second: Vec<usize> = (a..=a + b).collect();
    let lhs = bracket(u, &first)?.wedge(&bracket(u, &second)?)?;
    let mut rhs = PolyForm::zero(lhs.host().clone(), lhs.degree());
    for i in 0..a {
        let rest: Vec<usize> = (0..=a + b).filter(|&j| j != i).collect();
        let term = u[i].wedge(&bracket(u, &rest)?)?;
        rhs = rhs.add(&if i % 2 == 0 { term } else { term.scale(&-Q::one()) })?;
    }
    if a.is_multiple_of(2) {
        rhs = rhs.scale(&-Q::one());
    }
    Ok(lhs == rhs)
}

/// A failed closure trial with the full coefficients of both factors.
#[derive(Clone, Debug)]
pub struct WedgeFailure {
    pub trial: usize,
    pub u: SparseVec,
    pub v: SparseVec,
}

/// Result of [`verify_wedge_closure`].
#[derive(Clone, Debug)]
pub struct WedgeReport {
    pub k: usize,
    pub m: usize,
    pub l: usize,
    pub n: usize,
    pub seed: u64,
    pub trials: usize,
    pub failures: Vec<WedgeFailure>,
    pub bracket_trials: usize,
    pub bracket_failures: usize,
    pub dims: [usize; 3],
}

impl WedgeReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty() && self.bracket_failures == 0
    }

    pub fn to_json(&self) -> Value {
        let coeffs = |v: &SparseVec| -> Value {
            Value::Object(v.entries().iter().map(|(i, c)| (i.to_string(), Value::String(format_fraction(c)))).collect())
        };
        json!({
            "k": self.k, "m": self.m, "l": self.l, "n": self.n,
            "dims": self.dims,
            "trials": self.trials,
            "ok": self.ok(),
            "failures": self.failures.iter().map(|f| json!({"trial": f.trial, "u": coeffs(&f.u), "v": coeffs(&f.v)})).collect::<Vec<_>>(),
            "bracket": {"trials": self.bracket_trials, "failures": self.bracket_failures},
            "seed": self.seed,
        })
    }
}

pub(crate) fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Random trials of `X^k_m ∧ X^l_n ⊆ X^{k+l}_{m+n}` plus the bracket identity on random hat families.
pub fn verify_wedge_closure(
    k: &SimplicialComplex,
    (deg_u, m): (usize, usize),
    (deg_v, n): (usize, usize),
    trials: usize,
    seed: u64,
) -> Result<WedgeReport> {
    if deg_u + deg_v > k.dim() {
        return Err(FeecError::DegreeOutOfRange { degree: deg_u + deg_v, min: 0, max: k.dim() });
    }
    let xu = highorder_span(k, deg_u, m)?;
    let xv = highorder_span(k, deg_v, n)?;
    let target = highorder_span(k, deg_u + deg_v, m + n)?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<Option<WedgeFailure>> {
            let mut rng = trial_rng(seed, trial);
            let cu = xu.random_coefficients(&mut rng);
            let cv = xv.random_coefficients(&mut rng);
            let (u, v) = (xu.combine(&cu)?, xv.combine(&cv)?);
            let mut product = BTreeMap::new();
            for (s, a) in &u {
                if let Some(b) = v.get(s) {
                    let w = a.wedge(b)?;
                    if !w.is_zero() && !w.is_truncated() {
                        product.insert(s.clone(), w);
                    }
                }
            }
            Ok(match target.membership_top(&product)? {
                Membership::Member(_) => None,
                Membership::NotInSpan => Some(WedgeFailure { trial, u: cu, v: cv }),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let failures: Vec<WedgeFailure> = outcomes.into_iter().flatten().collect();

    // the bracket identity with a + b + 1 random affine functions, a = deg_u + 1, b = deg_v
    let host = k.maximal_simplices().iter().max_by_key(|s| s.dim()).cloned().ok_or(FeecError::EmptyComplex)?;
    let (a, b) = (deg_u + 1, deg_v);
    let mut bracket_failures = 0;
    let mut bracket_trials = 0;
    if a + b - 1 <= host.dim() {
        let mut rng = trial_rng(seed, usize::MAX);
        for _ in 0..trials {
            let u: Vec<PolyForm> = (0..=a + b)
                .map(|_| {
                    (0..host.vertices().len()).fold(PolyForm::zero(host.clone(), 0), |acc, i| {
                        acc.add(&PolyForm::lambda(host.clone(), i).scale(&random_coefficient(&mut rng)))
                            .expect("same host")
                    })
                })
                .collect();
            bracket_trials += 1;
            if !bracket_identity_holds(&u, a, b)? {
                bracket_failures += 1;
            }
        }
    }
    Ok(WedgeReport {
        k: deg_u,
        m,
        l: deg_v,
        n,
        seed,
        trials,
        failures,
        bracket_trials,
        bracket_failures,
        dims: [xu.dim(), xv.dim(), target.dim()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use crate::simplicial::{generate, MeshKind};

    fn s(v: &[usize]) -> Simplex {
        Simplex::new(v.to_vec()).unwrap()
    }

    fn tri() -> Simplex {
        s(&[0, 1, 2])
    }

    fn l(i: usize) -> PolyForm {
        PolyForm::lambda(tri(), i)
    }

    fn dl(i: usize) -> PolyForm {
        PolyForm::dlambda(tri(), i)
    }

    #[test]
    fn whitney_formula_examples() {
        assert_eq!(whitney_component(&tri(), &s(&[1])).unwrap(), l(1));
        let w01 = l(0).wedge(&dl(1)).unwrap().sub(&l(1).wedge(&dl(0)).unwrap()).unwrap();
        assert_eq!(whitney_component(&tri(), &s(&[0, 1])).unwrap(), w01);
        let w012 = l(0)
            .wedge(&dl(1).wedge(&dl(2)).unwrap())
            .unwrap()
            .sub(&l(1).wedge(&dl(0).wedge(&dl(2)).unwrap()).unwrap())
            .unwrap()
            .add(&l(2).wedge(&dl(0).wedge(&dl(1)).unwrap()).unwrap())
            .unwrap()
            .scale(&qi(2));
        assert_eq!(whitney_component(&tri(), &tri()).unwrap(), w012);
        assert!(whitney_component(&s(&[0, 1]), &s(&[2])).is_err());
    }

    #[test]
    fn duality_is_identity() {
        for kind in [MeshKind::Simplex(3), MeshKind::Book] {
            let k = generate(kind).unwrap().complex;
            for deg in 0..=k.dim() {
                assert_eq!(duality_matrix(&k, deg).unwrap(), SparseMatrix::identity(k.count(deg)));
            }
        }
    }

    #[test]
    fn constant_form_dof_on_unit_edge() {
        let e = s(&[0, 1]);
        let u = CompatibleForm::from_components(1, [PolyForm::dlambda(e.clone(), 1).scale(&q(3, 2))]).unwrap();
        // hand integral: ∫_0^1 (3/2) dt along the edge
        assert_eq!(dof(&u, &e).unwrap(), q(3, 2));
        assert!(dof(&u, &s(&[0])).is_err());
    }

    #[test]
    fn cochain_form_round_trip() {
        let k = generate(MeshKind::Sphere(2)).unwrap().complex;
        let t = s(&[0, 2]);
        let ind = Cochain::indicator(&k, &t).unwrap();
        assert_eq!(cochain_to_form(&k, &ind).unwrap(), whitney_form(&k, &t).unwrap());
        assert_eq!(interpolate(&whitney_form(&k, &t).unwrap(), &k, 1).unwrap(), ind);
        assert!(cochain_to_form(&k, &Cochain::zero(&k, 1)).unwrap().is_zero());
        assert_eq!(interpolate(&CompatibleForm::zero(1), &k, 1).unwrap(), Cochain::zero(&k, 1));
        let json = ind.to_json(&k);
        assert_eq!(Cochain::from_json(&k, &json).unwrap(), ind);
    }

    #[test]
    fn coboundary_of_indicator_is_derivative() {
        let k = generate(MeshKind::Simplex(2)).unwrap().complex;
        let t = s(&[0, 1]);
        let d = k.coboundary(1);
        let c = Cochain::exact(2, d.mul_vec(&Cochain::indicator(&k, &t).unwrap().to_sparse().unwrap()).to_dense(1));
        assert_eq!(cochain_to_form(&k, &c).unwrap(), whitney_form(&k, &t).unwrap().d());
    }

    #[test]
    fn partition_of_unity() {
        let k = generate(MeshKind::Book).unwrap().complex;
        let ones = Cochain::exact(0, vec![qi(1); k.count(0)]);
        let form = cochain_to_form(&k, &ones).unwrap();
        for (host, comp) in form.components() {
            assert_eq!(comp, &PolyForm::constant(host.clone(), qi(1)));
        }
        assert_eq!(form.components().len(), k.total_count());
    }

    #[test]
    fn highorder_dimensions() {
        let edge = SimplicialComplex::build_closure(&[vec![0, 1]]).unwrap();
        assert_eq!(highorder_span(&edge, 0, 2).unwrap().dim(), 3);
        let t = SimplicialComplex::build_closure(&[vec![0, 1, 2]]).unwrap();
        let x12 = highorder_span(&t, 1, 2).unwrap();
        assert_eq!(x12.generators.len(), 9);
        assert_eq!(x12.dim(), 8);
        let torus = generate(MeshKind::FlatTorus(3, 3)).unwrap().complex;
        for deg in 0..=2 {
            assert_eq!(highorder_span(&torus, deg, 1).unwrap().dim(), torus.count(deg));
        }
    }

    #[test]
    fn brute_force_rank_of_first_order_products() {
        // λ_i λ_{jk} on a triangle: nine products, the single relation Σ_i λ_i λ_{jk} cycles
        // λ0 λ12 - λ1 λ02 + λ2 λ01 = 0, checked by expanding every product independently.
        let mut cols = Vec::new();
        let edges = [s(&[0, 1]), s(&[0, 2]), s(&[1, 2])];
        let mut frame: Vec<Key> = Vec::new();
        for e in &edges {
            for i in 0..3 {
                let p = l(i).wedge(&whitney_component(&tri(), e).unwrap()).unwrap();
                let mut col = Vec::new();
                for (key, c) in p.terms() {
                    let idx = frame.iter().position(|f| f == key).unwrap_or_else(|| {
                        frame.push(key.clone());
                        frame.len() - 1
                    });
                    col.push((idx, c.clone()));
                }
                cols.push(col);
            }
        }
        let m = SparseMatrix::from_columns(frame.len(), cols.into_iter().map(SparseVec::from_entries).collect());
        assert_eq!(m.rank(), 8);
        let relation = l(0)
            .wedge(&whitney_component(&tri(), &edges[2]).unwrap())
            .unwrap()
            .sub(&l(1).wedge(&whitney_component(&tri(), &edges[1]).unwrap()).unwrap())
            .unwrap()
            .add(&l(2).wedge(&whitney_component(&tri(), &edges[0]).unwrap()).unwrap())
            .unwrap();
        assert!(relation.is_zero());
    }

    #[test]
    fn membership_examples() {
        let k = SimplicialComplex::build_closure(&[vec![0, 1, 2]]).unwrap();
        let x1 = highorder_span(&k, 1, 1).unwrap();
        let e = s(&[0, 2]);
        match membership(&whitney_form(&k, &e).unwrap(), &x1).unwrap() {
            Membership::Member(c) => {
                let g = x1.generators.iter().position(|g| g.whitney.as_ref() == Some(&e)).unwrap();
                assert_eq!(c, SparseVec::unit(g));
            }
            Membership::NotInSpan => panic!("λ_T must lie in X^k_1"),
        }
        let x22 = highorder_span(&k, 2, 2).unwrap();
        let prod =
            CompatibleForm::from_components(2, [l(1).wedge(&whitney_component(&tri(), &tri()).unwrap()).unwrap()])
                .unwrap();
        assert!(membership(&prod, &x22).unwrap().is_member());
        // dλ1∧dλ2 = λ_{012}/2 on a single triangle
        let x21 = highorder_span(&k, 2, 1).unwrap();
        let area = CompatibleForm::from_components(2, [dl(1).wedge(&dl(2)).unwrap()]).unwrap();
        assert_eq!(membership(&area, &x21).unwrap(), Membership::Member(SparseVec::from_entries(vec![(0, q(1, 2))])));
        // a quadratic function is not a Whitney 0-form
        let x01 = highorder_span(&k, 0, 1).unwrap();
        let sq =
            CompatibleForm::from_maximal(&k, 0, &[(tri(), l(1).wedge(&l(1)).unwrap())].into_iter().collect()).unwrap();
        assert_eq!(membership(&sq, &x01).unwrap(), Membership::NotInSpan);
    }

    #[test]
    fn worked_wedge_identity() {
        let w01 = whitney_component(&tri(), &s(&[0, 1])).unwrap();
        let w12 = whitney_component(&tri(), &s(&[1, 2])).unwrap();
        let w012 = whitney_component(&tri(), &tri()).unwrap();
        let lhs = w01.wedge(&w12).unwrap();
        assert_eq!(lhs, l(1).wedge(&w012).unwrap().scale(&q(1, 2)));
        // independent expansion: λ0λ1 dλ1∧dλ2 − λ1² dλ0∧dλ2 + λ1λ2 dλ0∧dλ1
        let expansion = l(0)
            .wedge(&l(1))
            .unwrap()
            .wedge(&dl(1).wedge(&dl(2)).unwrap())
            .unwrap()
            .sub(&l(1).wedge(&l(1)).unwrap().wedge(&dl(0).wedge(&dl(2)).unwrap()).unwrap())
            .unwrap()
            .add(&l(1).wedge(&l(2)).unwrap().wedge(&dl(0).wedge(&dl(1)).unwrap()).unwrap())
            .unwrap();
        assert_eq!(lhs, expansion);
    }

    #[test]
    fn bracket_identity_by_hand_case() {
        // a = 2, b = 0: u_[01] ∧ u_[2] = -(u_0 u_[12] - u_1 u_[02])
        let u = vec![l(0).add(&l(1)).unwrap(), l(2).scale(&qi(3)), l(1).sub(&l(0)).unwrap()];
        assert!(bracket_identity_holds(&u, 2, 0).unwrap());
        let lhs = bracket(&u, &[0, 1]).unwrap().wedge(&u[2]).unwrap();
        let rhs = u[0]
            .wedge(&bracket(&u, &[1, 2]).unwrap())
            .unwrap()
            .sub(&u[1].wedge(&bracket(&u, &[0, 2]).unwrap()).unwrap())
            .unwrap()
            .scale(&qi(-1));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn wedge_closure_on_a_triangle() {
        let k = SimplicialComplex::build_closure(&[vec![0, 1, 2]]).unwrap();
        let r = verify_wedge_closure(&k, (1, 1), (1, 1), 10, 3).unwrap();
        assert!(r.ok(), "{:?}", r.to_json());
        let r = verify_wedge_closure(&k, (0, 1), (0, 1), 10, 3).unwrap();
        assert!(r.ok());
    }

    #[test]
    fn nestedness_under_subdivision() {
        let coarse = generate(MeshKind::Simplex(2)).unwrap();
        let sub = coarse.subdivide().unwrap();
        let fine = &sub.mesh.complex;
        for deg in 0..=2 {
            let p = prolongation(&coarse.complex, &sub, deg).unwrap();
            for (c, t) in coarse.complex.simplices(deg).iter().enumerate() {
                let fine_form =
                    cochain_to_form(fine, &Cochain::exact(deg, p.column(c).to_dense(fine.count(deg)))).unwrap();
                for top in fine.simplices(2) {
                    let carrier = sub.carrier(top);
                    let images: Vec<Vec<Q>> = top.vertices().iter().map(|&v| sub.barycentric(v, &carrier)).collect();
                    let coarse_piece = whitney_component(&carrier, t)
                        .map(|w| w.pullback(top, &images).unwrap())
                        .unwrap_or_else(|_| PolyForm::zero(top.clone(), deg));
                    assert_eq!(fine_form.component(top), coarse_piece);
                }
            }
        }
    }
}
