//! Polynomial differential forms in barycentric coordinates.
//!
//! A [`PolyForm`] on a `d`-simplex is a finite sum of terms `c λ^α dλ_I` over
//! the local barycentric coordinates `λ_0..λ_d`. The stored normal form never
//! mentions `λ_0` or `dλ_0`: they are replaced by `1 - Σ λ_i` and `-Σ dλ_i`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{FeecError, Result};
use crate::quadrature::SimplexRule;
use crate::rational::{factorial, format_fraction, parse_rational, to_f64, Q};
use crate::simplicial::{determinant, AffineRealization, Simplex, SimplicialComplex};

/// Exponents over all local coordinates and a bitmask of differentials.
pub type Key = (Vec<u32>, u32);

type Terms = BTreeMap<Key, Q>;
type Poly = BTreeMap<Vec<u32>, Q>;

fn accumulate<K: Ord>(map: &mut BTreeMap<K, Q>, key: K, value: Q) {
    if value.is_zero() {
        return;
    }
    match map.entry(key) {
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert(value);
        }
        std::collections::btree_map::Entry::Occupied(mut e) => {
            *e.get_mut() += value;
            if e.get().is_zero() {
                e.remove();
            }
        }
    }
}

fn sign(odd: bool) -> Q {
    if odd {
        -Q::one()
    } else {
        Q::one()
    }
}

/// Sign of `dλ_j ∧ dλ_I` relative to the sorted wedge.
fn insert_parity(mask: u32, j: usize) -> bool {
    (mask & ((1u32 << j) - 1)).count_ones() % 2 == 1
}

/// Sign of `dλ_I ∧ dλ_J` relative to the sorted wedge of `I ∪ J`.
fn merge_parity(i: u32, j: u32) -> bool {
    let mut inversions = 0;
    for b in bits(j) {
        inversions += (i >> (b + 1)).count_ones();
    }
    inversions % 2 == 1
}

fn bits(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |b| mask & (1 << b) != 0)
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (x, c) in a {
        for (y, e) in b {
            let z: Vec<u32> = x.iter().zip(y).map(|(p, q)| p + q).collect();
            accumulate(&mut out, z, c * e);
        }
    }
    out
}

fn poly_pow(base: &Poly, n: u32, vars: usize) -> Poly {
    let mut out: Poly = [(vec![0; vars], Q::one())].into_iter().collect();
    for _ in 0..n {
        out = poly_mul(&out, base);
    }
    out
}

/// Rewrites `terms` without `λ_e` and `dλ_e`.
fn eliminate(terms: Terms, e: usize, vars: usize) -> Terms {
    let mut powers: HashMap<u32, Poly> = HashMap::new();
    let mut complement: Poly = Poly::new();
    complement.insert(vec![0; vars], Q::one());
    for i in (0..vars).filter(|&i| i != e) {
        let mut m = vec![0; vars];
        m[i] = 1;
        complement.insert(m, -Q::one());
    }
    let mut out = Terms::new();
    for ((alpha, mask), c) in terms {
        let forms: Vec<(u32, Q)> = if mask & (1 << e) != 0 {
            let rest = mask & !(1 << e);
            let base_odd = insert_parity(mask, e);
            (0..vars)
                .filter(|&j| j != e && rest & (1 << j) == 0)
                .map(|j| (rest | (1 << j), -sign(base_odd ^ insert_parity(rest, j))))
                .collect()
        } else {
            vec![(mask, Q::one())]
        };
        let a = alpha[e];
        let mut rest_alpha = alpha.clone();
        rest_alpha[e] = 0;
        let expansion = powers.entry(a).or_insert_with(|| poly_pow(&complement, a, vars));
        for (beta, pc) in expansion.iter() {
            let gamma: Vec<u32> = rest_alpha.iter().zip(beta).map(|(x, y)| x + y).collect();
            for (m, s) in &forms {
                accumulate(&mut out, (gamma.clone(), *m), &c * pc * s);
            }
        }
    }
    out
}

/// Value of `∫ λ^α` over the standard simplex of dimension `d` with unit Lebesgue measure.
fn dirichlet(alpha: &[u32], d: usize) -> Q {
    let num: BigInt = alpha.iter().map(|&a| factorial(a as usize)).product();
    let total: usize = alpha.iter().map(|&a| a as usize).sum();
    Q::new(num, factorial(d + total))
}

/// A polynomial differential form on one simplex.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyForm {
    host: Simplex,
    degree: usize,
    terms: Terms,
}

impl fmt::Debug for PolyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PolyForm(on {}, degree {}: {})", self.host, self.degree, self)
    }
}

impl fmt::Display for PolyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, ((alpha, mask), c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", format_fraction(c))?;
            for (i, a) in alpha.iter().enumerate().filter(|(_, a)| **a > 0) {
                if *a == 1 {
                    write!(f, " λ{i}")?;
                } else {
                    write!(f, " λ{i}^{a}")?;
                }
            }
            let ds: Vec<String> = bits(*mask).map(|b| format!("dλ{b}")).collect();
            if !ds.is_empty() {
                write!(f, " {}", ds.join("∧"))?;
            }
        }
        Ok(())
    }
}

impl PolyForm {
    fn vars(&self) -> usize {
        self.host.vertices().len()
    }

    fn from_terms_raw(host: Simplex, degree: usize, terms: Terms) -> Self {
        let vars = host.vertices().len();
        let terms = if terms.keys().any(|(a, m)| a[0] != 0 || m & 1 != 0) { eliminate(terms, 0, vars) } else { terms };
        PolyForm { host, degree, terms }
    }

    pub fn zero(host: Simplex, degree: usize) -> Self {
        PolyForm { host, degree, terms: Terms::new() }
    }

    pub fn constant(host: Simplex, c: Q) -> Self {
        let vars = host.vertices().len();
        let mut terms = Terms::new();
        accumulate(&mut terms, (vec![0; vars], 0), c);
        PolyForm { host, degree: 0, terms }
    }

    /// `coef λ^α dλ_I` with `α` and `I` over local indices `0..=d` (index 0 allowed).
    pub fn monomial(host: Simplex, alpha: &[u32], dl: &[usize], coef: Q) -> Result<Self> {
        let vars = host.vertices().len();
        if alpha.len() != vars || dl.iter().any(|&i| i >= vars) {
            return Err(FeecError::Shape(format!("monomial does not fit the {}-simplex {host}", vars - 1)));
        }
        let mut mask = 0u32;
        let mut odd = false;
        for &i in dl {
            if mask & (1 << i) != 0 {
                return Ok(PolyForm::zero(host, dl.len()));
            }
            odd ^= (mask >> (i + 1)).count_ones() % 2 == 1;
            mask |= 1 << i;
        }
        let mut terms = Terms::new();
        accumulate(&mut terms, (alpha.to_vec(), mask), coef * sign(odd));
        Ok(Self::from_terms_raw(host, dl.len(), terms))
    }

    /// The barycentric coordinate `λ_i` of local vertex `i`.
    pub fn lambda(host: Simplex, i: usize) -> Self {
        let mut alpha = vec![0; host.vertices().len()];
        alpha[i] = 1;
        Self::monomial(host, &alpha, &[], Q::one()).expect("index within host")
    }

    /// The differential `dλ_i` of local vertex `i`.
    pub fn dlambda(host: Simplex, i: usize) -> Self {
        let alpha = vec![0; host.vertices().len()];
        Self::monomial(host, &alpha, &[i], Q::one()).expect("index within host")
    }

    pub fn host(&self) -> &Simplex {
        &self.host
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Terms of the normal form: exponents and differential mask over local indices.
    pub fn terms(&self) -> &BTreeMap<Key, Q> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when the degree exceeds the host dimension, so the form vanishes identically.
    pub fn is_truncated(&self) -> bool {
        self.degree > self.host.dim()
    }

    /// Largest total polynomial degree among the terms.
    pub fn poly_degree(&self) -> u32 {
        self.terms.keys().map(|(a, _)| a.iter().sum()).max().unwrap_or(0)
    }

    fn check_same(&self, other: &PolyForm) -> Result<()> {
        if self.host != other.host {
            return Err(FeecError::HostMismatch { left: self.host.clone(), right: other.host.clone() });
        }
        Ok(())
    }

    pub fn add(&self, other: &PolyForm) -> Result<PolyForm> {
        self.check_same(other)?;
        if self.degree != other.degree {
            return Err(FeecError::DegreeMismatch { expected: self.degree, found: other.degree });
        }
        let mut terms = self.terms.clone();
        for (k, c) in &other.terms {
            accumulate(&mut terms, k.clone(), c.clone());
        }
        Ok(PolyForm { host: self.host.clone(), degree: self.degree, terms })
    }

    pub fn sub(&self, other: &PolyForm) -> Result<PolyForm> {
        self.add(&other.scale(&-Q::one()))
    }

    pub fn scale(&self, c: &Q) -> PolyForm {
        if c.is_zero() {
            return PolyForm::zero(self.host.clone(), self.degree);
        }
        PolyForm {
            host: self.host.clone(),
            degree: self.degree,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    /// Exterior product; a degree above the host dimension yields a truncated zero form.
    pub fn wedge(&self, other: &PolyForm) -> Result<PolyForm> {
        self.check_same(other)?;
        let degree = self.degree + other.degree;
        let mut terms = Terms::new();
        if degree <= self.host.dim() {
            for ((a, i), c) in &self.terms {
                for ((b, j), e) in &other.terms {
                    if i & j != 0 {
                        continue;
                    }
                    let alpha: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                    accumulate(&mut terms, (alpha, i | j), c * e * sign(merge_parity(*i, *j)));
                }
            }
        }
        Ok(PolyForm { host: self.host.clone(), degree, terms })
    }

    /// Exterior derivative.
    pub fn d(&self) -> PolyForm {
        let mut terms = Terms::new();
        for ((alpha, mask), c) in &self.terms {
            for j in 0..alpha.len() {
                if alpha[j] == 0 || mask & (1 << j) != 0 {
                    continue;
                }
                let mut a = alpha.clone();
                a[j] -= 1;
                let coef = c * Q::from_integer(alpha[j].into()) * sign(insert_parity(*mask, j));
                accumulate(&mut terms, (a, mask | (1 << j)), coef);
            }
        }
        PolyForm { host: self.host.clone(), degree: self.degree + 1, terms }
    }

    /// Pullback along the inclusion of a face.
    pub fn trace_to_face(&self, face: &Simplex) -> Result<PolyForm> {
        if !face.is_face_of(&self.host) {
            return Err(FeecError::NotAFace { face: face.clone(), host: self.host.clone() });
        }
        if face == &self.host {
            return Ok(self.clone());
        }
        let map: Vec<Option<usize>> = self.host.vertices().iter().map(|&v| face.position(v)).collect();
        let vars = face.vertices().len();
        let mut terms = Terms::new();
        'terms: for ((alpha, mask), c) in &self.terms {
            let mut a = vec![0; vars];
            let mut m = 0u32;
            for (i, target) in map.iter().enumerate() {
                match target {
                    Some(t) => {
                        a[*t] = alpha[i];
                        if mask & (1 << i) != 0 {
                            m |= 1 << t;
                        }
                    }
                    None if alpha[i] > 0 || mask & (1 << i) != 0 => continue 'terms,
                    None => {}
                }
            }
            accumulate(&mut terms, (a, m), c.clone());
        }
        Ok(Self::from_terms_raw(face.clone(), self.degree, terms))
    }

    /// Pullback along the affine map sending vertex `j` of `target` to the point
    /// with barycentric coordinates `images[j]` in the host.
    pub fn pullback(&self, target: &Simplex, images: &[Vec<Q>]) -> Result<PolyForm> {
        let (n, vars) = (target.vertices().len(), self.vars());
        if images.len() != n || images.iter().any(|p| p.len() != vars) {
            return Err(FeecError::Shape("pullback images do not match the simplices".into()));
        }
        let linear: Vec<Poly> = (0..vars)
            .map(|i| {
                let mut p = Poly::new();
                for (j, img) in images.iter().enumerate() {
                    let mut e = vec![0; n];
                    e[j] = 1;
                    accumulate(&mut p, e, img[i].clone());
                }
                p
            })
            .collect();
        let subsets: Vec<u32> = (0u32..1 << n).filter(|m| m.count_ones() as usize == self.degree).collect();
        let mut terms = Terms::new();
        for ((alpha, mask), c) in &self.terms {
            let mut poly: Poly = [(vec![0; n], c.clone())].into_iter().collect();
            for (i, &a) in alpha.iter().enumerate() {
                if a > 0 {
                    poly = poly_mul(&poly, &poly_pow(&linear[i], a, n));
                }
            }
            let rows: Vec<usize> = bits(*mask).collect();
            for &sub in &subsets {
                let cols: Vec<usize> = bits(sub).collect();
                let minor: Vec<Vec<Q>> =
                    rows.iter().map(|&i| cols.iter().map(|&j| images[j][i].clone()).collect()).collect();
                let det = determinant(&minor);
                if det.is_zero() {
                    continue;
                }
                for (e, pc) in &poly {
                    accumulate(&mut terms, (e.clone(), sub), pc * &det);
                }
            }
        }
        Ok(Self::from_terms_raw(target.clone(), self.degree, terms))
    }

    /// Oriented integral of a top-degree form over its host (metric-free).
    pub fn integrate(&self) -> Result<Q> {
        let d = self.host.dim();
        if self.degree != d {
            return Err(FeecError::DegreeMismatch { expected: d, found: self.degree });
        }
        Ok(self.terms.iter().map(|((alpha, _), c)| c * dirichlet(alpha, d)).sum())
    }

    /// Integral of a 0-form against the volume measure of the realized host.
    pub fn integrate_density(&self, r: &AffineRealization) -> Result<VolumeScaled> {
        if self.degree != 0 {
            return Err(FeecError::DegreeMismatch { expected: 0, found: self.degree });
        }
        let d = self.host.dim();
        let fd = Q::from_integer(factorial(d));
        let factor: Q = self.terms.iter().map(|((alpha, _), c)| c * dirichlet(alpha, d) * &fd).sum();
        Ok(VolumeScaled { factor, volume: r.volume(&self.host)? })
    }

    /// Value at local vertex `i`.
    pub fn value_at_vertex(&self, i: usize) -> Result<Q> {
        if self.degree != 0 {
            return Err(FeecError::DegreeMismatch { expected: 0, found: self.degree });
        }
        Ok(self
            .terms
            .iter()
            .filter(|((alpha, _), _)| alpha.iter().enumerate().all(|(j, &a)| a == 0 || j == i))
            .map(|(_, c)| c.clone())
            .sum())
    }

    /// Koszul homotopy toward the vertex `base` of the host.
    ///
    /// With `y_i = λ_i` (`i ≠ base`) as linear coordinates centred at `base`,
    /// `A(y^α dy_I) = Σ_r (-1)^r y^{α + e_{i_r}} dy_{I \ i_r} / (|α| + k)`.
    pub fn koszul(&self, base: usize) -> Result<PolyForm> {
        let b = self
            .host
            .position(base)
            .ok_or_else(|| FeecError::NotAFace { face: Simplex::vertex(base), host: self.host.clone() })?;
        if self.degree == 0 {
            return Err(FeecError::KoszulOfFunction);
        }
        let vars = self.vars();
        let framed = if b == 0 { self.terms.clone() } else { eliminate(self.terms.clone(), b, vars) };
        let mut terms = Terms::new();
        for ((alpha, mask), c) in framed {
            let weight = alpha.iter().sum::<u32>() as i64 + self.degree as i64;
            let scaled = &c / Q::from_integer(weight.into());
            for (r, i) in bits(mask).enumerate() {
                let mut a = alpha.clone();
                a[i] += 1;
                accumulate(&mut terms, (a, mask & !(1 << i)), &scaled * sign(r % 2 == 1));
            }
        }
        Ok(Self::from_terms_raw(self.host.clone(), self.degree - 1, terms))
    }

    /// Evaluates at a barycentric point on barycentric tangent directions.
    pub fn eval(&self, point: &[f64], directions: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for ((alpha, mask), c) in &self.terms {
            let mono: f64 = alpha.iter().zip(point).map(|(&a, x)| x.powi(a as i32)).product();
            if mono == 0.0 {
                continue;
            }
            let rows: Vec<usize> = bits(*mask).collect();
            let det = if rows.is_empty() {
                1.0
            } else {
                let m = nalgebra::DMatrix::from_fn(rows.len(), rows.len(), |r, s| directions[s][rows[r]]);
                m.determinant()
            };
            total += to_f64(c) * mono * det;
        }
        total
    }

    /// A random form with up to `n_terms` terms of polynomial degree at most `max_degree`,
    /// coefficients drawn from `{-9..9}/{1..9}`.
    pub fn random(host: Simplex, degree: usize, max_degree: u32, n_terms: usize, rng: &mut impl Rng) -> PolyForm {
        let vars = host.vertices().len();
        let mut out = PolyForm::zero(host.clone(), degree);
        if degree > host.dim() {
            return out;
        }
        for _ in 0..n_terms {
            let total = rng.random_range(0..=max_degree);
            let mut alpha = vec![0u32; vars];
            for _ in 0..total {
                alpha[rng.random_range(0..vars)] += 1;
            }
            let mut idx: Vec<usize> = (0..vars).collect();
            for i in (1..vars).rev() {
                idx.swap(i, rng.random_range(0..=i));
            }
            let mut dl = idx[..degree].to_vec();
            dl.sort_unstable();
            let term = PolyForm::monomial(host.clone(), &alpha, &dl, random_coefficient(rng)).expect("fits host");
            out = out.add(&term).expect("same host and degree");
        }
        out
    }

    /// JSON list of terms: `alpha` over local indices `1..=d`, `I` as local indices.
    pub fn terms_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|((alpha, mask), c)| {
                    json!({
                        "alpha": alpha[1..].to_vec(),
                        "I": bits(*mask).collect::<Vec<_>>(),
                        "coef": format_fraction(c),
                    })
                })
                .collect(),
        )
    }

    pub fn from_terms_json(host: Simplex, degree: usize, value: &Value) -> Result<PolyForm> {
        let bad = |m: &str| FeecError::Parse(format!("form component on {host}: {m}"));
        let list = value.as_array().ok_or_else(|| bad("expected a list of terms"))?;
        let d = host.dim();
        let mut out = PolyForm::zero(host.clone(), degree);
        for t in list {
            let alpha: Vec<u32> = t["alpha"]
                .as_array()
                .ok_or_else(|| bad("missing alpha"))?
                .iter()
                .map(|x| x.as_u64().and_then(|x| x.to_u32()).ok_or_else(|| bad("bad exponent")))
                .collect::<Result<_>>()?;
            let dl: Vec<usize> = t["I"]
                .as_array()
                .ok_or_else(|| bad("missing I"))?
                .iter()
                .map(|x| x.as_u64().map(|x| x as usize).ok_or_else(|| bad("bad index")))
                .collect::<Result<_>>()?;
            if alpha.len() != d || dl.len() != degree || dl.iter().any(|&i| i == 0 || i > d) {
                return Err(bad("term does not match host and degree"));
            }
            let coef = match &t["coef"] {
                Value::String(s) => parse_rational(s)?,
                Value::Number(n) => parse_rational(&n.to_string())?,
                _ => return Err(bad("bad coefficient")),
            };
            let mut full = vec![0];
            full.extend(alpha);
            out = out.add(&PolyForm::monomial(host.clone(), &full, &dl, coef)?)?;
        }
        Ok(out)
    }
}

pub(crate) fn random_coefficient(rng: &mut impl Rng) -> Q {
    Q::new(rng.random_range(-9i64..=9).into(), rng.random_range(1i64..=9).into())
}

/// An exact rational factor times a floating-point volume.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeScaled {
    pub factor: Q,
    pub volume: f64,
}

impl VolumeScaled {
    pub fn value(&self) -> f64 {
        to_f64(&self.factor) * self.volume
    }
}

/// A family of polynomial forms, one per simplex, agreeing under traces.
///
/// Components are stored sparsely: a missing simplex carries the zero form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompatibleForm {
    degree: usize,
    components: BTreeMap<Simplex, PolyForm>,
}

impl CompatibleForm {
    pub fn zero(degree: usize) -> Self {
        CompatibleForm { degree, components: BTreeMap::new() }
    }

    /// Builds from components, dropping zeros; no compatibility check is made.
    pub fn from_components(degree: usize, components: impl IntoIterator<Item = PolyForm>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for c in components {
            if c.degree != degree {
                return Err(FeecError::DegreeMismatch { expected: degree, found: c.degree });
            }
            if !c.is_zero() {
                map.insert(c.host.clone(), c);
            }
        }
        Ok(CompatibleForm { degree, components: map })
    }

    /// Extends components given on maximal simplices to every face by traces.
    pub fn from_maximal(k: &SimplicialComplex, degree: usize, top: &BTreeMap<Simplex, PolyForm>) -> Result<Self> {
        let mut out = BTreeMap::new();
        for s in k.iter().filter(|s| s.dim() >= degree) {
            let comp = match top.get(s) {
                Some(c) => c.clone(),
                None => match k.maximal_simplices().iter().find(|m| s.is_face_of(m)).and_then(|m| top.get(m)) {
                    Some(c) => c.trace_to_face(s)?,
                    None => continue,
                },
            };
            if comp.degree != degree {
                return Err(FeecError::DegreeMismatch { expected: degree, found: comp.degree });
            }
            if !comp.is_zero() {
                out.insert(s.clone(), comp);
            }
        }
        Ok(CompatibleForm { degree, components: out })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &BTreeMap<Simplex, PolyForm> {
        &self.components
    }

    pub fn component(&self, t: &Simplex) -> PolyForm {
        self.components.get(t).cloned().unwrap_or_else(|| PolyForm::zero(t.clone(), self.degree))
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(&PolyForm, &PolyForm) -> Result<PolyForm>,
        degree: usize,
    ) -> Result<Self> {
        let keys: std::collections::BTreeSet<&Simplex> =
            self.components.keys().chain(other.components.keys()).collect();
        let comps = keys.into_iter().map(|s| f(&self.component(s), &other.component(s))).collect::<Result<Vec<_>>>()?;
        Self::from_components(degree, comps.into_iter().filter(|c| c.degree == degree))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.degree != other.degree {
            return Err(FeecError::DegreeMismatch { expected: self.degree, found: other.degree });
        }
        self.zip_with(other, PolyForm::add, self.degree)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-Q::one()))
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero(self.degree);
        }
        CompatibleForm {
            degree: self.degree,
            components: self.components.iter().map(|(s, p)| (s.clone(), p.scale(c))).collect(),
        }
    }

    /// Componentwise wedge, restricted to simplices of dimension at least the summed degree.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        let degree = self.degree + other.degree;
        let comps = self
            .components
            .iter()
            .filter(|(s, _)| s.dim() >= degree)
            .filter_map(|(s, u)| other.components.get(s).map(|v| u.wedge(v)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_components(degree, comps)
    }

    pub fn d(&self) -> Self {
        let degree = self.degree + 1;
        CompatibleForm {
            degree,
            components: self
                .components
                .iter()
                .filter(|(s, _)| s.dim() >= degree)
                .map(|(s, u)| (s.clone(), u.d()))
                .filter(|(_, u)| !u.is_zero())
                .collect(),
        }
    }

    /// First simplex/facet pair whose trace disagrees, if any.
    pub fn compatibility_defect(&self, k: &SimplicialComplex) -> Result<Option<(Simplex, Simplex)>> {
        for s in k.iter().filter(|s| s.dim() > self.degree) {
            let u = self.component(s);
            for f in s.facets() {
                if u.trace_to_face(&f)? != self.component(&f) {
                    return Ok(Some((s.clone(), f)));
                }
            }
        }
        Ok(None)
    }

    /// `{"degree": k, "components": {"i0-i1-..": [{"alpha", "I", "coef"}, ..]}}`.
    pub fn to_json(&self) -> Value {
        let comps: serde_json::Map<String, Value> =
            self.components.iter().map(|(s, p)| (s.key(), p.terms_json())).collect();
        json!({ "degree": self.degree, "components": comps })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let degree = value["degree"].as_u64().ok_or_else(|| FeecError::Parse("form: missing degree".into()))? as usize;
        let comps =
            value["components"].as_object().ok_or_else(|| FeecError::Parse("form: missing components".into()))?;
        let parts = comps
            .iter()
            .map(|(key, terms)| PolyForm::from_terms_json(Simplex::parse_key(key)?, degree, terms))
            .collect::<Result<Vec<_>>>()?;
        Self::from_components(degree, parts)
    }
}

/// A form known only through pointwise evaluation.
///
/// `point` holds barycentric coordinates on `host`; each direction is a
/// barycentric tangent vector (entries summing to zero). Implementations
/// may be called from several threads at once.
pub trait EvaluableForm: Sync {
    fn degree(&self) -> usize;
    fn eval(&self, host: &Simplex, point: &[f64], directions: &[Vec<f64>]) -> f64;
}

impl EvaluableForm for CompatibleForm {
    fn degree(&self) -> usize {
        self.degree
    }

    fn eval(&self, host: &Simplex, point: &[f64], directions: &[Vec<f64>]) -> f64 {
        self.components.get(host).map(|p| p.eval(point, directions)).unwrap_or(0.0)
    }
}

type AmbientFn = dyn Fn(&[f64], &[Vec<f64>]) -> f64 + Send + Sync;

/// A form on the ambient space, restricted to each realized simplex.
pub struct AmbientForm {
    degree: usize,
    coords: HashMap<usize, Vec<f64>>,
    f: Box<AmbientFn>,
}

impl AmbientForm {
    /// `f(x, vectors)` evaluates the ambient `degree`-form at `x` on ambient vectors.
    pub fn new(
        r: &AffineRealization,
        degree: usize,
        f: impl Fn(&[f64], &[Vec<f64>]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let coords = r.coordinates().iter().map(|(v, p)| (*v, p.iter().map(to_f64).collect())).collect();
        AmbientForm { degree, coords, f: Box::new(f) }
    }

    fn to_ambient(&self, host: &Simplex, bary: &[f64]) -> Vec<f64> {
        let dim = self.coords.values().next().map(Vec::len).unwrap_or(0);
        let mut x = vec![0.0; dim];
        for (v, w) in host.vertices().iter().zip(bary) {
            for (a, c) in x.iter_mut().zip(&self.coords[v]) {
                *a += w * c;
            }
        }
        x
    }
}

impl EvaluableForm for AmbientForm {
    fn degree(&self) -> usize {
        self.degree
    }

    fn eval(&self, host: &Simplex, point: &[f64], directions: &[Vec<f64>]) -> f64 {
        let x = self.to_ambient(host, point);
        let vs: Vec<Vec<f64>> = directions.iter().map(|d| self.to_ambient(host, d)).collect();
        (self.f)(&x, &vs)
    }
}

/// The directions `e_i - e_0`, `i = 1..k`, in barycentric coordinates of a `k`-simplex.
pub fn edge_directions(k: usize) -> Vec<Vec<f64>> {
    (1..=k)
        .map(|i| {
            let mut v = vec![0.0; k + 1];
            v[0] = -1.0;
            v[i] = 1.0;
            v
        })
        .collect()
}

/// Oriented integral of an evaluable top-degree form over `t` with the default rule.
pub fn integrate_evaluable(u: &dyn EvaluableForm, t: &Simplex) -> Result<f64> {
    integrate_evaluable_with(u, t, &SimplexRule::default_for(t.dim()))
}

pub fn integrate_evaluable_with(u: &dyn EvaluableForm, t: &Simplex, rule: &SimplexRule) -> Result<f64> {
    let k = t.dim();
    if u.degree() != k {
        return Err(FeecError::DegreeMismatch { expected: k, found: u.degree() });
    }
    let dirs = edge_directions(k);
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    Ok(rule.mean(|p| u.eval(t, p, &dirs)) / fact)
}

/// Largest disagreement between an evaluable form on a simplex and on its facets,
/// over `samples` random points and directions per pair.
pub fn evaluable_compatibility_defect(
    u: &dyn EvaluableForm,
    k: &SimplicialComplex,
    samples: usize,
    rng: &mut impl Rng,
) -> f64 {
    let deg = u.degree();
    let mut worst: f64 = 0.0;
    for s in k.iter().filter(|s| s.dim() > deg) {
        for f in s.facets() {
            let embed = |v: &[f64]| -> Vec<f64> {
                s.vertices().iter().map(|x| f.position(*x).map(|i| v[i]).unwrap_or(0.0)).collect()
            };
            for _ in 0..samples {
                let mut p: Vec<f64> = (0..f.vertices().len()).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= total);
                let dirs: Vec<Vec<f64>> = (0..deg)
                    .map(|_| {
                        let mut d: Vec<f64> = (0..f.vertices().len()).map(|_| rng.random::<f64>() - 0.5).collect();
                        let mean = d.iter().sum::<f64>() / d.len() as f64;
                        d.iter_mut().for_each(|x| *x -= mean);
                        d
                    })
                    .collect();
                let on_face = u.eval(&f, &p, &dirs);
                let lifted: Vec<Vec<f64>> = dirs.iter().map(|d| embed(d)).collect();
                let on_host = u.eval(s, &embed(&p), &lifted);
                worst = worst.max((on_face - on_host).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tri() -> Simplex {
        Simplex::new(vec![0, 1, 2]).unwrap()
    }

    fn l(i: usize) -> PolyForm {
        PolyForm::lambda(tri(), i)
    }

    fn dl(i: usize) -> PolyForm {
        PolyForm::dlambda(tri(), i)
    }

    #[test]
    fn wedge_examples() {
        let prod = l(1).wedge(&l(2)).unwrap();
        assert_eq!(prod, PolyForm::monomial(tri(), &[0, 1, 1], &[], qi(1)).unwrap());
        assert!(dl(1).wedge(&dl(1)).unwrap().is_zero());
        let over = dl(1).wedge(&dl(2)).unwrap().wedge(&dl(0)).unwrap();
        assert!(over.is_zero() && over.is_truncated() && over.degree() == 3);
        let other = PolyForm::lambda(Simplex::new(vec![0, 1]).unwrap(), 1);
        assert!(matches!(l(1).wedge(&other), Err(FeecError::HostMismatch { .. })));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(l(1).d(), dl(1));
        let expected = l(2).wedge(&dl(1)).unwrap().add(&l(1).wedge(&dl(2)).unwrap()).unwrap();
        assert_eq!(l(1).wedge(&l(2)).unwrap().d(), expected);
    }

    #[test]
    fn derivative_of_edge_whitney_form() {
        // Independent expansion with λ0 = 1 - λ1 - λ2 and dλ0 = -dλ1 - dλ2:
        // λ0 dλ1 - λ1 dλ0 = (1 - λ2) dλ1 + λ1 dλ2, whose derivative is -dλ2∧dλ1 + dλ1∧dλ2 = 2 dλ1∧dλ2.
        let u = l(0).wedge(&dl(1)).unwrap().sub(&l(1).wedge(&dl(0)).unwrap()).unwrap();
        let expected = PolyForm::monomial(tri(), &[0, 0, 0], &[1, 2], qi(2)).unwrap();
        assert_eq!(u.d(), expected);
        let as_written = dl(0).wedge(&dl(1)).unwrap().scale(&qi(2));
        assert_eq!(u.d(), as_written);
    }

    #[test]
    fn trace_examples() {
        let u = l(0).wedge(&dl(1)).unwrap().sub(&l(1).wedge(&dl(0)).unwrap()).unwrap();
        let e01 = Simplex::new(vec![0, 1]).unwrap();
        let t = u.trace_to_face(&e01).unwrap();
        // on the edge: λ0 = 1 - λ1 and dλ0 = -dλ1, so (1 - λ1) dλ1 + λ1 dλ1 = dλ1
        assert_eq!(t, PolyForm::dlambda(e01.clone(), 1));
        assert_eq!(t, PolyForm::dlambda(e01.clone(), 0).scale(&qi(-1)));
        assert!(u.trace_to_face(&Simplex::new(vec![1, 2]).unwrap()).unwrap().is_zero());
        let c = PolyForm::constant(tri(), q(3, 7));
        let v = Simplex::vertex(2);
        assert_eq!(c.trace_to_face(&v).unwrap(), PolyForm::constant(v, q(3, 7)));
        assert!(matches!(c.trace_to_face(&Simplex::new(vec![0, 3]).unwrap()), Err(FeecError::NotAFace { .. })));
    }

    #[test]
    fn integration() {
        // top forms: ∫ dλ1∧dλ2 = 1/2 on the oriented triangle
        let vol = dl(1).wedge(&dl(2)).unwrap();
        assert_eq!(vol.integrate().unwrap(), q(1, 2));
        assert_eq!(dl(0).wedge(&dl(1)).unwrap().integrate().unwrap(), q(1, 2));
        assert!(dl(1).integrate().is_err());
        let m = crate::simplicial::generate(crate::simplicial::MeshKind::Simplex(2)).unwrap();
        let area = 0.5;
        let one = PolyForm::constant(tri(), qi(1)).integrate_density(&m.realization).unwrap();
        assert!((one.value() - area).abs() < 1e-15);
        assert_eq!(l(1).integrate_density(&m.realization).unwrap().factor, q(1, 3));
        assert_eq!(l(1).wedge(&l(2)).unwrap().integrate_density(&m.realization).unwrap().factor, q(1, 12));
    }

    #[test]
    fn monte_carlo_oracle_for_quadratic_moment() {
        // ∫ λ1 λ2 dA over a triangle of area A is A/12: sample the reference triangle uniformly
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
            if a + b > 1.0 {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            acc += a * b;
        }
        let mean = acc / n as f64;
        let m = crate::simplicial::generate(crate::simplicial::MeshKind::Simplex(2)).unwrap();
        let exact = l(1).wedge(&l(2)).unwrap().integrate_density(&m.realization).unwrap();
        let mc = mean * 0.5;
        assert!((mc - exact.value()).abs() <= 1e-3 * exact.value(), "{mc} vs {}", exact.value());
    }

    #[test]
    fn koszul_examples() {
        assert_eq!(dl(1).koszul(0).unwrap(), l(1));
        assert_eq!(dl(1).koszul(1).unwrap(), l(1).sub(&PolyForm::constant(tri(), qi(1))).unwrap());
        assert!(matches!(l(1).koszul(0), Err(FeecError::KoszulOfFunction)));
        let u = l(0).wedge(&dl(1)).unwrap().sub(&l(1).wedge(&dl(0)).unwrap()).unwrap();
        for base in 0..3 {
            let back = u.d().koszul(base).unwrap().add(&u.koszul(base).unwrap().d()).unwrap();
            assert_eq!(back, u);
        }
    }

    #[test]
    fn pullback_of_identity_and_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = PolyForm::random(tri(), 1, 3, 5, &mut rng);
        let id: Vec<Vec<Q>> = (0..3).map(|j| (0..3).map(|i| if i == j { qi(1) } else { qi(0) }).collect()).collect();
        assert_eq!(u.pullback(&tri(), &id).unwrap(), u);
        // pulling back to an edge through its vertex images equals the trace
        let e = Simplex::new(vec![0, 2]).unwrap();
        let images = vec![vec![qi(1), qi(0), qi(0)], vec![qi(0), qi(0), qi(1)]];
        assert_eq!(u.pullback(&e, &images).unwrap(), u.trace_to_face(&e).unwrap());
    }

    #[test]
    fn eval_matches_integrals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = PolyForm::random(tri(), 2, 6, 6, &mut rng);
        let c = CompatibleForm::from_components(2, [u.clone()]).unwrap();
        let exact = to_f64(&u.integrate().unwrap());
        let quad = integrate_evaluable(&c, &tri()).unwrap();
        assert!((exact - quad).abs() <= 1e-12 * exact.abs().max(1.0));
    }

    #[test]
    fn quadrature_beta_oracle() {
        // λ1^10 on an edge: ∫_0^1 t^10 dt = B(11, 1) = 1/11
        let e = Simplex::new(vec![0, 1]).unwrap();
        let u = PolyForm::monomial(e.clone(), &[0, 10], &[1], qi(1)).unwrap();
        let c = CompatibleForm::from_components(1, [u]).unwrap();
        let got = integrate_evaluable(&c, &e).unwrap();
        assert!((got - 1.0 / 11.0).abs() <= 1e-6 / 11.0);
        let constant = CompatibleForm::from_components(1, [PolyForm::dlambda(e.clone(), 1).scale(&q(5, 2))]).unwrap();
        assert!((integrate_evaluable(&constant, &e).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = SimplicialComplex::build_closure(&[vec![0, 1, 2]]).unwrap();
        let top: BTreeMap<Simplex, PolyForm> =
            [(tri(), PolyForm::random(tri(), 1, 2, 4, &mut rng))].into_iter().collect();
        let f = CompatibleForm::from_maximal(&k, 1, &top).unwrap();
        assert_eq!(f.compatibility_defect(&k).unwrap(), None);
        let back = CompatibleForm::from_json(&serde_json::from_str(&f.to_json().to_string()).unwrap()).unwrap();
        assert_eq!(back, f);
    }
}
