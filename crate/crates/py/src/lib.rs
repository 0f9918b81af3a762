//! Python bindings: meshes, cohomology, Whitney-space checks and the Hodge layer.

#[pyo3::pymodule]
mod feec {
    use feec_core::cohomology::{
        betti, highorder_complex, mayer_vietoris_filtration, relative_complex, whitney_complex,
    };
    use feec_core::hodge::{harmonic_gap_study, spectral_study, Hierarchy, Tolerances};
    use feec_core::whitney::verify_wedge_closure;
    use feec_core::{generate, FeecError, SimplicialComplex};
    use pyo3::exceptions::{PyRuntimeError, PyValueError};
    use pyo3::prelude::*;
    use pyo3::types::PyDict;
    use serde_json::Value;

    fn err(e: FeecError) -> PyErr {
        match e {
            FeecError::Parse(_)
            | FeecError::InvalidParameter(_)
            | FeecError::DegreeOutOfRange { .. }
            | FeecError::DegreeMismatch { .. }
            | FeecError::Shape(_) => PyValueError::new_err(format!("{}: {e}", e.kind())),
            _ => PyRuntimeError::new_err(format!("{}: {e}", e.kind())),
        }
    }

    fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
        Ok(py.import("json")?.call_method1("loads", (v.to_string(),))?.unbind())
    }

    fn tolerances(tol: Option<&Bound<'_, PyDict>>) -> PyResult<Tolerances> {
        let mut t = Tolerances::default();
        if let Some(d) = tol {
            for (name, value) in d.iter() {
                t.set(&name.extract::<String>()?, value.extract::<f64>()?).map_err(err)?;
            }
        }
        Ok(t)
    }

    /// A simplicial complex with an exact affine realization.
    #[pyclass(frozen)]
    pub struct Mesh {
        inner: feec_core::Mesh,
    }

    #[pymethods]
    impl Mesh {
        /// Built-in mesh such as "torus:3,3", "sphere:2" or "circle:24".
        #[staticmethod]
        fn generate(kind: &str) -> PyResult<Self> {
            let kind = kind.parse().map_err(err)?;
            Ok(Mesh { inner: generate(kind).map_err(err)? })
        }

        /// Parses the {"vertices", "cells"} JSON format.
        #[staticmethod]
        fn from_json(text: &str) -> PyResult<Self> {
            Ok(Mesh { inner: feec_core::Mesh::from_json(text).map_err(err)? })
        }

        fn to_json(&self) -> String {
            self.inner.to_json_value().to_string()
        }

        #[getter]
        fn dim(&self) -> usize {
            self.inner.complex.dim()
        }

        #[getter]
        fn counts(&self) -> Vec<usize> {
            self.inner.complex.counts()
        }

        fn euler_characteristic(&self) -> i64 {
            self.inner.complex.euler_characteristic()
        }

        /// Simplices of dimension `k` as sorted vertex lists.
        fn simplices(&self, k: usize) -> Vec<Vec<usize>> {
            if k > self.inner.complex.dim() {
                return Vec::new();
            }
            self.inner.complex.simplices(k).iter().map(|s| s.vertices().to_vec()).collect()
        }

        /// Coboundary matrix `D^k` as dense integer rows.
        fn coboundary(&self, k: usize) -> PyResult<Vec<Vec<i32>>> {
            let m = self.inner.complex.coboundary_matrix(k).map_err(err)?;
            Ok((0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m.entry(r, c)).collect()).collect())
        }

        fn subdivide(&self) -> PyResult<Self> {
            Ok(Mesh { inner: self.inner.subdivide().map_err(err)?.mesh })
        }

        /// Betti numbers of the Whitney complex, or of X^•_n for `order > 1`.
        #[pyo3(signature = (order = 1))]
        fn betti(&self, order: usize) -> PyResult<Vec<usize>> {
            let c = if order <= 1 {
                whitney_complex(&self.inner.complex)
            } else {
                highorder_complex(&self.inner.complex, order).map_err(err)?
            };
            Ok(betti(&c))
        }

        /// Relative Betti numbers; the boundary when `cells` is omitted.
        #[pyo3(signature = (cells = None))]
        fn relative_betti(&self, cells: Option<Vec<Vec<usize>>>) -> PyResult<Vec<usize>> {
            let k = &self.inner.complex;
            let l = match cells {
                None => k.boundary_subcomplex(),
                Some(c) if c.is_empty() => SimplicialComplex::empty(),
                Some(c) => SimplicialComplex::build_closure(&c).map_err(err)?,
            };
            Ok(betti(&relative_complex(k, &l).map_err(err)?))
        }

        /// Mayer–Vietoris exactness reports over the cell-by-cell assembly.
        fn mayer_vietoris(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
            let reports = mayer_vietoris_filtration(&self.inner.complex).map_err(err)?;
            to_py(py, &Value::Array(reports.iter().map(|r| r.to_json()).collect()))
        }

        /// Random trials of X^k_m ∧ X^l_n ⊆ X^{k+l}_{m+n}.
        #[allow(clippy::too_many_arguments)]
        #[pyo3(signature = (k, l, m, n, trials = 100, seed = 1))]
        fn wedge_check(
            &self,
            py: Python<'_>,
            k: usize,
            l: usize,
            m: usize,
            n: usize,
            trials: usize,
            seed: u64,
        ) -> PyResult<Py<PyAny>> {
            let r =
                py.detach(|| verify_wedge_closure(&self.inner.complex, (k, m), (l, n), trials, seed)).map_err(err)?;
            to_py(py, &r.to_json())
        }

        /// Constants and harmonic gaps over `levels` refinements.
        #[pyo3(signature = (k, levels = 2, tol = None))]
        fn spectral_study(
            &self,
            py: Python<'_>,
            k: usize,
            levels: usize,
            tol: Option<&Bound<'_, PyDict>>,
        ) -> PyResult<Py<PyAny>> {
            let t = tolerances(tol)?;
            let mesh = self.inner.clone();
            let r = py
                .detach(|| {
                    if levels >= 2 {
                        harmonic_gap_study(&mesh, levels, k, t)
                    } else {
                        Hierarchy::new(mesh, levels, t).and_then(|h| spectral_study(&h, k, t))
                    }
                })
                .map_err(err)?;
            to_py(py, &r.to_json())
        }

        fn __repr__(&self) -> String {
            format!("Mesh(dim={}, counts={:?})", self.inner.complex.dim(), self.inner.complex.counts())
        }
    }

    /// Mass matrices, harmonic forms and spectral constants on one mesh.
    #[pyclass(frozen)]
    pub struct HodgeLevel {
        inner: feec_core::hodge::HodgeLevel,
    }

    #[pymethods]
    impl HodgeLevel {
        #[new]
        #[pyo3(signature = (mesh, tol = None))]
        fn new(mesh: &Mesh, tol: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
            Ok(HodgeLevel {
                inner: feec_core::hodge::HodgeLevel::with_tolerances(mesh.inner.clone(), tolerances(tol)?)
                    .map_err(err)?,
            })
        }

        #[getter]
        fn betti(&self) -> Vec<usize> {
            self.inner.betti.clone()
        }

        fn mass(&self, k: usize) -> PyResult<Vec<Vec<f64>>> {
            if k > self.inner.dim() {
                return Err(err(FeecError::DegreeOutOfRange { degree: k, min: 0, max: self.inner.dim() }));
            }
            let m = &self.inner.mass(k).matrix;
            Ok(m.row_iter().map(|r| r.iter().copied().collect()).collect())
        }

        /// Mass-orthonormal harmonic basis, one list per basis vector.
        fn harmonic_basis(&self, k: usize) -> PyResult<Vec<Vec<f64>>> {
            let h = self.inner.harmonic_basis(k).map_err(err)?;
            Ok(h.vectors.column_iter().map(|c| c.iter().copied().collect()).collect())
        }

        fn hodge_decompose(&self, py: Python<'_>, k: usize, u: Vec<f64>) -> PyResult<Py<PyAny>> {
            to_py(py, &self.inner.hodge_decompose(k, &u).map_err(err)?.to_json())
        }

        fn poincare_constant(&self, k: usize) -> PyResult<f64> {
            Ok(self.inner.poincare_constant(k).map_err(err)?.value)
        }

        fn inf_sup_constant(&self, k: usize) -> PyResult<f64> {
            Ok(self.inner.inf_sup_constant(k).map_err(err)?.value)
        }

        fn fortin_project(&self, k: usize, u: Vec<f64>) -> PyResult<Vec<f64>> {
            let src = feec_core::hodge::FortinSource::InSpace(&u);
            Ok(self.inner.fortin_project(k, &src).map_err(err)?.cochain)
        }
    }

    /// Runs the command-line interface in-process; returns the exit code and the report text.
    #[pyfunction]
    fn run_cli(args: Vec<String>) -> (i32, String) {
        let mut out = Vec::new();
        let code = feec_core::cli::run_with_output(std::iter::once("feec".to_string()).chain(args), &mut out);
        (code, String::from_utf8_lossy(&out).into_owned())
    }
}
