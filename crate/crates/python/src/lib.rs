//! Python bindings: catalog models, characteristic flows, fundamental
//! solutions, flooded fields and the two oracles.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: hjchar::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pymodule]
mod hjchar_py {
    use super::py_err;
    use hjchar::field::{GridSpec, InitialData, SeedSpec};
    use hjchar::oracle::LFConfig;
    use hjchar::{Hamiltonian, HamiltonianModel, ModelKind, PhasePoint, ShootingConfig, SolutionField};
    use pyo3::prelude::*;

    /// A catalog Hamiltonian `p^2/2 + a cos(2 pi x) + c(u)`.
    #[pyclass(frozen, name = "Model")]
    pub struct Model {
        inner: HamiltonianModel,
    }

    #[pymethods]
    impl Model {
        #[new]
        #[pyo3(signature = (name, lam = 1.0, potential = None))]
        fn new(name: &str, lam: f64, potential: Option<f64>) -> PyResult<Self> {
            let kind: ModelKind = name.parse().map_err(py_err)?;
            let mut inner = HamiltonianModel::new(kind).with_lambda(lam);
            if let Some(a) = potential {
                inner = inner.with_potential(a);
            }
            Ok(Model { inner })
        }

        #[getter]
        fn name(&self) -> String {
            self.inner.name()
        }

        #[getter]
        fn lam(&self) -> f64 {
            self.inner.lambda
        }

        #[getter]
        fn potential(&self) -> f64 {
            self.inner.potential
        }

        fn value(&self, x: f64, u: f64, p: f64) -> f64 {
            self.inner.value(x, u, p)
        }

        /// `(H_x, H_u, H_p)`.
        fn partials(&self, x: f64, u: f64, p: f64) -> (f64, f64, f64) {
            let d = self.inner.partials(x, u, p);
            (d.hx, d.hu, d.hp)
        }

        fn __repr__(&self) -> String {
            format!("Model({:?}, lam={}, potential={})", self.inner.name(), self.inner.lambda, self.inner.potential)
        }
    }

    /// Formatted model catalog.
    #[pyfunction]
    fn list_models() -> String {
        HamiltonianModel::catalog()
    }

    /// Characteristic from `(x, u, p)` sampled at `nodes + 1` uniform times
    /// in `[0, t]`: `(times, xs, us, ps)`.
    #[pyfunction]
    #[pyo3(signature = (model, x, u, p, t, tol = 1e-10, nodes = 100))]
    fn flow(
        model: &Model,
        x: f64,
        u: f64,
        p: f64,
        t: f64,
        tol: f64,
        nodes: usize,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let tr = hjchar::charflow::flow_uniform(&model.inner, PhasePoint::new(x, u, p), t, tol, nodes).map_err(py_err)?;
        Ok((
            tr.times.clone(),
            tr.states.iter().map(|s| s.x).collect(),
            tr.states.iter().map(|s| s.u).collect(),
            tr.states.iter().map(|s| s.p).collect(),
        ))
    }

    /// `h_{x0,u0}(x, t)` with its minimizer: `(value, p0, winding, residual)`.
    #[pyfunction]
    #[pyo3(signature = (model, x0, u0, x, t, n_p = 801, p_max = 8.0, k_max = 2))]
    fn fundamental_solution(
        model: &Model,
        x0: f64,
        u0: f64,
        x: f64,
        t: f64,
        n_p: usize,
        p_max: f64,
        k_max: i64,
    ) -> PyResult<(f64, f64, i64, f64)> {
        let cfg = ShootingConfig { n_p, p_max, k_max, retain_trajectory: false, ..Default::default() };
        let fv = hjchar::fundamental_solution(&model.inner, x0, u0, x, t, &cfg).map_err(py_err)?;
        Ok((fv.value, fv.minimizer.p0, fv.minimizer.winding, fv.minimizer.residual))
    }

    fn field_tuple(f: SolutionField) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let rows = (0..f.t_nodes.len()).map(|j| f.column(j).to_vec()).collect();
        (f.x_nodes, f.t_nodes, rows)
    }

    /// Flooded field `(x_nodes, t_nodes, values[t][x])` for initial data
    /// given as `const:c`, `cos:a:m:b`, `sin:a:m:b` or `table:path`.
    #[pyfunction]
    #[pyo3(signature = (model, phi, nx, times, ny = 400, np = 401))]
    fn solve_forward_flood(
        model: &Model,
        phi: &str,
        nx: usize,
        times: Vec<f64>,
        ny: usize,
        np: usize,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
        let phi = InitialData::from_spec(phi).map_err(py_err)?;
        let grid = GridSpec::new(nx, times).map_err(py_err)?;
        let seeds = SeedSpec { ny, np, ..Default::default() };
        let f = hjchar::solve_forward_flood(&model.inner, &phi, &grid, &seeds).map_err(py_err)?;
        Ok(field_tuple(f))
    }

    /// Lax-Friedrichs field, same layout as `solve_forward_flood`.
    #[pyfunction]
    #[pyo3(signature = (model, phi, nx, times, cfl = 0.45, alpha = None))]
    fn solve_lf(
        model: &Model,
        phi: &str,
        nx: usize,
        times: Vec<f64>,
        cfl: f64,
        alpha: Option<f64>,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
        let phi = InitialData::from_spec(phi).map_err(py_err)?;
        let cfg = LFConfig { nx, cfl, alpha, t_nodes: times };
        let f = hjchar::oracle::solve_lf(&model.inner, &phi, &cfg).map_err(py_err)?;
        Ok(field_tuple(f))
    }

    /// Exact solution for `H = p^2/2` by the Hopf-Lax formula.
    #[pyfunction]
    #[pyo3(signature = (phi, x, t, ny_dense = 4000, k_max = 2))]
    fn hopf_lax_exact(phi: &str, x: f64, t: f64, ny_dense: usize, k_max: i64) -> PyResult<f64> {
        let phi = InitialData::from_spec(phi).map_err(py_err)?;
        Ok(hjchar::oracle::hopf_lax_exact(&phi, x, t, ny_dense, k_max))
    }
}
