//! Python extension module exposing the main types and operations:
//! model construction, spectral bounds, Jackson coefficients, Chebyshev
//! moments, LDoS reconstruction, total DoS and the geometry diagnostics.
//!
//! Build with `cargo build -p moire-kpm-py --release`; the produced
//! `libmoire_kpm_py.so` imports as `moire_kpm_py` once renamed (see
//! `python/smoke_test.py`).

use std::collections::BTreeMap;

use nalgebra::Vector2;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use moire_kpm::dos as core_dos;
use moire_kpm::geometry as geo;
use moire_kpm::hamiltonian::assemble;
use moire_kpm::kpm;
use moire_kpm::model::{self, Sheet, TBModel};

fn to_py_err(e: moire_kpm::Error) -> PyErr {
    use moire_kpm::Error::*;
    match e {
        SingularBasis { .. } | InvalidParameter(_) | Config(_) | ModelValidation(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn sheet_from(j: u8) -> PyResult<Sheet> {
    Sheet::from_number(j).map_err(to_py_err)
}

/// A tight-binding bilayer model.
#[pyclass(frozen, name = "Model")]
struct PyModel {
    inner: TBModel,
}

#[pymethods]
impl PyModel {
    /// Builds a builtin model ("monolayer_graphene" or "tbg") with optional
    /// numeric parameter overrides such as twist_degrees or t_perp.
    #[staticmethod]
    #[pyo3(signature = (name, params=None))]
    fn builtin(name: &str, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let params = params.unwrap_or_default();
        Ok(Self {
            inner: model::builtin_model(name, &params).map_err(to_py_err)?,
        })
    }

    /// Parses a model from TOML configuration text.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: moire_kpm::config::model_from_toml(text).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    /// Normalization constant of the representation formula (1/Angstrom^2).
    #[getter]
    fn nu(&self) -> f64 {
        self.inner.nu()
    }

    /// Orbital ids per sheet: ([sheet-1 ids], [sheet-2 ids]).
    fn orbitals(&self) -> (Vec<String>, Vec<String>) {
        let ids = |s: Sheet| {
            self.inner
                .orbitals(s)
                .iter()
                .map(|o| o.id.as_str().to_string())
                .collect()
        };
        (ids(Sheet::One), ids(Sheet::Two))
    }

    /// (e_bound_eV, eta_per_eV): the Gershgorin window with safety factor.
    fn spectral_bound(&self) -> PyResult<(f64, f64)> {
        let w = model::spectral_bound(&self.inner).map_err(to_py_err)?;
        Ok((w.e_bound, w.eta))
    }

    /// Worst ratio of |h| against its decay envelope over random samples.
    #[pyo3(signature = (samples=200, seed=0))]
    fn validate_decay(&self, samples: usize, seed: u64) -> PyResult<(f64, bool)> {
        let rep = model::validate_decay(&self.inner, samples, seed).map_err(to_py_err)?;
        Ok((rep.max_ratio, rep.pass))
    }

    fn __repr__(&self) -> String {
        format!("Model(label='{}')", self.inner.label)
    }
}

/// A sampled total density of states.
#[pyclass(frozen, name = "DosCurve")]
struct PyDosCurve {
    #[pyo3(get)]
    epsilons: Vec<f64>,
    #[pyo3(get)]
    values: Vec<f64>,
    #[pyo3(get)]
    nu: f64,
    #[pyo3(get)]
    eta: f64,
}

/// Jackson damping coefficients g_0..g_p (g_0 = 1 exactly).
#[pyfunction]
fn jackson_coefficients(p: usize) -> PyResult<Vec<f64>> {
    Ok(kpm::jackson_coefficients(p)
        .map_err(to_py_err)?
        .values()
        .to_vec())
}

/// Total DoS; `epsilons=None` uses the default 401-point grid spanning 98%
/// of the scaled spectral window.
#[pyfunction]
#[pyo3(signature = (model, r, p, n_disc=1, epsilons=None))]
fn total_dos(
    model: &PyModel,
    r: f64,
    p: usize,
    n_disc: usize,
    epsilons: Option<Vec<f64>>,
) -> PyResult<PyDosCurve> {
    let window = model::spectral_bound(&model.inner).map_err(to_py_err)?;
    let grid = match epsilons {
        Some(g) => g,
        None => core_dos::default_energy_grid(&window, core_dos::DEFAULT_GRID_POINTS)
            .map_err(to_py_err)?,
    };
    let curve = core_dos::total_dos(&model.inner, r, p, n_disc, &grid).map_err(to_py_err)?;
    Ok(PyDosCurve {
        epsilons: curve.epsilons,
        values: curve.values,
        nu: curve.nu,
        eta: curve.params.eta,
    })
}

/// LDoS of the center orbital `alpha` (sheet `j`) with the opposite sheet
/// shifted by Cartesian `b`; returns (epsilons, values).
#[pyfunction]
#[pyo3(signature = (model, r, p, j, alpha, b=(0.0, 0.0), epsilons=None))]
#[allow(clippy::too_many_arguments)]
fn ldos(
    model: &PyModel,
    r: f64,
    p: usize,
    j: u8,
    alpha: &str,
    b: (f64, f64),
    epsilons: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let sheet = sheet_from(j)?;
    let window = model::spectral_bound(&model.inner).map_err(to_py_err)?;
    let grid = match epsilons {
        Some(g) => g,
        None => core_dos::default_energy_grid(&window, core_dos::DEFAULT_GRID_POINTS)
            .map_err(to_py_err)?,
    };
    let h = assemble(&model.inner, r, sheet, Vector2::new(b.0, b.1)).map_err(to_py_err)?;
    let moments =
        kpm::chebyshev_moments(&h, &model::OrbitalId::new(alpha), p).map_err(to_py_err)?;
    let kernel = kpm::jackson_coefficients(p).map_err(to_py_err)?;
    let samples = kpm::reconstruct(&moments, &kernel, &grid).map_err(to_py_err)?;
    Ok((
        samples.iter().map(|s| s.epsilon).collect(),
        samples.iter().map(|s| s.value).collect(),
    ))
}

/// Chebyshev moments mu_0..mu_p of one center orbital.
#[pyfunction]
#[pyo3(signature = (model, r, p, j, alpha, b=(0.0, 0.0)))]
fn chebyshev_moments(
    model: &PyModel,
    r: f64,
    p: usize,
    j: u8,
    alpha: &str,
    b: (f64, f64),
) -> PyResult<Vec<f64>> {
    let sheet = sheet_from(j)?;
    let h = assemble(&model.inner, r, sheet, Vector2::new(b.0, b.1)).map_err(to_py_err)?;
    Ok(kpm::chebyshev_moments(&h, &model::OrbitalId::new(alpha), p)
        .map_err(to_py_err)?
        .mu)
}

/// Number of lattice sites of one sheet strictly inside the ball of radius r.
#[pyfunction]
fn sites_in_ball_count(model: &PyModel, sheet: u8, r: f64) -> PyResult<usize> {
    let s = sheet_from(sheet)?;
    Ok(geo::sites_in_ball(model.inner.lattice(s), r)
        .map_err(to_py_err)?
        .len())
}

/// Binned equidistribution discrepancy of sheet-1 sites folded into the
/// sheet-2 cell.
#[pyfunction]
fn equidistribution_discrepancy(model: &PyModel, r: f64) -> PyResult<f64> {
    geo::equidistribution_discrepancy(&model.inner.lattice1, &model.inner.lattice2, r)
        .map_err(to_py_err)
}

/// Fourier-mode average over sheet-1 sites; returns (re, im, commensurate).
#[pyfunction]
fn fourier_mode_average(model: &PyModel, m: (i64, i64), r: f64) -> PyResult<(f64, f64, bool)> {
    let f = geo::fourier_mode_average(&model.inner.lattice1, &model.inner.lattice2, [m.0, m.1], r)
        .map_err(to_py_err)?;
    Ok((f.value.re, f.value.im, f.commensurate_warning))
}

#[pymodule]
fn moire_kpm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyDosCurve>()?;
    m.add_function(wrap_pyfunction!(jackson_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(total_dos, m)?)?;
    m.add_function(wrap_pyfunction!(ldos, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev_moments, m)?)?;
    m.add_function(wrap_pyfunction!(sites_in_ball_count, m)?)?;
    m.add_function(wrap_pyfunction!(equidistribution_discrepancy, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_mode_average, m)?)?;
    Ok(())
}
