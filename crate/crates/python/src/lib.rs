//! Python bindings. Matrices cross the boundary as lists of rows; numpy
//! arrays are accepted wherever a matrix is expected.

use brecs::selection::{savs_sparsify_draw, zeta_of, Verdict};
use brecs::sim::{self, DgpKind, DgpSpec};
use brecs::stats;
use brecs::{FitOptions, HyperParams, Parametrization, RegressionData, RngHandle, SamplerConfig};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(err(format!("{what} is empty")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(err(format!(
            "{what}: row {i} has {} entries, expected {ncols}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn parametrization(name: &str) -> PyResult<Parametrization> {
    name.parse().map_err(err)
}

/// Sampler settings.
#[pyclass(module = "brecs_py", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct Sampler {
    param: String,
    n_iter: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
}

#[pymethods]
impl Sampler {
    #[new]
    #[pyo3(signature = (param = "rrcs".to_string(), n_iter = 7000, burn_in = 2000, thin = 1, seed = 0))]
    fn new(param: String, n_iter: usize, burn_in: usize, thin: usize, seed: u64) -> PyResult<Self> {
        let s = Self {
            param,
            n_iter,
            burn_in,
            thin,
            seed,
        };
        s.config()?;
        Ok(s)
    }

    /// Retained draws per chain.
    fn retained(&self) -> PyResult<usize> {
        Ok(self.config()?.retained())
    }

    fn __repr__(&self) -> String {
        format!(
            "Sampler(param='{}', n_iter={}, burn_in={}, thin={}, seed={})",
            self.param, self.n_iter, self.burn_in, self.thin, self.seed
        )
    }
}

impl Sampler {
    fn config(&self) -> PyResult<SamplerConfig> {
        let cfg = SamplerConfig {
            parametrization: parametrization(&self.param)?,
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            ..Default::default()
        };
        cfg.validate().map_err(err)?;
        Ok(cfg)
    }
}

/// Result of [`fit`]: rank posterior, sparse estimate and selection report.
#[pyclass(module = "brecs_py")]
struct Fit {
    inner: brecs::FitResult,
    names: Vec<String>,
}

#[pymethods]
impl Fit {
    #[getter]
    fn map_rank(&self) -> usize {
        self.inner.map_rank
    }

    #[getter]
    fn rank_posterior(&self) -> Vec<f64> {
        self.inner.rank_posterior.clone()
    }

    #[getter]
    fn rank_counts(&self) -> Vec<usize> {
        self.inner.draws.rank_counts()
    }

    /// `(statistic, p_value)` of the chi-square uniformity test of the rank draws.
    #[getter]
    fn rank_uniformity(&self) -> (f64, f64) {
        let t = self.inner.rank_uniformity;
        (t.statistic, t.p_value)
    }

    #[getter]
    fn u_draws(&self) -> Vec<usize> {
        self.inner.draws.u_draws.clone()
    }

    #[getter]
    fn c_hat(&self) -> Vec<Vec<f64>> {
        self.inner.report.c_hat.clone()
    }

    #[getter]
    fn pip(&self) -> Vec<Vec<f64>> {
        self.inner.report.pip.clone()
    }

    #[getter]
    fn zeta(&self) -> Vec<Vec<f64>> {
        self.inner.report.zeta.clone()
    }

    /// Relevance index mass functions, one row per covariate over shares `0, 1/q, ..., 1`.
    #[getter]
    fn ri(&self) -> Vec<Vec<f64>> {
        self.inner.report.ri.clone()
    }

    #[getter]
    fn covariate_names(&self) -> Vec<String> {
        self.names.clone()
    }

    /// Names of the covariates the rule of thumb keeps.
    fn kept(&self) -> Vec<String> {
        self.inner
            .report
            .covariates
            .iter()
            .filter(|c| c.verdict == Verdict::Keep)
            .map(|c| c.name.clone())
            .collect()
    }

    /// One dict per covariate with the RI summary, survival and verdict.
    fn covariates<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .report
            .covariates
            .iter()
            .map(|c| {
                let d = PyDict::new(py);
                d.set_item("name", &c.name)?;
                d.set_item("mode", c.summary.mode)?;
                d.set_item("mean", c.summary.mean)?;
                d.set_item("std", c.summary.std)?;
                d.set_item("q25", c.summary.q25)?;
                d.set_item("q50", c.summary.q50)?;
                d.set_item("q75", c.summary.q75)?;
                d.set_item("survival", c.survival)?;
                d.set_item("keep", c.verdict == Verdict::Keep)?;
                Ok(d)
            })
            .collect()
    }

    fn report_text(&self) -> String {
        self.inner.report.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(map_rank={}, draws={}, kept={:?})",
            self.inner.map_rank,
            self.inner.draws.len(),
            self.kept()
        )
    }
}

/// Fits the model to `y` (n x q) and `x` (n x p).
#[pyfunction]
#[pyo3(signature = (y, x, sampler = None, chains = 1, sr_bar = 0.70, p_bar = 0.60, center = false, intercept = false, names = None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    y: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    sampler: Option<Sampler>,
    chains: usize,
    sr_bar: f64,
    p_bar: f64,
    center: bool,
    intercept: bool,
    names: Option<Vec<String>>,
) -> PyResult<Fit> {
    let mut ym = to_matrix(&y, "y")?;
    let mut xm = to_matrix(&x, "x")?;
    let mut names = names.unwrap_or_else(|| (1..=xm.ncols()).map(|i| format!("x{i}")).collect());
    if names.len() != xm.ncols() {
        return Err(err(format!(
            "{} names for {} covariates",
            names.len(),
            xm.ncols()
        )));
    }
    if intercept {
        let p = xm.ncols();
        xm = xm.insert_column(p, 1.0);
        names.push("intercept".to_string());
    }
    if center {
        for mut col in ym.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
    }
    let data = RegressionData::with_flags(ym, xm, center, intercept).map_err(err)?;
    let opts = FitOptions {
        sampler: sampler.map_or_else(|| Ok(SamplerConfig::default()), |s| s.config())?,
        chains,
        sr_bar,
        p_bar,
    };
    let hp = HyperParams::defaults(data.q(), data.p());
    let inner = py
        .detach(|| brecs::fit(&data, &hp, &opts, Some(&names)))
        .map_err(err)?;
    Ok(Fit { inner, names })
}

fn dgp_kind(kind: &str, p_star: Option<usize>, z: Option<f64>) -> PyResult<DgpKind> {
    match kind {
        "non-sparse" | "nonsparse" => Ok(DgpKind::NonSparse),
        "sparse" => p_star
            .map(|p_star| DgpKind::SparseRows { p_star })
            .ok_or_else(|| err("kind 'sparse' needs p_star")),
        "zeros" | "random-zeros" => z
            .map(|z| DgpKind::RandomZeros { z })
            .ok_or_else(|| err("kind 'zeros' needs z")),
        other => Err(err(format!("unknown kind '{other}'"))),
    }
}

/// Simulated data set: dict with `y`, `x`, `c0`, `a0`, `b0` and `sigma0`.
#[pyfunction]
#[pyo3(signature = (n, q, p, r0, kind = "non-sparse", p_star = None, z = None, x_corr = false, e_corr = false, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    n: usize,
    q: usize,
    p: usize,
    r0: usize,
    kind: &str,
    p_star: Option<usize>,
    z: Option<f64>,
    x_corr: bool,
    e_corr: bool,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = DgpSpec {
        n,
        q,
        p,
        r0,
        kind: dgp_kind(kind, p_star, z)?,
        x_corr,
        e_corr,
        seed,
    };
    spec.validate().map_err(err)?;
    let t = sim::generate_truth(&spec, &mut RngHandle::new(seed)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("y", to_rows(&t.y))?;
    d.set_item("x", to_rows(&t.x))?;
    d.set_item("c0", to_rows(&t.c0))?;
    d.set_item("a0", to_rows(&t.a0))?;
    d.set_item("b0", to_rows(&t.b0))?;
    d.set_item("sigma0", to_rows(&t.sigma0))?;
    Ok(d)
}

/// Mean rank, MSE, MCC, TPR and FNR over `replications` simulated data sets.
#[pyfunction]
#[pyo3(signature = (n, q, p, r0, kind = "non-sparse", p_star = None, z = None, x_corr = false, e_corr = false, seed = 0, replications = 5, sampler = None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    n: usize,
    q: usize,
    p: usize,
    r0: usize,
    kind: &str,
    p_star: Option<usize>,
    z: Option<f64>,
    x_corr: bool,
    e_corr: bool,
    seed: u64,
    replications: usize,
    sampler: Option<Sampler>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = DgpSpec {
        n,
        q,
        p,
        r0,
        kind: dgp_kind(kind, p_star, z)?,
        x_corr,
        e_corr,
        seed,
    };
    let cfg = sampler.map_or_else(|| Ok(SamplerConfig::default()), |s| s.config())?;
    let result = py
        .detach(|| sim::run_experiment(&spec, &cfg, replications))
        .map_err(err)?;
    let a = result.aggregate;
    let d = PyDict::new(py);
    d.set_item("replications", a.replications)?;
    d.set_item("rank", a.rank.mean)?;
    d.set_item("mse", a.mse.mean)?;
    d.set_item("mcc", a.mcc.mean)?;
    d.set_item("tpr", a.tpr.mean)?;
    d.set_item("fnr", a.fnr.mean)?;
    d.set_item(
        "rank_map",
        result
            .outcomes
            .iter()
            .map(|o| o.metrics.rank_map)
            .collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// SAVS sparsification of one coefficient draw given the squared column norms of X.
#[pyfunction]
fn savs(c: Vec<Vec<f64>>, column_norms_sq: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let m = to_matrix(&c, "c")?;
    Ok(to_rows(
        &savs_sparsify_draw(&m, &column_norms_sq).map_err(err)?,
    ))
}

/// PIP uncertainty index `1 - 2 |pip - 1/2|`.
#[pyfunction]
fn zeta(pip: f64) -> PyResult<f64> {
    if !(0.0..=1.0).contains(&pip) {
        return Err(err(format!("pip must lie in [0, 1], got {pip}")));
    }
    Ok(zeta_of(pip))
}

/// `(mcc, tpr, fnr)` of the zero/nonzero pattern of `c_hat` against `c0`.
#[pyfunction]
fn classification(
    c_hat: Vec<Vec<f64>>,
    c0: Vec<Vec<f64>>,
) -> PyResult<(f64, Option<f64>, Option<f64>)> {
    let (c, mcc) =
        sim::classification_metrics(&to_matrix(&c_hat, "c_hat")?, &to_matrix(&c0, "c0")?)
            .map_err(err)?;
    Ok((mcc, c.tpr(), c.fnr()))
}

#[pyfunction]
fn mse(c_hat: Vec<Vec<f64>>, c0: Vec<Vec<f64>>) -> PyResult<f64> {
    sim::mse(&to_matrix(&c_hat, "c_hat")?, &to_matrix(&c0, "c0")?).map_err(err)
}

/// `(statistic, p_value)` of Pearson's chi-square test of uniform counts.
#[pyfunction]
fn chi2_uniformity(counts: Vec<usize>) -> PyResult<(f64, f64)> {
    let t = stats::chi2_uniformity(&counts).map_err(err)?;
    Ok((t.statistic, t.p_value))
}

#[pymodule]
fn brecs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Sampler>()?;
    m.add_class::<Fit>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(savs, m)?)?;
    m.add_function(wrap_pyfunction!(zeta, m)?)?;
    m.add_function(wrap_pyfunction!(classification, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_uniformity, m)?)?;
    Ok(())
}
