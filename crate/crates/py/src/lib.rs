//! Python bindings: the count-data container, hyperparameters, fitting, and
//! the synthetic benchmark generator.

use hapdecon::model::FeatureMatrix;
use hapdecon::sampler::run_chain;
use hapdecon::simulate::{error_report, simulate_counts, SimTruth};
use hapdecon::summary::summarize;
use hapdecon::{CountData, FitSummary, Hyperparams};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::PathBuf;

fn err(e: hapdecon::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Variant/total read counts for S SNVs across T samples.
#[pyclass(name = "CountData", skip_from_py_object)]
#[derive(Clone)]
struct PyCountData {
    inner: CountData,
}

#[pymethods]
impl PyCountData {
    /// Build from row-major nested lists: n[s][t], total[s][t].
    #[new]
    fn new(n: Vec<Vec<u32>>, total: Vec<Vec<u32>>) -> PyResult<Self> {
        let s = n.len();
        let t = n.first().map(|r| r.len()).unwrap_or(0);
        if total.len() != s || total.iter().any(|r| r.len() != t) || n.iter().any(|r| r.len() != t)
        {
            return Err(PyValueError::new_err("ragged or mismatched count matrices"));
        }
        let inner = CountData::from_matrices(
            s,
            t,
            n.into_iter().flatten().collect(),
            total.into_iter().flatten().collect(),
        )
        .map_err(err)?;
        Ok(PyCountData { inner })
    }

    /// Read a long-form counts TSV (snv_id, sample_id, n, N).
    #[staticmethod]
    fn from_tsv(path: PathBuf) -> PyResult<Self> {
        Ok(PyCountData {
            inner: hapdecon::io::read_counts(&path).map_err(err)?,
        })
    }

    fn write_tsv(&self, path: PathBuf) -> PyResult<()> {
        hapdecon::io::write_counts(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn n_snvs(&self) -> usize {
        self.inner.n_snvs()
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    fn n(&self, s: usize, t: usize) -> u32 {
        self.inner.n(s, t)
    }

    fn total(&self, s: usize, t: usize) -> u32 {
        self.inner.total(s, t)
    }

    fn __repr__(&self) -> String {
        format!(
            "CountData({} SNVs x {} samples)",
            self.inner.n_snvs(),
            self.inner.n_samples()
        )
    }
}

/// Model hyperparameters plus sampler tuning.
#[pyclass(name = "Hyperparams", skip_from_py_object)]
#[derive(Clone)]
struct PyHyperparams {
    inner: Hyperparams,
}

#[pymethods]
impl PyHyperparams {
    /// Simulation-study preset: r=0.2, alpha=3, a0=a=0.5, a00=1, b00=100.
    #[staticmethod]
    fn simulation_preset() -> Self {
        PyHyperparams {
            inner: Hyperparams::simulation_preset(),
        }
    }

    /// Exome-analysis preset: r=0.2, alpha=1, a=a0=1, a00=5, b00=95.
    #[staticmethod]
    fn exome_preset() -> Self {
        PyHyperparams {
            inner: Hyperparams::exome_preset(),
        }
    }

    #[getter]
    fn get_r(&self) -> f64 {
        self.inner.r
    }
    #[setter]
    fn set_r(&mut self, v: f64) {
        self.inner.r = v;
    }
    #[getter]
    fn get_alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[setter]
    fn set_alpha(&mut self, v: f64) {
        self.inner.alpha = v;
    }
    #[getter]
    fn get_a(&self) -> f64 {
        self.inner.a
    }
    #[setter]
    fn set_a(&mut self, v: f64) {
        self.inner.a = v;
    }
    #[getter]
    fn get_a0(&self) -> f64 {
        self.inner.a0
    }
    #[setter]
    fn set_a0(&mut self, v: f64) {
        self.inner.a0 = v;
    }
    #[getter]
    fn get_a00(&self) -> f64 {
        self.inner.a00
    }
    #[setter]
    fn set_a00(&mut self, v: f64) {
        self.inner.a00 = v;
    }
    #[getter]
    fn get_b00(&self) -> f64 {
        self.inner.b00
    }
    #[setter]
    fn set_b00(&mut self, v: f64) {
        self.inner.b00 = v;
    }
    #[getter]
    fn get_c_max(&self) -> usize {
        self.inner.c_max
    }
    #[setter]
    fn set_c_max(&mut self, v: usize) {
        self.inner.c_max = v;
    }
    #[getter]
    fn get_iterations(&self) -> usize {
        self.inner.mcmc.iterations
    }
    #[setter]
    fn set_iterations(&mut self, v: usize) {
        self.inner.mcmc.iterations = v;
    }
    #[getter]
    fn get_burn_in(&self) -> usize {
        self.inner.mcmc.burn_in
    }
    #[setter]
    fn set_burn_in(&mut self, v: usize) {
        self.inner.mcmc.burn_in = v;
    }
    #[getter]
    fn get_thin(&self) -> usize {
        self.inner.mcmc.thin
    }
    #[setter]
    fn set_thin(&mut self, v: usize) {
        self.inner.mcmc.thin = v;
    }
    #[getter]
    fn get_theta_step(&self) -> f64 {
        self.inner.mcmc.theta_step
    }
    #[setter]
    fn set_theta_step(&mut self, v: f64) {
        self.inner.mcmc.theta_step = v;
    }
    #[getter]
    fn get_p0_step(&self) -> f64 {
        self.inner.mcmc.p0_step
    }
    #[setter]
    fn set_p0_step(&mut self, v: f64) {
        self.inner.mcmc.p0_step = v;
    }
    #[getter]
    fn get_rj_prob(&self) -> f64 {
        self.inner.mcmc.rj_prob
    }
    #[setter]
    fn set_rj_prob(&mut self, v: f64) {
        self.inner.mcmc.rj_prob = v;
    }
    #[getter]
    fn get_rj_inner_iters(&self) -> usize {
        self.inner.mcmc.rj_inner_iters
    }
    #[setter]
    fn set_rj_inner_iters(&mut self, v: usize) {
        self.inner.mcmc.rj_inner_iters = v;
    }
    #[getter]
    fn get_seed(&self) -> u64 {
        self.inner.mcmc.seed
    }
    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.mcmc.seed = v;
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Hyperparams(r={}, alpha={}, a={}, a0={}, a00={}, b00={}, c_max={})",
            self.inner.r,
            self.inner.alpha,
            self.inner.a,
            self.inner.a0,
            self.inner.a00,
            self.inner.b00,
            self.inner.c_max
        )
    }
}

/// Posterior summary of a fit.
#[pyclass(name = "FitResult")]
struct PyFitResult {
    summary: FitSummary,
    c_trace: Vec<Vec<usize>>,
    log_joint_trace: Vec<Vec<f64>>,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn c_star(&self) -> usize {
        self.summary.c_star
    }

    #[getter]
    fn p0_star(&self) -> f64 {
        self.summary.p0_star
    }

    #[getter]
    fn alignment_cost(&self) -> f64 {
        self.summary.alignment_cost
    }

    /// Empirical posterior of C as {c: probability}.
    #[getter]
    fn posterior_c(&self) -> BTreeMap<usize, f64> {
        self.summary.posterior_c.clone()
    }

    /// S x C* binary inclusion matrix as nested lists.
    #[getter]
    fn z_star(&self) -> Vec<Vec<u8>> {
        let z = &self.summary.z_star;
        (0..z.n_rows()).map(|s| z.row(s).to_vec()).collect()
    }

    /// T x (C*+1) weight matrix; column 0 is the background weight.
    #[getter]
    fn w_star(&self) -> Vec<Vec<f64>> {
        let w = &self.summary.w_star;
        (0..w.n_samples()).map(|t| w.row(t).to_vec()).collect()
    }

    /// Sampled C per post-burn-in iteration, one list per chain.
    #[getter]
    fn c_trace(&self) -> Vec<Vec<usize>> {
        self.c_trace.clone()
    }

    /// Joint log density per post-burn-in iteration, one list per chain.
    #[getter]
    fn log_joint_trace(&self) -> Vec<Vec<f64>> {
        self.log_joint_trace.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(c_star={}, p0_star={:.5})",
            self.summary.c_star, self.summary.p0_star
        )
    }
}

/// Ground truth behind a simulated data set.
#[pyclass(name = "SimTruth", skip_from_py_object)]
#[derive(Clone)]
struct PySimTruth {
    inner: SimTruth,
}

#[pymethods]
impl PySimTruth {
    #[getter]
    fn z_true(&self) -> Vec<Vec<u8>> {
        let z = &self.inner.z_true;
        (0..z.n_rows()).map(|s| z.row(s).to_vec()).collect()
    }

    #[getter]
    fn w_true(&self) -> Vec<Vec<f64>> {
        let w = &self.inner.w_true;
        (0..w.n_samples()).map(|t| w.row(t).to_vec()).collect()
    }

    #[getter]
    fn p0_true(&self) -> f64 {
        self.inner.p0_true
    }

    fn p_true(&self, s: usize, t: usize) -> f64 {
        self.inner.p_true(s, t)
    }

    /// (mean, sd, mean_abs) of fitted-minus-true cell probabilities.
    fn error_stats(&self, result: &PyFitResult) -> PyResult<(f64, f64, f64)> {
        let report = error_report(&self.inner, &result.summary).map_err(err)?;
        Ok((report.mean, report.sd, report.mean_abs))
    }
}

/// Generate the benchmark scenario: nested haplotypes, shuffled Dirichlet
/// weights, binomial counts at fixed depth.
#[pyfunction]
#[pyo3(signature = (snvs=100, samples=30, depth=50, p0=0.01, seed=1, snv_noise=false))]
fn simulate_benchmark(
    snvs: usize,
    samples: usize,
    depth: u32,
    p0: f64,
    seed: u64,
    snv_noise: bool,
) -> PyResult<(PyCountData, PySimTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth =
        SimTruth::benchmark_sized(snvs, samples, depth, p0, &mut rng).map_err(err)?;
    if snv_noise {
        truth = truth.with_snv_noise(None, &mut rng).map_err(err)?;
    }
    let data = simulate_counts(&truth, &mut rng).map_err(err)?;
    Ok((PyCountData { inner: data }, PySimTruth { inner: truth }))
}

/// Run `chains` MCMC chains (seeds seed, seed+1, ...) and summarize the
/// pooled posterior.
#[pyfunction]
#[pyo3(signature = (data, hp, chains=1))]
fn fit(data: &PyCountData, hp: &PyHyperparams, chains: usize) -> PyResult<PyFitResult> {
    if chains == 0 {
        return Err(PyValueError::new_err("chains must be at least 1"));
    }
    let base_seed = hp.inner.mcmc.seed;
    let mut traces = Vec::with_capacity(chains);
    for chain in 0..chains {
        let mut hp_chain = hp.inner.clone();
        hp_chain.mcmc.seed = base_seed + chain as u64;
        traces.push(run_chain(&data.inner, &hp_chain, None).map_err(err)?);
    }
    let summary = summarize(&traces).map_err(err)?;
    Ok(PyFitResult {
        summary,
        c_trace: traces
            .iter()
            .map(|t| t.c_values().collect())
            .collect(),
        log_joint_trace: traces
            .iter()
            .map(|t| t.scalars.iter().map(|r| r.log_joint).collect())
            .collect(),
    })
}

/// Distance between equal-shape binary matrices: minimum total disagreement
/// over column permutations.
#[pyfunction]
fn z_distance(a: Vec<Vec<u8>>, b: Vec<Vec<u8>>) -> PyResult<u64> {
    let am = FeatureMatrix::from_rows(&a).map_err(err)?;
    let bm = FeatureMatrix::from_rows(&b).map_err(err)?;
    hapdecon::summary::z_distance(&am, &bm).map_err(err)
}

#[pymodule]
fn hapdecon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCountData>()?;
    m.add_class::<PyHyperparams>()?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PySimTruth>()?;
    m.add_function(wrap_pyfunction!(simulate_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(z_distance, m)?)?;
    Ok(())
}
