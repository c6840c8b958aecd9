//! Joint-distribution test of the samplers: draws of `(theta, Y)` from the
//! prior-then-likelihood simulator must match those of a chain alternating
//! one Gibbs sweep `theta | Y` with a fresh `Y | theta`.
//!
//! The rank allocation can stay put for thousands of sweeps, so a single
//! long successive-conditional chain gives badly autocorrelated draws.
//! Instead each successive-conditional sample comes from its own short run
//! started at an exact joint prior draw. A correct sampler leaves the joint
//! distribution invariant at every step, so the end points are iid draws
//! from it and the KS comparison is exact.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist;
use crate::error::Result;
use crate::gibbs::GibbsSampler;
use crate::model::{ChainState, HyperParams, Parametrization, RegressionData};
use crate::rng::RngHandle;
use crate::stats::{ks_two_sample, TestResult};

#[derive(Clone, Debug)]
pub struct GewekeConfig {
    pub parametrization: Parametrization,
    pub q: usize,
    pub p: usize,
    pub n: usize,
    /// Draws per simulator.
    pub samples: usize,
    /// Sweeps in each successive-conditional run.
    pub sweeps: usize,
    pub hp: HyperParams,
    pub seed: u64,
}

impl GewekeConfig {
    pub fn new(parametrization: Parametrization, q: usize, p: usize, n: usize) -> Self {
        Self {
            parametrization,
            q,
            p,
            n,
            samples: 10_000,
            sweeps: 10,
            hp: HyperParams::defaults(q, p),
            seed: 0,
        }
    }
}

/// Names of the statistics compared, in the order of [`state_statistics`].
pub const STATISTIC_NAMES: [&str; 5] = ["u", "sigma11", "c11", "c22", "c31"];

/// `(u, Sigma_11, C_11, C_22, C_31)`; needs `q >= 2` and `p >= 3`.
pub fn state_statistics(state: &ChainState) -> [f64; 5] {
    let c = state.active_coefficients();
    [
        state.u as f64,
        state.sigma.as_matrix()[(0, 0)],
        c[(0, 0)],
        c[(1, 1)],
        c[(2, 0)],
    ]
}

/// `Y = X C + E` with rows of `E` drawn from `N(0, Sigma)`.
pub fn simulate_response(
    state: &ChainState,
    x: &DMatrix<f64>,
    rng: &mut RngHandle,
) -> Result<DMatrix<f64>> {
    let l = state.sigma.cholesky()?.l();
    let e = DMatrix::from_fn(x.nrows(), state.q(), |_, _| {
        dist::sample_standard_normal(rng)
    });
    Ok(x * state.active_coefficients() + e * l.transpose())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GewekeComparison {
    pub name: String,
    pub marginal_mean: f64,
    pub successive_mean: f64,
    pub ks: TestResult,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GewekeReport {
    pub comparisons: Vec<GewekeComparison>,
}

impl GewekeReport {
    pub fn min_p_value(&self) -> f64 {
        self.comparisons
            .iter()
            .map(|c| c.ks.p_value)
            .fold(1.0, f64::min)
    }
}

fn design(cfg: &GewekeConfig) -> DMatrix<f64> {
    let mut rng = RngHandle::for_stream(cfg.seed, 0);
    DMatrix::from_fn(cfg.n, cfg.p, |_, _| dist::sample_standard_normal(&mut rng))
}

/// Independent prior draws; `Y` is not needed for the parameter statistics.
pub fn marginal_conditional(cfg: &GewekeConfig) -> Result<Vec<[f64; 5]>> {
    let mut rng = RngHandle::for_stream(cfg.seed, 1);
    (0..cfg.samples)
        .map(|_| {
            let state =
                ChainState::from_prior(cfg.parametrization, cfg.q, cfg.p, &cfg.hp, &mut rng)?;
            Ok(state_statistics(&state))
        })
        .collect()
}

/// For each sample: a joint prior draw followed by `sweeps` alternations of
/// a fresh response and one Gibbs sweep. Runs in parallel, one RNG stream
/// per sample.
pub fn successive_conditional(cfg: &GewekeConfig) -> Result<Vec<[f64; 5]>> {
    let x = design(cfg);
    (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngHandle::for_stream(cfg.seed, 2 + i as u64);
            let mut state =
                ChainState::from_prior(cfg.parametrization, cfg.q, cfg.p, &cfg.hp, &mut rng)?;
            let mut sampler = GibbsSampler::new(cfg.hp.clone())?;
            for _ in 0..cfg.sweeps.max(1) {
                let y = simulate_response(&state, &x, &mut rng)?;
                let data = RegressionData::with_flags(y, x.clone(), false, false)?;
                sampler.sweep(&mut state, &data, &mut rng)?;
            }
            Ok(state_statistics(&state))
        })
        .collect()
}

/// Runs both simulators and compares each statistic with a two-sample KS test.
pub fn geweke_test(cfg: &GewekeConfig) -> Result<GewekeReport> {
    let marginal = marginal_conditional(cfg)?;
    let successive = successive_conditional(cfg)?;
    let comparisons = STATISTIC_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let a: Vec<f64> = marginal.iter().map(|s| s[k]).collect();
            let b: Vec<f64> = successive.iter().map(|s| s[k]).collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            Ok(GewekeComparison {
                name: (*name).to_string(),
                marginal_mean: mean(&a),
                successive_mean: mean(&b),
                ks: ks_two_sample(&a, &b)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GewekeReport { comparisons })
}
