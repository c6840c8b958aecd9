//! End-to-end fit: chains, sparsification and the selection report.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gibbs::{run_chains, SamplerConfig};
use crate::model::{HyperParams, PosteriorDraws, RegressionData};
use crate::selection::{SelectionReport, SparseDrawArchive, DEFAULT_P_BAR, DEFAULT_SR_BAR};
use crate::stats::{chi2_uniformity, TestResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub sampler: SamplerConfig,
    pub chains: usize,
    pub sr_bar: f64,
    pub p_bar: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            chains: 1,
            sr_bar: DEFAULT_SR_BAR,
            p_bar: DEFAULT_P_BAR,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub draws: PosteriorDraws,
    pub rank_posterior: Vec<f64>,
    pub map_rank: usize,
    /// Uniformity test of the rank draws.
    pub rank_uniformity: TestResult,
    pub report: SelectionReport,
}

pub fn fit(
    data: &RegressionData,
    hp: &HyperParams,
    opts: &FitOptions,
    covariate_names: Option<&[String]>,
) -> Result<FitResult> {
    let draws = run_chains(data, hp, &opts.sampler, opts.chains)?;
    let archive = SparseDrawArchive::from_draws(&draws.c_draws, data.column_norms_sq())?;
    let report = SelectionReport::build(&archive, opts.sr_bar, opts.p_bar, covariate_names)?;
    Ok(FitResult {
        rank_posterior: draws.rank_posterior(),
        map_rank: draws.map_rank(),
        rank_uniformity: chi2_uniformity(&draws.rank_counts())?,
        report,
        draws,
    })
}
