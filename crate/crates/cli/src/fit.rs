use std::path::PathBuf;

use anyhow::{Context, Result};
use brecs::io::{load_dataset, LoadOptions};
use brecs::rng::derive_seed;
use brecs::selection::{ri_support, ri_survival, CovariateSummary};
use brecs::stats::TestResult;
use brecs::{fit, FitOptions, PosteriorDraws, SamplerConfig, SelectionReport};
use serde::{Deserialize, Serialize};

use crate::config::{check_thresholds, sampler_config, set_jobs, FileConfig, SamplerOverrides};
use crate::output::{num, OutputDir};

pub struct FitRequest {
    pub config: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub x: Option<PathBuf>,
    pub center: bool,
    pub intercept: bool,
    pub subsample: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub chains: Option<usize>,
    pub sr_bar: Option<f64>,
    pub p_bar: Option<f64>,
    pub sampler: SamplerOverrides,
    pub save_draws: bool,
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Seeds {
    pub master: u64,
    pub chain: u64,
    pub subsample: Option<u64>,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FitReport {
    pub n: usize,
    pub q: usize,
    pub p: usize,
    pub y_path: PathBuf,
    pub x_path: PathBuf,
    pub centered: bool,
    pub intercept: bool,
    pub rows: Option<Vec<usize>>,
    pub seeds: Seeds,
    pub sampler: SamplerConfig,
    pub chains: usize,
    pub response_names: Vec<String>,
    pub covariate_names: Vec<String>,
    pub rank_counts: Vec<usize>,
    pub rank_posterior: Vec<f64>,
    pub map_rank: usize,
    pub rank_uniformity: TestResult,
    pub selection: SelectionReport,
}

impl FitReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "n = {}, q = {}, p = {}{}{}\nsampler {} with {} chain(s), {} draws retained\n\n",
            self.n,
            self.q,
            self.p,
            if self.centered {
                ", centered responses"
            } else {
                ""
            },
            if self.intercept { ", intercept" } else { "" },
            self.sampler.parametrization,
            self.chains,
            self.selection.draws
        );
        s.push_str("rank  count  probability\n");
        for (r, (c, pr)) in self
            .rank_counts
            .iter()
            .zip(&self.rank_posterior)
            .enumerate()
        {
            s.push_str(&format!("{:>4}  {c:>5}  {pr:.4}\n", r + 1));
        }
        s.push_str(&format!(
            "MAP rank {}; chi-square uniformity statistic {:.4}, p-value {:.4}\n\n",
            self.map_rank, self.rank_uniformity.statistic, self.rank_uniformity.p_value
        ));
        s.push_str(&self.selection.to_text());
        s
    }
}

pub fn zeta_level(z: f64) -> &'static str {
    if z <= 1.0 / 3.0 {
        "low"
    } else if z <= 2.0 / 3.0 {
        "medium"
    } else {
        "high"
    }
}

pub fn run(req: FitRequest) -> Result<()> {
    let file = FileConfig::load(req.config.as_deref())?;
    set_jobs(req.jobs, file.jobs)?;
    let y_path = req
        .y
        .or(file.data.y.clone())
        .context("no response file: pass --y or set data.y in the config")?;
    let x_path = req
        .x
        .or(file.data.x.clone())
        .context("no covariate file: pass --x or set data.x in the config")?;
    let master = req.seed.or(file.seed).unwrap_or(0);
    let subsample = req.subsample.or(file.data.subsample);
    let seeds = Seeds {
        master,
        chain: derive_seed(master, 0),
        subsample: subsample.map(|_| derive_seed(master, 1)),
    };
    let sampler = sampler_config(&file.sampler, &req.sampler, seeds.chain)?;
    let chains = req.chains.or(file.sampler.chains).unwrap_or(1);
    let opts = FitOptions {
        sampler,
        chains,
        sr_bar: req
            .sr_bar
            .or(file.selection.sr_bar)
            .unwrap_or(brecs::selection::DEFAULT_SR_BAR),
        p_bar: req
            .p_bar
            .or(file.selection.p_bar)
            .unwrap_or(brecs::selection::DEFAULT_P_BAR),
    };
    check_thresholds(opts.sr_bar, opts.p_bar)?;
    let load = LoadOptions {
        center: req.center || file.data.center.unwrap_or(false),
        intercept: req.intercept || file.data.intercept.unwrap_or(false),
        subsample,
        seed: seeds.subsample.unwrap_or(0),
    };
    let out_root = req
        .out
        .or(file.out.clone())
        .unwrap_or_else(|| PathBuf::from("brecs-out"));

    let mut provenance = vec![
        format!("master_seed: {master}"),
        format!("chain_seed: {}", seeds.chain),
    ];
    if let Some(s) = seeds.subsample {
        provenance.push(format!("subsample_seed: {s}"));
    }
    let mut out = OutputDir::create(&out_root, provenance)?;

    let dataset = load_dataset(&y_path, &x_path, &load)?;
    let data = &dataset.data;
    out.note(format!(
        "loaded {} and {}: n = {}, q = {}, p = {}",
        y_path.display(),
        x_path.display(),
        data.n(),
        data.q(),
        data.p()
    ));
    let hp = file.prior.apply(data.q(), data.p())?;
    out.note(format!(
        "{} sampler, {} iterations, burn-in {}, thin {}, {} chain(s)",
        opts.sampler.parametrization,
        opts.sampler.n_iter,
        opts.sampler.burn_in,
        opts.sampler.thin,
        chains
    ));
    let result = fit(data, &hp, &opts, Some(&dataset.covariate_names))?;
    out.note(format!(
        "MAP rank {}, chi-square p-value {:.4}",
        result.map_rank, result.rank_uniformity.p_value
    ));

    let report = FitReport {
        n: data.n(),
        q: data.q(),
        p: data.p(),
        y_path,
        x_path,
        centered: load.center,
        intercept: load.intercept,
        rows: dataset.rows.clone(),
        seeds,
        sampler: opts.sampler.clone(),
        chains,
        response_names: dataset.response_names.clone(),
        covariate_names: dataset.covariate_names.clone(),
        rank_counts: result.draws.rank_counts(),
        rank_posterior: result.rank_posterior.clone(),
        map_rank: result.map_rank,
        rank_uniformity: result.rank_uniformity,
        selection: result.report.clone(),
    };
    write_artifacts(&mut out, &report, &result.draws, req.save_draws)?;
    out.finish()
}

pub fn write_artifacts(
    out: &mut OutputDir,
    report: &FitReport,
    draws: &PosteriorDraws,
    save_draws: bool,
) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .rank_counts
        .iter()
        .zip(&report.rank_posterior)
        .enumerate()
        .map(|(r, (c, p))| vec![(r + 1).to_string(), c.to_string(), num(*p)])
        .collect();
    out.table(
        "rank_posterior.csv",
        &["rank", "count", "probability"],
        &rows,
    )?;

    let per_chain = report.sampler.retained();
    let rows: Vec<Vec<String>> = draws
        .u_draws
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let iteration = report.sampler.burn_in + (i % per_chain) * report.sampler.thin;
            vec![
                (i / per_chain).to_string(),
                iteration.to_string(),
                u.to_string(),
            ]
        })
        .collect();
    out.table("u_trace.csv", &["chain", "iteration", "u"], &rows)?;

    write_posterior_summary(out, report, draws)?;
    if save_draws {
        let mut header = vec!["draw".to_string(), "u".to_string()];
        for j in 0..report.p {
            for k in 0..report.q {
                header.push(format!("c_{}_{}", j + 1, k + 1));
            }
        }
        let rows: Vec<Vec<String>> = draws
            .c_draws
            .iter()
            .zip(&draws.u_draws)
            .enumerate()
            .map(|(m, (c, u))| {
                let mut row = vec![m.to_string(), u.to_string()];
                row.extend(
                    c.row_iter()
                        .flat_map(|r| r.iter().map(|v| num(*v)).collect::<Vec<_>>()),
                );
                row
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        out.table("draws_c.csv", &header, &rows)?;
    }

    write_selection(out, report)?;
    out.json("report.json", report)?;
    out.text("report.txt", &report.to_text())
}

fn write_posterior_summary(
    out: &mut OutputDir,
    report: &FitReport,
    draws: &PosteriorDraws,
) -> Result<()> {
    let m = draws.c_draws.len();
    let mut rows = Vec::with_capacity(report.p * report.q);
    for j in 0..report.p {
        for k in 0..report.q {
            let mut v: Vec<f64> = draws.c_draws.iter().map(|c| c[(j, k)]).collect();
            let mean = v.iter().sum::<f64>() / m as f64;
            let sd = if m > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
            } else {
                0.0
            };
            v.sort_by(f64::total_cmp);
            let quantile = |level: f64| v[((level * m as f64).ceil() as usize).clamp(1, m) - 1];
            rows.push(vec![
                report.covariate_names[j].clone(),
                report.response_names[k].clone(),
                num(mean),
                num(sd),
                num(quantile(0.05)),
                num(quantile(0.5)),
                num(quantile(0.95)),
            ]);
        }
    }
    out.table(
        "posterior_summary.csv",
        &["covariate", "response", "mean", "sd", "q05", "q50", "q95"],
        &rows,
    )
}

pub fn write_selection(out: &mut OutputDir, report: &FitReport) -> Result<()> {
    let sel = &report.selection;
    let (rn, cn) = (&report.covariate_names, &report.response_names);
    out.grid("c_hat.csv", rn, cn, &sel.c_hat_matrix())?;
    out.grid("pip.csv", rn, cn, &sel.pip_matrix())?;
    out.grid("zeta.csv", rn, cn, &sel.zeta_matrix())?;

    let mut rows = Vec::new();
    for j in 0..sel.p {
        for k in 0..sel.q {
            let z = sel.zeta[j][k];
            rows.push(vec![
                rn[j].clone(),
                cn[k].clone(),
                num(sel.c_hat[j][k]),
                num(sel.pip[j][k]),
                num(z),
                zeta_level(z).to_string(),
            ]);
        }
    }
    out.table(
        "heatmap.csv",
        &[
            "covariate",
            "response",
            "c_hat",
            "pip",
            "zeta",
            "zeta_level",
        ],
        &rows,
    )?;

    let support = ri_support(sel.q);
    let mut rows = Vec::new();
    for (j, ri) in sel.ri.iter().enumerate() {
        for (s, mass) in support.iter().zip(ri) {
            rows.push(vec![
                rn[j].clone(),
                num(*s),
                num(*mass),
                num(ri_survival(ri, *s)),
            ]);
        }
    }
    out.table("ri.csv", &["covariate", "share", "mass", "survival"], &rows)?;

    let rows: Vec<Vec<String>> = sel.covariates.iter().map(covariate_row).collect();
    out.table(
        "covariate_summary.csv",
        &[
            "covariate",
            "mode",
            "mean",
            "std",
            "q25",
            "q50",
            "q75",
            "survival",
            "verdict",
        ],
        &rows,
    )
}

fn covariate_row(c: &CovariateSummary) -> Vec<String> {
    let s = &c.summary;
    vec![
        c.name.clone(),
        num(s.mode),
        num(s.mean),
        num(s.std),
        num(s.q25),
        num(s.q50),
        num(s.q75),
        num(c.survival),
        format!("{:?}", c.verdict).to_lowercase(),
    ]
}
