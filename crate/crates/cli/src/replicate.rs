use std::path::PathBuf;

use anyhow::Result;
use brecs::rng::derive_seed;
use brecs::sim::{run_experiment, DgpKind, DgpSpec, ExperimentResult};
use brecs::Parametrization;
use clap::ValueEnum;
use serde::Serialize;

use crate::config::{sampler_config, set_jobs, FileConfig, SamplerOverrides};
use crate::output::{num, opt_num, OutputDir};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableId {
    /// Rank posterior, non-sparse (5, 10), r0 = 3, n in {50, 100, 500}.
    Fig2,
    /// True and estimated coefficient matrices at (5, 10), n = 100.
    Fig3,
    /// MCC/TPR/FNR over sparse and random-zeros designs at (5, 10), n = 100.
    Table2,
    /// Rank and MSE at (5, 15), r0 = 3, n = 50, p* = 5, independent X and errors.
    Table3Cell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Desk,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ParamChoice {
    Rrn,
    Rrcs,
    Both,
}

impl ParamChoice {
    fn list(self) -> Vec<Parametrization> {
        match self {
            ParamChoice::Rrn => vec![Parametrization::Naive],
            ParamChoice::Rrcs => vec![Parametrization::ColumnSharing],
            ParamChoice::Both => vec![Parametrization::Naive, Parametrization::ColumnSharing],
        }
    }
}

pub struct ReplicateRequest {
    pub table: TableId,
    pub scale: Scale,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub replications: Option<usize>,
    pub param: Option<ParamChoice>,
    pub sampler: SamplerOverrides,
    pub jobs: Option<usize>,
}

/// One experiment cell of a table.
#[derive(Clone, Debug, Serialize)]
pub struct Cell {
    pub label: String,
    pub spec: DgpSpec,
    pub replications: usize,
}

fn base(n: usize, q: usize, p: usize, kind: DgpKind) -> DgpSpec {
    DgpSpec {
        n,
        q,
        p,
        r0: 3,
        kind,
        x_corr: false,
        e_corr: false,
        seed: 0,
    }
}

fn label(kind: DgpKind) -> String {
    match kind {
        DgpKind::NonSparse => "non-sparse".to_string(),
        DgpKind::SparseRows { p_star } => format!("p*={p_star}"),
        DgpKind::RandomZeros { z } => format!("z={z}"),
    }
}

/// The experiment grid of `table` at `scale`, before seeding.
pub fn cells(table: TableId, scale: Scale) -> Vec<Cell> {
    let reps = match scale {
        Scale::Desk => 5,
        Scale::Full => 20,
    };
    let cell = |label: String, spec: DgpSpec, replications: usize| Cell {
        label,
        spec,
        replications,
    };
    match table {
        TableId::Fig2 => [50, 100, 500]
            .into_iter()
            .map(|n| cell(format!("n={n}"), base(n, 5, 10, DgpKind::NonSparse), reps))
            .collect(),
        TableId::Fig3 => [
            DgpKind::NonSparse,
            DgpKind::SparseRows { p_star: 5 },
            DgpKind::RandomZeros { z: 0.5 },
        ]
        .into_iter()
        .map(|k| cell(label(k), base(100, 5, 10, k), 1))
        .collect(),
        TableId::Table2 => std::iter::once(DgpKind::NonSparse)
            .chain([2, 5, 8, 9].map(|p_star| DgpKind::SparseRows { p_star }))
            .chain([0.2, 0.5, 0.8, 0.9].map(|z| DgpKind::RandomZeros { z }))
            .map(|k| cell(label(k), base(100, 5, 10, k), reps))
            .collect(),
        TableId::Table3Cell => {
            let reps = match scale {
                Scale::Desk => 10,
                Scale::Full => 20,
            };
            vec![cell(
                "(5,15) r0=3 p*=5".to_string(),
                base(50, 5, 15, DgpKind::SparseRows { p_star: 5 }),
                reps,
            )]
        }
    }
}

fn kind_name(kind: DgpKind) -> &'static str {
    match kind {
        DgpKind::NonSparse => "non-sparse",
        DgpKind::SparseRows { .. } => "sparse",
        DgpKind::RandomZeros { .. } => "random-zeros",
    }
}

fn file_stem(table: TableId) -> &'static str {
    match table {
        TableId::Fig2 => "fig2",
        TableId::Fig3 => "fig3",
        TableId::Table2 => "table2",
        TableId::Table3Cell => "table3_cell",
    }
}

pub fn run(req: ReplicateRequest) -> Result<()> {
    let file = FileConfig::load(req.config.as_deref())?;
    set_jobs(req.jobs, file.jobs)?;
    let master = req.seed.or(file.seed).unwrap_or(0);
    let sampler = sampler_config(&file.sampler, &req.sampler, 0)?;
    let params = req
        .param
        .or(req.sampler.param.map(|p| match p {
            Parametrization::Naive => ParamChoice::Rrn,
            Parametrization::ColumnSharing => ParamChoice::Rrcs,
        }))
        .unwrap_or(ParamChoice::Rrcs)
        .list();
    let mut grid = cells(req.table, req.scale);
    for (i, c) in grid.iter_mut().enumerate() {
        c.spec.seed = derive_seed(master, i as u64);
        if let Some(r) = req.replications.or(file.replications) {
            c.replications = r;
        }
    }
    let stem = file_stem(req.table);
    let out_root = req
        .out
        .or(file.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("brecs-{stem}")));
    let mut provenance = vec![format!("master_seed: {master}")];
    provenance.extend(
        grid.iter()
            .enumerate()
            .map(|(i, c)| format!("cell {i} ({}) seed: {}", c.label, c.spec.seed)),
    );
    let mut out = OutputDir::create(&out_root, provenance)?;
    out.note(format!(
        "{stem}: {} cell(s), {} iterations, burn-in {}, thin {}",
        grid.len(),
        sampler.n_iter,
        sampler.burn_in,
        sampler.thin
    ));

    let mut results: Vec<(usize, ExperimentResult)> = Vec::new();
    for (i, c) in grid.iter().enumerate() {
        for &param in &params {
            let cfg = brecs::SamplerConfig {
                parametrization: param,
                ..sampler.clone()
            };
            let r = run_experiment(&c.spec, &cfg, c.replications)?;
            out.note(format!(
                "cell {i} ({}) {param}: mean rank {:.3}, mean MSE {:.4}, mean MCC {:.3}",
                c.label, r.aggregate.rank.mean, r.aggregate.mse.mean, r.aggregate.mcc.mean
            ));
            results.push((i, r));
        }
    }

    write_tables(&mut out, stem, &grid, &results)?;
    match req.table {
        TableId::Fig2 => write_fig2(&mut out, &grid, &results)?,
        TableId::Fig3 => write_fig3(&mut out, &grid, &results)?,
        _ => {}
    }
    out.finish()
}

#[derive(Serialize)]
struct AggregateRecord<'a> {
    cell: &'a Cell,
    sampler: Parametrization,
    aggregate: &'a brecs::sim::ExperimentAggregate,
}

fn write_tables(
    out: &mut OutputDir,
    stem: &str,
    grid: &[Cell],
    results: &[(usize, ExperimentResult)],
) -> Result<()> {
    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for (i, r) in results {
        let c = &grid[*i];
        let a = &r.aggregate;
        let s = &c.spec;
        let sampler = r.sampler.parametrization.to_string();
        rows.push(vec![
            c.label.clone(),
            sampler.clone(),
            s.n.to_string(),
            s.q.to_string(),
            s.p.to_string(),
            s.r0.to_string(),
            kind_name(s.kind).to_string(),
            a.replications.to_string(),
            num(a.rank.mean),
            num(a.rank.std),
            num(a.mse.mean),
            num(a.mse.std),
            num(a.mcc.mean),
            num(a.mcc.std),
            num(a.tpr.mean),
            num(a.fnr.mean),
        ]);
        for o in &r.outcomes {
            let m = &o.metrics;
            raw.push(vec![
                c.label.clone(),
                sampler.clone(),
                o.replication.to_string(),
                o.data_seed.to_string(),
                o.chain_seed.to_string(),
                m.rank_map.to_string(),
                num(m.mse),
                num(m.mcc),
                opt_num(m.tpr),
                opt_num(m.fnr),
                m.confusion.tp.to_string(),
                m.confusion.tn.to_string(),
                m.confusion.fp.to_string(),
                m.confusion.fn_.to_string(),
            ]);
        }
    }
    out.table(
        &format!("{stem}.csv"),
        &[
            "cell",
            "sampler",
            "n",
            "q",
            "p",
            "r0",
            "dgp",
            "replications",
            "rank_mean",
            "rank_std",
            "mse_mean",
            "mse_std",
            "mcc_mean",
            "mcc_std",
            "tpr_mean",
            "fnr_mean",
        ],
        &rows,
    )?;
    out.table(
        &format!("{stem}_replications.csv"),
        &[
            "cell",
            "sampler",
            "replication",
            "data_seed",
            "chain_seed",
            "rank_map",
            "mse",
            "mcc",
            "tpr",
            "fnr",
            "tp",
            "tn",
            "fp",
            "fn",
        ],
        &raw,
    )?;
    let records: Vec<AggregateRecord> = results
        .iter()
        .map(|(i, r)| AggregateRecord {
            cell: &grid[*i],
            sampler: r.sampler.parametrization,
            aggregate: &r.aggregate,
        })
        .collect();
    out.json(&format!("{stem}.json"), &records)
}

fn write_fig2(
    out: &mut OutputDir,
    grid: &[Cell],
    results: &[(usize, ExperimentResult)],
) -> Result<()> {
    let mut rows = Vec::new();
    for (i, r) in results {
        for o in &r.outcomes {
            for (s, p) in o.metrics.rank_posterior.iter().enumerate() {
                rows.push(vec![
                    grid[*i].label.clone(),
                    r.sampler.parametrization.to_string(),
                    o.replication.to_string(),
                    (s + 1).to_string(),
                    num(*p),
                ]);
            }
        }
    }
    out.table(
        "fig2_rank_posterior.csv",
        &["cell", "sampler", "replication", "rank", "probability"],
        &rows,
    )
}

fn write_fig3(
    out: &mut OutputDir,
    grid: &[Cell],
    results: &[(usize, ExperimentResult)],
) -> Result<()> {
    let mut sidecar = Vec::new();
    for (i, r) in results {
        let c = &grid[*i];
        let o = &r.outcomes[0];
        let sampler = r.sampler.parametrization.to_string();
        let tag = format!(
            "fig3_{}_{sampler}",
            kind_name(c.spec.kind).replace('-', "_")
        );
        let rn: Vec<String> = (1..=c.spec.p).map(|j| format!("x{j}")).collect();
        let cn: Vec<String> = (1..=c.spec.q).map(|k| format!("y{k}")).collect();
        out.grid(&format!("{tag}_c0.csv"), &rn, &cn, &o.c0)?;
        out.grid(&format!("{tag}_c_hat.csv"), &rn, &cn, &o.c_hat)?;
        sidecar.push(vec![c.label.clone(), sampler, tag, num(o.metrics.mse)]);
    }
    out.table(
        "fig3_mse.csv",
        &["cell", "sampler", "files", "mse"],
        &sidecar,
    )
}
