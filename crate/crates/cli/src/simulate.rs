use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use brecs::rng::derive_seed;
use brecs::sim::{generate_truth, DgpKind, DgpSpec};
use brecs::RngHandle;
use serde::Serialize;

use crate::config::{DgpSection, FileConfig};
use crate::output::OutputDir;

#[derive(Clone, Debug, Default)]
pub struct DgpOverrides {
    pub n: Option<usize>,
    pub q: Option<usize>,
    pub p: Option<usize>,
    pub r0: Option<usize>,
    pub kind: Option<String>,
    pub p_star: Option<usize>,
    pub z: Option<f64>,
    pub x_corr: bool,
    pub e_corr: bool,
}

pub struct SimulateRequest {
    pub config: Option<PathBuf>,
    pub dgp: DgpOverrides,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

pub fn parse_kind(kind: &str, p_star: Option<usize>, z: Option<f64>) -> Result<DgpKind> {
    Ok(match kind.to_ascii_lowercase().as_str() {
        "non-sparse" | "nonsparse" | "dense" | "standard" => DgpKind::NonSparse,
        "sparse" | "sparse-rows" => DgpKind::SparseRows {
            p_star: p_star.context("a sparse DGP needs --p-star")?,
        },
        "zeros" | "random-zeros" => DgpKind::RandomZeros {
            z: z.context("a random-zeros DGP needs --z")?,
        },
        other => bail!("unknown DGP kind '{other}' (expected non-sparse, sparse or zeros)"),
    })
}

pub fn dgp_spec(file: &DgpSection, flags: &DgpOverrides, seed: u64) -> Result<DgpSpec> {
    let kind = flags
        .kind
        .clone()
        .or(file.kind.clone())
        .unwrap_or_else(|| "non-sparse".to_string());
    let spec = DgpSpec {
        n: flags.n.or(file.n).unwrap_or(100),
        q: flags.q.or(file.q).unwrap_or(5),
        p: flags.p.or(file.p).unwrap_or(10),
        r0: flags.r0.or(file.r0).unwrap_or(3),
        kind: parse_kind(&kind, flags.p_star.or(file.p_star), flags.z.or(file.z))?,
        x_corr: flags.x_corr || file.x_corr.unwrap_or(false),
        e_corr: flags.e_corr || file.e_corr.unwrap_or(false),
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct TruthRecord<'a> {
    spec: &'a DgpSpec,
    data_seed: u64,
}

fn names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

pub fn run(req: SimulateRequest) -> Result<()> {
    let file = FileConfig::load(req.config.as_deref())?;
    let master = req.seed.or(file.seed).unwrap_or(0);
    let spec = dgp_spec(&file.dgp, &req.dgp, master)?;
    let data_seed = derive_seed(master, 0);
    let out_root = req
        .out
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("brecs-sim"));
    let mut out = OutputDir::create(
        &out_root,
        vec![
            format!("master_seed: {master}"),
            format!("data_seed: {data_seed}"),
        ],
    )?;
    let truth = generate_truth(&spec, &mut RngHandle::new(data_seed))?;
    out.note(format!(
        "simulated n = {}, q = {}, p = {}, r0 = {}, {:?}",
        spec.n, spec.q, spec.p, spec.r0, spec.kind
    ));
    let (ys, xs) = (names("y", spec.q), names("x", spec.p));
    out.matrix("y.csv", &ys, &truth.y)?;
    out.matrix("x.csv", &xs, &truth.x)?;
    out.grid("c0.csv", &xs, &ys, &truth.c0)?;
    out.grid("b0.csv", &xs, &names("f", truth.b0.ncols()), &truth.b0)?;
    out.grid("a0.csv", &ys, &names("f", truth.a0.ncols()), &truth.a0)?;
    out.grid("sigma0.csv", &ys, &ys, &truth.sigma0)?;
    out.json(
        "truth.json",
        &TruthRecord {
            spec: &spec,
            data_seed,
        },
    )?;
    out.finish()
}
