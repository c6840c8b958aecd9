//! Run configuration: an optional TOML file overridden by command-line flags.
//!
//! ```toml
//! seed = 1
//! out = "results"
//! jobs = 4
//! replications = 10
//!
//! [data]
//! y = "y.csv"
//! x = "x.csv"
//! center = true
//! intercept = true
//! subsample = 500
//!
//! [sampler]
//! param = "rrcs"
//! iters = 7000
//! burnin = 2000
//! thin = 1
//! chains = 1
//!
//! [selection]
//! sr_bar = 0.7
//! p_bar = 0.6
//!
//! [prior]
//! gamma = 1.0
//! nu = 7.0
//! upsilon_scale = 1.0
//! alpha_lower = 0.1
//! alpha_upper = 0.5
//! alpha_grid = 100
//!
//! [dgp]
//! n = 100
//! q = 5
//! p = 10
//! r0 = 3
//! kind = "sparse"
//! p_star = 5
//! z = 0.5
//! x_corr = false
//! e_corr = false
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use brecs::{HyperParams, Parametrization, SamplerConfig, SpdMatrix};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub replications: Option<usize>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub selection: SelectionSection,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub dgp: DgpSection,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub y: Option<PathBuf>,
    pub x: Option<PathBuf>,
    pub center: Option<bool>,
    pub intercept: Option<bool>,
    pub subsample: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub param: Option<String>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub chains: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    pub sr_bar: Option<f64>,
    pub p_bar: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    /// Common Dirichlet concentration over the ranks.
    pub gamma: Option<f64>,
    pub nu: Option<f64>,
    /// `Upsilon = upsilon_scale * I`.
    pub upsilon_scale: Option<f64>,
    pub alpha_lower: Option<f64>,
    pub alpha_upper: Option<f64>,
    pub alpha_grid: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSection {
    pub n: Option<usize>,
    pub q: Option<usize>,
    pub p: Option<usize>,
    pub r0: Option<usize>,
    pub kind: Option<String>,
    pub p_star: Option<usize>,
    pub z: Option<f64>,
    pub x_corr: Option<bool>,
    pub e_corr: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }
}

impl PriorSection {
    pub fn apply(&self, q: usize, p: usize) -> Result<HyperParams> {
        let mut hp = HyperParams::defaults(q, p);
        if let Some(g) = self.gamma {
            hp.gamma = vec![g; q];
        }
        if let Some(nu) = self.nu {
            hp.nu = nu;
        }
        if let Some(s) = self.upsilon_scale {
            hp.upsilon = SpdMatrix::new(nalgebra::DMatrix::identity(q, q) * s)?;
        }
        if let Some(a) = self.alpha_lower {
            hp.alpha_lower = a;
        }
        if let Some(a) = self.alpha_upper {
            hp.alpha_upper = a;
        }
        if let Some(g) = self.alpha_grid {
            hp.alpha_grid_size = g;
        }
        hp.validate(q)?;
        Ok(hp)
    }
}

/// Sampler flags shared by `fit` and `replicate`; unset flags fall back to
/// the config file, then to the library defaults.
#[derive(Clone, Debug, Default)]
pub struct SamplerOverrides {
    pub param: Option<Parametrization>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
}

pub fn sampler_config(
    file: &SamplerSection,
    flags: &SamplerOverrides,
    seed: u64,
) -> Result<SamplerConfig> {
    let defaults = SamplerConfig::default();
    let param = match (flags.param, &file.param) {
        (Some(p), _) => p,
        (None, Some(s)) => s.parse()?,
        (None, None) => defaults.parametrization,
    };
    let cfg = SamplerConfig {
        parametrization: param,
        n_iter: flags.iters.or(file.iters).unwrap_or(defaults.n_iter),
        burn_in: flags.burnin.or(file.burnin).unwrap_or(defaults.burn_in),
        thin: flags.thin.or(file.thin).unwrap_or(defaults.thin),
        seed,
        ..defaults
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Sizes the global worker pool; the flag wins over the config file.
pub fn set_jobs(flag: Option<usize>, file: Option<usize>) -> Result<()> {
    if let Some(j) = flag.or(file) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()?;
    }
    Ok(())
}

pub fn check_thresholds(sr_bar: f64, p_bar: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&sr_bar) {
        bail!("--sr-bar must lie in [0, 1], got {sr_bar}");
    }
    if !(p_bar > 0.0 && p_bar <= 1.0) {
        bail!("--p-bar must lie in (0, 1], got {p_bar}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_schema() {
        let doc = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let cfg: FileConfig = toml::from_str(&doc).unwrap();
        assert_eq!(cfg.seed, Some(1));
        assert_eq!(cfg.dgp.p_star, Some(5));
        assert_eq!(cfg.prior.alpha_grid, Some(100));
        let hp = cfg.prior.apply(5, 10).unwrap();
        assert_eq!(hp.nu, 7.0);
    }

    #[test]
    fn flags_override_file() {
        let file = SamplerSection {
            param: Some("rrn".into()),
            iters: Some(500),
            burnin: Some(100),
            thin: Some(2),
            chains: None,
        };
        let flags = SamplerOverrides {
            iters: Some(300),
            ..Default::default()
        };
        let cfg = sampler_config(&file, &flags, 3).unwrap();
        assert_eq!(cfg.parametrization, Parametrization::Naive);
        assert_eq!(
            (cfg.n_iter, cfg.burn_in, cfg.thin, cfg.seed),
            (300, 100, 2, 3)
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("sede = 3").is_err());
        assert!(toml::from_str::<FileConfig>("[sampler]\niterations = 3").is_err());
    }
}
