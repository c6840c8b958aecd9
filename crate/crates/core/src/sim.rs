//! Simulation harness: data-generating processes, estimation metrics and
//! the replicated experiment runner.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist;
use crate::error::{domain, Error, Result};
use crate::gibbs::{run_chain, SamplerConfig};
use crate::linalg::cholesky_jittered;
use crate::model::{HyperParams, RegressionData};
use crate::rng::{derive_seed, RngHandle};
use crate::selection::{compute_pip, sparse_point_estimate, SparseDrawArchive};

/// Off-diagonal value of the compound-symmetric covariances.
pub const COMPOUND_SYMMETRY: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpKind {
    NonSparse,
    /// Only `p_star` rows of the coefficient matrix are nonzero.
    SparseRows {
        p_star: usize,
    },
    /// A fraction `z` of the coefficient entries is set to zero.
    RandomZeros {
        z: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n: usize,
    pub q: usize,
    pub p: usize,
    pub r0: usize,
    pub kind: DgpKind,
    pub x_corr: bool,
    pub e_corr: bool,
    pub seed: u64,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.q == 0 || self.p == 0 {
            return domain(format!(
                "invalid dimensions n={}, q={}, p={}",
                self.n, self.q, self.p
            ));
        }
        if self.q > self.p {
            return domain(format!("q = {} exceeds p = {}", self.q, self.p));
        }
        if self.r0 == 0 || self.r0 > self.p.min(self.q) {
            return domain(format!(
                "true rank {} outside 1..={}",
                self.r0,
                self.p.min(self.q)
            ));
        }
        match self.kind {
            DgpKind::SparseRows { p_star } if p_star == 0 || p_star > self.p => {
                domain(format!("p_star = {p_star} outside 1..={}", self.p))
            }
            DgpKind::RandomZeros { z } if !(0.0..=1.0).contains(&z) => {
                domain(format!("zero fraction {z} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

/// Simulated data together with the parameters that generated it.
#[derive(Clone, Debug)]
pub struct TruthBundle {
    pub c0: DMatrix<f64>,
    pub a0: DMatrix<f64>,
    pub b0: DMatrix<f64>,
    pub sigma0: DMatrix<f64>,
    pub x: DMatrix<f64>,
    /// Centered responses.
    pub y: DMatrix<f64>,
}

impl TruthBundle {
    pub fn regression_data(&self) -> Result<RegressionData> {
        RegressionData::with_flags(self.y.clone(), self.x.clone(), true, false)
    }
}

fn compound_symmetric(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(
        dim,
        dim,
        |i, j| if i == j { 1.0 } else { COMPOUND_SYMMETRY },
    )
}

fn gaussian_rows<R: Rng + ?Sized>(
    n: usize,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let l = cholesky_jittered(cov)?.l();
    let z = DMatrix::from_fn(n, cov.nrows(), |_, _| dist::sample_standard_normal(rng));
    Ok(z * l.transpose())
}

fn standard_normal_matrix<R: Rng + ?Sized>(r: usize, c: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| dist::sample_standard_normal(rng))
}

pub fn generate_truth<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<TruthBundle> {
    spec.validate()?;
    let (n, q, p) = (spec.n, spec.q, spec.p);
    let sigma_x = if spec.x_corr {
        compound_symmetric(p)
    } else {
        DMatrix::identity(p, p)
    };
    let sigma0 = if spec.e_corr {
        compound_symmetric(q)
    } else {
        let mut d = DMatrix::zeros(q, q);
        for i in 0..q {
            d[(i, i)] = rng.random_range(0.5..1.75);
        }
        d
    };
    let a0 = standard_normal_matrix(q, spec.r0, rng);
    let mut b0 = standard_normal_matrix(p, spec.r0, rng);
    if let DgpKind::SparseRows { p_star } = spec.kind {
        for j in sample_indices(rng, p, p - p_star) {
            b0.row_mut(j).fill(0.0);
        }
    }
    let mut c0 = &b0 * a0.transpose();
    if let DgpKind::RandomZeros { z } = spec.kind {
        let count = (z * (p * q) as f64).floor() as usize;
        for idx in sample_indices(rng, p * q, count) {
            c0[idx] = 0.0;
        }
    }
    let x = gaussian_rows(n, &sigma_x, rng)?;
    let e = gaussian_rows(n, &sigma0, rng)?;
    let mut y = &x * &c0 + e;
    for mut col in y.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    Ok(TruthBundle {
        c0,
        a0,
        b0,
        sigma0,
        x,
        y,
    })
}

/// `||C_hat - C0||_F^2 / (pq)`.
pub fn mse(c_hat: &DMatrix<f64>, c0: &DMatrix<f64>) -> Result<f64> {
    if c_hat.shape() != c0.shape() {
        return Err(Error::Dimension(format!(
            "estimate is {:?}, truth {:?}",
            c_hat.shape(),
            c0.shape()
        )));
    }
    Ok((c_hat - c0).norm_squared() / c0.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Positives are nonzero entries, compared exactly.
    pub fn from_matrices(c_hat: &DMatrix<f64>, c0: &DMatrix<f64>) -> Result<Self> {
        if c_hat.shape() != c0.shape() {
            return Err(Error::Dimension(format!(
                "estimate is {:?}, truth {:?}",
                c_hat.shape(),
                c0.shape()
            )));
        }
        let mut c = Confusion::default();
        for (e, t) in c_hat.iter().zip(c0.iter()) {
            match (*e != 0.0, *t != 0.0) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    /// Matthews correlation coefficient. When the denominator vanishes the
    /// value is 1 for an error-free classification, -1 when every entry is
    /// misclassified, and 0 otherwise.
    pub fn mcc(&self) -> f64 {
        let (tp, tn, fp, fn_) = (
            self.tp as f64,
            self.tn as f64,
            self.fp as f64,
            self.fn_ as f64,
        );
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            if fp + fn_ == 0.0 {
                1.0
            } else if tp + tn == 0.0 {
                -1.0
            } else {
                0.0
            }
        } else {
            ((tp * tn - fp * fn_) / denom.sqrt()).clamp(-1.0, 1.0)
        }
    }

    /// `TP / (TP + FN)`, absent without true positives.
    pub fn tpr(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }

    pub fn fnr(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.fn_ as f64 / pos as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub mse: f64,
    pub mcc: f64,
    pub tpr: Option<f64>,
    pub fnr: Option<f64>,
    pub confusion: Confusion,
    pub rank_map: usize,
    pub rank_posterior: Vec<f64>,
}

/// Confusion counts, MCC, TPR and FNR of the zero/nonzero pattern.
pub fn classification_metrics(c_hat: &DMatrix<f64>, c0: &DMatrix<f64>) -> Result<(Confusion, f64)> {
    let c = Confusion::from_matrices(c_hat, c0)?;
    Ok((c, c.mcc()))
}

/// One replication of an experiment cell.
#[derive(Clone, Debug)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub data_seed: u64,
    pub chain_seed: u64,
    pub metrics: MetricsRecord,
    pub c0: DMatrix<f64>,
    pub c_hat: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    /// Number of replications contributing (TPR/FNR may be undefined).
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                count: 0,
            };
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            count: v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentAggregate {
    pub replications: usize,
    pub rank: MeanStd,
    pub mse: MeanStd,
    pub mcc: MeanStd,
    pub tpr: MeanStd,
    pub fnr: MeanStd,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub spec: DgpSpec,
    pub sampler: SamplerConfig,
    pub outcomes: Vec<ReplicationOutcome>,
    pub aggregate: ExperimentAggregate,
}

/// Seeds for replication `i`: data from stream `2i`, chain from `2i + 1`.
pub fn replication_seeds(master: u64, i: usize) -> (u64, u64) {
    (
        derive_seed(master, 2 * i as u64),
        derive_seed(master, 2 * i as u64 + 1),
    )
}

/// Generates data, runs one chain and scores the sparse estimate.
pub fn run_replication(
    spec: &DgpSpec,
    cfg: &SamplerConfig,
    replication: usize,
) -> Result<ReplicationOutcome> {
    let (data_seed, chain_seed) = replication_seeds(spec.seed, replication);
    let truth = generate_truth(spec, &mut RngHandle::new(data_seed))?;
    let data = truth.regression_data()?;
    let hp = HyperParams::defaults(spec.q, spec.p);
    let chain_cfg = SamplerConfig {
        seed: chain_seed,
        ..cfg.clone()
    };
    let draws = run_chain(&data, &hp, &chain_cfg)?;
    let archive = SparseDrawArchive::from_draws(&draws.c_draws, data.column_norms_sq())?;
    let pip = compute_pip(&archive);
    let c_hat = sparse_point_estimate(&archive, &pip)?;
    let (confusion, mcc) = classification_metrics(&c_hat, &truth.c0)?;
    let metrics = MetricsRecord {
        mse: mse(&c_hat, &truth.c0)?,
        mcc,
        tpr: confusion.tpr(),
        fnr: confusion.fnr(),
        confusion,
        rank_map: draws.map_rank(),
        rank_posterior: draws.rank_posterior(),
    };
    Ok(ReplicationOutcome {
        replication,
        data_seed,
        chain_seed,
        metrics,
        c0: truth.c0,
        c_hat,
    })
}

/// Runs `replications` independent replications in parallel on the
/// current rayon pool. Deterministic given `spec.seed`.
pub fn run_experiment(
    spec: &DgpSpec,
    cfg: &SamplerConfig,
    replications: usize,
) -> Result<ExperimentResult> {
    spec.validate()?;
    cfg.validate()?;
    if replications == 0 {
        return domain("need at least one replication");
    }
    let outcomes = (0..replications)
        .into_par_iter()
        .map(|i| run_replication(spec, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&outcomes);
    Ok(ExperimentResult {
        spec: spec.clone(),
        sampler: cfg.clone(),
        outcomes,
        aggregate,
    })
}

pub fn aggregate(outcomes: &[ReplicationOutcome]) -> ExperimentAggregate {
    let m = || outcomes.iter().map(|o| &o.metrics);
    ExperimentAggregate {
        replications: outcomes.len(),
        rank: MeanStd::of(m().map(|r| r.rank_map as f64)),
        mse: MeanStd::of(m().map(|r| r.mse)),
        mcc: MeanStd::of(m().map(|r| r.mcc)),
        tpr: MeanStd::of(m().filter_map(|r| r.tpr)),
        fnr: MeanStd::of(m().filter_map(|r| r.fnr)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: DgpKind) -> DgpSpec {
        DgpSpec {
            n: 50,
            q: 5,
            p: 10,
            r0: 3,
            kind,
            x_corr: true,
            e_corr: false,
            seed: 1,
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(DgpKind::NonSparse);
        assert!(s.validate().is_ok());
        s.r0 = 6;
        assert!(s.validate().is_err());
        let s = spec(DgpKind::SparseRows { p_star: 11 });
        assert!(s.validate().is_err());
        let s = spec(DgpKind::RandomZeros { z: 1.5 });
        assert!(s.validate().is_err());
    }

    #[test]
    fn responses_are_centered() {
        let t = generate_truth(&spec(DgpKind::NonSparse), &mut RngHandle::new(3)).unwrap();
        for col in t.y.column_iter() {
            assert!(col.mean().abs() < 1e-12);
        }
    }

    #[test]
    fn mse_direct_values() {
        let z = DMatrix::<f64>::zeros(3, 4);
        assert_eq!(mse(&z, &z).unwrap(), 0.0);
        assert_eq!(mse(&DMatrix::from_element(3, 4, 1.0), &z).unwrap(), 1.0);
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert_eq!(mse(&d, &DMatrix::zeros(2, 2)).unwrap(), 1.25);
        assert!(mse(&d, &z).is_err());
    }

    #[test]
    fn mcc_degenerate_rules() {
        let ones = DMatrix::from_element(2, 2, 1.0);
        let zeros = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(classification_metrics(&ones, &ones).unwrap().1, 1.0);
        assert_eq!(classification_metrics(&zeros, &zeros).unwrap().1, 1.0);
        assert_eq!(classification_metrics(&zeros, &ones).unwrap().1, -1.0);
        assert_eq!(classification_metrics(&ones, &zeros).unwrap().1, -1.0);
        let mixed = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(classification_metrics(&ones, &mixed).unwrap().1, 0.0);
        assert_eq!(classification_metrics(&mixed, &ones).unwrap().1, 0.0);
    }

    #[test]
    fn mcc_perfect_mixed() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let (c, mcc) = classification_metrics(&m, &m).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (1, 1, 0, 0));
        assert_eq!(mcc, 1.0);
        assert_eq!(c.tpr(), Some(1.0));
        assert_eq!(c.fnr(), Some(0.0));
    }

    #[test]
    fn tpr_absent_without_positives() {
        let z = DMatrix::<f64>::zeros(2, 2);
        let (c, _) = classification_metrics(&z, &z).unwrap();
        assert_eq!(c.tpr(), None);
        assert_eq!(c.fnr(), None);
    }

    #[test]
    fn mean_std_sample_formula() {
        let m = MeanStd::of([1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
        assert_eq!(MeanStd::of(std::iter::empty()).count, 0);
    }
}
