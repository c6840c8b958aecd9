//! Domain types of the reduced-rank model `Y = X C + E`, `C = B A'`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DMatrixView};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dist;
use crate::error::{domain, Error, Result};
use crate::linalg::SpdMatrix;

/// Floor applied to simplex weights inside logarithms.
pub const PHI_LOG_FLOOR: f64 = 1e-300;

/// Observed responses `Y` (n x q) and covariates `X` (n x p), with the
/// cross-products the samplers reuse every sweep.
#[derive(Clone, Debug)]
pub struct RegressionData {
    y: DMatrix<f64>,
    x: DMatrix<f64>,
    column_norms_sq: Vec<f64>,
    centered: bool,
    intercept_added: bool,
    xtx: DMatrix<f64>,
    xty: DMatrix<f64>,
    yty: DMatrix<f64>,
}

impl RegressionData {
    /// Requires `q <= p`, `n >= 2`, matching row counts and finite entries.
    pub fn new(y: DMatrix<f64>, x: DMatrix<f64>) -> Result<Self> {
        Self::with_flags(y, x, false, false)
    }

    pub fn with_flags(
        y: DMatrix<f64>,
        x: DMatrix<f64>,
        centered: bool,
        intercept_added: bool,
    ) -> Result<Self> {
        let (n, q, p) = (y.nrows(), y.ncols(), x.ncols());
        if x.nrows() != n {
            return Err(Error::Dimension(format!(
                "Y has {n} rows but X has {}",
                x.nrows()
            )));
        }
        if n < 2 {
            return Err(Error::Data(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if q == 0 || p == 0 {
            return Err(Error::Data("Y and X need at least one column".into()));
        }
        if q > p {
            return Err(Error::Data(format!(
                "number of responses q={q} exceeds number of covariates p={p}; \
                 the maximum rank is taken to be q, so q <= p is required"
            )));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("Y and X must not contain NaN or Inf".into()));
        }
        let column_norms_sq = x.column_iter().map(|c| c.norm_squared()).collect();
        let xt = x.transpose();
        let xtx = &xt * &x;
        let xty = &xt * &y;
        let yty = y.transpose() * &y;
        Ok(Self {
            y,
            x,
            column_norms_sq,
            centered,
            intercept_added,
            xtx,
            xty,
            yty,
        })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// `||X_j||^2` for every covariate column.
    pub fn column_norms_sq(&self) -> &[f64] {
        &self.column_norms_sq
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    pub fn intercept_added(&self) -> bool {
        self.intercept_added
    }

    pub fn xtx(&self) -> &DMatrix<f64> {
        &self.xtx
    }

    pub fn xty(&self) -> &DMatrix<f64> {
        &self.xty
    }

    pub fn yty(&self) -> &DMatrix<f64> {
        &self.yty
    }

    /// Residual cross-product `(Y - XC)'(Y - XC)` from the cached
    /// cross-products, in O(p^2 q) instead of O(n p q).
    pub fn residual_crossprod(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        let ct_xty = c.transpose() * &self.xty;
        let ct_xtx_c = c.transpose() * (&self.xtx * c);
        let m = &self.yty - &ct_xty - ct_xty.transpose() + ct_xtx_c;
        crate::linalg::symmetrize(m)
    }
}

/// Prior hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams {
    /// Dirichlet concentration over ranks 1..=q.
    pub gamma: Vec<f64>,
    /// Inverse-Wishart degrees of freedom.
    pub nu: f64,
    /// Inverse-Wishart scale.
    pub upsilon: SpdMatrix,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    pub alpha_grid_size: usize,
}

impl HyperParams {
    /// `gamma = 1`, `nu = q + 2`, `Upsilon = I`, alpha on `[1/p, 1/2]` with a
    /// 100-point grid. For `p <= 2` the lower bound `1/p` would not lie below
    /// `1/2`, so `0.1` is used instead.
    pub fn defaults(q: usize, p: usize) -> Self {
        let alpha_upper = 0.5;
        let inv_p = 1.0 / p as f64;
        let alpha_lower = if inv_p < alpha_upper { inv_p } else { 0.1 };
        Self {
            gamma: vec![1.0; q],
            nu: q as f64 + 2.0,
            upsilon: SpdMatrix::identity(q),
            alpha_lower,
            alpha_upper,
            alpha_grid_size: 100,
        }
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        if self.gamma.len() != q {
            return Err(Error::Dimension(format!(
                "gamma has length {} but q = {q}",
                self.gamma.len()
            )));
        }
        if self.gamma.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return domain("all gamma entries must be positive");
        }
        if self.upsilon.dim() != q {
            return Err(Error::Dimension(format!(
                "Upsilon is {0}x{0} but q = {q}",
                self.upsilon.dim()
            )));
        }
        if !(self.nu > q as f64 - 1.0) {
            return domain(format!("nu must exceed q - 1 = {}, got {}", q - 1, self.nu));
        }
        if !(self.alpha_lower > 0.0 && self.alpha_lower < self.alpha_upper) {
            return domain(format!(
                "need 0 < alpha_lower < alpha_upper, got [{}, {}]",
                self.alpha_lower, self.alpha_upper
            ));
        }
        if self.alpha_grid_size < 2 {
            return domain("alpha grid needs at least 2 points");
        }
        Ok(())
    }

    /// Evenly spaced grid over `[alpha_lower, alpha_upper]`, both ends included.
    pub fn alpha_grid(&self) -> Vec<f64> {
        let g = self.alpha_grid_size;
        let step = (self.alpha_upper - self.alpha_lower) / (g - 1) as f64;
        (0..g)
            .map(|i| {
                if i == g - 1 {
                    self.alpha_upper
                } else {
                    self.alpha_lower + step * i as f64
                }
            })
            .collect()
    }
}

/// Dirichlet–Laplace shrinkage state of one column `b_h` of `B`.
///
/// `b_lh ~ N(0, psi_l * tau^2 * phi_l^2)`, `tau ~ Ga(alpha p, 1/2)`,
/// `phi ~ Dir(alpha, ..., alpha)`, `psi_l ~ Exp(1/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DlColumnState {
    pub tau: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub alpha: f64,
}

/// Smallest prior variance handed to the Gaussian updates.
pub const PRIOR_VARIANCE_FLOOR: f64 = 1e-300;

impl DlColumnState {
    /// Fresh draw of the whole hierarchy, alpha included.
    pub fn from_prior<R: Rng + ?Sized>(p: usize, hp: &HyperParams, rng: &mut R) -> Result<Self> {
        let alpha = hp.alpha_lower + (hp.alpha_upper - hp.alpha_lower) * rng.random::<f64>();
        let phi = dist::sample_dirichlet(&vec![alpha; p], rng)?;
        let tau = dist::sample_gamma(alpha * p as f64, 0.5, rng)?;
        let psi = (0..p)
            .map(|_| dist::sample_exponential(0.5, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tau,
            phi,
            psi,
            alpha,
        })
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// `psi_l tau^2 phi_l^2`, floored at [`PRIOR_VARIANCE_FLOOR`].
    pub fn prior_variances(&self) -> Vec<f64> {
        let t2 = self.tau * self.tau;
        self.phi
            .iter()
            .zip(&self.psi)
            .map(|(f, s)| (s * t2 * f * f).max(PRIOR_VARIANCE_FLOOR))
            .collect()
    }

    /// Draws a coefficient column from `N(0, diag(prior_variances))`.
    pub fn sample_column<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.prior_variances()
            .iter()
            .map(|v| v.sqrt() * dist::sample_standard_normal(rng))
            .collect()
    }
}

/// How the factor matrices of different ranks relate to each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parametrization {
    /// Every rank owns its own factors: q(q+1)/2 column pairs.
    #[serde(rename = "rrn")]
    Naive,
    /// Rank u uses the first u of q shared column pairs.
    #[serde(rename = "rrcs")]
    ColumnSharing,
}

impl fmt::Display for Parametrization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parametrization::Naive => "rrn",
            Parametrization::ColumnSharing => "rrcs",
        })
    }
}

impl FromStr for Parametrization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rrn" | "naive" => Ok(Parametrization::Naive),
            "rrcs" | "column-sharing" | "shared" => Ok(Parametrization::ColumnSharing),
            other => domain(format!(
                "unknown parametrization '{other}' (expected rrn or rrcs)"
            )),
        }
    }
}

/// Factor pair `(A, B)` with one DL state per column.
#[derive(Clone, Debug, PartialEq)]
pub struct RankComponent {
    /// q x s
    pub a: DMatrix<f64>,
    /// p x s
    pub b: DMatrix<f64>,
    pub dl: Vec<DlColumnState>,
}

impl RankComponent {
    pub fn from_prior<R: Rng + ?Sized>(
        q: usize,
        p: usize,
        cols: usize,
        hp: &HyperParams,
        rng: &mut R,
    ) -> Result<Self> {
        let mut comp = Self {
            a: DMatrix::zeros(q, cols),
            b: DMatrix::zeros(p, cols),
            dl: Vec::with_capacity(cols),
        };
        for h in 0..cols {
            comp.dl.push(DlColumnState::from_prior(p, hp, rng)?);
            comp.refresh_column(h, hp, rng)?;
        }
        Ok(comp)
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// Redraws column `h` (a_h, b_h and its DL hierarchy) from the prior.
    pub fn refresh_column<R: Rng + ?Sized>(
        &mut self,
        h: usize,
        hp: &HyperParams,
        rng: &mut R,
    ) -> Result<()> {
        let p = self.b.nrows();
        self.dl[h] = DlColumnState::from_prior(p, hp, rng)?;
        for j in 0..self.a.nrows() {
            self.a[(j, h)] = dist::sample_standard_normal(rng);
        }
        let b = self.dl[h].sample_column(rng);
        self.b.column_mut(h).copy_from_slice(&b);
        Ok(())
    }
}

/// All factor matrices of the mixture, for either parametrization.
#[derive(Clone, Debug, PartialEq)]
pub enum FactorCollection {
    /// `components[s - 1]` holds `(A_s, B_s)` with `s` columns.
    Naive(Vec<RankComponent>),
    /// q shared columns; `A_u` is the first `u` of them.
    Shared(RankComponent),
}

impl FactorCollection {
    pub fn from_prior<R: Rng + ?Sized>(
        parametrization: Parametrization,
        q: usize,
        p: usize,
        hp: &HyperParams,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match parametrization {
            Parametrization::Naive => FactorCollection::Naive(
                (1..=q)
                    .map(|s| RankComponent::from_prior(q, p, s, hp, rng))
                    .collect::<Result<_>>()?,
            ),
            Parametrization::ColumnSharing => {
                FactorCollection::Shared(RankComponent::from_prior(q, p, q, hp, rng)?)
            }
        })
    }

    pub fn parametrization(&self) -> Parametrization {
        match self {
            FactorCollection::Naive(_) => Parametrization::Naive,
            FactorCollection::Shared(_) => Parametrization::ColumnSharing,
        }
    }

    /// Maximum rank q.
    pub fn max_rank(&self) -> usize {
        match self {
            FactorCollection::Naive(c) => c.len(),
            FactorCollection::Shared(c) => c.cols(),
        }
    }

    /// Number of stored column pairs: q(q+1)/2 or q.
    pub fn column_pair_count(&self) -> usize {
        match self {
            FactorCollection::Naive(c) => c.iter().map(|c| c.cols()).sum(),
            FactorCollection::Shared(c) => c.cols(),
        }
    }

    /// `(A_s, B_s)` for rank `s` in `1..=q`.
    pub fn factors(&self, s: usize) -> (DMatrixView<'_, f64>, DMatrixView<'_, f64>) {
        match self {
            FactorCollection::Naive(c) => {
                let comp = &c[s - 1];
                (comp.a.columns(0, s), comp.b.columns(0, s))
            }
            FactorCollection::Shared(c) => (c.a.columns(0, s), c.b.columns(0, s)),
        }
    }

    /// Coefficient matrix `C_s = B_s A_s'` for rank `s`.
    pub fn coefficients(&self, s: usize) -> DMatrix<f64> {
        let (a, b) = self.factors(s);
        b * a.transpose()
    }
}

/// Every sampled quantity at one MCMC iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    /// Active rank, in `1..=q`.
    pub u: usize,
    pub w: Vec<f64>,
    pub sigma: SpdMatrix,
    pub factors: FactorCollection,
}

impl ChainState {
    /// Starting point of a chain: `u` uniform on `1..=q`, `w = gamma / sum(gamma)`,
    /// `Sigma = I`, factors from the prior.
    pub fn initialize<R: Rng + ?Sized>(
        parametrization: Parametrization,
        q: usize,
        p: usize,
        hp: &HyperParams,
        rng: &mut R,
    ) -> Result<Self> {
        hp.validate(q)?;
        let u = rng.random_range(1..=q);
        let total: f64 = hp.gamma.iter().sum();
        let w = hp.gamma.iter().map(|g| g / total).collect();
        let factors = FactorCollection::from_prior(parametrization, q, p, hp, rng)?;
        Ok(Self {
            u,
            w,
            sigma: SpdMatrix::identity(q),
            factors,
        })
    }

    /// Joint draw of every parameter from the prior.
    pub fn from_prior<R: Rng + ?Sized>(
        parametrization: Parametrization,
        q: usize,
        p: usize,
        hp: &HyperParams,
        rng: &mut R,
    ) -> Result<Self> {
        hp.validate(q)?;
        let w = dist::sample_dirichlet(&hp.gamma, rng)?;
        let log_w: Vec<f64> = w.iter().map(|x| x.ln()).collect();
        let u = dist::sample_categorical_log(&log_w, rng)? + 1;
        let sigma = dist::sample_inverse_wishart(hp.nu, &hp.upsilon, rng)?;
        let factors = FactorCollection::from_prior(parametrization, q, p, hp, rng)?;
        Ok(Self {
            u,
            w,
            sigma,
            factors,
        })
    }

    pub fn q(&self) -> usize {
        self.factors.max_rank()
    }

    /// `C = B_u A_u'` at the active rank.
    pub fn active_coefficients(&self) -> DMatrix<f64> {
        self.factors.coefficients(self.u)
    }
}

/// Retained draws of one or more chains.
#[derive(Clone, Debug, Default)]
pub struct PosteriorDraws {
    pub u_draws: Vec<usize>,
    pub c_draws: Vec<DMatrix<f64>>,
    pub sigma_draws: Option<Vec<DMatrix<f64>>>,
    pub w_draws: Option<Vec<Vec<f64>>>,
    pub meta: DrawMeta,
}

/// Provenance of a set of draws.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DrawMeta {
    pub seeds: Vec<u64>,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub parametrization: Option<Parametrization>,
    pub q: usize,
    pub p: usize,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.u_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_draws.is_empty()
    }

    /// Concatenates the draws of several chains.
    pub fn merge(chains: Vec<PosteriorDraws>) -> Result<PosteriorDraws> {
        let mut iter = chains.into_iter();
        let mut out = iter
            .next()
            .ok_or_else(|| Error::Data("no chains to merge".into()))?;
        for c in iter {
            if c.meta.q != out.meta.q || c.meta.p != out.meta.p {
                return Err(Error::Dimension("chains have different dimensions".into()));
            }
            out.u_draws.extend(c.u_draws);
            out.c_draws.extend(c.c_draws);
            match (&mut out.sigma_draws, c.sigma_draws) {
                (Some(a), Some(b)) => a.extend(b),
                _ => out.sigma_draws = None,
            }
            match (&mut out.w_draws, c.w_draws) {
                (Some(a), Some(b)) => a.extend(b),
                _ => out.w_draws = None,
            }
            out.meta.seeds.extend(c.meta.seeds);
        }
        Ok(out)
    }

    /// Number of retained draws at each rank `1..=q`.
    pub fn rank_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.meta.q];
        for &u in &self.u_draws {
            counts[u - 1] += 1;
        }
        counts
    }

    pub fn rank_posterior(&self) -> Vec<f64> {
        let m = self.len().max(1) as f64;
        self.rank_counts().iter().map(|&c| c as f64 / m).collect()
    }

    /// Posterior mode of the rank; ties go to the smaller rank.
    pub fn map_rank(&self) -> usize {
        map_rank(&self.rank_counts())
    }
}

/// Mode of rank counts (index 0 is rank 1); ties go to the smaller rank.
pub fn map_rank(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best + 1
}

/// `B A'` for factors with a shared inner dimension.
pub fn compose_c(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "A has {} columns but B has {}",
            a.ncols(),
            b.ncols()
        )));
    }
    Ok(b * a.transpose())
}

/// Gaussian log-likelihood of `Y` under `C = B_s A_s'` and error covariance `Sigma`.
pub fn loglik_rank(
    data: &RegressionData,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    sigma: &SpdMatrix,
) -> Result<f64> {
    let c = compose_c(a, b)?;
    if c.nrows() != data.p() || c.ncols() != data.q() || sigma.dim() != data.q() {
        return Err(Error::Dimension(format!(
            "C is {}x{} and Sigma {}x{}, data has p={} q={}",
            c.nrows(),
            c.ncols(),
            sigma.dim(),
            sigma.dim(),
            data.p(),
            data.q()
        )));
    }
    let resid = data.y() - data.x() * &c;
    let chol = sigma.cholesky()?;
    // tr(Sigma^-1 R'R) = ||L^-1 R'||_F^2
    let z = chol
        .l_dirty()
        .solve_lower_triangular(&resid.transpose())
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    Ok(gaussian_loglik(
        data.n(),
        data.q(),
        crate::linalg::log_det_from_cholesky(&chol),
        z.norm_squared(),
    ))
}

/// `-(nq/2) ln 2π - (n/2) ln|Σ| - trace/2`.
pub(crate) fn gaussian_loglik(n: usize, q: usize, log_det: f64, trace: f64) -> f64 {
    let (n, q) = (n as f64, q as f64);
    -0.5 * n * q * (2.0 * std::f64::consts::PI).ln() - 0.5 * n * log_det - 0.5 * trace
}

/// Log of the alpha full conditional up to a constant:
/// `log Ga(tau; alpha p, 1/2) + log Dir(phi; alpha, ..., alpha)`.
///
/// Entries of `phi` below [`PHI_LOG_FLOOR`] are floored inside the log.
pub fn alpha_log_conditional(
    alpha: f64,
    tau: f64,
    phi: &[f64],
    lower: f64,
    upper: f64,
) -> Result<f64> {
    if !(alpha >= lower && alpha <= upper) {
        return domain(format!("alpha = {alpha} outside [{lower}, {upper}]"));
    }
    if !(tau > 0.0) {
        return domain(format!("tau must be positive, got {tau}"));
    }
    let p = phi.len() as f64;
    let sum_log_phi: f64 = phi.iter().map(|f| f.max(PHI_LOG_FLOOR).ln()).sum();
    Ok(alpha_log_conditional_from_stats(
        alpha,
        tau.ln(),
        sum_log_phi,
        p,
    ))
}

pub(crate) fn alpha_log_conditional_from_stats(
    alpha: f64,
    ln_tau: f64,
    sum_log_phi: f64,
    p: f64,
) -> f64 {
    let ap = alpha * p;
    let gamma_part = ap * 0.5f64.ln() - ln_gamma(ap) + (ap - 1.0) * ln_tau;
    let dirichlet_part = if p > 1.0 {
        ln_gamma(ap) - p * ln_gamma(alpha) + (alpha - 1.0) * sum_log_phi
    } else {
        0.0
    };
    gamma_part + dirichlet_part
}
