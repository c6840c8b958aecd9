//! Gibbs samplers for the mixture-of-ranks model, in the naive (RRn) and
//! column-sharing (RRcs) parametrizations.
//!
//! Each full-conditional update is exposed as a free function so it can be
//! tested against a direct computation; [`GibbsSampler::sweep`] chains them
//! in the order rank, weights, Sigma, factors (plus prior refresh of the
//! inactive ones), DL locals and alpha.
//!
//! Inactive factors are redrawn from their prior every sweep. With the
//! pseudo-prior equal to the prior, the rank update only needs the
//! likelihood of each candidate rank.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist;
use crate::error::{domain, Error, Result};
use crate::linalg::{log_det_from_cholesky, SpdMatrix};
use crate::model::{
    gaussian_loglik, ChainState, DlColumnState, DrawMeta, FactorCollection, HyperParams,
    Parametrization, PosteriorDraws, RankComponent, RegressionData, PHI_LOG_FLOOR,
};
use crate::rng::RngHandle;

/// Floor on `|b_lh|` inside the DL conditionals.
pub const B_ABS_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub parametrization: Parametrization,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub store_sigma: bool,
    pub store_w: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            parametrization: Parametrization::ColumnSharing,
            n_iter: 7000,
            burn_in: 2000,
            thin: 1,
            seed: 0,
            store_sigma: false,
            store_w: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return domain(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.n_iter
            ));
        }
        if self.thin == 0 {
            return domain("thinning must be at least 1");
        }
        Ok(())
    }

    /// Number of draws a single chain retains.
    pub fn retained(&self) -> usize {
        (self.n_iter - self.burn_in).div_ceil(self.thin)
    }
}

/// Instrumentation of the work done per sweep.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpdateCounters {
    pub sweeps: usize,
    /// Column pairs `(a_h, b_h)` drawn from their full conditional.
    pub posterior_columns: usize,
    /// Column pairs redrawn from the prior.
    pub prior_columns: usize,
    /// DL local updates, one per column.
    pub dl_updates: usize,
}

impl UpdateCounters {
    pub fn column_pair_updates(&self) -> usize {
        self.posterior_columns + self.prior_columns
    }
}

/// Alpha grid with the alpha-only terms of the conditional cached.
#[derive(Clone, Debug)]
pub struct AlphaGrid {
    alphas: Vec<f64>,
    ln_gamma_alpha: Vec<f64>,
}

impl AlphaGrid {
    pub fn new(hp: &HyperParams) -> Self {
        let alphas = hp.alpha_grid();
        let ln_gamma_alpha = alphas
            .iter()
            .map(|&a| statrs::function::gamma::ln_gamma(a))
            .collect();
        Self {
            alphas,
            ln_gamma_alpha,
        }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Unnormalized log-conditional of every grid point. The `ln Γ(αp)`
    /// terms of the Gamma and Dirichlet densities cancel.
    pub fn log_conditional(&self, tau: f64, phi: &[f64]) -> Vec<f64> {
        let p = phi.len() as f64;
        let ln_tau = tau.ln();
        let sum_log_phi: f64 = phi.iter().map(|f| f.max(PHI_LOG_FLOOR).ln()).sum();
        let ln_half = 0.5f64.ln();
        self.alphas
            .iter()
            .zip(&self.ln_gamma_alpha)
            .map(|(&a, &lga)| {
                let ap = a * p;
                ap * ln_half + (ap - 1.0) * ln_tau - p * lga + (a - 1.0) * sum_log_phi
            })
            .collect()
    }
}

/// Draws the rank allocation: `P(u = s) ∝ w_s · L(Y | A_s, B_s, Sigma)`.
/// Returns a rank in `1..=q`.
pub fn update_rank<R: Rng + ?Sized>(
    state: &ChainState,
    data: &RegressionData,
    rng: &mut R,
) -> Result<usize> {
    let log_post = rank_log_posterior(state, data)?;
    Ok(dist::sample_categorical_log(&log_post, rng)? + 1)
}

/// Unnormalized `ln w_s + loglik_s` for every rank.
pub fn rank_log_posterior(state: &ChainState, data: &RegressionData) -> Result<Vec<f64>> {
    let chol = state.sigma.cholesky()?;
    let log_det = log_det_from_cholesky(&chol);
    let sigma_inv = crate::linalg::symmetrize(chol.inverse());
    (1..=state.q())
        .map(|s| {
            let c = state.factors.coefficients(s);
            let rtr = data.residual_crossprod(&c);
            let trace = sigma_inv.component_mul(&rtr).sum();
            let ll = gaussian_loglik(data.n(), data.q(), log_det, trace);
            Ok(state.w[s - 1].ln() + ll)
        })
        .collect()
}

/// Mixture weights given the allocation: `Dir(gamma + e_u)`.
pub fn update_weights<R: Rng + ?Sized>(u: usize, gamma: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if u == 0 || u > gamma.len() {
        return domain(format!("rank {u} outside 1..={}", gamma.len()));
    }
    let mut post = gamma.to_vec();
    post[u - 1] += 1.0;
    dist::sample_dirichlet(&post, rng)
}

/// Error covariance: `IW(nu + n, Upsilon + (Y - XC)'(Y - XC))` at the active rank.
pub fn update_sigma<R: Rng + ?Sized>(
    state: &ChainState,
    data: &RegressionData,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<SpdMatrix> {
    let c = state.active_coefficients();
    let resid = data.y() - data.x() * &c;
    let scale = hp.upsilon.as_matrix() + resid.transpose() * &resid;
    let scale = SpdMatrix::from_trusted(scale);
    dist::sample_inverse_wishart(hp.nu + data.n() as f64, &scale, rng)
}

/// Canonical-form Gaussian conditional: precision and shift `Omega mu`.
#[derive(Clone, Debug)]
pub struct GaussianConditional {
    pub precision: DMatrix<f64>,
    pub shift: DVector<f64>,
}

impl GaussianConditional {
    pub fn mean(&self) -> Result<DVector<f64>> {
        let chol = crate::linalg::cholesky_jittered(&self.precision)?;
        Ok(chol.solve(&self.shift))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        dist::sample_mvn_precision(&self.shift, &self.precision, rng)
    }
}

/// Conditional of `vec(A)` (column-major) given `B` and `Sigma`, under the
/// prior `vec(A) ~ N(0, I)`.
///
/// Precision `I + (B'X'XB) ⊗ Sigma^-1`, shift `vec(Sigma^-1 Y'XB)`.
pub fn a_block_conditional(
    b: &DMatrix<f64>,
    sigma_inv: &DMatrix<f64>,
    data: &RegressionData,
) -> GaussianConditional {
    let q = data.q();
    let u = b.ncols();
    let ztz = b.transpose() * (data.xtx() * b);
    let yt_z = data.xty().transpose() * b;
    let shift = sigma_inv * yt_z;
    let mut precision = ztz.kronecker(sigma_inv);
    for i in 0..q * u {
        precision[(i, i)] += 1.0;
    }
    GaussianConditional {
        precision,
        shift: DVector::from_column_slice(shift.as_slice()),
    }
}

pub fn update_a_block<R: Rng + ?Sized>(
    b: &DMatrix<f64>,
    sigma_inv: &DMatrix<f64>,
    data: &RegressionData,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let v = a_block_conditional(b, sigma_inv, data).sample(rng)?;
    Ok(DMatrix::from_column_slice(
        data.q(),
        b.ncols(),
        v.as_slice(),
    ))
}

/// Conditional of `vec(B')` given `A`, `Sigma` and the DL prior variances
/// `Lambda`.
///
/// Precision `Lambda^-1 + (X'X) ⊗ (A' Sigma^-1 A)`, shift `vec((X'Y Sigma^-1 A)')`.
pub fn b_block_conditional(
    a: &DMatrix<f64>,
    dl: &[DlColumnState],
    sigma_inv: &DMatrix<f64>,
    data: &RegressionData,
) -> Result<GaussianConditional> {
    let u = a.ncols();
    if dl.len() != u {
        return Err(Error::Dimension(format!(
            "{} DL states for {u} columns",
            dl.len()
        )));
    }
    let s_inv_a = sigma_inv * a;
    let ata = a.transpose() * &s_inv_a;
    let mut precision = data.xtx().kronecker(&ata);
    for (h, state) in dl.iter().enumerate() {
        for (l, var) in state.prior_variances().into_iter().enumerate() {
            precision[(l * u + h, l * u + h)] += 1.0 / var;
        }
    }
    // row-major vec of the p x u shift == column-major vec of its transpose
    let shift = (data.xty() * s_inv_a).transpose();
    Ok(GaussianConditional {
        precision,
        shift: DVector::from_column_slice(shift.as_slice()),
    })
}

pub fn update_b_block<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    dl: &[DlColumnState],
    sigma_inv: &DMatrix<f64>,
    data: &RegressionData,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let v = b_block_conditional(a, dl, sigma_inv, data)?.sample(rng)?;
    Ok(DMatrix::from_row_slice(data.p(), a.ncols(), v.as_slice()))
}

/// RRn factor update for the active rank: `A_u` given `B_u`, then `B_u`
/// given the new `A_u`.
pub fn update_factors_rrn<R: Rng + ?Sized>(
    component: &mut RankComponent,
    sigma: &SpdMatrix,
    data: &RegressionData,
    rng: &mut R,
) -> Result<()> {
    let sigma_inv = sigma.inverse()?;
    component.a = update_a_block(&component.b, &sigma_inv, data, rng)?;
    component.b = update_b_block(&component.a, &component.dl, &sigma_inv, data, rng)?;
    Ok(())
}

/// Partial fit `sum_{k < active, k != h} b_k a_k'` of the shared columns.
fn partial_fit(comp: &RankComponent, h: usize, active: usize) -> DMatrix<f64> {
    let mut c = DMatrix::<f64>::zeros(comp.b.nrows(), comp.a.nrows());
    for k in (0..active).filter(|&k| k != h) {
        c += comp.b.column(k) * comp.a.column(k).transpose();
    }
    c
}

/// Conditional of the shared column `a_h` given `b_h` and the other active
/// columns: precision `I + (z'z) Sigma^-1`, shift `Sigma^-1 R'z` with `z = X b_h`.
pub fn shared_a_conditional(
    comp: &RankComponent,
    h: usize,
    active: usize,
    sigma_inv: &DMatrix<f64>,
    data: &RegressionData,
) -> GaussianConditional {
    let c_minus = partial_fit(comp, h, active);
    let b_h = comp.b.column(h).into_owned();
    let xtx_b = data.xtx() * &b_h;
    let ztz = b_h.dot(&xtx_b);
    let rtz = data.xty().transpose() * &b_h - c_minus.transpose() * &xtx_b;
    let mut precision = sigma_inv * ztz;
    for i in 0..data.q() {
        precision[(i, i)] += 1.0;
    }
    GaussianConditional {
        precision,
        shift: sigma_inv * rtz,
    }
}

/// Conditional of the shared column `b_h` given `a_h` and the other active
/// columns: precision `Lambda_h^-1 + (a' Sigma^-1 a) X'X`, shift `X'R Sigma^-1 a`.
pub fn shared_b_conditional(
    comp: &RankComponent,
    h: usize,
    active: usize,
    sigma_inv: &DMatrix<f64>,
    data: &RegressionData,
) -> GaussianConditional {
    let c_minus = partial_fit(comp, h, active);
    let a_h = comp.a.column(h).into_owned();
    let s_inv_a = sigma_inv * &a_h;
    let quad = a_h.dot(&s_inv_a);
    let mut precision = data.xtx() * quad;
    for (l, var) in comp.dl[h].prior_variances().into_iter().enumerate() {
        precision[(l, l)] += 1.0 / var;
    }
    let shift = data.xty() * &s_inv_a - data.xtx() * (c_minus * &s_inv_a);
    GaussianConditional { precision, shift }
}

/// One shared column pair `(a_h, b_h)` of the RRcs parametrization, with
/// the other active columns `0..active` held fixed. `h` is zero-based.
pub fn update_shared_column<R: Rng + ?Sized>(
    comp: &mut RankComponent,
    h: usize,
    active: usize,
    sigma_inv: &DMatrix<f64>,
    data: &RegressionData,
    rng: &mut R,
) -> Result<()> {
    let a_h = shared_a_conditional(comp, h, active, sigma_inv, data).sample(rng)?;
    comp.a.set_column(h, &a_h);
    let b_h = shared_b_conditional(comp, h, active, sigma_inv, data).sample(rng)?;
    comp.b.set_column(h, &b_h);
    Ok(())
}

/// RRcs factor update: columns `1..=u` in sequence.
pub fn update_factor_columns_rrcs<R: Rng + ?Sized>(
    comp: &mut RankComponent,
    u: usize,
    sigma: &SpdMatrix,
    data: &RegressionData,
    rng: &mut R,
) -> Result<()> {
    let sigma_inv = sigma.inverse()?;
    for h in 0..u {
        update_shared_column(comp, h, u, &sigma_inv, data, rng)?;
    }
    Ok(())
}

fn floored_abs(b: &[f64]) -> Vec<f64> {
    b.iter().map(|v| v.abs().max(B_ABS_FLOOR)).collect()
}

/// `T_l ~ GiG(alpha - 1, 1, 2|b_l|)`, `phi = T / sum(T)`.
pub fn sample_dl_phi<R: Rng + ?Sized>(b: &[f64], alpha: f64, rng: &mut R) -> Result<Vec<f64>> {
    let t = floored_abs(b)
        .into_iter()
        .map(|bl| dist::sample_gig(alpha - 1.0, 1.0, 2.0 * bl, rng))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = t.iter().sum();
    Ok(t.iter().map(|x| x / total).collect())
}

/// `tau ~ GiG(p(alpha - 1), 1, 2 sum_l |b_l| / phi_l)`.
pub fn sample_dl_tau<R: Rng + ?Sized>(
    b: &[f64],
    phi: &[f64],
    alpha: f64,
    rng: &mut R,
) -> Result<f64> {
    let ratio: f64 = floored_abs(b)
        .iter()
        .zip(phi)
        .map(|(bl, f)| bl / f.max(PHI_LOG_FLOOR))
        .sum();
    dist::sample_gig(b.len() as f64 * (alpha - 1.0), 1.0, 2.0 * ratio, rng)
}

/// `1/psi_l ~ iG(phi_l tau / |b_l|, 1)`.
pub fn sample_dl_psi<R: Rng + ?Sized>(
    b: &[f64],
    phi: &[f64],
    tau: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    floored_abs(b)
        .iter()
        .zip(phi)
        .map(|(bl, f)| Ok(1.0 / dist::sample_inverse_gaussian(f * tau / bl, 1.0, rng)?))
        .collect()
}

/// DL local scales of one column given its coefficients `b` and `alpha`,
/// drawn as phi, then tau, then psi.
///
/// The phi step integrates out `tau` and `psi`, and the tau step
/// integrates out `psi`, so the sequence is one exact draw from
/// `p(phi, tau, psi | b, alpha)`. `|b_l|` is floored at [`B_ABS_FLOOR`].
/// `alpha` is left unchanged.
pub fn update_dl_locals<R: Rng + ?Sized>(
    b: &[f64],
    dl: &DlColumnState,
    rng: &mut R,
) -> Result<DlColumnState> {
    if b.len() != dl.len() {
        return Err(Error::Dimension(format!(
            "coefficient column has length {}, DL state {}",
            b.len(),
            dl.len()
        )));
    }
    let alpha = dl.alpha;
    let phi = sample_dl_phi(b, alpha, rng)?;
    let tau = sample_dl_tau(b, &phi, alpha, rng)?;
    let psi = sample_dl_psi(b, &phi, tau, rng)?;
    Ok(DlColumnState {
        tau,
        phi,
        psi,
        alpha,
    })
}

/// Griddy-Gibbs draw of alpha from its conditional given `tau` and `phi`.
pub fn update_alpha_griddy<R: Rng + ?Sized>(
    dl: &DlColumnState,
    grid: &AlphaGrid,
    rng: &mut R,
) -> Result<f64> {
    let lw = grid.log_conditional(dl.tau, &dl.phi);
    let idx = dist::sample_categorical_log(&lw, rng)?;
    Ok(grid.alphas[idx])
}

/// Redraws every factor not used by the active rank from the prior, DL
/// hierarchy included. Returns the number of column pairs redrawn.
pub fn refresh_inactive_from_prior<R: Rng + ?Sized>(
    state: &mut ChainState,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<usize> {
    let u = state.u;
    let mut refreshed = 0;
    match &mut state.factors {
        FactorCollection::Naive(comps) => {
            for comp in comps.iter_mut().filter(|c| c.cols() != u) {
                for h in 0..comp.cols() {
                    comp.refresh_column(h, hp, rng)?;
                    refreshed += 1;
                }
            }
        }
        FactorCollection::Shared(comp) => {
            for h in u..comp.cols() {
                comp.refresh_column(h, hp, rng)?;
                refreshed += 1;
            }
        }
    }
    Ok(refreshed)
}

fn update_component_dl<R: Rng + ?Sized>(
    comp: &mut RankComponent,
    grid: &AlphaGrid,
    rng: &mut R,
) -> Result<usize> {
    for h in 0..comp.cols() {
        let b: Vec<f64> = comp.b.column(h).iter().copied().collect();
        let mut next = update_dl_locals(&b, &comp.dl[h], rng)?;
        next.alpha = update_alpha_griddy(&next, grid, rng)?;
        comp.dl[h] = next;
    }
    Ok(comp.cols())
}

/// Sweep driver holding the hyperparameters and instrumentation.
#[derive(Clone, Debug)]
pub struct GibbsSampler {
    hp: HyperParams,
    grid: AlphaGrid,
    frozen_weights: Option<Vec<f64>>,
    counters: UpdateCounters,
}

impl GibbsSampler {
    pub fn new(hp: HyperParams) -> Result<Self> {
        hp.validate(hp.gamma.len())?;
        let grid = AlphaGrid::new(&hp);
        Ok(Self {
            hp,
            grid,
            frozen_weights: None,
            counters: UpdateCounters::default(),
        })
    }

    /// Keeps `w` fixed instead of sampling it. With `w = e_s` the chain is
    /// a fixed-rank sampler at rank `s`.
    pub fn with_frozen_weights(mut self, w: Vec<f64>) -> Self {
        self.frozen_weights = Some(w);
        self
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn counters(&self) -> &UpdateCounters {
        &self.counters
    }

    /// One full Gibbs sweep. Failures carry the sweep index and update name.
    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        state: &mut ChainState,
        data: &RegressionData,
        rng: &mut R,
    ) -> Result<()> {
        let iteration = self.counters.sweeps;
        self.sweep_inner(state, data, rng)
            .map_err(|(update, e)| Error::Sampler {
                iteration,
                update,
                source: Box::new(e),
            })?;
        self.counters.sweeps += 1;
        Ok(())
    }

    fn sweep_inner<R: Rng + ?Sized>(
        &mut self,
        state: &mut ChainState,
        data: &RegressionData,
        rng: &mut R,
    ) -> std::result::Result<(), (&'static str, Error)> {
        if let Some(w) = &self.frozen_weights {
            state.w.clone_from(w);
        }
        state.u = update_rank(state, data, rng).map_err(|e| ("rank", e))?;
        if self.frozen_weights.is_none() {
            state.w = update_weights(state.u, &self.hp.gamma, rng).map_err(|e| ("weights", e))?;
        }
        state.sigma = update_sigma(state, data, &self.hp, rng).map_err(|e| ("sigma", e))?;

        let u = state.u;
        match &mut state.factors {
            FactorCollection::Naive(comps) => {
                update_factors_rrn(&mut comps[u - 1], &state.sigma, data, rng)
                    .map_err(|e| ("factors", e))?;
            }
            FactorCollection::Shared(comp) => {
                update_factor_columns_rrcs(comp, u, &state.sigma, data, rng)
                    .map_err(|e| ("factors", e))?;
            }
        }
        self.counters.posterior_columns += u;
        self.counters.prior_columns +=
            refresh_inactive_from_prior(state, &self.hp, rng).map_err(|e| ("prior refresh", e))?;

        let dl_updates = match &mut state.factors {
            FactorCollection::Naive(comps) => comps
                .iter_mut()
                .map(|c| update_component_dl(c, &self.grid, rng))
                .sum::<Result<usize>>(),
            FactorCollection::Shared(comp) => update_component_dl(comp, &self.grid, rng),
        }
        .map_err(|e| ("dl locals", e))?;
        self.counters.dl_updates += dl_updates;
        Ok(())
    }
}

/// Runs one chain on stream 0 of `cfg.seed`.
pub fn run_chain(
    data: &RegressionData,
    hp: &HyperParams,
    cfg: &SamplerConfig,
) -> Result<PosteriorDraws> {
    run_chain_on_stream(data, hp, cfg, 0)
}

/// Runs one chain on an independent stream of `cfg.seed`.
pub fn run_chain_on_stream(
    data: &RegressionData,
    hp: &HyperParams,
    cfg: &SamplerConfig,
    stream: u64,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let mut rng = RngHandle::for_stream(cfg.seed, stream);
    let state = ChainState::initialize(cfg.parametrization, data.q(), data.p(), hp, &mut rng)?;
    run_chain_from_state(data, hp, cfg, state, &mut rng)
}

/// Runs a chain from a caller-supplied starting state. The parametrization
/// of `state` overrides `cfg.parametrization`.
pub fn run_chain_from_state(
    data: &RegressionData,
    hp: &HyperParams,
    cfg: &SamplerConfig,
    mut state: ChainState,
    rng: &mut RngHandle,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    hp.validate(data.q())?;
    if state.q() != data.q() || state.factors.coefficients(1).nrows() != data.p() {
        return Err(Error::Dimension(
            "starting state does not match the data".into(),
        ));
    }
    let mut sampler = GibbsSampler::new(hp.clone())?;

    let keep = cfg.retained();
    let mut draws = PosteriorDraws {
        u_draws: Vec::with_capacity(keep),
        c_draws: Vec::with_capacity(keep),
        sigma_draws: cfg.store_sigma.then(|| Vec::with_capacity(keep)),
        w_draws: cfg.store_w.then(|| Vec::with_capacity(keep)),
        meta: DrawMeta {
            seeds: vec![cfg.seed],
            n_iter: cfg.n_iter,
            burn_in: cfg.burn_in,
            thin: cfg.thin,
            parametrization: Some(state.factors.parametrization()),
            q: data.q(),
            p: data.p(),
        },
    };
    for it in 0..cfg.n_iter {
        sampler.sweep(&mut state, data, rng)?;
        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 {
            let c = state.active_coefficients();
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Sampler {
                    iteration: it,
                    update: "record",
                    source: Box::new(Error::Numeric("non-finite coefficient draw".into())),
                });
            }
            draws.u_draws.push(state.u);
            draws.c_draws.push(c);
            if let Some(s) = &mut draws.sigma_draws {
                s.push(state.sigma.as_matrix().clone());
            }
            if let Some(w) = &mut draws.w_draws {
                w.push(state.w.clone());
            }
        }
    }
    log::debug!(
        "chain seed={} stream={}: {} sweeps, {} draws kept",
        cfg.seed,
        rng.stream(),
        cfg.n_iter,
        draws.len()
    );
    Ok(draws)
}

/// Runs `chains` independent chains in parallel (stream `i` for chain `i`)
/// and merges their draws in chain order.
pub fn run_chains(
    data: &RegressionData,
    hp: &HyperParams,
    cfg: &SamplerConfig,
    chains: usize,
) -> Result<PosteriorDraws> {
    if chains == 0 {
        return domain("need at least one chain");
    }
    let results: Vec<Result<PosteriorDraws>> = (0..chains as u64)
        .into_par_iter()
        .map(|i| run_chain_on_stream(data, hp, cfg, i))
        .collect();
    let draws = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut merged = PosteriorDraws::merge(draws)?;
    merged.meta.seeds = vec![cfg.seed];
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Parametrization;

    fn tiny_data(seed: u64) -> RegressionData {
        let mut rng = RngHandle::new(seed);
        let n = 20;
        let x = DMatrix::from_fn(n, 3, |_, _| dist::sample_standard_normal(&mut rng));
        let c = DMatrix::from_row_slice(3, 2, &[1.0, -0.5, 0.0, 0.0, 2.0, 1.0]);
        let e = DMatrix::from_fn(n, 2, |_, _| 0.3 * dist::sample_standard_normal(&mut rng));
        let y = &x * c + e;
        RegressionData::new(y, x).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = SamplerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.burn_in = cfg.n_iter;
        assert!(cfg.validate().is_err());
        cfg.burn_in = 0;
        cfg.thin = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn retained_count_matches_thinning() {
        let cfg = SamplerConfig {
            n_iter: 100,
            burn_in: 10,
            thin: 7,
            ..Default::default()
        };
        assert_eq!(cfg.retained(), 13);
        let data = tiny_data(1);
        let hp = HyperParams::defaults(2, 3);
        let d = run_chain(&data, &hp, &cfg).unwrap();
        assert_eq!(d.len(), 13);
        assert_eq!(d.c_draws.len(), 13);
    }

    #[test]
    fn weights_point_mass_forces_rank() {
        let data = tiny_data(2);
        let hp = HyperParams::defaults(2, 3);
        let mut rng = RngHandle::new(3);
        let mut state =
            ChainState::initialize(Parametrization::ColumnSharing, 2, 3, &hp, &mut rng).unwrap();
        state.w = vec![0.0, 1.0];
        for _ in 0..200 {
            assert_eq!(update_rank(&state, &data, &mut rng).unwrap(), 2);
        }
    }

    #[test]
    fn update_weights_rejects_bad_rank() {
        let mut rng = RngHandle::new(4);
        assert!(update_weights(0, &[1.0, 1.0], &mut rng).is_err());
        assert!(update_weights(3, &[1.0, 1.0], &mut rng).is_err());
    }

    #[test]
    fn refresh_is_noop_at_full_rank_shared() {
        let hp = HyperParams::defaults(3, 4);
        let mut rng = RngHandle::new(5);
        let mut state =
            ChainState::initialize(Parametrization::ColumnSharing, 3, 4, &hp, &mut rng).unwrap();
        state.u = 3;
        let before = state.clone();
        assert_eq!(
            refresh_inactive_from_prior(&mut state, &hp, &mut rng).unwrap(),
            0
        );
        assert_eq!(state, before);
    }

    #[test]
    fn refresh_keeps_active_naive_component() {
        let hp = HyperParams::defaults(3, 4);
        let mut rng = RngHandle::new(6);
        let mut state =
            ChainState::initialize(Parametrization::Naive, 3, 4, &hp, &mut rng).unwrap();
        state.u = 2;
        let before = state.clone();
        assert_eq!(
            refresh_inactive_from_prior(&mut state, &hp, &mut rng).unwrap(),
            4
        );
        let (FactorCollection::Naive(a), FactorCollection::Naive(b)) =
            (&state.factors, &before.factors)
        else {
            unreachable!()
        };
        assert_eq!(a[1], b[1]);
        assert_ne!(a[0], b[0]);
        assert_ne!(a[2], b[2]);
    }

    #[test]
    fn sampler_error_reports_iteration_and_update() {
        let data = tiny_data(7);
        let hp = HyperParams::defaults(2, 3);
        let mut rng = RngHandle::new(8);
        let mut state =
            ChainState::initialize(Parametrization::ColumnSharing, 2, 3, &hp, &mut rng).unwrap();
        state.w = vec![f64::NAN, 0.5];
        let mut sampler = GibbsSampler::new(hp).unwrap();
        let err = sampler.sweep(&mut state, &data, &mut rng).unwrap_err();
        match err {
            Error::Sampler {
                iteration, update, ..
            } => {
                assert_eq!(iteration, 0);
                assert_eq!(update, "rank");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn dl_update_keeps_invariants() {
        let hp = HyperParams::defaults(2, 6);
        let mut rng = RngHandle::new(9);
        let mut dl = DlColumnState::from_prior(6, &hp, &mut rng).unwrap();
        let b = [0.0, 1e-14, -3.0, 0.2, 5.0, -0.01];
        for _ in 0..500 {
            dl = update_dl_locals(&b, &dl, &mut rng).unwrap();
            assert!((dl.phi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(dl.phi.iter().all(|f| *f >= 0.0));
            assert!(dl.tau > 0.0 && dl.tau.is_finite());
            assert!(dl.psi.iter().all(|s| *s > 0.0 && s.is_finite()));
        }
    }
}
