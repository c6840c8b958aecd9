//! Random-variate generators for the distribution families used by the
//! Gibbs samplers.
//!
//! All generators are pure functions of their parameters and a caller-owned
//! random stream. Positive-support generators never return zero, negative
//! or non-finite values.
//!
//! # GiG parameterization
//!
//! [`sample_gig`] draws from the generalized inverse Gaussian with density
//!
//! ```text
//! f(x) ∝ x^(p-1) · exp(-(a·x + b/x) / 2),   x > 0
//! ```
//!
//! i.e. `(order p, a multiplies x, b multiplies 1/x)`. Mixing up `a` and `b`
//! silently produces a sampler for the reciprocal distribution, so check
//! call sites against this convention.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::linalg::{cholesky_jittered, symmetrize, SpdMatrix};

/// Below this value of `sqrt(a*b)` the GiG is replaced by its gamma or
/// inverse-gamma limit.
const GIG_OMEGA_TINY: f64 = 1e-14;

/// Uniform draw on (0, 1].
#[inline]
fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

#[inline]
pub fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

#[inline]
fn positive(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        f64::MIN_POSITIVE
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be positive and finite, got {v}"))
    }
}

/// Gamma draw with shape/rate parameterization (mean `shape / rate`).
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    check_positive("gamma rate", rate)?;
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(positive(g.sample(rng)))
}

/// Exponential draw with the given rate (mean `1 / rate`).
pub fn sample_exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<f64> {
    check_positive("exponential rate", rate)?;
    let e = Exp::new(rate).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(positive(e.sample(rng)))
}

/// Logarithm of a Gamma(shape, 1) draw; stays finite for tiny shapes.
fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).unwrap().sample(rng).ln()
    } else {
        // G(a) = G(a + 1) * U^(1/a)
        let g = Gamma::new(shape + 1.0, 1.0).unwrap().sample(rng);
        g.ln() + uniform_open(rng).ln() / shape
    }
}

/// Inverse-Gaussian draw with mean `mean` and shape `shape`
/// (Michael, Schucany & Haas transformation).
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> Result<f64> {
    check_positive("inverse-Gaussian mean", mean)?;
    check_positive("inverse-Gaussian shape", shape)?;
    let v = sample_standard_normal(rng);
    let y = mean * v * v;
    // Smaller root of the quadratic, written without cancellation:
    // mean + mean/(2 shape) * (y - sqrt(y^2 + 4 shape y)) == mean / (1 + (y + s) / (2 shape))
    let s = (y * y + 4.0 * shape * y).sqrt();
    let x = mean / (1.0 + (y + s) / (2.0 * shape));
    let u: f64 = rng.random();
    let out = if u * (mean + x) <= mean {
        x
    } else {
        mean * mean / x
    };
    Ok(positive(out))
}

/// Generalized inverse Gaussian draw, density ∝ `x^(order-1) exp(-(a x + b/x)/2)`.
///
/// Uses the Hörmann–Leydold family of rejection samplers on the
/// two-parameter form `GIG(|order|, ω, ω)` with `ω = sqrt(a b)`, then
/// rescales by `sqrt(b / a)` (or inverts, for negative order).
pub fn sample_gig<R: Rng + ?Sized>(order: f64, a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !order.is_finite() {
        return domain(format!("GiG order must be finite, got {order}"));
    }
    check_positive("GiG a", a)?;
    check_positive("GiG b", b)?;

    let omega = (a * b).sqrt();
    if omega < GIG_OMEGA_TINY && order != 0.0 {
        // b/x (order > 0) or a*x (order < 0) term is negligible on the bulk
        let x = if order > 0.0 {
            sample_gamma(order, a / 2.0, rng)?
        } else {
            1.0 / sample_gamma(-order, b / 2.0, rng)?
        };
        return Ok(positive(x));
    }

    let lambda = order.abs();
    let scale = (b / a).sqrt();
    let x = if lambda > 2.0 || omega > 3.0 {
        gig_rou_shift(lambda, omega, rng)
    } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        gig_rou_noshift(lambda, omega, rng)
    } else {
        gig_concave(lambda, omega, rng)
    };
    let out = if order < 0.0 { scale / x } else { scale * x };
    if !out.is_finite() {
        return Err(Error::Numeric(format!(
            "GiG({order}, {a}, {b}) produced a non-finite draw"
        )));
    }
    Ok(positive(out))
}

/// Mode of the standardized GIG(lambda, omega, omega).
fn gig_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

/// Ratio-of-uniforms without mode shift.
fn gig_rou_noshift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * uniform_open(rng);
        let v = uniform_open(rng);
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

/// Ratio-of-uniforms with mode shift, for large order or large omega.
fn gig_rou_shift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);

    // extrema of (x - xm) * sqrt(f(x)): roots of a depressed cubic
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    let arg = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).clamp(-1.0, 1.0);
    let fi = arg.acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();

    loop {
        let u = uminus + rng.random::<f64>() * (uplus - uminus);
        let v = uniform_open(rng);
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

/// Rejection from a three-piece hat, for 0 <= lambda < 1 and small omega
/// where the density is not T-concave.
fn gig_concave<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = gig_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    let tail_start = x0.max(2.0 / omega);

    loop {
        let mut v = total * rng.random::<f64>();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                x = -2.0 / omega
                    * ((-omega / 2.0 * tail_start).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        if !(x > 0.0 && x.is_finite()) {
            continue;
        }
        let u = uniform_open(rng) * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

/// Dirichlet draw. Works in log space so very small concentrations do not
/// collapse the whole vector to zeros.
pub fn sample_dirichlet<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if concentration.is_empty() {
        return domain("Dirichlet concentration is empty");
    }
    for &c in concentration {
        check_positive("Dirichlet concentration", c)?;
    }
    let logs: Vec<f64> = concentration
        .iter()
        .map(|&c| sample_log_gamma(c, rng))
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Inverse-Wishart draw with `df` degrees of freedom and scale `scale`
/// (mean `scale / (df - dim - 1)`).
///
/// Draws `W ~ Wishart(df, scale^-1)` by the Bartlett decomposition and
/// returns `W^-1` through its triangular factor.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    df: f64,
    scale: &SpdMatrix,
    rng: &mut R,
) -> Result<SpdMatrix> {
    let d = scale.dim();
    if !(df > d as f64 - 1.0) || !df.is_finite() {
        return domain(format!(
            "inverse-Wishart df must exceed dim - 1 = {}, got {df}",
            d as f64 - 1.0
        ));
    }
    let l = cholesky_jittered(&scale.inverse()?)?.l();
    let mut bartlett = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi2 = 2.0 * sample_gamma((df - i as f64) / 2.0, 1.0, rng)?;
        bartlett[(i, i)] = chi2.sqrt();
        for j in 0..i {
            bartlett[(i, j)] = sample_standard_normal(rng);
        }
    }
    let t = l * bartlett;
    let t_inv = t
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::Numeric("singular Bartlett factor".into()))?;
    let sigma = symmetrize(t_inv.transpose() * t_inv);
    Ok(SpdMatrix::from_trusted(sigma))
}

/// Gaussian draw with mean `precision^-1 h` and covariance `precision^-1`.
///
/// One Cholesky factorization `precision = L L'`, then `L y = h` and
/// `L' x = y + z` with `z` standard normal; `precision` is never inverted.
pub fn sample_mvn_precision<R: Rng + ?Sized>(
    shift: &DVector<f64>,
    precision: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if precision.nrows() != shift.len() || !precision.is_square() {
        return Err(Error::Dimension(format!(
            "precision is {}x{} but shift has length {}",
            precision.nrows(),
            precision.ncols(),
            shift.len()
        )));
    }
    let chol = cholesky_jittered(precision)?;
    let l = chol.l_dirty();
    let mut y = l
        .solve_lower_triangular(shift)
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    for v in y.iter_mut() {
        *v += sample_standard_normal(rng);
    }
    // only the lower triangle of l_dirty is meaningful; tr_solve reads just that
    l.tr_solve_lower_triangular(&y)
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))
}

/// Index `s` drawn with probability `exp(log_weights[s] - logsumexp(log_weights))`,
/// by inverse transform on the normalized cumulative weights.
pub fn sample_categorical_log<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Result<usize> {
    if log_weights
        .iter()
        .any(|w| w.is_nan() || *w == f64::INFINITY)
    {
        return domain("log-weights must not be NaN or +inf");
    }
    let max = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Degenerate("all log-weights are -inf".into()));
    }
    let weights: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if target < acc {
                return Ok(i);
            }
        }
    }
    Ok(last_positive)
}

/// `log(sum(exp(xs)))`, stable for large magnitudes.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
