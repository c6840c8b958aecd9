//! Draw-wise SAVS sparsification and the summaries built on it: posterior
//! inclusion probabilities, the PIP uncertainty index, the sparse point
//! estimate and the Relevance Index with its rule-of-thumb selector.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const DEFAULT_SR_BAR: f64 = 0.70;
pub const DEFAULT_P_BAR: f64 = 0.60;

/// SAVS applied to one coefficient draw:
/// `sign(C) ||X_j||^-2 (|C| ||X_j||^2 - |C|^-2)_+`, zero for `C = 0`.
pub fn savs_sparsify_draw(c: &DMatrix<f64>, column_norms_sq: &[f64]) -> Result<DMatrix<f64>> {
    if column_norms_sq.len() != c.nrows() {
        return Err(Error::Dimension(format!(
            "{} column norms for {} coefficient rows",
            column_norms_sq.len(),
            c.nrows()
        )));
    }
    if let Some(j) = column_norms_sq.iter().position(|v| !(*v > 0.0)) {
        return domain(format!("covariate {j} has zero (or invalid) column norm"));
    }
    Ok(DMatrix::from_fn(c.nrows(), c.ncols(), |j, k| {
        savs_entry(c[(j, k)], column_norms_sq[j])
    }))
}

fn savs_entry(c: f64, norm_sq: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    // (|c| n - |c|^-2) / n written as (|c|^3 n - 1) / (|c|^2 n), so the
    // zero test is exactly |c|^3 n > 1
    let a = c.abs();
    let t = a * a * a * norm_sq;
    if t > 1.0 {
        c.signum() * (t - 1.0) / (a * a * norm_sq)
    } else {
        0.0
    }
}

/// Sparsified draws together with the per-draw nonzero count of each row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDrawArchive {
    draws: Vec<DMatrix<f64>>,
    /// `row_counts[m][j]` = number of nonzeros in row `j` of draw `m`.
    row_counts: Vec<Vec<usize>>,
    p: usize,
    q: usize,
}

impl SparseDrawArchive {
    /// Sparsifies every coefficient draw.
    pub fn from_draws(c_draws: &[DMatrix<f64>], column_norms_sq: &[f64]) -> Result<Self> {
        let sparse = c_draws
            .iter()
            .map(|c| savs_sparsify_draw(c, column_norms_sq))
            .collect::<Result<Vec<_>>>()?;
        Self::from_sparse(sparse)
    }

    /// Wraps draws that are already sparse.
    pub fn from_sparse(draws: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = draws.first() else {
            return Err(Error::Degenerate("empty draw archive".into()));
        };
        let (p, q) = first.shape();
        if draws.iter().any(|d| d.shape() != (p, q)) {
            return Err(Error::Dimension("draws have differing shapes".into()));
        }
        if draws.iter().any(|d| d.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric("non-finite sparsified draw".into()));
        }
        let row_counts = draws
            .iter()
            .map(|d| {
                (0..p)
                    .map(|j| d.row(j).iter().filter(|v| **v != 0.0).count())
                    .collect()
            })
            .collect();
        Ok(Self {
            draws,
            row_counts,
            p,
            q,
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn draws(&self) -> &[DMatrix<f64>] {
        &self.draws
    }

    pub fn row_counts(&self) -> &[Vec<usize>] {
        &self.row_counts
    }
}

/// Fraction of sparsified draws in which each entry is nonzero.
pub fn compute_pip(archive: &SparseDrawArchive) -> DMatrix<f64> {
    let mut counts = DMatrix::<f64>::zeros(archive.p, archive.q);
    for d in &archive.draws {
        for (acc, v) in counts.iter_mut().zip(d.iter()) {
            if *v != 0.0 {
                *acc += 1.0;
            }
        }
    }
    counts / archive.len() as f64
}

/// Mean of the sparsified draws (zeros included) where `PIP > 0.5`, zero elsewhere.
pub fn sparse_point_estimate(
    archive: &SparseDrawArchive,
    pip: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if pip.shape() != (archive.p, archive.q) {
        return Err(Error::Dimension(
            "PIP matrix does not match the archive".into(),
        ));
    }
    let mut sum = DMatrix::<f64>::zeros(archive.p, archive.q);
    for d in &archive.draws {
        sum += d;
    }
    let mean = sum / archive.len() as f64;
    Ok(DMatrix::from_fn(archive.p, archive.q, |j, k| {
        if pip[(j, k)] > 0.5 {
            mean[(j, k)]
        } else {
            0.0
        }
    }))
}

/// `zeta = 1 - 2|PIP - 0.5|`.
pub fn pip_uncertainty(pip: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if pip.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return domain("PIP entries must lie in [0, 1]");
    }
    Ok(pip.map(zeta_of))
}

pub fn zeta_of(pip: f64) -> f64 {
    1.0 - 2.0 * (pip - 0.5).abs()
}

/// Support `{0, 1/q, ..., 1}` of the Relevance Index.
pub fn ri_support(q: usize) -> Vec<f64> {
    (0..=q).map(|k| k as f64 / q as f64).collect()
}

/// Relevance Index mass functions, one row per covariate over [`ri_support`].
pub fn relevance_index(archive: &SparseDrawArchive) -> DMatrix<f64> {
    let mut ri = DMatrix::<f64>::zeros(archive.p, archive.q + 1);
    for counts in &archive.row_counts {
        for (j, &c) in counts.iter().enumerate() {
            ri[(j, c)] += 1.0;
        }
    }
    ri / archive.len() as f64
}

fn check_mass(ri_row: &[f64]) -> Result<()> {
    if ri_row.len() < 2 {
        return domain("RI mass function needs at least two support points");
    }
    if ri_row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return domain("RI masses must be nonnegative");
    }
    let total: f64 = ri_row.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return domain(format!("RI masses sum to {total}, not 1"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Keep,
    Exclude,
}

/// Survival `P(RI > sr_bar)` (strict) and the keep/exclude decision `S >= p_bar`.
pub fn rule_of_thumb(ri_row: &[f64], sr_bar: f64, p_bar: f64) -> Result<(Verdict, f64)> {
    check_mass(ri_row)?;
    if !(0.0..=1.0).contains(&sr_bar) {
        return domain(format!("sr_bar must lie in [0, 1], got {sr_bar}"));
    }
    if !(p_bar > 0.0 && p_bar <= 1.0) {
        return domain(format!("p_bar must lie in (0, 1], got {p_bar}"));
    }
    let s = ri_survival(ri_row, sr_bar);
    let verdict = if s >= p_bar {
        Verdict::Keep
    } else {
        Verdict::Exclude
    };
    Ok((verdict, s))
}

/// `P(RI > t)` for a mass function over [`ri_support`].
pub fn ri_survival(ri_row: &[f64], t: f64) -> f64 {
    let q = ri_row.len() - 1;
    ri_row
        .iter()
        .enumerate()
        .filter(|(k, _)| *k as f64 / q as f64 > t)
        .map(|(_, m)| m)
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiSummary {
    pub mode: f64,
    pub mean: f64,
    pub std: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

pub fn ri_summary(ri_row: &[f64]) -> Result<RiSummary> {
    check_mass(ri_row)?;
    let support = ri_support(ri_row.len() - 1);
    let mut mode_idx = 0;
    for (k, m) in ri_row.iter().enumerate() {
        if *m > ri_row[mode_idx] {
            mode_idx = k;
        }
    }
    let mean: f64 = support.iter().zip(ri_row).map(|(s, m)| s * m).sum();
    let var: f64 = support
        .iter()
        .zip(ri_row)
        .map(|(s, m)| m * (s - mean).powi(2))
        .sum();
    let quantile = |level: f64| {
        let mut cdf = 0.0;
        for (s, m) in support.iter().zip(ri_row) {
            cdf += m;
            // tolerance absorbs rounding in the running sum
            if cdf >= level - 1e-12 {
                return *s;
            }
        }
        1.0
    };
    Ok(RiSummary {
        mode: support[mode_idx],
        mean,
        std: var.max(0.0).sqrt(),
        q25: quantile(0.25),
        q50: quantile(0.5),
        q75: quantile(0.75),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateSummary {
    pub index: usize,
    pub name: String,
    pub summary: RiSummary,
    pub survival: f64,
    pub verdict: Verdict,
}

/// Everything the selection layer reports for one posterior sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub p: usize,
    pub q: usize,
    pub draws: usize,
    pub sr_bar: f64,
    pub p_bar: f64,
    /// Matrices are stored row-major as nested vectors.
    pub pip: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<f64>>,
    pub c_hat: Vec<Vec<f64>>,
    pub ri: Vec<Vec<f64>>,
    pub covariates: Vec<CovariateSummary>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let ncols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

impl SelectionReport {
    /// Builds the report. `names` labels covariates; defaults to `x1, x2, ...`.
    pub fn build(
        archive: &SparseDrawArchive,
        sr_bar: f64,
        p_bar: f64,
        names: Option<&[String]>,
    ) -> Result<Self> {
        if let Some(n) = names {
            if n.len() != archive.p {
                return Err(Error::Dimension(format!(
                    "{} covariate names for p = {}",
                    n.len(),
                    archive.p
                )));
            }
        }
        let pip = compute_pip(archive);
        let zeta = pip_uncertainty(&pip)?;
        let c_hat = sparse_point_estimate(archive, &pip)?;
        let ri = relevance_index(archive);
        let covariates = (0..archive.p)
            .map(|j| {
                let row: Vec<f64> = ri.row(j).iter().copied().collect();
                let (verdict, survival) = rule_of_thumb(&row, sr_bar, p_bar)?;
                Ok(CovariateSummary {
                    index: j,
                    name: names.map_or_else(|| format!("x{}", j + 1), |n| n[j].clone()),
                    summary: ri_summary(&row)?,
                    survival,
                    verdict,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            p: archive.p,
            q: archive.q,
            draws: archive.len(),
            sr_bar,
            p_bar,
            pip: rows(&pip),
            zeta: rows(&zeta),
            c_hat: rows(&c_hat),
            ri: rows(&ri),
            covariates,
        })
    }

    pub fn pip_matrix(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.pip)
    }

    pub fn zeta_matrix(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.zeta)
    }

    pub fn c_hat_matrix(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.c_hat)
    }

    pub fn ri_matrix(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.ri)
    }

    pub fn kept(&self) -> Vec<usize> {
        self.covariates
            .iter()
            .filter(|c| c.verdict == Verdict::Keep)
            .map(|c| c.index)
            .collect()
    }

    /// Covariate table: mode, mean, Std, quartiles, survival and verdict.
    pub fn covariate_table(&self) -> String {
        let width = self
            .covariates
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(0)
            .max(9);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>8}  verdict",
            "covariate", "mode", "mean", "Std", "Q25", "Q50", "Q75", "P(RI>sr)"
        );
        for c in &self.covariates {
            let s = &c.summary;
            let verdict = match c.verdict {
                Verdict::Keep => "keep",
                Verdict::Exclude => "exclude",
            };
            let _ = writeln!(
                out,
                "{:<width$} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>8.3}  {verdict}",
                c.name, s.mode, s.mean, s.std, s.q25, s.q50, s.q75, c.survival
            );
        }
        out
    }

    /// Human-readable report with the matrix summaries and the covariate table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "selection from {} draws (p = {}, q = {}), sr_bar = {}, p_bar = {}",
            self.draws, self.p, self.q, self.sr_bar, self.p_bar
        );
        for (title, m) in [
            ("sparse estimate C_hat", &self.c_hat),
            ("PIP", &self.pip),
            ("zeta", &self.zeta),
        ] {
            let _ = writeln!(out, "\n{title}");
            for (c, row) in self.covariates.iter().zip(m) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>8.4}")).collect();
                let _ = writeln!(out, "{:<12}{}", c.name, cells.join(" "));
            }
        }
        let _ = writeln!(out, "\nrelevance index");
        out.push_str(&self.covariate_table());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn savs_direct_values() {
        assert_eq!(savs_entry(1.0, 4.0), 0.75);
        assert_eq!(savs_entry(-1.0, 4.0), -0.75);
        assert_eq!(savs_entry(0.5, 4.0), 0.0);
        assert_eq!(savs_entry(0.0, 4.0), 0.0);
    }

    #[test]
    fn savs_rejects_zero_norm() {
        let c = DMatrix::from_element(2, 1, 1.0);
        assert!(savs_sparsify_draw(&c, &[1.0, 0.0]).is_err());
        assert!(savs_sparsify_draw(&c, &[1.0]).is_err());
    }

    #[test]
    fn empty_archive_is_an_error() {
        assert!(SparseDrawArchive::from_sparse(vec![]).is_err());
    }

    #[test]
    fn zeta_rejects_out_of_range() {
        assert!(pip_uncertainty(&DMatrix::from_element(1, 1, 1.2)).is_err());
    }

    #[test]
    fn rule_of_thumb_validates_thresholds() {
        assert!(rule_of_thumb(&[0.5, 0.5], 1.5, 0.5).is_err());
        assert!(rule_of_thumb(&[0.5, 0.5], 0.5, 0.0).is_err());
        assert!(rule_of_thumb(&[0.5, 0.4], 0.5, 0.5).is_err());
    }
}
