use std::path::PathBuf;

use anyhow::{Context, Result};
use brecs::selection::rule_of_thumb;

use crate::config::check_thresholds;
use crate::fit::FitReport;

pub struct SummarizeRequest {
    pub dir: PathBuf,
    pub sr_bar: Option<f64>,
    pub p_bar: Option<f64>,
    pub json: bool,
}

/// Re-applies the rule of thumb to the stored relevance indices.
pub fn rethreshold(report: &mut FitReport, sr_bar: Option<f64>, p_bar: Option<f64>) -> Result<()> {
    let sel = &mut report.selection;
    sel.sr_bar = sr_bar.unwrap_or(sel.sr_bar);
    sel.p_bar = p_bar.unwrap_or(sel.p_bar);
    check_thresholds(sel.sr_bar, sel.p_bar)?;
    for (c, ri) in sel.covariates.iter_mut().zip(&sel.ri) {
        let (verdict, survival) = rule_of_thumb(ri, sel.sr_bar, sel.p_bar)?;
        c.verdict = verdict;
        c.survival = survival;
    }
    Ok(())
}

pub fn run(req: SummarizeRequest) -> Result<()> {
    let path = req.dir.join("report.json");
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut report: FitReport = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a fit report", path.display()))?;
    rethreshold(&mut report, req.sr_bar, req.p_bar)?;
    if req.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}
