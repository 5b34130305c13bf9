use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::param_count;
use crate::scalar::Scalar;
use crate::surrogate::{Channel, SignalLog};
use crate::sysid::fit::{fit_oe_model, FitConfig, FitResult};
use crate::sysid::regressor::RegressorSpec;

/// Akaike's Final Prediction Error, `(sse/N)·(N + p)/(N − p)`.
pub fn fpe(sse: f64, n: usize, p: usize) -> Result<f64> {
    if p < 1 || n <= p {
        return Err(Error::Domain(format!("FPE needs N > p >= 1 (N = {n}, p = {p})")));
    }
    if !(sse >= 0.0) {
        return Err(Error::Domain(format!("FPE needs a non-negative SSE, got {sse}")));
    }
    let (n, p) = (n as f64, p as f64);
    Ok(sse / n * (n + p) / (n - p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    /// Hidden nodes used while sweeping lag orders.
    pub phase1_hidden: usize,
    pub fit: FitConfig,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            phase1_hidden: 10,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpeCandidate {
    pub phase: u8,
    pub spec: RegressorSpec,
    pub n_hidden: usize,
    pub p: usize,
    pub n: usize,
    pub sse: Option<f64>,
    pub fpe: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpeReport {
    pub output: Channel,
    pub candidates: Vec<FpeCandidate>,
    /// Index of the phase-1 winner (lag order).
    pub best_order: Option<usize>,
    /// Index of the final selection (order and node count).
    pub selected: Option<usize>,
}

impl FpeReport {
    pub fn selected_candidate(&self) -> Option<&FpeCandidate> {
        self.selected.map(|i| &self.candidates[i])
    }

    /// CSV with columns `order_spec,n_hidden,sse,p,N,fpe,selected`. Unscored
    /// candidates carry empty `sse`/`fpe` cells.
    pub fn write_csv<W: Write>(&self, w: W, comments: &[String]) -> Result<()> {
        let mut w = w;
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["order_spec", "n_hidden", "sse", "p", "N", "fpe", "selected"])?;
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for (i, c) in self.candidates.iter().enumerate() {
            out.write_record([
                c.spec.to_string(),
                c.n_hidden.to_string(),
                fmt(c.sse),
                c.p.to_string(),
                c.n.to_string(),
                fmt(c.fpe),
                (Some(i) == self.selected).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Lag-order grid for one structure: every `(output_lags, input_lags)` pair.
pub fn order_grid(
    template: &RegressorSpec,
    output_lags: impl IntoIterator<Item = usize> + Clone,
    input_lags: impl IntoIterator<Item = usize> + Clone,
) -> Vec<RegressorSpec> {
    let mut grid = Vec::new();
    for o in output_lags {
        for i in input_lags.clone() {
            grid.push(template.with_orders(o, i));
        }
    }
    grid
}

fn argmin_fpe(cands: &[FpeCandidate], idx: &[usize]) -> Option<usize> {
    idx.iter()
        .copied()
        .filter(|&i| cands[i].fpe.is_some())
        .min_by(|&a, &b| {
            cands[a]
                .fpe
                .partial_cmp(&cands[b].fpe)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

/// Two-phase structure search: sweep lag orders at `phase1_hidden` nodes and
/// keep the minimum-FPE order, then sweep node counts at that order and keep
/// the minimum-FPE network.
pub fn select_structure<S: Scalar>(
    log: &SignalLog,
    output: Channel,
    orders: &[RegressorSpec],
    nodes: &[usize],
    cfg: &SelectConfig,
) -> Result<(FpeReport, FitResult<S>)> {
    if orders.is_empty() || nodes.is_empty() {
        return Err(Error::InvalidArgument("order and node grids must be non-empty".into()));
    }
    let mut report = FpeReport {
        output,
        candidates: Vec::new(),
        best_order: None,
        selected: None,
    };
    let mut fits: HashMap<(String, usize), (usize, FitResult<S>)> = HashMap::new();

    let mut run = |phase: u8, spec: &RegressorSpec, h: usize, report: &mut FpeReport| -> usize {
        let key = (spec.to_string(), h);
        let p = param_count(spec.n_regressors(), h);
        let n = log.len().saturating_sub(spec.max_lag());
        if let Some((i, _)) = fits.get(&key) {
            let mut c = report.candidates[*i].clone();
            c.phase = phase;
            report.candidates.push(c);
            return report.candidates.len() - 1;
        }
        let mut cand = FpeCandidate {
            phase,
            spec: spec.clone(),
            n_hidden: h,
            p,
            n,
            sse: None,
            fpe: None,
            failure: None,
        };
        match fit_oe_model::<S>(log, output, spec, h, &cfg.fit) {
            Ok(fit) => {
                cand.sse = Some(fit.sse);
                cand.fpe = fpe(fit.sse, fit.n, p).ok();
                report.candidates.push(cand);
                let idx = report.candidates.len() - 1;
                fits.insert(key, (idx, fit));
                idx
            }
            Err(e) => {
                cand.failure = Some(e.to_string());
                report.candidates.push(cand);
                report.candidates.len() - 1
            }
        }
    };

    let phase1: Vec<usize> = orders
        .iter()
        .map(|s| run(1, s, cfg.phase1_hidden, &mut report))
        .collect();
    let Some(best) = argmin_fpe(&report.candidates, &phase1) else {
        return Err(Error::Selection {
            reason: "every lag order failed to train".into(),
            report: Box::new(report),
        });
    };
    report.best_order = Some(best);
    let order = report.candidates[best].spec.clone();

    let phase2: Vec<usize> = nodes.iter().map(|&h| run(2, &order, h, &mut report)).collect();
    let Some(sel) = argmin_fpe(&report.candidates, &phase2) else {
        return Err(Error::Selection {
            reason: "every node count failed to train".into(),
            report: Box::new(report),
        });
    };
    report.selected = Some(sel);
    let key = (order.to_string(), report.candidates[sel].n_hidden);
    let (_, fit) = fits.remove(&key).expect("selected candidate was trained");
    Ok((report, fit))
}
