use std::io::Write;

use serde::Serialize;

use crate::closed_loop::run::RunMetrics;
use crate::error::{Error, Result};

/// One run of an opacity-weight sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta_op: f64,
    pub rmse_speed: f64,
    pub transient_rmse_speed: f64,
    pub max_opacity: f64,
    pub opacity_excess: f64,
    pub source: String,
}

impl SweepRow {
    pub fn new(eta_op: f64, m: &RunMetrics, source: impl Into<String>) -> Self {
        Self {
            eta_op,
            rmse_speed: m.rmse_speed,
            transient_rmse_speed: m.transient_rmse_speed,
            max_opacity: m.max_opacity,
            opacity_excess: m.opacity_excess,
            source: source.into(),
        }
    }
}

/// Sorts rows by `eta_op` and lists every adjacent pair where the maximum
/// opacity rises or the transient speed RMSE falls as the weight grows.
pub fn check_sweep(rows: &mut [SweepRow]) -> Result<Vec<String>> {
    if rows.iter().any(|r| !r.eta_op.is_finite()) {
        return Err(Error::InvalidArgument("sweep rows need finite eta_op".into()));
    }
    rows.sort_by(|a, b| a.eta_op.total_cmp(&b.eta_op));
    let mut violations = Vec::new();
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.eta_op == b.eta_op {
            return Err(Error::InvalidArgument(format!("eta_op {} appears twice", a.eta_op)));
        }
        if b.max_opacity > a.max_opacity {
            violations.push(format!(
                "max opacity rises from {:.3} (eta {}) to {:.3} (eta {})",
                a.max_opacity, a.eta_op, b.max_opacity, b.eta_op
            ));
        }
        if b.transient_rmse_speed < a.transient_rmse_speed {
            violations.push(format!(
                "transient speed RMSE falls from {:.3} (eta {}) to {:.3} (eta {})",
                a.transient_rmse_speed, a.eta_op, b.transient_rmse_speed, b.eta_op
            ));
        }
    }
    Ok(violations)
}

/// Summary CSV, one row per run, preceded by `# ` comment lines.
pub fn write_summary_csv<W: Write>(rows: &[SweepRow], w: W, comments: &[String]) -> Result<()> {
    let mut w = w;
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "eta_op",
        "rmse_speed",
        "transient_rmse_speed",
        "max_opacity",
        "opacity_excess",
        "source",
    ])?;
    for r in rows {
        out.write_record(&[
            r.eta_op.to_string(),
            r.rmse_speed.to_string(),
            r.transient_rmse_speed.to_string(),
            r.max_opacity.to_string(),
            r.opacity_excess.to_string(),
            r.source.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(eta: f64, tr: f64, op: f64) -> SweepRow {
        SweepRow {
            eta_op: eta,
            rmse_speed: tr,
            transient_rmse_speed: tr,
            max_opacity: op,
            opacity_excess: 0.0,
            source: String::new(),
        }
    }

    #[test]
    fn monotone_sweep_passes_in_any_order() {
        let mut rows = vec![row(0.8, 30.0, 10.0), row(0.0, 10.0, 40.0), row(0.2, 20.0, 20.0)];
        assert!(check_sweep(&mut rows).unwrap().is_empty());
        assert_eq!(rows[0].eta_op, 0.0);
    }

    #[test]
    fn ties_are_allowed() {
        let mut rows = vec![row(0.0, 10.0, 20.0), row(0.2, 10.0, 20.0)];
        assert!(check_sweep(&mut rows).unwrap().is_empty());
    }

    #[test]
    fn each_violation_reported() {
        let mut rows = vec![row(0.0, 10.0, 20.0), row(0.2, 9.0, 21.0)];
        assert_eq!(check_sweep(&mut rows).unwrap().len(), 2);
    }

    #[test]
    fn duplicate_weight_rejected() {
        let mut rows = vec![row(0.2, 10.0, 20.0), row(0.2, 10.0, 20.0)];
        assert!(check_sweep(&mut rows).is_err());
    }
}
