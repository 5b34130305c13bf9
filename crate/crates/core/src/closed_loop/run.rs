use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::closed_loop::profile::ReferenceProfile;
use crate::control::{run_model_episode, Controller, ControllerInputs, CriterionWeights, EpisodeStart, OpacityError};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::surrogate::{Plant, PlantParams, PlantState};
use crate::sysid::EngineModel;

/// Half width of the windows around reference steps, s.
pub const TRANSIENT_HALF_WIDTH: f64 = 2.0;

pub const RUN_CSV_HEADER: [&str; 9] = ["k", "t", "U", "R_ref", "R", "P", "mdot", "Op_ref", "Op"];

/// System driven by the controller.
#[derive(Debug, Clone, Copy)]
pub enum LoopTarget<'a, S> {
    /// The identified model; the controller reads the model's opacity `d − 1`
    /// samples ahead.
    Model(&'a EngineModel<S>),
    /// The surrogate plant; the controller reads the latest opacity
    /// measurement in place of the look-ahead value.
    Plant(&'a PlantParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// RMSE of `R_ref − R` over the whole run, rpm.
    pub rmse_speed: f64,
    /// RMSE of `R_ref − R` inside the ±2 s windows around reference steps, rpm.
    pub transient_rmse_speed: f64,
    pub max_opacity: f64,
    /// `Σ max(0, Op − Op_ref)·Ts`, %·s.
    pub opacity_excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub ts: f64,
    pub pump: Vec<f64>,
    pub speed_ref: Vec<f64>,
    pub speed: Vec<f64>,
    pub pressure: Vec<f64>,
    pub airflow: Vec<f64>,
    pub opacity_ref: Vec<f64>,
    pub opacity: Vec<f64>,
    pub metrics: RunMetrics,
}

/// Tracking and smoke metrics of a run against its profile.
pub fn compute_metrics(speed: &[f64], opacity: &[f64], profile: &ReferenceProfile) -> Result<RunMetrics> {
    let n = profile.len();
    if speed.len() != n || opacity.len() != n {
        return Err(Error::shape(format!(
            "trajectories of {} and {} samples for a {n}-sample profile",
            speed.len(),
            opacity.len()
        )));
    }
    let err2: Vec<f64> = speed
        .iter()
        .zip(profile.speed_ref())
        .map(|(r, rr)| (rr - r) * (rr - r))
        .collect();
    let rmse_speed = (err2.iter().sum::<f64>() / n as f64).sqrt();
    let mask = profile.transient_mask(TRANSIENT_HALF_WIDTH);
    let (sum, count) = err2
        .iter()
        .zip(&mask)
        .filter(|(_, m)| **m)
        .fold((0.0, 0usize), |(s, c), (e, _)| (s + e, c + 1));
    let transient_rmse_speed = if count == 0 { 0.0 } else { (sum / count as f64).sqrt() };
    let max_opacity = opacity.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let opacity_excess = opacity
        .iter()
        .zip(profile.opacity_ref())
        .map(|(o, r)| (o - r).max(0.0))
        .sum::<f64>()
        * profile.ts();
    Ok(RunMetrics {
        rmse_speed,
        transient_rmse_speed,
        max_opacity,
        opacity_excess,
    })
}

/// Runs a frozen controller over the profile, starting from the target's trim
/// point at the first reference speed.
pub fn run_closed_loop<S: Scalar>(
    target: LoopTarget<'_, S>,
    controller: &Controller<S>,
    profile: &ReferenceProfile,
    settle_steps: usize,
) -> Result<RunResult> {
    if let LoopTarget::Plant(p) = target {
        if (p.ts - profile.ts()).abs() > 1e-12 {
            return Err(Error::InvalidArgument("profile and plant sample periods differ".into()));
        }
    }
    let to64 = |v: &[S]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
    let (pump, speed, pressure, airflow, opacity) = match target {
        LoopTarget::Model(model) => {
            let start = EpisodeStart::trim(model, profile, settle_steps)?;
            let mut c = controller.clone();
            let w = CriterionWeights::opacity(0.0);
            let t = run_model_episode(model, &mut c, profile, &start, &w, OpacityError::Symmetric, None)?;
            (to64(&t.pump), to64(&t.speed), to64(&t.pressure), to64(&t.airflow), to64(&t.opacity))
        }
        LoopTarget::Plant(params) => run_on_plant(params, controller, profile)?,
    };
    let metrics = compute_metrics(&speed, &opacity, profile)?;
    Ok(RunResult {
        ts: profile.ts(),
        pump,
        speed_ref: profile.speed_ref().to_vec(),
        speed,
        pressure,
        airflow,
        opacity_ref: profile.opacity_ref().to_vec(),
        opacity,
        metrics,
    })
}

type Trajectories = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

fn run_on_plant<S: Scalar>(
    params: &PlantParams,
    controller: &Controller<S>,
    profile: &ReferenceProfile,
) -> Result<Trajectories> {
    let (_, state) = PlantState::trim(params, profile.speed_at(0))?;
    let mut plant = Plant::new(params.clone(), state)?;
    let d = controller.delay();
    let n = profile.len();
    let mut out: Trajectories = Default::default();
    let mut prev_speed = profile.speed_at(0);
    for k in 0..n {
        let rec = plant.step_with(|m| {
            let inputs = ControllerInputs {
                speed_ref: S::of(profile.speed_at(k + 1)),
                speed: S::of(m.speed),
                speed_prev: S::of(prev_speed),
                opacity_ref: S::of(profile.opacity_at(k + d)),
                opacity: S::of(m.opacity),
            };
            Ok(controller.forward(&inputs)?.as_f64())
        })?;
        prev_speed = rec.speed;
        out.0.push(rec.pump);
        out.1.push(rec.speed);
        out.2.push(rec.pressure);
        out.3.push(rec.airflow);
        out.4.push(rec.opacity);
    }
    Ok(out)
}

impl RunResult {
    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }

    /// Reference profile recovered from the trajectory columns.
    pub fn profile(&self) -> Result<ReferenceProfile> {
        ReferenceProfile::new(self.ts, self.speed_ref.clone(), self.opacity_ref.clone())
    }

    /// CSV `k,t,U,R_ref,R,P,mdot,Op_ref,Op` preceded by `# ` comment lines.
    pub fn write_csv<W: Write>(&self, w: W, comments: &[String]) -> Result<()> {
        let mut w = w;
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(RUN_CSV_HEADER)?;
        for k in 0..self.len() {
            out.write_record(&[
                k.to_string(),
                (k as f64 * self.ts).to_string(),
                self.pump[k].to_string(),
                self.speed_ref[k].to_string(),
                self.speed[k].to_string(),
                self.pressure[k].to_string(),
                self.airflow[k].to_string(),
                self.opacity_ref[k].to_string(),
                self.opacity[k].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses a run CSV; returns the run (metrics recomputed from the
    /// trajectories) and its comment lines without the `# ` prefix.
    pub fn read_csv(text: &str) -> Result<(Self, Vec<String>)> {
        let comments: Vec<String> = text
            .lines()
            .filter_map(|l| l.trim_start().strip_prefix('#'))
            .map(|l| l.trim().to_owned())
            .collect();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::format(1, format!("missing column `{name}`")))
        };
        let idx: Vec<usize> = RUN_CSV_HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); RUN_CSV_HEADER.len()];
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            for (c, &i) in cols.iter_mut().zip(&idx) {
                let cell = row.get(i).unwrap_or("");
                c.push(
                    cell.parse()
                        .map_err(|_| Error::format(line, format!("non-numeric cell `{cell}`")))?,
                );
            }
        }
        if cols[0].len() < 2 {
            return Err(Error::format(0, "run file needs at least two rows"));
        }
        let ts = cols[1][1] - cols[1][0];
        let mut it = cols.into_iter().skip(2);
        let mut next = || it.next().expect("nine columns");
        let (pump, speed_ref, speed, pressure, airflow, opacity_ref, opacity) =
            (next(), next(), next(), next(), next(), next(), next());
        let profile = ReferenceProfile::new(ts, speed_ref.clone(), opacity_ref.clone())?;
        let metrics = compute_metrics(&speed, &opacity, &profile)?;
        Ok((
            Self {
                ts,
                pump,
                speed_ref,
                speed,
                pressure,
                airflow,
                opacity_ref,
                opacity,
                metrics,
            },
            comments,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f), comments)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Vec<String>)> {
        Self::read_csv(&std::fs::read_to_string(path)?)
    }
}
