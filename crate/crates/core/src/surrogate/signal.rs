use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measured engine channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    /// Injection pump position, %.
    #[serde(rename = "T")]
    PumpPosition,
    /// Engine speed, rpm.
    #[serde(rename = "R")]
    Speed,
    /// Intake manifold pressure, kPa.
    #[serde(rename = "P")]
    Pressure,
    /// Inlet airflow, g/s.
    #[serde(rename = "mdot")]
    Airflow,
    /// Fuel flow, g/s.
    #[serde(rename = "mdot_f")]
    FuelFlow,
    /// Exhaust opacity, %.
    #[serde(rename = "Op")]
    Opacity,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::PumpPosition,
        Channel::Speed,
        Channel::Pressure,
        Channel::Airflow,
        Channel::FuelFlow,
        Channel::Opacity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::PumpPosition => "T",
            Channel::Speed => "R",
            Channel::Pressure => "P",
            Channel::Airflow => "mdot",
            Channel::FuelFlow => "mdot_f",
            Channel::Opacity => "Op",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown channel `{s}`")))
    }
}

/// One sample of the engine signals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SignalRecord {
    pub k: u64,
    pub t: f64,
    pub pump: f64,
    pub speed: f64,
    pub pressure: f64,
    pub airflow: f64,
    pub fuel_flow: f64,
    pub opacity: f64,
}

impl SignalRecord {
    pub fn get(&self, ch: Channel) -> f64 {
        match ch {
            Channel::PumpPosition => self.pump,
            Channel::Speed => self.speed,
            Channel::Pressure => self.pressure,
            Channel::Airflow => self.airflow,
            Channel::FuelFlow => self.fuel_flow,
            Channel::Opacity => self.opacity,
        }
    }

    pub fn set(&mut self, ch: Channel, v: f64) {
        match ch {
            Channel::PumpPosition => self.pump = v,
            Channel::Speed => self.speed = v,
            Channel::Pressure => self.pressure = v,
            Channel::Airflow => self.airflow = v,
            Channel::FuelFlow => self.fuel_flow = v,
            Channel::Opacity => self.opacity = v,
        }
    }
}

/// Uniformly sampled multichannel engine log.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalLog {
    ts: f64,
    records: Vec<SignalRecord>,
}

pub const CSV_HEADER: [&str; 8] = ["k", "t", "T", "R", "P", "mdot", "mdot_f", "Op"];

fn uniform_tolerance(ts: f64, t: f64) -> f64 {
    1e-9 * ts.max(t.abs()).max(1.0)
}

impl SignalLog {
    pub fn new(ts: f64, records: Vec<SignalRecord>) -> Result<Self> {
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample period {ts} must be positive")));
        }
        if records.is_empty() {
            return Err(Error::InvalidArgument("signal log is empty".into()));
        }
        for (i, w) in records.windows(2).enumerate() {
            if w[1].k <= w[0].k {
                return Err(Error::InvalidArgument(format!(
                    "sample index not increasing at record {}",
                    i + 1
                )));
            }
            let expected = w[0].t + (w[1].k - w[0].k) as f64 * ts;
            if (w[1].t - expected).abs() > uniform_tolerance(ts, expected) {
                return Err(Error::InvalidArgument(format!(
                    "non-uniform sampling at record {}",
                    i + 1
                )));
            }
        }
        Ok(Self { ts, records })
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SignalRecord] {
        &self.records
    }

    pub fn channel(&self, ch: Channel) -> Vec<f64> {
        self.records.iter().map(|r| r.get(ch)).collect()
    }

    /// Splits in time order; the first part holds `round(fraction · len)` samples.
    pub fn split(&self, fraction: f64) -> Result<(SignalLog, SignalLog)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "split fraction {fraction} must lie in (0, 1)"
            )));
        }
        let cut = ((self.len() as f64) * fraction).round() as usize;
        if cut == 0 || cut >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot split {} samples at fraction {fraction}",
                self.len()
            )));
        }
        Ok((
            SignalLog::new(self.ts, self.records[..cut].to_vec())?,
            SignalLog::new(self.ts, self.records[cut..].to_vec())?,
        ))
    }

    /// Writes the log as CSV. `comments` are emitted first as `# ...` lines.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{}", CSV_HEADER.join(","))?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.k, r.t, r.pump, r.speed, r.pressure, r.airflow, r.fuel_flow, r.opacity
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(rdr: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(rdr);
        let headers = reader.headers()?.clone();
        let header_line = reader.position().line();
        let mut cols = [0usize; 8];
        for (slot, name) in cols.iter_mut().zip(CSV_HEADER) {
            *slot = headers.iter().position(|h| h == name).ok_or_else(|| {
                Error::format(header_line.max(1) as usize, format!("missing column `{name}`"))
            })?;
        }

        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::format(line, e.to_string())
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let field = |i: usize| -> Result<&str> {
                row.get(cols[i])
                    .ok_or_else(|| Error::format(line, format!("missing value for `{}`", CSV_HEADER[i])))
            };
            let num = |i: usize| -> Result<f64> {
                let raw = field(i)?;
                let v: f64 = raw.parse().map_err(|_| {
                    Error::format(line, format!("non-numeric `{raw}` in column `{}`", CSV_HEADER[i]))
                })?;
                if !v.is_finite() {
                    return Err(Error::format(line, format!("non-finite value in `{}`", CSV_HEADER[i])));
                }
                Ok(v)
            };
            let k_raw = field(0)?;
            let k: u64 = k_raw
                .parse()
                .map_err(|_| Error::format(line, format!("bad sample index `{k_raw}`")))?;
            records.push((
                line,
                SignalRecord {
                    k,
                    t: num(1)?,
                    pump: num(2)?,
                    speed: num(3)?,
                    pressure: num(4)?,
                    airflow: num(5)?,
                    fuel_flow: num(6)?,
                    opacity: num(7)?,
                },
            ));
        }

        if records.is_empty() {
            return Err(Error::format(header_line.max(1) as usize + 1, "log has no records"));
        }
        if records.len() < 2 {
            return Err(Error::format(records[0].0, "need two records to infer the sample period"));
        }
        let (_, r0) = records[0];
        let (line1, r1) = records[1];
        if r1.k <= r0.k {
            return Err(Error::format(line1, "sample index not increasing"));
        }
        let ts = (r1.t - r0.t) / (r1.k - r0.k) as f64;
        if !(ts > 0.0) {
            return Err(Error::format(line1, "time not increasing"));
        }
        for w in records.windows(2) {
            let ((_, a), (line, b)) = (w[0], w[1]);
            if b.k <= a.k {
                return Err(Error::format(line, "sample index not increasing"));
            }
            let expected = r0.t + (b.k - r0.k) as f64 * ts;
            if (b.t - expected).abs() > 1e-6 * ts.max(1e-3) * (1.0 + (b.k - r0.k) as f64).sqrt() {
                return Err(Error::format(line, format!("non-uniform time {} (expected {expected})", b.t)));
            }
        }
        Ok(SignalLog {
            ts,
            records: records.into_iter().map(|(_, r)| r).collect(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w, comments)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

pub fn save_log(log: &SignalLog, path: impl AsRef<Path>) -> Result<()> {
    log.save(path, &[])
}

pub fn load_log(path: impl AsRef<Path>) -> Result<SignalLog> {
    SignalLog::load(path)
}
