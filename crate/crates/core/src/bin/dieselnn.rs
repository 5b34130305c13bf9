use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dieselnn::closed_loop::{
    build_profile, check_sweep, run_closed_loop, run_svg, write_summary_csv, LoopTarget, ReferenceProfile, RunResult,
    SweepRow,
};
use dieselnn::config::RunConfig;
use dieselnn::control::{train_controller, write_metrics_csv, Controller, CriterionWeights};
use dieselnn::surrogate::{Channel, SignalLog};
use dieselnn::sysid::{identify_engine, nrmse, order_grid, select_structure, simulate_on_log, EngineModel};
use dieselnn::{Error, Result};

const CONTROLLER_FILE: &str = "controller.txt";
const METRICS_FILE: &str = "metrics.csv";
const MODELLED: [Channel; 4] = [Channel::Speed, Channel::Pressure, Channel::Airflow, Channel::Opacity];

#[derive(Parser)]
#[command(name = "dieselnn", version, about = "Neural engine modelling and opacity-constrained speed control")]
struct Cli {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drive the surrogate plant with the configured excitation and save the log.
    GenData {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the four engine networks and write the model directory.
    Identify {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Separate validation log; otherwise the tail of `--data` is held out.
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-phase Final Prediction Error search for one channel.
    Select {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        channel: Channel,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a controller through the engine model for one opacity weight.
    TrainController {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        eta: f64,
        /// Output directory; defaults to `<paths.controllers>/eta_<eta>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a trained controller over the reference profile.
    Simulate(SimulateArgs),
    /// Tabulate runs of a sweep; exits with 1 if the opacity/speed trade-off is not monotone.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Engine model; required for the model target and for steady-map opacity references.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Drive the surrogate plant instead of the model.
    #[arg(long)]
    plant: bool,
    #[arg(long)]
    controller: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Metrics JSON; defaults to the run path with a `.json` extension.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Optional SVG of speed and opacity against time.
    #[arg(long)]
    plot: Option<PathBuf>,
}

enum Outcome {
    Done,
    SweepViolated,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::SweepViolated) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::GenData { out, samples, seed } => {
            if let Some(n) = samples {
                cfg.data.samples = n;
            }
            if let Some(s) = seed {
                cfg.data.seed = s;
            }
            cfg.validate()?;
            gen_data(&cfg, &out.unwrap_or_else(|| cfg.paths.log.clone()))
        }
        Command::Identify { data, validation, out } => {
            let data = data.unwrap_or_else(|| cfg.paths.log.clone());
            let out = out.unwrap_or_else(|| cfg.paths.model.clone());
            identify(&cfg, &data, validation.as_deref(), &out)
        }
        Command::Select { data, channel, out } => select(&cfg, &data.unwrap_or_else(|| cfg.paths.log.clone()), channel, &out),
        Command::TrainController {
            model,
            eta,
            out,
            epochs,
            seed,
        } => {
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            cfg.validate()?;
            let out = out.unwrap_or_else(|| cfg.paths.controllers.join(format!("eta_{eta}")));
            train(&cfg, &model.unwrap_or_else(|| cfg.paths.model.clone()), eta, &out)
        }
        Command::Simulate(args) => simulate(&cfg, &args),
        Command::Report { runs, out } => report(&cfg, &runs, &out.unwrap_or_else(|| cfg.paths.report.clone())),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => Ok(fs::create_dir_all(dir)?),
        _ => Ok(()),
    }
}

fn gen_data(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let log = cfg.data.generate(&cfg.plant)?;
    create_parent(out)?;
    log.save(out, &cfg.provenance("gen-data")?)?;
    println!("wrote {} samples (Ts = {} s) to {}", log.len(), log.ts(), out.display());
    println!("{:<6} {:>12} {:>12}", "signal", "min", "max");
    for ch in [Channel::PumpPosition, Channel::Speed, Channel::Pressure, Channel::Airflow, Channel::FuelFlow, Channel::Opacity] {
        let v = log.channel(ch);
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        println!("{:<6} {lo:>12.3} {hi:>12.3}", ch.name());
    }
    Ok(Outcome::Done)
}

fn identify(cfg: &RunConfig, data: &Path, validation: Option<&Path>, out: &Path) -> Result<Outcome> {
    let log = SignalLog::load(data)?;
    let (train, val) = match validation {
        Some(v) => (log, SignalLog::load(v)?),
        None => log.split(1.0 - cfg.data.validation_fraction)?,
    };
    let (model, summary) = identify_engine::<f64>(&train, &cfg.identify)?;
    let comments = cfg.provenance("identify")?;
    model.save_dir(out, &comments)?;
    let traj = simulate_on_log(&model, &val)?;
    let mut table = String::new();
    for c in &comments {
        table.push_str(&format!("# {c}\n"));
    }
    table.push_str("channel,nrmse,sse_train,n_train,p,iterations,restarts\n");
    println!("{:<9} {:>9} {:>12} {:>6} {:>5}", "channel", "NRMSE", "train SSE", "N", "p");
    for (ch, s) in MODELLED.iter().zip(&summary) {
        let e = nrmse(&val.channel(*ch), traj.channel(*ch).expect("modelled channel"))?;
        table.push_str(&format!("{},{e},{},{},{},{},{}\n", ch.name(), s.sse, s.n, s.p, s.iterations, s.restarts));
        println!("{:<9} {:>8.2}% {:>12.4e} {:>6} {:>5}", ch.name(), 100.0 * e, s.sse, s.n, s.p);
    }
    fs::write(out.join("nrmse.csv"), table)?;
    println!(
        "model written to {} (train {} / validation {} samples)",
        out.display(),
        train.len(),
        val.len()
    );
    Ok(Outcome::Done)
}

fn select(cfg: &RunConfig, data: &Path, channel: Channel, out: &Path) -> Result<Outcome> {
    let log = SignalLog::load(data)?;
    let (template, _) = cfg
        .identify
        .slot(channel)
        .ok_or_else(|| Error::InvalidArgument(format!("{channel} is not a modelled output")))?;
    let g = &cfg.select;
    let orders = order_grid(template, g.output_lags.iter().copied(), g.input_lags.iter().copied());
    let comments = cfg.provenance(&format!("select {channel}"))?;
    create_parent(out)?;
    let write = |report: &dieselnn::sysid::FpeReport| -> Result<()> {
        report.write_csv(BufWriter::new(fs::File::create(out)?), &comments)
    };
    match select_structure::<f64>(&log, channel, &orders, &g.nodes, &g.select_config()) {
        Ok((report, fit)) => {
            write(&report)?;
            let best = report.selected_candidate().expect("selection succeeded");
            println!(
                "{channel}: {} with {} hidden nodes (p = {}, FPE = {:.6e}, SSE = {:.6e})",
                best.spec,
                best.n_hidden,
                best.p,
                best.fpe.unwrap_or(f64::NAN),
                fit.sse
            );
            Ok(Outcome::Done)
        }
        Err(Error::Selection { reason, report }) => {
            write(&report)?;
            Err(Error::Selection { reason, report })
        }
        Err(e) => Err(e),
    }
}

fn profile_for(cfg: &RunConfig, model: Option<&EngineModel<f64>>) -> Result<ReferenceProfile> {
    build_profile(&cfg.profile, cfg.plant.ts, model, cfg.experiment.settle_steps)
}

fn train(cfg: &RunConfig, model_dir: &Path, eta: f64, out: &Path) -> Result<Outcome> {
    let model = EngineModel::<f64>::load_dir(model_dir)?;
    let profile = profile_for(cfg, Some(&model))?;
    let weights = CriterionWeights::opacity(eta);
    weights.validate()?;
    let initial = Controller::for_model(&model, cfg.train.hidden, cfg.train.seed)?;
    let outcome = train_controller(&model, &profile, &weights, initial, &cfg.train)?;
    fs::create_dir_all(out)?;
    let mut comments = cfg.provenance("train-controller")?;
    comments.push(format!("eta_op {eta}"));
    comments.push(format!("best_epoch {}", outcome.best_epoch));
    outcome.controller.save(out.join(CONTROLLER_FILE), &comments)?;
    write_metrics_csv(
        &outcome.metrics,
        BufWriter::new(fs::File::create(out.join(METRICS_FILE))?),
        &comments,
    )?;
    if let Some(best) = outcome.metrics.iter().find(|m| m.epoch == outcome.best_epoch) {
        println!(
            "eta_op {eta}: best epoch {} of {}, J = {:.6}, speed RMSE {:.1} rpm, max opacity {:.2} %",
            best.epoch, cfg.train.epochs, best.j, best.rmse_speed, best.max_opacity
        );
    }
    println!("controller written to {}", out.display());
    Ok(Outcome::Done)
}

/// Controller file, accepting either the file itself or its directory.
fn controller_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(CONTROLLER_FILE)
    } else {
        path.to_path_buf()
    }
}

/// `eta_op` recorded in the comment header of a controller or run file.
fn recorded_eta(text: &str) -> Option<f64> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .filter_map(|l| l.trim().strip_prefix("eta_op "))
        .find_map(|v| v.trim().parse().ok())
}

fn simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<Outcome> {
    let cpath = controller_path(&args.controller);
    let ctext = fs::read_to_string(&cpath)?;
    let controller = Controller::<f64>::from_text(&ctext)?;
    let eta = recorded_eta(&ctext);
    let model = match &args.model {
        Some(dir) => Some(EngineModel::<f64>::load_dir(dir)?),
        None => None,
    };
    let target = if args.plant {
        LoopTarget::Plant(&cfg.plant)
    } else {
        LoopTarget::Model(
            model
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("simulate needs --model or --plant".into()))?,
        )
    };
    let profile = profile_for(cfg, model.as_ref())?;
    let run = run_closed_loop(target, &controller, &profile, cfg.experiment.settle_steps)?;
    let target_name = if args.plant { "plant" } else { "model" };
    let mut comments = cfg.provenance("simulate")?;
    comments.push(format!("target {target_name}"));
    comments.push(format!("controller {}", cpath.display()));
    if let Some(e) = eta {
        comments.push(format!("eta_op {e}"));
    }
    create_parent(&args.out)?;
    run.save(&args.out, &comments)?;
    let metrics_path = args.metrics.clone().unwrap_or_else(|| args.out.with_extension("json"));
    let doc = serde_json::json!({
        "metrics": run.metrics,
        "target": target_name,
        "eta_op": eta,
        "controller": cpath.display().to_string(),
        "config_sha256": cfg.digest()?,
        "config": cfg,
    });
    create_parent(&metrics_path)?;
    fs::write(&metrics_path, serde_json::to_string_pretty(&doc).map_err(|e| Error::Config(e.to_string()))?)?;
    if let Some(plot) = &args.plot {
        create_parent(plot)?;
        let title = match eta {
            Some(e) => format!("{target_name}, eta_op = {e}"),
            None => target_name.to_owned(),
        };
        fs::write(plot, run_svg(&run, &title))?;
    }
    let m = run.metrics;
    println!(
        "{target_name}: speed RMSE {:.1} rpm (transient {:.1}), max opacity {:.2} %, excess {:.3} %·s",
        m.rmse_speed, m.transient_rmse_speed, m.max_opacity, m.opacity_excess
    );
    Ok(Outcome::Done)
}

fn report(cfg: &RunConfig, runs: &[PathBuf], out: &Path) -> Result<Outcome> {
    let mut rows = Vec::new();
    for path in runs {
        let text = fs::read_to_string(path)?;
        let (run, _) = RunResult::read_csv(&text)?;
        let eta = recorded_eta(&text).ok_or_else(|| {
            Error::InvalidArgument(format!("{} does not record an eta_op comment", path.display()))
        })?;
        rows.push(SweepRow::new(eta, &run.metrics, path.display().to_string()));
    }
    let violations = check_sweep(&mut rows)?;
    create_parent(out)?;
    write_summary_csv(&rows, BufWriter::new(fs::File::create(out)?), &cfg.provenance("report")?)?;
    println!(
        "{:>7} {:>10} {:>14} {:>12} {:>12}",
        "eta_op", "RMSE", "transient RMSE", "max Op", "Op excess"
    );
    for r in &rows {
        println!(
            "{:>7} {:>10.2} {:>14.2} {:>12.3} {:>12.3}",
            r.eta_op, r.rmse_speed, r.transient_rmse_speed, r.max_opacity, r.opacity_excess
        );
    }
    if violations.is_empty() {
        println!("sweep is monotone");
        Ok(Outcome::Done)
    } else {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        Ok(Outcome::SweepViolated)
    }
}
