use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rrm_core::baselines::{greedy, oracle, random_policy, static_daily};
use rrm_core::calibration::{fit_threshold, load_telemetry, save_telemetry, synth_telemetry, write_curve, ThresholdGrid};
use rrm_core::checkpoint::load_model;
use rrm_core::environment::{evaluate, write_eval_csv, NeighborhoodKind, NeighborhoodModel, NoiseSpec};
use rrm_core::harness::{
    compare, diurnal_trace, load_eval_set, load_report, load_trace, replay, run_config, save_eval_set,
    save_report, save_trace, two_phase_trace, write_comparison, DiurnalParams, LoadTrace, Policy, RunConfig,
    RunManifest,
};
use rrm_core::robustness::{report_grid, run_grid, SweepSpec};
use rrm_core::topology::{load_network, random_network, save_network, Band, Network};
use rrm_core::trainer::{evaluate_policy, resume, train, InstanceGenerator};
use rrm_core::Error;

/// Channel and bonding-width assignment for WLAN access points.
#[derive(Debug, Parser)]
#[command(name = "rrm", version)]
struct Cli {
    /// Master seed; overrides the run configuration and the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, or a `.csv` file for single-table commands.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the agent; writes logs, checkpoints and the effective config.
    Train(TrainArgs),
    /// Mean regret of a checkpoint on an evaluation set.
    Eval(EvalArgs),
    /// Exhaustive search on one topology.
    Oracle(NetworkArg),
    /// Score a heuristic policy on one topology.
    Baseline(BaselineArgs),
    /// Fit the neighbor threshold to telemetry.
    Calibrate(CalibrateArgs),
    /// Sweep observation noise and report regret degradation.
    Robustness(RobustnessArgs),
    /// Closed-loop replay of a load trace under one policy.
    Replay(ReplayArgs),
    /// Compare two replay reports of the same trace.
    Compare(CompareArgs),
    /// Generate synthetic inputs.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    iterations: Option<u64>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    eval_set: PathBuf,
    #[arg(long, value_enum)]
    env: Option<EnvKind>,
    #[arg(long)]
    rollouts: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    noise_mean: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
}

#[derive(Debug, Args)]
struct NetworkArg {
    #[arg(long)]
    network: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BaselinePolicy {
    Greedy,
    Random,
    Static,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, value_enum)]
    policy: BaselinePolicy,
    /// Load trace the static policy forecasts from; defaults to the network's own loads.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    telemetry: PathBuf,
    /// `lo:hi:step` in dBm.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<ThresholdGrid>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EnvKind {
    Threshold,
    Sigmoid,
}

impl From<EnvKind> for NeighborhoodKind {
    fn from(k: EnvKind) -> Self {
        match k {
            EnvKind::Threshold => NeighborhoodKind::Threshold,
            EnvKind::Sigmoid => NeighborhoodKind::Sigmoid,
        }
    }
}

#[derive(Debug, Args)]
struct RobustnessArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    eval_set: PathBuf,
    #[arg(long, value_enum)]
    env: Option<EnvKind>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    means: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    stds: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReplayPolicy {
    Drl,
    Greedy,
    Static,
    Random,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum)]
    policy: ReplayPolicy,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    rollouts: Option<usize>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Debug, Subcommand)]
enum GenCommand {
    /// One random topology (TOML).
    Network {
        #[arg(long)]
        aps: usize,
        #[arg(long, default_value = "2g4")]
        band: Band,
        #[arg(long, default_value_t = 2.0)]
        density: f64,
    },
    /// A directory of random topologies drawn from the training generator.
    EvalSet {
        #[arg(long, default_value_t = 20)]
        size: usize,
    },
    /// A load trace for a topology.
    Trace {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, default_value_t = 144)]
        slots: usize,
        #[arg(long, value_enum, default_value = "diurnal")]
        kind: TraceKind,
        /// APs whose load peaks on even slots (two-phase only).
        #[arg(long, value_delimiter = ',')]
        group: Vec<usize>,
        #[arg(long, default_value_t = 0.8)]
        high: f64,
        #[arg(long)]
        other_high: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        low: f64,
    },
    /// Telemetry produced by the simulator under a known threshold.
    Telemetry {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, default_value_t = -82.0, allow_hyphen_values = true)]
        threshold: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma_busy: f64,
        #[arg(long, default_value_t = 10)]
        samples: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TraceKind {
    Diurnal,
    TwoPhase,
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
}

impl Ctx {
    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    fn env_for(&self, kind: Option<EnvKind>) -> NeighborhoodModel {
        match kind {
            Some(k) => self.cfg.environment.with_kind(k.into()),
            None => self.cfg.environment,
        }
    }

    /// Output file for single-table commands: `--out` itself when it names
    /// a `.csv`, otherwise `default_name` inside the `--out` directory.
    fn table(&self, default_name: &str) -> anyhow::Result<PathBuf> {
        if self.out.extension().is_some_and(|e| e == "csv" || e == "toml") {
            if let Some(parent) = self.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            Ok(self.out.clone())
        } else {
            std::fs::create_dir_all(&self.out)
                .with_context(|| format!("creating {}", self.out.display()))?;
            Ok(self.out.join(default_name))
        }
    }

    fn manifest(&self, command: &str, outputs: &[&Path]) -> anyhow::Result<()> {
        let mut m = RunManifest::new(command, &self.cfg)?;
        m.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        let path = match outputs.first() {
            Some(first) if first.is_file() => first.with_extension("manifest.json"),
            Some(first) => first.join("manifest.json"),
            None => self.out.join("manifest.json"),
        };
        m.write(&path)?;
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Usage(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => run_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.out.clone());
    let ctx = Ctx { cfg, out };
    match cli.command {
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Oracle(a) => cmd_oracle(&ctx, a),
        Command::Baseline(a) => cmd_baseline(&ctx, a),
        Command::Calibrate(a) => cmd_calibrate(&ctx, a),
        Command::Robustness(a) => cmd_robustness(&ctx, a),
        Command::Replay(a) => cmd_replay(&ctx, a),
        Command::Compare(a) => cmd_compare(&ctx, a),
        Command::Gen(g) => cmd_gen(&ctx, g),
    }
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = ctx.cfg.clone();
    if let Some(it) = a.iterations {
        cfg.train.iterations = it;
    }
    std::fs::create_dir_all(&ctx.out)?;
    std::fs::write(ctx.out.join("effective_config.toml"), cfg.to_toml()?)?;
    let (_, log) = match &a.resume {
        Some(ckpt) => resume(&cfg.train, ckpt, Some(&ctx.out))?,
        None => train(&cfg.train, Some(&ctx.out))?,
    };
    if let Some(last) = log.rows.last() {
        println!(
            "iteration {} mean regret {:.4} moving average {:.4}",
            last.iteration, last.mean_regret, last.moving_avg_regret
        );
    }
    if let Some(last) = log.evals.last() {
        println!("eval regret {:.4} at iteration {}", last.eval_mean_regret, last.iteration);
    }
    let ctx = Ctx { cfg, out: ctx.out.clone() };
    ctx.manifest("train", &[&ctx.out])
}

fn noise_from(ctx: &Ctx, mean: Option<f64>, std: Option<f64>) -> anyhow::Result<Option<NoiseSpec>> {
    Ok(match (mean, std) {
        (None, None) => ctx.cfg.noise,
        (m, s) => Some(NoiseSpec::new(m.unwrap_or(0.0), s.unwrap_or(0.0), ctx.seed())?),
    })
}

fn cmd_eval(ctx: &Ctx, a: EvalArgs) -> anyhow::Result<()> {
    let model = load_model(&a.checkpoint)?;
    let set = load_eval_set(&a.eval_set)?;
    let env = ctx.env_for(a.env);
    let noise = noise_from(ctx, a.noise_mean, a.noise_std)?;
    let k = a.rollouts.unwrap_or(ctx.cfg.replay.rollouts);
    let result = evaluate_policy(&model, &set, &env, noise.as_ref(), k, ctx.seed())?;
    let path = ctx.table("eval.csv")?;
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["instance", "n_aps", "regret"])?;
    for (i, (rec, net)) in result.records.iter().zip(&set).enumerate() {
        w.write_record([i.to_string(), net.n_aps().to_string(), rec.regret.to_string()])?;
    }
    w.flush()?;
    println!("mean regret {:.6} over {} instances", result.mean_regret, set.len());
    ctx.manifest("eval", &[&path])
}

fn write_record_csv(path: &Path, net: &Network, record: &rrm_core::environment::EvalRecord, label: &str) -> anyhow::Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_eval_csv(file, net, record, label)?;
    Ok(())
}

fn cmd_oracle(ctx: &Ctx, a: NetworkArg) -> anyhow::Result<()> {
    let net = load_network(&a.network)?;
    let env = ctx.cfg.environment;
    let (cfg, regret) = oracle(&net, &env)?;
    let record = evaluate(&net, &cfg, &env)?;
    let path = ctx.table("oracle.csv")?;
    write_record_csv(&path, &net, &record, "oracle")?;
    println!("oracle regret {regret:.6}");
    ctx.manifest("oracle", &[&path])
}

fn cmd_baseline(ctx: &Ctx, a: BaselineArgs) -> anyhow::Result<()> {
    let net = load_network(&a.network)?;
    let env = ctx.cfg.environment;
    let (cfg, label) = match a.policy {
        BaselinePolicy::Greedy => (greedy(&net, &env), "greedy"),
        BaselinePolicy::Random => (random_policy(&net, ctx.seed()), "random"),
        BaselinePolicy::Static => {
            let sequence = match &a.trace {
                Some(t) => load_trace(t, net.clone(), ctx.cfg.trace.as_ref().map_or(10, |t| t.cadence_minutes))?
                    .networks()?,
                None => vec![net.clone()],
            };
            (static_daily(&sequence, &env, ctx.cfg.replay.static_options)?, "static")
        }
    };
    let record = evaluate(&net, &cfg, &env)?;
    let path = ctx.table(&format!("baseline_{label}.csv"))?;
    write_record_csv(&path, &net, &record, label)?;
    println!("{label} regret {:.6}", record.regret);
    ctx.manifest("baseline", &[&path])
}

fn cmd_calibrate(ctx: &Ctx, a: CalibrateArgs) -> anyhow::Result<()> {
    let loaded = load_telemetry(&a.telemetry)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let grid = a.grid.unwrap_or(ctx.cfg.calibration);
    let result = fit_threshold(&loaded.records, grid)?;
    let path = ctx.table("calibration_curve.csv")?;
    write_curve(std::fs::File::create(&path)?, &result)?;
    println!(
        "best threshold {} dBm ({} records, {} skipped)",
        result.best_threshold_dbm, result.n_records, result.skipped
    );
    ctx.manifest("calibrate", &[&path])
}

fn cmd_robustness(ctx: &Ctx, a: RobustnessArgs) -> anyhow::Result<()> {
    let model = load_model(&a.checkpoint)?;
    let set = load_eval_set(&a.eval_set)?;
    let section = &ctx.cfg.robustness;
    let env = ctx
        .cfg
        .environment
        .with_kind(a.env.map(Into::into).unwrap_or(section.kind));
    let spec = SweepSpec {
        means: a.means.unwrap_or_else(|| section.means.clone()),
        stds: a.stds.unwrap_or_else(|| section.stds.clone()),
        trials: a.trials.unwrap_or(section.trials),
        rollouts: section.rollouts,
        seed: ctx.seed(),
    };
    let grid = run_grid(&model, &set, &env, &spec)?;
    let path = ctx.table(&format!("robustness_{}.csv", env.kind))?;
    report_grid(&grid, &path)?;
    println!(
        "baseline regret {:.6}, grid-mean degradation {:.3} ({:?})",
        grid.baseline_regret,
        grid.mean_degradation(),
        grid.metric
    );
    ctx.manifest("robustness", &[&path])
}

fn trace_from(ctx: &Ctx, network: Option<PathBuf>, trace: Option<PathBuf>) -> anyhow::Result<LoadTrace> {
    let source = ctx.cfg.trace.as_ref();
    let cadence = source.map_or(10, |t| t.cadence_minutes);
    let network = network
        .or_else(|| source.map(|t| t.topology.clone()))
        .context("no topology: pass --network or set [trace] in the config")?;
    let trace = trace
        .or_else(|| source.map(|t| t.loads.clone()))
        .context("no load trace: pass --trace or set [trace] in the config")?;
    Ok(load_trace(trace, load_network(network)?, cadence)?)
}

fn cmd_replay(ctx: &Ctx, a: ReplayArgs) -> anyhow::Result<()> {
    let trace = trace_from(ctx, a.network, a.trace)?;
    let model = match (&a.policy, &a.checkpoint) {
        (ReplayPolicy::Drl, Some(p)) => Some(load_model(p)?),
        (ReplayPolicy::Drl, None) => bail!(Error::Usage("--policy drl needs --checkpoint".into())),
        _ => None,
    };
    let policy = match a.policy {
        ReplayPolicy::Drl => Policy::Drl {
            model: model.as_ref().expect("loaded above"),
            rollouts: a.rollouts.unwrap_or(ctx.cfg.replay.rollouts),
        },
        ReplayPolicy::Greedy => Policy::Greedy,
        ReplayPolicy::Static => Policy::Static(ctx.cfg.replay.static_options),
        ReplayPolicy::Random => Policy::Random,
    };
    let report = replay(&trace, policy, &ctx.cfg.environment, ctx.cfg.noise.as_ref(), ctx.seed())?;
    let path = ctx.table(&format!("replay_{}.csv", report.policy))?;
    save_report(&path, &report.rows)?;
    println!("{} mean regret {:.6} over {} slots", report.policy, report.mean_regret(), trace.len());
    ctx.manifest("replay", &[&path])
}

fn cmd_compare(ctx: &Ctx, a: CompareArgs) -> anyhow::Result<()> {
    let ra = load_report(&a.a)?;
    let rb = load_report(&a.b)?;
    let cmp = compare(&ra, &rb)?;
    write_comparison(&ctx.out, &cmp)?;
    for s in &cmp.summary {
        println!(
            "load [{:.1}, {:.1}) {:>10}: median {:.4} p95 {:.4} (n = {})",
            s.load_lo, s.load_hi, s.policy, s.median, s.p95, s.count
        );
    }
    ctx.manifest("compare", &[&ctx.out])
}

fn cmd_gen(ctx: &Ctx, g: GenCommand) -> anyhow::Result<()> {
    let seed = ctx.seed();
    match g {
        GenCommand::Network { aps, band, density } => {
            let net = random_network(aps, band, density, seed)?;
            let path = ctx.table("network.toml")?;
            save_network(&net, &path)?;
            ctx.manifest("gen network", &[&path])
        }
        GenCommand::EvalSet { size } => {
            let generator: InstanceGenerator = ctx.cfg.train.generator;
            let set = generator.eval_set(seed, size)?;
            save_eval_set(&ctx.out, &set)?;
            ctx.manifest("gen eval-set", &[&ctx.out])
        }
        GenCommand::Trace {
            network,
            slots,
            kind,
            group,
            high,
            other_high,
            low,
        } => {
            let net = load_network(network)?;
            let cadence = ctx.cfg.trace.as_ref().map_or(10, |t| t.cadence_minutes);
            let trace = match kind {
                TraceKind::Diurnal => diurnal_trace(&net, slots, cadence, &DiurnalParams::default(), seed)?,
                TraceKind::TwoPhase => {
                    two_phase_trace(&net, &group, high, other_high.unwrap_or(high), low, slots, cadence)?
                }
            };
            let path = ctx.table("trace.csv")?;
            save_trace(&path, &trace)?;
            ctx.manifest("gen trace", &[&path])
        }
        GenCommand::Telemetry {
            network,
            threshold,
            sigma_busy,
            samples,
        } => {
            let net = load_network(network)?;
            let truth = NeighborhoodModel {
                threshold_dbm: threshold,
                ..ctx.cfg.environment
            };
            let cfg = random_policy(&net, seed);
            let records = synth_telemetry(&net, &cfg, &truth, sigma_busy, samples, seed)?;
            let path = ctx.table("telemetry.csv")?;
            save_telemetry(&records, &path)?;
            ctx.manifest("gen telemetry", &[&path])
        }
    }
}
