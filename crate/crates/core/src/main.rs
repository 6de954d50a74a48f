use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use streetperc::experiments::{
    extract_double_critical, hop_bound, phase_diagram, sweep, SweepParam, SweepSpec,
};
use streetperc::geometry::{street_statistics, StreetStatistics};
use streetperc::io::{
    write_aggregate_csv, write_file, write_fits, write_json, write_phase_csv, write_sweep_csv,
    Manifest, PhaseSpec, RealizationDump, RunConfig,
};
use streetperc::percolation::{map_replications, realize, realize_streets};
use streetperc::placement::InterferenceScope;

/// Monte Carlo percolation of device-to-device networks on random streets.
#[derive(Parser)]
#[command(name = "streetperc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check street-system statistics against their closed forms.
    Validate(Common),
    /// Estimate the connection probability along one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        spec: SweepArgs,
    },
    /// Critical user densities for several interference factors.
    PhaseDiagram {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        spec: PhaseArgs,
    },
    /// Write one realization as JSON.
    Dump {
        #[command(flatten)]
        common: Common,
        /// Replication index to draw.
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Side of the inner window in metres.
    #[arg(long)]
    window_side: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every simulated realization as JSON.
    #[arg(long)]
    dump_realizations: bool,
    /// Set a model parameter, e.g. `--set theta=0.002` or `--set U=3.6`.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    /// Interferers of a hop: `street` or `common-streets`.
    #[arg(long)]
    interference: Option<InterferenceScope>,
}

#[derive(Args)]
struct SweepArgs {
    /// lambda, U, theta, tau, p, kappa, noise or beta.
    #[arg(long)]
    param: Option<SweepParam>,
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct PhaseArgs {
    /// Comma-separated interference factors.
    #[arg(long, value_delimiter = ',')]
    thetas: Option<Vec<f64>>,
    #[arg(long)]
    u_from: Option<f64>,
    #[arg(long)]
    u_to: Option<f64>,
    #[arg(long)]
    u_steps: Option<usize>,
    /// Re-simulate at the midpoint of each window.
    #[arg(long)]
    check_midpoint: bool,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate(common) => {
            let config = resolve(&common)?;
            cmd_validate(&config)
        }
        Command::Sweep { common, spec } => {
            let mut config = resolve(&common)?;
            apply_sweep_args(&mut config, &spec)?;
            config.validate().map_err(usage)?;
            cmd_sweep(&config)
        }
        Command::PhaseDiagram { common, spec } => {
            let mut config = resolve(&common)?;
            apply_phase_args(&mut config, &spec);
            config.validate().map_err(usage)?;
            cmd_phase_diagram(&config)
        }
        Command::Dump {
            common,
            replication,
        } => {
            let config = resolve(&common)?;
            cmd_dump(&config, replication)
        }
    }
}

/// Config file first, then flags.
fn resolve(common: &Common) -> Result<RunConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(reps) = common.reps {
        config.replications = reps;
    }
    if let Some(side) = common.window_side {
        config.window_side = side;
    }
    if let Some(out) = &common.out {
        config.out = out.clone();
    }
    if common.dump_realizations {
        config.dump_realizations = true;
    }
    if let Some(scope) = common.interference {
        config.params.interference = scope;
    }
    for item in &common.set {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("expected NAME=VALUE, got `{item}`")))?;
        let param: SweepParam = name.trim().parse().map_err(usage)?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| usage(format!("{name}: {e}")))?;
        match param {
            SweepParam::UsersPerStreet => config.users_per_street = Some(value),
            SweepParam::UserIntensity => {
                config.users_per_street = None;
                config.params.user_intensity = value;
            }
            other => config.params = other.apply(&config.params, value),
        }
    }
    config.validate().map_err(usage)?;
    Ok(config)
}

fn apply_sweep_args(config: &mut RunConfig, args: &SweepArgs) -> Result<(), Failure> {
    let base = config.sweep;
    let pick = |flag: Option<f64>, from_config: Option<f64>, name: &str| {
        flag.or(from_config)
            .ok_or_else(|| usage(format!("sweep needs --{name} or a [sweep] section")))
    };
    let spec = SweepSpec {
        param: args
            .param
            .or(base.map(|s| s.param))
            .ok_or_else(|| usage("sweep needs --param or a [sweep] section"))?,
        from: pick(args.from, base.map(|s| s.from), "from")?,
        to: pick(args.to, base.map(|s| s.to), "to")?,
        steps: args
            .steps
            .or(base.map(|s| s.steps))
            .ok_or_else(|| usage("sweep needs --steps or a [sweep] section"))?,
    };
    config.sweep = Some(spec);
    Ok(())
}

fn apply_phase_args(config: &mut RunConfig, args: &PhaseArgs) {
    let mut spec = config.phase.clone().unwrap_or_default();
    if let Some(t) = &args.thetas {
        spec.thetas = t.clone();
    }
    if let Some(v) = args.u_from {
        spec.u_from = v;
    }
    if let Some(v) = args.u_to {
        spec.u_to = v;
    }
    if let Some(v) = args.u_steps {
        spec.u_steps = v;
    }
    spec.check_midpoint |= args.check_midpoint;
    config.phase = Some(spec);
}

const STAT_TOLERANCE: f64 = 0.02;

fn cmd_validate(config: &RunConfig) -> Result<(), Failure> {
    let params = config.resolved_params();
    let window = config.window().map_err(usage)?;
    let stats = map_replications(config.replications, |rep| {
        realize_streets(params.street_intensity, &window, config.seed, rep as u64)
            .map(|s| street_statistics(&s, &window))
    })
    .map_err(runtime)?;
    let pooled = stats
        .iter()
        .fold(StreetStatistics::default(), |acc, s| acc.merge(s));
    let ls = params.street_intensity;
    let checks = [
        (
            "mean street length (m)",
            pooled.mean_street_length(),
            2.0 / (3.0 * ls.sqrt()),
        ),
        (
            "vertex intensity (m^-2)",
            pooled.vertex_intensity(),
            2.0 * ls,
        ),
        (
            "line intensity (m^-1)",
            pooled.line_intensity(),
            2.0 * ls.sqrt(),
        ),
    ];
    println!(
        "{} realizations, window side {} m, street intensity {:e} m^-2",
        config.replications, config.window_side, ls
    );
    let mut failed = 0;
    for (name, measured, expected) in checks {
        let rel = measured / expected - 1.0;
        let ok = rel.abs() <= STAT_TOLERANCE;
        failed += usize::from(!ok);
        println!(
            "{name:<24} {measured:>12.6e}  expected {expected:>12.6e}  {:+.2}%  {}",
            rel * 100.0,
            if ok { "pass" } else { "FAIL" }
        );
    }
    if failed > 0 {
        return Err(usage(format!(
            "{failed} statistic(s) outside {}%",
            STAT_TOLERANCE * 100.0
        )));
    }
    Ok(())
}

fn dump_replications(
    config: &RunConfig,
    params: &streetperc::NetworkParams,
    dir: &Path,
    prefix: &str,
    outputs: &mut Vec<String>,
) -> Result<(), Failure> {
    let window = config.window().map_err(usage)?;
    for rep in 0..config.replications as u64 {
        let r = realize(params, &window, config.seed, rep).map_err(runtime)?;
        let name = format!("realizations/{prefix}rep-{rep:05}.json");
        write_file(&dir.join(&name), |w| {
            write_json(w, &RealizationDump::new(&r, params, &window))
        })
        .map_err(runtime)?;
        outputs.push(name);
    }
    Ok(())
}

fn cmd_sweep(config: &RunConfig) -> Result<(), Failure> {
    let spec = config.sweep.expect("sweep spec resolved");
    let params = config.resolved_params();
    let window = config.window().map_err(usage)?;
    let grid = spec.grid().map_err(usage)?;
    let curve = sweep(
        &params,
        spec.param,
        &grid,
        &window,
        config.replications,
        config.seed,
    )
    .map_err(usage)?;
    let mut manifest = Manifest::new("sweep", config).map_err(usage)?;
    let dir = &config.out;

    println!(
        "{:>24} {:>10} {:>21}",
        spec.param.name(),
        "prob",
        "95% interval"
    );
    for p in &curve.points {
        match &p.estimate {
            Ok(e) => println!(
                "{:>24} {:>10.4} [{:.4}, {:.4}]",
                p.value, e.probability, e.ci_low, e.ci_high
            ),
            Err(msg) => {
                println!("{:>24} error: {msg}", p.value);
                manifest
                    .notes
                    .push(format!("{} = {}: {msg}", spec.param, p.value));
            }
        }
    }

    let mut fits = Vec::new();
    match extract_double_critical(&curve.samples(), config.replications) {
        None => manifest.notes.push("probability never exceeds 0.5".into()),
        Some(dc) => {
            for (label, fit) in [("rising", dc.rising), ("falling", dc.falling)] {
                match fit {
                    Ok(f) => {
                        println!("{label} critical value {} = {:.6}", spec.param, f.mu_star);
                        fits.push(f);
                    }
                    Err(e) => manifest.notes.push(format!("{label} fit: {e}")),
                }
            }
        }
    }
    for note in &manifest.notes {
        println!("note: {note}");
    }

    write_file(&dir.join("sweep.csv"), |w| write_sweep_csv(w, &curve)).map_err(runtime)?;
    write_file(&dir.join("aggregate.csv"), |w| {
        write_aggregate_csv(w, &curve, config.seed)
    })
    .map_err(runtime)?;
    write_file(&dir.join("fit.json"), |w| write_fits(w, &fits)).map_err(runtime)?;
    manifest.outputs = vec![
        "sweep.csv".into(),
        "aggregate.csv".into(),
        "fit.json".into(),
    ];
    if config.dump_realizations {
        for (i, &value) in grid.iter().enumerate() {
            let p = spec.param.apply(&params, value);
            if p.validate().is_ok() {
                dump_replications(
                    config,
                    &p,
                    dir,
                    &format!("point-{i:03}-"),
                    &mut manifest.outputs,
                )?;
            }
        }
    }
    write_file(&dir.join("manifest.json"), |w| write_json(w, &manifest)).map_err(runtime)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_phase_diagram(config: &RunConfig) -> Result<(), Failure> {
    let spec: PhaseSpec = config.phase.clone().expect("phase spec resolved");
    if spec.thetas.is_empty() {
        return Err(usage(
            "phase diagram needs a nonempty theta grid (--thetas)",
        ));
    }
    let params = config.resolved_params();
    for &theta in &spec.thetas {
        streetperc::NetworkParams { theta, ..params }
            .validate()
            .map_err(|e| usage(format!("theta = {theta}: {e}")))?;
    }
    let window = config.window().map_err(usage)?;
    let u_grid = spec.u_grid().map_err(usage)?;
    let diagram = phase_diagram(
        &spec.thetas,
        &params,
        &u_grid,
        &window,
        config.replications,
        config.seed,
        spec.check_midpoint,
    )
    .map_err(usage)?;
    let mut manifest = Manifest::new("phase-diagram", config).map_err(usage)?;
    let hops = manifest.derived.hops_per_street;
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    println!("{:>10} {:>10} {:>10}  status", "theta", "U1*", "U2*");
    for row in &diagram.rows {
        println!(
            "{:>10} {:>10} {:>10}  {}",
            row.theta,
            fmt(row.u1_star),
            fmt(row.u2_star),
            row.status
        );
        if let Some(u2) = row.u2_star {
            let bound = hop_bound(hops, row.theta, params.threshold);
            if u2 >= bound {
                manifest.notes.push(format!(
                    "theta = {}: U2* {u2} exceeds hop bound {bound}",
                    row.theta
                ));
            }
        }
        if let Some(p) = row.midpoint_probability {
            if p <= 0.5 {
                manifest.notes.push(format!(
                    "theta = {}: midpoint probability {p} <= 0.5",
                    row.theta
                ));
            }
        }
    }
    for note in &manifest.notes {
        println!("note: {note}");
    }
    let dir = &config.out;
    write_file(&dir.join("phase.csv"), |w| write_phase_csv(w, &diagram)).map_err(runtime)?;
    manifest.outputs = vec!["phase.csv".into()];
    write_file(&dir.join("manifest.json"), |w| write_json(w, &manifest)).map_err(runtime)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_dump(config: &RunConfig, replication: u64) -> Result<(), Failure> {
    let params = config.resolved_params();
    let window = config.window().map_err(usage)?;
    let r = realize(&params, &window, config.seed, replication).map_err(runtime)?;
    let name = format!("realization-{replication}.json");
    let dir = &config.out;
    write_file(&dir.join(&name), |w| {
        write_json(w, &RealizationDump::new(&r, &params, &window))
    })
    .map_err(runtime)?;
    let mut manifest = Manifest::new("dump", config).map_err(usage)?;
    manifest.outputs.push(name);
    if config.dump_realizations {
        dump_replications(config, &params, dir, "", &mut manifest.outputs)?;
    }
    write_file(&dir.join("manifest.json"), |w| write_json(w, &manifest)).map_err(runtime)?;
    println!(
        "{} streets, {} open, percolates: {}",
        r.system.streets().len(),
        r.outcome.verdicts.iter().filter(|v| v.is_open()).count(),
        r.outcome.percolates()
    );
    println!(
        "wrote {}",
        dir.join(format!("realization-{replication}.json"))
            .display()
    );
    Ok(())
}
