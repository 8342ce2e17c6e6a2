//! Command-line front end: exact chain solving, closed-form comparison,
//! simulation, and grid sweeps over the slotted queue.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use slotq::chain::{self, Capacity, QueueSpec};
use slotq::closedform;
use slotq::render::sig12;
use slotq::sim::{self, SimConfig};
use slotq::sweep::{self, SweepConfig};

#[derive(Parser)]
#[command(
    name = "slotq",
    version,
    about = "Exact analysis and seeded simulation of slotted-time finite-capacity queues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the exact occupancy chain and print its stationary distribution
    Chain(ChainArgs),
    /// Evaluate the M/M/1/c closed form against the corrected slotted value
    ClosedForm(ClosedFormArgs),
    /// Run the slot-by-slot energy-queue simulation
    Simulate(SimulateArgs),
    /// Run the energy-gated source-node simulation
    Gated(GatedArgs),
    /// Evaluate a (delta, capacity) grid and emit a table
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Human,
}

#[derive(Args)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Write to this file (atomically) instead of standard output
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ChainArgs {
    /// Arrival probability per slot, in [0, 1]
    #[arg(long)]
    delta: f64,
    /// Buffer capacity in packets (a positive integer; `inf` is rejected
    /// here because the exact chain needs a finite state space)
    #[arg(long)]
    capacity: Capacity,
    /// Service probability per slot, in [0, 1]
    #[arg(long = "mu-e", default_value_t = 1.0)]
    mu_e: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ClosedFormArgs {
    /// Arrival probability per slot, in [0, 1]
    #[arg(long)]
    delta: f64,
    /// Buffer capacity in packets, or `inf`
    #[arg(long)]
    capacity: Capacity,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Arrival probability per slot, in [0, 1]
    #[arg(long)]
    delta: f64,
    /// Buffer capacity in packets, or `inf`
    #[arg(long)]
    capacity: Capacity,
    /// Service probability per slot, in [0, 1]
    #[arg(long = "mu-e", default_value_t = 1.0)]
    mu_e: f64,
    /// Number of slots to simulate
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    /// Seed for the deterministic generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Leading slots excluded from statistics (default: 1% of slots, at
    /// least 1000, clamped below the slot count)
    #[arg(long)]
    warmup: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GatedArgs {
    /// Data arrival probability per slot, in [0, 1]
    #[arg(long = "lambda-p")]
    lambda_p: f64,
    /// Per-attempt delivery success probability, in [0, 1]
    #[arg(long = "success-prob", default_value_t = 1.0)]
    success_prob: f64,
    /// Energy arrival probability per slot, in [0, 1]
    #[arg(long)]
    delta: f64,
    /// Energy buffer capacity in packets, or `inf`
    #[arg(long)]
    capacity: Capacity,
    /// Energy service probability per slot, in [0, 1]
    #[arg(long = "mu-e", default_value_t = 1.0)]
    mu_e: f64,
    /// Number of slots to simulate
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    /// Seed for the deterministic generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Leading slots excluded from statistics
    #[arg(long)]
    warmup: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// deltas 0.1..0.9, 0.95, 0.99 against capacities 1, 2, 5, 10, 50
    ReproduceComment,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated arrival probabilities
    #[arg(long)]
    deltas: Option<String>,
    /// Comma-separated capacities (positive integers and/or `inf`)
    #[arg(long)]
    capacities: Option<String>,
    /// Service probability per slot, in [0, 1]
    #[arg(long = "mu-e", default_value_t = 1.0)]
    mu_e: f64,
    /// Also run a simulation per grid point
    #[arg(long)]
    simulate: bool,
    /// Slots per simulated grid point
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    /// Base seed; row seeds derive from it and the row index
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bundled grid; explicit --deltas/--capacities override its lists
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Worker threads for row evaluation (output bytes do not depend on it)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    output: OutputArgs,
}

/// Failures mapped to exit codes: usage errors exit 2, everything else 1.
enum Failure {
    Usage(String),
    Run(String),
}

impl Failure {
    fn exit(self) -> ExitCode {
        match self {
            Failure::Usage(message) => {
                eprintln!("error: {message}");
                ExitCode::from(2)
            }
            Failure::Run(message) => {
                eprintln!("error: {message}");
                ExitCode::from(1)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not errors.
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Chain(args) => run_chain(args),
        Command::ClosedForm(args) => run_closed_form(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Gated(args) => run_gated(args),
        Command::Sweep(args) => run_sweep_command(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => failure.exit(),
    }
}

// ---------------------------------------------------------------------------
// Flag validation
// ---------------------------------------------------------------------------

fn check_probability_flag(flag: &str, value: f64) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Failure::Usage(format!(
            "{flag} must be within [0, 1] (got {value})"
        )));
    }
    Ok(())
}

fn check_slots(slots: u64, warmup: Option<u64>) -> Result<(), Failure> {
    if slots == 0 {
        return Err(Failure::Usage("--slots must be at least 1".to_string()));
    }
    if let Some(warmup) = warmup
        && warmup >= slots
    {
        return Err(Failure::Usage(format!(
            "--warmup ({warmup}) must be smaller than --slots ({slots})"
        )));
    }
    Ok(())
}

fn sim_config(
    delta: f64,
    mu_e: f64,
    capacity: Capacity,
    slots: u64,
    seed: u64,
    warmup: Option<u64>,
) -> Result<SimConfig, Failure> {
    check_probability_flag("--delta", delta)?;
    check_probability_flag("--mu-e", mu_e)?;
    check_slots(slots, warmup)?;
    let spec =
        QueueSpec::new(delta, mu_e, capacity).map_err(|err| Failure::Usage(err.to_string()))?;
    let mut config = SimConfig::new(spec, slots, seed);
    if let Some(warmup) = warmup {
        config.warmup_slots = warmup;
    }
    Ok(config)
}

fn parse_list<T, E: std::fmt::Display>(
    flag: &str,
    text: &str,
    parse: impl Fn(&str) -> Result<T, E>,
) -> Result<Vec<T>, Failure> {
    let mut values = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        values.push(parse(item).map_err(|err| {
            Failure::Usage(format!("{flag} contains an invalid value `{item}`: {err}"))
        })?);
    }
    if values.is_empty() {
        return Err(Failure::Usage(format!(
            "{flag} must list at least one value"
        )));
    }
    Ok(values)
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

/// Key-value line of the fixed-layout human format.
fn kv(out: &mut String, key: &str, value: impl AsRef<str>) {
    out.push_str(&format!("{:<22}{}\n", key, value.as_ref()));
}

fn capacity_json(capacity: Capacity) -> String {
    match capacity {
        Capacity::Finite(c) => c.to_string(),
        Capacity::Unbounded => "\"inf\"".to_string(),
    }
}

/// Writes the rendered output to stdout, or atomically to `--output`: the
/// bytes land in a temporary file first and are renamed into place, so a
/// failed run never leaves a partial file behind.
fn deliver(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        None => {
            let mut stdout = std::io::stdout();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|err| Failure::Run(format!("writing to stdout: {err}")))
        }
        Some(path) => {
            let parent = match path.parent() {
                Some(dir) if !dir.as_os_str().is_empty() => dir,
                _ => Path::new("."),
            };
            let write = || -> std::io::Result<()> {
                let mut file = tempfile::NamedTempFile::new_in(parent)?;
                file.write_all(text.as_bytes())?;
                file.persist(path).map_err(|err| err.error)?;
                Ok(())
            };
            write().map_err(|err| Failure::Run(format!("writing `{}`: {err}", path.display())))
        }
    }
}

// ---------------------------------------------------------------------------
// chain
// ---------------------------------------------------------------------------

fn run_chain(args: ChainArgs) -> Result<(), Failure> {
    check_probability_flag("--delta", args.delta)?;
    check_probability_flag("--mu-e", args.mu_e)?;
    if args.capacity == Capacity::Unbounded {
        return Err(Failure::Usage(
            "--capacity must be finite for the chain subcommand (got inf)".to_string(),
        ));
    }
    let spec = QueueSpec::new(args.delta, args.mu_e, args.capacity)
        .map_err(|err| Failure::Usage(err.to_string()))?;

    let matrix = chain::build_energy_chain(&spec).map_err(|err| Failure::Run(err.to_string()))?;
    let stationary = chain::solve_stationary(&matrix, chain::DEFAULT_TOLERANCE)
        .map_err(|err| Failure::Run(err.to_string()))?;
    let nonempty = chain::nonempty_prob(&stationary);

    let text = match args.output.format {
        Format::Human => {
            let mut out = String::new();
            kv(&mut out, "delta", sig12(spec.delta));
            kv(&mut out, "mu_e", sig12(spec.mu_e));
            kv(&mut out, "capacity", spec.capacity.to_string());
            for (state, &p) in stationary.pi().iter().enumerate() {
                kv(&mut out, &format!("pi[{state}]"), sig12(p));
            }
            kv(&mut out, "nonempty", sig12(nonempty));
            kv(&mut out, "residual", sig12(stationary.residual()));
            out
        }
        Format::Csv => {
            let mut out = String::from("state,pi\n");
            for (state, &p) in stationary.pi().iter().enumerate() {
                out.push_str(&format!("{state},{}\n", sig12(p)));
            }
            out
        }
        Format::Json => {
            let pi: Vec<String> = stationary.pi().iter().map(|&p| sig12(p)).collect();
            format!(
                "{{\"delta\":{},\"mu_e\":{},\"capacity\":{},\"pi\":[{}],\"nonempty\":{},\"residual\":{}}}\n",
                sig12(spec.delta),
                sig12(spec.mu_e),
                spec.capacity,
                pi.join(","),
                sig12(nonempty),
                sig12(stationary.residual()),
            )
        }
    };
    deliver(&text, args.output.output.as_deref())
}

// ---------------------------------------------------------------------------
// closed-form
// ---------------------------------------------------------------------------

fn run_closed_form(args: ClosedFormArgs) -> Result<(), Failure> {
    check_probability_flag("--delta", args.delta)?;

    // For an unbounded buffer the formula's limit equals the corrected
    // value, so both columns read delta and the gap is zero.
    let (mm1c, at_limit) = match args.capacity {
        Capacity::Finite(c) => {
            let eval = closedform::mm1c_nonempty_eval(args.delta, c);
            (eval.value, eval.at_limit)
        }
        Capacity::Unbounded => (args.delta, true),
    };
    let corrected = closedform::md1c_nonempty(args.delta);
    let abs_error = (mm1c - corrected).abs();

    let text = match args.output.format {
        Format::Human => {
            let mut out = String::new();
            kv(&mut out, "delta", sig12(args.delta));
            kv(&mut out, "capacity", args.capacity.to_string());
            kv(&mut out, "mm1c_nonempty", sig12(mm1c));
            kv(&mut out, "corrected_nonempty", sig12(corrected));
            kv(&mut out, "abs_error", sig12(abs_error));
            kv(&mut out, "mm1c_at_limit", at_limit.to_string());
            out
        }
        Format::Csv => format!(
            "delta,capacity,mm1c_nonempty,corrected_nonempty,abs_error,mm1c_at_limit\n{},{},{},{},{},{}\n",
            sig12(args.delta),
            args.capacity,
            sig12(mm1c),
            sig12(corrected),
            sig12(abs_error),
            at_limit,
        ),
        Format::Json => format!(
            "{{\"delta\":{},\"capacity\":{},\"mm1c_nonempty\":{},\"corrected_nonempty\":{},\"abs_error\":{},\"mm1c_at_limit\":{}}}\n",
            sig12(args.delta),
            capacity_json(args.capacity),
            sig12(mm1c),
            sig12(corrected),
            sig12(abs_error),
            at_limit,
        ),
    };
    deliver(&text, args.output.output.as_deref())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let config = sim_config(
        args.delta,
        args.mu_e,
        args.capacity,
        args.slots,
        args.seed,
        args.warmup,
    )?;
    let result =
        sim::simulate_energy_queue(&config).map_err(|err| Failure::Run(err.to_string()))?;
    let stderr_text = result.nonempty_stderr().map(sig12).unwrap_or_default();

    let text = match args.output.format {
        Format::Human => {
            let mut out = String::new();
            kv(&mut out, "delta", sig12(config.spec.delta));
            kv(&mut out, "mu_e", sig12(config.spec.mu_e));
            kv(&mut out, "capacity", config.spec.capacity.to_string());
            kv(&mut out, "slots", args.slots.to_string());
            kv(&mut out, "warmup_slots", config.warmup_slots.to_string());
            kv(&mut out, "seed", result.seed.to_string());
            kv(&mut out, "rng", result.rng);
            kv(&mut out, "measured_slots", result.measured_slots.to_string());
            kv(
                &mut out,
                "nonempty_fraction",
                sig12(result.nonempty_fraction),
            );
            kv(&mut out, "nonempty_stderr", &stderr_text);
            kv(
                &mut out,
                "max_occupancy_seen",
                result.max_occupancy_seen.to_string(),
            );
            out.push_str("histogram:\n");
            for (&occupancy, &count) in &result.histogram {
                out.push_str(&format!(
                    "  {:<8}{:<12}{}\n",
                    occupancy,
                    count,
                    sig12(count as f64 / result.measured_slots as f64)
                ));
            }
            out
        }
        Format::Csv => format!(
            "delta,mu_e,capacity,slots,warmup_slots,seed,measured_slots,nonempty_fraction,nonempty_stderr,max_occupancy_seen\n{},{},{},{},{},{},{},{},{},{}\n",
            sig12(config.spec.delta),
            sig12(config.spec.mu_e),
            config.spec.capacity,
            args.slots,
            config.warmup_slots,
            result.seed,
            result.measured_slots,
            sig12(result.nonempty_fraction),
            stderr_text,
            result.max_occupancy_seen,
        ),
        Format::Json => {
            let histogram: Vec<String> = result
                .histogram
                .iter()
                .map(|(occupancy, count)| format!("[{occupancy},{count}]"))
                .collect();
            let stderr_json = result
                .nonempty_stderr()
                .map(sig12)
                .unwrap_or_else(|| "null".to_string());
            format!(
                "{{\"delta\":{},\"mu_e\":{},\"capacity\":{},\"slots\":{},\"warmup_slots\":{},\"seed\":{},\"rng\":\"{}\",\"measured_slots\":{},\"nonempty_fraction\":{},\"nonempty_stderr\":{},\"max_occupancy_seen\":{},\"histogram\":[{}]}}\n",
                sig12(config.spec.delta),
                sig12(config.spec.mu_e),
                capacity_json(config.spec.capacity),
                args.slots,
                config.warmup_slots,
                result.seed,
                result.rng,
                result.measured_slots,
                sig12(result.nonempty_fraction),
                stderr_json,
                result.max_occupancy_seen,
                histogram.join(","),
            )
        }
    };
    deliver(&text, args.output.output.as_deref())
}

// ---------------------------------------------------------------------------
// gated
// ---------------------------------------------------------------------------

fn run_gated(args: GatedArgs) -> Result<(), Failure> {
    check_probability_flag("--lambda-p", args.lambda_p)?;
    check_probability_flag("--success-prob", args.success_prob)?;
    let config = sim_config(
        args.delta,
        args.mu_e,
        args.capacity,
        args.slots,
        args.seed,
        args.warmup,
    )?;
    let result = sim::simulate_gated_source(args.lambda_p, args.success_prob, &config)
        .map_err(|err| Failure::Run(err.to_string()))?;

    let text = match args.output.format {
        Format::Human => {
            let mut out = String::new();
            kv(&mut out, "lambda_p", sig12(result.arrival_rate));
            kv(&mut out, "success_prob", sig12(args.success_prob));
            kv(&mut out, "delta", sig12(config.spec.delta));
            kv(&mut out, "mu_e", sig12(config.spec.mu_e));
            kv(&mut out, "capacity", config.spec.capacity.to_string());
            kv(&mut out, "slots", args.slots.to_string());
            kv(&mut out, "warmup_slots", config.warmup_slots.to_string());
            kv(&mut out, "seed", result.seed.to_string());
            kv(&mut out, "rng", result.rng);
            kv(
                &mut out,
                "delivered_throughput",
                sig12(result.delivered_throughput),
            );
            kv(
                &mut out,
                "mean_queue_length",
                sig12(result.mean_queue_length),
            );
            kv(
                &mut out,
                "queue_growth_slope",
                sig12(result.queue_growth_slope),
            );
            kv(&mut out, "stable_verdict", result.stable_verdict.to_string());
            kv(&mut out, "borderline", result.borderline.to_string());
            kv(
                &mut out,
                "energy_nonempty",
                sig12(result.energy_nonempty_fraction),
            );
            out
        }
        Format::Csv => format!(
            "lambda_p,success_prob,delta,mu_e,capacity,slots,warmup_slots,seed,delivered_throughput,mean_queue_length,queue_growth_slope,stable_verdict,borderline,energy_nonempty\n{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            sig12(result.arrival_rate),
            sig12(args.success_prob),
            sig12(config.spec.delta),
            sig12(config.spec.mu_e),
            config.spec.capacity,
            args.slots,
            config.warmup_slots,
            result.seed,
            sig12(result.delivered_throughput),
            sig12(result.mean_queue_length),
            sig12(result.queue_growth_slope),
            result.stable_verdict,
            result.borderline,
            sig12(result.energy_nonempty_fraction),
        ),
        Format::Json => format!(
            "{{\"lambda_p\":{},\"success_prob\":{},\"delta\":{},\"mu_e\":{},\"capacity\":{},\"slots\":{},\"warmup_slots\":{},\"seed\":{},\"rng\":\"{}\",\"delivered_throughput\":{},\"mean_queue_length\":{},\"queue_growth_slope\":{},\"stable_verdict\":{},\"borderline\":{},\"energy_nonempty\":{}}}\n",
            sig12(result.arrival_rate),
            sig12(args.success_prob),
            sig12(config.spec.delta),
            sig12(config.spec.mu_e),
            capacity_json(config.spec.capacity),
            args.slots,
            config.warmup_slots,
            result.seed,
            result.rng,
            sig12(result.delivered_throughput),
            sig12(result.mean_queue_length),
            sig12(result.queue_growth_slope),
            result.stable_verdict,
            result.borderline,
            sig12(result.energy_nonempty_fraction),
        ),
    };
    deliver(&text, args.output.output.as_deref())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn run_sweep_command(args: SweepArgs) -> Result<(), Failure> {
    check_probability_flag("--mu-e", args.mu_e)?;
    if args.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".to_string()));
    }
    check_slots(args.slots, None)?;

    let mut config = match args.preset {
        Some(Preset::ReproduceComment) => SweepConfig::reproduce_comment(),
        None => SweepConfig::new(Vec::new(), Vec::new()),
    };
    if let Some(ref text) = args.deltas {
        config.deltas = parse_list("--deltas", text, |item| item.parse::<f64>())?;
    }
    if let Some(ref text) = args.capacities {
        config.capacities = parse_list("--capacities", text, |item| item.parse::<Capacity>())?;
    }
    if config.deltas.is_empty() {
        return Err(Failure::Usage(
            "--deltas is required unless --preset supplies a grid".to_string(),
        ));
    }
    if config.capacities.is_empty() {
        return Err(Failure::Usage(
            "--capacities is required unless --preset supplies a grid".to_string(),
        ));
    }
    for &delta in &config.deltas {
        check_probability_flag("--deltas", delta)?;
    }
    config.mu_e = args.mu_e;
    config.simulate = args.simulate;
    config.sim_slots = args.slots;
    config.base_seed = args.seed;
    config
        .validate()
        .map_err(|err| Failure::Usage(err.to_string()))?;

    // Per-row seeds depend only on the base seed and the row index, so a
    // parallel evaluation emits exactly the bytes a serial one does.
    let rows = if args.jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|err| Failure::Run(format!("thread pool: {err}")))?;
        let grid = config.grid();
        pool.install(|| {
            grid.par_iter()
                .enumerate()
                .map(|(index, &(delta, capacity))| {
                    sweep::compute_row(&config, index, delta, capacity)
                })
                .collect::<Vec<_>>()
        })
    } else {
        sweep::run_sweep(&config).map_err(|err| Failure::Run(err.to_string()))?
    };

    let text = match args.output.format {
        Format::Csv => {
            let mut bytes = Vec::new();
            sweep::emit_csv(&rows, &mut bytes).map_err(|err| Failure::Run(err.to_string()))?;
            String::from_utf8(bytes).expect("CSV emission is UTF-8")
        }
        Format::Json => {
            let mut bytes = Vec::new();
            sweep::emit_json(&rows, &mut bytes).map_err(|err| Failure::Run(err.to_string()))?;
            String::from_utf8(bytes).expect("JSON emission is UTF-8")
        }
        Format::Human => {
            let mut out = String::new();
            for column in sweep::CSV_HEADER.split(',') {
                out.push_str(&format!("{column:<20}"));
            }
            out.push('\n');
            let cell = |value: Option<f64>| match value {
                Some(v) => sig12(v),
                None => "-".to_string(),
            };
            for row in &rows {
                out.push_str(&format!(
                    "{:<20}{:<20}{:<20}{:<20}{:<20}{:<20}{:<20}{:<20}\n",
                    sig12(row.delta),
                    row.capacity.to_string(),
                    cell(row.exact_nonempty),
                    sig12(row.mm1c_nonempty),
                    sig12(row.corrected_nonempty),
                    cell(row.mc_nonempty),
                    cell(row.mc_stderr),
                    cell(row.err_mm1c_vs_exact),
                ));
            }
            out
        }
    };
    deliver(&text, args.output.output.as_deref())
}
