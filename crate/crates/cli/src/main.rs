use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use flickersim::conformance::{validate, ConformanceOptions};
use flickersim::sweep::{
    run_point_traced, run_sweep, summarize, write_charts, write_results_csv, SweepOptions, SweepPlan,
};
use flickersim::{CarrierSpec, ChainConfig, Error, ModulatingSpec, Shape};

/// Voltage-fluctuation synthesis and software flickermeter.
#[derive(Parser, Debug)]
#[command(name = "flickersim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure Pst for a single modulated carrier.
    Measure(MeasureArgs),
    /// Run a sweep plan and write CSV, summary and SVG charts.
    Sweep(SweepArgs),
    /// Run the built-in conformance checks.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct Timing {
    /// Restore the two 10-minute intervals (first one discarded).
    #[arg(long = "paper-protocol")]
    two_interval: bool,
    /// Shorten the Pst window (and measured span) to this many seconds.
    #[arg(long, conflicts_with = "two_interval")]
    window: Option<f64>,
    /// Seconds discarded before the Pst window.
    #[arg(long)]
    settle: Option<f64>,
}

impl Timing {
    fn apply(&self, mut plan: SweepPlan) -> SweepPlan {
        if self.two_interval {
            plan = plan.with_two_interval_protocol();
        }
        if let Some(w) = self.window {
            plan = plan.with_short_window(w);
        }
        if let Some(s) = self.settle {
            plan.durations.settle = s;
        }
        plan
    }
}

#[derive(Args, Debug)]
struct MeasureArgs {
    /// Carrier clipping level m_c in (0, 1].
    #[arg(long = "mc", default_value_t = 1.0)]
    m_c: f64,
    #[arg(long, default_value = "sin")]
    shape: Shape,
    /// Modulating frequency in Hz.
    #[arg(long = "fm")]
    f_m: f64,
    /// Modulation depth ΔU/U in percent.
    #[arg(long)]
    depth: f64,
    /// Synthesis sample rate in Hz.
    #[arg(long = "fs", default_value_t = 80_000.0)]
    fs: f64,
    #[command(flatten)]
    timing: Timing,
    /// Write the P_inst trace to OUT/p_inst.csv.
    #[arg(long)]
    dump_pinst: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Plan file (TOML).
    plan: PathBuf,
    /// Output directory; defaults to results/<plan name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the plan's synthesis sample rate.
    #[arg(long = "fs")]
    fs: Option<f64>,
    #[command(flatten)]
    timing: Timing,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Skip the compliance rows (the slow part).
    #[arg(long)]
    quick: bool,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    json: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn chain_with_rate(fs: f64) -> ChainConfig {
    ChainConfig {
        synthesis_rate: fs,
        ..ChainConfig::default()
    }
}

fn measure(args: &MeasureArgs) -> Result<(), Failure> {
    let carrier = CarrierSpec::lv(args.m_c)?;
    let modulating = ModulatingSpec::new(args.shape, args.f_m, args.depth)?;
    let mut plan = args.timing.apply(SweepPlan::stage1(vec![carrier], vec![args.shape]));
    plan.name = "measure".into();
    plan.fm_grid = vec![args.f_m];
    plan.depth_grid = vec![args.depth];
    plan.chain = chain_with_rate(args.fs);
    plan.validate()?;

    let (record, meter) = run_point_traced(&carrier, &modulating, &plan)?;
    let c = &plan.chain;
    println!("pst {:.6}", record.pst);
    println!("below_floor {}", record.below_floor);
    println!(
        "chain synthesis {} Hz, FIR order {} cutoff {} Hz, decimation {} -> meter {} Hz",
        c.synthesis_rate,
        c.fir_order,
        c.cutoff,
        c.decimation,
        c.output_rate()
    );
    println!(
        "timing settle {} s, window {} s",
        plan.durations.settle, plan.meter.window
    );
    if args.dump_pinst {
        fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
        let path = args.out.join("p_inst.csv");
        meter.dump_p_inst(&path)?;
        println!("p_inst written to {}", path.display());
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let mut plan = args.timing.apply(SweepPlan::load(&args.plan)?);
    if let Some(fs) = args.fs {
        plan.chain.synthesis_rate = fs;
    }
    plan.validate()?;
    let workers = match args.workers {
        Some(0) => return Err(Failure::Usage("workers: must be >= 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| Path::new("results").join(&plan.name));
    fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;

    let cancel = Arc::new(AtomicBool::new(false));
    {
        let cancel = cancel.clone();
        // a second handler registration (tests calling twice) is harmless
        let _ = ctrlc::set_handler(move || {
            eprintln!("interrupt: finishing running points, partial results are kept");
            cancel.store(true, Ordering::SeqCst);
        });
    }

    eprintln!(
        "plan {} (stage {}): {} points on {} worker(s)",
        plan.name,
        plan.stage,
        plan.grid_len(),
        workers
    );
    let options = SweepOptions {
        workers,
        checkpoint: Some(out.join("checkpoint.csv")),
        cancel: Some(cancel),
    };
    let result = run_sweep(&plan, &options)?;

    write_results_csv(&result, out.join("results.csv"))?;
    let meta_path = out.join("run_meta.json");
    let meta = serde_json::json!({
        "plan": plan,
        "fingerprint": result.fingerprint,
        "metadata": result.metadata,
        "failures": result.failures,
        "cancelled_points": result.cancelled,
    });
    fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("json") + "\n")
        .map_err(|e| io_failure(&meta_path, e))?;

    let summary = summarize(&result);
    let text_path = out.join("summary.txt");
    fs::write(&text_path, summary.render_text()).map_err(|e| io_failure(&text_path, e))?;
    let json_path = out.join("summary.json");
    fs::write(&json_path, serde_json::to_string_pretty(&summary).expect("json") + "\n")
        .map_err(|e| io_failure(&json_path, e))?;
    let charts = write_charts(&summary, &out)?;

    eprintln!(
        "{} records ({} resumed), {} failed, {} charts in {}",
        result.records.len(),
        result.metadata.resumed_points,
        result.failures.len(),
        charts.len(),
        out.display()
    );
    for f in &result.failures {
        eprintln!(
            "failed: m_c={} {} f_m={} depth={}: {}",
            f.m_c, f.shape, f.f_m, f.depth, f.error
        );
    }
    if result.cancelled > 0 {
        return Err(Failure::Runtime(format!(
            "interrupted with {} points left; rerun the same command to resume",
            result.cancelled
        )));
    }
    if !result.failures.is_empty() {
        return Err(Failure::Runtime(format!("{} points failed", result.failures.len())));
    }
    Ok(())
}

fn run_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let report = validate(&ConformanceOptions {
        compliance: !args.quick,
        ..ConformanceOptions::default()
    })?;
    println!("{report}");
    if let Some(path) = &args.json {
        fs::write(path, serde_json::to_string_pretty(&report).expect("json") + "\n")
            .map_err(|e| io_failure(path, e))?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Runtime("conformance checks failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Measure(a) => measure(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => run_validate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
