//! Batch experiment driver.
//!
//! Subcommands: analyze, find-struct, recover-key, recover-key-g, sweep,
//! bench. Reports go to --out (default stdout) as JSON, sweeps optionally as
//! CSV. Exit codes: 0 success, 1 attack ambiguity, 2 configuration error,
//! 3 enumeration cap exceeded.
//!
//! Experiment outputs are byte-deterministic in (config, master seed);
//! wall-clock timing goes to stderr only. `bench` output is timing and is
//! exempt from the determinism guarantee.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bvrk::boolfn::{self, Frac};
use bvrk::cipher::{CipherSpec, ToyEvenMansour};
use bvrk::gf2::{self, BitVec};
use bvrk::harness::{self, ExperimentConfig, SweepConfig};
use bvrk::qoracle::{bv_exact_distribution, random_boolean_function, RngStream};
use bvrk::Error;

const EXIT_OK: i32 = 0;
const EXIT_AMBIGUOUS: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_CAP: i32 = 3;

#[derive(Parser)]
#[command(
    name = "bvrk",
    version,
    about = "Related-key attack laboratory: BV sampling, structure search, key recovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral and structural analysis of a truth table or a derived cipher
    /// function
    Analyze(AnalyzeArgs),
    /// Batched tagged structure search on the periodic derived function
    FindStruct(BatchArgs),
    /// Batched key recovery through the periodic derived function
    RecoverKey(BatchArgs),
    /// Batched key recovery through the shifted derived function (k = n)
    RecoverKeyG(BatchArgs),
    /// Grid sweep over sample budgets and cipher variants
    Sweep(SweepArgs),
    /// Rough timings of the core primitives on this machine
    Bench(BenchArgs),
}

#[derive(Args)]
struct BatchArgs {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (0 = auto)
    #[arg(long)]
    threads: Option<usize>,
    /// Output path, '-' for stdout
    #[arg(long, default_value = "-")]
    out: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Truth-table file ({"k", "n", "table_hex"})
    #[arg(long, conflicts_with_all = ["config", "key", "plaintext"])]
    table: Option<PathBuf>,
    /// Cipher spec file (JSON); analyzed through its derived function
    #[arg(long, requires = "key")]
    config: Option<PathBuf>,
    /// Hidden key for the derived function (decimal or 0x-hex)
    #[arg(long)]
    key: Option<String>,
    /// Plaintext for the derived function (decimal or 0x-hex, default 0)
    #[arg(long)]
    plaintext: Option<String>,
    /// Closeness threshold sigma as "num/den" (or "l" meaning 1/l); repeatable
    #[arg(long)]
    sigma: Vec<String>,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "-")]
    out: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() {
    let cli = Cli::parse();
    let started = Instant::now();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    eprintln!("elapsed: {:.3}s", started.elapsed().as_secs_f64());
    std::process::exit(code);
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::AttackCap { .. } | Error::EnumerationCap { .. } => EXIT_CAP,
        _ => EXIT_CONFIG,
    }
}

fn dispatch(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::FindStruct(args) => cmd_find_struct(args),
        Command::RecoverKey(args) => cmd_recover(args, false),
        Command::RecoverKeyG(args) => cmd_recover(args, true),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn load_experiment_config(args: &BatchArgs) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(&args.config)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(threads) = args.threads {
        cfg.threads = threads;
    }
    Ok(cfg)
}

fn write_output(out: &str, content: &str) -> Result<(), Error> {
    if out == "-" {
        let mut stdout = std::io::stdout();
        stdout.write_all(content.as_bytes())?;
        stdout.flush()?;
    } else {
        fs::write(out, content)?;
    }
    Ok(())
}

fn cmd_recover(args: BatchArgs, g_variant: bool) -> Result<i32, Error> {
    if args.format == Format::Csv {
        return Err(Error::InvalidConfig(
            "recovery batches are JSON only; use sweep for CSV output".into(),
        ));
    }
    let cfg = load_experiment_config(&args)?;
    let report = if g_variant {
        harness::run_recover_key_g(&cfg)?
    } else {
        harness::run_recover_key(&cfg)?
    };
    write_output(&args.out, &report.to_json())?;
    eprintln!(
        "trials: {}, successes: {}, ambiguous: {}, capped: {}",
        report.summary.trials,
        report.summary.successes,
        report.summary.ambiguous,
        report.summary.capped
    );
    if report.summary.capped > 0 {
        Ok(EXIT_CAP)
    } else if report.summary.ambiguous > 0 {
        Ok(EXIT_AMBIGUOUS)
    } else {
        Ok(EXIT_OK)
    }
}

fn cmd_find_struct(args: BatchArgs) -> Result<i32, Error> {
    if args.format == Format::Csv {
        return Err(Error::InvalidConfig(
            "structure-search batches are JSON only".into(),
        ));
    }
    let cfg = load_experiment_config(&args)?;
    let report = harness::run_find_struct(&cfg)?;
    write_output(&args.out, &report.to_json())?;
    eprintln!(
        "trials: {}, capped: {}, containment failures: {}",
        report.summary.trials, report.summary.capped, report.summary.containment_failures
    );
    if report.summary.capped > 0 {
        Ok(EXIT_CAP)
    } else {
        Ok(EXIT_OK)
    }
}

fn parse_bits(text: &str) -> Result<u64, Error> {
    let text = text.trim();
    let parsed = if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16)
    } else {
        text.parse::<u64>()
    };
    parsed.map_err(|e| Error::Parse(format!("bit-vector value {text:?}: {e}")))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<i32, Error> {
    let sigmas: Vec<Frac> = args
        .sigma
        .iter()
        .map(|s| harness::parse_frac(s))
        .collect::<Result<_, _>>()?;
    let report = match (&args.table, &args.config) {
        (Some(path), None) => {
            let vf = boolfn::io::from_json(&fs::read_to_string(path)?)?;
            harness::analyze_function(&vf, &sigmas)?
        }
        (None, Some(path)) => {
            let spec: CipherSpec = serde_json::from_str(&fs::read_to_string(path)?)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let key =
                parse_bits(args.key.as_deref().ok_or_else(|| {
                    Error::InvalidConfig("--key is required with --config".into())
                })?)?;
            let plaintext = args
                .plaintext
                .as_deref()
                .map(parse_bits)
                .transpose()?
                .unwrap_or(0);
            harness::analyze_cipher(&spec, key, plaintext, &sigmas)?
        }
        _ => {
            return Err(Error::InvalidConfig(
                "analyze needs exactly one of --table or --config".into(),
            ))
        }
    };
    write_output(&args.out, &report.to_json())?;
    Ok(EXIT_OK)
}

fn cmd_sweep(args: SweepArgs) -> Result<i32, Error> {
    let text = fs::read_to_string(&args.config)?;
    let mut cfg: SweepConfig =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    if let Some(seed) = args.seed {
        cfg.base.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.base.trials = trials;
    }
    if let Some(threads) = args.threads {
        cfg.base.threads = threads;
    }
    let report = harness::run_sweep(&cfg)?;
    let content = match args.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    };
    write_output(&args.out, &content)?;
    let capped: u64 = report.rows.iter().map(|r| r.capped).sum();
    let ambiguous: u64 = report.rows.iter().map(|r| r.ambiguous).sum();
    eprintln!("grid points: {}", report.rows.len());
    if capped > 0 {
        Ok(EXIT_CAP)
    } else if ambiguous > 0 {
        Ok(EXIT_AMBIGUOUS)
    } else {
        Ok(EXIT_OK)
    }
}

fn time_it(mut op: impl FnMut(), iterations: u64) -> (f64, f64) {
    let start = Instant::now();
    for _ in 0..iterations {
        op();
    }
    let total = start.elapsed().as_secs_f64();
    (total * 1e3, total * 1e9 / iterations as f64)
}

fn cmd_bench(args: BenchArgs) -> Result<i32, Error> {
    let mut entries = Vec::new();
    let mut rng = RngStream::from_seed(0xbe7c);

    for k in [12u32, 16, 18] {
        let f = random_boolean_function(k, &mut rng)?;
        let iters = if k >= 18 { 5 } else { 20 };
        let (total_ms, per_op_ns) = time_it(
            || {
                std::hint::black_box(f.walsh_spectrum());
            },
            iters,
        );
        entries.push(serde_json::json!({
            "name": format!("walsh_spectrum_k{k}"),
            "iterations": iters,
            "total_ms": total_ms,
            "per_op_ns": per_op_ns,
        }));
    }

    {
        let k = 24u32;
        let eqs: Vec<gf2::Equation> = (0..48)
            .map(|_| (rng.bitvec(k), (rng.next_u64() & 1) as u8))
            .collect();
        let (total_ms, per_op_ns) = time_it(
            || {
                std::hint::black_box(gf2::solve_affine_system(&eqs, k));
            },
            10_000,
        );
        entries.push(serde_json::json!({
            "name": "solve_affine_system_k24_p48",
            "iterations": 10_000,
            "total_ms": total_ms,
            "per_op_ns": per_op_ns,
        }));
    }

    {
        let em = ToyEvenMansour::new(12, 1)?;
        let key = BitVec::new(12, 0x5a5);
        let mut m = 0u64;
        let (total_ms, per_op_ns) = time_it(
            || {
                use bvrk::cipher::BlockCipher;
                std::hint::black_box(em.encrypt(key, BitVec::new(12, m & 0xfff)));
                m = m.wrapping_add(1);
            },
            1 << 16,
        );
        entries.push(serde_json::json!({
            "name": "toy_em_encrypt_n12",
            "iterations": 1 << 16,
            "total_ms": total_ms,
            "per_op_ns": per_op_ns,
        }));
    }

    {
        let f = random_boolean_function(12, &mut rng)?;
        let dist = bv_exact_distribution(&f);
        let mut sample_rng = RngStream::from_seed(7);
        let (total_ms, per_op_ns) = time_it(
            || {
                std::hint::black_box(dist.sample(&mut sample_rng));
            },
            100_000,
        );
        entries.push(serde_json::json!({
            "name": "bv_sample_k12",
            "iterations": 100_000,
            "total_ms": total_ms,
            "per_op_ns": per_op_ns,
        }));
    }

    let report = serde_json::json!({
        "schema": "bvrk.bench.v1",
        "entries": entries,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_output(&args.out, &text)?;
    Ok(EXIT_OK)
}
