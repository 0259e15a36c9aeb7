use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use qcp_sim::bench::{self, Benchmark, ExperimentSpec, SpeedupCurve};
use qcp_sim::isa::{parse_program, read_binary, write_binary, MAGIC};
use qcp_sim::isa::Program;
use qcp_sim::metrics::{speedup, write_events_csv};
use qcp_sim::{MachineConfig, Prepared, RunError, RunReport};

/// Cycle-level quantum control processor simulator.
///
/// Programs are given as a path to assembly text or a binary image, or as
/// `@name[:key=value,...]` to use a built-in generator (for example
/// `@dense:qubits=8,steps=100`).
#[derive(Parser)]
#[command(name = "qcp-sim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assemble a program into the binary image format.
    Assemble {
        /// Program source.
        input: String,
        /// Output path for the binary image.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print a built-in generator's program as assembly text.
    Gen {
        /// Generator name: dense, feedforward, parallel_rus,
        /// active_reset_plus_rb, active_reset_plus_rb_branch, steane.
        name: String,
        /// Generator parameter as key=value; may repeat.
        #[arg(short, long = "param", value_parser = parse_param)]
        params: Vec<(String, u32)>,
        /// Write to a file instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a program once and print its report as JSON.
    Run {
        program: String,
        /// Machine configuration JSON; missing fields take defaults.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Override the configuration's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Failure probability at a generator's repeat-until-success
        /// measurements (generator programs only).
        #[arg(long)]
        bias: Option<f64>,
        /// Write issued operations as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write per-step cycle metrics as CSV.
        #[arg(long)]
        steps: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a generator over seeds and core counts and print a speedup curve.
    Bench {
        name: String,
        #[arg(short, long = "param", value_parser = parse_param)]
        params: Vec<(String, u32)>,
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Comma separated core counts.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        cores: Vec<usize>,
        /// Superscalar width (1, 2, 4 or 8).
        #[arg(long)]
        width: Option<usize>,
        /// Number of seeded repetitions per point.
        #[arg(long, default_value_t = 1)]
        seeds: u32,
        /// First seed; later repetitions advance by a fixed stride.
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        /// Comma separated failure probabilities.
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        bias: Vec<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run one program under two configurations and report the speedup.
    Compare {
        program: String,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        variant: PathBuf,
        #[arg(long)]
        bias: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_param(s: &str) -> Result<(String, u32), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v = v.parse().map_err(|e| format!("`{k}`: {e}"))?;
    Ok((k.to_string(), v))
}

/// Errors that map to exit code 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct InputError(String);

enum Source {
    File(Program),
    Generated(Benchmark),
}

impl Source {
    fn program(&self) -> &Program {
        match self {
            Source::File(p) => p,
            Source::Generated(b) => &b.program,
        }
    }
}

fn generator(name: &str, params: &[(String, u32)]) -> Result<Benchmark, InputError> {
    let map: BTreeMap<String, u32> = params.iter().cloned().collect();
    bench::by_name(name, &map).map_err(InputError)
}

fn load_program(arg: &str) -> anyhow::Result<Source> {
    if let Some(spec) = arg.strip_prefix('@') {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let params = rest
            .split(',')
            .filter(|s| !s.is_empty())
            .map(parse_param)
            .collect::<Result<Vec<_>, _>>()
            .map_err(InputError)?;
        return Ok(Source::Generated(generator(name, &params)?));
    }
    let bytes = fs::read(arg).with_context(|| format!("reading {arg}"))?;
    if bytes.starts_with(MAGIC) {
        let p = read_binary(bytes.as_slice()).map_err(|e| InputError(format!("{arg}: {e}")))?;
        return Ok(Source::File(p));
    }
    let text = String::from_utf8(bytes).map_err(|_| InputError(format!("{arg}: not UTF-8 text")))?;
    let p = parse_program(&text).map_err(|e| InputError(format!("{arg}: {e}")))?;
    Ok(Source::File(p))
}

fn load_config(path: Option<&Path>) -> anyhow::Result<MachineConfig> {
    let Some(path) = path else {
        return Ok(MachineConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: MachineConfig = serde_json::from_str(&text)
        .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

fn apply_bias(cfg: &mut MachineConfig, src: &Source, bias: Option<f64>) -> anyhow::Result<()> {
    match (src, bias) {
        (Source::Generated(b), Some(p)) => cfg.qpu.outcome_bias = b.bias(p),
        (Source::Generated(b), None) => {
            if cfg.qpu.outcome_bias.points.is_empty() {
                cfg.qpu.outcome_bias = b.bias(cfg.qpu.outcome_bias.default);
            }
        }
        (Source::File(_), Some(_)) => {
            bail!(InputError("--bias needs a generator program; set outcome_bias in the config".into()))
        }
        (Source::File(_), None) => {}
    }
    Ok(())
}

fn emit<T: Serialize>(value: &T, output: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn prepare(p: &Program, cfg: &MachineConfig) -> anyhow::Result<Prepared> {
    Ok(Prepared::new(p, cfg)?)
}

fn run_once(p: &Prepared, cfg: &MachineConfig) -> anyhow::Result<qcp_sim::RunOutput> {
    p.run(cfg).map_err(|f| anyhow!(RunError::Fault(f)))
}

#[derive(Serialize)]
struct Comparison {
    speedup: f64,
    avg_tr_ratio: f64,
    base: RunReport,
    variant: RunReport,
}

#[derive(Serialize)]
struct BenchOutput {
    benchmark: String,
    quantum_instructions: usize,
    classical_instructions: usize,
    blocks: usize,
    curves: Vec<SpeedupCurve>,
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Assemble { input, output } => {
            let src = load_program(&input)?;
            let diags = qcp_sim::isa::validate_program(src.program());
            if !diags.is_empty() {
                bail!(RunError::Invalid(diags));
            }
            let mut bytes = Vec::new();
            write_binary(src.program(), &mut bytes).map_err(|e| InputError(e.to_string()))?;
            fs::write(&output, bytes).with_context(|| format!("writing {}", output.display()))?;
        }
        Cmd::Gen { name, params, output } => {
            let b = generator(&name, &params)?;
            let text = b.program.to_string();
            match output {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Cmd::Run {
            program,
            config,
            seed,
            bias,
            trace,
            steps,
            output,
        } => {
            let src = load_program(&program)?;
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            apply_bias(&mut cfg, &src, bias)?;
            cfg.record_events |= trace.is_some();
            let prepared = prepare(src.program(), &cfg)?;
            let out = run_once(&prepared, &cfg)?;
            if let Some(path) = trace {
                let f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
                write_events_csv(&out.events, f)?;
            }
            if let Some(path) = steps {
                let f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
                out.report.write_steps_csv(f)?;
            }
            emit(&out.report, output.as_deref())?;
        }
        Cmd::Bench {
            name,
            params,
            config,
            cores,
            width,
            seeds,
            base_seed,
            bias,
            output,
        } => {
            if seeds == 0 {
                bail!(InputError("--seeds must be at least 1".into()));
            }
            let b = generator(&name, &params)?;
            let mut cfg = load_config(config.as_deref())?;
            if let Some(w) = width {
                cfg.superscalar_width = w;
            }
            cfg.record_events = false;
            let spec = ExperimentSpec {
                repetitions: seeds,
                base_seed,
            };
            let mut curves = Vec::new();
            for &p in &bias {
                cfg.qpu.outcome_bias = b.bias(p);
                let prepared = prepare(&b.program, &cfg)?;
                let mut curve = SpeedupCurve::measure(&prepared, &cfg, &cores, &spec)
                    .map_err(|f| anyhow!(RunError::Fault(f)))?;
                curve.failure_bias = Some(p);
                curves.push(curve);
            }
            emit(
                &BenchOutput {
                    benchmark: b.name.clone(),
                    quantum_instructions: b.program.quantum_count(),
                    classical_instructions: b.program.classical_count(),
                    blocks: b.program.blocks.len(),
                    curves,
                },
                output.as_deref(),
            )?;
        }
        Cmd::Compare {
            program,
            base,
            variant,
            bias,
            output,
        } => {
            let src = load_program(&program)?;
            let mut reports = Vec::new();
            for path in [&base, &variant] {
                let mut cfg = load_config(Some(path))?;
                apply_bias(&mut cfg, &src, bias)?;
                let prepared = prepare(src.program(), &cfg)?;
                reports.push(run_once(&prepared, &cfg)?.report);
            }
            let variant = reports.pop().expect("two reports");
            let base = reports.pop().expect("two reports");
            let s = speedup(&base, &variant).map_err(|e| InputError(e.to_string()))?;
            let ratio = if variant.avg_tr > 0.0 {
                base.avg_tr / variant.avg_tr
            } else {
                f64::NAN
            };
            emit(
                &Comparison {
                    speedup: s,
                    avg_tr_ratio: ratio,
                    base,
                    variant,
                },
                output.as_deref(),
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<RunError>() {
                Some(RunError::Fault(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
