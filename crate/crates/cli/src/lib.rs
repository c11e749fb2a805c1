//! Argument handling and dispatch for the `cascade` binary.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 numerical failure
//! (singular system, failed generator checks, or a gated solve under `--strict`).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use cascade_core::emulator::{composed_transitions, emulator_rates_with, meta_chain};
use cascade_core::format::decimal;
use cascade_core::fpt::{Conventions, FptProblem, DEFAULT_COND_GATE};
use cascade_core::mean_field::Stability;
use cascade_core::reaction_network::Patch;
use cascade_core::ssa::DEFAULT_CAP;
use cascade_core::sweep::{reproduction_report, run_sweep_with};
use cascade_core::{
    aggregate_nu, build_generator, build_rates, compare_with_solver, emit, equilibria, mfpt, trap_states,
    validate_generator, Error, Macrostate, MeanFieldModel, SsaRun, StochasticRates, SweepConfig, Thresholds,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cascade", version, about = "Tipping cascades in a two-patch Allee-effect chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the generator's sign pattern, row sums, sparsity and absorbing set.
    Validate(ModelArgs),
    /// Write the generator in Matrix Market coordinate format.
    ExportQ {
        #[command(flatten)]
        model: ModelArgs,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the mean-field equilibria of one patch.
    Equilibria {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        patch: u8,
    },
    /// Mean first passage time between two macrostates.
    Mfpt(PassageArgs),
    /// The four-state emulator rates, recovery probability and odds.
    Emulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(long)]
        strict: bool,
    },
    /// Compare the MFPT solve against stochastic simulation.
    Ssa {
        #[command(flatten)]
        passage: PassageArgs,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_CAP, allow_negative_numbers = true)]
        cap: f64,
    },
    /// Run the parameter sweep and write `<out>_records.csv` and `<out>_nu.csv`.
    Sweep {
        /// JSON sweep configuration; built-in defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "sweep")]
        out: String,
        /// Worker threads; all available cores when absent.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, allow_negative_numbers = true)]
    beta1: f64,
    #[arg(long, allow_negative_numbers = true)]
    beta2: f64,
    /// Dispersal rate.
    #[arg(long, allow_negative_numbers = true)]
    d: f64,
    /// Per-patch population cap.
    #[arg(long, default_value_t = 10)]
    n: usize,
}

impl ModelArgs {
    fn rates(&self) -> Result<StochasticRates, Failure> {
        Ok(build_rates(self.beta1, self.beta2, self.d, self.n)?)
    }
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[arg(long)]
    h: usize,
    #[arg(long)]
    l: usize,
}

#[derive(Debug, Args)]
struct PassageArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[arg(long)]
    from: Macrostate,
    #[arg(long)]
    to: Macrostate,
    #[arg(long)]
    strict: bool,
}

/// Validated inputs of a passage between macrostates.
struct Passage {
    rates: StochasticRates,
    source: (usize, usize),
    traps: cascade_core::TrapSpec,
}

impl PassageArgs {
    fn resolve(&self) -> Result<Passage, Failure> {
        let rates = self.model.rates()?;
        let th = Thresholds::new(self.thresholds.h, self.thresholds.l, rates.n_max)?;
        if self.from == self.to {
            return Err(Failure::usage(format!("--from and --to are both {}", self.from)));
        }
        Ok(Passage {
            rates,
            source: th.representative(self.from),
            traps: trap_states(self.to, th.high, th.low, rates.n_max)?,
        })
    }
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Singular { .. } => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let line = f.message.replace('\n', " ");
            let _ = writeln!(err, "error: {line}");
            f.code
        }
    }
}

fn dispatch(command: Command, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), Failure> {
    match command {
        Command::Sweep {
            config,
            out: prefix,
            jobs,
            strict,
        } => {
            let config = match config {
                Some(path) => SweepConfig::load(&path)?,
                None => SweepConfig::default(),
            };
            config.validate()?;
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(k) = jobs {
                if k == 0 {
                    return Err(Failure::usage("invalid --jobs: must be at least 1"));
                }
                builder = builder.num_threads(k);
            }
            let pool = builder.build().map_err(|e| Failure::usage(e.to_string()))?;
            pool.install(|| sweep(&config, &prefix, strict, out, err))
        }
        other => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .map_err(|e| Failure::usage(e.to_string()))?;
            pool.install(|| single_point(other, out, err))
        }
    }
}

fn single_point(command: Command, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), Failure> {
    match command {
        Command::Validate(model) => {
            let q = build_generator(&model.rates()?)?;
            let report = validate_generator(&q);
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            if !report.passed() {
                return Err(Failure::numerical("generator checks failed"));
            }
        }
        Command::ExportQ { model, out: path } => {
            let q = build_generator(&model.rates()?)?;
            match path {
                Some(path) => {
                    let file = File::create(&path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
                    let mut w = BufWriter::new(file);
                    q.write_matrix_market(&mut w)
                        .and_then(|()| w.flush())
                        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
                }
                None => q.write_matrix_market(&mut *out)?,
            }
        }
        Command::Equilibria { model, patch } => {
            let patch = if patch == 1 { Patch::One } else { Patch::Two };
            let eq = equilibria(&MeanFieldModel::from_rates(&model.rates()?), patch);
            if eq.no_real_roots {
                writeln!(err, "note: only the trivial root is real")?;
            }
            for p in &eq.points {
                let label = match p.stability {
                    Stability::Stable => "stable",
                    Stability::Unstable => "unstable",
                    Stability::Marginal => "marginal",
                };
                writeln!(out, "{} {label}", decimal(p.rho))?;
            }
        }
        Command::Mfpt(args) => {
            let passage = args.resolve()?;
            let q = build_generator(&passage.rates)?;
            let source = q.space().index(passage.source.0, passage.source.1)?;
            let result = mfpt(&FptProblem::new(&q, passage.traps, source)?)?;
            writeln!(
                out,
                "mfpt={} cond={} gated={}",
                decimal(result.mfpt),
                decimal(result.cond),
                result.gated
            )?;
            check_gate(result.gated, result.cond, args.strict, err)?;
        }
        Command::Emulate {
            model,
            thresholds,
            strict,
        } => {
            let rates = model.rates()?;
            let th = Thresholds::new(thresholds.h, thresholds.l, rates.n_max)?;
            let emu = emulator_rates_with(&rates, &th, Conventions::default(), DEFAULT_COND_GATE)?;
            let chain = meta_chain(&emu)?;
            let c = composed_transitions(&chain);
            let summary = EmulateOutput {
                r1: emu.r1,
                r2: emu.r2,
                r3: emu.r3,
                r4: emu.r4,
                r5: emu.r5,
                r6: emu.r6,
                r7: emu.r7,
                r8: emu.r8,
                r: chain.r,
                odds: chain.odds,
                p_hh_ll: c.p_hh_ll,
                p_hh_hh: c.p_hh_hh,
                mfpt_hh_lh: c.mfpt_hh_lh,
                mfpt_hh_ll: c.mfpt_hh_ll,
                mfpt_hh_hh: c.mfpt_hh_hh,
            };
            writeln!(out, "{}", serde_json::to_string(&summary)?)?;
            check_gate(emu.gated, emu.cond_max, strict, err)?;
        }
        Command::Ssa {
            passage: args,
            samples,
            seed,
            cap,
        } => {
            let run = SsaRun::new(seed, cap, samples)?;
            let passage = args.resolve()?;
            let report = compare_with_solver(&passage.rates, passage.source, &passage.traps, &run)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            if report.disagrees {
                writeln!(err, "warning: SSA mean and solver disagree beyond 3 standard errors")?;
            }
            if report.inconclusive {
                writeln!(err, "warning: comparison inconclusive ({} of {} censored)", report.censored, report.samples)?;
            }
            check_gate(report.solver_gated, report.solver_cond, args.strict, err)?;
        }
        Command::Sweep { .. } => unreachable!("sweep runs on its own pool"),
    }
    Ok(())
}

#[derive(Serialize)]
struct EmulateOutput {
    r1: f64,
    r2: f64,
    r3: f64,
    r4: f64,
    r5: f64,
    r6: f64,
    r7: f64,
    r8: f64,
    r: f64,
    odds: f64,
    p_hh_ll: f64,
    p_hh_hh: f64,
    mfpt_hh_lh: f64,
    mfpt_hh_ll: f64,
    mfpt_hh_hh: f64,
}

fn check_gate(gated: bool, cond: f64, strict: bool, err: &mut (dyn Write + Send)) -> Result<(), Failure> {
    if !gated {
        return Ok(());
    }
    if strict {
        return Err(Failure::numerical(format!("condition number {} exceeds the gate", decimal(cond))));
    }
    writeln!(err, "warning: condition number {} exceeds the gate", decimal(cond))?;
    Ok(())
}

fn sweep(config: &SweepConfig, prefix: &str, strict: bool, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let conventions = Conventions::default();
    let output = run_sweep_with(config, conventions)?;
    let nu = aggregate_nu(&output.records, &config.eta_values);
    let (records_path, nu_path) = emit(&output.records, &nu, prefix)?;
    writeln!(err, "wrote {} and {}", records_path.display(), nu_path.display())?;
    let report = reproduction_report(config, conventions, &output, &nu);
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    for f in &output.failures {
        writeln!(
            err,
            "failed point D={} beta1={} beta2={} H={} L={}: {}",
            decimal(f.d),
            decimal(f.beta1),
            decimal(f.beta2),
            f.high,
            f.low,
            f.message
        )?;
    }
    if !output.failures.is_empty() {
        return Err(Failure::numerical(format!("{} sweep points failed", output.failures.len())));
    }
    let gated = output.records.iter().filter(|r| r.gated).count();
    if gated > 0 {
        if strict {
            return Err(Failure::numerical(format!("{gated} sweep points exceed the condition gate")));
        }
        writeln!(err, "warning: {gated} sweep points exceed the condition gate")?;
    }
    Ok(())
}
