use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pppta::backwards::DEFAULT_CAP;
use pppta::{ClockRegion, ClockValuation, Mode, Objective, ParamValuation};
use pppta_cli::{CliError, Engine, SynthesisRequest};

#[derive(Parser)]
#[command(name = "pppta", version, about = "Analysis and parameter synthesis for parametric probabilistic timed automata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Max,
    Min,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Digital,
    Backwards,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Iterate,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Records,
}

#[derive(clap::Args)]
struct Common {
    /// Target locations, comma separated.
    #[arg(long)]
    target: String,
    #[arg(long, value_enum, default_value = "max")]
    objective: ObjectiveArg,
    #[arg(long, value_enum, default_value = "digital")]
    engine: EngineArg,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    /// Rule-application cap for the backwards engine.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Prints parameter classification and model diagnostics.
    Info { model: PathBuf },
    /// Reachability probability at one parameter valuation.
    Check {
        model: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Clock parameters, e.g. `T=3,U=1`.
        #[arg(long, default_value = "")]
        gamma: String,
        /// Probability parameters, e.g. `p=1/2`.
        #[arg(long, default_value = "")]
        rho: String,
    },
    /// Optimizes over a clock-parameter region and a probability grid.
    Synth {
        model: PathBuf,
        #[command(flatten)]
        common: Common,
        /// `NAME=RAT[,RAT...]` or `NAME:#N`; repeatable.
        #[arg(long = "rho-grid")]
        rho_grid: Vec<String>,
        /// Clock-parameter intervals overriding the declared domains, e.g. `T=0..4`.
        #[arg(long)]
        region: Option<String>,
        /// File with one clock-parameter valuation per line.
        #[arg(long = "gamma-set", conflicts_with = "region")]
        gamma_set: Option<PathBuf>,
        /// Enumerate the whole region without the L/U reduction.
        #[arg(long = "no-reduce")]
        no_reduce: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Writes the engine's pMDP.
    Export {
        model: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, value_enum, default_value = "digital")]
        engine: EngineArg,
        #[arg(long, default_value = "")]
        gamma: String,
        #[arg(long, default_value = "")]
        rho: String,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Fixes lower- and upper-bound clock parameters and prints the residual model.
    Reduce {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "max")]
        objective: ObjectiveArg,
        #[arg(long)]
        region: Option<String>,
        #[arg(long = "gamma-set", conflicts_with = "region")]
        gamma_set: Option<PathBuf>,
    },
}

fn objective(o: ObjectiveArg) -> Objective {
    match o {
        ObjectiveArg::Max => Objective::Max,
        ObjectiveArg::Min => Objective::Min,
    }
}

fn engine(e: EngineArg) -> Engine {
    match e {
        EngineArg::Digital => Engine::Digital,
        EngineArg::Backwards => Engine::Backwards,
    }
}

fn mode(m: ModeArg) -> Mode {
    match m {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Iterate => Mode::Iterate,
    }
}

fn region(m: &pppta::Pppta, region: Option<&str>, gamma_set: Option<&PathBuf>) -> Result<ClockRegion, CliError> {
    if let Some(path) = gamma_set {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        return Ok(ClockRegion::Explicit(pppta_cli::parse_gamma_set(&text)?));
    }
    let mut iv = m.clock_params.clone();
    if let Some(s) = region {
        for (p, r) in pppta_cli::parse_region(s)? {
            if !iv.contains_key(&p) {
                return Err(CliError::Usage(format!("unknown clock parameter `{p}`")));
            }
            iv.insert(p, r);
        }
    }
    Ok(ClockRegion::Rectangular(iv))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Info { model } => {
            let m = pppta_cli::load_model(&model)?;
            print!("{}", pppta_cli::info(&m));
        }
        Command::Check { model, common, gamma, rho } => {
            let m = pppta_cli::load_model(&model)?;
            let out = pppta_cli::check(
                &m,
                &pppta_cli::parse_gamma(&gamma)?,
                &pppta_cli::parse_rho(&rho)?,
                &pppta_cli::parse_targets(&common.target),
                objective(common.objective),
                engine(common.engine),
                mode(common.mode),
                common.cap,
            )?;
            println!("{}", out.value);
            if out.truncated {
                eprintln!("warning: exploration truncated; the value is a lower bound");
            }
            for z in out.zeno {
                eprintln!("warning: {z}; the minimum may rely on non-divergent schedulers");
            }
        }
        Command::Synth {
            model,
            common,
            rho_grid,
            region: reg,
            gamma_set,
            no_reduce,
            format,
        } => {
            let m = pppta_cli::load_model(&model)?;
            let mut req = SynthesisRequest::new(&m, pppta_cli::parse_targets(&common.target), objective(common.objective));
            req.engine = engine(common.engine);
            req.mode = mode(common.mode);
            req.cap = common.cap;
            req.region = region(&m, reg.as_deref(), gamma_set.as_ref())?;
            req.rho_axes = pppta_cli::parse_rho_grid(&rho_grid)?;
            req.reduce = !no_reduce;
            let res = pppta_cli::synth(&m, &req)?;
            match format {
                FormatArg::Text => print!("{}", res.render_text()),
                FormatArg::Records => print!("{}", res.render_records()),
            }
        }
        Command::Export {
            model,
            target,
            engine: e,
            gamma,
            rho,
            cap,
            output,
        } => {
            let m = pppta_cli::load_model(&model)?;
            let gamma: ClockValuation = pppta_cli::parse_gamma(&gamma)?;
            let rho: ParamValuation = pppta_cli::parse_rho(&rho)?;
            let doc = pppta_cli::export(&m, &gamma, &rho, &pppta_cli::parse_targets(&target), engine(e), cap)?;
            match output {
                Some(path) => std::fs::write(&path, doc).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
                None => print!("{doc}"),
            }
        }
        Command::Reduce {
            model,
            objective: o,
            region: reg,
            gamma_set,
        } => {
            let m = pppta_cli::load_model(&model)?;
            let r = region(&m, reg.as_deref(), gamma_set.as_ref())?;
            print!("{}", pppta_cli::reduce(&m, &r, objective(o))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let outcome = std::panic::catch_unwind(|| run(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(4),
    }
}
