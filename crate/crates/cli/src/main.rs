use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use snc_cover::driver::{solve, SolveConfig};
use snc_cover::instance::{load, save, Instance, WeightLaw};
use snc_cover::snc::{layer_decomposition, SncOracle};
use snc_cover::SncError;

mod suite;

use suite::{GenKind, GenSpec};

#[derive(Parser)]
#[command(name = "snc-bench", version, about = "Parallel primal-dual set cover on small-neighborhood-cover instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the layer decomposition of an instance.
    Decompose(DecomposeArgs),
    /// Solve an instance and report weight, rounds and multiplicity.
    Solve(SolveArgs),
    /// Run a TOML suite against the baselines and the exact optimum.
    Compare(CompareArgs),
    /// Write a generated instance.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Exact,
    Interval,
    /// Interval when the file carries geometry, else exact.
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct DecomposeArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1)]
    tau: usize,
    #[arg(long, value_enum, default_value = "auto")]
    oracle: OracleKind,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1)]
    tau: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    oracle: OracleKind,
    /// Spend the whole shrink budget in every layer.
    #[arg(long)]
    full_budget: bool,
    /// Solution JSON destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Round trace CSV destination.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Stdout format: summary text, solution JSON, or trace CSV.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct CompareArgs {
    suite: PathBuf,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Points, vertices, or elements.
    #[arg(long)]
    n: usize,
    /// Intervals or sets; defaults to `n`.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value = "unit")]
    weights: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep nested intervals.
    #[arg(long)]
    unnormalized: bool,
    #[arg(long, default_value_t = 0.3)]
    edge_prob: f64,
    #[arg(long, default_value_t = 3)]
    max_frequency: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Decompose(args) => decompose(args),
        Command::Solve(args) => solve_cmd(args),
        Command::Compare(args) => suite::compare(&args.suite, args.out.as_deref(), args.threads),
        Command::Generate(args) => generate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &SncError) -> u8 {
    match err {
        SncError::NotSnc { .. } => 2,
        SncError::Infeasible(_) => 3,
        _ => 1,
    }
}

fn build_oracle(kind: OracleKind, inst: &Instance) -> Result<SncOracle, SncError> {
    match kind {
        OracleKind::Exact => Ok(SncOracle::exact()),
        OracleKind::Auto => Ok(SncOracle::auto(&inst.system, inst.geometry.as_ref())),
        OracleKind::Interval => match &inst.geometry {
            Some(g) => SncOracle::interval(&inst.system, g.clone()),
            None => Err(SncError::Config("--oracle interval needs interval geometry in the instance".into())),
        },
    }
}

fn report_residual(inst: &Instance, err: &SncError) {
    if let SncError::NotSnc { tau, residual } = err {
        let names: Vec<String> = residual.iter().map(|&e| inst.element_name(e)).collect();
        eprintln!("no {tau}-SNC element among the residual set: {}", names.join(" "));
    }
}

fn decompose(args: DecomposeArgs) -> Result<(), SncError> {
    let inst = load(&args.instance)?;
    let oracle = build_oracle(args.oracle, &inst)?;
    let layers = layer_decomposition(&inst.system, args.tau, &oracle).inspect_err(|err| report_residual(&inst, err))?;
    match args.format {
        Format::Json => {
            let names: Option<Vec<String>> = inst.names.as_ref().and_then(|n| n.elements.clone());
            println!("{}", layers.to_json(names.as_deref()));
        }
        Format::Csv => {
            println!("element,layer");
            for (k, z) in layers.layers.iter().enumerate() {
                for e in z.iter() {
                    println!("{},{}", inst.element_name(e), k + 1);
                }
            }
        }
        Format::Text => {
            println!("tau {} oracle {} L {}", args.tau, oracle.name(), layers.depth());
            for (k, z) in layers.layers.iter().enumerate() {
                let names: Vec<String> = z.iter().map(|e| inst.element_name(e)).collect();
                println!("layer {} ({}): {}", k + 1, z.len(), names.join(" "));
            }
        }
    }
    Ok(())
}

fn solve_cmd(args: SolveArgs) -> Result<(), SncError> {
    let inst = load(&args.instance)?;
    let oracle = build_oracle(args.oracle, &inst)?;
    let config = SolveConfig {
        tau: args.tau,
        epsilon: args.epsilon,
        seed: args.seed,
        full_budget: args.full_budget,
    };
    let sol = solve(&inst.system, &oracle, config).inspect_err(|err| report_residual(&inst, err))?;
    if let Some(path) = &args.out {
        fs::write(path, sol.to_json() + "\n")?;
    }
    if let Some(path) = &args.trace_out {
        fs::write(path, sol.trace.to_csv())?;
    }
    match args.format {
        Format::Json => println!("{}", sol.to_json()),
        Format::Csv => print!("{}", sol.trace.to_csv()),
        Format::Text => {
            let names: Vec<String> = sol.cover.iter().map(|h| inst.set_name(h)).collect();
            let t = &sol.trace;
            println!("weight {}", sol.weight);
            println!("cover ({}): {}", sol.cover.len(), names.join(" "));
            println!(
                "rounds: decompose {} forward {} mis {} shrink {} total {}",
                t.decomposition_rounds,
                t.forward_total(),
                t.mis_rounds.iter().sum::<usize>(),
                t.shrink_rounds.iter().sum::<usize>(),
                t.total_rounds()
            );
            println!("layers {} shrink budget {}", sol.reduced.layers.depth(), t.shrink_budget);
            println!("max multiplicity over F: {} (tau {})", sol.target_multiplicity, args.tau);
        }
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<(), SncError> {
    let spec = GenSpec {
        kind: args.kind,
        count: 1,
        n: args.n,
        m: args.m,
        weight_law: args.weights.parse::<WeightLaw>()?,
        normalized: !args.unnormalized,
        edge_prob: args.edge_prob,
        max_frequency: args.max_frequency,
        seed: args.seed,
    };
    let inst = spec.build(args.seed)?;
    save(&args.out, &inst)?;
    println!("wrote {} (n {}, m {})", args.out.display(), inst.system.n(), inst.system.m());
    Ok(())
}
