use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mtlab::config::{CampaignParams, TestEnv, DEFAULT_SEED};
use mtlab::harness::{run_baseline, run_matrix, HarnessError};
use mtlab::mutation::{contract_mutants, Mutant, Operator, SiteKind, SiteRegistry};
use mtlab::relations::{all_mr_ids, catalog_json, MR_COUNT};
use mtlab::report::{mutants_csv, sites_csv, MatrixReport};

/// Metamorphic testing of a crowdfunding contract model against its mutants.
#[derive(Parser)]
#[command(name = "mtlab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the mutation sites as CSV.
    ListSites,
    /// Print the mutant census as CSV.
    ListMutants {
        /// Site kind (COMPARISON, ARITHMETIC, INCREMENT, GUARD) or operator name.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Baseline, applicability and kill matrix; writes the reports.
    Run(RunArgs),
    /// Summarize a serialized kill matrix and write plot data.
    Report {
        matrix: PathBuf,
        /// Directory for plot_data.csv (defaults to the matrix's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the relation catalog as JSON.
    Catalog,
}

#[derive(Args)]
struct RunArgs {
    /// Campaign parameters (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "MTLAB_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Relation ids, comma separated.
    #[arg(long, value_delimiter = ',')]
    mrs: Vec<u8>,
    /// Mutant ids or operator names, comma separated.
    #[arg(long, value_delimiter = ',')]
    mutants: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Drop mutants flagged as likely equivalent.
    #[arg(long)]
    exclude_equivalent: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_BASELINE: u8 = 2;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("mtlab: {msg}");
    ExitCode::from(code)
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
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match cli.cmd {
        Cmd::ListSites => emit(sites_csv(SiteRegistry::contract().sites())),
        Cmd::ListMutants { kind } => list_mutants(kind.as_deref()),
        Cmd::Run(args) => run(args),
        Cmd::Report { matrix, out } => report(&matrix, out),
        Cmd::Catalog => {
            println!("{}", catalog_json());
            ExitCode::SUCCESS
        }
    }
}

fn emit<E: std::fmt::Display>(table: Result<String, E>) -> ExitCode {
    match table {
        Ok(t) => {
            print!("{t}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_CONFIG, e),
    }
}

fn list_mutants(kind: Option<&str>) -> ExitCode {
    let mutants = contract_mutants();
    let selected: Vec<Mutant> = match kind {
        None => mutants,
        Some(k) => {
            if let Ok(kind) = SiteKind::from_str(k) {
                mutants
                    .into_iter()
                    .filter(|m| m.original_op.kind() == kind)
                    .collect()
            } else if let Ok(op) = Operator::from_str(k) {
                mutants.into_iter().filter(|m| m.operator == op).collect()
            } else {
                return fail(EXIT_CONFIG, format!("unknown kind or operator {k:?}"));
            }
        }
    };
    emit(mutants_csv(&selected))
}

fn select_mutants(filter: &[String], exclude_equivalent: bool) -> Result<Vec<Mutant>, String> {
    let all = contract_mutants();
    let mut keep = vec![filter.is_empty(); all.len()];
    for item in filter {
        if let Ok(id) = item.parse::<usize>() {
            *keep
                .get_mut(id)
                .ok_or_else(|| format!("no mutant with id {id}"))? = true;
        } else if let Ok(op) = Operator::from_str(item) {
            for (k, m) in keep.iter_mut().zip(&all) {
                *k |= m.operator == op;
            }
        } else {
            return Err(format!("unknown mutant filter {item:?}"));
        }
    }
    Ok(all
        .into_iter()
        .zip(keep)
        .filter(|(m, k)| *k && !(exclude_equivalent && m.equivalent_hint))
        .map(|(m, _)| m)
        .collect())
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn run(args: RunArgs) -> ExitCode {
    let params = match &args.config {
        Some(path) => match CampaignParams::load(path) {
            Ok(p) => p,
            Err(e) => return fail(EXIT_CONFIG, e),
        },
        None => CampaignParams::default(),
    };
    let mrs = if args.mrs.is_empty() {
        all_mr_ids()
    } else {
        args.mrs.clone()
    };
    if let Some(bad) = mrs.iter().find(|&&mr| !(1..=MR_COUNT).contains(&mr)) {
        return fail(EXIT_CONFIG, format!("unknown relation id {bad}"));
    }
    let mutants = match select_mutants(&args.mutants, args.exclude_equivalent) {
        Ok(m) => m,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Err(e) = fs::create_dir_all(&args.out) {
        return fail(
            EXIT_CONFIG,
            format!("cannot create {}: {e}", args.out.display()),
        );
    }

    let env = TestEnv::new(params.clone(), args.seed);
    let mut envs = TestEnv::sweep(&params, args.seed);
    envs.push(env.clone());
    match run_baseline(&envs, &mrs) {
        Ok(b) => eprintln!(
            "baseline: {} runs over {} environments passed",
            b.runs, b.envs
        ),
        Err(HarnessError::BaselineFailure { offending }) => {
            for o in &offending {
                eprintln!(
                    "  MR{} {} with {}: {}",
                    o.mr,
                    o.result,
                    serde_json::to_string(&o.params).unwrap_or_default(),
                    o.detail
                );
            }
            return fail(EXIT_BASELINE, HarnessError::BaselineFailure { offending });
        }
        Err(e) => return fail(EXIT_BASELINE, e),
    }

    let matrix = match run_matrix(&mrs, &mutants, &env) {
        Ok(m) => m,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let report = MatrixReport::from_matrix(&matrix);
    let mut outputs = Vec::new();
    if args.format != Format::Csv {
        outputs.push(("kill_matrix.json", Ok(report.to_json())));
    }
    if args.format != Format::Json {
        outputs.push(("per_mr.csv", report.per_mr_csv().map_err(|e| e.to_string())));
    }
    for (name, contents) in outputs {
        if let Err(e) = contents.and_then(|c| write(&args.out, name, &c)) {
            return fail(EXIT_CONFIG, e);
        }
    }
    print!("{}", report.summary());
    ExitCode::SUCCESS
}

fn report(matrix: &Path, out: Option<PathBuf>) -> ExitCode {
    let text = match fs::read_to_string(matrix) {
        Ok(t) => t,
        Err(e) => {
            return fail(
                EXIT_CONFIG,
                format!("cannot read {}: {e}", matrix.display()),
            )
        }
    };
    let report = match MatrixReport::from_json(&text) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let dir = out.unwrap_or_else(|| {
        matrix
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    });
    let plot = report.plot_data_csv().map_err(|e| e.to_string());
    if let Err(e) = fs::create_dir_all(&dir)
        .map_err(|e| format!("cannot create {}: {e}", dir.display()))
        .and(plot)
        .and_then(|p| write(&dir, "plot_data.csv", &p))
    {
        return fail(EXIT_CONFIG, e);
    }
    print!("{}", report.summary());
    ExitCode::SUCCESS
}
