use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use sfwg::mesh::{validate, write_mesh, MeshFamily};
use sfwg::quadrature::element_quadrature;
use sfwg::reference::{all_gating_pass, compare_to_reference, table_for};
use sfwg::study::{build_system, emit_report, parse_csv_report, run_study, ReportFormat, StudyConfig};
use sfwg::{Error, Result};

#[derive(Parser)]
#[command(name = "sfwg", version, about = "Weak Galerkin biharmonic convergence studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and compare it with the matching reference table.
    Run(RunArgs),
    /// Compare a CSV report with a reference table.
    Compare {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        table: u8,
    },
    /// Generate a mesh and write it to a file.
    Mesh {
        #[arg(long)]
        family: MeshFamily,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Print every element quadrature rule to stdout.
        #[arg(long)]
        dump_quadrature: bool,
        /// Exactness degree of the dumped rules.
        #[arg(long, default_value_t = 4)]
        degree: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    case: Option<u8>,
    #[arg(long)]
    mesh: Option<MeshFamily>,
    #[arg(long, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..=3))]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    format: Option<ReportFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the saddle-point system of the finest level in Matrix Market format.
    #[arg(long)]
    dump_system: Option<PathBuf>,
    #[arg(long, hide = true)]
    penalty_exponent: Option<f64>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    case: Option<u8>,
    mesh: Option<MeshFamily>,
    k: Option<usize>,
    levels: Option<Vec<usize>>,
    format: Option<ReportFormat>,
    out: Option<PathBuf>,
    dump_system: Option<PathBuf>,
    penalty_exponent: Option<f64>,
}

fn load_config(path: &Path) -> Result<RunFile> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
        message: e.message().to_string(),
    })
}

fn output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<bool> {
    let file = match &args.config {
        Some(p) => load_config(p)?,
        None => RunFile::default(),
    };
    let case = args.case.or(file.case).ok_or_else(|| Error::InvalidArgument("--case is required".into()))?;
    let mesh = args.mesh.or(file.mesh).ok_or_else(|| Error::InvalidArgument("--mesh is required".into()))?;
    let k = args.k.or(file.k).unwrap_or(2);
    let levels = args
        .levels
        .or(file.levels)
        .unwrap_or_else(|| if k >= 3 { vec![4, 8, 16] } else { vec![4, 8, 16, 32] });
    let mut config = StudyConfig::new(case, mesh, k, levels);
    config.penalty_exponent = args.penalty_exponent.or(file.penalty_exponent).unwrap_or(1.0);
    let format = args.format.or(file.format).unwrap_or(ReportFormat::Csv);
    let out = args.out.or(file.out);
    let dump = args.dump_system.or(file.dump_system);

    config.validate()?;
    if let Some(path) = &dump {
        let finest = *config.levels.last().expect("validated levels");
        let (_, system) = build_system(&config, finest)?;
        fs::write(path, system.matrix.to_matrix_market())?;
        log::info!("wrote {}x{} system to {}", system.matrix.nrows, system.matrix.ncols, path.display());
    }
    let report = run_study(&config)?;
    output(&emit_report(&report, format), out.as_deref())?;

    let mut ok = report.failures.is_empty();
    if let Some(id) = table_for(case, mesh) {
        match compare_to_reference(&report, id) {
            Ok(verdicts) => {
                for v in &verdicts {
                    eprintln!("table {id}: {v}");
                }
                ok &= all_gating_pass(&verdicts);
            }
            Err(Error::ReferenceMismatch(msg)) => eprintln!("no comparison: {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(ok)
}

fn compare(report: &Path, table: u8) -> Result<bool> {
    let text = fs::read_to_string(report)?;
    let parsed = parse_csv_report(&text, report)?;
    let verdicts = compare_to_reference(&parsed, table)?;
    for v in &verdicts {
        println!("{v}");
    }
    Ok(all_gating_pass(&verdicts) && parsed.failures.is_empty())
}

fn mesh(family: MeshFamily, n: usize, out: &Path, dump: bool, degree: usize) -> Result<bool> {
    let m = family.generate(n)?;
    let violations = validate(&m);
    for v in &violations {
        eprintln!("{v}");
    }
    write_mesh(&m, out)?;
    if dump {
        for (t, el) in m.elements.iter().enumerate() {
            println!("# element {t}");
            print!("{}", element_quadrature(el, &m.vertices, degree)?);
        }
    }
    Ok(violations.is_empty())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare { report, table } => compare(&report, table),
        Command::Mesh {
            family,
            n,
            out,
            dump_quadrature,
            degree,
        } => mesh(family, n, &out, dump_quadrature, degree),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
