use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cradle::pipeline::DesignRequest;
use cradle::transforms::parse_surgery;
use cradle::Boundary;
use cradle_cli::{
    cmd_design, cmd_schedule, cmd_simulate, cmd_verify, emit, parse_times, read_document, render_report,
    write_report_csv, write_rows_csv, write_schedule_csv, CliError, CliResult,
};

#[derive(Parser)]
#[command(name = "cradle", version, about = "Analytic Newton's cradle chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    FixedFixed,
    FreeFree,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::FixedFixed => Boundary::FixedFixed,
            BoundaryArg::FreeFree => Boundary::FreeFree,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long = "N", visible_alias = "n")]
    n: usize,
    #[arg(long)]
    r: i64,
    #[arg(long, default_value_t = 0)]
    k0: i64,
    #[arg(long, default_value_t = 1)]
    k1: i64,
    #[arg(long, value_enum, default_value = "free-free")]
    boundary: BoundaryArg,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, default_value_t = 1.0)]
    m0: f64,
    #[arg(long)]
    alpha: Option<f64>,
    /// Adjacent pairs to remove, e.g. "5,6;2,3".
    #[arg(long)]
    surgery: Option<String>,
    /// Largest N accepted before the weights become too ill-conditioned.
    #[arg(long, env = "CRADLE_MAX_N", default_value_t = 16)]
    max_n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a chain and write its JSON document.
    Design(DesignArgs),
    /// Sample the momenta after a kick on the first mass.
    Simulate {
        spec: PathBuf,
        /// "auto" or a comma list of times.
        #[arg(long, default_value = "auto")]
        times: String,
        #[arg(long, default_value_t = 1.0)]
        pbar: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List fractional revival times and predicted end momenta.
    Schedule {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-derive and check every property of a chain document.
    Verify {
        spec: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        pbar: f64,
        /// Plain-text report when absent.
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn request(a: &DesignArgs) -> CliResult<DesignRequest> {
    let mut req = DesignRequest::new(a.boundary.into(), a.r, a.k0, a.k1, a.n);
    req.omega = a.omega;
    req.m0 = a.m0;
    req.alpha = a.alpha;
    req.max_n = a.max_n;
    if let Some(s) = &a.surgery {
        req.surgery = parse_surgery(s)?;
    }
    Ok(req)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Design(a) => {
            let doc = cmd_design(&request(&a)?)?;
            emit(a.out.as_deref(), doc.to_json().as_bytes())
        }
        Command::Simulate { spec, times, pbar, out } => {
            let doc = read_document(&spec)?;
            let rows = cmd_simulate(&doc, &parse_times(&times)?, pbar)?;
            let mut buf = Vec::new();
            write_rows_csv(&rows, &mut buf)?;
            emit(out.as_deref(), &buf)
        }
        Command::Schedule { spec, format, out } => {
            let doc = read_document(&spec)?;
            let sched = cmd_schedule(&doc)?;
            let mut buf = Vec::new();
            match format {
                Format::Json => {
                    buf = serde_json::to_vec_pretty(&sched).map_err(|e| CliError::Io(e.to_string()))?;
                    buf.push(b'\n');
                }
                Format::Csv => write_schedule_csv(&sched, &mut buf)?,
            }
            emit(out.as_deref(), &buf)
        }
        Command::Verify { spec, pbar, format, out } => {
            let doc = read_document(&spec)?;
            let (report, result) = match cmd_verify(&doc, pbar) {
                Ok(r) => (r, Ok(())),
                Err(CliError::Verify(r)) => {
                    let r = *r;
                    (r.clone(), Err(CliError::Verify(Box::new(r))))
                }
                Err(e) => return Err(e),
            };
            let body = match format {
                Some(Format::Json) => {
                    let mut b = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
                    b.push(b'\n');
                    b
                }
                Some(Format::Csv) => {
                    let mut b = Vec::new();
                    write_report_csv(&report, &mut b)?;
                    b
                }
                None => render_report(&report).into_bytes(),
            };
            emit(out.as_deref(), &body)?;
            result
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cradle: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
