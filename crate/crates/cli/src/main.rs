use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cubicmm_cli::{
    cmd_curve, cmd_density, cmd_domain, cmd_ortho, cmd_phi_field, cmd_verify, CliError, Format, Measure, Report, RunConfig,
    Suite, EXIT_CHECK, EXIT_OK, EXIT_USAGE,
};

/// Cubic normal matrix model: curve constants, equilibrium densities, the
/// growth domain, multiple orthogonal polynomials and verification suites.
#[derive(Parser, Debug)]
#[command(name = "cubicmm", version)]
struct Cli {
    /// Area parameter t0 (decimal, read at full working precision).
    #[arg(long, global = true, default_value = "0.5")]
    t0: String,
    /// Cubic coupling t3 (decimal).
    #[arg(long, global = true, default_value = "0.25")]
    t3: String,
    /// Working precision in bits (at least 64).
    #[arg(long, global = true, default_value_t = 256)]
    bits: usize,
    /// Sample count: density points, boundary points or grid side.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Polynomial degree for `ortho`.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Suite for `verify`.
    #[arg(long, global = true, value_enum, default_value_t = Suite::Fast)]
    suite: Suite,
    /// Gauss points per panel for integrals against the measures.
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    /// Mesh radius of the second measure, in units of x_star.
    #[arg(long, global = true)]
    r_tail: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Constants of the spectral curve and the discriminant roots.
    Curve,
    /// Density of an equilibrium measure on the positive ray.
    Density {
        #[arg(long, value_enum, default_value_t = Measure::Mu1)]
        measure: Measure,
    },
    /// Boundary of the growth domain with area and moments.
    Domain,
    /// Multiple orthogonal polynomial of degree n.
    Ortho,
    /// Verification suite.
    Verify,
    /// Sign chart of Re phi1.
    PhiField,
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let cfg = RunConfig {
        t0: cli.t0.clone(),
        t3: cli.t3.clone(),
        bits: cli.bits,
        samples: cli.samples,
        n: cli.n,
        format: cli.format,
        seed: cli.seed,
        quad_order: cli.quad_order,
        r_tail: cli.r_tail,
    };
    cfg.ctx()?;
    match &cli.command {
        Command::Curve => cmd_curve(&cfg),
        Command::Density { measure } => cmd_density(&cfg, *measure),
        Command::Domain => cmd_domain(&cfg),
        Command::Ortho => cmd_ortho(&cfg),
        Command::Verify => cmd_verify(&cfg, cli.suite),
        Command::PhiField => cmd_phi_field(&cfg),
    }
}

fn emit(cli: &Cli, text: &str) -> std::io::Result<()> {
    match &cli.out {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let text = match cli.format {
        Format::Json => report.render_json(),
        Format::Csv => report.render_csv(),
    };
    if let Err(e) = emit(&cli, &text) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CHECK as u8);
    }
    eprintln!("{}: {:.3} s", report.command, report.wall_time.as_secs_f64());
    for c in report.failures() {
        eprintln!("FAIL {}: {} (limit {})", c.name, c.measured, c.limit);
    }
    ExitCode::from(if report.all_pass() { EXIT_OK } else { EXIT_CHECK } as u8)
}
