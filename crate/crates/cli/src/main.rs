//! `mvd`: mesh generation, checks, solves, convergence studies and export
//! for merged Voronoi-Delaunay grids.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mvd_core::bvp::Problem;

#[derive(Parser, Debug)]
#[command(name = "mvd", version, about = "Merged Voronoi-Delaunay grid toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate D-nodes and build the grid.
    Generate {
        #[command(flatten)]
        grid: GridArgs,
        /// Mesh output path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Also write the generated point set as CSV.
        #[arg(long)]
        points_out: Option<PathBuf>,
    },
    /// Run admissibility and structural checks on a mesh file.
    Check {
        #[arg(long)]
        mesh: PathBuf,
    },
    /// Assemble and solve one boundary value problem.
    Solve {
        /// Mesh file; if omitted the grid is generated from the grid flags.
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        /// Output stem: writes `<stem>.vtk` and `<stem>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refinement study against an exact solution.
    Converge {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        /// Comma-separated list of n, coarse to fine.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        /// JSON table output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a mesh or solution file to VTK or normalized JSON.
    Export {
        #[arg(long, conflicts_with = "solution", required_unless_present = "solution")]
        mesh: Option<PathBuf>,
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Vtk)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// `square` or a CSV file of convex polygon vertices.
    #[arg(long, default_value = "square")]
    domain: String,
    #[arg(long, value_enum, default_value_t = SchemeArg::Lattice)]
    scheme: SchemeArg,
    /// Intervals per side.
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Jitter amplitude as a fraction of h.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Point file for `--scheme file`.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ProblemArgs {
    #[arg(long, value_parser = parse_problem, default_value = "diffusion")]
    problem: Problem,
    #[arg(long, default_value = "1")]
    k: String,
    #[arg(long, default_value = "1")]
    c: String,
    /// Right-hand side (first component for vector problems).
    #[arg(long)]
    f: Option<String>,
    /// Second right-hand side component.
    #[arg(long)]
    f2: Option<String>,
    #[arg(long)]
    exact: Option<String>,
    #[arg(long)]
    exact2: Option<String>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    maxit: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SchemeArg {
    Lattice,
    Jitter,
    File,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Vtk,
    Json,
}

fn parse_problem(s: &str) -> Result<Problem, String> {
    s.parse::<Problem>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { grid, out, format, points_out } => {
            commands::generate(&grid, out.as_deref(), format, points_out.as_deref())
        }
        Command::Check { mesh } => commands::check(&mesh),
        Command::Solve { mesh, grid, problem, out } => {
            commands::solve(mesh.as_deref(), &grid, &problem, out.as_deref())
        }
        Command::Converge { grid, problem, levels, out } => {
            commands::converge(&grid, &problem, &levels, out.as_deref())
        }
        Command::Export { mesh, solution, format, out } => {
            commands::export(mesh.as_deref(), solution.as_deref(), format, out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
