use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mvd_core::bvp::{from_expr, CoefficientSet, Problem, ScalarFn, Solution};
use mvd_core::expr;
use mvd_core::generate::{check_point_file, generate_polygon, generate_square, Scheme};
use mvd_core::geometry::ConvexPolygon;
use mvd_core::grid::{admissibility_report, mvd_from_points, MvdGrid};
use mvd_core::io::{parse_points_csv, read_mesh_json, write_mesh_json, write_points_csv, write_vtk, SolutionFile};
use mvd_core::study::{self, ConvergenceLevel, Exact};
use mvd_core::Error;
use serde::Serialize;

use crate::{Format, GridArgs, ProblemArgs, SchemeArg};

pub const INTERNAL: u8 = 1;
pub const IO: u8 = 2;
pub const NOT_CONVERGED: u8 = 3;
pub const COEFFICIENT: u8 = 4;
pub const INADMISSIBLE: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Format(_) => IO,
            Error::NotConverged { .. } => NOT_CONVERGED,
            Error::CoefficientBound { .. } | Error::Eval(_) | Error::Parse(_) | Error::NonFinite(_) => COEFFICIENT,
            Error::Inadmissible(_)
            | Error::DegenerateTriangle
            | Error::Collinear
            | Error::DuplicatePoints(_)
            | Error::PointOutsideDomain { .. }
            | Error::MissingDomainVertex(_)
            | Error::InvalidPolygon(_)
            | Error::DegenerateControlVolume(_) => INADMISSIBLE,
            _ => INTERNAL,
        };
        Failure::new(code, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(IO, format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::new(IO, format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::new(IO, format!("stdout: {e}"))),
    }
}

fn read_mesh(path: &Path) -> Result<MvdGrid, Failure> {
    read_mesh_json(&read(path)?).map_err(|e| Failure::new(IO, format!("{}: {e}", path.display())))
}

fn domain(args: &GridArgs) -> Result<ConvexPolygon, Failure> {
    if args.domain == "square" {
        return Ok(ConvexPolygon::unit_square());
    }
    let path = Path::new(&args.domain);
    let pts = parse_points_csv(&read(path)?).map_err(|e| Failure::new(IO, format!("{}: {e}", path.display())))?;
    ConvexPolygon::new(pts.into_iter().map(|(_, p)| p).collect())
        .map_err(|e| Failure::new(IO, format!("{}: {e}", path.display())))
}

fn points(args: &GridArgs, dom: &ConvexPolygon, n: usize) -> Result<Vec<mvd_core::geometry::Point2>, Failure> {
    let square = args.domain == "square";
    let scheme = match args.scheme {
        SchemeArg::Lattice => Scheme::Lattice,
        SchemeArg::Jitter => Scheme::Jitter(args.alpha),
        SchemeArg::File => {
            let path = args
                .points
                .as_deref()
                .ok_or_else(|| Failure::new(IO, "--scheme file needs --points"))?;
            let parsed =
                parse_points_csv(&read(path)?).map_err(|e| Failure::new(IO, format!("{}: {e}", path.display())))?;
            return check_point_file(&parsed, dom).map_err(|e| Failure::new(IO, format!("{}: {e}", path.display())));
        }
    };
    let pts = if square {
        generate_square(scheme, n, args.seed)
    } else {
        generate_polygon(dom, scheme, n, args.seed)
    };
    pts.map_err(|e| Failure::new(IO, e.to_string()))
}

fn build(args: &GridArgs, n: usize) -> Result<(Vec<mvd_core::geometry::Point2>, MvdGrid), Failure> {
    let dom = domain(args)?;
    let pts = points(args, &dom, n)?;
    let grid = mvd_from_points(&pts, &dom).map_err(|e| Failure::new(INADMISSIBLE, e.to_string()))?;
    Ok((pts, grid))
}

/// Violations that make a grid unusable: structural invariants plus the
/// admissibility conditions, each naming the offending cells.
fn problems(grid: &MvdGrid) -> Vec<String> {
    let mut bad = grid.verify();
    let r = admissibility_report(grid);
    if !r.inadmissible_cells.is_empty() {
        bad.push(format!("inadmissible cells (non-positive dual length): {:?}", r.inadmissible_cells));
    }
    bad
}

fn require_valid(grid: &MvdGrid) -> Outcome {
    let bad = problems(grid);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(INADMISSIBLE, format!("mesh fails its checks:\n  {}", bad.join("\n  "))))
    }
}

pub fn generate(args: &GridArgs, out: Option<&Path>, format: Format, points_out: Option<&Path>) -> Outcome {
    let (pts, grid) = build(args, args.n)?;
    if let Some(p) = points_out {
        write_out(Some(p), &write_points_csv(&pts))?;
    }
    let text = match format {
        Format::Json => write_mesh_json(&grid),
        Format::Vtk => write_vtk(&grid, &[], &[])?,
    };
    write_out(out, &text)?;
    eprintln!(
        "{} D-nodes, {} V-nodes, {} cells, h = {}",
        grid.num_d(),
        grid.num_nodes() - grid.num_d(),
        grid.num_cells(),
        grid.h()
    );
    Ok(())
}

pub fn check(mesh: &Path) -> Outcome {
    let grid = read_mesh(mesh)?;
    let r = admissibility_report(&grid);
    let sum = |range: std::ops::Range<usize>| -> f64 { range.map(|k| grid.measure(k)).sum() };
    let sum_cells: f64 = grid.cells().iter().map(|c| c.area).sum();
    let sum_s: f64 = (0..grid.num_nodes()).map(|k| grid.weight(k)).sum();
    println!("nodes: {} D, {} V; cells: {}", grid.num_d(), grid.num_nodes() - grid.num_d(), grid.num_cells());
    println!("meas(Omega) = {:.16}", grid.meas_domain());
    println!("sum S* = {:.16}", sum_cells);
    println!("sum S^D = {:.16}", sum(0..grid.num_d()));
    println!("sum S^V = {:.16}", sum(grid.num_d()..grid.num_nodes()));
    println!("sum S = {:.16}", sum_s);
    println!("L_D in [{:e}, {:e}], L_V in [{:e}, {:e}]", r.min_l_d, r.max_l_d, r.min_l_v, r.max_l_v);
    println!("min S* = {:e}", r.min_cell_area);
    if !r.circumcenters_outside.is_empty() {
        println!(
            "note: {} circumcenters lie outside their triangles: {:?}",
            r.circumcenters_outside.len(),
            r.circumcenters_outside
        );
    }
    if !r.non_straddling_cells.is_empty() {
        println!(
            "note: {} cells have a Voronoi diagonal that misses the Delaunay edge: {:?}",
            r.non_straddling_cells.len(),
            r.non_straddling_cells
        );
    }
    let bad = problems(&grid);
    if bad.is_empty() {
        println!("ok");
        Ok(())
    } else {
        for b in &bad {
            println!("FAIL {b}");
        }
        Err(Failure::new(INADMISSIBLE, format!("{} check(s) failed", bad.len())))
    }
}

fn expression(flag: &str, text: &str) -> Result<ScalarFn, Failure> {
    match expr::parse(text) {
        Ok(e) => Ok(from_expr(e)),
        Err(e) => {
            let caret = " ".repeat(e.offset);
            Err(Failure::new(
                COEFFICIENT,
                format!("--{flag}: {}\n  {text}\n  {caret}^", e.message),
            ))
        }
    }
}

fn required<'a>(flag: &str, v: &'a Option<String>, problem: Problem) -> Result<&'a str, Failure> {
    v.as_deref().ok_or_else(|| Failure::new(IO, format!("{problem} needs --{flag}")))
}

fn coefficients(p: &ProblemArgs) -> Result<CoefficientSet, Failure> {
    let k = expression("k", &p.k)?;
    let c = expression("c", &p.c)?;
    let f = expression("f", required("f", &p.f, p.problem)?)?;
    if p.problem.is_vector() {
        let f2 = expression("f2", required("f2", &p.f2, p.problem)?)?;
        Ok(CoefficientSet::vector(k, c, f, f2))
    } else {
        Ok(CoefficientSet::scalar(k, c, f))
    }
}

fn exact(p: &ProblemArgs) -> Result<Option<Exact>, Failure> {
    let Some(u) = p.exact.as_deref() else {
        return Ok(None);
    };
    let u = expression("exact", u)?;
    if p.problem.is_vector() {
        let u2 = expression("exact2", required("exact2", &p.exact2, p.problem)?)?;
        Ok(Some(Exact::Vector(u, u2)))
    } else {
        Ok(Some(Exact::Scalar(u)))
    }
}

fn stem(out: &Path, ext: &str) -> PathBuf {
    match out.extension().and_then(|e| e.to_str()) {
        Some("vtk" | "json") => out.with_extension(ext),
        _ => {
            let mut s = out.as_os_str().to_owned();
            s.push(".");
            s.push(ext);
            PathBuf::from(s)
        }
    }
}

pub fn solve(mesh: Option<&Path>, grid_args: &GridArgs, p: &ProblemArgs, out: Option<&Path>) -> Outcome {
    let coeffs = coefficients(p)?;
    let exact = exact(p)?;
    let grid = match mesh {
        Some(path) => read_mesh(path)?,
        None => build(grid_args, grid_args.n)?.1,
    };
    require_valid(&grid)?;
    let s = study::solve(&grid, p.problem, &coeffs, p.tol, p.maxit)?;
    println!("problem: {}", p.problem);
    println!("dofs: {}", s.system.len());
    println!("iterations: {}", s.stats.iterations);
    println!("relative residual: {:e}", s.stats.relative_residual);
    println!("converged: {}", s.stats.converged);
    if !s.stats.converged {
        return Err(Failure::new(
            NOT_CONVERGED,
            format!(
                "no convergence to {:e} within {} iterations (relative residual {:e})",
                p.tol, s.stats.iterations, s.stats.relative_residual
            ),
        ));
    }
    let l2 = match &exact {
        Some(e) => {
            let err = study::l2_error(&grid, &s.solution, e)?;
            println!("L2 error: {err:e}");
            Some(err)
        }
        None => None,
    };
    if let Some(out) = out {
        let vtk = match &s.solution {
            Solution::Scalar(y) => write_vtk(&grid, &[("u", y)], &[])?,
            Solution::Vector(v) => write_vtk(&grid, &[], &[("u", v)])?,
        };
        write_out(Some(&stem(out, "vtk")), &vtk)?;
        let json = SolutionFile::new(&grid, p.problem, &s.solution, &s.stats, l2).to_json();
        write_out(Some(&stem(out, "json")), &json)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceReport<'a> {
    format: &'static str,
    problem: Problem,
    domain: &'a str,
    scheme: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    seed: u64,
    k: &'a str,
    c: &'a str,
    f: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    f2: Option<&'a str>,
    exact: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact2: Option<&'a str>,
    tol: f64,
    levels: &'a [ConvergenceLevel],
}

pub fn converge(grid_args: &GridArgs, p: &ProblemArgs, levels: &[usize], out: Option<&Path>) -> Outcome {
    if levels.len() < 2 {
        return Err(Failure::new(IO, "a convergence study needs at least two --levels"));
    }
    if grid_args.scheme == SchemeArg::File {
        return Err(Failure::new(IO, "--scheme file has no refinement levels"));
    }
    let coeffs = coefficients(p)?;
    let exact = exact(p)?.ok_or_else(|| Failure::new(IO, "converge needs --exact"))?;
    // Grid failures are carried through the core error type and mapped back
    // to an exit code afterwards.
    let make = |n: usize| {
        let (_, g) = build(grid_args, n).map_err(|f| Error::Inadmissible(f.message))?;
        let bad = problems(&g);
        if bad.is_empty() {
            Ok(g)
        } else {
            Err(Error::Inadmissible(format!("level n = {n}: {}", bad.join("; "))))
        }
    };
    let table = study::converge(p.problem, &coeffs, &exact, levels, make, p.tol, p.maxit)?;

    println!("problem: {}", p.problem);
    println!("{:>6} {:>12} {:>8} {:>6} {:>12} {:>7}", "n", "h", "dofs", "iters", "L2 error", "order");
    for l in &table.levels {
        let order = l.order.map_or_else(|| "-".to_string(), |o| format!("{o:.3}"));
        println!("{:>6} {:>12.5e} {:>8} {:>6} {:>12.5e} {:>7}", l.n, l.h, l.dofs, l.iterations, l.error, order);
    }
    if !table.errors_decreasing() {
        println!("note: errors do not decrease monotonically");
    }
    if let Some(out) = out {
        let report = ConvergenceReport {
            format: "mvd-convergence-1",
            problem: p.problem,
            domain: &grid_args.domain,
            scheme: match grid_args.scheme {
                SchemeArg::Lattice => "lattice",
                SchemeArg::Jitter => "jitter",
                SchemeArg::File => "file",
            },
            alpha: (grid_args.scheme == SchemeArg::Jitter).then_some(grid_args.alpha),
            seed: grid_args.seed,
            k: &p.k,
            c: &p.c,
            f: p.f.as_deref().unwrap_or_default(),
            f2: p.f2.as_deref(),
            exact: p.exact.as_deref().unwrap_or_default(),
            exact2: p.exact2.as_deref(),
            tol: p.tol,
            levels: &table.levels,
        };
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        write_out(Some(out), &text)?;
    }
    Ok(())
}

pub fn export(mesh: Option<&Path>, solution: Option<&Path>, format: Format, out: Option<&Path>) -> Outcome {
    let text = match (mesh, solution) {
        (Some(m), _) => {
            let grid = read_mesh(m)?;
            match format {
                Format::Vtk => write_vtk(&grid, &[], &[])?,
                Format::Json => write_mesh_json(&grid),
            }
        }
        (None, Some(s)) => {
            let bad = |e: Error| Failure::new(IO, format!("{}: {e}", s.display()));
            let file = SolutionFile::from_json(&read(s)?).map_err(bad)?;
            match format {
                Format::Json => file.to_json(),
                Format::Vtk => {
                    let (grid, nf, cf) = file.fields().map_err(bad)?;
                    let scalars: Vec<(&str, &_)> = nf.iter().map(|y| ("u", y)).collect();
                    let vectors: Vec<(&str, &_)> = cf.iter().map(|v| ("u", v)).collect();
                    write_vtk(&grid, &scalars, &vectors)?
                }
            }
        }
        (None, None) => return Err(Failure::new(IO, "export needs --mesh or --solution")),
    };
    write_out(out, &text)
}
