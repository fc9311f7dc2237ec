//! Solve-and-measure pipeline and refinement studies.

use serde::Serialize;

use crate::bvp::{assemble, cg_solve, CoefficientSet, DiscreteSystem, Problem, ScalarFn, Solution, SolveStats};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::grid::MvdGrid;

/// Exact solution in the global frame.
#[derive(Clone)]
pub enum Exact {
    Scalar(ScalarFn),
    Vector(ScalarFn, ScalarFn),
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub system: DiscreteSystem,
    pub solution: Solution,
    pub stats: SolveStats,
}

/// Assembles and solves; a non-converged solve is returned, not an error.
pub fn solve(grid: &MvdGrid, problem: Problem, coeffs: &CoefficientSet, tol: f64, maxit: usize) -> Result<Solved> {
    let system = assemble(problem, grid, coeffs)?;
    let (u, stats) = cg_solve(&system.matrix, &system.rhs, tol, maxit)?;
    let solution = system.expand(&u, grid)?;
    Ok(Solved { system, solution, stats })
}

/// Discrete L2 error: S-weighted over ω for scalars, S*-weighted in the
/// global frame for vectors.
pub fn l2_error(grid: &MvdGrid, sol: &Solution, exact: &Exact) -> Result<f64> {
    let mut s = 0.0;
    match (sol, exact) {
        (Solution::Scalar(y), Exact::Scalar(u)) => {
            for (k, n) in grid.nodes().iter().enumerate() {
                let d = y.0[k] - u(n.pos)?;
                s += grid.weight(k) * d * d;
            }
        }
        (Solution::Vector(v), Exact::Vector(u1, u2)) => {
            for (m, c) in grid.cells().iter().enumerate() {
                let d = c.to_global(v.0[m]) - Point2::new(u1(c.center)?, u2(c.center)?);
                s += c.area * d.dot(d);
            }
        }
        _ => return Err(Error::Format("exact solution and problem disagree on scalar/vector".into())),
    }
    if !s.is_finite() {
        return Err(Error::Format("error norm is not finite".into()));
    }
    Ok(s.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceLevel {
    pub n: usize,
    /// Largest Delaunay diagonal.
    pub h: f64,
    pub dofs: usize,
    pub iterations: usize,
    pub relative_residual: f64,
    pub error: f64,
    /// Observed order against the previous level.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub problem: Problem,
    pub levels: Vec<ConvergenceLevel>,
}

impl ConvergenceTable {
    pub fn errors_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].error < w[0].error)
    }

    pub fn final_order(&self) -> Option<f64> {
        self.levels.last().and_then(|l| l.order)
    }
}

pub fn observed_order(e0: f64, e1: f64, h0: f64, h1: f64) -> f64 {
    (e0 / e1).ln() / (h0 / h1).ln()
}

/// Runs `problem` on the grid of each level. Fails if fewer than two levels
/// are given, if `h` does not strictly decrease, or if a solve does not
/// converge.
pub fn converge(
    problem: Problem,
    coeffs: &CoefficientSet,
    exact: &Exact,
    levels: &[usize],
    mut make_grid: impl FnMut(usize) -> Result<MvdGrid>,
    tol: f64,
    maxit: usize,
) -> Result<ConvergenceTable> {
    if levels.len() < 2 {
        return Err(Error::Format("a convergence study needs at least two levels".into()));
    }
    let mut out: Vec<ConvergenceLevel> = Vec::with_capacity(levels.len());
    for &n in levels {
        let grid = make_grid(n)?;
        let s = solve(&grid, problem, coeffs, tol, maxit)?;
        if !s.stats.converged {
            return Err(Error::NotConverged { iterations: s.stats.iterations, residual: s.stats.relative_residual });
        }
        let error = l2_error(&grid, &s.solution, exact)?;
        let h = grid.h();
        let order = match out.last() {
            Some(prev) if h >= prev.h => {
                return Err(Error::Format(format!("levels must refine: h = {h} after h = {}", prev.h)));
            }
            Some(prev) => Some(observed_order(prev.error, error, prev.h, h)),
            None => None,
        };
        out.push(ConvergenceLevel {
            n,
            h,
            dofs: s.system.len(),
            iterations: s.stats.iterations,
            relative_residual: s.stats.relative_residual,
            error,
            order,
        });
    }
    Ok(ConvergenceTable { problem, levels: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::{constant, from_fn};
    use crate::generate::{generate_square, Scheme};
    use crate::geometry::ConvexPolygon;
    use crate::grid::mvd_from_points;
    use std::f64::consts::PI;

    fn lattice(n: usize) -> Result<MvdGrid> {
        mvd_from_points(&generate_square(Scheme::Lattice, n, 0)?, &ConvexPolygon::unit_square())
    }

    #[test]
    fn order_formula() {
        assert!((observed_order(4.0, 1.0, 0.2, 0.1) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_level_is_rejected() {
        let co = CoefficientSet::scalar(constant(1.0), constant(1.0), constant(1.0));
        let ex = Exact::Scalar(constant(0.0));
        assert!(converge(Problem::Diffusion, &co, &ex, &[8], lattice, 1e-10, 1000).is_err());
        assert!(converge(Problem::Diffusion, &co, &ex, &[8, 4], lattice, 1e-10, 1000).is_err());
    }

    #[test]
    fn diffusion_converges_on_lattices() {
        let co = CoefficientSet::scalar(
            constant(1.0),
            constant(1.0),
            from_fn(|p| (2.0 * PI * PI + 1.0) * (PI * p.x1).sin() * (PI * p.x2).sin()),
        );
        let ex = Exact::Scalar(from_fn(|p| (PI * p.x1).sin() * (PI * p.x2).sin()));
        let t = converge(Problem::Diffusion, &co, &ex, &[4, 8, 16], lattice, 1e-12, 10_000).unwrap();
        assert!(t.errors_decreasing());
        assert!(t.final_order().unwrap() > 1.5, "{t:?}");
    }

    #[test]
    fn mismatched_exact_is_an_error() {
        let g = lattice(4).unwrap();
        let co = CoefficientSet::scalar(constant(1.0), constant(1.0), constant(1.0));
        let s = solve(&g, Problem::Diffusion, &co, 1e-10, 1000).unwrap();
        assert!(l2_error(&g, &s.solution, &Exact::Vector(constant(0.0), constant(0.0))).is_err());
    }
}
