//! Assembly and solution of the four model problems with homogeneous
//! boundary conditions:
//!
//! * diffusion: `−div(k grad u) + c u = f`, `u = 0` on ∂Ω
//! * grad-div: `−grad(k div u) + c u = f`, `u·n = 0` on ∂Ω
//! * rot-rot, scalar unknown: `rot(k rot u) + c u = f`, `u = 0` on ∂Ω
//! * rot-rot, vector unknown: `rot(k rot u) + c u = f`, `u×n = 0` on ∂Ω
//!
//! Each is assembled as `B u = rhs` with `B` symmetric positive definite and
//! `B = W·A`, `W` the diagonal matrix of grid weights.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::Point2;
use crate::grid::{CellField, MvdGrid, NodeField};
use crate::ops::{divergence_matrix, gradient_matrix, rot_scalar_matrix, rot_vector_matrix};
use crate::sparse::{dot, norm2, CsrMatrix, Triplets};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Diffusion,
    #[serde(rename = "graddiv")]
    GradDiv,
    RotrotScalar,
    RotrotVector,
}

impl Problem {
    pub const ALL: [Problem; 4] = [Problem::Diffusion, Problem::GradDiv, Problem::RotrotScalar, Problem::RotrotVector];

    pub fn is_vector(self) -> bool {
        matches!(self, Problem::GradDiv | Problem::RotrotVector)
    }

    pub fn name(self) -> &'static str {
        match self {
            Problem::Diffusion => "diffusion",
            Problem::GradDiv => "graddiv",
            Problem::RotrotScalar => "rotrot-scalar",
            Problem::RotrotVector => "rotrot-vector",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Problem::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown problem '{s}'")))
    }
}

/// A scalar function of position that may fail (e.g. a parsed expression
/// dividing by zero).
pub type ScalarFn = Arc<dyn Fn(Point2) -> Result<f64> + Send + Sync>;

pub fn constant(v: f64) -> ScalarFn {
    Arc::new(move |_| Ok(v))
}

pub fn from_fn(f: impl Fn(Point2) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(move |p| Ok(f(p)))
}

pub fn from_expr(e: Expr) -> ScalarFn {
    Arc::new(move |p| e.eval(p).map_err(Error::from))
}

#[derive(Clone)]
pub enum Source {
    Scalar(ScalarFn),
    /// Global-frame components.
    Vector(ScalarFn, ScalarFn),
}

/// Coefficients `k`, `c` and right-hand side `f`. Both `k` and `c` must be
/// strictly positive at every point where they are sampled.
#[derive(Clone)]
pub struct CoefficientSet {
    pub k: ScalarFn,
    pub c: ScalarFn,
    pub f: Source,
}

impl CoefficientSet {
    pub fn scalar(k: ScalarFn, c: ScalarFn, f: ScalarFn) -> Self {
        CoefficientSet { k, c, f: Source::Scalar(f) }
    }

    pub fn vector(k: ScalarFn, c: ScalarFn, f1: ScalarFn, f2: ScalarFn) -> Self {
        CoefficientSet { k, c, f: Source::Vector(f1, f2) }
    }
}

fn sample_bounded(name: &'static str, f: &ScalarFn, p: Point2, lo: &mut f64) -> Result<f64> {
    let v = f(p)?;
    if !v.is_finite() {
        return Err(Error::NonFinite(p));
    }
    if v <= 0.0 {
        return Err(Error::CoefficientBound { name, value: v, at: p });
    }
    *lo = lo.min(v);
    Ok(v)
}

fn sample_finite(f: &ScalarFn, p: Point2) -> Result<f64> {
    let v = f(p)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dof {
    Node(usize),
    /// Cell id and local component (0 along `e1`, 1 along `e2`).
    Cell(usize, u8),
}

#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    pub problem: Problem,
    pub matrix: CsrMatrix,
    /// Grid weight of each dof: S at nodes, S* at cells.
    pub weight: Vec<f64>,
    pub rhs: Vec<f64>,
    pub dofs: Vec<Dof>,
    /// Eliminated dofs; the boundary conditions pin them to zero.
    pub pinned: Vec<(Dof, f64)>,
    /// Smallest sampled values of `k` and `c`.
    pub k0: f64,
    pub c0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Solution {
    Scalar(NodeField),
    Vector(CellField),
}

impl DiscreteSystem {
    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// Scatters a dof vector into a full grid function, pinned entries
    /// included.
    pub fn expand(&self, u: &[f64], grid: &MvdGrid) -> Result<Solution> {
        if u.len() != self.dofs.len() {
            return Err(Error::Dimension { expected: self.dofs.len(), got: u.len() });
        }
        let all = self.dofs.iter().zip(u.iter().copied()).chain(self.pinned.iter().map(|(d, v)| (d, *v)));
        if self.problem.is_vector() {
            let mut f = CellField::zeros(grid);
            for (d, v) in all {
                if let Dof::Cell(m, c) = *d {
                    f.0[m][c as usize] = v;
                }
            }
            Ok(Solution::Vector(f))
        } else {
            let mut f = NodeField::zeros(grid);
            for (d, v) in all {
                if let Dof::Node(k) = *d {
                    f.0[k] = v;
                }
            }
            Ok(Solution::Scalar(f))
        }
    }

    /// Gathers the free dofs of a full grid function.
    pub fn restrict(&self, s: &Solution) -> Vec<f64> {
        self.dofs
            .iter()
            .map(|d| match (d, s) {
                (Dof::Node(k), Solution::Scalar(f)) => f.0[*k],
                (Dof::Cell(m, c), Solution::Vector(f)) => f.0[*m][*c as usize],
                _ => 0.0,
            })
            .collect()
    }
}

/// `Opᵀ · diag(d) · Op` restricted to the columns in `cols` (original column
/// → dof index).
fn gram(op: &CsrMatrix, d: &[f64], cols: &[Option<usize>], n: usize) -> CsrMatrix {
    let mut t = Triplets::new(n, n);
    for (r, &w) in d.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row: Vec<(usize, f64)> = op.row(r).filter_map(|(j, v)| cols[j].map(|i| (i, v))).collect();
        for &(i, a) in &row {
            for &(j, b) in &row {
                t.push(i, j, w * a * b);
            }
        }
    }
    t.build()
}

fn add_diagonal(b: CsrMatrix, diag: &[f64]) -> CsrMatrix {
    let n = b.nrows();
    let mut t = Triplets::new(n, n);
    for i in 0..n {
        for (j, v) in b.row(i) {
            t.push(i, j, v);
        }
        t.push(i, i, diag[i]);
    }
    t.build()
}

fn assemble_scalar(grid: &MvdGrid, coeffs: &CoefficientSet, problem: Problem) -> Result<DiscreteSystem> {
    let Source::Scalar(f) = &coeffs.f else {
        return Err(Error::Format(format!("{problem} needs a scalar right-hand side")));
    };
    let mut cols = vec![None; grid.num_nodes()];
    let mut dofs = Vec::new();
    let mut pinned = Vec::new();
    for k in 0..grid.num_nodes() {
        if grid.is_interior(k) {
            cols[k] = Some(dofs.len());
            dofs.push(Dof::Node(k));
        } else {
            pinned.push((Dof::Node(k), 0.0));
        }
    }
    let (mut k0, mut c0) = (f64::INFINITY, f64::INFINITY);
    let mut d = vec![0.0; 2 * grid.num_cells()];
    for (m, c) in grid.cells().iter().enumerate() {
        let kv = sample_bounded("k", &coeffs.k, c.center, &mut k0)?;
        d[2 * m] = c.area * kv;
        d[2 * m + 1] = c.area * kv;
    }
    let op = match problem {
        Problem::Diffusion => gradient_matrix(grid),
        _ => rot_scalar_matrix(grid),
    };
    let stiff = gram(&op, &d, &cols, dofs.len());
    let mut mass = Vec::with_capacity(dofs.len());
    let mut weight = Vec::with_capacity(dofs.len());
    let mut rhs = Vec::with_capacity(dofs.len());
    for dof in &dofs {
        let Dof::Node(k) = *dof else { unreachable!() };
        let x = grid.node(k).pos;
        let s = grid.weight(k);
        let cv = sample_bounded("c", &coeffs.c, x, &mut c0)?;
        mass.push(cv * s);
        weight.push(s);
        rhs.push(s * sample_finite(f, x)?);
    }
    Ok(DiscreteSystem {
        problem,
        matrix: add_diagonal(stiff, &mass),
        weight,
        rhs,
        dofs,
        pinned,
        k0,
        c0,
    })
}

fn assemble_vector(grid: &MvdGrid, coeffs: &CoefficientSet, problem: Problem) -> Result<DiscreteSystem> {
    let Source::Vector(f1, f2) = &coeffs.f else {
        return Err(Error::Format(format!("{problem} needs a vector right-hand side")));
    };
    // boundary cells: grad-div keeps the tangential e2 component,
    // rot-rot keeps the normal e1 component
    let fixed: u8 = if problem == Problem::GradDiv { 0 } else { 1 };
    let mut cols = vec![None; 2 * grid.num_cells()];
    let mut dofs = Vec::new();
    let mut pinned = Vec::new();
    for (m, c) in grid.cells().iter().enumerate() {
        for comp in 0..2u8 {
            if c.boundary && comp == fixed {
                pinned.push((Dof::Cell(m, comp), 0.0));
            } else {
                cols[2 * m + comp as usize] = Some(dofs.len());
                dofs.push(Dof::Cell(m, comp));
            }
        }
    }
    let (mut k0, mut c0) = (f64::INFINITY, f64::INFINITY);
    let mut d = vec![0.0; grid.num_nodes()];
    for (k, dk) in d.iter_mut().enumerate() {
        if grid.has_control_volume(k) {
            *dk = grid.weight(k) * sample_bounded("k", &coeffs.k, grid.node(k).pos, &mut k0)?;
        }
    }
    let op = match problem {
        Problem::GradDiv => divergence_matrix(grid),
        _ => rot_vector_matrix(grid),
    };
    let stiff = gram(&op, &d, &cols, dofs.len());
    let mut mass = Vec::with_capacity(dofs.len());
    let mut weight = Vec::with_capacity(dofs.len());
    let mut rhs = Vec::with_capacity(dofs.len());
    let mut cell_data = Vec::with_capacity(grid.num_cells());
    for c in grid.cells() {
        let cv = sample_bounded("c", &coeffs.c, c.center, &mut c0)?;
        let fv = Point2::new(sample_finite(f1, c.center)?, sample_finite(f2, c.center)?);
        cell_data.push((cv, c.to_local(fv)));
    }
    for dof in &dofs {
        let Dof::Cell(m, comp) = *dof else { unreachable!() };
        let s = grid.cell(m).area;
        let (cv, fl) = cell_data[m];
        mass.push(cv * s);
        weight.push(s);
        rhs.push(s * fl[comp as usize]);
    }
    Ok(DiscreteSystem {
        problem,
        matrix: add_diagonal(stiff, &mass),
        weight,
        rhs,
        dofs,
        pinned,
        k0,
        c0,
    })
}

/// Dofs are the interior nodes; `B = Gᵀ diag(S* k) G + diag(S c)`.
pub fn assemble_diffusion(grid: &MvdGrid, coeffs: &CoefficientSet) -> Result<DiscreteSystem> {
    assemble_scalar(grid, coeffs, Problem::Diffusion)
}

/// Same as diffusion with the scalar rotor in place of the gradient.
pub fn assemble_rotrot_scalar(grid: &MvdGrid, coeffs: &CoefficientSet) -> Result<DiscreteSystem> {
    assemble_scalar(grid, coeffs, Problem::RotrotScalar)
}

/// Dofs are both components on interior cells and `e2` on boundary cells;
/// `B = Dᵀ diag(S k) D + diag(S* c)`.
pub fn assemble_graddiv(grid: &MvdGrid, coeffs: &CoefficientSet) -> Result<DiscreteSystem> {
    assemble_vector(grid, coeffs, Problem::GradDiv)
}

/// Dofs are both components on interior cells and `e1` on boundary cells;
/// `B = Rᵀ diag(S k) R + diag(S* c)`.
pub fn assemble_rotrot_vector(grid: &MvdGrid, coeffs: &CoefficientSet) -> Result<DiscreteSystem> {
    assemble_vector(grid, coeffs, Problem::RotrotVector)
}

pub fn assemble(problem: Problem, grid: &MvdGrid, coeffs: &CoefficientSet) -> Result<DiscreteSystem> {
    match problem {
        Problem::Diffusion | Problem::RotrotScalar => assemble_scalar(grid, coeffs, problem),
        Problem::GradDiv | Problem::RotrotVector => assemble_vector(grid, coeffs, problem),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// ‖B u − rhs‖ / ‖rhs‖, recomputed from the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Running out of iterations is not an error: the last iterate is returned
/// with `converged = false`.
pub fn cg_solve(b: &CsrMatrix, rhs: &[f64], tol: f64, maxit: usize) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.nrows();
    if b.ncols() != n || rhs.len() != n {
        return Err(Error::Dimension { expected: n, got: rhs.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::Format(format!("tolerance {tol} must be positive")));
    }
    let diag = b.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::NotPositiveDefinite(i));
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let bnorm = norm2(rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0, converged: true }));
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut it = 0;
    while it < maxit && norm2(&r) > tol * bnorm {
        b.mul_vec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::NotPositiveDefinite(0));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        it += 1;
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = b.mul_vec(&x)?;
    let true_res = res.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / bnorm;
    let recursive = norm2(&r) / bnorm;
    Ok((
        x,
        SolveStats {
            iterations: it,
            relative_residual: true_res,
            converged: recursive <= tol,
        },
    ))
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SpdReport {
    pub max_asymmetry: f64,
    pub min_rayleigh: f64,
    pub trials: usize,
}

impl SpdReport {
    pub fn positive(&self) -> bool {
        self.min_rayleigh > 0.0
    }
}

/// Asymmetry of `b` and the smallest Rayleigh quotient `xᵀBx / xᵀx` over
/// `trials` random vectors.
pub fn spd_probe(b: &CsrMatrix, trials: usize, seed: u64) -> SpdReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = b.nrows();
    let mut min_q = f64::INFINITY;
    for _ in 0..trials {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bx = b.mul_vec(&x).expect("square matrix");
        min_q = min_q.min(dot(&x, &bx) / dot(&x, &x));
    }
    SpdReport { max_asymmetry: b.max_asymmetry(), min_rayleigh: min_q, trials }
}
