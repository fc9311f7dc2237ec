//! Grid operators on the merged grid and contour-integral oracles.
//!
//! Scalar functions live on the nodes ω, vectors on the cells ω* in each
//! cell's local frame `(e1, e2)`: `e1` along the Voronoi diagonal, `e2`
//! along the Delaunay diagonal. Vector fields are flattened as `2m + c` for
//! matrices.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::grid::{Cell, CellField, MvdGrid, NodeField, NodeRole};
use crate::sparse::{CsrMatrix, Triplets};

fn check_nodes(y: &NodeField, grid: &MvdGrid) -> Result<()> {
    if y.0.len() != grid.num_nodes() {
        return Err(Error::SupportMismatch(format!(
            "node field has {} values, grid has {} nodes",
            y.0.len(),
            grid.num_nodes()
        )));
    }
    Ok(())
}

fn check_cells(v: &CellField, grid: &MvdGrid) -> Result<()> {
    if v.0.len() != grid.num_cells() {
        return Err(Error::SupportMismatch(format!(
            "cell field has {} values, grid has {} cells",
            v.0.len(),
            grid.num_cells()
        )));
    }
    Ok(())
}

fn check_volume(grid: &MvdGrid, k: usize) -> Result<()> {
    if k >= grid.num_nodes() {
        return Err(Error::SupportMismatch(format!("node {k} does not exist")));
    }
    if !grid.has_control_volume(k) {
        return Err(Error::DegenerateControlVolume(k));
    }
    Ok(())
}

/// Local gradient from the values at `[d_tail, d_head, v_tail, v_head]`.
#[inline]
pub fn grad_cell(c: &Cell, y: [f64; 4]) -> [f64; 2] {
    [(y[3] - y[2]) / c.l_v, (y[1] - y[0]) / c.l_d]
}

#[inline]
fn corner_values(c: &Cell, y: &NodeField) -> [f64; 4] {
    [y.0[c.d_tail], y.0[c.d_head], y.0[c.v_tail], y.0[c.v_head]]
}

pub fn grad_h(y: &NodeField, grid: &MvdGrid) -> Result<CellField> {
    check_nodes(y, grid)?;
    Ok(CellField(grid.cells().iter().map(|c| grad_cell(c, corner_values(c, y))).collect()))
}

/// Scalar-to-vector rotor `(∂w/∂x2, −∂w/∂x1)`; cell by cell this is
/// `J·grad_h` with `J(a, b) = (b, −a)`.
pub fn rot2d_scalar_h(y: &NodeField, grid: &MvdGrid) -> Result<CellField> {
    check_nodes(y, grid)?;
    Ok(CellField(
        grid.cells()
            .iter()
            .map(|c| {
                let y = corner_values(c, y);
                [(y[1] - y[0]) / c.l_d, -(y[3] - y[2]) / c.l_v]
            })
            .collect(),
    ))
}

/// Outward flux through the control volume of `k`, divided by its measure.
/// Boundary D-nodes see no flux through ∂Ω.
pub fn div_h(v: &CellField, grid: &MvdGrid, k: usize) -> Result<f64> {
    check_cells(v, grid)?;
    check_volume(grid, k)?;
    Ok(div_at(v, grid, k))
}

fn div_at(v: &CellField, grid: &MvdGrid, k: usize) -> f64 {
    let is_v = grid.node(k).role.is_voronoi();
    let mut s = 0.0;
    for &m in grid.node_cells(k) {
        let c = grid.cell(m);
        let sg = c.sigma(k).unwrap();
        s += if is_v { sg * v.0[m][0] * c.l_d } else { sg * v.0[m][1] * c.l_v };
    }
    s / grid.measure(k)
}

/// Counterclockwise circulation around the control volume of `k`, divided
/// by its measure. Boundary D-nodes see no circulation along ∂Ω.
pub fn rot2d_vector_h(v: &CellField, grid: &MvdGrid, k: usize) -> Result<f64> {
    check_cells(v, grid)?;
    check_volume(grid, k)?;
    Ok(rot_at(v, grid, k))
}

fn rot_at(v: &CellField, grid: &MvdGrid, k: usize) -> f64 {
    let is_v = grid.node(k).role.is_voronoi();
    let mut s = 0.0;
    for &m in grid.node_cells(k) {
        let c = grid.cell(m);
        let sg = c.sigma(k).unwrap();
        s += if is_v { sg * v.0[m][1] * c.l_d } else { -sg * v.0[m][0] * c.l_v };
    }
    s / grid.measure(k)
}

/// `div_h` at every node; clip nodes, which have no control volume, get 0.
pub fn div_h_field(v: &CellField, grid: &MvdGrid) -> Result<NodeField> {
    check_cells(v, grid)?;
    Ok(NodeField(
        (0..grid.num_nodes())
            .map(|k| if grid.has_control_volume(k) { div_at(v, grid, k) } else { 0.0 })
            .collect(),
    ))
}

/// `rot2d_vector_h` at every node; clip nodes get 0.
pub fn rot2d_vector_h_field(v: &CellField, grid: &MvdGrid) -> Result<NodeField> {
    check_cells(v, grid)?;
    Ok(NodeField(
        (0..grid.num_nodes())
            .map(|k| if grid.has_control_volume(k) { rot_at(v, grid, k) } else { 0.0 })
            .collect(),
    ))
}

/// Matrix of `grad_h`, shape `2·cells × nodes`.
pub fn gradient_matrix(grid: &MvdGrid) -> CsrMatrix {
    let mut t = Triplets::new(2 * grid.num_cells(), grid.num_nodes());
    for (m, c) in grid.cells().iter().enumerate() {
        t.push(2 * m, c.v_tail, -1.0 / c.l_v);
        t.push(2 * m, c.v_head, 1.0 / c.l_v);
        t.push(2 * m + 1, c.d_tail, -1.0 / c.l_d);
        t.push(2 * m + 1, c.d_head, 1.0 / c.l_d);
    }
    t.build()
}

/// Matrix of `rot2d_scalar_h`, shape `2·cells × nodes`.
pub fn rot_scalar_matrix(grid: &MvdGrid) -> CsrMatrix {
    let mut t = Triplets::new(2 * grid.num_cells(), grid.num_nodes());
    for (m, c) in grid.cells().iter().enumerate() {
        t.push(2 * m, c.d_tail, -1.0 / c.l_d);
        t.push(2 * m, c.d_head, 1.0 / c.l_d);
        t.push(2 * m + 1, c.v_tail, 1.0 / c.l_v);
        t.push(2 * m + 1, c.v_head, -1.0 / c.l_v);
    }
    t.build()
}

/// Matrix of `div_h`, shape `nodes × 2·cells`; rows of clip nodes are empty.
pub fn divergence_matrix(grid: &MvdGrid) -> CsrMatrix {
    node_matrix(grid, |c, k, is_v| {
        let sg = c.sigma(k).unwrap();
        if is_v {
            (0, sg * c.l_d)
        } else {
            (1, sg * c.l_v)
        }
    })
}

/// Matrix of `rot2d_vector_h`, shape `nodes × 2·cells`; rows of clip nodes
/// are empty.
pub fn rot_vector_matrix(grid: &MvdGrid) -> CsrMatrix {
    node_matrix(grid, |c, k, is_v| {
        let sg = c.sigma(k).unwrap();
        if is_v {
            (1, sg * c.l_d)
        } else {
            (0, -sg * c.l_v)
        }
    })
}

fn node_matrix(grid: &MvdGrid, entry: impl Fn(&Cell, usize, bool) -> (usize, f64)) -> CsrMatrix {
    let mut t = Triplets::new(grid.num_nodes(), 2 * grid.num_cells());
    for k in 0..grid.num_nodes() {
        if !grid.has_control_volume(k) {
            continue;
        }
        let is_v = grid.node(k).role.is_voronoi();
        let inv = 1.0 / grid.measure(k);
        for &m in grid.node_cells(k) {
            let (comp, w) = entry(grid.cell(m), k, is_v);
            t.push(k, 2 * m + comp, w * inv);
        }
    }
    t.build()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContourKind {
    /// ∮ F·n dl, outward normal.
    Flux,
    /// ∮ F·τ dl, counterclockwise tangent.
    Circulation,
}

const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Contour integral of `f` around the control volume of interior node `k`
/// (8-point Gauss rule per edge) divided by the control-volume measure.
pub fn contour_oracle(
    f: impl Fn(Point2) -> Point2,
    grid: &MvdGrid,
    k: usize,
    kind: ContourKind,
) -> Result<f64> {
    check_volume(grid, k)?;
    let mut total = 0.0;
    let mut area = 0.0;
    for poly in grid.control_volume(k) {
        let a = crate::geometry::shoelace(&poly);
        area += a.abs();
        let sign = a.signum();
        for i in 0..poly.len() {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            let d = (q - p) * sign;
            let dir = match kind {
                ContourKind::Flux => d.rot_cw(),
                ContourKind::Circulation => d,
            };
            let mid = p.midpoint(q);
            let half = (q - p) * 0.5;
            let mut s = 0.0;
            for (x, w) in GAUSS8 {
                s += w * f(mid + half * x).dot(dir);
            }
            total += 0.5 * s;
        }
    }
    Ok(total / area)
}

/// One-point-per-edge contour rule: `f` evaluated at the cell center of each
/// control-volume edge carried by a cell. Edges on ∂Ω are skipped, as in
/// `div_h` and `rot2d_vector_h` for boundary D-nodes.
pub fn one_point_contour(
    f: impl Fn(Point2) -> Point2,
    grid: &MvdGrid,
    k: usize,
    kind: ContourKind,
) -> Result<f64> {
    check_volume(grid, k)?;
    let is_v = grid.node(k).role == NodeRole::Circumcenter;
    let mut s = 0.0;
    for &m in grid.node_cells(k) {
        let c = grid.cell(m);
        let sg = c.sigma(k).unwrap();
        let fc = f(c.center);
        s += match (kind, is_v) {
            (ContourKind::Flux, true) => sg * fc.dot(c.e1) * c.l_d,
            (ContourKind::Flux, false) => sg * fc.dot(c.e2) * c.l_v,
            (ContourKind::Circulation, true) => sg * fc.dot(c.e2) * c.l_d,
            (ContourKind::Circulation, false) => -sg * fc.dot(c.e1) * c.l_v,
        };
    }
    Ok(s / grid.measure(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_square, Scheme};
    use crate::geometry::ConvexPolygon;
    use crate::grid::{mvd_from_points, sample_vector};

    fn grid(n: usize, alpha: f64, seed: u64) -> MvdGrid {
        let scheme = if alpha == 0.0 { Scheme::Lattice } else { Scheme::Jitter(alpha) };
        mvd_from_points(&generate_square(scheme, n, seed).unwrap(), &ConvexPolygon::unit_square()).unwrap()
    }

    #[test]
    fn hand_cell_gradient() {
        let c = Cell {
            d_tail: 0,
            d_head: 1,
            v_tail: 2,
            v_head: 3,
            center: Point2::new(0.5, 0.5),
            e1: Point2::new(1.0, 0.0),
            e2: Point2::new(0.0, 1.0),
            l_v: 0.5,
            l_d: 0.5,
            area: 0.125,
            boundary: false,
        };
        let y = |p: Point2| 2.0 * p.x1 + 3.0 * p.x2;
        let vals = [
            y(Point2::new(0.5, 0.25)),
            y(Point2::new(0.5, 0.75)),
            y(Point2::new(0.25, 0.5)),
            y(Point2::new(0.75, 0.5)),
        ];
        assert_eq!(grad_cell(&c, vals), [2.0, 3.0]);
    }

    #[test]
    fn rotor_of_x1_is_down() {
        // lattice: exact to 1e-13; jittered: a difference quotient over L_V
        // cannot beat eps·|y|/L_V
        for (g, exact) in [(grid(8, 0.0, 0), true), (grid(8, 0.2, 3), false)] {
            let y = NodeField(g.nodes().iter().map(|n| n.pos.x1).collect());
            let r = rot2d_scalar_h(&y, &g).unwrap();
            let gr = grad_h(&y, &g).unwrap();
            for (m, c) in g.cells().iter().enumerate() {
                let tol = if exact { 1e-13 } else { 1e-13 + 8.0 * f64::EPSILON / c.l_v };
                let v = c.to_global(r.0[m]);
                assert!(v.x1.abs() <= tol && (v.x2 + 1.0).abs() <= tol, "{v:?}");
                assert_eq!(r.0[m], [gr.0[m][1], -gr.0[m][0]]);
            }
        }
    }

    #[test]
    fn constants_have_no_flux() {
        let g = grid(8, 0.2, 1);
        let v = sample_vector(&g, |_| Point2::new(0.3, -1.7)).unwrap();
        for k in 0..g.num_nodes() {
            if g.is_interior(k) {
                let vn = Point2::new(0.3, -1.7).norm();
                assert!(div_h(&v, &g, k).unwrap().abs() <= 1e-13 * vn);
                assert!(rot2d_vector_h(&v, &g, k).unwrap().abs() <= 1e-13 * vn);
            }
        }
        let clip = (0..g.num_nodes()).find(|&k| !g.has_control_volume(k)).unwrap();
        let e = div_h(&v, &g, clip).unwrap_err();
        assert!(e.to_string().contains("divergence undefined at degenerate control volume"));
    }

    #[test]
    fn matrices_agree_with_operators() {
        let g = grid(8, 0.2, 5);
        let y = NodeField(g.nodes().iter().map(|n| (3.0 * n.pos.x1).sin() + n.pos.x2 * n.pos.x2).collect());
        let gm = gradient_matrix(&g).mul_vec(&y.0).unwrap();
        let rm = rot_scalar_matrix(&g).mul_vec(&y.0).unwrap();
        let gy = grad_h(&y, &g).unwrap();
        let ry = rot2d_scalar_h(&y, &g).unwrap();
        for m in 0..g.num_cells() {
            for c in 0..2 {
                assert!((gm[2 * m + c] - gy.0[m][c]).abs() <= 1e-12 * gy.0[m][c].abs().max(1.0));
                assert!((rm[2 * m + c] - ry.0[m][c]).abs() <= 1e-12 * ry.0[m][c].abs().max(1.0));
            }
        }
        let v = sample_vector(&g, |p| Point2::new(p.x2.cos(), p.x1 * p.x2)).unwrap();
        let flat: Vec<f64> = v.0.iter().flatten().copied().collect();
        let dm = divergence_matrix(&g).mul_vec(&flat).unwrap();
        let qm = rot_vector_matrix(&g).mul_vec(&flat).unwrap();
        let dv = div_h_field(&v, &g).unwrap();
        let qv = rot2d_vector_h_field(&v, &g).unwrap();
        for k in 0..g.num_nodes() {
            assert!((dm[k] - dv.0[k]).abs() <= 1e-11 * dv.0[k].abs().max(1.0));
            assert!((qm[k] - qv.0[k]).abs() <= 1e-11 * qv.0[k].abs().max(1.0));
        }
    }

    #[test]
    fn oracle_reproduces_divergence_theorem() {
        let g = grid(8, 0.25, 9);
        for k in 0..g.num_nodes() {
            if !g.is_interior(k) {
                continue;
            }
            let zero = contour_oracle(|_| Point2::new(1.0, 2.0), &g, k, ContourKind::Flux).unwrap();
            let flux = contour_oracle(|p| p, &g, k, ContourKind::Flux).unwrap();
            let circ = contour_oracle(|p| Point2::new(-p.x2, p.x1), &g, k, ContourKind::Circulation).unwrap();
            assert!(zero.abs() < 1e-12, "{zero}");
            assert!((flux - 2.0).abs() < 1e-12, "{flux}");
            assert!((circ - 2.0).abs() < 1e-12, "{circ}");
        }
    }

    #[test]
    fn one_point_rule_is_the_discrete_operator() {
        let g = grid(16, 0.2, 2);
        let f = |p: Point2| Point2::new(p.x1 * p.x1 - p.x2, (2.0 * p.x1).sin() + p.x2);
        let v = sample_vector(&g, f).unwrap();
        for k in 0..g.num_nodes() {
            if !g.has_control_volume(k) {
                continue;
            }
            let a = one_point_contour(f, &g, k, ContourKind::Flux).unwrap();
            let b = one_point_contour(f, &g, k, ContourKind::Circulation).unwrap();
            assert_eq!(a.to_bits(), div_h(&v, &g, k).unwrap().to_bits());
            assert_eq!(b.to_bits(), rot2d_vector_h(&v, &g, k).unwrap().to_bits());
        }
    }
}
