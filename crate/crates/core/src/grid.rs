//! The merged Voronoi–Delaunay grid: nodes ω = ω^D ∪ ω^V, orthodiagonal
//! cells with centers ω*, local frames, control measures and the discrete
//! inner products.

use crate::error::{Error, Result};
use crate::geometry::{shoelace, ConvexPolygon, Point2, EPS_GEOM};
use crate::tessellation::{delaunay, voronoi, Triangulation, VNodeKind, VoronoiDiagram};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NodeRole {
    /// Delaunay node.
    #[serde(rename = "D")]
    Delaunay,
    /// Voronoi vertex at a (shared) circumcenter.
    #[serde(rename = "V_circum")]
    Circumcenter,
    /// Voronoi vertex where a dual edge meets ∂Ω (boundary edge midpoint).
    #[serde(rename = "V_bclip")]
    BoundaryClip,
}

impl NodeRole {
    pub fn is_voronoi(self) -> bool {
        !matches!(self, NodeRole::Delaunay)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub pos: Point2,
    pub role: NodeRole,
    pub boundary: bool,
}

/// One orthodiagonal cell Ω_m, built on a Delaunay edge and its dual.
///
/// `e2` points along the Delaunay diagonal `d_tail → d_head`, `e1` is `e2`
/// rotated by −90° and points along `v_tail → v_head`, so `e1 × e2 = +1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub d_tail: usize,
    pub d_head: usize,
    pub v_tail: usize,
    pub v_head: usize,
    pub center: Point2,
    pub e1: Point2,
    pub e2: Point2,
    /// |x_{j⁺}^V − x_j^V|
    pub l_v: f64,
    /// |x_{i⁺}^D − x_i^D|
    pub l_d: f64,
    /// S* = ½ L_D L_V
    pub area: f64,
    pub boundary: bool,
}

impl Cell {
    /// Orientation sign of `node` in this cell: +1 for the tail of either
    /// diagonal, −1 for the head.
    #[inline]
    pub fn sigma(&self, node: usize) -> Option<f64> {
        if node == self.d_tail || node == self.v_tail {
            Some(1.0)
        } else if node == self.d_head || node == self.v_head {
            Some(-1.0)
        } else {
            None
        }
    }

    #[inline]
    pub fn to_global(&self, v: [f64; 2]) -> Point2 {
        self.e1 * v[0] + self.e2 * v[1]
    }

    #[inline]
    pub fn to_local(&self, f: Point2) -> [f64; 2] {
        [f.dot(self.e1), f.dot(self.e2)]
    }
}

/// Node subsets for inner products and sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    All,
    Interior,
}

/// The merged grid. Immutable after construction.
#[derive(Clone, Debug)]
pub struct MvdGrid {
    pub(crate) domain: ConvexPolygon,
    pub(crate) nodes: Vec<Node>,
    pub(crate) cells: Vec<Cell>,
    pub(crate) node_cells: Vec<Vec<usize>>,
    /// Full control-volume measure meas(Ω_i^D) or meas(Ω_j^V); 0 for clip nodes.
    pub(crate) measure: Vec<f64>,
    /// Delaunay triangles in ω numbering.
    pub(crate) triangles: Vec<[usize; 3]>,
    /// V-node of each triangle's circumcenter.
    pub(crate) triangle_node: Vec<usize>,
    /// Clipped Voronoi polygon of each D-node (indexed by D-node id).
    pub(crate) voronoi_cells: Vec<Vec<Point2>>,
    pub(crate) num_d: usize,
}

/// Derives a cell's frame and measures from its four corner nodes
/// `[d_tail, d_head, v_tail, v_head]`.
pub(crate) fn make_cell(nodes: &[Node], ids: [usize; 4], boundary: bool) -> Cell {
    let [d_tail, d_head, v_tail, v_head] = ids;
    let a = nodes[d_tail].pos;
    let b = nodes[d_head].pos;
    let l_d = a.dist(b);
    let e2 = (b - a) * (1.0 / l_d);
    let e1 = e2.rot_cw();
    let l_v = nodes[v_head].pos.dist(nodes[v_tail].pos);
    Cell {
        d_tail,
        d_head,
        v_tail,
        v_head,
        center: a.midpoint(b),
        e1,
        e2,
        l_v,
        l_d,
        area: 0.5 * l_d * l_v,
        boundary,
    }
}

/// Builds the merged grid from a dual pair.
///
/// One cell per Delaunay edge whose dual edge has positive length; edges
/// between merged (cocircular) circumcenters carry no cell.
pub fn build_mvd(tri: &Triangulation, vor: &VoronoiDiagram, domain: &ConvexPolygon) -> Result<MvdGrid> {
    let diam = domain.diameter();
    let tol = EPS_GEOM * diam;
    let num_d = tri.d_nodes.len();
    let mut nodes: Vec<Node> = tri
        .d_nodes
        .iter()
        .map(|&pos| Node {
            pos,
            role: NodeRole::Delaunay,
            boundary: domain.boundary_distance(pos) <= tol,
        })
        .collect();
    for (pos, kind) in vor.v_nodes.iter().zip(&vor.kind) {
        let (role, boundary) = match kind {
            VNodeKind::Circumcenter { .. } => (NodeRole::Circumcenter, domain.boundary_distance(*pos) <= tol),
            VNodeKind::BoundaryClip { .. } => (NodeRole::BoundaryClip, true),
        };
        nodes.push(Node { pos: *pos, role, boundary });
    }

    let mut cells = Vec::with_capacity(vor.edges.len());
    for (id, (e, &(vt, vh))) in vor.edges.iter().zip(&vor.dual_edge).enumerate() {
        if vt == vh {
            continue;
        }
        let (v_tail, v_head) = (num_d + vt, num_d + vh);
        let c = make_cell(&nodes, [e.a, e.b, v_tail, v_head], e.right.is_none());
        let signed = (nodes[v_head].pos - nodes[v_tail].pos).dot(c.e1);
        if signed <= tol {
            return Err(Error::Inadmissible(if c.boundary {
                format!("degenerate boundary cell on Delaunay edge {id} ({}, {})", e.a, e.b)
            } else {
                format!("cell on Delaunay edge {id} ({}, {}): diagonals do not intersect", e.a, e.b)
            }));
        }
        cells.push(c);
    }

    let mut measure = vec![0.0; nodes.len()];
    for (i, c) in vor.cells.iter().enumerate() {
        measure[i] = c.area();
    }
    for t in 0..tri.triangles.len() {
        measure[num_d + vor.triangle_vnode[t]] += tri.area(t);
    }

    let mut grid = MvdGrid {
        domain: domain.clone(),
        nodes,
        cells,
        node_cells: Vec::new(),
        measure,
        triangles: tri.triangles.clone(),
        triangle_node: vor.triangle_vnode.iter().map(|&v| v + num_d).collect(),
        voronoi_cells: vor.cells.iter().map(|c| c.vertices().to_vec()).collect(),
        num_d,
    };
    grid.rebuild_incidence();
    Ok(grid)
}

/// Convenience pipeline: Delaunay, clipped Voronoi, merged grid.
pub fn mvd_from_points(points: &[Point2], domain: &ConvexPolygon) -> Result<MvdGrid> {
    let tri = delaunay(points, domain)?;
    let vor = voronoi(&tri, domain)?;
    build_mvd(&tri, &vor, domain)
}

impl MvdGrid {
    pub(crate) fn rebuild_incidence(&mut self) {
        let mut node_cells = vec![Vec::new(); self.nodes.len()];
        for (m, c) in self.cells.iter().enumerate() {
            for k in [c.d_tail, c.d_head, c.v_tail, c.v_head] {
                node_cells[k].push(m);
            }
        }
        self.node_cells = node_cells;
    }

    pub fn domain(&self) -> &ConvexPolygon {
        &self.domain
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &Node {
        &self.nodes[k]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of Delaunay nodes; they occupy ids `0..num_d()`.
    pub fn num_d(&self) -> usize {
        self.num_d
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, m: usize) -> &Cell {
        &self.cells[m]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Cells having `k` as one of their four vertices.
    pub fn node_cells(&self, k: usize) -> &[usize] {
        &self.node_cells[k]
    }

    /// Full control-volume measure (S^D or S^V); 0 at boundary clip nodes.
    pub fn measure(&self, k: usize) -> f64 {
        self.measure[k]
    }

    /// Merged-grid weight S = ½·measure.
    pub fn weight(&self, k: usize) -> f64 {
        0.5 * self.measure[k]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_node(&self, t: usize) -> usize {
        self.triangle_node[t]
    }

    pub fn voronoi_cell(&self, d_node: usize) -> &[Point2] {
        &self.voronoi_cells[d_node]
    }

    pub fn is_interior(&self, k: usize) -> bool {
        !self.nodes[k].boundary
    }

    /// Nodes whose control volume is non-degenerate (everything but clip nodes).
    pub fn has_control_volume(&self, k: usize) -> bool {
        self.nodes[k].role != NodeRole::BoundaryClip
    }

    /// Control-volume boundary as polygons: the clipped Voronoi cell of a
    /// D-node, or the triangles merged into a circumcenter node.
    pub fn control_volume(&self, k: usize) -> Vec<Vec<Point2>> {
        match self.nodes[k].role {
            NodeRole::Delaunay => vec![self.voronoi_cells[k].clone()],
            NodeRole::Circumcenter => self
                .triangle_node
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v == k)
                .map(|(t, _)| self.triangles[t].iter().map(|&d| self.nodes[d].pos).collect())
                .collect(),
            NodeRole::BoundaryClip => Vec::new(),
        }
    }

    pub fn meas_domain(&self) -> f64 {
        self.domain.area()
    }

    /// Representative mesh size: the longest Delaunay diagonal.
    pub fn h(&self) -> f64 {
        self.cells.iter().map(|c| c.l_d).fold(0.0, f64::max)
    }

    /// Minimum positive control-volume measure.
    pub fn min_measure(&self) -> f64 {
        self.measure.iter().copied().filter(|&m| m > 0.0).fold(f64::INFINITY, f64::min)
    }

    /// Checks every structural invariant and returns the violations found.
    pub fn verify(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let meas = self.meas_domain();
        let rel = |x: f64| (x - meas).abs() / meas;

        let sum_cells: f64 = self.cells.iter().map(|c| c.area).sum();
        if rel(sum_cells) > 1e-10 {
            bad.push(format!("sum of S* = {sum_cells}, meas(Ω) = {meas}"));
        }
        let sum_d: f64 = (0..self.num_d).map(|k| 2.0 * self.weight(k)).sum();
        if rel(sum_d) > 1e-10 {
            bad.push(format!("sum of 2S over D-nodes = {sum_d}, meas(Ω) = {meas}"));
        }
        let sum_v: f64 = (self.num_d..self.nodes.len()).map(|k| 2.0 * self.weight(k)).sum();
        if rel(sum_v) > 1e-10 {
            bad.push(format!("sum of 2S over V-nodes = {sum_v}, meas(Ω) = {meas}"));
        }
        let sum_s: f64 = (0..self.nodes.len()).map(|k| self.weight(k)).sum();
        if rel(sum_s) > 1e-10 {
            bad.push(format!("sum of S over ω = {sum_s}, meas(Ω) = {meas}"));
        }
        for k in self.num_d..self.nodes.len() {
            if self.nodes[k].role == NodeRole::BoundaryClip && self.measure[k] != 0.0 {
                bad.push(format!("clip node {k} has nonzero measure"));
            }
        }

        let tol = EPS_GEOM * self.domain.diameter();
        for (m, c) in self.cells.iter().enumerate() {
            let (a, b) = (self.nodes[c.d_tail].pos, self.nodes[c.d_head].pos);
            let (vt, vh) = (self.nodes[c.v_tail].pos, self.nodes[c.v_head].pos);
            if self.nodes[c.d_tail].role != NodeRole::Delaunay
                || self.nodes[c.d_head].role != NodeRole::Delaunay
                || !self.nodes[c.v_tail].role.is_voronoi()
                || !self.nodes[c.v_head].role.is_voronoi()
            {
                bad.push(format!("cell {m}: diagonal endpoints have wrong roles"));
                continue;
            }
            if (c.e1.norm() - 1.0).abs() > 1e-15
                || (c.e2.norm() - 1.0).abs() > 1e-15
                || c.e1.dot(c.e2).abs() > 1e-15
                || (c.e1.cross(c.e2) - 1.0).abs() > 1e-15
            {
                bad.push(format!("cell {m}: local frame is not right-handed orthonormal"));
            }
            let signed = (vh - vt).dot(c.e1);
            if signed <= tol {
                bad.push(format!("cell {m}: non-positive dual length {signed}"));
            }
            if (a.dist(b) - c.l_d).abs() > 1e-13 * c.l_d || (vt.dist(vh) - c.l_v).abs() > 1e-13 * c.l_v {
                bad.push(format!("cell {m}: diagonal lengths disagree with node positions"));
            }
            if ((b - a) * (1.0 / c.l_d) - c.e2).norm() > 1e-14 {
                bad.push(format!("cell {m}: e2 is not along the Delaunay diagonal"));
            }
            if ((vh - vt) * (1.0 / c.l_v) - c.e1).norm() > 1e-8 {
                bad.push(format!("cell {m}: V-diagonal is not orthogonal to the Delaunay diagonal"));
            }
            if c.area <= 0.0 || (c.area - 0.5 * c.l_d * c.l_v).abs() > 1e-13 * c.area {
                bad.push(format!("cell {m}: S* differs from ½·L_D·L_V"));
            }
            let kite = shoelace(&[Point2::new(0.0, 0.0), vt - a, b - a, vh - a]).abs();
            if (kite - c.area).abs() > 1e-12 * c.area + 1e-14 * c.l_d * tol / EPS_GEOM {
                bad.push(format!("cell {m}: kite area {kite} differs from S* {}", c.area));
            }
            if c.center.dist(a.midpoint(b)) > tol {
                bad.push(format!("cell {m}: center is not on the Delaunay diagonal midpoint"));
            }
            if c.boundary && c.center.dist(vh) > tol {
                bad.push(format!("boundary cell {m}: center differs from its clip node"));
            }
        }
        bad
    }
}

/// Grid quality summary.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityReport {
    pub num_cells: usize,
    pub min_l_v: f64,
    pub max_l_v: f64,
    pub min_l_d: f64,
    pub max_l_d: f64,
    pub min_cell_area: f64,
    /// Circumcenter V-nodes lying outside all of their own triangles.
    pub circumcenters_outside: Vec<usize>,
    /// Cells whose V-diagonal does not straddle the Delaunay diagonal.
    pub non_straddling_cells: Vec<usize>,
    /// Cells with a non-positive signed dual length (inadmissible).
    pub inadmissible_cells: Vec<usize>,
    /// Smallest distance of a circumcenter V-node to ∂Ω.
    pub min_vnode_boundary_distance: f64,
}

impl AdmissibilityReport {
    pub fn every_vnode_inside(&self) -> bool {
        self.circumcenters_outside.is_empty()
    }

    pub fn is_admissible(&self) -> bool {
        self.inadmissible_cells.is_empty()
    }
}

pub fn admissibility_report(grid: &MvdGrid) -> AdmissibilityReport {
    let tol = EPS_GEOM * grid.domain.diameter();
    let mut r = AdmissibilityReport {
        num_cells: grid.cells.len(),
        min_l_v: f64::INFINITY,
        max_l_v: 0.0,
        min_l_d: f64::INFINITY,
        max_l_d: 0.0,
        min_cell_area: f64::INFINITY,
        circumcenters_outside: Vec::new(),
        non_straddling_cells: Vec::new(),
        inadmissible_cells: Vec::new(),
        min_vnode_boundary_distance: f64::INFINITY,
    };
    for (m, c) in grid.cells.iter().enumerate() {
        r.min_l_v = r.min_l_v.min(c.l_v);
        r.max_l_v = r.max_l_v.max(c.l_v);
        r.min_l_d = r.min_l_d.min(c.l_d);
        r.max_l_d = r.max_l_d.max(c.l_d);
        r.min_cell_area = r.min_cell_area.min(c.area);
        let vt = grid.nodes[c.v_tail].pos;
        let vh = grid.nodes[c.v_head].pos;
        if (vh - vt).dot(c.e1) <= tol {
            r.inadmissible_cells.push(m);
        }
        if !c.boundary {
            let a = (vt - c.center).dot(c.e1);
            let b = (vh - c.center).dot(c.e1);
            if !(a < 0.0 && b > 0.0) {
                r.non_straddling_cells.push(m);
            }
        }
    }
    for k in grid.num_d..grid.nodes.len() {
        let node = grid.nodes[k];
        if node.role != NodeRole::Circumcenter {
            continue;
        }
        r.min_vnode_boundary_distance = r.min_vnode_boundary_distance.min(grid.domain.boundary_distance(node.pos));
        let inside = grid
            .control_volume(k)
            .iter()
            .any(|t| ConvexPolygon::new(t.clone()).is_ok_and(|t| t.contains(node.pos, tol)));
        if !inside {
            r.circumcenters_outside.push(k);
        }
    }
    r
}

/// Scalar grid function on ω (one value per node).
#[derive(Clone, Debug, PartialEq)]
pub struct NodeField(pub Vec<f64>);

/// Vector grid function on ω*: local-frame components `(v1, v2)` per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField(pub Vec<[f64; 2]>);

impl NodeField {
    pub fn zeros(grid: &MvdGrid) -> Self {
        NodeField(vec![0.0; grid.num_nodes()])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl CellField {
    pub fn zeros(grid: &MvdGrid) -> Self {
        CellField(vec![[0.0; 2]; grid.num_cells()])
    }

    /// Components converted to the global frame.
    pub fn to_global(&self, grid: &MvdGrid) -> Vec<Point2> {
        self.0.iter().zip(grid.cells()).map(|(v, c)| c.to_global(*v)).collect()
    }
}

fn in_support(grid: &MvdGrid, k: usize, support: Support) -> bool {
    match support {
        Support::All => true,
        Support::Interior => grid.is_interior(k),
    }
}

/// (y, z) = Σ y z S over the requested nodes.
pub fn inner_omega(y: &NodeField, z: &NodeField, grid: &MvdGrid, support: Support) -> Result<f64> {
    for f in [y, z] {
        if f.0.len() != grid.num_nodes() {
            return Err(Error::SupportMismatch(format!(
                "node field has {} values, grid has {} nodes",
                f.0.len(),
                grid.num_nodes()
            )));
        }
    }
    Ok((0..grid.num_nodes())
        .filter(|&k| in_support(grid, k, support))
        .map(|k| y.0[k] * z.0[k] * grid.weight(k))
        .sum())
}

pub fn norm_omega(y: &NodeField, grid: &MvdGrid, support: Support) -> Result<f64> {
    inner_omega(y, y, grid, support).map(f64::sqrt)
}

/// (u, v)_* = Σ_m S*_m (u1 v1 + u2 v2).
pub fn inner_cells(u: &CellField, v: &CellField, grid: &MvdGrid) -> Result<f64> {
    for f in [u, v] {
        if f.0.len() != grid.num_cells() {
            return Err(Error::SupportMismatch(format!(
                "cell field has {} values, grid has {} cells",
                f.0.len(),
                grid.num_cells()
            )));
        }
    }
    Ok(grid
        .cells
        .iter()
        .zip(u.0.iter().zip(&v.0))
        .map(|(c, (a, b))| c.area * (a[0] * b[0] + a[1] * b[1]))
        .sum())
}

pub fn norm_cells(u: &CellField, grid: &MvdGrid) -> Result<f64> {
    inner_cells(u, u, grid).map(f64::sqrt)
}

/// Samples `f` at the nodes; nodes outside `support` get 0.
pub fn sample_scalar(grid: &MvdGrid, support: Support, f: impl Fn(Point2) -> f64) -> Result<NodeField> {
    grid.nodes
        .iter()
        .enumerate()
        .map(|(k, n)| {
            if !in_support(grid, k, support) {
                return Ok(0.0);
            }
            let v = f(n.pos);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(n.pos))
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(NodeField)
}

/// Samples a global-frame field at the cell centers and rotates it into each
/// cell's local frame.
pub fn sample_vector(grid: &MvdGrid, f: impl Fn(Point2) -> Point2) -> Result<CellField> {
    grid.cells
        .iter()
        .map(|c| {
            let v = f(c.center);
            if v.is_finite() {
                Ok(c.to_local(v))
            } else {
                Err(Error::NonFinite(c.center))
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(CellField)
}
