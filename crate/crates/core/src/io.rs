//! File formats: point CSV, mesh and solution JSON, legacy VTK.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bvp::{Problem, Solution, SolveStats};
use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Point2};
use crate::grid::{make_cell, CellField, MvdGrid, Node, NodeField, NodeRole};

pub const MESH_FORMAT: &str = "mvd-mesh-1";
pub const SOLUTION_FORMAT: &str = "mvd-solution-1";

/// Parses `x1,x2` lines. Blank lines and `#` comments (whole-line or
/// trailing) are skipped. Returns each point with its 1-based line number.
pub fn parse_points_csv(text: &str) -> Result<Vec<(usize, Point2)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Format(format!("line {line}: expected 'x1,x2', found {} fields", fields.len())));
        }
        let mut xy = [0.0f64; 2];
        for (v, f) in xy.iter_mut().zip(&fields) {
            *v = f
                .parse()
                .map_err(|_| Error::Format(format!("line {line}: '{f}' is not a number")))?;
            if !v.is_finite() {
                return Err(Error::Format(format!("line {line}: non-finite coordinate '{f}'")));
            }
        }
        out.push((line, Point2::new(xy[0], xy[1])));
    }
    Ok(out)
}

pub fn write_points_csv(points: &[Point2]) -> String {
    let mut s = String::from("# x1,x2\n");
    for p in points {
        let _ = writeln!(s, "{:?},{:?}", p.x1, p.x2);
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub pos: [f64; 2],
    pub role: NodeRole,
    pub boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub d_tail: usize,
    pub d_head: usize,
    pub v_tail: usize,
    pub v_head: usize,
    pub center: [f64; 2],
    pub boundary: bool,
}

/// Serialized merged grid. Frames, lengths and S* are recomputed from node
/// positions on load, so a reloaded grid is bit-identical to the original.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub format: String,
    pub domain: Vec<[f64; 2]>,
    pub nodes: Vec<NodeRecord>,
    pub cells: Vec<CellRecord>,
    /// Full control-volume measure per node (0 at clip nodes).
    pub measures: Vec<f64>,
    pub triangles: Vec<[usize; 3]>,
    /// V-node of each triangle.
    pub triangle_nodes: Vec<usize>,
    /// Clipped Voronoi polygon of each D-node.
    pub voronoi_cells: Vec<Vec<[f64; 2]>>,
}

fn arr(p: Point2) -> [f64; 2] {
    [p.x1, p.x2]
}

fn pt(a: [f64; 2]) -> Point2 {
    Point2::new(a[0], a[1])
}

impl MeshFile {
    pub fn from_grid(grid: &MvdGrid) -> Self {
        MeshFile {
            format: MESH_FORMAT.to_string(),
            domain: grid.domain().vertices().iter().copied().map(arr).collect(),
            nodes: grid
                .nodes()
                .iter()
                .map(|n| NodeRecord { pos: arr(n.pos), role: n.role, boundary: n.boundary })
                .collect(),
            cells: grid
                .cells()
                .iter()
                .map(|c| CellRecord {
                    d_tail: c.d_tail,
                    d_head: c.d_head,
                    v_tail: c.v_tail,
                    v_head: c.v_head,
                    center: arr(c.center),
                    boundary: c.boundary,
                })
                .collect(),
            measures: (0..grid.num_nodes()).map(|k| grid.measure(k)).collect(),
            triangles: grid.triangles().to_vec(),
            triangle_nodes: (0..grid.triangles().len()).map(|t| grid.triangle_node(t)).collect(),
            voronoi_cells: (0..grid.num_d()).map(|k| grid.voronoi_cell(k).iter().copied().map(arr).collect()).collect(),
        }
    }

    /// Rebuilds the grid after checking indices, roles and finiteness.
    /// Geometric invariants are not enforced here; see [`MvdGrid::verify`].
    pub fn to_grid(&self) -> Result<MvdGrid> {
        let bad = |msg: String| Err(Error::Format(format!("corrupt mesh: {msg}")));
        if self.format != MESH_FORMAT {
            return bad(format!("unknown format '{}'", self.format));
        }
        let finite = |a: &[f64; 2]| a[0].is_finite() && a[1].is_finite();
        if !self.domain.iter().all(finite) {
            return bad("non-finite domain vertex".into());
        }
        let domain = ConvexPolygon::new(self.domain.iter().copied().map(pt).collect())?;
        let n = self.nodes.len();
        let num_d = self.nodes.iter().take_while(|r| r.role == NodeRole::Delaunay).count();
        if self.nodes[num_d..].iter().any(|r| r.role == NodeRole::Delaunay) {
            return bad("D-nodes must precede V-nodes".into());
        }
        if let Some(k) = self.nodes.iter().position(|r| !finite(&r.pos)) {
            return bad(format!("node {k} has a non-finite coordinate"));
        }
        if self.measures.len() != n {
            return bad(format!("{} measures for {n} nodes", self.measures.len()));
        }
        if let Some(k) = self.measures.iter().position(|m| !m.is_finite() || *m < 0.0) {
            return bad(format!("node {k} has an invalid measure"));
        }
        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .map(|r| Node { pos: pt(r.pos), role: r.role, boundary: r.boundary })
            .collect();
        let mut cells = Vec::with_capacity(self.cells.len());
        for (m, c) in self.cells.iter().enumerate() {
            let ids = [c.d_tail, c.d_head, c.v_tail, c.v_head];
            if ids.iter().any(|&i| i >= n) {
                return bad(format!("cell {m} references a missing node"));
            }
            if ids[0] >= num_d || ids[1] >= num_d || ids[2] < num_d || ids[3] < num_d {
                return bad(format!("cell {m}: diagonal endpoints have wrong roles"));
            }
            if ids[0] == ids[1] || ids[2] == ids[3] {
                return bad(format!("cell {m} has a degenerate diagonal"));
            }
            let cell = make_cell(&nodes, ids, c.boundary);
            if !(cell.l_d > 0.0 && cell.l_v > 0.0) || !cell.e1.is_finite() {
                return bad(format!("cell {m} has a zero-length diagonal"));
            }
            cells.push(cell);
        }
        if self.triangle_nodes.len() != self.triangles.len() {
            return bad("triangle/V-node count mismatch".into());
        }
        if self.triangles.iter().flatten().any(|&d| d >= num_d) {
            return bad("triangle references a non-Delaunay node".into());
        }
        if self.triangle_nodes.iter().any(|&v| v < num_d || v >= n) {
            return bad("triangle V-node out of range".into());
        }
        if self.voronoi_cells.len() != num_d || !self.voronoi_cells.iter().flatten().all(finite) {
            return bad("Voronoi cell list does not match the D-nodes".into());
        }
        let mut grid = MvdGrid {
            domain,
            nodes,
            cells,
            node_cells: Vec::new(),
            measure: self.measures.clone(),
            triangles: self.triangles.clone(),
            triangle_node: self.triangle_nodes.clone(),
            voronoi_cells: self.voronoi_cells.iter().map(|c| c.iter().copied().map(pt).collect()).collect(),
            num_d,
        };
        grid.rebuild_incidence();
        Ok(grid)
    }
}

pub fn write_mesh_json(grid: &MvdGrid) -> String {
    let mut s = serde_json::to_string_pretty(&MeshFile::from_grid(grid)).expect("mesh serializes");
    s.push('\n');
    s
}

pub fn read_mesh_json(text: &str) -> Result<MvdGrid> {
    let f: MeshFile = serde_json::from_str(text).map_err(|e| Error::Format(format!("corrupt mesh: {e}")))?;
    f.to_grid()
}

/// Solution twin of the VTK output: the mesh plus value arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub format: String,
    pub problem: Problem,
    pub mesh: MeshFile,
    /// Node values (scalar problems).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub node_values: Option<Vec<f64>>,
    /// Cell values in each cell's local frame (vector problems).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cell_values_local: Option<Vec<[f64; 2]>>,
    /// The same cell values in the global frame.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cell_values_global: Option<Vec<[f64; 2]>>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub l2_error: Option<f64>,
}

impl SolutionFile {
    pub fn new(grid: &MvdGrid, problem: Problem, sol: &Solution, stats: &SolveStats, l2_error: Option<f64>) -> Self {
        let (nv, local, global) = match sol {
            Solution::Scalar(y) => (Some(y.0.clone()), None, None),
            Solution::Vector(v) => (
                None,
                Some(v.0.clone()),
                Some(v.to_global(grid).into_iter().map(arr).collect()),
            ),
        };
        SolutionFile {
            format: SOLUTION_FORMAT.to_string(),
            problem,
            mesh: MeshFile::from_grid(grid),
            node_values: nv,
            cell_values_local: local,
            cell_values_global: global,
            iterations: stats.iterations,
            relative_residual: stats.relative_residual,
            converged: stats.converged,
            l2_error,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("solution serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SolutionFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("corrupt solution file: {e}")))?;
        if f.format != SOLUTION_FORMAT {
            return Err(Error::Format(format!("corrupt solution file: unknown format '{}'", f.format)));
        }
        Ok(f)
    }

    /// Grid and field, with lengths checked against the mesh.
    pub fn fields(&self) -> Result<(MvdGrid, Option<NodeField>, Option<CellField>)> {
        let grid = self.mesh.to_grid()?;
        let nf = match &self.node_values {
            Some(v) if v.len() != grid.num_nodes() => {
                return Err(Error::Dimension { expected: grid.num_nodes(), got: v.len() })
            }
            Some(v) => Some(NodeField(v.clone())),
            None => None,
        };
        let cf = match &self.cell_values_local {
            Some(v) if v.len() != grid.num_cells() => {
                return Err(Error::Dimension { expected: grid.num_cells(), got: v.len() })
            }
            Some(v) => Some(CellField(v.clone())),
            None => None,
        };
        Ok((grid, nf, cf))
    }
}

const VTK_TRIANGLE: u8 = 5;
const VTK_QUAD: u8 = 9;

/// Legacy VTK 2.0 ASCII unstructured grid. Interior cells are quads with
/// vertex cycle `d_tail, v_tail, d_head, v_head`; boundary cells are
/// triangles `d_tail, v_tail, d_head` (their `v_head` is the Delaunay-edge
/// midpoint). Node fields go to POINT_DATA, cell fields (converted to the
/// global frame) to CELL_DATA.
pub fn write_vtk(grid: &MvdGrid, scalars: &[(&str, &NodeField)], vectors: &[(&str, &CellField)]) -> Result<String> {
    for (name, f) in scalars {
        if f.0.len() != grid.num_nodes() {
            return Err(Error::SupportMismatch(format!("field '{name}' is not a node field of this grid")));
        }
    }
    for (name, f) in vectors {
        if f.0.len() != grid.num_cells() {
            return Err(Error::SupportMismatch(format!("field '{name}' is not a cell field of this grid")));
        }
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 2.0\nmerged Voronoi-Delaunay grid\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", grid.num_nodes());
    for n in grid.nodes() {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", n.pos.x1, n.pos.x2);
    }
    let size: usize = grid.cells().iter().map(|c| if c.boundary { 4 } else { 5 }).sum();
    let _ = writeln!(s, "CELLS {} {size}", grid.num_cells());
    for c in grid.cells() {
        if c.boundary {
            let _ = writeln!(s, "3 {} {} {}", c.d_tail, c.v_tail, c.d_head);
        } else {
            let _ = writeln!(s, "4 {} {} {} {}", c.d_tail, c.v_tail, c.d_head, c.v_head);
        }
    }
    let _ = writeln!(s, "CELL_TYPES {}", grid.num_cells());
    for c in grid.cells() {
        let _ = writeln!(s, "{}", if c.boundary { VTK_TRIANGLE } else { VTK_QUAD });
    }
    if !scalars.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", grid.num_nodes());
        for (name, f) in scalars {
            let _ = writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", vtk_name(name));
            for v in &f.0 {
                let _ = writeln!(s, "{v:.16e}");
            }
        }
    }
    if !vectors.is_empty() {
        let _ = writeln!(s, "CELL_DATA {}", grid.num_cells());
        for (name, f) in vectors {
            let _ = writeln!(s, "VECTORS {} double", vtk_name(name));
            for g in f.to_global(grid) {
                let _ = writeln!(s, "{:.16e} {:.16e} 0", g.x1, g.x2);
            }
        }
    }
    Ok(s)
}

fn vtk_name(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    if s.is_empty() {
        "field".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_square, Scheme};
    use crate::grid::mvd_from_points;

    fn grid() -> MvdGrid {
        let pts = generate_square(Scheme::Jitter(0.2), 6, 11).unwrap();
        mvd_from_points(&pts, &ConvexPolygon::unit_square()).unwrap()
    }

    #[test]
    fn csv_comments_and_errors() {
        let pts = parse_points_csv("# header\n0,0\n\n 1 , 0.5 # trailing\n").unwrap();
        assert_eq!(pts, vec![(2, Point2::new(0.0, 0.0)), (4, Point2::new(1.0, 0.5))]);
        let e = parse_points_csv("0,0\n1;2\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = parse_points_csv("0,0\n1,abc\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(parse_points_csv("nan,1").is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let pts = generate_square(Scheme::Jitter(0.3), 5, 1).unwrap();
        let back: Vec<Point2> = parse_points_csv(&write_points_csv(&pts)).unwrap().into_iter().map(|p| p.1).collect();
        assert_eq!(back, pts);
    }

    #[test]
    fn mesh_round_trip_is_bit_exact() {
        let g = grid();
        let text = write_mesh_json(&g);
        let h = read_mesh_json(&text).unwrap();
        assert_eq!(write_mesh_json(&h), text);
        assert_eq!(g.cells(), h.cells());
        assert_eq!(g.nodes(), h.nodes());
        for k in 0..g.num_nodes() {
            assert_eq!(g.measure(k).to_bits(), h.measure(k).to_bits());
            assert_eq!(g.node_cells(k), h.node_cells(k));
        }
        assert!(h.verify().is_empty());
    }

    #[test]
    fn corrupt_mesh_is_rejected() {
        let g = grid();
        let text = write_mesh_json(&g);
        assert!(read_mesh_json(&text[..text.len() / 2]).is_err());
        let mut f = MeshFile::from_grid(&g);
        f.cells[0].v_head = 10_000;
        assert!(f.to_grid().is_err());
        let mut f = MeshFile::from_grid(&g);
        f.cells[0].v_head = f.cells[0].v_tail;
        assert!(f.to_grid().is_err());
        let mut f = MeshFile::from_grid(&g);
        f.measures.pop();
        assert!(f.to_grid().is_err());
    }

    #[test]
    fn vtk_layout() {
        let g = grid();
        let s = write_vtk(&g, &[], &[]).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 2.0\n"));
        assert!(s.contains(&format!("CELLS {} ", g.num_cells())));
        assert!(!s.contains("POINT_DATA") && !s.contains("CELL_DATA"));
        let z = NodeField::zeros(&g);
        let s = write_vtk(&g, &[("u", &z)], &[]).unwrap();
        let tail = s.split("LOOKUP_TABLE default\n").nth(1).unwrap();
        assert_eq!(tail.lines().count(), g.num_nodes());
        assert!(tail.lines().all(|l| l == "0.0000000000000000e0"));
        assert!(write_vtk(&g, &[("u", &NodeField(vec![0.0]))], &[]).is_err());
    }
}
