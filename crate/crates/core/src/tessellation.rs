//! Delaunay triangulation of the D-nodes and the dual Voronoi diagram
//! clipped to the convex domain.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{
    bbox_diameter, circumcenter, clip_convex, incircle, orient2d, orientation, CirclePosition,
    ConvexPolygon, HalfPlane, Orientation, Point2, EPS_GEOM,
};

/// Delaunay triangulation of a point set covering a convex domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Triangulation {
    pub d_nodes: Vec<Point2>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// `neighbors[t][k]` is the triangle across the edge opposite vertex `k`.
    pub neighbors: Vec<[Option<usize>; 3]>,
    /// Hull edges `(i, i⁺)` in counterclockwise order around ∂Ω.
    pub boundary_edges: Vec<(usize, usize)>,
}

impl Triangulation {
    /// Builds a triangulation from explicit triangles, computing adjacency and
    /// the boundary chain. No Delaunay property is enforced.
    pub fn from_triangles(d_nodes: Vec<Point2>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= d_nodes.len()) {
                return Err(Error::Format(format!("triangle {t} references a missing node")));
            }
            let [a, b, c] = tri.map(|v| d_nodes[v]);
            if orientation(a, b, c) != Orientation::CounterClockwise {
                return Err(Error::DegenerateTriangle);
            }
        }
        let neighbors = adjacency(&triangles);
        let boundary_edges = boundary_chain(&triangles, &neighbors)?;
        Ok(Triangulation {
            d_nodes,
            triangles,
            neighbors,
            boundary_edges,
        })
    }

    pub fn vertices(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].map(|v| self.d_nodes[v])
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        0.5 * orient2d(a, b, c)
    }

    /// Every edge once: `(a, b, left, right)` with `left` the triangle holding
    /// `a → b` counterclockwise (the lower id for interior edges) and `right`
    /// the triangle across, if any.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.triangles.len() * 3 / 2 + 1);
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let nb = self.neighbors[t][k];
                if nb.is_none_or(|u| u > t) {
                    out.push(Edge {
                        a: tri[(k + 1) % 3],
                        b: tri[(k + 2) % 3],
                        left: t,
                        right: nb,
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub left: usize,
    pub right: Option<usize>,
}

fn adjacency(triangles: &[[usize; 3]]) -> Vec<[Option<usize>; 3]> {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 3);
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            directed.insert((tri[(k + 1) % 3], tri[(k + 2) % 3]), t);
        }
    }
    triangles
        .iter()
        .map(|tri| {
            let mut nb = [None; 3];
            for (k, slot) in nb.iter_mut().enumerate() {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                *slot = directed.get(&(b, a)).copied();
            }
            nb
        })
        .collect()
}

fn boundary_chain(
    triangles: &[[usize; 3]],
    neighbors: &[[Option<usize>; 3]],
) -> Result<Vec<(usize, usize)>> {
    let mut next: HashMap<usize, usize> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            if neighbors[t][k].is_none() {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                if next.insert(a, b).is_some() {
                    return Err(Error::Format(format!("boundary is not a simple chain at node {a}")));
                }
            }
        }
    }
    let Some(&start) = next.keys().min() else {
        return Ok(Vec::new());
    };
    let mut chain = Vec::with_capacity(next.len());
    let mut cur = start;
    loop {
        let nxt = next[&cur];
        chain.push((cur, nxt));
        cur = nxt;
        if cur == start {
            break;
        }
        if chain.len() > next.len() || !next.contains_key(&cur) {
            return Err(Error::Format("boundary chain does not close".into()));
        }
    }
    if chain.len() != next.len() {
        return Err(Error::Format("boundary has more than one component".into()));
    }
    Ok(chain)
}

fn validate_points(points: &[Point2], domain: &ConvexPolygon) -> Result<Vec<usize>> {
    let diam = domain.diameter();
    let tol = EPS_GEOM * diam;
    for (i, p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite(*p));
        }
        if !domain.contains(*p, tol) {
            return Err(Error::PointOutsideDomain { index: i, point: *p });
        }
    }
    // sweep along x1 for coincident pairs
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].x1.total_cmp(&points[j].x1).then(i.cmp(&j)));
    let mut dups = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if points[j].x1 - points[i].x1 > tol {
                break;
            }
            if points[i].dist(points[j]) <= tol {
                dups.push((i.min(j), i.max(j)));
            }
        }
    }
    if !dups.is_empty() {
        dups.sort_unstable();
        return Err(Error::DuplicatePoints(dups));
    }
    if points.len() < 3
        || points
            .iter()
            .all(|&p| orientation(points[0], points[1], p) == Orientation::Collinear)
    {
        return Err(Error::Collinear);
    }
    domain
        .vertices()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            points
                .iter()
                .position(|p| p.dist(*v) <= tol)
                .ok_or(Error::MissingDomainVertex(k))
        })
        .collect()
}

fn circle_of(points: &[Point2], tri: [usize; 3], d: Point2) -> CirclePosition {
    let [a, b, c] = tri.map(|v| points[v]);
    incircle(a, b, c, d).unwrap_or(CirclePosition::Outside)
}

/// Delaunay triangulation of a convex polygon's vertices by fan + Lawson flips.
/// The fan starts at the vertex with the lowest point index and flips happen
/// only on strict incircle violations, which fixes cocircular ties.
fn polygon_delaunay(points: &[Point2], ring: &[usize]) -> Vec<[usize; 3]> {
    let n = ring.len();
    let s = (0..n).min_by_key(|&k| ring[k]).unwrap_or(0);
    let mut tris: Vec<[usize; 3]> = (1..n - 1)
        .map(|i| [ring[s], ring[(s + i) % n], ring[(s + i + 1) % n]])
        .collect();
    'outer: loop {
        let nb = adjacency(&tris);
        for t in 0..tris.len() {
            for k in 0..3 {
                let Some(u) = nb[t][k] else { continue };
                let ku = (0..3).find(|&j| nb[u][j] == Some(t)).unwrap();
                let q = tris[u][ku];
                if circle_of(points, tris[t], points[q]) == CirclePosition::Inside {
                    let p0 = tris[t][k];
                    let p1 = tris[t][(k + 1) % 3];
                    let p2 = tris[t][(k + 2) % 3];
                    tris[t] = [p0, p1, q];
                    tris[u] = [q, p2, p0];
                    continue 'outer;
                }
            }
        }
        break;
    }
    tris
}

struct Builder<'a> {
    points: &'a [Point2],
    tris: Vec<[usize; 3]>,
    nbr: Vec<[Option<usize>; 3]>,
    alive: Vec<bool>,
    last: usize,
}

impl Builder<'_> {
    fn locate(&self, p: Point2) -> usize {
        let mut t = self.last;
        let limit = 4 * self.tris.len() + 16;
        'walk: for _ in 0..limit {
            let tri = self.tris[t];
            for k in 0..3 {
                let (a, b) = (self.points[tri[(k + 1) % 3]], self.points[tri[(k + 2) % 3]]);
                if orientation(a, b, p) == Orientation::Clockwise {
                    if let Some(u) = self.nbr[t][k] {
                        t = u;
                        continue 'walk;
                    }
                }
            }
            return t;
        }
        // walk failed to terminate; pick the triangle p is least outside of
        let mut best = (f64::NEG_INFINITY, self.last);
        for t in (0..self.tris.len()).filter(|&t| self.alive[t]) {
            let tri = self.tris[t];
            let worst = (0..3)
                .map(|k| {
                    let (a, b) = (self.points[tri[(k + 1) % 3]], self.points[tri[(k + 2) % 3]]);
                    orient2d(a, b, p) / a.dist(b)
                })
                .fold(f64::INFINITY, f64::min);
            if worst > best.0 {
                best = (worst, t);
            }
        }
        best.1
    }

    fn insert(&mut self, pi: usize) -> Result<()> {
        let p = self.points[pi];
        let start = self.locate(p);
        let mut in_cavity = vec![false; self.tris.len()];
        let mut cavity = vec![start];
        in_cavity[start] = true;
        let mut head = 0;
        while head < cavity.len() {
            let t = cavity[head];
            head += 1;
            for k in 0..3 {
                if let Some(u) = self.nbr[t][k] {
                    if !in_cavity[u] && circle_of(self.points, self.tris[u], p) == CirclePosition::Inside {
                        in_cavity[u] = true;
                        cavity.push(u);
                    }
                }
            }
        }

        // cavity boundary; grow the cavity if p is not strictly visible from
        // an interior boundary edge
        let rim = loop {
            let mut rim = Vec::new();
            let mut grow = None;
            'scan: for &t in &cavity {
                for k in 0..3 {
                    let outer = self.nbr[t][k];
                    if outer.is_some_and(|u| in_cavity[u]) {
                        continue;
                    }
                    let (a, b) = (self.tris[t][(k + 1) % 3], self.tris[t][(k + 2) % 3]);
                    match orientation(self.points[a], self.points[b], p) {
                        Orientation::CounterClockwise => rim.push((a, b, outer)),
                        Orientation::Collinear if outer.is_none() => {}
                        _ => match outer {
                            Some(u) => {
                                grow = Some(u);
                                break 'scan;
                            }
                            None => return Err(Error::PointOutsideDomain { index: pi, point: p }),
                        },
                    }
                }
            }
            match grow {
                Some(u) => {
                    in_cavity[u] = true;
                    cavity.push(u);
                }
                None => break rim,
            }
        };

        for &t in &cavity {
            self.alive[t] = false;
        }
        let mut starting_at: HashMap<usize, usize> = HashMap::with_capacity(rim.len());
        let first_new = self.tris.len();
        for &(a, b, outer) in &rim {
            let id = self.tris.len();
            self.tris.push([a, b, pi]);
            self.nbr.push([None, None, outer]);
            self.alive.push(true);
            if let Some(u) = outer {
                let ku = (0..3)
                    .find(|&j| {
                        let ut = self.tris[u];
                        ut[(j + 1) % 3] == b && ut[(j + 2) % 3] == a
                    })
                    .expect("outer triangle shares the rim edge");
                self.nbr[u][ku] = Some(id);
            }
            starting_at.insert(a, id);
        }
        for id in first_new..self.tris.len() {
            let [_, b, _] = self.tris[id];
            if let Some(&y) = starting_at.get(&b) {
                self.nbr[id][0] = Some(y);
                self.nbr[y][1] = Some(id);
            }
        }
        self.last = first_new;
        Ok(())
    }
}

/// Bowyer–Watson Delaunay triangulation of `points` over `domain`.
///
/// The domain's vertices must be among the points. Insertion starts from a
/// Delaunay triangulation of the domain polygon and proceeds in input order,
/// so the result is a deterministic function of the input sequence.
pub fn delaunay(points: &[Point2], domain: &ConvexPolygon) -> Result<Triangulation> {
    let ring = validate_points(points, domain)?;
    let init = polygon_delaunay(points, &ring);
    let nbr = adjacency(&init);
    let mut b = Builder {
        points,
        alive: vec![true; init.len()],
        tris: init,
        nbr,
        last: 0,
    };
    let mut is_corner = vec![false; points.len()];
    for &v in &ring {
        is_corner[v] = true;
    }
    for pi in 0..points.len() {
        if !is_corner[pi] {
            b.insert(pi)?;
        }
    }

    let mut remap = vec![usize::MAX; b.tris.len()];
    let mut triangles = Vec::new();
    for t in 0..b.tris.len() {
        if b.alive[t] {
            remap[t] = triangles.len();
            triangles.push(b.tris[t]);
        }
    }
    let neighbors: Vec<[Option<usize>; 3]> = (0..b.tris.len())
        .filter(|&t| b.alive[t])
        .map(|t| b.nbr[t].map(|o| o.map(|u| remap[u])))
        .collect();
    let boundary_edges = boundary_chain(&triangles, &neighbors)?;
    let tri = Triangulation {
        d_nodes: points.to_vec(),
        triangles,
        neighbors,
        boundary_edges,
    };
    let covered: f64 = (0..tri.triangles.len()).map(|t| tri.area(t)).sum();
    let meas = domain.area();
    if (covered - meas).abs() > 1e-10 * meas {
        return Err(Error::Inadmissible(format!(
            "triangulation covers {covered}, domain measure is {meas}"
        )));
    }
    Ok(tri)
}

/// Result of [`check_delaunay`].
#[derive(Clone, Debug, PartialEq)]
pub struct DelaunayReport {
    /// `(triangle, point)` pairs with the point strictly inside the circumcircle.
    pub violations: Vec<(usize, usize)>,
    /// Degrees.
    pub min_angle: f64,
    pub max_angle: f64,
    pub min_edge: f64,
}

/// Brute-force empty-circumcircle validator with angle and edge statistics.
pub fn check_delaunay(tri: &Triangulation) -> DelaunayReport {
    let mut violations = Vec::new();
    let mut min_angle = f64::INFINITY;
    let mut max_angle: f64 = 0.0;
    let mut min_edge = f64::INFINITY;
    for (t, vs) in tri.triangles.iter().enumerate() {
        let [a, b, c] = tri.vertices(t);
        for (p, q, r) in [(a, b, c), (b, c, a), (c, a, b)] {
            let u = q - p;
            let v = r - p;
            let ang = u.cross(v).atan2(u.dot(v)).abs().to_degrees();
            min_angle = min_angle.min(ang);
            max_angle = max_angle.max(ang);
            min_edge = min_edge.min(u.norm());
        }
        for (i, &d) in tri.d_nodes.iter().enumerate() {
            if vs.contains(&i) {
                continue;
            }
            if matches!(incircle(a, b, c, d), Ok(CirclePosition::Inside)) {
                violations.push((t, i));
            }
        }
    }
    DelaunayReport {
        violations,
        min_angle,
        max_angle,
        min_edge,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum VNodeKind {
    /// Shared circumcenter of one or more (cocircular, adjacent) triangles.
    Circumcenter { triangles: Vec<usize> },
    /// Midpoint of a boundary Delaunay edge (index into `Triangulation::edges`).
    BoundaryClip { edge: usize },
}

/// Voronoi diagram of the D-nodes clipped to the domain.
#[derive(Clone, Debug)]
pub struct VoronoiDiagram {
    pub v_nodes: Vec<Point2>,
    pub kind: Vec<VNodeKind>,
    /// Clipped Voronoi polygon per D-node.
    pub cells: Vec<ConvexPolygon>,
    /// V-node holding each triangle's circumcenter.
    pub triangle_vnode: Vec<usize>,
    /// Delaunay edges in [`Triangulation::edges`] order.
    pub edges: Vec<Edge>,
    /// Dual Voronoi edge per Delaunay edge: (left circumcenter node,
    /// right circumcenter node or boundary clip node).
    pub dual_edge: Vec<(usize, usize)>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Dual Voronoi diagram of `tri`, clipped to `domain`.
///
/// Circumcenters closer than `EPS_GEOM · diam` across a shared edge are merged
/// into one V-node. Fails when a circumcenter lies outside the closed domain.
pub fn voronoi(tri: &Triangulation, domain: &ConvexPolygon) -> Result<VoronoiDiagram> {
    let diam = domain.diameter().max(bbox_diameter(&tri.d_nodes));
    let tol = EPS_GEOM * diam;
    let centers: Vec<Point2> = (0..tri.triangles.len())
        .map(|t| {
            let [a, b, c] = tri.vertices(t);
            circumcenter(a, b, c)
        })
        .collect::<Result<_>>()?;
    for (t, c) in centers.iter().enumerate() {
        if !domain.contains(*c, tol) {
            return Err(Error::Inadmissible(format!(
                "Voronoi vertex outside Ω (circumcenter of triangle {t} at ({}, {}))",
                c.x1, c.x2
            )));
        }
    }

    let edges = tri.edges();
    let mut parent: Vec<usize> = (0..centers.len()).collect();
    for e in &edges {
        if let Some(r) = e.right {
            if centers[e.left].dist(centers[r]) <= tol {
                let (x, y) = (find(&mut parent, e.left), find(&mut parent, r));
                // the smaller id stays root so groups are named by their first triangle
                if x != y {
                    parent[x.max(y)] = x.min(y);
                }
            }
        }
    }
    let mut v_nodes = Vec::new();
    let mut kind = Vec::new();
    let mut triangle_vnode = vec![usize::MAX; centers.len()];
    let mut group_node: HashMap<usize, usize> = HashMap::new();
    for t in 0..centers.len() {
        let root = find(&mut parent, t);
        let node = *group_node.entry(root).or_insert_with(|| {
            v_nodes.push(centers[root]);
            kind.push(VNodeKind::Circumcenter { triangles: Vec::new() });
            v_nodes.len() - 1
        });
        if let VNodeKind::Circumcenter { triangles } = &mut kind[node] {
            triangles.push(t);
        }
        triangle_vnode[t] = node;
    }

    let mut dual_edge = Vec::with_capacity(edges.len());
    for (id, e) in edges.iter().enumerate() {
        let tail = triangle_vnode[e.left];
        let head = match e.right {
            Some(r) => triangle_vnode[r],
            None => {
                v_nodes.push(tri.d_nodes[e.a].midpoint(tri.d_nodes[e.b]));
                kind.push(VNodeKind::BoundaryClip { edge: id });
                v_nodes.len() - 1
            }
        };
        dual_edge.push((tail, head));
    }

    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); tri.d_nodes.len()];
    for e in &edges {
        nbrs[e.a].push(e.b);
        nbrs[e.b].push(e.a);
    }
    let cells = nbrs
        .iter()
        .enumerate()
        .map(|(i, ns)| {
            let p = tri.d_nodes[i];
            let mut cell = domain.clone();
            for &j in ns {
                cell = clip_convex(&cell, HalfPlane::bisector(p, tri.d_nodes[j])).ok_or_else(|| {
                    Error::Inadmissible(format!("Voronoi cell of D-node {i} is empty"))
                })?;
            }
            Ok(cell)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(VoronoiDiagram {
        v_nodes,
        kind,
        cells,
        triangle_vnode,
        edges,
        dual_edge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn square_with_random(n: usize, seed: u64) -> Vec<Point2> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut pts = ConvexPolygon::unit_square().vertices().to_vec();
        for _ in 0..n {
            pts.push(p(rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99)));
        }
        pts
    }

    #[test]
    fn single_triangle() {
        let pts = vec![p(0., 0.), p(1., 0.), p(0., 1.)];
        let dom = ConvexPolygon::new(pts.clone()).unwrap();
        let t = delaunay(&pts, &dom).unwrap();
        assert_eq!(t.triangles.len(), 1);
        assert_eq!(t.boundary_edges.len(), 3);
    }

    #[test]
    fn square_corners_tie_break() {
        let dom = ConvexPolygon::unit_square();
        let pts = dom.vertices().to_vec();
        let t = delaunay(&pts, &dom).unwrap();
        assert_eq!(t.triangles.len(), 2);
        // the shared diagonal runs through vertex 0
        let interior: Vec<_> = t.edges().into_iter().filter(|e| e.right.is_some()).collect();
        assert_eq!(interior.len(), 1);
        assert!(interior[0].a == 0 || interior[0].b == 0);
        assert_eq!([interior[0].a, interior[0].b].iter().sum::<usize>(), 2);

        // reversed input order: the lowest index is now corner (0,1)
        let rev: Vec<Point2> = pts.iter().rev().copied().collect();
        let t = delaunay(&rev, &dom).unwrap();
        let diag = t.edges().into_iter().find(|e| e.right.is_some()).unwrap();
        assert!(diag.a == 0 || diag.b == 0);
    }

    #[test]
    fn random_points_are_delaunay() {
        let pts = square_with_random(100, 1);
        let t = delaunay(&pts, &ConvexPolygon::unit_square()).unwrap();
        let rep = check_delaunay(&t);
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        let area: f64 = (0..t.triangles.len()).map(|k| t.area(k)).sum();
        assert!((area - 1.0).abs() < 1e-12);
        // Euler: T = 2N − h − 2
        assert_eq!(t.triangles.len(), 2 * pts.len() - t.boundary_edges.len() - 2);
    }

    #[test]
    fn deterministic() {
        let pts = square_with_random(200, 3);
        let a = delaunay(&pts, &ConvexPolygon::unit_square()).unwrap();
        let b = delaunay(&pts, &ConvexPolygon::unit_square()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn collinear_boundary_points() {
        let mut pts = ConvexPolygon::unit_square().vertices().to_vec();
        for k in 1..10 {
            let s = k as f64 / 10.0;
            pts.extend([p(s, 0.), p(1., s), p(1. - s, 1.), p(0., 1. - s)]);
        }
        pts.push(p(0.5, 0.45));
        let t = delaunay(&pts, &ConvexPolygon::unit_square()).unwrap();
        assert_eq!(t.boundary_edges.len(), 40);
        assert!(check_delaunay(&t).violations.is_empty());
    }

    #[test]
    fn input_errors() {
        let dom = ConvexPolygon::unit_square();
        let mut pts = dom.vertices().to_vec();
        pts.push(p(0.5, 0.5));
        pts.push(p(0.5, 0.5));
        match delaunay(&pts, &dom) {
            Err(Error::DuplicatePoints(d)) => assert_eq!(d, vec![(4, 5)]),
            other => panic!("{other:?}"),
        }
        let pts = vec![p(0., 0.), p(1., 0.), p(0.5, 0.5)];
        assert!(matches!(delaunay(&pts, &dom), Err(Error::MissingDomainVertex(_))));
        let mut pts = dom.vertices().to_vec();
        pts.push(p(2., 2.));
        assert!(matches!(delaunay(&pts, &dom), Err(Error::PointOutsideDomain { index: 4, .. })));
        let tri = ConvexPolygon::new(vec![p(0., 0.), p(1., 0.), p(0., 1.)]).unwrap();
        assert!(matches!(
            delaunay(&[p(0., 0.), p(0.5, 0.), p(1., 0.)], &tri),
            Err(Error::Collinear)
        ));
    }

    #[test]
    fn detector_fires_on_illegal_diagonal() {
        // square corners plus an interior point; the forced diagonal 1-3
        // leaves point 4 inside the circumcircle of (1,2,3)
        let pts = vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.), p(0.25, 0.7)];
        let t = Triangulation::from_triangles(
            pts,
            vec![[0, 1, 4], [1, 3, 4], [3, 0, 4], [1, 2, 3]],
        )
        .unwrap();
        assert!(!check_delaunay(&t).violations.is_empty());
        let good = delaunay(&t.d_nodes, &ConvexPolygon::unit_square()).unwrap();
        assert!(check_delaunay(&good).violations.is_empty());
    }

    fn hexagon_lattice(m: i32, h: f64) -> (Vec<Point2>, ConvexPolygon) {
        let s3 = 3f64.sqrt();
        let mut pts = Vec::new();
        let corner = |a: i32, b: i32| p(h * (a as f64 + 0.5 * b as f64), h * s3 * 0.5 * b as f64);
        let ring = [(m, 0), (0, m), (-m, m), (-m, 0), (0, -m), (m, -m)];
        for &(a, b) in &ring {
            pts.push(corner(a, b));
        }
        for b in -m..=m {
            for a in -m..=m {
                if (a + b).abs() <= m && !ring.contains(&(a, b)) {
                    pts.push(corner(a, b));
                }
            }
        }
        let dom = ConvexPolygon::new(ring.iter().map(|&(a, b)| corner(a, b)).collect()).unwrap();
        (pts, dom)
    }

    #[test]
    fn equilateral_min_angle() {
        let (pts, dom) = hexagon_lattice(4, 0.25);
        let t = delaunay(&pts, &dom).unwrap();
        let rep = check_delaunay(&t);
        assert!(rep.violations.is_empty());
        assert!((rep.min_angle - 60.0).abs() < 1e-9);
        assert!((rep.max_angle - 60.0).abs() < 1e-9);
        assert_eq!(t.triangles.len(), 6 * 16);
    }

    #[test]
    fn voronoi_quarter_squares() {
        let dom = ConvexPolygon::unit_square();
        let t = delaunay(dom.vertices(), &dom).unwrap();
        let v = voronoi(&t, &dom).unwrap();
        for c in &v.cells {
            assert!((c.area() - 0.25).abs() < 1e-15);
        }
        // both triangles share the circumcenter (0.5, 0.5): merged
        assert_eq!(v.triangle_vnode[0], v.triangle_vnode[1]);
        let circ = v.kind.iter().filter(|k| matches!(k, VNodeKind::Circumcenter { .. })).count();
        assert_eq!(circ, 1);
        assert_eq!(v.v_nodes.len(), 1 + 4);
    }

    #[test]
    fn boundary_dual_edge_hits_midpoint() {
        // triangle (0,0),(1,0),(0.5,0.7): circumcenter on x1 = 0.5 above the base
        let pts = vec![p(0., 0.), p(1., 0.), p(0.5, 0.7)];
        let dom = ConvexPolygon::new(pts.clone()).unwrap();
        let t = delaunay(&pts, &dom).unwrap();
        let v = voronoi(&t, &dom).unwrap();
        let (id, _) = v.edges.iter().enumerate().find(|(_, e)| (e.a, e.b) == (0, 1)).unwrap();
        let (tail, head) = v.dual_edge[id];
        let cc = v.v_nodes[tail];
        assert!((cc.x1 - 0.5).abs() < 1e-15);
        assert_eq!(v.v_nodes[head], p(0.5, 0.0));
        assert!((cc - v.v_nodes[head]).dot(p(1., 0.)).abs() < 1e-15);
    }

    #[test]
    fn circumcenter_outside_domain_rejected() {
        let dom = ConvexPolygon::unit_square();
        let mut pts = dom.vertices().to_vec();
        pts.push(p(0.5, 0.4));
        let t = delaunay(&pts, &dom).unwrap();
        assert_eq!(t.triangles.len(), 4);
        assert_eq!(t.edges().len(), 8);
        let err = voronoi(&t, &dom).unwrap_err();
        assert!(err.to_string().contains("Voronoi vertex outside Ω"), "{err}");
    }

    /// Fraction of sample points nearer to `node` than to any other node.
    fn sampled_cell_area(pts: &[Point2], node: usize, dom: &ConvexPolygon, m: usize) -> f64 {
        let mut hits = 0usize;
        let mut inside = 0usize;
        let [lo, hi] = [0, 1].map(|k| {
            let xs = dom.vertices().iter().map(|v| if k == 0 { v.x1 } else { v.x2 });
            (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max))
        });
        for i in 0..m {
            for j in 0..m {
                let q = p(
                    lo.0 + (lo.1 - lo.0) * (i as f64 + 0.5) / m as f64,
                    hi.0 + (hi.1 - hi.0) * (j as f64 + 0.5) / m as f64,
                );
                if !dom.contains(q, 0.0) {
                    continue;
                }
                inside += 1;
                let best = (0..pts.len())
                    .min_by(|&a, &b| q.dist(pts[a]).total_cmp(&q.dist(pts[b])))
                    .unwrap();
                if best == node {
                    hits += 1;
                }
            }
        }
        dom.area() * hits as f64 / inside as f64
    }

    #[test]
    fn equilateral_centroid_cell_matches_sampling() {
        let s3 = 3f64.sqrt();
        let corners = vec![p(0., 0.), p(1., 0.), p(0.5, 0.5 * s3)];
        let dom = ConvexPolygon::new(corners.clone()).unwrap();
        let mut pts = corners;
        pts.push(p(0.5, 0.5 / s3));
        let t = delaunay(&pts, &dom).unwrap();
        // circumcenters of the three obtuse sub-triangles leave Ω, which the
        // diagram must reject; the cell itself is still well defined by clipping
        assert!(voronoi(&t, &dom).is_err());
        let mut cell = dom.clone();
        for j in 0..3 {
            cell = clip_convex(&cell, HalfPlane::bisector(pts[3], pts[j])).unwrap();
        }
        let sampled = sampled_cell_area(&pts, 3, &dom, 500);
        assert!((cell.area() - sampled).abs() < 0.01 * cell.area());
        // the three bisectors cut the corners off: a regular hexagon with
        // apothem equal to the inradius 1/(2√3), area √3/6
        assert_eq!(cell.len(), 6);
        assert!((cell.area() - s3 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn voronoi_partition_and_duality() {
        let (pts, dom) = hexagon_lattice(3, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        // jitter interior nodes slightly
        let pts: Vec<Point2> = pts
            .iter()
            .map(|&q| {
                if dom.boundary_distance(q) > 1e-9 {
                    q + p(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1))
                } else {
                    q
                }
            })
            .collect();
        let t = delaunay(&pts, &dom).unwrap();
        let v = voronoi(&t, &dom).unwrap();
        let total: f64 = v.cells.iter().map(|c| c.area()).sum();
        assert!((total - dom.area()).abs() < 1e-10 * dom.area());
        for (e, &(a, b)) in v.edges.iter().zip(&v.dual_edge) {
            let de = t.d_nodes[e.b] - t.d_nodes[e.a];
            let ve = v.v_nodes[b] - v.v_nodes[a];
            if ve.norm() > 0.0 {
                assert!((de.dot(ve) / (de.norm() * ve.norm())).abs() <= 1e-10);
            }
        }
        // every clipped-cell vertex is a V-node or a domain corner
        for (i, c) in v.cells.iter().enumerate() {
            assert!(c.contains(pts[i], 0.0));
            for q in c.vertices() {
                let known = v.v_nodes.iter().chain(dom.vertices()).any(|w| w.dist(*q) < 1e-9);
                assert!(known, "cell {i} vertex {q:?}");
            }
        }
    }
}
