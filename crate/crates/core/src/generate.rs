//! Point-set generators for the D-nodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Point2, EPS_GEOM};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    Lattice,
    /// Lattice with interior nodes displaced uniformly in `[−α·h, α·h]²` and
    /// boundary nodes displaced tangentially; corners stay fixed.
    Jitter(f64),
}

fn check_args(scheme: Scheme, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Format(format!("n = {n}: need at least 2 intervals")));
    }
    if let Scheme::Jitter(a) = scheme {
        if !(0.0..0.5).contains(&a) {
            return Err(Error::Format(format!("jitter alpha = {a} outside [0, 0.5)")));
        }
    }
    Ok(())
}

/// `(n+1)²` nodes on the unit square in row-major order, corners included.
pub fn generate_square(scheme: Scheme, n: usize, seed: u64) -> Result<Vec<Point2>> {
    check_args(scheme, n)?;
    let h = 1.0 / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let mut q = Point2::new(i as f64 * h, j as f64 * h);
            if let Scheme::Jitter(alpha) = scheme {
                let on_x = i == 0 || i == n;
                let on_y = j == 0 || j == n;
                let a = alpha * h;
                match (on_x, on_y) {
                    (true, true) => {}
                    (true, false) => q.x2 += rng.gen_range(-a..=a),
                    (false, true) => q.x1 += rng.gen_range(-a..=a),
                    (false, false) => {
                        q.x1 += rng.gen_range(-a..=a);
                        q.x2 += rng.gen_range(-a..=a);
                    }
                }
            }
            pts.push(q);
        }
    }
    Ok(pts)
}

/// Nodes for an arbitrary convex domain: its vertices, each edge subdivided
/// at spacing ≈ h, and the bounding-box lattice of spacing h restricted to
/// points at least h/2 away from ∂Ω. `n` sets h = (bounding-box width)/n.
pub fn generate_polygon(domain: &ConvexPolygon, scheme: Scheme, n: usize, seed: u64) -> Result<Vec<Point2>> {
    check_args(scheme, n)?;
    let vs = domain.vertices();
    let (mut lo, mut hi) = (vs[0], vs[0]);
    for v in vs {
        lo = Point2::new(lo.x1.min(v.x1), lo.x2.min(v.x2));
        hi = Point2::new(hi.x1.max(v.x1), hi.x2.max(v.x2));
    }
    let h = (hi.x1 - lo.x1).max(hi.x2 - lo.x2) / n as f64;
    let alpha = match scheme {
        Scheme::Lattice => 0.0,
        Scheme::Jitter(a) => a,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Point2> = vs.to_vec();
    for (a, b) in domain.edges() {
        let len = a.dist(b);
        let k = (len / h).round().max(1.0) as usize;
        let step = len / k as f64;
        let dir = (b - a) * (1.0 / len);
        for s in 1..k {
            let t = s as f64 * step + if alpha > 0.0 { rng.gen_range(-alpha * step..=alpha * step) } else { 0.0 };
            pts.push(a + dir * t);
        }
    }
    let ni = ((hi.x1 - lo.x1) / h).ceil() as usize;
    let nj = ((hi.x2 - lo.x2) / h).ceil() as usize;
    for j in 0..=nj {
        for i in 0..=ni {
            let mut q = Point2::new(lo.x1 + i as f64 * h, lo.x2 + j as f64 * h);
            if !domain.contains(q, 0.0) || domain.boundary_distance(q) < 0.5 * h {
                continue;
            }
            if alpha > 0.0 {
                q.x1 += rng.gen_range(-alpha * h..=alpha * h);
                q.x2 += rng.gen_range(-alpha * h..=alpha * h);
            }
            pts.push(q);
        }
    }
    Ok(pts)
}

/// Checks that every `(line, point)` lies in the closed domain and that no
/// two coincide, naming the offending line numbers.
pub fn check_point_file(points: &[(usize, Point2)], domain: &ConvexPolygon) -> Result<Vec<Point2>> {
    let tol = EPS_GEOM * domain.diameter();
    for &(line, q) in points {
        if !domain.contains(q, tol) {
            return Err(Error::Format(format!(
                "line {line}: point ({}, {}) lies outside the domain",
                q.x1, q.x2
            )));
        }
    }
    for (a, &(la, qa)) in points.iter().enumerate() {
        for &(lb, qb) in &points[a + 1..] {
            if qa.dist(qb) <= tol {
                return Err(Error::Format(format!("lines {la} and {lb}: duplicate points")));
            }
        }
    }
    Ok(points.iter().map(|&(_, q)| q).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_counts() {
        let pts = generate_square(Scheme::Lattice, 2, 0).unwrap();
        assert_eq!(pts.len(), 9);
        let corners = pts
            .iter()
            .filter(|q| (q.x1 == 0.0 || q.x1 == 1.0) && (q.x2 == 0.0 || q.x2 == 1.0))
            .count();
        assert_eq!(corners, 4);
    }

    #[test]
    fn jitter_is_deterministic_and_bounded() {
        let a = generate_square(Scheme::Jitter(0.2), 8, 42).unwrap();
        let b = generate_square(Scheme::Jitter(0.2), 8, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_square(Scheme::Jitter(0.2), 8, 43).unwrap();
        assert_ne!(a, c);
        let lat = generate_square(Scheme::Lattice, 8, 0).unwrap();
        for (q, l) in a.iter().zip(&lat) {
            assert!((q.x1 - l.x1).abs() <= 0.2 / 8.0 + 1e-15);
            assert!((q.x2 - l.x2).abs() <= 0.2 / 8.0 + 1e-15);
            if l.x2 == 0.0 || l.x2 == 1.0 {
                assert_eq!(q.x2, l.x2);
            }
            if l.x1 == 0.0 || l.x1 == 1.0 {
                assert_eq!(q.x1, l.x1);
            }
        }
    }

    #[test]
    fn bad_arguments() {
        assert!(generate_square(Scheme::Jitter(0.5), 8, 0).is_err());
        assert!(generate_square(Scheme::Lattice, 1, 0).is_err());
    }

    #[test]
    fn point_file_rejection_names_line() {
        let pts = vec![(1, Point2::new(0.5, 0.5)), (3, Point2::new(2.0, 2.0))];
        let err = check_point_file(&pts, &ConvexPolygon::unit_square()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn polygon_generator_builds() {
        let dom = ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.5, 1.0),
            Point2::new(1.0, 2.0),
            Point2::new(-0.5, 1.0),
        ])
        .unwrap();
        let pts = generate_polygon(&dom, Scheme::Lattice, 12, 0).unwrap();
        let tri = crate::tessellation::delaunay(&pts, &dom).unwrap();
        assert!(crate::tessellation::check_delaunay(&tri).violations.is_empty());
    }
}
