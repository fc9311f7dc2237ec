use mvd_core::bvp::{assemble, from_fn, CoefficientSet, Problem};
use mvd_core::expr;
use mvd_core::generate::{generate_square, Scheme};
use mvd_core::geometry::ConvexPolygon;
use mvd_core::grid::{
    inner_cells, inner_omega, mvd_from_points, norm_cells, norm_omega, CellField, MvdGrid, NodeField, Support,
};
use mvd_core::io::{parse_points_csv, read_mesh_json, write_mesh_json};
use mvd_core::ops::{div_h_field, grad_h, rot2d_scalar_h, rot2d_vector_h_field};
use proptest::prelude::*;

fn jittered(n: usize, alpha: f64, seed: u64) -> MvdGrid {
    mvd_from_points(&generate_square(Scheme::Jitter(alpha), n, seed).unwrap(), &ConvexPolygon::unit_square()).unwrap()
}

fn fields(g: &MvdGrid, vals: &[f64]) -> (NodeField, CellField) {
    let mut it = vals.iter().cycle().copied();
    let y = NodeField((0..g.num_nodes()).map(|k| if g.is_interior(k) { it.next().unwrap() } else { 0.0 }).collect());
    let v = CellField((0..g.num_cells()).map(|_| [it.next().unwrap(), it.next().unwrap()]).collect());
    (y, v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn summation_by_parts(
        n in 4usize..14,
        alpha in 0.0f64..0.3,
        seed in any::<u64>(),
        vals in prop::collection::vec(-1.0f64..1.0, 7..40),
    ) {
        let g = jittered(n, alpha, seed);
        let (y, v) = fields(&g, &vals);
        let scale = norm_omega(&y, &g, Support::Interior).unwrap() * norm_cells(&v, &g).unwrap();
        let grad = inner_cells(&grad_h(&y, &g).unwrap(), &v, &g).unwrap()
            + inner_omega(&y, &div_h_field(&v, &g).unwrap(), &g, Support::Interior).unwrap();
        let rot = inner_cells(&rot2d_scalar_h(&y, &g).unwrap(), &v, &g).unwrap()
            - inner_omega(&y, &rot2d_vector_h_field(&v, &g).unwrap(), &g, Support::Interior).unwrap();
        prop_assert!(grad.abs() <= 1e-12 * scale);
        prop_assert!(rot.abs() <= 1e-12 * scale);
    }

    #[test]
    fn complexes_vanish_inside(
        n in 4usize..14,
        seed in any::<u64>(),
        vals in prop::collection::vec(-1.0f64..1.0, 5..30),
    ) {
        let g = jittered(n, 0.2, seed);
        let y = NodeField((0..g.num_nodes()).map(|k| vals[k % vals.len()]).collect());
        let bound = 1e-12 * y.max_abs() / g.min_measure();
        let a = div_h_field(&rot2d_scalar_h(&y, &g).unwrap(), &g).unwrap();
        let b = rot2d_vector_h_field(&grad_h(&y, &g).unwrap(), &g).unwrap();
        for k in (0..g.num_nodes()).filter(|&k| g.is_interior(k)) {
            prop_assert!(a.0[k].abs() <= bound && b.0[k].abs() <= bound, "node {}", k);
        }
    }

    #[test]
    fn mesh_json_is_a_fixed_point(n in 2usize..10, alpha in 0.0f64..0.3, seed in any::<u64>()) {
        let g = jittered(n, alpha, seed);
        let a = write_mesh_json(&g);
        let h = read_mesh_json(&a).unwrap();
        prop_assert_eq!(&a, &write_mesh_json(&h));
        prop_assert!(h.verify().is_empty());
        prop_assert_eq!(g.h().to_bits(), h.h().to_bits());
        for (c, d) in g.cells().iter().zip(h.cells()) {
            prop_assert_eq!(c, d);
        }
    }

    #[test]
    fn assembled_operators_are_symmetric(n in 3usize..9, seed in any::<u64>(), which in 0usize..4) {
        let g = jittered(n, 0.2, seed);
        let problem = Problem::ALL[which];
        let k = from_fn(|p| 1.0 + p.x1);
        let c = from_fn(|p| 1.0 + p.x2 * p.x2);
        let co = if problem.is_vector() {
            CoefficientSet::vector(k, c, from_fn(|p| p.x1), from_fn(|p| p.x2))
        } else {
            CoefficientSet::scalar(k, c, from_fn(|p| p.x1))
        };
        let b = assemble(problem, &g, &co).unwrap().matrix;
        prop_assert!(b.max_asymmetry() <= 1e-12 * b.max_abs());
        for d in b.diagonal() {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn parsers_never_panic(s in "\\PC{0,64}") {
        let _ = expr::parse(&s);
        let _ = parse_points_csv(&s);
        let _ = read_mesh_json(&s);
    }

    #[test]
    fn expression_soup_never_panics(s in "[-+*/^() x12pisncoeqrtab.0-9]{0,48}") {
        if let Ok(e) = expr::parse(&s) {
            let _ = e.eval(mvd_core::geometry::Point2::new(0.3, 0.7));
            prop_assert_eq!(expr::parse(&e.to_string()).unwrap(), e);
        }
    }
}
