#![no_main]

use libfuzzer_sys::fuzz_target;
use mvd_core::generate::check_point_file;
use mvd_core::geometry::ConvexPolygon;
use mvd_core::io::{parse_points_csv, write_points_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(pts) = parse_points_csv(s) {
        let _ = check_point_file(&pts, &ConvexPolygon::unit_square());
        let plain: Vec<_> = pts.iter().map(|&(_, p)| p).collect();
        let back = parse_points_csv(&write_points_csv(&plain)).expect("written points parse");
        assert!(back.iter().map(|&(_, p)| p).eq(plain.iter().copied()));
    }
});
