#![no_main]

use libfuzzer_sys::fuzz_target;
use mvd_core::io::{read_mesh_json, write_mesh_json};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = read_mesh_json(s) {
        let _ = grid.verify();
        let _ = mvd_core::grid::admissibility_report(&grid);
        let text = write_mesh_json(&grid);
        let again = read_mesh_json(&text).expect("written mesh reads back");
        assert_eq!(write_mesh_json(&again), text);
    }
});
