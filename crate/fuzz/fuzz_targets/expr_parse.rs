#![no_main]

use libfuzzer_sys::fuzz_target;
use mvd_core::expr;
use mvd_core::geometry::Point2;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(e) = expr::parse(s) {
        let _ = e.eval(Point2::new(0.25, 0.75));
        // printing must re-parse to the same tree
        let again = expr::parse(&e.to_string()).expect("printed expression parses");
        assert_eq!(again, e);
    }
});
