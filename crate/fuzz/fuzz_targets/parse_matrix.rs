#![no_main]

use libfuzzer_sys::fuzz_target;
use otflow::construct::{analyze_matrix, parse_matrix};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_matrix(s) {
        let _ = analyze_matrix(&m);
    }
});
