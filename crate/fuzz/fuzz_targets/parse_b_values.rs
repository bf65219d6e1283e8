#![no_main]

use libfuzzer_sys::fuzz_target;
use swbce_cli::parse_b_values;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(values) = parse_b_values(s) {
            assert!(!values.is_empty());
            assert!(values.iter().all(|b| b.is_finite() && *b >= 0.0));
        }
    }
});
