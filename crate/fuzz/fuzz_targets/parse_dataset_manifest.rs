#![no_main]

use libfuzzer_sys::fuzz_target;
use swbce::dataset::DatasetManifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = DatasetManifest::parse(data) {
        let again = DatasetManifest::parse(m.to_json().as_bytes()).expect("round trip");
        assert_eq!(again, m);
    }
});
