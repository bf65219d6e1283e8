#![no_main]

use libfuzzer_sys::fuzz_target;
use swbce_cli::RunManifest;

fuzz_target!(|data: &[u8]| {
    let _ = RunManifest::parse(data);
});
