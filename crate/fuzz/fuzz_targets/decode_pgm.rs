#![no_main]

use libfuzzer_sys::fuzz_target;
use swbce::pgm;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = pgm::decode(data) {
        assert_eq!(img.samples.len(), img.width * img.height);
        // Whatever decodes must re-encode to something that decodes the same.
        let again = pgm::decode(&pgm::encode(&img)).expect("re-encoded image decodes");
        assert_eq!(again, img);
        let soft = img.to_soft();
        assert!(soft.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
});
