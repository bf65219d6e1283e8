//! Replays the checked-in fuzz corpus through every decoder on stable,
//! with the same assertions the fuzz targets make.

use std::fs;
use std::path::PathBuf;

use swbce::checkpoint::Checkpoint;
use swbce::dataset::DatasetManifest;
use swbce::pgm;
use swbce_cli::{parse_b_values, RunManifest};

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus {target}");
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn accepted(target: &str, check: impl Fn(&[u8]) -> bool) -> Vec<String> {
    corpus(target).into_iter().filter(|(_, data)| check(data)).map(|(name, _)| name).collect()
}

#[test]
fn pgm_corpus() {
    let ok = accepted("decode_pgm", |data| match pgm::decode(data) {
        Ok(img) => {
            assert_eq!(img.samples.len(), img.width * img.height);
            assert_eq!(pgm::decode(&pgm::encode(&img)).unwrap(), img);
            true
        }
        Err(_) => false,
    });
    assert_eq!(
        ok,
        ["comments.pgm", "edges_8bit.pgm", "image_8bit.pgm", "pred_16bit.pgm", "single_line_header.pgm"]
    );
}

#[test]
fn checkpoint_corpus() {
    let ok = accepted("decode_checkpoint", |data| match Checkpoint::decode(data) {
        Ok(c) => {
            assert_eq!(c.encode(), data);
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["trained_1_epoch.bin"]);
}

#[test]
fn dataset_manifest_corpus() {
    let ok = accepted("parse_dataset_manifest", |data| match DatasetManifest::parse(data) {
        Ok(m) => {
            assert_eq!(DatasetManifest::parse(m.to_json().as_bytes()).unwrap(), m);
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["generated.json"]);
}

#[test]
fn run_manifest_corpus() {
    let ok = accepted("parse_run_manifest", |data| RunManifest::parse(data).is_ok());
    assert_eq!(ok.len(), 7, "{ok:?}");
}

#[test]
fn b_values_corpus() {
    let ok = accepted("parse_b_values", |data| {
        let Ok(s) = std::str::from_utf8(data) else { return false };
        match parse_b_values(s) {
            Ok(v) => {
                assert!(v.iter().all(|b| b.is_finite() && *b >= 0.0));
                true
            }
            Err(_) => false,
        }
    });
    assert_eq!(ok, ["default_grid", "single", "spaced"]);
}
