#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};
use swbce::pgm::{self, Maxval, PgmImage};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn swbce(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_swbce"))
        .args(args)
        .current_dir(dir)
        .env_remove("SWBCE_OUT_ROOT")
        .output()
        .expect("spawn swbce");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Runs and insists on exit 0.
pub fn ok(dir: &Path, args: &[&str]) -> Run {
    let r = swbce(dir, args);
    assert_eq!(r.code, 0, "swbce {args:?} failed:\n{}\n{}", r.stdout, r.stderr);
    r
}

/// Run manifest with the fields that legitimately vary between runs
/// (timing, worker count) removed.
pub fn stable_manifest(bytes: &[u8]) -> Vec<u8> {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).expect("manifest json");
    let obj = v.as_object_mut().expect("manifest object");
    obj.remove("wall_clock_seconds");
    obj.remove("threads");
    serde_json::to_vec(&v).unwrap()
}

/// SHA-256 over every file under `root` (sorted relative path, then
/// contents). Run manifests are hashed in their stable form.
pub fn tree_hash(root: &Path) -> String {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                let mut bytes = fs::read(&path).unwrap();
                if path.file_name().is_some_and(|n| n == "run_manifest.json") {
                    bytes = stable_manifest(&bytes);
                }
                out.push((rel, bytes));
            }
        }
    }
    let mut files = Vec::new();
    walk(root, root, &mut files);
    files.sort();
    let mut h = Sha256::new();
    for (rel, bytes) in files {
        h.update(rel.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    hex::encode(h.finalize())
}

pub fn write_pgm(path: &Path, width: usize, height: usize, samples: Vec<u16>, maxval: Maxval) {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).unwrap();
    }
    pgm::write_pgm(&PgmImage { width, height, maxval, samples }, path).unwrap();
}

/// The 2×2 loss fixture: prediction [[0.8, 0.2], [0.2, 0.2]] as 16-bit
/// samples (both values are exact multiples of 1/65535) and ground truth
/// with a single edge pixel at the top left.
pub fn write_loss_fixture(dir: &Path) {
    write_pgm(&dir.join("pred.pgm"), 2, 2, vec![52428, 13107, 13107, 13107], Maxval::Sixteen);
    write_pgm(&dir.join("gt.pgm"), 2, 2, vec![255, 0, 0, 0], Maxval::Eight);
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}
