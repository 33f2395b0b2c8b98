#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// A config small enough to train in well under a second.
pub fn tiny_config(strategies: &str, seeds: &str, extra_train: &str) -> String {
    format!(
        r#"output_dir = "runs"

[dataset]
classes = 6
n_max = 30
n_min = 2
image_size = 12
noise_sd = 0.25
test_per_class = 5
t_many = 20
t_low = 5
seed = 3

[model]
feature_dim = 8
hidden_dim = 8

[train]
strategy = "rrs_only"
iterations = 40
batch_size = 8
per_class_draw = 4
lr0 = 0.05
eval_every = 20
loss_window = 10
{extra_train}

[sweep]
strategies = [{strategies}]
seeds = [{seeds}]
"#
    )
}

pub fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path
}

pub fn run(args: &[&str]) -> i32 {
    ltlab::cli::main_with_args(std::iter::once("ltlab").chain(args.iter().copied()))
}

/// Checks every manifest line against the file on disk and returns the
/// listed paths.
pub fn verify_manifest(root: &Path) -> Vec<String> {
    let text = fs::read_to_string(root.join(ltlab::sweep::MANIFEST)).unwrap();
    let mut paths = Vec::new();
    for line in text.lines() {
        let (hash, path) = line.split_once("  ").unwrap();
        let bytes = fs::read(root.join(path)).unwrap();
        let want: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hash, want, "{path}");
        paths.push(path.to_owned());
    }
    let mut sorted = paths.clone();
    sorted.sort();
    assert_eq!(paths, sorted);
    paths
}
