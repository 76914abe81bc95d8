//! Drives the command-line entry point end to end in a scratch directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nutrec::cli::run_command_to;

/// Run one command; returns the exit code and what it printed.
pub fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("nutrec").chain(args.iter().copied());
    let code = run_command_to(argv, &mut out);
    (code, String::from_utf8(out).expect("utf-8 output"))
}

pub struct Workdir {
    pub root: PathBuf,
}

impl Workdir {
    pub fn path(&self, rel: &str) -> String {
        self.root.join(rel).display().to_string()
    }

    /// Global flags every command in this workdir shares.
    pub fn args<'a>(&'a self, cmd: &'a [&'a str]) -> Vec<String> {
        let mut v: Vec<String> = cmd.iter().map(|s| s.to_string()).collect();
        v.extend(["--config".to_string(), self.path("run.conf")]);
        v
    }

    pub fn run(&self, cmd: &[&str]) -> (i32, String) {
        let args = self.args(cmd);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run(&refs)
    }
}

/// Synthetic data plus a config file with small, fast settings.
pub fn workdir(root: &Path, recipes: usize, seed: u64) -> Workdir {
    fs::create_dir_all(root).unwrap();
    let data = root.join("data");
    let (code, _) = run(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--count",
        &recipes.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    assert_eq!(code, 0, "synth failed");
    let conf = format!(
        "# scratch pipeline\n\
         nutrients = {data}/nutrients.csv\n\
         recipes = {data}/recipes.jsonl\n\
         model-dir = {root}/models\n\
         report-dir = {root}/reports\n\
         seed = {seed}\n\
         train-embedding.dim = 16\n\
         train-embedding.epochs = 5\n\
         train-amounts.hidden = 32\n\
         train-amounts.epochs = 20\n\
         train-amounts.learning-rate = 1.0\n\
         eval-amounts.hidden-sizes = 16,32\n\
         eval-amounts.batch-fractions = 9,50\n\
         eval-amounts.epochs = 10\n\
         eval-amounts.learning-rate = 1.0\n\
         eval-nutrec.set-count = 20\n",
        data = data.display(),
        root = root.display(),
    );
    fs::write(root.join("run.conf"), conf).unwrap();
    Workdir { root: root.to_path_buf() }
}

pub const PIPELINE: &[&[&str]] = &[
    &["ingest"],
    &["train-embedding"],
    &["train-amounts"],
    &["eval-ip", "--predictor", "embedding,graph,mlp,nmf,random"],
    &["eval-amounts"],
    &["recommend", "--ingredients", "east-meat-0,east-veg-4", "--k", "5"],
    &["eval-nutrec", "--predictors", "embedding,graph"],
];

/// Every pipeline step, stopping at the first nonzero exit. Returns the
/// recommend command's stdout.
pub fn run_pipeline(w: &Workdir) -> Result<String, String> {
    let mut printed = String::new();
    for cmd in PIPELINE {
        let mut cmd = cmd.to_vec();
        let output = w.path("reports/recommend.json");
        if cmd[0] == "recommend" {
            cmd.extend(["--output", output.as_str()]);
        }
        let (code, out) = w.run(&cmd);
        if code != 0 {
            return Err(format!("`{}` exited {code}", cmd.join(" ")));
        }
        if cmd[0] == "recommend" {
            printed = out;
        }
    }
    Ok(printed)
}

/// Contents of every file under `models/` and `reports/`, keyed by relative path.
pub fn snapshot(w: &Workdir) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for sub in ["models", "reports"] {
        let dir = w.root.join(sub);
        let mut entries: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for path in entries {
            let rel = path.strip_prefix(&w.root).unwrap().display().to_string();
            files.insert(rel, fs::read(&path).unwrap());
        }
    }
    files
}

/// Names of files that differ between two snapshots, or exist in only one.
pub fn differing(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}
