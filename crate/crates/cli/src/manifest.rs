//! `run.manifest`: one record appended per command invocation.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use mrf_inn::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "run.manifest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RunLog {
    #[serde(default)]
    run: Vec<RunRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| io_error(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn hash_inputs(paths: &[PathBuf]) -> Result<Vec<InputHash>> {
    paths
        .iter()
        .map(|p| {
            Ok(InputHash {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// The three files behind a dictionary base path.
pub fn dictionary_inputs(base: &Path) -> Vec<PathBuf> {
    let files = mrf_inn::dictionary::DictionaryFiles::new(base);
    vec![files.manifest, files.params, files.fingerprints]
}

impl RunRecord {
    pub fn new(command: &str, seed: Option<u64>, inputs: Vec<InputHash>, outputs: Vec<String>) -> Self {
        RunRecord {
            tool: "mrf-inn".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            seed,
            inputs,
            outputs,
        }
    }

    /// Appends to `dir/run.manifest`, creating it if needed.
    pub fn append_to(&self, dir: &Path) -> Result<()> {
        let path = dir.join(FILE_NAME);
        let mut log = match fs::read_to_string(&path) {
            Ok(text) => toml::from_str::<RunLog>(&text).map_err(|e| Error::Format {
                path: path.clone(),
                msg: e.to_string(),
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => RunLog::default(),
            Err(e) => return Err(io_error(&path, e)),
        };
        log.run.push(self.clone());
        let text = toml::to_string(&log).map_err(|e| Error::Format {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_accumulate() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "abc").unwrap();
        let inputs = hash_inputs(&[input]).unwrap();
        assert_eq!(
            inputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let rec = RunRecord::new("train", Some(3), inputs, vec!["out.ckpt".into()]);
        rec.append_to(dir.path()).unwrap();
        rec.append_to(dir.path()).unwrap();
        let log: RunLog = toml::from_str(&fs::read_to_string(dir.path().join(FILE_NAME)).unwrap()).unwrap();
        assert_eq!(log.run.len(), 2);
        assert_eq!(log.run[1], rec);
    }
}
