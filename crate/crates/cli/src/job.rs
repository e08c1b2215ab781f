//! Job configuration, input hashing and artifact writing.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha1::{Digest, Sha1};

/// Everything that determines a run. Serialized into every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct JobConfig {
    pub command: String,
    /// Symbol specs as given on the command line.
    pub specs: Vec<String>,
    /// The same symbols resolved to explicit polynomials.
    pub symbols: Vec<Value>,
    pub beta: Vec<f64>,
    pub resolution: usize,
    pub samples: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
    pub window: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub only: Option<String>,
    pub out: PathBuf,
}

impl JobConfig {
    /// Git blob hash of the canonical JSON of the inputs. The output
    /// directory is left out so that moving a run does not change its hash.
    pub fn input_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("job config serializes");
        v.as_object_mut().expect("object").remove("out");
        let body = serde_json::to_vec(&v).expect("value serializes");
        let mut h = Sha1::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(&body);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Wraps a result with the reproducibility header.
    pub fn envelope<T: Serialize>(&self, result: &T) -> Value {
        serde_json::json!({
            "job": self,
            "input_hash": self.input_hash(),
            "result": result,
        })
    }

    /// CSV comment lines carrying the header; `#` lines are skipped by most
    /// plotting readers.
    pub fn csv_header(&self) -> String {
        format!(
            "# job: {}\n# input_hash: {}\n",
            serde_json::to_string(self).expect("job config serializes"),
            self.input_hash()
        )
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, result: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(&self.envelope(result))?;
        text.push('\n');
        write(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn write_csv(&self, name: &str, wtr: csv::Writer<Vec<u8>>) -> Result<PathBuf> {
        let path = self.path(name);
        let mut bytes = self.csv_header().into_bytes();
        bytes.extend(wtr.into_inner().context("flushing CSV")?);
        write(&path, &bytes)?;
        Ok(path)
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(out: &str) -> JobConfig {
        JobConfig {
            command: "inspect".into(),
            specs: vec!["kappa".into()],
            symbols: vec![],
            beta: vec![0.0],
            resolution: 4096,
            samples: 1_000_000,
            seed: 42,
            alpha: None,
            window: true,
            only: None,
            out: out.into(),
        }
    }

    #[test]
    fn hash_ignores_output_directory() {
        assert_eq!(job("a").input_hash(), job("b").input_hash());
        let mut other = job("a");
        other.seed = 7;
        assert_ne!(job("a").input_hash(), other.input_hash());
        assert_eq!(job("a").input_hash().len(), 40);
    }

    #[test]
    fn blob_hash_matches_git() {
        // `printf hello | git hash-object --stdin`
        let mut h = Sha1::new();
        h.update(b"blob 5\0hello");
        let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, "b6fc4c620b67d95f953a5c1c1230aaab5db5a1b0");
    }
}
