use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use wannier_decay::csv::CsvTable;

use crate::error::CliError;

/// Writes the files of one run, each headed by the resolved parameter block.
pub struct Outputs {
    dir: PathBuf,
    block: Vec<String>,
    written: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Outputs {
    pub fn create(dir: PathBuf, block: Vec<String>) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            block,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<String, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let digest = sha256_hex(text.as_bytes());
        self.written.push((name.to_string(), digest.clone()));
        Ok(digest)
    }

    /// Writes a CSV and returns the digest of its contents.
    pub fn csv(
        &mut self,
        name: &str,
        table: &CsvTable,
        extra: &[String],
    ) -> Result<String, CliError> {
        let mut text: String = self
            .block
            .iter()
            .chain(extra)
            .map(|l| format!("# {l}\n"))
            .collect();
        text += &table.render();
        self.write(name, &text)
    }

    /// Writes a JSON record with the parameter block and input digests.
    pub fn json(&mut self, name: &str, inputs: &[&str], record: Value) -> Result<(), CliError> {
        let digests: serde_json::Map<String, Value> = inputs
            .iter()
            .filter_map(|i| {
                self.written
                    .iter()
                    .find(|(n, _)| n == i)
                    .map(|(n, d)| (n.clone(), Value::String(d.clone())))
            })
            .collect();
        let doc = json!({
            "parameters": self.block,
            "inputs_sha256": digests,
            "result": record,
        });
        let text =
            serde_json::to_string_pretty(&doc).map_err(|e| CliError::io(e.to_string()))? + "\n";
        self.write(name, &text)?;
        Ok(())
    }

    /// `manifest.txt`: parameter block, file digests and a timestamp.
    pub fn finish(mut self) -> Result<Vec<String>, CliError> {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut text: String = self.block.iter().map(|l| format!("# {l}\n")).collect();
        text += &format!("created_unix={stamp}\n");
        for (name, digest) in &self.written {
            text += &format!("file={name} sha256={digest}\n");
        }
        self.write("manifest.txt", &text)?;
        Ok(self.written.into_iter().map(|(n, _)| n).collect())
    }
}

/// A fit result as JSON, or `{"error": ...}`.
pub fn fit_value<T: Serialize, E: ToString>(fit: Result<T, E>) -> Value {
    match fit {
        Ok(f) => serde_json::to_value(f).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}
