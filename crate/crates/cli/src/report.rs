use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::io::write_file;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One checker's outcome. `details` holds the module report fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub checker: String,
    pub pass: bool,
    pub summary: String,
    pub details: Value,
}

impl Verdict {
    pub fn new(checker: &str, pass: bool, summary: impl Into<String>, details: Value) -> Self {
        Verdict { checker: checker.into(), pass, summary: summary.into(), details }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub subcommand: String,
    pub config_digest: String,
    pub seed: u64,
    pub verdicts: Vec<Verdict>,
    /// Warnings and remarks that do not change the verdict.
    pub notes: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunReport {
    pub fn new(subcommand: &str, config_text: &str, seed: u64) -> Self {
        RunReport {
            subcommand: subcommand.into(),
            config_digest: sha256_hex(config_text.as_bytes()),
            seed,
            verdicts: Vec::new(),
            notes: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn push(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            1
        }
    }

    /// Digest of everything except output paths, which depend on `--out`.
    pub fn digest(&self) -> String {
        let v = serde_json::json!({
            "subcommand": self.subcommand,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "verdicts": self.verdicts,
            "notes": self.notes,
        });
        sha256_hex(v.to_string().as_bytes())
    }

    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["pass"] = Value::Bool(self.pass());
        v["digest"] = Value::String(self.digest());
        v
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "subcommand:    {}", self.subcommand).unwrap();
        writeln!(s, "config sha256: {}", self.config_digest).unwrap();
        writeln!(s, "seed:          {}", self.seed).unwrap();
        writeln!(s, "result:        {}", if self.pass() { "PASS" } else { "FAIL" }).unwrap();
        writeln!(s, "digest:        {}", self.digest()).unwrap();
        for v in &self.verdicts {
            writeln!(s, "\n[{}] {}", if v.pass { "pass" } else { "FAIL" }, v.checker).unwrap();
            for line in v.summary.lines() {
                writeln!(s, "  {line}").unwrap();
            }
        }
        if !self.notes.is_empty() {
            writeln!(s, "\nnotes:").unwrap();
            for n in &self.notes {
                writeln!(s, "  - {n}").unwrap();
            }
        }
        if !self.outputs.is_empty() {
            writeln!(s, "\noutputs:").unwrap();
            for o in &self.outputs {
                writeln!(s, "  {o}").unwrap();
            }
        }
        s
    }

    /// Writes an auxiliary output file and records its path.
    pub fn emit(&mut self, out: &Path, name: &str, text: &str) -> Result<(), CliError> {
        let path = out.join(name);
        write_file(&path, text)?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    /// Writes `report.txt` and `report.json` into `out`.
    pub fn write(&mut self, out: &Path) -> Result<(), CliError> {
        self.outputs.push(out.join("report.txt").display().to_string());
        self.outputs.push(out.join("report.json").display().to_string());
        write_file(&out.join("report.txt"), &self.to_text())?;
        let json = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        write_file(&out.join("report.json"), &json)
    }
}
