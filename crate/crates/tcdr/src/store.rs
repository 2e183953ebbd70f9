//! Append-only, keyed result records guarded by a lock file.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{format_err, io_err, Error, Result};

pub const RECORDS_FILE: &str = "results.jsonl";
pub const LOCK_FILE: &str = "results.lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    /// Unique key, usually campaign + config fingerprint + cell.
    pub key: String,
    pub campaign: String,
    pub config_fingerprint: String,
    pub payload: serde_json::Value,
}

/// Exclusive handle on a results directory; the lock is released on drop.
#[derive(Debug)]
pub struct ResultsStore {
    dir: PathBuf,
    keys: BTreeSet<String>,
}

impl ResultsStore {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let lock = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Store(format!("{} is locked by another process", dir.display())));
            }
            Err(e) => return Err(io_err(&lock)(e)),
        }
        let mut store = Self {
            dir: dir.to_path_buf(),
            keys: BTreeSet::new(),
        };
        match store.records() {
            Ok(records) => store.keys = records.into_iter().map(|r| r.key).collect(),
            Err(e) => {
                drop(store);
                return Err(e);
            }
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn contains(&self, key: &str) -> bool {
        self.keys.contains(key)
    }

    pub fn records(&self) -> Result<Vec<ResultRecord>> {
        let path = self.dir.join(RECORDS_FILE);
        let f = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| format_err(&path, format!("line {}: {e}", i + 1)))?);
        }
        Ok(out)
    }

    /// Appends a record; a key that already exists is rejected.
    pub fn append(&mut self, record: &ResultRecord) -> Result<()> {
        if self.keys.contains(&record.key) {
            return Err(Error::Store(format!("duplicate result key `{}`", record.key)));
        }
        let path = self.dir.join(RECORDS_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let line = serde_json::to_string(record).map_err(|e| format_err(&path, e.to_string()))?;
        writeln!(f, "{line}").map_err(io_err(&path))?;
        self.keys.insert(record.key.clone());
        Ok(())
    }

    /// Writes a CSV table next to the records.
    pub fn write_table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| format_err(&path, e.to_string()))?;
        w.write_record(header).map_err(|e| format_err(&path, e.to_string()))?;
        for r in rows {
            w.write_record(r).map_err(|e| format_err(&path, e.to_string()))?;
        }
        w.flush().map_err(io_err(&path))?;
        Ok(path)
    }
}

impl Drop for ResultsStore {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.dir.join(LOCK_FILE));
    }
}
