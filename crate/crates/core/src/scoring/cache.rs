//! Append-only JSONL score cache. Each line carries a CRC-32 of its own
//! payload; unreadable lines are skipped with a warning.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::label::LabelDistribution;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub scorer_id: String,
    pub template_id: String,
    pub verbalizer_id: String,
    pub instance_id: String,
    pub negated: bool,
}

#[derive(Serialize, Deserialize)]
struct Payload {
    #[serde(flatten)]
    key: CacheKey,
    p: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct Record {
    #[serde(flatten)]
    key: CacheKey,
    p: [f64; 3],
    crc: u32,
}

fn checksum(key: &CacheKey, p: [f64; 3]) -> u32 {
    let payload = serde_json::to_string(&Payload { key: key.clone(), p }).expect("payload serializes");
    crc32fast::hash(payload.as_bytes())
}

fn decode(line: &str) -> Option<(CacheKey, LabelDistribution)> {
    let r: Record = serde_json::from_str(line).ok()?;
    if checksum(&r.key, r.p) != r.crc {
        return None;
    }
    let d = LabelDistribution::new(r.p[0], r.p[1], r.p[2]).ok()?;
    Some((r.key, d))
}

struct State {
    entries: HashMap<CacheKey, LabelDistribution>,
    file: Option<File>,
}

pub struct ScoreCache {
    path: Option<PathBuf>,
    state: Mutex<State>,
    corrupt: usize,
}

impl ScoreCache {
    pub fn in_memory() -> Self {
        ScoreCache { path: None, state: Mutex::new(State { entries: HashMap::new(), file: None }), corrupt: 0 }
    }

    /// Loads every intact record from `path` (created if absent) and appends
    /// new entries to it.
    pub fn open(path: &Path) -> io::Result<Self> {
        let mut entries = HashMap::new();
        let mut corrupt = 0;
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match decode(&line) {
                    Some((k, d)) => {
                        entries.insert(k, d);
                    }
                    None => {
                        corrupt += 1;
                        log::warn!("{}:{}: corrupt cache record ignored", path.display(), i + 1);
                    }
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).read(true).open(path)?;
        // a torn final line would otherwise swallow the next record
        if file.metadata()?.len() > 0 {
            let text = std::fs::read(path)?;
            if text.last() != Some(&b'\n') {
                file.write_all(b"\n")?;
            }
        }
        Ok(ScoreCache {
            path: Some(path.to_path_buf()),
            state: Mutex::new(State { entries, file: Some(file) }),
            corrupt,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Records skipped while loading.
    pub fn corrupt_records(&self) -> usize {
        self.corrupt
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("cache lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<LabelDistribution> {
        self.state.lock().expect("cache lock").entries.get(key).copied()
    }

    pub fn put(&self, key: CacheKey, dist: LabelDistribution) -> io::Result<()> {
        let p = dist.as_array();
        let line =
            serde_json::to_string(&Record { crc: checksum(&key, p), key: key.clone(), p }).expect("record serializes");
        let mut state = self.state.lock().expect("cache lock");
        if let Some(f) = state.file.as_mut() {
            f.write_all(line.as_bytes())?;
            f.write_all(b"\n")?;
        }
        state.entries.insert(key, dist);
        Ok(())
    }
}
