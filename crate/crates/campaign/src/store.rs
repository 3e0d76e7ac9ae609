//! On-disk layout: one append-only JSON-lines event log per campaign plus
//! an index file replaced atomically.
//!
//! ```text
//! <root>/index.json
//! <root>/campaigns/<id>.jsonl
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{CampaignError, Result};
use crate::model::Event;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub name: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Clone, Debug)]
pub struct CampaignStore {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl CampaignStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("campaigns"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self, id: &str) -> Result<PathBuf> {
        if !valid_id(id) {
            return Err(CampaignError::NotFound(id.to_string()));
        }
        Ok(self.root.join("campaigns").join(format!("{id}.jsonl")))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.log_path(id).map(|p| p.is_file()).unwrap_or(false)
    }

    /// Appends one event and syncs it to disk before returning.
    pub fn append(&self, id: &str, event: &Event) -> Result<()> {
        let path = self.log_path(id)?;
        let mut line = serde_json::to_string(event).map_err(|e| CampaignError::Io(e.into()))?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    /// Reads a campaign's events in order. A final line without its newline
    /// is a write cut short by a crash: it is dropped and the file truncated
    /// so later appends start on a clean line. Any other unreadable line is
    /// corruption.
    pub fn read_log(&self, id: &str) -> Result<Vec<Event>> {
        let path = self.log_path(id)?;
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(CampaignError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let mut reader = BufReader::new(file);
        let mut events = Vec::new();
        let mut line = String::new();
        let mut lineno = 0;
        let mut offset = 0u64;
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            lineno += 1;
            if !line.ends_with('\n') {
                drop(reader);
                OpenOptions::new().write(true).open(&path)?.set_len(offset)?;
                break;
            }
            offset += n as u64;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Event>(line.trim_end()) {
                Ok(e) => events.push(e),
                Err(err) => {
                    return Err(CampaignError::CorruptLog {
                        path: path.display().to_string(),
                        reason: format!("line {lineno}: {err}"),
                    })
                }
            }
        }
        Ok(events)
    }

    pub fn read_index(&self) -> Result<Vec<IndexEntry>> {
        let path = self.root.join("index.json");
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| CampaignError::CorruptLog {
                path: path.display().to_string(),
                reason: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// Replaces the index by writing a temporary file, syncing it and
    /// renaming it over the old one.
    pub fn write_index(&self, entries: &[IndexEntry]) -> Result<()> {
        let tmp = self.root.join("index.json.tmp");
        let bytes = serde_json::to_vec_pretty(entries).map_err(|e| CampaignError::Io(e.into()))?;
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.root.join("index.json"))?;
        if let Ok(dir) = File::open(&self.root) {
            let _ = dir.sync_all();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EventKind;
    use monobo::engine::AlgoConfig;

    fn event(seq: u64) -> Event {
        Event {
            seq,
            at: Utc::now(),
            kind: EventKind::ConfigChanged {
                config: AlgoConfig::default(),
            },
        }
    }

    #[test]
    fn append_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let store = CampaignStore::open(dir.path()).unwrap();
        for i in 0..3 {
            store.append("c1", &event(i)).unwrap();
        }
        let got = store.read_log("c1").unwrap();
        assert_eq!(got.len(), 3);
        assert_eq!(got[2].seq, 2);
        assert!(matches!(store.read_log("c2"), Err(CampaignError::NotFound(_))));
        assert!(matches!(store.read_log("../etc"), Err(CampaignError::NotFound(_))));
    }

    #[test]
    fn torn_final_line_is_ignored_but_corruption_is_not() {
        let dir = tempfile::tempdir().unwrap();
        let store = CampaignStore::open(dir.path()).unwrap();
        store.append("c", &event(0)).unwrap();
        let path = store.log_path("c").unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"seq\":1,\"at\":").unwrap();
        drop(f);
        assert_eq!(store.read_log("c").unwrap().len(), 1);
        store.append("c", &event(1)).unwrap();
        assert_eq!(store.read_log("c").unwrap().len(), 2);

        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"not json\n").unwrap();
        assert!(matches!(store.read_log("c"), Err(CampaignError::CorruptLog { .. })));
    }

    #[test]
    fn index_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = CampaignStore::open(dir.path()).unwrap();
        assert!(store.read_index().unwrap().is_empty());
        let entries = vec![IndexEntry {
            id: "a".into(),
            name: "first".into(),
            created_at: Utc::now(),
        }];
        store.write_index(&entries).unwrap();
        assert_eq!(store.read_index().unwrap(), entries);
        assert!(!dir.path().join("index.json.tmp").exists());
    }
}
