//! Append-only JSON-lines persistence. Each service writes one record per
//! state change and rebuilds its in-memory state by replaying the file.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct Journal<T> {
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
    _record: PhantomData<fn(T)>,
}

impl<T: Serialize + DeserializeOwned> Journal<T> {
    /// Journal that keeps nothing.
    pub fn memory() -> Self {
        Journal { file: None, path: None, _record: PhantomData }
    }

    /// Opens (creating if needed) the journal at `path` and returns the
    /// records already in it.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<T>)> {
        let path = path.as_ref().to_path_buf();
        let mut records = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec = serde_json::from_str(&line)
                    .map_err(|e| Error::decode(format!("{}:{}", path.display(), i + 1), e.to_string()))?;
                records.push(rec);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok((Journal { file: Some(Mutex::new(file)), path: Some(path), _record: PhantomData }, records))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&self, record: &T) -> Result<()> {
        let Some(file) = &self.file else { return Ok(()) };
        let mut line = serde_json::to_vec(record).map_err(|e| Error::Fatal(format!("journal encode: {e}")))?;
        line.push(b'\n');
        file.lock().write_all(&line)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replays_appended_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        {
            let (j, old) = Journal::<(u32, String)>::open(&path).unwrap();
            assert!(old.is_empty());
            j.append(&(1, "a".into())).unwrap();
            j.append(&(2, "b".into())).unwrap();
        }
        let (j, old) = Journal::<(u32, String)>::open(&path).unwrap();
        assert_eq!(old, vec![(1, "a".to_string()), (2, "b".to_string())]);
        j.append(&(3, "c".into())).unwrap();
        assert_eq!(Journal::<(u32, String)>::open(&path).unwrap().1.len(), 3);
    }

    #[test]
    fn corrupt_line_names_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        std::fs::write(&path, "[1,\"a\"]\nnot json\n").unwrap();
        match Journal::<(u32, String)>::open(&path) {
            Err(Error::Decode { field, .. }) => assert!(field.ends_with(":2")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
