use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Output files collected in memory and written together; if any write
/// fails, everything written so far is removed again.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let created = !dir.exists();
        let mut written = Vec::new();
        let result = (|| {
            fs::create_dir_all(dir).map_err(|source| CliError::Write {
                path: dir.to_path_buf(),
                source,
            })?;
            for (name, contents) in &self.files {
                let path = dir.join(name);
                fs::write(&path, contents).map_err(|source| CliError::Write {
                    path: path.clone(),
                    source,
                })?;
                written.push(path);
            }
            Ok(())
        })();
        match result {
            Ok(()) => Ok(written),
            Err(e) => {
                for path in &written {
                    let _ = fs::remove_file(path);
                }
                if created {
                    let _ = fs::remove_dir_all(dir);
                }
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_all_files() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("out");
        let mut out = Outputs::default();
        out.add("a.csv", "x\n".into());
        out.add("b.txt", "y\n".into());
        let paths = out.commit(&dir).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(fs::read_to_string(dir.join("b.txt")).unwrap(), "y\n");
    }

    #[test]
    fn failed_commit_leaves_nothing_behind() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("out");
        let mut out = Outputs::default();
        out.add("a.csv", "x\n".into());
        out.add("missing/b.txt", "y\n".into());
        assert!(matches!(out.commit(&dir), Err(CliError::Write { .. })));
        assert!(!dir.exists());
    }
}
