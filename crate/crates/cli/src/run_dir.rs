//! Output directories: one owner at a time, immutable once finalized.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sociallab::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub config: serde_json::Value,
    /// SHA-256 of every file in the directory, keyed by relative path.
    pub files: BTreeMap<String, String>,
    pub finalized: bool,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub struct RunDir {
    root: PathBuf,
    locked: bool,
}

impl RunDir {
    /// Claims `root`, which must be absent or empty.
    pub fn claim(root: &Path) -> Result<Self> {
        if root.join(MANIFEST).exists() {
            return Err(Error::Config(format!(
                "{} holds a finalized run and will not be overwritten",
                root.display()
            )));
        }
        if root.join(LOCK).exists() {
            return Err(Error::Config(format!("{} is locked by another run", root.display())));
        }
        if root.exists() {
            let mut entries = fs::read_dir(root).map_err(|e| io(root, e))?;
            if entries.next().is_some() {
                return Err(Error::Config(format!("output directory {} is not empty", root.display())));
            }
        }
        fs::create_dir_all(root).map_err(|e| io(root, e))?;
        let lock = root.join(LOCK);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| io(&lock, e))?;
        Ok(RunDir {
            root: root.to_path_buf(),
            locked: true,
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, rel: &str, contents: &str) -> Result<()> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
        }
        fs::write(&p, contents).map_err(|e| io(&p, e))
    }

    /// Checksums every file, writes the manifest and releases the lock.
    pub fn finalize(mut self, mut manifest: Manifest) -> Result<Manifest> {
        manifest.files = checksums(&self.root)?;
        manifest.finalized = true;
        let text = serde_json::to_string_pretty(&manifest)?;
        let path = self.root.join(MANIFEST);
        fs::write(&path, text + "\n").map_err(|e| io(&path, e))?;
        self.release();
        Ok(manifest)
    }

    fn release(&mut self) {
        if self.locked {
            let _ = fs::remove_file(self.root.join(LOCK));
            self.locked = false;
        }
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        self.release();
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn checksums(root: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| io(&dir, e))? {
            let entry = entry.map_err(|e| io(&dir, e))?;
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let rel = p.strip_prefix(root).expect("inside root").to_string_lossy().replace('\\', "/");
            if rel == LOCK || rel == MANIFEST {
                continue;
            }
            out.insert(rel, sha256_file(&p)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> Manifest {
        Manifest {
            schema_version: 1,
            tool_version: "0".into(),
            command: "test".into(),
            seed: Some(1),
            workers: None,
            config: serde_json::Value::Null,
            files: BTreeMap::new(),
            finalized: false,
        }
    }

    #[test]
    fn lifecycle() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("run");
        let rd = RunDir::claim(&root).unwrap();
        assert!(RunDir::claim(&root).is_err());
        rd.write("a/b.csv", "x\n").unwrap();
        let m = rd.finalize(manifest()).unwrap();
        assert!(!root.join(LOCK).exists());
        assert_eq!(m.files.len(), 1);
        // sha256("x\n")
        assert_eq!(
            m.files["a/b.csv"],
            "73cb3858a687a8494ca3323053016282f3dad39d42cf62ca4e79dda2aac7d9ac"
        );
        assert!(RunDir::claim(&root).is_err());
        assert_eq!(Manifest::load(&root).unwrap(), m);
    }
}
