use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct FileHash {
    pub file: String,
    pub sha256: String,
}

/// Inputs and outputs of one run; nothing time- or path-dependent.
#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

pub fn sha256_bytes(b: &[u8]) -> String {
    hex::encode(Sha256::digest(b))
}

pub fn hash_file(p: &Path) -> std::io::Result<FileHash> {
    let b = std::fs::read(p)?;
    let file = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(FileHash { file, sha256: sha256_bytes(&b) })
}

pub struct Outputs {
    pub dir: PathBuf,
    pub written: Vec<FileHash>,
}

impl Outputs {
    pub fn new(dir: &Path) -> std::io::Result<Outputs> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.written.push(FileHash { file: name.to_string(), sha256: sha256_bytes(bytes) });
        Ok(())
    }

    pub fn json(&mut self, name: &str, v: &serde_json::Value) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(v).expect("serializable");
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}
