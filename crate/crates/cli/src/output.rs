use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use sha2::{Digest, Sha256};

/// Where files go and the comment line that opens each of them.
pub struct Output {
    dir: PathBuf,
    header: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Output {
    pub fn new(dir: &Path, config_hash: &str, n: usize) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let args: Vec<String> = std::env::args().skip(1).collect();
        let header = format!(
            "shg {} config_sha256={config_hash} n={n} cmd=shg {}",
            env!("CARGO_PKG_VERSION"),
            args.join(" ")
        );
        Ok(Self { dir: dir.to_path_buf(), header })
    }

    /// Writes `# header` followed by `body`.
    pub fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, format!("# {}\n{body}", self.header))
            .with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// JSON cannot carry comments; the header becomes a leading `"header"` field instead.
    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        #[derive(serde::Serialize)]
        struct WithHeader<'a, T> {
            header: &'a str,
            #[serde(flatten)]
            body: &'a T,
        }
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(&WithHeader { header: &self.header, body: value })?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Captures what a library writer produces.
    pub fn render(f: impl FnOnce(&mut Vec<u8>) -> shg_core::Result<()>) -> Result<String> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        Ok(String::from_utf8(buf)?)
    }
}
