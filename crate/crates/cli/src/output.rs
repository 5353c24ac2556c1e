use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::{RunConfig, SeedSource};
use crate::error::{CliError, CliResult};

/// Output directory whose files appear only once completely written.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", root.display())))?;
        NamedTempFile::new_in(root)
            .map_err(|e| CliError::Usage(format!("output directory {} is not writable: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn write_with<F>(&self, name: &str, fill: F) -> CliResult<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> CliResult<()>,
    {
        let target = self.path(name);
        write_atomic(&target, fill)?;
        Ok(target)
    }

    pub fn write_text(&self, name: &str, text: &str) -> CliResult<PathBuf> {
        self.write_with(name, |w| w.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new(name), e)))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.into()))? + "\n";
        self.write_text(name, &text)
    }

    /// Writes `run.toml` (the fully resolved configuration, usable as
    /// `--config`) and `seeds.json`.
    pub fn write_manifest(&self, command: &str, cfg: &RunConfig, source: SeedSource, derived: &[u64]) -> CliResult<()> {
        let mut snapshot = format!("# eeatc {command}: resolved configuration\n");
        snapshot.push_str(&cfg.to_toml()?);
        self.write_text("run.toml", &snapshot)?;
        #[derive(Serialize)]
        struct Seeds<'a> {
            command: &'a str,
            seed: u64,
            source: SeedSource,
            derived: &'a [u64],
        }
        self.write_json(
            "seeds.json",
            &Seeds {
                command,
                seed: cfg.seed(),
                source,
                derived,
            },
        )?;
        Ok(())
    }
}

pub fn write_atomic<F>(target: &Path, fill: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    let dir = match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush().map_err(|e| CliError::io(target, e))?;
    }
    tmp.persist(target).map_err(|e| CliError::io(target, e.error))?;
    Ok(())
}
