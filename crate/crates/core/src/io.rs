use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{NpcError, Result};

pub(crate) fn map_open_error(path: &Path, e: std::io::Error) -> NpcError {
    if e.kind() == std::io::ErrorKind::NotFound {
        NpcError::NotFound(path.to_path_buf())
    } else {
        NpcError::Io(e)
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| map_open_error(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| map_open_error(path, e))
}

/// Writes through a sibling temp file and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| NpcError::InvalidConfig(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
