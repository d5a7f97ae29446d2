//! File plumbing: CSV formats, run configuration, atomic writes.

mod csv;
pub mod config;

pub use csv::{
    read_dataset_csv, write_dataset_csv, write_error_csv, write_modes_csv, write_overlay_csv,
    write_predictions_csv,
};

use std::path::Path;

use crate::error::Result;

/// Writes `bytes` to `path` via a temp file in the same directory plus a
/// rename, so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| crate::error::Error::Invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp = path.to_path_buf();
    tmp.set_file_name(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes)?;
    match std::fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e.into())
        }
    }
}

/// Formats a float with 17 significant digits, enough to round-trip f64.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
