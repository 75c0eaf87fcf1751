//! Loading inputs and writing outputs.

use std::fs;
use std::io::{self, Cursor, Write};
use std::path::{Path, PathBuf};

use mbms_core::codegen::FileSet;
use mbms_core::{shipped, Catalog, CatalogError, KbError, KnowledgeBase};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipWriter};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Kb { path: PathBuf, source: KbError },
    #[error("{path}: {source}")]
    Catalog { path: PathBuf, source: CatalogError },
}

impl LoadError {
    pub fn code(&self) -> &'static str {
        match self {
            LoadError::Io { .. } => "io_error",
            LoadError::Kb { .. } => "kb_error",
            LoadError::Catalog { .. } => "catalog_error",
        }
    }
}

pub fn read(path: &Path) -> Result<Vec<u8>, LoadError> {
    fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// The archive at `path`, or the shipped KB.
pub fn load_kb(path: Option<&Path>) -> Result<KnowledgeBase, LoadError> {
    match path {
        Some(p) => KnowledgeBase::from_archive_bytes(&read(p)?).map_err(|source| LoadError::Kb {
            path: p.to_path_buf(),
            source,
        }),
        None => Ok(shipped::knowledge_base().expect("shipped KB is valid")),
    }
}

/// The catalog document at `path` merged over the built-in units, or the
/// shipped catalog.
pub fn load_catalog(path: Option<&Path>) -> Result<Catalog, LoadError> {
    match path {
        Some(p) => Catalog::load(&read(p)?).map_err(|source| LoadError::Catalog {
            path: p.to_path_buf(),
            source,
        }),
        None => Ok(shipped::catalog().expect("shipped catalog is valid")),
    }
}

/// Writes `bytes` next to `path` and renames it into place, so readers see
/// either the old or the new contents.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn write_fileset(out: &Path, files: &FileSet) -> io::Result<()> {
    for f in files.files() {
        let target = out.join(&f.path);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(target, &f.contents)?;
    }
    Ok(())
}

/// Stored (uncompressed) zip with fixed timestamps, entries in path order.
pub fn zip_fileset(files: &FileSet) -> Vec<u8> {
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644);
    for f in files.files() {
        zip.start_file(f.path.as_str(), options).expect("in-memory zip");
        zip.write_all(&f.contents).expect("in-memory zip");
    }
    zip.finish().expect("in-memory zip").into_inner()
}
