//! Sidecars, rasters, manifests and the synthetic corpus.

mod metadata;
mod pgm;
mod split;
mod synth;

use std::fs;
use std::path::{Path, PathBuf};

pub use metadata::{parse_metadata, CodingMetadata, ANCHOR_LABEL_TOLERANCE};
pub use pgm::{decode_pgm, encode_pgm, load_frame, save_frame};
pub use split::{split_dataset, DatasetSplit, TRAIN_SHARE};
pub use synth::{synth_corpus, SynthFrame, ANCHOR_QP, GAMMA_RANGE, LABEL_QPS};

use crate::error::{Error, Result};
use crate::features::GrayFrame;

/// A frame paired with its sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub frame: GrayFrame,
    pub metadata: CodingMetadata,
}

impl From<SynthFrame> for CorpusItem {
    fn from(s: SynthFrame) -> Self {
        CorpusItem {
            frame: s.frame,
            metadata: s.metadata,
        }
    }
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<CodingMetadata> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metadata(&text).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Loads a frame and sidecar and checks that their sizes agree.
pub fn load_item(frame_path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> Result<CorpusItem> {
    let frame = load_frame(frame_path)?;
    let metadata = load_metadata(sidecar_path)?;
    if (frame.width(), frame.height()) != (metadata.width, metadata.height) {
        return Err(Error::Shape(format!(
            "frame {} is {}x{} but its sidecar says {}x{}",
            metadata.frame_id,
            frame.width(),
            frame.height(),
            metadata.width,
            metadata.height
        )));
    }
    Ok(CorpusItem { frame, metadata })
}

/// Reads a manifest: one `frame_path sidecar_path` pair per line, relative to
/// the manifest's directory. Blank lines and `#` comments are skipped.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<(PathBuf, PathBuf)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, line)| {
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(f), Some(s), None) => Ok((base.join(f), base.join(s))),
                _ => Err(Error::Schema(format!(
                    "{}:{}: expected '<frame> <sidecar>'",
                    path.display(),
                    i + 1
                ))),
            }
        })
        .collect()
}

pub fn load_corpus(manifest: impl AsRef<Path>) -> Result<Vec<CorpusItem>> {
    read_manifest(manifest)?
        .into_iter()
        .map(|(f, s)| load_item(f, s))
        .collect()
}

/// Writes `<id>.pgm`, `<id>.rqp.json` and `manifest.txt` into `dir`, returning
/// the manifest path.
pub fn write_corpus(dir: impl AsRef<Path>, items: &[CorpusItem]) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for item in items {
        let id = &item.metadata.frame_id;
        let frame_name = format!("{id}.pgm");
        let sidecar_name = format!("{id}.rqp.json");
        save_frame(dir.join(&frame_name), &item.frame)?;
        let sidecar = dir.join(&sidecar_name);
        fs::write(&sidecar, item.metadata.to_json()?).map_err(|e| Error::io(&sidecar, e))?;
        manifest.push_str(&format!("{frame_name} {sidecar_name}\n"));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let items: Vec<CorpusItem> = synth_corpus(3, 2, (32, 32)).unwrap().into_iter().map(Into::into).collect();
        let manifest = write_corpus(dir.path(), &items).unwrap();
        let back = load_corpus(&manifest).unwrap();
        assert_eq!(back, items);
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        fs::write(&path, "# header\n\na.pgm\n").unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::Schema(_))));
    }
}
