//! Reader and writer for the IDX files MNIST is distributed in.
//!
//! Images: magic `0x00000803`, then `count`, `rows`, `cols` as big-endian
//! `u32`, then `count·rows·cols` bytes. Labels: magic `0x00000801`, then
//! `count`, then `count` bytes.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated file: need {needed} bytes, found {found}")]
    TruncatedFile { needed: usize, found: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
}

/// Decoded image tensor, pixels scaled to `[0, 1]`, one row per image.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl IdxImages {
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    let word = bytes.get(at..at + 4).ok_or(IdxError::TruncatedFile {
        needed: at + 4,
        found: bytes.len(),
    })?;
    Ok(u32::from_be_bytes(word.try_into().expect("4 bytes")))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), IdxError> {
    let found = be_u32(bytes, 0)?;
    if found != expected {
        return Err(IdxError::BadMagic { expected, found });
    }
    Ok(())
}

fn payload(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8], IdxError> {
    let needed = offset + len;
    bytes.get(offset..needed).ok_or(IdxError::TruncatedFile {
        needed,
        found: bytes.len(),
    })
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let data = payload(bytes, 16, count * rows * cols)?;
    let pixels = data.iter().map(|&p| f64::from(p) / 255.0).collect();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, count)?.to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>, IdxError> {
    fs::read(path).map_err(|source| IdxError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads an image/label pair and checks that the counts agree.
pub fn load_idx(images: &Path, labels: &Path) -> Result<(IdxImages, Vec<usize>), IdxError> {
    let img = parse_images(&read(images)?)?;
    let lab = parse_labels(&read(labels)?)?;
    if img.count != lab.len() {
        return Err(IdxError::CountMismatch {
            images: img.count,
            labels: lab.len(),
        });
    }
    Ok((img, lab.into_iter().map(usize::from).collect()))
}

pub fn encode_images(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), count * rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for word in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_pixels() {
        let bytes = encode_images(2, 2, 2, &[0, 255, 128, 0, 1, 2, 3, 4]);
        let img = parse_images(&bytes).unwrap();
        assert_eq!((img.count, img.rows, img.cols), (2, 2, 2));
        assert_eq!(&img.pixels[..4], &[0.0, 1.0, 128.0 / 255.0, 0.0]);
    }

    #[test]
    fn wrong_magic() {
        let bytes = encode_labels(&[1, 2]);
        assert!(matches!(
            parse_images(&bytes),
            Err(IdxError::BadMagic {
                found: LABELS_MAGIC,
                ..
            })
        ));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = encode_images(1, 3, 3, &[7; 9]);
        bytes.truncate(20);
        assert!(matches!(
            parse_images(&bytes),
            Err(IdxError::TruncatedFile {
                needed: 25,
                found: 20
            })
        ));
        assert!(matches!(
            parse_labels(&[0, 0]),
            Err(IdxError::TruncatedFile { .. })
        ));
    }
}
