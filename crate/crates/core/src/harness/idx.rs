//! Big-endian IDX files as distributed with MNIST.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fl::Dataset;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn need(path: &Path, bytes: &[u8], needed: usize) -> Result<()> {
    if bytes.len() < needed {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            needed,
            found: bytes.len(),
        });
    }
    Ok(())
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn header(path: &Path, bytes: &[u8], magic: u32, dims: usize) -> Result<Vec<usize>> {
    need(path, bytes, 4)?;
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(Error::WrongMagic {
            path: path.to_path_buf(),
            found,
            expected: magic,
        });
    }
    need(path, bytes, 4 + 4 * dims)?;
    Ok((0..dims).map(|i| be_u32(bytes, 4 + 4 * i) as usize).collect())
}

/// Images as `(rows, cols, pixels)` with pixels scaled to `[0, 1]`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = read(path)?;
    let dims = header(path, &bytes, IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let payload = count * rows * cols;
    need(path, &bytes, 16 + payload)?;
    let pixels = bytes[16..16 + payload].iter().map(|&p| p as f64 / 255.0).collect();
    Ok((rows, cols, pixels))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read(path)?;
    let count = header(path, &bytes, LABELS_MAGIC, 1)?[0];
    need(path, &bytes, 8 + count)?;
    Ok(bytes[8..8 + count].to_vec())
}

/// Ten-class dataset from an image file and its label file.
pub fn load_mnist_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let (rows, cols, pixels) = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    let dim = rows * cols;
    let count = pixels.len().checked_div(dim).unwrap_or(0);
    if count != labels.len() {
        return Err(Error::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    Dataset::new(pixels, labels, dim.max(1), 10)
}
