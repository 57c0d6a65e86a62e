//! IDX image/label format: the big-endian binary layout MNIST ships in.
//!
//! Images: magic `0x00000803`, then three u32 dimensions (count, rows, cols),
//! then one unsigned byte per pixel. Labels: magic `0x00000801`, one u32
//! count, one byte per label. Loading scales pixels to `[0, 1]` by 255.

use std::fmt;
use std::path::Path;

use bayescl_core::data::LabeledDataset;
use bayescl_core::numerics::Matrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, PartialEq, Eq)]
pub enum IdxError {
    /// The magic number does not match the expected record type.
    BadMagic { expected: u32, found: u32 },
    /// The buffer ended before the declared payload.
    Truncated,
    /// Image count and label count disagree.
    CountMismatch { images: usize, labels: usize },
}

impl fmt::Display for IdxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdxError::BadMagic { expected, found } => {
                write!(f, "bad IDX magic {found:#010x}, expected {expected:#010x}")
            }
            IdxError::Truncated => write!(f, "truncated IDX file"),
            IdxError::CountMismatch { images, labels } => {
                write!(f, "{images} images but {labels} labels")
            }
        }
    }
}

impl std::error::Error for IdxError {}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, IdxError> {
    let end = offset.checked_add(4).ok_or(IdxError::Truncated)?;
    let slice = bytes.get(offset..end).ok_or(IdxError::Truncated)?;
    Ok(u32::from_be_bytes(slice.try_into().unwrap()))
}

/// Parses an IDX image file into `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>), IdxError> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(IdxError::BadMagic {
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let need = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or(IdxError::Truncated)?;
    let payload = bytes.get(16..16 + need).ok_or(IdxError::Truncated)?;
    Ok((count, rows, cols, payload.to_vec()))
}

/// Parses an IDX label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(IdxError::BadMagic {
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let count = read_u32(bytes, 4)? as usize;
    let payload = bytes.get(8..8 + count).ok_or(IdxError::Truncated)?;
    Ok(payload.to_vec())
}

pub fn encode_idx_images(rows: usize, cols: usize, images: &[u8]) -> Vec<u8> {
    let count = if rows * cols == 0 {
        0
    } else {
        images.len() / (rows * cols)
    };
    let mut out = Vec::with_capacity(16 + images.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(count as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    out.extend_from_slice(images);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Pairs an image file and a label file into a dataset, pixels scaled to
/// `[0, 1]`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> anyhow::Result<LabeledDataset> {
    let image_bytes = std::fs::read(images_path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", images_path.display()))?;
    let label_bytes = std::fs::read(labels_path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", labels_path.display()))?;
    let (count, rows, cols, pixels) = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    if count != labels.len() {
        return Err(IdxError::CountMismatch {
            images: count,
            labels: labels.len(),
        }
        .into());
    }
    let dim = rows * cols;
    let mut inputs = Matrix::zeros(count, dim);
    for (i, px) in pixels.iter().enumerate() {
        inputs.data_mut()[i] = *px as f64 / 255.0;
    }
    let labels: Vec<u32> = labels.into_iter().map(u32::from).collect();
    Ok(LabeledDataset::new(inputs, labels)?)
}

/// Loads the standard MNIST train/test pairs from a directory.
pub fn load_mnist(dir: &Path) -> anyhow::Result<(LabeledDataset, LabeledDataset)> {
    let train = load_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-built fixture: two 3x3 images with known bytes.
    fn fixture() -> (Vec<u8>, Vec<u8>) {
        let pixels: Vec<u8> = vec![
            0, 51, 102, 153, 204, 255, 10, 20, 30, // image 0
            5, 15, 25, 35, 45, 55, 65, 75, 85, // image 1
        ];
        (encode_idx_images(3, 3, &pixels), encode_idx_labels(&[7, 2]))
    }

    #[test]
    fn fixture_round_trips_exactly() {
        let (img, lab) = fixture();
        let (count, rows, cols, pixels) = parse_idx_images(&img).unwrap();
        assert_eq!((count, rows, cols), (2, 3, 3));
        assert_eq!(pixels[1], 51);
        assert_eq!(parse_idx_labels(&lab).unwrap(), vec![7, 2]);
    }

    #[test]
    fn load_scales_pixels_to_unit_interval() {
        let dir = std::env::temp_dir().join(format!("bayescl-idx-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let (img, lab) = fixture();
        let ip = dir.join("img");
        let lp = dir.join("lab");
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, lab).unwrap();
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.inputs.get(0, 5), 1.0);
        assert_eq!(ds.inputs.get(0, 0), 0.0);
        assert!((ds.inputs.get(0, 1) - 51.0 / 255.0).abs() < 1e-15);
        assert!(ds.inputs.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(ds.labels, vec![7, 2]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn label_magic_passed_as_images_is_rejected() {
        let (_, lab) = fixture();
        let err = parse_idx_images(&lab).unwrap_err();
        assert_eq!(
            err,
            IdxError::BadMagic {
                expected: IMAGES_MAGIC,
                found: LABELS_MAGIC
            }
        );
    }

    #[test]
    fn truncation_and_count_mismatch_are_distinct() {
        let (img, _) = fixture();
        assert_eq!(
            parse_idx_images(&img[..img.len() - 1]).unwrap_err(),
            IdxError::Truncated
        );

        let dir = std::env::temp_dir().join(format!("bayescl-idx2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let (img, _) = fixture();
        std::fs::write(dir.join("img"), img).unwrap();
        std::fs::write(dir.join("lab"), encode_idx_labels(&[1, 2, 3])).unwrap();
        let err = load_idx(&dir.join("img"), &dir.join("lab")).unwrap_err();
        assert!(err.to_string().contains("2 images but 3 labels"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn random_round_trip_is_bit_identical() {
        let mut rng = bayescl_core::numerics::Rng::new(99);
        let pixels: Vec<u8> = (0..4 * 5 * 5).map(|_| (rng.below(256)) as u8).collect();
        let labels: Vec<u8> = (0..4).map(|_| rng.below(10) as u8).collect();
        let img = encode_idx_images(5, 5, &pixels);
        let lab = encode_idx_labels(&labels);
        let (count, rows, cols, parsed) = parse_idx_images(&img).unwrap();
        assert_eq!((count, rows, cols), (4, 5, 5));
        assert_eq!(parsed, pixels);
        assert_eq!(parse_idx_labels(&lab).unwrap(), labels);
        assert_eq!(encode_idx_images(5, 5, &parsed), img);
    }
}
