//! Bit-exact feature-file persistence.
//!
//! SNIPF layout, little-endian, no padding, no footer:
//!
//! ```text
//! magic   "SNPF"      4 bytes
//! version u32 = 1
//! modality u32        0 image, 1 text, 2 latent
//! d       u32
//! n       u64
//! payload n*d binary32, row-major
//! ```
//!
//! The 24-byte header is followed immediately by the payload; an empty matrix
//! is a header-only file.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::types::{FeatureMatrix, Modality};

pub const FEATURE_MAGIC: &[u8; 4] = b"SNPF";
pub const FEATURE_VERSION: u32 = 1;

/// Write `f`'s output to `path` via a sibling temp file and an atomic rename.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a writable file path: {}", path.display())))?;
    let mut tmp = path.to_path_buf();
    tmp.set_file_name(format!("{}.tmp", file_name.to_string_lossy()));
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        f(&mut w)?;
        w.flush()?;
        w.get_ref().sync_all()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub fn write_features_to<W: Write>(m: &FeatureMatrix, w: &mut W) -> Result<()> {
    let count = (m.n() as u64)
        .checked_mul(m.d() as u64)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| {
            Error::Format(format!("payload {} x {} overflows the 64-bit length", m.n(), m.d()))
        })?;
    let _ = count;
    w.write_all(FEATURE_MAGIC)?;
    w.write_u32::<LittleEndian>(FEATURE_VERSION)?;
    w.write_u32::<LittleEndian>(m.modality().to_u32())?;
    w.write_u32::<LittleEndian>(m.d() as u32)?;
    w.write_u64::<LittleEndian>(m.n() as u64)?;
    let mut buf = vec![0u8; m.data().len() * 4];
    LittleEndian::write_f32_into(m.data(), &mut buf);
    w.write_all(&buf)?;
    Ok(())
}

/// Atomically write `m` to `path` in the SNIPF format.
pub fn write_features(m: &FeatureMatrix, path: &Path) -> Result<()> {
    write_atomic(path, |w| write_features_to(m, w))
}

struct Header {
    modality: Modality,
    d: u32,
    n: u64,
}

fn read_header<R: Read>(r: &mut R) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("file shorter than the 24-byte header".into()))?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"SNPF\"",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!(
            "unsupported feature-file version {version}, expected {FEATURE_VERSION}"
        )));
    }
    let modality = Modality::from_u32(r.read_u32::<LittleEndian>()?)?;
    let d = r.read_u32::<LittleEndian>()?;
    let n = r.read_u64::<LittleEndian>()?;
    Ok(Header { modality, d, n })
}

fn read_payload<R: Read>(r: &mut R, h: &Header) -> Result<FeatureMatrix> {
    let count = h
        .n
        .checked_mul(h.d as u64)
        .ok_or_else(|| Error::Format(format!("payload {} x {} overflows", h.n, h.d)))?;
    if usize::try_from(count).is_err() {
        return Err(Error::Format(format!("payload of {count} values does not fit in memory")));
    }
    let mut bytes = vec![0u8; count as usize * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format(format!("truncated payload: expected {count} binary32 values")))?;
    let mut data = vec![0.0f32; count as usize];
    LittleEndian::read_f32_into(&bytes, &mut data);
    FeatureMatrix::new(h.n as usize, h.d as usize, h.modality, data)
}

/// Read a SNIPF stream. The header is trusted for the payload allocation;
/// prefer [`read_features`] for files, which validates the size up front.
pub fn read_features_from<R: Read>(r: &mut R) -> Result<FeatureMatrix> {
    let h = read_header(r)?;
    read_payload(r, &h)
}

/// Read a SNIPF file, rejecting bad magic, truncation and non-finite values.
pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    let mut r = BufReader::new(file);
    let h = read_header(&mut r)?;
    let expected = 24u64
        .checked_add(h.n.checked_mul(h.d as u64).and_then(|c| c.checked_mul(4)).ok_or_else(
            || Error::Format(format!("payload {} x {} overflows the 64-bit length", h.n, h.d)),
        )?)
        .ok_or_else(|| Error::Format("file length overflows".into()))?;
    if len != expected {
        return Err(Error::Format(format!(
            "file is {len} bytes but the header implies {expected}"
        )));
    }
    read_payload(&mut r, &h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn matrix(n: usize, d: usize, modality: Modality, f: impl Fn(usize) -> f32) -> FeatureMatrix {
        FeatureMatrix::new(n, d, modality, (0..n * d).map(f).collect()).unwrap()
    }

    #[test]
    fn empty_matrix_writes_header_only() {
        let m = FeatureMatrix::new(0, 8, Modality::Image, vec![]).unwrap();
        let mut buf = Vec::new();
        write_features_to(&m, &mut buf).unwrap();
        assert_eq!(buf.len(), 24);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.snpf");
        let m = matrix(2, 3, Modality::Text, |i| i as f32);
        write_features(&m, &path).unwrap();
        let back = read_features(&path).unwrap();
        assert_eq!(m, back);
        // Bit-exactness of the payload bytes themselves.
        let mut a = Vec::new();
        write_features_to(&m, &mut a).unwrap();
        let mut b = Vec::new();
        write_features_to(&back, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.snpf");
        let m = matrix(1, 2, Modality::Image, |i| i as f32);
        let mut bytes = Vec::new();
        write_features_to(&m, &mut bytes).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        std::fs::write(&path, &bytes).unwrap();
        match read_features(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("magic"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn nan_payload_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nan.snpf");
        let m = matrix(2, 2, Modality::Image, |i| i as f32);
        let mut bytes = Vec::new();
        write_features_to(&m, &mut bytes).unwrap();
        // Overwrite the second payload float with a NaN pattern.
        bytes[28..32].copy_from_slice(&f32::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        match read_features(&path) {
            Err(Error::NonFinite { row, col }) => assert_eq!((row, col), (0, 1)),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.snpf");
        let m = matrix(4, 4, Modality::Image, |i| i as f32);
        let mut bytes = Vec::new();
        write_features_to(&m, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 7);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_features(&path), Err(Error::Format(_))));
    }
}
