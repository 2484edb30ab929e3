//! Versioned, checksummed binary container used for reduction artifacts and
//! training checkpoints.
//!
//! Layout: 8-byte magic, u32 format version, u64 payload length, CRC32 of the
//! payload, then the payload itself. All integers little-endian. Floats are
//! stored as raw IEEE-754 bits, so save/load round-trips are bit-exact.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

const MAGIC: &[u8; 8] = b"SCRAWLv1";

#[derive(Debug, Error)]
pub enum BinError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic (not a softcrawl binary file)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("payload truncated or malformed at byte {0}")]
    Truncated(usize),
    #[error("kind mismatch: expected {expected:?}, found {found:?}")]
    Kind { expected: String, found: String },
}

/// Append-only payload writer.
#[derive(Default)]
pub struct Payload {
    buf: Vec<u8>,
}

impl Payload {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    pub fn put_f64_slice(&mut self, v: &[f64]) {
        self.put_u64(v.len() as u64);
        for x in v {
            self.put_f64(*x);
        }
    }

    pub fn put_u32_slice(&mut self, v: &[u32]) {
        self.put_u64(v.len() as u64);
        for x in v {
            self.put_u32(*x);
        }
    }

    pub fn put_bytes(&mut self, v: &[u8]) {
        self.put_u64(v.len() as u64);
        self.buf.extend_from_slice(v);
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_bytes(s.as_bytes());
    }
}

/// Sequential payload reader.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], BinError> {
        if self.pos + n > self.buf.len() {
            return Err(BinError::Truncated(self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, BinError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, BinError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, BinError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn u128(&mut self) -> Result<u128, BinError> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, BinError> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn f64_vec(&mut self) -> Result<Vec<f64>, BinError> {
        let n = self.u64()? as usize;
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(self.f64()?);
        }
        Ok(v)
    }

    pub fn u32_vec(&mut self) -> Result<Vec<u32>, BinError> {
        let n = self.u64()? as usize;
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(self.u32()?);
        }
        Ok(v)
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, BinError> {
        let n = self.u64()? as usize;
        Ok(self.take(n)?.to_vec())
    }

    pub fn str(&mut self) -> Result<String, BinError> {
        let b = self.bytes()?;
        String::from_utf8(b).map_err(|_| BinError::Truncated(self.pos))
    }
}

/// Writes a payload to `path` with header and CRC32.
pub fn write_file(path: &Path, payload: &Payload) -> Result<(), BinError> {
    let crc = crc32fast::hash(&payload.buf);
    let mut f = fs::File::create(path)?;
    f.write_all(MAGIC)?;
    f.write_all(&1u32.to_le_bytes())?;
    f.write_all(&(payload.buf.len() as u64).to_le_bytes())?;
    f.write_all(&crc.to_le_bytes())?;
    f.write_all(&payload.buf)?;
    Ok(())
}

/// Reads and checksum-validates a file written by [`write_file`].
pub fn read_file(path: &Path) -> Result<Vec<u8>, BinError> {
    let mut f = fs::File::open(path)?;
    let mut header = [0u8; 24];
    f.read_exact(&mut header)?;
    if &header[0..8] != MAGIC {
        return Err(BinError::BadMagic);
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != 1 {
        return Err(BinError::BadVersion(version));
    }
    let len = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
    let stored = u32::from_le_bytes(header[20..24].try_into().unwrap());
    let mut payload = vec![0u8; len];
    f.read_exact(&mut payload)?;
    let computed = crc32fast::hash(&payload);
    if computed != stored {
        return Err(BinError::Checksum { stored, computed });
    }
    Ok(payload)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_checksum() {
        let dir = std::env::temp_dir().join(format!("binio-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("blob.bin");

        let mut p = Payload::new();
        p.put_str("hello");
        p.put_f64_slice(&[1.0, -0.5, f64::MIN_POSITIVE]);
        p.put_u32_slice(&[7, 8]);
        write_file(&path, &p).unwrap();

        let bytes = read_file(&path).unwrap();
        let mut r = Reader::new(&bytes);
        assert_eq!(r.str().unwrap(), "hello");
        assert_eq!(r.f64_vec().unwrap(), vec![1.0, -0.5, f64::MIN_POSITIVE]);
        assert_eq!(r.u32_vec().unwrap(), vec![7, 8]);

        // Corrupt one payload byte: load must fail with a checksum error.
        let mut raw = fs::read(&path).unwrap();
        let last = raw.len() - 1;
        raw[last] ^= 0xff;
        fs::write(&path, &raw).unwrap();
        match read_file(&path) {
            Err(BinError::Checksum { .. }) => {}
            other => panic!("expected checksum error, got {other:?}"),
        }
        fs::remove_dir_all(&dir).ok();
    }
}
