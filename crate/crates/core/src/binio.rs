//! Little-endian helpers shared by the model file formats.
//!
//! Every model file starts with a 4-byte magic and a `u32` version.

use std::io::{self, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("invalid model file: {0}")]
    Invalid(String),
}

pub(crate) struct Writer<W> {
    inner: W,
}

impl<W: Write> Writer<W> {
    pub fn new(inner: W) -> Self {
        Writer { inner }
    }

    pub fn header(&mut self, magic: &[u8; 4], version: u32) -> io::Result<()> {
        self.inner.write_all(magic)?;
        self.u32(version)
    }

    pub fn u8(&mut self, v: u8) -> io::Result<()> {
        self.inner.write_all(&[v])
    }

    pub fn u32(&mut self, v: u32) -> io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }

    pub fn f64s(&mut self, vs: &[f64]) -> io::Result<()> {
        vs.iter().try_for_each(|&v| self.f64(v))
    }

    pub fn str(&mut self, s: &str) -> io::Result<()> {
        self.u32(s.len() as u32)?;
        self.inner.write_all(s.as_bytes())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub(crate) struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    pub fn new(inner: R) -> Self {
        Reader { inner }
    }

    pub fn header(&mut self, magic: &'static [u8; 4], max_version: u32) -> Result<u32, ModelIoError> {
        let mut got = [0u8; 4];
        self.inner.read_exact(&mut got)?;
        if &got != magic {
            return Err(ModelIoError::BadMagic { expected: std::str::from_utf8(magic).unwrap_or("?") });
        }
        let version = self.u32()?;
        if version == 0 || version > max_version {
            return Err(ModelIoError::Version(version));
        }
        Ok(version)
    }

    fn array<const N: usize>(&mut self) -> io::Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b)?;
        Ok(b)
    }

    pub fn u8(&mut self) -> io::Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> io::Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64, ModelIoError> {
        let v = f64::from_le_bytes(self.array()?);
        if !v.is_finite() {
            return Err(ModelIoError::Invalid("non-finite weight".into()));
        }
        Ok(v)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelIoError> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn str(&mut self) -> Result<String, ModelIoError> {
        let len = self.u32()? as usize;
        let mut buf = Vec::new();
        (&mut self.inner).take(len as u64).read_to_end(&mut buf)?;
        if buf.len() != len {
            return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into());
        }
        String::from_utf8(buf).map_err(|_| ModelIoError::Invalid("string is not UTF-8".into()))
    }

    /// Fails unless the input is exhausted.
    pub fn end(mut self) -> Result<(), ModelIoError> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(ModelIoError::Invalid("trailing bytes after model".into())),
        }
    }
}
