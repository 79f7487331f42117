//! Binary model file.
//!
//! Little-endian layout:
//!
//! ```text
//! magic        8 bytes  "SYNGRAM\n"
//! version      u32      FORMAT_VERSION
//! order        u32
//! bits         u32      bits per packed token id
//! unk_seen     u8
//! vocab_len    u32, then per word: u32 byte length + UTF-8 bytes
//! discounts    order × f64
//! per order k = 1..=order:
//!   entries    u64, then entries × u128 keys, then entries × u32 counts
//! checksum     32 bytes, SHA-256 of everything above
//! ```

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Level, NGramModel, Vocab, FORMAT_VERSION};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SYNGRAM\n";

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

impl NGramModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ctx = || format!("writing model {}", path.display());
        let file = std::fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
        let mut w = HashingWriter {
            inner: BufWriter::new(file),
            hasher: Sha256::new(),
        };
        self.write_body(&mut w).map_err(|e| Error::io(ctx(), e))?;
        let digest = w.hasher.finalize();
        w.inner
            .write_all(&digest)
            .and_then(|_| w.inner.flush())
            .map_err(|e| Error::io(ctx(), e))
    }

    fn write_body(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.order as u32).to_le_bytes())?;
        w.write_all(&self.bits.to_le_bytes())?;
        w.write_all(&[u8::from(self.unk_seen)])?;
        w.write_all(&(self.vocab.len() as u32).to_le_bytes())?;
        for word in self.vocab.words() {
            w.write_all(&(word.len() as u32).to_le_bytes())?;
            w.write_all(word.as_bytes())?;
        }
        for d in &self.discounts {
            w.write_all(&d.to_le_bytes())?;
        }
        for level in &self.levels {
            w.write_all(&(level.keys.len() as u64).to_le_bytes())?;
            for k in &level.keys {
                w.write_all(&k.to_le_bytes())?;
            }
            for c in &level.counts {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(format!("reading model {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::ModelFile(
                "not a syneval n-gram model (bad magic)".into(),
            ));
        }
        let mut r = Cursor {
            bytes,
            pos: MAGIC.len(),
        };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFile(format!(
                "model format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        if bytes.len() < MAGIC.len() + 4 + 32 {
            return Err(corrupt("truncated"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch (truncated or modified)"));
        }
        let mut r = Cursor {
            bytes: body,
            pos: r.pos,
        };
        let order = r.u32()? as usize;
        let bits = r.u32()?;
        let unk_seen = r.take(1)?[0] != 0;
        if order == 0 || bits == 0 || bits as usize * order > 128 {
            return Err(corrupt("invalid order or key width"));
        }
        let vocab_len = r.u32()? as usize;
        let mut words = Vec::with_capacity(vocab_len.min(1 << 24));
        for _ in 0..vocab_len {
            let len = r.u32()? as usize;
            let word = std::str::from_utf8(r.take(len)?)
                .map_err(|_| corrupt("vocabulary is not UTF-8"))?;
            words.push(word.to_string());
        }
        let discounts = (0..order).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let mut levels = Vec::with_capacity(order);
        for _ in 0..order {
            let n = r.u64()? as usize;
            let keys = r
                .take(
                    n.checked_mul(16)
                        .ok_or_else(|| corrupt("entry count overflow"))?,
                )?
                .chunks_exact(16)
                .map(|c| u128::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let counts = r
                .take(n * 4)?
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            levels.push(Level::new(keys, counts, bits));
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(NGramModel {
            order,
            vocab: Vocab::from_words(words),
            bits,
            discounts,
            levels,
            unk_seen,
        })
    }
}

fn corrupt(why: &str) -> Error {
    Error::ModelFile(format!("corrupt model file: {why}"))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt("truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
