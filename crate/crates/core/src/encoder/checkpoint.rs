//! Binary checkpoints and loss-curve CSV.
//!
//! Layout, little-endian: magic `ICCK`, format version `u32`, vocabulary
//! fingerprint `u64`, dimension `u32`, step `u64`, row count `u64`, init
//! seed `u64`, then the row-major `f64` table.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::EncoderParams;
use crate::error::{Error, Result};
use crate::util;

const MAGIC: &[u8; 4] = b"ICCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub vocab_fingerprint: u64,
    pub dim: usize,
    pub step: usize,
}

pub fn save_checkpoint(path: &Path, params: &EncoderParams, vocab_fingerprint: u64, step: usize) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&vocab_fingerprint.to_le_bytes())?;
    out.write_all(&(params.dim as u32).to_le_bytes())?;
    out.write_all(&(step as u64).to_le_bytes())?;
    out.write_all(&(params.vocab_size as u64).to_le_bytes())?;
    out.write_all(&params.seed.to_le_bytes())?;
    for x in &params.table {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, EncoderParams)> {
    let mut bytes = Vec::new();
    util::open_existing(path)?.read_to_end(&mut bytes)?;
    let bad = |message: &str| Error::Artifact { path: path.to_path_buf(), message: message.into() };
    if bytes.len() < 44 || &bytes[..4] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != VERSION {
        return Err(bad("unsupported checkpoint version"));
    }
    let header = CheckpointHeader {
        vocab_fingerprint: u64_at(8),
        dim: u32_at(16) as usize,
        step: u64_at(20) as usize,
    };
    let rows = u64_at(28) as usize;
    let seed = u64_at(36);
    let body = &bytes[44..];
    if body.len() != rows * header.dim * 8 {
        return Err(bad("table size does not match header"));
    }
    let table = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, EncoderParams::from_table(rows, header.dim, seed, table)?))
}

/// `step,loss` rows with a header line.
pub fn write_loss_curve(path: &Path, curve: &[(usize, f64)]) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "step,loss")?;
    for (step, loss) in curve {
        writeln!(out, "{step},{loss}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_encoder;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        let params = init_encoder(5, 3, 11).unwrap();
        save_checkpoint(&path, &params, 42, 1000).unwrap();
        let (header, loaded) = load_checkpoint(&path).unwrap();
        assert_eq!(header, CheckpointHeader { vocab_fingerprint: 42, dim: 3, step: 1000 });
        assert_eq!(loaded, params);
        std::fs::write(&path, b"junk").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Artifact { .. })));
        assert!(matches!(load_checkpoint(&dir.path().join("none")), Err(Error::MissingArtifact(_))));
    }
}
