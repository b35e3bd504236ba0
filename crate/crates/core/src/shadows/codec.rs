//! Canonical binary encoding of shadow records.
//!
//! Layout (little-endian): magic `SHDW`, version u16, n u16, T u32, then per
//! shot n packed 3-bit entries (basis in the low 2 bits, outcome above),
//! LSB-first and padded to a byte boundary. A provenance trailer follows:
//! state id u64, p_depol f64, p_flip f64, seed u64.

use alloc::vec::Vec;

use super::{Provenance, ShadowRecord};

pub const SHADOW_MAGIC: [u8; 4] = *b"SHDW";
pub const SHADOW_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u16),
    #[error("truncated input")]
    Truncated,
    #[error("invalid entry at shot {shot}, site {site}")]
    BadEntry { shot: usize, site: usize },
    #[error("trailing bytes after record")]
    Trailing,
}

fn shot_bytes(n: usize) -> usize {
    (3 * n).div_ceil(8)
}

pub fn encode_binary(r: &ShadowRecord) -> Vec<u8> {
    let sb = shot_bytes(r.n);
    let mut out = Vec::with_capacity(12 + sb * r.shots + 32);
    out.extend_from_slice(&SHADOW_MAGIC);
    out.extend_from_slice(&SHADOW_VERSION.to_le_bytes());
    out.extend_from_slice(&(r.n as u16).to_le_bytes());
    out.extend_from_slice(&(r.shots as u32).to_le_bytes());
    for t in 0..r.shots {
        let (b, o) = r.shot(t);
        let start = out.len();
        out.resize(start + sb, 0);
        for j in 0..r.n {
            let e = (b[j] & 3) | ((o[j] & 1) << 2);
            let bit = 3 * j;
            for k in 0..3 {
                if (e >> k) & 1 == 1 {
                    out[start + (bit + k) / 8] |= 1 << ((bit + k) % 8);
                }
            }
        }
    }
    let p = &r.provenance;
    out.extend_from_slice(&p.state_id.to_le_bytes());
    out.extend_from_slice(&p.p_depol.to_le_bytes());
    out.extend_from_slice(&p.p_flip.to_le_bytes());
    out.extend_from_slice(&p.seed.to_le_bytes());
    out
}

fn take<'a>(buf: &mut &'a [u8], k: usize) -> Result<&'a [u8], CodecError> {
    if buf.len() < k {
        return Err(CodecError::Truncated);
    }
    let (h, t) = buf.split_at(k);
    *buf = t;
    Ok(h)
}

fn u64_le(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().unwrap_or([0; 8]))
}

pub fn decode_binary(bytes: &[u8]) -> Result<ShadowRecord, CodecError> {
    let mut buf = bytes;
    if take(&mut buf, 4)? != SHADOW_MAGIC {
        return Err(CodecError::BadMagic);
    }
    let h = take(&mut buf, 8)?;
    let version = u16::from_le_bytes([h[0], h[1]]);
    if version != SHADOW_VERSION {
        return Err(CodecError::Version(version));
    }
    let n = u16::from_le_bytes([h[2], h[3]]) as usize;
    let shots = u32::from_le_bytes([h[4], h[5], h[6], h[7]]) as usize;
    let sb = shot_bytes(n);
    let mut bases = Vec::with_capacity(n * shots);
    let mut outcomes = Vec::with_capacity(n * shots);
    for t in 0..shots {
        let s = take(&mut buf, sb)?;
        for j in 0..n {
            let bit = 3 * j;
            let e: u8 = (0..3).map(|k| ((s[(bit + k) / 8] >> ((bit + k) % 8)) & 1) << k).sum();
            if e & 3 == 3 {
                return Err(CodecError::BadEntry { shot: t, site: j });
            }
            bases.push(e & 3);
            outcomes.push(e >> 2);
        }
    }
    let tr = take(&mut buf, 32)?;
    if !buf.is_empty() {
        return Err(CodecError::Trailing);
    }
    let provenance = Provenance {
        state_id: u64_le(&tr[0..8]),
        p_depol: f64::from_bits(u64_le(&tr[8..16])),
        p_flip: f64::from_bits(u64_le(&tr[16..24])),
        seed: u64_le(&tr[24..32]),
    };
    Ok(ShadowRecord { n, shots, bases, outcomes, provenance })
}
