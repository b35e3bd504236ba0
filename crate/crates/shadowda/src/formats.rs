//! Shadow files: concatenated binary records or one JSON line per shot.

use serde::{Deserialize, Serialize};
use shadowda_core::shadows::{decode_binary, encode_binary, CodecError, Provenance, ShadowRecord, SHADOW_MAGIC};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ShadowFormat {
    Binary,
    Jsonl,
}

impl ShadowFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ShadowFormat::Binary => "shdw",
            ShadowFormat::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("binary shadow record {index}: {source}")]
    Binary { index: usize, source: CodecError },
    #[error("jsonl line {line}: {msg}")]
    Jsonl { line: usize, msg: String },
}

const HEADER: usize = 12;
const TRAILER: usize = 32;

fn record_len(bytes: &[u8]) -> Option<usize> {
    if bytes.len() < HEADER || bytes[..4] != SHADOW_MAGIC {
        return None;
    }
    let n = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let shots = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    Some(HEADER + (3 * n).div_ceil(8) * shots + TRAILER)
}

pub fn encode_binary_stream(records: &[ShadowRecord]) -> Vec<u8> {
    records.iter().flat_map(encode_binary).collect()
}

pub fn decode_binary_stream(mut bytes: &[u8]) -> Result<Vec<ShadowRecord>, FormatError> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let index = out.len();
        let len = record_len(bytes).ok_or(FormatError::Binary { index, source: CodecError::BadMagic })?.min(bytes.len());
        out.push(decode_binary(&bytes[..len]).map_err(|source| FormatError::Binary { index, source })?);
        bytes = &bytes[len..];
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ShotLine {
    id: u64,
    n: usize,
    bases: String,
    bits: String,
}

const BASIS: [char; 3] = ['X', 'Y', 'Z'];

/// One line per shot. Only the state id survives from the provenance.
pub fn encode_jsonl(records: &[ShadowRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        for t in 0..r.shots {
            let (b, o) = r.shot(t);
            let line = ShotLine {
                id: r.provenance.state_id,
                n: r.n,
                bases: b.iter().map(|&c| BASIS[c as usize]).collect(),
                bits: o.iter().map(|&v| if v == 0 { '0' } else { '1' }).collect(),
            };
            serde_json::to_writer(&mut out, &line).expect("in-memory write");
            out.push(b'\n');
        }
    }
    out
}

/// Consecutive lines with the same id form one record.
pub fn decode_jsonl(text: &str) -> Result<Vec<ShadowRecord>, FormatError> {
    let mut out: Vec<ShadowRecord> = Vec::new();
    let mut cur: Option<(u64, usize, Vec<u8>, Vec<u8>)> = None;
    let flush = |cur: Option<(u64, usize, Vec<u8>, Vec<u8>)>, out: &mut Vec<ShadowRecord>, line: usize| -> Result<(), FormatError> {
        if let Some((id, n, b, o)) = cur {
            let p = Provenance { state_id: id, ..Default::default() };
            out.push(ShadowRecord::new(n, b, o, p).map_err(|e| FormatError::Jsonl { line, msg: e.to_string() })?);
        }
        Ok(())
    };
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let err = |msg: String| FormatError::Jsonl { line: i + 1, msg };
        let s: ShotLine = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if s.bases.len() != s.n || s.bits.len() != s.n {
            return Err(err("bases/bits length differs from n".into()));
        }
        let bases: Vec<u8> = s
            .bases
            .chars()
            .map(|c| BASIS.iter().position(|&b| b == c).map(|p| p as u8))
            .collect::<Option<_>>()
            .ok_or_else(|| err("bases must be X, Y or Z".into()))?;
        let bits: Vec<u8> = s
            .bits
            .chars()
            .map(|c| match c {
                '0' => Some(0),
                '1' => Some(1),
                _ => None,
            })
            .collect::<Option<_>>()
            .ok_or_else(|| err("bits must be 0 or 1".into()))?;
        match &mut cur {
            Some((id, n, b, o)) if *id == s.id && *n == s.n => {
                b.extend(bases);
                o.extend(bits);
            }
            _ => {
                flush(cur.take(), &mut out, i + 1)?;
                cur = Some((s.id, s.n, bases, bits));
            }
        }
    }
    flush(cur, &mut out, 0)?;
    Ok(out)
}

pub fn encode_shadows(records: &[ShadowRecord], format: ShadowFormat) -> Vec<u8> {
    match format {
        ShadowFormat::Binary => encode_binary_stream(records),
        ShadowFormat::Jsonl => encode_jsonl(records),
    }
}

pub fn decode_shadows(bytes: &[u8], format: ShadowFormat) -> Result<Vec<ShadowRecord>, FormatError> {
    match format {
        ShadowFormat::Binary => decode_binary_stream(bytes),
        ShadowFormat::Jsonl => decode_jsonl(core::str::from_utf8(bytes).map_err(|e| FormatError::Jsonl { line: 0, msg: e.to_string() })?),
    }
}
