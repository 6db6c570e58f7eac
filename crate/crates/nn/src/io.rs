//! Binary weight files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "GRASPWTS"
//! version  u32      1
//! records  repeated until end of file:
//!   name_len u64, name (UTF-8), rank u64, extents u64 × rank,
//!   payload  f32 × product(extents)
//! ```
//!
//! The payload is always 32-bit. In 64-bit builds values are rounded to the
//! nearest `f32` on save, so a save → load round trip is bit-exact for any
//! parameter that is already `f32`-representable (and always in `f32` builds).

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{NnError, Param, Result, Scalar, Tensor};

pub const WEIGHTS_MAGIC: &[u8; 8] = b"GRASPWTS";
pub const WEIGHTS_VERSION: u32 = 1;

/// A decoded record: name, extents, payload.
pub type WeightRecord = (String, Vec<usize>, Vec<f32>);

pub fn write_weights<W: Write>(mut out: W, params: &[&Param]) -> Result<()> {
    let mut seen = HashSet::new();
    for p in params {
        if !seen.insert(p.name.as_str()) {
            return Err(NnError::Format(format!("duplicate parameter name {}", p.name)));
        }
    }
    out.write_all(WEIGHTS_MAGIC)?;
    out.write_all(&WEIGHTS_VERSION.to_le_bytes())?;
    for p in params {
        let name = p.name.as_bytes();
        out.write_all(&(name.len() as u64).to_le_bytes())?;
        out.write_all(name)?;
        out.write_all(&(p.value.rank() as u64).to_le_bytes())?;
        for &e in p.value.shape() {
            out.write_all(&(e as u64).to_le_bytes())?;
        }
        for &v in p.value.data() {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads up to `len` bytes; distinguishes clean end of file from truncation.
fn read_record_start<R: Read>(r: &mut R) -> Result<Option<u64>> {
    let mut b = [0u8; 8];
    let mut filled = 0;
    while filled < 8 {
        let n = r.read(&mut b[filled..])?;
        if n == 0 {
            return if filled == 0 {
                Ok(None)
            } else {
                Err(NnError::Format("truncated record header".into()))
            };
        }
        filled += n;
    }
    Ok(Some(u64::from_le_bytes(b)))
}

pub fn read_weights<R: Read>(mut input: R) -> Result<Vec<WeightRecord>> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|_| NnError::Format("file too short for magic".into()))?;
    if &magic != WEIGHTS_MAGIC {
        return Err(NnError::Format("bad magic".into()));
    }
    let mut v = [0u8; 4];
    input.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != WEIGHTS_VERSION {
        return Err(NnError::Format(format!("unsupported version {version}")));
    }
    let truncated = |_| NnError::Format("truncated record".into());
    let mut records = Vec::new();
    while let Some(name_len) = read_record_start(&mut input)? {
        if name_len > 1 << 16 {
            return Err(NnError::Format(format!("implausible name length {name_len}")));
        }
        let mut name = vec![0u8; name_len as usize];
        input.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name).map_err(|_| NnError::Format("name is not UTF-8".into()))?;
        let rank = read_u64(&mut input).map_err(truncated)?;
        if rank > 8 {
            return Err(NnError::Format(format!("{name}: implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            shape.push(read_u64(&mut input).map_err(truncated)? as usize);
        }
        let count: usize = shape.iter().product();
        let mut bytes = vec![0u8; count * 4];
        input.read_exact(&mut bytes).map_err(truncated)?;
        let payload = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        records.push((name, shape, payload));
    }
    Ok(records)
}

pub fn save_weights(params: &[&Param], path: impl AsRef<Path>) -> Result<()> {
    write_weights(BufWriter::new(File::create(path)?), params)
}

/// Loads every parameter by name. Missing, surplus, or differently shaped
/// tensors are all reported together and leave the parameters untouched.
pub fn load_weights(params: &mut [&mut Param], path: impl AsRef<Path>) -> Result<()> {
    let records = read_weights(BufReader::new(File::open(path)?))?;
    let mut by_name: BTreeMap<String, (Vec<usize>, Vec<f32>)> = BTreeMap::new();
    for (name, shape, data) in records {
        if by_name.insert(name.clone(), (shape, data)).is_some() {
            return Err(NnError::Format(format!("duplicate tensor {name}")));
        }
    }
    let mut problems = Vec::new();
    for p in params.iter() {
        match by_name.get(&p.name) {
            None => problems.push(format!("missing tensor {}", p.name)),
            Some((shape, _)) if shape.as_slice() != p.value.shape() => problems.push(format!(
                "{}: file shape {:?}, model shape {:?}",
                p.name,
                shape,
                p.value.shape()
            )),
            Some(_) => {}
        }
    }
    let wanted: HashSet<&str> = params.iter().map(|p| p.name.as_str()).collect();
    for name in by_name.keys().filter(|n| !wanted.contains(n.as_str())) {
        problems.push(format!("unexpected tensor {name}"));
    }
    if !problems.is_empty() {
        return Err(NnError::WeightMismatch(problems));
    }
    for p in params.iter_mut() {
        let (shape, data) = by_name.remove(&p.name).expect("checked above");
        p.value = Tensor::new(&shape, data.into_iter().map(|v| v as Scalar).collect())?;
    }
    Ok(())
}
