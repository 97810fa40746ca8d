use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::state::StateVector;
use crate::error::{Error, Result};
use crate::symdsl::GridSpec;

pub const STATE_MAGIC: &[u8; 4] = b"PDSV";

#[derive(Debug, Serialize, Deserialize)]
struct StateHeader {
    d: usize,
    n_x: usize,
    #[serde(rename = "K")]
    k_max: usize,
    #[serde(rename = "N")]
    n: usize,
    eps: f64,
    dtype: String,
}

/// Writes `magic | u32 LE header length | JSON header | payload`.
pub fn write_framed<W: Write, H: Serialize>(w: &mut W, magic: &[u8; 4], header: &H, payload: &[u8]) -> Result<()> {
    let h = serde_json::to_vec(header)?;
    w.write_all(magic)?;
    w.write_all(&(h.len() as u32).to_le_bytes())?;
    w.write_all(&h)?;
    w.write_all(payload)?;
    Ok(())
}

/// Reads a framed container, returning the raw header JSON and payload.
pub fn read_framed<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!("bad magic {:?}, expected {:?}", m, magic)));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut h = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut h)?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    Ok((h, payload))
}

/// Serializes a state as little-endian complex64 (two f32 per value).
pub fn write_state<W: Write>(w: &mut W, u: &StateVector) -> Result<()> {
    let header = StateHeader { d: u.grid.d, n_x: u.grid.n_x, k_max: u.grid.k_max, n: u.n, eps: u.grid.eps, dtype: "complex64".into() };
    let mut payload = Vec::with_capacity(u.data.len() * 8);
    for v in &u.data {
        payload.extend_from_slice(&(v.re as f32).to_le_bytes());
        payload.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    write_framed(w, STATE_MAGIC, &header, &payload)
}

pub fn read_state<R: Read>(r: &mut R) -> Result<StateVector> {
    let (h, payload) = read_framed(r, STATE_MAGIC)?;
    let header: StateHeader = serde_json::from_slice(&h)?;
    if header.dtype != "complex64" {
        return Err(Error::Format(format!("unsupported dtype {}", header.dtype)));
    }
    let grid = GridSpec::new(header.d, header.n_x, header.k_max, header.eps)?;
    let want = grid.npts() * header.n * 8;
    if payload.len() != want {
        return Err(Error::Format(format!("payload has {} bytes, expected {}", payload.len(), want)));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
            C64::new(re as f64, im as f64)
        })
        .collect();
    StateVector::from_data(grid, header.n, data)
}

/// CSV with columns `x1..xd, re_1, im_1, …`.
pub fn write_state_csv<W: Write>(w: &mut W, u: &StateVector) -> Result<()> {
    let g = u.grid;
    let npts = g.npts();
    let mut head: Vec<String> = (1..=g.d).map(|i| format!("x{}", i)).collect();
    for c in 1..=u.n {
        head.push(format!("re_{}", c));
        head.push(format!("im_{}", c));
    }
    writeln!(w, "{}", head.join(","))?;
    let mut x = vec![0.0; g.d];
    for j in 0..npts {
        g.x_at(j, &mut x);
        let mut row: Vec<String> = x.iter().map(|v| format!("{:.12e}", v)).collect();
        for c in 0..u.n {
            let v = u.data[c * npts + j];
            row.push(format!("{:.12e}", v.re));
            row.push(format!("{:.12e}", v.im));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
