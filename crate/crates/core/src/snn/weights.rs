//! Weight blob layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "IRSN"
//! version u32
//! layers  u32
//! shapes  layers x (outputs u32, inputs u32)
//! weights row-major f64, layer by layer
//! ```

use super::{DenseLayer, SnnNetwork};
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"IRSN";
pub const WEIGHTS_VERSION: u32 = 1;

pub fn save_weights(net: &SnnNetwork) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.depth() as u32).to_le_bytes());
    for l in net.layers() {
        out.extend_from_slice(&(l.outputs() as u32).to_le_bytes());
        out.extend_from_slice(&(l.inputs() as u32).to_le_bytes());
    }
    for l in net.layers() {
        for w in l.weights() {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Structure(format!(
                "weight blob truncated at byte {} (need {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parse a blob into its layers without checking them against a network.
pub fn decode_weights(blob: &[u8]) -> Result<Vec<DenseLayer>> {
    if blob.is_empty() {
        return Err(Error::Structure("empty weight blob".into()));
    }
    let mut r = Reader { buf: blob, pos: 0 };
    if r.take(4)? != WEIGHTS_MAGIC {
        return Err(Error::Structure("not a weight blob (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != WEIGHTS_VERSION {
        return Err(Error::Structure(format!(
            "weight blob version {version}, expected {WEIGHTS_VERSION}"
        )));
    }
    let depth = r.u32()? as usize;
    if depth == 0 || depth > 64 {
        return Err(Error::Structure(format!("implausible layer count {depth}")));
    }
    let mut shapes = Vec::with_capacity(depth);
    for _ in 0..depth {
        shapes.push((r.u32()? as usize, r.u32()? as usize));
    }
    let mut layers = Vec::with_capacity(depth);
    for (outputs, inputs) in shapes {
        let n = outputs
            .checked_mul(inputs)
            .filter(|&n| n <= (blob.len() - r.pos) / 8)
            .ok_or_else(|| {
                Error::Structure(format!("layer {outputs}x{inputs} exceeds the blob"))
            })?;
        let w = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        layers.push(DenseLayer::new(outputs, inputs, w)?);
    }
    if r.pos != blob.len() {
        return Err(Error::Structure(format!(
            "{} trailing bytes after weights",
            blob.len() - r.pos
        )));
    }
    Ok(layers)
}

/// Replace the weights of `net` with those in `blob`; shapes must agree.
pub fn load_weights(net: &SnnNetwork, blob: &[u8]) -> Result<SnnNetwork> {
    let layers = decode_weights(blob)?;
    if layers.len() != net.depth() {
        return Err(Error::Structure(format!(
            "blob has {} layers, network has {}",
            layers.len(),
            net.depth()
        )));
    }
    for (d, (a, b)) in layers.iter().zip(net.layers()).enumerate() {
        if (a.outputs(), a.inputs()) != (b.outputs(), b.inputs()) {
            return Err(Error::Structure(format!(
                "layer {d}: blob shape {}x{}, network shape {}x{}",
                a.outputs(),
                a.inputs(),
                b.outputs(),
                b.inputs()
            )));
        }
    }
    SnnNetwork::new(layers, net.beta(), net.threshold())
}
