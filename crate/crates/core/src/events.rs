//! Event streams, event frames and their partition across users.
//!
//! Frames are stored row-major over pixels with the polarity channel
//! fastest: bit `(y, x, c)` lives at `(y * width + x) * 2 + c`. Channel 0 is
//! set for a brightness decrease, channel 1 for an increase. Tiles use the
//! same layout, so vectorizing a tile is a plain copy of its bits and the
//! scan order of a user's bit stream is exactly the tile's memory order.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{domain, substream};

/// Polarity of a brightness change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Decrease,
    Increase,
}

impl Polarity {
    /// Frame channel set by this polarity ("10" decrease, "01" increase).
    pub fn channel(self) -> usize {
        match self {
            Polarity::Decrease => 0,
            Polarity::Increase => 1,
        }
    }

    pub fn from_sign(rho: i64) -> Option<Self> {
        match rho {
            -1 => Some(Polarity::Decrease),
            1 => Some(Polarity::Increase),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Polarity::Decrease => -1,
            Polarity::Increase => 1,
        }
    }
}

/// One DVS event `(x, y, t, rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    pub x: u32,
    pub y: u32,
    /// Timestamp in microseconds.
    pub t_us: u64,
    pub polarity: Polarity,
}

/// Binary `H x W x 2` polarity-coded frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFrame {
    height: usize,
    width: usize,
    window_us: u64,
    bits: Vec<u8>,
}

impl EventFrame {
    pub fn zeros(height: usize, width: usize, window_us: u64) -> Self {
        EventFrame {
            height,
            width,
            window_us,
            bits: vec![0; height * width * 2],
        }
    }

    /// Build a frame from raw bits in scan order. Rejects non-binary values,
    /// wrong lengths and pixels holding both polarities.
    pub fn from_bits(height: usize, width: usize, window_us: u64, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != height * width * 2 {
            return Err(Error::Structure(format!(
                "frame {height}x{width}x2 needs {} bits, got {}",
                height * width * 2,
                bits.len()
            )));
        }
        for (px, pair) in bits.chunks_exact(2).enumerate() {
            if pair[0] > 1 || pair[1] > 1 {
                return Err(Error::Structure(format!("non-binary value at pixel {px}")));
            }
            if pair[0] == 1 && pair[1] == 1 {
                return Err(Error::Structure(format!(
                    "pixel ({}, {}) holds both polarities",
                    px / width,
                    px % width
                )));
            }
        }
        Ok(EventFrame {
            height,
            width,
            window_us,
            bits,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn window_us(&self) -> u64 {
        self.window_us
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * 2 + c
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.bits[self.index(y, x, c)]
    }

    /// Channel pair `(decrease, increase)` at a pixel.
    pub fn pixel(&self, y: usize, x: usize) -> (u8, u8) {
        let i = self.index(y, x, 0);
        (self.bits[i], self.bits[i + 1])
    }

    /// Overwrite a pixel with the code of `polarity` (or clear it).
    pub fn set_pixel(&mut self, y: usize, x: usize, polarity: Option<Polarity>) {
        let i = self.index(y, x, 0);
        self.bits[i] = 0;
        self.bits[i + 1] = 0;
        if let Some(p) = polarity {
            self.bits[i + p.channel()] = 1;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Fraction of bits equal to one.
    pub fn bit_rate(&self) -> f64 {
        self.count_ones() as f64 / self.bits.len() as f64
    }

    /// Flat debug export: one byte (0 or 1) per bit, scan order.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits.clone()
    }

    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::from_bits(height, width, 0, bytes.to_vec())
    }
}

/// Parse the line-oriented event text format: `x y t rho` per line, ASCII
/// decimal, `#` starts a comment, blank lines ignored.
pub fn parse_event_stream(text: &str) -> Result<Vec<EventRecord>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse {
            line: lineno + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(format!(
                "expected 4 fields `x y t rho`, got {}",
                fields.len()
            )));
        }
        let x = fields[0]
            .parse::<u32>()
            .map_err(|e| err(format!("x: {e}")))?;
        let y = fields[1]
            .parse::<u32>()
            .map_err(|e| err(format!("y: {e}")))?;
        let t_us = fields[2]
            .parse::<u64>()
            .map_err(|e| err(format!("t: {e}")))?;
        let rho = fields[3]
            .parse::<i64>()
            .map_err(|e| err(format!("rho: {e}")))?;
        let polarity = Polarity::from_sign(rho)
            .ok_or_else(|| err(format!("rho must be -1 or 1, got {rho}")))?;
        out.push(EventRecord {
            x,
            y,
            t_us,
            polarity,
        });
    }
    Ok(out)
}

pub fn write_event_stream(events: &[EventRecord]) -> String {
    let mut s = String::from("# x y t rho\n");
    for e in events {
        s.push_str(&format!(
            "{} {} {} {}\n",
            e.x,
            e.y,
            e.t_us,
            e.polarity.sign()
        ));
    }
    s
}

/// Accumulate a time-sorted stream into frames over windows
/// `[i * window, (i + 1) * window)` starting at t = 0. Within a window the
/// latest event at a pixel wins. An empty stream yields one empty frame.
pub fn accumulate_events(
    stream: &[EventRecord],
    window_us: u64,
    height: usize,
    width: usize,
) -> Result<Vec<EventFrame>> {
    if window_us == 0 {
        return Err(Error::Config("accumulation window must be positive".into()));
    }
    let mut last_t = 0;
    for (i, e) in stream.iter().enumerate() {
        if e.x as usize >= width || e.y as usize >= height {
            return Err(Error::Record {
                index: i,
                reason: format!(
                    "coordinate ({}, {}) outside {}x{} sensor",
                    e.x, e.y, width, height
                ),
            });
        }
        if e.t_us < last_t {
            return Err(Error::Record {
                index: i,
                reason: format!("timestamp {} precedes {}", e.t_us, last_t),
            });
        }
        last_t = e.t_us;
    }
    let n_frames = stream
        .last()
        .map_or(1, |e| (e.t_us / window_us) as usize + 1);
    let mut frames = vec![EventFrame::zeros(height, width, window_us); n_frames];
    for e in stream {
        let f = (e.t_us / window_us) as usize;
        frames[f].set_pixel(e.y as usize, e.x as usize, Some(e.polarity));
    }
    Ok(frames)
}

/// One user's share of a frame; same layout as [`EventFrame`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    pub height: usize,
    pub width: usize,
    pub bits: Vec<u8>,
}

/// K disjoint tiles in row-major order over the `sqrt(K) x sqrt(K)` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileSet {
    pub users: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub window_us: u64,
    pub tiles: Vec<Tile>,
}

/// Bit stream `b_1 .. b_{N_b}` of one user, `N_b = 2 * tile_h * tile_w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    pub user: usize,
    pub bits: Vec<u8>,
}

impl BitStream {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

/// Side length of the tile grid; errors unless `k` is a positive perfect square.
pub fn grid_side(k: usize) -> Result<usize> {
    let s = (k as f64).sqrt().round() as usize;
    if k == 0 || s * s != k {
        return Err(Error::Config(format!(
            "K = {k} is not a positive perfect square"
        )));
    }
    Ok(s)
}

/// Tile geometry `(side, tile_h, tile_w)` for a frame of `height x width`.
pub fn tile_geometry(k: usize, height: usize, width: usize) -> Result<(usize, usize, usize)> {
    let s = grid_side(k)?;
    if height % s != 0 || width % s != 0 {
        return Err(Error::Config(format!(
            "frame {height}x{width} not divisible into a {s}x{s} tile grid"
        )));
    }
    Ok((s, height / s, width / s))
}

pub fn tile_frame(frame: &EventFrame, k: usize) -> Result<TileSet> {
    let (s, th, tw) = tile_geometry(k, frame.height, frame.width)?;
    let tiles = (0..k)
        .map(|user| {
            let (r0, c0) = ((user / s) * th, (user % s) * tw);
            let mut bits = Vec::with_capacity(th * tw * 2);
            for y in r0..r0 + th {
                let start = frame.index(y, c0, 0);
                bits.extend_from_slice(&frame.bits[start..start + tw * 2]);
            }
            Tile {
                height: th,
                width: tw,
                bits,
            }
        })
        .collect();
    Ok(TileSet {
        users: k,
        frame_height: frame.height,
        frame_width: frame.width,
        window_us: frame.window_us,
        tiles,
    })
}

/// Rebuild the frame from its tiles.
pub fn assemble_tiles(set: &TileSet) -> Result<EventFrame> {
    let streams: Vec<&[u8]> = set.tiles.iter().map(|t| t.bits.as_slice()).collect();
    let bits = assemble_values(&streams, set.users, set.frame_height, set.frame_width)?;
    EventFrame::from_bits(set.frame_height, set.frame_width, set.window_us, bits)
}

pub fn vectorize_tile(tile: &Tile, user: usize) -> BitStream {
    BitStream {
        user,
        bits: tile.bits.clone(),
    }
}

pub fn devectorize(stream: &BitStream, tile_height: usize, tile_width: usize) -> Result<Tile> {
    if stream.bits.len() != 2 * tile_height * tile_width {
        return Err(Error::Structure(format!(
            "stream of user {} has {} bits, expected {}",
            stream.user,
            stream.bits.len(),
            2 * tile_height * tile_width
        )));
    }
    Ok(Tile {
        height: tile_height,
        width: tile_width,
        bits: stream.bits.clone(),
    })
}

/// Split a frame into per-user bit streams (tile, then vectorize).
pub fn frame_to_streams(frame: &EventFrame, k: usize) -> Result<Vec<BitStream>> {
    let set = tile_frame(frame, k)?;
    Ok(set
        .tiles
        .iter()
        .enumerate()
        .map(|(u, t)| vectorize_tile(t, u))
        .collect())
}

/// Inverse of [`frame_to_streams`]. Streams must be ordered by user index.
pub fn assemble_frame(
    streams: &[BitStream],
    k: usize,
    height: usize,
    width: usize,
) -> Result<EventFrame> {
    for (i, s) in streams.iter().enumerate() {
        if s.user != i {
            return Err(Error::Structure(format!(
                "stream {i} belongs to user {}",
                s.user
            )));
        }
    }
    let refs: Vec<&[u8]> = streams.iter().map(|s| s.bits.as_slice()).collect();
    let bits = assemble_values(&refs, k, height, width)?;
    EventFrame::from_bits(height, width, 0, bits)
}

/// Place K per-user vectors (tile scan order) back into frame scan order.
/// Works for any element type, e.g. soft values for the analog path.
pub fn assemble_values<T: Copy + Default>(
    streams: &[&[T]],
    k: usize,
    height: usize,
    width: usize,
) -> Result<Vec<T>> {
    let (s, th, tw) = tile_geometry(k, height, width)?;
    if streams.len() != k {
        return Err(Error::Structure(format!(
            "expected {k} streams, got {}",
            streams.len()
        )));
    }
    let mut out = vec![T::default(); height * width * 2];
    for (user, stream) in streams.iter().enumerate() {
        if stream.len() != 2 * th * tw {
            return Err(Error::Structure(format!(
                "stream of user {user} has length {}, expected {}",
                stream.len(),
                2 * th * tw
            )));
        }
        let (r0, c0) = ((user / s) * th, (user % s) * tw);
        for row in 0..th {
            let dst = ((r0 + row) * width + c0) * 2;
            out[dst..dst + tw * 2].copy_from_slice(&stream[row * tw * 2..(row + 1) * tw * 2]);
        }
    }
    Ok(out)
}

/// Random frame whose bit-level activation rate is `p`.
///
/// An active pixel sets exactly one of its two bits, so pixels are active
/// with probability `min(2p, 1)`; rates above 0.5 saturate at 0.5.
pub fn synth_sparse_frame(p: f64, height: usize, width: usize, seed: u64) -> Result<EventFrame> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("activation rate {p} outside [0, 1]")));
    }
    let pixel_rate = (2.0 * p).min(1.0);
    let mut rng = substream(seed, &[domain::FRAME]);
    let mut frame = EventFrame::zeros(height, width, 0);
    for y in 0..height {
        for x in 0..width {
            if rng.random::<f64>() < pixel_rate {
                let pol = if rng.random::<bool>() {
                    Polarity::Increase
                } else {
                    Polarity::Decrease
                };
                frame.set_pixel(y, x, Some(pol));
            }
        }
    }
    Ok(frame)
}
