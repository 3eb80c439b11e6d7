//! Toy event-frame classification set.
//!
//! Four classes of sparse frames: a horizontal band of increase events, a
//! vertical band of increase events, and the two diagonals with decrease
//! events. Each band pixel fires with probability 1/2, background pixels
//! with probability 1/50 and a random polarity.
//!
//! Text format, one sample per line after the header:
//!
//! ```text
//! # comment lines start with '#'
//! <height> <width> <classes> <count>
//! <label> <hex bytes of the bit-packed frame, MSB first>
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::events::{EventFrame, Polarity};
use crate::rng::{domain, substream};

pub const TOY_CLASSES: usize = 4;

const BAND_RATE: f64 = 0.5;
const BACKGROUND_RATE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub frame: EventFrame,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub samples: Vec<Sample>,
}

fn band(class: usize, y: usize, x: usize, height: usize, width: usize) -> Option<Polarity> {
    let v = (y as f64 + 0.5) / height as f64;
    let u = (x as f64 + 0.5) / width as f64;
    match class {
        0 if (v - 0.5).abs() < 0.125 => Some(Polarity::Increase),
        1 if (u - 0.5).abs() < 0.125 => Some(Polarity::Increase),
        2 if (u - v).abs() < 0.1 => Some(Polarity::Decrease),
        3 if (u + v - 1.0).abs() < 0.1 => Some(Polarity::Decrease),
        _ => None,
    }
}

/// `per_class` samples of every class, interleaved by class.
pub fn generate_toy(seed: u64, per_class: usize, height: usize, width: usize) -> ToyDataset {
    let mut rng = substream(seed, &[domain::DATASET]);
    let mut samples = Vec::with_capacity(per_class * TOY_CLASSES);
    for _ in 0..per_class {
        for label in 0..TOY_CLASSES {
            let mut frame = EventFrame::zeros(height, width, 0);
            for y in 0..height {
                for x in 0..width {
                    let pol = match band(label, y, x, height, width) {
                        Some(p) => (rng.random::<f64>() < BAND_RATE).then_some(p),
                        None => (rng.random::<f64>() < BACKGROUND_RATE).then(|| {
                            if rng.random::<bool>() {
                                Polarity::Increase
                            } else {
                                Polarity::Decrease
                            }
                        }),
                    };
                    frame.set_pixel(y, x, pol);
                }
            }
            samples.push(Sample { frame, label });
        }
    }
    ToyDataset {
        height,
        width,
        classes: TOY_CLASSES,
        samples,
    }
}

fn pack(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| {
            c.iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | (b << (7 - i)))
        })
        .collect()
}

impl ToyDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# toy event frames: label, then packed bits in hex\n{} {} {} {}\n",
            self.height,
            self.width,
            self.classes,
            self.samples.len()
        );
        for smp in &self.samples {
            s.push_str(&smp.label.to_string());
            s.push(' ');
            for b in pack(smp.frame.bits()) {
                s.push_str(&format!("{b:02x}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            reason: "missing header".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: hl,
                reason: format!("bad header: {e}"),
            })?;
        let [height, width, classes, count] = dims[..] else {
            return Err(Error::Parse {
                line: hl,
                reason: "header needs height width classes count".into(),
            });
        };
        let mut samples = Vec::with_capacity(count);
        for (line, l) in lines {
            let (label, hex) = l.split_once(' ').ok_or_else(|| Error::Parse {
                line,
                reason: "expected '<label> <hex>'".into(),
            })?;
            let label: usize = label.parse().map_err(|e| Error::Parse {
                line,
                reason: format!("bad label: {e}"),
            })?;
            if label >= classes {
                return Err(Error::Parse {
                    line,
                    reason: format!("label {label} >= {classes} classes"),
                });
            }
            let hex = hex.trim();
            if hex.len() % 2 != 0 {
                return Err(Error::Parse {
                    line,
                    reason: "odd hex length".into(),
                });
            }
            let bytes = (0..hex.len())
                .step_by(2)
                .map(|i| u8::from_str_radix(&hex[i..i + 2], 16))
                .collect::<std::result::Result<Vec<u8>, _>>()
                .map_err(|e| Error::Parse {
                    line,
                    reason: format!("bad hex: {e}"),
                })?;
            let n = height * width * 2;
            if bytes.len() != n.div_ceil(8) {
                return Err(Error::Parse {
                    line,
                    reason: format!("{} bytes for a {n}-bit frame", bytes.len()),
                });
            }
            let bits = (0..n).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect();
            let frame =
                EventFrame::from_bits(height, width, 0, bits).map_err(|e| Error::Parse {
                    line,
                    reason: e.to_string(),
                })?;
            samples.push(Sample { frame, label });
        }
        if samples.len() != count {
            return Err(Error::Parse {
                line: hl,
                reason: format!("header promises {count} samples, found {}", samples.len()),
            });
        }
        Ok(ToyDataset {
            height,
            width,
            classes,
            samples,
        })
    }
}

/// Bundled training split (16x16, 80 per class).
pub fn bundled_train() -> ToyDataset {
    ToyDataset::parse(include_str!("../../data/toy_train.txt")).expect("bundled dataset parses")
}

/// Bundled test split (16x16, 40 per class).
pub fn bundled_test() -> ToyDataset {
    ToyDataset::parse(include_str!("../../data/toy_test.txt")).expect("bundled dataset parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let d = generate_toy(4, 3, 8, 10);
        assert_eq!(ToyDataset::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn bundled_files_match_generator() {
        assert_eq!(bundled_train(), generate_toy(2024, 80, 16, 16));
        assert_eq!(bundled_test(), generate_toy(2025, 40, 16, 16));
    }

    #[test]
    fn frames_are_sparse() {
        let d = generate_toy(1, 25, 16, 16);
        let rate: f64 = d.samples.iter().map(|s| s.frame.bit_rate()).sum::<f64>() / d.len() as f64;
        assert!(rate > 0.03 && rate < 0.12, "{rate}");
    }

    #[test]
    fn rejects_bad_count_and_label() {
        assert!(ToyDataset::parse("2 2 4 1\n").is_err());
        assert!(ToyDataset::parse("1 1 4 1\n7 00\n").is_err());
        assert!(ToyDataset::parse("").is_err());
    }
}
