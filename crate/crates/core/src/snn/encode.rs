use super::NetInput;
use crate::error::{Error, Result};
use crate::events::{assemble_values, EventFrame};
use crate::rake::{FrameStatistics, LinkMoments};

const Z_MIN: f64 = f64::MIN_POSITIVE;
const Z_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Soft values `z` in (0, 1), one `H x W x 2` slice per frame repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogInput {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    z: Vec<f64>,
}

impl AnalogInput {
    pub fn slice(&self, j: usize) -> &[f64] {
        let n = self.height * self.width * 2;
        &self.z[j * n..(j + 1) * n]
    }

    pub fn get(&self, y: usize, x: usize, c: usize, j: usize) -> f64 {
        self.slice(j)[(y * self.width + x) * 2 + c]
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn to_input(&self) -> NetInput {
        let slices = (0..self.frames).map(|j| self.slice(j).to_vec()).collect();
        NetInput::new(slices).expect("analog slices share one shape")
    }
}

/// Binary frame presented unchanged for every slice.
pub fn encode_digital(frame: &EventFrame, slices: usize) -> NetInput {
    let x: Vec<f64> = frame.bits().iter().map(|&b| b as f64).collect();
    NetInput::new(vec![x; slices.max(1)]).expect("non-empty")
}

/// `z = sigmoid((Y - mu/2) / sigma)` per user, placed back into frame order.
pub fn encode_analog(stats: &FrameStatistics, height: usize, width: usize) -> Result<AnalogInput> {
    encode_analog_with(stats, &stats.moments, height, width)
}

/// As [`encode_analog`] but normalising with caller-supplied moments.
pub fn encode_analog_with(
    stats: &FrameStatistics,
    moments: &[LinkMoments],
    height: usize,
    width: usize,
) -> Result<AnalogInput> {
    if moments.len() != stats.users {
        return Err(Error::Structure(format!(
            "{} moments for {} users",
            moments.len(),
            stats.users
        )));
    }
    if let Some(m) = moments.iter().find(|m| !(m.sigma > 0.0)) {
        return Err(Error::Numerical(format!(
            "sigma {} is not positive",
            m.sigma
        )));
    }
    let mut z = Vec::with_capacity(height * width * 2 * stats.frames);
    for j in 0..stats.frames {
        let per_user: Vec<Vec<f64>> = (0..stats.users)
            .map(|k| {
                let m = moments[k];
                (0..stats.bits)
                    .map(|n| {
                        let v = sigmoid((stats.get(k, n, j) - m.mu / 2.0) / m.sigma);
                        v.clamp(Z_MIN, Z_MAX)
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = per_user.iter().map(|v| v.as_slice()).collect();
        z.extend(assemble_values(&refs, stats.users, height, width)?);
    }
    Ok(AnalogInput {
        height,
        width,
        frames: stats.frames,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::frame_to_streams;

    fn stats_from(
        values: Vec<f64>,
        users: usize,
        bits: usize,
        frames: usize,
        mu: f64,
        sigma: f64,
    ) -> FrameStatistics {
        FrameStatistics::new(
            users,
            bits,
            frames,
            values,
            vec![LinkMoments { mu, sigma }; users],
        )
        .unwrap()
    }

    #[test]
    fn midpoint_maps_to_half() {
        let s = stats_from(vec![1.0; 8], 1, 8, 1, 2.0, 0.3);
        let a = encode_analog(&s, 2, 2).unwrap();
        assert!(a.values().iter().all(|&z| z == 0.5));
    }

    #[test]
    fn extremes_stay_inside_open_interval() {
        let s = stats_from(vec![1e9, -1e9, 2.0, 0.0], 1, 4, 1, 2.0, 0.5);
        let a = encode_analog(&s, 1, 2).unwrap();
        let z = a.values();
        assert!(z[0] < 1.0 && z[0] > 0.999_999);
        assert!(z[1] > 0.0 && z[1] < 1e-300);
        assert!((z[2] - sigmoid(2.0)).abs() < 1e-15);
        assert!(z[2] > 0.5);
    }

    #[test]
    fn analog_layout_follows_tiling() {
        // Y equals the frame bit, so thresholding z at 0.5 recovers the frame.
        let frame = crate::events::synth_sparse_frame(0.2, 4, 6, 3).unwrap();
        let streams = frame_to_streams(&frame, 4).unwrap();
        let frames = 2;
        let mut y = Vec::new();
        for s in &streams {
            for &b in &s.bits {
                y.extend(std::iter::repeat_n(b as f64, frames));
            }
        }
        let bits = streams[0].len();
        let st = stats_from(y, 4, bits, frames, 1.0, 0.1);
        let a = encode_analog(&st, 4, 6).unwrap();
        for j in 0..frames {
            let rec: Vec<u8> = a.slice(j).iter().map(|&z| (z > 0.5) as u8).collect();
            assert_eq!(rec, frame.bits());
        }
    }

    #[test]
    fn digital_single_pixel() {
        let mut f = EventFrame::zeros(3, 3, 0);
        f.set_pixel(1, 2, Some(crate::events::Polarity::Increase));
        let x = encode_digital(&f, 2);
        assert_eq!(x.slices(), 2);
        let hot: Vec<usize> = x
            .slice(1)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(
            hot,
            vec![f.index(1, 2, crate::events::Polarity::Increase.channel())]
        );
    }
}
