use std::f64::consts::PI;

/// Second-order Gaussian derivative monocycle
/// `w(t) = A (1 - 4 pi (t/tau)^2) exp(-2 pi (t/tau)^2)`.
///
/// The energy of the unnormalized pulse is `3 tau / 8`, so `A = sqrt(8 / (3 tau))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    pub tau_ns: f64,
    /// Half-width of the rendered support (ns); the pulse is treated as zero
    /// outside `[-half_width_ns, half_width_ns]`.
    pub half_width_ns: f64,
    amplitude: f64,
}

impl PulseShape {
    /// With `tau_p = 0.7` ns all but ~7e-10 of the energy lies in +-1 ns,
    /// i.e. inside one 2 ns chip.
    pub const DEFAULT_TAU_NS: f64 = 0.7;

    pub fn new(tau_ns: f64, half_width_ns: f64) -> Self {
        PulseShape {
            tau_ns,
            half_width_ns,
            amplitude: (8.0 / (3.0 * tau_ns)).sqrt(),
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

impl Default for PulseShape {
    fn default() -> Self {
        PulseShape::new(Self::DEFAULT_TAU_NS, 1.0)
    }
}

/// Unit-energy monocycle value at offset `t_ns` from the pulse centre.
#[inline]
pub fn monocycle(t_ns: f64, shape: &PulseShape) -> f64 {
    let u2 = (t_ns / shape.tau_ns).powi(2);
    shape.amplitude * (1.0 - 4.0 * PI * u2) * (-2.0 * PI * u2).exp()
}

/// Add `amp * w(t - centre)` to one frame of `buf`, wrapping cyclically
/// inside the frame. `frame` is the frame's sample slice; `centre_ns` is
/// measured from the frame start.
pub(crate) fn add_pulse_cyclic(
    frame: &mut [f64],
    samples_per_ns: f64,
    centre_ns: f64,
    amp: f64,
    shape: &PulseShape,
) {
    let n = frame.len() as i64;
    let dt = 1.0 / samples_per_ns;
    let lo = ((centre_ns - shape.half_width_ns) * samples_per_ns).ceil() as i64;
    let hi = ((centre_ns + shape.half_width_ns) * samples_per_ns).floor() as i64;
    for i in lo..=hi {
        let t = i as f64 * dt - centre_ns;
        frame[i.rem_euclid(n) as usize] += amp * monocycle(t, shape);
    }
}

/// Inner product `sum r[i] w(t_i - centre) dt` over one frame, cyclic.
pub(crate) fn correlate_cyclic(
    frame: &[f64],
    samples_per_ns: f64,
    centre_ns: f64,
    shape: &PulseShape,
) -> f64 {
    let n = frame.len() as i64;
    let dt = 1.0 / samples_per_ns;
    let lo = ((centre_ns - shape.half_width_ns) * samples_per_ns).ceil() as i64;
    let hi = ((centre_ns + shape.half_width_ns) * samples_per_ns).floor() as i64;
    let mut acc = 0.0;
    for i in lo..=hi {
        let t = i as f64 * dt - centre_ns;
        acc += frame[i.rem_euclid(n) as usize] * monocycle(t, shape);
    }
    acc * dt
}
