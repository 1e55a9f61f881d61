//! Fixtures shared by the benchmarks.

use hankel_core::rng::NoiseStream;
use hankel_core::TimeSeries;

/// `d` channels, each a lightly damped oscillation at its own frequency plus
/// white noise, so the Hankel matrix has a clear low-rank part.
pub fn oscillating_series(length: usize, channels: usize, seed: u64) -> TimeSeries {
    let mut noise = NoiseStream::new(seed);
    let mut data = Vec::with_capacity(length * channels);
    for t in 0..length {
        for c in 0..channels {
            let freq = 0.05 + 0.03 * c as f64;
            let signal = (std::f64::consts::TAU * freq * t as f64).sin();
            data.push(signal + 0.1 * noise.normal());
        }
    }
    TimeSeries::from_row_slice(channels, &data).expect("finite fixture")
}
