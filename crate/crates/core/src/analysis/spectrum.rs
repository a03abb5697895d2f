use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 8;

/// One-sided amplitude spectrum of a mean-removed real signal.
///
/// `magnitude[k]` is the amplitude of a sinusoid at `omega[k]`: `|X_k| / N`
/// for the DC and Nyquist bins and `2 |X_k| / N` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// Bin frequencies, rad/s, spaced `2π / (N Ts)` from zero to Nyquist.
    pub omega: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Index of the largest bin; `None` for an all-zero spectrum.
    pub peak: Option<usize>,
    pub samples: usize,
    pub sample_time: f64,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        std::f64::consts::TAU / (self.samples as f64 * self.sample_time)
    }

    pub fn peak_omega(&self) -> Option<f64> {
        self.peak.map(|k| self.omega[k])
    }

    /// Sum of squares of the mean-removed signal recovered from the bins.
    pub fn energy(&self) -> f64 {
        let n = self.samples;
        self.magnitude
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let two_sided = k != 0 && 2 * k != n;
                if two_sided {
                    a * a / 2.0
                } else {
                    a * a
                }
            })
            .sum::<f64>()
            * n as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega_radps", "magnitude"])?;
        for (o, m) in self.omega.iter().zip(&self.magnitude) {
            w.write_record([format!("{o:?}"), format!("{m:?}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

pub fn fft_spectrum(signal: &[f64], sample_time: f64) -> Result<Spectrum> {
    let n = signal.len();
    if n < MIN_SAMPLES {
        return Err(Error::Contract(format!("spectrum needs at least {MIN_SAMPLES} samples, got {n}")));
    }
    if !(sample_time > 0.0 && sample_time.is_finite()) {
        return Err(Error::Contract(format!("sample time must be positive, got {sample_time}")));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("signal has non-finite samples".into()));
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let bins = n / 2 + 1;
    let dw = std::f64::consts::TAU / (n as f64 * sample_time);
    let omega = (0..bins).map(|k| k as f64 * dw).collect();
    let magnitude: Vec<f64> = (0..bins)
        .map(|k| {
            let scale = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            scale * buf[k].norm() / n as f64
        })
        .collect();
    let peak = magnitude
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 0.0)
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k);
    Ok(Spectrum {
        omega,
        magnitude,
        peak,
        samples: n,
        sample_time,
    })
}

/// As [`fft_spectrum`] for a time-stamped series, which must be uniformly
/// spaced to a relative tolerance of 1e-6.
pub fn fft_spectrum_series(times: &[f64], values: &[f64]) -> Result<Spectrum> {
    if times.len() != values.len() {
        return Err(Error::Shape { what: "spectrum samples".into(), expected: times.len(), actual: values.len() });
    }
    if times.len() < 2 {
        return Err(Error::Contract(format!("spectrum needs at least {MIN_SAMPLES} samples, got {}", times.len())));
    }
    let ts = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    for (i, w) in times.windows(2).enumerate() {
        if !((w[1] - w[0] - ts).abs() <= 1e-6 * ts.abs()) {
            return Err(Error::Contract(format!(
                "series is not uniformly sampled: step {} is {:.6} s, mean {:.6} s",
                i + 1,
                w[1] - w[0],
                ts
            )));
        }
    }
    fft_spectrum(values, ts)
}
