//! Generalized Morse wavelets.
//!
//! The frequency-domain form is
//! `Ψ(ω) = a ω^β exp(-ω^γ)` for `ω > 0` and zero otherwise, with the
//! normalization `a = 2 (eγ/β)^(β/γ)` that puts the peak value at exactly 2.
//! Time-domain samples have no closed form for general `(β, γ)`; they are
//! produced by inverse DFT of the sampled response.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::special::ln_gamma;
use crate::{Error, Result};

/// Energy fraction below which [`morse_time`] reports a truncated kernel.
pub const DEFAULT_ENERGY_THRESHOLD: f64 = 0.999;

/// Order `β` and family `γ` of a generalized Morse wavelet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseParams {
    beta: f64,
    gamma: f64,
}

impl MorseParams {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::domain("beta", beta, "beta > 0"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::domain("gamma", gamma, "gamma > 0"));
        }
        Ok(MorseParams { beta, gamma })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `ln a_{β,γ}`.
    pub fn log_norm(&self) -> f64 {
        let (b, g) = (self.beta, self.gamma);
        std::f64::consts::LN_2 + (b / g) * (1.0 + g.ln() - b.ln())
    }

    pub fn norm(&self) -> f64 {
        self.log_norm().exp()
    }

    /// Peak frequency `(β/γ)^(1/γ)`, the unique maximizer of the response.
    pub fn peak_frequency(&self) -> f64 {
        (self.beta / self.gamma).powf(1.0 / self.gamma)
    }

    /// Frequency response at a single angular frequency.
    #[inline]
    pub fn response(&self, omega: f64) -> f64 {
        if omega > 0.0 {
            (self.log_norm() + self.beta * omega.ln() - omega.powf(self.gamma)).exp()
        } else {
            // ω = 0 takes half the limit from above, which is 0 for β > 0.
            0.0
        }
    }

    /// Value of the continuous time-domain wavelet at `t = 0`:
    /// `a Γ((β+1)/γ) / (2πγ)`.
    pub fn center_value(&self) -> f64 {
        (self.log_norm() + ln_gamma((self.beta + 1.0) / self.gamma)
            - (2.0 * PI * self.gamma).ln())
        .exp()
    }

    /// Frequency above which the response stays below `1e-14` of its peak.
    pub(crate) fn bandwidth_limit(&self) -> f64 {
        let mut w = self.peak_frequency();
        while self.response(w) > 2e-14 {
            w *= 1.05;
        }
        w
    }
}

/// `a_{β,γ} = 2 (eγ/β)^(β/γ)`.
pub fn morse_norm(params: &MorseParams) -> f64 {
    params.norm()
}

/// `(β/γ)^(1/γ)`.
pub fn peak_frequency(params: &MorseParams) -> f64 {
    params.peak_frequency()
}

/// A sampled frequency response.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySamples {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn morse_freq(params: &MorseParams, omega: &[f64]) -> FrequencySamples {
    FrequencySamples {
        omega: omega.to_vec(),
        values: omega.iter().map(|&w| params.response(w)).collect(),
    }
}

/// Angular frequencies (radians/sample) of a length-`n` DFT: bins up to and
/// including Nyquist are non-negative, the rest negative.
pub fn dft_frequencies(n: usize) -> Vec<f64> {
    let step = 2.0 * PI / n as f64;
    (0..n)
        .map(|k| {
            if k <= n / 2 {
                k as f64 * step
            } else {
                (k as f64 - n as f64) * step
            }
        })
        .collect()
}

/// Time-domain samples of `(1/s) ψ(t/s)`, centered at index `n/2`.
#[derive(Debug, Clone)]
pub struct TimeKernel {
    pub samples: Vec<Complex64>,
    pub scale: f64,
    /// Share of the kernel's energy that falls inside the window.
    pub energy_fraction: f64,
}

impl TimeKernel {
    /// Time offset (samples) of index `j`.
    pub fn offset(&self, j: usize) -> f64 {
        j as f64 - (self.samples.len() / 2) as f64
    }

    pub fn is_truncated(&self, threshold: f64) -> bool {
        self.energy_fraction < threshold
    }
}

/// Inverse DFT of `Ψ(s ω_k)` on the length-`n` grid; index `m` holds time `m`
/// (mod `n`).
pub(crate) fn periodic_kernel(params: &MorseParams, n: usize, s: f64) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = dft_frequencies(n)
        .into_iter()
        .map(|w| Complex64::new(params.response(s * w), 0.0))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    for v in &mut buf {
        *v *= inv;
    }
    buf
}

/// Samples the wavelet at scale `s` (samples) on an `n`-point window centered
/// at `n/2`.
///
/// Logs a warning when less than 99.9% of the kernel energy lies inside the
/// window; the measured fraction is returned either way.
pub fn morse_time(params: &MorseParams, n: usize, s: f64) -> Result<TimeKernel> {
    if n < 16 {
        return Err(Error::domain("n", n as f64, "n >= 16"));
    }
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::domain("s", s, "s > 0"));
    }
    let mut samples = periodic_kernel(params, n, s);
    samples.rotate_right(n / 2);

    // Energy inside the window, measured against a 4x longer window.
    let wide = periodic_kernel(params, 4 * n, s);
    let total: f64 = wide.iter().map(|c| c.norm_sqr()).sum();
    let half = (n / 2) as isize;
    let inside: f64 = (-half..(n as isize - half))
        .map(|t| wide[t.rem_euclid(4 * n as isize) as usize].norm_sqr())
        .sum();
    let energy_fraction = if total > 0.0 { inside / total } else { 1.0 };
    if energy_fraction < DEFAULT_ENERGY_THRESHOLD {
        log::warn!(
            "Morse kernel (beta={}, gamma={}, s={s}) truncated: {:.4}% of its energy fits in {n} samples",
            params.beta,
            params.gamma,
            100.0 * energy_fraction
        );
    }
    Ok(TimeKernel {
        samples,
        scale: s,
        energy_fraction,
    })
}

/// Dense tabulation of the continuous unit-scale wavelet `ψ(t)` with
/// four-point cubic interpolation. Values beyond the table are zero.
#[derive(Debug)]
pub struct MorseTable {
    params: MorseParams,
    step: f64,
    center: usize,
    values: Vec<Complex64>,
    envelope_std: f64,
}

const TABLE_MIN_POINTS: usize = 8193;
const TABLE_MAX_POINTS: usize = 262_145;

impl MorseTable {
    pub fn new(params: MorseParams) -> Self {
        let (b, g) = (params.beta, params.gamma);
        let peak = params.peak_frequency();
        let core = (b * g).sqrt() / peak;
        let mut step = (2.0 * PI / peak / 32.0)
            .min(core / 64.0)
            .min(PI / params.bandwidth_limit());

        // Far field: |ψ(t)| ~ a Γ(β+1)/(2π) |t|^-(β+1). Keep everything above
        // 1e-6 of the center value, and at least a dozen core widths.
        let tail_ratio = (ln_gamma(b + 1.0) - ln_gamma((b + 1.0) / g) + g.ln()).exp();
        let tail_extent = (tail_ratio * 1e6).powf(1.0 / (b + 1.0));
        let extent = tail_extent.max(12.0 * core).max(8.0);

        let mut half = (extent / step).ceil() as usize;
        if 2 * half + 1 < TABLE_MIN_POINTS {
            half = TABLE_MIN_POINTS / 2;
            step = step.min(extent / half as f64);
        } else if 2 * half + 1 > TABLE_MAX_POINTS {
            half = TABLE_MAX_POINTS / 2;
            step = extent / half as f64;
        }

        // Frequency spacing fine enough for the Riemann sum of the inverse
        // transform to be accurate at t = 0, and a period long enough that the
        // periodic images of the tails are negligible.
        let dw_target = 1e-4 * peak;
        let by_resolution = (2.0 * PI / (step * dw_target)).ceil() as usize;
        let m = by_resolution
            .max(16 * (2 * half + 1))
            .next_power_of_two()
            .min(1 << 20);

        let kernel = periodic_kernel(&params, m, 1.0 / step);
        let values: Vec<Complex64> = (0..2 * half + 1)
            .map(|j| {
                let t = j as isize - half as isize;
                kernel[t.rem_euclid(m as isize) as usize] / step
            })
            .collect();

        let peak_mod = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let (mut w0, mut w1, mut w2) = (0.0, 0.0, 0.0);
        for (j, v) in values.iter().enumerate() {
            let e = v.norm();
            if e >= 1e-3 * peak_mod {
                let t = (j as f64 - half as f64) * step;
                w0 += e;
                w1 += e * t;
                w2 += e * t * t;
            }
        }
        let mean = w1 / w0;
        let envelope_std = (w2 / w0 - mean * mean).max(0.0).sqrt();

        MorseTable {
            params,
            step,
            center: half,
            values,
            envelope_std,
        }
    }

    pub fn params(&self) -> MorseParams {
        self.params
    }

    /// Largest |t| covered by the table.
    pub fn extent(&self) -> f64 {
        self.center as f64 * self.step
    }

    /// Standard deviation of the envelope `|ψ(t)|`, taken as a density over
    /// the region where it exceeds 1e-3 of its peak.
    pub fn envelope_std(&self) -> f64 {
        self.envelope_std
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let x = t / self.step + self.center as f64;
        let last = self.values.len() - 1;
        if !(x >= 0.0 && x <= last as f64) {
            return Complex64::new(0.0, 0.0);
        }
        let i = (x.floor() as usize).clamp(1, last.saturating_sub(2));
        let u = x - i as f64;
        let v = &self.values[i - 1..i + 3];
        // Lagrange weights for nodes -1, 0, 1, 2.
        let wm1 = -u * (u - 1.0) * (u - 2.0) / 6.0;
        let w0 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
        let w1 = -(u + 1.0) * u * (u - 2.0) / 2.0;
        let w2 = (u + 1.0) * u * (u - 1.0) / 6.0;
        v[0] * wm1 + v[1] * w0 + v[2] * w1 + v[3] * w2
    }
}

type TableCache = Mutex<HashMap<(u64, u64), Arc<MorseTable>>>;

fn table_cache() -> &'static TableCache {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared tabulation for `params`, built on first use.
pub fn morse_table(params: &MorseParams) -> Arc<MorseTable> {
    let key = (params.beta.to_bits(), params.gamma.to_bits());
    let mut cache = table_cache().lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry(key)
        .or_insert_with(|| Arc::new(MorseTable::new(*params)))
        .clone()
}

/// Envelope standard deviation of the unit-scale wavelet; multiply by the
/// scale for the width at scale `s`.
pub fn envelope_std(params: &MorseParams) -> f64 {
    morse_table(params).envelope_std()
}
