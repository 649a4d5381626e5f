//! Continuous wavelet transform on a logarithmic scale grid.
//!
//! Coefficients use the `1/s` normalization
//! `W(τ, s) = Σ_t (1/s) ψ*((t-τ)/s) x(t)`, under which the transform of an
//! element depends on its complex amplitude but not on its scale. Both paths
//! treat the series as periodic; the edge mask marks where that matters.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::morse::{self, MorseParams};
use crate::par::{self, Execution};
use crate::{Error, Result};

/// Default distance, in envelope standard deviations, kept clear of each
/// boundary.
pub const DEFAULT_DECAY_MULTIPLIER: f64 = 2.0;

/// Longest series [`cwt_direct`] accepts unless overridden.
pub const DEFAULT_DIRECT_LIMIT: usize = 8192;

pub const MIN_SERIES_LEN: usize = 16;

/// Uniformly sampled real series. `t0` and `dt` share one time unit (days in
/// the CLI pipeline).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    dt: f64,
    t0: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64, t0: f64) -> Result<Self> {
        if values.len() < MIN_SERIES_LEN {
            return Err(Error::InsufficientData(format!(
                "series has {} samples, at least {MIN_SERIES_LEN} required",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain("value", values[i], "finite sample values"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::domain("dt", dt, "dt > 0"));
        }
        if !t0.is_finite() {
            return Err(Error::domain("t0", t0, "finite start time"));
        }
        Ok(TimeSeries { values, dt, t0 })
    }

    /// Unit sample interval starting at time zero.
    pub fn from_samples(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1.0, 0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Time of a (possibly fractional) sample index.
    pub fn time_at(&self, index: f64) -> f64 {
        self.t0 + index * self.dt
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        TimeSeries {
            values,
            dt: self.dt,
            t0: self.t0,
        }
    }
}

/// Log-spaced scales, finest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    params: MorseParams,
    scales: Vec<f64>,
    periods: Vec<f64>,
    scale_frequencies: Vec<f64>,
    voxels_per_octave: u32,
}

impl ScaleGrid {
    pub fn params(&self) -> MorseParams {
        self.params
    }

    /// Scales in samples, strictly increasing.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Periods `2π s / ω_{β,γ}` in samples.
    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    /// `ω_{β,γ} / s` in radians/sample, strictly decreasing.
    pub fn scale_frequencies(&self) -> &[f64] {
        &self.scale_frequencies
    }

    pub fn voxels_per_octave(&self) -> u32 {
        self.voxels_per_octave
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// Spacing of the grid in natural-log units.
    pub fn log_step(&self) -> f64 {
        LN_2 / f64::from(self.voxels_per_octave)
    }
}

/// Builds the scale grid covering periods `[min_period, max_period]`
/// (samples) with `voxels_per_octave` scales per doubling.
pub fn make_scale_grid(
    params: &MorseParams,
    min_period: f64,
    max_period: f64,
    voxels_per_octave: u32,
) -> Result<ScaleGrid> {
    if !(min_period >= 2.0 && max_period > min_period && max_period.is_finite()) {
        return Err(Error::InvalidRange(format!(
            "need 2 <= min_period < max_period, got [{min_period}, {max_period}]"
        )));
    }
    if voxels_per_octave == 0 {
        return Err(Error::InvalidRange("voxels_per_octave must be positive".into()));
    }
    let vpo = f64::from(voxels_per_octave);
    let count = ((max_period / min_period).log2() * vpo + 1e-9).floor() as usize + 1;
    let peak = params.peak_frequency();
    let periods: Vec<f64> = (0..count)
        .map(|k| min_period * (k as f64 / vpo).exp2())
        .collect();
    let scales: Vec<f64> = periods.iter().map(|p| peak * p / (2.0 * PI)).collect();
    let scale_frequencies = periods.iter().map(|p| 2.0 * PI / p).collect();
    Ok(ScaleGrid {
        params: *params,
        scales,
        periods,
        scale_frequencies,
        voxels_per_octave,
    })
}

/// Complex transform coefficients, one row per scale.
#[derive(Debug, Clone)]
pub struct Scalogram {
    pub coeffs: Array2<Complex64>,
    pub grid: ScaleGrid,
    pub params: MorseParams,
    pub dt: f64,
    pub t0: f64,
    pub valid: Array2<bool>,
}

impl Scalogram {
    pub(crate) fn new(coeffs: Array2<Complex64>, grid: ScaleGrid, dt: f64, t0: f64) -> Self {
        let valid = edge_mask(&grid, coeffs.ncols(), DEFAULT_DECAY_MULTIPLIER);
        Scalogram {
            coeffs,
            params: grid.params(),
            grid,
            dt,
            t0,
            valid,
        }
    }

    /// Assembles a scalogram with an explicit validity mask.
    pub fn from_parts(coeffs: Array2<Complex64>, grid: ScaleGrid, dt: f64, t0: f64, valid: Array2<bool>) -> Self {
        assert_eq!(coeffs.dim(), valid.dim(), "mask shape differs from coefficients");
        Scalogram {
            coeffs,
            params: grid.params(),
            grid,
            dt,
            t0,
            valid,
        }
    }

    pub fn n_scales(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn modulus(&self) -> Array2<f64> {
        self.coeffs.mapv(|c| c.norm())
    }

    /// Recomputes the validity mask with a different boundary margin.
    pub fn with_decay_multiplier(mut self, decay_multiplier: f64) -> Self {
        self.valid = edge_mask(&self.grid, self.n_times(), decay_multiplier);
        self
    }

    /// Largest modulus over valid cells (0 if none).
    pub fn max_valid_modulus(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(self.valid.iter())
            .filter(|(_, &v)| v)
            .map(|(c, _)| c.norm())
            .fold(0.0, f64::max)
    }
}

fn check_params(params: &MorseParams, grid: &ScaleGrid) -> Result<()> {
    let g = grid.params();
    if g != *params {
        return Err(Error::ParameterMismatch {
            got_beta: g.beta(),
            got_gamma: g.gamma(),
            want_beta: params.beta(),
            want_gamma: params.gamma(),
        });
    }
    Ok(())
}

fn demeaned(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Reusable FFT-path transform for a fixed length and grid: the sampled
/// wavelet responses and FFT plans are built once.
pub struct CwtPlan {
    n: usize,
    grid: ScaleGrid,
    /// `Ψ(s ω_k)` for bins `k = 0..=n/2`.
    responses: Vec<Vec<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CwtPlan {
    pub fn new(n: usize, grid: &ScaleGrid) -> Self {
        let params = grid.params();
        let step = 2.0 * PI / n as f64;
        let responses = grid
            .scales()
            .iter()
            .map(|&s| (0..=n / 2).map(|k| params.response(s * k as f64 * step)).collect())
            .collect();
        let mut planner = FftPlanner::new();
        CwtPlan {
            n,
            grid: grid.clone(),
            responses,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn grid(&self) -> &ScaleGrid {
        &self.grid
    }

    /// Per-scale `E|W|²` for unit-variance white noise, exact for this
    /// discrete circular transform: `(1/n) Σ_k Ψ(s ω_k)²`.
    pub fn white_noise_variance(&self) -> Vec<f64> {
        self.responses
            .iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>() / self.n as f64)
            .collect()
    }

    pub fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "series length does not match the plan");
        let mut spec: Vec<Complex64> = demeaned(x).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut spec);
        spec
    }

    fn row(&self, spec: &[Complex64], k: usize) -> Vec<Complex64> {
        let n = self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (j, &r) in self.responses[k].iter().enumerate().skip(1) {
            buf[j] = spec[j] * r;
        }
        self.inverse.process(&mut buf);
        let inv = 1.0 / n as f64;
        for v in &mut buf {
            *v *= inv;
        }
        buf
    }

    /// Coefficients for `x`, rows computed under `exec` after one shared
    /// forward DFT.
    pub fn transform(&self, x: &[f64], exec: Execution) -> Array2<Complex64> {
        let spec = self.spectrum(x);
        let rows = par::map_indices(exec, self.grid.len(), |k| self.row(&spec, k));
        let mut out = Array2::from_elem((self.grid.len(), self.n), Complex64::new(0.0, 0.0));
        for (k, row) in rows.into_iter().enumerate() {
            for (dst, src) in out.row_mut(k).iter_mut().zip(row) {
                *dst = src;
            }
        }
        out
    }
}

/// Frequency-domain transform: one forward DFT, then a pointwise product and
/// an inverse DFT per scale.
pub fn cwt_fft(x: &TimeSeries, params: &MorseParams, grid: &ScaleGrid) -> Result<Scalogram> {
    cwt_fft_with(x, params, grid, Execution::default())
}

pub fn cwt_fft_with(
    x: &TimeSeries,
    params: &MorseParams,
    grid: &ScaleGrid,
    exec: Execution,
) -> Result<Scalogram> {
    check_params(params, grid)?;
    let plan = CwtPlan::new(x.len(), grid);
    let coeffs = plan.transform(x.values(), exec);
    Ok(Scalogram::new(coeffs, grid.clone(), x.dt(), x.t0()))
}

/// Direct time-domain summation, `O(n² · scales)`. Kernels come from
/// [`morse::morse_time`] on a window long enough to hold 99.9% of their
/// energy and are wrapped onto the periodic series.
pub fn cwt_direct(x: &TimeSeries, params: &MorseParams, grid: &ScaleGrid) -> Result<Scalogram> {
    cwt_direct_with_limit(x, params, grid, DEFAULT_DIRECT_LIMIT)
}

pub fn cwt_direct_with_limit(
    x: &TimeSeries,
    params: &MorseParams,
    grid: &ScaleGrid,
    max_len: usize,
) -> Result<Scalogram> {
    check_params(params, grid)?;
    let n = x.len();
    if n > max_len {
        return Err(Error::LengthGuard { n, max: max_len });
    }
    let values = demeaned(x.values());
    let rows: Vec<Result<Vec<Complex64>>> = par::map_indices(Execution::default(), grid.len(), |k| {
        let s = grid.scales()[k];
        let mut window = n;
        let kernel = loop {
            let kernel = morse::morse_time(params, window, s)?;
            if !kernel.is_truncated(morse::DEFAULT_ENERGY_THRESHOLD) || window >= 64 * n {
                break kernel;
            }
            window *= 2;
        };
        let mut wrapped = vec![Complex64::new(0.0, 0.0); n];
        for (j, v) in kernel.samples.iter().enumerate() {
            let t = kernel.offset(j) as i64;
            wrapped[t.rem_euclid(n as i64) as usize] += v;
        }
        Ok((0..n)
            .map(|tau| {
                values
                    .iter()
                    .enumerate()
                    .map(|(t, &xv)| wrapped[(t + n - tau) % n].conj() * xv)
                    .sum()
            })
            .collect())
    });
    let mut coeffs = Array2::from_elem((grid.len(), n), Complex64::new(0.0, 0.0));
    for (k, row) in rows.into_iter().enumerate() {
        for (dst, src) in coeffs.row_mut(k).iter_mut().zip(row?) {
            *dst = src;
        }
    }
    Ok(Scalogram::new(coeffs, grid.clone(), x.dt(), x.t0()))
}

/// Cells farther than `decay_multiplier` envelope standard deviations of the
/// row's kernel from both ends of the series.
pub fn edge_mask(grid: &ScaleGrid, n: usize, decay_multiplier: f64) -> Array2<bool> {
    let unit = morse::envelope_std(&grid.params());
    let mut mask = Array2::from_elem((grid.len(), n), false);
    for (k, &s) in grid.scales().iter().enumerate() {
        let margin = decay_multiplier * unit * s;
        for i in 0..n {
            let dist = i.min(n - 1 - i) as f64;
            mask[[k, i]] = dist > margin;
        }
    }
    mask
}
