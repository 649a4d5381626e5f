//! Front end of the analysis: uniform resampling and zero-phase Butterworth
//! high-pass filtering.

use std::f64::consts::PI;

use crate::cwt::TimeSeries;
use crate::{Error, Result};

/// Dated observations. Times are in days since the Unix epoch; missing values
/// are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    timestamps: Vec<f64>,
    values: Vec<f64>,
}

impl RawSeries {
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::InvalidRange(format!(
                "{} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if timestamps.is_empty() {
            return Err(Error::EmptySeries);
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::NonMonotone(i + 1));
            }
        }
        Ok(RawSeries { timestamps, values })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Linear interpolation onto `t_first, t_first + dt, ...` up to the last
/// observation. Fails instead of bridging a gap longer than `max_gap · dt`.
pub fn resample_uniform(raw: &RawSeries, dt: f64, max_gap: f64) -> Result<TimeSeries> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain("dt", dt, "dt > 0"));
    }
    let obs: Vec<(f64, f64)> = raw
        .timestamps
        .iter()
        .zip(&raw.values)
        .filter(|(_, v)| v.is_finite())
        .map(|(&t, &v)| (t, v))
        .collect();
    if obs.len() < crate::cwt::MIN_SERIES_LEN {
        return Err(Error::InsufficientData(format!(
            "{} usable observations, at least {} required",
            obs.len(),
            crate::cwt::MIN_SERIES_LEN
        )));
    }
    let limit = max_gap * dt;
    for (i, w) in obs.windows(2).enumerate() {
        let gap = w[1].0 - w[0].0;
        if gap > limit * (1.0 + 1e-12) {
            return Err(Error::GapTooLong {
                index: i + 1,
                gap,
                limit,
            });
        }
    }
    let (t_first, t_last) = (obs[0].0, obs[obs.len() - 1].0);
    let n = ((t_last - t_first) / dt + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let t = t_first + i as f64 * dt;
        while j + 2 < obs.len() && obs[j + 1].0 < t {
            j += 1;
        }
        let (t_a, v_a) = obs[j];
        let (t_b, v_b) = obs[(j + 1).min(obs.len() - 1)];
        let v = if t_b > t_a {
            let u = ((t - t_a) / (t_b - t_a)).clamp(0.0, 1.0);
            v_a + u * (v_b - v_a)
        } else {
            v_a
        };
        out.push(v);
    }
    TimeSeries::new(out, dt, t_first)
}

/// High-pass Butterworth parameters. `cutoff_freq` is in cycles per time
/// unit of the series it is applied to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub order: u32,
    pub cutoff_freq: f64,
}

impl FilterSpec {
    pub fn highpass(order: u32, cutoff_freq: f64) -> Self {
        FilterSpec { order, cutoff_freq }
    }
}

/// One second-order (or, with `b[2] = a[2] = 0`, first-order) section in
/// transposed direct form II. `a[0]` is implicitly 1.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Section {
    b: [f64; 3],
    a: [f64; 3],
}

impl Section {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[1] + self.a[2])
    }

    /// State that makes a constant input `u` produce its steady output.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let y = self.dc_gain() * u;
        let z2 = self.b[2] * u - self.a[2] * y;
        let z1 = self.b[1] * u - self.a[1] * y + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z[0];
            z[0] = self.b[1] * input - self.a[1] * y + z[1];
            z[1] = self.b[2] * input - self.a[2] * y;
            *v = y;
        }
    }
}

/// Digital Butterworth high-pass filter: analog prototype mapped by the
/// bilinear transform with the cutoff prewarped, realized as a cascade of
/// biquads plus one first-order section for odd orders.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    order: u32,
    cutoff: f64,
    sections: Vec<Section>,
}

impl Butterworth {
    /// `cutoff` in cycles/sample, strictly inside `(0, 0.5)`.
    pub fn highpass(order: u32, cutoff: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::domain("order", 0.0, "order >= 1"));
        }
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(Error::domain("cutoff", cutoff, "cutoff > 0"));
        }
        if cutoff >= 0.5 {
            return Err(Error::CutoffAboveNyquist {
                cutoff,
                nyquist: 0.5,
            });
        }
        let k = (PI * cutoff).tan();
        let mut sections = Vec::new();
        for i in 0..order / 2 {
            let phi = PI * f64::from(2 * i + order + 1) / f64::from(2 * order);
            let q = -1.0 / (2.0 * phi.cos());
            let norm = 1.0 / (1.0 + k / q + k * k);
            sections.push(Section {
                b: [norm, -2.0 * norm, norm],
                a: [1.0, 2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
            });
        }
        if order % 2 == 1 {
            let norm = 1.0 / (1.0 + k);
            sections.push(Section {
                b: [norm, -norm, 0.0],
                a: [1.0, (k - 1.0) * norm, 0.0],
            });
        }
        Ok(Butterworth {
            order,
            cutoff,
            sections,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Magnitude of the frequency response at `f` cycles/sample.
    pub fn gain(&self, f: f64) -> f64 {
        let w = 2.0 * PI * f;
        let z1 = num_complex::Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| ((z2 * s.b[2] + z1 * s.b[1] + s.b[0]) / (z2 * s.a[2] + z1 * s.a[1] + 1.0)).norm())
            .product()
    }

    /// Causal single pass from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y, [0.0, 0.0]);
        }
        y
    }

    /// Causal single pass with every section started at the steady state for
    /// a constant input equal to `x[0]`.
    fn filter_from_steady(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut u = x.first().copied().unwrap_or(0.0);
        for s in &self.sections {
            let z = s.steady_state(u);
            u *= s.dc_gain();
            s.run(&mut y, z);
        }
        y
    }

    pub fn impulse_response(&self, len: usize) -> Vec<f64> {
        let mut x = vec![0.0; len];
        if len > 0 {
            x[0] = 1.0;
        }
        self.filter(&x)
    }

    /// Number of samples until the impulse response stays below 1e-3 of its
    /// peak magnitude.
    pub fn effective_length(&self) -> usize {
        let mut len = 256;
        loop {
            let h = self.impulse_response(len);
            let peak = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let last = h.iter().rposition(|v| v.abs() >= 1e-3 * peak).unwrap_or(0);
            if last + 64 < len || len >= 1 << 22 {
                return last + 1;
            }
            len *= 4;
        }
    }

    /// Forward-backward application (zero phase, squared magnitude) with odd
    /// reflective padding of three effective impulse lengths at each end.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = (3 * self.effective_length()).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let mut y = self.filter_from_steady(&ext);
        y.reverse();
        let mut y = self.filter_from_steady(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Zero-phase high-pass filtering of a uniformly sampled series.
pub fn butterworth_highpass(x: &TimeSeries, spec: &FilterSpec) -> Result<TimeSeries> {
    let nyquist = 0.5 / x.dt();
    if spec.cutoff_freq >= nyquist {
        return Err(Error::CutoffAboveNyquist {
            cutoff: spec.cutoff_freq,
            nyquist,
        });
    }
    let filter = Butterworth::highpass(spec.order, spec.cutoff_freq * x.dt())?;
    Ok(x.with_values(filter.filtfilt(x.values())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Steady-state amplitude of a single causal pass, measured by least
    /// squares against sin/cos over the second half of a long run.
    pub(crate) fn measured_gain(filter: &Butterworth, f: f64) -> f64 {
        let n = 40_000;
        let w = 2.0 * PI * f;
        let x: Vec<f64> = (0..n).map(|t| (w * t as f64).sin()).collect();
        let y = filter.filter(&x);
        let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (t, v) in y.iter().enumerate().skip(n / 2) {
            let (s, c) = (w * t as f64).sin_cos();
            ss += s * s;
            sc += s * c;
            cc += c * c;
            ys += v * s;
            yc += v * c;
        }
        let det = ss * cc - sc * sc;
        let a = (ys * cc - yc * sc) / det;
        let b = (yc * ss - ys * sc) / det;
        a.hypot(b)
    }

    #[test]
    fn gain_at_cutoff_is_half_power() {
        for &fc in &[0.01, 0.05, 0.2, 0.4] {
            let f = Butterworth::highpass(3, fc).unwrap();
            assert_relative_eq!(f.gain(fc), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-12);
            assert!((measured_gain(&f, fc) - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.012);
        }
    }

    #[test]
    fn passband_above_four_times_cutoff() {
        let f = Butterworth::highpass(3, 0.05).unwrap();
        assert!(measured_gain(&f, 0.2) >= 0.99);
        // analytic: 1/sqrt(1 + (fc/f)^6) in the prewarped domain
        assert!(f.gain(0.2) >= 0.99);
    }

    #[test]
    fn dc_is_rejected() {
        let x = TimeSeries::new(vec![4.2; 500], 1.0, 0.0).unwrap();
        let y = butterworth_highpass(&x, &FilterSpec::highpass(3, 0.02)).unwrap();
        assert!(y.values().iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn gain_is_monotone() {
        let f = Butterworth::highpass(3, 0.03).unwrap();
        let mut last = 0.0;
        for i in 1..=20 {
            let g = measured_gain(&f, 0.0045 * f64::from(i) + 0.002);
            assert!(g >= last - 1e-9);
            last = g;
        }
    }

    #[test]
    fn impulse_response_decays() {
        for &fc in &[0.005, 0.02, 0.1, 0.3, 0.45] {
            let f = Butterworth::highpass(3, fc).unwrap();
            let h = f.impulse_response(4096);
            let peak = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let tail = h[3000..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(tail < 1e-10 * peak, "fc={fc}");
        }
    }

    #[test]
    fn other_orders_hit_half_power_too() {
        for order in 1..=6 {
            let f = Butterworth::highpass(order, 0.1).unwrap();
            assert_relative_eq!(f.gain(0.1), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-12);
            assert!(f.gain(0.49) > 0.999);
        }
    }

    #[test]
    fn cutoff_guards() {
        let x = TimeSeries::new(vec![0.0; 64], 2.0, 0.0).unwrap();
        assert!(matches!(
            butterworth_highpass(&x, &FilterSpec::highpass(3, 0.25)),
            Err(Error::CutoffAboveNyquist { .. })
        ));
        assert!(Butterworth::highpass(3, 0.0).is_err());
        assert!(Butterworth::highpass(0, 0.1).is_err());
    }

    #[test]
    fn zero_phase_keeps_peak_position() {
        let n = 1024;
        let x: Vec<f64> = (0..n)
            .map(|t| {
                let u = (t as f64 - 500.0) / 6.0;
                (-(u * u)).exp() * (1.3 * u).cos()
            })
            .collect();
        let x = TimeSeries::from_samples(x).unwrap();
        let y = butterworth_highpass(&x, &FilterSpec::highpass(3, 0.01)).unwrap();
        let argmax = y
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 500);
    }

    #[test]
    fn linear_and_shift_invariant_in_the_interior() {
        let f = Butterworth::highpass(3, 0.05).unwrap();
        let x: Vec<f64> = (0..600).map(|t| ((t * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let y: Vec<f64> = (0..600).map(|t| (t as f64 * 0.3).sin()).collect();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let (fx, fy, fs) = (f.filter(&x), f.filter(&y), f.filter(&sum));
        for i in 0..600 {
            assert!((fs[i] - (2.0 * fx[i] - 3.0 * fy[i])).abs() < 1e-12);
        }
        let mut shifted = vec![0.0; 10];
        shifted.extend_from_slice(&x);
        let fsh = f.filter(&shifted);
        for i in 0..590 {
            assert!((fsh[i + 10] - fx[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn resampling() {
        let raw = RawSeries::new((0..20).map(f64::from).collect(), (0..20).map(|i| f64::from(i) * 0.5).collect()).unwrap();
        let x = resample_uniform(&raw, 1.0, 5.0).unwrap();
        assert_eq!(x.values(), raw.values());

        let mut t: Vec<f64> = vec![0.0, 2.0];
        t.extend((3..20).map(f64::from));
        let mut v = vec![0.0, 2.0];
        v.extend((3..20).map(f64::from));
        let x = resample_uniform(&RawSeries::new(t, v).unwrap(), 1.0, 5.0).unwrap();
        assert_relative_eq!(x.values()[1], 1.0);

        let mut t: Vec<f64> = (0..16).map(f64::from).collect();
        t.push(25.0);
        let v = vec![1.0; 17];
        let err = resample_uniform(&RawSeries::new(t, v).unwrap(), 1.0, 5.0).unwrap_err();
        assert!(matches!(err, Error::GapTooLong { .. }));

        assert!(matches!(RawSeries::new(vec![0.0, 2.0, 1.0], vec![0.0; 3]), Err(Error::NonMonotone(2))));
    }

    #[test]
    fn resampling_skips_missing_values() {
        let t: Vec<f64> = (0..20).map(f64::from).collect();
        let mut v: Vec<f64> = (0..20).map(f64::from).collect();
        v[7] = f64::NAN;
        let x = resample_uniform(&RawSeries::new(t, v).unwrap(), 1.0, 5.0).unwrap();
        assert_relative_eq!(x.values()[7], 7.0);
    }
}
