//! Maxima of the transform modulus, noise thresholds, element estimation,
//! and the forward element model used for synthesis and reconstruction.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cwt::{CwtPlan, ScaleGrid, Scalogram, TimeSeries};
use crate::morse::{self, MorseParams};
use crate::par::{self, Execution};
use crate::special::ln_gamma;
use crate::theory::{self, ElementParams};
use crate::{Error, Result};

/// Minimum number of valid finest-scale coefficients for a noise estimate.
pub const MIN_NOISE_SAMPLES: usize = 64;

/// Maxima below this fraction of the largest valid modulus are treated as
/// round-off.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Events closer than this many envelope widths are flagged as overlapping.
pub const OVERLAP_WIDTHS: f64 = 2.0;

/// A strict local maximum of `|W|` with sub-grid refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPoint {
    pub scale_index: usize,
    pub time_index: usize,
    /// Refined time in samples from the start of the series.
    pub t_hat: f64,
    /// Refined scale in samples.
    pub s_hat: f64,
    /// Refined coefficient: interpolated modulus with interpolated phase.
    pub w_value: Complex64,
    pub modulus: f64,
}

/// Offset and log-height gain of the parabola through three samples.
fn parabola(l: f64, c: f64, r: f64) -> (f64, f64) {
    let denom = l - 2.0 * c + r;
    if !(denom < 0.0) {
        return (0.0, 0.0);
    }
    let d = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
    (d, -0.25 * (l - r) * d)
}

fn quadratic_at(l: f64, c: f64, r: f64, d: f64) -> f64 {
    c + 0.5 * d * (r - l) + 0.5 * d * d * (l - 2.0 * c + r)
}

fn unwrap_near(reference: f64, angle: f64) -> f64 {
    let mut a = angle;
    while a - reference > PI {
        a -= 2.0 * PI;
    }
    while a - reference < -PI {
        a += 2.0 * PI;
    }
    a
}

/// Grid points whose modulus strictly exceeds all eight neighbours and
/// `floor`, inside the valid region. Sorted by descending modulus.
pub fn find_maxima(scalogram: &Scalogram, floor: f64) -> Vec<MaxPoint> {
    let modulus = scalogram.modulus();
    let (ns, nt) = modulus.dim();
    let mut out = Vec::new();
    if ns < 3 || nt < 3 {
        return out;
    }
    let log_step = scalogram.grid.log_step();
    for k in 1..ns - 1 {
        for i in 1..nt - 1 {
            let m = modulus[[k, i]];
            if !(m > floor) || !scalogram.valid[[k, i]] {
                continue;
            }
            let strict = (k - 1..=k + 1)
                .flat_map(|a| (i - 1..=i + 1).map(move |b| (a, b)))
                .filter(|&(a, b)| (a, b) != (k, i))
                .all(|(a, b)| modulus[[a, b]] < m);
            if strict {
                out.push(refine(scalogram, &modulus, k, i, log_step));
            }
        }
    }
    out.sort_by(|a, b| b.modulus.total_cmp(&a.modulus));
    out
}

fn refine(sc: &Scalogram, modulus: &Array2<f64>, k: usize, i: usize, log_step: f64) -> MaxPoint {
    let ln = |a: usize, b: usize| modulus[[a, b]].max(f64::MIN_POSITIVE).ln();
    let (dt, gain_t) = parabola(ln(k, i - 1), ln(k, i), ln(k, i + 1));
    let (ds, gain_s) = parabola(ln(k - 1, i), ln(k, i), ln(k + 1, i));

    let p0 = sc.coeffs[[k, i]].arg();
    let pl = unwrap_near(p0, sc.coeffs[[k, i - 1]].arg());
    let pr = unwrap_near(p0, sc.coeffs[[k, i + 1]].arg());
    let phase = quadratic_at(pl, p0, pr, dt);

    let m = (ln(k, i) + gain_t + gain_s).exp();
    MaxPoint {
        scale_index: k,
        time_index: i,
        t_hat: i as f64 + dt,
        s_hat: sc.grid.scales()[k] * (ds * log_step).exp(),
        w_value: Complex64::from_polar(m, phase),
        modulus: m,
    }
}

/// How per-scale thresholds are calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMethod {
    /// Closed-form white-noise variance with a Bonferroni Rayleigh quantile.
    AnalyticWhite,
    /// Empirical quantile of the largest normalized maximum over `trials`
    /// seeded white-noise realizations.
    MonteCarlo { trials: usize, seed: u64 },
}

impl NoiseMethod {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseMethod::AnalyticWhite => "analytic-white",
            NoiseMethod::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub sigma_hat: f64,
    /// Modulus threshold for each scale row.
    pub per_scale_threshold: Vec<f64>,
    pub alpha: f64,
    pub method: NoiseMethod,
    /// Threshold in units of `sigma_hat` times the unit-noise standard
    /// deviation of the row.
    pub critical: f64,
    /// Standard deviation of `|W|` per row for unit white noise.
    pub unit_sd: Vec<f64>,
}

/// `E|W|²` per unit noise variance for the continuous transform at scale `s`
/// (in samples).
pub fn white_noise_variance(params: &MorseParams, s: f64) -> f64 {
    let (b, g) = (params.beta(), params.gamma());
    let e = (2.0 * b + 1.0) / g;
    (2.0 * params.log_norm() + ln_gamma(e) - (2.0 * PI * g).ln() - e * LN_2 - s.ln()).exp()
}

fn check_element_params(sc: &Scalogram, p: &ElementParams) -> Result<()> {
    let want = p.analysis();
    if sc.params != want {
        return Err(Error::ParameterMismatch {
            got_beta: sc.params.beta(),
            got_gamma: sc.params.gamma(),
            want_beta: want.beta(),
            want_gamma: want.gamma(),
        });
    }
    Ok(())
}

/// Noise level from the finest row: for circular Gaussian coefficients the
/// median modulus is `sd · √ln 2`.
fn sigma_from_finest(coeffs: &Array2<Complex64>, valid: &Array2<bool>, unit_sd0: f64) -> Option<f64> {
    let mut row: Vec<f64> = coeffs
        .row(0)
        .iter()
        .zip(valid.row(0))
        .filter(|(_, &v)| v)
        .map(|(c, _)| c.norm())
        .collect();
    if row.len() < MIN_NOISE_SAMPLES {
        return None;
    }
    let mid = row.len() / 2;
    let (_, &mut median, _) = row.select_nth_unstable_by(mid, f64::total_cmp);
    Some(median / (unit_sd0 * LN_2.sqrt()))
}

pub fn estimate_noise(sc: &Scalogram, p: &ElementParams, alpha: f64, method: NoiseMethod) -> Result<NoiseModel> {
    estimate_noise_with(sc, p, alpha, method, Execution::default())
}

pub fn estimate_noise_with(
    sc: &Scalogram,
    p: &ElementParams,
    alpha: f64,
    method: NoiseMethod,
    exec: Execution,
) -> Result<NoiseModel> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha", alpha, "0 < alpha < 1"));
    }
    check_element_params(sc, p)?;
    let (unit_sd, critical) = match method {
        NoiseMethod::AnalyticWhite => {
            let sd: Vec<f64> = sc
                .grid
                .scales()
                .iter()
                .map(|&s| white_noise_variance(&sc.params, s).sqrt())
                .collect();
            let cells = sc.valid.iter().filter(|&&v| v).count().max(1) as f64;
            (sd, (cells / alpha).ln().sqrt())
        }
        NoiseMethod::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::domain("trials", 0.0, "trials >= 1"));
            }
            let cal = null_calibration(&sc.grid, sc.n_times(), &sc.valid, trials, seed, exec);
            let critical = cal.quantile(1.0 - alpha);
            (cal.unit_sd.clone(), critical)
        }
    };
    let finest_sd = discrete_unit_sd(sc.n_times(), sc.grid.scales()[0], &sc.params);
    let sigma_hat = sigma_from_finest(&sc.coeffs, &sc.valid, finest_sd).ok_or_else(|| {
        Error::InsufficientData(format!(
            "fewer than {MIN_NOISE_SAMPLES} valid coefficients at the finest scale"
        ))
    })?;
    // A noiseless input gives sigma_hat = 0; keep thresholds positive.
    let floor = f64::MIN_POSITIVE.max(sc.max_valid_modulus() * 1e-12);
    let per_scale_threshold = unit_sd.iter().map(|sd| (critical * sigma_hat * sd).max(floor)).collect();
    Ok(NoiseModel {
        sigma_hat,
        per_scale_threshold,
        alpha,
        method,
        critical,
        unit_sd,
    })
}

/// Exact unit-noise standard deviation of one row of the discrete circular
/// transform.
fn discrete_unit_sd(n: usize, s: f64, params: &MorseParams) -> f64 {
    let step = 2.0 * PI / n as f64;
    let sum: f64 = (1..=n / 2).map(|k| params.response(s * k as f64 * step).powi(2)).sum();
    (sum / n as f64).sqrt()
}

/// Null distribution of the largest normalized maximum over white-noise
/// realizations sharing a length, grid and validity mask.
#[derive(Debug)]
pub struct NullCalibration {
    /// Sorted ascending; one value per realization.
    pub statistics: Vec<f64>,
    pub unit_sd: Vec<f64>,
}

impl NullCalibration {
    /// Smallest statistic exceeded by at most a fraction `1 - q` of the
    /// realizations.
    pub fn quantile(&self, q: f64) -> f64 {
        let m = self.statistics.len();
        let idx = ((q * m as f64).ceil() as usize).clamp(1, m) - 1;
        self.statistics[idx]
    }
}

type CalibrationKey = (usize, Vec<u64>, Vec<bool>, usize, u64);

fn calibration_cache() -> &'static Mutex<HashMap<CalibrationKey, Arc<NullCalibration>>> {
    static CACHE: OnceLock<Mutex<HashMap<CalibrationKey, Arc<NullCalibration>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

const CALIBRATION_SALT: u64 = 0x6d6f_7273_655f_6d63;

/// Runs (or fetches from the process-wide cache) the Monte Carlo null.
pub fn null_calibration(
    grid: &ScaleGrid,
    n: usize,
    valid: &Array2<bool>,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Arc<NullCalibration> {
    let mut bits: Vec<u64> = vec![grid.params().beta().to_bits(), grid.params().gamma().to_bits()];
    bits.extend(grid.scales().iter().map(|s| s.to_bits()));
    let key = (n, bits, valid.iter().copied().collect(), trials, seed);
    if let Some(hit) = calibration_cache().lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return hit.clone();
    }

    let plan = CwtPlan::new(n, grid);
    let unit_sd: Vec<f64> = plan.white_noise_variance().into_iter().map(f64::sqrt).collect();
    let probe = Scalogram::from_parts(
        Array2::from_elem((grid.len(), n), Complex64::new(0.0, 0.0)),
        grid.clone(),
        1.0,
        0.0,
        valid.clone(),
    );
    let mut statistics = par::map_indices(exec, trials, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ CALIBRATION_SALT);
        rng.set_stream(r as u64);
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let coeffs = plan.transform(&x, Execution::Sequential);
        let sigma = match sigma_from_finest(&coeffs, valid, unit_sd[0]) {
            Some(s) if s > 0.0 => s,
            _ => return 0.0,
        };
        let sc = Scalogram { coeffs, ..probe.clone() };
        find_maxima(&sc, 0.0)
            .iter()
            .map(|m| m.modulus / (sigma * unit_sd[m.scale_index]))
            .fold(0.0, f64::max)
    });
    statistics.sort_by(f64::total_cmp);
    let cal = Arc::new(NullCalibration { statistics, unit_sd });
    calibration_cache()
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .insert(key, cal.clone());
    cal
}

/// One term of the element model: `Re{c ψ_μ((t - t)/ρ)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    /// Center in samples from the start of the series.
    pub t: f64,
    pub c: Complex64,
    /// Scale in samples.
    pub rho: f64,
}

/// An estimated element with derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementEvent {
    /// Center in samples from the start of the series.
    pub t_sample: f64,
    /// Center in the series' time unit: `t0 + t_sample · dt`.
    pub time: f64,
    pub c: Complex64,
    pub rho: f64,
    /// Element frequency in radians per sample.
    pub omega_rho: f64,
    /// `2π dt / ω_ρ`, in the series' time unit.
    pub period: f64,
    /// Maximum modulus over the row threshold.
    pub significance: f64,
    pub overlap: bool,
}

impl ElementEvent {
    pub fn c_abs(&self) -> f64 {
        self.c.norm()
    }

    pub fn c_phase(&self) -> f64 {
        self.c.arg()
    }

    pub fn element(&self) -> Element {
        Element {
            t: self.t_sample,
            c: self.c,
            rho: self.rho,
        }
    }
}

impl From<&ElementEvent> for Element {
    fn from(e: &ElementEvent) -> Self {
        e.element()
    }
}

/// Envelope width of an element of scale `rho` in samples.
pub fn element_width(p: &ElementParams, rho: f64) -> f64 {
    morse::envelope_std(&p.element()) * rho
}

/// Turns significant maxima into element estimates, sorted by time, with
/// overlap flags between neighbours closer than two envelope widths.
pub fn estimate_elements(
    maxima: &[MaxPoint],
    noise: &NoiseModel,
    p: &ElementParams,
    sc: &Scalogram,
) -> Result<Vec<ElementEvent>> {
    check_element_params(sc, p)?;
    let zmax = theory::zeta_max(p);
    let s_max = theory::s_tilde_max(p);
    let omega_beta = sc.params.peak_frequency();
    let mut events = Vec::new();
    for m in maxima {
        let threshold = noise.per_scale_threshold[m.scale_index];
        let significance = m.modulus / threshold;
        if !(significance >= 1.0) {
            continue;
        }
        let omega_rho = theory::element_frequency(omega_beta / m.s_hat, p)?;
        events.push(ElementEvent {
            t_sample: m.t_hat,
            time: sc.t0 + m.t_hat * sc.dt,
            c: m.w_value * (2.0 / zmax),
            rho: m.s_hat / s_max,
            omega_rho,
            period: 2.0 * PI * sc.dt / omega_rho,
            significance,
            overlap: false,
        });
    }
    events.sort_by(|a, b| a.t_sample.total_cmp(&b.t_sample));
    flag_overlaps(&mut events, p);
    Ok(events)
}

fn flag_overlaps(events: &mut [ElementEvent], p: &ElementParams) {
    let unit = morse::envelope_std(&p.element());
    for i in 0..events.len() {
        for j in i + 1..events.len() {
            let limit = OVERLAP_WIDTHS * unit * events[i].rho.max(events[j].rho);
            if events[j].t_sample - events[i].t_sample < limit {
                events[i].overlap = true;
                events[j].overlap = true;
            }
        }
    }
}

/// Samples `Σ Re{c ψ_μ((t - t_n)/ρ_n)}` plus `sigma` times seeded unit white
/// Gaussian noise.
pub fn synthesize(
    elements: &[Element],
    p: &ElementParams,
    n: usize,
    dt: f64,
    sigma: f64,
    seed: u64,
) -> Result<TimeSeries> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain("sigma", sigma, "sigma >= 0"));
    }
    let table = morse::morse_table(&p.element());
    let mut x = vec![0.0; n];
    for e in elements {
        if !(e.t >= 0.0 && e.t < n as f64) {
            return Err(Error::EventOutOfRange { time: e.t, n });
        }
        if !(e.rho > 0.0 && e.rho.is_finite()) {
            return Err(Error::domain("rho", e.rho, "rho > 0"));
        }
        let reach = table.extent() * e.rho;
        let lo = (e.t - reach).floor().max(0.0) as usize;
        let hi = ((e.t + reach).ceil().max(0.0) as usize).min(n.saturating_sub(1));
        for (j, v) in x.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *v += (e.c * table.eval((j as f64 - e.t) / e.rho)).re;
        }
    }
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut x {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
    }
    TimeSeries::new(x, dt, 0.0)
}

/// Noise-free element scalogram `½ Σ ĉ_n ζ((τ - t̂_n)/ρ̂_n, s/ρ̂_n)`.
pub fn reconstruct_scalogram(
    events: &[Element],
    p: &ElementParams,
    grid: &ScaleGrid,
    n: usize,
    dt: f64,
    t0: f64,
) -> Result<Scalogram> {
    reconstruct_scalogram_with(events, p, grid, n, dt, t0, Execution::default())
}

pub fn reconstruct_scalogram_with(
    events: &[Element],
    p: &ElementParams,
    grid: &ScaleGrid,
    n: usize,
    dt: f64,
    t0: f64,
    exec: Execution,
) -> Result<Scalogram> {
    if grid.params() != p.analysis() {
        let g = grid.params();
        return Err(Error::ParameterMismatch {
            got_beta: g.beta(),
            got_gamma: g.gamma(),
            want_beta: p.beta(),
            want_gamma: p.gamma(),
        });
    }
    let table = morse::morse_table(&p.combined());
    let rows = par::map_indices(exec, grid.len(), |k| {
        let s = grid.scales()[k];
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        for e in events {
            let s_tilde = s / e.rho;
            let spread = (1.0 + s_tilde.powf(p.gamma())).powf(1.0 / p.gamma()) * e.rho;
            let reach = table.extent() * spread;
            let lo = (e.t - reach).floor().max(0.0) as usize;
            let hi = ((e.t + reach).ceil().max(0.0) as usize).min(n.saturating_sub(1));
            for (i, v) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *v += 0.5 * e.c * theory::zeta_with(p, &table, (i as f64 - e.t) / e.rho, s_tilde);
            }
        }
        row
    });
    let mut coeffs = Array2::from_elem((grid.len(), n), Complex64::new(0.0, 0.0));
    for (k, row) in rows.into_iter().enumerate() {
        for (dst, src) in coeffs.row_mut(k).iter_mut().zip(row) {
            *dst = src;
        }
    }
    Ok(Scalogram::new(coeffs, grid.clone(), dt, t0))
}

/// Maxima, noise model and significant events for one scalogram.
#[derive(Debug, Clone)]
pub struct Detection {
    pub maxima: Vec<MaxPoint>,
    pub noise: NoiseModel,
    pub events: Vec<ElementEvent>,
}

pub fn detect(sc: &Scalogram, p: &ElementParams, alpha: f64, method: NoiseMethod, exec: Execution) -> Result<Detection> {
    let noise = estimate_noise_with(sc, p, alpha, method, exec)?;
    let maxima = find_maxima(sc, RELATIVE_FLOOR * sc.max_valid_modulus());
    let events = estimate_elements(&maxima, &noise, p, sc)?;
    Ok(Detection { maxima, noise, events })
}
