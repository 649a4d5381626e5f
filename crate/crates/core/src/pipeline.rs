//! The end-to-end run: read, resample, high-pass, transform, detect,
//! reconstruct. Each stage is exposed on its own and errors are labelled
//! with the stage that raised them.

use std::path::Path;

use crate::cwt::{self, make_scale_grid, Scalogram, TimeSeries};
use crate::detect::{self, Detection, Element};
use crate::io::{self, AnalysisConfig, CsvSeries, EventRecord, Manifest, DEFAULT_MISSING};
use crate::par::Execution;
use crate::preprocess::{self, RawSeries};
use crate::Result;

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunResults {
    pub config: AnalysisConfig,
    pub dropped: usize,
    pub resampled: TimeSeries,
    /// The series that was transformed (equal to `resampled` when filtering
    /// is off).
    pub filtered: TimeSeries,
    pub scalogram: Scalogram,
    pub detection: Detection,
    pub element_scalogram: Scalogram,
}

impl RunResults {
    pub fn event_records(&self) -> Vec<EventRecord> {
        self.detection.events.iter().map(EventRecord::from).collect()
    }
}

/// Advisory messages for parameter choices that favour sidelobes or a
/// coarse scale grid.
pub fn parameter_warnings(cfg: &AnalysisConfig) -> Vec<String> {
    let mut out = Vec::new();
    if cfg.gamma > 3.0 {
        out.push(format!("gamma = {} > 3: wavelet sidelobes may produce spurious maxima", cfg.gamma));
    }
    if cfg.beta < 1.0 {
        out.push(format!("beta = {} < 1: wavelet sidelobes may produce spurious maxima", cfg.beta));
    }
    if cfg.voxels_per_octave < 4 {
        out.push(format!(
            "voxels_per_octave = {} < 4: scale estimates will be coarse",
            cfg.voxels_per_octave
        ));
    }
    out
}

pub fn load_series(path: &Path, cfg: &AnalysisConfig) -> Result<CsvSeries> {
    io::read_csv(path, &cfg.date_column, &cfg.value_column, DEFAULT_MISSING).map_err(|e| e.in_stage("read"))
}

pub fn resample(raw: &RawSeries, cfg: &AnalysisConfig) -> Result<TimeSeries> {
    (|| preprocess::resample_uniform(raw, cfg.dt_days()?, cfg.max_gap))().map_err(|e| e.in_stage("resample"))
}

pub fn filter(x: &TimeSeries, cfg: &AnalysisConfig) -> Result<TimeSeries> {
    (|| match cfg.filter_spec()? {
        Some(spec) => preprocess::butterworth_highpass(x, &spec),
        None => Ok(x.clone()),
    })()
    .map_err(|e| e.in_stage("filter"))
}

pub fn transform(x: &TimeSeries, cfg: &AnalysisConfig, exec: Execution) -> Result<Scalogram> {
    for w in parameter_warnings(cfg) {
        log::warn!("{w}");
    }
    (|| {
        let p = cfg.element_params()?;
        let grid = make_scale_grid(
            &p.analysis(),
            cfg.min_period_samples()?,
            cfg.max_period_samples()?,
            cfg.voxels_per_octave,
        )?;
        Ok(cwt::cwt_fft_with(x, &p.analysis(), &grid, exec)?.with_decay_multiplier(cfg.decay_multiplier))
    })()
    .map_err(|e: crate::Error| e.in_stage("transform"))
}

pub fn detect(sc: &Scalogram, cfg: &AnalysisConfig, exec: Execution) -> Result<Detection> {
    (|| detect::detect(sc, &cfg.element_params()?, cfg.alpha, cfg.noise_method(), exec))()
        .map_err(|e| e.in_stage("detect"))
}

/// Element scalogram on the grid and time axis of `like`.
pub fn reconstruct(elements: &[Element], cfg: &AnalysisConfig, like: &Scalogram, exec: Execution) -> Result<Scalogram> {
    (|| {
        let sc = detect::reconstruct_scalogram_with(
            elements,
            &cfg.element_params()?,
            &like.grid,
            like.n_times(),
            like.dt,
            like.t0,
            exec,
        )?;
        Ok(sc.with_decay_multiplier(cfg.decay_multiplier))
    })()
    .map_err(|e: crate::Error| e.in_stage("reconstruct"))
}

/// Runs every stage after reading.
pub fn run(raw: &RawSeries, dropped: usize, cfg: &AnalysisConfig, exec: Execution) -> Result<RunResults> {
    let resampled = resample(raw, cfg)?;
    let filtered = filter(&resampled, cfg)?;
    let scalogram = transform(&filtered, cfg, exec)?;
    let detection = detect(&scalogram, cfg, exec)?;
    let elements: Vec<Element> = detection.events.iter().map(Element::from).collect();
    let element_scalogram = reconstruct(&elements, cfg, &scalogram, exec)?;
    log::info!(
        "{} samples, {} maxima, {} significant events (sigma_hat = {:.4e})",
        filtered.len(),
        detection.maxima.len(),
        detection.events.len(),
        detection.noise.sigma_hat
    );
    Ok(RunResults {
        config: cfg.clone(),
        dropped,
        resampled,
        filtered,
        scalogram,
        detection,
        element_scalogram,
    })
}

/// Reads `input`, runs the pipeline and writes all artifacts to `out_dir`.
pub fn analyze(input: &Path, cfg: &AnalysisConfig, out_dir: &Path, exec: Execution) -> Result<(RunResults, Manifest)> {
    let series = load_series(input, cfg)?;
    let results = run(&series.raw, series.dropped, cfg, exec)?;
    let manifest = io::write_outputs(&results, out_dir).map_err(|e| e.in_stage("write"))?;
    Ok((results, manifest))
}
