//! Synthetic stand-in for a daily market-expectation series: slow trend,
//! annual cycle, five injected elements and white noise.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::cwt::TimeSeries;
use crate::detect::{self, Element};
use crate::io::parse_date;
use crate::theory::ElementParams;
use crate::Result;

pub const START: &str = "2018-07-02";
pub const END: &str = "2022-07-01";
pub const NOISE_SIGMA: f64 = 0.01;
pub const DEFAULT_SEED: u64 = 2018;

/// Element order and family used to inject the events.
pub const MU: f64 = 3.0;
pub const GAMMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyEvent {
    pub date: &'static str,
    pub c_abs: f64,
    pub c_phase: f64,
    /// Scale in days.
    pub rho: f64,
}

pub const EVENTS: [ProxyEvent; 5] = [
    ProxyEvent { date: "2018-12-20", c_abs: 0.08, c_phase: 0.4, rho: 9.0 },
    ProxyEvent { date: "2019-07-15", c_abs: 0.06, c_phase: -1.1, rho: 12.0 },
    ProxyEvent { date: "2020-03-16", c_abs: 0.10, c_phase: 2.0, rho: 8.0 },
    ProxyEvent { date: "2021-03-15", c_abs: 0.07, c_phase: -2.6, rho: 14.0 },
    ProxyEvent { date: "2022-03-14", c_abs: 0.065, c_phase: 1.0, rho: 10.0 },
];

fn day(date: &str) -> f64 {
    parse_date(date).expect("valid constant date")
}

/// Number of daily samples from [`START`] to [`END`] inclusive.
pub fn len() -> usize {
    (day(END) - day(START)) as usize + 1
}

/// The injected events as elements, with times in samples from [`START`].
pub fn elements() -> Vec<Element> {
    let t0 = day(START);
    EVENTS
        .iter()
        .map(|e| Element {
            t: day(e.date) - t0,
            c: Complex64::from_polar(e.c_abs, e.c_phase),
            rho: e.rho,
        })
        .collect()
}

/// Daily series starting at [`START`] (time unit: days since the epoch).
pub fn series(seed: u64) -> Result<TimeSeries> {
    let n = len();
    let p = ElementParams::new(3.0, MU, GAMMA)?;
    let events = detect::synthesize(&elements(), &p, n, 1.0, NOISE_SIGMA, seed)?;
    let values = events
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let t = i as f64;
            let trend = 1.9 + 0.35 * t / n as f64 - 0.25 * (t / n as f64).powi(2);
            let seasonal = 0.06 * (2.0 * PI * t / 365.25 + 0.3).sin();
            trend + seasonal + v
        })
        .collect();
    TimeSeries::new(values, 1.0, day(START))
}
