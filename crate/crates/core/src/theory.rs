//! Closed forms for the transform of an order-`μ` Morse element by an
//! order-`β` Morse wavelet of the same family `γ`.
//!
//! With `s̃ = s/ρ` and `τ̃ = (τ - t₀)/ρ`, the transform of
//! `ψ_{μ,γ}((t - t₀)/ρ)` is
//!
//! ```text
//! ζ(τ̃, s̃) = (a_β a_μ / a_{β+μ}) · s̃^β / (1 + s̃^γ)^((β+μ+1)/γ)
//!            · ψ_{β+μ,γ}(τ̃ / (1 + s̃^γ)^(1/γ))
//! ```
//!
//! a Morse wavelet of order `β + μ`. Its maximum over `s̃` sits at
//! `τ̃ = 0, s̃ = (β/(μ+1))^(1/γ)` and does not depend on `ρ`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::morse::{self, MorseParams};
use crate::special::ln_gamma;
use crate::{Error, Result};

/// Analysis order `β`, element order `μ` and their shared family `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementParams {
    beta: f64,
    mu: f64,
    gamma: f64,
}

impl ElementParams {
    pub fn new(beta: f64, mu: f64, gamma: f64) -> Result<Self> {
        // validate via the wavelet constructors
        MorseParams::new(beta, gamma)?;
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::domain("mu", mu, "mu > 0"));
        }
        Ok(ElementParams { beta, mu, gamma })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The analysis wavelet `(β, γ)`.
    pub fn analysis(&self) -> MorseParams {
        MorseParams::new(self.beta, self.gamma).expect("validated")
    }

    /// The element wavelet `(μ, γ)`.
    pub fn element(&self) -> MorseParams {
        MorseParams::new(self.mu, self.gamma).expect("validated")
    }

    /// The order-`β+μ` wavelet that shapes `ζ`.
    pub fn combined(&self) -> MorseParams {
        MorseParams::new(self.beta + self.mu, self.gamma).expect("validated")
    }

    fn order_sum(&self) -> f64 {
        self.beta + self.mu + 1.0
    }

    /// `ln(a_β a_μ / (2πγ) · Γ((β+μ+1)/γ))`, the `s̃`-independent part of `ζ(0, s̃)`.
    fn log_center_amplitude(&self) -> f64 {
        self.analysis().log_norm() + self.element().log_norm() - (2.0 * PI * self.gamma).ln()
            + ln_gamma(self.order_sum() / self.gamma)
    }

    /// `ln(s̃^β / (1 + s̃^γ)^((β+μ+1)/γ))`.
    fn log_scale_weight(&self, s_tilde: f64) -> f64 {
        self.beta * s_tilde.ln() - self.order_sum() / self.gamma * s_tilde.powf(self.gamma).ln_1p()
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "must be > 0"))
    }
}

/// `ζ(τ̃, s̃)` for normalized time offset `tau` and scale ratio `s`.
pub fn zeta(p: &ElementParams, tau: f64, s: f64) -> Result<Complex64> {
    check_positive("s", s)?;
    let table = morse::morse_table(&p.combined());
    Ok(zeta_with(p, &table, tau, s))
}

/// [`zeta`] against an already-fetched tabulation of `ψ_{β+μ,γ}`.
pub(crate) fn zeta_with(p: &ElementParams, table: &morse::MorseTable, tau: f64, s: f64) -> Complex64 {
    let spread = s.powf(p.gamma).ln_1p() / p.gamma; // ln (1 + s^γ)^(1/γ)
    let log_amp = p.analysis().log_norm() + p.element().log_norm() - p.combined().log_norm()
        + p.log_scale_weight(s);
    table.eval(tau * (-spread).exp()) * log_amp.exp()
}

/// `ζ(0, s̃)`, real and positive.
pub fn zeta_at_zero(p: &ElementParams, s_tilde: f64) -> Result<f64> {
    check_positive("s_tilde", s_tilde)?;
    Ok((p.log_center_amplitude() + p.log_scale_weight(s_tilde)).exp())
}

/// `(β/(μ+1))^(1/γ)`, the scale ratio at which the element's transform peaks.
pub fn s_tilde_max(p: &ElementParams) -> f64 {
    (p.beta / (p.mu + 1.0)).powf(1.0 / p.gamma)
}

/// Scale weighting `(β/(μ+1))^(β/γ) / (β/(μ+1) + 1)^((β+μ+1)/γ)`.
pub fn eta(p: &ElementParams) -> f64 {
    let r = p.beta / (p.mu + 1.0);
    ((p.beta / p.gamma) * r.ln() - (p.order_sum() / p.gamma) * r.ln_1p()).exp()
}

/// Peak transform value of a unit element, independent of its scale.
pub fn zeta_max(p: &ElementParams) -> f64 {
    (p.log_center_amplitude() + eta(p).ln()).exp()
}

/// `(ω_{μ,γ}/ω_{β,γ}) · s̃_max`, the factor mapping an observed scale
/// frequency to the element frequency.
pub fn frequency_factor(p: &ElementParams) -> f64 {
    p.element().peak_frequency() / p.analysis().peak_frequency() * s_tilde_max(p)
}

/// Element frequency (radians/sample) for a maximum observed at scale
/// frequency `omega_s_hat`.
pub fn element_frequency(omega_s_hat: f64, p: &ElementParams) -> Result<f64> {
    check_positive("omega_s_hat", omega_s_hat)?;
    Ok(omega_s_hat * frequency_factor(p))
}

/// Asymptotic forms of `ζ` for raw offset `tau`, scale `s` and element scale
/// `rho`, comparable with `zeta(p, tau/rho, s/rho)`:
///
/// * `s ≫ ρ`: `(a_β a_μ/a_{β+μ}) (ρ/s)^(μ+1) ψ_{β+μ}(τ/s)`
/// * `s ≪ ρ`: `(a_β a_μ/a_{β+μ}) (s/ρ)^β ψ_{β+μ}(τ/ρ)`
pub fn zeta_asymptotic(p: &ElementParams, tau: f64, s: f64, rho: f64) -> Result<Complex64> {
    check_positive("s", s)?;
    check_positive("rho", rho)?;
    let ratio = s / rho;
    let log_prefactor = p.analysis().log_norm() + p.element().log_norm() - p.combined().log_norm();
    let table = morse::morse_table(&p.combined());
    if ratio > 10.0 {
        let amp = (log_prefactor - (p.mu + 1.0) * ratio.ln()).exp();
        Ok(table.eval(tau / s) * amp)
    } else if ratio < 0.1 {
        let amp = (log_prefactor + p.beta * ratio.ln()).exp();
        Ok(table.eval(tau / rho) * amp)
    } else {
        Err(Error::Regime(ratio))
    }
}
