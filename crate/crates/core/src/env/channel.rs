//! Air-to-ground channel: sigmoid LoS probability in the elevation angle,
//! LoS/NLoS path loss, and Nakagami-m small-scale fading.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::EnvError;

/// How small-scale fading is realised when sampling a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fading {
    /// LoS drawn from the sigmoid, power gain `g^2 ~ Gamma(m, Omega/m)`.
    Random,
    /// Deterministic expected gain: LoS-probability mixture with `g^2 = Omega`.
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Sigmoid parameters; elevation is in degrees.
    pub c1: f64,
    pub c2: f64,
    /// Reference path loss (linear).
    pub a_los: f64,
    pub a_nlos: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    /// Nakagami shape of the LoS branch; NLoS is Rayleigh (m = 1).
    pub nakagami_m: f64,
    pub spread: f64,
    pub fading: Fading,
}

impl ChannelParams {
    /// Urban parameter set with altitude-dependent exponents
    /// `alpha_L = 2.225 - 0.05 log10(d)`, `alpha_NL = 4.32 - 0.76 log10(d)`.
    pub fn urban(altitude: f64) -> Self {
        let lg = altitude.log10();
        Self {
            c1: 10.0,
            c2: 0.6,
            a_los: 10f64.powf(-3.692),
            a_nlos: 10f64.powf(-3.842),
            alpha_los: 2.225 - 0.05 * lg,
            alpha_nlos: 4.32 - 0.76 * lg,
            nakagami_m: 2.0,
            spread: 1.0,
            fading: Fading::Random,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.a_los > 0.0 && self.a_nlos > 0.0) {
            return Err(EnvError::Invalid("reference path loss must be positive".into()));
        }
        if !(self.nakagami_m >= 1.0) {
            return Err(EnvError::Invalid("Nakagami shape must be >= 1".into()));
        }
        if !(self.spread > 0.0) {
            return Err(EnvError::Invalid("spread factor must be positive".into()));
        }
        Ok(())
    }
}

/// Elevation angle in degrees of a UAV at `uav` seen from a GU at `gu`.
pub fn elevation_deg(uav: [f64; 3], gu: [f64; 2]) -> f64 {
    let horizontal = (uav[0] - gu[0]).hypot(uav[1] - gu[1]);
    uav[2].atan2(horizontal).to_degrees()
}

pub fn los_probability(theta_deg: f64, params: &ChannelParams) -> f64 {
    1.0 / (1.0 + params.c1 * (-params.c2 * (theta_deg - params.c1)).exp())
}

pub fn path_loss(distance: f64, los: bool, params: &ChannelParams) -> f64 {
    if los {
        params.a_los * distance.powf(-params.alpha_los)
    } else {
        params.a_nlos * distance.powf(-params.alpha_nlos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    /// Channel power gain `|h|^2 = l * g^2`.
    pub gain: f64,
    pub los: bool,
}

/// Small-scale power `g^2` for Nakagami-`m` amplitude with spread `spread`.
pub fn fading_power<R: Rng + ?Sized>(m: f64, spread: f64, rng: &mut R) -> f64 {
    Gamma::new(m, spread / m)
        .expect("validated Nakagami parameters")
        .sample(rng)
}

/// Draw one link realisation at the given 3D distance and elevation.
pub fn sample_link<R: Rng + ?Sized>(
    distance: f64,
    theta_deg: f64,
    params: &ChannelParams,
    rng: &mut R,
) -> LinkSample {
    let pr_los = los_probability(theta_deg, params);
    match params.fading {
        Fading::Random => {
            let los = rng.random::<f64>() < pr_los;
            let m = if los { params.nakagami_m } else { 1.0 };
            let g2 = fading_power(m, params.spread, rng);
            LinkSample {
                gain: path_loss(distance, los, params) * g2,
                los,
            }
        }
        Fading::Mean => LinkSample {
            gain: params.spread
                * (pr_los * path_loss(distance, true, params)
                    + (1.0 - pr_los) * path_loss(distance, false, params)),
            los: pr_los >= 0.5,
        },
    }
}
