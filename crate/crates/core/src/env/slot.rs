//! Per-slot link quality, rate, energy accounting and reward for one UAV.

/// Fly-hover-communicate deployment mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Mode 1: fly to a new hover point during `tau1`, transmit during `tau2`.
    Fly,
    /// Mode 2: stay put and transmit for the whole slot.
    Hover,
}

impl Mode {
    pub fn number(self) -> u8 {
        match self {
            Mode::Fly => 1,
            Mode::Hover => 2,
        }
    }

    /// Deployment indicator: 1 in mode 2.
    pub fn phi(self) -> f64 {
        match self {
            Mode::Fly => 0.0,
            Mode::Hover => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotTiming {
    pub tau1: f64,
    pub tau2: f64,
}

impl SlotTiming {
    pub fn tau(&self) -> f64 {
        self.tau1 + self.tau2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// SINR decoding threshold (linear).
    pub eta: f64,
    /// Bandwidth (Hz).
    pub bandwidth: f64,
    /// Noise power (W).
    pub n0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    pub gain: f64,
    pub power: f64,
    pub transmitting: bool,
}

/// SINR at the served GU. The caller applies the phase gating: `own_active`
/// folds in association, demand and (for `tau1`) the hover indicator, and
/// `transmitting` marks the interferers that radiate in this phase.
pub fn compute_sinr(
    signal_gain: f64,
    own_power: f64,
    own_active: bool,
    interferers: &[Interferer],
    n0: f64,
) -> f64 {
    if !own_active {
        return 0.0;
    }
    let interference: f64 = interferers
        .iter()
        .filter(|i| i.transmitting)
        .map(|i| i.gain * i.power)
        .sum();
    own_power * signal_gain / (interference + n0)
}

/// Fixed-rate delivery: a phase contributes `tau * B * log2(1 + eta)` bits
/// when its SINR clears `eta`.
pub fn achievable_rate(
    mode: Mode,
    sinr1: f64,
    sinr2: f64,
    eta: f64,
    bandwidth: f64,
    timing: &SlotTiming,
) -> f64 {
    let per_second = bandwidth * (1.0 + eta).log2();
    let phase2 = if sinr2 >= eta { timing.tau2 } else { 0.0 };
    let phase1 = match mode {
        Mode::Hover if sinr1 >= eta => timing.tau1,
        _ => 0.0,
    };
    (phase1 + phase2) * per_second
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    /// Interference penalty factor sigma (per W s).
    pub sigma: f64,
    /// Energy penalty factor xi (per J).
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerms {
    pub total: f64,
    pub interference_penalty: f64,
    pub energy_penalty: f64,
}

/// `EE - sigma p (phi tau1 + tau2) - xi max(e_total + e_min - e, 0)`.
#[allow(clippy::too_many_arguments)]
pub fn reward(
    ee: f64,
    power_w: f64,
    mode: Mode,
    battery: f64,
    e_total: f64,
    params: &RewardParams,
    e_min: f64,
    timing: &SlotTiming,
) -> RewardTerms {
    let interference_penalty = params.sigma * power_w * (mode.phi() * timing.tau1 + timing.tau2);
    let energy_penalty = params.xi * (e_total + e_min - battery).max(0.0);
    RewardTerms {
        total: ee - interference_penalty - energy_penalty,
        interference_penalty,
        energy_penalty,
    }
}

/// Everything that happened to one UAV in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub mode: Mode,
    pub rate_bits: f64,
    pub e_total: f64,
    pub harvest: f64,
    /// Bits per joule.
    pub ee: f64,
    pub reward: f64,
    pub interference_penalty: f64,
    pub energy_penalty: f64,
    pub sinr1: f64,
    pub sinr2: f64,
    pub power_w: f64,
    /// Battery at the start of the next slot.
    pub battery_after: f64,
    /// The requested action was energy-infeasible and replaced by the null action.
    pub substituted: bool,
}

impl SlotOutcome {
    pub fn flew(&self) -> bool {
        self.mode == Mode::Fly
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: SlotTiming = SlotTiming { tau1: 25.0, tau2: 35.0 };

    #[test]
    fn sinr_examples() {
        let g = 10f64.powf(-7.942);
        assert_eq!(compute_sinr(g, 0.05, false, &[], 1e-14), 0.0);
        // 0.05 * 10^-7.942 / 10^-14 = 5 * 10^4.058
        let snr = compute_sinr(g, 0.05, true, &[], 1e-14);
        assert!((snr / (5.0 * 10f64.powf(4.058)) - 1.0).abs() < 1e-9, "snr = {snr}");
        assert!((snr - 5.71e4).abs() < 100.0);
        let twin = Interferer { gain: g, power: 0.05, transmitting: true };
        assert!((compute_sinr(g, 0.05, true, &[twin], 1e-30) - 1.0).abs() < 1e-12);
        let silent = Interferer { transmitting: false, ..twin };
        assert_eq!(compute_sinr(g, 0.05, true, &[silent], 1e-14), snr);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(achievable_rate(Mode::Fly, 0.0, 2.0, 1.0, 1e6, &T), 3.5e7);
        assert_eq!(achievable_rate(Mode::Hover, 1.0, 1.0, 1.0, 1e6, &T), 6.0e7);
        assert_eq!(achievable_rate(Mode::Hover, 0.5, 0.9, 1.0, 1e6, &T), 0.0);
        // Flying never earns the tau1 share.
        assert_eq!(achievable_rate(Mode::Fly, 5.0, 0.9, 1.0, 1e6, &T), 0.0);
    }

    #[test]
    fn reward_examples() {
        let params = RewardParams { sigma: 240.0, xi: 0.001 };
        let r = reward(5933.0, 0.0, Mode::Hover, 5e5, 10_113.0, &params, 5e4, &T);
        assert_eq!(r.total, 5933.0);
        let r = reward(5933.0, 0.05, Mode::Hover, 5e5, 10_113.0, &params, 5e4, &T);
        assert!((r.total - 5213.0).abs() < 1e-9);
        let xi1 = RewardParams { sigma: 0.0, xi: 1.0 };
        let r = reward(0.0, 0.0, Mode::Hover, 1000.0, 1050.0, &xi1, 50.0, &T);
        assert_eq!(r.energy_penalty, 100.0);
    }
}
