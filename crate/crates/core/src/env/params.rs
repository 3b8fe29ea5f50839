//! The bundle of every physical and game constant of one environment, and
//! the per-UAV slot accounting built on it.

use super::energy::{harvest_energy, step_battery, total_energy};
use super::slot::{achievable_rate, reward};
use super::space::{key_of, IfKey};
use super::{
    ActionSpace, AgentAction, AgentState, ChannelParams, DemandChain, EnergyParams, EnvError,
    Geometry, IfLayout, LinkParams, Mode, RewardParams, SlotOutcome, SlotTiming, StateSpace,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvParams {
    pub geometry: Geometry,
    pub channel: ChannelParams,
    pub energy: EnergyParams,
    pub timing: SlotTiming,
    pub link: LinkParams,
    pub reward: RewardParams,
    pub demand: DemandChain,
    /// Number of battery levels `L_e` used in state encodings.
    pub energy_levels: usize,
}

impl EnvParams {
    /// Default constants on a `rows x cols` grid of 1 km cells with four GUs each.
    pub fn standard(rows: usize, cols: usize) -> Self {
        let altitude = 100.0;
        Self {
            geometry: Geometry::square(rows, cols, 1000.0, altitude, 4).expect("valid default geometry"),
            channel: ChannelParams::urban(altitude),
            energy: EnergyParams::default(),
            timing: SlotTiming { tau1: 25.0, tau2: 35.0 },
            link: LinkParams {
                eta: 1.0,
                bandwidth: 1e6,
                n0: super::dbm_to_watts(-110.0),
            },
            reward: RewardParams { sigma: 240.0, xi: 0.001 },
            demand: DemandChain::new(0.3, 0.7).expect("valid default chain"),
            energy_levels: 8,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        self.geometry.validate()?;
        self.channel.validate()?;
        self.energy.validate()?;
        let t = &self.timing;
        if !(t.tau1 > 0.0 && t.tau2 > 0.0) {
            return Err(EnvError::Invalid("tau1 and tau2 must be positive".into()));
        }
        let l = &self.link;
        if !(l.eta > 0.0 && l.bandwidth > 0.0 && l.n0 > 0.0) {
            return Err(EnvError::Invalid("eta, bandwidth and noise must be positive".into()));
        }
        if !(self.reward.sigma >= 0.0 && self.reward.xi >= 0.0) {
            return Err(EnvError::Invalid("penalty factors must be non-negative".into()));
        }
        if self.energy_levels == 0 {
            return Err(EnvError::Invalid("need at least one energy level".into()));
        }
        Ok(())
    }

    pub fn num_gus(&self) -> usize {
        self.geometry.num_gus()
    }

    pub fn action_space(&self) -> ActionSpace {
        ActionSpace::new(self.num_gus(), self.energy.power_levels.len())
    }

    pub fn state_space(&self) -> StateSpace {
        StateSpace::new(self.num_gus(), self.energy_levels)
    }

    pub fn if_layout(&self) -> IfLayout {
        IfLayout::new(self.num_gus(), self.energy.power_levels.len())
    }

    pub fn power_w(&self, power_idx: usize) -> f64 {
        self.energy.power_levels[power_idx]
    }

    pub fn mode(prev_hover: usize, hover: usize) -> Mode {
        if prev_hover == hover {
            Mode::Hover
        } else {
            Mode::Fly
        }
    }

    /// Flight speed between hover points: distance over `tau1`, capped.
    pub fn speed(&self, prev_hover: usize, hover: usize) -> f64 {
        (self.geometry.hover_distance(prev_hover, hover) / self.timing.tau1).min(self.energy.max_speed)
    }

    pub fn slot_energy(&self, prev_hover: usize, action: &AgentAction) -> f64 {
        total_energy(
            Self::mode(prev_hover, action.hover),
            self.power_w(action.power_idx),
            self.speed(prev_hover, action.hover),
            &self.energy,
            &self.timing,
        )
    }

    pub fn feasible(&self, state: &AgentState, action: &AgentAction) -> bool {
        self.slot_energy(state.prev_hover, action) <= state.battery
    }

    /// Fill `mask` over the action space; returns whether any action is feasible.
    pub fn feasible_mask(&self, state: &AgentState, mask: &mut [bool]) -> bool {
        let space = self.action_space();
        let mut any = false;
        for (i, m) in mask.iter_mut().enumerate() {
            *m = self.feasible(state, &space.decode(i));
            any |= *m;
        }
        any
    }

    /// Replace an energy-infeasible action with the null action.
    pub fn enforce(&self, state: &AgentState, action: AgentAction) -> (AgentAction, bool) {
        if self.feasible(state, &action) {
            (action, false)
        } else {
            (AgentAction::null(state.prev_hover), true)
        }
    }

    pub fn interference_key(&self, state: &AgentState, action: &AgentAction) -> IfKey {
        key_of(&state.demand, state.prev_hover, action)
    }

    /// Slot accounting for one UAV once both phase SINRs and the cloud draw
    /// are known.
    pub fn settle(
        &self,
        state: &AgentState,
        action: &AgentAction,
        sinr1: f64,
        sinr2: f64,
        cloud_m: f64,
        substituted: bool,
    ) -> SlotOutcome {
        let mode = Self::mode(state.prev_hover, action.hover);
        let power_w = self.power_w(action.power_idx);
        let e_total = self.slot_energy(state.prev_hover, action);
        let rate_bits = achievable_rate(
            mode,
            sinr1,
            sinr2,
            self.link.eta,
            self.link.bandwidth,
            &self.timing,
        );
        let ee = rate_bits / e_total;
        let terms = reward(
            ee,
            power_w,
            mode,
            state.battery,
            e_total,
            &self.reward,
            self.energy.e_min_alarm,
            &self.timing,
        );
        let harvest = harvest_energy(cloud_m, &self.energy.harvest, self.timing.tau());
        SlotOutcome {
            mode,
            rate_bits,
            e_total,
            harvest,
            ee,
            reward: terms.total,
            interference_penalty: terms.interference_penalty,
            energy_penalty: terms.energy_penalty,
            sinr1,
            sinr2,
            power_w,
            battery_after: step_battery(state.battery, e_total, harvest, self.energy.e_max),
            substituted,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let p = EnvParams::standard(7, 7);
        p.validate().unwrap();
        assert_eq!(p.action_space().size(), 80);
        assert_eq!(p.state_space().size(), 512);
        assert_eq!(p.if_layout().size(), 80);
        assert!((p.link.n0 - 1e-14).abs() < 1e-26);
    }

    #[test]
    fn settle_hover_success() {
        let p = EnvParams::standard(1, 1);
        let state = AgentState { demand: vec![true; 4], prev_hover: 0, battery: 5e5 };
        let action = AgentAction { assoc: Some(0), hover: 0, power_idx: 1 };
        let out = p.settle(&state, &action, 10.0, 10.0, 0.0, false);
        assert_eq!(out.mode, Mode::Hover);
        assert_eq!(out.rate_bits, 6.0e7);
        assert!((out.e_total - 10_113.0).abs() < 1.0);
        assert!((out.ee - out.rate_bits / out.e_total).abs() < 1e-12);
        assert!((out.reward - (out.ee - 720.0)).abs() < 1e-9);
        assert_eq!(out.battery_after, 5e5);
    }

    #[test]
    fn flight_is_masked_when_battery_is_short() {
        let p = EnvParams::standard(1, 1);
        let stay = p.slot_energy(0, &AgentAction::null(0));
        let state = AgentState { demand: vec![false; 4], prev_hover: 0, battery: stay + 1.0 };
        assert!(p.feasible(&state, &AgentAction::null(0)));
        assert!(!p.feasible(&state, &AgentAction::null(3)));
        let (a, sub) = p.enforce(&state, AgentAction::null(3));
        assert!(sub);
        assert_eq!(a, AgentAction::null(0));
    }
}
