//! Discrete state and action encodings for one UAV.

use super::EnvError;

/// Per-UAV state: GU demand bits, previous hover point and battery.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub demand: Vec<bool>,
    pub prev_hover: usize,
    /// Battery energy (J), kept continuous.
    pub battery: f64,
}

impl AgentState {
    /// Demand bits packed little-endian (GU `u` is bit `u`).
    pub fn demand_code(&self) -> usize {
        pack_bits(&self.demand)
    }
}

pub fn pack_bits(bits: &[bool]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (u, &b)| acc | (usize::from(b) << u))
}

pub fn unpack_bits(code: usize, n: usize) -> Vec<bool> {
    (0..n).map(|u| code >> u & 1 == 1).collect()
}

/// Association, hover point and transmit power index. No association always
/// pairs with power index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentAction {
    pub assoc: Option<usize>,
    pub hover: usize,
    pub power_idx: usize,
}

impl AgentAction {
    /// Stay at `hover` without transmitting.
    pub fn null(hover: usize) -> Self {
        Self { assoc: None, hover, power_idx: 0 }
    }

    /// Power index 0 drops the association; positive power needs one.
    pub fn new(assoc: Option<usize>, hover: usize, power_idx: usize) -> Result<Self, EnvError> {
        match (assoc, power_idx) {
            (_, 0) => Ok(Self::null(hover)),
            (Some(u), p) => Ok(Self { assoc: Some(u), hover, power_idx: p }),
            (None, _) => Err(EnvError::Action("transmit power without association".into())),
        }
    }

    pub fn stays(&self, prev_hover: usize) -> bool {
        self.hover == prev_hover
    }
}

/// Actions indexed as `(hover * U + assoc) * L_p + power_idx`, giving
/// `U^2 * L_p` entries. Power index 0 decodes to no association, so the
/// null action appears once per (hover, assoc) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub gus: usize,
    pub powers: usize,
}

impl ActionSpace {
    pub fn new(gus: usize, powers: usize) -> Self {
        Self { gus, powers }
    }

    pub fn size(&self) -> usize {
        self.gus * self.gus * self.powers
    }

    pub fn decode(&self, index: usize) -> AgentAction {
        debug_assert!(index < self.size());
        let power_idx = index % self.powers;
        let rest = index / self.powers;
        let assoc = rest % self.gus;
        let hover = rest / self.gus;
        if power_idx == 0 {
            AgentAction::null(hover)
        } else {
            AgentAction { assoc: Some(assoc), hover, power_idx }
        }
    }

    /// Canonical index; the null action maps to association digit 0.
    pub fn encode(&self, action: &AgentAction) -> usize {
        let assoc = action.assoc.unwrap_or(0);
        (action.hover * self.gus + assoc) * self.powers + action.power_idx
    }

    pub fn validate(&self, action: &AgentAction) -> Result<(), EnvError> {
        if action.hover >= self.gus {
            return Err(EnvError::Action(format!("hover point {} out of range", action.hover)));
        }
        if action.power_idx >= self.powers {
            return Err(EnvError::Action(format!("power index {} out of range", action.power_idx)));
        }
        match action.assoc {
            Some(u) if u >= self.gus => Err(EnvError::Action(format!("GU {u} out of range"))),
            None if action.power_idx > 0 => {
                Err(EnvError::Action("transmit power without association".into()))
            }
            _ => Ok(()),
        }
    }
}

/// States indexed as `(demand_code * U + prev_hover) * L_e + level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    pub gus: usize,
    pub levels: usize,
}

impl StateSpace {
    pub fn new(gus: usize, levels: usize) -> Self {
        Self { gus, levels }
    }

    pub fn size(&self) -> usize {
        (1usize << self.gus) * self.gus * self.levels
    }

    pub fn index(&self, demand_code: usize, prev_hover: usize, level: usize) -> usize {
        (demand_code * self.gus + prev_hover) * self.levels + level
    }

    /// Inverse of [`StateSpace::index`]: `(demand_code, prev_hover, level)`.
    pub fn decode(&self, index: usize) -> (usize, usize, usize) {
        let level = index % self.levels;
        let rest = index / self.levels;
        (rest / self.gus, rest % self.gus, level)
    }

    /// Uniform quantisation of `[0, e_max]` into `levels` bins.
    pub fn quantize(&self, battery: f64, e_max: f64) -> usize {
        let x = (battery / e_max * self.levels as f64).floor();
        (x.max(0.0) as usize).min(self.levels - 1)
    }

    /// Bin midpoint, used when a continuous battery must be reconstructed.
    pub fn level_midpoint(&self, level: usize, e_max: f64) -> f64 {
        (level as f64 + 0.5) / self.levels as f64 * e_max
    }

    pub fn state_index(&self, state: &AgentState, e_max: f64) -> usize {
        self.index(state.demand_code(), state.prev_hover, self.quantize(state.battery, e_max))
    }
}

/// Layout of the interference-relevant marginal over
/// `(hover, power, mode-2 flag, serving-an-active-GU flag)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IfLayout {
    pub gus: usize,
    pub powers: usize,
}

/// One entry of the interference marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IfKey {
    pub hover: usize,
    pub power_idx: usize,
    pub hovering: bool,
    pub serving: bool,
}

impl IfLayout {
    pub fn new(gus: usize, powers: usize) -> Self {
        Self { gus, powers }
    }

    pub fn size(&self) -> usize {
        self.gus * self.powers * 4
    }

    pub fn index(&self, key: IfKey) -> usize {
        ((key.hover * self.powers + key.power_idx) * 2 + usize::from(key.hovering)) * 2
            + usize::from(key.serving)
    }

    pub fn decode(&self, index: usize) -> IfKey {
        let serving = index % 2 == 1;
        let hovering = (index / 2) % 2 == 1;
        let rest = index / 4;
        IfKey {
            hover: rest / self.powers,
            power_idx: rest % self.powers,
            hovering,
            serving,
        }
    }

    /// Map a (state, action) pair of the encoded spaces to its marginal entry.
    pub fn key(&self, states: &StateSpace, actions: &ActionSpace, s: usize, a: usize) -> IfKey {
        let (code, prev_hover, _) = states.decode(s);
        let action = actions.decode(a);
        key_of(&unpack_bits(code, states.gus), prev_hover, &action)
    }
}

/// Interference-relevant summary of one UAV's slot decision.
pub fn key_of(demand: &[bool], prev_hover: usize, action: &AgentAction) -> IfKey {
    let serving = action.power_idx > 0 && action.assoc.is_some_and(|u| demand[u]);
    IfKey {
        hover: action.hover,
        power_idx: action.power_idx,
        hovering: action.hover == prev_hover,
        serving,
    }
}
