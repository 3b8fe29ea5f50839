//! Empirical propagation: run the whole population under a policy and
//! histogram the (state, action) pairs of every non-representative UAV.

use super::{empirical_meanfield, MeanField, MfDims, MfgError, Propagator};
use crate::env::{AgentAction, AgentState, EnvParams, World};
use crate::rng::{derive_seed, stream, tag, SimRng};

/// A policy every UAV of the population follows. Policies may keep
/// per-cell memory; `begin` is called before each rollout.
pub trait PopulationPolicy {
    fn begin(&mut self, _cells: usize) {}
    /// `record` marks slots inside the averaging window.
    fn act(&mut self, cell: usize, state: &AgentState, record: bool, rng: &mut SimRng) -> AgentAction;
    /// Attach any policy-side statistics to the estimated mean-field.
    fn finish(&mut self, _mf: &mut MeanField) {}
}

#[derive(Debug, Clone)]
pub struct PopulationRollout {
    pub params: EnvParams,
    pub seed: u64,
    /// Slots simulated per propagation.
    pub slots: usize,
    /// Trailing slots averaged into the estimate.
    pub averaged: usize,
    /// Cells taken out of the network.
    pub removed: Vec<usize>,
}

impl PopulationRollout {
    pub fn new(params: EnvParams, seed: u64) -> Self {
        Self { params, seed, slots: 50, averaged: 25, removed: Vec::new() }
    }

    /// Simulate and return the empirical mean-field of the other UAVs.
    pub fn run<P: PopulationPolicy>(&self, policy: &mut P, iteration: usize) -> Result<MeanField, MfgError> {
        let run_seed = derive_seed(self.seed, tag::ROLLOUT, iteration as u64);
        let mut world =
            World::new(self.params.clone(), run_seed).map_err(|e| MfgError::Propagation(e.to_string()))?;
        for &k in &self.removed {
            world.deactivate(k);
        }
        let dims = MfDims::of(&self.params);
        let rep = self.params.geometry.center_cell();
        let mut rng = stream(run_seed, tag::POLICY, 0);
        let mut pairs = Vec::new();
        let e_max = self.params.energy.e_max;
        policy.begin(world.num_cells());
        for t in 0..self.slots {
            let record = t + self.averaged >= self.slots;
            let actions: Vec<AgentAction> = (0..world.num_cells())
                .map(|k| {
                    let s = world.state(k);
                    if world.is_active(k) {
                        policy.act(k, s, record && k != rep, &mut rng)
                    } else {
                        AgentAction::null(s.prev_hover)
                    }
                })
                .collect();
            let outcomes = world_step(&mut world, &actions)?;
            if record {
                for (k, o) in outcomes.iter().enumerate() {
                    if k == rep || o.0.is_none() {
                        continue;
                    }
                    let (state, action) = &o.1;
                    pairs.push((dims.states.state_index(state, e_max), dims.actions.encode(action)));
                }
            }
        }
        if pairs.is_empty() {
            return Err(MfgError::EmptyPopulation);
        }
        let mut mf = empirical_meanfield(dims, &pairs)?;
        policy.finish(&mut mf);
        Ok(mf)
    }
}

type StepRecord = (Option<crate::env::SlotOutcome>, (AgentState, AgentAction));

/// Step the world and pair each outcome with the pre-step state and the
/// action actually taken (after energy masking).
fn world_step(world: &mut World, actions: &[AgentAction]) -> Result<Vec<StepRecord>, MfgError> {
    let before: Vec<AgentState> = (0..world.num_cells()).map(|k| world.state(k).clone()).collect();
    let params = world.params().clone();
    let outcomes = world.step(actions).map_err(|e| MfgError::Propagation(e.to_string()))?;
    Ok(outcomes
        .into_iter()
        .zip(before)
        .zip(actions)
        .map(|((o, s), a)| {
            let taken = params.enforce(&s, *a).0;
            (o, (s, taken))
        })
        .collect())
}

impl<P: PopulationPolicy> Propagator<P> for PopulationRollout {
    fn propagate(&mut self, policy: &mut P, _mf: &MeanField, iteration: usize) -> Result<MeanField, MfgError> {
        self.run(policy, iteration)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::DemandChain;

    struct Silent;
    impl PopulationPolicy for Silent {
        fn act(&mut self, _: usize, s: &AgentState, _: bool, _: &mut SimRng) -> AgentAction {
            AgentAction::null(s.prev_hover)
        }
    }

    #[test]
    fn absorbing_demand_stays_active() {
        let mut params = EnvParams::standard(3, 3);
        params.demand = DemandChain::new(0.0, 1.0).unwrap();
        let mut roll = PopulationRollout::new(params.clone(), 4);
        roll.slots = 10;
        roll.averaged = 5;
        // Stationary init of an absorbing chain from p = 0 gives all idle;
        // flip to p = 1, q = 1 for an all-active population.
        roll.params.demand = DemandChain::new(1.0, 1.0).unwrap();
        let mf = roll.run(&mut Silent, 0).unwrap();
        let dims = MfDims::of(&params);
        let mut active = 0.0;
        for (i, m) in mf.state_marginal().iter().enumerate() {
            let (code, _, _) = dims.states.decode(i);
            if code == 15 {
                active += m;
            }
        }
        assert!((active - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rollout_is_reproducible() {
        let params = EnvParams::standard(3, 3);
        let roll = PopulationRollout::new(params, 8);
        assert_eq!(roll.run(&mut Silent, 1).unwrap(), roll.run(&mut Silent, 1).unwrap());
    }
}
