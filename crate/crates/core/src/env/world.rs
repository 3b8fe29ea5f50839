//! Population of UAV cells advanced in lock-step.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::channel::{elevation_deg, sample_link};
use super::geometry::distance3;
use super::{AgentAction, AgentState, EnvError, EnvParams, Interferer, SlotOutcome};
use super::slot::compute_sinr;
use crate::rng::{stream, tag, SimRng};

/// One cell's UAV and GUs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub state: AgentState,
    pub active: bool,
}

/// Every cell's state plus its private random streams. Demand and cloud
/// draws come from one stream and link draws from another, so the demand
/// path of a cell does not depend on what anybody transmits.
#[derive(Debug, Clone)]
pub struct World {
    params: EnvParams,
    cells: Vec<CellState>,
    demand_rngs: Vec<SimRng>,
    link_rngs: Vec<SimRng>,
    slot: u64,
}

impl World {
    /// Stationary demand, full batteries and uniformly random hover points.
    pub fn new(params: EnvParams, seed: u64) -> Result<Self, EnvError> {
        params.validate()?;
        let n = params.geometry.num_cells();
        let gus = params.num_gus();
        let mut cells = Vec::with_capacity(n);
        for k in 0..n {
            let mut init = stream(seed, tag::INIT, k as u64);
            let demand = (0..gus).map(|_| params.demand.sample_stationary(&mut init)).collect();
            let prev_hover = init.random_range(0..gus);
            cells.push(CellState {
                state: AgentState { demand, prev_hover, battery: params.energy.e_max },
                active: true,
            });
        }
        Ok(Self {
            demand_rngs: (0..n).map(|k| stream(seed, tag::DEMAND, k as u64)).collect(),
            link_rngs: (0..n).map(|k| stream(seed, tag::FADING, k as u64)).collect(),
            params,
            cells,
            slot: 0,
        })
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn state(&self, cell: usize) -> &AgentState {
        &self.cells[cell].state
    }

    pub fn is_active(&self, cell: usize) -> bool {
        self.cells[cell].active
    }

    pub fn active_count(&self) -> usize {
        self.cells.iter().filter(|c| c.active).count()
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Take a UAV out of the network: it stops transmitting and is skipped
    /// by every later step.
    pub fn deactivate(&mut self, cell: usize) {
        self.cells[cell].active = false;
    }

    /// Advance every active cell by one slot. Inactive cells get `None`.
    /// Energy-infeasible actions are replaced by the null action and flagged.
    pub fn step(&mut self, actions: &[AgentAction]) -> Result<Vec<Option<SlotOutcome>>, EnvError> {
        let n = self.cells.len();
        if actions.len() != n {
            return Err(EnvError::Action(format!("expected {n} actions, got {}", actions.len())));
        }
        let space = self.params.action_space();
        let mut chosen = Vec::with_capacity(n);
        for (cell, action) in self.cells.iter().zip(actions) {
            space.validate(action)?;
            chosen.push(if cell.active {
                self.params.enforce(&cell.state, *action)
            } else {
                (AgentAction::null(cell.state.prev_hover), false)
            });
        }
        let transmitting: Vec<bool> = (0..n)
            .map(|k| {
                let a = &chosen[k].0;
                self.cells[k].active && self.params.interference_key(&self.cells[k].state, a).serving
            })
            .collect();

        let geometry = &self.params.geometry;
        let mut outcomes = Vec::with_capacity(n);
        let mut tau1_set = Vec::with_capacity(n);
        let mut tau2_set = Vec::with_capacity(n);
        for k in 0..n {
            if !self.cells[k].active {
                outcomes.push(None);
                continue;
            }
            let (action, substituted) = chosen[k];
            let state = &self.cells[k].state;
            let (mut sinr1, mut sinr2) = (0.0, 0.0);
            if transmitting[k] {
                let gu = geometry.gu_position(k, action.assoc.expect("transmitting implies association"));
                let rng = &mut self.link_rngs[k];
                let own = link_gain(&self.params, geometry.hover_position(k, action.hover), gu, rng);
                tau1_set.clear();
                tau2_set.clear();
                for j in (0..n).filter(|&j| j != k && transmitting[j]) {
                    let other = &chosen[j].0;
                    let gain = link_gain(&self.params, geometry.hover_position(j, other.hover), gu, rng);
                    let hovering = other.hover == self.cells[j].state.prev_hover;
                    let power = self.params.power_w(other.power_idx);
                    tau1_set.push(Interferer { gain, power, transmitting: hovering });
                    tau2_set.push(Interferer { gain, power, transmitting: true });
                }
                let p = self.params.power_w(action.power_idx);
                let n0 = self.params.link.n0;
                let hovering = action.hover == state.prev_hover;
                sinr1 = compute_sinr(own, p, hovering, &tau1_set, n0);
                sinr2 = compute_sinr(own, p, true, &tau2_set, n0);
            }
            let cloud = *self
                .params
                .energy
                .harvest
                .cloud_levels
                .choose(&mut self.demand_rngs[k])
                .expect("validated non-empty cloud levels");
            outcomes.push(Some(self.params.settle(state, &action, sinr1, sinr2, cloud, substituted)));
        }

        for k in 0..n {
            let Some(outcome) = outcomes[k] else { continue };
            let rng = &mut self.demand_rngs[k];
            let chain = self.params.demand;
            let cell = &mut self.cells[k];
            for bit in cell.state.demand.iter_mut() {
                *bit = chain.step(*bit, rng);
            }
            cell.state.prev_hover = chosen[k].0.hover;
            cell.state.battery = outcome.battery_after;
        }
        self.slot += 1;
        Ok(outcomes)
    }
}

fn link_gain<R: Rng + ?Sized>(params: &EnvParams, uav: [f64; 3], gu: [f64; 2], rng: &mut R) -> f64 {
    sample_link(distance3(uav, gu), elevation_deg(uav, gu), &params.channel, rng).gain
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Fading;

    fn serve_first_active(world: &World, power_idx: usize) -> Vec<AgentAction> {
        (0..world.num_cells())
            .map(|k| {
                let s = world.state(k);
                match s.demand.iter().position(|&b| b) {
                    Some(u) if power_idx > 0 => AgentAction { assoc: Some(u), hover: u, power_idx },
                    _ => AgentAction::null(s.prev_hover),
                }
            })
            .collect()
    }

    #[test]
    fn single_cell_sees_only_noise() {
        let mut params = EnvParams::standard(1, 1);
        params.demand = crate::env::DemandChain::new(1.0, 1.0).unwrap();
        params.channel.fading = Fading::Mean;
        let mut world = World::new(params.clone(), 3).unwrap();
        let a = AgentAction { assoc: Some(0), hover: 0, power_idx: 1 };
        let out = world.step(&[a]).unwrap()[0].unwrap();
        let gu = params.geometry.gu_position(0, 0);
        let uav = params.geometry.hover_position(0, 0);
        let own = sample_link(distance3(uav, gu), 90.0, &params.channel, &mut stream(0, 0, 0)).gain;
        assert!((out.sinr2 - 0.05 * own / params.link.n0).abs() / out.sinr2 < 1e-12);
    }

    #[test]
    fn symmetric_pair_has_equal_sinr() {
        let mut params = EnvParams::standard(1, 2);
        params.demand = crate::env::DemandChain::new(1.0, 1.0).unwrap();
        params.channel.fading = Fading::Mean;
        params.geometry.gu_offsets = vec![[0.0, 0.0]];
        let mut world = World::new(params, 9).unwrap();
        let a = AgentAction { assoc: Some(0), hover: 0, power_idx: 2 };
        let out = world.step(&[a, a]).unwrap();
        let (x, y) = (out[0].unwrap(), out[1].unwrap());
        assert!(x.sinr2 > 0.0);
        assert!((x.sinr2 - y.sinr2).abs() / x.sinr2 < 1e-12);
    }

    #[test]
    fn crowding_lowers_mean_sinr() {
        let params = EnvParams::standard(7, 7);
        let mut quiet = World::new(params.clone(), 11).unwrap();
        let mut loud = World::new(params, 11).unwrap();
        let (mut sum_quiet, mut sum_loud, mut count) = (0.0, 0.0, 0usize);
        for _ in 0..1000 {
            // Only the centre cell transmits in the quiet world.
            let mut qa = serve_first_active(&quiet, 0);
            let la = serve_first_active(&loud, 1);
            qa[24] = la[24];
            let qo = quiet.step(&qa).unwrap();
            let lo = loud.step(&la).unwrap();
            if la[24].power_idx > 0 {
                sum_quiet += qo[24].unwrap().sinr2.ln();
                sum_loud += lo[24].unwrap().sinr2.ln();
                count += 1;
            }
        }
        assert!(count > 500);
        assert!(sum_loud / (count as f64) < sum_quiet / (count as f64));
    }

    #[test]
    fn step_is_reproducible_and_batteries_bounded() {
        let params = EnvParams::standard(3, 3);
        let run = |seed| {
            let mut world = World::new(params.clone(), seed).unwrap();
            let space = params.action_space();
            let mut rng = stream(seed, 99, 0);
            let mut trace = Vec::new();
            for _ in 0..200 {
                let actions: Vec<_> = (0..9).map(|_| space.decode(rng.random_range(0..space.size()))).collect();
                for o in world.step(&actions).unwrap().into_iter().flatten() {
                    assert!(o.battery_after >= 0.0 && o.battery_after <= params.energy.e_max);
                    trace.push(o.reward.to_bits());
                }
            }
            trace
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn deactivated_cells_are_silent() {
        let params = EnvParams::standard(3, 3);
        let mut world = World::new(params, 1).unwrap();
        for k in (0..9).filter(|&k| k != 4) {
            world.deactivate(k);
        }
        assert_eq!(world.active_count(), 1);
        let actions = serve_first_active(&world, 4);
        let out = world.step(&actions).unwrap();
        assert!(out.iter().enumerate().all(|(k, o)| o.is_some() == (k == 4)));
    }
}
