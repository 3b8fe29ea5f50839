//! The representative UAV's slot interface: one cell simulated exactly,
//! every other cell replaced by an interferer drawn from the frozen
//! mean-field's interference marginal.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::env::channel::{elevation_deg, sample_link};
use crate::env::geometry::distance3;
use crate::env::slot::compute_sinr;
use crate::env::{AgentAction, AgentState, EnvParams, IfLayout, Interferer, SlotOutcome};
use crate::mfg::MeanField;
use crate::rng::{stream, tag, SimRng};
use crate::softq::{encode_state, Environment, StepMetrics};

#[derive(Debug, Clone)]
pub struct RepresentativeEnv {
    params: EnvParams,
    cell: usize,
    others: Vec<usize>,
    layout: IfLayout,
    if_cdf: Vec<f64>,
    state: AgentState,
    demand_rng: SimRng,
    cloud_rng: SimRng,
    interferer_rng: SimRng,
    fading_rng: SimRng,
    last: Option<SlotOutcome>,
}

impl RepresentativeEnv {
    /// The representative sits in the centre cell; all other cells interfere.
    pub fn new(params: EnvParams, mf: &MeanField) -> Self {
        let cell = params.geometry.center_cell();
        let others = (0..params.geometry.num_cells()).filter(|&k| k != cell).collect();
        let layout = params.if_layout();
        let gus = params.num_gus();
        let mut env = Self {
            state: AgentState { demand: vec![false; gus], prev_hover: 0, battery: params.energy.e_max },
            params,
            cell,
            others,
            layout,
            if_cdf: Vec::new(),
            demand_rng: stream(0, tag::DEMAND, 0),
            cloud_rng: stream(0, tag::CLOUD, 0),
            interferer_rng: stream(0, tag::INTERFERER, 0),
            fading_rng: stream(0, tag::FADING, 0),
            last: None,
        };
        env.set_meanfield(mf);
        env.reset(0);
        env
    }

    pub fn set_meanfield(&mut self, mf: &MeanField) {
        assert_eq!(mf.marginal_if.len(), self.layout.size(), "interference layout");
        let mut acc = 0.0;
        self.if_cdf = mf
            .marginal_if
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
    }

    /// Restrict the interfering population to `cells`.
    pub fn set_others(&mut self, cells: Vec<usize>) {
        self.others = cells.into_iter().filter(|&k| k != self.cell).collect();
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn last_outcome(&self) -> Option<&SlotOutcome> {
        self.last.as_ref()
    }

    /// Play one slot with an explicit action.
    pub fn play(&mut self, action: AgentAction) -> SlotOutcome {
        let (action, substituted) = self.params.enforce(&self.state, action);
        let (mut sinr1, mut sinr2) = (0.0, 0.0);
        if self.params.interference_key(&self.state, &action).serving {
            let g = &self.params.geometry;
            let gu = g.gu_position(self.cell, action.assoc.expect("serving implies association"));
            let mut tau1 = Vec::new();
            let mut tau2 = Vec::new();
            for i in 0..self.others.len() {
                let key = self.layout.decode(draw(&self.if_cdf, &mut self.interferer_rng));
                if !key.serving {
                    continue;
                }
                let uav = g.hover_position(self.others[i], key.hover);
                let gain = gain(&self.params, uav, gu, &mut self.fading_rng);
                let power = self.params.power_w(key.power_idx);
                tau1.push(Interferer { gain, power, transmitting: key.hovering });
                tau2.push(Interferer { gain, power, transmitting: true });
            }
            let own = gain(&self.params, g.hover_position(self.cell, action.hover), gu, &mut self.fading_rng);
            let p = self.params.power_w(action.power_idx);
            let n0 = self.params.link.n0;
            sinr1 = compute_sinr(own, p, action.stays(self.state.prev_hover), &tau1, n0);
            sinr2 = compute_sinr(own, p, true, &tau2, n0);
        }
        let cloud = *self
            .params
            .energy
            .harvest
            .cloud_levels
            .choose(&mut self.cloud_rng)
            .expect("validated cloud levels");
        let outcome = self.params.settle(&self.state, &action, sinr1, sinr2, cloud, substituted);
        let chain = self.params.demand;
        for bit in self.state.demand.iter_mut() {
            *bit = chain.step(*bit, &mut self.demand_rng);
        }
        self.state.prev_hover = action.hover;
        self.state.battery = outcome.battery_after;
        self.last = Some(outcome);
        outcome
    }
}

/// Inverse-CDF draw from a cumulative table.
fn draw(cdf: &[f64], rng: &mut SimRng) -> usize {
    let total = *cdf.last().expect("non-empty layout");
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|c| *c <= u).min(cdf.len() - 1)
}

fn gain(params: &EnvParams, uav: [f64; 3], gu: [f64; 2], rng: &mut SimRng) -> f64 {
    sample_link(distance3(uav, gu), elevation_deg(uav, gu), &params.channel, rng).gain
}

pub fn metrics(outcome: &SlotOutcome) -> StepMetrics {
    StepMetrics {
        reward: outcome.reward,
        ee: outcome.ee,
        interference_penalty: outcome.interference_penalty,
        power_w: outcome.power_w,
        flew: outcome.flew(),
        substituted: outcome.substituted,
    }
}

impl Environment for RepresentativeEnv {
    fn num_actions(&self) -> usize {
        self.params.action_space().size()
    }

    fn local_width(&self) -> usize {
        self.params.num_gus() + 2
    }

    /// Stationary demand, full battery and a uniformly random hover point.
    fn reset(&mut self, episode_seed: u64) {
        let mut start = stream(episode_seed, tag::START, 0);
        let chain = self.params.demand;
        for bit in self.state.demand.iter_mut() {
            *bit = chain.sample_stationary(&mut start);
        }
        self.state.prev_hover = start.random_range(0..self.params.num_gus());
        self.state.battery = self.params.energy.e_max;
        self.demand_rng = stream(episode_seed, tag::DEMAND, 0);
        self.cloud_rng = stream(episode_seed, tag::CLOUD, 0);
        self.interferer_rng = stream(episode_seed, tag::INTERFERER, 0);
        self.fading_rng = stream(episode_seed, tag::FADING, 0);
        self.last = None;
    }

    fn local_features(&self, out: &mut Vec<f64>) {
        encode_state(&self.state, &self.params, out);
    }

    fn feasible(&self, mask: &mut [bool]) -> bool {
        self.params.feasible_mask(&self.state, mask)
    }

    fn step(&mut self, action: usize) -> StepMetrics {
        let a = self.params.action_space().decode(action);
        metrics(&self.play(a))
    }
}
