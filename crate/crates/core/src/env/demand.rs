use rand::Rng;

use super::EnvError;

/// Two-state Markov chain driving a GU's demand: `p` is Pr(idle -> active),
/// `q` is Pr(active -> active).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandChain {
    p: f64,
    q: f64,
}

impl DemandChain {
    pub fn new(p: f64, q: f64) -> Result<Self, EnvError> {
        for (name, v) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(EnvError::Invalid(format!(
                    "demand transition probability {name}={v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Long-run fraction of slots in the active state.
    pub fn stationary_active(&self) -> f64 {
        let denom = 1.0 + self.p - self.q;
        if denom <= 0.0 {
            // p = 0, q = 1: both states absorbing.
            return 0.5;
        }
        self.p / denom
    }

    pub fn step<R: Rng + ?Sized>(&self, active: bool, rng: &mut R) -> bool {
        let prob = if active { self.q } else { self.p };
        rng.random::<f64>() < prob
    }

    /// Draw from the stationary distribution.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.stationary_active()
    }
}

/// Free-function form of [`DemandChain::step`].
pub fn step_demand<R: Rng + ?Sized>(bit: bool, chain: &DemandChain, rng: &mut R) -> bool {
    chain.step(bit, rng)
}
