//! Benchmark trainers: epsilon-greedy independent DQN, epsilon-greedy
//! mean-field DQN and Boltzmann mean-field DQN. They share the soft-Q
//! machinery and differ in exploration, TD target and features.

use rand::Rng;

use crate::softq::trainer::sample_index;
use crate::softq::{masked_argmax, soft_policy, Exploration, FeatureMode, SoftqError, TargetRule, TrainerConfig};

/// With probability `epsilon` a uniform feasible action, else the feasible
/// argmax (lowest index on ties).
pub fn epsilon_greedy_action<R: Rng + ?Sized>(
    q: &[f64],
    epsilon: f64,
    mask: &[bool],
    rng: &mut R,
) -> Result<usize, SoftqError> {
    let greedy = masked_argmax(q, mask).ok_or(SoftqError::AllMasked)?;
    if rng.random::<f64>() < epsilon {
        let feasible: Vec<usize> = (0..q.len()).filter(|&i| mask[i]).collect();
        Ok(feasible[rng.random_range(0..feasible.len())])
    } else {
        Ok(greedy)
    }
}

/// Sample proportional to `exp(q / temperature)` over feasible actions.
pub fn boltzmann_action<R: Rng + ?Sized>(
    q: &[f64],
    temperature: f64,
    mask: &[bool],
    rng: &mut R,
) -> Result<usize, SoftqError> {
    let pi = soft_policy(q, temperature, mask)?;
    Ok(sample_index(&pi, rng))
}

/// The learning algorithms compared in the benchmark figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    MeMfdqn,
    BoltzMfdqn,
    EgMfdqn,
    EgIdqn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::MeMfdqn, Algorithm::BoltzMfdqn, Algorithm::EgMfdqn, Algorithm::EgIdqn];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::MeMfdqn => "ME-MFDQN",
            Algorithm::BoltzMfdqn => "BOLTZ-MFDQN",
            Algorithm::EgMfdqn => "EG-MFDQN",
            Algorithm::EgIdqn => "EG-IDQN",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(s))
    }

    pub fn uses_meanfield(&self) -> bool {
        !matches!(self, Algorithm::EgIdqn)
    }
}

/// Exploration schedules for the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of training over which epsilon decays.
    pub epsilon_fraction: f64,
    pub temperature_start: f64,
    pub temperature_end: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.3,
            temperature_start: 1.0,
            temperature_end: 0.1,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), SoftqError> {
        let eps = 0.0..=1.0;
        if !(eps.contains(&self.epsilon_start) && eps.contains(&self.epsilon_end)) {
            return Err(SoftqError::Shape("epsilon must lie in [0, 1]".into()));
        }
        if !(self.temperature_start > 0.0 && self.temperature_end > 0.0 && self.epsilon_fraction > 0.0) {
            return Err(SoftqError::Shape("temperature and decay share must be positive".into()));
        }
        Ok(())
    }
}

/// Trainer settings for `algorithm`, derived from the shared base config.
pub fn trainer_config(algorithm: Algorithm, base: &TrainerConfig, b: &BaselineConfig) -> TrainerConfig {
    let mut cfg = base.clone();
    match algorithm {
        Algorithm::MeMfdqn => {
            cfg.exploration = Exploration::Soft;
            cfg.target = TargetRule::Soft;
        }
        Algorithm::BoltzMfdqn => {
            cfg.exploration = Exploration::Boltzmann { start: b.temperature_start, end: b.temperature_end };
            cfg.target = TargetRule::Max;
        }
        Algorithm::EgMfdqn | Algorithm::EgIdqn => {
            cfg.exploration = Exploration::EpsilonGreedy {
                start: b.epsilon_start,
                end: b.epsilon_end,
                fraction: b.epsilon_fraction,
            };
            cfg.target = TargetRule::Max;
        }
    }
    cfg
}

/// Mean-field input of `algorithm` given the configured mean-field mode.
pub fn feature_mode(algorithm: Algorithm, meanfield_mode: FeatureMode) -> FeatureMode {
    if algorithm.uses_meanfield() {
        meanfield_mode
    } else {
        FeatureMode::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::softq::ActionRule;

    #[test]
    fn epsilon_examples() {
        let mut rng = stream(1, 0, 0);
        let q = [5.0, 1.0, 1.0];
        let all = [true; 3];
        for _ in 0..1000 {
            assert_eq!(epsilon_greedy_action(&q, 0.0, &all, &mut rng).unwrap(), 0);
        }
        let n = 100_000;
        let hits = (0..n).filter(|_| epsilon_greedy_action(&q, 0.3, &all, &mut rng).unwrap() == 0).count();
        assert!((hits as f64 / n as f64 - 0.8).abs() < 0.01);
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[epsilon_greedy_action(&q, 1.0, &all, &mut rng).unwrap()] += 1;
        }
        let sd = (n as f64 / 3.0 * (2.0 / 3.0)).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 - n as f64 / 3.0).abs() < 3.0 * sd));
    }

    #[test]
    fn boltzmann_examples() {
        let mut rng = stream(2, 0, 0);
        let n = 100_000;
        let all = [true; 2];
        let zeros = (0..n).filter(|_| boltzmann_action(&[1.0, 0.0], 1.0, &all, &mut rng).unwrap() == 0).count();
        assert!((zeros as f64 / n as f64 - 0.7311).abs() < 0.01);
        let q = [3.0, 1.0, -2.0, 0.5];
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[boltzmann_action(&q, 1e6, &[true; 4], &mut rng).unwrap()] += 1;
        }
        let tv: f64 = counts.iter().map(|&c| (c as f64 / n as f64 - 0.25).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.01);
        for _ in 0..1000 {
            assert_eq!(boltzmann_action(&q, 1e-3, &[true; 4], &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn masks_are_respected() {
        let mut rng = stream(3, 0, 0);
        let q = [9.0, 1.0, 2.0];
        let mask = [false, true, true];
        for _ in 0..100_000 {
            assert_ne!(epsilon_greedy_action(&q, 0.5, &mask, &mut rng).unwrap(), 0);
            assert_ne!(boltzmann_action(&q, 2.0, &mask, &mut rng).unwrap(), 0);
            assert_ne!(ActionRule::Soft { phi: 1.0 }.pick(&q, &mask, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn boltzmann_matches_soft_policy() {
        let q = [0.3, -1.2, 2.2, 0.0];
        let mask = [true, true, false, true];
        let t = 0.7;
        let a = soft_policy(&q, t, &mask).unwrap();
        let weights: Vec<f64> = q.iter().zip(&mask).map(|(v, m)| if *m { (v / t).exp() } else { 0.0 }).collect();
        let z: f64 = weights.iter().sum();
        for (x, w) in a.iter().zip(&weights) {
            assert!((x - w / z).abs() < 1e-12);
        }
    }

    #[test]
    fn configs() {
        let base = TrainerConfig::default();
        let b = BaselineConfig::default();
        assert_eq!(trainer_config(Algorithm::EgIdqn, &base, &b).target, TargetRule::Max);
        assert_eq!(trainer_config(Algorithm::MeMfdqn, &base, &b).target, TargetRule::Soft);
        assert_eq!(feature_mode(Algorithm::EgIdqn, FeatureMode::Compact), FeatureMode::None);
        assert_eq!(Algorithm::parse("boltz-mfdqn"), Some(Algorithm::BoltzMfdqn));
    }
}
