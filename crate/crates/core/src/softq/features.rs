//! Network inputs: per-agent state features followed by mean-field features.

use crate::env::{AgentState, EnvParams};
use crate::mfg::MeanField;

/// How the mean-field enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// No mean-field input (independent learners).
    None,
    /// Interference marginal over (hover, power, mode-2, serving).
    Compact,
    /// The whole joint (state, action) table.
    Full,
}

impl FeatureMode {
    pub fn width(&self, mf: &MeanField) -> usize {
        match self {
            FeatureMode::None => 0,
            FeatureMode::Compact => mf.marginal_if.len(),
            FeatureMode::Full => mf.joint.len(),
        }
    }
}

/// Demand bits, normalised previous hover index and normalised battery
/// level: `U + 2` entries.
pub fn encode_state(state: &AgentState, params: &EnvParams, out: &mut Vec<f64>) {
    out.clear();
    out.extend(state.demand.iter().map(|&b| f64::from(u8::from(b))));
    let u = params.num_gus();
    out.push(if u > 1 { state.prev_hover as f64 / (u - 1) as f64 } else { 0.0 });
    let space = params.state_space();
    let level = space.quantize(state.battery, params.energy.e_max);
    out.push(if space.levels > 1 { level as f64 / (space.levels - 1) as f64 } else { 0.0 });
}

pub fn encode_meanfield(mf: &MeanField, mode: FeatureMode) -> Vec<f64> {
    match mode {
        FeatureMode::None => Vec::new(),
        FeatureMode::Compact => mf.marginal_if.clone(),
        FeatureMode::Full => mf.joint.clone(),
    }
}

pub fn encode_features(state: &AgentState, mf: &MeanField, mode: FeatureMode, params: &EnvParams) -> Vec<f64> {
    let mut out = Vec::new();
    encode_state(state, params, &mut out);
    out.extend(encode_meanfield(mf, mode));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mfg::MfDims;

    #[test]
    fn widths() {
        let params = EnvParams::standard(7, 7);
        let mf = MeanField::uniform(MfDims::of(&params));
        let state = AgentState { demand: vec![true, false, false, true], prev_hover: 3, battery: 5e5 };
        let full = encode_features(&state, &mf, FeatureMode::Full, &params);
        let u = 4;
        let dim_s = (1 << u) * u * 8;
        let dim_a = u * u * 5;
        assert_eq!(full.len(), (u + 2) + dim_s * dim_a);
        let compact = encode_features(&state, &mf, FeatureMode::Compact, &params);
        assert_eq!(compact.len() - (u + 2), 80);
        assert_eq!(&compact[..6], &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(encode_features(&state, &mf, FeatureMode::None, &params).len(), u + 2);
        let uniform_joint = 1.0 / (dim_s * dim_a) as f64;
        assert!(full[6..].iter().all(|v| (v - uniform_joint).abs() < 1e-18));
    }
}
