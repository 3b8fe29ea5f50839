use super::{distance, MeanField, MfgError};

/// Step one of the iteration: optimal policy against a frozen mean-field.
pub trait BestResponse {
    type Policy;
    fn best_response(&mut self, mf: &MeanField, iteration: usize) -> Result<Self::Policy, MfgError>;
}

/// Step two: the mean-field induced by a policy, starting from `mf`.
pub trait Propagator<P> {
    fn propagate(&mut self, policy: &mut P, mf: &MeanField, iteration: usize) -> Result<MeanField, MfgError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub tol: f64,
    pub max_iterations: usize,
    /// Ratios are only recorded while the previous distance exceeds this.
    pub ratio_floor: f64,
    /// Leading iterations exempt from the monotonicity flag.
    pub transient: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { tol: 1e-2, max_iterations: 20, ratio_floor: 1e-12, transient: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EquilibriumReport {
    pub iterations: usize,
    /// `d(L_{k+1}, L_k)` for each completed iteration.
    pub distances: Vec<f64>,
    /// `d_k / d_{k-1}`, where defined.
    pub contraction_ratios: Vec<f64>,
    pub converged: bool,
    /// Distances rose after the transient.
    pub nonmonotone: bool,
}

impl EquilibriumReport {
    /// Share of recorded ratios below one.
    pub fn contracting_share(&self) -> f64 {
        if self.contraction_ratios.is_empty() {
            return 0.0;
        }
        self.contraction_ratios.iter().filter(|r| **r < 1.0).count() as f64
            / self.contraction_ratios.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct Equilibrium<P> {
    pub policy: P,
    pub meanfield: MeanField,
    pub report: EquilibriumReport,
}

/// Iterate `L_{k+1} = propagate(best_response(L_k), L_k)` until successive
/// iterates are within `tol`. Without convergence the iterate with the
/// smallest step is returned and `converged` is false.
pub fn solve_equilibrium<B, P>(
    init: MeanField,
    best_response: &mut B,
    propagator: &mut P,
    config: &SolveConfig,
) -> Result<Equilibrium<B::Policy>, MfgError>
where
    B: BestResponse,
    P: Propagator<B::Policy>,
{
    let mut report = EquilibriumReport::default();
    let mut current = init;
    let mut best: Option<(f64, B::Policy, MeanField)> = None;
    for k in 0..config.max_iterations.max(1) {
        let mut policy = best_response.best_response(&current, k)?;
        let next = propagator.propagate(&mut policy, &current, k)?;
        let d = distance(&next, &current)?;
        if let Some(&prev) = report.distances.last() {
            if prev > config.ratio_floor {
                report.contraction_ratios.push(d / prev);
            }
            if k >= config.transient && d > prev {
                report.nonmonotone = true;
            }
        }
        report.distances.push(d);
        report.iterations = k + 1;
        if d < config.tol {
            report.converged = true;
            return Ok(Equilibrium { policy, meanfield: next, report });
        }
        if best.as_ref().is_none_or(|(bd, _, _)| d < *bd) {
            best = Some((d, policy, next.clone()));
        }
        current = next;
    }
    let (_, policy, meanfield) = best.expect("at least one iteration");
    Ok(Equilibrium { policy, meanfield, report })
}
