use mfuav_core::env::EnvParams;
use mfuav_core::mfg::{solve_equilibrium, MeanField, SolveConfig};
use mfuav_core::micro::{ExactPropagator, MicroSpec, TabularBestResponse};
use mfuav_core::pomfg::{CompressedHistory, PartialObsEnv, HIDDEN, SEEN_ACTIVE, STALENESS_CAP};
use mfuav_core::rng::stream;
use mfuav_core::softq::Environment;
use mfuav_core::view::RepresentativeEnv;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::Rng;

fn config(cases: u32, seed: u64) -> ProptestConfig {
    ProptestConfig { cases, rng_seed: RngSeed::Fixed(seed), failure_persistence: None, ..ProptestConfig::default() }
}

fn trace(gus: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(0u8..3, gus), 0..200)
}

fn replay(trace: &[Vec<u8>], gus: usize) -> CompressedHistory {
    let mut h = CompressedHistory::new(gus, STALENESS_CAP);
    for symbols in trace {
        h.update(symbols);
    }
    h
}

proptest! {
    #![proptest_config(config(256, 71))]

    #[test]
    fn history_replays_from_a_logged_trace(t in trace(4)) {
        let logged: String = t
            .iter()
            .map(|row| row.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("\n");
        let parsed: Vec<Vec<u8>> = logged
            .lines()
            .map(|line| line.split(',').map(|s| s.parse().unwrap()).collect())
            .collect();
        prop_assert_eq!(replay(&t, 4), replay(&parsed, 4));
    }

    #[test]
    fn history_tracks_the_latest_sighting(t in trace(4)) {
        let h = replay(&t, 4);
        for u in 0..4 {
            let last = t.iter().rposition(|row| row[u] != HIDDEN);
            match last {
                Some(k) => {
                    prop_assert_eq!(h.belief[u], t[k][u] == SEEN_ACTIVE);
                    prop_assert_eq!(h.staleness[u] as usize, (t.len() - 1 - k).min(STALENESS_CAP as usize));
                }
                None => {
                    prop_assert!(!h.belief[u]);
                    prop_assert_eq!(h.staleness[u] as usize, t.len().min(STALENESS_CAP as usize));
                }
            }
        }
    }

    #[test]
    fn feature_width_is_fixed(seed in any::<u64>(), steps in 0usize..120, coverage in 0.0f64..=1.0) {
        let params = EnvParams::standard(3, 3);
        let mf = MeanField::uniform(mfuav_core::mfg::MfDims::of(&params));
        let mut env = PartialObsEnv::new(RepresentativeEnv::new(params.clone(), &mf), coverage, STALENESS_CAP);
        env.reset(seed);
        let mut rng = stream(seed, 0, 0);
        let mut mask = vec![false; env.num_actions()];
        let mut out = Vec::new();
        let width = 2 * params.num_gus() + 2;
        prop_assert_eq!(env.local_width(), width);
        for _ in 0..steps {
            env.local_features(&mut out);
            prop_assert_eq!(out.len(), width);
            prop_assert!(out.iter().all(|x| (0.0..=1.0).contains(x)));
            env.feasible(&mut mask);
            let feasible: Vec<usize> = (0..mask.len()).filter(|&a| mask[a]).collect();
            env.step(feasible[rng.random_range(0..feasible.len())]);
        }
    }
}

#[test]
fn zero_coverage_never_updates_beliefs() {
    let params = EnvParams::standard(3, 3);
    let mf = MeanField::uniform(mfuav_core::mfg::MfDims::of(&params));
    let mut env = PartialObsEnv::new(RepresentativeEnv::new(params, &mf), 0.0, STALENESS_CAP);
    env.reset(3);
    for _ in 0..50 {
        env.step(0);
        assert!(env.history().belief.iter().all(|b| !b));
    }
    assert!(env.history().staleness.iter().all(|&h| h == STALENESS_CAP));
}

#[test]
fn micro_fixed_point_contracts_from_random_starts() {
    let spec = MicroSpec::standard();
    let mut rng = stream(81, 0, 0);
    let cfg = SolveConfig { tol: 1e-10, max_iterations: 30, ..SolveConfig::default() };
    for _ in 0..10 {
        let w: Vec<f64> = (0..12).map(|_| rng.random::<f64>() + 1e-3).collect();
        let init = MeanField::from_weights(MicroSpec::dims(), w).unwrap();
        let mut br = TabularBestResponse { spec: spec.clone(), last: None };
        let mut pr = ExactPropagator { spec: spec.clone(), horizon: 50 };
        let eq = solve_equilibrium(init, &mut br, &mut pr, &cfg).unwrap();
        assert!(eq.report.contracting_share() >= 0.8, "ratios {:?}", eq.report.contraction_ratios);
    }
}
