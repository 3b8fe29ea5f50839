use mfuav_harness::config::Scale;
use mfuav_harness::{ConfigError, ExperimentConfig};

#[test]
fn empty_file_gives_paper_defaults() {
    let cfg = ExperimentConfig::from_toml_str("").unwrap();
    assert_eq!(cfg.scale, Scale::Paper);
    assert_eq!((cfg.grid_rows, cfg.grid_cols), (19, 19));
    assert_eq!(cfg.demand_q, 0.7);
    assert_eq!(cfg, ExperimentConfig::for_scale(Scale::Paper));
}

#[test]
fn desk_scale_shrinks_the_grid() {
    let cfg = ExperimentConfig::from_toml_str("scale = \"desk\"").unwrap();
    assert_eq!((cfg.grid_rows, cfg.grid_cols), (7, 7));
}

#[test]
fn explicit_grid_overrides_the_scale() {
    let cfg = ExperimentConfig::from_toml_str("grid_rows = 7\ngrid_cols = 7").unwrap();
    assert_eq!(cfg.scale, Scale::Paper);
    assert_eq!((cfg.grid_rows, cfg.grid_cols), (7, 7));
}

#[test]
fn probability_out_of_range_is_a_unit_error() {
    match ExperimentConfig::from_toml_str("demand_q = 1.5") {
        Err(ConfigError::Unit { key, .. }) => assert_eq!(key, "demand_q"),
        other => panic!("expected a unit error, got {other:?}"),
    }
}

#[test]
fn unknown_key_is_a_schema_error() {
    assert!(matches!(ExperimentConfig::from_toml_str("bogus = 1"), Err(ConfigError::Schema(_))));
}

#[test]
fn malformed_toml_is_a_parse_error() {
    assert!(matches!(ExperimentConfig::from_toml_str("demand_q = "), Err(ConfigError::Parse(_))));
}

#[test]
fn toml_round_trip_and_overrides() {
    let cfg = ExperimentConfig::from_toml_str("scale = \"desk\"\nseed = 9").unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    let o = cfg.with_overrides(&[("demand_q".into(), "0.9".into()), ("sweep_seed".into(), "[1, 2]".into())]).unwrap();
    assert_eq!(o.demand_q, 0.9);
    assert_eq!(o.sweep_seed, vec![1, 2]);
    assert_eq!(o.seed, 9);
}

#[test]
fn scale_override_keeps_explicit_values() {
    let paper = ExperimentConfig::from_toml_str("episodes = 40").unwrap();
    let desk = paper.with_overrides(&[("scale".into(), "\"desk\"".into())]).unwrap();
    assert_eq!((desk.grid_rows, desk.steps), (7, 100));
    assert_eq!(desk.episodes, 40);
}
