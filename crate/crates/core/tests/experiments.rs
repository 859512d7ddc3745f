use mkdv_lab::experiments::{
    exp_conservation, exp_gauge_equivalence, exp_illposedness, exp_nonexistence, exp_random_momentum,
    run_experiment, ConservationConfig, ExperimentKind, GaugeConfig, IllposednessConfig, NonexistenceConfig,
    RandomMomentumConfig,
};
use mkdv_lab::io::{read_report, write_report};

#[test]
fn reports_are_byte_identical_across_runs() {
    let cons = ConservationConfig {
        t_end: 0.1,
        ..Default::default()
    };
    assert_eq!(exp_conservation(&cons).unwrap().to_json(), exp_conservation(&cons).unwrap().to_json());
    let gauge = GaugeConfig {
        t_end: 0.1,
        ..Default::default()
    };
    assert_eq!(exp_gauge_equivalence(&gauge).unwrap().to_json(), exp_gauge_equivalence(&gauge).unwrap().to_json());
    let rm = RandomMomentumConfig {
        samples: 500,
        ..Default::default()
    };
    let a = exp_random_momentum(&rm).unwrap().to_json();
    assert_eq!(a, exp_random_momentum(&rm).unwrap().to_json());
    let other = RandomMomentumConfig { seed: 2, ..rm };
    assert_ne!(a, exp_random_momentum(&other).unwrap().to_json());
}

#[test]
fn analytic_values_ignore_the_solver() {
    let fine = IllposednessConfig {
        n_list: vec![2, 4],
        ..Default::default()
    };
    let coarse = IllposednessConfig {
        phase_step: 0.2,
        ..fine.clone()
    };
    let (a, b) = (exp_illposedness(&fine).unwrap(), exp_illposedness(&coarse).unwrap());
    for name in ["mode", "separation_time", "initial_distance", "solution_distance"] {
        assert_eq!(a.find_series(name), b.find_series(name), "{name}");
    }
    assert_ne!(a.find_series("steps"), b.find_series("steps"));
    assert!(a.find_verdict("solution_distance").unwrap().passed);
}

#[test]
fn control_run_passes_its_verdicts() {
    let cfg = NonexistenceConfig {
        schedule: vec![8, 16, 32, 64],
        modes: 64,
        t_end: 0.2,
        dt: 1e-4,
        symmetric: true,
        ..Default::default()
    };
    let report = exp_nonexistence(&cfg).unwrap();
    assert_eq!(report.verdicts.len(), 3);
    assert!(report.all_passed(), "{:#?}", report.verdicts);
}

#[test]
fn reports_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut kind = ExperimentKind::from_name("conservation").unwrap();
    kind.set("T", "0.05").unwrap();
    let report = run_experiment(&kind).unwrap();
    write_report(dir.path(), &report).unwrap();
    let back = read_report(&dir.path().join("report.json")).unwrap();
    assert_eq!(back.to_json(), report.to_json());
    let mass = std::fs::read_to_string(dir.path().join("series/mass.csv")).unwrap();
    assert!(mass.starts_with("t,mass\n"));
    assert_eq!(mass.lines().count(), report.find_series("mass").unwrap().points.len() + 1);
}
