use dieselnn::closed_loop::{build_profile, ProfileSpec, ProfileStep};
use dieselnn::config::DataConfig;
use dieselnn::control::{train_controller, Controller, CriterionWeights, TrainConfig};
use dieselnn::surrogate::{Channel, PlantParams, SignalLog};
use dieselnn::sysid::{identify_engine, order_grid, select_structure, IdentifyConfig, RegressorSpec, SelectConfig};

fn small_log() -> SignalLog {
    let data = DataConfig { samples: 400, settle_steps: 5000, ..DataConfig::default() };
    data.generate(&PlantParams::default()).unwrap()
}

fn quick_identify() -> IdentifyConfig {
    let mut cfg = IdentifyConfig { speed_hidden: 3, pressure_hidden: 2, airflow_hidden: 2, opacity_hidden: 3, ..IdentifyConfig::default() };
    cfg.fit.restarts = 1;
    cfg.fit.lm.max_iterations = 40;
    cfg
}

#[test]
fn data_generation_is_reproducible() {
    let a = small_log();
    let b = small_log();
    assert_eq!(a.records(), b.records());
    let other = DataConfig { samples: 400, settle_steps: 5000, seed: 2, ..DataConfig::default() }
        .generate(&PlantParams::default())
        .unwrap();
    assert_ne!(a.channel(Channel::PumpPosition), other.channel(Channel::PumpPosition));
}

#[test]
fn identification_and_training_are_reproducible() {
    let log = small_log();
    let cfg = quick_identify();
    let (m1, s1) = identify_engine::<f64>(&log, &cfg).unwrap();
    let (m2, s2) = identify_engine::<f64>(&log, &cfg).unwrap();
    assert_eq!(s1, s2);
    for ch in [Channel::Speed, Channel::Pressure, Channel::Airflow, Channel::Opacity] {
        let (a, b) = (m1.submodel(ch).unwrap(), m2.submodel(ch).unwrap());
        assert_eq!(a.to_text(), b.to_text(), "{ch} model differs");
    }

    let spec = ProfileSpec {
        duration: 20.0,
        steps: vec![ProfileStep { time: 0.0, speed: 2800.0 }, ProfileStep { time: 10.0, speed: 3200.0 }],
        ..ProfileSpec::default()
    };
    let profile = build_profile(&spec, 0.1, Some(&m1), 500).unwrap();
    let tc = TrainConfig { epochs: 2, settle_steps: 500, ..TrainConfig::default() };
    let w = CriterionWeights::opacity(0.2);
    let run = || {
        let init = Controller::for_model(&m1, tc.hidden, tc.seed).unwrap();
        train_controller(&m1, &profile, &w, init, &tc).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.controller.weights(), b.controller.weights());
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn structure_selection_is_reproducible() {
    let log = small_log();
    let orders = order_grid(&RegressorSpec::speed_default(), 1..=2, 1..=2);
    let mut cfg = SelectConfig { phase1_hidden: 3, ..SelectConfig::default() };
    cfg.fit.restarts = 1;
    cfg.fit.lm.max_iterations = 30;
    let (r1, f1) = select_structure::<f64>(&log, Channel::Speed, &orders, &[2, 3], &cfg).unwrap();
    let (r2, f2) = select_structure::<f64>(&log, Channel::Speed, &orders, &[2, 3], &cfg).unwrap();
    assert_eq!(r1.candidates.len(), r2.candidates.len());
    for (a, b) in r1.candidates.iter().zip(&r2.candidates) {
        assert_eq!(a.fpe, b.fpe);
        assert!(a.fpe.is_none_or(f64::is_finite));
    }
    assert_eq!(r1.best_order, r2.best_order);
    assert_eq!(f1.model.mlp().weights(), f2.model.mlp().weights());
}
