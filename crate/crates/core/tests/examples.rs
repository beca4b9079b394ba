mod acd_shield {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/acd_shield.rs"));
}

mod acrl_training {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/acrl_training.rs"));
}

mod carbon_scheduling {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/carbon_scheduling.rs"));
}

mod certify_prior {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/certify_prior.rs"));
}

mod exhaustive_verification {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/exhaustive_verification.rs"
    ));
}

mod run_experiment {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/run_experiment.rs"));
}

mod sustainable_inference {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/sustainable_inference.rs"
    ));
}

mod theorem_bound {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/theorem_bound.rs"));
}

mod trace_windows {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/trace_windows.rs"));
}

#[test]
fn acd_shield_runs() {
    acd_shield::run().expect("acd_shield example should run");
}

#[test]
fn acrl_training_runs() {
    acrl_training::run().expect("acrl_training example should run");
}

#[test]
fn carbon_scheduling_runs() {
    carbon_scheduling::run().expect("carbon_scheduling example should run");
}

#[test]
fn certify_prior_runs() {
    certify_prior::run().expect("certify_prior example should run");
}

#[test]
fn exhaustive_verification_runs() {
    exhaustive_verification::run().expect("exhaustive_verification example should run");
}

#[test]
fn run_experiment_runs() {
    run_experiment::run().expect("run_experiment example should run");
}

#[test]
fn sustainable_inference_runs() {
    sustainable_inference::run().expect("sustainable_inference example should run");
}

#[test]
fn theorem_bound_runs() {
    theorem_bound::run().expect("theorem_bound example should run");
}

#[test]
fn trace_windows_runs() {
    trace_windows::run().expect("trace_windows example should run");
}
