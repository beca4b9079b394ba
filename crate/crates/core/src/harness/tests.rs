use std::fs;
use std::path::PathBuf;

use super::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn tiny_config(roster: &str, reference: &str) -> ExperimentConfig {
    let text = format!(
        r#"
name = "slip"
roster = {roster}
episodes = 12
eval_episodes = 4
seeds = "0..2"
window = 5
checkpoint_every = 0
spec = {{ lambda = 1.0, b = 1.0 }}
reference = {reference}

[env]
kind = "tiny"
fixture = "{}"
"#,
        fixture("slippery.toml").display()
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

#[test]
fn prior_against_prior_reference_has_zero_regret() {
    let cfg = tiny_config(r#"["prior"]"#, r#"{ source = "prior" }"#);
    let dir = tempfile::tempdir().unwrap();
    let s = execute(&cfg, dir.path(), Some(1)).unwrap();
    let rows: Vec<MetricsRow> = read_csv(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 24);
    assert!(rows
        .iter()
        .all(|r| r.regret == 0.0 && r.pseudo_regret == 0.0 && !r.violated));
    assert_eq!(s.policy("prior").unwrap().final_window_regret, 0.0);
    assert!(s.passed());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let mut cfg = tiny_config(
        r#"["acrl", "rl", "random+acd"]"#,
        r#"{ source = "trained", episodes = 6 }"#,
    );
    cfg.checkpoint_every = 1;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = execute(&cfg, a.path(), Some(1)).unwrap();
    let sb = execute(&cfg, b.path(), Some(4)).unwrap();
    assert_eq!(sa, sb);
    for f in [
        "metrics.csv",
        "eval.csv",
        "learning_curve.csv",
        "summary.json",
        "config.toml",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let cks = fs::read_dir(a.path().join("checkpoints")).unwrap().count();
    assert!(cks > 0);
    assert!(sa.passed(), "{sa:?}");
}

#[test]
fn run_dir_is_keyed_by_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(
        &path,
        "name = \"k\"\nroster = [\"prior\"]\nepisodes = 2\nseeds = \"0..1\"\nspec = { lambda = 0.0, b = 1.0 }\nreference = { source = \"prior\" }\n[env]\nkind = \"tiny\"\nfixture = \"fx.toml\"\n",
    )
    .unwrap();
    fs::copy(fixture("coin.toml"), dir.path().join("fx.toml")).unwrap();
    let loaded = ExperimentConfig::load(&path).unwrap();
    let (out, _) = run(&loaded, &dir.path().join("out"), Some(2)).unwrap();
    let name = out.file_name().unwrap().to_str().unwrap();
    assert_eq!(name, format!("k-{}", &loaded.config.hash().unwrap()[..12]));
    let stamp: Stamp = serde_json::from_slice(&fs::read(out.join("stamp.json")).unwrap()).unwrap();
    assert_eq!(stamp.config_git_blob, git_blob_hash(&fs::read(&path).unwrap()));
}

#[test]
fn reference_needs_episodes() {
    let mut cfg = tiny_config(r#"["acrl"]"#, r#"{ source = "trained", episodes = 1 }"#);
    cfg.reference.episodes = 0;
    let b = TinyBench::load(&fixture("slippery.toml")).unwrap();
    assert!(matches!(
        reference_policy(&b, &cfg, ReferenceKind::AcdOptimal),
        Err(crate::Error::Refused(_))
    ));
}

#[test]
fn sweep_writes_one_row_per_value_and_policy() {
    let cfg = tiny_config(r#"["prior", "random+acd"]"#, r#"{ source = "prior" }"#);
    let dir = tempfile::tempdir().unwrap();
    let s = sweep(&cfg, SweepParam::Lambda, &[0.0, 2.0], dir.path(), Some(2)).unwrap();
    assert_eq!(s.rows.len(), 4);
    assert!(s.passed());
    let rows: Vec<SweepRow> = read_csv(&dir.path().join("sweep.csv")).unwrap();
    assert_eq!(rows, s.rows);
    assert!(dir.path().join("lambda=2").join("metrics.csv").exists());
}

#[test]
fn verify_accepts_shipped_and_rejects_faulty() {
    let ok = verify(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")).unwrap();
    assert!(ok.passed() && ok.fixtures >= 3);
    let bad = verify(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/faulty")).unwrap();
    assert!(!bad.passed());
    let empty = tempfile::tempdir().unwrap();
    let none = verify(empty.path()).unwrap();
    assert!(none.passed() && none.is_empty());
}

/// Mean and standard error of the reference's return on 4000 held-out sequences.
fn held_out<P: crate::model::Policy + Clone>(
    b: &TinyBench,
    p: &P,
    spec: crate::model::CompetitiveSpec,
    shielded: bool,
) -> (f64, f64) {
    let xs: Vec<f64> = (0..4000u64)
        .map(|i| {
            let seq = crate::model::ModelSequence::new(0xFEED_0000 + i, 0);
            crate::learner::play(b.env(), &seq, p.clone(), b.prior(), spec, shielded)
                .unwrap()
                .0
                .agent
                .total_reward()
        })
        .collect();
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (m, sd / n.sqrt())
}

#[test]
fn references_match_the_exact_optima() {
    let mut cfg = tiny_config(r#"["acrl"]"#, r#"{ source = "trained", episodes = 400 }"#);
    cfg.reference.episodes = 400;
    let spec = cfg.competitive_spec().unwrap();
    let t = crate::oracle::TinyMdp::load(&fixture("slippery.toml")).unwrap();
    let b = TinyBench::load(&fixture("slippery.toml")).unwrap();

    let circ = reference_policy(&b, &cfg, ReferenceKind::AcdOptimal).unwrap();
    assert_eq!(circ.final_model, t.true_model);
    let exact = crate::oracle::exact_dp(&t, spec, true).unwrap().value;
    let (m, se) = held_out(&b, &circ.policy, spec, true);
    assert!(
        (m - exact).abs() <= 4.0 * se + 1e-12,
        "acd reference {m} ± {se}, exact {exact}"
    );

    let star = reference_policy(&b, &cfg, ReferenceKind::Unconstrained).unwrap();
    assert_eq!(star.final_model, t.true_model);
    let exact = crate::oracle::unconstrained_dp(&t, t.true_model).value(1, t.start);
    let (m, se) = held_out(&b, &star.policy, spec, false);
    assert!(
        (m - exact).abs() <= 4.0 * se + 1e-12,
        "unconstrained reference {m} ± {se}, exact {exact}"
    );
}

#[test]
fn singleton_sweep_matches_a_run() {
    let cfg = tiny_config(r#"["acrl", "random+acd"]"#, r#"{ source = "trained", episodes = 6 }"#);
    let run_dir = tempfile::tempdir().unwrap();
    let sweep_root = tempfile::tempdir().unwrap();
    let single = execute(&cfg, run_dir.path(), Some(1)).unwrap();
    let s = sweep(&cfg, SweepParam::Lambda, &[cfg.spec.lambda], sweep_root.path(), Some(1)).unwrap();
    assert_eq!(s.runs.len(), 1);
    let sub = sweep_root.path().join(format!("lambda={}", cfg.spec.lambda));
    for f in ["metrics.csv", "eval.csv", "learning_curve.csv"] {
        assert_eq!(
            fs::read(run_dir.path().join(f)).unwrap(),
            fs::read(sub.join(f)).unwrap(),
            "{f}"
        );
    }
    for (row, p) in s.rows.iter().zip(&single.policies) {
        assert_eq!(row.policy, p.policy);
        assert_eq!(row.mean_regret, p.final_window_regret);
        assert_eq!(row.violation_rate, p.violation_rate);
    }
}
