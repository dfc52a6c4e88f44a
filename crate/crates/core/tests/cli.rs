use std::fs;
use std::path::{Path, PathBuf};

use herb::cli::{cmd_augment, cmd_eval, cmd_pretrain, cmd_sweep, cmd_train, main_with_args, parse_ablations, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK};
use herb::config::{parse_sweep_values, RunConfig};
use herb::graph::synthetic::sbm_with_homophily;
use herb::graph::{dataset_dir, write_dataset};
use herb::HerbError;

fn fixture(dir: &Path) -> RunConfig {
    let g = sbm_with_homophily(48, 3, 4.0, 0.3, 1)
        .unwrap()
        .with_noisy_features(6, 0.7)
        .build()
        .unwrap();
    write_dataset(&g, dataset_dir(dir.join("data"), "toy")).unwrap();
    let mut cfg = RunConfig::for_dataset("toy");
    cfg.data_root = Some(dir.join("data"));
    cfg.output = dir.join("out");
    cfg.apply_overrides(&[
        "seeds=0..2",
        "epochs=15",
        "encoder_epochs=10",
        "split_per_class=4",
        "split_val=0.2",
        "split_test=0.3",
    ])
    .unwrap();
    cfg
}

fn csv_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn pretrain_is_idempotent_and_writes_n_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path());
    let first = cmd_pretrain(&cfg).unwrap();
    assert!(first.iter().all(|s| !s.cached && s.n == 48 && s.str_dim == 32));
    let second = cmd_pretrain(&cfg).unwrap();
    assert!(second.iter().all(|s| s.cached));
    let files: Vec<PathBuf> = fs::read_dir(cfg.cache_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 4);
    for f in files {
        assert_eq!(csv_lines(&f).len(), 48);
    }
}

#[test]
fn cora_structure_cache_has_hidden_width_columns() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::for_dataset("cora");
    cfg.data_root = Some(root);
    cfg.output = tmp.path().to_path_buf();
    cfg.apply_overrides(&["seeds=0", "encoder_epochs=2"]).unwrap();
    let s = cmd_pretrain(&cfg).unwrap();
    assert_eq!((s[0].n, s[0].str_dim), (2708, 32));
}

#[test]
fn ten_seeds_give_ten_rows_and_an_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = fixture(tmp.path());
    cfg.set("seeds", "0..10").unwrap();
    cfg.set("model", "gcn").unwrap();
    let out = cmd_train(&cfg, &[None], false).unwrap();
    assert_eq!(out.len(), 1);
    let lines = csv_lines(&out[0].csv);
    assert_eq!(lines.len(), 1 + 10 + 1);
    assert!(lines[0].starts_with("dataset,model,seed,split,micro,macro,head_micro,tail_micro,config_hash"));
    assert!(lines[11].starts_with("toy,gcn,mean,test,"));
    let hash = cfg.hash();
    assert!(lines[1..].iter().all(|l| l.ends_with(&hash)));
}

#[test]
fn ablation_grid_runs_five_configurations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path());
    let variants = parse_ablations("grid").unwrap();
    let out = cmd_train(&cfg, &variants, false).unwrap();
    let labels: Vec<&str> = out.iter().map(|s| s.label.as_str()).collect();
    assert_eq!(labels, ["herb[A]", "herb[A_he]", "herb[B]", "herb[B_ho]", "herb[A_he+B_ho]"]);
    let hashes: std::collections::BTreeSet<_> = out.iter().map(|s| s.config_hash.clone()).collect();
    assert_eq!(hashes.len(), 5);
    assert!(parse_ablations("A,bogus").is_err());
}

#[test]
fn identical_hash_gives_identical_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let a = fixture(tmp.path());
    let mut b = a.clone();
    b.output = tmp.path().join("out2");
    b.cache_dir = Some(tmp.path().join("other_cache"));
    assert_eq!(a.hash(), b.hash());
    let ra = cmd_train(&a, &[None], false).unwrap();
    let rb = cmd_train(&b, &[None], false).unwrap();
    assert_eq!(fs::read(&ra[0].csv).unwrap(), fs::read(&rb[0].csv).unwrap());
}

#[test]
fn checkpoints_reproduce_training_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path());
    let trained = cmd_train(&cfg, &[None], true).unwrap().remove(0);
    let evaluated = cmd_eval(&cfg, &cfg.output.join("checkpoints")).unwrap();
    let micro = |rows: &[herb::metrics::ReportRow]| rows.iter().map(|r| r.micro).collect::<Vec<_>>();
    assert_eq!(micro(&trained.rows), micro(&evaluated.rows));

    let mut changed = cfg.clone();
    changed.set("mu", "0.5").unwrap();
    assert!(matches!(cmd_eval(&changed, &cfg.output.join("checkpoints")), Err(HerbError::Config(_))));
}

#[test]
fn augmentation_diff_lists_every_edit() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = fixture(tmp.path());
    cfg.set("seeds", "3").unwrap();
    cfg.set("restrict_to_train", "false").unwrap();
    let path = tmp.path().join("diff.txt");
    let s = cmd_augment(&cfg, Some(&path)).unwrap().remove(0);
    let lines = csv_lines(&path);
    assert_eq!(lines.len(), s.added + s.removed);
    assert!(s.added + s.removed > 0);
    for l in &lines {
        let parts: Vec<&str> = l.split(' ').collect();
        assert_eq!(parts.len(), 3);
        assert!(parts[0] == "add" || parts[0] == "remove");
        let (u, v): (usize, usize) = (parts[1].parse().unwrap(), parts[2].parse().unwrap());
        assert!(u < v && v < 48);
    }
}

#[test]
fn sweep_grids_have_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = fixture(tmp.path());
    cfg.apply_overrides(&["seeds=0", "epochs=3"]).unwrap();
    for (param, spec, rows) in [
        ("t_hete", "0..0.5:0.1", 6),
        ("alpha", "0.05..0.95:0.05", 19),
        ("mu", "0.001..0.01:0.001", 10),
    ] {
        let out = cmd_sweep(&cfg, &[(param.to_string(), parse_sweep_values(spec).unwrap())]).unwrap();
        assert_eq!(out.rows.len(), rows, "{param}");
        assert_eq!(csv_lines(&out.path).len(), rows + 1);
        assert!(out.rows.iter().all(|r| r.param == param && r.seeds == 1));
    }
    let two = cmd_sweep(
        &cfg,
        &[
            ("alpha".into(), vec!["0.2".into(), "0.8".into()]),
            ("beta".into(), vec!["0.3".into(), "0.7".into()]),
        ],
    )
    .unwrap();
    assert_eq!(two.rows.len(), 4);
}

#[test]
fn unknown_sweep_parameter_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path());
    let e = cmd_sweep(&cfg, &[("t_hetero".into(), vec!["0.1".into()])]).unwrap_err();
    assert!(matches!(e, HerbError::Config(ref m) if m.contains("t_hetero")));
    assert!(!cfg.output.exists());
}

#[test]
fn exit_codes_follow_failure_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path());
    let root = cfg.data_root().display().to_string();
    let out = cfg.output.display().to_string();
    let run = |dataset: &str, extra: &[&str]| {
        let mut v = vec!["herb", "train", "--dataset", dataset, "--data-root", &root, "--output", &out, "--seeds", "0",
            "--set", "split_per_class=4", "--set", "split_val=0.2", "--set", "split_test=0.3"];
        v.extend_from_slice(extra);
        main_with_args(v)
    };
    assert_eq!(run("toy", &["--model", "gcn", "--set", "epochs=2"]), EXIT_OK);
    assert_eq!(run("toy", &["--model", "gcn", "--set", "lr=1e9", "--set", "epochs=30"]), EXIT_NUMERIC);
    assert_eq!(run("toy", &["--set", "bogus=1"]), EXIT_CONFIG);
    assert_eq!(run("missing", &[]), EXIT_CONFIG);
    assert_eq!(main_with_args(["herb", "frobnicate"]), EXIT_CONFIG);
}

#[test]
fn config_file_and_flags_compose() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path());
    let file = tmp.path().join("run.toml");
    fs::write(&file, cfg.to_toml()).unwrap();
    let out = cfg.output.display().to_string();
    let code = main_with_args([
        "herb",
        "train",
        "--config",
        file.to_str().unwrap(),
        "--model",
        "mlp",
        "--set",
        "hidden=8",
        "--seeds",
        "0",
    ]);
    assert_eq!(code, EXIT_OK);
    let lines = csv_lines(&Path::new(&out).join("toy_mlp.csv"));
    assert_eq!(lines.len(), 3);
    let mut expected = cfg.clone();
    expected.apply_overrides(&["model=mlp", "hidden=8"]).unwrap();
    assert!(lines[1].ends_with(&expected.hash()));
}
