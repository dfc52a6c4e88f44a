//! Subcommands behind the `herb` binary.
//!
//! Each `cmd_*` function takes a resolved [`RunConfig`], writes its files
//! under `output` and returns a summary, so the commands can be driven from
//! tests as well as from [`main_with_args`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::augment::augment;
use crate::checkpoint::Checkpoint;
use crate::config::{parse_seeds, parse_sweep_values, RunConfig, DATA_ROOT_ENV};
use crate::encoders::EmbeddingCache;
use crate::error::{HerbError, Result};
use crate::graph::{edge_homophily, edge_homophily_of, load_dataset, make_splits, Graph};
use crate::metrics::{aggregate, mean_std, write_reports_json, write_rows_csv, EvalReport, ReportRow};
use crate::model::{Ablation, HerbParams, ModelKind};
use crate::pipeline::{evaluate, prepare, run, EmbeddingSource};
use crate::similarity::build_bundle;

/// Exit status for success, configuration or input errors, and numeric failures.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

pub fn exit_code(e: &HerbError) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_CONFIG
    }
}

#[derive(Debug, Parser)]
#[command(name = "herb", version, about = "Heterophily-lessening augmentation and head-to-tail transfer for node classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pre-train the structure and feature encoders and cache their embeddings.
    Pretrain(Common),
    /// Run the edge augmentation and report the edge diff.
    Augment {
        #[command(flatten)]
        common: Common,
        /// Write one "add u v" / "remove u v" line per edited edge.
        #[arg(long, value_name = "PATH")]
        emit_augmentation: Option<PathBuf>,
    },
    /// Train and evaluate over every seed.
    Train {
        #[command(flatten)]
        common: Common,
        /// Ablation variants of the herb model: "grid" or a list such as "A,A_he,full".
        #[arg(long)]
        ablation: Option<String>,
        /// Save the best parameters of each seed under <output>/checkpoints.
        #[arg(long)]
        checkpoint: bool,
    },
    /// Evaluate saved checkpoints without training.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to <output>/checkpoints.
        #[arg(long, value_name = "DIR")]
        checkpoint_dir: Option<PathBuf>,
    },
    /// Evaluate a grid over one or two parameters, all others fixed.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// name=lo..hi:step or name=v1,v2,... (at most twice).
        #[arg(long = "param", required = true, value_name = "NAME=VALUES")]
        params: Vec<String>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat TOML file of parameters; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    /// Directory holding one folder per dataset.
    #[arg(long, env = DATA_ROOT_ENV, value_name = "DIR")]
    pub data_root: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// "0..10" or "0,3,7".
    #[arg(long)]
    pub seeds: Option<String>,
    /// herb, gcn or mlp.
    #[arg(long)]
    pub model: Option<String>,
    /// Any parameter as key=value, e.g. --set mu=0.01 --set t_hete=0.2.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_toml_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.dataset {
            cfg.dataset = d.clone();
        }
        if let Some(r) = &self.data_root {
            cfg.data_root = Some(r.clone());
        }
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        if let Some(m) = &self.model {
            cfg.model = m.parse()?;
        }
        cfg.apply_overrides(&self.overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli.command) {
        Ok(report) => {
            print!("{report}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Pretrain(common) => {
            let cfg = common.resolve()?;
            let rows = cmd_pretrain(&cfg)?;
            let mut s = String::new();
            for r in rows {
                let state = if r.cached { "cached" } else { "trained" };
                let _ = writeln!(s, "seed {}: {state} z_str {}x{} z_fea {}x{}", r.seed, r.n, r.str_dim, r.n, r.fea_dim);
            }
            Ok(s)
        }
        Command::Augment { common, emit_augmentation } => {
            let cfg = common.resolve()?;
            let rows = cmd_augment(&cfg, emit_augmentation.as_deref())?;
            let mut s = String::new();
            for r in rows {
                let _ = writeln!(
                    s,
                    "seed {}: +{} -{} edges, homophily {:.4} -> {:.4}{}",
                    r.seed,
                    r.added,
                    r.removed,
                    r.homophily_before,
                    r.homophily_after,
                    r.path.map(|p| format!(" ({})", p.display())).unwrap_or_default()
                );
            }
            Ok(s)
        }
        Command::Train {
            common,
            ablation,
            checkpoint,
        } => {
            let cfg = common.resolve()?;
            let variants = match ablation {
                Some(a) => parse_ablations(a)?,
                None => vec![None],
            };
            let mut s = String::new();
            for summary in cmd_train(&cfg, &variants, *checkpoint)? {
                s.push_str(&summary.render());
            }
            Ok(s)
        }
        Command::Eval { common, checkpoint_dir } => {
            let cfg = common.resolve()?;
            let dir = checkpoint_dir.clone().unwrap_or_else(|| cfg.output.join("checkpoints"));
            Ok(cmd_eval(&cfg, &dir)?.render())
        }
        Command::Sweep { common, params } => {
            let cfg = common.resolve()?;
            let grid = params
                .iter()
                .map(|p| {
                    let (k, v) = p
                        .split_once('=')
                        .ok_or_else(|| HerbError::Config(format!("--param '{p}' is not name=values")))?;
                    Ok((k.trim().to_string(), parse_sweep_values(v)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let out = cmd_sweep(&cfg, &grid)?;
            let mut s = String::new();
            for r in &out.rows {
                let _ = writeln!(
                    s,
                    "{}={} {}: micro {:.4} ± {:.4}",
                    r.param,
                    r.value,
                    if r.param2.is_empty() { String::new() } else { format!("{}={}", r.param2, r.value2) },
                    r.micro_mean,
                    r.micro_std
                );
            }
            let _ = writeln!(s, "wrote {}", out.path.display());
            Ok(s)
        }
    }
}

/// `"grid"` expands to all five variants.
pub fn parse_ablations(spec: &str) -> Result<Vec<Option<Ablation>>> {
    if spec.trim().eq_ignore_ascii_case("grid") {
        return Ok(Ablation::GRID.into_iter().map(Some).collect());
    }
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map(Some))
        .collect()
}

fn load_graph_for(cfg: &RunConfig) -> Result<Graph> {
    load_dataset(cfg.data_root(), &cfg.dataset)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HerbError::io(dir, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainStatus {
    pub seed: u64,
    pub cached: bool,
    pub n: usize,
    pub str_dim: usize,
    pub fea_dim: usize,
}

pub fn cmd_pretrain(cfg: &RunConfig) -> Result<Vec<PretrainStatus>> {
    let g = load_graph_for(cfg)?;
    let cache = EmbeddingCache::new(cfg.cache_dir());
    let enc = &cfg.pipeline.encoder;
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let cached = cache
            .load(&cfg.dataset, seed, enc)?
            .is_some_and(|e| e.z_str.rows() == g.n() && e.z_fea.rows() == g.n());
        let masks = make_splits(&g, &cfg.pipeline.split_for(&cfg.dataset), seed)?;
        let e = cache.load_or_pretrain(&cfg.dataset, &g, &masks, enc, seed)?;
        eprintln!("pretrain {} seed {seed}: {}", cfg.dataset, if cached { "cached" } else { "trained" });
        out.push(PretrainStatus {
            seed,
            cached,
            n: e.z_str.rows(),
            str_dim: e.z_str.cols(),
            fea_dim: e.z_fea.cols(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSummary {
    pub seed: u64,
    pub added: usize,
    pub removed: usize,
    pub homophily_before: f64,
    pub homophily_after: f64,
    pub path: Option<PathBuf>,
}

/// With several seeds, `emit` gains a `_s<seed>` suffix per seed.
pub fn cmd_augment(cfg: &RunConfig, emit: Option<&Path>) -> Result<Vec<AugmentSummary>> {
    let g = load_graph_for(cfg)?;
    let cache = EmbeddingCache::new(cfg.cache_dir());
    let before = edge_homophily(&g)?;
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let masks = make_splits(&g, &cfg.pipeline.split_for(&cfg.dataset), seed)?;
        let enc = cache.load_or_pretrain(&cfg.dataset, &g, &masks, &cfg.pipeline.encoder, seed)?;
        let bundle = build_bundle(&enc.z_str, &enc.z_fea, cfg.pipeline.sigma)?;
        let aug = augment(&g, &bundle, &cfg.pipeline.augment, &masks, cfg.pipeline.train.augment)?;
        let after = edge_homophily_of(&aug.a_prime, g.labels())?;
        let path = match emit {
            Some(p) => {
                let p = if cfg.seeds.len() == 1 {
                    p.to_path_buf()
                } else {
                    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("augmentation");
                    let ext = p.extension().and_then(|s| s.to_str()).map(|e| format!(".{e}")).unwrap_or_default();
                    p.with_file_name(format!("{stem}_s{seed}{ext}"))
                };
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    ensure_dir(dir)?;
                }
                let mut body = String::new();
                for (u, v) in &aug.added {
                    let _ = writeln!(body, "add {u} {v}");
                }
                for (u, v) in &aug.removed {
                    let _ = writeln!(body, "remove {u} {v}");
                }
                std::fs::write(&p, body).map_err(|e| HerbError::io(&p, e))?;
                Some(p)
            }
            None => None,
        };
        out.push(AugmentSummary {
            seed,
            added: aug.added.len(),
            removed: aug.removed.len(),
            homophily_before: before,
            homophily_after: after,
            path,
        });
    }
    Ok(out)
}

/// Per-seed test rows of one configuration plus their aggregate.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub label: String,
    pub config_hash: String,
    pub test: Vec<EvalReport>,
    pub val: Vec<EvalReport>,
    /// Per-seed rows followed by the `seed = "mean"` row.
    pub rows: Vec<ReportRow>,
    pub micro_std: f64,
    pub macro_std: f64,
    pub csv: PathBuf,
}

impl TrainSummary {
    fn new(label: String, cfg: &RunConfig, val: Vec<EvalReport>, test: Vec<EvalReport>) -> Result<Self> {
        let (agg, micro_std, macro_std) = aggregate(&test)?;
        let mut rows: Vec<ReportRow> = test.iter().map(EvalReport::row).collect();
        rows.push(agg);
        let stem = format!("{}_{}", cfg.dataset, file_label(&label));
        ensure_dir(&cfg.output)?;
        let csv = cfg.output.join(format!("{stem}.csv"));
        write_rows_csv(&rows, &csv)?;
        let mut all = val.clone();
        all.extend(test.iter().cloned());
        write_reports_json(&all, &cfg.output.join(format!("{stem}.json")))?;
        Ok(TrainSummary {
            label,
            config_hash: cfg.hash(),
            test,
            val,
            rows,
            micro_std,
            macro_std,
            csv,
        })
    }

    pub fn aggregate_row(&self) -> &ReportRow {
        self.rows.last().expect("aggregate row present")
    }

    pub fn render(&self) -> String {
        let agg = self.aggregate_row();
        format!(
            "{} on {} [{}]: micro {:.2} ± {:.2}, macro {:.2} ± {:.2} over {} seeds ({})\n",
            self.label,
            agg.dataset,
            self.config_hash,
            100.0 * agg.micro,
            100.0 * self.micro_std,
            100.0 * agg.macro_,
            100.0 * self.macro_std,
            self.test.len(),
            self.csv.display()
        )
    }
}

fn variant_config(cfg: &RunConfig, ablation: Option<Ablation>) -> (String, RunConfig) {
    match ablation {
        Some(a) => {
            let mut c = cfg.clone();
            c.model = ModelKind::Herb;
            c.pipeline.train = c.pipeline.train.with_ablation(a);
            (format!("herb[{}]", a.label()), c)
        }
        None => (cfg.model.to_string(), cfg.clone()),
    }
}

/// `herb[A_he+B_ho]` becomes `herb_A_he_B_ho`.
fn file_label(label: &str) -> String {
    label.replace(']', "").replace(['[', '+'], "_")
}

fn checkpoint_path(dir: &Path, cfg: &RunConfig, label: &str, seed: u64) -> PathBuf {
    dir.join(format!("{}_{}_s{seed}.ckpt", cfg.dataset, file_label(label)))
}

/// Runs every variant over every seed. `None` is the configured model as is.
pub fn cmd_train(cfg: &RunConfig, variants: &[Option<Ablation>], checkpoint: bool) -> Result<Vec<TrainSummary>> {
    let g = load_graph_for(cfg)?;
    let cache = EmbeddingCache::new(cfg.cache_dir());
    let mut out = Vec::new();
    for &variant in variants {
        let (label, vcfg) = variant_config(cfg, variant);
        let hash = vcfg.hash();
        let (mut val, mut test) = (Vec::new(), Vec::new());
        for &seed in &vcfg.seeds {
            let r = run(
                &vcfg.dataset,
                &g,
                &vcfg.pipeline,
                vcfg.model,
                seed,
                EmbeddingSource::Cache(&cache),
                &hash,
            )?;
            eprintln!(
                "{label} {} seed {seed}: test micro {:.4} (best epoch {})",
                vcfg.dataset, r.test.micro_f1, r.outcome.best_epoch
            );
            if checkpoint {
                let path = checkpoint_path(&vcfg.output.join("checkpoints"), &vcfg, &label, seed);
                Checkpoint::new(vcfg.model, &hash, seed, r.outcome.best.clone()).save(&path)?;
            }
            let mut t = r.test;
            let mut v = r.val;
            t.model = label.clone();
            v.model = label.clone();
            val.push(v);
            test.push(t);
        }
        out.push(TrainSummary::new(label, &vcfg, val, test)?);
    }
    Ok(out)
}

/// Re-evaluates checkpoints written by `train --checkpoint` for the
/// configured model. The graph-side preparation is recomputed from the seed.
pub fn cmd_eval(cfg: &RunConfig, dir: &Path) -> Result<TrainSummary> {
    let g = load_graph_for(cfg)?;
    let cache = EmbeddingCache::new(cfg.cache_dir());
    let label = cfg.model.to_string();
    let hash = cfg.hash();
    let (mut val, mut test) = (Vec::new(), Vec::new());
    for &seed in &cfg.seeds {
        let path = checkpoint_path(dir, cfg, &label, seed);
        let ck = Checkpoint::load(&path)?;
        if ck.config_hash != hash {
            return Err(HerbError::Config(format!(
                "{} was trained with config {}, current config is {hash}",
                path.display(),
                ck.config_hash
            )));
        }
        let masks = make_splits(&g, &cfg.pipeline.split_for(&cfg.dataset), seed)?;
        let prepared = prepare(
            &cfg.dataset,
            &g,
            masks,
            &cfg.pipeline,
            cfg.model,
            seed,
            EmbeddingSource::Cache(&cache),
        )?;
        let expected = HerbParams::init(g.feature_dim(), cfg.pipeline.train.hidden, g.class_count(), prepared.context.is_some(), seed);
        if expected.params.len() != ck.params.params.len() {
            return Err(HerbError::Config(format!("{} does not match the model layout", path.display())));
        }
        let (v, t) = evaluate(&cfg.dataset, &g, &prepared, &ck.params, cfg.model, seed, &hash)?;
        val.push(v);
        test.push(t);
    }
    TrainSummary::new(format!("{label}_eval"), cfg, val, test)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub dataset: String,
    pub model: String,
    pub param: String,
    pub value: String,
    pub param2: String,
    pub value2: String,
    pub seeds: usize,
    pub micro_mean: f64,
    pub micro_std: f64,
    pub macro_mean: f64,
    pub macro_std: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub path: PathBuf,
}

/// One aggregate row per grid point. Unknown parameter names fail before
/// any training starts.
pub fn cmd_sweep(cfg: &RunConfig, grid: &[(String, Vec<String>)]) -> Result<SweepOutcome> {
    if grid.is_empty() || grid.len() > 2 {
        return Err(HerbError::Config(format!("sweep takes one or two parameters, got {}", grid.len())));
    }
    let mut points: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (name, values) in grid {
        let mut probe = cfg.clone();
        for v in values {
            probe.set(name, v)?;
        }
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((name.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    let g = load_graph_for(cfg)?;
    let cache = EmbeddingCache::new(cfg.cache_dir());
    let mut rows = Vec::new();
    for point in &points {
        let mut c = cfg.clone();
        for (k, v) in point {
            c.set(k, v)?;
        }
        c.validate()?;
        let hash = c.hash();
        let mut micro = Vec::new();
        let mut macro_ = Vec::new();
        for &seed in &c.seeds {
            let r = run(&c.dataset, &g, &c.pipeline, c.model, seed, EmbeddingSource::Cache(&cache), &hash)?;
            micro.push(r.test.micro_f1);
            macro_.push(r.test.macro_f1);
        }
        let (mm, ms) = mean_std(&micro);
        let (am, as_) = mean_std(&macro_);
        let (p1, v1) = point[0].clone();
        let (p2, v2) = point.get(1).cloned().unwrap_or_default();
        eprintln!("sweep {p1}={v1} {p2}{}{v2}: micro {mm:.4}", if p2.is_empty() { "" } else { "=" });
        rows.push(SweepRow {
            dataset: c.dataset.clone(),
            model: c.model.to_string(),
            param: p1,
            value: v1,
            param2: p2,
            value2: v2,
            seeds: c.seeds.len(),
            micro_mean: mm,
            micro_std: ms,
            macro_mean: am,
            macro_std: as_,
            config_hash: hash,
        });
    }
    ensure_dir(&cfg.output)?;
    let names: Vec<&str> = grid.iter().map(|(n, _)| n.as_str()).collect();
    let path = cfg.output.join(format!("{}_{}_sweep_{}.csv", cfg.dataset, cfg.model, names.join("_")));
    let io = |e: csv::Error| HerbError::Io {
        path: path.clone(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut w = csv::Writer::from_path(&path).map_err(io)?;
    for r in &rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| HerbError::io(&path, e))?;
    Ok(SweepOutcome { rows, path })
}
