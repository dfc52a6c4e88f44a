//! Flat key-value run configuration with a canonical hash.
//!
//! Every tunable is addressed by one lowercase key (`lr`, `t_hete`,
//! `alpha`, ...). Files are flat TOML; command-line overrides and sweeps go
//! through the same [`RunConfig::set`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::augment::AugmentMode;
use crate::error::{HerbError, Result};
use crate::graph::{SplitScheme, SplitSize};
use crate::model::ModelKind;
use crate::pipeline::PipelineConfig;
use crate::transfer::TransferMode;

/// Environment variable naming the directory that holds dataset folders.
pub const DATA_ROOT_ENV: &str = "HERB_DATA_ROOT";

/// Keys that shape the metrics of a run and therefore enter the hash.
pub const HASHED_KEYS: &[&str] = &[
    "dataset",
    "model",
    "lr",
    "weight_decay",
    "dropout",
    "epochs",
    "early_stop_window",
    "lambda",
    "mu",
    "hidden",
    "augment",
    "transfer",
    "add_pct",
    "remove_pct",
    "t_hete",
    "t_homo",
    "restrict_to_train",
    "alpha",
    "beta",
    "k",
    "sigma",
    "encoder_hidden",
    "encoder_epochs",
    "encoder_lr",
    "encoder_weight_decay",
    "encoder_dropout",
    "split_per_class",
    "split_val",
    "split_test",
];

/// Bookkeeping keys: where things live, not what is computed.
pub const PLUMBING_KEYS: &[&str] = &["data_root", "output", "cache_dir", "seeds"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: String,
    /// Falls back to `$HERB_DATA_ROOT`, then `./data`.
    pub data_root: Option<PathBuf>,
    pub output: PathBuf,
    /// Defaults to `<output>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub model: ModelKind,
    pub pipeline: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: String::new(),
            data_root: None,
            output: PathBuf::from("results"),
            cache_dir: None,
            seeds: (0..10).collect(),
            model: ModelKind::Herb,
            pipeline: PipelineConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> HerbError {
    HerbError::Config(msg.into())
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| config_err(format!("{key}: expected a number, got '{v}'")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| config_err(format!("{key}: expected a nonnegative integer, got '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(config_err(format!("{key}: expected true/false, got '{v}'"))),
    }
}

/// `"0.1"` is a fraction of `n`, `"500"` a node count.
fn parse_split_size(key: &str, v: &str) -> Result<SplitSize> {
    let v = v.trim();
    if v.contains('.') || v.contains('e') {
        let f = parse_f64(key, v)?;
        if !(0.0..1.0).contains(&f) {
            return Err(config_err(format!("{key}: fraction must lie in [0, 1), got {f}")));
        }
        Ok(SplitSize::Fraction(f))
    } else {
        Ok(SplitSize::Count(parse_usize(key, v)?))
    }
}

fn fmt_split_size(s: SplitSize) -> String {
    match s {
        SplitSize::Fraction(f) => format!("{f:?}"),
        SplitSize::Count(c) => c.to_string(),
    }
}

pub fn parse_augment_mode(v: &str) -> Result<AugmentMode> {
    match v.trim() {
        "off" => Ok(AugmentMode::Off),
        "plain" => Ok(AugmentMode::Plain),
        "heterophily_lessening" | "he" => Ok(AugmentMode::HeterophilyLessening),
        other => Err(config_err(format!(
            "augment: unknown mode '{other}' (off, plain, heterophily_lessening)"
        ))),
    }
}

pub fn augment_mode_name(m: AugmentMode) -> &'static str {
    match m {
        AugmentMode::Off => "off",
        AugmentMode::Plain => "plain",
        AugmentMode::HeterophilyLessening => "heterophily_lessening",
    }
}

pub fn parse_transfer_mode(v: &str) -> Result<TransferMode> {
    match v.trim() {
        "off" => Ok(TransferMode::Off),
        "plain" => Ok(TransferMode::Plain),
        "homophilic" | "ho" => Ok(TransferMode::Homophilic),
        other => Err(config_err(format!("transfer: unknown mode '{other}' (off, plain, homophilic)"))),
    }
}

pub fn transfer_mode_name(m: TransferMode) -> &'static str {
    match m {
        TransferMode::Off => "off",
        TransferMode::Plain => "plain",
        TransferMode::Homophilic => "homophilic",
    }
}

impl RunConfig {
    pub fn for_dataset(name: &str) -> Self {
        RunConfig {
            dataset: name.into(),
            ..RunConfig::default()
        }
    }

    /// Reads a flat TOML file. Tables are rejected; every value is routed
    /// through [`RunConfig::set`].
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HerbError::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_toml(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
        for (key, value) in &table {
            let v = match value {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => format!("{f:?}"),
                toml::Value::Boolean(b) => b.to_string(),
                toml::Value::Array(items) => items
                    .iter()
                    .map(|i| match i {
                        toml::Value::Integer(x) => Ok(x.to_string()),
                        other => Err(config_err(format!("{key}: unsupported list item {other}"))),
                    })
                    .collect::<Result<Vec<_>>>()?
                    .join(","),
                other => return Err(config_err(format!("{key}: nested value {other} is not allowed"))),
            };
            self.set(key, &v)?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| config_err(format!("override '{o}' is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    fn split_mut(&mut self) -> &mut SplitScheme {
        let dataset = self.dataset.clone();
        self.pipeline
            .split
            .get_or_insert_with(|| SplitScheme::for_dataset(&dataset))
    }

    /// Sets one key. Unknown keys are configuration errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase();
        let k = key.as_str();
        let p = &mut self.pipeline;
        match k {
            "dataset" => self.dataset = value.trim().into(),
            "data_root" => self.data_root = Some(PathBuf::from(value.trim())),
            "output" => self.output = PathBuf::from(value.trim()),
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value.trim())),
            "seeds" => self.seeds = parse_seeds(value)?,
            "model" => self.model = value.trim().parse()?,
            "lr" => p.train.lr = parse_f64(k, value)?,
            "weight_decay" => p.train.weight_decay = parse_f64(k, value)?,
            "dropout" => p.train.dropout = parse_f64(k, value)?,
            "epochs" => p.train.epochs = parse_usize(k, value)?,
            "early_stop_window" => p.train.early_stop_window = parse_usize(k, value)?,
            "lambda" => p.train.lambda = parse_f64(k, value)?,
            "mu" => p.train.mu = parse_f64(k, value)?,
            "hidden" => p.train.hidden = parse_usize(k, value)?,
            "augment" => p.train.augment = parse_augment_mode(value)?,
            "transfer" => p.train.transfer = parse_transfer_mode(value)?,
            "add_pct" => p.augment.add_pct = parse_f64(k, value)?,
            "remove_pct" => p.augment.remove_pct = parse_f64(k, value)?,
            "t_hete" => p.augment.t_hete = parse_f64(k, value)?,
            "t_homo" => p.augment.t_homo = parse_f64(k, value)?,
            "restrict_to_train" => p.augment.restrict_to_train = parse_bool(k, value)?,
            "alpha" => p.transfer.alpha = parse_f64(k, value)?,
            "beta" => p.transfer.beta = parse_f64(k, value)?,
            "k" => {
                p.transfer.k = match value.trim() {
                    "auto" => None,
                    v => Some(parse_usize(k, v)?),
                }
            }
            "sigma" => p.sigma = parse_f64(k, value)?,
            "encoder_hidden" => p.encoder.hidden = parse_usize(k, value)?,
            "encoder_epochs" => p.encoder.epochs = parse_usize(k, value)?,
            "encoder_lr" => p.encoder.lr = parse_f64(k, value)?,
            "encoder_weight_decay" => p.encoder.weight_decay = parse_f64(k, value)?,
            "encoder_dropout" => p.encoder.dropout = parse_f64(k, value)?,
            "split_per_class" => self.split_mut().per_class = parse_usize(k, value)?,
            "split_val" => self.split_mut().val = parse_split_size(k, value)?,
            "split_test" => self.split_mut().test = parse_split_size(k, value)?,
            other => {
                return Err(config_err(format!(
                    "unknown parameter '{other}'; known: {}",
                    HASHED_KEYS.iter().chain(PLUMBING_KEYS).copied().collect::<Vec<_>>().join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Current value of a key in canonical text form.
    pub fn get(&self, key: &str) -> Result<String> {
        let p = &self.pipeline;
        let f = |x: f64| format!("{x:?}");
        let split = self.pipeline.split_for(&self.dataset);
        Ok(match key {
            "dataset" => self.dataset.clone(),
            "data_root" => self.data_root().display().to_string(),
            "output" => self.output.display().to_string(),
            "cache_dir" => self.cache_dir().display().to_string(),
            "seeds" => self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            "model" => self.model.to_string(),
            "lr" => f(p.train.lr),
            "weight_decay" => f(p.train.weight_decay),
            "dropout" => f(p.train.dropout),
            "epochs" => p.train.epochs.to_string(),
            "early_stop_window" => p.train.early_stop_window.to_string(),
            "lambda" => f(p.train.lambda),
            "mu" => f(p.train.mu),
            "hidden" => p.train.hidden.to_string(),
            "augment" => augment_mode_name(p.train.augment).into(),
            "transfer" => transfer_mode_name(p.train.transfer).into(),
            "add_pct" => f(p.augment.add_pct),
            "remove_pct" => f(p.augment.remove_pct),
            "t_hete" => f(p.augment.t_hete),
            "t_homo" => f(p.augment.t_homo),
            "restrict_to_train" => p.augment.restrict_to_train.to_string(),
            "alpha" => f(p.transfer.alpha),
            "beta" => f(p.transfer.beta),
            "k" => p.transfer.k.map_or_else(|| "auto".into(), |k| k.to_string()),
            "sigma" => f(p.sigma),
            "encoder_hidden" => p.encoder.hidden.to_string(),
            "encoder_epochs" => p.encoder.epochs.to_string(),
            "encoder_lr" => f(p.encoder.lr),
            "encoder_weight_decay" => f(p.encoder.weight_decay),
            "encoder_dropout" => f(p.encoder.dropout),
            "split_per_class" => split.per_class.to_string(),
            "split_val" => fmt_split_size(split.val),
            "split_test" => fmt_split_size(split.test),
            other => return Err(config_err(format!("unknown parameter '{other}'"))),
        })
    }

    /// Canonical key-value set of the hashed keys.
    pub fn canonical(&self) -> BTreeMap<&'static str, String> {
        HASHED_KEYS
            .iter()
            .map(|&k| (k, self.get(k).expect("hashed keys are known")))
            .collect()
    }

    /// First 16 hex digits of the SHA-256 of the canonical `key=value` lines.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.canonical() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())[..16].to_string()
    }

    /// Flat TOML of every key, loadable by [`RunConfig::from_toml_file`].
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        for &k in PLUMBING_KEYS.iter().chain(HASHED_KEYS) {
            let unset = match k {
                "data_root" => self.data_root.is_none(),
                "cache_dir" => self.cache_dir.is_none(),
                "split_per_class" | "split_val" | "split_test" => self.pipeline.split.is_none(),
                _ => false,
            };
            if unset {
                continue;
            }
            let v = self.get(k).expect("known key");
            let quoted = match k {
                "seeds" => format!("[{}]", v.replace(',', ", ")),
                "epochs" | "early_stop_window" | "hidden" | "encoder_hidden" | "encoder_epochs" | "split_per_class" => v,
                "restrict_to_train" => v,
                "split_val" | "split_test" if !v.contains('.') => v,
                "k" if v != "auto" => v,
                _ if v.parse::<f64>().is_ok() && v.contains('.') => v,
                _ => format!("{v:?}"),
            };
            out.push_str(&format!("{k} = {quoted}\n"));
        }
        out
    }

    pub fn data_root(&self) -> PathBuf {
        self.data_root
            .clone()
            .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data"))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output.join("cache"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.is_empty() {
            return Err(config_err("no dataset given"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seed list is empty"));
        }
        self.pipeline.validate()
    }
}

/// `"0,1,2"`, `"0..10"` (half-open) or a mix of both.
pub fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || config_err(format!("seeds: cannot parse '{part}'"));
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(config_err("seed list is empty"));
    }
    Ok(out)
}

/// Sweep values: `"lo..hi:step"` (inclusive) or a comma list.
pub fn parse_sweep_values(spec: &str) -> Result<Vec<String>> {
    let spec = spec.trim();
    if let Some((range, step)) = spec.split_once(':') {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| config_err(format!("range '{spec}' is not lo..hi:step")))?;
        let lo = parse_f64("range", lo)?;
        let hi = parse_f64("range", hi)?;
        let step = parse_f64("range", step)?;
        if step.is_nan() || step <= 0.0 || hi < lo {
            return Err(config_err(format!("range '{spec}' needs lo <= hi and step > 0")));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count)
            .map(|i| {
                let v = ((lo + i as f64 * step) * 1e9).round() / 1e9;
                format!("{v:?}")
            })
            .collect());
    }
    let values: Vec<String> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    if values.is_empty() {
        return Err(config_err("empty sweep value list"));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_round_trip_for_every_key() {
        let mut c = RunConfig::for_dataset("toy");
        for &k in HASHED_KEYS {
            let v = c.get(k).unwrap();
            c.set(k, &v).unwrap();
            assert_eq!(c.get(k).unwrap(), v, "{k}");
        }
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let mut c = RunConfig::default();
        assert!(matches!(c.set("t_hetero", "0.1"), Err(HerbError::Config(_))));
    }

    #[test]
    fn hash_ignores_plumbing_and_tracks_hyperparameters() {
        let a = RunConfig::for_dataset("cora");
        let mut b = a.clone();
        b.set("output", "elsewhere").unwrap();
        b.set("seeds", "3,4").unwrap();
        assert_eq!(a.hash(), b.hash());
        b.set("mu", "0.006").unwrap();
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn toml_round_trip() {
        let mut a = RunConfig::for_dataset("texas");
        a.set("alpha", "0.35").unwrap();
        a.set("k", "7").unwrap();
        a.set("split_val", "0.15").unwrap();
        a.set("seeds", "0..3").unwrap();
        let mut b = RunConfig::default();
        b.apply_toml(&a.to_toml()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn sweep_ranges_are_inclusive() {
        assert_eq!(parse_sweep_values("0..0.5:0.1").unwrap().len(), 6);
        let alpha = parse_sweep_values("0.05..0.95:0.05").unwrap();
        assert_eq!(alpha.len(), 19);
        assert_eq!(alpha[18], "0.95");
        assert_eq!(parse_sweep_values("0.001..0.01:0.001").unwrap().len(), 10);
        assert_eq!(parse_sweep_values("1,2,5").unwrap(), ["1", "2", "5"]);
    }

    #[test]
    fn seeds_accept_ranges_and_lists() {
        assert_eq!(parse_seeds("0..3,7").unwrap(), vec![0, 1, 2, 7]);
        assert!(parse_seeds("").is_err());
    }
}
