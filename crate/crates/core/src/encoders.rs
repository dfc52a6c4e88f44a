//! Pre-trained encoders: a 2-layer GCN link predictor for structural
//! embeddings and a linear classifier for feature embeddings.

use std::fs;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HerbError, Result};
use crate::graph::{Graph, SplitMasks};
use crate::rng::{glorot_uniform, seeded, HerbRng, Stream};
use crate::tensor::{AdamConfig, AdamState, BoundParams, Matrix, ParamId, ParamSet, Tape, Var};

/// `D̃^{-1/2}(A+I)D̃^{-1/2}` (or without the identity). Zero-degree rows
/// stay zero.
pub fn normalized_adjacency(adj: &Matrix, add_self_loops: bool) -> Matrix {
    let a = with_loops(adj, add_self_loops);
    let inv_sqrt: Vec<f64> = a
        .row_sums()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let n = a.rows();
    Matrix::from_fn(n, n, |i, j| {
        let v = a.get(i, j);
        if v == 0.0 {
            0.0
        } else {
            inv_sqrt[i] * v * inv_sqrt[j]
        }
    })
    .with_nonzero_index()
}

/// `D̃^{-1}(A+I)` (or without the identity): weighted mean over each row.
pub fn row_normalized_adjacency(adj: &Matrix, add_self_loops: bool) -> Matrix {
    let a = with_loops(adj, add_self_loops);
    let inv: Vec<f64> = a
        .row_sums()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    let n = a.rows();
    Matrix::from_fn(n, n, |i, j| a.get(i, j) * inv[i]).with_nonzero_index()
}

fn with_loops(adj: &Matrix, add_self_loops: bool) -> Matrix {
    let mut a = adj.clone();
    if add_self_loops {
        for i in 0..a.rows() {
            let v = a.get(i, i);
            a.set(i, i, v + 1.0);
        }
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GcnLayerParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl GcnLayerParams {
    pub fn init(params: &mut ParamSet, name: &str, in_dim: usize, out_dim: usize, rng: &mut HerbRng) -> Self {
        GcnLayerParams {
            weight: params.add(format!("{name}.weight"), glorot_uniform(in_dim, out_dim, rng)),
            bias: params.add(format!("{name}.bias"), Matrix::zeros(1, out_dim)),
        }
    }

    /// `prop · (x · W) + b`.
    pub fn forward<'t>(&self, p: &BoundParams<'t>, prop: &Var<'t>, x: &Var<'t>) -> Result<Var<'t>> {
        prop.matmul(&x.matmul(&p.get(self.weight))?)?.add_row(&p.get(self.bias))
    }

    /// `x · W + b` (no propagation).
    pub fn dense<'t>(&self, p: &BoundParams<'t>, x: &Var<'t>) -> Result<Var<'t>> {
        x.matmul(&p.get(self.weight))?.add_row(&p.get(self.bias))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            hidden: 32,
            epochs: 200,
            lr: 0.01,
            weight_decay: 5e-4,
            dropout: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutputs {
    pub z_str: Matrix,
    pub z_fea: Matrix,
}

fn check_loss(loss: &Var<'_>, epoch: usize) -> Result<()> {
    let v = loss.item();
    if v.is_finite() {
        Ok(())
    } else {
        Err(HerbError::Diverged {
            epoch,
            detail: format!("loss is {v}"),
        })
    }
}

/// Uniform random non-edges `(u, v)`, `u != v`. Falls back to any distinct
/// pair when the graph is too dense to find non-edges quickly.
fn sample_negatives(g: &Graph, count: usize, rng: &mut HerbRng) -> Vec<(usize, usize)> {
    let n = g.n();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut pair = None;
        for _ in 0..64 {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v && !g.has_edge(u, v) {
                pair = Some((u, v));
                break;
            }
        }
        let pair = pair.unwrap_or_else(|| {
            let u = rng.gen_range(0..n);
            (u, (u + 1 + rng.gen_range(0..n - 1)) % n)
        });
        out.push(pair);
    }
    out
}

struct StructureEncoder {
    params: ParamSet,
    l1: GcnLayerParams,
    l2: GcnLayerParams,
}

impl StructureEncoder {
    fn embed<'t>(
        &self,
        tape: &'t Tape,
        prop: &Var<'t>,
        x: &Var<'t>,
        dropout: f64,
        training: bool,
        rng: &mut HerbRng,
    ) -> Result<Var<'t>> {
        let p = tape.bind(&self.params);
        let h = self.l1.forward(&p, prop, x)?.relu();
        let h = h.dropout(dropout, training, rng)?;
        self.l2.forward(&p, prop, &h)
    }
}

/// Trains a 2-layer GCN (`f → hidden → hidden`) as a link predictor: binary
/// cross-entropy on inner products of observed edges against an equal
/// number of fresh random non-edges per epoch. Returns the final-layer
/// embeddings in evaluation mode.
pub fn pretrain_structure_encoder(g: &Graph, masks: &SplitMasks, cfg: &EncoderConfig, seed: u64) -> Result<Matrix> {
    if masks.train.is_empty() {
        return Err(HerbError::precondition("training mask is empty"));
    }
    if g.n() < 2 {
        return Err(HerbError::precondition("link prediction needs at least two nodes"));
    }
    let mut init = seeded(seed, Stream::StructureEncoder);
    let mut params = ParamSet::new();
    let l1 = GcnLayerParams::init(&mut params, "str1", g.feature_dim(), cfg.hidden, &mut init);
    let l2 = GcnLayerParams::init(&mut params, "str2", cfg.hidden, cfg.hidden, &mut init);
    let mut enc = StructureEncoder { params, l1, l2 };
    let mut adam = AdamState::new(AdamConfig::new(cfg.lr, cfg.weight_decay), &enc.params);

    let prop = Rc::new(normalized_adjacency(g.adjacency(), true));
    let feats = Rc::new(g.features().clone());
    let positives = g.edges();
    let mut neg_rng = seeded(seed, Stream::NegativeSampling);
    let mut drop_rng = seeded(seed, Stream::Dropout);

    for epoch in 0..cfg.epochs {
        let negatives = sample_negatives(g, positives.len().max(1), &mut neg_rng);
        let pairs: Vec<(usize, usize)> = positives.iter().chain(&negatives).copied().collect();
        let mut targets = vec![1.0; positives.len()];
        targets.resize(pairs.len(), 0.0);
        let src = Rc::new(pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let dst = Rc::new(pairs.iter().map(|p| p.1).collect::<Vec<_>>());

        let tape = Tape::new();
        let a = tape.constant_rc(prop.clone());
        let x = tape.constant_rc(feats.clone());
        let z = enc.embed(&tape, &a, &x, cfg.dropout, true, &mut drop_rng)?;
        let scores = z.gather_rows(src)?.row_dot(&z.gather_rows(dst)?)?;
        let loss = scores.bce_with_logits(Rc::new(targets))?;
        check_loss(&loss, epoch)?;
        tape.backward_into(loss, &mut enc.params)?;
        adam.step(&mut enc.params)?;
    }

    let tape = Tape::new();
    let a = tape.constant_rc(prop);
    let x = tape.constant_rc(feats);
    let z = enc.embed(&tape, &a, &x, 0.0, false, &mut drop_rng)?.value();
    if !z.all_finite() {
        return Err(HerbError::NonFinite("structural embeddings".into()));
    }
    Ok((*z).clone())
}

/// Trains a single linear layer `f → C` with cross-entropy on the training
/// mask and returns the pre-softmax logits of every node.
pub fn pretrain_feature_encoder(g: &Graph, masks: &SplitMasks, cfg: &EncoderConfig, seed: u64) -> Result<Matrix> {
    if masks.train.is_empty() {
        return Err(HerbError::precondition("training mask is empty"));
    }
    let mut init = seeded(seed, Stream::FeatureEncoder);
    let mut params = ParamSet::new();
    let layer = GcnLayerParams::init(&mut params, "fea", g.feature_dim(), g.class_count(), &mut init);
    let mut adam = AdamState::new(AdamConfig::new(cfg.lr, cfg.weight_decay), &params);
    let feats = Rc::new(g.features().clone());
    let labels = Rc::new(g.labels().to_vec());
    let train = Rc::new(masks.train.clone());
    let mut drop_rng = seeded(seed ^ 0x5eed, Stream::Dropout);

    for epoch in 0..cfg.epochs {
        let tape = Tape::new();
        let x = tape.constant_rc(feats.clone()).dropout(cfg.dropout, true, &mut drop_rng)?;
        let logits = layer.dense(&tape.bind(&params), &x)?;
        let loss = logits.softmax_cross_entropy(labels.clone(), train.clone())?;
        check_loss(&loss, epoch)?;
        tape.backward_into(loss, &mut params)?;
        adam.step(&mut params)?;
    }

    let tape = Tape::new();
    let x = tape.constant_rc(feats);
    let z = layer.dense(&tape.bind(&params), &x)?.value();
    if !z.all_finite() {
        return Err(HerbError::NonFinite("feature embeddings".into()));
    }
    Ok((*z).clone())
}

pub fn pretrain_encoders(g: &Graph, masks: &SplitMasks, cfg: &EncoderConfig, seed: u64) -> Result<EncoderOutputs> {
    Ok(EncoderOutputs {
        z_str: pretrain_structure_encoder(g, masks, cfg, seed)?,
        z_fea: pretrain_feature_encoder(g, masks, cfg, seed)?,
    })
}

/// CSV files `<dataset>_s<seed>_<cfg>_{zstr,zfea}.csv` under a directory,
/// where `<cfg>` is a short hash of the encoder configuration.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        EmbeddingCache { dir: dir.into() }
    }

    fn paths(&self, dataset: &str, seed: u64, cfg: &EncoderConfig) -> (PathBuf, PathBuf) {
        let json = serde_json::to_string(cfg).expect("config serialises");
        let digest = hex::encode(Sha256::digest(json.as_bytes()));
        let stem = format!("{dataset}_s{seed}_{}", &digest[..8]);
        (
            self.dir.join(format!("{stem}_zstr.csv")),
            self.dir.join(format!("{stem}_zfea.csv")),
        )
    }

    pub fn load(&self, dataset: &str, seed: u64, cfg: &EncoderConfig) -> Result<Option<EncoderOutputs>> {
        let (s, f) = self.paths(dataset, seed, cfg);
        if !s.exists() || !f.exists() {
            return Ok(None);
        }
        Ok(Some(EncoderOutputs {
            z_str: read_matrix_csv(&s)?,
            z_fea: read_matrix_csv(&f)?,
        }))
    }

    pub fn store(&self, dataset: &str, seed: u64, cfg: &EncoderConfig, out: &EncoderOutputs) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| HerbError::io(&self.dir, e))?;
        let (s, f) = self.paths(dataset, seed, cfg);
        write_matrix_csv(&out.z_str, &s)?;
        write_matrix_csv(&out.z_fea, &f)
    }

    /// Cached outputs if present, otherwise pre-trains and stores them.
    pub fn load_or_pretrain(
        &self,
        dataset: &str,
        g: &Graph,
        masks: &SplitMasks,
        cfg: &EncoderConfig,
        seed: u64,
    ) -> Result<EncoderOutputs> {
        if let Some(out) = self.load(dataset, seed, cfg)? {
            if out.z_str.rows() == g.n() && out.z_fea.rows() == g.n() {
                return Ok(out);
            }
        }
        let out = pretrain_encoders(g, masks, cfg, seed)?;
        self.store(dataset, seed, cfg, &out)?;
        Ok(out)
    }
}

/// Headerless CSV, one matrix row per line. Values round-trip exactly.
pub fn write_matrix_csv(m: &Matrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HerbError::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|e| HerbError::Parse {
                    path: path.to_path_buf(),
                    line: k + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

fn csv_err(path: &Path, e: csv::Error) -> HerbError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    HerbError::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}
