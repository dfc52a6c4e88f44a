//! One seeded run: split, pre-train, augment, build the transfer context,
//! train and evaluate.

use serde::{Deserialize, Serialize};

use crate::augment::{augment, AugmentConfig, AugmentMode, AugmentationOutcome, EdgeSet};
use crate::encoders::{pretrain_encoders, EmbeddingCache, EncoderConfig, EncoderOutputs};
use crate::error::Result;
use crate::graph::{make_splits, partition_head_tail, Graph, HeadTailPartition, SplitMasks, SplitScheme};
use crate::metrics::EvalReport;
use crate::model::{predict, propagation_for, train_model, HerbParams, ModelKind, TrainConfig, TrainInputs, TrainOutcome};
use crate::similarity::{build_bundle, SimilarityBundle, DEFAULT_SIGMA};
use crate::transfer::{TransferConfig, TransferContext, TransferMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub encoder: EncoderConfig,
    pub augment: AugmentConfig,
    pub transfer: TransferConfig,
    pub train: TrainConfig,
    pub sigma: f64,
    pub split: Option<SplitScheme>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            encoder: EncoderConfig::default(),
            augment: AugmentConfig::default(),
            transfer: TransferConfig::default(),
            train: TrainConfig::default(),
            sigma: DEFAULT_SIGMA,
            split: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.augment.validate()?;
        self.transfer.validate()?;
        self.train.validate()
    }

    pub fn split_for(&self, dataset: &str) -> SplitScheme {
        self.split.unwrap_or_else(|| SplitScheme::for_dataset(dataset))
    }

    /// Whether the run needs pre-trained embeddings at all.
    pub fn needs_embeddings(&self, kind: ModelKind) -> bool {
        kind == ModelKind::Herb
            && (self.train.augment != AugmentMode::Off || self.train.transfer == TransferMode::Homophilic)
    }
}

/// Where pre-trained embeddings come from.
#[derive(Debug, Clone, Copy)]
pub enum EmbeddingSource<'a> {
    Train,
    Cache(&'a EmbeddingCache),
    Given(&'a EncoderOutputs),
}

/// Graph-derived inputs of one run, ready for the epoch loop.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub masks: SplitMasks,
    pub partition: HeadTailPartition,
    pub bundle: Option<SimilarityBundle>,
    pub augmentation: AugmentationOutcome,
    pub context: Option<TransferContext>,
    pub inputs: TrainInputs,
}

pub fn prepare(
    dataset: &str,
    g: &Graph,
    masks: SplitMasks,
    cfg: &PipelineConfig,
    kind: ModelKind,
    seed: u64,
    source: EmbeddingSource<'_>,
) -> Result<Prepared> {
    cfg.validate()?;
    let partition = partition_head_tail(g);
    let bundle = if cfg.needs_embeddings(kind) {
        let enc = match source {
            EmbeddingSource::Train => pretrain_encoders(g, &masks, &cfg.encoder, seed)?,
            EmbeddingSource::Cache(c) => c.load_or_pretrain(dataset, g, &masks, &cfg.encoder, seed)?,
            EmbeddingSource::Given(e) => e.clone(),
        };
        Some(build_bundle(&enc.z_str, &enc.z_fea, cfg.sigma)?)
    } else {
        None
    };
    let augment_mode = if kind == ModelKind::Herb { cfg.train.augment } else { AugmentMode::Off };
    let augmentation = match &bundle {
        Some(b) => augment(g, b, &cfg.augment, &masks, augment_mode)?,
        None => crate::augment::apply(g, EdgeSet::new(), EdgeSet::new())?,
    };
    let context = match (kind, cfg.train.transfer) {
        (ModelKind::Herb, TransferMode::Plain | TransferMode::Homophilic) => {
            let n = g.n();
            let s_sf = bundle
                .as_ref()
                .map(|b| b.s_sf.clone())
                .unwrap_or_else(|| crate::tensor::Matrix::zeros(n, n));
            Some(TransferContext::build(
                &augmentation.a_prime,
                &augmentation.a_dprime,
                &s_sf,
                &partition,
                &cfg.transfer,
                cfg.train.transfer,
            )?)
        }
        _ => None,
    };
    let propagation = propagation_for(kind, &cfg.train, &augmentation.a_dprime, context.as_ref())?;
    let inputs = TrainInputs::new(g, propagation);
    Ok(Prepared {
        masks,
        partition,
        bundle,
        augmentation,
        context,
        inputs,
    })
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub prepared: Prepared,
    pub outcome: TrainOutcome,
    pub val: EvalReport,
    pub test: EvalReport,
}

/// Full pipeline for one seed.
pub fn run(
    dataset: &str,
    g: &Graph,
    cfg: &PipelineConfig,
    kind: ModelKind,
    seed: u64,
    source: EmbeddingSource<'_>,
    config_hash: &str,
) -> Result<RunResult> {
    let masks = make_splits(g, &cfg.split_for(dataset), seed)?;
    let prepared = prepare(dataset, g, masks, cfg, kind, seed, source)?;
    let with_localizer = prepared.context.is_some();
    let model = HerbParams::init(g.feature_dim(), cfg.train.hidden, g.class_count(), with_localizer, seed);
    let outcome = train_model(model, &prepared.inputs, &prepared.masks, &cfg.train, seed)?;
    let (val, test) = evaluate(dataset, g, &prepared, &outcome.best, kind, seed, config_hash)?;
    Ok(RunResult {
        prepared,
        outcome,
        val,
        test,
    })
}

/// Validation and test reports of a trained model.
pub fn evaluate(
    dataset: &str,
    g: &Graph,
    prepared: &Prepared,
    model: &HerbParams,
    kind: ModelKind,
    seed: u64,
    config_hash: &str,
) -> Result<(EvalReport, EvalReport)> {
    let pred = predict(model, &prepared.inputs)?;
    let report = |split: &str, nodes: &[usize]| {
        EvalReport::compute(
            dataset,
            &kind.to_string(),
            seed,
            split,
            &pred,
            g.labels(),
            g.class_count(),
            nodes,
            &prepared.partition,
            config_hash,
        )
    };
    Ok((report("val", &prepared.masks.val)?, report("test", &prepared.masks.test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::synthetic::sbm_with_homophily;
    use crate::graph::SplitScheme;

    fn small_cfg() -> PipelineConfig {
        PipelineConfig {
            encoder: EncoderConfig {
                epochs: 20,
                ..EncoderConfig::default()
            },
            train: TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            },
            split: Some(SplitScheme::per_class_fractions(5, 0.2, 0.4)),
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn every_model_runs_end_to_end() {
        let g = sbm_with_homophily(60, 3, 5.0, 0.4, 1)
            .unwrap()
            .with_noisy_features(8, 0.5)
            .build()
            .unwrap();
        for kind in [ModelKind::Herb, ModelKind::Gcn, ModelKind::Mlp] {
            let r = run("toy", &g, &small_cfg(), kind, 3, EmbeddingSource::Train, "h").unwrap();
            assert_eq!(r.test.split, "test");
            assert!((0.0..=1.0).contains(&r.test.micro_f1));
            assert_eq!(r.prepared.context.is_some(), kind == ModelKind::Herb);
        }
    }

    #[test]
    fn baselines_skip_pretraining() {
        let cfg = PipelineConfig::default();
        assert!(!cfg.needs_embeddings(ModelKind::Gcn));
        assert!(cfg.needs_embeddings(ModelKind::Herb));
        let off = PipelineConfig {
            train: TrainConfig {
                augment: AugmentMode::Off,
                transfer: TransferMode::Plain,
                ..TrainConfig::default()
            },
            ..cfg
        };
        assert!(!off.needs_embeddings(ModelKind::Herb));
    }
}
