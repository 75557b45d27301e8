//! Mini-batch Adam training of the subword table under the triplet loss.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{triplet_loss, triplet_loss_gradients};
use super::subword::{FeatureHasher, SubwordEmbedder};
use super::{EmbedError, Encoder};
use crate::tripletgen::TripletDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup_fraction: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.1,
            epochs: 5,
            batch_size: 32,
            learning_rate: 2e-5,
            warmup_fraction: 0.10,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |msg: &str| Err(EmbedError::InvalidConfig(msg.to_string()));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.margin) {
            return bad("margin must be positive");
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return bad("warmup fraction must lie in [0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !positive(self.learning_rate) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !positive(self.adam_eps) {
            return bad("Adam epsilon must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-triplet loss over the epoch, measured before each update.
    pub train_loss: f64,
    /// Mean per-triplet loss on the dev set after the epoch, when one is given.
    pub dev_loss: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

/// Caches feature lists; triplet datasets repeat the same labels many times.
struct FeatureCache {
    hasher: FeatureHasher,
    map: HashMap<String, Vec<usize>>,
}

impl FeatureCache {
    fn get(&mut self, text: &str) -> &[usize] {
        if !self.map.contains_key(text) {
            let f = self.hasher.features(text);
            self.map.insert(text.to_string(), f);
        }
        &self.map[text]
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    /// Rows with a non-zero moment; all other rows receive a zero update.
    live: Vec<bool>,
    live_rows: Vec<usize>,
    step: i32,
}

impl Adam {
    fn new(len: usize, rows: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            live: vec![false; rows],
            live_rows: Vec::new(),
            step: 0,
        }
    }

    fn mark(&mut self, row: usize) {
        if !self.live[row] {
            self.live[row] = true;
            self.live_rows.push(row);
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], dim: usize, lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.adam_beta1.powi(self.step);
        let bc2 = 1.0 - cfg.adam_beta2.powi(self.step);
        for &row in &self.live_rows {
            for i in row * dim..(row + 1) * dim {
                let g = grad[i];
                self.m[i] = cfg.adam_beta1 * self.m[i] + (1.0 - cfg.adam_beta1) * g;
                self.v[i] = cfg.adam_beta2 * self.v[i] + (1.0 - cfg.adam_beta2) * g * g;
                let m_hat = self.m[i] / bc1;
                let v_hat = self.v[i] / bc2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            }
        }
    }
}

/// Learning rate at 0-based `step`: linear ramp from 0 over the warm-up
/// steps, constant afterwards.
fn scheduled_lr(cfg: &TrainConfig, step: usize, warmup_steps: usize) -> f64 {
    if step < warmup_steps {
        cfg.learning_rate * step as f64 / warmup_steps as f64
    } else {
        cfg.learning_rate
    }
}

fn mean_loss(
    model: &SubwordEmbedder,
    cache: &mut FeatureCache,
    data: &TripletDataset,
    margin: f64,
) -> Result<f64, EmbedError> {
    let mut total = 0.0;
    for t in &data.entries {
        let a = model.pool(cache.get(&t.anchor));
        let p = model.pool(cache.get(&t.positive));
        let n = model.pool(cache.get(&t.negative));
        total += triplet_loss(&a, &p, &n, margin)?;
    }
    Ok(total / data.len() as f64)
}

/// Trains `model` in place.
///
/// Each row gradient is the pooled-vector gradient divided by the feature
/// count of the text (mean pooling), averaged over the batch. Triplet order
/// is reshuffled every epoch from `cfg.seed`.
pub fn train(
    model: &mut SubwordEmbedder,
    train_set: &TripletDataset,
    dev_set: &TripletDataset,
    cfg: &TrainConfig,
) -> Result<TrainHistory, EmbedError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(EmbedError::EmptyDataset);
    }
    let mut history = TrainHistory::default();
    if cfg.epochs == 0 {
        return Ok(history);
    }

    let dim = model.dimension();
    let mut cache = FeatureCache {
        hasher: model.hasher(),
        map: HashMap::new(),
    };

    let n = train_set.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let warmup_steps = (cfg.warmup_fraction * total_steps as f64).ceil() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; model.table.len()];
    let mut adam = Adam::new(model.table.len(), model.bucket_count());
    let mut touched: Vec<usize> = Vec::new();
    let mut step = 0usize;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;

        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &idx in batch {
                let t = &train_set.entries[idx];
                let fa = cache.get(&t.anchor).to_vec();
                let fp = cache.get(&t.positive).to_vec();
                let fneg = cache.get(&t.negative).to_vec();
                let g = triplet_loss_gradients(
                    &model.pool(&fa),
                    &model.pool(&fp),
                    &model.pool(&fneg),
                    cfg.margin,
                )?;
                epoch_loss += g.loss;
                if g.loss == 0.0 {
                    continue;
                }
                for (feats, pooled_grad) in [(&fa, &g.anchor), (&fp, &g.positive), (&fneg, &g.negative)] {
                    if feats.is_empty() {
                        continue;
                    }
                    let w = scale / feats.len() as f64;
                    for &row in feats.iter() {
                        let slot = &mut grad[row * dim..(row + 1) * dim];
                        for (s, pg) in slot.iter_mut().zip(pooled_grad) {
                            *s += w * pg;
                        }
                        touched.push(row);
                        adam.mark(row);
                    }
                }
            }

            let lr = scheduled_lr(cfg, step, warmup_steps);
            adam.update(&mut model.table, &grad, dim, lr, cfg);
            for &row in &touched {
                grad[row * dim..(row + 1) * dim].fill(0.0);
            }
            touched.clear();
            step += 1;
        }

        let dev_loss = if dev_set.is_empty() {
            None
        } else {
            Some(mean_loss(model, &mut cache, dev_set, cfg.margin)?)
        };
        let stats = EpochStats {
            epoch,
            train_loss: epoch_loss / n as f64,
            dev_loss,
            steps: steps_per_epoch,
        };
        log::info!(
            "epoch {} train_loss {:.6} dev_loss {:?}",
            stats.epoch,
            stats.train_loss,
            stats.dev_loss
        );
        history.epochs.push(stats);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tripletgen::TripletExample;

    fn toy() -> TripletDataset {
        TripletDataset {
            entries: vec![
                TripletExample::new("alpha", "alfa", "omega"),
                TripletExample::new("omega", "omegga", "alpha"),
                TripletExample::new("beta", "betta", "gamma"),
                TripletExample::new("gamma", "gama", "beta"),
            ],
            seed: 0,
        }
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-2,
            batch_size: 2,
            epochs: 20,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_is_noop() {
        let mut m = SubwordEmbedder::new(256, 8, 1).unwrap();
        let before = m.clone();
        let h = train(
            &mut m,
            &toy(),
            &TripletDataset::default(),
            &TrainConfig {
                epochs: 0,
                ..cfg()
            },
        )
        .unwrap();
        assert!(h.epochs.is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn empty_training_set() {
        let mut m = SubwordEmbedder::new(16, 2, 1).unwrap();
        let err = train(&mut m, &TripletDataset::default(), &TripletDataset::default(), &cfg())
            .unwrap_err();
        assert!(matches!(err, EmbedError::EmptyDataset));
    }

    #[test]
    fn invalid_margin() {
        let mut m = SubwordEmbedder::new(16, 2, 1).unwrap();
        let bad = TrainConfig {
            margin: 0.0,
            ..cfg()
        };
        assert!(matches!(
            train(&mut m, &toy(), &toy(), &bad),
            Err(EmbedError::InvalidConfig(_))
        ));
    }

    #[test]
    fn loss_goes_down_and_is_reproducible() {
        let mut a = SubwordEmbedder::new(512, 8, 3).unwrap();
        let mut b = a.clone();
        let ha = train(&mut a, &toy(), &toy(), &cfg()).unwrap();
        let hb = train(&mut b, &toy(), &toy(), &cfg()).unwrap();
        assert_eq!(ha, hb);
        let bits = |m: &SubwordEmbedder| m.table().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let first = ha.epochs.first().unwrap().train_loss;
        let last = ha.epochs.last().unwrap().train_loss;
        assert!(last < first, "{first} -> {last}");
        assert!(ha.epochs.iter().all(|e| e.dev_loss.is_some()));
    }

    #[test]
    fn warmup_ramp() {
        let c = TrainConfig {
            learning_rate: 1.0,
            ..Default::default()
        };
        assert_eq!(scheduled_lr(&c, 0, 4), 0.0);
        assert_eq!(scheduled_lr(&c, 2, 4), 0.5);
        assert_eq!(scheduled_lr(&c, 4, 4), 1.0);
        assert_eq!(scheduled_lr(&c, 100, 4), 1.0);
        assert_eq!(scheduled_lr(&c, 0, 0), 1.0);
    }
}
