use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingTable, WalkCorpus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Starting rate, decayed linearly towards `learning_rate * 1e-4`.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let ok = self.dim >= 2
            && self.window >= 1
            && self.negatives >= 1
            && self.epochs >= 1
            && self.learning_rate.is_finite()
            && self.learning_rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(EmbeddingError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub table: EmbeddingTable,
    /// Mean loss per (center, context) pair for each epoch.
    pub epoch_losses: Vec<f64>,
}

// Unigram^0.75 noise distribution sampled by inverse CDF.
struct NoiseSampler {
    cumulative: Vec<f64>,
    nodes: Vec<usize>,
}

impl NoiseSampler {
    fn new(counts: &[u64]) -> Self {
        let mut cumulative = Vec::new();
        let mut nodes = Vec::new();
        let mut acc = 0.0;
        for (node, &c) in counts.iter().enumerate() {
            if c > 0 {
                acc += (c as f64).powf(0.75);
                cumulative.push(acc);
                nodes.push(node);
            }
        }
        Self { cumulative, nodes }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty noise table");
        let draw = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= draw);
        self.nodes[idx.min(self.nodes.len() - 1)]
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Skip-gram with negative sampling, trained by single-threaded SGD.
///
/// Every node that occurs in the corpus gets a row in the table. Output is a
/// pure function of the corpus and config.
pub fn train_embeddings(corpus: &WalkCorpus, config: &TrainConfig) -> Result<TrainOutcome, EmbeddingError> {
    config.validate()?;
    let n = corpus.ids.len();
    let mut counts = vec![0u64; n];
    for walk in &corpus.walks {
        for &node in walk {
            counts[node as usize] += 1;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(EmbeddingError::EmptyCorpus);
    }

    let d = config.dim;
    let w = config.window;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<f32> = (0..n * d)
        .map(|_| (rng.gen::<f32>() - 0.5) / d as f32)
        .collect();
    let mut output = vec![0.0f32; n * d];
    let noise = NoiseSampler::new(&counts);

    let pairs_per_epoch: u64 = corpus
        .walks
        .iter()
        .map(|walk| {
            let len = walk.len();
            (0..len)
                .map(|i| (i.saturating_sub(w)..(i + w + 1).min(len)).len() as u64 - 1)
                .sum::<u64>()
        })
        .sum();
    let total_steps = (pairs_per_epoch * config.epochs as u64).max(1) as f64;
    let lr0 = config.learning_rate;
    let lr_floor = lr0 * 1e-4;

    let mut grad = vec![0.0f32; d];
    let mut step: u64 = 0;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut loss = 0.0f64;
        for walk in &corpus.walks {
            let len = walk.len();
            for i in 0..len {
                let center = walk[i] as usize;
                for j in i.saturating_sub(w)..(i + w + 1).min(len) {
                    if j == i {
                        continue;
                    }
                    let context = walk[j] as usize;
                    let lr = (lr0 * (1.0 - step as f64 / total_steps)).max(lr_floor) as f32;
                    step += 1;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let cin = &mut input[center * d..(center + 1) * d];
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0f32)
                        } else {
                            let neg = noise.sample(&mut rng);
                            if neg == context {
                                continue;
                            }
                            (neg, 0.0f32)
                        };
                        let tout = &mut output[target * d..(target + 1) * d];
                        let f: f32 = cin.iter().zip(tout.iter()).map(|(a, b)| a * b).sum();
                        loss -= if label > 0.5 {
                            log_sigmoid(f64::from(f))
                        } else {
                            log_sigmoid(-f64::from(f))
                        };
                        let g = (label - sigmoid(f)) * lr;
                        for x in 0..d {
                            grad[x] += g * tout[x];
                            tout[x] += g * cin[x];
                        }
                    }
                    for x in 0..d {
                        cin[x] += grad[x];
                    }
                }
            }
        }
        if !loss.is_finite() || !input.iter().all(|x| x.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        epoch_losses.push(if pairs_per_epoch == 0 {
            0.0
        } else {
            loss / pairs_per_epoch as f64
        });
    }

    let rows = (0..n)
        .filter(|&i| counts[i] > 0)
        .map(|i| (corpus.ids[i].clone(), input[i * d..(i + 1) * d].to_vec()))
        .collect();
    Ok(TrainOutcome {
        table: EmbeddingTable::new(d, rows),
        epoch_losses,
    })
}
