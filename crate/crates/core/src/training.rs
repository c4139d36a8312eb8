//! Triplet-margin optimization of the skull head by mini-batch gradient
//! descent with analytic gradients. Only the anchor (skull) pathway is
//! trainable; positive and negative face embeddings are constants.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::{Domain, SampleKey, TripletSet};
use crate::error::{Error, Result};
use crate::features::{FeatureTable, FeatureVector};
use crate::model::{Embedding, ModelCheckpoint, ProjectionHead};
use crate::retrieval::DistanceKind;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Margin by which anchor-negative distance must exceed anchor-positive.
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    #[serde(default)]
    pub distance: DistanceKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.2,
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            shuffle: true,
            distance: DistanceKind::SquaredEuclidean,
        }
    }
}

impl TrainConfig {
    /// Learning rate 0 is allowed (null update); everything else must be
    /// positive.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidConfig {
                detail: format!("alpha must be positive, got {}", self.alpha),
            });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "learning_rate must be finite and non-negative, got {}",
                    self.learning_rate
                ),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig {
                detail: "batch_size must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

/// Per-epoch loss/accuracy history plus the final held-out accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_mean_loss: Vec<f64>,
    pub epoch_train_accuracy: Vec<f64>,
    pub final_val_accuracy: Option<f64>,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// Writes `epoch,mean_loss,train_accuracy` rows (wall time stays out of
    /// the file so identical runs produce identical bytes).
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut writer =
            csv::Writer::from_path(path).map_err(|e| Error::from_csv(path, e))?;
        writer
            .write_record(["epoch", "mean_loss", "train_accuracy"])
            .map_err(|e| Error::parse(path, e.to_string()))?;
        for (i, (loss, acc)) in self
            .epoch_mean_loss
            .iter()
            .zip(&self.epoch_train_accuracy)
            .enumerate()
        {
            writer
                .write_record([(i + 1).to_string(), loss.to_string(), acc.to_string()])
                .map_err(|e| Error::parse(path, e.to_string()))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

fn check_dims(a: &Embedding, b: &Embedding, c: &Embedding) -> Result<usize> {
    if a.dim() != b.dim() || a.dim() != c.dim() {
        return Err(Error::DimMismatch {
            context: "triplet embeddings".to_string(),
            expected: a.dim(),
            found: if a.dim() != b.dim() { b.dim() } else { c.dim() },
        });
    }
    Ok(a.dim())
}

/// Hinge loss max(0, d(a,p) - d(a,n) + alpha) with d the squared Euclidean
/// distance. Batch loss is the mean of this over the batch.
pub fn triplet_loss(e_a: &Embedding, e_p: &Embedding, e_n: &Embedding, alpha: f64) -> Result<f64> {
    triplet_loss_with(DistanceKind::SquaredEuclidean, e_a, e_p, e_n, alpha)
}

/// Same hinge under a chosen distance.
pub fn triplet_loss_with(
    kind: DistanceKind,
    e_a: &Embedding,
    e_p: &Embedding,
    e_n: &Embedding,
    alpha: f64,
) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidConfig {
            detail: format!("alpha must be positive, got {alpha}"),
        });
    }
    check_dims(e_a, e_p, e_n)?;
    let d_p = kind.eval(e_a.as_slice(), e_p.as_slice());
    let d_n = kind.eval(e_a.as_slice(), e_n.as_slice());
    Ok(hinge(d_p - d_n + alpha))
}

/// max(0, x), propagating NaN instead of f64::max's NaN-ignoring behavior so
/// divergence surfaces as a non-finite loss.
fn hinge(argument: f64) -> f64 {
    if argument.is_nan() {
        f64::NAN
    } else {
        argument.max(0.0)
    }
}

/// Gradients with the same shape as the head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub weight2: Option<Array2<f64>>,
    pub bias2: Option<Array1<f64>>,
}

impl HeadGradients {
    fn zeros_like(head: &ProjectionHead) -> Self {
        HeadGradients {
            weight: Array2::zeros(head.weight.dim()),
            bias: Array1::zeros(head.bias.len()),
            weight2: head
                .hidden
                .as_ref()
                .map(|h| Array2::zeros(h.weight2.dim())),
            bias2: head.hidden.as_ref().map(|h| Array1::zeros(h.bias2.len())),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weight.iter().all(|v| *v == 0.0)
            && self.bias.iter().all(|v| *v == 0.0)
            && self
                .weight2
                .as_ref()
                .is_none_or(|w| w.iter().all(|v| *v == 0.0))
            && self
                .bias2
                .as_ref()
                .is_none_or(|b| b.iter().all(|v| *v == 0.0))
    }
}

/// Loss and parameter gradients of one triplet through the head.
///
/// Inactive triplets (hinge argument <= 0) return exactly zero gradients. On
/// active triplets the output gradient is 2(e_n - e_p) for the squared
/// distance, chained through the optional normalization, the hidden ReLU
/// (subgradient 0 at non-positive pre-activations), and the affine layers.
pub fn loss_gradient(
    head: &ProjectionHead,
    feat_a: &FeatureVector,
    e_p: &Embedding,
    e_n: &Embedding,
    alpha: f64,
) -> Result<HeadGradients> {
    loss_and_gradient(
        DistanceKind::SquaredEuclidean,
        head,
        &feat_a.values,
        e_p.as_slice(),
        e_n.as_slice(),
        alpha,
    )
    .map(|(_, grads)| grads)
}

fn loss_and_gradient(
    kind: DistanceKind,
    head: &ProjectionHead,
    feat_a: &[f64],
    e_p: &[f64],
    e_n: &[f64],
    alpha: f64,
) -> Result<(f64, HeadGradients)> {
    if feat_a.len() != head.d_in() {
        return Err(Error::DimMismatch {
            context: "anchor feature".to_string(),
            expected: head.d_in(),
            found: feat_a.len(),
        });
    }
    if e_p.len() != head.d_out() || e_n.len() != head.d_out() {
        return Err(Error::DimMismatch {
            context: "face embeddings".to_string(),
            expected: head.d_out(),
            found: if e_p.len() != head.d_out() {
                e_p.len()
            } else {
                e_n.len()
            },
        });
    }
    let feat = ArrayView1::from(feat_a);
    let trace = head.forward_trace(feat);
    let e_a = trace.output.as_slice().expect("contiguous");
    let d_p = kind.eval(e_a, e_p);
    let d_n = kind.eval(e_a, e_n);
    let argument = d_p - d_n + alpha;
    let loss = hinge(argument);
    let mut grads = HeadGradients::zeros_like(head);
    // Inactive hinge, or NaN argument (divergence): no gradient either way.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(argument > 0.0) {
        return Ok((loss, grads));
    }

    // d(loss)/d(e_a)
    let mut g_out = Array1::zeros(head.d_out());
    match kind {
        DistanceKind::SquaredEuclidean => {
            for i in 0..head.d_out() {
                g_out[i] = 2.0 * (e_n[i] - e_p[i]);
            }
        }
        DistanceKind::Euclidean => {
            // d||e-x||/de = (e-x)/||e-x||; flat at coincident points.
            for i in 0..head.d_out() {
                let gp = if d_p > 1e-12 { (e_a[i] - e_p[i]) / d_p } else { 0.0 };
                let gn = if d_n > 1e-12 { (e_a[i] - e_n[i]) / d_n } else { 0.0 };
                g_out[i] = gp - gn;
            }
        }
    }

    // Through the output normalization, if present.
    let g_raw = if head.normalize_output {
        let norm = trace.raw_output.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let unit = &trace.output;
            let dot = g_out
                .iter()
                .zip(unit.iter())
                .map(|(g, u)| g * u)
                .sum::<f64>();
            Array1::from_iter(
                g_out
                    .iter()
                    .zip(unit.iter())
                    .map(|(g, u)| (g - dot * u) / norm),
            )
        } else {
            Array1::zeros(head.d_out())
        }
    } else {
        g_out
    };

    match (&head.hidden, &trace.pre_activation, &trace.hidden) {
        (Some(hidden), Some(pre), Some(activated)) => {
            accumulate_outer(grads.weight2.as_mut().unwrap(), &g_raw, activated.view());
            *grads.bias2.as_mut().unwrap() += &g_raw;
            let g_hidden = hidden.weight2.t().dot(&g_raw);
            let g_pre = Array1::from_iter(
                g_hidden
                    .iter()
                    .zip(pre.iter())
                    .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 }),
            );
            accumulate_outer(&mut grads.weight, &g_pre, feat);
            grads.bias += &g_pre;
        }
        _ => {
            accumulate_outer(&mut grads.weight, &g_raw, feat);
            grads.bias += &g_raw;
        }
    }
    Ok((loss, grads))
}

/// target += g (outer) x
fn accumulate_outer(target: &mut Array2<f64>, g: &Array1<f64>, x: ArrayView1<'_, f64>) {
    for (i, gi) in g.iter().enumerate() {
        if *gi == 0.0 {
            continue;
        }
        let mut row = target.row_mut(i);
        for (j, xj) in x.iter().enumerate() {
            row[j] += gi * xj;
        }
    }
}

/// Dense triplet view: feature/embedding rows resolved once, triplets as
/// index triples.
struct ResolvedTriplets {
    vectors: Vec<Array1<f64>>,
    /// (anchor feature row, positive row, negative row)
    triples: Vec<[usize; 3]>,
}

fn resolve(set: &TripletSet, features: &FeatureTable) -> Result<ResolvedTriplets> {
    let mut indices: BTreeMap<SampleKey, usize> = BTreeMap::new();
    let mut vectors = Vec::new();
    let mut intern = |key: SampleKey, features: &FeatureTable| -> Result<usize> {
        if let Some(&i) = indices.get(&key) {
            return Ok(i);
        }
        let row = features.feature(&key.0, key.1, key.2)?;
        vectors.push(Array1::from_vec(row.values.clone()));
        indices.insert(key, vectors.len() - 1);
        Ok(vectors.len() - 1)
    };
    let mut triples = Vec::with_capacity(set.len());
    for t in set.iter() {
        debug_assert_eq!(t.anchor().domain, Domain::Skull);
        triples.push([
            intern(t.anchor().key(), features)?,
            intern(t.positive().key(), features)?,
            intern(t.negative().key(), features)?,
        ]);
    }
    Ok(ResolvedTriplets { vectors, triples })
}

/// Fraction of triplets ranked correctly: d(a,p) < d(a,n) after mapping the
/// anchor through the head.
pub fn triplet_accuracy(
    head: &ProjectionHead,
    set: &TripletSet,
    features: &FeatureTable,
) -> Result<f64> {
    let resolved = resolve(set, features)?;
    accuracy_resolved(head, &resolved, DistanceKind::SquaredEuclidean, 0.0)
}

/// Margin-inclusive variant: counts d(a,p) + alpha < d(a,n).
pub fn triplet_accuracy_with_margin(
    head: &ProjectionHead,
    set: &TripletSet,
    features: &FeatureTable,
    alpha: f64,
) -> Result<f64> {
    let resolved = resolve(set, features)?;
    accuracy_resolved(head, &resolved, DistanceKind::SquaredEuclidean, alpha)
}

fn accuracy_resolved(
    head: &ProjectionHead,
    resolved: &ResolvedTriplets,
    kind: DistanceKind,
    margin: f64,
) -> Result<f64> {
    if resolved.triples.is_empty() {
        return Err(Error::EmptyTripletSet);
    }
    check_head_dims(head, resolved)?;
    let mut anchor_cache: BTreeMap<usize, Array1<f64>> = BTreeMap::new();
    let mut correct = 0usize;
    for &[a, p, n] in &resolved.triples {
        let e_a = anchor_cache
            .entry(a)
            .or_insert_with(|| head.forward_trace(resolved.vectors[a].view()).output);
        let e_a = e_a.as_slice().expect("contiguous");
        let d_p = kind.eval(e_a, resolved.vectors[p].as_slice().expect("contiguous"));
        let d_n = kind.eval(e_a, resolved.vectors[n].as_slice().expect("contiguous"));
        if d_p + margin < d_n {
            correct += 1;
        }
    }
    Ok(correct as f64 / resolved.triples.len() as f64)
}

fn check_head_dims(head: &ProjectionHead, resolved: &ResolvedTriplets) -> Result<()> {
    let dim = resolved.vectors.first().map(|v| v.len()).unwrap_or(0);
    if head.d_in() != dim {
        return Err(Error::DimMismatch {
            context: "head input vs feature table".to_string(),
            expected: dim,
            found: head.d_in(),
        });
    }
    // Positives/negatives are frozen features, so the head output must live
    // in the same space.
    if head.d_out() != dim {
        return Err(Error::DimMismatch {
            context: "head output vs frozen face features".to_string(),
            expected: dim,
            found: head.d_out(),
        });
    }
    Ok(())
}

/// Mini-batch gradient descent over the triplet hinge. Each epoch optionally
/// reshuffles (seeded), walks batches of `batch_size` (the last batch may be
/// smaller; means are over the actual size), and applies one step per batch.
/// Deterministic given (config, triplets, features, initial head).
pub fn train(
    cfg: &TrainConfig,
    train_set: &TripletSet,
    val_set: Option<&TripletSet>,
    features: &FeatureTable,
    head: ProjectionHead,
) -> Result<(ModelCheckpoint, TrainReport)> {
    cfg.validate()?;
    head.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyTripletSet);
    }
    let resolved = resolve(train_set, features)?;
    check_head_dims(&head, &resolved)?;
    let val_resolved = val_set.map(|set| resolve(set, features)).transpose()?;

    let start = Instant::now();
    let mut head = head;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..resolved.triples.len()).collect();
    let mut epoch_mean_loss = Vec::with_capacity(cfg.epochs);
    let mut epoch_train_accuracy = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut batch_grads = HeadGradients::zeros_like(&head);
            let mut batch_loss = 0.0;
            for &t in batch {
                let [a, p, n] = resolved.triples[t];
                let (loss, grads) = loss_and_gradient(
                    cfg.distance,
                    &head,
                    resolved.vectors[a].as_slice().expect("contiguous"),
                    resolved.vectors[p].as_slice().expect("contiguous"),
                    resolved.vectors[n].as_slice().expect("contiguous"),
                    cfg.alpha,
                )?;
                batch_loss += loss;
                batch_grads.weight += &grads.weight;
                batch_grads.bias += &grads.bias;
                if let (Some(acc), Some(g)) = (batch_grads.weight2.as_mut(), grads.weight2.as_ref())
                {
                    *acc += g;
                }
                if let (Some(acc), Some(g)) = (batch_grads.bias2.as_mut(), grads.bias2.as_ref()) {
                    *acc += g;
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: batch_idx + 1,
                });
            }
            loss_sum += batch_loss;
            let step = cfg.learning_rate / batch.len() as f64;
            head.weight.scaled_add(-step, &batch_grads.weight);
            head.bias.scaled_add(-step, &batch_grads.bias);
            if let Some(hidden) = head.hidden.as_mut() {
                hidden
                    .weight2
                    .scaled_add(-step, batch_grads.weight2.as_ref().unwrap());
                hidden
                    .bias2
                    .scaled_add(-step, batch_grads.bias2.as_ref().unwrap());
            }
        }
        epoch_mean_loss.push(loss_sum / resolved.triples.len() as f64);
        epoch_train_accuracy.push(accuracy_resolved(
            &head,
            &resolved,
            cfg.distance,
            0.0,
        )?);
    }

    let final_val_accuracy = val_resolved
        .as_ref()
        .map(|v| accuracy_resolved(&head, v, cfg.distance, 0.0))
        .transpose()?;
    let report = TrainReport {
        epoch_mean_loss,
        epoch_train_accuracy,
        final_val_accuracy,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    let checkpoint = ModelCheckpoint::from_head(&head, Some(cfg.clone()), cfg.seed)?;
    Ok((checkpoint, report))
}
