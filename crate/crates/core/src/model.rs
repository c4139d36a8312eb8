//! The trainable skull-branch head: an affine map (optionally with one hidden
//! ReLU layer) from frozen feature space to embedding space, plus checkpoint
//! serialization.

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::training::TrainConfig;

/// Fixed-length vector compared with squared Euclidean distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<&FeatureVector> for Embedding {
    fn from(f: &FeatureVector) -> Self {
        Embedding(f.values.clone())
    }
}

/// Optional second layer applied after an elementwise max(0, .) on the first
/// layer's output.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub weight2: Array2<f64>,
    pub bias2: Array1<f64>,
}

/// Learnable parameters of the skull branch. The face branch has none.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub hidden: Option<HiddenLayer>,
    pub normalize_output: bool,
}

/// Intermediate activations kept for backpropagation.
pub(crate) struct ForwardTrace {
    /// First-layer pre-activation (only when a hidden layer exists).
    pub pre_activation: Option<Array1<f64>>,
    /// Post-ReLU hidden activation.
    pub hidden: Option<Array1<f64>>,
    /// Output before normalization.
    pub raw_output: Array1<f64>,
    pub output: Array1<f64>,
}

impl ProjectionHead {
    pub fn d_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn d_out(&self) -> usize {
        match &self.hidden {
            Some(h) => h.weight2.nrows(),
            None => self.weight.nrows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bias.len() != self.weight.nrows() {
            return Err(Error::DimMismatch {
                context: "head bias".to_string(),
                expected: self.weight.nrows(),
                found: self.bias.len(),
            });
        }
        if let Some(h) = &self.hidden {
            if h.weight2.ncols() != self.weight.nrows() {
                return Err(Error::DimMismatch {
                    context: "hidden layer input".to_string(),
                    expected: self.weight.nrows(),
                    found: h.weight2.ncols(),
                });
            }
            if h.bias2.len() != h.weight2.nrows() {
                return Err(Error::DimMismatch {
                    context: "hidden layer bias".to_string(),
                    expected: h.weight2.nrows(),
                    found: h.bias2.len(),
                });
            }
        }
        let finite = self.weight.iter().all(|v| v.is_finite())
            && self.bias.iter().all(|v| v.is_finite())
            && self.hidden.as_ref().is_none_or(|h| {
                h.weight2.iter().all(|v| v.is_finite()) && h.bias2.iter().all(|v| v.is_finite())
            });
        if !finite {
            return Err(Error::NonFinite {
                context: "head parameters".to_string(),
            });
        }
        Ok(())
    }

    pub(crate) fn forward_trace(&self, input: ArrayView1<'_, f64>) -> ForwardTrace {
        let first = self.weight.dot(&input) + &self.bias;
        let (pre_activation, hidden, raw_output) = match &self.hidden {
            Some(h) => {
                let activated = first.mapv(|v| v.max(0.0));
                let out = h.weight2.dot(&activated) + &h.bias2;
                (Some(first), Some(activated), out)
            }
            None => (None, None, first),
        };
        let output = if self.normalize_output {
            let norm = raw_output.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                raw_output.mapv(|v| v / norm)
            } else {
                raw_output.clone()
            }
        } else {
            raw_output.clone()
        };
        ForwardTrace {
            pre_activation,
            hidden,
            raw_output,
            output,
        }
    }

    /// Maps a raw feature slice through the head.
    pub fn forward_slice(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.d_in() {
            return Err(Error::DimMismatch {
                context: "head input".to_string(),
                expected: self.d_in(),
                found: input.len(),
            });
        }
        Ok(self.forward_trace(ArrayView1::from(input)).output.to_vec())
    }
}

/// Makes a single-layer head: the identity when `identity_init` (requires
/// square dimensions), otherwise seeded Gaussian weights with standard
/// deviation sqrt(1/d_in) and zero bias.
pub fn init_head(d_in: usize, d_out: usize, seed: u64, identity_init: bool) -> Result<ProjectionHead> {
    if d_in == 0 || d_out == 0 {
        return Err(Error::InvalidConfig {
            detail: format!("head dimensions must be positive, got {d_in}x{d_out}"),
        });
    }
    let weight = if identity_init {
        if d_in != d_out {
            return Err(Error::IdentityInitDims { d_in, d_out });
        }
        Array2::eye(d_in)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gaussian_matrix(d_out, d_in, &mut rng)
    };
    Ok(ProjectionHead {
        weight,
        bias: Array1::zeros(d_out),
        hidden: None,
        normalize_output: false,
    })
}

/// Two-layer variant: d_in -> hidden_dim -> d_out with a ReLU between, each
/// layer seeded Gaussian with standard deviation sqrt(1/fan_in).
pub fn init_head_with_hidden(
    d_in: usize,
    hidden_dim: usize,
    d_out: usize,
    seed: u64,
) -> Result<ProjectionHead> {
    if d_in == 0 || hidden_dim == 0 || d_out == 0 {
        return Err(Error::InvalidConfig {
            detail: format!("head dimensions must be positive, got {d_in}x{hidden_dim}x{d_out}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight = gaussian_matrix(hidden_dim, d_in, &mut rng);
    let weight2 = gaussian_matrix(d_out, hidden_dim, &mut rng);
    Ok(ProjectionHead {
        weight,
        bias: Array1::zeros(hidden_dim),
        hidden: Some(HiddenLayer {
            weight2,
            bias2: Array1::zeros(d_out),
        }),
        normalize_output: false,
    })
}

/// Row-major draws from N(0, 1/cols).
fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, (1.0 / cols as f64).sqrt()).expect("valid std");
    let data: Vec<f64> = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape matches")
}

/// Applies the head to a feature vector; output is unit-normalized when the
/// head asks for it (the zero vector stays zero).
pub fn forward(head: &ProjectionHead, feat: &FeatureVector) -> Result<Embedding> {
    head.forward_slice(&feat.values).map(Embedding)
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenCheckpoint {
    pub hidden_dim: usize,
    /// Row-major d_out x hidden_dim.
    pub weight2: Vec<f64>,
    pub bias2: Vec<f64>,
}

/// Serializable snapshot of a head plus the run that produced it. Round-trips
/// bit-exactly through its JSON byte form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub version: u32,
    pub d_in: usize,
    pub d_out: usize,
    pub normalize_output: bool,
    /// Row-major first-layer weights.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub hidden: Option<HiddenCheckpoint>,
    pub train_config: Option<TrainConfig>,
    pub seed: u64,
}

impl ModelCheckpoint {
    pub fn from_head(
        head: &ProjectionHead,
        train_config: Option<TrainConfig>,
        seed: u64,
    ) -> Result<Self> {
        head.validate()?;
        Ok(ModelCheckpoint {
            version: CHECKPOINT_VERSION,
            d_in: head.d_in(),
            d_out: head.d_out(),
            normalize_output: head.normalize_output,
            weight: head.weight.iter().copied().collect(),
            bias: head.bias.to_vec(),
            hidden: head.hidden.as_ref().map(|h| HiddenCheckpoint {
                hidden_dim: h.weight2.ncols(),
                weight2: h.weight2.iter().copied().collect(),
                bias2: h.bias2.to_vec(),
            }),
            train_config,
            seed,
        })
    }

    pub fn to_head(&self) -> Result<ProjectionHead> {
        let corrupt = |detail: String| Error::CorruptCheckpoint { detail };
        let d1 = match &self.hidden {
            Some(h) => h.hidden_dim,
            None => self.d_out,
        };
        if self.weight.len() != d1 * self.d_in {
            return Err(corrupt(format!(
                "weight holds {} values, expected {}",
                self.weight.len(),
                d1 * self.d_in
            )));
        }
        if self.bias.len() != d1 {
            return Err(corrupt(format!(
                "bias holds {} values, expected {d1}",
                self.bias.len()
            )));
        }
        let hidden = match &self.hidden {
            Some(h) => {
                if h.weight2.len() != self.d_out * h.hidden_dim {
                    return Err(corrupt(format!(
                        "weight2 holds {} values, expected {}",
                        h.weight2.len(),
                        self.d_out * h.hidden_dim
                    )));
                }
                if h.bias2.len() != self.d_out {
                    return Err(corrupt(format!(
                        "bias2 holds {} values, expected {}",
                        h.bias2.len(),
                        self.d_out
                    )));
                }
                Some(HiddenLayer {
                    weight2: Array2::from_shape_vec((self.d_out, h.hidden_dim), h.weight2.clone())
                        .expect("length checked"),
                    bias2: Array1::from_vec(h.bias2.clone()),
                })
            }
            None => None,
        };
        let head = ProjectionHead {
            weight: Array2::from_shape_vec((d1, self.d_in), self.weight.clone())
                .expect("length checked"),
            bias: Array1::from_vec(self.bias.clone()),
            hidden,
            normalize_output: self.normalize_output,
        };
        head.validate()?;
        Ok(head)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        serde_json::to_vec_pretty(self).map_err(|e| Error::CorruptCheckpoint {
            detail: e.to_string(),
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ckpt: ModelCheckpoint =
            serde_json::from_slice(bytes).map_err(|e| Error::CorruptCheckpoint {
                detail: e.to_string(),
            })?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::BadVersion {
                found: ckpt.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        Ok(ckpt)
    }
}

/// Serializes a head (and run metadata) to checkpoint bytes.
pub fn save_checkpoint(
    head: &ProjectionHead,
    train_config: Option<TrainConfig>,
    seed: u64,
) -> Result<Vec<u8>> {
    ModelCheckpoint::from_head(head, train_config, seed)?.to_bytes()
}

/// Parses checkpoint bytes and rebuilds the head.
pub fn load_checkpoint(bytes: &[u8]) -> Result<(ProjectionHead, ModelCheckpoint)> {
    let ckpt = ModelCheckpoint::from_bytes(bytes)?;
    let head = ckpt.to_head()?;
    Ok((head, ckpt))
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::features::FeatureOrigin;

    fn feat(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            values,
            source: FeatureOrigin::Precomputed,
        }
    }

    #[test]
    fn identity_head_reproduces_input() {
        let head = init_head(4, 4, 0, true).unwrap();
        let x = feat(vec![0.5, -1.25, 3.0, 0.0]);
        let e = forward(&head, &x).unwrap();
        assert_eq!(e.0, x.values);
    }

    #[test]
    fn identity_init_rejects_rectangular() {
        assert!(matches!(
            init_head(4, 3, 0, true).unwrap_err(),
            Error::IdentityInitDims { d_in: 4, d_out: 3 }
        ));
    }

    #[test]
    fn forward_matches_hand_arithmetic() {
        let head = ProjectionHead {
            weight: Array2::from_shape_vec((2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            bias: Array1::from_vec(vec![1.0, -1.0]),
            hidden: None,
            normalize_output: false,
        };
        let e = forward(&head, &feat(vec![1.0, 1.0])).unwrap();
        assert_eq!(e.0, vec![4.0, 6.0]);
    }

    #[test]
    fn forward_normalizes_when_asked() {
        let head = ProjectionHead {
            weight: Array2::eye(2),
            bias: Array1::zeros(2),
            hidden: None,
            normalize_output: true,
        };
        let e = forward(&head, &feat(vec![3.0, 4.0])).unwrap();
        assert!((e.0[0] - 0.6).abs() < 1e-15);
        assert!((e.0[1] - 0.8).abs() < 1e-15);
        // Zero stays zero rather than dividing by zero.
        let zero = forward(&head, &feat(vec![0.0, 0.0])).unwrap();
        assert_eq!(zero.0, vec![0.0, 0.0]);
    }

    #[test]
    fn forward_rejects_dim_mismatch() {
        let head = init_head(3, 2, 1, false).unwrap();
        assert!(matches!(
            forward(&head, &feat(vec![1.0, 2.0])).unwrap_err(),
            Error::DimMismatch { .. }
        ));
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_head(8, 5, 13, false).unwrap();
        let b = init_head(8, 5, 13, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_weight_spread_matches_fan_in() {
        let head = init_head(512, 128, 1, false).unwrap();
        let n = head.weight.len() as f64;
        let mean = head.weight.iter().sum::<f64>() / n;
        let var = head.weight.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let expected = (1.0f64 / 512.0).sqrt();
        assert!(
            (var.sqrt() - expected).abs() / expected < 0.1,
            "sample std {} vs expected {expected}",
            var.sqrt()
        );
    }

    #[test]
    fn single_layer_forward_is_affine_linear() {
        let head = init_head(6, 3, 2, false).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let fx = head.forward_slice(&x).unwrap();
            let fy = head.forward_slice(&y).unwrap();
            let fsum = head.forward_slice(&sum).unwrap();
            let f0 = head.forward_slice(&[0.0; 6]).unwrap();
            for i in 0..3 {
                assert!((fsum[i] - fx[i] - fy[i] + f0[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let head = init_head_with_hidden(7, 5, 3, 21).unwrap();
        let bytes = save_checkpoint(&head, Some(TrainConfig::default()), 21).unwrap();
        let (restored, ckpt) = load_checkpoint(&bytes).unwrap();
        assert_eq!(ckpt.version, CHECKPOINT_VERSION);
        assert!(head
            .weight
            .iter()
            .zip(restored.weight.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        let h1 = head.hidden.as_ref().unwrap();
        let h2 = restored.hidden.as_ref().unwrap();
        assert!(h1
            .weight2
            .iter()
            .zip(h2.weight2.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        // Serialize again: identical bytes.
        let again = save_checkpoint(&restored, Some(TrainConfig::default()), 21).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn checkpoint_rejects_wrong_version() {
        let head = init_head(2, 2, 0, true).unwrap();
        let bytes = save_checkpoint(&head, None, 0).unwrap();
        let tampered = String::from_utf8(bytes)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            ModelCheckpoint::from_bytes(tampered.as_bytes()).unwrap_err(),
            Error::BadVersion {
                found: 9,
                expected: 1
            }
        ));
    }

    #[test]
    fn checkpoint_rejects_truncated_payload() {
        let head = init_head(2, 2, 0, true).unwrap();
        let bytes = save_checkpoint(&head, None, 0).unwrap();
        assert!(matches!(
            ModelCheckpoint::from_bytes(&bytes[..bytes.len() / 2]).unwrap_err(),
            Error::CorruptCheckpoint { .. }
        ));
    }

    #[test]
    fn checkpoint_rejects_inconsistent_shapes() {
        let head = init_head(3, 2, 0, false).unwrap();
        let mut ckpt = ModelCheckpoint::from_head(&head, None, 0).unwrap();
        ckpt.weight.pop();
        assert!(matches!(
            ckpt.to_head().unwrap_err(),
            Error::CorruptCheckpoint { .. }
        ));
    }
}
