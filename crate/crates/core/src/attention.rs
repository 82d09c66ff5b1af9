//! Forward-pass attention kernels.
//!
//! `SPDA(Q, K, V) = softmax(Q·W_Q (K·W_K)ᵀ / √d_k) · V·W_V` per head, where
//! `d_k` is the per-head projection width. Multi-head attention concatenates
//! the head outputs and multiplies by `W_o`, mapping back to the model
//! dimension so blocks can be stacked. No positional encodings are added.

use alloc::vec::Vec;

use crate::rng::SplitMix64;
use crate::tensor::{FeatureSeq, Matrix};
use crate::{Error, Result};

/// Query/key/value projections for one head, each `d × d_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadProjection {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

impl HeadProjection {
    pub fn new(w_q: Matrix, w_k: Matrix, w_v: Matrix) -> Result<Self> {
        let shape = (w_q.rows(), w_q.cols());
        for m in [&w_k, &w_v] {
            if (m.rows(), m.cols()) != shape {
                return Err(Error::DimensionMismatch {
                    expected: shape,
                    found: (m.rows(), m.cols()),
                });
            }
        }
        if shape.1 == 0 {
            return Err(Error::InvalidParameter("head dimension must be positive"));
        }
        Ok(Self { w_q, w_k, w_v })
    }

    /// `W_Q = W_K = W_V = I_d`.
    pub fn identity(dim: usize) -> Self {
        let id = Matrix::identity(dim);
        Self {
            w_q: id.clone(),
            w_k: id.clone(),
            w_v: id,
        }
    }

    pub fn model_dim(&self) -> usize {
        self.w_q.rows()
    }

    pub fn head_dim(&self) -> usize {
        self.w_q.cols()
    }
}

/// Parameters of one multi-head attention layer.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    heads: Vec<HeadProjection>,
    /// `(h · d_k) × d`.
    w_o: Matrix,
    seed: Option<u64>,
}

impl AttentionParams {
    pub fn new(heads: Vec<HeadProjection>, w_o: Matrix) -> Result<Self> {
        let first = heads
            .first()
            .ok_or(Error::InvalidParameter("at least one head is required"))?;
        let (d, dk) = (first.model_dim(), first.head_dim());
        for h in &heads {
            if (h.model_dim(), h.head_dim()) != (d, dk) {
                return Err(Error::DimensionMismatch {
                    expected: (d, dk),
                    found: (h.model_dim(), h.head_dim()),
                });
            }
        }
        if (w_o.rows(), w_o.cols()) != (heads.len() * dk, d) {
            return Err(Error::DimensionMismatch {
                expected: (heads.len() * dk, d),
                found: (w_o.rows(), w_o.cols()),
            });
        }
        Ok(Self {
            heads,
            w_o,
            seed: None,
        })
    }

    /// Deterministic weights from `seed` via [`SplitMix64`].
    ///
    /// Matrices are filled row-major in the order `W_Q¹, W_K¹, W_V¹, …,
    /// W_Qʰ, W_Kʰ, W_Vʰ, W_o`. Projection entries are uniform in
    /// `[-1/√d, 1/√d)`, output entries in `[-1/√(h·d_k), 1/√(h·d_k))`.
    pub fn seeded(num_heads: usize, model_dim: usize, head_dim: usize, seed: u64) -> Result<Self> {
        if num_heads == 0 || model_dim == 0 || head_dim == 0 {
            return Err(Error::InvalidParameter(
                "heads and dimensions must be positive",
            ));
        }
        let mut rng = SplitMix64::new(seed);
        let mut fill = |rows: usize, cols: usize, bound: f64| {
            Matrix::from_fn(rows, cols, |_, _| rng.symmetric(bound))
        };
        let in_bound = 1.0 / libm::sqrt(model_dim as f64);
        let heads = (0..num_heads)
            .map(|_| HeadProjection {
                w_q: fill(model_dim, head_dim, in_bound),
                w_k: fill(model_dim, head_dim, in_bound),
                w_v: fill(model_dim, head_dim, in_bound),
            })
            .collect();
        let concat = num_heads * head_dim;
        let w_o = fill(concat, model_dim, 1.0 / libm::sqrt(concat as f64));
        let mut params = Self::new(heads, w_o)?;
        params.seed = Some(seed);
        Ok(params)
    }

    pub fn heads(&self) -> &[HeadProjection] {
        &self.heads
    }

    pub fn w_o(&self) -> &Matrix {
        &self.w_o
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn model_dim(&self) -> usize {
        self.w_o.cols()
    }

    pub fn head_dim(&self) -> usize {
        self.heads[0].head_dim()
    }
}

fn check_inputs(q: &FeatureSeq, k: &FeatureSeq, v: Option<&FeatureSeq>, dim: usize) -> Result<()> {
    for s in [Some(q), Some(k), v].into_iter().flatten() {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: (s.len(), dim),
                found: (s.len(), s.dim()),
            });
        }
    }
    if let Some(v) = v {
        if v.len() != k.len() {
            return Err(Error::DimensionMismatch {
                expected: (k.len(), dim),
                found: (v.len(), v.dim()),
            });
        }
    }
    if k.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Pre-softmax scores `Q·W_Q (K·W_K)ᵀ / √d_k`, shape `n_q × n_k`.
pub fn attention_logits(q: &FeatureSeq, k: &FeatureSeq, head: &HeadProjection) -> Result<Matrix> {
    check_inputs(q, k, None, head.model_dim())?;
    let qp = q.as_matrix().matmul(&head.w_q)?;
    let kp = k.as_matrix().matmul(&head.w_k)?;
    let scale = 1.0 / libm::sqrt(head.head_dim() as f64);
    Ok(qp.matmul_transposed(&kp)?.scale(scale))
}

/// Row-wise softmax, shifted by each row's maximum.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..logits.rows() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&z| libm::exp(z - max)).collect();
        let total: f64 = exps.iter().sum();
        for (j, e) in exps.into_iter().enumerate() {
            out.set(i, j, e / total);
        }
    }
    out
}

pub fn attention_weights(q: &FeatureSeq, k: &FeatureSeq, head: &HeadProjection) -> Result<Matrix> {
    Ok(softmax_rows(&attention_logits(q, k, head)?))
}

/// Scaled dot-product attention for one head; output is `n_q × d_k`.
pub fn spda(
    q: &FeatureSeq,
    k: &FeatureSeq,
    v: &FeatureSeq,
    head: &HeadProjection,
) -> Result<FeatureSeq> {
    check_inputs(q, k, Some(v), head.model_dim())?;
    let weights = attention_weights(q, k, head)?;
    let vp = v.as_matrix().matmul(&head.w_v)?;
    Ok(FeatureSeq::from_matrix(weights.matmul(&vp)?))
}

/// `[H_1, …, H_h] · W_o`; output is `n_q × d`.
pub fn multi_head_attention(
    q: &FeatureSeq,
    k: &FeatureSeq,
    v: &FeatureSeq,
    params: &AttentionParams,
) -> Result<FeatureSeq> {
    let outputs = params
        .heads()
        .iter()
        .map(|h| spda(q, k, v, h).map(FeatureSeq::into_matrix))
        .collect::<Result<Vec<_>>>()?;
    let concat = Matrix::hconcat(&outputs)?;
    Ok(FeatureSeq::from_matrix(concat.matmul(params.w_o())?))
}

/// Stacked multi-head self-attention (`Q = K = V`), one entry of `layers` per
/// layer. Turns the decoder feature map `F_AD` into `F_s`.
pub fn self_attention_block(f_ad: &FeatureSeq, layers: &[AttentionParams]) -> Result<FeatureSeq> {
    if layers.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one attention layer is required",
        ));
    }
    let mut current = f_ad.clone();
    for params in layers {
        current = multi_head_attention(&current, &current, &current, params)?;
    }
    Ok(restore_shape(current, f_ad))
}

/// Stacked cross-attention: the first layer queries with `F_e`, later layers
/// with the previous output; keys and values are always `F_s`. Returns `F_c`.
pub fn cross_attention(
    f_e: &FeatureSeq,
    f_s: &FeatureSeq,
    layers: &[AttentionParams],
) -> Result<FeatureSeq> {
    if layers.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one attention layer is required",
        ));
    }
    let mut current = f_e.clone();
    for params in layers {
        current = multi_head_attention(&current, f_s, f_s, params)?;
    }
    Ok(restore_shape(current, f_e))
}

/// `F_c + F_int`, with `F_c` from [`cross_attention`] and `F_int` the
/// fusion decoder's intermediate feature map at the resolution of `F_e`.
pub fn cross_attention_fuse(
    f_e: &FeatureSeq,
    f_s: &FeatureSeq,
    f_int: &FeatureSeq,
    layers: &[AttentionParams],
) -> Result<FeatureSeq> {
    if f_int.len() != f_e.len() || f_int.dim() != f_e.dim() {
        return Err(Error::DimensionMismatch {
            expected: (f_e.len(), f_e.dim()),
            found: (f_int.len(), f_int.dim()),
        });
    }
    let f_c = cross_attention(f_e, f_s, layers)?;
    f_c.add(f_int)
}

fn restore_shape(seq: FeatureSeq, like: &FeatureSeq) -> FeatureSeq {
    match like.origin_shape() {
        Some(shape) if seq.dim() == like.dim() => {
            seq.clone().with_origin_shape(shape).unwrap_or(seq)
        }
        _ => seq,
    }
}
