//! Distribution-alignment and classification losses with analytic
//! gradients, and a small encoder trained by gradient descent on two-domain
//! data.
//!
//! The alignment loss is the closed-form KL divergence between the standard
//! normal and the diagonal Gaussian fitted to a batch:
//! `mean_d [ ½ ln s_d + (1 + μ_d²) / (2 s_d) − ½ ]` with `s_d = σ_d² + ε`,
//! population variance. The classification loss is the batch-mean softmax
//! cross-entropy.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::bytes::{self, Reader};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::seed;

pub const VARIANCE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Image,
    Sketch,
}

/// Encoder outputs with a domain tag and class id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub outputs: DMatrix<f64>,
    pub domains: Vec<Domain>,
    pub labels: Vec<u32>,
}

/// Labeled inputs from both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoDomainSet {
    pub inputs: FeatureMatrix,
    pub domains: Vec<Domain>,
    pub labels: Vec<u32>,
    pub classes: usize,
}

impl TwoDomainSet {
    fn validate(&self) -> Result<()> {
        let n = self.inputs.rows();
        if self.domains.len() != n || self.labels.len() != n {
            return Err(Error::shape(format!(
                "{n} input rows but {} domain tags and {} labels",
                self.domains.len(),
                self.labels.len()
            )));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l as usize >= self.classes) {
            return Err(Error::param(format!("label {l} out of range for {} classes", self.classes)));
        }
        Ok(())
    }
}

/// Per-dimension batch mean and population variance.
pub fn moments(x: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let n = x.nrows() as f64;
    x.column_iter()
        .map(|c| {
            let mu = c.sum() / n;
            let var = c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            (mu, var)
        })
        .collect()
}

/// Alignment loss of an `N × D` batch and its gradient.
pub fn dist_loss(x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::param(format!("alignment loss needs at least 2 rows, got {n}")));
    }
    if d == 0 {
        return Err(Error::param("alignment loss needs at least one dimension"));
    }
    let (nf, df) = (n as f64, d as f64);
    let mut loss = 0.0;
    let mut grad = DMatrix::zeros(n, d);
    for (j, (mu, var)) in moments(x).into_iter().enumerate() {
        let s = var + VARIANCE_EPS;
        loss += 0.5 * s.ln() + (1.0 + mu * mu) / (2.0 * s) - 0.5;
        let d_mu = mu / s;
        let d_s = 0.5 / s - (1.0 + mu * mu) / (2.0 * s * s);
        for i in 0..n {
            grad[(i, j)] = (d_mu + d_s * 2.0 * (x[(i, j)] - mu)) / (nf * df);
        }
    }
    Ok((loss / df, grad))
}

/// Alignment loss applied to each domain's rows separately and averaged, so
/// both domains are pulled toward the same Gaussian. Domains with fewer than
/// two rows in the batch are left out.
pub fn domain_dist_loss(batch: &Batch) -> Result<(f64, DMatrix<f64>)> {
    let (n, d) = batch.outputs.shape();
    if batch.domains.len() != n {
        return Err(Error::shape("one domain tag per batch row required"));
    }
    let mut grad = DMatrix::zeros(n, d);
    let mut loss = 0.0;
    let mut parts = 0usize;
    for dom in [Domain::Image, Domain::Sketch] {
        let rows: Vec<usize> = (0..n).filter(|&i| batch.domains[i] == dom).collect();
        if rows.len() < 2 {
            continue;
        }
        let (l, g) = dist_loss(&batch.outputs.select_rows(&rows))?;
        loss += l;
        for (k, &i) in rows.iter().enumerate() {
            grad.set_row(i, &g.row(k));
        }
        parts += 1;
    }
    if parts == 0 {
        return Err(Error::param("no domain has at least 2 rows in the batch"));
    }
    Ok((loss / parts as f64, grad / parts as f64))
}

/// Mean softmax cross-entropy and its gradient `(softmax − onehot) / N`.
pub fn cls_loss(logits: &DMatrix<f64>, labels: &[u32]) -> Result<(f64, DMatrix<f64>)> {
    let (n, c) = logits.shape();
    if labels.len() != n {
        return Err(Error::shape(format!("{n} logit rows but {} labels", labels.len())));
    }
    if n == 0 {
        return Err(Error::Empty("classification batch is empty".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l as usize >= c) {
        return Err(Error::param(format!("label {l} out of range for {c} classes")));
    }
    let mut loss = 0.0;
    let mut grad = DMatrix::zeros(n, c);
    for i in 0..n {
        let row = logits.row(i);
        let m = row.max();
        let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
        let log_z = m + z.ln();
        let y = labels[i] as usize;
        loss += log_z - row[y];
        for k in 0..c {
            grad[(i, k)] = ((row[k] - log_z).exp() - if k == y { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    Ok((loss / n as f64, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub total: f64,
    pub cls: f64,
    pub dist: f64,
    pub grad_outputs: DMatrix<f64>,
    pub grad_logits: DMatrix<f64>,
}

/// `λ1 · cls + λ3 · dist`. A zero weight skips its term entirely.
pub fn total_loss(batch: &Batch, logits: &DMatrix<f64>, cfg: &TrainConfig) -> Result<TotalLoss> {
    if logits.nrows() != batch.outputs.nrows() {
        return Err(Error::shape("logits and outputs disagree on batch size"));
    }
    let (cls, g_cls) = if cfg.lambda1 > 0.0 {
        cls_loss(logits, &batch.labels)?
    } else {
        (0.0, DMatrix::zeros(logits.nrows(), logits.ncols()))
    };
    let (dist, g_dist) = if cfg.lambda3 > 0.0 {
        domain_dist_loss(batch)?
    } else {
        (0.0, DMatrix::zeros(batch.outputs.nrows(), batch.outputs.ncols()))
    };
    Ok(TotalLoss {
        total: cfg.lambda1 * cls + cfg.lambda3 * dist,
        cls,
        dist,
        grad_outputs: g_dist * cfg.lambda3,
        grad_logits: g_cls * cfg.lambda1,
    })
}

/// Affine layer `y = x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    fn init(inputs: usize, outputs: usize, rng: &mut impl rand::Rng) -> Self {
        let scale = (1.0 / inputs as f64).sqrt();
        Dense {
            weights: DMatrix::from_fn(inputs, outputs, |_, _| {
                scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            }),
            bias: DVector::zeros(outputs),
        }
    }

    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = x * &self.weights;
        for mut row in y.row_iter_mut() {
            row += self.bias.transpose();
        }
        y
    }

    /// Parameter gradients and the gradient with respect to the input.
    fn backward(&self, x: &DMatrix<f64>, g: &DMatrix<f64>) -> (Dense, DMatrix<f64>) {
        let grads = Dense {
            weights: x.transpose() * g,
            bias: g.row_sum().transpose(),
        };
        (grads, g * self.weights.transpose())
    }

    fn step(&mut self, g: &Dense, lr: f64) {
        self.weights -= &g.weights * lr;
        self.bias -= &g.bias * lr;
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Encoder shared by both domains: optional tanh hidden layer, then affine.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    pub hidden: Option<Dense>,
    pub output: Dense,
}

impl ToyEncoder {
    pub fn new(input_dim: usize, hidden: Option<usize>, output_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden == Some(0) {
            return Err(Error::param("encoder dimensions must be positive"));
        }
        let mut rng = seed::rng(seed::derive(seed, seed::TRAIN));
        let hidden = hidden.map(|h| Dense::init(input_dim, h, &mut rng));
        let width = hidden.as_ref().map_or(input_dim, |h| h.weights.ncols());
        Ok(ToyEncoder {
            hidden,
            output: Dense::init(width, output_dim, &mut rng),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.as_ref().unwrap_or(&self.output).weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.output.weights.ncols()
    }

    pub fn hidden_dim(&self) -> Option<usize> {
        self.hidden.as_ref().map(|h| h.weights.ncols())
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.hidden {
            Some(h) => self.output.forward(&h.forward(x).map(f64::tanh)),
            None => self.output.forward(x),
        }
    }

    /// Applies the encoder to every row of `x`.
    pub fn encode(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.dims() != self.input_dim() {
            return Err(Error::shape(format!(
                "features have {} dims, encoder expects {}",
                x.dims(),
                self.input_dim()
            )));
        }
        let y = self.forward(&to_f64(x));
        let data: Vec<f32> = y.row_iter().flat_map(|r| r.iter().map(|&v| v as f32).collect::<Vec<_>>()).collect();
        FeatureMatrix::new(x.rows(), self.output_dim(), data)
    }

    fn is_finite(&self) -> bool {
        self.hidden.as_ref().is_none_or(Dense::is_finite) && self.output.is_finite()
    }
}

fn to_f64(x: &FeatureMatrix) -> DMatrix<f64> {
    DMatrix::from_row_iterator(x.rows(), x.dims(), x.as_slice().iter().map(|&v| f64::from(v)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda3: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub output_dim: usize,
    /// Width of the tanh hidden layer; `None` trains a linear encoder.
    pub hidden: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 1.0,
            lambda3: 0.1,
            learning_rate: 1e-2,
            epochs: 200,
            batch_size: 64,
            seed: 0,
            output_dim: 16,
            hidden: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning rate must be positive"));
        }
        if !(self.lambda1 >= 0.0 && self.lambda3 >= 0.0) || !(self.lambda1 + self.lambda3).is_finite() {
            return Err(Error::param("loss weights must be nonnegative"));
        }
        if self.batch_size < 2 {
            return Err(Error::param("batch size must be at least 2"));
        }
        if self.output_dim == 0 || self.hidden == Some(0) {
            return Err(Error::param("encoder dimensions must be positive"));
        }
        Ok(())
    }
}

/// Full-data statistics after one epoch (epoch 0 is the initialization).
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub cls_loss: f64,
    pub dist_loss: f64,
    pub total: f64,
    /// Mean Euclidean distance over all sketch–image pairs of the same class.
    pub cross_domain_pos_dist: f64,
    /// Per-dimension (mean, population variance) of all encoder outputs.
    pub moments: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
}

impl TrainTrace {
    pub fn last(&self) -> &EpochStats {
        self.epochs.last().expect("trace holds the initial epoch")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,cls_loss,dist_loss,total,cross_domain_pos_dist\n");
        for e in &self.epochs {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.epoch, e.cls_loss, e.dist_loss, e.total, e.cross_domain_pos_dist
            )
            .unwrap();
        }
        out
    }
}

/// Mean distance between same-class rows of opposite domains.
pub fn cross_domain_positive_distance(outputs: &DMatrix<f64>, domains: &[Domain], labels: &[u32]) -> f64 {
    let rows = |d: Domain| -> Vec<usize> { (0..outputs.nrows()).filter(|&i| domains[i] == d).collect() };
    let (images, sketches) = (rows(Domain::Image), rows(Domain::Sketch));
    let (mut sum, mut count) = (0.0, 0usize);
    for &s in &sketches {
        for &i in &images {
            if labels[s] == labels[i] {
                sum += (outputs.row(s) - outputs.row(i)).norm();
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Consecutive chunks of `batch` rows; a trailing chunk shorter than half a
/// batch joins the previous one, since tiny batches make the variance
/// estimate (and the alignment gradient) degenerate.
fn batches(order: &[usize], batch: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = (start + batch).min(order.len());
        if order.len() - end < batch / 2 {
            end = order.len();
        }
        out.push(&order[start..end]);
        start = end;
    }
    out
}

/// Trains a shared encoder plus a linear classifier head with minibatch
/// gradient descent on `λ1·cls + λ3·dist`. Batches are drawn from a seeded
/// shuffle each epoch.
pub fn train_toy(data: &TwoDomainSet, cfg: &TrainConfig) -> Result<(ToyEncoder, TrainTrace)> {
    cfg.validate()?;
    data.validate()?;
    if data.classes == 0 || data.inputs.rows() < 2 {
        return Err(Error::Empty("training set needs rows and classes".into()));
    }
    let x = to_f64(&data.inputs);
    let mut encoder = ToyEncoder::new(x.ncols(), cfg.hidden, cfg.output_dim, cfg.seed)?;
    let mut rng = seed::rng(seed::derive(seed::derive(cfg.seed, seed::TRAIN), 1));
    let mut head = Dense::init(cfg.output_dim, data.classes, &mut rng);

    let stats = |epoch: usize, encoder: &ToyEncoder, head: &Dense| -> Result<EpochStats> {
        let out = encoder.forward(&x);
        let batch = Batch {
            outputs: out,
            domains: data.domains.clone(),
            labels: data.labels.clone(),
        };
        let t = total_loss(&batch, &head.forward(&batch.outputs), cfg)?;
        let s = EpochStats {
            epoch,
            cls_loss: t.cls,
            dist_loss: t.dist,
            total: t.total,
            cross_domain_pos_dist: cross_domain_positive_distance(&batch.outputs, &data.domains, &data.labels),
            moments: moments(&batch.outputs),
        };
        if !s.total.is_finite() || !encoder.is_finite() {
            return Err(Error::Diverged {
                epoch,
                msg: format!("loss {} (cls {}, dist {})", s.total, s.cls_loss, s.dist_loss),
            });
        }
        Ok(s)
    };

    let mut trace = vec![stats(0, &encoder, &head)?];
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in batches(&order, cfg.batch_size) {
            let xb = x.select_rows(chunk);
            let hidden_out = encoder.hidden.as_ref().map(|h| h.forward(&xb).map(f64::tanh));
            let enc_in = hidden_out.as_ref().unwrap_or(&xb);
            let out = encoder.output.forward(enc_in);
            let logits = head.forward(&out);
            let batch = Batch {
                outputs: out,
                domains: chunk.iter().map(|&i| data.domains[i]).collect(),
                labels: chunk.iter().map(|&i| data.labels[i]).collect(),
            };
            // a batch holding one row per domain has no alignment term
            let t = match total_loss(&batch, &logits, cfg) {
                Ok(t) => t,
                Err(Error::InvalidParam(_)) if cfg.lambda3 > 0.0 => {
                    let only_cls = TrainConfig { lambda3: 0.0, ..cfg.clone() };
                    total_loss(&batch, &logits, &only_cls)?
                }
                Err(e) => return Err(e),
            };
            if !t.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    msg: format!("minibatch loss {}", t.total),
                });
            }
            let (g_head, g_from_head) = head.backward(&batch.outputs, &t.grad_logits);
            let g_out = g_from_head + &t.grad_outputs;
            let (g_output, g_enc_in) = encoder.output.backward(enc_in, &g_out);
            if let (Some(h), Some(a)) = (encoder.hidden.as_mut(), hidden_out.as_ref()) {
                let g_pre = g_enc_in.component_mul(&a.map(|v| 1.0 - v * v));
                let (g_hidden, _) = h.backward(&xb, &g_pre);
                h.step(&g_hidden, cfg.learning_rate);
            }
            encoder.output.step(&g_output, cfg.learning_rate);
            head.step(&g_head, cfg.learning_rate);
        }
        trace.push(stats(epoch, &encoder, &head)?);
    }
    let last = &trace[trace.len() - 1];
    log::info!(
        "train: {} epochs, total {:.6} (cls {:.6}, dist {:.6}), cross-domain positive distance {:.4} -> {:.4}",
        cfg.epochs,
        last.total,
        last.cls_loss,
        last.dist_loss,
        trace[0].cross_domain_pos_dist,
        last.cross_domain_pos_dist
    );
    Ok((encoder, TrainTrace { epochs: trace }))
}

pub const CRTE_MAGIC: &[u8; 4] = b"CRTE";
const CRTE_VERSION: u8 = 1;

/// Serializes an encoder.
///
/// ```text
/// "CRTE" | version u8 | input u32 | hidden u32 (0 = none) | output u32
/// [hidden weights in×H | hidden bias H] | weights W×out | bias out
/// ```
/// All parameters are f64 LE, matrices row-major.
pub fn encode_encoder(enc: &ToyEncoder) -> Result<Vec<u8>> {
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::param("encoder dimension exceeds u32"));
    let mut out = Vec::new();
    out.extend_from_slice(CRTE_MAGIC);
    out.push(CRTE_VERSION);
    out.extend_from_slice(&to_u32(enc.input_dim())?.to_le_bytes());
    out.extend_from_slice(&to_u32(enc.hidden_dim().unwrap_or(0))?.to_le_bytes());
    out.extend_from_slice(&to_u32(enc.output_dim())?.to_le_bytes());
    for layer in enc.hidden.iter().chain([&enc.output]) {
        bytes::put_row_major(&mut out, &layer.weights);
        bytes::put_f64s(&mut out, layer.bias.as_slice());
    }
    Ok(out)
}

pub fn decode_encoder(buf: &[u8]) -> Result<ToyEncoder> {
    let mut r = Reader::new(buf);
    r.magic(CRTE_MAGIC)?;
    let version = r.u8()?;
    if version != CRTE_VERSION {
        return Err(Error::BadVersion(version));
    }
    let input = r.u32()? as usize;
    let hidden = r.u32()? as usize;
    let output = r.u32()? as usize;
    if input == 0 || output == 0 {
        return Err(Error::param("encoder dimensions must be positive"));
    }
    let mut layer = |rows: usize, cols: usize| -> Result<Dense> {
        let weights = DMatrix::from_row_slice(rows, cols, &r.f64s(rows * cols)?);
        let bias = DVector::from_vec(r.f64s(cols)?);
        Ok(Dense { weights, bias })
    };
    let (hidden, width) = if hidden > 0 {
        (Some(layer(input, hidden)?), hidden)
    } else {
        (None, input)
    };
    let enc = ToyEncoder {
        hidden,
        output: layer(width, output)?,
    };
    r.finish()?;
    if !enc.is_finite() {
        return Err(Error::param("encoder contains non-finite parameters"));
    }
    Ok(enc)
}

pub fn save_encoder(enc: &ToyEncoder, path: impl AsRef<Path>) -> Result<()> {
    bytes::write_file(path.as_ref(), &encode_encoder(enc)?)
}

pub fn load_encoder(path: impl AsRef<Path>) -> Result<ToyEncoder> {
    decode_encoder(&bytes::read_file(path.as_ref())?)
}
