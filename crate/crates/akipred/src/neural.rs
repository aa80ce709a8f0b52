//! Dual-channel text CNN: word-id and CUI-id sequences each go through an
//! embedding table, per-width 1-D valid convolutions with ReLU and
//! max-over-time pooling; the pooled features of both channels concatenate
//! into a dense sigmoid output. Training is mini-batch gradient descent on
//! binary cross-entropy with inverted dropout on the pooled layer, and the
//! backprop gradients are verifiable against central finite differences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::squash;

/// Pad id; always embeds to the zero vector and receives no gradient.
pub const PAD_ID: usize = 0;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub embed_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    /// Vocabulary sizes include the pad id 0.
    pub word_vocab_size: usize,
    pub cui_vocab_size: usize,
    /// When false the model has a single (word) channel.
    pub use_cui_channel: bool,
    pub max_seq_len: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            embed_dim: 100,
            filter_widths: vec![3, 4, 5],
            filters_per_width: 100,
            word_vocab_size: 2,
            cui_vocab_size: 2,
            use_cui_channel: true,
            max_seq_len: 4000,
            dropout_rate: 0.5,
            learning_rate: 0.05,
            epochs: 10,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl CnnConfig {
    fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.filters_per_width == 0 {
            return Err(Error::InvalidParam("embedding and filter dims must be >= 1".into()));
        }
        if self.filter_widths.is_empty() {
            return Err(Error::InvalidParam("need at least one filter width".into()));
        }
        for &w in &self.filter_widths {
            if w == 0 || w > self.max_seq_len {
                return Err(Error::InvalidParam(format!(
                    "filter width {w} must be in [1, max_seq_len={}]",
                    self.max_seq_len
                )));
            }
        }
        if self.word_vocab_size == 0 {
            return Err(Error::InvalidParam("word vocabulary must include the pad id".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidParam("dropout_rate must be in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParam("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// One convolution filter: `width x embed_dim` weights plus a bias.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ConvFilter {
    width: usize,
    weights: Vec<f64>,
    bias: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Channel {
    vocab_size: usize,
    /// Row-major `vocab_size x embed_dim`; row 0 is the pad row and stays
    /// zero.
    embedding: Vec<f64>,
    filters: Vec<ConvFilter>,
}

impl Channel {
    fn init(vocab_size: usize, config: &CnnConfig, rng: &mut ChaCha8Rng) -> Channel {
        let d = config.embed_dim;
        let mut embedding = vec![0.0; vocab_size * d];
        for value in embedding.iter_mut().skip(d) {
            *value = rng.random_range(-0.1..0.1);
        }
        let mut filters = Vec::new();
        for &width in &config.filter_widths {
            let scale = (6.0 / (width * d + 1) as f64).sqrt();
            for _ in 0..config.filters_per_width {
                let weights = (0..width * d).map(|_| rng.random_range(-scale..scale)).collect();
                filters.push(ConvFilter { width, weights, bias: 0.0 });
            }
        }
        Channel { vocab_size, embedding, filters }
    }

    fn n_pooled(&self) -> usize {
        self.filters.len()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CnnModel {
    pub config: CnnConfig,
    word: Channel,
    cui: Option<Channel>,
    dense_weights: Vec<f64>,
    dense_bias: f64,
}

/// Per-filter caches from one channel's forward pass.
struct ChannelTrace {
    /// Pre-activations per filter per position.
    pre: Vec<Vec<f64>>,
    /// Argmax position per filter (first max).
    argmax: Vec<usize>,
    /// relu + max pooled value per filter.
    pooled: Vec<f64>,
}

struct ForwardTrace {
    word_ids: Vec<usize>,
    cui_ids: Vec<usize>,
    word: ChannelTrace,
    cui: Option<ChannelTrace>,
    pooled: Vec<f64>,
    /// Probability from the dense sigmoid.
    proba: f64,
}

fn pad_to(ids: &[usize], len: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(len);
    out.extend(ids.iter().take(len).copied());
    out.resize(len, PAD_ID);
    out
}

fn channel_forward(channel: &Channel, ids: &[usize], embed_dim: usize) -> ChannelTrace {
    let len = ids.len();
    let mut pre = Vec::with_capacity(channel.filters.len());
    let mut argmax = Vec::with_capacity(channel.filters.len());
    let mut pooled = Vec::with_capacity(channel.filters.len());
    for filter in &channel.filters {
        let positions = len + 1 - filter.width;
        let mut z = Vec::with_capacity(positions);
        for p in 0..positions {
            let mut acc = filter.bias;
            for (i, &id) in ids[p..p + filter.width].iter().enumerate() {
                if id == PAD_ID {
                    continue;
                }
                let emb = &channel.embedding[id * embed_dim..(id + 1) * embed_dim];
                let kernel = &filter.weights[i * embed_dim..(i + 1) * embed_dim];
                for k in 0..embed_dim {
                    acc += kernel[k] * emb[k];
                }
            }
            z.push(acc);
        }
        let mut best = 0;
        for (p, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = p;
            }
        }
        pooled.push(z[best].max(0.0));
        argmax.push(best);
        pre.push(z);
    }
    ChannelTrace { pre, argmax, pooled }
}

impl CnnModel {
    /// Fresh model with seeded uniform embeddings/kernels and zero biases.
    pub fn new(config: CnnConfig) -> Result<CnnModel> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let word = Channel::init(config.word_vocab_size, &config, &mut rng);
        let cui = if config.use_cui_channel {
            Some(Channel::init(config.cui_vocab_size.max(1), &config, &mut rng))
        } else {
            None
        };
        let n_pooled = word.n_pooled() + cui.as_ref().map_or(0, |c| c.n_pooled());
        let scale = (6.0 / (n_pooled + 1) as f64).sqrt();
        let dense_weights = (0..n_pooled).map(|_| rng.random_range(-scale..scale)).collect();
        Ok(CnnModel { config, word, cui, dense_weights, dense_bias: 0.0 })
    }

    pub fn n_pooled_features(&self) -> usize {
        self.dense_weights.len()
    }

    fn check_ids(&self, ids: &[usize], vocab: usize) -> Result<()> {
        for &id in ids {
            if id >= vocab {
                return Err(Error::IdOutOfRange { id, vocab });
            }
        }
        Ok(())
    }

    fn trace(&self, word_ids: &[usize], cui_ids: &[usize]) -> Result<ForwardTrace> {
        self.check_ids(word_ids, self.word.vocab_size)?;
        if let Some(cui) = &self.cui {
            self.check_ids(cui_ids, cui.vocab_size)?;
        }
        let d = self.config.embed_dim;
        let word_ids = pad_to(word_ids, self.config.max_seq_len);
        let cui_ids = pad_to(cui_ids, self.config.max_seq_len);
        let word = channel_forward(&self.word, &word_ids, d);
        let cui = self.cui.as_ref().map(|c| channel_forward(c, &cui_ids, d));
        let mut pooled = word.pooled.clone();
        if let Some(c) = &cui {
            pooled.extend_from_slice(&c.pooled);
        }
        let mut u = self.dense_bias;
        for (w, x) in self.dense_weights.iter().zip(&pooled) {
            u += w * x;
        }
        Ok(ForwardTrace { word_ids, cui_ids, word, cui, pooled, proba: squash(u) })
    }

    /// P(positive | sequences). Inputs are truncated or padded to
    /// `max_seq_len`; the CUI sequence is ignored by single-channel models.
    pub fn forward(&self, word_ids: &[usize], cui_ids: &[usize]) -> Result<f64> {
        Ok(self.trace(word_ids, cui_ids)?.proba)
    }

    /// Load pre-trained embeddings from `token v1 v2 ... vd` lines into the
    /// word channel. Returns how many vocabulary tokens were covered.
    pub fn load_word_embeddings<F>(&mut self, text: &str, id_of_token: F) -> Result<usize>
    where
        F: Fn(&str) -> Option<usize>,
    {
        let d = self.config.embed_dim;
        let mut loaded = 0;
        for line in text.lines() {
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values: Vec<f64> = fields.map(|v| v.parse().unwrap_or(f64::NAN)).collect();
            if values.len() != d || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "embedding line for '{token}' must carry {d} finite values"
                )));
            }
            if let Some(id) = id_of_token(token) {
                if id == PAD_ID || id >= self.word.vocab_size {
                    continue;
                }
                self.word.embedding[id * d..(id + 1) * d].copy_from_slice(&values);
                loaded += 1;
            }
        }
        Ok(loaded)
    }

    /// Visit every trainable parameter in a fixed order: word embeddings
    /// (rows 1..), word filters (weights then bias), the same for the CUI
    /// channel, dense weights, dense bias.
    fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        let d = self.config.embed_dim;
        for value in self.word.embedding.iter_mut().skip(d) {
            f(value);
        }
        for filter in self.word.filters.iter_mut() {
            for w in filter.weights.iter_mut() {
                f(w);
            }
            f(&mut filter.bias);
        }
        if let Some(cui) = &mut self.cui {
            for value in cui.embedding.iter_mut().skip(d) {
                f(value);
            }
            for filter in cui.filters.iter_mut() {
                for w in filter.weights.iter_mut() {
                    f(w);
                }
                f(&mut filter.bias);
            }
        }
        for w in self.dense_weights.iter_mut() {
            f(w);
        }
        f(&mut self.dense_bias);
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.for_each_param_mut(|_| n += 1);
        n
    }
}

/// Gradient accumulator with the same flattened layout as
/// `for_each_param_mut`.
struct Gradients {
    word_embedding: Vec<f64>,
    word_filters: Vec<(Vec<f64>, f64)>,
    cui_embedding: Vec<f64>,
    cui_filters: Vec<(Vec<f64>, f64)>,
    dense_weights: Vec<f64>,
    dense_bias: f64,
}

impl Gradients {
    fn zeros(model: &CnnModel) -> Gradients {
        let filt =
            |c: &Channel| c.filters.iter().map(|f| (vec![0.0; f.weights.len()], 0.0)).collect();
        Gradients {
            word_embedding: vec![0.0; model.word.embedding.len()],
            word_filters: filt(&model.word),
            cui_embedding: model.cui.as_ref().map_or(Vec::new(), |c| vec![0.0; c.embedding.len()]),
            cui_filters: model.cui.as_ref().map_or(Vec::new(), filt),
            dense_weights: vec![0.0; model.dense_weights.len()],
            dense_bias: 0.0,
        }
    }

    fn flatten(&self, embed_dim: usize) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(&self.word_embedding[embed_dim..]);
        for (w, b) in &self.word_filters {
            out.extend(w);
            out.push(*b);
        }
        if !self.cui_embedding.is_empty() {
            out.extend(&self.cui_embedding[embed_dim..]);
            for (w, b) in &self.cui_filters {
                out.extend(w);
                out.push(*b);
            }
        }
        out.extend(&self.dense_weights);
        out.push(self.dense_bias);
        out
    }
}

fn bce_loss(proba: f64, label: u8) -> f64 {
    if label == 1 {
        -proba.ln()
    } else {
        -(1.0 - proba).ln()
    }
}

fn backprop_channel(
    channel: &Channel,
    trace: &ChannelTrace,
    ids: &[usize],
    d_pooled: &[f64],
    embed_dim: usize,
    grad_embedding: &mut [f64],
    grad_filters: &mut [(Vec<f64>, f64)],
) {
    for (fi, filter) in channel.filters.iter().enumerate() {
        let dp = d_pooled[fi];
        if dp == 0.0 {
            continue;
        }
        let p = trace.argmax[fi];
        // ReLU gate at the pooled maximum.
        if trace.pre[fi][p] <= 0.0 {
            continue;
        }
        let dz = dp;
        grad_filters[fi].1 += dz;
        for (i, &id) in ids[p..p + filter.width].iter().enumerate() {
            if id == PAD_ID {
                continue;
            }
            let emb = &channel.embedding[id * embed_dim..(id + 1) * embed_dim];
            let kernel = &filter.weights[i * embed_dim..(i + 1) * embed_dim];
            let gk = &mut grad_filters[fi].0[i * embed_dim..(i + 1) * embed_dim];
            for k in 0..embed_dim {
                gk[k] += dz * emb[k];
                grad_embedding[id * embed_dim + k] += dz * kernel[k];
            }
        }
    }
}

/// Accumulate one example's gradients; `dropout_mask` holds the inverted
/// keep-scales (1/(1-rate) or 0) applied to the pooled layer, or `None` at
/// evaluation time. Returns the example loss.
fn accumulate_example(
    model: &CnnModel,
    word_ids: &[usize],
    cui_ids: &[usize],
    label: u8,
    dropout_mask: Option<&[f64]>,
    grads: &mut Gradients,
) -> Result<f64> {
    let trace = model.trace(word_ids, cui_ids)?;
    let d = model.config.embed_dim;

    let dropped: Vec<f64> = match dropout_mask {
        Some(mask) => trace.pooled.iter().zip(mask).map(|(x, m)| x * m).collect(),
        None => trace.pooled.clone(),
    };
    let mut u = model.dense_bias;
    for (w, x) in model.dense_weights.iter().zip(&dropped) {
        u += w * x;
    }
    let proba = squash(u);
    let loss = bce_loss(proba, label);

    // dL/du for sigmoid + BCE
    let du = proba - label as f64;
    grads.dense_bias += du;
    let mut d_pooled = vec![0.0; dropped.len()];
    for i in 0..dropped.len() {
        grads.dense_weights[i] += du * dropped[i];
        d_pooled[i] = du * model.dense_weights[i];
        if let Some(mask) = dropout_mask {
            d_pooled[i] *= mask[i];
        }
    }

    let n_word = model.word.n_pooled();
    backprop_channel(
        &model.word,
        &trace.word,
        &trace.word_ids,
        &d_pooled[..n_word],
        d,
        &mut grads.word_embedding,
        &mut grads.word_filters,
    );
    if let (Some(cui), Some(cui_trace)) = (&model.cui, &trace.cui) {
        backprop_channel(
            cui,
            cui_trace,
            &trace.cui_ids,
            &d_pooled[n_word..],
            d,
            &mut grads.cui_embedding,
            &mut grads.cui_filters,
        );
    }
    Ok(loss)
}

fn apply_gradients(model: &mut CnnModel, grads: &Gradients, scale: f64) {
    let d = model.config.embed_dim;
    for (i, value) in model.word.embedding.iter_mut().enumerate().skip(d) {
        *value -= scale * grads.word_embedding[i];
    }
    for (filter, (gw, gb)) in model.word.filters.iter_mut().zip(&grads.word_filters) {
        for (w, g) in filter.weights.iter_mut().zip(gw) {
            *w -= scale * g;
        }
        filter.bias -= scale * gb;
    }
    if let Some(cui) = &mut model.cui {
        for (i, value) in cui.embedding.iter_mut().enumerate().skip(d) {
            *value -= scale * grads.cui_embedding[i];
        }
        for (filter, (gw, gb)) in cui.filters.iter_mut().zip(&grads.cui_filters) {
            for (w, g) in filter.weights.iter_mut().zip(gw) {
                *w -= scale * g;
            }
            filter.bias -= scale * gb;
        }
    }
    for (w, g) in model.dense_weights.iter_mut().zip(&grads.dense_weights) {
        *w -= scale * g;
    }
    model.dense_bias -= scale * grads.dense_bias;
}

/// Word-id and CUI-id sequences with labels.
#[derive(Clone, Debug, Default)]
pub struct CnnDataset {
    pub word_ids: Vec<Vec<usize>>,
    pub cui_ids: Vec<Vec<usize>>,
    pub labels: Vec<u8>,
}

impl CnnDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Mini-batch SGD on mean binary cross-entropy. Returns the per-epoch mean
/// training loss; training is single-threaded so a fixed seed reproduces the
/// curve bitwise.
pub fn train_cnn(model: &mut CnnModel, dataset: &CnnDataset) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if dataset.word_ids.len() != dataset.len() || dataset.cui_ids.len() != dataset.len() {
        return Err(Error::InvalidParam("dataset columns must have equal length".into()));
    }
    let n_pos = dataset.labels.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 || n_pos == dataset.len() {
        return Err(Error::SingleClass);
    }

    let config = model.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let n_pooled = model.n_pooled_features();
    let mut curve = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = Gradients::zeros(model);
            let mut batch_loss = 0.0;
            for &i in batch {
                let mask: Option<Vec<f64>> = if config.dropout_rate > 0.0 {
                    let keep = 1.0 - config.dropout_rate;
                    Some(
                        (0..n_pooled)
                            .map(|_| {
                                if rng.random_range(0.0..1.0) < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                            .collect(),
                    )
                } else {
                    None
                };
                batch_loss += accumulate_example(
                    model,
                    &dataset.word_ids[i],
                    &dataset.cui_ids[i],
                    dataset.labels[i],
                    mask.as_deref(),
                    &mut grads,
                )?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_index });
            }
            apply_gradients(model, &grads, config.learning_rate / batch.len() as f64);
            epoch_loss += batch_loss;
        }
        curve.push(epoch_loss / dataset.len() as f64);
    }
    Ok(curve)
}

/// Mean loss of the model on a dataset without dropout.
pub fn evaluate_loss(model: &CnnModel, dataset: &CnnDataset) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..dataset.len() {
        let p = model.forward(&dataset.word_ids[i], &dataset.cui_ids[i])?;
        total += bce_loss(p, dataset.labels[i]);
    }
    Ok(total / dataset.len() as f64)
}

/// Compare backprop gradients with central finite differences over every
/// parameter; returns the maximum relative error
/// `|ga - gn| / max(|ga|, |gn|, 1e-8)`. Dropout is disabled. Callers should
/// skip configurations flagged by `kink_margin` — finite differences step
/// across ReLU and max-pool kinks otherwise.
pub fn gradient_check(
    model: &CnnModel,
    word_ids: &[usize],
    cui_ids: &[usize],
    label: u8,
    epsilon: f64,
) -> Result<f64> {
    let mut grads = Gradients::zeros(model);
    accumulate_example(model, word_ids, cui_ids, label, None, &mut grads)?;
    let analytic = grads.flatten(model.config.embed_dim);

    let mut probe = model.clone();
    let n = probe.param_count();
    debug_assert_eq!(n, analytic.len());

    let mut max_rel = 0.0;
    #[allow(clippy::needless_range_loop)] // `target` drives the param read and write closures
    for target in 0..n {
        let read = |m: &mut CnnModel| {
            let mut i = 0;
            let mut value = 0.0;
            m.for_each_param_mut(|p| {
                if i == target {
                    value = *p;
                }
                i += 1;
            });
            value
        };
        let write = |m: &mut CnnModel, v: f64| {
            let mut i = 0;
            m.for_each_param_mut(|p| {
                if i == target {
                    *p = v;
                }
                i += 1;
            });
        };
        let original = read(&mut probe);
        write(&mut probe, original + epsilon);
        let up = evaluate_example_loss(&probe, word_ids, cui_ids, label)?;
        write(&mut probe, original - epsilon);
        let down = evaluate_example_loss(&probe, word_ids, cui_ids, label)?;
        write(&mut probe, original);

        let numeric = (up - down) / (2.0 * epsilon);
        let ga = analytic[target];
        let rel = (ga - numeric).abs() / ga.abs().max(numeric.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}

fn evaluate_example_loss(
    model: &CnnModel,
    word_ids: &[usize],
    cui_ids: &[usize],
    label: u8,
) -> Result<f64> {
    Ok(bce_loss(model.forward(word_ids, cui_ids)?, label))
}

/// Smallest margin to a ReLU or max-pool kink that could move the pooled
/// output: per filter, the distance of the maximum pre-activation from the
/// ReLU gate and its gap over the runner-up in pooled (post-ReLU) space.
/// Losing positions deep below the winner cannot flip under a small
/// finite-difference step, so they do not count. Gradient checks should
/// re-draw model or input when this is small relative to the step.
pub fn kink_margin(model: &CnnModel, word_ids: &[usize], cui_ids: &[usize]) -> Result<f64> {
    let trace = model.trace(word_ids, cui_ids)?;
    let mut margin = f64::INFINITY;
    let mut scan = |channel: &ChannelTrace| {
        for z in &channel.pre {
            let mut top = f64::NEG_INFINITY;
            let mut second = f64::NEG_INFINITY;
            for &v in z {
                if v > top {
                    second = top;
                    top = v;
                } else if v > second {
                    second = v;
                }
            }
            margin = margin.min(top.abs());
            if top > 0.0 && z.len() > 1 {
                // the pooled competitor is relu(second), never below zero
                margin = margin.min(top - second.max(0.0));
            }
        }
    };
    scan(&trace.word);
    if let Some(cui) = &trace.cui {
        scan(cui);
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(seed: u64) -> CnnConfig {
        CnnConfig {
            embed_dim: 4,
            filter_widths: vec![2],
            filters_per_width: 2,
            word_vocab_size: 10,
            cui_vocab_size: 6,
            use_cui_channel: true,
            max_seq_len: 5,
            dropout_rate: 0.0,
            learning_rate: 0.1,
            epochs: 5,
            batch_size: 4,
            seed,
        }
    }

    #[test]
    fn all_pad_input_gives_half_at_init() {
        let model = CnnModel::new(tiny_config(3)).unwrap();
        let p = model.forward(&[], &[]).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn zero_dense_weights_give_sigmoid_of_bias() {
        let mut model = CnnModel::new(tiny_config(4)).unwrap();
        for w in model.dense_weights.iter_mut() {
            *w = 0.0;
        }
        model.dense_bias = 0.7;
        let p = model.forward(&[1, 2, 3], &[1, 2]).unwrap();
        assert!((p - squash(0.7)).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_id_rejected() {
        let model = CnnModel::new(tiny_config(5)).unwrap();
        assert!(matches!(
            model.forward(&[10], &[]),
            Err(Error::IdOutOfRange { id: 10, vocab: 10 })
        ));
        assert!(model.forward(&[9], &[5]).is_ok());
    }

    #[test]
    fn forward_matches_straight_line_recomputation() {
        let model = CnnModel::new(tiny_config(6)).unwrap();
        let word_ids = [1usize, 4, 7];
        let cui_ids = [2usize, 3];
        let p = model.forward(&word_ids, &cui_ids).unwrap();

        // independent straight-line recomputation
        let d = model.config.embed_dim;
        let len = model.config.max_seq_len;
        let pad = |ids: &[usize]| {
            let mut v: Vec<usize> = ids.to_vec();
            v.resize(len, 0);
            v
        };
        let mut pooled = Vec::new();
        for (channel, ids) in [(&model.word, pad(&word_ids)), (model.cui.as_ref().unwrap(), pad(&cui_ids))]
        {
            for filter in &channel.filters {
                let mut best = f64::NEG_INFINITY;
                for p0 in 0..=(len - filter.width) {
                    let mut z = filter.bias;
                    for i in 0..filter.width {
                        let id = ids[p0 + i];
                        for k in 0..d {
                            z += filter.weights[i * d + k] * channel.embedding[id * d + k];
                        }
                    }
                    if z > best {
                        best = z;
                    }
                }
                pooled.push(best.max(0.0));
            }
        }
        let mut u = model.dense_bias;
        for (w, x) in model.dense_weights.iter().zip(&pooled) {
            u += w * x;
        }
        let expected = 1.0 / (1.0 + (-u).exp());
        assert!((p - expected).abs() < 1e-12, "{p} vs {expected}");
    }

    #[test]
    fn pad_append_invariance_is_exact() {
        let model = CnnModel::new(tiny_config(7)).unwrap();
        let a = model.forward(&[1, 2], &[1]).unwrap();
        let b = model.forward(&[1, 2, 0, 0], &[1, 0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncation_applies_beyond_max_seq_len() {
        let model = CnnModel::new(tiny_config(8)).unwrap();
        let a = model.forward(&[1, 2, 3, 4, 5], &[]).unwrap();
        let b = model.forward(&[1, 2, 3, 4, 5, 6, 7], &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn filter_permutation_with_matched_dense_weights_preserves_output() {
        let mut model = CnnModel::new(tiny_config(9)).unwrap();
        let word_ids = [1usize, 3, 5];
        let cui_ids = [2usize];
        let before = model.forward(&word_ids, &cui_ids).unwrap();
        model.word.filters.swap(0, 1);
        model.dense_weights.swap(0, 1);
        let after = model.forward(&word_ids, &cui_ids).unwrap();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn gradient_check_on_tiny_model() {
        let model = CnnModel::new(tiny_config(11)).unwrap();
        let err = gradient_check(&model, &[1, 4, 7], &[2, 3], 1, 1e-5).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn near_perfect_prediction_has_near_zero_gradients() {
        let mut model = CnnModel::new(tiny_config(12)).unwrap();
        model.dense_bias = 30.0; // saturated positive prediction
        let mut grads = Gradients::zeros(&model);
        let loss = accumulate_example(&model, &[1, 2], &[1], 1, None, &mut grads).unwrap();
        assert!(loss < 1e-8);
        let flat = grads.flatten(model.config.embed_dim);
        assert!(flat.iter().all(|g| g.abs() < 1e-8));
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut config = tiny_config(13);
        config.learning_rate = 0.0;
        config.epochs = 3;
        let mut model = CnnModel::new(config).unwrap();
        let before = serde_json::to_string(&model).unwrap();
        let dataset = CnnDataset {
            word_ids: vec![vec![1, 2], vec![3, 4]],
            cui_ids: vec![vec![1], vec![2]],
            labels: vec![1, 0],
        };
        train_cnn(&mut model, &dataset).unwrap();
        let after = serde_json::to_string(&model).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn same_seed_reproduces_loss_curve() {
        let dataset = CnnDataset {
            word_ids: vec![vec![1, 2, 3], vec![4, 5], vec![6], vec![7, 8, 9]],
            cui_ids: vec![vec![1], vec![2, 3], vec![4], vec![5]],
            labels: vec![1, 0, 1, 0],
        };
        let mut config = tiny_config(14);
        config.dropout_rate = 0.5;
        let mut m1 = CnnModel::new(config.clone()).unwrap();
        let mut m2 = CnnModel::new(config).unwrap();
        let c1 = train_cnn(&mut m1, &dataset).unwrap();
        let c2 = train_cnn(&mut m2, &dataset).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn batch_loss_equals_mean_of_example_losses() {
        let model = CnnModel::new(tiny_config(15)).unwrap();
        let dataset = CnnDataset {
            word_ids: vec![vec![1, 2], vec![3], vec![4, 5, 6]],
            cui_ids: vec![vec![1], vec![], vec![2]],
            labels: vec![1, 0, 1],
        };
        let mean = evaluate_loss(&model, &dataset).unwrap();
        let mut manual = 0.0;
        for i in 0..dataset.len() {
            let p = model.forward(&dataset.word_ids[i], &dataset.cui_ids[i]).unwrap();
            manual += bce_loss(p, dataset.labels[i]);
        }
        manual /= dataset.len() as f64;
        assert!((mean - manual).abs() < 1e-12);
    }

    #[test]
    fn embeddings_load_from_text() {
        let mut model = CnnModel::new(tiny_config(16)).unwrap();
        let text = "renal 1.0 2.0 3.0 4.0\nsepsis 0.5 0.5 0.5 0.5\nunknown 9 9 9 9\n";
        let ids = |t: &str| match t {
            "renal" => Some(1),
            "sepsis" => Some(2),
            _ => None,
        };
        let loaded = model.load_word_embeddings(text, ids).unwrap();
        assert_eq!(loaded, 2);
        let d = model.config.embed_dim;
        assert_eq!(&model.word.embedding[d..2 * d], &[1.0, 2.0, 3.0, 4.0]);

        let bad = "renal 1.0 2.0\n";
        assert!(model.load_word_embeddings(bad, ids).is_err());
    }

    #[test]
    fn single_channel_model_ignores_cui_ids() {
        let mut config = tiny_config(17);
        config.use_cui_channel = false;
        let model = CnnModel::new(config).unwrap();
        let a = model.forward(&[1, 2], &[]).unwrap();
        let b = model.forward(&[1, 2], &[3, 4]).unwrap();
        assert_eq!(a, b);
    }
}
