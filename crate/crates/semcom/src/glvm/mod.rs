//! Latent-variable codec trained with the channel in the loop.
//!
//! A recognition network maps images to a latent mean/log-variance pair; a
//! reparameterized sample is truncated to a random prefix (nested dropout),
//! clamped to [-1, 1], corrupted by the additive channel at a PSNR drawn per
//! batch, and fed to both a generative decoder and a classifier. Training on
//! random prefixes orders the latent dimensions by importance, so at use
//! time any prefix length decodes without retraining: the per-slot latent
//! dimension simply follows the channel state through a [`LatentPolicy`].

mod nn;
mod persist;

use ndarray::{concatenate, s, Array1, Array2, Axis, NdFloat};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{sample_psnr, ChannelSpec};
use crate::data::LabeledImageSet;
use crate::error::{Error, Result};

pub use nn::Activation;
use nn::{c, Adam, LayerGrad, Mlp};

/// Numerical guards on the log-variance head and the reconstruction log.
const LOGVAR_CLAMP: f64 = 10.0;
const BCE_EPS: f64 = 1e-7;

/// Training hyperparameters. Defaults give the fully-connected
/// 784 -> 256 -> 128 -> (2 x 64) encoder, mirrored decoder, 64 -> 64 -> 10
/// classifier, 30 epochs of Adam at 1e-3, batch 128, KL weight 1 with a
/// linear warmup over the first 20% of steps, and nested-dropout prefix
/// probability 0.2. The classification weight is calibrated against the
/// sum-over-pixels reconstruction term so the shared encoder serves both
/// heads.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub input_dim: usize,
    pub n_classes: usize,
    pub d_max: usize,
    pub enc_hidden: Vec<usize>,
    pub dec_hidden: Vec<usize>,
    pub cls_hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub w_kl: f64,
    pub w_cls: f64,
    pub kl_warmup_frac: f64,
    pub nested_dropout_p: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            input_dim: 784,
            n_classes: 10,
            d_max: 64,
            enc_hidden: vec![256, 128],
            dec_hidden: vec![128, 256],
            cls_hidden: vec![64],
            epochs: 30,
            batch_size: 128,
            learning_rate: 1e-3,
            w_kl: 1.0,
            w_cls: 100.0,
            kl_warmup_frac: 0.2,
            nested_dropout_p: 0.2,
            seed: 2,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.d_max == 0 {
            return Err(Error::invalid("d_max must be at least 1"));
        }
        if self.input_dim == 0 || self.n_classes == 0 {
            return Err(Error::invalid("input_dim and n_classes must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch_size and epochs must be positive"));
        }
        if !(self.nested_dropout_p > 0.0 && self.nested_dropout_p <= 1.0) {
            return Err(Error::invalid("nested_dropout_p must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.kl_warmup_frac) {
            return Err(Error::invalid("kl_warmup_frac must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Per-term training losses (batch means).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub recon: f64,
    pub kl: f64,
    pub cls: f64,
    pub total: f64,
}

/// Provenance recorded with a trained codec.
#[derive(Debug, Clone)]
pub struct TrainMeta {
    pub epochs: usize,
    pub seed: u64,
    pub final_losses: LossTerms,
    /// Per-epoch mean losses; empty on codecs loaded from disk.
    pub history: Vec<LossTerms>,
}

/// Trained recognition/generative/classifier triple with prefix-decodable
/// latents of maximum width `d_max`.
#[derive(Debug, Clone)]
pub struct LatentCodec {
    encoder: Mlp<f32>,
    decoder: Mlp<f32>,
    classifier: Mlp<f32>,
    d_max: usize,
    meta: TrainMeta,
}

impl LatentCodec {
    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.classifier.out_dim()
    }

    pub fn meta(&self) -> &TrainMeta {
        &self.meta
    }

    /// Untrained codec with randomly initialized weights; the baseline for
    /// chance-level comparisons.
    pub fn untrained(config: &TrainConfig) -> Result<LatentCodec> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let nets = Nets::<f32>::new(config, &mut rng);
        Ok(LatentCodec {
            encoder: nets.encoder,
            decoder: nets.decoder,
            classifier: nets.classifier,
            d_max: config.d_max,
            meta: TrainMeta {
                epochs: 0,
                seed: config.seed,
                final_losses: LossTerms {
                    recon: f64::NAN,
                    kl: f64::NAN,
                    cls: f64::NAN,
                    total: f64::NAN,
                },
                history: Vec::new(),
            },
        })
    }

    /// Clamped latent means for a batch of images, full `d_max` width.
    pub fn encode_batch(&self, images: &Array2<f32>) -> Result<Array2<f32>> {
        if images.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "images have width {}, expected {}",
                images.ncols(),
                self.input_dim()
            )));
        }
        let out = self.encoder.forward(images);
        let mu = out.slice(s![.., ..self.d_max]).to_owned();
        Ok(mu.mapv(|v| v.clamp(-1.0, 1.0)))
    }

    fn pad_latent(&self, latent: &[f32]) -> Result<Array2<f32>> {
        if latent.len() > self.d_max {
            return Err(Error::invalid(format!(
                "latent has {} entries, maximum is {}",
                latent.len(),
                self.d_max
            )));
        }
        if latent.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("latent entries must be finite"));
        }
        let mut row = Array2::zeros((1, self.d_max));
        for (i, &v) in latent.iter().enumerate() {
            row[(0, i)] = v;
        }
        Ok(row)
    }
}

/// Runs the recognition network on one image and returns the first `d`
/// latent means, clamped to [-1, 1]. Prefix property: the result equals the
/// first `d` entries of the full-width encoding.
pub fn encode(image: &[f32], codec: &LatentCodec, d: usize) -> Result<Vec<f32>> {
    if d == 0 || d > codec.d_max {
        return Err(Error::invalid(format!(
            "latent dimension {d} outside 1..={}",
            codec.d_max
        )));
    }
    if image.len() != codec.input_dim() {
        return Err(Error::invalid("image length != encoder input width"));
    }
    let x = Array2::from_shape_vec((1, image.len()), image.to_vec())
        .expect("shape matches by construction");
    let mu = codec.encode_batch(&x)?;
    Ok(mu.slice(s![0, ..d]).to_vec())
}

/// Zero-pads a (possibly noisy, possibly truncated) latent to `d_max` and
/// classifies it. Deterministic; ties break to the lowest label.
pub fn classify(latent: &[f32], codec: &LatentCodec) -> Result<(u8, Vec<f32>)> {
    let row = codec.pad_latent(latent)?;
    let logits_mat = codec.classifier.forward(&row);
    let logits: Vec<f32> = logits_mat.row(0).to_vec();
    let label = argmax(&logits);
    Ok((label as u8, logits))
}

/// Decodes a latent into an image; the sigmoid output stays in [0, 1].
pub fn reconstruct(latent: &[f32], codec: &LatentCodec) -> Result<Vec<f32>> {
    let row = codec.pad_latent(latent)?;
    let out = codec.decoder.forward(&row);
    Ok(out.row(0).to_vec())
}

fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Piecewise-constant map from channel PSNR to latent dimension,
/// non-decreasing in PSNR: a better channel sends more latents.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPolicy {
    /// `(psnr_cutoff_db, dim)` with strictly descending cutoffs.
    breakpoints: Vec<(f64, usize)>,
    /// Dimension used below every cutoff.
    floor_dim: usize,
}

impl LatentPolicy {
    pub fn new(breakpoints: Vec<(f64, usize)>, floor_dim: usize) -> Result<Self> {
        if floor_dim == 0 || breakpoints.iter().any(|&(_, d)| d == 0) {
            return Err(Error::invalid("latent dimensions must be positive"));
        }
        for w in breakpoints.windows(2) {
            if w[1].0 >= w[0].0 {
                return Err(Error::invalid("PSNR cutoffs must be strictly descending"));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::invalid("dimensions must be non-decreasing in PSNR"));
            }
        }
        if let Some(&(_, last_dim)) = breakpoints.last() {
            if floor_dim > last_dim {
                return Err(Error::invalid("dimensions must be non-decreasing in PSNR"));
            }
        }
        Ok(LatentPolicy {
            breakpoints,
            floor_dim,
        })
    }

    /// Default policy: PSNR >= 25 dB sends 4 latents, anything below sends
    /// 3. Averages dimension 3.4 under the uniform five-level dynamic
    /// schedule; two latents carry too little to classify ten classes
    /// reliably under heavy noise, so the floor stays at 3.
    pub fn default_policy() -> Self {
        LatentPolicy::new(vec![(25.0, 4), (15.0, 3)], 3).expect("static table is valid")
    }

    pub fn select(&self, psnr_db: f64) -> usize {
        for &(cutoff, dim) in &self.breakpoints {
            if psnr_db >= cutoff {
                return dim;
            }
        }
        self.floor_dim
    }
}

/// Piecewise-constant lookup of the latent dimension for a channel state.
pub fn select_latent_dim(psnr_db: f64, policy: &LatentPolicy) -> usize {
    policy.select(psnr_db)
}

/// How [`evaluate`] picks the per-image latent dimension.
#[derive(Debug, Clone, Copy)]
pub enum DimSelector<'a> {
    Fixed(usize),
    Policy(&'a LatentPolicy),
}

/// Aggregate accuracy/error of a codec on a test set.
#[derive(Debug, Clone, Copy)]
pub struct EvalReport {
    pub accuracy: f64,
    pub recon_mse: f64,
    pub mean_latent_dim: f64,
    pub n_samples: usize,
}

/// Encodes, transmits and decodes every test item: per image the PSNR is
/// sampled from the channel (`None` disables the channel entirely), the
/// latent dimension comes from the selector, noise hits only the
/// transmitted prefix, and the receiver zero-pads before classifying and
/// reconstructing.
pub fn evaluate(
    codec: &LatentCodec,
    set: &LabeledImageSet,
    channel: Option<&ChannelSpec>,
    selector: DimSelector<'_>,
    seed: u64,
) -> Result<EvalReport> {
    if set.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    if let DimSelector::Fixed(d) = selector {
        if d == 0 || d > codec.d_max {
            return Err(Error::invalid(format!(
                "latent dimension {d} outside 1..={}",
                codec.d_max
            )));
        }
    }
    if let Some(spec) = channel {
        spec.validate()?;
    }
    let n = set.len();
    let mu = codec.encode_batch(&set.images)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut latents = Array2::<f32>::zeros((n, codec.d_max));
    let mut dim_sum = 0usize;
    for i in 0..n {
        let psnr = channel.map(|spec| sample_psnr(spec, &mut rng));
        let d = match selector {
            DimSelector::Fixed(d) => d,
            DimSelector::Policy(policy) => {
                policy.select(psnr.unwrap_or(f64::INFINITY)).min(codec.d_max)
            }
        };
        dim_sum += d;
        let sigma = match (channel, psnr) {
            (Some(spec), Some(p)) => spec.noise_sigma(p),
            _ => 0.0,
        };
        for j in 0..d {
            let noise = if sigma > 0.0 {
                let g: f64 = StandardNormal.sample(&mut rng);
                (g * sigma) as f32
            } else {
                0.0
            };
            latents[(i, j)] = mu[(i, j)] + noise;
        }
    }

    let logits = codec.classifier.forward(&latents);
    let recon = codec.decoder.forward(&latents);

    let mut correct = 0usize;
    for i in 0..n {
        let row: Vec<f32> = logits.row(i).to_vec();
        if argmax(&row) as u8 == set.labels[i] {
            correct += 1;
        }
    }
    let diff = &recon - &set.images;
    let recon_mse = diff.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>()
        / (n * set.images.ncols()) as f64;

    Ok(EvalReport {
        accuracy: correct as f64 / n as f64,
        recon_mse,
        mean_latent_dim: dim_sum as f64 / n as f64,
        n_samples: n,
    })
}

/// The three networks at a given precision.
struct Nets<F> {
    encoder: Mlp<F>,
    decoder: Mlp<F>,
    classifier: Mlp<F>,
    d_max: usize,
}

impl<F: NdFloat> Nets<F> {
    fn new(config: &TrainConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut enc_dims = vec![config.input_dim];
        enc_dims.extend(&config.enc_hidden);
        enc_dims.push(2 * config.d_max);
        let mut dec_dims = vec![config.d_max];
        dec_dims.extend(&config.dec_hidden);
        dec_dims.push(config.input_dim);
        let mut cls_dims = vec![config.d_max];
        cls_dims.extend(&config.cls_hidden);
        cls_dims.push(config.n_classes);
        Nets {
            encoder: Mlp::new(&enc_dims, Activation::Identity, rng),
            decoder: Mlp::new(&dec_dims, Activation::Sigmoid, rng),
            classifier: Mlp::new(&cls_dims, Activation::Identity, rng),
            d_max: config.d_max,
        }
    }
}

/// Fixed per-batch randomness: reparameterization noise, channel noise
/// (already scaled by sigma), and the nested-dropout prefix length.
struct StepNoise<F> {
    eps: Array2<F>,
    eta: Array2<F>,
    d_keep: usize,
}

struct StepGrads<F> {
    enc: Vec<LayerGrad<F>>,
    dec: Vec<LayerGrad<F>>,
    cls: Vec<LayerGrad<F>>,
}

/// One training step's loss and gradients, shared between the f32 training
/// loop and the f64 gradient verification.
fn loss_and_grads<F: NdFloat>(
    nets: &Nets<F>,
    x: &Array2<F>,
    labels: &[u8],
    noise: &StepNoise<F>,
    w_kl: F,
    w_cls: F,
) -> (LossTerms, StepGrads<F>) {
    let b = x.nrows();
    let d_max = nets.d_max;
    let inv_b = F::one() / c::<F>(b as f64);
    let one = F::one();

    // Recognition pass: mean head and clamped log-variance head.
    let enc_cache = nets.encoder.forward_cached(x);
    let enc_out = enc_cache.output();
    let mu = enc_out.slice(s![.., ..d_max]).to_owned();
    let logv_raw = enc_out.slice(s![.., d_max..]).to_owned();
    let lc = c::<F>(LOGVAR_CLAMP);
    let logv = logv_raw.mapv(|v| v.max(-lc).min(lc));
    let logv_pass = logv_raw.mapv(|v| if (-lc..=lc).contains(&v) { one } else { F::zero() });
    let sig = logv.mapv(|v| (v * c::<F>(0.5)).exp());

    // Reparameterized sample, prefix mask, clamp, channel noise.
    let z = &mu + &(&sig * &noise.eps);
    let mask = Array1::from_shape_fn(d_max, |j| if j < noise.d_keep { one } else { F::zero() });
    let zm = &z * &mask;
    let zc = zm.mapv(|v| v.max(-one).min(one));
    let clamp_pass = zm.mapv(|v| if (-one..=one).contains(&v) { one } else { F::zero() });
    let zt = &zc + &(&noise.eta * &mask);

    // Generative and classification passes on the received latents.
    let dec_cache = nets.decoder.forward_cached(&zt);
    let recon = dec_cache.output();
    let cls_cache = nets.classifier.forward_cached(&zt);
    let logits = cls_cache.output();

    // Losses (means over the batch).
    let eps_f = c::<F>(BCE_EPS);
    let mut recon_loss = F::zero();
    ndarray::Zip::from(recon).and(x).for_each(|&p, &t| {
        let pc = p.max(eps_f).min(one - eps_f);
        recon_loss = recon_loss - (t * pc.ln() + (one - t) * (one - pc).ln());
    });
    recon_loss = recon_loss * inv_b;

    let mut kl_loss = F::zero();
    ndarray::Zip::from(&mu).and(&logv).for_each(|&m, &lv| {
        kl_loss = kl_loss + c::<F>(0.5) * (m * m + lv.exp() - one - lv);
    });
    kl_loss = kl_loss * inv_b;

    // Row-stable softmax cross-entropy.
    let mut softmax = logits.clone();
    let mut cls_loss = F::zero();
    for (i, mut row) in softmax.rows_mut().into_iter().enumerate() {
        let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
        let p = row[labels[i] as usize].max(c::<F>(1e-30));
        cls_loss = cls_loss - p.ln();
    }
    cls_loss = cls_loss * inv_b;

    let total = recon_loss + w_kl * kl_loss + w_cls * cls_loss;
    let losses = LossTerms {
        recon: recon_loss.to_f64().unwrap_or(f64::NAN),
        kl: kl_loss.to_f64().unwrap_or(f64::NAN),
        cls: cls_loss.to_f64().unwrap_or(f64::NAN),
        total: total.to_f64().unwrap_or(f64::NAN),
    };

    // Backward. Fused gradients at both heads: (recon - x)/B through the
    // decoder's sigmoid, w_cls (softmax - onehot)/B through the logits.
    let d_dec_pre = (recon - x).mapv(|v| v * inv_b);
    let (dec_grads, d_zt_dec) = nets.decoder.backward(&dec_cache, d_dec_pre, true);

    let mut d_logits = softmax;
    for (i, mut row) in d_logits.rows_mut().into_iter().enumerate() {
        let l = labels[i] as usize;
        row[l] = row[l] - one;
    }
    d_logits.mapv_inplace(|v| v * w_cls * inv_b);
    let (cls_grads, d_zt_cls) = nets.classifier.backward(&cls_cache, d_logits, true);

    let d_zt = d_zt_dec + d_zt_cls;
    // Channel noise is additive; the clamp and the prefix mask gate the
    // gradient elementwise.
    let d_z = d_zt * &clamp_pass * &mask;
    let d_mu = &d_z + &mu.mapv(|m| m * w_kl * inv_b);
    let half = c::<F>(0.5);
    let d_logv_sample = &d_z * &noise.eps * &sig.mapv(|s| s * half);
    let d_logv_kl = logv.mapv(|lv| (lv.exp() - one) * half * w_kl * inv_b);
    let d_logv = (&d_logv_sample + &d_logv_kl) * &logv_pass;

    let d_enc_out = concatenate(Axis(1), &[d_mu.view(), d_logv.view()])
        .expect("mean and log-variance heads share the batch dimension");
    let (enc_grads, _) = nets.encoder.backward(&enc_cache, d_enc_out, true);

    (
        losses,
        StepGrads {
            enc: enc_grads,
            dec: dec_grads,
            cls: cls_grads,
        },
    )
}

/// Truncated geometric prefix length: `P(d = k) ~ p (1 - p)^(k-1)`, capped
/// at `d_max`.
fn sample_prefix_dim(p: f64, d_max: usize, rng: &mut ChaCha8Rng) -> usize {
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = rng.random();
    let d = 1 + ((1.0 - u).ln() / (1.0 - p).ln()).floor() as usize;
    d.min(d_max)
}

/// Trains the codec on a labeled image set with the given channel in the
/// loop. The loss is `BCE(x, xhat) + w_kl KL(q(z|x) || N(0, I)) +
/// w_cls CE(label, classifier(zt))` where `zt` is the clamped,
/// prefix-masked, noise-corrupted latent sample.
pub fn train(
    dataset: &LabeledImageSet,
    channel: &ChannelSpec,
    config: &TrainConfig,
) -> Result<LatentCodec> {
    config.validate()?;
    channel.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    if dataset.images.ncols() != config.input_dim {
        return Err(Error::invalid(format!(
            "dataset width {} != configured input_dim {}",
            dataset.images.ncols(),
            config.input_dim
        )));
    }
    if dataset
        .labels
        .iter()
        .any(|&l| l as usize >= config.n_classes)
    {
        return Err(Error::invalid("label outside the configured class count"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut nets = Nets::<f32>::new(config, &mut rng);
    let mut opt_enc = Adam::new(&nets.encoder, config.learning_rate);
    let mut opt_dec = Adam::new(&nets.decoder, config.learning_rate);
    let mut opt_cls = Adam::new(&nets.classifier, config.learning_rate);

    let n = dataset.len();
    let batches_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = (config.epochs * batches_per_epoch).max(1);
    let warmup_steps = (config.kl_warmup_frac * total_steps as f64).max(1.0);

    let mut indices: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        indices.shuffle(&mut rng);
        let mut sums = LossTerms {
            recon: 0.0,
            kl: 0.0,
            cls: 0.0,
            total: 0.0,
        };
        for chunk in indices.chunks(config.batch_size) {
            let x = dataset.images.select(Axis(0), chunk);
            let labels: Vec<u8> = chunk.iter().map(|&i| dataset.labels[i]).collect();
            let bsz = chunk.len();

            let d_keep = sample_prefix_dim(config.nested_dropout_p, config.d_max, &mut rng);
            let psnr = sample_psnr(channel, &mut rng);
            let sigma = channel.noise_sigma(psnr);
            let noise = StepNoise {
                eps: Array2::from_shape_fn((bsz, config.d_max), |_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g as f32
                }),
                eta: Array2::from_shape_fn((bsz, config.d_max), |_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    (g * sigma) as f32
                }),
                d_keep,
            };

            let warm = ((step + 1) as f64 / warmup_steps).min(1.0);
            let (losses, grads) = loss_and_grads(
                &nets,
                &x,
                &labels,
                &noise,
                (config.w_kl * warm) as f32,
                config.w_cls as f32,
            );
            if !losses.total.is_finite() {
                return Err(Error::numeric(format!(
                    "training loss diverged at epoch {epoch}, step {step}: {losses:?}"
                )));
            }
            opt_enc.step(&mut nets.encoder, &grads.enc);
            opt_dec.step(&mut nets.decoder, &grads.dec);
            opt_cls.step(&mut nets.classifier, &grads.cls);

            sums.recon += losses.recon * bsz as f64;
            sums.kl += losses.kl * bsz as f64;
            sums.cls += losses.cls * bsz as f64;
            sums.total += losses.total * bsz as f64;
            step += 1;
        }
        history.push(LossTerms {
            recon: sums.recon / n as f64,
            kl: sums.kl / n as f64,
            cls: sums.cls / n as f64,
            total: sums.total / n as f64,
        });
    }

    let final_losses = *history.last().expect("at least one epoch");
    Ok(LatentCodec {
        encoder: nets.encoder,
        decoder: nets.decoder,
        classifier: nets.classifier,
        d_max: config.d_max,
        meta: TrainMeta {
            epochs: config.epochs,
            seed: config.seed,
            final_losses,
            history,
        },
    })
}

/// Mean training loss over a dataset under seeded noise, without updating
/// parameters. Lets smoke tests compare a trained codec against its own
/// initialization on identical terms.
pub fn dataset_loss(
    codec: &LatentCodec,
    dataset: &LabeledImageSet,
    channel: &ChannelSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let nets = Nets {
        encoder: codec.encoder.clone(),
        decoder: codec.decoder.clone(),
        classifier: codec.classifier.clone(),
        d_max: codec.d_max,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dataset.len();
    let mut total = 0.0;
    for start in (0..n).step_by(config.batch_size) {
        let chunk: Vec<usize> = (start..(start + config.batch_size).min(n)).collect();
        let x = dataset.images.select(Axis(0), &chunk);
        let labels: Vec<u8> = chunk.iter().map(|&i| dataset.labels[i]).collect();
        let bsz = chunk.len();
        let d_keep = sample_prefix_dim(config.nested_dropout_p, config.d_max, &mut rng);
        let psnr = sample_psnr(channel, &mut rng);
        let sigma = channel.noise_sigma(psnr);
        let noise = StepNoise {
            eps: Array2::from_shape_fn((bsz, config.d_max), |_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g as f32
            }),
            eta: Array2::from_shape_fn((bsz, config.d_max), |_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                (g * sigma) as f32
            }),
            d_keep,
        };
        let (losses, _) = loss_and_grads(
            &nets,
            &x,
            &labels,
            &noise,
            config.w_kl as f32,
            config.w_cls as f32,
        );
        total += losses.total * bsz as f64;
    }
    Ok(total / n as f64)
}

/// Largest relative deviation between the analytic gradient of the full
/// training loss and central finite differences, computed in f64 on a small
/// network and a 10-sample batch. A healthy implementation sits orders of
/// magnitude below the 1e-4 verification threshold.
pub fn finite_difference_gradient_gap(seed: u64) -> f64 {
    let config = TrainConfig {
        input_dim: 12,
        n_classes: 3,
        d_max: 4,
        enc_hidden: vec![8],
        dec_hidden: vec![8],
        cls_hidden: vec![8],
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nets = Nets::<f64>::new(&config, &mut rng);
    let b = 10;
    let x = Array2::from_shape_fn((b, config.input_dim), |_| rng.random::<f64>());
    let labels: Vec<u8> = (0..b).map(|i| (i % config.n_classes) as u8).collect();
    let noise = StepNoise {
        eps: Array2::from_shape_fn((b, config.d_max), |_| StandardNormal.sample(&mut rng)),
        eta: Array2::from_shape_fn((b, config.d_max), |_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * 0.1
        }),
        d_keep: 3,
    };
    let (w_kl, w_cls) = (1.0, 1.0);
    let (_, grads) = loss_and_grads(&nets, &x, &labels, &noise, w_kl, w_cls);

    // Address every scalar parameter as (net, layer, slot).
    #[derive(Clone, Copy)]
    enum Slot {
        W(usize, usize),
        B(usize),
    }
    let mut coords: Vec<(usize, usize, Slot)> = Vec::new();
    for (net_idx, mlp) in [&nets.encoder, &nets.decoder, &nets.classifier]
        .iter()
        .enumerate()
    {
        for (li, layer) in mlp.layers.iter().enumerate() {
            for r in 0..layer.w.nrows() {
                for cix in 0..layer.w.ncols() {
                    coords.push((net_idx, li, Slot::W(r, cix)));
                }
            }
            for bi in 0..layer.b.len() {
                coords.push((net_idx, li, Slot::B(bi)));
            }
        }
    }

    fn param_mut<'a>(nets: &'a mut Nets<f64>, net: usize, li: usize, slot: Slot) -> &'a mut f64 {
        let mlp = match net {
            0 => &mut nets.encoder,
            1 => &mut nets.decoder,
            _ => &mut nets.classifier,
        };
        match slot {
            Slot::W(r, cix) => &mut mlp.layers[li].w[(r, cix)],
            Slot::B(bi) => &mut mlp.layers[li].b[bi],
        }
    }

    let h = 1e-6;
    let mut max_rel: f64 = 0.0;
    for &(net, li, slot) in &coords {
        let analytic = {
            let g = match net {
                0 => &grads.enc[li],
                1 => &grads.dec[li],
                _ => &grads.cls[li],
            };
            match slot {
                Slot::W(r, cix) => g.w[(r, cix)],
                Slot::B(bi) => g.b[bi],
            }
        };
        let orig = *param_mut(&mut nets, net, li, slot);
        *param_mut(&mut nets, net, li, slot) = orig + h;
        let (lp, _) = loss_and_grads(&nets, &x, &labels, &noise, w_kl, w_cls);
        *param_mut(&mut nets, net, li, slot) = orig - h;
        let (lm, _) = loss_and_grads(&nets, &x, &labels, &noise, w_kl, w_cls);
        *param_mut(&mut nets, net, li, slot) = orig;
        let fd = (lp.total - lm.total) / (2.0 * h);
        let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-3);
        max_rel = max_rel.max(rel);
    }
    max_rel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DEFAULT_PSNR_GRID_DB;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            input_dim: 16,
            n_classes: 3,
            d_max: 6,
            enc_hidden: vec![12],
            dec_hidden: vec![12],
            cls_hidden: vec![8],
            epochs: 4,
            batch_size: 16,
            learning_rate: 3e-3,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    /// Three well-separated synthetic classes on a 4x4 grid: each class
    /// lights its own block of pixels plus deterministic dither.
    fn blob_set(n: usize, seed: u64) -> LabeledImageSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut images = Array2::<f32>::zeros((n, 16));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = (i % 3) as u8;
            labels.push(class);
            for j in 0..16 {
                let base = if j / 5 == class as usize { 0.9 } else { 0.1 };
                let jitter: f64 = rng.random::<f64>() * 0.1;
                images[(i, j)] = (base + jitter as f32).clamp(0.0, 1.0);
            }
        }
        LabeledImageSet::new(images, labels, 4, 4).unwrap()
    }

    #[test]
    fn gradient_check_tiny_network() {
        let gap = finite_difference_gradient_gap(11);
        assert!(gap < 1e-4, "max relative gradient deviation {gap:e}");
    }

    #[test]
    fn training_reduces_loss_on_synthetic_blobs() {
        let config = tiny_config();
        let set = blob_set(192, 1);
        let channel = ChannelSpec::dynamic_uniform(&DEFAULT_PSNR_GRID_DB);
        let codec = train(&set, &channel, &config).unwrap();
        let init = LatentCodec::untrained(&config).unwrap();
        let loss_before = dataset_loss(&init, &set, &channel, &config, 42).unwrap();
        let loss_after = dataset_loss(&codec, &set, &channel, &config, 42).unwrap();
        assert!(
            loss_after < loss_before,
            "training must reduce loss: {loss_after} vs {loss_before}"
        );
        let h = &codec.meta().history;
        assert!(h.last().unwrap().total < h.first().unwrap().total);
    }

    #[test]
    fn encode_satisfies_prefix_property_exactly() {
        let config = tiny_config();
        let codec = LatentCodec::untrained(&config).unwrap();
        let image: Vec<f32> = (0..16).map(|i| i as f32 / 15.0).collect();
        let full = encode(&image, &codec, codec.d_max()).unwrap();
        for d in 1..=codec.d_max() {
            let prefix = encode(&image, &codec, d).unwrap();
            assert_eq!(prefix[..], full[..d], "prefix mismatch at d = {d}");
        }
        assert!(full.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn encode_rejects_out_of_range_dimension() {
        let codec = LatentCodec::untrained(&tiny_config()).unwrap();
        let image = vec![0.5; 16];
        assert!(encode(&image, &codec, 0).is_err());
        assert!(encode(&image, &codec, 7).is_err());
    }

    #[test]
    fn classify_is_deterministic_and_validates_input() {
        let codec = LatentCodec::untrained(&tiny_config()).unwrap();
        let latent = vec![0.2, -0.4, 0.9];
        let (a, _) = classify(&latent, &codec).unwrap();
        let (b, _) = classify(&latent, &codec).unwrap();
        assert_eq!(a, b);
        let (zero_label, _) = classify(&[0.0; 6], &codec).unwrap();
        let (zero_label2, _) = classify(&[0.0; 6], &codec).unwrap();
        assert_eq!(zero_label, zero_label2);
        assert!(classify(&[f32::NAN, 0.0], &codec).is_err());
        assert!(classify(&[0.0; 7], &codec).is_err());
    }

    #[test]
    fn reconstruct_stays_in_unit_range() {
        let codec = LatentCodec::untrained(&tiny_config()).unwrap();
        let out = reconstruct(&[0.9, -0.7, 0.3], &codec).unwrap();
        assert_eq!(out.len(), 16);
        assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn kl_term_is_nonnegative() {
        let config = tiny_config();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nets = Nets::<f32>::new(&config, &mut rng);
        let set = blob_set(32, 2);
        let noise = StepNoise {
            eps: Array2::zeros((32, config.d_max)),
            eta: Array2::zeros((32, config.d_max)),
            d_keep: config.d_max,
        };
        let (losses, _) = loss_and_grads(&nets, &set.images, &set.labels, &noise, 1.0, 1.0);
        assert!(losses.kl >= 0.0, "kl = {}", losses.kl);
    }

    #[test]
    fn fixed_noise_losses_are_deterministic() {
        let config = tiny_config();
        let set = blob_set(64, 9);
        let channel = ChannelSpec::static_db(15.0);
        let codec = LatentCodec::untrained(&config).unwrap();
        let a = dataset_loss(&codec, &set, &channel, &config, 7).unwrap();
        let b = dataset_loss(&codec, &set, &channel, &config, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn untrained_codec_is_near_chance_on_blobs() {
        let config = tiny_config();
        let codec = LatentCodec::untrained(&config).unwrap();
        let set = blob_set(300, 4);
        let report = evaluate(&codec, &set, None, DimSelector::Fixed(6), 1).unwrap();
        // Chance on 3 balanced classes is 1/3; an untrained codec must not
        // be systematically informative.
        assert!(
            report.accuracy < 0.6,
            "untrained accuracy {} suspiciously high",
            report.accuracy
        );
    }

    #[test]
    fn evaluate_is_deterministic_given_seed() {
        let config = tiny_config();
        let codec = LatentCodec::untrained(&config).unwrap();
        let set = blob_set(64, 5);
        let channel = ChannelSpec::dynamic_uniform(&DEFAULT_PSNR_GRID_DB);
        let policy = LatentPolicy::new(vec![(25.0, 4), (15.0, 3)], 2).unwrap();
        let a = evaluate(&codec, &set, Some(&channel), DimSelector::Policy(&policy), 3).unwrap();
        let b = evaluate(&codec, &set, Some(&channel), DimSelector::Policy(&policy), 3).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(a.recon_mse, b.recon_mse);
        assert_eq!(a.mean_latent_dim, b.mean_latent_dim);
    }

    #[test]
    fn default_policy_thresholds() {
        let policy = LatentPolicy::default_policy();
        assert_eq!(select_latent_dim(100.0, &policy), 4);
        assert_eq!(select_latent_dim(25.0, &policy), 4);
        assert_eq!(select_latent_dim(24.9, &policy), 3);
        assert_eq!(select_latent_dim(15.0, &policy), 3);
        assert_eq!(select_latent_dim(12.5, &policy), 3);
        assert_eq!(select_latent_dim(10.0, &policy), 3);
        // Mean latent dimension about 3 over the uniform five-level schedule.
        let mean: f64 = DEFAULT_PSNR_GRID_DB
            .iter()
            .map(|&p| policy.select(p) as f64)
            .sum::<f64>()
            / 5.0;
        assert!((2.5..=3.5).contains(&mean), "mean dimension {mean}");
    }

    #[test]
    fn policy_is_monotone_in_psnr() {
        let policy = LatentPolicy::default_policy();
        let mut prev = 0;
        for i in 0..400 {
            let psnr = i as f64 * 0.25;
            let d = policy.select(psnr);
            assert!(d >= prev, "policy must be non-decreasing in PSNR");
            prev = d;
        }
    }

    #[test]
    fn single_threshold_policy_has_two_dims() {
        let policy = LatentPolicy::new(vec![(20.0, 5)], 2).unwrap();
        assert_eq!(policy.select(30.0), 5);
        assert_eq!(policy.select(10.0), 2);
    }

    #[test]
    fn policy_rejects_non_monotone_tables() {
        assert!(LatentPolicy::new(vec![(25.0, 2), (15.0, 3)], 1).is_err());
        assert!(LatentPolicy::new(vec![(15.0, 4), (25.0, 3)], 2).is_err());
        assert!(LatentPolicy::new(vec![(25.0, 4)], 5).is_err());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let config = tiny_config();
        let empty = LabeledImageSet::new(Array2::zeros((0, 16)), vec![], 4, 4).unwrap();
        let channel = ChannelSpec::static_db(15.0);
        assert!(train(&empty, &channel, &config).is_err());
    }

    #[test]
    fn prefix_distribution_concentrates_low() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut ones = 0;
        let n = 20_000;
        for _ in 0..n {
            if sample_prefix_dim(0.2, 64, &mut rng) == 1 {
                ones += 1;
            }
        }
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.2).abs() < 0.02, "P(d = 1) = {freq}, expected 0.2");
    }
}
