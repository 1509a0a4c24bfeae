//! Bidirectional training with noise augmentation and validation-R² model
//! selection.

use std::io::Write;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::evaluation::r2_per_param;
use crate::inn::{pad, Direction, FcnBaseline, InnModel, ModelKind, Network};
use crate::nn::{mse_batch, AdamConfig, AdamState, Gradients, LayeredModel};
use crate::seed;
use crate::sim::{NUM_PARAMS, PARAM_NAMES};

/// Rows evaluated at once during inference.
const INFERENCE_CHUNK: usize = 1024;

/// Per-parameter affine map of the training range onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamScaler {
    pub min: [f64; NUM_PARAMS],
    pub max: [f64; NUM_PARAMS],
}

impl ParamScaler {
    pub fn fit(params: ArrayView2<f64>) -> Result<Self> {
        if params.ncols() != NUM_PARAMS || params.nrows() < 2 {
            return Err(Error::Shape(format!(
                "scaler needs at least 2 rows of {NUM_PARAMS} parameters, got {:?}",
                params.dim()
            )));
        }
        let mut min = [f64::INFINITY; NUM_PARAMS];
        let mut max = [f64::NEG_INFINITY; NUM_PARAMS];
        for row in params.rows() {
            for j in 0..NUM_PARAMS {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        Self::new(min, max)
    }

    pub fn new(min: [f64; NUM_PARAMS], max: [f64; NUM_PARAMS]) -> Result<Self> {
        for j in 0..NUM_PARAMS {
            if !(max[j] > min[j]) {
                return Err(Error::Config(format!(
                    "degenerate range for {}: min {} max {}",
                    PARAM_NAMES[j], min[j], max[j]
                )));
            }
        }
        Ok(ParamScaler { min, max })
    }

    pub fn apply(&self, x: &[f64; NUM_PARAMS]) -> [f64; NUM_PARAMS] {
        std::array::from_fn(|j| (x[j] - self.min[j]) / (self.max[j] - self.min[j]))
    }

    pub fn invert(&self, x: &[f64; NUM_PARAMS]) -> [f64; NUM_PARAMS] {
        std::array::from_fn(|j| self.min[j] + x[j] * (self.max[j] - self.min[j]))
    }

    pub fn apply_matrix(&self, x: ArrayView2<f64>) -> Array2<f64> {
        Array2::from_shape_fn(x.raw_dim(), |(i, j)| (x[[i, j]] - self.min[j]) / (self.max[j] - self.min[j]))
    }

    pub fn invert_matrix(&self, x: ArrayView2<f64>) -> Array2<f64> {
        Array2::from_shape_fn(x.raw_dim(), |(i, j)| self.min[j] + x[[i, j]] * (self.max[j] - self.min[j]))
    }
}

/// Adds independent `N(0, noise_sd^2)` noise to every feature.
pub fn perturb<R: Rng + ?Sized>(features: &[f64], noise_sd: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_noise(noise_sd)?;
    Ok(features
        .iter()
        .map(|&v| v + noise_sd * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Matrix form of [`perturb`], rows drawn in order.
pub fn perturb_matrix<R: Rng + ?Sized>(features: ArrayView2<f64>, noise_sd: f64, rng: &mut R) -> Result<Array2<f64>> {
    check_noise(noise_sd)?;
    let mut out = features.to_owned();
    if noise_sd > 0.0 {
        out.iter_mut()
            .for_each(|v| *v += noise_sd * rng.sample::<f64, _>(StandardNormal));
    }
    Ok(out)
}

fn check_noise(noise_sd: f64) -> Result<()> {
    if noise_sd >= 0.0 && noise_sd.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("noise sd must be >= 0, got {noise_sd}")))
    }
}

/// Which outputs the backward loss covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BwdLossDims {
    /// Only the M parameter outputs.
    #[serde(rename = "m")]
    Params,
    /// All 2T outputs, padding entries targeting zero.
    #[serde(rename = "full")]
    Full,
}

impl std::str::FromStr for BwdLossDims {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(BwdLossDims::Params),
            "full" => Ok(BwdLossDims::Full),
            _ => Err(Error::Config(format!("bwd loss dims must be m or full, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Augmentation noise sd in signal units.
    pub noise_sd: f64,
    pub seed: u64,
    pub forward_weight: f64,
    pub backward_weight: f64,
    pub bwd_loss_dims: BwdLossDims,
    /// Forward loss targets the clean fingerprint instead of the perturbed one.
    pub forward_clean_target: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 200,
            epochs: 80,
            noise_sd: 0.003,
            seed: 0,
            forward_weight: 1.0,
            backward_weight: 1.0,
            bwd_loss_dims: BwdLossDims::Full,
            forward_clean_target: false,
        }
    }
}

impl TrainConfig {
    /// 20 epochs with batch 50, backward loss on the parameter outputs only.
    pub fn desk() -> Self {
        TrainConfig {
            batch_size: 50,
            epochs: 20,
            bwd_loss_dims: BwdLossDims::Params,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config(format!("noise_sd {} must be >= 0", self.noise_sd)));
        }
        if self.forward_weight < 0.0 || self.backward_weight < 0.0 {
            return Err(Error::Config("loss weights must be >= 0".into()));
        }
        Ok(())
    }
}

/// A network together with the scaling it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub network: Network,
    pub scaler: ParamScaler,
    pub seed: u64,
}

impl TrainedModel {
    pub fn fingerprint_length(&self) -> usize {
        self.network.feature_dim() / 2
    }

    /// Parameter estimates in original units from `N x 2T` features.
    pub fn estimate(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.scaler.invert_matrix(self.estimate_scaled(features)?.view()))
    }

    /// Parameter estimates in scaled units.
    pub fn estimate_scaled(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.network.feature_dim() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.network.feature_dim(),
                features.ncols()
            )));
        }
        let mut out = Array2::zeros((features.nrows(), NUM_PARAMS));
        for (k, chunk) in features.axis_chunks_iter(Axis(0), INFERENCE_CHUNK).enumerate() {
            let est = self.network.estimate(chunk)?;
            out.slice_mut(s![k * INFERENCE_CHUNK..k * INFERENCE_CHUNK + chunk.nrows(), ..])
                .assign(&est);
        }
        Ok(out)
    }

    /// Fingerprint features predicted from original-unit parameters (INN only).
    pub fn synthesize(&self, params: ArrayView2<f64>) -> Result<Array2<f64>> {
        let Network::Inn(inn) = &self.network else {
            return Err(Error::Config(format!("{} has no forward direction", self.kind)));
        };
        let padded = pad(self.scaler.apply_matrix(params).view(), inn.dim());
        let mut out = Array2::zeros((params.nrows(), inn.dim()));
        for (k, chunk) in padded.axis_chunks_iter(Axis(0), INFERENCE_CHUNK).enumerate() {
            out.slice_mut(s![k * INFERENCE_CHUNK..k * INFERENCE_CHUNK + chunk.nrows(), ..])
                .assign(&inn.forward(chunk)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean forward loss over batches; zero for models without a forward loss.
    pub train_loss_fwd: f64,
    pub train_loss_bwd: f64,
    pub val_r2_mean: f64,
    pub val_r2: [f64; NUM_PARAMS],
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: TrainedModel,
    /// 1-based epoch of the retained checkpoint.
    pub best_epoch: usize,
    pub best_r2: f64,
    pub log: Vec<EpochLog>,
}

pub fn write_log_csv(log: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("epoch,train_loss_fwd,train_loss_bwd,val_r2_mean");
    for name in PARAM_NAMES {
        text.push_str(&format!(",val_r2_{name}"));
    }
    text.push('\n');
    for e in log {
        text.push_str(&format!(
            "{},{:e},{:e},{:.9}",
            e.epoch, e.train_loss_fwd, e.train_loss_bwd, e.val_r2_mean
        ));
        for r in e.val_r2 {
            text.push_str(&format!(",{r:.9}"));
        }
        text.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Mean validation R² of scaled estimates on clean fingerprints.
pub fn validation_r2(model: &TrainedModel, features: ArrayView2<f64>, scaled_truth: ArrayView2<f64>) -> Result<[f64; NUM_PARAMS]> {
    let est = model.estimate_scaled(features)?;
    let r2 = r2_per_param(scaled_truth, est.view())?;
    Ok(std::array::from_fn(|j| r2[j]))
}

/// One optimizer step's worth of work on a batch.
struct BatchLoss {
    fwd: f64,
    bwd: f64,
    grads: Gradients,
}

/// Trains one model kind and returns the checkpoint with maximal validation
/// R² (earliest epoch on ties) plus the per-epoch log.
pub fn train(kind: ModelKind, train_dict: &Dictionary, val_dict: &Dictionary, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(kind, train_dict, val_dict, config, |_| {})
}

pub fn train_with_progress(
    kind: ModelKind,
    train_dict: &Dictionary,
    val_dict: &Dictionary,
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if !train_dict.shares_schedule(val_dict) {
        return Err(Error::Config(
            "training and validation dictionaries use different schedules".into(),
        ));
    }
    if train_dict.is_empty() || val_dict.is_empty() {
        return Err(Error::Config("empty training or validation dictionary".into()));
    }
    let scaler = ParamScaler::fit(train_dict.param_matrix().view())?;
    let x_train = scaler.apply_matrix(train_dict.param_matrix().view());
    let y_train = train_dict.feature_matrix();
    let x_val = scaler.apply_matrix(val_dict.param_matrix().view());
    let y_val = val_dict.feature_matrix();

    let init_seed = seed::sub_seed(config.seed, "model");
    let length = train_dict.length();
    let network = match kind {
        ModelKind::Inn | ModelKind::InnBwd => Network::Inn(InnModel::for_length(length, init_seed)?),
        ModelKind::Fcn => Network::Fcn(FcnBaseline::for_length(length, init_seed)),
    };
    let mut current = TrainedModel {
        kind,
        network,
        scaler,
        seed: config.seed,
    };
    let mut adam = AdamState::new(AdamConfig::new(config.learning_rate), current.network.param_count());

    let n = train_dict.len();
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(TrainedModel, usize, f64)> = None;
    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::rng_from(seed::indexed_seed(config.seed, "shuffle", epoch as u64)));
        let mut noise_rng = seed::rng_from(seed::indexed_seed(config.seed, "noise", epoch as u64));
        let (mut sum_fwd, mut sum_bwd, mut batches) = (0.0, 0.0, 0usize);
        for idx in order.chunks(config.batch_size) {
            let x = x_train.select(Axis(0), idx);
            let y = y_train.select(Axis(0), idx);
            let y_noisy = perturb_matrix(y.view(), config.noise_sd, &mut noise_rng)?;
            let step = batch_gradients(&current.network, kind, config, x.view(), y.view(), y_noisy.view())?;
            if !(step.fwd.is_finite() && step.bwd.is_finite()) || !step.grads.all_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss in epoch {epoch}, batch {batches}: forward {}, backward {}",
                    step.fwd, step.bwd
                )));
            }
            match &mut current.network {
                Network::Inn(m) => adam.step_model(m, &step.grads)?,
                Network::Fcn(m) => adam.step_model(m, &step.grads)?,
            }
            sum_fwd += step.fwd;
            sum_bwd += step.bwd;
            batches += 1;
        }
        let val_r2 = validation_r2(&current, y_val.view(), x_val.view())?;
        let val_r2_mean = val_r2.iter().sum::<f64>() / NUM_PARAMS as f64;
        let entry = EpochLog {
            epoch,
            train_loss_fwd: sum_fwd / batches as f64,
            train_loss_bwd: sum_bwd / batches as f64,
            val_r2_mean,
            val_r2,
        };
        progress(&entry);
        log.push(entry);
        if !val_r2_mean.is_finite() {
            return Err(Error::Numerical(format!("validation R² is not finite in epoch {epoch}")));
        }
        if best.as_ref().is_none_or(|(_, _, r)| val_r2_mean > *r) {
            best = Some((current.clone(), epoch, val_r2_mean));
        }
    }
    let (best, best_epoch, best_r2) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_r2,
        log,
    })
}

fn batch_gradients(
    network: &Network,
    kind: ModelKind,
    config: &TrainConfig,
    x_scaled: ArrayView2<f64>,
    y_clean: ArrayView2<f64>,
    y_noisy: ArrayView2<f64>,
) -> Result<BatchLoss> {
    match network {
        Network::Fcn(m) => {
            let (pred, cache) = m.net.forward(y_noisy)?;
            let (loss, g) = mse_batch(pred.view(), x_scaled)?;
            let mut grads = m.zero_grads();
            m.net.backward_into(&cache, g.view(), &mut grads.layers)?;
            Ok(BatchLoss {
                fwd: 0.0,
                bwd: loss,
                grads,
            })
        }
        Network::Inn(m) => {
            let padded = pad(x_scaled, m.dim());
            let mut grads = m.zero_grads();
            let mut fwd = 0.0;
            if kind == ModelKind::Inn {
                let (y_hat, cache) = m.evaluate(padded.view(), Direction::Forward)?;
                let target = if config.forward_clean_target { y_clean } else { y_noisy };
                let (loss, g) = mse_batch(y_hat.view(), target)?;
                let (_, gf) = m.gradients(&cache, (g * config.forward_weight).view())?;
                grads.add_assign(&gf);
                fwd = loss;
            }
            let bwd_weight = if kind == ModelKind::Inn { config.backward_weight } else { 1.0 };
            let (x_hat, cache) = m.evaluate(y_noisy, Direction::Inverse)?;
            let (bwd, g) = match config.bwd_loss_dims {
                BwdLossDims::Full => mse_batch(x_hat.view(), padded.view())?,
                BwdLossDims::Params => {
                    let (loss, g_params) = mse_batch(x_hat.slice(s![.., ..NUM_PARAMS]), x_scaled)?;
                    let mut g = Array2::zeros(x_hat.raw_dim());
                    g.slice_mut(s![.., ..NUM_PARAMS]).assign(&g_params);
                    (loss, g)
                }
            };
            let (_, gb) = m.gradients(&cache, (g * bwd_weight).view())?;
            grads.add_assign(&gb);
            Ok(BatchLoss { fwd, bwd, grads })
        }
    }
}
