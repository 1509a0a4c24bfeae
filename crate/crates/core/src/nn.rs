//! Dense layers with hand-written backpropagation, MSE, Adam and a central
//! finite-difference gradient checker.
//!
//! Everything works on row-major batches: an input batch is `B x in`, a layer
//! maps it to `B x out`. Models are flat lists of [`DenseLayer`]s in a fixed
//! canonical order; [`Gradients`] mirror that order.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Linear),
            _ => None,
        }
    }
}

/// `act(W x + b)` with `W` of shape `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

/// Inputs and pre-activations kept from a forward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Array2<f64>,
    pre: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Array2::zeros((outputs, inputs)),
            biases: Array1::zeros(outputs),
            activation,
        }
    }

    /// Uniform weights in `+-sqrt(6 / (in + out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        DenseLayer {
            weights: Array2::from_shape_simple_fn((outputs, inputs), || dist.sample(rng)),
            biases: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.inputs() {
            return Err(Error::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.inputs(),
                cols
            )));
        }
        Ok(())
    }

    fn pre_activation(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let mut pre = input.dot(&self.weights.t());
        pre += &self.biases;
        pre
    }

    fn activate(&self, mut pre: Array2<f64>) -> Array2<f64> {
        if self.activation == Activation::Relu {
            pre.mapv_inplace(|v| v.max(0.0));
        }
        pre
    }

    /// Batch evaluation without a cache.
    pub fn infer(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(input.ncols())?;
        Ok(self.activate(self.pre_activation(input)))
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, DenseCache)> {
        self.check_input(input.ncols())?;
        let pre = self.pre_activation(input);
        let out = self.activate(pre.clone());
        Ok((
            out,
            DenseCache {
                input: input.to_owned(),
                pre,
            },
        ))
    }

    /// Single-vector convenience around [`DenseLayer::forward`].
    pub fn forward_vec(&self, input: &[f64]) -> Result<(Vec<f64>, DenseCache)> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let (out, cache) = self.forward(x)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    /// Returns the gradient with respect to the input batch and the parameter
    /// gradients summed over the batch.
    pub fn backward(&self, cache: &DenseCache, upstream: ArrayView2<f64>) -> Result<(Array2<f64>, DenseGrads)> {
        if upstream.dim() != cache.pre.dim() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match layer output {:?}",
                upstream.dim(),
                cache.pre.dim()
            )));
        }
        let mut g = upstream.to_owned();
        if self.activation == Activation::Relu {
            ndarray::Zip::from(&mut g)
                .and(&cache.pre)
                .for_each(|g, &p| {
                    if p <= 0.0 {
                        *g = 0.0
                    }
                });
        }
        let weights = g.t().dot(&cache.input);
        let biases = g.sum_axis(Axis(0));
        let input_grad = g.dot(&self.weights);
        Ok((input_grad, DenseGrads { weights, biases }))
    }

    pub fn backward_vec(&self, cache: &DenseCache, upstream: &[f64]) -> Result<(Vec<f64>, DenseGrads)> {
        let u = ArrayView2::from_shape((1, upstream.len()), upstream)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let (gx, grads) = self.backward(cache, u)?;
        Ok((gx.into_raw_vec_and_offset().0, grads))
    }
}

impl DenseGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        DenseGrads {
            weights: Array2::zeros(layer.weights.raw_dim()),
            biases: Array1::zeros(layer.biases.raw_dim()),
        }
    }
}

/// A feed-forward stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequential {
    pub layers: Vec<DenseLayer>,
}

#[derive(Debug, Clone)]
pub struct SequentialCache(Vec<DenseCache>);

impl Sequential {
    /// `sizes = [in, h1, ..., out]`; hidden layers use ReLU, the last is linear.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let n = sizes.len() - 1;
        Sequential {
            layers: (0..n)
                .map(|i| {
                    let act = if i + 1 == n { Activation::Linear } else { Activation::Relu };
                    DenseLayer::glorot(sizes[i], sizes[i + 1], act, rng)
                })
                .collect(),
        }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let n = sizes.len() - 1;
        Sequential {
            layers: (0..n)
                .map(|i| {
                    let act = if i + 1 == n { Activation::Linear } else { Activation::Relu };
                    DenseLayer::zeros(sizes[i], sizes[i + 1], act)
                })
                .collect(),
        }
    }

    pub fn infer(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut x = self.layers[0].infer(input)?;
        for layer in &self.layers[1..] {
            x = layer.infer(x.view())?;
        }
        Ok(x)
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, SequentialCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let (mut x, c) = self.layers[0].forward(input)?;
        caches.push(c);
        for layer in &self.layers[1..] {
            let (y, c) = layer.forward(x.view())?;
            caches.push(c);
            x = y;
        }
        Ok((x, SequentialCache(caches)))
    }

    /// Backpropagates `upstream`, adding parameter gradients into `grads`
    /// (one entry per layer) and returning the input gradient.
    pub fn backward_into(
        &self,
        cache: &SequentialCache,
        upstream: ArrayView2<f64>,
        grads: &mut [DenseGrads],
    ) -> Result<Array2<f64>> {
        if cache.0.len() != self.layers.len() || grads.len() != self.layers.len() {
            return Err(Error::Shape("cache or gradient list does not match layers".into()));
        }
        let mut g = upstream.to_owned();
        for ((layer, c), acc) in self.layers.iter().zip(&cache.0).zip(grads.iter_mut()).rev() {
            let (gx, lg) = layer.backward(c, g.view())?;
            acc.weights += &lg.weights;
            acc.biases += &lg.biases;
            g = gx;
        }
        Ok(g)
    }
}

/// Gradients for a model, one [`DenseGrads`] per layer in the model's
/// canonical layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseGrads>,
}

impl Gradients {
    pub fn zeros_like<'a>(layers: impl IntoIterator<Item = &'a DenseLayer>) -> Self {
        Gradients {
            layers: layers.into_iter().map(DenseGrads::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.biases += &b.biases;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weights *= factor;
            g.biases *= factor;
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weights.iter());
            out.extend(g.biases.iter());
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().chain(g.biases.iter()).all(|v| v.is_finite()))
    }
}

/// Anything built from dense layers in a fixed order.
pub trait LayeredModel {
    fn layers(&self) -> Vec<&DenseLayer>;
    fn layers_mut(&mut self) -> Vec<&mut DenseLayer>;

    fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    fn zero_grads(&self) -> Gradients {
        Gradients::zeros_like(self.layers())
    }

    /// Weights then biases of each layer, in layer order.
    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.layers() {
            out.extend(l.weights.iter());
            out.extend(l.biases.iter());
        }
        out
    }

    fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for l in self.layers_mut() {
            for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *w = flat[offset];
                offset += 1;
            }
        }
        Ok(())
    }
}

impl LayeredModel for Sequential {
    fn layers(&self) -> Vec<&DenseLayer> {
        self.layers.iter().collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        self.layers.iter_mut().collect()
    }
}

/// Mean squared error of one vector pair and its gradient with respect to
/// the prediction.
pub fn mse(prediction: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if prediction.len() != target.len() || prediction.is_empty() {
        return Err(Error::Shape(format!(
            "mse over lengths {} and {}",
            prediction.len(),
            target.len()
        )));
    }
    let n = prediction.len() as f64;
    let diff: Vec<f64> = prediction.iter().zip(target).map(|(p, t)| p - t).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff.into_iter().map(|d| 2.0 * d / n).collect()))
}

/// Mean over all entries of a `B x n` batch; gradient has the batch shape.
pub fn mse_batch(prediction: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    if prediction.dim() != target.dim() || prediction.is_empty() {
        return Err(Error::Shape(format!(
            "mse over shapes {:?} and {:?}",
            prediction.dim(),
            target.dim()
        )));
    }
    let n = prediction.len() as f64;
    let diff = &prediction - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, param_count: usize) -> Self {
        AdamState {
            config,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step: 0,
        }
    }

    /// One bias-corrected Adam update of a flat parameter vector.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Shape(format!(
                "adam state for {} parameters given {} parameters and {} gradients",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let (c1, c2) = self.corrections();
        for i in 0..params.len() {
            params[i] -= self.update(i, grads[i], c1, c2);
        }
        Ok(())
    }

    /// Same update applied in place to a layered model.
    pub fn step_model<M: LayeredModel + ?Sized>(&mut self, model: &mut M, grads: &Gradients) -> Result<()> {
        let count = model.param_count();
        if count != self.first_moment.len() || grads.layers.len() != model.layers().len() {
            return Err(Error::Shape("adam state does not match model".into()));
        }
        self.step += 1;
        let (c1, c2) = self.corrections();
        let mut i = 0;
        for (layer, g) in model.layers_mut().into_iter().zip(&grads.layers) {
            if layer.weights.dim() != g.weights.dim() || layer.biases.dim() != g.biases.dim() {
                return Err(Error::Shape("gradient layer shape does not match model".into()));
            }
            for (p, &gv) in layer
                .weights
                .iter_mut()
                .zip(g.weights.iter())
                .chain(layer.biases.iter_mut().zip(g.biases.iter()))
            {
                *p -= self.update(i, gv, c1, c2);
                i += 1;
            }
        }
        Ok(())
    }

    fn corrections(&self) -> (f64, f64) {
        let t = self.step as i32;
        (
            1.0 - self.config.beta1.powi(t),
            1.0 - self.config.beta2.powi(t),
        )
    }

    #[inline]
    fn update(&mut self, i: usize, g: f64, c1: f64, c2: f64) -> f64 {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let m = beta1 * self.first_moment[i] + (1.0 - beta1) * g;
        let v = beta2 * self.second_moment[i] + (1.0 - beta2) * g * g;
        self.first_moment[i] = m;
        self.second_moment[i] = v;
        learning_rate * (m / c1) / ((v / c2).sqrt() + epsilon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Coordinate with the largest relative error.
    pub worst_index: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Finite-difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Compares the analytic gradient returned by `eval` against central finite
/// differences at every coordinate of `params`.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-7)`, so coordinates with
/// vanishing gradient are compared absolutely.
pub fn gradcheck<F>(eval: F, params: &[f64], tolerance: f64) -> GradcheckReport
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = eval(params);
    assert_eq!(analytic.len(), params.len(), "analytic gradient length");
    let mut x = params.to_vec();
    let mut max_rel_error = 0.0;
    let mut worst_index = 0;
    for i in 0..params.len() {
        let orig = x[i];
        x[i] = orig + GRADCHECK_STEP;
        let plus = eval(&x).0;
        x[i] = orig - GRADCHECK_STEP;
        let minus = eval(&x).0;
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * GRADCHECK_STEP);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
        if rel > max_rel_error || !rel.is_finite() {
            max_rel_error = if rel.is_finite() { rel } else { f64::INFINITY };
            worst_index = i;
        }
    }
    GradcheckReport {
        checked: params.len(),
        max_rel_error,
        worst_index,
        tolerance,
        passed: max_rel_error <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn dense_forward_examples() {
        let zero = DenseLayer::zeros(3, 2, Activation::Relu);
        let (out, _) = zero.forward_vec(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);

        let mut l = DenseLayer::zeros(1, 1, Activation::Linear);
        l.weights[[0, 0]] = 2.0;
        l.biases[0] = 1.0;
        assert_eq!(l.forward_vec(&[3.0]).unwrap().0, vec![7.0]);

        let mut r = l.clone();
        r.activation = Activation::Relu;
        let (out, cache) = r.forward_vec(&[-3.0]).unwrap();
        assert_eq!(out, vec![0.0]);
        let (gx, g) = r.backward_vec(&cache, &[1.0]).unwrap();
        assert_eq!(gx, vec![0.0]);
        assert_eq!(g.weights[[0, 0]], 0.0);

        assert!(matches!(l.forward_vec(&[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(matches!(l.backward_vec(&cache, &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn linear_input_grad_is_transpose_product() {
        let l = DenseLayer::glorot(4, 3, Activation::Linear, &mut seed::rng(1, "t"));
        let (_, cache) = l.forward_vec(&[0.1, 0.2, -0.3, 0.4]).unwrap();
        let up = [1.0, -2.0, 0.5];
        let (gx, g) = l.backward_vec(&cache, &up).unwrap();
        let expected = l.weights.t().dot(&array![1.0, -2.0, 0.5]);
        for (a, b) in gx.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(g.biases.to_vec(), up.to_vec());

        let (gx, g) = l.backward_vec(&cache, &[0.0; 3]).unwrap();
        assert!(gx.iter().all(|&v| v == 0.0));
        assert!(g.weights.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn glorot_bounds() {
        let l = DenseLayer::glorot(175, 128, Activation::Relu, &mut seed::rng(3, "g"));
        let limit = (6.0f64 / 303.0).sqrt();
        assert!(l.weights.iter().all(|w| w.abs() <= limit));
        assert!(l.biases.iter().all(|&b| b == 0.0));
        assert_eq!(l.param_count(), 175 * 128 + 128);
    }

    #[test]
    fn mse_examples() {
        let (l, g) = mse(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g, vec![1.0, 1.0]);
        let (l, g) = mse(&[0.3, -2.0], &[0.3, -2.0]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());

        let p = [0.3, -1.2, 2.5];
        let t = [0.1, 0.4, 2.0];
        let (_, g) = mse(&p, &t).unwrap();
        let report = gradcheck(|x| mse(x, &t).unwrap(), &p, 1e-6);
        assert!(report.passed, "{report:?}");
        assert_eq!(g.len(), 3);
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let mut state = AdamState::new(AdamConfig::new(0.01), 3);
        let mut p = vec![1.0, 2.0, 3.0];
        state.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, 2.0, 3.0]);
        assert_eq!(state.step, 1);

        let mut state = AdamState::new(AdamConfig::new(0.01), 3);
        let mut p = vec![1.0, 2.0, 3.0];
        state.step(&mut p, &[0.5, -3.0, 1e-3]).unwrap();
        // m_hat / sqrt(v_hat) = g / |g| on step one
        for (after, (before, sign)) in p.iter().zip([(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)]) {
            assert!((after - (before - 0.01 * sign)).abs() < 1e-7, "{after}");
        }
        assert!(state.step(&mut p, &[1.0]).is_err());
    }

    #[test]
    fn adam_is_deterministic_and_model_step_matches_flat() {
        let mut rng = seed::rng(5, "adam");
        let mut model = Sequential::glorot(&[3, 4, 2], &mut rng);
        let mut grads = model.zero_grads();
        for g in &mut grads.layers {
            g.weights.mapv_inplace(|_| rng.random_range(-1.0..1.0));
            g.biases.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        }
        let mut flat = model.to_flat();
        let mut s1 = AdamState::new(AdamConfig::new(0.001), flat.len());
        let mut s2 = s1.clone();
        for _ in 0..3 {
            s1.step(&mut flat, &grads.to_flat()).unwrap();
            s2.step_model(&mut model, &grads).unwrap();
        }
        assert_eq!(flat, model.to_flat());
        assert_eq!(s1, s2);
    }

    #[test]
    fn gradcheck_quadratic_and_corrupted() {
        let f = |x: &[f64]| {
            let loss = x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v).sum();
            let g = x.iter().enumerate().map(|(i, v)| 2.0 * (i as f64 + 1.0) * v).collect();
            (loss, g)
        };
        let report = gradcheck(f, &[0.5, -1.5, 2.0, 0.25], 1e-8);
        assert!(report.passed, "{report:?}");
        assert!(report.max_rel_error <= 1e-8);

        let bad = |x: &[f64]| {
            let (l, mut g) = f(x);
            g[2] *= 1.01;
            (l, g)
        };
        let report = gradcheck(bad, &[0.5, -1.5, 2.0, 0.25], 1e-4);
        assert!(!report.passed);
        assert_eq!(report.worst_index, 2);
    }

    /// Loss of a `Sequential` on a fixed batch, with its analytic gradient.
    fn seq_loss(model: &Sequential, x: &Array2<f64>, t: &Array2<f64>) -> (f64, Vec<f64>) {
        let (y, cache) = model.forward(x.view()).unwrap();
        let (loss, g) = mse_batch(y.view(), t.view()).unwrap();
        let mut grads = model.zero_grads();
        model.backward_into(&cache, g.view(), &mut grads.layers).unwrap();
        (loss, grads.to_flat())
    }

    #[test]
    fn two_layer_net_passes_gradcheck() {
        let mut rng = seed::rng(11, "gc");
        let model = Sequential::glorot(&[5, 7, 3], &mut rng);
        let x = Array2::from_shape_simple_fn((4, 5), || rng.random_range(-1.0..1.0));
        let t = Array2::from_shape_simple_fn((4, 3), || rng.random_range(-1.0..1.0));
        let report = gradcheck(
            |p| {
                let mut m = model.clone();
                m.set_flat(p).unwrap();
                seq_loss(&m, &x, &t)
            },
            &model.to_flat(),
            1e-4,
        );
        assert!(report.passed, "{report:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn dense_gradients_match_finite_differences(
            seed_value in any::<u64>(), inputs in 1usize..6, outputs in 1usize..6, relu in any::<bool>()
        ) {
            let mut rng = seed::rng(seed_value, "prop");
            let act = if relu { Activation::Relu } else { Activation::Linear };
            let mut layer = DenseLayer::glorot(inputs, outputs, act, &mut rng);
            layer.biases.mapv_inplace(|_| rng.random_range(-0.5..0.5));
            let model = Sequential { layers: vec![layer] };
            let x = Array2::from_shape_simple_fn((3, inputs), || rng.random_range(-1.0..1.0));
            let t = Array2::from_shape_simple_fn((3, outputs), || rng.random_range(-1.0..1.0));
            let report = gradcheck(|p| {
                let mut m = model.clone();
                m.set_flat(p).unwrap();
                seq_loss(&m, &x, &t)
            }, &model.to_flat(), 1e-4);
            prop_assert!(report.passed, "{:?}", report);

            // input gradient against finite differences of the input
            let (y, cache) = model.forward(x.view()).unwrap();
            let (_, g) = mse_batch(y.view(), t.view()).unwrap();
            let mut grads = model.zero_grads();
            let gx = model.backward_into(&cache, g.view(), &mut grads.layers).unwrap();
            let xs: Vec<f64> = x.iter().copied().collect();
            let report = gradcheck(|xv| {
                let xm = Array2::from_shape_vec((3, inputs), xv.to_vec()).unwrap();
                let (y, _) = model.forward(xm.view()).unwrap();
                (mse_batch(y.view(), t.view()).unwrap().0, gx.iter().copied().collect())
            }, &xs, 1e-4);
            prop_assert!(report.passed, "{:?}", report);
        }

        #[test]
        fn mse_is_nonnegative_and_zero_on_self(p in proptest::collection::vec(-1e3f64..1e3, 1..20)) {
            let (l, g) = mse(&p, &p).unwrap();
            prop_assert_eq!(l, 0.0);
            prop_assert!(g.iter().all(|&v| v == 0.0));
            let shifted: Vec<f64> = p.iter().map(|v| v + 1.0).collect();
            prop_assert!(mse(&p, &shifted).unwrap().0 >= 0.0);
        }
    }
}
