//! Affine coupling network evaluable in both directions, and the
//! fully-connected baseline.
//!
//! A coupling block permutes its input, splits it into halves `(u1, u2)` and
//! computes
//!
//! ```text
//! v1 = u1 * exp(s2(u2)) + t2(u2)
//! v2 = u2 * exp(s1(v1)) + t1(v1)
//! ```
//!
//! whose exact inverse is
//!
//! ```text
//! u2 = (v2 - t1(v1)) * exp(-s1(v1))
//! u1 = (v1 - t2(u2)) * exp(-s2(u2))
//! ```
//!
//! Scale outputs pass through a soft clamp `c * 2/pi * atan(s / c)` before
//! exponentiation. Each of `s1, t1, s2, t2` is a `half -> hidden (relu) -> half
//! (linear)` subnet.

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{DenseGrads, DenseLayer, Gradients, LayeredModel, Sequential, SequentialCache};
use crate::seed;
use crate::sim::NUM_PARAMS;

/// Width of the subnet hidden layers.
pub const SUBNET_HIDDEN: usize = 128;
/// Coupling blocks in the MRF network.
pub const NUM_BLOCKS: usize = 2;
/// Bound of the soft clamp on scale outputs.
pub const SCALE_CLAMP: f64 = 4.0;
/// Hidden width of the fully-connected baseline.
pub const FCN_HIDDEN: usize = 300;

/// Subnets per coupling block, each with two dense layers.
const SUBNETS: usize = 4;
const LAYERS_PER_BLOCK: usize = SUBNETS * 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Coupling network trained on both directions.
    Inn,
    /// Same network trained on the backward (fingerprint -> parameter) loss only.
    InnBwd,
    /// Fully-connected regression baseline.
    Fcn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Inn, ModelKind::InnBwd, ModelKind::Fcn];

    pub fn code(self) -> u8 {
        match self {
            ModelKind::Inn => 0,
            ModelKind::InnBwd => 1,
            ModelKind::Fcn => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Inn => "inn",
            ModelKind::InnBwd => "inn_bwd",
            ModelKind::Fcn => "fcn",
        }
    }

    pub fn is_invertible(self) -> bool {
        !matches!(self, ModelKind::Fcn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?} (expected inn, inn_bwd or fcn)")))
    }
}

fn soft_clamp(s: f64) -> f64 {
    SCALE_CLAMP * std::f64::consts::FRAC_2_PI * (s / SCALE_CLAMP).atan()
}

fn soft_clamp_deriv(s: f64) -> f64 {
    let r = s / SCALE_CLAMP;
    std::f64::consts::FRAC_2_PI / (1.0 + r * r)
}

/// Clamped scale and its exponential (negated when `sign < 0`).
fn scale_exp(raw: &Array2<f64>, sign: f64) -> Array2<f64> {
    raw.mapv(|s| (sign * soft_clamp(s)).exp())
}

fn check_finite(a: &Array2<f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite values in {what}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlock {
    pub s1: Sequential,
    pub t1: Sequential,
    pub s2: Sequential,
    pub t2: Sequential,
    /// Column `i` of the permuted input is column `permutation[i]` of the block input.
    pub permutation: Vec<usize>,
    inverse_permutation: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Parameters to fingerprint.
    Forward,
    /// Fingerprint to parameters.
    Inverse,
}

#[derive(Debug, Clone)]
struct BlockCache {
    u1: Array2<f64>,
    u2: Array2<f64>,
    s1_raw: Array2<f64>,
    s2_raw: Array2<f64>,
    /// `exp(+-clamp(s))` as used by the pass.
    e1: Array2<f64>,
    e2: Array2<f64>,
    s1: SequentialCache,
    t1: SequentialCache,
    s2: SequentialCache,
    t2: SequentialCache,
}

impl CouplingBlock {
    fn with_subnets(subnets: [Sequential; SUBNETS], permutation: Vec<usize>) -> Result<Self> {
        let d = permutation.len();
        let mut inverse_permutation = vec![usize::MAX; d];
        for (i, &p) in permutation.iter().enumerate() {
            if p >= d || inverse_permutation[p] != usize::MAX {
                return Err(Error::Shape("permutation is not a bijection".into()));
            }
            inverse_permutation[p] = i;
        }
        if d % 2 != 0 {
            return Err(Error::Shape(format!("coupling dimension {d} is odd")));
        }
        let [s1, t1, s2, t2] = subnets;
        for net in [&s1, &t1, &s2, &t2] {
            let first = &net.layers[0];
            let last = net.layers.last().expect("non-empty subnet");
            if first.inputs() != d / 2 || last.outputs() != d / 2 {
                return Err(Error::Shape(format!(
                    "subnet maps {} -> {}, block half is {}",
                    first.inputs(),
                    last.outputs(),
                    d / 2
                )));
            }
        }
        Ok(CouplingBlock {
            s1,
            t1,
            s2,
            t2,
            permutation,
            inverse_permutation,
        })
    }

    pub fn glorot<R: Rng + ?Sized>(dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let sizes = [dim / 2, hidden, dim / 2];
        let subnets = std::array::from_fn(|_| Sequential::glorot(&sizes, rng));
        let mut permutation: Vec<usize> = (0..dim).collect();
        permutation.shuffle(rng);
        Self::with_subnets(subnets, permutation)
    }

    pub fn zeros(dim: usize, hidden: usize, permutation: Vec<usize>) -> Result<Self> {
        let sizes = [dim / 2, hidden, dim / 2];
        Self::with_subnets(std::array::from_fn(|_| Sequential::zeros(&sizes)), permutation)
    }

    pub fn from_parts(subnets: [Sequential; SUBNETS], permutation: Vec<usize>) -> Result<Self> {
        Self::with_subnets(subnets, permutation)
    }

    pub fn dim(&self) -> usize {
        self.permutation.len()
    }

    fn half(&self) -> usize {
        self.dim() / 2
    }

    fn check_dim(&self, cols: usize) -> Result<()> {
        if cols != self.dim() {
            return Err(Error::Shape(format!(
                "coupling block of dimension {} given {} columns",
                self.dim(),
                cols
            )));
        }
        Ok(())
    }

    fn subnets(&self) -> [&Sequential; SUBNETS] {
        [&self.s1, &self.t1, &self.s2, &self.t2]
    }

    fn subnets_mut(&mut self) -> [&mut Sequential; SUBNETS] {
        [&mut self.s1, &mut self.t1, &mut self.s2, &mut self.t2]
    }

    pub fn forward(&self, u: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dim(u.ncols())?;
        let h = self.half();
        let p = u.select(Axis(1), &self.permutation);
        let (u1, u2) = (p.slice(s![.., ..h]), p.slice(s![.., h..]));
        let v1 = &u1 * &scale_exp(&self.s2.infer(u2)?, 1.0) + self.t2.infer(u2)?;
        let v2 = &u2 * &scale_exp(&self.s1.infer(v1.view())?, 1.0) + self.t1.infer(v1.view())?;
        let v = concatenate![Axis(1), v1, v2];
        check_finite(&v, "coupling forward")?;
        Ok(v)
    }

    pub fn inverse(&self, v: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dim(v.ncols())?;
        let h = self.half();
        let (v1, v2) = (v.slice(s![.., ..h]), v.slice(s![.., h..]));
        let u2 = (&v2 - &self.t1.infer(v1)?) * scale_exp(&self.s1.infer(v1)?, -1.0);
        let u1 = (&v1 - &self.t2.infer(u2.view())?) * scale_exp(&self.s2.infer(u2.view())?, -1.0);
        let p = concatenate![Axis(1), u1, u2];
        check_finite(&p, "coupling inverse")?;
        Ok(p.select(Axis(1), &self.inverse_permutation))
    }

    fn forward_cached(&self, u: ArrayView2<f64>) -> Result<(Array2<f64>, BlockCache)> {
        self.check_dim(u.ncols())?;
        let h = self.half();
        let p = u.select(Axis(1), &self.permutation);
        let u1 = p.slice(s![.., ..h]).to_owned();
        let u2 = p.slice(s![.., h..]).to_owned();
        let (s2_raw, cs2) = self.s2.forward(u2.view())?;
        let (t2_out, ct2) = self.t2.forward(u2.view())?;
        let e2 = scale_exp(&s2_raw, 1.0);
        let v1 = &u1 * &e2 + t2_out;
        let (s1_raw, cs1) = self.s1.forward(v1.view())?;
        let (t1_out, ct1) = self.t1.forward(v1.view())?;
        let e1 = scale_exp(&s1_raw, 1.0);
        let v2 = &u2 * &e1 + t1_out;
        let v = concatenate![Axis(1), v1, v2];
        check_finite(&v, "coupling forward")?;
        Ok((
            v,
            BlockCache {
                u1,
                u2,
                s1_raw,
                s2_raw,
                e1,
                e2,
                s1: cs1,
                t1: ct1,
                s2: cs2,
                t2: ct2,
            },
        ))
    }

    fn inverse_cached(&self, v: ArrayView2<f64>) -> Result<(Array2<f64>, BlockCache)> {
        self.check_dim(v.ncols())?;
        let h = self.half();
        let (v1, v2) = (v.slice(s![.., ..h]), v.slice(s![.., h..]));
        let (s1_raw, cs1) = self.s1.forward(v1)?;
        let (t1_out, ct1) = self.t1.forward(v1)?;
        let e1 = scale_exp(&s1_raw, -1.0);
        let u2 = (&v2 - &t1_out) * &e1;
        let (s2_raw, cs2) = self.s2.forward(u2.view())?;
        let (t2_out, ct2) = self.t2.forward(u2.view())?;
        let e2 = scale_exp(&s2_raw, -1.0);
        let u1 = (&v1 - &t2_out) * &e2;
        let p = concatenate![Axis(1), u1, u2];
        check_finite(&p, "coupling inverse")?;
        let u = p.select(Axis(1), &self.inverse_permutation);
        Ok((
            u,
            BlockCache {
                u1,
                u2,
                s1_raw,
                s2_raw,
                e1,
                e2,
                s1: cs1,
                t1: ct1,
                s2: cs2,
                t2: ct2,
            },
        ))
    }

    /// Backpropagation through [`CouplingBlock::forward_cached`]; `grads` holds
    /// this block's 8 layers in order s1, t1, s2, t2.
    fn backward_forward(&self, c: &BlockCache, gv: ArrayView2<f64>, grads: &mut [DenseGrads]) -> Result<Array2<f64>> {
        let h = self.half();
        let mut gv1 = gv.slice(s![.., ..h]).to_owned();
        let gv2 = gv.slice(s![.., h..]);
        let [gs1, gt1, gs2, gt2] = split_grads(grads);

        let mut gu2 = &gv2 * &c.e1;
        let gs1_raw = ndarray::Zip::from(&gv2)
            .and(&c.u2)
            .and(&c.e1)
            .and(&c.s1_raw)
            .map_collect(|&g, &u, &e, &s| g * u * e * soft_clamp_deriv(s));
        gv1 += &self.s1.backward_into(&c.s1, gs1_raw.view(), gs1)?;
        gv1 += &self.t1.backward_into(&c.t1, gv2, gt1)?;

        let gu1 = &gv1 * &c.e2;
        let gs2_raw = ndarray::Zip::from(&gv1)
            .and(&c.u1)
            .and(&c.e2)
            .and(&c.s2_raw)
            .map_collect(|&g, &u, &e, &s| g * u * e * soft_clamp_deriv(s));
        gu2 += &self.s2.backward_into(&c.s2, gs2_raw.view(), gs2)?;
        gu2 += &self.t2.backward_into(&c.t2, gv1.view(), gt2)?;

        let gp = concatenate![Axis(1), gu1, gu2];
        Ok(gp.select(Axis(1), &self.inverse_permutation))
    }

    /// Backpropagation through [`CouplingBlock::inverse_cached`].
    fn backward_inverse(&self, c: &BlockCache, gu: ArrayView2<f64>, grads: &mut [DenseGrads]) -> Result<Array2<f64>> {
        let h = self.half();
        let gp = gu.select(Axis(1), &self.permutation);
        let gu1 = gp.slice(s![.., ..h]);
        let mut gu2 = gp.slice(s![.., h..]).to_owned();
        let [gs1, gt1, gs2, gt2] = split_grads(grads);

        // u1 = (v1 - t2(u2)) * exp(-s2(u2))
        let mut gv1 = &gu1 * &c.e2;
        let gt2_out = -&gv1;
        let gs2_raw = ndarray::Zip::from(&gu1)
            .and(&c.u1)
            .and(&c.s2_raw)
            .map_collect(|&g, &u, &s| -g * u * soft_clamp_deriv(s));
        gu2 += &self.s2.backward_into(&c.s2, gs2_raw.view(), gs2)?;
        gu2 += &self.t2.backward_into(&c.t2, gt2_out.view(), gt2)?;

        // u2 = (v2 - t1(v1)) * exp(-s1(v1))
        let gv2 = &gu2 * &c.e1;
        let gt1_out = -&gv2;
        let gs1_raw = ndarray::Zip::from(&gu2)
            .and(&c.u2)
            .and(&c.s1_raw)
            .map_collect(|&g, &u, &s| -g * u * soft_clamp_deriv(s));
        gv1 += &self.s1.backward_into(&c.s1, gs1_raw.view(), gs1)?;
        gv1 += &self.t1.backward_into(&c.t1, gt1_out.view(), gt1)?;

        Ok(concatenate![Axis(1), gv1, gv2])
    }
}

fn split_grads(grads: &mut [DenseGrads]) -> [&mut [DenseGrads]; SUBNETS] {
    let (s1, rest) = grads.split_at_mut(2);
    let (t1, rest) = rest.split_at_mut(2);
    let (s2, t2) = rest.split_at_mut(2);
    [s1, t1, s2, t2]
}

/// Stack of coupling blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct InnModel {
    pub blocks: Vec<CouplingBlock>,
    /// Bumped on every mutable access to the parameters.
    generation: u64,
}

/// Everything needed to backpropagate one batch through the model.
#[derive(Debug, Clone)]
pub struct InnCache {
    direction: Direction,
    generation: u64,
    rows: usize,
    blocks: Vec<BlockCache>,
}

impl InnCache {
    pub fn direction(&self) -> Direction {
        self.direction
    }
}

impl InnModel {
    /// Randomly initialized network; weights and permutations drawn from `seed_value`.
    pub fn new(dim: usize, hidden: usize, num_blocks: usize, seed_value: u64) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Shape(format!("INN dimension must be even and positive, got {dim}")));
        }
        let mut rng = seed::rng(seed_value, "inn-init");
        let blocks = (0..num_blocks)
            .map(|_| CouplingBlock::glorot(dim, hidden, &mut rng))
            .collect::<Result<_>>()?;
        Ok(InnModel { blocks, generation: 0 })
    }

    /// The MRF network: `2T`-dimensional, two blocks, 128-unit subnets.
    pub fn for_length(fingerprint_length: usize, seed_value: u64) -> Result<Self> {
        Self::new(2 * fingerprint_length, SUBNET_HIDDEN, NUM_BLOCKS, seed_value)
    }

    /// Same permutations as [`InnModel::new`] but all subnet parameters zero.
    pub fn zeros(dim: usize, hidden: usize, num_blocks: usize, seed_value: u64) -> Result<Self> {
        let mut model = Self::new(dim, hidden, num_blocks, seed_value)?;
        for layer in model.layers_mut() {
            layer.weights.fill(0.0);
            layer.biases.fill(0.0);
        }
        Ok(model)
    }

    pub fn from_blocks(blocks: Vec<CouplingBlock>) -> Result<Self> {
        let dim = blocks.first().map(|b| b.dim()).ok_or_else(|| Error::Shape("no blocks".into()))?;
        if blocks.iter().any(|b| b.dim() != dim) {
            return Err(Error::Shape("blocks disagree on dimension".into()));
        }
        Ok(InnModel { blocks, generation: 0 })
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].dim()
    }

    pub fn hidden(&self) -> usize {
        self.blocks[0].s1.layers[0].outputs()
    }

    /// Parameters (padded, scaled) to fingerprint features.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut y = self.blocks[0].forward(x)?;
        for b in &self.blocks[1..] {
            y = b.forward(y.view())?;
        }
        Ok(y)
    }

    /// Fingerprint features to padded scaled parameters.
    pub fn inverse(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut x = self.blocks.last().expect("non-empty").inverse(y)?;
        for b in self.blocks.iter().rev().skip(1) {
            x = b.inverse(x.view())?;
        }
        Ok(x)
    }

    pub fn forward_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = ArrayView2::from_shape((1, x.len()), x).expect("row");
        Ok(self.forward(v)?.into_raw_vec_and_offset().0)
    }

    pub fn inverse_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        let v = ArrayView2::from_shape((1, y.len()), y).expect("row");
        Ok(self.inverse(v)?.into_raw_vec_and_offset().0)
    }

    /// Evaluates one direction keeping the intermediate values for [`InnModel::gradients`].
    pub fn evaluate(&self, input: ArrayView2<f64>, direction: Direction) -> Result<(Array2<f64>, InnCache)> {
        let mut caches = Vec::with_capacity(self.blocks.len());
        let mut z = input.to_owned();
        match direction {
            Direction::Forward => {
                for b in &self.blocks {
                    let (out, c) = b.forward_cached(z.view())?;
                    caches.push(c);
                    z = out;
                }
            }
            Direction::Inverse => {
                for b in self.blocks.iter().rev() {
                    let (out, c) = b.inverse_cached(z.view())?;
                    caches.push(c);
                    z = out;
                }
                caches.reverse();
            }
        }
        Ok((
            z,
            InnCache {
                direction,
                generation: self.generation,
                rows: input.nrows(),
                blocks: caches,
            },
        ))
    }

    /// Gradients of `sum(upstream * output)` with respect to every subnet
    /// parameter, for the direction recorded in `cache`. Also returns the
    /// gradient with respect to the input.
    pub fn gradients(&self, cache: &InnCache, upstream: ArrayView2<f64>) -> Result<(Array2<f64>, Gradients)> {
        if cache.generation != self.generation || cache.blocks.len() != self.blocks.len() {
            return Err(Error::StaleCache(
                "model parameters changed since the cached evaluation".into(),
            ));
        }
        if upstream.dim() != (cache.rows, self.dim()) {
            return Err(Error::Shape(format!(
                "upstream {:?} does not match cached batch ({}, {})",
                upstream.dim(),
                cache.rows,
                self.dim()
            )));
        }
        let mut grads = self.zero_grads();
        let mut g = upstream.to_owned();
        let chunks: Vec<&mut [DenseGrads]> = grads.layers.chunks_mut(LAYERS_PER_BLOCK).collect();
        let work = self.blocks.iter().zip(&cache.blocks).zip(chunks);
        match cache.direction {
            Direction::Forward => {
                for ((b, c), gb) in work.rev() {
                    g = b.backward_forward(c, g.view(), gb)?;
                }
            }
            Direction::Inverse => {
                for ((b, c), gb) in work {
                    g = b.backward_inverse(c, g.view(), gb)?;
                }
            }
        }
        Ok((g, grads))
    }
}

impl LayeredModel for InnModel {
    fn layers(&self) -> Vec<&DenseLayer> {
        self.blocks
            .iter()
            .flat_map(|b| b.subnets().into_iter().flat_map(|n| n.layers.iter()))
            .collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        self.generation += 1;
        self.blocks
            .iter_mut()
            .flat_map(|b| b.subnets_mut().into_iter().flat_map(|n| n.layers.iter_mut()))
            .collect()
    }
}

/// Zero-pads each row of an `N x M` matrix to `dim` columns.
pub fn pad(x: ArrayView2<f64>, dim: usize) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), dim));
    out.slice_mut(s![.., ..x.ncols()]).assign(&x);
    out
}

/// Fully-connected baseline `2T -> 300 -> 300 -> M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcnBaseline {
    pub net: Sequential,
}

impl FcnBaseline {
    pub fn new(inputs: usize, seed_value: u64) -> Self {
        Self::with_hidden(inputs, FCN_HIDDEN, seed_value)
    }

    pub fn with_hidden(inputs: usize, hidden: usize, seed_value: u64) -> Self {
        let mut rng = seed::rng(seed_value, "fcn-init");
        FcnBaseline {
            net: Sequential::glorot(&[inputs, hidden, hidden, NUM_PARAMS], &mut rng),
        }
    }

    pub fn for_length(fingerprint_length: usize, seed_value: u64) -> Self {
        Self::new(2 * fingerprint_length, seed_value)
    }

    pub fn inputs(&self) -> usize {
        self.net.layers[0].inputs()
    }

    pub fn forward(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.net.infer(y)
    }
}

impl LayeredModel for FcnBaseline {
    fn layers(&self) -> Vec<&DenseLayer> {
        self.net.layers()
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        self.net.layers_mut()
    }
}

/// Either network, as stored in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Inn(InnModel),
    Fcn(FcnBaseline),
}

impl Network {
    /// Fingerprint feature dimension `2T`.
    pub fn feature_dim(&self) -> usize {
        match self {
            Network::Inn(m) => m.dim(),
            Network::Fcn(m) => m.inputs(),
        }
    }

    /// Scaled parameter estimates (`N x M`) from fingerprint features (`N x 2T`).
    pub fn estimate(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            Network::Inn(m) => Ok(m.inverse(features)?.slice(s![.., ..NUM_PARAMS]).to_owned()),
            Network::Fcn(m) => m.forward(features),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Network::Inn(m) => m.param_count(),
            Network::Fcn(m) => m.param_count(),
        }
    }
}
