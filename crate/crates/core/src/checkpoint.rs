//! Versioned binary checkpoints for trained models.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "MRFINNCK" | u32 version | u8 kind | u64 seed | u32 feature_dim
//! 5 x (f64 min, f64 max)                      scaler
//! u32 blocks, per block: u32 dim, dim x u32   permutations (0 blocks for fcn)
//! u32 nets, per net: u32 layers, per layer: u32 in, u32 out, u8 activation
//! u64 parameter count, then that many f64     weights row-major, then biases
//! 32-byte SHA-256 of everything above
//! ```
//!
//! An INN stores four nets per block in the order `s1, t1, s2, t2`.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inn::{CouplingBlock, FcnBaseline, InnModel, ModelKind, Network};
use crate::nn::{Activation, DenseLayer, Sequential};
use crate::sim::NUM_PARAMS;
use crate::training::{ParamScaler, TrainedModel};

pub const MAGIC: &[u8; 8] = b"MRFINNCK";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

fn nets_of(network: &Network) -> (Vec<&[usize]>, Vec<&Sequential>) {
    match network {
        Network::Inn(m) => (
            m.blocks.iter().map(|b| b.permutation.as_slice()).collect(),
            m.blocks.iter().flat_map(|b| [&b.s1, &b.t1, &b.s2, &b.t2]).collect(),
        ),
        Network::Fcn(m) => (Vec::new(), vec![&m.net]),
    }
}

/// Serializes a model to checkpoint bytes.
pub fn to_bytes(model: &TrainedModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(model.kind.code());
    buf.extend_from_slice(&model.seed.to_le_bytes());
    put_u32(&mut buf, model.network.feature_dim());
    for j in 0..NUM_PARAMS {
        buf.extend_from_slice(&model.scaler.min[j].to_le_bytes());
        buf.extend_from_slice(&model.scaler.max[j].to_le_bytes());
    }
    let (perms, nets) = nets_of(&model.network);
    put_u32(&mut buf, perms.len());
    for perm in &perms {
        put_u32(&mut buf, perm.len());
        for &p in perm.iter() {
            put_u32(&mut buf, p);
        }
    }
    put_u32(&mut buf, nets.len());
    for net in &nets {
        put_u32(&mut buf, net.layers.len());
        for layer in &net.layers {
            put_u32(&mut buf, layer.inputs());
            put_u32(&mut buf, layer.outputs());
            buf.push(layer.activation.code());
        }
    }
    let count: usize = nets.iter().flat_map(|n| &n.layers).map(|l| l.param_count()).sum();
    buf.extend_from_slice(&(count as u64).to_le_bytes());
    for layer in nets.iter().flat_map(|n| &n.layers) {
        for v in layer.weights.iter().chain(layer.biases.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

pub fn save(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::format(self.path, format!("truncated at byte {}", self.bytes.len()))),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<TrainedModel> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::format(path, "not a model checkpoint"));
    }
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            path: path.into(),
            found: version.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    let code = r.u8()?;
    let kind = ModelKind::from_code(code).ok_or_else(|| Error::format(path, format!("unknown model kind {code}")))?;
    let seed = r.u64()?;
    let feature_dim = r.u32()?;
    let mut min = [0.0; NUM_PARAMS];
    let mut max = [0.0; NUM_PARAMS];
    for j in 0..NUM_PARAMS {
        min[j] = r.f64()?;
        max[j] = r.f64()?;
    }
    let scaler = ParamScaler::new(min, max).map_err(|e| Error::format(path, e.to_string()))?;

    let mut perms = Vec::new();
    for _ in 0..r.u32()? {
        let dim = r.u32()?;
        perms.push((0..dim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?);
    }
    let mut shapes = Vec::new();
    for _ in 0..r.u32()? {
        let mut layers = Vec::new();
        for _ in 0..r.u32()? {
            let (inputs, outputs, act) = (r.u32()?, r.u32()?, r.u8()?);
            let activation =
                Activation::from_code(act).ok_or_else(|| Error::format(path, format!("unknown activation {act}")))?;
            layers.push((inputs, outputs, activation));
        }
        if layers.is_empty() {
            return Err(Error::format(path, "network without layers"));
        }
        shapes.push(layers);
    }
    let count = r.u64()?;
    let expected: u64 = shapes.iter().flatten().map(|&(i, o, _)| (i as u64 + 1) * o as u64).sum();
    if count != expected {
        return Err(Error::format(path, format!("payload declares {count} parameters, shapes need {expected}")));
    }
    let total = r.pos as u64 + 8 * count + DIGEST_LEN as u64;
    if bytes.len() as u64 != total {
        return Err(Error::SizeMismatch {
            path: path.into(),
            expected: total,
            found: bytes.len() as u64,
        });
    }
    let mut nets = Vec::with_capacity(shapes.len());
    for layers in &shapes {
        let mut built = Vec::with_capacity(layers.len());
        for &(inputs, outputs, activation) in layers {
            let weights = (0..inputs * outputs).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let biases = (0..outputs).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            built.push(DenseLayer {
                weights: Array2::from_shape_vec((outputs, inputs), weights).expect("sized above"),
                biases: Array1::from(biases),
                activation,
            });
        }
        nets.push(Sequential { layers: built });
    }
    let body = r.pos;
    if Sha256::digest(&bytes[..body]).as_slice() != r.take(DIGEST_LEN)? {
        return Err(Error::format(path, "checksum mismatch"));
    }

    let network = if kind.is_invertible() {
        if perms.is_empty() || nets.len() != 4 * perms.len() {
            return Err(Error::format(path, "invertible model needs four nets per block"));
        }
        let mut nets = nets.into_iter();
        let blocks = perms
            .into_iter()
            .map(|perm| {
                let subnets = std::array::from_fn(|_| nets.next().expect("count checked"));
                CouplingBlock::from_parts(subnets, perm)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::format(path, e.to_string()))?;
        Network::Inn(InnModel::from_blocks(blocks).map_err(|e| Error::format(path, e.to_string()))?)
    } else {
        if !perms.is_empty() || nets.len() != 1 {
            return Err(Error::format(path, "baseline model needs exactly one net"));
        }
        Network::Fcn(FcnBaseline { net: nets.pop().expect("one net") })
    };
    if network.feature_dim() != feature_dim {
        return Err(Error::format(
            path,
            format!("header says {feature_dim} features, network takes {}", network.feature_dim()),
        ));
    }
    Ok(TrainedModel {
        kind,
        network,
        scaler,
        seed,
    })
}
