//! Time-conditioned vector field `v_theta(x_t, t)` with input/output
//! preconditioning from the training-data statistics, plus a bit-exact
//! little-endian checkpoint format.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{parameter_count, Activation, Mlp};
use super::ScoreSource;
use crate::error::{Error, Result};
use crate::schedule::{interpolant_by_name, Interpolant};

const MAGIC: &[u8; 8] = b"SCOREVF\0";
const CHECKPOINT_VERSION: u32 = 1;
/// Time is scaled by this factor before the sinusoidal embedding.
const TIME_SCALE: f64 = 1000.0;
/// Floor for the input normalizer when both data spread and noise vanish.
const MIN_INPUT_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    /// Width of the sinusoidal time embedding (even; 0 disables it).
    pub time_embed: usize,
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256, 256],
            time_embed: 64,
            activation: Activation::Silu,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.time_embed % 2 != 0 {
            return Err(Error::Config(format!("time_embed must be even, got {}", self.time_embed)));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn layer_sizes(&self, dim: usize) -> Vec<usize> {
        let mut sizes = vec![dim + self.time_embed];
        sizes.extend(&self.hidden);
        sizes.push(dim);
        sizes
    }

    pub fn parameter_count(&self, dim: usize) -> usize {
        parameter_count(&self.layer_sizes(dim))
    }
}

/// Per-dimension mean and standard deviation of the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Preconditioner {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Column statistics of `data` (population standard deviation).
    pub fn from_data(data: ArrayView2<f64>) -> Self {
        let n = data.nrows().max(1) as f64;
        let mean: Vec<f64> = data.columns().into_iter().map(|c| c.sum() / n).collect();
        let std = data
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        Self { mean, std }
    }
}

#[derive(Debug, Clone)]
pub struct VectorFieldModel {
    dim: usize,
    arch: Architecture,
    mlp: Mlp,
    interp: Arc<dyn Interpolant>,
    precond: Preconditioner,
}

/// Sinusoidal features of `1000 t`: `[sin(f_k s), cos(f_k s)]`,
/// `f_k = 10000^(-k / (E/2))`.
pub fn time_embedding(t: f64, width: usize) -> Vec<f64> {
    let half = width / 2;
    let s = TIME_SCALE * t;
    let mut out = Vec::with_capacity(width);
    let freqs: Vec<f64> = (0..half)
        .map(|k| (-(10000f64.ln()) * k as f64 / half as f64).exp())
        .collect();
    out.extend(freqs.iter().map(|f| (f * s).sin()));
    out.extend(freqs.iter().map(|f| (f * s).cos()));
    out
}

impl VectorFieldModel {
    pub fn new<R: Rng + ?Sized>(dim: usize, arch: Architecture, interp: Arc<dyn Interpolant>, rng: &mut R) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("model dimension must be positive"));
        }
        arch.validate()?;
        let mlp = Mlp::new(arch.layer_sizes(dim), arch.activation, rng)?;
        Ok(Self {
            dim,
            arch,
            mlp,
            interp,
            precond: Preconditioner::identity(dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn interpolant_arc(&self) -> &Arc<dyn Interpolant> {
        &self.interp
    }

    pub fn params(&self) -> &[f64] {
        self.mlp.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.mlp.params_mut()
    }

    pub fn num_params(&self) -> usize {
        self.mlp.params().len()
    }

    pub fn preconditioner(&self) -> &Preconditioner {
        &self.precond
    }

    pub fn set_preconditioner(&mut self, precond: Preconditioner) -> Result<()> {
        if precond.mean.len() != self.dim || precond.std.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: precond.mean.len(),
            });
        }
        self.precond = precond;
        Ok(())
    }

    pub(crate) fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    /// Network input rows `[(x_t - alpha mu) / c_in, embed(t)]`.
    pub(crate) fn features(&self, x_t: ArrayView2<f64>, t: f64) -> Array2<f64> {
        let (a, s) = (self.interp.alpha(t), self.interp.sigma(t));
        let emb = time_embedding(t, self.arch.time_embed);
        let mut out = Array2::zeros((x_t.nrows(), self.dim + emb.len()));
        let c_in: Vec<f64> = self
            .precond
            .std
            .iter()
            .map(|sd| (a * a * sd * sd + s * s).sqrt().max(MIN_INPUT_SCALE))
            .collect();
        for (i, row) in x_t.rows().into_iter().enumerate() {
            for d in 0..self.dim {
                out[[i, d]] = (row[d] - a * self.precond.mean[d]) / c_in[d];
            }
            for (k, e) in emb.iter().enumerate() {
                out[[i, self.dim + k]] = *e;
            }
        }
        out
    }

    /// `(offset, scale)` with `v = offset + scale * net`; the offset is the
    /// unconditional mean `alpha' mu` of the target and the scale its spread.
    pub(crate) fn output_affine(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (da, ds) = (self.interp.dalpha(t), self.interp.dsigma(t));
        let offset = self.precond.mean.iter().map(|m| da * m).collect();
        let scale = self
            .precond
            .std
            .iter()
            .map(|sd| (da * da * sd * sd + ds * ds).sqrt())
            .collect();
        (offset, scale)
    }

    pub fn velocity_rows(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        if x_t.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x_t.ncols(),
            });
        }
        let mut out = self.mlp.forward(self.features(x_t, t).view());
        let (offset, scale) = self.output_affine(t);
        for mut row in out.rows_mut() {
            for d in 0..self.dim {
                row[d] = offset[d] + scale[d] * row[d];
            }
        }
        Ok(out)
    }

    pub fn velocity(&self, x_t: &[f64], t: f64) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x_t.len()), x_t).map_err(|_| Error::DimensionMismatch {
            expected: self.dim,
            got: x_t.len(),
        })?;
        Ok(self.velocity_rows(view, t)?.into_raw_vec_and_offset().0)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let name = self.interp.name().as_bytes();
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name);
        buf.extend_from_slice(&(self.dim as u64).to_le_bytes());
        buf.extend_from_slice(&(self.arch.time_embed as u64).to_le_bytes());
        buf.extend_from_slice(&self.arch.activation.to_code().to_le_bytes());
        buf.extend_from_slice(&(self.arch.hidden.len() as u64).to_le_bytes());
        for h in &self.arch.hidden {
            buf.extend_from_slice(&(*h as u64).to_le_bytes());
        }
        for v in self.precond.mean.iter().chain(&self.precond.std) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(self.num_params() as u64).to_le_bytes());
        for p in self.mlp.params() {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| Error::Checkpoint("interpolant name is not utf-8".into()))?;
        let interp = interpolant_by_name(name).ok_or_else(|| Error::Checkpoint(format!("unknown interpolant {name:?}")))?;
        let dim = r.u64()? as usize;
        let time_embed = r.u64()? as usize;
        let activation = Activation::from_code(r.u32()?).ok_or_else(|| Error::Checkpoint("unknown activation".into()))?;
        let layers = r.u64()? as usize;
        let hidden = (0..layers).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let mean = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let std = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let count = r.u64()? as usize;
        let arch = Architecture {
            hidden,
            time_embed,
            activation,
        };
        arch.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        if count != arch.parameter_count(dim) {
            return Err(Error::Checkpoint(format!(
                "parameter count {count} does not match architecture ({})",
                arch.parameter_count(dim)
            )));
        }
        let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        let mlp = Mlp::from_params(arch.layer_sizes(dim), activation, params)?;
        Ok(Self {
            dim,
            arch,
            mlp,
            interp,
            precond: Preconditioner { mean, std },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl ScoreSource for VectorFieldModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn interpolant(&self) -> &dyn Interpolant {
        self.interp.as_ref()
    }

    fn velocity_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        self.velocity_rows(x_t, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::LinearInterpolant;
    use ndarray::s;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(dim: usize) -> VectorFieldModel {
        let arch = Architecture {
            hidden: vec![16, 16],
            time_embed: 8,
            activation: Activation::Silu,
        };
        VectorFieldModel::new(dim, arch, Arc::new(LinearInterpolant), &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn parameter_count_matches_architecture() {
        let m = small(3);
        assert_eq!(m.num_params(), (3 + 8) * 16 + 16 + 16 * 16 + 16 + 16 * 3 + 3);
        assert_eq!(m.num_params(), m.architecture().parameter_count(3));
        assert_eq!(Architecture::default().layer_sizes(2), vec![66, 256, 256, 256, 2]);
    }

    #[test]
    fn evaluation_is_deterministic_and_batch_consistent() {
        let m = small(2);
        let xs = Array2::from_shape_fn((7, 2), |(i, d)| -3.0 + i as f64 + 0.3 * d as f64);
        let batch = m.velocity_rows(xs.view(), 0.37).unwrap();
        assert_eq!(batch, m.velocity_rows(xs.view(), 0.37).unwrap());
        for i in 0..7 {
            let single = m.velocity(&xs.row(i).to_vec(), 0.37).unwrap();
            for d in 0..2 {
                assert!((single[d] - batch[[i, d]]).abs() < 1e-12);
            }
        }
        assert!(batch.iter().all(|v| v.is_finite()));
        assert!(m.velocity(&[0.0; 3], 0.5).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut m = small(2);
        m.set_preconditioner(Preconditioner {
            mean: vec![0.1, -0.2],
            std: vec![0.3, 1e-7],
        })
        .unwrap();
        let bytes = m.to_bytes();
        let back = VectorFieldModel::from_bytes(&bytes).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.preconditioner(), m.preconditioner());
        assert_eq!(back.architecture(), m.architecture());
        assert_eq!(back.to_bytes(), bytes);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        m.save(&path).unwrap();
        let loaded = VectorFieldModel::load(&path).unwrap();
        let x = [0.4, -0.9];
        assert_eq!(loaded.velocity(&x, 0.2).unwrap(), m.velocity(&x, 0.2).unwrap());
    }

    #[test]
    fn corrupt_checkpoints_rejected() {
        let bytes = small(1).to_bytes();
        assert!(VectorFieldModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(VectorFieldModel::from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(VectorFieldModel::from_bytes(&long).is_err());
    }

    #[test]
    fn time_embedding_shape() {
        let e = time_embedding(0.0, 6);
        assert_eq!(e, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(time_embedding(0.5, 0).is_empty());
    }

    #[test]
    fn features_are_normalized() {
        let mut m = small(1);
        m.set_preconditioner(Preconditioner {
            mean: vec![2.0],
            std: vec![0.0],
        })
        .unwrap();
        let f = m.features(ndarray::arr2(&[[1.5]]).view(), 0.5);
        // alpha mu = 1, c_in = sigma = 0.5
        assert!((f[[0, 0]] - 1.0).abs() < 1e-15);
        assert_eq!(f.slice(s![0, 1..]).len(), 8);
    }
}
