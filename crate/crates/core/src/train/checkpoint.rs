//! Binary checkpoint format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "PIXBIS1" u32 version
//! u32 n, n × (u16 len, key, u16 len, value)      model configuration
//! u64 epochs completed, u64 master seed
//! u32 n, n × array                                model arrays
//! u8 has_optimizer [f64 lr β1 β2 eps wd, u64 t, u32 n, n × m array, n × v array]
//! u32 n, n × (u64 epoch, f64 combined, f64 pixel, f64 binary)   loss log
//! array = u16 len, name, u8 dtype, u8 ndim, ndim × u64 dim, values
//! ```

use std::fs;
use std::path::Path;

use super::adam::{AdamConfig, AdamState};
use super::EpochLog;
use crate::autodiff::{DType, Scalar, Tensor};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};

pub const MAGIC: &[u8; 7] = b"PIXBIS1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub model_config: ModelConfig,
    pub arrays: Vec<(String, Tensor<T>)>,
    pub adam: Option<AdamState<T>>,
    /// Number of completed epochs.
    pub epoch: u64,
    /// Master seed; together with `epoch` it fixes every later random draw.
    pub seed: u64,
    pub log: Vec<EpochLog>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn from_model(model: &Model<T>) -> Self {
        Self {
            model_config: model.config().clone(),
            arrays: model.named_arrays(),
            adam: None,
            epoch: 0,
            seed: 0,
            log: Vec::new(),
        }
    }

    pub fn to_model(&self) -> Result<Model<T>> {
        let mut model = Model::new(self.model_config.clone(), 0)?;
        model.load_named_arrays(&self.arrays)?;
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(MAGIC);
        w.extend_from_slice(&VERSION.to_le_bytes());
        let pairs = self.model_config.to_pairs();
        w.extend_from_slice(&(pairs.len() as u32).to_le_bytes());
        for (k, v) in pairs {
            put_str(&mut w, k);
            put_str(&mut w, &v);
        }
        w.extend_from_slice(&self.epoch.to_le_bytes());
        w.extend_from_slice(&self.seed.to_le_bytes());
        put_arrays(&mut w, self.arrays.iter().map(|(n, t)| (n.as_str(), t)));
        match &self.adam {
            None => w.push(0),
            Some(a) => {
                w.push(1);
                let c = a.config;
                for x in [c.lr, c.beta1, c.beta2, c.eps, c.weight_decay] {
                    w.extend_from_slice(&x.to_le_bytes());
                }
                w.extend_from_slice(&a.t.to_le_bytes());
                w.extend_from_slice(&(a.m.len() as u32).to_le_bytes());
                for (i, t) in a.m.iter().enumerate() {
                    put_array(&mut w, &format!("m{i}"), t);
                }
                for (i, t) in a.v.iter().enumerate() {
                    put_array(&mut w, &format!("v{i}"), t);
                }
            }
        }
        w.extend_from_slice(&(self.log.len() as u32).to_le_bytes());
        for e in &self.log {
            w.extend_from_slice(&(e.epoch as u64).to_le_bytes());
            for x in [e.combined, e.pixel, e.binary] {
                w.extend_from_slice(&x.to_le_bytes());
            }
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(r.error_at(0, "bad magic, not a checkpoint file"));
        }
        let at = r.pos;
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.error_at(at, &format!("unsupported version {version} (expected {VERSION})")));
        }
        let at = r.pos;
        let n = r.u32()? as usize;
        let mut pairs = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            pairs.push((r.string()?, r.string()?));
        }
        let model_config = ModelConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .map_err(|e| r.error_at(at, &e.to_string()))?;
        let epoch = r.u64()?;
        let seed = r.u64()?;
        let n = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            arrays.push(r.array()?);
        }
        let at = r.pos;
        let adam = match r.u8()? {
            0 => None,
            1 => {
                let mut f = [0.0; 5];
                for x in &mut f {
                    *x = r.f64()?;
                }
                let config = AdamConfig {
                    lr: f[0],
                    beta1: f[1],
                    beta2: f[2],
                    eps: f[3],
                    weight_decay: f[4],
                };
                let t = r.u64()?;
                let n = r.u32()? as usize;
                let mut m = Vec::with_capacity(n.min(4096));
                for _ in 0..n {
                    m.push(r.array()?.1);
                }
                let mut v = Vec::with_capacity(n.min(4096));
                for _ in 0..n {
                    v.push(r.array()?.1);
                }
                Some(AdamState { config, t, m, v })
            }
            flag => return Err(r.error_at(at, &format!("invalid optimizer flag {flag}"))),
        };
        let n = r.u32()? as usize;
        let mut log = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            log.push(EpochLog {
                epoch: r.u64()? as usize,
                combined: r.f64()?,
                pixel: r.f64()?,
                binary: r.f64()?,
            });
        }
        if r.pos != bytes.len() {
            return Err(r.error_at(r.pos, &format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            model_config,
            arrays,
            adam,
            epoch,
            seed,
            log,
        })
    }
}

pub fn save_checkpoint<T: Scalar>(ckpt: &Checkpoint<T>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, ckpt.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

fn put_str(w: &mut Vec<u8>, s: &str) {
    w.extend_from_slice(&(s.len() as u16).to_le_bytes());
    w.extend_from_slice(s.as_bytes());
}

fn put_array<T: Scalar>(w: &mut Vec<u8>, name: &str, t: &Tensor<T>) {
    put_str(w, name);
    w.push(T::DTYPE.tag());
    w.push(t.shape().len() as u8);
    for &d in t.shape() {
        w.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &x in t.data() {
        match T::DTYPE {
            DType::F32 => w.extend_from_slice(&(x.as_f64() as f32).to_le_bytes()),
            DType::F64 => w.extend_from_slice(&x.as_f64().to_le_bytes()),
        }
    }
}

fn put_arrays<'a, T: Scalar + 'a>(w: &mut Vec<u8>, arrays: impl ExactSizeIterator<Item = (&'a str, &'a Tensor<T>)>) {
    w.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for (n, t) in arrays {
        put_array(w, n, t);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error_at(&self, offset: usize, message: &str) -> Error {
        Error::Checkpoint {
            offset,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.error_at(
                self.pos,
                &format!("truncated: needed {n} bytes, {} left", self.bytes.len() - self.pos),
            )),
        }
    }

    fn fixed<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.fixed::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.fixed()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.fixed()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.fixed()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.fixed()?))
    }

    fn string(&mut self) -> Result<String> {
        let at = self.pos;
        let n = self.u16()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.error_at(at, "string is not UTF-8"))
    }

    fn array<T: Scalar>(&mut self) -> Result<(String, Tensor<T>)> {
        let name = self.string()?;
        let at = self.pos;
        let dtype = match self.u8()? {
            0 => DType::F32,
            1 => DType::F64,
            t => return Err(self.error_at(at, &format!("unknown dtype tag {t} for {name}"))),
        };
        let ndim = self.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(self.u64()? as usize);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| self.error_at(at, "array size overflows"))?;
        let width = if dtype == DType::F32 { 4 } else { 8 };
        let raw = self.take(numel.checked_mul(width).ok_or_else(|| self.error_at(at, "array size overflows"))?)?;
        let data: Vec<T> = match dtype {
            DType::F32 => raw
                .chunks_exact(4)
                .map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                .collect(),
            DType::F64 => raw
                .chunks_exact(8)
                .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
                .collect(),
        };
        let tensor = Tensor::new(&shape, data).map_err(|e| self.error_at(at, &format!("{name}: {e}")))?;
        Ok((name, tensor))
    }
}
