//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "HBDR"
//! version    u32      1
//! kind       u8       0 = cnn, 1 = dbn, 2 = rbm-stack
//! config     u32 length + UTF-8 bytes (resolved run configuration)
//! count      u32      number of tensors
//! tensor*    u16 name length, name bytes, u8 rank, u32 x rank dims,
//!            f32 x product(dims) payload
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::layers::{ConvLayer, FcLayer, LossHead};
use crate::network::{Cnn, CnnArch, FeedForward, Model};
use crate::rbm::RbmParams;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"HBDR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Cnn,
    Dbn,
    RbmStack,
}

impl ModelKind {
    fn tag(self) -> u8 {
        match self {
            ModelKind::Cnn => 0,
            ModelKind::Dbn => 1,
            ModelKind::RbmStack => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ModelKind::Cnn),
            1 => Ok(ModelKind::Dbn),
            2 => Ok(ModelKind::RbmStack),
            t => Err(Error::Format(format!("unknown model kind tag {t}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Dbn => "dbn",
            ModelKind::RbmStack => "rbm-stack",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub config: String,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated model file: {e}")))?;
    Ok(b)
}

impl ModelFile {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.kind.tag()])?;
        let cfg = self.config.as_bytes();
        w.write_all(&u32::try_from(cfg.len()).map_err(|_| Error::Format("config too long".into()))?.to_le_bytes())?;
        w.write_all(cfg)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            let nb = name.as_bytes();
            let len = u16::try_from(nb.len()).map_err(|_| Error::Format(format!("tensor name too long: {name}")))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(nb)?;
            w.write_all(&[t.rank() as u8])?;
            for &d in t.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            let mut payload = Vec::with_capacity(4 * t.len());
            for v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&payload)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let magic = read_exact::<4>(r)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}, not a model file")));
        }
        let version = u32::from_le_bytes(read_exact::<4>(r)?);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        let kind = ModelKind::from_tag(read_exact::<1>(r)?[0])?;
        let cfg_len = u32::from_le_bytes(read_exact::<4>(r)?) as usize;
        let mut cfg = vec![0u8; cfg_len];
        r.read_exact(&mut cfg)
            .map_err(|e| Error::Format(format!("truncated config: {e}")))?;
        let config = String::from_utf8(cfg).map_err(|_| Error::Format("config is not UTF-8".into()))?;
        let count = u32::from_le_bytes(read_exact::<4>(r)?) as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = u16::from_le_bytes(read_exact::<2>(r)?) as usize;
            let mut nb = vec![0u8; name_len];
            r.read_exact(&mut nb)
                .map_err(|e| Error::Format(format!("truncated tensor name: {e}")))?;
            let name = String::from_utf8(nb).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let rank = read_exact::<1>(r)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u32::from_le_bytes(read_exact::<4>(r)?) as usize);
            }
            let n: usize = shape.iter().product();
            let mut payload = vec![0u8; 4 * n];
            r.read_exact(&mut payload)
                .map_err(|e| Error::Format(format!("truncated tensor {name}: {e}")))?;
            let data = payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let t = Tensor::from_vec(&shape, data).map_err(|e| Error::Format(format!("tensor {name}: {e}")))?;
            tensors.push((name, t));
        }
        Ok(ModelFile { kind, config, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor<f32>> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Format(format!("missing tensor {name}")))
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!(
                "expected a {} model, file holds a {} model",
                kind.name(),
                self.kind.name()
            )));
        }
        Ok(())
    }

    fn from_model(kind: ModelKind, model: &dyn Model<f32>, config: &str) -> Self {
        ModelFile {
            kind,
            config: config.to_string(),
            tensors: model
                .param_names()
                .into_iter()
                .zip(model.params().into_iter().cloned())
                .collect(),
        }
    }

    pub fn from_cnn(net: &Cnn<f32>, config: &str) -> Self {
        Self::from_model(ModelKind::Cnn, net, config)
    }

    pub fn from_dbn(net: &FeedForward<f32>, config: &str) -> Self {
        Self::from_model(ModelKind::Dbn, net, config)
    }

    pub fn from_stack(stack: &[RbmParams<f32>], config: &str) -> Self {
        let mut tensors = Vec::new();
        for (i, r) in stack.iter().enumerate() {
            tensors.push((format!("rbm{}.w", i + 1), r.w.clone()));
            tensors.push((format!("rbm{}.a", i + 1), r.a.clone()));
            tensors.push((format!("rbm{}.b", i + 1), r.b.clone()));
        }
        ModelFile {
            kind: ModelKind::RbmStack,
            config: config.to_string(),
            tensors,
        }
    }

    /// Rebuilds a CNN for `arch`, checking every tensor shape.
    pub fn to_cnn(&self, arch: &CnnArch, head: LossHead) -> Result<Cnn<f32>> {
        self.expect_kind(ModelKind::Cnn)?;
        let convs = (1..=arch.convs.len())
            .map(|i| {
                ConvLayer::new(
                    self.tensor(&format!("c{i}.kernels"))?.clone(),
                    self.tensor(&format!("c{i}.bias"))?.clone(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let fcs = (1..=arch.hidden.len() + 1)
            .map(|i| {
                FcLayer::new(
                    self.tensor(&format!("f{i}.weights"))?.clone(),
                    self.tensor(&format!("f{i}.bias"))?.clone(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Cnn::from_layers(arch.clone(), convs, fcs, head)
    }

    pub fn to_dbn(&self) -> Result<FeedForward<f32>> {
        self.expect_kind(ModelKind::Dbn)?;
        let layers = (1..=self.tensors.len() / 2)
            .map(|i| {
                FcLayer::new(
                    self.tensor(&format!("l{i}.weights"))?.clone(),
                    self.tensor(&format!("l{i}.bias"))?.clone(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        FeedForward::new(layers, LossHead::SoftmaxCrossEntropy)
    }

    pub fn to_stack(&self) -> Result<Vec<RbmParams<f32>>> {
        self.expect_kind(ModelKind::RbmStack)?;
        (1..=self.tensors.len() / 3)
            .map(|i| {
                RbmParams::from_tensors(
                    self.tensor(&format!("rbm{i}.w"))?.clone(),
                    self.tensor(&format!("rbm{i}.a"))?.clone(),
                    self.tensor(&format!("rbm{i}.b"))?.clone(),
                )
            })
            .collect()
    }
}
