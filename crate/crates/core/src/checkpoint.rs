//! Model checkpoint (`SLMP`) and optimizer state (`SLMO`) files.
//!
//! Both share one layout convention, all fields little-endian:
//!
//! ```text
//! SLMP: magic "SLMP" | version u32 = 1 | config block | tensors
//! SLMO: magic "SLMO" | version u32 = 1 | step u64 | config block | m tensors | v tensors
//!
//! config block (8 x u32):
//!   arch (0 = mlp, 1 = resmlp) | input_dim | hidden_dim | num_layers |
//!   num_residual_blocks | output_dim | dropout_rate (f32 bit pattern) | reserved = 0
//!
//! tensors: f32 values in declaration order: input_norm.gain, input_norm.bias,
//!   dense0.weight (out x in, row-major), dense0.bias, ..., output_norm.gain,
//!   output_norm.bias
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Arch, ModelConfig, ModelParams};
use crate::training::adam::OptimizerState;

pub const MODEL_MAGIC: [u8; 4] = *b"SLMP";
pub const OPTIMIZER_MAGIC: [u8; 4] = *b"SLMO";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_dim(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Config(format!("dimension {v} exceeds u32")))?;
    put_u32(out, v);
    Ok(())
}

fn put_config(out: &mut Vec<u8>, c: &ModelConfig) -> Result<()> {
    put_u32(out, matches!(c.arch, Arch::ResMlp) as u32);
    put_dim(out, c.input_dim)?;
    put_dim(out, c.hidden_dim)?;
    put_dim(out, c.num_layers)?;
    put_dim(out, c.num_residual_blocks)?;
    put_dim(out, c.output_dim)?;
    put_u32(out, c.dropout_rate.to_bits());
    put_u32(out, 0);
    Ok(())
}

fn put_params(out: &mut Vec<u8>, p: &ModelParams<f32>) {
    for t in p.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(
            Error::Length {
                expected: (self.pos + n) as u64,
                found: self.bytes.len() as u64,
            },
        )?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: [u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(m),
                String::from_utf8_lossy(&magic)
            )));
        }
        let v = self.u32()?;
        if v != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {v}")));
        }
        Ok(())
    }

    fn config(&mut self) -> Result<ModelConfig> {
        let arch = match self.u32()? {
            0 => Arch::Mlp,
            1 => Arch::ResMlp,
            other => return Err(Error::Format(format!("unknown arch code {other}"))),
        };
        let mut dim = || self.u32().map(|v| v as usize);
        let cfg = ModelConfig {
            arch,
            input_dim: dim()?,
            hidden_dim: dim()?,
            num_layers: dim()?,
            num_residual_blocks: dim()?,
            output_dim: dim()?,
            dropout_rate: f32::from_bits(self.u32()?),
        };
        self.u32()?;
        cfg.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(cfg)
    }

    fn params(&mut self, cfg: &ModelConfig) -> Result<ModelParams<f32>> {
        let mut p = ModelParams::zeros(cfg);
        for t in p.tensors_mut() {
            let raw = self.take(t.len() * 4)?;
            for (v, c) in t.iter_mut().zip(raw.chunks_exact(4)) {
                *v = f32::from_le_bytes(c.try_into().unwrap());
            }
        }
        if !p.is_finite() {
            return Err(Error::Validation("checkpoint contains non-finite values".into()));
        }
        Ok(p)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Length {
                expected: self.pos as u64,
                found: self.bytes.len() as u64,
            });
        }
        Ok(())
    }
}

pub fn encode_model(params: &ModelParams<f32>, config: &ModelConfig) -> Result<Vec<u8>> {
    params.check_shapes(config)?;
    let mut out = MODEL_MAGIC.to_vec();
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_config(&mut out, config)?;
    put_params(&mut out, params);
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<(ModelConfig, ModelParams<f32>)> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(MODEL_MAGIC)?;
    let cfg = r.config()?;
    let p = r.params(&cfg)?;
    r.finish()?;
    Ok((cfg, p))
}

pub fn write_model(
    params: &ModelParams<f32>,
    config: &ModelConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(params, config)?).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<(ModelConfig, ModelParams<f32>)> {
    let path = path.as_ref();
    decode_model(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn encode_optimizer(state: &OptimizerState<f32>, config: &ModelConfig) -> Result<Vec<u8>> {
    state.m.check_shapes(config)?;
    state.v.check_shapes(config)?;
    let mut out = OPTIMIZER_MAGIC.to_vec();
    put_u32(&mut out, CHECKPOINT_VERSION);
    out.extend_from_slice(&state.step.to_le_bytes());
    put_config(&mut out, config)?;
    put_params(&mut out, &state.m);
    put_params(&mut out, &state.v);
    Ok(out)
}

pub fn decode_optimizer(bytes: &[u8]) -> Result<(ModelConfig, OptimizerState<f32>)> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(OPTIMIZER_MAGIC)?;
    let step = r.u64()?;
    let cfg = r.config()?;
    let m = r.params(&cfg)?;
    let v = r.params(&cfg)?;
    r.finish()?;
    Ok((cfg, OptimizerState { step, m, v }))
}

pub fn write_optimizer(
    state: &OptimizerState<f32>,
    config: &ModelConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_optimizer(state, config)?).map_err(|e| Error::io(path, e))
}

pub fn read_optimizer(path: impl AsRef<Path>) -> Result<(ModelConfig, OptimizerState<f32>)> {
    let path = path.as_ref();
    decode_optimizer(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn cfg() -> ModelConfig {
        ModelConfig {
            arch: Arch::ResMlp,
            input_dim: 6,
            hidden_dim: 4,
            num_layers: 1,
            num_residual_blocks: 2,
            output_dim: 3,
            dropout_rate: 0.5,
        }
    }

    #[test]
    fn model_round_trip_and_layout() {
        let c = cfg();
        let p: ModelParams<f32> = init_params(&c, 3).unwrap();
        let bytes = encode_model(&p, &c).unwrap();
        assert_eq!(&bytes[..4], b"SLMP");
        assert_eq!(bytes.len(), 8 + 32 + 4 * c.parameter_count());
        // first tensor is input_norm.gain = 1.0
        assert_eq!(&bytes[40..44], &1.0f32.to_le_bytes());
        let (c2, p2) = decode_model(&bytes).unwrap();
        assert_eq!((c2, p2), (c, p));
    }

    #[test]
    fn optimizer_round_trip() {
        let c = cfg();
        let mut s = OptimizerState::<f32>::new(&c);
        s.step = 17;
        s.m.output_norm.bias[1] = 0.25;
        let bytes = encode_optimizer(&s, &c).unwrap();
        assert_eq!(&bytes[..4], b"SLMO");
        let (c2, s2) = decode_optimizer(&bytes).unwrap();
        assert_eq!((c2, s2), (c, s));
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let c = cfg();
        let p: ModelParams<f32> = init_params(&c, 3).unwrap();
        let bytes = encode_model(&p, &c).unwrap();
        assert!(matches!(decode_model(&bytes[..bytes.len() - 2]), Err(Error::Length { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_model(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[8] = 7;
        assert!(matches!(decode_model(&bad), Err(Error::Format(_))));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(decode_model(&long), Err(Error::Length { .. })));
    }
}
