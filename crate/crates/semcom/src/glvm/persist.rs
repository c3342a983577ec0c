//! Versioned binary persistence for trained codecs.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//!   magic  b"SCGL"
//!   u16    format version (currently 1)
//!   u32    d_max
//!   u32    epochs          u64 seed        4 x f32 final losses
//!   u32    network count (3: encoder, decoder, classifier)
//!   per network:
//!     u32  layer count
//!     per layer: u32 in, u32 out, u8 activation, f32[in*out] weights
//!                (row-major), f32[out] biases
//! ```
//!
//! Loading rejects unknown magic bytes or versions and validates that layer
//! shapes chain and every parameter is finite.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::glvm::nn::{Activation, Linear, Mlp};
use crate::glvm::{LatentCodec, LossTerms, TrainMeta};

const MAGIC: &[u8; 4] = b"SCGL";
const VERSION: u16 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() < self.pos + n {
            return Err(Error::format(
                self.bytes.len() as u64,
                format!("truncated codec file while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(LittleEndian::read_u16(self.take(2, what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4, what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(LittleEndian::read_u64(self.take(8, what)?))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let raw = self.take(4 * n, what)?;
        let mut out = vec![0.0f32; n];
        LittleEndian::read_f32_into(raw, &mut out);
        Ok(out)
    }
}

fn write_mlp(out: &mut Vec<u8>, mlp: &Mlp<f32>) {
    push_u32(out, mlp.layers.len() as u32);
    for layer in &mlp.layers {
        push_u32(out, layer.in_dim() as u32);
        push_u32(out, layer.out_dim() as u32);
        out.push(layer.activation.tag());
        for &v in layer.w.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in layer.b.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn read_mlp(r: &mut Reader<'_>, name: &str) -> Result<Mlp<f32>> {
    let n_layers = r.u32(&format!("{name} layer count"))? as usize;
    if n_layers == 0 {
        return Err(Error::format(r.pos as u64, format!("{name} has no layers")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    let mut prev_out: Option<usize> = None;
    for li in 0..n_layers {
        let in_dim = r.u32("layer input width")? as usize;
        let out_dim = r.u32("layer output width")? as usize;
        let act_tag = r.u8("activation tag")?;
        let offset = r.pos as u64;
        let activation = Activation::from_tag(act_tag).ok_or_else(|| {
            Error::format(offset, format!("unknown activation tag {act_tag}"))
        })?;
        if let Some(prev) = prev_out {
            if prev != in_dim {
                return Err(Error::format(
                    offset,
                    format!("{name} layer {li} input {in_dim} != previous output {prev}"),
                ));
            }
        }
        prev_out = Some(out_dim);
        let w = r.f32s(in_dim * out_dim, "weights")?;
        let b = r.f32s(out_dim, "biases")?;
        if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::format(
                r.pos as u64,
                format!("{name} layer {li} contains non-finite parameters"),
            ));
        }
        layers.push(Linear {
            w: Array2::from_shape_vec((in_dim, out_dim), w)
                .map_err(|e| Error::invalid(format!("weight shape: {e}")))?,
            b: Array1::from_vec(b),
            activation,
        });
    }
    Ok(Mlp { layers })
}

impl LatentCodec {
    /// Serializes the codec to the versioned binary format.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        push_u32(&mut out, self.d_max as u32);
        push_u32(&mut out, self.meta.epochs as u32);
        out.extend_from_slice(&self.meta.seed.to_le_bytes());
        for v in [
            self.meta.final_losses.recon,
            self.meta.final_losses.kl,
            self.meta.final_losses.cls,
            self.meta.final_losses.total,
        ] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        push_u32(&mut out, 3);
        write_mlp(&mut out, &self.encoder);
        write_mlp(&mut out, &self.decoder);
        write_mlp(&mut out, &self.classifier);
        let mut f = fs::File::create(path)?;
        f.write_all(&out)?;
        Ok(())
    }

    /// Loads a codec saved by [`LatentCodec::save`], rejecting mismatched
    /// magic bytes or format versions.
    pub fn load(path: impl AsRef<Path>) -> Result<LatentCodec> {
        let bytes = fs::read(path)?;
        let mut r = Reader {
            bytes: &bytes,
            pos: 0,
        };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::format(0, "not a codec file (bad magic)"));
        }
        let version = r.u16("version")?;
        if version != VERSION {
            return Err(Error::format(
                4,
                format!("unsupported codec format version {version}, expected {VERSION}"),
            ));
        }
        let d_max = r.u32("d_max")? as usize;
        let epochs = r.u32("epochs")? as usize;
        let seed = r.u64("seed")?;
        let losses = r.f32s(4, "final losses")?;
        let n_nets = r.u32("network count")?;
        if n_nets != 3 {
            return Err(Error::format(
                r.pos as u64,
                format!("expected 3 networks, found {n_nets}"),
            ));
        }
        let encoder = read_mlp(&mut r, "encoder")?;
        let decoder = read_mlp(&mut r, "decoder")?;
        let classifier = read_mlp(&mut r, "classifier")?;

        if encoder.out_dim() != 2 * d_max {
            return Err(Error::invalid(format!(
                "encoder emits {} values, expected 2 x d_max = {}",
                encoder.out_dim(),
                2 * d_max
            )));
        }
        if decoder.in_dim() != d_max || classifier.in_dim() != d_max {
            return Err(Error::invalid("decoder/classifier must accept d_max latents"));
        }
        Ok(LatentCodec {
            encoder,
            decoder,
            classifier,
            d_max,
            meta: TrainMeta {
                epochs,
                seed,
                final_losses: LossTerms {
                    recon: losses[0] as f64,
                    kl: losses[1] as f64,
                    cls: losses[2] as f64,
                    total: losses[3] as f64,
                },
                history: Vec::new(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glvm::TrainConfig;

    fn small_codec() -> LatentCodec {
        LatentCodec::untrained(&TrainConfig {
            input_dim: 16,
            n_classes: 3,
            d_max: 6,
            enc_hidden: vec![12],
            dec_hidden: vec![12],
            cls_hidden: vec![8],
            seed: 21,
            ..TrainConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn save_load_round_trip_preserves_parameters() {
        let codec = small_codec();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codec.scgl");
        codec.save(&path).unwrap();
        let back = LatentCodec::load(&path).unwrap();
        assert_eq!(back.d_max(), codec.d_max());
        let image: Vec<f32> = (0..16).map(|i| i as f32 / 15.0).collect();
        let a = crate::glvm::encode(&image, &codec, 6).unwrap();
        let b = crate::glvm::encode(&image, &back, 6).unwrap();
        assert_eq!(a, b);
        let ra = crate::glvm::reconstruct(&a, &codec).unwrap();
        let rb = crate::glvm::reconstruct(&b, &back).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.scgl");
        fs::write(&path, b"NOPE\x01\x00").unwrap();
        match LatentCodec::load(&path).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_version() {
        let codec = small_codec();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codec.scgl");
        codec.save(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = 99;
        fs::write(&path, &bytes).unwrap();
        match LatentCodec::load(&path).unwrap_err() {
            Error::Format { offset, message } => {
                assert_eq!(offset, 4);
                assert!(message.contains("version"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_truncation() {
        let codec = small_codec();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codec.scgl");
        codec.save(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            LatentCodec::load(&path).unwrap_err(),
            Error::Format { .. }
        ));
    }
}
