//! Versioned little-endian binary checkpoint holding both networks and the
//! normalization transform. Floats are stored by bit pattern, so a save/load
//! round trip is exact.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Dense, LipNet, NetError, SineNet};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"OCTOFLD\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub sine: SineNet,
    pub lip: LipNet,
    /// Maps normalized coordinates back: `original = center + x / scale`.
    pub center: [f64; 3],
    pub scale: f64,
    pub iteration: u64,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn layers(&mut self, layers: &[Dense]) {
        self.u32(layers.len() as u32);
        for l in layers {
            self.u32(l.fan_out() as u32);
            self.u32(l.fan_in() as u32);
            l.w.iter().for_each(|&x| self.f64(x));
            l.b.iter().for_each(|&x| self.f64(x));
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], NetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end =
            end.ok_or_else(|| NetError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self) -> Result<u64, NetError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn f64(&mut self) -> Result<f64, NetError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn count(&mut self, limit: usize, what: &str) -> Result<usize, NetError> {
        let n = self.u32()? as usize;
        if n > limit {
            return Err(NetError::Checkpoint(format!("implausible {what} {n}")));
        }
        Ok(n)
    }
    fn layers(&mut self) -> Result<Vec<Dense>, NetError> {
        let n = self.count(1 << 10, "layer count")?;
        (0..n)
            .map(|_| {
                let rows = self.count(1 << 16, "layer width")?;
                let cols = self.count(1 << 16, "layer width")?;
                let w = (0..rows * cols)
                    .map(|_| self.f64())
                    .collect::<Result<Vec<_>, _>>()?;
                let b = (0..rows)
                    .map(|_| self.f64())
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Dense {
                    w: Array2::from_shape_vec((rows, cols), w).expect("sized"),
                    b: Array1::from(b),
                })
            })
            .collect()
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u64(self.iteration);
        self.center.iter().for_each(|&c| w.f64(c));
        w.f64(self.scale);
        w.u32(match self.sine.activation {
            Activation::Sine => 0,
            Activation::Identity => 1,
        });
        w.f64(self.sine.input_scale);
        w.u32(self.sine.omegas.len() as u32);
        self.sine.omegas.iter().for_each(|&o| w.f64(o));
        w.layers(&self.sine.layers);
        w.f64(self.lip.input_scale);
        w.u32(self.lip.c.len() as u32);
        self.lip.c.iter().for_each(|&c| w.f64(c));
        w.layers(&self.lip.layers);
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Checkpoint, NetError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(NetError::Checkpoint("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NetError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let iteration = r.u64()?;
        let center = [r.f64()?, r.f64()?, r.f64()?];
        let scale = r.f64()?;
        let activation = match r.u32()? {
            0 => Activation::Sine,
            1 => Activation::Identity,
            a => return Err(NetError::Checkpoint(format!("unknown activation {a}"))),
        };
        let sine_scale = r.f64()?;
        let n = r.count(1 << 10, "frequency count")?;
        let omegas = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let mut sine = SineNet::from_layers(r.layers()?, omegas, activation)?;
        sine.input_scale = sine_scale;
        let lip_scale = r.f64()?;
        let n = r.count(1 << 10, "bound count")?;
        let c = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let mut lip = LipNet::from_layers(r.layers()?)?;
        if c.len() != lip.layers.len() {
            return Err(NetError::Checkpoint(
                "bound count does not match layers".into(),
            ));
        }
        lip.c = c;
        lip.input_scale = lip_scale;
        if r.pos != buf.len() {
            return Err(NetError::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint {
            sine,
            lip,
            center,
            scale,
            iteration,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, NetError> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{lipnet_init, siren_init};

    fn sample() -> Checkpoint {
        let mut lip = lipnet_init(2, 8, 2);
        lip.c[1] = -3.25;
        Checkpoint {
            sine: siren_init(2, 8, 1),
            lip,
            center: [0.1, -2.0, 1e-300],
            scale: 0.7,
            iteration: 42,
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_corrupt_input() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }
}
