//! Little-endian binary checkpoint of a [`TinyNet`] and its optimizer.
//!
//! ```text
//! magic        8 bytes  "SWBCENET"
//! version      u32      1
//! epoch        u64      completed epochs
//! adam_step    u64
//! n_tensors    u32      6
//! shape table  n_tensors x (rank u32, rank x dim u32)
//! parameters   f64 per element, tensors in table order
//! adam m       same layout
//! adam v       same layout
//! history_len  u64
//! history      history_len x f64 (mean training loss per epoch)
//! ```
//!
//! The file must end exactly after the history.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::net::{tensor_len, Params, TinyNet, TENSOR_SHAPES};
use crate::optim::Adam;

pub const MAGIC: &[u8; 8] = b"SWBCENET";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: TinyNet,
    pub optimizer: Adam,
    pub epoch: u64,
    pub history: Vec<f64>,
}

impl Checkpoint {
    pub fn fresh(net: TinyNet) -> Self {
        Self {
            net,
            optimizer: Adam::default(),
            epoch: 0,
            history: Vec::new(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend(VERSION.to_le_bytes());
        out.extend(self.epoch.to_le_bytes());
        out.extend(self.optimizer.step.to_le_bytes());
        out.extend((TENSOR_SHAPES.len() as u32).to_le_bytes());
        for (_, shape) in TENSOR_SHAPES {
            out.extend((shape.len() as u32).to_le_bytes());
            for &d in shape {
                out.extend((d as u32).to_le_bytes());
            }
        }
        for params in [&self.net.params, &self.optimizer.m, &self.optimizer.v] {
            for v in params.iter() {
                out.extend(v.to_le_bytes());
            }
        }
        out.extend((self.history.len() as u64).to_le_bytes());
        for v in &self.history {
            out.extend(v.to_le_bytes());
        }
        out
    }

    pub fn decode(data: &[u8]) -> Result<Self> {
        let mut r = Reader { data, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::MalformedCheckpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::MalformedCheckpoint(format!("unsupported version {version}")));
        }
        let epoch = r.u64()?;
        let step = r.u64()?;
        let n = r.u32()? as usize;
        if n != TENSOR_SHAPES.len() {
            return Err(Error::MalformedCheckpoint(format!(
                "expected {} tensors, found {n}",
                TENSOR_SHAPES.len()
            )));
        }
        for (name, shape) in TENSOR_SHAPES {
            let rank = r.u32()? as usize;
            if rank != shape.len() {
                return Err(Error::MalformedCheckpoint(format!("{name}: rank {rank}")));
            }
            for &d in shape {
                let got = r.u32()? as usize;
                if got != d {
                    return Err(Error::MalformedCheckpoint(format!(
                        "{name}: dimension {got}, expected {d}"
                    )));
                }
            }
        }
        let mut read_params = || -> Result<Params> {
            let mut p = Params::zeros();
            for (t, (_, shape)) in p.tensors.iter_mut().zip(TENSOR_SHAPES) {
                debug_assert_eq!(t.len(), tensor_len(shape));
                for v in t.iter_mut() {
                    *v = r.f64()?;
                }
            }
            Ok(p)
        };
        let params = read_params()?;
        let m = read_params()?;
        let v = read_params()?;
        let len = r.u64()?;
        let remaining = (data.len() - r.pos) as u64;
        if len.checked_mul(8) != Some(remaining) {
            return Err(Error::MalformedCheckpoint(format!(
                "history of {len} entries does not fit the remaining {remaining} bytes"
            )));
        }
        let history = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            net: TinyNet { params },
            optimizer: Adam {
                step,
                m,
                v,
                ..Adam::default()
            },
            epoch,
            history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&data)
    }

    /// `epoch,mean_loss` with one row per completed epoch.
    pub fn history_csv(&self) -> String {
        let first = self.epoch as usize + 1 - self.history.len().min(self.epoch as usize + 1);
        let mut out = String::from("epoch,mean_loss\n");
        for (i, v) in self.history.iter().enumerate() {
            out.push_str(&format!("{},{v:.12}\n", first + i));
        }
        out
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::MalformedCheckpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_round_trip() {
        let mut ck = Checkpoint::fresh(TinyNet::init(8));
        ck.epoch = 3;
        ck.optimizer.step = 9;
        ck.optimizer.m.tensors[2][5] = 0.25;
        ck.history = vec![0.5, 0.4, 0.3];
        let back = Checkpoint::decode(&ck.encode()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn rejects_corruption() {
        let ck = Checkpoint::fresh(TinyNet::init(1));
        let bytes = ck.encode();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::decode(&extra).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(Checkpoint::decode(&bad_magic).is_err());
        let mut bad_dim = bytes;
        bad_dim[8 + 4 + 8 + 8 + 4 + 4] = 9;
        assert!(Checkpoint::decode(&bad_dim).is_err());
        assert!(Checkpoint::decode(b"").is_err());
    }

    #[test]
    fn history_csv_rows() {
        let mut ck = Checkpoint::fresh(TinyNet::zeros());
        ck.epoch = 2;
        ck.history = vec![1.0, 0.5];
        assert_eq!(ck.history_csv(), "epoch,mean_loss\n1,1.000000000000\n2,0.500000000000\n");
    }
}
