use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::planning::{RoundTable, ValueTables};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ACMDPCK1";
pub const VERSION: u32 = 1;

/// Learner state at the end of an episode window.
///
/// Layout, little endian: magic, `u32` version, `u64` episode, `u32` chosen
/// model, `u32` model count, the losses as `f64`, one membership byte per
/// model, `u32` horizon, then per round `u32` states, `u32` actions and the
/// `Q̃` and `Ṽ` arrays as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub episode: u64,
    pub model: u32,
    pub losses: Vec<f64>,
    pub membership: Vec<bool>,
    pub tables: ValueTables,
}

fn u32_of(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Checkpoint(format!("{what} too large: {n}")))
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if self.losses.len() != self.membership.len() {
            return Err(Error::Checkpoint("losses and membership lengths differ".into()));
        }
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(self.episode)?;
        w.write_u32::<LittleEndian>(self.model)?;
        w.write_u32::<LittleEndian>(u32_of(self.losses.len(), "model count")?)?;
        for l in &self.losses {
            w.write_f64::<LittleEndian>(*l)?;
        }
        for m in &self.membership {
            w.write_u8(u8::from(*m))?;
        }
        w.write_u32::<LittleEndian>(u32_of(self.tables.horizon(), "horizon")?)?;
        for r in &self.tables.rounds {
            w.write_u32::<LittleEndian>(u32_of(r.n_states, "state count")?)?;
            w.write_u32::<LittleEndian>(u32_of(r.n_actions, "action count")?)?;
            for x in r.q.iter().chain(&r.v) {
                w.write_f64::<LittleEndian>(*x)?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let episode = r.read_u64::<LittleEndian>()?;
        let model = r.read_u32::<LittleEndian>()?;
        let n = r.read_u32::<LittleEndian>()? as usize;
        let losses = (0..n)
            .map(|_| r.read_f64::<LittleEndian>())
            .collect::<std::io::Result<Vec<_>>>()?;
        let membership = (0..n)
            .map(|_| {
                r.read_u8().and_then(|b| match b {
                    0 => Ok(false),
                    1 => Ok(true),
                    _ => Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "membership byte")),
                })
            })
            .collect::<std::io::Result<Vec<_>>>()?;
        let horizon = r.read_u32::<LittleEndian>()? as usize;
        let mut rounds = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let n_states = r.read_u32::<LittleEndian>()? as usize;
            let n_actions = r.read_u32::<LittleEndian>()? as usize;
            let mut q = vec![0.0; n_states * n_actions];
            r.read_f64_into::<LittleEndian>(&mut q)?;
            let mut v = vec![0.0; n_states];
            r.read_f64_into::<LittleEndian>(&mut v)?;
            rounds.push(RoundTable {
                n_states,
                n_actions,
                q,
                v,
            });
        }
        if model as usize >= n.max(1) {
            return Err(Error::Checkpoint(format!("model index {model} out of range")));
        }
        Ok(Checkpoint {
            episode,
            model,
            losses,
            membership,
            tables: ValueTables { rounds },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            episode: 50,
            model: 1,
            losses: vec![3.5, 0.25],
            membership: vec![false, true],
            tables: ValueTables {
                rounds: vec![RoundTable {
                    n_states: 2,
                    n_actions: 2,
                    q: vec![1.0, 2.0, 3.0, -4.0],
                    v: vec![2.0, 3.0],
                }],
            },
        }
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(Checkpoint::read_from(&bytes[..]).unwrap(), c);
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::read_from(&bytes[..]), Err(Error::Checkpoint(_))));
        let mut bytes = sample().to_bytes().unwrap();
        bytes[8] = 9;
        assert!(Checkpoint::read_from(&bytes[..]).is_err());
        let bytes = sample().to_bytes().unwrap();
        assert!(Checkpoint::read_from(&bytes[..bytes.len() - 3]).is_err());
    }
}
