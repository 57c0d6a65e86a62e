//! Binary network checkpoints.
//!
//! Layout (all integers little-endian, floats IEEE-754 f64 little-endian, so
//! round-trips are lossless at full precision):
//!
//! ```text
//! magic            8 bytes  "BAYESCL1"
//! task_index       u32
//! head_mode        u8       0 = single, 1 = multi
//! input_dim        u32
//! n_hidden         u32
//! hidden layer     repeated: fan_out u32, fan_in u32, activation u8,
//!                  mu_w f64*, rho_w f64*, mu_b f64*, rho_b f64*
//! heads            single: present u8 (0|1), then classes + layer
//!                  multi:  n u32, then per head task u32, classes + layer
//! classes          n u32, then n class ids u32
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use bayescl_core::bnn::{
    Activation, GaussianParam, Head, Heads, VariationalLayer, VariationalNetwork,
};
use bayescl_core::numerics::Matrix;

const MAGIC: &[u8; 8] = b"BAYESCL1";

#[derive(Debug)]
pub enum CheckpointError {
    BadMagic,
    Truncated,
    Corrupt(&'static str),
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::BadMagic => write!(f, "not a bayescl checkpoint (bad magic)"),
            CheckpointError::Truncated => write!(f, "checkpoint truncated"),
            CheckpointError::Corrupt(what) => write!(f, "corrupt checkpoint: {what}"),
        }
    }
}

impl std::error::Error for CheckpointError {}

pub struct Checkpoint {
    pub task_index: usize,
    pub net: VariationalNetwork,
}

fn push_matrix(out: &mut Vec<u8>, m: &Matrix) {
    for &v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn push_layer(out: &mut Vec<u8>, layer: &VariationalLayer) {
    out.extend_from_slice(&(layer.fan_out() as u32).to_le_bytes());
    out.extend_from_slice(&(layer.fan_in() as u32).to_le_bytes());
    out.push(match layer.activation {
        Activation::Relu => 0,
        Activation::Identity => 1,
    });
    push_matrix(out, &layer.weights.mu);
    push_matrix(out, &layer.weights.rho);
    push_matrix(out, &layer.biases.mu);
    push_matrix(out, &layer.biases.rho);
}

fn push_head(out: &mut Vec<u8>, head: &Head) {
    out.extend_from_slice(&(head.classes.len() as u32).to_le_bytes());
    for &c in &head.classes {
        out.extend_from_slice(&c.to_le_bytes());
    }
    push_layer(out, &head.layer);
}

pub fn encode(net: &VariationalNetwork, task_index: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(task_index as u32).to_le_bytes());
    let heads = net.heads();
    out.push(match heads {
        Heads::Single(_) => 0,
        Heads::Multi(_) => 1,
    });
    out.extend_from_slice(&(net.input_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(net.hidden().len() as u32).to_le_bytes());
    for layer in net.hidden() {
        push_layer(&mut out, layer);
    }
    match heads {
        Heads::Single(None) => out.push(0),
        Heads::Single(Some(head)) => {
            out.push(1);
            push_head(&mut out, head);
        }
        Heads::Multi(map) => {
            out.extend_from_slice(&(map.len() as u32).to_le_bytes());
            for (&task, head) in map {
                out.extend_from_slice(&(task as u32).to_le_bytes());
                push_head(&mut out, head);
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix, CheckpointError> {
        let n = rows.checked_mul(cols).ok_or(CheckpointError::Truncated)?;
        let raw = self.take(n * 8)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Matrix::from_vec(rows, cols, data)
            .map_err(|_| CheckpointError::Corrupt("non-finite parameter"))
    }

    fn layer(&mut self) -> Result<VariationalLayer, CheckpointError> {
        let fan_out = self.u32()? as usize;
        let fan_in = self.u32()? as usize;
        let activation = match self.u8()? {
            0 => Activation::Relu,
            1 => Activation::Identity,
            _ => return Err(CheckpointError::Corrupt("unknown activation")),
        };
        let mu_w = self.matrix(fan_out, fan_in)?;
        let rho_w = self.matrix(fan_out, fan_in)?;
        let mu_b = self.matrix(fan_out, 1)?;
        let rho_b = self.matrix(fan_out, 1)?;
        Ok(VariationalLayer {
            weights: GaussianParam::new(mu_w, rho_w)
                .map_err(|_| CheckpointError::Corrupt("weight shape"))?,
            biases: GaussianParam::new(mu_b, rho_b)
                .map_err(|_| CheckpointError::Corrupt("bias shape"))?,
            activation,
        })
    }

    fn head(&mut self) -> Result<Head, CheckpointError> {
        let n_classes = self.u32()? as usize;
        let mut classes = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            classes.push(self.u32()?);
        }
        let layer = self.layer()?;
        Ok(Head { layer, classes })
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let task_index = r.u32()? as usize;
    let head_mode = r.u8()?;
    let input_dim = r.u32()? as usize;
    let n_hidden = r.u32()? as usize;
    if n_hidden > 1024 {
        return Err(CheckpointError::Corrupt("implausible layer count"));
    }
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden.push(r.layer()?);
    }
    let heads = match head_mode {
        0 => match r.u8()? {
            0 => Heads::Single(None),
            1 => Heads::Single(Some(r.head()?)),
            _ => return Err(CheckpointError::Corrupt("head presence flag")),
        },
        1 => {
            let n = r.u32()? as usize;
            if n > 65_536 {
                return Err(CheckpointError::Corrupt("implausible head count"));
            }
            let mut map = BTreeMap::new();
            for _ in 0..n {
                let task = r.u32()? as usize;
                map.insert(task, r.head()?);
            }
            Heads::Multi(map)
        }
        _ => return Err(CheckpointError::Corrupt("unknown head mode")),
    };
    if r.pos != bytes.len() {
        return Err(CheckpointError::Corrupt("trailing bytes"));
    }
    let net = VariationalNetwork::from_parts(input_dim, hidden, heads)
        .map_err(|_| CheckpointError::Corrupt("dimension chaining"))?;
    Ok(Checkpoint { task_index, net })
}

pub fn save(path: &Path, net: &VariationalNetwork, task_index: usize) -> anyhow::Result<()> {
    std::fs::write(path, encode(net, task_index))
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

pub fn load(path: &Path) -> anyhow::Result<Checkpoint> {
    let bytes =
        std::fs::read(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(decode(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bayescl_core::bnn::{HeadMode, InitConfig, PosteriorSnapshot};
    use bayescl_core::numerics::Rng;
    use bayescl_core::plasticity::expand_output_single_head;

    fn sample_net() -> VariationalNetwork {
        let init = InitConfig {
            mu_std: 0.1,
            rho_init: -6.0,
        };
        let mut rng = Rng::new(17);
        let mut net =
            VariationalNetwork::new(5, &[4, 3], HeadMode::Single, &init, &mut rng).unwrap();
        let mut prior = PosteriorSnapshot::prior_like(&net, -6.0);
        expand_output_single_head(&mut net, &mut prior, &[0, 1, 2], None, &init, &mut rng)
            .unwrap();
        net
    }

    #[test]
    fn round_trip_is_lossless() {
        let net = sample_net();
        let bytes = encode(&net, 3);
        let ck = decode(&bytes).unwrap();
        assert_eq!(ck.task_index, 3);
        assert_eq!(ck.net, net);
    }

    #[test]
    fn multi_head_round_trip() {
        let init = InitConfig {
            mu_std: 0.1,
            rho_init: -6.0,
        };
        let mut rng = Rng::new(18);
        let mut net =
            VariationalNetwork::new(4, &[3], HeadMode::Multi, &init, &mut rng).unwrap();
        net.attach_task_head(0, &[0, 1], &init, &mut rng).unwrap();
        net.attach_task_head(1, &[2, 3], &init, &mut rng).unwrap();
        let ck = decode(&encode(&net, 1)).unwrap();
        assert_eq!(ck.net, net);
    }

    #[test]
    fn corruption_is_detected() {
        let net = sample_net();
        let mut bytes = encode(&net, 0);
        assert!(matches!(
            decode(&bytes[..bytes.len() - 3]),
            Err(CheckpointError::Truncated)
        ));
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(CheckpointError::BadMagic)));
        let mut trailing = encode(&net, 0);
        trailing.push(0);
        assert!(matches!(
            decode(&trailing),
            Err(CheckpointError::Corrupt(_))
        ));
    }
}
