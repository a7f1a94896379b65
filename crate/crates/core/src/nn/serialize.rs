//! Versioned little-endian binary model format.
//!
//! Layout: magic `L0PK`, format version u32, layer count u32, then per
//! layer a kind tag u8, kind-specific u32 dims, and raw f32 parameters.
//! Round trips are bit-exact.

use std::io::{Read, Write};

use super::{Layer, Network, NnError, Result, Tensor};

pub const FORMAT_MAGIC: [u8; 4] = *b"L0PK";
pub const FORMAT_VERSION: u32 = 1;

const TAG_CONV3X3: u8 = 0;
const TAG_RELU: u8 = 1;
const TAG_MAXPOOL2X2: u8 = 2;
const TAG_DROPOUT: u8 = 3;
const TAG_FLATTEN: u8 = 4;
const TAG_DENSE: u8 = 5;
const TAG_SOFTMAX: u8 = 6;

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f32s(w: &mut impl Write, data: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 4);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            NnError::Format("truncated model file".into())
        } else {
            NnError::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    read_exact(r, &mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn save_network(net: &Network, w: &mut impl Write) -> Result<()> {
    w.write_all(&FORMAT_MAGIC)?;
    write_u32(w, FORMAT_VERSION)?;
    write_u32(w, net.layers().len() as u32)?;
    for layer in net.layers() {
        match layer {
            Layer::Conv3x3 {
                in_c,
                out_c,
                weight,
                bias,
            } => {
                w.write_all(&[TAG_CONV3X3])?;
                write_u32(w, *out_c as u32)?;
                write_u32(w, *in_c as u32)?;
                write_f32s(w, weight.data())?;
                write_f32s(w, bias.data())?;
            }
            Layer::Relu => w.write_all(&[TAG_RELU])?,
            Layer::MaxPool2x2 => w.write_all(&[TAG_MAXPOOL2X2])?,
            Layer::Dropout { rate, seed } => {
                w.write_all(&[TAG_DROPOUT])?;
                write_f32s(w, &[*rate])?;
                write_u64(w, *seed)?;
            }
            Layer::Flatten => w.write_all(&[TAG_FLATTEN])?,
            Layer::Dense {
                in_dim,
                out_dim,
                weight,
                bias,
            } => {
                w.write_all(&[TAG_DENSE])?;
                write_u32(w, *out_dim as u32)?;
                write_u32(w, *in_dim as u32)?;
                write_f32s(w, weight.data())?;
                write_f32s(w, bias.data())?;
            }
            Layer::Softmax => w.write_all(&[TAG_SOFTMAX])?,
        }
    }
    Ok(())
}

pub fn load_network(r: &mut impl Read) -> Result<Network> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if magic != FORMAT_MAGIC {
        return Err(NnError::Format(format!(
            "bad magic {:02x?}, expected {:02x?}",
            magic, FORMAT_MAGIC
        )));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(NnError::Format(format!(
            "unsupported format version {version}"
        )));
    }
    let count = read_u32(r)? as usize;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let mut tag = [0u8; 1];
        read_exact(r, &mut tag)?;
        let layer = match tag[0] {
            TAG_CONV3X3 => {
                let out_c = read_u32(r)? as usize;
                let in_c = read_u32(r)? as usize;
                let weight = Tensor::from_vec(&[out_c, in_c, 3, 3], read_f32s(r, out_c * in_c * 9)?);
                let bias = Tensor::from_vec(&[out_c], read_f32s(r, out_c)?);
                Layer::Conv3x3 {
                    in_c,
                    out_c,
                    weight,
                    bias,
                }
            }
            TAG_RELU => Layer::Relu,
            TAG_MAXPOOL2X2 => Layer::MaxPool2x2,
            TAG_DROPOUT => {
                let rate = read_f32s(r, 1)?[0];
                let seed = read_u64(r)?;
                Layer::Dropout { rate, seed }
            }
            TAG_FLATTEN => Layer::Flatten,
            TAG_DENSE => {
                let out_dim = read_u32(r)? as usize;
                let in_dim = read_u32(r)? as usize;
                let weight = Tensor::from_vec(&[out_dim, in_dim], read_f32s(r, out_dim * in_dim)?);
                let bias = Tensor::from_vec(&[out_dim], read_f32s(r, out_dim)?);
                Layer::Dense {
                    in_dim,
                    out_dim,
                    weight,
                    bias,
                }
            }
            TAG_SOFTMAX => Layer::Softmax,
            t => return Err(NnError::Format(format!("unknown layer tag {t}"))),
        };
        layers.push(layer);
    }
    Ok(Network::new(layers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkBuilder;

    fn sample_net() -> Network {
        NetworkBuilder::new(42)
            .conv3x3(1, 4)
            .relu()
            .maxpool2x2()
            .dropout(0.3)
            .flatten()
            .dense(4 * 2 * 2, 5)
            .softmax()
            .build()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = sample_net();
        let mut bytes = Vec::new();
        save_network(&net, &mut bytes).unwrap();
        let loaded = load_network(&mut bytes.as_slice()).unwrap();
        assert_eq!(net, loaded);
        let mut again = Vec::new();
        save_network(&loaded, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = Vec::new();
        save_network(&sample_net(), &mut bytes).unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            load_network(&mut bytes.as_slice()),
            Err(NnError::Format(_))
        ));
    }

    #[test]
    fn rejects_truncation() {
        let mut bytes = Vec::new();
        save_network(&sample_net(), &mut bytes).unwrap();
        bytes.truncate(bytes.len() / 2);
        assert!(load_network(&mut bytes.as_slice()).is_err());
    }
}
