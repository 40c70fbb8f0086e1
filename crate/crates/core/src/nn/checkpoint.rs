//! Binary policy checkpoints.
//!
//! Layout (little endian): `b"CMZP"`, `u32` version, `u64` layer count, then
//! per layer `u64 out, u64 in, f64[] weight, f64[] bias` (each array
//! length-prefixed), then the length-prefixed `log_std`. Values are stored as
//! raw IEEE-754 bits so a round trip is exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::mlp::{Linear, Mlp};
use super::policy::GaussianPolicy;
use super::tensor::Tensor;
use crate::codec::*;
use crate::{Error, Result};

const POLICY_MAGIC: &[u8; 4] = b"CMZP";
const MLP_MAGIC: &[u8; 4] = b"CMZM";
const VERSION: u32 = 1;

fn write_layers<W: Write>(w: &mut W, net: &Mlp) -> Result<()> {
    put_u64(w, net.layers().len() as u64)?;
    for layer in net.layers() {
        put_u64(w, layer.fan_out() as u64)?;
        put_u64(w, layer.fan_in() as u64)?;
        put_f64s(w, layer.weight.values())?;
        put_f64s(w, layer.bias.values())?;
    }
    Ok(())
}

fn read_layers<R: Read>(r: &mut R) -> Result<Mlp> {
    let n = get_len(r)?;
    if n == 0 {
        return Err(Error::Format("network without layers".into()));
    }
    let mut layers = Vec::with_capacity(n);
    let mut prev_out = None;
    for _ in 0..n {
        let out = get_len(r)?;
        let inp = get_len(r)?;
        if prev_out.is_some_and(|p| p != inp) {
            return Err(Error::Format("layer sizes do not chain".into()));
        }
        let weight = Tensor::from_vec(&[out, inp], get_f64s(r)?)
            .map_err(|e| Error::Format(e.to_string()))?;
        let bias =
            Tensor::from_vec(&[out], get_f64s(r)?).map_err(|e| Error::Format(e.to_string()))?;
        layers.push(Linear { weight, bias });
        prev_out = Some(out);
    }
    Ok(Mlp::from_layers(layers))
}

fn read_version<R: Read>(r: &mut R) -> Result<()> {
    let v = get_u32(r)?;
    if v != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {v}")));
    }
    Ok(())
}

pub fn write_policy<W: Write>(w: &mut W, policy: &GaussianPolicy) -> Result<()> {
    w.write_all(POLICY_MAGIC)?;
    put_u32(w, VERSION)?;
    write_layers(w, policy.net())?;
    put_f64s(w, policy.log_std())?;
    Ok(())
}

pub fn read_policy<R: Read>(r: &mut R) -> Result<GaussianPolicy> {
    expect_magic(r, POLICY_MAGIC)?;
    read_version(r)?;
    let net = read_layers(r)?;
    let log_std = get_f64s(r)?;
    let n = log_std.len();
    GaussianPolicy::from_parts(net, Tensor::from_vec(&[n], log_std)?)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn write_mlp<W: Write>(w: &mut W, net: &Mlp) -> Result<()> {
    w.write_all(MLP_MAGIC)?;
    put_u32(w, VERSION)?;
    write_layers(w, net)
}

pub fn read_mlp<R: Read>(r: &mut R) -> Result<Mlp> {
    expect_magic(r, MLP_MAGIC)?;
    read_version(r)?;
    read_layers(r)
}

pub fn save_policy(path: &Path, policy: &GaussianPolicy) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_policy(&mut w, policy)?;
    w.flush()?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<GaussianPolicy> {
    read_policy(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Parameters;

    #[test]
    fn policy_round_trip_is_bit_exact() {
        let mut p = GaussianPolicy::with_hidden(7, 3, &[5, 4], 17);
        p.log_std_mut().copy_from_slice(&[-0.1, 1e-300, -4.999_999]);
        let mut buf = Vec::new();
        write_policy(&mut buf, &p).unwrap();
        let q = read_policy(&mut buf.as_slice()).unwrap();
        assert_eq!(p, q);
        let bits = |p: &GaussianPolicy| -> Vec<u64> {
            p.flat_values().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&p), bits(&q));
    }

    #[test]
    fn rejects_foreign_and_truncated_files() {
        let p = GaussianPolicy::with_hidden(2, 1, &[3], 1);
        let mut buf = Vec::new();
        write_policy(&mut buf, &p).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_policy(&mut bad.as_slice()), Err(Error::Format(_))));
        assert!(read_policy(&mut &buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn mlp_round_trip() {
        let net = Mlp::new(&[4, 6, 1], 1.0, &mut crate::seed::rng(2));
        let mut buf = Vec::new();
        write_mlp(&mut buf, &net).unwrap();
        assert_eq!(read_mlp(&mut buf.as_slice()).unwrap(), net);
    }
}
