//! Portable flat-binary parameter checkpoints.
//!
//! Layout (all integers and reals little-endian):
//!
//! ```text
//! magic     8 bytes  "NCPLCKPT"
//! version   u32      1
//! width     u32
//! height    u32
//! palette   u32
//! then for the policy net and the value net, in that order:
//!   layers  u32      number of layer sizes
//!   sizes   u64 × layers
//!   count   u64      number of parameters
//!   params  f64 × count
//! ```

use std::io::{self, Read, Write};

use super::approximator::{Head, MlpApproximator};
use super::mlp::Mlp;

pub const MAGIC: &[u8; 8] = b"NCPLCKPT";
pub const VERSION: u32 = 1;

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn write_net<W: Write>(w: &mut W, net: &Mlp) -> io::Result<()> {
    w.write_all(&(net.sizes().len() as u32).to_le_bytes())?;
    for &s in net.sizes() {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    w.write_all(&(net.params().len() as u64).to_le_bytes())?;
    for p in net.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_net<R: Read>(r: &mut R) -> io::Result<Mlp> {
    let layers = read_u32(r)? as usize;
    if !(2..=64).contains(&layers) {
        return Err(invalid("implausible layer count"));
    }
    let sizes = (0..layers)
        .map(|_| read_u64(r).map(|s| s as usize))
        .collect::<io::Result<Vec<_>>>()?;
    let count = read_u64(r)? as usize;
    if count != Mlp::param_count(&sizes) {
        return Err(invalid("parameter count does not match layer sizes"));
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        params.push(f64::from_le_bytes(b));
    }
    Mlp::from_params(sizes, params).ok_or_else(|| invalid("bad network"))
}

pub fn write_checkpoint<W: Write>(w: &mut W, approx: &MlpApproximator) -> io::Result<()> {
    let (width, height, palette) = approx.shape();
    w.write_all(MAGIC)?;
    for v in [VERSION, width as u32, height as u32, palette as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    write_net(w, approx.net(Head::Policy))?;
    write_net(w, approx.net(Head::Value))
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> io::Result<MlpApproximator> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(invalid("not a checkpoint (bad magic)"));
    }
    if read_u32(r)? != VERSION {
        return Err(invalid("unsupported checkpoint version"));
    }
    let shape = (read_u32(r)? as usize, read_u32(r)? as usize, read_u32(r)? as usize);
    let policy = read_net(r)?;
    let value = read_net(r)?;
    MlpApproximator::from_nets(shape, policy, value).ok_or_else(|| invalid("network shapes disagree"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_bytes() {
        let approx = MlpApproximator::new((2, 2, 2), 3, &[4], 9);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &approx).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        let policy_params = Mlp::param_count(&[8, 4, 3]);
        let value_params = Mlp::param_count(&[8, 4, 1]);
        let expected = 8 + 16 + (4 + 3 * 8 + 8 + 8 * policy_params) + (4 + 3 * 8 + 8 + 8 * value_params);
        assert_eq!(buf.len(), expected);
        assert_eq!(read_checkpoint(&mut buf.as_slice()).unwrap(), approx);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        assert!(read_checkpoint(&mut &b"NOTACKPT\x01\0\0\0"[..]).is_err());
        let approx = MlpApproximator::new((2, 2, 2), 3, &[4], 9);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &approx).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(&mut buf.as_slice()).is_err());
    }
}
