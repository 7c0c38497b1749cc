//! Binary Q-network checkpoints.
//!
//! Layout (all integers `u32` little-endian): magic `MQNT`, version, `m`,
//! `n` (frames), input width, hidden layer count, each hidden width, head
//! width; then every parameter array as little-endian `f64` in declaration
//! order (trunk layers first, then the head; weights before bias).

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::network::{Dense, QNetwork};
use crate::error::{Error, Result};
use crate::perception::ObservationVector;

pub const MAGIC: &[u8; 4] = b"MQNT";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut out: W, net: &QNetwork, frames: usize) -> Result<()> {
    out.write_all(MAGIC)?;
    let hidden = net.hidden_widths();
    let mut header = vec![VERSION, net.agents() as u32, frames as u32, net.input_dim() as u32, hidden.len() as u32];
    header.extend(hidden.iter().map(|h| *h as u32));
    header.push(QNetwork::head_width(net.agents()) as u32);
    for v in header {
        out.write_all(&v.to_le_bytes())?;
    }
    for array in net.parameters() {
        for v in array {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save(path: &Path, net: &QNetwork, frames: usize) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(&mut w, net, frames)?;
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Read a checkpoint and check it matches `m` agents and `frames` frames.
pub fn read_checkpoint<R: Read>(mut input: R, m: usize, frames: usize) -> Result<QNetwork> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("not a Q-network checkpoint".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
    }
    let (cm, cn, input_dim) = (read_u32(&mut input)? as usize, read_u32(&mut input)? as usize, read_u32(&mut input)? as usize);
    if cm != m || cn != frames {
        return Err(Error::InvalidArgument(format!("checkpoint is for m = {cm}, n = {cn}; expected m = {m}, n = {frames}")));
    }
    if input_dim != ObservationVector::width(frames, m) {
        return Err(Error::InvalidArgument(format!("checkpoint input width {input_dim} does not match m and n")));
    }
    let layers = read_u32(&mut input)? as usize;
    if layers > 64 {
        return Err(Error::Parse("implausible hidden layer count".into()));
    }
    let hidden: Vec<usize> = (0..layers).map(|_| read_u32(&mut input).map(|v| v as usize)).collect::<Result<_>>()?;
    let head_width = read_u32(&mut input)? as usize;
    if head_width != QNetwork::head_width(m) {
        return Err(Error::InvalidArgument(format!("checkpoint head width {head_width} does not match m = {m}")));
    }
    let mut trunk = Vec::with_capacity(layers);
    let mut width = input_dim;
    for h in hidden {
        let w = read_f64s(&mut input, h * width)?;
        let b = read_f64s(&mut input, h)?;
        trunk.push(Dense {
            weights: DMatrix::from_column_slice(h, width, &w),
            bias: DVector::from_vec(b),
        });
        width = h;
    }
    let w = read_f64s(&mut input, head_width * width)?;
    let b = read_f64s(&mut input, head_width)?;
    let head = Dense {
        weights: DMatrix::from_column_slice(head_width, width, &w),
        bias: DVector::from_vec(b),
    };
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Parse(format!("{} trailing bytes after parameters", rest.len())));
    }
    QNetwork::from_layers(m, trunk, head)
}

pub fn load(path: &Path, m: usize, frames: usize) -> Result<QNetwork> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file), m, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn round_trip_and_dimension_checks() {
        let (m, n) = (3, 2);
        let net = QNetwork::new(ObservationVector::width(n, m), &[5, 4], m, &mut stream(4, Stream::Network, 0)).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &net, n).unwrap();
        assert_eq!(&bytes[..4], MAGIC);
        assert_eq!(read_checkpoint(bytes.as_slice(), m, n).unwrap(), net);
        assert!(matches!(read_checkpoint(bytes.as_slice(), 4, n), Err(Error::InvalidArgument(_))));
        assert!(matches!(read_checkpoint(bytes.as_slice(), m, 3), Err(Error::InvalidArgument(_))));
        assert!(read_checkpoint(&bytes[..bytes.len() - 8], m, n).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(bad.as_slice(), m, n), Err(Error::Parse(_))));
    }
}
