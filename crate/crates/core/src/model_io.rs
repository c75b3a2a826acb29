//! Binary model checkpoints.
//!
//! ```text
//! magic      b"CRCNN1"
//! u32        input side
//! u32        layer count (4)
//! per layer:
//!   u8       kind: 1 = conv, 2 = dense ReLU, 3 = dense linear
//!   u32      rank, then `rank` u32 extents of the weight tensor
//!   u32      stride (conv layers only)
//!   f64 * n  weights, row-major
//!   f64 * m  biases (m = first extent)
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::layers::{Activation, ConvLayer, DenseLayer};
use crate::network::Network;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 6] = b"CRCNN1";

const TAG_CONV: u8 = 1;
const TAG_DENSE_RELU: u8 = 2;
const TAG_DENSE_LINEAR: u8 = 3;

fn put_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_tensor(w: &mut impl Write, t: &Tensor) -> Result<()> {
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn put_shape(w: &mut impl Write, shape: &[usize]) -> Result<()> {
    put_u32(w, shape.len())?;
    for &e in shape {
        put_u32(w, e)?;
    }
    Ok(())
}

fn write_conv(w: &mut impl Write, layer: &ConvLayer) -> Result<()> {
    w.write_all(&[TAG_CONV])?;
    put_shape(w, layer.filters().shape())?;
    put_u32(w, layer.stride())?;
    put_tensor(w, layer.filters())?;
    put_tensor(w, layer.biases())
}

fn write_dense(w: &mut impl Write, layer: &DenseLayer) -> Result<()> {
    let tag = match layer.activation() {
        Activation::Relu => TAG_DENSE_RELU,
        Activation::Linear => TAG_DENSE_LINEAR,
    };
    w.write_all(&[tag])?;
    put_shape(w, layer.weights().shape())?;
    put_tensor(w, layer.weights())?;
    put_tensor(w, layer.biases())
}

pub fn write_model(w: &mut impl Write, net: &Network) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, net.config().input_size)?;
    put_u32(w, 4)?;
    write_conv(w, net.conv1())?;
    write_conv(w, net.conv2())?;
    write_dense(w, net.hidden())?;
    write_dense(w, net.output())?;
    Ok(())
}

pub fn save_model(path: &Path, net: &Network) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, net)?;
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::Format(format!("truncated model reading {what}: {e}")))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes::<4>(what)?) as usize)
    }

    fn shape(&mut self, rank: usize) -> Result<Vec<usize>> {
        let got = self.u32("rank")?;
        if got != rank {
            return Err(Error::Format(format!("expected rank {rank}, found {got}")));
        }
        let shape = (0..rank)
            .map(|_| self.u32("extent"))
            .collect::<Result<Vec<_>>>()?;
        // Bound allocations by what a real checkpoint could hold.
        let count = shape.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
        match count {
            Some(n) if n > 0 && n <= 1 << 28 => Ok(shape),
            _ => Err(Error::Format(format!("implausible tensor shape {shape:?}"))),
        }
    }

    fn tensor(&mut self, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| Ok(f64::from_le_bytes(self.bytes::<8>("parameters")?)))
            .collect::<Result<Vec<_>>>()?;
        Tensor::from_vec(shape, data)
    }

    fn conv(&mut self) -> Result<ConvLayer> {
        let tag = self.bytes::<1>("layer tag")?[0];
        if tag != TAG_CONV {
            return Err(Error::Format(format!("expected conv layer, found tag {tag}")));
        }
        let shape = self.shape(4)?;
        let stride = self.u32("stride")?;
        let filters = self.tensor(&shape)?;
        let biases = self.tensor(&shape[..1])?;
        ConvLayer::from_params(filters, biases, stride)
    }

    fn dense(&mut self, want: Activation) -> Result<DenseLayer> {
        let tag = self.bytes::<1>("layer tag")?[0];
        let activation = match tag {
            TAG_DENSE_RELU => Activation::Relu,
            TAG_DENSE_LINEAR => Activation::Linear,
            _ => return Err(Error::Format(format!("expected dense layer, found tag {tag}"))),
        };
        if activation != want {
            return Err(Error::Format(format!(
                "expected {want:?} dense layer, found {activation:?}"
            )));
        }
        let shape = self.shape(2)?;
        let weights = self.tensor(&shape)?;
        let biases = self.tensor(&shape[..1])?;
        DenseLayer::from_params(weights, biases, activation)
    }
}

pub fn read_model(r: impl Read) -> Result<Network> {
    let mut r = Reader { inner: r };
    let magic = r.bytes::<6>("magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad model magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            std::str::from_utf8(MAGIC).unwrap()
        )));
    }
    let input_size = r.u32("input size")?;
    let layers = r.u32("layer count")?;
    if layers != 4 {
        return Err(Error::Format(format!("expected 4 layers, found {layers}")));
    }
    let conv1 = r.conv()?;
    let conv2 = r.conv()?;
    let hidden = r.dense(Activation::Relu)?;
    let output = r.dense(Activation::Linear)?;
    Network::from_layers(conv1, conv2, hidden, output, input_size)
}

pub fn load_model(path: &Path) -> Result<Network> {
    read_model(BufReader::new(File::open(path)?))
}
