//! Binary dataset (`LTDS`) and checkpoint (`LTCK`) files. All integers and
//! floats are little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use ltlab_core::model::{ModelParams, ModelShape};
use ltlab_core::ndgrad::Tensor;
use ltlab_core::synthlt::LongTailDataset;

pub const DATASET_MAGIC: [u8; 4] = *b"LTDS";
pub const DATASET_VERSION: u32 = 1;
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"LTCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {0}")]
    BadVersion(u32),
    #[error("truncated payload: needed {needed} bytes at offset {offset}, {available} left")]
    Truncated { offset: usize, needed: usize, available: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("label {label} at sample {index} is outside 0..{classes}")]
    LabelOutOfRange { index: usize, label: u32, classes: u32 },
    #[error("block name is not valid UTF-8")]
    BadName,
    #[error("header field overflows: {0}")]
    Overflow(&'static str),
    #[error(transparent)]
    Core(#[from] ltlab_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found: [u8; 4] = self.take(4)?.try_into().unwrap();
        if found != expected {
            return Err(FormatError::BadMagic { expected, found });
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn array<const N: usize, T>(&mut self, count: usize, f: fn([u8; N]) -> T) -> Result<Vec<T>> {
        let bytes = count.checked_mul(N).ok_or(FormatError::Overflow("array length"))?;
        let raw = self.take(bytes)?;
        Ok(raw.chunks_exact(N).map(|c| f(c.try_into().unwrap())).collect())
    }

    fn finish(self) -> Result<()> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(FormatError::TrailingBytes(n)),
        }
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize, what: &'static str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| FormatError::Overflow(what))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_dataset(data: &LongTailDataset) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(24 + 4 * (data.num_classes() + data.len() + data.images().len()));
    out.extend_from_slice(&DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    put_u32(&mut out, data.num_classes(), "class count")?;
    put_u32(&mut out, data.len(), "sample count")?;
    put_u32(&mut out, data.height(), "height")?;
    put_u32(&mut out, data.width(), "width")?;
    for &c in data.class_counts() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for &l in data.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    for &p in data.images() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<LongTailDataset> {
    let mut r = Reader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(FormatError::BadVersion(version));
    }
    let classes = r.u32()?;
    let n = r.u32()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let counts = r.array(classes as usize, u32::from_le_bytes)?;
    let labels = r.array(n, u32::from_le_bytes)?;
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(FormatError::LabelOutOfRange { index, label, classes });
    }
    let pixels = n
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or(FormatError::Overflow("pixel count"))?;
    let images = r.array(pixels, f32::from_le_bytes)?;
    r.finish()?;
    Ok(LongTailDataset::new(h, w, images, labels, counts)?)
}

pub fn write_dataset(path: &Path, data: &LongTailDataset) -> Result<()> {
    write_atomic(path, &encode_dataset(data)?)
}

pub fn read_dataset(path: &Path) -> Result<LongTailDataset> {
    decode_dataset(&fs::read(path)?)
}

pub fn encode_checkpoint(params: &ModelParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let blocks: Vec<_> = params.named_blocks().collect();
    put_u32(&mut out, blocks.len(), "block count")?;
    for (name, t) in blocks {
        put_u32(&mut out, name.len(), "name length")?;
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.rank(), "rank")?;
        for &d in t.shape() {
            put_u32(&mut out, d, "dimension")?;
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(FormatError::BadVersion(version));
    }
    let count = r.u32()?;
    let mut named = Vec::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| FormatError::BadName)?
            .to_owned();
        let rank = r.u32()? as usize;
        let shape: Vec<usize> = r.array(rank, u32::from_le_bytes)?.into_iter().map(|d| d as usize).collect();
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or(FormatError::Overflow("block size"))?;
        let data = r.array(len, f64::from_le_bytes)?;
        named.push((name, Tensor::new(shape, data)?));
    }
    r.finish()?;
    let shape: ModelShape = ModelParams::infer_shape(&named)?;
    Ok(ModelParams::from_blocks(shape, named)?)
}

pub fn write_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    write_atomic(path, &encode_checkpoint(params)?)
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams> {
    decode_checkpoint(&fs::read(path)?)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
