//! Binary containers, model files, manifests and PGM export.
//!
//! All binary formats are little-endian and end with a metadata trailer:
//! a `u64` byte length followed by UTF-8 `key=value` lines. Keys are sorted,
//! so identical inputs produce identical bytes.
//!
//! `RGN1` layout: magic, `u32` version, `u64` rows, `u64` cols, `u64` k,
//! the row-major matrix, `k` singular values, the `k x rows` data-space
//! vectors (U), the `k x cols` image-space vectors (V), trailer. Plain data
//! arrays use the same container with `k = 0`.
//!
//! `RGNN` layout: magic, `u32` version, `u64` side, `u8` residual flag,
//! `u64` layer count, `(u64 in, u64 out)` per layer, `u64` init seed,
//! `u64` parameter count, the parameters (per layer: weights then biases), trailer.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linop::SvdOperator;
use crate::network::{ConvSpec, LayerParams, NetworkArch, NetworkParams};

pub const OPERATOR_MAGIC: &[u8; 4] = b"RGN1";
pub const MODEL_MAGIC: &[u8; 4] = b"RGNN";
pub const FORMAT_VERSION: u32 = 1;

pub type Metadata = BTreeMap<String, String>;

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s<'a>(&mut self, v: impl IntoIterator<Item = &'a f64>) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn metadata(&mut self, meta: &Metadata) -> Result<()> {
        let text = encode_metadata(meta)?;
        self.u64(text.len() as u64);
        self.0.extend_from_slice(text.as_bytes());
        Ok(())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end =
            self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| format_err("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| format_err("size does not fit in memory"))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| format_err("array too large"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(format_err(format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(format_err(format!("unsupported version {version}")));
        }
        Ok(())
    }
    fn metadata(&mut self) -> Result<Metadata> {
        let n = self.usize()?;
        let text = std::str::from_utf8(self.take(n)?).map_err(|_| format_err("metadata is not UTF-8"))?;
        let meta = decode_metadata(text)?;
        if self.pos != self.buf.len() {
            return Err(format_err("trailing bytes after metadata"));
        }
        Ok(meta)
    }
}

fn encode_metadata(meta: &Metadata) -> Result<String> {
    let mut out = String::new();
    for (k, v) in meta {
        if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::invalid(format!("metadata entry {k:?} cannot be encoded")));
        }
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    Ok(out)
}

fn decode_metadata(text: &str) -> Result<Metadata> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| format_err(format!("metadata line without '=': {l}")))
        })
        .collect()
}

/// Serializes an operator with its singular system. `rank_tol` is kept in the trailer.
pub fn encode_operator(op: &SvdOperator, meta: &Metadata) -> Result<Vec<u8>> {
    let mut meta = meta.clone();
    meta.insert("rank_tol".into(), format!("{:e}", op.rank_tol()));
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(OPERATOR_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u64(op.rows() as u64);
    w.u64(op.cols() as u64);
    w.u64(op.stored() as u64);
    w.f64s(op.matrix());
    w.f64s(op.singular_values());
    w.f64s(op.data_vectors());
    w.f64s(op.image_vectors());
    w.metadata(&meta)?;
    Ok(w.0)
}

pub fn decode_operator(bytes: &[u8]) -> Result<(SvdOperator, Metadata)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.header(OPERATOR_MAGIC)?;
    let (rows, cols, k) = (r.usize()?, r.usize()?, r.usize()?);
    if k == 0 {
        return Err(format_err("container holds a plain array, not an operator"));
    }
    let size = rows.checked_mul(cols).ok_or_else(|| format_err("matrix too large"))?;
    let matrix = r.f64s(size)?;
    let sigma = r.f64s(k)?;
    let data_vectors = r.f64s(k.saturating_mul(rows))?;
    let image_vectors = r.f64s(k.saturating_mul(cols))?;
    let meta = r.metadata()?;
    let rank_tol =
        meta.get("rank_tol").and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| format_err("missing rank_tol"))?;
    let op = SvdOperator::from_parts(rows, cols, matrix, sigma, image_vectors, data_vectors, rank_tol)?;
    Ok((op, meta))
}

/// A row-major `rows x cols` array in the `RGN1` container (`k = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct DataArray {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

pub fn encode_array(array: &DataArray, meta: &Metadata) -> Result<Vec<u8>> {
    crate::error::check_len(array.rows * array.cols, array.values.len())?;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(OPERATOR_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u64(array.rows as u64);
    w.u64(array.cols as u64);
    w.u64(0);
    w.f64s(&array.values);
    w.metadata(meta)?;
    Ok(w.0)
}

pub fn decode_array(bytes: &[u8]) -> Result<(DataArray, Metadata)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.header(OPERATOR_MAGIC)?;
    let (rows, cols, k) = (r.usize()?, r.usize()?, r.usize()?);
    if k != 0 {
        return Err(format_err("container holds an operator, not a plain array"));
    }
    let values = r.f64s(rows.checked_mul(cols).ok_or_else(|| format_err("array too large"))?)?;
    let meta = r.metadata()?;
    Ok((DataArray { rows, cols, values }, meta))
}

pub fn encode_model(params: &NetworkParams, meta: &Metadata) -> Result<Vec<u8>> {
    params.validate()?;
    let arch = &params.arch;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MODEL_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u64(arch.side as u64);
    w.u8(arch.residual as u8);
    w.u64(arch.layers.len() as u64);
    for l in &arch.layers {
        w.u64(l.in_channels as u64);
        w.u64(l.out_channels as u64);
    }
    w.u64(params.seed);
    w.u64(params.parameter_count() as u64);
    for l in &params.layers {
        w.f64s(&l.weights);
        w.f64s(&l.bias);
    }
    w.metadata(meta)?;
    Ok(w.0)
}

pub fn decode_model(bytes: &[u8]) -> Result<(NetworkParams, Metadata)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.header(MODEL_MAGIC)?;
    let side = r.usize()?;
    let residual = match r.u8()? {
        0 => false,
        1 => true,
        v => return Err(format_err(format!("bad residual flag {v}"))),
    };
    let n_layers = r.usize()?;
    if n_layers > 1024 {
        return Err(format_err("implausible layer count"));
    }
    let mut specs = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        specs.push(ConvSpec { in_channels: r.usize()?, out_channels: r.usize()? });
    }
    let arch = NetworkArch::new(side, specs, residual)?;
    let seed = r.u64()?;
    let count = r.usize()?;
    let mut layers = Vec::with_capacity(n_layers);
    let mut total = 0;
    for l in &arch.layers {
        let nw = l.out_channels * l.in_channels * 9;
        let weights = r.f64s(nw)?;
        let bias = r.f64s(l.out_channels)?;
        total += nw + l.out_channels;
        layers.push(LayerParams { weights, bias });
    }
    if total != count {
        return Err(format_err(format!("parameter count {count} does not match architecture ({total})")));
    }
    let meta = r.metadata()?;
    let params = NetworkParams { arch, layers, seed };
    params.validate()?;
    Ok((params, meta))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn write_operator(path: &Path, op: &SvdOperator, meta: &Metadata) -> Result<()> {
    write_bytes(path, &encode_operator(op, meta)?)
}

pub fn read_operator(path: &Path) -> Result<(SvdOperator, Metadata)> {
    decode_operator(&fs::read(path)?)
}

pub fn write_array(path: &Path, array: &DataArray, meta: &Metadata) -> Result<()> {
    write_bytes(path, &encode_array(array, meta)?)
}

pub fn read_array(path: &Path) -> Result<(DataArray, Metadata)> {
    decode_array(&fs::read(path)?)
}

pub fn write_model(path: &Path, params: &NetworkParams, meta: &Metadata) -> Result<()> {
    write_bytes(path, &encode_model(params, meta)?)
}

pub fn read_model(path: &Path) -> Result<(NetworkParams, Metadata)> {
    decode_model(&fs::read(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub alpha: f64,
    pub model: PathBuf,
}

/// One `alpha=<decimal> model=<path>` line per entry after `# key=value` header lines.
pub fn encode_manifest(entries: &[ManifestEntry], meta: &Metadata) -> Result<String> {
    let mut out: String = meta.iter().map(|(k, v)| format!("# {k}={v}\n")).collect();
    for e in entries {
        let model = e.model.to_str().ok_or_else(|| Error::invalid("model path is not UTF-8"))?;
        if model.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("model path {model:?} contains whitespace")));
        }
        out.push_str(&format!("alpha={} model={model}\n", e.alpha));
    }
    Ok(out)
}

pub fn decode_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || format_err(format!("manifest line {}: {line}", lineno + 1));
        let mut alpha = None;
        let mut model = None;
        for field in line.split_whitespace() {
            match field.split_once('=') {
                Some(("alpha", v)) => alpha = Some(v.parse::<f64>().map_err(|_| bad())?),
                Some(("model", v)) => model = Some(PathBuf::from(v)),
                _ => return Err(bad()),
            }
        }
        let (Some(alpha), Some(model)) = (alpha, model) else { return Err(bad()) };
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(bad());
        }
        entries.push(ManifestEntry { alpha, model });
    }
    Ok(entries)
}

/// 16-bit binary PGM of a `side x side` image, min-max scaled to `0..=65535`.
pub fn encode_pgm(pixels: &[f64], side: usize, comments: &Metadata) -> Result<Vec<u8>> {
    crate::error::check_len(side * side, pixels.len())?;
    if pixels.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("image"));
    }
    let mut out = b"P5\n".to_vec();
    for (k, v) in comments {
        out.extend_from_slice(format!("# {k}={v}\n").as_bytes());
    }
    out.extend_from_slice(format!("{side} {side}\n65535\n").as_bytes());
    let unit = crate::analysis::rescale_unit(pixels);
    for v in unit {
        // PGM samples above 255 are big-endian
        out.extend_from_slice(&((v * 65535.0).round() as u16).to_be_bytes());
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, pixels: &[f64], side: usize, comments: &Metadata) -> Result<()> {
    write_bytes(path, &encode_pgm(pixels, side, comments)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::DEFAULT_RANK_TOL;

    fn meta() -> Metadata {
        [("config_hash".to_string(), "abc".to_string()), ("seed".to_string(), "7".to_string())].into()
    }

    #[test]
    fn operator_round_trip_is_exact() {
        let m: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
        let op = SvdOperator::decompose(m, 3, 4, DEFAULT_RANK_TOL).unwrap();
        let bytes = encode_operator(&op, &meta()).unwrap();
        assert_eq!(&bytes[..4], b"RGN1");
        let (back, md) = decode_operator(&bytes).unwrap();
        assert_eq!(back.matrix(), op.matrix());
        assert_eq!(back.singular_values(), op.singular_values());
        assert_eq!(back.image_vectors(), op.image_vectors());
        assert_eq!(back.data_vectors(), op.data_vectors());
        assert_eq!(back.rank(), op.rank());
        assert_eq!(md["config_hash"], "abc");
        assert_eq!(encode_operator(&back, &meta()).unwrap(), bytes);
    }

    #[test]
    fn array_and_model_round_trip() {
        let a = DataArray { rows: 2, cols: 3, values: vec![1.0, -2.0, 3.5, 0.0, 1e-300, 7.0] };
        let (back, _) = decode_array(&encode_array(&a, &meta()).unwrap()).unwrap();
        assert_eq!(back, a);

        let p = NetworkParams::init(NetworkArch::with_channels(4, &[3], true).unwrap(), 11).unwrap();
        let bytes = encode_model(&p, &meta()).unwrap();
        assert_eq!(&bytes[..4], b"RGNN");
        let (q, md) = decode_model(&bytes).unwrap();
        assert_eq!(q, p);
        assert_eq!(md["seed"], "7");
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let a = DataArray { rows: 1, cols: 2, values: vec![1.0, 2.0] };
        let bytes = encode_array(&a, &Metadata::new()).unwrap();
        assert!(matches!(decode_array(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_array(&bad), Err(Error::Format(_))));
        assert!(matches!(decode_operator(&bytes), Err(Error::Format(_))));
        assert!(matches!(decode_model(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn manifest_round_trip() {
        let entries = vec![
            ManifestEntry { alpha: 0.1, model: "models/a.rgnn".into() },
            ManifestEntry { alpha: 3.0e-5, model: "b.rgnn".into() },
        ];
        let text = encode_manifest(&entries, &meta()).unwrap();
        assert!(text.contains("alpha=0.1 model=models/a.rgnn\n"));
        assert_eq!(decode_manifest(&text).unwrap(), entries);
        assert!(decode_manifest("alpha=x model=a").is_err());
        assert!(decode_manifest("alpha=0.1").is_err());
        assert!(decode_manifest("alpha=-1 model=a").is_err());
    }

    #[test]
    fn pgm_layout() {
        let img = [0.0, 1.0, 0.5, 1.0];
        let bytes = encode_pgm(&img, 2, &meta()).unwrap();
        let header = b"P5\n# config_hash=abc\n# seed=7\n2 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0, 0, 255, 255, 128, 0, 255, 255]);
    }
}
