//! NIfTI-1 reading and writing.
//!
//! Single-file (`n+1`) and paired (`ni1`, `.hdr`/`.img`) layouts are read,
//! optionally gzip-compressed, in either byte order. Writing always produces a
//! little-endian single-file volume with an sform affine. Voxel data is held as
//! `f64` in x-fastest order regardless of the on-disk datatype.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;
const NIFTI2_HEADER_SIZE: i32 = 540;
const DEFAULT_VOX_OFFSET: usize = 352;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

/// On-disk voxel datatype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataType {
    UInt8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl DataType {
    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => DataType::UInt8,
            4 => DataType::Int16,
            8 => DataType::Int32,
            16 => DataType::Float32,
            64 => DataType::Float64,
            _ => return Err(Error::UnsupportedDatatype { code }),
        })
    }

    pub fn code(self) -> i16 {
        match self {
            DataType::UInt8 => 2,
            DataType::Int16 => 4,
            DataType::Int32 => 8,
            DataType::Float32 => 16,
            DataType::Float64 => 64,
        }
    }

    pub fn size_of(self) -> usize {
        match self {
            DataType::UInt8 => 1,
            DataType::Int16 => 2,
            DataType::Int32 | DataType::Float32 => 4,
            DataType::Float64 => 8,
        }
    }

    fn bounds(self) -> Option<(f64, f64)> {
        match self {
            DataType::UInt8 => Some((0.0, u8::MAX as f64)),
            DataType::Int16 => Some((i16::MIN as f64, i16::MAX as f64)),
            DataType::Int32 => Some((i32::MIN as f64, i32::MAX as f64)),
            DataType::Float32 | DataType::Float64 => None,
        }
    }
}

/// Voxel-index to world (mm) transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine(pub [[f64; 4]; 4]);

impl Affine {
    pub fn identity() -> Self {
        Self::diagonal([1.0, 1.0, 1.0])
    }

    pub fn diagonal(spacing: [f64; 3]) -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, s) in spacing.iter().enumerate() {
            m[i][i] = *s;
        }
        m[3][3] = 1.0;
        Affine(m)
    }

    pub fn with_translation(mut self, t: [f64; 3]) -> Self {
        for (i, v) in t.iter().enumerate() {
            self.0[i][3] = *v;
        }
        self
    }

    /// Map a (possibly fractional) voxel index to world coordinates.
    pub fn apply(&self, ijk: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        let mut out = [0.0; 3];
        for (r, o) in out.iter_mut().enumerate() {
            *o = m[r][0] * ijk[0] + m[r][1] * ijk[1] + m[r][2] * ijk[2] + m[r][3];
        }
        out
    }

    /// Apply only the 3x3 linear block (directions and scaling).
    pub fn apply_linear(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        let mut out = [0.0; 3];
        for (r, o) in out.iter_mut().enumerate() {
            *o = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2];
        }
        out
    }

    pub fn column_norms(&self) -> [f64; 3] {
        let m = &self.0;
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            *o = (m[0][c] * m[0][c] + m[1][c] * m[1][c] + m[2][c] * m[2][c]).sqrt();
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Affine) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).abs());
            }
        }
        worst
    }
}

/// `affine · (i, j, k, 1)`, first three components.
pub fn voxel_to_world(affine: &Affine, ijk: [usize; 3]) -> [f64; 3] {
    affine.apply([ijk[0] as f64, ijk[1] as f64, ijk[2] as f64])
}

/// Grid shape and placement shared by volumes, label maps and masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub affine: Affine,
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], affine: Affine) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidInput(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "spacing must be positive, got {spacing:?}"
            )));
        }
        if affine.0[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidInput("affine last row must be (0,0,0,1)".into()));
        }
        let norms = affine.column_norms();
        for (n, s) in norms.iter().zip(spacing.iter()) {
            if ((n - s) / s).abs() > 1e-4 {
                return Err(Error::InvalidInput(format!(
                    "affine column norms {norms:?} disagree with spacing {spacing:?}"
                )));
            }
        }
        Ok(Geometry { dims, spacing, affine })
    }

    /// Axis-aligned grid with the given spacing and origin at world zero.
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3]) -> Self {
        Geometry::new(dims, spacing, Affine::diagonal(spacing)).expect("valid axis-aligned geometry")
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Dims must match exactly, affines within 1e-4 per element.
    pub fn ensure_matches(&self, other: &Geometry, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::GeometryMismatch(format!(
                "{what}: dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let diff = self.affine.max_abs_diff(&other.affine);
        if diff > 1e-4 {
            return Err(Error::GeometryMismatch(format!("{what}: affines differ by {diff:.3e}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub geometry: Geometry,
    pub data: Vec<f64>,
    pub datatype: DataType,
}

impl Volume {
    pub fn new(geometry: Geometry, data: Vec<f64>, datatype: DataType) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidInput(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                geometry.dims
            )));
        }
        Ok(Volume {
            geometry,
            data,
            datatype,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    /// Same geometry and datatype, new voxel values.
    pub fn with_data(&self, data: Vec<f64>) -> Volume {
        assert_eq!(data.len(), self.data.len());
        Volume {
            geometry: self.geometry.clone(),
            data,
            datatype: self.datatype,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub geometry: Geometry,
    pub labels: Vec<i32>,
}

impl LabelMap {
    pub fn new(geometry: Geometry, labels: Vec<i32>) -> Result<Self> {
        if labels.len() != geometry.len() {
            return Err(Error::InvalidInput(format!(
                "label length {} does not match dims {:?}",
                labels.len(),
                geometry.dims
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l < 0) {
            return Err(Error::InvalidInput(format!("negative label {bad}")));
        }
        Ok(LabelMap { geometry, labels })
    }

    pub fn to_volume(&self, datatype: DataType) -> Volume {
        Volume {
            geometry: self.geometry.clone(),
            data: self.labels.iter().map(|&l| l as f64).collect(),
            datatype,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Endian {
    Little,
    Big,
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl HeaderReader<'_> {
    fn i16(&self, off: usize) -> i16 {
        match self.endian {
            Endian::Little => LittleEndian::read_i16(&self.bytes[off..]),
            Endian::Big => BigEndian::read_i16(&self.bytes[off..]),
        }
    }

    fn i32(&self, off: usize) -> i32 {
        match self.endian {
            Endian::Little => LittleEndian::read_i32(&self.bytes[off..]),
            Endian::Big => BigEndian::read_i32(&self.bytes[off..]),
        }
    }

    fn f32(&self, off: usize) -> f64 {
        match self.endian {
            Endian::Little => LittleEndian::read_f32(&self.bytes[off..]) as f64,
            Endian::Big => BigEndian::read_f32(&self.bytes[off..]) as f64,
        }
    }
}

struct Header {
    endian: Endian,
    dims: [usize; 3],
    datatype: DataType,
    vox_offset: usize,
    slope: f64,
    inter: f64,
    geometry: Geometry,
    paired: bool,
}

fn read_file_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::with_capacity(raw.len() * 2);
        MultiGzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn malformed(offset: usize, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        offset,
        reason: reason.into(),
    }
}

fn detect_endian(bytes: &[u8]) -> Result<Endian> {
    let le = LittleEndian::read_i16(&bytes[offsets::DIM..]);
    if (1..=7).contains(&le) {
        return Ok(Endian::Little);
    }
    let be = BigEndian::read_i16(&bytes[offsets::DIM..]);
    if (1..=7).contains(&be) {
        return Ok(Endian::Big);
    }
    Err(malformed(offsets::DIM, format!("dim[0] = {le} outside [1, 7]")))
}

fn quatern_affine(h: &HeaderReader<'_>, spacing: [f64; 3], qfac: f64) -> Affine {
    let b = h.f32(offsets::QUATERN_B);
    let c = h.f32(offsets::QUATERN_B + 4);
    let d = h.f32(offsets::QUATERN_B + 8);
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let r = [
        [
            a * a + b * b - c * c - d * d,
            2.0 * (b * c - a * d),
            2.0 * (b * d + a * c),
        ],
        [
            2.0 * (b * c + a * d),
            a * a + c * c - b * b - d * d,
            2.0 * (c * d - a * b),
        ],
        [
            2.0 * (b * d - a * c),
            2.0 * (c * d + a * b),
            a * a + d * d - c * c - b * b,
        ],
    ];
    let scale = [spacing[0], spacing[1], spacing[2] * qfac];
    let mut m = [[0.0; 4]; 4];
    for row in 0..3 {
        for col in 0..3 {
            m[row][col] = r[row][col] * scale[col];
        }
        m[row][3] = h.f32(offsets::QOFFSET_X + 4 * row);
    }
    m[3][3] = 1.0;
    Affine(m)
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_SIZE {
        return Err(malformed(
            bytes.len(),
            format!("file holds {} bytes, header needs {HEADER_SIZE}", bytes.len()),
        ));
    }
    let sizeof_le = LittleEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]);
    let sizeof_be = BigEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]);
    if sizeof_le == NIFTI2_HEADER_SIZE || sizeof_be == NIFTI2_HEADER_SIZE {
        return Err(malformed(0, "NIfTI-2 headers are not supported"));
    }
    let magic = &bytes[offsets::MAGIC..offsets::MAGIC + 4];
    let paired = match magic {
        b"n+1\0" => false,
        b"ni1\0" => true,
        _ => {
            return Err(malformed(
                offsets::MAGIC,
                format!("bad magic {:?}", String::from_utf8_lossy(magic)),
            ))
        }
    };
    let endian = detect_endian(bytes)?;
    let h = HeaderReader { bytes, endian };
    if h.i32(offsets::SIZEOF_HDR) != HEADER_SIZE as i32 {
        return Err(malformed(0, format!("sizeof_hdr = {}", h.i32(0))));
    }

    let ndim = h.i16(offsets::DIM) as usize;
    let mut dims = [1usize; 3];
    for i in 1..=7 {
        let d = h.i16(offsets::DIM + 2 * i);
        if i <= ndim {
            if d <= 0 {
                return Err(malformed(offsets::DIM + 2 * i, format!("dim[{i}] = {d}")));
            }
            if i <= 3 {
                dims[i - 1] = d as usize;
            } else if d != 1 {
                return Err(malformed(
                    offsets::DIM + 2 * i,
                    format!("only single 3D volumes are supported, dim[{i}] = {d}"),
                ));
            }
        }
    }

    let datatype = DataType::from_code(h.i16(offsets::DATATYPE))?;
    let bitpix = h.i16(offsets::BITPIX);
    if bitpix as usize != 8 * datatype.size_of() {
        return Err(malformed(
            offsets::BITPIX,
            format!("bitpix {bitpix} inconsistent with datatype {datatype:?}"),
        ));
    }

    let mut spacing = [1.0; 3];
    for (i, s) in spacing.iter_mut().enumerate() {
        if i < ndim {
            let p = h.f32(offsets::PIXDIM + 4 * (i + 1)).abs();
            if !(p > 0.0 && p.is_finite()) {
                return Err(malformed(
                    offsets::PIXDIM + 4 * (i + 1),
                    format!("pixdim[{}] = {p}", i + 1),
                ));
            }
            *s = p;
        }
    }
    let qfac = if h.f32(offsets::PIXDIM) < 0.0 { -1.0 } else { 1.0 };

    let vox_offset_f = h.f32(offsets::VOX_OFFSET);
    if !(vox_offset_f >= 0.0 && vox_offset_f.is_finite()) {
        return Err(malformed(offsets::VOX_OFFSET, format!("vox_offset = {vox_offset_f}")));
    }
    let vox_offset = vox_offset_f as usize;
    if !paired && vox_offset < HEADER_SIZE {
        return Err(malformed(
            offsets::VOX_OFFSET,
            format!("vox_offset {vox_offset} lies inside the header"),
        ));
    }

    let slope = h.f32(offsets::SCL_SLOPE);
    let inter = h.f32(offsets::SCL_INTER);

    let qform_code = h.i16(offsets::QFORM_CODE);
    let sform_code = h.i16(offsets::SFORM_CODE);
    let qform = (qform_code > 0).then(|| quatern_affine(&h, spacing, qfac));
    let sform = (sform_code > 0).then(|| {
        let mut m = [[0.0; 4]; 4];
        for (r, row) in m.iter_mut().take(3).enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = h.f32(offsets::SROW_X + 16 * r + 4 * c);
            }
        }
        m[3][3] = 1.0;
        Affine(m)
    });
    let affine = match (sform, qform) {
        (Some(s), Some(q)) => {
            let diff = s.max_abs_diff(&q);
            if diff > 1e-4 {
                warn!("sform and qform disagree by {diff:.3e}; using sform");
            }
            s
        }
        (Some(s), None) => s,
        (None, Some(q)) => q,
        (None, None) => Affine::diagonal(spacing),
    };
    // Spacing follows the chosen affine so that geometry stays self-consistent.
    let norms = affine.column_norms();
    if norms.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
        return Err(malformed(offsets::SROW_X, "degenerate affine"));
    }
    let geometry = Geometry::new(dims, norms, affine).map_err(|e| malformed(offsets::SROW_X, e.to_string()))?;

    Ok(Header {
        endian,
        dims,
        datatype,
        vox_offset,
        slope,
        inter,
        geometry,
        paired,
    })
}

fn decode_data(h: &Header, bytes: &[u8], offset: usize) -> Result<Vec<f64>> {
    let n = h.dims[0] * h.dims[1] * h.dims[2];
    let size = h.datatype.size_of();
    let needed = n * size;
    let available = bytes.len().saturating_sub(offset);
    if available < needed {
        return Err(Error::TruncatedData {
            offset,
            needed,
            available,
        });
    }
    let raw = &bytes[offset..offset + needed];
    let mut out = vec![0.0; n];
    macro_rules! decode {
        ($read:ident) => {
            match h.endian {
                Endian::Little => {
                    for (o, chunk) in out.iter_mut().zip(raw.chunks_exact(size)) {
                        *o = LittleEndian::$read(chunk) as f64;
                    }
                }
                Endian::Big => {
                    for (o, chunk) in out.iter_mut().zip(raw.chunks_exact(size)) {
                        *o = BigEndian::$read(chunk) as f64;
                    }
                }
            }
        };
    }
    match h.datatype {
        DataType::UInt8 => {
            for (o, b) in out.iter_mut().zip(raw) {
                *o = *b as f64;
            }
        }
        DataType::Int16 => decode!(read_i16),
        DataType::Int32 => decode!(read_i32),
        DataType::Float32 => decode!(read_f32),
        DataType::Float64 => decode!(read_f64),
    }
    if h.slope != 0.0 && h.slope.is_finite() && (h.slope != 1.0 || h.inter != 0.0) {
        for v in &mut out {
            *v = *v * h.slope + h.inter;
        }
    }
    Ok(out)
}

fn paired_image_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let img = if let Some(stem) = name.strip_suffix(".hdr.gz") {
        format!("{stem}.img.gz")
    } else if let Some(stem) = name.strip_suffix(".hdr") {
        format!("{stem}.img")
    } else {
        format!("{name}.img")
    };
    path.with_file_name(img)
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = read_file_bytes(path)?;
    let header = parse_header(&bytes)?;
    let data = if header.paired {
        let img = read_file_bytes(&paired_image_path(path))?;
        decode_data(&header, &img, header.vox_offset)?
    } else {
        decode_data(&header, &bytes, header.vox_offset)?
    };
    Ok(Volume {
        geometry: header.geometry,
        data,
        datatype: header.datatype,
    })
}

/// Read an integer-valued segmentation. Float files are accepted when every
/// value is whole within 1e-6.
pub fn read_labelmap(path: impl AsRef<Path>) -> Result<LabelMap> {
    let v = read_volume(path)?;
    labelmap_from_volume(&v)
}

pub fn labelmap_from_volume(v: &Volume) -> Result<LabelMap> {
    let mut labels = Vec::with_capacity(v.data.len());
    for (index, &value) in v.data.iter().enumerate() {
        let r = value.round();
        if !value.is_finite() || (value - r).abs() > 1e-6 || r < 0.0 || r > i32::MAX as f64 {
            return Err(Error::NonIntegralLabel { index, value });
        }
        labels.push(r as i32);
    }
    Ok(LabelMap {
        geometry: v.geometry.clone(),
        labels,
    })
}

fn encode_header(v: &Volume) -> Vec<u8> {
    let mut h = vec![0u8; DEFAULT_VOX_OFFSET];
    let g = &v.geometry;
    LittleEndian::write_i32(&mut h[offsets::SIZEOF_HDR..], HEADER_SIZE as i32);
    let dims = [3i16, g.dims[0] as i16, g.dims[1] as i16, g.dims[2] as i16, 1, 1, 1, 1];
    for (i, d) in dims.iter().enumerate() {
        LittleEndian::write_i16(&mut h[offsets::DIM + 2 * i..], *d);
    }
    LittleEndian::write_i16(&mut h[offsets::DATATYPE..], v.datatype.code());
    LittleEndian::write_i16(&mut h[offsets::BITPIX..], 8 * v.datatype.size_of() as i16);
    let pixdim = [1.0f32, g.spacing[0] as f32, g.spacing[1] as f32, g.spacing[2] as f32];
    for (i, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut h[offsets::PIXDIM + 4 * i..], *p);
    }
    LittleEndian::write_f32(&mut h[offsets::VOX_OFFSET..], DEFAULT_VOX_OFFSET as f32);
    LittleEndian::write_f32(&mut h[offsets::SCL_SLOPE..], 0.0);
    LittleEndian::write_f32(&mut h[offsets::SCL_INTER..], 0.0);
    h[offsets::XYZT_UNITS] = 2; // mm
    LittleEndian::write_i16(&mut h[offsets::QFORM_CODE..], 0);
    LittleEndian::write_i16(&mut h[offsets::SFORM_CODE..], 2);
    for r in 0..3 {
        for c in 0..4 {
            LittleEndian::write_f32(&mut h[offsets::SROW_X + 16 * r + 4 * c..], g.affine.0[r][c] as f32);
        }
    }
    h[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(b"n+1\0");
    h
}

fn encode_data(v: &Volume, out: &mut Vec<u8>) -> Result<()> {
    if let Some((lo, hi)) = v.datatype.bounds() {
        if let Some((i, x)) = v
            .data
            .iter()
            .enumerate()
            .find(|(_, x)| x.fract() != 0.0 || **x < lo || **x > hi)
        {
            return Err(Error::InvalidInput(format!(
                "voxel {i} value {x} not representable as {:?}",
                v.datatype
            )));
        }
    }
    let size = v.datatype.size_of();
    let start = out.len();
    out.resize(start + size * v.data.len(), 0);
    let buf = &mut out[start..];
    for (x, chunk) in v.data.iter().zip(buf.chunks_exact_mut(size)) {
        match v.datatype {
            DataType::UInt8 => chunk[0] = *x as u8,
            DataType::Int16 => LittleEndian::write_i16(chunk, *x as i16),
            DataType::Int32 => LittleEndian::write_i32(chunk, *x as i32),
            DataType::Float32 => LittleEndian::write_f32(chunk, *x as f32),
            DataType::Float64 => LittleEndian::write_f64(chunk, *x),
        }
    }
    Ok(())
}

/// Encode a volume as single-file NIfTI-1 bytes (uncompressed).
pub fn encode_volume(v: &Volume) -> Result<Vec<u8>> {
    let mut bytes = encode_header(v);
    encode_data(v, &mut bytes)?;
    Ok(bytes)
}

/// Write `v` to `path`; a `.gz` suffix selects gzip compression.
pub fn write_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_volume(v)?;
    let gz = path.extension().map(|e| e.eq_ignore_ascii_case("gz")).unwrap_or(false);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    if gz {
        let mut enc = GzEncoder::new(&mut file, Compression::fast());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?;
    } else {
        file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn write_labelmap(lm: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let max = lm.labels.iter().copied().max().unwrap_or(0);
    let dt = if max <= u8::MAX as i32 {
        DataType::UInt8
    } else if max <= i16::MAX as i32 {
        DataType::Int16
    } else {
        DataType::Int32
    };
    write_volume(&lm.to_volume(dt), path)
}
