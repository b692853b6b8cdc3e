//! Mesh, field and curve files.
//!
//! Meshes are read from ASCII or binary little-endian PLY and from OBJ.
//! Fields are written as lossless CSV or as PLY with per-vertex colours.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::curve::{CurveError, PlanarCurve};
use crate::features::{power_normalize, FeatureError, Quantity, ScalarField, VertexFlags};
use crate::mesh::{MeshError, TriMesh};
use crate::{Vec2, Vec3};

/// Position of a problem inside an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Byte(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(l) => write!(f, "line {l}"),
            Location::Byte(b) => write!(f, "byte {b}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed header at {location}: {message}")]
    MalformedHeader { location: Location, message: String },
    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },
    #[error("vertex index {index} at {location} is out of range ({vertex_count} vertices)")]
    IndexOutOfRange {
        location: Location,
        index: i64,
        vertex_count: usize,
    },
    #[error("non-finite coordinate at {location}")]
    NonFinite { location: Location },
    #[error("field has {field} values but the mesh has {mesh} vertices")]
    FieldMismatch { field: usize, mesh: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(location: Location, message: impl Into<String>) -> IoError {
    IoError::Parse {
        location,
        message: message.into(),
    }
}

/// Raw indexed geometry as read from a file, before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshData {
    pub positions: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    /// Per-vertex colours when the file carries red/green/blue.
    pub colors: Option<Vec<[u8; 3]>>,
}

impl MeshData {
    pub fn into_mesh(self) -> Result<TriMesh, MeshError> {
        TriMesh::build(self.positions, self.faces)
    }
}

/// Reads a PLY or OBJ file, chosen by extension or by the PLY magic line.
pub fn read_mesh(path: &Path) -> Result<TriMesh, IoError> {
    Ok(read_mesh_data(path)?.into_mesh()?)
}

pub fn read_mesh_data(path: &Path) -> Result<MeshData, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("obj") => parse_obj(&String::from_utf8_lossy(&bytes)),
        Some("ply") => parse_ply(&bytes),
        _ if bytes.starts_with(b"ply") => parse_ply(&bytes),
        _ => Err(IoError::UnsupportedFormat(format!(
            "{}: expected a .ply or .obj file",
            path.display()
        ))),
    }
}

/// Per-vertex colours of a PLY file.
pub fn read_ply_colors(path: &Path) -> Result<Vec<[u8; 3]>, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_ply(&bytes)?
        .colors
        .ok_or_else(|| IoError::UnsupportedFormat("PLY file has no red/green/blue properties".into()))
}

// PLY

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
}

struct PlyHeader {
    format: PlyFormat,
    elements: Vec<Element>,
    /// Byte offset of the body.
    body: usize,
    /// Number of header lines.
    lines: usize,
}

fn parse_ply_header(bytes: &[u8]) -> Result<PlyHeader, IoError> {
    let header_err = |line: usize, message: &str| IoError::MalformedHeader {
        location: Location::Line(line),
        message: message.to_string(),
    };
    let mut offset = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let Some(end) = rest.iter().position(|&b| b == b'\n') else {
            return Err(header_err(line_no + 1, "missing end_header"));
        };
        line_no += 1;
        offset += end + 1;
        let line = String::from_utf8_lossy(&rest[..end]);
        let mut words = line.split_whitespace();
        let Some(keyword) = words.next() else { continue };
        let words: Vec<&str> = words.collect();
        match (line_no, keyword) {
            (1, "ply") => {}
            (1, _) => return Err(header_err(1, "not a PLY file")),
            (_, "format") => {
                format = Some(match words.first().copied() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLe,
                    Some("binary_big_endian") => {
                        return Err(IoError::UnsupportedFormat("big-endian binary PLY is not supported".into()))
                    }
                    _ => return Err(header_err(line_no, "unknown format")),
                });
            }
            (_, "comment" | "obj_info") => {}
            (_, "element") => {
                let [name, count] = words[..] else {
                    return Err(header_err(line_no, "expected 'element <name> <count>'"));
                };
                let count = count
                    .parse()
                    .map_err(|_| header_err(line_no, "element count is not a number"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            (_, "property") => {
                let Some(element) = elements.last_mut() else {
                    return Err(header_err(line_no, "property before any element"));
                };
                let bad_type = || header_err(line_no, "unknown property type");
                let prop = match words[..] {
                    ["list", count, item, name] => {
                        let count = Scalar::parse(count).ok_or_else(bad_type)?;
                        let item = Scalar::parse(item).ok_or_else(bad_type)?;
                        if !count.is_integer() {
                            return Err(header_err(line_no, "list count must be an integer type"));
                        }
                        Property {
                            name: name.to_string(),
                            kind: PropKind::List { count, item },
                        }
                    }
                    [ty, name] => Property {
                        name: name.to_string(),
                        kind: PropKind::Scalar(Scalar::parse(ty).ok_or_else(bad_type)?),
                    },
                    _ => return Err(header_err(line_no, "malformed property line")),
                };
                element.props.push(prop);
            }
            (_, "end_header") => break,
            _ => return Err(header_err(line_no, &format!("unexpected keyword '{keyword}'"))),
        }
    }
    let format = format.ok_or_else(|| header_err(line_no, "missing format line"))?;
    Ok(PlyHeader {
        format,
        elements,
        body: offset,
        lines: line_no,
    })
}

/// One decoded element record: scalar values and list values by property.
enum Value {
    Scalar(f64),
    List(Vec<f64>),
}

/// Yields element records from either body encoding.
struct BodyReader<'a> {
    format: PlyFormat,
    bytes: &'a [u8],
    offset: usize,
    line: usize,
}

impl<'a> BodyReader<'a> {
    fn location(&self) -> Location {
        match self.format {
            PlyFormat::Ascii => Location::Line(self.line),
            PlyFormat::BinaryLe => Location::Byte(self.offset),
        }
    }

    /// Next record and where it starts.
    fn record(&mut self, element: &Element) -> Result<(Location, Vec<Value>), IoError> {
        match self.format {
            PlyFormat::BinaryLe => {
                let location = self.location();
                Ok((location, self.binary_record(element)?))
            }
            PlyFormat::Ascii => {
                let rec = self.ascii_record(element)?;
                Ok((self.location(), rec))
            }
        }
    }

    fn take(&mut self, ty: Scalar) -> Result<f64, IoError> {
        let size = ty.size();
        if self.offset + size > self.bytes.len() {
            return Err(parse_err(self.location(), "unexpected end of binary data"));
        }
        let v = ty.read_le(&self.bytes[self.offset..]);
        self.offset += size;
        Ok(v)
    }

    fn binary_record(&mut self, element: &Element) -> Result<Vec<Value>, IoError> {
        let mut out = Vec::with_capacity(element.props.len());
        for prop in &element.props {
            out.push(match prop.kind {
                PropKind::Scalar(ty) => Value::Scalar(self.take(ty)?),
                PropKind::List { count, item } => {
                    let n = self.take(count)?;
                    if n < 0.0 {
                        return Err(parse_err(self.location(), "negative list length"));
                    }
                    Value::List((0..n as usize).map(|_| self.take(item)).collect::<Result<_, _>>()?)
                }
            });
        }
        Ok(out)
    }

    fn ascii_record(&mut self, element: &Element) -> Result<Vec<Value>, IoError> {
        // Skip blank lines; each record occupies one line.
        let line = loop {
            if self.offset >= self.bytes.len() {
                return Err(parse_err(Location::Line(self.line + 1), "unexpected end of file"));
            }
            let rest = &self.bytes[self.offset..];
            let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
            self.offset += (end + 1).min(rest.len());
            self.line += 1;
            let line = String::from_utf8_lossy(&rest[..end]).into_owned();
            if !line.trim().is_empty() {
                break line;
            }
        };
        let location = Location::Line(self.line);
        let mut tokens = line.split_whitespace();
        let mut next = |what: &str| -> Result<f64, IoError> {
            let tok = tokens
                .next()
                .ok_or_else(|| parse_err(location, format!("missing value for {what}")))?;
            tok.parse::<f64>()
                .map_err(|_| parse_err(location, format!("'{tok}' is not a number")))
        };
        let mut out = Vec::with_capacity(element.props.len());
        for prop in &element.props {
            out.push(match prop.kind {
                PropKind::Scalar(_) => Value::Scalar(next(&prop.name)?),
                PropKind::List { .. } => {
                    let n = next(&prop.name)?;
                    if n < 0.0 || n.fract() != 0.0 {
                        return Err(parse_err(location, "invalid list length"));
                    }
                    Value::List((0..n as usize).map(|_| next(&prop.name)).collect::<Result<_, _>>()?)
                }
            });
        }
        Ok(out)
    }
}

/// Builds triangles from a polygon by fanning around its first corner.
fn fan(poly: &[usize], faces: &mut Vec<[usize; 3]>) {
    for k in 1..poly.len() - 1 {
        faces.push([poly[0], poly[k], poly[k + 1]]);
    }
}

pub fn parse_ply(bytes: &[u8]) -> Result<MeshData, IoError> {
    let header = parse_ply_header(bytes)?;
    let mut reader = BodyReader {
        format: header.format,
        bytes,
        offset: header.body,
        line: header.lines,
    };
    let mut data = MeshData::default();
    let mut vertex_count = None;
    for element in &header.elements {
        match element.name.as_str() {
            "vertex" => {
                let find = |name: &str| element.props.iter().position(|p| p.name == name);
                let (Some(ix), Some(iy), Some(iz)) = (find("x"), find("y"), find("z")) else {
                    return Err(IoError::MalformedHeader {
                        location: Location::Line(header.lines),
                        message: "vertex element needs x, y and z".into(),
                    });
                };
                let color = match (find("red"), find("green"), find("blue")) {
                    (Some(r), Some(g), Some(b)) => Some([r, g, b]),
                    _ => None,
                };
                let mut colors = Vec::new();
                for _ in 0..element.count {
                    let (location, rec) = reader.record(element)?;
                    let get = |i: usize| match rec[i] {
                        Value::Scalar(v) => Ok(v),
                        Value::List(_) => Err(parse_err(location, "vertex coordinate is a list")),
                    };
                    let p = Vec3::new(get(ix)?, get(iy)?, get(iz)?);
                    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                        return Err(IoError::NonFinite { location });
                    }
                    data.positions.push(p);
                    if let Some(c) = color {
                        colors.push([get(c[0])? as u8, get(c[1])? as u8, get(c[2])? as u8]);
                    }
                }
                if color.is_some() {
                    data.colors = Some(colors);
                }
                vertex_count = Some(element.count);
            }
            "face" => {
                let Some(list) = element
                    .props
                    .iter()
                    .position(|p| matches!(p.kind, PropKind::List { .. }) && (p.name == "vertex_indices" || p.name == "vertex_index"))
                else {
                    return Err(IoError::MalformedHeader {
                        location: Location::Line(header.lines),
                        message: "face element needs a vertex_indices list".into(),
                    });
                };
                let n = vertex_count.ok_or_else(|| IoError::MalformedHeader {
                    location: Location::Line(header.lines),
                    message: "face element before vertex element".into(),
                })?;
                for _ in 0..element.count {
                    let (location, rec) = reader.record(element)?;
                    let Value::List(ref idx) = rec[list] else { unreachable!() };
                    if idx.len() < 3 {
                        return Err(parse_err(location, "face with fewer than 3 vertices"));
                    }
                    let poly = idx
                        .iter()
                        .map(|&i| {
                            if i >= 0.0 && (i as usize) < n {
                                Ok(i as usize)
                            } else {
                                Err(IoError::IndexOutOfRange {
                                    location,
                                    index: i as i64,
                                    vertex_count: n,
                                })
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    fan(&poly, &mut data.faces);
                }
            }
            _ => {
                for _ in 0..element.count {
                    reader.record(element)?;
                }
            }
        }
    }
    Ok(data)
}

// OBJ

pub fn parse_obj(text: &str) -> Result<MeshData, IoError> {
    let mut data = MeshData::default();
    for (i, line) in text.lines().enumerate() {
        let location = Location::Line(i + 1);
        let mut words = line.split_whitespace();
        match words.next() {
            Some("v") => {
                let coords = words
                    .take(3)
                    .map(|w| w.parse::<f64>().map_err(|_| parse_err(location, format!("'{w}' is not a number"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if coords.len() != 3 {
                    return Err(parse_err(location, "vertex needs 3 coordinates"));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(IoError::NonFinite { location });
                }
                data.positions.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let n = data.positions.len();
                let poly = words
                    .map(|w| {
                        let head = w.split('/').next().unwrap_or("");
                        let raw: i64 = head
                            .parse()
                            .map_err(|_| parse_err(location, format!("'{w}' is not a vertex reference")))?;
                        let index = if raw < 0 { n as i64 + raw } else { raw - 1 };
                        if raw == 0 || index < 0 || index >= n as i64 {
                            return Err(IoError::IndexOutOfRange {
                                location,
                                index: raw,
                                vertex_count: n,
                            });
                        }
                        Ok(index as usize)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if poly.len() < 3 {
                    return Err(parse_err(location, "face with fewer than 3 vertices"));
                }
                fan(&poly, &mut data.faces);
            }
            _ => {}
        }
    }
    Ok(data)
}

// Writers

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    #[default]
    Ascii,
    BinaryLittleEndian,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, IoError> {
    Ok(BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

fn write_ply<W: Write>(
    out: &mut W,
    mesh: &TriMesh,
    colors: Option<&[[u8; 3]]>,
    encoding: PlyEncoding,
) -> std::io::Result<()> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(out, "ply\nformat {format} 1.0")?;
    writeln!(out, "element vertex {}", mesh.vertex_count())?;
    writeln!(out, "property double x\nproperty double y\nproperty double z")?;
    if colors.is_some() {
        writeln!(out, "property uchar red\nproperty uchar green\nproperty uchar blue")?;
    }
    writeln!(out, "element face {}", mesh.triangle_count())?;
    writeln!(out, "property list uchar int vertex_indices\nend_header")?;
    for (i, v) in mesh.vertices().iter().enumerate() {
        match encoding {
            PlyEncoding::Ascii => {
                write!(out, "{} {} {}", v.x, v.y, v.z)?;
                if let Some(c) = colors {
                    write!(out, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
                }
                writeln!(out)?;
            }
            PlyEncoding::BinaryLittleEndian => {
                for c in [v.x, v.y, v.z] {
                    out.write_all(&c.to_le_bytes())?;
                }
                if let Some(c) = colors {
                    out.write_all(&c[i])?;
                }
            }
        }
    }
    for t in mesh.triangles() {
        match encoding {
            PlyEncoding::Ascii => writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?,
            PlyEncoding::BinaryLittleEndian => {
                out.write_all(&[3])?;
                for &i in t {
                    out.write_all(&(i as i32).to_le_bytes())?;
                }
            }
        }
    }
    out.flush()
}

pub fn write_mesh_ply(mesh: &TriMesh, path: &Path, encoding: PlyEncoding) -> Result<(), IoError> {
    let mut out = create(path)?;
    write_ply(&mut out, mesh, None, encoding).map_err(io_err(path))
}

pub fn write_mesh_obj(mesh: &TriMesh, path: &Path) -> Result<(), IoError> {
    let mut out = create(path)?;
    let mut body = || -> std::io::Result<()> {
        for v in mesh.vertices() {
            writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in mesh.triangles() {
            writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        out.flush()
    };
    body().map_err(io_err(path))
}

/// Maps normalised values in `[0, 1]` to 8-bit RGB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorMap {
    /// Fully saturated hue sweep from red (0) through green to blue (1).
    #[default]
    RedToBlue,
    Grayscale,
}

impl ColorMap {
    pub fn name(self) -> &'static str {
        match self {
            ColorMap::RedToBlue => "red-to-blue",
            ColorMap::Grayscale => "grayscale",
        }
    }

    pub fn map(self, t: f64) -> [u8; 3] {
        let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
        let byte = |x: f64| (255.0 * x).round() as u8;
        match self {
            ColorMap::Grayscale => [byte(t); 3],
            ColorMap::RedToBlue => {
                // HSV with s = v = 1 and hue 0..240 degrees.
                let h = 4.0 * t;
                let x = 1.0 - (h % 2.0 - 1.0).abs();
                let (r, g, b) = match h as u32 {
                    0 => (1.0, x, 0.0),
                    1 => (x, 1.0, 0.0),
                    2 => (0.0, 1.0, x),
                    _ => (0.0, x, 1.0),
                };
                [byte(r), byte(g), byte(b)]
            }
        }
    }
}

/// Writes an ASCII PLY whose vertex colours show the power-normalised field.
/// Returns the number of negative values clamped to zero.
pub fn write_field_ply(
    mesh: &TriMesh,
    field: &ScalarField,
    cmap: ColorMap,
    power: f64,
    path: &Path,
) -> Result<usize, IoError> {
    if field.len() != mesh.vertex_count() {
        return Err(IoError::FieldMismatch {
            field: field.len(),
            mesh: mesh.vertex_count(),
        });
    }
    let (normalized, clamped) = power_normalize(field, power)?;
    let colors: Vec<[u8; 3]> = normalized.values.iter().map(|&v| cmap.map(v)).collect();
    write_colored_ply(mesh, &colors, path)?;
    Ok(clamped)
}

/// Writes an ASCII PLY with the given per-vertex colours.
pub fn write_colored_ply(mesh: &TriMesh, colors: &[[u8; 3]], path: &Path) -> Result<(), IoError> {
    if colors.len() != mesh.vertex_count() {
        return Err(IoError::FieldMismatch {
            field: colors.len(),
            mesh: mesh.vertex_count(),
        });
    }
    let mut out = create(path)?;
    write_ply(&mut out, mesh, Some(colors), PlyEncoding::Ascii).map_err(io_err(path))
}

pub const FIELD_CSV_HEADER: &str = "vertex_index,value,flags";

pub fn write_field_csv(field: &ScalarField, path: &Path) -> Result<(), IoError> {
    let mut out = create(path)?;
    let mut body = || -> std::io::Result<()> {
        writeln!(out, "{FIELD_CSV_HEADER}")?;
        for (i, (v, f)) in field.values.iter().zip(&field.flags).enumerate() {
            writeln!(out, "{i},{v:.16e},{}", f.to_text())?;
        }
        out.flush()
    };
    body().map_err(io_err(path))
}

/// Reads a field CSV. Radius and quantity are not stored in the file and are
/// supplied by the caller.
pub fn read_field_csv(path: &Path, radius: f64, quantity: Quantity) -> Result<ScalarField, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == FIELD_CSV_HEADER => {}
        _ => {
            return Err(IoError::MalformedHeader {
                location: Location::Line(1),
                message: format!("expected '{FIELD_CSV_HEADER}'"),
            })
        }
    }
    let mut values = Vec::new();
    let mut flags = Vec::new();
    for (i, line) in lines {
        let location = Location::Line(i + 1);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.splitn(3, ',').collect();
        if cols.len() < 2 {
            return Err(parse_err(location, "expected vertex_index,value,flags"));
        }
        let index: usize = cols[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(location, "bad vertex index"))?;
        if index != values.len() {
            return Err(parse_err(location, format!("expected vertex index {}", values.len())));
        }
        values.push(
            cols[1]
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(location, format!("'{}' is not a number", cols[1])))?,
        );
        flags.push(VertexFlags::from_text(cols.get(2).copied().unwrap_or(""))?);
    }
    Ok(ScalarField {
        radius,
        quantity,
        values,
        flags,
    })
}

/// Parses `x,y` rows; `#` starts a comment and an optional `x,y` header line
/// is skipped.
pub fn parse_curve_csv(text: &str) -> Result<PlanarCurve, IoError> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let location = Location::Line(i + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (points.is_empty() && line.eq_ignore_ascii_case("x,y")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let [x, y] = cols[..] else {
            return Err(parse_err(location, "expected two columns x,y"));
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| parse_err(location, format!("'{s}' is not a number")))
        };
        let p = Vec2::new(num(x)?, num(y)?);
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(IoError::NonFinite { location });
        }
        points.push(p);
    }
    Ok(PlanarCurve::new(points)?)
}

pub fn read_curve_csv(path: &Path) -> Result<PlanarCurve, IoError> {
    parse_curve_csv(&fs::read_to_string(path).map_err(io_err(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use std::collections::HashSet;

    const TETRA_PLY: &str = "ply
format ascii 1.0
comment unit tetrahedron
element vertex 4
property float x
property float y
property float z
element face 4
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
0 1 0
0 0 1
3 0 2 1
3 0 1 3
3 0 3 2
3 1 2 3
";

    fn edge_count(mesh: &TriMesh) -> usize {
        let mut edges = HashSet::new();
        for t in mesh.triangles() {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    #[test]
    fn ascii_tetrahedron() {
        let mesh = parse_ply(TETRA_PLY.as_bytes()).unwrap().into_mesh().unwrap();
        assert_eq!(mesh.vertex_count(), 4);
        assert_eq!(edge_count(&mesh), 6);
        assert!(mesh.report().is_closed_manifold());
    }

    #[test]
    fn obj_quad_fan_and_negative_indices() {
        let data = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\nf -4 -3 -1\n").unwrap();
        assert_eq!(data.faces, vec![[0, 1, 2], [0, 2, 3], [0, 1, 3]]);
        let data = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1/1/1 2//2 3\n").unwrap();
        assert_eq!(data.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn error_locations() {
        match parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2 7\n") {
            Err(IoError::IndexOutOfRange { location, index, .. }) => {
                assert_eq!(location, Location::Line(4));
                assert_eq!(index, 7);
            }
            other => panic!("{other:?}"),
        }
        let bad = TETRA_PLY.replace("3 1 2 3", "3 1 2 9");
        match parse_ply(bad.as_bytes()) {
            Err(IoError::IndexOutOfRange { location, .. }) => assert_eq!(location, Location::Line(18)),
            other => panic!("{other:?}"),
        }
        let nan = TETRA_PLY.replace("0 0 1\n", "0 nan 1\n");
        assert!(matches!(parse_ply(nan.as_bytes()), Err(IoError::NonFinite { location: Location::Line(14) })));
        let be = TETRA_PLY.replace("format ascii", "format binary_big_endian");
        assert!(matches!(parse_ply(be.as_bytes()), Err(IoError::UnsupportedFormat(_))));
        assert!(matches!(parse_ply(b"ply\nformat ascii 1.0\n"), Err(IoError::MalformedHeader { .. })));
        assert!(matches!(parse_obj("v 0 inf 0\n"), Err(IoError::NonFinite { .. })));
    }

    #[test]
    fn unknown_elements_and_properties_are_skipped() {
        let text = "ply
format ascii 1.0
element vertex 3
property float x
property float nx
property float y
property float z
element edge 1
property int a
property int b
element face 1
property uchar flags
property list uint8 int32 vertex_indices
end_header
0 9 0 0
1 9 0 0
0 9 1 0
0 1
7 3 0 1 2
";
        let data = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(data.positions[2], Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(data.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn binary_and_ascii_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::icosphere(1.0, 2).unwrap();
        let ascii = dir.path().join("a.ply");
        let binary = dir.path().join("b.ply");
        let obj = dir.path().join("c.obj");
        write_mesh_ply(&mesh, &ascii, PlyEncoding::Ascii).unwrap();
        write_mesh_ply(&mesh, &binary, PlyEncoding::BinaryLittleEndian).unwrap();
        write_mesh_obj(&mesh, &obj).unwrap();
        for path in [&ascii, &binary, &obj] {
            let back = read_mesh(path).unwrap();
            assert_eq!(back.vertices(), mesh.vertices());
            assert_eq!(back.triangles(), mesh.triangles());
            for t in 0..mesh.triangle_count() {
                assert_eq!(back.neighbors(t), mesh.neighbors(t));
            }
        }
    }

    #[test]
    fn binary_float32_body() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n".to_vec();
        for v in [[0f32, 0., 0.], [1., 0., 0.], [0., 1., 0.]] {
            for c in v {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
        }
        bytes.push(3);
        for i in [0u32, 1, 2] {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        let data = parse_ply(&bytes).unwrap();
        assert_eq!(data.faces, vec![[0, 1, 2]]);
        bytes.pop();
        assert!(matches!(parse_ply(&bytes), Err(IoError::Parse { location: Location::Byte(_), .. })));
    }

    #[test]
    fn color_map_endpoints() {
        assert_eq!(ColorMap::RedToBlue.map(0.0), [255, 0, 0]);
        assert_eq!(ColorMap::RedToBlue.map(0.5), [0, 255, 0]);
        assert_eq!(ColorMap::RedToBlue.map(1.0), [0, 0, 255]);
        assert_eq!(ColorMap::Grayscale.map(1.0), [255, 255, 255]);
    }

    #[test]
    fn field_ply_colors() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::icosphere(1.0, 2).unwrap();
        let z: Vec<f64> = mesh.vertices().iter().map(|v| v.z).collect();
        let field = ScalarField::new(1.0, Quantity::Svi, z.clone());
        let path = dir.path().join("z.ply");
        write_field_ply(&mesh, &field, ColorMap::RedToBlue, 1.0, &path).unwrap();
        let colors = read_ply_colors(&path).unwrap();
        let argmin = z.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let argmax = z.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(colors[argmin], [255, 0, 0]);
        assert_eq!(colors[argmax], [0, 0, 255]);
        assert_eq!(read_mesh(&path).unwrap().vertices(), mesh.vertices());

        let first = fs::read(&path).unwrap();
        write_field_ply(&mesh, &field, ColorMap::RedToBlue, 1.0, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);

        let constant = ScalarField::new(1.0, Quantity::Svi, vec![0.3; mesh.vertex_count()]);
        write_field_ply(&mesh, &constant, ColorMap::RedToBlue, 0.5, &path).unwrap();
        assert!(read_ply_colors(&path).unwrap().iter().all(|c| *c == [255, 0, 0]));

        let short = ScalarField::new(1.0, Quantity::Svi, vec![0.0; 3]);
        assert!(matches!(
            write_field_ply(&mesh, &short, ColorMap::RedToBlue, 1.0, &path),
            Err(IoError::FieldMismatch { .. })
        ));
    }

    #[test]
    fn field_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let mut field = ScalarField::new(0.5, Quantity::Svi, vec![1.0, 2.0, 3.0]);
        write_field_csv(&field, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 4);

        field.values = vec![0.1 + 0.2, -1e-300, f64::NAN, std::f64::consts::PI];
        field.flags = vec![VertexFlags::default(); 4];
        field.flags[1].bizarre = true;
        field.flags[2].failed = true;
        write_field_csv(&field, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(2).unwrap().ends_with(",bizarre"));
        let back = read_field_csv(&path, 0.5, Quantity::Svi).unwrap();
        assert_eq!(back.flags, field.flags);
        for (a, b) in back.values.iter().zip(&field.values) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn curve_csv() {
        let curve = parse_curve_csv("# square\nx,y\n0,0\n1,0\n1,1 # corner\n\n0,1\n").unwrap();
        assert_eq!(curve.len(), 4);
        assert!(matches!(parse_curve_csv("0,0\n1\n"), Err(IoError::Parse { location: Location::Line(2), .. })));
        assert!(matches!(parse_curve_csv("0,0\n1,0\n"), Err(IoError::Curve(CurveError::TooFewPoints(2)))));
    }
}
