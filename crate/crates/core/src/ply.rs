//! PLY 1.0 reading and writing for vertex clouds.
//!
//! Reading accepts `ascii 1.0` and `binary_little_endian 1.0`, any scalar
//! type for `x y z` and the optional `nx ny nz`, and skips every other
//! property and element. Writing always emits `double` properties.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

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
    fn parse(name: &str) -> Option<Self> {
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

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut offset = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line_no += 1;
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(parse_err(line_no, "header ended before end_header"));
        };
        let raw = &rest[..nl];
        offset += nl + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_err(line_no, "header line is not valid UTF-8"))?
            .trim_end_matches('\r');
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap_or("");
        if line_no == 1 {
            if line.trim() != "ply" {
                return Err(parse_err(1, "missing 'ply' magic"));
            }
            continue;
        }
        match keyword {
            "format" => {
                let kind = tokens.next().unwrap_or("");
                let version = tokens.next().unwrap_or("");
                if version != "1.0" {
                    return Err(parse_err(line_no, format!("unsupported version '{version}'")));
                }
                format = Some(match kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(parse_err(line_no, format!("unsupported format '{other}'")))
                    }
                });
            }
            "comment" | "obj_info" | "" => {}
            "element" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "element without a name"))?;
                let count = tokens
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(line_no, "element count is not a non-negative integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before any element"))?;
                let first = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "property without a type"))?;
                let prop = if first == "list" {
                    let count = tokens.next().and_then(Scalar::parse);
                    let item = tokens.next().and_then(Scalar::parse);
                    let name = tokens.next();
                    match (count, item, name) {
                        (Some(count), Some(item), Some(_)) => Property::List { count, item },
                        _ => return Err(parse_err(line_no, "malformed list property")),
                    }
                } else {
                    let ty = Scalar::parse(first)
                        .ok_or_else(|| parse_err(line_no, format!("unknown property type '{first}'")))?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| parse_err(line_no, "property without a name"))?;
                    Property::Scalar {
                        name: name.to_string(),
                        ty,
                    }
                };
                element.properties.push(prop);
            }
            "end_header" => {
                let format = format.ok_or_else(|| parse_err(line_no, "no format line before end_header"))?;
                let header = Header {
                    format,
                    elements,
                    body_offset: offset,
                };
                check_vertex(&header, line_no)?;
                return Ok(header);
            }
            other => return Err(parse_err(line_no, format!("unexpected keyword '{other}'"))),
        }
    }
}

fn check_vertex(header: &Header, line: usize) -> Result<()> {
    let vertex = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(line, "no vertex element declared"))?;
    for axis in ["x", "y", "z"] {
        if scalar_slot(vertex, axis).is_none() {
            return Err(parse_err(line, format!("vertex element lacks scalar property '{axis}'")));
        }
    }
    Ok(())
}

fn scalar_slot(element: &Element, name: &str) -> Option<usize> {
    element
        .properties
        .iter()
        .position(|p| matches!(p, Property::Scalar { name: n, .. } if n == name))
}

/// Reads the vertices of a PLY file. Normals are populated iff the vertex
/// element declares `nx`, `ny` and `nz`; they are renormalised to unit length.
pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes)
}

pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.body_offset..];
    let mut reader = BodyReader::new(header.format, body);
    let mut sink = VertexSink::default();
    let mut values: Vec<f64> = Vec::new();
    for element in &header.elements {
        let is_vertex = element.name == "vertex";
        for index in 0..element.count {
            values.clear();
            for prop in &element.properties {
                match *prop {
                    Property::Scalar { ty, .. } => values.push(reader.scalar(ty, index)?),
                    Property::List { count, item } => {
                        let n = reader.scalar(count, index)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(Error::Data {
                                index,
                                message: format!("invalid list length {n}"),
                            });
                        }
                        for _ in 0..n as usize {
                            reader.scalar(item, index)?;
                        }
                        values.push(f64::NAN);
                    }
                }
            }
            if is_vertex {
                sink.push(element, index, &values)?;
            }
        }
        if is_vertex {
            break;
        }
    }
    Ok(sink.finish())
}

/// Collects vertices and their optional normals.
#[derive(Default)]
struct VertexSink {
    points: Vec<Point>,
    normals: Vec<Vec3>,
    has_normals: Option<bool>,
}

impl VertexSink {
    fn push(&mut self, element: &Element, index: usize, values: &[f64]) -> Result<()> {
        let get = |name: &str| scalar_slot(element, name).map(|i| values[i]);
        let p = Point::new(
            get("x").expect("checked"),
            get("y").expect("checked"),
            get("z").expect("checked"),
        );
        if !crate::geometry::is_finite(&p) {
            return Err(Error::Data {
                index,
                message: "non-finite coordinate".into(),
            });
        }
        self.points.push(p);
        let has = *self
            .has_normals
            .get_or_insert_with(|| ["nx", "ny", "nz"].iter().all(|n| scalar_slot(element, n).is_some()));
        if has {
            let n = Vec3::new(
                get("nx").expect("checked"),
                get("ny").expect("checked"),
                get("nz").expect("checked"),
            );
            let len = n.norm();
            if !len.is_finite() || len == 0.0 {
                return Err(Error::Data {
                    index,
                    message: "normal is zero or non-finite".into(),
                });
            }
            self.normals.push(n / len);
        }
        Ok(())
    }

    fn finish(self) -> PointCloud {
        let normals = match self.has_normals {
            Some(true) => Some(self.normals),
            _ => None,
        };
        PointCloud {
            points: self.points,
            normals,
        }
    }
}

enum BodyReader<'a> {
    Ascii {
        tokens: std::str::SplitAsciiWhitespace<'a>,
        utf8_error: bool,
    },
    Binary {
        data: &'a [u8],
        pos: usize,
    },
}

impl<'a> BodyReader<'a> {
    fn new(format: PlyFormat, body: &'a [u8]) -> Self {
        match format {
            PlyFormat::Ascii => {
                let (text, utf8_error) = match std::str::from_utf8(body) {
                    Ok(t) => (t, false),
                    Err(e) => (
                        std::str::from_utf8(&body[..e.valid_up_to()]).expect("valid prefix"),
                        true,
                    ),
                };
                BodyReader::Ascii {
                    tokens: text.split_ascii_whitespace(),
                    utf8_error,
                }
            }
            PlyFormat::BinaryLittleEndian => BodyReader::Binary { data: body, pos: 0 },
        }
    }

    fn scalar(&mut self, ty: Scalar, index: usize) -> Result<f64> {
        match self {
            BodyReader::Ascii { tokens, utf8_error } => {
                let tok = tokens.next().ok_or_else(|| Error::Data {
                    index,
                    message: if *utf8_error {
                        "invalid UTF-8 in ASCII body".into()
                    } else {
                        "unexpected end of data".into()
                    },
                })?;
                tok.parse::<f64>().map_err(|_| Error::Data {
                    index,
                    message: format!("cannot parse '{tok}' as a number"),
                })
            }
            BodyReader::Binary { data, pos } => {
                let size = ty.size();
                if *pos + size > data.len() {
                    return Err(Error::Data {
                        index,
                        message: "unexpected end of data".into(),
                    });
                }
                let v = ty.read_le(&data[*pos..*pos + size]);
                *pos += size;
                Ok(v)
            }
        }
    }
}

/// Writes `cloud` with `double` coordinates (and normals when present).
/// ASCII mode prints nine significant digits.
pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>, format: PlyFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_ply(cloud, format)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_ply(cloud: &PointCloud, format: PlyFormat) -> Result<Vec<u8>> {
    cloud.validate()?;
    let mut out = Vec::with_capacity(64 + cloud.len() * 48);
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut header = format!(
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        cloud.len()
    );
    if cloud.normals.is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    header.push_str("end_header\n");
    out.extend_from_slice(header.as_bytes());
    for (i, p) in cloud.points.iter().enumerate() {
        let mut row = vec![p.x, p.y, p.z];
        if let Some(n) = &cloud.normals {
            row.extend_from_slice(&[n[i].x, n[i].y, n[i].z]);
        }
        match format {
            PlyFormat::Ascii => {
                let line: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
            PlyFormat::BinaryLittleEndian => {
                for v in row {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_ascii_vertex() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n";
        let cloud = parse_ply(text).unwrap();
        assert_eq!(cloud.points, vec![Point::origin()]);
        assert!(cloud.normals.is_none());
    }

    #[test]
    fn normals_and_extra_properties() {
        let text = b"ply\r\nformat ascii 1.0\r\ncomment hi\r\nelement vertex 2\r\nproperty float x\r\nproperty float y\r\nproperty float z\r\nproperty uchar red\r\nproperty float nx\r\nproperty float ny\r\nproperty float nz\r\nelement face 1\r\nproperty list uchar int vertex_indices\r\nend_header\r\n1 2 3 255 0 0 2\r\n4 5 6 0 1 0 0\r\n3 0 1 1\r\n";
        let cloud = parse_ply(text).unwrap();
        assert_eq!(cloud.len(), 2);
        let normals = cloud.normals.unwrap();
        assert_eq!(normals.len(), 2);
        assert_eq!(normals[0], Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn elements_before_vertex_are_skipped() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement camera 1\nproperty list uchar float k\nelement vertex 1\nproperty double x\nproperty double y\nproperty float z\nend_header\n".to_vec();
        bytes.push(2);
        bytes.extend_from_slice(&1f32.to_le_bytes());
        bytes.extend_from_slice(&2f32.to_le_bytes());
        bytes.extend_from_slice(&1.5f64.to_le_bytes());
        bytes.extend_from_slice(&(-2.0f64).to_le_bytes());
        bytes.extend_from_slice(&0.25f32.to_le_bytes());
        let cloud = parse_ply(&bytes).unwrap();
        assert_eq!(cloud.points, vec![Point::new(1.5, -2.0, 0.25)]);
    }

    #[test]
    fn malformed_header_names_line() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty flot x\nend_header\n";
        match parse_ply(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n";
        assert!(matches!(parse_ply(text), Err(Error::Parse { line: 6, .. })));
        let text = b"ply\nformat binary_big_endian 1.0\nend_header\n";
        assert!(matches!(parse_ply(text), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn non_finite_coordinate_names_element() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 1 1\n0 nan 0\n";
        assert!(matches!(parse_ply(text), Err(Error::Data { index: 2, .. })));
    }

    #[test]
    fn truncated_binary_body() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        for v in [0f32, 1.0, 2.0, 3.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(parse_ply(&bytes), Err(Error::Data { index: 1, .. })));
    }

    #[test]
    fn empty_cloud_writes_valid_file() {
        for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let bytes = encode_ply(&PointCloud::default(), format).unwrap();
            let text = String::from_utf8_lossy(&bytes);
            assert!(text.contains("element vertex 0"));
            assert_eq!(parse_ply(&bytes).unwrap().len(), 0);
        }
    }
}
