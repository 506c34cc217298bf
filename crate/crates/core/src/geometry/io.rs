//! XYZ / PLY / OBJ readers and byte-stable OBJ / PLY writers.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use super::{GeometryError, TriangleMesh};

/// Contents of a geometry file: faces when present, bare points otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshOrCloud {
    Mesh(TriangleMesh),
    Cloud(Vec<Vector3<f64>>),
}

impl MeshOrCloud {
    pub fn points(&self) -> &[Vector3<f64>] {
        match self {
            MeshOrCloud::Mesh(m) => &m.vertices,
            MeshOrCloud::Cloud(p) => p,
        }
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn format_err(path: &Path, message: impl Into<String>) -> GeometryError {
    GeometryError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a point cloud; meshes contribute their vertices.
pub fn read_points(path: &Path) -> Result<Vec<Vector3<f64>>, GeometryError> {
    Ok(match read_mesh(path)? {
        MeshOrCloud::Mesh(m) => m.vertices,
        MeshOrCloud::Cloud(p) => p,
    })
}

/// Reads `.xyz`/`.txt`/`.pts`, `.ply` or `.obj`.
pub fn read_mesh(path: &Path) -> Result<MeshOrCloud, GeometryError> {
    let bytes = fs::read(path)?;
    match extension(path).as_str() {
        "ply" => read_ply(path, &bytes),
        "obj" => read_obj(path, &bytes),
        "xyz" | "txt" | "pts" => read_xyz(path, &bytes).map(MeshOrCloud::Cloud),
        other => Err(format_err(path, format!("unsupported extension '{other}'"))),
    }
}

fn text(path: &Path, bytes: &[u8]) -> Result<String, GeometryError> {
    String::from_utf8(bytes.to_vec()).map_err(|_| format_err(path, "not valid UTF-8"))
}

fn parse_f64(path: &Path, line: usize, tok: &str) -> Result<f64, GeometryError> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("bad number '{tok}'")))
}

/// Whitespace-separated rows; the first three columns are the position and
/// extra columns (normals, colors) are ignored.
fn read_xyz(path: &Path, bytes: &[u8]) -> Result<Vec<Vector3<f64>>, GeometryError> {
    let mut out = Vec::new();
    for (n, line) in text(path, bytes)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(parse_err(path, n + 1, "expected at least 3 columns"));
        }
        out.push(Vector3::new(
            parse_f64(path, n + 1, toks[0])?,
            parse_f64(path, n + 1, toks[1])?,
            parse_f64(path, n + 1, toks[2])?,
        ));
    }
    Ok(out)
}

/// `v` and `f` records; polygons are fan-triangulated, negative indices
/// count from the end.
fn read_obj(path: &Path, bytes: &[u8]) -> Result<MeshOrCloud, GeometryError> {
    let mut mesh = TriangleMesh::default();
    for (n, line) in text(path, bytes)?.lines().enumerate() {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(parse_err(path, n + 1, "vertex needs 3 coordinates"));
                }
                mesh.vertices.push(Vector3::new(
                    parse_f64(path, n + 1, c[0])?,
                    parse_f64(path, n + 1, c[1])?,
                    parse_f64(path, n + 1, c[2])?,
                ));
            }
            Some("f") => {
                let nv = mesh.vertices.len() as i64;
                let idx = toks
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head
                            .parse()
                            .map_err(|_| parse_err(path, n + 1, format!("bad index '{t}'")))?;
                        let i = if i < 0 { nv + i } else { i - 1 };
                        if i < 0 || i >= nv {
                            return Err(parse_err(path, n + 1, format!("index {t} out of range")));
                        }
                        Ok(i as u32)
                    })
                    .collect::<Result<Vec<u32>, _>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(path, n + 1, "face needs 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    mesh.faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(if mesh.faces.is_empty() {
        MeshOrCloud::Cloud(mesh.vertices)
    } else {
        MeshOrCloud::Mesh(mesh)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
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

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Reads one record as a flat list per property.
trait RecordSource {
    fn scalar(&mut self, t: Scalar) -> Result<f64, String>;
}

struct AsciiSource<'a> {
    toks: std::str::SplitAsciiWhitespace<'a>,
}

impl RecordSource for AsciiSource<'_> {
    fn scalar(&mut self, _t: Scalar) -> Result<f64, String> {
        let tok = self.toks.next().ok_or("unexpected end of data")?;
        tok.parse::<f64>()
            .map_err(|_| format!("bad number '{tok}'"))
    }
}

struct BinarySource<'a> {
    data: &'a [u8],
    pos: usize,
}

impl RecordSource for BinarySource<'_> {
    fn scalar(&mut self, t: Scalar) -> Result<f64, String> {
        let end = self.pos + t.size();
        if end > self.data.len() {
            return Err("unexpected end of data".into());
        }
        let v = t.read_le(&self.data[self.pos..end]);
        self.pos = end;
        Ok(v)
    }
}

fn read_ply(path: &Path, bytes: &[u8]) -> Result<MeshOrCloud, GeometryError> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| format_err(path, "missing end_header"))?;
    let mut body = end + END.len();
    while body < bytes.len() && bytes[body] != b'\n' {
        body += 1;
    }
    body += 1;
    let header =
        std::str::from_utf8(&bytes[..end]).map_err(|_| format_err(path, "header is not text"))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(format_err(path, "missing 'ply' magic"));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, _] => {
                return Err(format_err(path, format!("unsupported format '{other}'")))
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| format_err(path, format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let (Some(ct), Some(it)) = (Scalar::parse(ct), Scalar::parse(it)) else {
                    return Err(format_err(path, format!("bad list property '{line}'")));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| format_err(path, "property before element"))?
                    .props
                    .push(Property::List(name.to_string(), ct, it));
            }
            ["property", t, name] => {
                let t = Scalar::parse(t)
                    .ok_or_else(|| format_err(path, format!("bad type in '{line}'")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| format_err(path, "property before element"))?
                    .props
                    .push(Property::Scalar(name.to_string(), t));
            }
            _ => {}
        }
    }
    let binary = binary.ok_or_else(|| format_err(path, "missing format line"))?;
    let data = bytes.get(body..).unwrap_or(&[]);
    let ascii_text;
    let mut source: Box<dyn RecordSource> = if binary {
        Box::new(BinarySource { data, pos: 0 })
    } else {
        ascii_text = std::str::from_utf8(data).map_err(|_| format_err(path, "body is not text"))?;
        Box::new(AsciiSource {
            toks: ascii_text.split_ascii_whitespace(),
        })
    };
    let mut mesh = TriangleMesh::default();
    for el in &elements {
        let find = |n: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar(name, _) if name == n))
        };
        let xyz = [find("x"), find("y"), find("z")];
        for _ in 0..el.count {
            let mut scalars = vec![0.0; el.props.len()];
            let mut list = Vec::new();
            for (k, p) in el.props.iter().enumerate() {
                match p {
                    Property::Scalar(_, t) => {
                        scalars[k] = source.scalar(*t).map_err(|m| format_err(path, m))?
                    }
                    Property::List(name, ct, it) => {
                        let len = source.scalar(*ct).map_err(|m| format_err(path, m))? as usize;
                        let mut items = Vec::with_capacity(len);
                        for _ in 0..len {
                            items.push(source.scalar(*it).map_err(|m| format_err(path, m))?);
                        }
                        if name == "vertex_indices" || name == "vertex_index" {
                            list = items;
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    let [Some(x), Some(y), Some(z)] = xyz else {
                        return Err(format_err(path, "vertex element lacks x, y, z"));
                    };
                    mesh.vertices
                        .push(Vector3::new(scalars[x], scalars[y], scalars[z]));
                }
                "face" if list.len() >= 3 => {
                    let idx: Vec<u32> = list.iter().map(|&i| i as u32).collect();
                    for k in 1..idx.len() - 1 {
                        mesh.faces.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
    }
    let nv = mesh.vertices.len() as u32;
    if mesh.faces.iter().flatten().any(|&i| i >= nv) {
        return Err(format_err(path, "face index out of range"));
    }
    Ok(if mesh.faces.is_empty() {
        MeshOrCloud::Cloud(mesh.vertices)
    } else {
        MeshOrCloud::Mesh(mesh)
    })
}

/// Writes `v`/`f` records with shortest round-trip float formatting.
pub fn write_obj(mesh: &TriangleMesh, out: &mut impl Write) -> std::io::Result<()> {
    for v in &mesh.vertices {
        writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

/// Binary little-endian PLY with `double` coordinates and `int` indices.
pub fn write_ply(mesh: &TriangleMesh, out: &mut impl Write) -> std::io::Result<()> {
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.faces.len()
    )?;
    for v in &mesh.vertices {
        for c in v.iter() {
            out.write_all(&c.to_le_bytes())?;
        }
    }
    for f in &mesh.faces {
        out.write_all(&[3u8])?;
        for i in f {
            out.write_all(&(*i as i32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// One frame glyph: six segments from `center` along `±axes[k]·half_length`.
#[derive(Debug, Clone, PartialEq)]
pub struct Glyph {
    pub center: Vector3<f64>,
    pub axes: [Vector3<f64>; 3],
    pub half_length: f64,
    /// Set when the frame could not be recovered reliably; reported as a
    /// header comment.
    pub flag: Option<String>,
}

/// ASCII PLY of glyph segments as an `edge` element; glyph `g` owns
/// vertices `7g..7g+7` (center first) and edges `6g..6g+6`.
pub fn write_glyphs_ply(glyphs: &[Glyph], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "ply\nformat ascii 1.0")?;
    for (g, glyph) in glyphs.iter().enumerate() {
        if let Some(msg) = &glyph.flag {
            writeln!(out, "comment flagged glyph {g}: {msg}")?;
        }
    }
    writeln!(
        out,
        "element vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element edge {}\nproperty int vertex1\nproperty int vertex2\nend_header",
        7 * glyphs.len(),
        6 * glyphs.len()
    )?;
    for glyph in glyphs {
        let c = glyph.center;
        writeln!(out, "{:?} {:?} {:?}", c.x, c.y, c.z)?;
        for a in &glyph.axes {
            for s in [1.0, -1.0] {
                let p = c + a * (s * glyph.half_length);
                writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z)?;
            }
        }
    }
    for g in 0..glyphs.len() {
        let base = 7 * g;
        for k in 1..7 {
            writeln!(out, "{} {}", base, base + k)?;
        }
    }
    Ok(())
}
