use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Point3;

use super::{MeshError, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    PlyAscii,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self, MeshError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default();
        ext.parse()
    }
}

impl FromStr for MeshFormat {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::PlyAscii),
            other => Err(MeshError::UnknownFormat(other.to_string())),
        }
    }
}

/// Reads a mesh; `format` defaults to the file extension. Polygons with more
/// than three corners are fan-triangulated.
pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<TriMesh, MeshError> {
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let text = fs::read_to_string(path)?;
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let mesh = parse_mesh(&text, format, label)?;
    log::debug!(
        "loaded {}: {} vertices, {} faces",
        path.display(),
        mesh.vertex_count(),
        mesh.face_count()
    );
    Ok(mesh)
}

pub fn parse_mesh(text: &str, format: MeshFormat, label: &str) -> Result<TriMesh, MeshError> {
    let (vertices, polygons) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::Obj => parse_obj(text)?,
        MeshFormat::PlyAscii => parse_ply(text)?,
    };
    if vertices.is_empty() || polygons.is_empty() {
        return Err(MeshError::Empty);
    }
    let mut faces = Vec::with_capacity(polygons.len());
    for (line, poly) in polygons {
        for &i in &poly {
            if i >= vertices.len() {
                return Err(MeshError::IndexOutOfRange {
                    face: faces.len(),
                    index: i,
                    vertex_count: vertices.len(),
                });
            }
        }
        if poly.len() < 3 {
            return Err(parse_err(line, "face with fewer than 3 vertices"));
        }
        for k in 1..poly.len() - 1 {
            faces.push([poly[0] as u32, poly[k] as u32, poly[k + 1] as u32]);
        }
    }
    TriMesh::new(vertices, faces, label)
}

type Parsed = (Vec<Point3<f64>>, Vec<(usize, Vec<usize>)>);

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, MeshError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

/// Non-empty lines with `#` comments stripped, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_off(text: &str) -> Result<Parsed, MeshError> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or(MeshError::Empty)?;
    let counts_line = match header.strip_prefix("OFF") {
        Some(rest) if rest.trim().is_empty() => lines
            .next()
            .ok_or_else(|| parse_err(hl, "missing element counts"))?,
        Some(rest) => (hl, rest.trim()),
        None => return Err(parse_err(hl, "expected OFF header")),
    };
    let mut it = counts_line.1.split_whitespace();
    let nv: usize = num(it.next(), counts_line.0, "vertex count")?;
    let nf: usize = num(it.next(), counts_line.0, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(counts_line.0, "unexpected end of file in vertex list"))?;
        let mut it = l.split_whitespace();
        vertices.push(Point3::new(
            num(it.next(), ln, "x")?,
            num(it.next(), ln, "y")?,
            num(it.next(), ln, "z")?,
        ));
    }
    let mut polys = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(counts_line.0, "unexpected end of file in face list"))?;
        let mut it = l.split_whitespace();
        let k: usize = num(it.next(), ln, "polygon size")?;
        let idx = (0..k)
            .map(|_| num::<usize>(it.next(), ln, "vertex index"))
            .collect::<Result<Vec<_>, _>>()?;
        polys.push((ln, idx));
    }
    Ok((vertices, polys))
}

fn parse_obj(text: &str) -> Result<Parsed, MeshError> {
    let mut vertices = Vec::new();
    let mut polys = Vec::new();
    for (ln, l) in content_lines(text) {
        let mut it = l.split_whitespace();
        match it.next() {
            Some("v") => vertices.push(Point3::new(
                num(it.next(), ln, "x")?,
                num(it.next(), ln, "y")?,
                num(it.next(), ln, "z")?,
            )),
            Some("f") => {
                let idx = it
                    .map(|tok| {
                        let head = tok.split('/').next().unwrap_or(tok);
                        let i: i64 = num(Some(head), ln, "vertex index")?;
                        let n = vertices.len() as i64;
                        let resolved = if i < 0 { n + i } else { i - 1 };
                        if resolved < 0 {
                            return Err(parse_err(ln, format!("vertex index {i} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                polys.push((ln, idx));
            }
            // normals, texture coordinates, groups and materials carry nothing we use
            _ => {}
        }
    }
    Ok((vertices, polys))
}

fn parse_ply(text: &str) -> Result<Parsed, MeshError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_err(1, "expected `ply` magic")),
    }

    struct Element {
        name: String,
        count: usize,
        props: Vec<String>,
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut header_end = None;
    for (ln, l) in lines.by_ref() {
        let mut it = l.split_whitespace();
        match it.next() {
            Some("format") => {
                if it.next() != Some("ascii") {
                    return Err(parse_err(ln, "only ASCII PLY is supported"));
                }
            }
            Some("element") => {
                let name = it.next().unwrap_or_default().to_string();
                let count = num(it.next(), ln, "element count")?;
                elements.push(Element {
                    name,
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(ln, "property before element"))?;
                let name = it.last().unwrap_or_default().to_string();
                el.props.push(name);
            }
            Some("end_header") => {
                header_end = Some(ln);
                break;
            }
            _ => {}
        }
    }
    let header_end = header_end.ok_or_else(|| parse_err(1, "missing end_header"))?;

    let mut body = lines.filter(|(_, l)| !l.is_empty());
    let mut vertices = Vec::new();
    let mut polys = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let (ln, l) = body
                .next()
                .ok_or_else(|| parse_err(header_end, format!("missing `{}` rows", el.name)))?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            match el.name.as_str() {
                "vertex" => {
                    let col = |axis: &str| -> Result<f64, MeshError> {
                        let at = el
                            .props
                            .iter()
                            .position(|p| p == axis)
                            .ok_or_else(|| parse_err(ln, format!("vertex has no `{axis}`")))?;
                        num(toks.get(at).copied(), ln, axis)
                    };
                    vertices.push(Point3::new(col("x")?, col("y")?, col("z")?));
                }
                "face" => {
                    let mut it = toks.iter().copied();
                    let k: usize = num(it.next(), ln, "polygon size")?;
                    let idx = (0..k)
                        .map(|_| num::<usize>(it.next(), ln, "vertex index"))
                        .collect::<Result<Vec<_>, _>>()?;
                    polys.push((ln, idx));
                }
                _ => {}
            }
        }
    }
    Ok((vertices, polys))
}

/// ASCII OFF text. Coordinates use the shortest round-trip decimal form, so
/// reading the file back reproduces every coordinate bit for bit.
pub fn write_off_string(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(32 * (mesh.vertex_count() + mesh.face_count()));
    let _ = writeln!(out, "OFF");
    let _ = writeln!(out, "{} {} 0", mesh.vertex_count(), mesh.face_count());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}

pub fn write_off(mesh: &TriMesh, path: &Path) -> Result<(), MeshError> {
    fs::write(path, write_off_string(mesh))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CUBE_OFF: &str = "OFF
# unit cube
8 12 0
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
3 0 2 1
3 0 3 2
3 4 5 6
3 4 6 7
3 0 1 5
3 0 5 4
3 1 2 6
3 1 6 5
3 2 3 7
3 2 7 6
3 3 0 4
3 3 4 7
";

    const QUAD_CUBE_OBJ: &str = "# cube with quad faces
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
vn 0 0 1
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2//1 3//1 7//1 6//1
f 3 4 8 7
f -1 -5 -8 -4
";

    #[test]
    fn reads_cube_off() {
        let m = parse_mesh(CUBE_OFF, MeshFormat::Off, "cube").unwrap();
        assert_eq!((m.vertex_count(), m.face_count()), (8, 12));
        assert!((m.signed_volume() - 1.0).abs() < 1e-12);
        assert!(m.is_closed());
    }

    #[test]
    fn fan_splits_obj_quads() {
        let m = parse_mesh(QUAD_CUBE_OBJ, MeshFormat::Obj, "cube").unwrap();
        assert_eq!(m.face_count(), 12);
        assert!((m.surface_area() - 6.0).abs() < 1e-12);
        assert!(m.is_closed());
    }

    #[test]
    fn reads_ascii_ply() {
        let ply = "ply
format ascii 1.0
element vertex 4
property float x
property float y
property float z
element face 2
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
1 1 0
0 1 0
3 0 1 2
3 0 2 3
";
        let m = parse_mesh(ply, MeshFormat::PlyAscii, "sq").unwrap();
        assert_eq!(m.face_count(), 2);
        assert!((m.surface_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_index_is_reported() {
        let bad = CUBE_OFF.replace("3 3 4 7", "3 3 4 99");
        let err = parse_mesh(&bad, MeshFormat::Off, "cube").unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { index: 99, .. }), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = CUBE_OFF.replace("1 1 0\n0 1 0", "1 1 0\n0 x 0");
        match parse_mesh(&bad, MeshFormat::Off, "cube").unwrap_err() {
            MeshError::Parse { line, .. } => assert_eq!(line, 7),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            parse_mesh("OFF\n0 0 0\n", MeshFormat::Off, "e"),
            Err(MeshError::Empty)
        ));
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(MeshFormat::from_path(Path::new("a/b.OFF")).unwrap(), MeshFormat::Off);
        assert_eq!(MeshFormat::from_path(Path::new("b.ply")).unwrap(), MeshFormat::PlyAscii);
        assert!(MeshFormat::from_path(Path::new("b.stl")).is_err());
    }

    proptest! {
        #[test]
        fn off_round_trip_is_bit_exact(
            coords in prop::collection::vec(
                (-1e6f64..1e6, -1e-6f64..1e-6, any::<i32>().prop_map(|i| i as f64 / 7.0)), 3..40)
        ) {
            let vertices: Vec<_> = coords.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let n = vertices.len() as u32;
            let faces: Vec<_> = (0..n - 2).map(|i| [i, i + 1, i + 2]).collect();
            let mesh = TriMesh::new(vertices, faces, "rt").unwrap();
            let back = parse_mesh(&write_off_string(&mesh), MeshFormat::Off, "rt").unwrap();
            prop_assert_eq!(back, mesh);
        }
    }
}
