//! File formats: OBJ in and out, ASCII PLY, CSV and JSON.
//!
//! Every floating-point value is written with 17 significant digits so
//! that reruns produce byte-identical artifacts.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde_json::{json, Map, Number, Value};

use crate::connection::DiscreteBundle;
use crate::error::{Error, MeshError, Result};
use crate::mesh::{Point, SurfaceMesh};
use crate::section::Section;
use crate::vortex::VortexSet;

/// `x` with 17 significant digits (`nan`, `inf` and `-inf` as such).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON number with 17 significant digits; non-finite values become null.
pub fn json_f64(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(Number::from_str(&fmt_f64(x)).expect("formatted float is valid JSON"))
}

fn json_point(p: &Point) -> Value {
    Value::Array(p.iter().map(|&c| json_f64(c)).collect())
}

/// Parse OBJ text: `v x y z` and `f i j k` lines (1-based, `i/t/n` and
/// negative relative indices accepted); every other record is ignored.
pub fn parse_obj(text: &str) -> Result<SurfaceMesh, MeshError> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| {
                        t.parse().map_err(|_| MeshError::Parse {
                            line,
                            message: format!("bad coordinate '{t}'"),
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(MeshError::Parse {
                        line,
                        message: "vertex needs three coordinates".into(),
                    });
                }
                positions.push(Point::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tokens
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| MeshError::Parse {
                            line,
                            message: format!("bad vertex index '{t}'"),
                        })?;
                        let resolved = match i {
                            0 => None,
                            i if i > 0 => Some(i - 1),
                            i => Some(positions.len() as i64 + i),
                        };
                        match resolved {
                            Some(r) if r >= 0 => Ok(r as usize),
                            _ => Err(MeshError::Parse {
                                line,
                                message: format!("vertex index '{t}' out of range"),
                            }),
                        }
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() != 3 {
                    return Err(MeshError::NonTriangleFace {
                        face: faces.len(),
                        count: idx.len(),
                    });
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    SurfaceMesh::new(positions, faces)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text).map_err(|e| match e {
        MeshError::Parse { line, message } => Error::Mesh(MeshError::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        }),
        other => Error::Mesh(other),
    })
}

pub fn obj_string(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    for p in mesh.positions() {
        let _ = writeln!(s, "v {} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z));
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_obj(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &obj_string(mesh))
}

/// Per-vertex attributes for [`ply_string`].
#[derive(Debug, Clone, Default)]
pub struct PlyAttributes {
    pub scalars: Vec<(String, Vec<f64>)>,
    /// Written as `<name>_x`, `<name>_y`, `<name>_z`.
    pub vectors: Vec<(String, Vec<Point>)>,
}

impl PlyAttributes {
    pub fn scalar(mut self, name: &str, values: Vec<f64>) -> Self {
        self.scalars.push((name.into(), values));
        self
    }

    pub fn vector(mut self, name: &str, values: Vec<Point>) -> Self {
        self.vectors.push((name.into(), values));
        self
    }
}

/// ASCII PLY with double-precision vertex properties.
pub fn ply_string(mesh: &SurfaceMesh, attrs: &PlyAttributes) -> Result<String> {
    let n = mesh.num_vertices();
    for (name, v) in &attrs.scalars {
        if v.len() != n {
            return Err(Error::Domain(format!("attribute {name} has {} values for {n} vertices", v.len())));
        }
    }
    for (name, v) in &attrs.vectors {
        if v.len() != n {
            return Err(Error::Domain(format!("attribute {name} has {} values for {n} vertices", v.len())));
        }
    }
    let mut s = String::from("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {n}");
    for c in ["x", "y", "z"] {
        let _ = writeln!(s, "property double {c}");
    }
    for (name, _) in &attrs.scalars {
        let _ = writeln!(s, "property double {name}");
    }
    for (name, _) in &attrs.vectors {
        for c in ["x", "y", "z"] {
            let _ = writeln!(s, "property double {name}_{c}");
        }
    }
    let _ = writeln!(s, "element face {}", mesh.num_faces());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for v in 0..n {
        let mut fields: Vec<String> = mesh.position(v).iter().map(|&c| fmt_f64(c)).collect();
        fields.extend(attrs.scalars.iter().map(|(_, vals)| fmt_f64(vals[v])));
        for (_, vals) in &attrs.vectors {
            fields.extend(vals[v].iter().map(|&c| fmt_f64(c)));
        }
        s.push_str(&fields.join(" "));
        s.push('\n');
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    Ok(s)
}

pub fn write_ply(mesh: &SurfaceMesh, attrs: &PlyAttributes, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &ply_string(mesh, attrs)?)
}

/// Comma-separated table; cells are written verbatim.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_text(path, &csv_string(header, rows))
}

pub fn write_json(path: impl AsRef<Path>, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Section dump: per-vertex `[re, im]`, flux vector and configuration.
pub fn section_json(u: &Section, fluxes: &[f64], config: &[usize]) -> Value {
    json!({
        "values": u.values().iter().map(|z| json!([json_f64(z.re), json_f64(z.im)])).collect::<Vec<_>>(),
        "fluxes": fluxes.iter().map(|&f| json_f64(f)).collect::<Vec<_>>(),
        "config": config,
    })
}

/// Inverse of [`section_json`]: the section, fluxes and configuration.
pub fn section_from_json(value: &Value) -> Result<(Section, Vec<f64>, Vec<usize>)> {
    let bad = |what: &str| Error::Config(format!("section JSON: {what}"));
    let values = value["values"]
        .as_array()
        .ok_or_else(|| bad("missing 'values' array"))?
        .iter()
        .map(|pair| {
            let re = pair[0].as_f64().ok_or_else(|| bad("value is not [re, im]"))?;
            let im = pair[1].as_f64().ok_or_else(|| bad("value is not [re, im]"))?;
            Ok(Complex64::new(re, im))
        })
        .collect::<Result<Vec<_>>>()?;
    let fluxes = match value.get("fluxes") {
        None => Vec::new(),
        Some(f) => f
            .as_array()
            .ok_or_else(|| bad("'fluxes' is not an array"))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| bad("flux is not a number")))
            .collect::<Result<_>>()?,
    };
    let config = match value.get("config") {
        None => Vec::new(),
        Some(c) => c
            .as_array()
            .ok_or_else(|| bad("'config' is not an array"))?
            .iter()
            .map(|x| x.as_u64().map(|v| v as usize).ok_or_else(|| bad("bad vertex id")))
            .collect::<Result<_>>()?,
    };
    Ok((Section::new(values), fluxes, config))
}

pub fn vortices_json(v: &VortexSet) -> Value {
    json!({
        "total_degree": v.total_degree,
        "flagged": v.flagged,
        "vortices": v.items.iter().map(|x| json!({
            "face": x.face,
            "degree": x.degree,
            "position": json_point(&x.position),
        })).collect::<Vec<_>>(),
    })
}

pub fn points_json(points: &[Point]) -> Value {
    Value::Array(points.iter().map(json_point).collect())
}

/// Object with the given fields in order.
pub fn json_object(fields: Vec<(&str, Value)>) -> Value {
    let mut m = Map::new();
    for (k, v) in fields {
        m.insert(k.into(), v);
    }
    Value::Object(m)
}

/// Connection dump, one row per directed edge: `i,j,rho`. Debug aid, the
/// layout is not stable.
pub fn connection_csv(bundle: &DiscreteBundle) -> String {
    let mesh = bundle.mesh();
    let rows: Vec<Vec<String>> = (0..mesh.num_halfedges())
        .map(|h| {
            vec![
                mesh.tail(h).to_string(),
                mesh.head(h).to_string(),
                fmt_f64(bundle.rho_halfedge(h)),
            ]
        })
        .collect();
    csv_string(&["i", "j", "rho"], &rows)
}
