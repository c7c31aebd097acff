//! Text formats: OFF-like triangle meshes and CSV polylines.
//!
//! See `docs/formats.md` for the grammar.

use std::fmt::Write as _;
use std::path::Path;

use super::{Geometry, Polyline, TriMesh, P3};
use crate::error::{Error, Result};

fn significant(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse(format!("line {line}: cannot parse {tok:?}")))
}

pub fn parse_off(text: &str) -> Result<TriMesh> {
    let mut lines = significant(text);
    match lines.next() {
        Some((_, "OFF")) => {}
        Some((l, h)) => return Err(Error::Parse(format!("line {l}: expected OFF header, found {h:?}"))),
        None => return Err(Error::Parse("empty mesh file".into())),
    }
    let (l, counts) = lines.next().ok_or_else(|| Error::Parse("missing count line".into()))?;
    let c: Vec<usize> = counts.split_whitespace().map(|t| parse_num(t, l)).collect::<Result<_>>()?;
    if c.len() < 2 || c.len() > 3 {
        return Err(Error::Parse(format!("line {l}: expected `V F [E]`")));
    }
    let (nv, nf) = (c[0], c[1]);
    let mut v: Vec<P3> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| Error::Parse("unexpected end of file in vertices".into()))?;
        let x: Vec<f64> = s.split_whitespace().map(|t| parse_num(t, l)).collect::<Result<_>>()?;
        if x.len() != 3 {
            return Err(Error::Parse(format!("line {l}: vertex needs 3 coordinates")));
        }
        v.push([x[0], x[1], x[2]]);
    }
    let mut f = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| Error::Parse("unexpected end of file in faces".into()))?;
        let x: Vec<usize> = s.split_whitespace().map(|t| parse_num(t, l)).collect::<Result<_>>()?;
        if x.len() != 4 || x[0] != 3 {
            return Err(Error::Parse(format!("line {l}: only triangles `3 a b c` are supported")));
        }
        f.push([x[1], x[2], x[3]]);
    }
    if let Some((l, _)) = lines.next() {
        return Err(Error::Parse(format!("line {l}: trailing content after faces")));
    }
    TriMesh::new(v, f)
}

pub fn parse_polyline_csv(text: &str) -> Result<Polyline> {
    let mut dim = 0;
    let mut pts = Vec::new();
    for (l, s) in significant(text) {
        let x: Vec<f64> = s.split(',').map(|t| parse_num(t.trim(), l)).collect::<Result<_>>()?;
        if x.len() != 2 && x.len() != 3 {
            return Err(Error::Parse(format!("line {l}: expected `x,y` or `x,y,z`")));
        }
        if dim == 0 {
            dim = x.len();
        } else if dim != x.len() {
            return Err(Error::Parse(format!("line {l}: expected {dim} columns")));
        }
        pts.push([x[0], x[1], x.get(2).copied().unwrap_or(0.0)]);
    }
    Polyline::new(dim.max(2), pts)
}

/// Mesh if the first significant line is `OFF`, polyline otherwise.
pub fn parse_geometry(text: &str) -> Result<Geometry> {
    match significant(text).next() {
        Some((_, "OFF")) => parse_off(text).map(Geometry::Mesh),
        _ => parse_polyline_csv(text).map(Geometry::Curve),
    }
}

pub fn load_geometry(path: impl AsRef<Path>) -> Result<Geometry> {
    parse_geometry(&std::fs::read_to_string(path)?)
}

pub fn write_off(m: &TriMesh) -> String {
    let mut s = String::new();
    writeln!(s, "OFF").unwrap();
    writeln!(s, "{} {} {}", m.vertices().len(), m.faces().len(), m.edges().len()).unwrap();
    for p in m.vertices() {
        writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]).unwrap();
    }
    for f in m.faces() {
        writeln!(s, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    s
}

pub fn write_polyline_csv(c: &Polyline) -> String {
    let mut s = String::new();
    for p in c.points() {
        if c.dim() == 2 {
            writeln!(s, "{:?},{:?}", p[0], p[1]).unwrap();
        } else {
            writeln!(s, "{:?},{:?},{:?}", p[0], p[1], p[2]).unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures;

    #[test]
    fn off_round_trip_is_exact() {
        let m = fixtures::icosphere(2, 1.5);
        let back = parse_off(&write_off(&m)).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.faces(), m.faces());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        for dim in [2, 3] {
            let c = fixtures::regular_polygon(12, 0.7, dim).unwrap();
            let back = parse_polyline_csv(&write_polyline_csv(&c)).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# tetrahedron\nOFF\n\n4 4 6 # counts\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n";
        let m = parse_off(text).unwrap();
        assert_eq!(m.euler_characteristic(), 2);
        assert!(matches!(parse_geometry(text).unwrap(), Geometry::Mesh(_)));
    }

    #[test]
    fn open_strip_file_is_rejected_with_edge_name() {
        let (v, f) = fixtures::open_strip_raw();
        let mut text = format!("OFF\n{} {} 0\n", v.len(), f.len());
        for p in &v {
            text += &format!("{} {} {}\n", p[0], p[1], p[2]);
        }
        for t in &f {
            text += &format!("3 {} {} {}\n", t[0], t[1], t[2]);
        }
        let e = parse_off(&text).unwrap_err().to_string();
        assert!(e.contains("boundary edge (0, 1)"), "{e}");
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(parse_off("PLY\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_off("OFF\n3 1\n0 0 0\n1 0 0\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_off("OFF\n3 1\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 0\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_polyline_csv("1,2\n1,2,3\n"), Err(Error::Parse(_))));
    }
}
