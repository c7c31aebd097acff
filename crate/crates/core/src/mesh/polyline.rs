//! Closed polylines in R^2 and R^3.

use std::f64::consts::PI;

use super::{norm, sub, LkReport, CONVENTION, P3};
use crate::error::{Error, Result};

pub const MIN_VERTICES: usize = 8;

/// Closed polygonal curve. Planar curves keep a zero third coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    dim: usize,
    points: Vec<P3>,
}

impl Polyline {
    pub fn new(dim: usize, points: Vec<P3>) -> Result<Self> {
        let c = Polyline { dim, points };
        c.validate()?;
        Ok(c)
    }

    /// Planar curve from `(x, y)` pairs.
    pub fn planar(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(2, points.iter().map(|p| [p[0], p[1], 0.0]).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::Validation(format!("polyline dimension {} is not 2 or 3", self.dim)));
        }
        let n = self.points.len();
        if n < MIN_VERTICES {
            return Err(Error::Validation(format!(
                "polyline has {n} vertices, at least {MIN_VERTICES} required"
            )));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("vertex {i} is not finite")));
            }
            if self.dim == 2 && p[2] != 0.0 {
                return Err(Error::Validation(format!("planar vertex {i} has a nonzero z coordinate")));
            }
            let q = self.points[(i + 1) % n];
            if *p == q {
                return Err(Error::Validation(format!("consecutive vertices {i} and {} coincide", (i + 1) % n)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[P3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Replace vertex positions, keeping the loop structure. Used when the
    /// curve is advected; no revalidation.
    pub fn set_points(&mut self, points: Vec<P3>) {
        assert_eq!(points.len(), self.points.len(), "vertex count must not change");
        self.points = points;
    }

    /// Segment `i`, from vertex `i` to vertex `i + 1` (cyclically).
    pub fn segment(&self, i: usize) -> (P3, P3) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }

    pub fn length(&self) -> f64 {
        (0..self.points.len())
            .map(|i| {
                let (a, b) = self.segment(i);
                norm(sub(b, a))
            })
            .sum()
    }

    /// Sum of signed exterior angles over `2 pi`. Planar curves only.
    pub fn turning_number(&self) -> Option<f64> {
        if self.dim != 2 {
            return None;
        }
        let n = self.points.len();
        let mut total = 0.0;
        for i in 0..n {
            let a = sub(self.points[i], self.points[(i + n - 1) % n]);
            let b = sub(self.points[(i + 1) % n], self.points[i]);
            total += (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
        }
        Some(total / (2.0 * PI))
    }

    /// Signed enclosed area (shoelace). Planar curves only.
    pub fn signed_area(&self) -> Option<f64> {
        if self.dim != 2 {
            return None;
        }
        let n = self.points.len();
        let s: f64 = (0..n)
            .map(|i| {
                let (a, b) = self.segment(i);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        Some(0.5 * s)
    }

    /// `L_0 = 0` (a closed curve has Euler characteristic 0) and `L_1` is
    /// the length.
    pub fn lk(&self) -> LkReport {
        LkReport {
            convention: CONVENTION,
            l: vec![0.0, self.length()],
            h_int: None,
            chi_combinatorial: None,
            genus: None,
            turning_number: self.turning_number(),
        }
    }

    pub fn scaled(&self, s: f64) -> Polyline {
        Polyline { dim: self.dim, points: self.points.iter().map(|p| super::scale(*p, s)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures;

    #[test]
    fn inscribed_polygon_length_and_turning() {
        let c = fixtures::regular_polygon(1024, 1.0, 2).unwrap();
        let exact = 2.0 * 1024.0 * (PI / 1024.0).sin();
        assert!((c.length() - exact).abs() < 1e-12);
        assert!((c.length() - 2.0 * PI).abs() < 1e-4);
        assert_eq!(c.turning_number().unwrap().round(), 1.0);
        assert!((c.turning_number().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_scales_linearly() {
        let c = fixtures::regular_polygon(64, 1.0, 3).unwrap();
        for a in [0.5, 2.0, 3.0] {
            let r = c.scaled(a).length() / c.length();
            assert!((r - a).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn doubled_circle_turns_twice() {
        let c = fixtures::circle_twice(64, 1.0).unwrap();
        assert!((c.turning_number().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clockwise_polygon_turns_negatively() {
        let mut p: Vec<[f64; 2]> = (0..16).map(|i| {
            let t = 2.0 * PI * i as f64 / 16.0;
            [t.cos(), t.sin()]
        }).collect();
        p.reverse();
        let c = Polyline::planar(&p).unwrap();
        assert!((c.turning_number().unwrap() + 1.0).abs() < 1e-12);
        assert!(c.signed_area().unwrap() < 0.0);
    }

    #[test]
    fn rejects_short_and_repeated() {
        let p: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, 0.0]).collect();
        assert!(matches!(Polyline::planar(&p), Err(Error::Validation(_))));
        let mut p: Vec<[f64; 2]> = (0..10).map(|i| [(i as f64).cos(), (i as f64).sin()]).collect();
        p[4] = p[3];
        assert!(matches!(Polyline::planar(&p), Err(Error::Validation(_))));
    }
}
