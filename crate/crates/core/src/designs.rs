//! Nested evaluation-point sequences.
//!
//! Every generator is prefix-stable: the design of size `n` is exactly the
//! first `n` points of the design of size `n + 1`.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "box",
                value: f64::NAN,
                expected: "finite bounds",
            });
        }
        Ok(BoundingBox { lower, upper })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        BoundingBox {
            lower: alloc::vec![0.0; dim],
            upper: alloc::vec![1.0; dim],
        }
    }

    /// Smallest box containing all given points (flat, row-major).
    pub fn hull(dim: usize, coords: &[f64]) -> Self {
        let mut lower = alloc::vec![f64::INFINITY; dim];
        let mut upper = alloc::vec![f64::NEG_INFINITY; dim];
        for p in coords.chunks_exact(dim) {
            for j in 0..dim {
                lower[j] = lower[j].min(p[j]);
                upper[j] = upper[j].max(p[j]);
            }
        }
        BoundingBox { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(lo, hi)| !(hi > lo))
    }

    /// Euclidean distance from `x` to the box (0 inside).
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        let s: f64 = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| {
                let g = if v < lo {
                    lo - v
                } else if v > hi {
                    v - hi
                } else {
                    0.0
                };
                g * g
            })
            .sum();
        libm::sqrt(s)
    }

    fn rescale(&self, unit: &[f64], out: &mut Vec<f64>) {
        for (j, t) in unit.iter().enumerate() {
            out.push(self.lower[j] + t * (self.upper[j] - self.lower[j]));
        }
    }
}

/// Ordered point sequence with its enclosing box.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    dim: usize,
    coords: Vec<f64>,
    bbox: BoundingBox,
}

impl Design {
    /// Wraps flat row-major coordinates; the box is their hull.
    pub fn from_coords(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len(),
            });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "point",
                value: f64::NAN,
                expected: "finite coordinates",
            });
        }
        let bbox = BoundingBox::hull(dim, &coords);
        Ok(Design { dim, coords, bbox })
    }

    /// Wraps coordinates with an explicit box that must contain every point.
    pub fn with_box(coords: Vec<f64>, bbox: BoundingBox) -> Result<Self> {
        let dim = bbox.dim();
        let d = Design::from_coords(dim, coords)?;
        if let Some(p) = d.points().find(|p| !bbox.contains(p)) {
            return Err(Error::Precondition(alloc::format!(
                "point {p:?} lies outside the design box"
            )));
        }
        Ok(Design {
            dim,
            coords: d.coords,
            bbox,
        })
    }

    /// A design without points.
    pub fn empty(bbox: BoundingBox) -> Self {
        Design {
            dim: bbox.dim(),
            coords: Vec::new(),
            bbox,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> core::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    /// First `n` points, same box.
    pub fn prefix(&self, n: usize) -> Design {
        let n = n.min(self.len());
        Design {
            dim: self.dim,
            coords: self.coords[..n * self.dim].to_vec(),
            bbox: self.bbox.clone(),
        }
    }

    /// Index of a point exactly equal to `x`, if any.
    pub fn position(&self, x: &[f64]) -> Option<usize> {
        self.points().position(|p| p == x)
    }

    /// First pair of coinciding points, if any.
    pub fn find_duplicate(&self) -> Option<(usize, usize)> {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            self.point(a)
                .partial_cmp(self.point(b))
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        order.windows(2).find_map(|w| {
            (self.point(w[0]) == self.point(w[1])).then(|| (w[0].min(w[1]), w[0].max(w[1])))
        })
    }

    /// Appends `x` unless it is already a point; returns its index.
    pub fn with_point(&self, x: &[f64]) -> Result<(Design, usize)> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if let Some(j) = self.position(x) {
            return Ok((self.clone(), j));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(x);
        let mut lower = self.bbox.lower.clone();
        let mut upper = self.bbox.upper.clone();
        for j in 0..self.dim {
            lower[j] = lower[j].min(x[j]);
            upper[j] = upper[j].max(x[j]);
        }
        let idx = self.len();
        Ok((
            Design {
                dim: self.dim,
                coords,
                bbox: BoundingBox { lower, upper },
            },
            idx,
        ))
    }
}

/// Base-2 radical inverse of the bits of `i` at positions `offset, offset + stride, ...`.
fn interleaved_radical_inverse(mut i: u64, offset: usize, stride: usize) -> f64 {
    i >>= offset;
    let mut value = 0.0;
    let mut weight = 0.5;
    while i > 0 {
        if i & 1 == 1 {
            value += weight;
        }
        i >>= stride;
        weight *= 0.5;
    }
    value
}

/// First `n` points of a van der Corput ordered dyadic grid of `bbox`.
///
/// Point `i >= 1` takes, for coordinate `j`, the base-2 radical inverse of
/// the bits `j, j + d, j + 2d, ...` of `i`. In one dimension this is the van
/// der Corput sequence `1/2, 1/4, 3/4, 1/8, ...`; in general the first `2^{kd}`
/// points fill the dyadic grid of mesh `2^{-k}`.
pub fn grid_sequence(bbox: &BoundingBox, n: usize) -> Result<Design> {
    if bbox.is_degenerate() {
        return Err(Error::DegenerateBox);
    }
    let d = bbox.dim();
    let mut coords = Vec::with_capacity(n * d);
    let mut unit = alloc::vec![0.0; d];
    for i in 1..=n as u64 {
        for (j, t) in unit.iter_mut().enumerate() {
            *t = interleaved_radical_inverse(i, j, d);
        }
        bbox.rescale(&unit, &mut coords);
    }
    Ok(Design {
        dim: d,
        coords,
        bbox: bbox.clone(),
    })
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut weight = inv;
    let mut value = 0.0;
    while i > 0 {
        value += (i % base) as f64 * weight;
        i /= base;
        weight *= inv;
    }
    value
}

/// First `n` Halton points (bases = first `d` primes, indices from 1) in `bbox`.
pub fn halton_sequence(bbox: &BoundingBox, n: usize) -> Result<Design> {
    let d = bbox.dim();
    if d > PRIMES.len() {
        return Err(Error::TooManyDimensions {
            max: PRIMES.len(),
            found: d,
        });
    }
    if bbox.is_degenerate() {
        return Err(Error::DegenerateBox);
    }
    let mut coords = Vec::with_capacity(n * d);
    let mut unit = alloc::vec![0.0; d];
    for i in 1..=n as u64 {
        for (t, &b) in unit.iter_mut().zip(&PRIMES) {
            *t = radical_inverse(i, b);
        }
        bbox.rescale(&unit, &mut coords);
    }
    Ok(Design {
        dim: d,
        coords,
        bbox: bbox.clone(),
    })
}

/// Points `x + rate^i direction`, `i = 1..=n`, accumulating at `x`.
///
/// The box is the hull of `x` and the first point, so it contains the closure
/// of the infinite sequence.
pub fn accumulate_at(x: &[f64], rate: f64, direction: &[f64], n: usize) -> Result<Design> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidParameter {
            name: "rate",
            value: rate,
            expected: "a real in (0, 1)",
        });
    }
    if direction.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: direction.len(),
        });
    }
    let norm = crate::distance(direction, &alloc::vec![0.0; direction.len()]);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidParameter {
            name: "direction",
            value: norm,
            expected: "a non-zero finite vector",
        });
    }
    let d = x.len();
    let mut coords = Vec::with_capacity(n * d);
    let mut scale = 1.0;
    for _ in 0..n {
        scale *= rate;
        for j in 0..d {
            coords.push(x[j] + scale * direction[j] / norm);
        }
    }
    let mut ends = x.to_vec();
    for j in 0..d {
        ends.push(x[j] + rate * direction[j] / norm);
    }
    Ok(Design {
        dim: d,
        coords,
        bbox: BoundingBox::hull(d, &ends),
    })
}

/// Keeps the points at distance `>= radius` from `center`, in order.
pub fn exclude_ball(design: &Design, center: &[f64], radius: f64) -> Result<Design> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter {
            name: "radius",
            value: radius,
            expected: "a positive real",
        });
    }
    if center.len() != design.dim {
        return Err(Error::DimensionMismatch {
            expected: design.dim,
            found: center.len(),
        });
    }
    let coords = design
        .points()
        .filter(|p| crate::distance(p, center) >= radius)
        .flatten()
        .copied()
        .collect();
    Ok(Design {
        dim: design.dim,
        coords,
        bbox: design.bbox.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn grid_prefixes() {
        let b = BoundingBox::unit(1);
        assert_eq!(grid_sequence(&b, 1).unwrap().coords(), &[0.5]);
        assert_eq!(grid_sequence(&b, 3).unwrap().coords(), &[0.5, 0.25, 0.75]);
        let b2 = BoundingBox::new(vec![-1.0], vec![3.0]).unwrap();
        assert_eq!(grid_sequence(&b2, 3).unwrap().coords(), &[1.0, 0.0, 2.0]);
    }

    #[test]
    fn grid_two_dimensional_fills_dyadic_mesh() {
        let d = grid_sequence(&BoundingBox::unit(2), 16).unwrap();
        let mut pts: Vec<(u32, u32)> = d
            .points()
            .map(|p| ((p[0] * 4.0) as u32, (p[1] * 4.0) as u32))
            .collect();
        pts.sort();
        pts.dedup();
        // 16 distinct cells of the 4x4 mesh, all but (0,0) from i < 16
        assert_eq!(pts.len(), 16);
        assert!(d.find_duplicate().is_none());
    }

    #[test]
    fn degenerate_box_rejected() {
        let b = BoundingBox::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(grid_sequence(&b, 4), Err(Error::DegenerateBox));
        assert_eq!(halton_sequence(&b, 4), Err(Error::DegenerateBox));
    }

    #[test]
    fn halton_first_points() {
        let d = halton_sequence(&BoundingBox::unit(1), 3).unwrap();
        assert_eq!(d.coords(), &[0.5, 0.25, 0.75]);
        let d = halton_sequence(&BoundingBox::unit(2), 1).unwrap();
        assert_eq!(d.point(0)[0], 0.5);
        assert!(libm::fabs(d.point(0)[1] - 1.0 / 3.0) < 1e-16);
        assert!(matches!(
            halton_sequence(&BoundingBox::unit(17), 1),
            Err(Error::TooManyDimensions { max: 16, found: 17 })
        ));
    }

    #[test]
    fn accumulating_sequence() {
        let d = accumulate_at(&[0.0], 0.5, &[1.0], 3).unwrap();
        assert_eq!(d.coords(), &[0.5, 0.25, 0.125]);
        assert!(d.bbox().contains(&[0.0]));
        assert!(accumulate_at(&[0.0], 1.0, &[1.0], 3).is_err());
        assert!(accumulate_at(&[0.0], 0.0, &[1.0], 3).is_err());
        let d = accumulate_at(&[1.0, 1.0], 0.9, &[3.0, 4.0], 200).unwrap();
        assert!(d.find_duplicate().is_none());
        let last = d.point(199);
        assert!(crate::distance(last, &[1.0, 1.0]) < 1e-9);
    }

    #[test]
    fn excluding_balls() {
        let g = grid_sequence(&BoundingBox::unit(1), 3).unwrap();
        assert_eq!(exclude_ball(&g, &[2.0], 0.5).unwrap(), g);
        assert!(exclude_ball(&g, &[0.5], 1.0).unwrap().is_empty());
        assert_eq!(exclude_ball(&g, &[0.5], 0.25).unwrap().coords(), &[0.25, 0.75]);
        assert!(exclude_ball(&g, &[0.5], 0.0).is_err());
    }

    #[test]
    fn duplicates_are_found() {
        let d = Design::from_coords(1, vec![0.1, 0.4, 0.2, 0.4]).unwrap();
        assert_eq!(d.find_duplicate(), Some((1, 3)));
    }

    #[test]
    fn box_distance() {
        let b = BoundingBox::unit(2);
        assert_eq!(b.distance_to(&[0.5, 0.5]), 0.0);
        assert_eq!(b.distance_to(&[2.0, 0.5]), 1.0);
        assert!(libm::fabs(b.distance_to(&[4.0, 5.0]) - 5.0) < 1e-15);
    }
}
