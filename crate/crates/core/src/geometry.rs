//! Points, convex domains and the cell grids that carry density fields.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::math::{floor, sqrt};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A location in `R^d`, `2 <= d <= MAX_DIM`, stored inline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Point> {
        let d = coords.len();
        if !(2..=MAX_DIM).contains(&d) {
            return Err(Error::Dimension { expected: 2, found: d });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("point", "coordinates must be finite"));
        }
        let mut c = [0.0; MAX_DIM];
        c[..d].copy_from_slice(coords);
        Ok(Point { coords: c, dim: d as u8 })
    }

    pub const fn xy(x: f64, y: f64) -> Point {
        Point { coords: [x, y, 0.0], dim: 2 }
    }

    pub fn origin(dim: usize) -> Point {
        assert!((2..=MAX_DIM).contains(&dim), "unsupported dimension {dim}");
        Point { coords: [0.0; MAX_DIM], dim: dim as u8 }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    #[inline]
    pub fn dot(&self, other: &Point) -> f64 {
        self.coords().iter().zip(other.coords()).map(|(a, b)| a * b).sum()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        sqrt(self.norm_sq())
    }

    /// Max-norm `|x|_inf`.
    pub fn sup_norm(&self) -> f64 {
        self.coords().iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    #[inline]
    pub fn dist_sq(&self, other: &Point) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim() {
            let d = self.coords[i] - other.coords[i];
            s += d * d;
        }
        s
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        sqrt(self.dist_sq(other))
    }

    /// `a + s (b - a)`.
    #[inline]
    pub fn lerp(a: &Point, b: &Point, s: f64) -> Point {
        let mut out = *a;
        for i in 0..a.dim() {
            out.coords[i] = a.coords[i] + s * (b.coords[i] - a.coords[i]);
        }
        out
    }
}

impl Add for Point {
    type Output = Point;
    fn add(mut self, rhs: Point) -> Point {
        for i in 0..self.dim() {
            self.coords[i] += rhs.coords[i];
        }
        self
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(mut self, rhs: Point) -> Point {
        for i in 0..self.dim() {
            self.coords[i] -= rhs.coords[i];
        }
        self
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(mut self, rhs: f64) -> Point {
        for c in &mut self.coords[..self.dim as usize] {
            *c *= rhs;
        }
        self
    }
}

/// Volume of the Euclidean ball of radius `r` in dimension `d`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    match d {
        2 => PI * r * r,
        3 => 4.0 / 3.0 * PI * r * r * r,
        _ => panic!("unsupported dimension {d}"),
    }
}

/// A convex compact domain with nonempty interior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Closed Euclidean ball.
    Disk { center: Point, radius: f64 },
    /// Closed axis-aligned box.
    Rect { lower: Point, upper: Point },
}

impl Domain {
    pub fn disk(center: Point, radius: f64) -> Result<Domain> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("disk.radius", "must be positive and finite"));
        }
        Ok(Domain::Disk { center, radius })
    }

    pub fn unit_disk() -> Domain {
        Domain::Disk { center: Point::xy(0.0, 0.0), radius: 1.0 }
    }

    pub fn rect(lower: Point, upper: Point) -> Result<Domain> {
        if lower.dim() != upper.dim() {
            return Err(Error::Dimension { expected: lower.dim(), found: upper.dim() });
        }
        if lower.coords().iter().zip(upper.coords()).any(|(l, u)| !(l < u)) {
            return Err(invalid("rect", "lower must be componentwise < upper"));
        }
        Ok(Domain::Rect { lower, upper })
    }

    pub fn unit_square() -> Domain {
        Domain::Rect { lower: Point::xy(0.0, 0.0), upper: Point::xy(1.0, 1.0) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Disk { center, .. } => center.dim(),
            Domain::Rect { lower, .. } => lower.dim(),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Domain::Disk { center, radius } => p.dist_sq(center) <= radius * radius,
            Domain::Rect { lower, upper } => p
                .coords()
                .iter()
                .zip(lower.coords().iter().zip(upper.coords()))
                .all(|(c, (l, u))| *l <= *c && *c <= *u),
        }
    }

    /// Membership with slack `tol` (absolute), for points produced by
    /// floating-point interpolation between points of the domain.
    pub fn contains_within(&self, p: &Point, tol: f64) -> bool {
        match self {
            Domain::Disk { center, radius } => p.dist(center) <= radius + tol,
            Domain::Rect { lower, upper } => p
                .coords()
                .iter()
                .zip(lower.coords().iter().zip(upper.coords()))
                .all(|(c, (l, u))| *l - tol <= *c && *c <= *u + tol),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } => 2.0 * radius,
            Domain::Rect { lower, upper } => upper.dist(lower),
        }
    }

    pub fn center(&self) -> Point {
        match self {
            Domain::Disk { center, .. } => *center,
            Domain::Rect { lower, upper } => Point::lerp(lower, upper, 0.5),
        }
    }

    /// Largest distance from [`Domain::center`] to a point of the domain.
    pub fn center_radius(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } => *radius,
            Domain::Rect { .. } => 0.5 * self.diameter(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Disk { center, radius } => ball_volume(center.dim(), *radius),
            Domain::Rect { lower, upper } => lower
                .coords()
                .iter()
                .zip(upper.coords())
                .map(|(l, u)| u - l)
                .product(),
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Domain::Disk { center, radius } => {
                let mut lo = *center;
                let mut hi = *center;
                for i in 0..center.dim() {
                    lo.coords[i] -= radius;
                    hi.coords[i] += radius;
                }
                (lo, hi)
            }
            Domain::Rect { lower, upper } => (*lower, *upper),
        }
    }

    /// Uniform draw from the domain; disks use rejection from the bounding box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (lo, hi) = self.bounding_box();
        loop {
            let mut p = lo;
            for i in 0..lo.dim() {
                let u: f64 = rng.random();
                p.coords[i] = lo.coords[i] + u * (hi.coords[i] - lo.coords[i]);
            }
            if self.contains(&p) {
                return p;
            }
        }
    }
}

/// Regular grid over the bounding box of a domain, keeping the cells whose
/// centre lies in the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    domain: Domain,
    resolution: usize,
    lower: Point,
    side: [f64; MAX_DIM],
    /// dense cell index -> compact index of a stored cell
    compact: Vec<Option<u32>>,
    /// compact index -> dense index
    dense: Vec<u32>,
    centers: Vec<Point>,
}

impl CellGrid {
    pub fn new(domain: Domain, resolution: usize) -> Result<CellGrid> {
        if resolution == 0 {
            return Err(invalid("resolution", "must be positive"));
        }
        let d = domain.dim();
        let total = resolution
            .checked_pow(d as u32)
            .filter(|&t| t <= u32::MAX as usize)
            .ok_or(invalid("resolution", "too many cells"))?;
        let (lower, upper) = domain.bounding_box();
        let mut side = [0.0; MAX_DIM];
        for (i, s) in side.iter_mut().enumerate().take(d) {
            *s = (upper.coords[i] - lower.coords[i]) / resolution as f64;
        }
        let mut compact = vec![None; total];
        let mut dense = Vec::new();
        let mut centers = Vec::new();
        let mut idx = [0usize; MAX_DIM];
        for (flat, slot) in compact.iter_mut().enumerate() {
            let mut rem = flat;
            for a in idx.iter_mut().take(d) {
                *a = rem % resolution;
                rem /= resolution;
            }
            let mut c = lower;
            for i in 0..d {
                c.coords[i] = lower.coords[i] + (idx[i] as f64 + 0.5) * side[i];
            }
            if domain.contains(&c) {
                *slot = Some(centers.len() as u32);
                dense.push(flat as u32);
                centers.push(c);
            }
        }
        Ok(CellGrid { domain, resolution, lower, side, compact, dense, centers })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Number of stored (in-domain) cells.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.side[axis]
    }

    pub fn cell_volume(&self) -> f64 {
        self.side[..self.dim()].iter().product()
    }

    /// Per-axis integer coordinates of a stored cell.
    pub fn axis_index(&self, cell: usize) -> [usize; MAX_DIM] {
        let mut rem = self.dense[cell] as usize;
        let mut idx = [0usize; MAX_DIM];
        for a in idx.iter_mut().take(self.dim()) {
            *a = rem % self.resolution;
            rem /= self.resolution;
        }
        idx
    }

    fn flat(&self, idx: &[usize; MAX_DIM]) -> usize {
        let mut flat = 0;
        for i in (0..self.dim()).rev() {
            flat = flat * self.resolution + idx[i];
        }
        flat
    }

    /// Stored cell at integer coordinates, if any.
    pub fn cell_at_index(&self, idx: &[usize; MAX_DIM]) -> Option<usize> {
        if idx[..self.dim()].iter().any(|&a| a >= self.resolution) {
            return None;
        }
        self.compact[self.flat(idx)].map(|c| c as usize)
    }

    /// Integer coordinates of the bounding-box cell containing `p` (clamped).
    fn raw_index(&self, p: &Point) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        for (i, a) in idx.iter_mut().enumerate().take(self.dim()) {
            let t = floor((p.coords[i] - self.lower.coords[i]) / self.side[i]);
            *a = if t <= 0.0 { 0 } else { (t as usize).min(self.resolution - 1) };
        }
        idx
    }

    /// Stored cell whose box contains `p`; `None` if that cell's centre is outside
    /// the domain.
    pub fn cell_of(&self, p: &Point) -> Option<usize> {
        self.cell_at_index(&self.raw_index(p))
    }

    /// Like [`CellGrid::cell_of`], but points in boundary slivers (whose cell
    /// centre is outside the domain) are assigned to the nearest stored cell in
    /// the surrounding 3^d block.
    pub fn locate(&self, p: &Point) -> Option<usize> {
        if let Some(c) = self.cell_of(p) {
            return Some(c);
        }
        let base = self.raw_index(p);
        let d = self.dim();
        let mut best: Option<(f64, usize)> = None;
        for code in 0..3usize.pow(d as u32) {
            let mut idx = base;
            let mut rem = code;
            let mut ok = true;
            for a in idx.iter_mut().take(d) {
                let off = (rem % 3) as isize - 1;
                rem /= 3;
                let v = *a as isize + off;
                if v < 0 || v >= self.resolution as isize {
                    ok = false;
                }
                *a = v.max(0) as usize;
            }
            if !ok {
                continue;
            }
            if let Some(c) = self.cell_at_index(&idx) {
                let dd = self.centers[c].dist_sq(p);
                if best.is_none_or(|(b, _)| dd < b) {
                    best = Some((dd, c));
                }
            }
        }
        best.map(|(_, c)| c)
    }

    /// Face neighbours (2d of them at most) that are stored cells.
    pub fn face_neighbors(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let idx = self.axis_index(cell);
        let d = self.dim();
        (0..2 * d).filter_map(move |k| {
            let axis = k / 2;
            let mut n = idx;
            if k % 2 == 0 {
                if n[axis] == 0 {
                    return None;
                }
                n[axis] -= 1;
            } else {
                n[axis] += 1;
            }
            self.cell_at_index(&n)
        })
    }

    /// Lower corner of the box of a stored cell.
    pub fn cell_lower(&self, cell: usize) -> Point {
        let idx = self.axis_index(cell);
        let mut p = self.lower;
        for i in 0..self.dim() {
            p.coords[i] = self.lower.coords[i] + idx[i] as f64 * self.side[i];
        }
        p
    }

    /// Position of `p` in continuous cell-centre coordinates: centre of cell
    /// `k` along an axis maps to `k`.
    pub(crate) fn center_coords(&self, p: &Point) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(self.dim()) {
            *o = (p.coords[i] - self.lower.coords[i]) / self.side[i] - 0.5;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn disk_contains() {
        let d = Domain::unit_disk();
        assert!(d.contains(&Point::xy(0.0, 0.0)));
        assert!(d.contains(&Point::xy(1.0, 0.0)));
        assert!(!d.contains(&Point::xy(1.01, 0.0)));
    }

    #[test]
    fn diameters() {
        assert_eq!(Domain::unit_disk().diameter(), 2.0);
        let r = Domain::rect(Point::xy(0.0, 0.0), Point::xy(3.0, 4.0)).unwrap();
        assert_eq!(r.diameter(), 5.0);
        assert!((Domain::unit_square().diameter() - 1.41421356).abs() < 1e-8);
        let d = Domain::disk(Point::xy(2.0, -1.0), 0.75).unwrap();
        assert_eq!(d.diameter(), 1.5);
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(Domain::disk(Point::xy(0.0, 0.0), 0.0).is_err());
        assert!(Domain::rect(Point::xy(0.0, 0.0), Point::xy(1.0, 0.0)).is_err());
        assert!(Point::new(&[1.0]).is_err());
        assert!(Point::new(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn uniform_moments() {
        let mut rng = StreamKey::new(3).rng();
        let n = 100_000;
        let sq = Domain::unit_square();
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let p = sq.sample_uniform(&mut rng);
            sx += p.x();
            sy += p.y();
        }
        assert!((sx / n as f64 - 0.5).abs() < 0.01);
        assert!((sy / n as f64 - 0.5).abs() < 0.01);

        let disk = Domain::unit_disk();
        let (mut mx, mut my, mut inner) = (0.0, 0.0, 0usize);
        for _ in 0..n {
            let p = disk.sample_uniform(&mut rng);
            mx += p.x();
            my += p.y();
            if p.norm() <= 0.5 {
                inner += 1;
            }
        }
        assert!((mx / n as f64).abs() < 0.01);
        assert!((my / n as f64).abs() < 0.01);
        assert!((inner as f64 / n as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn samples_stay_inside() {
        let mut rng = StreamKey::new(9).rng();
        let disk = Domain::disk(Point::xy(0.3, -0.2), 2.0).unwrap();
        for _ in 0..1_000_000 {
            assert!(disk.contains(&disk.sample_uniform(&mut rng)));
        }
    }

    #[test]
    fn grid_counts_and_refinement() {
        let g = CellGrid::new(Domain::unit_disk(), 16).unwrap();
        assert!(g.len() <= 256);
        assert!(g.centers().iter().all(|c| g.domain().contains(c)));
        assert!((g.side(0) - 2.0 / 16.0).abs() < 1e-15);
        let fine = CellGrid::new(Domain::unit_disk(), 32).unwrap();
        // refinement shrinks the uncovered boundary sliver; locate covers all
        let mut rng = StreamKey::new(4).rng();
        let (mut coarse_miss, mut fine_miss) = (0, 0);
        for _ in 0..10_000 {
            let p = Domain::unit_disk().sample_uniform(&mut rng);
            coarse_miss += g.cell_of(&p).is_none() as usize;
            fine_miss += fine.cell_of(&p).is_none() as usize;
            assert!(fine.locate(&p).is_some());
        }
        assert!(fine_miss < coarse_miss);
    }

    #[test]
    fn locate_handles_slivers() {
        let g = CellGrid::new(Domain::unit_disk(), 8).unwrap();
        let p = Point::xy(0.999, 0.02);
        let c = g.locate(&p).unwrap();
        assert!(g.centers()[c].dist(&p) < 0.5);
    }

    #[test]
    fn face_neighbors_square() {
        let g = CellGrid::new(Domain::unit_square(), 4).unwrap();
        assert_eq!(g.len(), 16);
        let corner = g.cell_of(&Point::xy(0.1, 0.1)).unwrap();
        assert_eq!(g.face_neighbors(corner).count(), 2);
        let inner = g.cell_of(&Point::xy(0.3, 0.3)).unwrap();
        assert_eq!(g.face_neighbors(inner).count(), 4);
    }
}
