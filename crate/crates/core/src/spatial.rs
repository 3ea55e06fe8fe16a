//! Planar single-point IPI maps, iso-level contours and enclosed areas.
//!
//! Maps keep the untruncated dB values; the display cap only applies on
//! export (see [`IpiMap::truncated`]), so contours below the cap are not
//! distorted by it.
//!
//! Contours use marching squares with linear interpolation along cell
//! edges. Saddle cells are resolved by the side of the cell-centre value
//! (mean of the four corners). The enclosed area is the exact area of the
//! same piecewise-linear region, summed cell by cell.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::acoustics::transfer_row;
use crate::error::{PszError, Result};
use crate::filter_design::{FilterMatrix, SystemMatrix};
use crate::linalg::CMatrix;
use crate::metrics::single_point_ipi;
use crate::scalar::Real;
use crate::scene::{Scene, Vec3};

/// Axis-aligned rectangle in the listening plane, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region<T> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
}

impl<T: Real> Region<T> {
    pub fn new(x_min: T, x_max: T, y_min: T, y_max: T) -> Result<Self> {
        if !(x_max > x_min) || !(y_max > y_min) {
            return Err(PszError::InvalidArgument("region must have positive width and height".into()));
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> T {
        self.y_max - self.y_min
    }

    /// Mirror image across the plane `x = 0`.
    pub fn mirrored_x(&self) -> Self {
        Self { x_min: -self.x_max, x_max: -self.x_min, y_min: self.y_min, y_max: self.y_max }
    }
}

/// Regular grid of values; node `(i, j)` sits at `(x0 + i·dx, y0 + j·dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IpiMap<T> {
    pub frequency: T,
    pub x0: T,
    pub y0: T,
    pub dx: T,
    pub dy: T,
    pub nx: usize,
    pub ny: usize,
    /// Display/export cap, dB.
    pub cap_db: T,
    /// Row-major (`j·nx + i`), untruncated dB. `NaN` marks invalid nodes.
    values: Vec<T>,
}

fn nodes_for<T: Real>(extent: T, resolution: T) -> usize {
    let cells = (extent / resolution - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
    cells + 1
}

impl<T: Real> IpiMap<T> {
    /// Grid covering `region` exactly with spacing no larger than `resolution`.
    pub fn grid(region: &Region<T>, resolution: T) -> Result<(usize, usize, T, T)> {
        if !(resolution > T::zero()) {
            return Err(PszError::InvalidArgument(format!("resolution must be positive, got {resolution}")));
        }
        let nx = nodes_for(region.width(), resolution);
        let ny = nodes_for(region.height(), resolution);
        let dx = region.width() / T::from_usize(nx - 1).unwrap();
        let dy = region.height() / T::from_usize(ny - 1).unwrap();
        Ok((nx, ny, dx, dy))
    }

    /// Wraps precomputed values laid out row-major over `region`.
    pub fn from_values(
        frequency: T,
        region: &Region<T>,
        nx: usize,
        ny: usize,
        cap_db: T,
        values: Vec<T>,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 || values.len() != nx * ny {
            return Err(PszError::DimensionMismatch(format!("{} values for a {nx}x{ny} grid", values.len())));
        }
        Ok(Self {
            frequency,
            x0: region.x_min,
            y0: region.y_min,
            dx: region.width() / T::from_usize(nx - 1).unwrap(),
            dy: region.height() / T::from_usize(ny - 1).unwrap(),
            nx,
            ny,
            cap_db,
            values,
        })
    }

    /// Samples `f(x, y)` on the grid for `region` at `resolution`.
    pub fn sample(
        frequency: T,
        region: &Region<T>,
        resolution: T,
        cap_db: T,
        f: impl Fn(T, T) -> T + Sync,
    ) -> Result<Self> {
        let (nx, ny, dx, dy) = Self::grid(region, resolution)?;
        let values = (0..nx * ny)
            .into_par_iter()
            .map(|n| {
                let (i, j) = (n % nx, n / nx);
                f(region.x_min + dx * T::from_usize(i).unwrap(), region.y_min + dy * T::from_usize(j).unwrap())
            })
            .collect();
        Ok(Self { frequency, x0: region.x_min, y0: region.y_min, dx, dy, nx, ny, cap_db, values })
    }

    pub fn region(&self) -> Region<T> {
        Region {
            x_min: self.x0,
            x_max: self.x0 + self.dx * T::from_usize(self.nx - 1).unwrap(),
            y_min: self.y0,
            y_max: self.y0 + self.dy * T::from_usize(self.ny - 1).unwrap(),
        }
    }

    pub fn point(&self, i: usize, j: usize) -> (T, T) {
        (self.x0 + self.dx * T::from_usize(i).unwrap(), self.y0 + self.dy * T::from_usize(j).unwrap())
    }

    /// Untruncated value; `NaN` for invalid nodes.
    pub fn raw(&self, i: usize, j: usize) -> T {
        self.values[j * self.nx + i]
    }

    pub fn raw_values(&self) -> &[T] {
        &self.values
    }

    /// Value clipped to the display cap, `None` for invalid nodes.
    pub fn truncated(&self, i: usize, j: usize) -> Option<T> {
        let v = self.raw(i, j);
        (!v.is_nan()).then(|| v.min(self.cap_db))
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        !self.raw(i, j).is_nan()
    }

    pub fn invalid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// Largest truncated value over valid nodes.
    pub fn max_truncated(&self) -> Option<T> {
        self.values.iter().filter(|v| !v.is_nan()).map(|&v| v.min(self.cap_db)).reduce(T::max)
    }
}

/// Single-point IPI (dB) at every grid node, for filters `c` designed at
/// `frequency`. Nodes coinciding with a loudspeaker are stored as `NaN`.
#[allow(clippy::too_many_arguments)]
pub fn ipi_map<T: Real>(
    scene: &Scene<T>,
    c: &FilterMatrix<T>,
    region: &Region<T>,
    resolution: T,
    frequency: T,
    target: &[usize],
    interferer: &[usize],
    cap_db: T,
) -> Result<IpiMap<T>> {
    if (c.frequency - frequency).abs() > T::lit(1e-9) * frequency.abs() {
        return Err(PszError::FrequencyMismatch { left: c.frequency.to_f64_lossy(), right: frequency.to_f64_lossy() });
    }
    if c.entries.rows() != scene.speakers.len() {
        return Err(PszError::DimensionMismatch(format!(
            "filters have {} rows, scene has {} speakers",
            c.entries.rows(),
            scene.speakers.len()
        )));
    }
    // fail early on bad channel sets instead of per node
    let probe = SystemMatrix::new(frequency, CMatrix::zeros(1, c.entries.cols()));
    single_point_ipi(&probe, 0, target, interferer)?;

    let (nx, ny, dx, dy) = IpiMap::<T>::grid(region, resolution)?;
    let values = (0..nx * ny)
        .into_par_iter()
        .map(|n| {
            let (i, j) = (n % nx, n / nx);
            let p =
                Vec3::xy(region.x_min + dx * T::from_usize(i).unwrap(), region.y_min + dy * T::from_usize(j).unwrap());
            node_ipi(scene, c, p, frequency, target, interferer)
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(IpiMap { frequency, x0: region.x_min, y0: region.y_min, dx, dy, nx, ny, cap_db, values })
}

fn node_ipi<T: Real>(
    scene: &Scene<T>,
    c: &FilterMatrix<T>,
    p: Vec3<T>,
    frequency: T,
    target: &[usize],
    interferer: &[usize],
) -> Result<T> {
    let row = match transfer_row(scene, p, frequency) {
        Ok(row) => row,
        Err(PszError::CoincidentPoints { .. }) => return Ok(T::nan()),
        Err(e) => return Err(e),
    };
    let h = CMatrix::from_row_major(1, row.len(), row);
    let m = SystemMatrix::new(frequency, h.matmul(&c.entries).expect("conformable"));
    Ok(single_point_ipi(&m, 0, target, interferer)?.db)
}

/// Piecewise-linear iso-line in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline<T> {
    pub points: Vec<[T; 2]>,
    /// First and last points are joined (the first point is not repeated).
    pub closed: bool,
}

impl<T: Real> Polyline<T> {
    /// Signed shoelace area; zero for open lines.
    pub fn signed_area(&self) -> T {
        if !self.closed {
            return T::zero();
        }
        shoelace(&self.points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourSet<T> {
    pub level_db: T,
    pub polylines: Vec<Polyline<T>>,
}

impl<T: Real> ContourSet<T> {
    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }
}

fn shoelace<T: Real>(pts: &[[T; 2]]) -> T {
    let n = pts.len();
    if n < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for a in 0..n {
        let b = (a + 1) % n;
        acc = acc + pts[a][0] * pts[b][1] - pts[b][0] * pts[a][1];
    }
    acc * T::lit(0.5)
}

/// Identifies a grid edge: horizontal edges first, then vertical.
type EdgeId = usize;

struct Marcher<'a, T> {
    map: &'a IpiMap<T>,
    level: T,
}

/// Corner order of a cell: (i,j), (i+1,j), (i+1,j+1), (i,j+1).
const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

enum CellShape {
    Empty,
    Full,
    /// Crossing edges (cell-local 0..4) to be paired into segments.
    Segments(Vec<(usize, usize)>),
}

impl<'a, T: Real> Marcher<'a, T> {
    fn inside(&self, v: T) -> bool {
        v >= self.level
    }

    fn h_edge(&self, i: usize, j: usize) -> EdgeId {
        j * (self.map.nx - 1) + i
    }

    fn v_edge(&self, i: usize, j: usize) -> EdgeId {
        self.map.ny * (self.map.nx - 1) + j * self.map.nx + i
    }

    /// Global edge id of a cell-local edge (0 bottom, 1 right, 2 top, 3 left).
    fn cell_edge(&self, i: usize, j: usize, e: usize) -> EdgeId {
        match e {
            0 => self.h_edge(i, j),
            1 => self.v_edge(i + 1, j),
            2 => self.h_edge(i, j + 1),
            _ => self.v_edge(i, j),
        }
    }

    /// Crossing point on a global edge.
    fn crossing(&self, edge: EdgeId) -> [T; 2] {
        let nx = self.map.nx;
        let h_count = self.map.ny * (nx - 1);
        let ((ia, ja), (ib, jb)) = if edge < h_count {
            let (i, j) = (edge % (nx - 1), edge / (nx - 1));
            ((i, j), (i + 1, j))
        } else {
            let e = edge - h_count;
            let (i, j) = (e % nx, e / nx);
            ((i, j), (i, j + 1))
        };
        let (va, vb) = (self.map.raw(ia, ja), self.map.raw(ib, jb));
        let t = if va.is_infinite() {
            T::one()
        } else if vb.is_infinite() {
            T::zero()
        } else {
            ((self.level - va) / (vb - va)).max(T::zero()).min(T::one())
        };
        let (xa, ya) = self.map.point(ia, ja);
        let (xb, yb) = self.map.point(ib, jb);
        [xa + (xb - xa) * t, ya + (yb - ya) * t]
    }

    fn corner_values(&self, i: usize, j: usize) -> Option<[T; 4]> {
        let v = CORNERS.map(|(di, dj)| self.map.raw(i + di, j + dj));
        (!v.iter().any(|x| x.is_nan())).then_some(v)
    }

    fn classify(&self, v: &[T; 4]) -> CellShape {
        let ins = v.map(|x| self.inside(x));
        let n_in = ins.iter().filter(|&&b| b).count();
        if n_in == 0 {
            return CellShape::Empty;
        }
        if n_in == 4 {
            return CellShape::Full;
        }
        // local edge e joins corners e and (e+1)%4
        let crossing: Vec<usize> = (0..4).filter(|&e| ins[e] != ins[(e + 1) % 4]).collect();
        if crossing.len() == 2 {
            return CellShape::Segments(vec![(crossing[0], crossing[1])]);
        }
        let center = (v[0] + v[1] + v[2] + v[3]) * T::lit(0.25);
        let center_in = self.inside(center);
        // saddle: isolate the corners on the side opposite the centre
        let isolate_p0_p2 = ins[0] != center_in;
        if isolate_p0_p2 {
            CellShape::Segments(vec![(3, 0), (1, 2)])
        } else {
            CellShape::Segments(vec![(0, 1), (2, 3)])
        }
    }

    /// Area of `{value >= level}` inside cell `(i, j)`.
    fn cell_area(&self, i: usize, j: usize) -> T {
        let Some(v) = self.corner_values(i, j) else {
            return T::zero();
        };
        let cell = self.map.dx * self.map.dy;
        match self.classify(&v) {
            CellShape::Empty => T::zero(),
            CellShape::Full => cell,
            CellShape::Segments(segs) => {
                let ins = v.map(|x| self.inside(x));
                let corner_pt = |c: usize| {
                    let (x, y) = self.map.point(i + CORNERS[c].0, j + CORNERS[c].1);
                    [x, y]
                };
                let cross_pt = |e: usize| self.crossing(self.cell_edge(i, j, e));
                let split_saddle = segs.len() == 2 && {
                    let center_in = self.inside((v[0] + v[1] + v[2] + v[3]) * T::lit(0.25));
                    !center_in
                };
                if split_saddle {
                    // two separate corner triangles
                    (0..4)
                        .filter(|&c| ins[c])
                        .map(|c| {
                            let before = (c + 3) % 4;
                            shoelace(&[cross_pt(before), corner_pt(c), cross_pt(c)]).abs()
                        })
                        .sum()
                } else {
                    let mut poly = Vec::with_capacity(6);
                    for c in 0..4 {
                        if ins[c] {
                            poly.push(corner_pt(c));
                        }
                        if ins[c] != ins[(c + 1) % 4] {
                            poly.push(cross_pt(c));
                        }
                    }
                    shoelace(&poly).abs()
                }
            }
        }
    }
}

/// Marching-squares iso-lines of `map` at `level_db`.
///
/// Levels above the map's cap yield an empty set.
pub fn extract_contours<T: Real>(map: &IpiMap<T>, level_db: T) -> ContourSet<T> {
    let empty = ContourSet { level_db, polylines: Vec::new() };
    if level_db > map.cap_db || map.nx < 2 || map.ny < 2 {
        return empty;
    }
    let m = Marcher { map, level: level_db };
    let mut segments: Vec<(EdgeId, EdgeId)> = Vec::new();
    for j in 0..map.ny - 1 {
        for i in 0..map.nx - 1 {
            let Some(v) = m.corner_values(i, j) else { continue };
            if let CellShape::Segments(segs) = m.classify(&v) {
                for (a, b) in segs {
                    segments.push((m.cell_edge(i, j, a), m.cell_edge(i, j, b)));
                }
            }
        }
    }
    if segments.is_empty() {
        return empty;
    }

    let mut by_edge: HashMap<EdgeId, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(s);
        by_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let next = |used: &[bool], edge: EdgeId| -> Option<usize> {
        by_edge.get(&edge).and_then(|ss| ss.iter().copied().find(|&s| !used[s]))
    };
    let other = |s: usize, edge: EdgeId| if segments[s].0 == edge { segments[s].1 } else { segments[s].0 };

    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, second) = segments[start];
        let mut edges = vec![first, second];
        let mut closed = false;
        let mut cur = second;
        while let Some(s) = next(&used, cur) {
            used[s] = true;
            cur = other(s, cur);
            if cur == first {
                closed = true;
                break;
            }
            edges.push(cur);
        }
        if !closed {
            let mut head = Vec::new();
            let mut cur = first;
            while let Some(s) = next(&used, cur) {
                used[s] = true;
                cur = other(s, cur);
                head.push(cur);
            }
            head.reverse();
            head.extend(edges);
            edges = head;
        }
        polylines.push(Polyline { points: edges.into_iter().map(|e| m.crossing(e)).collect(), closed });
    }
    ContourSet { level_db, polylines }
}

/// Area (m²) of the region where the map is at or above the contour level.
pub fn enclosed_area<T: Real>(contours: &ContourSet<T>, map: &IpiMap<T>) -> T {
    if contours.level_db > map.cap_db || map.nx < 2 || map.ny < 2 {
        return T::zero();
    }
    let m = Marcher { map, level: contours.level_db };
    let mut total = T::zero();
    for j in 0..map.ny - 1 {
        for i in 0..map.nx - 1 {
            total = total + m.cell_area(i, j);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region() -> Region<f64> {
        Region::new(-1.0, 1.0, -1.0, 1.0).unwrap()
    }

    fn cone(res: f64) -> IpiMap<f64> {
        IpiMap::sample(1.0, &region(), res, 40.0, |x, y| 40.0 - 50.0 * (x * x + y * y).sqrt()).unwrap()
    }

    #[test]
    fn grid_covers_region_exactly() {
        let r: Region<f64> = Region::new(-1.0, 0.0, 0.0, 2.0).unwrap();
        let (nx, ny, dx, dy) = IpiMap::grid(&r, 0.02).unwrap();
        assert_eq!((nx, ny), (51, 101));
        assert!((dx - 0.02).abs() < 1e-15 && (dy - 0.02).abs() < 1e-15);
        let (nx, _, dx, _) = IpiMap::grid(&r, 0.3).unwrap();
        assert_eq!(nx, 5);
        assert!((dx - 0.25).abs() < 1e-15);
        assert!(IpiMap::grid(&r, 0.0).is_err());
        let m = IpiMap::sample(1.0, &r, 0.3, 40.0, |_, _| 0.0).unwrap();
        assert_eq!(m.region(), r);
    }

    #[test]
    fn constant_below_level_has_no_contours() {
        let m = IpiMap::sample(1.0, &region(), 0.1, 40.0, |_, _| 10.0).unwrap();
        let c = extract_contours(&m, 20.0);
        assert!(c.is_empty());
        assert_eq!(enclosed_area(&c, &m), 0.0);
    }

    #[test]
    fn uniform_above_level_covers_everything() {
        let r: Region<f64> = Region::new(0.0, 1.5, 0.0, 0.5).unwrap();
        let m = IpiMap::sample(1.0, &r, 0.1, 40.0, |_, _| 35.0).unwrap();
        let c = extract_contours(&m, 20.0);
        assert!(c.is_empty());
        assert!((enclosed_area(&c, &m) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn level_above_cap_is_empty() {
        let m = cone(0.05);
        assert!(extract_contours(&m, 45.0).is_empty());
    }

    #[test]
    fn cone_contour_is_closed_circle() {
        let m = cone(0.02);
        let c = extract_contours(&m, 20.0);
        assert_eq!(c.polylines.len(), 1);
        let line = &c.polylines[0];
        assert!(line.closed);
        let r = 0.4;
        for p in &line.points {
            let rr = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((rr - r).abs() < 0.02, "vertex radius {rr}");
        }
        let area = enclosed_area(&c, &m);
        assert!((line.signed_area().abs() - area).abs() < 1e-12);
        assert!((area - std::f64::consts::PI * r * r).abs() / (std::f64::consts::PI * r * r) < 0.05);
    }

    #[test]
    fn saddle_resolved_by_centre() {
        let r: Region<f64> = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
        // p0 and p2 high: centre mean 25 >= 20 joins them
        let joined = IpiMap::from_values(1.0, &r, 2, 2, 40.0, vec![40.0, 10.0, 10.0, 40.0]).unwrap();
        // centre mean 17.5 < 20 splits them
        let split = IpiMap::from_values(1.0, &r, 2, 2, 40.0, vec![30.0, 10.0, 10.0, 20.0]).unwrap();
        let cj = extract_contours(&joined, 20.0);
        let cs = extract_contours(&split, 20.0);
        assert_eq!(cj.polylines.len(), 2);
        assert_eq!(cs.polylines.len(), 2);
        // joined: corners (1,0) and (0,1) cut off as triangles of legs 1/3
        assert!((enclosed_area(&cj, &joined) - (1.0 - 2.0 * (1.0 / 3.0) * (1.0 / 3.0) / 2.0)).abs() < 1e-12);
        // split: triangles at (0,0) legs 0.5, and at (1,1) degenerate (value == level)
        assert!((enclosed_area(&cs, &split) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn invalid_nodes_are_skipped() {
        let r: Region<f64> = Region::new(0.0, 2.0, 0.0, 1.0).unwrap();
        let m = IpiMap::from_values(1.0, &r, 3, 2, 40.0, vec![30.0, f64::NAN, 30.0, 30.0, 30.0, 30.0]).unwrap();
        assert_eq!(m.invalid_count(), 1);
        assert_eq!(m.truncated(1, 0), None);
        let c = extract_contours(&m, 20.0);
        assert_eq!(enclosed_area(&c, &m), 0.0);
    }

    #[test]
    fn infinite_values_count_as_inside() {
        let r: Region<f64> = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let m = IpiMap::from_values(1.0, &r, 2, 2, 40.0, vec![f64::INFINITY, 0.0, 0.0, 0.0]).unwrap();
        let c = extract_contours(&m, 20.0);
        assert_eq!(c.polylines.len(), 1);
        assert_eq!(m.truncated(0, 0), Some(40.0));
        // interpolating from +inf puts both crossings on the finite corners
        assert!((enclosed_area(&c, &m) - 0.5).abs() < 1e-15);
    }
}
