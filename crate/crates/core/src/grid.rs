//! Spatial discretization of the vessel.
//!
//! Depth `z` points downwards with the feed inlet at `z = 0`, the effluent
//! level at `z = -H` and the underflow level at `z = B`. The tank is split
//! into `N` layers of depth `Δz = (B + H)/N`; one extra layer above and below
//! carries the effluent and underflow concentrations, giving `N + 2` cells.
//!
//! Indexing: cell `j ∈ 0..=N+1`; face `i ∈ 0..=N+2` sits at
//! `z = -H + (i - 1)Δz`, so cell `j` is bounded by face `j` above and face
//! `j + 1` below. Face `i` is the half-index face `i - 1/2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JOINT_TOL: f64 = 1e-9;

/// Cross-section shape over one depth interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Cylinder { radius: f64 },
    /// Radius varies linearly from `top_radius` to `bottom_radius`.
    Cone { top_radius: f64, bottom_radius: f64 },
    /// Constant area section given directly in m².
    Step { area: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub top: f64,
    pub bottom: f64,
    pub shape: Shape,
}

impl Segment {
    pub fn cylinder_with_area(top: f64, bottom: f64, area: f64) -> Self {
        Self {
            top,
            bottom,
            shape: Shape::Cylinder {
                radius: (area / PI).sqrt(),
            },
        }
    }

    pub fn cone_with_areas(top: f64, bottom: f64, top_area: f64, bottom_area: f64) -> Self {
        Self {
            top,
            bottom,
            shape: Shape::Cone {
                top_radius: (top_area / PI).sqrt(),
                bottom_radius: (bottom_area / PI).sqrt(),
            },
        }
    }

    fn radius_at(&self, z: f64) -> Option<f64> {
        match self.shape {
            Shape::Cylinder { radius } => Some(radius),
            Shape::Cone {
                top_radius,
                bottom_radius,
            } => {
                let s = (z - self.top) / (self.bottom - self.top);
                Some(top_radius + (bottom_radius - top_radius) * s)
            }
            Shape::Step { .. } => None,
        }
    }

    fn area_at(&self, z: f64) -> f64 {
        match self.shape {
            Shape::Step { area } => area,
            _ => {
                let r = self.radius_at(z).unwrap();
                PI * r * r
            }
        }
    }

    /// Exact `∫_a^b A(z) dz` for `[a, b] ⊂ [top, bottom]`.
    fn integral(&self, a: f64, b: f64) -> f64 {
        match self.shape {
            Shape::Step { area } => area * (b - a),
            _ => {
                let ra = self.radius_at(a).unwrap();
                let rb = self.radius_at(b).unwrap();
                PI * (b - a) * (ra * ra + ra * rb + rb * rb) / 3.0
            }
        }
    }
}

/// Piecewise cross-sectional area `A(z)` over `[-H, B]`, extended by the end
/// values outside the vessel. Joints may be discontinuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AreaProfile {
    pub segments: Vec<Segment>,
}

impl AreaProfile {
    pub fn constant(area: f64, top: f64, bottom: f64) -> Self {
        Self {
            segments: vec![Segment {
                top,
                bottom,
                shape: Shape::Step { area },
            }],
        }
    }

    /// Stand-in for the axisymmetric vessel of the variable-area examples:
    /// a 450 m² cylinder on `[-1, 0.5]`, a cone tapering to 120 m² on
    /// `[0.5, 3]` and a 120 m² cylinder on `[3, 4]`.
    pub fn v7like() -> Self {
        Self {
            segments: vec![
                Segment::cylinder_with_area(-1.0, 0.5, 450.0),
                Segment::cone_with_areas(0.5, 3.0, 450.0, 120.0),
                Segment::cylinder_with_area(3.0, 4.0, 120.0),
            ],
        }
    }

    /// Checks that the segments partition `[-H, B]` with positive areas.
    pub fn validate(&self, h: f64, b: f64) -> Result<()> {
        let path = |i: usize, f: &str| format!("geometry.segments[{i}].{f}");
        if self.segments.is_empty() {
            return Err(Error::config("geometry.segments", "no segments given"));
        }
        let first = &self.segments[0];
        if (first.top + h).abs() > JOINT_TOL {
            return Err(Error::config(path(0, "top"), format!("must start at -H = {}", -h)));
        }
        let last = self.segments.len() - 1;
        if (self.segments[last].bottom - b).abs() > JOINT_TOL {
            return Err(Error::config(path(last, "bottom"), format!("must end at B = {b}")));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.bottom > s.top) {
                return Err(Error::config(path(i, "bottom"), "must lie below top"));
            }
            if i > 0 && (s.top - self.segments[i - 1].bottom).abs() > JOINT_TOL {
                return Err(Error::config(path(i, "top"), "segments must be contiguous"));
            }
            let ok = match s.shape {
                Shape::Cylinder { radius } => radius > 0.0,
                Shape::Cone {
                    top_radius,
                    bottom_radius,
                } => top_radius > 0.0 && bottom_radius > 0.0,
                Shape::Step { area } => area > 0.0,
            };
            if !ok {
                return Err(Error::config(path(i, "shape"), "areas must be positive"));
            }
        }
        Ok(())
    }

    fn top(&self) -> f64 {
        self.segments[0].top
    }

    fn bottom(&self) -> f64 {
        self.segments[self.segments.len() - 1].bottom
    }

    /// Point value; at a joint the mean of both one-sided limits.
    pub fn area_at(&self, z: f64) -> f64 {
        let first = &self.segments[0];
        let last = &self.segments[self.segments.len() - 1];
        if z <= self.top() {
            return first.area_at(first.top);
        }
        if z >= self.bottom() {
            return last.area_at(last.bottom);
        }
        for (i, s) in self.segments.iter().enumerate() {
            if z < s.bottom {
                return s.area_at(z);
            }
            if z == s.bottom {
                let next = &self.segments[i + 1];
                return 0.5 * (s.area_at(z) + next.area_at(z));
            }
        }
        unreachable!()
    }

    /// Exact `∫_a^b A(z) dz`, using the constant extension outside the vessel.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        debug_assert!(b >= a);
        let (top, bottom) = (self.top(), self.bottom());
        let first = &self.segments[0];
        let last = &self.segments[self.segments.len() - 1];
        let mut total = 0.0;
        if a < top {
            total += first.area_at(first.top) * (b.min(top) - a);
        }
        if b > bottom {
            total += last.area_at(last.bottom) * (b - a.max(bottom));
        }
        for s in &self.segments {
            let lo = a.max(s.top);
            let hi = b.min(s.bottom);
            if hi > lo {
                total += s.integral(lo, hi);
            }
        }
        total
    }
}

/// How face areas are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceAreaMode {
    /// Average of `A` between the neighbouring cell centres.
    #[default]
    CellAverage,
    /// `A(z_{j+1/2})`; meant for continuous profiles.
    PointValue,
}

/// Area-ratio constants and smallest area entering the CFL condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaConstants {
    pub m1: f64,
    pub m2: f64,
    pub a_min: f64,
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub h: f64,
    pub b: f64,
    pub n: usize,
    pub dz: f64,
    /// Feed layer, `⌈H/Δz⌉`.
    pub feed_cell: usize,
    pub z_cells: Vec<f64>,
    pub z_faces: Vec<f64>,
    pub a_cells: Vec<f64>,
    pub a_faces: Vec<f64>,
    pub gamma_cells: Vec<f64>,
    pub gamma_faces: Vec<f64>,
    pub constants: AreaConstants,
}

impl Grid {
    pub fn build(profile: &AreaProfile, h: f64, b: f64, n: usize, mode: FaceAreaMode) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("run.cells", "need at least 2 cells"));
        }
        if !(h > 0.0 && b > 0.0) {
            return Err(Error::config("geometry", "H and B must be positive"));
        }
        profile.validate(h, b)?;
        let dz = (b + h) / n as f64;
        let feed_cell = ceil_tolerant(h / dz).clamp(1, n);

        let cells = n + 2;
        let faces = n + 3;
        let z_face = |i: usize| -h + (i as f64 - 1.0) * dz;
        let z_cell = |j: usize| -h + (j as f64 - 0.5) * dz;
        let z_faces: Vec<f64> = (0..faces).map(z_face).collect();
        let z_cells: Vec<f64> = (0..cells).map(z_cell).collect();

        let a_cells: Vec<f64> = (0..cells)
            .map(|j| profile.integral(z_face(j), z_face(j + 1)) / dz)
            .collect();
        let a_faces: Vec<f64> = (0..faces)
            .map(|i| match mode {
                FaceAreaMode::CellAverage => {
                    profile.integral(z_face(i) - 0.5 * dz, z_face(i) + 0.5 * dz) / dz
                }
                FaceAreaMode::PointValue => profile.area_at(z_face(i)),
            })
            .collect();

        let gamma_cells = (0..cells)
            .map(|j| if (1..=n).contains(&j) { 1.0 } else { 0.0 })
            .collect();
        let gamma_faces = (0..faces)
            .map(|i| if (2..=n).contains(&i) { 1.0 } else { 0.0 })
            .collect();

        let mut grid = Self {
            h,
            b,
            n,
            dz,
            feed_cell,
            z_cells,
            z_faces,
            a_cells,
            a_faces,
            gamma_cells,
            gamma_faces,
            constants: AreaConstants {
                m1: 0.0,
                m2: 0.0,
                a_min: 0.0,
            },
        };
        grid.constants = area_constants(&grid)?;
        Ok(grid)
    }

    pub fn cells(&self) -> usize {
        self.n + 2
    }

    pub fn faces(&self) -> usize {
        self.n + 3
    }

    pub fn has_constant_area(&self) -> bool {
        let a0 = self.a_cells[0];
        let close = |a: f64| (a - a0).abs() <= 1e-12 * a0;
        self.a_cells.iter().all(|&a| close(a)) && self.a_faces.iter().all(|&a| close(a))
    }

    pub fn volume(&self, j: usize) -> f64 {
        self.a_cells[j] * self.dz
    }
}

fn ceil_tolerant(r: f64) -> usize {
    let k = r.round();
    if (r - k).abs() <= 1e-9 * r.max(1.0) {
        k as usize
    } else {
        r.ceil() as usize
    }
}

/// `M1 = max A_{j±1/2}/A_j`, `M2 = max (A_{j+1/2}+A_{j-1/2})/A_j` and the
/// smallest cell area.
///
/// The maxima run over all `N + 2` cells. The effluent and underflow cells
/// also take the explicit update, so including them keeps the CFL condition
/// valid there.
pub fn area_constants(grid: &Grid) -> Result<AreaConstants> {
    let mut m1 = 0.0f64;
    let mut m2 = 0.0f64;
    let mut a_min = f64::INFINITY;
    for j in 0..grid.cells() {
        let (above, here, below) = (grid.a_faces[j], grid.a_cells[j], grid.a_faces[j + 1]);
        if !(here > 0.0 && above > 0.0 && below > 0.0) {
            return Err(Error::config("geometry", format!("nonpositive area at cell {j}")));
        }
        m1 = m1.max(above / here).max(below / here);
        m2 = m2.max((above + below) / here);
        a_min = a_min.min(here);
    }
    Ok(AreaConstants { m1, m2, a_min })
}
