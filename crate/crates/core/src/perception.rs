//! Ground-truth convex-primitive worlds and a simulated range sensor.
//!
//! Positions are carried as `Vector3`; planar worlds keep `z = 0`.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CbfError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Obstacle {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    /// Rectangle rotated by `angle` (rad) about its center.
    Rectangle {
        center: [f64; 2],
        half_extents: [f64; 2],
        #[serde(default)]
        angle: f64,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Axis-aligned box.
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
    },
    /// Vertical cylinder spanning `z_min..z_max`.
    Cylinder {
        center: [f64; 2],
        radius: f64,
        z_min: f64,
        z_max: f64,
    },
}

/// Parameter interval `[enter, exit]` of a ray inside a convex primitive.
type Span = (f64, f64);

fn intersect(a: Span, b: Span) -> Option<Span> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    (lo <= hi).then_some((lo, hi))
}

/// Roots of `|o + t d - c|² = r²` restricted to the components in use.
fn quadratic_span(rel: &[f64], dir: &[f64], radius: f64) -> Option<Span> {
    let a: f64 = dir.iter().map(|d| d * d).sum();
    let b: f64 = rel.iter().zip(dir).map(|(o, d)| o * d).sum();
    let c: f64 = rel.iter().map(|o| o * o).sum::<f64>() - radius * radius;
    if a <= f64::EPSILON {
        // Ray parallel to the axis of a cylinder.
        return (c <= 0.0).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    Some(((-b - root) / a, (-b + root) / a))
}

fn slab(origin: f64, dir: f64, lo: f64, hi: f64) -> Option<Span> {
    if dir.abs() <= f64::EPSILON {
        return (origin >= lo && origin <= hi).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let t0 = (lo - origin) / dir;
    let t1 = (hi - origin) / dir;
    Some((t0.min(t1), t0.max(t1)))
}

impl Obstacle {
    pub fn dimension(&self) -> usize {
        match self {
            Obstacle::Circle { .. } | Obstacle::Rectangle { .. } => 2,
            _ => 3,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CbfError::Scenario(format!("obstacle {what} must be positive")))
            }
        };
        match self {
            Obstacle::Circle { radius, .. } | Obstacle::Sphere { radius, .. } => {
                positive(*radius, "radius")
            }
            Obstacle::Rectangle { half_extents, .. } => {
                half_extents.iter().try_for_each(|h| positive(*h, "half extent"))
            }
            Obstacle::Box { half_extents, .. } => {
                half_extents.iter().try_for_each(|h| positive(*h, "half extent"))
            }
            Obstacle::Cylinder {
                radius, z_min, z_max, ..
            } => {
                positive(*radius, "radius")?;
                positive(z_max - z_min, "height")
            }
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn aabb(&self) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            Obstacle::Circle { center, radius } => (
                Vector3::new(center[0] - radius, center[1] - radius, 0.0),
                Vector3::new(center[0] + radius, center[1] + radius, 0.0),
            ),
            Obstacle::Rectangle {
                center,
                half_extents,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let ex = (c * half_extents[0]).abs() + (s * half_extents[1]).abs();
                let ey = (s * half_extents[0]).abs() + (c * half_extents[1]).abs();
                (
                    Vector3::new(center[0] - ex, center[1] - ey, 0.0),
                    Vector3::new(center[0] + ex, center[1] + ey, 0.0),
                )
            }
            Obstacle::Sphere { center, radius } => {
                let c = Vector3::from(*center);
                (c.add_scalar(-radius), c.add_scalar(*radius))
            }
            Obstacle::Box {
                center,
                half_extents,
            } => {
                let c = Vector3::from(*center);
                let h = Vector3::from(*half_extents);
                (c - h, c + h)
            }
            Obstacle::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => (
                Vector3::new(center[0] - radius, center[1] - radius, *z_min),
                Vector3::new(center[0] + radius, center[1] + radius, *z_max),
            ),
        }
    }

    /// Interval of ray parameters inside the closed primitive; `dir` is unit.
    fn span(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Span> {
        match self {
            Obstacle::Circle { center, radius } => quadratic_span(
                &[origin.x - center[0], origin.y - center[1]],
                &[dir.x, dir.y],
                *radius,
            ),
            Obstacle::Sphere { center, radius } => {
                let rel = origin - Vector3::from(*center);
                quadratic_span(rel.as_slice(), dir.as_slice(), *radius)
            }
            Obstacle::Rectangle {
                center,
                half_extents,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let rel = Vector2::new(origin.x - center[0], origin.y - center[1]);
                // Rotate into the rectangle frame.
                let o = Vector2::new(c * rel.x + s * rel.y, -s * rel.x + c * rel.y);
                let d = Vector2::new(c * dir.x + s * dir.y, -s * dir.x + c * dir.y);
                let sx = slab(o.x, d.x, -half_extents[0], half_extents[0])?;
                let sy = slab(o.y, d.y, -half_extents[1], half_extents[1])?;
                intersect(sx, sy)
            }
            Obstacle::Box {
                center,
                half_extents,
            } => {
                let mut span = (f64::NEG_INFINITY, f64::INFINITY);
                for i in 0..3 {
                    let s = slab(
                        origin[i],
                        dir[i],
                        center[i] - half_extents[i],
                        center[i] + half_extents[i],
                    )?;
                    span = intersect(span, s)?;
                }
                Some(span)
            }
            Obstacle::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => {
                let radial = quadratic_span(
                    &[origin.x - center[0], origin.y - center[1]],
                    &[dir.x, dir.y],
                    *radius,
                )?;
                let vertical = slab(origin.z, dir.z, *z_min, *z_max)?;
                intersect(radial, vertical)
            }
        }
    }

    /// Distance along the ray to the first surface point, 0 when the origin is
    /// inside, `None` when the ray misses. Tangent rays count as hits.
    pub fn ray_distance(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let (enter, exit) = self.span(origin, dir)?;
        if exit < 0.0 {
            return None;
        }
        Some(enter.max(0.0))
    }

    /// Strict interior membership.
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        match self {
            Obstacle::Circle { center, radius } => {
                let dx = p.x - center[0];
                let dy = p.y - center[1];
                dx * dx + dy * dy < radius * radius
            }
            Obstacle::Sphere { center, radius } => {
                (p - Vector3::from(*center)).norm_squared() < radius * radius
            }
            Obstacle::Rectangle {
                center,
                half_extents,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let rx = p.x - center[0];
                let ry = p.y - center[1];
                let lx = c * rx + s * ry;
                let ly = -s * rx + c * ry;
                lx.abs() < half_extents[0] && ly.abs() < half_extents[1]
            }
            Obstacle::Box {
                center,
                half_extents,
            } => (0..3).all(|i| (p[i] - center[i]).abs() < half_extents[i]),
            Obstacle::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => {
                let dx = p.x - center[0];
                let dy = p.y - center[1];
                dx * dx + dy * dy < radius * radius && p.z > *z_min && p.z < *z_max
            }
        }
    }

    /// Whether `p` lies on the closed boundary within `tol`.
    pub fn on_surface(&self, p: &Vector3<f64>, tol: f64) -> bool {
        match self {
            Obstacle::Circle { center, radius } => {
                let d = ((p.x - center[0]).powi(2) + (p.y - center[1]).powi(2)).sqrt();
                (d - radius).abs() <= tol
            }
            Obstacle::Sphere { center, radius } => {
                ((p - Vector3::from(*center)).norm() - radius).abs() <= tol
            }
            Obstacle::Rectangle {
                center,
                half_extents,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let rx = p.x - center[0];
                let ry = p.y - center[1];
                let l = [c * rx + s * ry, -s * rx + c * ry];
                let inside = (0..2).all(|i| l[i].abs() <= half_extents[i] + tol);
                inside && (0..2).any(|i| (l[i].abs() - half_extents[i]).abs() <= tol)
            }
            Obstacle::Box {
                center,
                half_extents,
            } => {
                let l: Vec<f64> = (0..3).map(|i| p[i] - center[i]).collect();
                let inside = (0..3).all(|i| l[i].abs() <= half_extents[i] + tol);
                inside && (0..3).any(|i| (l[i].abs() - half_extents[i]).abs() <= tol)
            }
            Obstacle::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => {
                let d = ((p.x - center[0]).powi(2) + (p.y - center[1]).powi(2)).sqrt();
                let within = d <= radius + tol && p.z >= z_min - tol && p.z <= z_max + tol;
                within
                    && ((d - radius).abs() <= tol
                        || (p.z - z_min).abs() <= tol
                        || (p.z - z_max).abs() <= tol)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    pub dimension: usize,
    pub bounds: Bounds,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

impl World {
    pub fn new(dimension: usize, bounds: Bounds, obstacles: Vec<Obstacle>) -> Result<Self> {
        let world = Self {
            dimension,
            bounds,
            obstacles,
        };
        world.validate()?;
        Ok(world)
    }

    pub fn empty(dimension: usize, half_width: f64) -> Self {
        Self {
            dimension,
            bounds: Bounds {
                min: vec![-half_width; dimension],
                max: vec![half_width; dimension],
            },
            obstacles: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != 2 && self.dimension != 3 {
            return Err(CbfError::Scenario(format!(
                "world dimension must be 2 or 3, got {}",
                self.dimension
            )));
        }
        let d = self.dimension;
        if self.bounds.min.len() != d || self.bounds.max.len() != d {
            return Err(CbfError::Scenario("bounds must match world dimension".into()));
        }
        if (0..d).any(|i| !(self.bounds.min[i] < self.bounds.max[i])) {
            return Err(CbfError::Scenario("bounds must satisfy min < max".into()));
        }
        for (idx, obstacle) in self.obstacles.iter().enumerate() {
            if obstacle.dimension() != d {
                return Err(CbfError::Scenario(format!(
                    "obstacle {idx} is {}-D in a {d}-D world",
                    obstacle.dimension()
                )));
            }
            obstacle.validate()?;
            let (lo, hi) = obstacle.aabb();
            if (0..d).any(|i| lo[i] < self.bounds.min[i] || hi[i] > self.bounds.max[i]) {
                return Err(CbfError::Scenario(format!(
                    "obstacle {idx} extends outside the world bounds"
                )));
            }
        }
        Ok(())
    }

    /// Indices of obstacles whose interior contains `p`.
    pub fn penetrated_by(&self, p: &Vector3<f64>) -> Vec<usize> {
        self.obstacles
            .iter()
            .enumerate()
            .filter(|(_, o)| o.contains(p))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_free(&self, p: &Vector3<f64>) -> bool {
        !self.obstacles.iter().any(|o| o.contains(p))
    }
}

/// Range to the nearest obstacle surface along a unit ray, capped at `r_bar`.
/// An origin inside an obstacle reports 0.
pub fn raycast(world: &World, origin: &Vector3<f64>, dir: &Vector3<f64>, r_bar: f64) -> f64 {
    world
        .obstacles
        .iter()
        .filter_map(|o| o.ray_distance(origin, dir))
        .fold(r_bar, f64::min)
}

/// Sensor field of view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fov {
    Full,
    /// Angular sector of the given full width (rad), centered on the heading.
    Sector(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanParams {
    pub rays: usize,
    pub r_bar: f64,
    pub fov: Fov,
    /// Vehicle heading (rad); only used for sector fields of view.
    pub heading: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub azimuth: f64,
    /// Elevation above the horizontal plane; zero in planar worlds.
    pub elevation: f64,
    pub direction: Vector3<f64>,
    pub range: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub dimension: usize,
    pub origin: Vector3<f64>,
    pub rays: Vec<Ray>,
    pub r_bar: f64,
    pub fov: Fov,
    pub heading: f64,
    pub epoch: u64,
}

impl Scan {
    pub fn detection_point(&self, ray: &Ray) -> Vector3<f64> {
        self.origin + ray.range * ray.direction
    }
}

fn direction(azimuth: f64, elevation: f64) -> Vector3<f64> {
    let (sa, ca) = azimuth.sin_cos();
    let (se, ce) = elevation.sin_cos();
    Vector3::new(ce * ca, ce * sa, se)
}

/// Elevation rows for a 3-D scan of `rays` points: the divisor of `rays`
/// closest to `sqrt(rays / 2)`, so azimuth spacing is about twice as fine as
/// the elevation spacing would be on a unit grid.
fn elevation_rows(rays: usize) -> usize {
    let target = (rays as f64 / 2.0).sqrt();
    (1..=rays)
        .filter(|d| rays.is_multiple_of(*d))
        .min_by(|a, b| {
            let da = (*a as f64 - target).abs();
            let db = (*b as f64 - target).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap_or(1)
}

/// Ray directions `(azimuth, elevation)` of a scan pattern.
pub fn scan_pattern(dimension: usize, params: &ScanParams) -> Result<Vec<(f64, f64)>> {
    if params.rays == 0 {
        return Err(CbfError::InvalidArgument("scan needs at least one ray".into()));
    }
    let p = params.rays;
    match (dimension, params.fov) {
        (2, Fov::Full) => Ok((0..p).map(|i| (2.0 * PI * i as f64 / p as f64, 0.0)).collect()),
        (2, Fov::Sector(width)) => {
            if p == 1 {
                return Ok(vec![(params.heading, 0.0)]);
            }
            let start = params.heading - width / 2.0;
            Ok((0..p)
                .map(|i| (start + width * i as f64 / (p - 1) as f64, 0.0))
                .collect())
        }
        (3, Fov::Full) => {
            let rows = elevation_rows(p);
            let cols = p / rows;
            let mut out = Vec::with_capacity(p);
            for j in 0..rows {
                let elevation = -PI / 2.0 + (j as f64 + 0.5) * PI / rows as f64;
                for i in 0..cols {
                    out.push((2.0 * PI * i as f64 / cols as f64, elevation));
                }
            }
            Ok(out)
        }
        (3, Fov::Sector(_)) => Err(CbfError::InvalidArgument(
            "limited field of view is only supported in planar worlds".into(),
        )),
        (d, _) => Err(CbfError::InvalidArgument(format!("unsupported dimension {d}"))),
    }
}

pub fn scan(world: &World, origin: &Vector3<f64>, params: &ScanParams, epoch: u64) -> Result<Scan> {
    if !(params.r_bar.is_finite() && params.r_bar > 0.0) {
        return Err(CbfError::InvalidArgument("sensor range must be positive".into()));
    }
    let pattern = scan_pattern(world.dimension, params)?;
    let rays = pattern
        .into_iter()
        .map(|(azimuth, elevation)| {
            let direction = direction(azimuth, elevation);
            let range = raycast(world, origin, &direction, params.r_bar);
            Ray {
                azimuth,
                elevation,
                direction,
                range,
            }
        })
        .collect();
    Ok(Scan {
        dimension: world.dimension,
        origin: *origin,
        rays,
        r_bar: params.r_bar,
        fov: params.fov,
        heading: params.heading,
        epoch,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FovBoundarySamples {
    pub origin: Vector3<f64>,
    pub heading: f64,
    /// Sector width (rad).
    pub fov: f64,
    pub points: Vec<Vector3<f64>>,
}

impl FovBoundarySamples {
    /// `count` unit directions spread evenly over the unseen part of the
    /// circle, from the left edge round to the right edge.
    pub fn rear_directions(&self, count: usize) -> Vec<Vector3<f64>> {
        let left = self.heading + self.fov / 2.0;
        let gap = 2.0 * PI - self.fov;
        (0..count)
            .map(|j| direction(left + (j as f64 + 0.5) * gap / count as f64, 0.0))
            .collect()
    }
}

/// `count` points along the closed boundary of a planar sensor sector:
/// out along the right edge, across the outer arc, back along the left edge.
/// Samples sit at the midpoints of `count` equal arc-length cells.
pub fn fov_boundary(
    origin: &Vector3<f64>,
    heading: f64,
    fov: f64,
    r_bar: f64,
    count: usize,
) -> Result<FovBoundarySamples> {
    if !(fov > 0.0 && fov < 2.0 * PI) {
        return Err(CbfError::InvalidArgument(
            "field-of-view boundary needs a sector narrower than a full circle".into(),
        ));
    }
    if count < 2 {
        return Err(CbfError::InvalidArgument("need at least two boundary samples".into()));
    }
    if !(r_bar.is_finite() && r_bar > 0.0) {
        return Err(CbfError::InvalidArgument("sensor range must be positive".into()));
    }
    let right = heading - fov / 2.0;
    let left = heading + fov / 2.0;
    let arc = r_bar * fov;
    let total = 2.0 * r_bar + arc;
    let points = (0..count)
        .map(|j| {
            let s = (j as f64 + 0.5) * total / count as f64;
            let local = if s <= r_bar {
                s * direction(right, 0.0)
            } else if s <= r_bar + arc {
                r_bar * direction(right + (s - r_bar) / r_bar, 0.0)
            } else {
                (total - s) * direction(left, 0.0)
            };
            origin + local
        })
        .collect();
    Ok(FovBoundarySamples {
        origin: *origin,
        heading,
        fov,
        points,
    })
}
