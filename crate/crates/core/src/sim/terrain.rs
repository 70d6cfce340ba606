//! Laterally level road terrain defined by elevation along arclength.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Point;

/// One piece of the elevation profile. Elevation is continuous across pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Segment {
    Flat {
        length: f64,
    },
    /// Constant rise per horizontal meter.
    Ramp {
        length: f64,
        slope: f64,
    },
    /// `amplitude * sin(2 pi u / wavelength)` from the segment start.
    Hill {
        length: f64,
        amplitude: f64,
        wavelength: f64,
    },
}

impl Segment {
    /// Ramp whose wheelbase grade `asin(slope)` equals `grade_deg`.
    pub fn ramp_degrees(length: f64, grade_deg: f64) -> Self {
        Segment::Ramp {
            length,
            slope: grade_deg.to_radians().sin(),
        }
    }

    /// Hill whose steepest slope has grade `grade_deg`.
    pub fn hill_degrees(length: f64, grade_deg: f64, wavelength: f64) -> Self {
        Segment::Hill {
            length,
            amplitude: grade_deg.to_radians().sin() * wavelength / TAU,
            wavelength,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Flat { length } | Segment::Ramp { length, .. } | Segment::Hill { length, .. } => length,
        }
    }

    fn offset(&self, u: f64) -> f64 {
        match *self {
            Segment::Flat { .. } => 0.0,
            Segment::Ramp { slope, .. } => slope * u,
            Segment::Hill {
                amplitude,
                wavelength,
                ..
            } => amplitude * (TAU * u / wavelength).sin(),
        }
    }

    fn slope(&self, u: f64) -> f64 {
        match *self {
            Segment::Flat { .. } => 0.0,
            Segment::Ramp { slope, .. } => slope,
            Segment::Hill {
                amplitude,
                wavelength,
                ..
            } => amplitude * TAU / wavelength * (TAU * u / wavelength).cos(),
        }
    }

    fn max_abs_slope(&self) -> f64 {
        match *self {
            Segment::Flat { .. } => 0.0,
            Segment::Ramp { slope, .. } => slope.abs(),
            Segment::Hill {
                amplitude,
                wavelength,
                ..
            } => (amplitude * TAU / wavelength).abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        let length = self.length();
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Scenario(format!("segment length must be > 0, got {length}")));
        }
        match *self {
            Segment::Ramp { slope, .. } if !slope.is_finite() => {
                Err(Error::Scenario("ramp slope must be finite".into()))
            }
            Segment::Hill {
                amplitude,
                wavelength,
                ..
            } if !(amplitude.is_finite() && wavelength.is_finite() && wavelength > 0.0) => Err(
                Error::Scenario("hill needs finite amplitude and wavelength > 0".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Piecewise elevation profile `z(s)`. Before the first segment and past the
/// last one the road continues flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct TerrainProfile {
    segments: Vec<Segment>,
    start_elevation: f64,
    max_grade_deg: f64,
    starts: Vec<f64>,
    base: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawProfile {
    segments: Vec<Segment>,
    #[serde(default)]
    start_elevation: f64,
    #[serde(default = "default_max_grade")]
    max_grade_deg: f64,
}

fn default_max_grade() -> f64 {
    TerrainProfile::DEFAULT_MAX_GRADE_DEG
}

impl TryFrom<RawProfile> for TerrainProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        TerrainProfile::with_limits(raw.segments, raw.start_elevation, raw.max_grade_deg)
    }
}

impl From<TerrainProfile> for RawProfile {
    fn from(t: TerrainProfile) -> Self {
        RawProfile {
            segments: t.segments,
            start_elevation: t.start_elevation,
            max_grade_deg: t.max_grade_deg,
        }
    }
}

impl TerrainProfile {
    pub const DEFAULT_MAX_GRADE_DEG: f64 = 10.0;

    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        Self::with_limits(segments, 0.0, Self::DEFAULT_MAX_GRADE_DEG)
    }

    pub fn flat(length: f64) -> Result<Self> {
        Self::new(vec![Segment::Flat { length }])
    }

    pub fn with_limits(segments: Vec<Segment>, start_elevation: f64, max_grade_deg: f64) -> Result<Self> {
        if !start_elevation.is_finite() {
            return Err(Error::Scenario("start elevation must be finite".into()));
        }
        if !(max_grade_deg > 0.0 && max_grade_deg < 90.0) {
            return Err(Error::Scenario(format!(
                "max grade must be in (0, 90) degrees, got {max_grade_deg}"
            )));
        }
        let limit = max_grade_deg.to_radians().sin();
        let mut starts = Vec::with_capacity(segments.len());
        let mut base = Vec::with_capacity(segments.len());
        let (mut s, mut z) = (0.0, start_elevation);
        for seg in &segments {
            seg.validate()?;
            // A span of one wheelbase can never be steeper than the steepest
            // local slope.
            let steepest = seg.max_abs_slope();
            if steepest >= 1.0 {
                return Err(Error::Scenario(format!(
                    "segment slope {steepest} implies a grade beyond 90 degrees"
                )));
            }
            if steepest > limit + 1e-12 {
                return Err(Error::Scenario(format!(
                    "segment grade {:.3} deg exceeds the {max_grade_deg} deg limit",
                    steepest.asin().to_degrees()
                )));
            }
            starts.push(s);
            base.push(z);
            z += seg.offset(seg.length());
            s += seg.length();
        }
        Ok(Self {
            segments,
            start_elevation,
            max_grade_deg,
            starts,
            base,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    fn locate(&self, s: f64) -> Option<usize> {
        if self.segments.is_empty() || s < 0.0 || s >= self.total_length() {
            return None;
        }
        Some(self.starts.partition_point(|start| *start <= s) - 1)
    }

    fn end_elevation(&self) -> f64 {
        match self.segments.last() {
            Some(seg) => self.base[self.segments.len() - 1] + seg.offset(seg.length()),
            None => self.start_elevation,
        }
    }

    pub fn elevation(&self, s: f64) -> f64 {
        if s < 0.0 {
            return self.start_elevation;
        }
        match self.locate(s) {
            Some(k) => self.base[k] + self.segments[k].offset(s - self.starts[k]),
            None => self.end_elevation(),
        }
    }

    /// `dz/ds`.
    pub fn slope(&self, s: f64) -> f64 {
        match self.locate(s) {
            Some(k) => self.segments[k].slope(s - self.starts[k]),
            None => 0.0,
        }
    }

    /// Grade over a wheelbase centered at `s`, in radians.
    pub fn wheelbase_grade(&self, s: f64, wheelbase: f64) -> f64 {
        let dz = self.elevation(s + wheelbase / 2.0) - self.elevation(s - wheelbase / 2.0);
        (dz / wheelbase).asin()
    }

    fn max_elevation(&self) -> f64 {
        let mut hi = self.start_elevation.max(self.end_elevation());
        for (k, seg) in self.segments.iter().enumerate() {
            let end = self.base[k] + seg.offset(seg.length());
            hi = hi.max(end);
            if let Segment::Hill { amplitude, .. } = seg {
                hi = hi.max(self.base[k] + amplitude.abs());
            }
        }
        hi
    }
}

/// Straight road with its terrain profile, starting at `origin` and running
/// along heading `heading` (radians from +y toward +x).
#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub terrain: TerrainProfile,
    pub origin: [f64; 2],
    pub heading: f64,
    direction: [f64; 2],
    ceiling: f64,
}

/// Root-finding tolerance on the ray parameter (meters).
const RAY_TOLERANCE: f64 = 1e-10;

impl Road {
    pub fn new(terrain: TerrainProfile, origin: [f64; 2], heading: f64) -> Self {
        let ceiling = terrain.max_elevation();
        Self {
            terrain,
            origin,
            heading,
            direction: [heading.sin(), heading.cos()],
            ceiling,
        }
    }

    pub fn direction(&self) -> [f64; 2] {
        self.direction
    }

    /// Arclength coordinate of a horizontal position.
    pub fn arclength(&self, x: f64, y: f64) -> f64 {
        (x - self.origin[0]) * self.direction[0] + (y - self.origin[1]) * self.direction[1]
    }

    /// Horizontal position at arclength `s` on the centerline.
    pub fn position(&self, s: f64) -> [f64; 2] {
        [
            self.origin[0] + s * self.direction[0],
            self.origin[1] + s * self.direction[1],
        ]
    }

    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        self.terrain.elevation(self.arclength(x, y))
    }

    /// Distance along the unit ray `origin + t * dir` to the first terrain
    /// crossing, if one exists within `max_range`.
    pub fn intersect(&self, origin: &Point, dir: &Vector3<f64>, max_range: f64) -> Option<f64> {
        if dir.z >= 0.0 && origin.z > self.ceiling {
            return None;
        }
        let s0 = self.arclength(origin.x, origin.y);
        let a = dir.x * self.direction[0] + dir.y * self.direction[1];
        let height = |t: f64| origin.z + dir.z * t - self.terrain.elevation(s0 + a * t);
        if height(0.0) <= 0.0 {
            return Some(0.0);
        }

        // Split the ray where it crosses segment boundaries so that each
        // interval sees a single analytic piece.
        let mut cuts = vec![0.0, max_range];
        if a != 0.0 {
            let ends = self
                .terrain
                .starts
                .iter()
                .copied()
                .chain(std::iter::once(self.terrain.total_length()));
            for b in ends {
                let t = (b - s0) / a;
                if t > 0.0 && t < max_range {
                    cuts.push(t);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);

        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let mid_s = s0 + a * 0.5 * (lo + hi);
            let piece = self.terrain.locate(mid_s);
            let curved = matches!(piece.map(|k| &self.terrain.segments[k]), Some(Segment::Hill { .. }));
            let hit = if curved {
                let Segment::Hill { wavelength, .. } = self.terrain.segments[piece.unwrap()] else {
                    unreachable!()
                };
                first_root(&height, lo, hi, (a.abs() * (hi - lo) * 16.0 / wavelength).ceil() as usize)
            } else {
                // Planar piece: the height above terrain is linear in t.
                let (f_lo, f_hi) = (height(lo), height(hi));
                if f_lo > 0.0 && f_hi <= 0.0 {
                    let t = lo + (hi - lo) * f_lo / (f_lo - f_hi);
                    Some(polish(&height, t, lo, hi))
                } else if f_lo <= 0.0 {
                    Some(lo)
                } else {
                    None
                }
            };
            if hit.is_some() {
                return hit;
            }
        }
        None
    }
}

/// Tightens an interpolated root of a linear function against rounding.
fn polish(f: &impl Fn(f64) -> f64, t: f64, lo: f64, hi: f64) -> f64 {
    let t = t.clamp(lo, hi);
    let ft = f(t);
    if ft.abs() < 1e-12 {
        return t;
    }
    let (a, b) = if ft > 0.0 { (t, hi) } else { (lo, t) };
    bisect(f, a, b)
}

/// First sign change of `f` on `[lo, hi]` scanned in `steps` pieces.
fn first_root(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> Option<f64> {
    let steps = steps.max(1);
    let dt = (hi - lo) / steps as f64;
    let mut a = lo;
    let mut fa = f(a);
    if fa <= 0.0 {
        return Some(lo);
    }
    for k in 1..=steps {
        let b = if k == steps { hi } else { lo + dt * k as f64 };
        let fb = f(b);
        if fb <= 0.0 {
            return Some(bisect(f, a, b));
        }
        a = b;
        fa = fb;
    }
    let _ = fa;
    None
}

/// Bisection for `f(a) > 0 >= f(b)`, seeded by false position steps.
fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    let mut fb = f(b);
    let mut use_secant = true;
    while b - a > RAY_TOLERANCE {
        let mid = if use_secant && fa > fb {
            let t = a + (b - a) * fa / (fa - fb);
            if t > a && t < b { t } else { 0.5 * (a + b) }
        } else {
            0.5 * (a + b)
        };
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        let before = b - a;
        if fm > 0.0 {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
        // Fall back to halving when false position stalls on one side.
        use_secant = b - a < 0.5 * before;
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rolling() -> TerrainProfile {
        TerrainProfile::new(vec![
            Segment::Flat { length: 50.0 },
            Segment::hill_degrees(400.0, 2.0, 200.0),
            Segment::ramp_degrees(100.0, 3.0),
        ])
        .unwrap()
    }

    #[test]
    fn elevation_is_continuous() {
        let t = rolling();
        for s in [50.0, 450.0] {
            assert_close!(t.elevation(s - 1e-9), t.elevation(s + 1e-9), 1e-9);
        }
        assert_eq!(t.elevation(-5.0), 0.0);
        assert_close!(t.elevation(1000.0), t.elevation(550.0), 1e-12);
    }

    #[test]
    fn ramp_grade_closed_form() {
        let t = TerrainProfile::new(vec![Segment::Ramp { length: 100.0, slope: 0.054 }]).unwrap();
        let g = t.wheelbase_grade(50.0, 3.09).to_degrees();
        assert_close!(g, 0.054f64.asin().to_degrees(), 1e-9);
        assert_close!(g, 3.0955, 1e-3);
    }

    #[test]
    fn hill_slope_matches_finite_difference() {
        let t = rolling();
        for s in [60.0, 100.0, 150.0, 301.0] {
            let h = 1e-5;
            let fd = (t.elevation(s + h) - t.elevation(s - h)) / (2.0 * h);
            assert_close!(t.slope(s), fd, 1e-8);
        }
        // Steepest at the inflection points of the sine, 2 degrees.
        assert_close!(t.slope(50.0).asin().to_degrees(), 2.0, 1e-9);
    }

    #[test]
    fn excessive_grade_rejected() {
        assert!(TerrainProfile::new(vec![Segment::ramp_degrees(10.0, 12.0)]).is_err());
        assert!(TerrainProfile::with_limits(vec![Segment::Ramp { length: 10.0, slope: 1.5 }], 0.0, 89.0).is_err());
        assert!(TerrainProfile::new(vec![Segment::Flat { length: 0.0 }]).is_err());
    }

    #[test]
    fn vertical_ray_on_flat_ground() {
        let road = Road::new(TerrainProfile::flat(100.0).unwrap(), [0.0, 0.0], 0.0);
        let t = road.intersect(&Point::new(0.0, 10.0, 1.9), &-Vector3::z(), 100.0).unwrap();
        assert_close!(t, 1.9, 1e-12);
    }

    #[test]
    fn rays_land_on_surface() {
        let road = Road::new(rolling(), [3.0, -2.0], 0.4);
        let origin = Point::new(3.0 + 20.0 * 0.4f64.sin(), -2.0 + 20.0 * 0.4f64.cos(), 2.5);
        let mut hits = 0;
        for k in 0..720 {
            let az = k as f64 * 0.5f64.to_radians();
            for el in [-25.0f64, -8.0, -3.0, -1.0, -0.3, 0.5] {
                let el = el.to_radians();
                let dir = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                if let Some(t) = road.intersect(&origin, &dir, 150.0) {
                    let p = origin + dir * t;
                    assert!((p.z - road.height_at(p.x, p.y)).abs() < 1e-9);
                    hits += 1;
                }
            }
        }
        assert!(hits > 2000);
    }

    #[test]
    fn upward_ray_misses() {
        let road = Road::new(TerrainProfile::flat(100.0).unwrap(), [0.0, 0.0], 0.0);
        assert!(road.intersect(&Point::new(0.0, 0.0, 2.0), &Vector3::z(), 100.0).is_none());
    }

    #[test]
    fn profile_serde_roundtrip() {
        let t = rolling();
        let text = toml::to_string(&t).unwrap();
        let back: TerrainProfile = toml::from_str(&text).unwrap();
        assert_eq!(back, t);
    }
}
