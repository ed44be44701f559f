use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::atlas::DirectionAtlas;
use crate::error::{invalid, Error, Result};

/// Shape of the initial radial field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RadialProfile {
    Sphere {
        radius: f64,
    },
    /// Semi-axes along x, y (and z for surfaces). A missing `c` defaults to `b`.
    Ellipsoid {
        a: f64,
        b: f64,
        c: Option<f64>,
    },
    /// `r = R + amplitude·ψ(θ)` with a smooth seeded field `ψ` scaled so that
    /// `max |ψ| = 1` over the atlas.
    PerturbedSphere {
        radius: f64,
        amplitude: f64,
        seed: u64,
    },
}

impl fmt::Display for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialProfile::Sphere { radius } => write!(f, "sphere({radius})"),
            RadialProfile::Ellipsoid { a, b, c: None } => write!(f, "ellipsoid({a},{b})"),
            RadialProfile::Ellipsoid { a, b, c: Some(c) } => write!(f, "ellipsoid({a},{b},{c})"),
            RadialProfile::PerturbedSphere {
                radius,
                amplitude,
                seed,
            } => write!(f, "perturbed_sphere({radius},{amplitude},{seed})"),
        }
    }
}

impl FromStr for RadialProfile {
    type Err = Error;

    /// Parses `sphere(R)`, `ellipsoid(a,b[,c])` or `perturbed_sphere(R,amp,seed)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| Error::InvalidArgument(format!("malformed shape `{s}`")))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| Error::InvalidArgument(format!("malformed shape `{s}`")))?;
        let nums: Vec<&str> = args.split(',').map(str::trim).collect();
        let num = |k: usize| -> Result<f64> {
            nums.get(k)
                .ok_or_else(|| Error::InvalidArgument(format!("shape `{s}` is missing argument {k}")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("shape `{s}`: {e}")))
        };
        match (name.trim(), nums.len()) {
            ("sphere", 1) => Ok(RadialProfile::Sphere { radius: num(0)? }),
            ("ellipsoid", 2) => Ok(RadialProfile::Ellipsoid {
                a: num(0)?,
                b: num(1)?,
                c: None,
            }),
            ("ellipsoid", 3) => Ok(RadialProfile::Ellipsoid {
                a: num(0)?,
                b: num(1)?,
                c: Some(num(2)?),
            }),
            ("perturbed_sphere", 3) => Ok(RadialProfile::PerturbedSphere {
                radius: num(0)?,
                amplitude: num(1)?,
                seed: nums[2]
                    .parse::<u64>()
                    .map_err(|e| Error::InvalidArgument(format!("shape `{s}` seed: {e}")))?,
            }),
            _ => invalid(format!("unknown shape `{s}`")),
        }
    }
}

impl TryFrom<String> for RadialProfile {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RadialProfile> for String {
    fn from(p: RadialProfile) -> String {
        p.to_string()
    }
}

/// A closed star-shaped hypersurface `X_i = r_i θ_i` at flow time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarSurface {
    atlas: Arc<DirectionAtlas>,
    radii: Vec<f64>,
    t: f64,
}

impl StarSurface {
    /// Wraps a radial field; every radius must be positive and finite.
    pub fn new(atlas: Arc<DirectionAtlas>, radii: Vec<f64>, t: f64) -> Result<Self> {
        if radii.len() != atlas.len() {
            return invalid(format!(
                "radial field has {} entries for an atlas of {} directions",
                radii.len(),
                atlas.len()
            ));
        }
        if let Some((i, r)) = radii.iter().enumerate().find(|(_, r)| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::DegenerateShape(format!("radius r[{i}] = {r} is not positive")));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return invalid(format!("flow time {t} must be finite and nonnegative"));
        }
        Ok(StarSurface { atlas, radii, t })
    }

    pub fn atlas(&self) -> &Arc<DirectionAtlas> {
        &self.atlas
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.atlas.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.atlas.dim() + 1
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn position(&self, i: usize) -> Vector3<f64> {
        self.atlas.directions()[i] * self.radii[i]
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        (0..self.len()).map(|i| self.position(i)).collect()
    }

    pub fn mean_radius(&self) -> f64 {
        self.radii.iter().sum::<f64>() / self.len() as f64
    }

    /// Same atlas, new radii and time.
    pub fn with_radii(&self, radii: Vec<f64>, t: f64) -> Result<Self> {
        StarSurface::new(self.atlas.clone(), radii, t)
    }

    /// Multiplies every radius by `c` keeping the time label.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.with_radii(self.radii.iter().map(|r| r * c).collect(), self.t)
    }
}

/// Embeds a radial profile over the atlas at `t = 0`.
pub fn embed(atlas: Arc<DirectionAtlas>, shape: &RadialProfile) -> Result<StarSurface> {
    let dirs = atlas.directions();
    let radii: Vec<f64> = match *shape {
        RadialProfile::Sphere { radius } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return invalid(format!("sphere radius {radius} must be positive"));
            }
            vec![radius; dirs.len()]
        }
        RadialProfile::Ellipsoid { a, b, c } => {
            let c = c.unwrap_or(b);
            for (name, v) in [("a", a), ("b", b), ("c", c)] {
                if !(v > 0.0 && v.is_finite()) {
                    return invalid(format!("ellipsoid semi-axis {name} = {v} must be positive"));
                }
            }
            dirs.iter()
                .map(|d| (d.x * d.x / (a * a) + d.y * d.y / (b * b) + d.z * d.z / (c * c)).powf(-0.5))
                .collect()
        }
        RadialProfile::PerturbedSphere {
            radius,
            amplitude,
            seed,
        } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return invalid(format!("sphere radius {radius} must be positive"));
            }
            if !(amplitude >= 0.0 && amplitude.is_finite()) {
                return invalid(format!("perturbation amplitude {amplitude} must be nonnegative"));
            }
            let psi = smooth_field(atlas.dim(), dirs, seed);
            let radii: Vec<f64> = psi.iter().map(|p| radius + amplitude * p).collect();
            if let Some((i, r)) = radii.iter().enumerate().find(|(_, r)| **r <= 0.0) {
                return Err(Error::DegenerateShape(format!(
                    "perturbation drives r[{i}] = {r} to a nonpositive value"
                )));
            }
            radii
        }
    };
    StarSurface::new(atlas, radii, 0.0)
}

/// Sum of a few random low-frequency plane waves, normalized to `max |ψ| = 1`
/// on the atlas.
fn smooth_field(dim: usize, dirs: &[Vector3<f64>], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(Vector3<f64>, f64, f64, f64)> = (0..6)
        .map(|_| {
            let mut axis = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                if dim == 2 { rng.random_range(-1.0..1.0) } else { 0.0 },
            );
            if axis.norm() < 1e-3 {
                axis = Vector3::x();
            }
            let freq = rng.random_range(1..=3) as f64;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let weight = rng.random_range(0.2..1.0);
            (axis.normalize(), freq, phase, weight)
        })
        .collect();
    let raw: Vec<f64> = dirs
        .iter()
        .map(|d| {
            waves
                .iter()
                .map(|(ax, k, ph, w)| w * (k * ax.dot(d) * std::f64::consts::PI + ph).cos())
                .sum()
        })
        .collect();
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return raw;
    }
    raw.into_iter().map(|v| v / peak).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_atlas, AtlasKind};

    #[test]
    fn parse_round_trip() {
        for s in [
            "sphere(2)",
            "ellipsoid(1.5,1,1)",
            "ellipsoid(2,1)",
            "perturbed_sphere(1,0.05,7)",
        ] {
            let p: RadialProfile = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("cube(1)".parse::<RadialProfile>().is_err());
        assert!("sphere(1".parse::<RadialProfile>().is_err());
    }

    #[test]
    fn sphere_on_circle() {
        let a = Arc::new(build_atlas(AtlasKind::Circle, 16).unwrap());
        let s = embed(a, &RadialProfile::Sphere { radius: 2.0 }).unwrap();
        assert!(s.radii().iter().all(|&r| r == 2.0));
        assert_eq!(s.t(), 0.0);
    }

    #[test]
    fn ellipsoid_axis_points() {
        let a = Arc::new(build_atlas(AtlasKind::Icosphere, 2).unwrap());
        let s = embed(a.clone(), &"ellipsoid(2,1,1)".parse().unwrap()).unwrap();
        let nearest = |target: Vector3<f64>| {
            (0..a.len())
                .max_by(|&i, &j| {
                    a.directions()[i]
                        .dot(&target)
                        .total_cmp(&a.directions()[j].dot(&target))
                })
                .unwrap()
        };
        // The icosahedron does not contain the coordinate axes, so evaluate the
        // formula directly there and at the nearest vertex for sanity.
        let r = |d: Vector3<f64>| (d.x * d.x / 4.0 + d.y * d.y + d.z * d.z).powf(-0.5);
        assert!((r(Vector3::x()) - 2.0).abs() < 1e-15);
        assert!((r(Vector3::y()) - 1.0).abs() < 1e-15);
        let i = nearest(Vector3::x());
        assert!((s.radii()[i] - r(a.directions()[i])).abs() < 1e-15);
        for (d, &ri) in a.directions().iter().zip(s.radii()) {
            let x = d * ri;
            assert!((x.x * x.x / 4.0 + x.y * x.y + x.z * x.z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_is_clamped_by_amplitude() {
        let a = Arc::new(build_atlas(AtlasKind::Icosphere, 3).unwrap());
        let s = embed(a, &"perturbed_sphere(1,0.05,7)".parse().unwrap()).unwrap();
        let min = s.radii().iter().cloned().fold(f64::INFINITY, f64::min);
        let max = s.radii().iter().cloned().fold(0.0, f64::max);
        assert!(min >= 0.9 && max <= 1.1, "{min} {max}");
        assert!((max - 1.05).abs() < 1e-12 || (min - 0.95).abs() < 1e-12);
    }

    #[test]
    fn bad_shapes() {
        let a = Arc::new(build_atlas(AtlasKind::Icosphere, 1).unwrap());
        assert!(matches!(
            embed(a.clone(), &"ellipsoid(2,0,1)".parse().unwrap()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            embed(a, &"perturbed_sphere(1,1.5,3)".parse().unwrap()),
            Err(Error::DegenerateShape(_))
        ));
    }
}
