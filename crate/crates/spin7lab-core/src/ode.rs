//! Metric coefficients, scale-invariant coordinates, and the flow fields.
//!
//! The arclength flow acts on metric coefficients (a, b, c, f). Dividing by c
//! gives ratios (A, B, F) = (a/c, b/c, f/c), and the squared coordinates
//! (X, Y, Z) = (A^2, B^2, ABF) evolve polynomially in a slow time s with
//! dt = (ab/c) ds. All the geometry lives in a compact region of (X, Y, Z)
//! space whose distinguished fixed points are catalogued here.

use core::fmt;

use crate::linalg::{self, Complex};
use crate::math;
use crate::Error;

/// Metric coefficients (a, b, c, f) at one arclength instant, also used as
/// the value of their t-derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricState {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub f: f64,
}

impl MetricState {
    pub const fn new(a: f64, b: f64, c: f64, f: f64) -> MetricState {
        MetricState { a, b, c, f }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a, self.b, self.c, self.f]
    }

    pub fn from_array(v: [f64; 4]) -> MetricState {
        MetricState::new(v[0], v[1], v[2], v[3])
    }

    /// Largest absolute difference of components.
    pub fn max_diff(self, other: MetricState) -> f64 {
        let mut worst = 0.0f64;
        for (x, y) in self.to_array().iter().zip(other.to_array()) {
            worst = worst.max(math::abs(x - y));
        }
        worst
    }
}

/// Ratios (A, B, F) = (a/c, b/c, f/c).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioState {
    pub a_over_c: f64,
    pub b_over_c: f64,
    pub f_over_c: f64,
}

/// Scale-invariant coordinates (X, Y, Z) = (A^2, B^2, ABF).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubeState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CubeState {
    pub const fn new(x: f64, y: f64, z: f64) -> CubeState {
        CubeState { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(v: [f64; 3]) -> CubeState {
        CubeState::new(v[0], v[1], v[2])
    }

    pub fn norm(self) -> f64 {
        math::sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
    }

    /// Euclidean distance to another point.
    pub fn distance(self, other: CubeState) -> f64 {
        CubeState::new(self.x - other.x, self.y - other.y, self.z - other.z).norm()
    }
}

impl fmt::Display for CubeState {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "({}, {}, {})", self.x, self.y, self.z)
    }
}

fn check_metric_domain(m: MetricState) -> Result<(), Error> {
    if !(m.a > 0.0 && m.b > 0.0 && m.c > 0.0) {
        return Err(Error::domain(alloc::format!(
            "metric coefficients must satisfy a, b, c > 0; got a = {}, b = {}, c = {}",
            m.a, m.b, m.c
        )));
    }
    Ok(())
}

/// Arclength flow of the metric coefficients.
pub fn rhs_abcf(m: MetricState) -> Result<MetricState, Error> {
    check_metric_domain(m)?;
    let MetricState { a, b, c, f } = m;
    Ok(MetricState {
        a: (b * b + c * c - a * a) / (b * c),
        b: (c * c + a * a - b * b) / (a * c) - f / b,
        c: (a * a + b * b - c * c) / (a * b) + f / c,
        f: f * f * (1.0 / (b * b) - 1.0 / (c * c)),
    })
}

/// Arclength flow for a general principal orbit N(k, l). The pair (1, -1)
/// reduces to [`rhs_abcf`], and (1, 0) is the same system with the roles of
/// a and b exchanged.
pub fn rhs_abcf_orbit(m: MetricState, k: i64, l: i64) -> Result<MetricState, Error> {
    check_metric_domain(m)?;
    let delta = (k * k + k * l + l * l) as f64;
    if delta == 0.0 {
        return Err(Error::domain("orbit labels (k, l) must not both be zero"));
    }
    let mm = (-k - l) as f64 / delta;
    let ll = l as f64 / delta;
    let kk = k as f64 / delta;
    let MetricState { a, b, c, f } = m;
    Ok(MetricState {
        a: (b * b + c * c - a * a) / (b * c) + mm * f / a,
        b: (c * c + a * a - b * b) / (a * c) + ll * f / b,
        c: (a * a + b * b - c * c) / (a * b) + kk * f / c,
        f: -f * f * (mm / (a * a) + ll / (b * b) + kk / (c * c)),
    })
}

/// Polynomial flow of (X, Y, Z) in the slow time s.
pub fn rhs_xyz(p: CubeState) -> CubeState {
    let CubeState { x, y, z } = p;
    CubeState {
        x: 2.0 * x * (2.0 - 2.0 * x - z),
        y: 4.0 * y - 4.0 * y * y - 2.0 * y * z - 2.0 * z,
        z: z * (5.0 - 3.0 * x - 3.0 * y - 4.0 * z),
    }
}

/// Jacobian of [`rhs_xyz`], rows indexed by the output component.
pub fn jacobian_xyz(p: CubeState) -> [[f64; 3]; 3] {
    let CubeState { x, y, z } = p;
    [
        [4.0 - 8.0 * x - 2.0 * z, 0.0, -2.0 * x],
        [0.0, 4.0 - 8.0 * y - 2.0 * z, -2.0 * y - 2.0],
        [-3.0 * z, -3.0 * z, 5.0 - 3.0 * x - 3.0 * y - 8.0 * z],
    ]
}

/// Ratios (a/c, b/c, f/c); needs c > 0 (and a, b > 0 for downstream maps).
pub fn to_ratio(m: MetricState) -> Result<RatioState, Error> {
    check_metric_domain(m)?;
    Ok(RatioState {
        a_over_c: m.a / m.c,
        b_over_c: m.b / m.c,
        f_over_c: m.f / m.c,
    })
}

/// Scale-invariant coordinates of a metric state.
pub fn to_cube(m: MetricState) -> Result<CubeState, Error> {
    Ok(ratio_to_cube(to_ratio(m)?))
}

pub fn ratio_to_cube(r: RatioState) -> CubeState {
    CubeState {
        x: r.a_over_c * r.a_over_c,
        y: r.b_over_c * r.b_over_c,
        z: r.a_over_c * r.b_over_c * r.f_over_c,
    }
}

/// Positive square roots (A, B) and F = Z/(AB); needs X > 0 and Y > 0.
pub fn cube_to_ratio(p: CubeState) -> Result<RatioState, Error> {
    if !(p.x > 0.0 && p.y > 0.0) {
        return Err(Error::domain(alloc::format!(
            "ratios need X > 0 and Y > 0; got X = {}, Y = {}",
            p.x, p.y
        )));
    }
    let a_over_c = math::sqrt(p.x);
    let b_over_c = math::sqrt(p.y);
    Ok(RatioState {
        a_over_c,
        b_over_c,
        f_over_c: p.z / (a_over_c * b_over_c),
    })
}

/// Rebuild the metric coefficients from a cube point and the scale a:
/// c = a/sqrt(X), b = c sqrt(Y), f = Z c/(sqrt(X) sqrt(Y)).
pub fn complete_metric(p: CubeState, a: f64) -> Result<MetricState, Error> {
    if !(a > 0.0) {
        return Err(Error::domain(alloc::format!("scale a must be positive; got {a}")));
    }
    let r = cube_to_ratio(p)?;
    let c = a / r.a_over_c;
    Ok(MetricState {
        a,
        b: c * r.b_over_c,
        c,
        f: c * r.f_over_c,
    })
}

/// Slopes of the exact cone solution (a, b, c, f) = t (a', b', c', f'),
/// the metric-side picture of [`FixedPointId::ConePoint`].
pub fn cone_slopes() -> MetricState {
    let r5 = math::sqrt(5.0);
    MetricState {
        a: 2.0 / r5,
        b: math::sqrt(2.0 * (5.0 - r5) / 15.0),
        c: math::sqrt(2.0 * (5.0 + r5) / 15.0),
        f: 4.0 / (3.0 * r5),
    }
}

/// The five fixed points of [`rhs_xyz`] with geometric meaning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FixedPointId {
    /// Source at (0,0,0); the conically singular families emanate here.
    Origin,
    /// (0,1,0): closure of the flow on a singular orbit S^5.
    S5Point,
    /// (1,0,0): closure of the flow on a singular orbit CP^2 (principal
    /// orbit N(1,0), metric coefficients read with a and b exchanged).
    Cp2Point,
    /// Sink at (1,1,0): asymptotically locally conical end.
    AlcPoint,
    /// Saddle at the invariant Spin(7) cone; asymptotically conical ends
    /// live on its stable manifold, conically singular solutions on its
    /// unstable one.
    ConePoint,
}

pub const ALL_FIXED_POINTS: [FixedPointId; 5] = [
    FixedPointId::Origin,
    FixedPointId::S5Point,
    FixedPointId::Cp2Point,
    FixedPointId::AlcPoint,
    FixedPointId::ConePoint,
];

impl FixedPointId {
    pub fn coordinates(self) -> CubeState {
        match self {
            FixedPointId::Origin => CubeState::new(0.0, 0.0, 0.0),
            FixedPointId::S5Point => CubeState::new(0.0, 1.0, 0.0),
            FixedPointId::Cp2Point => CubeState::new(1.0, 0.0, 0.0),
            FixedPointId::AlcPoint => CubeState::new(1.0, 1.0, 0.0),
            FixedPointId::ConePoint => {
                let r5 = math::sqrt(5.0);
                CubeState::new(1.5 - 0.3 * r5, 1.5 - 0.5 * r5, 0.6 * r5 - 1.0)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FixedPointId::Origin => "Origin",
            FixedPointId::S5Point => "S5Point",
            FixedPointId::Cp2Point => "CP2Point",
            FixedPointId::AlcPoint => "ALCPoint",
            FixedPointId::ConePoint => "ConePoint",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FixedPointId::Origin => "source; origin of the conically singular families",
            FixedPointId::S5Point => "closure on a singular orbit S^5",
            FixedPointId::Cp2Point => "closure on a singular orbit CP^2",
            FixedPointId::AlcPoint => "asymptotically locally conical end",
            FixedPointId::ConePoint => "invariant Spin(7) cone; AC end or conical singularity",
        }
    }

    /// Eigenvalues of the flow linearization at this point, ascending.
    pub fn eigenvalues(self) -> [Complex; 3] {
        linalg::eigenvalues3(&jacobian_xyz(self.coordinates()))
    }
}

impl fmt::Display for FixedPointId {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.write_str(self.name())
    }
}
