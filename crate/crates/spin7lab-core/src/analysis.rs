//! Phase-portrait analysis for the polynomial flow in (X, Y, Z).
//!
//! This module catalogues the hyperbolic fixed points with their stability
//! data, partitions the unit square by the barrier function Q and the line
//! Y = Y_c into the four regions that control extrema of Y, tracks the sign
//! pattern (chamber) of the velocity along trajectories against the allowed
//! transition diagram, and compares pairs of trajectories for the strict
//! ordering that makes one-parameter families monotone in their parameter.

use alloc::vec::Vec;

use crate::integrator::Trajectory;
use crate::linalg::Complex;
use crate::ode::{rhs_xyz, CubeState, FixedPointId, ALL_FIXED_POINTS};

/// Dead-band below which a velocity component counts as zero when reading
/// off sign patterns.
pub const SIGN_DEAD_BAND: f64 = 1e-9;

/// A catalogued fixed point together with its linearization data.
#[derive(Clone, Copy, Debug)]
pub struct FixedPointRecord {
    pub id: FixedPointId,
    pub coordinates: CubeState,
    pub eigenvalues: [Complex; 3],
    /// Number of eigenvalues with negative real part.
    pub stable_dim: usize,
    /// Number of eigenvalues with positive real part.
    pub unstable_dim: usize,
    /// Geometric role of trajectories converging to this point.
    pub label: &'static str,
}

/// All five fixed points of the flow in the closed unit cube, with
/// eigenvalues of the linearization and stable/unstable dimensions.
///
/// Every catalogued point is hyperbolic, so the dimensions always add up to
/// three.
pub fn fixed_point_catalogue() -> [FixedPointRecord; 5] {
    ALL_FIXED_POINTS.map(|id| {
        let eigenvalues = id.eigenvalues();
        let stable_dim = eigenvalues.iter().filter(|e| e.re < 0.0).count();
        let unstable_dim = eigenvalues.iter().filter(|e| e.re > 0.0).count();
        FixedPointRecord {
            id,
            coordinates: id.coordinates(),
            eigenvalues,
            stable_dim,
            unstable_dim,
            label: id.label(),
        }
    })
}

/// The barrier function Q(X, Y) = -3X + (5Y^2 - 6Y + 5)/(1 + Y).
///
/// At an interior critical point of Y with Y >= 0 the second derivative of
/// Y has the sign of -Q, so minima of Y require Q <= 0 and maxima require
/// Q >= 0.
pub fn q_function(x: f64, y: f64) -> f64 {
    -3.0 * x + (5.0 * y * y - 6.0 * y + 5.0) / (1.0 + y)
}

/// The X-coordinate of the curve Q = 0 at height Y.
pub fn q_zero_x(y: f64) -> f64 {
    (5.0 * y * y - 6.0 * y + 5.0) / (3.0 * (1.0 + y))
}

/// The gradient of Q, used by the barrier estimates.
pub fn q_gradient(_x: f64, y: f64) -> (f64, f64) {
    let u = 1.0 + y;
    (-3.0, (5.0 * y * y + 10.0 * y - 11.0) / (u * u))
}

/// One of the four regions cut out of the unit square by the curve Q = 0
/// and the line Y = Y_c, or the complement of the square.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Q > 0 and Y > Y_c; maxima of Y may occur here.
    D1,
    /// Q <= 0 and Y > Y_c; traps the flow once dY/ds >= 0.
    D2,
    /// Q > 0 and Y <= Y_c; traps the flow once dY/ds <= 0, while Y >= 0.
    D3,
    /// Q <= 0 and Y <= Y_c; contains the projection of the cone point.
    D4,
    /// Outside the closed unit square in (X, Y).
    OutsideUnitSquare,
}

/// A region classification together with the value of Q that produced it.
#[derive(Clone, Copy, Debug)]
pub struct RegionLabel {
    pub region: Region,
    pub q: f64,
}

/// Classify a point of the (X, Y)-plane.
///
/// The inequalities follow the trapping statements: D1 and D3 carry Q
/// strictly positive, D1 and D2 carry Y strictly above Y_c, so the boundary
/// curve Q = 0 belongs to D2/D4 and the line Y = Y_c to D3/D4.
pub fn region_of(x: f64, y: f64) -> RegionLabel {
    let q = q_function(x, y);
    let inside = (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y);
    let region = if !inside {
        Region::OutsideUnitSquare
    } else {
        let y_c = FixedPointId::ConePoint.coordinates().y;
        match (q > 0.0, y > y_c) {
            (true, true) => Region::D1,
            (false, true) => Region::D2,
            (true, false) => Region::D3,
            (false, false) => Region::D4,
        }
    };
    RegionLabel { region, q }
}

/// Sign of a velocity component with a dead-band around zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Minus,
    /// Within the dead-band of zero; the chamber is not defined here.
    Flat,
    Plus,
}

impl Sign {
    pub fn of(value: f64, dead_band: f64) -> Sign {
        if value > dead_band {
            Sign::Plus
        } else if value < -dead_band {
            Sign::Minus
        } else {
            Sign::Flat
        }
    }

    pub fn glyph(self) -> char {
        match self {
            Sign::Minus => '-',
            Sign::Flat => '0',
            Sign::Plus => '+',
        }
    }
}

/// The sign pattern of (dX/ds, dY/ds, dZ/ds) at a point.
pub type Chamber = [Sign; 3];

/// Read off the chamber of a velocity vector.
pub fn chamber_of(velocity: CubeState, dead_band: f64) -> Chamber {
    [
        Sign::of(velocity.x, dead_band),
        Sign::of(velocity.y, dead_band),
        Sign::of(velocity.z, dead_band),
    ]
}

/// A chamber with no flat components, encoded as `true` for +.
pub type StrictChamber = [bool; 3];

fn strict(chamber: Chamber) -> Option<StrictChamber> {
    let mut out = [false; 3];
    for (slot, sign) in out.iter_mut().zip(chamber) {
        *slot = match sign {
            Sign::Plus => true,
            Sign::Minus => false,
            Sign::Flat => return None,
        };
    }
    Some(out)
}

/// Directed edges along which the flow can move between chambers. Staying
/// in a chamber is always allowed; the only 2-cycles are (-+-) <-> (-++)
/// and (+--) <-> (+-+), so X and Y are eventually monotone and only Z can
/// keep oscillating.
pub fn chamber_edge_allowed(from: StrictChamber, to: StrictChamber) -> bool {
    const P: bool = true;
    const M: bool = false;
    const EDGES: [(StrictChamber, StrictChamber); 14] = [
        ([P, P, P], [M, P, P]),
        ([P, P, P], [P, P, M]),
        ([P, P, P], [P, M, P]),
        ([M, P, P], [M, P, M]),
        ([M, P, P], [M, M, P]),
        ([M, P, M], [M, P, P]),
        ([M, P, M], [P, P, M]),
        ([P, M, P], [M, M, P]),
        ([P, M, P], [P, M, M]),
        ([P, M, M], [P, M, P]),
        ([P, M, M], [P, P, M]),
        ([M, M, M], [M, P, M]),
        ([M, M, M], [M, M, P]),
        ([M, M, M], [P, M, M]),
    ];
    from == to || EDGES.contains(&(from, to))
}

/// A pair of consecutive chambers not connected by an allowed edge.
#[derive(Clone, Copy, Debug)]
pub struct ChamberViolation {
    pub s_from: f64,
    pub s_to: f64,
    pub from: StrictChamber,
    pub to: StrictChamber,
}

fn strict_chamber_at(trajectory: &Trajectory, s: f64, dead_band: f64) -> Option<StrictChamber> {
    let state = trajectory.state_at(s)?;
    strict(chamber_of(rhs_xyz(state), dead_band))
}

/// Verify one observed transition, splitting the interval through the dense
/// output until each hop changes at most one sign or the window is
/// exhausted. Two components can cross zero within a single accepted step,
/// so the raw sample sequence may skip over the intermediate chamber.
fn transition_ok(
    trajectory: &Trajectory,
    from: (f64, StrictChamber),
    to: (f64, StrictChamber),
    dead_band: f64,
    depth: u32,
) -> Result<(), ChamberViolation> {
    if chamber_edge_allowed(from.1, to.1) {
        return Ok(());
    }
    let violation = ChamberViolation {
        s_from: from.0,
        s_to: to.0,
        from: from.1,
        to: to.1,
    };
    if depth == 0 {
        return Err(violation);
    }
    // Probe a few interior points; the first with a strict chamber splits
    // the check. A window where every probe is flat sits on an invariant
    // wall and carries no transition to validate.
    for frac in [0.5, 0.25, 0.75, 0.375, 0.625] {
        let s_mid = from.0 + frac * (to.0 - from.0);
        if let Some(chamber) = strict_chamber_at(trajectory, s_mid, dead_band) {
            if chamber == from.1 && frac == 0.5 {
                return transition_ok(trajectory, (s_mid, chamber), to, dead_band, depth - 1);
            }
            transition_ok(trajectory, from, (s_mid, chamber), dead_band, depth - 1)?;
            return transition_ok(trajectory, (s_mid, chamber), to, dead_band, depth - 1);
        }
    }
    Ok(())
}

/// Walk a trajectory and check that consecutive chambers only change along
/// allowed edges of the transition diagram. Samples inside the dead-band
/// are skipped; apparent multi-sign jumps are refined through the dense
/// output before being reported.
pub fn check_chamber_transitions(
    trajectory: &Trajectory,
    dead_band: f64,
) -> Option<ChamberViolation> {
    let mut last: Option<(f64, StrictChamber)> = None;
    for sample in &trajectory.samples {
        let Some(chamber) = strict(chamber_of(rhs_xyz(sample.state), dead_band)) else {
            continue;
        };
        if let Some(prev) = last {
            if prev.1 != chamber {
                if let Err(violation) =
                    transition_ok(trajectory, prev, (sample.s, chamber), dead_band, 48)
                {
                    return Some(violation);
                }
            }
        }
        last = Some((sample.s, chamber));
    }
    None
}

/// The quantity 2Y(1 - Y)/(1 + Y) - Z, which for Y >= 0 has the same sign
/// as dY/ds; the two differ by the positive factor 2(1 + Y).
pub fn growth_indicator(state: CubeState) -> f64 {
    2.0 * state.y * (1.0 - state.y) / (1.0 + state.y) - state.z
}

/// Check the sign identity between dY/ds and the growth indicator at every
/// sample with Y >= 0. Returns the first sample time where the signs
/// disagree outside the dead-band.
pub fn check_growth_signs(trajectory: &Trajectory, dead_band: f64) -> Option<f64> {
    for sample in &trajectory.samples {
        if sample.state.y < 0.0 {
            continue;
        }
        let dy = rhs_xyz(sample.state).y;
        let indicator = growth_indicator(sample.state);
        if dy.abs() <= dead_band || indicator.abs() <= dead_band {
            continue;
        }
        if (dy > 0.0) != (indicator > 0.0) {
            return Some(sample.s);
        }
    }
    None
}

/// Whether a flagged sample was a local minimum or maximum of Y.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtremumKind {
    Minimum,
    Maximum,
}

/// An interior extremum of Y observed in the forbidden half of the unit
/// square.
#[derive(Clone, Copy, Debug)]
pub struct ExtremumViolation {
    pub s: f64,
    pub y: f64,
    pub q: f64,
    pub kind: ExtremumKind,
}

/// Check that interior local minima of sampled Y only occur where Q <= 0
/// (regions D2 and D4) and maxima only where Q >= 0 (D1 and D3), up to the
/// dead-band. Dips shallower than the dead-band are not counted as extrema,
/// and samples outside the unit square or with Y < 0 are ignored.
pub fn check_extremum_placement(
    trajectory: &Trajectory,
    dead_band: f64,
) -> Option<ExtremumViolation> {
    let samples = &trajectory.samples;
    for window in samples.windows(3) {
        let [before, at, after] = window else {
            continue;
        };
        let state = at.state;
        if state.y < 0.0 || region_of(state.x, state.y).region == Region::OutsideUnitSquare {
            continue;
        }
        let q = q_function(state.x, state.y);
        let is_min = at.state.y + dead_band < before.state.y.min(after.state.y);
        let is_max = at.state.y - dead_band > before.state.y.max(after.state.y);
        if is_min && q > dead_band {
            return Some(ExtremumViolation {
                s: at.s,
                y: state.y,
                q,
                kind: ExtremumKind::Minimum,
            });
        }
        if is_max && q < -dead_band {
            return Some(ExtremumViolation {
                s: at.s,
                y: state.y,
                q,
                kind: ExtremumKind::Maximum,
            });
        }
    }
    None
}

/// A sample that escaped a region the flow should have been trapped in.
#[derive(Clone, Copy, Debug)]
pub struct TrappingViolation {
    pub s: f64,
    pub y: f64,
    pub region: Region,
    pub detail: &'static str,
}

/// Outcome of the trapping monitors along one trajectory.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrappingReport {
    /// Time at which the flow was first seen in D2 with dY/ds >= 0.
    pub d2_armed_at: Option<f64>,
    /// Time at which the flow was first seen in D3 with dY/ds <= 0.
    pub d3_armed_at: Option<f64>,
    pub violation: Option<TrappingViolation>,
}

/// Monitor the two one-way regions: once a sample lies in D2 with dY/ds >=
/// 0, every later sample must stay in D2 with Y non-decreasing; once a
/// sample lies in D3 with dY/ds <= 0, the same holds with D3 and Y
/// non-increasing for as long as Y >= 0. The slack absorbs integrator
/// error in the monotonicity comparisons; the violation records the Y value
/// where a monitor failed rather than asserting any threshold on it.
pub fn check_trapping(trajectory: &Trajectory, slack: f64) -> TrappingReport {
    let mut report = TrappingReport::default();
    let mut d2_last_y: Option<f64> = None;
    let mut d3_last_y: Option<f64> = None;
    for sample in &trajectory.samples {
        let state = sample.state;
        let label = region_of(state.x, state.y);
        let dy = rhs_xyz(state).y;

        if let Some(prev_y) = d2_last_y {
            let escaped = label.region != Region::D2;
            let decreased = state.y < prev_y - slack;
            if (escaped || decreased) && report.violation.is_none() {
                report.violation = Some(TrappingViolation {
                    s: sample.s,
                    y: state.y,
                    region: label.region,
                    detail: if escaped {
                        "left D2 after the trap was armed"
                    } else {
                        "Y decreased inside D2 after the trap was armed"
                    },
                });
            }
            d2_last_y = Some(state.y);
        } else if label.region == Region::D2 && dy >= 0.0 {
            report.d2_armed_at = Some(sample.s);
            d2_last_y = Some(state.y);
        }

        if state.y >= 0.0 {
            if let Some(prev_y) = d3_last_y {
                let escaped = label.region != Region::D3;
                let increased = state.y > prev_y + slack;
                if (escaped || increased) && report.violation.is_none() {
                    report.violation = Some(TrappingViolation {
                        s: sample.s,
                        y: state.y,
                        region: label.region,
                        detail: if escaped {
                            "left D3 after the trap was armed"
                        } else {
                            "Y increased inside D3 after the trap was armed"
                        },
                    });
                }
                d3_last_y = Some(state.y);
            } else if label.region == Region::D3 && dy <= 0.0 {
                report.d3_armed_at = Some(sample.s);
                d3_last_y = Some(state.y);
            }
        }
    }
    report
}

/// The a-priori bounds for flow lines: while Y > 0 the state stays in
/// 0 <= X <= 1, Y <= 1 and 0 <= Z <= max(Z at the start, 5/4). Returns the
/// first sample violating any bound by more than `slack`.
pub fn check_cube_bounds(trajectory: &Trajectory, slack: f64) -> Option<(f64, CubeState)> {
    let z_cap = trajectory.start().state.z.max(1.25);
    for sample in &trajectory.samples {
        let state = sample.state;
        if state.y <= 0.0 {
            continue;
        }
        let out_x = state.x < -slack || state.x > 1.0 + slack;
        let out_y = state.y > 1.0 + slack;
        let out_z = state.z < -slack || state.z > z_cap + slack;
        if out_x || out_y || out_z {
            return Some((sample.s, state));
        }
    }
    None
}

/// Result of checking the strict ordering X1 > X2, Y1 > Y2, Z1 < Z2 on the
/// overlap of two trajectories.
#[derive(Clone, Copy, Debug)]
pub struct ComparisonReport {
    /// The strict ordering held at the first common sample.
    pub established: bool,
    /// The ordering held at every common sample.
    pub holds: bool,
    /// First time and worst signed margin where the ordering failed after
    /// being established.
    pub first_violation: Option<(f64, f64)>,
    pub samples_checked: usize,
    pub s_range: (f64, f64),
}

fn ordering_margin(first: CubeState, second: CubeState) -> f64 {
    let dx = first.x - second.x;
    let dy = first.y - second.y;
    let dz = second.z - first.z;
    dx.min(dy).min(dz)
}

/// Check whether the first trajectory dominates the second in the ordering
/// X1 > X2, Y1 > Y2, Z1 < Z2 across their common span in s. Both sample
/// grids are merged and each trajectory is resampled through its dense
/// output. The ordering must hold strictly at the first common point to
/// count as established, so comparing a trajectory with itself reports not
/// ordered. Trajectories with different directions or disjoint spans are
/// not comparable.
pub fn compare_trajectories(
    first: &Trajectory,
    second: &Trajectory,
) -> Result<ComparisonReport, crate::Error> {
    if first.direction != second.direction {
        return Err(crate::Error::Incomparable(
            "trajectories run in different directions".into(),
        ));
    }
    let sign = first.direction.sign();
    let key = |s: f64| sign * s;
    let lo = key(first.start().s).max(key(second.start().s));
    let hi = key(first.end().s).min(key(second.end().s));
    if lo >= hi {
        return Err(crate::Error::Incomparable(
            "trajectories have no common span in s".into(),
        ));
    }

    let mut grid: Vec<f64> = first
        .samples
        .iter()
        .chain(&second.samples)
        .map(|sample| key(sample.s))
        .filter(|&k| (lo..=hi).contains(&k))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut report = ComparisonReport {
        established: false,
        holds: true,
        first_violation: None,
        samples_checked: 0,
        s_range: (sign * lo, sign * hi),
    };
    for (index, &k) in grid.iter().enumerate() {
        let s = sign * k;
        let (Some(state1), Some(state2)) = (first.state_at(s), second.state_at(s)) else {
            continue;
        };
        report.samples_checked += 1;
        let margin = ordering_margin(state1, state2);
        if index == 0 {
            report.established = margin > 0.0;
            report.holds = report.established;
            if !report.established {
                report.first_violation = Some((s, margin));
                break;
            }
        } else if margin <= 0.0 {
            report.holds = false;
            report.first_violation = Some((s, margin));
            break;
        }
    }
    Ok(report)
}
