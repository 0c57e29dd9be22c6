//! Shooting drivers for the one-parameter families of flow lines.
//!
//! Each family member is seeded from a series expansion, integrated through
//! the adaptive solver and classified by its terminal behaviour: capture at
//! the sink gives an ALC end, capture at the cone point an AC end, and an
//! exit through Y = 0 an incomplete metric. On top of the classifier sit a
//! bisection search for the ALC/incomplete transition parameter, a grid
//! sweep with pairwise ordering reports, and helpers for the unstable
//! manifold of the cone point and the conically singular segment families.

use alloc::vec::Vec;

use crate::analysis::{compare_trajectories, ComparisonReport};
use crate::integrator::{
    estimate_alc_length, integrate_from, reconstruct_abcf, AlcReport, Direction,
    IntegrationOptions, TerminalStatus, Trajectory,
};
use crate::linalg::eigenvector;
use crate::math;
use crate::ode::{jacobian_xyz, to_cube, CubeState, FixedPointId};
use crate::series::{
    ac_expansion, cp2_initial_state, cs_end_state, s5_initial_state, series_refine,
    T_AC_MIN_DEFAULT, T_SERIES_DEFAULT,
};
use crate::Error;

/// Default displacement along the unstable eigenvector when integrating the
/// unstable manifold of the cone point.
pub const MANIFOLD_DELTA_DEFAULT: f64 = 1e-6;

/// Default offset from the origin for the segment families.
pub const OMEGA_EPS_DEFAULT: f64 = 1e-3;

/// Largest admissible height z of a segment family.
pub const OMEGA_Z_MAX: f64 = 0.3;

/// A single member of one of the shooting families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyMember {
    /// Metric closing on a singular orbit S^5, parametrized by mu >= 0.
    Psi { mu: f64 },
    /// Metric closing on a singular orbit CP^2, parametrized by tau.
    Upsilon { tau: f64 },
    /// Deformation of the cone along its small-time series, amplitude
    /// lambda on the nu_2 mode.
    CsDeformation { lambda: f64 },
    /// Conical end data at large t with amplitudes (alpha, beta) on the two
    /// decaying modes.
    AcEnd { alpha: f64, beta: f64 },
    /// Conically singular family through the segment point
    /// (eps, (1 - kappa) eps, kappa z).
    Omega { z: f64, kappa: f64 },
}

/// A one-parameter family for sweeps and bisection searches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyKind {
    Psi,
    Upsilon,
    CsDeformation,
    Omega { z: f64 },
}

impl FamilyKind {
    /// The member of this family at the given parameter value.
    pub fn member(self, parameter: f64) -> FamilyMember {
        match self {
            FamilyKind::Psi => FamilyMember::Psi { mu: parameter },
            FamilyKind::Upsilon => FamilyMember::Upsilon { tau: parameter },
            FamilyKind::CsDeformation => FamilyMember::CsDeformation { lambda: parameter },
            FamilyKind::Omega { z } => FamilyMember::Omega { z, kappa: parameter },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Psi => "psi",
            FamilyKind::Upsilon => "upsilon",
            FamilyKind::CsDeformation => "cs",
            FamilyKind::Omega { .. } => "omega",
        }
    }
}

impl FamilyMember {
    /// The sweep parameter of this member.
    pub fn parameter(self) -> f64 {
        match self {
            FamilyMember::Psi { mu } => mu,
            FamilyMember::Upsilon { tau } => tau,
            FamilyMember::CsDeformation { lambda } => lambda,
            FamilyMember::AcEnd { alpha, .. } => alpha,
            FamilyMember::Omega { kappa, .. } => kappa,
        }
    }
}

/// Shared configuration for seeding and integrating family members.
#[derive(Clone, Copy, Debug)]
pub struct ShootingConfig {
    pub integration: IntegrationOptions,
    /// Handoff time from series data to the integrator for the families
    /// seeded near t = 0.
    pub t_series: f64,
    /// Start time for conical end data, integrated from large t.
    pub t_ac_start: f64,
    /// Series order used for conical end seeds. Truncation error feeds the
    /// unstable mode of the cone point and is amplified during the
    /// approach, so low orders eject before entering the capture ball; the
    /// full order 6 at t = 10 captures cleanly.
    pub ac_seed_order: u32,
    /// Offset from the origin for the segment families.
    pub omega_eps: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            integration: IntegrationOptions::default(),
            t_series: T_SERIES_DEFAULT,
            t_ac_start: T_AC_MIN_DEFAULT,
            ac_seed_order: 6,
            omega_eps: OMEGA_EPS_DEFAULT,
        }
    }
}

/// Terminal behaviour of a classified family member.
#[derive(Clone, Copy, Debug)]
pub enum Verdict {
    /// Captured by the sink (1, 1, 0); the metric has an asymptotically
    /// locally conical end with the attached asymptotics.
    Alc { report: AlcReport },
    /// Captured by the cone point; the metric is asymptotically conical.
    /// The decay rate of the approach is fitted in the arclength clock
    /// where available.
    Ac { decay_rate: Option<f64> },
    /// The flow line exited through Y = 0; the metric closes no end there.
    Incomplete { s_exit: f64, t_exit: Option<f64> },
    /// The flow horizon was exhausted without an event.
    Undecided { s_max: f64 },
}

/// Coarse tag of a verdict, used to steer bisection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerdictKind {
    Alc,
    Ac,
    Incomplete,
    Undecided,
}

impl Verdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::Alc { .. } => VerdictKind::Alc,
            Verdict::Ac { .. } => VerdictKind::Ac,
            Verdict::Incomplete { .. } => VerdictKind::Incomplete,
            Verdict::Undecided { .. } => VerdictKind::Undecided,
        }
    }
}

impl VerdictKind {
    pub fn name(self) -> &'static str {
        match self {
            VerdictKind::Alc => "ALC",
            VerdictKind::Ac => "AC",
            VerdictKind::Incomplete => "incomplete",
            VerdictKind::Undecided => "undecided",
        }
    }
}

/// A classified family member with its trajectory.
#[derive(Clone, Debug)]
pub struct ClassificationResult {
    pub member: FamilyMember,
    pub verdict: Verdict,
    pub trajectory: Trajectory,
    /// Closest approach of the trajectory to the cone point.
    pub min_cone_distance: f64,
}

/// The start point of a segment family: (eps, (1 - kappa) eps, kappa z)
/// interpolates between the diagonal solution at kappa = 0 and the Y = 0
/// face at kappa = 1. Flow lines through these points originate at the
/// source when eps and z are small.
pub fn omega_family_start(z: f64, kappa: f64, eps: f64) -> Result<CubeState, Error> {
    if !(z > 0.0 && z <= OMEGA_Z_MAX) {
        return Err(Error::domain("segment height z must lie in (0, 0.3]"));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::domain("segment parameter kappa must lie in (0, 1)"));
    }
    if !(eps > 0.0 && eps <= 0.2) {
        return Err(Error::domain("segment offset eps must lie in (0, 0.2]"));
    }
    Ok(CubeState {
        x: eps,
        y: (1.0 - kappa) * eps,
        z: kappa * z,
    })
}

/// Seed state for a family member: the cube-coordinate start together with
/// the metric scale and arclength used for reconstruction.
fn seed_for(member: FamilyMember, config: &ShootingConfig) -> Result<(CubeState, f64, f64), Error> {
    match member {
        FamilyMember::Psi { mu } => {
            let m = s5_initial_state(mu, config.t_series, config.t_series)?;
            Ok((to_cube(m)?, m.a, config.t_series))
        }
        FamilyMember::Upsilon { tau } => {
            let m = cp2_initial_state(tau, config.t_series, config.t_series)?;
            Ok((to_cube(m)?, m.a, config.t_series))
        }
        FamilyMember::CsDeformation { lambda } => {
            let m = cs_end_state(lambda, config.t_series, config.t_series)?;
            Ok((to_cube(m)?, m.a, config.t_series))
        }
        FamilyMember::AcEnd { alpha, beta } => {
            let expansion = series_refine(&ac_expansion(alpha, beta), config.ac_seed_order)?;
            let m = expansion.eval(config.t_ac_start)?;
            Ok((to_cube(m)?, m.a, config.t_ac_start))
        }
        FamilyMember::Omega { z, kappa } => {
            let start = omega_family_start(z, kappa, config.omega_eps)?;
            // The segment family has no canonical metric scale; reconstruction
            // uses a unit scale at a nominal arclength origin.
            Ok((start, 1.0, 0.0))
        }
    }
}

/// Slope of ln(value) against s by least squares, ignoring non-positive
/// values. Returns `None` with fewer than `min_points` usable samples.
fn semilog_slope(points: &[(f64, f64)], min_points: usize) -> Option<f64> {
    let mut n = 0.0;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    let mut count = 0usize;
    for &(s, value) in points {
        if !(value > 1e-300) {
            continue;
        }
        let ln_v = math::ln(value);
        n += 1.0;
        count += 1;
        sx += s;
        sy += ln_v;
        sxx += s * s;
        sxy += s * ln_v;
    }
    if count < min_points {
        return None;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Fit the exponential decay rate of the distance to the cone point over
/// the approach segment of a trajectory: samples up to the closest
/// approach, with distance between 1e-8 and 1e-2. The arclength rate is
/// converted to the radial clock of the cone, where the two admissible
/// rates are the indicial roots nu_0 and nu_1.
pub fn fit_cone_decay_rate(trajectory: &Trajectory) -> Option<f64> {
    let cone = FixedPointId::ConePoint.coordinates();
    let mut min_index = 0;
    let mut min_distance = f64::INFINITY;
    for (index, sample) in trajectory.samples.iter().enumerate() {
        let d = sample.state.distance(cone);
        if d < min_distance {
            min_distance = d;
            min_index = index;
        }
    }
    let points: Vec<(f64, f64)> = trajectory.samples[..=min_index]
        .iter()
        .map(|sample| (sample.s, sample.state.distance(cone)))
        .filter(|&(_, d)| (1e-8..1e-2).contains(&d))
        .collect();
    let slope = semilog_slope(&points, 8)?;
    // dt/ds = t / sqrt(5) at the cone, so an arclength rate gamma is the
    // radial rate gamma / (1 - 1/sqrt(5)) for modes of the form t^nu.
    Some(slope / (1.0 - 1.0 / math::sqrt(5.0)))
}

/// Classify one family member: seed it from its series, integrate forward
/// and map the terminal status to a verdict. Capture at the source or at
/// either singular-orbit point does not occur for these families and is
/// reported as an anomaly.
pub fn classify_member(
    member: FamilyMember,
    config: &ShootingConfig,
) -> Result<ClassificationResult, Error> {
    let (start, a0, t0) = seed_for(member, config)?;
    let mut trajectory = integrate_from(start, 0.0, Direction::Forward, &config.integration)?;
    let min_cone_distance = trajectory.min_distance_to(FixedPointId::ConePoint.coordinates());

    let verdict = match trajectory.status {
        TerminalStatus::ReachedFixedPoint(FixedPointId::AlcPoint) => {
            reconstruct_abcf(&mut trajectory, a0, t0, &config.integration)?;
            let report = estimate_alc_length(&trajectory)?;
            Verdict::Alc { report }
        }
        TerminalStatus::ReachedFixedPoint(FixedPointId::ConePoint) => Verdict::Ac {
            decay_rate: fit_cone_decay_rate(&trajectory),
        },
        TerminalStatus::ReachedFixedPoint(found) => {
            return Err(Error::UnexpectedCapture {
                expected: FixedPointId::AlcPoint,
                found,
            });
        }
        TerminalStatus::ExitedAtYZero => {
            let s_exit = trajectory.end().s;
            let t_exit = reconstruct_abcf(&mut trajectory, a0, t0, &config.integration)
                .ok()
                .and_then(|_| {
                    trajectory
                        .reconstruction
                        .as_ref()
                        .and_then(|nodes| nodes.last())
                        .map(|node| node.t)
                });
            Verdict::Incomplete { s_exit, t_exit }
        }
        TerminalStatus::ReachedSMax => Verdict::Undecided {
            s_max: config.integration.s_max,
        },
        TerminalStatus::StepFailure => {
            let end = trajectory.end();
            return Err(Error::StepFailure { s: end.s, h: 0.0 });
        }
    };

    Ok(ClassificationResult {
        member,
        verdict,
        trajectory,
        min_cone_distance,
    })
}

/// Result of a bisection search for the ALC/incomplete transition.
#[derive(Clone, Debug)]
pub struct TransitionResult {
    pub kind: FamilyKind,
    /// Midpoint of the final bracket.
    pub critical: f64,
    pub bracket: (f64, f64),
    pub width: f64,
    pub iterations: u32,
    /// Verdicts at the initial bracket endpoints.
    pub endpoint_verdicts: (VerdictKind, VerdictKind),
    /// Classification of the final midpoint, whose trajectory passes near
    /// the cone point.
    pub midpoint: ClassificationResult,
}

/// Bisect the transition between ALC and incomplete members of a family.
/// The lower endpoint must classify as ALC and the upper as incomplete; an
/// undecided member inside the bracket aborts the search, since it cannot
/// be assigned to either side.
pub fn bisect_transition(
    kind: FamilyKind,
    bracket: (f64, f64),
    tol: f64,
    config: &ShootingConfig,
) -> Result<TransitionResult, Error> {
    let (mut lo, mut hi) = bracket;
    if !(tol > 0.0) || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::domain(
            "bisection needs a finite bracket lo < hi and tol > 0",
        ));
    }
    let lo_kind = classify_member(kind.member(lo), config)?.verdict.kind();
    let hi_kind = classify_member(kind.member(hi), config)?.verdict.kind();
    if lo_kind != VerdictKind::Alc || hi_kind != VerdictKind::Incomplete {
        return Err(Error::NoBracket { lo, hi });
    }

    let mut iterations = 0;
    while hi - lo > tol && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let result = classify_member(kind.member(mid), config)?;
        match result.verdict.kind() {
            VerdictKind::Alc => lo = mid,
            VerdictKind::Incomplete => hi = mid,
            // An exact hit on the boundary member: the bracket has collapsed.
            VerdictKind::Ac => {
                lo = mid;
                hi = mid;
                break;
            }
            VerdictKind::Undecided => {
                return Err(Error::Undecided {
                    parameter: mid,
                    s_max: config.integration.s_max,
                });
            }
        }
    }

    let critical = 0.5 * (lo + hi);
    let midpoint = classify_member(kind.member(critical), config)?;
    Ok(TransitionResult {
        kind,
        critical,
        bracket: (lo, hi),
        width: hi - lo,
        iterations,
        endpoint_verdicts: (lo_kind, hi_kind),
        midpoint,
    })
}

/// One entry of a family sweep: the classification at a grid point and,
/// when both neighbours classified cleanly, the ordering report against the
/// next grid point.
#[derive(Debug)]
pub struct SweepEntry {
    pub parameter: f64,
    pub result: Result<ClassificationResult, Error>,
    /// Ordering of this member's trajectory over the next one: for these
    /// families the smaller parameter dominates in (X, Y) and is dominated
    /// in Z.
    pub ordering_with_next: Option<ComparisonReport>,
}

#[cfg(feature = "std")]
fn classify_grid(
    kind: FamilyKind,
    grid: &[f64],
    config: &ShootingConfig,
) -> Vec<Result<ClassificationResult, Error>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .iter()
            .map(|&parameter| scope.spawn(move || classify_member(kind.member(parameter), config)))
            .collect();
        handles
            .into_iter()
            .map(|handle| handle.join().expect("classification worker panicked"))
            .collect()
    })
}

#[cfg(not(feature = "std"))]
fn classify_grid(
    kind: FamilyKind,
    grid: &[f64],
    config: &ShootingConfig,
) -> Vec<Result<ClassificationResult, Error>> {
    grid.iter()
        .map(|&parameter| classify_member(kind.member(parameter), config))
        .collect()
}

/// Classify every member of a family on a parameter grid. Members run
/// concurrently where the standard library is available, and the output is
/// ordered by parameter regardless. Individual member errors are recorded
/// in their entries without aborting the sweep; adjacent pairs that both
/// classified get an ordering report attached.
pub fn sweep_family(
    kind: FamilyKind,
    grid: &[f64],
    config: &ShootingConfig,
) -> Result<Vec<SweepEntry>, Error> {
    if grid.len() < 2 {
        return Err(Error::domain("a sweep needs at least two grid points"));
    }
    if grid.windows(2).any(|pair| !(pair[0] < pair[1])) {
        return Err(Error::domain(
            "sweep grid must be strictly increasing and finite",
        ));
    }

    let results = classify_grid(kind, grid, config);

    let mut entries: Vec<SweepEntry> = grid
        .iter()
        .zip(results)
        .map(|(&parameter, result)| SweepEntry {
            parameter,
            result,
            ordering_with_next: None,
        })
        .collect();
    for index in 0..entries.len() - 1 {
        let (head, tail) = entries.split_at_mut(index + 1);
        let this = &mut head[index];
        let next = &tail[0];
        if let (Ok(a), Ok(b)) = (&this.result, &next.result) {
            this.ordering_with_next = compare_trajectories(&a.trajectory, &b.trajectory).ok();
        }
    }
    Ok(entries)
}

/// The unit eigenvector of the unstable direction at the cone point,
/// oriented toward increasing Y.
pub fn cone_unstable_direction() -> CubeState {
    let cone = FixedPointId::ConePoint.coordinates();
    let rate = FixedPointId::ConePoint.eigenvalues()[2].re;
    let v = eigenvector(&jacobian_xyz(cone), rate)
        .expect("the cone point has a simple unstable eigenvalue");
    let flip = if v[1] < 0.0 { -1.0 } else { 1.0 };
    CubeState {
        x: flip * v[0],
        y: flip * v[1],
        z: flip * v[2],
    }
}

/// Integrate one branch of the unstable manifold of the cone point,
/// displaced by `delta` along the unstable eigenvector. The branch toward
/// increasing Y (positive sign) is trapped above Y_c and lands at the sink;
/// the other exits through Y = 0.
pub fn cs_unstable_manifold(
    sign: f64,
    delta: f64,
    config: &ShootingConfig,
) -> Result<Trajectory, Error> {
    if !(delta > 0.0 && delta < 1e-2) {
        return Err(Error::domain(
            "manifold displacement delta must lie in (0, 1e-2)",
        ));
    }
    if sign == 0.0 || !sign.is_finite() {
        return Err(Error::domain("branch sign must be a nonzero finite number"));
    }
    let cone = FixedPointId::ConePoint.coordinates();
    let v = cone_unstable_direction();
    let step = delta * if sign > 0.0 { 1.0 } else { -1.0 };
    let start = CubeState {
        x: cone.x + step * v.x,
        y: cone.y + step * v.y,
        z: cone.z + step * v.z,
    };
    integrate_from(start, 0.0, Direction::Forward, &config.integration)
}

/// Integrate backward from a segment start and report the closest approach
/// to the source at the origin; segment families are valid when this
/// reaches the given ball radius.
pub fn omega_origin_approach(start: CubeState, config: &ShootingConfig) -> Result<f64, Error> {
    let trajectory = integrate_from(start, 0.0, Direction::Backward, &config.integration)?;
    Ok(trajectory.min_distance_to(FixedPointId::Origin.coordinates()))
}
