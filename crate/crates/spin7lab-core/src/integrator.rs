//! Adaptive integration of the slow-time flow with event detection, plus
//! reconstruction of the metric coefficients (a, b, c, f)(t) along a flow
//! line by quadrature of the scale and arclength equations.
//!
//! The stepper is an embedded Dormand-Prince 5(4) pair with the classical
//! fifth-order dense output and a PI step controller. Events are localized
//! on the dense interpolant, so trajectories terminate exactly on the Y = 0
//! face or inside the capture ball of a catalogued fixed point.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::ode::{
    complete_metric, rhs_abcf, rhs_xyz, to_cube, CubeState, FixedPointId, MetricState,
    ALL_FIXED_POINTS,
};
use crate::Error;

/// Which way the slow time runs from the starting point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Integration controls.
#[derive(Clone, Copy, Debug)]
pub struct IntegrationOptions {
    /// Relative tolerance of the embedded error estimate.
    pub tol_rel: f64,
    /// Absolute tolerance of the embedded error estimate.
    pub tol_abs: f64,
    /// Bound on |s - s0|; reaching it ends integration with `ReachedSMax`.
    pub s_max: f64,
    /// Bound on accepted plus rejected steps.
    pub max_steps: usize,
    /// Capture ball radius around a catalogued fixed point.
    pub capture_distance: f64,
    /// Speed bound that must hold together with the distance criterion.
    pub capture_rhs: f64,
    /// Fixed step size; disables the error controller (order studies only).
    pub fixed_step: Option<f64>,
}

impl Default for IntegrationOptions {
    fn default() -> IntegrationOptions {
        IntegrationOptions {
            tol_rel: 1e-10,
            tol_abs: 1e-12,
            s_max: 200.0,
            max_steps: 1_000_000,
            capture_distance: 1e-6,
            capture_rhs: 1e-8,
            fixed_step: None,
        }
    }
}

/// Why integration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminalStatus {
    /// Entered the capture ball of this fixed point with near-zero speed.
    ReachedFixedPoint(FixedPointId),
    /// Crossed the Y = 0 face moving downward.
    ExitedAtYZero,
    /// Used up the allowed span of slow time without an event.
    ReachedSMax,
    /// The controller drove the step size to the floor, or the step budget
    /// ran out.
    StepFailure,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    FixedPointCapture(FixedPointId),
    YZeroExit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub s: f64,
    pub state: CubeState,
}

/// One accepted integration node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub s: f64,
    pub state: CubeState,
}

/// One reconstructed metric node; t is the arclength coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSample {
    pub s: f64,
    pub t: f64,
    pub state: MetricState,
}

/// Dense-output segment of one accepted step, valid for s in [s0, s0 + h]
/// (h is signed).
#[derive(Clone, Copy, Debug)]
struct DenseSegment<const N: usize> {
    s0: f64,
    h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    fn eval(&self, s: f64) -> [f64; N] {
        self.eval_theta((s - self.s0) / self.h)
    }

    fn eval_theta(&self, theta: f64) -> [f64; N] {
        let [c1, c2, c3, c4, c5] = self.cont;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = c1[i]
                + theta
                    * (c2[i] + (1.0 - theta) * (c3[i] + theta * (c4[i] + (1.0 - theta) * c5[i])));
        }
        out
    }

    fn covers(&self, s: f64) -> bool {
        let theta = (s - self.s0) / self.h;
        (-1e-12..=1.0 + 1e-12).contains(&theta)
    }
}

/// A flow line of the slow-time system together with everything later
/// analysis needs: the accepted samples, localized events, the terminal
/// status, dense output, and (after [`reconstruct_abcf`]) the metric
/// coefficients along the line.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub direction: Direction,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub reconstruction: Option<Vec<MetricSample>>,
    pub status: TerminalStatus,
    /// Accepted and rejected step counts, for diagnostics.
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    dense: Vec<DenseSegment<3>>,
}

impl Trajectory {
    pub fn start(&self) -> Sample {
        self.samples[0]
    }

    pub fn end(&self) -> Sample {
        *self.samples.last().expect("trajectory has samples")
    }

    /// Dense-output evaluation anywhere on the integrated span.
    pub fn state_at(&self, s: f64) -> Option<CubeState> {
        if self.dense.is_empty() {
            let only = self.samples.first()?;
            return (only.s == s).then_some(only.state);
        }
        // Segments are ordered along the run direction; binary search on the
        // signed start.
        let sign = self.direction.sign();
        let idx = self
            .dense
            .partition_point(|seg| (seg.s0 + seg.h - s) * sign < 0.0)
            .min(self.dense.len() - 1);
        let seg = &self.dense[idx];
        seg.covers(s).then(|| CubeState::from_array(seg.eval(s)))
    }

    /// Smallest distance from any sample to the given point.
    pub fn min_distance_to(&self, target: CubeState) -> f64 {
        self.samples
            .iter()
            .map(|sample| sample.state.distance(target))
            .fold(f64::INFINITY, f64::min)
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const MAX_SHRINK: f64 = 5.0;
const MAX_GROW: f64 = 10.0;

struct StepResult<const N: usize> {
    y1: [f64; N],
    f1: [f64; N],
    error: f64,
    cont: [[f64; N]; 5],
}

fn attempt_step<const N: usize>(
    rhs: &impl Fn([f64; N]) -> [f64; N],
    y0: [f64; N],
    f0: [f64; N],
    h: f64,
    tol_rel: f64,
    tol_abs: f64,
) -> StepResult<N> {
    let stage = |coefs: &[(f64, [f64; N])]| {
        let mut arg = y0;
        for (w, k) in coefs {
            for i in 0..N {
                arg[i] += h * w * k[i];
            }
        }
        rhs(arg)
    };

    let k1 = f0;
    let k2 = stage(&[(A21, k1)]);
    let k3 = stage(&[(A31, k1), (A32, k2)]);
    let k4 = stage(&[(A41, k1), (A42, k2), (A43, k3)]);
    let k5 = stage(&[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
    let k6 = stage(&[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);

    let mut y1 = y0;
    for i in 0..N {
        y1[i] += h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    let k7 = rhs(y1);

    let mut error = 0.0;
    for i in 0..N {
        let err_i = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = tol_abs + tol_rel * math::abs(y0[i]).max(math::abs(y1[i]));
        error += (err_i / scale) * (err_i / scale);
    }
    error = math::sqrt(error / N as f64);

    let mut cont = [[0.0; N]; 5];
    for i in 0..N {
        let ydiff = y1[i] - y0[i];
        let bspl = h * k1[i] - ydiff;
        cont[0][i] = y0[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * k7[i] - bspl;
        cont[4][i] = h
            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }

    StepResult {
        y1,
        f1: k7,
        error,
        cont,
    }
}

/// Hairer's starting step heuristic.
fn initial_step<const N: usize>(
    rhs: &impl Fn([f64; N]) -> [f64; N],
    y0: [f64; N],
    f0: [f64; N],
    sign: f64,
    tol_rel: f64,
    tol_abs: f64,
) -> f64 {
    let weighted_norm = |v: [f64; N]| {
        let mut acc = 0.0;
        for i in 0..N {
            let scale = tol_abs + tol_rel * math::abs(y0[i]);
            acc += (v[i] / scale) * (v[i] / scale);
        }
        math::sqrt(acc / N as f64)
    };
    let d0 = weighted_norm(y0);
    let d1 = weighted_norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let mut y1 = y0;
    for i in 0..N {
        y1[i] += sign * h0 * f0[i];
    }
    let f1 = rhs(y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = weighted_norm(diff) / h0;
    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        math::powf(0.01 / d_max, 0.2)
    };
    (100.0 * h0).min(h1)
}

struct Controller {
    facold: f64,
    last_rejected: bool,
}

impl Controller {
    fn new() -> Controller {
        Controller {
            facold: 1e-4,
            last_rejected: false,
        }
    }

    /// New |h| after an accepted step.
    fn accept(&mut self, h_abs: f64, error: f64) -> f64 {
        let fac11 = math::powf(error.max(1e-30), EXPO1);
        let fac = (fac11 / math::powf(self.facold, BETA) / SAFETY)
            .clamp(1.0 / MAX_GROW, MAX_SHRINK);
        let mut h_new = h_abs / fac;
        if self.last_rejected {
            h_new = h_new.min(h_abs);
        }
        self.facold = error.max(1e-4);
        self.last_rejected = false;
        h_new
    }

    /// New |h| after a rejected step.
    fn reject(&mut self, h_abs: f64, error: f64) -> f64 {
        let fac11 = math::powf(error, EXPO1);
        self.last_rejected = true;
        h_abs / (fac11 / SAFETY).min(MAX_SHRINK)
    }
}

fn validate(opts: &IntegrationOptions) -> Result<(), Error> {
    if !(opts.tol_rel > 0.0 && opts.tol_abs > 0.0) {
        return Err(Error::domain("tolerances must be positive"));
    }
    if !(opts.s_max > 0.0 && opts.s_max.is_finite()) {
        return Err(Error::domain("s_max must be positive and finite"));
    }
    if let Some(h) = opts.fixed_step {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::domain("fixed step must be positive and finite"));
        }
    }
    Ok(())
}

/// Integrate the slow-time flow from `initial` at `s0`.
///
/// Stops at the first event (fixed-point capture or downward Y = 0
/// crossing), at span `opts.s_max`, or on step failure; the cause lands in
/// [`Trajectory::status`] and never panics.
pub fn integrate_from(
    initial: CubeState,
    s0: f64,
    direction: Direction,
    opts: &IntegrationOptions,
) -> Result<Trajectory, Error> {
    validate(opts)?;
    if !initial.to_array().iter().all(|v| v.is_finite()) {
        return Err(Error::domain("initial state must be finite"));
    }

    let rhs = |v: [f64; 3]| rhs_xyz(CubeState::from_array(v)).to_array();
    let sign = direction.sign();

    let mut trajectory = Trajectory {
        direction,
        samples: vec![Sample {
            s: s0,
            state: initial,
        }],
        events: Vec::new(),
        reconstruction: None,
        status: TerminalStatus::ReachedSMax,
        steps_accepted: 0,
        steps_rejected: 0,
        dense: Vec::new(),
    };

    // The seed itself may already satisfy the capture criterion.
    if let Some(id) = capture_at(initial, opts) {
        trajectory.events.push(Event {
            kind: EventKind::FixedPointCapture(id),
            s: s0,
            state: initial,
        });
        trajectory.status = TerminalStatus::ReachedFixedPoint(id);
        return Ok(trajectory);
    }

    let mut s = s0;
    let mut y = initial.to_array();
    let mut f = rhs(y);
    let mut controller = Controller::new();
    let mut h_abs = match opts.fixed_step {
        Some(h) => h,
        None => initial_step(&rhs, y, f, sign, opts.tol_rel, opts.tol_abs).min(opts.s_max),
    };

    let mut steps = 0;
    loop {
        if steps >= opts.max_steps {
            trajectory.status = TerminalStatus::StepFailure;
            return Ok(trajectory);
        }
        steps += 1;

        let remaining = opts.s_max - math::abs(s - s0);
        if remaining <= 1e-14 * (1.0 + math::abs(s)) {
            trajectory.status = TerminalStatus::ReachedSMax;
            return Ok(trajectory);
        }
        let mut last_step = false;
        if h_abs >= remaining {
            h_abs = remaining;
            last_step = true;
        }
        if h_abs < 1e-14 * (1.0 + math::abs(s)) {
            trajectory.status = TerminalStatus::StepFailure;
            return Ok(trajectory);
        }

        let h = sign * h_abs;
        let result = attempt_step(&rhs, y, f, h, opts.tol_rel, opts.tol_abs);
        let accepted = opts.fixed_step.is_some() || result.error <= 1.0;
        if !accepted {
            h_abs = controller.reject(h_abs, result.error);
            trajectory.steps_rejected += 1;
            continue;
        }

        let segment = DenseSegment {
            s0: s,
            h,
            cont: result.cont,
        };
        let s1 = s + h;
        let y1 = CubeState::from_array(result.y1);

        // Downward crossing of the Y = 0 face ends the flow line; polish the
        // crossing on the dense interpolant.
        if y[1] > 0.0 && result.y1[1] <= 0.0 {
            let (s_exit, state_exit) = locate_y_zero(&segment, s, s1);
            trajectory.dense.push(segment);
            trajectory.samples.push(Sample {
                s: s_exit,
                state: state_exit,
            });
            trajectory.events.push(Event {
                kind: EventKind::YZeroExit,
                s: s_exit,
                state: state_exit,
            });
            trajectory.status = TerminalStatus::ExitedAtYZero;
            trajectory.steps_accepted += 1;
            return Ok(trajectory);
        }

        trajectory.dense.push(segment);
        trajectory.samples.push(Sample { s: s1, state: y1 });
        trajectory.steps_accepted += 1;

        if let Some(id) = capture_at(y1, opts) {
            trajectory.events.push(Event {
                kind: EventKind::FixedPointCapture(id),
                s: s1,
                state: y1,
            });
            trajectory.status = TerminalStatus::ReachedFixedPoint(id);
            return Ok(trajectory);
        }

        if last_step {
            trajectory.status = TerminalStatus::ReachedSMax;
            return Ok(trajectory);
        }

        s = s1;
        y = result.y1;
        f = result.f1;
        if opts.fixed_step.is_none() {
            h_abs = controller.accept(h_abs, result.error);
        }
    }
}

fn capture_at(state: CubeState, opts: &IntegrationOptions) -> Option<FixedPointId> {
    ALL_FIXED_POINTS.into_iter().find(|id| {
        state.distance(id.coordinates()) < opts.capture_distance
            && rhs_xyz(state).norm() < opts.capture_rhs
    })
}

/// Bisect the dense interpolant for the Y = 0 crossing inside one step.
fn locate_y_zero(segment: &DenseSegment<3>, s_lo: f64, s_hi: f64) -> (f64, CubeState) {
    let mut lo = s_lo;
    let mut hi = s_hi;
    let mut mid = hi;
    for _ in 0..128 {
        mid = 0.5 * (lo + hi);
        let y_mid = segment.eval(mid)[1];
        if math::abs(y_mid) <= 1e-13 {
            break;
        }
        if y_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if math::abs(hi - lo) <= f64::EPSILON * math::abs(hi).max(1.0) {
            mid = hi;
            break;
        }
    }
    let mut state = CubeState::from_array(segment.eval(mid));
    // The sample should sit on the face exactly as far as f64 allows.
    if math::abs(state.y) <= 1e-12 {
        state.y = 0.0;
    }
    (mid, state)
}

/// Gauss-Legendre 7-point rule on [0, 1] as (node, weight) pairs. Exact for
/// polynomials of degree at most 13, so in particular for the quartic dense
/// interpolant of one accepted step.
const GL7: [(f64, f64); 7] = [
    (0.025446043828620757, 0.06474248308443532),
    (0.12923440720030277, 0.1398526957446383),
    (0.2970774243113014, 0.19091502525255916),
    (0.5, 0.20897959183673448),
    (0.7029225756886985, 0.19091502525255916),
    (0.8707655927996972, 0.1398526957446383),
    (0.9745539561713792, 0.06474248308443532),
];

/// Signed integral of Y - X + 1 over [s_a, s_b] of one dense segment. The
/// integrand is the segment's own quartic, so the rule is exact.
fn scale_increment(seg: &DenseSegment<3>, s_a: f64, s_b: f64) -> f64 {
    let len = s_b - s_a;
    let mut acc = 0.0;
    for (u, w) in GL7 {
        let v = seg.eval(s_a + u * len);
        acc += w * (v[1] - v[0] + 1.0);
    }
    acc * len
}

/// Signed integral of a sqrt(Y) over [s_a, s_b] of one dense segment, given
/// ln a = la_a at s_a. Composite panels keep the exponential factor resolved;
/// when Y vanishes at s_b (a terminal Y = 0 event) the integrand has a
/// square-root endpoint singularity and the panels are graded toward it.
fn arclength_increment(
    seg: &DenseSegment<3>,
    s_a: f64,
    s_b: f64,
    la_a: f64,
    singular_end: bool,
) -> f64 {
    if s_a == s_b {
        return 0.0;
    }
    let integrand = |sigma: f64| {
        let v = seg.eval(sigma);
        math::exp(la_a + scale_increment(seg, s_a, sigma)) * math::sqrt(v[1].max(0.0))
    };
    let composite = |lo: f64, hi: f64| {
        let panels = (math::abs(hi - lo) / 0.25) as usize + 1;
        let mut acc = 0.0;
        for k in 0..panels {
            let p0 = lo + (hi - lo) * (k as f64 / panels as f64);
            let p1 = lo + (hi - lo) * ((k + 1) as f64 / panels as f64);
            let len = p1 - p0;
            let mut panel = 0.0;
            for (u, w) in GL7 {
                panel += w * integrand(p0 + u * len);
            }
            acc += panel * len;
        }
        acc
    };
    if !singular_end {
        return composite(s_a, s_b);
    }
    let mut acc = 0.0;
    let mut lo = s_a;
    let mut frac = 1.0;
    for _ in 0..48 {
        frac *= 0.5;
        let hi = s_b - (s_b - s_a) * frac;
        acc += composite(lo, hi);
        lo = hi;
    }
    // The dropped sliver next to s_b contributes O(frac^(3/2)).
    acc
}

/// Rebuild the metric coefficients along an integrated flow line from the
/// scale and arclength quadratures d(log a)/ds = Y - X + 1 and
/// dt/ds = a sqrt(Y), driven by the trajectory's own dense output. Quadrature
/// on the stored interpolant keeps the reconstruction pinned to the integrated
/// path; re-running the cube flow from the seed can land on the other side of
/// a separatrix after a long stay near a saddle, where roundoff decides the
/// exit branch. Populates `trajectory.reconstruction` at the trajectory's own
/// sample times.
///
/// `a0` and `t0` fix the scale and the arclength origin at the first sample.
/// The flow line must start with X > 0 and Y > 0; a terminal Y = 0 event
/// sample is skipped rather than reconstructed.
pub fn reconstruct_abcf(
    trajectory: &mut Trajectory,
    a0: f64,
    t0: f64,
    opts: &IntegrationOptions,
) -> Result<(), Error> {
    validate(opts)?;
    if !(a0 > 0.0) {
        return Err(Error::domain("reconstruction scale a0 must be positive"));
    }
    let start = trajectory.start();
    if !(start.state.x > 0.0 && start.state.y > 0.0) {
        return Err(Error::domain(
            "reconstruction needs X > 0 and Y > 0 at the first sample",
        ));
    }

    let mut reconstruction = Vec::with_capacity(trajectory.samples.len());
    let mut la = math::ln(a0);
    let mut t = t0;
    if let Ok(state) = complete_metric(start.state, a0) {
        reconstruction.push(MetricSample {
            s: start.s,
            t,
            state,
        });
    }

    let mut seg_index = 0;
    let mut pos = start.s;
    for sample in trajectory.samples.iter().skip(1) {
        // Flush segments that end before this sample, then integrate the
        // partial piece up to it inside the covering segment.
        while seg_index < trajectory.dense.len()
            && !trajectory.dense[seg_index].covers(sample.s)
        {
            let seg = &trajectory.dense[seg_index];
            let s_end = seg.s0 + seg.h;
            t += arclength_increment(seg, pos, s_end, la, false);
            la += scale_increment(seg, pos, s_end);
            pos = s_end;
            seg_index += 1;
        }
        let Some(seg) = trajectory.dense.get(seg_index) else {
            break;
        };
        let singular = sample.state.y <= 1e-12;
        t += arclength_increment(seg, pos, sample.s, la, singular);
        la += scale_increment(seg, pos, sample.s);
        pos = sample.s;
        match complete_metric(sample.state, math::exp(la)) {
            Ok(state) => reconstruction.push(MetricSample {
                s: sample.s,
                t,
                state,
            }),
            // Only a terminal Y = 0 event sample may fail completion.
            Err(_) => continue,
        }
    }
    if reconstruction.is_empty() {
        return Err(Error::domain("no reconstructable samples on this flow line"));
    }
    trajectory.reconstruction = Some(reconstruction);
    Ok(())
}

/// Largest relative defect |d(a,b,c,f)/dt - rhs| over the reconstruction,
/// with the derivative taken through the scale-invariant flow and the
/// completion map. This exercises every hand-derived identity in the
/// coordinate stack; a wrong sign anywhere shows up at order one.
pub fn reconstruction_residual(trajectory: &Trajectory) -> Result<f64, Error> {
    let Some(reconstruction) = &trajectory.reconstruction else {
        return Err(Error::domain("trajectory has no reconstruction"));
    };
    let mut worst = 0.0f64;
    for node in reconstruction {
        let m = node.state;
        let cube = to_cube(m)?;
        let (x, y, z) = (cube.x, cube.y, cube.z);
        let d = rhs_xyz(cube);
        let sy = math::sqrt(y);

        let sx = math::sqrt(x);
        let da = m.a * (y - x + 1.0);
        let dc = da / sx - 0.5 * m.a * d.x / (x * sx);
        let db = dc * sy + m.c * d.y / (2.0 * sy);
        let df = (d.z * m.a + z * da) / (x * sy)
            - z * m.a * d.x / (x * x * sy)
            - 0.5 * z * m.a * d.y / (x * sy * y);

        let dt_ds = m.a * m.b / m.c;
        let derived = MetricState::new(da / dt_ds, db / dt_ds, dc / dt_ds, df / dt_ds);
        let direct = rhs_abcf(m)?;
        for (got, want) in derived.to_array().iter().zip(direct.to_array()) {
            let rel = math::abs(got - want) / (1.0 + math::abs(want));
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Asymptotic data extracted from a flow line that ended at the
/// asymptotically locally conical sink.
#[derive(Clone, Copy, Debug)]
pub struct AlcReport {
    /// Asymptotic circle length: f at the final reconstructed sample.
    pub length: f64,
    pub a_over_t: f64,
    pub b_over_t: f64,
    pub c_over_t: f64,
    /// Fitted decay exponent of |f - length| over the final decade of t
    /// (positive means decay). Near the noise floor this fit degrades;
    /// it is reported, not thresholded.
    pub gamma_f: f64,
    /// Fitted decay exponent of |a/t - 1| over the final decade of t.
    pub gamma_a: f64,
}

/// Read off the asymptotic circle length and cone-ratio diagnostics from a
/// reconstructed trajectory that was captured by the ALC sink.
pub fn estimate_alc_length(trajectory: &Trajectory) -> Result<AlcReport, Error> {
    if trajectory.status != TerminalStatus::ReachedFixedPoint(FixedPointId::AlcPoint) {
        return Err(Error::domain(
            "asymptotic length is defined only for flow lines captured by ALCPoint",
        ));
    }
    let Some(reconstruction) = &trajectory.reconstruction else {
        return Err(Error::domain("trajectory has no reconstruction"));
    };
    let last = reconstruction.last().expect("reconstruction is nonempty");
    if !(last.t > 0.0) {
        return Err(Error::domain("final arclength must be positive"));
    }
    let length = last.state.f;

    let decade: Vec<&MetricSample> = reconstruction
        .iter()
        .filter(|node| node.t >= last.t / 10.0 && node.t > 0.0)
        .collect();
    let gamma_f = -loglog_slope(
        decade
            .iter()
            .take(decade.len().saturating_sub(1)) // last point anchors f "exactly"
            .map(|node| (node.t, math::abs(node.state.f - length))),
    );
    let gamma_a = -loglog_slope(
        decade
            .iter()
            .map(|node| (node.t, math::abs(node.state.a / node.t - 1.0))),
    );

    Ok(AlcReport {
        length,
        a_over_t: last.state.a / last.t,
        b_over_t: last.state.b / last.t,
        c_over_t: last.state.c / last.t,
        gamma_f,
        gamma_a,
    })
}

/// Least-squares slope of log|v| against log t, skipping nonpositive values.
fn loglog_slope(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut n = 0.0;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (t, v) in points {
        if !(t > 0.0 && v > 1e-300) {
            continue;
        }
        let (lx, ly) = (math::ln(t), math::ln(v));
        n += 1.0;
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    if n < 2.0 {
        return f64::NAN;
    }
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return f64::NAN;
    }
    (n * sxy - sx * sy) / denom
}
