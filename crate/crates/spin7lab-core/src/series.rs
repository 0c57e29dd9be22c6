//! Series-expansion data for launching and landing trajectories: the two
//! singular-orbit families (S^5 and CP^2 ends, truncated power series in the
//! arclength t), the two cone-end families built on the indicial roots of
//! the linearization at the conical solution, and a refinement engine that
//! extends the cone-end expansions order by order.
//!
//! Everything is phrased for the coefficient system da/dt = rhs_abcf. Near
//! the cone, coefficients are written as cone_i * t * (1 + x_i(t)); the
//! relative deviation x then satisfies the degree-0 flow t dx/dt = phi(x),
//! whose linearization carries the indicial roots nu0 < nu1 < 0 < nu2 along
//! with the exact reparametrization eigenvalue -1.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{charpoly4, cubic_roots, deflate_quartic, eigenvector, solve};
use crate::math;
use crate::ode::{cone_slopes, rhs_abcf, to_cube, CubeState, MetricState};
use crate::Error;

/// Default handoff time for the singular-orbit expansions.
pub const T_SERIES_DEFAULT: f64 = 1e-2;
/// Default innermost time at which the conical-end expansion is trusted.
pub const T_AC_MIN_DEFAULT: f64 = 10.0;

fn check_handoff(t: f64, t_series: f64) -> Result<(), Error> {
    if !(t_series > 0.0) {
        return Err(Error::domain("t_series must be positive"));
    }
    if !(t > 0.0 && t <= t_series) {
        return Err(Error::domain("t must lie in (0, t_series]"));
    }
    Ok(())
}

fn s5_value_deriv(mu: f64, t: f64) -> (MetricState, [f64; 4]) {
    let mu2 = mu * mu;
    let a3 = -(4.0 / 27.0) * (9.0 - mu2);
    let b1 = -mu / 3.0;
    let b2 = 1.0 - (5.0 / 18.0) * mu2;
    let b3 = mu * (126.0 - 167.0 * mu2) / 810.0;
    let f2 = (2.0 / 3.0) * mu * mu2;
    let (t2, t3) = (t * t, t * t * t);
    let state = MetricState::new(
        2.0 * t + a3 * t3,
        1.0 + b1 * t + b2 * t2 + b3 * t3,
        1.0 - b1 * t + b2 * t2 - b3 * t3,
        mu + f2 * t2,
    );
    let deriv = [
        2.0 + 3.0 * a3 * t2,
        b1 + 2.0 * b2 * t + 3.0 * b3 * t2,
        -b1 + 2.0 * b2 * t - 3.0 * b3 * t2,
        2.0 * f2 * t,
    ];
    (state, deriv)
}

/// Metric coefficients of the S^5-end family member with parameter `mu`,
/// evaluated from the truncated expansion around the singular orbit (scale
/// fixed by b(0) = 1). Valid handoff range is 0 < t <= t_series.
pub fn s5_initial_state(mu: f64, t: f64, t_series: f64) -> Result<MetricState, Error> {
    if !(mu >= 0.0) {
        return Err(Error::domain("mu must be nonnegative"));
    }
    check_handoff(t, t_series)?;
    Ok(s5_value_deriv(mu, t).0)
}

/// Cube coordinates of the S^5-end family from its own truncated expansion,
/// independent of the coefficient-level series.
pub fn s5_cube(mu: f64, t: f64) -> CubeState {
    let mu2 = mu * mu;
    let (t2, t3) = (t * t, t * t * t);
    CubeState::new(
        4.0 * t2 - (8.0 / 3.0) * mu * t3,
        1.0 - (4.0 / 3.0) * mu * t + (8.0 / 9.0) * mu2 * t2
            - (8.0 / 405.0) * mu * (83.0 * mu2 - 99.0) * t3,
        2.0 * mu * t - (8.0 / 3.0) * mu2 * t2 + (4.0 / 27.0) * mu * (31.0 * mu2 - 36.0) * t3,
    )
}

fn cp2_value_deriv(tau: f64, t: f64) -> (MetricState, [f64; 4]) {
    let a4 = (-104.0 - tau) / 288.0;
    let b3 = -(12.0 + tau) / 24.0;
    let c4 = (-140.0 + tau) / 288.0;
    let f3 = tau / 12.0;
    let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
    let state = MetricState::new(
        1.0 + (2.0 / 3.0) * t2 + a4 * t4,
        t + b3 * t3,
        1.0 + (5.0 / 6.0) * t2 + c4 * t4,
        t + f3 * t3,
    );
    let deriv = [
        (4.0 / 3.0) * t + 4.0 * a4 * t3,
        1.0 + 3.0 * b3 * t2,
        (5.0 / 3.0) * t + 4.0 * c4 * t3,
        1.0 + 3.0 * f3 * t2,
    ];
    (state, deriv)
}

/// Metric coefficients of the CP^2-end family member with parameter `tau`
/// (scale fixed by a(0) = 1). Here b is the collapsing coefficient: the
/// principal orbit is N(1,0) and smooth closure swaps the roles of a and b,
/// while the flow itself is unchanged. Valid handoff range 0 < t <= t_series.
pub fn cp2_initial_state(tau: f64, t: f64, t_series: f64) -> Result<MetricState, Error> {
    check_handoff(t, t_series)?;
    Ok(cp2_value_deriv(tau, t).0)
}

/// Cube coordinates of the CP^2-end family from its own truncated expansion.
pub fn cp2_cube(tau: f64, t: f64) -> CubeState {
    let (t2, t4) = (t * t, t * t * t * t);
    CubeState::new(
        1.0 - t2 / 3.0 - ((-40.0 + tau) / 72.0) * t4,
        t2 - ((32.0 + tau) / 12.0) * t4,
        t2 + ((-56.0 + tau) / 24.0) * t4,
    )
}

/// Truncation-error diagnostic of a series at t and t/2.
#[derive(Clone, Copy, Debug)]
pub struct ResidualReport {
    pub t: f64,
    /// r(t) = max_i |t * (d(series_i)/dt - rhs_i(series))|.
    pub r_t: f64,
    /// Same residual at t/2.
    pub r_half: f64,
    /// Measured r(t/2) / r(t).
    pub ratio: f64,
    /// Power-law prediction 2^(-p), where p is the exponent of the first
    /// neglected term of the t-multiplied residual. Above 1 for the conical
    /// end, where accuracy improves as t grows.
    pub nominal_ratio: f64,
}

fn metric_residual(state: MetricState, deriv: [f64; 4], t: f64) -> Result<f64, Error> {
    let rhs = rhs_abcf(state)?.to_array();
    let mut worst = 0.0f64;
    for i in 0..4 {
        worst = worst.max(math::abs(t * (deriv[i] - rhs[i])));
    }
    Ok(worst)
}

/// Residual diagnostic of the S^5-end expansion; the nominal halving ratio
/// is 2^-4 (the series is complete through t^3).
pub fn s5_residual_report(mu: f64, t: f64) -> Result<ResidualReport, Error> {
    if !(mu >= 0.0 && t > 0.0) {
        return Err(Error::domain("need mu >= 0 and t > 0"));
    }
    let residual = |t: f64| {
        let (state, deriv) = s5_value_deriv(mu, t);
        metric_residual(state, deriv, t)
    };
    let r_t = residual(t)?;
    let r_half = residual(0.5 * t)?;
    Ok(ResidualReport {
        t,
        r_t,
        r_half,
        ratio: r_half / r_t,
        nominal_ratio: math::powi(2.0, -4),
    })
}

/// Residual diagnostic of the CP^2-end expansion; nominal halving ratio 2^-5
/// (complete through t^4).
pub fn cp2_residual_report(tau: f64, t: f64) -> Result<ResidualReport, Error> {
    if !(t > 0.0) {
        return Err(Error::domain("need t > 0"));
    }
    let residual = |t: f64| {
        let (state, deriv) = cp2_value_deriv(tau, t);
        metric_residual(state, deriv, t)
    };
    let r_t = residual(t)?;
    let r_half = residual(0.5 * t)?;
    Ok(ResidualReport {
        t,
        r_t,
        r_half,
        ratio: r_half / r_t,
        nominal_ratio: math::powi(2.0, -5),
    })
}

/// One monomial of the relative-deviation flow phi: coeff times the product
/// of u_j = (1 + x_j) raised to (possibly negative) integer powers.
struct PhiTerm {
    coeff: f64,
    powers: [i32; 4],
}

/// Hand-expanded monomial table of phi(x) = rhs(cone * (1+x)) / cone - (1+x),
/// excluding the common -(1 + x_i) part, which every row handles separately.
fn phi_terms() -> [Vec<PhiTerm>; 4] {
    let s5 = math::sqrt(5.0);
    let qa = 1.5;
    let qb = (5.0 - s5) / 4.0;
    let qc = (5.0 + s5) / 4.0;
    // 2/(sqrt5 - 1) and 2/(sqrt5 + 1), rationalized.
    let pb = (s5 + 1.0) / 2.0;
    let pc = (s5 - 1.0) / 2.0;
    let term = |coeff: f64, powers: [i32; 4]| PhiTerm { coeff, powers };
    [
        vec![
            term(qb, [0, 1, -1, 0]),
            term(qc, [0, -1, 1, 0]),
            term(-qa, [2, -1, -1, 0]),
        ],
        vec![
            term(qc, [-1, 0, 1, 0]),
            term(qa, [1, 0, -1, 0]),
            term(-qb, [-1, 2, -1, 0]),
            term(-pb, [0, -1, 0, 1]),
        ],
        vec![
            term(qa, [1, -1, 0, 0]),
            term(qb, [-1, 1, 0, 0]),
            term(-qc, [-1, -1, 2, 0]),
            term(pc, [0, 0, -1, 1]),
        ],
        vec![term(pb, [0, -2, 0, 2]), term(-pc, [0, 0, -2, 2])],
    ]
}

/// phi evaluated numerically from the monomial table.
#[cfg(test)]
fn phi_numeric(x: [f64; 4]) -> [f64; 4] {
    let table = phi_terms();
    let u = [1.0 + x[0], 1.0 + x[1], 1.0 + x[2], 1.0 + x[3]];
    core::array::from_fn(|i| {
        let mut acc = -1.0 - x[i];
        for term in &table[i] {
            let mut v = term.coeff;
            for j in 0..4 {
                if term.powers[j] != 0 {
                    v *= math::powi(u[j], term.powers[j]);
                }
            }
            acc += v;
        }
        acc
    })
}

/// phi evaluated through the coefficient flow itself; validates the table.
#[cfg(test)]
fn phi_via_rhs(x: [f64; 4]) -> Result<[f64; 4], Error> {
    let cone = cone_slopes().to_array();
    let m = MetricState::from_array(core::array::from_fn(|i| cone[i] * (1.0 + x[i])));
    let rhs = rhs_abcf(m)?.to_array();
    Ok(core::array::from_fn(|i| rhs[i] / cone[i] - (1.0 + x[i])))
}

/// d(phi)/dx at x = 0, directly off the monomial table: a monomial
/// c * prod u_j^{p_j} contributes c * p_j to column j.
fn linearization_matrix() -> [[f64; 4]; 4] {
    let table = phi_terms();
    let mut l = [[0.0; 4]; 4];
    for i in 0..4 {
        l[i][i] = -1.0;
        for term in &table[i] {
            for j in 0..4 {
                l[i][j] += term.coeff * term.powers[j] as f64;
            }
        }
    }
    l
}

/// Linearization data at the conical solution: the 4x4 matrix of the
/// relative-deviation flow, its indicial roots, and the eigenvectors in the
/// normalizations the end expansions use.
#[derive(Clone, Copy, Debug)]
pub struct ConeLinearization {
    pub matrix: [[f64; 4]; 4],
    /// Indicial roots nu0 < nu1 < 0 < nu2.
    pub nu: [f64; 3],
    /// Eigenvector of the exact eigenvalue -1: the reparametrization mode
    /// (1, 1, 1, 1).
    pub v_reparam: [f64; 4],
    /// Eigenvectors for nu0, nu1, nu2; fourth entry normalized to 1 for nu0
    /// and to 10 for nu1 and nu2.
    pub v_nu: [[f64; 4]; 3],
}

/// Compute the cone linearization fresh: characteristic quartic, deflation
/// of the known -1 mode, and eigenvectors of the three indicial roots.
pub fn cone_linearization() -> ConeLinearization {
    let matrix = linearization_matrix();
    let quartic = charpoly4(&matrix);
    let (cubic, _remainder) = deflate_quartic(quartic, -1.0);
    let roots = cubic_roots(cubic[0], cubic[1], cubic[2]);
    let nu = core::array::from_fn(|k| {
        debug_assert!(roots[k].is_real(1e-9), "indicial roots are real");
        roots[k].re
    });
    let v_nu = core::array::from_fn(|k| {
        let v = eigenvector(&matrix, nu[k]).expect("indicial roots are simple");
        let target = if k == 0 { 1.0 } else { 10.0 };
        v.map(|e| e * target / v[3])
    });
    let v = eigenvector(&matrix, -1.0).expect("-1 is an eigenvalue");
    let v_reparam = v.map(|e| e / v[3]);
    ConeLinearization {
        matrix,
        nu,
        v_reparam,
        v_nu,
    }
}

/// Indicial roots nu0 < nu1 < nu2 of the cone.
pub fn indicial_roots() -> [f64; 3] {
    cone_linearization().nu
}

/// Which cone-end family an expansion belongs to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SeriesFamily {
    /// One-parameter deformation on the small-t side of the cone, built on
    /// the growing root nu2.
    CsDeformation { lambda: f64 },
    /// Two-parameter asymptotically conical end (t large), built on the
    /// decaying roots nu1 (amplitude alpha) and nu0 (amplitude beta).
    AcEnd { alpha: f64, beta: f64 },
}

/// One term of a generalized power series around the cone: contributes
/// coeff_i * t^exponent to the relative deviation x_i, with the family
/// amplitudes already folded into coeff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesTerm {
    /// Multi-index (h, 0) resp. (k, l) in the family amplitudes.
    pub powers: [u32; 2],
    pub exponent: f64,
    pub coeff: [f64; 4],
}

/// A truncated generalized power series around the conical solution.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesExpansion {
    pub family: SeriesFamily,
    /// Included total amplitude degree.
    pub order: u32,
    pub terms: Vec<SeriesTerm>,
}

impl SeriesExpansion {
    fn value_deriv(&self, t: f64) -> Result<(MetricState, [f64; 4]), Error> {
        if !(t > 0.0) {
            return Err(Error::domain("expansion requires t > 0"));
        }
        let cone = cone_slopes().to_array();
        let mut dev = [0.0f64; 4];
        let mut dev_weighted = [0.0f64; 4];
        for term in &self.terms {
            let p = math::powf(t, term.exponent);
            for i in 0..4 {
                dev[i] += term.coeff[i] * p;
                dev_weighted[i] += term.coeff[i] * (1.0 + term.exponent) * p;
            }
        }
        let state = MetricState::from_array(core::array::from_fn(|i| {
            cone[i] * t * (1.0 + dev[i])
        }));
        let deriv = core::array::from_fn(|i| cone[i] * (1.0 + dev_weighted[i]));
        Ok((state, deriv))
    }

    /// Metric coefficients at arclength t > 0: the cone plus deviations.
    pub fn eval(&self, t: f64) -> Result<MetricState, Error> {
        Ok(self.value_deriv(t)?.0)
    }

    /// Cube coordinates at arclength t > 0.
    pub fn eval_cube(&self, t: f64) -> Result<CubeState, Error> {
        to_cube(self.eval(t)?)
    }

    /// r(t) = max_i |t * (d(series_i)/dt - rhs_i(series))|.
    pub fn residual_at(&self, t: f64) -> Result<f64, Error> {
        let (state, deriv) = self.value_deriv(t)?;
        metric_residual(state, deriv, t)
    }

    /// Residual diagnostic at t and t/2 with the family's power-law nominal.
    pub fn residual_report(&self, t: f64) -> Result<ResidualReport, Error> {
        let r_t = self.residual_at(t)?;
        let r_half = self.residual_at(0.5 * t)?;
        let lin = cone_linearization();
        let lead = match self.family {
            SeriesFamily::CsDeformation { .. } => lin.nu[2],
            SeriesFamily::AcEnd { alpha, .. } => {
                if alpha != 0.0 {
                    lin.nu[1]
                } else {
                    lin.nu[0]
                }
            }
        };
        let p = 1.0 + (self.order + 1) as f64 * lead;
        Ok(ResidualReport {
            t,
            r_t,
            r_half,
            ratio: r_half / r_t,
            nominal_ratio: math::powf(2.0, -p),
        })
    }
}

/// Order-1 deformation of the cone on the small-t side: x = lambda t^nu2 v2.
pub fn cs_expansion(lambda: f64) -> SeriesExpansion {
    let lin = cone_linearization();
    SeriesExpansion {
        family: SeriesFamily::CsDeformation { lambda },
        order: 1,
        terms: vec![SeriesTerm {
            powers: [1, 0],
            exponent: lin.nu[2],
            coeff: lin.v_nu[2].map(|e| lambda * e),
        }],
    }
}

/// Order-1 conical-end data: x = alpha t^nu1 v1 + beta t^nu0 v0.
pub fn ac_expansion(alpha: f64, beta: f64) -> SeriesExpansion {
    let lin = cone_linearization();
    SeriesExpansion {
        family: SeriesFamily::AcEnd { alpha, beta },
        order: 1,
        terms: vec![
            SeriesTerm {
                powers: [1, 0],
                exponent: lin.nu[1],
                coeff: lin.v_nu[1].map(|e| alpha * e),
            },
            SeriesTerm {
                powers: [0, 1],
                exponent: lin.nu[0],
                coeff: lin.v_nu[0].map(|e| beta * e),
            },
        ],
    }
}

/// Metric coefficients of the small-t cone deformation at arclength t;
/// lambda = 0 returns the exact cone. Valid range 0 < t <= t_series.
pub fn cs_end_state(lambda: f64, t: f64, t_series: f64) -> Result<MetricState, Error> {
    check_handoff(t, t_series)?;
    cs_expansion(lambda).eval(t)
}

/// Metric coefficients of the conical end at arclength t >= t_ac_min;
/// (alpha, beta) = (0, 0) returns the exact cone. The decay rate toward the
/// cone is nu1 when alpha is nonzero and nu0 otherwise.
pub fn ac_end_state(alpha: f64, beta: f64, t: f64, t_ac_min: f64) -> Result<MetricState, Error> {
    if !(t_ac_min > 0.0) {
        return Err(Error::domain("t_ac_min must be positive"));
    }
    if !(t >= t_ac_min) {
        return Err(Error::domain("t below the conical-end threshold"));
    }
    ac_expansion(alpha, beta).eval(t)
}

/// Maximum total degree the refinement engine supports.
pub const MAX_SERIES_ORDER: u32 = 6;

const POLY_DEG: usize = MAX_SERIES_ORDER as usize;

/// Dense polynomial over the two order variables, truncated at total
/// degree 6. Entry (k, l) is the coefficient of the term with multi-index
/// (k, l); the t-exponent and amplitudes live outside this ring.
#[derive(Clone, Copy)]
struct Poly2 {
    c: [[f64; POLY_DEG + 1]; POLY_DEG + 1],
}

impl Poly2 {
    fn zero() -> Poly2 {
        Poly2 {
            c: [[0.0; POLY_DEG + 1]; POLY_DEG + 1],
        }
    }

    fn constant(v: f64) -> Poly2 {
        let mut p = Poly2::zero();
        p.c[0][0] = v;
        p
    }

    fn add(mut self, rhs: &Poly2) -> Poly2 {
        for i in 0..=POLY_DEG {
            for j in 0..=POLY_DEG - i {
                self.c[i][j] += rhs.c[i][j];
            }
        }
        self
    }

    fn scale(mut self, v: f64) -> Poly2 {
        for i in 0..=POLY_DEG {
            for j in 0..=POLY_DEG - i {
                self.c[i][j] *= v;
            }
        }
        self
    }

    fn mul(&self, rhs: &Poly2) -> Poly2 {
        let mut out = Poly2::zero();
        for i1 in 0..=POLY_DEG {
            for j1 in 0..=POLY_DEG - i1 {
                let lhs = self.c[i1][j1];
                if lhs == 0.0 {
                    continue;
                }
                for i2 in 0..=POLY_DEG - i1 - j1 {
                    for j2 in 0..=POLY_DEG - i1 - j1 - i2 {
                        out.c[i1 + i2][j1 + j2] += lhs * rhs.c[i2][j2];
                    }
                }
            }
        }
        out
    }

    /// 1/p for p with nonzero constant term, via the geometric series in
    /// q = p/p(0) - 1 (q has no constant term, so the series terminates).
    fn recip(&self) -> Poly2 {
        let p0 = self.c[0][0];
        debug_assert!(p0 != 0.0, "reciprocal needs a unit constant term");
        let mut q = self.scale(1.0 / p0);
        q.c[0][0] = 0.0;
        let mut acc = Poly2::constant(1.0);
        let mut power = Poly2::constant(1.0);
        for _ in 1..=POLY_DEG {
            power = power.mul(&q).scale(-1.0);
            acc = acc.add(&power);
        }
        acc.scale(1.0 / p0)
    }

    fn powi(&self, n: i32) -> Poly2 {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = Poly2::constant(1.0);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }
}

/// phi composed with a truncated series, done entirely in the polynomial
/// ring of the order variables.
fn phi_poly(x: &[Poly2; 4]) -> [Poly2; 4] {
    let table = phi_terms();
    let u: [Poly2; 4] = core::array::from_fn(|j| x[j].add(&Poly2::constant(1.0)));
    core::array::from_fn(|i| {
        let mut acc = x[i].scale(-1.0).add(&Poly2::constant(-1.0));
        for term in &table[i] {
            let mut v = Poly2::constant(term.coeff);
            for j in 0..4 {
                if term.powers[j] != 0 {
                    v = v.mul(&u[j].powi(term.powers[j]));
                }
            }
            acc = acc.add(&v);
        }
        acc
    })
}

/// Extend a cone-end expansion to `target_order` by solving the indicial
/// linear system (gamma Id - L) y = source at every new multi-index, where
/// the source is the corresponding coefficient of phi composed with the
/// lower-order series. Orders at or below the current one are returned
/// unchanged.
pub fn series_refine(
    expansion: &SeriesExpansion,
    target_order: u32,
) -> Result<SeriesExpansion, Error> {
    if target_order > MAX_SERIES_ORDER {
        return Err(Error::domain("target order above the supported degree"));
    }
    if target_order <= expansion.order {
        return Ok(expansion.clone());
    }
    let lin = cone_linearization();
    let (base, cs_only) = match expansion.family {
        SeriesFamily::CsDeformation { .. } => ([lin.nu[2], 0.0], true),
        SeriesFamily::AcEnd { .. } => ([lin.nu[1], lin.nu[0]], false),
    };
    let eigenvalues = [-1.0, lin.nu[0], lin.nu[1], lin.nu[2]];

    let mut x = [Poly2::zero(); 4];
    for term in &expansion.terms {
        let (k, l) = (term.powers[0] as usize, term.powers[1] as usize);
        for j in 0..4 {
            x[j].c[k][l] += term.coeff[j];
        }
    }

    let mut terms = expansion.terms.clone();
    for n in (expansion.order + 1)..=target_order {
        let phi = phi_poly(&x);
        for k in (0..=n).rev() {
            let l = n - k;
            if cs_only && l != 0 {
                continue;
            }
            let gamma = k as f64 * base[0] + l as f64 * base[1];
            let margin = eigenvalues
                .iter()
                .map(|e| math::abs(gamma - e))
                .fold(f64::INFINITY, f64::min);
            if margin < 1e-6 {
                return Err(Error::Resonance {
                    exponent: gamma,
                    order: n,
                });
            }
            let mut shifted = lin.matrix.map(|row| row.map(core::ops::Neg::neg));
            for d in 0..4 {
                shifted[d][d] += gamma;
            }
            let source: [f64; 4] = core::array::from_fn(|i| phi[i].c[k as usize][l as usize]);
            let Some(coeff) = solve(&shifted, &source) else {
                return Err(Error::Resonance {
                    exponent: gamma,
                    order: n,
                });
            };
            for j in 0..4 {
                x[j].c[k as usize][l as usize] = coeff[j];
            }
            terms.push(SeriesTerm {
                powers: [k, l],
                exponent: gamma,
                coeff,
            });
        }
    }
    Ok(SeriesExpansion {
        family: expansion.family,
        order: target_order,
        terms,
    })
}

/// Fit the coefficients of sum_k c_k t^{e_k} to g by interpolation on the
/// nodes t0 / 2^j, then once more with every node halved, and Richardson
/// extrapolation of the pair using `next_exponent`, the first exponent the
/// ansatz omits. Returns None if either interpolation system is singular.
pub fn fit_series_coefficients<const K: usize>(
    g: impl Fn(f64) -> f64,
    exponents: [f64; K],
    t0: f64,
    next_exponent: f64,
) -> Option<[f64; K]> {
    let solve_at = |top: f64| -> Option<[f64; K]> {
        let mut matrix = [[0.0; K]; K];
        let mut values = [0.0; K];
        for j in 0..K {
            let t = top * math::powi(0.5, j as i32);
            for k in 0..K {
                matrix[j][k] = math::powf(t, exponents[k]);
            }
            values[j] = g(t);
        }
        solve(&matrix, &values)
    };
    let coarse = solve_at(t0)?;
    let fine = solve_at(0.5 * t0)?;
    let mut out = [0.0; K];
    for k in 0..K {
        // The leading error of c_k scales like t^(next_exponent - e_k).
        let gain = math::powf(2.0, next_exponent - exponents[k]) - 1.0;
        out[k] = fine[k] + (fine[k] - coarse[k]) / gain;
    }
    Some(out)
}

/// Two-digit reference values for the cone data, retained as independent
/// cross-checks of the series engine. Each is a decimal rounding of the
/// corresponding computed quantity; compare with half-ulp tolerance of the
/// quoted precision, never use in computations.
pub mod anchors {
    /// Indicial roots, two decimals.
    pub const INDICIAL_ROOTS: [f64; 3] = [-7.46, -3.12, 2.58];
    /// Leading coefficients on (a, b, c, f) of the small-t deformation,
    /// two decimals, fourth entry normalized to 10.
    pub const CS_LEADING: [f64; 4] = [-0.25, -4.84, 0.09, 10.0];
    /// Leading coefficients of the nu1 mode of the conical end, one decimal,
    /// fourth entry 10.
    pub const AC_NU1_LEADING: [f64; 4] = [-10.6, 10.8, -5.1, 10.0];
    /// Leading coefficients of the nu0 mode, one decimal, fourth entry 1.
    pub const AC_NU0_LEADING: [f64; 4] = [3.6, 0.8, -4.8, 1.0];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{jacobian_xyz, FixedPointId};

    const NU0: f64 = -7.4575174881706285;
    const NU1: f64 = -3.12065253509227;
    const NU2: f64 = 2.5781700232628992;

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: got {got}, want {want} (tol {tol})"
        );
    }

    #[test]
    fn s5_matches_printed_evaluation() {
        let state = s5_initial_state(1.0, 0.01, T_SERIES_DEFAULT).unwrap();
        assert_close(state.a, 0.02 - (4.0 / 27.0) * 8.0 * 1e-6, 1e-15, "a");
        assert_close(state.a, 0.01999881, 1e-8, "a printed");
    }

    #[test]
    fn s5_limits_and_domain() {
        let state = s5_initial_state(0.7, 1e-9, T_SERIES_DEFAULT).unwrap();
        assert_close(state.a, 0.0, 1e-8, "a limit");
        assert_close(state.b, 1.0, 1e-8, "b limit");
        assert_close(state.c, 1.0, 1e-8, "c limit");
        assert_close(state.f, 0.7, 1e-8, "f limit");
        assert!(s5_initial_state(0.7, 0.0, T_SERIES_DEFAULT).is_err());
        assert!(s5_initial_state(0.7, 0.02, T_SERIES_DEFAULT).is_err());
        assert!(s5_initial_state(-0.1, 1e-3, T_SERIES_DEFAULT).is_err());
    }

    #[test]
    fn s5_at_mu_zero_has_equal_b_and_c() {
        let state = s5_initial_state(0.0, 5e-3, T_SERIES_DEFAULT).unwrap();
        assert_eq!(state.b, state.c);
        assert_eq!(state.f, 0.0);
    }

    #[test]
    fn s5_residual_scales_at_fourth_order() {
        let report = s5_residual_report(0.8, 1e-2).unwrap();
        let log_ratio = report.ratio.log2();
        assert!(
            (log_ratio + 4.0).abs() < 1.0,
            "halving ratio {} vs nominal {}",
            report.ratio,
            report.nominal_ratio
        );
    }

    #[test]
    fn cp2_matches_printed_evaluation() {
        let state = cp2_initial_state(0.0, 0.1, 0.1).unwrap();
        assert_close(state.a, 1.0066306, 1e-7, "a printed");
        let state = cp2_initial_state(0.0, 1e-6, T_SERIES_DEFAULT).unwrap();
        assert_close(state.b / 1e-6, 1.0, 1e-9, "b/t limit");
        assert_close(state.f / 1e-6, 1.0, 1e-9, "f/t limit");
        assert!(cp2_initial_state(0.0, 0.02, T_SERIES_DEFAULT).is_err());
    }

    #[test]
    fn cp2_residual_scales_at_fifth_order() {
        let report = cp2_residual_report(-3.0, 1e-2).unwrap();
        let log_ratio = report.ratio.log2();
        assert!(
            (log_ratio + 5.0).abs() < 1.0,
            "halving ratio {} vs nominal {}",
            report.ratio,
            report.nominal_ratio
        );
    }

    #[test]
    fn cube_expansions_agree_with_the_coordinate_map() {
        // Both routes truncate the same series, so they agree to O(t^4)
        // (S^5 side) resp. O(t^5) (CP^2 side), not exactly.
        for &(mu, tau, t) in &[(0.3, 2.0, 8e-3), (1.1, -4.0, 5e-3)] {
            let via_map = to_cube(s5_initial_state(mu, t, T_SERIES_DEFAULT).unwrap()).unwrap();
            let direct = s5_cube(mu, t);
            let bound = 100.0 * t * t * t * t;
            assert!(
                via_map.distance(direct) < bound,
                "s5 cube mismatch {}",
                via_map.distance(direct)
            );
            let via_map = to_cube(cp2_initial_state(tau, t, T_SERIES_DEFAULT).unwrap()).unwrap();
            let direct = cp2_cube(tau, t);
            assert!(
                via_map.distance(direct) < bound * t,
                "cp2 cube mismatch {}",
                via_map.distance(direct)
            );
        }
    }

    #[test]
    fn richardson_fit_recovers_the_cube_coefficients() {
        let mu = 0.9;
        let x = fit_series_coefficients(
            |t| to_cube(s5_initial_state(mu, t, 1.0).unwrap()).unwrap().x,
            [2.0, 3.0],
            8e-3,
            4.0,
        )
        .unwrap();
        assert_close(x[0], 4.0, 1e-3, "X t^2");
        assert_close(x[1], -(8.0 / 3.0) * mu, 1e-3, "X t^3");

        let y = fit_series_coefficients(
            |t| to_cube(s5_initial_state(mu, t, 1.0).unwrap()).unwrap().y,
            [0.0, 1.0, 2.0, 3.0],
            8e-3,
            4.0,
        )
        .unwrap();
        assert_close(y[0], 1.0, 1e-3, "Y 1");
        assert_close(y[1], -(4.0 / 3.0) * mu, 1e-3, "Y t");
        assert_close(y[2], (8.0 / 9.0) * mu * mu, 1e-3, "Y t^2");
        assert_close(
            y[3],
            -(8.0 / 405.0) * mu * (83.0 * mu * mu - 99.0),
            1e-3,
            "Y t^3",
        );

        let z = fit_series_coefficients(
            |t| to_cube(s5_initial_state(mu, t, 1.0).unwrap()).unwrap().z,
            [1.0, 2.0, 3.0],
            8e-3,
            4.0,
        )
        .unwrap();
        assert_close(z[0], 2.0 * mu, 1e-3, "Z t");
        assert_close(z[1], -(8.0 / 3.0) * mu * mu, 1e-3, "Z t^2");
        assert_close(
            z[2],
            (4.0 / 27.0) * mu * (31.0 * mu * mu - 36.0),
            1e-3,
            "Z t^3",
        );
    }

    #[test]
    fn phi_table_matches_the_coefficient_flow() {
        let grid = [-0.3, -0.05, 0.0, 0.2, 0.45];
        for &x1 in &grid {
            for &x2 in &grid {
                for &x3 in &grid {
                    for &x4 in &grid {
                        let x = [x1, x2, x3, x4];
                        let table = phi_numeric(x);
                        let direct = phi_via_rhs(x).unwrap();
                        for i in 0..4 {
                            assert_close(table[i], direct[i], 1e-12, "phi component");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn linearization_matches_finite_differences() {
        let l = linearization_matrix();
        let h = 1e-5;
        for j in 0..4 {
            let mut plus = [0.0; 4];
            let mut minus = [0.0; 4];
            plus[j] = h;
            minus[j] = -h;
            let fp = phi_numeric(plus);
            let fm = phi_numeric(minus);
            for i in 0..4 {
                assert_close(l[i][j], (fp[i] - fm[i]) / (2.0 * h), 1e-8, "dphi entry");
            }
        }
    }

    #[test]
    fn indicial_roots_and_eigenvectors_are_frozen() {
        let lin = cone_linearization();
        assert_close(lin.nu[0], NU0, 1e-12, "nu0");
        assert_close(lin.nu[1], NU1, 1e-12, "nu1");
        assert_close(lin.nu[2], NU2, 1e-12, "nu2");

        let quartic = charpoly4(&lin.matrix);
        let (_, remainder) = deflate_quartic(quartic, -1.0);
        assert!(remainder.abs() < 1e-12, "-1 deflation remainder {remainder}");
        for i in 0..4 {
            assert_close(lin.v_reparam[i], 1.0, 1e-12, "reparam mode");
        }

        let expected = [
            [3.5874415137536952, 0.7614173534482234, -4.848858867201915, 1.0],
            [-10.6285410317584, 10.769749659886497, -5.141208628128084, 10.0],
            [-0.24587410577847563, -4.842903531871898, 0.08877763765037676, 10.0],
        ];
        for k in 0..3 {
            for i in 0..4 {
                assert_close(lin.v_nu[k][i], expected[k][i], 1e-9, "eigenvector entry");
            }
        }

        // Eigen residual L v = nu v, for the acceptance gate's threshold.
        for k in 0..3 {
            for i in 0..4 {
                let lv: f64 = (0..4).map(|j| lin.matrix[i][j] * lin.v_nu[k][j]).sum();
                assert_close(lv, lin.nu[k] * lin.v_nu[k][i], 1e-9, "eigen residual");
            }
        }
    }

    #[test]
    fn rounded_anchors_agree_with_the_engine() {
        let lin = cone_linearization();
        for k in 0..3 {
            assert_close(lin.nu[k], anchors::INDICIAL_ROOTS[k], 5e-3, "root anchor");
        }
        for i in 0..4 {
            assert_close(lin.v_nu[2][i], anchors::CS_LEADING[i], 5e-3, "cs anchor");
            assert_close(lin.v_nu[1][i], anchors::AC_NU1_LEADING[i], 5e-2, "nu1 anchor");
            assert_close(lin.v_nu[0][i], anchors::AC_NU0_LEADING[i], 5e-2, "nu0 anchor");
        }
    }

    #[test]
    fn cube_side_leading_combinations_are_frozen() {
        // Relative deviations of X, Y, Z inherit the linear combinations
        // 2(v_a - v_c), 2(v_b - v_c), v_a + v_b + v_f - 3 v_c.
        let v = cone_linearization().v_nu[2];
        assert_close(2.0 * (v[0] - v[2]), -0.6693034868577048, 1e-9, "X combo");
        assert_close(2.0 * (v[1] - v[2]), -9.86336233904455, 1e-9, "Y combo");
        assert_close(
            v[0] + v[1] + v[3] - 3.0 * v[2],
            4.644889449398496,
            1e-9,
            "Z combo",
        );
    }

    #[test]
    fn cone_jacobian_eigenvalues_are_scaled_indicial_roots() {
        // The slow-time linearization at the cone point equals the indicial
        // linearization up to the clock factor 1 - 1/sqrt(5).
        let lin = cone_linearization();
        let factor = 1.0 - 1.0 / 5.0f64.sqrt();
        let eigs = crate::linalg::eigenvalues3(&jacobian_xyz(FixedPointId::ConePoint.coordinates()));
        for k in 0..3 {
            assert!(eigs[k].is_real(1e-10), "cone spectrum is real");
            assert_close(eigs[k].re, factor * lin.nu[k], 1e-10, "scaled root");
        }
    }

    #[test]
    fn cs_end_state_examples() {
        let cone = cone_slopes();
        let state = cs_end_state(0.0, 0.5, 1.0).unwrap();
        assert_close(state.a, cone.a * 0.5, 1e-15, "cone a");
        assert_close(state.b, cone.b * 0.5, 1e-15, "cone b");
        assert_close(state.c, cone.c * 0.5, 1e-15, "cone c");
        assert_close(state.f, cone.f * 0.5, 1e-15, "cone f");

        // Y-deviation carries the 9.86 coefficient with sign opposite lambda.
        let t = 1e-3;
        let y_c = FixedPointId::ConePoint.coordinates().y;
        let cube = to_cube(cs_end_state(-1.0, t, T_SERIES_DEFAULT).unwrap()).unwrap();
        let rel = (cube.y / y_c - 1.0) / math::powf(t, NU2);
        assert_close(rel, 9.86336233904455, 2e-3, "Y deviation");
        assert!(cube.y > y_c, "lambda < 0 pushes Y above the cone");
    }

    #[test]
    fn ac_end_state_respects_the_scaling_action() {
        // state(alpha, beta; t) = kappa * state(kappa^nu1 alpha,
        // kappa^nu0 beta; t / kappa): rescaling the metric reparametrizes
        // the family.
        let (alpha, beta) = (0.2, -0.4);
        let kappa = 1.3f64;
        let t = 30.0;
        let lhs = ac_end_state(alpha, beta, t, T_AC_MIN_DEFAULT).unwrap();
        let rhs = ac_end_state(
            math::powf(kappa, NU1) * alpha,
            math::powf(kappa, NU0) * beta,
            t / kappa,
            T_AC_MIN_DEFAULT,
        )
        .unwrap();
        for i in 0..4 {
            assert_close(
                lhs.to_array()[i],
                kappa * rhs.to_array()[i],
                1e-12 * lhs.to_array()[i].abs(),
                "scaling action",
            );
        }
        assert!(ac_end_state(0.1, 0.1, 5.0, T_AC_MIN_DEFAULT).is_err());
    }

    #[test]
    fn ac_f_deviation_has_the_printed_leading_coefficient() {
        let t = 50.0;
        let cone = cone_slopes();
        let state = ac_end_state(1.0, 0.0, t, T_AC_MIN_DEFAULT).unwrap();
        let rel = (state.f / (cone.f * t) - 1.0) / math::powf(t, NU1);
        assert_close(rel, 10.0, 1e-9, "f deviation");
    }

    #[test]
    fn cs_refinement_matches_frozen_coefficients() {
        let refined = series_refine(&cs_expansion(1.0), 4).unwrap();
        let expected: [(u32, [f64; 4]); 3] = [
            (2, [-0.97623407, -72.21349414, 2.39390119, 184.32392582]),
            (3, [4.12455607, -1306.10161534, 52.06353614, 3936.83153336]),
            (4, [317.79465881, -26046.73445121, 1127.99438272, 89933.69363232]),
        ];
        for (h, want) in expected {
            let term = refined
                .terms
                .iter()
                .find(|term| term.powers == [h, 0])
                .expect("term present");
            assert_close(term.exponent, h as f64 * NU2, 1e-10, "cs exponent");
            for i in 0..4 {
                let tol = 1e-6 * want[i].abs().max(1.0);
                assert_close(term.coeff[i], want[i], tol, "cs coefficient");
            }
        }
    }

    #[test]
    fn ac_refinement_matches_frozen_coefficients() {
        let refined = series_refine(&ac_expansion(1.0, 1.0), 2).unwrap();
        let expected: [([u32; 2], [f64; 4]); 3] = [
            ([2, 0], [-221.22029726, 51.18932694, 225.07411509, 13.47384537]),
            ([1, 1], [-105.8618574, 22.30198277, 73.83005425, 19.45964076]),
            ([0, 2], [3.34346046, -8.07918019, 12.97192249, 0.9119978]),
        ];
        for (powers, want) in expected {
            let term = refined
                .terms
                .iter()
                .find(|term| term.powers == powers)
                .expect("term present");
            let gamma = powers[0] as f64 * NU1 + powers[1] as f64 * NU0;
            assert_close(term.exponent, gamma, 1e-10, "ac exponent");
            for i in 0..4 {
                let tol = 1e-6 * want[i].abs().max(1.0);
                assert_close(term.coeff[i], want[i], tol, "ac coefficient");
            }
        }
    }

    #[test]
    fn refinement_reduces_the_residual() {
        let t = 1e-2;
        let order1 = cs_expansion(0.7);
        let order2 = series_refine(&order1, 2).unwrap();
        let order3 = series_refine(&order2, 3).unwrap();
        let r1 = order1.residual_at(t).unwrap();
        let r2 = order2.residual_at(t).unwrap();
        let r3 = order3.residual_at(t).unwrap();
        assert!(r2 < r1 / 100.0, "order 2: {r1} -> {r2}");
        assert!(r3 < r2 / 100.0, "order 3: {r2} -> {r3}");

        let ac1 = ac_expansion(1.0, 1.0);
        let ac2 = series_refine(&ac1, 2).unwrap();
        let s1 = ac1.residual_at(20.0).unwrap();
        let s2 = ac2.residual_at(20.0).unwrap();
        assert!(s2 < s1 / 50.0, "ac refine: {s1} -> {s2}");
    }

    #[test]
    fn residual_ratio_tracks_the_nominal_power_law() {
        let report = cs_expansion(1.0).residual_report(1e-2).unwrap();
        assert!(
            (report.ratio.log2() - report.nominal_ratio.log2()).abs() < 1.0,
            "cs ratio {} vs nominal {}",
            report.ratio,
            report.nominal_ratio
        );
        let report = ac_expansion(1.0, 0.0).residual_report(30.0).unwrap();
        assert!(
            (report.ratio.log2() - report.nominal_ratio.log2()).abs() < 1.0,
            "ac ratio {} vs nominal {}",
            report.ratio,
            report.nominal_ratio
        );
    }

    #[test]
    fn refining_the_exact_cone_changes_nothing() {
        let base = cs_expansion(0.0);
        let refined = series_refine(&base, 2).unwrap();
        for term in &refined.terms {
            assert_eq!(term.coeff, [0.0; 4], "cone sources vanish");
        }
        let t = 5e-3;
        assert_eq!(
            refined.eval(t).unwrap().to_array(),
            base.eval(t).unwrap().to_array()
        );
    }

    #[test]
    fn refinement_rejects_unsupported_orders() {
        assert!(series_refine(&cs_expansion(1.0), MAX_SERIES_ORDER + 1).is_err());
        let same = series_refine(&cs_expansion(1.0), 1).unwrap();
        assert_eq!(same.terms.len(), 1);
    }
}
