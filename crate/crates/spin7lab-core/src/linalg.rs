//! Small dense linear algebra for linearization work: characteristic
//! polynomials, eigenvectors by nullspace elimination, and direct solves.
//! Everything is sized for the 3x3 and 4x4 matrices this crate meets, and is
//! deterministic so downstream output stays byte-reproducible.

use core::fmt;

use crate::math;

/// Complex number with just the operations spectra need.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const fn new(re: f64, im: f64) -> Complex {
        Complex { re, im }
    }

    pub const fn real(re: f64) -> Complex {
        Complex { re, im: 0.0 }
    }

    pub fn norm(self) -> f64 {
        math::sqrt(self.re * self.re + self.im * self.im)
    }

    /// True when the imaginary part vanishes relative to the magnitude.
    pub fn is_real(self, tol: f64) -> bool {
        math::abs(self.im) <= tol * (1.0 + self.norm())
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im == 0.0 {
            write!(out, "{}", self.re)
        } else if self.im > 0.0 {
            write!(out, "{}+{}i", self.re, self.im)
        } else {
            write!(out, "{}-{}i", self.re, -self.im)
        }
    }
}

/// Roots of x^3 + p2 x^2 + p1 x + p0, ordered by real part, then imaginary
/// part. Three-real-root configurations go through the trigonometric form,
/// the rest through Cardano; real roots get a Newton polish on the original
/// cubic so eigenvalues come out near machine precision.
pub fn cubic_roots(p2: f64, p1: f64, p0: f64) -> [Complex; 3] {
    // Depressed form y^3 + p y + q with x = y + shift.
    let p = p1 - p2 * p2 / 3.0;
    let q = 2.0 * p2 * p2 * p2 / 27.0 - p2 * p1 / 3.0 + p0;
    let shift = -p2 / 3.0;
    let disc = 0.25 * q * q + p * p * p / 27.0;
    // Double roots sit at disc = 0; roundoff must not push them onto the
    // complex-pair branch.
    let disc_scale = (0.25 * q * q).max(math::abs(p * p * p) / 27.0);
    let effectively_real = disc <= 1e-12 * disc_scale;

    let mut roots = if effectively_real {
        // Three real roots; up to roundoff, disc <= 0 forces p <= 0.
        let m = 2.0 * math::sqrt((-p).max(0.0) / 3.0);
        if m == 0.0 {
            [Complex::real(shift); 3]
        } else {
            let phi = math::acos((3.0 * q / (p * m)).clamp(-1.0, 1.0)) / 3.0;
            let mut out = [Complex::real(0.0); 3];
            for (k, slot) in out.iter_mut().enumerate() {
                let angle = phi - 2.0 * core::f64::consts::PI * k as f64 / 3.0;
                *slot = Complex::real(m * math::cos(angle) + shift);
            }
            out
        }
    } else {
        let sq = math::sqrt(disc);
        let u = math::cbrt(-0.5 * q + sq);
        let v = math::cbrt(-0.5 * q - sq);
        let re = -0.5 * (u + v) + shift;
        let im = 0.5 * math::sqrt(3.0) * (u - v);
        [
            Complex::real(u + v + shift),
            Complex::new(re, im),
            Complex::new(re, -im),
        ]
    };

    for root in roots.iter_mut() {
        if root.im == 0.0 {
            root.re = polish_cubic_root(root.re, p2, p1, p0);
        }
        // Flush signed zeros so total_cmp sorting is sign-of-zero agnostic.
        root.re += 0.0;
        root.im += 0.0;
    }
    roots.sort_unstable_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

fn polish_cubic_root(mut x: f64, p2: f64, p1: f64, p0: f64) -> f64 {
    let eval = |x: f64| ((x + p2) * x + p1) * x + p0;
    for _ in 0..2 {
        let value = eval(x);
        if value == 0.0 {
            break;
        }
        let slope = (3.0 * x + 2.0 * p2) * x + p1;
        if slope == 0.0 {
            break;
        }
        let step = value / slope;
        // This is a cleanup pass: closed-form roots are already close, and
        // near a double root Newton lunges on cancellation noise. Take only
        // tiny steps, and only when they actually shrink the residual.
        if !step.is_finite() || math::abs(step) > 1e-6 * (1.0 + math::abs(x)) {
            break;
        }
        let candidate = x - step;
        if math::abs(eval(candidate)) > math::abs(value) {
            break;
        }
        x = candidate;
    }
    x
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Eigenvalues of a real 3x3 matrix via its characteristic cubic
/// lambda^3 - tr lambda^2 + (sum of principal minors) lambda - det.
pub fn eigenvalues3(m: &[[f64; 3]; 3]) -> [Complex; 3] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
        + (m[0][0] * m[1][1] - m[0][1] * m[1][0]);
    cubic_roots(-tr, minors, -det3(m))
}

/// Monic characteristic polynomial of a 4x4 matrix by Faddeev-LeVerrier:
/// returns [q3, q2, q1, q0] with p(x) = x^4 + q3 x^3 + q2 x^2 + q1 x + q0.
pub fn charpoly4(m: &[[f64; 4]; 4]) -> [f64; 4] {
    let mut coeffs = [0.0; 4];
    let mut work = *m;
    for k in 1..=4usize {
        let trace: f64 = (0..4).map(|i| work[i][i]).sum();
        let c = -trace / k as f64;
        coeffs[k - 1] = c;
        if k == 4 {
            break;
        }
        let mut shifted = work;
        for i in 0..4 {
            shifted[i][i] += c;
        }
        work = mat_mul4(m, &shifted);
    }
    coeffs
}

fn mat_mul4(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Divide the monic quartic x^4 + q3 x^3 + ... + q0 by (x - root). Returns
/// the monic cubic quotient coefficients [p2, p1, p0] and the remainder,
/// which measures how far `root` is from being an exact root.
pub fn deflate_quartic(q: [f64; 4], root: f64) -> ([f64; 3], f64) {
    let b2 = q[0] + root;
    let b1 = q[1] + root * b2;
    let b0 = q[2] + root * b1;
    let rem = q[3] + root * b0;
    ([b2, b1, b0], rem)
}

/// Unit-norm vector v with (m - lambda I) v = 0, if elimination exposes a
/// kernel. The sign convention (largest-magnitude entry positive) keeps
/// results deterministic.
pub fn eigenvector<const N: usize>(m: &[[f64; N]; N], lambda: f64) -> Option<[f64; N]> {
    let mut shifted = *m;
    for i in 0..N {
        shifted[i][i] -= lambda;
    }
    nullspace(shifted)
}

/// One kernel vector of a rank-deficient matrix via partial-pivot
/// elimination. Returns None when the matrix looks numerically invertible.
fn nullspace<const N: usize>(mut m: [[f64; N]; N]) -> Option<[f64; N]> {
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(math::abs(v)))
        .max(1.0);
    let threshold = 1e-8 * scale;

    let mut pivot_col = [usize::MAX; N];
    let mut rank = 0;
    for col in 0..N {
        let pivot_row = (rank..N).max_by(|&i, &j| {
            math::abs(m[i][col]).total_cmp(&math::abs(m[j][col]))
        })?;
        if math::abs(m[pivot_row][col]) <= threshold {
            continue; // free column
        }
        m.swap(rank, pivot_row);
        for row in rank + 1..N {
            let factor = m[row][col] / m[rank][col];
            for j in col..N {
                m[row][j] -= factor * m[rank][j];
            }
        }
        pivot_col[rank] = col;
        rank += 1;
    }
    if rank == N {
        return None;
    }

    let free = (0..N).find(|col| !pivot_col[..rank].contains(col))?;
    let mut v = [0.0; N];
    v[free] = 1.0;
    for row in (0..rank).rev() {
        let col = pivot_col[row];
        let mut acc = 0.0;
        for j in col + 1..N {
            acc += m[row][j] * v[j];
        }
        v[col] = -acc / m[row][col];
    }
    Some(normalize(v))
}

fn normalize<const N: usize>(mut v: [f64; N]) -> [f64; N] {
    let norm = math::sqrt(v.iter().map(|x| x * x).sum());
    let lead = v
        .iter()
        .copied()
        .max_by(|a, b| math::abs(*a).total_cmp(&math::abs(*b)))
        .unwrap_or(1.0);
    let sign = if lead < 0.0 { -1.0 } else { 1.0 };
    for x in v.iter_mut() {
        *x *= sign / norm;
    }
    v
}

/// Solve an N x N linear system by Gaussian elimination with partial
/// pivoting. None means the pivot sequence broke down (singular system).
pub fn solve<const N: usize>(a: &[[f64; N]; N], b: &[f64; N]) -> Option<[f64; N]> {
    let mut m = *a;
    let mut rhs = *b;
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(math::abs(v)))
        .max(1.0);

    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| math::abs(m[i][col]).total_cmp(&math::abs(m[j][col])))?;
        if math::abs(m[pivot][col]) <= 1e-13 * scale {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..N {
            let factor = m[row][col] / m[col][col];
            for j in col..N {
                m[row][j] -= factor * m[col][j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let mut acc = rhs[row];
        for j in row + 1..N {
            acc -= m[row][j] * x[j];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: got {got}, want {want} (tol {tol})"
        );
    }

    #[test]
    fn cubic_with_three_real_roots() {
        // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        let roots = cubic_roots(-6.0, 11.0, -6.0);
        for (root, want) in roots.iter().zip([1.0, 2.0, 3.0]) {
            assert_eq!(root.im, 0.0);
            assert_close(root.re, want, 1e-14, "real root");
        }
    }

    #[test]
    fn cubic_with_complex_pair() {
        // x^3 + x = x (x-i)(x+i)
        let roots = cubic_roots(0.0, 1.0, 0.0);
        assert_close(roots[0].re, 0.0, 1e-15, "conjugate re");
        assert_close(roots[0].im, -1.0, 1e-15, "conjugate im");
        assert_close(roots[1].re, 0.0, 1e-15, "real root");
        assert_eq!(roots[1].im, 0.0);
        assert_close(roots[2].im, 1.0, 1e-15, "conjugate im");
    }

    #[test]
    fn cubic_with_double_root() {
        // (x-1)^2 (x+2) = x^3 - 3x + 2
        let roots = cubic_roots(0.0, -3.0, 2.0);
        assert_close(roots[0].re, -2.0, 1e-12, "simple root");
        assert_close(roots[1].re, 1.0, 1e-7, "double root");
        assert_close(roots[2].re, 1.0, 1e-7, "double root");
    }

    #[test]
    fn eigen3_diagonal_plus_rotation() {
        let m = [[2.0, -3.0, 0.0], [3.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let eigs = eigenvalues3(&m);
        assert_close(eigs[0].re, 2.0, 1e-14, "pair re");
        assert_close(eigs[0].im, -3.0, 1e-14, "pair im");
        assert_close(eigs[2].re, 5.0, 1e-14, "real eig");
    }

    #[test]
    fn eigenvector_of_symmetric_matrix() {
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 7.0]];
        let v = eigenvector(&m, 3.0).expect("kernel vector");
        let r = 1.0 / 2.0f64.sqrt();
        assert_close(v[0], r, 1e-12, "v[0]");
        assert_close(v[1], r, 1e-12, "v[1]");
        assert_close(v[2], 0.0, 1e-12, "v[2]");
    }

    #[test]
    fn eigenvector_rejects_regular_value() {
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 7.0]];
        assert!(eigenvector(&m, 0.5).is_none());
    }

    #[test]
    fn charpoly_of_companion_matrix() {
        // Companion of x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let m = [
            [10.0, -35.0, 50.0, -24.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ];
        let q = charpoly4(&m);
        for (got, want) in q.iter().zip([-10.0, 35.0, -50.0, 24.0]) {
            assert_close(*got, want, 1e-10, "charpoly coefficient");
        }
        let (cubic, rem) = deflate_quartic(q, 1.0);
        assert_close(rem, 0.0, 1e-10, "deflation remainder");
        let roots = cubic_roots(cubic[0], cubic[1], cubic[2]);
        for (root, want) in roots.iter().zip([2.0, 3.0, 4.0]) {
            assert_close(root.re, want, 1e-9, "deflated root");
        }
    }

    #[test]
    fn solve_4x4_roundtrip() {
        let a = [
            [4.0, 1.0, 0.0, 2.0],
            [1.0, 5.0, 1.0, 0.0],
            [0.0, 1.0, 6.0, 1.5],
            [2.0, 0.0, 1.5, 7.0],
        ];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut b = [0.0; 4];
        for i in 0..4 {
            b[i] = (0..4).map(|j| a[i][j] * x_true[j]).sum();
        }
        let x = solve(&a, &b).expect("solvable");
        for (got, want) in x.iter().zip(x_true) {
            assert_close(*got, want, 1e-12, "solution entry");
        }
    }

    #[test]
    fn solve_detects_singular() {
        let a = [
            [1.0, 2.0, 3.0, 4.0],
            [2.0, 4.0, 6.0, 8.0],
            [0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
        ];
        assert!(solve(&a, &[1.0, 2.0, 3.0, 4.0]).is_none());
    }
}
