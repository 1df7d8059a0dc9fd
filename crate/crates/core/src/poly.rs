//! Root solving for the small monic polynomials arising in stability checks.
//!
//! Stability polynomials have degree k (the step count, rarely above 4) and
//! complex coefficients once a complex test value h*lambda enters, so a
//! simultaneous Aberth-Ehrlich iteration is used for every degree above two;
//! degrees one and two are solved in closed form.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

/// Root iteration failed to settle within the iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("polynomial root iteration failed to converge")]
pub struct RootFindingError;

const MAX_ITERATIONS: usize = 600;
const STEP_TOL: f64 = 1e-13;
// Near-multiple roots are conditioned like sqrt(eps); steps stagnating below
// this are accepted as converged-to-working-precision.
const STAGNATION_TOL: f64 = 1e-6;

/// Roots of the monic polynomial `z^n + c[n-1] z^(n-1) + ... + c[0]`,
/// with `low` holding `c[0]..c[n-1]`.
pub fn monic_roots(low: &[Complex64]) -> Result<Vec<Complex64>, RootFindingError> {
    let n = low.len();
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![-low[0]]),
        2 => Ok(quadratic_roots(low[1], low[0]).to_vec()),
        _ => aberth(low),
    }
}

/// Roots of `z^2 + b z + c`.
fn quadratic_roots(b: Complex64, c: Complex64) -> [Complex64; 2] {
    let disc = (b * b - 4.0 * c).sqrt();
    // Pick the sign that avoids cancellation in -b -+ disc.
    let q = if (b.re * disc.re + b.im * disc.im) >= 0.0 {
        -(b + disc) / 2.0
    } else {
        -(b - disc) / 2.0
    };
    if q.norm() == 0.0 {
        [Complex64::new(0.0, 0.0), -b]
    } else {
        [q, c / q]
    }
}

fn eval_with_derivative(low: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    // Horner on the monic polynomial.
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in low.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn aberth(low: &[Complex64]) -> Result<Vec<Complex64>, RootFindingError> {
    let n = low.len();
    // Deflate exact zero roots so the iteration never starts on a root.
    let zeros = low.iter().take_while(|c| c.norm() == 0.0).count();
    if zeros > 0 {
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
        roots.extend(monic_roots(&low[zeros..])?);
        return Ok(roots);
    }
    // Cauchy bound on root magnitudes seeds a slightly asymmetric circle.
    let radius = 1.0 + low.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|j| {
            let angle = core::f64::consts::TAU * j as f64 / n as f64 + 0.4;
            radius * 0.7 * Complex64::new(angle.cos(), angle.sin())
        })
        .collect();
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        worst = 0.0;
        for j in 0..n {
            let (p, dp) = eval_with_derivative(low, z[j]);
            if p.norm() == 0.0 {
                continue;
            }
            let newton = if dp.norm() == 0.0 {
                Complex64::new(STEP_TOL, STEP_TOL)
            } else {
                p / dp
            };
            let mut repulsion = Complex64::new(0.0, 0.0);
            for i in 0..n {
                if i != j {
                    let d = z[j] - z[i];
                    if d.norm() > 0.0 {
                        repulsion += d.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
            let step = if denom.norm() == 0.0 { newton } else { newton / denom };
            z[j] -= step;
            let rel = step.norm() / (1.0 + z[j].norm());
            worst = worst.max(rel);
        }
        if worst < STEP_TOL {
            return Ok(z);
        }
    }
    if worst < STAGNATION_TOL {
        Ok(z)
    } else {
        Err(RootFindingError)
    }
}

/// Eigenvalues of a dense row-major `d x d` real matrix, computed as the
/// roots of its characteristic polynomial (Faddeev-LeVerrier coefficients).
/// Intended for the small Jacobians that seed stability test spectra.
pub fn real_matrix_eigenvalues(a: &[f64], d: usize) -> Result<Vec<Complex64>, RootFindingError> {
    assert_eq!(a.len(), d * d);
    if d == 0 {
        return Ok(Vec::new());
    }
    let mut coeffs = vec![0.0f64; d + 1];
    coeffs[d] = 1.0;
    let mut m = vec![0.0f64; d * d]; // M_0 = 0, with c_d = 1
    for step in 1..=d {
        // M_k = A * M_{k-1} + c_{d-k+1} * I
        let mut am = vec![0.0f64; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += a[i * d + l] * m[l * d + j];
                }
                am[i * d + j] = s;
            }
        }
        for i in 0..d {
            am[i * d + i] += coeffs[d - step + 1];
        }
        // c_{d-k} = -tr(A * M_k) / k
        let mut tr = 0.0;
        for i in 0..d {
            for l in 0..d {
                tr += a[i * d + l] * am[l * d + i];
            }
        }
        coeffs[d - step] = -tr / step as f64;
        m = am;
    }
    let low: Vec<Complex64> = coeffs[..d].iter().map(|&c| Complex64::new(c, 0.0)).collect();
    monic_roots(&low)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted_by_re(mut roots: Vec<Complex64>) -> Vec<Complex64> {
        roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        roots
    }

    #[test]
    fn factored_quadratic() {
        // (r - 1)(r + 1/2) = r^2 - r/2 - 1/2
        let roots = sorted_by_re(monic_roots(&[c(-0.5, 0.0), c(-0.5, 0.0)]).unwrap());
        assert!((roots[0] - c(-0.5, 0.0)).norm() < 1e-12);
        assert!((roots[1] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn cubic_with_known_roots() {
        // (r - 2)(r - 3)(r + 1) = r^3 - 4 r^2 + r + 6
        let roots = sorted_by_re(monic_roots(&[c(6.0, 0.0), c(1.0, 0.0), c(-4.0, 0.0)]).unwrap());
        for (root, expect) in roots.iter().zip([-1.0, 2.0, 3.0]) {
            assert!((root - c(expect, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn complex_coefficients() {
        // (r - i)(r - 2)(r + 1 + i)
        let r1 = c(0.0, 1.0);
        let r2 = c(2.0, 0.0);
        let r3 = c(-1.0, -1.0);
        let c2 = -(r1 + r2 + r3);
        let c1 = r1 * r2 + r1 * r3 + r2 * r3;
        let c0 = -r1 * r2 * r3;
        let roots = monic_roots(&[c0, c1, c2]).unwrap();
        for expect in [r1, r2, r3] {
            assert!(roots.iter().any(|r| (r - expect).norm() < 1e-10));
        }
    }

    #[test]
    fn near_multiple_roots_cluster() {
        // (r - 1)^2 (r - 1/2): the double root comes back as a tight cluster.
        let roots = monic_roots(&[c(-0.5, 0.0), c(2.0, 0.0), c(-2.5, 0.0)]).unwrap();
        let near_one = roots.iter().filter(|r| (*r - c(1.0, 0.0)).norm() < 1e-6).count();
        assert_eq!(near_one, 2);
    }

    #[test]
    fn zero_roots_are_deflated() {
        let roots = sorted_by_re(monic_roots(&[c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]).unwrap());
        assert_eq!(roots[0], c(0.0, 0.0));
        assert_eq!(roots[1], c(0.0, 0.0));
        assert!((roots[2] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn spring_mass_eigenvalues() {
        // [[0, 1], [-40, -13]] has eigenvalues -5 and -8.
        let eig = sorted_by_re(real_matrix_eigenvalues(&[0.0, 1.0, -40.0, -13.0], 2).unwrap());
        assert!((eig[0] - c(-8.0, 0.0)).norm() < 1e-9);
        assert!((eig[1] - c(-5.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn nilpotent_matrix_eigenvalues_are_zero() {
        let eig = real_matrix_eigenvalues(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0], 3).unwrap();
        for e in eig {
            assert!(e.norm() < 1e-9);
        }
    }
}
