// Copyright 2026 grape-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear algebra shared across the crate.
//!
//! Every propagator in this library is the exponential of a Hermitian
//! generator, so `exp(-i t H)` is computed by eigendecomposition, which is
//! exact and unconditionally stable for Hermitian input at the dimensions
//! we handle (N <= 64). The eigendecomposition also gives the exact
//! parameter derivative of the exponential through the divided-difference
//! (Daleckii-Krein) formula, see [`HermitianEigen::directional_derivative`].

use ndarray::{s, Array1, Array2, Axis};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::error::{GrapeError, Result};

/// Absolute tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Absolute tolerance for unitarity checks.
pub const UNITARY_TOL: f64 = 1e-10;

/// N x N identity.
pub fn identity(n: usize) -> Array2<Complex64> {
    Array2::eye(n)
}

/// Conjugate transpose.
pub fn dagger(m: &Array2<Complex64>) -> Array2<Complex64> {
    m.t().mapv(|z| z.conj())
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let scale = a[[i, j]];
            out.slice_mut(s![i * rb..(i + 1) * rb, j * cb..(j + 1) * cb])
                .assign(&(b * scale));
        }
    }
    out
}

/// Matrix trace.
pub fn trace(m: &Array2<Complex64>) -> Complex64 {
    m.diag().sum()
}

/// Normalized Hilbert-Schmidt inner product `tr(a^dag b) / N`.
pub fn hs_inner(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Complex64 {
    let n = a.nrows() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc / n
}

/// Largest elementwise deviation from Hermiticity, `max |m - m^dag|`.
pub fn hermiticity_deviation(m: &Array2<Complex64>) -> f64 {
    let n = m.nrows();
    let mut max = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let d = (m[[i, j]] - m[[j, i]].conj()).norm();
            if d > max {
                max = d;
            }
        }
    }
    max
}

/// Largest elementwise deviation from unitarity, `max |u^dag u - 1|`.
pub fn unitarity_deviation(u: &Array2<Complex64>) -> f64 {
    let prod = dagger(u).dot(u);
    let n = u.nrows();
    let mut max = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            let d = (prod[[i, j]] - expect).norm();
            if d > max {
                max = d;
            }
        }
    }
    max
}

/// Largest elementwise absolute difference.
pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn require_hermitian(m: &Array2<Complex64>) -> Result<()> {
    let dev = hermiticity_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(GrapeError::NotHermitian {
            max_dev: dev,
            tol: HERMITIAN_TOL,
        });
    }
    Ok(())
}

pub fn require_unitary(u: &Array2<Complex64>) -> Result<()> {
    let dev = unitarity_deviation(u);
    if dev > UNITARY_TOL {
        return Err(GrapeError::NotUnitary {
            max_dev: dev,
            tol: UNITARY_TOL,
        });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, retained so that propagators
/// and their exact parameter derivatives can be formed for any duration
/// without re-diagonalizing.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Array1<f64>,
    /// Eigenvectors as columns.
    pub eigenvectors: Array2<Complex64>,
}

impl HermitianEigen {
    /// Diagonalize `h`, rejecting input that is not Hermitian within
    /// [`HERMITIAN_TOL`].
    pub fn new(h: &Array2<Complex64>) -> Result<Self> {
        require_hermitian(h)?;
        let (eigenvalues, vectors) = h
            .eigh(UPLO::Lower)
            .map_err(|e| GrapeError::Eigen(e.to_string()))?;
        // LAPACK sees the row-major array as its transpose and therefore
        // diagonalizes conj(h); conjugating restores H = V D V^dag.
        let eigenvectors = vectors.mapv(|z| z.conj());
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `exp(-i t H) = V exp(-i t diag(lambda)) V^dag`.
    pub fn propagator(&self, t: f64) -> Array2<Complex64> {
        let mut scaled = self.eigenvectors.clone();
        for (col, &lambda) in scaled
            .axis_iter_mut(Axis(1))
            .zip(self.eigenvalues.iter())
        {
            let phase = Complex64::from_polar(1.0, -lambda * t);
            let mut col = col;
            col.mapv_inplace(|z| z * phase);
        }
        scaled.dot(&dagger(&self.eigenvectors))
    }

    /// Exact directional derivative of the propagator,
    /// `d/du exp(-i t (H + u B)) |_{u=0}`, via divided differences in the
    /// eigenbasis of `H`:
    ///
    /// `dU = V (Gamma o (V^dag B V)) V^dag` with
    /// `Gamma_ab = -i t e^{-i t (la+lb)/2} sinc(t (la-lb)/2)`.
    ///
    /// The sinc form is exact for both distinct and degenerate eigenvalue
    /// pairs, so no branch on the gap is needed.
    pub fn directional_derivative(
        &self,
        t: f64,
        direction: &Array2<Complex64>,
    ) -> Array2<Complex64> {
        let n = self.dim();
        let v = &self.eigenvectors;
        let b = dagger(v).dot(direction).dot(v);
        let mut core = Array2::zeros((n, n));
        for a in 0..n {
            for c in 0..n {
                let la = self.eigenvalues[a];
                let lc = self.eigenvalues[c];
                let mean = 0.5 * (la + lc);
                let half_gap = 0.5 * (la - lc) * t;
                let gamma = Complex64::new(0.0, -t)
                    * Complex64::from_polar(1.0, -mean * t)
                    * sinc(half_gap);
                core[[a, c]] = gamma * b[[a, c]];
            }
        }
        v.dot(&core).dot(&dagger(v))
    }
}

/// `sin(x)/x`, series-expanded near zero.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `exp(-i t h)` for Hermitian `h` by eigendecomposition.
pub fn expm_hermitian(h: &Array2<Complex64>, t: f64) -> Result<Array2<Complex64>> {
    Ok(HermitianEigen::new(h)?.propagator(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: exp(M) by scaling-and-squaring with a plain
    /// Taylor series. Deliberately shares no code with the eigen path.
    pub(crate) fn taylor_expm(m: &Array2<Complex64>) -> Array2<Complex64> {
        let norm1: f64 = m.iter().map(|z| z.norm()).sum();
        let mut squarings = 0u32;
        let mut scale = 1.0;
        while norm1 * scale > 0.25 {
            scale *= 0.5;
            squarings += 1;
        }
        let scaled = m * Complex64::new(scale, 0.0);
        let n = m.nrows();
        let mut result = identity(n);
        let mut term = identity(n);
        for k in 1..=25 {
            term = term.dot(&scaled) / Complex64::new(k as f64, 0.0);
            result = result + &term;
        }
        for _ in 0..squarings {
            result = result.dot(&result);
        }
        result
    }

    pub(crate) fn random_hermitian(n: usize, rng: &mut impl Rng) -> Array2<Complex64> {
        let mut h = Array2::zeros((n, n));
        for i in 0..n {
            h[[i, i]] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                h[[i, j]] = z;
                h[[j, i]] = z.conj();
            }
        }
        h
    }

    #[test]
    fn zero_generator_gives_identity() {
        let h = Array2::zeros((4, 4));
        let u = expm_hermitian(&h, 2.7).unwrap();
        assert!(max_abs_diff(&u, &identity(4)) < 1e-14);
    }

    #[test]
    fn diagonal_generator_gives_elementwise_phases() {
        let mut h = Array2::zeros((2, 2));
        h[[0, 0]] = Complex64::new(1.5, 0.0);
        h[[1, 1]] = Complex64::new(-0.25, 0.0);
        let t = 0.8;
        let u = expm_hermitian(&h, t).unwrap();
        assert_abs_diff_eq!(
            u[[0, 0]].re,
            (1.5 * t).cos(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            u[[0, 0]].im,
            -(1.5 * t).sin(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(u[[1, 1]].re, (0.25 * t).cos(), epsilon = 1e-14);
        assert!(u[[0, 1]].norm() < 1e-15 && u[[1, 0]].norm() < 1e-15);
    }

    #[test]
    fn eigen_exponential_matches_taylor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for scale in [1.0, 1e2, 1e3] {
            let h = random_hermitian(4, &mut rng) * Complex64::new(scale, 0.0);
            let t = 1e-3;
            let fast = expm_hermitian(&h, t).unwrap();
            let oracle = taylor_expm(&(&h * Complex64::new(0.0, -t)));
            assert!(
                max_abs_diff(&fast, &oracle) < 1e-10,
                "deviation {} at scale {}",
                max_abs_diff(&fast, &oracle),
                scale
            );
        }
    }

    #[test]
    fn non_hermitian_input_rejected_with_deviation() {
        let mut h: Array2<Complex64> = Array2::zeros((2, 2));
        h[[0, 1]] = Complex64::new(1.0, 0.0);
        match expm_hermitian(&h, 1.0) {
            Err(GrapeError::NotHermitian { max_dev, .. }) => {
                assert_abs_diff_eq!(max_dev, 1.0, epsilon = 1e-15);
            }
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn time_reversal_returns_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(8, &mut rng) * Complex64::new(500.0, 0.0);
        let eig = HermitianEigen::new(&h).unwrap();
        let fwd = eig.propagator(1e-3);
        let bwd = eig.propagator(-1e-3);
        assert!(max_abs_diff(&fwd.dot(&bwd), &identity(8)) < 1e-10);
    }

    #[test]
    fn propagators_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let h = random_hermitian(4, &mut rng) * Complex64::new(1e3, 0.0);
            let u = expm_hermitian(&h, 1e-4).unwrap();
            assert!(unitarity_deviation(&u) < UNITARY_TOL);
        }
    }

    #[test]
    fn directional_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = random_hermitian(4, &mut rng) * Complex64::new(300.0, 0.0);
        let b = random_hermitian(4, &mut rng);
        let t = 2e-3;
        let eig = HermitianEigen::new(&h).unwrap();
        let analytic = eig.directional_derivative(t, &b);
        // central differences over two decades of step size
        for eps in [1e-4, 1e-5, 1e-6] {
            let plus = expm_hermitian(&(&h + &(&b * Complex64::new(eps, 0.0))), t).unwrap();
            let minus = expm_hermitian(&(&h - &(&b * Complex64::new(eps, 0.0))), t).unwrap();
            let fd = (&plus - &minus) / Complex64::new(2.0 * eps, 0.0);
            let scale = analytic.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(
                max_abs_diff(&fd, &analytic) / scale < 1e-6,
                "relative deviation {} at eps {}",
                max_abs_diff(&fd, &analytic) / scale,
                eps
            );
        }
    }

    #[test]
    fn directional_derivative_handles_degenerate_spectrum() {
        // H with an exactly degenerate pair
        let h: Array2<Complex64> = Array2::zeros((2, 2));
        let mut b = Array2::zeros((2, 2));
        b[[0, 1]] = Complex64::new(1.0, 0.0);
        b[[1, 0]] = Complex64::new(1.0, 0.0);
        let t = 0.3;
        let eig = HermitianEigen::new(&h).unwrap();
        let d = eig.directional_derivative(t, &b);
        // exp(-i t u B) => derivative at u=0 is -i t B
        assert!(max_abs_diff(&d, &(&b * Complex64::new(0.0, -t))) < 1e-12);
    }
}
