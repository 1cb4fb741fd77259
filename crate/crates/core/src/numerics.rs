//! Small dense linear algebra, RK4, forward differences, seeded sampling
//! and autocorrelation.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::{Error, Result};

/// Dense row/column matrix of reals.
pub type Mat = DMatrix<f64>;
/// Dense column vector of reals.
pub type Vector = DVector<f64>;

/// Relative forward-difference step used throughout: `1e-6·max(1, |x|)`.
pub const FD_REL_STEP: f64 = 1e-6;

/// Replaces `a` by `(a + aᵀ)/2` in place.
pub fn symmetrize(a: &mut Mat) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Returns a symmetrized copy of `a`.
pub fn symmetrized(mut a: Mat) -> Mat {
    symmetrize(&mut a);
    a
}

/// Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(a: &Mat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(
                "factored matrix must be square".into(),
            ));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = Cholesky::new(a.clone()).ok_or(Error::NotPositiveDefinite)?;
        if chol
            .l_dirty()
            .diagonal()
            .iter()
            .any(|&d| !d.is_finite() || d <= 0.0)
        {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { chol })
    }

    pub fn solve(&self, b: &Mat) -> Mat {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &Vector) -> Vector {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> Mat {
        symmetrized(self.chol.inverse())
    }

    /// Natural log of the determinant.
    pub fn log_det(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| Float::ln(*d))
            .sum::<f64>()
    }

    /// `bᵀ A⁻¹ b`.
    pub fn quad_form(&self, b: &Vector) -> f64 {
        b.dot(&self.chol.solve(b))
    }
}

/// Solves `A·X = B` for symmetric positive definite `A`.
pub fn spd_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(
            "spd_solve right-hand side rows".into(),
        ));
    }
    Ok(SpdFactor::new(a)?.solve(b))
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn spd_inverse(a: &Mat) -> Result<Mat> {
    Ok(SpdFactor::new(a)?.inverse())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Some `L` with `L·Lᵀ = A` for a symmetric positive semidefinite `A`.
///
/// Diagonal inputs get an exact elementwise square root, which keeps zero
/// variances exactly zero.
pub fn psd_factor(a: &Mat) -> Mat {
    let n = a.nrows();
    let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == 0.0));
    if is_diag {
        return Mat::from_diagonal(&a.diagonal().map(|d| Float::sqrt(d.max(0.0))));
    }
    if let Some(ch) = Cholesky::new(a.clone()) {
        return ch.unpack();
    }
    let eig = SymmetricEigen::new(a.clone());
    let scale = eig.eigenvalues.map(|l| Float::sqrt(l.max(0.0)));
    &eig.eigenvectors * Mat::from_diagonal(&scale)
}

/// Forward-difference step for coordinate value `x`.
pub fn fd_step(x: f64) -> f64 {
    FD_REL_STEP * x.abs().max(1.0)
}

/// Forward-difference Jacobian with the same step `eps` on every coordinate.
pub fn finite_diff_jacobian<F>(f: F, x: &Vector, eps: f64) -> Result<Mat>
where
    F: FnMut(&Vector) -> Vector,
{
    jacobian_with_steps(f, x, |_| eps)
}

/// Forward-difference Jacobian with the relative step of [`fd_step`].
pub fn scaled_jacobian<F>(f: F, x: &Vector) -> Result<Mat>
where
    F: FnMut(&Vector) -> Vector,
{
    jacobian_with_steps(f, x, fd_step)
}

fn jacobian_with_steps<F, S>(mut f: F, x: &Vector, step: S) -> Result<Mat>
where
    F: FnMut(&Vector) -> Vector,
    S: Fn(f64) -> f64,
{
    let f0 = f(x);
    if f0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteOutput);
    }
    let mut jac = Mat::zeros(f0.len(), x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = step(x[j]);
        xp[j] = x[j] + h;
        let fj = f(&xp);
        xp[j] = x[j];
        if fj.len() != f0.len() {
            return Err(Error::DimensionMismatch(
                "jacobian output length changed".into(),
            ));
        }
        for i in 0..f0.len() {
            let d = (fj[i] - f0[i]) / h;
            if !d.is_finite() {
                return Err(Error::NonFiniteOutput);
            }
            jac[(i, j)] = d;
        }
    }
    Ok(jac)
}

/// One classical fourth-order Runge-Kutta step of `ẋ = deriv(x, u, t)` with
/// the input held over the step.
pub fn rk4_step<F>(deriv: F, x: &Vector, u: &Vector, t: f64, dt: f64) -> Result<Vector>
where
    F: Fn(&Vector, &Vector, f64) -> Vector,
{
    let h2 = 0.5 * dt;
    let k1 = deriv(x, u, t);
    let k2 = deriv(&(x + &k1 * h2), u, t + h2);
    let k3 = deriv(&(x + &k2 * h2), u, t + h2);
    let k4 = deriv(&(x + &k3 * dt), u, t + dt);
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteOutput);
    }
    Ok(next)
}

/// Sample autocorrelation coefficients for lags `0..=max_lag`.
///
/// Lag-ℓ covariance is averaged over its `N−ℓ` products and divided by the
/// lag-0 variance, so lag 0 is exactly 1.
pub fn autocorr(seq: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = seq.len();
    if n < 2 || max_lag >= n {
        return Err(Error::DimensionMismatch(
            "autocorr needs N ≥ 2 and max_lag < N".into(),
        ));
    }
    let mean = seq.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = seq.iter().map(|v| v - mean).collect();
    let var = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for lag in 1..=max_lag {
        let c = centered
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n - lag) as f64;
        out.push(c / var);
    }
    Ok(out)
}

/// Deterministic random source.
///
/// Wraps xoshiro256++ (64-bit output, 256-bit state) seeded from a single
/// `u64` through SplitMix64. Gaussian draws use the ziggurat transform of
/// `rand_distr::StandardNormal`, which only consumes generator output and so
/// is bit-identical across platforms.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    position: u64,
    inner: Xoshiro256PlusPlus,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            position: 0,
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Independent generator for sub-stream `stream` of `seed`.
    pub fn derived(seed: u64, stream: u64) -> Self {
        Self::new(splitmix64(
            seed ^ splitmix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d)),
        ))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of samples drawn so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn normal(&mut self) -> f64 {
        self.position += 1;
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.position += 1;
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    pub fn normal_vector(&mut self, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| self.normal())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spd_solve_identity_and_diagonal() {
        let i3 = Mat::identity(3, 3);
        assert_eq!(spd_solve(&i3, &i3).unwrap(), i3);
        let a = Mat::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let x = spd_solve(&a, &Mat::from_row_slice(2, 1, &[1.0, 1.0])).unwrap();
        assert_relative_eq!(x[(0, 0)], 0.25, epsilon = 1e-15);
        assert_relative_eq!(x[(1, 0)], 1.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn spd_solve_coupled_two_by_two() {
        let a = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let x = spd_solve(&a, &Mat::from_row_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert_relative_eq!(x[(0, 0)], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(x[(1, 0)], -1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn spd_solve_rejects_indefinite() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            spd_solve(&a, &Mat::identity(2, 2)),
            Err(Error::NotPositiveDefinite)
        );
        assert_eq!(
            spd_solve(&Mat::zeros(2, 2), &Mat::identity(2, 2)),
            Err(Error::NotPositiveDefinite)
        );
    }

    #[test]
    fn log_det_matches_product_of_pivots() {
        let a = Mat::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        assert_relative_eq!(
            SpdFactor::new(&a).unwrap().log_det(),
            36f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn jacobian_of_identity_and_linear_maps() {
        let x = Vector::from_vec(alloc::vec![0.3, -2.0, 5.0]);
        let j = finite_diff_jacobian(|v| v.clone(), &x, 1e-6).unwrap();
        assert!((j - Mat::identity(3, 3)).amax() < 1e-9);

        let a = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -4.0, 0.5, 0.0]);
        let j = finite_diff_jacobian(|v| &a * v, &Vector::zeros(3), 1e-6).unwrap();
        assert!((j - &a).amax() < 1e-9);
    }

    #[test]
    fn jacobian_of_cube() {
        let j = finite_diff_jacobian(
            |v| v.map(|s| s * s * s),
            &Vector::from_element(1, 2.0),
            1e-6,
        )
        .unwrap();
        assert!((j[(0, 0)] - 12.000006).abs() < 1e-4);
    }

    #[test]
    fn jacobian_reports_non_finite() {
        let r = finite_diff_jacobian(|v| v.map(|s| 1.0 / s), &Vector::zeros(1), 1e-6);
        assert_eq!(r, Err(Error::NonFiniteOutput));
    }

    #[test]
    fn rk4_zero_and_decay() {
        let x0 = Vector::from_vec(alloc::vec![1.5, -2.0]);
        let u = Vector::zeros(0);
        let same = rk4_step(|x, _, _| Vector::zeros(x.len()), &x0, &u, 0.0, 0.1).unwrap();
        assert_eq!(same, x0);
        let decay = rk4_step(|x, _, _| -x, &Vector::from_element(1, 1.0), &u, 0.0, 0.1).unwrap();
        assert!((decay[0] - 0.904837).abs() < 1e-6);
    }

    #[test]
    fn rk4_exact_for_constant_rate() {
        let u = Vector::zeros(0);
        let x = rk4_step(
            |_, _, _| Vector::from_element(1, 3.0),
            &Vector::zeros(1),
            &u,
            0.0,
            0.25,
        )
        .unwrap();
        assert_relative_eq!(x[0], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn autocorr_alternating_and_constant() {
        let seq: Vec<f64> = (0..10)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let r = autocorr(&seq, 1).unwrap();
        assert_eq!(r[0], 1.0);
        assert_relative_eq!(r[1], -1.0, epsilon = 1e-15);
        assert_eq!(autocorr(&[3.0; 8], 2), Err(Error::ZeroVariance));
    }

    #[test]
    fn white_noise_stays_in_band() {
        let mut rng = SeededRng::new(7);
        let seq: Vec<f64> = (0..100).map(|_| rng.normal()).collect();
        let r = autocorr(&seq, 20).unwrap();
        let inside = r[1..].iter().filter(|c| c.abs() <= 1.96 / 10.0).count();
        assert!(inside >= 18, "{inside} of 20 lags inside band");
    }

    #[test]
    fn rng_is_reproducible() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
        assert_eq!(a.position(), 100);
        let mut c = SeededRng::derived(42, 1);
        assert_ne!(c.normal().to_bits(), SeededRng::new(42).normal().to_bits());
    }

    #[test]
    fn psd_factor_handles_singular_input() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = psd_factor(&a);
        assert!((&l * l.transpose() - a).amax() < 1e-12);
        let d = Mat::from_diagonal(&Vector::from_vec(alloc::vec![0.0, 4.0]));
        assert_eq!(psd_factor(&d)[(1, 1)], 2.0);
    }
}
