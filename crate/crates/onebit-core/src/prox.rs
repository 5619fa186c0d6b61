//! Closed-form proximal mappings on the unit sphere.
//!
//! Both composite penalties used by the solvers admit exact proximal steps:
//! the zero-norm plus sphere indicator reduces to keeping a prefix of the
//! magnitude-sorted entries and renormalizing, and the l1 plus sphere
//! indicator reduces to a uniform shift followed by projection onto the
//! nonnegative part of the sphere. Everything is routed through a signed
//! permutation that sorts magnitudes nonincreasingly.
//!
//! The underlying mappings are set-valued at ties; these functions return a
//! deterministic selection, breaking ties toward the smallest original
//! index. `z = 0` maps to the first coordinate vector.

use ndarray::Array1;

use crate::linalg;

/// Signed permutation `P` with `P z = |z| sorted nonincreasingly`.
///
/// Applying it is an isometry and preserves the number of nonzeros. Ties in
/// magnitude keep their original index order; zero entries get sign `+1`.
#[derive(Debug, Clone)]
pub struct SignedPermutation {
    order: Vec<usize>,
    signs: Vec<f64>,
}

impl SignedPermutation {
    pub fn from_vector(z: &Array1<f64>) -> Self {
        let mut order: Vec<usize> = (0..z.len()).collect();
        order.sort_by(|&i, &j| {
            z[j].abs()
                .total_cmp(&z[i].abs())
                .then_with(|| i.cmp(&j))
        });
        let signs = order
            .iter()
            .map(|&i| if z[i] < 0.0 { -1.0 } else { 1.0 })
            .collect();
        SignedPermutation { order, signs }
    }

    /// Sorted position `k` receives `sign_k * z[order_k]`.
    pub fn apply(&self, z: &Array1<f64>) -> Array1<f64> {
        assert_eq!(z.len(), self.order.len());
        Array1::from_iter(self.order.iter().zip(&self.signs).map(|(&i, s)| s * z[i]))
    }

    /// Inverse map: original position `order_k` receives `sign_k * y[k]`.
    pub fn apply_inverse(&self, y: &Array1<f64>) -> Array1<f64> {
        assert_eq!(y.len(), self.order.len());
        let mut out = Array1::zeros(y.len());
        for (k, (&i, s)) in self.order.iter().zip(&self.signs).enumerate() {
            out[i] = s * y[k];
        }
        out
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

/// `chi_j(y) = ||y^(j)|| - ||y^(j-1)||` for a nonincreasing nonnegative `y`,
/// where `y^(j)` keeps the first `j` entries. The sequence is nonincreasing
/// in `j`. `j` is 1-based; out-of-range `j` panics.
pub fn chi(y_sorted: &[f64], j: usize) -> f64 {
    assert!(
        j >= 1 && j <= y_sorted.len(),
        "chi: index {j} out of range for length {}",
        y_sorted.len()
    );
    let head: f64 = y_sorted[..j - 1].iter().map(|v| v * v).sum();
    let full = head + y_sorted[j - 1] * y_sorted[j - 1];
    full.sqrt() - head.sqrt()
}

/// Proximal mapping of `nu * ||.||_0` plus the unit-sphere indicator.
///
/// Sorts magnitudes, keeps the longest prefix whose `chi` values stay at or
/// above `nu` (at least one entry), renormalizes, and undoes the signed
/// permutation. Zero entries have `chi = 0` and are never kept.
pub fn prox_znorm_sphere(z: &Array1<f64>, nu: f64) -> Array1<f64> {
    assert!(nu > 0.0 && nu.is_finite(), "nu must be positive");
    let n = z.len();
    assert!(n >= 1, "empty input");
    if z.iter().all(|&v| v == 0.0) {
        let mut e1 = Array1::zeros(n);
        e1[0] = 1.0;
        return e1;
    }
    let perm = SignedPermutation::from_vector(z);
    let y = perm.apply(z);

    // prefix norms; chi_j = sqrt(c_j) - sqrt(c_{j-1}) is nonincreasing
    let mut keep = 1usize;
    let mut cum = y[0] * y[0];
    let mut prev_norm = cum.sqrt();
    for j in 2..=n {
        cum += y[j - 1] * y[j - 1];
        let norm_j = cum.sqrt();
        if norm_j - prev_norm >= nu {
            keep = j;
            prev_norm = norm_j;
        } else {
            break;
        }
    }

    let norm_kept: f64 = y.iter().take(keep).map(|v| v * v).sum::<f64>().sqrt();
    let mut sorted = Array1::zeros(n);
    for k in 0..keep {
        sorted[k] = y[k] / norm_kept;
    }
    perm.apply_inverse(&sorted)
}

/// Projection onto the intersection of the unit sphere with the nonnegative
/// orthant. If no entry is positive, returns the coordinate vector at a
/// maximal entry (smallest index on ties); otherwise zeroes the nonpositive
/// entries and normalizes the positive part.
pub fn project_sphere_nonneg(y: &Array1<f64>) -> Array1<f64> {
    let n = y.len();
    assert!(n >= 1, "empty input");
    let mut out = Array1::zeros(n);
    let any_positive = y.iter().any(|&v| v > 0.0);
    if !any_positive {
        let mut imax = 0;
        for i in 1..n {
            if y[i] > y[imax] {
                imax = i;
            }
        }
        out[imax] = 1.0;
        return out;
    }
    let mut norm_sq = 0.0;
    for &v in y.iter() {
        if v > 0.0 {
            norm_sq += v * v;
        }
    }
    let norm = norm_sq.sqrt();
    for (o, &v) in out.iter_mut().zip(y.iter()) {
        if v > 0.0 {
            *o = v / norm;
        }
    }
    out
}

/// Proximal mapping of `nu * ||.||_1` plus the unit-sphere indicator:
/// shift the sorted magnitudes down by `nu`, project onto the nonnegative
/// sphere, and undo the signed permutation.
pub fn prox_l1_sphere(z: &Array1<f64>, nu: f64) -> Array1<f64> {
    assert!(nu > 0.0 && nu.is_finite(), "nu must be positive");
    assert!(!z.is_empty(), "empty input");
    let perm = SignedPermutation::from_vector(z);
    let shifted = perm.apply(z).mapv(|v| v - nu);
    let projected = project_sphere_nonneg(&shifted);
    perm.apply_inverse(&projected)
}

pub(crate) fn norm_of(x: &Array1<f64>) -> f64 {
    linalg::norm(x.as_slice().expect("contiguous"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    #[test]
    fn chi_values_and_monotonicity() {
        let y = [2.0, 1.0];
        assert_eq!(chi(&y, 1), 2.0);
        assert!((chi(&y, 2) - (5.0f64.sqrt() - 2.0)).abs() < 1e-15);

        let y = [5.0, 3.0, 3.0, 0.5, 0.0];
        let chis: Vec<f64> = (1..=y.len()).map(|j| chi(&y, j)).collect();
        for w in chis.windows(2) {
            assert!(w[0] >= w[1] - 1e-15, "chi not nonincreasing: {chis:?}");
        }
        assert_eq!(chis[4], 0.0);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn chi_rejects_bad_index() {
        chi(&[1.0, 0.5], 3);
    }

    #[test]
    fn signed_permutation_roundtrip() {
        let z = arr1(&[-0.3, 2.0, 0.0, -2.0, 0.3]);
        let perm = SignedPermutation::from_vector(&z);
        let y = perm.apply(&z);
        // nonincreasing, nonnegative; tie |2.0| vs |-2.0| keeps index 1 first
        assert_eq!(y.to_vec(), vec![2.0, 2.0, 0.3, 0.3, 0.0]);
        assert_eq!(perm.order()[0], 1);
        assert_eq!(perm.order()[1], 3);
        let back = perm.apply_inverse(&y);
        for (a, b) in back.iter().zip(z.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn prox_znorm_examples() {
        let out = prox_znorm_sphere(&arr1(&[2.0, 1.0]), 0.1);
        let s = 5.0f64.sqrt();
        assert!((out[0] - 2.0 / s).abs() < 1e-14);
        assert!((out[1] - 1.0 / s).abs() < 1e-14);

        let out = prox_znorm_sphere(&arr1(&[-2.0, 1.0]), 0.5);
        assert_eq!(out.to_vec(), vec![-1.0, 0.0]);

        let out = prox_znorm_sphere(&arr1(&[3.0, 0.0, 0.0]), 0.01);
        assert_eq!(out.to_vec(), vec![1.0, 0.0, 0.0]);

        // nu above chi_1: signed top-1, tie to the smallest index
        let out = prox_znorm_sphere(&arr1(&[1.0, 1.0]), 5.0);
        assert_eq!(out.to_vec(), vec![1.0, 0.0]);

        let out = prox_znorm_sphere(&arr1(&[0.0, 0.0]), 1.0);
        assert_eq!(out.to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn prox_znorm_fixed_point() {
        let z = arr1(&[0.6, -0.64, 0.48]);
        let chis: Vec<f64> = {
            let y = [0.64, 0.6, 0.48];
            (1..=3).map(|j| chi(&y, j)).collect()
        };
        let nu = chis[2] * 0.5;
        let out = prox_znorm_sphere(&z, nu);
        for (a, b) in out.iter().zip(z.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn project_nonneg_examples() {
        let out = project_sphere_nonneg(&arr1(&[3.0, 4.0]));
        assert!((out[0] - 0.6).abs() < 1e-15);
        assert!((out[1] - 0.8).abs() < 1e-15);

        let out = project_sphere_nonneg(&arr1(&[-1.0, -2.0]));
        assert_eq!(out.to_vec(), vec![1.0, 0.0]);

        let out = project_sphere_nonneg(&arr1(&[1.0, -1.0]));
        assert_eq!(out.to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn prox_l1_examples() {
        let out = prox_l1_sphere(&arr1(&[2.0, -1.0]), 0.5);
        let s = (1.5f64 * 1.5 + 0.25).sqrt();
        assert!((out[0] - 1.5 / s).abs() < 1e-14);
        assert!((out[1] + 0.5 / s).abs() < 1e-14);
        assert!((out[0] - 0.94868).abs() < 1e-5);
        assert!((out[1] + 0.31623).abs() < 1e-5);

        // shift drives everything nonpositive: coordinate vector, first index
        let out = prox_l1_sphere(&arr1(&[1.0, 1.0]), 2.0);
        assert_eq!(out.to_vec(), vec![1.0, 0.0]);

        let out = prox_l1_sphere(&arr1(&[5.0, 0.0]), 1.0);
        assert_eq!(out.to_vec(), vec![1.0, 0.0]);

        let out = prox_l1_sphere(&arr1(&[0.0, 0.0]), 0.7);
        assert_eq!(out.to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn outputs_are_unit_norm() {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = 1 + (rand::Rng::random::<u32>(&mut rng) % 12) as usize;
            let z = Array1::from_iter(
                (0..n).map(|_| rand_distr::StandardNormal.sample(&mut rng)),
            );
            let nu: f64 = rand::Rng::random::<f64>(&mut rng) * 2.0 + 1e-6;
            for out in [prox_znorm_sphere(&z, nu), prox_l1_sphere(&z, nu)] {
                assert!((norm_of(&out) - 1.0).abs() < 1e-14);
            }
        }
    }
}
