//! Loss functions, penalties, and composite objectives.
//!
//! The recovery models minimize, over the unit sphere, a smooth capped
//! one-sided loss of the signed measurements plus a sparsity penalty: either
//! the exact zero-norm, or a surrogate built from the conjugate of a SCAD or
//! MCP generating function. This module evaluates all of those pieces and
//! their gradients; the proximal steps live in [`crate::prox`] and the
//! iteration in [`crate::solver`].

use ndarray::{Array1, Array2};

use crate::linalg;
use crate::{Error, Result};

/// Feasibility tolerance for the unit-sphere indicator in objective
/// evaluation. Solver iterates are exactly renormalized; this only guards
/// user-supplied points.
pub const SPHERE_FEAS_TOL: f64 = 1e-9;

/// Which folded-concave surrogate generates the conjugate penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateKind {
    Scad,
    Mcp,
}

/// Which composite objective a quantity refers to: the zero-norm model or
/// its surrogate-penalized counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    ZeroNorm,
    Surrogate,
}

/// Scalar knobs of the loss and penalty.
///
/// `sigma` caps the per-measurement loss, `gamma` is the smoothing width
/// (`0 < gamma < sigma/2`), `lambda` weights the sparsity penalty, and
/// `rho`/`a` shape the surrogate conjugate.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub sigma: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub rho: f64,
    pub a: f64,
    pub surrogate: SurrogateKind,
}

impl ModelParams {
    pub fn new(
        sigma: f64,
        gamma: f64,
        lambda: f64,
        rho: f64,
        a: f64,
        surrogate: SurrogateKind,
    ) -> Result<Self> {
        let p = ModelParams {
            sigma,
            gamma,
            lambda,
            rho,
            a,
            surrogate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma, self.gamma, self.lambda, self.rho, self.a];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("model parameters must be finite".into()));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if self.gamma <= 0.0 || self.gamma >= self.sigma / 2.0 {
            return Err(Error::Invalid(format!(
                "gamma must satisfy 0 < gamma < sigma/2, got gamma={} sigma={}",
                self.gamma, self.sigma
            )));
        }
        if self.lambda <= 0.0 {
            return Err(Error::Invalid(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.rho <= 0.0 {
            return Err(Error::Invalid(format!("rho must be > 0, got {}", self.rho)));
        }
        match self.surrogate {
            SurrogateKind::Scad if self.a <= 1.0 => Err(Error::Invalid(format!(
                "SCAD shape requires a > 1, got {}",
                self.a
            ))),
            SurrogateKind::Mcp if self.a <= 2.0 => Err(Error::Invalid(format!(
                "MCP shape requires a > 2, got {}",
                self.a
            ))),
            _ => Ok(()),
        }
    }
}

/// A one-bit measurement instance.
///
/// Holds the measurement matrix `phi`, the observed signs `b`, the signed
/// matrix `a = Diag(b) * phi` that all loss evaluations run through, and
/// optionally the ground-truth unit signal. The transpose of `a` is cached
/// in row-major form so that both `a * x` and `a^T * v` stream contiguous
/// memory, and so that sparse arguments can use column accumulation.
#[derive(Debug, Clone)]
pub struct Problem {
    phi: Array2<f64>,
    b: Array1<f64>,
    a: Array2<f64>,
    a_t: Array2<f64>,
    x_true: Option<Array1<f64>>,
    spectral_norm_sq: Option<f64>,
}

impl Problem {
    pub fn new(phi: Array2<f64>, b: Array1<f64>, x_true: Option<Array1<f64>>) -> Result<Self> {
        let (m, n) = phi.dim();
        if m == 0 || n == 0 {
            return Err(Error::Invalid("measurement matrix must be nonempty".into()));
        }
        if b.len() != m {
            return Err(Error::Dimension(format!(
                "phi has {m} rows but b has {} entries",
                b.len()
            )));
        }
        if let Some(bad) = b.iter().position(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::Invalid(format!(
                "b[{bad}] = {} is not a sign (+1 or -1)",
                b[bad]
            )));
        }
        if let Some(x) = &x_true {
            if x.len() != n {
                return Err(Error::Dimension(format!(
                    "x_true has {} entries but phi has {n} columns",
                    x.len()
                )));
            }
            let nx = linalg::norm(x.as_slice().expect("contiguous"));
            if (nx - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid(format!(
                    "x_true must be a unit vector, |norm - 1| = {:.3e}",
                    (nx - 1.0).abs()
                )));
            }
        }
        let mut a = phi.clone();
        for (mut row, &bi) in a.rows_mut().into_iter().zip(b.iter()) {
            row.mapv_inplace(|v| bi * v);
        }
        let a_t = a.t().as_standard_layout().into_owned();
        Ok(Problem {
            phi,
            b,
            a,
            a_t,
            x_true,
            spectral_norm_sq: None,
        })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn phi(&self) -> &Array2<f64> {
        &self.phi
    }

    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }

    /// The signed measurement matrix `Diag(b) * phi`.
    pub fn a_mat(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn x_true(&self) -> Option<&Array1<f64>> {
        self.x_true.as_ref()
    }

    /// Cached upper estimate of the squared spectral norm, if computed.
    pub fn spectral_norm_sq(&self) -> Option<f64> {
        self.spectral_norm_sq
    }

    /// Estimate and cache the squared spectral norm. Solvers estimate it on
    /// the fly when absent; caching avoids re-estimation across repeated
    /// solves on the same problem.
    pub fn cache_spectral_norm_sq(&mut self) -> Result<f64> {
        if let Some(v) = self.spectral_norm_sq {
            return Ok(v);
        }
        let v = linalg::spectral_norm_sq_upper(&self.a.view())?;
        self.spectral_norm_sq = Some(v);
        Ok(v)
    }

    /// `a * x`, switching to column accumulation when `x` is sparse.
    pub fn apply_a(&self, x: &Array1<f64>) -> Array1<f64> {
        let (m, n) = self.a.dim();
        assert_eq!(x.len(), n, "apply_a: x has wrong length");
        let xs = x.as_slice().expect("contiguous");
        let nnz = xs.iter().filter(|&&v| v != 0.0).count();
        let mut out = Array1::zeros(m);
        let os = out.as_slice_mut().expect("contiguous");
        if nnz * 4 <= n {
            let at = self.a_t.as_slice().expect("contiguous");
            for (j, &xj) in xs.iter().enumerate() {
                if xj != 0.0 {
                    linalg::add_scaled(os, xj, &at[j * m..(j + 1) * m]);
                }
            }
        } else {
            linalg::mat_vec(&self.a.view(), xs, os);
        }
        out
    }

    /// `a^T * v`, switching to row accumulation when `v` is sparse.
    pub fn apply_at(&self, v: &Array1<f64>) -> Array1<f64> {
        let (m, n) = self.a.dim();
        assert_eq!(v.len(), m, "apply_at: v has wrong length");
        let vs = v.as_slice().expect("contiguous");
        let nnz = vs.iter().filter(|&&x| x != 0.0).count();
        let mut out = Array1::zeros(n);
        let os = out.as_slice_mut().expect("contiguous");
        if nnz * 4 <= m {
            let rows = self.a.as_slice().expect("contiguous");
            for (i, &vi) in vs.iter().enumerate() {
                if vi != 0.0 {
                    linalg::add_scaled(os, vi, &rows[i * n..(i + 1) * n]);
                }
            }
        } else {
            linalg::mat_vec(&self.a_t.view(), vs, os);
        }
        out
    }
}

/// The capped one-sided scalar loss: `max(0, -t)` for `t >= -sigma`, flat
/// `sigma` below. Flipped measurements thus pay a bounded penalty.
pub fn dc_loss_scalar(t: f64, sigma: f64) -> f64 {
    assert!(sigma > 0.0, "sigma must be positive");
    if t < -sigma {
        sigma
    } else {
        (-t).max(0.0)
    }
}

/// Smooth approximation of [`dc_loss_scalar`] with quadratic blends of
/// width `gamma` at the kinks. Returns `(value, derivative)`.
pub fn smooth_loss_scalar(t: f64, p: &ModelParams) -> (f64, f64) {
    let (sigma, gamma) = (p.sigma, p.gamma);
    if t > 0.0 {
        (0.0, 0.0)
    } else if t > -gamma {
        (t * t / (2.0 * gamma), t / gamma)
    } else if t > gamma - sigma {
        (-t - gamma / 2.0, -1.0)
    } else if t >= -(sigma + gamma) {
        let s = t + sigma + gamma;
        (
            sigma - gamma / 2.0 - s * s / (4.0 * gamma),
            -s / (2.0 * gamma),
        )
    } else {
        (sigma - gamma / 2.0, 0.0)
    }
}

pub(crate) fn loss_sum(residual: &[f64], p: &ModelParams) -> f64 {
    residual.iter().map(|&t| smooth_loss_scalar(t, p).0).sum()
}

/// Smooth loss of `a * x` and its gradient `a^T * d`, where `d` holds the
/// per-measurement loss derivatives. The gradient is Lipschitz with modulus
/// at most `spectral_norm_sq / gamma`.
pub fn smooth_loss_and_grad(
    x: &Array1<f64>,
    prob: &Problem,
    p: &ModelParams,
) -> Result<(f64, Array1<f64>)> {
    if x.len() != prob.n() {
        return Err(Error::Dimension(format!(
            "x has {} entries but the problem has {} columns",
            x.len(),
            prob.n()
        )));
    }
    let r = prob.apply_a(x);
    let mut value = 0.0;
    let mut d = Array1::zeros(prob.m());
    for (di, &t) in d.iter_mut().zip(r.iter()) {
        let (v, der) = smooth_loss_scalar(t, p);
        value += v;
        *di = der;
    }
    Ok((value, prob.apply_at(&d)))
}

/// Conjugate of the surrogate generating function, with derivative.
///
/// SCAD (`a > 1`) is zero up to `2/(a+1)`, quadratic up to `2a/(a+1)`, and
/// `w - 1` beyond; MCP (`a > 2`) follows the analogous three branches with
/// breakpoints `a - a^2/2` and `a`. Value and derivative are continuous at
/// the breakpoints.
pub fn conjugate_scalar(omega: f64, a: f64, kind: SurrogateKind) -> (f64, f64) {
    match kind {
        SurrogateKind::Scad => {
            assert!(a > 1.0, "SCAD conjugate requires a > 1");
            if omega <= 2.0 / (a + 1.0) {
                (0.0, 0.0)
            } else if omega <= 2.0 * a / (a + 1.0) {
                let q = (a + 1.0) * omega - 2.0;
                (q * q / (4.0 * (a * a - 1.0)), q / (2.0 * (a - 1.0)))
            } else {
                (omega - 1.0, 1.0)
            }
        }
        SurrogateKind::Mcp => {
            assert!(a > 2.0, "MCP conjugate requires a > 2");
            let c = (a - 2.0) * (a - 2.0) / 4.0;
            if omega <= a - a * a / 2.0 {
                (-c, 0.0)
            } else if omega <= a {
                let q = a * (a - 2.0) / 2.0 + omega;
                (q * q / (a * a) - c, 2.0 * q / (a * a))
            } else {
                (omega - 1.0, 1.0)
            }
        }
    }
}

/// Surrogate penalty `lambda * rho * sum_i (|x_i| - psi*(rho |x_i|) / rho)`
/// and the gradient of its smooth part `theta(x) = sum_i psi*(rho |x_i|) / rho`.
///
/// `sign(0) = 0` in the gradient, which keeps it odd.
pub fn surrogate_penalty(x: &Array1<f64>, p: &ModelParams) -> (f64, Array1<f64>) {
    let mut sum = 0.0;
    let mut theta_grad = Array1::zeros(x.len());
    for (gi, &xi) in theta_grad.iter_mut().zip(x.iter()) {
        let mag = xi.abs();
        let (v, der) = conjugate_scalar(p.rho * mag, p.a, p.surrogate);
        sum += mag - v / p.rho;
        *gi = if xi > 0.0 {
            der
        } else if xi < 0.0 {
            -der
        } else {
            0.0
        };
    }
    (p.lambda * p.rho * sum, theta_grad)
}

/// Lipschitz modulus of the gradient of `theta(x) = sum_i psi*(rho|x_i|)/rho`.
///
/// SCAD: `rho * max((a+1)/2, (a+1)/(2(a-1)))`. MCP: `rho * 2/a^2`, the
/// curvature of the middle conjugate branch scaled through the chain rule
/// (MCP additionally has a bounded gradient jump across zero entries).
pub fn theta_grad_lipschitz(p: &ModelParams) -> f64 {
    match p.surrogate {
        SurrogateKind::Scad => {
            let a = p.a;
            p.rho * ((a + 1.0) / 2.0).max((a + 1.0) / (2.0 * (a - 1.0)))
        }
        SurrogateKind::Mcp => 2.0 * p.rho / (p.a * p.a),
    }
}

fn on_sphere(x: &Array1<f64>) -> bool {
    let n = linalg::norm(x.as_slice().expect("contiguous"));
    (n - 1.0).abs() <= SPHERE_FEAS_TOL
}

/// Zero-norm composite objective: smooth loss plus `lambda * ||x||_0`,
/// infinite off the unit sphere. Nonzero means exactly nonzero here; solver
/// iterates carry exact zeros.
pub fn objective_f(x: &Array1<f64>, prob: &Problem, p: &ModelParams) -> f64 {
    assert_eq!(x.len(), prob.n(), "objective_f: x has wrong length");
    if !on_sphere(x) {
        return f64::INFINITY;
    }
    let r = prob.apply_a(x);
    let nnz = x.iter().filter(|&&v| v != 0.0).count();
    loss_sum(r.as_slice().expect("contiguous"), p) + p.lambda * nnz as f64
}

/// Surrogate composite objective: smooth loss plus the conjugate-based
/// penalty, infinite off the unit sphere.
pub fn objective_g(x: &Array1<f64>, prob: &Problem, p: &ModelParams) -> f64 {
    assert_eq!(x.len(), prob.n(), "objective_g: x has wrong length");
    if !on_sphere(x) {
        return f64::INFINITY;
    }
    let r = prob.apply_a(x);
    loss_sum(r.as_slice().expect("contiguous"), p) + surrogate_penalty(x, p).0
}

/// Potential monitored for descent along solver iterates: the objective at
/// `x` plus `varsigma / (4 tau) * ||x - u||^2`.
pub fn potential(
    x: &Array1<f64>,
    u: &Array1<f64>,
    prob: &Problem,
    p: &ModelParams,
    tau: f64,
    varsigma: f64,
    which: ObjectiveKind,
) -> f64 {
    assert!(tau > 0.0, "tau must be positive");
    assert!(
        varsigma > 0.0 && varsigma < 1.0,
        "varsigma must lie in (0, 1)"
    );
    assert_eq!(x.len(), u.len(), "potential: x and u differ in length");
    let obj = match which {
        ObjectiveKind::ZeroNorm => objective_f(x, prob, p),
        ObjectiveKind::Surrogate => objective_g(x, prob, p),
    };
    let dist_sq: f64 = x.iter().zip(u.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    obj + varsigma / (4.0 * tau) * dist_sq
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    fn params(sigma: f64, gamma: f64) -> ModelParams {
        ModelParams::new(sigma, gamma, 4.0, 10.0, 3.7, SurrogateKind::Scad).unwrap()
    }

    #[test]
    fn dc_loss_branches() {
        assert_eq!(dc_loss_scalar(0.5, 0.8), 0.0);
        assert_eq!(dc_loss_scalar(-0.4, 0.8), 0.4);
        assert_eq!(dc_loss_scalar(-2.0, 0.8), 0.8);
        // boundary t = -sigma is continuous
        assert_eq!(dc_loss_scalar(-0.8, 0.8), 0.8);
    }

    #[test]
    fn smooth_loss_branch_values() {
        let p = params(0.8, 0.05);
        let (v, d) = smooth_loss_scalar(-0.025, &p);
        assert!((v - 0.00625).abs() < 1e-15);
        assert!((d + 0.5).abs() < 1e-15);

        let (v, d) = smooth_loss_scalar(-0.4, &p);
        assert!((v - 0.375).abs() < 1e-15);
        assert_eq!(d, -1.0);

        let (v, d) = smooth_loss_scalar(-2.0, &p);
        assert!((v - 0.775).abs() < 1e-15);
        assert_eq!(d, 0.0);

        // quadratic blend branch; derivative checked by central differences
        let (v, d) = smooth_loss_scalar(-0.8, &p);
        assert!((v - 0.7625).abs() < 1e-15);
        let h = 1e-7;
        let fd = (smooth_loss_scalar(-0.8 + h, &p).0 - smooth_loss_scalar(-0.8 - h, &p).0)
            / (2.0 * h);
        assert!((d - fd).abs() < 1e-6, "d={d} fd={fd}");
        assert!((d + 0.5).abs() < 1e-15);
    }

    #[test]
    fn smooth_loss_bounds_and_approximation() {
        // The uniform smoothing gap is 3*gamma/4, attained at t = -sigma
        // inside the quadratic blend; outside the blend zone it is gamma/2.
        let p = params(1.3, 0.21);
        let mut worst: f64 = 0.0;
        let mut t = -3.0;
        while t <= 1.5 {
            let (v, _) = smooth_loss_scalar(t, &p);
            assert!(v >= 0.0);
            assert!(v <= p.sigma - p.gamma / 2.0 + 1e-15);
            let gap = (v - dc_loss_scalar(t, p.sigma)).abs();
            assert!(gap <= 0.75 * p.gamma + 1e-15, "gap {gap} at t={t}");
            if !((-p.sigma - p.gamma)..=(p.gamma - p.sigma)).contains(&t) {
                assert!(gap <= p.gamma / 2.0 + 1e-15, "gap {gap} at t={t}");
            }
            worst = worst.max(gap);
            t += 1e-3;
        }
        assert!((worst - 0.75 * p.gamma).abs() < 1e-3);
    }

    #[test]
    fn scad_conjugate_values() {
        let (v, d) = conjugate_scalar(0.2, 3.7, SurrogateKind::Scad);
        assert_eq!((v, d), (0.0, 0.0));

        let (v, d) = conjugate_scalar(2.0, 3.7, SurrogateKind::Scad);
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(d, 1.0);

        let (v, d) = conjugate_scalar(1.0, 3.7, SurrogateKind::Scad);
        assert!((v - 0.143617).abs() < 1e-6);
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mcp_conjugate_values() {
        let (v, _) = conjugate_scalar(0.0, 3.0, SurrogateKind::Mcp);
        assert!(v.abs() < 1e-15);
        // continuity and derivative continuity at both breakpoints
        for a in [2.5, 3.0, 4.2] {
            let lo = a - a * a / 2.0;
            for bp in [lo, a] {
                let eps = 1e-9;
                let (vl, dl) = conjugate_scalar(bp - eps, a, SurrogateKind::Mcp);
                let (vr, dr) = conjugate_scalar(bp + eps, a, SurrogateKind::Mcp);
                assert!((vl - vr).abs() < 1e-7);
                assert!((dl - dr).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn scad_conjugate_breakpoint_identities() {
        for a in [1.3, 2.0, 3.7, 8.0] {
            let (v, _) = conjugate_scalar(2.0 / (a + 1.0), a, SurrogateKind::Scad);
            assert!(v.abs() < 1e-15);
            let w = 2.0 * a / (a + 1.0);
            let mid = {
                let q = (a + 1.0) * w - 2.0;
                q * q / (4.0 * (a * a - 1.0))
            };
            let expected = (a - 1.0) / (a + 1.0);
            assert!((mid - expected).abs() < 1e-12);
            assert!((w - 1.0 - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn surrogate_penalty_examples() {
        let p = params(0.8, 0.05);
        let zero = arr1(&[0.0, 0.0, 0.0]);
        let (v, g) = surrogate_penalty(&zero, &p);
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&gi| gi == 0.0));

        let e1 = arr1(&[1.0, 0.0, 0.0]);
        let (v, g) = surrogate_penalty(&e1, &p);
        assert!((v - 4.0).abs() < 1e-12, "v={v}");
        assert_eq!(g[0], 1.0);
        assert_eq!(g[1], 0.0);

        // below the first breakpoint the penalty is plain weighted l1
        let small = 2.0 / (p.rho * (p.a + 1.0)) * 0.9;
        let x = arr1(&[small, -small]);
        let (v, g) = surrogate_penalty(&x, &p);
        assert!((v - p.lambda * p.rho * 2.0 * small).abs() < 1e-12);
        assert!(g.iter().all(|&gi| gi == 0.0));
    }

    #[test]
    fn surrogate_saturates_to_zero_norm() {
        let p = params(0.8, 0.05);
        let thresh = 2.0 * p.a / (p.rho * (p.a - 1.0));
        for t in [thresh, thresh * 1.5, thresh * 40.0] {
            let (v, _) = conjugate_scalar(p.rho * t, p.a, SurrogateKind::Scad);
            let gap = (t - v / p.rho) - 1.0 / p.rho;
            // exact in real arithmetic; f64 leaves rounding of (rho t - 1)/rho
            assert!(gap.abs() <= 4.0 * f64::EPSILON * t.max(1.0), "t={t} gap={gap:e}");
        }
    }

    #[test]
    fn theta_grad_lipschitz_matches_observed_slope() {
        for (kind, a) in [(SurrogateKind::Scad, 3.7), (SurrogateKind::Mcp, 3.0)] {
            let p = ModelParams::new(0.8, 0.05, 4.0, 10.0, a, kind).unwrap();
            let bound = theta_grad_lipschitz(&p);
            let mut observed: f64 = 0.0;
            // probe one-sided differences on a dense positive grid
            let mut t = 1e-4;
            while t < 1.0 {
                let h = 1e-7;
                let d1 = conjugate_scalar(p.rho * t, a, kind).1;
                let d2 = conjugate_scalar(p.rho * (t + h), a, kind).1;
                observed = observed.max((d2 - d1).abs() / h);
                t += 1e-4;
            }
            assert!(
                observed <= bound * (1.0 + 1e-6),
                "{kind:?}: observed {observed} > bound {bound}"
            );
            assert!(observed >= 0.25 * bound, "{kind:?}: bound far from tight");
        }
    }

    #[test]
    fn objectives_and_potential() {
        // 2x2 identity measurements keep the arithmetic transparent
        let phi = ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let b = arr1(&[1.0, 1.0]);
        let prob = Problem::new(phi, b, None).unwrap();
        let p = ModelParams::new(0.8, 0.05, 8.0, 10.0, 3.7, SurrogateKind::Scad).unwrap();

        let e1 = arr1(&[1.0, 0.0]);
        assert!((objective_f(&e1, &prob, &p) - 8.0).abs() < 1e-12);

        let zero = arr1(&[0.0, 0.0]);
        assert!(objective_f(&zero, &prob, &p).is_infinite());
        assert!(objective_g(&zero, &prob, &p).is_infinite());

        // potential at x == u equals the objective; u = 0 adds varsigma/(4 tau)
        let h = potential(&e1, &e1, &prob, &p, 0.1, 0.5, ObjectiveKind::ZeroNorm);
        assert!((h - 8.0).abs() < 1e-12);
        let h = potential(&e1, &zero, &prob, &p, 0.1, 0.5, ObjectiveKind::ZeroNorm);
        assert!((h - (8.0 + 0.5 / 0.4)).abs() < 1e-12);
    }

    #[test]
    fn objective_g_saturated_equals_objective_f() {
        let phi = ndarray::arr2(&[[0.3, -1.2, 0.7], [1.1, 0.4, -0.2], [-0.5, 0.9, 1.4]]);
        let b = arr1(&[1.0, -1.0, 1.0]);
        let prob = Problem::new(phi, b, None).unwrap();
        let p = ModelParams::new(0.8, 0.05, 4.0, 10.0, 3.7, SurrogateKind::Scad).unwrap();
        // all magnitudes above the saturation threshold 2a/(rho (a-1))
        let x = arr1(&[0.6, -0.64, 0.48]);
        assert!((linalg::norm(x.as_slice().unwrap()) - 1.0).abs() < 1e-12);
        let f = objective_f(&x, &prob, &p);
        let g = objective_g(&x, &prob, &p);
        assert!((f - g).abs() < 1e-10, "f={f} g={g}");
    }

    #[test]
    fn loss_grad_on_toy_problem() {
        let phi = ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let b = arr1(&[1.0, 1.0]);
        let prob = Problem::new(phi, b, None).unwrap();
        let p = params(0.8, 0.05);
        let x = arr1(&[-0.4, 0.5]);
        let (v, g) = smooth_loss_and_grad(&x, &prob, &p).unwrap();
        assert!((v - 0.375).abs() < 1e-15);
        assert!((g[0] + 1.0).abs() < 1e-15);
        assert_eq!(g[1], 0.0);

        let pos = arr1(&[0.6, 0.8]);
        let (v, g) = smooth_loss_and_grad(&pos, &prob, &p).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&gi| gi == 0.0));

        let wrong = arr1(&[1.0, 0.0, 0.0]);
        assert!(smooth_loss_and_grad(&wrong, &prob, &p).is_err());
    }

    #[test]
    fn problem_validation() {
        let phi = ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(Problem::new(phi.clone(), arr1(&[1.0, 0.5]), None).is_err());
        assert!(Problem::new(phi.clone(), arr1(&[1.0]), None).is_err());
        assert!(Problem::new(phi.clone(), arr1(&[1.0, -1.0]), Some(arr1(&[0.5, 0.5]))).is_err());
        let prob = Problem::new(phi, arr1(&[1.0, -1.0]), None).unwrap();
        // row scaling by b
        assert_eq!(prob.a_mat()[[1, 1]], -1.0);
    }

    #[test]
    fn sparse_and_dense_products_agree() {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = 40;
        let n = 120;
        let phi = Array2::from_shape_fn((m, n), |_| {
            rand_distr::StandardNormal.sample(&mut rng)
        });
        let b = Array1::from_iter((0..m).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }));
        let prob = Problem::new(phi, b, None).unwrap();

        let mut sparse = Array1::zeros(n);
        sparse[3] = 1.2;
        sparse[77] = -0.4;
        let dense = Array1::from_shape_fn(n, |i| (i as f64 * 0.37).sin());

        for x in [&sparse, &dense] {
            let fast = prob.apply_a(x);
            let naive = prob.a_mat().dot(x);
            for (u, v) in fast.iter().zip(naive.iter()) {
                assert!((u - v).abs() < 1e-10);
            }
        }
        let mut vs = Array1::zeros(m);
        vs[5] = 2.0;
        let vd = Array1::from_shape_fn(m, |i| (i as f64 * 0.11).cos());
        for v in [&vs, &vd] {
            let fast = prob.apply_at(v);
            let naive = prob.a_mat().t().dot(v);
            for (u, w) in fast.iter().zip(naive.iter()) {
                assert!((u - w).abs() < 1e-10);
            }
        }
    }
}
