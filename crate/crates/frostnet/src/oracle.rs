//! Ground-truth and verification services: centralized solver, gradient
//! checks, contraction checks, linear-rate fitting, and the small LTI
//! step-size certificate.
//!
//! Everything here is a pure function; the harness and test suites consume
//! these as independent oracles.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{FrostError, Result};
use crate::problems::{Objective, SmoothnessConstants};
use crate::weights::{contraction_estimate, perron_left, spectral_norm, StochasticMatrix, PERRON_TOL};

/// Centralized minimizer of `F(x) = (1/n) sum f_i(x)`.
///
/// Quadratic suites return their closed form; everything else runs
/// gradient descent from step `1/l` with Barzilai-Borwein step updates,
/// halving on any value increase, until `||grad F|| <= tol`. The
/// safeguarded base step `1/l` keeps every accepted move a descent step.
pub fn solve_centralized(
    obj: &dyn Objective,
    constants: &SmoothnessConstants,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    if let Some(xs) = obj.closed_form_optimum() {
        return Ok(xs);
    }
    let base_step = 1.0 / constants.l;
    let mut x = DVector::zeros(obj.dim());
    let mut value = obj.global_value(&x);
    let mut grad = obj.global_gradient(&x);
    let mut step = base_step;
    for _ in 0..max_iter {
        if grad.norm() <= tol {
            return Ok(x);
        }
        let mut trial = step;
        let (next, next_value) = loop {
            let candidate = &x - &grad * trial;
            let candidate_value = obj.global_value(&candidate);
            if candidate_value <= value || trial <= base_step {
                break (candidate, candidate_value);
            }
            trial *= 0.5;
        };
        let next_grad = obj.global_gradient(&next);
        let dx = &next - &x;
        let dg = &next_grad - &grad;
        let curvature = dx.dot(&dg);
        // BB step; fall back to 1/l near degeneracy
        step = if curvature > 1e-300 {
            (dx.norm_squared() / curvature).clamp(base_step, 1e6 * base_step)
        } else {
            base_step
        };
        x = next;
        value = next_value;
        grad = next_grad;
    }
    let final_norm = grad.norm();
    if final_norm <= tol {
        Ok(x)
    } else {
        Err(FrostError::SolverDidNotConverge { tol, max_iter, final_norm })
    }
}

/// Max per-agent relative error between analytic gradients and central
/// finite differences `(f(x + h e_j) - f(x - h e_j)) / 2h`.
pub fn check_gradient(obj: &dyn Objective, points: &[DVector<f64>], h: f64) -> f64 {
    let p = obj.dim();
    let mut worst: f64 = 0.0;
    for x in points {
        for agent in 0..obj.agents() {
            let analytic = obj.gradient(agent, x);
            let mut fd = DVector::zeros(p);
            for j in 0..p {
                let mut plus = x.clone();
                let mut minus = x.clone();
                plus[j] += h;
                minus[j] -= h;
                fd[j] = (obj.value(agent, &plus) - obj.value(agent, &minus)) / (2.0 * h);
            }
            let err = (&fd - &analytic).norm() / analytic.norm().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

/// `sigma_F = max(|1 - alpha mu|, |1 - alpha l|)`, the one-step
/// contraction factor of centralized gradient descent.
pub fn sigma_f(alpha: f64, constants: &SmoothnessConstants) -> f64 {
    (1.0 - alpha * constants.mu).abs().max((1.0 - alpha * constants.l).abs())
}

/// Sampled verification that one gradient step contracts the distance to
/// the optimum by `sigma_F`.
pub fn check_centralized_contraction(
    obj: &dyn Objective,
    constants: &SmoothnessConstants,
    x_star: &DVector<f64>,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<bool> {
    if alpha <= 0.0 || alpha >= 2.0 / constants.l {
        return Err(FrostError::StepSizeOutOfRange(alpha, 2.0 / constants.l));
    }
    let sigma = sigma_f(alpha, constants);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let x = x_star + DVector::from_fn(obj.dim(), |_, _| StandardNormal.sample(&mut rng));
        let stepped = &x - obj.global_gradient(&x) * alpha;
        let lhs = (stepped - x_star).norm();
        let rhs = sigma * (&x - x_star).norm();
        if lhs > rhs + 1e-10 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Result of a log-linear fit of a residual sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Per-iteration geometric factor `exp(slope)` in `(0, 1]`.
    pub rate: f64,
    /// Goodness of the log-linear fit.
    pub r_squared: f64,
    /// Iteration range `[start, end)` the fit used.
    pub window: (usize, usize),
}

/// Residuals at or below this floor are rounding plateau, not signal.
pub const RATE_FIT_FLOOR: f64 = 1e-13;

/// Fraction of the sequence dropped as transient before fitting.
pub const RATE_FIT_BURN_IN: f64 = 0.10;

/// Least-squares line through `(k, log residual_k)` after burn-in.
pub fn fit_linear_rate(residuals: &[f64]) -> Result<RateFit> {
    let start = (residuals.len() as f64 * RATE_FIT_BURN_IN).ceil() as usize;
    let points: Vec<(f64, f64)> = residuals
        .iter()
        .enumerate()
        .skip(start)
        .filter(|(_, &r)| r > RATE_FIT_FLOOR)
        .map(|(k, &r)| (k as f64, r.ln()))
        .collect();
    if points.len() < 20 {
        return Err(FrostError::TooFewResiduals { needed: 20, got: points.len() });
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;

    let mean_y = sy / n;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 =
        points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let r_squared = if ss_tot <= 1e-30 {
        // flat sequence: the fit is exact
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    let end = points.last().map(|p| p.0 as usize + 1).unwrap_or(residuals.len());
    Ok(RateFit { rate: slope.exp().min(1.0), r_squared, window: (start, end) })
}

// ---------------------------------------------------------------------------
// Small LTI step-size certificate
// ---------------------------------------------------------------------------

/// Constants feeding the 3x3 step-size certificate matrix, estimated in
/// the 2-norm (norm-equivalence constants c = d = 1).
#[derive(Debug, Clone)]
pub struct CertificateConstants {
    /// Contraction factor of the deflated weight matrix.
    pub sigma: f64,
    /// `||I - Y_inf||_2`.
    pub epsilon: f64,
    /// `||A - I||_2`.
    pub tau: f64,
    /// `sup_k ||Y_k||_2`.
    pub y_sup: f64,
    /// `sup_k ||Ytilde_k^{-1}||_2`.
    pub ytilde_sup: f64,
    pub n: usize,
    pub l: f64,
    pub mu: f64,
    /// Left Perron eigenvector of the weight matrix.
    pub pi: DVector<f64>,
    /// The nine coupling coefficients of the certificate matrix.
    pub a: [f64; 9],
}

impl CertificateConstants {
    pub fn pi_min(&self) -> f64 {
        self.pi.iter().cloned().fold(f64::MAX, f64::min)
    }
}

/// Measures the certificate constants from the actual weight-matrix power
/// sequence `Y_k = A^k` over `horizon` iterations.
pub fn estimate_certificate_constants(
    a_mat: &StochasticMatrix,
    constants: &SmoothnessConstants,
    horizon: usize,
) -> Result<CertificateConstants> {
    let n = a_mat.n();
    let sigma = contraction_estimate(a_mat)?;
    let pi = perron_left(a_mat, PERRON_TOL, 100 * n.max(10))?;
    let ones = DVector::from_element(n, 1.0);
    let y_inf = &ones * pi.transpose();
    let identity = DMatrix::<f64>::identity(n, n);

    let epsilon = spectral_norm(&(&identity - &y_inf));
    let tau = spectral_norm(&(a_mat.entries() - &identity));

    let mut y_sup = spectral_norm(&y_inf);
    let mut ytilde_sup = 1.0 / pi.iter().cloned().fold(f64::MAX, f64::min);
    let mut power = identity.clone();
    for _ in 0..=horizon {
        y_sup = y_sup.max(spectral_norm(&power));
        let min_diag = (0..n).map(|i| power[(i, i)]).fold(f64::MAX, f64::min);
        if min_diag <= 0.0 {
            return Err(FrostError::NotContractive(1.0));
        }
        ytilde_sup = ytilde_sup.max(1.0 / min_diag);
        power = a_mat.entries() * power;
    }

    let (l, mu) = (constants.l, constants.mu);
    let nf = n as f64;
    let (y, yt) = (y_sup, ytilde_sup);
    let a = [
        epsilon * nf * l,            // a1 = c d eps n l
        epsilon * nf * l,            // a2 = d eps n l
        epsilon,                     // a3 = d^2 eps
        nf * l,                      // a4 = c n l
        y,                           // a5 = y c
        epsilon * yt * l * tau,      // a6 = eps ytilde l tau c d
        nf * l * l * epsilon * yt,   // a7 = c d n l^2 eps ytilde
        nf * l * l * epsilon * yt,   // a8 = d n l^2 eps ytilde
        epsilon * l * yt,            // a9 = d^2 eps l ytilde
    ];
    Ok(CertificateConstants { sigma, epsilon, tau, y_sup, ytilde_sup, n, l, mu, pi, a })
}

/// Assembles the 3x3 certificate matrix for per-agent steps `alphas` and
/// returns it with its spectral radius.
///
/// The middle diagonal entry is `lambda = 1 - mu n pi^T alpha`, valid in
/// the regime `pi^T alpha < 1/(n l)` (zero steps allowed).
pub fn build_theorem1_matrix(
    c: &CertificateConstants,
    alphas: &[f64],
) -> Result<(DMatrix<f64>, f64)> {
    if alphas.len() != c.n {
        return Err(FrostError::DimensionMismatch(format!(
            "{} step sizes for {} agents",
            alphas.len(),
            c.n
        )));
    }
    let pi_alpha: f64 = c.pi.iter().zip(alphas).map(|(&p, &a)| p * a).sum();
    let nf = c.n as f64;
    if pi_alpha >= 1.0 / (nf * c.l) {
        return Err(FrostError::RegimeViolation(format!(
            "pi^T alpha = {pi_alpha:.6e} must be below 1/(n l) = {:.6e}",
            1.0 / (nf * c.l)
        )));
    }
    let abar = alphas.iter().cloned().fold(0.0, f64::max);
    let lambda = 1.0 - c.mu * nf * pi_alpha;
    let [a1, a2, a3, a4, a5, a6, a7, a8, a9] = c.a;
    let j = DMatrix::from_row_slice(
        3,
        3,
        &[
            c.sigma + a1 * abar, a2 * abar,      a3 * abar,
            a4 * abar,           lambda,         a5 * abar,
            a6 + a7 * abar,      a8 * abar,      c.sigma + a9 * abar,
        ],
    );
    // At zero step the matrix is lower triangular, so the spectrum is its
    // diagonal; reading it off directly keeps rho(J_0) = 1 exact.
    let rho = if abar == 0.0 {
        c.sigma.max(lambda)
    } else {
        j.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
    };
    Ok((j, rho))
}

/// The positive vector `(delta_1, delta_2, delta_3)` built by the
/// selection recipe: `delta_3 = 1`, `delta_1` halfway to its cap
/// `(1 - sigma) delta_3 / a_6`, `delta_2` at twice its floor
/// `(a_4 delta_1 + a_5 delta_3) / (mu n pi_min)`.
pub fn delta_certificate(c: &CertificateConstants) -> [f64; 3] {
    let delta3 = 1.0;
    let delta1 = 0.5 * (1.0 - c.sigma) * delta3 / c.a[5];
    let delta2 = 2.0 * (c.a[3] * delta1 + c.a[4] * delta3) / (c.mu * c.n as f64 * c.pi_min());
    [delta1, delta2, delta3]
}

/// Largest-step-size bound for which the certificate guarantees
/// contraction:
///
/// ```text
/// min( delta1 (1-sigma) / (a1 d1 + a2 d2 + a3 d3),
///      ((1-sigma) d3 - d1 a6) / (a7 d1 + a8 d2 + a9 d3),
///      1 / (n l) )
/// ```
pub fn alpha_upper_bound(c: &CertificateConstants, delta: &[f64; 3]) -> f64 {
    let [a1, a2, a3, a4, a5, a6, a7, a8, a9] = c.a;
    let _ = (a4, a5);
    let [d1, d2, d3] = *delta;
    let first = d1 * (1.0 - c.sigma) / (a1 * d1 + a2 * d2 + a3 * d3);
    let third = ((1.0 - c.sigma) * d3 - d1 * a6) / (a7 * d1 + a8 * d2 + a9 * d3);
    first.min(third).min(1.0 / (c.n as f64 * c.l))
}

/// Elementwise check `J delta < delta`; by nonnegative-matrix theory this
/// certifies `rho(J) < 1`.
pub fn certificate_holds(j: &DMatrix<f64>, delta: &[f64; 3]) -> bool {
    let d = DVector::from_row_slice(delta);
    let jd = j * &d;
    (0..3).all(|i| jd[i] < d[i])
}
