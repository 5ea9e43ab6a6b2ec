//! Synchronous-round iteration engines: FROST and the baseline methods.
//!
//! Every engine exposes an `init` and a one-step transition over a shared
//! [`NetworkState`] shape. A step is a pure function of
//! `(state, weights, objective)`: all agents read neighbors' iteration-k
//! values and commit k+1 atomically. Per-agent state is stored stacked
//! (`n x p` matrices) so the matrix-form updates map directly onto the
//! code and invariant checks become one-line reductions.

use nalgebra::{DMatrix, DVector};

use crate::error::{FrostError, Result};
use crate::problems::Objective;
use crate::weights::{Kind, StochasticMatrix};

/// Stacked per-agent iterates for any of the engines.
///
/// Fields not used by a given algorithm stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    /// Iteration counter.
    pub k: usize,
    /// Estimates `x_i^k`, one row per agent (`n x p`).
    pub x: DMatrix<f64>,
    /// Eigenvector-learning states `y_i^k` (`n x n`), FROST and the
    /// row-stochastic diminishing-step method.
    pub y_vec: Option<DMatrix<f64>>,
    /// Gradient trackers (`n x p`), gradient-tracking family.
    pub y_grad: Option<DMatrix<f64>>,
    /// FROST trackers `z_i^k` or push-sum ratios (`n x p`).
    pub z: Option<DMatrix<f64>>,
    /// Push-sum mass scalars `v_i^k`.
    pub v: Option<DVector<f64>>,
    /// Gradients at the previous evaluation point, cached so the tracking
    /// difference needs one batch evaluation per step.
    pub last_grad: Option<DMatrix<f64>>,
}

/// Step-size schedule shared by all engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Constant,
    /// `alpha_i / (k + 1)`; satisfies the divergent-sum /
    /// square-summable requirement of the diminishing-step methods.
    Diminishing,
}

/// Per-agent step sizes `alpha_i` with a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizes {
    pub alphas: Vec<f64>,
    pub schedule: Schedule,
}

impl StepSizes {
    pub fn constant(alphas: Vec<f64>) -> Self {
        StepSizes { alphas, schedule: Schedule::Constant }
    }

    pub fn constant_uniform(alpha: f64, n: usize) -> Self {
        StepSizes { alphas: vec![alpha; n], schedule: Schedule::Constant }
    }

    pub fn diminishing_uniform(a0: f64, n: usize) -> Self {
        StepSizes { alphas: vec![a0; n], schedule: Schedule::Diminishing }
    }

    /// Effective step size of agent `i` at iteration `k`.
    pub fn at(&self, i: usize, k: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.alphas[i],
            Schedule::Diminishing => self.alphas[i] / (k as f64 + 1.0),
        }
    }

    pub fn max_alpha(&self) -> f64 {
        self.alphas.iter().cloned().fold(0.0, f64::max)
    }
}

/// Row `i` holds `grad f_i` evaluated at row `i` of `points`.
pub fn stacked_gradients(obj: &dyn Objective, points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = obj.agents();
    let p = obj.dim();
    let mut g = DMatrix::zeros(n, p);
    for i in 0..n {
        let xi = DVector::from_fn(p, |j, _| points[(i, j)]);
        let gi = obj.gradient(i, &xi);
        for j in 0..p {
            g[(i, j)] = gi[j];
        }
    }
    g
}

fn check_dims(obj: &dyn Objective, x0: &DMatrix<f64>) -> Result<()> {
    if x0.nrows() != obj.agents() || x0.ncols() != obj.dim() {
        return Err(FrostError::DimensionMismatch(format!(
            "x0 is {}x{}, objective wants {}x{}",
            x0.nrows(),
            x0.ncols(),
            obj.agents(),
            obj.dim()
        )));
    }
    Ok(())
}

fn require_kind(m: &StochasticMatrix, expected: Kind) -> Result<()> {
    if m.kind() != expected {
        return Err(FrostError::KindMismatch {
            expected: expected.name(),
            got: m.kind().name(),
        });
    }
    Ok(())
}

/// Diagonal entries of `y_vec`, failing if any is non-positive (which
/// signals a weights bug: impossible for a primitive matrix with positive
/// diagonal).
fn positive_diagonal(y_vec: &DMatrix<f64>, k: usize) -> Result<DVector<f64>> {
    let n = y_vec.nrows();
    let mut d = DVector::zeros(n);
    for i in 0..n {
        let yii = y_vec[(i, i)];
        if yii <= 0.0 {
            return Err(FrostError::InvariantViolation {
                iter: k,
                what: format!("diagonal entry [Y]_{i}{i} = {yii} is not positive"),
            });
        }
        d[i] = yii;
    }
    Ok(d)
}

/// Rows of `grads` divided by the matching diagonal entry.
fn scale_rows_by_inverse(grads: &DMatrix<f64>, diag: &DVector<f64>) -> DMatrix<f64> {
    let mut out = grads.clone();
    for i in 0..out.nrows() {
        for j in 0..out.ncols() {
            out[(i, j)] /= diag[i];
        }
    }
    out
}

// ---------------------------------------------------------------------------
// FROST
// ---------------------------------------------------------------------------

/// FROST initialization: `Y_0 = I_n`, `z_0 = grad f(x_0)`.
pub fn frost_init(a: &StochasticMatrix, obj: &dyn Objective, x0: DMatrix<f64>) -> Result<NetworkState> {
    require_kind(a, Kind::Row)?;
    check_dims(obj, &x0)?;
    if a.n() != obj.agents() {
        return Err(FrostError::DimensionMismatch(format!(
            "weight matrix is {0}x{0}, objective has {1} agents",
            a.n(),
            obj.agents()
        )));
    }
    let grads = stacked_gradients(obj, &x0);
    Ok(NetworkState {
        k: 0,
        x: x0,
        y_vec: Some(DMatrix::identity(a.n(), a.n())),
        y_grad: None,
        z: Some(grads.clone()),
        v: None,
        last_grad: Some(grads),
    })
}

/// One FROST round:
///
/// ```text
/// Y_{k+1} = A Y_k
/// x_{k+1} = A x_k - D z_k
/// z_{k+1} = A z_k + Ytilde_{k+1}^{-1} grad f(x_{k+1}) - Ytilde_k^{-1} grad f(x_k)
/// ```
pub fn frost_step(
    s: &NetworkState,
    a: &StochasticMatrix,
    steps: &StepSizes,
    obj: &dyn Objective,
) -> Result<NetworkState> {
    require_kind(a, Kind::Row)?;
    let y_vec = s.y_vec.as_ref().expect("FROST state carries y_vec");
    let z = s.z.as_ref().expect("FROST state carries z");
    let last_grad = s.last_grad.as_ref().expect("FROST state carries last_grad");

    let diag_old = positive_diagonal(y_vec, s.k)?;
    let y_next = a.entries() * y_vec;
    let diag_new = positive_diagonal(&y_next, s.k + 1)?;

    let mut x_next = a.entries() * &s.x;
    for i in 0..x_next.nrows() {
        let alpha = steps.at(i, s.k);
        for j in 0..x_next.ncols() {
            x_next[(i, j)] -= alpha * z[(i, j)];
        }
    }

    let grads_new = stacked_gradients(obj, &x_next);
    let z_next = a.entries() * z + scale_rows_by_inverse(&grads_new, &diag_new)
        - scale_rows_by_inverse(last_grad, &diag_old);

    Ok(NetworkState {
        k: s.k + 1,
        x: x_next,
        y_vec: Some(y_next),
        y_grad: None,
        z: Some(z_next),
        v: None,
        last_grad: Some(grads_new),
    })
}

/// Relative error of the weighted tracking identity
/// `pi_r^T z_k = pi_r^T Ytilde_k^{-1} grad f(x_k)`.
pub fn frost_tracking_error(
    s: &NetworkState,
    pi: &DVector<f64>,
    obj: &dyn Objective,
) -> Result<f64> {
    let z = s.z.as_ref().expect("FROST state carries z");
    let y_vec = s.y_vec.as_ref().expect("FROST state carries y_vec");
    let diag = positive_diagonal(y_vec, s.k)?;
    let grads = s
        .last_grad
        .clone()
        .unwrap_or_else(|| stacked_gradients(obj, &s.x));
    let scaled = scale_rows_by_inverse(&grads, &diag);
    let lhs = z.transpose() * pi;
    let rhs = scaled.transpose() * pi;
    // Unit floor on the scale: near the optimum both sides decay to zero
    // and a pure ratio would only measure accumulated rounding.
    let scale = rhs.norm().max(1.0);
    Ok((lhs - rhs).norm() / scale)
}

// ---------------------------------------------------------------------------
// Doubly-stochastic baselines
// ---------------------------------------------------------------------------

/// DGD initialization: only the estimates.
pub fn dgd_init(obj: &dyn Objective, x0: DMatrix<f64>) -> Result<NetworkState> {
    check_dims(obj, &x0)?;
    Ok(NetworkState { k: 0, x: x0, y_vec: None, y_grad: None, z: None, v: None, last_grad: None })
}

/// Distributed gradient descent: `x_i <- sum_j w_ij x_j - alpha_k grad f_i(x_i)`.
pub fn dgd_step(
    s: &NetworkState,
    w: &StochasticMatrix,
    steps: &StepSizes,
    obj: &dyn Objective,
) -> Result<NetworkState> {
    require_kind(w, Kind::Doubly)?;
    let grads = stacked_gradients(obj, &s.x);
    let mut x_next = w.entries() * &s.x;
    for i in 0..x_next.nrows() {
        let alpha = steps.at(i, s.k);
        for j in 0..x_next.ncols() {
            x_next[(i, j)] -= alpha * grads[(i, j)];
        }
    }
    Ok(NetworkState { k: s.k + 1, x: x_next, ..dgd_blank() })
}

fn dgd_blank() -> NetworkState {
    NetworkState {
        k: 0,
        x: DMatrix::zeros(0, 0),
        y_vec: None,
        y_grad: None,
        z: None,
        v: None,
        last_grad: None,
    }
}

/// Gradient-tracking initialization: `y_0 = grad f(x_0)`.
pub fn gt_ds_init(obj: &dyn Objective, x0: DMatrix<f64>) -> Result<NetworkState> {
    check_dims(obj, &x0)?;
    let grads = stacked_gradients(obj, &x0);
    Ok(NetworkState {
        k: 0,
        x: x0,
        y_vec: None,
        y_grad: Some(grads.clone()),
        z: None,
        v: None,
        last_grad: Some(grads),
    })
}

/// Doubly-stochastic gradient tracking:
///
/// ```text
/// x_{k+1} = W x_k - alpha y_k
/// y_{k+1} = W y_k + grad f(x_{k+1}) - grad f(x_k)
/// ```
pub fn gt_ds_step(
    s: &NetworkState,
    w: &StochasticMatrix,
    steps: &StepSizes,
    obj: &dyn Objective,
) -> Result<NetworkState> {
    require_kind(w, Kind::Doubly)?;
    let y_grad = s.y_grad.as_ref().expect("tracking state carries y_grad");
    let last_grad = s.last_grad.as_ref().expect("tracking state carries last_grad");

    let mut x_next = w.entries() * &s.x;
    for i in 0..x_next.nrows() {
        let alpha = steps.at(i, s.k);
        for j in 0..x_next.ncols() {
            x_next[(i, j)] -= alpha * y_grad[(i, j)];
        }
    }
    let grads_new = stacked_gradients(obj, &x_next);
    let y_next = w.entries() * y_grad + &grads_new - last_grad;
    Ok(NetworkState {
        k: s.k + 1,
        x: x_next,
        y_vec: None,
        y_grad: Some(y_next),
        z: None,
        v: None,
        last_grad: Some(grads_new),
    })
}

// ---------------------------------------------------------------------------
// Push-sum family (column-stochastic)
// ---------------------------------------------------------------------------

/// Push-sum initialization: `v_0 = 1`, `z_0 = x_0`.
pub fn push_sum_init(n: usize, x0: DMatrix<f64>) -> Result<NetworkState> {
    if x0.nrows() != n {
        return Err(FrostError::DimensionMismatch(format!(
            "x0 has {} rows, expected {n}",
            x0.nrows()
        )));
    }
    Ok(NetworkState {
        k: 0,
        z: Some(x0.clone()),
        x: x0,
        y_vec: None,
        y_grad: None,
        v: Some(DVector::from_element(n, 1.0)),
        last_grad: None,
    })
}

fn positive_mass(v: &DVector<f64>, k: usize) -> Result<()> {
    for i in 0..v.len() {
        if v[i] <= 0.0 {
            return Err(FrostError::InvariantViolation {
                iter: k,
                what: format!("push-sum mass v_{i} = {} is not positive", v[i]),
            });
        }
    }
    Ok(())
}

fn ratio_rows(x: &DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let mut z = x.clone();
    for i in 0..z.nrows() {
        for j in 0..z.ncols() {
            z[(i, j)] /= v[i];
        }
    }
    z
}

/// Pure average consensus: `v <- Bv; x <- Bx; z = x / v`.
pub fn push_sum_step(s: &NetworkState, b: &StochasticMatrix) -> Result<NetworkState> {
    require_kind(b, Kind::Column)?;
    let v = s.v.as_ref().expect("push-sum state carries v");
    let v_next = b.entries() * v;
    positive_mass(&v_next, s.k + 1)?;
    let x_next = b.entries() * &s.x;
    let z_next = ratio_rows(&x_next, &v_next);
    Ok(NetworkState {
        k: s.k + 1,
        x: x_next,
        y_vec: None,
        y_grad: None,
        z: Some(z_next),
        v: Some(v_next),
        last_grad: None,
    })
}

/// Subgradient-push initialization: same as push-sum, with the gradient
/// at `z_0` cached.
pub fn subgradient_push_init(obj: &dyn Objective, x0: DMatrix<f64>) -> Result<NetworkState> {
    check_dims(obj, &x0)?;
    let mut s = push_sum_init(obj.agents(), x0)?;
    s.last_grad = Some(stacked_gradients(obj, s.z.as_ref().unwrap()));
    Ok(s)
}

/// Subgradient-push: `v <- Bv; x <- Bx - alpha_k grad f(z_k); z = x / v`.
pub fn subgradient_push_step(
    s: &NetworkState,
    b: &StochasticMatrix,
    steps: &StepSizes,
    obj: &dyn Objective,
) -> Result<NetworkState> {
    require_kind(b, Kind::Column)?;
    let v = s.v.as_ref().expect("push-sum state carries v");
    let grads = s
        .last_grad
        .clone()
        .unwrap_or_else(|| stacked_gradients(obj, s.z.as_ref().expect("z present")));

    let v_next = b.entries() * v;
    positive_mass(&v_next, s.k + 1)?;
    let mut x_next = b.entries() * &s.x;
    for i in 0..x_next.nrows() {
        let alpha = steps.at(i, s.k);
        for j in 0..x_next.ncols() {
            x_next[(i, j)] -= alpha * grads[(i, j)];
        }
    }
    let z_next = ratio_rows(&x_next, &v_next);
    let grads_new = stacked_gradients(obj, &z_next);
    Ok(NetworkState {
        k: s.k + 1,
        x: x_next,
        y_vec: None,
        y_grad: None,
        z: Some(z_next),
        v: Some(v_next),
        last_grad: Some(grads_new),
    })
}

/// ADD-OPT initialization: `v_0 = 1`, `z_0 = x_0`, `y_0 = grad f(x_0)`.
pub fn add_opt_init(obj: &dyn Objective, x0: DMatrix<f64>) -> Result<NetworkState> {
    check_dims(obj, &x0)?;
    let grads = stacked_gradients(obj, &x0);
    Ok(NetworkState {
        k: 0,
        z: Some(x0.clone()),
        x: x0,
        y_vec: None,
        y_grad: Some(grads.clone()),
        v: Some(DVector::from_element(obj.agents(), 1.0)),
        last_grad: Some(grads),
    })
}

/// ADD-OPT / Push-DIGing:
///
/// ```text
/// v <- Bv;  x <- Bx - alpha y;  z = x / v
/// y <- By + grad f(z_new) - grad f(z_old)
/// ```
pub fn add_opt_step(
    s: &NetworkState,
    b: &StochasticMatrix,
    steps: &StepSizes,
    obj: &dyn Objective,
) -> Result<NetworkState> {
    require_kind(b, Kind::Column)?;
    let v = s.v.as_ref().expect("push-sum state carries v");
    let y_grad = s.y_grad.as_ref().expect("tracking state carries y_grad");
    let last_grad = s.last_grad.as_ref().expect("tracking state carries last_grad");

    let v_next = b.entries() * v;
    positive_mass(&v_next, s.k + 1)?;
    let mut x_next = b.entries() * &s.x;
    for i in 0..x_next.nrows() {
        let alpha = steps.at(i, s.k);
        for j in 0..x_next.ncols() {
            x_next[(i, j)] -= alpha * y_grad[(i, j)];
        }
    }
    let z_next = ratio_rows(&x_next, &v_next);
    let grads_new = stacked_gradients(obj, &z_next);
    let y_next = b.entries() * y_grad + &grads_new - last_grad;
    Ok(NetworkState {
        k: s.k + 1,
        x: x_next,
        y_vec: None,
        y_grad: Some(y_next),
        z: Some(z_next),
        v: Some(v_next),
        last_grad: Some(grads_new),
    })
}

// ---------------------------------------------------------------------------
// AB and the row-stochastic diminishing-step method
// ---------------------------------------------------------------------------

/// AB initialization: `y_0 = grad f(x_0)`.
pub fn ab_init(obj: &dyn Objective, x0: DMatrix<f64>) -> Result<NetworkState> {
    gt_ds_init(obj, x0)
}

/// AB: simultaneous row- and column-stochastic weights.
///
/// ```text
/// x <- Ax - alpha y
/// y <- By + grad f(x_new) - grad f(x_old)
/// ```
pub fn ab_step(
    s: &NetworkState,
    a: &StochasticMatrix,
    b: &StochasticMatrix,
    steps: &StepSizes,
    obj: &dyn Objective,
) -> Result<NetworkState> {
    require_kind(a, Kind::Row)?;
    require_kind(b, Kind::Column)?;
    let y_grad = s.y_grad.as_ref().expect("tracking state carries y_grad");
    let last_grad = s.last_grad.as_ref().expect("tracking state carries last_grad");

    let mut x_next = a.entries() * &s.x;
    for i in 0..x_next.nrows() {
        let alpha = steps.at(i, s.k);
        for j in 0..x_next.ncols() {
            x_next[(i, j)] -= alpha * y_grad[(i, j)];
        }
    }
    let grads_new = stacked_gradients(obj, &x_next);
    let y_next = b.entries() * y_grad + &grads_new - last_grad;
    Ok(NetworkState {
        k: s.k + 1,
        x: x_next,
        y_vec: None,
        y_grad: Some(y_next),
        z: None,
        v: None,
        last_grad: Some(grads_new),
    })
}

/// Row-stochastic diminishing-step initialization: `y_0^i = e_i`.
pub fn row_sublinear_init(obj: &dyn Objective, x0: DMatrix<f64>) -> Result<NetworkState> {
    check_dims(obj, &x0)?;
    let n = obj.agents();
    Ok(NetworkState {
        k: 0,
        x: x0,
        y_vec: Some(DMatrix::identity(n, n)),
        y_grad: None,
        z: None,
        v: None,
        last_grad: None,
    })
}

/// Row-stochastic method with Perron-imbalance correction and diminishing
/// steps:
///
/// ```text
/// y <- Ay
/// x_i <- sum_j a_ij x_j - alpha_k grad f_i(x_i) / [y_k^i]_i
/// ```
pub fn row_sublinear_step(
    s: &NetworkState,
    a: &StochasticMatrix,
    steps: &StepSizes,
    obj: &dyn Objective,
) -> Result<NetworkState> {
    require_kind(a, Kind::Row)?;
    let y_vec = s.y_vec.as_ref().expect("state carries y_vec");
    let diag = positive_diagonal(y_vec, s.k)?;

    let grads = stacked_gradients(obj, &s.x);
    let scaled = scale_rows_by_inverse(&grads, &diag);
    let mut x_next = a.entries() * &s.x;
    for i in 0..x_next.nrows() {
        let alpha = steps.at(i, s.k);
        for j in 0..x_next.ncols() {
            x_next[(i, j)] -= alpha * scaled[(i, j)];
        }
    }
    let y_next = a.entries() * y_vec;
    Ok(NetworkState {
        k: s.k + 1,
        x: x_next,
        y_vec: Some(y_next),
        y_grad: None,
        z: None,
        v: None,
        last_grad: None,
    })
}

// ---------------------------------------------------------------------------
// Conservation diagnostics
// ---------------------------------------------------------------------------

/// `|sum_i v_i - n|` for the push-sum family (column sums 1 conserve mass).
pub fn mass_conservation_error(s: &NetworkState) -> Option<f64> {
    s.v.as_ref().map(|v| (v.iter().sum::<f64>() - v.len() as f64).abs())
}

/// Tracker-sum error `||sum_i y_i - sum_i grad f_i(e_i)||` normalized per
/// unit gradient scale, where `e_i` is the agent's current evaluation
/// point (`z` for ADD-OPT, `x` otherwise).
pub fn tracker_conservation_error(s: &NetworkState, obj: &dyn Objective) -> Option<f64> {
    let y_grad = s.y_grad.as_ref()?;
    let grads = match s.last_grad.as_ref() {
        Some(g) => g.clone(),
        None => stacked_gradients(obj, &s.x),
    };
    let mut y_sum = DVector::<f64>::zeros(y_grad.ncols());
    let mut g_sum = DVector::<f64>::zeros(grads.ncols());
    for j in 0..y_grad.ncols() {
        y_sum[j] = (0..y_grad.nrows()).map(|i| y_grad[(i, j)]).sum();
        g_sum[j] = (0..grads.nrows()).map(|i| grads[(i, j)]).sum();
    }
    let scale = g_sum.norm().max(1.0);
    Some((y_sum - g_sum).norm() / scale)
}
