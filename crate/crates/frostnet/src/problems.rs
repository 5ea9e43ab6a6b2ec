//! Per-agent objective functions with analytic gradients and smoothness
//! constants, plus synthetic data for the distributed logistic-regression
//! benchmark.
//!
//! The global objective is `F(x) = (1/n) sum_i f_i(x)`.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{FrostError, Result};

/// Lipschitz constant `l` of every per-agent gradient and strong-convexity
/// constant `mu`, with `mu <= l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessConstants {
    pub l: f64,
    pub mu: f64,
}

/// A suite of per-agent differentiable functions `f_i : R^p -> R`.
///
/// Objectives are pure evaluations over immutable data and are
/// concurrently callable.
pub trait Objective {
    /// Agent count `n`.
    fn agents(&self) -> usize;
    /// Decision dimension `p`.
    fn dim(&self) -> usize;
    fn value(&self, agent: usize, x: &DVector<f64>) -> f64;
    fn gradient(&self, agent: usize, x: &DVector<f64>) -> DVector<f64>;

    /// `F(x) = (1/n) sum_i f_i(x)`.
    fn global_value(&self, x: &DVector<f64>) -> f64 {
        let n = self.agents();
        (0..n).map(|i| self.value(i, x)).sum::<f64>() / n as f64
    }

    /// `grad F(x) = (1/n) sum_i grad f_i(x)`.
    fn global_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.agents();
        let mut g = DVector::zeros(self.dim());
        for i in 0..n {
            g += self.gradient(i, x);
        }
        g / n as f64
    }

    /// Exact optimum when the suite admits one (quadratics); the
    /// centralized solver takes this shortcut when available.
    fn closed_form_optimum(&self) -> Option<DVector<f64>> {
        None
    }
}

/// Quadratic suite `f_i(x) = (q_i/2) ||x - c_i||^2` with a closed-form
/// global optimum, used as the analytic test problem.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    centers: Vec<DVector<f64>>,
    curvatures: Vec<f64>,
}

impl QuadraticObjective {
    pub fn new(centers: Vec<DVector<f64>>, curvatures: Vec<f64>) -> Result<Self> {
        if centers.len() != curvatures.len() || centers.is_empty() {
            return Err(FrostError::DimensionMismatch(format!(
                "{} centers vs {} curvatures",
                centers.len(),
                curvatures.len()
            )));
        }
        let p = centers[0].len();
        if centers.iter().any(|c| c.len() != p) {
            return Err(FrostError::DimensionMismatch("ragged center dimensions".into()));
        }
        if let Some(&q) = curvatures.iter().find(|&&q| q <= 0.0) {
            return Err(FrostError::NonPositiveCurvature(q));
        }
        Ok(QuadraticObjective { centers, curvatures })
    }

    pub fn constants(&self) -> SmoothnessConstants {
        SmoothnessConstants {
            l: self.curvatures.iter().cloned().fold(f64::MIN, f64::max),
            mu: self.curvatures.iter().cloned().fold(f64::MAX, f64::min),
        }
    }

    /// Closed-form optimum `x* = (sum q_i c_i) / (sum q_i)`.
    pub fn optimum(&self) -> DVector<f64> {
        let mut num = DVector::zeros(self.dim());
        let mut den = 0.0;
        for (c, &q) in self.centers.iter().zip(&self.curvatures) {
            num += c * q;
            den += q;
        }
        num / den
    }
}

impl Objective for QuadraticObjective {
    fn agents(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn value(&self, agent: usize, x: &DVector<f64>) -> f64 {
        let d = x - &self.centers[agent];
        0.5 * self.curvatures[agent] * d.norm_squared()
    }

    fn gradient(&self, agent: usize, x: &DVector<f64>) -> DVector<f64> {
        (x - &self.centers[agent]) * self.curvatures[agent]
    }

    fn closed_form_optimum(&self) -> Option<DVector<f64>> {
        Some(self.optimum())
    }
}

/// Convenience constructor returning the suite plus its constants.
pub fn quadratic_objective(
    centers: Vec<DVector<f64>>,
    curvatures: Vec<f64>,
) -> Result<(QuadraticObjective, SmoothnessConstants)> {
    let obj = QuadraticObjective::new(centers, curvatures)?;
    let constants = obj.constants();
    Ok((obj, constants))
}

/// Random quadratic suite: standard-normal centers, curvatures uniform on
/// [0.5, 2.0], deterministic per seed.
pub fn gen_quadratic_suite(
    n: usize,
    dim: usize,
    seed: u64,
) -> (QuadraticObjective, SmoothnessConstants) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<DVector<f64>> = (0..n)
        .map(|_| DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng)))
        .collect();
    let curvatures: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let obj = QuadraticObjective::new(centers, curvatures).expect("generated suite is well formed");
    let constants = obj.constants();
    (obj, constants)
}

/// Per-agent training data for the logistic-regression benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticData {
    /// `features[i]` holds the `m_i` feature vectors of agent `i`.
    pub features: Vec<Vec<DVector<f64>>>,
    /// Labels in `{-1.0, +1.0}`, parallel to `features`.
    pub labels: Vec<Vec<f64>>,
    pub lambda: f64,
    pub dim: usize,
}

impl LogisticData {
    pub fn agents(&self) -> usize {
        self.features.len()
    }

    pub fn sample_count(&self) -> usize {
        self.features.iter().map(|f| f.len()).sum()
    }

    /// CSV export with header row `agent,label,f1..fp`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("agent,label");
        for j in 1..=self.dim {
            let _ = write!(s, ",f{j}");
        }
        s.push('\n');
        for (i, (fs, ls)) in self.features.iter().zip(&self.labels).enumerate() {
            for (c, &y) in fs.iter().zip(ls) {
                let _ = write!(s, "{i},{y}");
                for v in c.iter() {
                    let _ = write!(s, ",{:.16e}", v);
                }
                s.push('\n');
            }
        }
        s
    }

    /// Parses the CSV format written by [`LogisticData::to_csv`].
    pub fn from_csv(text: &str, lambda: f64) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| FrostError::Parse("empty dataset".into()))?;
        let dim = header.split(',').count().checked_sub(2).filter(|&d| d > 0).ok_or_else(
            || FrostError::Parse(format!("bad dataset header: {header:?}")),
        )?;
        let mut features: Vec<Vec<DVector<f64>>> = Vec::new();
        let mut labels: Vec<Vec<f64>> = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 2 {
                return Err(FrostError::Parse(format!("bad dataset row: {line:?}")));
            }
            let agent: usize = fields[0]
                .parse()
                .map_err(|e| FrostError::Parse(format!("bad agent id: {e}")))?;
            let label: f64 = fields[1]
                .parse()
                .map_err(|e| FrostError::Parse(format!("bad label: {e}")))?;
            if label != 1.0 && label != -1.0 {
                return Err(FrostError::Parse(format!("label {label} is not +/-1")));
            }
            let mut c = DVector::zeros(dim);
            for (k, f) in fields[2..].iter().enumerate() {
                c[k] = f.parse().map_err(|e| FrostError::Parse(format!("bad feature: {e}")))?;
            }
            while features.len() <= agent {
                features.push(Vec::new());
                labels.push(Vec::new());
            }
            features[agent].push(c);
            labels[agent].push(label);
        }
        Ok(LogisticData { features, labels, lambda, dim })
    }
}

/// Synthetic logistic data: i.i.d. standard-normal features, fair +/-1
/// labels, deterministic per seed.
pub fn gen_logistic_data(
    n: usize,
    samples_per_agent: usize,
    dim: usize,
    lambda: f64,
    seed: u64,
) -> LogisticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut fs = Vec::with_capacity(samples_per_agent);
        let mut ls = Vec::with_capacity(samples_per_agent);
        for _ in 0..samples_per_agent {
            let c = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
            fs.push(c);
            ls.push(if rng.random_bool(0.5) { 1.0 } else { -1.0 });
        }
        features.push(fs);
        labels.push(ls);
    }
    LogisticData { features, labels, lambda, dim }
}

/// Regularized logistic loss over the decision variable `(w, b)` in
/// `R^{p+1}`:
///
/// `f_i(w, b) = sum_j ln(1 + exp(-(w^T c_ij + b) y_ij)) + (lambda/2)||w||^2`
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    data: LogisticData,
}

impl LogisticObjective {
    pub fn new(data: LogisticData) -> Self {
        LogisticObjective { data }
    }

    pub fn constants(&self) -> SmoothnessConstants {
        // l = lambda + (1/4) max_i sum_j ||(c_ij, 1)||^2; the 1/4 is the
        // sigmoid-curvature bound. mu = lambda is a conservative surrogate
        // because the bias term carries no regularizer.
        let worst = self
            .data
            .features
            .iter()
            .map(|fs| fs.iter().map(|c| c.norm_squared() + 1.0).sum::<f64>())
            .fold(0.0, f64::max);
        SmoothnessConstants { l: self.data.lambda + 0.25 * worst, mu: self.data.lambda }
    }
}

/// Numerically stable `ln(1 + exp(u))`.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Numerically stable logistic sigmoid `1 / (1 + exp(-u))`.
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl Objective for LogisticObjective {
    fn agents(&self) -> usize {
        self.data.agents()
    }

    fn dim(&self) -> usize {
        self.data.dim + 1
    }

    fn value(&self, agent: usize, x: &DVector<f64>) -> f64 {
        let p = self.data.dim;
        let w = x.rows(0, p);
        let b = x[p];
        let mut total = 0.0;
        for (c, &y) in self.data.features[agent].iter().zip(&self.data.labels[agent]) {
            let t = w.dot(&c.rows(0, p)) + b;
            total += softplus(-t * y);
        }
        total + 0.5 * self.data.lambda * w.norm_squared()
    }

    fn gradient(&self, agent: usize, x: &DVector<f64>) -> DVector<f64> {
        let p = self.data.dim;
        let w = x.rows(0, p);
        let b = x[p];
        let mut g = DVector::zeros(p + 1);
        for (c, &y) in self.data.features[agent].iter().zip(&self.data.labels[agent]) {
            let t = w.dot(&c.rows(0, p)) + b;
            // d/dt ln(1+exp(-t y)) = -y * sigmoid(-t y)
            let coeff = -y * sigmoid(-t * y);
            for k in 0..p {
                g[k] += coeff * c[k];
            }
            g[p] += coeff;
        }
        for k in 0..p {
            g[k] += self.data.lambda * w[k];
        }
        g
    }
}

/// Convenience constructor returning the objective plus its constants.
pub fn logistic_objective(data: LogisticData) -> (LogisticObjective, SmoothnessConstants) {
    let obj = LogisticObjective::new(data);
    let constants = obj.constants();
    (obj, constants)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec1(v: f64) -> DVector<f64> {
        DVector::from_vec(vec![v])
    }

    #[test]
    fn quadratic_optimum_is_mean_of_centers() {
        let (obj, consts) =
            quadratic_objective(vec![vec1(0.0), vec1(3.0), vec1(6.0)], vec![1.0; 3]).unwrap();
        assert!((obj.optimum()[0] - 3.0).abs() < 1e-15);
        assert_eq!(consts.l, 1.0);
        assert_eq!(consts.mu, 1.0);
    }

    #[test]
    fn quadratic_single_agent_optimum_is_center() {
        let (obj, _) = quadratic_objective(vec![vec1(2.5)], vec![4.0]).unwrap();
        assert_eq!(obj.optimum()[0], 2.5);
    }

    #[test]
    fn quadratic_rejects_nonpositive_curvature() {
        assert!(matches!(
            quadratic_objective(vec![vec1(0.0)], vec![0.0]),
            Err(FrostError::NonPositiveCurvature(_))
        ));
    }

    #[test]
    fn quadratic_optimum_matches_gradient_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let centers: Vec<DVector<f64>> =
            (0..5).map(|_| DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng))).collect();
        let curvatures: Vec<f64> = (0..5).map(|_| 1.0 + 3.0 * rng.random::<f64>()).collect();
        let (obj, _) = quadratic_objective(centers, curvatures).unwrap();
        let xs = obj.optimum();
        assert!(obj.global_gradient(&xs).norm() < 1e-10);
    }

    #[test]
    fn logistic_data_is_deterministic_per_seed() {
        let a = gen_logistic_data(4, 6, 3, 0.1, 99);
        let b = gen_logistic_data(4, 6, 3, 0.1, 99);
        assert_eq!(a, b);
        let c = gen_logistic_data(4, 6, 3, 0.1, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn logistic_data_counts_and_mean() {
        let data = gen_logistic_data(10, 20, 5, 0.1, 1);
        assert_eq!(data.sample_count(), 200);
        let total: f64 = data
            .features
            .iter()
            .flat_map(|fs| fs.iter())
            .flat_map(|c| c.iter())
            .sum();
        let count = 10.0 * 20.0 * 5.0;
        assert!((total / count).abs() < 4.0 / count.sqrt());
        assert!(data.labels.iter().flatten().all(|&y| y == 1.0 || y == -1.0));
    }

    #[test]
    fn logistic_value_at_origin_is_m_ln2() {
        let data = gen_logistic_data(3, 7, 4, 0.5, 2);
        let (obj, _) = logistic_objective(data);
        let x0 = DVector::zeros(5);
        for i in 0..3 {
            assert!((obj.value(i, &x0) - 7.0 * std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_gradient_saturates_at_large_margin() {
        // lambda = 0, single sample, large positive margin
        let data = LogisticData {
            features: vec![vec![vec1(1.0)]],
            labels: vec![vec![1.0]],
            lambda: 0.0,
            dim: 1,
        };
        let (obj, _) = logistic_objective(data);
        let x = DVector::from_vec(vec![50.0, 0.0]);
        assert!(obj.gradient(0, &x).norm() < 1e-12);
    }

    #[test]
    fn logistic_value_is_finite_at_huge_margins() {
        let data = LogisticData {
            features: vec![vec![vec1(1.0)]],
            labels: vec![vec![-1.0]],
            lambda: 0.0,
            dim: 1,
        };
        let (obj, _) = logistic_objective(data);
        let x = DVector::from_vec(vec![1000.0, 0.0]);
        let v = obj.value(0, &x);
        assert!(v.is_finite());
        assert!((v - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn dataset_csv_round_trip() {
        let data = gen_logistic_data(3, 4, 2, 0.1, 5);
        let text = data.to_csv();
        assert!(text.starts_with("agent,label,f1,f2\n"));
        let back = LogisticData::from_csv(&text, 0.1).unwrap();
        assert_eq!(data.agents(), back.agents());
        assert_eq!(data.labels, back.labels);
        for (a, b) in data.features.iter().flatten().zip(back.features.iter().flatten()) {
            assert!((a - b).amax() < 1e-15);
        }
    }

    #[test]
    fn convexity_spot_check_and_curvature_bracket() {
        let data = gen_logistic_data(4, 10, 3, 0.1, 7);
        let (obj, consts) = logistic_objective(data);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let a = DVector::from_fn(4, |_, _| StandardNormal.sample(&mut rng));
            let b = DVector::from_fn(4, |_, _| StandardNormal.sample(&mut rng));
            let theta: f64 = rng.random();
            let mid = &a * theta + &b * (1.0 - theta);
            assert!(
                obj.global_value(&mid)
                    <= theta * obj.global_value(&a) + (1.0 - theta) * obj.global_value(&b) + 1e-10
            );
            // mu ||a-b||^2 <= (gF(a)-gF(b))^T (a-b) <= l ||a-b||^2
            let diff = &a - &b;
            let inner = (obj.global_gradient(&a) - obj.global_gradient(&b)).dot(&diff);
            let d2 = diff.norm_squared();
            assert!(inner >= consts.mu * d2 - 1e-10);
            assert!(inner <= consts.l * d2 + 1e-10);
        }
    }
}
