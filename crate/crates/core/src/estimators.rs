//! From coincidence counts to g2(0), K, and the Gaussian K(tau) fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hbt::CountRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub value: f64,
    pub std_error: f64,
    /// Set when no triple coincidence was seen; `std_error` is then the
    /// value one triple would have produced.
    pub one_sided: bool,
}

/// `g2 = N_AB1B2 N_A / (N_AB1 N_AB2)`, with a first-order Poisson error
/// `g2 * sqrt(1/N_AB1B2 + 1/N_AB1 + 1/N_AB2 + 1/N_A)`.
pub fn estimate_g2(record: &CountRecord) -> Result<G2Estimate> {
    if record.n_a == 0 || record.n_ab1 == 0 || record.n_ab2 == 0 {
        return Err(Error::UndefinedEstimate(format!(
            "zero in the denominator counts (N_A = {}, N_AB1 = {}, N_AB2 = {})",
            record.n_a, record.n_ab1, record.n_ab2
        )));
    }
    let n_a = record.n_a as f64;
    let n1 = record.n_ab1 as f64;
    let n2 = record.n_ab2 as f64;
    let per_triple = n_a / (n1 * n2);
    if record.n_ab1b2 == 0 {
        return Ok(G2Estimate {
            value: 0.0,
            std_error: per_triple,
            one_sided: true,
        });
    }
    let n3 = record.n_ab1b2 as f64;
    let value = n3 * per_triple;
    let rel = (1.0 / n3 + 1.0 / n1 + 1.0 / n2 + 1.0 / n_a).sqrt();
    Ok(G2Estimate {
        value,
        std_error: value * rel,
        one_sided: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `K = N(0)/N(inf) - 1` from triple counts at zero and far delay. Counts are
/// reals so an averaged far-delay reference can be passed in.
pub fn estimate_k(n_zero: f64, n_far: f64) -> Result<KEstimate> {
    if n_far.is_nan() || n_far <= 0.0 {
        return Err(Error::UndefinedEstimate(format!("far-delay count {n_far} must be positive")));
    }
    if n_zero.is_nan() || n_zero < 0.0 {
        return Err(invalid("n_zero", format!("must be >= 0, got {n_zero}")));
    }
    let ratio = n_zero / n_far;
    Ok(KEstimate {
        value: ratio - 1.0,
        std_error: (n_zero / (n_far * n_far) + n_zero * n_zero / (n_far * n_far * n_far)).sqrt(),
    })
}

/// `K` against the mean of several far-delay counts; the reference term of
/// the error shrinks with the number of far points.
pub fn estimate_k_pooled(n_zero: f64, far: &[f64]) -> Result<KEstimate> {
    if far.is_empty() {
        return Err(Error::InsufficientData("no far-delay reference points".into()));
    }
    let m = far.len() as f64;
    let n_far = far.iter().sum::<f64>() / m;
    let single = estimate_k(n_zero, n_far)?;
    Ok(KEstimate {
        value: single.value,
        std_error: (n_zero / (n_far * n_far) + n_zero * n_zero / (m * n_far * n_far * n_far)).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayPoint {
    pub tau_fs: f64,
    pub k_hat: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CenterMode {
    Free,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub center: CenterMode,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            center: CenterMode::Free,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub k_hat: f64,
    pub tau0_hat: f64,
    pub center_hat: f64,
    /// Order (K, tau0, center); the center row/column is zero when fixed.
    pub covariance: [[f64; 3]; 3],
    /// sqrt of the weighted sum of squared residuals.
    pub residual_norm: f64,
    pub converged: bool,
    /// The width is not identified by the data (flat or runaway tau0).
    pub degenerate: bool,
    pub iterations: usize,
    /// Weighted cost after each accepted step, starting with the initial guess.
    pub cost_history: Vec<f64>,
}

impl GaussianFit {
    pub fn k_std_error(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn tau0_std_error(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn center_std_error(&self) -> f64 {
        self.covariance[2][2].sqrt()
    }

    pub fn k_at(&self, tau_fs: f64) -> f64 {
        gaussian(self.k_hat, self.tau0_hat, self.center_hat, tau_fs)
    }
}

fn gaussian(k: f64, tau0: f64, center: f64, tau: f64) -> f64 {
    let x = (tau - center) / tau0;
    k * (-x * x).exp()
}

/// Data-driven starting point: K from the range, center at the (first)
/// maximum, tau0 from the interpolated full width at half maximum.
fn initial_guess(points: &[DelayPoint]) -> (f64, f64, f64) {
    let mut sorted: Vec<&DelayPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.tau_fs.total_cmp(&b.tau_fs));
    let mut peak = 0;
    for (i, p) in sorted.iter().enumerate() {
        if p.k_hat > sorted[peak].k_hat {
            peak = i;
        }
    }
    let max = sorted[peak].k_hat;
    let min = sorted.iter().map(|p| p.k_hat).fold(f64::INFINITY, f64::min);
    let amplitude = max - min;
    let half = min + amplitude / 2.0;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> f64 {
        let mut prev = peak;
        for i in range {
            if sorted[i].k_hat < half {
                let (a, b) = (sorted[prev], sorted[i]);
                let t = (a.k_hat - half) / (a.k_hat - b.k_hat);
                return a.tau_fs + t * (b.tau_fs - a.tau_fs);
            }
            prev = i;
        }
        sorted[prev].tau_fs
    };
    let left = crossing(&mut (0..peak).rev());
    let right = crossing(&mut ((peak + 1)..sorted.len()));
    let span = sorted[sorted.len() - 1].tau_fs - sorted[0].tau_fs;
    let fwhm = if right - left > 0.0 { right - left } else { span / 4.0 };
    let tau0 = fwhm / (2.0 * std::f64::consts::LN_2.sqrt());
    (amplitude, tau0, sorted[peak].tau_fs)
}

struct Problem<'a> {
    points: &'a [DelayPoint],
    fixed_center: Option<f64>,
}

impl Problem<'_> {
    fn n_params(&self) -> usize {
        if self.fixed_center.is_some() {
            2
        } else {
            3
        }
    }

    fn unpack(&self, p: &DVector<f64>) -> (f64, f64, f64) {
        (p[0], p[1], self.fixed_center.unwrap_or_else(|| p[2]))
    }

    fn cost(&self, p: &DVector<f64>) -> f64 {
        let (k, tau0, c) = self.unpack(p);
        self.points
            .iter()
            .map(|pt| ((pt.k_hat - gaussian(k, tau0, c, pt.tau_fs)) / pt.sigma).powi(2))
            .sum()
    }

    /// Normal matrix `J^T J` and `J^T r` of the weighted residuals, with `J`
    /// the model Jacobian.
    fn normal_equations(&self, p: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let (k, tau0, c) = self.unpack(p);
        let m = self.n_params();
        let mut jtj = DMatrix::zeros(m, m);
        let mut jtr = DVector::zeros(m);
        for pt in self.points {
            let x = (pt.tau_fs - c) / tau0;
            let e = (-x * x).exp();
            let resid = (pt.k_hat - k * e) / pt.sigma;
            let full = [e, k * e * 2.0 * x * x / tau0, k * e * 2.0 * x / tau0];
            let row: Vec<f64> = full[..m].iter().map(|d| d / pt.sigma).collect();
            for i in 0..m {
                jtr[i] += row[i] * resid;
                for j in 0..m {
                    jtj[(i, j)] += row[i] * row[j];
                }
            }
        }
        (jtj, jtr)
    }
}

/// Gauss-Newton decrement `g^T (J^T J)^-1 g`: the predicted cost reduction of
/// a full step, which does not depend on the units of the parameters.
fn stationary(jtj: &DMatrix<f64>, jtr: &DVector<f64>, cost: f64) -> bool {
    match jtj.clone().cholesky() {
        Some(ch) => jtr.dot(&ch.solve(jtr)) < 1e-12 * (1.0 + cost),
        None => false,
    }
}

/// Weighted Levenberg-Marquardt fit of `K exp(-((tau - c)/tau0)^2)`.
pub fn fit_gaussian(points: &[DelayPoint], options: &FitOptions) -> Result<GaussianFit> {
    let fixed_center = match options.center {
        CenterMode::Free => None,
        CenterMode::Fixed(c) => Some(c),
    };
    let required = if fixed_center.is_some() { 2 } else { 4 };
    if points.len() < required.max(2) {
        return Err(Error::InsufficientData(format!(
            "{} points, need at least {required}",
            points.len()
        )));
    }
    for pt in points {
        if !(pt.sigma > 0.0 && pt.sigma.is_finite()) {
            return Err(invalid("sigma", format!("must be finite and > 0, got {}", pt.sigma)));
        }
        if !(pt.tau_fs.is_finite() && pt.k_hat.is_finite()) {
            return Err(invalid("points", "delays and values must be finite"));
        }
    }
    let tau_min = points.iter().map(|p| p.tau_fs).fold(f64::INFINITY, f64::min);
    let tau_max = points.iter().map(|p| p.tau_fs).fold(f64::NEG_INFINITY, f64::max);
    let span = tau_max - tau_min;
    if span <= 0.0 {
        return Err(Error::DegenerateData("all delays are equal".into()));
    }

    let (k0, tau00, c0) = initial_guess(points);
    let start_center = fixed_center.unwrap_or(c0);
    if fixed_center.is_none() && !(tau_min < start_center && start_center < tau_max) {
        return Err(Error::InsufficientData(
            "peak lies at the edge of the scan; the center is not bracketed".into(),
        ));
    }
    let problem = Problem {
        points,
        fixed_center,
    };
    let mut params = DVector::from_vec(vec![k0, tau00, start_center]);
    params = params.rows(0, problem.n_params()).into_owned();

    let flat = k0 <= 1e-12 * points.iter().map(|p| p.k_hat.abs()).fold(1e-300, f64::max);
    let mut cost = problem.cost(&params);
    let mut history = vec![cost];
    let mut iterations = 0;
    let mut converged = false;
    let mut lambda = 1e-3;

    if !flat {
        while iterations < options.max_iterations {
            iterations += 1;
            let (jtj, jtr) = problem.normal_equations(&params);
            if stationary(&jtj, &jtr, cost) {
                converged = true;
                break;
            }
            let mut accepted = false;
            while lambda < 1e20 {
                let mut damped = jtj.clone();
                for i in 0..damped.nrows() {
                    damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
                }
                let Some(step) = damped.cholesky().map(|ch| ch.solve(&jtr)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial = &params + &step;
                let trial_cost = if trial[1] > 0.0 { problem.cost(&trial) } else { f64::INFINITY };
                if trial_cost <= cost {
                    params = trial;
                    cost = trial_cost;
                    history.push(cost);
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
                lambda *= 4.0;
            }
            if !accepted {
                // no descent direction left at machine precision
                let (jtj, jtr) = problem.normal_equations(&params);
                converged = stationary(&jtj, &jtr, cost);
                break;
            }
        }
    }

    let (k_hat, tau0_hat, center_hat) = problem.unpack(&params);
    let degenerate = flat || tau0_hat > 1e3 * span;
    let mut covariance = [[0.0; 3]; 3];
    if !flat {
        let (jtj, _) = problem.normal_equations(&params);
        if let Some(inv) = jtj.try_inverse() {
            for i in 0..inv.nrows() {
                for j in 0..inv.ncols() {
                    covariance[i][j] = inv[(i, j)];
                }
            }
        } else {
            covariance = [[f64::INFINITY; 3]; 3];
        }
    }
    Ok(GaussianFit {
        k_hat,
        tau0_hat,
        center_hat,
        covariance,
        residual_norm: cost.sqrt(),
        converged: converged && !degenerate,
        degenerate,
        iterations,
        cost_history: history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEstimate {
    pub x: f64,
    pub std_error: f64,
}

/// Where a noisy curve `(x, y, sigma)` crosses `level`: weighted quadratic
/// (straight line for two points) in `x - mean(x)`, root nearest the middle of
/// the data, delta-method error.
pub fn crossing_point(points: &[(f64, f64, f64)], level: f64) -> Result<CrossingEstimate> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("need at least two points".into()));
    }
    for &(x, y, sigma) in points {
        if !(sigma > 0.0 && sigma.is_finite() && x.is_finite() && y.is_finite()) {
            return Err(invalid("points", format!("need finite values and sigma > 0, got ({x}, {y}, {sigma})")));
        }
    }
    let m = if points.len() >= 3 { 3 } else { 2 };
    let center = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let mut normal = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for &(x, y, sigma) in points {
        let u = x - center;
        let basis = [1.0, u, u * u];
        let w = 1.0 / (sigma * sigma);
        for i in 0..m {
            rhs[i] += w * basis[i] * (y - level);
            for j in 0..m {
                normal[(i, j)] += w * basis[i] * basis[j];
            }
        }
    }
    let cov = normal
        .try_inverse()
        .ok_or_else(|| Error::DegenerateData("abscissae do not support the fit".into()))?;
    let b = &cov * rhs;
    let (c0, c1, c2) = (b[0], b[1], if m == 3 { b[2] } else { 0.0 });
    let u = if c2 == 0.0 {
        if c1 == 0.0 {
            return Err(Error::DegenerateData("flat curve has no crossing".into()));
        }
        -c0 / c1
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc < 0.0 {
            return Err(Error::DegenerateData("fitted curve never reaches the level".into()));
        }
        // numerically stable pair of roots
        let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
        let roots = [q / c2, if q != 0.0 { c0 / q } else { f64::INFINITY }];
        if roots[0].abs() <= roots[1].abs() {
            roots[0]
        } else {
            roots[1]
        }
    };
    let slope = c1 + 2.0 * c2 * u;
    let grad = DVector::from_vec([1.0, u, u * u][..m].to_vec());
    let var = (grad.transpose() * &cov * &grad)[(0, 0)] / (slope * slope);
    Ok(CrossingEstimate {
        x: center + u,
        std_error: var.max(0.0).sqrt(),
    })
}
