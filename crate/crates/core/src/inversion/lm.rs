//! Levenberg–Marquardt least squares with central-difference Jacobians,
//! Marquardt diagonal scaling and box bounds enforced by projection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Half-width of the 95 % interval in units of σ.
pub const CI95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative step size stopping threshold.
    pub xtol: f64,
    /// Stopping threshold on the scaled gradient (cosine between the residual
    /// and each Jacobian column).
    pub gtol: f64,
    /// Relative cost reduction below which an accepted step ends the fit.
    pub ftol: f64,
    pub initial_lambda: f64,
    /// Typical magnitude of each parameter, used for difference steps. Falls
    /// back to |init| (or 1 for a zero start).
    pub typical: Option<Vec<f64>>,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            xtol: 1e-10,
            gtol: 1e-12,
            ftol: 1e-15,
            initial_lambda: 1e-3,
            typical: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    fn clamp(&self, p: &mut [f64]) {
        for (j, v) in p.iter_mut().enumerate() {
            *v = v.clamp(self.lower[j], self.upper[j]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// s²·(JᵀJ)⁻¹ with s² = RSS/(n − p).
    pub covariance: DMatrix<f64>,
    /// ‖r‖₂ at the returned parameters.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// JᵀJ was rank deficient; the covariance used a pseudo-inverse.
    pub singular: bool,
    pub n_data: usize,
}

impl FitResult {
    pub fn sigma(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|j| self.covariance[(j, j)].max(0.0).sqrt())
            .collect()
    }

    /// 95 % confidence half-widths.
    pub fn ci95(&self) -> Vec<f64> {
        self.sigma().into_iter().map(|s| CI95 * s).collect()
    }

    pub fn rss(&self) -> f64 {
        self.residual_norm * self.residual_norm
    }
}

fn eval<F>(f: &F, p: &[f64], n: usize) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let r = f(p);
    if r.len() != n {
        return Err(Error::invalid("residuals", "residual length changed between evaluations"));
    }
    Ok(DVector::from_vec(r))
}

fn jacobian<F>(f: &F, p: &[f64], typical: &[f64], bounds: &Bounds, n: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let step_rel = f64::EPSILON.cbrt();
    let mut jac = DMatrix::zeros(n, p.len());
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = step_rel * p[j].abs().max(typical[j]);
        let hi = (p[j] + h).min(bounds.upper[j]);
        let lo = (p[j] - h).max(bounds.lower[j]);
        if hi <= lo {
            continue;
        }
        q[j] = hi;
        let rp = eval(f, &q, n)?;
        q[j] = lo;
        let rm = eval(f, &q, n)?;
        q[j] = p[j];
        jac.set_column(j, &((rp - rm) / (hi - lo)));
    }
    Ok(jac)
}

fn covariance(jac: &DMatrix<f64>, rss: f64, n: usize) -> (DMatrix<f64>, bool) {
    let p = jac.ncols();
    let jtj = jac.transpose() * jac;
    let s2 = if n > p { rss / (n - p) as f64 } else { 0.0 };
    let svd = jtj.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-12 * smax.max(f64::MIN_POSITIVE);
    let singular = svd.singular_values.iter().any(|&s| s <= tol);
    let inv = match (!singular).then(|| jtj.clone().cholesky()).flatten() {
        Some(ch) => ch.inverse(),
        None => svd.pseudo_inverse(tol).unwrap_or_else(|_| DMatrix::zeros(p, p)),
    };
    let mut cov = inv * s2;
    // enforce exact symmetry
    cov = (&cov + cov.transpose()) * 0.5;
    (cov, singular)
}

/// Minimizes ‖r(p)‖² over the box `bounds`.
pub fn least_squares_residuals<F>(
    residuals: F,
    init: &[f64],
    bounds: Option<&Bounds>,
    options: &LmOptions,
) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let np = init.len();
    if np == 0 {
        return Err(Error::invalid("init", "no parameters"));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("init", "initial parameters must be finite"));
    }
    let bounds = bounds.cloned().unwrap_or_else(|| Bounds::unbounded(np));
    if bounds.lower.len() != np || bounds.upper.len() != np {
        return Err(Error::invalid("bounds", "length must match the parameter count"));
    }
    let typical: Vec<f64> = match &options.typical {
        Some(t) if t.len() == np => t.iter().map(|v| v.abs()).collect(),
        _ => init.iter().map(|v| if *v != 0.0 { v.abs() } else { 1.0 }).collect(),
    };
    let mut p = init.to_vec();
    bounds.clamp(&mut p);
    let r0 = residuals(&p);
    let n = r0.len();
    if n < np {
        return Err(Error::Underdetermined(format!(
            "{n} residuals for {np} parameters"
        )));
    }
    let mut r = DVector::from_vec(r0);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("init", "residuals are not finite at the initial point"));
    }
    let mut cost = r.norm_squared();
    let mut lambda = options.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jac = jacobian(&residuals, &p, &typical, &bounds, n)?;
        let g = jac.transpose() * &r;
        let rnorm = cost.sqrt();
        let gscaled = (0..np)
            .map(|j| {
                let cn = jac.column(j).norm();
                if cn > 0.0 {
                    g[j].abs() / (cn * rnorm)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        if gscaled <= options.gtol {
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let dmax = jtj.diagonal().max();
        let diag: Vec<f64> = (0..np).map(|j| jtj[(j, j)].max(1e-12 * dmax).max(f64::MIN_POSITIVE)).collect();

        let mut accepted = false;
        while lambda <= 1e20 {
            let mut a = jtj.clone();
            for j in 0..np {
                a[(j, j)] += lambda * diag[j];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            bounds.clamp(&mut trial);
            let rt = DVector::from_vec(residuals(&trial));
            let ct = rt.norm_squared();
            if ct.is_finite() && ct < cost {
                let dx: f64 = trial.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let xn: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                let reduction = (cost - ct) / cost;
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                if dx <= options.xtol * (xn + options.xtol) || reduction <= options.ftol {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left at working precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    let jac = jacobian(&residuals, &p, &typical, &bounds, n)?;
    let (cov, singular) = covariance(&jac, cost, n);
    Ok(FitResult {
        params: p,
        covariance: cov,
        residual_norm: cost.sqrt(),
        converged,
        iterations,
        singular,
        n_data: n,
    })
}

/// Fits y ≈ model(x, p) by least squares.
pub fn least_squares<M>(
    model: M,
    x: &[f64],
    y: &[f64],
    init: &[f64],
    bounds: Option<&Bounds>,
    options: &LmOptions,
) -> Result<FitResult>
where
    M: Fn(f64, &[f64]) -> f64,
{
    if x.len() != y.len() {
        return Err(Error::invalid("data", "x and y lengths differ"));
    }
    if x.len() < init.len() {
        return Err(Error::Underdetermined(format!(
            "{} points for {} parameters",
            x.len(),
            init.len()
        )));
    }
    least_squares_residuals(
        |p| x.iter().zip(y).map(|(xi, yi)| model(*xi, p) - yi).collect(),
        init,
        bounds,
        options,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lorentz(x: f64, p: &[f64]) -> f64 {
        let u = 2.0 * (x - p[1]) / p[2];
        p[0] - p[3] / (1.0 + u * u)
    }

    #[test]
    fn linear_exact() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v).collect();
        let fit = least_squares(|x, p| p[0] * x, &x, &y, &[1.0], None, &LmOptions::default()).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.params[0], 2.5, max_relative = 1e-10);
    }

    #[test]
    fn lorentzian_exact() {
        let truth = [1.0, 2.0, 0.3, 0.12];
        let x: Vec<f64> = (0..400).map(|i| 1.0 + 2.0 * i as f64 / 399.0).collect();
        let y: Vec<f64> = x.iter().map(|v| lorentz(*v, &truth)).collect();
        let fit = least_squares(lorentz, &x, &y, &[0.98, 2.03, 0.25, 0.1], None, &LmOptions::default()).unwrap();
        assert!(fit.converged);
        for (a, b) in fit.params.iter().zip(truth) {
            assert_relative_eq!(*a, b, max_relative = 1e-8);
        }
    }

    #[test]
    fn matches_grid_search() {
        // nonlinear two-parameter model against a brute-force grid minimum
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.3 * (-0.7 * v).exp() + 0.05 * (7.0 * v).sin()).collect();
        let model = |x: f64, p: &[f64]| p[0] * (-p[1] * x).exp();
        let fit = least_squares(model, &x, &y, &[1.0, 1.0], None, &LmOptions::default()).unwrap();
        let cost = |a: f64, b: f64| -> f64 { x.iter().zip(&y).map(|(xi, yi)| (model(*xi, &[a, b]) - yi).powi(2)).sum() };
        let step = 1e-3;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=1000 {
            for j in 0..=1000 {
                let (a, b) = (0.8 + i as f64 * step, 0.2 + j as f64 * step);
                let c = cost(a, b);
                if c < best.0 {
                    best = (c, a, b);
                }
            }
        }
        assert!((fit.params[0] - best.1).abs() <= step);
        assert!((fit.params[1] - best.2).abs() <= step);
    }

    #[test]
    fn bounds_are_respected() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, -1.0, -2.0];
        let b = Bounds {
            lower: vec![0.0],
            upper: vec![10.0],
        };
        let fit = least_squares(|x, p| p[0] * x, &x, &y, &[1.0], Some(&b), &LmOptions::default()).unwrap();
        assert_eq!(fit.params[0], 0.0);
    }

    #[test]
    fn underdetermined_rejected() {
        let r = least_squares(|x, p| p[0] * x + p[1], &[1.0], &[1.0], &[0.0, 0.0], None, &LmOptions::default());
        assert!(matches!(r, Err(Error::Underdetermined(_))));
    }

    #[test]
    fn singular_normal_matrix_flagged() {
        // p0 and p1 enter only through their sum
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.1];
        let fit = least_squares(|x, p| (p[0] + p[1]) * x + 1.0, &x, &y, &[0.5, 0.5], None, &LmOptions::default()).unwrap();
        assert!(fit.singular);
        assert!(fit.covariance.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 0.5 * v * v - v + 0.01 * ((i * 7919 % 13) as f64 - 6.0)).collect();
        let fit = least_squares(|x, p| p[0] * x * x + p[1] * x + p[2], &x, &y, &[0.0, 0.0, 0.0], None, &LmOptions::default()).unwrap();
        let c = &fit.covariance;
        assert_eq!(c, &c.transpose());
        assert!(c.clone().symmetric_eigen().eigenvalues.iter().all(|e| *e >= -1e-18));
    }

    #[test]
    fn local_minimum_certificate() {
        let truth = [1.0, 2.0, 0.3, 0.12];
        let x: Vec<f64> = (0..200).map(|i| 1.0 + 2.0 * i as f64 / 199.0).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| lorentz(*v, &truth) + 0.002 * (((i * 2654435761) % 1000) as f64 / 500.0 - 1.0))
            .collect();
        let fit = least_squares(lorentz, &x, &y, &[1.0, 2.0, 0.3, 0.1], None, &LmOptions::default()).unwrap();
        let rn = |p: &[f64]| -> f64 { x.iter().zip(&y).map(|(xi, yi)| (lorentz(*xi, p) - yi).powi(2)).sum::<f64>().sqrt() };
        let s = fit.sigma();
        for j in 0..4 {
            for sign in [-1.0, 1.0] {
                let mut q = fit.params.clone();
                q[j] += sign * 5.0 * s[j];
                assert!(rn(&q) > fit.residual_norm);
            }
        }
    }
}
