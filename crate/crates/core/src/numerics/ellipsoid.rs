//! Central/deep-cut ellipsoid method for maximizing a concave function over a
//! convex domain that is only known through a separation oracle.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `{ y : (y - center)^T P^{-1} (y - center) <= 1 }`.
#[derive(Debug, Clone)]
pub struct Ellipsoid<T> {
    pub center: Vec<T>,
    /// Shape matrix, row-major `n x n`.
    pub shape: Vec<T>,
    n: usize,
}

impl<T: Real> Ellipsoid<T> {
    /// Ball of the given radius.
    pub fn ball(center: Vec<T>, radius: T) -> Self {
        let n = center.len();
        let mut shape = vec![T::zero(); n * n];
        for i in 0..n {
            shape[i * n + i] = radius * radius;
        }
        Self { center, shape, n }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn p_times(&self, v: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.shape[i * n + j] * v[j]).sum())
            .collect()
    }

    /// `sqrt(a^T P a)`: the largest change of `a^T y` over the ellipsoid.
    pub fn width(&self, a: &[T]) -> T {
        let pa = self.p_times(a);
        a.iter().zip(&pa).map(|(&x, &y)| x * y).sum::<T>().max(T::zero()).sqrt()
    }

    /// Replaces the ellipsoid by the minimum-volume one containing
    /// `{ y in E : a^T (y - center) <= -depth }`, `depth >= 0`.
    pub fn cut(&mut self, a: &[T], depth: T) -> Result<()> {
        let n = self.n;
        let nf = T::lit(n as f64);
        let one = T::one();
        let pa = self.p_times(a);
        let apa: T = a.iter().zip(&pa).map(|(&x, &y)| x * y).sum();
        if !(apa > T::zero()) || !apa.is_finite() {
            return Err(Error::Breakdown(format!("ellipsoid shape lost definiteness (a^T P a = {apa})")));
        }
        let w = apa.sqrt();
        let alpha = (depth.max(T::zero()) / w).min(T::lit(0.5));
        let g: Vec<T> = pa.iter().map(|&v| v / w).collect();
        let step = (one + nf * alpha) / (nf + one);
        for i in 0..n {
            self.center[i] = self.center[i] - step * g[i];
        }
        if n == 1 {
            // Exact interval update.
            let half = (one - alpha) / T::lit(2.0);
            self.shape[0] = self.shape[0] * half * half;
            return Ok(());
        }
        let scale = nf * nf / (nf * nf - one) * (one - alpha * alpha);
        let shrink = T::lit(2.0) * (one + nf * alpha) / ((nf + one) * (one + alpha));
        for i in 0..n {
            for j in 0..n {
                let v = self.shape[i * n + j] - shrink * g[i] * g[j];
                self.shape[i * n + j] = scale * v;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let m = (self.shape[i * n + j] + self.shape[j * n + i]) / T::lit(2.0);
                self.shape[i * n + j] = m;
                self.shape[j * n + i] = m;
            }
        }
        Ok(())
    }
}

/// Answer of the oracle at a query point.
#[derive(Debug, Clone)]
pub enum OracleAnswer<T> {
    /// The point is outside the domain; the domain lies in
    /// `{ y : normal^T (y - z) <= -depth }`.
    Cut { normal: Vec<T>, depth: T },
    /// The point is in the domain with objective `value` and a supergradient.
    Value { value: T, supergradient: Vec<T> },
}

#[derive(Debug, Clone)]
pub struct EllipsoidOptions<T> {
    pub center: Vec<T>,
    pub radius: T,
    /// Stop once the certified optimality gap is at most `eps`.
    pub eps: T,
    pub max_iter: usize,
}

impl<T: Real> EllipsoidOptions<T> {
    /// Center `0.1 * 1`, radius `sqrt(100 n)`, `eps = 1e-6`, `200 n^2` iterations.
    pub fn for_dim(n: usize) -> Self {
        Self {
            center: vec![T::lit(0.1); n],
            radius: T::lit((100.0 * n as f64).sqrt()),
            eps: T::lit(1e-6),
            max_iter: 200 * n * n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipsoidOutcome<T> {
    pub best_point: Vec<T>,
    pub best_value: T,
    /// Certified upper bound on the maximum (`+inf` until an objective cut was made).
    pub upper_bound: T,
    /// Best value after each objective evaluation; non-decreasing.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes a concave function given by `oracle`, starting from the ball in
/// `opts`. The ball must contain a maximizer for the bound to be certified.
pub fn ellipsoid_maximize<T, F>(oracle: F, opts: &EllipsoidOptions<T>) -> Result<EllipsoidOutcome<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<OracleAnswer<T>>,
{
    ellipsoid_maximize_until(oracle, opts, |_| false)
}

/// Like [`ellipsoid_maximize`], but also stops as soon as `stop(best_value)`
/// returns true; callers use it to stop on an external certificate such as
/// a primal bound.
pub fn ellipsoid_maximize_until<T, F, S>(mut oracle: F, opts: &EllipsoidOptions<T>, mut stop: S) -> Result<EllipsoidOutcome<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<OracleAnswer<T>>,
    S: FnMut(T) -> bool,
{
    let mut ell = Ellipsoid::ball(opts.center.clone(), opts.radius);
    let mut best_point: Option<Vec<T>> = None;
    let mut best_value = T::neg_infinity();
    let mut upper = T::infinity();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let z = ell.center.clone();
        match oracle(&z)? {
            OracleAnswer::Cut { normal, depth } => {
                ell.cut(&normal, depth)?;
            }
            OracleAnswer::Value { value, supergradient } => {
                if value > best_value {
                    best_value = value;
                    best_point = Some(z);
                }
                trace.push(best_value);
                let width = ell.width(&supergradient);
                upper = upper.min(value + width);
                if width <= opts.eps || upper - best_value <= opts.eps || stop(best_value) {
                    converged = true;
                    break;
                }
                let neg: Vec<T> = supergradient.iter().map(|&s| -s).collect();
                ell.cut(&neg, best_value - value)?;
            }
        }
    }

    let best_point = best_point.ok_or_else(|| {
        Error::Breakdown(format!("no feasible query point in {iterations} ellipsoid iterations"))
    })?;
    Ok(EllipsoidOutcome { best_point, best_value, upper_bound: upper, trace, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn quad(target: Vec<f64>) -> impl FnMut(&[f64]) -> Result<OracleAnswer<f64>> {
        move |z: &[f64]| {
            let value = -z.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let supergradient = z.iter().zip(&target).map(|(a, b)| -2.0 * (a - b)).collect();
            Ok(OracleAnswer::Value { value, supergradient })
        }
    }

    #[test]
    fn maximizes_negative_norm() {
        let mut opts = EllipsoidOptions::for_dim(3);
        opts.radius = 10.0;
        opts.eps = 1e-10;
        let out = ellipsoid_maximize(quad(vec![0.0; 3]), &opts).unwrap();
        assert!(out.best_value >= -1e-8);
        assert!(out.converged);
    }

    #[test]
    fn finds_shifted_optimum() {
        let mut opts = EllipsoidOptions::for_dim(2);
        opts.eps = 1e-12;
        let out = ellipsoid_maximize(quad(vec![1.0, -2.0]), &opts).unwrap();
        assert!((out.best_point[0] - 1.0).abs() < 1e-4);
        assert!((out.best_point[1] + 2.0).abs() < 1e-4);
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn respects_domain_cuts() {
        // maximize -(z - 3)^2 subject to z <= 1.
        let oracle = |z: &[f64]| {
            if z[0] > 1.0 {
                Ok(OracleAnswer::Cut { normal: vec![1.0], depth: z[0] - 1.0 })
            } else {
                Ok(OracleAnswer::Value { value: -(z[0] - 3.0).powi(2), supergradient: vec![-2.0 * (z[0] - 3.0)] })
            }
        };
        let mut opts = EllipsoidOptions::for_dim(1);
        opts.eps = 1e-9;
        opts.max_iter = 10_000;
        let out = ellipsoid_maximize(oracle, &opts).unwrap();
        assert!((out.best_point[0] - 1.0).abs() < 1e-6, "{:?}", out.best_point);
    }

    #[test]
    fn volume_shrinks_every_cut() {
        let n = 4;
        let mut ell = Ellipsoid::ball(vec![0.0; n], 3.0);
        let mut oracle = quad(vec![0.5, -0.25, 1.0, 0.0]);
        let mut last = f64::INFINITY;
        for it in 0..120 {
            let m = DMatrix::from_row_slice(n, n, &ell.shape);
            let det = m.determinant();
            assert!(det < last, "iteration {it}");
            assert!(m.clone().cholesky().is_some(), "iteration {it}");
            let asym = (&m - m.transpose()).amax();
            assert!(asym <= 1e-12 * m.amax());
            last = det;
            let OracleAnswer::Value { supergradient, .. } = oracle(&ell.center).unwrap() else { unreachable!() };
            let neg: Vec<f64> = supergradient.iter().map(|s| -s).collect();
            let depth = if it % 3 == 0 { 0.0 } else { 0.2 * ell.width(&neg) };
            ell.cut(&neg, depth).unwrap();
        }
    }
}
