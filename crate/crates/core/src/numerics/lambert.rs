//! Principal branch of the Lambert W function and the optimal-rate map built on it.

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_HALLEY_STEPS: usize = 64;

/// `W0(x)`: the solution `w >= -1` of `w * exp(w) = x`, for `x >= -1/e`.
///
/// Halley iteration from a series guess near the branch point, `ln(1 + x)`
/// in the middle range and the two-term asymptotic expansion for large `x`.
pub fn lambert_w0<T: Real>(x: T) -> Result<T> {
    let inv_e = T::one() / T::E();
    let branch_slack = T::lit(1e-15).max(T::epsilon() * T::lit(4.0));
    if x.is_nan() || x < -inv_e - branch_slack {
        return Err(Error::LambertDomain(x.as_f64()));
    }
    if x <= -inv_e {
        return Ok(-T::one());
    }
    if x == T::zero() {
        return Ok(T::zero());
    }
    if x.is_infinite() {
        return Ok(x);
    }

    let one = T::one();
    let two = T::lit(2.0);
    let mut w = if x < T::lit(-0.25) {
        let p = (two * (T::E() * x + one)).max(T::zero()).sqrt();
        -one + p - p * p / T::lit(3.0) + T::lit(11.0 / 72.0) * p * p * p
    } else if x < T::lit(3.0) {
        x.ln_1p() * (one - x.ln_1p() / (two + x.ln_1p()))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };

    let tol = T::epsilon() * T::lit(4.0);
    for _ in 0..MAX_HALLEY_STEPS {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + one;
        if wp1 <= T::zero() {
            break;
        }
        let denom = ew * wp1 - (w + two) * f / (two * wp1);
        let step = f / denom;
        let next = (w - step).max(-one);
        let done = (next - w).abs() <= tol * (one + next.abs());
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

/// Solves `(u - 1) e^u + 1 = q` for `u >= 0`, i.e. `u = W0((q - 1)/e) + 1`,
/// without the cancellation that forming `(q - 1)/e` causes for small `q`.
pub(crate) fn shifted_w0<T: Real>(q: T) -> T {
    let zero = T::zero();
    if !(q > zero) {
        return zero;
    }
    if q.is_infinite() {
        return q;
    }
    let one = T::one();
    let two = T::lit(2.0);
    let mut u = if q < one {
        // h(u) ~ u^2/2 + u^3/3 near the origin.
        let s = (two * q).sqrt();
        s - s * s / T::lit(6.0)
    } else {
        lambert_w0((q - one) / T::E()).map(|w| w + one).unwrap_or(one)
    };
    let tol = T::epsilon() * T::lit(4.0);
    for _ in 0..MAX_HALLEY_STEPS {
        let eu = u.exp();
        let h = shifted_residual(u) - q;
        let d1 = u * eu;
        let d2 = (u + one) * eu;
        if d1 <= zero {
            u = (two * q).sqrt();
            continue;
        }
        let step = h / (d1 - h * d2 / (two * d1));
        let next = (u - step).max(zero);
        let done = (next - u).abs() <= tol * next.max(T::min_positive_value());
        u = next;
        if done {
            break;
        }
    }
    u
}

/// `(u - 1) e^u + 1`, summed as a series for small `u`.
fn shifted_residual<T: Real>(u: T) -> T {
    if u < T::lit(0.1) {
        // sum_{n>=2} (n - 1) u^n / n!
        let mut term = u * u / T::lit(2.0);
        let mut acc = term;
        let mut n = 2.0;
        while n < 30.0 {
            let next = term * u / T::lit(n + 1.0) * T::lit(n / (n - 1.0));
            term = next;
            acc = acc + term;
            if term.abs() <= acc.abs() * T::epsilon() {
                break;
            }
            n += 1.0;
        }
        acc
    } else {
        (u - T::one()) * u.exp() + T::one()
    }
}

/// Optimal transmission rate for a link whose marginal energy price is `y`:
/// `(B / ln 2) (W0(y/e - 1/e) + 1)`. It solves `f(x) - x f'(x) = -y` with
/// `f(x) = 2^(x/B) - 1`; zero at `y = 0` and strictly increasing.
pub fn tilde_f<T: Real>(y: T, bandwidth: T) -> T {
    bandwidth / T::LN_2() * shifted_w0(y)
}
