use std::f64::consts::E;

use crate::error::{Error, Result};

/// Branch point of the principal Lambert W branch.
pub const BRANCH_POINT: f64 = -1.0 / E;

/// Principal branch `W₀(x)`, the solution `w ≥ -1` of `w·eʷ = x`.
///
/// Arguments within `1e-12` below `-1/e` are treated as the branch point.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < BRANCH_POINT - 1e-12 {
        return Err(Error::LambertDomain(x));
    }
    if x <= BRANCH_POINT {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }

    let mut w = if x < -0.25 {
        // Series about the branch point in p = sqrt(2(ex + 1)).
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        (1.0 + x).ln()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };

    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        // Halley step.
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let delta = f / denom;
        let next = (w - delta).max(-1.0);
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs());
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn special_values() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert_eq!(lambert_w0(-1.0 / E).unwrap(), -1.0);
        // W(1) is the omega constant; checked through its defining equation.
        let w = lambert_w0(1.0).unwrap();
        assert!((w - 0.567_143_290_4).abs() < 1e-10);
        assert!((w * w.exp() - 1.0).abs() < 1e-14);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn defining_equation_on_dense_grid() {
        let mut prev = -1.0;
        for i in 1..20_000 {
            let x = BRANCH_POINT + (i as f64 / 20_000.0).powi(3) * 50.0;
            let w = lambert_w0(x).unwrap();
            assert!((w * w.exp() - x).abs() <= 1e-12 * (1.0 + x.abs()), "x={x} w={w}");
            assert!(w >= prev);
            prev = w;
        }
    }

    #[test]
    fn rejects_below_branch_point() {
        assert!(lambert_w0(-0.4).is_err());
        assert_eq!(lambert_w0(BRANCH_POINT - 1e-13).unwrap(), -1.0);
    }
}
