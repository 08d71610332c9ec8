//! Principal branch of the Lambert W function on `[0, ∞)`.

const MAX_ITER: usize = 60;
const REL_TOL: f64 = 1e-14;

/// `W₀(t)` for `t ≥ 0`: the solution `w ≥ 0` of `w·eʷ = t`.
///
/// Halley iteration seeded with `log(1 + t)` below `e` and
/// `log t − log log t` above. Returns NaN for negative or NaN input.
pub fn lambert_w0(t: f64) -> f64 {
    if t.is_nan() || t < 0.0 {
        return f64::NAN;
    }
    if t == 0.0 {
        return 0.0;
    }
    if t.is_infinite() {
        return f64::INFINITY;
    }
    let mut w = if t <= std::f64::consts::E {
        t.ln_1p()
    } else {
        let l = t.ln();
        l - l.ln()
    };
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - t;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= REL_TOL * w.abs() {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(lambert_w0(0.0), 0.0);
        assert!((lambert_w0(std::f64::consts::E) - 1.0).abs() < 1e-15);
        // Omega constant: W(1).
        assert!((lambert_w0(1.0) - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert!(lambert_w0(-1.0).is_nan());
        assert_eq!(lambert_w0(f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn defining_identity_over_many_decades() {
        let mut t = 1e-300;
        while t < 1e300 {
            let w = lambert_w0(t);
            // Compare in log space: log w + w = log t.
            let lhs = w.ln() + w;
            assert!(
                (lhs - t.ln()).abs() <= 1e-13 * t.ln().abs().max(1.0),
                "t={t:e}, w={w:e}"
            );
            t *= 37.0;
        }
    }
}
