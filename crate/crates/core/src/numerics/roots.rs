use super::Tolerances;
use crate::error::{Error, Result};

/// Brent's method: inverse quadratic interpolation and secant steps,
/// falling back to bisection whenever the interpolated step would leave the
/// bracket or converge too slowly.
///
/// Returns `x` with `|g(x)| <= tol.abs` or a final bracket no wider than
/// `tol.rel * |x| + tol.abs`.
pub fn find_root_bracketed<G>(g: G, a: f64, b: f64, tol: &Tolerances) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    tol.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("root bracket endpoints must be finite"));
    }

    let (mut a, mut b) = (a, b);
    let mut fa = g(a);
    let mut fb = g(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::domain("NaN at root bracket endpoint"));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket { a, b, fa, fb });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..tol.max_steps {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }

        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * (tol.rel * b.abs() + tol.abs);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= tol.abs {
            return Ok(b);
        }

        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }

        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = g(b);
        if fb.is_nan() {
            return Err(Error::domain(format!("NaN in root function at x = {b}")));
        }
    }
    Err(Error::Budget(tol.max_steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn sqrt_two() {
        let x = find_root_bracketed(|x| x * x - 2.0, 1.0, 2.0, &tol()).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn sinc_zero_is_pi() {
        let x = find_root_bracketed(|x: f64| x.sin() / x, 2.0, 4.0, &tol()).unwrap();
        assert!((x - PI).abs() < 1e-10);
    }

    #[test]
    fn constant_density_polytrope_radius() {
        let x = find_root_bracketed(|x| 1.0 - x * x / 6.0, 2.0, 3.0, &tol()).unwrap();
        assert!((x - 6f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn reversed_bracket_is_fine() {
        let x = find_root_bracketed(|x| x * x - 2.0, 2.0, 1.0, &tol()).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn missing_sign_change_is_rejected() {
        let err = find_root_bracketed(|x| x * x + 1.0, -1.0, 1.0, &tol()).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
    }

    #[test]
    fn exact_endpoint_root() {
        assert_eq!(
            find_root_bracketed(|x| x - 1.0, 1.0, 3.0, &tol()).unwrap(),
            1.0
        );
    }

    #[test]
    fn step_function_converges_by_bisection() {
        let x =
            find_root_bracketed(|x| if x < 0.3 { -1.0 } else { 1.0 }, 0.0, 1.0, &tol()).unwrap();
        assert!((x - 0.3).abs() < 1e-9);
    }
}
