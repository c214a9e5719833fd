use super::Tolerances;
use crate::error::{Error, Result};

/// Panels a single interval is pre-split into before adaptation starts.
const INITIAL_PANELS: usize = 8;

/// Deepest bisection level; panels narrower than this are accepted as-is.
const MAX_DEPTH: u32 = 60;

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
}

struct Counter<'f, F> {
    f: &'f F,
    evals: usize,
    budget: usize,
}

impl<F: Fn(f64) -> f64> Counter<'_, F> {
    fn eval(&mut self, x: f64) -> Result<f64> {
        self.evals += 1;
        if self.evals > self.budget {
            return Err(Error::Budget(self.budget));
        }
        let v = (self.f)(x);
        if v.is_nan() {
            return Err(Error::domain(format!("NaN integrand at x = {x}")));
        }
        Ok(v)
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson with Richardson extrapolation over pre-split panels.
///
/// The global error target is `max(abs, rel * ∫|h|)`, with `∫|h|` taken from
/// the initial Simpson pass; each panel receives a share proportional to its
/// width and halves it on every bisection.
fn adaptive<F>(h: &F, cuts: &[f64], tol: &Tolerances) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    tol.validate()?;
    let mut counter = Counter {
        f: h,
        evals: 0,
        budget: tol.max_steps,
    };

    let total = cuts[cuts.len() - 1] - cuts[0];
    let mut panels = Vec::with_capacity(cuts.len());
    let mut magnitude = 0.0;
    let mut fa = counter.eval(cuts[0])?;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let fm = counter.eval(0.5 * (a + b))?;
        let fb = counter.eval(b)?;
        magnitude += simpson(a, b, fa.abs(), fm.abs(), fb.abs());
        panels.push(Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole: simpson(a, b, fa, fm, fb),
            eps: (b - a) / total,
            depth: 0,
        });
        fa = fb;
    }

    let eps_total = tol.abs.max(tol.rel * magnitude);
    for p in &mut panels {
        p.eps *= eps_total;
    }

    let mut sum = 0.0;
    let mut carry = 0.0;
    let mut add = |x: f64| {
        // Neumaier summation
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    };

    while let Some(p) = panels.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = counter.eval(lm)?;
        let frm = counter.eval(rm)?;
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let delta = left + right - p.whole;

        let unresolvable = p.depth >= MAX_DEPTH || lm <= p.a || rm >= p.b;
        if delta.abs() <= 15.0 * p.eps || unresolvable {
            add(left + right + delta / 15.0);
        } else {
            panels.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: left,
                eps: 0.5 * p.eps,
                depth: p.depth + 1,
            });
            panels.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                eps: 0.5 * p.eps,
                depth: p.depth + 1,
            });
        }
    }
    Ok(sum + carry)
}

/// `∫_a^b h(x) dx` by adaptive Simpson quadrature.
pub fn integrate_adaptive<F>(h: F, a: f64, b: f64, tol: &Tolerances) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration limits must be finite"));
    }
    if a > b {
        return Err(Error::domain(format!(
            "integration limits reversed: {a} > {b}"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let cuts: Vec<f64> = (0..=INITIAL_PANELS)
        .map(|i| {
            if i == INITIAL_PANELS {
                b
            } else {
                a + (b - a) * i as f64 / INITIAL_PANELS as f64
            }
        })
        .collect();
    adaptive(&h, &cuts, tol)
}

/// Integral over `[breaks[0], breaks[last]]` with one adaptive panel per
/// breakpoint interval. Use this when `h` is smooth between breakpoints but
/// not across them (piecewise interpolants).
pub fn integrate_segments<F>(h: F, breaks: &[f64], tol: &Tolerances) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if breaks.len() < 2 {
        return Ok(0.0);
    }
    if breaks.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("breakpoints must be finite"));
    }
    if breaks.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("breakpoints must be non-decreasing"));
    }
    if breaks[breaks.len() - 1] == breaks[0] {
        return Ok(0.0);
    }
    adaptive(&h, breaks, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn square_on_unit_interval() {
        let v = integrate_adaptive(|x| x * x, 0.0, 1.0, &Tolerances::default()).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_sphere_volume_integral() {
        // ∫₀^√6 r² dr = 2√6; also −ξ₀²θ'₀(ξ₀) = 6·√6/3
        let xi0 = 6f64.sqrt();
        let v = integrate_adaptive(|r| r * r, 0.0, xi0, &Tolerances::default()).unwrap();
        assert!((v - 2.0 * xi0).abs() < 1e-10);
        assert!((v - 6.0 * xi0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn sinc_mass_integral() {
        // ∫₀^π r sin r dr = sin r − r cos r |₀^π = π
        let v = integrate_adaptive(|r: f64| r * r.sin(), 0.0, PI, &Tolerances::default()).unwrap();
        assert!((v - PI).abs() < 1e-10);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(
            integrate_adaptive(|x| x, 2.0, 2.0, &Tolerances::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn reversed_limits_rejected() {
        assert!(integrate_adaptive(|x| x, 1.0, 0.0, &Tolerances::default()).is_err());
    }

    #[test]
    fn budget_exhaustion() {
        let tol = Tolerances::new(1e-14, 1e-300, 200).unwrap();
        let err =
            integrate_adaptive(|x: f64| (1.0 / (x + 1e-6)).sin(), 0.0, 1.0, &tol).unwrap_err();
        assert!(matches!(err, Error::Budget(200)));
    }

    #[test]
    fn segments_match_plain_adaptive() {
        let f = |x: f64| x.exp() * x.cos();
        let tol = Tolerances::default();
        let a = integrate_adaptive(f, 0.0, 3.0, &tol).unwrap();
        let b = integrate_segments(f, &[0.0, 0.5, 0.5, 1.7, 3.0], &tol).unwrap();
        let exact = {
            let g = |x: f64| 0.5 * x.exp() * (x.cos() + x.sin());
            g(3.0) - g(0.0)
        };
        assert!((a - exact).abs() < 1e-9);
        assert!((b - exact).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn exact_on_cubics(
            c0 in -10.0..10.0f64, c1 in -10.0..10.0f64,
            c2 in -10.0..10.0f64, c3 in -10.0..10.0f64,
            a in -5.0..5.0f64, len in 0.0..10.0f64,
        ) {
            let b = a + len;
            let p = |x: f64| c0 + x * (c1 + x * (c2 + x * c3));
            let antider = |x: f64| x * (c0 + x * (c1 / 2.0 + x * (c2 / 3.0 + x * c3 / 4.0)));
            let exact = antider(b) - antider(a);
            let v = integrate_adaptive(p, a, b, &Tolerances::default()).unwrap();
            // rounding only: the primitive itself is evaluated in f64
            let scale = 1.0 + antider(b).abs() + antider(a).abs();
            prop_assert!((v - exact).abs() <= 1e-12 * scale);
        }
    }
}
