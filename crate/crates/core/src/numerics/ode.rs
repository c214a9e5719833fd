//! Dormand-Prince 5(4) with PI step control, continuous-extension dense
//! output and sign-change event location.

use std::cell::Cell;

use super::{find_root_bracketed, Tolerances};
use crate::error::{Error, Result};

// Dormand-Prince tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// continuous extension (Hairer, Norsett & Wanner, DOPRI5 `contd5`)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller (Hairer & Wanner, DOPRI5 defaults)
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Per-step continuous extension coefficients (value- and slope-matching
/// quartic in the step fraction).
#[derive(Debug, Clone, Copy)]
struct Segment<const N: usize> {
    t0: f64,
    h: f64,
    rc: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    fn new(
        t0: f64,
        h: f64,
        y0: &[f64; N],
        f0: &[f64; N],
        y1: &[f64; N],
        f1: &[f64; N],
        extra: [f64; N],
    ) -> Self {
        let rc1 = *y0;
        let rc2: [f64; N] = std::array::from_fn(|k| y1[k] - y0[k]);
        let rc3: [f64; N] = std::array::from_fn(|k| h * f0[k] - rc2[k]);
        let rc4: [f64; N] = std::array::from_fn(|k| rc2[k] - h * f1[k] - rc3[k]);
        Self {
            t0,
            h,
            rc: [rc1, rc2, rc3, rc4, extra],
        }
    }

    fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let u = 1.0 - s;
        let [rc1, rc2, rc3, rc4, rc5] = &self.rc;
        std::array::from_fn(|k| rc1[k] + s * (rc2[k] + u * (rc3[k] + s * (rc4[k] + u * rc5[k]))))
    }

    fn eval_derivative(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let u = 1.0 - s;
        let [_, rc2, rc3, rc4, rc5] = &self.rc;
        std::array::from_fn(|k| {
            let b = rc4[k] + u * rc5[k];
            let db = -rc5[k];
            let c = rc3[k] + s * b;
            let dc = b + s * db;
            let d = rc2[k] + u * c;
            let dd = -c + u * dc;
            (d + s * dd) / self.h
        })
    }
}

enum Location<'a, const N: usize> {
    Node(usize),
    Inside(&'a Segment<N>),
}

/// Piecewise polynomial trajectory: every step carries the integrator's
/// continuous extension, which matches value and slope at both nodes, so
/// the interpolant is C¹ and reproduces the stored nodes.
#[derive(Debug, Clone)]
pub struct DenseTrajectory<const N: usize> {
    nodes: Vec<f64>,
    states: Vec<[f64; N]>,
    slopes: Vec<[f64; N]>,
    segments: Vec<Segment<N>>,
}

impl<const N: usize> DenseTrajectory<N> {
    fn new(t0: f64, y0: [f64; N], f0: [f64; N]) -> Self {
        Self {
            nodes: vec![t0],
            states: vec![y0],
            slopes: vec![f0],
            segments: Vec::new(),
        }
    }

    fn push(&mut self, segment: Segment<N>, t: f64, y: [f64; N], f: [f64; N]) {
        self.segments.push(segment);
        self.nodes.push(t);
        self.states.push(y);
        self.slopes.push(f);
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn states(&self) -> &[[f64; N]] {
        &self.states
    }

    /// `rhs(t, y)` at each node.
    pub fn slopes(&self) -> &[[f64; N]] {
        &self.slopes
    }

    pub fn t_start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn locate(&self, t: f64) -> Option<Location<'_, N>> {
        if !(t >= self.t_start() && t <= self.t_end()) {
            return None;
        }
        let i = self.nodes.partition_point(|&x| x < t);
        if i < self.nodes.len() && self.nodes[i] == t {
            return Some(Location::Node(i));
        }
        Some(Location::Inside(&self.segments[i - 1]))
    }

    /// Interpolated state at `t`, or `None` outside the covered range.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        Some(match self.locate(t)? {
            Location::Inside(seg) => seg.eval(t),
            Location::Node(i) => self.states[i],
        })
    }

    /// Derivative of the interpolant at `t`.
    pub fn eval_derivative(&self, t: f64) -> Option<[f64; N]> {
        Some(match self.locate(t)? {
            Location::Inside(seg) => seg.eval_derivative(t),
            Location::Node(i) => self.slopes[i],
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EventHit<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IvpStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone)]
pub struct IvpSolution<const N: usize> {
    pub trajectory: DenseTrajectory<N>,
    pub event: Option<EventHit<N>>,
    pub stats: IvpStats,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|k| y[k] + h * terms.iter().map(|(c, v)| c * v[k]).sum::<f64>())
}

fn checked<const N: usize>(v: [f64; N], t: f64) -> Result<[f64; N]> {
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::domain(format!("NaN in right-hand side at t = {t}")));
    }
    Ok(v)
}

/// Event function whose first sign change stops integration.
pub type EventFn<'a, const N: usize> = &'a dyn Fn(f64, &[f64; N]) -> f64;

/// Integrates `y' = rhs(t, y)` from `t0` towards `t_max`.
///
/// When `event` is given, integration stops at its first sign change; the
/// crossing is located on the step's continuous extension and becomes the
/// last trajectory node.
pub fn integrate_ivp<const N: usize, F>(
    rhs: F,
    y0: [f64; N],
    t0: f64,
    t_max: f64,
    tol: &Tolerances,
    event: Option<EventFn<'_, N>>,
) -> Result<IvpSolution<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    tol.validate()?;
    if !(t0.is_finite() && t_max.is_finite() && t_max > t0) {
        return Err(Error::domain(format!(
            "need finite t_max > t0, got [{t0}, {t_max}]"
        )));
    }
    if y0.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("initial state must be finite"));
    }

    let mut stats = IvpStats::default();
    let evals = Cell::new(0usize);
    let eval = |t: f64, y: &[f64; N]| {
        evals.set(evals.get() + 1);
        checked(rhs(t, y), t)
    };

    let scale =
        |a: &[f64; N], b: &[f64; N], k: usize| tol.abs + tol.rel * a[k].abs().max(b[k].abs());

    let mut t = t0;
    let mut y = y0;
    let mut f = eval(t, &y)?;
    let mut traj = DenseTrajectory::new(t, y, f);
    let h_max = t_max - t0;

    // initial step guess (Hairer & Wanner, II.4)
    let mut h = {
        let (mut dnf, mut dny) = (0.0, 0.0);
        for k in 0..N {
            let sk = scale(&y, &y, k);
            dnf += (f[k] / sk).powi(2);
            dny += (y[k] / sk).powi(2);
        }
        let mut h0 = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            0.01 * (dny / dnf).sqrt()
        };
        h0 = h0.min(h_max);
        let y1 = axpy(&y, h0, &[(1.0, &f)]);
        let f1 = eval(t + h0, &y1)?;
        let mut der2: f64 = 0.0;
        for k in 0..N {
            der2 += ((f1[k] - f[k]) / scale(&y, &y, k)).powi(2);
        }
        let der2 = der2.sqrt() / h0;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        (100.0 * h0).min(h1).min(h_max)
    };

    let mut g_prev = event.map(|g| g(t, &y));
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Error::Budget(tol.max_steps));
        }
        if h < 10.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::Stiffness { t, h });
        }
        let last = t + h >= t_max;
        if last {
            h = t_max - t;
        }

        let k1 = f;
        let k2 = eval(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
        let k3 = eval(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = eval(
            t + C4 * h,
            &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        )?;
        let k5 = eval(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        )?;
        let k6 = eval(
            t + h,
            &axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        )?;
        let y_new = axpy(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let t_new = if last { t_max } else { t + h };
        let k7 = eval(t_new, &y_new)?;

        let mut err = 0.0;
        for k in 0..N {
            let e =
                h * (E1 * k1[k] + E3 * k3[k] + E4 * k4[k] + E5 * k5[k] + E6 * k6[k] + E7 * k7[k]);
            err += (e / scale(&y, &y_new, k)).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            fac_old = err.max(1e-4);
            stats.accepted += 1;

            let extra: [f64; N] = std::array::from_fn(|k| {
                h * (D1 * k1[k] + D3 * k3[k] + D4 * k4[k] + D5 * k5[k] + D6 * k6[k] + D7 * k7[k])
            });
            let segment = Segment::new(t, t_new - t, &y, &k1, &y_new, &k7, extra);

            if let (Some(g), Some(gp)) = (event, g_prev) {
                let g_new = g(t_new, &y_new);
                let crossed = g_new == 0.0 || (gp != 0.0 && gp.signum() != g_new.signum());
                if crossed {
                    let te = if g_new == 0.0 {
                        t_new
                    } else {
                        let refine = Tolerances {
                            rel: 4.0 * f64::EPSILON,
                            ..*tol
                        };
                        find_root_bracketed(|s| g(s, &segment.eval(s)), t, t_new, &refine)?
                    };
                    let ye = if te == t_new { y_new } else { segment.eval(te) };
                    let fe = if te == t_new { k7 } else { eval(te, &ye)? };
                    traj.push(segment, te, ye, fe);
                    stats.rhs_evals = evals.get();
                    return Ok(IvpSolution {
                        trajectory: traj,
                        event: Some(EventHit { t: te, y: ye }),
                        stats,
                    });
                }
                g_prev = Some(g_new);
            }

            t = t_new;
            y = y_new;
            f = k7;
            traj.push(segment, t, y, f);
            if last {
                stats.rhs_evals = evals.get();
                return Ok(IvpSolution {
                    trajectory: traj,
                    event: None,
                    stats,
                });
            }

            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new.min(h_max);
        } else {
            stats.rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillator(_t: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn cosine_first_zero() {
        let ev = |_t: f64, y: &[f64; 2]| y[0];
        let sol = integrate_ivp(
            oscillator,
            [1.0, 0.0],
            0.0,
            10.0,
            &Tolerances::default(),
            Some(&ev),
        )
        .unwrap();
        let hit = sol.event.unwrap();
        assert!((hit.t - PI / 2.0).abs() < 1e-10, "{}", hit.t - PI / 2.0);
        assert!(hit.y[0].abs() <= 1e-12);
        assert_eq!(sol.trajectory.t_end(), hit.t);
    }

    #[test]
    fn linear_crossing() {
        let ev = |_t: f64, y: &[f64; 2]| y[0];
        let sol = integrate_ivp(
            |_t, y: &[f64; 2]| [y[1], 0.0],
            [1.0, -1.0],
            0.0,
            5.0,
            &Tolerances::default(),
            Some(&ev),
        )
        .unwrap();
        assert!((sol.event.unwrap().t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn runs_to_t_max_without_event() {
        let sol = integrate_ivp(
            oscillator,
            [1.0, 0.0],
            0.0,
            2.0 * PI,
            &Tolerances::default(),
            None,
        )
        .unwrap();
        assert!(sol.event.is_none());
        assert_eq!(sol.trajectory.t_end(), 2.0 * PI);
        let last = sol.trajectory.states().last().unwrap();
        assert!((last[0] - 1.0).abs() < 1e-9);
        assert!(last[1].abs() < 1e-9);
    }

    #[test]
    fn dense_output_reproduces_nodes_and_is_accurate() {
        let sol = integrate_ivp(
            oscillator,
            [1.0, 0.0],
            0.0,
            6.0,
            &Tolerances::default(),
            None,
        )
        .unwrap();
        let traj = &sol.trajectory;
        for (t, y) in traj.nodes().iter().zip(traj.states()) {
            assert_eq!(traj.eval(*t).unwrap(), *y);
        }
        let mut worst: f64 = 0.0;
        for i in 0..=600 {
            let t = 0.01 * i as f64;
            let y = traj.eval(t).unwrap();
            let dy = traj.eval_derivative(t).unwrap();
            worst = worst
                .max((y[0] - t.cos()).abs())
                .max((dy[0] + t.sin()).abs());
        }
        assert!(worst < 1e-8, "{worst}");
        assert!(traj.eval(6.1).is_none());
    }

    #[test]
    fn interpolant_is_continuous_across_nodes() {
        let sol = integrate_ivp(
            oscillator,
            [1.0, 0.0],
            0.0,
            3.0,
            &Tolerances::default(),
            None,
        )
        .unwrap();
        let traj = &sol.trajectory;
        for &t in &traj.nodes()[1..traj.len() - 1] {
            let d = 1e-9;
            let a = traj.eval_derivative(t - d).unwrap();
            let b = traj.eval_derivative(t + d).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn event_agrees_with_root_on_interpolant() {
        let ev = |_t: f64, y: &[f64; 2]| y[0] - 0.3;
        let tol = Tolerances::default();
        let sol = integrate_ivp(oscillator, [1.0, 0.0], 0.0, 3.0, &tol, Some(&ev)).unwrap();
        let traj = &sol.trajectory;
        let n = traj.len();
        let (a, b) = (traj.nodes()[n - 2], traj.nodes()[n - 1]);
        let t_root = find_root_bracketed(|t| traj.eval(t).unwrap()[0] - 0.3, a, b, &tol).unwrap();
        assert!((t_root - sol.event.unwrap().t).abs() <= tol.abs);
    }

    #[test]
    fn halving_rel_tolerance_is_consistent() {
        let ev = |_t: f64, y: &[f64; 2]| y[0];
        let base = Tolerances::default().with_rel(1e-8);
        let a = integrate_ivp(oscillator, [1.0, 0.0], 0.0, 10.0, &base, Some(&ev)).unwrap();
        let b = integrate_ivp(
            oscillator,
            [1.0, 0.0],
            0.0,
            10.0,
            &base.with_rel(5e-9),
            Some(&ev),
        )
        .unwrap();
        assert!((a.event.unwrap().t - b.event.unwrap().t).abs() <= 10.0 * 1e-8);
    }

    #[test]
    fn budget_error() {
        let tol = Tolerances::new(1e-10, 1e-12, 5).unwrap();
        let err = integrate_ivp(oscillator, [1.0, 0.0], 0.0, 100.0, &tol, None).unwrap_err();
        assert!(matches!(err, Error::Budget(5)));
    }

    #[test]
    fn nan_rhs_is_a_domain_error() {
        let err = integrate_ivp(
            |_t, y: &[f64; 1]| [(y[0] - 2.0).sqrt()],
            [1.0],
            0.0,
            1.0,
            &Tolerances::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn blow_up_underflows_step() {
        // y' = y², y(0) = 1 blows up at t = 1
        let err = integrate_ivp(
            |_t, y: &[f64; 1]| [y[0] * y[0]],
            [1.0],
            0.0,
            2.0,
            &Tolerances::default(),
            None,
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                Error::Stiffness { .. } | Error::Domain(_) | Error::Budget(_)
            ),
            "{err:?}"
        );
    }

    #[test]
    fn bad_interval_rejected() {
        assert!(integrate_ivp(
            oscillator,
            [1.0, 0.0],
            1.0,
            1.0,
            &Tolerances::default(),
            None
        )
        .is_err());
    }
}
