//! Standard Lane-Emden polytropes.
//!
//! Solves `θ'' + (2/ξ)θ' + θ₊ⁿ = 0`, `θ(0) = 1`, `θ'(0) = 0` up to the first
//! zero `ξₙ`, starting from the origin series to step around the `2/ξ`
//! coordinate singularity.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{integrate_ivp, integrate_segments, DenseTrajectory, Tolerances};

/// Radius at which the origin series hands over to the integrator.
pub const SERIES_RADIUS: f64 = 1e-3;

/// Largest radius accepted by [`series_start`].
pub const SERIES_MAX_RADIUS: f64 = 0.01;

/// Polytropic index `n ∈ [0, 5]`. Finite-radius profiles need `n < 5`; the
/// endpoint `n = 5` is only reachable through the closed form.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct PolytropeIndex(f64);

impl PolytropeIndex {
    pub fn new(n: f64) -> Result<Self> {
        if !(0.0..=5.0).contains(&n) {
            return Err(Error::domain(format!(
                "polytropic index must lie in [0, 5], got {n}"
            )));
        }
        Ok(Self(n))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True when the profile has a finite first zero.
    pub fn has_finite_radius(self) -> bool {
        self.0 < 5.0
    }
}

/// Large-`n` estimate of the first zero, `16(n+1) / (π√3 (5-n))`.
pub fn asymptotic_first_zero(n: f64) -> f64 {
    16.0 * (n + 1.0) / (PI * 3f64.sqrt() * (5.0 - n))
}

/// A solved polytrope: first zero, slope there, and a dense profile of
/// `(θ, θ')` on `[SERIES_RADIUS, ξₙ]`.
#[derive(Debug, Clone)]
pub struct Polytrope {
    index: PolytropeIndex,
    xi_n: f64,
    slope_at_zero: f64,
    profile: DenseTrajectory<2>,
    series_radius: f64,
}

impl Polytrope {
    pub fn index(&self) -> PolytropeIndex {
        self.index
    }

    pub fn n(&self) -> f64 {
        self.index.0
    }

    /// First zero `ξₙ`.
    pub fn xi_n(&self) -> f64 {
        self.xi_n
    }

    /// `θ'ₙ(ξₙ)`, always negative.
    pub fn slope_at_zero(&self) -> f64 {
        self.slope_at_zero
    }

    /// `-ξₙ² θ'ₙ(ξₙ)`, the quantity every downstream formula consumes.
    pub fn slope_product(&self) -> f64 {
        -self.xi_n * self.xi_n * self.slope_at_zero
    }

    pub fn profile(&self) -> &DenseTrajectory<2> {
        &self.profile
    }

    pub fn series_radius(&self) -> f64 {
        self.series_radius
    }

    /// `(θ, θ')` anywhere on `[0, ξₙ]`; `None` outside.
    pub fn state(&self, xi: f64) -> Option<[f64; 2]> {
        if !(0.0..=self.xi_n).contains(&xi) {
            return None;
        }
        if xi < self.series_radius {
            if xi == 0.0 {
                return Some([1.0, 0.0]);
            }
            let (t, dt) = series_terms(self.n(), xi);
            return Some([t, dt]);
        }
        self.profile.eval(xi)
    }

    /// `θ₊(ξ)`, extended by zero beyond `ξₙ`.
    pub fn theta(&self, xi: f64) -> f64 {
        self.state(xi).map_or(0.0, |s| s[0].max(0.0))
    }

    /// `θ''` from the Lane-Emden equation itself.
    pub fn theta_second(&self, xi: f64) -> Option<f64> {
        let [t, dt] = self.state(xi)?;
        if xi == 0.0 {
            return Some(-1.0 / 3.0);
        }
        Some(-positive_power(t, self.n()) - 2.0 * dt / xi)
    }

    /// Quadrature breakpoints: the origin followed by every integrator node.
    pub fn breakpoints(&self) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(self.profile.nodes().iter().copied())
            .collect()
    }
}

fn positive_power(theta: f64, n: f64) -> f64 {
    theta.max(0.0).powf(n)
}

fn series_terms(n: f64, xi: f64) -> (f64, f64) {
    let x2 = xi * xi;
    let c6 = n * (8.0 * n - 5.0);
    let theta = 1.0 - x2 / 6.0 + n * x2 * x2 / 120.0 - c6 * x2 * x2 * x2 / 15120.0;
    let dtheta = xi * (-1.0 / 3.0 + n * x2 / 30.0 - c6 * x2 * x2 / 2520.0);
    (theta, dtheta)
}

/// Origin expansion `θ = 1 - ξ²/6 + nξ⁴/120 - n(8n-5)ξ⁶/15120` and its
/// derivative, valid for `0 < ξ ≤ 0.01`.
pub fn series_start(n: PolytropeIndex, xi: f64) -> Result<(f64, f64)> {
    if !(xi > 0.0 && xi <= SERIES_MAX_RADIUS) {
        return Err(Error::domain(format!(
            "series start radius must lie in (0, {SERIES_MAX_RADIUS}], got {xi}"
        )));
    }
    Ok(series_terms(n.value(), xi))
}

/// Exact `(θ, θ')` for the three solvable indices 0, 1 and 5.
pub fn theta_closed_form(n: PolytropeIndex, xi: f64) -> Result<(f64, f64)> {
    if !(xi >= 0.0) {
        return Err(Error::domain(format!("xi must be non-negative, got {xi}")));
    }
    match n.value() {
        0.0 => Ok((1.0 - xi * xi / 6.0, -xi / 3.0)),
        1.0 => {
            if xi < 0.05 {
                // ξ cos ξ − sin ξ cancels badly near the removable singularity
                Ok(sinc_taylor(xi))
            } else {
                Ok((xi.sin() / xi, (xi * xi.cos() - xi.sin()) / (xi * xi)))
            }
        }
        5.0 => {
            if xi.is_infinite() {
                return Ok((0.0, 0.0));
            }
            let u = 1.0 + xi * xi / 3.0;
            Ok((u.powf(-0.5), -xi / 3.0 * u.powf(-1.5)))
        }
        other => Err(Error::domain(format!(
            "no closed form for index {other}; only n = 0, 1, 5 are solvable"
        ))),
    }
}

fn sinc_taylor(xi: f64) -> (f64, f64) {
    // sin ξ / ξ = Σ (-1)^k ξ^(2k) / (2k+1)!
    let x2 = xi * xi;
    let mut coeff = 1.0;
    let mut power = 1.0;
    let (mut value, mut slope) = (1.0, 0.0);
    for k in 1..10 {
        let kf = k as f64;
        coeff *= -1.0 / ((2.0 * kf) * (2.0 * kf + 1.0));
        slope += 2.0 * kf * coeff * power * xi;
        power *= x2;
        value += coeff * power;
    }
    (value, slope)
}

/// Integrates the Lane-Emden equation out to its first zero.
pub fn solve_polytrope(n: PolytropeIndex, tol: &Tolerances) -> Result<Polytrope> {
    if !n.has_finite_radius() {
        return Err(Error::domain(
            "n = 5 has no finite zero (ξ₅ = ∞); use the closed form θ₅ = (1 + ξ²/3)^(-1/2)",
        ));
    }
    let nv = n.value();
    let (theta0, dtheta0) = series_start(n, SERIES_RADIUS)?;
    let xi_limit = (4.0 * asymptotic_first_zero(nv)).max(20.0);

    let rhs = |xi: f64, y: &[f64; 2]| [y[1], -positive_power(y[0], nv) - 2.0 * y[1] / xi];
    let event = |_xi: f64, y: &[f64; 2]| y[0];
    let sol = integrate_ivp(
        rhs,
        [theta0, dtheta0],
        SERIES_RADIUS,
        xi_limit,
        tol,
        Some(&event),
    )?;

    let hit = sol.event.ok_or_else(|| {
        Error::consistency(format!(
            "no zero of θ found for n = {nv} before ξ = {xi_limit}"
        ))
    })?;
    if !(hit.y[1] < 0.0) {
        return Err(Error::consistency(format!(
            "non-negative slope {} at the first zero for n = {nv}",
            hit.y[1]
        )));
    }
    Ok(Polytrope {
        index: n,
        xi_n: hit.t,
        slope_at_zero: hit.y[1],
        profile: sol.trajectory,
        series_radius: SERIES_RADIUS,
    })
}

/// `∫₀^ξₙ θ₊(r)^power r² dr` over the dense profile.
pub fn profile_moment(p: &Polytrope, power: f64, tol: &Tolerances) -> Result<f64> {
    let scale = p.xi_n.powi(3);
    integrate_segments(
        |r| positive_power(p.theta(r), power) * r * r,
        &p.breakpoints(),
        &tol.scaled(scale),
    )
}

/// `∫₀^ξₙ θₙ(r)^(n+1) r² dr`.
pub fn mass_integral(p: &Polytrope, tol: &Tolerances) -> Result<f64> {
    profile_moment(p, p.n() + 1.0, tol)
}

/// Both sides of `(n+1)/((5-n)ξₙ) = ∫θⁿ⁺¹r²dr / (-ξₙ²θ'ₙ(ξₙ))²`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZeroIdentity {
    pub lhs: f64,
    pub rhs: f64,
}

impl ZeroIdentity {
    pub fn relative_residual(&self) -> f64 {
        ((self.lhs - self.rhs) / self.lhs).abs()
    }
}

pub fn zero_identity(p: &Polytrope, tol: &Tolerances) -> Result<ZeroIdentity> {
    let n = p.n();
    let lhs = (n + 1.0) / ((5.0 - n) * p.xi_n);
    let rhs = mass_integral(p, tol)? / p.slope_product().powi(2);
    Ok(ZeroIdentity { lhs, rhs })
}
