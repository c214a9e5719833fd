//! Closed-form algebra from the exponent β to the critical constant C_β.
//!
//! For β ∈ (3/2, ∞) the minimizer is a rescaled Lane-Emden polytrope of
//! index `n(β) = (3β-2)/(β-1) ∈ (3, 5)`; C_β follows from the first zero
//! ξₙ and the slope product `-ξₙ²θ'ₙ(ξₙ)`. The two endpoints β = 3/2 and
//! β = ∞ have their own closed forms, and near 3/2 an asymptotic expansion
//! replaces direct integration (ξₙ diverges there).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numerics::Tolerances;
use crate::polytrope::{asymptotic_first_zero, solve_polytrope, Polytrope, PolytropeIndex};

/// Below this exponent the polytrope radius is too large to integrate to
/// and the asymptotic expansion is used instead.
pub const GENERIC_BETA_MIN: f64 = 1.505;

/// Relative agreement required between the two C_β routes.
pub const DUAL_FORMULA_TOLERANCE: f64 = 1e-10;

/// The exponent of the L^β norm; `Infinity` is the L^∞ endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinity,
}

impl Beta {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            Beta::Finite(b) => Some(b),
            Beta::Infinity => None,
        }
    }

    pub fn is_three_halves(&self) -> bool {
        *self == Beta::Finite(1.5)
    }
}

impl From<f64> for Beta {
    fn from(b: f64) -> Self {
        if b == f64::INFINITY {
            Beta::Infinity
        } else {
            Beta::Finite(b)
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "inf" | "infinity" | "+inf" | "+infinity" => Ok(Beta::Infinity),
            _ => {
                let b: f64 = t
                    .parse()
                    .map_err(|_| Error::domain(format!("cannot parse beta from {s:?}")))?;
                if b.is_nan() || b == f64::NEG_INFINITY {
                    return Err(Error::domain(format!("invalid beta {s:?}")));
                }
                Ok(Beta::from(b))
            }
        }
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta::Finite(b) => s.serialize_f64(*b),
            Beta::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(b) => Ok(Beta::from(b)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn require_above_one(beta: f64) -> Result<()> {
    if beta > 1.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("beta must exceed 1, got {beta}")))
    }
}

/// `n(β) = (3β-2)/(β-1)`, with `n(∞) = 3`.
pub fn n_of_beta(beta: Beta) -> Result<PolytropeIndex> {
    match beta {
        Beta::Infinity => PolytropeIndex::new(3.0),
        Beta::Finite(b) => {
            require_above_one(b)?;
            let n = (3.0 * b - 2.0) / (b - 1.0);
            if n > 5.0 {
                return Err(Error::domain(format!(
                    "beta = {b} < 3/2 maps to index {n} > 5; C_beta = 0 for 1 < beta < 3/2"
                )));
            }
            PolytropeIndex::new(n)
        }
    }
}

/// `β(n) = (n-2)/(n-3)` on `(3, 5]`, with `β(3) = ∞`.
pub fn beta_of_n(n: f64) -> Result<Beta> {
    if n == 3.0 {
        return Ok(Beta::Infinity);
    }
    if !(n > 3.0 && n <= 5.0) {
        return Err(Error::domain(format!("index must lie in [3, 5], got {n}")));
    }
    Ok(Beta::Finite((n - 2.0) / (n - 3.0)))
}

/// Coefficient of the semilinear term, `32π²(β-1)³/(β(2β-1)(3β-2))`;
/// `16π²/3` at β = ∞.
pub fn c_of_beta(beta: Beta) -> Result<f64> {
    match beta {
        Beta::Infinity => Ok(16.0 * PI * PI / 3.0),
        Beta::Finite(b) => {
            require_above_one(b)?;
            Ok(32.0 * PI * PI * (b - 1.0).powi(3) / (b * (2.0 * b - 1.0) * (3.0 * b - 2.0)))
        }
    }
}

/// Rescaling from the standard polytrope to the minimizer's potential.
///
/// `A_n` and `R_β` overflow `f64` for large β, so they are carried as
/// logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingConstants {
    pub n: f64,
    pub c_beta: f64,
    pub alpha_n: f64,
    pub ln_a_n: f64,
    pub ln_r_beta: f64,
}

impl ScalingConstants {
    pub fn a_n(&self) -> f64 {
        self.ln_a_n.exp()
    }

    pub fn r_beta(&self) -> f64 {
        self.ln_r_beta.exp()
    }
}

fn check_index(beta: f64, p: &Polytrope) -> Result<f64> {
    if !(beta > 1.5 && beta.is_finite()) {
        return Err(Error::domain(format!(
            "generic pipeline needs 3/2 < beta < inf, got {beta}"
        )));
    }
    let n = n_of_beta(Beta::Finite(beta))?.value();
    if (p.n() - n).abs() > 1e-12 * n {
        return Err(Error::consistency(format!(
            "polytrope solved at n = {} but beta = {beta} needs n = {n}",
            p.n()
        )));
    }
    Ok(n)
}

/// `α_n = c^{1/(n-1)}`, `A_n = (P/α_n)^{2β-1}` and `R_β = ξₙ/A_n`, where
/// `P = -ξₙ²θ'ₙ(ξₙ)`.
pub fn scaling_constants(beta: f64, p: &Polytrope) -> Result<ScalingConstants> {
    let n = check_index(beta, p)?;
    let c_beta = c_of_beta(Beta::Finite(beta))?;
    let alpha_n = c_beta.powf(1.0 / (n - 1.0));
    let ln_a_n = (2.0 * beta - 1.0) * (p.slope_product().ln() - alpha_n.ln());
    let ln_r_beta = p.xi_n().ln() - ln_a_n;
    Ok(ScalingConstants {
        n,
        c_beta,
        alpha_n,
        ln_a_n,
        ln_r_beta,
    })
}

/// `ln R_β` straight from the Lane-Emden data,
/// `R_β = ξₙ P^{1-2β} c^{β-1}`.
pub fn ln_radius_from_lane_emden(beta: f64, xi_n: f64, slope_product: f64) -> Result<f64> {
    let c = c_of_beta(Beta::Finite(beta))?;
    Ok(xi_n.ln() + (1.0 - 2.0 * beta) * slope_product.ln() + (beta - 1.0) * c.ln())
}

/// C_β from the support radius, `(β / (R_β(2β-3)))^{1/β}`.
pub fn critical_from_radius(beta: f64, ln_r_beta: f64) -> f64 {
    ((beta.ln() - ln_r_beta - (2.0 * beta - 3.0).ln()) / beta).exp()
}

/// C_β directly from `(ξₙ, P)`:
/// `(β P^{2β-1} / ((2β-3) ξₙ c^{β-1}))^{1/β}`, summed in log space.
pub fn critical_from_lane_emden(beta: f64, xi_n: f64, slope_product: f64) -> Result<f64> {
    let c = c_of_beta(Beta::Finite(beta))?;
    let ln = beta.ln() + (2.0 * beta - 1.0) * slope_product.ln()
        - (2.0 * beta - 3.0).ln()
        - xi_n.ln()
        - (beta - 1.0) * c.ln();
    Ok((ln / beta).exp())
}

/// Both routes to C_β: through the rescaling constants (`R_β = ξₙ/A_n`)
/// and through the Lane-Emden-data formula.
#[derive(Debug, Clone, Copy)]
pub struct CriticalRoutes {
    pub via_radius: f64,
    pub via_lane_emden: f64,
}

impl CriticalRoutes {
    pub fn relative_gap(&self) -> f64 {
        ((self.via_radius - self.via_lane_emden) / self.via_lane_emden).abs()
    }
}

pub fn critical_routes(beta: f64, p: &Polytrope) -> Result<CriticalRoutes> {
    let s = scaling_constants(beta, p)?;
    Ok(CriticalRoutes {
        via_radius: critical_from_radius(beta, s.ln_r_beta),
        via_lane_emden: critical_from_lane_emden(beta, p.xi_n(), p.slope_product())?,
    })
}

/// C_β for 3/2 < β < ∞, after checking that both routes agree.
pub fn critical_constant(beta: f64, p: &Polytrope) -> Result<f64> {
    let routes = critical_routes(beta, p)?;
    if !(routes.relative_gap() <= DUAL_FORMULA_TOLERANCE) {
        return Err(Error::consistency(format!(
            "C_beta routes disagree at beta = {beta}: {} vs {}",
            routes.via_radius, routes.via_lane_emden
        )));
    }
    Ok(routes.via_lane_emden)
}

/// `(3/8)(15/16)^{1/3}`.
pub fn critical_at_three_halves() -> f64 {
    0.375 * (15.0f64 / 16.0).cbrt()
}

/// `C_∞ = 3P₃²/(16π²)` from the solved n = 3 polytrope.
pub fn critical_at_infinity(p3: &Polytrope) -> Result<f64> {
    if p3.n() != 3.0 {
        return Err(Error::consistency(format!(
            "C_inf needs the n = 3 polytrope, got n = {}",
            p3.n()
        )));
    }
    Ok(critical_at_infinity_from_slope(p3.slope_product()))
}

pub fn critical_at_infinity_from_slope(slope_product: f64) -> f64 {
    3.0 * slope_product * slope_product / (16.0 * PI * PI)
}

/// Near-3/2 expansion
/// `[3π/16 · β/(4β-3)]^{1/β} (3β(2β-1)(3β-2)/(32π²(β-1)³))^{1-1/β}`,
/// exact at β = 3/2.
pub fn asymptotic_critical(beta: Beta) -> Result<f64> {
    match beta {
        Beta::Infinity => Ok(3.0 / c_of_beta(Beta::Infinity)?),
        Beta::Finite(b) => {
            if !(b >= 1.5) {
                return Err(Error::domain(format!(
                    "asymptotics need beta >= 3/2, got {b}"
                )));
            }
            let first = (3.0 * PI / 16.0 * b / (4.0 * b - 3.0)).powf(1.0 / b);
            let second = (3.0 * b * (2.0 * b - 1.0) * (3.0 * b - 2.0)
                / (32.0 * PI * PI * (b - 1.0).powi(3)))
            .powf(1.0 - 1.0 / b);
            Ok(first * second)
        }
    }
}

/// Near-3/2 support radius
/// `(16/3π)((4β-3)/(2β-3))(32π²(β-1)³/(3β(2β-1)(3β-2)))^{β-1}`.
pub fn asymptotic_radius(beta: Beta) -> Result<f64> {
    let b = beta
        .finite()
        .ok_or_else(|| Error::domain("asymptotic radius diverges at beta = inf"))?;
    if !(b > 1.5) {
        return Err(Error::domain(format!(
            "asymptotic radius needs beta > 3/2 (it diverges at 3/2), got {b}"
        )));
    }
    let c3 = 32.0 * PI * PI * (b - 1.0).powi(3) / (3.0 * b * (2.0 * b - 1.0) * (3.0 * b - 2.0));
    Ok(16.0 / (3.0 * PI) * (4.0 * b - 3.0) / (2.0 * b - 3.0) * c3.powf(b - 1.0))
}

/// Lower and upper bounds on C_β known before the exact evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KzBounds {
    pub lower: f64,
    pub upper: f64,
}

const LOWER_BASE: f64 = 27.0 / 512.0 * 15.0 / 16.0;

fn upper_kz(b: f64) -> f64 {
    let prod = (1.0 + 2.0 * b) * (2.0 + 2.0 * b) * (3.0 + 2.0 * b);
    let ln_inner = (8.0 * PI.powf(2.5)).ln() + ln_gamma(b) - prod.ln() - ln_gamma(b + 1.5);
    45.0 / (8.0 * PI * PI) * (ln_inner / b).exp()
}

/// `[(3/8)³(15/16)]^{1-1/β} ≤ C_β ≤ (45/8π²)(8π^{5/2}Γ(β)/(∏(k+2β) Γ(β+3/2)))^{1/β}`.
pub fn bounds_kz(beta: Beta) -> Result<KzBounds> {
    match beta {
        Beta::Infinity => Ok(KzBounds {
            lower: LOWER_BASE,
            upper: 45.0 / (8.0 * PI * PI),
        }),
        Beta::Finite(b) => {
            if !(b >= 1.5) {
                return Err(Error::domain(format!(
                    "bounds need beta >= 3/2, got {b} (C_beta = 0 below 3/2)"
                )));
            }
            Ok(KzBounds {
                lower: LOWER_BASE.powf(1.0 - 1.0 / b),
                upper: upper_kz(b),
            })
        }
    }
}

/// Upper bound improved by monotonicity of C_β: the original bound up to
/// its minimizer β*, the constant minimum after, then the lower convex
/// envelope of that curve.
#[derive(Debug, Clone)]
pub struct ImprovedBound {
    grid: Vec<f64>,
    hull: Vec<(f64, f64)>,
    beta_star: f64,
    plateau: f64,
}

/// Points below this count are rejected outright.
pub const IMPROVED_MIN_POINTS: usize = 50;

impl ImprovedBound {
    /// 400 points: β = 3/2 followed by a grid uniform in `log(β - 3/2)` up
    /// to β = 20.
    pub fn default_grid() -> Vec<f64> {
        let mut grid = vec![1.5];
        grid.extend(log_offset_grid(1.5 + 1e-4, 20.0, 399));
        grid
    }

    pub fn with_default_grid() -> Result<Self> {
        improved_upper_bound(&Self::default_grid())
    }

    pub fn beta_star(&self) -> f64 {
        self.beta_star
    }

    pub fn plateau(&self) -> f64 {
        self.plateau
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn hull(&self) -> &[(f64, f64)] {
        &self.hull
    }

    /// Improved bound at every grid point.
    pub fn values(&self) -> Vec<f64> {
        self.grid
            .iter()
            .map(|&b| self.eval(Beta::Finite(b)))
            .collect()
    }

    /// Improved bound at any β ≥ 3/2.
    pub fn eval(&self, beta: Beta) -> f64 {
        let b = match beta {
            Beta::Infinity => return self.plateau,
            Beta::Finite(b) => b,
        };
        if b >= self.beta_star {
            return self.plateau;
        }
        let i = self.hull.partition_point(|&(x, _)| x <= b);
        let interp = if i == 0 {
            self.hull[0].1
        } else if i == self.hull.len() {
            self.plateau
        } else {
            let (x0, y0) = self.hull[i - 1];
            let (x1, y1) = self.hull[i];
            y0 + (y1 - y0) * (b - x0) / (x1 - x0)
        };
        // the chord of a convex curve lies above it between vertices
        interp.min(upper_kz(b.max(1.5)))
    }
}

/// `points` values uniform in `log(β - 3/2)` from `lo` to `hi` inclusive.
pub fn log_offset_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = ((lo - 1.5).ln(), (hi - 1.5).ln());
    (0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else if i == 0 {
                lo
            } else {
                1.5 + (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn lower_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

pub fn improved_upper_bound(betas: &[f64]) -> Result<ImprovedBound> {
    if betas.len() < IMPROVED_MIN_POINTS {
        return Err(Error::Resolution(format!(
            "improved bound needs at least {IMPROVED_MIN_POINTS} grid points, got {}",
            betas.len()
        )));
    }
    if betas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain(
            "improved-bound grid must be strictly increasing",
        ));
    }
    if (betas[0] - 1.5).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "improved-bound grid must start at 3/2, got {}",
            betas[0]
        )));
    }
    let last = betas[betas.len() - 1];
    if !(last >= 10.0 && last.is_finite()) {
        return Err(Error::domain(format!(
            "improved-bound grid must reach beta >= 10, got {last}"
        )));
    }

    let values: Vec<f64> = betas.iter().map(|&b| upper_kz(b)).collect();
    let i_min = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let lo = betas[i_min.saturating_sub(1)];
    let hi = betas[(i_min + 1).min(betas.len() - 1)];
    let beta_star = golden_section_min(upper_kz, lo, hi, 1e-10);
    let plateau = upper_kz(beta_star).min(values[i_min]);

    let mut curve: Vec<(f64, f64)> = betas
        .iter()
        .zip(&values)
        .filter(|(&b, _)| b < beta_star)
        .map(|(&b, &v)| (b, v))
        .collect();
    curve.push((beta_star, plateau));
    curve.extend(
        betas
            .iter()
            .filter(|&&b| b > beta_star)
            .map(|&b| (b, plateau)),
    );

    Ok(ImprovedBound {
        grid: betas.to_vec(),
        hull: lower_hull(&curve),
        beta_star,
        plateau,
    })
}

/// How a reported C_β was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Integrated polytrope plus the closed-form rescaling.
    Exact,
    /// Near-3/2 expansion.
    Asymptotic,
    /// Closed form at β = 3/2 or β = ∞.
    Endpoint,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Exact => "exact",
            Source::Asymptotic => "asymptotic",
            Source::Endpoint => "endpoint",
        })
    }
}

/// Everything computed for one β. Quantities that are infinite or vanish
/// at an endpoint are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalReport {
    pub beta: Beta,
    pub source: Source,
    pub n: f64,
    pub c_beta: f64,
    pub alpha_n: f64,
    pub a_n: Option<f64>,
    pub ln_a_n: Option<f64>,
    pub r_beta: Option<f64>,
    pub ln_r_beta: Option<f64>,
    pub xi_n: Option<f64>,
    pub slope: Option<f64>,
    pub slope_product: f64,
    pub critical_constant: f64,
    pub lower_kz: f64,
    pub upper_kz: f64,
    pub upper_improved: f64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Runs the full β → C_β pipeline, choosing the route by range.
pub fn critical_report(
    beta: Beta,
    tol: &Tolerances,
    improved: &ImprovedBound,
) -> Result<CriticalReport> {
    if let Beta::Finite(b) = beta {
        if b.is_nan() || b < 1.5 {
            return Err(Error::domain(format!(
                "beta = {b} < 3/2: C_beta > 0 if and only if beta >= 3/2, so C_beta = 0 here"
            )));
        }
    }
    let n = n_of_beta(beta)?.value();
    let c_beta = c_of_beta(beta)?;
    let alpha_n = c_beta.powf(1.0 / (n - 1.0));
    let bounds = bounds_kz(beta)?;
    let upper_improved = improved.eval(beta);

    let mut report = CriticalReport {
        beta,
        source: Source::Endpoint,
        n,
        c_beta,
        alpha_n,
        a_n: None,
        ln_a_n: None,
        r_beta: None,
        ln_r_beta: None,
        xi_n: None,
        slope: None,
        slope_product: 3f64.sqrt(),
        critical_constant: f64::NAN,
        lower_kz: bounds.lower,
        upper_kz: bounds.upper,
        upper_improved,
    };

    match beta {
        Beta::Infinity => {
            let p3 = solve_polytrope(PolytropeIndex::new(3.0)?, tol)?;
            report.xi_n = Some(p3.xi_n());
            report.slope = Some(p3.slope_at_zero());
            report.slope_product = p3.slope_product();
            report.critical_constant = critical_at_infinity(&p3)?;
        }
        Beta::Finite(1.5) => {
            report.critical_constant = critical_at_three_halves();
        }
        Beta::Finite(b) if b < GENERIC_BETA_MIN => {
            let xi = asymptotic_first_zero(n);
            let r = asymptotic_radius(beta)?;
            report.source = Source::Asymptotic;
            report.xi_n = Some(xi);
            report.r_beta = finite(r);
            report.ln_r_beta = Some(r.ln());
            report.ln_a_n = Some(xi.ln() - r.ln());
            report.a_n = finite(xi / r);
            report.critical_constant = asymptotic_critical(beta)?;
        }
        Beta::Finite(b) => {
            let p = solve_polytrope(PolytropeIndex::new(n)?, tol)?;
            let s = scaling_constants(b, &p)?;
            report.source = Source::Exact;
            report.xi_n = Some(p.xi_n());
            report.slope = Some(p.slope_at_zero());
            report.slope_product = p.slope_product();
            report.ln_a_n = Some(s.ln_a_n);
            report.a_n = finite(s.a_n());
            report.ln_r_beta = Some(s.ln_r_beta);
            report.r_beta = finite(s.r_beta());
            report.critical_constant = critical_constant(b, &p)?;
        }
    }
    Ok(report)
}
