//! Reconstructs the minimizer's potential and density from the rescaled
//! polytrope and checks every energy identity by direct radial quadrature.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::critical::{
    c_of_beta, critical_constant, n_of_beta, scaling_constants, Beta, ScalingConstants,
};
use crate::error::{Error, Result};
use crate::numerics::{find_root_bracketed, integrate_adaptive, integrate_segments, Tolerances};
use crate::polytrope::{solve_polytrope, Polytrope};

/// Minimizer potential `φ(r) = α⁻¹ A^{2/(n-1)} θ(A r)` on `[0, R]` and the
/// density `ρ = (c/4π) φ₊ⁿ`.
#[derive(Debug, Clone)]
pub struct MinimizerProfile {
    beta: f64,
    scaling: ScalingConstants,
    polytrope: Polytrope,
    a: f64,
    r_beta: f64,
    phi0: f64,
    breakpoints: Vec<f64>,
}

impl MinimizerProfile {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn scaling(&self) -> &ScalingConstants {
        &self.scaling
    }

    pub fn r_beta(&self) -> f64 {
        self.r_beta
    }

    /// Density exponent `n = (3β-2)/(β-1)`.
    pub fn n(&self) -> f64 {
        self.scaling.n
    }

    /// Central value `φ(0)`.
    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    /// Radii of the integrator nodes, for piecewise quadrature.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `φ(r)` inside the support; the exterior form `1/r - 1/R` outside.
    pub fn phi(&self, r: f64) -> f64 {
        if r >= self.r_beta {
            return 1.0 / r - 1.0 / self.r_beta;
        }
        self.phi0 * self.polytrope.theta(self.a * r)
    }

    pub fn dphi(&self, r: f64) -> f64 {
        if r >= self.r_beta {
            return -1.0 / (r * r);
        }
        let xi = (self.a * r).min(self.polytrope.xi_n());
        self.phi0 * self.a * self.polytrope.state(xi).map_or(0.0, |s| s[1])
    }

    /// `φ''` from differentiating the dense interpolant of `θ'`.
    pub fn d2phi(&self, r: f64) -> Option<f64> {
        let xi = self.a * r;
        let t2 = if xi < self.polytrope.series_radius() {
            self.polytrope.theta_second(xi)?
        } else {
            self.polytrope.profile().eval_derivative(xi)?[1]
        };
        Some(self.phi0 * self.a * self.a * t2)
    }

    /// `φ₊(r)^p`, zero outside the support.
    pub fn phi_power(&self, r: f64, p: f64) -> f64 {
        if r >= self.r_beta {
            return 0.0;
        }
        self.phi(r).max(0.0).powf(p)
    }

    pub fn rho(&self, r: f64) -> f64 {
        self.scaling.c_beta / (4.0 * PI) * self.phi_power(r, self.n())
    }

    /// `4π∫₀^R g(r) r² dr` over the node breakpoints, with the absolute
    /// target scaled by `magnitude`.
    fn radial_integral<G: Fn(f64) -> f64>(
        &self,
        g: G,
        magnitude: f64,
        tol: &Tolerances,
    ) -> Result<f64> {
        let scale = magnitude * self.r_beta.powi(3);
        let v = integrate_segments(|r| g(r) * r * r, &self.breakpoints, &tol.scaled(scale))?;
        Ok(4.0 * PI * v)
    }
}

pub fn build_minimizer_profile(
    beta: f64,
    p: &Polytrope,
    s: &ScalingConstants,
) -> Result<MinimizerProfile> {
    let fresh = scaling_constants(beta, p)?;
    if (fresh.ln_a_n - s.ln_a_n).abs() > 1e-12 * fresh.ln_a_n.abs().max(1.0) {
        return Err(Error::consistency(format!(
            "scaling constants do not belong to beta = {beta} and this polytrope"
        )));
    }
    let a = s.a_n();
    let r_beta = p.xi_n() / a;
    if !(a > 0.0 && r_beta.is_finite()) {
        return Err(Error::domain(format!(
            "support radius exp({}) is not representable at beta = {beta}",
            s.ln_r_beta
        )));
    }
    let phi0 = ((2.0 / (s.n - 1.0)) * s.ln_a_n).exp() / s.alpha_n;
    let mut breakpoints: Vec<f64> = p.breakpoints().iter().map(|&x| x / a).collect();
    let last = breakpoints.len() - 1;
    breakpoints[last] = r_beta;
    Ok(MinimizerProfile {
        beta,
        scaling: *s,
        polytrope: p.clone(),
        a,
        r_beta,
        phi0,
        breakpoints,
    })
}

/// Shell-formula potential with per-segment masses cached, so each
/// evaluation only integrates the segment containing `r`.
pub struct PotentialEvaluator<'m> {
    m: &'m MinimizerProfile,
    tol: Tolerances,
    inner_prefix: Vec<f64>,
    outer_suffix: Vec<f64>,
}

impl<'m> PotentialEvaluator<'m> {
    pub fn new(m: &'m MinimizerProfile, tol: &Tolerances) -> Result<Self> {
        let rho0 = m.rho(0.0);
        let r = m.r_beta;
        let tol2 = tol.scaled(rho0 * r.powi(3) / m.breakpoints.len() as f64);
        let tol1 = tol.scaled(rho0 * r * r / m.breakpoints.len() as f64);
        let b = &m.breakpoints;
        let mut inner_prefix = vec![0.0; b.len()];
        let mut outer_suffix = vec![0.0; b.len()];
        for k in 1..b.len() {
            let v = integrate_adaptive(|s| m.rho(s) * s * s, b[k - 1], b[k], &tol2)?;
            inner_prefix[k] = inner_prefix[k - 1] + v;
        }
        for k in (0..b.len() - 1).rev() {
            let v = integrate_adaptive(|s| m.rho(s) * s, b[k], b[k + 1], &tol1)?;
            outer_suffix[k] = outer_suffix[k + 1] + v;
        }
        let tol = tol.scaled(rho0 * r * r);
        Ok(Self {
            m,
            tol,
            inner_prefix,
            outer_suffix,
        })
    }

    /// Enclosed mass `4π∫₀^R ρ s² ds`.
    pub fn total_mass(&self) -> f64 {
        4.0 * PI * self.inner_prefix[self.inner_prefix.len() - 1]
    }

    /// `K(r) = (4π/r)∫₀^r ρ s² ds + 4π∫_r^R ρ s ds`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::domain(format!("potential needs r > 0, got {r}")));
        }
        let b = &self.m.breakpoints;
        if r >= self.m.r_beta {
            return Ok(self.total_mass() / r);
        }
        let k = b.partition_point(|&x| x <= r) - 1;
        let inner = self.inner_prefix[k]
            + integrate_adaptive(|s| self.m.rho(s) * s * s, b[k], r, &self.tol.scaled(r))?;
        let outer = self.outer_suffix[k + 1]
            + integrate_adaptive(|s| self.m.rho(s) * s, r, b[k + 1], &self.tol)?;
        Ok(4.0 * PI * (inner / r + outer))
    }
}

/// Single evaluation of the shell-formula potential.
pub fn potential_k(m: &MinimizerProfile, r: f64, tol: &Tolerances) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("potential needs r > 0, got {r}")));
    }
    PotentialEvaluator::new(m, tol)?.eval(r)
}

fn rel(value: f64, target: f64) -> f64 {
    ((value - target) / target).abs()
}

/// `|4π∫ρr²dr - 1|`.
pub fn check_mass(m: &MinimizerProfile, tol: &Tolerances) -> Result<f64> {
    let mass = m.radial_integral(|r| m.rho(r), m.rho(0.0), tol)?;
    Ok((mass - 1.0).abs())
}

/// Exponent `(4β-3)/(β-1)` shared by the L^β, kinetic and Pohozaev checks.
pub fn energy_exponent(beta: f64) -> f64 {
    (4.0 * beta - 3.0) / (beta - 1.0)
}

/// `4π∫φ₊^{(4β-3)/(β-1)} r² dr`.
pub fn energy_integral(m: &MinimizerProfile, tol: &Tolerances) -> Result<f64> {
    let p = energy_exponent(m.beta);
    m.radial_integral(|r| m.phi_power(r, p), m.phi0.powf(p), tol)
}

fn lbeta_prefactor(b: f64) -> f64 {
    8.0 * PI * (b - 1.0).powi(3) / ((2.0 * b - 1.0) * (3.0 * b - 2.0) * (4.0 * b - 3.0))
}

fn kinetic_prefactor(b: f64) -> f64 {
    24.0 * PI * (b - 1.0).powi(4) / (b * (2.0 * b - 1.0) * (3.0 * b - 2.0) * (4.0 * b - 3.0))
}

/// `‖f‖_β^β` from the radial reduction.
pub fn lbeta_norm(m: &MinimizerProfile, energy: f64) -> f64 {
    lbeta_prefactor(m.beta) * energy
}

/// `β/(R(2β-3))`.
pub fn lbeta_target(m: &MinimizerProfile) -> f64 {
    m.beta / (m.r_beta * (2.0 * m.beta - 3.0))
}

/// `3(β-1)/(R(2β-3))`, shared by the kinetic and potential energies.
pub fn energy_target(m: &MinimizerProfile) -> f64 {
    3.0 * (m.beta - 1.0) / (m.r_beta * (2.0 * m.beta - 3.0))
}

pub fn check_lbeta_norm(m: &MinimizerProfile, tol: &Tolerances) -> Result<f64> {
    Ok(rel(
        lbeta_norm(m, energy_integral(m, tol)?),
        lbeta_target(m),
    ))
}

pub fn check_kinetic(m: &MinimizerProfile, tol: &Tolerances) -> Result<f64> {
    let e = kinetic_prefactor(m.beta) * energy_integral(m, tol)?;
    Ok(rel(e, energy_target(m)))
}

/// `-E_q = ½·4π∫ρKr²dr` by double quadrature against `3(β-1)/(R(2β-3))`.
pub fn check_potential(m: &MinimizerProfile, tol: &Tolerances) -> Result<f64> {
    let k = PotentialEvaluator::new(m, tol)?;
    let rho0 = m.rho(0.0);
    let k0 = k.eval(m.breakpoints[1] * 1e-6)?;
    let failure = std::cell::Cell::new(None);
    let v = m.radial_integral(
        |r| {
            if r == 0.0 {
                return 0.0;
            }
            match k.eval(r) {
                Ok(kr) => m.rho(r) * kr,
                Err(e) => {
                    failure.set(Some(e.to_string()));
                    f64::NAN
                }
            }
        },
        rho0 * k0,
        tol,
    );
    if let Some(msg) = failure.take() {
        return Err(Error::consistency(msg));
    }
    Ok(rel(0.5 * v?, energy_target(m)))
}

/// Max deviation of `4π∫φ'²r²dr` and `c·4π∫φ^{(4β-3)/(β-1)}r²dr` from
/// `(4π/R)(4β-3)/(2β-3)`.
pub fn check_pohozaev(m: &MinimizerProfile, tol: &Tolerances) -> Result<f64> {
    let target = 4.0 * PI / m.r_beta * (4.0 * m.beta - 3.0) / (2.0 * m.beta - 3.0);
    let grad_scale = (m.phi0 / m.r_beta).powi(2);
    let dirichlet = m.radial_integral(|r| m.dphi(r).powi(2), grad_scale, tol)?;
    let semilinear = m.scaling.c_beta * energy_integral(m, tol)?;
    Ok(rel(dirichlet, target).max(rel(semilinear, target)))
}

/// Max over `radii` of `|K(r) - 1/r|·r`.
pub fn check_exterior(m: &MinimizerProfile, radii: &[f64], tol: &Tolerances) -> Result<f64> {
    let k = PotentialEvaluator::new(m, tol)?;
    let mut worst: f64 = 0.0;
    for &r in radii {
        if !(r >= m.r_beta) {
            return Err(Error::domain(format!(
                "exterior sample {r} lies inside the support"
            )));
        }
        worst = worst.max((k.eval(r)? * r - 1.0).abs());
    }
    Ok(worst)
}

/// `max(|R²φ'(R) + 1|, |φ(R)|/φ(0))`, evaluated from the interior side.
pub fn check_boundary(m: &MinimizerProfile) -> f64 {
    let p = &m.polytrope;
    let r = m.r_beta;
    let slope = m.phi0 * m.a * p.slope_at_zero();
    let value = m.phi0 * p.state(p.xi_n()).map_or(f64::NAN, |s| s[0]);
    (r * r * slope + 1.0).abs().max(value.abs() / m.phi0)
}

/// Max of `|φ'' + 2φ'/r + cφ₊ⁿ| / (cφ₊ⁿ)` over `samples` radii spread
/// across the core `φ ≥ φ(0)/2`, where the source term is not dominated by
/// the solver's absolute error.
pub fn check_ode(m: &MinimizerProfile, samples: usize, tol: &Tolerances) -> Result<f64> {
    let c = m.scaling.c_beta;
    let n = m.n();
    let half = 0.5 * m.phi0;
    let core = find_root_bracketed(|r| m.phi(r) - half, 0.0, m.r_beta, &tol.scaled(m.phi0))?;
    let mut worst: f64 = 0.0;
    for i in 1..=samples {
        let r = core * i as f64 / samples as f64;
        let source = c * m.phi_power(r, n);
        let d2 = m
            .d2phi(r)
            .ok_or_else(|| Error::consistency(format!("no second derivative at r = {r}")))?;
        worst = worst.max(((d2 + 2.0 * m.dphi(r) / r + source) / source).abs());
    }
    Ok(worst)
}

/// Pass thresholds per residual at the default tolerances.
pub const THRESHOLDS: [(&str, f64); 8] = [
    ("mass", 1e-6),
    ("lbeta", 1e-6),
    ("kinetic", 1e-6),
    ("potential", 1e-5),
    ("pohozaev", 1e-6),
    ("exterior", 1e-7),
    ("bc", 1e-6),
    ("ode", 1e-7),
];

pub fn threshold(name: &str) -> Option<f64> {
    THRESHOLDS.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
}

/// Headroom of a threshold over the requested relative tolerance.
pub const TOLERANCE_HEADROOM: f64 = 100.0;

/// Thresholds for a run at `tol`: the defaults, relaxed to
/// `TOLERANCE_HEADROOM * tol.rel` when the requested accuracy is coarser.
pub fn thresholds_for(tol: &Tolerances) -> BTreeMap<String, f64> {
    THRESHOLDS
        .iter()
        .map(|(k, v)| (k.to_string(), v.max(TOLERANCE_HEADROOM * tol.rel)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub beta: f64,
    pub residuals: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    /// `C_β` recomputed as `(‖f‖_β^β)^{1/β}` from the quadrature.
    pub closure_critical: f64,
    pub critical_constant: f64,
    pub pass: bool,
}

impl VerificationReport {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.get(name).copied()
    }

    /// Names of the checks over threshold, in threshold order.
    pub fn failures(&self) -> Vec<&'static str> {
        THRESHOLDS
            .iter()
            .filter(|(k, _)| {
                let t = self.thresholds.get(*k).copied().unwrap_or(0.0);
                !(self.residuals.get(*k).copied().unwrap_or(f64::NAN) < t)
            })
            .map(|(k, _)| *k)
            .collect()
    }
}

/// Solve, rescale, rebuild and check everything at one β ∈ (3/2, ∞).
pub fn run_full_verification(beta: Beta, tol: &Tolerances) -> Result<VerificationReport> {
    let b = match beta {
        Beta::Finite(b) if b > 1.5 => b,
        Beta::Finite(b) if (1.0..1.5).contains(&b) => {
            return Err(Error::domain(format!(
                "beta = {b} < 3/2 is outside the validity range (C_beta = 0 below 3/2)"
            )))
        }
        Beta::Finite(1.5) => {
            return Err(Error::domain(
                "beta = 3/2 has no compactly supported minimizer to verify (n = 5)",
            ))
        }
        Beta::Finite(b) => return Err(Error::domain(format!("invalid beta {b}"))),
        Beta::Infinity => {
            return Err(Error::domain(
                "the beta = inf minimizer has no finite L^beta profile to verify",
            ))
        }
    };
    let p = solve_polytrope(n_of_beta(beta)?, tol)?;
    let s = scaling_constants(b, &p)?;
    let m = build_minimizer_profile(b, &p, &s)?;
    debug_assert!((c_of_beta(beta)? - s.c_beta).abs() <= 1e-14 * s.c_beta);

    let energy = energy_integral(&m, tol)?;
    let mut residuals = BTreeMap::new();
    residuals.insert("mass".to_string(), check_mass(&m, tol)?);
    residuals.insert(
        "lbeta".to_string(),
        rel(lbeta_norm(&m, energy), lbeta_target(&m)),
    );
    residuals.insert(
        "kinetic".to_string(),
        rel(kinetic_prefactor(b) * energy, energy_target(&m)),
    );
    residuals.insert("potential".to_string(), check_potential(&m, tol)?);
    residuals.insert("pohozaev".to_string(), check_pohozaev(&m, tol)?);
    let r = m.r_beta;
    residuals.insert(
        "exterior".to_string(),
        check_exterior(&m, &[2.0 * r, 10.0 * r], tol)?,
    );
    residuals.insert("bc".to_string(), check_boundary(&m));
    residuals.insert("ode".to_string(), check_ode(&m, 100, tol)?);

    let thresholds = thresholds_for(tol);
    let mut report = VerificationReport {
        beta: b,
        residuals,
        thresholds,
        closure_critical: lbeta_norm(&m, energy).powf(1.0 / b),
        critical_constant: critical_constant(b, &p)?,
        pass: false,
    };
    report.pass = report.failures().is_empty();
    Ok(report)
}
