//! Radial pair potentials and their Assumption-(A) data.

use alloc::format;

use crate::error::{Error, Result};
use crate::estimate::{Estimate, Method};
use crate::{math, quadrature, MAX_DIM};

/// Built-in potential families. `Zero` and `HardCore` exist for analytic
/// anchors in tests and bypass certification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `c_r r^{-s}`
    PureRepulsive {
        c_r: f64,
        s: f64,
    },
    /// `c_r r^{-s} - c_a r^{-(d+ε₀)}`
    PowerCoreWithTail {
        c_r: f64,
        s: f64,
        c_a: f64,
        eps0: f64,
    },
    /// `4ε((σ/r)^12 - (σ/r)^6)`
    LennardJones {
        epsilon: f64,
        sigma: f64,
    },
    Zero,
    /// `+∞` for `r < σ`, `0` otherwise.
    HardCore {
        sigma: f64,
    },
}

/// Parameters with `φ(r) >= φ₀ r^{-s}` for `r <= r0` and
/// `φ(r) >= -φ₁ r^{-(d+ε₀)}` for `r >= R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionA {
    pub r0: f64,
    pub big_r: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub s: f64,
    pub eps0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    family: Family,
    dim: usize,
}

const CERT_GRID: usize = 10_000;

impl Potential {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Domain(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "{name} = {v} must be positive and finite"
                )))
            }
        };
        match family {
            Family::PureRepulsive { c_r, s } => {
                positive("c_r", c_r)?;
                positive("s", s)?;
            }
            Family::PowerCoreWithTail { c_r, s, c_a, eps0 } => {
                positive("c_r", c_r)?;
                positive("c_a", c_a)?;
                positive("eps0", eps0)?;
                if !(s > dim as f64 + eps0) {
                    return Err(Error::Domain(format!(
                        "power-core-with-tail needs s > d + eps0, got s = {s}, d + eps0 = {}",
                        dim as f64 + eps0
                    )));
                }
            }
            Family::LennardJones { epsilon, sigma } => {
                positive("epsilon", epsilon)?;
                positive("sigma", sigma)?;
            }
            Family::HardCore { sigma } => positive("sigma", sigma)?,
            Family::Zero => {}
        }
        Ok(Self { family, dim })
    }

    pub fn pure_repulsive(c_r: f64, s: f64, dim: usize) -> Result<Self> {
        Self::new(Family::PureRepulsive { c_r, s }, dim)
    }

    pub fn power_core_with_tail(c_r: f64, s: f64, c_a: f64, eps0: f64, dim: usize) -> Result<Self> {
        Self::new(Family::PowerCoreWithTail { c_r, s, c_a, eps0 }, dim)
    }

    pub fn lennard_jones(epsilon: f64, sigma: f64, dim: usize) -> Result<Self> {
        Self::new(Family::LennardJones { epsilon, sigma }, dim)
    }

    pub fn test_zero(dim: usize) -> Result<Self> {
        Self::new(Family::Zero, dim)
    }

    pub fn test_hard_core(sigma: f64, dim: usize) -> Result<Self> {
        Self::new(Family::HardCore { sigma }, dim)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_test_only(&self) -> bool {
        matches!(self.family, Family::Zero | Family::HardCore { .. })
    }

    /// `φ⁻ ≡ 0`.
    pub fn is_purely_repulsive(&self) -> bool {
        matches!(
            self.family,
            Family::PureRepulsive { .. } | Family::Zero | Family::HardCore { .. }
        )
    }

    /// Exponent `d + ε₀` of the attractive tail.
    fn tail_power(&self) -> f64 {
        match self.family {
            Family::PowerCoreWithTail { eps0, .. } => self.dim as f64 + eps0,
            _ => 6.0,
        }
    }

    /// `φ(r)` without the domain check; callers guarantee `r > 0`.
    #[inline]
    pub fn phi(&self, r: f64) -> f64 {
        match self.family {
            Family::PureRepulsive { c_r, s } => c_r * math::powf(r, -s),
            Family::PowerCoreWithTail { c_r, s, c_a, .. } => {
                c_r * math::powf(r, -s) - c_a * math::powf(r, -self.tail_power())
            }
            Family::LennardJones { epsilon, sigma } => {
                let x = sigma / r;
                let x6 = x * x * x * x * x * x;
                4.0 * epsilon * (x6 * x6 - x6)
            }
            Family::Zero => 0.0,
            Family::HardCore { sigma } => {
                if r < sigma {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if r > 0.0 {
            Ok(self.phi(r))
        } else {
            Err(Error::Domain(format!(
                "potential evaluated at r = {r}; needs r > 0"
            )))
        }
    }

    /// `(φ⁺(r), φ⁻(r))`.
    pub fn split(&self, r: f64) -> Result<(f64, f64)> {
        let v = self.eval(r)?;
        Ok(if v >= 0.0 { (v, 0.0) } else { (0.0, -v) })
    }

    #[inline]
    pub fn positive_part(&self, r: f64) -> f64 {
        self.phi(r).max(0.0)
    }

    #[inline]
    pub fn negative_part(&self, r: f64) -> f64 {
        (-self.phi(r)).max(0.0)
    }

    /// Mayer factor `e^{-βφ(r)} - 1`.
    #[inline]
    pub fn mayer(&self, beta: f64, r: f64) -> f64 {
        math::exp_m1(-beta * self.phi(r))
    }

    /// Where `φ` changes sign, if it does.
    pub fn zero_crossing(&self) -> Option<f64> {
        match self.family {
            Family::PowerCoreWithTail { c_r, s, c_a, .. } => {
                Some(math::powf(c_r / c_a, 1.0 / (s - self.tail_power())))
            }
            Family::LennardJones { sigma, .. } => Some(sigma),
            _ => None,
        }
    }

    /// Location of the maximum of `φ⁻`; `φ⁻` is unimodal for every family.
    pub fn attraction_peak(&self) -> Option<f64> {
        match self.family {
            Family::PowerCoreWithTail { c_r, s, c_a, .. } => {
                let p = self.tail_power();
                Some(math::powf(s * c_r / (p * c_a), 1.0 / (s - p)))
            }
            Family::LennardJones { sigma, .. } => Some(math::powf(2.0, 1.0 / 6.0) * sigma),
            _ => None,
        }
    }

    /// `sup φ⁻` over separations in `[lo, hi]`.
    pub fn sup_negative_on(&self, lo: f64, hi: f64) -> f64 {
        match self.attraction_peak() {
            None => 0.0,
            Some(peak) => {
                let r = peak.clamp(lo, hi);
                if r > 0.0 {
                    self.negative_part(r)
                } else {
                    0.0
                }
            }
        }
    }

    /// `(c, p)` with `φ⁻(r) <= c r^{-p}` for all `r > 0`.
    pub fn negative_envelope(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::PowerCoreWithTail { c_a, .. } => Some((c_a, self.tail_power())),
            Family::LennardJones { epsilon, sigma } => {
                Some((4.0 * epsilon * math::powi(sigma, 6), 6.0))
            }
            _ => None,
        }
    }

    /// `(c, p)` with `|φ(r)| <= c r^{-p}` for all `r >= from > 0`.
    pub fn abs_envelope(&self, from: f64) -> (f64, f64) {
        match self.family {
            Family::PureRepulsive { c_r, s } => (c_r, s),
            Family::PowerCoreWithTail { c_r, s, c_a, .. } => {
                let p = self.tail_power();
                (c_r * math::powf(from, p - s) + c_a, p)
            }
            Family::LennardJones { epsilon, sigma } => {
                let s6 = math::powi(sigma, 6);
                (4.0 * epsilon * (s6 * s6 * math::powi(from, -6) + s6), 6.0)
            }
            Family::Zero | Family::HardCore { .. } => (0.0, f64::INFINITY),
        }
    }

    /// Closed-form Assumption-(A) parameters, verified on dense log grids.
    pub fn certify_assumption_a(&self) -> Result<AssumptionA> {
        let d = self.dim as f64;
        let params = match self.family {
            Family::Zero => {
                return Err(Error::Certification(
                    "zero potential has no repulsive core phi >= phi0 r^-s".into(),
                ));
            }
            Family::HardCore { .. } => {
                return Err(Error::Certification(
                    "hard-core stub is a test-only potential without Assumption (A) parameters"
                        .into(),
                ));
            }
            Family::PureRepulsive { c_r, s } => {
                if s < d {
                    return Err(Error::Certification(format!(
                        "core exponent s = {s} below dimension {d}"
                    )));
                }
                AssumptionA {
                    r0: 1.0,
                    big_r: 2.0,
                    phi0: c_r,
                    phi1: c_r,
                    s,
                    eps0: 1.0,
                }
            }
            Family::PowerCoreWithTail { c_r, s, c_a, eps0 } => {
                let rz = self.zero_crossing().expect("power core crosses zero");
                let r0 = 0.9 * rz;
                let phi0 = c_r - c_a * math::powf(r0, s - self.tail_power());
                AssumptionA {
                    r0,
                    big_r: rz,
                    phi0,
                    phi1: c_a,
                    s,
                    eps0,
                }
            }
            Family::LennardJones { epsilon, sigma } => {
                let r0 = 0.9 * sigma;
                let s6 = math::powi(sigma, 6);
                let phi0 = 4.0 * epsilon * (s6 * s6 - s6 * math::powi(r0, 6));
                AssumptionA {
                    r0,
                    big_r: 1.5 * sigma,
                    phi0,
                    phi1: 4.0 * epsilon * s6,
                    s: 12.0,
                    eps0: 6.0 - d,
                }
            }
        };
        self.verify_assumption_a(&params)?;
        Ok(params)
    }

    fn verify_assumption_a(&self, a: &AssumptionA) -> Result<()> {
        let p = self.dim as f64 + a.eps0;
        for r in math::log_grid(a.r0 * 1e-6, a.r0, CERT_GRID) {
            let floor = a.phi0 * math::powf(r, -a.s);
            if self.phi(r) < floor * (1.0 - 1e-12) {
                return Err(Error::Certification(format!(
                    "core bound fails at r = {r}: phi = {} < phi0 r^-s = {floor}",
                    self.phi(r)
                )));
            }
        }
        for r in math::log_grid(a.big_r, a.big_r * 1e6, CERT_GRID) {
            let floor = -a.phi1 * math::powf(r, -p);
            if self.phi(r) < floor * (1.0 + 1e-12) {
                return Err(Error::Certification(format!(
                    "tail bound fails at r = {r}: phi = {} < -phi1 r^-(d+eps0) = {floor}",
                    self.phi(r)
                )));
            }
        }
        Ok(())
    }

    /// Radial break points for integrals of functions of `φ`.
    fn radial_breaks(&self) -> Result<(f64, f64)> {
        match self.family {
            Family::HardCore { sigma } => Ok((sigma, sigma)),
            Family::Zero => Ok((1.0, 2.0)),
            _ => {
                let c = self.certify_assumption_a().map_err(|e| {
                    Error::Precondition(format!("Mayer integral needs a certified potential: {e}"))
                })?;
                Ok((c.r0, c.big_r))
            }
        }
    }

    /// Radius beyond which `|e^{-βφ} - 1| < tol`.
    pub fn cutoff_radius(&self, beta: f64, tol: f64) -> f64 {
        match self.family {
            Family::Zero => 0.0,
            Family::HardCore { sigma } => sigma,
            _ => {
                let from = self.zero_crossing().unwrap_or(0.0).max(f64::MIN_POSITIVE);
                let (k, q) = self.abs_envelope(from.max(1e-300));
                let m = math::exp(beta * self.sup_negative_on(from, f64::INFINITY));
                let r = math::powf(beta * m * k / tol, 1.0 / q);
                if self.zero_crossing().is_some() {
                    r.max(from)
                } else {
                    r
                }
            }
        }
    }

    /// `∫_{|x| >= rc} |e^{-βφ} - 1| dx` bounded through `|e^{-βφ}-1| <= β|φ|e^{βφ⁻}`.
    pub fn mayer_tail_bound(&self, beta: f64, rc: f64) -> f64 {
        let d = self.dim as f64;
        match self.family {
            Family::Zero => 0.0,
            Family::HardCore { sigma } => {
                if rc >= sigma {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            _ => {
                let (k, q) = self.abs_envelope(rc);
                if q <= d {
                    return f64::INFINITY;
                }
                let m = math::exp(beta * self.sup_negative_on(rc, f64::INFINITY));
                math::sphere_surface(self.dim) * beta * m * k * math::powf(rc, d - q) / (q - d)
            }
        }
    }

    /// `C(β) = ∫ |e^{-βφ(|x|)} - 1| dx` by adaptive quadrature with an analytic tail bound.
    pub fn mayer_c_beta(&self, beta: f64, tol: f64) -> Result<Estimate> {
        if !(beta > 0.0) || !(tol > 0.0) {
            return Err(Error::Domain(format!(
                "C(beta) needs beta > 0 and tol > 0, got {beta}, {tol}"
            )));
        }
        let d = self.dim;
        let integrand = |r: f64| self.mayer(beta, r).abs() * math::powi(r, d as i32 - 1);
        self.radial_integral(integrand, |rt| self.mayer_tail_bound(beta, rt), tol)
    }

    /// `∫ φ⁻(|x|) dx`.
    pub fn phi_minus_integral(&self, tol: f64) -> Result<Estimate> {
        let Some((c, p)) = self.negative_envelope() else {
            return Ok(Estimate::exact(0.0));
        };
        let d = self.dim;
        let surf = math::sphere_surface(d);
        if p <= d as f64 {
            return Err(Error::Precondition(
                "attractive tail is not integrable".into(),
            ));
        }
        let integrand = |r: f64| self.negative_part(r) * math::powi(r, d as i32 - 1);
        let tail = |rt: f64| surf * c * math::powf(rt, d as f64 - p) / (p - d as f64);
        self.radial_integral(integrand, tail, tol)
    }

    /// `S_{d-1} ∫₀^∞ g(r) dr` split at `r0`, `R` and a tail radius where `tail(rt) <= tol/2`.
    fn radial_integral(
        &self,
        g: impl Fn(f64) -> f64,
        tail: impl Fn(f64) -> f64,
        tol: f64,
    ) -> Result<Estimate> {
        let surf = math::sphere_surface(self.dim);
        if matches!(self.family, Family::Zero) {
            return Ok(Estimate::new(0.0, 0.0, 0.0, Method::Quadrature));
        }
        let (r0, big_r) = self.radial_breaks()?;
        let piece_tol = tol / (6.0 * surf);
        let mut value = 0.0;
        let mut err = 0.0;
        for (lo, hi) in [(0.0, r0), (r0, big_r)] {
            let q = quadrature::integrate(&g, lo, hi, piece_tol, 4000);
            value += q.value;
            err += q.error;
        }
        // tail radius: double until the analytic remainder is below tol/2
        let mut rt = big_r.max(1e-300);
        let mut rem = tail(rt);
        if !rem.is_finite() {
            return Err(Error::Precondition(
                "integrand tail is not integrable (envelope exponent <= d)".into(),
            ));
        }
        while rem > tol / 2.0 {
            rt *= 2.0;
            rem = tail(rt);
        }
        if rt > big_r {
            let (l0, l1) = (math::ln(big_r), math::ln(rt));
            let q = quadrature::integrate(
                |t| {
                    let r = math::exp(t);
                    g(r) * r
                },
                l0,
                l1,
                piece_tol,
                4000,
            );
            value += q.value;
            err += q.error;
        }
        Ok(Estimate::new(
            surf * value,
            0.0,
            surf * err + rem,
            Method::Quadrature,
        ))
    }
}

/// KS convergence radius `e^{-2βB-1}/C(β)`; `+∞` when `C(β) = 0`.
pub fn activity_radius(c_beta: f64, beta: f64, b: f64) -> f64 {
    if c_beta == 0.0 {
        f64::INFINITY
    } else {
        math::exp(-2.0 * beta * b - 1.0) / c_beta
    }
}
