//! Vanilla pricing at zero rates: Black–Scholes closed form, Heston via the
//! Lewis single-integral representation, implied volatility and the frozen
//! Vega constants.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};
use crate::market_model::{validate_params, SpotState, SvParams};
use crate::numerics::{integrate_adaptive, normal_cdf, normal_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VanillaOption {
    pub strike: f64,
    pub maturity: f64,
    pub kind: OptionKind,
}

impl VanillaOption {
    pub fn call(strike: f64, maturity: f64) -> Self {
        VanillaOption {
            strike,
            maturity,
            kind: OptionKind::Call,
        }
    }

    pub fn put(strike: f64, maturity: f64) -> Self {
        VanillaOption {
            strike,
            maturity,
            kind: OptionKind::Put,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("strike", self.strike)?;
        positive("maturity", self.maturity)
    }
}

/// Frozen Vegas per vanilla: w.r.t. √ν in the SV model and w.r.t. implied vol in Black–Scholes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VegaProfile {
    pub vega_sv: Vec<f64>,
    pub vega_bs: Vec<f64>,
}

impl VegaProfile {
    pub fn new(vega_sv: Vec<f64>, vega_bs: Vec<f64>) -> Result<Self> {
        HedgeError::check_len("vega profile", vega_sv.len(), vega_bs.len())?;
        if let Some(bad) = vega_bs.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(HedgeError::domain(format!(
                "Black-Scholes vegas must be strictly positive, got {bad}"
            )));
        }
        if vega_sv.iter().any(|v| !v.is_finite()) {
            return Err(HedgeError::domain("stochastic-vol vegas must be finite"));
        }
        Ok(VegaProfile { vega_sv, vega_bs })
    }

    pub fn len(&self) -> usize {
        self.vega_sv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vega_sv.is_empty()
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(HedgeError::domain(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

fn d1_d2(s: f64, k: f64, tau: f64, sigma: f64) -> (f64, f64) {
    let sd = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + 0.5 * sd * sd) / sd;
    (d1, d1 - sd)
}

pub fn bs_price(s: f64, k: f64, tau: f64, sigma: f64, kind: OptionKind) -> Result<f64> {
    positive("spot", s)?;
    positive("strike", k)?;
    positive("time to maturity", tau)?;
    positive("volatility", sigma)?;
    let (d1, d2) = d1_d2(s, k, tau, sigma);
    Ok(match kind {
        OptionKind::Call => s * normal_cdf(d1) - k * normal_cdf(d2),
        OptionKind::Put => k * normal_cdf(-d2) - s * normal_cdf(-d1),
    })
}

pub fn bs_vega(s: f64, k: f64, tau: f64, sigma: f64) -> Result<f64> {
    positive("spot", s)?;
    positive("strike", k)?;
    positive("time to maturity", tau)?;
    positive("volatility", sigma)?;
    let (d1, _) = d1_d2(s, k, tau, sigma);
    Ok(s * normal_pdf(d1) * tau.sqrt())
}

/// Black–Scholes implied volatility by safeguarded Newton with bisection fallback.
pub fn implied_vol(price: f64, s: f64, k: f64, tau: f64, kind: OptionKind) -> Result<f64> {
    positive("spot", s)?;
    positive("strike", k)?;
    positive("time to maturity", tau)?;
    let (lower, upper) = match kind {
        OptionKind::Call => ((s - k).max(0.0), s),
        OptionKind::Put => ((k - s).max(0.0), k),
    };
    if !(price > lower && price < upper) {
        return Err(HedgeError::domain(format!(
            "price {price} outside the no-arbitrage interval ({lower}, {upper})"
        )));
    }

    let value = |sigma: f64| bs_price(s, k, tau, sigma, kind).map(|p| p - price);

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while value(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(HedgeError::numeric(
                "implied_vol",
                format!("could not bracket price {price}"),
            ));
        }
    }

    // Brenner–Subrahmanyam start, moved into the bracket.
    let mut sigma = (2.0 * PI / tau).sqrt() * price / s;
    if !(sigma > lo && sigma < hi) {
        sigma = 0.5 * (lo + hi);
    }

    let tol = 1e-14 * s;
    for _ in 0..200 {
        let f = value(sigma)?;
        if f.abs() <= tol {
            return Ok(sigma);
        }
        if f > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let vega = bs_vega(s, k, tau, sigma)?;
        let newton = sigma - f / vega;
        let next = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - sigma).abs() <= 4.0 * f64::EPSILON * sigma {
            sigma = next;
            break;
        }
        sigma = next;
    }
    let residual = value(sigma)?;
    if residual.abs() <= 1e-10 * s {
        Ok(sigma)
    } else {
        Err(HedgeError::numeric(
            "implied_vol",
            format!("residual {residual:e} above tolerance at sigma = {sigma}"),
        ))
    }
}

/// ln(1 + z) without cancellation for small |z|.
fn ln1p(z: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * z.re + z.norm_sqr()).ln_1p();
    let im = z.im.atan2(1.0 + z.re);
    Complex64::new(re, im)
}

/// e^z − 1 without cancellation for small |z|.
fn expm1(z: Complex64) -> Complex64 {
    let half_sin = (0.5 * z.im).sin();
    let re = z.re.exp_m1() * z.im.cos() - 2.0 * half_sin * half_sin;
    let im = z.re.exp() * z.im.sin();
    Complex64::new(re, im)
}

/// Characteristic function of ln(S_τ/S_0) under Q, evaluated on the Lewis
/// contour u − i/2.
///
/// Continuous-branch ("little trap") form. `β ± d` are computed so that the
/// smaller of the two comes from the product identity (β−d)(β+d) = −ξ²s,
/// which keeps the small-ξ limit free of cancellation.
fn lewis_cf(u: f64, tau: f64, nu0: f64, kappa: f64, theta: f64, xi: f64, rho: f64) -> Complex64 {
    // For w = u − i/2, w² + i·w = u² + 1/4.
    let s = u * u + 0.25;
    let xi2 = xi * xi;
    let beta = Complex64::new(kappa - 0.5 * rho * xi, -rho * xi * u);
    let d = (beta * beta + xi2 * s).sqrt();
    let (b_minus, b_plus) = {
        let plus = beta + d;
        let minus = beta - d;
        if plus.norm() >= minus.norm() {
            (-xi2 * s / plus, plus)
        } else {
            (minus, -xi2 * s / minus)
        }
    };
    let g = b_minus / b_plus;
    let e = (-d * tau).exp();
    let one_minus_e = -expm1(-d * tau);
    let d_coef = -s / b_plus; // (β − d)/ξ²
    let big_d = d_coef * one_minus_e / (1.0 - g * e);
    let z = g * one_minus_e / (1.0 - g);
    let big_c = kappa * theta * (d_coef * tau - 2.0 * ln1p(z) / xi2);
    (big_c + big_d * nu0).exp()
}

fn heston_call_with_variance(
    p: &SvParams,
    s0: f64,
    nu0: f64,
    strike: f64,
    tau: f64,
) -> Result<f64> {
    let log_moneyness = (s0 / strike).ln();
    let integrand = |u: f64| {
        let phi = lewis_cf(u, tau, nu0, p.kappa_q, p.theta_q, p.xi, p.rho);
        let rot = Complex64::from_polar(1.0, u * log_moneyness);
        (rot * phi).re / (u * u + 0.25)
    };

    let abs_tol = 1e-15;
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut width = 8.0;
    let mut quiet_panels = 0;
    while quiet_panels < 2 {
        let hi = lo + width;
        let panel = integrate_adaptive(integrand, lo, hi, abs_tol, 1e-14, 2000)?;
        total += panel.value;
        let edge = integrand(hi).abs();
        if panel.value.abs() < abs_tol && edge < abs_tol {
            quiet_panels += 1;
        } else {
            quiet_panels = 0;
        }
        lo = hi;
        width *= 2.0;
        if lo > 1e7 {
            return Err(HedgeError::numeric(
                "heston_price",
                format!(
                    "characteristic-function integral did not decay by u = {lo:e} (K = {strike}, tau = {tau}, partial = {total:e})"
                ),
            ));
        }
    }
    let price = s0 - (s0 * strike).sqrt() / PI * total;
    if !price.is_finite() {
        return Err(HedgeError::numeric("heston_price", "non-finite price"));
    }
    Ok(price)
}

/// Heston price of a vanilla at zero rates and dividends.
pub fn heston_price(p: &SvParams, x: &SpotState, o: &VanillaOption) -> Result<f64> {
    validate_params(p).into_result()?;
    x.validate()?;
    o.validate()?;
    heston_price_unchecked(p, x.s0, x.nu0, o)
}

fn heston_price_unchecked(p: &SvParams, s0: f64, nu0: f64, o: &VanillaOption) -> Result<f64> {
    let call = heston_call_with_variance(p, s0, nu0, o.strike, o.maturity)?;
    Ok(match o.kind {
        OptionKind::Call => call,
        OptionKind::Put => call - s0 + o.strike,
    })
}

/// Spot Delta of the Heston price by central difference with bump `rel_bump·S0`.
pub fn heston_delta(p: &SvParams, x: &SpotState, o: &VanillaOption, rel_bump: f64) -> Result<f64> {
    validate_params(p).into_result()?;
    x.validate()?;
    o.validate()?;
    positive("bump", rel_bump)?;
    let h = rel_bump * x.s0;
    let up = heston_price_unchecked(p, x.s0 + h, x.nu0, o)?;
    let down = heston_price_unchecked(p, x.s0 - h, x.nu0, o)?;
    Ok((up - down) / (2.0 * h))
}

pub const DEFAULT_VEGA_BUMP: f64 = 1e-4;

/// Frozen Vegas: central difference of the Heston price in √ν, and the
/// Black–Scholes Vega at each option's Heston-implied volatility.
pub fn vega_profile(
    p: &SvParams,
    x: &SpotState,
    options: &[VanillaOption],
    bump: f64,
) -> Result<VegaProfile> {
    validate_params(p).into_result()?;
    x.validate()?;
    positive("vega bump", bump)?;
    let vol = x.nu0.sqrt();
    if bump >= vol {
        return Err(HedgeError::domain(format!(
            "vega bump {bump} must be below sqrt(nu0) = {vol}"
        )));
    }
    let mut vega_sv = Vec::with_capacity(options.len());
    let mut vega_bs = Vec::with_capacity(options.len());
    for o in options {
        o.validate()?;
        let up = heston_price_unchecked(p, x.s0, (vol + bump).powi(2), o)?;
        let down = heston_price_unchecked(p, x.s0, (vol - bump).powi(2), o)?;
        vega_sv.push((up - down) / (2.0 * bump));
        let price = heston_price_unchecked(p, x.s0, x.nu0, o)?;
        let iv = implied_vol(price, x.s0, o.strike, o.maturity, o.kind)?;
        vega_bs.push(bs_vega(x.s0, o.strike, o.maturity, iv)?);
    }
    VegaProfile::new(vega_sv, vega_bs)
}
