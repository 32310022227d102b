//! Material laws of the sludge: hindered settling, effective solids stress and
//! the compression coefficient with its primitive.
//!
//! ```text
//! v_hs(X)  = v0 / (1 + (X/X̄)^η)
//! σe(X)    = α (X - Xc)⁺
//! d_C(X)   = v_hs(X) ρX σe'(X) / (X g Δρ)
//! D_C(X)   = ∫_{Xc}^X d_C(s) ds
//! f(X)     = X v_hs(X)
//! ```
//!
//! `σe'` takes its left value 0 at the kink `X = Xc`, so `d_C` vanishes on all
//! of `[0, Xc]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{maximize, PrimitiveTable};

const TABLE_NODES: usize = 4096;

/// Parameters of the settling and compression laws (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstitutiveParams {
    /// Settling velocity of a single floc, m/s.
    pub v0: f64,
    /// Concentration halving `v_hs`, kg/m³.
    pub x_bar: f64,
    pub eta: f64,
    /// Critical concentration where the floc network starts to bear stress, kg/m³.
    pub x_crit: f64,
    /// Slope of the effective solids stress, m²/s².
    pub alpha: f64,
    pub rho_x: f64,
    pub rho_l: f64,
    pub g: f64,
    pub x_max: f64,
}

impl Default for ConstitutiveParams {
    fn default() -> Self {
        Self {
            v0: 1.76e-3,
            x_bar: 3.87,
            eta: 3.58,
            x_crit: 5.0,
            alpha: 0.2,
            rho_x: 1050.0,
            rho_l: 998.0,
            g: 9.81,
            x_max: 30.0,
        }
    }
}

impl ConstitutiveParams {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        let check = |ok: bool, field: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("constitutive.{field}"), msg))
            }
        };
        let finite = [
            p.v0, p.x_bar, p.eta, p.x_crit, p.alpha, p.rho_x, p.rho_l, p.g, p.x_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        check(finite, "*", "all parameters must be finite")?;
        check(p.v0 > 0.0, "v0", "must be positive")?;
        check(p.x_bar > 0.0, "x_bar", "must be positive")?;
        check(p.eta > 1.0, "eta", "must exceed 1")?;
        check(p.alpha >= 0.0, "alpha", "must be nonnegative")?;
        check(p.g > 0.0, "g", "must be positive")?;
        check(p.x_crit > 0.0, "x_crit", "must be positive")?;
        check(p.x_crit < p.x_max, "x_max", "must exceed x_crit")?;
        check(p.x_max < p.rho_x, "x_max", "must stay below rho_x")?;
        check(p.rho_l > 0.0 && p.rho_l < p.rho_x, "rho_l", "must satisfy 0 < rho_l < rho_x")?;
        Ok(())
    }

    /// `r = ρL/ρX`.
    pub fn density_ratio(&self) -> f64 {
        self.rho_l / self.rho_x
    }

    /// `ρX α / (g Δρ)`, the factor shared by `d_C` and the reference scheme's `D`.
    pub fn compression_factor(&self) -> f64 {
        self.rho_x * self.alpha / (self.g * (self.rho_x - self.rho_l))
    }
}

/// Sup-norms over `[0, X_max]` needed by the CFL budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstitutiveNorms {
    /// `‖v_hs‖∞ = v_hs(0) = v0`.
    pub vhs: f64,
    /// `‖v_hs'‖∞`.
    pub vhs_prime: f64,
    /// `‖d_C‖∞` (attained as the right limit at `Xc`).
    pub dc: f64,
    /// `D_C(X_max)`.
    pub dc_primitive_max: f64,
    /// `‖f‖∞ = f(X̂)`.
    pub flux: f64,
    /// `‖f'‖∞`.
    pub flux_prime: f64,
    /// `‖D'‖∞` for the reference scheme's compression primitive.
    pub xp_primitive_prime: f64,
    /// `D(X_max)` for the reference scheme.
    pub xp_primitive_max: f64,
}

/// Validated material laws with their tabulated primitives.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct ConstitutiveSet {
    params: ConstitutiveParams,
    compression: f64,
    dc_table: PrimitiveTable,
    xp_table: PrimitiveTable,
    x_hat: f64,
    norms: ConstitutiveNorms,
}

impl ConstitutiveSet {
    pub fn new(params: ConstitutiveParams) -> Result<Self> {
        params.validate()?;
        let compression = params.compression_factor();
        let p = params.clone();
        let vhs = move |x: f64| p.v0 / (1.0 + (x.max(0.0) / p.x_bar).powf(p.eta));
        // Right-continuous extensions on [Xc, X_max]; both are smooth there.
        let dc_right = |x: f64| compression * vhs(x) / x;
        let xp_right = |x: f64| compression * vhs(x);
        let dc_table = PrimitiveTable::build(dc_right, params.x_crit, params.x_max, TABLE_NODES);
        let xp_table = PrimitiveTable::build(xp_right, params.x_crit, params.x_max, TABLE_NODES);
        let x_hat = params.x_bar * (params.eta - 1.0).powf(-1.0 / params.eta);

        let mut set = Self {
            params,
            compression,
            dc_table,
            xp_table,
            x_hat,
            norms: ConstitutiveNorms {
                vhs: 0.0,
                vhs_prime: 0.0,
                dc: 0.0,
                dc_primitive_max: 0.0,
                flux: 0.0,
                flux_prime: 0.0,
                xp_primitive_prime: 0.0,
                xp_primitive_max: 0.0,
            },
        };
        let xm = set.params.x_max;
        let xc = set.params.x_crit;
        set.norms = ConstitutiveNorms {
            vhs: maximize(|x| set.vhs(x), 0.0, xm).1,
            vhs_prime: maximize(|x| set.vhs_prime(x).abs(), 0.0, xm).1,
            dc: if compression > 0.0 {
                maximize(|x| compression * set.vhs(x) / x, xc, xm).1
            } else {
                0.0
            },
            dc_primitive_max: set.dc_table.total(),
            flux: set.flux(set.x_hat.min(xm)),
            flux_prime: maximize(|x| set.flux_prime(x).abs(), 0.0, xm).1,
            xp_primitive_prime: maximize(|x| compression * set.vhs(x), xc, xm).1,
            xp_primitive_max: set.xp_table.total(),
        };
        Ok(set)
    }

    pub fn params(&self) -> &ConstitutiveParams {
        &self.params
    }

    pub fn norms(&self) -> &ConstitutiveNorms {
        &self.norms
    }

    pub fn x_max(&self) -> f64 {
        self.params.x_max
    }

    pub fn rho_x(&self) -> f64 {
        self.params.rho_x
    }

    pub fn rho_l(&self) -> f64 {
        self.params.rho_l
    }

    /// Maximizer `X̂ = X̄ (η-1)^{-1/η}` of the batch flux.
    pub fn x_hat(&self) -> f64 {
        self.x_hat
    }

    fn check(&self, what: &'static str, x: f64) -> Result<()> {
        if (0.0..=self.params.x_max).contains(&x) {
            Ok(())
        } else {
            Err(Error::Domain {
                what,
                value: x,
                lo: 0.0,
                hi: self.params.x_max,
            })
        }
    }

    /// Hindered settling velocity, domain-checked.
    pub fn hindered_settling(&self, x: f64) -> Result<f64> {
        self.check("X", x)?;
        Ok(self.vhs(x))
    }

    /// Derivative of the effective solids stress, domain-checked.
    pub fn sigma_e_prime(&self, x: f64) -> Result<f64> {
        self.check("X", x)?;
        Ok(self.sigma_prime(x))
    }

    /// Compression coefficient `d_C`, domain-checked.
    pub fn d_c(&self, x: f64) -> Result<f64> {
        self.check("X", x)?;
        Ok(self.dc(x))
    }

    /// Primitive `D_C`, domain-checked.
    pub fn big_d_c(&self, x: f64) -> Result<f64> {
        self.check("X", x)?;
        Ok(self.dc_primitive(x))
    }

    /// Batch flux `f(X) = X v_hs(X)`, domain-checked.
    pub fn batch_flux(&self, x: f64) -> Result<f64> {
        self.check("X", x)?;
        Ok(self.flux(x))
    }

    /// `f'(X)`, domain-checked.
    pub fn batch_flux_derivative(&self, x: f64) -> Result<f64> {
        self.check("X", x)?;
        Ok(self.flux_prime(x))
    }

    // Unchecked evaluations for the stepping kernels. Negative round-off is
    // treated as zero.

    #[inline]
    pub fn vhs(&self, x: f64) -> f64 {
        let p = &self.params;
        if x <= 0.0 {
            return p.v0;
        }
        p.v0 / (1.0 + (p.eta * (x / p.x_bar).ln()).exp())
    }

    #[inline]
    pub fn vhs_prime(&self, x: f64) -> f64 {
        let p = &self.params;
        let u = x.max(0.0) / p.x_bar;
        let ue = u.powf(p.eta);
        if u == 0.0 {
            return 0.0;
        }
        -p.v0 * p.eta * ue / (u * p.x_bar) / ((1.0 + ue) * (1.0 + ue))
    }

    #[inline]
    pub fn sigma_prime(&self, x: f64) -> f64 {
        if x > self.params.x_crit {
            self.params.alpha
        } else {
            0.0
        }
    }

    #[inline]
    pub fn dc(&self, x: f64) -> f64 {
        if x <= self.params.x_crit {
            0.0
        } else {
            self.compression * self.vhs(x) / x
        }
    }

    #[inline]
    pub fn dc_primitive(&self, x: f64) -> f64 {
        self.dc_table.eval(x)
    }

    #[inline]
    pub fn flux(&self, x: f64) -> f64 {
        x * self.vhs(x)
    }

    #[inline]
    pub fn flux_prime(&self, x: f64) -> f64 {
        self.vhs(x) + x * self.vhs_prime(x)
    }

    /// Compression primitive of the reference scheme,
    /// `D(X) = ρX/(gΔρ) ∫_{Xc}^X v_hs σe' ds` (no `1/X` factor).
    #[inline]
    pub fn xp_primitive(&self, x: f64) -> f64 {
        self.xp_table.eval(x)
    }
}
