//! Biokinetic source terms.
//!
//! The builtin model is a denitrification process with two particulate
//! components `C = (X_OHO, X_U)` (ordinary heterotrophs and undegradable
//! organics) and three solubles `S = (S_NO3, S_S, S_N2)`. Other models plug in
//! through [`ReactionModel`].

use serde::{Deserialize, Serialize};
use sobol_burley::sample;

use crate::error::{Error, Result};

/// Bounds on the partial derivatives of the rates over the invariant region,
/// as required by the time-step restrictions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReactionBounds {
    /// `|∂R_C^(k)/∂C^(l)|`
    pub m_c: f64,
    /// `|∂R̃_C/∂C^(l)|`
    pub m_c_tilde: f64,
    /// `|∂R_S^(k)/∂S^(l)|`
    pub m_s: f64,
    /// `|∂R̃_C/∂S^(l)|` and `|∂R̃_S/∂S^(l)|`
    pub m_s_tilde: f64,
}

pub trait ReactionModel: Send + Sync {
    fn solids(&self) -> usize;
    fn solubles(&self) -> usize;

    /// Writes `R_C(C, S)` into `rc` and `R_S(C, S)` into `rs`.
    fn rates(&self, c: &[f64], s: &[f64], rc: &mut [f64], rs: &mut [f64]);

    fn bounds(&self) -> ReactionBounds;

    /// `(R̃_C, R̃_S)`, the sums of the solid and soluble rate vectors.
    fn aggregates(&self, c: &[f64], s: &[f64]) -> (f64, f64) {
        let mut rc = vec![0.0; self.solids()];
        let mut rs = vec![0.0; self.solubles()];
        self.rates(c, s, &mut rc, &mut rs);
        (rc.iter().sum(), rs.iter().sum())
    }
}

/// Modulation of the growth and decay terms near the maximal packing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZMode {
    #[default]
    Identity,
    /// `Z = clamp((X_max - X)/(X_max - X_Z), 0, 1)`.
    Ramp { x_z: f64 },
}

impl ZMode {
    pub fn ramp_default(x_max: f64) -> Self {
        ZMode::Ramp { x_z: 0.95 * x_max }
    }

    pub fn eval(&self, x: f64, x_max: f64) -> f64 {
        match *self {
            ZMode::Identity => 1.0,
            ZMode::Ramp { x_z } => ((x_max - x) / (x_max - x_z)).clamp(0.0, 1.0),
        }
    }

    /// Bound on `|∂(X_OHO Z(X))/∂C^(l)|` for `X_OHO ≤ X ≤ X_max`.
    fn factor(&self, x_max: f64) -> f64 {
        match *self {
            ZMode::Identity => 1.0,
            ZMode::Ramp { x_z } => 1.0 + x_max / (x_max - x_z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenitrificationParams {
    pub yield_coefficient: f64,
    /// Decay rate (1/s).
    pub decay: f64,
    pub undegradable_fraction: f64,
    /// Maximal specific growth rate (1/s).
    pub mu_max: f64,
    /// Half-saturation constants (kg/m³).
    pub k_no3: f64,
    pub k_s: f64,
}

impl Default for DenitrificationParams {
    fn default() -> Self {
        Self {
            yield_coefficient: 0.67,
            decay: 6.94e-6,
            undegradable_fraction: 0.2,
            mu_max: 5.56e-5,
            k_no3: 5e-4,
            k_s: 0.02,
        }
    }
}

impl DenitrificationParams {
    pub fn validate(&self) -> Result<()> {
        let path = |f: &str| format!("reactions.{f}");
        let y = self.yield_coefficient;
        if !(y > 0.0 && y < 1.0) {
            return Err(Error::config(path("yield_coefficient"), "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.undegradable_fraction) {
            return Err(Error::config(path("undegradable_fraction"), "must lie in [0, 1]"));
        }
        for (name, v) in [("decay", self.decay), ("mu_max", self.mu_max)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(path(name), "must be nonnegative"));
            }
        }
        for (name, v) in [("k_no3", self.k_no3), ("k_s", self.k_s)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(path(name), "must be positive"));
            }
        }
        Ok(())
    }

    /// `Ȳ = (1 - Y)/(2.86 Y)`.
    pub fn y_bar(&self) -> f64 {
        let y = self.yield_coefficient;
        (1.0 - y) / (2.86 * y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denitrification {
    params: DenitrificationParams,
    z_mode: ZMode,
    x_max: f64,
    y_bar: f64,
}

impl Denitrification {
    pub fn new(params: DenitrificationParams, z_mode: ZMode, x_max: f64) -> Result<Self> {
        params.validate()?;
        if let ZMode::Ramp { x_z } = z_mode {
            if !(x_z > 0.0 && x_z < x_max) {
                return Err(Error::config("reactions.z_mode.x_z", "must lie in (0, X_max)"));
            }
        }
        Ok(Self {
            params,
            z_mode,
            x_max,
            y_bar: params.y_bar(),
        })
    }

    pub fn params(&self) -> &DenitrificationParams {
        &self.params
    }

    pub fn z_mode(&self) -> ZMode {
        self.z_mode
    }

    pub fn y_bar(&self) -> f64 {
        self.y_bar
    }

    /// `μ(S) = μ_max S_NO3/(K_NO3 + S_NO3) · S_S/(K_S + S_S)`.
    pub fn growth_rate(&self, s: &[f64]) -> f64 {
        let p = &self.params;
        let (no3, ss) = (s[0].max(0.0), s[1].max(0.0));
        p.mu_max * (no3 * ss) / ((p.k_no3 + no3) * (p.k_s + ss))
    }
}

impl ReactionModel for Denitrification {
    fn solids(&self) -> usize {
        2
    }

    fn solubles(&self) -> usize {
        3
    }

    fn rates(&self, c: &[f64], s: &[f64], rc: &mut [f64], rs: &mut [f64]) {
        let p = &self.params;
        let oho = c[0];
        let x = c[0] + c[1];
        let mu = self.growth_rate(s);
        let z = self.z_mode.eval(x, self.x_max);
        rc[0] = oho * z * (mu - p.decay);
        rc[1] = oho * z * p.undegradable_fraction * p.decay;
        rs[0] = -oho * self.y_bar * mu;
        rs[1] = oho * ((1.0 - p.undegradable_fraction) * p.decay - mu / p.yield_coefficient);
        rs[2] = oho * self.y_bar * mu;
    }

    /// Analytic bounds using `0 ≤ μ ≤ μ_max`, `0 ≤ X_OHO ≤ X_max` and
    /// `|∂μ/∂S_NO3| ≤ μ_max/K_NO3`, `|∂μ/∂S_S| ≤ μ_max/K_S` (attained at a
    /// vanishing substrate with the other one saturated).
    ///
    /// Each constant is the largest entry of the relevant Jacobian block, not
    /// only its diagonal.
    fn bounds(&self) -> ReactionBounds {
        let p = &self.params;
        let zf = self.z_mode.factor(self.x_max);
        let fp = p.undegradable_fraction;
        let m_c = (p.mu_max - p.decay).abs().max(p.decay).max(fp * p.decay) * zf;
        let m_c_tilde = (p.mu_max - (1.0 - fp) * p.decay)
            .abs()
            .max((1.0 - fp) * p.decay)
            * zf;
        let dmu = (p.mu_max / p.k_no3).max(p.mu_max / p.k_s);
        let m_s = self.x_max * dmu * self.y_bar.max(1.0 / p.yield_coefficient);
        let m_s_tilde = (self.x_max * dmu).max(m_s);
        ReactionBounds {
            m_c,
            m_c_tilde,
            m_s,
            m_s_tilde,
        }
    }
}

/// No reactions; the given numbers of solid and soluble components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inert {
    pub solids: usize,
    pub solubles: usize,
}

impl ReactionModel for Inert {
    fn solids(&self) -> usize {
        self.solids
    }

    fn solubles(&self) -> usize {
        self.solubles
    }

    fn rates(&self, _c: &[f64], _s: &[f64], rc: &mut [f64], rs: &mut [f64]) {
        rc.fill(0.0);
        rs.fill(0.0);
    }

    fn bounds(&self) -> ReactionBounds {
        ReactionBounds::default()
    }
}

/// Derivative bounds of an arbitrary model estimated by central differences
/// at `points` scrambled Sobol points of `C ∈ [0, X_max]^{k_C}` with
/// `ΣC ≤ X_max` and `S ∈ Π[0, s_upper^(k)]`, inflated by 5%.
pub fn sampled_bounds(
    model: &dyn ReactionModel,
    x_max: f64,
    s_upper: &[f64],
    points: u32,
) -> ReactionBounds {
    let (kc, ks) = (model.solids(), model.solubles());
    assert_eq!(s_upper.len(), ks);
    let mut c = vec![0.0; kc];
    let mut s = vec![0.0; ks];
    let mut rc_p = vec![0.0; kc];
    let mut rs_p = vec![0.0; ks];
    let mut rc_m = vec![0.0; kc];
    let mut rs_m = vec![0.0; ks];
    let mut b = ReactionBounds::default();
    let mut i = 0u32;
    while i < points {
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = x_max * sample(i, k as u32, 0x5eed) as f64;
        }
        let x: f64 = c.iter().sum();
        if x > x_max {
            c.iter_mut().for_each(|ck| *ck *= x_max / x);
        }
        for (k, sk) in s.iter_mut().enumerate() {
            *sk = s_upper[k] * sample(i, (kc + k) as u32, 0x5eed) as f64;
        }
        for l in 0..kc + ks {
            let base = if l < kc { c[l] } else { s[l - kc] };
            let h = 1e-6 * base.abs().max(1e-6);
            let lo = (base - h).max(0.0);
            let hi = base + h;
            set(&mut c, &mut s, l, hi);
            model.rates(&c, &s, &mut rc_p, &mut rs_p);
            set(&mut c, &mut s, l, lo);
            model.rates(&c, &s, &mut rc_m, &mut rs_m);
            set(&mut c, &mut s, l, base);
            let span = hi - lo;
            let dc = rc_p.iter().zip(&rc_m).map(|(p, m)| ((p - m) / span).abs());
            let ds = rs_p.iter().zip(&rs_m).map(|(p, m)| ((p - m) / span).abs());
            let dc_sum = (rc_p.iter().sum::<f64>() - rc_m.iter().sum::<f64>()) / span;
            let ds_sum = (rs_p.iter().sum::<f64>() - rs_m.iter().sum::<f64>()) / span;
            if l < kc {
                b.m_c = dc.fold(b.m_c, f64::max);
                b.m_c_tilde = b.m_c_tilde.max(dc_sum.abs());
            } else {
                b.m_s = ds.fold(b.m_s, f64::max);
                b.m_s_tilde = b.m_s_tilde.max(dc_sum.abs()).max(ds_sum.abs());
            }
        }
        i += 1;
    }
    ReactionBounds {
        m_c: 1.05 * b.m_c,
        m_c_tilde: 1.05 * b.m_c_tilde,
        m_s: 1.05 * b.m_s,
        m_s_tilde: 1.05 * b.m_s_tilde,
    }
}

fn set(c: &mut [f64], s: &mut [f64], l: usize, v: f64) {
    if l < c.len() {
        c[l] = v;
    } else {
        s[l - c.len()] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model() -> Denitrification {
        Denitrification::new(DenitrificationParams::default(), ZMode::Identity, 30.0).unwrap()
    }

    #[test]
    fn growth_rate_values() {
        let m = model();
        assert_relative_eq!(m.growth_rate(&[5e-4, 0.02, 0.0]), 5.56e-5 / 4.0, max_relative = 1e-14);
        assert_eq!(m.growth_rate(&[0.0, 1.0, 0.0]), 0.0);
        assert_relative_eq!(m.growth_rate(&[6e-3, 9e-4, 0.0]), 2.210084652189915e-6, max_relative = 1e-12);
    }

    #[test]
    fn rate_values() {
        let m = model();
        assert_relative_eq!(m.y_bar(), 0.1722158438576349, max_relative = 1e-14);
        let (mut rc, mut rs) = ([0.0; 2], [0.0; 3]);
        m.rates(&[1.0, 0.0], &[6e-3, 9e-4, 0.0], &mut rc, &mut rs);
        assert_relative_eq!(rs[0], -3.806115933736937e-7, max_relative = 1e-12);
        assert_eq!(rs[0] + rs[2], 0.0);

        m.rates(&[0.0, 3.0], &[6e-3, 9e-4, 0.0], &mut rc, &mut rs);
        assert!(rc.iter().chain(&rs).all(|&r| r == 0.0));

        let b = 6.94e-6;
        m.rates(&[2.0, 1.0], &[0.0; 3], &mut rc, &mut rs);
        assert_relative_eq!(rc[0], -2.0 * b);
        assert_relative_eq!(rc[1], 2.0 * 0.2 * b);
        assert_eq!(rs[0], 0.0);
        assert_relative_eq!(rs[1], 2.0 * 0.8 * b);
        assert_eq!(rs[2], 0.0);
    }

    #[test]
    fn aggregate_identities() {
        let m = model();
        let c = [4.0, 1.5];
        let s = [1e-3, 0.05, 2e-3];
        let (mut rc, mut rs) = ([0.0; 2], [0.0; 3]);
        m.rates(&c, &s, &mut rc, &mut rs);
        let (rct, rst) = m.aggregates(&c, &s);
        let p = m.params();
        let mu = m.growth_rate(&s);
        assert_relative_eq!(rct, (mu - (1.0 - p.undegradable_fraction) * p.decay) * c[0], max_relative = 1e-14);
        assert_relative_eq!(rst, rs[1], max_relative = 1e-12);
        assert_eq!(m.aggregates(&[0.0, 2.0], &s), (0.0, 0.0));
    }

    #[test]
    fn ramp_z() {
        let z = ZMode::ramp_default(30.0);
        assert_eq!(z.eval(30.0, 30.0), 0.0);
        assert_eq!(z.eval(28.5, 30.0), 1.0);
        assert_eq!(z.eval(10.0, 30.0), 1.0);
        assert_relative_eq!(z.eval(29.25, 30.0), 0.5);
    }

    #[test]
    fn analytic_bounds() {
        let b = model().bounds();
        let p = DenitrificationParams::default();
        assert!(b.m_c >= p.mu_max - p.decay);
        assert_relative_eq!(b.m_c_tilde, p.mu_max - 0.8 * p.decay);
        // cross term ∂R_S^(2)/∂S_NO3 = X_OHO μ'/Y dominates
        assert_relative_eq!(b.m_s, 30.0 * p.mu_max / p.k_no3 / p.yield_coefficient, max_relative = 1e-14);
        assert!((1.0 / b.m_s - 0.2).abs() < 0.01);
    }

    #[test]
    fn analytic_bounds_dominate_sampling() {
        for z in [ZMode::Identity, ZMode::ramp_default(30.0)] {
            let m = Denitrification::new(DenitrificationParams::default(), z, 30.0).unwrap();
            let a = m.bounds();
            let s = sampled_bounds(&m, 30.0, &[0.05, 0.5, 0.05], 4096);
            assert!(s.m_c <= 1.05 * a.m_c + 1e-15, "{s:?} {a:?}");
            assert!(s.m_c_tilde <= 1.05 * a.m_c_tilde + 1e-15);
            assert!(s.m_s <= 1.05 * a.m_s);
            assert!(s.m_s_tilde <= 1.05 * a.m_s_tilde);
            assert!(s.m_s > 0.5 * a.m_s, "sampling should approach the cross-term bound");
        }
    }

    #[test]
    fn zero_growth_bounds() {
        let p = DenitrificationParams { mu_max: 0.0, ..Default::default() };
        let b = Denitrification::new(p, ZMode::Identity, 30.0).unwrap().bounds();
        assert_relative_eq!(b.m_c, p.decay);
        assert_eq!(b.m_s, 0.0);
        assert_eq!(Inert { solids: 2, solubles: 3 }.bounds(), ReactionBounds::default());
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = DenitrificationParams { yield_coefficient: 1.2, ..Default::default() };
        assert!(Denitrification::new(p, ZMode::Identity, 30.0).is_err());
        let z = ZMode::Ramp { x_z: 31.0 };
        assert!(Denitrification::new(DenitrificationParams::default(), z, 30.0).is_err());
    }
}
