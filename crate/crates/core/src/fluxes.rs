//! Numerical fluxes through the face between cells `j` and `j + 1`.
//!
//! The solids flux is upwinded on the sign of the face velocity
//! `v = q + γ(v_hs(X_{j+1}) - J)`; the solubles are carried with the liquid
//! flux `F_L = ρ_X q - F_X`, upwinded on its own sign, plus central diffusion.

use crate::constitutive::ConstitutiveSet;
use crate::error::{Error, Result};

#[inline]
pub fn pos(a: f64) -> f64 {
    a.max(0.0)
}

#[inline]
pub fn neg(a: f64) -> f64 {
    a.min(0.0)
}

/// Compression term `J = (D_C(X_{j+1}) - D_C(X_j))/Δz` (m/s).
pub fn jc_face(cs: &ConstitutiveSet, x_j: f64, x_j1: f64, dz: f64) -> f64 {
    (cs.dc_primitive(x_j1) - cs.dc_primitive(x_j)) / dz
}

/// Solids face velocity `v_X` (m/s).
pub fn vx_face(cs: &ConstitutiveSet, x_j: f64, x_j1: f64, q: f64, gamma: f64, dz: f64) -> f64 {
    if gamma == 0.0 {
        return q;
    }
    q + gamma * (cs.vhs(x_j1) - jc_face(cs, x_j, x_j1, dz))
}

/// Same as [`vx_face`] from precomputed `v_hs(X_{j+1})`, `D_C(X_j)` and
/// `D_C(X_{j+1})`.
#[inline]
pub fn vx_from_parts(q: f64, gamma: f64, vhs_j1: f64, dc_j: f64, dc_j1: f64, dz: f64) -> f64 {
    if gamma == 0.0 {
        return q;
    }
    q + gamma * (vhs_j1 - (dc_j1 - dc_j) / dz)
}

/// Writes `Φ_C = A(v⁻ C_{j+1} + v⁺ C_j)` into `out` and returns
/// `F_X = v⁻ X_{j+1} + v⁺ X_j`.
#[inline]
pub fn phi_c_face(c_j: &[f64], c_j1: &[f64], x_j: f64, x_j1: f64, v: f64, area: f64, out: &mut [f64]) -> f64 {
    let (vm, vp) = (neg(v), pos(v));
    for ((o, a), b) in out.iter_mut().zip(c_j).zip(c_j1) {
        *o = area * (vm * b + vp * a);
    }
    vm * x_j1 + vp * x_j
}

/// Soluble face quantities that do not depend on the soluble state.
#[derive(Debug, Clone, Copy)]
pub struct LiquidFace {
    pub f_x: f64,
    pub q: f64,
    pub area: f64,
    pub gamma: f64,
    pub dz: f64,
    pub rho_x: f64,
}

/// Writes `Φ_S` into `out`:
/// `A(F_L⁻ S_{j+1}/(ρ_X - X_{j+1}) + F_L⁺ S_j/(ρ_X - X_j) - γ d (S_{j+1} - S_j)/Δz)`.
#[inline]
pub fn phi_s_face(
    s_j: &[f64],
    s_j1: &[f64],
    x_j: f64,
    x_j1: f64,
    face: &LiquidFace,
    diffusion: &[f64],
    out: &mut [f64],
) -> Result<()> {
    if !(face.rho_x - x_j > 0.0 && face.rho_x - x_j1 > 0.0) {
        return Err(Error::InvariantBreach {
            cell: usize::MAX,
            time: f64::NAN,
            detail: format!("solids concentration {} reaches the solids density", x_j.max(x_j1)),
        });
    }
    phi_s_face_unchecked(s_j, s_j1, x_j, x_j1, face, diffusion, out);
    Ok(())
}

/// [`phi_s_face`] for states already known to satisfy `X < ρ_X`.
#[inline]
pub fn phi_s_face_unchecked(
    s_j: &[f64],
    s_j1: &[f64],
    x_j: f64,
    x_j1: f64,
    face: &LiquidFace,
    diffusion: &[f64],
    out: &mut [f64],
) {
    let f_l = face.rho_x * face.q - face.f_x;
    let a = if f_l < 0.0 { f_l / (face.rho_x - x_j1) } else { 0.0 };
    let b = if f_l > 0.0 { f_l / (face.rho_x - x_j) } else { 0.0 };
    let gd = face.gamma / face.dz;
    for (((o, lo), hi), d) in out.iter_mut().zip(s_j).zip(s_j1).zip(diffusion) {
        let mut flux = a * hi + b * lo;
        if gd != 0.0 && *d != 0.0 {
            flux -= gd * d * (hi - lo);
        }
        *o = face.area * flux;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::ConstitutiveParams;
    use approx::assert_relative_eq;

    fn cs() -> ConstitutiveSet {
        ConstitutiveSet::new(ConstitutiveParams::default()).unwrap()
    }

    #[test]
    fn compression_term() {
        let c = cs();
        assert_eq!(jc_face(&c, 7.0, 7.0, 0.05), 0.0);
        assert_eq!(jc_face(&c, 2.0, 4.5, 0.05), 0.0);
        assert_relative_eq!(jc_face(&c, 5.0, 6.0, 0.05), 5.958227616187412e-4, max_relative = 1e-10);
        let dmax = c.dc_primitive(30.0);
        for (a, b) in [(0.0, 30.0), (30.0, 0.0), (12.0, 3.0)] {
            assert!(jc_face(&c, a, b, 0.1).abs() <= dmax / 0.1);
        }
    }

    #[test]
    fn face_velocity() {
        let c = cs();
        assert_eq!(vx_face(&c, 10.0, 20.0, -1e-4, 0.0, 0.05), -1e-4);
        assert_relative_eq!(vx_face(&c, 1.0, 2.0, 0.0, 1.0, 0.05), c.vhs(2.0));
        assert_relative_eq!(
            vx_face(&c, 2.0, 3.87, -2.916666666666667e-4, 1.0, 0.05),
            5.883333333333333e-4,
            max_relative = 1e-12
        );
        let v = vx_from_parts(1e-5, 1.0, c.vhs(6.0), c.dc_primitive(5.5), c.dc_primitive(6.0), 0.05);
        assert_relative_eq!(v, vx_face(&c, 5.5, 6.0, 1e-5, 1.0, 0.05), max_relative = 1e-15);
    }

    #[test]
    fn solids_flux_cases() {
        let mut out = [0.0; 2];
        assert_eq!(phi_c_face(&[0.0, 0.0], &[0.0, 0.0], 0.0, 0.0, 1e-3, 400.0, &mut out), 0.0);
        assert_eq!(out, [0.0, 0.0]);

        let c = cs();
        let mut one = [0.0];
        let v = vx_face(&c, 2.0, 3.0, 0.0, 1.0, 0.1);
        phi_c_face(&[2.0], &[3.0], 2.0, 3.0, v, 400.0, &mut one);
        assert_relative_eq!(one[0], 400.0 * c.vhs(3.0) * 2.0, max_relative = 1e-15);

        let f = phi_c_face(&[1.0, 0.5], &[2.0, 1.0], 1.5, 3.0, -2e-4, 100.0, &mut out);
        assert_eq!(out, [100.0 * -2e-4 * 2.0, 100.0 * -2e-4 * 1.0]);
        assert_relative_eq!(out[0] + out[1], 100.0 * f);
    }

    #[test]
    fn soluble_flux_cases() {
        let face = LiquidFace { f_x: 3e-3, q: 1e-4, area: 400.0, gamma: 1.0, dz: 0.1, rho_x: 1050.0 };
        let mut out = [1.0; 3];
        phi_s_face(&[0.0; 3], &[0.0; 3], 4.0, 5.0, &face, &[1e-5; 3], &mut out).unwrap();
        assert_eq!(out, [0.0; 3]);

        let face = LiquidFace { f_x: 0.0, q: -3e-4, area: 400.0, gamma: 0.0, dz: 0.1, rho_x: 1050.0 };
        phi_s_face(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], 0.0, 0.0, &face, &[1e-5; 3], &mut out).unwrap();
        for k in 0..3 {
            assert_relative_eq!(out[k], 400.0 * -3e-4 * [4.0, 5.0, 6.0][k], max_relative = 1e-15);
        }

        let face = LiquidFace { f_x: 0.0, q: 0.0, area: 400.0, gamma: 1.0, dz: 0.1, rho_x: 1050.0 };
        phi_s_face(&[2.0; 3], &[2.0; 3], 0.0, 0.0, &face, &[1e-5; 3], &mut out).unwrap();
        assert_eq!(out, [0.0; 3]);

        let bad = LiquidFace { rho_x: 20.0, ..face };
        assert!(phi_s_face(&[2.0; 3], &[2.0; 3], 25.0, 0.0, &bad, &[0.0; 3], &mut out).is_err());
    }
}
