//! Herschel-Bulkley constitutive law and the closures the slide solver needs:
//! reference strain rate, shear-layer profile factors, reduced gravity, and
//! the drag / basal-friction stresses.
//!
//! The shear layer is assumed to carry the steady Herschel-Bulkley profile
//! `u(ξ) = u_p (1 - (1 - ξ)^p)` with `p = (n + 1) / n` and `ξ` the height
//! above the bed scaled by the layer thickness. The profile mean gives the
//! shear-to-plug velocity ratio and its mean square the momentum form factor.

use crate::error::{Error, Result};
use crate::num::{hypot2, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HerschelBulkleyParams<T> {
    /// Yield strength, Pa.
    pub tau_y: T,
    /// Consistency, Pa·sⁿ.
    pub mu: T,
    /// Fluidity (flow) index; `n = 1` is the Bingham limit.
    pub n: T,
}

impl<T: Real> HerschelBulkleyParams<T> {
    pub fn new(tau_y: T, mu: T, n: T) -> Result<Self> {
        if !(tau_y > T::zero() && tau_y.is_finite()) {
            return Err(Error::Domain(format!("yield strength must be > 0, got {tau_y}")));
        }
        if !(mu > T::zero() && mu.is_finite()) {
            return Err(Error::Domain(format!("consistency must be > 0, got {mu}")));
        }
        check_flow_index(n)?;
        Ok(Self { tau_y, mu, n })
    }
}

fn check_flow_index<T: Real>(n: T) -> Result<()> {
    if n > T::zero() && n <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("flow index n must lie in (0, 1], got {n}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams<T> {
    /// Slide bulk density, kg/m³.
    pub rho_d: T,
    /// Ambient water density, kg/m³.
    pub rho_w: T,
    /// Added-mass coefficient.
    pub c_m: T,
    /// Skin-friction drag coefficient.
    pub c_f: T,
    /// Pressure (form) drag coefficient.
    pub c_p: T,
    /// Gravitational acceleration, m/s².
    pub g: T,
}

impl<T: Real> MaterialParams<T> {
    pub fn new(rho_d: T, rho_w: T, c_m: T, c_f: T, c_p: T, g: T) -> Result<Self> {
        if !(rho_w > T::zero()) {
            return Err(Error::Domain(format!("water density must be > 0, got {rho_w}")));
        }
        if !(rho_d > rho_w) || !rho_d.is_finite() {
            return Err(Error::Domain(format!(
                "slide density {rho_d} must exceed water density {rho_w}"
            )));
        }
        for (name, v) in [("c_m", c_m), ("c_f", c_f), ("c_p", c_p)] {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(g > T::zero() && g.is_finite()) {
            return Err(Error::Domain(format!("gravity must be > 0, got {g}")));
        }
        Ok(Self {
            rho_d,
            rho_w,
            c_m,
            c_f,
            c_p,
            g,
        })
    }

    /// Inertia multiplier `1 + C_m ρ_w / ρ_d`.
    #[inline]
    pub fn added_mass_factor(&self) -> T {
        T::one() + self.c_m * self.rho_w / self.rho_d
    }
}

/// Simple-shear strain rate for a given shear stress.
pub fn hb_strain_rate<T: Real>(tau: T, p: &HerschelBulkleyParams<T>) -> T {
    let excess = tau.abs() / p.tau_y - T::one();
    if excess <= T::zero() {
        return T::zero();
    }
    let rate = reference_strain_rate(p) * excess.powf(T::one() / p.n);
    if tau < T::zero() {
        -rate
    } else {
        rate
    }
}

/// `γ̇_r = (τ_y / μ)^(1/n)`.
pub fn reference_strain_rate<T: Real>(p: &HerschelBulkleyParams<T>) -> T {
    (p.tau_y / p.mu).powf(T::one() / p.n)
}

/// `β = (1 + 1/n)^n`.
pub fn shape_factor_beta<T: Real>(n: T) -> Result<T> {
    check_flow_index(n)?;
    Ok((T::one() + T::one() / n).powf(n))
}

/// Momentum form factor `α = <u²> / <u>²` of the shear-layer profile.
///
/// With `p = (n+1)/n` the mean is `p/(p+1)` and the mean square is
/// `1 - 2/(p+1) + 1/(2p+1)`; their ratio simplifies to `2(2n+1)/(3n+2)`.
pub fn form_factor_alpha<T: Real>(n: T) -> Result<T> {
    check_flow_index(n)?;
    let two = T::two();
    Ok(two * (two * n + T::one()) / (T::lit(3.0) * n + two))
}

/// Ratio of mean shear-layer velocity to plug velocity, `(n+1)/(2n+1)`.
pub fn shear_velocity_ratio<T: Real>(n: T) -> Result<T> {
    check_flow_index(n)?;
    Ok((n + T::one()) / (T::two() * n + T::one()))
}

/// Submerged (buoyancy-reduced) gravity `g (1 - ρ_w / ρ_d)`.
pub fn reduced_gravity<T: Real>(m: &MaterialParams<T>) -> T {
    m.g * (T::one() - m.rho_w / m.rho_d)
}

/// Skin-friction drag `½ C_F ρ_w u ‖u‖`.
pub fn friction_drag<T: Real>(u: [T; 2], m: &MaterialParams<T>) -> [T; 2] {
    let k = T::half() * m.c_f * m.rho_w * hypot2(u[0], u[1]);
    [k * u[0], k * u[1]]
}

/// Pressure drag `½ C_P ρ_w max(0, -u·∇H) u`; only acts where the flow
/// thins in its direction of travel.
pub fn pressure_drag<T: Real>(u: [T; 2], grad_h: [T; 2], m: &MaterialParams<T>) -> [T; 2] {
    let thinning = -(u[0] * grad_h[0] + u[1] * grad_h[1]);
    let k = T::half() * m.c_p * m.rho_w * thinning.max(T::zero());
    [k * u[0], k * u[1]]
}

/// Basal factor `f_s = β (‖u_p‖ / (γ̇_r H_s))^n`.
pub fn basal_friction_factor<T: Real>(u_p_mag: T, h_s: T, p: &HerschelBulkleyParams<T>) -> Result<T> {
    if u_p_mag <= T::zero() {
        return Ok(T::zero());
    }
    if h_s <= T::zero() {
        return Err(Error::DegenerateLayer {
            h_s: h_s.as_f64(),
            speed: u_p_mag.as_f64(),
        });
    }
    let beta = shape_factor_beta(p.n)?;
    Ok(beta * (u_p_mag / (reference_strain_rate(p) * h_s)).powf(p.n))
}

/// Precomputed closure constants for one parameter set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedFactors<T> {
    pub gamma_r: T,
    pub beta: T,
    pub alpha: T,
    pub r_vel: T,
}

impl<T: Real> DerivedFactors<T> {
    pub fn new(p: &HerschelBulkleyParams<T>) -> Self {
        Self {
            gamma_r: reference_strain_rate(p),
            beta: shape_factor_beta(p.n).expect("validated flow index"),
            alpha: form_factor_alpha(p.n).expect("validated flow index"),
            r_vel: shear_velocity_ratio(p.n).expect("validated flow index"),
        }
    }
}

/// What the slide solver needs to know about the rheology.
pub trait LayerClosure<T: Real>: Send + Sync {
    fn yield_strength(&self) -> T;
    /// Momentum form factor of the shear layer.
    fn alpha(&self) -> T;
    /// Mean shear-layer velocity over plug velocity.
    fn r_vel(&self) -> T;
    /// Net basal shear stress `τ_y f_s` in Pa for a moving shear layer of
    /// positive thickness.
    fn basal_stress(&self, u_p_mag: T, h_s: T) -> T;
}

/// General Herschel-Bulkley closure.
#[derive(Clone, Copy, Debug)]
pub struct HerschelBulkley<T> {
    pub params: HerschelBulkleyParams<T>,
    pub factors: DerivedFactors<T>,
}

impl<T: Real> HerschelBulkley<T> {
    pub fn new(params: HerschelBulkleyParams<T>) -> Self {
        Self {
            factors: DerivedFactors::new(&params),
            params,
        }
    }
}

impl<T: Real> LayerClosure<T> for HerschelBulkley<T> {
    fn yield_strength(&self) -> T {
        self.params.tau_y
    }
    fn alpha(&self) -> T {
        self.factors.alpha
    }
    fn r_vel(&self) -> T {
        self.factors.r_vel
    }
    fn basal_stress(&self, u_p_mag: T, h_s: T) -> T {
        let f = self.factors;
        let f_s = f.beta * (u_p_mag / (f.gamma_r * h_s)).powf(self.params.n);
        self.params.tau_y * f_s
    }
}

/// Bingham plastic (n = 1) with its constants written out, kept separate
/// from [`HerschelBulkley`] so the two can be cross-checked.
#[derive(Clone, Copy, Debug)]
pub struct Bingham<T> {
    pub tau_y: T,
    /// Plastic viscosity, Pa·s.
    pub mu: T,
}

impl<T: Real> LayerClosure<T> for Bingham<T> {
    fn yield_strength(&self) -> T {
        self.tau_y
    }
    fn alpha(&self) -> T {
        T::lit(1.2)
    }
    fn r_vel(&self) -> T {
        T::lit(2.0) / T::lit(3.0)
    }
    fn basal_stress(&self, u_p_mag: T, h_s: T) -> T {
        let strain_rate = self.tau_y / self.mu;
        self.tau_y * (T::lit(2.0) * (u_p_mag / (strain_rate * h_s)))
    }
}
