use serde::{Deserialize, Serialize};

/// Below this radius `tanh(r)/r` and its derivative are evaluated by series.
pub const SERIES_SWITCH: f64 = 1e-4;

/// Radial part of an isotropic nonlinearity written in g-form,
/// `f(x) = g(r) x`, where `g(r) = σ(r) / r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialProfile {
    /// `σ(r) = tanh(r)`.
    IsoTanh,
    /// `g ≡ 1`.
    Identity,
    /// `α x + (1 − α) f_tanh(x)` with `α ∈ [0, 1]`.
    Blend { alpha: f64 },
}

impl RadialProfile {
    pub fn validate(&self) -> bool {
        match *self {
            RadialProfile::Blend { alpha } => (0.0..=1.0).contains(&alpha),
            _ => true,
        }
    }

    /// `g(r)`, finite at `r = 0`.
    pub fn g(&self, r: f64) -> f64 {
        match *self {
            RadialProfile::IsoTanh => tanh_g(r),
            RadialProfile::Identity => 1.0,
            RadialProfile::Blend { alpha } => alpha + (1.0 - alpha) * tanh_g(r),
        }
    }

    /// `g'(r)`.
    pub fn g_prime(&self, r: f64) -> f64 {
        match *self {
            RadialProfile::IsoTanh => tanh_g_prime(r),
            RadialProfile::Identity => 0.0,
            RadialProfile::Blend { alpha } => (1.0 - alpha) * tanh_g_prime(r),
        }
    }

    /// `g'(r) / r`, which stays finite as `r → 0`.
    pub fn g_prime_over_r(&self, r: f64) -> f64 {
        match *self {
            RadialProfile::IsoTanh => tanh_g_prime_over_r(r),
            RadialProfile::Identity => 0.0,
            RadialProfile::Blend { alpha } => (1.0 - alpha) * tanh_g_prime_over_r(r),
        }
    }

    /// The radial profile itself, `σ(r) = r g(r)`.
    pub fn sigma(&self, r: f64) -> f64 {
        r * self.g(r)
    }
}

/// `sech²(r)` without overflow for large `|r|`.
fn sech2(r: f64) -> f64 {
    let e = (-2.0 * r.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

fn tanh_g(r: f64) -> f64 {
    if r < SERIES_SWITCH {
        let r2 = r * r;
        1.0 - r2 / 3.0 + 2.0 * r2 * r2 / 15.0
    } else {
        r.tanh() / r
    }
}

fn tanh_g_prime(r: f64) -> f64 {
    if r < SERIES_SWITCH {
        -2.0 * r / 3.0 + 8.0 * r * r * r / 15.0
    } else {
        (r * sech2(r) - r.tanh()) / (r * r)
    }
}

fn tanh_g_prime_over_r(r: f64) -> f64 {
    if r < SERIES_SWITCH {
        -2.0 / 3.0 + 8.0 * r * r / 15.0
    } else {
        (r * sech2(r) - r.tanh()) / (r * r * r)
    }
}
