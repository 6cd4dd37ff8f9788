use serde::{Deserialize, Serialize};

use super::{RadialNormalizer, RadialProfile};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Default intrinsic length at initialisation.
pub const DEFAULT_INTRINSIC_LENGTH: f64 = 1e-2;

/// One isotropic nonlinearity `x ↦ g(r) x`, `r = sqrt(‖x‖² + o)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoBlock {
    pub profile: RadialProfile,
    /// `o = exp(lambda)`.
    pub lambda: f64,
    /// When false the block behaves as if `o = 0`.
    pub intrinsic_length: bool,
    #[serde(default)]
    pub normalizer: Option<RadialNormalizer>,
}

impl Default for IsoBlock {
    fn default() -> Self {
        Self::new(RadialProfile::IsoTanh)
    }
}

impl IsoBlock {
    pub fn new(profile: RadialProfile) -> Self {
        Self {
            profile,
            lambda: DEFAULT_INTRINSIC_LENGTH.ln(),
            intrinsic_length: true,
            normalizer: None,
        }
    }

    /// Block with the intrinsic length switched off.
    pub fn plain(profile: RadialProfile) -> Self {
        Self {
            intrinsic_length: false,
            ..Self::new(profile)
        }
    }

    pub fn with_intrinsic_length(mut self, o: f64) -> Self {
        assert!(o > 0.0, "intrinsic length must be positive");
        self.lambda = o.ln();
        self.intrinsic_length = true;
        self
    }

    pub fn with_normalizer(mut self, n: RadialNormalizer) -> Self {
        self.normalizer = Some(n);
        self
    }

    /// Effective intrinsic length (zero when disabled).
    pub fn o(&self) -> f64 {
        if self.intrinsic_length {
            self.lambda.exp()
        } else {
            0.0
        }
    }

    pub fn set_o(&mut self, o: f64) -> Result<()> {
        if !(o > 0.0) || !o.is_finite() {
            return Err(Error::Surgery(format!("intrinsic length must stay positive, got {o}")));
        }
        self.lambda = o.ln();
        self.intrinsic_length = true;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.profile.validate() {
            return Err(Error::InvalidArgument(format!("invalid radial profile {:?}", self.profile)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidArgument("intrinsic-length lambda is not finite".into()));
        }
        Ok(())
    }

    pub fn radius(&self, x: &[f64]) -> f64 {
        (dot(x, x) + self.o()).sqrt()
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        self.profile.g(self.radius(x))
    }

    pub fn apply(&self, x: &[f64]) -> Vector {
        let g = self.g(x);
        x.iter().map(|v| g * v).collect()
    }

    /// `J = g I + (g'/r) x xᵀ`.
    pub fn jacobian(&self, x: &[f64]) -> Matrix {
        let r = self.radius(x);
        let g = self.profile.g(r);
        let k = self.profile.g_prime_over_r(r);
        let n = x.len();
        Matrix::from_fn(n, n, |i, j| {
            let d = if i == j { g } else { 0.0 };
            d + k * x[i] * x[j]
        })
    }

    /// `Jᵀ v` without forming the Jacobian.
    pub fn jacobian_tr_vec(&self, x: &[f64], v: &[f64]) -> Vector {
        let r = self.radius(x);
        let g = self.profile.g(r);
        let k = self.profile.g_prime_over_r(r) * dot(x, v);
        x.iter().zip(v).map(|(xi, vi)| g * vi + k * xi).collect()
    }

    /// `∂f/∂λ = (g'/r) x · o / 2`; zero when the intrinsic length is disabled.
    pub fn dlambda(&self, x: &[f64]) -> Vector {
        if !self.intrinsic_length {
            return Vector::zeros(x.len());
        }
        let o = self.o();
        let k = self.profile.g_prime_over_r(self.radius(x)) * o / 2.0;
        x.iter().map(|v| k * v).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn iso_apply(x: &[f64], block: &IsoBlock) -> Vector {
    block.apply(x)
}

pub fn iso_jacobian(x: &[f64], block: &IsoBlock) -> Matrix {
    block.jacobian(x)
}

/// Elementwise `tanh`.
pub fn aniso_apply(x: &[f64]) -> Vector {
    x.iter().map(|v| v.tanh()).collect()
}

pub fn aniso_jacobian(x: &[f64]) -> Matrix {
    let d: Vec<f64> = x.iter().map(|v| 1.0 - v.tanh().powi(2)).collect();
    Matrix::rect_diagonal(x.len(), x.len(), &d)
}

/// `‖f(Rx) − R f(x)‖∞` for an arbitrary map `f`.
pub fn equivariance_deviation(x: &[f64], r: &Matrix, f: impl Fn(&[f64]) -> Vector) -> f64 {
    let rx = r.matvec(x);
    let lhs = f(&rx);
    let rhs = r.matvec(&f(x));
    lhs.max_abs_diff(&rhs)
}

/// `‖iso(Rx) − R iso(x)‖∞`.
pub fn equivariance_check(x: &[f64], r: &Matrix, block: &IsoBlock) -> f64 {
    equivariance_deviation(x, r, |v| block.apply(v))
}
