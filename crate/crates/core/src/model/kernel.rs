use statrs::function::erf::{erf, erfc};

use super::{DriverParams, KernelSupport};
use crate::error::{ensure_finite, Error, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516;
const HALF_LN_HALF_PI: f64 = 0.225_791_352_644_727_43; // ln(sqrt(pi / 2))

/// Scaled complementary error function `exp(x²)·erfc(x)` for `x ≥ 0`.
fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 26.0 {
        return (x * x).exp() * erfc(x);
    }
    // Asymptotic series; at x >= 26 the ninth term is far below f64 precision.
    let inv2x2 = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..9 {
        term *= -((2 * k - 1) as f64) * inv2x2;
        sum += term;
    }
    sum / (x * SQRT_PI)
}

/// `ln ∫_lo^hi exp(−(u − m)² / 2σ²) du`, stable when `[lo, hi]` sits many
/// standard deviations away from `m`.
fn log_gauss_mass(m: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let scale = std::f64::consts::SQRT_2 * sigma;
    let z_lo = (lo - m) / scale;
    let z_hi = (hi - m) / scale;
    let prefactor = sigma.ln() + HALF_LN_HALF_PI;
    // Both bounds on the same side of the mean: factor out the nearer tail.
    let tail = |near: f64, far: f64| {
        let ratio = (-(far - near) * (far + near)).exp();
        -near * near + (erfcx(near) - ratio * erfcx(far)).ln()
    };
    if z_lo >= 0.0 {
        prefactor + tail(z_lo, z_hi)
    } else if z_hi <= 0.0 {
        prefactor + tail(-z_hi, -z_lo)
    } else {
        prefactor + (erf(z_hi) + erf(-z_lo)).ln()
    }
}

/// The normalising integral `C = ∫_a^b exp(−(u − m)²/2σ²) du` and its partial
/// derivatives with respect to `m` and `σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncGaussConstants {
    pub c: f64,
    pub c_m: f64,
    pub c_sigma: f64,
}

/// A Gaussian density of mean `m` and deviation `σ` restricted to `[a, b]`.
///
/// The normalising constant is cached in log form; the derivative ratios
/// `C_m / C` and `C_σ / C` are computed without materialising `C` so they stay
/// finite even when `C` underflows.
#[derive(Debug, Clone, Copy)]
pub struct TruncGauss {
    m: f64,
    sigma: f64,
    a: f64,
    b: f64,
    log_c: f64,
}

impl TruncGauss {
    pub fn new(m: f64, sigma: f64, support: KernelSupport) -> Result<Self> {
        ensure_finite("m", m)?;
        ensure_finite("sigma", sigma)?;
        if sigma <= 0.0 {
            return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        let log_c = log_gauss_mass(m, sigma, support.a(), support.b());
        if !log_c.is_finite() {
            return Err(Error::Numerical(format!(
                "normalising constant is degenerate for m = {m}, sigma = {sigma}"
            )));
        }
        Ok(Self { m, sigma, a: support.a(), b: support.b(), log_c })
    }

    pub fn from_params(params: &DriverParams, support: KernelSupport) -> Result<Self> {
        Self::new(params.m, params.sigma, support)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn log_c(&self) -> f64 {
        self.log_c
    }

    fn log_gauss(&self, x: f64) -> f64 {
        let z = (x - self.m) / self.sigma;
        -0.5 * z * z
    }

    /// `exp(−(x − m)²/2σ²) / C`, without the support indicator.
    #[inline]
    fn unrestricted(&self, x: f64) -> f64 {
        (self.log_gauss(x) - self.log_c).exp()
    }

    /// Kernel density at delay `x`; exactly zero outside `[a, b]`.
    #[inline]
    pub fn density(&self, x: f64) -> f64 {
        if x < self.a || x > self.b {
            0.0
        } else {
            self.unrestricted(x)
        }
    }

    /// Largest value of the density on the support.
    pub fn peak(&self) -> f64 {
        self.unrestricted(self.m.clamp(self.a, self.b))
    }

    /// `C_m / C`.
    pub fn ratio_m(&self) -> f64 {
        self.unrestricted(self.a) - self.unrestricted(self.b)
    }

    /// `C_σ / C`.
    pub fn ratio_sigma(&self) -> f64 {
        let ends = (self.a - self.m) * self.unrestricted(self.a)
            - (self.b - self.m) * self.unrestricted(self.b);
        (1.0 + ends) / self.sigma
    }

    /// Kernel mass on `[a, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.a {
            0.0
        } else if x >= self.b {
            1.0
        } else {
            (log_gauss_mass(self.m, self.sigma, self.a, x) - self.log_c).exp().min(1.0)
        }
    }

    /// Derivatives of [`TruncGauss::cdf`] with respect to `m` and `σ`.
    pub fn cdf_gradient(&self, x: f64) -> (f64, f64) {
        if x <= self.a || x >= self.b {
            return (0.0, 0.0);
        }
        let partial = TruncGauss {
            b: x,
            log_c: log_gauss_mass(self.m, self.sigma, self.a, x),
            ..*self
        };
        let f = (partial.log_c - self.log_c).exp();
        (
            f * (partial.ratio_m() - self.ratio_m()),
            f * (partial.ratio_sigma() - self.ratio_sigma()),
        )
    }

    pub fn constants(&self) -> TruncGaussConstants {
        let c = self.log_c.exp();
        TruncGaussConstants { c, c_m: c * self.ratio_m(), c_sigma: c * self.ratio_sigma() }
    }
}

/// `C`, `C_m = ∂C/∂m` and `C_σ = ∂C/∂σ` in closed form.
pub fn trunc_gauss_constants(
    m: f64,
    sigma: f64,
    support: KernelSupport,
) -> Result<TruncGaussConstants> {
    Ok(TruncGauss::new(m, sigma, support)?.constants())
}

/// Truncated-Gaussian kernel `κ(x; m, σ, a, b)`.
pub fn kernel_eval(x: f64, params: &DriverParams, support: KernelSupport) -> Result<f64> {
    ensure_finite("x", x)?;
    Ok(TruncGauss::from_params(params, support)?.density(x))
}
