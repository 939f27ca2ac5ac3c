//! Strain rate–shear stress laws of Carreau–Yasuda type,
//!
//! ```text
//! σ(τ) = μ (δ^a + |τ|^a)^((r-2)/a) τ,
//! ```
//!
//! with `|·|` the Frobenius norm. Symmetric 2×2 tensors are also handled in
//! Mandel coordinates `(τ11, τ22, √2 τ12)`, in which the Frobenius product is
//! the Euclidean one and tangents are symmetric 3×3 matrices.

use std::fmt;

use nalgebra::{Matrix2, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Floor applied to `|τ|` when evaluating tangents.
pub const TANGENT_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    CarreauYasuda,
    PowerLaw,
    Newtonian,
}

/// Constitutive parameters `(μ, δ, a, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowLaw {
    pub kind: LawKind,
    /// Consistency index.
    pub mu: f64,
    /// Degeneracy parameter.
    pub delta: f64,
    /// Transition index.
    pub a: f64,
    /// Flow behaviour index.
    pub r: f64,
}

/// Constants of the Hölder continuity and strong monotonicity bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawConstants {
    /// Singular exponent `min(r, 2)`.
    pub r_hat: f64,
    pub sigma_de: f64,
    pub sigma_hc: f64,
    pub sigma_sm: f64,
}

impl LawConstants {
    /// Geometric mean of `σ_sm` and `σ_hc`, clamped to `[σ_sm, σ_hc]`.
    pub fn default_gamma(&self) -> f64 {
        (self.sigma_sm * self.sigma_hc)
            .sqrt()
            .clamp(self.sigma_sm, self.sigma_hc)
    }

    pub fn check_gamma(&self, gamma: f64) -> Result<()> {
        let tol = 1e-12 * self.sigma_hc;
        if gamma.is_finite() && gamma >= self.sigma_sm - tol && gamma <= self.sigma_hc + tol {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "stabilization parameter {gamma} outside the admissible interval [{}, {}]",
                self.sigma_sm, self.sigma_hc
            )))
        }
    }
}

impl FlowLaw {
    pub fn new(kind: LawKind, mu: f64, delta: f64, a: f64, r: f64) -> Result<Self> {
        let law = Self { kind, mu, delta, a, r };
        law.validate()?;
        Ok(law)
    }

    pub fn newtonian(mu: f64) -> Self {
        Self {
            kind: LawKind::Newtonian,
            mu,
            delta: 0.0,
            a: 2.0,
            r: 2.0,
        }
    }

    /// Power law `μ |τ|^(r-2) τ` (transition index `a = 2`).
    pub fn power_law(mu: f64, r: f64) -> Self {
        if r == 2.0 {
            return Self::newtonian(mu);
        }
        Self {
            kind: LawKind::PowerLaw,
            mu,
            delta: 0.0,
            a: 2.0,
            r,
        }
    }

    pub fn carreau_yasuda(mu: f64, delta: f64, a: f64, r: f64) -> Self {
        Self {
            kind: LawKind::CarreauYasuda,
            mu,
            delta,
            a,
            r,
        }
    }

    /// Same law with flow behaviour index `r`, re-tagged as Newtonian or
    /// power law when appropriate.
    pub fn with_exponent(&self, r: f64) -> Self {
        let mut law = *self;
        law.r = r;
        law.kind = if r == 2.0 {
            LawKind::Newtonian
        } else if self.delta == 0.0 {
            LawKind::PowerLaw
        } else {
            LawKind::CarreauYasuda
        };
        law
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad(format!("consistency index mu must be positive, got {}", self.mu));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return bad(format!("degeneracy parameter delta must be >= 0, got {}", self.delta));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return bad(format!("transition index a must be positive, got {}", self.a));
        }
        if !(self.r.is_finite() && self.r > 1.0) {
            return bad(format!("flow behaviour index r must lie in (1, inf), got {}", self.r));
        }
        match self.kind {
            LawKind::PowerLaw if self.delta != 0.0 => bad("power law requires delta = 0".into()),
            LawKind::Newtonian if self.r != 2.0 => bad("newtonian law requires r = 2".into()),
            _ => Ok(()),
        }
    }

    /// Conjugate exponent `r' = r / (r - 1)`.
    pub fn r_conj(&self) -> f64 {
        self.r / (self.r - 1.0)
    }

    pub fn r_hat(&self) -> f64 {
        self.r.min(2.0)
    }

    /// Scalar modulus `ς(α) = μ (δ^a + α^a)^((r-2)/a)`.
    pub fn modulus(&self, alpha: f64) -> f64 {
        if self.r == 2.0 {
            return self.mu;
        }
        self.mu * (self.delta.powf(self.a) + alpha.powf(self.a)).powf((self.r - 2.0) / self.a)
    }

    /// `ς'(α) / α`.
    fn modulus_slope_over_alpha(&self, alpha: f64) -> f64 {
        if self.r == 2.0 {
            return 0.0;
        }
        let base = self.delta.powf(self.a) + alpha.powf(self.a);
        self.mu
            * (self.r - 2.0)
            * base.powf((self.r - 2.0 - self.a) / self.a)
            * alpha.powf(self.a - 2.0)
    }

    /// Stress in Mandel coordinates.
    pub fn stress_mandel(&self, t: &Vector3<f64>) -> Vector3<f64> {
        let n = t.norm();
        if n == 0.0 {
            return Vector3::zeros();
        }
        t * self.modulus(n)
    }

    /// Tangent `dσ/dτ` in Mandel coordinates, with `|τ|` floored at
    /// [`TANGENT_EPS`].
    pub fn tangent_mandel(&self, t: &Vector3<f64>) -> Matrix3<f64> {
        if self.r == 2.0 {
            return Matrix3::identity() * self.mu;
        }
        let n = t.norm().max(TANGENT_EPS);
        Matrix3::identity() * self.modulus(n) + t * t.transpose() * self.modulus_slope_over_alpha(n)
    }

    pub fn constants(&self) -> LawConstants {
        law_constants(self)
    }
}

impl fmt::Display for FlowLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?}(mu={}, delta={}, a={}, r={})",
            self.kind, self.mu, self.delta, self.a, self.r
        )
    }
}

pub fn to_mandel(tau: &Matrix2<f64>) -> Vector3<f64> {
    Vector3::new(
        tau[(0, 0)],
        tau[(1, 1)],
        std::f64::consts::SQRT_2 * 0.5 * (tau[(0, 1)] + tau[(1, 0)]),
    )
}

pub fn from_mandel(t: &Vector3<f64>) -> Matrix2<f64> {
    let off = t[2] / std::f64::consts::SQRT_2;
    Matrix2::new(t[0], off, off, t[1])
}

/// `σ(τ)` for a symmetric tensor `τ`; `σ(0) = 0` for every law.
pub fn stress(law: &FlowLaw, tau: &Matrix2<f64>) -> Matrix2<f64> {
    let n = tau.norm();
    if n == 0.0 {
        return Matrix2::zeros();
    }
    tau * law.modulus(n)
}

/// Fréchet derivative of [`stress`] as a symmetric matrix in Mandel
/// coordinates.
pub fn stress_tangent(law: &FlowLaw, tau: &Matrix2<f64>) -> Matrix3<f64> {
    law.tangent_mandel(&to_mandel(tau))
}

/// Hölder continuity / strong monotonicity constants for constant `μ`, `a`.
pub fn law_constants(law: &FlowLaw) -> LawConstants {
    let (mu, a, r) = (law.mu, law.a, law.r);
    let xi = 1.0 / a - 1.0 / r;
    let pos = xi.max(0.0);
    let neg = -xi.min(0.0);
    let sigma_hc = if r < 2.0 {
        mu / (r - 1.0) * 2f64.powf((-neg - 1.0) * (r - 2.0) + 1.0 / r)
    } else {
        mu * (r - 1.0) * 2f64.powf(pos * (r - 2.0))
    };
    let sigma_sm = if r <= 2.0 {
        mu * (r - 1.0) * 2f64.powf(pos * (r - 2.0))
    } else {
        mu / (r - 1.0) * 2f64.powf((-neg - 1.0) * (r - 2.0) - 1.0)
    };
    LawConstants {
        r_hat: law.r_hat(),
        sigma_de: law.delta,
        sigma_hc,
        sigma_sm,
    }
}

/// Bracket of `∂(α ς(α))/∂α`:
/// `(μ(r̂-1)(δ^a+α^a)^((r-2)/a), μ(r+1-r̂)(δ^a+α^a)^((r-2)/a))`.
pub fn scalar_modulus_bounds(law: &FlowLaw, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "modulus bounds require alpha > 0, got {alpha}"
        )));
    }
    let base = law.modulus(alpha) / law.mu;
    let rh = law.r_hat();
    Ok((
        law.mu * (rh - 1.0) * base,
        law.mu * (law.r + 1.0 - rh) * base,
    ))
}

/// Outcome of the randomized power-framed inequality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFramedReport {
    pub samples: usize,
    /// Largest `|σ(τ)-σ(η)|` divided by the Hölder bound.
    pub worst_holder_ratio: f64,
    /// Largest monotonicity bound divided by the monotonicity product.
    pub worst_monotonicity_ratio: f64,
    pub pass: bool,
}

/// Ratio threshold for [`PowerFramedReport::pass`].
pub const POWER_FRAMED_SLACK: f64 = 1e-9;

fn random_tensor(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let dir = loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v / n;
        }
    };
    dir * 10f64.powf(rng.random_range(-3.0..3.0))
}

/// Samples random symmetric pairs `(τ, η)` with log-uniform magnitudes in
/// `[1e-3, 1e3]` and checks the Hölder continuity and strong monotonicity
/// inequalities with the constants of [`law_constants`].
pub fn verify_power_framed(law: &FlowLaw, sample_count: usize, seed: u64) -> PowerFramedReport {
    let c = law_constants(law);
    let (r, rh) = (law.r, c.r_hat);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_h: f64 = 0.0;
    let mut worst_m: f64 = 0.0;
    for _ in 0..sample_count {
        let tau = random_tensor(&mut rng);
        let eta = random_tensor(&mut rng);
        let (nt, ne) = (tau.norm(), eta.norm());
        let diff = tau - eta;
        let nd = diff.norm();
        if nd == 0.0 {
            continue;
        }
        let ds = law.stress_mandel(&tau) - law.stress_mandel(&eta);
        let frame = c.sigma_de.powf(r) + nt.powf(r) + ne.powf(r);

        let holder_bound = c.sigma_hc * frame.powf((r - rh) / r) * nd.powf(rh - 1.0);
        worst_h = worst_h.max(ds.norm() / holder_bound);

        let mono = ds.dot(&diff) * frame.powf((2.0 - rh) / r);
        let mono_bound = c.sigma_sm * nd.powf(r + 2.0 - rh);
        worst_m = worst_m.max(mono_bound / mono);
    }
    let pass = worst_h <= 1.0 + POWER_FRAMED_SLACK && worst_m <= 1.0 + POWER_FRAMED_SLACK;
    PowerFramedReport {
        samples: sample_count,
        worst_holder_ratio: worst_h,
        worst_monotonicity_ratio: worst_m,
        pass,
    }
}
