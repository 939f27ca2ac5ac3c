//! Local forms evaluated by quadrature on cached operator values.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector3};

use super::ElementOperators;
use crate::rheology::{FlowLaw, TANGENT_EPS};
use crate::Result;

/// `Σ_F ∫_F |Δ_F v|^r`.
pub fn stab_residual_energy(ops: &ElementOperators, v: &DVector<f64>, r: f64) -> Result<f64> {
    ops.check_len(v)?;
    let mut sum = 0.0;
    for (f, fq) in ops.face_quads.iter().enumerate() {
        let s = ops.residual_scale(f);
        for (d, w) in fq.residual.iter().zip(&fq.weights) {
            sum += w * (s * (d * v).norm()).powf(r);
        }
    }
    Ok(sum)
}

/// `s_T(w, v) = Σ_F ∫_F |Δ_F w|^{r-2} Δ_F w · Δ_F v` with the exponent of `ops`.
pub fn stabilization_form(ops: &ElementOperators, w: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    ops.check_len(w)?;
    ops.check_len(v)?;
    let mut sum = 0.0;
    for (f, fq) in ops.face_quads.iter().enumerate() {
        let sc = ops.residual_scale(f);
        for (d, wq) in fq.residual.iter().zip(&fq.weights) {
            let dw: Vector2<f64> = d * w * sc;
            let dv: Vector2<f64> = d * v * sc;
            sum += wq * power_map(&dw, ops.r).dot(&dv);
        }
    }
    Ok(sum)
}

/// `‖G_T^k v‖^r_{L^r(T)}`.
pub fn gradient_energy(ops: &ElementOperators, v: &DVector<f64>, r: f64) -> Result<f64> {
    ops.check_len(v)?;
    let q = &ops.cell_quad;
    Ok(q.gradient
        .iter()
        .zip(&q.weights)
        .map(|(g, w)| w * (g * v).norm().powf(r))
        .sum())
}

/// `‖∇_s v_T‖^r_{L^r(T)} + Σ_F h_F^{1-r} ‖v_F − v_T‖^r_{L^r(F)}`.
pub fn local_energy_seminorm_pow(ops: &ElementOperators, v: &DVector<f64>, r: f64) -> Result<f64> {
    ops.check_len(v)?;
    let q = &ops.cell_quad;
    let mut sum: f64 = q
        .strain
        .iter()
        .zip(&q.weights)
        .map(|(s, w)| w * (s * v).norm().powf(r))
        .sum();
    for (fq, h) in ops.face_quads.iter().zip(&ops.face_diameters) {
        let face: f64 = fq
            .jump
            .iter()
            .zip(&fq.weights)
            .map(|(j, w)| w * (j * v).norm().powf(r))
            .sum();
        sum += h.powf(1.0 - r) * face;
    }
    Ok(sum)
}

/// Matrix of `v ↦ ‖v‖²_{ε,2,T}`.
pub fn energy_gram_matrix(ops: &ElementOperators) -> DMatrix<f64> {
    let n = ops.local_size();
    let mut m = DMatrix::zeros(n, n);
    let q = &ops.cell_quad;
    for (s, w) in q.strain.iter().zip(&q.weights) {
        m.gemm_tr(*w, s, s, 1.0);
    }
    for (fq, h) in ops.face_quads.iter().zip(&ops.face_diameters) {
        for (j, w) in fq.jump.iter().zip(&fq.weights) {
            m.gemm_tr(w / h, j, j, 1.0);
        }
    }
    m
}

/// The local `W^{1,r}`-like seminorm `‖v‖_{ε,r,T}`.
pub fn local_energy_seminorm(ops: &ElementOperators, v: &DVector<f64>, r: f64) -> Result<f64> {
    Ok(local_energy_seminorm_pow(ops, v, r)?.powf(1.0 / r))
}

/// `‖v_T‖^r_{L^r(T)}` and the broken `|v_T|^r_{W^{1,r}(T)}`.
pub fn cell_lebesgue_pow(ops: &ElementOperators, v: &DVector<f64>, r: f64) -> Result<(f64, f64)> {
    ops.check_len(v)?;
    let q = &ops.cell_quad;
    let mut l = 0.0;
    let mut g = 0.0;
    for ((val, grad), w) in q.value.iter().zip(&q.full_gradient).zip(&q.weights) {
        l += w * (val * v).norm().powf(r);
        g += w * (grad * v).norm().powf(r);
    }
    Ok((l, g))
}

/// `|d|^{r-2} d`, zero at the origin.
fn power_map(d: &Vector2<f64>, r: f64) -> Vector2<f64> {
    let n = d.norm();
    if n == 0.0 {
        Vector2::zeros()
    } else {
        d * n.powf(r - 2.0)
    }
}

fn check_gamma(law: &FlowLaw, gamma: f64) -> Result<()> {
    law.constants().check_gamma(gamma)
}

/// Gradient of `w ↦ a_T(w, ·)`: the local viscous residual vector
/// `∫_T σ(G w):G v + γ Σ_F ∫_F |Δ_F w|^{r-2} Δ_F w · Δ_F v` for every basis
/// vector `v`. The stabilization uses the exponent of `ops`.
pub fn viscous_residual_vector(ops: &ElementOperators, law: &FlowLaw, gamma: f64, w: &DVector<f64>) -> DVector<f64> {
    let mut res = DVector::zeros(ops.local_size());
    let q = &ops.cell_quad;
    for (g, wq) in q.gradient.iter().zip(&q.weights) {
        let t: Vector3<f64> = g * w;
        let s = law.stress_mandel(&t);
        res.gemv_tr(*wq, g, &s, 1.0);
    }
    for (f, fq) in ops.face_quads.iter().enumerate() {
        let sc = ops.residual_scale(f);
        for (d, wq) in fq.residual.iter().zip(&fq.weights) {
            let dv: Vector2<f64> = d * w * sc;
            let flux = power_map(&dv, ops.r);
            res.gemv_tr(wq * gamma * sc, d, &flux, 1.0);
        }
    }
    res
}

/// Jacobian of [`viscous_residual_vector`] with respect to `w`.
pub fn viscous_tangent_matrix(ops: &ElementOperators, law: &FlowLaw, gamma: f64, w: &DVector<f64>) -> DMatrix<f64> {
    let n = ops.local_size();
    let mut m = DMatrix::zeros(n, n);
    let q = &ops.cell_quad;
    for (g, wq) in q.gradient.iter().zip(&q.weights) {
        let t: Vector3<f64> = g * w;
        let cg = law.tangent_mandel(&t) * g;
        m.gemm_tr(*wq, g, &cg, 1.0);
    }
    let r = ops.r;
    for (f, fq) in ops.face_quads.iter().enumerate() {
        let sc = ops.residual_scale(f);
        for (d, wq) in fq.residual.iter().zip(&fq.weights) {
            let dv: Vector2<f64> = d * w * sc;
            let nd = dv.norm().max(TANGENT_EPS);
            let k = Matrix2::identity() * nd.powf(r - 2.0) + dv * dv.transpose() * ((r - 2.0) * nd.powf(r - 4.0));
            let kd = k * d;
            m.gemm_tr(wq * gamma * sc * sc, d, &kd, 1.0);
        }
    }
    m
}

/// `a_T(w, v)`; fails if `γ` lies outside `[σ_sm, σ_hc]`.
pub fn local_viscous_residual(
    ops: &ElementOperators,
    law: &FlowLaw,
    gamma: f64,
    w: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<f64> {
    check_gamma(law, gamma)?;
    ops.check_len(w)?;
    ops.check_len(v)?;
    Ok(viscous_residual_vector(ops, law, gamma, w).dot(v))
}

/// Local tangent matrix `∂/∂w a_T(w, ·)`.
pub fn local_viscous_tangent(ops: &ElementOperators, law: &FlowLaw, gamma: f64, w: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_gamma(law, gamma)?;
    ops.check_len(w)?;
    Ok(viscous_tangent_matrix(ops, law, gamma, w))
}

/// Local contribution `−∫_T D_T^k(v) q_T` of the pressure-velocity coupling.
pub fn local_divergence_coupling(ops: &ElementOperators, v: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    ops.check_len(v)?;
    if q.len() != ops.pressure_coupling.nrows() {
        return Err(crate::Error::SizeMismatch {
            expected: ops.pressure_coupling.nrows(),
            got: q.len(),
        });
    }
    Ok(-q.dot(&(&ops.pressure_coupling * v)))
}
