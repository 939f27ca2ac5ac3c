use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hho::{cell_lebesgue_pow, energy_gram_matrix, local_energy_seminorm_pow};
use crate::mesh::{generate, MeshFamily};
use crate::quadrature::quad_cell;
use crate::rheology::FlowLaw;
use crate::solver::{zero_field, DiscreteProblem, LinearSolver, ProblemOptions, SparseLu, SparseMatrix};
use crate::{Error, Result};

fn problem_on(family: MeshFamily, n: usize, distortion: f64, k: usize, law: FlowLaw) -> Result<DiscreteProblem> {
    let mesh = Arc::new(generate(family, n, distortion)?);
    DiscreteProblem::new(mesh, k, law, zero_field(), zero_field(), ProblemOptions::default())
}

/// Random element of `U_{h,0}^k` as a full velocity vector.
fn random_velocity(problem: &DiscreteProblem, rng: &mut ChaCha8Rng, scale: f64) -> DVector<f64> {
    let l = problem.layout();
    let nvu = l.n_velocity_unknowns();
    DVector::from_fn(l.n_velocity(), |i, _| if i < nvu { scale * rng.random_range(-1.0..1.0) } else { 0.0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KornLevel {
    pub n: usize,
    pub h: f64,
    /// Largest and smallest `(‖v‖^r_{L^r} + |v|^r_{W^{1,r}(T_h)}) / ‖v‖^r_{ε,r,h}`.
    pub max_ratio: f64,
    pub min_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KornReport {
    pub family: MeshFamily,
    pub k: usize,
    pub r: f64,
    pub samples: usize,
    pub levels: Vec<KornLevel>,
}

impl KornReport {
    /// Largest level-to-level relative increase of the maximal ratio.
    pub fn max_growth(&self) -> f64 {
        self.levels
            .windows(2)
            .map(|w| w[1].max_ratio / w[0].max_ratio - 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Discrete Korn ratio over `samples` random velocities per level.
pub fn korn_study(
    family: MeshFamily,
    distortion: f64,
    levels: &[usize],
    k: usize,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<KornReport> {
    let law = FlowLaw::power_law(1.0, r);
    law.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(levels.len());
    for &n in levels {
        let p = problem_on(family, n, distortion, k, law)?;
        let (mut max_ratio, mut min_ratio) = (0.0f64, f64::INFINITY);
        for _ in 0..samples {
            let v = random_velocity(&p, &mut rng, 1.0);
            let parts = (0..p.mesh().num_cells())
                .into_par_iter()
                .map(|c| {
                    let ops = &p.operators()[c];
                    let vc = p.gather(c, &v);
                    let (lr, w1r) = cell_lebesgue_pow(ops, &vc, r)?;
                    Ok((lr + w1r, local_energy_seminorm_pow(ops, &vc, r)?))
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            let num: f64 = parts.iter().map(|x| x.0).sum();
            let den: f64 = parts.iter().map(|x| x.1).sum();
            if den > 0.0 {
                max_ratio = max_ratio.max(num / den);
                min_ratio = min_ratio.min(num / den);
            }
        }
        out.push(KornLevel {
            n,
            h: p.mesh().h(),
            max_ratio,
            min_ratio,
        });
    }
    Ok(KornReport {
        family,
        k,
        r,
        samples,
        levels: out,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfSupLevel {
    pub n: usize,
    pub h: f64,
    /// Discrete inf-sup constant over zero-mean pressures.
    pub beta: f64,
    /// Smallest generalized eigenvalue over all pressures (the constants).
    pub lowest_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfSupReport {
    pub family: MeshFamily,
    pub k: usize,
    pub levels: Vec<InfSupLevel>,
}

impl InfSupReport {
    /// Largest level-to-level relative decrease of `β`.
    pub fn max_decay(&self) -> f64 {
        self.levels
            .windows(2)
            .map(|w| 1.0 - w[1].beta / w[0].beta)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Inf-sup constant of `b_h` on `U_{h,0}^k × P_h^k` for `r = 2`:
/// `β² = min_{q, ∫q = 0} (Bᵀq)ᵀ A⁻¹ (Bᵀq) / qᵀ M q`, with `A` the Gram matrix
/// of `‖·‖_{ε,2,h}` and `M` the pressure mass matrix.
pub fn infsup_study(family: MeshFamily, distortion: f64, levels: &[usize], k: usize, r: f64) -> Result<InfSupReport> {
    if r != 2.0 {
        return Err(Error::Unsupported(format!(
            "the inf-sup study is only available for r = 2, got r = {r}"
        )));
    }
    let levels = levels
        .iter()
        .map(|&n| {
            let p = problem_on(family, n, distortion, k, FlowLaw::newtonian(1.0))?;
            let (beta, lowest) = infsup_constant(&p)?;
            Ok(InfSupLevel {
                n,
                h: p.mesh().h(),
                beta,
                lowest_eigenvalue: lowest,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InfSupReport { family, k, levels })
}

/// `(β, λ_min)` for the current mesh of `problem`.
pub fn infsup_constant(problem: &DiscreteProblem) -> Result<(f64, f64)> {
    let l = problem.layout();
    let mesh = problem.mesh();
    let nvu = l.n_velocity_unknowns();
    let np = l.n_pressure();
    let mut a_trips = Vec::new();
    let mut bt = DMatrix::zeros(nvu, np);
    let mut mass = DMatrix::zeros(np, np);
    let degree = 2 * problem.k() + problem.quad_boost();
    for c in 0..mesh.num_cells() {
        let ops = &problem.operators()[c];
        let idx = l.local_velocity_indices(mesh, c);
        let g = energy_gram_matrix(ops);
        for (a, &ia) in idx.iter().enumerate() {
            if ia >= nvu {
                continue;
            }
            for (b, &ib) in idx.iter().enumerate() {
                if ib < nvu && g[(a, b)] != 0.0 {
                    a_trips.push((ia, ib, g[(a, b)]));
                }
            }
        }
        let po = l.pressure_offset(c);
        for i in 0..l.pressure_block {
            for (a, &ia) in idx.iter().enumerate() {
                if ia < nvu {
                    bt[(ia, po + i)] += ops.pressure_coupling[(i, a)];
                }
            }
        }
        let rule = quad_cell(mesh, c, degree)?;
        let pb = &ops.pressure_basis;
        let mut m = DMatrix::zeros(l.pressure_block, l.pressure_block);
        for (p, w) in rule.iter() {
            let psi = pb.eval(p);
            m.ger(w, &psi, &psi, 1.0);
        }
        mass.view_mut((po, po), (l.pressure_block, l.pressure_block)).copy_from(&m);
    }
    let a = SparseMatrix::from_triplets(nvu, nvu, a_trips)?;
    let x = SparseLu.solve_columns(&a, &bt)?;
    let s = bt.transpose() * x;
    let chol = mass.cholesky().ok_or(Error::SingularLocalSystem {
        cell: 0,
        what: "pressure mass matrix",
    })?;
    // L⁻¹ S L⁻ᵀ
    let linv = chol.l().try_inverse().ok_or(Error::SingularLocalSystem {
        cell: 0,
        what: "pressure mass matrix",
    })?;
    let c = &linv * s * linv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok((ev[1].max(0.0).sqrt(), ev[0]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub law: FlowLaw,
    pub pairs: usize,
    /// Smallest `a_h(u, u−w) − a_h(w, u−w)`.
    pub min_gap: f64,
    /// Smallest gap divided by `σ_sm ‖e‖^{r+2−r̂} (σ_de^r + ‖u‖^r + ‖w‖^r)^{(r̂−2)/r}`.
    pub min_normalized_gap: f64,
    /// Pairs skipped because `‖u − w‖_{ε,r,h} ≤ 1e−10`.
    pub skipped: usize,
}

/// Strong monotonicity of `a_h` over random pairs in `U_{h,0}^k`.
pub fn monotonicity_study(
    family: MeshFamily,
    distortion: f64,
    n: usize,
    k: usize,
    law: FlowLaw,
    pairs: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    let p = problem_on(family, n, distortion, k, law)?;
    let consts = *p.constants();
    let r = law.r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_gap = f64::INFINITY;
    let mut min_norm = f64::INFINITY;
    let mut skipped = 0;
    for _ in 0..pairs {
        let su = 10f64.powf(rng.random_range(-2.0..1.0));
        let sw = 10f64.powf(rng.random_range(-2.0..1.0));
        let u = random_velocity(&p, &mut rng, su);
        let w = random_velocity(&p, &mut rng, sw);
        let e = &u - &w;
        let ne = p.energy_norm(&e, r)?;
        if ne <= 1e-10 {
            skipped += 1;
            continue;
        }
        let gap = p.viscous_form(&u, &e) - p.viscous_form(&w, &e);
        let nu = p.energy_norm(&u, r)?;
        let nw = p.energy_norm(&w, r)?;
        let rh = consts.r_hat;
        let bound = consts.sigma_sm
            * ne.powf(r + 2.0 - rh)
            * (consts.sigma_de.powf(r) + nu.powf(r) + nw.powf(r)).powf((rh - 2.0) / r);
        min_gap = min_gap.min(gap);
        min_norm = min_norm.min(gap / bound);
    }
    Ok(MonotonicityReport {
        law,
        pairs,
        min_gap,
        min_normalized_gap: min_norm,
        skipped,
    })
}
