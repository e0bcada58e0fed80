//! Coefficients of the body equation of motion
//!
//! `(E + M)q̈ + ½q̇(∂_qE·q̇) + Γ(q̇, q̇) = G + Aq̇`
//!
//! and the conserved energy. Tangent vectors are ordered `(R₁, Z₁, R₂, Z₂, …)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::BodyConfiguration;
use crate::boundary::{make_grid, BoundaryGrid};
use crate::error::{Error, Result};
use crate::interior::interior_energy_fast;
use crate::solvers::{solve_stream, PotentialSolution, PotentialSolver, StreamSolution};

/// Default number of boundary nodes per body.
pub const DEFAULT_NODES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub nodes: usize,
    /// Finite-difference step for `∂_qM` relative to the smallest geometric length.
    pub fd_scale: f64,
    /// Whether to compute `∂_qM` (needed for `Γ`).
    pub derivatives: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { nodes: DEFAULT_NODES, fd_scale: 1e-3, derivatives: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `‖M − Mᵀ‖ / ‖M‖` before symmetrization.
    pub m_asymmetry: f64,
    pub stream_residual: f64,
    pub potential_residual: f64,
    pub stream_condition: f64,
    pub potential_condition: f64,
    pub fd_step: f64,
}

/// Everything the equation of motion needs at one configuration.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub e: DMatrix<f64>,
    pub m: DMatrix<f64>,
    /// Operator multiplying `q̇`; antisymmetric.
    pub a: DMatrix<f64>,
    pub g: DVector<f64>,
    pub c: DMatrix<f64>,
    pub gamma: Vec<f64>,
    /// `∂f_i/∂R_i` at fixed volume.
    pub de: Vec<f64>,
    /// `∂M/∂q_w` for every coordinate `w`, when requested.
    pub dm: Option<Vec<DMatrix<f64>>>,
    pub diagnostics: Diagnostics,
}

impl CoefficientSet {
    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    /// Bilinear form `B[t][s] = (A t)·s`.
    pub fn a_form(&self) -> DMatrix<f64> {
        self.a.transpose()
    }

    /// Labeled record with row-major matrices.
    pub fn record(&self) -> serde_json::Value {
        let mat = |m: &DMatrix<f64>| -> Vec<Vec<f64>> { m.row_iter().map(|r| r.iter().copied().collect()).collect() };
        let eig = SymmetricEigen::new(self.inertia()).eigenvalues;
        serde_json::json!({
            "E": mat(&self.e),
            "M": mat(&self.m),
            "A": mat(&self.a),
            "G": self.g.iter().copied().collect::<Vec<_>>(),
            "C": mat(&self.c),
            "gamma": self.gamma,
            "inertia_eigenvalues": eig.iter().copied().collect::<Vec<_>>(),
            "diagnostics": self.diagnostics,
        })
    }

    pub fn inertia(&self) -> DMatrix<f64> {
        &self.e + &self.m
    }

    /// `(λ_min, λ_max)` of `E + M`.
    pub fn inertia_spectrum(&self) -> (f64, f64) {
        let eig = SymmetricEigen::new(self.inertia()).eigenvalues;
        (eig.min(), eig.max())
    }

    /// `‖A‖₂ / λ_min(E+M)`, an upper bound for the gyroscopic frequency.
    pub fn gyro_frequency(&self) -> f64 {
        let a_norm = self.a.singular_values().max();
        a_norm / self.inertia_spectrum().0
    }

    /// `⟨Γ, t, s⟩` from the stored `∂_qM`.
    pub fn christoffel(&self, t: &[f64], s: &[f64]) -> Result<DVector<f64>> {
        let dm = self
            .dm
            .as_ref()
            .ok_or_else(|| Error::Parameter("coefficients were assembled without derivatives".into()))?;
        christoffel_from(dm, t, s)
    }

    /// `½q̇(∂_qE·q̇)`; only `E_{R_iR_i} = f_i(R_i)` depends on `q`.
    pub fn e_term(&self, qdot: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for (i, d) in self.de.iter().enumerate() {
            out[2 * i] = 0.5 * d * qdot[2 * i] * qdot[2 * i];
        }
        out
    }
}

fn christoffel_from(dm: &[DMatrix<f64>], t: &[f64], s: &[f64]) -> Result<DVector<f64>> {
    let n = dm.len();
    if t.len() != n || s.len() != n {
        return Err(Error::Parameter(format!("Christoffel arguments must have length {n}")));
    }
    let t = DVector::from_column_slice(t);
    let s = DVector::from_column_slice(s);
    let mut ds = DMatrix::zeros(n, n);
    let mut dt = DMatrix::zeros(n, n);
    for (w, d) in dm.iter().enumerate() {
        ds += d * s[w];
        dt += d * t[w];
    }
    let mut out = 0.5 * (&ds * &t + &dt * &s);
    for (w, d) in dm.iter().enumerate() {
        out[w] -= 0.5 * t.dot(&(d * &s));
    }
    Ok(out)
}

/// Block-diagonal `E = diag(f_i(R_i), v_i)` and `∂f_i/∂R_i`.
pub fn energy_matrix_e(config: &BodyConfiguration) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let k = config.len();
    let mut e = DMatrix::zeros(2 * k, 2 * k);
    let mut de = Vec::with_capacity(k);
    for (i, b) in config.bodies.iter().enumerate() {
        let (f, df) = interior_energy_fast(b.center.r, b.volume)?;
        e[(2 * i, 2 * i)] = f;
        e[(2 * i + 1, 2 * i + 1)] = b.volume;
        de.push(df);
    }
    Ok((e, de))
}

/// `(Mt)·s = −∫ r ∂_nφ_t φ_s dl`, symmetrized. Returns `M` and the relative
/// asymmetry of the raw boundary form.
pub fn mass_matrix_m(grid: &BoundaryGrid, potentials: &[PotentialSolution]) -> Result<(DMatrix<f64>, f64)> {
    let d = potentials.len();
    let mut raw = DMatrix::zeros(d, d);
    for (a, pa) in potentials.iter().enumerate() {
        let na = pa.normal_data.values();
        for (b, pb) in potentials.iter().enumerate() {
            let tb = pb.trace.values();
            raw[(a, b)] = -(0..grid.len()).map(|j| grid.weight(j) * grid.nodes[j].r * na[j] * tb[j]).sum::<f64>();
        }
    }
    let norm = raw.norm();
    let asym = if norm > 0.0 { (&raw - raw.transpose()).norm() / norm } else { 0.0 };
    if asym > 1e-6 {
        return Err(Error::Consistency(format!("mass matrix asymmetry {asym:.3e} exceeds 1e-6")));
    }
    Ok(((&raw + raw.transpose()) * 0.5, asym))
}

/// `∂_nψ = r·Σ_j γ_j μ_j` at every node.
fn stream_flux(grid: &BoundaryGrid, stream: &StreamSolution, gamma: &[f64]) -> Vec<f64> {
    (0..grid.len())
        .map(|j| grid.nodes[j].r * gamma.iter().zip(&stream.mu).map(|(g, m)| g * m.values()[j]).sum::<f64>())
        .collect()
}

/// Gyroscopic operator: `(A t)·s = Σ_i ∫ (−∂_τφ_s ∂_nφ_t + ∂_τφ_t ∂_nφ_s) ∂_nψ dl`.
pub fn gyro_a(
    grid: &BoundaryGrid,
    potentials: &[PotentialSolution],
    stream: &StreamSolution,
    gamma: &[f64],
) -> Result<DMatrix<f64>> {
    check_gamma(grid, gamma)?;
    let psin = stream_flux(grid, stream, gamma);
    let d = potentials.len();
    let mut form = DMatrix::zeros(d, d);
    for t in 0..d {
        for s in t + 1..d {
            let (pt, ps) = (&potentials[t], &potentials[s]);
            let v: f64 = (0..grid.len())
                .map(|j| {
                    grid.weight(j)
                        * psin[j]
                        * (pt.tangential.values()[j] * ps.normal_data.values()[j]
                            - ps.tangential.values()[j] * pt.normal_data.values()[j])
                })
                .sum();
            form[(t, s)] = v;
            form[(s, t)] = -v;
        }
    }
    Ok(form.transpose())
}

/// `G·t = Σ_i ∫ (1/2r)(∂_nψ)² ∂_nφ_t dl`.
pub fn force_g(
    grid: &BoundaryGrid,
    potentials: &[PotentialSolution],
    stream: &StreamSolution,
    gamma: &[f64],
) -> Result<DVector<f64>> {
    check_gamma(grid, gamma)?;
    let psin = stream_flux(grid, stream, gamma);
    Ok(DVector::from_iterator(
        potentials.len(),
        potentials.iter().map(|p| {
            (0..grid.len())
                .map(|j| grid.weight(j) * 0.5 / grid.nodes[j].r * psin[j] * psin[j] * p.normal_data.values()[j])
                .sum::<f64>()
        }),
    ))
}

fn check_gamma(grid: &BoundaryGrid, gamma: &[f64]) -> Result<()> {
    if gamma.len() != grid.bodies() {
        return Err(Error::Parameter(format!(
            "gamma has length {}, configuration has {} bodies",
            gamma.len(),
            grid.bodies()
        )));
    }
    Ok(())
}

fn fd_step(config: &BodyConfiguration, scale: f64) -> Result<f64> {
    let mut len = config.min_radius().min(config.min_gap());
    if len.is_infinite() {
        len = config.min_radius();
    }
    let h = scale * len;
    let qmax = config.positions().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(h > 1e-13 * qmax.max(1.0)) {
        return Err(Error::Parameter(format!("finite-difference step {h:.3e} underflows")));
    }
    Ok(h)
}

fn mass_only(config: &BodyConfiguration, nodes: usize) -> Result<DMatrix<f64>> {
    let grid = make_grid(config, nodes)?;
    let pots = PotentialSolver::new(&grid)?.solve_all()?;
    Ok(mass_matrix_m(&grid, &pots)?.0)
}

/// `∂M/∂q_w` by central differences with step `h`. The last `Z` derivative
/// follows from invariance under a common `Z` shift, `Σ_i ∂M/∂Z_i = 0`.
pub fn mass_derivatives(config: &BodyConfiguration, nodes: usize, h: f64) -> Result<Vec<DMatrix<f64>>> {
    let q = config.positions();
    let last_z = q.len() - 1;
    let mut dm: Vec<DMatrix<f64>> = (0..last_z)
        .into_par_iter()
        .map(|w| {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[w] += h;
            qm[w] -= h;
            let mp = mass_only(&config.with_positions(&qp)?, nodes)?;
            let mm = mass_only(&config.with_positions(&qm)?, nodes)?;
            Ok((mp - mm) / (2.0 * h))
        })
        .collect::<Result<_>>()?;
    let mut dz = DMatrix::zeros(q.len(), q.len());
    for w in (1..last_z).step_by(2) {
        dz -= &dm[w];
    }
    dm.push(dz);
    Ok(dm)
}

/// `⟨Γ(q), t, s⟩` at `config`, differentiating `M` afresh.
pub fn christoffel_gamma(
    config: &BodyConfiguration,
    t: &[f64],
    s: &[f64],
    options: AssemblyOptions,
) -> Result<DVector<f64>> {
    let h = fd_step(config, options.fd_scale)?;
    christoffel_from(&mass_derivatives(config, options.nodes, h)?, t, s)
}

/// Assembles all coefficients at `config` with the body circulations.
pub fn assemble(config: &BodyConfiguration, options: AssemblyOptions) -> Result<CoefficientSet> {
    let grid = make_grid(config, options.nodes)?;
    let gamma = config.gammas();
    let (e, de) = energy_matrix_e(config)?;
    let stream = solve_stream(&grid)?;
    let psolver = PotentialSolver::new(&grid)?;
    let pots = psolver.solve_all()?;
    let (m, m_asymmetry) = mass_matrix_m(&grid, &pots)?;
    let a = gyro_a(&grid, &pots, &stream, &gamma)?;
    let g = force_g(&grid, &pots, &stream, &gamma)?;
    let mut diagnostics = Diagnostics {
        m_asymmetry,
        stream_residual: stream.residual,
        potential_residual: pots.iter().map(|p| p.residual).fold(0.0, f64::max),
        stream_condition: stream.condition,
        potential_condition: psolver.condition(),
        fd_step: 0.0,
    };
    let dm = if options.derivatives {
        let h = fd_step(config, options.fd_scale)?;
        diagnostics.fd_step = h;
        Some(mass_derivatives(config, options.nodes, h)?)
    } else {
        None
    };
    Ok(CoefficientSet { e, m, a, g, c: stream.c, gamma, de, dm, diagnostics })
}

/// `½q̇ᵀ(E+M)q̇ − ½γᵀCγ`.
pub fn total_energy(qdot: &[f64], coeffs: &CoefficientSet) -> Result<f64> {
    if qdot.len() != coeffs.dim() {
        return Err(Error::Parameter(format!("qdot must have length {}", coeffs.dim())));
    }
    let v = DVector::from_column_slice(qdot);
    let g = DVector::from_column_slice(&coeffs.gamma);
    Ok(0.5 * v.dot(&(coeffs.inertia() * &v)) - 0.5 * g.dot(&(&coeffs.c * &g)))
}

/// `q̈ = (E+M)⁻¹(G + Aq̇ − ½q̇(∂_qE·q̇) − Γ(q̇, q̇))`.
pub fn body_acceleration(qdot: &[f64], coeffs: &CoefficientSet) -> Result<Vec<f64>> {
    let n = coeffs.dim();
    if qdot.len() != n {
        return Err(Error::Parameter(format!("qdot must have length {n}")));
    }
    let inertia = coeffs.inertia();
    let eig = SymmetricEigen::new(inertia.clone());
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lo > 1e-13 * hi) {
        return Err(Error::Stiffness {
            message: "E + M is not safely positive definite".into(),
            smallest_eigenvalue: lo,
        });
    }
    let v = DVector::from_column_slice(qdot);
    let gam = if v.iter().all(|x| *x == 0.0) { DVector::zeros(n) } else { coeffs.christoffel(qdot, qdot)? };
    let rhs = &coeffs.g + &coeffs.a * &v - coeffs.e_term(qdot) - gam;
    let chol = inertia.cholesky().ok_or_else(|| Error::Stiffness {
        message: "Cholesky factorization of E + M failed".into(),
        smallest_eigenvalue: lo,
    })?;
    Ok(chol.solve(&rhs).as_slice().to_vec())
}
