//! Stream-function densities, boundary constants and the Neumann potentials.

use nalgebra::{DMatrix, DVector};

use crate::boundary::{
    assemble_logsplit_matrix, assemble_single_layer_pair, boundary_integral, off_surface_log_weights,
    tangential_derivative, BoundaryDensity, BoundaryGrid, BoundaryWeight, OperatorKind,
};
use crate::error::{Error, Result};
use crate::kernels::{stream_split, stream_unchecked, HalfPlanePoint};

/// `max|U_ii| / min|U_ii|` of an LU factor: a cheap conditioning indicator.
pub(crate) fn pivot_condition(u_diag: impl Iterator<Item = f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for d in u_diag {
        lo = lo.min(d.abs());
        hi = hi.max(d.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub(crate) struct DenseSolver {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub condition: f64,
}

impl DenseSolver {
    pub fn new(a: DMatrix<f64>, what: &str) -> Result<Self> {
        let lu = a.lu();
        let condition = pivot_condition(lu.u().diagonal().iter().copied());
        if !condition.is_finite() || condition > 1e14 {
            return Err(Error::Solver { message: format!("{what}: singular system"), condition });
        }
        Ok(Self { lu, condition })
    }

    pub fn solve(&self, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
        self.lu
            .solve(b)
            .ok_or_else(|| Error::Solver { message: format!("{what}: solve failed"), condition: self.condition })
    }
}

/// Densities `μ_i = (1/r)∂_nψ_i` and boundary constants `C_ij = ψ_i|∂B_j`.
#[derive(Debug, Clone)]
pub struct StreamSolution {
    pub mu: Vec<BoundaryDensity>,
    pub c: DMatrix<f64>,
    /// Largest deviation of `Kμ_i` from its piecewise-constant target.
    pub residual: f64,
    pub condition: f64,
    pub grid: BoundaryGrid,
}

/// Solves, for every body `i`, `Kμ_i = C_ij` on `∂B_j` with `∫_{∂B_j} μ_i dl = δ_ij`.
pub fn solve_stream(grid: &BoundaryGrid) -> Result<StreamSolution> {
    let kmat = assemble_logsplit_matrix(grid, OperatorKind::Stream);
    solve_stream_with(grid, &kmat)
}

pub(crate) fn solve_stream_with(grid: &BoundaryGrid, kmat: &DMatrix<f64>) -> Result<StreamSolution> {
    let n = grid.len();
    let k = grid.bodies();
    let mut aug = DMatrix::<f64>::zeros(n + k, n + k);
    aug.view_mut((0, 0), (n, n)).copy_from(kmat);
    for i in 0..n {
        aug[(i, n + grid.body_of[i])] = -1.0;
    }
    for (b, p) in grid.panels.iter().enumerate() {
        for j in p.range() {
            aug[(n + b, j)] = p.weight();
        }
    }
    let solver = DenseSolver::new(aug, "stream system")?;
    let mut rhs = DMatrix::<f64>::zeros(n + k, k);
    for l in 0..k {
        rhs[(n + l, l)] = 1.0;
    }
    let sol = solver.solve(&rhs, "stream system")?;
    let mut c = DMatrix::<f64>::zeros(k, k);
    let mut mu = Vec::with_capacity(k);
    let mut residual = 0.0f64;
    for l in 0..k {
        let m = DVector::from_iterator(n, (0..n).map(|i| sol[(i, l)]));
        for b in 0..k {
            c[(l, b)] = sol[(n + b, l)];
        }
        let km = kmat * &m;
        for i in 0..n {
            residual = residual.max((km[i] - c[(l, grid.body_of[i])]).abs());
        }
        mu.push(BoundaryDensity::from_values(grid, m.as_slice().to_vec())?);
    }
    if residual > 1e-8 * (1.0 + c.amax()) {
        return Err(Error::Solver {
            message: format!("stream residual {residual:.3e} too large"),
            condition: solver.condition,
        });
    }
    Ok(StreamSolution { mu, c, residual, condition: solver.condition, grid: grid.clone() })
}

/// `ψ(y) = Σ_i γ_i ∫ K(x, y) μ_i(x) dl(x)` for `y` outside every body.
pub fn eval_stream(solution: &StreamSolution, gamma: &[f64], y: HalfPlanePoint) -> Result<f64> {
    let grid = &solution.grid;
    if gamma.len() != grid.bodies() {
        return Err(Error::Parameter("gamma length must equal the body count".into()));
    }
    if !(y.r > 0.0) {
        return Err(Error::Domain("evaluation point must satisfy r > 0".into()));
    }
    for (b, p) in grid.panels.iter().enumerate() {
        if y.dist(&p.center) <= p.rho {
            return Err(Error::Domain(format!("evaluation point lies inside body {b}")));
        }
    }
    let dens: Vec<f64> =
        (0..grid.len()).map(|i| gamma.iter().zip(&solution.mu).map(|(g, m)| g * m.values()[i]).sum()).collect();
    let mut psi = 0.0;
    for p in &grid.panels {
        let w = p.weight();
        if y.dist(&p.center) < 3.0 * p.rho {
            let lw = off_surface_log_weights(p, &y);
            for (m, j) in p.range().enumerate() {
                let s = stream_split(&grid.nodes[j], &y);
                psi += (lw[m] * s.p + w * s.q) * dens[j];
            }
        } else {
            for j in p.range() {
                let x = &grid.nodes[j];
                psi += w * stream_unchecked(x, &y, x.dist2(&y)) * dens[j];
            }
        }
    }
    Ok(psi)
}

/// Prescribed normal velocity `u(t) = t_Z n_Z + t_R n_R − t_R ρ/(2R)` on body `i`.
pub fn normal_velocity(grid: &BoundaryGrid, i: usize, t: [f64; 2]) -> Result<BoundaryDensity> {
    if i >= grid.bodies() {
        return Err(Error::Parameter(format!("body index {i} out of range")));
    }
    let p = &grid.panels[i];
    let shift = t[0] * p.rho / (2.0 * p.center.r);
    let mut d = BoundaryDensity::zeros(grid);
    for j in p.range() {
        let n = grid.normals[j];
        d.values_mut()[j] = t[1] * n[1] + t[0] * n[0] - shift;
    }
    Ok(d)
}

#[derive(Debug, Clone)]
pub struct PotentialSolution {
    pub sigma: BoundaryDensity,
    pub trace: BoundaryDensity,
    pub tangential: BoundaryDensity,
    pub normal_data: BoundaryDensity,
    pub residual: f64,
}

/// Exterior Neumann solver `(−½I + K')σ = g`, `φ = Sσ`, factored once per grid.
pub struct PotentialSolver {
    grid: BoundaryGrid,
    single: DMatrix<f64>,
    neumann: DMatrix<f64>,
    solver: DenseSolver,
}

impl PotentialSolver {
    pub fn new(grid: &BoundaryGrid) -> Result<Self> {
        let (single, dn) = assemble_single_layer_pair(grid);
        let n = grid.len();
        let neumann = dn - DMatrix::<f64>::identity(n, n) * 0.5;
        let solver = DenseSolver::new(neumann.clone(), "Neumann system")?;
        Ok(Self { grid: grid.clone(), single, neumann, solver })
    }

    pub fn grid(&self) -> &BoundaryGrid {
        &self.grid
    }

    pub fn condition(&self) -> f64 {
        self.solver.condition
    }

    /// Potential `φ_{i,t}` of body `i` moving with virtual velocity `t`.
    pub fn solve(&self, i: usize, t: [f64; 2]) -> Result<PotentialSolution> {
        let g = normal_velocity(&self.grid, i, t)?;
        self.solve_data(g)
    }

    pub fn solve_data(&self, g: BoundaryDensity) -> Result<PotentialSolution> {
        let flux: f64 = boundary_integral(&self.grid, &g, BoundaryWeight::R).iter().sum();
        let abs = BoundaryDensity::from_values(&self.grid, g.values().iter().map(|v| v.abs()).collect())?;
        let scale: f64 = boundary_integral(&self.grid, &abs, BoundaryWeight::R).iter().sum();
        if flux.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Consistency(format!(
                "Neumann data has nonzero r-weighted flux {flux:.3e} (scale {scale:.3e})"
            )));
        }
        let n = self.grid.len();
        let b = DMatrix::from_column_slice(n, 1, g.values());
        let sigma = self.solver.solve(&b, "Neumann system")?;
        let res = (&self.neumann * &sigma - &b).amax();
        if res > 1e-8 * (1.0 + b.amax()) {
            return Err(Error::Solver {
                message: format!("Neumann residual {res:.3e}"),
                condition: self.solver.condition,
            });
        }
        let trace = &self.single * &sigma;
        let trace = BoundaryDensity::from_values(&self.grid, trace.as_slice().to_vec())?;
        let tangential = tangential_derivative(&self.grid, &trace);
        Ok(PotentialSolution {
            sigma: BoundaryDensity::from_values(&self.grid, sigma.as_slice().to_vec())?,
            trace,
            tangential,
            normal_data: g,
            residual: res,
        })
    }

    /// All `2k` potentials ordered as `(R₁, Z₁, R₂, Z₂, …)`.
    pub fn solve_all(&self) -> Result<Vec<PotentialSolution>> {
        let k = self.grid.bodies();
        let n = self.grid.len();
        let mut rhs = DMatrix::<f64>::zeros(n, 2 * k);
        let mut data = Vec::with_capacity(2 * k);
        for i in 0..k {
            for (d, t) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
                let g = normal_velocity(&self.grid, i, t)?;
                rhs.column_mut(2 * i + d).copy_from_slice(g.values());
                data.push(g);
            }
        }
        let sigma = self.solver.solve(&rhs, "Neumann system")?;
        let res = (&self.neumann * &sigma - &rhs).amax();
        if res > 1e-8 * (1.0 + rhs.amax()) {
            return Err(Error::Solver {
                message: format!("Neumann residual {res:.3e}"),
                condition: self.solver.condition,
            });
        }
        let traces = &self.single * &sigma;
        data.into_iter()
            .enumerate()
            .map(|(c, g)| {
                let trace = BoundaryDensity::from_values(&self.grid, traces.column(c).iter().copied().collect())?;
                let tangential = tangential_derivative(&self.grid, &trace);
                Ok(PotentialSolution {
                    sigma: BoundaryDensity::from_values(&self.grid, sigma.column(c).iter().copied().collect())?,
                    trace,
                    tangential,
                    normal_data: g,
                    residual: res,
                })
            })
            .collect()
    }
}

/// Potential of body `i` moving with virtual velocity `t`, all other bodies at rest.
pub fn solve_potential(grid: &BoundaryGrid, i: usize, t: [f64; 2]) -> Result<PotentialSolution> {
    PotentialSolver::new(grid)?.solve(i, t)
}

/// Flat dipole potential `−ρ² t·(x−q)/|x−q|²`.
pub fn flat_potential(q: [f64; 2], rho: f64, t: [f64; 2], x: [f64; 2]) -> Result<f64> {
    let d = [x[0] - q[0], x[1] - q[1]];
    let d2 = d[0] * d[0] + d[1] * d[1];
    if d2 == 0.0 {
        return Err(Error::Singularity("flat potential evaluated at the centre".into()));
    }
    Ok(-rho * rho * (t[0] * d[0] + t[1] * d[1]) / d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{Body, BodyConfiguration};
    use crate::boundary::make_grid;
    use std::f64::consts::PI;

    fn grid(bodies: &[(f64, f64, f64)], n: usize) -> BoundaryGrid {
        let cfg = BodyConfiguration::new(
            bodies.iter().map(|&(rho, r, z)| Body::new(PI * r * rho * rho, 1.0, r, z)).collect(),
        )
        .unwrap();
        make_grid(&cfg, n).unwrap()
    }

    #[test]
    fn single_body_density_near_uniform() {
        let g = grid(&[(0.02, 1.0, 0.0)], 64);
        let s = solve_stream(&g).unwrap();
        let u = 1.0 / (2.0 * PI * 0.02);
        let dev = s.mu[0].values().iter().map(|m| (m - u).abs()).fold(0.0, f64::max);
        assert!(dev / u < 0.2);
        assert!(s.c[(0, 0)] < 0.0);
        assert!(s.residual < 1e-10);
        let flux = boundary_integral(&g, &s.mu[0], BoundaryWeight::One)[0];
        assert!((flux - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constants_are_symmetric() {
        let g = grid(&[(0.02, 1.0, 0.0), (0.03, 1.2, 0.2), (0.01, 0.9, -0.3)], 48);
        let s = solve_stream(&g).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.c[(i, j)] - s.c[(j, i)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn boundary_value_recovered_just_outside() {
        let g = grid(&[(0.05, 1.0, 0.0), (0.05, 1.0, 0.5)], 64);
        let s = solve_stream(&g).unwrap();
        let gamma = [1.0, 0.5];
        let y = HalfPlanePoint { r: 1.0 + 0.05 * 1.001 * 0.6, z: 0.05 * 1.001 * 0.8 };
        let psi = eval_stream(&s, &gamma, y).unwrap();
        let expect = gamma[0] * s.c[(0, 0)] + gamma[1] * s.c[(1, 0)];
        assert!((psi - expect).abs() < 1e-3);
        assert!(eval_stream(&s, &gamma, HalfPlanePoint { r: 1.0, z: 0.01 }).is_err());
    }

    #[test]
    fn normal_velocity_is_compatible() {
        let g = grid(&[(0.1, 1.0, 0.0), (0.05, 1.5, 0.5)], 32);
        let u = normal_velocity(&g, 0, [1.0, 0.0]).unwrap();
        let f: f64 = boundary_integral(&g, &u, BoundaryWeight::R).iter().sum();
        assert!(f.abs() < 1e-12);
        assert!(u.block(1).iter().all(|&v| v == 0.0));
        let z = normal_velocity(&g, 1, [0.0, 0.0]).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn incompatible_data_rejected() {
        let g = grid(&[(0.1, 1.0, 0.0)], 32);
        let ps = PotentialSolver::new(&g).unwrap();
        let bad = BoundaryDensity::from_fn(&g, |_, _, _| 1.0);
        assert!(matches!(ps.solve_data(bad), Err(Error::Consistency(_))));
    }

    #[test]
    fn potential_close_to_flat_dipole() {
        let rho = 0.01;
        let g = grid(&[(rho, 1.0, 0.0)], 64);
        let ps = PotentialSolver::new(&g).unwrap();
        for t in [[1.0, 0.0], [0.0, 1.0]] {
            let sol = ps.solve(0, t).unwrap();
            let tr = sol.trace.values();
            let mean = tr.iter().sum::<f64>() / tr.len() as f64;
            let mut err = 0.0f64;
            for (i, x) in g.nodes.iter().enumerate() {
                let flat = flat_potential([1.0, 0.0], rho, t, [x.r, x.z]).unwrap();
                err = err.max((tr[i] - mean - flat).abs());
            }
            assert!(err < 0.05 * rho, "err {err}");
        }
    }

    #[test]
    fn flat_dipole_boundary_values() {
        let q = [1.0, 0.2];
        let rho = 0.3;
        let t = [0.4, -0.7];
        let a: f64 = 0.9;
        let x = [q[0] + rho * a.cos(), q[1] + rho * a.sin()];
        let v = flat_potential(q, rho, t, x).unwrap();
        assert!((v + t[0] * rho * a.cos() + t[1] * rho * a.sin()).abs() < 1e-15);
        assert!(flat_potential(q, rho, t, q).is_err());
    }
}
