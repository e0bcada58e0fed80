//! Boundary grids on the circular cross-sections and dense operator assembly.
//!
//! Same-body blocks split each kernel as `P·log|x−y|² + Q`. On a circle
//! `log|x−y|² = log(4 sin²((α−β)/2)) + 2 log ρ`; the first factor is
//! integrated with Kress's trigonometric product weights and everything
//! else by the trapezoid rule, which keeps the quadrature spectrally
//! accurate. Blocks between different bodies use the plain trapezoid rule.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::bodies::BodyConfiguration;
use crate::error::{Error, Result};
use crate::kernels::{
    flat_offset, ring_grad_unchecked, ring_split_grad, ring_unchecked, stream_split, stream_unchecked, HalfPlanePoint,
};

/// Discretization of one body boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub center: HalfPlanePoint,
    pub rho: f64,
    pub n: usize,
    /// Index of the first node in the global numbering.
    pub offset: usize,
}

impl Panel {
    /// Arclength quadrature weight `2πρ/N`.
    pub fn weight(&self) -> f64 {
        2.0 * PI * self.rho / self.n as f64
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGrid {
    pub panels: Vec<Panel>,
    pub nodes: Vec<HalfPlanePoint>,
    /// Outward normals of the bodies, `(n_r, n_z)`.
    pub normals: Vec<[f64; 2]>,
    /// Tangents `τ = n^⊥`, counterclockwise.
    pub tangents: Vec<[f64; 2]>,
    pub body_of: Vec<usize>,
}

impl BoundaryGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn bodies(&self) -> usize {
        self.panels.len()
    }

    pub fn weight(&self, node: usize) -> f64 {
        self.panels[self.body_of[node]].weight()
    }
}

/// Samples of a function on the union of the body boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDensity {
    values: Vec<f64>,
    offsets: Vec<usize>,
}

impl BoundaryDensity {
    pub fn zeros(grid: &BoundaryGrid) -> Self {
        let mut offsets: Vec<usize> = grid.panels.iter().map(|p| p.offset).collect();
        offsets.push(grid.len());
        Self { values: vec![0.0; grid.len()], offsets }
    }

    pub fn from_values(grid: &BoundaryGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Parameter(format!(
                "density has {} samples, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let mut d = Self::zeros(grid);
        d.values = values;
        Ok(d)
    }

    /// Fills node `m` with `f(body, θ_m, x_m)` where `θ_m ∈ [0, 1)`.
    pub fn from_fn<F: FnMut(usize, f64, HalfPlanePoint) -> f64>(grid: &BoundaryGrid, mut f: F) -> Self {
        let mut d = Self::zeros(grid);
        for p in &grid.panels {
            for m in 0..p.n {
                let idx = p.offset + m;
                d.values[idx] = f(grid.body_of[idx], m as f64 / p.n as f64, grid.nodes[idx]);
            }
        }
        d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn block(&self, body: usize) -> &[f64] {
        &self.values[self.offsets[body]..self.offsets[body + 1]]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Builds the grid; `n` nodes per body, even and at least 16.
pub fn make_grid(config: &BodyConfiguration, n: usize) -> Result<BoundaryGrid> {
    if n < 16 || n % 2 != 0 {
        return Err(Error::Parameter(format!("node count must be even and >= 16, got {n}")));
    }
    config.validate()?;
    let k = config.len();
    let mut grid = BoundaryGrid {
        panels: Vec::with_capacity(k),
        nodes: Vec::with_capacity(k * n),
        normals: Vec::with_capacity(k * n),
        tangents: Vec::with_capacity(k * n),
        body_of: Vec::with_capacity(k * n),
    };
    for (i, b) in config.bodies.iter().enumerate() {
        let rho = b.radius();
        grid.panels.push(Panel { center: b.center, rho, n, offset: i * n });
        for m in 0..n {
            let a = 2.0 * PI * m as f64 / n as f64;
            let (s, c) = a.sin_cos();
            grid.nodes.push(HalfPlanePoint { r: b.center.r + rho * c, z: b.center.z + rho * s });
            grid.normals.push([c, s]);
            grid.tangents.push([-s, c]);
            grid.body_of.push(i);
        }
    }
    Ok(grid)
}

/// Kress weights `R(j)` for `∫₀^{2π} log(4 sin²((α−β)/2)) g(α) dα ≈ Σ_j R(j) g(α_{i+j})`.
pub fn kress_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    let nf = n as f64;
    (0..n)
        .map(|j| {
            let d = 2.0 * PI * j as f64 / nf;
            let mut s = 0.0;
            for m in 1..half {
                s += (m as f64 * d).cos() / m as f64;
            }
            -(4.0 * PI / nf) * s - (4.0 * PI / (nf * nf)) * (half as f64 * d).cos()
        })
        .collect()
}

/// Integral operators available for assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `f ↦ ∫ K(x, y) f(x) dl(x)`.
    Stream,
    /// `f ↦ ∫ S(x, y) f(x) dl(x)`.
    SingleLayer,
    /// `f ↦ ∫ ∂_{n_y} S(x, y) f(x) dl(x)` (direct value, no jump term).
    SingleLayerNormal,
    /// `f ↦ ∫ K̄_R(x, y) f(x) dl(x)` with `R` the centre radius of the source body.
    Flat,
}

/// Dense matrix of the operator; row = target node, column = source node.
pub fn assemble_logsplit_matrix(grid: &BoundaryGrid, kind: OperatorKind) -> DMatrix<f64> {
    match kind {
        OperatorKind::SingleLayer => assemble_single_layer_pair(grid).0,
        OperatorKind::SingleLayerNormal => assemble_single_layer_pair(grid).1,
        _ => assemble_scalar(grid, kind),
    }
}

fn assemble_scalar(grid: &BoundaryGrid, kind: OperatorKind) -> DMatrix<f64> {
    let nt = grid.len();
    let mut a = DMatrix::<f64>::zeros(nt, nt);
    for pt in &grid.panels {
        for ps in &grid.panels {
            let w = ps.weight();
            if pt.offset == ps.offset {
                let kw = kress_weights(ps.n);
                let lr = 2.0 * ps.rho.ln();
                for i in pt.range() {
                    let y = &grid.nodes[i];
                    for j in ps.range() {
                        let x = &grid.nodes[j];
                        let (p, q) = match kind {
                            OperatorKind::Stream => {
                                let s = stream_split(x, y);
                                (s.p, s.q)
                            }
                            _ => {
                                let r = ps.center.r;
                                (r / (4.0 * PI), r / (2.0 * PI) * flat_offset(r))
                            }
                        };
                        let d = (j + ps.n - i) % ps.n;
                        a[(i, j)] = ps.rho * p * kw[d] + w * (p * lr + q);
                    }
                }
            } else {
                for i in pt.range() {
                    let y = &grid.nodes[i];
                    for j in ps.range() {
                        let x = &grid.nodes[j];
                        let d2 = x.dist2(y);
                        let v = match kind {
                            OperatorKind::Stream => stream_unchecked(x, y, d2),
                            _ => {
                                let r = ps.center.r;
                                r / (2.0 * PI) * (0.5 * d2.ln() + flat_offset(r))
                            }
                        };
                        a[(i, j)] = w * v;
                    }
                }
            }
        }
    }
    a
}

/// Single layer `S` and its target-normal derivative, assembled together.
pub fn assemble_single_layer_pair(grid: &BoundaryGrid) -> (DMatrix<f64>, DMatrix<f64>) {
    let nt = grid.len();
    let mut s = DMatrix::<f64>::zeros(nt, nt);
    let mut dn = DMatrix::<f64>::zeros(nt, nt);
    for pt in &grid.panels {
        for ps in &grid.panels {
            let w = ps.weight();
            if pt.offset == ps.offset {
                let kw = kress_weights(ps.n);
                let lr = 2.0 * ps.rho.ln();
                for i in pt.range() {
                    let y = &grid.nodes[i];
                    let ny = grid.normals[i];
                    for j in ps.range() {
                        let x = &grid.nodes[j];
                        let (sp, gp, gq) = ring_split_grad(x, y);
                        let d = (j + ps.n - i) % ps.n;
                        s[(i, j)] = ps.rho * sp.p * kw[d] + w * (sp.p * lr + sp.q);
                        // (y−x)·n_y/|x−y|² = 1/(2ρ) on the circle
                        let p2 = gp[0] * ny[0] + gp[1] * ny[1];
                        let q2 = sp.p / ps.rho + gq[0] * ny[0] + gq[1] * ny[1];
                        dn[(i, j)] = ps.rho * p2 * kw[d] + w * (p2 * lr + q2);
                    }
                }
            } else {
                for i in pt.range() {
                    let y = &grid.nodes[i];
                    let ny = grid.normals[i];
                    for j in ps.range() {
                        let x = &grid.nodes[j];
                        let d2 = x.dist2(y);
                        s[(i, j)] = w * ring_unchecked(x, y, d2);
                        let g = ring_grad_unchecked(x, y, d2);
                        dn[(i, j)] = w * (g[0] * ny[0] + g[1] * ny[1]);
                    }
                }
            }
        }
    }
    (s, dn)
}

/// Quadrature weights for `∫ log|x−y|² g(x) dl(x)` over a circle when `y` is
/// off the circle: uses `log|x−y|² = 2 log r' − 2 Σ_m (ρ/r')^m cos(m(α−α₀))/m`.
pub(crate) fn off_surface_log_weights(panel: &Panel, y: &HalfPlanePoint) -> Vec<f64> {
    let dr = y.r - panel.center.r;
    let dz = y.z - panel.center.z;
    let rp = dr.hypot(dz);
    let a0 = dz.atan2(dr);
    let ratio = panel.rho / rp;
    let n = panel.n;
    let half = n / 2;
    let w = panel.weight();
    (0..n)
        .map(|j| {
            let aj = 2.0 * PI * j as f64 / n as f64;
            let mut s = 0.0;
            let mut pw = 1.0;
            for m in 1..=half {
                pw *= ratio;
                let c = if m == half { 0.5 } else { 1.0 };
                s += c * pw * (m as f64 * (aj - a0)).cos() / m as f64;
            }
            w * (2.0 * rp.ln() - 2.0 * s)
        })
        .collect()
}

/// Periodic spectral differentiation matrix (`d/dα` on `N` equispaced nodes).
pub fn spectral_diff_matrix(n: usize) -> DMatrix<f64> {
    let h = 2.0 * PI / n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let d = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (0.5 * d * h).tan()
        }
    })
}

/// `∂_τ f = (1/ρ)·df/dα` per body, spectrally.
pub fn tangential_derivative(grid: &BoundaryGrid, f: &BoundaryDensity) -> BoundaryDensity {
    let mut out = BoundaryDensity::zeros(grid);
    let mut cache: Option<(usize, DMatrix<f64>)> = None;
    for (b, p) in grid.panels.iter().enumerate() {
        let reuse = matches!(&cache, Some((n, _)) if *n == p.n);
        if !reuse {
            cache = Some((p.n, spectral_diff_matrix(p.n)));
        }
        let d = &cache.as_ref().unwrap().1;
        let blk = f.block(b);
        for i in 0..p.n {
            let mut s = 0.0;
            for j in 0..p.n {
                s += d[(i, j)] * blk[j];
            }
            out.values[p.offset + i] = s / p.rho;
        }
    }
    out
}

/// Weight in [`boundary_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryWeight {
    One,
    R,
    OneOverR,
}

/// Trapezoid value of `∫_{∂B_j} w f dl` for every body `j`.
pub fn boundary_integral(grid: &BoundaryGrid, f: &BoundaryDensity, weight: BoundaryWeight) -> Vec<f64> {
    grid.panels
        .iter()
        .map(|p| {
            let w = p.weight();
            p.range()
                .map(|i| {
                    let r = grid.nodes[i].r;
                    let c = match weight {
                        BoundaryWeight::One => 1.0,
                        BoundaryWeight::R => r,
                        BoundaryWeight::OneOverR => 1.0 / r,
                    };
                    w * c * f.values[i]
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::Body;
    use crate::special::log_circle_multiplier;

    fn single(rho: f64, n: usize) -> BoundaryGrid {
        let cfg = BodyConfiguration::new(vec![Body::new(PI * rho * rho, 1.0, 1.0, 0.0)]).unwrap();
        make_grid(&cfg, n).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = single(0.3, 32);
        for (x, n) in g.nodes.iter().zip(&g.normals) {
            assert!(((x.r - 1.0).hypot(x.z) - 0.3).abs() < 1e-15);
            assert!((n[0] * n[0] + n[1] * n[1] - 1.0).abs() < 1e-15);
        }
        assert!(make_grid(&BodyConfiguration::new(vec![Body::new(0.1, 1.0, 1.0, 0.0)]).unwrap(), 15).is_err());
    }

    #[test]
    fn kress_weights_reproduce_log_multiplier() {
        // ∫ log|x−y| e^{inα} dl on a circle equals the multiplier times e^{inβ}
        let rho: f64 = 0.4;
        let n = 64;
        let kw = kress_weights(n);
        for mode in 0..8i64 {
            let mut acc = 0.0;
            for (j, w) in kw.iter().enumerate() {
                let a = 2.0 * PI * j as f64 / n as f64;
                let l = 0.5 * (w + 2.0 * PI / n as f64 * 2.0 * rho.ln());
                acc += rho * l * (mode as f64 * a).cos();
            }
            assert!((acc - log_circle_multiplier(mode, rho)).abs() < 1e-12, "mode {mode}");
        }
    }

    #[test]
    fn flat_operator_on_fourier_modes() {
        let rho = 0.1;
        let g = single(rho, 64);
        let a = assemble_logsplit_matrix(&g, OperatorKind::Flat);
        for n in 1..6 {
            let f = BoundaryDensity::from_fn(&g, |_, th, _| (2.0 * PI * n as f64 * th).cos());
            let out = &a * nalgebra::DVector::from_column_slice(f.values());
            for i in 0..g.len() {
                let expect = -rho / (2.0 * n as f64) * f.values()[i];
                assert!((out[i] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tangential_derivative_of_cosine() {
        let rho = 0.2;
        let g = single(rho, 32);
        let f = BoundaryDensity::from_fn(&g, |_, th, _| (2.0 * PI * th).cos());
        let d = tangential_derivative(&g, &f);
        for (m, v) in d.values().iter().enumerate() {
            let th = m as f64 / 32.0;
            assert!((v + (2.0 * PI * th).sin() / rho).abs() < 1e-12);
        }
    }

    #[test]
    fn integrals_of_constants() {
        let g = single(0.2, 32);
        let one = BoundaryDensity::from_fn(&g, |_, _, _| 1.0);
        assert!((boundary_integral(&g, &one, BoundaryWeight::One)[0] - 2.0 * PI * 0.2).abs() < 1e-14);
        assert!((boundary_integral(&g, &one, BoundaryWeight::R)[0] - 2.0 * PI * 0.2).abs() < 1e-14);
        let nr = BoundaryDensity::from_fn(&g, |_, th, _| (2.0 * PI * th).cos());
        assert!((boundary_integral(&g, &nr, BoundaryWeight::R)[0] - PI * 0.04).abs() < 1e-14);
    }

    #[test]
    fn off_surface_weights_match_direct_sum_far_away() {
        let g = single(0.1, 32);
        let y = HalfPlanePoint { r: 1.6, z: 0.7 };
        let w = off_surface_log_weights(&g.panels[0], &y);
        let direct: f64 = g.nodes.iter().map(|x| g.panels[0].weight() * x.dist2(&y).ln()).sum();
        assert!((w.iter().sum::<f64>() - direct).abs() < 1e-12);
    }
}
