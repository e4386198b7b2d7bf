//! The discretized 3D rescaled energy on the unit slab with a pressure
//! potential, its minimization over shrinking thickness, the extraction of
//! planar displacements, recovery-sequence constructors for the bending and
//! von Karman regimes, and the thickness-sweep harness.
//!
//! The rescaled gradient is evaluated cell-centered from trilinear
//! interpolants (8-node cells), which makes the identity slab carry exactly
//! zero energy and keeps the determinant well-defined per cell.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::algebra::{Mat2Sym, Mat3, Vec3};
use crate::density::DensityModel;
use crate::fmath;
use crate::optim::{self, MinimizeOptions, Objective, OptimError};
use crate::plate::{self, Grid2, PlateError, PlateState, Regime};
use crate::reduce::{self, QuadForm3, ReduceError};

#[derive(Debug, Clone, PartialEq)]
pub enum FilmError {
    /// Thickness outside `(0, 1]` or exponent below 1.
    InvalidParams { h: f64, alpha: f64 },
    /// The operation needs a different exponent range.
    AlphaOutOfRange { alpha: f64, needed: &'static str },
    /// Layer count below 2.
    InvalidGrid { nz: usize },
    Plate(PlateError),
    Optim(OptimError),
    Reduce(ReduceError),
}

impl fmt::Display for FilmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilmError::InvalidParams { h, alpha } => {
                write!(f, "film parameters out of range: h = {h} (need (0,1]), alpha = {alpha} (need >= 1)")
            }
            FilmError::AlphaOutOfRange { alpha, needed } => {
                write!(f, "alpha = {alpha} out of range: {needed}")
            }
            FilmError::InvalidGrid { nz } => write!(f, "need at least 2 layers, got {nz}"),
            FilmError::Plate(e) => write!(f, "{e}"),
            FilmError::Optim(e) => write!(f, "{e}"),
            FilmError::Reduce(e) => write!(f, "{e}"),
        }
    }
}

impl From<PlateError> for FilmError {
    fn from(e: PlateError) -> Self {
        FilmError::Plate(e)
    }
}

impl From<OptimError> for FilmError {
    fn from(e: OptimError) -> Self {
        FilmError::Optim(e)
    }
}

impl From<ReduceError> for FilmError {
    fn from(e: ReduceError) -> Self {
        FilmError::Reduce(e)
    }
}

/// Node grid on the unit slab `[0, lx] x [0, ly] x (-1/2, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    pub grid2: Grid2,
    pub nz: usize,
}

impl Grid3 {
    pub fn new(grid2: Grid2, nz: usize) -> Result<Self, FilmError> {
        if nz < 2 {
            return Err(FilmError::InvalidGrid { nz });
        }
        Ok(Grid3 { grid2, nz })
    }

    pub fn dz(&self) -> f64 {
        1.0 / (self.nz - 1) as f64
    }

    pub fn z(&self, k: usize) -> f64 {
        -0.5 + k as f64 * self.dz()
    }

    pub fn node_count(&self) -> usize {
        self.grid2.node_count() * self.nz
    }

    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.grid2.ny + j) * self.grid2.nx + i
    }
}

/// Discretized 3D deformation, one 3-vector per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation3 {
    pub y: Vec<Vec3>,
}

impl Deformation3 {
    /// The rescaled identity `y(x) = (x_1, x_2, h x_3)`, the stress-free
    /// competitor of every run.
    pub fn identity_slab(grid: &Grid3, h: f64) -> Self {
        let mut y = Vec::with_capacity(grid.node_count());
        for k in 0..grid.nz {
            for j in 0..grid.grid2.ny {
                for i in 0..grid.grid2.nx {
                    y.push(Vec3::new(grid.grid2.x(i), grid.grid2.y(j), h * grid.z(k)));
                }
            }
        }
        Deformation3 { y }
    }

    pub fn pack(&self) -> Vec<f64> {
        let n = self.y.len();
        let mut x = Vec::with_capacity(3 * n);
        for c in 0..3 {
            x.extend(self.y.iter().map(|p| p.0[c]));
        }
        x
    }

    pub fn unpack(grid: &Grid3, x: &[f64]) -> Self {
        let n = grid.node_count();
        let y = (0..n).map(|k| Vec3::new(x[k], x[n + k], x[2 * n + k])).collect();
        Deformation3 { y }
    }
}

/// Thickness, regime exponent, pressure, and density of one film problem.
#[derive(Debug, Clone, Copy)]
pub struct FilmParams {
    pub h: f64,
    pub alpha: f64,
    pub pi: f64,
    pub density: DensityModel,
}

impl FilmParams {
    pub fn new(h: f64, alpha: f64, pi: f64, density: DensityModel) -> Result<Self, FilmError> {
        if !(h > 0.0 && h <= 1.0 && alpha >= 1.0) {
            return Err(FilmError::InvalidParams { h, alpha });
        }
        Ok(FilmParams { h, alpha, pi, density })
    }

    /// Pressure prefactor `h^alpha pi`.
    pub fn pressure_scale(&self) -> f64 {
        fmath::powf(self.h, self.alpha) * self.pi
    }

    /// Energy rescaling `h^{-2 alpha}`.
    pub fn rescale(&self) -> f64 {
        fmath::powf(self.h, -2.0 * self.alpha)
    }
}

/// Helper iterating cell-centered rescaled gradients.
struct CellEval<'a> {
    grid: &'a Grid3,
    y: &'a [Vec3],
    inv4dx: f64,
    inv4dy: f64,
    inv4dzh: f64,
}

impl<'a> CellEval<'a> {
    fn new(grid: &'a Grid3, y: &'a [Vec3], h: f64) -> Self {
        CellEval {
            grid,
            y,
            inv4dx: 0.25 / grid.grid2.dx(),
            inv4dy: 0.25 / grid.grid2.dy(),
            inv4dzh: 0.25 / (grid.dz() * h),
        }
    }

    fn corners(&self, i: usize, j: usize, k: usize) -> [usize; 8] {
        let g = self.grid;
        [
            g.idx(i, j, k),
            g.idx(i + 1, j, k),
            g.idx(i, j + 1, k),
            g.idx(i + 1, j + 1, k),
            g.idx(i, j, k + 1),
            g.idx(i + 1, j, k + 1),
            g.idx(i, j + 1, k + 1),
            g.idx(i + 1, j + 1, k + 1),
        ]
    }

    /// Rescaled gradient at the cell center: columns are the averaged edge
    /// differences in each direction (the third divided by `h`).
    fn gradient(&self, corners: &[usize; 8]) -> Mat3 {
        let y = self.y;
        let mut f = [[0.0; 3]; 3];
        // Corner layout bit pattern: 1 = +x, 2 = +y, 4 = +z.
        for c in 0..3 {
            let d1 = (y[corners[1]].0[c] + y[corners[3]].0[c] + y[corners[5]].0[c] + y[corners[7]].0[c])
                - (y[corners[0]].0[c] + y[corners[2]].0[c] + y[corners[4]].0[c] + y[corners[6]].0[c]);
            let d2 = (y[corners[2]].0[c] + y[corners[3]].0[c] + y[corners[6]].0[c] + y[corners[7]].0[c])
                - (y[corners[0]].0[c] + y[corners[1]].0[c] + y[corners[4]].0[c] + y[corners[5]].0[c]);
            let d3 = (y[corners[4]].0[c] + y[corners[5]].0[c] + y[corners[6]].0[c] + y[corners[7]].0[c])
                - (y[corners[0]].0[c] + y[corners[1]].0[c] + y[corners[2]].0[c] + y[corners[3]].0[c]);
            f[c][0] = d1 * self.inv4dx;
            f[c][1] = d2 * self.inv4dy;
            f[c][2] = d3 * self.inv4dzh;
        }
        Mat3(f)
    }
}

/// The rescaled energy
/// `int W(grad_h y) + h^alpha pi int (det grad_h y - 1)`
/// by cell-centered quadrature; infinite values propagate from the density.
pub fn eval_rescaled(def: &Deformation3, params: &FilmParams, grid: &Grid3) -> f64 {
    eval_impl(def, params, grid, None)
}

/// Analytic gradient of [`eval_rescaled`] in packed dof layout; finite only
/// when the energy is.
pub fn grad_rescaled(def: &Deformation3, params: &FilmParams, grid: &Grid3) -> Vec<f64> {
    let mut g = vec![0.0; 3 * grid.node_count()];
    eval_impl(def, params, grid, Some(&mut g));
    g
}

fn eval_impl(
    def: &Deformation3,
    params: &FilmParams,
    grid: &Grid3,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let cells = CellEval::new(grid, &def.y, params.h);
    let vol = grid.grid2.dx() * grid.grid2.dy() * grid.dz();
    let press = params.pressure_scale();
    let n = grid.node_count();
    let mut value = 0.0;
    for k in 0..grid.nz - 1 {
        for j in 0..grid.grid2.ny - 1 {
            for i in 0..grid.grid2.nx - 1 {
                let corners = cells.corners(i, j, k);
                let f = cells.gradient(&corners);
                let w = params.density.eval_w(&f);
                if !w.is_finite() {
                    return f64::INFINITY;
                }
                value += vol * (w + press * (f.det() - 1.0));
                if let Some(g) = grad.as_deref_mut() {
                    let stress = match params.density.grad_w(&f) {
                        Ok(s) => s + f.cofactor() * press,
                        Err(_) => return f64::INFINITY,
                    };
                    scatter_cell(&cells, &corners, &stress, vol, n, g);
                }
            }
        }
    }
    value
}

fn scatter_cell(
    cells: &CellEval<'_>,
    corners: &[usize; 8],
    stress: &Mat3,
    vol: f64,
    n: usize,
    grad: &mut [f64],
) {
    for (pos, &node) in corners.iter().enumerate() {
        let sx = if pos & 1 != 0 { 1.0 } else { -1.0 };
        let sy = if pos & 2 != 0 { 1.0 } else { -1.0 };
        let sz = if pos & 4 != 0 { 1.0 } else { -1.0 };
        for c in 0..3 {
            let contrib = sx * stress.0[c][0] * cells.inv4dx
                + sy * stress.0[c][1] * cells.inv4dy
                + sz * stress.0[c][2] * cells.inv4dzh;
            grad[c * n + node] += vol * contrib;
        }
    }
}

/// Orthonormal basis of the rigid-motion directions (3 translations, 3
/// infinitesimal rotations about the slab center) in packed dof layout.
fn rigid_basis(grid: &Grid3, h: f64) -> Vec<Vec<f64>> {
    let n = grid.node_count();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(6);
    let inv_sqrt_n = 1.0 / fmath::sqrt(n as f64);
    for c in 0..3 {
        let mut t = vec![0.0; 3 * n];
        for k in 0..n {
            t[c * n + k] = inv_sqrt_n;
        }
        basis.push(t);
    }
    // Centered reference positions.
    let xc = 0.5 * grid.grid2.lx;
    let yc = 0.5 * grid.grid2.ly;
    let mut positions = Vec::with_capacity(n);
    for k in 0..grid.nz {
        for j in 0..grid.grid2.ny {
            for i in 0..grid.grid2.nx {
                positions.push(Vec3::new(
                    grid.grid2.x(i) - xc,
                    grid.grid2.y(j) - yc,
                    h * grid.z(k),
                ));
            }
        }
    }
    for axis in 0..3 {
        let e = Vec3::basis(axis);
        let mut r = vec![0.0; 3 * n];
        for (node, p) in positions.iter().enumerate() {
            let w = crate::algebra::wedge(&e, p);
            for c in 0..3 {
                r[c * n + node] = w.0[c];
            }
        }
        // Gram-Schmidt against everything collected so far.
        for b in &basis {
            let coef: f64 = r.iter().zip(b).map(|(a, c)| a * c).sum();
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= coef * bi;
            }
        }
        let norm = fmath::sqrt(r.iter().map(|v| v * v).sum());
        if norm > 1e-12 {
            for ri in r.iter_mut() {
                *ri /= norm;
            }
            basis.push(r);
        }
    }
    basis
}

struct FilmObjective<'a> {
    params: &'a FilmParams,
    grid: &'a Grid3,
    basis: Vec<Vec<f64>>,
    x_ref: Vec<f64>,
}

impl Objective for FilmObjective<'_> {
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let def = Deformation3::unpack(self.grid, x);
        let v = eval_impl(&def, self.params, self.grid, Some(grad));
        if !v.is_finite() {
            for g in grad.iter_mut() {
                *g = 0.0;
            }
        }
        v
    }

    fn project_state(&self, x: &mut [f64]) {
        for b in &self.basis {
            let coef: f64 = x
                .iter()
                .zip(&self.x_ref)
                .zip(b)
                .map(|((xi, ri), bi)| (xi - ri) * bi)
                .sum();
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi -= coef * bi;
            }
        }
    }

    fn project_gradient(&self, g: &mut [f64]) {
        for b in &self.basis {
            let coef: f64 = g.iter().zip(b).map(|(gi, bi)| gi * bi).sum();
            for (gi, bi) in g.iter_mut().zip(b) {
                *gi -= coef * bi;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimize3dResult {
    pub def: Deformation3,
    pub value: f64,
    /// `h^{-2 alpha}` times the minimum, the quantity the limit theory
    /// bounds.
    pub rescaled: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Quasi-Newton descent of the rescaled energy with an infinity-rejecting
/// line search and rigid-motion projection each iterate. The identity slab
/// is always admissible, so a run started there ends at a nonpositive value.
pub fn minimize3d(
    params: &FilmParams,
    grid: &Grid3,
    init: &Deformation3,
    tol: f64,
    max_iter: usize,
) -> Result<Minimize3dResult, FilmError> {
    let objective = FilmObjective {
        params,
        grid,
        basis: rigid_basis(grid, params.h),
        x_ref: Deformation3::identity_slab(grid, params.h).pack(),
    };
    let opts = MinimizeOptions { tol, max_iter, ..MinimizeOptions::default() };
    let res = optim::minimize(&objective, &init.pack(), &opts)?;
    Ok(Minimize3dResult {
        def: Deformation3::unpack(grid, &res.x),
        value: res.value,
        rescaled: res.value * params.rescale(),
        grad_norm: res.grad_norm,
        iterations: res.iterations,
        converged: res.converged,
    })
}

/// Extracts the planar displacements `(u_h, v_h)` from a 3D deformation
/// under the experimental gauge (no rotation, mean displacement removed):
/// thickness averages scaled by `min(h^{-2(alpha-1)}, h^{-alpha})` and
/// `h^{-(alpha-1)}` respectively. Needs `alpha > 1`.
pub fn extract_uv(
    def: &Deformation3,
    params: &FilmParams,
    grid: &Grid3,
) -> Result<PlateState, FilmError> {
    if params.alpha <= 1.0 {
        return Err(FilmError::AlphaOutOfRange { alpha: params.alpha, needed: "extraction requires alpha > 1" });
    }
    let id = Deformation3::identity_slab(grid, params.h);
    let n = grid.node_count();
    let mut mean = Vec3::ZERO;
    for k in 0..n {
        mean = mean + (def.y[k] - id.y[k]);
    }
    let mean = mean.scale(1.0 / n as f64);

    let su = fmath::powf(params.h, -2.0 * (params.alpha - 1.0)).min(fmath::powf(params.h, -params.alpha));
    let sv = fmath::powf(params.h, -(params.alpha - 1.0));
    let dz = grid.dz();

    let g2 = &grid.grid2;
    let mut state = PlateState::zeros(g2);
    for j in 0..g2.ny {
        for i in 0..g2.nx {
            let mut avg = Vec3::ZERO;
            for k in 0..grid.nz {
                let wz = if k == 0 || k == grid.nz - 1 { 0.5 } else { 1.0 };
                let tilde = def.y[grid.idx(i, j, k)] - mean;
                avg = avg + tilde.scale(wz * dz);
            }
            let node = g2.idx(i, j);
            state.u[node] = [su * (avg.0[0] - g2.x(i)), su * (avg.0[1] - g2.y(j))];
            state.v[node] = sv * avg.0[2];
        }
    }
    Ok(state)
}

/// Kirchhoff-regime recovery sequence on the cylinder isometry of radius
/// `r`: the base isometry plus `h`-corrections built from the bending-regime
/// minimizer `Gbar` and the optimal relaxation vectors of `Q_2^pi(Gbar)` and
/// `Q_2(II)`. Infinite `r` gives the flat sheet and reduces to the identity
/// slab.
pub fn recovery_kirchhoff(
    r: f64,
    q3: &QuadForm3,
    pi: f64,
    h: f64,
    grid: &Grid3,
) -> Result<Deformation3, FilmError> {
    let (_, gbar) = reduce::m_pi(q3, pi)?;
    let (_, beta) = reduce::q2pi_value(q3, pi, &gbar)?;
    let ii = plate::cylinder_second_fundamental_form(r);
    let (_, alpha_vec) = reduce::q2pi_value(q3, 0.0, &ii)?;

    let g2 = &grid.grid2;
    let mut y = Vec::with_capacity(grid.node_count());
    for k in 0..grid.nz {
        let x3 = grid.z(k);
        for j in 0..g2.ny {
            for i in 0..g2.nx {
                let (x1, x2) = (g2.x(i), g2.y(j));
                let (base, d1y, d2y, b) = cylinder_frame(r, x1, x2);
                // phi = grad'y (Gbar x'), zeta = -II Gbar x'.
                let gx = [gbar.a11 * x1 + gbar.a12 * x2, gbar.a12 * x1 + gbar.a22 * x2];
                let phi = d1y.scale(gx[0]) + d2y.scale(gx[1]);
                let zeta = [
                    -(ii.a11 * gx[0] + ii.a12 * gx[1]),
                    -(ii.a12 * gx[0] + ii.a22 * gx[1]),
                ];
                // In-frame components of the optimal correction fields.
                let cbar = d1y.scale(beta.0[0] - zeta[0])
                    + d2y.scale(beta.0[1] - zeta[1])
                    + b.scale(beta.0[2]);
                let dbar = d1y.scale(alpha_vec.0[0]) + d2y.scale(alpha_vec.0[1]) + b.scale(alpha_vec.0[2]);
                let point = base
                    + (phi + b.scale(x3)).scale(h)
                    + (cbar.scale(x3) + dbar.scale(0.5 * x3 * x3)).scale(h * h);
                y.push(point);
            }
        }
    }
    Ok(Deformation3 { y })
}

/// Base point and orthonormal frame of the cylinder parametrization
/// `y(x') = (x_1, r sin(x_2/r), r (1 - cos(x_2/r)))`; the flat sheet for
/// infinite `r`.
fn cylinder_frame(r: f64, x1: f64, x2: f64) -> (Vec3, Vec3, Vec3, Vec3) {
    if r.is_infinite() {
        return (
            Vec3::new(x1, x2, 0.0),
            Vec3::basis(0),
            Vec3::basis(1),
            Vec3::basis(2),
        );
    }
    let t = x2 / r;
    let (s, c) = (fmath::sin(t), fmath::cos(t));
    (
        Vec3::new(x1, r * s, r * (1.0 - c)),
        Vec3::basis(0),
        Vec3::new(0.0, c, s),
        Vec3::new(0.0, -s, c),
    )
}

/// Closed-form planar fields feeding the von Karman recovery ansatz.
pub struct VkAnsatzFields<'a> {
    pub u: &'a dyn Fn(f64, f64) -> [f64; 2],
    /// Symmetric gradient `e'(u)`.
    pub e_u: &'a dyn Fn(f64, f64) -> Mat2Sym,
    pub v: &'a dyn Fn(f64, f64) -> f64,
    pub grad_v: &'a dyn Fn(f64, f64) -> [f64; 2],
    pub hess_v: &'a dyn Fn(f64, f64) -> Mat2Sym,
}

/// Recovery sequence for the von Karman regimes (`alpha >= 2`):
/// `id_h + (h^alpha u, h^{alpha-1} v) - h^alpha x_3 (grad v, 0) +
/// h^{alpha+1} (x_3 c + x_3^2/2 d)` with `c, d` the optimal relaxation
/// vectors (including the `-|grad v|^2 e_3 / 2` correction at `alpha = 2`).
pub fn recovery_vk(
    fields: &VkAnsatzFields<'_>,
    params: &FilmParams,
    q3: &QuadForm3,
    grid: &Grid3,
) -> Result<Deformation3, FilmError> {
    if params.alpha < 2.0 {
        return Err(FilmError::AlphaOutOfRange {
            alpha: params.alpha,
            needed: "the von Karman ansatz requires alpha >= 2",
        });
    }
    let is_vk = params.alpha == 2.0;
    let h = params.h;
    let h_a = fmath::powf(h, params.alpha);
    let h_a1 = fmath::powf(h, params.alpha - 1.0);
    let h_ap1 = fmath::powf(h, params.alpha + 1.0);

    let g2 = &grid.grid2;
    // Per-column optimal correction vectors, computed once per 2D node.
    let n2 = g2.node_count();
    let mut c_field = Vec::with_capacity(n2);
    let mut d_field = Vec::with_capacity(n2);
    for j in 0..g2.ny {
        for i in 0..g2.nx {
            let (x1, x2) = (g2.x(i), g2.y(j));
            let gv = (fields.grad_v)(x1, x2);
            let mut strain = (fields.e_u)(x1, x2);
            if is_vk {
                strain = strain + Mat2Sym::outer(&gv) * 0.5;
            }
            let (_, mut c) = reduce::q2pi_value(q3, params.pi, &strain)?;
            if is_vk {
                c.0[2] -= 0.5 * (gv[0] * gv[0] + gv[1] * gv[1]);
            }
            let hess = (fields.hess_v)(x1, x2);
            let (_, d) = reduce::q2pi_value(q3, 0.0, &(hess * -1.0))?;
            c_field.push(c);
            d_field.push(d);
        }
    }

    let mut y = Vec::with_capacity(grid.node_count());
    for k in 0..grid.nz {
        let x3 = grid.z(k);
        for j in 0..g2.ny {
            for i in 0..g2.nx {
                let (x1, x2) = (g2.x(i), g2.y(j));
                let node = g2.idx(i, j);
                let u = (fields.u)(x1, x2);
                let v = (fields.v)(x1, x2);
                let gv = (fields.grad_v)(x1, x2);
                let correction = c_field[node].scale(x3) + d_field[node].scale(0.5 * x3 * x3);
                y.push(Vec3::new(
                    x1 + h_a * (u[0] - x3 * gv[0]) + h_ap1 * correction.0[0],
                    x2 + h_a * (u[1] - x3 * gv[1]) + h_ap1 * correction.0[1],
                    h * x3 + h_a1 * v + h_ap1 * correction.0[2],
                ));
            }
        }
    }
    Ok(Deformation3 { y })
}

/// One thickness in a sweep: minimized rescaled energy and the gauge-fixed
/// distance of the extracted planar fields to a reference 2D minimizer.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub h: f64,
    pub min_value: f64,
    pub rescaled_min: f64,
    pub u_err: f64,
    pub v_err: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Regime selector matching the exponent.
pub fn regime_for_alpha(alpha: f64) -> Regime {
    if alpha == 2.0 {
        Regime::VonKarman
    } else if alpha > 2.0 {
        Regime::VonKarmanLin
    } else {
        Regime::BendingLin
    }
}

/// Runs one thickness: minimize from the identity slab, rescale, extract
/// planar fields, and compare (after gauge projection) to the reference.
pub fn sweep_point(
    params: &FilmParams,
    grid: &Grid3,
    reference: &PlateState,
    tol: f64,
    max_iter: usize,
) -> Result<SweepPoint, FilmError> {
    reference.check_dims(&grid.grid2)?;
    let init = Deformation3::identity_slab(grid, params.h);
    let res = minimize3d(params, grid, &init, tol, max_iter)?;
    let extracted = extract_uv(&res.def, params, grid)?;

    let regime = regime_for_alpha(params.alpha);
    let mut a = extracted.pack();
    let mut b = reference.clone().pack();
    plate::project_null_space(&grid.grid2, regime, &mut a);
    plate::project_null_space(&grid.grid2, regime, &mut b);
    let (u_err, v_err) = field_errors(&grid.grid2, &a, &b);

    Ok(SweepPoint {
        h: params.h,
        min_value: res.value,
        rescaled_min: res.rescaled,
        u_err,
        v_err,
        iterations: res.iterations,
        converged: res.converged,
    })
}

fn field_errors(grid: &Grid2, a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = grid.node_count();
    let mut u_err = 0.0;
    let mut v_err = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let w = grid.quad_weight(i, j);
            let du = [a[k] - b[k], a[n + k] - b[n + k]];
            u_err += w * (du[0] * du[0] + du[1] * du[1]);
            let dv = a[2 * n + k] - b[2 * n + k];
            v_err += w * dv * dv;
        }
    }
    (fmath::sqrt(u_err), fmath::sqrt(v_err))
}

/// Sweeps a decreasing thickness list with shared parameters; deterministic
/// given identical inputs.
pub fn gamma_sweep(
    base: &FilmParams,
    h_list: &[f64],
    grid: &Grid3,
    reference: &PlateState,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<SweepPoint>, FilmError> {
    let mut out = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let params = FilmParams::new(h, base.alpha, base.pi, base.density)?;
        out.push(sweep_point(&params, grid, reference, tol, max_iter)?);
    }
    Ok(out)
}
