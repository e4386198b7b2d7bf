//! Discretized 2D limit functionals on a rectangular grid: the von Karman
//! energy with and without pressure, its linearized variant, the linearized
//! bending energy with constraint diagnostics, the nonlinear bending energy
//! on cylinder isometries, and the relaxed membrane-example energy.
//!
//! Discretization: central differences with one-sided second-order closures
//! at the boundary, compact second-difference stencils for the Hessian, and
//! trapezoidal quadrature. All gradients are assembled analytically by
//! scattering through the transposed stencils.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::algebra::{Mat2Sym, Vec3};
use crate::fmath;
use crate::membrane;
use crate::optim::{self, MinimizeOptions, Objective, OptimError};
use crate::reduce::{self, PressureReduction, QuadForm2, ReduceError};

#[derive(Debug, Clone, PartialEq)]
pub enum PlateError {
    /// Node counts below 4 or nonpositive side lengths.
    InvalidGrid { nx: usize, ny: usize },
    /// Field length does not match the grid.
    DimensionMismatch { expected: usize, got: usize },
    /// The membrane envelope failed certification for this pressure.
    EnvelopeNotCertified { pi: f64, deviation: f64 },
    Optim(OptimError),
    Reduce(ReduceError),
    Membrane(membrane::MembraneError),
}

impl fmt::Display for PlateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlateError::InvalidGrid { nx, ny } => {
                write!(f, "grid must have nx, ny >= 4 and positive sides (got {nx} x {ny})")
            }
            PlateError::DimensionMismatch { expected, got } => {
                write!(f, "field has {got} nodes, grid has {expected}")
            }
            PlateError::EnvelopeNotCertified { pi, deviation } => {
                write!(f, "membrane envelope not certified at pi = {pi} (deviation {deviation:e})")
            }
            PlateError::Optim(e) => write!(f, "{e}"),
            PlateError::Reduce(e) => write!(f, "{e}"),
            PlateError::Membrane(e) => write!(f, "{e}"),
        }
    }
}

impl From<OptimError> for PlateError {
    fn from(e: OptimError) -> Self {
        PlateError::Optim(e)
    }
}

impl From<ReduceError> for PlateError {
    fn from(e: ReduceError) -> Self {
        PlateError::Reduce(e)
    }
}

impl From<membrane::MembraneError> for PlateError {
    fn from(e: membrane::MembraneError) -> Self {
        PlateError::Membrane(e)
    }
}

/// Uniform rectangular node grid on `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self, PlateError> {
        if nx < 4 || ny < 4 || !(lx > 0.0) || !(ly > 0.0) {
            return Err(PlateError::InvalidGrid { nx, ny });
        }
        Ok(Grid2 { lx, ly, nx, ny })
    }

    pub fn unit_square(n: usize) -> Result<Self, PlateError> {
        Grid2::new(1.0, 1.0, n, n)
    }

    pub fn dx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    /// Trapezoidal quadrature weight of node `(i, j)`, including `dx dy`.
    pub fn quad_weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wx * wy * self.dx() * self.dy()
    }
}

/// In-plane and out-of-plane displacement fields on a [`Grid2`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlateState {
    pub u: Vec<[f64; 2]>,
    pub v: Vec<f64>,
}

impl PlateState {
    pub fn zeros(grid: &Grid2) -> Self {
        let n = grid.node_count();
        PlateState { u: vec![[0.0; 2]; n], v: vec![0.0; n] }
    }

    /// Samples closed-form fields `u(x, y)` and `v(x, y)` on the grid.
    pub fn from_fns(
        grid: &Grid2,
        mut fu: impl FnMut(f64, f64) -> [f64; 2],
        mut fv: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        let mut state = PlateState::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = (grid.x(i), grid.y(j));
                let k = grid.idx(i, j);
                state.u[k] = fu(x, y);
                state.v[k] = fv(x, y);
            }
        }
        state
    }

    pub fn check_dims(&self, grid: &Grid2) -> Result<(), PlateError> {
        let n = grid.node_count();
        if self.u.len() != n || self.v.len() != n {
            return Err(PlateError::DimensionMismatch { expected: n, got: self.u.len() });
        }
        Ok(())
    }

    /// Packs into a flat dof vector `[u1 | u2 | v]`.
    pub fn pack(&self) -> Vec<f64> {
        let n = self.v.len();
        let mut x = Vec::with_capacity(3 * n);
        x.extend(self.u.iter().map(|u| u[0]));
        x.extend(self.u.iter().map(|u| u[1]));
        x.extend(self.v.iter().copied());
        x
    }

    pub fn unpack(grid: &Grid2, x: &[f64]) -> Self {
        let n = grid.node_count();
        let mut state = PlateState::zeros(grid);
        for k in 0..n {
            state.u[k] = [x[k], x[n + k]];
            state.v[k] = x[2 * n + k];
        }
        state
    }
}

/// Regime selector for the 2D limit functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// von Karman, the `alpha = 2` limit.
    VonKarman,
    /// linearized von Karman, `alpha > 2`.
    VonKarmanLin,
    /// linearized bending, `1 < alpha < 2`.
    BendingLin,
}

/// A limit functional: regime, pressure, and the reduced forms produced by
/// the density that generated them.
#[derive(Debug, Clone)]
pub struct FunctionalSpec {
    pub regime: Regime,
    pub pi: f64,
    pub q2: QuadForm2,
    pub reduction: PressureReduction,
}

impl FunctionalSpec {
    pub fn new(regime: Regime, pi: f64, q2: QuadForm2, reduction: PressureReduction) -> Self {
        FunctionalSpec { regime, pi, q2, reduction }
    }

    /// The bending-regime constant `m_pi` computed from the reduced data,
    /// `min_G { Q_2(G) + pi L G + 2 pi tr G } + pi^2 kappa`.
    pub fn m_pi(&self) -> Result<f64, ReduceError> {
        reduce::m_pi_from_reduction(&self.q2, &self.reduction, self.pi).map(|(v, _)| v)
    }
}

// ---------------------------------------------------------------------------
// Difference stencils.
//
// First derivative: central in the interior, one-sided second-order at the
// ends. Second derivative: compact three-point in the interior, one-sided
// four-point second-order at the ends. The same coefficient tables drive the
// forward application and the transposed scatter.
// ---------------------------------------------------------------------------

fn first_stencil(i: usize, n: usize) -> [(usize, f64); 3] {
    if i == 0 {
        [(0, -1.5), (1, 2.0), (2, -0.5)]
    } else if i == n - 1 {
        [(n - 1, 1.5), (n - 2, -2.0), (n - 3, 0.5)]
    } else {
        [(i - 1, -0.5), (i, 0.0), (i + 1, 0.5)]
    }
}

fn second_stencil(i: usize, n: usize) -> [(usize, f64); 4] {
    if i == 0 {
        [(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
    } else if i == n - 1 {
        [(n - 1, 2.0), (n - 2, -5.0), (n - 3, 4.0), (n - 4, -1.0)]
    } else {
        [(i - 1, 1.0), (i, -2.0), (i + 1, 1.0), (i, 0.0)]
    }
}

/// Differential operators bound to one grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencils {
    grid: Grid2,
}

impl Stencils {
    pub(crate) fn new(grid: &Grid2) -> Self {
        Stencils { grid: *grid }
    }

    pub(crate) fn dx(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let inv = 1.0 / g.dx();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut s = 0.0;
                for (k, c) in first_stencil(i, g.nx) {
                    s += c * f[g.idx(k, j)];
                }
                out[g.idx(i, j)] = s * inv;
            }
        }
    }

    pub(crate) fn dy(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let inv = 1.0 / g.dy();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut s = 0.0;
                for (k, c) in first_stencil(j, g.ny) {
                    s += c * f[g.idx(i, k)];
                }
                out[g.idx(i, j)] = s * inv;
            }
        }
    }

    pub(crate) fn dxx(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let inv = 1.0 / (g.dx() * g.dx());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut s = 0.0;
                for (k, c) in second_stencil(i, g.nx) {
                    s += c * f[g.idx(k, j)];
                }
                out[g.idx(i, j)] = s * inv;
            }
        }
    }

    pub(crate) fn dyy(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let inv = 1.0 / (g.dy() * g.dy());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut s = 0.0;
                for (k, c) in second_stencil(j, g.ny) {
                    s += c * f[g.idx(i, k)];
                }
                out[g.idx(i, j)] = s * inv;
            }
        }
    }

    /// Mixed derivative as the composition `Dx (Dy f)`.
    pub(crate) fn dxy(&self, f: &[f64], tmp: &mut [f64], out: &mut [f64]) {
        self.dy(f, tmp);
        self.dx(tmp, out);
    }

    pub(crate) fn dx_transpose(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let inv = 1.0 / g.dx();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let fv = f[g.idx(i, j)] * inv;
                if fv == 0.0 {
                    continue;
                }
                for (k, c) in first_stencil(i, g.nx) {
                    out[g.idx(k, j)] += c * fv;
                }
            }
        }
    }

    pub(crate) fn dy_transpose(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let inv = 1.0 / g.dy();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let fv = f[g.idx(i, j)] * inv;
                if fv == 0.0 {
                    continue;
                }
                for (k, c) in first_stencil(j, g.ny) {
                    out[g.idx(i, k)] += c * fv;
                }
            }
        }
    }

    pub(crate) fn dxx_transpose(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let inv = 1.0 / (g.dx() * g.dx());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let fv = f[g.idx(i, j)] * inv;
                if fv == 0.0 {
                    continue;
                }
                for (k, c) in second_stencil(i, g.nx) {
                    out[g.idx(k, j)] += c * fv;
                }
            }
        }
    }

    pub(crate) fn dyy_transpose(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let inv = 1.0 / (g.dy() * g.dy());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let fv = f[g.idx(i, j)] * inv;
                if fv == 0.0 {
                    continue;
                }
                for (k, c) in second_stencil(j, g.ny) {
                    out[g.idx(i, k)] += c * fv;
                }
            }
        }
    }

    /// Transpose of [`Stencils::dxy`]: `Dy' (Dx' f)`.
    pub(crate) fn dxy_transpose(&self, f: &[f64], tmp: &mut [f64], out: &mut [f64]) {
        for t in tmp.iter_mut() {
            *t = 0.0;
        }
        self.dx_transpose(f, tmp);
        self.dy_transpose(tmp, out);
    }
}

/// First derivatives and Hessian entries of the state, per node.
struct DerivedFields {
    du1: [Vec<f64>; 2],
    du2: [Vec<f64>; 2],
    dv: [Vec<f64>; 2],
    hxx: Vec<f64>,
    hyy: Vec<f64>,
    hxy: Vec<f64>,
}

impl DerivedFields {
    fn compute(state: &PlateState, grid: &Grid2) -> Self {
        let n = grid.node_count();
        let st = Stencils::new(grid);
        let u1: Vec<f64> = state.u.iter().map(|u| u[0]).collect();
        let u2: Vec<f64> = state.u.iter().map(|u| u[1]).collect();
        let mut fields = DerivedFields {
            du1: [vec![0.0; n], vec![0.0; n]],
            du2: [vec![0.0; n], vec![0.0; n]],
            dv: [vec![0.0; n], vec![0.0; n]],
            hxx: vec![0.0; n],
            hyy: vec![0.0; n],
            hxy: vec![0.0; n],
        };
        st.dx(&u1, &mut fields.du1[0]);
        st.dy(&u1, &mut fields.du1[1]);
        st.dx(&u2, &mut fields.du2[0]);
        st.dy(&u2, &mut fields.du2[1]);
        st.dx(&state.v, &mut fields.dv[0]);
        st.dy(&state.v, &mut fields.dv[1]);
        st.dxx(&state.v, &mut fields.hxx);
        st.dyy(&state.v, &mut fields.hyy);
        let mut tmp = vec![0.0; n];
        st.dxy(&state.v, &mut tmp, &mut fields.hxy);
        fields
    }

    fn membrane_strain(&self, k: usize, nonlinear: bool) -> Mat2Sym {
        let mut e = Mat2Sym::new(
            self.du1[0][k],
            self.du2[1][k],
            0.5 * (self.du1[1][k] + self.du2[0][k]),
        );
        if nonlinear {
            let (vx, vy) = (self.dv[0][k], self.dv[1][k]);
            e = e + Mat2Sym::new(0.5 * vx * vx, 0.5 * vy * vy, 0.5 * vx * vy);
        }
        e
    }

    fn hessian(&self, k: usize) -> Mat2Sym {
        Mat2Sym::new(self.hxx[k], self.hyy[k], self.hxy[k])
    }
}

/// Which terms enter the assembled functional.
#[derive(Clone, Copy)]
struct Terms {
    nonlinear_strain: bool,
    strain_energy: bool,
    pressure: bool,
}

fn terms_for(spec: &FunctionalSpec, pressure: bool) -> Terms {
    match spec.regime {
        Regime::VonKarman => Terms { nonlinear_strain: true, strain_energy: true, pressure },
        Regime::VonKarmanLin => Terms { nonlinear_strain: false, strain_energy: true, pressure },
        Regime::BendingLin => Terms { nonlinear_strain: true, strain_energy: false, pressure: false },
    }
}

/// Single assembly routine for value and (optionally) gradient.
fn assemble(
    state: &PlateState,
    spec: &FunctionalSpec,
    grid: &Grid2,
    terms: Terms,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let n = grid.node_count();
    let fields = DerivedFields::compute(state, grid);
    let pressure_matrix = spec.reduction.l_matrix() * 0.5 + Mat2Sym::identity();

    let mut value = 0.0;
    // Frobenius-gradient matrices per node, scaled by quadrature weight.
    let mut strain_p = vec![Mat2Sym::ZERO; n];
    let mut bend_p = vec![Mat2Sym::ZERO; n];

    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let w = grid.quad_weight(i, j);
            let hess = fields.hessian(k);
            value += w / 24.0 * spec.q2.eval(&hess);
            if grad.is_some() {
                bend_p[k] = spec.q2.grad(&hess) * (w / 24.0);
            }
            if terms.strain_energy {
                let e = fields.membrane_strain(k, terms.nonlinear_strain);
                value += 0.5 * w * spec.q2.eval(&e);
                if terms.pressure {
                    value += spec.pi * w * (0.5 * spec.reduction.l_apply(&e) + e.trace());
                }
                if grad.is_some() {
                    let mut p = spec.q2.grad(&e) * (0.5 * w);
                    if terms.pressure {
                        p = p + pressure_matrix * (spec.pi * w);
                    }
                    strain_p[k] = p;
                }
            }
        }
    }

    if let Some(g) = grad.as_deref_mut() {
        scatter_gradient(grid, &fields, &strain_p, &bend_p, terms, g);
    }
    value
}

/// Scatters per-node Frobenius gradients back to dof space through the
/// transposed stencils. Layout: `[u1 | u2 | v]`.
fn scatter_gradient(
    grid: &Grid2,
    fields: &DerivedFields,
    strain_p: &[Mat2Sym],
    bend_p: &[Mat2Sym],
    terms: Terms,
    grad: &mut [f64],
) {
    let n = grid.node_count();
    let st = Stencils::new(grid);
    for g in grad.iter_mut() {
        *g = 0.0;
    }
    let (gu1, rest) = grad.split_at_mut(n);
    let (gu2, gv) = rest.split_at_mut(n);

    let p11: Vec<f64> = strain_p.iter().map(|p| p.a11).collect();
    let p22: Vec<f64> = strain_p.iter().map(|p| p.a22).collect();
    let p12: Vec<f64> = strain_p.iter().map(|p| p.a12).collect();

    if terms.strain_energy {
        // dE11/du1 = Dx, dE12/du1 = Dy/2; <P, dE> pairs off-diagonals twice.
        st.dx_transpose(&p11, gu1);
        st.dy_transpose(&p12, gu1);
        st.dy_transpose(&p22, gu2);
        st.dx_transpose(&p12, gu2);

        if terms.nonlinear_strain {
            // Chain rule through (1/2) grad v (x) grad v.
            let ax: Vec<f64> = (0..n).map(|k| p11[k] * fields.dv[0][k] + p12[k] * fields.dv[1][k]).collect();
            let ay: Vec<f64> = (0..n).map(|k| p22[k] * fields.dv[1][k] + p12[k] * fields.dv[0][k]).collect();
            st.dx_transpose(&ax, gv);
            st.dy_transpose(&ay, gv);
        }
    }

    let b11: Vec<f64> = bend_p.iter().map(|p| p.a11).collect();
    let b22: Vec<f64> = bend_p.iter().map(|p| p.a22).collect();
    let b12: Vec<f64> = bend_p.iter().map(|p| 2.0 * p.a12).collect();
    st.dxx_transpose(&b11, gv);
    st.dyy_transpose(&b22, gv);
    let mut tmp = vec![0.0; n];
    st.dxy_transpose(&b12, &mut tmp, gv);
}

/// The von Karman energy
/// `(1/2) int Q_2(e'(u) + (1/2) grad v (x) grad v) + (1/24) int Q_2(Hess v)`.
pub fn eval_evk(state: &PlateState, spec: &FunctionalSpec, grid: &Grid2) -> f64 {
    assemble(state, spec, grid, terms_for(&vk(spec), false), None)
}

pub fn grad_evk(state: &PlateState, spec: &FunctionalSpec, grid: &Grid2) -> Vec<f64> {
    let mut g = vec![0.0; 3 * grid.node_count()];
    assemble(state, spec, grid, terms_for(&vk(spec), false), Some(&mut g));
    g
}

/// The von Karman energy with the pressure term
/// `pi int ((1/2) L(E) + div u + (1/2) |grad v|^2)`, with
/// `E = e'(u) + (1/2) grad v (x) grad v` (the last two integrands equal `tr E`).
pub fn eval_evk_pi(state: &PlateState, spec: &FunctionalSpec, grid: &Grid2) -> f64 {
    assemble(state, spec, grid, terms_for(&vk(spec), true), None)
}

pub fn grad_evk_pi(state: &PlateState, spec: &FunctionalSpec, grid: &Grid2) -> Vec<f64> {
    let mut g = vec![0.0; 3 * grid.node_count()];
    assemble(state, spec, grid, terms_for(&vk(spec), true), Some(&mut g));
    g
}

/// The linearized von Karman energy with pressure:
/// `(1/2) int Q_2(e'(u)) + (1/24) int Q_2(Hess v) + pi int ((1/2) L(e'(u)) + div u)`.
pub fn eval_evklin_pi(state: &PlateState, spec: &FunctionalSpec, grid: &Grid2) -> f64 {
    assemble(state, spec, grid, terms_for(&vklin(spec), true), None)
}

pub fn grad_evklin_pi(state: &PlateState, spec: &FunctionalSpec, grid: &Grid2) -> Vec<f64> {
    let mut g = vec![0.0; 3 * grid.node_count()];
    assemble(state, spec, grid, terms_for(&vklin(spec), true), Some(&mut g));
    g
}

fn vk(spec: &FunctionalSpec) -> FunctionalSpec {
    FunctionalSpec { regime: Regime::VonKarman, ..spec.clone() }
}

fn vklin(spec: &FunctionalSpec) -> FunctionalSpec {
    FunctionalSpec { regime: Regime::VonKarmanLin, ..spec.clone() }
}

/// The linearized bending energy `(1/24) int Q_2(Hess v)` together with the
/// discrete residual of the constraint
/// `|e'(u) + (1/2) grad v (x) grad v| = det Hess v = 0`.
pub fn eval_ebenlin(state: &PlateState, spec: &FunctionalSpec, grid: &Grid2) -> (f64, f64) {
    let fields = DerivedFields::compute(state, grid);
    let mut value = 0.0;
    let mut residual = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let w = grid.quad_weight(i, j);
            let hess = fields.hessian(k);
            value += w / 24.0 * spec.q2.eval(&hess);
            let e = fields.membrane_strain(k, true);
            residual += w * (e.norm() + hess.det().abs());
        }
    }
    (value, residual)
}

/// Gradient of the bending value of [`eval_ebenlin`] (the constraint residual
/// is a diagnostic, not part of the minimized functional).
pub fn grad_ebenlin(state: &PlateState, spec: &FunctionalSpec, grid: &Grid2) -> Vec<f64> {
    let mut g = vec![0.0; 3 * grid.node_count()];
    let t = Terms { nonlinear_strain: true, strain_energy: false, pressure: false };
    assemble(state, spec, grid, t, Some(&mut g));
    g
}

/// The full limit functional of the `alpha in (1, 2)` regime: linearized
/// bending plus the state-independent constant `m_pi |S| / 2`.
pub fn eval_benlin_limit(
    state: &PlateState,
    spec: &FunctionalSpec,
    grid: &Grid2,
) -> Result<(f64, f64), PlateError> {
    let (value, residual) = eval_ebenlin(state, spec, grid);
    let m = spec.m_pi()?;
    Ok((value + 0.5 * m * grid.area(), residual))
}

/// Energy and (projected-gradient) diagnostics from [`minimize2d`].
#[derive(Debug, Clone)]
pub struct Minimize2dResult {
    pub state: PlateState,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value per accepted iterate, starting at the initial state.
    pub values: Vec<f64>,
}

struct PlateObjective<'a> {
    spec: &'a FunctionalSpec,
    grid: Grid2,
}

impl PlateObjective<'_> {
    fn terms(&self) -> Terms {
        terms_for(self.spec, true)
    }
}

impl Objective for PlateObjective<'_> {
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let state = PlateState::unpack(&self.grid, x);
        assemble(&state, self.spec, &self.grid, self.terms(), Some(grad))
    }

    fn project_state(&self, x: &mut [f64]) {
        project_null_space(&self.grid, self.spec.regime, x);
    }

    fn project_gradient(&self, g: &mut [f64]) {
        project_null_space(&self.grid, self.spec.regime, g);
    }
}

/// Removes the invariant directions: mean and mean in-plane rotation from
/// `u`, mean from `v`, and additionally the affine part of `v` in the
/// linearized regimes (where `v` enters through its Hessian only).
pub fn project_null_space(grid: &Grid2, regime: Regime, x: &mut [f64]) {
    let n = grid.node_count();
    let (u1, rest) = x.split_at_mut(n);
    let (u2, v) = rest.split_at_mut(n);

    let xc = 0.5 * grid.lx;
    let yc = 0.5 * grid.ly;
    subtract_mean(u1);
    subtract_mean(u2);

    // In-plane rotation field s = (-(y - yc), (x - xc)).
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let sx = -(grid.y(j) - yc);
            let sy = grid.x(i) - xc;
            num += u1[k] * sx + u2[k] * sy;
            den += sx * sx + sy * sy;
        }
    }
    if den > 0.0 {
        let t = num / den;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.idx(i, j);
                u1[k] -= t * (-(grid.y(j) - yc));
                u2[k] -= t * (grid.x(i) - xc);
            }
        }
    }

    subtract_mean(v);
    if matches!(regime, Regime::VonKarmanLin | Regime::BendingLin) {
        // Affine part of v; the centered x and y factors are orthogonal on a
        // tensor grid, so two independent 1D projections suffice.
        let mut bx = (0.0, 0.0);
        let mut by = (0.0, 0.0);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.idx(i, j);
                let cx = grid.x(i) - xc;
                let cy = grid.y(j) - yc;
                bx = (bx.0 + v[k] * cx, bx.1 + cx * cx);
                by = (by.0 + v[k] * cy, by.1 + cy * cy);
            }
        }
        let cbx = if bx.1 > 0.0 { bx.0 / bx.1 } else { 0.0 };
        let cby = if by.1 > 0.0 { by.0 / by.1 } else { 0.0 };
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.idx(i, j);
                v[k] -= cbx * (grid.x(i) - xc) + cby * (grid.y(j) - yc);
            }
        }
    }
}

fn subtract_mean(f: &mut [f64]) {
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    for v in f.iter_mut() {
        *v -= mean;
    }
}

/// Minimizes the regime's functional by limited-memory quasi-Newton descent
/// with invariance-fixing projections after each iterate.
pub fn minimize2d(
    spec: &FunctionalSpec,
    grid: &Grid2,
    init: &PlateState,
    tol: f64,
    max_iter: usize,
) -> Result<Minimize2dResult, PlateError> {
    init.check_dims(grid)?;
    let objective = PlateObjective { spec, grid: *grid };
    let opts = MinimizeOptions { tol, max_iter, ..MinimizeOptions::default() };
    let res = optim::minimize(&objective, &init.pack(), &opts)?;
    Ok(Minimize2dResult {
        state: PlateState::unpack(grid, &res.x),
        value: res.value,
        grad_norm: res.grad_norm,
        iterations: res.iterations,
        converged: res.converged,
        values: res.values,
    })
}

/// Per-node strain field `e'(u)` (plus the nonlinear `grad v` term if asked).
pub fn strain_field(state: &PlateState, grid: &Grid2, nonlinear: bool) -> Vec<Mat2Sym> {
    let fields = DerivedFields::compute(state, grid);
    (0..grid.node_count()).map(|k| fields.membrane_strain(k, nonlinear)).collect()
}

/// The second fundamental form of the cylinder parametrization
/// `y(x) = (x_1, r sin(x_2 / r), r (1 - cos(x_2 / r)))`, evaluated from its
/// closed-form first derivatives and normal: constant `diag(0, -1/r)`.
pub fn cylinder_second_fundamental_form(r: f64) -> Mat2Sym {
    // With t = x_2 / r: d1y = e1, d2y = (0, cos t, sin t),
    // b = d1y x d2y = (0, -sin t, cos t), d2b = -(0, cos t, sin t) / r, so
    // II = grad'y' grad'b has the single entry d2y . d2b = -1/r.
    Mat2Sym::new(0.0, -1.0 / r, 0.0)
}

/// Bending energy `(1/24) int_S Q_2(II)` of the cylinder isometry of radius
/// `r` over the grid rectangle; `r` may be infinite (flat sheet).
pub fn eval_eben_cylinder(r: f64, q2: &QuadForm2, grid: &Grid2) -> f64 {
    let ii = cylinder_second_fundamental_form(r);
    let mut value = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            value += grid.quad_weight(i, j) / 24.0 * q2.eval(&ii);
        }
    }
    value
}

/// The relaxed membrane-example energy of a planar deformation field:
/// `int_S [ (|d1 y|^3 + |d2 y|^3)/3 + (sqrt 2 / 3) C ]` with `C` the
/// certified envelope constant for this pressure.
///
/// Refuses pressures for which the envelope certification fails.
pub fn eval_membrane_example(y: &[Vec3], pi: f64, grid: &Grid2) -> Result<f64, PlateError> {
    let n = grid.node_count();
    if y.len() != n {
        return Err(PlateError::DimensionMismatch { expected: n, got: y.len() });
    }
    let check = membrane::conjecture_check(pi)?;
    if !check.certified() {
        return Err(PlateError::EnvelopeNotCertified { pi, deviation: check.deviation });
    }
    let st = Stencils::new(grid);
    let comps: [Vec<f64>; 3] = [
        y.iter().map(|p| p.0[0]).collect(),
        y.iter().map(|p| p.0[1]).collect(),
        y.iter().map(|p| p.0[2]).collect(),
    ];
    let mut d1 = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut d2 = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for c in 0..3 {
        st.dx(&comps[c], &mut d1[c]);
        st.dy(&comps[c], &mut d2[c]);
    }
    let constant = core::f64::consts::SQRT_2 / 3.0 * check.envelope_constant;
    let mut value = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let n1 = fmath::sqrt(d1[0][k] * d1[0][k] + d1[1][k] * d1[1][k] + d1[2][k] * d1[2][k]);
            let n2 = fmath::sqrt(d2[0][k] * d2[0][k] + d2[1][k] * d2[1][k] + d2[2][k] * d2[2][k]);
            value += grid.quad_weight(i, j) * ((n1 * n1 * n1 + n2 * n2 * n2) / 3.0 + constant);
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::{extract_l_kappa, reduce_q2, QuadForm3};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::vec::Vec;

    fn spec_iso(regime: Regime, mu: f64, lambda: f64, pi: f64) -> FunctionalSpec {
        let q3 = QuadForm3::isotropic(mu, lambda).unwrap();
        FunctionalSpec::new(regime, pi, reduce_q2(&q3).unwrap(), extract_l_kappa(&q3).unwrap())
    }

    fn random_state(grid: &Grid2, seed: u64, scale: f64) -> PlateState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = PlateState::zeros(grid);
        for k in 0..grid.node_count() {
            s.u[k] = [rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)];
            s.v[k] = rng.gen_range(-scale..scale);
        }
        s
    }

    #[test]
    fn zero_and_affine_states() {
        let grid = Grid2::unit_square(12).unwrap();
        let spec = spec_iso(Regime::VonKarman, 1.0, 1.0, 0.7);
        let zero = PlateState::zeros(&grid);
        assert_eq!(eval_evk(&zero, &spec, &grid), 0.0);
        assert_eq!(eval_evk_pi(&zero, &spec, &grid), 0.0);

        // Affine v with u = 0: strain and Hessian both vanish.
        let affine = PlateState::from_fns(&grid, |_, _| [0.0, 0.0], |x, y| 0.3 * x - 0.1 * y + 2.0);
        let e = eval_evk(&affine, &spec, &grid);
        assert!(e.abs() < 1e-22, "affine sheet should carry no vk energy, got {e:e}");
    }

    #[test]
    fn homogeneous_strain_is_exact() {
        // u = x', v = 0 on the unit square: E = I exactly, quadrature exact.
        let grid = Grid2::unit_square(9).unwrap();
        let state = PlateState::from_fns(&grid, |x, y| [x, y], |_, _| 0.0);
        let spec = spec_iso(Regime::VonKarman, 1.0, 1.0, 1.0);
        assert_relative_eq!(eval_evk(&state, &spec, &grid), 10.0 / 3.0, epsilon = 1e-12);
        // Pressure adds (1/2) L(I) + tr I = -2/3 + 2.
        assert_relative_eq!(eval_evk_pi(&state, &spec, &grid), 10.0 / 3.0 + 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn evk_pi_reduces_to_evk_at_zero_pressure() {
        let grid = Grid2::new(1.3, 0.8, 9, 7).unwrap();
        let spec = spec_iso(Regime::VonKarman, 1.2, 0.6, 0.0);
        let s = random_state(&grid, 3, 0.4);
        assert_eq!(eval_evk(&s, &spec, &grid), eval_evk_pi(&s, &spec, &grid));
    }

    #[test]
    fn evklin_affine_minimizer_value() {
        // beta = -1/5 minimizes (10/3) b^2 + (4/3) b; per-area value -2/15.
        let grid = Grid2::unit_square(11).unwrap();
        let spec = spec_iso(Regime::VonKarmanLin, 1.0, 1.0, 1.0);
        let beta = -0.2;
        let state = PlateState::from_fns(&grid, |x, y| [beta * x, beta * y], |_, _| 0.0);
        assert_relative_eq!(
            eval_evklin_pi(&state, &spec, &grid) / grid.area(),
            -2.0 / 15.0,
            epsilon = 1e-12
        );
        // Rigid in-plane rotation carries no energy.
        let rot = PlateState::from_fns(&grid, |x, y| [-0.3 * y, 0.3 * x], |_, _| 0.0);
        assert!(eval_evklin_pi(&rot, &spec, &grid).abs() < 1e-13);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let grid = Grid2::new(1.0, 1.2, 6, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for regime in [Regime::VonKarman, Regime::VonKarmanLin, Regime::BendingLin] {
            let spec = spec_iso(regime, 1.1, 0.7, 0.9);
            for trial in 0..5 {
                let state = random_state(&grid, 100 + trial, 0.5);
                let x = state.pack();
                let (value_fn, grad): (Box<dyn Fn(&PlateState) -> f64>, Vec<f64>) = match regime {
                    Regime::VonKarman => (
                        Box::new(|s: &PlateState| eval_evk_pi(s, &spec, &grid)),
                        grad_evk_pi(&state, &spec, &grid),
                    ),
                    Regime::VonKarmanLin => (
                        Box::new(|s: &PlateState| eval_evklin_pi(s, &spec, &grid)),
                        grad_evklin_pi(&state, &spec, &grid),
                    ),
                    Regime::BendingLin => (
                        Box::new(|s: &PlateState| eval_ebenlin(s, &spec, &grid).0),
                        grad_ebenlin(&state, &spec, &grid),
                    ),
                };
                let h = 1e-6;
                let scale = 1.0 + grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                for _ in 0..40 {
                    let d = rng.gen_range(0..x.len());
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[d] += h;
                    xm[d] -= h;
                    let fd = (value_fn(&PlateState::unpack(&grid, &xp))
                        - value_fn(&PlateState::unpack(&grid, &xm)))
                        / (2.0 * h);
                    assert!(
                        (grad[d] - fd).abs() / scale < 1e-6,
                        "{regime:?} dof {d}: grad {} vs fd {}",
                        grad[d],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn invariance_under_null_directions() {
        let grid = Grid2::new(0.9, 1.1, 8, 9).unwrap();
        let s = random_state(&grid, 5, 0.3);
        let vk = spec_iso(Regime::VonKarman, 1.0, 1.0, 1.3);
        let vkl = spec_iso(Regime::VonKarmanLin, 1.0, 1.0, 1.3);

        let mut shifted = s.clone();
        for k in 0..grid.node_count() {
            shifted.u[k][0] += 0.7;
            shifted.u[k][1] -= 0.2;
            shifted.v[k] += 1.5;
        }
        assert_relative_eq!(
            eval_evk_pi(&s, &vk, &grid),
            eval_evk_pi(&shifted, &vk, &grid),
            epsilon = 1e-10
        );

        // Skew-linear u shift.
        let mut rotated = s.clone();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.idx(i, j);
                rotated.u[k][0] += -0.4 * grid.y(j);
                rotated.u[k][1] += 0.4 * grid.x(i);
            }
        }
        assert_relative_eq!(
            eval_evk_pi(&s, &vk, &grid),
            eval_evk_pi(&rotated, &vk, &grid),
            epsilon = 1e-10
        );

        // Affine v shift is null for the linearized regime only.
        let mut vaffine = s.clone();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.idx(i, j);
                vaffine.v[k] += 0.8 * grid.x(i) - 0.5 * grid.y(j);
            }
        }
        assert_relative_eq!(
            eval_evklin_pi(&s, &vkl, &grid),
            eval_evklin_pi(&vaffine, &vkl, &grid),
            epsilon = 1e-9
        );
    }

    #[test]
    fn benlin_constraint_examples() {
        let grid = Grid2::unit_square(48).unwrap();
        let spec = spec_iso(Regime::BendingLin, 1.0, 1.0, 1.0);

        let zero = PlateState::zeros(&grid);
        assert_eq!(eval_ebenlin(&zero, &spec, &grid), (0.0, 0.0));

        // One-directional profile v = f(x1) with compensating u satisfies the
        // constraint up to O(dx^2).
        let (a, omega) = (0.3, 1.7);
        let profile = PlateState::from_fns(
            &grid,
            |x, _| {
                // u1 = -(1/2) int_0^x f'(s)^2 ds for f = a sin(omega s).
                let c = a * omega;
                [-0.5 * c * c * (x / 2.0 + (2.0 * omega * x).sin() / (4.0 * omega)), 0.0]
            },
            |x, _| a * (omega * x).sin(),
        );
        let (_, residual) = eval_ebenlin(&profile, &spec, &grid);
        assert!(residual < 2e-4, "constraint residual {residual:e}");

        // v = x1 x2 has det Hess = -1 everywhere and a nonzero membrane term:
        // residual = |S| + int (1/2)|grad v|^2 = 1 + 1/3.
        let saddle = PlateState::from_fns(&grid, |_, _| [0.0, 0.0], |x, y| x * y);
        let (value, residual) = eval_ebenlin(&saddle, &spec, &grid);
        assert_relative_eq!(residual, 4.0 / 3.0, epsilon = 2e-3);
        // Constant Hessian with zero diagonal: (1/24) Q_2 of pure shear.
        let q2 = spec.q2;
        assert_relative_eq!(
            value,
            q2.eval(&Mat2Sym::new(0.0, 0.0, 1.0)) / 24.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn bending_limit_is_constant_shift() {
        let grid = Grid2::unit_square(16).unwrap();
        let spec = spec_iso(Regime::BendingLin, 1.0, 1.0, 1.0);
        let m = spec.m_pi().unwrap();
        assert_relative_eq!(m, -0.6, epsilon = 1e-12);
        for seed in 0..5 {
            let s = random_state(&grid, seed, 0.4);
            let (value, _) = eval_ebenlin(&s, &spec, &grid);
            let (limit, _) = eval_benlin_limit(&s, &spec, &grid).unwrap();
            assert_relative_eq!(limit - value, 0.5 * m * grid.area(), epsilon = 1e-12);
        }
    }

    #[test]
    fn minimize_at_global_minimum_stays() {
        let grid = Grid2::unit_square(8).unwrap();
        let spec = spec_iso(Regime::VonKarman, 1.0, 1.0, 0.0);
        let res = minimize2d(&spec, &grid, &PlateState::zeros(&grid), 1e-9, 200).unwrap();
        assert!(res.converged);
        assert_eq!(res.value, 0.0);
        assert!(res.iterations == 0);
    }

    #[test]
    fn minimize_vklin_reaches_homogeneous_strain() {
        let grid = Grid2::unit_square(24).unwrap();
        let spec = spec_iso(Regime::VonKarmanLin, 1.0, 1.0, 1.0);
        let res = minimize2d(&spec, &grid, &PlateState::zeros(&grid), 1e-9, 5000).unwrap();
        assert!(res.converged, "grad norm {:e}", res.grad_norm);
        assert_relative_eq!(res.value / grid.area(), -2.0 / 15.0, epsilon = 1e-8);
        // Interior strain within 2% of -0.2 I.
        let strains = strain_field(&res.state, &grid, false);
        for j in 2..grid.ny - 2 {
            for i in 2..grid.nx - 2 {
                let e = strains[grid.idx(i, j)];
                assert!((e.a11 + 0.2).abs() < 0.004, "e11 = {}", e.a11);
                assert!((e.a22 + 0.2).abs() < 0.004, "e22 = {}", e.a22);
                assert!(e.a12.abs() < 0.004, "e12 = {}", e.a12);
            }
        }
        // Value sequence nonincreasing.
        for w in res.values.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        // Minimizer beats hand-built admissible states.
        let trial = PlateState::from_fns(&grid, |x, y| [-0.15 * x, -0.15 * y], |_, _| 0.0);
        assert!(res.value <= eval_evklin_pi(&trial, &spec, &grid) + 1e-12);
    }

    #[test]
    fn homogeneous_strain_consistency_with_reduction() {
        // Per-area minimum over affine states equals (m_pi - pi^2 kappa)/2.
        let grid = Grid2::unit_square(10).unwrap();
        for (mu, lambda, pi) in [(1.0, 1.0, 1.0), (2.0, 0.3, -0.8), (0.6, 0.2, 2.0)] {
            let spec = spec_iso(Regime::VonKarmanLin, mu, lambda, pi);
            let q3 = QuadForm3::isotropic(mu, lambda).unwrap();
            let (m, gstar) = crate::reduce::m_pi(&q3, pi).unwrap();
            let state = PlateState::from_fns(
                &grid,
                |x, y| {
                    [gstar.a11 * x + gstar.a12 * y, gstar.a12 * x + gstar.a22 * y]
                },
                |_, _| 0.0,
            );
            let per_area = eval_evklin_pi(&state, &spec, &grid) / grid.area();
            let expected = 0.5 * (m - pi * pi * spec.reduction.kappa);
            assert_relative_eq!(per_area, expected, epsilon = 1e-8);
        }
    }

    #[test]
    fn cylinder_bending_energy() {
        let grid = Grid2::unit_square(12).unwrap();
        let q3 = QuadForm3::isotropic(1.0, 1.0).unwrap();
        let q2 = reduce_q2(&q3).unwrap();
        assert_relative_eq!(eval_eben_cylinder(2.0, &q2, &grid), 1.0 / 36.0, epsilon = 1e-12);
        assert_eq!(eval_eben_cylinder(f64::INFINITY, &q2, &grid), 0.0);
        // Invariance under r -> -r (Q_2 is even).
        assert_relative_eq!(
            eval_eben_cylinder(-2.0, &q2, &grid),
            eval_eben_cylinder(2.0, &q2, &grid),
            epsilon = 1e-15
        );
    }

    #[test]
    fn membrane_example_energy() {
        let grid = Grid2::unit_square(16).unwrap();
        let n = grid.node_count();
        // Identity sheet.
        let mut y = Vec::with_capacity(n);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                y.push(Vec3::new(grid.x(i), grid.y(j), 0.0));
            }
        }
        let e0 = eval_membrane_example(&y, 0.0, &grid).unwrap();
        assert_relative_eq!(e0, 2.0 / 3.0, epsilon = 1e-3);
        let e1 = eval_membrane_example(&y, 1.0, &grid).unwrap();
        assert_relative_eq!(e1, 2.0 / 3.0 + 2.0, epsilon = 2e-3);
        // Constant map: only the envelope constant remains.
        let flat = vec![Vec3::new(0.3, 0.3, 0.3); n];
        let ec = eval_membrane_example(&flat, 1.0, &grid).unwrap();
        assert_relative_eq!(ec, 2.0, epsilon = 2e-3);
        // Negative pressure is refused.
        assert!(eval_membrane_example(&y, -1.0, &grid).is_err());
    }

    #[test]
    fn stencil_transposes_are_adjoint() {
        let grid = Grid2::new(1.0, 0.7, 7, 6).unwrap();
        let st = Stencils::new(&grid);
        let n = grid.node_count();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        type ApplyFn = fn(&Stencils, &[f64], &mut [f64]);
        let pairs: [(ApplyFn, ApplyFn); 4] = [
            (Stencils::dx, Stencils::dx_transpose),
            (Stencils::dy, Stencils::dy_transpose),
            (Stencils::dxx, Stencils::dxx_transpose),
            (Stencils::dyy, Stencils::dyy_transpose),
        ];
        for (apply, transpose) in pairs {
            let mut da = vec![0.0; n];
            apply(&st, &a, &mut da);
            let lhs: f64 = da.iter().zip(&b).map(|(x, y)| x * y).sum();
            let mut tb = vec![0.0; n];
            transpose(&st, &b, &mut tb);
            let rhs: f64 = tb.iter().zip(&a).map(|(x, y)| x * y).sum();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent_and_kills_null_modes() {
        let grid = Grid2::new(1.0, 1.0, 7, 7).unwrap();
        let mut x = random_state(&grid, 9, 1.0).pack();
        project_null_space(&grid, Regime::VonKarmanLin, &mut x);
        let once = x.clone();
        project_null_space(&grid, Regime::VonKarmanLin, &mut x);
        for (a, b) in once.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
