//! Exact small-scale quadratic minimizations: the planar reduction `Q_2` of a
//! 3x3 quadratic form, its pressure-augmented variant `Q_2^pi`, the linear
//! operator `L` and constant `kappa` of the decomposition
//! `Q_2^pi = Q_2 + pi L + pi^2 kappa`, and the bending-regime constant `m_pi`.
//!
//! Every minimization here is a closed-form 3x3 symmetric positive-definite
//! solve; tolerances are pure floating-point roundoff budgets. This module is
//! the trust anchor for the constants used by the plate and film functionals.

use core::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{Mat2Sym, Mat3, Vec3};

/// Validation budget for the exactly-quadratic pi-interpolation.
const DECOMP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum ReduceError {
    /// The normal-equation block of the form is not positive definite.
    DegenerateForm,
    /// The affine-in-pi interpolation residual exceeded tolerance, so the
    /// input was not an exact quadratic form.
    NonQuadratic { residual: f64 },
    /// Lame parameters outside `mu > 0`, `lambda > -2 mu / 3`.
    InvalidLame { mu: f64, lambda: f64 },
}

impl fmt::Display for ReduceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReduceError::DegenerateForm => {
                write!(f, "quadratic form is degenerate on the relaxation directions")
            }
            ReduceError::NonQuadratic { residual } => {
                write!(f, "pi-interpolation residual {residual:e} exceeds tolerance; input form is not quadratic")
            }
            ReduceError::InvalidLame { mu, lambda } => {
                write!(f, "Lame parameters out of range: mu = {mu}, lambda = {lambda} (need mu > 0, lambda > -2mu/3)")
            }
        }
    }
}

/// Symmetric quadratic form on 3x3 matrices, stored as a 9x9 symmetric
/// coefficient array over the row-major vectorization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm3 {
    coeff: [[f64; 9]; 9],
}

fn vec_index(i: usize, j: usize) -> usize {
    3 * i + j
}

impl QuadForm3 {
    /// Builds the form from a Hessian array, symmetrizing it.
    pub fn from_coeff(h: [[f64; 9]; 9]) -> Self {
        let mut coeff = [[0.0; 9]; 9];
        for a in 0..9 {
            for b in 0..9 {
                coeff[a][b] = 0.5 * (h[a][b] + h[b][a]);
            }
        }
        QuadForm3 { coeff }
    }

    /// Exact coefficient assembly of the isotropic form
    /// `Q_3(F) = 2 mu |sym F|^2 + lambda (tr F)^2`.
    pub fn isotropic(mu: f64, lambda: f64) -> Result<Self, ReduceError> {
        if !(mu > 0.0 && lambda > -2.0 * mu / 3.0) {
            return Err(ReduceError::InvalidLame { mu, lambda });
        }
        let mut coeff = [[0.0; 9]; 9];
        for i in 0..3 {
            for j in 0..3 {
                let d_i = vec_index(i, i);
                let d_j = vec_index(j, j);
                coeff[d_i][d_j] += lambda;
                if i == j {
                    coeff[d_i][d_j] += 2.0 * mu;
                } else {
                    let p = vec_index(i, j);
                    let q = vec_index(j, i);
                    coeff[p][p] += mu;
                    coeff[p][q] += mu;
                }
            }
        }
        Ok(QuadForm3 { coeff })
    }

    pub fn coeff(&self) -> &[[f64; 9]; 9] {
        &self.coeff
    }

    pub fn eval(&self, f: &Mat3) -> f64 {
        self.bilinear(f, f)
    }

    pub fn bilinear(&self, a: &Mat3, b: &Mat3) -> f64 {
        let va = flatten(a);
        let vb = flatten(b);
        let mut s = 0.0;
        for p in 0..9 {
            if va[p] == 0.0 {
                continue;
            }
            let row = &self.coeff[p];
            let mut t = 0.0;
            for q in 0..9 {
                t += row[q] * vb[q];
            }
            s += va[p] * t;
        }
        s
    }

    /// Gradient matrix of `F -> Q_3(F)` under the Frobenius pairing.
    pub fn grad(&self, f: &Mat3) -> Mat3 {
        let v = flatten(f);
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let p = vec_index(i, j);
                let mut t = 0.0;
                for q in 0..9 {
                    t += self.coeff[p][q] * v[q];
                }
                g[i][j] = 2.0 * t;
            }
        }
        Mat3(g)
    }

    /// 3x3 block `K_{kl} = B(e_k (x) e_3, e_l (x) e_3)` governing the
    /// relaxation over the appended third column.
    fn relaxation_block(&self) -> [[f64; 3]; 3] {
        let mut k = [[0.0; 3]; 3];
        for (a, row) in k.iter_mut().enumerate() {
            for (b, out) in row.iter_mut().enumerate() {
                *out = self.coeff[vec_index(a, 2)][vec_index(b, 2)];
            }
        }
        k
    }

    /// Coupling vector `r(G)_k = B(G-embedded, e_k (x) e_3)`.
    fn coupling(&self, g: &Mat2Sym) -> [f64; 3] {
        let vg = flatten(&g.embed());
        let mut r = [0.0; 3];
        for (k, rk) in r.iter_mut().enumerate() {
            let row = &self.coeff[vec_index(k, 2)];
            let mut t = 0.0;
            for q in 0..9 {
                t += row[q] * vg[q];
            }
            *rk = t;
        }
        r
    }
}

fn flatten(m: &Mat3) -> [f64; 9] {
    let mut v = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            v[vec_index(i, j)] = m.0[i][j];
        }
    }
    v
}

/// Symmetric positive-definite quadratic form on symmetric 2x2 matrices,
/// stored in the orthonormal basis
/// `{e1(x)e1, e2(x)e2, (e1(x)e2 + e2(x)e1)/sqrt(2)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadForm2 {
    c: [[f64; 3]; 3],
}

impl QuadForm2 {
    pub fn from_coeff(c: [[f64; 3]; 3]) -> Self {
        let mut s = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                s[a][b] = 0.5 * (c[a][b] + c[b][a]);
            }
        }
        QuadForm2 { c: s }
    }

    /// Isotropic planar form `2 mu |sym G|^2 + (2 mu lambda / (2 mu + lambda)) (tr G)^2`.
    pub fn isotropic(mu: f64, lambda: f64) -> Result<Self, ReduceError> {
        if !(mu > 0.0 && lambda > -2.0 * mu / 3.0) {
            return Err(ReduceError::InvalidLame { mu, lambda });
        }
        let lp = 2.0 * mu * lambda / (2.0 * mu + lambda);
        let mut c = [[0.0; 3]; 3];
        for (a, row) in c.iter_mut().enumerate() {
            row[a] = 2.0 * mu;
        }
        c[0][0] += lp;
        c[1][1] += lp;
        c[0][1] += lp;
        c[1][0] += lp;
        Ok(QuadForm2 { c })
    }

    pub fn coeff(&self) -> &[[f64; 3]; 3] {
        &self.c
    }

    pub fn eval(&self, g: &Mat2Sym) -> f64 {
        let v = g.coords();
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                s += v[a] * self.c[a][b] * v[b];
            }
        }
        s
    }

    /// Gradient matrix of `G -> Q_2(G)` under the Frobenius pairing.
    pub fn grad(&self, g: &Mat2Sym) -> Mat2Sym {
        let v = g.coords();
        let mut cv = [0.0; 3];
        for (a, out) in cv.iter_mut().enumerate() {
            *out = 2.0 * (self.c[a][0] * v[0] + self.c[a][1] * v[1] + self.c[a][2] * v[2]);
        }
        Mat2Sym::from_coords(cv)
    }
}

/// The pair `(L, kappa)` of the decomposition `Q_2^pi = Q_2 + pi L + pi^2 kappa`.
///
/// `L` is stored by its coefficients in the orthonormal `Mat2Sym` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureReduction {
    pub l_coeffs: [f64; 3],
    pub kappa: f64,
}

impl PressureReduction {
    /// Applies the linear operator: `L G`.
    pub fn l_apply(&self, g: &Mat2Sym) -> f64 {
        let v = g.coords();
        self.l_coeffs[0] * v[0] + self.l_coeffs[1] * v[1] + self.l_coeffs[2] * v[2]
    }

    /// The symmetric matrix representing `L` under the Frobenius pairing.
    pub fn l_matrix(&self) -> Mat2Sym {
        Mat2Sym::from_coords(self.l_coeffs)
    }
}

/// Planar reduction `Q_2(G) = min_a Q_3(G + a (x) e_3)`, computed exactly by
/// the Schur complement of the form onto the appended-column directions.
pub fn reduce_q2(q3: &QuadForm3) -> Result<QuadForm2, ReduceError> {
    let chol = cholesky3(q3.relaxation_block()).ok_or(ReduceError::DegenerateForm)?;
    let basis = mat2sym_basis();
    let r: [[f64; 3]; 3] = [
        q3.coupling(&basis[0]),
        q3.coupling(&basis[1]),
        q3.coupling(&basis[2]),
    ];
    let kinv_r: [[f64; 3]; 3] = [
        chol_solve(&chol, r[0]),
        chol_solve(&chol, r[1]),
        chol_solve(&chol, r[2]),
    ];
    let mut c = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let direct = q3.bilinear(&basis[a].embed(), &basis[b].embed());
            let schur = r[a][0] * kinv_r[b][0] + r[a][1] * kinv_r[b][1] + r[a][2] * kinv_r[b][2];
            c[a][b] = direct - schur;
        }
    }
    Ok(QuadForm2::from_coeff(c))
}

/// Value and minimizer of `a -> Q_3(G + a (x) e_3) + 2 pi a_3`.
pub fn q2pi_value(q3: &QuadForm3, pi: f64, g: &Mat2Sym) -> Result<(f64, Vec3), ReduceError> {
    let chol = cholesky3(q3.relaxation_block()).ok_or(ReduceError::DegenerateForm)?;
    let r = q3.coupling(g);
    let rhs = [-r[0], -r[1], -(r[2] + pi)];
    let a = Vec3(chol_solve(&chol, rhs));
    let arg = g.embed() + Mat3::outer(&a, &Vec3::basis(2));
    Ok((q3.eval(&arg) + 2.0 * pi * a.0[2], a))
}

/// Recovers `(L, kappa)` by evaluating `Q_2^pi` at `pi` in `{0, 1, -1}` on a
/// basis of `Mat2Sym` and interpolating the exactly-quadratic pi-dependence;
/// the decomposition identity is then validated on random `(G, pi)` samples.
pub fn extract_l_kappa(q3: &QuadForm3) -> Result<PressureReduction, ReduceError> {
    let q2 = reduce_q2(q3)?;
    let basis = mat2sym_basis();
    let mut l_coeffs = [0.0; 3];
    let mut kappa = 0.0;
    for (i, e) in basis.iter().enumerate() {
        let (v0, _) = q2pi_value(q3, 0.0, e)?;
        let (vp, _) = q2pi_value(q3, 1.0, e)?;
        let (vm, _) = q2pi_value(q3, -1.0, e)?;
        l_coeffs[i] = 0.5 * (vp - vm);
        kappa = 0.5 * (vp + vm) - v0;
    }
    let red = PressureReduction { l_coeffs, kappa };

    let mut rng = ChaCha8Rng::seed_from_u64(0x4c4b);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let g = Mat2Sym::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        let pi = rng.gen_range(-3.0..3.0);
        let (direct, _) = q2pi_value(q3, pi, &g)?;
        let decomposed = q2.eval(&g) + pi * red.l_apply(&g) + pi * pi * red.kappa;
        let scale = 1.0 + direct.abs();
        worst = worst.max((direct - decomposed).abs() / scale);
    }
    if worst > DECOMP_TOL {
        return Err(ReduceError::NonQuadratic { residual: worst });
    }
    Ok(red)
}

/// The bending-regime constant
/// `m_pi = min over symmetric G of { Q_2^pi(G) + 2 pi tr G }`,
/// returned with its minimizer.
pub fn m_pi(q3: &QuadForm3, pi: f64) -> Result<(f64, Mat2Sym), ReduceError> {
    let q2 = reduce_q2(q3)?;
    let red = extract_l_kappa(q3)?;
    // In basis coordinates the objective is g'Cg + pi (L + 2t)'g + pi^2 kappa
    // with t the coordinates of the identity.
    let t = Mat2Sym::identity().coords();
    let rhs = [
        -0.5 * pi * (red.l_coeffs[0] + 2.0 * t[0]),
        -0.5 * pi * (red.l_coeffs[1] + 2.0 * t[1]),
        -0.5 * pi * (red.l_coeffs[2] + 2.0 * t[2]),
    ];
    let chol = cholesky3(*q2.coeff()).ok_or(ReduceError::DegenerateForm)?;
    let g = Mat2Sym::from_coords(chol_solve(&chol, rhs));
    let (qpi, _) = q2pi_value(q3, pi, &g)?;
    Ok((qpi + 2.0 * pi * g.trace(), g))
}

/// Printed closed forms for isotropic materials: `Q_2`, the operator
/// `L G = -(2 lambda / (2 mu + lambda)) tr G` and
/// `kappa = -1 / (2 mu + lambda)`; the oracle for the generic reduction path.
pub fn isotropic_closed_forms(
    mu: f64,
    lambda: f64,
) -> Result<(QuadForm2, PressureReduction), ReduceError> {
    let q2 = QuadForm2::isotropic(mu, lambda)?;
    let cl = -2.0 * lambda / (2.0 * mu + lambda);
    Ok((
        q2,
        PressureReduction {
            l_coeffs: [cl, cl, 0.0],
            kappa: -1.0 / (2.0 * mu + lambda),
        },
    ))
}

fn mat2sym_basis() -> [Mat2Sym; 3] {
    [
        Mat2Sym::new(1.0, 0.0, 0.0),
        Mat2Sym::new(0.0, 1.0, 0.0),
        Mat2Sym::from_coords([0.0, 0.0, 1.0]),
    ]
}

/// Cholesky factor of a symmetric positive-definite 3x3 matrix.
fn cholesky3(k: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = k[i][j];
            for p in 0..j {
                s -= l[i][p] * l[j][p];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i][i] = crate::fmath::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn chol_solve(l: &[[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let mut y = [0.0; 3];
    for i in 0..3 {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i][p] * y[p];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = y[i];
        for p in (i + 1)..3 {
            s -= l[p][i] * x[p];
        }
        x[i] = s / l[i][i];
    }
    x
}
