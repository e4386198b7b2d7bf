//! Small dense matrix utilities: 3x3 matrices, symmetric 2x2 matrices stored
//! by independent components, the second determinant invariant, and the
//! distance to SO(3) via a Jacobi eigenvalue sweep.

use core::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fmath;

/// Convergence budget for the 3x3 Jacobi eigenvalue sweep.
const JACOBI_TOL: f64 = 1e-12;

pub type Vec2 = [f64; 2];

/// Real 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn basis(i: usize) -> Self {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        Vec3(v)
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(&self) -> f64 {
        fmath::sqrt(self.dot(self))
    }

    pub fn scale(&self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self.scale(-1.0)
    }
}

/// Cross (wedge) product of two 3-vectors.
pub fn wedge(u: &Vec3, v: &Vec3) -> Vec3 {
    Vec3([
        u.0[1] * v.0[2] - u.0[2] * v.0[1],
        u.0[2] * v.0[0] - u.0[0] * v.0[2],
        u.0[0] * v.0[1] - u.0[1] * v.0[0],
    ])
}

/// Real 3x3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn identity() -> Self {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Mat3([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn from_cols(c1: Vec3, c2: Vec3, c3: Vec3) -> Self {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            m[i][0] = c1.0[i];
            m[i][1] = c2.0[i];
            m[i][2] = c3.0[i];
        }
        Mat3(m)
    }

    /// Rank-one matrix `u (x) v`.
    pub fn outer(u: &Vec3, v: &Vec3) -> Self {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = u.0[i] * v.0[j];
            }
        }
        Mat3(m)
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn transpose(&self) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = self.0[j][i];
            }
        }
        Mat3(m)
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Cofactor matrix, `cof(F)_{ij} = d(det F)/d(F_{ij})`; polynomial in the
    /// entries, so well-defined for singular matrices too.
    pub fn cofactor(&self) -> Mat3 {
        let m = &self.0;
        let c = |i: usize, j: usize| -> f64 {
            let r = [(i + 1) % 3, (i + 2) % 3];
            let s = [(j + 1) % 3, (j + 2) % 3];
            m[r[0]][s[0]] * m[r[1]][s[1]] - m[r[0]][s[1]] * m[r[1]][s[0]]
        };
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = c(i, j);
            }
        }
        Mat3(out)
    }

    /// Inverse transpose, `cof(F) / det(F)`.
    pub fn inv_transpose(&self) -> Mat3 {
        self.cofactor() * (1.0 / self.det())
    }

    pub fn sym(&self) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = 0.5 * (self.0[i][j] + self.0[j][i]);
            }
        }
        Mat3(m)
    }

    pub fn frobenius_norm(&self) -> f64 {
        fmath::sqrt(self.frobenius_dot(self))
    }

    pub fn frobenius_dot(&self, other: &Mat3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2];
        }
        Vec3(out)
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = self.0[i][j] + o.0[i][j];
            }
        }
        Mat3(m)
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = self.0[i][j] - o.0[i][j];
            }
        }
        Mat3(m)
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += self.0[i][k] * o.0[k][j];
                }
                m[i][j] = s;
            }
        }
        Mat3(m)
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        let mut m = self.0;
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        Mat3(m)
    }
}

/// Symmetric 2x2 matrix stored by its three independent components, so
/// symmetry is a construction invariant rather than a runtime check.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2Sym {
    pub a11: f64,
    pub a22: f64,
    pub a12: f64,
}

/// `1/sqrt(2)`, the normalization of the shear basis element.
pub const INV_SQRT2: f64 = core::f64::consts::FRAC_1_SQRT_2;

impl Mat2Sym {
    pub const ZERO: Mat2Sym = Mat2Sym { a11: 0.0, a22: 0.0, a12: 0.0 };

    pub fn new(a11: f64, a22: f64, a12: f64) -> Self {
        Mat2Sym { a11, a22, a12 }
    }

    pub fn identity() -> Self {
        Mat2Sym::new(1.0, 1.0, 0.0)
    }

    /// Symmetric part of a full 2x2 matrix given row-wise.
    pub fn sym_of(m: [[f64; 2]; 2]) -> Self {
        Mat2Sym::new(m[0][0], m[1][1], 0.5 * (m[0][1] + m[1][0]))
    }

    /// Symmetrized outer product `w (x) w` of a 2-vector.
    pub fn outer(w: &Vec2) -> Self {
        Mat2Sym::new(w[0] * w[0], w[1] * w[1], w[0] * w[1])
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Squared Frobenius norm (off-diagonal counted twice).
    pub fn norm_sq(&self) -> f64 {
        self.a11 * self.a11 + self.a22 * self.a22 + 2.0 * self.a12 * self.a12
    }

    pub fn norm(&self) -> f64 {
        fmath::sqrt(self.norm_sq())
    }

    /// Frobenius inner product with another symmetric matrix.
    pub fn dot(&self, o: &Mat2Sym) -> f64 {
        self.a11 * o.a11 + self.a22 * o.a22 + 2.0 * self.a12 * o.a12
    }

    /// Coordinates in the orthonormal basis
    /// `{e1(x)e1, e2(x)e2, (e1(x)e2 + e2(x)e1)/sqrt(2)}`.
    pub fn coords(&self) -> [f64; 3] {
        [self.a11, self.a22, self.a12 / INV_SQRT2]
    }

    pub fn from_coords(c: [f64; 3]) -> Self {
        Mat2Sym::new(c[0], c[1], c[2] * INV_SQRT2)
    }

    /// Embedding into a 3x3 matrix padded with a zero third row and column.
    pub fn embed(&self) -> Mat3 {
        Mat3([
            [self.a11, self.a12, 0.0],
            [self.a12, self.a22, 0.0],
            [0.0, 0.0, 0.0],
        ])
    }
}

impl Add for Mat2Sym {
    type Output = Mat2Sym;
    fn add(self, o: Mat2Sym) -> Mat2Sym {
        Mat2Sym::new(self.a11 + o.a11, self.a22 + o.a22, self.a12 + o.a12)
    }
}

impl Sub for Mat2Sym {
    type Output = Mat2Sym;
    fn sub(self, o: Mat2Sym) -> Mat2Sym {
        Mat2Sym::new(self.a11 - o.a11, self.a22 - o.a22, self.a12 - o.a12)
    }
}

impl Mul<f64> for Mat2Sym {
    type Output = Mat2Sym;
    fn mul(self, s: f64) -> Mat2Sym {
        Mat2Sym::new(self.a11 * s, self.a22 * s, self.a12 * s)
    }
}

/// Second invariant of a 3x3 matrix: the sum of the three principal 2x2
/// minors, the quadratic coefficient of `det(I + h F)` in `h`.
pub fn iota2(f: &Mat3) -> f64 {
    let m = &f.0;
    m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2] - m[1][2] * m[2][1]
}

/// Residual of the cubic determinant expansion
/// `det(I + hF) - (1 + h tr F + h^2 iota2(F) + h^3 det F)`.
///
/// The identity is exact, so the residual is pure floating-point noise:
/// bounded by `1e-12 (1 + |F|)^3` for `|h| <= 1`.
pub fn det_expansion_residual(f: &Mat3, h: f64) -> f64 {
    let lhs = (Mat3::identity() + *f * h).det();
    let rhs = 1.0 + h * f.trace() + h * h * iota2(f) + h * h * h * f.det();
    lhs - rhs
}

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations,
/// ascending order.
pub fn sym_eigenvalues(s: &Mat3) -> [f64; 3] {
    let mut a = s.0;
    let scale = s.frobenius_norm().max(1e-300);
    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if fmath::sqrt(2.0 * off) <= JACOBI_TOL * scale {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let app = a[p][p];
            let aqq = a[q][q];
            // Stable rotation parameters per Golub & Van Loan, alg. 8.4.1.
            let tau = (aqq - app) / (2.0 * apq);
            let t = if tau >= 0.0 {
                1.0 / (tau + fmath::sqrt(1.0 + tau * tau))
            } else {
                -1.0 / (-tau + fmath::sqrt(1.0 + tau * tau))
            };
            let c = 1.0 / fmath::sqrt(1.0 + t * t);
            let sn = t * c;
            let k = 3 - p - q;
            let akp = a[k][p];
            let akq = a[k][q];
            a[k][p] = c * akp - sn * akq;
            a[p][k] = a[k][p];
            a[k][q] = sn * akp + c * akq;
            a[q][k] = a[k][q];
            a[p][p] = app - t * apq;
            a[q][q] = aqq + t * apq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
        }
    }
    let mut ev = [a[0][0], a[1][1], a[2][2]];
    ev.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Singular values of a 3x3 matrix (ascending), from the eigenvalues of
/// `F^T F`.
pub fn singular_values(f: &Mat3) -> [f64; 3] {
    let c = f.transpose() * *f;
    let ev = sym_eigenvalues(&c);
    [
        fmath::sqrt(ev[0].max(0.0)),
        fmath::sqrt(ev[1].max(0.0)),
        fmath::sqrt(ev[2].max(0.0)),
    ]
}

/// Euclidean distance of a 3x3 matrix to the rotation group SO(3).
///
/// For `det F > 0` this is the norm of `(sigma_i - 1)` over the singular
/// values; for `det F <= 0` the smallest singular value is sign-flipped
/// before the formula.
pub fn dist_so3(f: &Mat3) -> f64 {
    let sv = singular_values(f);
    let s0 = if f.det() > 0.0 { sv[0] } else { -sv[0] };
    let d = [s0 - 1.0, sv[1] - 1.0, sv[2] - 1.0];
    fmath::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
}

/// Rotation about `axis` (need not be normalized) by `angle`, via the
/// Rodrigues formula.
pub fn rotation_from_axis_angle(axis: &Vec3, angle: f64) -> Mat3 {
    let n = axis.norm();
    if n == 0.0 {
        return Mat3::identity();
    }
    let u = axis.scale(1.0 / n);
    let k = Mat3([
        [0.0, -u.0[2], u.0[1]],
        [u.0[2], 0.0, -u.0[0]],
        [-u.0[1], u.0[0], 0.0],
    ]);
    let s = fmath::sin(angle);
    let c = fmath::cos(angle);
    Mat3::identity() + k * s + (k * k) * (1.0 - c)
}

/// Deterministic pseudo-random rotation from a seed: uniform axis on the
/// sphere, uniform angle in `[0, 2 pi)`.
pub fn random_rotation(seed: u64) -> Mat3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rotation_from_axis_angle(&sample_unit_vec3(&mut rng), rng.gen_range(0.0..core::f64::consts::TAU))
}

/// Uniform direction on the unit sphere by rejection from the cube.
pub fn sample_unit_vec3<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v.scale(1.0 / n);
        }
    }
}

/// Matrix with entries uniform in `[-bound, bound]`.
pub fn sample_mat3<R: Rng>(rng: &mut R, bound: f64) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
    }
    Mat3(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn iota2_examples() {
        assert_eq!(iota2(&Mat3::identity()), 3.0);
        let e12 = Mat3::outer(&Vec3::basis(0), &Vec3::basis(1));
        assert_eq!(iota2(&e12), 0.0);
        assert_eq!(iota2(&Mat3::diag(1.0, 2.0, 3.0)), 11.0);
    }

    #[test]
    fn iota2_closed_form() {
        // iota2(F) = ((tr F)^2 - tr(F^2)) / 2, an independent route.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let f = sample_mat3(&mut rng, 5.0);
            let tr = f.trace();
            let tr_sq = (f * f).trace();
            assert_relative_eq!(iota2(&f), 0.5 * (tr * tr - tr_sq), max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn det_expansion_examples() {
        assert!(det_expansion_residual(&Mat3::identity(), 0.5).abs() < 1e-15);
        let e12 = Mat3::outer(&Vec3::basis(0), &Vec3::basis(1));
        assert_eq!(det_expansion_residual(&e12, 0.7), 0.0);
    }

    #[test]
    fn det_expansion_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let f = sample_mat3(&mut rng, 10.0);
            let h = rng.gen_range(-1.0..1.0);
            let bound = {
                let n = f.frobenius_norm();
                1e-12 * (1.0 + n) * (1.0 + n) * (1.0 + n)
            };
            assert!(det_expansion_residual(&f, h).abs() <= bound);
        }
    }

    #[test]
    fn wedge_examples() {
        let e1 = Vec3::basis(0);
        let e2 = Vec3::basis(1);
        let e3 = Vec3::basis(2);
        assert_eq!(wedge(&e1, &e2), e3);
        assert_eq!(wedge(&e2, &e1), -e3);
        assert_eq!(wedge(&e1, &e1), Vec3::ZERO);
    }

    #[test]
    fn dist_so3_examples() {
        for seed in 0..5 {
            let r = random_rotation(seed);
            assert!(dist_so3(&r) < 1e-12);
        }
        assert_relative_eq!(dist_so3(&(Mat3::identity() * 2.0)), 3.0_f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(dist_so3(&Mat3::diag(1.0, 1.0, -1.0)), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn dist_so3_rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..50 {
            let f = sample_mat3(&mut rng, 2.0);
            let r = random_rotation(seed);
            assert_relative_eq!(dist_so3(&(r * f)), dist_so3(&f), epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn random_rotation_is_orthogonal_and_deterministic() {
        for seed in [0u64, 1, 42, 1 << 40] {
            let r = random_rotation(seed);
            let ortho = r.transpose() * r - Mat3::identity();
            assert!(ortho.frobenius_norm() < 1e-12);
            assert_relative_eq!(r.det(), 1.0, epsilon = 1e-12);
            assert_eq!(r, random_rotation(seed));
        }
    }

    #[test]
    fn zero_angle_rotation_is_identity() {
        let r = rotation_from_axis_angle(&Vec3::new(0.3, -0.2, 0.9), 0.0);
        assert_eq!(r, Mat3::identity());
    }

    #[test]
    fn sym_eigenvalues_diag() {
        let ev = sym_eigenvalues(&Mat3::diag(4.0, 2.0, 3.0));
        assert_relative_eq!(ev[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(ev[2], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn mat2sym_coords_roundtrip() {
        let g = Mat2Sym::new(1.5, -0.7, 0.3);
        let back = Mat2Sym::from_coords(g.coords());
        assert_relative_eq!(back.a11, g.a11);
        assert_relative_eq!(back.a22, g.a22);
        assert_relative_eq!(back.a12, g.a12, epsilon = 1e-15);
        // Orthonormal coordinates preserve the Frobenius norm.
        let c = g.coords();
        assert_relative_eq!(c[0] * c[0] + c[1] * c[1] + c[2] * c[2], g.norm_sq(), epsilon = 1e-15);
    }
}
