//! Stored energy densities, their pressure augmentation `W^pi = W + pi det`,
//! analytic gradients, the finite-difference Hessian at the identity, and
//! runtime checkers for the structural assumptions the theory rests on.
//!
//! Two elastic densities are shipped, one per assumption branch: Saint
//! Venant-Kirchhoff has the linear determinant control needed for negative
//! pressure, while compressible neo-Hookean is orientation preserving
//! (infinite energy at nonpositive determinant) and so handles positive
//! pressure. The cubic membrane density is the worked example of the
//! membrane-regime relaxation.

use core::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{self, Mat3};
use crate::fmath;
use crate::reduce::QuadForm3;

/// Coercivity constant of the cubic membrane density:
/// `(|F_1|^3 + |F_2|^3 + |F_3|^3) / 3 >= |F|^3 / 3^(3/2)` by the power-mean
/// inequality, with equality when the three column norms agree.
pub const MEMBRANE_COERCIVITY_C1: f64 = 0.19245008972987526; // 3^(-3/2)

/// Finite-difference step for gradients, scaled by `1 + |F|`.
const GRAD_FD_STEP: f64 = 1e-5;
/// Finite-difference step for the Hessian at the identity.
const HESSIAN_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum DensityError {
    /// Gradient or Hessian requested at a state of infinite energy.
    InfiniteEnergy,
    /// Operation not defined for this density kind.
    Unsupported { op: &'static str, kind: &'static str },
    /// Lame parameters outside `mu > 0`, `lambda > -2 mu / 3`.
    InvalidParameters { mu: f64, lambda: f64 },
    /// Pressure incompatible with the density's growth assumptions.
    InvalidPressure { pi: f64, reason: &'static str },
    /// A sampled matrix violated one of the growth bounds under check.
    BoundViolated { bound: &'static str, margin: f64 },
}

impl fmt::Display for DensityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityError::InfiniteEnergy => write!(f, "state has infinite energy"),
            DensityError::Unsupported { op, kind } => write!(f, "{op} is not defined for {kind}"),
            DensityError::InvalidParameters { mu, lambda } => {
                write!(f, "invalid Lame parameters mu = {mu}, lambda = {lambda}")
            }
            DensityError::InvalidPressure { pi, reason } => {
                write!(f, "pressure pi = {pi} rejected: {reason}")
            }
            DensityError::BoundViolated { bound, margin } => {
                write!(f, "sampled matrix violated the {bound} bound by {margin:e}")
            }
        }
    }
}

/// A stored energy density on 3x3 matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityModel {
    /// `W(F) = (mu/4) |F'F - I|^2 + (lambda/8) (tr(F'F - I))^2`.
    SaintVenantKirchhoff { mu: f64, lambda: f64 },
    /// `W(F) = (mu/2)(|F|^2 - 3 - 2 log det F) + (lambda/2)(log det F)^2`
    /// for `det F > 0`, infinite otherwise.
    CompressibleNeoHookean { mu: f64, lambda: f64 },
    /// `W(F) = (|F_1|^3 + |F_2|^3 + |F_3|^3)/3 + 1/det F` for `det F > 0`,
    /// infinite otherwise.
    MembraneCubic,
}

impl DensityModel {
    pub fn svk(mu: f64, lambda: f64) -> Result<Self, DensityError> {
        check_lame(mu, lambda)?;
        Ok(DensityModel::SaintVenantKirchhoff { mu, lambda })
    }

    pub fn neo_hookean(mu: f64, lambda: f64) -> Result<Self, DensityError> {
        check_lame(mu, lambda)?;
        Ok(DensityModel::CompressibleNeoHookean { mu, lambda })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DensityModel::SaintVenantKirchhoff { .. } => "saint-venant-kirchhoff",
            DensityModel::CompressibleNeoHookean { .. } => "compressible-neo-hookean",
            DensityModel::MembraneCubic => "membrane-cubic",
        }
    }

    pub fn lame(&self) -> Option<(f64, f64)> {
        match *self {
            DensityModel::SaintVenantKirchhoff { mu, lambda }
            | DensityModel::CompressibleNeoHookean { mu, lambda } => Some((mu, lambda)),
            DensityModel::MembraneCubic => None,
        }
    }

    /// Whether `W(F) = +inf` for `det F <= 0` (the orientation preserving
    /// condition).
    pub fn orientation_preserving(&self) -> bool {
        !matches!(self, DensityModel::SaintVenantKirchhoff { .. })
    }

    /// Whether `W` controls `|det F - 1|` linearly at infinity, the growth
    /// that makes negative pressure admissible.
    pub fn linear_det_control(&self) -> bool {
        matches!(self, DensityModel::SaintVenantKirchhoff { .. })
    }

    /// Stored energy; infinity encodes inadmissibility rather than an error.
    pub fn eval_w(&self, f: &Mat3) -> f64 {
        match *self {
            DensityModel::SaintVenantKirchhoff { mu, lambda } => {
                let strain = f.transpose() * *f - Mat3::identity();
                let tr = strain.trace();
                mu / 4.0 * strain.frobenius_dot(&strain) + lambda / 8.0 * tr * tr
            }
            DensityModel::CompressibleNeoHookean { mu, lambda } => {
                let det = f.det();
                if det <= 0.0 {
                    return f64::INFINITY;
                }
                let log_det = fmath::ln(det);
                let norm_sq = f.frobenius_dot(f);
                mu / 2.0 * (norm_sq - 3.0 - 2.0 * log_det) + lambda / 2.0 * log_det * log_det
            }
            DensityModel::MembraneCubic => {
                let det = f.det();
                if det <= 0.0 {
                    return f64::INFINITY;
                }
                let cubes: f64 = (0..3)
                    .map(|j| {
                        let n = f.col(j).norm();
                        n * n * n
                    })
                    .sum();
                cubes / 3.0 + 1.0 / det
            }
        }
    }

    /// Pressure-augmented density `W^pi(F) = W(F) + pi det F`, with the same
    /// infinity rules as `eval_w`.
    pub fn eval_w_pi(&self, pi: f64, f: &Mat3) -> f64 {
        let w = self.eval_w(f);
        if w.is_infinite() {
            w
        } else {
            w + pi * f.det()
        }
    }

    /// Analytic gradient of `W`; rejects states of infinite energy.
    pub fn grad_w(&self, f: &Mat3) -> Result<Mat3, DensityError> {
        if self.eval_w(f).is_infinite() {
            return Err(DensityError::InfiniteEnergy);
        }
        Ok(match *self {
            DensityModel::SaintVenantKirchhoff { mu, lambda } => {
                let strain = f.transpose() * *f - Mat3::identity();
                let stress = strain * mu + Mat3::identity() * (lambda / 2.0 * strain.trace());
                *f * stress
            }
            DensityModel::CompressibleNeoHookean { mu, lambda } => {
                let log_det = fmath::ln(f.det());
                *f * mu + f.inv_transpose() * (lambda * log_det - mu)
            }
            DensityModel::MembraneCubic => {
                let mut g = Mat3::ZERO;
                for j in 0..3 {
                    let col = f.col(j);
                    let n = col.norm();
                    for i in 0..3 {
                        g.0[i][j] = n * col.0[i];
                    }
                }
                g - f.inv_transpose() * (1.0 / f.det())
            }
        })
    }

    /// The quadratic form `Q_3(F) = D^2 W(I)[F]^2`, by second-order central
    /// differences at the identity, symmetrized.
    ///
    /// Defined for the two elastic kinds only; for both it must reproduce the
    /// isotropic form `2 mu |sym F|^2 + lambda (tr F)^2` to a relative 1e-6.
    pub fn hessian_at_identity(&self) -> Result<QuadForm3, DensityError> {
        if matches!(self, DensityModel::MembraneCubic) {
            return Err(DensityError::Unsupported {
                op: "hessian_at_identity",
                kind: self.kind_name(),
            });
        }
        let h = HESSIAN_FD_STEP;
        let w0 = self.eval_w(&Mat3::identity());
        let perturbed = |a: usize, b: usize, sa: f64, sb: f64| -> f64 {
            let mut f = Mat3::identity();
            f.0[a / 3][a % 3] += sa * h;
            f.0[b / 3][b % 3] += sb * h;
            self.eval_w(&f)
        };
        let mut coeff = [[0.0; 9]; 9];
        for a in 0..9 {
            let wp = perturbed(a, a, 1.0, 0.0);
            let wm = perturbed(a, a, -1.0, 0.0);
            coeff[a][a] = (wp - 2.0 * w0 + wm) / (h * h);
            for b in (a + 1)..9 {
                let wpp = perturbed(a, b, 1.0, 1.0);
                let wpm = perturbed(a, b, 1.0, -1.0);
                let wmp = perturbed(a, b, -1.0, 1.0);
                let wmm = perturbed(a, b, -1.0, -1.0);
                let mixed = (wpp - wpm - wmp + wmm) / (4.0 * h * h);
                coeff[a][b] = mixed;
                coeff[b][a] = mixed;
            }
        }
        Ok(QuadForm3::from_coeff(coeff))
    }
}

fn check_lame(mu: f64, lambda: f64) -> Result<(), DensityError> {
    if mu > 0.0 && lambda > -2.0 * mu / 3.0 {
        Ok(())
    } else {
        Err(DensityError::InvalidParameters { mu, lambda })
    }
}

/// Pressure intensity and regime exponent for an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureSetting {
    pub pi: f64,
    pub alpha: f64,
}

impl PressureSetting {
    pub fn new(pi: f64, alpha: f64) -> Self {
        PressureSetting { pi, alpha }
    }

    /// Checks the pressure against the density's growth assumptions: a
    /// density without linear determinant control can only carry nonnegative
    /// pressure (orientation preservation is then the only safeguard), and
    /// the cubic membrane density needs `pi > -c_1`.
    pub fn validate_for(&self, model: &DensityModel) -> Result<(), DensityError> {
        match model {
            DensityModel::SaintVenantKirchhoff { .. } => Ok(()),
            DensityModel::CompressibleNeoHookean { .. } => {
                if self.pi >= 0.0 {
                    Ok(())
                } else {
                    Err(DensityError::InvalidPressure {
                        pi: self.pi,
                        reason: "neo-Hookean lacks linear determinant control; negative pressure needs it",
                    })
                }
            }
            DensityModel::MembraneCubic => {
                if self.pi > -MEMBRANE_COERCIVITY_C1 {
                    Ok(())
                } else {
                    Err(DensityError::InvalidPressure {
                        pi: self.pi,
                        reason: "membrane coercivity requires pi > -c1 = -3^(-3/2)",
                    })
                }
            }
        }
    }
}

/// Outcome of the frame-indifference sampling check.
#[derive(Debug, Clone, Copy)]
pub struct FrameIndifferenceReport {
    pub samples: usize,
    pub max_violation: f64,
    pub pass: bool,
}

/// Samples pairs `(R, F)` and verifies `|W(RF) - W(F)| <= 1e-9 (1 + |W(F)|)`.
pub fn check_frame_indifference(
    model: &DensityModel,
    samples: usize,
    seed: u64,
) -> FrameIndifferenceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation = 0.0_f64;
    for _ in 0..samples {
        let f = sample_admissible(model, &mut rng);
        let r = algebra::rotation_from_axis_angle(
            &algebra::sample_unit_vec3(&mut rng),
            rng.gen_range(0.0..core::f64::consts::TAU),
        );
        let w = model.eval_w(&f);
        let w_rot = model.eval_w(&(r * f));
        if w.is_infinite() && w_rot.is_infinite() {
            continue;
        }
        max_violation = max_violation.max((w_rot - w).abs() / (1.0 + w.abs()));
    }
    FrameIndifferenceReport {
        samples,
        max_violation,
        pass: max_violation <= 1e-9,
    }
}

fn sample_admissible<R: Rng>(model: &DensityModel, rng: &mut R) -> Mat3 {
    loop {
        let f = algebra::sample_mat3(rng, 2.0);
        if !model.orientation_preserving() || f.det() > 0.05 {
            return f;
        }
    }
}

/// Fitted constants and margins from sampling the membrane growth bounds.
#[derive(Debug, Clone, Copy)]
pub struct MembraneAssumptionReport {
    /// Analytic coercivity constant `3^(-3/2)` of the cubic part.
    pub c1_analytic: f64,
    /// Empirical `min W(F) / |F|^3` over the sample set.
    pub c1_fitted: f64,
    /// Empirical `max W^pi(F) / (1 + |F|^3)` over samples with `det F >= 0.1`.
    pub c_delta_fitted: f64,
    /// Smallest margin of `W^pi(F) - (c1 - pi^-) |F|^3` over all samples.
    pub lower_margin_min: f64,
    pub samples: usize,
}

/// Verifies the membrane growth assumptions for `W^pi` built on the cubic
/// example density, on matrices sampled with `det F` in `(0, 10]`.
///
/// The lower bound checked is `W^pi(F) >= (c1 - pi^-) |F|^3` with
/// `c1 = 3^(-3/2)`; the upper bound on `det F >= 0.1` holds with the reported
/// fitted constant. Fails loudly if any sample lands below the lower bound.
pub fn check_membrane_assumptions(
    pi: f64,
    samples: usize,
    seed: u64,
) -> Result<MembraneAssumptionReport, DensityError> {
    PressureSetting::new(pi, 0.0).validate_for(&DensityModel::MembraneCubic)?;
    let model = DensityModel::MembraneCubic;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi_neg = (-pi).max(0.0);
    let delta = 0.1;
    let mut c1_fitted = f64::INFINITY;
    let mut c_delta_fitted = 0.0_f64;
    let mut lower_margin_min = f64::INFINITY;
    let mut used = 0;
    while used < samples {
        let f = algebra::sample_mat3(&mut rng, 1.7);
        let det = f.det();
        if det <= 0.0 || det > 10.0 {
            continue;
        }
        used += 1;
        let norm = f.frobenius_norm();
        let norm_cubed = norm * norm * norm;
        let w = model.eval_w(&f);
        let w_pi = model.eval_w_pi(pi, &f);
        c1_fitted = c1_fitted.min(w / norm_cubed);
        let margin = w_pi - (MEMBRANE_COERCIVITY_C1 - pi_neg) * norm_cubed;
        lower_margin_min = lower_margin_min.min(margin);
        if margin < 0.0 {
            return Err(DensityError::BoundViolated {
                bound: "coercivity lower",
                margin,
            });
        }
        if det >= delta {
            c_delta_fitted = c_delta_fitted.max(w_pi / (1.0 + norm_cubed));
        }
    }
    Ok(MembraneAssumptionReport {
        c1_analytic: MEMBRANE_COERCIVITY_C1,
        c1_fitted,
        c_delta_fitted,
        lower_margin_min,
        samples: used,
    })
}
