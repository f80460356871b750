//! Symmetry certification.
//!
//! A symmetry of an injective network is never just observed on the state:
//! it descends to the single tensor as a gauge relation, and that relation
//! constrains the gauge matrices themselves. This module certifies on-site
//! unitaries (with their per-site phase), full group representations (with
//! virtual charges and a homomorphism check), and the point-group actions
//! of the square lattice (with the transpose and square constraints their
//! gauges must satisfy).

use ndarray::prelude::*;
use ndarray_linalg::{Eig, Eigh, UPLO};

use crate::error::{Error, Result};
use crate::gauge::{peps_gauge, GaugeCertificate};
use crate::lattice::{reflect_tensor, rotate_half_tensor, rotate_quarter_tensor, PepsSpec};
use crate::tensor::{eye, frobenius, tensordot, ComplexMatrix, Tolerance, C64};

/// Constraint identities on certified gauges are checked at this cut.
pub const CONSTRAINT_CUT: f64 = 1e-8;

/// Which symmetry a certificate claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryKind {
    /// On-site unitary action.
    Local,
    /// Left-right flip of the lattice.
    Reflection,
    /// Half turn (both leg pairs swapped).
    RotationHalf,
    /// Quarter turn (legs cycled); needs equal bond dimensions.
    RotationQuarter,
}

impl std::fmt::Display for SymmetryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SymmetryKind::Local => "local",
            SymmetryKind::Reflection => "reflection",
            SymmetryKind::RotationHalf => "half rotation",
            SymmetryKind::RotationQuarter => "quarter rotation",
        };
        write!(f, "{name}")
    }
}

/// One named residual check on the certified data.
#[derive(Debug, Clone)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub residual: f64,
    pub passed: bool,
    /// Scalar datum behind the check (a sign, a square scalar, a phase)
    /// when one is meaningful.
    pub value: Option<C64>,
}

impl ConstraintCheck {
    fn new(name: &'static str, residual: f64, value: Option<C64>) -> Self {
        Self {
            name,
            residual,
            passed: residual <= CONSTRAINT_CUT,
            value,
        }
    }
}

/// A certified symmetry: the gauge realizing it, the per-site phase, and
/// the structural constraints the gauge satisfies.
#[derive(Debug, Clone)]
pub struct SymmetryCertificate {
    pub kind: SymmetryKind,
    pub gauge: GaugeCertificate,
    /// Per-site phase picked up by the action (the argument of the
    /// tensor-level scalar).
    pub theta: f64,
    pub constraints: Vec<ConstraintCheck>,
}

impl SymmetryCertificate {
    pub fn constraints_pass(&self) -> bool {
        self.constraints.iter().all(|c| c.passed)
    }
}

fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let d = u.nrows();
    let udag = u.t().mapv(|z| z.conj());
    let defect = &udag.dot(u) - &eye(d);
    frobenius(&defect) / (d as f64).sqrt()
}

/// exp(i t H) for Hermitian H, through its eigendecomposition.
pub fn unitary_from_generator(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let hd = h.t().mapv(|z| z.conj());
    let defect = &hd - h;
    let scale = frobenius(h).max(1.0);
    if frobenius(&defect) / scale > 1e-10 {
        return Err(Error::Unsupported(
            "generator must be Hermitian".into(),
        ));
    }
    let (w, v) = h.eigh(UPLO::Lower)?;
    let n = h.nrows();
    let mut out = ComplexMatrix::zeros((n, n));
    for k in 0..n {
        let phase = C64::from_polar(1.0, t * w[k]);
        let col = v.column(k);
        for a in 0..n {
            for b in 0..n {
                out[[a, b]] += phase * col[a] * col[b].conj();
            }
        }
    }
    Ok(out)
}

fn rotated_tensor(spec: &PepsSpec, u: &ComplexMatrix) -> Result<Array5<C64>> {
    let b = tensordot(
        &u.clone().into_dyn(),
        &spec.tensor().clone().into_dyn(),
        &[1],
        &[0],
    )?;
    b.into_dimensionality::<Ix5>()
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// Certify an on-site unitary symmetry: `u` applied to every physical leg
/// must be undone by a bond gauge, up to one phase per site.
pub fn certify_local(
    spec: &PepsSpec,
    u: &ComplexMatrix,
    tol: &Tolerance,
) -> Result<SymmetryCertificate> {
    let d = spec.phys_dim();
    if u.dim() != (d, d) {
        return Err(Error::ShapeMismatch(format!(
            "action is {}x{} but the physical dimension is {d}",
            u.nrows(),
            u.ncols()
        )));
    }
    let u_defect = unitarity_defect(u);
    if u_defect > 1e-10 {
        return Err(Error::Unsupported(
            "candidate symmetry action must be unitary".into(),
        ));
    }
    let b = rotated_tensor(spec, u)?;
    let sb = PepsSpec::new(b, spec.rows(), spec.cols())?;
    let gauge = match peps_gauge(spec, &sb, tol) {
        Ok(c) => c,
        Err(Error::NotSameState { residual }) => {
            return Err(Error::NotASymmetry { residual })
        }
        Err(e) => return Err(e),
    };
    let mu = gauge.scalar;
    let theta = mu.arg();
    let unimodular = (mu.norm() - 1.0).abs();
    let constraints = vec![
        ConstraintCheck::new("unitary-action", u_defect, None),
        ConstraintCheck::new("unimodular-phase", unimodular, Some(mu)),
    ];
    Ok(SymmetryCertificate {
        kind: SymmetryKind::Local,
        gauge,
        theta,
        constraints,
    })
}

/// Residual of `m^T = s m` for the better sign, returned as
/// (sign, relative residual).
fn transpose_sign(m: &ComplexMatrix) -> (f64, f64) {
    let norm = frobenius(m).max(f64::MIN_POSITIVE);
    let mt = m.t().to_owned();
    let plus = {
        let d = &mt - m;
        frobenius(&d) / norm
    };
    let minus = {
        let d = &mt + m;
        frobenius(&d) / norm
    };
    if plus <= minus {
        (1.0, plus)
    } else {
        (-1.0, minus)
    }
}

/// Residual of `m^2 = c 1` with the least-squares scalar `c`.
fn square_scalar(m: &ComplexMatrix) -> (C64, f64) {
    let n = m.nrows();
    let sq = m.dot(m);
    let c: C64 = (0..n).map(|i| sq[[i, i]]).sum::<C64>() / C64::new(n as f64, 0.0);
    if c.norm() < 1e-14 {
        return (c, 1.0);
    }
    let defect = sq.mapv(|z| z / c) - eye(n);
    (c, frobenius(&defect) / (n as f64).sqrt())
}

fn scalar_order(mu: C64, order: u32) -> f64 {
    (mu.powu(order) - C64::new(1.0, 0.0)).norm()
}

/// Certify one of the square-lattice point-group actions. The permuted
/// tensor must be gauge-equivalent to the original, and the recovered leg
/// matrices must satisfy the transpose and square identities the symmetry
/// class forces on them (up to the scalar freedoms recorded in each check).
pub fn certify_spatial(
    spec: &PepsSpec,
    kind: SymmetryKind,
    tol: &Tolerance,
) -> Result<SymmetryCertificate> {
    let a = spec.tensor();
    let permuted = match kind {
        SymmetryKind::Local => {
            return Err(Error::Unsupported(
                "on-site actions are certified by certify_local".into(),
            ))
        }
        SymmetryKind::Reflection => reflect_tensor(a),
        SymmetryKind::RotationHalf => rotate_half_tensor(a),
        SymmetryKind::RotationQuarter => {
            if spec.horizontal_bond() != spec.vertical_bond() {
                return Err(Error::IncompatibleBonds(format!(
                    "quarter turn needs equal bonds, got {} and {}",
                    spec.horizontal_bond(),
                    spec.vertical_bond()
                )));
            }
            rotate_quarter_tensor(a)
        }
    };
    let sb = PepsSpec::new(permuted, spec.rows(), spec.cols())?;
    let gauge = match peps_gauge(spec, &sb, tol) {
        Ok(c) => c,
        Err(Error::NotSameState { residual }) => {
            return Err(Error::NotASymmetry { residual })
        }
        Err(e) => return Err(e),
    };
    let y = gauge.y().expect("torus certificate").clone();
    let z = gauge.z().expect("torus certificate").clone();
    let mu = gauge.scalar;
    let theta = mu.arg();
    let mut constraints = Vec::new();
    match kind {
        SymmetryKind::Reflection => {
            let (sy, ry) = transpose_sign(&y);
            constraints.push(ConstraintCheck::new(
                "reflection-y-transpose",
                ry,
                Some(C64::new(sy, 0.0)),
            ));
            let (c, rz) = square_scalar(&z);
            constraints.push(ConstraintCheck::new(
                "reflection-z-square-scalar",
                rz,
                Some(c),
            ));
            constraints.push(ConstraintCheck::new(
                "reflection-phase-order-two",
                scalar_order(mu, 2),
                Some(mu),
            ));
        }
        SymmetryKind::RotationHalf => {
            let (sy, ry) = transpose_sign(&y);
            constraints.push(ConstraintCheck::new(
                "half-rotation-y-transpose",
                ry,
                Some(C64::new(sy, 0.0)),
            ));
            let (sz, rz) = transpose_sign(&z);
            constraints.push(ConstraintCheck::new(
                "half-rotation-z-transpose",
                rz,
                Some(C64::new(sz, 0.0)),
            ));
            constraints.push(ConstraintCheck::new(
                "half-rotation-phase-order-two",
                scalar_order(mu, 2),
                Some(mu),
            ));
        }
        SymmetryKind::RotationQuarter => {
            let yz = y.dot(&z);
            let (syz, ryz) = transpose_sign(&yz);
            constraints.push(ConstraintCheck::new(
                "quarter-rotation-yz-transpose",
                ryz,
                Some(C64::new(syz, 0.0)),
            ));
            let zy = z.dot(&y);
            let (szy, rzy) = transpose_sign(&zy);
            constraints.push(ConstraintCheck::new(
                "quarter-rotation-zy-transpose",
                rzy,
                Some(C64::new(szy, 0.0)),
            ));
            constraints.push(ConstraintCheck::new(
                "quarter-rotation-phase-order-four",
                scalar_order(mu, 4),
                Some(mu),
            ));
        }
        SymmetryKind::Local => unreachable!(),
    }
    Ok(SymmetryCertificate {
        kind,
        gauge,
        theta,
        constraints,
    })
}

// ---------------------------------------------------------------------------
// Group representations
// ---------------------------------------------------------------------------

/// A group worth of candidate actions.
#[derive(Debug, Clone)]
pub enum GroupSpec {
    /// One-parameter family `u_g = exp(i g H)` sampled at the given
    /// couplings.
    U1 {
        generator: ComplexMatrix,
        couplings: Vec<f64>,
    },
    /// An explicit list of unitaries.
    Finite { elements: Vec<ComplexMatrix> },
}

/// Virtual charges read off a bond gauge. An overall shift is pure gauge,
/// so only differences carry meaning; the three columns present the same
/// data against three common reference choices. Sorted descending.
#[derive(Debug, Clone)]
pub struct ChargeReport {
    pub raw: Vec<f64>,
    pub relative_to_largest: Vec<f64>,
    pub centered: Vec<f64>,
}

/// Certified representation data for a whole group of actions.
#[derive(Debug, Clone)]
pub struct RepresentationReport {
    /// Couplings certified (empty for finite groups).
    pub couplings: Vec<f64>,
    pub certificates: Vec<SymmetryCertificate>,
    /// Charges from the gauge of the smallest nonzero coupling. Valid while
    /// that coupling times the charge spread stays within one branch of the
    /// argument.
    pub charges: Option<ChargeReport>,
    /// Worst relative defect of `Y_g Y_h = phase * Y_{g+h}` over the
    /// coupling pairs available in the sample (or over the group table).
    pub homomorphism_residual: Option<f64>,
    /// Fitted slope of the per-site phase against the coupling.
    pub theta_slope: Option<f64>,
    /// Worst deviation of the measured phases from the linear fit.
    pub theta_linearity_residual: Option<f64>,
}

fn charges_from_gauge(y: &ComplexMatrix, g0: f64) -> Result<ChargeReport> {
    let (vals, _) = y.eig()?;
    let mut raw: Vec<f64> = vals.iter().map(|l| l.arg() / g0).collect();
    raw.sort_by(|a, b| b.partial_cmp(a).expect("finite charges"));
    let top = raw[0];
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(ChargeReport {
        relative_to_largest: raw.iter().map(|q| q - top).collect(),
        centered: raw.iter().map(|q| q - mean).collect(),
        raw,
    })
}

/// Least-squares phase aligning `candidate` with `reference`, then the
/// relative defect.
fn phase_aligned_defect(reference: &ComplexMatrix, candidate: &ComplexMatrix) -> f64 {
    let overlap: C64 = reference
        .iter()
        .zip(candidate.iter())
        .map(|(r, c)| r.conj() * c)
        .sum();
    let norm = frobenius(reference).max(f64::MIN_POSITIVE);
    if overlap.norm() < 1e-14 {
        return 1.0;
    }
    let phase = overlap / overlap.norm();
    let diff = candidate - &reference.mapv(|z| z * phase);
    frobenius(&diff) / norm
}

/// Certify a whole group of on-site actions and cross-check that the
/// recovered gauges compose like the group.
pub fn certify_representation(
    spec: &PepsSpec,
    group: &GroupSpec,
    tol: &Tolerance,
) -> Result<RepresentationReport> {
    match group {
        GroupSpec::U1 {
            generator,
            couplings,
        } => {
            if couplings.is_empty() {
                return Err(Error::Unsupported("no couplings to certify".into()));
            }
            let mut certificates = Vec::with_capacity(couplings.len());
            for &g in couplings {
                let u = unitary_from_generator(generator, g)?;
                certificates.push(certify_local(spec, &u, tol)?);
            }
            // charges from the smallest nonzero coupling
            let smallest = couplings
                .iter()
                .enumerate()
                .filter(|(_, g)| g.abs() > 1e-12)
                .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite"));
            let charges = match smallest {
                Some((idx, &g0)) => {
                    let y = certificates[idx].gauge.y().expect("torus certificate");
                    Some(charges_from_gauge(y, g0)?)
                }
                None => None,
            };
            // homomorphism: compare Y_g Y_h with Y_{g+h} where available
            let mut worst: Option<f64> = None;
            for (i, &gi) in couplings.iter().enumerate() {
                for (j, &gj) in couplings.iter().enumerate() {
                    let target = gi + gj;
                    if let Some(k) = couplings
                        .iter()
                        .position(|&gk| (gk - target).abs() < 1e-9)
                    {
                        let yi = certificates[i].gauge.y().expect("torus certificate");
                        let yj = certificates[j].gauge.y().expect("torus certificate");
                        let yk = certificates[k].gauge.y().expect("torus certificate");
                        let defect = phase_aligned_defect(yk, &yi.dot(yj));
                        worst = Some(worst.map_or(defect, |w: f64| w.max(defect)));
                    }
                }
            }
            // per-site phase against coupling: unwrap against the smallest
            // coupling's slope, then fit through the origin
            let (theta_slope, theta_res) = match smallest {
                Some((idx, g0)) => {
                    let base = certificates[idx].theta / g0;
                    let tau = 2.0 * std::f64::consts::PI;
                    let unwrapped: Vec<f64> = couplings
                        .iter()
                        .zip(&certificates)
                        .map(|(&g, cert)| {
                            let t = cert.theta;
                            t + tau * ((base * g - t) / tau).round()
                        })
                        .collect();
                    let num: f64 = couplings.iter().zip(&unwrapped).map(|(g, t)| g * t).sum();
                    let den: f64 = couplings.iter().map(|g| g * g).sum();
                    let slope = num / den;
                    let res = couplings
                        .iter()
                        .zip(&unwrapped)
                        .map(|(g, t)| (t - slope * g).abs())
                        .fold(0.0f64, f64::max);
                    (Some(slope), Some(res))
                }
                None => (None, None),
            };
            Ok(RepresentationReport {
                couplings: couplings.clone(),
                certificates,
                charges,
                homomorphism_residual: worst,
                theta_slope,
                theta_linearity_residual: theta_res,
            })
        }
        GroupSpec::Finite { elements } => {
            if elements.is_empty() {
                return Err(Error::Unsupported("no elements to certify".into()));
            }
            let mut certificates = Vec::with_capacity(elements.len());
            for u in elements {
                certificates.push(certify_local(spec, u, tol)?);
            }
            // best-effort composition check: whenever a product of two
            // elements matches a listed element up to a phase, the gauges
            // must compose the same way
            let mut worst: Option<f64> = None;
            for (i, ui) in elements.iter().enumerate() {
                for (j, uj) in elements.iter().enumerate() {
                    let prod = ui.dot(uj);
                    let hit = elements
                        .iter()
                        .enumerate()
                        .map(|(k, uk)| (k, phase_aligned_defect(uk, &prod)))
                        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"));
                    if let Some((k, defect)) = hit {
                        if defect < 1e-8 {
                            let yi = certificates[i].gauge.y().expect("torus certificate");
                            let yj = certificates[j].gauge.y().expect("torus certificate");
                            let yk = certificates[k].gauge.y().expect("torus certificate");
                            let gd = phase_aligned_defect(yk, &yi.dot(yj));
                            worst = Some(worst.map_or(gd, |w: f64| w.max(gd)));
                        }
                    }
                }
            }
            Ok(RepresentationReport {
                couplings: Vec::new(),
                certificates,
                charges: None,
                homomorphism_residual: worst,
                theta_slope: None,
                theta_linearity_residual: None,
            })
        }
    }
}
