//! Example gallery: closed-form states with known structure, planted
//! instances with prescribed symmetries, and seeded random samplers. Shared
//! by the test suites and the demo command.
//!
//! The planted builders verify their defining relation numerically before
//! returning, so a successful construction is itself a small certificate.

use ndarray::prelude::*;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gauge::HoneycombPair;
use crate::injectivity::{default_length_cap, is_injective_peps, minimal_injective_length};
use crate::lattice::{
    peps_conjugate, reflect_tensor, rotate_half_tensor, rotate_quarter_tensor, MpsSpec, PepsSpec,
    DEFAULT_AMP_CAP,
};
use crate::sample;
use crate::tensor::{inverse, scalar_match, tensor_norm, ComplexMatrix, Tolerance, C64};

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

// ---------------------------------------------------------------------------
// Closed-form chains
// ---------------------------------------------------------------------------

/// The two-level cat state: equal superposition of all-zeros and all-ones.
/// Its bond carries a classical label, so no region is ever injective.
pub fn ghz(n: usize) -> Result<MpsSpec> {
    let mut a = Array3::zeros((2, 2, 2));
    a[[0, 0, 0]] = cr(1.0);
    a[[1, 1, 1]] = cr(1.0);
    MpsSpec::periodic_uniform(a, n)
}

/// Fully polarized product chain with a trivial bond.
pub fn polarized_product(n: usize) -> Result<MpsSpec> {
    let mut a = Array3::zeros((2, 1, 1));
    a[[0, 0, 0]] = cr(1.0);
    MpsSpec::periodic_uniform(a, n)
}

/// The spin-1 valence-bond chain, physical order (+, 0, -). Injective from
/// two sites on.
pub fn aklt(n: usize) -> Result<MpsSpec> {
    let s23 = (2.0f64 / 3.0).sqrt();
    let s13 = (1.0f64 / 3.0).sqrt();
    let mut a = Array3::zeros((3, 2, 2));
    a[[0, 0, 1]] = cr(s23);
    a[[1, 0, 0]] = cr(-s13);
    a[[1, 1, 1]] = cr(s13);
    a[[2, 1, 0]] = cr(-s23);
    MpsSpec::periodic_uniform(a, n)
}

/// Spin matrices (Sx, Sy, Sz) for the spin-(d-1)/2 representation, basis
/// ordered from highest to lowest weight.
pub fn spin_matrices(d: usize) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let j = (d as f64 - 1.0) / 2.0;
    let m_of = |k: usize| j - k as f64;
    let mut sp = ComplexMatrix::zeros((d, d));
    for k in 1..d {
        let m = m_of(k);
        sp[[k - 1, k]] = cr((j * (j + 1.0) - m * (m + 1.0)).sqrt());
    }
    let sm = sp.t().mapv(|z| z.conj());
    let sx = (&sp + &sm).mapv(|z| z * cr(0.5));
    let sy = (&sp - &sm).mapv(|z| z * C64::new(0.0, -0.5));
    let mut sz = ComplexMatrix::zeros((d, d));
    for k in 0..d {
        sz[[k, k]] = cr(m_of(k));
    }
    (sx, sy, sz)
}

/// The Pauli matrices (X, Y, Z).
pub fn paulis() -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let mut x = ComplexMatrix::zeros((2, 2));
    x[[0, 1]] = cr(1.0);
    x[[1, 0]] = cr(1.0);
    let mut y = ComplexMatrix::zeros((2, 2));
    y[[0, 1]] = C64::new(0.0, -1.0);
    y[[1, 0]] = C64::new(0.0, 1.0);
    let mut z = ComplexMatrix::zeros((2, 2));
    z[[0, 0]] = cr(1.0);
    z[[1, 1]] = cr(-1.0);
    (x, y, z)
}

// ---------------------------------------------------------------------------
// Topological square-lattice states
// ---------------------------------------------------------------------------

/// Single-site form of the Z2 loop state: one qubit per site whose value is
/// the parity of the left and up legs, with the right and down legs copying
/// them. Fails injectivity on every region.
pub fn toric_code_site() -> Result<PepsSpec> {
    let mut a = Array5::zeros((2, 2, 2, 2, 2));
    for l in 0..2usize {
        for u in 0..2usize {
            a[[l ^ u, l, u, l, u]] = cr(1.0);
        }
    }
    PepsSpec::new(a, 2, 2)
}

/// Edge-pair form of the Z2 lattice-gauge ground state: each site carries
/// its north and east edge qubits (physical index 2n + e), and the legs
/// enforce the star parity n + e + r + d = 0 mod 2.
pub fn toric_code_edge_pair() -> Result<PepsSpec> {
    let mut a = Array5::zeros((4, 2, 2, 2, 2));
    for n in 0..2usize {
        for e in 0..2usize {
            for dd in 0..2usize {
                for r in 0..2usize {
                    if n ^ e ^ r ^ dd == 0 {
                        a[[2 * n + e, n, dd, r, e]] = cr(1.0);
                    }
                }
            }
        }
    }
    PepsSpec::new(a, 2, 2)
}

// ---------------------------------------------------------------------------
// Planted on-site symmetry
// ---------------------------------------------------------------------------

/// A torus tensor with a prescribed charge rule: entries are nonzero only
/// when the physical and outgoing virtual charges balance the incoming ones
/// up to the per-site offset.
#[derive(Debug, Clone)]
pub struct PlantedU1 {
    pub spec: PepsSpec,
    pub phys_charges: Vec<f64>,
    pub horizontal_charges: Vec<f64>,
    pub vertical_charges: Vec<f64>,
    /// Per-site charge offset; equals the magnetization per site of the
    /// resulting state.
    pub offset: f64,
}

impl PlantedU1 {
    /// Diagonal charge generator on the physical leg.
    pub fn sz(&self) -> ComplexMatrix {
        let d = self.phys_charges.len();
        let mut m = ComplexMatrix::zeros((d, d));
        for (k, &q) in self.phys_charges.iter().enumerate() {
            m[[k, k]] = cr(q);
        }
        m
    }
}

fn diagonal_phase(charges: &[f64], g: f64) -> ComplexMatrix {
    let n = charges.len();
    let mut m = ComplexMatrix::zeros((n, n));
    for (k, &q) in charges.iter().enumerate() {
        m[[k, k]] = C64::from_polar(1.0, g * q);
    }
    m
}

/// Build a charge-rule tensor with random entries on the allowed set and
/// verify the planted relation
/// `u_g A = exp(i g offset) conj(A; Y_g, Z_g)` before returning.
pub fn planted_u1<R: Rng>(
    rng: &mut R,
    phys_charges: &[f64],
    horizontal_charges: &[f64],
    vertical_charges: &[f64],
    offset: f64,
    rows: usize,
    cols: usize,
) -> Result<PlantedU1> {
    let d = phys_charges.len();
    let dh = horizontal_charges.len();
    let dv = vertical_charges.len();
    let mut a = Array5::zeros((d, dh, dv, dh, dv));
    let mut allowed = 0usize;
    for i in 0..d {
        for l in 0..dh {
            for dn in 0..dv {
                for r in 0..dh {
                    for up in 0..dv {
                        let flow = horizontal_charges[l] + vertical_charges[up] + offset
                            - phys_charges[i]
                            - horizontal_charges[r]
                            - vertical_charges[dn];
                        if flow.abs() < 1e-9 {
                            a[[i, l, dn, r, up]] = sample::complex_uniform(rng);
                            allowed += 1;
                        }
                    }
                }
            }
        }
    }
    if allowed == 0 {
        return Err(Error::Unsupported(
            "charge data admit no nonzero entries".into(),
        ));
    }
    // verify the planted relation at one generic coupling
    let g = 0.7;
    let u = diagonal_phase(phys_charges, g);
    let mut b = Array5::zeros(a.dim());
    for i in 0..d {
        let ui = u[[i, i]];
        b.index_axis_mut(Axis(0), i)
            .assign(&a.index_axis(Axis(0), i).mapv(|z| z * ui));
    }
    let yg = diagonal_phase(horizontal_charges, g);
    let zg = diagonal_phase(vertical_charges, g);
    let conj = peps_conjugate(&a, &yg, &zg)?;
    let (mu, res) = scalar_match(&conj.into_dyn(), &b.into_dyn())?;
    let expected = C64::from_polar(1.0, g * offset);
    if res > 1e-12 || (mu - expected).norm() > 1e-10 {
        return Err(Error::Unsupported(format!(
            "planted charge relation failed: residual {res}, scalar {mu}"
        )));
    }
    Ok(PlantedU1 {
        spec: PepsSpec::new(a, rows, cols)?,
        phys_charges: phys_charges.to_vec(),
        horizontal_charges: horizontal_charges.to_vec(),
        vertical_charges: vertical_charges.to_vec(),
        offset,
    })
}

// ---------------------------------------------------------------------------
// Planted spatial symmetry
// ---------------------------------------------------------------------------

/// A torus tensor together with the leg matrices realizing one of its
/// spatial symmetries: `permuted(A) = conj(A; y, z)` exactly.
#[derive(Debug, Clone)]
pub struct PlantedSpatial {
    pub spec: PepsSpec,
    pub y: ComplexMatrix,
    pub z: ComplexMatrix,
}

const PLANT_ATTEMPTS: usize = 5;

fn plant_residual(
    permuted: &Array5<C64>,
    a: &Array5<C64>,
    y: &ComplexMatrix,
    z: &ComplexMatrix,
) -> Result<(C64, f64)> {
    let conj = peps_conjugate(a, y, z)?;
    scalar_match(&conj.into_dyn(), &permuted.clone().into_dyn())
}

/// Tensor symmetric under the left-right flip: a symmetrization
/// `S = T + conj(refl T; Y0, Z0)` with symmetric `Y0` and involutive `Z0`,
/// dressed by arbitrary invertible leg matrices.
pub fn planted_reflection<R: Rng>(
    rng: &mut R,
    d: usize,
    dh: usize,
    dv: usize,
) -> Result<PlantedSpatial> {
    for _ in 0..PLANT_ATTEMPTS {
        let y0 = sample::symmetric_invertible(rng, dh, 50.0);
        let z0 = sample::involution(rng, dv);
        let t: Array5<C64> = sample::complex_tensor(rng, &[d, dh, dv, dh, dv])
            .into_dimensionality()
            .expect("five axes");
        let f = |x: &Array5<C64>| -> Result<Array5<C64>> {
            peps_conjugate(&reflect_tensor(x), &y0, &z0)
        };
        let ft = f(&t)?;
        // the flip composed with this conjugation squares to the identity
        let fft = f(&ft)?;
        let involution_defect = tensor_norm(&(&fft - &t)) / tensor_norm(&t);
        if involution_defect > 1e-9 {
            continue;
        }
        let s = &t + &ft;
        if tensor_norm(&s) < 0.1 * tensor_norm(&t) {
            continue;
        }
        let p = sample::invertible(rng, dh, 20.0);
        let q = sample::invertible(rng, dv, 20.0);
        let a = peps_conjugate(&s, &p, &q)?;
        // refl(conj(X; P, Q)) = conj(refl X; P^{-T}, Q), and refl S =
        // conj(S; Y0^{-1}, Z0^{-1}), so the dressed tensor satisfies
        // refl A = conj(A; P^{-T} Y0^{-1} P^{-1}, Q Z0^{-1} Q^{-1})
        let p_inv = inverse(&p)?;
        let q_inv = inverse(&q)?;
        let y = p_inv.t().to_owned().dot(&inverse(&y0)?).dot(&p_inv);
        let z = q.dot(&inverse(&z0)?).dot(&q_inv);
        let (mu, res) = plant_residual(&reflect_tensor(&a), &a, &y, &z)?;
        if res < 1e-9 && (mu - cr(1.0)).norm() < 1e-8 {
            return Ok(PlantedSpatial {
                spec: PepsSpec::new(a, 2, 2)?,
                y,
                z,
            });
        }
    }
    Err(Error::Unsupported(
        "reflection-symmetric construction did not converge".into(),
    ))
}

/// Tensor symmetric under the half turn, built like the reflection case
/// with both seed matrices symmetric.
pub fn planted_rotation_half<R: Rng>(
    rng: &mut R,
    d: usize,
    dh: usize,
    dv: usize,
) -> Result<PlantedSpatial> {
    for _ in 0..PLANT_ATTEMPTS {
        let y0 = sample::symmetric_invertible(rng, dh, 50.0);
        let z0 = sample::symmetric_invertible(rng, dv, 50.0);
        let t: Array5<C64> = sample::complex_tensor(rng, &[d, dh, dv, dh, dv])
            .into_dimensionality()
            .expect("five axes");
        let f = |x: &Array5<C64>| -> Result<Array5<C64>> {
            peps_conjugate(&rotate_half_tensor(x), &y0, &z0)
        };
        let ft = f(&t)?;
        let fft = f(&ft)?;
        let involution_defect = tensor_norm(&(&fft - &t)) / tensor_norm(&t);
        if involution_defect > 1e-9 {
            continue;
        }
        let s = &t + &ft;
        if tensor_norm(&s) < 0.1 * tensor_norm(&t) {
            continue;
        }
        let p = sample::invertible(rng, dh, 20.0);
        let q = sample::invertible(rng, dv, 20.0);
        let a = peps_conjugate(&s, &p, &q)?;
        // the half turn transposes both leg matrices under conjugation, so
        // rot A = conj(A; P^{-T} Y0^{-1} P^{-1}, Q^{-T} Z0^{-1} Q^{-1})
        let p_inv = inverse(&p)?;
        let q_inv = inverse(&q)?;
        let y = p_inv.t().to_owned().dot(&inverse(&y0)?).dot(&p_inv);
        let z = q_inv.t().to_owned().dot(&inverse(&z0)?).dot(&q_inv);
        let (mu, res) = plant_residual(&rotate_half_tensor(&a), &a, &y, &z)?;
        if res < 1e-9 && (mu - cr(1.0)).norm() < 1e-8 {
            return Ok(PlantedSpatial {
                spec: PepsSpec::new(a, 2, 2)?,
                y,
                z,
            });
        }
    }
    Err(Error::Unsupported(
        "half-turn-symmetric construction did not converge".into(),
    ))
}

/// Tensor symmetric under the quarter turn. The seed pair must commute and
/// be symmetric, so `Z0` is taken as a polynomial in `Y0`; the dressing
/// matrices are complex orthogonal so the planted relation keeps the
/// products `YZ` and `ZY` symmetric.
pub fn planted_rotation_quarter<R: Rng>(rng: &mut R, d: usize, bond: usize) -> Result<PlantedSpatial> {
    for _ in 0..PLANT_ATTEMPTS {
        let y0 = sample::symmetric_invertible(rng, bond, 20.0);
        let alpha = cr(rng.gen_range(-0.6..0.6));
        let beta = cr(rng.gen_range(0.6..1.4));
        let z0 = {
            let mut m = y0.dot(&y0).mapv(|z| z * alpha);
            for k in 0..bond {
                m[[k, k]] += beta;
            }
            m
        };
        if inverse(&z0).is_err() {
            continue;
        }
        let t: Array5<C64> = sample::complex_tensor(rng, &[d, bond, bond, bond, bond])
            .into_dimensionality()
            .expect("five axes");
        // one application of the inverse turn combined with the seed
        // conjugation; four of them must close
        let f = |x: &Array5<C64>| -> Result<Array5<C64>> {
            let c = peps_conjugate(x, &y0, &z0)?;
            Ok(rotate_quarter_tensor(&rotate_quarter_tensor(&rotate_quarter_tensor(&c))))
        };
        let f1 = f(&t)?;
        let f2 = f(&f1)?;
        let f3 = f(&f2)?;
        let f4 = f(&f3)?;
        let closure_defect = tensor_norm(&(&f4 - &t)) / tensor_norm(&t);
        if closure_defect > 1e-9 {
            continue;
        }
        let s = &(&t + &f1) + &(&f2 + &f3);
        if tensor_norm(&s) < 0.1 * tensor_norm(&t) {
            continue;
        }
        let p = sample::complex_orthogonal(rng, bond);
        let q = sample::complex_orthogonal(rng, bond);
        let a = peps_conjugate(&s, &p, &q)?;
        // rot(conj(X; P, Q)) = conj(rot X; Q, P^{-T}) and rot S =
        // conj(S; Y0, Z0), so with orthogonal dressings
        // rot A = conj(A; Q Y0 P^T, P Z0 Q^T)
        let y = q.dot(&y0).dot(&p.t().to_owned());
        let z = p.dot(&z0).dot(&q.t().to_owned());
        let (mu, res) = plant_residual(&rotate_quarter_tensor(&a), &a, &y, &z)?;
        if res < 1e-9 && (mu - cr(1.0)).norm() < 1e-8 {
            return Ok(PlantedSpatial {
                spec: PepsSpec::new(a, 2, 2)?,
                y,
                z,
            });
        }
    }
    Err(Error::Unsupported(
        "quarter-turn-symmetric construction did not converge".into(),
    ))
}

// ---------------------------------------------------------------------------
// Random samplers
// ---------------------------------------------------------------------------

/// Uniform ring chain with independent complex-uniform entries.
pub fn random_mps<R: Rng>(rng: &mut R, d: usize, bond: usize, n: usize) -> Result<MpsSpec> {
    let a: Array3<C64> = sample::complex_tensor(rng, &[d, bond, bond])
        .into_dimensionality()
        .expect("three axes");
    MpsSpec::periodic_uniform(a, n)
}

/// Resample until the chain has a finite injective length.
pub fn random_injective_mps<R: Rng>(
    rng: &mut R,
    d: usize,
    bond: usize,
    n: usize,
) -> Result<MpsSpec> {
    let tol = Tolerance::default();
    for _ in 0..20 {
        let spec = random_mps(rng, d, bond, n)?;
        let cap = default_length_cap(d, bond);
        if minimal_injective_length(&spec, cap, &tol, DEFAULT_AMP_CAP)?
            .found()
            .is_some()
        {
            return Ok(spec);
        }
    }
    Err(Error::Unsupported(
        "no injective chain found within the retry budget".into(),
    ))
}

/// Uniform torus tensor with independent complex-uniform entries.
pub fn random_peps<R: Rng>(
    rng: &mut R,
    d: usize,
    dh: usize,
    dv: usize,
    rows: usize,
    cols: usize,
) -> Result<PepsSpec> {
    let a: Array5<C64> = sample::complex_tensor(rng, &[d, dh, dv, dh, dv])
        .into_dimensionality()
        .expect("five axes");
    PepsSpec::new(a, rows, cols)
}

/// Resample until some small region is injective.
pub fn random_injective_peps<R: Rng>(
    rng: &mut R,
    d: usize,
    dh: usize,
    dv: usize,
    rows: usize,
    cols: usize,
) -> Result<PepsSpec> {
    let tol = Tolerance::default();
    for _ in 0..20 {
        let spec = random_peps(rng, d, dh, dv, rows, cols)?;
        for (h, k) in [(1usize, 1usize), (1, 2), (2, 1), (2, 2)] {
            // a region cannot be injective while its physical dimension is
            // below the squared boundary dimension
            let phys = (d as u128).pow((h * k) as u32);
            let boundary = (dh as u128).pow(h as u32) * (dv as u128).pow(k as u32);
            if phys < boundary * boundary {
                continue;
            }
            if let Ok(report) = is_injective_peps(&spec, h, k, &tol, DEFAULT_AMP_CAP) {
                if report.injective {
                    return Ok(spec);
                }
            }
        }
    }
    Err(Error::Unsupported(
        "no injective torus tensor found within the retry budget".into(),
    ))
}

/// Two-site unit cell with independent complex-uniform entries.
pub fn random_honeycomb_cell<R: Rng>(
    rng: &mut R,
    d1: usize,
    d2: usize,
    dh: usize,
    dv: usize,
    dm: usize,
) -> Result<HoneycombPair> {
    let p: Array4<C64> = sample::complex_tensor(rng, &[d1, dh, dv, dm])
        .into_dimensionality()
        .expect("four axes");
    let q: Array4<C64> = sample::complex_tensor(rng, &[d2, dm, dv, dh])
        .into_dimensionality()
        .expect("four axes");
    HoneycombPair::new(p, q)
}
