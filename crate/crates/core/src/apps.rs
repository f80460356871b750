//! Applications: filling obstructions, loop operators, parent Hamiltonians,
//! and entanglement bounds.
//!
//! Everything here runs on desk-scale lattices where the state vector fits
//! in memory, so every claim is checked against the dense state rather than
//! asymptotic arguments. A charge-symmetric tensor with fractional filling
//! per unit cell cannot be injective; the obstruction report measures all
//! three ingredients independently and flags any combination the theory
//! forbids. Loop operators distinguish states that are invariant under an
//! action along a closed cycle but not under the same action on a single
//! site. Parent Hamiltonians project onto the complement of a window's
//! boundary image; their ground spaces are computed exactly by kernel
//! intersection. The entanglement rank of a rectangular region is compared
//! against the dimension of the bonds its boundary cuts.

use ndarray::prelude::*;
use ndarray_linalg::SVD;

use crate::error::{Error, Result};
use crate::examples::spin_matrices;
use crate::injectivity::{gamma_matrix_mps, gamma_matrix_peps, is_injective_peps};
use crate::lattice::{
    equal_up_to_scalar, mps_state, peps_state, Boundary, MpsSpec, PepsSpec, StateVector,
};
use crate::symmetry::unitary_from_generator;
use crate::tensor::{
    eye, nullspace_with_scale, rank_from_singular_values, singular_values, ComplexMatrix,
    Tolerance, C64,
};

/// Distance from the nearest integer below which a filling counts as
/// integral.
pub const INTEGER_CUT: f64 = 1e-6;

/// Apply an operator to a subset of sites of a dense state. The operator's
/// row and column index run row-major over `sites` in the order given.
pub fn apply_on_sites(
    state: &StateVector,
    op: &ComplexMatrix,
    sites: &[usize],
) -> Result<StateVector> {
    let n = state.site_count();
    let dims = state.dims();
    let dw: usize = sites.iter().map(|&s| dims[s]).product();
    if op.dim() != (dw, dw) {
        return Err(Error::ShapeMismatch(format!(
            "operator is {:?} but the sites span dimension {dw}",
            op.dim()
        )));
    }
    let others: Vec<usize> = (0..n).filter(|k| !sites.contains(k)).collect();
    let fwd: Vec<usize> = sites.iter().copied().chain(others.iter().copied()).collect();
    let moved = state.reorder_sites(&fwd)?;
    let rest = moved.amps().len() / dw.max(1);
    let m = moved
        .amps()
        .clone()
        .into_shape_with_order((dw, rest))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let out = op.dot(&m);
    let flat = out
        .into_shape_with_order(dw * rest)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let moved_out = StateVector::new(flat, moved.dims().to_vec())?;
    let mut inv = vec![0usize; n];
    for (j, &f) in fwd.iter().enumerate() {
        inv[f] = j;
    }
    moved_out.reorder_sites(&inv)
}

fn per_site_expectation(psi: &StateVector, op: &ComplexMatrix) -> Result<f64> {
    let norm_sq = psi.norm().powi(2);
    if norm_sq == 0.0 {
        return Err(Error::ZeroState);
    }
    let n = psi.site_count();
    let mut total = C64::new(0.0, 0.0);
    for j in 0..n {
        let opsi = apply_on_sites(psi, op, &[j])?;
        total += psi.inner(&opsi)?;
    }
    let m = total / C64::new(n as f64 * norm_sq, 0.0);
    if m.im.abs() > 1e-8 * (1.0 + m.re.abs()) {
        return Err(Error::Unsupported(format!(
            "expectation of a non-Hermitian observable (imaginary part {:.3e})",
            m.im
        )));
    }
    Ok(m.re)
}

/// Average weight-axis spin per site of a torus state, using the spin
/// operator matching the physical dimension (basis ordered highest weight
/// first).
pub fn magnetization(spec: &PepsSpec, cap: u64) -> Result<f64> {
    let (_, _, sz) = spin_matrices(spec.phys_dim());
    let psi = peps_state(spec, cap)?;
    per_site_expectation(&psi, &sz)
}

/// Chain version of [`magnetization`].
pub fn magnetization_chain(spec: &MpsSpec, cap: u64) -> Result<f64> {
    let dims = spec.phys_dims();
    let d = dims[0];
    if dims.iter().any(|&x| x != d) {
        return Err(Error::Unsupported(
            "magnetization needs one physical dimension on every site".into(),
        ));
    }
    let (_, _, sz) = spin_matrices(d);
    let psi = mps_state(spec, cap)?;
    per_site_expectation(&psi, &sz)
}

/// Measured ingredients of the filling obstruction: a charge-symmetric
/// tensor whose spin minus magnetization is fractional cannot be injective.
#[derive(Debug, Clone)]
pub struct LsmReport {
    /// Spin carried by the physical leg, `(d - 1) / 2`.
    pub spin: f64,
    /// Average weight-axis spin per site on the checked lattice.
    pub magnetization: f64,
    /// `spin - magnetization`, the filling that must be integral for an
    /// injective symmetric tensor.
    pub filling: f64,
    /// Distance of the filling from the nearest integer.
    pub integer_distance: f64,
    pub fractional: bool,
    /// Whether the state is invariant under the sampled charge rotations.
    pub symmetric: bool,
    pub symmetry_residual: f64,
    /// Whether any affordable region was injective.
    pub injective: bool,
    pub injective_region: Option<(usize, usize)>,
    /// Symmetric with fractional filling: injectivity is forbidden.
    pub obstructed: bool,
    /// False only if all three ingredients combine in the forbidden way,
    /// which would contradict the theorem and means a measurement is wrong.
    pub consistent: bool,
    pub lattice: (usize, usize),
}

const LSM_COUPLINGS: [f64; 2] = [0.7, 1.9];

/// Regions tried by the injectivity scan, small to large. Injectivity is a
/// tensor property, so the ladder is independent of the source lattice;
/// unaffordable regions are skipped.
const REGION_LADDER: [(usize, usize); 9] = [
    (1, 1),
    (1, 2),
    (2, 1),
    (2, 2),
    (1, 3),
    (3, 1),
    (2, 3),
    (3, 2),
    (3, 3),
];

/// Measure spin, magnetization, charge symmetry, and injectivity of one
/// tensor, and combine them into the filling-obstruction verdict.
pub fn lsm_check(spec: &PepsSpec, tol: &Tolerance, cap: u64) -> Result<LsmReport> {
    let d = spec.phys_dim();
    let spin = (d as f64 - 1.0) / 2.0;
    let (_, _, sz) = spin_matrices(d);
    let psi = peps_state(spec, cap)?;
    let m = per_site_expectation(&psi, &sz)?;
    let n = spec.rows() * spec.cols();
    // state-level charge rotation invariance at generic couplings
    let mut symmetry_residual = 0.0f64;
    for g in LSM_COUPLINGS {
        let u = unitary_from_generator(&sz, g)?;
        let mut rotated = psi.clone();
        for j in 0..n {
            rotated = apply_on_sites(&rotated, &u, &[j])?;
        }
        let (_, res) = equal_up_to_scalar(&psi, &rotated)?;
        symmetry_residual = symmetry_residual.max(res);
    }
    let symmetric = symmetry_residual <= tol.residual_cut;
    // injectivity over the affordable region ladder
    let mut injective_region = None;
    for (h, k) in REGION_LADDER {
        match is_injective_peps(spec, h, k, tol, cap) {
            Ok(report) if report.injective => {
                injective_region = Some((h, k));
                break;
            }
            Ok(_) => {}
            Err(Error::DeskScaleExceeded { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let injective = injective_region.is_some();
    let filling = spin - m;
    let integer_distance = (filling - filling.round()).abs();
    let fractional = integer_distance > INTEGER_CUT;
    let obstructed = symmetric && fractional;
    let consistent = !(symmetric && fractional && injective);
    Ok(LsmReport {
        spin,
        magnetization: m,
        filling,
        integer_distance,
        fractional,
        symmetric,
        symmetry_residual,
        injective,
        injective_region,
        obstructed,
        consistent,
        lattice: (spec.rows(), spec.cols()),
    })
}

/// Invariance of the state under an action along each fundamental cycle,
/// contrasted with the same action on a single site.
#[derive(Debug, Clone)]
pub struct WilsonReport {
    pub lattice: (usize, usize),
    /// Action on every site of column zero.
    pub vertical_residual: f64,
    pub vertical_scalar: C64,
    /// Action on every site of row zero.
    pub horizontal_residual: f64,
    pub horizontal_scalar: C64,
    /// Action on site (0, 0) alone.
    pub single_site_residual: f64,
    pub loops_invariant: bool,
    pub single_site_invariant: bool,
}

fn loop_residual(
    psi: &StateVector,
    u: &ComplexMatrix,
    sites: &[usize],
) -> Result<(C64, f64)> {
    let mut acted = psi.clone();
    for &j in sites {
        acted = apply_on_sites(&acted, u, &[j])?;
    }
    match equal_up_to_scalar(psi, &acted) {
        Ok(pair) => Ok(pair),
        Err(Error::ZeroState) => Ok((C64::new(0.0, 0.0), 1.0)),
        Err(e) => Err(e),
    }
}

/// Check whether `u` applied along each closed cycle leaves the torus state
/// invariant while the same `u` on one site does not.
pub fn wilson_check(
    spec: &PepsSpec,
    u: &ComplexMatrix,
    tol: &Tolerance,
    cap: u64,
) -> Result<WilsonReport> {
    let d = spec.phys_dim();
    if u.dim() != (d, d) {
        return Err(Error::ShapeMismatch(format!(
            "loop action is {:?} but the physical dimension is {d}",
            u.dim()
        )));
    }
    let rows = spec.rows();
    let cols = spec.cols();
    let psi = peps_state(spec, cap)?;
    let vertical: Vec<usize> = (0..rows).map(|r| r * cols).collect();
    let horizontal: Vec<usize> = (0..cols).collect();
    let (v_scalar, v_res) = loop_residual(&psi, u, &vertical)?;
    let (h_scalar, h_res) = loop_residual(&psi, u, &horizontal)?;
    let (_, s_res) = loop_residual(&psi, u, &[0])?;
    Ok(WilsonReport {
        lattice: (rows, cols),
        vertical_residual: v_res,
        vertical_scalar: v_scalar,
        horizontal_residual: h_res,
        horizontal_scalar: h_scalar,
        single_site_residual: s_res,
        loops_invariant: v_res <= tol.residual_cut && h_res <= tol.residual_cut,
        single_site_invariant: s_res <= tol.residual_cut,
    })
}

/// A local parent term: the projector onto the complement of a window's
/// boundary image, together with the evidence that the source state is in
/// its kernel everywhere.
#[derive(Debug, Clone)]
pub struct ParentHamiltonian {
    /// Projector acting on the window's physical block, row-major over the
    /// window sites.
    pub term: ComplexMatrix,
    /// Window extent (rows, cols); chains use (1, length).
    pub window: (usize, usize),
    /// Rank of the window's boundary-to-state map; the term annihilates
    /// exactly this image.
    pub image_rank: usize,
    /// Largest energy density over all placements on the source lattice.
    pub frustration_residual: f64,
    pub placements: usize,
}

fn projector_from_gamma(gamma: &ComplexMatrix, tol: &Tolerance) -> Result<(ComplexMatrix, usize)> {
    let (u, s, _) = gamma.svd(true, false)?;
    let u = u.expect("requested U");
    let rank = rank_from_singular_values(&s, tol);
    let ur = u.slice(s![.., ..rank]);
    let proj = eye(gamma.nrows()) - &ur.dot(&ur.t().mapv(|z| z.conj()));
    Ok((proj, rank))
}

fn window_energy(
    psi: &StateVector,
    term: &ComplexMatrix,
    placements: &[Vec<usize>],
) -> Result<f64> {
    let norm_sq = psi.norm().powi(2);
    if norm_sq == 0.0 {
        return Err(Error::ZeroState);
    }
    let mut worst = 0.0f64;
    for sites in placements {
        let hpsi = apply_on_sites(psi, term, sites)?;
        let e = psi.inner(&hpsi)?.re / norm_sq;
        worst = worst.max(e.abs());
    }
    Ok(worst)
}

fn peps_placements(spec: &PepsSpec, h: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    let rows = spec.rows();
    let cols = spec.cols();
    if h > rows || k > cols {
        return Err(Error::ShapeMismatch(format!(
            "window {h}x{k} does not fit the {rows}x{cols} lattice"
        )));
    }
    let mut placements = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut sites = Vec::with_capacity(h * k);
            for a in 0..h {
                for b in 0..k {
                    sites.push(((r + a) % rows) * cols + (c + b) % cols);
                }
            }
            placements.push(sites);
        }
    }
    Ok(placements)
}

fn chain_placements(n: usize, w: usize, boundary: Boundary) -> Result<Vec<Vec<usize>>> {
    if w > n {
        return Err(Error::ShapeMismatch(format!(
            "window {w} does not fit the {n}-site chain"
        )));
    }
    let anchors: Vec<usize> = match boundary {
        Boundary::Periodic => (0..n).collect(),
        Boundary::Open => (0..=n - w).collect(),
    };
    Ok(anchors
        .into_iter()
        .map(|a| (0..w).map(|t| (a + t) % n).collect())
        .collect())
}

/// Build the parent term of an `h x k` window and verify frustration
/// freedom on the source torus.
pub fn parent_hamiltonian_peps(
    spec: &PepsSpec,
    h: usize,
    k: usize,
    tol: &Tolerance,
    cap: u64,
) -> Result<ParentHamiltonian> {
    let gamma = gamma_matrix_peps(spec, h, k, cap)?;
    let (term, image_rank) = projector_from_gamma(&gamma, tol)?;
    let placements = peps_placements(spec, h, k)?;
    let psi = peps_state(spec, cap)?;
    let frustration_residual = window_energy(&psi, &term, &placements)?;
    Ok(ParentHamiltonian {
        term,
        window: (h, k),
        image_rank,
        frustration_residual,
        placements: placements.len(),
    })
}

/// Build the parent term of a `length`-site window of a uniform ring and
/// verify frustration freedom on the ring itself.
pub fn parent_hamiltonian_mps(
    spec: &MpsSpec,
    length: usize,
    tol: &Tolerance,
    cap: u64,
) -> Result<ParentHamiltonian> {
    let gamma = gamma_matrix_mps(spec, length, cap)?;
    let (term, image_rank) = projector_from_gamma(&gamma, tol)?;
    let placements = chain_placements(spec.len(), length, spec.boundary())?;
    let psi = mps_state(spec, cap)?;
    let frustration_residual = window_energy(&psi, &term, &placements)?;
    Ok(ParentHamiltonian {
        term,
        window: (1, length),
        image_rank,
        frustration_residual,
        placements: placements.len(),
    })
}

fn kernel_intersection(
    dims: &[usize],
    term: &ComplexMatrix,
    placements: &[Vec<usize>],
    tol: &Tolerance,
) -> Result<usize> {
    let total: usize = dims.iter().product();
    let term_scale = {
        let s = singular_values(term)?;
        if s.is_empty() {
            0.0
        } else {
            s[0]
        }
    };
    // orthonormal basis of the running intersection; term * unit vector is
    // bounded by the term's spectral norm, which anchors the kernel cut
    let mut basis = eye(total);
    for sites in placements {
        let k = basis.ncols();
        if k == 0 {
            return Ok(0);
        }
        let mut m = ComplexMatrix::zeros((total, k));
        for j in 0..k {
            let col = StateVector::new(basis.column(j).to_owned(), dims.to_vec())?;
            let out = apply_on_sites(&col, term, sites)?;
            m.column_mut(j).assign(out.amps());
        }
        let kernel = nullspace_with_scale(&m, term_scale.max(1e-300), tol)?;
        let mut km = ComplexMatrix::zeros((k, kernel.len()));
        for (c, v) in kernel.iter().enumerate() {
            km.column_mut(c).assign(v);
        }
        basis = basis.dot(&km);
    }
    Ok(basis.ncols())
}

/// Exact dimension of the joint kernel of the parent term over all torus
/// placements.
pub fn ground_space_dimension_peps(
    spec: &PepsSpec,
    ham: &ParentHamiltonian,
    tol: &Tolerance,
    cap: u64,
) -> Result<usize> {
    let (h, k) = ham.window;
    let placements = peps_placements(spec, h, k)?;
    let sites = spec.rows() * spec.cols();
    let dims = vec![spec.phys_dim(); sites];
    crate::lattice::checked_total(&dims, cap)?;
    kernel_intersection(&dims, &ham.term, &placements, tol)
}

/// Exact dimension of the joint kernel of the parent term over all chain
/// placements.
pub fn ground_space_dimension_chain(
    spec: &MpsSpec,
    ham: &ParentHamiltonian,
    tol: &Tolerance,
    cap: u64,
) -> Result<usize> {
    let w = ham.window.0 * ham.window.1;
    let placements = chain_placements(spec.len(), w, spec.boundary())?;
    let dims = spec.phys_dims();
    crate::lattice::checked_total(&dims, cap)?;
    kernel_intersection(&dims, &ham.term, &placements, tol)
}

/// Entanglement rank of a rectangular region against the dimension cut by
/// its boundary.
#[derive(Debug, Clone)]
pub struct AreaLawReport {
    pub region: (usize, usize),
    pub lattice: (usize, usize),
    /// Schmidt rank across the region cut.
    pub rank: usize,
    /// log2(rank).
    pub entropy_bits: f64,
    /// log2 of the crossing-leg dimension.
    pub bound_bits: f64,
    /// Product of the bond dimensions crossing the region boundary.
    pub crossing_dim: usize,
    pub saturated: bool,
    /// `bound_bits - entropy_bits`, the topological deficit when positive.
    pub correction_bits: f64,
    /// Injectivity of the region's boundary map (the generic mechanism
    /// behind saturation), when affordable.
    pub region_injective: Option<bool>,
}

/// Compare the Schmidt rank of an `h x k` region of the torus state with
/// the total dimension of the bonds its boundary cuts.
pub fn area_law_check(
    spec: &PepsSpec,
    h: usize,
    k: usize,
    tol: &Tolerance,
    cap: u64,
) -> Result<AreaLawReport> {
    let rows = spec.rows();
    let cols = spec.cols();
    if h == 0 || k == 0 || h > rows || k > cols {
        return Err(Error::ShapeMismatch(format!(
            "region {h}x{k} does not fit the {rows}x{cols} lattice"
        )));
    }
    let psi = peps_state(spec, cap)?;
    let region: Vec<usize> = (0..h)
        .flat_map(|a| (0..k).map(move |b| a * cols + b))
        .collect();
    let others: Vec<usize> = (0..rows * cols).filter(|s| !region.contains(s)).collect();
    let perm: Vec<usize> = region.iter().copied().chain(others).collect();
    let moved = psi.reorder_sites(&perm)?;
    let d = spec.phys_dim();
    let dwin = d.pow((h * k) as u32);
    let rest = moved.amps().len() / dwin;
    let m = moved
        .amps()
        .clone()
        .into_shape_with_order((dwin, rest))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let s = singular_values(&m)?;
    let rank = rank_from_singular_values(&s, tol);
    if rank == 0 {
        return Err(Error::ZeroState);
    }
    // a column of h rows cuts its left and right legs unless it wraps the
    // torus; same for rows and their vertical legs
    let horizontal_legs = if k < cols { 2 * h } else { 0 };
    let vertical_legs = if h < rows { 2 * k } else { 0 };
    let crossing_dim = spec.horizontal_bond().pow(horizontal_legs as u32)
        * spec.vertical_bond().pow(vertical_legs as u32);
    let entropy_bits = (rank as f64).log2();
    let bound_bits = (crossing_dim as f64).log2();
    let region_injective = match is_injective_peps(spec, h, k, tol, cap) {
        Ok(report) => Some(report.injective),
        Err(Error::DeskScaleExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(AreaLawReport {
        region: (h, k),
        lattice: (rows, cols),
        rank,
        entropy_bits,
        bound_bits,
        crossing_dim,
        saturated: rank == crossing_dim,
        correction_bits: bound_bits - entropy_bits,
        region_injective,
    })
}
