//! Injectivity of tensor-network regions.
//!
//! A region is injective when the map from boundary conditions to states,
//! realized here as an explicit matrix with physical configurations as rows
//! and boundary indices as columns, has full column rank. Injectivity is the
//! precondition for gauge uniqueness and for the parent-Hamiltonian
//! machinery, and its failure is itself a signal (topological states fail it
//! on every region).

use ndarray::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{block_region, chain_matrices, checked_total, MpsSpec, PepsSpec};
use crate::tensor::{
    matricize, rank_from_singular_values, singular_values, singular_values_around_cut,
    ComplexMatrix, Tolerance,
};

/// The patch of lattice a report talks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `length` consecutive sites of a chain.
    Chain { length: usize },
    /// A `rows x cols` rectangle of a square lattice.
    Rect { rows: usize, cols: usize },
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Region::Chain { length } => write!(f, "chain of {length}"),
            Region::Rect { rows, cols } => write!(f, "{rows}x{cols} patch"),
        }
    }
}

/// Outcome of one injectivity test, with the evidence that went into the
/// rank decision.
#[derive(Debug, Clone)]
pub struct InjectivityReport {
    pub region: Region,
    pub gamma_rank: usize,
    /// Boundary dimension the rank must reach for injectivity.
    pub full_rank_target: usize,
    pub injective: bool,
    pub tolerance: Tolerance,
    /// Singular values straddling the rank cut (last kept, first dropped),
    /// for auditing borderline verdicts.
    pub sv_around_cut: (Option<f64>, Option<f64>),
}

fn report_from_gamma(
    gamma: &ComplexMatrix,
    region: Region,
    target: usize,
    tol: &Tolerance,
) -> Result<InjectivityReport> {
    let s = singular_values(gamma)?;
    let rank = rank_from_singular_values(&s, tol);
    Ok(InjectivityReport {
        region,
        gamma_rank: rank,
        full_rank_target: target,
        injective: rank == target,
        tolerance: *tol,
        sv_around_cut: singular_values_around_cut(&s, rank),
    })
}

/// The boundary-to-state map of `length` consecutive chain sites, as a
/// `d^length x D^2` matrix: row (i_1..i_L), column vec(X) with X row-major,
/// entry = the (beta, alpha) entry of the site-tensor product, so that
/// multiplying by vec(X) reproduces the trace of X against the product.
pub fn gamma_matrix_mps(spec: &MpsSpec, length: usize, cap: u64) -> Result<ComplexMatrix> {
    let a = spec.uniform_tensor().ok_or_else(|| {
        Error::Unsupported("injectivity analysis needs a uniform ring tensor".into())
    })?;
    if length == 0 {
        return Err(Error::ShapeMismatch("region needs at least one site".into()));
    }
    let (d, dd, _) = a.dim();
    checked_total(&vec![d; length], cap)?;
    let site: Vec<ComplexMatrix> = (0..d).map(|i| a.index_axis(Axis(0), i).to_owned()).collect();
    let per_site = vec![site; length];
    let products = chain_matrices(&per_site);
    let mut gamma = ComplexMatrix::zeros((products.len(), dd * dd));
    for (row, p) in products.iter().enumerate() {
        for alpha in 0..dd {
            for beta in 0..dd {
                gamma[[row, alpha * dd + beta]] = p[[beta, alpha]];
            }
        }
    }
    Ok(gamma)
}

/// The boundary-to-state map of an `h x k` rectangle: physical block as
/// rows, the four boundary leg groups (left, down, right, up) flattened as
/// columns.
pub fn gamma_matrix_peps(spec: &PepsSpec, h: usize, k: usize, cap: u64) -> Result<ComplexMatrix> {
    let region = block_region(spec, h, k, cap)?;
    matricize(&region, &[0], &[1, 2, 3, 4])
}

/// Test a chain region of a uniform ring MPS.
pub fn is_injective_mps(
    spec: &MpsSpec,
    length: usize,
    tol: &Tolerance,
    cap: u64,
) -> Result<InjectivityReport> {
    let gamma = gamma_matrix_mps(spec, length, cap)?;
    let dd = gamma.ncols();
    report_from_gamma(&gamma, Region::Chain { length }, dd, tol)
}

/// Test a rectangular region of a PEPS.
pub fn is_injective_peps(
    spec: &PepsSpec,
    h: usize,
    k: usize,
    tol: &Tolerance,
    cap: u64,
) -> Result<InjectivityReport> {
    let gamma = gamma_matrix_peps(spec, h, k, cap)?;
    let target = gamma.ncols();
    report_from_gamma(&gamma, Region::Rect { rows: h, cols: k }, target, tol)
}

/// Result of scanning chain lengths for the first injective one.
#[derive(Debug, Clone)]
pub enum MinimalInjectiveLength {
    Found {
        length: usize,
        report: InjectivityReport,
    },
    /// No length up to `cap` reached full rank; `best_rank` is the largest
    /// rank seen.
    NotFoundBelowCap {
        cap: usize,
        best_rank: usize,
        target: usize,
    },
}

impl MinimalInjectiveLength {
    pub fn found(&self) -> Option<usize> {
        match self {
            MinimalInjectiveLength::Found { length, .. } => Some(*length),
            MinimalInjectiveLength::NotFoundBelowCap { .. } => None,
        }
    }
}

/// Scan lengths `1..=cap_length` for the smallest injective chain region.
pub fn minimal_injective_length(
    spec: &MpsSpec,
    cap_length: usize,
    tol: &Tolerance,
    amp_cap: u64,
) -> Result<MinimalInjectiveLength> {
    if cap_length == 0 {
        return Err(Error::ShapeMismatch("length cap must be positive".into()));
    }
    let mut best_rank = 0usize;
    let mut target = 0usize;
    for length in 1..=cap_length {
        let report = is_injective_mps(spec, length, tol, amp_cap)?;
        target = report.full_rank_target;
        best_rank = best_rank.max(report.gamma_rank);
        if report.injective {
            return Ok(MinimalInjectiveLength::Found { length, report });
        }
    }
    Ok(MinimalInjectiveLength::NotFoundBelowCap {
        cap: cap_length,
        best_rank,
        target,
    })
}

/// A length cap past which further growth is pointless for generic tensors:
/// enough sites for `d^L` to reach `D^2`, plus slack for the non-generic
/// ones that need a few more.
pub fn default_length_cap(d: usize, bond: usize) -> usize {
    let target = (bond * bond) as f64;
    let needed = if d > 1 {
        target.log(d as f64).ceil() as usize
    } else {
        1
    };
    needed.max(1) + 3
}

/// Verify the growth property on one spec: an injective `h x k` region must
/// stay injective when either side grows by one. Returns true when the
/// implication holds (vacuously if the small region is not injective).
pub fn check_region_growth(
    spec: &PepsSpec,
    h: usize,
    k: usize,
    tol: &Tolerance,
    cap: u64,
) -> Result<bool> {
    let small = is_injective_peps(spec, h, k, tol, cap)?;
    if !small.injective {
        return Ok(true);
    }
    let taller = is_injective_peps(spec, h + 1, k, tol, cap)?;
    let wider = is_injective_peps(spec, h, k + 1, tol, cap)?;
    Ok(taller.injective && wider.injective)
}
