//! Network specifications and exact dense state construction.
//!
//! Matrix product states live on a ring or an open chain with site tensors
//! indexed `[phys, left, right]`. Projected entangled pair states live on an
//! `rows x cols` torus with one uniform site tensor indexed
//! `[phys, left, down, right, up]`; bonds contract by direct index
//! identification (a site's right leg carries the same index as its right
//! neighbour's left leg, its down leg the same index as the site below's up
//! leg).
//!
//! Everything here is exact: states come out as full amplitude vectors, and
//! every builder refuses up front when the amplitude count would leave desk
//! scale.

use ndarray::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{
    matricize, numeric_rank, scalar_match, tensordot, trace_axes, ComplexMatrix, DenseTensor,
    Tolerance, C64,
};

/// Largest amplitude count any dense state builder will touch.
pub const DEFAULT_AMP_CAP: u64 = 1 << 22;

fn require_finite(entries: impl Iterator<Item = C64>) -> Result<()> {
    for (index, z) in entries.enumerate() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NonFinite { index });
        }
    }
    Ok(())
}

pub(crate) fn checked_total(dims: &[usize], cap: u64) -> Result<u64> {
    let mut total: u128 = 1;
    for &d in dims {
        total = total.saturating_mul(d as u128);
        if total > cap as u128 {
            return Err(Error::DeskScaleExceeded { needed: total, cap });
        }
    }
    Ok(total as u64)
}

/// Boundary condition of a matrix product state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Open,
}

/// A matrix product state: per-site tensors `[phys, left, right]` chained
/// left to right, either on a ring or on an open chain with unit boundary
/// bonds.
#[derive(Debug, Clone)]
pub struct MpsSpec {
    sites: Vec<Array3<C64>>,
    boundary: Boundary,
    uniform: bool,
}

impl MpsSpec {
    /// Ring of `n` copies of one tensor.
    pub fn periodic_uniform(tensor: Array3<C64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::ShapeMismatch("a chain needs at least one site".into()));
        }
        let (d, dl, dr) = tensor.dim();
        if d == 0 || dl == 0 || dr == 0 {
            return Err(Error::ShapeMismatch("tensor axes must be positive".into()));
        }
        if dl != dr {
            return Err(Error::IncompatibleBonds(format!(
                "a uniform ring tensor needs equal bond dimensions, got {dl} and {dr}"
            )));
        }
        require_finite(tensor.iter().copied())?;
        Ok(Self {
            sites: vec![tensor; n],
            boundary: Boundary::Periodic,
            uniform: true,
        })
    }

    /// Open chain with explicit per-site tensors. The first left bond and the
    /// last right bond must be one-dimensional, and neighbouring bonds must
    /// agree.
    pub fn open(sites: Vec<Array3<C64>>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::ShapeMismatch("a chain needs at least one site".into()));
        }
        for (k, t) in sites.iter().enumerate() {
            let (d, dl, dr) = t.dim();
            if d == 0 || dl == 0 || dr == 0 {
                return Err(Error::ShapeMismatch(format!(
                    "site {k} has a zero-length axis"
                )));
            }
            require_finite(t.iter().copied())?;
        }
        if sites[0].dim().1 != 1 || sites[sites.len() - 1].dim().2 != 1 {
            return Err(Error::IncompatibleBonds(
                "an open chain needs unit bonds at both ends".into(),
            ));
        }
        for k in 0..sites.len() - 1 {
            let dr = sites[k].dim().2;
            let dl = sites[k + 1].dim().1;
            if dr != dl {
                return Err(Error::IncompatibleBonds(format!(
                    "bond between sites {k} and {} has dimensions {dr} and {dl}",
                    k + 1
                )));
            }
        }
        Ok(Self {
            sites,
            boundary: Boundary::Open,
            uniform: false,
        })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn site(&self, k: usize) -> &Array3<C64> {
        &self.sites[k]
    }

    pub fn sites(&self) -> &[Array3<C64>] {
        &self.sites
    }

    /// The single site tensor of a uniform ring, if this is one.
    pub fn uniform_tensor(&self) -> Option<&Array3<C64>> {
        if self.uniform {
            Some(&self.sites[0])
        } else {
            None
        }
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|t| t.dim().0).collect()
    }
}

/// A uniform projected entangled pair state on a `rows x cols` torus.
///
/// The site tensor is indexed `[phys, left, down, right, up]` with
/// horizontal bond dimension `left == right` and vertical `down == up`.
#[derive(Debug, Clone)]
pub struct PepsSpec {
    tensor: Array5<C64>,
    rows: usize,
    cols: usize,
}

impl PepsSpec {
    pub fn new(tensor: Array5<C64>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ShapeMismatch("lattice must have positive extent".into()));
        }
        let (d, dl, dd, dr, du) = tensor.dim();
        if d == 0 || dl == 0 || dd == 0 || dr == 0 || du == 0 {
            return Err(Error::ShapeMismatch("tensor axes must be positive".into()));
        }
        if dl != dr {
            return Err(Error::IncompatibleBonds(format!(
                "horizontal bonds disagree: left {dl}, right {dr}"
            )));
        }
        if dd != du {
            return Err(Error::IncompatibleBonds(format!(
                "vertical bonds disagree: down {dd}, up {du}"
            )));
        }
        require_finite(tensor.iter().copied())?;
        Ok(Self { tensor, rows, cols })
    }

    /// Same tensor on a different torus.
    pub fn with_lattice(&self, rows: usize, cols: usize) -> Result<Self> {
        Self::new(self.tensor.clone(), rows, cols)
    }

    pub fn tensor(&self) -> &Array5<C64> {
        &self.tensor
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn phys_dim(&self) -> usize {
        self.tensor.dim().0
    }

    pub fn horizontal_bond(&self) -> usize {
        self.tensor.dim().1
    }

    pub fn vertical_bond(&self) -> usize {
        self.tensor.dim().2
    }
}

/// A dense state: one complex amplitude per configuration, sites ordered
/// row-major (for a torus: site `(r, c)` at position `r * cols + c`), and the
/// global index running row-major over the per-site dimensions.
#[derive(Debug, Clone)]
pub struct StateVector {
    amps: Array1<C64>,
    dims: Vec<usize>,
}

impl StateVector {
    pub fn new(amps: Array1<C64>, dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.iter().any(|&d| d == 0) || total != amps.len() {
            return Err(Error::ShapeMismatch(format!(
                "dims {:?} do not index {} amplitudes",
                dims,
                amps.len()
            )));
        }
        require_finite(amps.iter().copied())?;
        Ok(Self { amps, dims })
    }

    pub fn amps(&self) -> &Array1<C64> {
        &self.amps
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn site_count(&self) -> usize {
        self.dims.len()
    }

    /// Amplitude of one configuration.
    pub fn amp(&self, cfg: &[usize]) -> C64 {
        assert_eq!(cfg.len(), self.dims.len(), "config length mismatch");
        let mut idx = 0usize;
        for (k, &i) in cfg.iter().enumerate() {
            assert!(i < self.dims[k], "config out of range at site {k}");
            idx = idx * self.dims[k] + i;
        }
        self.amps[idx]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inner product `<self|other>`, conjugating self.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch("states live on different sites".into()));
        }
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Reinterpret the same amplitudes over a finer or coarser site split.
    pub fn with_dims(&self, dims: Vec<usize>) -> Result<StateVector> {
        StateVector::new(self.amps.clone(), dims)
    }

    /// Reorder sites: new site `j` is old site `perm[j]`.
    pub fn reorder_sites(&self, perm: &[usize]) -> Result<StateVector> {
        if perm.len() != self.dims.len() {
            return Err(Error::AxisSpec("permutation length mismatch".into()));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::AxisSpec(format!("bad site permutation {perm:?}")));
            }
            seen[p] = true;
        }
        let t = self
            .amps
            .clone()
            .into_shape_with_order(IxDyn(&self.dims))
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let permuted = t.permuted_axes(IxDyn(perm));
        let flat = permuted.as_standard_layout().into_owned();
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let amps = flat
            .into_shape_with_order(self.amps.len())
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        StateVector::new(amps, dims)
    }

    /// Apply a one-site operator at `site`, leaving the state unnormalized.
    pub fn apply_one_site(&self, op: &ComplexMatrix, site: usize) -> Result<StateVector> {
        if site >= self.dims.len() {
            return Err(Error::AxisSpec(format!("site {site} out of range")));
        }
        let d = self.dims[site];
        if op.dim() != (d, d) {
            return Err(Error::ShapeMismatch(format!(
                "operator is {:?}, site dimension is {d}",
                op.dim()
            )));
        }
        let pre: usize = self.dims[..site].iter().product();
        let post: usize = self.dims[site + 1..].iter().product();
        let mut out = Array1::zeros(self.amps.len());
        for p in 0..pre {
            for q in 0..post {
                for j in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..d {
                        acc += op[[j, i]] * self.amps[(p * d + i) * post + q];
                    }
                    out[(p * d + j) * post + q] = acc;
                }
            }
        }
        StateVector::new(out, self.dims.clone())
    }

    /// Unnormalized one-site expectation value `<psi|O_site|psi>`.
    pub fn expectation(&self, op: &ComplexMatrix, site: usize) -> Result<C64> {
        let applied = self.apply_one_site(op, site)?;
        self.inner(&applied)
    }
}

/// Decide whether two states are the same ray: returns the scalar `mu` with
/// `b ~ mu a` and the relative residual of that fit. Errors with
/// [`Error::ZeroState`] when either side vanishes.
pub fn equal_up_to_scalar(a: &StateVector, b: &StateVector) -> Result<(C64, f64)> {
    if a.dims != b.dims {
        return Err(Error::ShapeMismatch("states live on different sites".into()));
    }
    if b.norm() == 0.0 {
        return Err(Error::ZeroState);
    }
    let ad = a.amps.clone().into_dyn();
    let bd = b.amps.clone().into_dyn();
    scalar_match(&ad, &bd)
}

fn trace(m: &ComplexMatrix) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[[i, i]]).sum()
}

fn trace_of_product(l: &ComplexMatrix, r: &ComplexMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..l.nrows() {
        for b in 0..l.ncols() {
            acc += l[[a, b]] * r[[b, a]];
        }
    }
    acc
}

/// All products of one matrix per site, configs row-major. Splits in the
/// middle so the intermediate lists stay small.
pub(crate) fn chain_matrices(per_site: &[Vec<ComplexMatrix>]) -> Vec<ComplexMatrix> {
    if per_site.len() == 1 {
        return per_site[0].clone();
    }
    let mid = per_site.len() / 2;
    let left = chain_matrices(&per_site[..mid]);
    let right = chain_matrices(&per_site[mid..]);
    let mut out = Vec::with_capacity(left.len() * right.len());
    for l in &left {
        for r in &right {
            out.push(l.dot(r));
        }
    }
    out
}

/// Traces of all site-ordered products, without materializing the top-level
/// matrix list.
fn chain_amps_periodic(per_site: &[Vec<ComplexMatrix>]) -> Array1<C64> {
    if per_site.len() == 1 {
        return per_site[0].iter().map(trace).collect();
    }
    let mid = per_site.len() / 2;
    let left = chain_matrices(&per_site[..mid]);
    let right = chain_matrices(&per_site[mid..]);
    let mut amps = Vec::with_capacity(left.len() * right.len());
    for l in &left {
        for r in &right {
            amps.push(trace_of_product(l, r));
        }
    }
    Array1::from(amps)
}

fn chain_amps_open(per_site: &[Vec<ComplexMatrix>]) -> Array1<C64> {
    if per_site.len() == 1 {
        return per_site[0].iter().map(|m| m[[0, 0]]).collect();
    }
    let mid = per_site.len() / 2;
    let left = chain_matrices(&per_site[..mid]);
    let right = chain_matrices(&per_site[mid..]);
    let mut amps = Vec::with_capacity(left.len() * right.len());
    for l in &left {
        for r in &right {
            // boundary bonds are one-dimensional, so the product is 1x1
            let mut acc = C64::new(0.0, 0.0);
            for b in 0..l.ncols() {
                acc += l[[0, b]] * r[[b, 0]];
            }
            amps.push(acc);
        }
    }
    Array1::from(amps)
}

/// Dense amplitude vector of a matrix product state.
pub fn mps_state(spec: &MpsSpec, cap: u64) -> Result<StateVector> {
    let dims = spec.phys_dims();
    checked_total(&dims, cap)?;
    let per_site: Vec<Vec<ComplexMatrix>> = spec
        .sites()
        .iter()
        .map(|t| {
            (0..t.dim().0)
                .map(|i| t.index_axis(Axis(0), i).to_owned())
                .collect()
        })
        .collect();
    let amps = match spec.boundary() {
        Boundary::Periodic => chain_amps_periodic(&per_site),
        Boundary::Open => chain_amps_open(&per_site),
    };
    StateVector::new(amps, dims)
}

/// Transfer-style matrix of one lattice row at a fixed physical
/// configuration: rows indexed by the up legs, columns by the down legs,
/// both row-major over columns left to right.
fn row_matrix(spec: &PepsSpec, cfg: &[usize]) -> Result<ComplexMatrix> {
    let n = spec.cols();
    let dv = spec.vertical_bond();
    // per site, fixed phys index: axes (l, d, r, u) -> (l, d, u, r)
    let mut cur = spec
        .tensor()
        .index_axis(Axis(0), cfg[0])
        .to_owned()
        .into_dyn()
        .permuted_axes(IxDyn(&[0, 1, 3, 2]))
        .as_standard_layout()
        .into_owned();
    for &i in &cfg[1..] {
        let next = spec
            .tensor()
            .index_axis(Axis(0), i)
            .to_owned()
            .into_dyn()
            .permuted_axes(IxDyn(&[0, 1, 3, 2]))
            .as_standard_layout()
            .into_owned();
        let last = cur.ndim() - 1;
        cur = tensordot(&cur, &next, &[last], &[0])?;
    }
    // axes now (l_1, d_1, u_1, ..., d_n, u_n, r_n); close the ring
    let last = cur.ndim() - 1;
    let traced = trace_axes(&cur, 0, last)?;
    let u_axes: Vec<usize> = (0..n).map(|k| 2 * k + 1).collect();
    let d_axes: Vec<usize> = (0..n).map(|k| 2 * k).collect();
    let m = matricize(&traced, &u_axes, &d_axes)?;
    debug_assert_eq!(m.dim(), (dv.pow(n as u32), dv.pow(n as u32)));
    Ok(m)
}

/// Dense amplitude vector of a PEPS on its torus. Site order is row-major;
/// the global index runs row-major over per-site physical indices.
pub fn peps_state(spec: &PepsSpec, cap: u64) -> Result<StateVector> {
    let d = spec.phys_dim();
    let sites = spec.rows() * spec.cols();
    let dims = vec![d; sites];
    checked_total(&dims, cap)?;
    let n = spec.cols();
    let row_configs = d.pow(n as u32);
    let mut row_mats = Vec::with_capacity(row_configs);
    let mut cfg = vec![0usize; n];
    for flat in 0..row_configs {
        let mut rem = flat;
        for k in (0..n).rev() {
            cfg[k] = rem % d;
            rem /= d;
        }
        row_mats.push(row_matrix(spec, &cfg)?);
    }
    let per_row: Vec<Vec<ComplexMatrix>> = vec![row_mats; spec.rows()];
    let amps = chain_amps_periodic(&per_row);
    StateVector::new(amps, dims)
}

/// Contract each column of the torus into one site of a uniform ring MPS.
///
/// The blocked physical index groups the column's sites top to bottom; the
/// blocked bonds group the horizontal legs the same way. The resulting chain
/// runs over columns, so its state is the PEPS state with sites in
/// column-major order (see [`column_major_site_order`]).
pub fn block_columns(spec: &PepsSpec) -> Result<MpsSpec> {
    let rows = spec.rows();
    let d = spec.phys_dim();
    let dh = spec.horizontal_bond();
    // (i, l, d, r, u) -> (u, i, l, r, d)
    let perm = [4usize, 0, 1, 3, 2];
    let site = spec
        .tensor()
        .clone()
        .into_dyn()
        .permuted_axes(IxDyn(&perm))
        .as_standard_layout()
        .into_owned();
    let mut cur = site.clone();
    for _ in 1..rows {
        let last = cur.ndim() - 1;
        cur = tensordot(&cur, &site, &[last], &[0])?;
    }
    // axes (u_1, i_1, l_1, r_1, ..., i_rows, l_rows, r_rows, d_rows)
    let last = cur.ndim() - 1;
    let traced = trace_axes(&cur, 0, last)?;
    let i_axes: Vec<usize> = (0..rows).map(|k| 3 * k).collect();
    let l_axes: Vec<usize> = (0..rows).map(|k| 3 * k + 1).collect();
    let r_axes: Vec<usize> = (0..rows).map(|k| 3 * k + 2).collect();
    let row_axes: Vec<usize> = i_axes.iter().chain(&l_axes).copied().collect();
    let m = matricize(&traced, &row_axes, &r_axes)?;
    let dp = d.pow(rows as u32);
    let db = dh.pow(rows as u32);
    let blocked = m
        .into_shape_with_order((dp, db, db))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    MpsSpec::periodic_uniform(blocked, spec.cols())
}

/// Site order produced by reading a `rows x cols` grid column by column;
/// feeding this to [`StateVector::reorder_sites`] converts a column-major
/// state back to row-major.
pub fn column_major_site_order(rows: usize, cols: usize) -> Vec<usize> {
    let mut perm = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            perm.push(c * rows + r);
        }
    }
    perm
}

/// Swap the lattice axes of a PEPS: rows become columns and the leg roles
/// exchange (left with up, right with down). The transposed network
/// contracted on the transposed torus gives the same state with the grid
/// transposed.
pub fn transpose_lattice(spec: &PepsSpec) -> Result<PepsSpec> {
    let t = spec
        .tensor()
        .clone()
        .into_dyn()
        .permuted_axes(IxDyn(&[0, 4, 3, 2, 1]))
        .as_standard_layout()
        .into_owned()
        .into_dimensionality::<Ix5>()
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    PepsSpec::new(t, spec.cols(), spec.rows())
}

/// Contract an `h x k` rectangular patch with open boundary legs.
///
/// Axes of the result: physical (row-major over the patch), then the left,
/// down, right, up boundary groups. Left and right group the `h` horizontal
/// legs top to bottom; down and up group the `k` vertical legs left to
/// right.
pub fn block_region(spec: &PepsSpec, h: usize, k: usize, cap: u64) -> Result<DenseTensor> {
    if h == 0 || k == 0 {
        return Err(Error::ShapeMismatch("region must have positive extent".into()));
    }
    let d = spec.phys_dim();
    let dh = spec.horizontal_bond();
    let dv = spec.vertical_bond();
    let dims = [
        vec![d; h * k],
        vec![dh; 2 * h],
        vec![dv; 2 * k],
    ]
    .concat();
    checked_total(&dims, cap)?;

    // one row of k sites: (i, l, d, r, u) -> (l, i, u, d, r), then chain
    let site = spec
        .tensor()
        .clone()
        .into_dyn()
        .permuted_axes(IxDyn(&[1, 0, 4, 2, 3]))
        .as_standard_layout()
        .into_owned();
    let mut row = site.clone();
    for _ in 1..k {
        let last = row.ndim() - 1;
        row = tensordot(&row, &site, &[last], &[0])?;
    }
    // axes (l, i_1, u_1, d_1, ..., i_k, u_k, d_k, r) -> (I, l, r, U, D)
    let i_axes: Vec<usize> = (0..k).map(|j| 3 * j + 1).collect();
    let u_axes: Vec<usize> = (0..k).map(|j| 3 * j + 2).collect();
    let d_axes: Vec<usize> = (0..k).map(|j| 3 * j + 3).collect();
    let mut perm = i_axes.clone();
    perm.push(0);
    perm.push(3 * k + 1);
    perm.extend(&u_axes);
    perm.extend(&d_axes);
    let row5 = row
        .permuted_axes(IxDyn(&perm))
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order(IxDyn(&[
            d.pow(k as u32),
            dh,
            dh,
            dv.pow(k as u32),
            dv.pow(k as u32),
        ]))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;

    // stack h rows: contract each row's down group (always the trailing
    // axis) into the next row's up group
    let mut cur = row5.clone();
    for _ in 1..h {
        let last = cur.ndim() - 1;
        cur = tensordot(&cur, &row5, &[last], &[3])?;
    }
    // axes (I_1, l_1, r_1, U_1, I_2, l_2, r_2, ..., I_h, l_h, r_h, D_h)
    let i_axes: Vec<usize> = (0..h).map(|j| if j == 0 { 0 } else { 3 * j + 1 }).collect();
    let l_axes: Vec<usize> = (0..h).map(|j| if j == 0 { 1 } else { 3 * j + 2 }).collect();
    let r_axes: Vec<usize> = (0..h).map(|j| if j == 0 { 2 } else { 3 * j + 3 }).collect();
    let mut perm = i_axes;
    perm.extend(&l_axes);
    perm.push(3 * h + 1);
    perm.extend(&r_axes);
    perm.push(3);
    let out = cur
        .permuted_axes(IxDyn(&perm))
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order(IxDyn(&[
            d.pow((h * k) as u32),
            dh.pow(h as u32),
            dv.pow(k as u32),
            dh.pow(h as u32),
            dv.pow(k as u32),
        ]))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    DenseTensor::from_array(out)
}

/// View a ring MPS tensor as a PEPS tensor with trivial vertical bonds on a
/// `1 x n` torus. The horizontal contraction then reproduces the chain.
pub fn embed_mps_as_peps(spec: &MpsSpec) -> Result<PepsSpec> {
    let a = spec.uniform_tensor().ok_or_else(|| {
        Error::Unsupported("only uniform ring chains embed into a torus".into())
    })?;
    let (d, dl, dr) = a.dim();
    let mut t = Array5::zeros((d, dl, 1, dr, 1));
    for i in 0..d {
        for l in 0..dl {
            for r in 0..dr {
                t[[i, l, 0, r, 0]] = a[[i, l, r]];
            }
        }
    }
    PepsSpec::new(t, 1, spec.len())
}

/// The gauge action on a PEPS tensor: dress the left leg with `y`, the right
/// with `y^{-1}`, the up leg with `z`, the down with `z^{-1}`, so that the
/// contracted torus state is unchanged for any invertible pair.
pub fn peps_conjugate(a: &Array5<C64>, y: &ComplexMatrix, z: &ComplexMatrix) -> Result<Array5<C64>> {
    let (_, dl, dd, dr, du) = a.dim();
    if y.dim() != (dl, dl) || z.dim() != (du, du) {
        return Err(Error::ShapeMismatch(format!(
            "gauge shapes {:?} / {:?} do not fit bonds {dl} / {du}",
            y.dim(),
            z.dim()
        )));
    }
    debug_assert_eq!(dl, dr);
    debug_assert_eq!(dd, du);
    let y_inv = crate::tensor::inverse(y)?;
    let z_inv = crate::tensor::inverse(z)?;
    let yd = y.clone().into_dyn();
    let yid = y_inv.into_dyn();
    let zd = z.clone().into_dyn();
    let zid = z_inv.into_dyn();
    // left: sum_l Y[a, l] A[i, l, d, r, u]
    let t = tensordot(&yd, &a.clone().into_dyn(), &[1], &[1])?
        .permuted_axes(IxDyn(&[1, 0, 2, 3, 4]))
        .as_standard_layout()
        .into_owned();
    // down: sum_d Zinv[d, b] A[i, l, d, r, u]
    let t = tensordot(&zid, &t, &[0], &[2])?
        .permuted_axes(IxDyn(&[1, 2, 0, 3, 4]))
        .as_standard_layout()
        .into_owned();
    // right: sum_r Yinv[r, c] A[i, l, d, r, u]
    let t = tensordot(&yid.clone(), &t, &[0], &[3])?
        .permuted_axes(IxDyn(&[1, 2, 3, 0, 4]))
        .as_standard_layout()
        .into_owned();
    // up: sum_u Z[e, u] A[i, l, d, r, u]
    let t = tensordot(&zd, &t, &[1], &[4])?
        .permuted_axes(IxDyn(&[1, 2, 3, 4, 0]))
        .as_standard_layout()
        .into_owned();
    t.into_dimensionality::<Ix5>()
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// Reflect the lattice left-right: swaps the two horizontal legs.
pub fn reflect_tensor(a: &Array5<C64>) -> Array5<C64> {
    permute5(a, &[0, 3, 2, 1, 4])
}

/// Rotate the lattice by a half turn: swaps left with right and up with
/// down.
pub fn rotate_half_tensor(a: &Array5<C64>) -> Array5<C64> {
    permute5(a, &[0, 3, 4, 1, 2])
}

/// Rotate the lattice by a quarter turn. Exchanges the roles of the
/// horizontal and vertical bonds, so a square-bond tensor stays well formed.
pub fn rotate_quarter_tensor(a: &Array5<C64>) -> Array5<C64> {
    permute5(a, &[0, 4, 1, 2, 3])
}

fn permute5(a: &Array5<C64>, perm: &[usize; 5]) -> Array5<C64> {
    a.clone()
        .into_dyn()
        .permuted_axes(IxDyn(perm))
        .as_standard_layout()
        .into_owned()
        .into_dimensionality::<Ix5>()
        .expect("rank preserved")
}

/// Reduced density matrix on `keep` (site indices, in the listed order),
/// normalized to unit trace.
pub fn reduced_density(state: &StateVector, keep: &[usize]) -> Result<ComplexMatrix> {
    let n = state.site_count();
    let mut seen = vec![false; n];
    for &s in keep {
        if s >= n {
            return Err(Error::AxisSpec(format!("site {s} out of range")));
        }
        if seen[s] {
            return Err(Error::AxisSpec(format!("site {s} listed twice")));
        }
        seen[s] = true;
    }
    if keep.is_empty() {
        return Err(Error::AxisSpec("keep at least one site".into()));
    }
    let norm2 = state.norm().powi(2);
    if norm2 == 0.0 {
        return Err(Error::ZeroState);
    }
    let rest: Vec<usize> = (0..n).filter(|s| !keep.contains(s)).collect();
    let t = state
        .amps
        .clone()
        .into_shape_with_order(IxDyn(&state.dims))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let m = matricize(&t, keep, &rest)?;
    let mh = m.t().mapv(|z| z.conj());
    let rho = m.dot(&mh).mapv(|z| z / norm2);
    Ok(rho)
}

/// Hartley (order-zero Renyi) entropy in bits: log2 of the numeric rank of a
/// density matrix.
pub fn renyi0(rho: &ComplexMatrix, tol: &Tolerance) -> Result<f64> {
    if rho.nrows() != rho.ncols() {
        return Err(Error::NotADensityMatrix(format!(
            "matrix is {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let herm = rho - &rho.t().mapv(|z| z.conj());
    let scale = crate::tensor::frobenius(rho);
    if scale == 0.0 {
        return Err(Error::NotADensityMatrix("zero matrix".into()));
    }
    if crate::tensor::frobenius(&herm) / scale > 1e-8 {
        return Err(Error::NotADensityMatrix(
            "matrix is not Hermitian".into(),
        ));
    }
    let rank = numeric_rank(rho, tol)?;
    if rank == 0 {
        return Err(Error::NotADensityMatrix("numeric rank zero".into()));
    }
    Ok((rank as f64).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use crate::tensor::inverse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ghz_tensor() -> Array3<C64> {
        let mut a = Array3::zeros((2, 2, 2));
        a[[0, 0, 0]] = c(1.0, 0.0);
        a[[1, 1, 1]] = c(1.0, 0.0);
        a
    }

    fn random_peps(rng: &mut ChaCha8Rng, d: usize, dh: usize, dv: usize) -> Array5<C64> {
        Array5::from_shape_fn((d, dh, dv, dh, dv), |_| sample::complex_uniform(rng))
    }

    /// Brute-force torus amplitude: sum over all bond configurations.
    fn peps_amp_naive(spec: &PepsSpec, cfg: &[usize]) -> C64 {
        let rows = spec.rows();
        let cols = spec.cols();
        let dh = spec.horizontal_bond();
        let dv = spec.vertical_bond();
        let a = spec.tensor();
        let hbonds = rows * cols;
        let vbonds = rows * cols;
        let mut acc = c(0.0, 0.0);
        for hcfg in 0..dh.pow(hbonds as u32) {
            let mut h = vec![0usize; hbonds];
            let mut rem = hcfg;
            for k in (0..hbonds).rev() {
                h[k] = rem % dh;
                rem /= dh;
            }
            for vcfg in 0..dv.pow(vbonds as u32) {
                let mut v = vec![0usize; vbonds];
                let mut rem = vcfg;
                for k in (0..vbonds).rev() {
                    v[k] = rem % dv;
                    rem /= dv;
                }
                let mut term = c(1.0, 0.0);
                for r in 0..rows {
                    for cc in 0..cols {
                        // h[r * cols + c] joins (r, c) to (r, c + 1)
                        let right = h[r * cols + cc];
                        let left = h[r * cols + (cc + cols - 1) % cols];
                        // v[r * cols + c] joins (r, c) down to (r + 1, c)
                        let down = v[r * cols + cc];
                        let up = v[((r + rows - 1) % rows) * cols + cc];
                        term *= a[[cfg[r * cols + cc], left, down, right, up]];
                    }
                }
                acc += term;
            }
        }
        acc
    }

    #[test]
    fn mps_state_of_ghz_ring() {
        let spec = MpsSpec::periodic_uniform(ghz_tensor(), 3).unwrap();
        let psi = mps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        assert_eq!(psi.dims(), &[2, 2, 2]);
        assert_eq!(psi.amp(&[0, 0, 0]), c(1.0, 0.0));
        assert_eq!(psi.amp(&[1, 1, 1]), c(1.0, 0.0));
        assert_eq!(psi.amp(&[0, 1, 0]), c(0.0, 0.0));
    }

    #[test]
    fn mps_state_periodic_matches_naive_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Array3::from_shape_fn((2, 3, 3), |_| sample::complex_uniform(&mut rng));
        let spec = MpsSpec::periodic_uniform(a.clone(), 3).unwrap();
        let psi = mps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        for i1 in 0..2 {
            for i2 in 0..2 {
                for i3 in 0..2 {
                    let mut tr = c(0.0, 0.0);
                    for x in 0..3 {
                        for y in 0..3 {
                            for z in 0..3 {
                                tr += a[[i1, x, y]] * a[[i2, y, z]] * a[[i3, z, x]];
                            }
                        }
                    }
                    assert!((psi.amp(&[i1, i2, i3]) - tr).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn mps_state_open_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t1 = Array3::from_shape_fn((2, 1, 3), |_| sample::complex_uniform(&mut rng));
        let t2 = Array3::from_shape_fn((3, 3, 2), |_| sample::complex_uniform(&mut rng));
        let t3 = Array3::from_shape_fn((2, 2, 1), |_| sample::complex_uniform(&mut rng));
        let spec = MpsSpec::open(vec![t1.clone(), t2.clone(), t3.clone()]).unwrap();
        let psi = mps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        assert_eq!(psi.dims(), &[2, 3, 2]);
        for i1 in 0..2 {
            for i2 in 0..3 {
                for i3 in 0..2 {
                    let mut s = c(0.0, 0.0);
                    for x in 0..3 {
                        for y in 0..2 {
                            s += t1[[i1, 0, x]] * t2[[i2, x, y]] * t3[[i3, y, 0]];
                        }
                    }
                    assert!((psi.amp(&[i1, i2, i3]) - s).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn open_chain_validation_catches_bond_mismatch() {
        let t1 = Array3::<C64>::zeros((2, 1, 3));
        let t2 = Array3::<C64>::zeros((2, 2, 1));
        assert!(matches!(
            MpsSpec::open(vec![t1, t2]),
            Err(Error::IncompatibleBonds(_))
        ));
    }

    #[test]
    fn state_cap_is_enforced() {
        let spec = MpsSpec::periodic_uniform(ghz_tensor(), 30).unwrap();
        assert!(matches!(
            mps_state(&spec, DEFAULT_AMP_CAP),
            Err(Error::DeskScaleExceeded { .. })
        ));
    }

    #[test]
    fn peps_state_matches_bond_enumeration_on_2x2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = PepsSpec::new(random_peps(&mut rng, 2, 2, 2), 2, 2).unwrap();
        let psi = peps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        for flat in 0..16usize {
            let cfg = [(flat >> 3) & 1, (flat >> 2) & 1, (flat >> 1) & 1, flat & 1];
            let expect = peps_amp_naive(&spec, &cfg);
            let got = psi.amp(&cfg);
            assert!(
                (got - expect).norm() < 1e-11 * expect.norm().max(1.0),
                "config {cfg:?}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn peps_state_matches_bond_enumeration_on_1x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = PepsSpec::new(random_peps(&mut rng, 2, 2, 2), 1, 3).unwrap();
        let psi = peps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        for flat in 0..8usize {
            let cfg = [(flat >> 2) & 1, (flat >> 1) & 1, flat & 1];
            let expect = peps_amp_naive(&spec, &cfg);
            let got = psi.amp(&cfg);
            assert!((got - expect).norm() < 1e-11 * expect.norm().max(1.0));
        }
    }

    #[test]
    fn blocked_columns_reproduce_the_torus_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = PepsSpec::new(random_peps(&mut rng, 2, 2, 2), 2, 3).unwrap();
        let direct = peps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        let chain = block_columns(&spec).unwrap();
        let blocked = mps_state(&chain, DEFAULT_AMP_CAP).unwrap();
        // chain sites are columns; refine to single sites (column-major) and
        // reorder to row-major
        let fine = blocked.with_dims(vec![2; 6]).unwrap();
        let row_major = fine
            .reorder_sites(&column_major_site_order(2, 3))
            .unwrap();
        let (mu, residual) = equal_up_to_scalar(&direct, &row_major).unwrap();
        assert!((mu - c(1.0, 0.0)).norm() < 1e-10, "mu = {mu}");
        assert!(residual < 1e-11, "residual = {residual}");
    }

    #[test]
    fn transposed_lattice_gives_the_transposed_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let spec = PepsSpec::new(random_peps(&mut rng, 2, 2, 3), 2, 3).unwrap();
        let direct = peps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        let tspec = transpose_lattice(&spec).unwrap();
        assert_eq!(tspec.rows(), 3);
        assert_eq!(tspec.cols(), 2);
        assert_eq!(tspec.horizontal_bond(), 3);
        let tstate = peps_state(&tspec, DEFAULT_AMP_CAP).unwrap();
        // original site (r, c) sits at transposed position c * 2 + r, which
        // is exactly the column-major order of the original grid
        let perm = column_major_site_order(2, 3);
        let back = tstate.reorder_sites(&perm).unwrap();
        let (mu, residual) = equal_up_to_scalar(&direct, &back).unwrap();
        assert!((mu - c(1.0, 0.0)).norm() < 1e-10);
        assert!(residual < 1e-11);
    }

    #[test]
    fn block_region_1x1_is_the_site_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_peps(&mut rng, 2, 2, 3);
        let spec = PepsSpec::new(a.clone(), 2, 2).unwrap();
        let region = block_region(&spec, 1, 1, DEFAULT_AMP_CAP).unwrap();
        assert_eq!(region.shape(), &[2, 2, 3, 2, 3]);
        let diff: f64 = region
            .iter()
            .zip(a.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-14);
    }

    #[test]
    fn block_region_1x2_matches_manual_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_peps(&mut rng, 2, 2, 2);
        let spec = PepsSpec::new(a.clone(), 2, 2).unwrap();
        let region = block_region(&spec, 1, 2, DEFAULT_AMP_CAP).unwrap();
        assert_eq!(region.shape(), &[4, 2, 4, 2, 4]);
        // physical (i1, i2), left l1, down (d1, d2), right r2, up (u1, u2)
        for i1 in 0..2 {
            for i2 in 0..2 {
                for l in 0..2 {
                    for d1 in 0..2 {
                        for d2 in 0..2 {
                            for r in 0..2 {
                                for u1 in 0..2 {
                                    for u2 in 0..2 {
                                        let mut s = c(0.0, 0.0);
                                        for b in 0..2 {
                                            s += a[[i1, l, d1, b, u1]] * a[[i2, b, d2, r, u2]];
                                        }
                                        let got = region[[
                                            i1 * 2 + i2,
                                            l,
                                            d1 * 2 + d2,
                                            r,
                                            u1 * 2 + u2,
                                        ]];
                                        assert!((got - s).norm() < 1e-13);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn block_region_2x1_matches_manual_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_peps(&mut rng, 2, 2, 2);
        let spec = PepsSpec::new(a.clone(), 2, 2).unwrap();
        let region = block_region(&spec, 2, 1, DEFAULT_AMP_CAP).unwrap();
        assert_eq!(region.shape(), &[4, 4, 2, 4, 2]);
        // physical (i1, i2) top to bottom, left (l1, l2), down d2, right
        // (r1, r2), up u1
        for i1 in 0..2 {
            for i2 in 0..2 {
                for l1 in 0..2 {
                    for l2 in 0..2 {
                        for d in 0..2 {
                            for r1 in 0..2 {
                                for r2 in 0..2 {
                                    for u in 0..2 {
                                        let mut s = c(0.0, 0.0);
                                        for b in 0..2 {
                                            s += a[[i1, l1, b, r1, u]] * a[[i2, l2, d, r2, b]];
                                        }
                                        let got = region[[
                                            i1 * 2 + i2,
                                            l1 * 2 + l2,
                                            d,
                                            r1 * 2 + r2,
                                            u,
                                        ]];
                                        assert!((got - s).norm() < 1e-13);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn embedded_chain_state_matches_mps_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = Array3::from_shape_fn((2, 3, 3), |_| sample::complex_uniform(&mut rng));
        let spec = MpsSpec::periodic_uniform(a, 4).unwrap();
        let direct = mps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        let peps = embed_mps_as_peps(&spec).unwrap();
        let embedded = peps_state(&peps, DEFAULT_AMP_CAP).unwrap();
        let (mu, residual) = equal_up_to_scalar(&direct, &embedded).unwrap();
        assert!((mu - c(1.0, 0.0)).norm() < 1e-12);
        assert!(residual < 1e-12);
    }

    #[test]
    fn gauge_action_preserves_the_torus_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_peps(&mut rng, 2, 2, 3);
        let spec = PepsSpec::new(a.clone(), 2, 2).unwrap();
        let y = sample::invertible(&mut rng, 2, 50.0);
        let z = sample::invertible(&mut rng, 3, 50.0);
        let b = peps_conjugate(&a, &y, &z).unwrap();
        let bspec = PepsSpec::new(b, 2, 2).unwrap();
        let psi_a = peps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        let psi_b = peps_state(&bspec, DEFAULT_AMP_CAP).unwrap();
        let (mu, residual) = equal_up_to_scalar(&psi_a, &psi_b).unwrap();
        assert!((mu - c(1.0, 0.0)).norm() < 1e-9, "mu = {mu}");
        assert!(residual < 1e-10, "residual = {residual}");
    }

    #[test]
    fn gauge_action_composes_by_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_peps(&mut rng, 2, 2, 2);
        let p = sample::invertible(&mut rng, 2, 50.0);
        let q = sample::invertible(&mut rng, 2, 50.0);
        let p2 = sample::invertible(&mut rng, 2, 50.0);
        let q2 = sample::invertible(&mut rng, 2, 50.0);
        let twice = peps_conjugate(&peps_conjugate(&a, &p2, &q2).unwrap(), &p, &q).unwrap();
        let once = peps_conjugate(&a, &p.dot(&p2), &q.dot(&q2)).unwrap();
        let diff: f64 = twice
            .iter()
            .zip(once.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale: f64 = once.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff / scale < 1e-12);
    }

    #[test]
    fn gauge_action_inverts_with_inverse_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_peps(&mut rng, 2, 3, 2);
        let y = sample::invertible(&mut rng, 3, 50.0);
        let z = sample::invertible(&mut rng, 2, 50.0);
        let yi = inverse(&y).unwrap();
        let zi = inverse(&z).unwrap();
        let back = peps_conjugate(&peps_conjugate(&a, &y, &z).unwrap(), &yi, &zi).unwrap();
        let diff: f64 = back
            .iter()
            .zip(a.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff / scale < 1e-11);
    }

    #[test]
    fn quarter_turn_applied_four_times_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = random_peps(&mut rng, 2, 3, 3);
        let mut b = a.clone();
        for _ in 0..4 {
            b = rotate_quarter_tensor(&b);
        }
        assert_eq!(a, b);
        let refl = reflect_tensor(&reflect_tensor(&a));
        assert_eq!(a, refl);
        let half = rotate_half_tensor(&rotate_half_tensor(&a));
        assert_eq!(a, half);
        // a quarter turn twice is the half turn
        let two_quarters = rotate_quarter_tensor(&rotate_quarter_tensor(&a));
        assert_eq!(two_quarters, rotate_half_tensor(&a));
    }

    #[test]
    fn one_site_operators_and_expectations() {
        let spec = MpsSpec::periodic_uniform(ghz_tensor(), 4).unwrap();
        let psi = mps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        let mut sz = ComplexMatrix::zeros((2, 2));
        sz[[0, 0]] = c(0.5, 0.0);
        sz[[1, 1]] = c(-0.5, 0.0);
        // GHZ has <Sz> = 0 on every site
        for s in 0..4 {
            let e = psi.expectation(&sz, s).unwrap();
            assert!(e.norm() < 1e-14);
        }
        // flipping site 0 turns |0000> into |1000>
        let mut sx = ComplexMatrix::zeros((2, 2));
        sx[[0, 1]] = c(1.0, 0.0);
        sx[[1, 0]] = c(1.0, 0.0);
        let flipped = psi.apply_one_site(&sx, 0).unwrap();
        assert_eq!(flipped.amp(&[1, 0, 0, 0]), c(1.0, 0.0));
        assert_eq!(flipped.amp(&[0, 1, 1, 1]), c(1.0, 0.0));
    }

    #[test]
    fn reduced_density_of_ghz_half_chain() {
        let spec = MpsSpec::periodic_uniform(ghz_tensor(), 4).unwrap();
        let psi = mps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        let rho = reduced_density(&psi, &[0, 1]).unwrap();
        let tr: C64 = (0..4).map(|i| rho[[i, i]]).sum();
        assert!((tr - c(1.0, 0.0)).norm() < 1e-13);
        let tol = Tolerance::default();
        assert!((renyi0(&rho, &tol).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn renyi0_rejects_non_hermitian_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let m = sample::complex_matrix(&mut rng, 3, 3);
        let tol = Tolerance::default();
        assert!(matches!(
            renyi0(&m, &tol),
            Err(Error::NotADensityMatrix(_))
        ));
    }

    #[test]
    fn product_state_has_zero_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let t = Array3::from_shape_fn((2, 1, 1), |_| sample::complex_uniform(&mut rng));
        let spec = MpsSpec::periodic_uniform(t, 5).unwrap();
        let psi = mps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        let rho = reduced_density(&psi, &[1, 3]).unwrap();
        let tol = Tolerance::default();
        assert!(renyi0(&rho, &tol).unwrap().abs() < 1e-12);
    }
}
