//! Dense complex tensors and the linear-algebra kernels everything else
//! consumes: matricization, numeric rank, nullspaces, Kronecker products and
//! their factorization.
//!
//! Conventions used throughout the crate:
//!
//! * entries are stored row-major over the shape,
//! * matricization flattens the listed axes row-major within each group,
//! * scalar freedom of gauge-like matrices is fixed by scaling to Frobenius
//!   norm sqrt(rows) and rotating the largest-magnitude entry to the positive
//!   real axis.
//!
//! The tolerances are relative: a singular value survives a rank cut when it
//! exceeds `relative_rank_cut` times the largest one, and residual checks
//! compare against the norm of the data they certify.

use ndarray::prelude::*;
use ndarray_linalg::{Inverse, Norm, SVD};
use num_complex::Complex;

use crate::error::{Error, Result};

/// Double-precision complex scalar, the only number type in this crate.
pub type C64 = Complex<f64>;

/// Dense complex matrix, row-major.
pub type ComplexMatrix = Array2<C64>;

/// Relative cutoffs used by every rank and residual decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// A singular value counts toward the rank when it is larger than this
    /// fraction of the largest singular value.
    pub relative_rank_cut: f64,
    /// Residual checks pass when the relative residual stays below this.
    pub residual_cut: f64,
}

impl Tolerance {
    /// Both cuts must lie strictly inside (0, 1).
    pub fn new(relative_rank_cut: f64, residual_cut: f64) -> Result<Self> {
        for (name, v) in [
            ("relative_rank_cut", relative_rank_cut),
            ("residual_cut", residual_cut),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::ShapeMismatch(format!(
                    "tolerance {name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(Self {
            relative_rank_cut,
            residual_cut,
        })
    }
}

impl Default for Tolerance {
    /// Double precision leaves about six orders of magnitude of headroom at
    /// desk scale, so 1e-9 for both cuts.
    fn default() -> Self {
        Self {
            relative_rank_cut: 1e-9,
            residual_cut: 1e-9,
        }
    }
}

/// A validated dense complex tensor: finite entries, row-major order.
///
/// Dereferences to [`ArrayD<C64>`] so all of ndarray is available on it.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    data: ArrayD<C64>,
}

impl DenseTensor {
    /// Build from a shape and a row-major entry list.
    pub fn from_vec(shape: &[usize], entries: Vec<C64>) -> Result<Self> {
        let count: usize = shape.iter().product();
        if shape.iter().any(|&s| s == 0) {
            return Err(Error::ShapeMismatch(
                "tensor axes must have positive length".into(),
            ));
        }
        if entries.len() != count {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} needs {} entries, got {}",
                shape,
                count,
                entries.len()
            )));
        }
        let data = ArrayD::from_shape_vec(IxDyn(shape), entries)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Self::from_array(data)
    }

    /// Wrap an existing ndarray, validating finiteness.
    pub fn from_array<D: Dimension>(arr: Array<C64, D>) -> Result<Self> {
        let data = arr.into_dyn();
        if let Some(index) = data
            .as_standard_layout()
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            data: data.as_standard_layout().into_owned(),
        })
    }

    pub fn shape(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn into_inner(self) -> ArrayD<C64> {
        self.data
    }
}

impl std::ops::Deref for DenseTensor {
    type Target = ArrayD<C64>;
    fn deref(&self) -> &ArrayD<C64> {
        &self.data
    }
}

fn check_axis_split(ndim: usize, row_axes: &[usize], col_axes: &[usize]) -> Result<()> {
    let mut seen = vec![false; ndim];
    for &ax in row_axes.iter().chain(col_axes) {
        if ax >= ndim {
            return Err(Error::AxisSpec(format!(
                "axis {ax} out of range for a rank-{ndim} tensor"
            )));
        }
        if seen[ax] {
            return Err(Error::AxisSpec(format!("axis {ax} listed twice")));
        }
        seen[ax] = true;
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::AxisSpec(format!(
            "axis lists {row_axes:?} / {col_axes:?} do not cover all {ndim} axes"
        )));
    }
    Ok(())
}

/// Flatten a tensor into a matrix: `row_axes` become the row index and
/// `col_axes` the column index, row-major within each group.
pub fn matricize(t: &ArrayD<C64>, row_axes: &[usize], col_axes: &[usize]) -> Result<ComplexMatrix> {
    check_axis_split(t.ndim(), row_axes, col_axes)?;
    let perm: Vec<usize> = row_axes.iter().chain(col_axes).copied().collect();
    let rows: usize = row_axes.iter().map(|&a| t.shape()[a]).product();
    let cols: usize = col_axes.iter().map(|&a| t.shape()[a]).product();
    let permuted = t.view().permuted_axes(IxDyn(&perm));
    let flat = permuted.as_standard_layout().into_owned();
    let m = flat
        .into_shape_with_order((rows, cols))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok(m)
}

/// Inverse of [`matricize`]: rebuild the tensor of the given shape from the
/// matrix produced by the same axis split.
pub fn unmatricize(
    m: &ComplexMatrix,
    row_axes: &[usize],
    col_axes: &[usize],
    shape: &[usize],
) -> Result<ArrayD<C64>> {
    check_axis_split(shape.len(), row_axes, col_axes)?;
    let perm: Vec<usize> = row_axes.iter().chain(col_axes).copied().collect();
    let permuted_shape: Vec<usize> = perm.iter().map(|&a| shape[a]).collect();
    let expect_rows: usize = row_axes.iter().map(|&a| shape[a]).product();
    let expect_cols: usize = col_axes.iter().map(|&a| shape[a]).product();
    if m.nrows() != expect_rows || m.ncols() != expect_cols {
        return Err(Error::ShapeMismatch(format!(
            "matrix is {}x{} but the axis split demands {}x{}",
            m.nrows(),
            m.ncols(),
            expect_rows,
            expect_cols
        )));
    }
    let t = m
        .clone()
        .into_shape_with_order(IxDyn(&permuted_shape))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    // permuted_axes wants the inverse permutation: axis perm[i] of the
    // original sits at position i right now.
    let mut inverse = vec![0usize; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inverse[p] = i;
    }
    Ok(t.permuted_axes(IxDyn(&inverse))
        .as_standard_layout()
        .into_owned())
}

/// Contract `a_axes` of `a` against `b_axes` of `b` (paired in order). The
/// result carries a's free axes first, then b's free axes, both in their
/// original order.
pub fn tensordot(
    a: &ArrayD<C64>,
    b: &ArrayD<C64>,
    a_axes: &[usize],
    b_axes: &[usize],
) -> Result<ArrayD<C64>> {
    if a_axes.len() != b_axes.len() {
        return Err(Error::AxisSpec(format!(
            "tensordot pairs {} axes with {}",
            a_axes.len(),
            b_axes.len()
        )));
    }
    for (&ax, &bx) in a_axes.iter().zip(b_axes) {
        if ax >= a.ndim() || bx >= b.ndim() {
            return Err(Error::AxisSpec(format!(
                "tensordot axes ({ax}, {bx}) out of range"
            )));
        }
        if a.shape()[ax] != b.shape()[bx] {
            return Err(Error::ShapeMismatch(format!(
                "tensordot contracts axis {ax} (len {}) with axis {bx} (len {})",
                a.shape()[ax],
                b.shape()[bx]
            )));
        }
    }
    let a_free: Vec<usize> = (0..a.ndim()).filter(|ax| !a_axes.contains(ax)).collect();
    let b_free: Vec<usize> = (0..b.ndim()).filter(|bx| !b_axes.contains(bx)).collect();
    let ma = matricize(a, &a_free, a_axes)?;
    let mb = matricize(b, b_axes, &b_free)?;
    let m = ma.dot(&mb);
    let mut shape: Vec<usize> = a_free.iter().map(|&ax| a.shape()[ax]).collect();
    shape.extend(b_free.iter().map(|&bx| b.shape()[bx]));
    m.into_shape_with_order(IxDyn(&shape))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// Contract two equal-length axes of one tensor against each other,
/// returning the remaining axes in their original order.
pub fn trace_axes(t: &ArrayD<C64>, ax1: usize, ax2: usize) -> Result<ArrayD<C64>> {
    if ax1 == ax2 || ax1 >= t.ndim() || ax2 >= t.ndim() {
        return Err(Error::AxisSpec(format!(
            "trace needs two distinct in-range axes, got ({ax1}, {ax2})"
        )));
    }
    let n = t.shape()[ax1];
    if t.shape()[ax2] != n {
        return Err(Error::ShapeMismatch(format!(
            "trace axes have lengths {} and {}",
            t.shape()[ax1],
            t.shape()[ax2]
        )));
    }
    let rest: Vec<usize> = (0..t.ndim()).filter(|&x| x != ax1 && x != ax2).collect();
    let m = matricize(t, &rest, &[ax1, ax2])?;
    let out = Array1::from_shape_fn(m.nrows(), |r| {
        (0..n).map(|d| m[[r, d * n + d]]).sum::<C64>()
    });
    let shape: Vec<usize> = rest.iter().map(|&x| t.shape()[x]).collect();
    out.into_shape_with_order(IxDyn(&shape))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

fn nonempty(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::ShapeMismatch("matrix must be nonempty".into()));
    }
    Ok(())
}

/// Singular values of `m`, descending.
pub fn singular_values(m: &ComplexMatrix) -> Result<Array1<f64>> {
    nonempty(m)?;
    let (_, s, _) = m.svd(false, false)?;
    Ok(s)
}

/// Count of singular values above the relative rank cut. Zero matrices have
/// rank zero.
pub fn numeric_rank(m: &ComplexMatrix, tol: &Tolerance) -> Result<usize> {
    let s = singular_values(m)?;
    Ok(rank_from_singular_values(&s, tol))
}

/// Rank decision shared by every consumer that already has singular values.
pub fn rank_from_singular_values(s: &Array1<f64>, tol: &Tolerance) -> usize {
    if s.is_empty() || s[0] == 0.0 {
        return 0;
    }
    let cutoff = tol.relative_rank_cut;
    s.iter()
        .position(|&x| x <= cutoff * s[0])
        .unwrap_or(s.len())
}

/// The two singular values straddling the rank cut, for auditing borderline
/// decisions: (last kept, first dropped).
pub fn singular_values_around_cut(
    s: &Array1<f64>,
    rank: usize,
) -> (Option<f64>, Option<f64>) {
    let kept = if rank > 0 { Some(s[rank - 1]) } else { None };
    let dropped = s.get(rank).copied();
    (kept, dropped)
}

/// Orthonormal basis of the right kernel of `m` at the given rank cut.
/// Every returned vector satisfies `|m v| <= residual_cut * |m|_2`.
pub fn nullspace(m: &ComplexMatrix, tol: &Tolerance) -> Result<Vec<Array1<C64>>> {
    nonempty(m)?;
    let (_, s, vh) = m.svd(false, true)?;
    let norm = if s.is_empty() { 0.0 } else { s[0] };
    kernel_rows(m, &s, vh.expect("requested Vt"), norm, tol)
}

/// Right kernel of `m` with singular values measured against a caller
/// supplied scale instead of the matrix's own largest one. Needed when `m`
/// is a residual construction that may come out numerically zero: relative
/// to itself its noise looks full rank, while relative to the data that
/// built it the whole space is kernel.
pub fn nullspace_with_scale(
    m: &ComplexMatrix,
    scale: f64,
    tol: &Tolerance,
) -> Result<Vec<Array1<C64>>> {
    nonempty(m)?;
    let (_, s, vh) = m.svd(false, true)?;
    kernel_rows(m, &s, vh.expect("requested Vt"), scale, tol)
}

fn kernel_rows(
    m: &ComplexMatrix,
    s: &Array1<f64>,
    vh: ComplexMatrix,
    scale: f64,
    tol: &Tolerance,
) -> Result<Vec<Array1<C64>>> {
    let cutoff = tol.relative_rank_cut * scale;
    let rank = s.iter().position(|&x| x <= cutoff).unwrap_or(s.len());
    let n = m.ncols();
    let mut basis = Vec::with_capacity(n - rank);
    for j in rank..n {
        // Kernel vectors are the conjugated rows of Vt past the rank.
        let v: Array1<C64> = vh.row(j).mapv(|z| z.conj());
        basis.push(v);
    }
    // Audit the certificate against the same scale.
    for v in &basis {
        let res = m.dot(v).norm_l2();
        if scale > 0.0 && res > tol.residual_cut * scale {
            return Err(Error::ShapeMismatch(format!(
                "kernel vector residual {res:.3e} exceeds {:.3e}",
                tol.residual_cut * scale
            )));
        }
    }
    Ok(basis)
}

/// Kronecker product with row-major block convention:
/// `kron(a, b)[i*p + k, j*q + l] = a[i, j] * b[k, l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (m, n) = a.dim();
    let (p, q) = b.dim();
    let mut out = ComplexMatrix::zeros((m * p, n * q));
    for i in 0..m {
        for j in 0..n {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = out.slice_mut(s![i * p..(i + 1) * p, j * q..(j + 1) * q]);
            block.zip_mut_with(b, |o, &bv| *o = aij * bv);
        }
    }
    out
}

/// Kronecker product of a whole list, left to right.
pub fn kron_all(factors: &[ComplexMatrix]) -> ComplexMatrix {
    assert!(!factors.is_empty(), "kron_all needs at least one factor");
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = kron(&acc, f);
    }
    acc
}

/// Frobenius norm.
pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.norm_l2()
}

/// Frobenius norm of a tensor of any rank.
pub fn tensor_norm<D: ndarray::Dimension>(t: &ndarray::Array<C64, D>) -> f64 {
    t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Complex identity matrix.
pub fn eye(n: usize) -> ComplexMatrix {
    Array2::eye(n).mapv(|x: f64| C64::new(x, 0.0))
}

/// Fix the scalar freedom of a matrix: Frobenius norm sqrt(rows) and the
/// largest-magnitude entry rotated onto the positive real axis. Ties go to
/// the first entry in row-major order.
pub fn normalize_matrix_convention(m: &ComplexMatrix) -> ComplexMatrix {
    let norm = frobenius(m);
    if norm == 0.0 {
        return m.clone();
    }
    let target = (m.nrows() as f64).sqrt();
    let scaled = m.mapv(|z| z * (target / norm));
    let mut best = C64::new(0.0, 0.0);
    let mut best_mag = -1.0f64;
    for &z in scaled.iter() {
        if z.norm() > best_mag + 1e-15 * best_mag.abs() {
            best_mag = z.norm();
            best = z;
        }
    }
    if best_mag <= 0.0 {
        return scaled;
    }
    let phase = best / best.norm();
    scaled.mapv(|z| z / phase)
}

/// Least-squares scalar `mu` with `b ~ mu * a`, and the relative residual
/// `|b - mu a| / |b|` of that fit. Works on any equal-shaped pair.
pub fn scalar_match(a: &ArrayD<C64>, b: &ArrayD<C64>) -> Result<(C64, f64)> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "scalar match needs equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let aa: C64 = a.iter().map(|z| z.conj() * z).sum();
    let bb: C64 = b.iter().map(|z| z.conj() * z).sum();
    if aa.re == 0.0 {
        return Err(Error::ZeroState);
    }
    let ab: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let mu = ab / aa;
    let diff2: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (y - mu * x).norm_sqr())
        .sum();
    let denom = bb.re.sqrt();
    let residual = if denom > 0.0 {
        diff2.sqrt() / denom
    } else {
        diff2.sqrt()
    };
    Ok((mu, residual))
}

/// Condition number from the singular spectrum; infinite when the smallest
/// singular value underflows.
pub fn condition_number(m: &ComplexMatrix) -> Result<f64> {
    let s = singular_values(m)?;
    let smin = s[s.len() - 1];
    if smin == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(s[0] / smin)
}

/// Matrix inverse; wraps LAPACK and converts failures into crate errors.
pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(m.inv()?)
}

/// Moore-Penrose pseudoinverse at the given rank cut.
pub fn pinv(m: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix> {
    nonempty(m)?;
    let (u, s, vh) = m.svd(true, true)?;
    let u = u.expect("requested U");
    let vh = vh.expect("requested Vt");
    let rank = rank_from_singular_values(&s, tol);
    let mut out = ComplexMatrix::zeros((m.ncols(), m.nrows()));
    for k in 0..rank {
        let inv_s = C64::new(1.0 / s[k], 0.0);
        let v_col = vh.row(k).mapv(|z| z.conj());
        let u_col = u.column(k);
        for i in 0..m.ncols() {
            for j in 0..m.nrows() {
                out[[i, j]] += v_col[i] * inv_s * u_col[j].conj();
            }
        }
    }
    Ok(out)
}

fn split_first_factor(
    m: &ComplexMatrix,
    first: (usize, usize),
    rest: (usize, usize),
    tol: &Tolerance,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let (m1, n1) = first;
    let (m2, n2) = rest;
    // Van Loan reshuffle: group (first-factor row, first-factor col) as rows
    // and (rest row, rest col) as columns, then a rank-1 truncation splits
    // the factors.
    let t = m
        .clone()
        .into_shape_with_order((m1, m2, n1, n2))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let r = matricize(&t.into_dyn(), &[0, 2], &[1, 3])?;
    let (u, s, vh) = r.svd(true, true)?;
    let u = u.expect("requested U");
    let vh = vh.expect("requested Vt");
    let total: f64 = s.iter().map(|x| x * x).sum();
    let tail: f64 = s.iter().skip(1).map(|x| x * x).sum();
    let residual = if total > 0.0 {
        (tail / total).sqrt()
    } else {
        1.0
    };
    if residual > tol.residual_cut {
        return Err(Error::NotAKroneckerProduct { residual });
    }
    let sigma = C64::new(s[0], 0.0);
    let a = u
        .column(0)
        .to_owned()
        .mapv(|z| z * sigma)
        .into_shape_with_order((m1, n1))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    // Row 0 of Vt is conj(v0), which is proportional to vec(b) directly:
    // the reshuffle is the outer product vec(a) vec(b)^T, no conjugation.
    let b = vh
        .row(0)
        .to_owned()
        .into_shape_with_order((m2, n2))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok((a, b))
}

/// Factor `m` into a Kronecker product of matrices with the given shapes.
///
/// Every factor is normalized by [`normalize_matrix_convention`]; the
/// leftover global scalar is pushed into the first factor. Returns the
/// factors and the relative reconstruction residual. Fails with
/// [`Error::NotAKroneckerProduct`] when any reshuffle is not rank-1 within
/// `tol.residual_cut`.
pub fn kron_factorize(
    m: &ComplexMatrix,
    dims: &[(usize, usize)],
    tol: &Tolerance,
) -> Result<(Vec<ComplexMatrix>, f64)> {
    nonempty(m)?;
    if dims.is_empty() {
        return Err(Error::AxisSpec("kron_factorize needs at least one factor".into()));
    }
    let rows: usize = dims.iter().map(|d| d.0).product();
    let cols: usize = dims.iter().map(|d| d.1).product();
    if rows != m.nrows() || cols != m.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "factor shapes {:?} multiply to {}x{}, matrix is {}x{}",
            dims,
            rows,
            cols,
            m.nrows(),
            m.ncols()
        )));
    }

    let mut raw = Vec::with_capacity(dims.len());
    let mut current = m.clone();
    for k in 0..dims.len() - 1 {
        let rest_rows: usize = dims[k + 1..].iter().map(|d| d.0).product();
        let rest_cols: usize = dims[k + 1..].iter().map(|d| d.1).product();
        let (head, tail) = split_first_factor(&current, dims[k], (rest_rows, rest_cols), tol)?;
        raw.push(head);
        current = tail;
    }
    raw.push(current);

    let factors: Vec<ComplexMatrix> = raw.iter().map(normalize_matrix_convention).collect();
    let product = kron_all(&factors);
    let (mu, _) = scalar_match(&product.clone().into_dyn(), &m.clone().into_dyn())?;
    let mut factors = factors;
    factors[0] = factors[0].mapv(|z| z * mu);
    let reconstructed = kron_all(&factors);
    let diff = &reconstructed - m;
    let residual = frobenius(&diff) / frobenius(m);
    if residual > tol.residual_cut {
        return Err(Error::NotAKroneckerProduct { residual });
    }
    Ok((factors, residual))
}
