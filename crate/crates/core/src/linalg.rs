//! Sparse matrices, Lanczos matrix exponentials, conjugate gradients and
//! dense symmetric eigensolvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicate entries are summed; exact zeros are kept.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n_rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            assert!(i < n_rows && j < n_cols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.triplets().map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    /// Keep rows and columns listed in `keep`, renumbered in that order.
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n_cols.max(self.n_rows)];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut t = Vec::new();
        for (new_i, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    t.push((new_i, map[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), keep.len(), &t)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `e^{-tA} b` for several times from one Krylov basis.
#[derive(Debug, Clone)]
pub struct ExpmvResult {
    /// One vector per requested time.
    pub values: Vec<Vec<f64>>,
    pub iterations: usize,
    /// A-posteriori error estimates, absolute, per time.
    pub error_estimates: Vec<f64>,
}

/// Lanczos approximation of `e^{-tA} b` for a symmetric matrix `A`.
pub fn lanczos_expmv<A>(apply: A, b: &[f64], times: &[f64], tol: f64, max_iter: usize) -> Result<ExpmvResult>
where
    A: Fn(&[f64]) -> Result<Vec<f64>>,
{
    lanczos_expmv_gram(
        |v| {
            let w = apply(v)?;
            Ok((w.clone(), w))
        },
        b,
        b,
        times,
        tol,
        max_iter,
    )
}

/// Decision of a stopping rule: keep going, or stop with coefficient
/// vectors (one per time, in the Krylov basis) and error estimates.
type Verdict = Option<(Vec<Vec<f64>>, Vec<f64>)>;

/// Runs Lanczos for an operator self-adjoint in `<u, v> = u^T G v`, with
/// full reorthogonalization. `apply(v)` returns `(A v, G A v)`; `judge`
/// sees `(alpha, beta, beta_next, ||b||, invariant, last)` after every step.
fn lanczos_drive<A, J>(apply: A, b: &[f64], gb: &[f64], times: &[f64], max_iter: usize, mut judge: J) -> Result<ExpmvResult>
where
    A: Fn(&[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
    J: FnMut(&[f64], &[f64], f64, f64, bool, bool) -> Result<Verdict>,
{
    let n = b.len();
    let beta0 = dot(b, gb).sqrt();
    if beta0 == 0.0 {
        return Ok(ExpmvResult {
            values: vec![vec![0.0; n]; times.len()],
            iterations: 0,
            error_estimates: vec![0.0; times.len()],
        });
    }
    let max_iter = max_iter.min(n).max(1);
    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|x| x / beta0).collect()];
    let mut gbasis: Vec<Vec<f64>> = vec![gb.iter().map(|x| x / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut scale: f64 = 0.0;

    loop {
        let j = basis.len() - 1;
        let (mut w, mut gw) = apply(&basis[j])?;
        let a = dot(&w, &gbasis[j]);
        alpha.push(a);
        axpy(-a, &basis[j], &mut w);
        axpy(-a, &gbasis[j], &mut gw);
        if j > 0 {
            axpy(-beta[j - 1], &basis[j - 1], &mut w);
            axpy(-beta[j - 1], &gbasis[j - 1], &mut gw);
        }
        for _ in 0..2 {
            for (v, gv) in basis.iter().zip(&gbasis) {
                let c = dot(&w, gv);
                axpy(-c, v, &mut w);
                axpy(-c, gv, &mut gw);
            }
        }
        let bnext = dot(&w, &gw).max(0.0).sqrt();
        scale = scale.max(a.abs() + bnext + beta.last().copied().unwrap_or(0.0));
        let m = alpha.len();
        let invariant = bnext <= 1e-13 * scale.max(f64::MIN_POSITIVE);
        if let Some((coeffs, errors)) = judge(&alpha, &beta, bnext, beta0, invariant, m == max_iter)? {
            let values = coeffs
                .iter()
                .map(|y| {
                    let mut out = vec![0.0; n];
                    for (v, c) in basis.iter().zip(y) {
                        axpy(beta0 * c, v, &mut out);
                    }
                    out
                })
                .collect();
            return Ok(ExpmvResult { values, iterations: m, error_estimates: errors });
        }
        beta.push(bnext);
        basis.push(w.iter().map(|x| x / bnext).collect());
        gbasis.push(gw.iter().map(|x| x / bnext).collect());
    }
}

fn exp_coefficients(evals: &[f64], evecs: &DMatrix<f64>, t: f64) -> Vec<f64> {
    let m = evals.len();
    (0..m)
        .map(|i| (0..m).map(|k| evecs[(i, k)] * (-t * evals[k]).exp() * evecs[(0, k)]).sum::<f64>())
        .collect()
}

fn not_converged(m: usize, errors: &[f64], tol: f64) -> Error {
    let worst = errors.iter().copied().fold(0.0, f64::max);
    Error::numerical(format!(
        "Lanczos exponential did not converge in {m} iterations: \
         error estimate {worst:.3e} > tolerance {tol:.3e}"
    ))
}

/// Polynomial Lanczos approximation of `e^{-tA} b` for `A` self-adjoint in
/// `<u, v> = u^T G v`; `apply(v)` returns `(A v, G A v)` and `gb = G b`.
///
/// Stops when the estimate `beta_m |e_m^T e^{-tT} e_1| ||b||` is below `tol`
/// for every time, or when the Krylov space becomes invariant. While
/// `t theta_min` is large the estimate is meaningless (everything has
/// decayed), so that case also waits for the smallest Ritz value to settle.
pub fn lanczos_expmv_gram<A>(
    apply: A,
    b: &[f64],
    gb: &[f64],
    times: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ExpmvResult>
where
    A: Fn(&[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
{
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let mut prev_theta = f64::NAN;
    lanczos_drive(apply, b, gb, times, max_iter, |alpha, beta, bnext, beta0, invariant, last| {
        let m = alpha.len();
        if !(invariant || last || m % 4 == 0) {
            return Ok(None);
        }
        let (evals, evecs) = tridiagonal_eigen(alpha, beta);
        let coeffs: Vec<Vec<f64>> = times.iter().map(|&t| exp_coefficients(&evals, &evecs, t)).collect();
        let errors: Vec<f64> =
            coeffs.iter().map(|y| if invariant { 0.0 } else { bnext * y[m - 1].abs() * beta0 }).collect();
        let theta = evals.iter().copied().fold(f64::INFINITY, f64::min);
        let settled = t_max * theta <= 30.0 || (theta - prev_theta).abs() <= 1e-10 * theta.abs();
        prev_theta = theta;
        if invariant || (settled && errors.iter().all(|&e| e <= tol)) {
            return Ok(Some((coeffs, errors)));
        }
        if last {
            return Err(not_converged(m, &errors, tol));
        }
        Ok(None)
    })
}

/// Shift-and-invert Lanczos for stiff operators. `solve(v)` returns
/// `((I + gamma A)^{-1} v, G (I + gamma A)^{-1} v)`; the Ritz values `mu` of
/// that operator map back to `(1/mu - 1)/gamma`. Converged when successive
/// approximations differ by at most `tol` twice in a row.
#[allow(clippy::too_many_arguments)]
pub fn shift_invert_expmv<S>(
    solve: S,
    gamma: f64,
    b: &[f64],
    gb: &[f64],
    times: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ExpmvResult>
where
    S: Fn(&[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
{
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("shift must be positive, got {gamma}")));
    }
    let mut prev: Option<Vec<Vec<f64>>> = None;
    let mut streak = 0;
    lanczos_drive(solve, b, gb, times, max_iter, |alpha, beta, _bnext, beta0, invariant, last| {
        let (mu, evecs) = tridiagonal_eigen(alpha, beta);
        let lambda: Vec<f64> =
            mu.iter().map(|&u| if u > 1e-300 { ((1.0 / u - 1.0) / gamma).max(0.0) } else { f64::INFINITY }).collect();
        let coeffs: Vec<Vec<f64>> = times.iter().map(|&t| exp_coefficients(&lambda, &evecs, t)).collect();
        let errors: Vec<f64> = match &prev {
            None => vec![f64::INFINITY; times.len()],
            Some(p) => coeffs
                .iter()
                .zip(p)
                .map(|(y, q)| {
                    let d2: f64 = y
                        .iter()
                        .enumerate()
                        .map(|(i, v)| (v - q.get(i).copied().unwrap_or(0.0)).powi(2))
                        .sum();
                    beta0 * d2.sqrt()
                })
                .collect(),
        };
        prev = Some(coeffs.clone());
        if errors.iter().all(|&e| e <= tol) {
            streak += 1;
        } else {
            streak = 0;
        }
        if invariant || streak >= 2 {
            return Ok(Some((coeffs, errors)));
        }
        if last {
            return Err(not_converged(alpha.len(), &errors, tol));
        }
        Ok(None)
    })
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors)
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite operator. `tol` is relative to `||b||`.
pub fn conjugate_gradient<A>(apply: A, diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>>
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = apply(&p);
        let alpha = rz / dot(&p, &ap);
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok(x);
        }
        z = r.iter().zip(diag).map(|(r, d)| r / d).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::numerical(format!(
        "conjugate gradients did not reach relative residual {tol:.1e} in {max_iter} iterations \
         (residual {:.3e})",
        dot(&r, &r).sqrt() / bnorm
    )))
}

/// Eigenvalues ascending with matching eigenvector columns.
pub fn symmetric_eigen(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<DVector<f64>>>());
    (values, vectors)
}

/// Solves `K v = λ M v` for symmetric `K` and positive definite `M`.
/// Eigenvectors are `M`-orthonormal.
pub fn generalized_eigen(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numerical("mass matrix is not positive definite"))?;
    let l = chol.l();
    let linv_k = l
        .solve_lower_triangular(k)
        .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
    let c = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
    let c = (&c + c.transpose()) * 0.5;
    let (values, q) = symmetric_eigen(c);
    let v = l
        .transpose()
        .solve_upper_triangular(&q)
        .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
    Ok((values, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn csr_sums_duplicates() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.matvec(&[1.0, 2.0]), vec![3.0, -1.0]);
    }

    #[test]
    fn lanczos_matches_dense_exponential() {
        let a = path_laplacian(40);
        let (vals, vecs) = symmetric_eigen(a.to_dense());
        let mut b = vec![0.0; 40];
        b[3] = 1.0;
        let times = [0.1, 1.0, 5.0];
        let res = lanczos_expmv(|x| Ok(a.matvec(x)), &b, &times, 1e-13, 200).unwrap();
        for (ti, &t) in times.iter().enumerate() {
            for i in 0..40 {
                let exact: f64 = (0..40).map(|k| vecs[(i, k)] * (-t * vals[k]).exp() * vecs[(3, k)]).sum();
                assert!((res.values[ti][i] - exact).abs() < 1e-12, "t={t} i={i}");
            }
        }
    }

    #[test]
    fn stiff_operator_paths_agree_with_dense() {
        let n = 80;
        let a = CsrMatrix::from_triplets(
            n,
            n,
            &path_laplacian(n).triplets().map(|(i, j, v)| (i, j, 1e4 * v)).collect::<Vec<_>>(),
        );
        let (vals, vecs) = symmetric_eigen(a.to_dense());
        let mut b = vec![0.0; n];
        b[10] = 1.0;
        let times = [0.01, 0.1];
        let exact: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| (0..n).map(|i| (0..n).map(|k| vecs[(i, k)] * (-t * vals[k]).exp() * vecs[(10, k)]).sum()).collect())
            .collect();
        let poly = lanczos_expmv(|x| Ok(a.matvec(x)), &b, &times, 1e-12, 400).unwrap();
        let gamma = 0.003;
        let shifted = CsrMatrix::from_triplets(
            n,
            n,
            &a.triplets().map(|(i, j, v)| (i, j, gamma * v)).chain((0..n).map(|i| (i, i, 1.0))).collect::<Vec<_>>(),
        );
        let si = shift_invert_expmv(
            |v| {
                let x = conjugate_gradient(|u| shifted.matvec(u), &shifted.diagonal(), v, 1e-15, 10_000)?;
                Ok((x.clone(), x))
            },
            gamma,
            &b,
            &b,
            &times,
            1e-12,
            n,
        )
        .unwrap();
        for (k, row) in exact.iter().enumerate() {
            for (i, e) in row.iter().enumerate() {
                assert!((poly.values[k][i] - e).abs() < 1e-10, "poly t={} i={i}", times[k]);
                assert!((si.values[k][i] - e).abs() < 1e-10, "si t={} i={i}", times[k]);
            }
        }
    }

    #[test]
    fn lanczos_reports_non_convergence() {
        let a = path_laplacian(200);
        let mut b = vec![0.0; 200];
        b[0] = 1.0;
        let err = lanczos_expmv(|x| Ok(a.matvec(x)), &b, &[50.0], 1e-14, 5).unwrap_err();
        assert!(err.to_string().contains("did not converge"));
    }

    #[test]
    fn cg_solves_spd_system() {
        let mut a = path_laplacian(30);
        a = CsrMatrix::from_triplets(
            30,
            30,
            &a.triplets().chain((0..30).map(|i| (i, i, 0.5))).collect::<Vec<_>>(),
        );
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = conjugate_gradient(|v| a.matvec(v), &a.diagonal(), &b, 1e-12, 200).unwrap();
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-10);
        }
    }

    #[test]
    fn generalized_eigen_is_m_orthonormal() {
        let k = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (vals, v) = generalized_eigen(&k, &m).unwrap();
        assert!(vals[0] <= vals[1]);
        let g = v.transpose() * &m * &v;
        assert!((g - DMatrix::identity(2, 2)).abs().max() < 1e-12);
        let r = &k * &v - &m * &v * DMatrix::from_diagonal(&DVector::from_vec(vals));
        assert!(r.abs().max() < 1e-12);
    }
}
