//! Orthogonal matching pursuit with multiple-measurement support.

use nalgebra::DMatrix;

use crate::linalg::solve_hermitian;
use crate::{Error, Result, C64};

#[derive(Debug, Clone)]
pub struct OmpOutput {
    /// Selected atom indices in selection order.
    pub support: Vec<usize>,
    /// Least-squares coefficients, `|support| x T`.
    pub coefficients: DMatrix<C64>,
    /// Residual Frobenius norm before the first and after every iteration.
    pub residual_norms: Vec<f64>,
    /// Atoms rejected because they made the selected set rank deficient.
    pub dropped: Vec<usize>,
}

impl OmpOutput {
    /// Energy `Σ_t |x_{s,t}|²` of every selected atom.
    pub fn atom_energies(&self) -> Vec<f64> {
        self.coefficients.row_iter().map(|r| r.norm_squared()).collect()
    }
}

/// Runs `k` OMP iterations of `observations` (`N x T`) over `atoms` (`N x G`).
///
/// Each iteration picks the atom with the largest residual correlation power
/// summed over the `T` measurement vectors, then refits all selected atoms by
/// least squares.
pub fn omp(atoms: &DMatrix<C64>, observations: &DMatrix<C64>, k: usize) -> Result<OmpOutput> {
    let g = atoms.ncols();
    if k == 0 {
        return Err(Error::InvalidParameter("sparsity must be >= 1".into()));
    }
    if k > g {
        return Err(Error::InvalidParameter(format!("sparsity {k} exceeds {g} atoms")));
    }
    if observations.nrows() != atoms.nrows() {
        return Err(Error::DimensionMismatch { expected: atoms.nrows(), actual: observations.nrows() });
    }
    let col_energy: Vec<f64> = atoms.column_iter().map(|c| c.norm_squared()).collect();
    let total = observations.norm_squared();
    let corr0 = atoms.ad_mul(observations);
    // cross[j][s] = ⟨a_j, a_{support[s]}⟩
    let mut cross: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut support: Vec<usize> = Vec::with_capacity(k);
    let mut excluded = vec![false; g];
    let mut dropped = Vec::new();
    let mut coeffs = DMatrix::zeros(0, observations.ncols());
    let mut residual_norms = vec![total.sqrt()];
    let mut residual_corr = corr0.clone();

    while support.len() < k {
        let mut best = None;
        let mut best_power = f64::NEG_INFINITY;
        for j in 0..g {
            if excluded[j] || col_energy[j] == 0.0 {
                continue;
            }
            let p = residual_corr.row(j).norm_squared() / col_energy[j];
            if p > best_power {
                best_power = p;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        excluded[j] = true;

        let col = atoms.column(j);
        let new_cross: Vec<C64> = (0..g).map(|i| atoms.column(i).dotc(&col)).collect();
        let n = support.len() + 1;
        let gram = DMatrix::from_fn(n, n, |a, b| {
            let ib = if b < n - 1 { &cross[b] } else { &new_cross };
            let ia = if a < n - 1 { support[a] } else { j };
            ib[ia]
        });
        let rhs = DMatrix::from_fn(n, observations.ncols(), |a, t| {
            let ia = if a < n - 1 { support[a] } else { j };
            corr0[(ia, t)]
        });
        let Some(x) = solve_hermitian(&gram, &rhs) else {
            dropped.push(j);
            continue;
        };
        support.push(j);
        cross.push(new_cross);
        coeffs = x;

        // residual correlation = A^H Y - A^H A_S X
        residual_corr.copy_from(&corr0);
        for (s, c) in cross.iter().enumerate() {
            let xs = coeffs.row(s);
            for i in 0..g {
                let ci = c[i];
                for t in 0..observations.ncols() {
                    residual_corr[(i, t)] -= ci * xs[t];
                }
            }
        }
        // ‖Y - A_S X‖² = ‖Y‖² - Re tr(Xᴴ A_Sᴴ Y) at the least-squares optimum.
        let captured: f64 = (0..support.len())
            .map(|s| (0..observations.ncols()).map(|t| (coeffs[(s, t)].conj() * rhs[(s, t)]).re).sum::<f64>())
            .sum();
        residual_norms.push((total - captured).max(0.0).sqrt());
    }

    if support.is_empty() {
        return Err(Error::InvalidParameter("no usable atoms".into()));
    }
    Ok(OmpOutput { support, coefficients: coeffs, residual_norms, dropped })
}
