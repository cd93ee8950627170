//! Dense route: Householder reduction to tridiagonal form, then the
//! bisection and inverse-iteration solver on the reduced matrix.

use nalgebra::{DMatrix, SymmetricTridiagonal};

use super::tridiag::Tridiagonal;
use super::Hamiltonian;

fn reduce(h: &Hamiltonian, with_q: bool) -> (Tridiagonal, Option<DMatrix<f64>>) {
    let n = h.dim();
    if n == 1 {
        return (Tridiagonal::new(h.diag().to_vec(), vec![]), with_q.then(|| DMatrix::identity(1, 1)));
    }
    let st = SymmetricTridiagonal::new(h.to_dense());
    if with_q {
        let (q, diag, off) = st.unpack();
        (Tridiagonal::new(diag.iter().copied().collect(), off.iter().copied().collect()), Some(q))
    } else {
        let (diag, off) = st.unpack_tridiagonal();
        (Tridiagonal::new(diag.iter().copied().collect(), off.iter().copied().collect()), None)
    }
}

/// Top-k pairs, eigenvalues decreasing.
pub(super) fn top_pairs(h: &Hamiltonian, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (t, q) = reduce(h, true);
    let q = q.expect("requested");
    let (vals, small) = t.top_pairs(k);
    let vecs = small
        .iter()
        .map(|y| {
            let mut v: Vec<f64> = (&q * nalgebra::DVector::from_column_slice(y)).iter().copied().collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            v
        })
        .collect();
    (vals, vecs)
}

/// The tridiagonal matrix orthogonally similar to `h`.
pub(super) fn reduced(h: &Hamiltonian) -> Tridiagonal {
    reduce(h, false).0
}

/// All eigenvalues, decreasing.
pub(super) fn all_values(h: &Hamiltonian) -> Vec<f64> {
    reduced(h).top_values(h.dim())
}
