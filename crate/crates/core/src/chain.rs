//! Dense expansion of translation-invariant operator-valued transfer matrices.

use crate::error::{Error, Result};
use crate::tensor::{Matrix, ONE};

/// Contracts `n_sites` copies of a level-to-level operator table between a
/// left level and a right level. Entries are `(from, to, operator)`.
pub(crate) fn dense_chain<'a, I>(
    entries: I,
    n_levels: usize,
    d: usize,
    n_sites: usize,
    left: usize,
    right: usize,
    cap: usize,
) -> Result<Matrix>
where
    I: IntoIterator<Item = (usize, usize, &'a Matrix)> + Clone,
{
    let dim = d.checked_pow(n_sites as u32).unwrap_or(usize::MAX);
    if dim > cap {
        return Err(Error::DenseCap { dim, cap });
    }
    let mut rows: Vec<Vec<(usize, &Matrix)>> = vec![Vec::new(); n_levels];
    for (i, j, op) in entries.clone() {
        rows[i].push((j, op));
    }
    let mut state: Vec<Option<Matrix>> = vec![None; n_levels];
    state[left] = Some(Matrix::from_element(1, 1, ONE));
    for _ in 0..n_sites {
        let mut next: Vec<Option<Matrix>> = vec![None; n_levels];
        for (i, m) in state.iter().enumerate() {
            let Some(m) = m else { continue };
            for &(j, op) in &rows[i] {
                let k = m.kronecker(op);
                match &mut next[j] {
                    Some(acc) => *acc += k,
                    slot => *slot = Some(k),
                }
            }
        }
        state = next;
    }
    Ok(state[right]
        .take()
        .unwrap_or_else(|| Matrix::zeros(dim, dim)))
}
