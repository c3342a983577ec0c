//! Laplacian eigen-dictionaries over topological spaces and the
//! accuracy-vs-complexity frontier of sparse spectral approximation.
//!
//! Both triangulations and glued cell complexes expose the same dual graph
//! (top-dimensional cells adjacent when they share an edge); its
//! combinatorial Laplacian `L = D - W` supplies an orthonormal basis sorted
//! by eigenvalue.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::topo::complex::CellComplex;
use crate::topo::delaunay::Triangulation;

/// View of a space as the dual graph over its top-dimensional cells.
pub trait DualGraph {
    fn cell_count(&self) -> usize;
    /// Undirected adjacency pairs with `i < j`.
    fn adjacent_cells(&self) -> Vec<(usize, usize)>;
}

impl DualGraph for Triangulation {
    fn cell_count(&self) -> usize {
        self.n_triangles()
    }

    fn adjacent_cells(&self) -> Vec<(usize, usize)> {
        self.adjacent_pairs()
    }
}

impl DualGraph for CellComplex {
    fn cell_count(&self) -> usize {
        self.n_cells()
    }

    fn adjacent_cells(&self) -> Vec<(usize, usize)> {
        self.adjacency().to_vec()
    }
}

/// Orthonormal Laplacian eigenbasis with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct SpectralDictionary {
    /// n x n matrix whose columns are the eigenvectors.
    atoms: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl SpectralDictionary {
    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Builds the dual-graph combinatorial Laplacian of a space.
pub fn dual_laplacian<S: DualGraph>(space: &S) -> DMatrix<f64> {
    let n = space.cell_count();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for (i, j) in space.adjacent_cells() {
        lap[(i, j)] = -1.0;
        lap[(j, i)] = -1.0;
        lap[(i, i)] += 1.0;
        lap[(j, j)] += 1.0;
    }
    lap
}

const EIGEN_MAX_ITERS: usize = 600;

/// Full orthonormal eigendecomposition of the dual-graph Laplacian, sorted by
/// ascending eigenvalue. Each eigenvector's sign is fixed so that its first
/// entry of nonnegligible magnitude is positive.
pub fn laplacian_dictionary<S: DualGraph>(space: &S) -> Result<SpectralDictionary> {
    let n = space.cell_count();
    if n == 0 {
        return Err(Error::invalid("space has no top-dimensional cells"));
    }
    let lap = dual_laplacian(space);
    let eig = nalgebra::linalg::SymmetricEigen::try_new(lap, f64::EPSILON, EIGEN_MAX_ITERS)
        .ok_or_else(|| {
            Error::numeric(format!(
                "symmetric eigensolver did not converge within {EIGEN_MAX_ITERS} QR iterations \
                 on a {n}x{n} Laplacian"
            ))
        })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    let mut atoms = DMatrix::<f64>::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(src).into();
        let max_abs = v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
        if let Some(first) = v.iter().find(|&&x| x.abs() > 1e-12 * max_abs.max(1.0)) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        atoms.set_column(col, &v);
        eigenvalues.push(eig.eigenvalues[src]);
    }
    Ok(SpectralDictionary { atoms, eigenvalues })
}

/// One point of the accuracy-vs-complexity frontier.
pub type FrontierPoint = (usize, f64);

/// Normalized squared error of the best `k`-atom approximation for each `k`.
///
/// For an orthonormal dictionary the optimal size-`k` subset keeps the `k`
/// largest-magnitude projection coefficients, so
/// `NSE(k) = sum(dropped c_i^2) / ||signal||^2`. Returned sorted by `k`.
pub fn nse_frontier(
    signal: &[f64],
    dict: &SpectralDictionary,
    ks: &[usize],
) -> Result<Vec<FrontierPoint>> {
    let n = dict.dim();
    if signal.len() != n {
        return Err(Error::invalid(format!(
            "signal length {} != dictionary dimension {n}",
            signal.len()
        )));
    }
    let energy: f64 = signal.iter().map(|s| s * s).sum();
    if energy <= 0.0 {
        return Err(Error::invalid("signal must have nonzero energy"));
    }
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::invalid(format!(
            "k = {bad} outside the valid range 1..={n}"
        )));
    }

    let coeffs = dict.atoms.tr_mul(&DVector::from_column_slice(signal));
    let mut squares: Vec<f64> = coeffs.iter().map(|c| c * c).collect();
    squares.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // dropped(k) = sum of the (n - k) smallest coefficient energies.
    let mut prefix = vec![0.0; n + 1];
    for (i, &s) in squares.iter().enumerate() {
        prefix[i + 1] = prefix[i] + s;
    }

    let mut frontier: Vec<FrontierPoint> = ks
        .iter()
        .map(|&k| (k, prefix[n - k] / energy))
        .collect();
    frontier.sort_by_key(|&(k, _)| k);
    Ok(frontier)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::complex::glue_cells;
    use crate::topo::delaunay::build_triangulation;
    use crate::topo::image::GrayImage;

    /// Hand-assembled path complex with 3 cells: 0 - 1 - 2.
    fn path3() -> CellComplex {
        CellComplex::from_parts(
            vec![vec![0], vec![1], vec![2]],
            vec![(0, 1), (1, 2)],
            vec![0.2, 0.5, 0.9],
        )
        .unwrap()
    }

    #[test]
    fn path_laplacian_eigenvalues() {
        let dict = laplacian_dictionary(&path3()).unwrap();
        let expected = [0.0, 1.0, 3.0];
        for (l, e) in dict.eigenvalues().iter().zip(expected) {
            assert!((l - e).abs() < 1e-10, "eigenvalue {l} != {e}");
        }
    }

    #[test]
    fn single_cell_dictionary_is_identity() {
        let complex =
            CellComplex::from_parts(vec![vec![0]], vec![], vec![0.3]).unwrap();
        let dict = laplacian_dictionary(&complex).unwrap();
        assert_eq!(dict.dim(), 1);
        assert!((dict.atoms()[(0, 0)] - 1.0).abs() < 1e-14);
        assert!(dict.eigenvalues()[0].abs() < 1e-14);
    }

    #[test]
    fn connected_space_has_one_zero_eigenvalue_with_constant_vector() {
        let img = GrayImage::constant(10, 10, 0.5).unwrap();
        let tri = build_triangulation(&img, 16, 1).unwrap();
        let dict = laplacian_dictionary(&tri).unwrap();
        let n = dict.dim();
        assert!(dict.eigenvalues()[0].abs() < 1e-9);
        assert!(dict.eigenvalues()[1] > 1e-9, "rectangle dual graph is connected");
        let first = dict.atoms().column(0);
        let expected = 1.0 / (n as f64).sqrt();
        for &x in first.iter() {
            assert!((x - expected).abs() < 1e-8, "kernel vector must be constant");
        }
    }

    #[test]
    fn atoms_are_orthonormal() {
        let img = GrayImage::constant(8, 8, 0.1).unwrap();
        let tri = build_triangulation(&img, 10, 5).unwrap();
        let complex = glue_cells(&tri, 2).unwrap();
        let _ = complex;
        let dict = laplacian_dictionary(&tri).unwrap();
        let gram = dict.atoms().tr_mul(dict.atoms());
        let n = dict.dim();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[(i, j)] - expect).abs() < 1e-8,
                    "gram[{i},{j}] = {}",
                    gram[(i, j)]
                );
            }
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero_and_psd() {
        let img = GrayImage::constant(8, 8, 0.9).unwrap();
        let tri = build_triangulation(&img, 12, 3).unwrap();
        let lap = dual_laplacian(&tri);
        for i in 0..lap.nrows() {
            let row_sum: f64 = lap.row(i).iter().sum();
            assert!(row_sum.abs() < 1e-12);
        }
        let dict = laplacian_dictionary(&tri).unwrap();
        assert!(dict.eigenvalues().iter().all(|&l| l >= -1e-10));
    }

    #[test]
    fn constant_signal_needs_one_atom() {
        let complex = CellComplex::from_parts(
            vec![vec![0], vec![1], vec![2], vec![3]],
            vec![(0, 1), (1, 2), (2, 3), (0, 3)],
            vec![0.6; 4],
        )
        .unwrap();
        let dict = laplacian_dictionary(&complex).unwrap();
        let frontier = nse_frontier(complex.signal(), &dict, &[1]).unwrap();
        assert!(frontier[0].1 < 1e-12, "constant signal spans the kernel atom");
    }

    #[test]
    fn full_basis_reaches_zero_error() {
        let dict = laplacian_dictionary(&path3()).unwrap();
        let frontier = nse_frontier(&[0.3, -0.1, 0.7], &dict, &[3]).unwrap();
        assert!(frontier[0].1 <= 1e-10);
    }

    #[test]
    fn zero_signal_is_rejected() {
        let dict = laplacian_dictionary(&path3()).unwrap();
        assert!(matches!(
            nse_frontier(&[0.0, 0.0, 0.0], &dict, &[1]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn greedy_matches_exhaustive_subset_search_n5() {
        // 5-cell ring with a chord; generic signal.
        let complex = CellComplex::from_parts(
            vec![vec![0], vec![1], vec![2], vec![3], vec![4]],
            vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)],
            vec![0.9, 0.05, 0.55, 0.3, 0.75],
        )
        .unwrap();
        let dict = laplacian_dictionary(&complex).unwrap();
        let signal = [0.34, -0.6, 0.12, 0.88, -0.27];
        let energy: f64 = signal.iter().map(|s| s * s).sum();
        let coeffs = dict.atoms().tr_mul(&DVector::from_column_slice(&signal));

        for k in 1..=5usize {
            let greedy = nse_frontier(&signal, &dict, &[k]).unwrap()[0].1;
            // Exhaustive best subset of size k.
            let mut best = f64::INFINITY;
            for mask in 0u32..32 {
                if mask.count_ones() as usize != k {
                    continue;
                }
                let kept: f64 = (0..5)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| coeffs[i] * coeffs[i])
                    .sum();
                best = best.min((energy - kept) / energy);
            }
            assert!(
                (greedy - best).abs() < 1e-12,
                "k = {k}: greedy {greedy} vs exhaustive {best}"
            );
        }
    }

    #[test]
    fn frontier_sorted_and_non_increasing() {
        let dict = laplacian_dictionary(&path3()).unwrap();
        let frontier = nse_frontier(&[0.9, 0.1, 0.4], &dict, &[3, 1, 2]).unwrap();
        assert_eq!(frontier.iter().map(|f| f.0).collect::<Vec<_>>(), [1, 2, 3]);
        assert!(frontier.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-15));
    }
}
