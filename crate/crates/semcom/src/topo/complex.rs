//! Gluing triangles of similar intensity into a polygonal cell complex.
//!
//! Triangle signals are quantized to uniform levels over [0, 1]; maximal
//! edge-connected groups of equal-level triangles become the top-dimensional
//! cells. Cell adjacency is inherited from the triangle adjacency crossing
//! cell boundaries.

use crate::error::{Error, Result};
use crate::topo::delaunay::Triangulation;

/// Polygonal complex over the top cells of a glued triangulation.
#[derive(Debug, Clone)]
pub struct CellComplex {
    /// Constituent triangle indices per cell (sorted).
    cells: Vec<Vec<usize>>,
    /// Symmetric, irreflexive adjacency as sorted `(i, j)` pairs, `i < j`.
    adjacency: Vec<(usize, usize)>,
    /// Per-cell intensity in [0, 1].
    signal: Vec<f64>,
}

impl CellComplex {
    pub fn from_parts(
        cells: Vec<Vec<usize>>,
        adjacency: Vec<(usize, usize)>,
        signal: Vec<f64>,
    ) -> Result<Self> {
        if signal.len() != cells.len() {
            return Err(Error::invalid("signal length != cell count"));
        }
        if adjacency
            .iter()
            .any(|&(i, j)| i >= j || j >= cells.len())
        {
            return Err(Error::invalid("adjacency pairs must satisfy i < j < cells"));
        }
        if signal.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::invalid("cell signal must lie in [0, 1]"));
        }
        Ok(CellComplex {
            cells,
            adjacency,
            signal,
        })
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn adjacency(&self) -> &[(usize, usize)] {
        &self.adjacency
    }

    pub fn signal(&self) -> &[f64] {
        &self.signal
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }
}

/// Uniform quantization to `n_levels` bins over [0, 1]; values exactly on a
/// bin boundary go to the upper bin, and 1.0 stays in the top bin.
fn quantize(s: f64, n_levels: usize) -> usize {
    ((s * n_levels as f64).floor() as usize).min(n_levels - 1)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins, keeping component ids stable.
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Glues edge-adjacent triangles with equal labels into cells and builds the
/// cell complex with area-weighted signals.
fn glue_by_labels(tri: &Triangulation, labels: &[usize]) -> CellComplex {
    let n = tri.n_triangles();
    let pairs = tri.adjacent_pairs();

    let mut uf = UnionFind::new(n);
    for &(a, b) in &pairs {
        if labels[a] == labels[b] {
            uf.union(a, b);
        }
    }

    // Dense cell ids in order of first appearance (lowest triangle index).
    let mut cell_of = vec![usize::MAX; n];
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for t in 0..n {
        let root = uf.find(t);
        if cell_of[root] == usize::MAX {
            cell_of[root] = cells.len();
            cells.push(Vec::new());
        }
        let c = cell_of[root];
        cell_of[t] = c;
        cells[c].push(t);
    }
    let cell_id = |t: usize, uf: &mut UnionFind| -> usize { cell_of[uf.find(t)] };

    let mut signal = vec![0.0; cells.len()];
    let mut area = vec![0.0; cells.len()];
    for t in 0..n {
        let c = cell_id(t, &mut uf);
        let a = tri.triangle_area(t);
        signal[c] += a * tri.signal()[t];
        area[c] += a;
    }
    for (s, a) in signal.iter_mut().zip(&area) {
        *s = if *a > 0.0 { (*s / *a).clamp(0.0, 1.0) } else { 0.0 };
    }

    let mut adjacency: Vec<(usize, usize)> = pairs
        .iter()
        .filter_map(|&(a, b)| {
            let (ca, cb) = (cell_id(a, &mut uf), cell_id(b, &mut uf));
            (ca != cb).then(|| (ca.min(cb), ca.max(cb)))
        })
        .collect();
    adjacency.sort_unstable();
    adjacency.dedup();

    CellComplex::from_parts(cells, adjacency, signal).expect("construction preserves invariants")
}

/// Quantizes the triangle signal to `n_levels` uniform levels and merges
/// equal-level neighbors into maximal cells.
pub fn glue_cells(tri: &Triangulation, n_levels: usize) -> Result<CellComplex> {
    if n_levels < 2 {
        return Err(Error::invalid("n_levels must be at least 2"));
    }
    let labels: Vec<usize> = tri.signal().iter().map(|&s| quantize(s, n_levels)).collect();
    Ok(glue_by_labels(tri, &labels))
}

/// Gluing in the no-quantization limit: triangles merge only on exactly
/// equal signal values. For generic signals nothing merges and the result is
/// isomorphic to the triangulation's dual graph.
pub fn glue_cells_exact(tri: &Triangulation) -> CellComplex {
    let mut distinct: Vec<f64> = tri.signal().to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let labels: Vec<usize> = tri
        .signal()
        .iter()
        .map(|s| distinct.partition_point(|d| d < s))
        .collect();
    glue_by_labels(tri, &labels)
}
