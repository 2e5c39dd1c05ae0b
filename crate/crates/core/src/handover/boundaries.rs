use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Directional cell boundaries `B` and the unordered neighbour pairs `B'`.
///
/// Both lists are kept in lexicographic order; that order defines the action
/// layout (directional) and the pair block of the state vector (unordered).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundarySet {
    n_cells: usize,
    directed: Vec<(usize, usize)>,
    pairs: Vec<(usize, usize)>,
    directed_index: Vec<Option<usize>>,
    pair_index: Vec<Option<usize>>,
    neighbors: Vec<Vec<usize>>,
}

impl BoundarySet {
    /// Builds the set from unordered neighbour pairs; each pair yields both directions.
    pub fn from_pairs(
        n_cells: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut directed = BTreeSet::new();
        for (n, m) in pairs {
            directed.insert((n, m));
            directed.insert((m, n));
        }
        Self::from_directed(n_cells, directed)
    }

    /// Builds the set from directional boundaries, which must be closed under reversal.
    pub fn from_directed(
        n_cells: usize,
        directed: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let directed: BTreeSet<(usize, usize)> = directed.into_iter().collect();
        for &(n, m) in &directed {
            if n == m {
                return Err(Error::Config(format!(
                    "boundary ({n},{m}) joins a cell to itself"
                )));
            }
            if n >= n_cells || m >= n_cells {
                return Err(Error::Config(format!(
                    "boundary ({n},{m}) references a cell outside 0..{n_cells}"
                )));
            }
            if !directed.contains(&(m, n)) {
                return Err(Error::Config(format!(
                    "boundary ({n},{m}) present without its reverse ({m},{n})"
                )));
            }
        }
        let directed: Vec<(usize, usize)> = directed.into_iter().collect();
        let pairs: Vec<(usize, usize)> = directed.iter().copied().filter(|(n, m)| n < m).collect();
        let mut directed_index = vec![None; n_cells * n_cells];
        for (i, &(n, m)) in directed.iter().enumerate() {
            directed_index[n * n_cells + m] = Some(i);
        }
        let mut pair_index = vec![None; n_cells * n_cells];
        for (i, &(n, m)) in pairs.iter().enumerate() {
            pair_index[n * n_cells + m] = Some(i);
            pair_index[m * n_cells + n] = Some(i);
        }
        let mut neighbors = vec![Vec::new(); n_cells];
        for &(n, m) in &directed {
            neighbors[n].push(m);
        }
        Ok(BoundarySet {
            n_cells,
            directed,
            pairs,
            directed_index,
            pair_index,
            neighbors,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// `B`, the number of directional boundaries.
    pub fn len(&self) -> usize {
        self.directed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directed.is_empty()
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn directed(&self) -> &[(usize, usize)] {
        &self.directed
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn index_of(&self, source: usize, target: usize) -> Option<usize> {
        if source >= self.n_cells || target >= self.n_cells {
            return None;
        }
        self.directed_index[source * self.n_cells + target]
    }

    pub fn pair_index_of(&self, a: usize, b: usize) -> Option<usize> {
        if a >= self.n_cells || b >= self.n_cells {
            return None;
        }
        self.pair_index[a * self.n_cells + b]
    }

    pub fn neighbors(&self, cell: usize) -> &[usize] {
        &self.neighbors[cell]
    }
}
