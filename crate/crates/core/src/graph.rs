//! Compressed bipartite graph of a parity-check matrix.

use crate::codebook::QcRaCode;

/// Edges are numbered check-major: the edges of check `c` are
/// `check_start[c]..check_start[c + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TannerGraph {
    n_vars: usize,
    check_start: Vec<u32>,
    edge_var: Vec<u32>,
    var_start: Vec<u32>,
    var_edges: Vec<u32>,
}

impl TannerGraph {
    /// Builds the graph from check rows; each row lists variable indices `< n_vars`.
    pub fn from_rows<I, R>(n_vars: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = usize>,
    {
        let mut check_start = vec![0u32];
        let mut edge_var = Vec::new();
        for row in rows {
            for v in row {
                assert!(v < n_vars, "variable {v} out of range");
                edge_var.push(v as u32);
            }
            check_start.push(edge_var.len() as u32);
        }
        let mut var_start = vec![0u32; n_vars + 1];
        for &v in &edge_var {
            var_start[v as usize + 1] += 1;
        }
        for v in 0..n_vars {
            var_start[v + 1] += var_start[v];
        }
        let mut fill = var_start.clone();
        let mut var_edges = vec![0u32; edge_var.len()];
        for (e, &v) in edge_var.iter().enumerate() {
            let slot = &mut fill[v as usize];
            var_edges[*slot as usize] = e as u32;
            *slot += 1;
        }
        TannerGraph {
            n_vars,
            check_start,
            edge_var,
            var_start,
            var_edges,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_checks(&self) -> usize {
        self.check_start.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.edge_var.len()
    }

    pub(crate) fn check_edges(&self, c: usize) -> std::ops::Range<usize> {
        self.check_start[c] as usize..self.check_start[c + 1] as usize
    }

    pub(crate) fn edge_var(&self) -> &[u32] {
        &self.edge_var
    }

    pub(crate) fn var_edges(&self, v: usize) -> &[u32] {
        &self.var_edges[self.var_start[v] as usize..self.var_start[v + 1] as usize]
    }

    /// Variables of check `c`.
    pub fn check(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.edge_var[self.check_edges(c)].iter().map(|&v| v as usize)
    }

    pub fn var_degree(&self, v: usize) -> usize {
        (self.var_start[v + 1] - self.var_start[v]) as usize
    }

    /// Unsatisfied checks for hard decisions given as 0/1 bytes.
    pub fn syndrome_weight(&self, hard: &[u8]) -> usize {
        (0..self.n_checks())
            .filter(|&c| !self.check_satisfied(c, hard))
            .count()
    }

    /// True when every check is satisfied; stops at the first violation.
    pub fn is_codeword(&self, hard: &[u8]) -> bool {
        (0..self.n_checks()).all(|c| self.check_satisfied(c, hard))
    }

    fn check_satisfied(&self, c: usize, hard: &[u8]) -> bool {
        self.edge_var[self.check_edges(c)]
            .iter()
            .fold(0u8, |acc, &v| acc ^ hard[v as usize])
            == 0
    }
}

impl QcRaCode {
    /// Tanner graph of `[H1 | A]`.
    pub fn tanner_graph(&self) -> TannerGraph {
        TannerGraph::from_rows(self.n(), (0..self.m()).map(|i| self.full_row(i)))
    }
}
