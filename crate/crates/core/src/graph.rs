//! Spatial structure of a market: cells, shortest-path transport costs and
//! dispatch neighborhoods.
//!
//! Cells are opaque indices `0..n_cells`. Travel costs are derived from a
//! weighted directed edge list by all-pairs shortest paths; a pair with no
//! connecting path is *unreachable*, which is represented explicitly (`None`)
//! rather than by a large finite cost.

use crate::error::{Error, Result};

/// A weighted directed edge `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(from: usize, to: usize, weight: f64) -> Self {
        Edge { from, to, weight }
    }
}

/// Dense `n x n` matrix of cheapest-path costs. `None` marks an unreachable pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<Option<f64>>,
}

impl CostMatrix {
    /// Builds a matrix from explicit rows. Rows must be square.
    pub fn from_rows(rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("cost matrix rows must all have length n"));
        }
        Ok(CostMatrix {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.data[i * self.n + j]
    }

    pub fn is_reachable(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_some()
    }

    /// Every finite off-diagonal entry as an edge.
    pub fn to_edges(&self) -> Vec<Edge> {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    if let Some(c) = self.get(i, j) {
                        edges.push(Edge::new(i, j, c));
                    }
                }
            }
        }
        edges
    }

    pub fn rows(&self) -> Vec<Vec<Option<f64>>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    /// Largest finite entry; `0.0` for an edgeless graph.
    pub fn max_finite(&self) -> f64 {
        self.data.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }
}

fn check_edges(edges: &[Edge], n_cells: usize) -> Result<()> {
    for e in edges {
        if e.from >= n_cells || e.to >= n_cells {
            return Err(Error::invalid(format!(
                "edge ({}, {}) references a cell outside 0..{}",
                e.from, e.to, n_cells
            )));
        }
        if !e.weight.is_finite() || e.weight < 0.0 {
            return Err(Error::invalid(format!(
                "edge ({}, {}) has weight {}; weights must be finite and nonnegative",
                e.from, e.to, e.weight
            )));
        }
    }
    Ok(())
}

/// All-pairs cheapest path costs (Floyd-Warshall).
pub fn shortest_path_costs(edges: &[Edge], n_cells: usize) -> Result<CostMatrix> {
    if n_cells == 0 {
        return Err(Error::invalid("n_cells must be at least 1"));
    }
    check_edges(edges, n_cells)?;

    let n = n_cells;
    let mut d: Vec<Option<f64>> = vec![None; n * n];
    for i in 0..n {
        d[i * n + i] = Some(0.0);
    }
    for e in edges {
        let slot = &mut d[e.from * n + e.to];
        *slot = Some(match *slot {
            Some(c) => c.min(e.weight),
            None => e.weight,
        });
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = d[i * n + k] else { continue };
            for j in 0..n {
                let Some(kj) = d[k * n + j] else { continue };
                let via = ik + kj;
                let slot = &mut d[i * n + j];
                match *slot {
                    Some(c) if c <= via => {}
                    _ => *slot = Some(via),
                }
            }
        }
    }
    Ok(CostMatrix { n, data: d })
}

/// `N_i = { j : c_ij <= radius }`. Each set is sorted and always contains `i`.
pub fn build_neighborhoods(costs: &CostMatrix, dispatch_radius: f64) -> Result<Vec<Vec<usize>>> {
    if dispatch_radius.is_nan() || dispatch_radius < 0.0 {
        return Err(Error::invalid(format!(
            "dispatch radius must be nonnegative, got {dispatch_radius}"
        )));
    }
    Ok((0..costs.n())
        .map(|i| {
            (0..costs.n())
                .filter(|&j| j == i || costs.get(i, j).is_some_and(|c| c <= dispatch_radius))
                .collect()
        })
        .collect())
}

/// Cells, travel costs and dispatch neighborhoods of one market.
///
/// Immutable once built: `c_ii = 0`, `i ∈ N_i`, and every `j ∈ N_i` is reachable from `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGraph {
    n_cells: usize,
    edges: Vec<Edge>,
    costs: CostMatrix,
    neighborhoods: Vec<Vec<usize>>,
}

impl CellGraph {
    /// Graph whose neighborhoods follow the dispatch-radius rule.
    pub fn from_edges(n_cells: usize, edges: Vec<Edge>, dispatch_radius: f64) -> Result<Self> {
        let costs = shortest_path_costs(&edges, n_cells)?;
        let neighborhoods = build_neighborhoods(&costs, dispatch_radius)?;
        Ok(CellGraph {
            n_cells,
            edges,
            costs,
            neighborhoods,
        })
    }

    /// Graph with explicitly supplied neighborhoods.
    ///
    /// Each `N_i` must contain `i` and only cells reachable from `i`.
    pub fn with_neighborhoods(
        n_cells: usize,
        edges: Vec<Edge>,
        neighborhoods: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let costs = shortest_path_costs(&edges, n_cells)?;
        if neighborhoods.len() != n_cells {
            return Err(Error::invalid(format!(
                "expected {} neighborhoods, got {}",
                n_cells,
                neighborhoods.len()
            )));
        }
        let mut normalized = Vec::with_capacity(n_cells);
        for (i, mut hood) in neighborhoods.into_iter().enumerate() {
            hood.sort_unstable();
            hood.dedup();
            if hood.binary_search(&i).is_err() {
                return Err(Error::invalid(format!("neighborhood of cell {i} must contain {i}")));
            }
            if let Some(&j) = hood.iter().find(|&&j| j >= n_cells || !costs.is_reachable(i, j)) {
                return Err(Error::invalid(format!(
                    "cell {j} in the neighborhood of {i} is not reachable from it"
                )));
            }
            normalized.push(hood);
        }
        Ok(CellGraph {
            n_cells,
            edges,
            costs,
            neighborhoods: normalized,
        })
    }

    /// Skips neighborhood validation. Only used to exercise solver error paths.
    #[cfg(test)]
    pub(crate) fn from_parts_unchecked(
        n_cells: usize,
        costs: CostMatrix,
        neighborhoods: Vec<Vec<usize>>,
    ) -> Self {
        CellGraph {
            n_cells,
            edges: costs.to_edges(),
            costs,
            neighborhoods,
        }
    }

    /// Same edges, neighborhoods rebuilt for a new dispatch radius.
    pub fn with_radius(&self, dispatch_radius: f64) -> Result<Self> {
        Ok(CellGraph {
            n_cells: self.n_cells,
            edges: self.edges.clone(),
            costs: self.costs.clone(),
            neighborhoods: build_neighborhoods(&self.costs, dispatch_radius)?,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cost_matrix(&self) -> &CostMatrix {
        &self.costs
    }

    pub fn cost(&self, i: usize, j: usize) -> Option<f64> {
        self.costs.get(i, j)
    }

    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.neighborhoods[i]
    }

    pub fn neighborhoods(&self) -> &[Vec<usize>] {
        &self.neighborhoods
    }
}

/// A `rows x cols` 4-connected lattice with bidirectional edges of weight
/// `unit_cost`. Cell `(r, c)` has index `r * cols + c`; neighborhoods hold the
/// cell itself and its orthogonal neighbors.
pub fn grid_graph(rows: usize, cols: usize, unit_cost: f64) -> Result<CellGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("grid must have at least one row and one column"));
    }
    if !unit_cost.is_finite() || unit_cost < 0.0 {
        return Err(Error::invalid(format!("unit cost must be nonnegative, got {unit_cost}")));
    }
    let idx = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    let mut hoods = vec![Vec::new(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let here = idx(r, c);
            hoods[here].push(here);
            if c + 1 < cols {
                edges.push(Edge::new(here, idx(r, c + 1), unit_cost));
                edges.push(Edge::new(idx(r, c + 1), here, unit_cost));
            }
            if r + 1 < rows {
                edges.push(Edge::new(here, idx(r + 1, c), unit_cost));
                edges.push(Edge::new(idx(r + 1, c), here, unit_cost));
            }
            if c > 0 {
                hoods[here].push(idx(r, c - 1));
            }
            if c + 1 < cols {
                hoods[here].push(idx(r, c + 1));
            }
            if r > 0 {
                hoods[here].push(idx(r - 1, c));
            }
            if r + 1 < rows {
                hoods[here].push(idx(r + 1, c));
            }
        }
    }
    CellGraph::with_neighborhoods(rows * cols, edges, hoods)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Cheapest simple path by exhaustive DFS; independent of Floyd-Warshall.
    fn enumerate_paths(edges: &[Edge], n: usize, from: usize, to: usize) -> Option<f64> {
        fn dfs(
            edges: &[Edge],
            at: usize,
            to: usize,
            seen: &mut Vec<bool>,
            acc: f64,
            best: &mut Option<f64>,
        ) {
            if at == to {
                *best = Some(best.map_or(acc, |b: f64| b.min(acc)));
                return;
            }
            for e in edges.iter().filter(|e| e.from == at) {
                if !seen[e.to] {
                    seen[e.to] = true;
                    dfs(edges, e.to, to, seen, acc + e.weight, best);
                    seen[e.to] = false;
                }
            }
        }
        let mut seen = vec![false; n];
        seen[from] = true;
        let mut best = None;
        dfs(edges, from, to, &mut seen, 0.0, &mut best);
        best
    }

    #[test]
    fn single_cell_without_edges() {
        let c = shortest_path_costs(&[], 1).unwrap();
        assert_eq!(c.rows(), vec![vec![Some(0.0)]]);
    }

    #[test]
    fn two_cells_single_hop() {
        let c = shortest_path_costs(&[Edge::new(0, 1, 1.0), Edge::new(1, 0, 1.0)], 2).unwrap();
        assert_eq!(c.rows(), vec![vec![Some(0.0), Some(1.0)], vec![Some(1.0), Some(0.0)]]);
    }

    #[test]
    fn three_cell_line_relays_through_middle() {
        let edges = vec![
            Edge::new(0, 1, 1.0),
            Edge::new(1, 0, 1.0),
            Edge::new(1, 2, 1.0),
            Edge::new(2, 1, 1.0),
        ];
        let c = shortest_path_costs(&edges, 3).unwrap();
        assert_eq!(c.get(0, 2), enumerate_paths(&edges, 3, 0, 2));
        assert_eq!(c.get(0, 2), Some(2.0));
    }

    #[test]
    fn negative_weight_rejected() {
        let err = shortest_path_costs(&[Edge::new(0, 1, -1.0)], 2).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn unreachable_is_explicit() {
        let c = shortest_path_costs(&[Edge::new(0, 1, 3.0)], 2).unwrap();
        assert_eq!(c.get(1, 0), None);
        assert_eq!(c.get(0, 1), Some(3.0));
    }

    #[test]
    fn zero_radius_is_self_only() {
        let g = grid_graph(2, 2, 1.0).unwrap().with_radius(0.0).unwrap();
        for i in 0..4 {
            assert_eq!(g.neighborhood(i), &[i]);
        }
    }

    #[test]
    fn unit_radius_on_grid_excludes_diagonals() {
        let g = grid_graph(2, 2, 1.0).unwrap();
        let by_radius = g.with_radius(1.0).unwrap();
        assert_eq!(by_radius.neighborhood(0), &[0, 1, 2]);
        assert_eq!(by_radius.neighborhood(3), &[1, 2, 3]);
        assert_eq!(g.neighborhoods(), by_radius.neighborhoods());
    }

    #[test]
    fn saturating_radius_reaches_everything_reachable() {
        let edges = vec![Edge::new(0, 1, 1.0), Edge::new(1, 2, 5.0)];
        let g = CellGraph::from_edges(4, edges, 1e9).unwrap();
        assert_eq!(g.neighborhood(0), &[0, 1, 2]);
        assert_eq!(g.neighborhood(2), &[2]);
        assert_eq!(g.neighborhood(3), &[3]);
    }

    #[test]
    fn grid_costs() {
        let g = grid_graph(1, 1, 1.0).unwrap();
        assert_eq!(g.cost_matrix().rows(), vec![vec![Some(0.0)]]);

        let g = grid_graph(2, 2, 1.0).unwrap();
        let mut ones = 0;
        let mut twos = 0;
        for i in 0..4 {
            for j in 0..4 {
                let c = g.cost(i, j).unwrap();
                assert_eq!(Some(c), if i == j { Some(0.0) } else { enumerate_paths(g.edges(), 4, i, j) });
                if c == 1.0 {
                    ones += 1;
                } else if c == 2.0 {
                    twos += 1;
                }
            }
        }
        // ordered pairs: 8 orthogonal, 4 diagonal
        assert_eq!((ones, twos), (8, 4));

        let g = grid_graph(1, 3, 2.0).unwrap();
        assert_eq!(g.cost(0, 2), Some(4.0));
        assert_eq!(g.cost(0, 2), enumerate_paths(g.edges(), 3, 0, 2));
    }

    #[test]
    fn grid_rejects_empty() {
        assert!(grid_graph(0, 3, 1.0).is_err());
        assert!(grid_graph(3, 0, 1.0).is_err());
    }

    #[test]
    fn explicit_neighborhoods_validated() {
        let edges = vec![Edge::new(0, 1, 1.0)];
        assert!(CellGraph::with_neighborhoods(2, edges.clone(), vec![vec![1], vec![1]]).is_err());
        assert!(CellGraph::with_neighborhoods(2, edges.clone(), vec![vec![0], vec![1, 0]]).is_err());
        let g = CellGraph::with_neighborhoods(2, edges, vec![vec![1, 0, 1], vec![1]]).unwrap();
        assert_eq!(g.neighborhood(0), &[0, 1]);
    }

    fn edge_list(n: usize) -> impl Strategy<Value = Vec<Edge>> {
        prop::collection::vec((0..n, 0..n, 0u32..10), 0..12).prop_map(|v| {
            v.into_iter()
                .map(|(a, b, w)| Edge::new(a, b, w as f64))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn closure_invariants(edges in edge_list(4)) {
            let c = shortest_path_costs(&edges, 4).unwrap();
            for i in 0..4 {
                prop_assert_eq!(c.get(i, i), Some(0.0));
                for j in 0..4 {
                    let expect = if i == j { Some(0.0) } else { enumerate_paths(&edges, 4, i, j) };
                    prop_assert_eq!(c.get(i, j), expect);
                    for k in 0..4 {
                        if let (Some(ij), Some(ik), Some(kj)) = (c.get(i, j), c.get(i, k), c.get(k, j)) {
                            prop_assert!(ij <= ik + kj);
                        }
                    }
                }
            }
            for e in &edges {
                prop_assert!(c.get(e.from, e.to).unwrap() <= e.weight);
            }
            // closing an already-closed matrix changes nothing
            let again = shortest_path_costs(&c.to_edges(), 4).unwrap();
            prop_assert_eq!(again, c);
        }

        #[test]
        fn symmetric_weights_give_symmetric_costs(half in edge_list(4)) {
            let mut edges = half.clone();
            edges.extend(half.iter().map(|e| Edge::new(e.to, e.from, e.weight)));
            let c = shortest_path_costs(&edges, 4).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert_eq!(c.get(i, j), c.get(j, i));
                }
            }
        }

        #[test]
        fn neighborhoods_grow_with_radius(edges in edge_list(4), r1 in 0u32..20, dr in 0u32..20) {
            let c = shortest_path_costs(&edges, 4).unwrap();
            let small = build_neighborhoods(&c, r1 as f64).unwrap();
            let large = build_neighborhoods(&c, (r1 + dr) as f64).unwrap();
            for i in 0..4 {
                prop_assert!(small[i].contains(&i));
                prop_assert!(small[i].iter().all(|j| large[i].contains(j)));
                prop_assert!(large[i].iter().all(|&j| c.get(i, j).is_some()));
            }
        }
    }
}
