//! Primal network simplex for capacitated min-cost flow.
//!
//! Big-M start from an artificial root, block-search pricing for the entering
//! arc and the strongly-feasible-tree leaving rule (last blocking arc met when
//! walking the pivot cycle from its apex). Strongly feasible trees rule out
//! cycling under any entering rule, and the pivot sequence is a deterministic
//! function of the input.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Arc {
    pub tail: usize,
    pub head: usize,
    pub cost: f64,
    /// `f64::INFINITY` for an uncapacitated arc.
    pub cap: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Network {
    /// Net supply per node; must sum to zero.
    pub supply: Vec<f64>,
    pub arcs: Vec<Arc>,
}

pub(crate) struct Flow {
    pub flow: Vec<f64>,
    pub pivots: usize,
}

struct Tree {
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    /// Tree arcs incident to each node.
    adj: Vec<Vec<usize>>,
}

impl Tree {
    /// Hangs `w` from `v` through `arc` with zero reduced cost.
    fn attach(&mut self, w: usize, v: usize, a: usize, arc: &Arc) {
        self.parent[w] = v;
        self.parent_arc[w] = a;
        self.depth[w] = self.depth[v] + 1;
        // cost - pi[tail] + pi[head] = 0
        self.potential[w] = if arc.tail == w {
            arc.cost + self.potential[v]
        } else {
            self.potential[v] - arc.cost
        };
    }

    /// Replaces tree arc `leave` (above `cut`) by `enter`, whose endpoint
    /// `inside` lies in the subtree of `cut`, and re-roots that subtree.
    fn rehang(&mut self, cut: usize, leave: usize, enter: usize, inside: usize, arcs: &[Arc]) {
        let l = arcs[leave];
        self.adj[l.tail].retain(|&a| a != leave);
        self.adj[l.head].retain(|&a| a != leave);
        let e = arcs[enter];
        self.adj[e.tail].push(enter);
        self.adj[e.head].push(enter);
        debug_assert!({
            let mut v = inside;
            while v != cut && self.parent[v] != NONE {
                v = self.parent[v];
            }
            v == cut
        });

        let outside = if e.tail == inside { e.head } else { e.tail };
        self.attach(inside, outside, enter, &e);
        let mut queue = std::collections::VecDeque::from([inside]);
        while let Some(v) = queue.pop_front() {
            for k in 0..self.adj[v].len() {
                let a = self.adj[v][k];
                if a == self.parent_arc[v] {
                    continue;
                }
                let arc = arcs[a];
                let w = if arc.tail == v { arc.head } else { arc.tail };
                self.attach(w, v, a, &arc);
                queue.push_back(w);
            }
        }
    }
}

const NONE: usize = usize::MAX;

pub(crate) fn min_cost_flow(net: &Network) -> Result<Flow> {
    let n = net.supply.len();
    let root = n;
    let n_real = net.arcs.len();

    let max_cost = net.arcs.iter().fold(1.0f64, |a, arc| a.max(arc.cost.abs()));
    let scale_flow = net.supply.iter().map(|s| s.abs()).sum::<f64>().max(1.0);
    let flow_tol = 1e-12 * scale_flow;
    let rc_tol = 1e-11 * max_cost;
    // exceeds the cost of any simple path through the real arcs
    let big_m = 2.0 * (n as f64 + 1.0) * max_cost + 1.0;

    let mut arcs = net.arcs.clone();
    let mut flow = vec![0.0; n_real];
    for (v, &b) in net.supply.iter().enumerate() {
        if b >= 0.0 {
            arcs.push(Arc { tail: v, head: root, cost: big_m, cap: f64::INFINITY });
            flow.push(b);
        } else {
            arcs.push(Arc { tail: root, head: v, cost: big_m, cap: f64::INFINITY });
            flow.push(-b);
        }
    }
    let mut in_tree = vec![false; arcs.len()];
    for flag in in_tree.iter_mut().skip(n_real) {
        *flag = true;
    }

    let mut tree = rebuild(n + 1, root, &arcs, &in_tree);
    let max_pivots = 10_000 + 50 * arcs.len() * (n + 1);
    let mut pivots = 0usize;
    let block = ((arcs.len() as f64).sqrt().ceil() as usize).max(8);
    let mut next_block = 0usize;

    loop {
        // block pricing: most violating arc of the first block (cyclic from
        // `next_block`) that holds any violation
        let violation = |a: usize| -> Option<(f64, bool)> {
            if in_tree[a] {
                return None;
            }
            let arc = &arcs[a];
            let rc = arc.cost - tree.potential[arc.tail] + tree.potential[arc.head];
            if flow[a] <= flow_tol && rc < -rc_tol {
                Some((-rc, true))
            } else if arc.cap.is_finite() && flow[a] >= arc.cap - flow_tol && rc > rc_tol {
                Some((rc, false))
            } else {
                None
            }
        };
        let m = arcs.len();
        let mut entering: Option<(usize, bool)> = None;
        let mut best = 0.0;
        for step in 0..m {
            let a = (next_block + step) % m;
            if let Some((v, fwd)) = violation(a) {
                if v > best {
                    best = v;
                    entering = Some((a, fwd));
                }
            }
            if (step + 1) % block == 0 && entering.is_some() {
                next_block = (a + 1) % m;
                break;
            }
        }
        let Some((enter, forward)) = entering else { break };

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Solver { iterations: pivots });
        }

        let (from, to) = if forward {
            (arcs[enter].tail, arcs[enter].head)
        } else {
            (arcs[enter].head, arcs[enter].tail)
        };

        // climb to the apex; `down` is traversed apex -> from, `up` is to -> apex
        let mut down = Vec::new();
        let mut up = Vec::new();
        let (mut a, mut b) = (from, to);
        while a != b {
            if tree.depth[a] >= tree.depth[b] {
                down.push(a);
                a = tree.parent[a];
            } else {
                up.push(b);
                b = tree.parent[b];
            }
        }

        // residual of the tree arc above `x` when flow moves parent -> x (downward) or x -> parent
        let residual = |x: usize, downward: bool, flow: &[f64]| -> f64 {
            let arc_idx = tree.parent_arc[x];
            let arc = &arcs[arc_idx];
            let along = if downward { arc.head == x } else { arc.tail == x };
            if along {
                arc.cap - flow[arc_idx]
            } else {
                flow[arc_idx]
            }
        };
        let enter_residual = if forward {
            arcs[enter].cap - flow[enter]
        } else {
            flow[enter]
        };

        let mut theta = enter_residual;
        for &x in &down {
            theta = theta.min(residual(x, true, &flow));
        }
        for &x in &up {
            theta = theta.min(residual(x, false, &flow));
        }
        if !theta.is_finite() {
            return Err(Error::Solver { iterations: pivots });
        }

        // last blocking arc: scan the traversal order backwards
        #[derive(Clone, Copy)]
        enum Leave {
            Entering,
            Node(usize, bool),
        }
        let mut leaving = None;
        for &x in up.iter().rev() {
            if residual(x, false, &flow) <= theta + flow_tol {
                leaving = Some(Leave::Node(x, false));
                break;
            }
        }
        if leaving.is_none() && enter_residual <= theta + flow_tol {
            leaving = Some(Leave::Entering);
        }
        if leaving.is_none() {
            for &x in down.iter() {
                if residual(x, true, &flow) <= theta + flow_tol {
                    leaving = Some(Leave::Node(x, true));
                    break;
                }
            }
        }
        let leaving = leaving.expect("a blocking arc attains theta");

        if theta > 0.0 {
            let mut push = |arc_idx: usize, along: bool| {
                if along {
                    flow[arc_idx] += theta;
                } else {
                    flow[arc_idx] -= theta;
                }
            };
            push(enter, forward);
            for &x in &down {
                let arc_idx = tree.parent_arc[x];
                push(arc_idx, arcs[arc_idx].head == x);
            }
            for &x in &up {
                let arc_idx = tree.parent_arc[x];
                push(arc_idx, arcs[arc_idx].tail == x);
            }
        }

        match leaving {
            Leave::Entering => {
                flow[enter] = if forward { arcs[enter].cap } else { 0.0 };
            }
            Leave::Node(x, downward) => {
                let arc_idx = tree.parent_arc[x];
                let arc = &arcs[arc_idx];
                let along = if downward { arc.head == x } else { arc.tail == x };
                flow[arc_idx] = if along { arc.cap } else { 0.0 };
                in_tree[arc_idx] = false;
                in_tree[enter] = true;
                // the subtree below `x` now hangs from the entering arc
                let inside = if downward { from } else { to };
                tree.rehang(x, arc_idx, enter, inside, &arcs);
            }
        }
    }

    if let Some(v) = (n_real..arcs.len()).find(|&a| flow[a] > flow_tol) {
        return Err(Error::InvalidInput(format!(
            "flow network is infeasible at node {}",
            v - n_real
        )));
    }
    flow.truncate(n_real);
    for f in flow.iter_mut() {
        if f.abs() <= flow_tol {
            *f = 0.0;
        }
    }
    Ok(Flow { flow, pivots })
}

fn rebuild(n_nodes: usize, root: usize, arcs: &[Arc], in_tree: &[bool]) -> Tree {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (a, arc) in arcs.iter().enumerate() {
        if in_tree[a] {
            adj[arc.tail].push(a);
            adj[arc.head].push(a);
        }
    }
    let mut tree = Tree {
        parent: vec![NONE; n_nodes],
        parent_arc: vec![NONE; n_nodes],
        depth: vec![0; n_nodes],
        potential: vec![0.0; n_nodes],
        adj,
    };
    let mut seen = vec![false; n_nodes];
    seen[root] = true;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for k in 0..tree.adj[v].len() {
            let a = tree.adj[v][k];
            let arc = arcs[a];
            let w = if arc.tail == v { arc.head } else { arc.tail };
            if seen[w] {
                continue;
            }
            seen[w] = true;
            tree.attach(w, v, a, &arc);
            queue.push_back(w);
        }
    }
    debug_assert!(seen.iter().all(|&s| s), "tree must span every node");
    tree
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arc(tail: usize, head: usize, cost: f64, cap: f64) -> Arc {
        Arc { tail, head, cost, cap }
    }

    #[test]
    fn picks_cheaper_route() {
        let net = Network {
            supply: vec![2.0, 0.0, -2.0],
            arcs: vec![
                arc(0, 2, 5.0, f64::INFINITY),
                arc(0, 1, 1.0, f64::INFINITY),
                arc(1, 2, 1.0, f64::INFINITY),
            ],
        };
        let f = min_cost_flow(&net).unwrap();
        assert_eq!(f.flow, vec![0.0, 2.0, 2.0]);
    }

    #[test]
    fn respects_capacity() {
        let net = Network {
            supply: vec![3.0, 0.0, -3.0],
            arcs: vec![
                arc(0, 2, 5.0, f64::INFINITY),
                arc(0, 1, 1.0, 1.0),
                arc(1, 2, 1.0, f64::INFINITY),
            ],
        };
        let f = min_cost_flow(&net).unwrap();
        assert_eq!(f.flow, vec![2.0, 1.0, 1.0]);
    }

    #[test]
    fn negative_cost_capped_arcs_saturate() {
        let net = Network {
            supply: vec![4.0, -4.0],
            arcs: vec![arc(0, 1, -1.0, 3.0), arc(0, 1, 1.0, f64::INFINITY)],
        };
        let f = min_cost_flow(&net).unwrap();
        assert_eq!(f.flow, vec![3.0, 1.0]);
    }

    #[test]
    fn infeasible_network_reported() {
        let net = Network {
            supply: vec![1.0, -1.0],
            arcs: vec![arc(1, 0, 1.0, f64::INFINITY)],
        };
        assert!(min_cost_flow(&net).is_err());
    }
}
