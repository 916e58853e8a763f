//! Cross-operator slot transfers within one region, solved as a small
//! min-cost flow.
//!
//! Operators with spare slots (`A < T`) are sources with capacity
//! `T - A`; operators with excess arrivals (`A > T`) are sinks whose k-th
//! received slot is worth the weight of their k-th best unserved client.
//! Because those marginal gains are non-increasing and transfer costs are
//! linear, successive shortest paths from an empty flow produce path costs in
//! non-decreasing order. Stopping at the first path that does not strictly
//! lower the objective gives the optimum over every flow value, with ties
//! resolved toward less sharing.
//!
//! With a single giver and a single receiver this reduces to taking the best
//! remaining client while its gain beats the transfer cost.

#[derive(Debug, Clone)]
pub(crate) struct TransferProblem {
    /// `(operator, capacity)` for each operator able to give.
    pub givers: Vec<(usize, u32)>,
    /// `(operator, gains)` for each operator able to receive; `gains` is
    /// sorted descending and its length is the receive capacity.
    pub receivers: Vec<(usize, Vec<f64>)>,
    /// `cost[giver operator][receiver operator]` per slot.
    pub cost: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: usize,
    cap: u32,
    cost: f64,
    rev: usize,
}

struct Graph {
    adj: Vec<Vec<Edge>>,
}

impl Graph {
    fn new(nodes: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: u32, cost: f64) -> (usize, usize) {
        let fwd = self.adj[from].len();
        let back = self.adj[to].len() + usize::from(from == to);
        self.adj[from].push(Edge {
            to,
            cap,
            cost,
            rev: back,
        });
        self.adj[to].push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
            rev: fwd,
        });
        (from, fwd)
    }

    /// Bellman-Ford over the residual graph. Returns distances and the
    /// `(node, edge index)` used to reach each node.
    fn shortest_paths(&self, source: usize) -> (Vec<f64>, Vec<Option<(usize, usize)>>) {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        dist[source] = 0.0;
        for _ in 1..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u] == f64::INFINITY {
                    continue;
                }
                for (k, e) in self.adj[u].iter().enumerate() {
                    if e.cap > 0 && dist[u] + e.cost < dist[e.to] {
                        dist[e.to] = dist[u] + e.cost;
                        pred[e.to] = Some((u, k));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (dist, pred)
    }
}

impl TransferProblem {
    /// Returns `flow[giver operator][receiver operator]`, sized by `cost`.
    pub fn solve(&self, cap: Option<u32>) -> Vec<Vec<u32>> {
        let n_ops = self.cost.len();
        let mut flow = vec![vec![0u32; n_ops]; n_ops];
        if self.givers.is_empty() || self.receivers.is_empty() {
            return flow;
        }
        let limit = |c: u32| cap.map_or(c, |l| c.min(l));

        let g = self.givers.len();
        let source = 0;
        let giver_node = |k: usize| 1 + k;
        let receiver_node = |k: usize| 1 + g + k;
        let sink = 1 + g + self.receivers.len();
        let mut graph = Graph::new(sink + 1);

        for (k, &(_, c)) in self.givers.iter().enumerate() {
            graph.add_edge(source, giver_node(k), limit(c), 0.0);
        }
        let mut pair_edges = Vec::new();
        for (gk, &(giver, c)) in self.givers.iter().enumerate() {
            for (rk, (receiver, gains)) in self.receivers.iter().enumerate() {
                let cap = limit(c).min(gains.len() as u32);
                if cap > 0 {
                    let at = graph.add_edge(giver_node(gk), receiver_node(rk), cap, self.cost[giver][*receiver]);
                    pair_edges.push((giver, *receiver, at));
                }
            }
        }
        for (rk, (_, gains)) in self.receivers.iter().enumerate() {
            let take = limit(gains.len() as u32) as usize;
            for &gain in &gains[..take] {
                graph.add_edge(receiver_node(rk), sink, 1, -gain);
            }
        }

        loop {
            let (dist, pred) = graph.shortest_paths(source);
            if dist[sink] >= 0.0 {
                break;
            }
            let mut path = Vec::new();
            let mut v = sink;
            while v != source {
                let Some((u, k)) = pred[v] else { break };
                path.push((u, k));
                v = u;
                if path.len() > graph.adj.len() {
                    break;
                }
            }
            if v != source {
                // unreachable for a consistent residual graph
                break;
            }
            for (u, k) in path {
                let e = graph.adj[u][k];
                graph.adj[u][k].cap -= 1;
                graph.adj[e.to][e.rev].cap += 1;
            }
        }

        for (giver, receiver, (u, k)) in pair_edges {
            let e = graph.adj[u][k];
            // flow on a forward edge is the capacity of its reverse edge
            flow[giver][receiver] = graph.adj[e.to][e.rev].cap;
        }
        flow
    }
}
