//! Minimum-cost circulation by negative-cycle canceling, sized for
//! envy graphs (tens of nodes, unit capacities, integer costs).

pub(crate) struct FlowNetwork {
    n: usize,
    // edges stored in pairs: 2k forward, 2k+1 reverse
    to: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<i64>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        FlowNetwork { n, to: Vec::new(), cap: Vec::new(), cost: Vec::new(), adj: vec![Vec::new(); n] }
    }

    /// Adds a directed edge; returns its id for later flow queries.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        let id = self.to.len();
        self.to.push(to);
        self.cap.push(cap);
        self.cost.push(cost);
        self.adj[from].push(id);
        self.to.push(from);
        self.cap.push(0);
        self.cost.push(-cost);
        self.adj[to].push(id + 1);
        id
    }

    /// Units of flow routed through edge `id`.
    pub fn flow_on(&self, id: usize) -> i64 {
        self.cap[id ^ 1]
    }

    /// Cancels negative-cost residual cycles until none remain, leaving
    /// a minimum-cost circulation. Integer costs guarantee termination.
    pub fn cancel_negative_cycles(&mut self) {
        while let Some(cycle_edges) = self.find_negative_cycle() {
            let bottleneck =
                cycle_edges.iter().map(|&e| self.cap[e]).min().expect("cycle nonempty");
            debug_assert!(bottleneck > 0);
            for &e in &cycle_edges {
                self.cap[e] -= bottleneck;
                self.cap[e ^ 1] += bottleneck;
            }
        }
    }

    /// Bellman-Ford over the residual graph from a virtual source at
    /// distance 0 to every node. Returns the edge ids of one negative
    /// cycle, if any.
    fn find_negative_cycle(&self) -> Option<Vec<usize>> {
        let mut dist = vec![0i64; self.n];
        let mut pred_edge = vec![usize::MAX; self.n];
        let mut updated_node = None;
        for round in 0..self.n {
            updated_node = None;
            for u in 0..self.n {
                for &e in &self.adj[u] {
                    if self.cap[e] <= 0 {
                        continue;
                    }
                    let v = self.to[e];
                    if dist[u] + self.cost[e] < dist[v] {
                        dist[v] = dist[u] + self.cost[e];
                        pred_edge[v] = e;
                        updated_node = Some(v);
                    }
                }
            }
            if updated_node.is_none() {
                return None;
            }
            let _ = round;
        }
        // A node relaxed on round n is reachable from a negative cycle;
        // walking n predecessors lands inside it.
        let mut v = updated_node?;
        for _ in 0..self.n {
            v = self.tail_of(pred_edge[v]);
        }
        let start = v;
        let mut edges = Vec::new();
        let mut cur = start;
        loop {
            let e = pred_edge[cur];
            edges.push(e);
            cur = self.tail_of(e);
            if cur == start {
                break;
            }
        }
        edges.reverse();
        Some(edges)
    }

    fn tail_of(&self, edge: usize) -> usize {
        self.to[edge ^ 1]
    }
}
