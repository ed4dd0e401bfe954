//! Optimal partial transport between persistence measures.
//!
//! `OT_{p,q}(mu, nu)` lets mass appear and vanish on the diagonal. Appending to
//! `mu` a diagonal sink holding the mass of `nu` (and vice versa) turns it into
//! a balanced transportation problem on `(m + 1) x (n + 1)` nodes, solved here
//! exactly with a primal network simplex.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{diagonal_distance_unchecked, DomainGeometry, Order};
use crate::measures::{locate, Atom, PersistenceMeasure};

/// Largest total atom count accepted by [`brute_force_ot`].
pub const BRUTE_FORCE_CAP: usize = 8;

/// Index used for the diagonal sink in plans and plan dumps.
pub const SINK: i64 = -1;

/// Ground cost `||x - y||_q^p` between off-diagonal points.
fn pair_cost(a: &Atom, b: &Atom, p: f64, q: Order) -> f64 {
    q.norm(a.birth - b.birth, a.death - b.death).powf(p)
}

fn diagonal_cost(a: &Atom, p: f64, q: Order) -> f64 {
    diagonal_distance_unchecked(a.birth, a.death, q).powf(p)
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "transport exponent p must be finite and >= 1, got {p}"
        )))
    }
}

/// One entry of a coupling; [`SINK`] stands for the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanEntry {
    pub source: i64,
    pub target: i64,
    pub mass: f64,
    pub cost: f64,
}

/// An optimal coupling between two diagonal-augmented measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub sources: Vec<Atom>,
    pub targets: Vec<Atom>,
    pub entries: Vec<PlanEntry>,
    pub p: f64,
    pub q: Order,
    /// `sum mass * cost`, the `p`-th power of the distance.
    pub total_cost: f64,
}

impl TransportPlan {
    /// Augmented marginal of a source index (`SINK` holds the mass of the targets).
    fn source_weight(&self, i: i64) -> f64 {
        if i == SINK {
            self.targets.iter().map(|a| a.weight).sum()
        } else {
            self.sources[i as usize].weight
        }
    }

    fn target_weight(&self, j: i64) -> f64 {
        if j == SINK {
            self.sources.iter().map(|a| a.weight).sum()
        } else {
            self.targets[j as usize].weight
        }
    }

    /// Largest marginal violation, relative to the total augmented mass.
    pub fn marginal_error(&self) -> f64 {
        let total = self.source_weight(SINK) + self.target_weight(SINK);
        let mut rows = vec![0.0; self.sources.len() + 1];
        let mut cols = vec![0.0; self.targets.len() + 1];
        for e in &self.entries {
            rows[(e.source + 1) as usize] += e.mass;
            cols[(e.target + 1) as usize] += e.mass;
        }
        let row_err = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r - self.source_weight(i as i64 - 1)).abs());
        let col_err = cols
            .iter()
            .enumerate()
            .map(|(j, c)| (c - self.target_weight(j as i64 - 1)).abs());
        row_err.chain(col_err).fold(0.0, f64::max) / total.max(f64::MIN_POSITIVE)
    }

    /// Checks nonnegativity, marginals and the reported cost.
    pub fn validate(&self, tolerance: f64) -> Result<()> {
        if let Some(e) = self.entries.iter().find(|e| !(e.mass >= 0.0)) {
            return Err(Error::Solver(format!(
                "negative flow {} on ({}, {})",
                e.mass, e.source, e.target
            )));
        }
        let err = self.marginal_error();
        if err > tolerance {
            return Err(Error::Solver(format!("marginals violated by {err:e}")));
        }
        let recomputed: f64 = self.entries.iter().map(|e| e.mass * e.cost).sum();
        if (recomputed - self.total_cost).abs() > tolerance * self.total_cost.max(f64::MIN_POSITIVE)
        {
            return Err(Error::Solver(format!(
                "plan cost {recomputed} differs from reported {}",
                self.total_cost
            )));
        }
        Ok(())
    }

    pub fn value(&self) -> f64 {
        self.total_cost.powf(1.0 / self.p)
    }

    /// CSV dump with columns `source_idx, target_idx, mass, cost`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["source_idx", "target_idx", "mass", "cost"])?;
        for e in &self.entries {
            writer.write_record([
                e.source.to_string(),
                e.target.to_string(),
                e.mass.to_string(),
                e.cost.to_string(),
            ])?;
        }
        writer
            .flush()
            .map_err(|err| Error::io(path.display().to_string(), err))?;
        Ok(())
    }
}

/// `OT_{p,q}(mu, nu)` and an optimal plan.
pub fn ot_distance(
    mu: &PersistenceMeasure,
    nu: &PersistenceMeasure,
    p: f64,
    q: Order,
) -> Result<(f64, TransportPlan)> {
    check_exponent(p)?;
    let sources = mu.atoms().to_vec();
    let targets = nu.atoms().to_vec();
    let (m, n) = (sources.len(), targets.len());
    let source_mass: Vec<f64> = sources
        .iter()
        .map(|a| a.weight)
        .chain(std::iter::once(nu.total_mass()))
        .collect();
    let target_mass: Vec<f64> = targets
        .iter()
        .map(|a| a.weight)
        .chain(std::iter::once(mu.total_mass()))
        .collect();
    let mut costs = Vec::with_capacity((m + 1) * (n + 1));
    for a in &sources {
        costs.extend(targets.iter().map(|b| pair_cost(a, b, p, q)));
        costs.push(diagonal_cost(a, p, q));
    }
    costs.extend(targets.iter().map(|b| diagonal_cost(b, p, q)));
    costs.push(0.0);
    if let Some(c) = costs.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite transport cost {c}"
        )));
    }

    let flows = network_simplex(&source_mass, &target_mass, &costs)?;
    let index = |i: usize, len: usize| if i == len { SINK } else { i as i64 };
    let mut entries: Vec<PlanEntry> = flows
        .into_iter()
        .map(|(i, j, mass)| PlanEntry {
            source: index(i, m),
            target: index(j, n),
            mass,
            cost: costs[i * (n + 1) + j],
        })
        .collect();
    entries.sort_by_key(|e| (e.source, e.target));
    let total_cost = entries.iter().map(|e| e.mass * e.cost).sum();
    let plan = TransportPlan {
        sources,
        targets,
        entries,
        p,
        q,
        total_cost,
    };
    plan.validate(1e-9)?;
    Ok((plan.value(), plan))
}

/// Exact optimum over all partial matchings of two unit-weight diagrams;
/// unmatched points pay their distance to the diagonal. `p = inf` gives the
/// bottleneck distance.
pub fn brute_force_ot(
    mu: &PersistenceMeasure,
    nu: &PersistenceMeasure,
    p: Order,
    q: Order,
) -> Result<f64> {
    let left = unit_atoms(mu)?;
    let right = unit_atoms(nu)?;
    let total = left.len() + right.len();
    if total > BRUTE_FORCE_CAP {
        return Err(Error::SizeCap {
            cap: BRUTE_FORCE_CAP,
            got: total,
        });
    }
    let exponent = match p {
        Order::Finite(p) => {
            check_exponent(p)?;
            p
        }
        Order::Infinity => 1.0,
    };
    let combine = |acc: f64, c: f64| match p {
        Order::Finite(_) => acc + c,
        Order::Infinity => acc.max(c),
    };
    let mut used = vec![false; right.len()];
    let mut best = f64::INFINITY;
    search(
        &left, &right, 0, 0.0, &mut used, exponent, q, &combine, &mut best,
    );
    Ok(match p {
        Order::Finite(p) => best.powf(1.0 / p),
        Order::Infinity => best,
    })
}

#[allow(clippy::too_many_arguments)]
fn search(
    left: &[Atom],
    right: &[Atom],
    i: usize,
    acc: f64,
    used: &mut [bool],
    p: f64,
    q: Order,
    combine: &dyn Fn(f64, f64) -> f64,
    best: &mut f64,
) {
    if i == left.len() {
        let total = right
            .iter()
            .zip(used.iter())
            .filter(|(_, u)| !**u)
            .fold(acc, |acc, (b, _)| combine(acc, diagonal_cost(b, p, q)));
        *best = best.min(total);
        return;
    }
    let a = &left[i];
    search(
        left,
        right,
        i + 1,
        combine(acc, diagonal_cost(a, p, q)),
        used,
        p,
        q,
        combine,
        best,
    );
    for j in 0..right.len() {
        if !used[j] {
            used[j] = true;
            let c = pair_cost(a, &right[j], p, q);
            search(
                left,
                right,
                i + 1,
                combine(acc, c),
                used,
                p,
                q,
                combine,
                best,
            );
            used[j] = false;
        }
    }
}

/// Expands integer weights into repeated unit atoms.
fn unit_atoms(measure: &PersistenceMeasure) -> Result<Vec<Atom>> {
    let mut out = Vec::new();
    for a in measure.atoms() {
        if a.weight.fract() != 0.0 || a.weight > BRUTE_FORCE_CAP as f64 {
            return Err(Error::InvalidInput(format!(
                "brute-force matching needs integer multiplicities, got weight {}",
                a.weight
            )));
        }
        out.extend(std::iter::repeat_n(
            Atom::unit(a.birth, a.death),
            a.weight as usize,
        ));
    }
    Ok(out)
}

/// Right-hand side of the multiscale transport bound,
///
/// ```text
/// 2^(p/2) R^p sum_k 2^-kp [ 2^-Jp min(mu(A_k), nu(A_k)) + c_p |mu(A_k) - nu(A_k)|
///                           + sum_{j=1..J} 2^-jp sum_{Q in Q_{k,j-1}} |mu(Q) - nu(Q)| ]
/// ```
///
/// with `c_p = 2^(-p/2) (1 + 1/(2^p - 1))`, computed from the strips and
/// cells of the `l_2` partition.
pub fn multiscale_upper_bound(
    mu: &PersistenceMeasure,
    nu: &PersistenceMeasure,
    geom: &DomainGeometry,
    depth: usize,
    p: f64,
) -> Result<f64> {
    check_exponent(p)?;
    if depth == 0 {
        return Err(Error::InvalidInput("the bound needs J >= 1".into()));
    }
    // signed masses: strips under j = usize::MAX, cells under their level
    let mut strips: std::collections::BTreeMap<usize, (f64, f64)> = Default::default();
    let mut cells: std::collections::HashMap<(usize, usize, u64, u64), f64> = Default::default();
    for (measure, sign) in [(mu, 1.0), (nu, -1.0)] {
        for atom in measure.atoms() {
            let Some((u, v, k)) = locate(atom, geom) else {
                return Err(Error::OutsideDomain {
                    t1: atom.birth,
                    t2: atom.death,
                    radius: geom.radius(),
                });
            };
            let entry = strips.entry(k).or_default();
            if sign > 0.0 {
                entry.0 += atom.weight;
            } else {
                entry.1 += atom.weight;
            }
            for j in 0..depth {
                let cell = crate::geometry::cell_at_unit(u, v, k, j);
                *cells.entry((k, j, cell.m, cell.n)).or_default() += sign * atom.weight;
            }
        }
    }
    let c_p = 2f64.powf(-p / 2.0) * (1.0 + 1.0 / (2f64.powf(p) - 1.0));
    let mut per_strip: std::collections::BTreeMap<usize, f64> = strips
        .iter()
        .map(|(&k, &(a, b))| {
            (
                k,
                2f64.powf(-(depth as f64) * p) * a.min(b) + c_p * (a - b).abs(),
            )
        })
        .collect();
    for (&(k, j, _, _), diff) in &cells {
        *per_strip.entry(k).or_default() += 2f64.powf(-((j + 1) as f64) * p) * diff.abs();
    }
    let sum: f64 = per_strip
        .iter()
        .map(|(&k, term)| 2f64.powf(-(k as f64) * p) * term)
        .sum();
    Ok(2f64.powf(p / 2.0) * geom.radius().powf(p) * sum)
}

/// Flows of an optimal solution of the dense transportation problem
/// `min sum c_ij x_ij` with row sums `supply` and column sums `demand`,
/// returned as `(row, column, flow)` for every positive flow.
pub fn network_simplex(
    supply: &[f64],
    demand: &[f64],
    costs: &[f64],
) -> Result<Vec<(usize, usize, f64)>> {
    let (m, n) = (supply.len(), demand.len());
    if costs.len() != m * n {
        return Err(Error::InvalidInput(format!(
            "cost matrix has {} entries, expected {m} x {n}",
            costs.len()
        )));
    }
    if m == 0 || n == 0 {
        return Ok(Vec::new());
    }
    let scale = costs.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let mut solver = Simplex::new(supply, demand, costs, if scale > 0.0 { scale } else { 1.0 });
    solver.run()?;
    Ok(solver.flows())
}

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;
const NONE: usize = usize::MAX;
const REDUCED_COST_EPS: f64 = 1e-12;

/// Primal network simplex on the complete bipartite graph rows -> columns,
/// with spanning-tree bookkeeping by parent, thread and successor counts.
///
/// Node `i < m` is row `i`, node `m + j` is column `j` and node `m + n` is an
/// extra root attached to row 0 by a zero-cost arc that never carries flow.
/// Arc `i * n + j` joins row `i` to column `j`; arc `m * n` is the root arc.
struct Simplex<'a> {
    m: usize,
    n: usize,
    costs: &'a [f64],
    scale: f64,
    flow: Vec<f64>,
    state: Vec<i8>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    dirty_revs: Vec<usize>,
    block_size: usize,
    next_arc: usize,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

impl<'a> Simplex<'a> {
    fn new(supply: &[f64], demand: &[f64], costs: &'a [f64], scale: f64) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let arcs = m * n;
        let nodes = m + n + 1;
        let mut s = Simplex {
            m,
            n,
            costs,
            scale,
            flow: vec![0.0; arcs + 1],
            state: vec![STATE_LOWER; arcs + 1],
            parent: vec![NONE; nodes],
            pred: vec![NONE; nodes],
            pred_dir: vec![DIR_UP; nodes],
            thread: vec![NONE; nodes],
            rev_thread: vec![NONE; nodes],
            succ_num: vec![1; nodes],
            last_succ: vec![NONE; nodes],
            pi: vec![0.0; nodes],
            dirty_revs: Vec::new(),
            block_size: ((arcs as f64).sqrt().ceil() as usize).max(10),
            next_arc: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };
        s.northwest_corner(supply, demand);
        s
    }

    fn root(&self) -> usize {
        self.m + self.n
    }

    fn source(&self, arc: usize) -> usize {
        if arc == self.m * self.n {
            self.root()
        } else {
            arc / self.n
        }
    }

    fn target(&self, arc: usize) -> usize {
        if arc == self.m * self.n {
            0
        } else {
            self.m + arc % self.n
        }
    }

    fn cost(&self, arc: usize) -> f64 {
        if arc == self.m * self.n {
            0.0
        } else {
            self.costs[arc] / self.scale
        }
    }

    /// Staircase basis: a feasible spanning tree of `m + n - 1` arcs.
    fn northwest_corner(&mut self, supply: &[f64], demand: &[f64]) {
        let (m, n) = (self.m, self.n);
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); m + n + 1];
        let (mut i, mut j) = (0, 0);
        let (mut left, mut right) = (supply[0], demand[0]);
        loop {
            let arc = i * n + j;
            let x = left.min(right);
            self.flow[arc] = x;
            self.state[arc] = STATE_TREE;
            adjacency[i].push(arc);
            adjacency[m + j].push(arc);
            if i == m - 1 && j == n - 1 {
                break;
            }
            if (left <= right && i < m - 1) || j == n - 1 {
                right -= x;
                i += 1;
                left = supply[i];
            } else {
                left -= x;
                j += 1;
                right = demand[j];
            }
        }
        // the remainders of the last cell absorb rounding in the marginals
        let root = self.root();
        let root_arc = m * n;
        self.state[root_arc] = STATE_TREE;
        adjacency[root].push(root_arc);
        adjacency[0].push(root_arc);

        // depth-first traversal from the root sets every tree array
        self.parent[root] = NONE;
        self.pred[root] = NONE;
        self.pi[root] = 0.0;
        let mut order = Vec::with_capacity(m + n + 1);
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            order.push(u);
            for &arc in adjacency[u].iter().rev() {
                let (s, t) = (self.source(arc), self.target(arc));
                let w = if s == u { t } else { s };
                if w == self.parent[u] && arc == self.pred[u] {
                    continue;
                }
                self.parent[w] = u;
                self.pred[w] = arc;
                if s == w {
                    // arc points from w up to u: c + pi_w - pi_u = 0
                    self.pred_dir[w] = DIR_UP;
                    self.pi[w] = self.pi[u] - self.cost(arc);
                } else {
                    self.pred_dir[w] = DIR_DOWN;
                    self.pi[w] = self.pi[u] + self.cost(arc);
                }
                stack.push(w);
            }
        }
        debug_assert_eq!(order.len(), m + n + 1);
        for pair in order.windows(2) {
            self.thread[pair[0]] = pair[1];
            self.rev_thread[pair[1]] = pair[0];
        }
        let last = *order.last().expect("nonempty");
        self.thread[last] = root;
        self.rev_thread[root] = last;
        for &u in order.iter().rev() {
            if self.last_succ[u] == NONE {
                self.last_succ[u] = u;
            }
            if self.parent[u] != NONE {
                let p = self.parent[u];
                self.succ_num[p] += self.succ_num[u];
                if self.last_succ[p] == NONE {
                    // the last child visited in preorder holds the subtree end
                    self.last_succ[p] = self.last_succ[u];
                }
            }
        }
    }

    fn reduced_cost(&self, arc: usize) -> f64 {
        self.cost(arc) + self.pi[self.source(arc)] - self.pi[self.target(arc)]
    }

    /// Block search: the most negative reduced cost among the next block.
    fn find_entering_arc(&mut self) -> bool {
        let arcs = self.m * self.n;
        let mut min = -REDUCED_COST_EPS;
        let mut found = NONE;
        let mut count = self.block_size;
        let mut e = self.next_arc;
        for _ in 0..arcs {
            if self.state[e] == STATE_LOWER {
                let c = self.reduced_cost(e);
                if c < min {
                    min = c;
                    found = e;
                }
            }
            e += 1;
            if e == arcs {
                e = 0;
            }
            count -= 1;
            if count == 0 {
                if found != NONE {
                    break;
                }
                count = self.block_size;
            }
        }
        if found == NONE {
            return false;
        }
        self.in_arc = found;
        self.next_arc = e;
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Ratio test on the cycle; all arcs are uncapacitated so only arcs whose
    /// flow decreases can leave.
    fn find_leaving_arc(&mut self) -> Result<()> {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        if result == 0 {
            return Err(Error::Solver(
                "unbounded cycle in a transportation problem".into(),
            ));
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        Ok(())
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0.0 {
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= f64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += f64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.flow[out] = 0.0;
        self.state[out] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // re-hang the stem from u_in up to u_out below v_in
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // reverse pred, pred_dir, succ_num and last_succ along the stem
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            let mut p = self.parent[u];
            while u != u_in {
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
                p = self.parent[u];
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in {
            join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let sigma = self.pi[self.v_in]
            - self.pi[self.u_in]
            - f64::from(self.pred_dir[self.u_in]) * self.cost(self.in_arc);
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> Result<()> {
        let limit = 50 * (self.m * self.n + self.m + self.n) + 1000;
        let mut iterations = 0usize;
        while self.find_entering_arc() {
            self.find_join_node();
            self.find_leaving_arc()?;
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            iterations += 1;
            if iterations > limit {
                return Err(Error::Solver(format!(
                    "network simplex did not converge in {limit} pivots"
                )));
            }
        }
        Ok(())
    }

    fn flows(&self) -> Vec<(usize, usize, f64)> {
        (0..self.m * self.n)
            .filter(|&e| self.flow[e] > 0.0)
            .map(|e| (e / self.n, e % self.n, self.flow[e]))
            .collect()
    }
}
