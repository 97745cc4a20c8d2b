//! HDBSCAN with excess-of-mass cluster selection and GLOSH outlier scores.
//!
//! Brute-force distances and Prim's algorithm over the dense mutual-reachability graph; windows
//! here hold at most a few thousand documents.

use std::collections::VecDeque;

use super::{euclidean, normalize_labels, HdbscanParams, OUTLIER};

/// Cap for `1 / distance` so zero distances stay finite in stability sums.
const MAX_LAMBDA: f64 = 1e150;

#[derive(Debug, Clone, PartialEq)]
pub struct HdbscanOutput {
    pub labels: Vec<i32>,
    /// GLOSH score per point in `[0, 1]`; higher means more outlying.
    pub outlier_scores: Vec<f64>,
}

struct MergeNode {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

/// Condensed-tree edge. `child < n` is a point, otherwise a cluster id.
#[derive(Debug, Clone, Copy)]
struct CondensedEdge {
    parent: usize,
    child: usize,
    lambda: f64,
    size: usize,
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        (1.0 / distance).min(MAX_LAMBDA)
    } else {
        MAX_LAMBDA
    }
}

pub fn hdbscan_labels(points: &[Vec<f64>], params: &HdbscanParams) -> HdbscanOutput {
    let n = points.len();
    let mcs = params.min_cluster_size;
    if n < mcs || n < 2 {
        return HdbscanOutput {
            labels: vec![OUTLIER; n],
            outlier_scores: vec![0.0; n],
        };
    }

    let dist = distance_matrix(points);
    let core = core_distances(&dist, n, params.min_samples());
    let mst = prim_mst(&dist, &core, n);
    let hierarchy = single_linkage(mst, n);
    let condensed = condense(&hierarchy, n, mcs);
    let selected = select_eom(&condensed, n, params.allow_single_cluster);
    let labels = label_points(&condensed, &selected, n, params.allow_single_cluster);
    let outlier_scores = glosh(&condensed, n);
    HdbscanOutput {
        labels: normalize_labels(&labels),
        outlier_scores,
    }
}

fn distance_matrix(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(&points[i], &points[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Distance to the `k`-th nearest other point (self excluded); the farthest point when fewer
/// than `k` others exist.
fn core_distances(dist: &[f64], n: usize, k: usize) -> Vec<f64> {
    let k = k.clamp(1, n - 1);
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i * n + j]).collect();
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

/// Prim's algorithm on mutual reachability `max(core_a, core_b, d(a, b))`. Returns `(a, b, w)`
/// edges in insertion order.
fn prim_mst(dist: &[f64], core: &[f64], n: usize) -> Vec<(usize, usize, f64)> {
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let mr = dist[current * n + j].max(core[current]).max(core[j]);
            if mr < best[j] {
                best[j] = mr;
                from[j] = current;
            }
            if best[j] < next_w || next == usize::MAX {
                next_w = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((from[next], next, next_w));
        current = next;
    }
    edges
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

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Merge nodes `n..2n-1` of the single-linkage dendrogram, root last.
fn single_linkage(mut mst: Vec<(usize, usize, f64)>, n: usize) -> Vec<MergeNode> {
    mst.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut uf = UnionFind::new(2 * n - 1);
    let mut sizes = vec![1usize; 2 * n - 1];
    let mut nodes = Vec::with_capacity(n - 1);
    for (i, (a, b, w)) in mst.into_iter().enumerate() {
        let ra = uf.find(a);
        let rb = uf.find(b);
        let id = n + i;
        uf.parent[ra] = id;
        uf.parent[rb] = id;
        sizes[id] = sizes[ra] + sizes[rb];
        nodes.push(MergeNode {
            left: ra,
            right: rb,
            distance: w,
            size: sizes[id],
        });
    }
    nodes
}

fn leaves_under(hierarchy: &[MergeNode], n: usize, node: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        if x < n {
            out.push(x);
        } else {
            let m = &hierarchy[x - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    out
}

/// Walks the dendrogram top-down. A split where both sides hold at least `mcs` points creates
/// two child clusters; smaller sides shed their points from the current cluster.
fn condense(hierarchy: &[MergeNode], n: usize, mcs: usize) -> Vec<CondensedEdge> {
    let root = 2 * n - 2;
    let size_of = |x: usize| if x < n { 1 } else { hierarchy[x - n].size };
    let mut edges = Vec::new();
    let mut next_label = n + 1;
    // (dendrogram node, cluster it currently belongs to)
    let mut queue = VecDeque::from([(root, n)]);
    while let Some((node, cluster)) = queue.pop_front() {
        if node < n {
            continue;
        }
        let m = &hierarchy[node - n];
        let lambda = lambda_of(m.distance);
        let (ls, rs) = (size_of(m.left), size_of(m.right));
        match (ls >= mcs, rs >= mcs) {
            (true, true) => {
                for (child, size) in [(m.left, ls), (m.right, rs)] {
                    let label = next_label;
                    next_label += 1;
                    edges.push(CondensedEdge {
                        parent: cluster,
                        child: label,
                        lambda,
                        size,
                    });
                    queue.push_back((child, label));
                }
            }
            (big_left, big_right) => {
                for (child, big) in [(m.left, big_left), (m.right, big_right)] {
                    if big {
                        queue.push_back((child, cluster));
                    } else {
                        for p in leaves_under(hierarchy, n, child) {
                            edges.push(CondensedEdge {
                                parent: cluster,
                                child: p,
                                lambda,
                                size: 1,
                            });
                        }
                    }
                }
            }
        }
    }
    edges
}

fn num_clusters(condensed: &[CondensedEdge], n: usize) -> usize {
    condensed.iter().map(|e| e.parent.max(e.child)).filter(|&c| c >= n).max().map_or(1, |m| m - n + 1)
}

fn stabilities(condensed: &[CondensedEdge], n: usize) -> (Vec<f64>, Vec<Vec<usize>>) {
    let k = num_clusters(condensed, n);
    let mut birth = vec![0.0; k];
    let mut children = vec![Vec::new(); k];
    for e in condensed.iter().filter(|e| e.child >= n) {
        birth[e.child - n] = e.lambda;
        children[e.parent - n].push(e.child - n);
    }
    let mut stability = vec![0.0; k];
    for e in condensed {
        let c = e.parent - n;
        stability[c] += (e.lambda - birth[c]) * e.size as f64;
    }
    (stability, children)
}

/// Excess-of-mass selection. Returns selected cluster indices (relative to `n`). A parent wins
/// ties against its children.
fn select_eom(condensed: &[CondensedEdge], n: usize, allow_single_cluster: bool) -> Vec<bool> {
    let (mut stability, children) = stabilities(condensed, n);
    let k = stability.len();
    let mut selected = vec![true; k];
    if !allow_single_cluster {
        selected[0] = false;
    }
    let first = if allow_single_cluster { 0 } else { 1 };
    // children always carry larger ids than their parent
    for c in (first..k).rev() {
        let subtree: f64 = children[c].iter().map(|&ch| stability[ch]).sum();
        if subtree > stability[c] {
            selected[c] = false;
            stability[c] = subtree;
        } else {
            let mut stack = children[c].clone();
            while let Some(d) = stack.pop() {
                selected[d] = false;
                stack.extend(children[d].iter().copied());
            }
        }
    }
    if allow_single_cluster && k > 1 && selected[0] {
        // a selected root only makes sense if no child remains selected
        debug_assert!(selected[1..].iter().all(|s| !s));
    }
    selected
}

fn label_points(condensed: &[CondensedEdge], selected: &[bool], n: usize, allow_single: bool) -> Vec<i32> {
    let k = selected.len();
    let mut parent_of_cluster = vec![usize::MAX; k];
    let mut point_parent = vec![0usize; n];
    let mut point_lambda = vec![0.0; n];
    let mut root_max_lambda: f64 = 0.0;
    for e in condensed {
        if e.child >= n {
            parent_of_cluster[e.child - n] = e.parent - n;
        } else {
            point_parent[e.child] = e.parent - n;
            point_lambda[e.child] = e.lambda;
        }
        if e.parent == n {
            root_max_lambda = root_max_lambda.max(e.lambda);
        }
    }
    (0..n)
        .map(|p| {
            let mut c = point_parent[p];
            loop {
                if selected[c] {
                    if c == 0 && allow_single && point_lambda[p] < root_max_lambda && point_parent[p] == 0 {
                        return OUTLIER;
                    }
                    return c as i32;
                }
                if parent_of_cluster[c] == usize::MAX {
                    return OUTLIER;
                }
                c = parent_of_cluster[c];
            }
        })
        .collect()
}

/// GLOSH: `1 - lambda_p / lambda_max(C)` where `C` is the cluster the point leaves and
/// `lambda_max(C)` the largest exit lambda of any point below `C`.
fn glosh(condensed: &[CondensedEdge], n: usize) -> Vec<f64> {
    let k = num_clusters(condensed, n);
    let mut max_lambda = vec![0.0f64; k];
    let mut parent_of_cluster = vec![usize::MAX; k];
    for e in condensed {
        if e.child < n {
            max_lambda[e.parent - n] = max_lambda[e.parent - n].max(e.lambda);
        } else {
            parent_of_cluster[e.child - n] = e.parent - n;
        }
    }
    for c in (1..k).rev() {
        let p = parent_of_cluster[c];
        if p != usize::MAX {
            max_lambda[p] = max_lambda[p].max(max_lambda[c]);
        }
    }
    let mut scores = vec![0.0; n];
    for e in condensed.iter().filter(|e| e.child < n) {
        let m = max_lambda[e.parent - n];
        scores[e.child] = if m > 0.0 { (m - e.lambda) / m } else { 0.0 };
    }
    scores
}
