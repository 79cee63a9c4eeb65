//! Static k-d tree over 3D points.
//!
//! Every query is deterministic: results are ordered by distance and equal
//! distances are resolved in favour of the lower point index.

use crate::error::{Error, Result};
use crate::geometry::Point;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Immutable nearest-neighbour index. Safe to share between threads.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    coords: Vec<[f64; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn new(points: &[Point]) -> Self {
        let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut order: Vec<usize> = (0..coords.len()).collect();
        let mut nodes = Vec::with_capacity(2 * coords.len() / LEAF_SIZE + 1);
        if !coords.is_empty() {
            build(&coords, &mut order, 0, &mut nodes);
        }
        Self {
            coords,
            order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, index: usize) -> Point {
        let c = self.coords[index];
        Point::new(c[0], c[1], c[2])
    }

    /// The `min(k, n)` nearest points to `query` as `(index, distance)`,
    /// sorted by ascending distance, ties broken by lower index.
    pub fn nearest(&self, query: &Point, k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 {
            return Err(Error::Argument("k must be positive".into()));
        }
        if self.is_empty() {
            return Err(Error::Argument("nearest-neighbour query on an empty index".into()));
        }
        let q = [query.x, query.y, query.z];
        let mut best = Candidates::new(k.min(self.len()));
        self.search(0, &q, &mut best);
        Ok(best
            .items
            .into_iter()
            .map(|(d2, i)| (i, d2.sqrt()))
            .collect())
    }

    /// Single nearest neighbour, or `None` for an empty index.
    pub fn nearest_one(&self, query: &Point) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let q = [query.x, query.y, query.z];
        let mut best = (f64::INFINITY, usize::MAX);
        self.search_one(0, &q, &mut best);
        Some((best.1, best.0.sqrt()))
    }

    /// Indices of all points with `|p - query| <= radius`, ascending.
    pub fn within_radius(&self, query: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.is_empty() || radius < 0.0 {
            return out;
        }
        let q = [query.x, query.y, query.z];
        self.radius_search(0, &q, radius * radius, &mut out);
        out.sort_unstable();
        out
    }

    /// Indices of all points inside the closed box `[lo, hi]`, ascending.
    pub fn within_box(&self, lo: &Point, hi: &Point) -> Vec<usize> {
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        let lo = [lo.x, lo.y, lo.z];
        let hi = [hi.x, hi.y, hi.z];
        self.box_search(0, &lo, &hi, &mut out);
        out.sort_unstable();
        out
    }

    fn search(&self, node: usize, q: &[f64; 3], best: &mut Candidates) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    best.offer(dist2(&self.coords[i], q), i);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // `<=` keeps equal-distance points reachable so the index tie-break holds.
                if diff * diff <= best.worst() {
                    self.search(far, q, best);
                }
            }
        }
    }

    fn search_one(&self, node: usize, q: &[f64; 3], best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = dist2(&self.coords[i], q);
                    if d2 < best.0 || (d2 == best.0 && i < best.1) {
                        *best = (d2, i);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search_one(near, q, best);
                if diff * diff <= best.0 {
                    self.search_one(far, q, best);
                }
            }
        }
    }

    fn radius_search(&self, node: usize, q: &[f64; 3], r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.order[start..end]
                        .iter()
                        .copied()
                        .filter(|&i| dist2(&self.coords[i], q) <= r2),
                );
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.radius_search(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.radius_search(right, q, r2, out);
                }
            }
        }
    }

    fn box_search(&self, node: usize, lo: &[f64; 3], hi: &[f64; 3], out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(self.order[start..end].iter().copied().filter(|&i| {
                    let c = &self.coords[i];
                    (0..3).all(|a| c[a] >= lo[a] && c[a] <= hi[a])
                }));
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                if lo[axis] <= value {
                    self.box_search(left, lo, hi, out);
                }
                if hi[axis] >= value {
                    self.box_search(right, lo, hi, out);
                }
            }
        }
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Builds the subtree over `order[start..]` and returns its node id. Points
/// left of the split satisfy `c <= value`, points right satisfy `c >= value`.
fn build(coords: &[[f64; 3]], order: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(coords[i][a]);
            hi[a] = hi[a].max(coords[i][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    if hi[axis] - lo[axis] <= 0.0 {
        // all points coincide
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        coords[a][axis].total_cmp(&coords[b][axis]).then(a.cmp(&b))
    });
    let value = coords[order[mid]][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (left_part, right_part) = order.split_at_mut(mid);
    let left = build(coords, left_part, offset, nodes);
    let right = build(coords, right_part, offset + mid, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

/// Bounded list of the best `(squared distance, index)` pairs seen so far.
struct Candidates {
    cap: usize,
    items: Vec<(f64, usize)>,
}

impl Candidates {
    fn new(cap: usize) -> Self {
        Self {
            cap,
            items: Vec::with_capacity(cap + 1),
        }
    }

    fn worst(&self) -> f64 {
        if self.items.len() < self.cap {
            f64::INFINITY
        } else {
            self.items[self.items.len() - 1].0
        }
    }

    fn offer(&mut self, d2: f64, index: usize) {
        let key = (d2, index);
        if self.items.len() == self.cap {
            let last = self.items[self.cap - 1];
            if !less(key, last) {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|&probe| less(probe, key));
        self.items.insert(pos, key);
    }
}

fn less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}
