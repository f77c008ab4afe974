//! The stored set of `(x, f, g)` triples and its maintenance.

use crate::linalg::norm2;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BundleElement {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub birth: usize,
}

/// Ordered list of bundle elements; one of them is the current iterate and
/// is never pruned.
#[derive(Debug, Clone)]
pub struct PointSet {
    elements: Vec<BundleElement>,
    // increasing insertion tags, parallel to `elements`
    ids: Vec<u64>,
    next_id: u64,
    current: usize,
}

impl PointSet {
    pub fn new(current: BundleElement) -> Self {
        Self { elements: vec![current], ids: vec![0], next_id: 1, current: 0 }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[BundleElement] {
        &self.elements
    }

    /// Tags unique over the lifetime of the set, increasing with insertion order.
    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn current(&self) -> &BundleElement {
        &self.elements[self.current]
    }

    pub fn current_index(&self) -> usize {
        self.current
    }

    pub fn push(&mut self, e: BundleElement) {
        self.elements.push(e);
        self.ids.push(self.next_id);
        self.next_id += 1;
    }

    /// Appends `e` and makes it the current iterate.
    pub fn push_current(&mut self, e: BundleElement) {
        self.push(e);
        self.current = self.elements.len() - 1;
    }

    fn retain_indexed(&mut self, mut keep: impl FnMut(usize, &BundleElement) -> bool) {
        let cur = self.current;
        let mut new_current = 0;
        let mut out = Vec::with_capacity(self.elements.len());
        let mut ids = Vec::with_capacity(self.elements.len());
        for (i, (e, id)) in self.elements.drain(..).zip(&self.ids).enumerate() {
            if i == cur || keep(i, &e) {
                if i == cur {
                    new_current = out.len();
                }
                out.push(e);
                ids.push(*id);
            }
        }
        self.elements = out;
        self.ids = ids;
        self.current = new_current;
    }

    /// Removes elements farther than `envelope_factor·eps` from `x_next`.
    pub fn prune_by_distance(&mut self, x_next: &[f64], eps: f64, envelope_factor: f64) {
        let radius = envelope_factor * eps;
        self.retain_indexed(|_, e| {
            let d: f64 = e.x.iter().zip(x_next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            d <= radius
        });
    }

    /// Removes the oldest elements until at most `limit` remain.
    pub fn prune_by_age(&mut self, limit: usize) {
        let limit = limit.max(1);
        if self.elements.len() <= limit {
            return;
        }
        let excess = self.elements.len() - limit;
        let mut order: Vec<usize> = (0..self.elements.len()).filter(|&i| i != self.current).collect();
        order.sort_by_key(|&i| (self.elements[i].birth, i));
        let mut drop = vec![false; self.elements.len()];
        for &i in order.iter().take(excess) {
            drop[i] = true;
        }
        self.retain_indexed(|i, _| !drop[i]);
    }
}

/// `p` points drawn uniformly from the closed Euclidean ball of radius `eps`
/// around `x`.
pub fn sample_ball(x: &[f64], eps: f64, p: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = x.len();
    (0..p)
        .map(|_| {
            if eps == 0.0 || n == 0 {
                return x.to_vec();
            }
            let mut dir = rng.normal_vec(n);
            let mut len = norm2(&dir);
            while len == 0.0 {
                dir = rng.normal_vec(n);
                len = norm2(&dir);
            }
            let r = eps * rng.uniform().powf(1.0 / n as f64);
            let scale = r / len;
            let mut y: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + scale * di).collect();
            // rounding can push the point a hair outside the ball
            let dist = norm2(&crate::linalg::sub(&y, x));
            if dist > eps {
                let shrink = eps / dist * (1.0 - f64::EPSILON);
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi = xi + (*yi - xi) * shrink;
                }
            }
            y
        })
        .collect()
}
