//! Ball tree over geographic points under the haversine metric.
//!
//! Each ball stores the coordinate mean of its points as the center and the
//! largest haversine distance from that center as the radius. Since the
//! radius is measured in the true metric, the usual triangle-inequality
//! pruning is exact.

use std::num::NonZeroUsize;

use crate::geodesy::{haversine_distance, GeoPoint};
use crate::scalar::Scalar;

pub const DEFAULT_LEAF_SIZE: NonZeroUsize = match NonZeroUsize::new(16) {
    Some(n) => n,
    None => unreachable!(),
};

/// A point returned by a query, with its distance from the query in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborResult<T = f64> {
    pub node_index: usize,
    pub distance: T,
}

#[derive(Debug, Clone)]
pub struct Ball<T = f64> {
    pub center: GeoPoint<T>,
    pub radius: T,
    range: (usize, usize),
    children: Option<(usize, usize)>,
}

impl<T> Ball<T> {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn children(&self) -> Option<(usize, usize)> {
        self.children
    }
}

#[derive(Debug, Clone)]
pub struct BallTree<T = f64> {
    points: Vec<GeoPoint<T>>,
    /// Permutation of point indices; every ball owns a contiguous range.
    order: Vec<usize>,
    balls: Vec<Ball<T>>,
    leaf_size: NonZeroUsize,
}

impl<T: Scalar> BallTree<T> {
    /// Builds a tree over `points`. Construction is deterministic for a given
    /// input order.
    pub fn new(points: Vec<GeoPoint<T>>, leaf_size: NonZeroUsize) -> Self {
        let n = points.len();
        let mut tree = Self {
            points,
            order: (0..n).collect(),
            balls: Vec::new(),
            leaf_size,
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn leaf_size(&self) -> NonZeroUsize {
        self.leaf_size
    }

    pub fn points(&self) -> &[GeoPoint<T>] {
        &self.points
    }

    /// All balls; index 0 is the root.
    pub fn balls(&self) -> &[Ball<T>] {
        &self.balls
    }

    /// Indices of the points owned by ball `id`.
    pub fn ball_points(&self, id: usize) -> &[usize] {
        let (start, end) = self.balls[id].range;
        &self.order[start..end]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let (center, radius) = self.bounding_ball(start, end);
        let id = self.balls.len();
        self.balls.push(Ball {
            center,
            radius,
            range: (start, end),
            children: None,
        });
        if end - start <= self.leaf_size.get() || radius == T::zero() {
            return id;
        }
        let mid = self.partition(start, end);
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.balls[id].children = Some((left, right));
        id
    }

    fn bounding_ball(&self, start: usize, end: usize) -> (GeoPoint<T>, T) {
        let count = T::from_usize(end - start).expect("point count fits scalar");
        let (lat_sum, lon_sum) = self.order[start..end]
            .iter()
            .fold((T::zero(), T::zero()), |(la, lo), &i| {
                (la + self.points[i].lat(), lo + self.points[i].lon())
            });
        let center = GeoPoint::from_raw(lat_sum / count, lon_sum / count);
        let radius = self.order[start..end]
            .iter()
            .map(|&i| haversine_distance(&center, &self.points[i]))
            .fold(T::zero(), T::max);
        (center, radius)
    }

    /// Farthest-pair split: take the first point, find the point farthest
    /// from it (A), then the point farthest from A (B), and send every
    /// point to whichever of A and B is closer (ties to A).
    fn partition(&mut self, start: usize, end: usize) -> usize {
        let farthest_from = |tree: &Self, from: GeoPoint<T>| -> GeoPoint<T> {
            let mut best = (T::neg_infinity(), start);
            for &i in &tree.order[start..end] {
                let d = haversine_distance(&from, &tree.points[i]);
                if d > best.0 {
                    best = (d, i);
                }
            }
            tree.points[best.1]
        };
        let seed = self.points[self.order[start]];
        let pole_a = farthest_from(self, seed);
        let pole_b = farthest_from(self, pole_a);

        let (left, right): (Vec<usize>, Vec<usize>) =
            self.order[start..end].iter().partition(|&&i| {
                let p = &self.points[i];
                haversine_distance(p, &pole_a) <= haversine_distance(p, &pole_b)
            });
        if left.is_empty() || right.is_empty() {
            return start + (end - start) / 2;
        }
        let mid = start + left.len();
        self.order[start..mid].copy_from_slice(&left);
        self.order[mid..end].copy_from_slice(&right);
        mid
    }

    /// Allowance for rounding when comparing a ball lower bound against a
    /// candidate distance.
    fn slack(dist_to_center: T, radius: T) -> T {
        T::epsilon() * T::lit(64.0) * (dist_to_center + radius + T::one())
    }

    /// Closest indexed point, lowest index on ties. `None` on an empty tree.
    pub fn nearest(&self, query: &GeoPoint<T>) -> Option<NeighborResult<T>> {
        self.nearest_with_stats(query).0
    }

    /// Like [`nearest`](Self::nearest), also returning the number of
    /// haversine evaluations the search performed.
    pub fn nearest_with_stats(&self, query: &GeoPoint<T>) -> (Option<NeighborResult<T>>, usize) {
        if self.balls.is_empty() {
            return (None, 0);
        }
        let mut search = NearestSearch {
            query,
            best: None,
            evaluations: 1,
        };
        let root_dist = haversine_distance(query, &self.balls[0].center);
        self.visit_nearest(0, root_dist, &mut search);
        (search.best, search.evaluations)
    }

    fn visit_nearest(&self, id: usize, dist_to_center: T, search: &mut NearestSearch<'_, T>) {
        let ball = &self.balls[id];
        if let Some(best) = search.best {
            let lower = dist_to_center - ball.radius;
            if lower > best.distance + Self::slack(dist_to_center, ball.radius) {
                return;
            }
        }
        match ball.children {
            None => {
                for &i in self.ball_points(id) {
                    let d = haversine_distance(search.query, &self.points[i]);
                    search.evaluations += 1;
                    let better = match search.best {
                        None => true,
                        Some(b) => d < b.distance || (d == b.distance && i < b.node_index),
                    };
                    if better {
                        search.best = Some(NeighborResult {
                            node_index: i,
                            distance: d,
                        });
                    }
                }
            }
            Some((left, right)) => {
                let dl = haversine_distance(search.query, &self.balls[left].center);
                let dr = haversine_distance(search.query, &self.balls[right].center);
                search.evaluations += 2;
                let lower_l = dl - self.balls[left].radius;
                let lower_r = dr - self.balls[right].radius;
                if lower_l <= lower_r {
                    self.visit_nearest(left, dl, search);
                    self.visit_nearest(right, dr, search);
                } else {
                    self.visit_nearest(right, dr, search);
                    self.visit_nearest(left, dl, search);
                }
            }
        }
    }

    /// Every indexed point within `radius` meters (inclusive), sorted by
    /// ascending distance then index.
    pub fn within_radius(&self, query: &GeoPoint<T>, radius: T) -> Vec<NeighborResult<T>> {
        let mut out = Vec::new();
        if self.balls.is_empty() || !(radius >= T::zero()) {
            return out;
        }
        self.visit_radius(0, query, radius, &mut out);
        sort_neighbors(&mut out);
        out
    }

    fn visit_radius(
        &self,
        id: usize,
        query: &GeoPoint<T>,
        radius: T,
        out: &mut Vec<NeighborResult<T>>,
    ) {
        let ball = &self.balls[id];
        let dc = haversine_distance(query, &ball.center);
        if dc - ball.radius > radius + Self::slack(dc, ball.radius) {
            return;
        }
        match ball.children {
            None => {
                for &i in self.ball_points(id) {
                    let d = haversine_distance(query, &self.points[i]);
                    if d <= radius {
                        out.push(NeighborResult {
                            node_index: i,
                            distance: d,
                        });
                    }
                }
            }
            Some((left, right)) => {
                self.visit_radius(left, query, radius, out);
                self.visit_radius(right, query, radius, out);
            }
        }
    }
}

struct NearestSearch<'q, T> {
    query: &'q GeoPoint<T>,
    best: Option<NeighborResult<T>>,
    evaluations: usize,
}

fn sort_neighbors<T: Scalar>(v: &mut [NeighborResult<T>]) {
    v.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .expect("finite distances")
            .then(a.node_index.cmp(&b.node_index))
    });
}

/// Linear scan reference for [`BallTree::nearest`].
pub fn nearest_brute_force<T: Scalar>(
    points: &[GeoPoint<T>],
    query: &GeoPoint<T>,
) -> Option<NeighborResult<T>> {
    let mut best: Option<NeighborResult<T>> = None;
    for (i, p) in points.iter().enumerate() {
        let d = haversine_distance(query, p);
        if best.is_none_or(|b| d < b.distance) {
            best = Some(NeighborResult {
                node_index: i,
                distance: d,
            });
        }
    }
    best
}

/// Linear scan reference for [`BallTree::within_radius`].
pub fn within_radius_brute_force<T: Scalar>(
    points: &[GeoPoint<T>],
    query: &GeoPoint<T>,
    radius: T,
) -> Vec<NeighborResult<T>> {
    let mut out: Vec<_> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let d = haversine_distance(query, p);
            (d <= radius).then_some(NeighborResult {
                node_index: i,
                distance: d,
            })
        })
        .collect();
    sort_neighbors(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn leaf(n: usize) -> NonZeroUsize {
        NonZeroUsize::new(n).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<GeoPoint> {
        (0..n)
            .map(|_| p(32.8 + rng.gen_range(0.0..0.1), -117.3 + rng.gen_range(0.0..0.1)))
            .collect()
    }

    #[test]
    fn empty_tree() {
        let tree = BallTree::<f64>::new(vec![], DEFAULT_LEAF_SIZE);
        assert!(tree.is_empty());
        assert!(tree.nearest(&p(0.0, 0.0)).is_none());
        assert!(tree.within_radius(&p(0.0, 0.0), 1e9).is_empty());
        assert!(nearest_brute_force::<f64>(&[], &p(0.0, 0.0)).is_none());
    }

    #[test]
    fn single_point() {
        let only = p(32.88, -117.23);
        let tree = BallTree::new(vec![only], DEFAULT_LEAF_SIZE);
        assert_eq!(tree.balls().len(), 1);
        for q in [p(0.0, 0.0), p(-45.0, 100.0), only] {
            let hit = tree.nearest(&q).unwrap();
            assert_eq!(hit.node_index, 0);
            assert_eq!(hit.distance, haversine_distance(&q, &only));
        }
        assert_eq!(nearest_brute_force(&[only], &p(1.0, 1.0)).unwrap().node_index, 0);
    }

    #[test]
    fn ball_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 1000);
        let tree = BallTree::new(pts.clone(), leaf(16));
        let mut seen = vec![0usize; pts.len()];
        for (id, ball) in tree.balls().iter().enumerate() {
            for &i in tree.ball_points(id) {
                let d = haversine_distance(&pts[i], &ball.center);
                assert!(d <= ball.radius + 1e-6, "ball {id}: {d} > {}", ball.radius);
            }
            if ball.is_leaf() {
                assert!(tree.ball_points(id).len() <= 16);
                for &i in tree.ball_points(id) {
                    seen[i] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn exact_hit_and_radius_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = random_points(&mut rng, 300);
        let tree = BallTree::new(pts.clone(), leaf(4));
        let q = pts[123];
        let hit = tree.nearest(&q).unwrap();
        assert_eq!(hit.distance, 0.0);
        let r0 = tree.within_radius(&q, 0.0);
        assert_eq!(r0.len(), 1);
        assert_eq!(r0[0].node_index, 123);
        assert_eq!(tree.within_radius(&q, 25_000_000.0).len(), 300);
    }

    #[test]
    fn duplicate_points_tie_on_lowest_index() {
        let pts = vec![p(1.0, 1.0); 40];
        let tree = BallTree::new(pts, leaf(2));
        let hit = tree.nearest(&p(1.1, 1.0)).unwrap();
        assert_eq!(hit.node_index, 0);
        assert_eq!(tree.within_radius(&p(1.0, 1.0), 0.0).len(), 40);
    }

    #[test]
    fn equidistant_pair() {
        let pts = vec![p(0.0, -0.001), p(0.0, 0.001)];
        let tree = BallTree::new(pts.clone(), leaf(1));
        let q = p(0.0, 0.0);
        let hit = tree.nearest(&q).unwrap();
        assert_eq!(hit.distance, haversine_distance(&q, &pts[0]));
        assert_eq!(hit.distance, haversine_distance(&q, &pts[1]));
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..40 {
            let n = rng.gen_range(1..600);
            let pts = random_points(&mut rng, n);
            let tree = BallTree::new(pts.clone(), leaf(1 + trial % 20));
            for _ in 0..25 {
                let q = random_points(&mut rng, 1)[0];
                let fast = tree.nearest(&q).unwrap();
                let slow = nearest_brute_force(&pts, &q).unwrap();
                assert_eq!(fast.distance, slow.distance);
                let r = rng.gen_range(0.0..3000.0);
                let a: Vec<_> = tree.within_radius(&q, r).iter().map(|n| n.node_index).collect();
                let b: Vec<_> = within_radius_brute_force(&pts, &q, r)
                    .iter()
                    .map(|n| n.node_index)
                    .collect();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn global_spread_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<_> = (0..800)
            .map(|_| p(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..180.0)))
            .collect();
        let tree = BallTree::new(pts.clone(), DEFAULT_LEAF_SIZE);
        for _ in 0..200 {
            let q = p(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..180.0));
            assert_eq!(
                tree.nearest(&q).unwrap().distance,
                nearest_brute_force(&pts, &q).unwrap().distance
            );
        }
    }

    #[test]
    fn query_cost_is_sublinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let pts = random_points(&mut rng, n);
        let tree = BallTree::new(pts, DEFAULT_LEAF_SIZE);
        let total: usize = (0..100)
            .map(|_| {
                let q = random_points(&mut rng, 1)[0];
                tree.nearest_with_stats(&q).1
            })
            .sum();
        let mean = total as f64 / 100.0;
        assert!(mean < n as f64 / 4.0, "mean evaluations {mean}");
    }

    #[test]
    fn single_precision_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts: Vec<GeoPoint<f32>> = random_points(&mut rng, 500).iter().map(|q| q.cast()).collect();
        let tree = BallTree::new(pts.clone(), DEFAULT_LEAF_SIZE);
        for _ in 0..50 {
            let q: GeoPoint<f32> = random_points(&mut rng, 1)[0].cast();
            assert_eq!(
                tree.nearest(&q).unwrap().distance,
                nearest_brute_force(&pts, &q).unwrap().distance
            );
        }
    }
}
