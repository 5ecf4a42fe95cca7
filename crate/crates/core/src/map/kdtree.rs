//! Static 2-d tree over sample positions, for fixed-radius gathering.

#[derive(Clone, Debug, Default)]
pub struct KdTree {
    // Points in tree order; `order[i]` is the caller's index of `points[i]`.
    points: Vec<[f64; 2]>,
    order: Vec<usize>,
}

const LEAF_SIZE: usize = 8;

impl KdTree {
    pub fn build(points: &[[f64; 2]]) -> Self {
        let mut items: Vec<(usize, [f64; 2])> = points.iter().copied().enumerate().collect();
        build_rec(&mut items, 0);
        KdTree {
            points: items.iter().map(|&(_, p)| p).collect(),
            order: items.iter().map(|&(i, _)| i).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Caller indices of all points, in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        let mut v = self.order.clone();
        v.sort_unstable();
        v
    }

    /// Indices of points with distance `<= radius` from `center`, ascending.
    pub fn within_radius(&self, center: [f64; 2], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if radius.is_infinite() && radius > 0.0 {
            return self.indices();
        }
        self.search(0, self.points.len(), 0, center, radius * radius, radius, &mut out);
        out.sort_unstable();
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn search(&self, lo: usize, hi: usize, depth: usize, c: [f64; 2], r2: f64, r: f64, out: &mut Vec<usize>) {
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                let p = self.points[i];
                let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                if d2 <= r2 {
                    out.push(self.order[i]);
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = depth % 2;
        let p = self.points[mid];
        let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
        if d2 <= r2 {
            out.push(self.order[mid]);
        }
        let diff = c[axis] - p[axis];
        if diff - r <= 0.0 {
            self.search(lo, mid, depth + 1, c, r2, r, out);
        }
        if diff + r >= 0.0 {
            self.search(mid + 1, hi, depth + 1, c, r2, r, out);
        }
    }
}

fn build_rec(items: &mut [(usize, [f64; 2])], depth: usize) {
    if items.len() <= LEAF_SIZE {
        return;
    }
    let axis = depth % 2;
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |a, b| a.1[axis].total_cmp(&b.1[axis]));
    let (left, rest) = items.split_at_mut(mid);
    build_rec(left, depth + 1);
    build_rec(&mut rest[1..], depth + 1);
}
