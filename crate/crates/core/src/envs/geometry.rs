//! Exact 2-D segment geometry used for continuous collision checks.
//!
//! Collision against lava is a proper segment-segment intersection test
//! (endpoints inclusive), so a fast diagonal move can never tunnel through a
//! wall the way endpoint sampling would allow.

use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<F> {
    pub x: F,
    pub y: F,
}

impl<F: Float> Point<F> {
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<F> {
    pub a: Point<F>,
    pub b: Point<F>,
}

impl<F: Float> Segment<F> {
    pub fn new(x1: F, y1: F, x2: F, y2: F) -> Self {
        Self {
            a: Point::new(x1, y1),
            b: Point::new(x2, y2),
        }
    }
}

fn cross<F: Float>(ax: F, ay: F, bx: F, by: F) -> F {
    ax * by - ay * bx
}

/// Whether two closed segments intersect, via the parametric solution of
/// `p + t·r = q + u·s` with `t, u` restricted to `[0, 1]`. Collinear overlaps
/// and shared endpoints count as intersections.
pub fn segments_intersect<F: Float>(s1: &Segment<F>, s2: &Segment<F>) -> bool {
    let rx = s1.b.x - s1.a.x;
    let ry = s1.b.y - s1.a.y;
    let sx = s2.b.x - s2.a.x;
    let sy = s2.b.y - s2.a.y;
    let qpx = s2.a.x - s1.a.x;
    let qpy = s2.a.y - s1.a.y;
    let denom = cross(rx, ry, sx, sy);
    let zero = F::zero();
    let one = F::one();
    if denom == zero {
        // Parallel: intersect only if collinear and the 1-D projections overlap.
        if cross(qpx, qpy, rx, ry) != zero {
            return false;
        }
        let rr = rx * rx + ry * ry;
        if rr == zero {
            // s1 degenerates to a point.
            let ss = sx * sx + sy * sy;
            if ss == zero {
                return qpx == zero && qpy == zero;
            }
            let t = ((s1.a.x - s2.a.x) * sx + (s1.a.y - s2.a.y) * sy) / ss;
            return t >= zero && t <= one;
        }
        let t0 = (qpx * rx + qpy * ry) / rr;
        let t1 = t0 + (sx * rx + sy * ry) / rr;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        hi >= zero && lo <= one
    } else {
        let t = cross(qpx, qpy, sx, sy) / denom;
        let u = cross(qpx, qpy, rx, ry) / denom;
        t >= zero && t <= one && u >= zero && u <= one
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    type Seg = Segment<f64>;

    /// Independent oracle: classic orientation predicates with special-cased
    /// collinear point-on-segment checks.
    pub fn intersect_oracle(s1: &Seg, s2: &Seg) -> bool {
        fn orient(p: &Point<f64>, q: &Point<f64>, r: &Point<f64>) -> i8 {
            let v = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
            if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            }
        }
        fn on_seg(p: &Point<f64>, q: &Point<f64>, r: &Point<f64>) -> bool {
            r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
        }
        let o1 = orient(&s1.a, &s1.b, &s2.a);
        let o2 = orient(&s1.a, &s1.b, &s2.b);
        let o3 = orient(&s2.a, &s2.b, &s1.a);
        let o4 = orient(&s2.a, &s2.b, &s1.b);
        if o1 != o2 && o3 != o4 {
            return true;
        }
        (o1 == 0 && on_seg(&s1.a, &s1.b, &s2.a))
            || (o2 == 0 && on_seg(&s1.a, &s1.b, &s2.b))
            || (o3 == 0 && on_seg(&s2.a, &s2.b, &s1.a))
            || (o4 == 0 && on_seg(&s2.a, &s2.b, &s1.b))
    }

    #[test]
    fn crossing_at_midpoint() {
        let s1 = Seg::new(0.0, 0.0, 2.0, 2.0);
        let s2 = Seg::new(0.0, 2.0, 2.0, 0.0);
        assert!(segments_intersect(&s1, &s2));
    }

    #[test]
    fn shared_endpoint_counts() {
        let s1 = Seg::new(0.0, 0.0, 1.0, 1.0);
        let s2 = Seg::new(1.0, 1.0, 2.0, 0.0);
        assert!(segments_intersect(&s1, &s2));
    }

    #[test]
    fn disjoint_parallel() {
        let s1 = Seg::new(0.0, 0.0, 1.0, 0.0);
        let s2 = Seg::new(0.0, 1.0, 1.0, 1.0);
        assert!(!segments_intersect(&s1, &s2));
    }

    #[test]
    fn collinear_overlap() {
        let s1 = Seg::new(0.0, 0.0, 2.0, 0.0);
        let s2 = Seg::new(1.0, 0.0, 3.0, 0.0);
        assert!(segments_intersect(&s1, &s2));
        let s3 = Seg::new(2.5, 0.0, 3.0, 0.0);
        assert!(!segments_intersect(&Seg::new(0.0, 0.0, 2.0, 0.0), &s3));
    }

    #[test]
    fn matches_orientation_oracle_on_random_pairs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut seg = |rng: &mut rand_chacha::ChaCha8Rng| {
            Seg::new(
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
            )
        };
        for _ in 0..1000 {
            let s1 = seg(&mut rng);
            let s2 = seg(&mut rng);
            assert_eq!(
                segments_intersect(&s1, &s2),
                intersect_oracle(&s1, &s2),
                "disagreement on {s1:?} vs {s2:?}"
            );
        }
    }

    #[test]
    fn symmetric_in_argument_order() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let s1 = Seg::new(
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
            );
            let s2 = Seg::new(
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
            );
            assert_eq!(segments_intersect(&s1, &s2), segments_intersect(&s2, &s1));
        }
    }
}
