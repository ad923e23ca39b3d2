//! Oriented-rectangle overlap via the separating axis test.

use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub center: Point,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Footprint {
    pub fn corners(&self) -> [Point; 4] {
        let (s, c) = self.heading.sin_cos();
        let (l, w) = (self.half_length, self.half_width);
        [(l, w), (l, -w), (-l, -w), (-l, w)]
            .map(|(a, b)| Point::new(self.center.x + a * c - b * s, self.center.y + a * s + b * c))
    }

    fn bounding_radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }
}

/// True when the interiors overlap; touching edges do not count.
pub fn overlaps(a: &Footprint, b: &Footprint) -> bool {
    if a.center.dist(b.center) >= a.bounding_radius() + b.bounding_radius() {
        return false;
    }
    let ca = a.corners();
    let cb = b.corners();
    let axes = [a.heading, a.heading + std::f64::consts::FRAC_PI_2, b.heading, b.heading + std::f64::consts::FRAC_PI_2];
    for theta in axes {
        let (s, c) = theta.sin_cos();
        let project = |pts: &[Point; 4]| {
            pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let d = p.x * c + p.y * s;
                (lo.min(d), hi.max(d))
            })
        };
        let (a_lo, a_hi) = project(&ca);
        let (b_lo, b_hi) = project(&cb);
        if a_hi <= b_lo || b_hi <= a_lo {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn car(x: f64, y: f64, heading: f64) -> Footprint {
        Footprint { center: Point::new(x, y), heading, half_length: 2.5, half_width: 0.9 }
    }

    /// Oracle: sample points inside `a` on a dense grid and test point
    /// containment in `b`.
    fn sampled_overlap(a: &Footprint, b: &Footprint) -> bool {
        let n = 60;
        let (s, c) = a.heading.sin_cos();
        for i in 1..n {
            for j in 1..n {
                let u = -a.half_length + 2.0 * a.half_length * i as f64 / n as f64;
                let v = -a.half_width + 2.0 * a.half_width * j as f64 / n as f64;
                let p = Point::new(a.center.x + u * c - v * s, a.center.y + u * s + v * c);
                let (sb, cb) = b.heading.sin_cos();
                let dx = p.x - b.center.x;
                let dy = p.y - b.center.y;
                let lu = dx * cb + dy * sb;
                let lv = -dx * sb + dy * cb;
                if lu.abs() < b.half_length && lv.abs() < b.half_width {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn same_lane_ten_meters_apart_do_not_touch() {
        assert!(!overlaps(&car(0.0, 0.0, 0.0), &car(10.0, 0.0, 0.0)));
    }

    #[test]
    fn coincident_centers_overlap() {
        assert!(overlaps(&car(1.75, 1.75, 0.0), &car(1.75, 1.75, std::f64::consts::FRAC_PI_2)));
    }

    #[test]
    fn one_centimeter_corner_graze_is_reported() {
        // Axis-aligned cars offset diagonally so corners overlap by 1 cm each way.
        let a = car(0.0, 0.0, 0.0);
        let b = car(4.99, 1.79, 0.0);
        assert!(overlaps(&a, &b));
        let touching = car(5.0, 1.8, 0.0);
        assert!(!overlaps(&a, &touching));
    }

    proptest! {
        #[test]
        fn agrees_with_sampling_oracle(
            x in -6.0f64..6.0, y in -6.0f64..6.0, h1 in 0.0f64..6.3, h2 in 0.0f64..6.3
        ) {
            let a = car(0.0, 0.0, h1);
            let b = car(x, y, h2);
            let sat = overlaps(&a, &b);
            let oracle = sampled_overlap(&a, &b) || sampled_overlap(&b, &a);
            // The sampling oracle can only miss slivers thinner than its grid.
            if oracle {
                prop_assert!(sat);
            }
            prop_assert_eq!(sat, overlaps(&b, &a));
        }
    }
}
