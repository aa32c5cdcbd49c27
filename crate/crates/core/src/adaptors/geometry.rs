//! Oriented rectangles for body parts and their overlap test.

use serde::{Deserialize, Serialize};

use crate::math::{abs, sqrt};

/// An oriented rectangle: `half_length` runs along `axis`, `half_width`
/// along its perpendicular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbBox {
    pub center: (f64, f64),
    pub half_length: f64,
    pub half_width: f64,
    pub axis: (f64, f64),
}

impl LimbBox {
    /// Smallest axis-aligned box containing the points. `None` for no points.
    pub fn bounding<I: IntoIterator<Item = (f64, f64)>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let (x0, y0) = it.next()?;
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (x0, x0, y0, y0);
        for (x, y) in it {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        Some(Self {
            center: ((xmin + xmax) / 2.0, (ymin + ymax) / 2.0),
            half_length: (xmax - xmin) / 2.0,
            half_width: (ymax - ymin) / 2.0,
            axis: (1.0, 0.0),
        })
    }

    /// Box spanning the segment `a -> b` with the given full width.
    /// Coincident joints give a `width x width` square at the joint.
    pub fn segment(a: (f64, f64), b: (f64, f64), width: f64) -> Self {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = sqrt(dx * dx + dy * dy);
        let center = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
        if len <= f64::EPSILON * (1.0 + abs(a.0) + abs(a.1)) {
            return Self {
                center,
                half_length: width / 2.0,
                half_width: width / 2.0,
                axis: (1.0, 0.0),
            };
        }
        Self {
            center,
            half_length: len / 2.0,
            half_width: width / 2.0,
            axis: (dx / len, dy / len),
        }
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.axis.1 == 0.0 || self.axis.0 == 0.0
    }

    pub fn diagonal(&self) -> f64 {
        2.0 * sqrt(self.half_length * self.half_length + self.half_width * self.half_width)
    }

    /// Half extents along the x and y axes.
    fn aabb_half(&self) -> (f64, f64) {
        let (ux, uy) = self.axis;
        (
            abs(ux) * self.half_length + abs(uy) * self.half_width,
            abs(uy) * self.half_length + abs(ux) * self.half_width,
        )
    }

    /// Projection radius onto the unit direction `n`.
    fn radius(&self, n: (f64, f64)) -> f64 {
        let (ux, uy) = self.axis;
        self.half_length * abs(ux * n.0 + uy * n.1) + self.half_width * abs(-uy * n.0 + ux * n.1)
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (ux, uy) = self.axis;
        let (vx, vy) = (-uy, ux);
        let (cx, cy) = self.center;
        let (l, w) = (self.half_length, self.half_width);
        [
            (cx - ux * l - vx * w, cy - uy * l - vy * w),
            (cx + ux * l - vx * w, cy + uy * l - vy * w),
            (cx + ux * l + vx * w, cy + uy * l + vy * w),
            (cx - ux * l + vx * w, cy - uy * l + vy * w),
        ]
    }

    /// Closed-set intersection: touching boxes overlap.
    pub fn overlaps(&self, other: &LimbBox) -> bool {
        let d = (other.center.0 - self.center.0, other.center.1 - self.center.1);
        if self.is_axis_aligned() && other.is_axis_aligned() {
            let (ax, ay) = self.aabb_half();
            let (bx, by) = other.aabb_half();
            return abs(d.0) <= ax + bx && abs(d.1) <= ay + by;
        }
        let axes = [
            self.axis,
            (-self.axis.1, self.axis.0),
            other.axis,
            (-other.axis.1, other.axis.0),
        ];
        axes.iter().all(|&n| {
            let dist = abs(d.0 * n.0 + d.1 * n.1);
            dist <= self.radius(n) + other.radius(n) + 1e-12
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_bounds() {
        let b = LimbBox::bounding([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).unwrap();
        assert_eq!(b.center, (0.5, 0.5));
        assert_eq!((b.half_length, b.half_width), (0.5, 0.5));
    }

    #[test]
    fn forearm_box_construction() {
        let b = LimbBox::segment((0.0, 0.0), (10.0, 0.0), 2.0);
        assert_eq!(b.center, (5.0, 0.0));
        assert_eq!((b.half_length, b.half_width), (5.0, 1.0));
        assert_eq!(b.axis, (1.0, 0.0));
    }

    #[test]
    fn coincident_joints_make_square() {
        let b = LimbBox::segment((3.0, 4.0), (3.0, 4.0), 2.0);
        assert_eq!(b.center, (3.0, 4.0));
        assert_eq!((b.half_length, b.half_width), (1.0, 1.0));
    }

    #[test]
    fn rotated_boxes() {
        // diagonal bar through the origin against squares on and off it
        let bar = LimbBox::segment((-1.0, -1.0), (1.0, 1.0), 0.2);
        let on = LimbBox::segment((0.5, 0.5), (0.5, 0.5), 0.1);
        let off = LimbBox::segment((0.8, -0.8), (0.8, -0.8), 0.1);
        assert!(bar.overlaps(&on));
        assert!(!bar.overlaps(&off));
        // the corner region of the axis-aligned hull is not inside the bar
        let corner = LimbBox::segment((0.9, -0.5), (0.9, -0.5), 0.1);
        assert!(!bar.overlaps(&corner));
    }
}
