use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_heading(heading: f64) -> Self {
        Self::new(heading.cos(), heading.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn distance(&self, p: Vec2) -> f64 {
        let ab = self.b - self.a;
        let len2 = ab.dot(ab);
        if len2 == 0.0 {
            return (p - self.a).norm();
        }
        let t = ((p - self.a).dot(ab) / len2).clamp(0.0, 1.0);
        (p - (self.a + ab * t)).norm()
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }
}

pub fn polyline_segments(points: &[Vec2]) -> Vec<Segment> {
    match points {
        [] => Vec::new(),
        [p] => vec![Segment { a: *p, b: *p }],
        _ => points.windows(2).map(|w| Segment { a: w[0], b: w[1] }).collect(),
    }
}

/// Euclidean distance from `p` to the nearest point of the polyline.
/// Returns `None` for an empty polyline.
pub fn distance_to_center(p: Vec2, polyline: &[Vec2]) -> Option<f64> {
    distance_to_segments(p, &polyline_segments(polyline))
}

pub fn distance_to_segments(p: Vec2, segments: &[Segment]) -> Option<f64> {
    segments.iter().map(|s| s.distance(p)).reduce(f64::min)
}
