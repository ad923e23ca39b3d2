//! Intersection layout: approaches, lanes, connection paths and the
//! crossing points between them.
//!
//! Coordinates are planar meters with the intersection center at the
//! origin. Approach 0 comes from the south heading north, and the others
//! follow counter-clockwise (east, north, west). Traffic keeps right.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::GeometryError;

/// Maximum polyline segment length.
const SAMPLE_STEP: f64 = 0.5;
/// Crossings closer than this are treated as the same conflict point.
const MERGE_TOLERANCE: f64 = 0.05;
/// Crossings this close to a box-portion endpoint are merges or diverges,
/// not conflicts.
const ENDPOINT_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn rotated(self, quarter_turns: usize) -> Point {
        let mut p = self;
        for _ in 0..quarter_turns % 4 {
            p = Point::new(-p.y, p.x);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntersectionSpec {
    pub approaches: usize,
    pub entry_lanes_per_approach: usize,
    pub lane_width: f64,
    pub inner_box_half_extent: f64,
    /// Distance from the inner box to the outer (optimization area) boundary.
    pub optimization_zone_depth: f64,
    /// Distance upstream of the stop line where crossing time starts.
    pub metric_boundary: f64,
    /// Straight road upstream of the outer box where vehicles spawn.
    pub approach_lead_in: f64,
    /// Straight road after the inner box before vehicles leave the world.
    pub exit_length: f64,
}

impl Default for IntersectionSpec {
    fn default() -> Self {
        Self {
            approaches: 4,
            entry_lanes_per_approach: 2,
            lane_width: 3.5,
            inner_box_half_extent: 9.0,
            optimization_zone_depth: 100.0,
            metric_boundary: 30.0,
            approach_lead_in: 20.0,
            exit_length: 40.0,
        }
    }
}

impl IntersectionSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.approaches != 4 {
            return Err(GeometryError::Invalid {
                field: "approaches",
                reason: format!("must be 4, got {}", self.approaches),
            });
        }
        if self.entry_lanes_per_approach == 0 {
            return Err(GeometryError::Invalid {
                field: "entry_lanes_per_approach",
                reason: "must be at least 1".into(),
            });
        }
        let extents = [
            ("lane_width", self.lane_width),
            ("inner_box_half_extent", self.inner_box_half_extent),
            ("optimization_zone_depth", self.optimization_zone_depth),
            ("metric_boundary", self.metric_boundary),
            ("approach_lead_in", self.approach_lead_in),
            ("exit_length", self.exit_length),
        ];
        for (field, value) in extents {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::Invalid {
                    field,
                    reason: format!("must be strictly positive, got {value}"),
                });
            }
        }
        if self.metric_boundary > self.optimization_zone_depth {
            return Err(GeometryError::Invalid {
                field: "metric_boundary",
                reason: format!(
                    "{} exceeds optimization_zone_depth {}",
                    self.metric_boundary, self.optimization_zone_depth
                ),
            });
        }
        let lanes_span = self.entry_lanes_per_approach as f64 * self.lane_width;
        if self.inner_box_half_extent < lanes_span {
            return Err(GeometryError::Invalid {
                field: "inner_box_half_extent",
                reason: format!("{} cannot contain {lanes_span} m of lanes", self.inner_box_half_extent),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    Left,
    Straight,
    Right,
}

impl Movement {
    /// Quarter turns (counter-clockwise) from the entry arm to the exit arm.
    fn exit_arm_offset(self) -> usize {
        match self {
            Movement::Straight => 2,
            Movement::Left => 3,
            Movement::Right => 1,
        }
    }
}

/// Lane on one arm of the intersection. `index` 0 is the lane nearest the
/// median.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LaneId {
    pub approach: usize,
    pub index: usize,
}

/// Movements served by an entry lane: the inner lane carries left and
/// straight, the outer lane straight and right, middle lanes straight only.
/// A single-lane approach serves all three.
pub fn lane_movements(index: usize, lanes: usize) -> Vec<Movement> {
    let mut out = Vec::new();
    if index == 0 {
        out.push(Movement::Left);
    }
    out.push(Movement::Straight);
    if index + 1 == lanes {
        out.push(Movement::Right);
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Connection {
    pub id: usize,
    pub entrance_lane: LaneId,
    pub exit_lane: LaneId,
    pub movement: Movement,
    pub path: Vec<Point>,
    /// Cumulative arc length at each path vertex.
    cumulative: Vec<f64>,
    /// Path position of the stop line (inner box entry).
    pub stop_line_s: f64,
    /// Path position of the inner box exit.
    pub box_exit_s: f64,
    /// Path position of the outer box boundary.
    pub outer_boundary_s: f64,
    /// Path position where crossing-time measurement starts.
    pub metric_entry_s: f64,
    /// Conflict points on this path as `(point id, distance along path)`,
    /// sorted by distance.
    pub conflicts: Vec<(usize, f64)>,
}

impl Connection {
    pub fn is_left_turn(&self) -> bool {
        self.movement == Movement::Left
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// `D^(j)`: conflict distances along the path.
    pub fn conflict_distances(&self) -> Vec<f64> {
        self.conflicts.iter().map(|&(_, d)| d).collect()
    }

    pub fn last_conflict_s(&self) -> Option<f64> {
        self.conflicts.last().map(|&(_, d)| d)
    }

    /// Position and heading at path position `s`. Positions outside the path
    /// extrapolate along the first or last segment.
    pub fn pose_at(&self, s: f64) -> (Point, f64) {
        let n = self.path.len();
        let seg = if s <= 0.0 {
            0
        } else {
            match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
                Ok(i) => i.min(n - 2),
                Err(i) => (i - 1).min(n - 2),
            }
        };
        let a = self.path[seg];
        let b = self.path[seg + 1];
        let len = self.cumulative[seg + 1] - self.cumulative[seg];
        let t = (s - self.cumulative[seg]) / len;
        let heading = (b.y - a.y).atan2(b.x - a.x);
        (Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)), heading)
    }

    fn box_segments(&self) -> impl Iterator<Item = (usize, Point, Point)> + '_ {
        (0..self.path.len() - 1)
            .filter(|&i| {
                self.cumulative[i] >= self.stop_line_s - 1e-9 && self.cumulative[i + 1] <= self.box_exit_s + 1e-9
            })
            .map(|i| (i, self.path[i], self.path[i + 1]))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConflictPoint {
    pub id: usize,
    pub position: Point,
    pub involved_connections: Vec<usize>,
}

/// Zone of a vehicle along its path, ordered by progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Outside,
    OptimizationArea,
    CrossingZone,
    Departed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Intersection {
    pub spec: IntersectionSpec,
    pub connections: Vec<Connection>,
    pub conflict_points: Vec<ConflictPoint>,
    /// `shared[a][b]`: conflict point ids common to connections `a` and `b`.
    shared: Vec<Vec<Vec<usize>>>,
}

impl Intersection {
    pub fn num_lanes(&self) -> usize {
        self.spec.approaches * self.spec.entry_lanes_per_approach
    }

    pub fn lane_index(&self, lane: LaneId) -> usize {
        lane.approach * self.spec.entry_lanes_per_approach + lane.index
    }

    pub fn lane_of_index(&self, idx: usize) -> LaneId {
        let l = self.spec.entry_lanes_per_approach;
        LaneId { approach: idx / l, index: idx % l }
    }

    /// Connections starting in an entry lane, in id order.
    pub fn connections_from(&self, lane: LaneId) -> Vec<usize> {
        self.connections.iter().filter(|c| c.entrance_lane == lane).map(|c| c.id).collect()
    }

    pub fn shared_points(&self, a: usize, b: usize) -> &[usize] {
        &self.shared[a][b]
    }

    /// Paths of `a` and `b` cross inside the box.
    pub fn crossing(&self, a: usize, b: usize) -> bool {
        a != b && !self.shared[a][b].is_empty()
    }

    /// Distinct connections feeding the same exit lane.
    pub fn merging(&self, a: usize, b: usize) -> bool {
        a != b && self.connections[a].exit_lane == self.connections[b].exit_lane
    }

    /// Distinct connections leaving the same entrance lane.
    pub fn diverging(&self, a: usize, b: usize) -> bool {
        a != b && self.connections[a].entrance_lane == self.connections[b].entrance_lane
    }

    /// Distance of conflict point `point` along connection `conn`.
    pub fn conflict_distance(&self, conn: usize, point: usize) -> Option<f64> {
        self.connections[conn].conflicts.iter().find(|&&(p, _)| p == point).map(|&(_, d)| d)
    }
}

/// Classify a path position. Monotone in `s`.
pub fn locate(s: f64, connection: &Connection) -> Zone {
    if s < connection.outer_boundary_s {
        Zone::Outside
    } else if s < connection.stop_line_s {
        Zone::OptimizationArea
    } else if s < connection.box_exit_s {
        Zone::CrossingZone
    } else {
        Zone::Departed
    }
}

pub fn build_intersection(spec: &IntersectionSpec) -> Result<Intersection, GeometryError> {
    spec.validate()?;
    let lanes = spec.entry_lanes_per_approach;
    let w = spec.lane_width;
    let h = spec.inner_box_half_extent;
    let approach_len = spec.approach_lead_in + spec.optimization_zone_depth;

    let mut connections = Vec::new();
    for approach in 0..spec.approaches {
        for index in 0..lanes {
            for movement in lane_movements(index, lanes) {
                let exit_index = match movement {
                    Movement::Left => 0,
                    Movement::Right => lanes - 1,
                    Movement::Straight => index,
                };
                let exit_arm = (approach + movement.exit_arm_offset()) % 4;
                // Build in the frame of approach 0, then rotate.
                let x_in = (index as f64 + 0.5) * w;
                let off_out = (exit_index as f64 + 0.5) * w;
                let mut pts = Vec::new();
                push_line(&mut pts, Point::new(x_in, -h - approach_len), Point::new(x_in, -h));
                let box_start = pts.len() - 1;
                let box_end_point = match movement {
                    Movement::Straight => {
                        let end = Point::new(off_out, h);
                        push_line(&mut pts, Point::new(x_in, -h), end);
                        end
                    }
                    Movement::Left => {
                        // Quarter ellipse centered at (-h, -h).
                        let (rx, ry) = (x_in + h, off_out + h);
                        push_arc(&mut pts, |phi| Point::new(-h + rx * phi.cos(), -h + ry * phi.sin()));
                        Point::new(-h, off_out)
                    }
                    Movement::Right => {
                        // Quarter ellipse centered at (h, -h).
                        let (rx, ry) = (h - x_in, h - off_out);
                        push_arc(&mut pts, |phi| Point::new(h - rx * phi.cos(), -h + ry * phi.sin()));
                        Point::new(h, -off_out)
                    }
                };
                let box_end = pts.len() - 1;
                let exit_dir = match movement {
                    Movement::Straight => Point::new(0.0, 1.0),
                    Movement::Left => Point::new(-1.0, 0.0),
                    Movement::Right => Point::new(1.0, 0.0),
                };
                let exit_end = Point::new(
                    box_end_point.x + exit_dir.x * spec.exit_length,
                    box_end_point.y + exit_dir.y * spec.exit_length,
                );
                push_line(&mut pts, box_end_point, exit_end);
                let path: Vec<Point> = pts.iter().map(|p| p.rotated(approach)).collect();
                let cumulative = cumulative_lengths(&path);
                let stop_line_s = cumulative[box_start];
                let box_exit_s = cumulative[box_end];
                connections.push(Connection {
                    id: connections.len(),
                    entrance_lane: LaneId { approach, index },
                    exit_lane: LaneId { approach: exit_arm, index: exit_index },
                    movement,
                    path,
                    cumulative,
                    stop_line_s,
                    box_exit_s,
                    outer_boundary_s: spec.approach_lead_in,
                    metric_entry_s: stop_line_s - spec.metric_boundary,
                    conflicts: Vec::new(),
                });
            }
        }
    }

    // Pairwise crossings inside the box.
    let mut points: Vec<ConflictPoint> = Vec::new();
    let mut on_conn: Vec<Vec<(usize, f64)>> = vec![Vec::new(); connections.len()];
    for a in 0..connections.len() {
        for b in a + 1..connections.len() {
            for (pos, sa, sb) in crossings(&connections[a], &connections[b]) {
                let id = match points.iter().position(|p| p.position.dist(pos) < MERGE_TOLERANCE) {
                    Some(id) => id,
                    None => {
                        points.push(ConflictPoint {
                            id: points.len(),
                            position: pos,
                            involved_connections: Vec::new(),
                        });
                        points.len() - 1
                    }
                };
                for (c, s) in [(a, sa), (b, sb)] {
                    if !points[id].involved_connections.contains(&c) {
                        points[id].involved_connections.push(c);
                    }
                    if !on_conn[c].iter().any(|&(p, _)| p == id) {
                        on_conn[c].push((id, s));
                    }
                }
            }
        }
    }
    for p in &mut points {
        p.involved_connections.sort_unstable();
    }
    for (conn, mut list) in connections.iter_mut().zip(on_conn) {
        list.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        conn.conflicts = list;
    }

    let n = connections.len();
    let mut shared = vec![vec![Vec::new(); n]; n];
    for p in &points {
        for &a in &p.involved_connections {
            for &b in &p.involved_connections {
                if a != b {
                    shared[a][b].push(p.id);
                }
            }
        }
    }
    Ok(Intersection { spec: spec.clone(), connections, conflict_points: points, shared })
}

fn push_line(pts: &mut Vec<Point>, from: Point, to: Point) {
    let n = (from.dist(to) / SAMPLE_STEP).ceil().max(1.0) as usize;
    if pts.last().is_none_or(|&p| p.dist(from) > 1e-12) {
        pts.push(from);
    }
    for i in 1..=n {
        let t = i as f64 / n as f64;
        pts.push(Point::new(from.x + t * (to.x - from.x), from.y + t * (to.y - from.y)));
    }
}

fn push_arc(pts: &mut Vec<Point>, f: impl Fn(f64) -> Point) {
    // Estimate the arc length with a fine pass, then sample at <= SAMPLE_STEP.
    let fine = 256;
    let mut len = 0.0;
    for i in 0..fine {
        let a = f(FRAC_PI_2 * i as f64 / fine as f64);
        let b = f(FRAC_PI_2 * (i + 1) as f64 / fine as f64);
        len += a.dist(b);
    }
    let n = (len / SAMPLE_STEP).ceil().max(2.0) as usize;
    for i in 1..=n {
        pts.push(f(FRAC_PI_2 * i as f64 / n as f64));
    }
}

fn cumulative_lengths(path: &[Point]) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in path.windows(2) {
        acc += w[0].dist(w[1]);
        out.push(acc);
    }
    out
}

/// Proper crossings between the box portions of two paths, as
/// `(position, s along a, s along b)`.
fn crossings(a: &Connection, b: &Connection) -> Vec<(Point, f64, f64)> {
    let a_ends = [a.pose_at(a.stop_line_s).0, a.pose_at(a.box_exit_s).0];
    let b_ends = [b.pose_at(b.stop_line_s).0, b.pose_at(b.box_exit_s).0];
    let mut out: Vec<(Point, f64, f64)> = Vec::new();
    for (i, p1, p2) in a.box_segments() {
        for (j, q1, q2) in b.box_segments() {
            let Some((t, u)) = segment_intersection(p1, p2, q1, q2) else { continue };
            let pos = Point::new(p1.x + t * (p2.x - p1.x), p1.y + t * (p2.y - p1.y));
            if a_ends.iter().chain(&b_ends).any(|e| e.dist(pos) < ENDPOINT_TOLERANCE) {
                continue;
            }
            if out.iter().any(|(q, _, _)| q.dist(pos) < MERGE_TOLERANCE) {
                continue;
            }
            let sa = a.cumulative[i] + t * (a.cumulative[i + 1] - a.cumulative[i]);
            let sb = b.cumulative[j] + u * (b.cumulative[j + 1] - b.cumulative[j]);
            out.push((pos, sa, sb));
        }
    }
    out
}

/// Parameters `(t, u)` of the intersection of segments `p1p2` and `q1q2`.
/// Parallel and collinear segments report no intersection.
pub fn segment_intersection(p1: Point, p2: Point, q1: Point, q2: Point) -> Option<(f64, f64)> {
    let r = Point::new(p2.x - p1.x, p2.y - p1.y);
    let s = Point::new(q2.x - q1.x, q2.y - q1.y);
    let denom = r.x * s.y - r.y * s.x;
    if denom.abs() < 1e-12 {
        return None;
    }
    let qp = Point::new(q1.x - p1.x, q1.y - p1.y);
    let t = (qp.x * s.y - qp.y * s.x) / denom;
    let u = (qp.x * r.y - qp.y * r.x) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_intersection() -> Intersection {
        build_intersection(&IntersectionSpec::default()).unwrap()
    }

    fn find(ix: &Intersection, approach: usize, index: usize, m: Movement) -> &Connection {
        ix.connections.iter().find(|c| c.entrance_lane == LaneId { approach, index } && c.movement == m).unwrap()
    }

    #[test]
    fn sixteen_connections_for_two_lane_approaches() {
        // Admissible (lane, movement) pairs per approach: inner {L, S}, outer {S, R}.
        let per_approach =
            [(0, Movement::Left), (0, Movement::Straight), (1, Movement::Straight), (1, Movement::Right)];
        let ix = default_intersection();
        assert_eq!(ix.connections.len(), 4 * per_approach.len());
        for approach in 0..4 {
            for (lane, m) in per_approach {
                find(&ix, approach, lane, m);
            }
        }
    }

    #[test]
    fn perpendicular_straights_cross_once() {
        let ix = default_intersection();
        let south = find(&ix, 0, 0, Movement::Straight).id;
        let east = find(&ix, 1, 0, Movement::Straight).id;
        assert_eq!(ix.shared_points(south, east).len(), 1);
        let p = ix.conflict_points[ix.shared_points(south, east)[0]].position;
        assert!((p.x - 1.75).abs() < 1e-9 && (p.y - 1.75).abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn diverging_and_merging_paths_are_not_conflicts() {
        let ix = default_intersection();
        let right = find(&ix, 0, 1, Movement::Right).id;
        let straight = find(&ix, 0, 1, Movement::Straight).id;
        assert!(ix.diverging(right, straight));
        assert!(!ix.crossing(right, straight));

        // South inner straight and west inner left both feed the north inner exit.
        let s = find(&ix, 0, 0, Movement::Straight).id;
        let wl = find(&ix, 3, 0, Movement::Left).id;
        assert!(ix.merging(s, wl));
        assert!(!ix.crossing(s, wl));
    }

    #[test]
    fn shared_entry_overlap_is_not_reported_by_the_oracle_either() {
        // Oracle: brute-force every segment pair of the full paths; all
        // intersections found must lie on the shared entry (x = 5.25, y <= -9).
        let ix = default_intersection();
        let right = find(&ix, 0, 1, Movement::Right);
        let straight = find(&ix, 0, 1, Movement::Straight);
        for a in right.path.windows(2) {
            for b in straight.path.windows(2) {
                if let Some((t, _)) = segment_intersection(a[0], a[1], b[0], b[1]) {
                    let p = Point::new(a[0].x + t * (a[1].x - a[0].x), a[0].y + t * (a[1].y - a[0].y));
                    assert!(p.y <= -9.0 + 1e-6, "unexpected crossing at {p:?}");
                }
            }
        }
    }

    #[test]
    fn opposing_lefts_do_not_cross() {
        let ix = default_intersection();
        let a = find(&ix, 0, 0, Movement::Left).id;
        let b = find(&ix, 2, 0, Movement::Left).id;
        assert!(!ix.crossing(a, b));
    }

    #[test]
    fn conflict_invariants_hold() {
        let ix = default_intersection();
        let h = ix.spec.inner_box_half_extent;
        for p in &ix.conflict_points {
            assert!(p.involved_connections.len() >= 2);
            assert!(p.position.x.abs() <= h + 1e-9 && p.position.y.abs() <= h + 1e-9);
        }
        for a in 0..ix.connections.len() {
            let c = &ix.connections[a];
            let d = c.conflict_distances();
            assert!(d.windows(2).all(|w| w[0] < w[1]), "connection {a}: {d:?}");
            assert!(d.iter().all(|&x| x >= c.stop_line_s && x <= c.box_exit_s));
            for b in 0..ix.connections.len() {
                assert_eq!(ix.crossing(a, b), ix.crossing(b, a));
                let mut ab = ix.shared_points(a, b).to_vec();
                let mut ba = ix.shared_points(b, a).to_vec();
                ab.sort_unstable();
                ba.sort_unstable();
                assert_eq!(ab, ba);
            }
        }
    }

    #[test]
    fn conflict_point_lies_on_both_paths() {
        let ix = default_intersection();
        for p in &ix.conflict_points {
            for &c in &p.involved_connections {
                let d = ix.conflict_distance(c, p.id).unwrap();
                let (pos, _) = ix.connections[c].pose_at(d);
                assert!(pos.dist(p.position) < MERGE_TOLERANCE + 1e-9);
            }
        }
    }

    #[test]
    fn rebuild_is_stable() {
        let a = default_intersection();
        let b = default_intersection();
        assert_eq!(a.conflict_points.len(), b.conflict_points.len());
        for (x, y) in a.connections.iter().zip(&b.connections) {
            assert_eq!(x.conflicts, y.conflicts);
            assert_eq!(x.path, y.path);
        }
    }

    #[test]
    fn paths_are_finely_sampled() {
        let ix = default_intersection();
        for c in &ix.connections {
            for w in c.path.windows(2) {
                assert!(w[0].dist(w[1]) <= SAMPLE_STEP + 1e-9);
            }
        }
    }

    #[test]
    fn zones_progress_along_path() {
        let ix = default_intersection();
        let c = &ix.connections[0];
        assert_eq!(locate(c.outer_boundary_s - 5.0, c), Zone::Outside);
        assert_eq!(locate(c.outer_boundary_s + 1.0, c), Zone::OptimizationArea);
        assert_eq!(locate(c.stop_line_s + 0.5, c), Zone::CrossingZone);
        assert_eq!(locate(c.box_exit_s + 1.0, c), Zone::Departed);
        assert_eq!(locate(c.length() + 100.0, c), Zone::Departed);
        let mut last = Zone::Outside;
        let mut s = 0.0;
        while s < c.length() + 5.0 {
            let z = locate(s, c);
            assert!(z >= last);
            last = z;
            s += 0.25;
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let spec = IntersectionSpec { entry_lanes_per_approach: 0, ..Default::default() };
        assert!(build_intersection(&spec).is_err());
        let spec = IntersectionSpec { lane_width: -1.0, ..Default::default() };
        assert!(build_intersection(&spec).is_err());
        let spec = IntersectionSpec { metric_boundary: 200.0, ..Default::default() };
        assert!(build_intersection(&spec).is_err());
    }

    #[test]
    fn pose_extrapolates_and_follows_heading() {
        let ix = default_intersection();
        let c = find(&ix, 0, 0, Movement::Straight);
        let (p, heading) = c.pose_at(-2.5);
        assert!((p.x - 1.75).abs() < 1e-9);
        assert!((heading - FRAC_PI_2).abs() < 1e-9);
        let left = find(&ix, 0, 0, Movement::Left);
        let (_, h_end) = left.pose_at(left.length() - 1.0);
        assert!((h_end.abs() - std::f64::consts::PI).abs() < 1e-6);
    }
}
