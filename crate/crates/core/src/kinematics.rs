//! Robot models, forward kinematics and collision checking with provenance.
//!
//! Two robot kinds are supported: a rigid planar body that translates and
//! rotates (`(x, y, phi)`), and a planar serial chain of revolute joints whose
//! links are thin rectangles. Link and joint indices are 0-based: joint `k`
//! drives link `k`, and configuration axis `k` is joint `k`.
//!
//! [`collision_check`] reports *why* a configuration collides, because the
//! cause determines how many other configurations are known to collide too:
//!
//! * `ObstacleHit { link: j }` on a chain: the pose of link `j` depends only on
//!   joints `0..=j`, so every configuration sharing those values collides.
//! * `SelfHit { first: i, second: j }`: the relative pose of links `i` and `j`
//!   depends only on joints `i+1..=j`; the test is evaluated in the frame of
//!   link `i` so the verdict is bit-identical for every configuration sharing
//!   joints `i..=j`.
//! * `BaseInObstacle`: the rigid body's reference point lies in an obstacle, so
//!   every heading at that location collides.

use std::f64::consts::TAU;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{mesh_collides, point_in_polygon, triangulate, GeometryError, Point2, Polygon2, TriMesh, Triangle2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("invalid robot: {0}")]
    InvalidRobot(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Default link width as a fraction of its length.
pub const DEFAULT_WIDTH_RATIO: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub length: f64,
    pub width: f64,
    /// `[lo, hi]` in radians; `None` means a full revolution that wraps.
    pub limits: Option<(f64, f64)>,
}

impl Link {
    pub fn new(length: f64) -> Self {
        Self { length, width: DEFAULT_WIDTH_RATIO * length, limits: None }
    }

    pub fn with_width(mut self, width: f64) -> Self {
        self.width = width;
        self
    }

    pub fn with_limits(mut self, lo: f64, hi: f64) -> Self {
        self.limits = Some((lo, hi));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerialChain {
    base: Point2,
    links: Vec<Link>,
}

impl SerialChain {
    pub fn new(base: Point2, links: Vec<Link>) -> Result<Self, KinematicsError> {
        if links.is_empty() {
            return Err(KinematicsError::InvalidRobot("chain needs at least one link".into()));
        }
        if !base.is_finite() {
            return Err(KinematicsError::InvalidRobot("non-finite base".into()));
        }
        for (k, l) in links.iter().enumerate() {
            if !(l.length.is_finite() && l.length > 0.0) {
                return Err(KinematicsError::InvalidRobot(format!("link {k}: length must be > 0")));
            }
            if !(l.width.is_finite() && l.width > 0.0) {
                return Err(KinematicsError::InvalidRobot(format!("link {k}: width must be > 0")));
            }
            if let Some((lo, hi)) = l.limits {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(KinematicsError::InvalidRobot(format!("link {k}: joint limit lo < hi violated")));
                }
            }
        }
        Ok(Self { base, links })
    }

    pub fn base(&self) -> Point2 {
        self.base
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn total_length(&self) -> f64 {
        self.links.iter().map(|l| l.length).sum()
    }

    /// The chain restricted to its first `k` links.
    pub fn truncated(&self, k: usize) -> Result<Self, KinematicsError> {
        if k == 0 || k > self.links.len() {
            return Err(KinematicsError::InvalidRobot(format!(
                "cannot truncate a {}-link chain to {k} links",
                self.links.len()
            )));
        }
        Ok(Self { base: self.base, links: self.links[..k].to_vec() })
    }

    /// Joint positions `p_0 = base, ..., p_n = tip`.
    pub fn joint_positions(&self, q: &[f64]) -> Vec<Point2> {
        let mut out = Vec::with_capacity(self.links.len() + 1);
        let mut p = self.base;
        let mut angle = 0.0;
        out.push(p);
        for (l, &qi) in self.links.iter().zip(q) {
            angle += qi;
            p = p.add(Point2::new(angle.cos(), angle.sin()).scale(l.length));
            out.push(p);
        }
        out
    }

    /// Per-link rectangles, each split into two triangles.
    pub fn link_triangles(&self, q: &[f64]) -> Vec<[Triangle2; 2]> {
        let mut out = Vec::with_capacity(self.links.len());
        let mut p = self.base;
        let mut angle = 0.0;
        for (l, &qi) in self.links.iter().zip(q) {
            angle += qi;
            let (tris, next) = link_rect(p, angle, l);
            out.push(tris);
            p = next;
        }
        out
    }

    /// Links `i..=j` placed in the frame of link `i` (its joint at the origin,
    /// pointing along +x). Depends only on `q[i+1..=j]`.
    fn local_link_triangles(&self, q: &[f64], i: usize, j: usize) -> Vec<[Triangle2; 2]> {
        let mut out = Vec::with_capacity(j - i + 1);
        let mut p = Point2::new(0.0, 0.0);
        let mut angle = 0.0;
        for k in i..=j {
            if k > i {
                angle += q[k];
            }
            let (tris, next) = link_rect(p, angle, &self.links[k]);
            out.push(tris);
            p = next;
        }
        out
    }
}

fn link_rect(start: Point2, angle: f64, link: &Link) -> ([Triangle2; 2], Point2) {
    let u = Point2::new(angle.cos(), angle.sin());
    let n = Point2::new(-u.y, u.x).scale(0.5 * link.width);
    let end = start.add(u.scale(link.length));
    let (a, b, c, d) = (start.sub(n), end.sub(n), end.add(n), start.add(n));
    ([Triangle2::new(a, b, c), Triangle2::new(a, c, d)], end)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidBody {
    body: Polygon2,
    reference_point: Point2,
    /// Body triangles relative to the reference point.
    local: Vec<Triangle2>,
}

impl RigidBody {
    /// `reference_point` is the rotation axis and must lie inside the body.
    pub fn new(body: Polygon2, reference_point: Point2) -> Result<Self, KinematicsError> {
        if !point_in_polygon(reference_point, &body) {
            return Err(KinematicsError::InvalidRobot("reference point must lie inside the body".into()));
        }
        let local = triangulate(&body)?
            .into_iter()
            .map(|t| t.map(|v| v.sub(reference_point)))
            .collect();
        Ok(Self { body, reference_point, local })
    }

    pub fn body(&self) -> &Polygon2 {
        &self.body
    }

    pub fn reference_point(&self) -> Point2 {
        self.reference_point
    }

    pub fn triangles(&self, x: f64, y: f64, phi: f64) -> Vec<Triangle2> {
        let at = Point2::new(x, y);
        self.local.iter().map(|t| t.map(|v| v.rotate(phi).add(at))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RobotModel {
    Rigid(RigidBody),
    Chain(SerialChain),
}

/// Per-axis metadata the robot imposes on its configuration space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisInfo {
    pub wrap: bool,
    /// Natural bounds; `None` for translation axes, which need user bounds.
    pub bounds: Option<(f64, f64)>,
}

impl RobotModel {
    pub fn dof(&self) -> usize {
        match self {
            RobotModel::Rigid(_) => 3,
            RobotModel::Chain(c) => c.links.len(),
        }
    }

    pub fn axes(&self) -> Vec<AxisInfo> {
        match self {
            RobotModel::Rigid(_) => vec![
                AxisInfo { wrap: false, bounds: None },
                AxisInfo { wrap: false, bounds: None },
                AxisInfo { wrap: true, bounds: Some((0.0, TAU)) },
            ],
            RobotModel::Chain(c) => c
                .links
                .iter()
                .map(|l| match l.limits {
                    Some(b) => AxisInfo { wrap: false, bounds: Some(b) },
                    None => AxisInfo { wrap: true, bounds: Some((0.0, TAU)) },
                })
                .collect(),
        }
    }

    pub fn validate(&self, q: &Configuration) -> Result<(), KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::InvalidConfiguration(format!(
                "expected {} values, got {}",
                self.dof(),
                q.len()
            )));
        }
        if let Some(k) = q.values().iter().position(|v| !v.is_finite()) {
            return Err(KinematicsError::InvalidConfiguration(format!("coordinate {k} is not finite")));
        }
        if let RobotModel::Chain(c) = self {
            for (k, (l, &v)) in c.links.iter().zip(q.values()).enumerate() {
                if let Some((lo, hi)) = l.limits {
                    if v < lo || v > hi {
                        return Err(KinematicsError::InvalidConfiguration(format!(
                            "joint {k} value {v} outside limits [{lo}, {hi}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The chain restricted to its first `k` links; rigid bodies cannot be truncated.
    pub fn truncated(&self, k: usize) -> Result<Self, KinematicsError> {
        match self {
            RobotModel::Chain(c) => Ok(RobotModel::Chain(c.truncated(k)?)),
            RobotModel::Rigid(_) => Err(KinematicsError::InvalidRobot("only serial chains can be truncated".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Configuration(Vec<f64>);

impl Configuration {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for Configuration {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// A workspace obstacle with its triangulation cached.
#[derive(Debug, Clone)]
pub struct Obstacle {
    pub id: String,
    pub polygon: Polygon2,
    pub mesh: TriMesh,
}

impl Obstacle {
    pub fn new(id: impl Into<String>, polygon: Polygon2) -> Result<Self, GeometryError> {
        let mesh = TriMesh::from_polygon(&polygon)?;
        Ok(Self { id: id.into(), polygon, mesh })
    }
}

/// Why a configuration collides. Obstacles are referenced by their index in
/// the obstacle list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CollisionCause {
    None,
    ObstacleHit { link: usize, obstacle: usize },
    SelfHit { first: usize, second: usize },
    BaseInObstacle { obstacle: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CollisionReport {
    pub colliding: bool,
    pub cause: CollisionCause,
}

impl CollisionReport {
    pub const FREE: CollisionReport = CollisionReport { colliding: false, cause: CollisionCause::None };

    fn hit(cause: CollisionCause) -> Self {
        Self { colliding: true, cause }
    }
}

/// Workspace placement `R(q)` as a flat triangle list.
pub fn placement(robot: &RobotModel, q: &Configuration) -> Result<Vec<Triangle2>, KinematicsError> {
    robot.validate(q)?;
    let v = q.values();
    Ok(match robot {
        RobotModel::Rigid(b) => b.triangles(v[0], v[1], v[2]),
        RobotModel::Chain(c) => c.link_triangles(v).into_iter().flatten().collect(),
    })
}

/// Collision check with cause priority `BaseInObstacle > ObstacleHit > SelfHit`.
pub fn collision_check(
    robot: &RobotModel,
    q: &Configuration,
    obstacles: &[Obstacle],
) -> Result<CollisionReport, KinematicsError> {
    robot.validate(q)?;
    Ok(check_unchecked(robot, q.values(), obstacles))
}

/// [`collision_check`] without configuration validation, for the sampling hot path.
pub fn check_unchecked(robot: &RobotModel, q: &[f64], obstacles: &[Obstacle]) -> CollisionReport {
    match robot {
        RobotModel::Rigid(body) => {
            let at = Point2::new(q[0], q[1]);
            if let Some(o) = obstacles.iter().position(|o| point_in_polygon(at, &o.polygon)) {
                return CollisionReport::hit(CollisionCause::BaseInObstacle { obstacle: o });
            }
            let tris = body.triangles(q[0], q[1], q[2]);
            match obstacles.iter().position(|o| mesh_collides(&tris, &o.mesh)) {
                Some(o) => CollisionReport::hit(CollisionCause::ObstacleHit { link: 0, obstacle: o }),
                None => CollisionReport::FREE,
            }
        }
        RobotModel::Chain(chain) => {
            let links = chain.link_triangles(q);
            for (k, tris) in links.iter().enumerate() {
                if let Some(o) = obstacles.iter().position(|o| mesh_collides(tris, &o.mesh)) {
                    return CollisionReport::hit(CollisionCause::ObstacleHit { link: k, obstacle: o });
                }
            }
            match self_collision(chain, q) {
                Some((i, j)) => CollisionReport::hit(CollisionCause::SelfHit { first: i, second: j }),
                None => CollisionReport::FREE,
            }
        }
    }
}

/// The colliding non-adjacent link pair with the smallest index span, ties
/// broken by the smaller first index.
fn self_collision(chain: &SerialChain, q: &[f64]) -> Option<(usize, usize)> {
    let n = chain.links.len();
    for span in 2..n {
        for i in 0..(n - span) {
            let j = i + span;
            let local = chain.local_link_triangles(q, i, j);
            if crate::geometry::polys_collide(&local[0], &local[span]) {
                return Some((i, j));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn chain(n: usize) -> RobotModel {
        RobotModel::Chain(SerialChain::new(Point2::new(0.0, 0.0), vec![Link::new(1.0); n]).unwrap())
    }

    fn tip(robot: &RobotModel, q: &[f64]) -> Point2 {
        match robot {
            RobotModel::Chain(c) => *c.joint_positions(q).last().unwrap(),
            _ => unreachable!(),
        }
    }

    fn close(a: Point2, b: Point2) -> bool {
        (a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12
    }

    #[test]
    fn straight_and_folded_arm() {
        let r = chain(2);
        assert!(close(tip(&r, &[0.0, 0.0]), Point2::new(2.0, 0.0)));
        assert!(close(tip(&r, &[FRAC_PI_2, FRAC_PI_2]), Point2::new(-1.0, 1.0)));
        let tris = placement(&r, &Configuration::new(vec![0.0, 0.0])).unwrap();
        assert_eq!(tris.len(), 4);
    }

    #[test]
    fn rigid_translation() {
        let body = Polygon2::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        let r = RobotModel::Rigid(RigidBody::new(body.clone(), Point2::new(0.0, 0.0)).unwrap());
        let tris = placement(&r, &Configuration::new(vec![3.0, 4.0, 0.0])).unwrap();
        let area: f64 = tris.iter().map(Triangle2::area).sum();
        assert!((area - 1.0).abs() < 1e-12);
        for t in &tris {
            for v in t.vertices() {
                assert!(body.vertices().iter().any(|b| close(b.add(Point2::new(3.0, 4.0)), v)));
            }
        }
    }

    #[test]
    fn rigid_reference_point_must_be_inside() {
        let body = Polygon2::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(RigidBody::new(body, Point2::new(2.0, 2.0)).is_err());
    }

    #[test]
    fn invalid_configurations() {
        let r = chain(2);
        assert!(placement(&r, &Configuration::new(vec![0.0])).is_err());
        let limited = RobotModel::Chain(
            SerialChain::new(Point2::default(), vec![Link::new(1.0).with_limits(-1.0, 1.0)]).unwrap(),
        );
        assert!(placement(&limited, &Configuration::new(vec![2.0])).is_err());
        assert!(placement(&limited, &Configuration::new(vec![0.5])).is_ok());
        assert!(SerialChain::new(Point2::default(), vec![Link::new(1.0).with_limits(1.0, -1.0)]).is_err());
        assert!(SerialChain::new(Point2::default(), vec![Link::new(0.0)]).is_err());
    }

    #[test]
    fn clear_arm_reports_free() {
        let obstacles = vec![Obstacle::new("far", Polygon2::rect(5.0, 5.0, 6.0, 6.0).unwrap()).unwrap()];
        let rep = collision_check(&chain(2), &Configuration::new(vec![0.3, 0.3]), &obstacles).unwrap();
        assert_eq!(rep, CollisionReport::FREE);
    }

    #[test]
    fn wall_through_second_link() {
        // Wall crossing x in [1.4, 1.6] near the x axis: link 1 of a straight arm pierces it.
        let obstacles = vec![
            Obstacle::new("far", Polygon2::rect(5.0, 5.0, 6.0, 6.0).unwrap()).unwrap(),
            Obstacle::new("wall", Polygon2::rect(1.4, -0.5, 1.6, 0.5).unwrap()).unwrap(),
        ];
        let r = chain(2);
        let q = Configuration::new(vec![0.0, 0.0]);
        let rep = collision_check(&r, &q, &obstacles).unwrap();
        assert_eq!(rep.cause, CollisionCause::ObstacleHit { link: 1, obstacle: 1 });
        let RobotModel::Chain(c) = &r else { unreachable!() };
        let links = c.link_triangles(q.values());
        assert!(!crate::geometry::polys_collide(&links[0], &obstacles[1].mesh.triangles));
        assert!(crate::geometry::polys_collide(&links[1], &obstacles[1].mesh.triangles));
    }

    #[test]
    fn base_in_obstacle_any_heading() {
        let body = Polygon2::rect(-0.5, -0.25, 0.5, 0.25).unwrap();
        let r = RobotModel::Rigid(RigidBody::new(body, Point2::new(0.0, 0.0)).unwrap());
        let wall = Polygon2::rect(2.0, 2.0, 3.0, 3.0).unwrap();
        let obstacles = vec![Obstacle::new("w", wall.clone()).unwrap()];
        assert!(point_in_polygon(Point2::new(2.5, 2.5), &wall));
        for k in 0..16 {
            let phi = k as f64 * TAU / 16.0;
            let rep = collision_check(&r, &Configuration::new(vec![2.5, 2.5, phi]), &obstacles).unwrap();
            assert_eq!(rep.cause, CollisionCause::BaseInObstacle { obstacle: 0 });
        }
        let rep = collision_check(&r, &Configuration::new(vec![1.6, 2.5, 0.0]), &obstacles).unwrap();
        assert_eq!(rep.cause, CollisionCause::ObstacleHit { link: 0, obstacle: 0 });
    }

    #[test]
    fn folded_chain_self_collides() {
        // Link 1 folded back over link 0, link 2 then crosses link 0.
        let r = chain(3);
        let rep = collision_check(&r, &Configuration::new(vec![0.0, PI - 0.2, PI - 0.2]), &[]).unwrap();
        assert_eq!(rep.cause, CollisionCause::SelfHit { first: 0, second: 2 });
        let rep = collision_check(&r, &Configuration::new(vec![0.0, 0.3, 0.3]), &[]).unwrap();
        assert!(!rep.colliding);
    }

    #[test]
    fn truncation() {
        let r = chain(5);
        let t = r.truncated(3).unwrap();
        assert_eq!(t.dof(), 3);
        assert!(r.truncated(0).is_err());
        assert!(r.truncated(6).is_err());
    }

    fn scene() -> Vec<Obstacle> {
        vec![
            Obstacle::new("a", Polygon2::rect(0.8, 0.2, 1.2, 1.5).unwrap()).unwrap(),
            Obstacle::new("b", Polygon2::rect(-2.5, -0.4, -1.7, 0.4).unwrap()).unwrap(),
            Obstacle::new("c", Polygon2::rect(0.5, -3.0, 0.9, -1.2).unwrap()).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn obstacle_hit_survives_any_suffix(q in proptest::collection::vec(0.0..TAU, 4), s in proptest::collection::vec(0.0..TAU, 4)) {
            let r = chain(4);
            let obstacles = scene();
            let rep = check_unchecked(&r, &q, &obstacles);
            if let CollisionCause::ObstacleHit { link, .. } = rep.cause {
                let mut q2 = q.clone();
                q2[link + 1..].copy_from_slice(&s[link + 1..]);
                prop_assert!(check_unchecked(&r, &q2, &obstacles).colliding);
            }
        }

        #[test]
        fn self_hit_survives_any_prefix_and_suffix(q in proptest::collection::vec(0.0..TAU, 5), s in proptest::collection::vec(0.0..TAU, 5)) {
            let r = chain(5);
            let rep = check_unchecked(&r, &q, &[]);
            if let CollisionCause::SelfHit { first, second } = rep.cause {
                let mut q2 = s.clone();
                q2[first..=second].copy_from_slice(&q[first..=second]);
                prop_assert!(check_unchecked(&r, &q2, &[]).colliding);
            }
        }

        #[test]
        fn base_hit_survives_any_heading(x in -3.0..3.0f64, y in -3.0..3.0f64, phi in 0.0..TAU, phi2 in 0.0..TAU) {
            let body = Polygon2::rect(-0.3, -0.1, 0.3, 0.1).unwrap();
            let r = RobotModel::Rigid(RigidBody::new(body, Point2::new(0.0, 0.0)).unwrap());
            let obstacles = scene();
            if let CollisionCause::BaseInObstacle { .. } = check_unchecked(&r, &[x, y, phi], &obstacles).cause {
                prop_assert!(check_unchecked(&r, &[x, y, phi2], &obstacles).colliding);
            }
        }

        #[test]
        fn placement_deterministic(q in proptest::collection::vec(0.0..TAU, 3)) {
            let r = chain(3);
            let c = Configuration::new(q);
            prop_assert_eq!(placement(&r, &c).unwrap(), placement(&r, &c).unwrap());
        }
    }
}
