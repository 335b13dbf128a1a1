//! Scenario files and resolution selection.
//!
//! Scenarios are TOML documents. Angles are radians unless written as a
//! string with a `deg` suffix (`"90deg"`); `"1.2rad"` is also accepted.
//!
//! ```toml
//! truncate_to_links = 3          # optional, serial chains only
//! start = [0.5, "90deg"]
//! goal = [3.0, 0.0]
//!
//! [robot]
//! kind = "serial_chain"          # or "rigid"
//! base = [0.0, 0.0]
//! links = [
//!   { length = 1.0 },                           # width defaults to 5% of length
//!   { length = 1.0, width = 0.1, limits = ["-90deg", "90deg"] },
//! ]
//! # kind = "rigid" takes `body = [[x, y], ...]` (CCW) and `reference_point = [x, y]`
//!
//! [grid]
//! resolution = [36, 36]          # or a single integer for every axis
//! # delta = 0.35                 # used when `resolution` is omitted (chains)
//! # x = [0.0, 10.0]              # translation bounds, rigid bodies only
//! # y = [0.0, 5.0]
//!
//! [[obstacles]]
//! id = "wall"
//! vertices = [[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]]   # CCW
//! ```

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitmap::{GridError, GridSpec};
use crate::geometry::{GeometryError, Point2, Polygon2};
use crate::kinematics::{Configuration, Link, Obstacle, RigidBody, RobotModel, SerialChain};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("invalid delta: {0}")]
    InvalidDelta(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

/// A fully validated planning problem.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub robot: RobotModel,
    pub obstacles: Vec<Obstacle>,
    pub start: Configuration,
    pub goal: Configuration,
    pub grid: GridSpec,
    /// Prove on the first `k` links only (serial chains).
    pub truncate_to_links: Option<usize>,
}

impl PartialEq for Scenario {
    fn eq(&self, other: &Self) -> bool {
        self.robot == other.robot
            && self.obstacles.len() == other.obstacles.len()
            && self
                .obstacles
                .iter()
                .zip(&other.obstacles)
                .all(|(a, b)| a.id == b.id && a.polygon == b.polygon)
            && self.start == other.start
            && self.goal == other.goal
            && self.grid == other.grid
            && self.truncate_to_links == other.truncate_to_links
    }
}

/// Grid over the robot's axes with the given resolution. Rigid bodies need
/// translation bounds `(x, y)`.
pub fn grid_for(
    robot: &RobotModel,
    resolution: &[usize],
    translation: Option<((f64, f64), (f64, f64))>,
) -> Result<GridSpec, ScenarioError> {
    let axes = robot.axes();
    if resolution.len() != axes.len() {
        return Err(invalid(format!(
            "grid dimension {} does not match robot DOF {}",
            resolution.len(),
            axes.len()
        )));
    }
    let mut lo = Vec::with_capacity(axes.len());
    let mut hi = Vec::with_capacity(axes.len());
    for (a, info) in axes.iter().enumerate() {
        let (l, h) = match info.bounds {
            Some(b) => b,
            None => {
                let (x, y) = translation.ok_or_else(|| invalid("rigid body grids need x and y bounds"))?;
                if a == 0 {
                    x
                } else {
                    y
                }
            }
        };
        lo.push(l);
        hi.push(h);
    }
    let wrap = axes.iter().map(|i| i.wrap).collect();
    GridSpec::new(resolution.to_vec(), wrap, lo, hi).map_err(|e| invalid(e.to_string()))
}

impl Scenario {
    /// Validates every invariant: obstacle ids unique, grid matches the
    /// robot's axes, start and goal valid and inside the grid bounds.
    pub fn new(
        robot: RobotModel,
        obstacles: Vec<Obstacle>,
        start: Configuration,
        goal: Configuration,
        grid: GridSpec,
        truncate_to_links: Option<usize>,
    ) -> Result<Self, ScenarioError> {
        for (i, o) in obstacles.iter().enumerate() {
            if obstacles[..i].iter().any(|p| p.id == o.id) {
                return Err(invalid(format!("duplicate obstacle id '{}'", o.id)));
            }
        }
        let axes = robot.axes();
        if grid.ndim() != axes.len() {
            return Err(invalid(format!("grid dimension {} does not match robot DOF {}", grid.ndim(), axes.len())));
        }
        for (a, info) in axes.iter().enumerate() {
            if grid.wrap()[a] != info.wrap {
                return Err(invalid(format!("axis {a}: wrap flag disagrees with the robot")));
            }
            if let Some((l, h)) = info.bounds {
                if grid.lo()[a] != l || grid.hi()[a] != h {
                    return Err(invalid(format!("axis {a}: grid bounds disagree with the joint range")));
                }
            }
        }
        for (name, q) in [("start", &start), ("goal", &goal)] {
            robot.validate(q).map_err(|e| invalid(format!("{name}: {e}")))?;
            grid.config_to_cell(q.values()).map_err(|e| invalid(format!("{name}: {e}")))?;
        }
        if let Some(k) = truncate_to_links {
            robot.truncated(k).map_err(|e| invalid(e.to_string()))?;
        }
        Ok(Self { robot, obstacles, start, goal, grid, truncate_to_links })
    }

    pub fn dof(&self) -> usize {
        self.robot.dof()
    }

    /// The scenario actually searched: truncation applied to robot, grid,
    /// start and goal.
    pub fn effective(&self) -> Result<Scenario, ScenarioError> {
        match self.truncate_to_links {
            None => Ok(self.clone()),
            Some(k) => self.truncated(k),
        }
    }

    /// Restricts a serial chain to its first `k` links. Any path of the full
    /// chain projects onto a path of the truncated one, so infeasibility of
    /// the truncated problem implies infeasibility of the full problem.
    pub fn truncated(&self, k: usize) -> Result<Scenario, ScenarioError> {
        let robot = self.robot.truncated(k).map_err(|e| invalid(e.to_string()))?;
        let grid = self.grid.truncated(k).map_err(|e| invalid(e.to_string()))?;
        Scenario::new(
            robot,
            self.obstacles.clone(),
            Configuration::new(self.start.values()[..k].to_vec()),
            Configuration::new(self.goal.values()[..k].to_vec()),
            grid,
            None,
        )
    }

    /// Same problem at another resolution.
    pub fn with_resolution(&self, resolution: &[usize]) -> Result<Scenario, ScenarioError> {
        let n = self.grid.ndim();
        let dims = match resolution.len() {
            1 => vec![resolution[0]; n],
            k if k == n => resolution.to_vec(),
            k => return Err(invalid(format!("resolution has {k} entries for a {n}-d grid"))),
        };
        let grid = GridSpec::new(dims, self.grid.wrap().to_vec(), self.grid.lo().to_vec(), self.grid.hi().to_vec())
            .map_err(|e| invalid(e.to_string()))?;
        Scenario::new(self.robot.clone(), self.obstacles.clone(), self.start.clone(), self.goal.clone(), grid, self.truncate_to_links)
    }

    pub fn start_cell(&self) -> Result<usize, GridError> {
        let m = self.grid.config_to_cell(self.start.values())?;
        self.grid.multi_to_lin(&m)
    }

    pub fn goal_cell(&self) -> Result<usize, GridError> {
        let m = self.grid.config_to_cell(self.goal.values())?;
        self.grid.multi_to_lin(&m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        load_scenario(path)
    }

    pub fn to_toml(&self) -> String {
        let file = ScenarioFile::from(self);
        toml::to_string_pretty(&file).expect("scenario serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
    }
}

/// Per-axis resolution guaranteeing a joint step below `delta / sum(l_i)`.
/// Full-circle joints get `ceil(2pi / theta)` cells, limited joints
/// `ceil((hi - lo) / theta)`.
pub fn suggest_resolution(chain: &SerialChain, delta: f64) -> Result<Vec<usize>, ScenarioError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(ScenarioError::InvalidDelta(format!("delta must be > 0, got {delta}")));
    }
    let theta = delta / chain.total_length();
    Ok(chain
        .links()
        .iter()
        .map(|l| {
            let span = l.limits.map_or(TAU, |(lo, hi)| hi - lo);
            // Absorb rounding noise so exact ratios are not bumped up a cell.
            let cells = (span / theta * (1.0 - 1e-12)).ceil() as usize;
            cells.max(2)
        })
        .collect())
}

/// Smallest obstacle edge, the default `delta` for [`suggest_resolution`].
pub fn min_obstacle_edge(obstacles: &[Obstacle]) -> Option<f64> {
    obstacles.iter().map(|o| o.polygon.min_edge_length()).reduce(f64::min)
}

// File schema.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Angle {
    Radians(f64),
    Text(String),
}

impl Angle {
    fn radians(&self, field: &str) -> Result<f64, ScenarioError> {
        match self {
            Angle::Radians(v) => Ok(*v),
            Angle::Text(s) => {
                let t = s.trim();
                let parse = |num: &str| {
                    num.trim()
                        .parse::<f64>()
                        .map_err(|_| ScenarioError::Parse(format!("{field}: cannot parse angle '{s}'")))
                };
                if let Some(num) = t.strip_suffix("deg") {
                    Ok(parse(num)?.to_radians())
                } else if let Some(num) = t.strip_suffix("rad") {
                    parse(num)
                } else {
                    parse(t)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Resolution {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkFile {
    length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    limits: Option<[Angle; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RobotFile {
    SerialChain {
        #[serde(default)]
        base: [f64; 2],
        links: Vec<LinkFile>,
    },
    Rigid {
        body: Vec<[f64; 2]>,
        reference_point: [f64; 2],
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleFile {
    id: String,
    vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resolution: Option<Resolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncate_to_links: Option<usize>,
    start: Vec<Angle>,
    goal: Vec<Angle>,
    robot: RobotFile,
    #[serde(default)]
    grid: GridFile,
    #[serde(default)]
    obstacles: Vec<ObstacleFile>,
}

fn points(v: &[[f64; 2]]) -> Vec<Point2> {
    v.iter().map(|p| Point2::new(p[0], p[1])).collect()
}

fn polygon(what: &str, v: &[[f64; 2]]) -> Result<Polygon2, ScenarioError> {
    Polygon2::new(points(v)).map_err(|e| match e {
        GeometryError::Orientation => invalid(format!("polygon orientation: {what} must be counter-clockwise")),
        other => invalid(format!("{what}: {other}")),
    })
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let robot = match &self.robot {
            RobotFile::SerialChain { base, links } => {
                let mut out = Vec::with_capacity(links.len());
                for (k, l) in links.iter().enumerate() {
                    let mut link = Link::new(l.length);
                    if let Some(w) = l.width {
                        link = link.with_width(w);
                    }
                    if let Some([lo, hi]) = &l.limits {
                        let field = format!("robot.links[{k}].limits");
                        link = link.with_limits(lo.radians(&field)?, hi.radians(&field)?);
                    }
                    out.push(link);
                }
                RobotModel::Chain(
                    SerialChain::new(Point2::new(base[0], base[1]), out).map_err(|e| invalid(e.to_string()))?,
                )
            }
            RobotFile::Rigid { body, reference_point } => {
                let body = polygon("robot body", body)?;
                let r = Point2::new(reference_point[0], reference_point[1]);
                RobotModel::Rigid(RigidBody::new(body, r).map_err(|e| invalid(e.to_string()))?)
            }
        };
        let mut obstacles = Vec::with_capacity(self.obstacles.len());
        for o in &self.obstacles {
            let poly = polygon(&format!("obstacle '{}'", o.id), &o.vertices)?;
            obstacles.push(Obstacle::new(o.id.clone(), poly).map_err(|e| invalid(e.to_string()))?);
        }
        let dof = robot.dof();
        let resolution = match (&self.grid.resolution, &robot) {
            (Some(Resolution::Uniform(n)), _) => vec![*n; dof],
            (Some(Resolution::PerAxis(v)), _) => v.clone(),
            (None, RobotModel::Chain(chain)) => {
                let delta = match self.grid.delta {
                    Some(d) => d,
                    None => min_obstacle_edge(&obstacles)
                        .ok_or_else(|| ScenarioError::InvalidDelta("no obstacles to derive delta from".into()))?,
                };
                suggest_resolution(chain, delta)?
            }
            (None, RobotModel::Rigid(_)) => return Err(invalid("grid.resolution is required for rigid bodies")),
        };
        let translation = match (self.grid.x, self.grid.y) {
            (Some(x), Some(y)) => Some(((x[0], x[1]), (y[0], y[1]))),
            (None, None) => None,
            _ => return Err(invalid("grid.x and grid.y must be given together")),
        };
        let grid = grid_for(&robot, &resolution, translation)?;
        let angles = |name: &str, v: &[Angle]| -> Result<Configuration, ScenarioError> {
            v.iter()
                .enumerate()
                .map(|(i, a)| a.radians(&format!("{name}[{i}]")))
                .collect::<Result<Vec<_>, _>>()
                .map(Configuration::new)
        };
        let start = angles("start", &self.start)?;
        let goal = angles("goal", &self.goal)?;
        Scenario::new(robot, obstacles, start, goal, grid, self.truncate_to_links)
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        let pair = |p: Point2| [p.x, p.y];
        let robot = match &s.robot {
            RobotModel::Chain(c) => RobotFile::SerialChain {
                base: pair(c.base()),
                links: c
                    .links()
                    .iter()
                    .map(|l| LinkFile {
                        length: l.length,
                        width: Some(l.width),
                        limits: l.limits.map(|(lo, hi)| [Angle::Radians(lo), Angle::Radians(hi)]),
                    })
                    .collect(),
            },
            RobotModel::Rigid(b) => RobotFile::Rigid {
                body: b.body().vertices().iter().map(|&p| pair(p)).collect(),
                reference_point: pair(b.reference_point()),
            },
        };
        let (x, y) = match &s.robot {
            RobotModel::Rigid(_) => (Some([s.grid.lo()[0], s.grid.hi()[0]]), Some([s.grid.lo()[1], s.grid.hi()[1]])),
            RobotModel::Chain(_) => (None, None),
        };
        let radians = |q: &Configuration| q.values().iter().map(|&v| Angle::Radians(v)).collect();
        ScenarioFile {
            truncate_to_links: s.truncate_to_links,
            start: radians(&s.start),
            goal: radians(&s.goal),
            robot,
            grid: GridFile { resolution: Some(Resolution::PerAxis(s.grid.dims().to_vec())), delta: None, x, y },
            obstacles: s
                .obstacles
                .iter()
                .map(|o| ObstacleFile { id: o.id.clone(), vertices: o.polygon.vertices().iter().map(|&p| pair(p)).collect() })
                .collect(),
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    file.into_scenario()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}
