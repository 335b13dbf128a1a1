#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::PathBuf;

use nopath_core::oracle::{brute_force_bitmap, flood_labels};
use nopath_core::scenario::grid_for;
use nopath_core::{
    load_scenario, CSpaceBitmap, Configuration, Connectivity, Link, Obstacle, Point2, Polygon2, RigidBody, RobotModel, Scenario,
    SerialChain,
};
use rand::Rng;

pub fn shipped(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Star-shaped CCW polygon around `center`: jittered, evenly spaced angles.
pub fn random_polygon(rng: &mut impl Rng, center: Point2, r_min: f64, r_max: f64) -> Polygon2 {
    let n = rng.gen_range(3..=7);
    let start = rng.gen_range(0.0..TAU);
    let pts = (0..n)
        .map(|k| {
            let a = start + (k as f64 + rng.gen_range(0.0..0.8)) * TAU / n as f64;
            let r = rng.gen_range(r_min..r_max);
            Point2::new(center.x + r * a.cos(), center.y + r * a.sin())
        })
        .collect();
    Polygon2::new(pts).expect("star polygon is simple and CCW")
}

/// A 2-4 link chain (`dof` links) with random lengths, widths and joint limits.
pub fn random_chain(rng: &mut impl Rng, dof: usize) -> SerialChain {
    let links = (0..dof)
        .map(|_| {
            let l = rng.gen_range(0.5..1.2);
            let mut link = Link::new(l).with_width(rng.gen_range(0.03..0.25));
            if rng.gen_bool(0.3) {
                let lo = rng.gen_range(-3.0..-0.5);
                link = link.with_limits(lo, lo + rng.gen_range(1.0..3.5));
            }
            link
        })
        .collect();
    SerialChain::new(Point2::default(), links).unwrap()
}

pub fn random_obstacles(rng: &mut impl Rng, reach: f64, count: usize) -> Vec<Obstacle> {
    (0..count)
        .map(|i| {
            let r = rng.gen_range(0.3 * reach..1.1 * reach);
            let a = rng.gen_range(0.0..TAU);
            let size = rng.gen_range(0.1..0.45) * reach;
            Obstacle::new(format!("o{i}"), random_polygon(rng, Point2::new(r * a.cos(), r * a.sin()), 0.3 * size, size)).unwrap()
        })
        .collect()
}

/// A random robot, obstacles and grid, without start and goal yet.
pub struct Scene {
    pub robot: RobotModel,
    pub obstacles: Vec<Obstacle>,
    pub grid: nopath_core::GridSpec,
}

pub fn random_scene(rng: &mut impl Rng, dof: usize, max_res: usize) -> Scene {
    let rigid = dof == 3 && rng.gen_bool(0.35);
    let (robot, obstacles, translation) = if rigid {
        // Wide angular gaps can leave the origin outside the body; redraw.
        let body = loop {
            if let Ok(b) = RigidBody::new(random_polygon(rng, Point2::default(), 0.2, 0.6), Point2::default()) {
                break b;
            }
        };
        let robot = RobotModel::Rigid(body);
        let (w, h) = (rng.gen_range(3.0..5.0), rng.gen_range(3.0..5.0));
        let count = rng.gen_range(2..=8);
        let obstacles = (0..count)
            .map(|i| {
                let c = Point2::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
                let r_max = rng.gen_range(0.4..1.2);
                Obstacle::new(format!("o{i}"), random_polygon(rng, c, 0.2, r_max)).unwrap()
            })
            .collect();
        (robot, obstacles, Some(((0.0, w), (0.0, h))))
    } else {
        let chain = random_chain(rng, dof);
        let reach = chain.total_length();
        let count = rng.gen_range(2..=7);
        (RobotModel::Chain(chain), random_obstacles(rng, reach, count), None)
    };
    let res: Vec<usize> = (0..dof).map(|_| rng.gen_range(4..=max_res)).collect();
    let grid = grid_for(&robot, &res, translation).unwrap();
    Scene { robot, obstacles, grid }
}

fn center(truth: &CSpaceBitmap, cell: usize) -> Configuration {
    let spec = truth.spec();
    Configuration::new(spec.cell_to_config(&spec.lin_to_multi(cell).unwrap()).unwrap())
}

/// A random scenario with free start and goal cells, plus its exhaustive
/// bitmap. When the free space has several components, start and goal are
/// put in different ones about half the time.
pub fn random_scenario(rng: &mut impl Rng, dof: usize, max_res: usize) -> (Scenario, CSpaceBitmap) {
    loop {
        let scene = random_scene(rng, dof, max_res);
        let truth = brute_force_bitmap(&scene.robot, &scene.obstacles, &scene.grid).unwrap();
        let (labels, count) = flood_labels(&truth, Connectivity::Faces);
        let free: Vec<usize> = (0..truth.size()).filter(|&c| truth.is_free(c)).collect();
        if free.is_empty() {
            continue;
        }
        let start = free[rng.gen_range(0..free.len())];
        let split = count > 1 && rng.gen_bool(0.5);
        let pool: Vec<usize> = if split { free.iter().copied().filter(|&c| labels[c] != labels[start]).collect() } else { free };
        let goal = pool[rng.gen_range(0..pool.len())];
        let sc = Scenario::new(scene.robot, scene.obstacles, center(&truth, start), center(&truth, goal), scene.grid, None).unwrap();
        return (sc, truth);
    }
}
