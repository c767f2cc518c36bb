//! Named scenarios with the published parameter sets on shipped maps.

use crate::filter::FilterMode;
use crate::perception::{Bounds, Obstacle, World};

use super::scenario::{CbfParams, PlantKind, RunParams, Scenario};

/// Preset names, in listing order.
pub const PRESET_NAMES: [&str; 9] = [
    "ground-360-a",
    "ground-360-b",
    "ground-360-c",
    "ground-fov-a",
    "ground-fov-b",
    "ground-fov-c",
    "quadrotor-a",
    "quadrotor-b",
    "quadrotor-c",
];

const GROUND_360_GOALS: [[f64; 2]; 3] = [[13.0, 5.0], [10.0, 13.0], [1.0, 11.0]];
const GROUND_FOV_GOALS: [[f64; 2]; 3] = [[11.0, 2.0], [10.0, 13.0], [1.0, 11.0]];
const QUAD_GOALS: [[f64; 3]; 3] = [[0.0, 10.0, 5.0], [-10.0, 10.0, 8.0], [-10.0, 0.0, 3.0]];

fn rect(cx: f64, cy: f64, hx: f64, hy: f64) -> Obstacle {
    Obstacle::Rectangle {
        center: [cx, cy],
        half_extents: [hx, hy],
        angle: 0.0,
    }
}

fn circle(cx: f64, cy: f64, r: f64) -> Obstacle {
    Obstacle::Circle {
        center: [cx, cy],
        radius: r,
    }
}

/// Walled 2-D yard with blocks and round posts between the start and goals.
pub fn corridor_blocks_world() -> World {
    World {
        dimension: 2,
        bounds: Bounds {
            min: vec![-3.0, -3.0],
            max: vec![17.0, 17.0],
        },
        obstacles: vec![
            // perimeter
            rect(7.0, -2.0, 9.0, 0.5),
            rect(7.0, 16.0, 9.0, 0.5),
            rect(-2.0, 7.0, 0.5, 9.0),
            rect(16.0, 7.0, 0.5, 9.0),
            // blocks
            rect(9.5, 5.2, 0.6, 1.6),
            rect(3.0, 7.0, 1.5, 0.5),
            rect(12.5, 9.0, 1.0, 0.6),
            circle(7.5, 8.5, 1.1),
            circle(6.0, 12.5, 0.8),
            circle(12.0, 1.0, 0.6),
        ],
    }
}

/// Vertical pillars and a floating block between the start and goals.
pub fn pillar_field_world() -> World {
    let cyl = |x: f64, y: f64, r: f64| Obstacle::Cylinder {
        center: [x, y],
        radius: r,
        z_min: 0.0,
        z_max: 12.0,
    };
    World {
        dimension: 3,
        bounds: Bounds {
            min: vec![-16.0, -16.0, 0.0],
            max: vec![16.0, 16.0, 12.0],
        },
        obstacles: vec![
            cyl(5.0, -4.0, 1.0),
            cyl(2.0, 2.0, 1.2),
            cyl(-3.0, 6.0, 1.0),
            cyl(-6.0, -2.0, 1.0),
            cyl(4.0, 6.0, 0.8),
            Obstacle::Sphere {
                center: [-7.0, 8.0, 6.0],
                radius: 1.2,
            },
            Obstacle::Box {
                center: [-2.0, -6.0, 4.0],
                half_extents: [1.0, 1.0, 1.0],
            },
        ],
    }
}

fn ground_cbf(kappa: f64, window: usize) -> CbfParams {
    CbfParams {
        kappa1: kappa,
        kappa,
        window,
        rays: 100,
        fov_samples: 0,
        sample_period: 0.2,
        lambda: 1.0,
        relative_degree: 2,
        alpha1: 20.0,
        alpha2: Some(20.0),
        d_w: 0.3,
        d_s: 0.3,
        r_bar: 5.0,
        fov_degrees: None,
        fov_clearance: None,
    }
}

fn ground(name: String, goal: [f64; 2], cbf: CbfParams, description: &str) -> Scenario {
    Scenario {
        name,
        description: description.into(),
        world: corridor_blocks_world(),
        plant: PlantKind::Unicycle,
        initial_state: vec![5.0, 2.0, 0.0, 0.0],
        goals: vec![goal.to_vec()],
        goal_radius: 0.5,
        cbf,
        run: RunParams {
            duration: 15.0,
            dt: 0.001,
            seed: 0,
        },
        filter_mode: FilterMode::Strict,
    }
}

fn quadrotor(name: String, goal: [f64; 3]) -> Scenario {
    Scenario {
        name,
        description: "attitude-stabilised quadrotor, 300-point spherical scans".into(),
        world: pillar_field_world(),
        plant: PlantKind::QuadFull,
        initial_state: vec![8.0, -10.0, 5.0, 0.0, 0.0, 0.0],
        goals: vec![goal.to_vec()],
        goal_radius: 0.5,
        cbf: CbfParams {
            kappa1: 20.0,
            kappa: 20.0,
            window: 3,
            rays: 300,
            fov_samples: 0,
            sample_period: 0.2,
            lambda: 1.0,
            relative_degree: 2,
            alpha1: 40.0,
            alpha2: Some(2.5),
            d_w: 1.4,
            d_s: 0.1,
            r_bar: 10.0,
            fov_degrees: None,
            fov_clearance: None,
        },
        run: RunParams {
            duration: 30.0,
            dt: 2.5e-4,
            seed: 0,
        },
        filter_mode: FilterMode::Strict,
    }
}

pub fn preset(name: &str) -> Option<Scenario> {
    let idx = |s: &str| match s {
        "a" => Some(0),
        "b" => Some(1),
        "c" => Some(2),
        _ => None,
    };
    let (family, letter) = name.rsplit_once('-')?;
    let i = idx(letter)?;
    match family {
        "ground-360" => Some(ground(
            name.into(),
            GROUND_360_GOALS[i],
            ground_cbf(20.0, 2),
            "unicycle, full-circle 100-ray scans",
        )),
        "ground-fov" => {
            let mut cbf = ground_cbf(30.0, 6);
            cbf.alpha1 = 30.0;
            cbf.alpha2 = Some(30.0);
            cbf.fov_degrees = Some(100.0);
            cbf.fov_samples = 400;
            Some(ground(
                name.into(),
                GROUND_FOV_GOALS[i],
                cbf,
                "unicycle, 100-degree sensor with boundary samples",
            ))
        }
        "quadrotor" => Some(quadrotor(name.into(), QUAD_GOALS[i])),
        _ => None,
    }
}

pub fn all_presets() -> Vec<Scenario> {
    PRESET_NAMES
        .iter()
        .map(|n| preset(n).expect("listed preset exists"))
        .collect()
}
