#![allow(dead_code)]

use nalgebra::{DVector, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use softcbf::barrier::{build_local_barrier, BarrierBuffer, BarrierGeometry, BufferConfig, LocalBarrier};
use softcbf::homotopy::HomotopyParams;
use softcbf::perception::{fov_boundary, scan, Bounds, Fov, Obstacle, ScanParams, World};

pub fn random_world(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> World {
    random_world_sized(rng, dim, count, 0.3)
}

/// Obstacles whose smallest half-extent is at least `min_size`.
pub fn random_world_sized(rng: &mut ChaCha8Rng, dim: usize, count: usize, min_size: f64) -> World {
    let obstacles = (0..count)
        .map(|_| {
            let x = rng.gen_range(-6.0..6.0);
            let y = rng.gen_range(-6.0..6.0);
            let r = rng.gen_range(min_size..min_size + 0.7);
            match (dim, rng.gen_range(0..2)) {
                (2, 0) => Obstacle::Circle {
                    center: [x, y],
                    radius: r,
                },
                (2, _) => Obstacle::Rectangle {
                    center: [x, y],
                    half_extents: [r, rng.gen_range(min_size..min_size + 0.7)],
                    angle: rng.gen_range(-1.5..1.5),
                },
                (_, 0) => Obstacle::Sphere {
                    center: [x, y, rng.gen_range(-3.0..3.0)],
                    radius: r,
                },
                _ => Obstacle::Box {
                    center: [x, y, rng.gen_range(-3.0..3.0)],
                    half_extents: [r, r, rng.gen_range(min_size..min_size + 0.7)],
                },
            }
        })
        .collect();
    World::new(
        dim,
        Bounds {
            min: vec![-10.0; dim],
            max: vec![10.0; dim],
        },
        obstacles,
    )
    .unwrap()
}

pub fn free_point(rng: &mut ChaCha8Rng, world: &World, dim: usize, half: f64) -> Vector3<f64> {
    loop {
        let mut p = Vector3::zeros();
        for i in 0..dim {
            p[i] = rng.gen_range(-half..half);
        }
        if world.is_free(&p) {
            return p;
        }
    }
}

pub struct Sensor {
    pub geom: BarrierGeometry,
    pub rays: usize,
    pub fov: Fov,
    pub fov_samples: usize,
    pub kappa1: f64,
}

impl Sensor {
    pub fn planar() -> Self {
        Sensor {
            geom: BarrierGeometry::new(0.3, 0.3, 5.0),
            rays: 100,
            fov: Fov::Full,
            fov_samples: 0,
            kappa1: 20.0,
        }
    }

    pub fn sector(width_deg: f64) -> Self {
        Sensor {
            fov: Fov::Sector(width_deg.to_radians()),
            fov_samples: 10,
            ..Self::planar()
        }
    }

    pub fn spatial() -> Self {
        Sensor {
            geom: BarrierGeometry::new(1.4, 0.1, 10.0),
            rays: 300,
            fov: Fov::Full,
            fov_samples: 0,
            kappa1: 20.0,
        }
    }

    pub fn barrier(&self, world: &World, origin: &Vector3<f64>, heading: f64, epoch: u64) -> LocalBarrier {
        let params = ScanParams {
            rays: self.rays,
            r_bar: self.geom.r_bar,
            fov: self.fov,
            heading,
        };
        let s = scan(world, origin, &params, epoch).unwrap();
        let samples = match self.fov {
            Fov::Sector(width) => Some(fov_boundary(origin, heading, width, self.geom.r_bar, self.fov_samples).unwrap()),
            Fov::Full => None,
        };
        build_local_barrier(&s, samples.as_ref(), &self.geom, self.kappa1).unwrap()
    }
}

pub fn buffer_config(window: usize) -> BufferConfig {
    BufferConfig {
        window,
        sample_period: 0.2,
        kappa: 20.0,
        homotopy: HomotopyParams::new(2, 1.0).unwrap(),
    }
}

/// Pose of one scan along a walk.
#[derive(Clone, Copy, Debug)]
pub struct Pose {
    pub origin: Vector3<f64>,
    pub heading: f64,
}

/// Buffers advanced along a short random walk through free space, one per
/// epoch, with the poses of the scans.
pub fn random_walk_buffers(
    rng: &mut ChaCha8Rng,
    world: &World,
    sensor: &Sensor,
    dim: usize,
    window: usize,
    epochs: usize,
) -> (Vec<BarrierBuffer>, Vec<Pose>) {
    let mut pose = Pose {
        origin: free_point(rng, world, dim, 3.0),
        heading: rng.gen_range(-3.0..3.0),
    };
    let first = sensor.barrier(world, &pose.origin, pose.heading, 0);
    let mut buffers = vec![BarrierBuffer::new(first, buffer_config(window)).unwrap()];
    let mut poses = vec![pose];
    for k in 1..epochs {
        let mut step = Vector3::zeros();
        for i in 0..dim {
            step[i] = rng.gen_range(-0.5..0.5);
        }
        if world.is_free(&(pose.origin + step)) {
            pose.origin += step;
        }
        pose.heading += rng.gen_range(-0.4..0.4);
        let b = sensor.barrier(world, &pose.origin, pose.heading, k as u64);
        let next = buffers.last().unwrap().advance(b).unwrap();
        buffers.push(next);
        poses.push(pose);
    }
    (buffers, poses)
}

/// Filter state `(q, p)` at a position with zero velocity.
pub fn state_at(p: &Vector3<f64>, dim: usize) -> DVector<f64> {
    let mut x = DVector::zeros(2 * dim);
    for i in 0..dim {
        x[i] = p[i];
    }
    x
}
