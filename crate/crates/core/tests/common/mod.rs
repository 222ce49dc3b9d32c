#![allow(dead_code)]

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use grasp_core::geometry::GraspRect;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rect(x: f64, y: f64, theta: f64, w: f64, h: f64) -> GraspRect {
    GraspRect::new(x, y, theta, w, h).unwrap()
}

/// Point-in-rectangle by projecting onto the rectangle's own axes.
pub fn inside(r: &GraspRect, px: f64, py: f64) -> bool {
    let (s, c) = r.theta().sin_cos();
    let (dx, dy) = (px - r.x(), py - r.y());
    let along = dx * c + dy * s;
    let across = -dx * s + dy * c;
    along.abs() <= r.w() / 2.0 && across.abs() <= r.h() / 2.0
}

fn bounds(r: &GraspRect) -> (f64, f64, f64, f64) {
    let (s, c) = r.theta().sin_cos();
    let ex = (r.w() * c.abs() + r.h() * s.abs()) / 2.0;
    let ey = (r.w() * s.abs() + r.h() * c.abs()) / 2.0;
    (r.x() - ex, r.x() + ex, r.y() - ey, r.y() + ey)
}

/// Jaccard estimated from `samples` jittered-grid points over the joint
/// bounding box.
pub fn monte_carlo_jaccard(a: &GraspRect, b: &GraspRect, samples: usize, seed: u64) -> f64 {
    let (ax0, ax1, ay0, ay1) = bounds(a);
    let (bx0, bx1, by0, by1) = bounds(b);
    let (x0, x1) = (ax0.min(bx0), ax1.max(bx1));
    let (y0, y1) = (ay0.min(by0), ay1.max(by1));
    let side = (samples as f64).sqrt().ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut both, mut either) = (0usize, 0usize);
    for i in 0..side {
        for j in 0..side {
            let px = x0 + (x1 - x0) * (i as f64 + rng.gen::<f64>()) / side as f64;
            let py = y0 + (y1 - y0) * (j as f64 + rng.gen::<f64>()) / side as f64;
            let (ia, ib) = (inside(a, px, py), inside(b, px, py));
            both += usize::from(ia && ib);
            either += usize::from(ia || ib);
        }
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

/// Overlapping-ish pair: the second centre lies within the first's extent.
pub fn random_pair(rng: &mut ChaCha8Rng) -> (GraspRect, GraspRect) {
    let a = rect(
        rng.gen_range(40.0..180.0),
        rng.gen_range(40.0..180.0),
        rng.gen_range(-PI / 2.0..PI / 2.0),
        rng.gen_range(5.0..60.0),
        rng.gen_range(5.0..40.0),
    );
    let b = rect(
        a.x() + rng.gen_range(-25.0..25.0),
        a.y() + rng.gen_range(-25.0..25.0),
        rng.gen_range(-PI / 2.0..PI / 2.0),
        rng.gen_range(5.0..60.0),
        rng.gen_range(5.0..40.0),
    );
    (a, b)
}

/// Valid rectangles whose centre and extents fit the 224 frame.
pub fn frame_rect() -> impl Strategy<Value = GraspRect> {
    (1.0..223.0f64, 1.0..223.0f64, -PI / 2.0..PI / 2.0, 1.0..220.0f64, 1.0..220.0f64)
        .prop_map(|(x, y, t, w, h)| rect(x, y, t, w, h))
}

pub fn any_rect() -> impl Strategy<Value = GraspRect> {
    (-500.0..500.0f64, -500.0..500.0f64, -10.0..10.0f64, 0.5..300.0f64, 0.5..300.0f64)
        .prop_map(|(x, y, t, w, h)| rect(x, y, t, w, h))
}

pub fn theta_close(a: f64, b: f64, tol: f64) -> bool {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d) <= tol
}

pub fn rect_close(a: &GraspRect, b: &GraspRect, tol: f64) -> bool {
    (a.x() - b.x()).abs() <= tol
        && (a.y() - b.y()).abs() <= tol
        && (a.w() - b.w()).abs() <= tol
        && (a.h() - b.h()).abs() <= tol
        && theta_close(a.theta(), b.theta(), tol)
}

/// Label-file lines for `r`, one corner per line.
pub fn label_lines(r: &GraspRect) -> String {
    r.to_corners()
        .corners
        .iter()
        .map(|p| format!("{:.6} {:.6}\n", p.x, p.y))
        .collect()
}

pub struct FixtureSample<'a> {
    pub id: &'a str,
    pub width: u32,
    pub height: u32,
    pub labels: &'a [GraspRect],
    pub nan_quads: usize,
    pub with_cloud: bool,
}

/// Writes a Cornell-layout sample: gradient RGB, optional point cloud with a
/// depth ramp (every fourth pixel left empty), and a positive label file.
pub fn write_sample(root: &Path, s: &FixtureSample) {
    let img = image::RgbImage::from_fn(s.width, s.height, |x, y| {
        image::Rgb([(x * 255 / s.width) as u8, (y * 255 / s.height) as u8, 90])
    });
    img.save(root.join(format!("{}r.png", s.id))).unwrap();

    let mut labels = String::new();
    for r in s.labels {
        labels.push_str(&label_lines(r));
    }
    for _ in 0..s.nan_quads {
        labels.push_str("NaN NaN\nNaN NaN\nNaN NaN\nNaN NaN\n");
    }
    fs::write(root.join(format!("{}cpos.txt", s.id)), labels).unwrap();

    if s.with_cloud {
        let mut cloud = String::from(
            "# .PCD v.7 - Point Cloud Data file format\nFIELDS x y z rgb index\nSIZE 4 4 4 4 4\nTYPE F F F F U\nCOUNT 1 1 1 1 1\n",
        );
        let n = (s.width * s.height) as usize;
        let points: Vec<usize> = (0..n).filter(|i| i % 4 != 3).collect();
        cloud.push_str(&format!("WIDTH {}\nHEIGHT 1\nPOINTS {}\nDATA ascii\n", points.len(), points.len()));
        for i in points {
            let z = 0.5 + (i % s.width as usize) as f64 / s.width as f64;
            cloud.push_str(&format!("0 0 {z:.6} 4.2e+06 {i}\n"));
        }
        fs::write(root.join(format!("{}.txt", s.id)), cloud).unwrap();
    }
}

/// `n` small samples with two labels each, ids `pcd0000..`.
pub fn write_dataset(root: &Path, n: usize, width: u32, height: u32) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..n {
        let (w, h) = (width as f64, height as f64);
        let labels: Vec<GraspRect> = (0..2)
            .map(|_| {
                rect(
                    rng.gen_range(0.35 * w..0.65 * w),
                    rng.gen_range(0.35 * h..0.65 * h),
                    rng.gen_range(-PI / 2.0..PI / 2.0),
                    rng.gen_range(0.1 * w..0.25 * w),
                    rng.gen_range(0.05 * h..0.15 * h),
                )
            })
            .collect();
        write_sample(
            root,
            &FixtureSample {
                id: &format!("pcd{i:04}"),
                width,
                height,
                labels: &labels,
                nan_quads: usize::from(i == 0),
                with_cloud: i % 3 != 2,
            },
        );
    }
}
