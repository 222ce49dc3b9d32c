//! Annotated PNG output: rectangles drawn over RGB images or network inputs.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::geometry::{GraspRect, Point};
use crate::preprocess::NetInput;

pub const TRUTH_COLOR: Rgb<u8> = Rgb([40, 120, 255]);
pub const SUCCESS_COLOR: Rgb<u8> = Rgb([0, 200, 0]);
pub const FAILURE_COLOR: Rgb<u8> = Rgb([230, 20, 20]);
/// Prediction colour when no verdict is available.
pub const PREDICTION_COLOR: Rgb<u8> = Rgb([255, 200, 0]);

/// Maps `{R, G, depth}` from `[-1, 1]` to bytes, depth in the blue slot.
pub fn net_input_to_rgb(input: &NetInput) -> RgbImage {
    let [r, g, d] = &input.channels;
    let to_byte = |v: f64| (((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round()) as u8;
    RgbImage::from_fn(r.width() as u32, r.height() as u32, |x, y| {
        let (u, v) = (x as usize, y as usize);
        Rgb([to_byte(r.get(u, v)), to_byte(g.get(u, v)), to_byte(d.get(u, v))])
    })
}

fn plot(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

/// Straight segment with a square brush of side `thickness`.
pub fn draw_line(img: &mut RgbImage, a: Point, b: Point, color: Rgb<u8>, thickness: u32) {
    let steps = (b - a).norm().ceil().max(1.0) as usize;
    let half = thickness as i64 / 2;
    for i in 0..=steps {
        let p = a + (b - a) * (i as f64 / steps as f64);
        let (cx, cy) = (p.x.floor() as i64, p.y.floor() as i64);
        for dy in -half..(thickness as i64 - half) {
            for dx in -half..(thickness as i64 - half) {
                plot(img, cx + dx, cy + dy, color);
            }
        }
    }
}

/// Outline of a grasp rectangle; the plate edges (`c1 -> c2`, `c3 -> c0`)
/// are drawn thicker so the gripper axis is visible.
pub fn draw_rect(img: &mut RgbImage, rect: &GraspRect, color: Rgb<u8>) {
    let c = rect.to_corners().corners;
    for i in 0..4 {
        let thickness = if i % 2 == 1 { 3 } else { 1 };
        draw_line(img, c[i], c[(i + 1) % 4], color, thickness);
    }
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::ImageDecode {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })
}

/// Ground truths in [`TRUTH_COLOR`]; the prediction, if any, green on
/// success and red on failure.
pub fn annotate(
    base: &RgbImage,
    truths: &[GraspRect],
    prediction: Option<(&GraspRect, Option<bool>)>,
) -> RgbImage {
    let mut img = base.clone();
    for t in truths {
        draw_rect(&mut img, t, TRUTH_COLOR);
    }
    if let Some((p, verdict)) = prediction {
        let color = match verdict {
            Some(true) => SUCCESS_COLOR,
            Some(false) => FAILURE_COLOR,
            None => PREDICTION_COLOR,
        };
        draw_rect(&mut img, p, color);
    }
    img
}
