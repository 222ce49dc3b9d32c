//! Network input composition and target normalization.
//!
//! Inputs: the sample is resized to 224x224 (bilinear), the blue channel is
//! replaced by depth, and each channel is then min-max scaled onto `[-1, 1]`.
//! Targets: the 6-D vector `(x, y, sin, cos, w, h)` is mapped onto `[0, 1]`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::geometry::{canonical_angle, corners_to_rect, GraspRect, Point};
use crate::plane::Plane;

/// Side of the square network frame, pixels.
pub const FRAME: usize = 224;
pub const FRAME_F: f64 = FRAME as f64;
/// Channel order of a [`NetInput`].
pub const CHANNELS: [&str; 3] = ["R", "G", "depth"];

/// Three 224x224 planes `{R, G, depth}` with values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetInput {
    pub channels: [Plane; 3],
}

impl NetInput {
    /// Wraps three planes; panics unless each is `FRAME x FRAME`.
    pub fn new(channels: [Plane; 3]) -> Self {
        for c in &channels {
            assert!(
                c.width() == FRAME && c.height() == FRAME,
                "network input planes must be {FRAME}x{FRAME}"
            );
        }
        Self { channels }
    }

    pub fn filled(value: f64) -> Self {
        Self::new(std::array::from_fn(|_| Plane::new(FRAME, FRAME, value)))
    }

    pub fn map_planes(&self, f: impl Fn(&Plane) -> Plane) -> Self {
        Self::new([
            f(&self.channels[0]),
            f(&self.channels[1]),
            f(&self.channels[2]),
        ])
    }

    pub fn in_range(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.data().iter().all(|v| (-1.0..=1.0).contains(v)))
    }
}

/// Min-max scaling onto `[-1, 1]`; a constant channel maps to zeros.
pub fn normalize_channel(chan: &Plane) -> Plane {
    let Some((lo, hi)) = chan.min_max() else {
        return chan.clone();
    };
    if hi == lo {
        return chan.map(|_| 0.0);
    }
    let span = hi - lo;
    chan.map(|v| ((v - lo) / span * 2.0 - 1.0).clamp(-1.0, 1.0))
}

/// Per-axis scale from the original image frame into the 224 frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResizeTransform {
    pub sx: f64,
    pub sy: f64,
}

impl ResizeTransform {
    pub fn for_size(width: usize, height: usize) -> Self {
        Self {
            sx: FRAME_F / width as f64,
            sy: FRAME_F / height as f64,
        }
    }

    pub fn identity() -> Self {
        Self { sx: 1.0, sy: 1.0 }
    }

    pub fn forward(&self, p: Point) -> Point {
        Point::new(p.x * self.sx, p.y * self.sy)
    }

    pub fn inverse(&self, p: Point) -> Point {
        Point::new(p.x / self.sx, p.y / self.sy)
    }

    /// Maps a label into the 224 frame through its corners, which keeps the
    /// rectangle aligned with the image under anisotropic scaling.
    pub fn map_rect(&self, r: &GraspRect) -> Result<GraspRect> {
        corners_to_rect(&r.to_corners().map(|p| self.forward(p)))
    }

    pub fn unmap_rect(&self, r: &GraspRect) -> Result<GraspRect> {
        corners_to_rect(&r.to_corners().map(|p| self.inverse(p)))
    }
}

fn plane_from_rgb(img: &image::RgbImage, channel: usize) -> Plane {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.pixels().map(|p| p.0[channel] as f64).collect();
    Plane::from_vec(w, h, data)
}

/// Depth plane with holes filled by the smallest observed depth.
fn depth_plane(sample: &Sample) -> Plane {
    let d = &sample.depth;
    let floor = d
        .values
        .iter()
        .zip(&d.missing)
        .filter(|(_, &m)| !m)
        .map(|(&v, _)| v)
        .fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 0.0 };
    let data = d
        .values
        .iter()
        .zip(&d.missing)
        .map(|(&v, &m)| if m { floor } else { v })
        .collect();
    Plane::from_vec(d.width, d.height, data)
}

/// Builds the `{R, G, depth}` network input and returns the resize used.
pub fn compose_input(sample: &Sample) -> (NetInput, ResizeTransform) {
    let (w, h) = (sample.width(), sample.height());
    let raw = [
        plane_from_rgb(&sample.rgb, 0),
        plane_from_rgb(&sample.rgb, 1),
        depth_plane(sample),
    ];
    let input = NetInput::new(raw.map(|p| normalize_channel(&p.resize_bilinear(FRAME, FRAME))));
    (input, ResizeTransform::for_size(w, h))
}

/// The 6-D target scaled onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormTargetVec {
    pub x_n: f64,
    pub y_n: f64,
    pub s_n: f64,
    pub c_n: f64,
    pub w_n: f64,
    pub h_n: f64,
}

impl NormTargetVec {
    pub fn to_array(&self) -> [f64; 6] {
        [self.x_n, self.y_n, self.s_n, self.c_n, self.w_n, self.h_n]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            x_n: v[0],
            y_n: v[1],
            s_n: v[2],
            c_n: v[3],
            w_n: v[4],
            h_n: v[5],
        }
    }
}

pub fn normalize_target(r: &GraspRect) -> Result<NormTargetVec> {
    for (field, value) in [("x", r.x()), ("y", r.y()), ("w", r.w()), ("h", r.h())] {
        if !(0.0..=FRAME_F).contains(&value) {
            return Err(Error::OutOfFrame { field, value });
        }
    }
    let (s, c) = r.theta().sin_cos();
    Ok(NormTargetVec {
        x_n: r.x() / FRAME_F,
        y_n: r.y() / FRAME_F,
        s_n: (s + 1.0) / 2.0,
        c_n: (c + 1.0) / 2.0,
        w_n: r.w() / FRAME_F,
        h_n: r.h() / FRAME_F,
    })
}

/// Inverse of [`normalize_target`] that accepts any finite network output.
///
/// Position and size are clamped to `[0, 1]` first and extents floored at one
/// pixel. The angle comes from `atan2` of the recentred (sin, cos) pair, so it
/// does not need to lie on the unit circle; a zero-length pair gives 0.
pub fn denormalize_target(t: &NormTargetVec) -> GraspRect {
    let unit = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let s = 2.0 * t.s_n - 1.0;
    let c = 2.0 * t.c_n - 1.0;
    let theta = if s == 0.0 && c == 0.0 || !(s.is_finite() && c.is_finite()) {
        0.0
    } else {
        canonical_angle(s.atan2(c))
    };
    GraspRect::new(
        unit(t.x_n) * FRAME_F,
        unit(t.y_n) * FRAME_F,
        theta.clamp(-FRAC_PI_2, FRAC_PI_2),
        (unit(t.w_n) * FRAME_F).max(1.0),
        (unit(t.h_n) * FRAME_F).max(1.0),
    )
    .expect("clamped values always form a valid rectangle")
}
