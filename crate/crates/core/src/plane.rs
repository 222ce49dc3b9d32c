//! Single-channel real-valued rasters and the sampling used by resize,
//! rotation and zoom.
//!
//! Coordinates are continuous with pixel `(u, v)` covering
//! `[u, u + 1) x [v, v + 1)`, so its centre sits at `(u + 0.5, v + 0.5)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, fill: f64) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    /// Row-major data; panics if the length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "plane data length");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self::from_vec(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        self.data[v * self.width + u] = value;
    }

    /// `(min, max)` over all values; `None` for an empty plane.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        if self.data.is_empty() {
            return None;
        }
        Some(self.data.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        ))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane::from_vec(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Bilinear sample at pixel-index coordinates (`(0, 0)` is the centre
    /// of the first pixel). Neighbours outside the raster are clamped to the
    /// border.
    pub fn sample_bilinear(&self, fu: f64, fv: f64) -> f64 {
        let max_u = (self.width - 1) as f64;
        let max_v = (self.height - 1) as f64;
        let fu = fu.clamp(0.0, max_u);
        let fv = fv.clamp(0.0, max_v);
        let u0 = fu.floor() as usize;
        let v0 = fv.floor() as usize;
        let u1 = (u0 + 1).min(self.width - 1);
        let v1 = (v0 + 1).min(self.height - 1);
        let du = fu - u0 as f64;
        let dv = fv - v0 as f64;
        if du == 0.0 && dv == 0.0 {
            return self.get(u0, v0);
        }
        let top = self.get(u0, v0) * (1.0 - du) + self.get(u1, v0) * du;
        let bottom = self.get(u0, v1) * (1.0 - du) + self.get(u1, v1) * du;
        top * (1.0 - dv) + bottom * dv
    }

    /// Samples a new `width x height` raster where output pixel centre `q`
    /// reads the source at continuous coordinate `source_of(q)`. Points that
    /// fall outside the source rectangle take `outside`, if given.
    pub fn warp(
        &self,
        width: usize,
        height: usize,
        outside: Option<f64>,
        source_of: impl Fn(f64, f64) -> (f64, f64),
    ) -> Plane {
        let (sw, sh) = (self.width as f64, self.height as f64);
        Plane::from_fn(width, height, |u, v| {
            let (sx, sy) = source_of(u as f64 + 0.5, v as f64 + 0.5);
            if let Some(fill) = outside {
                if !(0.0..=sw).contains(&sx) || !(0.0..=sh).contains(&sy) {
                    return fill;
                }
            }
            self.sample_bilinear(sx - 0.5, sy - 0.5)
        })
    }

    /// Bilinear resize with half-pixel centre alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Plane {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        self.warp(width, height, None, |x, y| (x * sx, y * sy))
    }

    /// Mean over `grid x grid` equal blocks, row-major. Assumes the raster
    /// dimensions are multiples of `grid`.
    pub fn average_pool(&self, grid: usize) -> Vec<f64> {
        let bw = self.width / grid;
        let bh = self.height / grid;
        let mut out = vec![0.0; grid * grid];
        for gy in 0..grid {
            for gx in 0..grid {
                let mut acc = 0.0;
                for v in gy * bh..(gy + 1) * bh {
                    let row = &self.data[v * self.width + gx * bw..v * self.width + (gx + 1) * bw];
                    acc += row.iter().sum::<f64>();
                }
                out[gy * grid + gx] = acc / (bw * bh) as f64;
            }
        }
        out
    }
}
