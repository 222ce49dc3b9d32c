//! Rotation and zoom augmentation of (input, label) pairs in the 224 frame.
//!
//! Labels follow the image through the same point map: corners are moved and
//! the rectangle is re-fit. Pairs whose label centre leaves the frame are
//! dropped and counted.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{corners_to_rect, GraspRect, Point};
use crate::preprocess::{NetInput, FRAME, FRAME_F};

/// Fill for pixels rotated in from outside the frame.
pub const ROTATION_FILL: f64 = -1.0;

pub const FRAME_CENTER: Point = Point::new(FRAME_F / 2.0, FRAME_F / 2.0);

/// How the two families combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Families {
    /// Every (rotation, zoom) combination.
    #[default]
    Product,
    /// Rotations at zoom 1, then zooms at rotation 0.
    Separate,
}

impl FromStr for Families {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Families::Product),
            "separate" => Ok(Families::Separate),
            other => Err(Error::InvalidConfig(format!(
                "families must be `product` or `separate`, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Families {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Families::Product => "product",
            Families::Separate => "separate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub rotations: Vec<f64>,
    pub zooms: Vec<f64>,
    pub families: Families,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            rotations: (0..8).map(|k| k as f64 * PI / 4.0).collect(),
            zooms: vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            families: Families::Product,
        }
    }
}

impl AugmentSpec {
    /// Only the untouched pair.
    pub fn identity() -> Self {
        Self {
            rotations: vec![0.0],
            zooms: vec![1.0],
            families: Families::Product,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotations.is_empty() || self.zooms.is_empty() {
            return Err(Error::InvalidConfig(
                "augmentation needs at least one rotation and one zoom".into(),
            ));
        }
        if let Some(z) = self.zooms.iter().find(|z| !(**z > 0.0 && **z <= 1.0)) {
            return Err(Error::InvalidConfig(format!("zoom ratio {z} outside (0, 1]")));
        }
        if let Some(r) = self.rotations.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidConfig(format!("rotation {r} is not finite")));
        }
        Ok(())
    }

    /// Variants in emission order.
    pub fn variants(&self) -> Vec<Variant> {
        let variant = |ri: usize, zi: usize| Variant {
            rotation_index: ri,
            zoom_index: zi,
            angle: self.rotations[ri],
            zoom: self.zooms[zi],
        };
        match self.families {
            Families::Product => (0..self.rotations.len())
                .flat_map(|ri| (0..self.zooms.len()).map(move |zi| (ri, zi)))
                .map(|(ri, zi)| variant(ri, zi))
                .collect(),
            Families::Separate => {
                let unit_zoom = self.zooms.iter().position(|&z| z == 1.0);
                let no_turn = self.rotations.iter().position(|&r| r == 0.0);
                let mut out: Vec<Variant> = (0..self.rotations.len())
                    .map(|ri| match unit_zoom {
                        Some(zi) => variant(ri, zi),
                        None => Variant {
                            rotation_index: ri,
                            zoom_index: usize::MAX,
                            angle: self.rotations[ri],
                            zoom: 1.0,
                        },
                    })
                    .collect();
                for zi in 0..self.zooms.len() {
                    if Some(zi) == unit_zoom && no_turn.is_some() {
                        continue;
                    }
                    out.push(match no_turn {
                        Some(ri) => variant(ri, zi),
                        None => Variant {
                            rotation_index: usize::MAX,
                            zoom_index: zi,
                            angle: 0.0,
                            zoom: self.zooms[zi],
                        },
                    });
                }
                out
            }
        }
    }
}

/// One (rotation, zoom) combination. Indices refer to the spec lists
/// (`usize::MAX` when the implied identity value is not listed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub rotation_index: usize,
    pub zoom_index: usize,
    pub angle: f64,
    pub zoom: f64,
}

impl Variant {
    pub fn is_identity(&self) -> bool {
        self.angle == 0.0 && self.zoom == 1.0
    }

    /// Stable key suffix, e.g. `r2z5`.
    pub fn tag(&self) -> String {
        format!("r{}z{}", self.rotation_index, self.zoom_index)
    }
}

/// Point map of a rotation about the frame centre.
pub fn rotation_map(angle: f64) -> impl Fn(Point) -> Point {
    move |p| p.rotate_about(FRAME_CENTER, angle)
}

/// Point map of a centre crop of side `224 * factor` resized back to 224.
pub fn zoom_map(factor: f64) -> impl Fn(Point) -> Point {
    let offset = FRAME_F / 2.0 * (1.0 - factor);
    move |p| Point::new((p.x - offset) / factor, (p.y - offset) / factor)
}

fn center_in_frame(r: &GraspRect) -> bool {
    (0.0..=FRAME_F).contains(&r.x()) && (0.0..=FRAME_F).contains(&r.y())
}

fn map_label(label: &GraspRect, f: impl Fn(Point) -> Point) -> Option<GraspRect> {
    corners_to_rect(&label.to_corners().map(f))
        .ok()
        .filter(center_in_frame)
}

pub fn rotate_image(input: &NetInput, angle: f64) -> NetInput {
    if angle == 0.0 {
        return input.clone();
    }
    let inverse = rotation_map(-angle);
    input.map_planes(|p| {
        p.warp(FRAME, FRAME, Some(ROTATION_FILL), |x, y| {
            let s = inverse(Point::new(x, y));
            (s.x, s.y)
        })
    })
}

pub fn zoom_image(input: &NetInput, factor: f64) -> NetInput {
    if factor == 1.0 {
        return input.clone();
    }
    let offset = FRAME_F / 2.0 * (1.0 - factor);
    input.map_planes(|p| {
        p.warp(FRAME, FRAME, None, |x, y| (offset + factor * x, offset + factor * y))
    })
}

/// Label under rotation, via its corners. `None` if the centre leaves the frame.
pub fn rotate_label(label: &GraspRect, angle: f64) -> Option<GraspRect> {
    if angle == 0.0 {
        return Some(*label).filter(center_in_frame);
    }
    map_label(label, rotation_map(angle))
}

/// Label under zoom, via its corners. `None` if the centre leaves the frame.
pub fn zoom_label(label: &GraspRect, factor: f64) -> Option<GraspRect> {
    if factor == 1.0 {
        return Some(*label).filter(center_in_frame);
    }
    map_label(label, zoom_map(factor))
}

/// Closed-form rotation of the 5-D parameters (centre rotated, angle shifted).
pub fn rotate_label_direct(label: &GraspRect, angle: f64) -> Option<GraspRect> {
    let c = label.center().rotate_about(FRAME_CENTER, angle);
    GraspRect::new(c.x, c.y, label.theta() + angle, label.w(), label.h())
        .ok()
        .filter(center_in_frame)
}

/// Closed-form zoom of the 5-D parameters (centre mapped, extents scaled).
pub fn zoom_label_direct(label: &GraspRect, factor: f64) -> Option<GraspRect> {
    let c = zoom_map(factor)(label.center());
    GraspRect::new(
        c.x,
        c.y,
        label.theta(),
        label.w() / factor,
        label.h() / factor,
    )
    .ok()
    .filter(center_in_frame)
}

pub fn rotate(input: &NetInput, label: &GraspRect, angle: f64) -> Option<(NetInput, GraspRect)> {
    let label = rotate_label(label, angle)?;
    Some((rotate_image(input, angle), label))
}

pub fn zoom(input: &NetInput, label: &GraspRect, factor: f64) -> Option<(NetInput, GraspRect)> {
    let label = zoom_label(label, factor)?;
    Some((zoom_image(input, factor), label))
}

/// Label through a whole variant: rotation first, then zoom.
pub fn apply_to_label(label: &GraspRect, variant: &Variant) -> Option<GraspRect> {
    rotate_label(label, variant.angle).and_then(|r| zoom_label(&r, variant.zoom))
}

pub fn apply_to_image(input: &NetInput, variant: &Variant) -> NetInput {
    if variant.is_identity() {
        return input.clone();
    }
    zoom_image(&rotate_image(input, variant.angle), variant.zoom)
}

/// Transforms an image together with all of its labels. Labels leaving the
/// frame are removed; the count of removed labels is returned alongside.
pub fn apply_variant(
    input: &NetInput,
    labels: &[GraspRect],
    variant: &Variant,
) -> (NetInput, Vec<GraspRect>, usize) {
    let kept: Vec<GraspRect> = labels
        .iter()
        .filter_map(|l| apply_to_label(l, variant))
        .collect();
    let dropped = labels.len() - kept.len();
    (apply_to_image(input, variant), kept, dropped)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentStats {
    pub emitted: usize,
    pub dropped: usize,
}

/// Every surviving variant of every pair, ordered by (source, rotation, zoom).
pub fn expand<'a, I>(pairs: I, spec: &AugmentSpec) -> (Vec<(NetInput, GraspRect)>, AugmentStats)
where
    I: IntoIterator<Item = (&'a NetInput, &'a GraspRect)>,
{
    let variants = spec.variants();
    let mut out = Vec::new();
    let mut stats = AugmentStats::default();
    for (input, label) in pairs {
        for v in &variants {
            match apply_to_label(label, v) {
                Some(l) => {
                    out.push((apply_to_image(input, v), l));
                    stats.emitted += 1;
                }
                None => stats.dropped += 1,
            }
        }
    }
    (out, stats)
}
