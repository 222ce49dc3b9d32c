//! Browser bindings over `grasp-core`. Rectangles cross the boundary as
//! `[x, y, theta_deg, w, h]` arrays and results come back as flat `Float64Array`s.

use grasp_core::augment::{rotate_label, rotate_label_direct, zoom_label, zoom_label_direct};
use grasp_core::geometry::{
    angle_diff, intersection_polygon, is_success, jaccard, GraspRect, SuccessCriteria,
};
use grasp_core::preprocess::{denormalize_target, normalize_target, NormTargetVec};
use wasm_bindgen::prelude::*;

fn rect(v: &[f64]) -> Result<GraspRect, JsError> {
    let [x, y, deg, w, h] = <[f64; 5]>::try_from(v)
        .map_err(|_| JsError::new("a rectangle is [x, y, theta_deg, w, h]"))?;
    GraspRect::new(x, y, deg.to_radians(), w, h).map_err(|e| JsError::new(&e.to_string()))
}

fn params(r: &GraspRect) -> [f64; 5] {
    [r.x(), r.y(), r.theta().to_degrees(), r.w(), r.h()]
}

fn push_corners(out: &mut Vec<f64>, r: &GraspRect) {
    for p in r.to_corners().corners {
        out.extend([p.x, p.y]);
    }
}

/// Four corners of a rectangle as `[x0, y0, ..., x3, y3]`.
#[wasm_bindgen]
pub fn corners(r: &[f64]) -> Result<Vec<f64>, JsError> {
    let mut out = Vec::with_capacity(8);
    push_corners(&mut out, &rect(r)?);
    Ok(out)
}

/// Scores a prediction against one truth with the default rectangle metric.
///
/// Returns `[jaccard, angle_diff_deg, success, x0, y0, x1, y1, ...]` where the
/// trailing pairs are the vertices of the intersection polygon.
#[wasm_bindgen]
pub fn compare(pred: &[f64], truth: &[f64]) -> Result<Vec<f64>, JsError> {
    let (p, t) = (rect(pred)?, rect(truth)?);
    let verdict = is_success(&p, &[t], SuccessCriteria::default())
        .map_err(|e| JsError::new(&e.to_string()))?;
    let mut out = vec![
        jaccard(&p, &t),
        angle_diff(&p, &t).to_degrees(),
        f64::from(u8::from(verdict.success)),
    ];
    for v in intersection_polygon(&p, &t) {
        out.extend([v.x, v.y]);
    }
    Ok(out)
}

/// Moves a 224x224-frame label through a rotation about the frame centre and
/// then a centre-crop zoom, along both the corner path and the closed form.
///
/// Returns `[x, y, theta_deg, w, h]` of each path followed by the corners of
/// the corner-path result (18 values), or an empty array if the centre leaves
/// the frame.
#[wasm_bindgen]
pub fn augment_label(r: &[f64], angle_deg: f64, zoom: f64) -> Result<Vec<f64>, JsError> {
    if !(zoom > 0.0 && zoom <= 1.0) {
        return Err(JsError::new("zoom must lie in (0, 1]"));
    }
    let r = rect(r)?;
    let angle = angle_deg.to_radians();
    let via_corners = rotate_label(&r, angle).and_then(|l| zoom_label(&l, zoom));
    let direct = rotate_label_direct(&r, angle).and_then(|l| zoom_label_direct(&l, zoom));
    let (Some(a), Some(b)) = (via_corners, direct) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(18);
    out.extend(params(&a));
    out.extend(params(&b));
    push_corners(&mut out, &a);
    Ok(out)
}

/// Regression target of a label and its decoding.
///
/// Returns the six normalized values `[x, y, sin, cos, w, h]` followed by the
/// decoded `[x, y, theta_deg, w, h]`. `noise` is added to every normalized
/// value before decoding, to show how the decoder treats imperfect outputs.
#[wasm_bindgen]
pub fn round_trip(r: &[f64], noise: f64) -> Result<Vec<f64>, JsError> {
    let t = normalize_target(&rect(r)?).map_err(|e| JsError::new(&e.to_string()))?;
    let noisy = t.to_array().map(|v| v + noise);
    let back = denormalize_target(&NormTargetVec::from_array(noisy));
    let mut out = t.to_array().to_vec();
    out.extend(params(&back));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identical_rects_match() {
        let r = [100.0, 90.0, 30.0, 40.0, 20.0];
        let out = compare(&r, &r).unwrap();
        assert!(close(out[0], 1.0, 1e-12));
        assert_eq!(out[1], 0.0);
        assert_eq!(out[2], 1.0);
        assert!(out.len() >= 3 + 8);
    }

    #[test]
    fn disjoint_rects_have_no_polygon() {
        let out = compare(&[20.0, 20.0, 0.0, 10.0, 10.0], &[200.0, 200.0, 0.0, 10.0, 10.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn half_overlap_of_axis_aligned_squares() {
        let out = compare(&[100.0, 100.0, 0.0, 20.0, 20.0], &[110.0, 100.0, 0.0, 20.0, 20.0]).unwrap();
        assert!(close(out[0], 1.0 / 3.0, 1e-12));
        assert_eq!(out[2], 1.0);
    }

    #[test]
    fn augmented_paths_agree() {
        let out = augment_label(&[120.0, 100.0, 15.0, 50.0, 20.0], 45.0, 0.8).unwrap();
        assert_eq!(out.len(), 18);
        for i in 0..5 {
            let tol = if i == 2 { 1e-9 } else { 1e-9 * 224.0 };
            let d = (out[i] - out[5 + i]).abs();
            let d = if i == 2 { d.min(180.0 - d) } else { d };
            assert!(d <= tol, "component {i}: {} vs {}", out[i], out[5 + i]);
        }
    }

    #[test]
    fn label_leaving_frame_is_dropped() {
        let out = augment_label(&[5.0, 5.0, 0.0, 4.0, 4.0], 0.0, 0.5).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn round_trip_recovers_params() {
        let r = [60.0, 150.0, -40.0, 30.0, 12.0];
        let out = round_trip(&r, 0.0).unwrap();
        assert_eq!(out.len(), 11);
        for (a, b) in r.iter().zip(&out[6..]) {
            assert!(close(*a, *b, 1e-9), "{a} vs {b}");
        }
    }

    #[test]
    fn corners_span_the_extents() {
        let c = corners(&[100.0, 100.0, 0.0, 40.0, 20.0]).unwrap();
        let xs: Vec<f64> = c.iter().step_by(2).copied().collect();
        let ys: Vec<f64> = c.iter().skip(1).step_by(2).copied().collect();
        let span = |v: &[f64]| {
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        assert!(close(span(&xs), 40.0, 1e-9));
        assert!(close(span(&ys), 20.0, 1e-9));
    }
}
