//! Cornell grasp dataset ingestion.
//!
//! Expected flat layout under a root directory:
//!
//! * `pcdNNNNr.png` - RGB image
//! * `pcdNNNN.txt` - ASCII point cloud (PCD v0.7) with an `index` column
//!   giving the row-major pixel each point projects to
//! * `pcdNNNNcpos.txt` / `pcdNNNNcneg.txt` - grasp labels, four `x y` lines
//!   per rectangle
//!
//! A sample is admitted when both the RGB image and the positive label file
//! exist.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{corners_to_rect, CornerRect, GraspRect, Point};

pub const RGB_SUFFIX: &str = "r.png";
pub const POS_SUFFIX: &str = "cpos.txt";
pub const NEG_SUFFIX: &str = "cneg.txt";
pub const CLOUD_SUFFIX: &str = ".txt";

/// Dense depth raster decoded from a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    /// `true` where no point projected onto the pixel.
    pub missing: Vec<bool>,
}

impl DepthMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            missing: vec![true; width * height],
        }
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }
}

/// What was dropped or substituted while reading one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub nonfinite_rects: usize,
    pub degenerate_rects: usize,
}

impl LoadStats {
    fn merge(&mut self, other: LoadStats) {
        self.nonfinite_rects += other.nonfinite_rects;
        self.degenerate_rects += other.degenerate_rects;
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub rgb: image::RgbImage,
    pub depth: DepthMap,
    /// Set when the point-cloud file was absent and `depth` is all zero.
    pub depth_missing: bool,
    pub pos_rects: Vec<GraspRect>,
    pub neg_rects: Vec<GraspRect>,
    pub stats: LoadStats,
}

impl Sample {
    pub fn width(&self) -> usize {
        self.rgb.width() as usize
    }

    pub fn height(&self) -> usize {
        self.rgb.height() as usize
    }
}

/// Ids with both an RGB image and a positive label file, sorted.
pub fn scan_dataset(root: &Path) -> Result<Vec<String>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(stem) = name.strip_suffix(RGB_SUFFIX) else {
            continue;
        };
        if stem.is_empty() {
            continue;
        }
        if root.join(format!("{stem}{POS_SUFFIX}")).is_file() {
            ids.push(stem.to_string());
        }
    }
    if ids.is_empty() {
        return Err(Error::EmptyDataset {
            root: root.to_path_buf(),
        });
    }
    ids.sort();
    Ok(ids)
}

pub fn load_sample(root: &Path, id: &str) -> Result<Sample> {
    let rgb_path = root.join(format!("{id}{RGB_SUFFIX}"));
    let pos_path = root.join(format!("{id}{POS_SUFFIX}"));
    if !rgb_path.is_file() || !pos_path.is_file() {
        return Err(Error::UnknownSample(id.to_string()));
    }
    let rgb = image::open(&rgb_path)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(&rgb_path, io),
            other => Error::ImageDecode {
                path: rgb_path.clone(),
                reason: other.to_string(),
            },
        })?
        .to_rgb8();
    let (width, height) = (rgb.width() as usize, rgb.height() as usize);

    let cloud_path = root.join(format!("{id}{CLOUD_SUFFIX}"));
    let (depth, depth_missing) = if cloud_path.is_file() {
        let text = fs::read_to_string(&cloud_path).map_err(|e| Error::io(&cloud_path, e))?;
        (parse_point_cloud(&text, width, height, &cloud_path)?, false)
    } else {
        (DepthMap::zeros(width, height), true)
    };

    let mut stats = LoadStats::default();
    let (pos_rects, s) = read_label_file(&pos_path)?;
    stats.merge(s);
    let neg_path = root.join(format!("{id}{NEG_SUFFIX}"));
    let neg_rects = if neg_path.is_file() {
        let (rects, s) = read_label_file(&neg_path)?;
        stats.merge(s);
        rects
    } else {
        Vec::new()
    };

    Ok(Sample {
        id: id.to_string(),
        rgb,
        depth,
        depth_missing,
        pos_rects,
        neg_rects,
        stats,
    })
}

pub fn read_label_file(path: &Path) -> Result<(Vec<GraspRect>, LoadStats)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let quads = parse_label_lines(&text, path)?;
    let mut stats = LoadStats::default();
    let mut rects = Vec::with_capacity(quads.len());
    for (line, quad) in quads {
        match corners_to_rect(&quad) {
            Ok(r) => rects.push(r),
            Err(Error::NonFiniteCorner) => stats.nonfinite_rects += 1,
            Err(Error::DegenerateRect { .. }) => stats.degenerate_rects += 1,
            Err(Error::NotAParallelogram { gap }) => {
                return Err(Error::MalformedLabelFile {
                    path: path.to_path_buf(),
                    line,
                    reason: format!("rectangle is not a parallelogram (gap {gap:.2} px)"),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok((rects, stats))
}

/// Splits label text into corner quads. Blank lines are ignored; every other
/// line must hold exactly two reals (`NaN` allowed).
pub fn parse_label_text(text: &str, path: &Path) -> Result<Vec<CornerRect>> {
    Ok(parse_label_lines(text, path)?
        .into_iter()
        .map(|(_, q)| q)
        .collect())
}

/// Like [`parse_label_text`], pairing each quad with the line of its first corner.
fn parse_label_lines(text: &str, path: &Path) -> Result<Vec<(usize, CornerRect)>> {
    let malformed = |line: usize, reason: String| Error::MalformedLabelFile {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut points = Vec::new();
    let mut last_line = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut tokens = line.split_whitespace();
        let Some(first) = tokens.next() else { continue };
        let second = tokens
            .next()
            .ok_or_else(|| malformed(line_no, "expected two values".into()))?;
        if tokens.next().is_some() {
            return Err(malformed(line_no, "more than two values".into()));
        }
        let parse = |tok: &str| {
            tok.parse::<f64>()
                .map_err(|_| malformed(line_no, format!("cannot parse {tok:?} as a number")))
        };
        points.push((line_no, Point::new(parse(first)?, parse(second)?)));
        last_line = line_no;
    }
    if points.len() % 4 != 0 {
        return Err(malformed(
            last_line,
            format!("{} corner lines is not a multiple of 4", points.len()),
        ));
    }
    Ok(points
        .chunks_exact(4)
        .map(|c| (c[0].0, CornerRect::new([c[0].1, c[1].1, c[2].1, c[3].1])))
        .collect())
}

/// Decodes an ASCII point cloud into a `width x height` depth raster holding
/// each point's distance from the camera origin.
pub fn parse_point_cloud(text: &str, width: usize, height: usize, path: &Path) -> Result<DepthMap> {
    let bad = |reason: String| Error::MalformedPointCloud {
        path: path.to_path_buf(),
        reason,
    };
    let mut fields: Vec<String> = Vec::new();
    let mut lines = text.lines().enumerate();
    let mut in_data = false;
    for (_, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default().to_ascii_uppercase();
        match key.as_str() {
            "FIELDS" => fields = parts.map(|s| s.to_ascii_lowercase()).collect(),
            "DATA" => {
                let kind = parts.next().unwrap_or_default();
                if !kind.eq_ignore_ascii_case("ascii") {
                    return Err(bad(format!("unsupported DATA encoding {kind:?}")));
                }
                in_data = true;
                break;
            }
            _ => {}
        }
    }
    if !in_data {
        return Err(bad("missing DATA line".into()));
    }
    if fields.is_empty() {
        fields = ["x", "y", "z", "rgb", "index"].map(String::from).to_vec();
    }
    let col = |name: &str| fields.iter().position(|f| f == name);
    let (Some(cx), Some(cy), Some(cz)) = (col("x"), col("y"), col("z")) else {
        return Err(bad(format!("FIELDS lacks x/y/z: {fields:?}")));
    };
    let ci = col("index");

    let mut depth = DepthMap::zeros(width, height);
    let mut row_counter = 0usize;
    for (i, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < fields.len() {
            return Err(bad(format!(
                "line {}: expected {} columns, found {}",
                i + 1,
                fields.len(),
                tokens.len()
            )));
        }
        let num = |c: usize| {
            tokens[c]
                .parse::<f64>()
                .map_err(|_| bad(format!("line {}: cannot parse {:?}", i + 1, tokens[c])))
        };
        let pixel = match ci {
            Some(c) => {
                let v = num(c)?;
                if !(v >= 0.0 && v.fract() == 0.0) {
                    return Err(bad(format!("line {}: bad pixel index {v}", i + 1)));
                }
                v as usize
            }
            None => row_counter,
        };
        row_counter += 1;
        if pixel >= width * height {
            return Err(bad(format!(
                "line {}: pixel index {pixel} outside {width}x{height} image",
                i + 1
            )));
        }
        let (x, y, z) = (num(cx)?, num(cy)?, num(cz)?);
        let d = (x * x + y * y + z * z).sqrt();
        if d.is_finite() {
            depth.values[pixel] = d;
            depth.missing[pixel] = false;
        }
    }
    Ok(depth)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub seed: u64,
}

/// Seeded shuffle; the first `ceil(ratio * n)` ids go to training.
pub fn split(ids: &[String], ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if ids.is_empty() {
        return Err(Error::InvalidConfig("cannot split an empty id list".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut shuffled = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    // guard against 0.9 * 10 landing a hair above 9
    let n_train = ((ratio * ids.len() as f64) - 1e-9).ceil() as usize;
    let val_ids = shuffled.split_off(n_train.min(ids.len()));
    Ok(DatasetSplit {
        train_ids: shuffled,
        val_ids,
        seed,
    })
}

impl DatasetSplit {
    /// Manifest text: `seed=<n>` header, then `[train]` and `[val]` sections
    /// with one id per line.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed={}", self.seed);
        out.push_str("[train]\n");
        for id in &self.train_ids {
            out.push_str(id);
            out.push('\n');
        }
        out.push_str("[val]\n");
        for id in &self.val_ids {
            out.push_str(id);
            out.push('\n');
        }
        out
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidConfig(format!("split manifest: {m}"));
        let mut seed = None;
        let mut section: Option<bool> = None;
        let mut split = DatasetSplit {
            train_ids: Vec::new(),
            val_ids: Vec::new(),
            seed: 0,
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(v) = line.strip_prefix("seed=") {
                seed = Some(v.parse::<u64>().map_err(|_| bad(format!("bad seed {v:?}")))?);
            } else if line == "[train]" {
                section = Some(true);
            } else if line == "[val]" {
                section = Some(false);
            } else {
                match section {
                    Some(true) => split.train_ids.push(line.to_string()),
                    Some(false) => split.val_ids.push(line.to_string()),
                    None => return Err(bad(format!("id {line:?} outside a section"))),
                }
            }
        }
        split.seed = seed.ok_or_else(|| bad("missing seed= header".into()))?;
        Ok(split)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_manifest()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_manifest(&text)
    }
}

/// Uniform draw of one ground-truth rectangle.
pub fn pick_label<'a, R: Rng + ?Sized>(sample: &'a Sample, rng: &mut R) -> Result<&'a GraspRect> {
    pick_from(&sample.pos_rects, rng)
}

/// Uniform draw from any non-empty label list.
pub fn pick_from<'a, T, R: Rng + ?Sized>(labels: &'a [T], rng: &mut R) -> Result<&'a T> {
    if labels.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(&labels[rng.gen_range(0..labels.len())])
}

/// Path helpers for writing fixtures in the dataset layout.
pub fn sample_paths(root: &Path, id: &str) -> [PathBuf; 4] {
    [
        root.join(format!("{id}{RGB_SUFFIX}")),
        root.join(format!("{id}{CLOUD_SUFFIX}")),
        root.join(format!("{id}{POS_SUFFIX}")),
        root.join(format!("{id}{NEG_SUFFIX}")),
    ]
}
