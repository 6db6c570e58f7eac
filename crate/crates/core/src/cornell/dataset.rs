use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{parse_pcd_to_depth, parse_rect_file, DataError, DepthSource, RectParse};
use crate::geometry::GraspRect;
use crate::raster::{DepthMap, Raster};

/// One RGB-D view with its grasp annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbdSample {
    pub id: String,
    pub object_id: String,
    pub rgb: Raster<u8>,
    pub depth: DepthMap,
    pub positive_grasps: Vec<GraspRect>,
    pub negative_grasps: Vec<GraspRect>,
}

impl RgbdSample {
    pub fn width(&self) -> usize {
        self.rgb.width()
    }

    pub fn height(&self) -> usize {
        self.rgb.height()
    }

    /// Checks raster sizes and that every grasp center lies in the image.
    pub fn validate(&self) -> Result<(), String> {
        if self.rgb.channels() != 3 {
            return Err(format!("rgb has {} channels", self.rgb.channels()));
        }
        if !self.rgb.same_size(&self.depth.values) || !self.rgb.same_size(&self.depth.missing) {
            return Err(format!(
                "rgb is {}x{} but depth is {}x{}",
                self.rgb.height(),
                self.rgb.width(),
                self.depth.height(),
                self.depth.width()
            ));
        }
        let (w, h) = (self.width() as f64, self.height() as f64);
        for g in self.positive_grasps.iter().chain(&self.negative_grasps) {
            if !(g.x() >= 0.0 && g.y() >= 0.0 && g.x() < w && g.y() < h) {
                return Err(format!("grasp center ({}, {}) outside the image", g.x(), g.y()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    #[serde(default)]
    pub depth_source: DepthSource,
    /// Two-column `sample_id object_id` file. When unset, `object_ids.txt`
    /// in the dataset root is used if it exists.
    #[serde(default)]
    pub object_map: Option<PathBuf>,
}

/// Where object identities came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IdSource {
    MappingFile { path: PathBuf },
    /// First two digits of the sample id.
    IdPrefix,
    /// Assigned by the synthetic generator.
    Generator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedSample {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub root: PathBuf,
    pub samples: usize,
    /// Annotated corner quadruples, including skipped ones.
    pub positive_quadruples: usize,
    pub negative_quadruples: usize,
    /// Rectangles kept after skipping.
    pub positive_grasps: usize,
    pub negative_grasps: usize,
    pub skipped_nonfinite: usize,
    pub skipped_degenerate: usize,
    pub skipped_out_of_bounds: usize,
    pub skipped_samples: Vec<SkippedSample>,
    pub object_id_source: IdSource,
    /// Samples absent from the mapping file that fell back to the id prefix.
    pub object_id_fallbacks: usize,
    pub depth_source: DepthSource,
}

#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub samples: Vec<RgbdSample>,
    pub report: LoadReport,
}

/// Fallback object identity: the first two digits of the sample id.
pub fn object_id_fallback(id: &str) -> String {
    id.chars().take(2).collect()
}

#[derive(Default)]
struct Parts {
    rgb: Option<PathBuf>,
    cloud: Option<PathBuf>,
    pos: Option<PathBuf>,
    neg: Option<PathBuf>,
}

/// Splits `pcd0123cpos.txt` into `("0123", "cpos.txt")`.
fn split_name(name: &str) -> Option<(&str, &str)> {
    let rest = name.strip_prefix("pcd")?;
    let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
    (digits > 0).then(|| rest.split_at(digits))
}

fn numeric_key(id: &str) -> (u64, String) {
    (id.parse().unwrap_or(u64::MAX), id.to_string())
}

fn read_object_map(path: &Path) -> Result<HashMap<u64, String>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split_whitespace();
        let (Some(sample), Some(object)) = (cols.next(), cols.next()) else {
            return Err(DataError::format(path, i + 1, "expected `sample_id object_id`"));
        };
        let digits = sample.trim_start_matches("pcd");
        let key = digits
            .parse::<u64>()
            .map_err(|_| DataError::format(path, i + 1, format!("sample id {sample:?} is not numeric")))?;
        map.insert(key, object.to_string());
    }
    Ok(map)
}

/// Walks `root` for Cornell-layout files and loads every complete sample,
/// sorted by numeric id.
pub fn load_dataset(root: &Path, opts: &LoadOptions) -> Result<LoadedDataset, DataError> {
    std::fs::read_dir(root).map_err(|e| DataError::io(root, e))?;

    let mut parts: BTreeMap<(u64, String), Parts> = BTreeMap::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            DataError::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let Some((id, suffix)) = entry.file_name().to_str().and_then(split_name) else {
            continue;
        };
        let slot = parts.entry(numeric_key(id)).or_default();
        let target = match suffix {
            "r.png" => &mut slot.rgb,
            ".txt" => &mut slot.cloud,
            "cpos.txt" => &mut slot.pos,
            "cneg.txt" => &mut slot.neg,
            _ => continue,
        };
        if let Some(first) = target {
            return Err(DataError::DuplicateSample {
                id: id.to_string(),
                first: first.clone(),
                second: entry.path().to_path_buf(),
            });
        }
        *target = Some(entry.path().to_path_buf());
    }

    let map_path = opts.object_map.clone().or_else(|| {
        let default = root.join("object_ids.txt");
        default.is_file().then_some(default)
    });
    let object_map = map_path.as_deref().map(read_object_map).transpose()?;

    let mut skipped = Vec::new();
    let mut complete = Vec::new();
    for ((_, id), p) in parts {
        match (p.rgb, p.cloud, p.pos, p.neg) {
            (Some(rgb), Some(cloud), Some(pos), Some(neg)) => complete.push((id, rgb, cloud, pos, neg)),
            (rgb, cloud, pos, neg) => {
                let missing: Vec<&str> = [
                    (rgb.is_none(), "rgb image"),
                    (cloud.is_none(), "point cloud"),
                    (pos.is_none(), "positive rectangles"),
                    (neg.is_none(), "negative rectangles"),
                ]
                .into_iter()
                .filter_map(|(gone, what)| gone.then_some(what))
                .collect();
                skipped.push(SkippedSample {
                    id,
                    reason: format!("missing {}", missing.join(", ")),
                });
            }
        }
    }
    if complete.is_empty() {
        return Err(DataError::NoSamples(root.to_path_buf()));
    }

    let loaded: Vec<(RgbdSample, RectParse, RectParse)> = complete
        .par_iter()
        .map(|(id, rgb, cloud, pos, neg)| load_one(id, rgb, cloud, pos, neg, &opts.depth_source))
        .collect::<Result<_, _>>()?;

    let mut report = LoadReport {
        root: root.to_path_buf(),
        samples: loaded.len(),
        positive_quadruples: 0,
        negative_quadruples: 0,
        positive_grasps: 0,
        negative_grasps: 0,
        skipped_nonfinite: 0,
        skipped_degenerate: 0,
        skipped_out_of_bounds: 0,
        skipped_samples: skipped,
        object_id_source: match &map_path {
            Some(path) => IdSource::MappingFile { path: path.clone() },
            None => IdSource::IdPrefix,
        },
        object_id_fallbacks: 0,
        depth_source: opts.depth_source.clone(),
    };
    let mut samples = Vec::with_capacity(loaded.len());
    for (mut sample, pos, neg) in loaded {
        report.positive_quadruples += pos.quadruples;
        report.negative_quadruples += neg.quadruples;
        report.positive_grasps += pos.rects.len();
        report.negative_grasps += neg.rects.len();
        for r in [&pos, &neg] {
            report.skipped_nonfinite += r.skipped_nonfinite;
            report.skipped_degenerate += r.skipped_degenerate;
            report.skipped_out_of_bounds += r.skipped_out_of_bounds;
        }
        let mapped = object_map
            .as_ref()
            .and_then(|m| m.get(&numeric_key(&sample.id).0).cloned());
        sample.object_id = match mapped {
            Some(obj) => obj,
            None => {
                if object_map.is_some() {
                    report.object_id_fallbacks += 1;
                }
                object_id_fallback(&sample.id)
            }
        };
        samples.push(sample);
    }
    Ok(LoadedDataset { samples, report })
}

fn load_one(
    id: &str,
    rgb_path: &Path,
    cloud: &Path,
    pos: &Path,
    neg: &Path,
    depth_source: &DepthSource,
) -> Result<(RgbdSample, RectParse, RectParse), DataError> {
    let img = image::open(rgb_path)
        .map_err(|e| DataError::Image {
            path: rgb_path.to_path_buf(),
            message: e.to_string(),
        })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let rgb = Raster::from_vec(w, h, 3, img.into_raw()).expect("rgb8 buffer is w*h*3");
    let depth = parse_pcd_to_depth(cloud, h, w, depth_source)?;
    let pos = parse_rect_file(pos, Some((w, h)))?;
    let neg = parse_rect_file(neg, Some((w, h)))?;
    let sample = RgbdSample {
        id: id.to_string(),
        object_id: String::new(),
        rgb,
        depth,
        positive_grasps: pos.rects.clone(),
        negative_grasps: neg.rects.clone(),
    };
    Ok((sample, pos, neg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_name_parts() {
        assert_eq!(split_name("pcd0123cpos.txt"), Some(("0123", "cpos.txt")));
        assert_eq!(split_name("pcd0123r.png"), Some(("0123", "r.png")));
        assert_eq!(split_name("pcd0123.txt"), Some(("0123", ".txt")));
        assert_eq!(split_name("pcdr.png"), None);
        assert_eq!(split_name("z.txt"), None);
    }

    #[test]
    fn fallback_is_two_digit_prefix() {
        assert_eq!(object_id_fallback("0123"), "01");
        assert_eq!(object_id_fallback("7"), "7");
    }
}
