use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::raster::{DepthMap, Raster};

/// Which per-point quantity becomes the depth value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthSource {
    /// A named field, e.g. `z`.
    Field(String),
    /// Euclidean norm of `(x, y, z)`.
    Range,
}

impl Default for DepthSource {
    fn default() -> Self {
        DepthSource::Field("z".into())
    }
}

/// Reads an ASCII point cloud whose points carry a linear image `index`
/// into a `height × width` depth map. Cells no point maps to are missing,
/// as are points whose depth value is not finite.
pub fn parse_pcd_to_depth(
    path: &Path,
    height: usize,
    width: usize,
    source: &DepthSource,
) -> Result<DepthMap, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    parse_pcd_str(&text, height, width, source).map_err(|(line, message)| DataError::format(path, line, message))
}

enum Depth {
    Column(usize),
    Range([usize; 3]),
}

/// In-memory form of [`parse_pcd_to_depth`]; errors carry a 1-based line number.
pub fn parse_pcd_str(
    text: &str,
    height: usize,
    width: usize,
    source: &DepthSource,
) -> Result<DepthMap, (usize, String)> {
    let mut fields: Option<Vec<String>> = None;
    let mut lines = text.lines().enumerate();
    let mut data_start = None;
    for (i, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap_or_default().to_ascii_uppercase();
        let values: Vec<&str> = tokens.collect();
        match key.as_str() {
            "FIELDS" => fields = Some(values.iter().map(|s| s.to_string()).collect()),
            "COUNT" if values.iter().any(|v| *v != "1") => {
                return Err((i + 1, "fields with COUNT other than 1 are not supported".into()));
            }
            "DATA" => {
                if values.first().map(|v| v.to_ascii_lowercase()) != Some("ascii".into()) {
                    return Err((i + 1, format!("only DATA ascii is supported, got {values:?}")));
                }
                data_start = Some(i + 1);
                break;
            }
            "VERSION" | "SIZE" | "TYPE" | "COUNT" | "WIDTH" | "HEIGHT" | "VIEWPOINT" | "POINTS" => {}
            _ => return Err((i + 1, format!("unexpected header line {line:?}"))),
        }
    }
    let data_line = data_start.ok_or((0, "header has no DATA line".to_string()))?;
    let fields = fields.ok_or((data_line, "header has no FIELDS line".to_string()))?;
    let column = |name: &str| {
        fields
            .iter()
            .position(|f| f == name)
            .ok_or((data_line, format!("header lacks the {name:?} field; fields are {fields:?}")))
    };
    let index_col = column("index")?;
    let depth = match source {
        DepthSource::Field(name) => Depth::Column(column(name)?),
        DepthSource::Range => Depth::Range([column("x")?, column("y")?, column("z")?]),
    };

    let cells = height * width;
    let mut values = Raster::filled(width, height, 1, 0.0);
    let mut missing = Raster::filled(width, height, 1, true);
    let mut row_tokens = Vec::with_capacity(fields.len());
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        row_tokens.clear();
        row_tokens.extend(line.split_whitespace());
        if row_tokens.len() != fields.len() {
            return Err((line_no, format!("expected {} values, found {}", fields.len(), row_tokens.len())));
        }
        let num = |col: usize| {
            row_tokens[col]
                .parse::<f64>()
                .map_err(|_| (line_no, format!("cannot parse {:?} as a number", row_tokens[col])))
        };
        let index = num(index_col)?;
        if !(index >= 0.0 && index.fract() == 0.0 && index < cells as f64) {
            return Err((line_no, format!("index {index} outside a {height}x{width} image")));
        }
        let index = index as usize;
        let d = match depth {
            Depth::Column(c) => num(c)?,
            Depth::Range([x, y, z]) => {
                let (x, y, z) = (num(x)?, num(y)?, num(z)?);
                (x * x + y * y + z * z).sqrt()
            }
        };
        let (row, col) = (index / width, index % width);
        if d.is_finite() {
            values.set(row, col, 0, d);
            missing.set(row, col, 0, false);
        } else {
            values.set(row, col, 0, 0.0);
            missing.set(row, col, 0, true);
        }
    }
    Ok(DepthMap { values, missing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(indices: impl Iterator<Item = usize>) -> String {
        let mut s = String::from(
            "# .PCD v.7\nFIELDS x y z rgb index\nSIZE 4 4 4 4 4\nTYPE F F F F U\nCOUNT 1 1 1 1 1\nWIDTH 16\nHEIGHT 1\nPOINTS 16\nDATA ascii\n",
        );
        for i in indices {
            s.push_str(&format!("1 2 {} 0 {i}\n", 100 + i));
        }
        s
    }

    #[test]
    fn dense_cloud() {
        let d = parse_pcd_str(&cloud(0..16), 4, 4, &DepthSource::default()).unwrap();
        assert_eq!(d.missing_count(), 0);
        assert_eq!(d.values.get(2, 3, 0), 111.0);
    }

    #[test]
    fn one_absent_point() {
        let d = parse_pcd_str(&cloud((0..16).filter(|&i| i != 6)), 4, 4, &DepthSource::default()).unwrap();
        assert_eq!(d.missing_count(), 1);
        assert!(d.missing.get(1, 2, 0));
        assert_eq!(d.values.get(1, 2, 0), 0.0);
    }

    #[test]
    fn range_source() {
        let d = parse_pcd_str(&cloud(0..1), 1, 1, &DepthSource::Range).unwrap();
        assert!((d.values.get(0, 0, 0) - (1.0f64 + 4.0 + 10_000.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn nan_depth_is_missing() {
        let text = "FIELDS z index\nDATA ascii\nnan 0\n";
        let d = parse_pcd_str(text, 1, 1, &DepthSource::default()).unwrap();
        assert_eq!(d.missing_count(), 1);
    }

    #[test]
    fn malformed_headers() {
        let src = DepthSource::default();
        assert!(parse_pcd_str("FIELDS z index\n0 0\n", 1, 1, &src).is_err());
        let err = parse_pcd_str("FIELDS x y z\nDATA ascii\n1 2 3\n", 1, 1, &src).unwrap_err();
        assert!(err.1.contains("index"));
        assert!(parse_pcd_str("FIELDS z index\nDATA binary\n", 1, 1, &src).is_err());
        assert!(parse_pcd_str("bogus\n", 1, 1, &src).is_err());
    }

    #[test]
    fn index_out_of_bounds_names_line() {
        let err = parse_pcd_str(&cloud([0, 16].into_iter()), 4, 4, &DepthSource::default()).unwrap_err();
        assert_eq!(err.0, 11);
        assert!(err.1.contains("16"));
    }
}
