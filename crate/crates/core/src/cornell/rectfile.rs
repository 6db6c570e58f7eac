use std::path::Path;

use super::DataError;
use crate::geometry::{canonical_degrees, GraspRect, Point};

/// Rectangles read from one annotation file plus what was dropped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RectParse {
    pub rects: Vec<GraspRect>,
    /// Corner quadruples in the file, kept or not.
    pub quadruples: usize,
    /// Quadruples with a NaN or infinite coordinate.
    pub skipped_nonfinite: usize,
    /// Quadruples with a zero-length edge.
    pub skipped_degenerate: usize,
    /// Quadruples whose center falls outside the image.
    pub skipped_out_of_bounds: usize,
}

/// Parses a rectangle file: 4 lines of `x y` per rectangle.
///
/// `image_bounds` is `(width, height)`; when given, rectangles whose center
/// lies outside `[0, width) × [0, height)` are dropped and counted.
pub fn parse_rect_file(path: &Path, image_bounds: Option<(usize, usize)>) -> Result<RectParse, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    parse_rect_str(&text, image_bounds).map_err(|(line, message)| DataError::format(path, line, message))
}

/// In-memory form of [`parse_rect_file`]; errors carry a 1-based line number.
pub fn parse_rect_str(text: &str, image_bounds: Option<(usize, usize)>) -> Result<RectParse, (usize, String)> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let mut coord = || -> Result<f64, (usize, String)> {
            let tok = tokens.next().ok_or((line_no, format!("expected two numbers, got {trimmed:?}")))?;
            tok.parse::<f64>()
                .map_err(|_| (line_no, format!("cannot parse {tok:?} as a number")))
        };
        let (x, y) = (coord()?, coord()?);
        if let Some(extra) = tokens.next() {
            return Err((line_no, format!("unexpected trailing token {extra:?}")));
        }
        points.push((line_no, Point::new(x, y)));
    }
    if points.len() % 4 != 0 {
        let last = points.last().map_or(0, |p| p.0);
        return Err((
            last,
            format!("{} corner lines is not a multiple of 4; last rectangle incomplete", points.len()),
        ));
    }

    let mut out = RectParse {
        quadruples: points.len() / 4,
        ..RectParse::default()
    };
    for quad in points.chunks_exact(4) {
        let p: Vec<Point> = quad.iter().map(|q| q.1).collect();
        if p.iter().any(|q| !(q.x.is_finite() && q.y.is_finite())) {
            out.skipped_nonfinite += 1;
            continue;
        }
        let Some(rect) = rect_from_corners([p[0], p[1], p[2], p[3]]) else {
            out.skipped_degenerate += 1;
            continue;
        };
        if let Some((w, h)) = image_bounds {
            let inside = rect.x() >= 0.0 && rect.y() >= 0.0 && rect.x() < w as f64 && rect.y() < h as f64;
            if !inside {
                out.skipped_out_of_bounds += 1;
                continue;
            }
        }
        out.rects.push(rect);
    }
    Ok(out)
}

/// Center is the corner mean, `h = |p1p2|`, `w = |p2p3|`, θ follows p2→p3.
fn rect_from_corners(p: [Point; 4]) -> Option<GraspRect> {
    let cx = p.iter().map(|q| q.x).sum::<f64>() / 4.0;
    let cy = p.iter().map(|q| q.y).sum::<f64>() / 4.0;
    let h = p[0].distance(&p[1]);
    let w = p[1].distance(&p[2]);
    let theta = (p[2].y - p[1].y).atan2(p[2].x - p[1].x).to_degrees();
    GraspRect::new(cx, cy, h, w, canonical_degrees(theta)).ok()
}
