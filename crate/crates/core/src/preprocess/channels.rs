use super::PreprocessError;
use crate::raster::{DepthMap, Raster};

/// Maps the observed depth range affinely onto `0..=255`, then zeroes the
/// missing cells. A constant depth plane maps to all zeros.
pub fn rescale_depth(depth: &DepthMap) -> Result<Raster<u8>, PreprocessError> {
    let observed = depth
        .values
        .data()
        .iter()
        .zip(depth.missing.data())
        .filter(|(_, &m)| !m)
        .map(|(&v, _)| v);
    let (lo, hi) = observed.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return Err(PreprocessError::AllDepthMissing);
    }
    let span = hi - lo;
    let data = depth
        .values
        .data()
        .iter()
        .zip(depth.missing.data())
        .map(|(&v, &m)| {
            if m || span <= 0.0 {
                0
            } else {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect();
    Ok(Raster::from_vec(depth.width(), depth.height(), 1, data).expect("same size as depth"))
}

/// RGD image: red and green kept, blue replaced by the rescaled depth.
pub fn to_rgd(rgb: &Raster<u8>, depth: &Raster<u8>) -> Result<Raster<u8>, PreprocessError> {
    if rgb.channels() != 3 || depth.channels() != 1 || !rgb.same_size(depth) {
        return Err(PreprocessError::Shape(format!(
            "to_rgd needs HxWx3 and HxWx1 rasters of equal size, got {}x{}x{} and {}x{}x{}",
            rgb.height(),
            rgb.width(),
            rgb.channels(),
            depth.height(),
            depth.width(),
            depth.channels()
        )));
    }
    let mut out = rgb.clone();
    for (px, &d) in out.data_mut().chunks_exact_mut(3).zip(depth.data()) {
        px[2] = d;
    }
    Ok(out)
}

/// Depth plane replicated into three channels.
pub fn depth_to_3channel(depth: &Raster<u8>) -> Raster<u8> {
    let data = depth.data().iter().flat_map(|&d| [d, d, d]).collect();
    Raster::from_vec(depth.width(), depth.height(), 3, data).expect("three copies per cell")
}
