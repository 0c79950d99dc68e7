use super::Thermogram;
use crate::error::{bail, Result};
use crate::numeric::Tensor;

/// Smallest side accepted by [`preprocess`].
pub const MIN_SIDE: usize = 8;

/// Bilinear sample of a row-major raster at continuous pixel coordinates.
/// Returns `None` outside `[0, w−1] × [0, h−1]`.
pub(crate) fn bilinear(pixels: &[f64], w: usize, h: usize, x: f64, y: f64) -> Option<f64> {
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return None;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = pixels[y0 * w + x0] * (1.0 - fx) + pixels[y0 * w + x1] * fx;
    let bottom = pixels[y1 * w + x0] * (1.0 - fx) + pixels[y1 * w + x1] * fx;
    Some(top * (1.0 - fy) + bottom * fy)
}

/// Center-crops to the largest square, resizes bilinearly to
/// `target_size`×`target_size` (pixel-center alignment) and min-max
/// normalizes into `[0, 1]`. A constant image becomes all zeros.
pub fn preprocess(t: &Thermogram, target_size: usize) -> Result<Tensor> {
    let (w, h) = (t.width(), t.height());
    if w.min(h) < MIN_SIDE {
        bail!(Data, "{w}×{h} frame is smaller than {MIN_SIDE} pixels on a side");
    }
    if target_size == 0 {
        bail!(Config, "target size must be positive");
    }
    let side = w.min(h);
    let (ox, oy) = ((w - side) / 2, (h - side) / 2);
    let crop: Vec<f64> = (0..side)
        .flat_map(|y| t.pixels()[(oy + y) * w + ox..(oy + y) * w + ox + side].iter().copied())
        .collect();

    let scale = side as f64 / target_size as f64;
    let max_src = (side - 1) as f64;
    let coord = |d: usize| ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max_src);
    let mut out = Vec::with_capacity(target_size * target_size);
    for y in 0..target_size {
        let sy = coord(y);
        for x in 0..target_size {
            out.push(bilinear(&crop, side, side, coord(x), sy).expect("clamped into range"));
        }
    }

    let lo = out.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        let span = hi - lo;
        for v in &mut out {
            *v = ((*v - lo) / span).clamp(0.0, 1.0);
        }
    } else {
        out.fill(0.0);
    }
    Tensor::new(vec![1, target_size, target_size], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn constant_image_is_zero() {
        let t = Thermogram::new(10, 10, vec![30.0; 100]).unwrap();
        let p = preprocess(&t, 8).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_size_keeps_extremes() {
        let pixels: Vec<f64> = (0..64).map(|i| if (i / 8 + i % 8) % 2 == 0 { 20.0 } else { 40.0 }).collect();
        let t = Thermogram::new(8, 8, pixels.clone()).unwrap();
        let p = preprocess(&t, 8).unwrap();
        for (a, b) in pixels.iter().zip(p.data()) {
            assert_eq!(*b, if *a == 20.0 { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn crops_landscape_frame_to_center_square() {
        // Columns outside the centered 80×80 crop are hot; they must vanish.
        let (w, h) = (100, 80);
        let pixels = (0..w * h)
            .map(|i| {
                let x = i % w;
                if x < 10 || x >= 90 { 100.0 } else { 20.0 + (i / w) as f64 * 0.1 }
            })
            .collect();
        let t = Thermogram::new(w, h, pixels).unwrap();
        let p = preprocess(&t, 16).unwrap();
        assert_eq!(p.shape(), &[1, 16, 16]);
        // Values follow the vertical ramp only: rows are constant.
        for row in p.data().chunks(16) {
            assert!(row.iter().all(|&v| (v - row[0]).abs() < 1e-12));
        }
        assert_eq!(p.data()[0], 0.0);
        assert_eq!(p.data()[255], 1.0);
    }

    #[test]
    fn tiny_frame_rejected() {
        let t = Thermogram::new(7, 20, vec![30.0; 140]).unwrap();
        assert!(matches!(preprocess(&t, 8), Err(Error::Data(_))));
    }

    #[test]
    fn bilinear_at_grid_points_is_exact() {
        let px = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(bilinear(&px, 2, 2, 1.0, 1.0), Some(4.0));
        assert_eq!(bilinear(&px, 2, 2, 0.5, 0.5), Some(2.5));
        assert_eq!(bilinear(&px, 2, 2, 1.01, 0.0), None);
    }
}
