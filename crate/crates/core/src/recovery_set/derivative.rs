use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::{DepthMap, SpectralImage};

/// Unit direction in image coordinates (`x` to the right, `y` down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    dx: f64,
    dy: f64,
}

impl Direction {
    pub const X: Direction = Direction { dx: 1.0, dy: 0.0 };
    pub const Y: Direction = Direction { dx: 0.0, dy: 1.0 };

    /// Normalises `(dx, dy)`.
    pub fn new(dx: f64, dy: f64) -> Result<Self> {
        let n = dx.hypot(dy);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidDirection { dx, dy });
        }
        Ok(Self { dx: dx / n, dy: dy / n })
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.dx, self.dy]
    }
}

/// Directional derivatives of an image and its depth map.
///
/// All planes are per unit image step. Band planes of `d_f` are stored
/// band-sequentially like [`SpectralImage`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeField {
    pub width: usize,
    pub height: usize,
    pub direction: Direction,
    pub d_f: Vec<f64>,
    pub d_z: Vec<f64>,
    /// Axis partials `(∂z/∂x, ∂z/∂y)` per pixel.
    pub dz_axes: Vec<[f64; 2]>,
    pub d2_f: Option<Vec<f64>>,
    pub d2_z: Option<Vec<f64>>,
}

impl DerivativeField {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn d_f_band(&self, k: usize) -> &[f64] {
        let n = self.pixels();
        &self.d_f[k * n..(k + 1) * n]
    }

    pub fn d2_f_band(&self, k: usize) -> Option<&[f64]> {
        let n = self.pixels();
        self.d2_f.as_ref().map(|v| &v[k * n..(k + 1) * n])
    }

    /// True when every axis that contributes to the direction was
    /// differenced centrally at this pixel.
    pub fn is_interior(&self, pixel: usize) -> bool {
        let (x, y) = (pixel % self.width, pixel / self.width);
        let x_ok = self.direction.dx == 0.0 || (x > 0 && x + 1 < self.width);
        let y_ok = self.direction.dy == 0.0 || (y > 0 && y + 1 < self.height);
        x_ok && y_ok
    }
}

/// First difference along a line: central inside, second-order one-sided
/// at the ends. Exact on quadratics.
fn diff1(line: &[f64], out: &mut [f64]) {
    let n = line.len();
    out[0] = (-3.0 * line[0] + 4.0 * line[1] - line[2]) / 2.0;
    out[n - 1] = (3.0 * line[n - 1] - 4.0 * line[n - 2] + line[n - 3]) / 2.0;
    for i in 1..n - 1 {
        out[i] = (line[i + 1] - line[i - 1]) / 2.0;
    }
}

/// Second difference along a line; the ends reuse the nearest interior
/// stencil. Exact on quadratics.
fn diff2(line: &[f64], out: &mut [f64]) {
    let n = line.len();
    for i in 1..n - 1 {
        out[i] = line[i + 1] - 2.0 * line[i] + line[i - 1];
    }
    out[0] = line[0] - 2.0 * line[1] + line[2];
    out[n - 1] = line[n - 1] - 2.0 * line[n - 2] + line[n - 3];
}

fn along_x(plane: &[f64], w: usize, h: usize, op: fn(&[f64], &mut [f64])) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        op(&plane[y * w..(y + 1) * w], &mut out[y * w..(y + 1) * w]);
    }
    out
}

fn along_y(plane: &[f64], w: usize, h: usize, op: fn(&[f64], &mut [f64])) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    let mut col = vec![0.0; h];
    let mut res = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = plane[y * w + x];
        }
        op(&col, &mut res);
        for y in 0..h {
            out[y * w + x] = res[y];
        }
    }
    out
}

pub(crate) struct PlaneDerivatives {
    pub first: Vec<f64>,
    pub second: Option<Vec<f64>>,
    pub axes: [Vec<f64>; 2],
}

pub(crate) fn plane_derivatives(plane: &[f64], w: usize, h: usize, dir: Direction, second: bool) -> PlaneDerivatives {
    let n = w * h;
    let (a, b) = (dir.dx, dir.dy);
    let px = if a != 0.0 { along_x(plane, w, h, diff1) } else { vec![0.0; n] };
    let py = if b != 0.0 { along_y(plane, w, h, diff1) } else { vec![0.0; n] };
    let first = px.iter().zip(&py).map(|(x, y)| a * x + b * y).collect();
    let second = second.then(|| {
        let pxx = if a != 0.0 { along_x(plane, w, h, diff2) } else { vec![0.0; n] };
        let pyy = if b != 0.0 { along_y(plane, w, h, diff2) } else { vec![0.0; n] };
        let pxy = if a != 0.0 && b != 0.0 { along_y(&px, w, h, diff1) } else { vec![0.0; n] };
        (0..n)
            .map(|i| a * a * pxx[i] + 2.0 * a * b * pxy[i] + b * b * pyy[i])
            .collect()
    });
    PlaneDerivatives { first, second, axes: [px, py] }
}

/// Directional derivatives of every band of `image` and of `depth`.
///
/// Central differences in the interior, second-order one-sided differences
/// at the borders. `second` additionally computes second directional
/// derivatives, needed by the one-region pattern.
pub fn differentiate(
    image: &SpectralImage,
    depth: &DepthMap,
    direction: Direction,
    second: bool,
) -> Result<DerivativeField> {
    let (w, h) = (image.width(), image.height());
    if depth.width() != w || depth.height() != h {
        return Err(Error::ShapeMismatch(format!(
            "image is {w}x{h} but depth map is {}x{}",
            depth.width(),
            depth.height()
        )));
    }
    if direction.dx != 0.0 && w < 3 {
        return Err(Error::TooSmallImage { size: w });
    }
    if direction.dy != 0.0 && h < 3 {
        return Err(Error::TooSmallImage { size: h });
    }
    let n_bands = image.grid().n_bands();
    let per_band: Vec<PlaneDerivatives> = (0..n_bands)
        .into_par_iter()
        .map(|k| plane_derivatives(image.band(k), w, h, direction, second))
        .collect();
    let zd = plane_derivatives(depth.values(), w, h, direction, second);

    let mut d_f = Vec::with_capacity(w * h * n_bands);
    let mut d2_f = second.then(|| Vec::with_capacity(w * h * n_bands));
    for pd in per_band {
        d_f.extend_from_slice(&pd.first);
        if let (Some(acc), Some(s)) = (d2_f.as_mut(), pd.second) {
            acc.extend_from_slice(&s);
        }
    }
    let dz_axes = zd.axes[0].iter().zip(&zd.axes[1]).map(|(x, y)| [*x, *y]).collect();
    Ok(DerivativeField {
        width: w,
        height: h,
        direction,
        d_f,
        d_z: zd.first,
        dz_axes,
        d2_f,
        d2_z: zd.second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::ImageKind;
    use crate::spectral::SpectralGrid;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(400.0, 700.0, 2).unwrap()
    }

    fn image(w: usize, h: usize, f: impl Fn(f64, f64) -> f64) -> SpectralImage {
        SpectralImage::from_fn(w, h, grid(), ImageKind::Apparent, |i, _| {
            f((i % w) as f64, (i / w) as f64)
        })
        .unwrap()
    }

    fn flat_depth(w: usize, h: usize) -> DepthMap {
        DepthMap::new(w, h, vec![1.0; w * h]).unwrap()
    }

    #[test]
    fn constant_image_has_zero_derivative() {
        let img = image(5, 4, |_, _| 0.7);
        let d = differentiate(&img, &flat_depth(5, 4), Direction::X, true).unwrap();
        assert!(d.d_f.iter().all(|v| v.abs() < 1e-15));
        assert!(d.d2_f.unwrap().iter().all(|v| v.abs() < 1e-15));
        assert!(d.d_z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_field_is_differenced_exactly() {
        let img = image(6, 3, |x, _| 0.25 * x + 1.0);
        let d = differentiate(&img, &flat_depth(6, 3), Direction::X, false).unwrap();
        assert!(d.d_f.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn quadratic_field_has_exact_second_difference() {
        let img = image(7, 5, |x, y| 0.5 * x * x - 0.25 * x + 3.0 + 0.125 * y * y);
        let d = differentiate(&img, &flat_depth(7, 5), Direction::X, true).unwrap();
        for (i, v) in d.d_f_band(0).iter().enumerate() {
            let x = (i % 7) as f64;
            assert!((v - (x - 0.25)).abs() < 1e-13, "pixel {i}: {v}");
        }
        assert!(d.d2_f_band(0).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-13));
        let dy = differentiate(&img, &flat_depth(7, 5), Direction::Y, true).unwrap();
        assert!(dy.d2_f_band(1).unwrap().iter().all(|v| (v - 0.25).abs() < 1e-13));
    }

    #[test]
    fn diagonal_direction_combines_axes() {
        let img = image(5, 5, |x, y| 2.0 * x + 3.0 * y + x * y);
        let dir = Direction::new(1.0, 1.0).unwrap();
        let d = differentiate(&img, &flat_depth(5, 5), dir, true).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (i, v) in d.d_f_band(0).iter().enumerate() {
            let (x, y) = ((i % 5) as f64, (i / 5) as f64);
            let expected = s * (2.0 + y) + s * (3.0 + x);
            assert!((v - expected).abs() < 1e-12);
        }
        // second directional derivative of xy along (1,1)/√2 is 1
        assert!(d.d2_f_band(0).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn narrow_images_are_rejected() {
        let img = image(2, 5, |_, _| 1.0);
        let depth = flat_depth(2, 5);
        assert!(matches!(
            differentiate(&img, &depth, Direction::X, false),
            Err(Error::TooSmallImage { size: 2 })
        ));
        assert!(differentiate(&img, &depth, Direction::Y, false).is_ok());
        assert!(Direction::new(0.0, 0.0).is_err());
    }
}
