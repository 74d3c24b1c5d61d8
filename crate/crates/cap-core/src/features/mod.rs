//! Per-frame multi-scale features and local correlation lookups.
//!
//! A frame is encoded once into a base feature map at stride `k`; coarser
//! levels are produced by repeated 2x2 average pooling. Correlation
//! responses for a tracked point are inner products between its tracking
//! feature and bilinearly sampled map vectors at integer offsets around the
//! point, per scale.
//!
//! Conventions used throughout: feature cell (cx, cy) of level `s`
//! describes the image at pixel (cx, cy) * k * 2^(s-1); all out-of-range
//! accesses clamp to the edge.

pub mod encoder;

pub use encoder::{FeatureEncoder, FixedEncoder, LearnedEncoder};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grayscale frame with values in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
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

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel value with coordinates clamped to the image.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc)
    }
}

/// Geometry of the feature extraction: base stride, channel count, number
/// of pyramid scales, and the correlation offset radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Base stride k of the encoder grid, in pixels.
    pub stride: usize,
    /// Feature channels.
    pub dim: usize,
    /// Pyramid levels S.
    pub scales: usize,
    /// Correlation offset radius (offsets range over [-delta, delta]^2).
    pub delta: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            stride: 4,
            dim: 128,
            scales: 4,
            delta: 3,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride < 1 || self.dim < 1 || self.scales < 1 {
            return Err(Error::Domain(
                "stride, dim, and scales must all be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Pixels per feature cell at 1-based level `s`: k * 2^(s-1).
    pub fn level_scale(&self, s: usize) -> f64 {
        (self.stride as f64) * (1u64 << (s - 1)) as f64
    }

    /// Offsets per scale: (2*delta + 1)^2.
    pub fn offsets_per_scale(&self) -> usize {
        let side = 2 * self.delta + 1;
        side * side
    }

    /// Total correlation responses per point: S * (2*delta + 1)^2.
    pub fn corr_len(&self) -> usize {
        self.scales * self.offsets_per_scale()
    }
}

/// Dense feature map: `dim` channels over an h x w grid, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    dim: usize,
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(dim: usize, width: usize, height: usize) -> Self {
        Self {
            dim,
            width,
            height,
            data: vec![0.0; dim * width * height],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn idx(&self, c: usize, x: usize, y: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[self.idx(c, x, y)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f64) {
        let i = self.idx(c, x, y);
        self.data[i] = v;
    }

    /// Feature vector at an integer grid position.
    pub fn vector_at(&self, x: usize, y: usize) -> Vec<f64> {
        (0..self.dim).map(|c| self.get(c, x, y)).collect()
    }

    /// 2x2 average pooling with edge clamping: output (x, y) is the mean of
    /// the up-to-4 input cells (2x, 2y), (2x+1, 2y), (2x, 2y+1), (2x+1, 2y+1)
    /// that exist; clamping makes a missing row or column repeat the edge,
    /// which equals averaging only the present cells.
    pub fn pool2(&self) -> FeatureMap {
        let w = self.width.div_ceil(2);
        let h = self.height.div_ceil(2);
        let mut out = FeatureMap::zeros(self.dim, w, h);
        for c in 0..self.dim {
            for y in 0..h {
                for x in 0..w {
                    let x0 = 2 * x;
                    let y0 = 2 * y;
                    let x1 = (x0 + 1).min(self.width - 1);
                    let y1 = (y0 + 1).min(self.height - 1);
                    let v = 0.25
                        * (self.get(c, x0, y0)
                            + self.get(c, x1, y0)
                            + self.get(c, x0, y1)
                            + self.get(c, x1, y1));
                    out.set(c, x, y, v);
                }
            }
        }
        out
    }
}

/// Bilinear sample of all channels at continuous map coordinates, clamped
/// to the grid. Integer coordinates return the exact grid vector.
pub fn bilinear_sample(map: &FeatureMap, x: f64, y: f64) -> Vec<f64> {
    let mut out = vec![0.0; map.dim()];
    bilinear_sample_into(map, x, y, &mut out);
    out
}

/// [`bilinear_sample`] into a caller-provided buffer.
pub fn bilinear_sample_into(map: &FeatureMap, x: f64, y: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), map.dim());
    let (x0, y0, fx, fy) = bilinear_coords(map.width(), map.height(), x, y);
    let x1 = (x0 + 1).min(map.width() - 1);
    let y1 = (y0 + 1).min(map.height() - 1);
    let w00 = (1.0 - fx) * (1.0 - fy);
    let w10 = fx * (1.0 - fy);
    let w01 = (1.0 - fx) * fy;
    let w11 = fx * fy;
    for (c, o) in out.iter_mut().enumerate() {
        *o = w00 * map.get(c, x0, y0)
            + w10 * map.get(c, x1, y0)
            + w01 * map.get(c, x0, y1)
            + w11 * map.get(c, x1, y1);
    }
}

/// Clamped base cell and fractional parts for bilinear interpolation.
#[inline]
pub(crate) fn bilinear_coords(w: usize, h: usize, x: f64, y: f64) -> (usize, usize, f64, f64) {
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let x0 = xc.floor().min((w - 1) as f64);
    let y0 = yc.floor().min((h - 1) as f64);
    (x0 as usize, y0 as usize, xc - x0, yc - y0)
}

/// Multi-scale feature pyramid: level 1 is the encoder output at stride k,
/// level s+1 is the 2x2 average pooling of level s.
#[derive(Debug, Clone)]
pub struct FeaturePyramid {
    levels: Vec<FeatureMap>,
}

impl FeaturePyramid {
    pub fn from_base(base: FeatureMap, scales: usize) -> Self {
        let mut levels = Vec::with_capacity(scales);
        levels.push(base);
        for _ in 1..scales {
            let next = levels.last().unwrap().pool2();
            levels.push(next);
        }
        Self { levels }
    }

    /// Level by 1-based scale index.
    pub fn level(&self, s: usize) -> &FeatureMap {
        &self.levels[s - 1]
    }

    pub fn scales(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].dim()
    }
}

/// Encodes a frame and builds its pyramid.
pub fn extract_pyramid(
    frame: &GrayImage,
    encoder: &dyn FeatureEncoder,
    cfg: &FeatureConfig,
) -> Result<FeaturePyramid> {
    cfg.validate()?;
    if frame.width() < cfg.stride || frame.height() < cfg.stride {
        return Err(Error::Size(format!(
            "frame {}x{} smaller than one stride-{} cell",
            frame.width(),
            frame.height(),
            cfg.stride
        )));
    }
    let base = encoder.encode(frame)?;
    if base.dim() != cfg.dim {
        return Err(Error::Shape(format!(
            "encoder produced {} channels, config wants {}",
            base.dim(),
            cfg.dim
        )));
    }
    Ok(FeaturePyramid::from_base(base, cfg.scales))
}

/// All-pairs correlation volume between two maps with the same channel
/// count: out[((i * W1 + j) * H2 + k) * W2 + l] = <F1(j, i), F2(l, k)>
/// with (i, k) rows and (j, l) columns. Intended for small maps; it is the
/// test oracle for the local lookup.
pub fn corr_full(f1: &FeatureMap, f2: &FeatureMap) -> Result<Vec<f64>> {
    if f1.dim() != f2.dim() {
        return Err(Error::Shape(format!(
            "channel mismatch: {} vs {}",
            f1.dim(),
            f2.dim()
        )));
    }
    let (h1, w1, h2, w2) = (f1.height(), f1.width(), f2.height(), f2.width());
    let mut out = vec![0.0; h1 * w1 * h2 * w2];
    for i in 0..h1 {
        for j in 0..w1 {
            for k in 0..h2 {
                for l in 0..w2 {
                    let mut dot = 0.0;
                    for c in 0..f1.dim() {
                        dot += f1.get(c, j, i) * f2.get(c, l, k);
                    }
                    out[((i * w1 + j) * h2 + k) * w2 + l] = dot;
                }
            }
        }
    }
    Ok(out)
}

/// Local multi-scale correlation: for scale s and offset (dx, dy) in
/// [-delta, delta]^2, the inner product between `track_feature` and the
/// level-s map sampled at center / (k * 2^(s-1)) + (dx, dy).
///
/// Layout: scale-major, then dy, then dx:
/// `out[(s-1) * (2d+1)^2 + (dy+d) * (2d+1) + (dx+d)]`.
pub fn corr_local(
    track_feature: &[f64],
    pyramid: &FeaturePyramid,
    center: (f64, f64),
    cfg: &FeatureConfig,
) -> Vec<f64> {
    let mut out = vec![0.0; cfg.corr_len()];
    corr_local_into(track_feature, pyramid, center, cfg, &mut out);
    out
}

/// [`corr_local`] into a caller-provided buffer.
pub fn corr_local_into(
    track_feature: &[f64],
    pyramid: &FeaturePyramid,
    center: (f64, f64),
    cfg: &FeatureConfig,
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), cfg.corr_len());
    let side = 2 * cfg.delta + 1;
    let d = cfg.delta as isize;
    let mut sample = vec![0.0; pyramid.dim()];
    for s in 1..=cfg.scales {
        let map = pyramid.level(s);
        let scale = cfg.level_scale(s);
        let cx = center.0 / scale;
        let cy = center.1 / scale;
        for dy in -d..=d {
            for dx in -d..=d {
                bilinear_sample_into(map, cx + dx as f64, cy + dy as f64, &mut sample);
                let dot: f64 = track_feature
                    .iter()
                    .zip(sample.iter())
                    .map(|(a, b)| a * b)
                    .sum();
                out[(s - 1) * side * side
                    + (dy + d) as usize * side
                    + (dx + d) as usize] = dot;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Trivial linear zero-bias encoder: channel 0 is the pixel at the cell
    /// anchor, channel c is the pixel c steps to the right (clamped).
    struct ShiftEncoder {
        dim: usize,
        stride: usize,
    }

    impl FeatureEncoder for ShiftEncoder {
        fn encode(&self, frame: &GrayImage) -> crate::error::Result<FeatureMap> {
            let w = frame.width().div_ceil(self.stride);
            let h = frame.height().div_ceil(self.stride);
            let mut out = FeatureMap::zeros(self.dim, w, h);
            for c in 0..self.dim {
                for y in 0..h {
                    for x in 0..w {
                        let px = (x * self.stride + c) as isize;
                        let py = (y * self.stride) as isize;
                        out.set(c, x, y, frame.get_clamped(px, py));
                    }
                }
            }
            Ok(out)
        }

        fn dim(&self) -> usize {
            self.dim
        }

        fn stride(&self) -> usize {
            self.stride
        }
    }

    fn random_map(rng: &mut ChaCha8Rng, dim: usize, w: usize, h: usize) -> FeatureMap {
        let mut m = FeatureMap::zeros(dim, w, h);
        for c in 0..dim {
            for y in 0..h {
                for x in 0..w {
                    m.set(c, x, y, rng.gen_range(-1.0..1.0));
                }
            }
        }
        m
    }

    fn gaussian_blob(w: usize, h: usize, cx: f64, cy: f64, sigma: f64) -> GrayImage {
        let mut img = GrayImage::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                img.set(x, y, (-r2 / (2.0 * sigma * sigma)).exp());
            }
        }
        img
    }

    #[test]
    fn zero_frame_gives_zero_levels() {
        let frame = GrayImage::zeros(16, 16);
        let cfg = FeatureConfig {
            stride: 4,
            dim: 3,
            scales: 3,
            delta: 1,
        };
        let enc = ShiftEncoder { dim: 3, stride: 4 };
        let pyr = extract_pyramid(&frame, &enc, &cfg).unwrap();
        for s in 1..=3 {
            let m = pyr.level(s);
            for c in 0..3 {
                for y in 0..m.height() {
                    for x in 0..m.width() {
                        assert_eq!(m.get(c, x, y), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn pyramid_shapes_follow_ceiling_division() {
        let frame = GrayImage::zeros(32, 32);
        let cfg = FeatureConfig {
            stride: 4,
            dim: 2,
            scales: 4,
            delta: 1,
        };
        let enc = ShiftEncoder { dim: 2, stride: 4 };
        let pyr = extract_pyramid(&frame, &enc, &cfg).unwrap();
        let shapes: Vec<(usize, usize)> = (1..=4)
            .map(|s| (pyr.level(s).width(), pyr.level(s).height()))
            .collect();
        assert_eq!(shapes, vec![(8, 8), (4, 4), (2, 2), (1, 1)]);
    }

    #[test]
    fn pyramid_shapes_for_all_sizes() {
        let cfg = FeatureConfig {
            stride: 4,
            dim: 1,
            scales: 3,
            delta: 1,
        };
        for n in [4usize, 5, 7, 16, 33, 100, 511, 512] {
            let frame = GrayImage::zeros(n, n);
            let enc = ShiftEncoder { dim: 1, stride: 4 };
            let pyr = extract_pyramid(&frame, &enc, &cfg).unwrap();
            for s in 1..=3usize {
                let denom = 4 * (1 << (s - 1));
                let want = n.div_ceil(denom);
                assert_eq!(pyr.level(s).width(), want, "n={n} s={s}");
                assert_eq!(pyr.level(s).height(), want, "n={n} s={s}");
            }
        }
    }

    #[test]
    fn pooled_cell_is_mean_of_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = random_map(&mut rng, 2, 6, 6);
        let pooled = base.pool2();
        for c in 0..2 {
            let mean = (base.get(c, 0, 0)
                + base.get(c, 1, 0)
                + base.get(c, 0, 1)
                + base.get(c, 1, 1))
                / 4.0;
            assert!((pooled.get(c, 0, 0) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_at_integer_coords_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let map = random_map(&mut rng, 3, 5, 4);
        let v = bilinear_sample(&map, 2.0, 3.0);
        assert_eq!(v, map.vector_at(2, 3));
    }

    #[test]
    fn bilinear_midpoint_averages() {
        let mut map = FeatureMap::zeros(1, 2, 1);
        map.set(0, 0, 0, 1.0);
        map.set(0, 1, 0, 5.0);
        let v = bilinear_sample(&map, 0.5, 0.0);
        assert!((v[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bilinear_clamps_out_of_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let map = random_map(&mut rng, 2, 4, 4);
        assert_eq!(bilinear_sample(&map, -5.0, -5.0), map.vector_at(0, 0));
        assert_eq!(bilinear_sample(&map, 99.0, 99.0), map.vector_at(3, 3));
    }

    #[test]
    fn corr_full_identity_on_one_hot_features() {
        // One-hot channel per position: the volume is 1 exactly where the
        // positions' channels coincide.
        let mut f = FeatureMap::zeros(4, 2, 2);
        for (i, (x, y)) in [(0, 0), (1, 0), (0, 1), (1, 1)].iter().enumerate() {
            f.set(i, *x, *y, 1.0);
        }
        let vol = corr_full(&f, &f).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let v = vol[((i * 2 + j) * 2 + k) * 2 + l];
                        let expect = if (i, j) == (k, l) { 1.0 } else { 0.0 };
                        assert_eq!(v, expect);
                    }
                }
            }
        }
    }

    #[test]
    fn corr_full_diagonal_is_squared_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = random_map(&mut rng, 5, 3, 3);
        let vol = corr_full(&f, &f).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let norm2: f64 = (0..5).map(|c| f.get(c, j, i).powi(2)).sum();
                let v = vol[((i * 3 + j) * 3 + i) * 3 + j];
                assert!((v - norm2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn corr_full_matches_scalar_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let dim = rng.gen_range(1..5);
            let (w1, h1) = (rng.gen_range(1..4), rng.gen_range(1..4));
            let (w2, h2) = (rng.gen_range(1..4), rng.gen_range(1..4));
            let f1 = random_map(&mut rng, dim, w1, h1);
            let f2 = random_map(&mut rng, dim, w2, h2);
            let vol = corr_full(&f1, &f2).unwrap();
            // Naive re-computation, element by element.
            for i in 0..h1 {
                for j in 0..w1 {
                    for k in 0..h2 {
                        for l in 0..w2 {
                            let mut dot = 0.0;
                            for c in 0..dim {
                                dot += f1.get(c, j, i) * f2.get(c, l, k);
                            }
                            let got = vol[((i * w1 + j) * h2 + k) * w2 + l];
                            assert!((got - dot).abs() < 1e-6);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn corr_full_rejects_channel_mismatch() {
        let a = FeatureMap::zeros(2, 2, 2);
        let b = FeatureMap::zeros(3, 2, 2);
        assert!(corr_full(&a, &b).is_err());
    }

    #[test]
    fn zero_track_feature_gives_zero_responses() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let base = random_map(&mut rng, 4, 8, 8);
        let pyr = FeaturePyramid::from_base(base, 3);
        let cfg = FeatureConfig {
            stride: 1,
            dim: 4,
            scales: 3,
            delta: 2,
        };
        let out = corr_local(&vec![0.0; 4], &pyr, (3.5, 4.5), &cfg);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pooled_inner_product_equals_mean_of_inner_products() {
        // Linearity: <F, mean of cells> == mean of <F, cell> per 2x2 block.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let dim = rng.gen_range(1..6);
            let base = random_map(&mut rng, dim, 8, 8);
            let pooled = base.pool2();
            let f: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let bx = rng.gen_range(0..4);
            let by = rng.gen_range(0..4);
            let lhs: f64 = (0..dim).map(|c| f[c] * pooled.get(c, bx, by)).sum();
            let mut rhs = 0.0;
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let dot: f64 = (0..dim)
                    .map(|c| f[c] * base.get(c, 2 * bx + dx, 2 * by + dy))
                    .sum();
                rhs += dot / 4.0;
            }
            assert!((lhs - rhs).abs() < 1e-6);
        }
    }

    #[test]
    fn blob_argmax_points_toward_blob_center() {
        // Identity-like encoder at stride 1; query 2 px right of the blob.
        let cfg = FeatureConfig {
            stride: 1,
            dim: 9,
            scales: 2,
            delta: 3,
        };
        let enc = FixedEncoder::new(cfg.stride, cfg.dim);
        let frame = gaussian_blob(32, 32, 15.0, 16.0, 2.0);
        let pyr = extract_pyramid(&frame, &enc, &cfg).unwrap();
        // Track feature captured at the true blob center.
        let track = bilinear_sample(pyr.level(1), 15.0, 16.0);
        let out = corr_local(&track, &pyr, (17.0, 16.0), &cfg);
        // Brute-force search over the finest-scale offsets.
        let side = 2 * cfg.delta + 1;
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for dy in 0..side {
            for dx in 0..side {
                let v = out[dy * side + dx];
                if v > best.0 {
                    best = (v, dx as isize - 3, dy as isize - 3);
                }
            }
        }
        assert_eq!((best.1, best.2), (-2, 0), "argmax {best:?}");
    }

    #[test]
    fn translation_consistency_on_aligned_shifts() {
        // Shifting content and center by a multiple of k * 2^(S-1) keeps
        // every pyramid level aligned, so responses match.
        let cfg = FeatureConfig {
            stride: 1,
            dim: 9,
            scales: 3,
            delta: 2,
        };
        let enc = FixedEncoder::new(cfg.stride, cfg.dim);
        let shift = 4.0; // k * 2^(S-1) = 4
        let a = gaussian_blob(48, 48, 20.0, 22.0, 2.5);
        let b = gaussian_blob(48, 48, 20.0 + shift, 22.0 + shift, 2.5);
        let pa = extract_pyramid(&a, &enc, &cfg).unwrap();
        let pb = extract_pyramid(&b, &enc, &cfg).unwrap();
        let track_a = bilinear_sample(pa.level(1), 20.0, 22.0);
        let track_b = bilinear_sample(pb.level(1), 20.0 + shift, 22.0 + shift);
        let ra = corr_local(&track_a, &pa, (21.0, 23.0), &cfg);
        let rb = corr_local(&track_b, &pb, (21.0 + shift, 23.0 + shift), &cfg);
        for (x, y) in ra.iter().zip(rb.iter()) {
            assert!((x - y).abs() < 1e-5, "{x} vs {y}");
        }
    }
}
