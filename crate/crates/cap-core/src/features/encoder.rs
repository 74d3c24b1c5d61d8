//! Frame encoders producing the base feature map at stride `k`.
//!
//! Two implementations: a deterministic training-free descriptor bank
//! (multi-scale smoothed-intensity samples and difference-of-Gaussian
//! responses), and a small two-layer convolutional stack with trainable
//! weights. Both anchor feature cell (cx, cy) at image pixel
//! (cx * k, cy * k).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::{FeatureMap, GrayImage};

pub trait FeatureEncoder: Send + Sync {
    fn encode(&self, frame: &GrayImage) -> Result<FeatureMap>;
    fn dim(&self) -> usize;
    fn stride(&self) -> usize;
}

/// Separable Gaussian blur with edge clamping, truncated at 3 sigma.
fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut sum = 0.0;
    for i in -radius..=radius {
        let w = (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp();
        kernel.push(w);
        sum += w;
    }
    for w in &mut kernel {
        *w /= sum;
    }
    let (w, h) = (img.width(), img.height());
    let mut horizontal = GrayImage::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kw) in kernel.iter().enumerate() {
                let sx = x as isize + i as isize - radius;
                acc += kw * img.get_clamped(sx, y as isize);
            }
            horizontal.set(x, y, acc);
        }
    }
    let mut out = GrayImage::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kw) in kernel.iter().enumerate() {
                let sy = y as isize + i as isize - radius;
                acc += kw * horizontal.get_clamped(x as isize, sy);
            }
            out.set(x, y, acc);
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
enum ChannelSpec {
    /// Smoothed intensity at (dx, dy) from the anchor, at blur level `level`.
    Blur { level: usize, dx: isize, dy: isize },
    /// Difference of Gaussians between blur levels at an offset.
    Dog {
        fine: usize,
        coarse: usize,
        dx: isize,
        dy: isize,
    },
}

fn offset_grid(half: isize, step: isize) -> Vec<(isize, isize)> {
    let mut offsets = Vec::new();
    let mut v = -half;
    let mut axis = Vec::new();
    while v <= half {
        axis.push(v);
        v += step;
    }
    for &dy in &axis {
        for &dx in &axis {
            offsets.push((dx, dy));
        }
    }
    // Center-out ordering so low channel counts keep the local samples.
    offsets.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    offsets
}

/// Deterministic, training-free encoder: a bank of smoothed-intensity
/// samples and difference-of-Gaussian responses around each grid anchor,
/// mean-subtracted and L2-normalized per position. Usable with zero
/// training; a constant frame encodes to all zeros.
pub struct FixedEncoder {
    stride: usize,
    dim: usize,
    specs: Vec<ChannelSpec>,
}

impl FixedEncoder {
    /// Blur scales used by the descriptor bank.
    const SIGMAS: [f64; 3] = [1.0, 2.0, 4.0];

    pub fn new(stride: usize, dim: usize) -> Self {
        let mut specs = Vec::with_capacity(dim);
        let mut round = 1isize;
        while specs.len() < dim {
            for (dx, dy) in offset_grid(6 * round, 2 * round) {
                specs.push(ChannelSpec::Blur { level: 0, dx, dy });
            }
            for (dx, dy) in offset_grid(8 * round, 4 * round) {
                specs.push(ChannelSpec::Blur { level: 1, dx, dy });
            }
            for (dx, dy) in offset_grid(3 * round, 3 * round) {
                specs.push(ChannelSpec::Dog {
                    fine: 0,
                    coarse: 1,
                    dx,
                    dy,
                });
            }
            for (dx, dy) in offset_grid(5 * round, 5 * round) {
                specs.push(ChannelSpec::Dog {
                    fine: 1,
                    coarse: 2,
                    dx,
                    dy,
                });
            }
            round += 1;
        }
        specs.truncate(dim);
        Self {
            stride,
            dim,
            specs,
        }
    }
}

impl FeatureEncoder for FixedEncoder {
    fn encode(&self, frame: &GrayImage) -> Result<FeatureMap> {
        let blurs: Vec<GrayImage> = Self::SIGMAS
            .iter()
            .map(|&s| gaussian_blur(frame, s))
            .collect();
        let w = frame.width().div_ceil(self.stride);
        let h = frame.height().div_ceil(self.stride);
        let mut out = FeatureMap::zeros(self.dim, w, h);
        let mut v = vec![0.0; self.dim];
        for gy in 0..h {
            for gx in 0..w {
                let px = (gx * self.stride) as isize;
                let py = (gy * self.stride) as isize;
                for (c, spec) in self.specs.iter().enumerate() {
                    v[c] = match *spec {
                        ChannelSpec::Blur { level, dx, dy } => {
                            blurs[level].get_clamped(px + dx, py + dy)
                        }
                        ChannelSpec::Dog {
                            fine,
                            coarse,
                            dx,
                            dy,
                        } => {
                            blurs[fine].get_clamped(px + dx, py + dy)
                                - blurs[coarse].get_clamped(px + dx, py + dy)
                        }
                    };
                }
                let mean = v.iter().sum::<f64>() / self.dim as f64;
                for x in v.iter_mut() {
                    *x -= mean;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    for x in v.iter_mut() {
                        *x /= norm;
                    }
                } else {
                    v.iter_mut().for_each(|x| *x = 0.0);
                }
                for c in 0..self.dim {
                    out.set(c, gx, gy, v[c]);
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

/// Two-layer convolutional encoder with total stride `k`: conv (stride s1,
/// ReLU) then conv (stride s2), s1 * s2 = k, edge-clamped sampling. Weights
/// are seeded at construction; the forward pass is deterministic.
pub struct LearnedEncoder {
    stride: usize,
    dim: usize,
    hidden: usize,
    ks1: usize,
    ks2: usize,
    s1: usize,
    s2: usize,
    /// [hidden][ks1][ks1]
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// [dim][hidden][ks2][ks2]
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl LearnedEncoder {
    pub fn seeded(stride: usize, dim: usize, hidden: usize, seed: u64) -> Self {
        let (s1, s2) = if stride % 2 == 0 {
            (2, stride / 2)
        } else {
            (stride, 1)
        };
        let (ks1, ks2) = (5usize, 3usize);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = |fan_in: usize, len: usize| -> Vec<f64> {
            let scale = (2.0 / fan_in as f64).sqrt();
            (0..len).map(|_| rng.gen_range(-scale..scale)).collect()
        };
        let w1 = init(ks1 * ks1, hidden * ks1 * ks1);
        let w2 = init(hidden * ks2 * ks2, dim * hidden * ks2 * ks2);
        Self {
            stride,
            dim,
            hidden,
            ks1,
            ks2,
            s1,
            s2,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; dim],
        }
    }

    /// Flat views of the weight tensors, for checkpointing.
    pub fn tensors(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        vec![
            ("enc.w1", vec![self.hidden, self.ks1, self.ks1], &self.w1[..]),
            ("enc.b1", vec![self.hidden], &self.b1[..]),
            (
                "enc.w2",
                vec![self.dim, self.hidden, self.ks2, self.ks2],
                &self.w2[..],
            ),
            ("enc.b2", vec![self.dim], &self.b2[..]),
        ]
    }
}

impl FeatureEncoder for LearnedEncoder {
    fn encode(&self, frame: &GrayImage) -> Result<FeatureMap> {
        let r1 = (self.ks1 / 2) as isize;
        let w1out = frame.width().div_ceil(self.s1);
        let h1out = frame.height().div_ceil(self.s1);
        let mut mid = FeatureMap::zeros(self.hidden, w1out, h1out);
        for c in 0..self.hidden {
            for oy in 0..h1out {
                for ox in 0..w1out {
                    let ax = (ox * self.s1) as isize;
                    let ay = (oy * self.s1) as isize;
                    let mut acc = self.b1[c];
                    for ky in 0..self.ks1 {
                        for kx in 0..self.ks1 {
                            let wgt = self.w1[(c * self.ks1 + ky) * self.ks1 + kx];
                            acc += wgt
                                * frame.get_clamped(
                                    ax + kx as isize - r1,
                                    ay + ky as isize - r1,
                                );
                        }
                    }
                    mid.set(c, ox, oy, acc.max(0.0));
                }
            }
        }
        let r2 = (self.ks2 / 2) as isize;
        let w2out = w1out.div_ceil(self.s2);
        let h2out = h1out.div_ceil(self.s2);
        let mut out = FeatureMap::zeros(self.dim, w2out, h2out);
        let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
        for c in 0..self.dim {
            for oy in 0..h2out {
                for ox in 0..w2out {
                    let ax = (ox * self.s2) as isize;
                    let ay = (oy * self.s2) as isize;
                    let mut acc = self.b2[c];
                    for ci in 0..self.hidden {
                        for ky in 0..self.ks2 {
                            for kx in 0..self.ks2 {
                                let wgt = self.w2
                                    [((c * self.hidden + ci) * self.ks2 + ky) * self.ks2 + kx];
                                let sx = clamp(ax + kx as isize - r2, w1out);
                                let sy = clamp(ay + ky as isize - r2, h1out);
                                acc += wgt * mid.get(ci, sx, sy);
                            }
                        }
                    }
                    out.set(c, ox, oy, acc);
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
