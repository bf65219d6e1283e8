//! Seeded synthetic grayscale scenes with exact one-pixel ground-truth
//! edges.
//!
//! Scenes are painted shape by shape into a label map (background is
//! label 0, the k-th painted shape is label k). A pixel is an edge pixel
//! when one of its in-image 4-neighbours carries a strictly lower label,
//! i.e. it lies on the visible boundary of the shape drawn over whatever
//! was beneath. Edges are computed before texture and noise are applied.
//!
//! Randomness comes from ChaCha8 seeded with the spec's seed, so output is
//! bit-identical across runs and platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{BinaryMap, SoftMap};

pub const MIN_SIZE: usize = 16;
pub const MAX_EDGE_DENSITY: f64 = 0.15;
const PLACEMENT_ATTEMPTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Texture {
    #[default]
    None,
    Stripes,
    Checker,
}

impl std::str::FromStr for Texture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Texture::None),
            "stripes" => Ok(Texture::Stripes),
            "checker" => Ok(Texture::Checker),
            other => Err(Error::InvalidConfig(format!("unknown texture '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub shape_count: usize,
    /// Standard deviation of the additive Gaussian noise, in `[0, 0.5]`.
    pub noise_sigma: f64,
    pub texture: Texture,
    /// Peak-to-peak texture amplitude, in `[0, 0.5]`.
    pub texture_contrast: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            height: 64,
            width: 64,
            shape_count: 4,
            noise_sigma: 0.05,
            texture: Texture::Stripes,
            texture_contrast: 0.2,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < MIN_SIZE || self.width < MIN_SIZE {
            return Err(Error::InvalidSpec(format!(
                "size must be at least {MIN_SIZE}x{MIN_SIZE}, got {}x{}",
                self.height, self.width
            )));
        }
        if self.shape_count == 0 {
            return Err(Error::InvalidSpec("shape_count must be at least 1".into()));
        }
        if !(0.0..=0.5).contains(&self.noise_sigma) {
            return Err(Error::InvalidSpec(format!(
                "noise_sigma must lie in [0, 0.5], got {}",
                self.noise_sigma
            )));
        }
        if !(0.0..=0.5).contains(&self.texture_contrast) {
            return Err(Error::InvalidSpec(format!(
                "texture_contrast must lie in [0, 0.5], got {}",
                self.texture_contrast
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: SoftMap,
    pub edges: BinaryMap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Half-open pixel box `[top, top + height) x [left, left + width)`.
    Rect {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    /// Filled midpoint-circle disk.
    Disk {
        center_row: usize,
        center_col: usize,
        radius: usize,
    },
}

impl Shape {
    /// Calls `f(row, col)` for every covered pixel inside the image.
    fn for_each_pixel(&self, height: usize, width: usize, mut f: impl FnMut(usize, usize)) {
        match *self {
            Shape::Rect {
                top,
                left,
                height: h,
                width: w,
            } => {
                for r in top..(top + h).min(height) {
                    for c in left..(left + w).min(width) {
                        f(r, c);
                    }
                }
            }
            Shape::Disk {
                center_row,
                center_col,
                radius,
            } => {
                let spans = midpoint_spans(radius);
                let (cr, cc) = (center_row as isize, center_col as isize);
                for (dy, &half) in spans.iter().enumerate() {
                    let rows: &[isize] = if dy == 0 { &[0] } else { &[-1, 1] };
                    for &sign in rows {
                        let r = cr + sign * dy as isize;
                        if r < 0 || r >= height as isize {
                            continue;
                        }
                        let lo = (cc - half as isize).max(0);
                        let hi = (cc + half as isize).min(width as isize - 1);
                        for c in lo..=hi {
                            f(r as usize, c as usize);
                        }
                    }
                }
            }
        }
    }
}

/// Half-width of the filled disk for each row offset `0..=radius`, from the
/// midpoint circle algorithm.
fn midpoint_spans(radius: usize) -> Vec<usize> {
    let mut spans = vec![0usize; radius + 1];
    let (mut x, mut y) = (radius as isize, 0isize);
    let mut err = 1 - radius as isize;
    while x >= y {
        let (xu, yu) = (x as usize, y as usize);
        spans[yu] = spans[yu].max(xu);
        spans[xu] = spans[xu].max(yu);
        y += 1;
        if err < 0 {
            err += 2 * y + 1;
        } else {
            x -= 1;
            err += 2 * (y - x) + 1;
        }
    }
    spans
}

/// Pixels with an in-image 4-neighbour of strictly lower label.
pub fn boundary_of_labels(labels: &[u16], height: usize, width: usize) -> BinaryMap {
    let mut edges = vec![0u8; height * width];
    for r in 0..height {
        for c in 0..width {
            let l = labels[r * width + c];
            if l == 0 {
                continue;
            }
            let lower = |rr: usize, cc: usize| labels[rr * width + cc] < l;
            let hit = (r > 0 && lower(r - 1, c))
                || (r + 1 < height && lower(r + 1, c))
                || (c > 0 && lower(r, c - 1))
                || (c + 1 < width && lower(r, c + 1));
            edges[r * width + c] = u8::from(hit);
        }
    }
    BinaryMap::new(height, width, edges).expect("binary by construction")
}

/// Paints `shapes` in order over a background of label 0.
pub fn label_map(height: usize, width: usize, shapes: &[Shape]) -> Vec<u16> {
    let mut labels = vec![0u16; height * width];
    for (k, shape) in shapes.iter().enumerate() {
        let label = (k + 1) as u16;
        shape.for_each_pixel(height, width, |r, c| labels[r * width + c] = label);
    }
    labels
}

#[derive(Debug, Clone, Copy)]
struct TextureParams {
    period: usize,
    vertical: bool,
    phase: usize,
}

fn texture_offset(kind: Texture, p: TextureParams, contrast: f64, r: usize, c: usize) -> f64 {
    let on = match kind {
        Texture::None => return 0.0,
        Texture::Stripes => {
            let coord = if p.vertical { c } else { r };
            ((coord + p.phase) / p.period).is_multiple_of(2)
        }
        Texture::Checker => ((r + p.phase) / p.period + (c + p.phase) / p.period).is_multiple_of(2),
    };
    if on {
        contrast / 2.0
    } else {
        -contrast / 2.0
    }
}

fn random_shape(rng: &mut ChaCha8Rng, height: usize, width: usize) -> Shape {
    let short = height.min(width);
    let min_side = (short / 4).max(6);
    let max_side = (short / 2).max(min_side);
    if rng.random_bool(0.5) {
        let h = rng.random_range(min_side..=max_side);
        let w = rng.random_range(min_side..=max_side);
        Shape::Rect {
            top: rng.random_range(0..=height - h),
            left: rng.random_range(0..=width - w),
            height: h,
            width: w,
        }
    } else {
        let radius = rng.random_range(min_side / 2..=max_side / 2);
        Shape::Disk {
            center_row: rng.random_range(radius..=height - 1 - radius),
            center_col: rng.random_range(radius..=width - 1 - radius),
            radius,
        }
    }
}

fn pick_intensity(rng: &mut ChaCha8Rng, taken: &[f64], gap: f64) -> f64 {
    let mut best = (0.5, -1.0);
    for _ in 0..64 {
        let v = rng.random_range(0.1..=0.9);
        let d = taken.iter().map(|t| (t - v).abs()).fold(f64::INFINITY, f64::min);
        if d >= gap {
            return v;
        }
        if d > best.1 {
            best = (v, d);
        }
    }
    best.0
}

/// Renders a scene from explicit shapes with no texture or noise.
pub fn render_shapes(height: usize, width: usize, shapes: &[Shape], intensities: &[f64]) -> Sample {
    let labels = label_map(height, width, shapes);
    let image = labels
        .iter()
        .map(|&l| if l == 0 { 0.0 } else { intensities[l as usize - 1] })
        .collect();
    Sample {
        image: SoftMap::new(height, width, image).expect("intensities in range"),
        edges: boundary_of_labels(&labels, height, width),
    }
}

pub fn generate(spec: &SceneSpec) -> Result<Sample> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut shapes: Vec<Shape> = Vec::with_capacity(spec.shape_count);
    for _ in 0..spec.shape_count {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let candidate = random_shape(&mut rng, h, w);
            shapes.push(candidate);
            let labels = label_map(h, w, &shapes);
            let density = boundary_of_labels(&labels, h, w).count_ones() as f64 / (h * w) as f64;
            if density <= MAX_EDGE_DENSITY {
                break;
            }
            shapes.pop();
        }
    }
    let labels = label_map(h, w, &shapes);
    let edges = boundary_of_labels(&labels, h, w);

    let gap = (0.8 / (shapes.len() + 1) as f64).min(0.15);
    let mut intensities: Vec<f64> = Vec::with_capacity(shapes.len() + 1);
    for _ in 0..=shapes.len() {
        let v = pick_intensity(&mut rng, &intensities, gap);
        intensities.push(v);
    }
    let textures: Vec<TextureParams> = (0..=shapes.len())
        .map(|_| {
            let period = rng.random_range(2..=5);
            TextureParams {
                period,
                vertical: rng.random_bool(0.5),
                phase: rng.random_range(0..period),
            }
        })
        .collect();

    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
    let mut image = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let l = labels[r * w + c] as usize;
            let mut v = intensities[l]
                + texture_offset(spec.texture, textures[l], spec.texture_contrast, r, c);
            if spec.noise_sigma > 0.0 {
                v += noise.sample(&mut rng);
            }
            image.push(v.clamp(0.0, 1.0));
        }
    }
    Ok(Sample {
        image: SoftMap::new(h, w, image).expect("clamped"),
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_spans_radius_three() {
        assert_eq!(midpoint_spans(3), vec![3, 3, 2, 1]);
        assert_eq!(midpoint_spans(0), vec![0]);
    }

    #[test]
    fn rejects_bad_specs() {
        let small = SceneSpec { height: 15, ..Default::default() };
        assert!(matches!(generate(&small), Err(Error::InvalidSpec(_))));
        let none = SceneSpec { shape_count: 0, ..Default::default() };
        assert!(matches!(generate(&none), Err(Error::InvalidSpec(_))));
        let noisy = SceneSpec { noise_sigma: 0.6, ..Default::default() };
        assert!(generate(&noisy).is_err());
    }

    #[test]
    fn occluded_shape_boundary_is_one_pixel_wide() {
        let shapes = [
            Shape::Rect { top: 2, left: 2, height: 10, width: 10 },
            Shape::Rect { top: 6, left: 6, height: 8, width: 8 },
        ];
        let labels = label_map(16, 16, &shapes);
        let edges = boundary_of_labels(&labels, 16, 16);
        // Pixel just left of the upper shape's left side belongs to the
        // lower shape and is not marked.
        assert!(!edges.get(8, 5));
        assert!(edges.get(8, 6));
    }
}
