//! Procedural stand-in for the Omniglot corpus.
//!
//! Each alphabet owns a small vocabulary of curved strokes; a character is
//! two to four of them placed in a unit square; a sample is the character
//! redrawn with jittered control points, a small random similarity
//! transform and a random pen width. Images are written as 105×105 PNGs,
//! black strokes on white, in the `images_background` / `images_evaluation`
//! layout that `prepare` reads.

use std::path::Path;

use image::{GrayImage, Luma};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::seeds::sub_seed;

pub const GLYPH_SIZE: usize = 105;
const STROKES_PER_ALPHABET: usize = 6;
const SEGMENTS_PER_STROKE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlyphSpec {
    pub background_alphabets: usize,
    pub evaluation_alphabets: usize,
    pub chars_per_alphabet: usize,
    pub samples: usize,
    /// Uniform jitter of each control point, in units of the image side.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for GlyphSpec {
    fn default() -> Self {
        Self {
            background_alphabets: 12,
            evaluation_alphabets: 6,
            chars_per_alphabet: 14,
            samples: 20,
            jitter: 0.04,
            seed: 0,
        }
    }
}

type Point = (f64, f64);

/// Quadratic Bézier through three control points.
#[derive(Debug, Clone, Copy)]
struct Stroke([Point; 3]);

impl Stroke {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut p = || (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
        Stroke([p(), p(), p()])
    }

    fn polyline(&self) -> Vec<Point> {
        let [a, b, c] = self.0;
        (0..=SEGMENTS_PER_STROKE)
            .map(|i| {
                let t = i as f64 / SEGMENTS_PER_STROKE as f64;
                let u = 1.0 - t;
                (
                    u * u * a.0 + 2.0 * u * t * b.0 + t * t * c.0,
                    u * u * a.1 + 2.0 * u * t * b.1 + t * t * c.1,
                )
            })
            .collect()
    }
}

/// A character: strokes in unit coordinates centred on (0.5, 0.5).
#[derive(Debug, Clone)]
struct Character(Vec<Stroke>);

fn make_character(vocab: &[Stroke], rng: &mut ChaCha8Rng) -> Character {
    let n = rng.gen_range(2..=4);
    let strokes = (0..n)
        .map(|_| {
            let Stroke(pts) = vocab[rng.gen_range(0..vocab.len())];
            let (dx, dy) = (rng.gen_range(-0.18..0.18), rng.gen_range(-0.18..0.18));
            let flip = rng.gen_bool(0.5);
            Stroke(pts.map(|(x, y)| {
                let (x, y) = if flip { (y, x) } else { (x, y) };
                (0.5 + x + dx, 0.5 + y + dy)
            }))
        })
        .collect();
    Character(strokes)
}

fn sample_instance(ch: &Character, jitter: f64, rng: &mut ChaCha8Rng) -> (Vec<Vec<Point>>, f64) {
    let scale = rng.gen_range(0.9..1.1);
    let angle: f64 = rng.gen_range(-0.12..0.12);
    let (sin, cos) = angle.sin_cos();
    let (tx, ty) = (rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
    let width = rng.gen_range(2.5..4.0);
    let lines = ch
        .0
        .iter()
        .map(|s| {
            let pts = s.0.map(|(x, y)| {
                let (x, y) = (x + rng.gen_range(-jitter..jitter), y + rng.gen_range(-jitter..jitter));
                let (cx, cy) = (x - 0.5, y - 0.5);
                (
                    0.5 + tx + scale * (cos * cx - sin * cy),
                    0.5 + ty + scale * (sin * cx + cos * cy),
                )
            });
            Stroke(pts).polyline()
        })
        .collect();
    (lines, width)
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (p.0 - a.0 - t * dx, p.1 - a.1 - t * dy);
    (ex * ex + ey * ey).sqrt()
}

/// Anti-aliased pen of `width` pixels; returns ink in [0, 1] per pixel.
fn rasterize(lines: &[Vec<Point>], width: f64, size: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; size * size];
    let reach = width / 2.0 + 1.0;
    let side = size as f64;
    for line in lines {
        for seg in line.windows(2) {
            let a = (seg[0].0 * side, seg[0].1 * side);
            let b = (seg[1].0 * side, seg[1].1 * side);
            let lo = |u: f64, v: f64| ((u.min(v) - reach).floor().max(0.0)) as usize;
            let hi = |u: f64, v: f64| ((u.max(v) + reach).ceil().max(0.0) as usize).min(size);
            for y in lo(a.1, b.1)..hi(a.1, b.1) {
                for x in lo(a.0, b.0)..hi(a.0, b.0) {
                    let d = segment_distance((x as f64 + 0.5, y as f64 + 0.5), a, b);
                    let cell = &mut dist[y * size + x];
                    if d < *cell {
                        *cell = d;
                    }
                }
            }
        }
    }
    dist.into_iter()
        .map(|d| (width / 2.0 + 0.5 - d).clamp(0.0, 1.0))
        .collect()
}

fn write_png(ink: &[f64], size: usize, path: &Path) -> Result<()> {
    let img = GrayImage::from_fn(size as u32, size as u32, |x, y| {
        let v = ink[y as usize * size + x as usize];
        Luma([(255.0 * (1.0 - v)).round() as u8])
    });
    img.save(path)
        .map_err(|e| BenchError::Io(std::io::Error::other(format!("{}: {e}", path.display()))))
}

/// Write the surrogate corpus below `root`. Returns the number of images.
pub fn write_surrogate_corpus(root: &Path, spec: &GlyphSpec) -> Result<usize> {
    if spec.chars_per_alphabet == 0 || spec.samples == 0 {
        return Err(BenchError::Config("glyph corpus needs characters and samples".into()));
    }
    let mut count = 0;
    for (split, n_alphabets) in [
        ("images_background", spec.background_alphabets),
        ("images_evaluation", spec.evaluation_alphabets),
    ] {
        for a in 0..n_alphabets {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, &format!("{split}/{a}")));
            let vocab: Vec<Stroke> = (0..STROKES_PER_ALPHABET).map(|_| Stroke::random(&mut rng)).collect();
            let alphabet_dir = root.join(split).join(format!("alphabet{a:02}"));
            for c in 0..spec.chars_per_alphabet {
                let ch = make_character(&vocab, &mut rng);
                let dir = alphabet_dir.join(format!("character{c:02}"));
                std::fs::create_dir_all(&dir)?;
                for s in 0..spec.samples {
                    let (lines, width) = sample_instance(&ch, spec.jitter, &mut rng);
                    let ink = rasterize(&lines, width, GLYPH_SIZE);
                    write_png(&ink, GLYPH_SIZE, &dir.join(format!("{s:02}.png")))?;
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use higsfa::dataio::load_omniglot_resized;

    #[test]
    fn distance_to_segment() {
        assert!((segment_distance((0.0, 1.0), (-1.0, 0.0), (1.0, 0.0)) - 1.0).abs() < 1e-12);
        assert!((segment_distance((3.0, 4.0), (0.0, 0.0), (0.0, 0.0)) - 5.0).abs() < 1e-12);
        assert!((segment_distance((2.0, 0.0), (-1.0, 0.0), (1.0, 0.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corpus_layout_and_loading() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GlyphSpec {
            background_alphabets: 2,
            evaluation_alphabets: 1,
            chars_per_alphabet: 3,
            samples: 4,
            ..GlyphSpec::default()
        };
        assert_eq!(write_surrogate_corpus(dir.path(), &spec).unwrap(), 36);
        let corpus = load_omniglot_resized(&dir.path().join("images_background"), 3).unwrap();
        assert_eq!(corpus.alphabets.len(), 2);
        assert_eq!(corpus.n_characters(), 6);
        let img = &corpus.alphabets[0].characters[0].samples[0];
        assert_eq!((img.height(), img.width()), (35, 35));
        // strokes are inked (near 1 after inversion) but the glyph is sparse
        let ink: f64 = img.pixels().iter().sum::<f64>() / 35.0 / 35.0;
        assert!(ink > 0.02 && ink < 0.5, "ink fraction {ink}");
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = GlyphSpec {
            background_alphabets: 1,
            evaluation_alphabets: 0,
            chars_per_alphabet: 1,
            samples: 2,
            ..GlyphSpec::default()
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_surrogate_corpus(a.path(), &spec).unwrap();
        write_surrogate_corpus(b.path(), &spec).unwrap();
        let rel = "images_background/alphabet00/character00/01.png";
        assert_eq!(
            std::fs::read(a.path().join(rel)).unwrap(),
            std::fs::read(b.path().join(rel)).unwrap()
        );
    }
}
