//! Deterministic synthetic corpus generator.
//!
//! Each painting is a black 64x64 canvas with a few colored shapes. The
//! description carries two sentences per shape: an objective sentence with
//! the shape's base vocabulary (color, kind, texture) and a stylistic
//! sentence drawn uniformly from one of two disjoint synonym registers. The
//! register draw simulates descriptions written by different cataloguers
//! whose vocabulary diverged over time: the image never reveals which
//! register was used.
//!
//! On top of the shape vocabulary the generator plants noise tokens with
//! configured painting-level frequencies, independent of image content.
//! These give the per-tag frequency/loss analysis a realistic cloud of
//! distribution-only tags.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::error::{Error, Result};

use super::image::{write_ppm, ImageTensor};

/// One catalog entry: how the shape is drawn and how it is described.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeSpec {
    /// Drawing primitive: `circle`, `square`, `triangle` or `diamond`.
    pub kind: String,
    /// Color name; also the first base token.
    pub color: String,
    pub rgb: [u8; 3],
    /// Texture word completing the objective sentence `color kind texture`.
    pub texture: String,
    /// Synonym register A; disjoint from register B.
    pub register_a: Vec<String>,
    /// Synonym register B.
    pub register_b: Vec<String>,
}

impl ShapeSpec {
    pub fn base_tokens(&self) -> [&str; 3] {
        [&self.color, &self.kind, &self.texture]
    }
}

/// A token planted per painting with probability `frequency`, appended to a
/// random sentence. `stopword` controls whether it joins the generated
/// stopword list (so stopword-removal mining filters it out).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenPlant {
    pub token: String,
    pub frequency: f64,
    pub stopword: bool,
}

/// Full generator configuration; the seed determines every output byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_paintings: usize,
    pub shapes: Vec<ShapeSpec>,
    /// Inclusive range for the number of distinct shapes per image.
    pub shapes_per_image: (usize, usize),
    /// Per-sentence injection probability for each function stopword.
    pub stopword_rate: f64,
    pub seed: u64,
    /// Function words injected into sentences and added to the stopword list.
    pub function_words: Vec<String>,
    /// Image-independent planted tokens.
    pub plants: Vec<TokenPlant>,
    pub resolution: (usize, usize),
}

impl SynthSpec {
    /// The reference corpus configuration used by the validation suite:
    /// four shape entries with two-token registers, a swarm of stop-listed
    /// noise tokens concentrated near the shape frequencies plus a spread
    /// across `[0.2, 0.8]`, and a handful of rare content tokens that only
    /// become frequent itemsets at low minimum support.
    pub fn reference(n_paintings: usize, seed: u64) -> Self {
        let entry = |kind: &str, color: &str, rgb: [u8; 3], texture: &str, a: [&str; 2], b: [&str; 2]| ShapeSpec {
            kind: kind.into(),
            color: color.into(),
            rgb,
            texture: texture.into(),
            register_a: a.iter().map(|s| s.to_string()).collect(),
            register_b: b.iter().map(|s| s.to_string()).collect(),
        };
        let shapes = vec![
            entry("circle", "red", [230, 34, 34], "glossy", ["vermilion", "disc"], ["scarlet", "roundel"]),
            entry("square", "blue", [40, 70, 230], "matte", ["azure", "block"], ["cobalt", "slab"]),
            entry("triangle", "green", [36, 200, 70], "grainy", ["emerald", "wedge"], ["jade", "spike"]),
            entry("diamond", "yellow", [235, 220, 48], "shiny", ["golden", "lozenge"], ["amber", "rhomb"]),
        ];

        let mut plants = Vec::new();
        // Noise swarm around the shape frequency (0.5) so the trend curve is
        // dominated by distribution-only tags in the bins where the
        // learnable tags live.
        let near: [(f64, usize); 5] = [(0.48, 7), (0.49, 7), (0.50, 8), (0.51, 7), (0.52, 7)];
        let mut i = 0usize;
        for (f, count) in near {
            for _ in 0..count {
                plants.push(TokenPlant {
                    token: format!("noise{i:02}"),
                    frequency: f,
                    stopword: true,
                });
                i += 1;
            }
        }
        for f in [0.24, 0.28, 0.32, 0.36, 0.40, 0.44, 0.56, 0.60, 0.64, 0.68, 0.72, 0.76, 0.80] {
            plants.push(TokenPlant {
                token: format!("noise{i:02}"),
                frequency: f,
                stopword: true,
            });
            i += 1;
        }
        // Rare content tokens: below minsup 0.05 but above 0.01.
        for (j, f) in [0.08, 0.10, 0.12, 0.13, 0.14, 0.16].into_iter().enumerate() {
            plants.push(TokenPlant {
                token: format!("rare{j}"),
                frequency: f,
                stopword: false,
            });
        }

        SynthSpec {
            n_paintings,
            shapes,
            shapes_per_image: (2, 2),
            stopword_rate: 0.25,
            seed,
            function_words: vec!["the".into(), "a".into()],
            plants,
            resolution: (64, 64),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paintings == 0 {
            return Err(Error::Config("n_paintings must be positive".into()));
        }
        if self.shapes.is_empty() {
            return Err(Error::Config("shape catalog is empty".into()));
        }
        let (lo, hi) = self.shapes_per_image;
        if lo == 0 || lo > hi || hi > self.shapes.len() {
            return Err(Error::Config(format!(
                "shapes_per_image range ({lo}, {hi}) invalid for a catalog of {}",
                self.shapes.len()
            )));
        }
        for s in &self.shapes {
            if s.register_a.is_empty() || s.register_b.is_empty() {
                return Err(Error::Config(format!("entry {} has an empty register", s.kind)));
            }
            let a: BTreeSet<_> = s.register_a.iter().collect();
            let b: BTreeSet<_> = s.register_b.iter().collect();
            if !a.is_disjoint(&b) {
                return Err(Error::Config(format!(
                    "entry {} registers are not disjoint",
                    s.kind
                )));
            }
        }
        Ok(())
    }
}

/// Which register described a shape occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Register {
    A,
    B,
}

/// Sidecar record of one drawn shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeTruth {
    pub kind: String,
    pub color: String,
    /// Pixel bounds `[x0, y0, x1, y1]`, end-exclusive, of the drawn shape.
    pub bbox: [usize; 4],
    pub register: Register,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SidecarRow {
    id: String,
    shapes: Vec<ShapeTruth>,
}

/// In-memory ground truth returned by the generator, richer than the
/// sidecar: it also records which catalog entries and planted tokens each
/// painting received, so tests can derive expected tag assignments exactly.
#[derive(Debug, Clone)]
pub struct SynthGroundTruth {
    pub spec: SynthSpec,
    pub paintings: Vec<PaintingTruth>,
}

#[derive(Debug, Clone)]
pub struct PaintingTruth {
    pub id: String,
    /// Catalog index, register and bbox per drawn shape, in draw order.
    pub shapes: Vec<(usize, Register, [usize; 4])>,
    /// Planted tokens present in this painting's description.
    pub planted: Vec<String>,
    pub sentence_count: usize,
}

fn draw_shape(img: &mut ImageTensor, kind: &str, rgb: [u8; 3], cx: i64, cy: i64, r: i64) -> [usize; 4] {
    let color = [
        rgb[0] as f32 / 255.0,
        rgb[1] as f32 / 255.0,
        rgb[2] as f32 / 255.0,
    ];
    let (h, w) = (img.height as i64, img.width as i64);
    let mut bounds: Option<[i64; 4]> = None;
    for y in (cy - r).max(0)..=(cy + r).min(h - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(w - 1) {
            let dx = x - cx;
            let dy = y - cy;
            let inside = match kind {
                "circle" => dx * dx + dy * dy <= r * r,
                "square" => dx.abs() <= r * 9 / 10 && dy.abs() <= r * 9 / 10,
                "triangle" => {
                    // upward triangle: width grows linearly from apex
                    let t = y - (cy - r);
                    dy.abs() <= r && dx.abs() * 2 <= t
                }
                "diamond" => dx.abs() + dy.abs() <= r,
                other => panic!("unknown shape kind {other:?}"),
            };
            if inside {
                for (c, v) in color.iter().enumerate() {
                    img.set(y as usize, x as usize, c, *v);
                }
                bounds = Some(match bounds {
                    None => [x, y, x, y],
                    Some([x0, y0, x1, y1]) => [x0.min(x), y0.min(y), x1.max(x), y1.max(y)],
                });
            }
        }
    }
    let [x0, y0, x1, y1] = bounds.expect("shape rasterized no pixels");
    [x0 as usize, y0 as usize, (x1 + 1) as usize, (y1 + 1) as usize]
}

/// Generates the corpus on disk: `manifest.jsonl`, `sidecar.jsonl`,
/// `stopwords.txt` and one PPM per painting under `images/`. Identical
/// specs (including the seed) produce byte-identical outputs.
pub fn generate_synthetic(spec: &SynthSpec, out_dir: &Path) -> Result<SynthGroundTruth> {
    spec.validate()?;
    let images_dir = out_dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;

    let mut manifest = String::new();
    let mut sidecar = String::new();
    let mut paintings = Vec::with_capacity(spec.n_paintings);

    let (res_h, res_w) = spec.resolution;
    let digits = spec.n_paintings.to_string().len().max(4);

    for p in 0..spec.n_paintings {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, p as u64));
        let id = format!("p{p:0digits$}");

        // shape selection: count, then distinct entries by partial shuffle
        let (lo, hi) = spec.shapes_per_image;
        let count = rng.gen_range(lo..=hi);
        let mut order: Vec<usize> = (0..spec.shapes.len()).collect();
        for i in 0..count {
            let j = rng.gen_range(i..order.len());
            order.swap(i, j);
        }
        let chosen = &order[..count];

        let mut img = ImageTensor::zeros(res_h, res_w);
        let mut shapes = Vec::with_capacity(count);
        let mut sentences: Vec<Vec<String>> = Vec::with_capacity(2 * count);
        for &entry_idx in chosen {
            let entry = &spec.shapes[entry_idx];
            let r = rng.gen_range(8..=14i64);
            let cx = rng.gen_range(r..res_w as i64 - r);
            let cy = rng.gen_range(r..res_h as i64 - r);
            let register = if rng.gen_bool(0.5) { Register::A } else { Register::B };
            let bbox = draw_shape(&mut img, &entry.kind, entry.rgb, cx, cy, r);
            shapes.push((entry_idx, register, bbox));

            sentences.push(entry.base_tokens().iter().map(|s| s.to_string()).collect());
            let reg_tokens = match register {
                Register::A => &entry.register_a,
                Register::B => &entry.register_b,
            };
            sentences.push(reg_tokens.clone());
        }

        // function stopwords, independently per sentence and word
        for sentence in sentences.iter_mut() {
            for word in &spec.function_words {
                if rng.gen_bool(spec.stopword_rate) {
                    sentence.push(word.clone());
                }
            }
        }

        // planted tokens: Bernoulli per painting, one random sentence each
        let mut planted = Vec::new();
        for plant in &spec.plants {
            if rng.gen_bool(plant.frequency) {
                let s = rng.gen_range(0..sentences.len());
                sentences[s].push(plant.token.clone());
                planted.push(plant.token.clone());
            }
        }

        let description = sentences
            .iter()
            .map(|toks| toks.join(" "))
            .collect::<Vec<_>>()
            .join(". ")
            + ".";

        let image_rel = format!("images/{id}.ppm");
        write_ppm(&images_dir.join(format!("{id}.ppm")), &img)?;

        manifest.push_str(&serde_json::to_string(&serde_json::json!({
            "id": id,
            "image": image_rel,
            "description": description,
        })).expect("manifest row serializes"));
        manifest.push('\n');

        let row = SidecarRow {
            id: id.clone(),
            shapes: shapes
                .iter()
                .map(|&(entry_idx, register, bbox)| {
                    let e = &spec.shapes[entry_idx];
                    ShapeTruth {
                        kind: e.kind.clone(),
                        color: e.color.clone(),
                        bbox,
                        register,
                    }
                })
                .collect(),
        };
        sidecar.push_str(&serde_json::to_string(&row).expect("sidecar row serializes"));
        sidecar.push('\n');

        paintings.push(PaintingTruth {
            id,
            shapes,
            planted,
            sentence_count: sentences.len(),
        });
    }

    let manifest_path = out_dir.join("manifest.jsonl");
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    let sidecar_path = out_dir.join("sidecar.jsonl");
    std::fs::write(&sidecar_path, sidecar).map_err(|e| Error::io(&sidecar_path, e))?;

    let mut stopwords = String::from("# synthetic stopword list: function words and noise tokens\n");
    for w in &spec.function_words {
        stopwords.push_str(w);
        stopwords.push('\n');
    }
    for plant in spec.plants.iter().filter(|p| p.stopword) {
        stopwords.push_str(&plant.token);
        stopwords.push('\n');
    }
    let stopwords_path = out_dir.join("stopwords.txt");
    std::fs::write(&stopwords_path, stopwords).map_err(|e| Error::io(&stopwords_path, e))?;

    Ok(SynthGroundTruth {
        spec: spec.clone(),
        paintings,
    })
}
