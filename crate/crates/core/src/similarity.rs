//! Visual similarity between the page's cropped logo and image-search
//! thumbnails.
//!
//! The default backend is a 64-bit difference hash. Images are decoded,
//! converted to 8-bit grayscale and area-averaged down to 9×8 cells; bit
//! `row * 8 + col` is set when cell `(col, row)` is darker than cell
//! `(col + 1, row)`. Similarity is `1 - hamming_distance / 64`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clients::{ImageResult, ThumbnailFetcher};

pub const DEFAULT_THRESHOLD: f64 = 0.8;
pub const DEFAULT_FETCH_PARALLELISM: usize = 4;

const HASH_W: usize = 9;
const HASH_H: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimilarityError {
    #[error("image could not be decoded: {0}")]
    UndecodableImage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub similar: bool,
}

impl SimilarityScore {
    pub fn new(value: f64, threshold: f64) -> Self {
        let value = value.clamp(0.0, 1.0);
        Self {
            value,
            similar: value >= threshold,
        }
    }
}

/// Pluggable image-similarity model returning a value in [0, 1].
pub trait SimilarityBackend: Send + Sync {
    fn similarity(&self, a: &[u8], b: &[u8]) -> Result<f64, SimilarityError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DHash;

impl DHash {
    pub fn hash(bytes: &[u8]) -> Result<u64, SimilarityError> {
        let img = image::load_from_memory(bytes)
            .map_err(|e| SimilarityError::UndecodableImage(e.to_string()))?
            .to_luma8();
        let (w, h) = img.dimensions();
        if w == 0 || h == 0 {
            return Err(SimilarityError::UndecodableImage("zero-sized image".into()));
        }
        let cells = area_average(img.as_raw(), w as usize, h as usize);
        let mut hash = 0u64;
        for row in 0..HASH_H {
            for col in 0..HASH_W - 1 {
                if cells[row * HASH_W + col] < cells[row * HASH_W + col + 1] {
                    hash |= 1 << (row * 8 + col);
                }
            }
        }
        Ok(hash)
    }
}

/// Box-filter downsample of a `w`×`h` grayscale buffer to 9×8 cells, with
/// fractional pixel coverage at cell edges.
fn area_average(pixels: &[u8], w: usize, h: usize) -> [f64; HASH_W * HASH_H] {
    let mut out = [0.0; HASH_W * HASH_H];
    let sx = w as f64 / HASH_W as f64;
    let sy = h as f64 / HASH_H as f64;
    for cy in 0..HASH_H {
        let (y0, y1) = (cy as f64 * sy, (cy + 1) as f64 * sy);
        for cx in 0..HASH_W {
            let (x0, x1) = (cx as f64 * sx, (cx + 1) as f64 * sx);
            let mut sum = 0.0;
            let mut area = 0.0;
            for py in y0.floor() as usize..(y1.ceil() as usize).min(h) {
                let wy = (y1.min(py as f64 + 1.0) - y0.max(py as f64)).max(0.0);
                if wy == 0.0 {
                    continue;
                }
                for px in x0.floor() as usize..(x1.ceil() as usize).min(w) {
                    let wx = (x1.min(px as f64 + 1.0) - x0.max(px as f64)).max(0.0);
                    let weight = wx * wy;
                    sum += weight * f64::from(pixels[py * w + px]);
                    area += weight;
                }
            }
            out[cy * HASH_W + cx] = if area > 0.0 { sum / area } else { 0.0 };
        }
    }
    out
}

impl SimilarityBackend for DHash {
    fn similarity(&self, a: &[u8], b: &[u8]) -> Result<f64, SimilarityError> {
        let distance = (Self::hash(a)? ^ Self::hash(b)?).count_ones();
        Ok(1.0 - f64::from(distance) / 64.0)
    }
}

pub struct Scorer {
    backend: Box<dyn SimilarityBackend>,
    threshold: f64,
}

impl Default for Scorer {
    fn default() -> Self {
        Self::new(Box::new(DHash), DEFAULT_THRESHOLD)
    }
}

impl Scorer {
    pub fn new(backend: Box<dyn SimilarityBackend>, threshold: f64) -> Self {
        Self { backend, threshold }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn score(&self, query_logo: &[u8], candidate: &[u8]) -> Result<SimilarityScore, SimilarityError> {
        let v = self.backend.similarity(query_logo, candidate)?;
        Ok(SimilarityScore::new(v, self.threshold))
    }
}

/// An image-search hit paired with its similarity to the page logo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedImage {
    #[serde(flatten)]
    pub result: ImageResult,
    pub similarity: Option<SimilarityScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Downloads each thumbnail and scores it against `query_logo`. Individual
/// download or decode failures leave that entry unscored.
pub fn annotate_image_results(
    query_logo: Option<&[u8]>,
    results: Vec<ImageResult>,
    fetch: &dyn ThumbnailFetcher,
    scorer: &Scorer,
    parallelism: usize,
) -> Vec<AnnotatedImage> {
    let Some(logo) = query_logo.filter(|l| !l.is_empty()) else {
        return results
            .into_iter()
            .map(|result| AnnotatedImage {
                result,
                similarity: None,
                error: None,
            })
            .collect();
    };

    type Slot = Mutex<Option<(Option<SimilarityScore>, Option<String>)>>;
    let slots: Vec<Slot> = results.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = parallelism.clamp(1, results.len().max(1));

    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(r) = results.get(i) else { break };
                let outcome = match fetch.fetch_thumbnail(&r.thumbnail_link) {
                    Ok(bytes) => match scorer.score(logo, &bytes) {
                        Ok(score) => (Some(score), None),
                        Err(e) => (None, Some(e.to_string())),
                    },
                    Err(e) => (None, Some(e.to_string())),
                };
                *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(outcome);
            });
        }
    });

    results
        .into_iter()
        .zip(slots)
        .map(|(result, slot)| {
            let (similarity, error) = slot
                .into_inner()
                .unwrap_or_else(|p| p.into_inner())
                .unwrap_or((None, Some("not fetched".into())));
            AnnotatedImage {
                result,
                similarity,
                error,
            }
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod test_images {
    use image::{GrayImage, ImageFormat, Luma};
    use std::io::Cursor;

    pub fn png_from(w: u32, h: u32, f: impl Fn(u32, u32) -> u8) -> Vec<u8> {
        let img = GrayImage::from_fn(w, h, |x, y| Luma([f(x, y)]));
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, ImageFormat::Png).unwrap();
        buf.into_inner()
    }
}

#[cfg(test)]
mod tests {
    use super::test_images::png_from;
    use super::*;
    use crate::clients::{ClientError, ToolName};
    use proptest::prelude::*;

    /// Independent dHash for images whose sides are exact multiples of 9×8:
    /// integer block means, then left<right comparisons.
    fn oracle_hash(w: u32, h: u32, px: &dyn Fn(u32, u32) -> u8) -> u64 {
        let (bw, bh) = (w / 9, h / 8);
        let block = |bx: u32, by: u32| -> u64 {
            let mut s = 0u64;
            for y in by * bh..(by + 1) * bh {
                for x in bx * bw..(bx + 1) * bw {
                    s += u64::from(px(x, y));
                }
            }
            s
        };
        let mut bits = 0u64;
        for by in 0..8 {
            for bx in 0..8 {
                if block(bx, by) < block(bx + 1, by) {
                    bits |= 1 << (by * 8 + bx);
                }
            }
        }
        bits
    }

    fn pattern(x: u32, y: u32) -> u8 {
        ((x * 7 + y * 3 + (x * y) % 11) % 256) as u8
    }

    #[test]
    fn identical_images_score_one() {
        let img = png_from(36, 32, pattern);
        let s = Scorer::default().score(&img, &img).unwrap();
        assert_eq!(s.value, 1.0);
        assert!(s.similar);
    }

    #[test]
    fn hash_matches_oracle_on_block_aligned_images() {
        for (w, h) in [(9, 8), (36, 32), (18, 24)] {
            let img = png_from(w, h, pattern);
            assert_eq!(DHash::hash(&img).unwrap(), oracle_hash(w, h, &pattern), "{w}x{h}");
        }
    }

    #[test]
    fn rotated_180_matches_frozen_oracle_value() {
        // horizontal ramp with a vertical band
        let f = |x: u32, y: u32| -> u8 { (x * 6 + if y < 16 { 40 } else { 0 }) as u8 };
        let rot = move |x: u32, y: u32| f(35 - x, 31 - y);
        let a = png_from(36, 32, f);
        let b = png_from(36, 32, rot);
        let oracle = 1.0 - f64::from((oracle_hash(36, 32, &f) ^ oracle_hash(36, 32, &rot)).count_ones()) / 64.0;
        // A strictly increasing ramp flips every bit under 180° rotation.
        assert_eq!(oracle, 0.0);
        let s = Scorer::default().score(&a, &b).unwrap();
        assert_eq!(s.value, oracle);
        assert!(!s.similar);

        let g = |x: u32, y: u32| pattern(x, y);
        let grot = move |x: u32, y: u32| pattern(35 - x, 31 - y);
        let oracle = 1.0 - f64::from((oracle_hash(36, 32, &g) ^ oracle_hash(36, 32, &grot)).count_ones()) / 64.0;
        assert_eq!(oracle, 0.375);
        let s = Scorer::default().score(&png_from(36, 32, g), &png_from(36, 32, grot)).unwrap();
        assert_eq!(s.value, oracle);
    }

    #[test]
    fn undecodable_bytes_error() {
        let img = png_from(9, 8, pattern);
        assert!(matches!(
            Scorer::default().score(&img, b"definitely not an image"),
            Err(SimilarityError::UndecodableImage(_))
        ));
    }

    #[test]
    fn threshold_is_inclusive() {
        assert!(SimilarityScore::new(0.8, 0.8).similar);
        assert!(!SimilarityScore::new(0.79, 0.8).similar);
    }

    fn image_result(i: u32) -> ImageResult {
        ImageResult {
            thumbnail_link: format!("https://thumbs.example/{i}"),
            source_link: format!("https://img.example/{i}.png"),
            title: format!("logo {i}"),
            snippet: String::new(),
            context_link: "https://example.com".into(),
            rank: i,
        }
    }

    struct MapFetcher(Vec<(String, Result<Vec<u8>, ClientError>)>);

    impl ThumbnailFetcher for MapFetcher {
        fn fetch_thumbnail(&self, url: &str) -> Result<Vec<u8>, ClientError> {
            self.0
                .iter()
                .find(|(u, _)| u == url)
                .map(|(_, r)| r.clone())
                .unwrap_or(Err(ClientError::CassetteMiss {
                    tool: ToolName::FetchThumbnail,
                    key: url.into(),
                }))
        }
    }

    #[test]
    fn no_logo_means_no_scores() {
        let results: Vec<_> = (1..=5).map(image_result).collect();
        let out = annotate_image_results(None, results, &MapFetcher(vec![]), &Scorer::default(), 4);
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|a| a.similarity.is_none() && a.error.is_none()));
    }

    #[test]
    fn identical_thumbnail_scores_one_and_failures_are_isolated() {
        let logo = png_from(36, 32, pattern);
        let other = png_from(36, 32, |x, y| pattern(y, x));
        let fetcher = MapFetcher(vec![
            ("https://thumbs.example/1".into(), Ok(other)),
            ("https://thumbs.example/2".into(), Ok(logo.clone())),
            (
                "https://thumbs.example/3".into(),
                Err(ClientError::HttpStatus { tool: ToolName::FetchThumbnail, status: 404 }),
            ),
        ]);
        let results: Vec<_> = (1..=3).map(image_result).collect();
        let out = annotate_image_results(Some(&logo), results, &fetcher, &Scorer::default(), 4);
        assert_eq!(out.iter().map(|a| a.result.rank).collect::<Vec<_>>(), [1, 2, 3]);
        assert!(out[0].similarity.is_some());
        assert_eq!(out[1].similarity.unwrap().value, 1.0);
        assert!(out[2].similarity.is_none());
        assert!(out[2].error.as_deref().unwrap().contains("404"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn score_in_range_and_symmetric(
            w1 in 1u32..40, h1 in 1u32..40, s1 in any::<u32>(),
            w2 in 1u32..40, h2 in 1u32..40, s2 in any::<u32>(),
            threshold in 0.0f64..=1.0,
        ) {
            let a = png_from(w1, h1, |x, y| (x.wrapping_mul(31) ^ y.wrapping_mul(17) ^ s1) as u8);
            let b = png_from(w2, h2, |x, y| (x.wrapping_mul(13) ^ y.wrapping_mul(29) ^ s2) as u8);
            let scorer = Scorer::new(Box::new(DHash), threshold);
            let ab = scorer.score(&a, &b).unwrap();
            let ba = scorer.score(&b, &a).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab.value));
            prop_assert_eq!(ab.value, ba.value);
            prop_assert_eq!(ab.similar, ab.value >= threshold);
        }
    }
}
