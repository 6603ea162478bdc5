//! Boolean features over pixel observations.
//!
//! Two extractors are provided: the raw-pixel set (one feature per pixel and
//! colour) and the tile-based Basic / B-PROS / B-PROT / B-PROST cascade.
//! Every feature is identified by a [`FeatureId`] that packs its family and
//! coordinates into a `u64` without collisions across families.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::Observation;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("observation {width}x{height} is not divisible into {cols}x{rows} tiles")]
    ConfigMismatch {
        width: usize,
        height: usize,
        cols: usize,
        rows: usize,
    },
}

const FAMILY_SHIFT: u32 = 60;
const COORD_BITS: u32 = 20;
const COORD_MASK: u64 = (1 << COORD_BITS) - 1;
const COLOUR_BITS: u32 = 14;
const COLOUR_MASK: u64 = (1 << COLOUR_BITS) - 1;
const OFFSET_BITS: u32 = 16;
const OFFSET_MASK: u64 = (1 << OFFSET_BITS) - 1;
const OFFSET_BIAS: i64 = 1 << (OFFSET_BITS - 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureId(pub u64);

/// Decoded form of a [`FeatureId`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKey {
    /// Pixel `(i, j)` has colour `c`.
    Pixel { i: usize, j: usize, c: usize },
    /// Tile `(w, h)` contains colour `c`.
    Basic { w: usize, h: usize, c: usize },
    /// Some tile with `c1` has a tile with `c2` at offset `(i, j)`.
    Bpros { c1: usize, c2: usize, i: i64, j: i64 },
    /// As B-PROS, with `c2` taken from the previous frame.
    Bprot { c1: usize, c2: usize, i: i64, j: i64 },
}

impl FeatureKey {
    pub fn encode(self) -> FeatureId {
        let pack3 = |fam: u64, a: usize, b: usize, c: usize| {
            debug_assert!((a as u64) <= COORD_MASK && (b as u64) <= COORD_MASK);
            debug_assert!((c as u64) <= COORD_MASK);
            FeatureId(
                (fam << FAMILY_SHIFT)
                    | ((a as u64) << (2 * COORD_BITS))
                    | ((b as u64) << COORD_BITS)
                    | c as u64,
            )
        };
        let pack_offset = |fam: u64, c1: usize, c2: usize, i: i64, j: i64| {
            debug_assert!((c1 as u64) <= COLOUR_MASK && (c2 as u64) <= COLOUR_MASK);
            debug_assert!(i.abs() < OFFSET_BIAS && j.abs() < OFFSET_BIAS);
            FeatureId(
                (fam << FAMILY_SHIFT)
                    | ((c1 as u64) << (COLOUR_BITS + 2 * OFFSET_BITS))
                    | ((c2 as u64) << (2 * OFFSET_BITS))
                    | (((i + OFFSET_BIAS) as u64) << OFFSET_BITS)
                    | ((j + OFFSET_BIAS) as u64),
            )
        };
        match self {
            FeatureKey::Pixel { i, j, c } => pack3(0, i, j, c),
            FeatureKey::Basic { w, h, c } => pack3(1, w, h, c),
            FeatureKey::Bpros { c1, c2, i, j } => pack_offset(2, c1, c2, i, j),
            FeatureKey::Bprot { c1, c2, i, j } => pack_offset(3, c1, c2, i, j),
        }
    }

    pub fn decode(id: FeatureId) -> FeatureKey {
        let v = id.0;
        let fam = v >> FAMILY_SHIFT;
        match fam {
            0 | 1 => {
                let a = ((v >> (2 * COORD_BITS)) & COORD_MASK) as usize;
                let b = ((v >> COORD_BITS) & COORD_MASK) as usize;
                let c = (v & COORD_MASK) as usize;
                if fam == 0 {
                    FeatureKey::Pixel { i: a, j: b, c }
                } else {
                    FeatureKey::Basic { w: a, h: b, c }
                }
            }
            _ => {
                let c1 = ((v >> (COLOUR_BITS + 2 * OFFSET_BITS)) & COLOUR_MASK) as usize;
                let c2 = ((v >> (2 * OFFSET_BITS)) & COLOUR_MASK) as usize;
                let i = ((v >> OFFSET_BITS) & OFFSET_MASK) as i64 - OFFSET_BIAS;
                let j = (v & OFFSET_MASK) as i64 - OFFSET_BIAS;
                if fam == 2 {
                    FeatureKey::Bpros { c1, c2, i, j }
                } else {
                    FeatureKey::Bprot { c1, c2, i, j }
                }
            }
        }
    }
}

impl FeatureId {
    pub fn key(self) -> FeatureKey {
        FeatureKey::decode(self)
    }
}

/// Sorted, duplicate-free set of the features that hold for one observation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FeatureSet(Vec<FeatureId>);

impl FeatureSet {
    pub fn from_unsorted(mut ids: Vec<FeatureId>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }

    pub fn ids(&self) -> &[FeatureId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: FeatureId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.0.iter().copied()
    }

    /// Union of sets whose members are known to be disjoint.
    pub fn union(sets: &[&FeatureSet]) -> Self {
        Self::from_unsorted(sets.iter().flat_map(|s| s.0.iter().copied()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    #[default]
    RawPixel,
    Bprost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractorConfig {
    pub mode: FeatureMode,
    pub tile_cols: usize,
    pub tile_rows: usize,
    /// Largest `|i|`/`|j|` tile offset considered by B-PROS/B-PROT.
    /// `None` spans the whole tile grid.
    pub max_offset: Option<usize>,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            mode: FeatureMode::RawPixel,
            tile_cols: 5,
            tile_rows: 5,
            max_offset: None,
        }
    }
}

/// One feature per pixel: `(i, j, colour(i, j))`.
pub fn pixel_features(obs: &Observation) -> FeatureSet {
    let w = obs.width();
    let ids = obs
        .pixels()
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            FeatureKey::Pixel {
                i: k % w,
                j: k / w,
                c: c as usize,
            }
            .encode()
        })
        .collect();
    FeatureSet::from_unsorted(ids)
}

fn tile_dims(obs: &Observation, cfg: &ExtractorConfig) -> Result<(usize, usize), FeatureError> {
    let (w, h) = (obs.width(), obs.height());
    if cfg.tile_cols == 0
        || cfg.tile_rows == 0
        || w % cfg.tile_cols != 0
        || h % cfg.tile_rows != 0
    {
        return Err(FeatureError::ConfigMismatch {
            width: w,
            height: h,
            cols: cfg.tile_cols,
            rows: cfg.tile_rows,
        });
    }
    Ok((w / cfg.tile_cols, h / cfg.tile_rows))
}

/// `f(w, h, c)` holds iff tile `(w, h)` contains at least one pixel of colour `c`.
pub fn basic_tile_features(
    obs: &Observation,
    cfg: &ExtractorConfig,
) -> Result<FeatureSet, FeatureError> {
    let (tw, th) = tile_dims(obs, cfg)?;
    let mut present = BTreeSet::new();
    for j in 0..obs.height() {
        for i in 0..obs.width() {
            present.insert((i / tw, j / th, obs.get(i, j) as usize));
        }
    }
    Ok(FeatureSet::from_unsorted(
        present
            .into_iter()
            .map(|(w, h, c)| FeatureKey::Basic { w, h, c }.encode())
            .collect(),
    ))
}

fn basic_triples(basic: &FeatureSet) -> Vec<(i64, i64, usize)> {
    basic
        .iter()
        .filter_map(|id| match id.key() {
            FeatureKey::Basic { w, h, c } => Some((w as i64, h as i64, c)),
            _ => None,
        })
        .collect()
}

fn offset_pairs(
    first: &FeatureSet,
    second: &FeatureSet,
    cfg: &ExtractorConfig,
    temporal: bool,
) -> FeatureSet {
    let a = basic_triples(first);
    let b = basic_triples(second);
    let limit = cfg.max_offset.map(|m| m as i64).unwrap_or(i64::MAX);
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &(w1, h1, c1) in &a {
        for &(w2, h2, c2) in &b {
            let (i, j) = (w2 - w1, h2 - h1);
            if i.abs() > limit || j.abs() > limit {
                continue;
            }
            let key = if temporal {
                FeatureKey::Bprot { c1, c2, i, j }
            } else {
                FeatureKey::Bpros { c1, c2, i, j }
            };
            out.push(key.encode());
        }
    }
    FeatureSet::from_unsorted(out)
}

/// `f(c1, c2, i, j)` holds iff some tile `(w, h)` has `c1` and tile
/// `(w + i, h + j)` has `c2`.
pub fn bpros_features(basic: &FeatureSet, cfg: &ExtractorConfig) -> FeatureSet {
    offset_pairs(basic, basic, cfg, false)
}

/// `f^t(c1, c2, i, j)` holds iff tile `(w, h)` has `c1` now and tile
/// `(w + i, h + j)` had `c2` in the previous frame.
pub fn bprot_features(
    basic_now: &FeatureSet,
    basic_prev: &FeatureSet,
    cfg: &ExtractorConfig,
) -> FeatureSet {
    offset_pairs(basic_now, basic_prev, cfg, true)
}

/// Union of Basic, B-PROS and B-PROT. Without a previous frame, B-PROT is
/// computed against an all-background frame.
pub fn bprost_features(
    obs_now: &Observation,
    obs_prev: Option<&Observation>,
    cfg: &ExtractorConfig,
) -> Result<FeatureSet, FeatureError> {
    let basic = basic_tile_features(obs_now, cfg)?;
    let blank;
    let prev = match obs_prev {
        Some(p) => p,
        None => {
            blank = Observation::blank(obs_now.width(), obs_now.height(), obs_now.palette_size());
            &blank
        }
    };
    let basic_prev = basic_tile_features(prev, cfg)?;
    let bpros = bpros_features(&basic, cfg);
    let bprot = bprot_features(&basic, &basic_prev, cfg);
    Ok(FeatureSet::union(&[&basic, &bpros, &bprot]))
}

/// Feature extractor selected by an [`ExtractorConfig`].
#[derive(Debug, Clone, Default)]
pub struct FeatureExtractor {
    cfg: ExtractorConfig,
}

impl FeatureExtractor {
    pub fn new(cfg: ExtractorConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.cfg
    }

    pub fn extract(
        &self,
        obs: &Observation,
        prev: Option<&Observation>,
    ) -> Result<FeatureSet, FeatureError> {
        match self.cfg.mode {
            FeatureMode::RawPixel => Ok(pixel_features(obs)),
            FeatureMode::Bprost => bprost_features(obs, prev, &self.cfg),
        }
    }

    /// Number of distinct features the extractor can emit for observations of
    /// the given shape.
    pub fn universe_size(&self, width: usize, height: usize, palette: usize) -> usize {
        match self.cfg.mode {
            FeatureMode::RawPixel => width * height * palette,
            FeatureMode::Bprost => {
                let tiles = self.cfg.tile_cols * self.cfg.tile_rows;
                let span = |n: usize| match self.cfg.max_offset {
                    Some(m) => (2 * m + 1).min(2 * n - 1),
                    None => 2 * n - 1,
                };
                let offsets = span(self.cfg.tile_cols) * span(self.cfg.tile_rows);
                tiles * palette + 2 * palette * palette * offsets
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(w: usize, h: usize, c: usize, px: &[u8]) -> Observation {
        Observation::new(w, h, c, px.to_vec())
    }

    fn pix(i: usize, j: usize, c: usize) -> FeatureId {
        FeatureKey::Pixel { i, j, c }.encode()
    }

    #[test]
    fn uniform_two_by_two() {
        let fs = pixel_features(&obs(2, 2, 1, &[0; 4]));
        let want = FeatureSet::from_unsorted(vec![pix(0, 0, 0), pix(1, 0, 0), pix(0, 1, 0), pix(1, 1, 0)]);
        assert_eq!(fs, want);
    }

    #[test]
    fn full_size_frame_has_one_feature_per_pixel() {
        let o = Observation::new(84, 84, 256, (0..84 * 84).map(|k| (k % 256) as u8).collect());
        assert_eq!(pixel_features(&o).len(), 7056);
    }

    #[test]
    fn one_pixel_change_gives_symmetric_difference_two() {
        let a = obs(3, 3, 4, &[0, 1, 2, 3, 0, 1, 2, 3, 0]);
        let b = obs(3, 3, 4, &[0, 1, 2, 3, 3, 1, 2, 3, 0]);
        let fa: BTreeSet<_> = pixel_features(&a).iter().collect();
        let fb: BTreeSet<_> = pixel_features(&b).iter().collect();
        assert_eq!(fa.symmetric_difference(&fb).count(), 2);
    }

    #[test]
    fn basic_single_tile_colours() {
        let cfg = ExtractorConfig {
            mode: FeatureMode::Bprost,
            tile_cols: 1,
            tile_rows: 1,
            max_offset: None,
        };
        let fs = basic_tile_features(&obs(2, 2, 8, &[3, 7, 7, 3]), &cfg).unwrap();
        let want = FeatureSet::from_unsorted(vec![
            FeatureKey::Basic { w: 0, h: 0, c: 3 }.encode(),
            FeatureKey::Basic { w: 0, h: 0, c: 7 }.encode(),
        ]);
        assert_eq!(fs, want);
    }

    #[test]
    fn basic_uniform_gives_one_feature_per_tile() {
        let cfg = ExtractorConfig {
            tile_cols: 2,
            tile_rows: 3,
            ..Default::default()
        };
        let fs = basic_tile_features(&Observation::blank(4, 6, 2), &cfg).unwrap();
        assert_eq!(fs.len(), 6);
    }

    #[test]
    fn atari_frame_tiling() {
        let cfg = ExtractorConfig {
            mode: FeatureMode::Bprost,
            tile_cols: 16,
            tile_rows: 14,
            max_offset: None,
        };
        let o = Observation::blank(160, 210, 128);
        assert_eq!(tile_dims(&o, &cfg).unwrap(), (10, 15));
        let fs = basic_tile_features(&o, &cfg).unwrap();
        assert_eq!(fs.len(), 16 * 14);
        let max_w = fs
            .iter()
            .filter_map(|f| match f.key() {
                FeatureKey::Basic { w, .. } => Some(w),
                _ => None,
            })
            .max();
        assert_eq!(max_w, Some(15));
    }

    #[test]
    fn indivisible_tiling_is_rejected() {
        let cfg = ExtractorConfig {
            tile_cols: 3,
            tile_rows: 1,
            ..Default::default()
        };
        assert!(matches!(
            basic_tile_features(&Observation::blank(10, 10, 2), &cfg),
            Err(FeatureError::ConfigMismatch { .. })
        ));
    }

    #[test]
    fn bpros_singleton_and_empty() {
        let cfg = ExtractorConfig::default();
        let basic = FeatureSet::from_unsorted(vec![FeatureKey::Basic { w: 0, h: 0, c: 5 }.encode()]);
        let out = bpros_features(&basic, &cfg);
        assert_eq!(
            out.ids(),
            &[FeatureKey::Bpros { c1: 5, c2: 5, i: 0, j: 0 }.encode()]
        );
        assert!(bpros_features(&FeatureSet::default(), &cfg).is_empty());
    }

    #[test]
    fn bpros_pair_in_row() {
        let cfg = ExtractorConfig::default();
        let basic = FeatureSet::from_unsorted(vec![
            FeatureKey::Basic { w: 0, h: 0, c: 1 }.encode(),
            FeatureKey::Basic { w: 1, h: 0, c: 2 }.encode(),
        ]);
        let out = bpros_features(&basic, &cfg);
        assert!(out.contains(FeatureKey::Bpros { c1: 1, c2: 2, i: 1, j: 0 }.encode()));
        assert!(out.contains(FeatureKey::Bpros { c1: 2, c2: 1, i: -1, j: 0 }.encode()));
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn bprot_static_and_moving() {
        let cfg = ExtractorConfig::default();
        let one = FeatureSet::from_unsorted(vec![FeatureKey::Basic { w: 0, h: 0, c: 4 }.encode()]);
        assert_eq!(
            bprot_features(&one, &one, &cfg).ids(),
            &[FeatureKey::Bprot { c1: 4, c2: 4, i: 0, j: 0 }.encode()]
        );
        assert!(bprot_features(&one, &FeatureSet::default(), &cfg).is_empty());

        let prev = FeatureSet::from_unsorted(vec![FeatureKey::Basic { w: 2, h: 1, c: 9 }.encode()]);
        let now = FeatureSet::from_unsorted(vec![FeatureKey::Basic { w: 3, h: 1, c: 9 }.encode()]);
        assert!(bprot_features(&now, &prev, &cfg)
            .contains(FeatureKey::Bprot { c1: 9, c2: 9, i: -1, j: 0 }.encode()));
    }

    #[test]
    fn bprost_is_disjoint_union() {
        let cfg = ExtractorConfig {
            mode: FeatureMode::Bprost,
            tile_cols: 2,
            tile_rows: 2,
            max_offset: None,
        };
        let now = obs(4, 4, 3, &[0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 0, 0, 2, 2, 0, 0]);
        let prev = obs(4, 4, 3, &[1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        let basic = basic_tile_features(&now, &cfg).unwrap();
        let basic_prev = basic_tile_features(&prev, &cfg).unwrap();
        let total = basic.len()
            + bpros_features(&basic, &cfg).len()
            + bprot_features(&basic, &basic_prev, &cfg).len();
        assert_eq!(bprost_features(&now, Some(&prev), &cfg).unwrap().len(), total);
    }

    #[test]
    fn bprost_static_single_tile_has_three_features() {
        let cfg = ExtractorConfig {
            mode: FeatureMode::Bprost,
            tile_cols: 1,
            tile_rows: 1,
            max_offset: None,
        };
        let o = obs(2, 2, 4, &[3; 4]);
        assert_eq!(bprost_features(&o, Some(&o), &cfg).unwrap().len(), 3);
    }

    #[test]
    fn bprost_first_frame_uses_background() {
        let cfg = ExtractorConfig {
            mode: FeatureMode::Bprost,
            tile_cols: 1,
            tile_rows: 1,
            max_offset: None,
        };
        let o = obs(2, 2, 4, &[3; 4]);
        let bg = Observation::blank(2, 2, 4);
        assert_eq!(
            bprost_features(&o, None, &cfg).unwrap(),
            bprost_features(&o, Some(&bg), &cfg).unwrap()
        );
        assert!(bprost_features(&o, None, &cfg)
            .unwrap()
            .contains(FeatureKey::Bprot { c1: 3, c2: 0, i: 0, j: 0 }.encode()));
    }

    #[test]
    fn max_offset_shrinks_pairs() {
        let cfg = ExtractorConfig {
            max_offset: Some(0),
            ..Default::default()
        };
        let basic = FeatureSet::from_unsorted(vec![
            FeatureKey::Basic { w: 0, h: 0, c: 1 }.encode(),
            FeatureKey::Basic { w: 1, h: 0, c: 2 }.encode(),
        ]);
        assert_eq!(bpros_features(&basic, &cfg).len(), 2);
    }

    // Naive oracle: loop over every tile pair and every colour pair.
    fn bpros_oracle(obs: &Observation, cols: usize, rows: usize) -> BTreeSet<(usize, usize, i64, i64)> {
        let (tw, th) = (obs.width() / cols, obs.height() / rows);
        let has = |w: usize, h: usize, c: usize| {
            (0..th).any(|y| (0..tw).any(|x| obs.get(w * tw + x, h * th + y) as usize == c))
        };
        let mut out = BTreeSet::new();
        for c1 in 0..obs.palette_size() {
            for c2 in 0..obs.palette_size() {
                for w in 0..cols {
                    for h in 0..rows {
                        for w2 in 0..cols {
                            for h2 in 0..rows {
                                if has(w, h, c1) && has(w2, h2, c2) {
                                    out.insert((c1, c2, w2 as i64 - w as i64, h2 as i64 - h as i64));
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn encoding_round_trips(fam in 0u8..4, a in 0usize..1 << 14, b in 0usize..1 << 14,
                                c in 0usize..1 << 14, i in -30000i64..30000, j in -30000i64..30000) {
            let key = match fam {
                0 => FeatureKey::Pixel { i: a, j: b, c },
                1 => FeatureKey::Basic { w: a, h: b, c },
                2 => FeatureKey::Bpros { c1: a, c2: c, i, j },
                _ => FeatureKey::Bprot { c1: b, c2: c, i, j },
            };
            prop_assert_eq!(FeatureKey::decode(key.encode()), key);
        }

        #[test]
        fn pixel_features_one_per_pixel(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let px: Vec<u8> = (0..w * h).map(|k| ((seed >> (k % 60)) & 3) as u8).collect();
            let o = Observation::new(w, h, 4, px);
            prop_assert_eq!(pixel_features(&o).len(), w * h);
            prop_assert_eq!(pixel_features(&o), pixel_features(&o));
        }

        #[test]
        fn bpros_matches_naive_loop(px in proptest::collection::vec(0u8..3, 16)) {
            let o = Observation::new(4, 4, 3, px);
            let cfg = ExtractorConfig { mode: FeatureMode::Bprost, tile_cols: 2, tile_rows: 2, max_offset: None };
            let got: BTreeSet<_> = bpros_features(&basic_tile_features(&o, &cfg).unwrap(), &cfg)
                .iter()
                .map(|f| match f.key() {
                    FeatureKey::Bpros { c1, c2, i, j } => (c1, c2, i, j),
                    other => panic!("unexpected {other:?}"),
                })
                .collect();
            prop_assert_eq!(got, bpros_oracle(&o, 2, 2));
        }
    }
}
