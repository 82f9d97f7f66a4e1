//! The four sub-block features of a coefficient block.
//!
//! Each feature is evaluated on every 4×4 sub-block and summed over the block:
//!
//! * `S`: number of nonzero coefficients.
//! * `L`: Σ max(0, log₂|c|) over nonzero coefficients.
//! * `Z`: 1-based zig-zag position of the last nonzero coefficient (0 for an
//!   empty sub-block).
//! * `E`: binary entropy H₂(C₁/16), where C₁ counts coefficients with |c| > 1.
//!
//! All four depend on magnitudes only, so they are invariant under sign flips.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::block::{CoeffBlock, SUB, SUB_LEN};
use crate::error::{Error, Result};

/// Classical 4×4 zig-zag scan, as `(row, col)` in scan order.
pub const ZIGZAG_4X4: [(usize, usize); SUB_LEN] = [
    (0, 0),
    (0, 1),
    (1, 0),
    (2, 0),
    (1, 1),
    (0, 2),
    (0, 3),
    (1, 2),
    (2, 1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (2, 3),
    (3, 2),
    (3, 3),
];

/// 1-based scan position of each raster index.
const SCAN_POS: [u8; SUB_LEN] = {
    let mut pos = [0u8; SUB_LEN];
    let mut i = 0;
    while i < SUB_LEN {
        let (r, c) = ZIGZAG_4X4[i];
        pos[r * SUB + c] = (i + 1) as u8;
        i += 1;
    }
    pos
};

/// Binary entropy with H₂(0) = H₂(1) = 0.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// H₂(k/16) for k = 0..=16.
static ENTROPY_LUT: LazyLock<[f64; SUB_LEN + 1]> = LazyLock::new(|| {
    std::array::from_fn(|k| binary_entropy(k as f64 / SUB_LEN as f64))
});

/// Block features `(S, L, Z, E)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub s: f64,
    pub l: f64,
    pub z: f64,
    pub e: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.s, self.l, self.z, self.e]
    }

    pub fn get(&self, f: Feature) -> f64 {
        self.as_array()[f as usize]
    }
}

impl std::ops::Add for FeatureVector {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            s: self.s + rhs.s,
            l: self.l + rhs.l,
            z: self.z + rhs.z,
            e: self.e + rhs.e,
        }
    }
}

/// One of the four block features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    S = 0,
    L = 1,
    Z = 2,
    E = 3,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::S, Feature::L, Feature::Z, Feature::E];

    pub fn symbol(self) -> char {
        ['S', 'L', 'Z', 'E'][self as usize]
    }
}

/// A subset of `{S, L, Z, E}`, written as a string of feature letters (`"SLZE"`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FeatureSet(u8);

impl FeatureSet {
    pub const EMPTY: FeatureSet = FeatureSet(0);
    pub const ALL: FeatureSet = FeatureSet(0b1111);

    pub fn only(f: Feature) -> Self {
        FeatureSet(1 << f as u8)
    }

    pub fn from_bits(bits: u8) -> Self {
        FeatureSet(bits & 0b1111)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, f: Feature) -> bool {
        self.0 & (1 << f as u8) != 0
    }

    pub fn insert(&mut self, f: Feature) {
        self.0 |= 1 << f as u8;
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: FeatureSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Feature> {
        Feature::ALL.into_iter().filter(move |&f| self.contains(f))
    }

    /// The 15 non-empty subsets: singles, pairs, triples, then the full set.
    /// Within a size, subsets are ordered lexicographically by `S, L, Z, E`.
    pub fn nonempty_subsets() -> Vec<FeatureSet> {
        let mut sets: Vec<FeatureSet> = (1u8..16).map(FeatureSet).collect();
        sets.sort_by_key(|s| {
            let idx: Vec<Feature> = s.iter().collect();
            let key: Vec<u8> = idx.iter().map(|&f| f as u8).collect();
            (s.len(), key)
        });
        sets
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for feat in self.iter() {
            write!(f, "{}", feat.symbol())?;
        }
        Ok(())
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeatureSet({self})")
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = FeatureSet::EMPTY;
        for ch in s.chars() {
            let f = match ch.to_ascii_uppercase() {
                'S' => Feature::S,
                'L' => Feature::L,
                'Z' => Feature::Z,
                'E' => Feature::E,
                '+' | ',' | ' ' => continue,
                other => {
                    return Err(Error::Config(format!("unknown feature '{other}' in \"{s}\"")))
                }
            };
            set.insert(f);
        }
        if set.is_empty() {
            return Err(Error::Config(format!("feature set \"{s}\" is empty")));
        }
        Ok(set)
    }
}

impl Serialize for FeatureSet {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureSet {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        if s.is_empty() {
            return Ok(FeatureSet::EMPTY);
        }
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn subblock_features(vals: &[i32; SUB_LEN]) -> FeatureVector {
    let mut nonzero = 0u32;
    let mut gt1 = 0usize;
    let mut last = 0u8;
    let mut log_sum = 0.0;
    for (i, &c) in vals.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let mag = c.unsigned_abs();
        nonzero += 1;
        last = last.max(SCAN_POS[i]);
        if mag > 1 {
            gt1 += 1;
            log_sum += (mag as f64).log2();
        }
    }
    FeatureVector {
        s: nonzero as f64,
        l: log_sum,
        z: last as f64,
        e: ENTROPY_LUT[gt1],
    }
}

/// Computes all four features in one pass over the block.
pub fn extract(block: &CoeffBlock) -> FeatureVector {
    let mut acc = FeatureVector::default();
    block.for_each_subblock(|vals| acc = acc + subblock_features(&vals));
    acc
}

/// Number of nonzero coefficients.
pub fn feature_s(block: &CoeffBlock) -> f64 {
    block.coeffs().iter().filter(|&&c| c != 0).count() as f64
}

/// Sum of log₂ magnitudes; zeros contribute nothing.
pub fn feature_l(block: &CoeffBlock) -> f64 {
    block
        .coeffs()
        .iter()
        .filter(|&&c| c != 0)
        .map(|&c| (c.unsigned_abs() as f64).log2().max(0.0))
        .sum()
}

/// Sum over sub-blocks of the last significant zig-zag position.
pub fn feature_z(block: &CoeffBlock) -> f64 {
    let mut total = 0u64;
    block.for_each_subblock(|vals| {
        let last = vals
            .iter()
            .zip(SCAN_POS.iter())
            .filter(|(&c, _)| c != 0)
            .map(|(_, &p)| p)
            .max()
            .unwrap_or(0);
        total += last as u64;
    });
    total as f64
}

/// Sum over sub-blocks of H₂(C₁/16).
pub fn feature_e(block: &CoeffBlock) -> f64 {
    let mut total = 0.0;
    block.for_each_subblock(|vals| {
        let gt1 = vals.iter().filter(|c| c.unsigned_abs() > 1).count();
        total += ENTROPY_LUT[gt1];
    });
    total
}
