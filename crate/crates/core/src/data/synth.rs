//! Seeded synthetic blocks labelled with a simple, fully specified bit count.
//!
//! The oracle is not VVC's CABAC rate. It mimics the structure of residual
//! coding closely enough to exercise the models: per 4×4 sub-block, one
//! coded-sub-block flag; if the sub-block is non-empty, one significance bin
//! per zig-zag position up to the last nonzero coefficient; and per nonzero
//! coefficient a sign bit, a greater-than-1 flag, and an order-0 Exp-Golomb
//! remainder `EG0(|c| − 2)` when `|c| > 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::block::{CoeffBlock, DatasetRecord, SUB_LEN};
use crate::data::DatasetFile;
use crate::error::{Error, Result};
use crate::features::ZIGZAG_4X4;

const MAX_MAGNITUDE: u64 = 1 << 15;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_blocks: usize,
    pub seed: u64,
    /// Allowed `(width, height)` pairs, drawn uniformly.
    pub size_set: Vec<(usize, usize)>,
    /// Probability that a coefficient is zero.
    pub sparsity: f64,
    /// Mean of `|c| − 1` for nonzero coefficients (geometric law).
    pub magnitude_scale: f64,
    pub qp_label: i32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_blocks: 1000,
            seed: 0,
            size_set: vec![
                (4, 4),
                (8, 8),
                (16, 16),
                (32, 32),
                (8, 4),
                (4, 8),
                (16, 8),
                (8, 16),
            ],
            sparsity: 0.7,
            magnitude_scale: 1.5,
            qp_label: 22,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::Config(format!("sparsity {} not in [0, 1]", self.sparsity)));
        }
        if !(self.magnitude_scale.is_finite() && self.magnitude_scale >= 0.0) {
            return Err(Error::Config(format!(
                "magnitude scale {} must be a non-negative number",
                self.magnitude_scale
            )));
        }
        if self.size_set.is_empty() {
            return Err(Error::Config("size set is empty".into()));
        }
        if let Some(&(w, h)) = self
            .size_set
            .iter()
            .find(|&&(w, h)| w == 0 || h == 0 || w % 4 != 0 || h % 4 != 0)
        {
            return Err(Error::Config(format!("block size {w}x{h} is not a multiple of 4")));
        }
        Ok(())
    }
}

/// Parses `"4x4,8x8,16x8"`.
pub fn parse_sizes(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let (w, h) = tok
                .split_once(['x', 'X'])
                .ok_or_else(|| Error::Config(format!("bad block size \"{tok}\"")))?;
            let parse = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad block size \"{tok}\"")))
            };
            Ok((parse(w)?, parse(h)?))
        })
        .collect()
}

/// Length of the order-0 Exp-Golomb code of `v`.
pub fn eg0_bits(v: u32) -> u32 {
    2 * (u64::from(v) + 1).ilog2() + 1
}

fn subblock_bits(vals: &[i32; SUB_LEN]) -> u64 {
    let mut bits = 1;
    let last = ZIGZAG_4X4
        .iter()
        .rposition(|&(r, c)| vals[r * 4 + c] != 0);
    let Some(last) = last else {
        return bits;
    };
    bits += last as u64 + 1;
    for &c in vals {
        if c == 0 {
            continue;
        }
        let mag = c.unsigned_abs();
        bits += 2;
        if mag > 1 {
            bits += u64::from(eg0_bits(mag - 2));
        }
    }
    bits
}

/// Deterministic bit count used to label synthetic blocks.
pub fn oracle_rate(block: &CoeffBlock) -> u64 {
    let mut total = 0;
    block.for_each_subblock(|vals| total += subblock_bits(&vals));
    total
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn record_seed(seed: u64, index: usize) -> u64 {
    splitmix64(splitmix64(seed) ^ index as u64)
}

fn random_block(cfg: &SynthConfig, index: usize) -> Result<CoeffBlock> {
    let mut rng = ChaCha8Rng::seed_from_u64(record_seed(cfg.seed, index));
    let (w, h) = cfg.size_set[rng.random_range(0..cfg.size_set.len())];
    let geo = Geometric::new(1.0 / (1.0 + cfg.magnitude_scale))
        .map_err(|e| Error::Config(e.to_string()))?;
    let coeffs = (0..w * h)
        .map(|_| {
            if rng.random_bool(cfg.sparsity) {
                return 0;
            }
            let mag = (1 + geo.sample(&mut rng)).min(MAX_MAGNITUDE) as i32;
            if rng.random_bool(0.5) {
                -mag
            } else {
                mag
            }
        })
        .collect();
    CoeffBlock::new(w, h, coeffs, cfg.qp_label, format!("synth{}/{index}", cfg.seed))
}

/// Generates `n_blocks` records labelled with [`oracle_rate`].
pub fn generate(cfg: &SynthConfig) -> Result<DatasetFile> {
    generate_with(cfg, |b| oracle_rate(b) as f64)
}

/// Like [`generate`] but with a caller-supplied rate label.
///
/// Each record draws from its own RNG stream derived from `(seed, index)`,
/// so the output does not depend on generation order.
pub fn generate_with(cfg: &SynthConfig, rate: impl Fn(&CoeffBlock) -> f64) -> Result<DatasetFile> {
    cfg.validate()?;
    let records = (0..cfg.n_blocks)
        .map(|i| {
            let block = random_block(cfg, i)?;
            let r = rate(&block);
            DatasetRecord::new(block, r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetFile::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eg0_lengths() {
        assert_eq!(eg0_bits(0), 1);
        assert_eq!(eg0_bits(1), 3);
        assert_eq!(eg0_bits(2), 3);
        assert_eq!(eg0_bits(3), 5);
        assert_eq!(eg0_bits(6), 5);
        assert_eq!(eg0_bits(7), 7);
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(oracle_rate(&CoeffBlock::zeros(8, 8).unwrap()), 4);
        let mut c = vec![0; 16];
        c[0] = 1;
        assert_eq!(oracle_rate(&CoeffBlock::new(4, 4, c.clone(), 0, "").unwrap()), 4);
        c[0] = 5;
        assert_eq!(oracle_rate(&CoeffBlock::new(4, 4, c, 0, "").unwrap()), 9);
    }

    #[test]
    fn oracle_uses_scan_position() {
        // (1,0) is third in the scan, (0,2) sixth.
        let mut c = vec![0; 16];
        c[4] = -1;
        assert_eq!(oracle_rate(&CoeffBlock::new(4, 4, c.clone(), 0, "").unwrap()), 1 + 3 + 2);
        c[2] = 1;
        assert_eq!(oracle_rate(&CoeffBlock::new(4, 4, c, 0, "").unwrap()), 1 + 6 + 4);
    }

    #[test]
    fn fully_sparse_config() {
        let cfg = SynthConfig {
            n_blocks: 50,
            sparsity: 1.0,
            ..Default::default()
        };
        let ds = generate(&cfg).unwrap();
        for r in &ds.records {
            assert!(r.block.coeffs().iter().all(|&c| c == 0));
            assert_eq!(r.rate_bits(), r.block.subblock_count() as f64);
        }
    }

    #[test]
    fn deterministic_and_labelled() {
        let cfg = SynthConfig {
            n_blocks: 200,
            seed: 9,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        assert_eq!(a, generate(&cfg).unwrap());
        for r in &a.records {
            assert_eq!(r.rate_bits(), oracle_rate(&r.block) as f64);
            assert!(cfg.size_set.contains(&(r.block.width(), r.block.height())));
        }
        let other = generate(&SynthConfig { seed: 10, ..cfg.clone() }).unwrap();
        assert_ne!(a, other);
        // A longer run shares its prefix.
        let longer = generate(&SynthConfig { n_blocks: 300, ..cfg }).unwrap();
        assert_eq!(&longer.records[..200], &a.records[..]);
    }

    #[test]
    fn bad_configs() {
        let bad = [
            SynthConfig { sparsity: 1.5, ..Default::default() },
            SynthConfig { size_set: vec![], ..Default::default() },
            SynthConfig { size_set: vec![(6, 4)], ..Default::default() },
            SynthConfig { magnitude_scale: f64::NAN, ..Default::default() },
        ];
        for cfg in bad {
            assert!(generate(&cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn size_parsing() {
        assert_eq!(parse_sizes("4x4, 16X8").unwrap(), vec![(4, 4), (16, 8)]);
        assert!(parse_sizes("4by4").is_err());
    }

    fn coeffs_strategy() -> impl Strategy<Value = Vec<i32>> {
        proptest::collection::vec(prop_oneof![3 => Just(0i32), 2 => -40i32..=40], 64)
    }

    proptest! {
        #[test]
        fn oracle_monotone_in_magnitude(c in coeffs_strategy(), pos in 0usize..64, bump in 1i32..50) {
            let base = CoeffBlock::new(8, 8, c.clone(), 0, "").unwrap();
            let mut bigger = c;
            let v = bigger[pos];
            bigger[pos] = if v < 0 { v - bump } else { v + bump };
            let bigger = CoeffBlock::new(8, 8, bigger, 0, "").unwrap();
            prop_assert!(oracle_rate(&bigger) >= oracle_rate(&base));
        }

        #[test]
        fn oracle_sign_invariant(c in coeffs_strategy()) {
            let neg: Vec<i32> = c.iter().map(|v| -v).collect();
            let a = CoeffBlock::new(8, 8, c, 0, "").unwrap();
            let b = CoeffBlock::new(8, 8, neg, 0, "").unwrap();
            prop_assert_eq!(oracle_rate(&a), oracle_rate(&b));
        }

        #[test]
        fn oracle_additive(c in coeffs_strategy()) {
            let b = CoeffBlock::new(8, 8, c, 0, "").unwrap();
            let parts: u64 = crate::block::subblocks(&b)
                .iter()
                .map(|v| oracle_rate(&CoeffBlock::new(4, 4, v.values.to_vec(), 0, "").unwrap()))
                .sum();
            prop_assert_eq!(parts, oracle_rate(&b));
        }
    }
}
