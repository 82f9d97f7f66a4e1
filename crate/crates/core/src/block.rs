//! Coefficient blocks and their 4×4 sub-block decomposition.
//!
//! Every feature in this crate is computed per 4×4 sub-block and summed over
//! the block, so a [`CoeffBlock`] must tile exactly into sub-blocks: both
//! dimensions are positive multiples of 4.

use crate::error::{Error, Result};

/// Side length of a sub-block.
pub const SUB: usize = 4;
/// Coefficients in one sub-block.
pub const SUB_LEN: usize = SUB * SUB;

/// A `width × height` grid of quantized transform coefficients, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffBlock {
    width: usize,
    height: usize,
    coeffs: Vec<i32>,
    qp: i32,
    source_id: String,
}

impl CoeffBlock {
    pub fn new(
        width: usize,
        height: usize,
        coeffs: Vec<i32>,
        qp: i32,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let source_id = source_id.into();
        if width == 0 || height == 0 || !width.is_multiple_of(SUB) || !height.is_multiple_of(SUB) {
            return Err(Error::InvalidBlock(format!(
                "{source_id}: dimensions {width}x{height} are not positive multiples of 4"
            )));
        }
        if coeffs.len() != width * height {
            return Err(Error::InvalidBlock(format!(
                "{source_id}: declared {width}x{height} but got {} coefficients",
                coeffs.len()
            )));
        }
        Ok(Self {
            width,
            height,
            coeffs,
            qp,
            source_id,
        })
    }

    /// All-zero block, mostly useful in tests.
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height], 0, "")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn coeffs(&self) -> &[i32] {
        &self.coeffs
    }

    pub fn qp(&self) -> i32 {
        self.qp
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn subblock_count(&self) -> usize {
        self.pixel_count() / SUB_LEN
    }

    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.coeffs[row * self.width + col]
    }

    pub fn with_qp(mut self, qp: i32) -> Self {
        self.qp = qp;
        self
    }

    /// Calls `f` with the 16 values of every sub-block, in raster order of
    /// sub-block origins. Allocation-free counterpart of [`subblocks`].
    pub fn for_each_subblock(&self, mut f: impl FnMut([i32; SUB_LEN])) {
        let w = self.width;
        for r0 in (0..self.height).step_by(SUB) {
            for c0 in (0..w).step_by(SUB) {
                let mut vals = [0i32; SUB_LEN];
                for r in 0..SUB {
                    let start = (r0 + r) * w + c0;
                    vals[r * SUB..(r + 1) * SUB].copy_from_slice(&self.coeffs[start..start + SUB]);
                }
                f(vals);
            }
        }
    }
}

/// One 4×4 tile of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubBlockView {
    /// Row-major 4×4 values.
    pub values: [i32; SUB_LEN],
    /// `(row, col)` of the tile's top-left corner in the parent block.
    pub origin: (usize, usize),
}

impl SubBlockView {
    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.values[row * SUB + col]
    }
}

/// Splits a block into its 4×4 tiles in raster order of their origins.
pub fn subblocks(block: &CoeffBlock) -> Vec<SubBlockView> {
    let per_row = block.width / SUB;
    let mut out = Vec::with_capacity(block.subblock_count());
    let mut idx = 0;
    block.for_each_subblock(|values| {
        out.push(SubBlockView {
            values,
            origin: ((idx / per_row) * SUB, (idx % per_row) * SUB),
        });
        idx += 1;
    });
    out
}

/// Rebuilds a block's coefficient grid from tiles. Inverse of [`subblocks`].
pub fn assemble(width: usize, height: usize, views: &[SubBlockView]) -> Result<Vec<i32>> {
    if !width.is_multiple_of(SUB) || !height.is_multiple_of(SUB) || views.len() != width * height / SUB_LEN {
        return Err(Error::InvalidBlock(format!(
            "{} tiles cannot cover a {width}x{height} block",
            views.len()
        )));
    }
    let mut coeffs = vec![0; width * height];
    for v in views {
        let (r0, c0) = v.origin;
        if r0 % SUB != 0 || c0 % SUB != 0 || r0 + SUB > height || c0 + SUB > width {
            return Err(Error::InvalidBlock(format!("tile origin {:?} out of bounds", v.origin)));
        }
        for r in 0..SUB {
            for c in 0..SUB {
                coeffs[(r0 + r) * width + c0 + c] = v.get(r, c);
            }
        }
    }
    Ok(coeffs)
}

/// A block paired with its measured rate in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub block: CoeffBlock,
    rate_bits: f64,
}

impl DatasetRecord {
    pub fn new(block: CoeffBlock, rate_bits: f64) -> Result<Self> {
        if !rate_bits.is_finite() || rate_bits < 0.0 {
            return Err(Error::InvalidRate(rate_bits));
        }
        Ok(Self { block, rate_bits })
    }

    pub fn rate_bits(&self) -> f64 {
        self.rate_bits
    }
}
