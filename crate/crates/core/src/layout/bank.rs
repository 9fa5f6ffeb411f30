use serde::{Deserialize, Serialize};

use super::LayoutError;
use crate::hw::compute_pm;

/// Packed bus words needed for `cols` elements of one row.
pub fn pack_row(cols: u64, axi_width_bits: u32, data_width_bits: u32) -> Result<u64, LayoutError> {
    if cols == 0 {
        return Err(LayoutError::Zero("cols"));
    }
    let pack = compute_pm(axi_width_bits, data_width_bits).map_err(|e| LayoutError::Hardware(e.to_string()))?;
    Ok(cols.div_ceil(pack))
}

/// Column-wise split of a row-major matrix over DDR banks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankLayout {
    pub rows: u64,
    pub cols: u64,
    pub bank_count: u32,
    /// Half-open column interval held by each bank, in bank order.
    pub segments: Vec<(u64, u64)>,
    pub pack_factor: u64,
    /// Packed words per row for each bank's segment.
    pub words_per_row_segment: Vec<u64>,
}

/// Splits `cols` into `bn` contiguous segments whose widths differ by at most
/// one; the first `cols % bn` banks take the wider share.
pub fn partition_banks(rows: u64, cols: u64, bn: u32, pack_factor: u64) -> Result<BankLayout, LayoutError> {
    if bn == 0 {
        return Err(LayoutError::Zero("bank_count"));
    }
    if pack_factor == 0 {
        return Err(LayoutError::Zero("pack_factor"));
    }
    if cols < u64::from(bn) {
        return Err(LayoutError::TooFewColumns { cols, banks: bn });
    }
    let (base, extra) = (cols / u64::from(bn), cols % u64::from(bn));
    let mut segments = Vec::with_capacity(bn as usize);
    let mut start = 0;
    for b in 0..u64::from(bn) {
        let width = base + u64::from(b < extra);
        segments.push((start, start + width));
        start += width;
    }
    let words_per_row_segment = segments.iter().map(|(s, e)| (e - s).div_ceil(pack_factor)).collect();
    Ok(BankLayout { rows, cols, bank_count: bn, segments, pack_factor, words_per_row_segment })
}

impl BankLayout {
    pub fn segment_width(&self, bank: usize) -> u64 {
        let (s, e) = self.segments[bank];
        e - s
    }

    /// Bank holding column `col`.
    pub fn bank_of(&self, col: u64) -> Option<usize> {
        self.segments.iter().position(|&(s, e)| (s..e).contains(&col))
    }

    /// Packed words to move the whole matrix.
    pub fn total_words(&self) -> u64 {
        self.rows * self.words_per_row_segment.iter().sum::<u64>()
    }

    /// Distributes a row-major matrix into per-bank row-major blocks.
    pub fn scatter<T: Clone>(&self, data: &[T]) -> Result<Vec<Vec<T>>, LayoutError> {
        let expected = (self.rows * self.cols) as usize;
        if data.len() != expected {
            return Err(LayoutError::DataLength { expected, found: data.len() });
        }
        let cols = self.cols as usize;
        Ok(self
            .segments
            .iter()
            .map(|&(s, e)| data.chunks(cols).flat_map(|row| row[s as usize..e as usize].iter().cloned()).collect())
            .collect())
    }

    /// Inverse of [`BankLayout::scatter`].
    pub fn gather<T: Clone>(&self, banks: &[Vec<T>]) -> Result<Vec<T>, LayoutError> {
        if banks.len() != self.segments.len() {
            return Err(LayoutError::DataLength { expected: self.segments.len(), found: banks.len() });
        }
        for (b, block) in banks.iter().enumerate() {
            let expected = (self.rows * self.segment_width(b)) as usize;
            if block.len() != expected {
                return Err(LayoutError::DataLength { expected, found: block.len() });
            }
        }
        let mut out = Vec::with_capacity((self.rows * self.cols) as usize);
        for r in 0..self.rows as usize {
            for (b, block) in banks.iter().enumerate() {
                let w = self.segment_width(b) as usize;
                out.extend_from_slice(&block[r * w..(r + 1) * w]);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_examples() {
        assert_eq!(pack_row(384, 512, 16).unwrap(), 24);
        assert_eq!(pack_row(1, 512, 16).unwrap(), 1);
        assert_eq!(pack_row(17, 512, 16).unwrap(), 2);
        assert!(pack_row(0, 512, 16).is_err());
    }

    #[test]
    fn partition_examples() {
        let even = partition_banks(4, 768, 4, 16).unwrap();
        assert!((0..4).all(|b| even.segment_width(b) == 192));
        assert_eq!(even.words_per_row_segment, vec![12; 4]);
        let odd = partition_banks(1, 10, 4, 16).unwrap();
        assert_eq!((0..4).map(|b| odd.segment_width(b)).collect::<Vec<_>>(), vec![3, 3, 2, 2]);
        let one = partition_banks(3, 7, 1, 16).unwrap();
        assert_eq!(one.segments, vec![(0, 7)]);
        assert!(matches!(partition_banks(1, 3, 4, 16), Err(LayoutError::TooFewColumns { .. })));
    }

    #[test]
    fn scatter_gather_round_trip() {
        let layout = partition_banks(3, 10, 4, 4).unwrap();
        let data: Vec<u32> = (0..30).collect();
        let banks = layout.scatter(&data).unwrap();
        assert_eq!(banks[0], vec![0, 1, 2, 10, 11, 12, 20, 21, 22]);
        assert_eq!(layout.gather(&banks).unwrap(), data);
        assert_eq!(layout.bank_of(6), Some(2));
    }
}
