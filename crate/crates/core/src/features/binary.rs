use crate::error::{Error, Result};

/// Packed binary codes: `bits` per row, stored least-significant-bit first
/// in `ceil(bits / 64)` words per row. Pad bits are always zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCodeMatrix {
    rows: usize,
    bits: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl BinaryCodeMatrix {
    pub fn words_for(bits: usize) -> usize {
        bits.div_ceil(64)
    }

    pub fn zeros(rows: usize, bits: usize) -> Self {
        let words_per_row = Self::words_for(bits);
        BinaryCodeMatrix {
            rows,
            bits,
            words_per_row,
            data: vec![0; rows * words_per_row],
        }
    }

    pub fn new(rows: usize, bits: usize, data: Vec<u64>) -> Result<Self> {
        let words_per_row = Self::words_for(bits);
        if data.len() != rows * words_per_row {
            return Err(Error::shape(format!(
                "code data length {} != {rows} × {words_per_row} words",
                data.len()
            )));
        }
        let m = BinaryCodeMatrix {
            rows,
            bits,
            words_per_row,
            data,
        };
        if let Some(mask) = m.pad_mask() {
            for r in 0..rows {
                if m.row(r)[words_per_row - 1] & mask != 0 {
                    return Err(Error::Parse {
                        row: r,
                        msg: "nonzero pad bits".into(),
                    });
                }
            }
        }
        Ok(m)
    }

    /// Mask selecting pad bits in the last word, if `bits` is not a multiple
    /// of 64.
    fn pad_mask(&self) -> Option<u64> {
        let used = self.bits % 64;
        (used != 0).then(|| !0u64 << used)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub fn as_words(&self) -> &[u64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    pub fn bit(&self, row: usize, b: usize) -> bool {
        assert!(b < self.bits);
        self.row(row)[b / 64] >> (b % 64) & 1 == 1
    }

    pub fn set_bit(&mut self, row: usize, b: usize, value: bool) {
        assert!(b < self.bits);
        let w = &mut self.data[row * self.words_per_row + b / 64];
        if value {
            *w |= 1 << (b % 64);
        } else {
            *w &= !(1 << (b % 64));
        }
    }
}

/// Popcount of the XOR of two equal-width packed codes.
#[inline]
pub fn hamming(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pad_bits_must_be_zero() {
        assert!(BinaryCodeMatrix::new(1, 4, vec![0b1111]).is_ok());
        assert!(BinaryCodeMatrix::new(1, 4, vec![0b1_0000]).is_err());
        assert!(BinaryCodeMatrix::new(1, 64, vec![u64::MAX]).is_ok());
    }

    #[test]
    fn set_and_get_bits() {
        let mut m = BinaryCodeMatrix::zeros(2, 70);
        m.set_bit(1, 69, true);
        m.set_bit(1, 0, true);
        assert!(m.bit(1, 69) && m.bit(1, 0) && !m.bit(0, 69));
        assert_eq!(m.row(1), &[1, 1 << 5]);
        m.set_bit(1, 0, false);
        assert!(!m.bit(1, 0));
    }

    #[test]
    fn hamming_all_bits() {
        assert_eq!(hamming(&[0b0000], &[0b1111]), 4);
    }
}
