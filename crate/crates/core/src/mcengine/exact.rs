//! Order-independent summation of `f64` values.
//!
//! Values are converted exactly into a 256-bit two's-complement fixed-point
//! integer with 128 fractional bits, so addition is plain integer addition:
//! associative, commutative and bit-reproducible no matter how partial sums
//! are grouped. Magnitudes below 2^-128 are truncated toward zero; magnitudes
//! of 2^126 or more (and non-finite values) poison the sum, which then reads
//! back as NaN.

const LIMBS: usize = 4;
const FRAC_BITS: i32 = 128;
const MAX_EXP: i32 = 126;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ExactSum {
    limbs: [u64; LIMBS],
    poisoned: bool,
}

impl ExactSum {
    pub const ZERO: ExactSum = ExactSum {
        limbs: [0; LIMBS],
        poisoned: false,
    };

    pub fn from_f64(x: f64) -> Self {
        if !x.is_finite() || x.abs() >= 2f64.powi(MAX_EXP) {
            return ExactSum {
                limbs: [0; LIMBS],
                poisoned: true,
            };
        }
        let bits = x.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        let shift = exp + FRAC_BITS;
        let mut limbs = [0u64; LIMBS];
        if shift < 0 {
            let s = (-shift) as u32;
            if s < 64 {
                limbs[0] = mant >> s;
            }
        } else {
            let (word, off) = ((shift / 64) as usize, (shift % 64) as u32);
            limbs[word] |= mant << off;
            if off > 0 && word + 1 < LIMBS {
                limbs[word + 1] |= mant >> (64 - off);
            }
        }
        let mut out = ExactSum {
            limbs,
            poisoned: false,
        };
        if x.is_sign_negative() {
            out.limbs = negate(out.limbs);
        }
        out
    }

    pub fn add(&mut self, other: &ExactSum) {
        let mut carry = false;
        for (a, b) in self.limbs.iter_mut().zip(other.limbs) {
            let (s1, c1) = a.overflowing_add(b);
            let (s2, c2) = s1.overflowing_add(u64::from(carry));
            *a = s2;
            carry = c1 || c2;
        }
        self.poisoned |= other.poisoned;
    }

    pub fn add_f64(&mut self, x: f64) {
        self.add(&ExactSum::from_f64(x));
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    /// Correctly rounded conversion back to `f64`.
    pub fn to_f64(&self) -> f64 {
        if self.poisoned {
            return f64::NAN;
        }
        let negative = self.limbs[LIMBS - 1] >> 63 == 1;
        let mag = if negative {
            negate(self.limbs)
        } else {
            self.limbs
        };
        let Some(top) = (0..LIMBS).rev().find(|&i| mag[i] != 0) else {
            return 0.0;
        };
        let high_bit = 64 * top as i32 + 63 - mag[top].leading_zeros() as i32;
        let value = if high_bit < 64 {
            mag[0] as f64 * pow2(-FRAC_BITS)
        } else {
            let shift = (high_bit - 63) as u32;
            let mut window = shr_low(&mag, shift);
            // any bit shifted out becomes a sticky bit below the rounding position
            if has_bits_below(&mag, shift) {
                window |= 1;
            }
            window as f64 * pow2(shift as i32 - FRAC_BITS)
        };
        if negative {
            -value
        } else {
            value
        }
    }
}

fn negate(limbs: [u64; LIMBS]) -> [u64; LIMBS] {
    let mut out = [0u64; LIMBS];
    let mut carry = true;
    for (o, l) in out.iter_mut().zip(limbs) {
        let (s, c) = (!l).overflowing_add(u64::from(carry));
        *o = s;
        carry = c;
    }
    out
}

/// Low 64 bits of `mag >> shift`.
fn shr_low(mag: &[u64; LIMBS], shift: u32) -> u64 {
    let (word, off) = ((shift / 64) as usize, shift % 64);
    let lo = mag[word] >> off;
    let hi = if off > 0 && word + 1 < LIMBS {
        mag[word + 1] << (64 - off)
    } else {
        0
    };
    lo | hi
}

fn has_bits_below(mag: &[u64; LIMBS], shift: u32) -> bool {
    let (word, off) = ((shift / 64) as usize, shift % 64);
    mag[..word].iter().any(|&w| w != 0) || (off > 0 && mag[word] & ((1u64 << off) - 1) != 0)
}

fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}
