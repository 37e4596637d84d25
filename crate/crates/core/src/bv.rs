//! Fixed-width bit-vector values.
//!
//! Words are stored little-endian; bits above `width` are always zero.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use smallvec::{smallvec, SmallVec};

type Words = SmallVec<[u64; 2]>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bv {
    width: u32,
    words: Words,
}

fn word_count(width: u32) -> usize {
    width.div_ceil(64) as usize
}

impl Bv {
    pub fn zero(width: u32) -> Self {
        assert!(width >= 1, "bit-vector width must be positive");
        Bv {
            width,
            words: smallvec![0; word_count(width)],
        }
    }

    pub fn ones(width: u32) -> Self {
        let mut bv = Bv {
            width,
            words: smallvec![u64::MAX; word_count(width)],
        };
        bv.normalize();
        bv
    }

    pub fn from_u64(width: u32, value: u64) -> Self {
        let mut bv = Bv::zero(width);
        bv.words[0] = value;
        bv.normalize();
        bv
    }

    /// Builds a value from bits, least significant first.
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut bv = Bv::zero(bits.len() as u32);
        for (i, &b) in bits.iter().enumerate() {
            if b {
                bv.words[i / 64] |= 1 << (i % 64);
            }
        }
        bv
    }

    pub fn from_biguint(width: u32, value: &BigUint) -> Self {
        let mut bv = Bv::zero(width);
        for (i, d) in value.to_u64_digits().into_iter().enumerate() {
            if i < bv.words.len() {
                bv.words[i] = d;
            }
        }
        bv.normalize();
        bv
    }

    pub fn to_biguint(&self) -> BigUint {
        let mut digits = Vec::with_capacity(self.words.len() * 2);
        for w in &self.words {
            digits.push(*w as u32);
            digits.push((*w >> 32) as u32);
        }
        BigUint::new(digits)
    }

    /// Parses the body of an SMT-LIB `#b` literal.
    pub fn from_binary_str(digits: &str) -> Option<Self> {
        if digits.is_empty() {
            return None;
        }
        let mut bits = Vec::with_capacity(digits.len());
        for c in digits.chars().rev() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return None,
            }
        }
        Some(Bv::from_bits(&bits))
    }

    /// Parses the body of an SMT-LIB `#x` literal.
    pub fn from_hex_str(digits: &str) -> Option<Self> {
        if digits.is_empty() {
            return None;
        }
        let mut bits = Vec::with_capacity(digits.len() * 4);
        for c in digits.chars().rev() {
            let d = c.to_digit(16)?;
            for k in 0..4 {
                bits.push(d >> k & 1 == 1);
            }
        }
        Some(Bv::from_bits(&bits))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn bit(&self, i: u32) -> bool {
        debug_assert!(i < self.width);
        self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    pub fn set_bit(&mut self, i: u32, value: bool) {
        debug_assert!(i < self.width);
        let w = &mut self.words[(i / 64) as usize];
        if value {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.width).map(move |i| self.bit(i))
    }

    /// Low 64 bits of the value.
    pub fn low_u64(&self) -> u64 {
        self.words[0]
    }

    /// The value as `u64` when it fits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.words[1..].iter().all(|&w| w == 0) {
            Some(self.words[0])
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn msb(&self) -> bool {
        self.bit(self.width - 1)
    }

    fn normalize(&mut self) {
        let rem = self.width % 64;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }

    fn check_same_width(&self, other: &Bv) {
        assert_eq!(self.width, other.width, "bit-vector width mismatch");
    }

    pub fn not(&self) -> Bv {
        let mut r = self.clone();
        for w in r.words.iter_mut() {
            *w = !*w;
        }
        r.normalize();
        r
    }

    fn zip_with(&self, other: &Bv, f: impl Fn(u64, u64) -> u64) -> Bv {
        self.check_same_width(other);
        let words = self
            .words
            .iter()
            .zip(other.words.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Bv {
            width: self.width,
            words,
        }
    }

    pub fn and(&self, other: &Bv) -> Bv {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Bv) -> Bv {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn xor(&self, other: &Bv) -> Bv {
        self.zip_with(other, |a, b| a ^ b)
    }

    pub fn add(&self, other: &Bv) -> Bv {
        self.check_same_width(other);
        let mut r = Bv::zero(self.width);
        let mut carry = 0u64;
        for i in 0..self.words.len() {
            let (s1, c1) = self.words[i].overflowing_add(other.words[i]);
            let (s2, c2) = s1.overflowing_add(carry);
            r.words[i] = s2;
            carry = (c1 as u64) + (c2 as u64);
        }
        r.normalize();
        r
    }

    pub fn neg(&self) -> Bv {
        self.not().add(&Bv::from_u64(self.width, 1))
    }

    pub fn sub(&self, other: &Bv) -> Bv {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Bv) -> Bv {
        self.check_same_width(other);
        let n = self.words.len();
        let mut acc = vec![0u64; n];
        for i in 0..n {
            let mut carry: u128 = 0;
            for j in 0..n - i {
                let cur =
                    acc[i + j] as u128 + (self.words[i] as u128) * (other.words[j] as u128) + carry;
                acc[i + j] = cur as u64;
                carry = cur >> 64;
            }
        }
        let mut r = Bv {
            width: self.width,
            words: acc.into_iter().collect(),
        };
        r.normalize();
        r
    }

    /// Shift amount as `u32` when it is below the width, else `None`.
    fn shift_amount(&self, amount: &Bv) -> Option<u32> {
        match amount.to_u64() {
            Some(a) if a < self.width as u64 => Some(a as u32),
            _ => None,
        }
    }

    fn shl_by(&self, n: u32) -> Bv {
        let mut r = Bv::zero(self.width);
        let (ws, bs) = ((n / 64) as usize, n % 64);
        for i in (ws..self.words.len()).rev() {
            let mut w = self.words[i - ws] << bs;
            if bs > 0 && i > ws {
                w |= self.words[i - ws - 1] >> (64 - bs);
            }
            r.words[i] = w;
        }
        r.normalize();
        r
    }

    fn lshr_by(&self, n: u32) -> Bv {
        let mut r = Bv::zero(self.width);
        let (ws, bs) = ((n / 64) as usize, n % 64);
        let len = self.words.len();
        for i in 0..len.saturating_sub(ws) {
            let mut w = self.words[i + ws] >> bs;
            if bs > 0 && i + ws + 1 < len {
                w |= self.words[i + ws + 1] << (64 - bs);
            }
            r.words[i] = w;
        }
        r
    }

    pub fn shl(&self, amount: &Bv) -> Bv {
        match self.shift_amount(amount) {
            Some(n) => self.shl_by(n),
            None => Bv::zero(self.width),
        }
    }

    pub fn lshr(&self, amount: &Bv) -> Bv {
        match self.shift_amount(amount) {
            Some(n) => self.lshr_by(n),
            None => Bv::zero(self.width),
        }
    }

    pub fn ashr(&self, amount: &Bv) -> Bv {
        let sign = self.msb();
        match self.shift_amount(amount) {
            Some(n) => {
                let mut r = self.lshr_by(n);
                if sign {
                    for i in self.width - n..self.width {
                        r.set_bit(i, true);
                    }
                }
                r
            }
            None if sign => Bv::ones(self.width),
            None => Bv::zero(self.width),
        }
    }

    pub fn ult(&self, other: &Bv) -> bool {
        self.check_same_width(other);
        self.cmp_unsigned(other) == Ordering::Less
    }

    pub fn slt(&self, other: &Bv) -> bool {
        self.check_same_width(other);
        match (self.msb(), other.msb()) {
            (true, false) => true,
            (false, true) => false,
            _ => self.cmp_unsigned(other) == Ordering::Less,
        }
    }

    fn cmp_unsigned(&self, other: &Bv) -> Ordering {
        self.words.iter().rev().cmp(other.words.iter().rev())
    }

    /// `self` supplies the high bits.
    pub fn concat(&self, low: &Bv) -> Bv {
        let bits: Vec<bool> = low.bits().chain(self.bits()).collect();
        Bv::from_bits(&bits)
    }

    pub fn extract(&self, hi: u32, lo: u32) -> Bv {
        assert!(lo <= hi && hi < self.width, "extract out of range");
        let shifted = self.lshr_by(lo);
        let mut r = Bv::zero(hi - lo + 1);
        for (i, w) in r.words.iter_mut().enumerate() {
            *w = shifted.words[i];
        }
        r.normalize();
        r
    }
}

impl PartialOrd for Bv {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Orders by width, then unsigned magnitude.
impl Ord for Bv {
    fn cmp(&self, other: &Self) -> Ordering {
        self.width
            .cmp(&other.width)
            .then_with(|| self.cmp_unsigned(other))
    }
}

/// SMT-LIB literal syntax: `#x` when the width is a multiple of four, else `#b`.
impl fmt::Display for Bv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width.is_multiple_of(4) {
            write!(f, "#x")?;
            for nib in (0..self.width / 4).rev() {
                let mut d = 0u32;
                for k in 0..4 {
                    if self.bit(nib * 4 + k) {
                        d |= 1 << k;
                    }
                }
                write!(f, "{}", std::char::from_digit(d, 16).unwrap())?;
            }
        } else {
            write!(f, "#b")?;
            for i in (0..self.width).rev() {
                write!(f, "{}", if self.bit(i) { '1' } else { '0' })?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Bv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(width: u32, v: &Bv) -> BigUint {
        assert_eq!(v.width(), width);
        v.to_biguint()
    }

    fn modulus(width: u32) -> BigUint {
        BigUint::from(1u8) << width
    }

    #[test]
    fn literals_round_trip() {
        let x = Bv::from_hex_str("0000000a").unwrap();
        assert_eq!(x.width(), 32);
        assert_eq!(x.to_u64(), Some(10));
        assert_eq!(x.to_string(), "#x0000000a");
        let b = Bv::from_binary_str("101").unwrap();
        assert_eq!(b.to_u64(), Some(5));
        assert_eq!(b.to_string(), "#b101");
    }

    #[test]
    fn wraparound_add() {
        let a = Bv::from_u64(2, 3);
        let b = Bv::from_u64(2, 2);
        assert_eq!(a.add(&b), Bv::from_u64(2, 1));
    }

    #[test]
    fn shifts_saturate() {
        let x = Bv::from_u64(4, 0b1001);
        assert_eq!(x.shl(&Bv::from_u64(4, 4)), Bv::zero(4));
        assert_eq!(x.lshr(&Bv::from_u64(4, 9)), Bv::zero(4));
        assert_eq!(x.ashr(&Bv::from_u64(4, 7)), Bv::ones(4));
        assert_eq!(x.ashr(&Bv::from_u64(4, 1)), Bv::from_u64(4, 0b1100));
    }

    #[test]
    fn extract_and_concat() {
        let x = Bv::from_u64(8, 0b1011_0110);
        assert_eq!(x.extract(5, 2), Bv::from_u64(4, 0b1101));
        let y = Bv::from_u64(3, 0b101).concat(&Bv::from_u64(2, 0b01));
        assert_eq!(y, Bv::from_u64(5, 0b10101));
    }

    fn arb_pair() -> impl Strategy<Value = (u32, Vec<bool>, Vec<bool>)> {
        (1u32..150).prop_flat_map(|w| {
            (
                Just(w),
                proptest::collection::vec(any::<bool>(), w as usize),
                proptest::collection::vec(any::<bool>(), w as usize),
            )
        })
    }

    proptest! {
        #[test]
        fn arithmetic_matches_bignum((w, a, b) in arb_pair()) {
            let (x, y) = (Bv::from_bits(&a), Bv::from_bits(&b));
            let m = modulus(w);
            let (bx, by) = (big(w, &x), big(w, &y));
            prop_assert_eq!(big(w, &x.add(&y)), (&bx + &by) % &m);
            prop_assert_eq!(big(w, &x.mul(&y)), (&bx * &by) % &m);
            prop_assert_eq!(big(w, &x.neg()), (&m - &bx) % &m);
            prop_assert_eq!(x.ult(&y), bx < by);
            let n = by.to_u64_digits().first().copied().unwrap_or(0) % (w as u64 + 3);
            let amount = Bv::from_u64(w, n);
            let expect_shl = if n >= w as u64 { BigUint::from(0u8) } else { (&bx << n as usize) % &m };
            prop_assert_eq!(big(w, &x.shl(&amount)), expect_shl);
            let expect_lshr = if n >= w as u64 { BigUint::from(0u8) } else { &bx >> n as usize };
            prop_assert_eq!(big(w, &x.lshr(&amount)), expect_lshr);
        }

        #[test]
        fn biguint_round_trip((w, a, _b) in arb_pair()) {
            let x = Bv::from_bits(&a);
            prop_assert_eq!(Bv::from_biguint(w, &x.to_biguint()), x);
        }
    }
}
