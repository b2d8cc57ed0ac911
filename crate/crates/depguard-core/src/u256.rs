//! 256-bit unsigned words as four 64-bit limbs.
//!
//! Arithmetic is modulo 2^256 (the machine word semantics), with the signed
//! variants interpreting words in two's complement. Text forms are big-endian
//! hex with a `0x` prefix.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// 256-bit unsigned integer. Limb 0 is least significant.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct U256(pub [u64; 4]);

pub const WORD_BYTES: usize = 32;

impl U256 {
    pub const ZERO: U256 = U256([0; 4]);
    pub const ONE: U256 = U256([1, 0, 0, 0]);
    pub const MAX: U256 = U256([u64::MAX; 4]);

    pub fn from_u64(v: u64) -> Self {
        U256([v, 0, 0, 0])
    }

    pub fn from_u128(v: u128) -> Self {
        U256([v as u64, (v >> 64) as u64, 0, 0])
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn low_u64(&self) -> u64 {
        self.0[0]
    }

    /// Lossy truncation to usize; callers must bound-check separately.
    pub fn low_usize(&self) -> usize {
        self.0[0] as usize
    }

    pub fn fits_u64(&self) -> bool {
        self.0[1] == 0 && self.0[2] == 0 && self.0[3] == 0
    }

    pub fn to_u64(&self) -> Option<u64> {
        if self.fits_u64() {
            Some(self.0[0])
        } else {
            None
        }
    }

    pub fn from_be_bytes(bytes: &[u8]) -> Self {
        assert!(bytes.len() <= WORD_BYTES, "word overflow");
        let mut buf = [0u8; WORD_BYTES];
        buf[WORD_BYTES - bytes.len()..].copy_from_slice(bytes);
        let mut limbs = [0u64; 4];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let hi = WORD_BYTES - 8 * i;
            let mut v = 0u64;
            for &b in &buf[hi - 8..hi] {
                v = (v << 8) | b as u64;
            }
            *limb = v;
        }
        U256(limbs)
    }

    pub fn to_be_bytes(&self) -> [u8; WORD_BYTES] {
        let mut out = [0u8; WORD_BYTES];
        for i in 0..4 {
            out[WORD_BYTES - 8 * (i + 1)..WORD_BYTES - 8 * i].copy_from_slice(&self.0[i].to_be_bytes());
        }
        out
    }

    /// Number of significant bytes (0 for zero). Drives the EXP gas formula.
    pub fn byte_len(&self) -> u32 {
        let bits = self.bits();
        bits.div_ceil(8)
    }

    pub fn bits(&self) -> u32 {
        for i in (0..4).rev() {
            if self.0[i] != 0 {
                return 64 * i as u32 + (64 - self.0[i].leading_zeros());
            }
        }
        0
    }

    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < 256);
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn wrapping_add(self, rhs: U256) -> U256 {
        let mut out = [0u64; 4];
        let mut carry = false;
        for i in 0..4 {
            let (a, c1) = self.0[i].overflowing_add(rhs.0[i]);
            let (b, c2) = a.overflowing_add(carry as u64);
            out[i] = b;
            carry = c1 || c2;
        }
        U256(out)
    }

    pub fn wrapping_sub(self, rhs: U256) -> U256 {
        let mut out = [0u64; 4];
        let mut borrow = false;
        for i in 0..4 {
            let (a, b1) = self.0[i].overflowing_sub(rhs.0[i]);
            let (b, b2) = a.overflowing_sub(borrow as u64);
            out[i] = b;
            borrow = b1 || b2;
        }
        U256(out)
    }

    pub fn wrapping_mul(self, rhs: U256) -> U256 {
        let mut out = [0u64; 4];
        for i in 0..4 {
            if self.0[i] == 0 {
                continue;
            }
            let mut carry = 0u128;
            for j in 0..4 - i {
                let cur = out[i + j] as u128 + self.0[i] as u128 * rhs.0[j] as u128 + carry;
                out[i + j] = cur as u64;
                carry = cur >> 64;
            }
        }
        U256(out)
    }

    fn shl_bits(self, shift: u32) -> U256 {
        if shift >= 256 {
            return U256::ZERO;
        }
        let limbs = (shift / 64) as usize;
        let bits = shift % 64;
        let mut out = [0u64; 4];
        for i in (0..4).rev() {
            if i >= limbs {
                let mut v = self.0[i - limbs] << bits;
                if bits > 0 && i > limbs {
                    v |= self.0[i - limbs - 1] >> (64 - bits);
                }
                out[i] = v;
            }
        }
        U256(out)
    }

    fn shr_bits(self, shift: u32) -> U256 {
        if shift >= 256 {
            return U256::ZERO;
        }
        let limbs = (shift / 64) as usize;
        let bits = shift % 64;
        let mut out = [0u64; 4];
        for i in 0..4 {
            if i + limbs < 4 {
                let mut v = self.0[i + limbs] >> bits;
                if bits > 0 && i + limbs + 1 < 4 {
                    v |= self.0[i + limbs + 1] << (64 - bits);
                }
                out[i] = v;
            }
        }
        U256(out)
    }

    /// Quotient and remainder; division by zero yields (0, 0) like the EVM.
    pub fn div_rem(self, rhs: U256) -> (U256, U256) {
        if rhs.is_zero() {
            return (U256::ZERO, U256::ZERO);
        }
        if self < rhs {
            return (U256::ZERO, self);
        }
        if rhs.fits_u64() && self.fits_u64() {
            return (
                U256::from_u64(self.0[0] / rhs.0[0]),
                U256::from_u64(self.0[0] % rhs.0[0]),
            );
        }
        // Bitwise long division; 256 iterations worst case.
        let mut quot = U256::ZERO;
        let mut rem = U256::ZERO;
        for i in (0..self.bits()).rev() {
            rem = rem.shl_bits(1);
            if self.bit(i as usize) {
                rem.0[0] |= 1;
            }
            if rem >= rhs {
                rem = rem.wrapping_sub(rhs);
                quot.0[(i / 64) as usize] |= 1 << (i % 64);
            }
        }
        (quot, rem)
    }

    pub fn div(self, rhs: U256) -> U256 {
        self.div_rem(rhs).0
    }

    pub fn rem(self, rhs: U256) -> U256 {
        self.div_rem(rhs).1
    }

    pub fn bitand(self, rhs: U256) -> U256 {
        U256([
            self.0[0] & rhs.0[0],
            self.0[1] & rhs.0[1],
            self.0[2] & rhs.0[2],
            self.0[3] & rhs.0[3],
        ])
    }

    pub fn bitor(self, rhs: U256) -> U256 {
        U256([
            self.0[0] | rhs.0[0],
            self.0[1] | rhs.0[1],
            self.0[2] | rhs.0[2],
            self.0[3] | rhs.0[3],
        ])
    }

    pub fn bitxor(self, rhs: U256) -> U256 {
        U256([
            self.0[0] ^ rhs.0[0],
            self.0[1] ^ rhs.0[1],
            self.0[2] ^ rhs.0[2],
            self.0[3] ^ rhs.0[3],
        ])
    }

    pub fn not(self) -> U256 {
        U256([!self.0[0], !self.0[1], !self.0[2], !self.0[3]])
    }

    pub fn is_neg(&self) -> bool {
        self.0[3] >> 63 == 1
    }

    /// Two's complement negation.
    pub fn neg(self) -> U256 {
        self.not().wrapping_add(U256::ONE)
    }

    pub fn abs_signed(self) -> U256 {
        if self.is_neg() {
            self.neg()
        } else {
            self
        }
    }

    pub fn slt(self, rhs: U256) -> bool {
        match (self.is_neg(), rhs.is_neg()) {
            (true, false) => true,
            (false, true) => false,
            _ => self < rhs,
        }
    }

    /// EVM SDIV: truncated signed division, 0 for zero divisor.
    pub fn sdiv(self, rhs: U256) -> U256 {
        if rhs.is_zero() {
            return U256::ZERO;
        }
        let min = U256([0, 0, 0, 1 << 63]);
        if self == min && rhs == U256::MAX {
            return min;
        }
        let q = self.abs_signed().div(rhs.abs_signed());
        if self.is_neg() != rhs.is_neg() {
            q.neg()
        } else {
            q
        }
    }

    /// EVM SMOD: remainder takes the sign of the dividend, 0 for zero divisor.
    pub fn smod(self, rhs: U256) -> U256 {
        if rhs.is_zero() {
            return U256::ZERO;
        }
        let r = self.abs_signed().rem(rhs.abs_signed());
        if self.is_neg() {
            r.neg()
        } else {
            r
        }
    }

    /// Modular exponentiation in the 2^256 ring (square and multiply).
    pub fn exp(self, power: U256) -> U256 {
        let mut base = self;
        let mut acc = U256::ONE;
        for i in 0..power.bits() {
            if power.bit(i as usize) {
                acc = acc.wrapping_mul(base);
            }
            base = base.wrapping_mul(base);
        }
        acc
    }

    /// EVM SIGNEXTEND: extend the sign of the byte at index `k` (0 = LSB).
    pub fn signextend(k: U256, value: U256) -> U256 {
        if k >= U256::from_u64(31) {
            return value;
        }
        let bit = (k.low_u64() as u32) * 8 + 7;
        let mask = if bit == 255 {
            U256::MAX
        } else {
            U256::ONE.shl_bits(bit + 1).wrapping_sub(U256::ONE)
        };
        if value.bit(bit as usize) {
            value.bitor(mask.not())
        } else {
            value.bitand(mask)
        }
    }

    /// EVM BYTE: byte `i` of the word, 0 = most significant; 0 for i >= 32.
    pub fn byte(index: U256, value: U256) -> U256 {
        if index >= U256::from_u64(32) {
            return U256::ZERO;
        }
        U256::from_u64(value.to_be_bytes()[index.low_usize()] as u64)
    }

    pub fn addmod(a: U256, b: U256, m: U256) -> U256 {
        if m.is_zero() {
            return U256::ZERO;
        }
        // Single wrap at most: track the carry out of the 256-bit sum.
        let sum = a.wrapping_add(b);
        let carried = sum < a;
        if !carried {
            return sum.rem(m);
        }
        // (2^256 + sum) mod m = ((2^256 - m) + sum mod m) mod m iterated once.
        let two = U256::MAX.rem(m).wrapping_add(U256::ONE).rem(m);
        sum.rem(m).wrapping_add(two).rem(m)
    }

    pub fn mulmod(a: U256, b: U256, m: U256) -> U256 {
        if m.is_zero() {
            return U256::ZERO;
        }
        // Schoolbook double-and-add in the modular ring; 256 iterations.
        let mut acc = U256::ZERO;
        let mut cur = a.rem(m);
        for i in 0..b.bits() {
            if b.bit(i as usize) {
                acc = U256::addmod(acc, cur, m);
            }
            cur = U256::addmod(cur, cur, m);
        }
        acc
    }

    /// Ceiling division by 32, used for word counts in gas formulas.
    pub fn ceil_div32(self) -> U256 {
        let (q, r) = self.div_rem(U256::from_u64(32));
        if r.is_zero() {
            q
        } else {
            q.wrapping_add(U256::ONE)
        }
    }

    pub fn max(self, rhs: U256) -> U256 {
        if self >= rhs {
            self
        } else {
            rhs
        }
    }

    pub fn checked_add(self, rhs: U256) -> Option<U256> {
        let s = self.wrapping_add(rhs);
        if s < self {
            None
        } else {
            Some(s)
        }
    }

    pub fn from_hex(s: &str) -> Result<Self, ParseU256Error> {
        let t = s.strip_prefix("0x").unwrap_or(s);
        if t.is_empty() || t.len() > 64 {
            return Err(ParseU256Error(s.to_string()));
        }
        let mut limbs = [0u64; 4];
        let mut acc = U256::ZERO;
        for c in t.chars() {
            let d = c.to_digit(16).ok_or_else(|| ParseU256Error(s.to_string()))?;
            acc = acc.shl_bits(4);
            acc.0[0] |= d as u64;
        }
        limbs.copy_from_slice(&acc.0);
        Ok(U256(limbs))
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("invalid 256-bit hex literal: {0}")]
pub struct ParseU256Error(pub String);

impl PartialOrd for U256 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for U256 {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in (0..4).rev() {
            match self.0[i].cmp(&other.0[i]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl From<u64> for U256 {
    fn from(v: u64) -> Self {
        U256::from_u64(v)
    }
}

impl From<u32> for U256 {
    fn from(v: u32) -> Self {
        U256::from_u64(v as u64)
    }
}

impl fmt::Display for U256 {
    /// Minimal big-endian hex with `0x` prefix.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0x0");
        }
        let bytes = self.to_be_bytes();
        let mut s = String::with_capacity(66);
        let mut started = false;
        for b in bytes {
            if !started {
                if b == 0 {
                    continue;
                }
                started = true;
                s.push_str(&format!("{:x}", b));
            } else {
                s.push_str(&format!("{:02x}", b));
            }
        }
        write!(f, "0x{}", s)
    }
}

impl fmt::Debug for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl FromStr for U256 {
    type Err = ParseU256Error;

    /// Accepts `0x`-prefixed hex, or bare hex.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        U256::from_hex(s)
    }
}

impl serde::Serialize for U256 {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for U256 {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        U256::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(v: u64) -> U256 {
        U256::from_u64(v)
    }

    #[test]
    fn add_sub_wrap() {
        assert_eq!(u(5).wrapping_add(u(3)), u(8));
        assert_eq!(U256::MAX.wrapping_add(U256::ONE), U256::ZERO);
        assert_eq!(U256::ZERO.wrapping_sub(U256::ONE), U256::MAX);
        let a = U256([u64::MAX, 0, 0, 0]);
        assert_eq!(a.wrapping_add(U256::ONE), U256([0, 1, 0, 0]));
    }

    #[test]
    fn mul_div() {
        assert_eq!(u(7).wrapping_mul(u(6)), u(42));
        let big = U256::from_hex("0xffffffffffffffffffffffffffffffff").unwrap();
        let sq = big.wrapping_mul(big);
        // (2^128-1)^2 = 2^256 - 2^129 + 1
        assert_eq!(
            sq,
            U256::MAX
                .wrapping_sub(U256::ONE.shl_bits(129))
                .wrapping_add(u(2))
        );
        assert_eq!(sq.div(big), big);
        assert_eq!(u(100).div_rem(u(7)), (u(14), u(2)));
        assert_eq!(u(100).div(U256::ZERO), U256::ZERO);
    }

    #[test]
    fn signed_ops() {
        let minus_one = U256::MAX;
        let minus_seven = u(7).neg();
        assert!(minus_one.slt(U256::ZERO));
        assert!(!U256::ZERO.slt(minus_one));
        assert_eq!(minus_seven.sdiv(u(2)), u(3).neg());
        assert_eq!(minus_seven.smod(u(2)), U256::ONE.neg());
        assert_eq!(u(7).smod(u(2).neg()), U256::ONE);
    }

    #[test]
    fn exp_and_friends() {
        assert_eq!(u(2).exp(u(10)), u(1024));
        assert_eq!(u(3).exp(U256::ZERO), U256::ONE);
        assert_eq!(u(2).exp(u(256)), U256::ZERO);
        assert_eq!(U256::byte(u(31), u(0xab)), u(0xab));
        assert_eq!(U256::byte(u(32), u(0xab)), U256::ZERO);
        assert_eq!(U256::signextend(u(0), u(0xff)), U256::MAX);
        assert_eq!(U256::signextend(u(0), u(0x7f)), u(0x7f));
        assert_eq!(U256::addmod(U256::MAX, u(2), u(10)), {
            // (2^256 - 1 + 2) mod 10; 2^256 mod 10 = 6, so result is 7.
            u(7)
        });
        assert_eq!(U256::mulmod(U256::MAX, U256::MAX, u(12)), {
            // (2^256-1)^2 mod 12; 2^256 mod 12 = 4 so (4-1)^2 = 9 mod 12.
            u(9)
        });
    }

    #[test]
    fn text_roundtrip() {
        for s in ["0x0", "0x1", "0xdeadbeef", "0xffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffff"] {
            let v = U256::from_hex(s).unwrap();
            assert_eq!(v.to_string(), s);
        }
        let v = U256::from_hex("00ff").unwrap();
        assert_eq!(v, u(255));
        assert!(U256::from_hex("0xzz").is_err());
        assert!(U256::from_hex("").is_err());
    }

    #[test]
    fn byte_lengths() {
        assert_eq!(U256::ZERO.byte_len(), 0);
        assert_eq!(u(1).byte_len(), 1);
        assert_eq!(u(255).byte_len(), 1);
        assert_eq!(u(256).byte_len(), 2);
        assert_eq!(U256::MAX.byte_len(), 32);
    }

    #[test]
    fn be_bytes_roundtrip() {
        let v = U256::from_hex("0x0102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f20").unwrap();
        assert_eq!(U256::from_be_bytes(&v.to_be_bytes()), v);
        assert_eq!(U256::from_be_bytes(&[1, 0]), u(256));
    }
}
