//! Unsigned soft-float registers and the margined reversible addition.
//!
//! Values are stored as an explicitly normalized mantissa of `M` bits together
//! with an `E`-bit exponent field; a fixed per-format offset maps the stored
//! field to the true binary exponent. All values are strictly positive: the
//! stepper keeps state positive by construction (bias), so no sign bit exists
//! and zero is not representable.
//!
//! Every arithmetic result is truncated toward zero, mirroring a register
//! circuit that drops shifted-out bits instead of rounding. The margined
//! addition models an adder in which the first operand owns an `A`-bit
//! alignment margin: the addition is exact up to the final truncation, but it
//! is only available while the second operand's exponent exceeds the first's
//! by at most `A`. Each such addition permanently consumes
//! `A + floor(log2 A) + 3` ancilla qubits, which an [`AncillaLedger`] tracks.

use core::fmt;

/// Errors from encoding and register arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FloatError {
    /// Value (or an intermediate) exceeds the largest representable value.
    #[error("value exceeds the representable range")]
    Overflow,
    /// Value is below the smallest representable value or not positive.
    #[error("value is below the representable range or not positive")]
    Underflow,
    /// The exponent gap between addends does not fit the alignment margin.
    #[error("exponent gap {gap} exceeds the {margin}-bit alignment margin")]
    Margin { gap: u32, margin: u32 },
    /// A weighted sum produced a non-positive result.
    #[error("weighted sum is not positive")]
    NegativeResult,
    /// Operands with different formats were combined.
    #[error("operands use different float formats")]
    FormatMismatch,
    /// Rejected format parameters.
    #[error("invalid float format: {0}")]
    InvalidFormat(&'static str),
}

/// Builds the power of two `2^e` exactly from bits (normal f64 range only).
fn pow2(e: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Splits a finite positive f64 into `(s, t)` with `value = s * 2^t` exactly.
fn split_positive(value: f64) -> Option<(u64, i64)> {
    if !value.is_finite() || value <= 0.0 {
        return None;
    }
    let bits = value.to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp_field == 0 {
        Some((frac, -1074))
    } else {
        Some((frac | (1u64 << 52), exp_field - 1075))
    }
}

/// Per-dimension register format: mantissa width, exponent width, exponent
/// offset and alignment margin width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FloatFormat {
    mantissa_bits: u32,
    exponent_bits: u32,
    exponent_offset: i32,
    margin_bits: u32,
}

impl FloatFormat {
    /// Largest supported mantissa width; keeps decoding into f64 exact.
    pub const MAX_MANTISSA_BITS: u32 = 53;

    pub fn new(
        mantissa_bits: u32,
        exponent_bits: u32,
        exponent_offset: i32,
        margin_bits: u32,
    ) -> Result<Self, FloatError> {
        if mantissa_bits < 2 {
            return Err(FloatError::InvalidFormat("mantissa needs at least 2 bits"));
        }
        if mantissa_bits > Self::MAX_MANTISSA_BITS {
            return Err(FloatError::InvalidFormat("mantissa wider than 53 bits"));
        }
        if exponent_bits == 0 {
            return Err(FloatError::InvalidFormat("exponent needs at least 1 bit"));
        }
        if exponent_bits > 16 {
            return Err(FloatError::InvalidFormat("exponent wider than 16 bits"));
        }
        // An A-bit alignment register cannot have zero width: with no margin
        // the adder's feasibility inequality pits a negative left side against
        // a positive right side, so such formats are rejected outright.
        if margin_bits == 0 {
            return Err(FloatError::InvalidFormat("alignment margin needs at least 1 bit"));
        }
        if margin_bits > 32 {
            return Err(FloatError::InvalidFormat("alignment margin wider than 32 bits"));
        }
        let fmt = Self {
            mantissa_bits,
            exponent_bits,
            exponent_offset,
            margin_bits,
        };
        // Keep every representable value (and its ulp) inside the normal f64
        // range so that decode() is exact.
        let lo = fmt.true_exponent_lsb(0);
        let hi = fmt.true_exponent_lsb(fmt.max_exponent_field()) + mantissa_bits as i64;
        if lo < -960 || hi > 960 {
            return Err(FloatError::InvalidFormat("exponent range exceeds f64 dynamic range"));
        }
        Ok(fmt)
    }

    pub fn mantissa_bits(&self) -> u32 {
        self.mantissa_bits
    }

    pub fn exponent_bits(&self) -> u32 {
        self.exponent_bits
    }

    pub fn exponent_offset(&self) -> i32 {
        self.exponent_offset
    }

    pub fn margin_bits(&self) -> u32 {
        self.margin_bits
    }

    fn max_exponent_field(&self) -> u32 {
        (1u32 << self.exponent_bits) - 1
    }

    /// True exponent of the least significant mantissa bit for a given field.
    fn true_exponent_lsb(&self, exponent_field: u32) -> i64 {
        exponent_field as i64 + self.exponent_offset as i64 - (self.mantissa_bits as i64 - 1)
    }

    /// Largest representable value.
    pub fn w_upper(&self) -> f64 {
        let m = ((1u64 << self.mantissa_bits) - 1) as f64;
        m * pow2(self.true_exponent_lsb(self.max_exponent_field()))
    }

    /// Smallest representable (positive) value, `2^offset`.
    pub fn w_lower(&self) -> f64 {
        pow2(self.exponent_offset as i64)
    }

    /// Ancilla qubits permanently consumed by one margined addition.
    pub fn consumed_per_add(&self) -> u64 {
        (self.margin_bits + self.margin_bits.ilog2() + 3) as u64
    }

    /// Encodes a positive value by truncation toward zero.
    ///
    /// The result is the largest representable value not exceeding `value`;
    /// the relative error is below `2^-(M-1)`.
    pub fn encode(&self, value: f64) -> Result<SoftValue, FloatError> {
        let (s, t) = split_positive(value).ok_or(FloatError::Underflow)?;
        if value < self.w_lower() {
            return Err(FloatError::Underflow);
        }
        if value > self.w_upper() {
            return Err(FloatError::Overflow);
        }
        let p = t + (63 - s.leading_zeros() as i64); // floor(log2 value)
        let exponent_field = p - self.exponent_offset as i64;
        debug_assert!(exponent_field >= 0 && exponent_field <= self.max_exponent_field() as i64);
        // Align s so its top M bits become the mantissa.
        let shift = p - (self.mantissa_bits as i64 - 1) - t;
        let mantissa = if shift >= 0 {
            s >> shift.min(63)
        } else {
            s << ((-shift) as u32)
        };
        debug_assert!(mantissa >= 1 << (self.mantissa_bits - 1) && mantissa < 1 << self.mantissa_bits);
        Ok(SoftValue {
            mantissa,
            exponent_field: exponent_field as u32,
            format: *self,
        })
    }
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "M{}E{}A{}off{}",
            self.mantissa_bits, self.exponent_bits, self.margin_bits, self.exponent_offset
        )
    }
}

/// A bit-exact value in a [`FloatFormat`]: normalized mantissa in
/// `[2^(M-1), 2^M)` plus an exponent field in `[0, 2^E)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SoftValue {
    mantissa: u64,
    exponent_field: u32,
    format: FloatFormat,
}

impl SoftValue {
    /// Reassembles a value from raw register fields.
    pub fn from_fields(mantissa: u64, exponent_field: u32, format: FloatFormat) -> Result<Self, FloatError> {
        if mantissa < 1 << (format.mantissa_bits - 1) || mantissa >= 1 << format.mantissa_bits {
            return Err(FloatError::InvalidFormat("mantissa not normalized"));
        }
        if exponent_field > format.max_exponent_field() {
            return Err(FloatError::InvalidFormat("exponent field out of range"));
        }
        Ok(Self {
            mantissa,
            exponent_field,
            format,
        })
    }

    pub fn mantissa(&self) -> u64 {
        self.mantissa
    }

    pub fn exponent_field(&self) -> u32 {
        self.exponent_field
    }

    pub fn format(&self) -> FloatFormat {
        self.format
    }

    /// Exact decoded value, `mantissa * 2^(e + offset - (M-1))`.
    pub fn decode(&self) -> f64 {
        self.mantissa as f64 * pow2(self.format.true_exponent_lsb(self.exponent_field))
    }

    /// Multiplies by `2^n` by shifting the exponent field; the mantissa is
    /// untouched and no ancillas are consumed.
    pub fn scale_pow2(&self, n: i32) -> Result<Self, FloatError> {
        let e = self.exponent_field as i64 + n as i64;
        if e < 0 {
            return Err(FloatError::Underflow);
        }
        if e > self.format.max_exponent_field() as i64 {
            return Err(FloatError::Overflow);
        }
        Ok(Self {
            exponent_field: e as u32,
            ..*self
        })
    }

    /// Margined addition: `self` owns the `A`-bit alignment margin, so the
    /// other operand's exponent may exceed this one's by at most `A`. The
    /// result is the exact sum truncated toward zero to the format, and the
    /// ledger accrues the adder's non-uncomputable ancillas.
    pub fn add_margined(&self, other: &SoftValue, ledger: &mut AncillaLedger) -> Result<Self, FloatError> {
        if self.format != other.format {
            return Err(FloatError::FormatMismatch);
        }
        let fmt = self.format;
        let ea = self.exponent_field as i64;
        let eb = other.exponent_field as i64;
        let sum: u128 = if eb > ea {
            let gap = (eb - ea) as u32;
            if gap > fmt.margin_bits {
                return Err(FloatError::Margin {
                    gap,
                    margin: fmt.margin_bits,
                });
            }
            ((other.mantissa as u128) << gap) + self.mantissa as u128
        } else {
            // The other operand's low bits shift into workspace that is
            // uncomputed afterwards; only its aligned integer part survives.
            let gap = ea - eb;
            let aligned = if gap >= 64 { 0 } else { other.mantissa >> gap };
            self.mantissa as u128 + aligned as u128
        };
        let width = 128 - sum.leading_zeros() as i64;
        let drop = width - fmt.mantissa_bits as i64;
        debug_assert!(drop >= 0);
        let e_res = ea + drop;
        if e_res > fmt.max_exponent_field() as i64 {
            return Err(FloatError::Overflow);
        }
        ledger.consume(fmt.consumed_per_add());
        Ok(Self {
            mantissa: (sum >> drop) as u64,
            exponent_field: e_res as u32,
            format: fmt,
        })
    }
}

impl fmt::Display for SoftValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m:{} e:{} @{}", self.mantissa, self.exponent_field, self.format)
    }
}

/// Running count of ancilla qubits: `consumed` grows monotonically (qubits
/// that can never be uncomputed), while reusable workspace is acquired and
/// released around each operation and only its high-water mark is kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AncillaLedger {
    consumed: u64,
    reusable_in_use: u64,
    reusable_peak: u64,
}

impl AncillaLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn consume(&mut self, qubits: u64) {
        self.consumed += qubits;
    }

    pub fn acquire_reusable(&mut self, qubits: u64) {
        self.reusable_in_use += qubits;
        self.reusable_peak = self.reusable_peak.max(self.reusable_in_use);
    }

    pub fn release_reusable(&mut self, qubits: u64) {
        debug_assert!(self.reusable_in_use >= qubits);
        self.reusable_in_use -= qubits;
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn reusable_peak(&self) -> u64 {
        self.reusable_peak
    }
}

/// Computes `sum(coeffs[i] * values[i])` with every intermediate product and
/// partial sum truncated to the common format's mantissa width, modeling the
/// weighted-sum block that runs in uncomputable workspace registers.
///
/// `workspace_qubits` is the caller-configured workspace footprint; it is
/// acquired for the duration of the operation and released afterwards, so the
/// ledger's `consumed` count is untouched.
pub fn weighted_sum(
    coeffs: &[f64],
    values: &[SoftValue],
    ledger: &mut AncillaLedger,
    workspace_qubits: u64,
) -> Result<SoftValue, FloatError> {
    assert_eq!(coeffs.len(), values.len(), "one coefficient per value");
    assert!(!values.is_empty(), "weighted sum needs at least one term");
    let fmt = values[0].format;
    if values.iter().any(|v| v.format != fmt) {
        return Err(FloatError::FormatMismatch);
    }
    ledger.acquire_reusable(workspace_qubits);
    let mut acc = Work::Zero;
    for (&c, v) in coeffs.iter().zip(values) {
        let term = Work::from_soft(v).mul_f64_trunc(c, fmt.mantissa_bits);
        acc = acc.add_trunc(term, fmt.mantissa_bits);
    }
    ledger.release_reusable(workspace_qubits);
    acc.into_soft(&fmt)
}

/// Signed format-truncated value used for workspace computations (weighted
/// sums, startup integration): `±mantissa * 2^lsb_exp` with the mantissa
/// normalized to the working mantissa width. Not a storable register value;
/// stored state stays unsigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Work {
    Zero,
    Val { neg: bool, mantissa: u64, lsb_exp: i64 },
}

impl Work {
    pub(crate) fn from_soft(v: &SoftValue) -> Self {
        Work::Val {
            neg: false,
            mantissa: v.mantissa,
            lsb_exp: v.format.true_exponent_lsb(v.exponent_field),
        }
    }

    /// Decomposes an f64 exactly, then truncates the magnitude to `m_bits`.
    pub(crate) fn from_f64_trunc(value: f64, m_bits: u32) -> Self {
        if value == 0.0 {
            return Work::Zero;
        }
        let neg = value < 0.0;
        let (s, t) = split_positive(value.abs()).expect("finite nonzero value");
        Self::normalize(neg, s as u128, t, m_bits)
    }

    pub(crate) fn to_f64(self) -> f64 {
        match self {
            Work::Zero => 0.0,
            Work::Val { neg, mantissa, lsb_exp } => {
                let mag = mantissa as f64 * pow2(lsb_exp);
                if neg {
                    -mag
                } else {
                    mag
                }
            }
        }
    }

    /// Truncates `raw * 2^lsb_exp` toward zero to an `m_bits` mantissa.
    fn normalize(neg: bool, raw: u128, lsb_exp: i64, m_bits: u32) -> Self {
        if raw == 0 {
            return Work::Zero;
        }
        let width = 128 - raw.leading_zeros() as i64;
        let drop = width - m_bits as i64;
        let (mantissa, lsb_exp) = if drop >= 0 {
            ((raw >> drop) as u64, lsb_exp + drop)
        } else {
            ((raw << (-drop) as u32) as u64, lsb_exp + drop)
        };
        Work::Val { neg, mantissa, lsb_exp }
    }

    pub(crate) fn mul_f64_trunc(self, c: f64, m_bits: u32) -> Self {
        let Work::Val { neg, mantissa, lsb_exp } = self else {
            return Work::Zero;
        };
        if c == 0.0 {
            return Work::Zero;
        }
        let (cs, ct) = split_positive(c.abs()).expect("finite nonzero coefficient");
        Self::normalize(neg ^ (c < 0.0), mantissa as u128 * cs as u128, lsb_exp + ct, m_bits)
    }

    pub(crate) fn add_trunc(self, other: Work, m_bits: u32) -> Self {
        // Same mantissa width on both sides, so the larger lsb exponent owns
        // the larger magnitude.
        let (hi, lo) = match (self, other) {
            (Work::Zero, w) | (w, Work::Zero) => return w,
            (Work::Val { lsb_exp: ae, .. }, Work::Val { lsb_exp: be, .. }) => {
                if ae >= be {
                    (self, other)
                } else {
                    (other, self)
                }
            }
        };
        let Work::Val { neg: hn, mantissa: hm, lsb_exp: he } = hi else { unreachable!() };
        let Work::Val { neg: ln, mantissa: lm, lsb_exp: le } = lo else { unreachable!() };
        let gap = he - le;
        if gap > 64 {
            // The small operand is entirely below the big one's ulp. Adding
            // leaves the register unchanged; subtracting borrows exactly one
            // unit in the last place after truncation toward zero.
            if hn == ln {
                return hi;
            }
            return if hm > 1 << (m_bits - 1) {
                Work::Val { neg: hn, mantissa: hm - 1, lsb_exp: he }
            } else {
                Work::Val { neg: hn, mantissa: (1 << m_bits) - 1, lsb_exp: he - 1 }
            };
        }
        let h = (hm as u128) << gap as u32;
        let l = lm as u128;
        if hn == ln {
            Self::normalize(hn, h + l, le, m_bits)
        } else if h == l {
            Work::Zero
        } else if h > l {
            Self::normalize(hn, h - l, le, m_bits)
        } else {
            Self::normalize(ln, l - h, le, m_bits)
        }
    }

    pub(crate) fn into_soft(self, fmt: &FloatFormat) -> Result<SoftValue, FloatError> {
        match self {
            Work::Zero => Err(FloatError::Underflow),
            Work::Val { neg: true, .. } => Err(FloatError::NegativeResult),
            Work::Val { neg: false, mantissa, lsb_exp } => {
                let e = lsb_exp + (fmt.mantissa_bits as i64 - 1) - fmt.exponent_offset as i64;
                if e < 0 {
                    return Err(FloatError::Underflow);
                }
                if e > fmt.max_exponent_field() as i64 {
                    return Err(FloatError::Overflow);
                }
                Ok(SoftValue {
                    mantissa,
                    exponent_field: e as u32,
                    format: *fmt,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn fmt(m: u32, e: u32, off: i32, a: u32) -> FloatFormat {
        FloatFormat::new(m, e, off, a).unwrap()
    }

    #[test]
    fn encode_power_of_two_is_exact() {
        let f = fmt(3, 3, -3, 1);
        let v = f.encode(1.0).unwrap();
        assert_eq!(v.mantissa(), 4);
        assert_eq!(v.exponent_field(), 3);
        assert_eq!(v.decode(), 1.0);
    }

    #[test]
    fn encode_truncates_toward_zero() {
        // 0.3 in an 8-bit mantissa: floor(0.3 * 2^9) = 153, 153/512.
        let f = fmt(8, 4, -8, 1);
        let v = f.encode(0.3).unwrap();
        assert_eq!(v.mantissa(), 153);
        assert_eq!(v.exponent_field(), 6);
        assert_eq!(v.decode(), 0.298828125);
        assert!((v.decode() - 0.3).abs() / 0.3 < 2f64.powi(-7));
    }

    #[test]
    fn encode_range_errors() {
        let f = fmt(4, 2, 0, 1);
        // w_lower = 1, w_upper = 15 * 2^(3 - 3) = 15.
        assert_eq!(f.w_lower(), 1.0);
        assert_eq!(f.w_upper(), 15.0);
        assert_eq!(f.encode(0.5), Err(FloatError::Underflow));
        assert_eq!(f.encode(15.5), Err(FloatError::Overflow));
        assert_eq!(f.encode(15.0).unwrap().decode(), 15.0);
        assert_eq!(f.encode(-1.0), Err(FloatError::Underflow));
        assert_eq!(f.encode(0.0), Err(FloatError::Underflow));
    }

    #[test]
    fn round_trip_on_representable_values() {
        let f = fmt(6, 3, -4, 1);
        for e in 0..8u32 {
            for m in 32..64u64 {
                let v = SoftValue::from_fields(m, e, f).unwrap();
                let back = f.encode(v.decode()).unwrap();
                assert_eq!(back, v);
            }
        }
    }

    #[test]
    fn scale_pow2_shifts_exponent_only() {
        let f = fmt(6, 4, -6, 1);
        let x = f.encode(10.0).unwrap();
        assert_eq!(x.scale_pow2(0).unwrap(), x);
        let half = x.scale_pow2(-1).unwrap();
        assert_eq!(half.decode(), 5.0);
        assert_eq!(half.mantissa(), x.mantissa());
        let y = f.encode(3.25).unwrap();
        assert_eq!(y.scale_pow2(3).unwrap().decode(), 26.0);
        assert_eq!(x.scale_pow2(-20), Err(FloatError::Underflow));
        assert_eq!(x.scale_pow2(20), Err(FloatError::Overflow));
    }

    #[test]
    fn add_margined_doubles_equal_values() {
        let f = fmt(5, 3, -2, 1);
        let mut ledger = AncillaLedger::new();
        let x = f.encode(3.5).unwrap();
        let y = x.add_margined(&x, &mut ledger).unwrap();
        assert_eq!(y.decode(), 7.0);
        assert_eq!(y.mantissa(), x.mantissa());
        assert_eq!(y.exponent_field(), x.exponent_field() + 1);
    }

    #[test]
    fn add_margined_exact_small_case() {
        // 1.0 + 1.5 with a 3-bit mantissa: exactly 2.5.
        let f = fmt(3, 3, -2, 1);
        let mut ledger = AncillaLedger::new();
        let a = f.encode(1.0).unwrap();
        let b = f.encode(1.5).unwrap();
        let s = a.add_margined(&b, &mut ledger).unwrap();
        assert_eq!(s.decode(), 2.5);
    }

    #[test]
    fn add_margined_checks_margin_and_overflow() {
        let f = fmt(4, 4, -4, 1);
        let mut ledger = AncillaLedger::new();
        let a = f.encode(1.0).unwrap();
        let b = f.encode(4.0).unwrap();
        // gap = 2 > margin 1, with b as the larger operand.
        assert_eq!(
            a.add_margined(&b, &mut ledger),
            Err(FloatError::Margin { gap: 2, margin: 1 })
        );
        // The reverse direction needs no margin: b's tail is truncated away.
        assert!(b.add_margined(&a, &mut ledger).is_ok());
        let top = f.encode(f.w_upper()).unwrap();
        assert_eq!(top.add_margined(&top, &mut ledger), Err(FloatError::Overflow));
    }

    #[test]
    fn ancilla_law_per_add() {
        for a in 1..=8u32 {
            let f = fmt(6, 4, -4, a);
            let mut ledger = AncillaLedger::new();
            let x = f.encode(2.0).unwrap();
            let n = 7u64;
            for _ in 0..n {
                x.add_margined(&x, &mut ledger).unwrap();
            }
            assert_eq!(ledger.consumed(), n * (a + a.ilog2() + 3) as u64);
        }
    }

    #[test]
    fn zero_margin_format_is_rejected() {
        assert_eq!(
            FloatFormat::new(4, 3, 0, 0),
            Err(FloatError::InvalidFormat("alignment margin needs at least 1 bit"))
        );
    }

    #[test]
    fn weighted_sum_identity_and_cancellation() {
        let f = fmt(8, 4, -8, 1);
        let mut ledger = AncillaLedger::new();
        let x = f.encode(1.375).unwrap();
        let id = weighted_sum(&[1.0], &[x], &mut ledger, 16).unwrap();
        assert_eq!(id, x);
        let same = weighted_sum(&[2.0, -1.0], &[x, x], &mut ledger, 16).unwrap();
        assert_eq!(same, x);
        assert_eq!(ledger.consumed(), 0);
        assert_eq!(ledger.reusable_peak(), 16);
    }

    #[test]
    fn weighted_sum_truncates_each_step() {
        // 0.7427*1 + 0.5*1 with an 8-bit mantissa:
        // 0.7427 truncates to 190/256, the sum 318/256 truncates to 159/128.
        let f = fmt(8, 4, -8, 1);
        let mut ledger = AncillaLedger::new();
        let one = f.encode(1.0).unwrap();
        let s = weighted_sum(&[0.7427, 0.5], &[one, one], &mut ledger, 0).unwrap();
        assert_eq!(s.decode(), 1.2421875);
    }

    #[test]
    fn weighted_sum_sign_and_range_errors() {
        let f = fmt(8, 4, -8, 1);
        let mut ledger = AncillaLedger::new();
        let one = f.encode(1.0).unwrap();
        assert_eq!(
            weighted_sum(&[-1.0], &[one], &mut ledger, 0),
            Err(FloatError::NegativeResult)
        );
        assert_eq!(
            weighted_sum(&[1.0, -1.0], &[one, one], &mut ledger, 0),
            Err(FloatError::Underflow)
        );
        assert_eq!(
            weighted_sum(&[1e9], &[one], &mut ledger, 0),
            Err(FloatError::Overflow)
        );
    }

    #[test]
    fn work_subtraction_borrows_across_large_gaps() {
        // (1.0 - tiny) truncated to 4 bits is 15/16.
        let a = Work::from_f64_trunc(1.0, 4);
        let tiny = Work::from_f64_trunc(1e-30, 4);
        let diff = a.add_trunc(tiny.mul_f64_trunc(-1.0, 4), 4);
        assert_eq!(diff.to_f64(), 0.9375);
        // Same-sign far addition leaves the value unchanged.
        assert_eq!(a.add_trunc(tiny, 4).to_f64(), 1.0);
    }

    #[test]
    fn display_is_bit_level() {
        let f = fmt(8, 4, -8, 1);
        let v = f.encode(0.3).unwrap();
        assert_eq!(v.to_string(), "m:153 e:6 @M8E4A1off-8");
    }
}
