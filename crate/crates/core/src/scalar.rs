//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

/// Element type tag stored in the `EMBD` header.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn tag(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// Real scalar usable by the condensation engine: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Native on-disk representation.
    const DTYPE: DType;

    /// Lossless for values that were produced by `from_f64` of the same type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable in every Scalar")
    }

    /// `(sin, cos)` through the crate's reduced-argument kernel.
    fn fast_sin_cos(self) -> (Self, Self);

    /// Element-wise [`Scalar::fast_sin_cos`] over a slice.
    fn fast_sin_cos_slice(x: &[Self], sin: &mut [Self], cos: &mut [Self]) {
        for ((&v, s), c) in x.iter().zip(sin.iter_mut()).zip(cos.iter_mut()) {
            (*s, *c) = v.fast_sin_cos();
        }
    }
}

impl Scalar for f32 {
    const DTYPE: DType = DType::F32;

    fn fast_sin_cos(self) -> (Self, Self) {
        let (s, c) = crate::trig::sin_cos(self as f64);
        (s as f32, c as f32)
    }
}

impl Scalar for f64 {
    const DTYPE: DType = DType::F64;

    fn fast_sin_cos(self) -> (Self, Self) {
        crate::trig::sin_cos(self)
    }

    fn fast_sin_cos_slice(x: &[Self], sin: &mut [Self], cos: &mut [Self]) {
        crate::trig::sin_cos_slice(x, sin, cos)
    }
}
