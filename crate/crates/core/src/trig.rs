//! Joint sine/cosine for moderate arguments, used on the hot path of CF estimation.
//!
//! Cody-Waite reduction by pi/2 (pi/2 split into 33-bit pieces, two refinement
//! steps) followed by the fdlibm minimax kernels on [-pi/4, pi/4]. Arguments with
//! `|x| >= 2^19 * pi/2` or non-finite values fall back to the standard library.

const INV_PIO2: f64 = 6.366_197_723_675_813_824_33e-1;
const PIO2_1: f64 = 1.570_796_326_734_125_614_17e0;
const PIO2_2: f64 = 6.077_100_506_303_965_976_60e-11;
const PIO2_2T: f64 = 2.022_266_248_795_950_631_54e-21;
const REDUCTION_LIMIT: f64 = 823_550.0;

const S1: f64 = -1.666_666_666_666_663_243_48e-1;
const S2: f64 = 8.333_333_333_322_489_461_24e-3;
const S3: f64 = -1.984_126_982_985_794_931_34e-4;
const S4: f64 = 2.755_731_370_707_006_767_89e-6;
const S5: f64 = -2.505_076_025_340_686_341_95e-8;
const S6: f64 = 1.589_690_995_211_550_102_21e-10;

const C1: f64 = 4.166_666_666_666_660_190_37e-2;
const C2: f64 = -1.388_888_888_887_410_957_49e-3;
const C3: f64 = 2.480_158_728_947_672_941_78e-5;
const C4: f64 = -2.755_731_435_139_066_330_35e-7;
const C5: f64 = 2.087_572_321_298_174_827_90e-9;
const C6: f64 = -1.135_964_755_778_819_482_65e-11;

#[inline(always)]
fn kernel_sin(x: f64, y: f64) -> f64 {
    let z = x * x;
    let v = z * x;
    let r = S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)));
    x - ((z * (0.5 * y - v * r) - y) - v * S1)
}

#[inline(always)]
fn kernel_cos(x: f64, y: f64) -> f64 {
    let z = x * x;
    let r = z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
    let hz = 0.5 * z;
    let w = 1.0 - hz;
    w + (((1.0 - w) - hz) + (z * r - x * y))
}

const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;

/// Kernel evaluation without the range guard; `|x| < REDUCTION_LIMIT` required.
#[inline(always)]
fn reduced_sin_cos(x: f64) -> (f64, f64) {
    // round-half-even via the 1.5 * 2^52 trick
    let n = (x * INV_PIO2 + ROUND_MAGIC) - ROUND_MAGIC;
    let r = x - n * PIO2_1;
    // pi/2 to 118 bits: PIO2_1 + PIO2_2 + PIO2_2T
    let w = n * PIO2_2;
    let r2 = r - w;
    let w = n * PIO2_2T - ((r - r2) - w);
    let y0 = r2 - w;
    let y1 = (r2 - y0) - w;
    let s = kernel_sin(y0, y1);
    let c = kernel_cos(y0, y1);
    let q = n as i64;
    let (s, c) = if q & 1 == 0 { (s, c) } else { (c, s) };
    let s = if q & 2 == 0 { s } else { -s };
    let c = if q.wrapping_add(1) & 2 == 0 { c } else { -c };
    (s, c)
}

/// Returns `(sin x, cos x)`.
#[inline]
pub fn sin_cos(x: f64) -> (f64, f64) {
    if x.abs() < REDUCTION_LIMIT {
        reduced_sin_cos(x)
    } else {
        x.sin_cos()
    }
}

/// Slice form of [`sin_cos`].
pub fn sin_cos_slice(x: &[f64], sin: &mut [f64], cos: &mut [f64]) {
    let mut all_reduced = true;
    for ((&v, s), c) in x.iter().zip(sin.iter_mut()).zip(cos.iter_mut()) {
        all_reduced &= v.abs() < REDUCTION_LIMIT;
        (*s, *c) = reduced_sin_cos(v);
    }
    if !all_reduced {
        for ((&v, s), c) in x.iter().zip(sin.iter_mut()).zip(cos.iter_mut()) {
            if !(v.abs() < REDUCTION_LIMIT) {
                (*s, *c) = v.sin_cos();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agrees_with_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        for i in 0..200_000 {
            let scale = [1.0, 10.0, 1e3, 1e5][i % 4];
            let x: f64 = rng.random_range(-scale..scale);
            let (s, c) = sin_cos(x);
            let (es, ec) = x.sin_cos();
            worst = worst.max((s - es).abs()).max((c - ec).abs());
        }
        assert!(worst < 4e-16, "worst abs error {worst:e}");
        assert_eq!(sin_cos(0.0), (0.0, 1.0));
        let (s, c) = sin_cos(1e9);
        assert_eq!((s, c), 1e9_f64.sin_cos());
        assert!(sin_cos(f64::NAN).0.is_nan());
    }

    #[test]
    fn slice_form_matches_scalar_form() {
        let xs = [0.3, -2.0, 7.5, 1e7, f64::INFINITY, -0.0, 3.0e5];
        let mut s = [0.0; 7];
        let mut c = [0.0; 7];
        sin_cos_slice(&xs, &mut s, &mut c);
        for i in 0..xs.len() {
            let (es, ec) = sin_cos(xs[i]);
            assert!(s[i] == es || (s[i].is_nan() && es.is_nan()));
            assert!(c[i] == ec || (c[i].is_nan() && ec.is_nan()));
        }
    }
}
