//! Scalar amplitude and phase quantizers, plus the combinatorial index used
//! to report a beam or port subset.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Amplitude quantization grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AmplitudeGrid {
    /// 3-bit wideband amplitude: `0` then `(1/√2)^(7-k)` for `k` in 1..=7.
    Wb3Bit,
    /// 1-bit subband amplitude: `(1/√2)^(1-k)`.
    Sb1Bit,
    /// 4-bit reference amplitude: `0` then `2^(-(15-k)/4)` for `k` in 1..=15.
    Ref4Bit,
    /// 3-bit differential amplitude, same levels as [`AmplitudeGrid::Wb3Bit`].
    Sb3Bit,
}

impl AmplitudeGrid {
    pub fn cardinality(self) -> usize {
        match self {
            AmplitudeGrid::Wb3Bit | AmplitudeGrid::Sb3Bit => 8,
            AmplitudeGrid::Sb1Bit => 2,
            AmplitudeGrid::Ref4Bit => 16,
        }
    }

    /// Index of the top level (amplitude 1).
    pub fn max_index(self) -> usize {
        self.cardinality() - 1
    }

    pub fn bits(self) -> usize {
        match self {
            AmplitudeGrid::Wb3Bit | AmplitudeGrid::Sb3Bit => 3,
            AmplitudeGrid::Sb1Bit => 1,
            AmplitudeGrid::Ref4Bit => 4,
        }
    }

    fn level(self, k: usize) -> f64 {
        match self {
            AmplitudeGrid::Wb3Bit | AmplitudeGrid::Sb3Bit if k == 0 => 0.0,
            AmplitudeGrid::Wb3Bit | AmplitudeGrid::Sb3Bit => pow2_frac(7 - k, 2),
            AmplitudeGrid::Sb1Bit => pow2_frac(1 - k, 2),
            AmplitudeGrid::Ref4Bit if k == 0 => 0.0,
            AmplitudeGrid::Ref4Bit => pow2_frac(15 - k, 4),
        }
    }

    /// All levels in ascending order.
    pub fn levels(self) -> Vec<f64> {
        (0..self.cardinality()).map(|k| self.level(k)).collect()
    }
}

/// `2^(-e / d)` for `d` in {2, 4}, built from exact powers of two and fixed
/// constants so every call site sees bit-identical levels.
fn pow2_frac(e: usize, d: usize) -> f64 {
    const QUARTERS: [f64; 4] = [
        1.0,
        0.840_896_415_253_714_5,
        FRAC_1_SQRT_2,
        0.594_603_557_501_360_5,
    ];
    let whole = 1.0 / (1u64 << (e / d)) as f64;
    whole * QUARTERS[(e % d) * (4 / d)]
}

/// Phase-shift-keying alphabet size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PskConfig {
    n_psk: usize,
}

impl PskConfig {
    pub fn new(n_psk: usize) -> Result<Self> {
        match n_psk {
            4 | 8 | 16 => Ok(PskConfig { n_psk }),
            _ => Err(Error::config(
                "n_psk",
                format!("{n_psk} not in {{4, 8, 16}}"),
            )),
        }
    }

    pub fn qpsk() -> Self {
        PskConfig { n_psk: 4 }
    }

    pub fn n_psk(self) -> usize {
        self.n_psk
    }

    pub fn bits(self) -> usize {
        self.n_psk.trailing_zeros() as usize
    }
}

/// `exp(j2π c / n_psk)`.
pub fn psk_phase(c: usize, cfg: PskConfig) -> Result<C64> {
    Error::check_range("phase index", c, cfg.n_psk)?;
    Ok(C64::from_polar(1.0, 2.0 * PI * c as f64 / cfg.n_psk as f64))
}

/// Nearest PSK index to the argument of `z`.
pub fn quantize_phase(z: C64, cfg: PskConfig) -> usize {
    let n = cfg.n_psk as f64;
    let idx = (z.arg() * n / (2.0 * PI)).round().rem_euclid(n);
    idx as usize % cfg.n_psk
}

/// Amplitude of level `k` in `grid`.
pub fn amp_value(k: usize, grid: AmplitudeGrid) -> Result<f64> {
    Error::check_range("amplitude index", k, grid.cardinality())?;
    Ok(grid.level(k))
}

/// Nearest level of `grid` to `x`; ties go to the larger index.
pub fn quantize_amp(x: f64, grid: AmplitudeGrid) -> usize {
    let mut best = 0;
    let mut best_err = f64::INFINITY;
    for k in 0..grid.cardinality() {
        let err = (x - grid.level(k)).abs();
        if err <= best_err {
            best = k;
            best_err = err;
        }
    }
    best
}

/// Binomial coefficient `C(n, k)`; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Combinatorial-number-system index of a strictly increasing subset of
/// `[0, n)`: `Σ C(indices[i], i + 1)`.
pub fn comb_encode(indices: &[usize], n: usize) -> Result<u64> {
    for w in indices.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::MalformedPmi(format!(
                "subset {indices:?} is not strictly increasing"
            )));
        }
    }
    if let Some(&last) = indices.last() {
        Error::check_range("subset element", last, n)?;
    }
    Ok(indices
        .iter()
        .enumerate()
        .map(|(i, &x)| binomial(x, i + 1))
        .sum())
}

/// Inverse of [`comb_encode`].
pub fn comb_decode(code: u64, n: usize, l: usize) -> Result<Vec<usize>> {
    let total = binomial(n, l);
    if code >= total {
        return Err(Error::OutOfRange {
            what: "combinatorial code",
            value: code as usize,
            bound: total as usize,
        });
    }
    let mut out = vec![0; l];
    let mut rem = code;
    let mut upper = n;
    for i in (0..l).rev() {
        // largest x < upper with C(x, i+1) <= rem
        let mut x = upper - 1;
        while binomial(x, i + 1) > rem {
            x -= 1;
        }
        out[i] = x;
        rem -= binomial(x, i + 1);
        upper = x;
    }
    Ok(out)
}

/// Bits needed for a field taking `range` values: `⌈log2(range)⌉`.
pub fn field_width(range: u64) -> usize {
    if range <= 1 {
        0
    } else {
        (64 - (range - 1).leading_zeros()) as usize
    }
}
