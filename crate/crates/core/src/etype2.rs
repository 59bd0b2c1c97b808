//! Enhanced Type II codebook and its port-selection variant.
//!
//! Per layer the `2L x n_3` matrix of subband coefficients is compressed onto
//! `m_v` columns of the IDFT over subbands. After selecting the bins, delays
//! are remapped so the strongest coefficient sits at bin 0, and only a
//! budget of the strongest coefficients is reported through a bitmap.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::beamgrid::AntennaConfig;
use crate::linalg::subband_targets;
use crate::pmi::{EType2Layer, PmiEType2, SpatialChoice};
use crate::quantizers::{
    amp_value, comb_decode, comb_encode, psk_phase, quantize_amp, quantize_phase, AmplitudeGrid,
    PskConfig,
};
use crate::type2::{basis_matrix, check_basis_size, project, select_spatial};
use crate::{ChannelRealization, Error, Precoder, Result, C64};

/// Subband counts above this use the windowed frequency-basis indicator.
pub const WINDOW_THRESHOLD: usize = 19;

/// Small positive rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ratio {
    pub num: usize,
    pub den: usize,
}

impl Ratio {
    pub const fn new(num: usize, den: usize) -> Self {
        Ratio { num, den }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Reduced form, so that `2/8` and `1/4` compare equal.
    pub fn reduced(self) -> Ratio {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(self.num, self.den).max(1);
        Ratio::new(self.num / g, self.den / g)
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl std::str::FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Ratio> {
        let bad = || Error::config("ratio", format!("'{s}' is not of the form a/b"));
        let (a, b) = s.split_once('/').ok_or_else(bad)?;
        let num = a.trim().parse().map_err(|_| bad())?;
        let den: usize = b.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        Ok(Ratio::new(num, den))
    }
}

/// `(L, β)` pairs accepted by [`EType2Params::validate`].
pub const SUPPORTED_L_BETA: [(usize, Ratio); 7] = [
    (2, Ratio::new(1, 4)),
    (2, Ratio::new(1, 2)),
    (4, Ratio::new(1, 4)),
    (4, Ratio::new(1, 2)),
    (4, Ratio::new(3, 4)),
    (6, Ratio::new(1, 2)),
    (6, Ratio::new(3, 4)),
];

/// Frequency-compression parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EType2Params {
    pub l_beams: usize,
    pub p_v: Ratio,
    pub beta: Ratio,
    /// Subbands per CQI subband, 1 or 2.
    pub r: usize,
    pub n_3: usize,
}

impl EType2Params {
    /// Number of frequency basis vectors, `⌈p_v n_3 / r⌉`.
    pub fn m_v(&self) -> usize {
        (self.p_v.num * self.n_3).div_ceil(self.p_v.den * self.r)
    }

    /// Total coefficient budget across layers, `⌊2 L m_v υ β⌋`.
    pub fn budget(&self, rank: usize) -> usize {
        2 * self.l_beams * self.m_v() * rank * self.beta.num / self.beta.den
    }

    /// Whether the windowed indicator `i15` is reported.
    pub fn windowed(&self) -> bool {
        self.n_3 > WINDOW_THRESHOLD
    }

    pub fn validate(&self, rank: usize, port_selection: bool) -> Result<()> {
        let p_v = self.p_v.reduced();
        if p_v != Ratio::new(1, 4) && p_v != Ratio::new(1, 8) {
            return Err(Error::config(
                "p_v",
                format!("{} not in {{1/4, 1/8}}", self.p_v),
            ));
        }
        let beta = self.beta.reduced();
        if ![Ratio::new(1, 4), Ratio::new(1, 2), Ratio::new(3, 4)].contains(&beta) {
            return Err(Error::config(
                "beta",
                format!("{} not in {{1/4, 1/2, 3/4}}", self.beta),
            ));
        }
        if !matches!(self.r, 1 | 2) {
            return Err(Error::config("R", format!("{}, expected 1 or 2", self.r)));
        }
        if self.n_3 == 0 {
            return Err(Error::config("n_3", "at least one subband required"));
        }
        if port_selection {
            if !matches!(self.l_beams, 2 | 4) {
                return Err(Error::config(
                    "L",
                    format!("{} ports per polarization, expected 2 or 4", self.l_beams),
                ));
            }
        } else if !SUPPORTED_L_BETA.contains(&(self.l_beams, beta)) {
            return Err(Error::config(
                "L/beta",
                format!("combination ({}, {}) unsupported", self.l_beams, self.beta),
            ));
        }
        if self.l_beams == 6 && rank > 2 {
            return Err(Error::config("L", "six beams only up to rank 2"));
        }
        if self.windowed() && 2 * self.m_v() > self.n_3 {
            return Err(Error::config(
                "p_v",
                "frequency window exceeds the subband count",
            ));
        }
        Ok(())
    }
}

/// Reporting configuration of Enhanced Type II and its port-selection variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EType2Config {
    pub antenna: AntennaConfig,
    pub rank: usize,
    pub params: EType2Params,
    pub n_psk: usize,
    pub port_selection: Option<usize>,
}

impl EType2Config {
    pub fn validate(&self) -> Result<()> {
        self.antenna.validate()?;
        if self.antenna.ng != 1 {
            return Err(Error::config("ng", "Enhanced Type II needs a single panel"));
        }
        if !(1..=4).contains(&self.rank) {
            return Err(Error::config(
                "rank",
                format!("rank {}, expected 1 to 4", self.rank),
            ));
        }
        PskConfig::new(self.n_psk)?;
        self.params
            .validate(self.rank, self.port_selection.is_some())?;
        check_basis_size(&self.antenna, self.params.l_beams, self.port_selection)
    }

    pub fn psk(&self) -> PskConfig {
        PskConfig::new(self.n_psk).expect("validated n_psk")
    }
}

/// IDFT basis over subbands: column `f` holds `exp(j2π t n3[f] / n_3)`.
pub fn fd_basis(n_3: usize, n3: &[usize]) -> Result<DMatrix<C64>> {
    check_bins(n3, n_3)?;
    Ok(DMatrix::from_fn(n_3, n3.len(), |t, f| {
        C64::from_polar(1.0, 2.0 * PI * (t * n3[f]) as f64 / n_3 as f64)
    }))
}

fn check_bins(n3: &[usize], n_3: usize) -> Result<()> {
    for (k, &n) in n3.iter().enumerate() {
        Error::check_range("n3", n, n_3)?;
        if n3[..k].contains(&n) {
            return Err(Error::config("n3", format!("duplicate bin {n}")));
        }
    }
    Ok(())
}

/// Shifts every bin by `-n3[f_star]` modulo `n_3` and rotates the list so
/// that position `f_star` comes first.
pub fn remap_fd(n3: &[usize], f_star: usize, n_3: usize) -> Result<Vec<usize>> {
    Error::check_range("f_star", f_star, n3.len())?;
    check_bins(n3, n_3)?;
    let anchor = n3[f_star];
    Ok((0..n3.len())
        .map(|k| (n3[(f_star + k) % n3.len()] + n_3 - anchor) % n_3)
        .collect())
}

/// Frequency-basis indicator `i16` of a remapped bin list (`n3[0] = 0`).
/// With `i15 = Some(s)` the nonzero bins must fall in the window of `2 m_v`
/// positions where bin 0 sits at position `s`.
pub fn fd_indicator(n3: &[usize], n_3: usize, i15: Option<usize>) -> Result<u64> {
    check_bins(n3, n_3)?;
    if n3.first() != Some(&0) {
        return Err(Error::MalformedPmi("frequency bins must start at 0".into()));
    }
    let m_v = n3.len();
    let mut pos: Vec<usize> = match i15 {
        None => n3[1..].iter().map(|&n| n - 1).collect(),
        Some(s) => {
            let width = 2 * m_v;
            Error::check_range("i15", s, width)?;
            n3[1..]
                .iter()
                .map(|&n| {
                    let p = (n + s) % n_3;
                    if p >= width {
                        return Err(Error::MalformedPmi(format!("bin {n} outside window {s}")));
                    }
                    Ok(if p < s { p } else { p - 1 })
                })
                .collect::<Result<_>>()?
        }
    };
    pos.sort_unstable();
    let span = match i15 {
        None => n_3 - 1,
        Some(_) => 2 * m_v - 1,
    };
    comb_encode(&pos, span)
}

/// Inverse of [`fd_indicator`]; returns ascending bins starting at 0.
pub fn fd_from_indicator(
    i16: u64,
    n_3: usize,
    m_v: usize,
    i15: Option<usize>,
) -> Result<Vec<usize>> {
    let span = match i15 {
        None => n_3 - 1,
        Some(_) => 2 * m_v - 1,
    };
    let pos = comb_decode(i16, span, m_v - 1)?;
    let mut n3 = vec![0];
    for p in pos {
        n3.push(match i15 {
            None => p + 1,
            Some(s) => {
                let p = if p < s { p } else { p + 1 };
                (p + n_3 - s) % n_3
            }
        });
    }
    n3.sort_unstable();
    Ok(n3)
}

/// Number of values of `i16`.
pub fn fd_indicator_range(n_3: usize, m_v: usize, windowed: bool) -> u64 {
    let span = if windowed { 2 * m_v - 1 } else { n_3 - 1 };
    crate::quantizers::binomial(span, m_v - 1)
}

/// Unquantized layer: remapped bins, bitmap and normalized coefficients
/// (`c[i * m_v + f]`, zero where the bitmap is clear).
#[derive(Debug, Clone, PartialEq)]
pub struct EType2LayerAnalysis {
    pub n3: Vec<usize>,
    pub strongest: usize,
    pub bitmap: Vec<bool>,
    pub coefficients: Vec<C64>,
}

/// Unquantized encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct EType2Analysis {
    pub spatial: SpatialChoice,
    pub i15: Option<usize>,
    pub layers: Vec<EType2LayerAnalysis>,
}

/// Retention rule for the spatial-frequency coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    /// Keep the `⌊2 L m_v υ β⌋` strongest across layers.
    Budget,
    /// Keep every coefficient.
    All,
}

/// IDFT of a layer's `[t][i]` coefficients: `[i][n]`.
pub(crate) fn delay_spectrum(coef: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let n_3 = coef.len();
    let n = coef[0].len();
    (0..n)
        .map(|i| {
            (0..n_3)
                .map(|bin| {
                    coef.iter()
                        .enumerate()
                        .map(|(t, c)| {
                            c[i] * C64::from_polar(
                                1.0,
                                -2.0 * PI * (t * bin % n_3) as f64 / n_3 as f64,
                            )
                        })
                        .sum::<C64>()
                        / n_3 as f64
                })
                .collect()
        })
        .collect()
}

fn bin_energy(spec: &[Vec<C64>]) -> Vec<f64> {
    let n_3 = spec[0].len();
    (0..n_3)
        .map(|bin| spec.iter().map(|row| row[bin].norm_sqr()).sum())
        .collect()
}

fn top_indices(score: &[f64], take: usize, allowed: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..score.len()).filter(|&k| allowed(k)).collect();
    idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    idx.truncate(take);
    idx
}

fn strongest_coefficient(spec: &[Vec<C64>], bins: &[usize]) -> (usize, usize) {
    let mut best = (0, bins[0]);
    let mut mag = -1.0;
    for (i, row) in spec.iter().enumerate() {
        for &b in bins {
            if row[b].norm() > mag {
                mag = row[b].norm();
                best = (i, b);
            }
        }
    }
    best
}

struct LayerBins {
    bins: Vec<usize>,
    strongest: (usize, usize),
}

fn choose_bins(
    spectra: &[Vec<Vec<C64>>],
    params: &EType2Params,
) -> (Option<usize>, Vec<LayerBins>) {
    let n_3 = params.n_3;
    let m_v = params.m_v();
    if !params.windowed() {
        let layers = spectra
            .iter()
            .map(|spec| {
                let bins = top_indices(&bin_energy(spec), m_v, |_| true);
                let strongest = strongest_coefficient(spec, &bins);
                LayerBins { bins, strongest }
            })
            .collect();
        return (None, layers);
    }
    let width = 2 * m_v;
    let anchors: Vec<(usize, usize)> = spectra
        .iter()
        .map(|spec| strongest_coefficient(spec, &(0..n_3).collect::<Vec<_>>()))
        .collect();
    let energies: Vec<Vec<f64>> = spectra.iter().map(|s| bin_energy(s)).collect();
    let mut best: Option<(f64, usize, Vec<LayerBins>)> = None;
    for s in 0..width {
        let mut total = 0.0;
        let mut layers = Vec::with_capacity(spectra.len());
        for (anchor, energy) in anchors.iter().zip(&energies) {
            let n_s = anchor.1;
            let window: Vec<usize> = (0..width)
                .filter(|&p| p != s)
                .map(|p| (n_s + p + n_3 - s) % n_3)
                .collect();
            let mut bins = vec![n_s];
            bins.extend(top_indices(energy, m_v - 1, |b| window.contains(&b)));
            total += bins.iter().map(|&b| energy[b]).sum::<f64>();
            layers.push(LayerBins {
                bins,
                strongest: *anchor,
            });
        }
        if best.as_ref().is_none_or(|(e, _, _)| total > *e) {
            best = Some((total, s, layers));
        }
    }
    let (_, s, layers) = best.expect("window of positive width");
    (Some(s), layers)
}

/// Spatial selection, frequency compression and coefficient retention
/// without quantization.
pub fn analyze_etype2(
    channel: &ChannelRealization,
    config: &EType2Config,
    retention: Retention,
) -> Result<EType2Analysis> {
    config.validate()?;
    channel.check_config(&config.antenna)?;
    if channel.n_3() != config.params.n_3 {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} subbands, configuration has {}",
            channel.n_3(),
            config.params.n_3
        )));
    }
    let l = config.params.l_beams;
    let (targets, _) = subband_targets(channel, config.rank)?;
    let spatial = select_spatial(&targets, &config.antenna, l, config.port_selection)?;
    let basis = basis_matrix(&config.antenna, l, &spatial, config.port_selection)?;
    let coef = project(&targets, &basis);
    let spectra: Vec<Vec<Vec<C64>>> = coef.iter().map(|c| delay_spectrum(c)).collect();
    let (i15, chosen) = choose_bins(&spectra, &config.params);
    let n_3 = config.params.n_3;
    let m_v = config.params.m_v();

    // remapped bins and raw coefficients per layer, `[i * m_v + f]`
    let mut layers = Vec::with_capacity(config.rank);
    let mut raw = Vec::with_capacity(config.rank);
    for (spec, lb) in spectra.iter().zip(&chosen) {
        let (i_star, n_star) = lb.strongest;
        let mut n3: Vec<usize> = lb.bins.iter().map(|&b| (b + n_3 - n_star) % n_3).collect();
        n3.sort_unstable();
        let mut x = vec![C64::new(0.0, 0.0); 2 * l * m_v];
        for i in 0..2 * l {
            for (f, &n) in n3.iter().enumerate() {
                x[i * m_v + f] = spec[i][(n + n_star) % n_3];
            }
        }
        raw.push(x);
        layers.push(EType2LayerAnalysis {
            n3,
            strongest: i_star,
            bitmap: vec![false; 2 * l * m_v],
            coefficients: Vec::new(),
        });
    }

    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (layer, la) in layers.iter_mut().enumerate() {
        la.bitmap[la.strongest * m_v] = true;
        for k in 0..2 * l * m_v {
            if k != la.strongest * m_v {
                candidates.push((layer, k));
            }
        }
    }
    let keep = match retention {
        Retention::All => candidates.len(),
        Retention::Budget => config
            .params
            .budget(config.rank)
            .saturating_sub(config.rank),
    };
    candidates.sort_by(|a, b| {
        raw[b.0][b.1]
            .norm()
            .total_cmp(&raw[a.0][a.1].norm())
            .then(a.cmp(b))
    });
    for &(layer, k) in candidates.iter().take(keep) {
        layers[layer].bitmap[k] = true;
    }
    for (la, x) in layers.iter_mut().zip(&raw) {
        let reference = x[la.strongest * m_v];
        la.coefficients = x
            .iter()
            .zip(&la.bitmap)
            .map(|(c, &on)| {
                if on && reference.norm() > 0.0 {
                    c / reference
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        la.coefficients[la.strongest * m_v] = C64::new(1.0, 0.0);
    }
    Ok(EType2Analysis {
        spatial,
        i15,
        layers,
    })
}

/// Precoder from per-layer bins and `[i * m_v + f]` coefficients.
pub fn reconstruct_etype2(
    basis: &DMatrix<C64>,
    n_3: usize,
    layers: &[(Vec<usize>, Vec<C64>)],
) -> Result<Precoder> {
    let n_coef = 2 * basis.ncols();
    let mut per_layer = Vec::with_capacity(layers.len());
    for (n3, c) in layers {
        let m_v = n3.len();
        if c.len() != n_coef * m_v {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} beams and {} bins",
                c.len(),
                n_coef,
                m_v
            )));
        }
        let fd = fd_basis(n_3, n3)?;
        let subbands: Vec<Vec<C64>> = (0..n_3)
            .map(|t| {
                (0..n_coef)
                    .map(|i| (0..m_v).map(|f| c[i * m_v + f] * fd[(t, f)]).sum())
                    .collect()
            })
            .collect();
        per_layer.push(subbands);
    }
    crate::type2::reconstruct(basis, &per_layer)
}

/// Precoder of an unquantized analysis.
pub fn reconstruct_analysis(analysis: &EType2Analysis, config: &EType2Config) -> Result<Precoder> {
    let basis = basis_matrix(
        &config.antenna,
        config.params.l_beams,
        &analysis.spatial,
        config.port_selection,
    )?;
    let layers: Vec<(Vec<usize>, Vec<C64>)> = analysis
        .layers
        .iter()
        .map(|l| (l.n3.clone(), l.coefficients.clone()))
        .collect();
    reconstruct_etype2(&basis, config.params.n_3, &layers)
}

/// Quantizes an analysis into a PMI.
pub fn quantize_etype2(analysis: &EType2Analysis, config: &EType2Config) -> Result<PmiEType2> {
    config.validate()?;
    let l = config.params.l_beams;
    let m_v = config.params.m_v();
    let psk = config.psk();
    let layers = analysis
        .layers
        .iter()
        .map(|la| {
            let ref_pol = la.strongest / l;
            let mut i23 = [0usize; 2];
            i23[ref_pol] = AmplitudeGrid::Ref4Bit.max_index();
            let other = 1 - ref_pol;
            let peak = (other * l * m_v..(other + 1) * l * m_v)
                .filter(|&k| la.bitmap[k])
                .map(|k| la.coefficients[k].norm())
                .fold(0.0, f64::max);
            i23[other] = quantize_amp(peak.min(1.0), AmplitudeGrid::Ref4Bit);
            let mut i24 = Vec::new();
            let mut i25 = Vec::new();
            for k in 0..2 * l * m_v {
                if !la.bitmap[k] || k == la.strongest * m_v {
                    continue;
                }
                let c = la.coefficients[k];
                let p1 = amp_value(i23[k / (l * m_v)], AmplitudeGrid::Ref4Bit)?;
                let rel = if p1 > 0.0 {
                    (c.norm() / p1).min(1.0)
                } else {
                    0.0
                };
                i24.push(quantize_amp(rel, AmplitudeGrid::Sb3Bit));
                i25.push(quantize_phase(c, psk));
            }
            Ok(EType2Layer {
                n3: la.n3.clone(),
                bitmap: la.bitmap.clone(),
                i18: la.strongest,
                i23,
                i24,
                i25,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PmiEType2 {
        spatial: analysis.spatial.clone(),
        i15: analysis.i15,
        layers,
    })
}

/// UE-side encoder. With port selection, `channel` is the channel seen
/// through the beamformed ports.
pub fn encode_etype2(channel: &ChannelRealization, config: &EType2Config) -> Result<PmiEType2> {
    quantize_etype2(&analyze_etype2(channel, config, Retention::Budget)?, config)
}

/// Checks the PMI structure against the configuration.
pub fn check_pmi(pmi: &PmiEType2, config: &EType2Config) -> Result<()> {
    config.validate()?;
    let params = &config.params;
    let l = params.l_beams;
    let m_v = params.m_v();
    basis_matrix(&config.antenna, l, &pmi.spatial, config.port_selection)?;
    if pmi.layers.len() != config.rank {
        return Err(Error::MalformedPmi(format!(
            "{} layers for rank {}",
            pmi.layers.len(),
            config.rank
        )));
    }
    match (pmi.i15, params.windowed()) {
        (Some(s), true) => Error::check_range("i15", s, 2 * m_v)?,
        (None, false) => {}
        _ => {
            return Err(Error::MalformedPmi(
                "i15 presence does not match the subband count".into(),
            ))
        }
    }
    let mut total = 0;
    for layer in &pmi.layers {
        if layer.n3.len() != m_v || layer.n3.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedPmi("n3 must be m_v ascending bins".into()));
        }
        fd_indicator(&layer.n3, params.n_3, pmi.i15)?;
        if layer.bitmap.len() != 2 * l * m_v {
            return Err(Error::MalformedPmi("bitmap length mismatch".into()));
        }
        Error::check_range("i18", layer.i18, 2 * l)?;
        if !layer.bitmap[layer.i18 * m_v] {
            return Err(Error::MalformedPmi(
                "strongest coefficient not in bitmap".into(),
            ));
        }
        let ref_pol = layer.i18 / l;
        if layer.i23[ref_pol] != AmplitudeGrid::Ref4Bit.max_index() {
            return Err(Error::MalformedPmi(
                "reference polarization amplitude must be 15".into(),
            ));
        }
        Error::check_range(
            "i23",
            layer.i23[1 - ref_pol],
            AmplitudeGrid::Ref4Bit.cardinality(),
        )?;
        let nz = layer.bitmap.iter().filter(|&&b| b).count();
        total += nz;
        if layer.i24.len() != nz - 1 || layer.i25.len() != nz - 1 {
            return Err(Error::MalformedPmi(format!(
                "bitmap has {nz} entries but {} amplitudes and {} phases",
                layer.i24.len(),
                layer.i25.len()
            )));
        }
        for &k in &layer.i24 {
            Error::check_range("i24", k, AmplitudeGrid::Sb3Bit.cardinality())?;
        }
        for &c in &layer.i25 {
            Error::check_range("i25", c, config.n_psk)?;
        }
    }
    if total > params.budget(config.rank).max(config.rank) {
        return Err(Error::MalformedPmi(format!(
            "{total} coefficients exceed the budget {}",
            params.budget(config.rank)
        )));
    }
    Ok(())
}

/// Dequantized `(bins, coefficients)` per layer.
pub fn dequantize(pmi: &PmiEType2, config: &EType2Config) -> Result<Vec<(Vec<usize>, Vec<C64>)>> {
    check_pmi(pmi, config)?;
    let l = config.params.l_beams;
    let m_v = config.params.m_v();
    let psk = config.psk();
    pmi.layers
        .iter()
        .map(|layer| {
            let mut c = vec![C64::new(0.0, 0.0); 2 * l * m_v];
            let mut next = 0;
            for k in 0..2 * l * m_v {
                if !layer.bitmap[k] {
                    continue;
                }
                if k == layer.i18 * m_v {
                    c[k] = C64::new(1.0, 0.0);
                    continue;
                }
                let p1 = amp_value(layer.i23[k / (l * m_v)], AmplitudeGrid::Ref4Bit)?;
                let p2 = amp_value(layer.i24[next], AmplitudeGrid::Sb3Bit)?;
                c[k] = psk_phase(layer.i25[next], psk)? * (p1 * p2);
                next += 1;
            }
            Ok((layer.n3.clone(), c))
        })
        .collect()
}

/// gNB-side decoder; port-domain output with port selection.
pub fn decode_etype2(pmi: &PmiEType2, config: &EType2Config) -> Result<Precoder> {
    let layers = dequantize(pmi, config)?;
    let basis = basis_matrix(
        &config.antenna,
        config.params.l_beams,
        &pmi.spatial,
        config.port_selection,
    )?;
    reconstruct_etype2(&basis, config.params.n_3, &layers)
}

/// Port-selection decoder mapped to antennas through the port beams.
pub fn decode_etype2_ps(
    pmi: &PmiEType2,
    config: &EType2Config,
    port_beams: &DMatrix<C64>,
) -> Result<Precoder> {
    if config.port_selection.is_none() {
        return Err(Error::config("d", "port-selection decoding needs a stride"));
    }
    decode_etype2(pmi, config)?.through_port_beams(port_beams)
}
