//! Type II codebook and its port-selection variant.
//!
//! Per layer and subband the precoder is a weighted sum of `L` spatial basis
//! vectors on each polarization, `w = blkdiag(B, B) c`. `B` holds either `L`
//! orthogonal DFT beams of one rotation or `L` consecutive one-hot port
//! selectors. Coefficient `i` in `[0, 2L)` belongs to basis vector `i mod L`
//! on polarization `i / L`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::beamgrid::{dft_beam, rotation_beam_indices, rotation_hypotheses, AntennaConfig};
use crate::linalg::subband_targets;
use crate::pmi::{PmiType2, SpatialChoice, Type2Layer};
use crate::quantizers::{
    amp_value, comb_decode, comb_encode, psk_phase, quantize_amp, quantize_phase, AmplitudeGrid,
    PskConfig,
};
use crate::{ChannelRealization, Error, Precoder, Result, C64};

/// Reporting configuration for Type II and Type II port selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Type2Config {
    /// Array geometry; with port selection only `n_ap` matters.
    pub antenna: AntennaConfig,
    pub rank: usize,
    pub l_beams: usize,
    /// Report 1-bit subband amplitudes (`I_s = 1`).
    pub subband_amplitude: bool,
    pub n_psk: usize,
    pub n_3: usize,
    /// Port-group stride `d`; `Some` selects the port-selection variant.
    pub port_selection: Option<usize>,
}

impl Type2Config {
    pub fn new(antenna: AntennaConfig, rank: usize, l_beams: usize, n_3: usize) -> Self {
        Type2Config {
            antenna,
            rank,
            l_beams,
            subband_amplitude: false,
            n_psk: 8,
            n_3,
            port_selection: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.antenna.validate()?;
        if self.antenna.ng != 1 {
            return Err(Error::config("ng", "Type II needs a single panel"));
        }
        if !(1..=2).contains(&self.rank) {
            return Err(Error::config(
                "rank",
                format!("rank {}, expected 1 or 2", self.rank),
            ));
        }
        if !(2..=4).contains(&self.l_beams) {
            return Err(Error::config(
                "L",
                format!("{} beams, expected 2 to 4", self.l_beams),
            ));
        }
        if !matches!(self.n_psk, 4 | 8) {
            return Err(Error::config(
                "n_psk",
                format!("{}, expected 4 or 8", self.n_psk),
            ));
        }
        if self.n_3 == 0 {
            return Err(Error::config("n_3", "at least one subband required"));
        }
        check_basis_size(&self.antenna, self.l_beams, self.port_selection)
    }

    pub fn psk(&self) -> PskConfig {
        PskConfig::new(self.n_psk).expect("validated n_psk")
    }
}

pub(crate) fn check_basis_size(
    antenna: &AntennaConfig,
    l_beams: usize,
    port_selection: Option<usize>,
) -> Result<()> {
    let half = antenna.n_ap() / 2;
    if l_beams > half {
        return Err(Error::config(
            "L",
            format!("{l_beams} basis vectors exceed {half} per polarization"),
        ));
    }
    if let Some(d) = port_selection {
        if !(1..=4).contains(&d) {
            return Err(Error::config("d", format!("stride {d}, expected 1 to 4")));
        }
    }
    Ok(())
}

/// Number of port groups `⌈P / d⌉` for `P` ports per polarization.
pub fn port_groups(n_half: usize, d: usize) -> usize {
    n_half.div_ceil(d)
}

/// Ports `i11 * d + i`, `i < L`, selected by port group `i11`.
pub fn selected_ports(i11: usize, d: usize, l_beams: usize, n_half: usize) -> Result<Vec<usize>> {
    Error::check_range("i11", i11, port_groups(n_half, d))?;
    let ports: Vec<usize> = (0..l_beams).map(|i| i11 * d + i).collect();
    if let Some(&last) = ports.last() {
        Error::check_range("selected port", last, n_half)?;
    }
    Ok(ports)
}

/// Spatial basis `B` (`n_ap / 2` rows, `L` columns) of a spatial choice.
pub fn basis_matrix(
    antenna: &AntennaConfig,
    l_beams: usize,
    choice: &SpatialChoice,
    port_selection: Option<usize>,
) -> Result<DMatrix<C64>> {
    let n_half = antenna.n_ap() / 2;
    let mut b = DMatrix::zeros(n_half, l_beams);
    match (choice, port_selection) {
        (SpatialChoice::Beams { q1, q2, i12 }, None) => {
            let beams = comb_decode(*i12, antenna.panel_elements(), l_beams)?;
            for (i, &idx) in beams.iter().enumerate() {
                let (m1, m2) = rotation_beam_indices(antenna, *q1, *q2, idx)?;
                let w = dft_beam(antenna, m1, m2)?;
                for (e, x) in w.entries.iter().enumerate() {
                    b[(e, i)] = *x;
                }
            }
        }
        (SpatialChoice::Ports { i11 }, Some(d)) => {
            for (i, p) in selected_ports(*i11, d, l_beams, n_half)?
                .into_iter()
                .enumerate()
            {
                b[(p, i)] = C64::new(1.0, 0.0);
            }
        }
        _ => {
            return Err(Error::MalformedPmi(
                "spatial choice does not match the port-selection setting".into(),
            ))
        }
    }
    Ok(b)
}

fn ranked(energy: &[f64], take: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..energy.len()).collect();
    idx.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]).then(a.cmp(&b)));
    idx.truncate(take);
    idx
}

/// Energy of the targets captured by each basis vector, summed over
/// polarizations, subbands and layers.
fn basis_energy(targets: &Precoder, columns: &[Vec<C64>]) -> Vec<f64> {
    let n_half = targets.n_ap() / 2;
    columns
        .iter()
        .map(|w| {
            let norm: f64 = w.iter().map(|x| x.norm_sqr()).sum();
            let mut e = 0.0;
            for m in &targets.subbands {
                for v in m.column_iter() {
                    for pol in 0..2 {
                        let ip: C64 = (0..n_half).map(|a| w[a].conj() * v[pol * n_half + a]).sum();
                        e += ip.norm_sqr() / norm;
                    }
                }
            }
            e
        })
        .collect()
}

/// Chooses the spatial basis maximizing the captured target energy.
///
/// Beams: every rotation is tried, and within a rotation the `L` strongest
/// orthogonal beams are kept (exact, since the beams are orthogonal).
/// Ports: every valid port group is tried.
pub fn select_spatial(
    targets: &Precoder,
    antenna: &AntennaConfig,
    l_beams: usize,
    port_selection: Option<usize>,
) -> Result<SpatialChoice> {
    let n_half = antenna.n_ap() / 2;
    if targets.n_ap() != antenna.n_ap() {
        return Err(Error::DimensionMismatch(format!(
            "targets have {} ports, configuration has {}",
            targets.n_ap(),
            antenna.n_ap()
        )));
    }
    match port_selection {
        None => {
            let mut best: Option<(f64, SpatialChoice)> = None;
            for (q1, q2) in rotation_hypotheses(antenna) {
                let cols: Vec<Vec<C64>> = (0..antenna.panel_elements())
                    .map(|b| {
                        let (m1, m2) = rotation_beam_indices(antenna, q1, q2, b)?;
                        Ok(dft_beam(antenna, m1, m2)?.entries)
                    })
                    .collect::<Result<_>>()?;
                let energy = basis_energy(targets, &cols);
                let mut chosen = ranked(&energy, l_beams);
                let total: f64 = chosen.iter().map(|&b| energy[b]).sum();
                chosen.sort_unstable();
                if best.as_ref().is_none_or(|(e, _)| total > *e) {
                    let i12 = comb_encode(&chosen, antenna.panel_elements())?;
                    best = Some((total, SpatialChoice::Beams { q1, q2, i12 }));
                }
            }
            Ok(best.expect("at least one rotation").1)
        }
        Some(d) => {
            let cols: Vec<Vec<C64>> = (0..n_half)
                .map(|p| {
                    (0..n_half)
                        .map(|a| C64::new(if a == p { 1.0 } else { 0.0 }, 0.0))
                        .collect()
                })
                .collect();
            let energy = basis_energy(targets, &cols);
            let mut best: Option<(f64, usize)> = None;
            for i11 in 0..port_groups(n_half, d) {
                let Ok(ports) = selected_ports(i11, d, l_beams, n_half) else {
                    continue;
                };
                let total: f64 = ports.iter().map(|&p| energy[p]).sum();
                if best.is_none_or(|(e, _)| total > e) {
                    best = Some((total, i11));
                }
            }
            let (_, i11) = best.ok_or_else(|| Error::config("L", "no valid port group"))?;
            Ok(SpatialChoice::Ports { i11 })
        }
    }
}

/// Least-squares coefficients of every target column on `blkdiag(B, B)`,
/// indexed `[layer][t][i]`.
pub fn project(targets: &Precoder, basis: &DMatrix<C64>) -> Vec<Vec<Vec<C64>>> {
    let n_half = basis.nrows();
    let l = basis.ncols();
    let norms: Vec<f64> = basis.column_iter().map(|c| c.norm_squared()).collect();
    (0..targets.rank())
        .map(|layer| {
            targets
                .subbands
                .iter()
                .map(|m| {
                    let v = m.column(layer);
                    (0..2 * l)
                        .map(|i| {
                            let (pol, b) = (i / l, i % l);
                            let ip: C64 = (0..n_half)
                                .map(|a| basis[(a, b)].conj() * v[pol * n_half + a])
                                .sum();
                            ip / norms[b]
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `normalize(blkdiag(B, B) c)` for coefficients indexed `[layer][t][i]`.
pub fn reconstruct(basis: &DMatrix<C64>, coefficients: &[Vec<Vec<C64>>]) -> Result<Precoder> {
    let n_half = basis.nrows();
    let l = basis.ncols();
    let rank = coefficients.len();
    let n_3 = coefficients.first().map_or(0, |c| c.len());
    if rank == 0 || n_3 == 0 || coefficients.iter().any(|c| c.len() != n_3) {
        return Err(Error::DimensionMismatch("ragged coefficient array".into()));
    }
    let mut subbands = Vec::with_capacity(n_3);
    for t in 0..n_3 {
        let mut m = DMatrix::zeros(2 * n_half, rank);
        for (layer, coef) in coefficients.iter().enumerate() {
            let c = &coef[t];
            if c.len() != 2 * l {
                return Err(Error::DimensionMismatch(format!(
                    "{} coefficients for {} basis vectors",
                    c.len(),
                    2 * l
                )));
            }
            for (i, ci) in c.iter().enumerate() {
                let (pol, b) = (i / l, i % l);
                for a in 0..n_half {
                    m[(pol * n_half + a, layer)] += basis[(a, b)] * ci;
                }
            }
        }
        subbands.push(m);
    }
    let mut p = Precoder::new(subbands);
    p.normalize_columns();
    Ok(p)
}

/// Unquantized encoder output: the spatial choice and the raw projection
/// coefficients `[layer][t][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Type2Analysis {
    pub spatial: SpatialChoice,
    pub coefficients: Vec<Vec<Vec<C64>>>,
}

/// Spatial selection and projection without quantization.
pub fn analyze_type2(channel: &ChannelRealization, config: &Type2Config) -> Result<Type2Analysis> {
    config.validate()?;
    channel.check_config(&config.antenna)?;
    let (targets, _) = subband_targets(channel, config.rank)?;
    let spatial = select_spatial(
        &targets,
        &config.antenna,
        config.l_beams,
        config.port_selection,
    )?;
    let basis = basis_matrix(
        &config.antenna,
        config.l_beams,
        &spatial,
        config.port_selection,
    )?;
    Ok(Type2Analysis {
        spatial,
        coefficients: project(&targets, &basis),
    })
}

/// Reporting summary of a Type II PMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressedReport {
    /// Nonzero reported wideband amplitudes per layer (strongest excluded).
    pub m_nz: Vec<usize>,
    /// Coefficients per layer reported at full phase resolution.
    pub m_vr: Vec<usize>,
    /// `(layer, i)` positions not transmitted: the strongest coefficient and
    /// every zero wideband amplitude.
    pub omitted: Vec<(usize, usize)>,
}

/// Reported coefficient positions of one layer split into the full-resolution
/// group and the 4-PSK group, by decreasing wideband amplitude.
pub(crate) fn reported_split(
    layer: &Type2Layer,
    subband_amplitude: bool,
) -> (Vec<usize>, Vec<usize>) {
    let mut reported: Vec<usize> = (0..layer.i14.len())
        .filter(|&i| i != layer.i13 && layer.i14[i] > 0)
        .collect();
    if !subband_amplitude {
        return (reported, Vec::new());
    }
    reported.sort_by(|&a, &b| layer.i14[b].cmp(&layer.i14[a]).then(a.cmp(&b)));
    let strong = reported.len().div_ceil(2);
    let weak = reported.split_off(strong);
    (reported, weak)
}

/// Derives the compression summary from a PMI.
pub fn compressed_report(pmi: &PmiType2, subband_amplitude: bool) -> CompressedReport {
    let mut m_nz = Vec::new();
    let mut m_vr = Vec::new();
    let mut omitted = Vec::new();
    for (l, layer) in pmi.layers.iter().enumerate() {
        let (strong, weak) = reported_split(layer, subband_amplitude);
        m_nz.push(strong.len() + weak.len());
        m_vr.push(strong.len());
        for i in 0..layer.i14.len() {
            if i == layer.i13 || layer.i14[i] == 0 {
                omitted.push((l, i));
            }
        }
    }
    CompressedReport {
        m_nz,
        m_vr,
        omitted,
    }
}

fn quantize_layer(coef: &[Vec<C64>], config: &Type2Config) -> Type2Layer {
    let n = coef[0].len();
    let energy: Vec<f64> = (0..n)
        .map(|i| coef.iter().map(|c| c[i].norm_sqr()).sum())
        .collect();
    let strongest = ranked(&energy, 1)[0];
    let e_max = energy[strongest];
    let mut k1: Vec<usize> = energy
        .iter()
        .map(|&e| {
            if e_max > 0.0 {
                quantize_amp((e / e_max).sqrt(), AmplitudeGrid::Wb3Bit)
            } else {
                0
            }
        })
        .collect();
    k1[strongest] = AmplitudeGrid::Wb3Bit.max_index();
    let mut layer = Type2Layer {
        i13: strongest,
        i14: k1,
        i21: vec![vec![0; n]; coef.len()],
        i22: config
            .subband_amplitude
            .then(|| vec![vec![1; n]; coef.len()]),
    };
    let (strong, weak) = reported_split(&layer, config.subband_amplitude);
    let ref_rms = (e_max / coef.len() as f64).sqrt();
    for (t, c) in coef.iter().enumerate() {
        let denom = if c[strongest].norm() > 1e-12 * ref_rms {
            c[strongest]
        } else {
            C64::new(ref_rms, 0.0)
        };
        for &i in &strong {
            let r = c[i] / denom;
            layer.i21[t][i] = quantize_phase(r, config.psk());
            if let Some(i22) = layer.i22.as_mut() {
                let p1 = amp_value(layer.i14[i], AmplitudeGrid::Wb3Bit).expect("valid k1");
                i22[t][i] = quantize_amp(r.norm() / p1, AmplitudeGrid::Sb1Bit);
            }
        }
        for &i in &weak {
            layer.i21[t][i] = quantize_phase(c[i] / denom, PskConfig::qpsk());
        }
    }
    layer
}

/// Quantizes an analysis into a PMI.
pub fn quantize_type2(
    analysis: &Type2Analysis,
    config: &Type2Config,
) -> Result<(PmiType2, CompressedReport)> {
    config.validate()?;
    let layers = analysis
        .coefficients
        .iter()
        .map(|c| quantize_layer(c, config))
        .collect();
    let pmi = PmiType2 {
        spatial: analysis.spatial.clone(),
        layers,
    };
    let report = compressed_report(&pmi, config.subband_amplitude);
    Ok((pmi, report))
}

/// UE-side encoder. With port selection, `channel` is the channel seen
/// through the beamformed ports (`n_rx x 2P x n_3`).
pub fn encode_type2(
    channel: &ChannelRealization,
    config: &Type2Config,
) -> Result<(PmiType2, CompressedReport)> {
    quantize_type2(&analyze_type2(channel, config)?, config)
}

/// Checks the PMI structure against the configuration.
pub fn check_pmi(pmi: &PmiType2, config: &Type2Config) -> Result<()> {
    config.validate()?;
    basis_matrix(
        &config.antenna,
        config.l_beams,
        &pmi.spatial,
        config.port_selection,
    )?;
    let n = 2 * config.l_beams;
    if pmi.layers.len() != config.rank {
        return Err(Error::MalformedPmi(format!(
            "{} layers for rank {}",
            pmi.layers.len(),
            config.rank
        )));
    }
    for layer in &pmi.layers {
        Error::check_range("i13", layer.i13, n)?;
        if layer.i14.len() != n {
            return Err(Error::MalformedPmi(format!(
                "i14 has {} entries",
                layer.i14.len()
            )));
        }
        for &k in &layer.i14 {
            Error::check_range("i14", k, AmplitudeGrid::Wb3Bit.cardinality())?;
        }
        if layer.i14[layer.i13] != AmplitudeGrid::Wb3Bit.max_index() {
            return Err(Error::MalformedPmi("strongest amplitude must be 7".into()));
        }
        if layer.i21.len() != config.n_3 || layer.i21.iter().any(|v| v.len() != n) {
            return Err(Error::MalformedPmi("i21 shape mismatch".into()));
        }
        match (&layer.i22, config.subband_amplitude) {
            (Some(i22), true) => {
                if i22.len() != config.n_3 || i22.iter().any(|v| v.len() != n) {
                    return Err(Error::MalformedPmi("i22 shape mismatch".into()));
                }
                if i22.iter().flatten().any(|&k| k > 1) {
                    return Err(Error::MalformedPmi("i22 entries are single bits".into()));
                }
            }
            (None, false) => {}
            _ => {
                return Err(Error::MalformedPmi(
                    "i22 presence does not match subband amplitude setting".into(),
                ))
            }
        }
        let (strong, weak) = reported_split(layer, config.subband_amplitude);
        for t in 0..config.n_3 {
            for &i in &strong {
                Error::check_range("i21", layer.i21[t][i], config.n_psk)?;
            }
            for &i in &weak {
                Error::check_range("i21", layer.i21[t][i], 4)?;
            }
            for i in 0..n {
                if !strong.contains(&i) && !weak.contains(&i) && layer.i21[t][i] != 0 {
                    return Err(Error::MalformedPmi(format!(
                        "unreported phase {i} must be 0"
                    )));
                }
                if let Some(i22) = &layer.i22 {
                    if !strong.contains(&i) && i22[t][i] != 1 {
                        return Err(Error::MalformedPmi(format!(
                            "unreported subband amplitude {i} must be 1"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Dequantized coefficients `[layer][t][i]` of a PMI.
pub fn dequantize(pmi: &PmiType2, config: &Type2Config) -> Result<Vec<Vec<Vec<C64>>>> {
    check_pmi(pmi, config)?;
    let psk = config.psk();
    let mut out = Vec::with_capacity(pmi.layers.len());
    for layer in &pmi.layers {
        let (strong, weak) = reported_split(layer, config.subband_amplitude);
        let mut per_t = Vec::with_capacity(config.n_3);
        for t in 0..config.n_3 {
            let mut c = vec![C64::new(0.0, 0.0); 2 * config.l_beams];
            c[layer.i13] = C64::new(1.0, 0.0);
            for &i in &strong {
                let mut a = amp_value(layer.i14[i], AmplitudeGrid::Wb3Bit)?;
                if let Some(i22) = &layer.i22 {
                    a *= amp_value(i22[t][i], AmplitudeGrid::Sb1Bit)?;
                }
                c[i] = psk_phase(layer.i21[t][i], psk)? * a;
            }
            for &i in &weak {
                let a = amp_value(layer.i14[i], AmplitudeGrid::Wb3Bit)?;
                c[i] = psk_phase(layer.i21[t][i], PskConfig::qpsk())? * a;
            }
            per_t.push(c);
        }
        out.push(per_t);
    }
    Ok(out)
}

/// gNB-side decoder. With port selection the result is in the port domain;
/// see [`decode_type2_ps`].
pub fn decode_type2(pmi: &PmiType2, config: &Type2Config) -> Result<Precoder> {
    let coef = dequantize(pmi, config)?;
    let basis = basis_matrix(
        &config.antenna,
        config.l_beams,
        &pmi.spatial,
        config.port_selection,
    )?;
    reconstruct(&basis, &coef)
}

/// Port-selection decoder mapped to antennas through the per-polarization
/// port beams (`n_el x P`).
pub fn decode_type2_ps(
    pmi: &PmiType2,
    config: &Type2Config,
    port_beams: &DMatrix<C64>,
) -> Result<Precoder> {
    if config.port_selection.is_none() {
        return Err(Error::config("d", "port-selection decoding needs a stride"));
    }
    decode_type2(pmi, config)?.through_port_beams(port_beams)
}
