//! Feedback overhead and gNB-side complexity per codebook.
//!
//! The indicator count is the number of reported coefficients and indicators
//! over all subbands, evaluated from closed-form expressions; serialized bits
//! come from the canonical layout in [`crate::codec`].

use serde::{Deserialize, Serialize};

use crate::codec::serialized_bits;
use crate::pmi::{CodebookConfig, CodebookKind, Pmi};
use crate::type1::has_i13;
use crate::type2::compressed_report;
use crate::{Error, Result};

/// Inputs of the overhead and complexity expressions. Only the fields used
/// by a given kind need to be set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadParams {
    pub rank: usize,
    pub n_3: usize,
    /// Beams or selected ports per polarization.
    pub l: Option<usize>,
    /// Frequency basis count (`M_v`, or `M` for the R17 port-selection codebook).
    pub m_v: Option<usize>,
    /// Nonzero coefficients per layer.
    pub m_nz: Option<Vec<usize>>,
    /// Full-resolution subband coefficients per layer (Type II subband mode).
    pub m_vr: Option<Vec<usize>>,
    pub subband_amplitude: Option<bool>,
    /// Bin range bound `N` of the R17 port-selection codebook.
    pub n_big: Option<usize>,
    /// Type I single panel: whether `i13` is reported.
    pub i13: Option<bool>,
    /// Type I multi panel: number of panel co-phase entries.
    pub i14_len: Option<usize>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub ng: Option<usize>,
    pub d: Option<usize>,
}

fn need<T: Copy>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(Error::MissingParameter(name))
}

fn need_vec<'a>(v: &'a Option<Vec<usize>>, name: &'static str, rank: usize) -> Result<&'a [usize]> {
    let v = v.as_deref().ok_or(Error::MissingParameter(name))?;
    if v.len() != rank {
        return Err(Error::config(
            name,
            format!("{} entries for rank {rank}", v.len()),
        ));
    }
    Ok(v)
}

/// Indicator count for `kind`.
pub fn overhead_count(kind: CodebookKind, p: &OverheadParams) -> Result<u64> {
    let rank = p.rank as u64;
    let n_3 = p.n_3 as u64;
    if p.rank == 0 {
        return Err(Error::MissingParameter("rank"));
    }
    let count = match kind {
        CodebookKind::Type1SinglePanel => {
            if need(p.i13, "i13")? {
                3 + n_3
            } else {
                2 + n_3
            }
        }
        CodebookKind::Type1MultiPanel => {
            let dim = need(p.i14_len, "i14_len")?;
            if !(1..=3).contains(&dim) {
                return Err(Error::config("i14_len", format!("{dim}, expected 1 to 3")));
            }
            5 + dim as u64 + n_3
        }
        CodebookKind::Type2 | CodebookKind::Type2PortSelection => {
            let base = if kind == CodebookKind::Type2 { 2 } else { 1 };
            let m_nz = need_vec(&p.m_nz, "m_nz", p.rank)?;
            let body: u64 = if need(p.subband_amplitude, "subband_amplitude")? {
                let m_vr = need_vec(&p.m_vr, "m_vr", p.rank)?;
                m_nz.iter()
                    .zip(m_vr)
                    .map(|(&nz, &vr)| 2 * n_3 * vr as u64 + nz as u64)
                    .sum()
            } else {
                (n_3 + 1) * m_nz.iter().map(|&x| x as u64).sum::<u64>()
            };
            base + rank + body
        }
        CodebookKind::EType2 | CodebookKind::EType2PortSelection => {
            let base = if kind == CodebookKind::EType2 { 2 } else { 1 };
            let window = u64::from(p.n_3 > crate::etype2::WINDOW_THRESHOLD);
            let l = need(p.l, "L")? as u64;
            let m_v = need(p.m_v, "m_v")? as u64;
            let m_nz: u64 = need_vec(&p.m_nz, "m_nz", p.rank)?
                .iter()
                .map(|&x| x as u64)
                .sum();
            base + window + rank + 2 * l * m_v * rank + 2 * m_nz
        }
        CodebookKind::FeType2PortSelection => {
            let l = need(p.l, "L")? as u64;
            let m = need(p.m_v, "m_v")? as u64;
            let base = match need(p.n_big, "N")? {
                2 => 1,
                4 => 2,
                n => return Err(Error::config("N", format!("{n}, expected 2 or 4"))),
            };
            if p.rank <= 2 {
                base + 4 * l * m * rank
            } else {
                let m_nz: u64 = need_vec(&p.m_nz, "m_nz", p.rank)?
                    .iter()
                    .map(|&x| x as u64)
                    .sum();
                base + 2 * m * l * rank + 2 * m_nz
            }
        }
    };
    Ok(count)
}

/// Operation count inside the big-O complexity of building the precoder.
pub fn complexity_estimate(kind: CodebookKind, p: &OverheadParams) -> Result<u64> {
    let rank = p.rank as u64;
    let n12 = || -> Result<u64> { Ok((need(p.n1, "n1")? * need(p.n2, "n2")?) as u64) };
    let l = || need(p.l, "L").map(|x| x as u64);
    let m = || need(p.m_v, "m_v").map(|x| x as u64);
    let d = || need(p.d, "d").map(|x| x as u64);
    Ok(match kind {
        CodebookKind::Type1SinglePanel => 2 * n12()? * rank,
        CodebookKind::Type1MultiPanel => 2 * need(p.ng, "ng")? as u64 * n12()? * rank,
        CodebookKind::Type2 => 2 * rank * l()? * n12()?,
        CodebookKind::Type2PortSelection => 2 * rank * l()? * d()?,
        CodebookKind::EType2 => 2 * rank * l()? * m()? * n12()?,
        CodebookKind::EType2PortSelection => 2 * rank * l()? * m()? * d()?,
        CodebookKind::FeType2PortSelection => 2 * rank * l()? * l()? * m()?,
    })
}

/// Overhead of one PMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub codebook: CodebookKind,
    pub indicator_count: u64,
    pub serialized_bits: u64,
    pub complexity_ops: u64,
}

/// Expression inputs matching a PMI under its configuration.
pub fn params_for(pmi: &Pmi, config: &CodebookConfig) -> Result<OverheadParams> {
    let mut p = OverheadParams {
        rank: config.rank(),
        n_3: config.n_3(),
        ..OverheadParams::default()
    };
    match (pmi, config) {
        (Pmi::Type1SP(_), CodebookConfig::Type1SP(c)) => {
            p.i13 = Some(has_i13(&c.antenna, c.rank));
            p.n1 = Some(c.antenna.n1);
            p.n2 = Some(c.antenna.n2);
        }
        (Pmi::Type1MP(_), CodebookConfig::Type1MP(c)) => {
            p.i14_len = Some(c.i14_len());
            p.n1 = Some(c.antenna.n1);
            p.n2 = Some(c.antenna.n2);
            p.ng = Some(c.antenna.ng);
        }
        (Pmi::Type2(pm), CodebookConfig::Type2(c)) => {
            let report = compressed_report(pm, c.subband_amplitude);
            p.l = Some(c.l_beams);
            p.m_nz = Some(report.m_nz);
            p.m_vr = Some(report.m_vr);
            p.subband_amplitude = Some(c.subband_amplitude);
            p.n1 = Some(c.antenna.n1);
            p.n2 = Some(c.antenna.n2);
            p.d = c.port_selection;
        }
        (Pmi::EType2(pm), CodebookConfig::EType2(c)) => {
            p.l = Some(c.params.l_beams);
            p.m_v = Some(c.params.m_v());
            p.m_nz = Some(
                pm.layers
                    .iter()
                    .map(|l| l.bitmap.iter().filter(|&&b| b).count())
                    .collect(),
            );
            p.n1 = Some(c.antenna.n1);
            p.n2 = Some(c.antenna.n2);
            p.d = c.port_selection;
        }
        (Pmi::FeType2PS(pm), CodebookConfig::FeType2PS(c)) => {
            p.l = Some(c.k_ports());
            p.m_v = Some(c.params.m);
            p.n_big = Some(c.params.n_big);
            p.m_nz = Some(
                pm.layers
                    .iter()
                    .map(|l| match &l.bitmap {
                        Some(b) => b.iter().filter(|&&x| x).count(),
                        None => l.amps.len(),
                    })
                    .collect(),
            );
        }
        _ => {
            return Err(Error::config(
                "kind",
                "PMI does not match the configuration",
            ))
        }
    }
    Ok(p)
}

/// Indicator count, serialized size and complexity of a PMI.
pub fn overhead_report(pmi: &Pmi, config: &CodebookConfig) -> Result<OverheadReport> {
    let params = params_for(pmi, config)?;
    let kind = config.kind();
    Ok(OverheadReport {
        codebook: kind,
        indicator_count: overhead_count(kind, &params)?,
        serialized_bits: serialized_bits(pmi, config)?,
        complexity_ops: complexity_estimate(kind, &params)?,
    })
}

/// Number of distinct indicator fields the encoder actually emits for a
/// PMI: one per scalar index, one per bitmap bit.
pub fn reported_fields(pmi: &Pmi, config: &CodebookConfig) -> Result<u64> {
    let n_3 = config.n_3() as u64;
    Ok(match (pmi, config) {
        (Pmi::Type1SP(p), CodebookConfig::Type1SP(_)) => {
            2 + u64::from(p.i13.is_some()) + p.i2.len() as u64
        }
        (Pmi::Type1MP(p), CodebookConfig::Type1MP(_)) => {
            2 + u64::from(p.i13.is_some())
                + p.i14.len() as u64
                + p.i2.iter().map(|v| v.len() as u64).sum::<u64>()
        }
        (Pmi::Type2(p), CodebookConfig::Type2(c)) => {
            let spatial = if c.port_selection.is_some() { 1 } else { 2 };
            let report = compressed_report(p, c.subband_amplitude);
            let per_layer: u64 = report
                .m_nz
                .iter()
                .zip(&report.m_vr)
                .map(|(&nz, &vr)| {
                    let (nz, vr) = (nz as u64, vr as u64);
                    if c.subband_amplitude {
                        nz + 2 * n_3 * vr + n_3 * (nz - vr)
                    } else {
                        nz + n_3 * nz
                    }
                })
                .sum();
            spatial + p.layers.len() as u64 + per_layer
        }
        (Pmi::EType2(p), CodebookConfig::EType2(c)) => {
            let spatial = if c.port_selection.is_some() { 1 } else { 2 };
            let per_layer: u64 = p
                .layers
                .iter()
                .map(|l| 3 + l.bitmap.len() as u64 + (l.i24.len() + l.i25.len()) as u64)
                .sum();
            spatial + u64::from(p.i15.is_some()) + per_layer
        }
        (Pmi::FeType2PS(p), CodebookConfig::FeType2PS(c)) => {
            let per_layer: u64 = p
                .layers
                .iter()
                .map(|l| {
                    l.bitmap.as_ref().map_or(0, |b| b.len() as u64)
                        + (l.amps.len() + l.phases.len()) as u64
                })
                .sum();
            1 + u64::from(c.has_i16()) + per_layer
        }
        _ => {
            return Err(Error::config(
                "kind",
                "PMI does not match the configuration",
            ))
        }
    })
}
