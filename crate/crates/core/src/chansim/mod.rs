//! Channel synthesis and MU-MIMO spectral-efficiency evaluation.
//!
//! A drop places `K` users, each with its own random multipath channel and
//! an uplink realization sharing the path geometry. Every scheme under test
//! turns each user's channel into a rank-1 precoder (through its PMI for
//! codebooks, directly for the genie), the gNB applies regularized
//! zero-forcing across users per subband, and the per-user spectral
//! efficiency is averaged over subbands and users.

mod channel;

pub use channel::*;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamgrid::{dft_beam, rotation_beam_indices, rotation_hypotheses};
use crate::codec::serialized_bits;
use crate::etype2::{
    decode_etype2, decode_etype2_ps, encode_etype2, EType2Config, EType2Params, Ratio,
};
use crate::fetype2ps::{
    decode_fetype2ps, effective_channel, encode_fetype2ps, gnb_port_precoders, FeConfig, FeParams,
    PortMode, PortPrecoders,
};
use crate::linalg::subband_targets;
use crate::overhead::overhead_report;
use crate::pmi::CodebookConfig;
use crate::type1::{
    decode_type1_mp, decode_type1_sp, encode_type1_mp, encode_type1_sp, Type1Config, Type1MpConfig,
};
use crate::type2::{decode_type2, decode_type2_ps, encode_type2, Type2Config};
use crate::{AntennaConfig, CodebookKind, Error, Pmi, Precoder, Result, C64};

/// Ensemble and link parameters shared by every scheme of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub antenna: AntennaConfig,
    pub n_rx: usize,
    pub n_3: usize,
    pub users: usize,
    pub n_paths: usize,
    /// Uplink snapshots per user (independent fading, shared geometry)
    /// available to the gNB for port derivation.
    pub ul_snapshots: usize,
    pub snr_db: f64,
    pub drops: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.antenna.validate()?;
        if self.drops == 0 {
            return Err(Error::config("drops", "at least one drop required"));
        }
        if self.users == 0 || self.users > self.antenna.n_ap() {
            return Err(Error::config(
                "K",
                format!("{} users for {} ports", self.users, self.antenna.n_ap()),
            ));
        }
        if self.n_rx == 0 || self.n_3 == 0 || self.n_paths == 0 || self.ul_snapshots == 0 {
            return Err(Error::config(
                "n_rx/n_3/paths/ul_snapshots",
                "must be positive",
            ));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::config("snr_db", "must be finite"));
        }
        Ok(())
    }
}

/// Which precoder a scheme feeds to the MU precoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Unquantized dominant right singular vectors.
    Genie,
    Codebook(CodebookKind),
}

/// Encoder parameters; each kind reads only the fields it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub l_beams: usize,
    pub p_v: Ratio,
    pub beta: Ratio,
    pub r: usize,
    pub n_psk: usize,
    pub subband_amplitude: bool,
    /// Port-group stride of the Type II port-selection variants.
    pub d: usize,
    /// Beamformed CSI-RS ports per polarization for port selection.
    pub n_ports: usize,
    pub alpha: Ratio,
    pub m: usize,
    pub n_big: usize,
    pub port_mode: PortMode,
    pub c_m: usize,
}

impl Default for EncoderParams {
    fn default() -> Self {
        EncoderParams {
            l_beams: 4,
            p_v: Ratio::new(1, 4),
            beta: Ratio::new(1, 2),
            r: 1,
            n_psk: 8,
            subband_amplitude: false,
            d: 1,
            n_ports: 8,
            alpha: Ratio::new(1, 2),
            m: 1,
            n_big: 2,
            port_mode: PortMode::EigenBased,
            c_m: 1,
        }
    }
}

/// One scheme of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub scheme: Scheme,
    pub params: EncoderParams,
}

impl SchemeSpec {
    pub fn genie() -> Self {
        SchemeSpec {
            scheme: Scheme::Genie,
            params: EncoderParams::default(),
        }
    }

    pub fn codebook(kind: CodebookKind, params: EncoderParams) -> Self {
        SchemeSpec {
            scheme: Scheme::Codebook(kind),
            params,
        }
    }

    /// Short row label, e.g. `etype2` or `fetype2ps:dft`.
    pub fn label(&self) -> String {
        match self.scheme {
            Scheme::Genie => "genie".into(),
            Scheme::Codebook(CodebookKind::FeType2PortSelection) => {
                let mode = match self.params.port_mode {
                    PortMode::EigenBased => "eigen",
                    PortMode::DftBased => "dft",
                };
                format!("fetype2ps:{mode}")
            }
            Scheme::Codebook(kind) => kind.name().into(),
        }
    }

    /// Rank-1 reporting configuration for the simulated array. Port-selection
    /// kinds see `2 n_ports` beamformed ports instead of the antennas.
    pub fn codebook_config(&self, sim: &SimConfig) -> Result<Option<CodebookConfig>> {
        let p = &self.params;
        let antenna = sim.antenna;
        let kind = match self.scheme {
            Scheme::Genie => return Ok(None),
            Scheme::Codebook(kind) => kind,
        };
        let port_antenna = || AntennaConfig::single_panel(p.n_ports, 1, 1, 1);
        let cfg = match kind {
            CodebookKind::Type1SinglePanel => CodebookConfig::Type1SP(Type1Config {
                antenna,
                rank: 1,
                n_3: sim.n_3,
            }),
            CodebookKind::Type1MultiPanel => CodebookConfig::Type1MP(Type1MpConfig {
                antenna,
                rank: 1,
                c_m: p.c_m,
                n_3: sim.n_3,
            }),
            CodebookKind::Type2 | CodebookKind::Type2PortSelection => {
                let ps = kind == CodebookKind::Type2PortSelection;
                CodebookConfig::Type2(Type2Config {
                    antenna: if ps { port_antenna()? } else { antenna },
                    rank: 1,
                    l_beams: p.l_beams,
                    subband_amplitude: p.subband_amplitude,
                    n_psk: p.n_psk,
                    n_3: sim.n_3,
                    port_selection: ps.then_some(p.d),
                })
            }
            CodebookKind::EType2 | CodebookKind::EType2PortSelection => {
                let ps = kind == CodebookKind::EType2PortSelection;
                CodebookConfig::EType2(EType2Config {
                    antenna: if ps { port_antenna()? } else { antenna },
                    rank: 1,
                    params: EType2Params {
                        l_beams: p.l_beams,
                        p_v: p.p_v,
                        beta: p.beta,
                        r: p.r,
                        n_3: sim.n_3,
                    },
                    n_psk: p.n_psk,
                    port_selection: ps.then_some(p.d),
                })
            }
            CodebookKind::FeType2PortSelection => CodebookConfig::FeType2PS(FeConfig {
                n_ports: p.n_ports,
                rank: 1,
                params: FeParams {
                    alpha: p.alpha,
                    m: p.m,
                    n_big: p.n_big,
                },
                n_psk: p.n_psk,
                n_3: sim.n_3,
            }),
        };
        cfg.validate()?;
        if kind.is_port_selection() && 2 * p.n_ports > antenna.n_ap() {
            return Err(Error::config(
                "n_ports",
                format!("{} ports per polarization exceed the array", p.n_ports),
            ));
        }
        Ok(Some(cfg))
    }
}

/// Downlink channel and uplink snapshots of all users in one drop.
#[derive(Debug, Clone)]
pub struct Drop {
    pub dl: Vec<ChannelRealization>,
    pub ul: Vec<Vec<ChannelRealization>>,
}

/// Channels of drop `index`; independent of every other drop.
pub fn gen_drop(sim: &SimConfig, index: usize) -> Result<Drop> {
    let drop_seed = derive_seed(sim.seed, index as u64);
    let spec = PathSource::Random(RandomPathSpec::new(sim.n_paths));
    let mut dl = Vec::with_capacity(sim.users);
    let mut ul = Vec::with_capacity(sim.users);
    for u in 0..sim.users {
        let user_seed = derive_seed(drop_seed, u as u64);
        let ch = gen_channel(
            &spec,
            &sim.antenna,
            sim.n_rx,
            sim.n_3,
            derive_seed(user_seed, 0),
        )?;
        let snapshots = (0..sim.ul_snapshots)
            .map(|s| gen_ul_from_dl(&ch, &sim.antenna, derive_seed(user_seed, s as u64 + 1)))
            .collect::<Result<Vec<_>>>()?;
        ul.push(snapshots);
        dl.push(ch);
    }
    Ok(Drop { dl, ul })
}

/// Per-drop outcome of one scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropResult {
    /// Per-user spectral efficiency averaged over subbands and users.
    pub se: f64,
    /// Serialized PMI bits averaged over users.
    pub overhead_bits: f64,
    /// Indicator count averaged over users.
    pub indicator_count: f64,
}

/// Aggregate over an ensemble of drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeResult {
    pub label: String,
    pub spec: SchemeSpec,
    pub mean_se: f64,
    /// Half-width of the 95% bootstrap interval of `mean_se`.
    pub ci95: f64,
    pub drops: usize,
    pub overhead_bits: f64,
    pub indicator_count: f64,
    pub per_drop: Vec<f64>,
}

/// Strongest `n_ports` orthogonal DFT beams of the rotation that collects the
/// most uplink energy, strongest first (`n_el x n_ports`).
pub fn dft_port_beams(
    ul: &[ChannelRealization],
    cfg: &AntennaConfig,
    n_ports: usize,
) -> Result<DMatrix<C64>> {
    let n_el = cfg.panel_elements();
    if n_ports == 0 || n_ports > n_el {
        return Err(Error::config(
            "n_ports",
            format!("{n_ports} beams from {n_el} per rotation"),
        ));
    }
    let mut best: Option<(f64, Vec<Vec<C64>>)> = None;
    for (q1, q2) in rotation_hypotheses(cfg) {
        let mut scored = Vec::with_capacity(n_el);
        for b in 0..n_el {
            let (m1, m2) = rotation_beam_indices(cfg, q1, q2, b)?;
            let w = dft_beam(cfg, m1, m2)?.entries;
            let mut e = 0.0;
            for ch in ul {
                ch.check_config(cfg)?;
                for h in ch.subbands() {
                    for r in 0..h.nrows() {
                        for pol in 0..2 {
                            let ip: C64 = (0..n_el).map(|a| h[(r, pol * n_el + a)] * w[a]).sum();
                            e += ip.norm_sqr();
                        }
                    }
                }
            }
            scored.push((e, b, w));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.truncate(n_ports);
        let total: f64 = scored.iter().map(|s| s.0).sum();
        if best.as_ref().is_none_or(|(e, _)| total > *e) {
            best = Some((total, scored.into_iter().map(|s| s.2).collect()));
        }
    }
    let (_, beams) = best.expect("at least one rotation");
    Ok(DMatrix::from_fn(n_el, n_ports, |e, k| beams[k][e]))
}

/// Port beamforming the gNB applied to the CSI-RS a report refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum PortContext {
    /// Reports on the antenna ports directly.
    Antennas,
    /// Wideband per-polarization port beams (`n_el x P`).
    Beams(DMatrix<C64>),
    /// Per-subband port precoders.
    Precoders(PortPrecoders),
}

/// One user's report under a codebook configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct UserReport {
    pub pmi: Pmi,
    pub ports: PortContext,
    /// Precoder the gNB rebuilds from `pmi`, in the antenna domain.
    pub precoder: Precoder,
}

/// Rebuilds the antenna-domain precoder of `pmi`.
pub fn decode_report(
    pmi: &Pmi,
    config: &CodebookConfig,
    ports: &PortContext,
    antenna: &AntennaConfig,
) -> Result<Precoder> {
    match (pmi, config, ports) {
        (Pmi::Type1SP(p), CodebookConfig::Type1SP(c), PortContext::Antennas) => {
            decode_type1_sp(p, antenna, c.rank)
        }
        (Pmi::Type1MP(p), CodebookConfig::Type1MP(c), PortContext::Antennas) => {
            decode_type1_mp(p, antenna, c.rank, c.c_m)
        }
        (Pmi::Type2(p), CodebookConfig::Type2(c), PortContext::Antennas) => decode_type2(p, c),
        (Pmi::Type2(p), CodebookConfig::Type2(c), PortContext::Beams(b)) => {
            decode_type2_ps(p, c, b)
        }
        (Pmi::EType2(p), CodebookConfig::EType2(c), PortContext::Antennas) => decode_etype2(p, c),
        (Pmi::EType2(p), CodebookConfig::EType2(c), PortContext::Beams(b)) => {
            decode_etype2_ps(p, c, b)
        }
        (Pmi::FeType2PS(p), CodebookConfig::FeType2PS(c), PortContext::Precoders(ports)) => {
            decode_fetype2ps(p, c, ports)
        }
        _ => Err(Error::config(
            "kind",
            "PMI, configuration and port context do not match",
        )),
    }
}

/// Port beamforming the gNB derives from the uplink snapshots `ul` for a
/// configuration: DFT port beams for Type II / Enhanced Type II port
/// selection, spatial-frequency port precoders for FeType2PS.
pub fn port_context(
    ul: &[ChannelRealization],
    params: &EncoderParams,
    config: &CodebookConfig,
    antenna: &AntennaConfig,
) -> Result<PortContext> {
    Ok(match config {
        CodebookConfig::Type2(Type2Config {
            port_selection: Some(_),
            ..
        })
        | CodebookConfig::EType2(EType2Config {
            port_selection: Some(_),
            ..
        }) => PortContext::Beams(dft_port_beams(ul, antenna, params.n_ports)?),
        CodebookConfig::FeType2PS(c) => PortContext::Precoders(gnb_port_precoders(
            ul,
            antenna,
            c.n_ports,
            params.port_mode,
        )?),
        _ => PortContext::Antennas,
    })
}

/// Encodes the report of one user. Port-selection kinds first derive the
/// gNB port beamforming from the uplink snapshots `ul`.
pub fn encode_user(
    dl: &ChannelRealization,
    ul: &[ChannelRealization],
    params: &EncoderParams,
    config: &CodebookConfig,
    antenna: &AntennaConfig,
) -> Result<UserReport> {
    let ports = port_context(ul, params, config, antenna)?;
    let seen = match &ports {
        PortContext::Antennas => None,
        PortContext::Beams(b) => Some(effective_channel(
            dl,
            &PortPrecoders::wideband(b, dl.n_3()),
        )?),
        PortContext::Precoders(p) => Some(effective_channel(dl, p)?),
    };
    let g = seen.as_ref().unwrap_or(dl);
    let pmi = match config {
        CodebookConfig::Type1SP(c) => Pmi::Type1SP(encode_type1_sp(g, antenna, c.rank)?),
        CodebookConfig::Type1MP(c) => Pmi::Type1MP(encode_type1_mp(g, antenna, c.rank, c.c_m)?),
        CodebookConfig::Type2(c) => Pmi::Type2(encode_type2(g, c)?.0),
        CodebookConfig::EType2(c) => Pmi::EType2(encode_etype2(g, c)?),
        CodebookConfig::FeType2PS(c) => Pmi::FeType2PS(encode_fetype2ps(g, c)?),
    };
    let precoder = decode_report(&pmi, config, &ports, antenna)?;
    Ok(UserReport {
        pmi,
        ports,
        precoder,
    })
}

/// Rank-1 precoder of one user under `spec`, plus the overhead of its report.
fn user_precoder(
    dl: &ChannelRealization,
    ul: &[ChannelRealization],
    spec: &SchemeSpec,
    config: Option<&CodebookConfig>,
    sim: &SimConfig,
) -> Result<(Precoder, Option<(u64, u64)>)> {
    let Some(config) = config else {
        let (targets, _) = subband_targets(dl, 1)?;
        return Ok((targets, None));
    };
    let report = encode_user(dl, ul, &spec.params, config, &sim.antenna)?;
    let bits = serialized_bits(&report.pmi, config)?;
    let count = overhead_report(&report.pmi, config)?.indicator_count;
    Ok((report.precoder, Some((bits, count))))
}

/// Per-user SINR of regularized zero-forcing built from `estimates` and
/// applied to `channels` (both `K x n_ap` rows), total power `snr`.
pub fn rzf_sinr(channels: &DMatrix<C64>, estimates: &DMatrix<C64>, snr: f64) -> Vec<f64> {
    let k = channels.nrows();
    let reg = DMatrix::<C64>::identity(k, k) * C64::new(k as f64 / snr, 0.0);
    let gram = estimates * estimates.adjoint() + reg;
    let inv = gram
        .clone()
        .try_inverse()
        .or_else(|| gram.pseudo_inverse(1e-12).ok())
        .unwrap_or_else(|| DMatrix::zeros(k, k));
    let mut w = estimates.adjoint() * inv;
    let norm = w.norm();
    if norm > 0.0 {
        w /= C64::new(norm, 0.0);
    }
    let rx = channels * &w;
    (0..k)
        .map(|u| {
            let signal = rx[(u, u)].norm_sqr() * snr;
            let interference: f64 = (0..k)
                .filter(|&j| j != u)
                .map(|j| rx[(u, j)].norm_sqr())
                .sum::<f64>()
                * snr;
            signal / (1.0 + interference)
        })
        .collect()
}

/// Evaluates one scheme on one drop.
pub fn evaluate_drop(drop: &Drop, spec: &SchemeSpec, sim: &SimConfig) -> Result<DropResult> {
    let config = spec.codebook_config(sim)?;
    evaluate_drop_with(drop, spec, config.as_ref(), sim)
}

fn evaluate_drop_with(
    drop: &Drop,
    spec: &SchemeSpec,
    config: Option<&CodebookConfig>,
    sim: &SimConfig,
) -> Result<DropResult> {
    let k = drop.dl.len();
    if k == 0 || k != drop.ul.len() {
        return Err(Error::DimensionMismatch(
            "drop needs matching DL and UL users".into(),
        ));
    }
    let n_ap = sim.antenna.n_ap();
    if k > n_ap {
        return Err(Error::config("K", format!("{k} users for {n_ap} ports")));
    }
    let mut truth = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    let mut reported = Vec::with_capacity(k);
    let (mut bits, mut count) = (0.0, 0.0);
    for (dl, ul) in drop.dl.iter().zip(&drop.ul) {
        dl.check_config(&sim.antenna)?;
        if dl.n_3() != sim.n_3 {
            return Err(Error::DimensionMismatch(
                "user subband count differs".into(),
            ));
        }
        let (targets, sigma) = subband_targets(dl, 1)?;
        let (w, overhead) = user_precoder(dl, ul, spec, config, sim)?;
        if let Some((b, c)) = overhead {
            bits += b as f64;
            count += c as f64;
        }
        truth.push(targets);
        gains.push(sigma);
        reported.push(w);
    }
    let snr = 10f64.powf(sim.snr_db / 10.0);
    let mut se = 0.0;
    for t in 0..sim.n_3 {
        let channels = DMatrix::from_fn(k, n_ap, |u, a| {
            truth[u].subbands[t][(a, 0)].conj() * gains[u][t][0]
        });
        let estimates = DMatrix::from_fn(k, n_ap, |u, a| {
            reported[u].subbands[t][(a, 0)].conj() * gains[u][t][0]
        });
        se += rzf_sinr(&channels, &estimates, snr)
            .iter()
            .map(|s| (1.0 + s).log2())
            .sum::<f64>();
    }
    Ok(DropResult {
        se: se / (sim.n_3 * k) as f64,
        overhead_bits: bits / k as f64,
        indicator_count: count / k as f64,
    })
}

/// Mean and 95% bootstrap half-width of `samples`.
pub fn bootstrap_mean_ci(samples: &[f64], seed: u64) -> (f64, f64) {
    let (lo, hi) = bootstrap_interval(samples, seed);
    (mean(samples), (hi - lo) / 2.0)
}

/// 95% bootstrap percentile interval of the mean of `samples`.
pub fn bootstrap_interval(samples: &[f64], seed: u64) -> (f64, f64) {
    const RESAMPLES: usize = 2000;
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..RESAMPLES)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let at = |q: f64| means[((q * (RESAMPLES - 1) as f64).round() as usize).min(RESAMPLES - 1)];
    (at(0.025), at(0.975))
}

/// 95% bootstrap interval of the mean paired difference `a - b`.
pub fn paired_difference_interval(a: &[f64], b: &[f64], seed: u64) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} and {} paired samples",
            a.len(),
            b.len()
        )));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(bootstrap_interval(&diff, seed))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Evaluates one scheme over pre-generated drops.
pub fn evaluate_se(drops: &[Drop], spec: &SchemeSpec, sim: &SimConfig) -> Result<SeResult> {
    Ok(sweep_drops(drops, std::slice::from_ref(spec), sim)?.remove(0))
}

fn sweep_drops(drops: &[Drop], grid: &[SchemeSpec], sim: &SimConfig) -> Result<Vec<SeResult>> {
    if drops.is_empty() {
        return Err(Error::config("drops", "at least one drop required"));
    }
    if grid.is_empty() {
        return Err(Error::config("grid", "at least one scheme required"));
    }
    let configs = grid
        .iter()
        .map(|s| s.codebook_config(sim))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<DropResult>> = drops
        .par_iter()
        .map(|d| {
            grid.iter()
                .zip(&configs)
                .map(|(s, c)| evaluate_drop_with(d, s, c.as_ref(), sim))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(&rows, grid, sim))
}

fn aggregate(rows: &[Vec<DropResult>], grid: &[SchemeSpec], sim: &SimConfig) -> Vec<SeResult> {
    grid.iter()
        .enumerate()
        .map(|(j, spec)| {
            let per_drop: Vec<f64> = rows.iter().map(|r| r[j].se).collect();
            let (mean_se, ci95) = bootstrap_mean_ci(&per_drop, derive_seed(sim.seed, j as u64));
            let n = rows.len() as f64;
            SeResult {
                label: spec.label(),
                spec: *spec,
                mean_se,
                ci95,
                drops: rows.len(),
                overhead_bits: rows.iter().map(|r| r[j].overhead_bits).sum::<f64>() / n,
                indicator_count: rows.iter().map(|r| r[j].indicator_count).sum::<f64>() / n,
                per_drop,
            }
        })
        .collect()
}

/// Runs every scheme of `grid` on the same seeded ensemble, one row per
/// scheme. Drops are generated and evaluated in parallel.
pub fn sweep(grid: &[SchemeSpec], sim: &SimConfig) -> Result<Vec<SeResult>> {
    sim.validate()?;
    if grid.is_empty() {
        return Err(Error::config("grid", "at least one scheme required"));
    }
    let configs = grid
        .iter()
        .map(|s| s.codebook_config(sim))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<DropResult>> = (0..sim.drops)
        .into_par_iter()
        .map(|i| {
            let drop = gen_drop(sim, i)?;
            grid.iter()
                .zip(&configs)
                .map(|(s, c)| evaluate_drop_with(&drop, s, c.as_ref(), sim))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(&rows, grid, sim))
}

/// Generates the whole ensemble of a configuration.
pub fn gen_ensemble(sim: &SimConfig) -> Result<Vec<Drop>> {
    sim.validate()?;
    (0..sim.drops)
        .into_par_iter()
        .map(|i| gen_drop(sim, i))
        .collect()
}

/// CSV header of [`csv_row`].
pub const CSV_HEADER: &str =
    "kind,L,M_v,beta,n_psk,K,snr_db,drops,mean_se,ci95,overhead_bits,indicator_count";

/// One CSV line (no trailing newline); numbers carry 9 significant digits.
pub fn csv_row(row: &SeResult, sim: &SimConfig) -> String {
    let p = &row.spec.params;
    let (l, m_v, beta, n_psk) = match row.spec.scheme {
        Scheme::Genie => (String::new(), String::new(), String::new(), String::new()),
        Scheme::Codebook(kind) => match kind {
            CodebookKind::Type1SinglePanel | CodebookKind::Type1MultiPanel => {
                (String::new(), String::new(), String::new(), String::new())
            }
            CodebookKind::Type2 | CodebookKind::Type2PortSelection => (
                p.l_beams.to_string(),
                String::new(),
                String::new(),
                p.n_psk.to_string(),
            ),
            CodebookKind::EType2 | CodebookKind::EType2PortSelection => {
                let m_v = EType2Params {
                    l_beams: p.l_beams,
                    p_v: p.p_v,
                    beta: p.beta,
                    r: p.r,
                    n_3: sim.n_3,
                }
                .m_v();
                (
                    p.l_beams.to_string(),
                    m_v.to_string(),
                    p.beta.to_string(),
                    p.n_psk.to_string(),
                )
            }
            CodebookKind::FeType2PortSelection => {
                let k = p.alpha.num * p.n_ports / p.alpha.den.max(1);
                (
                    k.to_string(),
                    p.m.to_string(),
                    String::new(),
                    p.n_psk.to_string(),
                )
            }
        },
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        row.label,
        l,
        m_v,
        beta,
        n_psk,
        sim.users,
        fmt_sig(sim.snr_db),
        row.drops,
        fmt_sig(row.mean_se),
        fmt_sig(row.ci95),
        fmt_sig(row.overhead_bits),
        fmt_sig(row.indicator_count)
    )
}

/// Formats `x` with 9 significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = x.abs().log10().floor() as i32;
    let decimals = (8 - digits).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
