//! Type I codebook, single- and multi-panel.
//!
//! A layer is one DFT beam repeated on every (panel, polarization) block and
//! scaled by a per-block co-phase. Layers 1 and 2 share the main beam and
//! differ in the sign of the second polarization; layers 3 and 4 repeat that
//! pattern on a neighbor beam one orthogonal step away.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::beamgrid::{dft_beam, AntennaConfig};
use crate::pmi::{PmiType1MP, PmiType1SP};
use crate::{ChannelRealization, Error, Precoder, Result, C64};

/// Reporting configuration for the single-panel codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Type1Config {
    pub antenna: AntennaConfig,
    pub rank: usize,
    pub n_3: usize,
}

impl Type1Config {
    pub fn validate(&self) -> Result<()> {
        self.antenna.validate()?;
        if self.antenna.ng != 1 {
            return Err(Error::config("ng", "single-panel codebook needs ng = 1"));
        }
        check_rank(&self.antenna, self.rank)?;
        check_subbands(self.n_3)
    }
}

/// Reporting configuration for the multi-panel codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Type1MpConfig {
    pub antenna: AntennaConfig,
    pub rank: usize,
    /// Codebook mode, 1 (wideband panel co-phase) or 2 (subband panel co-phase).
    pub c_m: usize,
    pub n_3: usize,
}

impl Type1MpConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.antenna;
        a.validate()?;
        if !matches!(a.ng, 2 | 4) {
            return Err(Error::config(
                "ng",
                format!("{} panels, expected 2 or 4", a.ng),
            ));
        }
        if !matches!(a.n_ap(), 8 | 16 | 32) {
            return Err(Error::config(
                "n_ap",
                format!("{} ports, expected 8, 16 or 32", a.n_ap()),
            ));
        }
        match (self.c_m, a.ng) {
            (1, _) | (2, 2) => {}
            (2, ng) => {
                return Err(Error::config(
                    "c_m",
                    format!("mode 2 needs 2 panels, got {ng}"),
                ))
            }
            (c, _) => return Err(Error::config("c_m", format!("mode {c}, expected 1 or 2"))),
        }
        check_rank(a, self.rank)?;
        check_subbands(self.n_3)
    }

    /// Number of wideband panel co-phase entries in `i14`.
    pub fn i14_len(&self) -> usize {
        if self.c_m == 2 {
            2
        } else {
            self.antenna.ng - 1
        }
    }

    /// Number of entries per subband in `i2`.
    pub fn i2_len(&self) -> usize {
        if self.c_m == 2 {
            3
        } else {
            1
        }
    }

    /// Range of entry `j` of a subband's `i2`.
    pub fn i2_range(&self, j: usize) -> usize {
        if j == 0 {
            cophase_range(self.rank)
        } else {
            4
        }
    }
}

fn check_rank(cfg: &AntennaConfig, rank: usize) -> Result<()> {
    if rank == 0 || rank > 4 {
        return Err(Error::config(
            "rank",
            format!("rank {rank} unsupported, expected 1 to 4"),
        ));
    }
    if rank > 2 && cfg.panel_elements() < 2 {
        return Err(Error::config(
            "rank",
            "ranks 3 and 4 need at least two elements per polarization",
        ));
    }
    Ok(())
}

fn check_subbands(n_3: usize) -> Result<()> {
    if n_3 == 0 {
        return Err(Error::config("n_3", "at least one subband required"));
    }
    Ok(())
}

/// Polarization co-phase `φ_n = exp(jπn/2)`.
pub fn cophase(n: usize) -> C64 {
    C64::from_polar(1.0, FRAC_PI_2 * n as f64)
}

/// Panel co-phase `a_p = exp(jπ/4) exp(jπp/2)`.
pub fn panel_cophase_a(p: usize) -> C64 {
    C64::from_polar(1.0, FRAC_PI_4 + FRAC_PI_2 * p as f64)
}

/// Subband panel co-phase `b_n = exp(-jπ/4) exp(jπn/2)`.
pub fn panel_cophase_b(n: usize) -> C64 {
    C64::from_polar(1.0, -FRAC_PI_4 + FRAC_PI_2 * n as f64)
}

/// Number of polarization co-phase hypotheses at a given rank.
pub fn cophase_range(rank: usize) -> usize {
    if rank == 1 {
        4
    } else {
        2
    }
}

/// Whether the neighbor-beam offset `i13` is reported.
pub fn has_i13(cfg: &AntennaConfig, rank: usize) -> bool {
    rank >= 3 && cfg.n_ap() > 16
}

/// Number of neighbor-beam offsets; the neighbor steps along the horizontal
/// axis unless the array has a single column.
pub fn i13_range(cfg: &AntennaConfig) -> usize {
    if cfg.n1 > 1 {
        cfg.n1 - 1
    } else {
        cfg.n2 - 1
    }
}

/// Checks a single-panel PMI against its configuration.
pub fn check_pmi_sp(pmi: &PmiType1SP, config: &Type1Config) -> Result<()> {
    config.validate()?;
    let a = &config.antenna;
    Error::check_range("i11", pmi.i11, a.grid1())?;
    Error::check_range("i12", pmi.i12, a.grid2())?;
    resolve_i13(a, config.rank, pmi.i13)?;
    if pmi.i2.len() != config.n_3 {
        return Err(Error::MalformedPmi(format!(
            "{} subband co-phases for {} subbands",
            pmi.i2.len(),
            config.n_3
        )));
    }
    for &n in &pmi.i2 {
        Error::check_range("i2", n, cophase_range(config.rank))?;
    }
    Ok(())
}

/// Checks a multi-panel PMI against its configuration.
pub fn check_pmi_mp(pmi: &PmiType1MP, config: &Type1MpConfig) -> Result<()> {
    config.validate()?;
    let a = &config.antenna;
    Error::check_range("i11", pmi.i11, a.grid1())?;
    Error::check_range("i12", pmi.i12, a.grid2())?;
    resolve_i13(a, config.rank, pmi.i13)?;
    if pmi.i14.len() != config.i14_len() {
        return Err(Error::MalformedPmi(format!(
            "i14 has {} entries, expected {}",
            pmi.i14.len(),
            config.i14_len()
        )));
    }
    for &p in &pmi.i14 {
        Error::check_range("i14", p, 4)?;
    }
    if pmi.i2.len() != config.n_3 {
        return Err(Error::MalformedPmi(format!(
            "{} subband co-phases for {} subbands",
            pmi.i2.len(),
            config.n_3
        )));
    }
    for i2 in &pmi.i2 {
        if i2.len() != config.i2_len() {
            return Err(Error::MalformedPmi(format!(
                "subband i2 has {} entries, expected {}",
                i2.len(),
                config.i2_len()
            )));
        }
        for (j, &n) in i2.iter().enumerate() {
            Error::check_range("i2", n, config.i2_range(j))?;
        }
    }
    Ok(())
}

fn neighbor(cfg: &AntennaConfig, m1: usize, m2: usize, k: usize) -> (usize, usize) {
    if cfg.n1 > 1 {
        ((m1 + cfg.o1 * (k + 1)) % cfg.grid1(), m2)
    } else {
        (m1, (m2 + cfg.o2 * (k + 1)) % cfg.grid2())
    }
}

/// `(uses neighbor beam, sign of second polarization)` per layer.
fn layer_layout(rank: usize) -> &'static [(bool, f64)] {
    const L: [(bool, f64); 4] = [(false, 1.0), (true, 1.0), (false, -1.0), (true, -1.0)];
    const L2: [(bool, f64); 2] = [(false, 1.0), (false, -1.0)];
    match rank {
        1 => &L[..1],
        2 => &L2,
        3 => &L[..3],
        _ => &L,
    }
}

/// Co-phase of every (panel, polarization) block, index `2 g + pol`.
fn block_coefficients(ng: usize, c_m: usize, i14: &[usize], i2: &[usize], sign: f64) -> Vec<C64> {
    let phi = cophase(i2[0]) * sign;
    let mut out = Vec::with_capacity(2 * ng);
    if c_m == 2 {
        out.push(C64::new(1.0, 0.0));
        out.push(phi);
        out.push(panel_cophase_a(i14[0]) * panel_cophase_b(i2[1]));
        out.push(panel_cophase_a(i14[1]) * panel_cophase_b(i2[2]) * sign);
    } else {
        for g in 0..ng {
            let a = if g == 0 {
                C64::new(1.0, 0.0)
            } else {
                panel_cophase_a(i14[g - 1])
            };
            out.push(a);
            out.push(a * phi);
        }
    }
    out
}

fn resolve_i13(cfg: &AntennaConfig, rank: usize, i13: Option<usize>) -> Result<usize> {
    match (has_i13(cfg, rank), i13) {
        (true, Some(k)) => {
            Error::check_range("i13", k, i13_range(cfg))?;
            Ok(k)
        }
        (false, None) => Ok(0),
        (true, None) => Err(Error::MalformedPmi("i13 required for this rank".into())),
        (false, Some(_)) => Err(Error::MalformedPmi("i13 not used for this rank".into())),
    }
}

struct Beams {
    main: Vec<C64>,
    neighbor: Vec<C64>,
}

fn layer_beams(cfg: &AntennaConfig, m1: usize, m2: usize, k: usize, rank: usize) -> Result<Beams> {
    let main = dft_beam(cfg, m1, m2)?.entries;
    let neighbor = if rank >= 3 {
        let (n1, n2) = neighbor(cfg, m1, m2, k);
        dft_beam(cfg, n1, n2)?.entries
    } else {
        Vec::new()
    };
    Ok(Beams { main, neighbor })
}

fn build_subband(
    cfg: &AntennaConfig,
    beams: &Beams,
    rank: usize,
    c_m: usize,
    i14: &[usize],
    i2: &[usize],
) -> DMatrix<C64> {
    let n_el = cfg.panel_elements();
    let scale = 1.0 / (cfg.n_ap() as f64).sqrt();
    let mut m = DMatrix::zeros(cfg.n_ap(), rank);
    for (j, &(nb, sign)) in layer_layout(rank).iter().enumerate() {
        let beam = if nb { &beams.neighbor } else { &beams.main };
        let coef = block_coefficients(cfg.ng, c_m, i14, i2, sign);
        for (blk, c) in coef.iter().enumerate() {
            for (e, w) in beam.iter().enumerate() {
                m[(blk * n_el + e, j)] = c * w * scale;
            }
        }
    }
    m
}

/// Rebuilds the single-panel precoder of `pmi` at the given rank.
pub fn decode_type1_sp(pmi: &PmiType1SP, cfg: &AntennaConfig, rank: usize) -> Result<Precoder> {
    Type1Config {
        antenna: *cfg,
        rank,
        n_3: pmi.i2.len(),
    }
    .validate()?;
    let k = resolve_i13(cfg, rank, pmi.i13)?;
    let beams = layer_beams(cfg, pmi.i11, pmi.i12, k, rank)?;
    let mut subbands = Vec::with_capacity(pmi.i2.len());
    for &n in &pmi.i2 {
        Error::check_range("i2", n, cophase_range(rank))?;
        subbands.push(build_subband(cfg, &beams, rank, 1, &[], &[n]));
    }
    Ok(Precoder::new(subbands))
}

/// Rebuilds the multi-panel precoder of `pmi`.
pub fn decode_type1_mp(
    pmi: &PmiType1MP,
    cfg: &AntennaConfig,
    rank: usize,
    c_m: usize,
) -> Result<Precoder> {
    let mp = Type1MpConfig {
        antenna: *cfg,
        rank,
        c_m,
        n_3: pmi.i2.len(),
    };
    mp.validate()?;
    if pmi.i14.len() != mp.i14_len() {
        return Err(Error::MalformedPmi(format!(
            "i14 has {} entries, expected {}",
            pmi.i14.len(),
            mp.i14_len()
        )));
    }
    for &p in &pmi.i14 {
        Error::check_range("i14", p, 4)?;
    }
    let k = resolve_i13(cfg, rank, pmi.i13)?;
    let beams = layer_beams(cfg, pmi.i11, pmi.i12, k, rank)?;
    let mut subbands = Vec::with_capacity(pmi.i2.len());
    for i2 in &pmi.i2 {
        if i2.len() != mp.i2_len() {
            return Err(Error::MalformedPmi(format!(
                "subband i2 has {} entries, expected {}",
                i2.len(),
                mp.i2_len()
            )));
        }
        for (j, &n) in i2.iter().enumerate() {
            Error::check_range("i2", n, mp.i2_range(j))?;
        }
        subbands.push(build_subband(cfg, &beams, rank, c_m, &pmi.i14, i2));
    }
    Ok(Precoder::new(subbands))
}

/// Per-subband Gram matrices of the block projections `H_t[:, blk] w` for
/// every beam of the oversampled grid, indexed `m1 * grid2 + m2`.
struct BeamGrams {
    blocks: usize,
    grams: Vec<Vec<Vec<C64>>>,
}

impl BeamGrams {
    fn new(channel: &ChannelRealization, cfg: &AntennaConfig) -> Result<BeamGrams> {
        let n_el = cfg.panel_elements();
        let blocks = 2 * cfg.ng;
        let n_rx = channel.n_rx();
        let mut grams = Vec::with_capacity(cfg.grid1() * cfg.grid2());
        let mut y = vec![C64::new(0.0, 0.0); blocks * n_rx];
        for m1 in 0..cfg.grid1() {
            for m2 in 0..cfg.grid2() {
                let w = dft_beam(cfg, m1, m2)?.entries;
                let mut per_t = Vec::with_capacity(channel.n_3());
                for h in channel.subbands() {
                    for blk in 0..blocks {
                        for r in 0..n_rx {
                            y[blk * n_rx + r] =
                                (0..n_el).map(|e| h[(r, blk * n_el + e)] * w[e]).sum();
                        }
                    }
                    let mut g = vec![C64::new(0.0, 0.0); blocks * blocks];
                    for a in 0..blocks {
                        for b in 0..blocks {
                            g[a * blocks + b] = (0..n_rx)
                                .map(|r| y[a * n_rx + r].conj() * y[b * n_rx + r])
                                .sum();
                        }
                    }
                    per_t.push(g);
                }
                grams.push(per_t);
            }
        }
        Ok(BeamGrams { blocks, grams })
    }

    /// `‖H_t Σ_blk coef_blk e_blk ⊗ w‖²` without the `1/n_ap` scale.
    fn energy(&self, beam: usize, t: usize, coef: &[C64]) -> f64 {
        let g = &self.grams[beam][t];
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..self.blocks {
            for b in 0..self.blocks {
                acc += coef[a].conj() * g[a * self.blocks + b] * coef[b];
            }
        }
        acc.re
    }
}

fn subband_metric(
    grams: &BeamGrams,
    cfg: &AntennaConfig,
    beam_ids: (usize, usize),
    t: usize,
    rank: usize,
    c_m: usize,
    i14: &[usize],
    i2: &[usize],
) -> f64 {
    layer_layout(rank)
        .iter()
        .map(|&(nb, sign)| {
            let coef = block_coefficients(cfg.ng, c_m, i14, i2, sign);
            grams.energy(if nb { beam_ids.1 } else { beam_ids.0 }, t, &coef)
        })
        .sum()
}

/// Every per-subband `i2` hypothesis in lexicographic order.
fn i2_hypotheses(rank: usize, c_m: usize) -> Vec<Vec<usize>> {
    let first = cophase_range(rank);
    if c_m == 2 {
        let mut out = Vec::new();
        for n0 in 0..first {
            for n1 in 0..4 {
                for n2 in 0..4 {
                    out.push(vec![n0, n1, n2]);
                }
            }
        }
        out
    } else {
        (0..first).map(|n| vec![n]).collect()
    }
}

fn i14_hypotheses(len: usize) -> Vec<Vec<usize>> {
    (0..4usize.pow(len as u32))
        .map(|code| (0..len).rev().map(|j| (code >> (2 * j)) & 3).collect())
        .collect()
}

struct Search {
    i11: usize,
    i12: usize,
    i13: Option<usize>,
    i14: Vec<usize>,
    i2: Vec<Vec<usize>>,
}

fn search(
    channel: &ChannelRealization,
    cfg: &AntennaConfig,
    rank: usize,
    c_m: usize,
) -> Result<Search> {
    channel.check_config(cfg)?;
    let grams = BeamGrams::new(channel, cfg)?;
    let i13_choices: Vec<Option<usize>> = if has_i13(cfg, rank) {
        (0..i13_range(cfg)).map(Some).collect()
    } else {
        vec![None]
    };
    let i14_len = if c_m == 2 { 2 } else { cfg.ng - 1 };
    let i14_all = i14_hypotheses(i14_len);
    let i2_all = i2_hypotheses(rank, c_m);
    let mut best: Option<(f64, Search)> = None;
    for m1 in 0..cfg.grid1() {
        for m2 in 0..cfg.grid2() {
            for &i13 in &i13_choices {
                let (n1, n2) = neighbor(cfg, m1, m2, i13.unwrap_or(0));
                let ids = (m1 * cfg.grid2() + m2, n1 * cfg.grid2() + n2);
                for i14 in &i14_all {
                    let mut total = 0.0;
                    let mut chosen = Vec::with_capacity(channel.n_3());
                    for t in 0..channel.n_3() {
                        let mut best_t = (f64::NEG_INFINITY, 0);
                        for (h, i2) in i2_all.iter().enumerate() {
                            let e = subband_metric(&grams, cfg, ids, t, rank, c_m, i14, i2);
                            if e > best_t.0 {
                                best_t = (e, h);
                            }
                        }
                        total += best_t.0;
                        chosen.push(i2_all[best_t.1].clone());
                    }
                    if best.as_ref().is_none_or(|(b, _)| total > *b) {
                        best = Some((
                            total,
                            Search {
                                i11: m1,
                                i12: m2,
                                i13,
                                i14: i14.clone(),
                                i2: chosen,
                            },
                        ));
                    }
                }
            }
        }
    }
    Ok(best.expect("non-empty search space").1)
}

/// Exhaustive single-panel search maximizing `Σ_t ‖H_t W‖²`: the beam is
/// wideband, the co-phase is chosen per subband. Ties go to the smallest
/// `(m1, m2, n)`.
pub fn encode_type1_sp(
    channel: &ChannelRealization,
    cfg: &AntennaConfig,
    rank: usize,
) -> Result<PmiType1SP> {
    Type1Config {
        antenna: *cfg,
        rank,
        n_3: channel.n_3(),
    }
    .validate()?;
    let s = search(channel, cfg, rank, 1)?;
    Ok(PmiType1SP {
        i11: s.i11,
        i12: s.i12,
        i13: s.i13,
        i2: s.i2.into_iter().map(|v| v[0]).collect(),
    })
}

/// Exhaustive multi-panel search; panel co-phases `i14` are wideband.
pub fn encode_type1_mp(
    channel: &ChannelRealization,
    cfg: &AntennaConfig,
    rank: usize,
    c_m: usize,
) -> Result<PmiType1MP> {
    Type1MpConfig {
        antenna: *cfg,
        rank,
        c_m,
        n_3: channel.n_3(),
    }
    .validate()?;
    let s = search(channel, cfg, rank, c_m)?;
    Ok(PmiType1MP {
        i11: s.i11,
        i12: s.i12,
        i13: s.i13,
        i14: s.i14,
        i2: s.i2,
    })
}
