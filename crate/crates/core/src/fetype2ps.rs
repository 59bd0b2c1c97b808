//! Further Enhanced Type II port selection.
//!
//! The gNB derives spatial-frequency port precoders from uplink estimates
//! (angles and delays are shared between the links) and beamforms one CSI-RS
//! port per precoder on each polarization. The UE picks the strongest ports
//! and reports per-port coefficients on at most two layer-common frequency
//! bins.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::beamgrid::{dft_beam, AntennaConfig};
use crate::etype2::{delay_spectrum, fd_basis, Ratio};
use crate::linalg::{hermitian_top_eigenvectors, subband_targets};
use crate::pmi::{FeLayer, PmiFeType2PS};
use crate::quantizers::{
    amp_value, comb_decode, comb_encode, psk_phase, quantize_amp, quantize_phase, AmplitudeGrid,
    PskConfig,
};
use crate::{ChannelRealization, Error, Precoder, Result, C64};

/// Upper bound on the number of selected ports per polarization.
pub const MAX_SELECTED_PORTS: usize = 6;

/// How the gNB derives its port precoders from the uplink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PortMode {
    /// Strongest joint angle-delay DFT bins of one grid rotation.
    DftBased,
    /// Dominant eigenvectors of the joint spatial-frequency covariance.
    EigenBased,
}

/// UE report parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeParams {
    /// Fraction of the beamformed ports that is selected.
    pub alpha: Ratio,
    /// Frequency basis count, 1 or 2.
    pub m: usize,
    /// Range bound `N` of the nonzero frequency bin, 2 or 4.
    pub n_big: usize,
}

/// Reporting configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeConfig {
    /// Beamformed ports per polarization.
    pub n_ports: usize,
    pub rank: usize,
    pub params: FeParams,
    pub n_psk: usize,
    pub n_3: usize,
}

impl FeConfig {
    /// Selected ports per polarization, `α · n_ports`.
    pub fn k_ports(&self) -> usize {
        self.params.alpha.num * self.n_ports / self.params.alpha.den
    }

    /// Whether the nonzero-bin indicator `i16` is reported.
    pub fn has_i16(&self) -> bool {
        self.params.n_big == 4
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if p.alpha.den == 0 || !(p.alpha.num * self.n_ports).is_multiple_of(p.alpha.den) {
            return Err(Error::config(
                "alpha",
                format!("{} of {} ports is not an integer", p.alpha, self.n_ports),
            ));
        }
        let k = self.k_ports();
        if k == 0 || k > self.n_ports || k > MAX_SELECTED_PORTS {
            return Err(Error::config(
                "alpha",
                format!(
                    "{k} selected ports, expected 1 to {}",
                    self.n_ports.min(MAX_SELECTED_PORTS)
                ),
            ));
        }
        if !matches!(p.m, 1 | 2) {
            return Err(Error::config("m", format!("{}, expected 1 or 2", p.m)));
        }
        if !matches!(p.n_big, 2 | 4) {
            return Err(Error::config("N", format!("{}, expected 2 or 4", p.n_big)));
        }
        if p.m == 1 && p.n_big == 4 {
            return Err(Error::config(
                "N",
                "a single frequency bin has no bin indicator",
            ));
        }
        if p.m == 2 && p.n_big > self.n_3 {
            return Err(Error::config("N", format!("exceeds {} subbands", self.n_3)));
        }
        if !(1..=4).contains(&self.rank) {
            return Err(Error::config(
                "rank",
                format!("rank {}, expected 1 to 4", self.rank),
            ));
        }
        if self.n_3 == 0 {
            return Err(Error::config("n_3", "at least one subband required"));
        }
        PskConfig::new(self.n_psk)?;
        Ok(())
    }

    pub fn psk(&self) -> PskConfig {
        PskConfig::new(self.n_psk).expect("validated n_psk")
    }

    /// Whether coefficients are reported through a bitmap.
    pub fn has_bitmap(&self) -> bool {
        self.rank > 2
    }
}

/// Per-port spatial-frequency precoders, each `n_el x n_3`, applied to both
/// polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct PortPrecoders {
    ports: Vec<DMatrix<C64>>,
}

impl PortPrecoders {
    pub fn new(ports: Vec<DMatrix<C64>>) -> Result<Self> {
        let first = ports
            .first()
            .ok_or_else(|| Error::config("n_ports", "at least one port required"))?;
        if ports.iter().any(|p| p.shape() != first.shape()) {
            return Err(Error::DimensionMismatch(
                "port precoders differ in shape".into(),
            ));
        }
        Ok(PortPrecoders { ports })
    }

    /// One-hot element selectors, the same on every subband.
    pub fn identity(n_el: usize, n_3: usize) -> Self {
        let ports = (0..n_el)
            .map(|p| {
                DMatrix::from_fn(n_el, n_3, |e, _| {
                    C64::new(if e == p { 1.0 } else { 0.0 }, 0.0)
                })
            })
            .collect();
        PortPrecoders { ports }
    }

    /// Frequency-flat ports from the columns of `beams` (`n_el x P`).
    pub fn wideband(beams: &DMatrix<C64>, n_3: usize) -> Self {
        let ports = beams
            .column_iter()
            .map(|c| DMatrix::from_fn(beams.nrows(), n_3, |e, _| c[e]))
            .collect();
        PortPrecoders { ports }
    }

    pub fn n_ports(&self) -> usize {
        self.ports.len()
    }

    pub fn n_el(&self) -> usize {
        self.ports[0].nrows()
    }

    pub fn n_3(&self) -> usize {
        self.ports[0].ncols()
    }

    pub fn port(&self, k: usize) -> &DMatrix<C64> {
        &self.ports[k]
    }

    /// `n_el x P` matrix of the port vectors on subband `t`.
    pub fn subband(&self, t: usize) -> DMatrix<C64> {
        DMatrix::from_fn(self.n_el(), self.n_ports(), |e, k| self.ports[k][(e, t)])
    }
}

/// Channel seen by the UE through the beamformed ports:
/// `G_t = H_t blkdiag(P_t, P_t)`, `n_rx x 2P` per subband.
pub fn effective_channel(
    channel: &ChannelRealization,
    ports: &PortPrecoders,
) -> Result<ChannelRealization> {
    let n_el = ports.n_el();
    if channel.n_ap() != 2 * n_el || channel.n_3() != ports.n_3() {
        return Err(Error::DimensionMismatch(format!(
            "channel {}x{} ports/subbands, port precoders {}x{}",
            channel.n_ap(),
            channel.n_3(),
            2 * n_el,
            ports.n_3()
        )));
    }
    let p = ports.n_ports();
    let subbands = channel
        .subbands()
        .iter()
        .enumerate()
        .map(|(t, h)| {
            let pt = ports.subband(t);
            let mut g = DMatrix::zeros(h.nrows(), 2 * p);
            for pol in 0..2 {
                let part = h.columns(pol * n_el, n_el) * &pt;
                g.columns_mut(pol * p, p).copy_from(&part);
            }
            g
        })
        .collect();
    ChannelRealization::from_subbands(subbands)
}

/// Uplink observation vectors `conj(H[r, pol, :, :])` flattened element-fastest.
fn uplink_samples(ul: &[ChannelRealization], n_el: usize) -> Vec<Vec<C64>> {
    let mut out = Vec::new();
    for ch in ul {
        for r in 0..ch.n_rx() {
            for pol in 0..2 {
                let mut d = Vec::with_capacity(n_el * ch.n_3());
                for t in 0..ch.n_3() {
                    for e in 0..n_el {
                        d.push(ch.entry(r, pol * n_el + e, t).conj());
                    }
                }
                out.push(d);
            }
        }
    }
    out
}

/// gNB-side port precoders from one or more uplink snapshots.
pub fn gnb_port_precoders(
    ul: &[ChannelRealization],
    cfg: &AntennaConfig,
    n_ports: usize,
    mode: PortMode,
) -> Result<PortPrecoders> {
    let first = ul
        .first()
        .ok_or_else(|| Error::config("ul", "at least one uplink snapshot required"))?;
    if cfg.ng != 1 {
        return Err(Error::config("ng", "port precoding assumes a single panel"));
    }
    for ch in ul {
        ch.check_config(cfg)?;
        if ch.n_3() != first.n_3() {
            return Err(Error::DimensionMismatch(
                "snapshots differ in subband count".into(),
            ));
        }
    }
    let n_el = cfg.panel_elements();
    let n_3 = first.n_3();
    let dim = n_el * n_3;
    if n_ports == 0 || n_ports > dim {
        return Err(Error::config(
            "n_ports",
            format!("{n_ports} ports, {dim} spatial-frequency dimensions available"),
        ));
    }
    let samples = uplink_samples(ul, n_el);
    let ports = match mode {
        PortMode::EigenBased => eigen_ports(&samples, n_el, n_3, n_ports),
        PortMode::DftBased => dft_ports(&samples, cfg, n_3, n_ports)?,
    };
    PortPrecoders::new(ports)
}

fn reshape(v: impl Fn(usize) -> C64, n_el: usize, n_3: usize, scale: f64) -> DMatrix<C64> {
    DMatrix::from_fn(n_el, n_3, |e, t| v(t * n_el + e) * scale)
}

fn eigen_ports(samples: &[Vec<C64>], n_el: usize, n_3: usize, n_ports: usize) -> Vec<DMatrix<C64>> {
    let dim = n_el * n_3;
    let scale = (dim as f64).sqrt();
    let data = DMatrix::from_fn(dim, samples.len(), |a, s| samples[s][a]);
    if n_ports <= samples.len().min(dim) {
        let svd = data.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .total_cmp(&svd.singular_values[a])
                .then(a.cmp(&b))
        });
        order
            .iter()
            .take(n_ports)
            .map(|&j| reshape(|a| u[(a, j)], n_el, n_3, scale))
            .collect()
    } else {
        let cov = &data * data.adjoint();
        let (_, vecs) = hermitian_top_eigenvectors(&cov, n_ports);
        (0..n_ports)
            .map(|j| reshape(|a| vecs[(a, j)], n_el, n_3, scale))
            .collect()
    }
}

/// Delay-grid oversampling of the DFT-based port search.
pub const DELAY_OVERSAMPLING: usize = 4;

/// Matching pursuit over joint angle-delay atoms `beam(m1, m2) ⊗ ramp(f)` on
/// the oversampled spatial grid and a delay grid oversampled by
/// [`DELAY_OVERSAMPLING`]. Each step picks the atom with the largest residual
/// uplink energy and deflates every sample along it.
fn dft_ports(
    samples: &[Vec<C64>],
    cfg: &AntennaConfig,
    n_3: usize,
    n_ports: usize,
) -> Result<Vec<DMatrix<C64>>> {
    let n_el = cfg.panel_elements();
    let n_f = DELAY_OVERSAMPLING * n_3;
    let beams: Vec<Vec<C64>> = (0..cfg.grid1())
        .flat_map(|m1| (0..cfg.grid2()).map(move |m2| (m1, m2)))
        .map(|(m1, m2)| dft_beam(cfg, m1, m2).map(|b| b.entries))
        .collect::<Result<_>>()?;
    let ramp = |f: usize, t: usize| C64::from_polar(1.0, 2.0 * PI * (t * f) as f64 / n_f as f64);
    // coef[(b * n_f + f) * S + s] = atom^H sample_s
    let n_s = samples.len();
    let mut coef = vec![C64::new(0.0, 0.0); beams.len() * n_f * n_s];
    for (b, w) in beams.iter().enumerate() {
        for (s, d) in samples.iter().enumerate() {
            let per_t: Vec<C64> = (0..n_3)
                .map(|t| (0..n_el).map(|e| w[e].conj() * d[t * n_el + e]).sum())
                .collect();
            for f in 0..n_f {
                let v: C64 = per_t
                    .iter()
                    .enumerate()
                    .map(|(t, x)| ramp(f, t).conj() * x)
                    .sum();
                coef[(b * n_f + f) * n_s + s] = v;
            }
        }
    }
    let atom_norm = (n_el * n_3) as f64;
    let beam_ip = |a: usize, b: usize| -> C64 {
        beams[a]
            .iter()
            .zip(&beams[b])
            .map(|(x, y)| x.conj() * y)
            .sum()
    };
    let ramp_ip =
        |f: usize, g: usize| -> C64 { (0..n_3).map(|t| ramp(f, t).conj() * ramp(g, t)).sum() };
    let mut chosen = Vec::with_capacity(n_ports);
    for _ in 0..n_ports {
        let mut best = (f64::NEG_INFINITY, 0);
        for a in 0..beams.len() * n_f {
            if chosen.contains(&a) {
                continue;
            }
            let e: f64 = coef[a * n_s..(a + 1) * n_s]
                .iter()
                .map(|c| c.norm_sqr())
                .sum();
            if e > best.0 {
                best = (e, a);
            }
        }
        let k = best.1;
        chosen.push(k);
        let picked: Vec<C64> = coef[k * n_s..(k + 1) * n_s].to_vec();
        let (kb, kf) = (k / n_f, k % n_f);
        let ramp_row: Vec<C64> = (0..n_f).map(|f| ramp_ip(f, kf)).collect();
        for b in 0..beams.len() {
            let g_b = beam_ip(b, kb);
            if g_b.norm() < 1e-12 {
                continue;
            }
            for f in 0..n_f {
                let g = g_b * ramp_row[f] / atom_norm;
                let a = b * n_f + f;
                for s in 0..n_s {
                    coef[a * n_s + s] -= g * picked[s];
                }
            }
        }
    }
    Ok(chosen
        .into_iter()
        .map(|a| {
            let (b, f) = (a / n_f, a % n_f);
            DMatrix::from_fn(n_el, n_3, |e, t| beams[b][e] * ramp(f, t))
        })
        .collect())
}

/// Unquantized UE report: selected ports, layer-common bins and normalized
/// coefficients `[layer][i * m + f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeAnalysis {
    pub selected: Vec<usize>,
    pub n3: Vec<usize>,
    pub coefficients: Vec<Vec<C64>>,
}

/// Port selection and frequency compression without quantization.
/// `effective` is the channel seen through the ports (`n_rx x 2P x n_3`).
pub fn analyze_fetype2ps(effective: &ChannelRealization, config: &FeConfig) -> Result<FeAnalysis> {
    config.validate()?;
    let p = config.n_ports;
    if effective.n_ap() != 2 * p || effective.n_3() != config.n_3 {
        return Err(Error::DimensionMismatch(format!(
            "effective channel has {} ports and {} subbands, expected {} and {}",
            effective.n_ap(),
            effective.n_3(),
            2 * p,
            config.n_3
        )));
    }
    let k = config.k_ports();
    let energy: Vec<f64> = (0..p)
        .map(|port| {
            effective
                .subbands()
                .iter()
                .map(|g| g.column(port).norm_squared() + g.column(p + port).norm_squared())
                .sum()
        })
        .collect();
    let mut selected: Vec<usize> = (0..p).collect();
    selected.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]).then(a.cmp(&b)));
    selected.truncate(k);
    selected.sort_unstable();

    let cols: Vec<usize> = selected
        .iter()
        .copied()
        .chain(selected.iter().map(|s| s + p))
        .collect();
    let reduced = ChannelRealization::from_subbands(
        effective
            .subbands()
            .iter()
            .map(|g| g.select_columns(&cols))
            .collect(),
    )?;
    let (targets, _) = subband_targets(&reduced, config.rank)?;
    let spectra: Vec<Vec<Vec<C64>>> = (0..config.rank)
        .map(|l| {
            let per_t: Vec<Vec<C64>> = targets
                .subbands
                .iter()
                .map(|m| m.column(l).iter().copied().collect())
                .collect();
            delay_spectrum(&per_t)
        })
        .collect();
    let n3 = if config.params.m == 1 {
        vec![0]
    } else {
        let mut best = (f64::NEG_INFINITY, 1);
        for n in 1..config.params.n_big {
            let e: f64 = spectra
                .iter()
                .flat_map(|s| s.iter().map(move |row| row[n].norm_sqr()))
                .sum();
            if e > best.0 {
                best = (e, n);
            }
        }
        vec![0, best.1]
    };
    let m = n3.len();
    let coefficients = spectra
        .iter()
        .map(|spec| {
            let mut c: Vec<C64> = (0..2 * k)
                .flat_map(|i| n3.iter().map(move |&n| spec[i][n]))
                .collect();
            let peak = (0..c.len())
                .max_by(|&a, &b| c[a].norm().total_cmp(&c[b].norm()).then(b.cmp(&a)))
                .expect("non-empty coefficients");
            let reference = c[peak];
            if reference.norm() > 0.0 {
                for x in &mut c {
                    *x /= reference;
                }
            }
            debug_assert_eq!(c.len(), 2 * k * m);
            c
        })
        .collect();
    Ok(FeAnalysis {
        selected,
        n3,
        coefficients,
    })
}

/// Quantizes an analysis into a PMI.
pub fn quantize_fetype2ps(analysis: &FeAnalysis, config: &FeConfig) -> Result<PmiFeType2PS> {
    config.validate()?;
    let psk = config.psk();
    let layers = analysis
        .coefficients
        .iter()
        .map(|c| {
            let amps: Vec<usize> = c
                .iter()
                .map(|x| quantize_amp(x.norm().min(1.0), AmplitudeGrid::Sb3Bit))
                .collect();
            let phases: Vec<usize> = c.iter().map(|x| quantize_phase(*x, psk)).collect();
            if config.has_bitmap() {
                let bitmap: Vec<bool> = amps.iter().map(|&a| a > 0).collect();
                let keep = |v: &[usize]| -> Vec<usize> {
                    v.iter()
                        .zip(&bitmap)
                        .filter(|(_, &b)| b)
                        .map(|(x, _)| *x)
                        .collect()
                };
                FeLayer {
                    amps: keep(&amps),
                    phases: keep(&phases),
                    bitmap: Some(bitmap),
                }
            } else {
                FeLayer {
                    bitmap: None,
                    amps,
                    phases,
                }
            }
        })
        .collect();
    Ok(PmiFeType2PS {
        port_choice: comb_encode(&analysis.selected, config.n_ports)?,
        n3: analysis.n3.clone(),
        layers,
    })
}

/// UE-side encoder on the channel seen through the beamformed ports.
pub fn encode_fetype2ps(effective: &ChannelRealization, config: &FeConfig) -> Result<PmiFeType2PS> {
    quantize_fetype2ps(&analyze_fetype2ps(effective, config)?, config)
}

/// Checks the PMI structure against the configuration.
pub fn check_pmi(pmi: &PmiFeType2PS, config: &FeConfig) -> Result<()> {
    config.validate()?;
    comb_decode(pmi.port_choice, config.n_ports, config.k_ports())?;
    let m = config.params.m;
    if pmi.n3.len() != m || pmi.n3[0] != 0 {
        return Err(Error::MalformedPmi("n3 must be [0] or [0, n]".into()));
    }
    if m == 2 && !(1..config.params.n_big).contains(&pmi.n3[1]) {
        return Err(Error::MalformedPmi(format!(
            "nonzero bin {} outside [1, {})",
            pmi.n3[1], config.params.n_big
        )));
    }
    if pmi.layers.len() != config.rank {
        return Err(Error::MalformedPmi(format!(
            "{} layers for rank {}",
            pmi.layers.len(),
            config.rank
        )));
    }
    let n = 2 * config.k_ports() * m;
    for layer in &pmi.layers {
        let reported = match (&layer.bitmap, config.has_bitmap()) {
            (Some(b), true) => {
                if b.len() != n {
                    return Err(Error::MalformedPmi("bitmap length mismatch".into()));
                }
                b.iter().filter(|&&x| x).count()
            }
            (None, false) => n,
            _ => {
                return Err(Error::MalformedPmi(
                    "bitmap presence does not match the rank".into(),
                ))
            }
        };
        if layer.amps.len() != reported || layer.phases.len() != reported {
            return Err(Error::MalformedPmi(format!(
                "{reported} coefficients reported, {} amplitudes and {} phases",
                layer.amps.len(),
                layer.phases.len()
            )));
        }
        for &a in &layer.amps {
            Error::check_range("amplitude", a, AmplitudeGrid::Sb3Bit.cardinality())?;
        }
        for &c in &layer.phases {
            Error::check_range("phase", c, config.n_psk)?;
        }
    }
    Ok(())
}

/// Dequantized `[layer][i * m + f]` coefficients and selected ports.
pub fn dequantize(pmi: &PmiFeType2PS, config: &FeConfig) -> Result<FeAnalysis> {
    check_pmi(pmi, config)?;
    let n = 2 * config.k_ports() * config.params.m;
    let psk = config.psk();
    let coefficients = pmi
        .layers
        .iter()
        .map(|layer| {
            let mut c = vec![C64::new(0.0, 0.0); n];
            let positions: Vec<usize> = match &layer.bitmap {
                Some(b) => (0..n).filter(|&k| b[k]).collect(),
                None => (0..n).collect(),
            };
            for (j, k) in positions.into_iter().enumerate() {
                c[k] = psk_phase(layer.phases[j], psk)?
                    * amp_value(layer.amps[j], AmplitudeGrid::Sb3Bit)?;
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    Ok(FeAnalysis {
        selected: comb_decode(pmi.port_choice, config.n_ports, config.k_ports())?,
        n3: pmi.n3.clone(),
        coefficients,
    })
}

/// Antenna-domain precoder of an (unquantized or dequantized) report.
pub fn reconstruct_fe(
    analysis: &FeAnalysis,
    ports: &PortPrecoders,
    n_3: usize,
) -> Result<Precoder> {
    if ports.n_3() != n_3 {
        return Err(Error::DimensionMismatch(format!(
            "port precoders span {} subbands, report {}",
            ports.n_3(),
            n_3
        )));
    }
    for &s in &analysis.selected {
        Error::check_range("selected port", s, ports.n_ports())?;
    }
    let k = analysis.selected.len();
    let m = analysis.n3.len();
    let n_el = ports.n_el();
    let fd = fd_basis(n_3, &analysis.n3)?;
    let rank = analysis.coefficients.len();
    let subbands = (0..n_3)
        .map(|t| {
            let mut w = DMatrix::zeros(2 * n_el, rank);
            for (l, c) in analysis.coefficients.iter().enumerate() {
                for i in 0..2 * k {
                    let (pol, port) = (i / k, analysis.selected[i % k]);
                    let coef: C64 = (0..m).map(|f| c[i * m + f] * fd[(t, f)]).sum();
                    for e in 0..n_el {
                        w[(pol * n_el + e, l)] += ports.port(port)[(e, t)] * coef;
                    }
                }
            }
            w
        })
        .collect();
    let mut p = Precoder::new(subbands);
    p.normalize_columns();
    Ok(p)
}

/// gNB-side decoder through the port precoders used for the CSI-RS.
pub fn decode_fetype2ps(
    pmi: &PmiFeType2PS,
    config: &FeConfig,
    ports: &PortPrecoders,
) -> Result<Precoder> {
    if ports.n_ports() != config.n_ports {
        return Err(Error::DimensionMismatch(format!(
            "{} port precoders, configuration has {}",
            ports.n_ports(),
            config.n_ports
        )));
    }
    reconstruct_fe(&dequantize(pmi, config)?, ports, config.n_3)
}
