//! Geometric wideband multipath channel.
//!
//! Entry `(r, a, t)` of a realization is
//! `Σ_p gain_p · rx_p[r] · conj(v_p[a]) · exp(-j2π t delay_p / n_3)` where
//! `v_p` is the dual-polarized array response of path `p`. With this
//! convention the matched precoder of a path is `v_p` itself, so on-grid
//! paths line up with [`crate::beamgrid::dft_beam`] and delays with the
//! positive-exponent frequency basis.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::beamgrid::{steering, AntennaConfig};
use crate::{Error, Result, C64};

/// One propagation path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Azimuth in radians; horizontal spatial frequency is `sin(azimuth) / 2`.
    pub azimuth: f64,
    /// Zenith in radians; vertical spatial frequency is `cos(zenith) / 2`.
    pub zenith: f64,
    /// Delay in units of `1 / (n_3 · subband bandwidth)`.
    pub delay: f64,
    pub gain: C64,
    /// Second-polarization response relative to the first (unit modulus).
    pub xpol: C64,
    /// Per receive antenna response (unit modulus), length `n_rx`.
    pub rx: Vec<C64>,
}

impl Path {
    /// Path whose spatial frequencies land exactly on grid beam `(m1, m2)`.
    pub fn on_grid(
        cfg: &AntennaConfig,
        m1: usize,
        m2: usize,
        delay: f64,
        gain: C64,
        xpol: C64,
        rx: Vec<C64>,
    ) -> Result<Path> {
        Error::check_range("m1", m1, cfg.grid1())?;
        Error::check_range("m2", m2, cfg.grid2())?;
        let wrap = |m: usize, g: usize| {
            let u = m as f64 / g as f64;
            if u >= 0.5 {
                u - 1.0
            } else {
                u
            }
        };
        let u1 = wrap(m1, cfg.grid1());
        let u2 = wrap(m2, cfg.grid2());
        Ok(Path {
            azimuth: (2.0 * u1).clamp(-1.0, 1.0).asin(),
            zenith: (2.0 * u2).clamp(-1.0, 1.0).acos(),
            delay,
            gain,
            xpol,
            rx,
        })
    }

    /// Horizontal and vertical spatial frequencies in cycles per element.
    pub fn spatial_frequencies(&self) -> (f64, f64) {
        (0.5 * self.azimuth.sin(), 0.5 * self.zenith.cos())
    }

    /// Dual-polarized response over all `n_ap` ports.
    pub fn array_response(&self, cfg: &AntennaConfig) -> Vec<C64> {
        let (u1, u2) = self.spatial_frequencies();
        let panel = steering(cfg, u1, u2);
        let mut out = Vec::with_capacity(cfg.n_ap());
        for g in 0..cfg.ng {
            // panels are stacked horizontally, n1 elements apart
            let shift = C64::from_polar(1.0, 2.0 * PI * (g * cfg.n1) as f64 * u1);
            out.extend(panel.iter().map(|x| x * shift));
            out.extend(panel.iter().map(|x| x * shift * self.xpol));
        }
        out
    }
}

/// Paths of one user. Total power `Σ |gain|²` is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Result<PathSet> {
        if paths.is_empty() {
            return Err(Error::config("paths", "at least one path is required"));
        }
        let mut set = PathSet { paths };
        set.normalize();
        Ok(set)
    }

    pub fn normalize(&mut self) {
        let total: f64 = self.paths.iter().map(|p| p.gain.norm_sqr()).sum();
        if total > 0.0 {
            let s = total.sqrt();
            for p in &mut self.paths {
                p.gain /= s;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Distribution of randomly drawn paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomPathSpec {
    pub n_paths: usize,
    /// Full azimuth sector width in radians, centred on broadside.
    pub sector: f64,
    /// Delays are uniform over `[0, max_delay_fraction · n_3)`.
    pub max_delay_fraction: f64,
}

impl RandomPathSpec {
    pub fn new(n_paths: usize) -> Self {
        RandomPathSpec {
            n_paths,
            sector: 2.0 * PI / 3.0,
            max_delay_fraction: 0.25,
        }
    }

    pub fn draw(&self, rng: &mut impl Rng, n_rx: usize, n_3: usize) -> Result<PathSet> {
        if self.n_paths == 0 {
            return Err(Error::config("n_paths", "must be at least 1"));
        }
        let paths = (0..self.n_paths)
            .map(|_| Path {
                azimuth: (rng.random::<f64>() - 0.5) * self.sector,
                zenith: PI / 3.0 + rng.random::<f64>() * PI / 3.0,
                delay: rng.random::<f64>() * self.max_delay_fraction * n_3 as f64,
                gain: complex_normal(rng),
                xpol: random_phase(rng),
                rx: (0..n_rx).map(|_| random_phase(rng)).collect(),
            })
            .collect();
        PathSet::new(paths)
    }
}

/// Where the paths of a realization come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PathSource {
    Explicit(PathSet),
    Random(RandomPathSpec),
}

/// Complex channel tensor `n_rx x n_ap x n_3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    n_rx: usize,
    n_ap: usize,
    subbands: Vec<DMatrix<C64>>,
    pub seed: Option<u64>,
    pub paths: Option<PathSet>,
}

impl ChannelRealization {
    /// Wraps per-subband `n_rx x n_ap` matrices.
    pub fn from_subbands(subbands: Vec<DMatrix<C64>>) -> Result<Self> {
        let first = subbands
            .first()
            .ok_or_else(|| Error::DimensionMismatch("channel needs at least one subband".into()))?;
        let (n_rx, n_ap) = first.shape();
        if n_rx == 0 || n_ap == 0 {
            return Err(Error::DimensionMismatch("empty channel matrix".into()));
        }
        if subbands.iter().any(|m| m.shape() != (n_rx, n_ap)) {
            return Err(Error::DimensionMismatch(
                "subband matrices differ in shape".into(),
            ));
        }
        Ok(ChannelRealization {
            n_rx,
            n_ap,
            subbands,
            seed: None,
            paths: None,
        })
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_ap(&self) -> usize {
        self.n_ap
    }

    pub fn n_3(&self) -> usize {
        self.subbands.len()
    }

    pub fn subband(&self, t: usize) -> &DMatrix<C64> {
        &self.subbands[t]
    }

    pub fn subbands(&self) -> &[DMatrix<C64>] {
        &self.subbands
    }

    pub fn entry(&self, r: usize, a: usize, t: usize) -> C64 {
        self.subbands[t][(r, a)]
    }

    /// Checks the port count against `cfg`.
    pub fn check_config(&self, cfg: &AntennaConfig) -> Result<()> {
        if self.n_ap != cfg.n_ap() {
            return Err(Error::DimensionMismatch(format!(
                "channel has {} ports, configuration has {}",
                self.n_ap,
                cfg.n_ap()
            )));
        }
        Ok(())
    }

    /// Total energy `Σ_t ‖H_t‖²`.
    pub fn energy(&self) -> f64 {
        self.subbands.iter().map(|m| m.norm_squared()).sum()
    }
}

/// Synthesizes a realization. Deterministic in `seed`.
pub fn gen_channel(
    source: &PathSource,
    cfg: &AntennaConfig,
    n_rx: usize,
    n_3: usize,
    seed: u64,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    if n_rx == 0 || n_3 == 0 {
        return Err(Error::DimensionMismatch(
            "n_rx and n_3 must be positive".into(),
        ));
    }
    let paths = match source {
        PathSource::Explicit(p) => p.clone(),
        PathSource::Random(spec) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            spec.draw(&mut rng, n_rx, n_3)?
        }
    };
    for p in &paths.paths {
        if p.rx.len() != n_rx {
            return Err(Error::DimensionMismatch(format!(
                "path has {} receive responses, n_rx is {n_rx}",
                p.rx.len()
            )));
        }
        if !(0.0..n_3 as f64).contains(&p.delay) {
            return Err(Error::config(
                "delay",
                format!("{} outside [0, {n_3})", p.delay),
            ));
        }
    }
    let mut ch = synthesize(&paths, cfg, n_rx, n_3);
    ch.seed = Some(seed);
    ch.paths = Some(paths);
    Ok(ch)
}

fn synthesize(paths: &PathSet, cfg: &AntennaConfig, n_rx: usize, n_3: usize) -> ChannelRealization {
    let n_ap = cfg.n_ap();
    let responses: Vec<Vec<C64>> = paths.paths.iter().map(|p| p.array_response(cfg)).collect();
    let subbands = (0..n_3)
        .map(|t| {
            let mut h = DMatrix::zeros(n_rx, n_ap);
            for (p, v) in paths.paths.iter().zip(&responses) {
                let phase = C64::from_polar(1.0, -2.0 * PI * t as f64 * p.delay / n_3 as f64);
                for r in 0..n_rx {
                    let s = p.gain * p.rx[r] * phase;
                    for a in 0..n_ap {
                        h[(r, a)] += s * v[a].conj();
                    }
                }
            }
            h
        })
        .collect();
    ChannelRealization {
        n_rx,
        n_ap,
        subbands,
        seed: None,
        paths: None,
    }
}

/// Uplink realization sharing the path geometry of `dl`.
///
/// Angles, delays and polarization responses are kept; gain phases and
/// receive responses are redrawn and gain magnitudes perturbed by at most
/// 0.5 dB before renormalization.
pub fn gen_ul_from_dl(
    dl: &ChannelRealization,
    cfg: &AntennaConfig,
    seed: u64,
) -> Result<ChannelRealization> {
    let dl_paths = dl
        .paths
        .as_ref()
        .ok_or_else(|| Error::config("paths", "downlink realization carries no path metadata"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = dl_paths
        .paths
        .iter()
        .map(|p| {
            let db = (rng.random::<f64>() - 0.5) * 1.0;
            let mag = p.gain.norm() * 10f64.powf(db / 20.0);
            Path {
                gain: C64::from_polar(mag, rng.random::<f64>() * 2.0 * PI),
                rx: p.rx.iter().map(|_| random_phase(&mut rng)).collect(),
                ..p.clone()
            }
        })
        .collect();
    let paths = PathSet::new(paths)?;
    let mut ch = synthesize(&paths, cfg, dl.n_rx(), dl.n_3());
    ch.seed = Some(seed);
    ch.paths = Some(paths);
    Ok(ch)
}

pub(crate) fn random_phase(rng: &mut impl Rng) -> C64 {
    C64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI)
}

pub(crate) fn complex_normal(rng: &mut impl Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Deterministic per-stream seed derived from a base seed (SplitMix64).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
