//! Random configurations and valid PMIs shared by the integration tests.
#![allow(dead_code)]

use nr_codebook::etype2::{EType2Config, EType2Params, Ratio};
use nr_codebook::fetype2ps::{FeConfig, FeParams};
use nr_codebook::pmi::{
    CodebookConfig, EType2Layer, FeLayer, PmiEType2, PmiFeType2PS, PmiType1MP, PmiType1SP,
    PmiType2, SpatialChoice, Type2Layer,
};
use nr_codebook::quantizers::binomial;
use nr_codebook::type1::{cophase_range, has_i13, i13_range, Type1Config, Type1MpConfig};
use nr_codebook::type2::{port_groups, Type2Config};
use nr_codebook::{AntennaConfig, CodebookKind, Pmi};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub const SP_ARRAYS: [(usize, usize, usize, usize); 7] = [
    (2, 1, 4, 1),
    (2, 2, 4, 4),
    (4, 1, 4, 1),
    (3, 2, 4, 4),
    (4, 2, 4, 4),
    (4, 4, 4, 4),
    (8, 2, 4, 4),
];

pub const MP_ARRAYS: [(usize, usize, usize); 5] =
    [(2, 2, 1), (2, 4, 1), (4, 2, 1), (2, 2, 2), (4, 2, 2)];

pub fn sp_antenna(rng: &mut impl Rng) -> AntennaConfig {
    let &(n1, n2, o1, o2) = SP_ARRAYS.choose(rng).unwrap();
    AntennaConfig::single_panel(n1, n2, o1, o2).unwrap()
}

fn bits(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..2)).collect()
}

fn subset(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

pub fn random_case(kind: CodebookKind, rng: &mut impl Rng) -> (CodebookConfig, Pmi) {
    match kind {
        CodebookKind::Type1SinglePanel => type1_sp(rng),
        CodebookKind::Type1MultiPanel => type1_mp(rng),
        CodebookKind::Type2 => type2(rng, false),
        CodebookKind::Type2PortSelection => type2(rng, true),
        CodebookKind::EType2 => etype2(rng, false),
        CodebookKind::EType2PortSelection => etype2(rng, true),
        CodebookKind::FeType2PortSelection => fetype2ps(rng),
    }
}

fn type1_sp(rng: &mut impl Rng) -> (CodebookConfig, Pmi) {
    let antenna = sp_antenna(rng);
    let rank = rng.random_range(1..=4);
    let n_3 = rng.random_range(1..=19);
    let pmi = PmiType1SP {
        i11: rng.random_range(0..antenna.grid1()),
        i12: rng.random_range(0..antenna.grid2()),
        i13: has_i13(&antenna, rank).then(|| rng.random_range(0..i13_range(&antenna))),
        i2: (0..n_3)
            .map(|_| rng.random_range(0..cophase_range(rank)))
            .collect(),
    };
    let config = Type1Config { antenna, rank, n_3 };
    (CodebookConfig::Type1SP(config), Pmi::Type1SP(pmi))
}

fn type1_mp(rng: &mut impl Rng) -> (CodebookConfig, Pmi) {
    let &(ng, n1, n2) = MP_ARRAYS.choose(rng).unwrap();
    let (o1, o2) = if n2 == 1 { (4, 1) } else { (4, 4) };
    let antenna = AntennaConfig::new(n1, n2, o1, o2, ng).unwrap();
    let rank = rng.random_range(1..=4);
    let c_m = if ng == 2 { rng.random_range(1..=2) } else { 1 };
    let n_3 = rng.random_range(1..=12);
    let config = Type1MpConfig {
        antenna,
        rank,
        c_m,
        n_3,
    };
    let pmi = PmiType1MP {
        i11: rng.random_range(0..antenna.grid1()),
        i12: rng.random_range(0..antenna.grid2()),
        i13: has_i13(&antenna, rank).then(|| rng.random_range(0..i13_range(&antenna))),
        i14: (0..config.i14_len())
            .map(|_| rng.random_range(0..4))
            .collect(),
        i2: (0..n_3)
            .map(|_| {
                (0..config.i2_len())
                    .map(|j| rng.random_range(0..config.i2_range(j)))
                    .collect()
            })
            .collect(),
    };
    (CodebookConfig::Type1MP(config), Pmi::Type1MP(pmi))
}

fn spatial(
    rng: &mut impl Rng,
    antenna: &AntennaConfig,
    l: usize,
    d: Option<usize>,
) -> SpatialChoice {
    match d {
        None => SpatialChoice::Beams {
            q1: rng.random_range(0..antenna.o1),
            q2: rng.random_range(0..antenna.o2),
            i12: rng.random_range(0..binomial(antenna.panel_elements(), l)),
        },
        Some(d) => {
            let n_half = antenna.panel_elements();
            let valid: Vec<usize> = (0..port_groups(n_half, d))
                .filter(|g| g * d + l <= n_half)
                .collect();
            SpatialChoice::Ports {
                i11: *valid.choose(rng).unwrap(),
            }
        }
    }
}

fn ps_antenna(rng: &mut impl Rng, l: usize) -> AntennaConfig {
    loop {
        let a = sp_antenna(rng);
        if a.panel_elements() >= l {
            return a;
        }
    }
}

fn type2(rng: &mut impl Rng, ps: bool) -> (CodebookConfig, Pmi) {
    let l = rng.random_range(2..=4);
    let antenna = ps_antenna(rng, l);
    let mut config = Type2Config::new(
        antenna,
        rng.random_range(1..=2),
        l,
        rng.random_range(1..=13),
    );
    config.subband_amplitude = rng.random_bool(0.5);
    config.n_psk = *[4, 8].choose(rng).unwrap();
    config.port_selection = ps.then(|| rng.random_range(1..=4));
    let n = 2 * l;
    let layers = (0..config.rank)
        .map(|_| {
            let i13 = rng.random_range(0..n);
            let mut i14: Vec<usize> = (0..n).map(|_| rng.random_range(0..8)).collect();
            i14[i13] = 7;
            let mut layer = Type2Layer {
                i13,
                i14,
                i21: vec![vec![0; n]; config.n_3],
                i22: config
                    .subband_amplitude
                    .then(|| vec![vec![1; n]; config.n_3]),
            };
            let mut reported: Vec<usize> =
                (0..n).filter(|&i| i != i13 && layer.i14[i] > 0).collect();
            reported.sort_by(|&a, &b| layer.i14[b].cmp(&layer.i14[a]).then(a.cmp(&b)));
            let strong = if config.subband_amplitude {
                reported.len().div_ceil(2)
            } else {
                reported.len()
            };
            for t in 0..config.n_3 {
                for (rank_pos, &i) in reported.iter().enumerate() {
                    if rank_pos < strong {
                        layer.i21[t][i] = rng.random_range(0..config.n_psk);
                        if let Some(i22) = &mut layer.i22 {
                            i22[t][i] = rng.random_range(0..2);
                        }
                    } else {
                        layer.i21[t][i] = rng.random_range(0..4);
                    }
                }
            }
            layer
        })
        .collect();
    let pmi = PmiType2 {
        spatial: spatial(rng, &antenna, l, config.port_selection),
        layers,
    };
    (CodebookConfig::Type2(config), Pmi::Type2(pmi))
}

/// Random bins with `n3[0] = 0` valid for the given window offset.
pub fn random_bins(rng: &mut impl Rng, n_3: usize, m_v: usize, i15: Option<usize>) -> Vec<usize> {
    let mut bins = vec![0];
    match i15 {
        None => bins.extend(subset(rng, n_3 - 1, m_v - 1).into_iter().map(|p| p + 1)),
        Some(s) => {
            let positions: Vec<usize> = (0..2 * m_v).filter(|&p| p != s).collect();
            for k in subset(rng, positions.len(), m_v - 1) {
                bins.push((positions[k] + n_3 - s) % n_3);
            }
        }
    }
    bins.sort_unstable();
    bins
}

fn etype2(rng: &mut impl Rng, ps: bool) -> (CodebookConfig, Pmi) {
    let config = loop {
        let (l, beta) = if ps {
            (
                *[2, 4].choose(rng).unwrap(),
                *[Ratio::new(1, 4), Ratio::new(1, 2), Ratio::new(3, 4)]
                    .choose(rng)
                    .unwrap(),
            )
        } else {
            *nr_codebook::etype2::SUPPORTED_L_BETA.choose(rng).unwrap()
        };
        let rank = rng.random_range(1..=if l == 6 { 2 } else { 4 });
        let config = EType2Config {
            antenna: ps_antenna(rng, l),
            rank,
            params: EType2Params {
                l_beams: l,
                p_v: *[Ratio::new(1, 4), Ratio::new(1, 8)].choose(rng).unwrap(),
                beta,
                r: rng.random_range(1..=2),
                n_3: rng.random_range(2..=40),
            },
            n_psk: *[4, 8, 16].choose(rng).unwrap(),
            port_selection: ps.then(|| rng.random_range(1..=4)),
        };
        if config.validate().is_ok() && config.params.m_v() >= 1 {
            break config;
        }
    };
    let p = &config.params;
    let (l, m_v) = (p.l_beams, p.m_v());
    let n_coef = 2 * l * m_v;
    let i15 = p.windowed().then(|| rng.random_range(0..2 * m_v));
    let budget = p.budget(config.rank).max(config.rank);
    let mut remaining = budget - config.rank;
    let layers = (0..config.rank)
        .map(|_| {
            let i18 = rng.random_range(0..2 * l);
            let mut bitmap = vec![false; n_coef];
            bitmap[i18 * m_v] = true;
            let free: Vec<usize> = (0..n_coef).filter(|&k| k != i18 * m_v).collect();
            let extra = rng.random_range(0..=remaining.min(free.len()));
            remaining -= extra;
            for k in subset(rng, free.len(), extra) {
                bitmap[free[k]] = true;
            }
            let nz = extra;
            let mut i23 = [15, 15];
            i23[1 - i18 / l] = rng.random_range(0..16);
            EType2Layer {
                n3: random_bins(rng, p.n_3, m_v, i15),
                bitmap,
                i18,
                i23,
                i24: (0..nz).map(|_| rng.random_range(0..8)).collect(),
                i25: (0..nz).map(|_| rng.random_range(0..config.n_psk)).collect(),
            }
        })
        .collect();
    let pmi = PmiEType2 {
        spatial: spatial(rng, &config.antenna, l, config.port_selection),
        i15,
        layers,
    };
    (CodebookConfig::EType2(config), Pmi::EType2(pmi))
}

fn fetype2ps(rng: &mut impl Rng) -> (CodebookConfig, Pmi) {
    let config = loop {
        let n_ports = *[4, 8, 12, 16].choose(rng).unwrap();
        let alpha = *[Ratio::new(1, 2), Ratio::new(3, 4), Ratio::new(1, 4)]
            .choose(rng)
            .unwrap();
        let (m, n_big) = *[(1, 2), (2, 2), (2, 4)].choose(rng).unwrap();
        let config = FeConfig {
            n_ports,
            rank: rng.random_range(1..=4),
            params: FeParams { alpha, m, n_big },
            n_psk: *[4, 8].choose(rng).unwrap(),
            n_3: rng.random_range(4..=20),
        };
        if config.validate().is_ok() {
            break config;
        }
    };
    let k = config.k_ports();
    let m = config.params.m;
    let n = 2 * k * m;
    let mut n3 = vec![0];
    if m == 2 {
        n3.push(rng.random_range(1..config.params.n_big));
    }
    let layers = (0..config.rank)
        .map(|_| {
            let bitmap = config
                .has_bitmap()
                .then(|| (0..n).map(|_| rng.random_bool(0.6)).collect::<Vec<bool>>());
            let reported = bitmap
                .as_ref()
                .map_or(n, |b| b.iter().filter(|&&x| x).count());
            FeLayer {
                bitmap,
                amps: (0..reported).map(|_| rng.random_range(0..8)).collect(),
                phases: (0..reported)
                    .map(|_| rng.random_range(0..config.n_psk))
                    .collect(),
            }
        })
        .collect();
    let pmi = PmiFeType2PS {
        port_choice: rng.random_range(0..binomial(config.n_ports, k)),
        n3,
        layers,
    };
    (CodebookConfig::FeType2PS(config), Pmi::FeType2PS(pmi))
}

/// Checks a PMI against its configuration with the per-kind validator.
pub fn check(pmi: &Pmi, config: &CodebookConfig) -> nr_codebook::Result<()> {
    match (pmi, config) {
        (Pmi::Type1SP(p), CodebookConfig::Type1SP(c)) => nr_codebook::type1::check_pmi_sp(p, c),
        (Pmi::Type1MP(p), CodebookConfig::Type1MP(c)) => nr_codebook::type1::check_pmi_mp(p, c),
        (Pmi::Type2(p), CodebookConfig::Type2(c)) => nr_codebook::type2::check_pmi(p, c),
        (Pmi::EType2(p), CodebookConfig::EType2(c)) => nr_codebook::etype2::check_pmi(p, c),
        (Pmi::FeType2PS(p), CodebookConfig::FeType2PS(c)) => {
            nr_codebook::fetype2ps::check_pmi(p, c)
        }
        _ => panic!("PMI and configuration kinds differ"),
    }
}
