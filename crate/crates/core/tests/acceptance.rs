//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use nr_codebook::beamgrid::{rotation_beam_indices, rotation_beams};
use nr_codebook::chansim::{
    gen_channel, paired_difference_interval, sweep, EncoderParams, Path, PathSet, PathSource,
    RandomPathSpec, SchemeSpec, SeResult, SimConfig,
};
use nr_codebook::codec::{parse, serialize};
use nr_codebook::etype2::{
    analyze_etype2, decode_etype2, encode_etype2, reconstruct_analysis, reconstruct_etype2,
    remap_fd, EType2Config, EType2Params, Ratio, Retention,
};
use nr_codebook::fetype2ps::PortMode;
use nr_codebook::linalg::{nmse, span_residual, subband_targets};
use nr_codebook::overhead::{overhead_count, OverheadParams};
use nr_codebook::pmi::CodebookConfig;
use nr_codebook::quantizers::{binomial, comb_decode, comb_encode};
use nr_codebook::type1::{decode_type1_sp, encode_type1_sp};
use nr_codebook::type2::{
    analyze_type2, basis_matrix, decode_type2, encode_type2, reconstruct, Type2Config,
};
use nr_codebook::{AntennaConfig, ChannelRealization, CodebookKind, Pmi, Precoder, C64};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cn(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn phase(rng: &mut impl Rng) -> C64 {
    C64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI)
}

// Overhead counts computed by an independent script.
#[rustfmt::skip]
fn overhead_table() -> Vec<(CodebookKind, OverheadParams, u64)> {
    vec![
    (CodebookKind::Type1SinglePanel, OverheadParams { rank: 1, n_3: 1, i13: Some(false), ..Default::default() }, 3),
    (CodebookKind::Type1SinglePanel, OverheadParams { rank: 3, n_3: 1, i13: Some(true), ..Default::default() }, 4),
    (CodebookKind::Type1SinglePanel, OverheadParams { rank: 1, n_3: 8, i13: Some(false), ..Default::default() }, 10),
    (CodebookKind::Type1SinglePanel, OverheadParams { rank: 3, n_3: 8, i13: Some(true), ..Default::default() }, 11),
    (CodebookKind::Type1SinglePanel, OverheadParams { rank: 1, n_3: 13, i13: Some(false), ..Default::default() }, 15),
    (CodebookKind::Type1SinglePanel, OverheadParams { rank: 3, n_3: 13, i13: Some(true), ..Default::default() }, 16),
    (CodebookKind::Type1MultiPanel, OverheadParams { rank: 1, n_3: 4, i14_len: Some(1), ..Default::default() }, 10),
    (CodebookKind::Type1MultiPanel, OverheadParams { rank: 1, n_3: 4, i14_len: Some(2), ..Default::default() }, 11),
    (CodebookKind::Type1MultiPanel, OverheadParams { rank: 1, n_3: 4, i14_len: Some(3), ..Default::default() }, 12),
    (CodebookKind::Type1MultiPanel, OverheadParams { rank: 1, n_3: 10, i14_len: Some(1), ..Default::default() }, 16),
    (CodebookKind::Type1MultiPanel, OverheadParams { rank: 1, n_3: 10, i14_len: Some(2), ..Default::default() }, 17),
    (CodebookKind::Type1MultiPanel, OverheadParams { rank: 1, n_3: 10, i14_len: Some(3), ..Default::default() }, 18),
    (CodebookKind::Type2, OverheadParams { rank: 1, n_3: 5, l: Some(4), m_nz: Some(vec![8]), subband_amplitude: Some(false), ..Default::default() }, 51),
    (CodebookKind::Type2, OverheadParams { rank: 1, n_3: 5, l: Some(4), m_nz: Some(vec![8]), m_vr: Some(vec![4]), subband_amplitude: Some(true), ..Default::default() }, 51),
    (CodebookKind::Type2, OverheadParams { rank: 1, n_3: 13, l: Some(4), m_nz: Some(vec![8]), subband_amplitude: Some(false), ..Default::default() }, 115),
    (CodebookKind::Type2, OverheadParams { rank: 1, n_3: 13, l: Some(4), m_nz: Some(vec![4]), m_vr: Some(vec![2]), subband_amplitude: Some(true), ..Default::default() }, 59),
    (CodebookKind::Type2, OverheadParams { rank: 2, n_3: 5, l: Some(4), m_nz: Some(vec![3, 8]), subband_amplitude: Some(false), ..Default::default() }, 70),
    (CodebookKind::Type2, OverheadParams { rank: 2, n_3: 5, l: Some(4), m_nz: Some(vec![3, 2]), m_vr: Some(vec![2, 1]), subband_amplitude: Some(true), ..Default::default() }, 39),
    (CodebookKind::Type2, OverheadParams { rank: 2, n_3: 13, l: Some(4), m_nz: Some(vec![8, 5]), subband_amplitude: Some(false), ..Default::default() }, 186),
    (CodebookKind::Type2, OverheadParams { rank: 2, n_3: 13, l: Some(4), m_nz: Some(vec![3, 2]), m_vr: Some(vec![2, 1]), subband_amplitude: Some(true), ..Default::default() }, 87),
    (CodebookKind::Type2PortSelection, OverheadParams { rank: 1, n_3: 5, l: Some(4), m_nz: Some(vec![1]), subband_amplitude: Some(false), ..Default::default() }, 8),
    (CodebookKind::Type2PortSelection, OverheadParams { rank: 1, n_3: 5, l: Some(4), m_nz: Some(vec![7]), m_vr: Some(vec![4]), subband_amplitude: Some(true), ..Default::default() }, 49),
    (CodebookKind::Type2PortSelection, OverheadParams { rank: 1, n_3: 13, l: Some(4), m_nz: Some(vec![8]), subband_amplitude: Some(false), ..Default::default() }, 114),
    (CodebookKind::Type2PortSelection, OverheadParams { rank: 1, n_3: 13, l: Some(4), m_nz: Some(vec![3]), m_vr: Some(vec![2]), subband_amplitude: Some(true), ..Default::default() }, 57),
    (CodebookKind::Type2PortSelection, OverheadParams { rank: 2, n_3: 5, l: Some(4), m_nz: Some(vec![1, 2]), subband_amplitude: Some(false), ..Default::default() }, 21),
    (CodebookKind::Type2PortSelection, OverheadParams { rank: 2, n_3: 5, l: Some(4), m_nz: Some(vec![1, 1]), m_vr: Some(vec![1, 1]), subband_amplitude: Some(true), ..Default::default() }, 25),
    (CodebookKind::Type2PortSelection, OverheadParams { rank: 2, n_3: 13, l: Some(4), m_nz: Some(vec![4, 4]), subband_amplitude: Some(false), ..Default::default() }, 115),
    (CodebookKind::Type2PortSelection, OverheadParams { rank: 2, n_3: 13, l: Some(4), m_nz: Some(vec![1, 8]), m_vr: Some(vec![1, 4]), subband_amplitude: Some(true), ..Default::default() }, 142),
    (CodebookKind::EType2, OverheadParams { rank: 1, n_3: 13, l: Some(4), m_v: Some(2), m_nz: Some(vec![7]), ..Default::default() }, 33),
    (CodebookKind::EType2, OverheadParams { rank: 1, n_3: 26, l: Some(6), m_v: Some(1), m_nz: Some(vec![11]), ..Default::default() }, 38),
    (CodebookKind::EType2, OverheadParams { rank: 2, n_3: 13, l: Some(4), m_v: Some(2), m_nz: Some(vec![1, 3]), ..Default::default() }, 44),
    (CodebookKind::EType2, OverheadParams { rank: 2, n_3: 26, l: Some(4), m_v: Some(4), m_nz: Some(vec![18, 27]), ..Default::default() }, 159),
    (CodebookKind::EType2, OverheadParams { rank: 3, n_3: 13, l: Some(6), m_v: Some(1), m_nz: Some(vec![12, 5, 6]), ..Default::default() }, 87),
    (CodebookKind::EType2, OverheadParams { rank: 3, n_3: 26, l: Some(2), m_v: Some(4), m_nz: Some(vec![10, 1, 3]), ..Default::default() }, 82),
    (CodebookKind::EType2, OverheadParams { rank: 4, n_3: 13, l: Some(6), m_v: Some(1), m_nz: Some(vec![7, 2, 5, 7]), ..Default::default() }, 96),
    (CodebookKind::EType2, OverheadParams { rank: 4, n_3: 26, l: Some(2), m_v: Some(1), m_nz: Some(vec![1, 2, 2, 1]), ..Default::default() }, 35),
    (CodebookKind::EType2PortSelection, OverheadParams { rank: 1, n_3: 13, l: Some(4), m_v: Some(2), m_nz: Some(vec![13]), ..Default::default() }, 44),
    (CodebookKind::EType2PortSelection, OverheadParams { rank: 1, n_3: 26, l: Some(4), m_v: Some(1), m_nz: Some(vec![4]), ..Default::default() }, 19),
    (CodebookKind::EType2PortSelection, OverheadParams { rank: 2, n_3: 13, l: Some(6), m_v: Some(2), m_nz: Some(vec![11, 3]), ..Default::default() }, 79),
    (CodebookKind::EType2PortSelection, OverheadParams { rank: 2, n_3: 26, l: Some(4), m_v: Some(2), m_nz: Some(vec![1, 14]), ..Default::default() }, 66),
    (CodebookKind::EType2PortSelection, OverheadParams { rank: 3, n_3: 13, l: Some(2), m_v: Some(1), m_nz: Some(vec![2, 1, 1]), ..Default::default() }, 24),
    (CodebookKind::EType2PortSelection, OverheadParams { rank: 3, n_3: 26, l: Some(2), m_v: Some(2), m_nz: Some(vec![8, 3, 4]), ..Default::default() }, 59),
    (CodebookKind::EType2PortSelection, OverheadParams { rank: 4, n_3: 13, l: Some(4), m_v: Some(4), m_nz: Some(vec![13, 9, 27, 25]), ..Default::default() }, 281),
    (CodebookKind::EType2PortSelection, OverheadParams { rank: 4, n_3: 26, l: Some(2), m_v: Some(2), m_nz: Some(vec![7, 4, 1, 5]), ..Default::default() }, 72),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 1, n_3: 13, l: Some(6), m_v: Some(1), n_big: Some(2), ..Default::default() }, 25),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 1, n_3: 13, l: Some(2), m_v: Some(2), n_big: Some(2), ..Default::default() }, 17),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 1, n_3: 13, l: Some(2), m_v: Some(2), n_big: Some(4), ..Default::default() }, 18),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 2, n_3: 13, l: Some(6), m_v: Some(1), n_big: Some(2), ..Default::default() }, 49),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 2, n_3: 13, l: Some(2), m_v: Some(2), n_big: Some(2), ..Default::default() }, 33),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 2, n_3: 13, l: Some(2), m_v: Some(2), n_big: Some(4), ..Default::default() }, 34),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 3, n_3: 13, l: Some(2), m_v: Some(1), m_nz: Some(vec![3, 3, 4]), n_big: Some(2), ..Default::default() }, 33),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 3, n_3: 13, l: Some(2), m_v: Some(2), m_nz: Some(vec![2, 2, 4]), n_big: Some(2), ..Default::default() }, 41),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 3, n_3: 13, l: Some(6), m_v: Some(2), m_nz: Some(vec![21, 8, 1]), n_big: Some(4), ..Default::default() }, 134),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 4, n_3: 13, l: Some(6), m_v: Some(1), m_nz: Some(vec![6, 6, 10, 8]), n_big: Some(2), ..Default::default() }, 109),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 4, n_3: 13, l: Some(2), m_v: Some(2), m_nz: Some(vec![8, 3, 7, 3]), n_big: Some(2), ..Default::default() }, 75),
    (CodebookKind::FeType2PortSelection, OverheadParams { rank: 4, n_3: 13, l: Some(6), m_v: Some(2), m_nz: Some(vec![5, 10, 8, 20]), n_big: Some(4), ..Default::default() }, 184),
    ]
}

fn overhead_conformance() -> Outcome {
    let start = Instant::now();
    let table = overhead_table();
    let kinds: std::collections::BTreeSet<_> = table.iter().map(|r| r.0).collect();
    let mut mismatches = 0;
    for (kind, params, expected) in &table {
        if overhead_count(*kind, params) != Ok(*expected) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(
        mismatches == 0 && table.len() >= 50 && kinds.len() == 7 && elapsed < 1.0,
        format!(
            "{} configurations over {} kinds, {mismatches} mismatches, {elapsed:.3} s",
            table.len(),
            kinds.len()
        ),
    )
}

fn combinadic_bijection() -> Outcome {
    let start = Instant::now();
    let (mut sets, mut failures) = (0u64, 0u64);
    for n in 1..=16usize {
        for l in 1..=4.min(n) {
            let mut seen = vec![false; binomial(n, l) as usize];
            let mut subset: Vec<usize> = (0..l).collect();
            loop {
                sets += 1;
                match comb_encode(&subset, n) {
                    Ok(code) if (code as usize) < seen.len() && !seen[code as usize] => {
                        seen[code as usize] = true;
                        if comb_decode(code, n, l).as_deref() != Ok(&subset[..]) {
                            failures += 1;
                        }
                    }
                    _ => failures += 1,
                }
                // next subset in lexicographic order
                let Some(i) = (0..l).rev().find(|&i| subset[i] < n - l + i) else {
                    break;
                };
                subset[i] += 1;
                for j in i + 1..l {
                    subset[j] = subset[j - 1] + 1;
                }
            }
            if seen.iter().any(|&s| !s) {
                failures += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(
        failures == 0 && sets >= 2516 && elapsed < 1.0,
        format!("{sets} subsets, {failures} failures, {elapsed:.3} s"),
    )
}

fn beam_orthogonality() -> Outcome {
    let mut worst_ip: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    let mut worst_entry: f64 = 0.0;
    for (n1, n2) in [(2, 1), (2, 2), (4, 2), (4, 4)] {
        let o2 = if n2 == 1 { 1 } else { 4 };
        let cfg = AntennaConfig::single_panel(n1, n2, 4, o2).unwrap();
        for q1 in 0..cfg.o1 {
            for q2 in 0..cfg.o2 {
                let beams = rotation_beams(&cfg, q1, q2).unwrap();
                for (a, wa) in beams.iter().enumerate() {
                    let norm: f64 = wa.entries.iter().map(|x| x.norm_sqr()).sum();
                    worst_norm = worst_norm.max((norm - (n1 * n2) as f64).abs());
                    for (p, x) in wa.entries.iter().enumerate() {
                        let (e1, e2) = (p % n1, p / n1);
                        let want = C64::from_polar(
                            1.0,
                            2.0 * PI * (e1 * wa.m1) as f64 / (4 * n1) as f64
                                + 2.0 * PI * (e2 * wa.m2) as f64 / (o2 * n2) as f64,
                        );
                        worst_entry = worst_entry.max((x - want).norm());
                    }
                    for wb in &beams[a + 1..] {
                        let ip: C64 = wa
                            .entries
                            .iter()
                            .zip(&wb.entries)
                            .map(|(x, y)| x.conj() * y)
                            .sum();
                        worst_ip = worst_ip.max(ip.norm());
                    }
                }
            }
        }
    }
    ensure(
        worst_ip < 1e-10 && worst_norm < 1e-10 && worst_entry < 1e-10,
        format!("max |<w_a, w_b>| = {worst_ip:.1e}, max |‖w‖² - n1n2| = {worst_norm:.1e}, max entry deviation {worst_entry:.1e}"),
    )
}

fn codeword_channel(w: &Precoder) -> ChannelRealization {
    ChannelRealization::from_subbands(w.subbands.iter().map(|m| m.adjoint()).collect()).unwrap()
}

fn same_span(a: &DMatrix<C64>, b: &DMatrix<C64>) -> bool {
    let pa = a * a.adjoint() / C64::new(a.column(0).norm_squared(), 0.0);
    let pb = b * b.adjoint() / C64::new(b.column(0).norm_squared(), 0.0);
    (pa - pb).norm() < 1e-9
}

fn type1_round_trip() -> Outcome {
    let (mut exact, mut exact_total) = (0, 0);
    let (mut spans, mut span_total) = (0, 0);
    for (n1, n2, o1, o2) in [
        (2, 1, 4, 1),
        (2, 2, 4, 4),
        (4, 1, 4, 1),
        (4, 2, 4, 4),
        (8, 1, 4, 1),
    ] {
        let cfg = AntennaConfig::single_panel(n1, n2, o1, o2).unwrap();
        for rank in 1..=4 {
            let n_co = if rank == 1 { 4 } else { 2 };
            for m1 in 0..cfg.grid1() {
                for m2 in 0..cfg.grid2() {
                    let pmi = nr_codebook::pmi::PmiType1SP {
                        i11: m1,
                        i12: m2,
                        i13: None,
                        i2: (0..n_co).collect(),
                    };
                    let w = decode_type1_sp(&pmi, &cfg, rank).unwrap();
                    let got = encode_type1_sp(&codeword_channel(&w), &cfg, rank).unwrap();
                    if rank == 1 || rank == 3 {
                        exact_total += n_co;
                        exact += pmi.i2.iter().zip(&got.i2).filter(|(a, b)| a == b).count()
                            * usize::from(got.i11 == m1 && got.i12 == m2);
                    } else {
                        span_total += n_co;
                        let back = decode_type1_sp(&got, &cfg, rank).unwrap();
                        spans += (0..n_co)
                            .filter(|&t| same_span(&w.subbands[t], &back.subbands[t]))
                            .count();
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let cfg = AntennaConfig::single_panel(4, 2, 4, 4).unwrap();
    let snr = 10f64.powf(3.0);
    let mut hits = 0;
    for trial in 0..100 {
        let rank = if trial % 2 == 0 { 1 } else { 3 };
        let n_co = if rank == 1 { 4 } else { 2 };
        let pmi = nr_codebook::pmi::PmiType1SP {
            i11: rng.random_range(0..cfg.grid1()),
            i12: rng.random_range(0..cfg.grid2()),
            i13: None,
            i2: (0..4).map(|_| rng.random_range(0..n_co)).collect(),
        };
        let w = decode_type1_sp(&pmi, &cfg, rank).unwrap();
        let clean = codeword_channel(&w);
        let noisy: Vec<DMatrix<C64>> = clean
            .subbands()
            .iter()
            .map(|h| {
                let sigma = (h.norm_squared() / (h.len() as f64 * snr)).sqrt();
                h.map(|x| x + cn(&mut rng) * sigma)
            })
            .collect();
        let got = encode_type1_sp(
            &ChannelRealization::from_subbands(noisy).unwrap(),
            &cfg,
            rank,
        )
        .unwrap();
        hits += usize::from(got == pmi);
    }
    ensure(
        exact == exact_total && spans == span_total && hits >= 99,
        format!(
            "ranks 1/3: {exact}/{exact_total} codewords exact; ranks 2/4: {spans}/{span_total} spans exact (co-phase not identifiable); 30 dB: {hits}/100 exact"
        ),
    )
}

/// Channel whose paths sit on distinct beams of one random rotation.
fn grid_channel(
    rng: &mut impl Rng,
    cfg: &AntennaConfig,
    n_beams: usize,
    delays: &[f64],
    n_3: usize,
) -> ChannelRealization {
    let (q1, q2) = (rng.random_range(0..cfg.o1), rng.random_range(0..cfg.o2));
    let mut idx: Vec<usize> = (0..cfg.panel_elements()).collect();
    idx.shuffle(rng);
    let paths = idx[..n_beams]
        .iter()
        .zip(delays)
        .map(|(&b, &delay)| {
            let (m1, m2) = rotation_beam_indices(cfg, q1, q2, b).unwrap();
            Path::on_grid(cfg, m1, m2, delay, cn(rng), phase(rng), vec![phase(rng)]).unwrap()
        })
        .collect();
    let src = PathSource::Explicit(PathSet::new(paths).unwrap());
    gen_channel(&src, cfg, 1, n_3, 0).unwrap()
}

fn max_span_residual(w: &Precoder, basis: &DMatrix<C64>) -> f64 {
    let (n_half, l) = basis.shape();
    let mut full = DMatrix::zeros(2 * n_half, 2 * l);
    full.view_mut((0, 0), (n_half, l)).copy_from(basis);
    full.view_mut((n_half, l), (n_half, l)).copy_from(basis);
    let mut worst: f64 = 0.0;
    for m in &w.subbands {
        for c in m.column_iter() {
            worst = worst.max(span_residual(
                &full,
                &DVector::from_column_slice(c.as_slice()),
            ));
        }
    }
    worst
}

fn type2_fidelity() -> Outcome {
    let cfg = AntennaConfig::single_panel(4, 4, 4, 4).unwrap();
    let n_3 = 13;
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst_span: f64 = 0.0;
    for rank in 1..=2 {
        let config = Type2Config::new(cfg, rank, 4, n_3);
        for drop in 0..20 {
            let src = PathSource::Random(RandomPathSpec::new(6));
            let ch = gen_channel(&src, &cfg, rank, n_3, 1000 + drop).unwrap();
            let (pmi, _) = encode_type2(&ch, &config).unwrap();
            let basis = basis_matrix(&cfg, 4, &pmi.spatial, None).unwrap();
            worst_span = worst_span.max(max_span_residual(
                &decode_type2(&pmi, &config).unwrap(),
                &basis,
            ));
        }
    }
    let config = Type2Config::new(cfg, 1, 4, n_3);
    let (mut worst_exact, mut quantized) = (0.0f64, 0.0);
    for _ in 0..100 {
        let delays = [rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0];
        let ch = grid_channel(&mut rng, &cfg, 2, &delays, n_3);
        let (targets, _) = subband_targets(&ch, 1).unwrap();
        let analysis = analyze_type2(&ch, &config).unwrap();
        let basis = basis_matrix(&cfg, 4, &analysis.spatial, None).unwrap();
        worst_exact = worst_exact.max(nmse(
            &reconstruct(&basis, &analysis.coefficients).unwrap(),
            &targets,
        ));
        let (pmi, _) = encode_type2(&ch, &config).unwrap();
        quantized += nmse(&decode_type2(&pmi, &config).unwrap(), &targets) / 100.0;
    }
    ensure(
        worst_span < 1e-9 && worst_exact < 1e-9 && quantized < 0.05,
        format!("span residual {worst_span:.1e}, unquantized NMSE {worst_exact:.1e}, quantized mean NMSE {quantized:.4}"),
    )
}

fn etype2_config(cfg: AntennaConfig, rank: usize, beta: Ratio, n_3: usize) -> EType2Config {
    EType2Config {
        antenna: cfg,
        rank,
        params: EType2Params {
            l_beams: 4,
            p_v: Ratio::new(1, 4),
            beta,
            r: 1,
            n_3,
        },
        n_psk: 16,
        port_selection: None,
    }
}

fn etype2_exact_recovery() -> Outcome {
    let cfg = AntennaConfig::single_panel(4, 2, 4, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut worst: f64 = 0.0;
    for (k, n_3) in [13usize, 24].into_iter().cycle().take(100).enumerate() {
        let config = etype2_config(cfg, 1, Ratio::new(3, 4), n_3);
        let m_v = config.params.m_v();
        let n_paths = 1 + k % 4;
        let mut pool: Vec<usize> = (0..n_3 / 4).collect();
        pool.shuffle(&mut rng);
        let delays: Vec<f64> = (0..n_paths)
            .map(|p| pool[p % m_v.min(pool.len())] as f64)
            .collect();
        let ch = grid_channel(&mut rng, &cfg, n_paths, &delays, n_3);
        let (targets, _) = subband_targets(&ch, 1).unwrap();
        let analysis = analyze_etype2(&ch, &config, Retention::All).unwrap();
        worst = worst.max(nmse(
            &reconstruct_analysis(&analysis, &config).unwrap(),
            &targets,
        ));
    }

    let mut worst_remap: f64 = 0.0;
    let basis = DMatrix::from_fn(8, 4, |r, c| {
        cn(&mut rng) * f64::from(u8::from(r % 4 == c || r > 5))
    });
    for _ in 0..100 {
        let n_3 = rng.random_range(4..=30);
        let m_v = rng.random_range(1..=n_3.min(5));
        let mut bins: Vec<usize> = (0..n_3).collect();
        bins.shuffle(&mut rng);
        bins.truncate(m_v);
        let coef: Vec<C64> = (0..8 * m_v).map(|_| cn(&mut rng)).collect();
        let f_star = rng.random_range(0..m_v);
        let remapped = remap_fd(&bins, f_star, n_3).unwrap();
        let moved: Vec<C64> = (0..8)
            .flat_map(|i| (0..m_v).map(move |k| (i, k)))
            .map(|(i, k)| coef[i * m_v + (f_star + k) % m_v])
            .collect();
        let a = reconstruct_etype2(&basis, n_3, &[(bins.clone(), coef)]).unwrap();
        let b = reconstruct_etype2(&basis, n_3, &[(remapped, moved)]).unwrap();
        for (x, y) in a.subbands.iter().zip(&b.subbands) {
            let ip = x.column(0).dotc(&y.column(0)).norm();
            worst_remap = worst_remap.max((ip - 1.0).abs());
        }
    }

    let mut pair_errors = 0;
    let mut checked = 0;
    let cfg32 = AntennaConfig::single_panel(4, 4, 4, 4).unwrap();
    for drop in 0..40u64 {
        let rank = 1 + (drop % 4) as usize;
        let config = etype2_config(cfg32, rank, Ratio::new(1, 2), 13);
        let src = PathSource::Random(RandomPathSpec::new(6));
        let ch = gen_channel(&src, &cfg32, rank, 13, 2000 + drop).unwrap();
        let pmi = encode_etype2(&ch, &config).unwrap();
        let m_nz: usize = pmi
            .layers
            .iter()
            .map(|l| l.bitmap.iter().filter(|&&b| b).count())
            .sum();
        let amps: usize = pmi.layers.iter().map(|l| l.i24.len()).sum();
        let phases: usize = pmi.layers.iter().map(|l| l.i25.len()).sum();
        checked += 1;
        if amps != m_nz - rank || phases != m_nz - rank {
            pair_errors += 1;
        }
    }
    ensure(
        worst < 1e-9 && worst_remap < 1e-9 && pair_errors == 0,
        format!(
            "worst unquantized NMSE {worst:.1e}, remap |<a,b>| deviation {worst_remap:.1e}, pair count mismatches {pair_errors}/{checked}"
        ),
    )
}

fn budget_scaling() -> Outcome {
    let cfg = AntennaConfig::single_panel(4, 4, 4, 4).unwrap();
    let n_3 = 13;
    let betas = [Ratio::new(1, 4), Ratio::new(1, 2), Ratio::new(3, 4)];
    let (mut count_errors, mut order_violations) = (0, 0);
    let mut exact_mean = [0.0; 3];
    let mut quant_mean = [0.0; 3];
    let drops = 100u64;
    for drop in 0..drops {
        let rank = 1 + (drop % 2) as usize;
        let src = PathSource::Random(RandomPathSpec::new(6));
        let ch = gen_channel(&src, &cfg, rank, n_3, 3000 + drop).unwrap();
        let (targets, _) = subband_targets(&ch, rank).unwrap();
        let mut exact = [0.0; 3];
        for (b, &beta) in betas.iter().enumerate() {
            let config = etype2_config(cfg, rank, beta, n_3);
            let m_v = n_3.div_ceil(4);
            let expected = 2 * 4 * m_v * rank * beta.num / beta.den;
            let analysis = analyze_etype2(&ch, &config, Retention::Budget).unwrap();
            let kept: usize = analysis
                .layers
                .iter()
                .map(|l| l.bitmap.iter().filter(|&&x| x).count())
                .sum();
            if kept != expected {
                count_errors += 1;
            }
            exact[b] = nmse(&reconstruct_analysis(&analysis, &config).unwrap(), &targets);
            let pmi = encode_etype2(&ch, &config).unwrap();
            quant_mean[b] += nmse(&decode_etype2(&pmi, &config).unwrap(), &targets) / drops as f64;
            exact_mean[b] += exact[b] / drops as f64;
        }
        if exact[1] > exact[0] + 1e-12 || exact[2] > exact[1] + 1e-12 {
            order_violations += 1;
        }
    }
    let strict = exact_mean[0] > exact_mean[1] && exact_mean[1] > exact_mean[2];
    let strict_q = quant_mean[0] > quant_mean[1] && quant_mean[1] > quant_mean[2];
    ensure(
        count_errors == 0 && order_violations == 0 && strict && strict_q,
        format!(
            "count mismatches {count_errors}, per-drop order violations {order_violations}/{drops}, mean NMSE unquantized {:.4}/{:.4}/{:.4}, quantized {:.4}/{:.4}/{:.4}",
            exact_mean[0], exact_mean[1], exact_mean[2], quant_mean[0], quant_mean[1], quant_mean[2]
        ),
    )
}

struct Ensemble {
    sim: SimConfig,
    rows: Vec<SeResult>,
    seconds: f64,
}

fn ensemble() -> &'static Ensemble {
    static CELL: OnceLock<Ensemble> = OnceLock::new();
    CELL.get_or_init(|| {
        let sim = SimConfig {
            antenna: AntennaConfig::single_panel(4, 4, 4, 4).unwrap(),
            n_rx: 1,
            n_3: 13,
            users: 4,
            n_paths: 6,
            ul_snapshots: 4,
            snr_db: 10.0,
            drops: 200,
            seed: 7,
        };
        let fe = |port_mode| EncoderParams {
            n_ports: 8,
            alpha: Ratio::new(1, 2),
            m: 1,
            n_big: 2,
            n_psk: 8,
            port_mode,
            ..Default::default()
        };
        let grid = [
            SchemeSpec::genie(),
            SchemeSpec::codebook(CodebookKind::FeType2PortSelection, fe(PortMode::EigenBased)),
            SchemeSpec::codebook(CodebookKind::FeType2PortSelection, fe(PortMode::DftBased)),
            SchemeSpec::codebook(
                CodebookKind::EType2PortSelection,
                EncoderParams {
                    l_beams: 4,
                    n_ports: 8,
                    d: 1,
                    p_v: Ratio::new(1, 8),
                    beta: Ratio::new(1, 2),
                    n_psk: 8,
                    ..Default::default()
                },
            ),
            SchemeSpec::codebook(
                CodebookKind::EType2,
                EncoderParams {
                    l_beams: 4,
                    beta: Ratio::new(3, 4),
                    n_psk: 16,
                    ..Default::default()
                },
            ),
            SchemeSpec::codebook(
                CodebookKind::Type2,
                EncoderParams {
                    l_beams: 4,
                    n_psk: 8,
                    ..Default::default()
                },
            ),
            SchemeSpec::codebook(CodebookKind::Type1SinglePanel, EncoderParams::default()),
        ];
        let start = Instant::now();
        let rows = sweep(&grid, &sim).expect("simulation runs");
        Ensemble {
            sim,
            rows,
            seconds: start.elapsed().as_secs_f64(),
        }
    })
}

fn ordering(pairs: &[(usize, usize)], rows: &[SeResult]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &(a, b) in pairs {
        let (lo, hi) =
            paired_difference_interval(&rows[a].per_drop, &rows[b].per_drop, 95).unwrap();
        ok &= lo > 0.0;
        parts.push(format!(
            "{} {:.3} > {} {:.3} (diff CI [{lo:.3}, {hi:.3}])",
            rows[a].label, rows[a].mean_se, rows[b].label, rows[b].mean_se
        ));
    }
    (ok, parts.join("; "))
}

fn partial_reciprocity() -> Outcome {
    let e = ensemble();
    let budget = |row: &SeResult| match row.spec.codebook_config(&e.sim).unwrap() {
        Some(CodebookConfig::FeType2PS(c)) => 2 * c.k_ports() * c.params.m,
        Some(CodebookConfig::EType2(c)) => c.params.budget(c.rank),
        _ => 0,
    };
    let budgets: Vec<usize> = e.rows[1..4].iter().map(budget).collect();
    let budgets_match = budgets[0] > 0 && budgets.iter().all(|&b| b == budgets[0]);
    let (ok, detail) = ordering(&[(1, 2), (2, 3)], &e.rows);
    ensure(
        ok && budgets_match && e.seconds < 300.0,
        format!(
            "{detail}; coefficient budgets {budgets:?}; sweep {:.0} s",
            e.seconds
        ),
    )
}

fn codebook_ladder() -> Outcome {
    let e = ensemble();
    let (ok, detail) = ordering(&[(4, 5), (5, 6)], &e.rows);
    let genie = &e.rows[0].per_drop;
    let violations: usize = e.rows[1..]
        .iter()
        .map(|r| {
            r.per_drop
                .iter()
                .zip(genie)
                .filter(|(s, g)| *s > *g)
                .count()
        })
        .sum();
    ensure(
        ok && violations == 0,
        format!("{detail}; genie violations {violations}"),
    )
}

fn serialization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut failures = 0;
    for kind in CodebookKind::ALL {
        for _ in 0..1000 {
            let (config, pmi) = common::random_case(kind, &mut rng);
            let ok = serialize(&pmi, &config)
                .and_then(|b| parse(&b, &config))
                .is_ok_and(|p| p == pmi);
            failures += usize::from(!ok);
        }
    }
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let (mut golden, mut golden_failures) = (0, 0);
    for kind in CodebookKind::ALL {
        let text =
            std::fs::read_to_string(dir.join(format!("{}.jsonl", kind.name()))).unwrap_or_default();
        for line in text.lines() {
            golden += 1;
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let config: CodebookConfig = serde_json::from_value(v["config"].clone()).unwrap();
            let pmi: Pmi = serde_json::from_value(v["pmi"].clone()).unwrap();
            let bytes = hex::decode(v["hex"].as_str().unwrap()).unwrap();
            let twice = (serialize(&pmi, &config), serialize(&pmi, &config));
            let stable = matches!(&twice, (Ok(a), Ok(b)) if *a == bytes && *b == bytes);
            if !stable || parse(&bytes, &config).ok().as_ref() != Some(&pmi) {
                golden_failures += 1;
            }
        }
    }
    ensure(
        failures == 0 && golden >= 7 && golden_failures == 0,
        format!("{} random PMIs, {failures} round-trip failures; {golden} golden payloads, {golden_failures} changed", 7000),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("overhead conformance", overhead_conformance),
        ("combinadic bijection", combinadic_bijection),
        ("beam-grid orthogonality and norm", beam_orthogonality),
        ("Type I round trip", type1_round_trip),
        ("Type II span and fidelity", type2_fidelity),
        ("Enhanced Type II exact recovery", etype2_exact_recovery),
        ("reported-count budget", budget_scaling),
        ("partial-reciprocity ordering", partial_reciprocity),
        ("codebook ladder", codebook_ladder),
        ("serialization", serialization),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
