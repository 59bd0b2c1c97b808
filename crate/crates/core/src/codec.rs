//! Canonical bit layout of every PMI.
//!
//! Fields are written in the order they appear in the PMI types, each as a
//! big-endian unsigned integer of width `⌈log2(range)⌉`; bitmaps are copied
//! bit by bit. Values implied by the configuration or by other fields (the
//! strongest amplitude, the reference polarization amplitude, zero bins) are
//! not transmitted. The stream is zero-padded to a whole byte. See
//! `docs/pmi_layout.md` for the per-kind tables.

use crate::etype2::{self, fd_from_indicator, fd_indicator, fd_indicator_range};
use crate::fetype2ps;
use crate::pmi::{
    CodebookConfig, EType2Layer, FeLayer, PmiEType2, PmiFeType2PS, PmiType1MP, PmiType1SP,
    PmiType2, SpatialChoice, Type2Layer,
};
use crate::quantizers::{binomial, field_width, AmplitudeGrid};
use crate::type1::{check_pmi_mp, check_pmi_sp, cophase_range, has_i13, i13_range};
use crate::type2::{self, port_groups, reported_split};
use crate::{AntennaConfig, Error, Pmi, Result};

/// MSB-first bit sink.
#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push(&mut self, value: u64, width: usize) {
        debug_assert!(width == 64 || value >> width == 0);
        for k in (0..width).rev() {
            self.push_bit((value >> k) & 1 == 1);
        }
    }

    /// Appends a field of the given range.
    pub fn push_field(&mut self, value: usize, range: u64) {
        self.push(value as u64, field_width(range));
    }

    pub fn push_bit(&mut self, bit: bool) {
        if self.bits.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.last_mut().expect("byte allocated");
            *last |= 0x80 >> (self.bits % 8);
        }
        self.bits += 1;
    }

    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// MSB-first bit source.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let byte = self
            .bytes
            .get((self.pos / 8) as usize)
            .ok_or_else(|| Error::Codec(format!("stream ends at bit {}", self.pos)))?;
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read(&mut self, width: usize) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.read_bit()?);
        }
        Ok(v)
    }

    /// Reads a field of the given range; values beyond the range are rejected.
    pub fn read_field(&mut self, what: &'static str, range: u64) -> Result<usize> {
        let v = self.read(field_width(range))?;
        if v >= range.max(1) {
            return Err(Error::OutOfRange {
                what,
                value: v as usize,
                bound: range as usize,
            });
        }
        Ok(v as usize)
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    /// Requires the remaining bits to be the zero padding of the last byte.
    pub fn finish(mut self) -> Result<()> {
        if self.bytes.len() as u64 != self.pos.div_ceil(8) {
            return Err(Error::Codec(format!(
                "{} bytes for a {}-bit payload",
                self.bytes.len(),
                self.pos
            )));
        }
        while !self.pos.is_multiple_of(8) {
            if self.read_bit()? {
                return Err(Error::Codec("nonzero padding".into()));
            }
        }
        Ok(())
    }
}

/// Serializes a valid PMI.
pub fn serialize(pmi: &Pmi, config: &CodebookConfig) -> Result<Vec<u8>> {
    Ok(write_pmi(pmi, config)?.into_bytes())
}

/// Number of payload bits (before padding) of a PMI.
pub fn serialized_bits(pmi: &Pmi, config: &CodebookConfig) -> Result<u64> {
    Ok(write_pmi(pmi, config)?.bit_len())
}

/// Inverse of [`serialize`].
pub fn parse(bytes: &[u8], config: &CodebookConfig) -> Result<Pmi> {
    let mut r = BitReader::new(bytes);
    let pmi = match config {
        CodebookConfig::Type1SP(c) => {
            c.validate()?;
            let a = &c.antenna;
            let p = PmiType1SP {
                i11: r.read_field("i11", a.grid1() as u64)?,
                i12: r.read_field("i12", a.grid2() as u64)?,
                i13: read_i13(&mut r, a, c.rank)?,
                i2: (0..c.n_3)
                    .map(|_| r.read_field("i2", cophase_range(c.rank) as u64))
                    .collect::<Result<_>>()?,
            };
            check_pmi_sp(&p, c)?;
            Pmi::Type1SP(p)
        }
        CodebookConfig::Type1MP(c) => {
            c.validate()?;
            let a = &c.antenna;
            let p = PmiType1MP {
                i11: r.read_field("i11", a.grid1() as u64)?,
                i12: r.read_field("i12", a.grid2() as u64)?,
                i13: read_i13(&mut r, a, c.rank)?,
                i14: (0..c.i14_len())
                    .map(|_| r.read_field("i14", 4))
                    .collect::<Result<_>>()?,
                i2: (0..c.n_3)
                    .map(|_| {
                        (0..c.i2_len())
                            .map(|j| r.read_field("i2", c.i2_range(j) as u64))
                            .collect()
                    })
                    .collect::<Result<_>>()?,
            };
            check_pmi_mp(&p, c)?;
            Pmi::Type1MP(p)
        }
        CodebookConfig::Type2(c) => {
            c.validate()?;
            let spatial = read_spatial(&mut r, &c.antenna, c.l_beams, c.port_selection)?;
            let layers = (0..c.rank)
                .map(|_| read_type2_layer(&mut r, c))
                .collect::<Result<_>>()?;
            let p = PmiType2 { spatial, layers };
            type2::check_pmi(&p, c)?;
            Pmi::Type2(p)
        }
        CodebookConfig::EType2(c) => {
            c.validate()?;
            let params = &c.params;
            let spatial = read_spatial(&mut r, &c.antenna, params.l_beams, c.port_selection)?;
            let i15 = if params.windowed() {
                Some(r.read_field("i15", 2 * params.m_v() as u64)?)
            } else {
                None
            };
            let layers = (0..c.rank)
                .map(|_| read_etype2_layer(&mut r, c, i15))
                .collect::<Result<_>>()?;
            let p = PmiEType2 {
                spatial,
                i15,
                layers,
            };
            etype2::check_pmi(&p, c)?;
            Pmi::EType2(p)
        }
        CodebookConfig::FeType2PS(c) => {
            c.validate()?;
            let k = c.k_ports();
            let m = c.params.m;
            let port_choice = r.read_field("port_choice", binomial(c.n_ports, k))? as u64;
            let mut n3 = vec![0];
            if m == 2 {
                n3.push(1 + r.read_field("n3", c.params.n_big as u64 - 1)?);
            }
            let n = 2 * k * m;
            let psk_range = c.n_psk as u64;
            let layers = (0..c.rank)
                .map(|_| {
                    let bitmap = if c.has_bitmap() {
                        Some((0..n).map(|_| r.read_bit()).collect::<Result<Vec<_>>>()?)
                    } else {
                        None
                    };
                    let count = bitmap
                        .as_ref()
                        .map_or(n, |b| b.iter().filter(|&&x| x).count());
                    let amps = (0..count)
                        .map(|_| {
                            r.read_field("amplitude", AmplitudeGrid::Sb3Bit.cardinality() as u64)
                        })
                        .collect::<Result<_>>()?;
                    let phases = (0..count)
                        .map(|_| r.read_field("phase", psk_range))
                        .collect::<Result<_>>()?;
                    Ok(FeLayer {
                        bitmap,
                        amps,
                        phases,
                    })
                })
                .collect::<Result<_>>()?;
            let p = PmiFeType2PS {
                port_choice,
                n3,
                layers,
            };
            fetype2ps::check_pmi(&p, c)?;
            Pmi::FeType2PS(p)
        }
    };
    r.finish()?;
    Ok(pmi)
}

fn write_pmi(pmi: &Pmi, config: &CodebookConfig) -> Result<BitWriter> {
    let mut w = BitWriter::new();
    match (pmi, config) {
        (Pmi::Type1SP(p), CodebookConfig::Type1SP(c)) => {
            check_pmi_sp(p, c)?;
            let a = &c.antenna;
            w.push_field(p.i11, a.grid1() as u64);
            w.push_field(p.i12, a.grid2() as u64);
            if let Some(k) = p.i13 {
                w.push_field(k, i13_range(a) as u64);
            }
            for &n in &p.i2 {
                w.push_field(n, cophase_range(c.rank) as u64);
            }
        }
        (Pmi::Type1MP(p), CodebookConfig::Type1MP(c)) => {
            check_pmi_mp(p, c)?;
            let a = &c.antenna;
            w.push_field(p.i11, a.grid1() as u64);
            w.push_field(p.i12, a.grid2() as u64);
            if let Some(k) = p.i13 {
                w.push_field(k, i13_range(a) as u64);
            }
            for &x in &p.i14 {
                w.push_field(x, 4);
            }
            for i2 in &p.i2 {
                for (j, &n) in i2.iter().enumerate() {
                    w.push_field(n, c.i2_range(j) as u64);
                }
            }
        }
        (Pmi::Type2(p), CodebookConfig::Type2(c)) => {
            type2::check_pmi(p, c)?;
            write_spatial(&mut w, &p.spatial, &c.antenna, c.l_beams, c.port_selection);
            for layer in &p.layers {
                write_type2_layer(&mut w, layer, c);
            }
        }
        (Pmi::EType2(p), CodebookConfig::EType2(c)) => {
            etype2::check_pmi(p, c)?;
            let params = &c.params;
            let l = params.l_beams;
            write_spatial(&mut w, &p.spatial, &c.antenna, l, c.port_selection);
            if let Some(s) = p.i15 {
                w.push_field(s, 2 * params.m_v() as u64);
            }
            let i16_range = fd_indicator_range(params.n_3, params.m_v(), params.windowed());
            for layer in &p.layers {
                let i16 = fd_indicator(&layer.n3, params.n_3, p.i15)?;
                w.push(i16, field_width(i16_range));
                for &b in &layer.bitmap {
                    w.push_bit(b);
                }
                w.push_field(layer.i18, 2 * l as u64);
                let other = 1 - layer.i18 / l;
                w.push_field(
                    layer.i23[other],
                    AmplitudeGrid::Ref4Bit.cardinality() as u64,
                );
                for &k in &layer.i24 {
                    w.push_field(k, AmplitudeGrid::Sb3Bit.cardinality() as u64);
                }
                for &ph in &layer.i25 {
                    w.push_field(ph, c.n_psk as u64);
                }
            }
        }
        (Pmi::FeType2PS(p), CodebookConfig::FeType2PS(c)) => {
            fetype2ps::check_pmi(p, c)?;
            w.push(p.port_choice, field_width(binomial(c.n_ports, c.k_ports())));
            if c.params.m == 2 {
                w.push_field(p.n3[1] - 1, c.params.n_big as u64 - 1);
            }
            for layer in &p.layers {
                if let Some(b) = &layer.bitmap {
                    for &x in b {
                        w.push_bit(x);
                    }
                }
                for &a in &layer.amps {
                    w.push_field(a, AmplitudeGrid::Sb3Bit.cardinality() as u64);
                }
                for &ph in &layer.phases {
                    w.push_field(ph, c.n_psk as u64);
                }
            }
        }
        _ => {
            return Err(Error::config(
                "kind",
                "PMI does not match the configuration",
            ))
        }
    }
    Ok(w)
}

fn read_i13(r: &mut BitReader, a: &AntennaConfig, rank: usize) -> Result<Option<usize>> {
    if has_i13(a, rank) {
        Ok(Some(r.read_field("i13", i13_range(a) as u64)?))
    } else {
        Ok(None)
    }
}

fn write_spatial(
    w: &mut BitWriter,
    s: &SpatialChoice,
    a: &AntennaConfig,
    l_beams: usize,
    port_selection: Option<usize>,
) {
    match (s, port_selection) {
        (SpatialChoice::Beams { q1, q2, i12 }, _) => {
            w.push_field(*q1, a.o1 as u64);
            w.push_field(*q2, a.o2 as u64);
            w.push(*i12, field_width(binomial(a.panel_elements(), l_beams)));
        }
        (SpatialChoice::Ports { i11 }, ps) => {
            let d = ps.unwrap_or(1);
            w.push_field(*i11, port_groups(a.n_ap() / 2, d) as u64);
        }
    }
}

fn read_spatial(
    r: &mut BitReader,
    a: &AntennaConfig,
    l_beams: usize,
    port_selection: Option<usize>,
) -> Result<SpatialChoice> {
    Ok(match port_selection {
        None => SpatialChoice::Beams {
            q1: r.read_field("q1", a.o1 as u64)?,
            q2: r.read_field("q2", a.o2 as u64)?,
            i12: r.read_field("i12", binomial(a.panel_elements(), l_beams))? as u64,
        },
        Some(d) => SpatialChoice::Ports {
            i11: r.read_field("i11", port_groups(a.n_ap() / 2, d) as u64)?,
        },
    })
}

fn write_type2_layer(w: &mut BitWriter, layer: &Type2Layer, c: &type2::Type2Config) {
    let n = 2 * c.l_beams;
    let amp_range = AmplitudeGrid::Wb3Bit.cardinality() as u64;
    w.push_field(layer.i13, n as u64);
    for (i, &k) in layer.i14.iter().enumerate() {
        if i != layer.i13 {
            w.push_field(k, amp_range);
        }
    }
    let (strong, weak) = reported_split(layer, c.subband_amplitude);
    for t in 0..c.n_3 {
        for i in 0..n {
            if strong.contains(&i) {
                w.push_field(layer.i21[t][i], c.n_psk as u64);
            } else if weak.contains(&i) {
                w.push_field(layer.i21[t][i], 4);
            }
        }
    }
    if let Some(i22) = &layer.i22 {
        for row in i22 {
            for i in 0..n {
                if strong.contains(&i) {
                    w.push_field(row[i], 2);
                }
            }
        }
    }
}

fn read_type2_layer(r: &mut BitReader, c: &type2::Type2Config) -> Result<Type2Layer> {
    let n = 2 * c.l_beams;
    let amp_range = AmplitudeGrid::Wb3Bit.cardinality() as u64;
    let i13 = r.read_field("i13", n as u64)?;
    let mut i14 = vec![AmplitudeGrid::Wb3Bit.max_index(); n];
    for (i, k) in i14.iter_mut().enumerate() {
        if i != i13 {
            *k = r.read_field("i14", amp_range)?;
        }
    }
    let mut layer = Type2Layer {
        i13,
        i14,
        i21: vec![vec![0; n]; c.n_3],
        i22: c.subband_amplitude.then(|| vec![vec![1; n]; c.n_3]),
    };
    let (strong, weak) = reported_split(&layer, c.subband_amplitude);
    for t in 0..c.n_3 {
        for i in 0..n {
            if strong.contains(&i) {
                layer.i21[t][i] = r.read_field("i21", c.n_psk as u64)?;
            } else if weak.contains(&i) {
                layer.i21[t][i] = r.read_field("i21", 4)?;
            }
        }
    }
    if let Some(i22) = layer.i22.as_mut() {
        for row in i22.iter_mut() {
            for i in 0..n {
                if strong.contains(&i) {
                    row[i] = r.read_field("i22", 2)?;
                }
            }
        }
    }
    Ok(layer)
}

fn read_etype2_layer(
    r: &mut BitReader,
    c: &etype2::EType2Config,
    i15: Option<usize>,
) -> Result<EType2Layer> {
    let params = &c.params;
    let l = params.l_beams;
    let m_v = params.m_v();
    let i16_range = fd_indicator_range(params.n_3, m_v, params.windowed());
    let i16 = r.read(field_width(i16_range))?;
    let n3 = fd_from_indicator(i16, params.n_3, m_v, i15)?;
    let bitmap = (0..2 * l * m_v)
        .map(|_| r.read_bit())
        .collect::<Result<Vec<_>>>()?;
    let i18 = r.read_field("i18", 2 * l as u64)?;
    let mut i23 = [AmplitudeGrid::Ref4Bit.max_index(); 2];
    i23[1 - i18 / l] = r.read_field("i23", AmplitudeGrid::Ref4Bit.cardinality() as u64)?;
    let nz = bitmap.iter().filter(|&&b| b).count();
    if nz == 0 {
        return Err(Error::Codec("empty bitmap".into()));
    }
    let i24 = (0..nz - 1)
        .map(|_| r.read_field("i24", AmplitudeGrid::Sb3Bit.cardinality() as u64))
        .collect::<Result<_>>()?;
    let i25 = (0..nz - 1)
        .map(|_| r.read_field("i25", c.n_psk as u64))
        .collect::<Result<_>>()?;
    Ok(EType2Layer {
        n3,
        bitmap,
        i18,
        i23,
        i24,
        i25,
    })
}
