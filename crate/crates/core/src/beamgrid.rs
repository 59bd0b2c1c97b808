//! Oversampled 2D-DFT beam grid for dual-polarized uniform planar arrays.
//!
//! Element `(p, q)` of a panel (horizontal index `p`, vertical index `q`)
//! sits at position `q * n1 + p` of a beam vector. A beam `(m1, m2)` on the
//! oversampled grid has entries
//! `exp(j2π p m1 / (o1 n1)) * exp(j2π q m2 / (o2 n2))`, i.e. the Kronecker
//! product of the vertical and horizontal DFT vectors.
//!
//! Antenna ports are ordered panel-major, then polarization, then element:
//! port `g * 2 n1 n2 + pol * n1 n2 + q * n1 + p`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Geometry and oversampling of the gNB array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AntennaConfig {
    /// Horizontal elements per polarization and panel.
    pub n1: usize,
    /// Vertical elements per polarization and panel.
    pub n2: usize,
    /// Horizontal oversampling factor.
    pub o1: usize,
    /// Vertical oversampling factor.
    pub o2: usize,
    /// Number of panels.
    pub ng: usize,
}

impl AntennaConfig {
    /// Builds a validated configuration.
    pub fn new(n1: usize, n2: usize, o1: usize, o2: usize, ng: usize) -> Result<Self> {
        let cfg = AntennaConfig { n1, n2, o1, o2, ng };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Single-panel configuration.
    pub fn single_panel(n1: usize, n2: usize, o1: usize, o2: usize) -> Result<Self> {
        Self::new(n1, n2, o1, o2, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::config("n1/n2", "element counts must be positive"));
        }
        if self.ng == 0 {
            return Err(Error::config("ng", "panel count must be positive"));
        }
        match (self.o1, self.o2) {
            (4, 4) | (4, 1) | (1, 1) => Ok(()),
            (o1, o2) => Err(Error::config(
                "o1/o2",
                format!("oversampling ({o1},{o2}) not one of (4,4), (4,1), (1,1)"),
            )),
        }
    }

    /// Number of antenna ports, `2 * ng * n1 * n2`.
    pub fn n_ap(&self) -> usize {
        2 * self.ng * self.n1 * self.n2
    }

    /// Elements per polarization on one panel.
    pub fn panel_elements(&self) -> usize {
        self.n1 * self.n2
    }

    /// Size of the horizontal oversampled grid.
    pub fn grid1(&self) -> usize {
        self.o1 * self.n1
    }

    /// Size of the vertical oversampled grid.
    pub fn grid2(&self) -> usize {
        self.o2 * self.n2
    }
}

/// One beam of the oversampled grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector {
    pub entries: Vec<C64>,
    pub m1: usize,
    pub m2: usize,
}

impl BeamVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// DFT beam `(m1, m2)` on the oversampled grid of `cfg`.
pub fn dft_beam(cfg: &AntennaConfig, m1: usize, m2: usize) -> Result<BeamVector> {
    Error::check_range("m1", m1, cfg.grid1())?;
    Error::check_range("m2", m2, cfg.grid2())?;
    let u1 = m1 as f64 / cfg.grid1() as f64;
    let u2 = m2 as f64 / cfg.grid2() as f64;
    Ok(BeamVector {
        entries: steering(cfg, u1, u2),
        m1,
        m2,
    })
}

/// Array response of one polarization of one panel for spatial frequencies
/// `u1`, `u2` in cycles per element.
pub fn steering(cfg: &AntennaConfig, u1: f64, u2: f64) -> Vec<C64> {
    let horizontal: Vec<C64> = (0..cfg.n1)
        .map(|p| C64::from_polar(1.0, 2.0 * PI * p as f64 * u1))
        .collect();
    let mut out = Vec::with_capacity(cfg.panel_elements());
    for q in 0..cfg.n2 {
        let v = C64::from_polar(1.0, 2.0 * PI * q as f64 * u2);
        out.extend(horizontal.iter().map(|h| v * h));
    }
    out
}

/// All rotations `(q1, q2)` of the oversampled grid, `q1`-major.
pub fn rotation_hypotheses(cfg: &AntennaConfig) -> Vec<(usize, usize)> {
    (0..cfg.o1)
        .flat_map(|q1| (0..cfg.o2).map(move |q2| (q1, q2)))
        .collect()
}

/// Grid indices `(m1, m2)` of orthogonal beam `index` (in `[0, n1 n2)`,
/// horizontal-fastest) within rotation `(q1, q2)`.
pub fn rotation_beam_indices(
    cfg: &AntennaConfig,
    q1: usize,
    q2: usize,
    index: usize,
) -> Result<(usize, usize)> {
    Error::check_range("q1", q1, cfg.o1)?;
    Error::check_range("q2", q2, cfg.o2)?;
    Error::check_range("beam index", index, cfg.panel_elements())?;
    Ok((
        cfg.o1 * (index % cfg.n1) + q1,
        cfg.o2 * (index / cfg.n1) + q2,
    ))
}

/// The `n1 n2` mutually orthogonal beams of rotation `(q1, q2)`.
pub fn rotation_beams(cfg: &AntennaConfig, q1: usize, q2: usize) -> Result<Vec<BeamVector>> {
    (0..cfg.panel_elements())
        .map(|b| {
            let (m1, m2) = rotation_beam_indices(cfg, q1, q2, b)?;
            dft_beam(cfg, m1, m2)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn zero_index_is_all_ones() {
        let cfg = AntennaConfig::single_panel(2, 1, 4, 1).unwrap();
        let b = dft_beam(&cfg, 0, 0).unwrap();
        assert!(b.entries.iter().all(|e| close(*e, C64::new(1.0, 0.0))));
    }

    #[test]
    fn half_grid_flips_sign() {
        let cfg = AntennaConfig::single_panel(2, 1, 4, 1).unwrap();
        let b = dft_beam(&cfg, 4, 0).unwrap();
        assert!(close(b.entries[0], C64::new(1.0, 0.0)));
        assert!(close(b.entries[1], C64::new(-1.0, 0.0)));
    }

    #[test]
    fn kronecker_layout_matches_loop_oracle() {
        let cfg = AntennaConfig::single_panel(2, 2, 4, 4).unwrap();
        let b = dft_beam(&cfg, 1, 1).unwrap();
        let g = [C64::new(1.0, 0.0), C64::from_polar(1.0, PI / 4.0)];
        let u = g;
        let mut expected = Vec::new();
        for uq in u {
            for gp in g {
                expected.push(uq * gp);
            }
        }
        for (x, y) in b.entries.iter().zip(&expected) {
            assert!(close(*x, *y));
        }
    }

    #[test]
    fn out_of_grid_index_is_rejected() {
        let cfg = AntennaConfig::single_panel(2, 1, 4, 1).unwrap();
        assert!(matches!(
            dft_beam(&cfg, 8, 0),
            Err(Error::OutOfRange { what: "m1", .. })
        ));
        assert!(dft_beam(&cfg, 0, 1).is_err());
    }

    #[test]
    fn rotations_enumerate_oversampling() {
        let c11 = AntennaConfig::single_panel(2, 1, 1, 1).unwrap();
        assert_eq!(rotation_hypotheses(&c11), vec![(0, 0)]);
        let c41 = AntennaConfig::single_panel(2, 1, 4, 1).unwrap();
        assert_eq!(
            rotation_hypotheses(&c41),
            vec![(0, 0), (1, 0), (2, 0), (3, 0)]
        );
        let c44 = AntennaConfig::single_panel(2, 2, 4, 4).unwrap();
        assert_eq!(rotation_hypotheses(&c44).len(), 16);
    }

    #[test]
    fn rotation_membership_is_congruence() {
        let cfg = AntennaConfig::single_panel(4, 2, 4, 4).unwrap();
        for (q1, q2) in rotation_hypotheses(&cfg) {
            for b in rotation_beams(&cfg, q1, q2).unwrap() {
                assert_eq!(b.m1 % cfg.o1, q1);
                assert_eq!(b.m2 % cfg.o2, q2);
            }
        }
    }

    #[test]
    fn unsupported_oversampling_rejected() {
        assert!(AntennaConfig::single_panel(2, 2, 2, 2).is_err());
        assert!(AntennaConfig::single_panel(2, 2, 1, 4).is_err());
    }

    #[test]
    fn conjugate_symmetry() {
        let cfg = AntennaConfig::single_panel(4, 2, 4, 4).unwrap();
        for m1 in 0..cfg.grid1() {
            for m2 in 0..cfg.grid2() {
                let b = dft_beam(&cfg, m1, m2).unwrap();
                let c = dft_beam(
                    &cfg,
                    (cfg.grid1() - m1) % cfg.grid1(),
                    (cfg.grid2() - m2) % cfg.grid2(),
                )
                .unwrap();
                for (x, y) in b.entries.iter().zip(&c.entries) {
                    assert!((x.conj() - y).norm() < 1e-10);
                }
            }
        }
    }
}
