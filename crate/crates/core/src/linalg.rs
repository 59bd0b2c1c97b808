//! Complex linear-algebra helpers shared by the encoders, decoders and the
//! simulator.

use nalgebra::{DMatrix, DVector};

use crate::{ChannelRealization, Error, Result, C64};

/// Per-subband precoding matrices, `n_ap` rows by `rank` columns each.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub subbands: Vec<DMatrix<C64>>,
}

impl Precoder {
    pub fn new(subbands: Vec<DMatrix<C64>>) -> Self {
        Precoder { subbands }
    }

    pub fn n_3(&self) -> usize {
        self.subbands.len()
    }

    pub fn n_ap(&self) -> usize {
        self.subbands.first().map_or(0, |m| m.nrows())
    }

    pub fn rank(&self) -> usize {
        self.subbands.first().map_or(0, |m| m.ncols())
    }

    pub fn column(&self, t: usize, layer: usize) -> DVector<C64> {
        self.subbands[t].column(layer).into_owned()
    }

    /// Scales every column to unit norm. Zero columns are left untouched.
    pub fn normalize_columns(&mut self) {
        for m in &mut self.subbands {
            for mut c in m.column_iter_mut() {
                let n = c.norm();
                if n > 0.0 {
                    c /= C64::new(n, 0.0);
                }
            }
        }
    }

    /// Maps a port-domain precoder through per-polarization port beams.
    ///
    /// `port_beams` is `n_el x n_ports`; the result has `2 n_el` rows.
    pub fn through_port_beams(&self, port_beams: &DMatrix<C64>) -> Result<Precoder> {
        let n_ports = port_beams.ncols();
        if self.n_ap() != 2 * n_ports {
            return Err(Error::DimensionMismatch(format!(
                "precoder has {} rows, port beams cover {} ports",
                self.n_ap(),
                2 * n_ports
            )));
        }
        let mut out = Vec::with_capacity(self.n_3());
        for m in &self.subbands {
            let upper = port_beams * m.rows(0, n_ports);
            let lower = port_beams * m.rows(n_ports, n_ports);
            let mut stacked = DMatrix::zeros(2 * port_beams.nrows(), m.ncols());
            stacked.rows_mut(0, port_beams.nrows()).copy_from(&upper);
            stacked
                .rows_mut(port_beams.nrows(), port_beams.nrows())
                .copy_from(&lower);
            out.push(stacked);
        }
        let mut p = Precoder::new(out);
        p.normalize_columns();
        Ok(p)
    }
}

/// `a^H b`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Top-`k` right singular vectors of `h` (`n_rx x n_ap`) as columns, ordered
/// by decreasing singular value.
pub fn dominant_right_singular(h: &DMatrix<C64>, k: usize) -> Result<DMatrix<C64>> {
    let n_ap = h.ncols();
    if k > h.nrows().min(n_ap) {
        return Err(Error::DimensionMismatch(format!(
            "rank {k} exceeds channel rank bound {}",
            h.nrows().min(n_ap)
        )));
    }
    if h.nrows() == 1 && k == 1 {
        let mut v = DMatrix::from_iterator(n_ap, 1, h.row(0).iter().map(|x| x.conj()));
        let n = v.norm();
        if n > 0.0 {
            v /= C64::new(n, 0.0);
        }
        return Ok(v);
    }
    let svd = h.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DimensionMismatch("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = DMatrix::zeros(n_ap, k);
    for (j, &idx) in order.iter().take(k).enumerate() {
        for a in 0..n_ap {
            out[(a, j)] = v_t[(idx, a)].conj();
        }
    }
    Ok(out)
}

/// Per-subband precoder targets: the top-`rank` right singular vectors of
/// every `H_t`, each scaled by the phase that makes its left singular vector
/// agree with the wideband dominant receive direction. For a single receive
/// antenna this is `conj(h_t) / ‖h_t‖`, so path delays stay visible as
/// subband phase slopes.
///
/// Also returns the singular values, `[t][layer]`.
pub fn subband_targets(
    channel: &ChannelRealization,
    rank: usize,
) -> Result<(Precoder, Vec<Vec<f64>>)> {
    let n_rx = channel.n_rx();
    if rank == 0 || rank > n_rx.min(channel.n_ap()) {
        return Err(Error::DimensionMismatch(format!(
            "rank {rank} exceeds channel rank bound {}",
            n_rx.min(channel.n_ap())
        )));
    }
    let mut out = Vec::with_capacity(channel.n_3());
    let mut gains = Vec::with_capacity(channel.n_3());
    if n_rx == 1 {
        for h in channel.subbands() {
            let n = h.norm();
            let v = DMatrix::from_iterator(
                h.ncols(),
                1,
                h.row(0).iter().map(|x| {
                    if n > 0.0 {
                        x.conj() / n
                    } else {
                        C64::new(0.0, 0.0)
                    }
                }),
            );
            out.push(v);
            gains.push(vec![n]);
        }
        return Ok((Precoder::new(out), gains));
    }
    let mut wide = DMatrix::<C64>::zeros(n_rx, n_rx);
    for h in channel.subbands() {
        wide += h * h.adjoint();
    }
    let (_, reference) = hermitian_top_eigenvectors(&wide, rank);
    for h in channel.subbands() {
        let svd = h.clone().svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::DimensionMismatch("SVD did not converge".into())),
        };
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut m = DMatrix::zeros(h.ncols(), rank);
        let mut g = Vec::with_capacity(rank);
        for (j, &idx) in order.iter().take(rank).enumerate() {
            let align = reference.column(j).dotc(&u.column(idx));
            let rot = if align.norm() > 0.0 {
                align.conj() / align.norm()
            } else {
                C64::new(1.0, 0.0)
            };
            for a in 0..h.ncols() {
                m[(a, j)] = v_t[(idx, a)].conj() * rot;
            }
            g.push(svd.singular_values[idx]);
        }
        out.push(m);
        gains.push(g);
    }
    Ok((Precoder::new(out), gains))
}

/// Top-`k` eigenvectors of a Hermitian matrix, strongest first.
pub fn hermitian_top_eigenvectors(r: &DMatrix<C64>, k: usize) -> (Vec<f64>, DMatrix<C64>) {
    let eig = r.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let n = r.nrows();
    let mut vecs = DMatrix::zeros(n, k);
    let mut vals = Vec::with_capacity(k);
    for (j, &idx) in order.iter().take(k).enumerate() {
        vals.push(eig.eigenvalues[idx]);
        vecs.set_column(j, &eig.eigenvectors.column(idx));
    }
    (vals, vecs)
}

/// Normalized squared error between two precoders, each column compared
/// after the best common phase rotation:
/// `Σ min_θ ‖x - e^{jθ} y‖² / Σ ‖y‖²`.
pub fn nmse(estimate: &Precoder, target: &Precoder) -> f64 {
    let mut err = 0.0;
    let mut energy = 0.0;
    for (x, y) in estimate.subbands.iter().zip(&target.subbands) {
        for (cx, cy) in x.column_iter().zip(y.column_iter()) {
            let ip = cy.dotc(&cx).norm();
            err += cx.norm_squared() + cy.norm_squared() - 2.0 * ip;
            energy += cy.norm_squared();
        }
    }
    if energy == 0.0 {
        0.0
    } else {
        err.max(0.0) / energy
    }
}

/// Residual energy of `v` after projection onto the column span of `basis`,
/// relative to `‖v‖²`.
pub fn span_residual(basis: &DMatrix<C64>, v: &DVector<C64>) -> f64 {
    let q = basis.clone().qr().q();
    // keep only columns that carry rank
    let r = basis.clone().qr().r();
    let mut proj = DVector::zeros(v.len());
    for j in 0..r.nrows().min(r.ncols()) {
        if r[(j, j)].norm() > 1e-12 {
            let qj = q.column(j);
            proj += qj * qj.dotc(v);
        }
    }
    let vn = v.norm_squared();
    if vn == 0.0 {
        0.0
    } else {
        (v - proj).norm_squared() / vn
    }
}
