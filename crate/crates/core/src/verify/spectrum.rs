//! Exact diagonalization of the transfer matrix, sector by sector.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain::{ChainContext, DENSE_LIMIT};
use crate::error::{BetheError, Result};
use crate::linalg::{eigenpairs, eigenvalues, C64};

/// Eigenvalues of the transfer matrix restricted to one particle sector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorSpectrum {
    /// Particle number `n`.
    pub sector: usize,
    /// Eigenvalues sorted by real part, then imaginary part.
    #[serde(serialize_with = "crate::verify::serialize_points")]
    pub eigenvalues: Vec<C64>,
}

fn sector_block(ctx: &ChainContext, full: &DMatrix<C64>, n: usize) -> DMatrix<C64> {
    let idx = ctx.sector_indices(n);
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| full[(idx[i], idx[j])])
}

fn dense_transfer(ctx: &ChainContext, lambda: C64) -> Result<DMatrix<C64>> {
    if ctx.dim() > DENSE_LIMIT {
        return Err(BetheError::DimensionTooLarge { dim: ctx.dim(), limit: DENSE_LIMIT });
    }
    ctx.monodromy(lambda)?.dense_transfer()
}

/// Spectrum of T(λ) in every sector `n = 0..=(N-1)L`.
pub fn exact_spectrum(ctx: &ChainContext, lambda: C64) -> Result<Vec<SectorSpectrum>> {
    let full = dense_transfer(ctx, lambda)?;
    Ok((0..=ctx.max_particles())
        .map(|n| {
            let mut eigenvalues = eigenvalues(&sector_block(ctx, &full, n));
            eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            SectorSpectrum { sector: n, eigenvalues }
        })
        .collect())
}

/// Eigenvalue pairs `(Λ(λ_a), Λ(λ_b))` of one sector matched by eigenvector overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSector {
    pub sector: usize,
    pub pairs: Vec<(C64, C64)>,
    /// Smallest normalized overlap among the accepted pairs.
    pub min_overlap: f64,
}

fn overlap(u: &DVector<C64>, w: &DVector<C64>) -> f64 {
    u.dotc(w).norm() / (u.norm() * w.norm())
}

/// Pairs the spectra at two spectral parameters through eigenvector overlaps,
/// which is meaningful because transfer matrices at different λ commute.
pub fn match_spectra(ctx: &ChainContext, lambda_a: C64, lambda_b: C64) -> Result<Vec<MatchedSector>> {
    let fa = dense_transfer(ctx, lambda_a)?;
    let fb = dense_transfer(ctx, lambda_b)?;
    let mut out = Vec::new();
    for n in 0..=ctx.max_particles() {
        let pa = eigenpairs(&sector_block(ctx, &fa, n));
        let pb = eigenpairs(&sector_block(ctx, &fb, n));
        let mut used = vec![false; pb.len()];
        let mut pairs = Vec::with_capacity(pa.len());
        let mut min_overlap = 1.0_f64;
        for (la, ua) in &pa {
            let best = pb
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, (_, wb))| (j, overlap(ua, wb)))
                .max_by(|x, y| x.1.total_cmp(&y.1));
            if let Some((j, ov)) = best {
                used[j] = true;
                pairs.push((*la, pb[j].0));
                min_overlap = min_overlap.min(ov);
            }
        }
        out.push(MatchedSector { sector: n, pairs, min_overlap });
    }
    Ok(out)
}

/// Distance from `value` to the nearest eigenvalue of sector `n`.
pub fn distance_to_spectrum(spectrum: &[SectorSpectrum], n: usize, value: C64) -> f64 {
    spectrum
        .iter()
        .find(|s| s.sector == n)
        .map(|s| s.eigenvalues.iter().map(|e| (e - value).norm()).fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::INFINITY)
}
