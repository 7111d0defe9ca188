//! Flux coupling between the levitated sphere and the gradiometric pickup
//! loop.
//!
//! The sphere is modeled as a perfect-diamagnet image dipole responding to the
//! local trap field, m = −(2π/μ0)·r_p³·B(r0). Fluxes are obtained by
//! line-integrating the dipole vector potential around the discretized
//! gradiometer with midpoint quadrature. Because the trap field is linear, the
//! displacement derivative of the dipole is a constant "derivative dipole" per
//! axis, which makes the flux sensitivity available analytically (checked
//! against a finite-difference oracle in the tests). The same kernels drive
//! the inverse problem of locating the pickup loop from measured
//! sensitivities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{MU0, PHI0, TAU};
use crate::error::{Error, Result};
use crate::fitting::{levenberg_marquardt, LmOptions};

pub type Vec3 = [f64; 3];

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Two coplanar square loops wound in opposition.
///
/// The loop plane is z = 0 of the pickup frame with the square centers along
/// an axis rotated by `in_plane_rotation` from the trap x-axis.
/// `plane_offset` is the displacement of the trap centre from the pickup
/// centre, expressed in trap coordinates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GradiometricLoop {
    /// Side length of each square (m).
    pub square_side: f64,
    /// Distance between the two square centers (m).
    pub center_separation: f64,
    /// Rotation of the gradiometer axis about z (rad).
    pub in_plane_rotation: f64,
    /// Δr = (Δx, Δy, Δz), trap centre minus pickup centre (m).
    pub plane_offset: Vec3,
    /// Circulation of the two squares; must be opposite.
    pub winding: [i8; 2],
    /// Subdivisions per square side for the midpoint quadrature.
    pub segments_per_side: usize,
}

impl GradiometricLoop {
    pub fn new(
        square_side: f64,
        center_separation: f64,
        in_plane_rotation: f64,
        plane_offset: Vec3,
        winding: [i8; 2],
        segments_per_side: usize,
    ) -> Result<Self> {
        if square_side <= 0.0 {
            return Err(Error::Domain("square side must be positive".into()));
        }
        if center_separation < square_side {
            return Err(Error::Domain(format!(
                "square centers {center_separation:.3e} m closer than one side {square_side:.3e} m (overlap)"
            )));
        }
        if winding[0] * winding[1] != -1 {
            return Err(Error::Domain(
                "gradiometer windings must be opposite (+1/-1)".into(),
            ));
        }
        if segments_per_side < 8 {
            return Err(Error::Domain(format!(
                "need at least 8 segments per side, got {segments_per_side}"
            )));
        }
        Ok(Self {
            square_side,
            center_separation,
            in_plane_rotation,
            plane_offset,
            winding,
            segments_per_side,
        })
    }

    pub fn with_offset(&self, plane_offset: Vec3) -> Self {
        Self {
            plane_offset,
            ..*self
        }
    }

    /// Quadrature segments of both squares, pickup centre at the origin.
    pub fn segments_centered(&self, segments_per_side: usize) -> Vec<Segment> {
        let (sin_t, cos_t) = self.in_plane_rotation.sin_cos();
        let axis_u = [cos_t, sin_t, 0.0];
        let axis_v = [-sin_t, cos_t, 0.0];
        let h = self.square_side / 2.0;
        let mut segments =
            Vec::with_capacity(2 * 4 * segments_per_side);
        for (k, &w) in self.winding.iter().enumerate() {
            let side = if k == 0 { 1.0 } else { -1.0 };
            let center = scale(axis_u, side * self.center_separation / 2.0);
            let mut corners = [
                add(center, add(scale(axis_u, -h), scale(axis_v, -h))),
                add(center, add(scale(axis_u, h), scale(axis_v, -h))),
                add(center, add(scale(axis_u, h), scale(axis_v, h))),
                add(center, add(scale(axis_u, -h), scale(axis_v, h))),
            ];
            if w < 0 {
                corners.reverse();
            }
            for i in 0..4 {
                let p = corners[i];
                let q = corners[(i + 1) % 4];
                let dl = scale(sub(q, p), 1.0 / segments_per_side as f64);
                for s in 0..segments_per_side {
                    let mid = add(p, scale(sub(q, p), (s as f64 + 0.5) / segments_per_side as f64));
                    segments.push(Segment { midpoint: mid, dl });
                }
            }
        }
        segments
    }
}

/// One straight quadrature element of the loop path.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub midpoint: Vec3,
    pub dl: Vec3,
}

/// Linearized trap field B(r) = (b_x·x, b_y·y, b_z·z).
pub fn quadrupole_field(r: Vec3, b: Vec3) -> Vec3 {
    [b[0] * r[0], b[1] * r[1], b[2] * r[2]]
}

/// Image dipole of the superconducting sphere displaced to r0,
/// m = −(2π/μ0)·r_p³·B(r0).
pub fn induced_dipole(r0: Vec3, b: Vec3, radius: f64) -> Vec3 {
    scale(quadrupole_field(r0, b), -TAU / MU0 * radius.powi(3))
}

/// Vector potential of a point dipole, A = (μ0/4π)·m×(r−r0)/|r−r0|³.
pub fn dipole_vector_potential(moment: Vec3, r: Vec3, r0: Vec3) -> Vec3 {
    let u = sub(r, r0);
    let d = norm(u);
    scale(cross(moment, u), MU0 / (2.0 * TAU) / (d * d * d))
}

/// Midpoint-quadrature flux of an arbitrary vector potential through the loop.
/// Positions are in trap coordinates (loop centre at −Δr).
pub fn flux_of_potential(
    loop_: &GradiometricLoop,
    potential: impl Fn(Vec3) -> Vec3,
) -> f64 {
    let origin = scale(loop_.plane_offset, -1.0);
    loop_
        .segments_centered(loop_.segments_per_side)
        .iter()
        .map(|seg| dot(potential(add(seg.midpoint, origin)), seg.dl))
        .sum()
}

/// Flux linked by the gradiometer from the image dipole of a sphere displaced
/// to r0 (trap coordinates).
pub fn loop_flux(loop_: &GradiometricLoop, b: Vec3, radius: f64, r0: Vec3) -> Result<f64> {
    let moment = induced_dipole(r0, b, radius);
    // Dipole position relative to the pickup centre.
    let rel = add(r0, loop_.plane_offset);
    let segments = loop_.segments_centered(loop_.segments_per_side);
    let min_dist = segments
        .iter()
        .map(|s| norm(sub(s.midpoint, rel)))
        .fold(f64::INFINITY, f64::min);
    let seg_len = loop_.square_side / loop_.segments_per_side as f64;
    if min_dist < seg_len {
        return Err(Error::SingularGeometry(format!(
            "dipole within {min_dist:.3e} m of the integration path"
        )));
    }
    Ok(dipole_flux_kernel(&segments, rel, moment))
}

/// Σ A·dl for a dipole at `rel` (pickup-centred coordinates).
fn dipole_flux_kernel(segments: &[Segment], rel: Vec3, moment: Vec3) -> f64 {
    let coeff = MU0 / (2.0 * TAU);
    segments
        .iter()
        .map(|seg| {
            let u = sub(seg.midpoint, rel);
            let d2 = dot(u, u);
            let inv3 = 1.0 / (d2 * d2.sqrt());
            coeff * dot(cross(moment, u), seg.dl) * inv3
        })
        .sum()
}

/// Raw flux sensitivities ∂Φ_pul/∂i (Wb/m) at a dipole position `rel` relative
/// to the pickup centre. The derivative dipole of axis i is
/// −(2π/μ0)·r_p³·b_i·ê_i; axes with b_i = 0 report zero.
fn sensitivity_kernel(segments: &[Segment], rel: Vec3, b: Vec3, radius: f64) -> Vec3 {
    // (μ0/4π)·(2π/μ0)·r_p³ = r_p³/2 per unit gradient.
    let coeff = radius.powi(3) / 2.0;
    let mut out = [0.0; 3];
    for seg in segments {
        let u = sub(seg.midpoint, rel);
        let d2 = dot(u, u);
        let inv3 = 1.0 / (d2 * d2.sqrt());
        let dl = seg.dl;
        // (ê_i × u)·dl for i = x, y, z.
        out[0] -= (u[1] * dl[2] - u[2] * dl[1]) * inv3;
        out[1] -= (u[2] * dl[0] - u[0] * dl[2]) * inv3;
        out[2] -= (u[0] * dl[1] - u[1] * dl[0]) * inv3;
    }
    [
        coeff * b[0] * out[0],
        coeff * b[1] * out[1],
        coeff * b[2] * out[2],
    ]
}

/// Flux-transformer inductance chain from the pickup loop to the SQUID.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransformerParams {
    /// SQUID loop inductance (H).
    pub l_squid: f64,
    /// Input (flip-chip) coil inductance (H).
    pub l_input: f64,
    /// Twisted-pair transport inductance (H).
    pub l_twisted: f64,
    /// Pickup loop inductance (H).
    pub l_pickup: f64,
    /// Input coupling coefficient ν_i in [0, 1].
    pub coupling: f64,
}

impl TransformerParams {
    pub fn new(
        l_squid: f64,
        l_input: f64,
        l_twisted: f64,
        l_pickup: f64,
        coupling: f64,
    ) -> Result<Self> {
        if l_squid <= 0.0 || l_input <= 0.0 || l_twisted <= 0.0 || l_pickup <= 0.0 {
            return Err(Error::Domain("inductances must be positive".into()));
        }
        if !(0.0..=1.0).contains(&coupling) {
            return Err(Error::Domain(format!(
                "coupling coefficient {coupling} outside [0, 1]"
            )));
        }
        let params = Self {
            l_squid,
            l_input,
            l_twisted,
            l_pickup,
            coupling,
        };
        let alpha = transformer_efficiency(&params);
        if alpha >= 1.0 {
            return Err(Error::Unphysical(format!(
                "flux transfer efficiency {alpha:.3} not below one"
            )));
        }
        Ok(params)
    }

    /// Mutual inductance M_i = ν_i·sqrt(L_s·L_fc) (H).
    pub fn mutual(&self) -> f64 {
        self.coupling * (self.l_squid * self.l_input).sqrt()
    }
}

/// Flux transfer efficiency α = M_i/(L_fc + L_tw + L_pul).
pub fn transformer_efficiency(t: &TransformerParams) -> f64 {
    t.mutual() / (t.l_input + t.l_twisted + t.l_pickup)
}

/// Flux sensitivities of the three translational modes for one placement.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SensitivityResult {
    /// ∂Φ_pul/∂i (Wb/m), signed; `None` where the gradient vanishes.
    pub d_phi_pul: [Option<f64>; 3],
    /// ∂Φ_squid/∂i = α·∂Φ_pul/∂i (Wb/m).
    pub d_phi_squid: [Option<f64>; 3],
    /// Geometric factor F_i = (∂Φ_pul/∂i)/(b_i·r_p²).
    pub f_factor: [Option<f64>; 3],
}

/// Analytic flux sensitivity of the sphere at the trap centre, assembled from
/// the per-axis derivative dipoles.
pub fn flux_sensitivity(
    loop_: &GradiometricLoop,
    b: Vec3,
    radius: f64,
    alpha: f64,
) -> Result<SensitivityResult> {
    if radius <= 0.0 {
        return Err(Error::Domain("sphere radius must be positive".into()));
    }
    let segments = loop_.segments_centered(loop_.segments_per_side);
    let raw = sensitivity_kernel(&segments, loop_.plane_offset, b, radius);
    let mut d_phi_pul = [None; 3];
    let mut d_phi_squid = [None; 3];
    let mut f_factor = [None; 3];
    for i in 0..3 {
        if b[i] != 0.0 {
            d_phi_pul[i] = Some(raw[i]);
            d_phi_squid[i] = Some(alpha * raw[i]);
            f_factor[i] = Some(raw[i] / (b[i] * radius * radius));
        }
    }
    Ok(SensitivityResult {
        d_phi_pul,
        d_phi_squid,
        f_factor,
    })
}

/// Single-photon coupling g0/2π (Hz) from the assembled flux chain,
/// s_w·α·F·|b|·r_p²·x_zpf/Φ0.
pub fn assemble_g0(
    s_w_hz_per_phi0: f64,
    alpha: f64,
    f_factor: f64,
    gradient: f64,
    radius: f64,
    xzpf: f64,
) -> f64 {
    s_w_hz_per_phi0 * alpha * f_factor * gradient.abs() * radius * radius * xzpf / PHI0
}

/// RMS flux induced in the SQUID by a mode at phonon occupation n_m,
/// α·F·|b|·r_p²·x_zpf·sqrt(2 n_m + 1) (Wb).
pub fn mean_flux_rms(
    alpha: f64,
    f_factor: f64,
    gradient: f64,
    radius: f64,
    xzpf: f64,
    n_phonon: f64,
) -> f64 {
    alpha * f_factor * gradient.abs() * radius * radius * xzpf * (2.0 * n_phonon + 1.0).sqrt()
}

/// Search controls for [`locate_pickup`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LocateOptions {
    /// Half-extent of the (Δx, Δy) scan (m).
    pub span: f64,
    /// Scan pitch (m).
    pub pitch: f64,
    /// Relative tolerance for the stage-1 sensitivity-ratio match.
    pub ratio_tolerance: f64,
    /// Quadrature segments per side during the scan.
    pub scan_segments: usize,
    /// Quadrature segments per side during refinement.
    pub refine_segments: usize,
    /// Width of the Gaussian prior tying Δz to the supplied estimate (m).
    pub dz_prior_sigma: f64,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self {
            span: 600e-6,
            pitch: 5e-6,
            ratio_tolerance: 0.10,
            scan_segments: 16,
            refine_segments: 64,
            dz_prior_sigma: 50e-6,
        }
    }
}

/// One candidate placement of the pickup loop.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlacementSolution {
    /// Fitted Δr (m).
    pub offset: Vec3,
    /// Fitted flux-transfer efficiency.
    pub alpha: f64,
    /// Relative L2 misfit of the absolute sensitivities.
    pub residual: f64,
    /// Index of the point-symmetric partner in the solution list.
    pub symmetry_partner: Option<usize>,
    /// Refinement normal matrix was singular.
    pub rank_deficient: bool,
}

/// Stage-1 ratio-misfit map, kept for diagnostics and export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanDiagnostic {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    /// Row-major misfit values, dy-major.
    pub misfit: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlacementSearch {
    pub solutions: Vec<PlacementSolution>,
    pub diagnostic: ScanDiagnostic,
}

/// Locate the pickup loop from measured SQUID-side sensitivities (Φ0/m,
/// magnitudes).
///
/// Stage 1 scans (Δx, Δy) at the prior Δz and keeps cells where both
/// independent sensitivity ratios (in which α cancels) match the measurement.
/// Stage 2 refines (Δx, Δy, Δz, α) per matching cluster by damped least
/// squares on the absolute sensitivities, with Δz tied to the prior (the three
/// measured numbers alone cannot fix four parameters). Solutions are reported
/// with their point-symmetric partners, sorted by residual.
pub fn locate_pickup(
    measured_phi0_per_m: Vec3,
    b: Vec3,
    radius: f64,
    shape: &GradiometricLoop,
    dz_prior: f64,
    options: &LocateOptions,
) -> Result<PlacementSearch> {
    if dz_prior <= 0.0 {
        return Err(Error::Domain("dz prior must be positive".into()));
    }
    let measured: Vec3 = [
        measured_phi0_per_m[0].abs() * PHI0,
        measured_phi0_per_m[1].abs() * PHI0,
        measured_phi0_per_m[2].abs() * PHI0,
    ];
    let m_max = measured.iter().fold(0.0f64, |a, v| a.max(*v));

    let n = (2.0 * options.span / options.pitch).round() as usize + 1;
    let grid: Vec<f64> = (0..n)
        .map(|i| -options.span + i as f64 * options.pitch)
        .collect();

    if m_max == 0.0 {
        return Ok(PlacementSearch {
            solutions: Vec::new(),
            diagnostic: ScanDiagnostic {
                dx: grid.clone(),
                dy: grid,
                misfit: vec![f64::INFINITY; n * n],
            },
        });
    }

    let denom = (0..3).max_by(|&i, &j| measured[i].total_cmp(&measured[j])).unwrap();
    let others: Vec<usize> = (0..3).filter(|&i| i != denom).collect();
    let target_ratios: Vec<f64> = others.iter().map(|&i| measured[i] / measured[denom]).collect();

    let scan_segments = shape.segments_centered(options.scan_segments);
    let misfit: Vec<f64> = grid
        .par_iter()
        .flat_map_iter(|&dy| {
            let scan_segments = &scan_segments;
            let grid = &grid;
            let target_ratios = &target_ratios;
            let others = &others;
            grid.iter().map(move |&dx| {
                let s = sensitivity_kernel(scan_segments, [dx, dy, dz_prior], b, radius);
                let s_den = s[denom].abs();
                if s_den == 0.0 {
                    return f64::INFINITY;
                }
                others
                    .iter()
                    .zip(target_ratios.iter())
                    .map(|(&i, &t)| ((s[i].abs() / s_den) - t).abs() / t)
                    .fold(0.0f64, f64::max)
            })
        })
        .collect();

    // Cluster matching cells (4-connected) and keep the best cell of each.
    let matched: Vec<bool> = misfit.iter().map(|&m| m <= options.ratio_tolerance).collect();
    let mut visited = vec![false; n * n];
    let mut seeds: Vec<(usize, f64)> = Vec::new();
    for start in 0..n * n {
        if !matched[start] || visited[start] {
            continue;
        }
        let mut best = (start, misfit[start]);
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(cell) = stack.pop() {
            if misfit[cell] < best.1 {
                best = (cell, misfit[cell]);
            }
            let (iy, ix) = (cell / n, cell % n);
            let mut push = |yy: usize, xx: usize| {
                let idx = yy * n + xx;
                if matched[idx] && !visited[idx] {
                    visited[idx] = true;
                    stack.push(idx);
                }
            };
            if ix > 0 {
                push(iy, ix - 1);
            }
            if ix + 1 < n {
                push(iy, ix + 1);
            }
            if iy > 0 {
                push(iy - 1, ix);
            }
            if iy + 1 < n {
                push(iy + 1, ix);
            }
        }
        seeds.push(best);
    }
    seeds.sort_by(|a, b| a.1.total_cmp(&b.1));
    seeds.truncate(64);

    // Stage 2: refine each seed on absolute sensitivities.
    let refine_segments = shape.segments_centered(options.refine_segments);
    let length_scale = 100e-6;
    let weights: Vec3 = {
        let floor = 0.05 * m_max;
        [
            measured[0].max(floor),
            measured[1].max(floor),
            measured[2].max(floor),
        ]
    };
    let mut solutions: Vec<PlacementSolution> = Vec::new();
    for &(cell, _) in &seeds {
        let (iy, ix) = (cell / n, cell % n);
        let seed = [grid[ix], grid[iy], dz_prior];
        let s0 = sensitivity_kernel(&refine_segments, seed, b, radius);
        let num: f64 = (0..3).map(|i| measured[i] * s0[i].abs()).sum();
        let den: f64 = (0..3).map(|i| s0[i] * s0[i]).sum();
        if den == 0.0 || num == 0.0 {
            continue;
        }
        let alpha0 = num / den;

        let residual_model = |p: &[f64], res: &mut Vec<f64>, jac: &mut Vec<Vec<f64>>| {
            let eval = |q: &[f64]| -> [f64; 4] {
                let pos = [
                    q[0] * length_scale,
                    q[1] * length_scale,
                    q[2] * length_scale,
                ];
                let alpha = q[3].exp();
                let s = sensitivity_kernel(&refine_segments, pos, b, radius);
                let mut out = [0.0; 4];
                for i in 0..3 {
                    let model = alpha * alpha * s[i] * s[i];
                    out[i] = (model - measured[i] * measured[i]) / (weights[i] * weights[i]);
                }
                out[3] = (pos[2] - dz_prior) / options.dz_prior_sigma;
                out
            };
            let base = eval(p);
            res.clear();
            jac.clear();
            let mut columns = [[0.0; 4]; 4];
            for j in 0..4 {
                let h = 1e-5;
                let mut hi = p.to_vec();
                hi[j] += h;
                let mut lo = p.to_vec();
                lo[j] -= h;
                let fhi = eval(&hi);
                let flo = eval(&lo);
                for i in 0..4 {
                    columns[j][i] = (fhi[i] - flo[i]) / (2.0 * h);
                }
            }
            for i in 0..4 {
                res.push(base[i]);
                jac.push((0..4).map(|j| columns[j][i]).collect());
            }
        };

        let start = [
            seed[0] / length_scale,
            seed[1] / length_scale,
            seed[2] / length_scale,
            alpha0.ln(),
        ];
        let Ok(fit) = levenberg_marquardt(residual_model, &start, &LmOptions::default()) else {
            continue;
        };
        let offset = [
            fit.params[0] * length_scale,
            fit.params[1] * length_scale,
            fit.params[2] * length_scale,
        ];
        let alpha = fit.params[3].exp();
        let s = sensitivity_kernel(&refine_segments, offset, b, radius);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..3 {
            num += ((alpha * s[i]).abs() - measured[i]).powi(2);
            den += measured[i] * measured[i];
        }
        let residual = (num / den).sqrt();

        // Merge refinements that landed on the same placement.
        let duplicate = solutions.iter_mut().find(|sol| {
            norm(sub(sol.offset, offset)) < 2e-6 && (sol.alpha / alpha - 1.0).abs() < 1e-2
        });
        match duplicate {
            Some(existing) => {
                if residual < existing.residual {
                    existing.offset = offset;
                    existing.alpha = alpha;
                    existing.residual = residual;
                    existing.rank_deficient = fit.rank_deficient;
                }
            }
            None => solutions.push(PlacementSolution {
                offset,
                alpha,
                residual,
                symmetry_partner: None,
                rank_deficient: fit.rank_deficient,
            }),
        }
    }

    solutions.sort_by(|a, b| {
        a.residual
            .total_cmp(&b.residual)
            .then(norm(a.offset).total_cmp(&norm(b.offset)))
    });

    // Pair each solution with its point-symmetric image (Δx, Δy) → (−Δx, −Δy).
    let offsets: Vec<Vec3> = solutions.iter().map(|s| s.offset).collect();
    for (i, sol) in solutions.iter_mut().enumerate() {
        if sol.symmetry_partner.is_some() {
            continue;
        }
        let image = [-offsets[i][0], -offsets[i][1], offsets[i][2]];
        let partner = offsets
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, o)| (j, norm(sub(*o, image))))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((j, dist)) = partner {
            if dist < 4.0 * options.pitch {
                sol.symmetry_partner = Some(j);
            }
        }
    }
    let partners: Vec<Option<usize>> = solutions.iter().map(|s| s.symmetry_partner).collect();
    for (i, &p) in partners.iter().enumerate() {
        if let Some(j) = p {
            solutions[j].symmetry_partner = Some(i);
        }
    }

    Ok(PlacementSearch {
        solutions,
        diagnostic: ScanDiagnostic {
            dx: grid.clone(),
            dy: grid,
            misfit,
        },
    })
}

/// One row of an exported sensitivity map.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SensitivityMapRow {
    pub dx: f64,
    pub dy: f64,
    pub f_factor: Vec3,
}

/// Geometric factors F_i over a lateral grid at fixed Δz, for plotting.
pub fn sensitivity_map(
    shape: &GradiometricLoop,
    b: Vec3,
    radius: f64,
    dz: f64,
    span: f64,
    pitch: f64,
) -> Vec<SensitivityMapRow> {
    let n = (2.0 * span / pitch).round() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| -span + i as f64 * pitch).collect();
    let segments = shape.segments_centered(shape.segments_per_side);
    grid.par_iter()
        .flat_map_iter(|&dy| {
            let segments = &segments;
            let grid = &grid;
            grid.iter().map(move |&dx| {
                let s = sensitivity_kernel(segments, [dx, dy, dz], b, radius);
                let f = [
                    if b[0] != 0.0 { s[0] / (b[0] * radius * radius) } else { f64::NAN },
                    if b[1] != 0.0 { s[1] / (b[1] * radius * radius) } else { f64::NAN },
                    if b[2] != 0.0 { s[2] / (b[2] * radius * radius) } else { f64::NAN },
                ];
                SensitivityMapRow {
                    dx,
                    dy,
                    f_factor: f,
                }
            })
        })
        .collect()
}
