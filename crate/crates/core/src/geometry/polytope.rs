//! Exact integrals over `box ∩ Laguerre cell` for dimension <= 3.
//!
//! The box is clipped by the cell's half-spaces (Sutherland-Hodgman on
//! polygons, face-by-face with a reconstructed cap in 3D), the resulting
//! convex polytope is split into simplices, and the integrals are summed.
//! For a d-simplex with vertices `v_0..v_d`:
//!
//! `int |x - y|^2 = vol / ((d+1)(d+2)) * (sum_i |v_i - y|^2 + |sum_i (v_i - y)|^2)`.

use super::{check_dim, laguerre_halfspaces, HalfSpace, Hyperrectangle, SampleSet};
use crate::error::{Error, Result};

pub const EXACT_MAX_DIM: usize = 3;

/// Integrals of `1` and `|x - y_j|^2` (Lebesgue measure) over `L_j(g) ∩ H`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellIntegrals {
    pub volume: f64,
    pub sq_dist: f64,
}

/// `vol(L_j(g) ∩ H)` by exact clipping.
pub fn cell_box_volume_exact(
    samples: &SampleSet,
    g: &[f64],
    j: usize,
    region: &Hyperrectangle,
) -> Result<f64> {
    Ok(cell_box_integrals_exact(samples, g, j, region)?.volume)
}

pub fn cell_box_integrals_exact(
    samples: &SampleSet,
    g: &[f64],
    j: usize,
    region: &Hyperrectangle,
) -> Result<CellIntegrals> {
    let l = region.dim();
    if l > EXACT_MAX_DIM {
        return Err(Error::UnsupportedDimension(l));
    }
    if j >= samples.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: samples.len(),
        });
    }
    check_dim(l, samples.dim())?;
    check_dim(samples.len(), g.len())?;
    let cuts = laguerre_halfspaces(samples, g, j);
    let y = samples.point(j);
    Ok(match l {
        1 => clip_interval(region, &cuts, y),
        2 => clip_polygon_2d(region, &cuts, y),
        _ => clip_polyhedron_3d(region, &cuts, y),
    })
}

fn clip_interval(region: &Hyperrectangle, cuts: &[HalfSpace], y: &[f64]) -> CellIntegrals {
    let (mut a, mut b) = (region.lo()[0], region.hi()[0]);
    for h in cuts {
        let c = h.normal[0];
        if c > 0.0 {
            b = b.min(h.offset / c);
        } else if c < 0.0 {
            a = a.max(h.offset / c);
        } else if h.offset < 0.0 {
            return CellIntegrals::default();
        }
    }
    if b <= a {
        return CellIntegrals::default();
    }
    let (u, v) = (a - y[0], b - y[0]);
    CellIntegrals {
        volume: b - a,
        sq_dist: (v * v * v - u * u * u) / 3.0,
    }
}

/// One Sutherland-Hodgman pass. Points on or created at the cutting plane
/// are appended to `cap`.
fn clip_poly<const N: usize>(
    poly: &[[f64; N]],
    h: &HalfSpace,
    out: &mut Vec<[f64; N]>,
    cap: Option<&mut Vec<[f64; N]>>,
) {
    out.clear();
    let mut cap = cap;
    let m = poly.len();
    if m == 0 {
        return;
    }
    let excess = |p: &[f64; N]| -> f64 {
        let mut s = -h.offset;
        for d in 0..N {
            s += h.normal[d] * p[d];
        }
        s
    };
    let mut prev = poly[m - 1];
    let mut prev_e = excess(&prev);
    for &cur in poly {
        let cur_e = excess(&cur);
        if cur_e <= 0.0 {
            if prev_e > 0.0 {
                let p = lerp(&prev, &cur, prev_e / (prev_e - cur_e));
                out.push(p);
                if let Some(c) = cap.as_deref_mut() {
                    c.push(p);
                }
            }
            out.push(cur);
            if cur_e == 0.0 {
                if let Some(c) = cap.as_deref_mut() {
                    c.push(cur);
                }
            }
        } else if prev_e < 0.0 {
            let p = lerp(&prev, &cur, prev_e / (prev_e - cur_e));
            out.push(p);
            if let Some(c) = cap.as_deref_mut() {
                c.push(p);
            }
        }
        prev = cur;
        prev_e = cur_e;
    }
}

fn lerp<const N: usize>(a: &[f64; N], b: &[f64; N], t: f64) -> [f64; N] {
    let mut p = [0.0; N];
    for d in 0..N {
        p[d] = a[d] + t * (b[d] - a[d]);
    }
    p
}

fn simplex_sq_dist<const N: usize>(verts: &[[f64; N]], vol: f64, y: &[f64]) -> f64 {
    let k = verts.len() as f64; // d + 1
    let mut sum_sq = 0.0;
    let mut sum = [0.0; N];
    for v in verts {
        for d in 0..N {
            let r = v[d] - y[d];
            sum_sq += r * r;
            sum[d] += r;
        }
    }
    let sum_norm: f64 = sum.iter().map(|s| s * s).sum();
    vol / (k * (k + 1.0)) * (sum_sq + sum_norm)
}

fn clip_polygon_2d(region: &Hyperrectangle, cuts: &[HalfSpace], y: &[f64]) -> CellIntegrals {
    let (lo, hi) = (region.lo(), region.hi());
    let mut poly = vec![
        [lo[0], lo[1]],
        [hi[0], lo[1]],
        [hi[0], hi[1]],
        [lo[0], hi[1]],
    ];
    let mut scratch = Vec::with_capacity(8);
    for h in cuts {
        clip_poly(&poly, h, &mut scratch, None);
        std::mem::swap(&mut poly, &mut scratch);
        if poly.len() < 3 {
            return CellIntegrals::default();
        }
    }
    let mut acc = CellIntegrals::default();
    let v0 = poly[0];
    for w in poly[1..].windows(2) {
        let (a, b) = (w[0], w[1]);
        let cross = (a[0] - v0[0]) * (b[1] - v0[1]) - (a[1] - v0[1]) * (b[0] - v0[0]);
        let area = 0.5 * cross.abs();
        acc.volume += area;
        acc.sq_dist += simplex_sq_dist(&[v0, a, b], area, y);
    }
    acc
}

fn clip_polyhedron_3d(region: &Hyperrectangle, cuts: &[HalfSpace], y: &[f64]) -> CellIntegrals {
    let (lo, hi) = (region.lo(), region.hi());
    let corner = |m: usize| -> [f64; 3] {
        let mut p = [0.0; 3];
        for d in 0..3 {
            p[d] = if m >> d & 1 == 1 { hi[d] } else { lo[d] };
        }
        p
    };
    // Faces as corner-mask cycles.
    const FACES: [[usize; 4]; 6] = [
        [0, 2, 6, 4], // x = lo
        [1, 5, 7, 3], // x = hi
        [0, 4, 5, 1], // y = lo
        [2, 3, 7, 6], // y = hi
        [0, 1, 3, 2], // z = lo
        [4, 6, 7, 5], // z = hi
    ];
    let mut faces: Vec<Vec<[f64; 3]>> = FACES
        .iter()
        .map(|f| f.iter().map(|&m| corner(m)).collect())
        .collect();
    let scale = (0..3).map(|d| region.width(d)).fold(0.0, f64::max);

    let mut scratch = Vec::with_capacity(8);
    for h in cuts {
        let cuts_something = faces.iter().flatten().any(|p| {
            h.normal[0] * p[0] + h.normal[1] * p[1] + h.normal[2] * p[2] > h.offset
        });
        if !cuts_something {
            continue;
        }
        let mut cap: Vec<[f64; 3]> = Vec::new();
        let mut next = Vec::with_capacity(faces.len() + 1);
        for f in &faces {
            clip_poly(f, h, &mut scratch, Some(&mut cap));
            if scratch.len() >= 3 {
                next.push(scratch.clone());
            }
        }
        if let Some(face) = order_cap(cap, &h.normal, 1e-12 * scale) {
            next.push(face);
        }
        faces = next;
        if faces.len() < 4 {
            return CellIntegrals::default();
        }
    }

    let mut centre = [0.0; 3];
    let mut count = 0.0;
    for f in &faces {
        for p in f {
            for d in 0..3 {
                centre[d] += p[d];
            }
            count += 1.0;
        }
    }
    for c in &mut centre {
        *c /= count;
    }
    let mut acc = CellIntegrals::default();
    for f in &faces {
        let v0 = f[0];
        for w in f[1..].windows(2) {
            let (a, b) = (w[0], w[1]);
            let vol = tetra_volume(&centre, &v0, &a, &b);
            acc.volume += vol;
            acc.sq_dist += simplex_sq_dist(&[centre, v0, a, b], vol, y);
        }
    }
    acc
}

fn tetra_volume(p: &[f64; 3], a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let u = [a[0] - p[0], a[1] - p[1], a[2] - p[2]];
    let v = [b[0] - p[0], b[1] - p[1], b[2] - p[2]];
    let w = [c[0] - p[0], c[1] - p[1], c[2] - p[2]];
    let det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
        + u[2] * (v[0] * w[1] - v[1] * w[0]);
    det.abs() / 6.0
}

/// Orders the coplanar cap points by angle; `None` if fewer than three
/// distinct points remain.
fn order_cap(mut pts: Vec<[f64; 3]>, normal: &[f64], tol: f64) -> Option<Vec<[f64; 3]>> {
    if pts.len() < 3 {
        return None;
    }
    let nn = (normal[0].powi(2) + normal[1].powi(2) + normal[2].powi(2)).sqrt();
    let n = [normal[0] / nn, normal[1] / nn, normal[2] / nn];
    // Seed axis least aligned with n.
    let axis = (0..3)
        .min_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()))
        .unwrap_or(0);
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let u = normalize(cross(&n, &e));
    let v = cross(&n, &u);
    let mut c = [0.0; 3];
    for p in &pts {
        for d in 0..3 {
            c[d] += p[d] / pts.len() as f64;
        }
    }
    let angle = |p: &[f64; 3]| {
        let r = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        (r[0] * v[0] + r[1] * v[1] + r[2] * v[2]).atan2(r[0] * u[0] + r[1] * u[1] + r[2] * u[2])
    };
    pts.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
    let close = |a: &[f64; 3], b: &[f64; 3]| (0..3).all(|d| (a[d] - b[d]).abs() <= tol);
    pts.dedup_by(|a, b| close(a, b));
    while pts.len() > 1 && close(&pts[0], &pts[pts.len() - 1]) {
        pts.pop();
    }
    (pts.len() >= 3).then_some(pts)
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}
