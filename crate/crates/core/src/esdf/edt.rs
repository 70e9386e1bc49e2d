//! Exact Euclidean distance transform: two passes of the 1D lower envelope of
//! parabolas over squared distances.

use super::{EsdfGrid2D, OccupancyGrid2D};
use crate::geometry::Grid2Spec;

/// Stands in for "no site"; large enough to never win, finite so the
/// envelope arithmetic stays well defined.
const FAR: f64 = 1e30;

fn envelope_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    v.push(0);
    z.push(f64::NEG_INFINITY);
    z.push(f64::INFINITY);
    for q in 1..n {
        let qf = q as f64;
        loop {
            let p = *v.last().expect("envelope never empties");
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
            if s <= z[v.len() - 1] {
                v.pop();
                z.pop();
                if v.is_empty() {
                    v.push(q);
                    z.push(f64::INFINITY);
                    z[0] = f64::NEG_INFINITY;
                    break;
                }
            } else {
                v.push(q);
                *z.last_mut().expect("boundary present") = s;
                z.push(f64::INFINITY);
                break;
            }
        }
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *o = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// Squared distance in cells from every cell to the nearest `site` cell;
/// [`f64::INFINITY`] when there are no sites.
pub fn edt_squared(spec: &Grid2Spec, site: &[bool]) -> Vec<f64> {
    let (nx, ny) = (spec.nx, spec.ny);
    let mut d: Vec<f64> = site.iter().map(|&s| if s { 0.0 } else { FAR }).collect();
    let mut v = Vec::new();
    let mut z = Vec::new();
    // columns (along y)
    let mut col = vec![0.0; ny];
    let mut res = vec![0.0; ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = d[j * nx + i];
        }
        envelope_1d(&col, &mut res, &mut v, &mut z);
        for j in 0..ny {
            d[j * nx + i] = res[j];
        }
    }
    // rows (along x)
    let mut res = vec![0.0; nx];
    for j in 0..ny {
        let row = &d[j * nx..(j + 1) * nx];
        envelope_1d(row, &mut res, &mut v, &mut z);
        d[j * nx..(j + 1) * nx].copy_from_slice(&res);
    }
    for x in &mut d {
        if *x >= FAR * 0.5 {
            *x = f64::INFINITY;
        }
    }
    d
}

/// Free cells: distance to the nearest occupied center. Occupied cells:
/// minus the distance to the nearest free center. Clamped to `±d_max`.
pub fn edt_signed(occ: &OccupancyGrid2D, d_max: f64) -> EsdfGrid2D {
    let res = occ.spec.resolution;
    let to_obstacle = edt_squared(&occ.spec, &occ.occupied);
    let free: Vec<bool> = occ.occupied.iter().map(|o| !o).collect();
    let to_free = edt_squared(&occ.spec, &free);
    let d = occ
        .occupied
        .iter()
        .enumerate()
        .map(|(k, &o)| {
            if o {
                -(to_free[k].sqrt() * res).min(d_max)
            } else {
                (to_obstacle[k].sqrt() * res).min(d_max)
            }
        })
        .collect();
    EsdfGrid2D { spec: occ.spec, d }
}
