//! Distance fields for the planner.
//!
//! Two routes produce a planar signed distance raster: an exact Euclidean
//! transform of LiDAR occupancy, and the semantic route that turns the
//! splat field's cost volume into distances, keeps the most restrictive value
//! over the robot's height band and softly inflates obstacle boundaries.
//! [`fuse`] selects the semantic raster inside a region ahead of the robot
//! and the LiDAR raster everywhere else.

mod edt;
mod pfm;

pub use edt::{edt_signed, edt_squared};
pub use pfm::{read_pfm, write_esdf, write_pfm, PfmImage};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid2Spec, Grid3Spec, Pose3, Vec2, Vec3};
use crate::splat::{FieldIndex, SplatField};

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid2D {
    pub spec: Grid2Spec,
    pub occupied: Vec<bool>,
}

impl OccupancyGrid2D {
    pub fn empty(spec: Grid2Spec) -> Self {
        Self { occupied: vec![false; spec.len()], spec }
    }

    pub fn set(&mut self, i: usize, j: usize, occ: bool) {
        let k = self.spec.index(i, j);
        self.occupied[k] = occ;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsdfGrid2D {
    pub spec: Grid2Spec,
    pub d: Vec<f64>,
}

impl EsdfGrid2D {
    pub fn filled(spec: Grid2Spec, value: f64) -> Self {
        Self { d: vec![value; spec.len()], spec }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.spec.index(i, j)]
    }

    /// Bilinear interpolation between cell centers. Points whose cell lies
    /// outside the grid read `outside`.
    pub fn sample(&self, p: &Vec2, outside: f64) -> f64 {
        let s = &self.spec;
        if s.cell_in_bounds(p).is_none() {
            return outside;
        }
        let fx = ((p.x - s.origin[0]) / s.resolution).clamp(0.0, (s.nx - 1) as f64);
        let fy = ((p.y - s.origin[1]) / s.resolution).clamp(0.0, (s.ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(s.nx.saturating_sub(2));
        let j0 = (fy.floor() as usize).min(s.ny.saturating_sub(2));
        let i1 = (i0 + 1).min(s.nx - 1);
        let j1 = (j0 + 1).min(s.ny - 1);
        let tx = (fx - i0 as f64).clamp(0.0, 1.0);
        let ty = (fy - j0 as f64).clamp(0.0, 1.0);
        let a = self.get(i0, j0) * (1.0 - tx) + self.get(i1, j0) * tx;
        let b = self.get(i0, j1) * (1.0 - tx) + self.get(i1, j1) * tx;
        a * (1.0 - ty) + b * ty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsdfConfig {
    /// Distance assigned to zero cost, meters.
    pub d_max: f64,
    /// Clamp for the LiDAR transform, meters.
    pub lidar_truncation: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for EsdfConfig {
    fn default() -> Self {
        Self { d_max: 100.0, lidar_truncation: 5.0, z_min: 0.1, z_max: 0.8 }
    }
}

impl EsdfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_max > 0.0 && self.lidar_truncation > 0.0 && self.z_min < self.z_max) {
            return Err(Error::Config(format!("invalid ESDF config {self:?}")));
        }
        Ok(())
    }
}

/// Rectangle ahead of the robot: `x ∈ [0, depth]`, `|y| ≤ width/2` in the
/// robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontRegion {
    pub depth: f64,
    pub width: f64,
}

impl Default for FrontRegion {
    fn default() -> Self {
        Self { depth: 2.0, width: 4.0 }
    }
}

impl FrontRegion {
    pub fn contains(&self, robot_pose: &Pose3, world_xy: &Vec2) -> bool {
        let t = robot_pose.translation();
        let local = robot_pose.inverse().apply(&Vec3::new(world_xy.x, world_xy.y, t.z));
        local.x >= 0.0 && local.x <= self.depth && local.y.abs() <= 0.5 * self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostVolumeMode {
    /// Field evaluated at every voxel center.
    Analytic,
    /// `ceil(fraction·32)` samples per primitive, max-accumulated.
    SampledPoints { fraction: f64 },
    /// One deposit per primitive at its mean.
    MeansOnly,
}

pub const POINTS_PER_GAUSSIAN: usize = 32;
const VOLUME_SEED: u64 = 0x5eed_c057;

#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    pub spec: Grid3Spec,
    pub values: Vec<f64>,
}

pub fn build_cost_volume(field: &SplatField, spec: &Grid3Spec, mode: CostVolumeMode) -> Result<CostVolume> {
    spec.validate()?;
    let mut values = vec![0.0; spec.len()];
    match mode {
        CostVolumeMode::Analytic => {
            let index = FieldIndex::new(field);
            for k in 0..spec.nz {
                for j in 0..spec.ny {
                    for i in 0..spec.nx {
                        values[spec.index(i, j, k)] = index.query(&spec.center_of(i, j, k));
                    }
                }
            }
        }
        CostVolumeMode::MeansOnly => {
            for g in &field.primitives {
                if let Some((i, j, k)) = spec.cell_in_bounds(&g.mu) {
                    let v = &mut values[spec.index(i, j, k)];
                    *v = v.max(g.opacity() * g.cost);
                }
            }
        }
        CostVolumeMode::SampledPoints { fraction } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::Config(format!("sample fraction {fraction} outside (0, 1]")));
            }
            let n = (fraction * POINTS_PER_GAUSSIAN as f64).ceil() as usize;
            let lo = Vec3::from(spec.origin) - Vec3::repeat(0.5 * spec.resolution);
            let hi = lo + Vec3::new(spec.nx as f64, spec.ny as f64, spec.nz as f64) * spec.resolution;
            for (idx, g) in field.primitives.iter().enumerate() {
                let value = g.opacity() * g.cost;
                if value <= 0.0 {
                    continue;
                }
                let reach = 6.0 * g.max_scale();
                if (0..3).any(|a| g.mu[a] + reach < lo[a] || g.mu[a] - reach > hi[a]) {
                    continue;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(VOLUME_SEED ^ (idx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                let r = g.rot.to_rotation_matrix();
                for _ in 0..n {
                    let z = Vec3::new(
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                    );
                    let x = g.mu + r * g.scale.component_mul(&z);
                    if let Some((i, j, k)) = spec.cell_in_bounds(&x) {
                        let v = &mut values[spec.index(i, j, k)];
                        *v = v.max(value);
                    }
                }
            }
        }
    }
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(CostVolume { spec: *spec, values })
}

/// `(1 − c)·d_max` per voxel.
pub fn volume_to_distance(costs: &[f64], d_max: f64) -> Vec<f64> {
    costs.iter().map(|c| (1.0 - c) * d_max).collect()
}

/// Minimum over the voxel layers whose centers lie in `[z_min, z_max]`.
pub fn rasterize_to_ground(distances: &[f64], spec: &Grid3Spec, band: (f64, f64), d_max: f64) -> Result<EsdfGrid2D> {
    if distances.len() != spec.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} voxel values for a {}-voxel grid",
            distances.len(),
            spec.len()
        )));
    }
    let layers: Vec<usize> = (0..spec.nz)
        .filter(|&k| {
            let z = spec.origin[2] + k as f64 * spec.resolution;
            z >= band.0 && z <= band.1
        })
        .collect();
    if layers.is_empty() {
        return Err(Error::EmptyBand { z_min: band.0, z_max: band.1 });
    }
    let plane = spec.plane();
    let mut out = EsdfGrid2D::filled(plane, d_max);
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let m = layers
                .iter()
                .map(|&k| distances[spec.index(i, j, k)])
                .fold(f64::INFINITY, f64::min);
            out.d[plane.index(i, j)] = m;
        }
    }
    Ok(out)
}

/// `d − r·exp(−d²/2σ²)`: pulls values near obstacle boundaries down.
pub fn inflate_soft(esdf: &EsdfGrid2D, r_infl: f64, sigma: f64) -> Result<EsdfGrid2D> {
    if !(r_infl >= 0.0 && sigma > 0.0) {
        return Err(Error::Config(format!("inflation needs r ≥ 0 and σ > 0 (got {r_infl}, {sigma})")));
    }
    let k = 1.0 / (2.0 * sigma * sigma);
    Ok(EsdfGrid2D {
        spec: esdf.spec,
        d: esdf.d.iter().map(|&d| d - r_infl * (-d * d * k).exp()).collect(),
    })
}

/// Per-cell selection: semantic value inside the front region, LiDAR value
/// elsewhere.
pub fn fuse(gsplat: &EsdfGrid2D, lidar: &EsdfGrid2D, robot_pose: &Pose3, region: &FrontRegion) -> Result<EsdfGrid2D> {
    if gsplat.spec != lidar.spec {
        return Err(Error::SpecMismatch(format!("{:?} vs {:?}", gsplat.spec, lidar.spec)));
    }
    let spec = gsplat.spec;
    let mut out = lidar.clone();
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            if region.contains(robot_pose, &spec.center_of(i, j)) {
                let k = spec.index(i, j);
                out.d[k] = gsplat.d[k];
            }
        }
    }
    Ok(out)
}

/// Occupancy from returns inside the height band, then the exact transform
/// clamped at the LiDAR truncation distance.
pub fn lidar_esdf(points_world: &[Vec3], spec: &Grid2Spec, cfg: &EsdfConfig) -> EsdfGrid2D {
    let mut occ = OccupancyGrid2D::empty(*spec);
    for p in points_world {
        if p.z < cfg.z_min || p.z > cfg.z_max {
            continue;
        }
        if let Some((i, j)) = spec.cell_in_bounds(&p.xy()) {
            occ.set(i, j, true);
        }
    }
    edt_signed(&occ, cfg.lidar_truncation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splat::GaussianPrimitive;
    use proptest::prelude::*;

    fn spec2(n: usize) -> Grid2Spec {
        Grid2Spec::new(1.0, Vec2::zeros(), n, n).unwrap()
    }

    #[test]
    fn distance_scaling_examples() {
        assert_eq!(volume_to_distance(&[1.0, 0.0, 0.5], 100.0), vec![0.0, 100.0, 50.0]);
    }

    proptest! {
        #[test]
        fn distance_scaling_inverts(c in 0.0f64..=1.0, d_max in 0.1f64..500.0) {
            let d = volume_to_distance(&[c], d_max)[0];
            prop_assert!((c - (1.0 - d / d_max)).abs() < 1e-12);
        }

        #[test]
        fn inflation_is_monotone(a in -5.0f64..20.0, b in -5.0f64..20.0, r in 0.0f64..1.0, s in 0.05f64..2.0) {
            let spec = Grid2Spec::new(1.0, Vec2::zeros(), 2, 1).unwrap();
            let g = EsdfGrid2D { spec, d: vec![a.min(b), a.max(b)] };
            let out = inflate_soft(&g, r, s).unwrap();
            prop_assert!(out.d[0] <= out.d[1]);
            prop_assert!(out.d[0] <= a.min(b) && out.d[1] <= a.max(b));
        }
    }

    #[test]
    fn inflation_examples() {
        let spec = Grid2Spec::new(1.0, Vec2::zeros(), 3, 1).unwrap();
        let g = EsdfGrid2D { spec, d: vec![0.0, 1.0, 5.0] };
        assert_eq!(inflate_soft(&g, 0.0, 0.5).unwrap(), g);
        assert!((inflate_soft(&g, 0.3, 0.5).unwrap().d[0] + 0.3).abs() < 1e-15);
        // 10σ: exp(-50) ≈ 1.9e-22
        let sigma = 0.4;
        let far = EsdfGrid2D { spec, d: vec![10.0 * sigma; 3] };
        let out = inflate_soft(&far, 1.0, sigma).unwrap();
        assert!((far.d[0] - out.d[0]).abs() < 1e-20);
        assert!(inflate_soft(&g, -1.0, 0.5).is_err());
        assert!(inflate_soft(&g, 1.0, 0.0).is_err());
    }

    #[test]
    fn rasterize_examples() {
        let spec = Grid3Spec::new(1.0, Vec3::new(0.0, 0.0, 0.0), 2, 2, 3).unwrap();
        let uniform = vec![7.0; spec.len()];
        let g = rasterize_to_ground(&uniform, &spec, (0.0, 2.0), 100.0).unwrap();
        assert!(g.d.iter().all(|&v| v == 7.0));

        let mut col = vec![20.0; spec.len()];
        for (k, v) in [10.0, 3.0, 8.0].into_iter().enumerate() {
            col[spec.index(1, 0, k)] = v;
        }
        let g = rasterize_to_ground(&col, &spec, (0.0, 2.0), 100.0).unwrap();
        assert_eq!(g.get(1, 0), 3.0);
        // band covering only the top layer
        assert_eq!(rasterize_to_ground(&col, &spec, (1.5, 2.5), 100.0).unwrap().get(1, 0), 8.0);

        assert!(matches!(
            rasterize_to_ground(&uniform, &spec, (5.0, 6.0), 100.0),
            Err(Error::EmptyBand { .. })
        ));
    }

    #[test]
    fn fuse_examples() {
        let spec = Grid2Spec::new(0.5, Vec2::new(-4.0, -4.0), 17, 17).unwrap();
        let g = EsdfGrid2D::filled(spec, 1.0);
        let l = EsdfGrid2D::filled(spec, 2.0);
        let pose = Pose3::identity();
        let thin = FrontRegion { depth: 1e-9, width: 1e-9 };
        // the robot cell center sits at the origin: shift so no center is covered
        let shifted = Pose3::from_translation(Vec3::new(0.1, 0.1, 0.0));
        assert_eq!(fuse(&g, &l, &shifted, &thin).unwrap(), l);
        let total = FrontRegion { depth: 100.0, width: 100.0 };
        let back = Pose3::from_translation(Vec3::new(-10.0, 0.0, 0.0));
        assert_eq!(fuse(&g, &l, &back, &total).unwrap(), g);

        let region = FrontRegion { depth: 2.0, width: 4.0 };
        let out = fuse(&g, &l, &pose, &region).unwrap();
        let (i, j) = spec.cell_in_bounds(&Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(out.get(i, j), 1.0);
        let (i, j) = spec.cell_in_bounds(&Vec2::new(-1.0, 0.0)).unwrap();
        assert_eq!(out.get(i, j), 2.0);

        let other = EsdfGrid2D::filled(spec2(3), 0.0);
        assert!(matches!(fuse(&g, &other, &pose, &region), Err(Error::SpecMismatch(_))));
        // idempotent
        assert_eq!(fuse(&out, &l, &pose, &region).unwrap(), out);
    }

    #[test]
    fn lidar_esdf_examples() {
        let spec = spec2(8);
        let cfg = EsdfConfig::default();
        let empty = lidar_esdf(&[], &spec, &cfg);
        assert!(empty.d.iter().all(|&v| v == cfg.lidar_truncation));

        let single = lidar_esdf(&[Vec3::new(0.0, 0.0, 0.5)], &spec, &cfg);
        assert!((single.get(3, 4) - 5.0).abs() < 1e-12);
        assert!((single.get(0, 0) + 1.0).abs() < 1e-12);

        let ground = lidar_esdf(&[Vec3::new(0.0, 0.0, 0.05)], &spec, &cfg);
        assert!(ground.d.iter().all(|&v| v == cfg.lidar_truncation));
    }

    fn saturating(mu: Vec3, s: f64) -> GaussianPrimitive {
        let mut g = GaussianPrimitive::isotropic(mu, s, 0.5, 1.0, 0);
        g.opacity_logit = 40.0;
        g
    }

    #[test]
    fn cost_volume_examples() {
        let spec = Grid3Spec::new(0.25, Vec3::new(-2.0, -2.0, 0.0), 16, 16, 16).unwrap();
        let empty = SplatField::new(10);
        for mode in [CostVolumeMode::Analytic, CostVolumeMode::MeansOnly, CostVolumeMode::SampledPoints { fraction: 0.5 }] {
            assert!(build_cost_volume(&empty, &spec, mode).unwrap().values.iter().all(|&v| v == 0.0));
        }
        let mut f = SplatField::new(10);
        f.primitives.push(saturating(Vec3::new(0.1, 0.2, 1.0), 0.2));
        let v = build_cost_volume(&f, &spec, CostVolumeMode::MeansOnly).unwrap();
        let nonzero: Vec<usize> = (0..v.values.len()).filter(|&k| v.values[k] > 0.0).collect();
        let (i, j, k) = spec.cell_in_bounds(&Vec3::new(0.1, 0.2, 1.0)).unwrap();
        assert_eq!(nonzero, vec![spec.index(i, j, k)]);
        assert!(build_cost_volume(&f, &spec, CostVolumeMode::SampledPoints { fraction: 0.0 }).is_err());

        // deterministic
        let a = build_cost_volume(&f, &spec, CostVolumeMode::SampledPoints { fraction: 1.0 }).unwrap();
        let b = build_cost_volume(&f, &spec, CostVolumeMode::SampledPoints { fraction: 1.0 }).unwrap();
        assert_eq!(a, b);
    }
}
