use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{csv_error, with_pool};
use crate::error::{Error, Result};
use crate::esdf::CostVolumeMode;
use crate::planner::{navigate, NavConfig, Outcome, Pipeline};
use crate::worldsim::Scene;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRow {
    pub scenario_id: String,
    /// `means_only` or `sampled_points`.
    pub mode: &'static str,
    /// Empty for the means-only anchor row.
    pub fraction: Option<f64>,
    pub runs: usize,
    pub reached: usize,
    pub sr_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthRow {
    pub scenario_id: String,
    pub depth_m: f64,
    pub width_m: f64,
    pub runs: usize,
    pub reached: usize,
    pub sr_pct: f64,
}

fn count_reached(scene: &Scene, variants: &[(NavConfig, Pipeline)], seeds: &[u64]) -> Result<Vec<usize>> {
    let jobs: Vec<(usize, u64)> = (0..variants.len()).flat_map(|v| seeds.iter().map(move |&s| (v, s))).collect();
    let outcomes = with_pool(|| {
        jobs.par_iter()
            .map(|&(v, seed)| {
                let (cfg, pipeline) = &variants[v];
                navigate(scene, &scene.start, &scene.goal, cfg, *pipeline, seed).map(|r| (v, r.outcome))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut reached = vec![0; variants.len()];
    for (v, o) in outcomes {
        if o == Outcome::Reached {
            reached[v] += 1;
        }
    }
    Ok(reached)
}

fn pct(reached: usize, runs: usize) -> f64 {
    if runs == 0 {
        0.0
    } else {
        100.0 * reached as f64 / runs as f64
    }
}

/// Success rate per sampling density, with a means-only anchor row first.
pub fn run_ablation_density(scene: &Scene, fractions: &[f64], seeds: &[u64], cfg: &NavConfig) -> Result<Vec<DensityRow>> {
    cfg.validate()?;
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::Config(format!("density fraction {f} outside (0, 1]")));
    }
    let mut variants = vec![(cfg.clone(), Pipeline::Semantic(CostVolumeMode::MeansOnly))];
    for &fraction in fractions {
        variants.push((cfg.clone(), Pipeline::Semantic(CostVolumeMode::SampledPoints { fraction })));
    }
    let reached = count_reached(scene, &variants, seeds)?;
    let runs = seeds.len();
    let mut rows = vec![DensityRow {
        scenario_id: scene.name.clone(),
        mode: "means_only",
        fraction: None,
        runs,
        reached: reached[0],
        sr_pct: pct(reached[0], runs),
    }];
    for (k, &fraction) in fractions.iter().enumerate() {
        rows.push(DensityRow {
            scenario_id: scene.name.clone(),
            mode: "sampled_points",
            fraction: Some(fraction),
            runs,
            reached: reached[k + 1],
            sr_pct: pct(reached[k + 1], runs),
        });
    }
    Ok(rows)
}

/// Success rate per front-region depth at fixed width, full-density pipeline.
pub fn run_ablation_depth(scene: &Scene, depths: &[f64], seeds: &[u64], cfg: &NavConfig) -> Result<Vec<DepthRow>> {
    cfg.validate()?;
    if let Some(d) = depths.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::Config(format!("front-region depth {d} must be positive")));
    }
    let pipeline = Pipeline::Semantic(CostVolumeMode::SampledPoints { fraction: 1.0 });
    let variants: Vec<(NavConfig, Pipeline)> = depths
        .iter()
        .map(|&depth| {
            let mut c = cfg.clone();
            c.mapping.region.depth = depth;
            (c, pipeline)
        })
        .collect();
    let reached = count_reached(scene, &variants, seeds)?;
    let runs = seeds.len();
    Ok(depths
        .iter()
        .zip(reached)
        .map(|(&depth_m, reached)| DepthRow {
            scenario_id: scene.name.clone(),
            depth_m,
            width_m: cfg.mapping.region.width,
            runs,
            reached,
            sr_pct: pct(reached, runs),
        })
        .collect())
}

fn write_rows<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_density_csv<W: Write>(rows: &[DensityRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn write_depth_csv<W: Write>(rows: &[DepthRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::builtin_scene;

    #[test]
    fn rejects_bad_axes() {
        let scene = builtin_scene("open_field").unwrap();
        let cfg = NavConfig::default();
        assert!(run_ablation_density(&scene, &[0.0], &[0], &cfg).is_err());
        assert!(run_ablation_density(&scene, &[1.5], &[0], &cfg).is_err());
        assert!(run_ablation_depth(&scene, &[-1.0], &[0], &cfg).is_err());
    }

    #[test]
    fn csv_rows() {
        let rows = vec![
            DensityRow { scenario_id: "a".into(), mode: "means_only", fraction: None, runs: 4, reached: 1, sr_pct: 25.0 },
            DensityRow { scenario_id: "a".into(), mode: "sampled_points", fraction: Some(0.5), runs: 4, reached: 4, sr_pct: 100.0 },
        ];
        let mut buf = Vec::new();
        write_density_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "scenario_id,mode,fraction,runs,reached,sr_pct\na,means_only,,4,1,25.0\na,sampled_points,0.5,4,4,100.0\n"
        );
        let depth = vec![DepthRow { scenario_id: "b".into(), depth_m: 2.0, width_m: 4.0, runs: 2, reached: 1, sr_pct: 50.0 }];
        let mut buf = Vec::new();
        write_depth_csv(&depth, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "scenario_id,depth_m,width_m,runs,reached,sr_pct\nb,2.0,4.0,2,1,50.0\n");
    }
}
