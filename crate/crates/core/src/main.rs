use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use splatnav::error::{Error, Result};
use splatnav::esdf::{write_esdf, write_pfm, CostVolumeMode, PfmImage};
use splatnav::geometry::{Pose3, Vec3};
use splatnav::harness::{
    compute_metrics, run_ablation_density, run_ablation_depth, run_matrix, write_density_csv, write_depth_csv,
    write_results_csv, Method, RunRecord,
};
use splatnav::planner::{navigate, observe, Mapper, NavConfig, Pipeline};
use splatnav::splat::{read_field, render_cost_map, write_field};
use splatnav::worldsim::{builtin_scene, camera_pose, load_scene, Pose2, Scene};

#[derive(Parser)]
#[command(name = "splatnav", version, about = "Semantic splat mapping and MPPI navigation in a simulated world")]
struct Cli {
    /// Navigation config (TOML with [mapping], [mppi], [limits], [nav] sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop episode and write its trajectory.
    Simulate {
        /// Scene file, or builtin:<name>.
        scene: String,
        #[arg(long, default_value = "splatblox_all_points")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one mapping tick at a pose and dump the field and distance maps.
    Map {
        scene: String,
        /// x,y,heading
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every method over seeds 0..n and write results.csv.
    Eval {
        #[arg(required = true)]
        scenes: Vec<String>,
        /// `all` or a comma-separated list of methods.
        #[arg(long, default_value = "all")]
        methods: String,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Success rate as a function of sampling density or front-region depth.
    Ablate {
        #[arg(value_enum)]
        axis: Axis,
        scene: String,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Comma-separated values; defaults to 0.25,0.5,1.0 or 1,2,3.
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the cost image of a field dump.
    Render {
        field: PathBuf,
        /// x,y,heading of the robot, or tx,ty,tz,qw,qx,qy,qz of the camera.
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Density,
    Depth,
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad {what} value {t:?}"))))
        .collect()
}

fn parse_pose2(s: &str) -> Result<Pose2> {
    match parse_list(s, "pose")?[..] {
        [x, y, h] => Ok(Pose2::new(x, y, h)),
        _ => Err(Error::Config(format!("pose must be x,y,heading (got {s:?})"))),
    }
}

fn load_scene_arg(s: &str) -> Result<Scene> {
    match s.strip_prefix("builtin:") {
        Some(name) => builtin_scene(name),
        None => load_scene(Path::new(s)),
    }
}

fn load_config(path: Option<&Path>) -> Result<NavConfig> {
    match path {
        Some(p) => NavConfig::from_toml(&fs::read_to_string(p)?),
        None => Ok(NavConfig::default()),
    }
}

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s == "all" {
        return Ok(Method::ALL.to_vec());
    }
    s.split(',').map(|m| m.trim().parse()).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn simulate(scene: &Scene, method: Method, seed: u64, cfg: &NavConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let res = navigate(scene, &scene.start, &scene.goal, cfg, method.pipeline(), seed)?;
    let mut w = create(&out.join("trajectory.csv"))?;
    writeln!(w, "t,x,y,heading,v,omega")?;
    for s in &res.trajectory {
        writeln!(w, "{},{},{},{},{},{}", s.t, s.pose.x, s.pose.y, s.pose.heading, s.v, s.omega)?;
    }
    w.flush()?;
    let record = RunRecord::from_result(scene, method, seed, &res);
    write_results_csv(std::slice::from_ref(&record), create(&out.join("result.csv"))?)?;
    println!("{} {} seed {}: {} after {:.1} s, path {:.2} m", scene.name, method, seed, res.outcome, res.duration(), res.path_length());
    Ok(())
}

fn map(scene: &Scene, pose: &Pose2, cfg: &NavConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let pipeline = Pipeline::Semantic(CostVolumeMode::SampledPoints { fraction: 1.0 });
    let mut mapper = Mapper::new(cfg.mapping.clone(), pipeline)?;
    let products = mapper.integrate(&observe(scene, pose, &cfg.mapping, 0))?;
    write_field(&mapper.field, create(&out.join("field.splat"))?)?;
    let d_max = cfg.mapping.esdf.d_max;
    write_esdf(&products.lidar, &out.join("lidar.pfm"), cfg.mapping.esdf.lidar_truncation)?;
    if let Some(g) = &products.gsplat {
        write_esdf(g, &out.join("gsplat.pfm"), d_max)?;
    }
    write_esdf(&products.fused, &out.join("fused.pfm"), d_max)?;
    println!("{} primitives, {}x{} grid", mapper.field.len(), products.fused.spec.nx, products.fused.spec.ny);
    Ok(())
}

fn render(field_path: &Path, pose: &str, cfg: &NavConfig, out: &Path) -> Result<()> {
    let field = read_field(BufReader::new(File::open(field_path)?))?;
    let values = parse_list(pose, "pose")?;
    let cam_to_world = match values[..] {
        [x, y, h] => camera_pose(&Pose2::new(x, y, h), cfg.mapping.mounts.camera_height, cfg.mapping.mounts.camera_pitch_deg),
        [tx, ty, tz, qw, qx, qy, qz] => Pose3::from_wxyz([qw, qx, qy, qz], Vec3::new(tx, ty, tz))?,
        _ => return Err(Error::Config(format!("pose needs 3 or 7 values (got {})", values.len()))),
    };
    let cam = &cfg.mapping.camera;
    let img = render_cost_map(&field, &cam_to_world.inverse(), cam, cfg.mapping.costs.unknown);
    // PFM rows run bottom to top
    let mut data = Vec::with_capacity(img.values.len());
    for v in (0..img.height).rev() {
        data.extend(img.values[v * img.width..(v + 1) * img.width].iter().map(|&c| c as f32));
    }
    let mut w = create(out)?;
    write_pfm(&PfmImage { width: img.width, height: img.height, data }, &mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate { scene, method, seed, out } => simulate(&load_scene_arg(&scene)?, method.parse()?, seed, &cfg, &out),
        Command::Map { scene, pose, out } => map(&load_scene_arg(&scene)?, &parse_pose2(&pose)?, &cfg, &out),
        Command::Eval { scenes, methods, seeds, out } => {
            let scenes = scenes.iter().map(|s| load_scene_arg(s)).collect::<Result<Vec<_>>>()?;
            let methods = parse_methods(&methods)?;
            let seeds: Vec<u64> = (0..seeds).collect();
            let records = run_matrix(&scenes, &methods, &seeds, &cfg)?;
            let mut w = create(&out)?;
            write_results_csv(&records, &mut w)?;
            w.flush()?;
            for scene in &scenes {
                for &m in &methods {
                    let rs: Vec<RunRecord> =
                        records.iter().filter(|r| r.scenario_id == scene.name && r.method == m).cloned().collect();
                    let s = compute_metrics(&rs)?;
                    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
                    println!(
                        "{:<18} {:<22} SR {:5.1}%  FR {:5.1}%  NTL {}  TRG {}",
                        scene.name,
                        m,
                        s.sr,
                        s.fr,
                        fmt(s.ntl),
                        fmt(s.trg)
                    );
                }
            }
            Ok(())
        }
        Command::Ablate { axis, scene, seeds, values, out } => {
            let scene = load_scene_arg(&scene)?;
            let seeds: Vec<u64> = (0..seeds).collect();
            let mut w = create(&out)?;
            match axis {
                Axis::Density => {
                    let fractions = values.map_or(Ok(vec![0.25, 0.5, 1.0]), |v| parse_list(&v, "fraction"))?;
                    let rows = run_ablation_density(&scene, &fractions, &seeds, &cfg)?;
                    write_density_csv(&rows, &mut w)?;
                    for r in &rows {
                        println!("{:<15} {:>5} SR {:5.1}%", r.mode, r.fraction.map_or("-".into(), |f| f.to_string()), r.sr_pct);
                    }
                }
                Axis::Depth => {
                    let depths = values.map_or(Ok(vec![1.0, 2.0, 3.0]), |v| parse_list(&v, "depth"))?;
                    let rows = run_ablation_depth(&scene, &depths, &seeds, &cfg)?;
                    write_depth_csv(&rows, &mut w)?;
                    for r in &rows {
                        println!("depth {:>4} m  SR {:5.1}%", r.depth_m, r.sr_pct);
                    }
                }
            }
            w.flush()?;
            Ok(())
        }
        Command::Render { field, pose, out } => render(&field, &pose, &cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
