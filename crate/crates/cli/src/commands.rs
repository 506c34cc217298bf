//! One function per subcommand. Every output is written in full only after
//! the work succeeded, and is byte-stable for identical inputs and flags.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::Serialize;

use octofield::geometry::{
    bbox_diagonal, evaluate_metrics, extract_surface, read_mesh, sample_mesh, write_glyphs_ply,
    write_obj, write_ply, ChamferKind, Glyph, GridSpec, MeshOrCloud, PointCloud, TriangleMesh,
};
use octofield::losses::{manifold_table, LossReport, Similarity};
use octofield::nets::Checkpoint;
use octofield::oracle::fibonacci_sphere;
use octofield::selftest;
use octofield::sh::{recover_axes, variety_residual, Mat9, OctaCoeffs, RX_HALF_PI};
use octofield::training::{Noise, Preset, Schedule, TrainConfig, TrainError, Trainer};

use crate::error::{require_file, CliError};
use crate::{
    EvalArgs, ExtractArgs, FitArgs, FixtureArg, FramesArgs, LossArg, ManifoldArgs, NoiseArg,
    PresetArg, SelftestArgs, VERSION,
};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOSS_FILE: &str = "loss.csv";
pub const METADATA_FILE: &str = "run.toml";

/// Written next to the checkpoint so a run can be reproduced.
#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    version: &'a str,
    input: String,
    seed: u64,
    /// Command-line settings applied on top of the configuration, in order.
    overrides: Vec<String>,
    iterations_completed: usize,
    skipped_tensor_updates: u64,
    config: &'a TrainConfig,
    schedule: Schedule,
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let context = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(File::create(path).map_err(context)?);
    f(&mut out).map_err(context)?;
    out.flush().map_err(context)
}

fn read_input(path: &Path) -> Result<MeshOrCloud, CliError> {
    require_file(path, "input")?;
    read_mesh(path).map_err(CliError::runtime)
}

/// Configuration from file or preset, then command-line overrides; an
/// explicit weight beats the noise regime's default for that weight.
fn resolve_config(args: &FitArgs) -> Result<(TrainConfig, Vec<String>), CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            require_file(path, "config")?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            TrainConfig::from_toml(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => TrainConfig::preset(match args.preset {
            Some(PresetArg::Paper) => Preset::Paper,
            _ => Preset::Desk,
        }),
    };
    let mut overrides = Vec::new();
    if let Some(s) = args.seed {
        cfg.seed = s;
        overrides.push(format!("seed={s}"));
    }
    if let Some(n) = args.iterations {
        cfg.iterations = n;
        overrides.push(format!("iterations={n}"));
    }
    if let Some(n) = args.noise {
        cfg.noise = match n {
            NoiseArg::Low => Noise::Low,
            NoiseArg::High => Noise::High,
        };
        overrides.push(format!(
            "noise={}",
            if n == NoiseArg::Low { "low" } else { "high" }
        ));
    }
    let l = &mut cfg.lambdas;
    for (name, flag, slot) in [
        ("positional", args.lambda_positional, &mut l.positional),
        ("nsh", args.lambda_nsh, &mut l.nsh),
        (
            "nsh_annealed",
            args.lambda_nsh_annealed,
            &mut l.nsh_annealed,
        ),
        ("eikonal", args.lambda_eikonal, &mut l.eikonal),
        ("off", args.lambda_off, &mut l.off),
        ("align", args.lambda_align, &mut l.align),
        ("regularize", args.lambda_regularize, &mut l.regularize),
        ("lip", args.lambda_lip, &mut l.lip),
    ] {
        if let Some(v) = flag {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!(
                    "--lambda-{name} must be a non-negative number"
                )));
            }
            *slot = Some(v);
            overrides.push(format!("lambdas.{name}={v}"));
        }
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((cfg, overrides))
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let (cfg, overrides) = resolve_config(&args)?;
    let (points, input) = match (&args.input, args.fixture) {
        (_, Some(FixtureArg::Sphere)) => (fibonacci_sphere(5000), "fixture:sphere".to_string()),
        (Some(path), None) => (
            read_input(path)?.points().to_vec(),
            path.display().to_string(),
        ),
        (None, None) => return Err(CliError::Usage("no input given".into())),
    };
    let cloud = PointCloud::normalize(&points).map_err(CliError::runtime)?;
    std::fs::create_dir_all(&args.output)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", args.output.display())))?;

    let mut trainer = Trainer::new(&cloud, &cfg).map_err(CliError::runtime)?;
    let report_every = (cfg.iterations / 10).max(1);
    let outcome = trainer.run(|t| {
        if t.iteration() % report_every == 0 {
            let r = t.log.last().expect("one step taken");
            eprintln!(
                "iteration {}/{} loss {:.6e}",
                t.iteration(),
                cfg.iterations,
                r.total
            );
        }
    });
    let out = |name: &str| args.output.join(name);
    if let Err(TrainError::Diverged { checkpoint, .. }) = &outcome {
        let path = out(CHECKPOINT_FILE);
        checkpoint.save(&path).map_err(CliError::runtime)?;
        eprintln!("last finite state saved to {}", path.display());
    }
    outcome.map_err(CliError::runtime)?;

    let stats = trainer.optimizer_stats();
    let schedule = *trainer.schedule();
    let result = trainer.finish();
    result
        .checkpoint
        .save(&out(CHECKPOINT_FILE))
        .map_err(CliError::runtime)?;
    write_file(&out(LOSS_FILE), |w| {
        writeln!(w, "{}", LossReport::csv_header())?;
        result
            .log
            .iter()
            .try_for_each(|r| writeln!(w, "{}", r.csv_row()))
    })?;
    let meta = RunMetadata {
        version: VERSION,
        input,
        seed: cfg.seed,
        overrides,
        iterations_completed: result.log.len(),
        skipped_tensor_updates: stats.skipped_tensors,
        config: &cfg,
        schedule,
    };
    let text = toml::to_string(&meta).map_err(CliError::runtime)?;
    write_file(&out(METADATA_FILE), |w| w.write_all(text.as_bytes()))?;
    eprintln!("wrote {}", args.output.display());
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    require_file(path, "checkpoint")?;
    Checkpoint::load(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_mesh(mesh: &TriangleMesh, path: &Path) -> Result<(), CliError> {
    match extension(path).as_str() {
        "obj" => write_file(path, |w| write_obj(mesh, w)),
        "ply" => write_file(path, |w| write_ply(mesh, w)),
        other => Err(CliError::Usage(format!(
            "unsupported mesh extension '{other}' (expected obj or ply)"
        ))),
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub fn extract(args: ExtractArgs) -> Result<(), CliError> {
    let spec = GridSpec::unit(args.resolution).map_err(|e| CliError::Usage(e.to_string()))?;
    if !matches!(extension(&args.output).as_str(), "obj" | "ply") {
        return Err(CliError::Usage(format!(
            "unsupported mesh extension for {} (expected .obj or .ply)",
            args.output.display()
        )));
    }
    let ck = load_checkpoint(&args.checkpoint)?;
    let mut mesh =
        extract_surface(&spec, 0.0, |xs| ck.sine.values(xs)).map_err(CliError::runtime)?;
    if mesh.is_empty() {
        eprintln!("warning: the field has no zero crossing inside the grid");
        return Err(CliError::Runtime(format!(
            "refusing to write an empty mesh to {}",
            args.output.display()
        )));
    }
    let center = Vector3::from(ck.center);
    mesh.map_vertices(|v| center + v / ck.scale);
    write_mesh(&mesh, &args.output)?;
    eprintln!(
        "{} vertices, {} faces, euler characteristic {}",
        mesh.vertices.len(),
        mesh.faces.len(),
        mesh.euler_characteristic()
    );
    Ok(())
}

/// Points of a mesh (sampled) or cloud (as given).
fn eval_points(path: &Path, n: usize, seed: u64) -> Result<Vec<Vector3<f64>>, CliError> {
    let context = |e| CliError::Runtime(format!("{}: {e}", path.display()));
    match read_input(path)? {
        MeshOrCloud::Mesh(m) => sample_mesh(&m, n, seed).map_err(context),
        MeshOrCloud::Cloud(p) if p.is_empty() => {
            Err(CliError::Runtime(format!("{}: no points", path.display())))
        }
        MeshOrCloud::Cloud(p) => Ok(p),
    }
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    if let Some(t) = args.tau {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage("--tau must be positive".into()));
        }
    }
    let a = eval_points(&args.a, args.samples, args.seed)?;
    // Same stream for both, so identical meshes give identical samples.
    let b = eval_points(&args.b, args.samples, args.seed)?;
    let kind = if args.squared {
        ChamferKind::Squared
    } else {
        ChamferKind::Distance
    };
    let report = evaluate_metrics(&a, &b, args.tau, kind).map_err(CliError::runtime)?;
    let json = serde_json::to_string_pretty(&report).map_err(CliError::runtime)?;
    match &args.output {
        Some(path) => write_file(path, |w| writeln!(w, "{json}")),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

pub fn manifold(args: ManifoldArgs) -> Result<(), CliError> {
    if args.resolution < 2 {
        return Err(CliError::Usage("--resolution must be at least 2".into()));
    }
    let sim = match args.loss {
        LossArg::L1 => Similarity::L1,
        LossArg::L2 => Similarity::L2,
        LossArg::Cosine => Similarity::Cosine,
    };
    let rows = manifold_table(sim, args.resolution);
    let emit = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "x,y,z,{}", sim.name())?;
        for r in &rows {
            let d = r.direction;
            writeln!(w, "{:?},{:?},{:?},{:?}", d.x, d.y, d.z, r.value)?;
        }
        Ok(())
    };
    match &args.output {
        Some(path) => write_file(path, |w| emit(w)),
        None => emit(&mut std::io::stdout().lock()).map_err(CliError::runtime),
    }
}

pub fn frames(args: FramesArgs) -> Result<(), CliError> {
    if args.stride == 0 {
        return Err(CliError::Usage("--stride must be positive".into()));
    }
    let ck = load_checkpoint(&args.checkpoint)?;
    let points = read_input(&args.cloud)?.points().to_vec();
    if points.is_empty() {
        return Err(CliError::Runtime(format!(
            "{}: no points",
            args.cloud.display()
        )));
    }
    let half_length = args.length.unwrap_or(0.01 * bbox_diagonal(&points));
    let center = Vector3::from(ck.center);
    let picked: Vec<Vector3<f64>> = points.iter().step_by(args.stride).copied().collect();
    let normalized: Vec<Vector3<f64>> = picked.iter().map(|p| (p - center) * ck.scale).collect();
    let outputs = ck.lip.eval_many(&normalized);
    let mut flagged = 0usize;
    let glyphs: Vec<Glyph> = picked
        .iter()
        .zip(&outputs)
        .map(|(p, u)| {
            let (axes, flag) = frame_axes(&OctaCoeffs(*u), args.residual_threshold);
            flagged += flag.is_some() as usize;
            Glyph {
                center: *p,
                axes,
                half_length,
                flag,
            }
        })
        .collect();
    write_file(&args.output, |w| write_glyphs_ply(&glyphs, w))?;
    eprintln!("{} glyphs, {flagged} flagged", glyphs.len());
    Ok(())
}

/// Axes of the frame nearest to `u`, with a flag when `u` is degenerate or
/// far from the octahedral variety.
fn frame_axes(u: &OctaCoeffs, threshold: f64) -> ([Vector3<f64>; 3], Option<String>) {
    let identity = [Vector3::x(), Vector3::y(), Vector3::z()];
    let norm = u.norm();
    if !(norm > 1e-12) {
        return (identity, Some("zero frame coefficients".into()));
    }
    let q = u.normalized();
    let residual = variety_residual(&q);
    match recover_axes(&q) {
        Ok(r) => {
            let axes = [r.axis(0), r.axis(1), r.axis(2)];
            let flag = (residual > threshold)
                .then(|| format!("variety residual {residual:.4} exceeds {threshold}"));
            (axes, flag)
        }
        Err(e) => (identity, Some(format!("axis recovery failed: {e}"))),
    }
}

pub fn selftest(args: SelftestArgs) -> Result<(), CliError> {
    let mut rx = Mat9::from_fn(|i, j| RX_HALF_PI[i][j]);
    if args.negative_control {
        rx[(2, 6)] += 0.1;
        println!("negative control: rotation constant corrupted");
    }
    let summary = selftest::run_with(args.seed, &rx);
    print!("{}", summary.table());
    println!("{:.2} s", summary.seconds);
    if summary.passed() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "failed checks: {}",
            summary.failed().join(", ")
        )))
    }
}
