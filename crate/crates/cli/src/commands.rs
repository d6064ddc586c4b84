use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use evfi_core::estimator::{estimate_spline_motion, EstimatorConfig};
use evfi_core::events::io::{read_events, write_events};
use evfi_core::events::{build_voxel_grid, Frame};
use evfi_core::fusion::{FusionConfig, ParamSource};
use evfi_core::pipeline::{
    align_streams, benchmark_timing, evaluate_skip, interpolate, load_frames, psnr, save_frames, ssim, BenchmarkOptions, Dataset,
    InterpolationConfig,
};
use evfi_core::spline::format::write_spl1;
use evfi_core::synthetic::{render_sequence, textured_scene, Shape, Trajectory};
use evfi_core::{Error, Result, SimulatorConfig};

use crate::args::*;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Voxelize(a) => voxelize(a),
        Command::Align(a) => align(a),
        Command::Estimate(a) => estimate(cli, a),
        Command::Interpolate(a) => run_interpolate(cli, a),
        Command::Metrics(a) => metrics(cli, a),
        Command::Benchmark(a) => benchmark(cli, a),
    }
}

fn estimator_config(cli: &Cli, flags: &EstimatorFlags) -> Result<EstimatorConfig> {
    let mut cfg = match &cli.config {
        Some(path) => EstimatorConfig::from_file(path)?,
        None => EstimatorConfig::default(),
    };
    for kv in &flags.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("--set expects KEY=VALUE, found {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(mode) = flags.mode {
        cfg.mode = mode;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn interpolation_config(cli: &Cli, flags: &EstimatorFlags, interp: &Interpolation) -> Result<InterpolationConfig> {
    let params = match &interp.params {
        Some(path) => ParamSource::File(path.clone()),
        None => ParamSource::Seed(cli.seed),
    };
    Ok(InterpolationConfig {
        method: interp.method,
        fusion: interp.fusion,
        estimator: estimator_config(cli, flags)?,
        fusion_cfg: FusionConfig { params, ..FusionConfig::default() },
    })
}

fn load_dataset(input: &Input) -> Result<Dataset> {
    let ds = Dataset::load(&input.frames, &input.events)?;
    let shift = match (input.shift, input.align_radius) {
        (Some(s), _) => Some(s),
        (None, Some(r)) => {
            let s = align_streams(&ds.events, &ds.frames[0], frame(&ds.frames, 1)?, r)?;
            eprintln!("measured event offset {},{}", s.0, s.1);
            Some(s)
        }
        (None, None) => None,
    };
    Ok(match shift {
        Some(s) => ds.with_alignment(s),
        None => ds,
    })
}

fn frame(frames: &[Frame], i: usize) -> Result<&Frame> {
    frames
        .get(i)
        .ok_or_else(|| Error::InvalidInput(format!("frame {i} requested but only {} frames loaded", frames.len())))
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    if a.frames < 2 || a.substeps == 0 || a.interval_us < a.substeps as u64 || a.size < 8 {
        return Err(Error::InvalidInput(
            "simulate needs >= 2 frames, >= 1 substep, an interval of at least one microsecond per substep and size >= 8".into(),
        ));
    }
    let c = a.size as f64 / 2.0;
    let (start, end) = ((c - a.length / 2.0, c + a.apex / 2.0), (c + a.length / 2.0, c + a.apex / 2.0));
    let trajectory = match a.trajectory {
        TrajectoryArg::Linear => Trajectory::Linear { start, end },
        TrajectoryArg::Parabola => Trajectory::Parabola { start, end, apex: a.apex },
    };
    let shape = match a.shape {
        ShapeArg::Disc => Shape::Disc { radius: a.radius },
        ShapeArg::Square => Shape::Square { half: a.radius },
    };
    let scene = textured_scene(a.size, cli.seed, shape, trajectory);
    let sim = SimulatorConfig::with_threshold(a.threshold);
    sim.validate()?;
    let seq = render_sequence(&scene, a.frames, a.interval_us, a.substeps, &sim)?;
    let frames_dir = a.out.join("frames");
    save_frames(&frames_dir, &seq.frames)?;
    let events_path = a.out.join(&a.events_name);
    write_events(&events_path, &seq.events)?;
    println!(
        "wrote {} frames to {} and {} events to {}",
        seq.frames.len(),
        frames_dir.display(),
        seq.events.len(),
        events_path.display()
    );
    Ok(())
}

fn voxelize(a: &VoxelizeArgs) -> Result<()> {
    let ev = read_events(&a.events, a.sensor)?;
    let grid = build_voxel_grid(&ev, a.t0, a.t1, a.bins)?;
    grid.write(&a.out)?;
    let (b, h, w) = grid.data().dim();
    println!(
        "{b}x{h}x{w} voxel grid over [{}, {}] us, polarity sum {:.1}, written to {}",
        a.t0,
        a.t1,
        grid.data().sum(),
        a.out.display()
    );
    Ok(())
}

fn align(a: &AlignArgs) -> Result<()> {
    let ds = Dataset::load(&a.frames, &a.events)?;
    let (dx, dy) = align_streams(&ds.events, frame(&ds.frames, a.pair)?, frame(&ds.frames, a.pair + 1)?, a.radius)?;
    println!("{dx},{dy}");
    if let Some(out) = &a.write {
        write_events(out, &ds.with_alignment((dx, dy)).aligned_events())?;
    }
    Ok(())
}

fn estimate(cli: &Cli, a: &EstimateArgs) -> Result<()> {
    let cfg = estimator_config(cli, &a.estimator)?;
    let ds = load_dataset(&a.input)?;
    let events = ds.aligned_events();
    let (i0, i1) = (frame(&ds.frames, a.pair)?, frame(&ds.frames, a.pair + 1)?);
    let field = estimate_spline_motion(i0, i1, &events, cfg.control_points, &cfg)?;
    write_spl1(&a.out, &field)?;
    let end = field.sample(1.0)?.flow;
    println!(
        "K={} spline for frames {}..{} ({} mode), mean endpoint flow ({:.3}, {:.3}) px, written to {}",
        field.control_points(),
        a.pair,
        a.pair + 1,
        cfg.mode,
        end.u().mean().unwrap_or(0.0),
        end.v().mean().unwrap_or(0.0),
        a.out.display()
    );
    Ok(())
}

fn run_interpolate(cli: &Cli, a: &InterpolateArgs) -> Result<()> {
    let cfg = interpolation_config(cli, &a.estimator, &a.interpolation)?;
    let ds = load_dataset(&a.input)?;
    let out = interpolate(&ds, a.skip, a.insert, &cfg)?;
    save_frames(&a.out, &out.frames)?;
    let inserted = out.inserted.iter().filter(|i| **i).count();
    println!(
        "{} frames ({inserted} inserted, {} method, {} fusion) written to {}",
        out.frames.len(),
        cfg.method,
        cfg.fusion,
        a.out.display()
    );
    Ok(())
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.3}")
    }
}

fn metrics(cli: &Cli, a: &MetricsArgs) -> Result<()> {
    let mut csv = String::new();
    match (&a.frames, &a.events, &a.pred, &a.truth) {
        (Some(frames), Some(events), None, None) => {
            let cfg = interpolation_config(cli, &a.estimator, &a.interpolation)?;
            let input = Input { frames: frames.clone(), events: events.clone(), shift: a.shift, align_radius: None };
            let ds = load_dataset(&input)?;
            let report = evaluate_skip(&ds, a.skip, &cfg)?;
            csv.push_str("index,t_us,psnr,ssim,baseline_psnr,baseline_ssim\n");
            println!("{:>6} {:>10} {:>9} {:>7} {:>9} {:>7}", "frame", "t_us", "psnr", "ssim", "avg_psnr", "avg_ssim");
            for f in &report.frames {
                println!(
                    "{:>6} {:>10} {:>9} {:>7.4} {:>9} {:>7.4}",
                    f.index,
                    f.t_us,
                    fmt_db(f.psnr),
                    f.ssim,
                    fmt_db(f.baseline_psnr),
                    f.baseline_ssim
                );
                let _ = writeln!(csv, "{},{},{},{},{},{}", f.index, f.t_us, f.psnr, f.ssim, f.baseline_psnr, f.baseline_ssim);
            }
            println!(
                "mean   {} method, skip {}: PSNR {} dB, SSIM {:.4} (keyframe average: {} dB, {:.4})",
                cfg.method,
                a.skip,
                fmt_db(report.mean_psnr()),
                report.mean_ssim(),
                fmt_db(report.mean_baseline_psnr()),
                report.mean_baseline_ssim()
            );
        }
        (None, _, Some(pred), Some(truth)) => {
            let (p, t) = (load_frames(pred)?, load_frames(truth)?);
            if p.len() != t.len() {
                return Err(Error::InvalidInput(format!("{} predicted frames vs {} reference frames", p.len(), t.len())));
            }
            csv.push_str("index,psnr,ssim\n");
            let (mut sp, mut ss) = (0.0, 0.0);
            for (i, (a, b)) in p.iter().zip(&t).enumerate() {
                let (q, s) = (psnr(a, b)?, ssim(a, b)?);
                println!("{i:>6} {:>9} {s:>7.4}", fmt_db(q));
                let _ = writeln!(csv, "{i},{q},{s}");
                sp += q;
                ss += s;
            }
            let n = p.len() as f64;
            println!("mean   PSNR {} dB, SSIM {:.4}", fmt_db(sp / n), ss / n);
        }
        _ => return Err(Error::InvalidInput("metrics needs --frames with --events, or --pred with --truth".into())),
    }
    if let Some(path) = &a.csv {
        write_text(path, &csv)?;
    }
    Ok(())
}

fn benchmark(cli: &Cli, a: &BenchmarkArgs) -> Result<()> {
    let cfg = InterpolationConfig { estimator: estimator_config(cli, &a.estimator)?, ..InterpolationConfig::default() };
    let ds = load_dataset(&a.input)?;
    let opts = BenchmarkOptions { ns: a.ns.clone(), methods: a.methods.clone(), runs: a.runs, warmup: a.warmup };
    let report = benchmark_timing(&ds, &opts, &cfg)?;
    print!("{}", report.to_table());
    if let Some(path) = &a.csv {
        write_text(path, &report.to_csv())?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}
