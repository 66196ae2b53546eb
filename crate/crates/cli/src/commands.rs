use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use rayon::prelude::*;

use trackkit::ensemble::wbf;
use trackkit::geom::BBox;
use trackkit::metrics::{average_precision, SceneTable, SequenceStats};
use trackkit::moio::{self, Config, Manifest, PipelineConfig};
use trackkit::pipeline::{
    evaluate_sequence, format_ablation, postprocess_sequence, run_ablation, run_sequence, track_sequence, Components,
    LabelledSequence,
};
use trackkit::search::{search, SearchConfig};
use trackkit::sim::{generate, SimConfig};
use trackkit::{Error, SceneKind};

use crate::layout;
use crate::{Cli, CliError, Command, Global, Grid, SearchArgs, SimulateArgs};

struct Context {
    config: Config,
    pipeline: PipelineConfig,
    command_line: String,
}

impl Context {
    fn manifest(&self) -> Manifest {
        Manifest::new(self.command_line.clone(), &self.config)
    }
}

fn resolve_config(global: &Global) -> Result<(Config, PipelineConfig), CliError> {
    let mut config = match &global.config {
        Some(path) => Config::parse(&layout::read(path)?)
            .map_err(|e| CliError::from_lib(e).context(&path.display().to_string()))?,
        None => Config::default(),
    };
    for kv in &global.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        config
            .set(k.trim(), v.trim())
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let pipeline = config.pipeline().map_err(|e| match &e {
        Error::Config { key, .. } if config.source(key) == Some(moio::Source::Override) => CliError::Usage(e.to_string()),
        _ => CliError::from_lib(e),
    })?;
    Ok((config, pipeline))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let (config, pipeline) = resolve_config(&cli.global)?;
    let ctx = Context {
        config,
        pipeline,
        command_line: std::env::args().collect::<Vec<_>>().join(" "),
    };
    match cli.command {
        Command::Track {
            sequences,
            out,
            postprocess,
        } => track(&ctx, &sequences, &out, postprocess),
        Command::Ensemble { detections, out } => ensemble(&ctx, &detections, &out),
        Command::Postprocess { tracks, sequence, out } => postprocess_file(&ctx, &tracks, &sequence, &out),
        Command::Eval { sequences, tracks, out } => eval(&ctx, &sequences, &tracks, out.as_deref()),
        Command::Search(args) => search_cmd(&ctx, &args),
        Command::Simulate(args) => simulate(&ctx, &args),
        Command::Ablate {
            sequences,
            simulate,
            grid,
            models,
            out,
        } => ablate(&ctx, &sequences, simulate, grid, &models, out.as_deref()),
        Command::Defaults => {
            print!("{}", Config::documented_defaults());
            Ok(())
        }
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), CliError> {
    layout::write(&dir.join("manifest.json"), &manifest.to_json())
}

fn track(ctx: &Context, dirs: &[PathBuf], out: &Path, postprocess: bool) -> Result<(), CliError> {
    let mut manifest = ctx.manifest();
    let inputs = dirs
        .iter()
        .map(|d| layout::load_input(d, &ctx.pipeline, &mut manifest))
        .collect::<Result<Vec<_>, _>>()?;
    // one worker per sequence; results are written in input order
    let results: Vec<_> = inputs
        .par_iter()
        .map(|input| {
            if postprocess {
                run_sequence(input, &ctx.pipeline)
            } else {
                track_sequence(input, &ctx.pipeline)
            }
        })
        .collect();
    for (input, result) in inputs.iter().zip(results) {
        let tracks = result?;
        let path = out.join(format!("{}.txt", input.meta.name));
        layout::write(&path, &moio::write_tracks(&tracks))?;
        println!("{}: {} tracks -> {}", input.meta.name, tracks.len(), path.display());
    }
    write_manifest(out, &manifest)
}

fn ensemble(ctx: &Context, files: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let mut sets = Vec::with_capacity(files.len());
    for f in files {
        let dets = moio::parse_detections(&layout::read(f)?)
            .map_err(|e| CliError::from_lib(e).context(&f.display().to_string()))?;
        sets.push(dets.frames);
    }
    let frames: std::collections::BTreeSet<u32> = sets.iter().flat_map(|s| s.keys().copied()).collect();
    let mut fused: BTreeMap<u32, Vec<BBox<f64>>> = BTreeMap::new();
    for f in frames {
        let per_model: Vec<Vec<BBox<f64>>> = sets.iter().map(|s| s.get(&f).cloned().unwrap_or_default()).collect();
        let boxes = wbf(&per_model, &ctx.pipeline.ensemble)
            .map_err(|e| CliError::from_lib(e).context(&format!("ensemble, frame {f}")))?;
        fused.insert(f, boxes);
    }
    let n: usize = fused.values().map(|v| v.len()).sum();
    layout::write(out, &moio::write_detections(&fused))?;
    println!("fused {} models into {n} detections -> {}", files.len(), out.display());
    Ok(())
}

fn postprocess_file(ctx: &Context, tracks: &Path, seq: &Path, out: &Path) -> Result<(), CliError> {
    let mut manifest = ctx.manifest();
    let mut meta = moio::parse_seqinfo(&layout::read(&seq.join(layout::SEQINFO))?)
        .map_err(|e| CliError::from_lib(e).context(&seq.join(layout::SEQINFO).display().to_string()))?;
    meta.scene_kind = ctx.pipeline.scenes.kind(&meta.name);
    let input = layout::load_tracks(tracks, &mut manifest)?;
    let result = postprocess_sequence(input, &meta, &ctx.pipeline)?;
    layout::write(out, &moio::write_tracks(&result))?;
    println!("{}: {} tracks -> {}", meta.name, result.len(), out.display());
    if let Some(dir) = out.parent() {
        write_manifest(dir, &manifest)?;
    }
    Ok(())
}

fn eval(ctx: &Context, dirs: &[PathBuf], tracks_dir: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let mut manifest = ctx.manifest();
    let mut table = SceneTable::default();
    let mut per_sequence = BTreeMap::new();
    println!("{:<16}{}", "sequence", trackkit::metrics::EvalReport::HEADER);
    for dir in dirs {
        let mut meta = moio::parse_seqinfo(&layout::read(&dir.join(layout::SEQINFO))?)
            .map_err(|e| CliError::from_lib(e).context(&dir.join(layout::SEQINFO).display().to_string()))?;
        meta.scene_kind = ctx.pipeline.scenes.kind(&meta.name);
        let gt = layout::load_gt(dir, &mut manifest)?;
        let pred = layout::load_tracks(&tracks_dir.join(format!("{}.txt", meta.name)), &mut manifest)?;
        let stats: SequenceStats = evaluate_sequence(&pred, &gt, &ctx.pipeline.eval);
        let report = stats.report();
        println!("{:<16}{report}", meta.name);
        table.add(meta.scene_kind, &stats);
        per_sequence.insert(meta.name.clone(), report);
    }
    let combined = table.all.report();
    println!("{:<16}{combined}", "COMBINED");
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.1}", 100.0 * v));
    println!(
        "HOTA static {} ({} seqs), dynamic {} ({} seqs)",
        pct(table.hota_static()),
        table.num_static,
        pct(table.hota_dynamic()),
        table.num_dynamic
    );
    if let Some(dir) = out {
        let json = serde_json::json!({ "combined": combined, "sequences": per_sequence });
        layout::write(&dir.join("eval.json"), &serde_json::to_string_pretty(&json).expect("report serializes"))?;
        write_manifest(dir, &manifest)?;
    }
    Ok(())
}

fn broadcast(cfg: &SearchConfig, dims: usize) -> Result<SearchConfig, CliError> {
    let mut s = cfg.clone();
    if s.dims() != dims {
        if s.dims() != 1 || s.bounds.len() != 1 {
            return Err(CliError::Usage(format!(
                "--dims {dims} does not match search.init_mean with {} entries",
                s.dims()
            )));
        }
        s.init_mean = vec![s.init_mean[0]; dims];
        s.bounds = vec![s.bounds[0]; dims];
    }
    Ok(s)
}

fn subprocess_objective(cmd: &[String], params: &[f64]) -> Result<f64, String> {
    let output = Process::new(&cmd[0])
        .args(&cmd[1..])
        .args(params.iter().map(|p| p.to_string()))
        .output()
        .map_err(|e| format!("cannot run `{}`: {e}", cmd[0]))?;
    if !output.status.success() {
        return Err(format!("`{}` exited with {}", cmd[0], output.status));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    let last = stdout.lines().rev().find(|l| !l.trim().is_empty()).ok_or("objective printed nothing")?;
    // non-finite scores are passed on; the search reports them as a numerical failure
    last.trim()
        .parse::<f64>()
        .map_err(|_| format!("last output line `{}` is not a number", last.trim()))
}

fn search_cmd(ctx: &Context, args: &SearchArgs) -> Result<(), CliError> {
    let mut manifest = ctx.manifest();
    let cfg = broadcast(&ctx.pipeline.search, args.dims)?;
    let result = if let Some(det_path) = &args.ap_detections {
        if args.dims != 1 {
            return Err(CliError::Usage("the average-precision objective searches one score threshold".into()));
        }
        let gt_path = args.gt.as_ref().expect("clap requires --gt");
        let det_text = layout::read(det_path)?;
        manifest.add_input(det_path.display().to_string(), det_text.as_bytes());
        let dets = moio::parse_detections(&det_text)
            .map_err(|e| CliError::from_lib(e).context(&det_path.display().to_string()))?;
        let gt_text = layout::read(gt_path)?;
        manifest.add_input(gt_path.display().to_string(), gt_text.as_bytes());
        let gt = moio::parse_gt(&gt_text).map_err(|e| CliError::from_lib(e).context(&gt_path.display().to_string()))?;
        let mut gt_frames: BTreeMap<u32, Vec<BBox<f64>>> = BTreeMap::new();
        for g in gt.iter().filter(|g| g.consider) {
            gt_frames.entry(g.bbox.frame).or_default().push(g.bbox);
        }
        let iou_thresh = ctx.pipeline.eval.options.iou_thresh;
        search(
            |p| {
                let kept: BTreeMap<u32, Vec<BBox<f64>>> = dets
                    .frames
                    .iter()
                    .map(|(&f, v)| (f, v.iter().filter(|b| b.score >= p[0]).copied().collect()))
                    .collect();
                average_precision(&kept, &gt_frames, iou_thresh).map_err(|e| e.to_string())
            },
            &cfg,
        )?
    } else {
        if args.command.is_empty() {
            return Err(CliError::Usage(
                "give an objective command after `--`, or --ap-detections with --gt".into(),
            ));
        }
        search(|p| subprocess_objective(&args.command, p), &cfg)?
    };
    for (k, m) in result.means.iter().enumerate() {
        log::info!("round {k}: mean {m:?}");
    }
    println!("best score {}", result.best_score);
    println!("best params {:?}", result.best_params);
    if let Some(dir) = &args.out {
        layout::write(&dir.join("search.json"), &serde_json::to_string_pretty(&result).expect("result serializes"))?;
        write_manifest(dir, &manifest)?;
    }
    Ok(())
}

fn sim_config(args: &SimulateArgs, seed: u64) -> SimConfig {
    let mut c = if args.noiseless {
        SimConfig::noiseless(seed)
    } else {
        SimConfig {
            seed,
            ..SimConfig::default()
        }
    };
    if let Some(v) = args.tracks {
        c.n_tracks = v;
    }
    if let Some(v) = args.length {
        c.length = v;
    }
    if let Some(v) = args.drop_prob {
        c.drop_prob = v;
    }
    if let Some(v) = args.jitter {
        c.jitter = v;
    }
    if let Some(v) = args.fp_rate {
        c.fp_rate = v;
    }
    if let Some(v) = args.pan {
        c.camera_pan = v;
    }
    if let Some(v) = args.shake {
        c.camera_shake = v;
    }
    if args.no_clip {
        c.clip_at_border = false;
    }
    c
}

fn simulate(ctx: &Context, args: &SimulateArgs) -> Result<(), CliError> {
    let mut scenes = String::new();
    for k in 0..args.sequences {
        let cfg = sim_config(args, args.seed + k);
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let sim = generate(&cfg)?;
        let dir = args.out.join(&sim.meta.name);
        layout::write_sim(&dir, &sim)?;
        if sim.meta.scene_kind == SceneKind::Dynamic {
            scenes.push_str(&format!("scene.{} = dynamic\n", sim.meta.name));
        }
        println!(
            "{}: {} gt boxes, {} detections -> {}",
            sim.meta.name,
            sim.num_gt_boxes(),
            sim.dets.values().map(|v| v.len()).sum::<usize>(),
            dir.display()
        );
    }
    if !scenes.is_empty() {
        let path = args.out.join("scenes.cfg");
        layout::write(&path, &scenes)?;
        println!("moving-camera sequences are listed in {}; pass it with --config", path.display());
    }
    write_manifest(&args.out, &ctx.manifest())
}

fn ablate(
    ctx: &Context,
    dirs: &[PathBuf],
    simulate: Option<u64>,
    grid: Grid,
    models: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut manifest = ctx.manifest();
    let seqs: Vec<LabelledSequence> = match simulate {
        Some(n) => (0..n)
            .map(|seed| {
                let cfg = SimConfig {
                    drop_prob: 0.2,
                    jitter: 2.0,
                    fp_rate: 0.5,
                    seed,
                    ..SimConfig::default()
                };
                generate(&cfg).map(|s| LabelledSequence::from(&s))
            })
            .collect::<trackkit::Result<_>>()?,
        None if dirs.is_empty() => return Err(CliError::Usage("give sequence directories or --simulate N".into())),
        None => dirs
            .iter()
            .map(|d| layout::load_labelled(d, &ctx.pipeline, &mut manifest))
            .collect::<Result<_, _>>()?,
    };
    let grid = match grid {
        Grid::Cumulative => Components::cumulative(),
        Grid::Full => Components::full_grid(),
    };
    let rows = run_ablation(&seqs, &ctx.pipeline, &grid)?;
    print!("{}", format_ablation(&rows, models));
    if let Some(dir) = out {
        write_manifest(dir, &manifest)?;
    }
    Ok(())
}
