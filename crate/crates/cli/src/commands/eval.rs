use std::io::Write;
use std::path::{Path, PathBuf};

use beat_core::annotation::ScoreTrack;
use beat_core::beatsig::{detect_audio_beats, group_motion_beats, BeatSequence, EnvelopeParams};
use beat_core::metrics::{
    beat_align, center_crop_flatten, fgd, l1_diversity, motion_windows, read_feature_csv, srgr, ClipPair,
    PcaFeatureMap,
};
use beat_core::motion::{parse_bvh, read_audio, JointGroup, JointPartition};

use super::{extension, load_positions, load_scores, require_same_count};
use crate::config::RunConfig;
use crate::error::{read_bytes, read_text, write_file, CliError, Result};
use crate::report::Report;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(subcommand)]
    pub metric: Metric,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, clap::Subcommand)]
pub enum Metric {
    /// Semantic-relevance gesture recall over paired BVH clips.
    Srgr {
        #[arg(long, required = true, num_args = 1..)]
        truth: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        pred: Vec<PathBuf>,
        /// Per-frame relevance CSVs (column `score`); all ones when omitted.
        #[arg(long, num_args = 1..)]
        lambda: Vec<PathBuf>,
        /// PCK threshold in skeleton units.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Frechet gesture distance between feature CSVs or BVH sets.
    Fgd {
        #[arg(long, required = true, num_args = 1..)]
        real: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        gen: Vec<PathBuf>,
    },
    /// Beat alignment between gesture and audio beats (CSV, .bvh or .wav).
    Beatalign {
        #[arg(long, required = true, num_args = 1..)]
        gesture: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        audio: Vec<PathBuf>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Joint group for motion beats extracted from BVH input.
        #[arg(long)]
        joints: Option<String>,
    },
    /// Mean pairwise L1 distance between clips.
    L1div {
        #[arg(long, required = true, num_args = 2..)]
        clips: Vec<PathBuf>,
    },
}

pub fn run(args: Args, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let report = match args.metric {
        Metric::Srgr {
            truth,
            pred,
            lambda,
            delta,
        } => eval_srgr(&truth, &pred, &lambda, delta.unwrap_or(config.metrics.pck_delta))?,
        Metric::Fgd { real, gen } => eval_fgd(&real, &gen, config)?,
        Metric::Beatalign {
            gesture,
            audio,
            sigma,
            joints,
        } => {
            let joints = joints.unwrap_or_else(|| config.beats.joints.clone());
            eval_beatalign(&gesture, &audio, sigma.unwrap_or(config.metrics.beat_sigma), &joints, config)?
        }
        Metric::L1div { clips } => {
            let tracks = clips.iter().map(|p| load_positions(p)).collect::<Result<Vec<_>>>()?;
            let flat = center_crop_flatten(&tracks)?;
            let frames = tracks.iter().map(|t| t.num_frames()).min().unwrap_or(0);
            Report::new("l1div", l1_diversity(&flat)?, clips.len()).param("frames", frames)
        }
    };
    let json = report.to_json();
    writeln!(out, "{json}")?;
    if let Some(path) = args.report {
        write_file(&path, format!("{json}\n"))?;
    }
    Ok(())
}

fn eval_srgr(truth: &[PathBuf], pred: &[PathBuf], lambda: &[PathBuf], delta: f64) -> Result<Report> {
    require_same_count("--truth/--pred", truth.len(), pred.len())?;
    if !lambda.is_empty() {
        require_same_count("--truth/--lambda", truth.len(), lambda.len())?;
    }
    let mut pairs = Vec::with_capacity(truth.len());
    for (i, (t, p)) in truth.iter().zip(pred).enumerate() {
        let tt = load_positions(t)?;
        let pt = load_positions(p)?;
        let weights = match lambda.get(i) {
            Some(path) => load_scores(path, tt.fps())?,
            None => ScoreTrack::new(tt.fps(), vec![1.0; tt.num_frames()])?,
        };
        pairs.push(ClipPair::new(tt, pt, weights).map_err(|e| CliError::from(e).in_file(p))?);
    }
    let value = srgr(&pairs, delta)?;
    Ok(Report::new("srgr", value, pairs.len())
        .param("delta", delta)
        .param("weighted", !lambda.is_empty()))
}

fn eval_fgd(real: &[PathBuf], gen: &[PathBuf], config: &RunConfig) -> Result<Report> {
    let all_bvh = real.iter().chain(gen).all(|p| extension(p) == "bvh");
    if all_bvh {
        let m = &config.metrics;
        let r = real.iter().map(|p| load_positions(p)).collect::<Result<Vec<_>>>()?;
        let g = gen.iter().map(|p| load_positions(p)).collect::<Result<Vec<_>>>()?;
        let rows = motion_windows(&r, m.fgd_window, m.fgd_stride)?;
        let map = PcaFeatureMap::fit(&rows, m.fgd_components, m.fgd_window, m.fgd_stride)?;
        let value = fgd(&map.transform(&rows)?, &map.features(&g)?)?;
        return Ok(Report::new("fgd", value, r.len() + g.len())
            .param("source", "bvh")
            .param("window", m.fgd_window)
            .param("stride", m.fgd_stride)
            .param("components", map.num_components()));
    }
    let load = |paths: &[PathBuf]| -> Result<nalgebra::DMatrix<f64>> {
        let mut rows: Vec<f64> = Vec::new();
        let mut cols = None;
        let mut n = 0;
        for p in paths {
            let m = read_feature_csv(&read_text(p)?).map_err(|e| CliError::from(e).in_file(p))?;
            if *cols.get_or_insert(m.ncols()) != m.ncols() {
                return Err(CliError::mismatch(format!("{}: {} feature columns", p.display(), m.ncols())));
            }
            for r in 0..m.nrows() {
                rows.extend(m.row(r).iter());
            }
            n += m.nrows();
        }
        Ok(nalgebra::DMatrix::from_row_slice(n, cols.unwrap_or(0), &rows))
    };
    let r = load(real)?;
    let g = load(gen)?;
    if r.ncols() != g.ncols() {
        return Err(CliError::mismatch(format!(
            "feature dimensions differ: {} vs {}",
            r.ncols(),
            g.ncols()
        )));
    }
    let value = fgd(&r, &g)?;
    Ok(Report::new("fgd", value, r.nrows() + g.nrows())
        .param("source", "features")
        .param("dim", r.ncols()))
}

fn beats_from(path: &Path, joints: JointGroup, config: &RunConfig) -> Result<BeatSequence> {
    let in_file = |e: CliError| e.in_file(path);
    match extension(path).as_str() {
        "bvh" => {
            let clip = parse_bvh(&read_text(path)?).map_err(|e| in_file(e.into()))?;
            let pos = beat_core::motion::forward_kinematics(&clip, Default::default())
                .map_err(|e| in_file(e.into()))?;
            let partition = JointPartition::from_skeleton(clip.skeleton());
            group_motion_beats(&pos, &partition, joints).map_err(|e| in_file(e.into()))
        }
        "wav" => {
            let audio = read_audio(&read_bytes(path)?).map_err(|e| in_file(e.into()))?.downmix();
            let params = EnvelopeParams {
                window_s: config.beats.window,
                hop_s: config.beats.hop,
            };
            detect_audio_beats(audio.channel(0), audio.sample_rate(), params, config.beats.onset_threshold)
                .map_err(|e| in_file(e.into()))
        }
        _ => BeatSequence::from_csv(&read_text(path)?).map_err(|e| in_file(e.into())),
    }
}

fn eval_beatalign(
    gesture: &[PathBuf],
    audio: &[PathBuf],
    sigma: f64,
    joints: &str,
    config: &RunConfig,
) -> Result<Report> {
    require_same_count("--gesture/--audio", gesture.len(), audio.len())?;
    let group: JointGroup = joints.parse().map_err(CliError::other)?;
    let mut sum = 0.0;
    for (g, a) in gesture.iter().zip(audio) {
        let gb = beats_from(g, group, config)?;
        let ab = beats_from(a, group, config)?;
        sum += beat_align(&gb, &ab, sigma).map_err(|e| CliError::from(e).in_file(g))?;
    }
    Ok(Report::new("beatalign", sum / gesture.len() as f64, gesture.len())
        .param("sigma", sigma)
        .param("joints", joints))
}
