use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use beat_core::motion::{
    frame_audio, frame_words, parse_blendshapes, parse_textgrid, read_audio, write_bvh, AlignedTranscript, JointPartition,
    MotionClip, Resample,
};
use camn::{toy_corpus, Camn, CamnConfig, Clip, Conditioning, Modality, RunManifest, WordTable};
use ndiff::{Checkpoint, Tensor};

use super::{load_bvh, load_scores};
use crate::config::RunConfig;
use crate::error::{read_bytes, read_text, write_file, CliError, Result};
use crate::report::{sig6, Report};

/// Gradient check failure threshold on the maximum relative error.
pub const GRADCHECK_TOL: f64 = 1e-3;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(subcommand)]
    pub action: Action,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ModelArgs {
    /// Reduced network sized for CPU experiments.
    #[arg(long)]
    pub toy: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Remove a modality (text, audio, face, emotion, id, semantic). Repeatable.
    #[arg(long = "drop")]
    pub drop: Vec<Modality>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct DataArgs {
    /// Directory of stem-matched .bvh/.wav/.json/.TextGrid/.scores.csv files.
    /// A synthetic corpus is used when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Word vectors (`word v1 v2 ...` per line); random vectors when omitted.
    #[arg(long)]
    pub words: Option<PathBuf>,
    /// Synthetic corpus size.
    #[arg(long, default_value_t = 10)]
    pub clips: usize,
    /// Synthetic clip length in frames.
    #[arg(long, default_value_t = 64)]
    pub frames: usize,
    /// Cut loaded clips into windows of this many frames.
    #[arg(long)]
    pub crop: Option<usize>,
}

#[derive(Debug, clap::Subcommand)]
pub enum Action {
    /// Train and write manifest.json, losses.csv and checkpoint.json.
    Train {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Teacher-forced pass over one clip; prints reconstruction errors.
    Forward {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Clip index in the loaded corpus.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Autoregressive generation from a seed pose.
    Synthesize {
        #[command(flatten)]
        model: ModelArgs,
        /// BVH whose first frames seed the rollout.
        #[arg(long)]
        seed_pose: PathBuf,
        /// Total frames to produce, seed included.
        #[arg(long)]
        len: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Audio to condition on; silence when omitted.
        #[arg(long)]
        audio: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        speaker: usize,
        #[arg(long, default_value_t = 0)]
        emotion: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the full model and one variant per dropped modality.
    Ablate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Compare analytic and numeric generator gradients.
    Gradcheck {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 16)]
        frames: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

pub fn run(args: Args, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    match args.action {
        Action::Train {
            model,
            data,
            steps,
            out: dir,
        } => {
            let steps = steps.or(config.camn.steps).unwrap_or(500);
            let seed = model.seed.unwrap_or(config.general.seed);
            let mut cfg = network_config(&model, config);
            let clips = load_corpus(&data, &mut cfg, seed, config)?;
            let mut camn = Camn::new(cfg, seed)?;
            let losses = camn.train(&clips, steps)?;
            let dir = dir
                .or_else(|| config.general.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("camn-run"));
            let manifest = camn.manifest();
            write_file(&dir.join("manifest.json"), manifest.to_json())?;
            write_file(&dir.join("losses.csv"), manifest.loss_csv())?;
            write_file(&dir.join("checkpoint.json"), camn.checkpoint().to_json())?;
            let (first, last) = match (losses.first(), losses.last()) {
                (Some(a), Some(b)) => (a.generator, b.generator),
                _ => return Err(CliError::other("no training steps requested")),
            };
            if !last.is_finite() {
                return Err(CliError::numeric("generator loss is not finite"));
            }
            writeln!(out, "clips {}", clips.len())?;
            writeln!(out, "steps {steps}")?;
            writeln!(out, "initial {}", sig6(first))?;
            writeln!(out, "final {}", sig6(last))?;
            writeln!(out, "ratio {}", sig6(last / first))?;
            writeln!(out, "wrote {}", dir.display())?;
            Ok(())
        }
        Action::Forward {
            model,
            data,
            checkpoint,
            index,
        } => {
            let seed = model.seed.unwrap_or(config.general.seed);
            let mut cfg = network_config(&model, config);
            if let Some(path) = &checkpoint {
                cfg = manifest_config(path)?.unwrap_or(cfg);
            }
            let clips = load_corpus(&data, &mut cfg, seed, config)?;
            let clip = clips
                .get(index)
                .ok_or_else(|| CliError::mismatch(format!("clip {index} out of range ({} clips)", clips.len())))?;
            let camn = build(cfg, seed, checkpoint.as_deref())?;
            let g = camn.forward(clip)?;
            let body = mae(&g.body, &clip.body);
            let hands = mae(&g.hands, &clip.hands);
            if !(body.is_finite() && hands.is_finite()) {
                return Err(CliError::numeric("forward pass produced non-finite poses"));
            }
            let r = Report::new("forward_mae", body, clip.frames())
                .param("hands_mae", hands)
                .param("loss", camn.generator_loss(std::slice::from_ref(clip))?);
            writeln!(out, "{}", r.to_json())?;
            Ok(())
        }
        Action::Synthesize {
            model,
            seed_pose,
            len,
            checkpoint,
            audio,
            speaker,
            emotion,
            out: dst,
        } => {
            let seed = model.seed.unwrap_or(config.general.seed);
            let mut cfg = network_config(&model, config);
            if let Some(path) = &checkpoint {
                cfg = manifest_config(path)?.unwrap_or(cfg);
            }
            let clip = load_bvh(&seed_pose)?;
            let partition = beat_partition(&clip, &seed_pose)?;
            if clip.num_frames() < cfg.seed_len {
                return Err(CliError::mismatch(format!(
                    "{}: seed pose has {} frames, need {}",
                    seed_pose.display(),
                    clip.num_frames(),
                    cfg.seed_len
                )));
            }
            let (body, hands) = pose_tensors(&clip.slice(0, cfg.seed_len), &partition)?;
            let audio = match &audio {
                Some(p) => Some(load_audio_windows(p, &cfg, clip.fps(), len)?),
                None => None,
            };
            let cond = neutral_conditioning(&cfg, len, speaker, emotion, audio)?;
            let camn = build(cfg.clone(), seed, checkpoint.as_deref())?;
            let g = camn.synthesize(&cond, &body, &hands)?;
            if g.body.data().iter().chain(g.hands.data()).any(|v| !v.is_finite()) {
                return Err(CliError::numeric("synthesized poses are not finite"));
            }
            let motion = to_motion(&clip, &partition, cfg.seed_len, &g.body, &g.hands)?;
            write_file(&dst, write_bvh(&motion))?;
            writeln!(
                out,
                "{} frames ({} seed) -> {}",
                motion.num_frames(),
                cfg.seed_len,
                dst.display()
            )?;
            Ok(())
        }
        Action::Ablate { model, data, steps } => {
            let seed = model.seed.unwrap_or(config.general.seed);
            let base = network_config(&ModelArgs { drop: Vec::new(), ..model.clone() }, config);
            let mut cfg = base.clone();
            let clips = load_corpus(&data, &mut cfg, seed, config)?;
            let variants: Vec<Option<Modality>> = if model.drop.is_empty() {
                std::iter::once(None).chain(Modality::ALL.iter().copied().map(Some)).collect()
            } else {
                std::iter::once(None).chain(model.drop.iter().copied().map(Some)).collect()
            };
            writeln!(out, "variant,final_loss,final_reconstruction")?;
            for v in variants {
                let mut c = cfg.clone();
                if let Some(m) = v {
                    c.drop.push(m);
                }
                let mut camn = Camn::new(c, seed)?;
                let losses = camn.train(&clips, steps)?;
                let last = losses.last().ok_or_else(|| CliError::other("no training steps requested"))?;
                if !last.generator.is_finite() {
                    return Err(CliError::numeric("generator loss is not finite"));
                }
                let name = v.map_or("full".to_string(), |m| format!("-{m}"));
                writeln!(out, "{name},{},{}", sig6(last.generator), sig6(last.reconstruction))?;
            }
            Ok(())
        }
        Action::Gradcheck {
            model,
            frames,
            samples,
        } => {
            let seed = model.seed.unwrap_or(config.general.seed);
            let cfg = network_config(&model, config);
            let report = camn::generator_gradcheck(&cfg, frames, samples, seed)?;
            let r = Report::new("gradcheck_max_rel_err", report.max_rel_err, report.checked)
                .param("frames", frames)
                .param("tolerance", GRADCHECK_TOL);
            writeln!(out, "{}", r.to_json())?;
            if !(report.max_rel_err < GRADCHECK_TOL) {
                let worst = report
                    .worst
                    .map(|(name, i, a, n)| format!(" (worst {name}[{i}]: analytic {a:e}, numeric {n:e})"))
                    .unwrap_or_default();
                return Err(CliError::numeric(format!(
                    "max relative error {} exceeds {GRADCHECK_TOL}{worst}",
                    sig6(report.max_rel_err)
                )));
            }
            Ok(())
        }
    }
}

fn network_config(model: &ModelArgs, config: &RunConfig) -> CamnConfig {
    let mut c = if model.toy { CamnConfig::toy() } else { CamnConfig::paper() };
    config.camn.apply(&mut c);
    for m in &model.drop {
        if !c.drop.contains(m) {
            c.drop.push(*m);
        }
    }
    c
}

/// Network config recorded in the `manifest.json` next to a checkpoint, if any.
fn manifest_config(checkpoint: &Path) -> Result<Option<CamnConfig>> {
    let path = checkpoint.with_file_name("manifest.json");
    if !path.exists() {
        return Ok(None);
    }
    let m = RunManifest::from_json(&read_text(&path)?).map_err(|e| CliError::parse(e.to_string()).in_file(&path))?;
    Ok(Some(m.config))
}

fn build(cfg: CamnConfig, seed: u64, checkpoint: Option<&Path>) -> Result<Camn> {
    let mut camn = Camn::new(cfg, seed)?;
    if let Some(path) = checkpoint {
        let ck = Checkpoint::from_json(&read_text(path)?).map_err(|e| CliError::from(e).in_file(path))?;
        camn.load_checkpoint(&ck).map_err(|e| CliError::from(e).in_file(path))?;
    }
    Ok(camn)
}

fn mae(a: &Tensor, b: &Tensor) -> f64 {
    let n = a.data().len().max(1);
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64
}

fn load_corpus(data: &DataArgs, cfg: &mut CamnConfig, seed: u64, config: &RunConfig) -> Result<Vec<Clip>> {
    let clips = match &data.data {
        None => toy_corpus(cfg, data.clips, data.frames, seed).1,
        Some(dir) => load_dir(dir, data.words.as_deref().or(config.camn.words.as_deref()), cfg, seed)?,
    };
    let clips = match data.crop.or(config.camn.crop) {
        Some(len) => clips.iter().flat_map(|c| c.crops(len)).collect(),
        None => clips,
    };
    if clips.is_empty() {
        return Err(CliError::mismatch("no training clips"));
    }
    Ok(clips)
}

fn beat_partition(clip: &MotionClip, path: &Path) -> Result<JointPartition> {
    let p = JointPartition::from_skeleton(clip.skeleton());
    if !p.is_beat_layout() {
        return Err(CliError::mismatch(format!(
            "{}: expected 27 body and 48 hand joints, found {} and {}",
            path.display(),
            p.body.len(),
            p.hands.len()
        )));
    }
    Ok(p)
}

/// Body and hand rotations in radians, `T×81` and `T×144`.
fn pose_tensors(clip: &MotionClip, partition: &JointPartition) -> Result<(Tensor, Tensor)> {
    let rad = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.into_iter()
            .map(|r| r.into_iter().map(f64::to_radians).collect())
            .collect()
    };
    let body = Tensor::from_rows(&rad(clip.rotations_of(&partition.body)))?;
    let hands = Tensor::from_rows(&rad(clip.rotations_of(&partition.hands)))?;
    Ok((body, hands))
}

/// Seed frames are copied verbatim; later frames take the seed's last root
/// channels and the generated joint rotations.
fn to_motion(seed: &MotionClip, p: &JointPartition, seed_len: usize, body: &Tensor, hands: &Tensor) -> Result<MotionClip> {
    let frames = body.shape()[0];
    let rest = frames - seed_len;
    let last = seed.frame(seed_len - 1).to_vec();
    let tail = MotionClip::new(seed.skeleton().to_vec(), seed.fps(), vec![last; rest])?;
    let deg = |t: &Tensor, from: usize| -> Vec<Vec<f64>> {
        let cols = t.shape()[1];
        (from..frames)
            .map(|i| t.data()[i * cols..(i + 1) * cols].iter().map(|v| v.to_degrees()).collect())
            .collect()
    };
    let mut joints = p.body.clone();
    joints.extend(&p.hands);
    let rotations: Vec<Vec<f64>> = deg(body, seed_len)
        .into_iter()
        .zip(deg(hands, seed_len))
        .map(|(mut b, h)| {
            b.extend(h);
            b
        })
        .collect();
    let tail = tail.with_rotations(&joints, &rotations)?;
    let mut data = seed.slice(0, seed_len).as_flat().to_vec();
    data.extend_from_slice(tail.as_flat());
    Ok(MotionClip::from_flat(seed.skeleton().to_vec(), seed.fps(), data)?)
}

fn load_audio_windows(path: &Path, cfg: &CamnConfig, fps: f64, frames: usize) -> Result<Tensor> {
    let rate = (fps * cfg.samples_per_frame as f64).round() as u32;
    let audio = read_audio(&read_bytes(path)?)
        .and_then(|a| a.downmix_resample(rate))
        .map_err(|e| CliError::from(e).in_file(path))?;
    let windows = frame_audio(audio.channel(0), rate, fps, frames, cfg.samples_per_frame);
    Ok(Tensor::from_rows(&windows)?)
}

fn neutral_conditioning(
    cfg: &CamnConfig,
    frames: usize,
    speaker: usize,
    emotion: usize,
    audio: Option<Tensor>,
) -> Result<Conditioning> {
    let cond = Conditioning {
        words: Tensor::zeros(&[frames, cfg.word_dim]),
        speaker,
        emotions: vec![emotion; frames],
        audio: audio.unwrap_or_else(|| Tensor::zeros(&[frames, cfg.samples_per_frame])),
        face: Tensor::zeros(&[frames, cfg.face_dim]),
    };
    cond.validate(cfg)?;
    Ok(cond)
}

/// Speaker id from a leading `N_` in the file stem (1-based), else 0.
fn speaker_of(stem: &str, speakers: usize) -> usize {
    stem.split('_')
        .next()
        .and_then(|s| s.parse::<usize>().ok())
        .map_or(0, |n| n.saturating_sub(1) % speakers.max(1))
}

fn fit_rows(mut rows: Vec<Vec<f64>>, frames: usize, cols: usize) -> Vec<Vec<f64>> {
    let pad = rows.last().cloned().unwrap_or_else(|| vec![0.0; cols]);
    rows.resize(frames, pad);
    rows
}

fn load_dir(dir: &Path, words: Option<&Path>, cfg: &mut CamnConfig, seed: u64) -> Result<Vec<Clip>> {
    let mut stems: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::other(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| super::extension(p) == "bvh")
        .collect();
    stems.sort();
    let sibling = |bvh: &Path, ext: &str| -> Option<PathBuf> {
        let p = bvh.with_extension(ext);
        p.exists().then_some(p)
    };

    let mut transcripts = Vec::with_capacity(stems.len());
    for bvh in &stems {
        let t = match sibling(bvh, "TextGrid") {
            Some(p) => parse_textgrid(&read_text(&p)?).map_err(|e| CliError::from(e).in_file(&p))?,
            None => AlignedTranscript::default(),
        };
        transcripts.push(t);
    }
    let table = match words {
        Some(path) => WordTable::parse(&read_text(path)?).map_err(|e| CliError::from(e).in_file(path))?,
        None => {
            let vocab: BTreeSet<String> = transcripts
                .iter()
                .flat_map(|t| t.entries().iter().filter_map(|e| e.token.word().map(str::to_lowercase)))
                .collect();
            let vocab: Vec<String> = vocab.into_iter().collect();
            log::info!("no word vectors given; using random vectors for {} words", vocab.len());
            WordTable::random(&vocab, cfg.word_dim, seed)
        }
    };
    cfg.word_dim = table.dim();

    let mut clips = Vec::with_capacity(stems.len());
    for (bvh, transcript) in stems.iter().zip(&transcripts) {
        let motion = load_bvh(bvh)?;
        let partition = beat_partition(&motion, bvh)?;
        let fps = motion.fps();
        let frames = motion.num_frames();
        let (body, hands) = pose_tensors(&motion, &partition)?;
        let audio = match sibling(bvh, "wav") {
            Some(p) => load_audio_windows(&p, cfg, fps, frames)?,
            None => Tensor::zeros(&[frames, cfg.samples_per_frame]),
        };
        let face = match sibling(bvh, "json") {
            Some(p) => {
                let track = parse_blendshapes(&read_text(&p)?)
                    .and_then(|b| b.track.resample(fps))
                    .map_err(|e| CliError::from(e).in_file(&p))?;
                let rows: Vec<Vec<f64>> = (0..track.num_frames()).map(|t| track.frame(t).to_vec()).collect();
                Tensor::from_rows(&fit_rows(rows, frames, track.num_channels()))?
            }
            None => Tensor::zeros(&[frames, cfg.face_dim]),
        };
        let relevance = match sibling(bvh, "scores.csv") {
            Some(p) => {
                let mut s = load_scores(&p, fps)?.scores().to_vec();
                if s.len() != frames {
                    log::warn!("{}: {} scores for {frames} frames; padding with zeros", p.display(), s.len());
                }
                s.resize(frames, 0.0);
                s
            }
            None => vec![1.0; frames],
        };
        let stem = bvh.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let clip = Clip {
            cond: Conditioning {
                words: table.embed(&frame_words(transcript, fps, frames)),
                speaker: speaker_of(stem, cfg.speakers),
                emotions: vec![0; frames],
                audio,
                face,
            },
            body,
            hands,
            relevance,
        };
        clip.validate(cfg).map_err(|e| CliError::from(e).in_file(bvh))?;
        clips.push(clip);
    }
    Ok(clips)
}
