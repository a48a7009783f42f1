use super::{BlendshapeTrack, MotionClip, MotionError, Result};

/// Frame-rate conversion for per-frame channel data.
pub trait Resample: Sized {
    fn fps(&self) -> f64;

    /// Integer-ratio downsampling keeps every k-th frame starting at 0; any other
    /// ratio interpolates each channel linearly at the target timestamps.
    fn resample(&self, target_fps: f64) -> Result<Self>;
}

/// Returns the decimation step when `source / target` is a whole number.
fn integer_ratio(source: f64, target: f64) -> Option<usize> {
    let ratio = source / target;
    let k = ratio.round();
    ((ratio - k).abs() < 1e-9 && k >= 1.0).then_some(k as usize)
}

/// Resamples `frames` (`T` rows of `channels` values, flattened) from `source` to `target` fps.
pub(crate) fn resample_rows(data: &[f64], channels: usize, source: f64, target: f64) -> Result<Vec<f64>> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(MotionError::Invalid(format!("target fps must be positive, got {target}")));
    }
    let frames = if channels == 0 { 0 } else { data.len() / channels };
    if frames == 0 {
        return Err(MotionError::Invalid("cannot resample an empty clip".into()));
    }
    let row = |t: usize| &data[t * channels..(t + 1) * channels];

    if let Some(k) = integer_ratio(source, target) {
        return Ok((0..frames).step_by(k).flat_map(|t| row(t).iter().copied()).collect());
    }

    let duration = (frames - 1) as f64 / source;
    let out_frames = (duration * target + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(out_frames * channels);
    for i in 0..out_frames {
        let pos = i as f64 * source / target;
        let lo = (pos.floor() as usize).min(frames - 1);
        let hi = (lo + 1).min(frames - 1);
        let w = (pos - lo as f64).clamp(0.0, 1.0);
        out.extend(
            row(lo)
                .iter()
                .zip(row(hi))
                .map(|(&a, &b)| a + (b - a) * w),
        );
    }
    Ok(out)
}

impl Resample for MotionClip {
    fn fps(&self) -> f64 {
        MotionClip::fps(self)
    }

    fn resample(&self, target_fps: f64) -> Result<Self> {
        let data = resample_rows(self.as_flat(), self.num_channels(), self.fps(), target_fps)?;
        MotionClip::from_flat(self.skeleton().to_vec(), target_fps, data)
    }
}

impl Resample for BlendshapeTrack {
    fn fps(&self) -> f64 {
        BlendshapeTrack::fps(self)
    }

    fn resample(&self, target_fps: f64) -> Result<Self> {
        let data = resample_rows(self.as_flat(), self.num_channels(), self.fps(), target_fps)?;
        BlendshapeTrack::from_flat(target_fps, data)
    }
}
