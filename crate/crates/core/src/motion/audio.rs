use std::io::Cursor;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{MotionError, Result};

/// PCM audio with per-channel samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioTrack {
    sample_rate: u32,
    channels: Vec<Vec<f64>>,
}

impl AudioTrack {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<AudioTrack> {
        if sample_rate == 0 {
            return Err(MotionError::Invalid("sample rate must be positive".into()));
        }
        if channels.is_empty() || channels.len() > 2 {
            return Err(MotionError::Invalid(format!(
                "expected 1 or 2 channels, got {}",
                channels.len()
            )));
        }
        if channels.iter().any(|c| c.len() != channels[0].len()) {
            return Err(MotionError::Invalid("channels differ in length".into()));
        }
        Ok(AudioTrack {
            sample_rate,
            channels,
        })
    }

    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Result<AudioTrack> {
        Self::new(sample_rate, vec![samples])
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    /// Averages all channels into one.
    pub fn downmix(&self) -> AudioTrack {
        if self.channels.len() == 1 {
            return self.clone();
        }
        let n = self.channels.len() as f64;
        let samples = (0..self.len())
            .map(|i| self.channels.iter().map(|c| c[i]).sum::<f64>() / n)
            .collect();
        AudioTrack {
            sample_rate: self.sample_rate,
            channels: vec![samples],
        }
    }

    /// Linear-interpolation resampling; output length is `floor(len · target / rate)`.
    pub fn resample(&self, target_rate: u32) -> Result<AudioTrack> {
        if target_rate == 0 {
            return Err(MotionError::Invalid("target sample rate must be positive".into()));
        }
        if target_rate == self.sample_rate {
            return Ok(self.clone());
        }
        let out_len = (self.len() as u64 * target_rate as u64 / self.sample_rate as u64) as usize;
        let step = self.sample_rate as f64 / target_rate as f64;
        let channels = self
            .channels
            .iter()
            .map(|src| {
                (0..out_len)
                    .map(|i| {
                        let pos = i as f64 * step;
                        let lo = (pos.floor() as usize).min(src.len() - 1);
                        let hi = (lo + 1).min(src.len() - 1);
                        let w = pos - lo as f64;
                        src[lo] + (src[hi] - src[lo]) * w
                    })
                    .collect()
            })
            .collect();
        Ok(AudioTrack {
            sample_rate: target_rate,
            channels,
        })
    }

    pub fn downmix_resample(&self, target_rate: u32) -> Result<AudioTrack> {
        self.downmix().resample(target_rate)
    }
}

fn map_hound(err: hound::Error) -> MotionError {
    match err {
        hound::Error::IoError(e)
            if e.kind() == std::io::ErrorKind::UnexpectedEof || e.to_string().contains("enough bytes") =>
        {
            MotionError::TruncatedAudio
        }
        hound::Error::IoError(e) => MotionError::UnsupportedAudio(e.to_string()),
        hound::Error::FormatError(msg) if msg.contains("enough bytes") => MotionError::TruncatedAudio,
        hound::Error::FormatError(msg) => MotionError::UnsupportedAudio(msg.to_string()),
        hound::Error::Unsupported => MotionError::UnsupportedAudio("codec not supported".into()),
        other => MotionError::UnsupportedAudio(other.to_string()),
    }
}

/// Reads a 16-bit integer or 32-bit float PCM WAV file.
pub fn read_audio(bytes: &[u8]) -> Result<AudioTrack> {
    let reader = WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    let spec = reader.spec();
    let expected = reader.len() as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| (v as f64).clamp(-1.0, 1.0)))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (format, bits) => {
            return Err(MotionError::UnsupportedAudio(format!("{bits}-bit {format:?} samples")));
        }
    };
    if interleaved.len() < expected {
        return Err(MotionError::TruncatedAudio);
    }
    let n = spec.channels as usize;
    if n == 0 || n > 2 {
        return Err(MotionError::UnsupportedAudio(format!("{n} channels")));
    }
    let channels = (0..n)
        .map(|c| interleaved.iter().skip(c).step_by(n).copied().collect())
        .collect();
    AudioTrack::new(spec.sample_rate, channels)
}

/// Writes 16-bit PCM.
pub fn write_wav(track: &AudioTrack) -> Vec<u8> {
    let spec = WavSpec {
        channels: track.num_channels() as u16,
        sample_rate: track.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = WavWriter::new(&mut cursor, spec).expect("in-memory writer");
        for i in 0..track.len() {
            for c in 0..track.num_channels() {
                let v = (track.channel(c)[i].clamp(-1.0, 1.0) * 32767.0).round() as i16;
                writer.write_sample(v).expect("in-memory write");
            }
        }
        writer.finalize().expect("in-memory finalize");
    }
    cursor.into_inner()
}

/// Cuts a mono signal into `frames` windows of `samples_per_frame` samples, one
/// per motion frame at `fps`, zero-padded past the end of the signal.
pub fn frame_audio(samples: &[f64], sample_rate: u32, fps: f64, frames: usize, samples_per_frame: usize) -> Vec<Vec<f64>> {
    (0..frames)
        .map(|i| {
            let start = (i as f64 * sample_rate as f64 / fps).round() as usize;
            (start..start + samples_per_frame)
                .map(|k| samples.get(k).copied().unwrap_or(0.0))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stereo_tone(rate: u32, seconds: f64) -> AudioTrack {
        let n = (rate as f64 * seconds) as usize;
        let left = (0..n).map(|i| (i as f64 * 0.01).sin() * 0.5).collect();
        let right = (0..n).map(|i| (i as f64 * 0.02).cos() * 0.25).collect();
        AudioTrack::new(rate, vec![left, right]).unwrap()
    }

    #[test]
    fn one_second_48k_stereo() {
        let bytes = write_wav(&stereo_tone(48_000, 1.0));
        let track = read_audio(&bytes).unwrap();
        assert_eq!(track.sample_rate(), 48_000);
        assert_eq!(track.num_channels(), 2);
        assert_eq!(track.len(), 48_000);
        assert!(track.channel(0).iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn float_wav_is_read() {
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut cursor = Cursor::new(Vec::new());
        {
            let mut w = WavWriter::new(&mut cursor, spec).unwrap();
            for v in [0.0f32, 0.5, -0.25, 1.5] {
                w.write_sample(v).unwrap();
            }
            w.finalize().unwrap();
        }
        let track = read_audio(&cursor.into_inner()).unwrap();
        assert_eq!(track.channel(0), &[0.0, 0.5, -0.25, 1.0]);
    }

    #[test]
    fn downmix_identical_channels() {
        let mono: Vec<f64> = (0..100).map(|i| (i as f64 / 7.0).sin()).collect();
        let stereo = AudioTrack::new(16_000, vec![mono.clone(), mono.clone()]).unwrap();
        assert_eq!(stereo.downmix().channel(0), mono.as_slice());
    }

    #[test]
    fn halves_48k_to_24k() {
        let out = stereo_tone(48_000, 1.0).downmix_resample(24_000).unwrap();
        assert_eq!(out.len(), 24_000);
        assert_eq!(out.num_channels(), 1);
    }

    #[test]
    fn truncated_and_unsupported() {
        let bytes = write_wav(&stereo_tone(8000, 0.1));
        assert!(matches!(
            read_audio(&bytes[..bytes.len() - 101]),
            Err(MotionError::TruncatedAudio)
        ));
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut cursor = Cursor::new(Vec::new());
        {
            let mut w = WavWriter::new(&mut cursor, spec).unwrap();
            w.write_sample(3i8).unwrap();
            w.finalize().unwrap();
        }
        assert!(matches!(
            read_audio(&cursor.into_inner()),
            Err(MotionError::UnsupportedAudio(_))
        ));
        assert!(read_audio(b"not a wav").is_err());
    }

    #[test]
    fn framing_pads_with_zeros() {
        let samples: Vec<f64> = (0..10).map(f64::from).collect();
        let frames = frame_audio(&samples, 10, 2.0, 3, 5);
        assert_eq!(frames[0], vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(frames[1], vec![5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(frames[2], vec![0.0; 5]);
    }
}
