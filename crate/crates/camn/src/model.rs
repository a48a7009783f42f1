use ndiff::{BoundDense, Conv1d, Dense, Embedding, Graph, Lstm, ParamStore, Tensor, Var};
use rand::Rng;

use crate::data::Conditioning;
use crate::tcn::{Tcn, LEAK};
use crate::{CamnConfig, CamnError, Modality, Result};

/// Per-frame encoder features on a graph, each `T×z`.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    pub text: Var,
    pub id: Var,
    pub emotion: Var,
    pub audio: Var,
    pub face: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureOutput {
    /// `T×body_dim`.
    pub body: Tensor,
    /// `T×hands_dim`.
    pub hands: Tensor,
    /// `T×fused_dim`, the decoder input for every frame.
    pub fused: Tensor,
}

#[derive(Debug, Clone, Copy)]
struct Mlp {
    a: Dense,
    b: Dense,
}

impl Mlp {
    fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Mlp {
        Mlp {
            a: Dense::new(store, &format!("{name}.0"), input, hidden, rng),
            b: Dense::new(store, &format!("{name}.1"), hidden, output, rng),
        }
    }

    fn bind(&self, g: &mut Graph, store: &ParamStore) -> (BoundDense, BoundDense) {
        (self.a.bind(g, store), self.b.bind(g, store))
    }
}

fn run_mlp(g: &mut Graph, (a, b): (BoundDense, BoundDense), x: Var) -> ndiff::Result<Var> {
    let h = a.forward(g, x)?;
    let h = g.leaky_relu(h, LEAK)?;
    b.forward(g, h)
}

/// Encoders and decoders. Parameters live in a separate [`ParamStore`] so the
/// same structure can be evaluated at perturbed values.
#[derive(Debug, Clone)]
pub struct Generator {
    config: CamnConfig,
    text: Tcn,
    id: Embedding,
    emotion_table: Embedding,
    emotion: Tcn,
    audio: Tcn,
    audio_mlp: Mlp,
    face: Tcn,
    face_mlp: Mlp,
    body_lstm: Lstm,
    body_head: Mlp,
    hand_lstm: Lstm,
    hand_head: Mlp,
}

impl Generator {
    pub fn new(config: &CamnConfig, store: &mut ParamStore, rng: &mut impl Rng) -> Result<Generator> {
        config.validate()?;
        let c = config;
        let f = c.context;
        let text = Tcn::new(store, "text", c.word_dim, c.z_text, c.text_layers, f, rng)?;
        let id = Embedding::new(store, "id", c.speakers, c.z_id, rng);
        let emotion_table = Embedding::new(store, "emotion.table", c.emotions, c.z_emotion, rng);
        let emotion = Tcn::new(store, "emotion", c.z_emotion, c.z_emotion, c.emotion_layers, f, rng)?;
        let audio = Tcn::new(store, "audio", c.samples_per_frame, c.z_audio, c.audio_layers, f, rng)?;
        let audio_in = c.z_audio + c.z_text + c.z_emotion + c.z_id;
        let audio_mlp = Mlp::new(store, "audio.mlp", audio_in, c.z_audio, c.z_audio, rng);
        let face = Tcn::new(store, "face", c.face_dim, c.z_face, c.face_layers, f, rng)?;
        let face_in = c.z_face + c.z_text + c.z_emotion + c.z_id + c.z_audio;
        let face_mlp = Mlp::new(store, "face.mlp", face_in, c.z_face, c.z_face, rng);
        let body_lstm = Lstm::new(store, "body.lstm", c.fused_dim(), c.z_body, rng);
        let body_head = Mlp::new(store, "body.head", c.z_body, c.z_body, c.body_dim, rng);
        let hand_lstm = Lstm::new(store, "hands.lstm", c.fused_dim() + c.z_body, c.z_hands, rng);
        let hand_head = Mlp::new(store, "hands.head", c.z_hands, c.z_hands, c.hands_dim, rng);
        Ok(Generator {
            config: c.clone(),
            text,
            id,
            emotion_table,
            emotion,
            audio,
            audio_mlp,
            face,
            face_mlp,
            body_lstm,
            body_head,
            hand_lstm,
            hand_head,
        })
    }

    pub fn config(&self) -> &CamnConfig {
        &self.config
    }

    /// The temporal stacks in cascade order: text, emotion, audio, face.
    pub fn stacks(&self) -> [&Tcn; 4] {
        [&self.text, &self.emotion, &self.audio, &self.face]
    }

    pub fn encode_text(&self, g: &mut Graph, store: &ParamStore, words: Var) -> ndiff::Result<Var> {
        self.text.forward(g, store, words)
    }

    /// Speaker embedding repeated over `frames`.
    pub fn encode_id(&self, g: &mut Graph, store: &ParamStore, speaker: usize, frames: usize) -> ndiff::Result<Var> {
        let e = self.id.forward(g, store, &[speaker])?;
        g.broadcast_rows(e, frames)
    }

    pub fn encode_emotion(&self, g: &mut Graph, store: &ParamStore, emotions: &[usize]) -> ndiff::Result<Var> {
        let e = self.emotion_table.forward(g, store, emotions)?;
        self.emotion.forward(g, store, e)
    }

    /// Audio stack, then the earlier features joined after its last layer and
    /// refined per frame.
    pub fn encode_audio(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        audio: Var,
        text: Var,
        emotion: Var,
        id: Var,
    ) -> ndiff::Result<Var> {
        let h = self.audio.forward(g, store, audio)?;
        let joined = g.concat_cols(&[h, text, emotion, id])?;
        let mlp = self.audio_mlp.bind(g, store);
        run_mlp(g, mlp, joined)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn encode_face(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        face: Var,
        text: Var,
        emotion: Var,
        id: Var,
        audio: Var,
    ) -> ndiff::Result<Var> {
        let h = self.face.forward(g, store, face)?;
        let joined = g.concat_cols(&[h, text, emotion, id, audio])?;
        let mlp = self.face_mlp.bind(g, store);
        run_mlp(g, mlp, joined)
    }

    /// Runs the cascade. Dropped modalities contribute zeros downstream.
    pub fn encode(&self, g: &mut Graph, store: &ParamStore, cond: &Conditioning) -> ndiff::Result<Encoded> {
        let c = &self.config;
        let t = cond.frames();
        let zeros = |g: &mut Graph, width: usize| g.constant(Tensor::zeros(&[t, width]));
        let text = if c.drops(Modality::Text) {
            zeros(g, c.z_text)
        } else {
            let w = g.constant(cond.words.clone());
            self.encode_text(g, store, w)?
        };
        let id = if c.drops(Modality::Id) {
            zeros(g, c.z_id)
        } else {
            self.encode_id(g, store, cond.speaker, t)?
        };
        let emotion = if c.drops(Modality::Emotion) {
            zeros(g, c.z_emotion)
        } else {
            self.encode_emotion(g, store, &cond.emotions)?
        };
        let audio = if c.drops(Modality::Audio) {
            zeros(g, c.z_audio)
        } else {
            let a = g.constant(cond.audio.clone());
            self.encode_audio(g, store, a, text, emotion, id)?
        };
        let face = if c.drops(Modality::Face) {
            zeros(g, c.z_face)
        } else {
            let f = g.constant(cond.face.clone());
            self.encode_face(g, store, f, text, emotion, id, audio)?
        };
        Ok(Encoded {
            text,
            id,
            emotion,
            audio,
            face,
        })
    }

    /// `[z^T, z^ID, z^E, z^A, z^F]` per frame.
    pub fn condition(&self, g: &mut Graph, enc: &Encoded) -> ndiff::Result<Var> {
        g.concat_cols(&[enc.text, enc.id, enc.emotion, enc.audio, enc.face])
    }

    /// Appends the body and hand pose slots to the conditioning block.
    pub fn fuse(&self, g: &mut Graph, condition: Var, body_slot: Var, hand_slot: Var) -> ndiff::Result<Var> {
        g.concat_cols(&[condition, body_slot, hand_slot])
    }

    /// Body decoder over a whole fused sequence: returns its hidden states
    /// `z^B` and the body poses.
    pub fn decode_body(&self, g: &mut Graph, store: &ParamStore, fused: Var) -> ndiff::Result<(Var, Var)> {
        let z_b = self.body_lstm.forward_seq(g, store, fused)?;
        let head = self.body_head.bind(g, store);
        let body = run_mlp(g, head, z_b)?;
        Ok((z_b, body))
    }

    /// Hand decoder reading the fused sequence and the body decoder states.
    pub fn decode_hands(&self, g: &mut Graph, store: &ParamStore, fused: Var, z_b: Var) -> ndiff::Result<Var> {
        let input = g.concat_cols(&[fused, z_b])?;
        let z_h = self.hand_lstm.forward_seq(g, store, input)?;
        let head = self.hand_head.bind(g, store);
        run_mlp(g, head, z_h)
    }

    /// Teacher-forced pass: the pose slots of frame `i` hold the given poses of
    /// frame `i − 1`, zeros for frame 0. Returns `(body, hands, fused)`.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        cond: &Conditioning,
        body: &Tensor,
        hands: &Tensor,
    ) -> ndiff::Result<(Var, Var, Var)> {
        let enc = self.encode(g, store, cond)?;
        let condition = self.condition(g, &enc)?;
        let body_slot = g.constant(shift_down(body));
        let hand_slot = g.constant(shift_down(hands));
        let fused = self.fuse(g, condition, body_slot, hand_slot)?;
        let (z_b, body) = self.decode_body(g, store, fused)?;
        let hands = self.decode_hands(g, store, fused, z_b)?;
        Ok((body, hands, fused))
    }

    /// Autoregressive rollout for `cond.frames()` frames. Frames before the
    /// seed length copy the seed; later pose slots hold the previous output.
    pub fn synthesize(
        &self,
        store: &ParamStore,
        cond: &Conditioning,
        seed_body: &Tensor,
        seed_hands: &Tensor,
    ) -> Result<GestureOutput> {
        let c = &self.config;
        let t_out = cond.frames();
        let n = c.seed_len;
        if seed_body.shape() != [n, c.body_dim] || seed_hands.shape() != [n, c.hands_dim] {
            return Err(CamnError::SeedLength {
                needed: n,
                got: seed_body.shape()[0],
            });
        }
        if t_out < n {
            return Err(CamnError::TooShort {
                requested: t_out,
                seed: n,
            });
        }
        cond.validate(c)?;
        let mut g = Graph::new();
        let enc = self.encode(&mut g, store, cond)?;
        let condition = self.condition(&mut g, &enc)?;
        let body_lstm = self.body_lstm.bind(&mut g, store);
        let hand_lstm = self.hand_lstm.bind(&mut g, store);
        let body_head = self.body_head.bind(&mut g, store);
        let hand_head = self.hand_head.bind(&mut g, store);
        let mut body_state = body_lstm.zero_state(&mut g);
        let mut hand_state = hand_lstm.zero_state(&mut g);
        let mut body = Vec::with_capacity(t_out * c.body_dim);
        let mut hands = Vec::with_capacity(t_out * c.hands_dim);
        let mut fused = Vec::with_capacity(t_out * c.fused_dim());
        for i in 0..t_out {
            let (prev_b, prev_h) = if i == 0 {
                (vec![0.0; c.body_dim], vec![0.0; c.hands_dim])
            } else {
                (
                    body[(i - 1) * c.body_dim..i * c.body_dim].to_vec(),
                    hands[(i - 1) * c.hands_dim..i * c.hands_dim].to_vec(),
                )
            };
            let cond_row = g.slice_rows(condition, i, i + 1)?;
            let sb = g.constant(Tensor::matrix(1, c.body_dim, prev_b)?);
            let sh = g.constant(Tensor::matrix(1, c.hands_dim, prev_h)?);
            let z_m = self.fuse(&mut g, cond_row, sb, sh)?;
            let p = body_lstm.project(&mut g, z_m)?;
            body_state = body_lstm.step(&mut g, p, body_state)?;
            let b = run_mlp(&mut g, body_head, body_state.h)?;
            let hand_in = g.concat_cols(&[z_m, body_state.h])?;
            let p = hand_lstm.project(&mut g, hand_in)?;
            hand_state = hand_lstm.step(&mut g, p, hand_state)?;
            let h = run_mlp(&mut g, hand_head, hand_state.h)?;
            fused.extend_from_slice(g.value(z_m).data());
            if i < n {
                body.extend_from_slice(seed_body.row(i));
                hands.extend_from_slice(seed_hands.row(i));
            } else {
                body.extend_from_slice(g.value(b).data());
                hands.extend_from_slice(g.value(h).data());
            }
        }
        Ok(GestureOutput {
            body: Tensor::matrix(t_out, c.body_dim, body)?,
            hands: Tensor::matrix(t_out, c.hands_dim, hands)?,
            fused: Tensor::matrix(t_out, c.fused_dim(), fused)?,
        })
    }
}

/// Row `i` of the result is row `i − 1` of `x`; row 0 is zero.
pub(crate) fn shift_down(x: &Tensor) -> Tensor {
    let (t, c) = (x.rows(), x.cols());
    let mut data = vec![0.0; t * c];
    if t > 1 {
        data[c..].copy_from_slice(&x.data()[..(t - 1) * c]);
    }
    Tensor::matrix(t, c, data).expect("same shape")
}

/// Temporal-conv classifier over whole `(body, hands)` sequences. Returns one
/// logit per sequence.
#[derive(Debug, Clone)]
pub struct Discriminator {
    convs: Vec<Conv1d>,
    out: Dense,
}

impl Discriminator {
    pub fn new(config: &CamnConfig, store: &mut ParamStore, rng: &mut impl Rng) -> Discriminator {
        let input = config.body_dim + config.hands_dim;
        let ch = config.disc_channels;
        let convs = (0..4)
            .map(|l| Conv1d::new(store, &format!("conv{l}"), if l == 0 { input } else { ch }, ch, 3, 1 << l, rng))
            .collect();
        let out = Dense::new(store, "out", ch, 1, rng);
        Discriminator { convs, out }
    }

    /// `1×1` logit; the score is its sigmoid.
    pub fn logit(&self, g: &mut Graph, store: &ParamStore, body: Var, hands: Var) -> ndiff::Result<Var> {
        let mut h = g.concat_cols(&[body, hands])?;
        for conv in &self.convs {
            let c = conv.forward(g, store, h)?;
            h = g.leaky_relu(c, LEAK)?;
        }
        let pooled = g.mean_rows(h)?;
        self.out.forward(g, store, pooled)
    }

    pub fn score(&self, store: &ParamStore, body: &Tensor, hands: &Tensor) -> Result<f64> {
        let mut g = Graph::new();
        let b = g.constant(body.clone());
        let h = g.constant(hands.clone());
        let l = self.logit(&mut g, store, b, h)?;
        let s = g.sigmoid(l)?;
        Ok(g.value(s).item())
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_down_moves_rows() {
        let x = Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(shift_down(&x).data(), &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        let one = Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap();
        assert_eq!(shift_down(&one).data(), &[0.0, 0.0]);
    }
}
