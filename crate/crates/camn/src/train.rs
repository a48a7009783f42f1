use ndiff::{Adam, AdamConfig, Checkpoint, GradcheckReport, Graph, ParamStore, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{toy_corpus, Clip, Conditioning};
use crate::loss::{adversarial_loss, discriminator_loss, reconstruction_loss, total_loss};
use crate::model::{Discriminator, Generator, GestureOutput};
use crate::{CamnConfig, CamnError, Modality, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub step: usize,
    pub generator: f64,
    pub reconstruction: f64,
    pub adversarial: f64,
    pub discriminator: f64,
    pub lambda_mean: f64,
}

/// Training record written next to checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: CamnConfig,
    pub seed: u64,
    pub losses: Vec<StepLosses>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<RunManifest> {
        serde_json::from_str(text).map_err(|e| CamnError::Input(e.to_string()))
    }

    /// `step,generator,reconstruction,adversarial,discriminator,lambda_mean`.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("step,generator,reconstruction,adversarial,discriminator,lambda_mean\n");
        for l in &self.losses {
            out.push_str(&format!(
                "{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6}\n",
                l.step, l.generator, l.reconstruction, l.adversarial, l.discriminator, l.lambda_mean
            ));
        }
        out
    }
}

/// Generator objective for a batch plus the generated poses, detached.
pub(crate) struct GeneratorPass {
    pub loss: Var,
    pub rec: f64,
    pub adv: f64,
    pub lambda_mean: f64,
    pub fakes: Vec<(Tensor, Tensor)>,
}

/// Generator, discriminator, their parameters and optimizer state.
#[derive(Debug, Clone)]
pub struct Camn {
    config: CamnConfig,
    seed: u64,
    generator: Generator,
    discriminator: Discriminator,
    gen_params: ParamStore,
    disc_params: ParamStore,
    gen_opt: Adam,
    disc_opt: Adam,
    losses: Vec<StepLosses>,
}

impl Camn {
    pub fn new(config: CamnConfig, seed: u64) -> Result<Camn> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gen_params = ParamStore::new("generator");
        let generator = Generator::new(&config, &mut gen_params, &mut rng)?;
        let mut disc_params = ParamStore::new("discriminator");
        let discriminator = Discriminator::new(&config, &mut disc_params, &mut rng);
        let adam = AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        };
        Ok(Camn {
            gen_opt: Adam::new(&gen_params, adam),
            disc_opt: Adam::new(&disc_params, adam),
            config,
            seed,
            generator,
            discriminator,
            gen_params,
            disc_params,
            losses: Vec::new(),
        })
    }

    pub fn config(&self) -> &CamnConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.discriminator
    }

    pub fn generator_params(&self) -> &ParamStore {
        &self.gen_params
    }

    pub fn discriminator_params(&self) -> &ParamStore {
        &self.disc_params
    }

    pub fn losses(&self) -> &[StepLosses] {
        &self.losses
    }

    pub fn manifest(&self) -> RunManifest {
        RunManifest {
            config: self.config.clone(),
            seed: self.seed,
            losses: self.losses.clone(),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_stores(self.seed, &[&self.gen_params, &self.disc_params])
    }

    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        ck.load_into(&mut self.gen_params)?;
        ck.load_into(&mut self.disc_params)?;
        Ok(())
    }

    /// Teacher-forced outputs for a clip with known poses.
    pub fn forward(&self, clip: &Clip) -> Result<GestureOutput> {
        clip.validate(&self.config)?;
        let mut g = Graph::new();
        let (b, h, f) = self
            .generator
            .forward(&mut g, &self.gen_params, &clip.cond, &clip.body, &clip.hands)?;
        Ok(GestureOutput {
            body: g.value(b).clone(),
            hands: g.value(h).clone(),
            fused: g.value(f).clone(),
        })
    }

    pub fn synthesize(&self, cond: &Conditioning, seed_body: &Tensor, seed_hands: &Tensor) -> Result<GestureOutput> {
        self.generator.synthesize(&self.gen_params, cond, seed_body, seed_hands)
    }

    fn check_batch(&self, batch: &[Clip]) -> Result<()> {
        if batch.is_empty() {
            return Err(CamnError::Input("empty batch".into()));
        }
        batch.iter().try_for_each(|c| c.validate(&self.config))
    }

    fn lambda_mean(&self, batch: &[Clip]) -> f64 {
        if self.config.drops(Modality::Semantic) {
            return 1.0;
        }
        let n: usize = batch.iter().map(|c| c.relevance.len()).sum();
        batch.iter().flat_map(|c| &c.relevance).sum::<f64>() / n as f64
    }

    pub(crate) fn generator_pass(
        &self,
        g: &mut Graph,
        gen: &ParamStore,
        batch: &[Clip],
    ) -> ndiff::Result<GeneratorPass> {
        let c = &self.config;
        let mut recs = Vec::with_capacity(batch.len());
        let mut logits = Vec::with_capacity(batch.len());
        let mut fakes = Vec::with_capacity(batch.len());
        for clip in batch {
            let (body, hands, _) = self.generator.forward(g, gen, &clip.cond, &clip.body, &clip.hands)?;
            let tb = g.constant(clip.body.clone());
            let th = g.constant(clip.hands.clone());
            recs.push(reconstruction_loss(g, body, tb, hands, th, c.alpha)?);
            logits.push(self.discriminator.logit(g, &self.disc_params, body, hands)?);
            fakes.push((g.value(body).clone(), g.value(hands).clone()));
        }
        let recs = g.concat_rows(&recs)?;
        let rec = g.mean(recs)?;
        let logits = g.concat_rows(&logits)?;
        let adv = adversarial_loss(g, logits)?;
        let lambda_mean = self.lambda_mean(batch);
        let loss = total_loss(g, rec, adv, lambda_mean, c.beta0, c.beta1)?;
        Ok(GeneratorPass {
            loss,
            rec: g.value(rec).item(),
            adv: g.value(adv).item(),
            lambda_mean,
            fakes,
        })
    }

    /// Generator objective on `batch` with the current parameters.
    pub fn generator_loss(&self, batch: &[Clip]) -> Result<f64> {
        self.check_batch(batch)?;
        let mut g = Graph::new();
        let pass = self.generator_pass(&mut g, &self.gen_params, batch)?;
        Ok(g.value(pass.loss).item())
    }

    fn discriminator_objective(
        &self,
        g: &mut Graph,
        batch: &[Clip],
        fakes: &[(Tensor, Tensor)],
    ) -> ndiff::Result<Var> {
        let mut real = Vec::with_capacity(batch.len());
        let mut fake = Vec::with_capacity(batch.len());
        for (clip, (fb, fh)) in batch.iter().zip(fakes) {
            let rb = g.constant(clip.body.clone());
            let rh = g.constant(clip.hands.clone());
            real.push(self.discriminator.logit(g, &self.disc_params, rb, rh)?);
            let fb = g.constant(fb.clone());
            let fh = g.constant(fh.clone());
            fake.push(self.discriminator.logit(g, &self.disc_params, fb, fh)?);
        }
        let real = g.concat_rows(&real)?;
        let fake = g.concat_rows(&fake)?;
        discriminator_loss(g, real, fake)
    }

    /// One generator update followed by one discriminator update on the
    /// generator's (detached) outputs from the same pass.
    pub fn train_step(&mut self, batch: &[Clip]) -> Result<StepLosses> {
        self.check_batch(batch)?;
        let mut g = Graph::new();
        let pass = self.generator_pass(&mut g, &self.gen_params, batch)?;
        let generator = g.value(pass.loss).item();
        let grads = g.backward(pass.loss)?;
        let grads = grads.for_store(&self.gen_params);
        self.gen_opt.step(&mut self.gen_params, &grads);

        let mut dg = Graph::new();
        let d_loss = self.discriminator_objective(&mut dg, batch, &pass.fakes)?;
        let discriminator = dg.value(d_loss).item();
        if !self.config.freeze_discriminator {
            let grads = dg.backward(d_loss)?;
            let grads = grads.for_store(&self.disc_params);
            self.disc_opt.step(&mut self.disc_params, &grads);
        }
        let losses = StepLosses {
            step: self.losses.len(),
            generator,
            reconstruction: pass.rec,
            adversarial: pass.adv,
            discriminator,
            lambda_mean: pass.lambda_mean,
        };
        if !losses.generator.is_finite() || !losses.discriminator.is_finite() {
            return Err(CamnError::Numeric(ndiff::NdError::NonFinite("loss")));
        }
        log::debug!(
            "step {} generator {:.4} discriminator {:.4}",
            losses.step,
            losses.generator,
            losses.discriminator
        );
        self.losses.push(losses);
        Ok(losses)
    }

    /// `steps` updates cycling through `clips` in order, `batch_size` at a
    /// time.
    pub fn train(&mut self, clips: &[Clip], steps: usize) -> Result<Vec<StepLosses>> {
        self.check_batch(clips)?;
        let b = self.config.batch_size.min(clips.len());
        let mut out = Vec::with_capacity(steps);
        for s in 0..steps {
            let start = (s * b) % clips.len();
            let batch: Vec<Clip> = (0..b).map(|k| clips[(start + k) % clips.len()].clone()).collect();
            out.push(self.train_step(&batch)?);
        }
        Ok(out)
    }
}

/// Compares back-propagated generator-loss gradients with central
/// differences on `samples` randomly chosen generator parameters, using one
/// synthetic clip of `frames` frames.
pub fn generator_gradcheck(config: &CamnConfig, frames: usize, samples: usize, seed: u64) -> Result<GradcheckReport> {
    let camn = Camn::new(config.clone(), seed)?;
    let (_, clips) = toy_corpus(config, 1, frames, seed);
    camn.check_batch(&clips)?;
    let mut g = Graph::new();
    let pass = camn.generator_pass(&mut g, &camn.gen_params, &clips)?;
    let analytic = g.backward(pass.loss)?.for_store(&camn.gen_params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let report = ndiff::gradcheck(&camn.gen_params, &analytic, samples, &mut rng, |store| {
        let mut g = Graph::new();
        let pass = camn.generator_pass(&mut g, store, &clips)?;
        Ok(g.value(pass.loss).item())
    })?;
    Ok(report)
}
