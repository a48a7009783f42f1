//! Residual stacks of dilated temporal convolutions.

use ndiff::{Conv1d, Dense, Graph, ParamStore, Var};
use rand::Rng;

use crate::{CamnError, Result};

/// Negative slope of every leaky activation in the network.
pub const LEAK: f64 = 0.2;

const KERNEL: usize = 3;

/// Dilations for `layers` kernel-3 convolutions whose receptive radii sum to
/// exactly `radius`: doubling from 1 while there is room, every later layer
/// keeping at least dilation 1, any remainder going to the last layer.
pub fn dilation_schedule(layers: usize, radius: usize) -> Result<Vec<usize>> {
    if layers == 0 || radius < layers {
        return Err(CamnError::Config(format!(
            "cannot spread radius {radius} over {layers} layers"
        )));
    }
    let mut out = Vec::with_capacity(layers);
    let mut used = 0;
    for l in 0..layers {
        let room = radius - used - (layers - l - 1);
        let d = (1usize << l.min(40)).min(room);
        out.push(d);
        used += d;
    }
    *out.last_mut().expect("at least one layer") += radius - used;
    Ok(out)
}

#[derive(Debug, Clone)]
struct Layer {
    conv: Conv1d,
    /// 1×1 projection when the channel count changes.
    skip: Option<Dense>,
}

/// `h ← leaky(conv(h)) + skip(h)` per layer, same length in and out.
#[derive(Debug, Clone)]
pub struct Tcn {
    layers: Vec<Layer>,
}

impl Tcn {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        layers: usize,
        radius: usize,
        rng: &mut impl Rng,
    ) -> Result<Tcn> {
        let dilations = dilation_schedule(layers, radius)?;
        let layers = dilations
            .into_iter()
            .enumerate()
            .map(|(l, d)| {
                let cin = if l == 0 { input } else { output };
                let conv = Conv1d::new(store, &format!("{name}.{l}.conv"), cin, output, KERNEL, d, rng);
                let skip = (cin != output).then(|| Dense::new(store, &format!("{name}.{l}.skip"), cin, output, rng));
                Layer { conv, skip }
            })
            .collect();
        Ok(Tcn { layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dilations(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.conv.dilation).collect()
    }

    /// Frames on each side that can influence an output frame.
    pub fn radius(&self) -> usize {
        self.layers.iter().map(|l| l.conv.radius()).sum()
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> ndiff::Result<Var> {
        let mut h = x;
        for layer in &self.layers {
            let c = layer.conv.forward(g, store, h)?;
            let a = g.leaky_relu(c, LEAK)?;
            let r = match &layer.skip {
                Some(p) => p.forward(g, store, h)?,
                None => h,
            };
            h = g.add(a, r)?;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndiff::Tensor;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedules_for_the_encoder_depths() {
        assert_eq!(dilation_schedule(8, 32).unwrap(), vec![1, 2, 4, 8, 14, 1, 1, 1]);
        assert_eq!(dilation_schedule(4, 32).unwrap(), vec![1, 2, 4, 25]);
        assert_eq!(
            dilation_schedule(12, 32).unwrap(),
            vec![1, 2, 4, 8, 10, 1, 1, 1, 1, 1, 1, 1]
        );
        assert!(dilation_schedule(5, 4).is_err());
    }

    proptest! {
        #[test]
        fn schedule_sums_to_radius(layers in 1usize..20, extra in 0usize..100) {
            let radius = layers + extra;
            let d = dilation_schedule(layers, radius).unwrap();
            prop_assert_eq!(d.len(), layers);
            prop_assert!(d.iter().all(|&x| x >= 1));
            prop_assert_eq!(d.iter().sum::<usize>(), radius);
        }
    }

    #[test]
    fn constant_input_gives_constant_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new("t");
        let tcn = Tcn::new(&mut store, "tcn", 2, 3, 3, 4, &mut rng).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor::full(&[20, 2], 0.7));
        let y = tcn.forward(&mut g, &store, x).unwrap();
        let y = g.value(y);
        // Frames at least `radius` away from both ends never see padding.
        for t in 5..15 {
            for c in 0..3 {
                assert!((y.get(t, c) - y.get(4, c)).abs() < 1e-12);
            }
        }
    }
}
