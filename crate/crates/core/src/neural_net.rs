//! Dense feedforward network approximating the action-value function.
//!
//! Hidden layers use a logistic sigmoid, the output layer is linear. The
//! training loss for one sample is `½ (target − q[a])²` on the taken action
//! `a` only; momentum gradient descent updates the parameters.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Layer widths of the cyber player's network.
pub const CP_LAYER_SIZES: [usize; 4] = [4, 64, 32, 9];

const CHECKPOINT_MAGIC: &[u8; 4] = b"MGQN";
const CHECKPOINT_VERSION: u32 = 1;

// Largest double below one, keeps sigmoid outputs strictly inside (0, 1).
const SIGMOID_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Linear,
}

impl Activation {
    fn tag(self) -> u8 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Linear => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Sigmoid),
            1 => Ok(Activation::Linear),
            t => Err(Error::Checkpoint(format!("unknown activation tag {t}"))),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, SIGMOID_CEIL)
}

/// One dense layer; `weights` is `n_out × n_in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    n_in: usize,
    n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn n_in(&self) -> usize {
        self.n_in
    }
    pub fn n_out(&self) -> usize {
        self.n_out
    }
    pub fn activation(&self) -> Activation {
        self.activation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Layer>,
}

/// Scratch buffers for allocation-free forward/backward passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    // activations[0] is the input, activations[l + 1] the output of layer l
    activations: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

/// Parameter-shaped buffer: gradients or momentum velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for (w, b) in &mut self.layers {
            w.fill(0.0);
            b.fill(0.0);
        }
    }

    /// Flattened view in the same order as [`QNetwork::params`].
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    fn matches(&self, net: &QNetwork) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|((w, b), l)| w.len() == l.weights.len() && b.len() == l.biases.len())
    }
}

/// Momentum gradient-descent state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStep {
    learning_rate: f64,
    momentum: f64,
    velocity: Gradients,
}

impl TrainStep {
    pub fn new(net: &QNetwork, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(Error::param("learning_rate", format!("must be non-negative, got {learning_rate}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::param("momentum", format!("must lie in [0, 1), got {momentum}")));
        }
        Ok(Self {
            learning_rate,
            momentum,
            velocity: Gradients::zeros_like(net),
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn velocity(&self) -> &Gradients {
        &self.velocity
    }
}

impl QNetwork {
    /// Random network with Glorot-uniform weights and zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    /// All-zero network of the given widths.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::param("layer sizes", format!("{sizes:?}")));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer {
                n_in: w[0],
                n_out: w[1],
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
                activation: if i == last {
                    Activation::Linear
                } else {
                    Activation::Sigmoid
                },
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].n_in)
            .chain(self.layers.iter().map(|l| l.n_out))
            .collect()
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Layer by layer: weights then biases.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    fn same_architecture(&self, other: &QNetwork) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.n_in == b.n_in && a.n_out == b.n_out && a.activation == b.activation)
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            activations: self.sizes().into_iter().map(|n| vec![0.0; n]).collect(),
            deltas: self.layers.iter().map(|l| vec![0.0; l.n_out]).collect(),
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                got: input.len(),
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { term: "network input" });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut ws = self.workspace();
        Ok(self.forward_in(input, &mut ws).to_vec())
    }

    /// Forward pass reusing `ws`; the input length must already be checked.
    pub fn forward_in<'w>(&self, input: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        ws.activations[0].copy_from_slice(input);
        for (l, layer) in self.layers.iter().enumerate() {
            let (prev, next) = ws.activations.split_at_mut(l + 1);
            let x = &prev[l];
            let out = &mut next[0];
            for (o, (row, b)) in out
                .iter_mut()
                .zip(layer.weights.chunks_exact(layer.n_in).zip(&layer.biases))
            {
                let z = row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi);
                *o = match layer.activation {
                    Activation::Sigmoid => sigmoid(z),
                    Activation::Linear => z,
                };
            }
        }
        &ws.activations[self.layers.len()]
    }

    /// Gradient of `½ (target[action] − q[action])²` with respect to every
    /// parameter. `target` entries other than `action` are ignored.
    pub fn backward(&self, input: &[f64], target: &[f64], action: usize) -> Result<Gradients> {
        self.check_input(input)?;
        if target.len() != self.n_outputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_outputs(),
                got: target.len(),
            });
        }
        if action >= self.n_outputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_outputs(),
                got: action,
            });
        }
        if !target[action].is_finite() {
            return Err(Error::NonFinite { term: "target" });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut ws = self.workspace();
        self.accumulate_gradient(input, target[action], action, 1.0, &mut grads, &mut ws);
        Ok(grads)
    }

    /// Adds `scale · ∇ ½ (target − q[action])²` into `grads` and returns the
    /// unscaled sample loss. Shapes must already be validated.
    pub fn accumulate_gradient(
        &self,
        input: &[f64],
        target: f64,
        action: usize,
        scale: f64,
        grads: &mut Gradients,
        ws: &mut Workspace,
    ) -> f64 {
        let q = self.forward_in(input, ws)[action];
        let err = q - target;
        let last = self.layers.len() - 1;
        let Workspace {
            activations,
            deltas,
        } = ws;

        deltas[last].fill(0.0);
        deltas[last][action] = err;

        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let x = &activations[l];
            let (gw, gb) = &mut grads.layers[l];
            for (o, &d) in deltas[l].iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let sd = scale * d;
                gb[o] += sd;
                for (g, xi) in gw[o * layer.n_in..(o + 1) * layer.n_in].iter_mut().zip(x) {
                    *g += sd * xi;
                }
            }
            if l == 0 {
                break;
            }
            // δ_{l-1} = (Wᵀ δ_l) ⊙ σ'(z_{l-1}); all hidden layers are sigmoid
            let (lower, upper) = deltas.split_at_mut(l);
            let below = &mut lower[l - 1];
            below.fill(0.0);
            for (o, &d) in upper[0].iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (b, w) in below.iter_mut().zip(&layer.weights[o * layer.n_in..(o + 1) * layer.n_in]) {
                    *b += w * d;
                }
            }
            for (b, &h) in below.iter_mut().zip(x.iter()) {
                *b *= h * (1.0 - h);
            }
        }
        0.5 * err * err
    }

    /// `velocity ← momentum·velocity − lr·grad`, then `θ ← θ + velocity`.
    pub fn apply_update(&mut self, grads: &Gradients, ts: &mut TrainStep) -> Result<()> {
        if !grads.matches(self) || !ts.velocity.matches(self) {
            return Err(Error::ArchitectureMismatch);
        }
        let (mu, lr) = (ts.momentum, ts.learning_rate);
        for ((layer, (gw, gb)), (vw, vb)) in self
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut ts.velocity.layers)
        {
            for ((p, g), v) in layer.weights.iter_mut().zip(gw).zip(vw.iter_mut()) {
                *v = mu * *v - lr * g;
                *p += *v;
            }
            for ((p, g), v) in layer.biases.iter_mut().zip(gb).zip(vb.iter_mut()) {
                *v = mu * *v - lr * g;
                *p += *v;
            }
        }
        Ok(())
    }

    /// Copies every parameter of `self` into `dst`.
    pub fn clone_into(&self, dst: &mut QNetwork) -> Result<()> {
        if !self.same_architecture(dst) {
            return Err(Error::ArchitectureMismatch);
        }
        for (s, d) in self.layers.iter().zip(&mut dst.layers) {
            d.weights.copy_from_slice(&s.weights);
            d.biases.copy_from_slice(&s.biases);
        }
        Ok(())
    }

    /// Versioned little-endian binary dump; loading reproduces the network
    /// bit for bit.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.param_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.n_in as u32).to_le_bytes());
            out.extend_from_slice(&(l.n_out as u32).to_le_bytes());
            out.push(l.activation.tag());
            for v in l.weights.iter().chain(&l.biases) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let mut magic = [0u8; 4];
        bytes
            .read_exact(&mut magic)
            .map_err(|_| Error::Checkpoint("truncated header".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut bytes)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n_layers = read_u32(&mut bytes)? as usize;
        if n_layers == 0 || n_layers > 64 {
            return Err(Error::Checkpoint(format!("implausible layer count {n_layers}")));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let n_in = read_u32(&mut bytes)? as usize;
            let n_out = read_u32(&mut bytes)? as usize;
            let mut tag = [0u8; 1];
            bytes
                .read_exact(&mut tag)
                .map_err(|_| Error::Checkpoint("truncated layer".into()))?;
            let activation = Activation::from_tag(tag[0])?;
            let weights = (0..n_in * n_out)
                .map(|_| read_f64(&mut bytes))
                .collect::<Result<Vec<_>>>()?;
            let biases = (0..n_out)
                .map(|_| read_f64(&mut bytes))
                .collect::<Result<Vec<_>>>()?;
            layers.push(Layer {
                n_in,
                n_out,
                weights,
                biases,
                activation,
            });
        }
        if !bytes.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        if layers.windows(2).any(|w| w[0].n_out != w[1].n_in) {
            return Err(Error::Checkpoint("inconsistent layer widths".into()));
        }
        Ok(Self { layers })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Free-function form of [`QNetwork::clone_into`].
pub fn clone_into(src: &QNetwork, dst: &mut QNetwork) -> Result<()> {
    src.clone_into(dst)
}

fn read_u32(bytes: &mut &[u8]) -> Result<u32> {
    let mut buf = [0u8; 4];
    bytes
        .read_exact(&mut buf)
        .map_err(|_| Error::Checkpoint("truncated integer".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(bytes: &mut &[u8]) -> Result<f64> {
    let mut buf = [0u8; 8];
    bytes
        .read_exact(&mut buf)
        .map_err(|_| Error::Checkpoint("truncated parameter".into()))?;
    Ok(f64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn random_net(seed: u64) -> QNetwork {
        QNetwork::new(&CP_LAYER_SIZES, &mut stream(seed, &[99])).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(&CP_LAYER_SIZES).unwrap();
        assert_eq!(net.forward(&[0.3, -1.0, 2.0, 0.1]).unwrap(), vec![0.0; 9]);
    }

    #[test]
    fn output_bias_passes_through() {
        let mut net = QNetwork::zeros(&CP_LAYER_SIZES).unwrap();
        let b: Vec<f64> = (0..9).map(|i| i as f64 * 0.5 - 2.0).collect();
        net.layers_mut()[2].biases.copy_from_slice(&b);
        assert_eq!(net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), b);
    }

    #[test]
    fn layer_structure() {
        let net = random_net(0);
        assert_eq!(net.sizes(), CP_LAYER_SIZES.to_vec());
        let acts: Vec<_> = net.layers().iter().map(Layer::activation).collect();
        assert_eq!(acts, [Activation::Sigmoid, Activation::Sigmoid, Activation::Linear]);
        assert_eq!(net.param_count(), 4 * 64 + 64 + 64 * 32 + 32 + 32 * 9 + 9);
        assert!(net.layers().iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
        let limit = (6.0f64 / 68.0).sqrt();
        assert!(net.layers()[0].weights.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn dimension_errors() {
        let net = random_net(1);
        assert!(net.forward(&[0.0; 3]).is_err());
        assert!(net.forward(&[0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(net.backward(&[0.0; 4], &[0.0; 8], 0).is_err());
        assert!(net.backward(&[0.0; 4], &[0.0; 9], 9).is_err());
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let net = random_net(2);
        let x = [0.1, -0.2, 0.3, 0.05];
        let q = net.forward(&x).unwrap();
        let g = net.backward(&x, &q, 4).unwrap();
        assert!(g.iter().all(|v| v == 0.0));
    }

    #[test]
    fn masked_rows_have_no_gradient() {
        let net = random_net(3);
        let x = [0.4, 0.1, -0.7, 0.2];
        let g = net.backward(&x, &[1.0; 9], 6).unwrap();
        let (gw, gb) = &g.layers[2];
        for o in (0..9).filter(|&o| o != 6) {
            assert!(gw[o * 32..(o + 1) * 32].iter().all(|&v| v == 0.0));
            assert_eq!(gb[o], 0.0);
        }
        assert!(gw[6 * 32..7 * 32].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = random_net(4);
        let before = net.clone();
        let mut ts = TrainStep::new(&net, 0.01, 0.9).unwrap();
        net.apply_update(&Gradients::zeros_like(&before), &mut ts).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn zero_momentum_is_plain_descent() {
        let mut net = random_net(5);
        let before = net.clone();
        let x = [0.2, 0.2, -0.1, 0.0];
        let g = net.backward(&x, &[3.0; 9], 1).unwrap();
        let mut ts = TrainStep::new(&net, 0.05, 0.0).unwrap();
        net.apply_update(&g, &mut ts).unwrap();
        for ((p, p0), gi) in net.params().zip(before.params()).zip(g.iter()) {
            assert_eq!(p, p0 + -0.05 * gi);
        }
    }

    #[test]
    fn train_step_validation() {
        let net = random_net(6);
        assert!(TrainStep::new(&net, 0.1, 1.0).is_err());
        assert!(TrainStep::new(&net, -0.1, 0.5).is_err());
    }

    #[test]
    fn clone_semantics() {
        let mut src = random_net(7);
        let mut dst = random_net(8);
        src.clone_into(&mut dst).unwrap();
        let s = [0.3, -0.3, 0.9, -1.1];
        assert_eq!(src.forward(&s).unwrap(), dst.forward(&s).unwrap());
        assert_eq!(src.to_bytes(), dst.to_bytes());
        src.params_mut().for_each(|p| *p += 1.0);
        assert_ne!(src.forward(&s).unwrap(), dst.forward(&s).unwrap());
        let mut other = QNetwork::zeros(&[4, 8, 9]).unwrap();
        assert!(matches!(src.clone_into(&mut other), Err(Error::ArchitectureMismatch)));
    }

    #[test]
    fn checkpoint_round_trip_and_corruption() {
        let net = random_net(9);
        let bytes = net.to_bytes();
        let back = QNetwork::from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        let s = [0.5, 0.25, -0.125, 1.0];
        assert_eq!(
            back.forward(&s).unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            net.forward(&s).unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(QNetwork::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(QNetwork::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(QNetwork::from_bytes(&extra).is_err());
    }

    #[test]
    fn sigmoid_extremes() {
        for z in [-800.0, -100.0, -37.0, 0.0, 37.0, 100.0, 800.0] {
            let s = sigmoid(z);
            assert!(s > 0.0 && s < 1.0, "{z} -> {s}");
        }
    }

    proptest! {
        #[test]
        fn wide_inputs_stay_finite(input in prop::collection::vec(-100.0f64..100.0, 4), seed in 0u64..50) {
            let net = random_net(seed);
            let mut ws = net.workspace();
            let out = net.forward_in(&input, &mut ws).to_vec();
            prop_assert!(out.iter().all(|v| v.is_finite()));
            for hidden in &ws.activations[1..3] {
                prop_assert!(hidden.iter().all(|&h| h > 0.0 && h < 1.0));
            }
            let again = net.forward(&input).unwrap();
            prop_assert_eq!(
                out.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                again.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
