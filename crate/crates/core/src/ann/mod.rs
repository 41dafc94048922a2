//! Dense feedforward network with logistic activations, trained by online
//! backpropagation on the squared error against one-hot targets.
//!
//! Weight `w[l][j][i]` connects node `i` of layer `l` to node `j` of layer
//! `l + 1`; each layer's matrix is stored row-major (one row per output node).

mod model_file;

pub use model_file::{load_model, save_model, ModelBundle, FORMAT_VERSION};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ChannelId;
use crate::preprocess::{FeatureVector, LabeledExample, RiskLabel};

pub const CLASS_COUNT: usize = 3;

/// PRNG stream for per-epoch shuffling; stream 0 initializes parameters.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[default]
    #[serde(rename = "sigmoid")]
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation value itself.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            layer_sizes: vec![ChannelId::COUNT, 5, CLASS_COUNT],
            activation: Activation::Sigmoid,
            learning_rate: 0.1,
            epochs: 100,
            seed: 42,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 3 {
            return Err(Error::Config(format!(
                "layer sizes {:?} need an input, at least one hidden and an output layer",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes {:?} contain an empty layer",
                self.layer_sizes
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        Ok(())
    }
}

/// One dense layer: `outputs × inputs` weights plus `outputs` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weight(&self, to: usize, from: usize) -> f64 {
        self.weights[to * self.inputs + from]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Weight rows, one per output node.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks(self.inputs)
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn param_mut(&mut self, index: usize) -> &mut f64 {
        if index < self.weights.len() {
            &mut self.weights[index]
        } else {
            &mut self.biases[index - self.weights.len()]
        }
    }

    fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .all(|v| v.is_finite())
    }
}

/// Activations of every layer, input first.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations(pub Vec<Vec<f64>>);

impl LayerActivations {
    pub fn output(&self) -> &[f64] {
        self.0.last().expect("at least the input layer")
    }
}

/// Gradients of the per-example loss, laid out like the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    /// Flattened in parameter order: per layer, weights row-major then biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    config: NetworkConfig,
    trained_epochs: usize,
}

/// Draws every weight and bias independently from U[-1, 1].
pub fn init_network(config: &NetworkConfig) -> Result<Network> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layers = config
        .layer_sizes
        .windows(2)
        .map(|pair| {
            let (inputs, outputs) = (pair[0], pair[1]);
            let weights = (0..inputs * outputs)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
            let biases = (0..outputs).map(|_| rng.random_range(-1.0..=1.0)).collect();
            Layer {
                inputs,
                outputs,
                weights,
                biases,
            }
        })
        .collect();
    Ok(Network {
        layers,
        config: config.clone(),
        trained_epochs: 0,
    })
}

impl Network {
    /// Builds a network from explicit parameters. `weights[l]` is the list of
    /// rows of layer `l`'s matrix. Only shapes and finiteness are checked, so
    /// arbitrary topologies (even without a hidden layer) are allowed here.
    pub fn from_parameters(
        weights: Vec<Vec<Vec<f64>>>,
        biases: Vec<Vec<f64>>,
        config: NetworkConfig,
    ) -> Result<Network> {
        let sizes = &config.layer_sizes;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::format(
                "layer_sizes",
                format!("{sizes:?} is not a valid topology"),
            ));
        }
        if weights.len() != sizes.len() - 1 {
            return Err(Error::format(
                "weights",
                format!(
                    "expected {} matrices, found {}",
                    sizes.len() - 1,
                    weights.len()
                ),
            ));
        }
        if biases.len() != sizes.len() - 1 {
            return Err(Error::format(
                "biases",
                format!(
                    "expected {} vectors, found {}",
                    sizes.len() - 1,
                    biases.len()
                ),
            ));
        }
        let mut layers = Vec::with_capacity(weights.len());
        for (l, (matrix, bias)) in weights.into_iter().zip(biases).enumerate() {
            let (inputs, outputs) = (sizes[l], sizes[l + 1]);
            if matrix.len() != outputs {
                return Err(Error::format(
                    format!("weights[{l}]"),
                    format!("expected {outputs} rows, found {}", matrix.len()),
                ));
            }
            if let Some((j, row)) = matrix.iter().enumerate().find(|(_, r)| r.len() != inputs) {
                return Err(Error::format(
                    format!("weights[{l}][{j}]"),
                    format!("expected {inputs} columns, found {}", row.len()),
                ));
            }
            if bias.len() != outputs {
                return Err(Error::format(
                    format!("biases[{l}]"),
                    format!("expected {outputs} values, found {}", bias.len()),
                ));
            }
            let layer = Layer {
                inputs,
                outputs,
                weights: matrix.into_iter().flatten().collect(),
                biases: bias,
            };
            if !layer.all_finite() {
                return Err(Error::format(
                    format!("weights[{l}]"),
                    "non-finite parameter",
                ));
            }
            layers.push(layer);
        }
        Ok(Network {
            layers,
            config,
            trained_epochs: 0,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.config.layer_sizes
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn activation(&self) -> Activation {
        self.config.activation
    }

    pub fn trained_epochs(&self) -> usize {
        self.trained_epochs
    }

    pub(crate) fn set_trained_epochs(&mut self, epochs: usize) {
        self.trained_epochs = epochs;
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Flattened parameters: per layer, weights row-major then biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let count = layer.param_count();
            if index < count {
                return layer.param_mut(index);
            }
            index -= count;
        }
        panic!("parameter index out of range");
    }

    fn all_finite(&self) -> bool {
        self.layers.iter().all(Layer::all_finite)
    }

    pub fn forward(&self, x: &[f64]) -> Result<LayerActivations> {
        if x.len() != self.input_size() {
            return Err(Error::Shape {
                expected: self.input_size(),
                found: x.len(),
            });
        }
        let act = self.config.activation;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let prev = activations.last().expect("non-empty");
            let next: Vec<f64> = layer
                .rows()
                .zip(&layer.biases)
                .map(|(row, b)| {
                    let z = row.iter().zip(prev).fold(*b, |acc, (w, a)| acc + w * a);
                    act.apply(z)
                })
                .collect();
            activations.push(next);
        }
        Ok(LayerActivations(activations))
    }

    /// Squared-error loss `½ Σ (o − t)²` for one example.
    pub fn loss(&self, x: &[f64], target: &[f64]) -> Result<f64> {
        let acts = self.forward(x)?;
        squared_error(acts.output(), target)
    }

    /// Exact gradients of `½ Σ (o − t)²` with respect to every parameter,
    /// together with the loss itself.
    pub fn gradients(&self, x: &[f64], target: &[f64]) -> Result<(Gradients, f64)> {
        let acts = self.forward(x)?;
        let loss = squared_error(acts.output(), target)?;
        Ok((self.backpropagate(&acts, target), loss))
    }

    fn backpropagate(&self, acts: &LayerActivations, target: &[f64]) -> Gradients {
        let act = self.config.activation;
        let mut delta: Vec<f64> = acts
            .output()
            .iter()
            .zip(target)
            .map(|(o, t)| (o - t) * act.derivative_from_output(*o))
            .collect();
        let mut layers = vec![(Vec::new(), Vec::new()); self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &acts.0[l];
            let mut grad_w = Vec::with_capacity(layer.weights.len());
            for d in &delta {
                grad_w.extend(input.iter().map(|a| d * a));
            }
            let next_delta = if l > 0 {
                (0..layer.inputs)
                    .map(|i| {
                        let back: f64 = delta
                            .iter()
                            .enumerate()
                            .map(|(j, d)| layer.weight(j, i) * d)
                            .sum();
                        back * act.derivative_from_output(input[i])
                    })
                    .collect()
            } else {
                Vec::new()
            };
            layers[l] = (grad_w, std::mem::replace(&mut delta, next_delta));
        }
        Gradients { layers }
    }

    fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(gb) {
                *b -= learning_rate * g;
            }
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction> {
        let acts = self.forward(x.as_slice())?;
        let out = acts.output();
        if out.len() != CLASS_COUNT {
            return Err(Error::Shape {
                expected: CLASS_COUNT,
                found: out.len(),
            });
        }
        let scores = [out[0], out[1], out[2]];
        Ok(Prediction {
            scores,
            label: argmax_label(&scores),
        })
    }
}

fn squared_error(output: &[f64], target: &[f64]) -> Result<f64> {
    if output.len() != target.len() {
        return Err(Error::Shape {
            expected: output.len(),
            found: target.len(),
        });
    }
    Ok(0.5
        * output
            .iter()
            .zip(target)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scores: [f64; CLASS_COUNT],
    pub label: RiskLabel,
}

/// Class of the largest score; ties go to the lowest class index.
pub fn argmax_label(scores: &[f64; CLASS_COUNT]) -> RiskLabel {
    let mut best = 0;
    for k in 1..CLASS_COUNT {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    RiskLabel::from_index(best).expect("index below CLASS_COUNT")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean squared error per output component, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    pub epochs_run: usize,
    pub final_train_accuracy: f64,
}

/// Online SGD: each epoch visits the data in a fresh seeded order and
/// updates every parameter after every example.
pub fn train(
    mut net: Network,
    data: &[LabeledExample],
    config: &NetworkConfig,
) -> Result<(Network, TrainReport)> {
    config.validate()?;
    if config.layer_sizes != net.config.layer_sizes {
        return Err(Error::Config(format!(
            "training config topology {:?} does not match network {:?}",
            config.layer_sizes, net.config.layer_sizes
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if net.output_size() != CLASS_COUNT {
        return Err(Error::Shape {
            expected: CLASS_COUNT,
            found: net.output_size(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut sum_sq = 0.0;
        for &idx in &order {
            let example = &data[idx];
            let target = example.label.one_hot();
            let (grads, loss) = net.gradients(example.features.as_slice(), &target)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            sum_sq += 2.0 * loss;
            net.apply_gradients(&grads, config.learning_rate);
            if !net.all_finite() {
                return Err(Error::Divergence { epoch });
            }
        }
        epoch_losses.push(sum_sq / (data.len() * CLASS_COUNT) as f64);
    }

    net.config = config.clone();
    net.trained_epochs += config.epochs;
    let correct = data
        .iter()
        .map(|ex| net.predict(&ex.features).map(|p| p.label == ex.label))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count();
    let report = TrainReport {
        epochs_run: epoch_losses.len(),
        epoch_losses,
        final_train_accuracy: correct as f64 / data.len() as f64,
    };
    Ok((net, report))
}

/// Largest relative disagreement between backpropagated gradients and
/// central differences `(E(θ+ε) − E(θ−ε)) / 2ε` over all parameters.
pub fn gradient_check(net: &Network, example: &LabeledExample, epsilon: f64) -> Result<f64> {
    let x = example.features.as_slice();
    let target = example.label.one_hot();
    let (grads, _) = net.gradients(x, &target)?;
    let analytic = grads.flatten();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (index, a) in analytic.into_iter().enumerate() {
        let original = *probe.param_mut(index);
        *probe.param_mut(index) = original + epsilon;
        let plus = probe.loss(x, &target)?;
        *probe.param_mut(index) = original - epsilon;
        let minus = probe.loss(x, &target)?;
        *probe.param_mut(index) = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}
