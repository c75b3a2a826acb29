#![allow(dead_code)]

use crater_cnn::layers::cross_entropy;
use crater_cnn::{NetConfig, Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPS: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-4;

/// Input 6x6, two 3x3 filters per conv layer, hidden 5, two classes.
pub fn tiny_config() -> NetConfig {
    NetConfig {
        input_size: 6,
        conv1_filters: 2,
        conv2_filters: 2,
        kernel: 3,
        stride: 1,
        hidden: 5,
        classes: 2,
    }
}

/// Relative error with a floor on the scale so that gradients that are zero
/// up to rounding compare by absolute difference.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-5)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn loss(net: &Network, patch: &Tensor, label: usize) -> f64 {
    let probs = net.forward(patch).unwrap();
    cross_entropy(&probs, label).unwrap().loss
}

#[derive(Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub worst: f64,
    pub worst_at: String,
}

impl GradReport {
    fn record(&mut self, name: String, analytic: f64, numeric: f64) {
        self.checked += 1;
        let e = rel_err(analytic, numeric);
        if e > self.worst || self.worst_at.is_empty() {
            self.worst = self.worst.max(e);
            self.worst_at = format!("{name}: analytic {analytic:e}, numeric {numeric:e}");
        }
    }
}

/// Compares every parameter gradient and the input gradient of a randomly
/// initialized tiny network against central differences.
pub fn check_network_gradients(seed: u64) -> GradReport {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(cfg, seed).unwrap();
    // non-zero biases so their gradients are exercised away from the origin
    for (_, p, _) in net.params_and_grads_mut() {
        if p.shape().len() == 1 {
            p.map_inplace(|_| rng.gen_range(-0.1..0.1));
        }
    }
    let patch = random_tensor(&mut rng, &[1, 6, 6], 0.0, 1.0);
    let label = rng.gen_range(0..2);

    let pass = net.forward_pass(&patch).unwrap();
    net.zero_grad();
    net.backward(&pass, label).unwrap();
    let mut report = GradReport::default();

    let base = net.clone();
    let n_params = base.clone().params_and_grads_mut().len();
    for p in 0..n_params {
        let mut probe = base.clone();
        let (name, len, grads) = {
            let entry = &mut probe.params_and_grads_mut()[p];
            (entry.0.clone(), entry.1.len(), entry.2.data().to_vec())
        };
        for i in 0..len {
            let mut plus = base.clone();
            plus.params_and_grads_mut()[p].1.data_mut()[i] += FD_EPS;
            let mut minus = base.clone();
            minus.params_and_grads_mut()[p].1.data_mut()[i] -= FD_EPS;
            let numeric =
                (loss(&plus, &patch, label) - loss(&minus, &patch, label)) / (2.0 * FD_EPS);
            report.record(format!("{name}[{i}]"), grads[i], numeric);
        }
    }

    let probs = pass.probs.clone();
    let ce = cross_entropy(&probs, label).unwrap();
    let mut scratch = base.clone();
    let g_input = scratch
        .backward_logits(&pass, &ce.grad_logits, true)
        .unwrap()
        .unwrap();
    for i in 0..patch.len() {
        let mut plus = patch.clone();
        plus.data_mut()[i] += FD_EPS;
        let mut minus = patch.clone();
        minus.data_mut()[i] -= FD_EPS;
        let numeric = (loss(&base, &plus, label) - loss(&base, &minus, label)) / (2.0 * FD_EPS);
        report.record(format!("input[{i}]"), g_input.data()[i], numeric);
    }
    report
}

/// Expected F1 of a classifier that calls positives at rate 0.5 regardless
/// of the input, on data with positive rate `q`.
pub fn chance_f1(q: f64) -> f64 {
    2.0 * q * 0.5 / (q + 0.5)
}
