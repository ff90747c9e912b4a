use super::dense::{DenseNet, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Gradients,
    second_moment: Gradients,
    step_count: u64,
}

impl AdamState {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        AdamState {
            config,
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Clears the moment estimates and step counter.
    pub fn reset(&mut self) {
        for g in [&mut self.first_moment, &mut self.second_moment] {
            for l in &mut g.layers {
                l.weight.data_mut().fill(0.0);
                l.bias.fill(0.0);
            }
        }
        self.step_count = 0;
    }
}

fn same_shape(a: &Gradients, net: &DenseNet) -> bool {
    a.layers.len() == net.layers().len()
        && a.layers.iter().zip(net.layers()).all(|(g, l)| {
            g.weight.rows() == l.weight.rows()
                && g.weight.cols() == l.weight.cols()
                && g.bias.len() == l.bias.len()
        })
}

/// One bias-corrected Adam update.
///
/// Non-finite gradients are rejected before anything is modified.
pub fn adam_step(net: &mut DenseNet, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if !same_shape(grads, net) || !same_shape(&state.first_moment, net) {
        return Err(Error::shape(
            "adam_step",
            "gradients shaped like the network",
            "mismatched layer shapes",
        ));
    }
    if let Some(layer) = grads.first_non_finite() {
        return Err(Error::NonFinite(format!("gradient of layer {layer}")));
    }
    state.step_count += 1;
    let cfg = state.config;
    let t = state.step_count as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    };
    let AdamState {
        first_moment,
        second_moment,
        ..
    } = state;
    for (((layer, g), m), v) in net
        .layers_mut()
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut first_moment.layers)
        .zip(&mut second_moment.layers)
    {
        update(
            layer.weight.data_mut(),
            g.weight.data(),
            m.weight.data_mut(),
            v.weight.data_mut(),
        );
        update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
    }
    Ok(())
}
