use super::{Gradients, Network, NnError, Result, Tensor};

/// Parameter update rules. Adam keeps bias-corrected first/second moments
/// per parameter tensor, shape-matched to the network it was created for.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd {
        lr: f32,
    },
    Adam {
        lr: f32,
        beta1: f32,
        beta2: f32,
        eps: f32,
        step: u64,
        m: Vec<Tensor>,
        v: Vec<Tensor>,
    },
}

impl Optimizer {
    pub fn sgd(lr: f32) -> Optimizer {
        Optimizer::Sgd { lr }
    }

    pub fn adam(lr: f32, net: &Network) -> Optimizer {
        let m = net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        let v = net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m,
            v,
        }
    }

    /// Applies one update in place. `grads` must come from a backward pass
    /// on the same network (or an accumulated batch of them).
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        let flat = grads.flat();
        let mut params = net.params_mut();
        if flat.len() != params.len() {
            return Err(NnError::GradientMismatch {
                expected: params.len(),
                got: flat.len(),
            });
        }
        for (p, g) in params.iter().zip(&flat) {
            if p.shape() != g.shape() {
                return Err(NnError::GradientMismatch {
                    expected: params.len(),
                    got: flat.len(),
                });
            }
        }
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(&flat) {
                    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= *lr * gv;
                    }
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                *step += 1;
                let bc1 = 1.0 - beta1.powi(*step as i32);
                let bc2 = 1.0 - beta2.powi(*step as i32);
                for ((p, g), (mt, vt)) in params.iter_mut().zip(&flat).zip(m.iter_mut().zip(v.iter_mut())) {
                    for ((pv, gv), (mv, vv)) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(mt.data_mut().iter_mut().zip(vt.data_mut().iter_mut()))
                    {
                        *mv = *beta1 * *mv + (1.0 - *beta1) * gv;
                        *vv = *beta2 * *vv + (1.0 - *beta2) * gv * gv;
                        let mhat = *mv / bc1;
                        let vhat = *vv / bc2;
                        *pv -= *lr * mhat / (vhat.sqrt() + *eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkBuilder;

    fn tiny_net() -> Network {
        NetworkBuilder::new(7).dense(2, 1).build()
    }

    fn grads_with(net: &Network, value: f32) -> Gradients {
        let mut g = net.zero_grads(&[2]);
        for lg in g.layers.iter_mut().flatten() {
            for v in lg.weight.data_mut() {
                *v = value;
            }
            for v in lg.bias.data_mut() {
                *v = value;
            }
        }
        g
    }

    #[test]
    fn sgd_basic_step() {
        let mut net = tiny_net();
        net.params_mut()[0].data_mut()[0] = 1.0;
        let g = grads_with(&net, 0.5);
        Optimizer::sgd(0.1).step(&mut net, &g).unwrap();
        assert!((net.params()[0].data()[0] - 0.95).abs() < 1e-7);
    }

    #[test]
    fn zero_grads_leave_params_unchanged() {
        let mut net = tiny_net();
        let before: Vec<f32> = net.params().iter().flat_map(|t| t.data().to_vec()).collect();
        let g = grads_with(&net, 0.0);
        let mut opt = Optimizer::adam(0.01, &net);
        opt.step(&mut net, &g).unwrap();
        // Adam with exactly zero gradients: m = v = 0, update = 0 / (0 + eps).
        let after: Vec<f32> = net.params().iter().flat_map(|t| t.data().to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // Closed form: after one step m_hat = g, v_hat = g^2, so the update
        // is lr * g / (|g| + eps) = lr * sign(g) for any gradient scale.
        for scale in [1e-3f32, 1.0, 1e3] {
            let mut net = tiny_net();
            let p0 = net.params()[0].data()[0];
            let g = grads_with(&net, scale);
            let mut opt = Optimizer::adam(0.05, &net);
            opt.step(&mut net, &g).unwrap();
            let delta = net.params()[0].data()[0] - p0;
            assert!(
                (delta + 0.05).abs() < 1e-4,
                "scale {scale}: delta {delta}, expected -lr"
            );
        }
    }
}
