//! Leaky integrate-and-fire dynamics:
//! V₋ = β·V₊(t−1) + I, O = Θ(V₋ − V_th), V₊ = V₋·(1 − O).

use super::config::LifConfig;
use crate::error::{shape, Result};
use crate::grad::{SurrogateSpec, Tape, Var};

/// A layer of LIF neurons evaluated directly on `f64` state.
#[derive(Debug, Clone, PartialEq)]
pub struct LifNeurons {
    pub potential: Vec<f64>,
    pub config: LifConfig,
}

impl LifNeurons {
    pub fn new(n: usize, config: LifConfig) -> Self {
        LifNeurons {
            potential: vec![0.0; n],
            config,
        }
    }

    /// One step; returns the spike vector and leaves V₊ in `potential`.
    pub fn step(&mut self, current: &[f64]) -> Result<Vec<u8>> {
        if current.len() != self.potential.len() {
            return Err(shape(format!(
                "{} input currents for {} neurons",
                current.len(),
                self.potential.len()
            )));
        }
        let LifConfig { beta, threshold } = self.config;
        Ok(self
            .potential
            .iter_mut()
            .zip(current)
            .map(|(v, &i)| {
                let pre = beta * *v + i;
                let o = SurrogateSpec::step(pre - threshold);
                *v = pre * (1.0 - o);
                o as u8
            })
            .collect())
    }
}

/// LIF state carried across steps of one recorded forward pass.
#[derive(Debug, Clone)]
pub struct LifState {
    potential: Option<Var>,
    config: LifConfig,
    surrogate: SurrogateSpec,
}

impl LifState {
    pub fn new(config: LifConfig, surrogate: SurrogateSpec) -> Self {
        LifState {
            potential: None,
            config,
            surrogate,
        }
    }

    /// Post-spike potential V₊ of the latest step.
    pub fn potential(&self) -> Option<Var> {
        self.potential
    }

    pub fn step(&mut self, tape: &mut Tape, current: Var) -> Result<Var> {
        let pre = match self.potential {
            Some(v) => {
                if tape.shape(v) != tape.shape(current) {
                    return Err(shape(format!(
                        "LIF state {:?} vs input {:?}",
                        tape.shape(v),
                        tape.shape(current)
                    )));
                }
                let leak = tape.affine_scalar(v, self.config.beta, 0.0);
                tape.add(leak, current)?
            }
            None => current,
        };
        let spikes = tape.step(pre, self.config.threshold, self.surrogate);
        let keep = tape.affine_scalar(spikes, -1.0, 1.0);
        self.potential = Some(tape.mul(pre, keep)?);
        Ok(spikes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::{SpikeMode, Tensor};

    #[test]
    fn fire_and_reset() {
        let mut n = LifNeurons::new(
            1,
            LifConfig {
                beta: 0.0,
                threshold: 1.0,
            },
        );
        assert_eq!(n.step(&[1.5]).unwrap(), vec![1]);
        assert_eq!(n.potential, vec![0.0]);
    }

    #[test]
    fn hand_trace() {
        let mut n = LifNeurons::new(
            1,
            LifConfig {
                beta: 0.5,
                threshold: 1.0,
            },
        );
        let mut spikes = Vec::new();
        let mut potentials = Vec::new();
        for _ in 0..3 {
            spikes.extend(n.step(&[0.6]).unwrap());
            potentials.push(n.potential[0]);
        }
        assert_eq!(spikes, vec![0, 0, 1]);
        // 0.5·0.6 + 0.6 rounds to 0.8999999999999999 in f64
        assert_eq!(potentials, vec![0.6, 0.5 * 0.6 + 0.6, 0.0]);
        assert!((potentials[1] - 0.9).abs() <= f64::EPSILON);
    }

    #[test]
    fn leak_only() {
        let mut n = LifNeurons::new(
            1,
            LifConfig {
                beta: 0.5,
                threshold: 1.0,
            },
        );
        n.potential = vec![0.8];
        for i in 1..6 {
            assert_eq!(n.step(&[0.0]).unwrap(), vec![0]);
            assert!((n.potential[0] - 0.8 * 0.5f64.powi(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn tape_state_matches_plain_neurons() {
        let cfg = LifConfig {
            beta: 0.7,
            threshold: 0.5,
        };
        let inputs = [[0.3, -0.2, 0.9], [0.4, 0.8, 0.1], [0.0, 0.3, 0.6]];
        let mut plain = LifNeurons::new(3, cfg);
        let mut tape = Tape::new(SpikeMode::Hard);
        let mut state = LifState::new(cfg, SurrogateSpec::default());
        for i in inputs {
            let expect = plain.step(&i).unwrap();
            let x = tape.input(Tensor::new(&[3], i.to_vec()).unwrap());
            let o = state.step(&mut tape, x).unwrap();
            let got: Vec<u8> = tape.value(o).data().iter().map(|&v| v as u8).collect();
            assert_eq!(got, expect);
            assert_eq!(
                tape.value(state.potential().unwrap()).data(),
                plain.potential.as_slice()
            );
        }
        assert!(plain.step(&[0.0]).is_err());
    }
}
