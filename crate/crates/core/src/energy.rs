//! Operation counting for recorded spiking passes and their dense
//! equivalents, priced by a per-operation energy table.
//!
//! Spiking rules:
//! - a synaptic layer fed by spikes costs one accumulate and one weight
//!   read per (active input, output) pair; real-valued inputs cost a MAC
//!   instead of an accumulate;
//! - every LIF neuron-step costs one comparison, one leak MAC, one state
//!   read and one state write; biases and batch norm fold into the leak;
//! - stochastic attention costs one accumulate per coincident spike pair
//!   and one random draw per Bernoulli sample.
//!
//! The dense equivalent performs every MAC of every layer with a weight
//! read, writes each output and applies one comparison per activation.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::snn::{Recording, Stage, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpCounts {
    pub accumulates: u64,
    pub macs: u64,
    pub comparisons: u64,
    pub random_draws: u64,
    pub mem_reads: u64,
    pub mem_writes: u64,
}

impl OpCounts {
    /// (category, count) in a fixed order.
    pub fn entries(&self) -> [(&'static str, u64); 6] {
        [
            ("accumulate", self.accumulates),
            ("mac", self.macs),
            ("comparison", self.comparisons),
            ("random_draw", self.random_draws),
            ("mem_read", self.mem_reads),
            ("mem_write", self.mem_writes),
        ]
    }
}

impl Add for OpCounts {
    type Output = OpCounts;
    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            accumulates: self.accumulates + o.accumulates,
            macs: self.macs + o.macs,
            comparisons: self.comparisons + o.comparisons,
            random_draws: self.random_draws + o.random_draws,
            mem_reads: self.mem_reads + o.mem_reads,
            mem_writes: self.mem_writes + o.mem_writes,
        }
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: OpCounts) {
        *self = *self + o;
    }
}

/// Energy per operation in picojoules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyTable {
    pub accumulate_pj: f64,
    pub mac_pj: f64,
    pub comparison_pj: f64,
    pub random_draw_pj: f64,
    pub mem_read_pj: f64,
    pub mem_write_pj: f64,
}

impl Default for EnergyTable {
    fn default() -> Self {
        EnergyTable {
            accumulate_pj: 0.9,
            mac_pj: 4.6,
            comparison_pj: 0.1,
            random_draw_pj: 0.4,
            mem_read_pj: 5.0,
            mem_write_pj: 5.0,
        }
    }
}

impl EnergyTable {
    pub fn validate(&self) -> Result<()> {
        if self.prices().iter().any(|&p| !p.is_finite() || p <= 0.0) {
            return Err(invalid(format!(
                "energy table entries must be finite and > 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// Prices in the order of [`OpCounts::entries`].
    pub fn prices(&self) -> [f64; 6] {
        [
            self.accumulate_pj,
            self.mac_pj,
            self.comparison_pj,
            self.random_draw_pj,
            self.mem_read_pj,
            self.mem_write_pj,
        ]
    }

    pub fn scaled(&self, c: f64) -> Self {
        EnergyTable {
            accumulate_pj: c * self.accumulate_pj,
            mac_pj: c * self.mac_pj,
            comparison_pj: c * self.comparison_pj,
            random_draw_pj: c * self.random_draw_pj,
            mem_read_pj: c * self.mem_read_pj,
            mem_write_pj: c * self.mem_write_pj,
        }
    }
}

/// Σ count · price, in picojoules.
pub fn energy_pj(counts: &OpCounts, table: &EnergyTable) -> f64 {
    counts
        .entries()
        .iter()
        .zip(table.prices())
        .map(|(&(_, n), p)| n as f64 * p)
        .sum()
}

/// Σ count · price, in joules.
pub fn energy_of(counts: &OpCounts, table: &EnergyTable) -> f64 {
    energy_pj(counts, table) * 1e-12
}

/// Counts of one layer, spiking and dense, with the input activity they
/// were derived from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerCounts {
    pub stage: Stage,
    pub layer: String,
    pub spiking: OpCounts,
    pub dense: OpCounts,
    /// Nonzero synaptic inputs and synaptic input slots.
    pub active_inputs: u64,
    pub input_slots: u64,
}

impl LayerCounts {
    pub fn input_rate(&self) -> Option<f64> {
        (self.input_slots > 0).then(|| self.active_inputs as f64 / self.input_slots as f64)
    }
}

fn trace_counts(t: &Trace) -> (Stage, &str, OpCounts, OpCounts, u64, u64) {
    match t {
        Trace::Synapse {
            layer,
            stage,
            rows,
            fan_in,
            fan_out,
            active,
            binary,
        } => {
            let events = active * fan_out;
            let spiking = OpCounts {
                accumulates: if *binary { events } else { 0 },
                macs: if *binary { 0 } else { events },
                mem_reads: events,
                ..OpCounts::default()
            };
            let dense_macs = rows * fan_in * fan_out;
            let dense = OpCounts {
                macs: dense_macs,
                mem_reads: dense_macs,
                mem_writes: rows * fan_out,
                ..OpCounts::default()
            };
            (*stage, layer, spiking, dense, *active, rows * fan_in)
        }
        Trace::Neurons {
            layer,
            stage,
            count,
            ..
        } => {
            let spiking = OpCounts {
                comparisons: *count,
                macs: *count,
                mem_reads: *count,
                mem_writes: *count,
                ..OpCounts::default()
            };
            let dense = OpCounts {
                comparisons: *count,
                ..OpCounts::default()
            };
            (*stage, layer, spiking, dense, 0, 0)
        }
        Trace::Attention {
            layer,
            stage,
            active_ands,
            draws,
            dense_macs,
            ..
        } => {
            let spiking = OpCounts {
                accumulates: *active_ands,
                random_draws: *draws,
                ..OpCounts::default()
            };
            let dense = OpCounts {
                macs: *dense_macs,
                ..OpCounts::default()
            };
            (*stage, layer, spiking, dense, 0, 0)
        }
    }
}

/// Per-layer counts of a recorded pass, layers in first-seen order.
pub fn count_layers(rec: &Recording) -> Result<Vec<LayerCounts>> {
    if rec.traces.is_empty() {
        return Err(Error::Empty("activity recording"));
    }
    let mut out: Vec<LayerCounts> = Vec::new();
    for t in &rec.traces {
        let (stage, layer, spiking, dense, active, slots) = trace_counts(t);
        match out
            .iter_mut()
            .find(|l| l.stage == stage && l.layer == layer)
        {
            Some(l) => {
                l.spiking += spiking;
                l.dense += dense;
                l.active_inputs += active;
                l.input_slots += slots;
            }
            None => out.push(LayerCounts {
                stage,
                layer: layer.to_string(),
                spiking,
                dense,
                active_inputs: active,
                input_slots: slots,
            }),
        }
    }
    Ok(out)
}

/// Spiking counts of a recorded pass.
pub fn count_spiking_forward(rec: &Recording) -> Result<OpCounts> {
    Ok(count_layers(rec)?
        .iter()
        .fold(OpCounts::default(), |a, l| a + l.spiking))
}

/// Dense-equivalent counts; these depend only on the layer shapes.
pub fn count_dense_equivalent(rec: &Recording) -> Result<OpCounts> {
    Ok(count_layers(rec)?
        .iter()
        .fold(OpCounts::default(), |a, l| a + l.dense))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: Stage,
    pub spiking: OpCounts,
    pub dense: OpCounts,
    /// Per inference.
    pub spiking_pj: f64,
    pub dense_pj: f64,
    /// Mean fraction of nonzero synaptic inputs.
    pub input_spike_rate: f64,
    /// Mean fraction of LIF neuron-steps that fired.
    pub neuron_spike_rate: f64,
}

/// Totals over `inferences` samples and per-inference energies per stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub inferences: u64,
    pub table: EnergyTable,
    pub stages: Vec<StageReport>,
    pub layers: Vec<LayerCounts>,
}

pub fn energy_report(
    rec: &Recording,
    inferences: u64,
    table: &EnergyTable,
) -> Result<EnergyReport> {
    table.validate()?;
    if inferences == 0 {
        return Err(Error::Empty("inference count"));
    }
    let layers = count_layers(rec)?;
    let per = inferences as f64;
    let stages = [Stage::Encoder, Stage::Decoder]
        .into_iter()
        .map(|stage| {
            let of_stage = || layers.iter().filter(move |l| l.stage == stage);
            let spiking = of_stage().fold(OpCounts::default(), |a, l| a + l.spiking);
            let dense = of_stage().fold(OpCounts::default(), |a, l| a + l.dense);
            let (active, slots) =
                of_stage().fold((0, 0), |(a, s), l| (a + l.active_inputs, s + l.input_slots));
            let (fired, steps) = rec
                .traces
                .iter()
                .filter_map(|t| match t {
                    Trace::Neurons {
                        stage: s,
                        count,
                        spikes,
                        ..
                    } if *s == stage => Some((*spikes, *count)),
                    _ => None,
                })
                .fold((0u64, 0u64), |(a, b), (x, y)| (a + x, b + y));
            StageReport {
                stage,
                spiking,
                dense,
                spiking_pj: energy_pj(&spiking, table) / per,
                dense_pj: energy_pj(&dense, table) / per,
                input_spike_rate: ratio(active, slots),
                neuron_spike_rate: ratio(fired, steps),
            }
        })
        .collect();
    Ok(EnergyReport {
        inferences,
        table: *table,
        stages,
        layers,
    })
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// µJ / mJ / nJ rendering of an energy in joules.
pub fn format_joules(j: f64) -> String {
    let a = j.abs();
    if a >= 1e-3 {
        format!("{:.3} mJ", j * 1e3)
    } else if a >= 1e-6 {
        format!("{:.3} µJ", j * 1e6)
    } else {
        format!("{:.3} nJ", j * 1e9)
    }
}
