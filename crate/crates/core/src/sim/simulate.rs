//! Seeded slot-by-slot closed-loop simulation.
//!
//! Within slot `t`: the sampler sees `w_t` and decides; a transmission draws
//! the channel; the actuator acts on the current estimate `x̂_t`; then source
//! and context step and the delivered update (if any) becomes the estimate of
//! slot `t + 1`. Source, context and channel each draw from their own ChaCha
//! stream split from the master seed, so two runs that differ only in the
//! sampler see the same source randomness for the same actions.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::benchmarks::{InitialConditions, SamplingRule};
use crate::error::{Error, Result};
use crate::model::{DecisionPolicy, Embedding, GlobalState};
use crate::pomdp::DecPomdpModel;
use crate::sim::metrics::{AgeState, CostBreakdown};

const SOURCE_STREAM: u64 = 1;
const CONTEXT_STREAM: u64 = 2;
const CHANNEL_STREAM: u64 = 3;

/// Batches used for the batch-means standard error.
pub const BATCHES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: u64,
    pub x: usize,
    pub xhat: usize,
    pub phi: usize,
    pub sample: bool,
    pub action: usize,
    /// Channel outcome; `None` when idle.
    pub h: Option<bool>,
    pub aoi: u64,
    pub aos: u64,
    pub aoii: u64,
    pub aoci: u64,
    pub mse: f64,
    pub got: f64,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub horizon: u64,
    pub seed: u64,
    pub init: InitialConditions,
    pub embedding: Embedding,
    pub record_trace: bool,
}

impl SimOptions {
    pub fn new(horizon: u64, seed: u64, states: usize) -> Self {
        Self {
            horizon,
            seed,
            init: InitialConditions::default(),
            embedding: Embedding::identity(states),
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub horizon: u64,
    pub average_cost: f64,
    /// Batch-means standard error of `average_cost`.
    pub stderr: f64,
    pub sampling_rate: f64,
    pub breakdown: CostBreakdown,
    pub mean_aoi: f64,
    pub mean_aoii: f64,
    pub mean_aoci: f64,
    pub mean_mse: f64,
    pub mean_got: f64,
    /// Fraction of slots with `x ≠ x̂`.
    pub unsynchronized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    pub summary: SimSummary,
    pub trace: Vec<TraceRecord>,
}

/// Neumaier-compensated running sum, so long-horizon totals of the cost
/// components add up to the total cost to within a few ulps.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, v: f64) {
        let t = self.total + v;
        if self.total.abs() >= v.abs() {
            self.carry += (self.total - t) + v;
        } else {
            self.carry += (v - t) + self.total;
        }
        self.total = t;
    }

    fn value(&self) -> f64 {
        self.total + self.carry
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Batch-means standard error of the mean of `values`.
pub fn batch_means_stderr(values: &[f64], batches: usize) -> f64 {
    let batches = batches.min(values.len());
    if batches < 2 {
        return f64::NAN;
    }
    let size = values.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

pub fn simulate_closed_loop(
    model: &DecPomdpModel,
    rule: &SamplingRule,
    decision: &DecisionPolicy,
    opts: &SimOptions,
) -> Result<SimOutput> {
    if opts.horizon == 0 {
        return Err(Error::Parameter("horizon must be at least 1".into()));
    }
    let alphabets = model.alphabets();
    let (s, v, m) = (alphabets.states(), alphabets.contexts(), alphabets.actions());
    if decision.len() != s || decision.actions().iter().any(|&a| a >= m) {
        return Err(Error::ModelIncomplete(format!("decision policy {decision} does not fit the model")));
    }
    if opts.embedding.values().len() != s {
        return Err(Error::ModelIncomplete(format!(
            "embedding has {} values, expected {s}",
            opts.embedding.values().len()
        )));
    }
    let index = model.index();
    index.checked_index(opts.init.state())?;
    if let SamplingRule::Stationary(p) = rule {
        if p.len() != index.len() {
            return Err(Error::ModelIncomplete(format!(
                "sampling policy covers {} states, expected {}",
                p.len(),
                index.len()
            )));
        }
    }

    let weighted = |row: &[f64]| WeightedIndex::new(row).map_err(|e| Error::Validation(e.to_string()));
    let mut source = Vec::with_capacity(s * v * m);
    for x in 0..s {
        for phi in 0..v {
            for a in 0..m {
                source.push(weighted(model.source().row(x, phi, a))?);
            }
        }
    }
    let context: Vec<_> = (0..v).map(|phi| weighted(model.context().row(phi))).collect::<Result<_>>()?;
    let mut source_rng = stream(opts.seed, SOURCE_STREAM);
    let mut context_rng = stream(opts.seed, CONTEXT_STREAM);
    let mut channel_rng = stream(opts.seed, CHANNEL_STREAM);
    let p_success = model.channel().p_success();
    let cost = model.cost();

    let horizon = opts.horizon as usize;
    let mut costs = Vec::with_capacity(horizon);
    let mut trace = Vec::with_capacity(if opts.record_trace { horizon } else { 0 });
    let (mut inherent_sum, mut offset_sum, mut expenditure_sum, mut sampling_sum, mut cost_sum) =
        (Sum::default(), Sum::default(), Sum::default(), Sum::default(), Sum::default());
    let (mut samples, mut unsynced) = (0u64, 0u64);
    let (mut sum_aoi, mut sum_aoii, mut sum_aoci, mut sum_mse, mut sum_got) = (0.0, 0.0, 0.0, 0.0, 0.0);

    let mut w = opts.init.state();
    let mut memory = rule.initial_memory(&opts.init);
    let mut age = AgeState::new(opts.init.aoi as u64, w.x, w.xhat);
    for t in 0..opts.horizon {
        let wi = index.index(w);
        let sample = rule.decide(memory, w, wi);
        let h = if sample {
            Some(channel_rng.random::<f64>() < p_success)
        } else {
            None
        };
        let delivered = h == Some(true);
        let action = decision.action(w.xhat);

        let inherent = cost.inherent(w.x, w.phi);
        let ramp = cost.ramp_term(w.x, w.phi, action);
        let expenditure = cost.expenditure_term(action);
        let got = ramp + expenditure;
        let sampling = if sample { cost.sampling_cost } else { 0.0 };
        let slot_cost = got + sampling;
        let mse = opts.embedding.squared_error(w.x, w.xhat);
        let aoii = age.aoii(w.x, w.xhat);

        inherent_sum.add(inherent);
        offset_sum.add(ramp - inherent);
        expenditure_sum.add(expenditure);
        sampling_sum.add(sampling);
        cost_sum.add(slot_cost);
        costs.push(slot_cost);
        samples += sample as u64;
        unsynced += (w.x != w.xhat) as u64;
        sum_aoi += age.aoi as f64;
        sum_aoii += aoii as f64;
        sum_aoci += age.aoci as f64;
        sum_mse += mse;
        sum_got += got;
        if opts.record_trace {
            trace.push(TraceRecord {
                t,
                x: w.x,
                xhat: w.xhat,
                phi: w.phi,
                sample,
                action,
                h,
                aoi: age.aoi,
                aos: age.aos,
                aoii,
                aoci: age.aoci,
                mse,
                got,
                cost: slot_cost,
            });
        }

        let xhat_next = if delivered { w.x } else { w.xhat };
        let x_next = source[(w.x * v + w.phi) * m + action].sample(&mut source_rng);
        let phi_next = context[w.phi].sample(&mut context_rng);
        memory = rule.next_memory(memory, w, delivered);
        age.advance(w.x, delivered, xhat_next != w.xhat, x_next, xhat_next);
        w = GlobalState::new(x_next, xhat_next, phi_next);
    }

    let n = opts.horizon as f64;
    let breakdown = CostBreakdown {
        inherent: inherent_sum.value() / n,
        actuation_gain_offset: offset_sum.value() / n,
        actuation_expenditure: expenditure_sum.value() / n,
        sampling: sampling_sum.value() / n,
    };
    let summary = SimSummary {
        horizon: opts.horizon,
        average_cost: cost_sum.value() / n,
        stderr: batch_means_stderr(&costs, BATCHES),
        sampling_rate: samples as f64 / n,
        breakdown,
        mean_aoi: sum_aoi / n,
        mean_aoii: sum_aoii / n,
        mean_aoci: sum_aoci / n,
        mean_mse: sum_mse / n,
        mean_got: sum_got / n,
        unsynchronized: unsynced as f64 / n,
    };
    Ok(SimOutput { summary, trace })
}
