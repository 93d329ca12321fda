//! Interleaved simulation and verification under a leakage model.

mod higher;
mod report;
mod select;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::SymbolTable;
use crate::netlist::{structural_index, Circuit, SrcLoc};
use crate::sim::{MemoryHook, NoHook, SimError, SimOptions, SimWarning, Simulator, Stimuli};
use crate::verify::{check, ExprSet, Strategy, Verdict};

pub use higher::{
    binomial, enumerate_duplets, probe_positions, verify_order, DupletError, DupletMode,
    OrderReport, Position,
};
pub use report::{witness_json, Entry, LeakReport, Summary};
pub use select::{
    expr_sets_for, recombine_split, verifies_all_wires, virtual_parents, wires_to_verify, Request,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Bit,
    SupportWise,
}

/// A (g,t) probing model with its refinements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeakageModel {
    pub glitches: bool,
    pub transitions: bool,
    pub use_stability: bool,
    pub granularity: Granularity,
    pub order: u32,
    /// Use `lset(t-1) ∪ lset(t)` with the reduced wire set. Only meaningful
    /// with both glitches and transitions.
    pub overapprox: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("support-wise probing requires stability")]
    SupportWiseWithoutStability,
    #[error("over-approximation requires glitches and transitions")]
    OverapproxWithoutGlitchTransition,
    #[error("probing order must be at least 1")]
    ZeroOrder,
}

impl LeakageModel {
    pub fn new(glitches: bool, transitions: bool) -> Self {
        LeakageModel {
            glitches,
            transitions,
            use_stability: true,
            granularity: Granularity::SupportWise,
            order: 1,
            overapprox: false,
        }
    }

    /// The robust-but-relaxed 1-sw-probing model: glitches, transitions,
    /// stability, support-wise probes and over-approximation.
    pub fn rr1sw() -> Self {
        LeakageModel {
            overapprox: true,
            ..Self::new(true, true)
        }
    }

    pub fn with_granularity(mut self, g: Granularity) -> Self {
        self.granularity = g;
        self
    }

    pub fn with_overapprox(mut self, on: bool) -> Self {
        self.overapprox = on;
        self
    }

    pub fn with_stability(mut self, on: bool) -> Self {
        self.use_stability = on;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.granularity == Granularity::SupportWise && !self.use_stability {
            return Err(ModelError::SupportWiseWithoutStability);
        }
        if self.overapprox && !(self.glitches && self.transitions) {
            return Err(ModelError::OverapproxWithoutGlitchTransition);
        }
        if self.order == 0 {
            return Err(ModelError::ZeroOrder);
        }
        Ok(())
    }

    pub fn facet(&self) -> &'static str {
        match (self.glitches, self.transitions) {
            (false, false) => "value",
            (false, true) => "transition",
            (true, false) => "glitch",
            (true, true) => "transition+glitch",
        }
    }

    fn without_overapprox(self) -> Self {
        LeakageModel {
            overapprox: false,
            ..self
        }
    }
}

#[derive(Clone)]
pub struct RunOptions {
    pub strategy: Strategy,
    pub stop_on_first_leak: bool,
    pub cache: bool,
    /// Verification worker threads.
    pub jobs: usize,
    /// Check every wire even where the model allows a reduced set.
    pub all_wires: bool,
    /// Include inputs of gates stable at t-1 under over-approximation.
    /// Disabling it is only useful as a negative control.
    pub past_stability: bool,
    pub reset_unstable: bool,
    pub hook: Arc<dyn MemoryHook>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            strategy: Strategy::default(),
            stop_on_first_leak: false,
            cache: true,
            jobs: 1,
            all_wires: false,
            past_stability: true,
            reset_unstable: false,
            hook: Arc::new(NoHook),
        }
    }
}

#[derive(Debug, Error)]
pub enum ManagerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Duplets(#[from] DupletError),
}

pub(crate) fn sim_options(model: &LeakageModel, options: &RunOptions) -> SimOptions {
    SimOptions {
        use_stability: model.use_stability,
        reset_unstable: options.reset_unstable,
        concretize_symbolic_index: true,
        ..SimOptions::default()
    }
}

/// Every probe request of one cycle, in wire order with split parents last.
fn requests(
    circuit: &Circuit,
    wires: impl IntoIterator<Item = usize>,
    model: &LeakageModel,
    cur: &[crate::sim::Valuation],
    prev: Option<&[crate::sim::Valuation]>,
) -> Vec<(Option<SrcLoc>, Request)> {
    let mut out = Vec::new();
    for w in wires {
        let wire = circuit.wire(w);
        for r in expr_sets_for(&wire.name, &cur[w], prev.map(|p| &p[w]), model) {
            out.push((wire.src.clone(), r));
        }
    }
    if model.granularity == Granularity::SupportWise {
        for split in virtual_parents(circuit) {
            let c = recombine_split(split, cur);
            let p = prev.map(|p| recombine_split(split, p));
            for r in expr_sets_for(&split.parent, &c, p.as_ref(), model) {
                out.push((None, r));
            }
        }
    }
    out
}

/// Simulates `stimuli` and checks every selected probe after each cycle.
pub fn run(
    circuit: &Circuit,
    stimuli: &Stimuli,
    labels: &SymbolTable,
    model: &LeakageModel,
    options: &RunOptions,
) -> Result<LeakReport, ManagerError> {
    model.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| ManagerError::Pool(e.to_string()))?;
    let index = structural_index(circuit);
    let mut sim = Simulator::new(
        circuit,
        stimuli.witness.clone(),
        options.hook.clone(),
        sim_options(model, options),
    )?;
    let mut report = LeakReport::default();
    let mut cache: HashMap<String, Verdict> = HashMap::new();
    // Keys a run without over-approximation would have sent.
    let mut counterfactual: HashSet<String> = HashSet::new();
    let plain = model.without_overapprox();

    sim.run(stimuli, |state| {
        let t = state.cycles_done() - 1;
        report.summary.cycles += 1;
        let mut warnings: Vec<SimWarning> = state.warnings().to_vec();
        warnings.sort();
        warnings.dedup();
        report.warnings.extend(warnings);

        let cur = state.current();
        let prev = state.previous();
        let wires: Vec<usize> = if options.all_wires {
            (0..circuit.wires().len()).collect()
        } else {
            wires_to_verify(circuit, &index, model, cur, prev, options.past_stability)
                .into_iter()
                .collect()
        };
        let mut reqs = requests(circuit, wires, model, cur, prev);
        reqs.sort_by(|a, b| (&a.1.name, a.1.bit).cmp(&(&b.1.name, b.1.bit)));

        if model.overapprox {
            for (_, r) in requests(circuit, 0..circuit.wires().len(), &plain, cur, prev) {
                if r.set.is_empty() {
                    continue;
                }
                if !options.cache || counterfactual.insert(r.set.key()) {
                    report.summary.expr_to_verify += 1;
                }
            }
        }

        // Sequential pass: trivial filter and cache, so counters do not
        // depend on worker scheduling.
        let mut pending: Vec<(String, ExprSet)> = Vec::new();
        let mut queued: HashSet<String> = HashSet::new();
        let mut slots: Vec<(Option<SrcLoc>, Request, String)> = Vec::new();
        for (src, r) in reqs {
            if r.set.is_empty() {
                report.summary.trivial_skipped += 1;
                continue;
            }
            let key = r.set.key();
            if options.cache && (cache.contains_key(&key) || queued.contains(&key)) {
                report.summary.cache_hits += 1;
            } else {
                report.summary.verified_expr += 1;
                if !model.overapprox {
                    report.summary.expr_to_verify += 1;
                }
                queued.insert(key.clone());
                pending.push((key.clone(), r.set.clone()));
            }
            slots.push((src, r, key));
        }
        let fresh: Vec<Verdict> = pool.install(|| {
            pending
                .par_iter()
                .map(|(_, set)| check(set, labels, options.strategy))
                .collect()
        });
        // Without the cache, duplicates in `pending` line up with `slots`.
        let mut uncached = fresh.iter();
        let batch: HashMap<&String, &Verdict> = pending.iter().map(|(k, _)| k).zip(&fresh).collect();
        let mut leaking = false;
        for (src, r, key) in slots {
            let verdict = if options.cache {
                cache
                    .get(&key)
                    .or_else(|| batch.get(&key).copied())
                    .expect("checked")
                    .clone()
            } else {
                uncached.next().expect("one verdict per request").clone()
            };
            leaking |= !verdict.is_secure();
            report.entries.push(Entry {
                cycle: t,
                wire: r.name,
                src,
                facet: model.facet(),
                verdict,
                exprs: r.set.renderings(),
            });
        }
        if options.cache {
            for ((k, _), v) in pending.into_iter().zip(fresh) {
                cache.insert(k, v);
            }
        }
        if leaking {
            report.summary.leaking_cycles += 1;
            if options.stop_on_first_leak {
                report.stopped_early = true;
                return Ok(false);
            }
        }
        Ok(true)
    })?;
    Ok(report)
}
