use std::collections::HashMap;

use rayon::prelude::*;

use crate::bayes::Evidence;
use crate::error::{LipsError, Result};
use crate::model::ModelVector;
use crate::prior::PfsPrior;
use crate::proposal::{proposal_at, Decision, ProposalDistribution, ProposalKind};
use crate::rng::{uniform_at, DrawKey};

/// Sampler settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipsConfig {
    /// Particles per island.
    pub particles: usize,
    pub islands: usize,
    pub proposal: ProposalKind,
    pub seed: u64,
}

impl LipsConfig {
    pub fn new(particles: usize, islands: usize, k: usize, seed: u64) -> Self {
        Self {
            particles,
            islands,
            proposal: ProposalKind::Lip { k },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(LipsError::Config("need at least one particle".into()));
        }
        if self.islands == 0 {
            return Err(LipsError::Config("need at least one island".into()));
        }
        if self.proposal == (ProposalKind::Lip { k: 0 }) {
            return Err(LipsError::Config("look-ahead depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// One particle of the forward-stepwise simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub model: ModelVector,
    pub log_weight: f64,
    /// `ln BF_0(model)`.
    pub log_bf0: f64,
    /// Steps taken so far.
    pub step: usize,
    pub stopped: bool,
    /// The last stop was forced by a lack of selectable extensions.
    pub forced: bool,
}

impl Particle {
    pub fn start(p: usize) -> Self {
        Self {
            model: ModelVector::null(p),
            log_weight: 0.0,
            log_bf0: 0.0,
            step: 0,
            stopped: false,
            forced: false,
        }
    }
}

/// Final model and log importance weight of one particle.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub model: ModelVector,
    pub log_weight: f64,
}

/// Advances `particle` by one step under the proposal built at its model.
/// Stopped particles come back unchanged.
pub fn propagate_step(particle: &Particle, proposal: &ProposalDistribution, u_stop: f64, u_select: f64) -> Particle {
    let mut next = particle.clone();
    if particle.stopped {
        return next;
    }
    next.step += 1;
    match proposal.sample(u_stop, u_select) {
        Decision::Stop => {
            next.stopped = true;
            next.forced = proposal.forced_stop;
            next.log_weight += proposal.stop_log_ratio;
        }
        Decision::Select(pos) => {
            let c = &proposal.children[pos];
            next.model = particle.model.with(c.index);
            next.log_weight += c.log_ratio + (c.log_bf0 - particle.log_bf0);
            next.log_bf0 = c.log_bf0;
        }
    }
    next
}

/// Output of one island.
#[derive(Clone, Debug, PartialEq)]
pub struct IslandResult {
    pub samples: Vec<Sample>,
    pub forced_stops: usize,
}

/// Output of a full run.
#[derive(Clone, Debug, PartialEq)]
pub struct LipsRun {
    pub islands: Vec<IslandResult>,
    /// Sweeps performed before every particle had stopped.
    pub steps: usize,
    /// Distinct proposals constructed.
    pub proposals: usize,
}

impl LipsRun {
    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.islands.iter().flat_map(|i| i.samples.iter())
    }
}

/// Runs all islands in lockstep so that particles sharing a model share its
/// proposal. Output is independent of the thread count.
pub fn run_lips<E: Evidence>(config: &LipsConfig, prior: &PfsPrior, evidence: &E) -> Result<LipsRun> {
    run_islands(config, prior, evidence, 0..config.islands as u64)
}

/// A single island; identical to the corresponding island of [`run_lips`].
pub fn run_island<E: Evidence>(
    config: &LipsConfig,
    island: usize,
    prior: &PfsPrior,
    evidence: &E,
) -> Result<IslandResult> {
    let island = island as u64;
    let mut run = run_islands(config, prior, evidence, island..island + 1)?;
    Ok(run.islands.remove(0))
}

fn run_islands<E: Evidence>(
    config: &LipsConfig,
    prior: &PfsPrior,
    evidence: &E,
    islands: std::ops::Range<u64>,
) -> Result<LipsRun> {
    config.validate()?;
    let p = prior.p();
    if evidence.p() != p {
        return Err(LipsError::Config(format!(
            "prior has {p} predictors but the data has {}",
            evidence.p()
        )));
    }
    let n = config.particles;
    let island_ids: Vec<u64> = islands.collect();
    let mut particles: Vec<Particle> = vec![Particle::start(p); n * island_ids.len()];
    let mut steps = 0;
    let mut built = 0;

    while particles.iter().any(|q| !q.stopped) {
        if steps > p {
            return Err(LipsError::Numeric("particles failed to stop after p steps".into()));
        }
        let mut index: HashMap<&ModelVector, usize> = HashMap::new();
        let mut anchors: Vec<&ModelVector> = Vec::new();
        for q in particles.iter().filter(|q| !q.stopped) {
            index.entry(&q.model).or_insert_with(|| {
                anchors.push(&q.model);
                anchors.len() - 1
            });
        }
        let proposals: Vec<ProposalDistribution> = anchors
            .par_iter()
            .map(|m| {
                let node = evidence
                    .node(m)
                    .ok_or_else(|| LipsError::Numeric(format!("particle reached unusable model {m}")))?;
                proposal_at(&node, config.proposal, prior, evidence)
            })
            .collect::<Result<_>>()?;
        built += proposals.len();
        let slots: Vec<Option<usize>> = particles
            .iter()
            .map(|q| (!q.stopped).then(|| index[&q.model]))
            .collect();
        drop(index);
        drop(anchors);

        let t = steps as u64 + 1;
        particles = particles
            .par_iter()
            .zip(slots.par_iter())
            .enumerate()
            .map(|(i, (q, slot))| match slot {
                None => q.clone(),
                Some(s) => {
                    let key = |decision| DrawKey {
                        island: island_ids[i / n],
                        particle: (i % n) as u64,
                        step: t,
                        decision,
                    };
                    let u_stop = uniform_at(config.seed, key(0));
                    let u_select = uniform_at(config.seed, key(1));
                    propagate_step(q, &proposals[*s], u_stop, u_select)
                }
            })
            .collect();
        steps += 1;
    }

    let islands = particles
        .chunks(n)
        .map(|chunk| IslandResult {
            forced_stops: chunk.iter().filter(|q| q.forced).count(),
            samples: chunk
                .iter()
                .map(|q| Sample {
                    model: q.model.clone(),
                    log_weight: q.log_weight,
                })
                .collect(),
        })
        .collect();
    Ok(LipsRun {
        islands,
        steps,
        proposals: built,
    })
}
