//! Region-sequence prediction via beam search over a pluggable
//! autoregressive scorer, and the uniform-weight Gaussian mixture built
//! from a predicted sequence.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::kinematics::JointConfig;
use crate::mix_seed;
use crate::regions::{
    reparam_sample, update_distribution, Codebook, GaussianParams, LatentRegion, OptimizerParams,
};

/// Ordered codebook indices ending in the goal token; at least one
/// decodable region precedes the goal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionSequence {
    indices: Vec<usize>,
}

impl RegionSequence {
    pub fn new(indices: Vec<usize>, goal_token: usize) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::InvalidModel(
                "region sequence needs at least one region before the goal token".into(),
            ));
        }
        if *indices.last().unwrap() != goal_token {
            return Err(Error::InvalidModel("region sequence must end with the goal token".into()));
        }
        if indices[..indices.len() - 1].iter().any(|&i| i >= goal_token) {
            return Err(Error::InvalidModel("goal token may only appear as the final entry".into()));
        }
        Ok(RegionSequence { indices })
    }

    /// All indices including the trailing goal token.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// The decodable region indices (goal token stripped).
    pub fn region_indices(&self) -> &[usize] {
        &self.indices[..self.indices.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Autoregressive scorer over codebook indices plus the goal token.
///
/// `step` returns a probability vector over all `vocab_size()` entries
/// (nonnegative, summing to one) given the region-index prefix. Whatever
/// planning context the scorer needs lives inside the implementation.
pub trait SequenceScorer {
    /// Region count plus one for the goal token.
    fn vocab_size(&self) -> usize;
    fn step(&self, prefix: &[usize]) -> Vec<f64>;

    /// Goal token index, always the last vocabulary entry.
    fn goal_token(&self) -> usize {
        self.vocab_size() - 1
    }
}

#[derive(Clone, Debug)]
struct Beam {
    indices: Vec<usize>,
    logp: f64,
}

/// Higher log-probability wins; ties break toward shorter sequences, then
/// lexicographically smaller index order.
fn beam_cmp(a: &Beam, b: &Beam) -> std::cmp::Ordering {
    b.logp
        .partial_cmp(&a.logp)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.indices.len().cmp(&b.indices.len()))
        .then_with(|| a.indices.cmp(&b.indices))
}

/// Find the most probable goal-terminated sequence of total length at most
/// `max_len`, exploring `beam_width` prefixes per step in log space.
/// Sequences that reach the goal token are frozen and compete with live
/// beams for the final answer. A bare goal token is never emitted since a
/// sequence needs at least one decodable region.
pub fn beam_search(
    scorer: &dyn SequenceScorer,
    beam_width: usize,
    max_len: usize,
) -> Result<RegionSequence> {
    if beam_width == 0 || max_len == 0 {
        return Err(Error::InvalidModel("beam_width and max_len must be >= 1".into()));
    }
    let vocab = scorer.vocab_size();
    let goal = scorer.goal_token();
    let mut live = vec![Beam { indices: Vec::new(), logp: 0.0 }];
    let mut best: Option<Beam> = None;

    for _ in 0..max_len {
        let mut candidates: Vec<Beam> = Vec::new();
        for beam in &live {
            let probs = scorer.step(&beam.indices);
            debug_assert_eq!(probs.len(), vocab);
            for (tok, &p) in probs.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let logp = beam.logp + p.ln();
                if tok == goal {
                    if beam.indices.is_empty() {
                        continue;
                    }
                    let mut indices = beam.indices.clone();
                    indices.push(goal);
                    let done = Beam { indices, logp };
                    if best.as_ref().map_or(true, |b| beam_cmp(&done, b).is_lt()) {
                        best = Some(done);
                    }
                } else {
                    let mut indices = beam.indices.clone();
                    indices.push(tok);
                    candidates.push(Beam { indices, logp });
                }
            }
        }
        candidates.sort_by(beam_cmp);
        candidates.truncate(beam_width);
        live = candidates;
        if live.is_empty() {
            break;
        }
    }

    match best {
        Some(b) => RegionSequence::new(b.indices, goal),
        None => Err(Error::NoSequence),
    }
}

/// Distance-based stand-in for a learned sequence model.
///
/// Regions are scored by a softmax over negative distances from their
/// means to the current progress point on the straight `q_s -> q_g`
/// segment; only regions strictly ahead of the prefix's progress are
/// eligible, so prediction advances monotonically along the segment. The
/// goal token's probability ramps to one as the last region mean
/// approaches `q_g`, and takes all remaining mass once no region is ahead.
pub struct HeuristicScorer {
    means: Vec<DVector<f64>>,
    t_param: Vec<f64>,
    q_start: DVector<f64>,
    q_goal: DVector<f64>,
    seg: DVector<f64>,
    temperature: f64,
    goal_scale: f64,
}

/// Build a [`HeuristicScorer`] for a start/goal query.
pub fn heuristic_scorer(
    codebook: &Codebook,
    q_s: &JointConfig,
    q_g: &JointConfig,
    temperature: f64,
) -> Result<HeuristicScorer> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidModel(format!("temperature must be > 0, got {temperature}")));
    }
    let n = codebook.config_dim();
    if q_s.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q_s.dim() });
    }
    if q_g.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q_g.dim() });
    }
    let means: Vec<DVector<f64>> = (0..codebook.len()).map(|i| codebook.decode_index(i).mu).collect();
    let seg = &q_g.q - &q_s.q;
    let len2 = seg.norm_squared();
    let t_param = means
        .iter()
        .map(|m| if len2 > 0.0 { ((m - &q_s.q).dot(&seg) / len2).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let goal_scale = (0.25 * len2.sqrt()).max(1e-9);
    Ok(HeuristicScorer {
        means,
        t_param,
        q_start: q_s.q.clone(),
        q_goal: q_g.q.clone(),
        seg,
        temperature,
        goal_scale,
    })
}

impl SequenceScorer for HeuristicScorer {
    fn vocab_size(&self) -> usize {
        self.means.len() + 1
    }

    fn step(&self, prefix: &[usize]) -> Vec<f64> {
        let n_regions = self.means.len();
        let mut probs = vec![0.0; n_regions + 1];
        let t_prefix = prefix.last().map(|&i| self.t_param[i]).unwrap_or(0.0);
        let last_mean = prefix.last().map(|&i| &self.means[i]).unwrap_or(&self.q_start);
        let r = (last_mean - &self.q_goal).norm();
        let goal_raw = (-(r / self.goal_scale).powi(2)).exp();

        let eligible: Vec<usize> =
            (0..n_regions).filter(|&i| self.t_param[i] > t_prefix + 1e-12).collect();
        if eligible.is_empty() {
            probs[n_regions] = 1.0;
            return probs;
        }
        let anchor = &self.q_start + &self.seg * t_prefix;
        let logits: Vec<f64> =
            eligible.iter().map(|&i| -(&self.means[i] - &anchor).norm() / self.temperature).collect();
        let max_logit = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max_logit).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (pos, &i) in eligible.iter().enumerate() {
            probs[i] = (1.0 - goal_raw) * exps[pos] / total;
        }
        probs[n_regions] = goal_raw;
        probs
    }
}

/// Uniform-weight mixture of decoded Gaussians; the planner's sampling
/// distribution.
#[derive(Clone, Debug)]
pub struct GmmSampler {
    components: Vec<GaussianParams>,
}

impl GmmSampler {
    pub fn from_components(components: Vec<GaussianParams>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let n = components[0].dim();
        for c in &components {
            if c.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.dim() });
            }
        }
        Ok(GmmSampler { components })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Mixing coefficient shared by every component.
    pub fn weight(&self) -> f64 {
        1.0 / self.components.len() as f64
    }

    pub fn component(&self, i: usize) -> &GaussianParams {
        &self.components[i]
    }

    /// Draw one configuration: pick a component uniformly, then apply the
    /// reparameterized transform to standard-normal noise.
    pub fn sample(&self, rng: &mut impl Rng) -> JointConfig {
        let idx = rng.gen_range(0..self.components.len());
        self.sample_component(idx, rng)
    }

    /// Draw from one fixed component (used for goal-biased sampling).
    pub fn sample_component(&self, idx: usize, rng: &mut impl Rng) -> JointConfig {
        let eps = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        self.sample_component_with_eps(idx, &eps)
    }

    /// Deterministic draw for a given noise vector.
    pub fn sample_component_with_eps(&self, idx: usize, eps: &DVector<f64>) -> JointConfig {
        reparam_sample(&self.components[idx], eps)
    }

    /// Mixture log density; finite everywhere because every component's
    /// covariance is strictly positive definite.
    pub fn log_density(&self, q: &DVector<f64>) -> f64 {
        let logs: Vec<f64> = self.components.iter().map(|c| c.log_density(q)).collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        max + (sum / self.components.len() as f64).ln()
    }

    pub fn density(&self, q: &DVector<f64>) -> f64 {
        self.log_density(q).exp()
    }

    /// Index of the component whose mean is nearest `q`.
    pub fn nearest_component(&self, q: &DVector<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.components.iter().enumerate() {
            let d = crate::kinematics::dist_sq(&c.mu, q);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Decode every non-goal index of `h` into a mixture component with
/// uniform weights; duplicate indices produce duplicate components.
pub fn build_gmm(codebook: &Codebook, h: &RegionSequence) -> Result<GmmSampler> {
    let mut components = Vec::with_capacity(h.len() - 1);
    for &i in h.region_indices() {
        if i >= codebook.len() {
            return Err(Error::InvalidModel(format!("region index {i} out of range")));
        }
        components.push(codebook.decode_index(i));
    }
    GmmSampler::from_components(components)
}

/// Mixture over explicit latents, e.g. after a per-query region update.
pub fn build_gmm_from_latents(codebook: &Codebook, latents: &[LatentRegion]) -> Result<GmmSampler> {
    let mut components = Vec::with_capacity(latents.len());
    for z in latents {
        components.push(codebook.decode(z)?);
    }
    GmmSampler::from_components(components)
}

/// Outcome of optimizing every region of a sequence.
#[derive(Clone, Debug)]
pub struct SequenceOptimization {
    /// Updated latents in sequence order; regions whose update failed keep
    /// their original latent.
    pub latents: Vec<LatentRegion>,
    /// Total gradient-descent iterations across all regions.
    pub total_iterations: usize,
    pub failed_regions: usize,
}

/// Apply [`update_distribution`] independently to each non-goal region of
/// `h`. The shared codebook is never mutated; updates are per-query
/// copies. Each region's noise stream is seeded from its codebook index,
/// so results are invariant to the order regions appear in `h`.
pub fn optimize_sequence_regions_with_stats(
    codebook: &Codebook,
    h: &RegionSequence,
    f: &ConstraintSet,
    params: &OptimizerParams,
) -> SequenceOptimization {
    let mut out = SequenceOptimization {
        latents: Vec::with_capacity(h.len() - 1),
        total_iterations: 0,
        failed_regions: 0,
    };
    for &idx in h.region_indices() {
        let per_region = OptimizerParams { seed: mix_seed(params.seed, idx as u64), ..*params };
        match update_distribution(codebook, codebook.region(idx), f, &per_region) {
            Ok(up) => {
                out.total_iterations += up.iterations;
                out.latents.push(up.region);
            }
            Err(_) => {
                out.failed_regions += 1;
                out.latents.push(codebook.region(idx).clone());
            }
        }
    }
    out
}

/// Updated latents for `h`, in sequence order.
pub fn optimize_sequence_regions(
    codebook: &Codebook,
    h: &RegionSequence,
    f: &ConstraintSet,
    params: &OptimizerParams,
) -> Vec<LatentRegion> {
    optimize_sequence_regions_with_stats(codebook, h, f, params).latents
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::sample_eps_batch;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scorer that deterministically walks `chain` then emits the goal.
    struct ChainScorer {
        chain: Vec<usize>,
        vocab: usize,
    }

    impl SequenceScorer for ChainScorer {
        fn vocab_size(&self) -> usize {
            self.vocab
        }

        fn step(&self, prefix: &[usize]) -> Vec<f64> {
            let mut p = vec![0.0; self.vocab];
            let next =
                if prefix.len() < self.chain.len() { self.chain[prefix.len()] } else { self.vocab - 1 };
            p[next] = 1.0;
            p
        }
    }

    /// Deterministic pseudo-random scorer: softmax logits hashed from the
    /// prefix. Pure function of (seed, prefix).
    pub(crate) struct HashScorer {
        pub seed: u64,
        pub vocab: usize,
    }

    impl SequenceScorer for HashScorer {
        fn vocab_size(&self) -> usize {
            self.vocab
        }

        fn step(&self, prefix: &[usize]) -> Vec<f64> {
            let mut h = self.seed;
            for &i in prefix {
                h = mix_seed(h, i as u64 + 1);
            }
            let mut exps: Vec<f64> = (0..self.vocab)
                .map(|t| {
                    let r = mix_seed(h, 1000 + t as u64) as f64 / u64::MAX as f64;
                    (2.0 * r).exp()
                })
                .collect();
            let total: f64 = exps.iter().sum();
            for e in &mut exps {
                *e /= total;
            }
            exps
        }
    }

    /// Best goal-terminated sequence (>= 1 region) by exhaustive
    /// depth-first enumeration with the same scoring and tie-breaks.
    pub(crate) fn enumerate_best(
        scorer: &dyn SequenceScorer,
        max_len: usize,
    ) -> Option<(Vec<usize>, f64)> {
        let goal = scorer.goal_token();
        let mut best: Option<Beam> = None;
        let mut stack: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
        while let Some((prefix, logp)) = stack.pop() {
            if prefix.len() >= max_len {
                continue;
            }
            let probs = scorer.step(&prefix);
            for (tok, &p) in probs.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let lp = logp + p.ln();
                if tok == goal {
                    if prefix.is_empty() {
                        continue;
                    }
                    let mut seq = prefix.clone();
                    seq.push(goal);
                    let cand = Beam { indices: seq, logp: lp };
                    if best.as_ref().map_or(true, |b| beam_cmp(&cand, b).is_lt()) {
                        best = Some(cand);
                    }
                } else {
                    let mut seq = prefix.clone();
                    seq.push(tok);
                    stack.push((seq, lp));
                }
            }
        }
        best.map(|b| (b.indices, b.logp))
    }

    pub(crate) fn score_of(scorer: &dyn SequenceScorer, seq: &[usize]) -> f64 {
        let mut logp = 0.0;
        for (i, &tok) in seq.iter().enumerate() {
            let probs = scorer.step(&seq[..i]);
            logp += probs[tok].ln();
        }
        logp
    }

    #[test]
    fn beam_follows_deterministic_chain() {
        let scorer = ChainScorer { chain: vec![2, 0, 3], vocab: 5 };
        let h = beam_search(&scorer, 4, 10).unwrap();
        assert_eq!(h.indices(), &[2, 0, 3, 4]);
        assert_eq!(h.region_indices(), &[2, 0, 3]);
    }

    #[test]
    fn beam_matches_exhaustive_enumeration_at_full_width() {
        for seed in 0..20 {
            let scorer = HashScorer { seed, vocab: 5 };
            let h = beam_search(&scorer, 625, 4).unwrap();
            let (best, _) = enumerate_best(&scorer, 4).unwrap();
            assert_eq!(h.indices(), &best[..], "seed {seed}");
        }
    }

    #[test]
    fn beam_width_one_tracks_greedy() {
        for seed in 0..20 {
            let scorer = HashScorer { seed, vocab: 5 };
            let goal = scorer.goal_token();
            // Greedy oracle: iterated argmax (lowest index on ties), skipping
            // a bare goal at the first step.
            let mut prefix: Vec<usize> = Vec::new();
            let greedy = loop {
                let probs = scorer.step(&prefix);
                let mut arg = 0;
                for (t, &p) in probs.iter().enumerate() {
                    if p > probs[arg] {
                        arg = t;
                    }
                }
                if arg == goal && prefix.is_empty() {
                    let best_region = probs[..goal]
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .unwrap()
                        .0;
                    prefix.push(best_region);
                    continue;
                }
                if arg == goal {
                    let mut seq = prefix.clone();
                    seq.push(goal);
                    break seq;
                }
                prefix.push(arg);
                assert!(prefix.len() <= 16, "greedy did not terminate");
            };
            // The width-1 beam explores exactly the greedy prefix chain; it
            // may additionally freeze an earlier goal completion, which can
            // only improve the returned score.
            let h = beam_search(&scorer, 1, 16).unwrap();
            let greedy_logp = score_of(&scorer, &greedy);
            let beam_logp = score_of(&scorer, h.indices());
            assert!(beam_logp >= greedy_logp - 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn beam_no_sequence_when_goal_unreachable() {
        struct NoGoal;
        impl SequenceScorer for NoGoal {
            fn vocab_size(&self) -> usize {
                3
            }
            fn step(&self, _prefix: &[usize]) -> Vec<f64> {
                vec![0.5, 0.5, 0.0]
            }
        }
        assert!(matches!(beam_search(&NoGoal, 4, 6), Err(Error::NoSequence)));
    }

    fn codebook_with_means(means: &[Vec<f64>]) -> Codebook {
        let n = means[0].len();
        let regions = means
            .iter()
            .map(|m| {
                Codebook::pack(
                    &DVector::from_vec(m.clone()),
                    &DMatrix::zeros(n, n),
                    &DVector::from_element(n, (0.1_f64).ln()),
                )
            })
            .collect();
        Codebook::new(n, regions).unwrap()
    }

    #[test]
    fn heuristic_goal_is_argmax_when_start_equals_goal() {
        let cb = codebook_with_means(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let q = JointConfig::from_slice(&[0.3, 0.3]);
        let scorer = heuristic_scorer(&cb, &q, &q, 0.2).unwrap();
        let probs = scorer.step(&[]);
        assert_relative_eq!(probs[2], 1.0);
    }

    #[test]
    fn heuristic_recovers_segment_order_at_low_temperature() {
        // Means exactly on the segment at t = 0.2, 0.4, 0.6, 0.8, shuffled
        // in codebook order.
        let q_s = JointConfig::from_slice(&[0.0, 0.0]);
        let q_g = JointConfig::from_slice(&[2.0, 2.0]);
        let ts = [0.6, 0.2, 0.8, 0.4];
        let means: Vec<Vec<f64>> = ts.iter().map(|t| vec![2.0 * t, 2.0 * t]).collect();
        let cb = codebook_with_means(&means);
        let scorer = heuristic_scorer(&cb, &q_s, &q_g, 1e-3).unwrap();
        let h = beam_search(&scorer, 4, 10).unwrap();
        // Oracle: indices ordered by projection parameter along the segment.
        assert_eq!(h.region_indices(), &[1, 3, 0, 2]);
    }

    #[test]
    fn heuristic_step_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let means: Vec<Vec<f64>> =
            (0..6).map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let cb = codebook_with_means(&means);
        let q_s = JointConfig::from_slice(&[-1.0, 0.0, 1.0]);
        let q_g = JointConfig::from_slice(&[1.5, 0.5, -1.0]);
        let scorer = heuristic_scorer(&cb, &q_s, &q_g, 0.3).unwrap();
        let mut prefix: Vec<usize> = Vec::new();
        for _ in 0..4 {
            let probs = scorer.step(&prefix);
            let total: f64 = probs.iter().sum();
            assert!((total - 1.0).abs() <= 1e-9, "sum {total}");
            assert!(probs.iter().all(|&p| p >= 0.0));
            let arg =
                probs.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            if arg == scorer.goal_token() {
                break;
            }
            prefix.push(arg);
        }
    }

    #[test]
    fn build_gmm_component_counts_and_weights() {
        let cb =
            codebook_with_means(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.0], vec![0.0, 2.0]]);
        let goal = cb.goal_token();
        let single = build_gmm(&cb, &RegionSequence::new(vec![1, goal], goal).unwrap()).unwrap();
        assert_eq!(single.len(), 1);
        assert_relative_eq!(single.weight(), 1.0);

        let four =
            build_gmm(&cb, &RegionSequence::new(vec![0, 1, 2, 3, goal], goal).unwrap()).unwrap();
        assert_eq!(four.len(), 4);
        assert_relative_eq!(four.weight(), 0.25);

        // Duplicate indices stay duplicated, each with uniform weight.
        let dup = build_gmm(&cb, &RegionSequence::new(vec![1, 1, goal], goal).unwrap()).unwrap();
        assert_eq!(dup.len(), 2);
        assert_relative_eq!(dup.weight(), 0.5);
        assert_eq!(dup.component(0), dup.component(1));
    }

    #[test]
    fn region_sequence_validation() {
        assert!(RegionSequence::new(vec![], 3).is_err());
        assert!(RegionSequence::new(vec![3], 3).is_err());
        assert!(RegionSequence::new(vec![0, 1], 3).is_err());
        assert!(RegionSequence::new(vec![0, 3, 1, 3], 3).is_err());
        assert!(RegionSequence::new(vec![0, 3], 3).is_ok());
    }

    #[test]
    fn sample_with_zero_eps_returns_mean() {
        let cb = codebook_with_means(&[vec![0.7, -0.4]]);
        let goal = cb.goal_token();
        let gmm = build_gmm(&cb, &RegionSequence::new(vec![0, goal], goal).unwrap()).unwrap();
        let q = gmm.sample_component_with_eps(0, &DVector::zeros(2));
        assert_relative_eq!(q.q[0], 0.7);
        assert_relative_eq!(q.q[1], -0.4);
    }

    #[test]
    fn component_selection_is_uniform() {
        let cb = codebook_with_means(&[vec![-5.0, 0.0], vec![5.0, 0.0]]);
        let goal = cb.goal_token();
        let gmm = build_gmm(&cb, &RegionSequence::new(vec![0, 1, goal], goal).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = 100_000;
        let mut first = 0usize;
        for _ in 0..m {
            let q = gmm.sample(&mut rng);
            if q.q[0] < 0.0 {
                first += 1;
            }
        }
        let frac = first as f64 / m as f64;
        assert!((frac - 0.5).abs() <= 0.01, "component frequency {frac}");
    }

    #[test]
    fn single_component_sample_mean_matches() {
        let cb = codebook_with_means(&[vec![0.3, -0.9, 0.1]]);
        let goal = cb.goal_token();
        let gmm = build_gmm(&cb, &RegionSequence::new(vec![0, goal], goal).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let m = 100_000;
        let mut mean = DVector::zeros(3);
        for _ in 0..m {
            mean += gmm.sample(&mut rng).q;
        }
        mean /= m as f64;
        let mu = &gmm.component(0).mu;
        // Per-coordinate sigma is 0.1; tolerance 3 sigma / sqrt(m).
        let tol = 3.0 * 0.1 / (m as f64).sqrt();
        for i in 0..3 {
            assert!((mean[i] - mu[i]).abs() <= tol, "coord {i}: {} vs {}", mean[i], mu[i]);
        }
    }

    #[test]
    fn density_integrates_to_one_on_grid() {
        let cb = codebook_with_means(&[vec![-0.3, 0.2], vec![0.4, -0.1]]);
        let goal = cb.goal_token();
        let gmm = build_gmm(&cb, &RegionSequence::new(vec![0, 1, goal], goal).unwrap()).unwrap();
        // Component sigma is 0.1, so a box well past the means captures
        // essentially all mass. Midpoint quadrature, 400x400 cells.
        let (lo, hi, steps) = (-1.5, 1.5, 400);
        let hstep = (hi - lo) / steps as f64;
        let mut integral = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                let q = DVector::from_vec(vec![
                    lo + (i as f64 + 0.5) * hstep,
                    lo + (j as f64 + 0.5) * hstep,
                ]);
                integral += gmm.density(&q) * hstep * hstep;
            }
        }
        assert!((integral - 1.0).abs() <= 0.02, "integral {integral}");
    }

    #[test]
    fn log_density_finite_everywhere() {
        let cb = codebook_with_means(&[vec![0.0, 0.0], vec![2.0, -2.0]]);
        let goal = cb.goal_token();
        let gmm = build_gmm(&cb, &RegionSequence::new(vec![0, 1, goal], goal).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..1000 {
            let q = DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0));
            assert!(gmm.log_density(&q).is_finite());
        }
    }

    #[test]
    fn empty_component_list_is_rejected() {
        assert!(matches!(GmmSampler::from_components(vec![]), Err(Error::EmptyMixture)));
    }

    #[test]
    fn failed_region_updates_keep_original_latents() {
        // Residual turns NaN away from the origin, so every update aborts.
        let cb = codebook_with_means(&[vec![0.5, 0.5], vec![-0.5, 0.5]]);
        let goal = cb.goal_token();
        let h = RegionSequence::new(vec![0, 1, goal], goal).unwrap();
        let f = ConstraintSet::new_analytic(
            1,
            2,
            |q| DVector::from_vec(vec![if q[0].abs() > 0.01 { f64::NAN } else { q[0] }]),
            |_| DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        );
        let stats =
            optimize_sequence_regions_with_stats(&cb, &h, &f, &OptimizerParams::default());
        assert_eq!(stats.failed_regions, 2);
        for (i, z) in stats.latents.iter().enumerate() {
            assert_eq!(z, cb.region(h.region_indices()[i]));
        }
    }

    #[test]
    fn optimize_sequence_unconstrained_is_noop() {
        let cb = codebook_with_means(&[vec![0.5, 0.5], vec![-0.5, 0.5]]);
        let goal = cb.goal_token();
        let h = RegionSequence::new(vec![0, 1, goal], goal).unwrap();
        let f = ConstraintSet::unconstrained(2);
        let params = OptimizerParams::default();
        let latents = optimize_sequence_regions(&cb, &h, &f, &params);
        for (i, z) in latents.iter().enumerate() {
            assert!((&z.z - &cb.region(h.region_indices()[i]).z).norm() <= params.delta_stop);
        }
    }

    #[test]
    fn optimize_sequence_reduces_expected_g_per_region() {
        let cb = codebook_with_means(&[vec![0.8, -0.2], vec![-0.6, 0.9], vec![0.1, 1.4]]);
        let goal = cb.goal_token();
        let h = RegionSequence::new(vec![0, 1, 2, goal], goal).unwrap();
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![0.3]);
        let f = ConstraintSet::linear(a.clone(), b.clone());
        let params = OptimizerParams { seed: 5, ..Default::default() };
        let latents = optimize_sequence_regions(&cb, &h, &f, &params);
        let eg = |p: &GaussianParams| {
            let bias = &a * &p.mu - &b;
            bias.norm_squared() + (&a * p.covariance() * a.transpose()).trace()
        };
        for (pos, &idx) in h.region_indices().iter().enumerate() {
            let before = cb.decode_index(idx);
            let after = cb.decode(&latents[pos]).unwrap();
            assert!(eg(&after) <= eg(&before) + 1e-12, "region {idx}");
        }
    }

    #[test]
    fn optimize_sequence_order_invariant() {
        let cb = codebook_with_means(&[vec![0.8, -0.2], vec![-0.6, 0.9], vec![0.1, 1.4]]);
        let goal = cb.goal_token();
        let f = ConstraintSet::linear(
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            DVector::from_vec(vec![0.1]),
        );
        let params = OptimizerParams { seed: 9, ..Default::default() };
        let fwd = RegionSequence::new(vec![0, 1, 2, goal], goal).unwrap();
        let rev = RegionSequence::new(vec![2, 1, 0, goal], goal).unwrap();
        let a = optimize_sequence_regions(&cb, &fwd, &f, &params);
        let b = optimize_sequence_regions(&cb, &rev, &f, &params);
        for i in 0..3 {
            assert_eq!(a[i], b[2 - i]);
        }
    }

    #[test]
    fn gmm_sampling_consistent_with_decode() {
        let cb = codebook_with_means(&[vec![0.2, 0.1]]);
        let goal = cb.goal_token();
        let h = RegionSequence::new(vec![0, goal], goal).unwrap();
        let gmm = build_gmm(&cb, &h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let eps = sample_eps_batch(&mut rng, 4, 2);
        for e in &eps {
            let a = gmm.sample_component_with_eps(0, e);
            let b = reparam_sample(&cb.decode_index(0), e);
            assert_eq!(a.q, b.q);
        }
    }
}

#[cfg(test)]
mod width_monotonicity {
    use super::tests::{score_of, HashScorer};
    use super::*;

    /// Wider beams never return a lower-probability sequence on any of the
    /// scorers in this seeded family.
    #[test]
    fn wider_beams_do_not_lose_probability() {
        for seed in 0..100u64 {
            let scorer = HashScorer { seed, vocab: 5 };
            let widths = [1usize, 2, 3, 4, 8, 625];
            let scores: Vec<f64> = widths
                .iter()
                .map(|&w| {
                    beam_search(&scorer, w, 4)
                        .map(|h| score_of(&scorer, h.indices()))
                        .unwrap_or(f64::NEG_INFINITY)
                })
                .collect();
            for i in 0..widths.len() - 1 {
                assert!(
                    scores[i] <= scores[i + 1] + 1e-12,
                    "seed {seed}: width {} scored {:.6}, width {} scored {:.6}",
                    widths[i],
                    scores[i],
                    widths[i + 1],
                    scores[i + 1]
                );
            }
        }
    }
}
