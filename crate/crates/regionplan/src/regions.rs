//! Latent sampling regions: a codebook of latent vectors, a differentiable
//! decoder `z -> (mu, Sigma)` with `Sigma = L D^2 L^T`, and the
//! gradient-descent update that pulls a region toward the constraint
//! manifold by minimizing the Monte-Carlo mean of `G(q) = |F(q)|^2`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::kinematics::JointConfig;

/// Diagonal entries of `D` are `exp` of the packed value, floored here so
/// an optimizer driving variances to zero cannot produce a singular scale.
pub const LOG_DIAG_FLOOR: f64 = -20.0;

/// A latent region parameter; decodes to one Gaussian over configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentRegion {
    pub z: DVector<f64>,
}

impl LatentRegion {
    pub fn new(z: DVector<f64>) -> Self {
        LatentRegion { z }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// Gaussian `N(mu, L D^2 L^T)` with unit lower-triangular `L` and positive
/// diagonal `D` (stored as the diagonal vector `d`).
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub mu: DVector<f64>,
    pub l: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl GaussianParams {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `Sigma = L D^2 L^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let ld = self.scale_tril();
        &ld * ld.transpose()
    }

    /// Lower-triangular factor `L D`, so `Sigma = (LD)(LD)^T`.
    pub fn scale_tril(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut ld = self.l.clone();
        for j in 0..n {
            for i in j..n {
                ld[(i, j)] *= self.d[j];
            }
        }
        ld
    }

    /// Log density at `q`; the factor form keeps this exact even for
    /// near-degenerate scales.
    pub fn log_density(&self, q: &DVector<f64>) -> f64 {
        let n = self.dim();
        let ld = self.scale_tril();
        // Forward substitution for (LD) y = q - mu.
        let mut y = q - &self.mu;
        for i in 0..n {
            for j in 0..i {
                let yj = y[j];
                y[i] -= ld[(i, j)] * yj;
            }
            y[i] /= ld[(i, i)];
        }
        let log_det: f64 = (0..n).map(|i| ld[(i, i)].ln()).sum();
        -0.5 * y.norm_squared() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - log_det
    }
}

/// Packed latent layout: `[mu (n)] [strict lower L, row-major (n(n-1)/2)]
/// [log diag D (n)]`.
#[derive(Clone, Copy, Debug)]
struct Layout {
    n: usize,
}

impl Layout {
    fn latent_dim(&self) -> usize {
        2 * self.n + self.n * (self.n - 1) / 2
    }

    fn mu_at(&self, i: usize) -> usize {
        i
    }

    fn l_at(&self, i: usize, j: usize) -> usize {
        debug_assert!(j < i);
        // Strict-lower row-major offset: rows 1..i contribute 1 + 2 + ...
        self.n + i * (i - 1) / 2 + j
    }

    fn logd_at(&self, j: usize) -> usize {
        self.n + self.n * (self.n - 1) / 2 + j
    }
}

/// A codebook of latent regions plus the decoder that maps each region to
/// a Gaussian over the `n`-dimensional configuration space. The goal token
/// is the extra index `regions.len()` and has no decoded Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    config_dim: usize,
    regions: Vec<LatentRegion>,
}

#[derive(Serialize, Deserialize)]
struct CodebookFile {
    n: usize,
    d: usize,
    regions: Vec<RegionFile>,
}

#[derive(Serialize, Deserialize)]
struct RegionFile {
    z: Vec<f64>,
}

impl Codebook {
    pub fn new(config_dim: usize, regions: Vec<LatentRegion>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidModel("codebook needs at least one region".into()));
        }
        let d = Layout { n: config_dim }.latent_dim();
        for (i, r) in regions.iter().enumerate() {
            if r.dim() != d {
                return Err(Error::InvalidModel(format!(
                    "regions[{i}] has latent dim {}, expected {d}",
                    r.dim()
                )));
            }
        }
        Ok(Codebook { config_dim, regions })
    }

    pub fn config_dim(&self) -> usize {
        self.config_dim
    }

    /// Latent dimension `d = 2n + n(n-1)/2`.
    pub fn latent_dim(&self) -> usize {
        Layout { n: self.config_dim }.latent_dim()
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Index of the goal token (one past the last region).
    pub fn goal_token(&self) -> usize {
        self.regions.len()
    }

    pub fn region(&self, i: usize) -> &LatentRegion {
        &self.regions[i]
    }

    pub fn regions(&self) -> &[LatentRegion] {
        &self.regions
    }

    /// Pack `(mu, strict lower L, log diag D)` into a latent vector.
    pub fn pack(mu: &DVector<f64>, l_strict: &DMatrix<f64>, log_d: &DVector<f64>) -> LatentRegion {
        let n = mu.len();
        let layout = Layout { n };
        let mut z = DVector::zeros(layout.latent_dim());
        for i in 0..n {
            z[layout.mu_at(i)] = mu[i];
        }
        for i in 1..n {
            for j in 0..i {
                z[layout.l_at(i, j)] = l_strict[(i, j)];
            }
        }
        for j in 0..n {
            z[layout.logd_at(j)] = log_d[j];
        }
        LatentRegion::new(z)
    }

    /// Decode a latent vector into Gaussian parameters. Deterministic and
    /// differentiable; the Cholesky-style factor makes `Sigma` positive
    /// definite by construction.
    pub fn decode(&self, region: &LatentRegion) -> Result<GaussianParams> {
        if region.dim() != self.latent_dim() {
            return Err(Error::DimensionMismatch { expected: self.latent_dim(), got: region.dim() });
        }
        Ok(self.decode_unchecked(&region.z))
    }

    pub fn decode_index(&self, i: usize) -> GaussianParams {
        self.decode_unchecked(&self.regions[i].z)
    }

    fn decode_unchecked(&self, z: &DVector<f64>) -> GaussianParams {
        let n = self.config_dim;
        let layout = Layout { n };
        let mu = DVector::from_fn(n, |i, _| z[layout.mu_at(i)]);
        let mut l = DMatrix::identity(n, n);
        for i in 1..n {
            for j in 0..i {
                l[(i, j)] = z[layout.l_at(i, j)];
            }
        }
        let d = DVector::from_fn(n, |j, _| z[layout.logd_at(j)].max(LOG_DIAG_FLOOR).exp());
        GaussianParams { mu, l, d }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CodebookFile {
            n: self.config_dim,
            d: self.latent_dim(),
            regions: self.regions.iter().map(|r| RegionFile { z: r.z.iter().copied().collect() }).collect(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: CodebookFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let cb = Codebook::new(
            file.n,
            file.regions.into_iter().map(|r| LatentRegion::new(DVector::from_vec(r.z))).collect(),
        )?;
        if cb.latent_dim() != file.d {
            return Err(Error::InvalidModel(format!(
                "codebook latent dim {} does not match n = {}",
                file.d, file.n
            )));
        }
        Ok(cb)
    }
}

/// `q = mu + L D eps`; deterministic given `(params, eps)`.
pub fn reparam_sample(params: &GaussianParams, eps: &DVector<f64>) -> JointConfig {
    let n = params.dim();
    debug_assert_eq!(eps.len(), n);
    let mut de = DVector::zeros(n);
    for j in 0..n {
        de[j] = params.d[j] * eps[j];
    }
    JointConfig::new(&params.mu + &params.l * de)
}

/// Standard-normal noise batch used by the Monte-Carlo estimators.
pub fn sample_eps_batch(rng: &mut impl Rng, count: usize, dim: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|_| DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// Monte-Carlo estimate of `E[G(q)]` over the decoded region, holding the
/// noise batch fixed.
pub fn mc_loss(
    codebook: &Codebook,
    region: &LatentRegion,
    f: &ConstraintSet,
    eps_batch: &[DVector<f64>],
) -> f64 {
    assert!(!eps_batch.is_empty(), "eps_batch must be nonempty");
    let params = codebook.decode(region).expect("latent dimension mismatch");
    let mut acc = 0.0;
    for eps in eps_batch {
        let q = reparam_sample(&params, eps);
        acc += f.g_at(&q.q);
    }
    acc / eps_batch.len() as f64
}

/// Gradient of [`mc_loss`] with respect to the latent vector, with the
/// noise batch held fixed (common random numbers).
pub fn loss_gradient(
    codebook: &Codebook,
    region: &LatentRegion,
    f: &ConstraintSet,
    eps_batch: &[DVector<f64>],
) -> DVector<f64> {
    loss_and_gradient(codebook, region, f, eps_batch).1
}

/// Loss and gradient in one pass over the batch.
pub fn loss_and_gradient(
    codebook: &Codebook,
    region: &LatentRegion,
    f: &ConstraintSet,
    eps_batch: &[DVector<f64>],
) -> (f64, DVector<f64>) {
    assert!(!eps_batch.is_empty(), "eps_batch must be nonempty");
    let n = codebook.config_dim();
    let layout = Layout { n };
    let params = codebook.decode(region).expect("latent dimension mismatch");
    let mut grad = DVector::zeros(codebook.latent_dim());
    let mut loss = 0.0;
    for eps in eps_batch {
        let mut de = DVector::zeros(n);
        for j in 0..n {
            de[j] = params.d[j] * eps[j];
        }
        let q = &params.mu + &params.l * &de;
        let res = f.residual_at(&q);
        loss += res.norm_squared();
        // dG/dq = 2 J^T F(q), then chain through q = mu + L D eps.
        let gq = 2.0 * f.jacobian_at(&q).transpose() * res;
        for i in 0..n {
            grad[layout.mu_at(i)] += gq[i];
        }
        for i in 1..n {
            for j in 0..i {
                grad[layout.l_at(i, j)] += gq[i] * de[j];
            }
        }
        for j in 0..n {
            if region.z[layout.logd_at(j)] >= LOG_DIAG_FLOOR {
                let col_dot: f64 = (j..n).map(|i| params.l[(i, j)] * gq[i]).sum();
                grad[layout.logd_at(j)] += col_dot * de[j];
            }
        }
    }
    let b = eps_batch.len() as f64;
    (loss / b, grad / b)
}

/// Gradient-descent settings for [`update_distribution`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerParams {
    /// Learning rate.
    pub eta: f64,
    /// Monte-Carlo samples per iteration.
    pub n_mc: usize,
    /// Stop once the applied step `|eta * grad|` falls below this.
    pub delta_stop: f64,
    pub max_outer_iters: usize,
    pub seed: u64,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams { eta: 0.05, n_mc: 64, delta_stop: 1e-3, max_outer_iters: 200, seed: 0 }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::InvalidModel(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.n_mc == 0 {
            return Err(Error::InvalidModel("n_mc must be >= 1".into()));
        }
        if !(self.delta_stop > 0.0) {
            return Err(Error::InvalidModel(format!("delta_stop must be > 0, got {}", self.delta_stop)));
        }
        Ok(())
    }
}

/// Result of one region update.
#[derive(Clone, Debug)]
pub struct DistributionUpdate {
    pub region: LatentRegion,
    /// Outer gradient-descent iterations performed.
    pub iterations: usize,
}

/// Stochastic gradient descent on the latent vector: fresh noise each
/// iteration, step `z <- z - eta * grad`, stop when the step norm drops
/// below `delta_stop`. A non-finite loss or gradient aborts with an error
/// so the caller can keep the original region.
pub fn update_distribution(
    codebook: &Codebook,
    region: &LatentRegion,
    f: &ConstraintSet,
    params: &OptimizerParams,
) -> Result<DistributionUpdate> {
    params.validate()?;
    if region.dim() != codebook.latent_dim() {
        return Err(Error::DimensionMismatch { expected: codebook.latent_dim(), got: region.dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut z = region.clone();
    for outer in 1..=params.max_outer_iters {
        let eps_batch = sample_eps_batch(&mut rng, params.n_mc, codebook.config_dim());
        let (loss, grad) = loss_and_gradient(codebook, &z, f, &eps_batch);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite loss or gradient in region update".into()));
        }
        let dz = params.eta * grad;
        z = LatentRegion::new(&z.z - &dz);
        if dz.norm() < params.delta_stop {
            return Ok(DistributionUpdate { region: z, iterations: outer });
        }
    }
    Ok(DistributionUpdate { region: z, iterations: params.max_outer_iters })
}

/// Empirical check of the tail bound `P(G > delta) <= E[G] / delta`, both
/// sides estimated from the same sample batch.
#[derive(Clone, Copy, Debug)]
pub struct MarkovCheck {
    /// Empirical `P(G(q) > delta)`.
    pub exceed_prob: f64,
    /// `mean(G) / delta`.
    pub bound: f64,
    pub exceed_se: f64,
    pub bound_se: f64,
    pub mean_g: f64,
}

pub fn markov_bound_check(
    codebook: &Codebook,
    region: &LatentRegion,
    f: &ConstraintSet,
    threshold_delta: f64,
    sample_count: usize,
    seed: u64,
) -> Result<MarkovCheck> {
    if !(threshold_delta > 0.0) {
        return Err(Error::InvalidModel(format!(
            "threshold_delta must be > 0, got {threshold_delta}"
        )));
    }
    let params = codebook.decode(region)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = sample_count as f64;
    let mut exceed = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..sample_count {
        let eps = DVector::from_fn(codebook.config_dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let g = f.g_at(&reparam_sample(&params, &eps).q);
        if g > threshold_delta {
            exceed += 1;
        }
        sum += g;
        sum_sq += g * g;
    }
    let p = exceed as f64 / m;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0);
    Ok(MarkovCheck {
        exceed_prob: p,
        bound: mean / threshold_delta,
        exceed_se: (p * (1.0 - p) / m).sqrt(),
        bound_se: (var / m).sqrt() / threshold_delta,
        mean_g: mean,
    })
}

/// Fit a codebook from path data: k-means++ seeding, a fixed 50 Lloyd
/// iterations over all waypoints, then one region per cluster with
/// `mu = centroid`, `L = I`, and `D` from per-coordinate standard
/// deviations floored at 0.05 rad.
pub fn fit_codebook(paths: &[Vec<JointConfig>], n_regions: usize, seed: u64) -> Result<Codebook> {
    const STD_FLOOR: f64 = 0.05;
    const LLOYD_ITERS: usize = 50;

    let points: Vec<&JointConfig> = paths.iter().flatten().collect();
    let Some(first) = points.first() else {
        return Err(Error::InvalidModel("empty training dataset".into()));
    };
    let n = first.dim();
    if n_regions == 0 {
        return Err(Error::InvalidModel("n_regions must be >= 1".into()));
    }
    for p in &points {
        if p.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.dim() });
        }
    }
    let distinct: std::collections::HashSet<Vec<u64>> =
        points.iter().map(|p| p.q.iter().map(|v| v.to_bits()).collect()).collect();
    if n_regions > distinct.len() {
        return Err(Error::InvalidModel(format!(
            "n_regions = {n_regions} exceeds {} distinct configurations",
            distinct.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_init(&points, n_regions, &mut rng);
    let mut assignment = vec![0usize; points.len()];
    for _ in 0..LLOYD_ITERS {
        for (pi, p) in points.iter().enumerate() {
            assignment[pi] = nearest_centroid(&centroids, &p.q);
        }
        let mut sums = vec![DVector::zeros(n); n_regions];
        let mut counts = vec![0usize; n_regions];
        for (pi, p) in points.iter().enumerate() {
            sums[assignment[pi]] += &p.q;
            counts[assignment[pi]] += 1;
        }
        for c in 0..n_regions {
            if counts[c] > 0 {
                centroids[c] = &sums[c] / counts[c] as f64;
            }
            // Empty clusters keep their previous centroid.
        }
    }
    for (pi, p) in points.iter().enumerate() {
        assignment[pi] = nearest_centroid(&centroids, &p.q);
    }

    let mut regions = Vec::with_capacity(n_regions);
    for c in 0..n_regions {
        let members: Vec<&&JointConfig> = points
            .iter()
            .enumerate()
            .filter(|(pi, _)| assignment[*pi] == c)
            .map(|(_, p)| p)
            .collect();
        let mut log_d = DVector::zeros(n);
        for j in 0..n {
            let std = if members.is_empty() {
                0.0
            } else {
                let mean = centroids[c][j];
                (members.iter().map(|p| (p.q[j] - mean).powi(2)).sum::<f64>() / members.len() as f64)
                    .sqrt()
            };
            log_d[j] = std.max(STD_FLOOR).ln();
        }
        regions.push(Codebook::pack(&centroids[c], &DMatrix::zeros(n, n), &log_d));
    }
    Codebook::new(n, regions)
}

fn nearest_centroid(centroids: &[DVector<f64>], p: &DVector<f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = crate::kinematics::dist_sq(p, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn kmeans_pp_init(points: &[&JointConfig], k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let mut centroids: Vec<DVector<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].q.clone());
    while centroids.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| {
                centroids.iter().map(|c| crate::kinematics::dist_sq(&p.q, c)).fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            // All points coincide with existing centroids; any pick works.
            rng.gen_range(0..points.len())
        } else {
            let mut t = rng.gen_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if t < w {
                    pick = i;
                    break;
                }
                t -= w;
            }
            pick
        };
        centroids.push(points[idx].q.clone());
    }
    centroids
}
