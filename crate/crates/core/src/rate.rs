//! Monte-Carlo information-rate estimation for CC-QSCs.
//!
//! Two normalized state-metric recursions run over one sampled trajectory:
//! the output-only metric `sigma^Y` (inputs averaged with Q) and the joint
//! metric `sigma^XY` (conditioned on the realized input). The per-step
//! normalizers multiply to the sequence probabilities, so their log sums give
//! the entropic rate estimates
//!
//! `H(Y) ~ -(1/n) sum log2 lambda_Y`, and the joint estimate
//! `H(X,Y) = H(X) - (1/n) sum log2 lambda_XY`, since the joint recursion's
//! per-step scale deliberately excludes the `Q(x_l)` factor (the source
//! entropy enters exactly through `H(X)` instead).

use crate::channels::{check_pmf, sample_trajectory, CcQsc, DensityOperator, Trajectory};
use crate::numerics::{herm_eig, trace_distance, ComplexMatrix};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Re-Hermitize and clip the running metric this often to absorb drift from
/// long products of transfer matrices.
const REHERMITIZE_INTERVAL: usize = 1000;

/// Normalized quantum state metric with accumulated scale logs (bits).
#[derive(Debug, Clone)]
pub struct QuantumMetric {
    pub sigma_bar: ComplexMatrix,
    pub log_lambda_sum_bits: f64,
    pub step: usize,
}

impl QuantumMetric {
    pub fn new(rho0: &DensityOperator) -> Self {
        Self {
            sigma_bar: rho0.matrix().clone(),
            log_lambda_sum_bits: 0.0,
            step: 0,
        }
    }
}

fn advance(metric: &QuantumMetric, unnormalized: ComplexMatrix) -> Result<(QuantumMetric, f64)> {
    let lambda = unnormalized.trace().re;
    if lambda <= 1e-300 {
        return Err(Error::ZeroProbability {
            step: metric.step,
            value: lambda,
        });
    }
    let mut sigma_bar = unnormalized.scale_real(1.0 / lambda);
    let step = metric.step + 1;
    if step % REHERMITIZE_INTERVAL == 0 {
        sigma_bar = rehermitize(&sigma_bar)?;
    }
    Ok((
        QuantumMetric {
            sigma_bar,
            log_lambda_sum_bits: metric.log_lambda_sum_bits + lambda.log2(),
            step,
        },
        lambda,
    ))
}

/// (sigma + sigma†)/2, eigenvalues clipped at zero, renormalized to unit trace.
pub fn rehermitize(sigma: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(sigma)?;
    let clipped = eig.apply_spectral(|l| Complex64::new(l.max(0.0), 0.0));
    let tr = clipped.trace().re;
    if tr <= 0.0 {
        return Err(Error::InvalidDensity {
            reason: "metric collapsed to zero during re-Hermitization".to_string(),
        });
    }
    Ok(clipped.scale_real(1.0 / tr))
}

/// Output-only metric update: `sigma_l = sum_x Q(x) [W^{y|x}] sigma_bar`,
/// normalized by its trace `lambda in (0, 1]`.
pub fn update_y(
    metric: &QuantumMetric,
    ch: &CcQsc,
    q: &[f64],
    y: usize,
) -> Result<(QuantumMetric, f64)> {
    advance(metric, ch.apply_input_averaged(q, y, &metric.sigma_bar))
}

/// Joint metric update: `sigma_l = [W^{y|x}] sigma_bar`, normalized. The scale
/// is the stepwise conditional probability of `(x, y)` given the past, up to
/// the `Q(x)` factor which this recursion excludes.
pub fn update_xy(
    metric: &QuantumMetric,
    ch: &CcQsc,
    x: usize,
    y: usize,
) -> Result<(QuantumMetric, f64)> {
    advance(metric, ch.transfer(x, y).apply(&metric.sigma_bar))
}

/// Source entropy `H(X) = -sum_x Q(x) log2 Q(x)` in bits.
pub fn source_entropy(q: &[f64]) -> f64 {
    q.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Monte-Carlo rate estimate and its ingredients (all in bits).
#[derive(Debug, Clone)]
pub struct RateEstimate {
    pub n: usize,
    pub h_x_bits: f64,
    pub h_y_bits: f64,
    pub h_xy_bits: f64,
    pub rate_bits: f64,
    pub seed: Option<u64>,
    /// Jackknife standard error over 10 contiguous trajectory blocks.
    pub std_error_bits: f64,
    pub lambda_y: Option<Vec<f64>>,
    pub lambda_xy: Option<Vec<f64>>,
}

/// Jackknife standard error of `(1/n) sum d_l` over 10 contiguous blocks.
pub(crate) fn jackknife_se_bits(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    let blocks = 10.min(n.max(1));
    if n < blocks || blocks < 2 {
        return 0.0;
    }
    let total: f64 = diffs.iter().sum();
    let mut estimates = Vec::with_capacity(blocks);
    let base = n / blocks;
    let rem = n % blocks;
    let mut start = 0;
    for b in 0..blocks {
        let len = base + usize::from(b < rem);
        let block_sum: f64 = diffs[start..start + len].iter().sum();
        estimates.push((total - block_sum) / (n - len) as f64);
        start += len;
    }
    let mean = estimates.iter().sum::<f64>() / blocks as f64;
    let var = estimates
        .iter()
        .map(|e| (e - mean) * (e - mean))
        .sum::<f64>()
        * (blocks as f64 - 1.0)
        / blocks as f64;
    var.sqrt()
}

/// Runs both metric recursions over an existing trajectory.
pub fn algorithm2_on_trajectory(
    ch: &CcQsc,
    q: &[f64],
    traj: &Trajectory,
    rho0: &DensityOperator,
    keep_lambdas: bool,
) -> Result<RateEstimate> {
    check_pmf(q, ch.num_inputs(), "input pmf")?;
    traj.check_alphabets(ch.inputs(), ch.outputs())?;
    if rho0.dim() != ch.dim() {
        return Err(Error::Dimension {
            expected: ch.dim(),
            got: rho0.dim(),
            context: "initial state dimension",
        });
    }
    let n = traj.len();
    if n == 0 {
        return Err(Error::TrajectoryMismatch {
            context: "empty trajectory".to_string(),
        });
    }

    let mut lambda_y = Vec::with_capacity(n);
    let mut metric = QuantumMetric::new(rho0);
    for &y in &traj.outputs {
        let (next, lambda) = update_y(&metric, ch, q, y)?;
        metric = next;
        lambda_y.push(lambda);
    }
    let h_y_bits = -metric.log_lambda_sum_bits / n as f64;

    let mut lambda_xy = Vec::with_capacity(n);
    let mut metric = QuantumMetric::new(rho0);
    for (&x, &y) in traj.inputs.iter().zip(&traj.outputs) {
        let (next, lambda) = update_xy(&metric, ch, x, y)?;
        metric = next;
        lambda_xy.push(lambda);
    }
    let cond_bits = -metric.log_lambda_sum_bits / n as f64;

    let h_x_bits = source_entropy(q);
    let h_xy_bits = h_x_bits + cond_bits;
    let rate_bits = h_x_bits + h_y_bits - h_xy_bits;
    let diffs: Vec<f64> = lambda_xy
        .iter()
        .zip(&lambda_y)
        .map(|(xy, y)| xy.log2() - y.log2())
        .collect();
    Ok(RateEstimate {
        n,
        h_x_bits,
        h_y_bits,
        h_xy_bits,
        rate_bits,
        seed: Some(traj.seed),
        std_error_bits: jackknife_se_bits(&diffs),
        lambda_y: keep_lambdas.then_some(lambda_y),
        lambda_xy: keep_lambdas.then_some(lambda_xy),
    })
}

/// Samples a trajectory from the channel and estimates the information rate.
///
/// `rho0` defaults to the ground state `|0><0|` when `None`; both metric
/// recursions consume the same trajectory.
pub fn algorithm2_estimate(
    ch: &CcQsc,
    q: &[f64],
    n: usize,
    rho0: Option<&DensityOperator>,
    seed: u64,
) -> Result<RateEstimate> {
    let ground = DensityOperator::ground(ch.dim());
    let rho0 = rho0.unwrap_or(&ground);
    let traj = sample_trajectory(ch, q, n, rho0, seed)?;
    algorithm2_on_trajectory(ch, q, &traj, rho0, false)
}

/// Numerical indecomposability probe.
///
/// For each trial, draws an input string from `Q^n`, pushes both initial
/// operators through the output-summed map `sum_y N^{y|x}` step by step, and
/// returns the maximum terminal trace distance over trials. A value decaying
/// in `n` supports indecomposability; this is a heuristic, not a proof.
pub fn indecomposability_probe(
    ch: &CcQsc,
    q: &[f64],
    alpha0: &DensityOperator,
    beta0: &DensityOperator,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_pmf(q, ch.num_inputs(), "input pmf")?;
    // Per-input output-summed (trace-preserving) transfer matrices.
    let summed: Vec<ComplexMatrix> = (0..ch.num_inputs())
        .map(|x| {
            let mut m = ComplexMatrix::zeros(ch.dim() * ch.dim(), ch.dim() * ch.dim());
            for y in 0..ch.num_outputs() {
                m = m.add(ch.transfer(x, y).matrix());
            }
            m
        })
        .collect();
    let apply = |m: &ComplexMatrix, sigma: &ComplexMatrix| -> ComplexMatrix {
        let d = ch.dim();
        let mut out = ComplexMatrix::zeros(d, d);
        for sp in 0..d {
            for stp in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..d {
                    for st in 0..d {
                        acc += m.get(sp * d + stp, s * d + st) * sigma.get(s, st);
                    }
                }
                out.set(sp, stp, acc);
            }
        }
        out
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut max_distance: f64 = 0.0;
    for _ in 0..trials {
        let mut a = alpha0.matrix().clone();
        let mut b = beta0.matrix().clone();
        for _ in 0..n {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut x = q.len() - 1;
            for (i, &p) in q.iter().enumerate() {
                acc += p;
                if u < acc {
                    x = i;
                    break;
                }
            }
            a = apply(&summed[x], &a);
            b = apply(&summed[x], &b);
        }
        max_distance = max_distance.max(trace_distance(&a, &b)?);
    }
    Ok(max_distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{bsc_channel, channel_law_exact, Alphabet, KrausFamily};
    use crate::qgec::{build_qgec, QgecParams};

    fn binary_entropy(p: f64) -> f64 {
        if p == 0.0 || p == 1.0 {
            0.0
        } else {
            -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
        }
    }

    #[test]
    fn source_entropy_values() {
        assert!((source_entropy(&[0.5, 0.5]) - 1.0).abs() < 1e-15);
        assert!(source_entropy(&[1.0, 0.0]).abs() < 1e-15);
        assert!((source_entropy(&[0.9, 0.1]) - 0.46899559358928122).abs() < 1e-12);
    }

    #[test]
    fn update_y_matches_scalar_bsc_marginal() {
        let ch = bsc_channel(0.1).unwrap();
        let q = [0.25, 0.75];
        let metric = QuantumMetric::new(&DensityOperator::ground(1));
        let (_, lambda) = update_y(&metric, &ch, &q, 0).unwrap();
        // P(y=0) = 0.25 * 0.9 + 0.75 * 0.1.
        assert!((lambda - 0.3).abs() < 1e-14);
    }

    #[test]
    fn update_y_noiseless_uniform_scale_is_half() {
        let ch = bsc_channel(0.0).unwrap();
        let metric = QuantumMetric::new(&DensityOperator::ground(1));
        let (_, lambda) = update_y(&metric, &ch, &[0.5, 0.5], 1).unwrap();
        assert!((lambda - 0.5).abs() < 1e-15);
    }

    #[test]
    fn update_xy_matches_scalar_bsc() {
        let ch = bsc_channel(0.1).unwrap();
        let metric = QuantumMetric::new(&DensityOperator::ground(1));
        let (_, lambda) = update_xy(&metric, &ch, 0, 0).unwrap();
        assert!((lambda - 0.9).abs() < 1e-14);
    }

    #[test]
    fn update_xy_deterministic_channel_scale_is_one() {
        let ch = bsc_channel(0.0).unwrap();
        let metric = QuantumMetric::new(&DensityOperator::ground(1));
        let (_, lambda) = update_xy(&metric, &ch, 1, 1).unwrap();
        assert!((lambda - 1.0).abs() < 1e-15);
    }

    #[test]
    fn metric_stays_valid_over_many_random_steps() {
        let params = QgecParams::base(0.05, 0.95, 1.0);
        let ch = build_qgec(&params).unwrap();
        let q = [0.5, 0.5];
        let traj =
            crate::channels::sample_trajectory(&ch, &q, 10_000, &DensityOperator::ground(2), 29)
                .unwrap();
        let mut metric = QuantumMetric::new(&DensityOperator::ground(2));
        for &y in &traj.outputs {
            let (next, lambda) = update_y(&metric, &ch, &q, y).unwrap();
            assert!(lambda > 0.0 && lambda <= 1.0 + 1e-12);
            metric = next;
            let tr = metric.sigma_bar.trace().re;
            assert!((tr - 1.0).abs() < 1e-12);
            let eig = herm_eig(&metric.sigma_bar).unwrap();
            assert!(eig.eigenvalues[0] > -1e-9);
        }
    }

    #[test]
    fn joint_scales_reproduce_exact_law_at_small_n() {
        let params = QgecParams::base(0.05, 0.95, 1.0);
        let ch = build_qgec(&params).unwrap();
        let rho0 = DensityOperator::ground(2);
        let q = [0.5, 0.5];
        let traj = crate::channels::sample_trajectory(&ch, &q, 6, &rho0, 37).unwrap();
        let est = algorithm2_on_trajectory(&ch, &q, &traj, &rho0, true).unwrap();
        let product: f64 = est.lambda_xy.unwrap().iter().product();
        let pmf = channel_law_exact(&ch, &traj.inputs, &rho0).unwrap();
        let mut index = 0;
        for &y in &traj.outputs {
            index = index * 2 + y;
        }
        assert!(
            (product - pmf[index]).abs() < 1e-10,
            "product {product} vs exact {}",
            pmf[index]
        );
    }

    #[test]
    fn memoryless_bsc_rate_close_to_analytic() {
        let ch = bsc_channel(0.1).unwrap();
        let est = algorithm2_estimate(&ch, &[0.5, 0.5], 100_000, None, 43).unwrap();
        assert!(
            (est.rate_bits - (1.0 - binary_entropy(0.1))).abs() < 0.01,
            "rate {}",
            est.rate_bits
        );
    }

    #[test]
    fn qgec_equal_crossovers_decouple_memory() {
        let params = QgecParams::base(0.05, 0.05, 1.0);
        let ch = build_qgec(&params).unwrap();
        let est = algorithm2_estimate(&ch, &[0.5, 0.5], 100_000, None, 47).unwrap();
        assert!(
            (est.rate_bits - (1.0 - binary_entropy(0.05))).abs() < 0.01,
            "rate {}",
            est.rate_bits
        );
    }

    #[test]
    fn qgec_frozen_control_behaves_like_good_state_bsc() {
        let params = QgecParams::base(0.05, 0.95, 0.0);
        let ch = build_qgec(&params).unwrap();
        let est = algorithm2_estimate(&ch, &[0.5, 0.5], 100_000, None, 53).unwrap();
        assert!(
            (est.rate_bits - (1.0 - binary_entropy(0.05))).abs() < 0.01,
            "rate {}",
            est.rate_bits
        );
    }

    #[test]
    fn probe_is_zero_for_identical_initial_states() {
        let params = QgecParams::base(0.05, 0.95, 1.0);
        let ch = build_qgec(&params).unwrap();
        let rho = DensityOperator::ground(2);
        let d = indecomposability_probe(&ch, &[0.5, 0.5], &rho, &rho, 10, 4, 3).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn probe_constant_for_identity_memory_channel() {
        // Channel never touches its memory: K = I_2 scaled by output weights.
        let mut family = KrausFamily::new(2, 1, 2);
        family.set_ops(0, 0, vec![ComplexMatrix::identity(2).scale_real(0.7f64.sqrt())]);
        family.set_ops(0, 1, vec![ComplexMatrix::identity(2).scale_real(0.3f64.sqrt())]);
        let ch = crate::channels::from_kraus(
            &family,
            Alphabet::from_symbols(&["0"]),
            Alphabet::binary(),
        )
        .unwrap();
        let alpha = DensityOperator::ground(2);
        let beta = DensityOperator::maximally_mixed(2);
        let d5 = indecomposability_probe(&ch, &[1.0], &alpha, &beta, 5, 3, 7).unwrap();
        let d50 = indecomposability_probe(&ch, &[1.0], &alpha, &beta, 50, 3, 7).unwrap();
        assert!((d5 - d50).abs() < 1e-10);
    }

    #[test]
    fn probe_decays_for_default_qgec() {
        let params = QgecParams::base(0.05, 0.95, 1.0);
        let ch = build_qgec(&params).unwrap();
        let alpha = DensityOperator::ground(2);
        let beta = DensityOperator::maximally_mixed(2);
        let q = [0.5, 0.5];
        let d5 = indecomposability_probe(&ch, &q, &alpha, &beta, 5, 8, 9).unwrap();
        let d50 = indecomposability_probe(&ch, &q, &alpha, &beta, 50, 8, 9).unwrap();
        assert!(d50 < d5, "distance grew: {d5} -> {d50}");
    }
}
