//! Auxiliary-channel bounds on the information rate and their optimization.
//!
//! For a true channel law `P` and an auxiliary CC-QSC with law `P^`, one
//! trajectory `(x, y)` yields (all in bits)
//!
//! - upper bound  `I^bar = (1/n) [log2 P(y|x) - log2 (QP^)(y)]`,
//! - lower bound  `I^low = (1/n) [log2 P^(y|x) - log2 (QP^)(y)]`,
//! - difference   `Delta = I^bar - I^low = (1/n) [log2 P(y|x) - log2 P^(y|x)]`.
//!
//! The lower bound is achievable under mismatched decoding and, like the
//! gradients below, needs only input/output data of the true channel, never
//! its model.
//!
//! Gradients with respect to the auxiliary channel are taken in Choi
//! coordinates on the extended (unconstrained) domain and then projected onto
//! the tangent space of the trace-preservation constraint. The per-step
//! accumulation weight is `1 / (n lambda_k tr(fwd_k bwd_k))` with normalized
//! forward/backward messages, which makes each estimator the exact gradient
//! (natural-log scale) of its per-trajectory objective. Feasibility after a
//! gradient step is restored by Dykstra's alternating projections between the
//! per-pair PSD cones and the trace-preservation affine set.

use crate::channels::{check_pmf, CcQsc, ChoiMatrix, DensityOperator, Trajectory};
use crate::numerics::{psd_project, ComplexMatrix};
use crate::rate::{update_xy, update_y, QuantumMetric};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::time::Instant;

/// Which conditioning the message recursions use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MessageMode<'a> {
    /// Conditioned on both sequences: forward applies `[W^{y_l|x_l}]`.
    Joint,
    /// Outputs only: forward applies `sum_x Q(x) [W^{y_l|x}]`.
    OutputAveraged(&'a [f64]),
}

/// Normalized forward/backward message sweeps over one trajectory.
///
/// `forward[l]` is the unit-trace forward message after `l` steps
/// (`forward[0]` is the auxiliary ground state); `forward_scales[l-1]` is the
/// trace removed at step `l`. `backward[l]` is the unit-trace row-form
/// backward message (`backward[n]` is `I/d`).
#[derive(Debug, Clone)]
pub struct MessageTrack {
    pub forward: Vec<ComplexMatrix>,
    pub forward_scales: Vec<f64>,
    pub backward: Vec<ComplexMatrix>,
}

impl MessageTrack {
    /// Bilinear pairing `tr(fwd_k bwd_k)` of the two normalized messages at
    /// step index `k` (1-based like the recursions).
    pub fn pairing(&self, k: usize) -> f64 {
        let f = &self.forward[k];
        let b = &self.backward[k];
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..f.rows() {
            for j in 0..f.cols() {
                acc += b.get(i, j) * f.get(i, j);
            }
        }
        acc.re
    }
}

fn forward_step(
    aux: &CcQsc,
    mode: MessageMode,
    x: usize,
    y: usize,
    state: &ComplexMatrix,
) -> ComplexMatrix {
    match mode {
        MessageMode::Joint => aux.transfer(x, y).apply(state),
        MessageMode::OutputAveraged(q) => aux.apply_input_averaged(q, y, state),
    }
}

fn backward_step(
    aux: &CcQsc,
    mode: MessageMode,
    x: usize,
    y: usize,
    state: &ComplexMatrix,
) -> ComplexMatrix {
    match mode {
        MessageMode::Joint => aux.transfer(x, y).apply_transposed(state),
        MessageMode::OutputAveraged(q) => aux.apply_input_averaged_transposed(q, y, state),
    }
}

/// Runs the normalized forward and backward message recursions of the
/// auxiliary channel over a trajectory. The auxiliary initial state is the
/// ground state `|0><0|`.
pub fn messages(aux: &CcQsc, traj: &Trajectory, mode: MessageMode) -> Result<MessageTrack> {
    traj.check_alphabets(aux.inputs(), aux.outputs())?;
    if let MessageMode::OutputAveraged(q) = mode {
        check_pmf(q, aux.num_inputs(), "input pmf")?;
    }
    let n = traj.len();
    let d = aux.dim();

    let mut forward = Vec::with_capacity(n + 1);
    let mut forward_scales = Vec::with_capacity(n);
    forward.push(DensityOperator::ground(d).matrix().clone());
    for l in 0..n {
        let next = forward_step(aux, mode, traj.inputs[l], traj.outputs[l], &forward[l]);
        let lambda = next.trace().re;
        if lambda <= 1e-300 {
            return Err(Error::ZeroProbability {
                step: l,
                value: lambda,
            });
        }
        forward.push(next.scale_real(1.0 / lambda));
        forward_scales.push(lambda);
    }

    let mut backward = vec![ComplexMatrix::zeros(d, d); n + 1];
    backward[n] = ComplexMatrix::identity(d).scale_real(1.0 / d as f64);
    for l in (1..=n).rev() {
        let prev = backward_step(aux, mode, traj.inputs[l - 1], traj.outputs[l - 1], &backward[l]);
        let tr = prev.trace().re;
        if tr <= 1e-300 {
            return Err(Error::ZeroProbability {
                step: l - 1,
                value: tr,
            });
        }
        backward[l - 1] = prev.scale_real(1.0 / tr);
    }

    Ok(MessageTrack {
        forward,
        forward_scales,
        backward,
    })
}

/// `(1/n) sum_l log2 lambda_l` of the joint metric recursion on `ch`.
///
/// Shared by all bound estimators so that identical channels cancel exactly.
fn log2_prob_xy(ch: &CcQsc, traj: &Trajectory) -> Result<f64> {
    traj.check_alphabets(ch.inputs(), ch.outputs())?;
    let mut metric = QuantumMetric::new(&DensityOperator::ground(ch.dim()));
    for (&x, &y) in traj.inputs.iter().zip(&traj.outputs) {
        let (next, _) = update_xy(&metric, ch, x, y)?;
        metric = next;
    }
    Ok(metric.log_lambda_sum_bits / traj.len() as f64)
}

/// `(1/n) sum_l log2 lambda_l` of the output-only metric recursion on `ch`.
fn log2_prob_y(ch: &CcQsc, q: &[f64], traj: &Trajectory) -> Result<f64> {
    traj.check_alphabets(ch.inputs(), ch.outputs())?;
    check_pmf(q, ch.num_inputs(), "input pmf")?;
    let mut metric = QuantumMetric::new(&DensityOperator::ground(ch.dim()));
    for &y in &traj.outputs {
        let (next, _) = update_y(&metric, ch, q, y)?;
        metric = next;
    }
    Ok(metric.log_lambda_sum_bits / traj.len() as f64)
}

/// Mismatched-decoding lower bound on the information rate (bits).
///
/// Data-driven: needs only the trajectory and the auxiliary channel.
pub fn estimate_lower(aux: &CcQsc, traj: &Trajectory, q: &[f64]) -> Result<f64> {
    Ok(log2_prob_xy(aux, traj)? - log2_prob_y(aux, q, traj)?)
}

/// Output-mismatch upper bound on the information rate (bits). Requires the
/// true channel model for the numerator term.
pub fn estimate_upper(true_ch: &CcQsc, aux: &CcQsc, traj: &Trajectory, q: &[f64]) -> Result<f64> {
    Ok(log2_prob_xy(true_ch, traj)? - log2_prob_y(aux, q, traj)?)
}

/// Difference function estimate `(1/n)[log2 P(y|x) - log2 P^(y|x)]` (bits).
pub fn estimate_delta(true_ch: &CcQsc, aux: &CcQsc, traj: &Trajectory) -> Result<f64> {
    Ok(log2_prob_xy(true_ch, traj)? - log2_prob_xy(aux, traj)?)
}

/// Upper bound, lower bound, and their gap evaluated on one trajectory.
#[derive(Debug, Clone)]
pub struct BoundsEstimate {
    pub n: usize,
    pub upper_bits: f64,
    pub lower_bits: f64,
    /// Always `upper_bits - lower_bits`.
    pub delta_bits: f64,
    /// `(1/n) log2 P(y|x)` under the true channel.
    pub log2_true_xy: f64,
    /// `(1/n) log2 P^(y|x)` under the auxiliary channel.
    pub log2_aux_xy: f64,
    /// `(1/n) log2 (QP^)(y)` under the auxiliary channel.
    pub log2_aux_y: f64,
}

/// Evaluates both bounds and the difference on a shared trajectory.
pub fn estimate_bounds(
    true_ch: &CcQsc,
    aux: &CcQsc,
    traj: &Trajectory,
    q: &[f64],
) -> Result<BoundsEstimate> {
    let log2_true_xy = log2_prob_xy(true_ch, traj)?;
    let log2_aux_xy = log2_prob_xy(aux, traj)?;
    let log2_aux_y = log2_prob_y(aux, q, traj)?;
    let upper_bits = log2_true_xy - log2_aux_y;
    let lower_bits = log2_aux_xy - log2_aux_y;
    Ok(BoundsEstimate {
        n: traj.len(),
        upper_bits,
        lower_bits,
        delta_bits: upper_bits - lower_bits,
        log2_true_xy,
        log2_aux_xy,
        log2_aux_y,
    })
}

/// Per-(x, y) Hermitian matrices in Choi coordinates; gradient estimates and
/// tangent directions both live here.
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    dim: usize,
    num_inputs: usize,
    num_outputs: usize,
    blocks: Vec<ComplexMatrix>,
}

impl GradientEstimate {
    pub fn zeros(dim: usize, num_inputs: usize, num_outputs: usize) -> Self {
        Self {
            dim,
            num_inputs,
            num_outputs,
            blocks: vec![ComplexMatrix::zeros(dim * dim, dim * dim); num_inputs * num_outputs],
        }
    }

    pub fn from_blocks(
        dim: usize,
        num_inputs: usize,
        num_outputs: usize,
        blocks: Vec<ComplexMatrix>,
    ) -> Self {
        assert_eq!(blocks.len(), num_inputs * num_outputs);
        Self {
            dim,
            num_inputs,
            num_outputs,
            blocks,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn block(&self, x: usize, y: usize) -> &ComplexMatrix {
        &self.blocks[x * self.num_outputs + y]
    }

    pub fn block_mut(&mut self, x: usize, y: usize) -> &mut ComplexMatrix {
        &mut self.blocks[x * self.num_outputs + y]
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    fn hermitize_all(&mut self) {
        for b in &mut self.blocks {
            *b = b.hermitized();
        }
    }

    pub fn sub(&self, other: &GradientEstimate) -> GradientEstimate {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.sub(b))
            .collect();
        GradientEstimate {
            dim: self.dim,
            num_inputs: self.num_inputs,
            num_outputs: self.num_outputs,
            blocks,
        }
    }

    pub fn scale(&self, factor: f64) -> GradientEstimate {
        GradientEstimate {
            dim: self.dim,
            num_inputs: self.num_inputs,
            num_outputs: self.num_outputs,
            blocks: self.blocks.iter().map(|b| b.scale_real(factor)).collect(),
        }
    }

    /// Frobenius norm over all blocks.
    pub fn frobenius_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let n = b.frobenius_norm();
                n * n
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Real Frobenius inner product `Re sum tr(G† H)`.
    pub fn inner_real(&self, other: &GradientEstimate) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(g, h)| {
                let mut acc = 0.0;
                for i in 0..g.rows() {
                    for j in 0..g.cols() {
                        acc += (g.get(i, j).conj() * h.get(i, j)).re;
                    }
                }
                acc
            })
            .sum()
    }

    /// Maximum Frobenius norm over x of the trace-preservation residual
    /// `R_x(s, s~) = sum_y sum_{s'} block[(s',s),(s',s~)]` (minus the identity
    /// when `against_identity`).
    pub fn constraint_residual(&self, against_identity: bool) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for x in 0..self.num_inputs {
            let mut norm_sq = 0.0;
            for s in 0..d {
                for st in 0..d {
                    let mut r = Complex64::new(0.0, 0.0);
                    for y in 0..self.num_outputs {
                        let b = self.block(x, y);
                        for sp in 0..d {
                            r += b.get(sp * d + s, sp * d + st);
                        }
                    }
                    if against_identity && s == st {
                        r -= Complex64::new(1.0, 0.0);
                    }
                    norm_sq += r.norm_sqr();
                }
            }
            worst = worst.max(norm_sq.sqrt());
        }
        worst
    }

    /// Zeroes the off-diagonal entries of every block (classical subspace).
    pub fn restrict_diagonal(&mut self) {
        for b in &mut self.blocks {
            for i in 0..b.rows() {
                for j in 0..b.cols() {
                    if i != j {
                        b.set(i, j, Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
    }
}

/// Accumulates the difference-function gradient from a joint-mode message
/// track: step `k` adds
/// `-(1/n) fwd_{k-1}(s,s~) bwd_k(s',s~') / (lambda_k tr(fwd_k bwd_k))`
/// into Choi entry `[(s',s),(s~',s~)]` of block `(x_k, y_k)`.
fn accumulate_delta_gradient(
    aux: &CcQsc,
    traj: &Trajectory,
    track: &MessageTrack,
) -> Result<GradientEstimate> {
    let n = traj.len();
    let d = aux.dim();
    let mut grad = GradientEstimate::zeros(d, aux.num_inputs(), aux.num_outputs());
    for k in 1..=n {
        let lambda = track.forward_scales[k - 1];
        let pairing = track.pairing(k);
        if pairing.abs() < 1e-300 {
            return Err(Error::ZeroProbability {
                step: k - 1,
                value: pairing,
            });
        }
        let weight = -1.0 / (n as f64 * lambda * pairing);
        let fwd = &track.forward[k - 1];
        let bwd = &track.backward[k];
        let block = grad.block_mut(traj.inputs[k - 1], traj.outputs[k - 1]);
        for sp in 0..d {
            for s in 0..d {
                let row = sp * d + s;
                for stp in 0..d {
                    // Conjugated so that Re tr(G† H) equals the directional
                    // derivative for every Hermitian direction H.
                    let b_entry = bwd.get(sp, stp).conj() * weight;
                    for st in 0..d {
                        block.add_assign_at(row, stp * d + st, fwd.get(s, st).conj() * b_entry);
                    }
                }
            }
        }
    }
    grad.hermitize_all();
    Ok(grad)
}

/// Gradient of the difference function with respect to the auxiliary channel
/// (Choi coordinates, natural-log scale). Data-driven.
pub fn gradient_delta(aux: &CcQsc, traj: &Trajectory) -> Result<GradientEstimate> {
    let track = messages(aux, traj, MessageMode::Joint)?;
    accumulate_delta_gradient(aux, traj, &track)
}

/// Gradient of the upper bound with respect to the auxiliary channel.
///
/// Uses output-averaged messages; step `k` contributes to every input block
/// `(x, y_k)` with weight `Q(x)`, which makes this the exact per-trajectory
/// gradient of the upper bound (the realized `x_k` only enters through the
/// trajectory's output sequence).
pub fn gradient_upper(aux: &CcQsc, traj: &Trajectory, q: &[f64]) -> Result<GradientEstimate> {
    let track = messages(aux, traj, MessageMode::OutputAveraged(q))?;
    let n = traj.len();
    let d = aux.dim();
    let mut grad = GradientEstimate::zeros(d, aux.num_inputs(), aux.num_outputs());
    for k in 1..=n {
        let lambda = track.forward_scales[k - 1];
        let pairing = track.pairing(k);
        if pairing.abs() < 1e-300 {
            return Err(Error::ZeroProbability {
                step: k - 1,
                value: pairing,
            });
        }
        let base = -1.0 / (n as f64 * lambda * pairing);
        let fwd = &track.forward[k - 1];
        let bwd = &track.backward[k];
        let y = traj.outputs[k - 1];
        for (x, &qx) in q.iter().enumerate() {
            if qx == 0.0 {
                continue;
            }
            let weight = base * qx;
            let block = grad.block_mut(x, y);
            for sp in 0..d {
                for s in 0..d {
                    let row = sp * d + s;
                    for stp in 0..d {
                        let b_entry = bwd.get(sp, stp).conj() * weight;
                        for st in 0..d {
                            block.add_assign_at(row, stp * d + st, fwd.get(s, st).conj() * b_entry);
                        }
                    }
                }
            }
        }
    }
    grad.hermitize_all();
    Ok(grad)
}

/// Gradient of the lower bound: upper-bound term minus difference term.
/// Points uphill for the lower bound; maximizing it negates the result before
/// a descent-style update. Data-driven.
pub fn gradient_lower(aux: &CcQsc, traj: &Trajectory, q: &[f64]) -> Result<GradientEstimate> {
    Ok(gradient_upper(aux, traj, q)?.sub(&gradient_delta(aux, traj)?))
}

/// Orthogonal projection onto the tangent space of the trace-preservation
/// constraint: per x and (s, s~), the residual
/// `R_x(s,s~) = sum_y sum_{s'} block[(s',s),(s',s~)]` is spread evenly over
/// the `|Y| d` addressed entries and subtracted. Idempotent.
pub fn project_tangent(g: &GradientEstimate) -> GradientEstimate {
    let mut out = g.clone();
    shift_tp_constraint(&mut out, false);
    out
}

/// Subtracts `(R_x(s,s~) - target) / (|Y| d)` from every addressed entry,
/// where target is `delta_{s,s~}` when `against_identity`.
fn shift_tp_constraint(g: &mut GradientEstimate, against_identity: bool) {
    let d = g.dim;
    let (nx, ny) = (g.num_inputs, g.num_outputs);
    let share = 1.0 / (ny * d) as f64;
    for x in 0..nx {
        for s in 0..d {
            for st in 0..d {
                let mut r = Complex64::new(0.0, 0.0);
                for y in 0..ny {
                    let b = g.block(x, y);
                    for sp in 0..d {
                        r += b.get(sp * d + s, sp * d + st);
                    }
                }
                if against_identity && s == st {
                    r -= Complex64::new(1.0, 0.0);
                }
                let shift = r * share;
                if shift.norm_sqr() == 0.0 {
                    continue;
                }
                for y in 0..ny {
                    let b = g.block_mut(x, y);
                    for sp in 0..d {
                        let row = sp * d + s;
                        let col = sp * d + st;
                        let v = b.get(row, col);
                        b.set(row, col, v - shift);
                    }
                }
            }
        }
    }
}

/// Dykstra parameters for the feasibility projection.
#[derive(Debug, Clone)]
pub struct DykstraConfig {
    pub max_sweeps: usize,
    pub tol: f64,
    /// Restrict to diagonal Choi blocks (classical auxiliary channels).
    pub diagonal: bool,
}

impl Default for DykstraConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 500,
            tol: 1e-10,
            diagonal: false,
        }
    }
}

/// Result of the feasibility projection.
#[derive(Debug, Clone)]
pub struct FeasibleProjection {
    pub channel: CcQsc,
    pub sweeps: usize,
    pub converged: bool,
    /// Frobenius gap between the PSD-projected and TP-projected iterates at
    /// termination.
    pub residual: f64,
}

fn psd_step(blocks: &[ComplexMatrix], diagonal: bool) -> Result<Vec<ComplexMatrix>> {
    blocks
        .iter()
        .map(|b| {
            if diagonal {
                // Nearest diagonal PSD matrix: keep the (real) diagonal, clip at 0.
                let mut out = ComplexMatrix::zeros(b.rows(), b.cols());
                for i in 0..b.rows() {
                    out.set(i, i, Complex64::new(b.get(i, i).re.max(0.0), 0.0));
                }
                Ok(out)
            } else {
                psd_project(b)
            }
        })
        .collect()
}

fn family_distance(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let n = x.sub(y).frobenius_norm();
            n * n
        })
        .sum::<f64>()
        .sqrt()
}

/// Frobenius-nearest valid CC-QSC to an arbitrary Hermitian Choi family, via
/// Dykstra's alternating projections between the per-(x, y) PSD cones and the
/// trace-preservation affine set.
///
/// On non-convergence the best iterate is returned with `converged: false`.
pub fn project_feasible(
    inputs: &crate::channels::Alphabet,
    outputs: &crate::channels::Alphabet,
    dim: usize,
    candidate: &[ComplexMatrix],
    cfg: &DykstraConfig,
) -> Result<FeasibleProjection> {
    let (nx, ny) = (inputs.len(), outputs.len());
    if candidate.len() != nx * ny {
        return Err(Error::Dimension {
            expected: nx * ny,
            got: candidate.len(),
            context: "Choi family size",
        });
    }
    let d2 = dim * dim;
    for b in candidate {
        if b.rows() != d2 || b.cols() != d2 {
            return Err(Error::Dimension {
                expected: d2,
                got: b.rows(),
                context: "Choi block",
            });
        }
    }

    let hermitized: Vec<ComplexMatrix> = candidate.iter().map(|b| b.hermitized()).collect();
    let mut x = hermitized;
    let mut p = vec![ComplexMatrix::zeros(d2, d2); nx * ny];
    let mut q = vec![ComplexMatrix::zeros(d2, d2); nx * ny];

    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let xp: Vec<ComplexMatrix> = x.iter().zip(&p).map(|(a, b)| a.add(b)).collect();
        let y_proj = psd_step(&xp, cfg.diagonal)?;
        p = xp.iter().zip(&y_proj).map(|(a, b)| a.sub(b)).collect();

        let yq: Vec<ComplexMatrix> = y_proj.iter().zip(&q).map(|(a, b)| a.add(b)).collect();
        let mut shifted = GradientEstimate::from_blocks(dim, nx, ny, yq.clone());
        shift_tp_constraint(&mut shifted, true);
        let x_next = shifted.blocks().to_vec();
        q = yq.iter().zip(&x_next).map(|(a, b)| a.sub(b)).collect();

        residual = family_distance(&y_proj, &x_next);
        x = x_next;
        if residual <= cfg.tol {
            converged = true;
            break;
        }
    }

    // The final iterate satisfies trace preservation exactly; its PSD
    // violation is bounded by the terminal gap.
    let transfer = x
        .iter()
        .map(|m| ChoiMatrix::new(dim, m.clone()).map(|c| crate::channels::from_choi(&c)))
        .collect::<Result<Vec<_>>>()?;
    let channel = if converged {
        CcQsc::from_transfer_family(inputs.clone(), outputs.clone(), dim, transfer)?
    } else {
        CcQsc::from_transfer_family_unchecked(inputs.clone(), outputs.clone(), dim, transfer)
    };
    Ok(FeasibleProjection {
        channel,
        sweeps,
        converged,
        residual,
    })
}

/// Choi block of the completely depolarizing channel member: `I / (|Y| d)`.
pub fn depolarizing_choi(dim: usize, num_outputs: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim * dim).scale_real(1.0 / (num_outputs * dim) as f64)
}

/// Random interior auxiliary CC-QSC: per (x, y) a Wishart-style Choi block
/// `G G†` with standard-normal complex G, rescaled per input to total trace d
/// and projected onto the feasible set. The projection can land on the PSD
/// boundary, so the result is blended with the depolarizing member to keep
/// every Choi eigenvalue strictly positive. Seed-deterministic.
pub fn random_aux(
    dim: usize,
    inputs: &crate::channels::Alphabet,
    outputs: &crate::channels::Alphabet,
    seed: u64,
) -> Result<CcQsc> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (nx, ny) = (inputs.len(), outputs.len());
    let d2 = dim * dim;
    let mut blocks = Vec::with_capacity(nx * ny);
    for _ in 0..nx {
        let mut group = Vec::with_capacity(ny);
        let mut total = 0.0;
        for _ in 0..ny {
            let g = crate::numerics::random_complex_gaussian(d2, d2, &mut rng);
            let c = g.matmul(&g.adjoint());
            total += c.trace().re;
            group.push(c);
        }
        let scale = dim as f64 / total;
        blocks.extend(group.into_iter().map(|c| c.scale_real(scale)));
    }
    let projection = project_feasible(inputs, outputs, dim, &blocks, &DykstraConfig::default())?;
    if !projection.converged {
        return Err(Error::Optimizer {
            reason: format!(
                "random auxiliary projection stalled at residual {:.3e}",
                projection.residual
            ),
        });
    }
    blend_with_depolarizing(&projection.channel, 0.01)
}

/// Projected-gradient optimizer settings.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Step size gamma; halved after five consecutive proxy increases.
    pub step_size: f64,
    pub max_iterations: usize,
    /// Stop when the proxy changes by less than this relative amount over
    /// `patience` iterations.
    pub proxy_tolerance: f64,
    pub patience: usize,
    pub dykstra: DykstraConfig,
    /// Restrict the auxiliary channel to diagonal (classical) Choi blocks.
    pub diagonal_aux: bool,
    /// Use only the first `n` steps of the supplied trajectory.
    pub trajectory_length: Option<usize>,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            max_iterations: 400,
            proxy_tolerance: 1e-5,
            patience: 50,
            dykstra: DykstraConfig::default(),
            diagonal_aux: false,
            trajectory_length: None,
            seed: 0,
        }
    }
}

/// One optimizer iteration record.
#[derive(Debug, Clone)]
pub struct OptimizeRecord {
    pub iteration: usize,
    /// `-(1/n) sum log2 lambda_k`: the auxiliary channel's share of the
    /// difference function (the true-channel term is constant).
    pub proxy_bits: f64,
    /// Difference function when a true-channel log-probability was supplied.
    pub delta_bits: Option<f64>,
    pub lower_bits: f64,
    /// Frobenius norm of the tangent-projected gradient.
    pub gradient_norm: f64,
    pub elapsed_secs: f64,
}

/// Minimizes the difference function over auxiliary CC-QSCs by projected
/// stochastic gradient descent on one trajectory of true-channel data.
///
/// Data-driven: the true channel model is never consulted. `true_log2_xy`,
/// when supplied, is the constant `(1/n) log2 P(y|x)` of the true channel and
/// is used only to report `delta_bits` in the history.
pub fn optimize_delta(
    traj: &Trajectory,
    aux0: &CcQsc,
    q: &[f64],
    cfg: &OptimizerConfig,
    true_log2_xy: Option<f64>,
) -> Result<(CcQsc, Vec<OptimizeRecord>)> {
    traj.check_alphabets(aux0.inputs(), aux0.outputs())?;
    check_pmf(q, aux0.num_inputs(), "input pmf")?;
    let n = cfg.trajectory_length.unwrap_or(traj.len()).min(traj.len());
    if n == 0 {
        return Err(Error::TrajectoryMismatch {
            context: "empty trajectory".to_string(),
        });
    }
    let view = Trajectory {
        inputs: traj.inputs[..n].to_vec(),
        outputs: traj.outputs[..n].to_vec(),
        input_symbols: traj.input_symbols.clone(),
        output_symbols: traj.output_symbols.clone(),
        seed: traj.seed,
        initial_state: traj.initial_state.clone(),
    };

    let mut aux = aux0.clone();
    let mut gamma = cfg.step_size;
    let mut history = Vec::new();
    let mut consecutive_increases = 0usize;
    let mut restarts = 0usize;
    let started = Instant::now();

    let mut iter = 0;
    while iter < cfg.max_iterations {
        let track = match messages(&aux, &view, MessageMode::Joint) {
            Ok(t) => t,
            Err(Error::ZeroProbability { .. }) if restarts < 20 => {
                // The auxiliary channel assigns probability zero to the data;
                // blend toward the depolarizing interior point and retry.
                aux = blend_with_depolarizing(&aux, 0.01)?;
                restarts += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let log2_xy: f64 = track
            .forward_scales
            .iter()
            .map(|l| l.log2())
            .sum::<f64>()
            / n as f64;
        let proxy = -log2_xy;
        let lower = log2_xy - log2_prob_y(&aux, q, &view)?;

        let grad = accumulate_delta_gradient(&aux, &view, &track)?;
        let mut tangent = if cfg.diagonal_aux {
            let mut g = grad.clone();
            g.restrict_diagonal();
            project_tangent(&g)
        } else {
            project_tangent(&grad)
        };
        if cfg.diagonal_aux {
            // The tangent projection of a diagonal family stays diagonal, but
            // make that invariant explicit against rounding.
            tangent.restrict_diagonal();
        }
        let grad_norm = tangent.frobenius_norm();

        history.push(OptimizeRecord {
            iteration: iter,
            proxy_bits: proxy,
            delta_bits: true_log2_xy.map(|t| t - log2_xy),
            lower_bits: lower,
            gradient_norm: grad_norm,
            elapsed_secs: started.elapsed().as_secs_f64(),
        });

        // Convergence: relative proxy change over the patience window.
        if history.len() > cfg.patience {
            let before = history[history.len() - 1 - cfg.patience].proxy_bits;
            if (proxy - before).abs() <= cfg.proxy_tolerance * before.abs().max(1e-12) {
                break;
            }
        }
        if history.len() >= 2 {
            let prev = history[history.len() - 2].proxy_bits;
            if proxy > prev {
                consecutive_increases += 1;
                if consecutive_increases >= 5 {
                    gamma *= 0.5;
                    consecutive_increases = 0;
                }
            } else {
                consecutive_increases = 0;
            }
        }

        let mut blocks = aux.choi_family();
        for x in 0..aux.num_inputs() {
            for y in 0..aux.num_outputs() {
                let i = x * aux.num_outputs() + y;
                blocks[i] = blocks[i].sub(&tangent.block(x, y).scale_real(gamma));
            }
        }
        let dykstra = DykstraConfig {
            diagonal: cfg.diagonal_aux || cfg.dykstra.diagonal,
            ..cfg.dykstra.clone()
        };
        let projection = project_feasible(aux.inputs(), aux.outputs(), aux.dim(), &blocks, &dykstra)?;
        aux = projection.channel;
        iter += 1;
    }

    Ok((aux, history))
}

/// `(1 - eps) aux + eps depolarizing`, blockwise in Choi coordinates.
fn blend_with_depolarizing(aux: &CcQsc, eps: f64) -> Result<CcQsc> {
    let depol = depolarizing_choi(aux.dim(), aux.num_outputs());
    let blocks: Vec<ComplexMatrix> = aux
        .choi_family()
        .into_iter()
        .map(|c| c.scale_real(1.0 - eps).add(&depol.scale_real(eps)))
        .collect();
    CcQsc::from_choi_family(
        aux.inputs().clone(),
        aux.outputs().clone(),
        aux.dim(),
        blocks,
    )
}
