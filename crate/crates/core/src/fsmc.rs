//! Classical finite-state-machine channels.
//!
//! An FSMC is a law tensor `W(y, s' | x, s)`: the probability of emitting `y`
//! and moving to state `s'` given input `x` and state `s`. These serve as the
//! classical baseline for the quantum-state machinery and as exact oracles:
//! an FSMC embeds as a diagonal CC-QSC with the same joint law.

use crate::channels::{check_pmf, Trajectory};
use crate::rate::{jackknife_se_bits, RateEstimate};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// A finite-state-machine channel.
#[derive(Debug, Clone)]
pub struct Fsmc {
    input_symbols: Vec<String>,
    output_symbols: Vec<String>,
    state_symbols: Vec<String>,
    /// Law tensor flattened as [x][s][y][s'].
    law: Vec<f64>,
}

impl Fsmc {
    /// Builds an FSMC from the law tensor indexed `[x][s][y][s']`.
    /// Each `(x, s)` slice must sum to 1 within 1e-12.
    pub fn new(
        input_symbols: Vec<String>,
        output_symbols: Vec<String>,
        state_symbols: Vec<String>,
        law: Vec<f64>,
    ) -> Result<Self> {
        let (nx, ny, ns) = (input_symbols.len(), output_symbols.len(), state_symbols.len());
        if law.len() != nx * ns * ny * ns {
            return Err(Error::Dimension {
                expected: nx * ns * ny * ns,
                got: law.len(),
                context: "FSMC law tensor",
            });
        }
        let f = Self {
            input_symbols,
            output_symbols,
            state_symbols,
            law,
        };
        for x in 0..nx {
            for s in 0..ns {
                let sum: f64 = (0..ny)
                    .flat_map(|y| (0..ns).map(move |sp| (y, sp)))
                    .map(|(y, sp)| f.law(x, s, y, sp))
                    .sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::NotStochastic { x, s, sum });
                }
            }
        }
        Ok(f)
    }

    #[inline]
    pub fn law(&self, x: usize, s: usize, y: usize, sp: usize) -> f64 {
        let (ny, ns) = (self.output_symbols.len(), self.state_symbols.len());
        self.law[((x * ns + s) * ny + y) * ns + sp]
    }

    pub fn num_inputs(&self) -> usize {
        self.input_symbols.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.output_symbols.len()
    }

    pub fn num_states(&self) -> usize {
        self.state_symbols.len()
    }

    pub fn input_symbols(&self) -> &[String] {
        &self.input_symbols
    }

    pub fn output_symbols(&self) -> &[String] {
        &self.output_symbols
    }

    pub fn state_symbols(&self) -> &[String] {
        &self.state_symbols
    }

    pub fn law_tensor(&self) -> &[f64] {
        &self.law
    }

    /// Stationary pmf of the marginal state process, if it is input-independent.
    pub fn stationary_state_pmf(&self) -> Option<Vec<f64>> {
        let ns = self.num_states();
        // Marginal transition kernel under input 0; check input-independence.
        let kernel = |x: usize, s: usize, sp: usize| -> f64 {
            (0..self.num_outputs()).map(|y| self.law(x, s, y, sp)).sum()
        };
        for x in 1..self.num_inputs() {
            for s in 0..ns {
                for sp in 0..ns {
                    if (kernel(x, s, sp) - kernel(0, s, sp)).abs() > 1e-12 {
                        return None;
                    }
                }
            }
        }
        // Power iteration on the row-stochastic kernel.
        let mut pmf = vec![1.0 / ns as f64; ns];
        for _ in 0..10_000 {
            let mut next = vec![0.0; ns];
            for s in 0..ns {
                for sp in 0..ns {
                    next[sp] += pmf[s] * kernel(0, s, sp);
                }
            }
            let diff: f64 = next
                .iter()
                .zip(&pmf)
                .map(|(a, b)| (a - b).abs())
                .sum();
            pmf = next;
            if diff < 1e-15 {
                break;
            }
        }
        Some(pmf)
    }
}

/// Gilbert–Elliott channel: a binary symmetric channel whose crossover
/// probability is selected by a two-state Markov process independent of the
/// input. State 0 is "good" (crossover `p_g`), state 1 is "bad" (`p_b`);
/// `t_gb` and `t_bg` are the good-to-bad and bad-to-good transition
/// probabilities.
pub fn gilbert_elliott(p_g: f64, p_b: f64, t_gb: f64, t_bg: f64) -> Result<Fsmc> {
    for (name, value) in [("p_g", p_g), ("p_b", p_b), ("t_gb", t_gb), ("t_bg", t_bg)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ParameterRange { name, value });
        }
    }
    let crossover = [p_g, p_b];
    let transition = [[1.0 - t_gb, t_gb], [t_bg, 1.0 - t_bg]];
    let mut law = Vec::with_capacity(2 * 2 * 2 * 2);
    for x in 0..2 {
        for s in 0..2 {
            for y in 0..2 {
                for sp in 0..2 {
                    let bsc = if y == x {
                        1.0 - crossover[s]
                    } else {
                        crossover[s]
                    };
                    law.push(transition[s][sp] * bsc);
                }
            }
        }
    }
    Fsmc::new(
        vec!["0".into(), "1".into()],
        vec!["0".into(), "1".into()],
        vec!["g".into(), "b".into()],
        law,
    )
}

/// Normalized running state pmf with accumulated per-step scale logs (bits).
#[derive(Debug, Clone)]
pub struct StateMetric {
    pub pmf: Vec<f64>,
    pub log_lambda_sum_bits: f64,
    pub step: usize,
}

impl StateMetric {
    pub fn uniform(num_states: usize) -> Self {
        Self {
            pmf: vec![1.0 / num_states as f64; num_states],
            log_lambda_sum_bits: 0.0,
            step: 0,
        }
    }

    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        check_pmf(&pmf, pmf.len(), "initial state pmf")?;
        Ok(Self {
            pmf,
            log_lambda_sum_bits: 0.0,
            step: 0,
        })
    }
}

/// One output-only metric update:
/// `mu_l(s') = sum_{x,s} mu(s) Q(x) W(y, s' | x, s)`, normalized.
/// Returns the updated metric and the scale `lambda`.
pub fn update_metric_y(
    f: &Fsmc,
    q: &[f64],
    metric: &StateMetric,
    y: usize,
) -> Result<(StateMetric, f64)> {
    let ns = f.num_states();
    let mut next = vec![0.0; ns];
    for (x, &qx) in q.iter().enumerate() {
        if qx == 0.0 {
            continue;
        }
        for s in 0..ns {
            let base = metric.pmf[s] * qx;
            if base == 0.0 {
                continue;
            }
            for (sp, slot) in next.iter_mut().enumerate() {
                *slot += base * f.law(x, s, y, sp);
            }
        }
    }
    finish_update(metric, next, y)
}

/// One joint metric update (Algorithm-1 form, including the `Q(x)` factor):
/// `mu_l(s') = sum_s mu(s) Q(x) W(y, s' | x, s)`, normalized.
pub fn update_metric_xy(
    f: &Fsmc,
    q: &[f64],
    metric: &StateMetric,
    x: usize,
    y: usize,
) -> Result<(StateMetric, f64)> {
    let ns = f.num_states();
    let mut next = vec![0.0; ns];
    for s in 0..ns {
        let base = metric.pmf[s] * q[x];
        if base == 0.0 {
            continue;
        }
        for (sp, slot) in next.iter_mut().enumerate() {
            *slot += base * f.law(x, s, y, sp);
        }
    }
    finish_update(metric, next, y)
}

fn finish_update(metric: &StateMetric, next: Vec<f64>, _y: usize) -> Result<(StateMetric, f64)> {
    let lambda: f64 = next.iter().sum();
    if lambda <= 1e-300 {
        return Err(Error::ZeroProbability {
            step: metric.step,
            value: lambda,
        });
    }
    let pmf = next.into_iter().map(|v| v / lambda).collect();
    Ok((
        StateMetric {
            pmf,
            log_lambda_sum_bits: metric.log_lambda_sum_bits + lambda.log2(),
            step: metric.step + 1,
        },
        lambda,
    ))
}

/// Simulates the FSMC and returns the trajectory together with the visited
/// state sequence `s_0..s_n`.
pub fn sample_fsmc_with_states(
    f: &Fsmc,
    q: &[f64],
    n: usize,
    s0_pmf: &[f64],
    seed: u64,
) -> Result<(Trajectory, Vec<usize>)> {
    check_pmf(q, f.num_inputs(), "input pmf")?;
    check_pmf(s0_pmf, f.num_states(), "initial state pmf")?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (ny, ns) = (f.num_outputs(), f.num_states());
    let draw = |pmf: &[f64], u: f64| -> usize {
        let mut acc = 0.0;
        for (i, &p) in pmf.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        pmf.len() - 1
    };
    let mut state = draw(s0_pmf, rng.gen::<f64>());
    let mut states = Vec::with_capacity(n + 1);
    states.push(state);
    let mut inputs = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    let mut joint = vec![0.0; ny * ns];
    for _ in 0..n {
        let x = draw(q, rng.gen::<f64>());
        for y in 0..ny {
            for sp in 0..ns {
                joint[y * ns + sp] = f.law(x, state, y, sp);
            }
        }
        let pick = draw(&joint, rng.gen::<f64>());
        let (y, sp) = (pick / ns, pick % ns);
        inputs.push(x);
        outputs.push(y);
        state = sp;
        states.push(state);
    }
    Ok((
        Trajectory {
            inputs,
            outputs,
            input_symbols: f.input_symbols.clone(),
            output_symbols: f.output_symbols.clone(),
            seed,
            initial_state: "uniform".to_string(),
        },
        states,
    ))
}

/// Simulates the FSMC with explicit classical state propagation.
pub fn sample_fsmc(f: &Fsmc, q: &[f64], n: usize, s0_pmf: &[f64], seed: u64) -> Result<Trajectory> {
    sample_fsmc_with_states(f, q, n, s0_pmf, seed).map(|(t, _)| t)
}

/// Runs both metric recursions of the classical rate-estimation algorithm on
/// a given trajectory, starting from `s0_pmf`.
///
/// The joint metric follows the classical algorithm literally: its per-step
/// scale includes the `Q(x_l)` factor, so `prod lambda_xy = P(x, y)`.
pub fn algorithm1_on_trajectory(
    f: &Fsmc,
    q: &[f64],
    traj: &Trajectory,
    s0_pmf: &[f64],
    keep_lambdas: bool,
) -> Result<RateEstimate> {
    check_pmf(q, f.num_inputs(), "input pmf")?;
    check_pmf(s0_pmf, f.num_states(), "initial state pmf")?;
    let n = traj.len();
    let mut lambda_y = Vec::with_capacity(n);
    let mut metric = StateMetric::from_pmf(s0_pmf.to_vec())?;
    for &y in &traj.outputs {
        let (next, lambda) = update_metric_y(f, q, &metric, y)?;
        metric = next;
        lambda_y.push(lambda);
    }
    let h_y_bits = -metric.log_lambda_sum_bits / n as f64;

    let mut lambda_xy = Vec::with_capacity(n);
    let mut metric = StateMetric::from_pmf(s0_pmf.to_vec())?;
    for (&x, &y) in traj.inputs.iter().zip(&traj.outputs) {
        let (next, lambda) = update_metric_xy(f, q, &metric, x, y)?;
        metric = next;
        lambda_xy.push(lambda);
    }
    let h_xy_bits = -metric.log_lambda_sum_bits / n as f64;

    let h_x_bits = crate::rate::source_entropy(q);
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

/// Samples a trajectory (uniform initial state pmf) and estimates the
/// information rate of the FSMC under the i.i.d. input pmf `Q`.
///
/// The channel should be indecomposable; that is the caller's responsibility
/// (see the indecomposability probe in the rate module).
pub fn algorithm1_estimate(f: &Fsmc, q: &[f64], n: usize, seed: u64) -> Result<RateEstimate> {
    let s0 = vec![1.0 / f.num_states() as f64; f.num_states()];
    let traj = sample_fsmc(f, q, n, &s0, seed)?;
    algorithm1_on_trajectory(f, q, &traj, &s0, false)
}
