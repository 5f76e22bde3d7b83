//! Test-side oracles, independent of the transfer-matrix machinery they
//! check: density operators are propagated directly through Kraus operators
//! built from scratch, classical laws are exhaustive path sums, and the slow
//! projection below is a from-scratch Dykstra run at a much tighter tolerance.

use qsc_core::{unitary_exp, Complex64, ComplexMatrix, Fsmc};

/// Kraus operators of the base quantum Gilbert–Elliott channel on its 2-dim
/// memory, indexed `[x][y]`, assembled from the controlled-bit-flip matrices
/// written out longhand.
pub fn qgec_memory_kraus(
    p_g: f64,
    p_b: f64,
    alpha: f64,
    h: &ComplexMatrix,
) -> Vec<Vec<Vec<ComplexMatrix>>> {
    let v = unitary_exp(h, alpha).unwrap();
    let (cg, cb) = ((1.0 - p_g).sqrt(), (1.0 - p_b).sqrt());
    let (sg, sb) = (p_g.sqrt(), p_b.sqrt());
    // (s, a)-ordered controlled bit flip: identity block with weight
    // sqrt(1-p_s), flip block with weight sqrt(p_s).
    let mut e0 = ComplexMatrix::zeros(4, 4);
    for (i, w) in [(0, cg), (1, cg), (2, cb), (3, cb)] {
        e0.set(i, i, Complex64::new(w, 0.0));
    }
    let mut e1 = ComplexMatrix::zeros(4, 4);
    for (i, j, w) in [(0, 1, sg), (1, 0, sg), (2, 3, sb), (3, 2, sb)] {
        e1.set(i, j, Complex64::new(w, 0.0));
    }
    (0..2)
        .map(|x| {
            (0..2)
                .map(|y| {
                    [&e0, &e1]
                        .iter()
                        .map(|e| {
                            let contracted = ComplexMatrix::from_fn(2, 2, |sp, s| {
                                e.get(2 * sp + y, 2 * s + x)
                            });
                            v.matmul(&contracted)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `P(y | x; rho0)` by stepwise density-operator propagation through the
/// Kraus family (no vectorization involved).
pub fn kraus_law(
    kraus: &[Vec<Vec<ComplexMatrix>>],
    inputs: &[usize],
    outputs: &[usize],
    rho0: &ComplexMatrix,
) -> f64 {
    let mut sigma = rho0.clone();
    for (&x, &y) in inputs.iter().zip(outputs) {
        let mut next = ComplexMatrix::zeros(sigma.rows(), sigma.cols());
        for k in &kraus[x][y] {
            next = next.add(&k.matmul(&sigma).matmul(&k.adjoint()));
        }
        sigma = next;
    }
    sigma.trace().re
}

/// `P(y; rho0)` by enumerating all input strings.
pub fn kraus_output_marginal(
    kraus: &[Vec<Vec<ComplexMatrix>>],
    q: &[f64],
    outputs: &[usize],
    rho0: &ComplexMatrix,
) -> f64 {
    let n = outputs.len();
    let nx = q.len();
    let mut total = 0.0;
    for code in 0..nx.pow(n as u32) {
        let mut inputs = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            inputs.push(c % nx);
            c /= nx;
        }
        let weight: f64 = inputs.iter().map(|&x| q[x]).product();
        total += weight * kraus_law(kraus, &inputs, outputs, rho0);
    }
    total
}

/// Symbol-wise posteriors `P(X_l = x | y; rho0)` by full enumeration.
pub fn kraus_posteriors(
    kraus: &[Vec<Vec<ComplexMatrix>>],
    q: &[f64],
    outputs: &[usize],
    rho0: &ComplexMatrix,
) -> Vec<Vec<f64>> {
    let n = outputs.len();
    let nx = q.len();
    let mut joint = vec![vec![0.0; nx]; n];
    let mut total = 0.0;
    for code in 0..nx.pow(n as u32) {
        let mut inputs = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            inputs.push(c % nx);
            c /= nx;
        }
        let weight: f64 = inputs.iter().map(|&x| q[x]).product();
        let p = weight * kraus_law(kraus, &inputs, outputs, rho0);
        total += p;
        for (l, &x) in inputs.iter().enumerate() {
            joint[l][x] += p;
        }
    }
    joint
        .into_iter()
        .map(|row| row.iter().map(|v| v / total).collect())
        .collect()
}

/// Classical joint law `P(y | x; s0 ~ pmf)` by exhaustive state-path sums.
pub fn fsmc_brute_force_law(f: &Fsmc, inputs: &[usize], outputs: &[usize], s0: &[f64]) -> f64 {
    let ns = f.num_states();
    let n = inputs.len();
    let mut total = 0.0;
    for code in 0..ns.pow((n + 1) as u32) {
        let mut states = Vec::with_capacity(n + 1);
        let mut c = code;
        for _ in 0..=n {
            states.push(c % ns);
            c /= ns;
        }
        let mut p = s0[states[0]];
        for l in 0..n {
            p *= f.law(inputs[l], states[l], outputs[l], states[l + 1]);
        }
        total += p;
    }
    total
}

/// Independent slow feasibility projection: a from-scratch Dykstra iteration
/// between the blockwise PSD cones and the trace-preservation affine set, run
/// far past the production tolerance.
pub fn slow_feasible_projection(
    dim: usize,
    num_outputs: usize,
    candidate: &[ComplexMatrix],
    sweeps: usize,
) -> Vec<ComplexMatrix> {
    let d2 = dim * dim;
    let num_inputs = candidate.len() / num_outputs;
    let mut x: Vec<ComplexMatrix> = candidate.iter().map(|b| b.hermitized()).collect();
    let mut p = vec![ComplexMatrix::zeros(d2, d2); candidate.len()];
    let mut q = vec![ComplexMatrix::zeros(d2, d2); candidate.len()];

    let tp_project = |blocks: &mut [ComplexMatrix]| {
        let share = 1.0 / (num_outputs * dim) as f64;
        for xi in 0..num_inputs {
            for s in 0..dim {
                for st in 0..dim {
                    let mut r = Complex64::new(0.0, 0.0);
                    for y in 0..num_outputs {
                        for sp in 0..dim {
                            r += blocks[xi * num_outputs + y].get(sp * dim + s, sp * dim + st);
                        }
                    }
                    if s == st {
                        r -= Complex64::new(1.0, 0.0);
                    }
                    let shift = r * share;
                    for y in 0..num_outputs {
                        let b = &mut blocks[xi * num_outputs + y];
                        for sp in 0..dim {
                            let v = b.get(sp * dim + s, sp * dim + st);
                            b.set(sp * dim + s, sp * dim + st, v - shift);
                        }
                    }
                }
            }
        }
    };

    for _ in 0..sweeps {
        let xp: Vec<ComplexMatrix> = x.iter().zip(&p).map(|(a, b)| a.add(b)).collect();
        let y_proj: Vec<ComplexMatrix> = xp
            .iter()
            .map(|b| qsc_core::psd_project(b).unwrap())
            .collect();
        p = xp.iter().zip(&y_proj).map(|(a, b)| a.sub(b)).collect();

        let mut x_next: Vec<ComplexMatrix> =
            y_proj.iter().zip(&q).map(|(a, b)| a.add(b)).collect();
        tp_project(&mut x_next);
        q = y_proj.iter().zip(&x_next).map(|(a, b)| a.sub(b)).collect();

        let gap: f64 = y_proj
            .iter()
            .zip(&x_next)
            .map(|(a, b)| a.sub(b).frobenius_norm())
            .sum();
        x = x_next;
        if gap < 1e-13 {
            break;
        }
    }
    x
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}
