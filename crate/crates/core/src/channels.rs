//! Classical-input classical-output quantum-state channels (CC-QSCs).
//!
//! A CC-QSC is a finite family of completely positive maps `N^{y|x}` on a
//! memory space such that `sum_y N^{y|x}` is trace-preserving for every input
//! symbol `x`. Each map is stored as a d^2 x d^2 transfer matrix `[W^{y|x}]`
//! acting on row-major vectorized operators:
//!
//! - transfer form: row index `(s', s~') -> s'*d + s~'`, column `(s, s~) -> s*d + s~`;
//! - Choi form: row index `(s', s) -> s'*d + s`, column `(s~', s~) -> s~'*d + s~`.
//!
//! The two forms are entry reshuffles of one another; the Choi form is PSD iff
//! the map is completely positive, and trace preservation reads
//! `sum_y sum_{s'} Choi[(s',s),(s',s~)] = delta_{s,s~}` for every `x`.

use crate::fsmc::Fsmc;
use crate::numerics::{herm_eig, ComplexMatrix};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;

/// Default validation tolerance for constructed channels.
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-9;

/// Per-step probabilities below this are clamped to zero before sampling.
const SAMPLING_PROB_FLOOR: f64 = 1e-15;

/// Eigenvalues of a Choi matrix at or below this are dropped when extracting
/// Kraus operators.
const KRAUS_EIG_CUTOFF: f64 = 1e-12;

/// Guard for exhaustive output enumeration.
const ENUMERATION_LIMIT: usize = 12;

/// Finite symbol alphabet with index lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet(Vec<String>);

impl Alphabet {
    pub fn new(symbols: Vec<String>) -> Self {
        Self(symbols)
    }

    pub fn from_symbols(symbols: &[&str]) -> Self {
        Self(symbols.iter().map(|s| s.to_string()).collect())
    }

    pub fn binary() -> Self {
        Self::from_symbols(&["0", "1"])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.0[i]
    }

    pub fn symbols(&self) -> &[String] {
        &self.0
    }

    pub fn index(&self, symbol: &str) -> Result<usize> {
        self.0
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| Error::UnknownSymbol {
                symbol: symbol.to_string(),
            })
    }
}

/// d x d Hermitian, PSD, unit-trace operator (channel memory state).
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let herm = matrix.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::InvalidDensity {
                reason: format!("Hermiticity violation {herm:.3e}"),
            });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidDensity {
                reason: format!("trace {tr} deviates from 1"),
            });
        }
        let eig = herm_eig(&matrix)?;
        if eig.eigenvalues[0] < -1e-10 {
            return Err(Error::InvalidDensity {
                reason: format!("minimum eigenvalue {:.3e}", eig.eigenvalues[0]),
            });
        }
        Ok(Self { matrix })
    }

    /// |0><0| on a d-dimensional memory.
    pub fn ground(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::basis_projector(dim, 0),
        }
    }

    /// I/d.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    /// Random full-rank state G G† / tr(G G†) with Gaussian G.
    pub fn random(dim: usize, rng: &mut impl Rng) -> Self {
        let g = crate::numerics::random_complex_gaussian(dim, dim, rng);
        let p = g.matmul(&g.adjoint());
        let tr = p.trace().re;
        Self {
            matrix: p.scale_real(1.0 / tr),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn entropy_bits(&self) -> Result<f64> {
        crate::numerics::von_neumann_entropy(&self.matrix)
    }
}

/// d^2 x d^2 matrix `[W^{y|x}]` acting on vectorized operators.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    dim: usize,
    matrix: ComplexMatrix,
}

impl TransferMatrix {
    pub fn new(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() != dim * dim || matrix.cols() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: matrix.rows(),
                context: "transfer matrix",
            });
        }
        Ok(Self { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Applies the map to an operator: unvec([W] vec(sigma)).
    pub fn apply(&self, sigma: &ComplexMatrix) -> ComplexMatrix {
        let d = self.dim;
        debug_assert_eq!(sigma.rows(), d);
        let mut out = ComplexMatrix::zeros(d, d);
        for sp in 0..d {
            for stp in 0..d {
                let row = sp * d + stp;
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..d {
                    for st in 0..d {
                        acc += self.matrix.get(row, s * d + st) * sigma.get(s, st);
                    }
                }
                out.set(sp, stp, acc);
            }
        }
        out
    }

    /// Applies the transposed matrix to a row-form operator (backward messages).
    pub fn apply_transposed(&self, l: &ComplexMatrix) -> ComplexMatrix {
        let d = self.dim;
        debug_assert_eq!(l.rows(), d);
        let mut out = ComplexMatrix::zeros(d, d);
        for s in 0..d {
            for st in 0..d {
                let col = s * d + st;
                let mut acc = Complex64::new(0.0, 0.0);
                for sp in 0..d {
                    for stp in 0..d {
                        acc += l.get(sp, stp) * self.matrix.get(sp * d + stp, col);
                    }
                }
                out.set(s, st, acc);
            }
        }
        out
    }
}

/// d^2 x d^2 Choi–Jamiolkowski matrix `[[W^{y|x}]]`.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    dim: usize,
    matrix: ComplexMatrix,
}

impl ChoiMatrix {
    pub fn new(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() != dim * dim || matrix.cols() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: matrix.rows(),
                context: "Choi matrix",
            });
        }
        Ok(Self { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// Transfer -> Choi reshuffle: `Choi[(s',s),(s~',s~)] = W[(s',s~'),(s,s~)]`.
pub fn to_choi(w: &TransferMatrix) -> ChoiMatrix {
    let d = w.dim();
    let m = ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        let (sp, s) = (r / d, r % d);
        let (stp, st) = (c / d, c % d);
        w.matrix().get(sp * d + stp, s * d + st)
    });
    ChoiMatrix { dim: d, matrix: m }
}

/// Choi -> transfer reshuffle (inverse of `to_choi`).
pub fn from_choi(c: &ChoiMatrix) -> TransferMatrix {
    let d = c.dim();
    let m = ComplexMatrix::from_fn(d * d, d * d, |r, col| {
        let (sp, stp) = (r / d, r % d);
        let (s, st) = (col / d, col % d);
        c.matrix().get(sp * d + s, stp * d + st)
    });
    TransferMatrix { dim: d, matrix: m }
}

/// Kraus operators of one completely positive map from its Choi matrix:
/// the eigenpairs with eigenvalue above the cutoff give `sqrt(lambda) unvec(v)`.
pub fn kraus_from_choi(c: &ChoiMatrix) -> Result<Vec<ComplexMatrix>> {
    let d = c.dim();
    let eig = herm_eig(c.matrix())?;
    if eig.eigenvalues[0] < -1e-9 {
        return Err(Error::ChoiNotPsd {
            min_eig: eig.eigenvalues[0],
        });
    }
    let mut ops = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= KRAUS_EIG_CUTOFF {
            continue;
        }
        let scale = lam.sqrt();
        let f = ComplexMatrix::from_fn(d, d, |sp, s| {
            eig.eigenvectors.get(sp * d + s, k) * scale
        });
        ops.push(f);
    }
    Ok(ops)
}

/// Kraus representation of a CC-QSC: an ordered operator list per (x, y) pair.
#[derive(Debug, Clone)]
pub struct KrausFamily {
    dim: usize,
    num_inputs: usize,
    num_outputs: usize,
    ops: Vec<Vec<ComplexMatrix>>,
}

impl KrausFamily {
    pub fn new(dim: usize, num_inputs: usize, num_outputs: usize) -> Self {
        Self {
            dim,
            num_inputs,
            num_outputs,
            ops: vec![Vec::new(); num_inputs * num_outputs],
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

    pub fn set_ops(&mut self, x: usize, y: usize, ops: Vec<ComplexMatrix>) {
        self.ops[x * self.num_outputs + y] = ops;
    }

    pub fn ops(&self, x: usize, y: usize) -> &[ComplexMatrix] {
        &self.ops[x * self.num_outputs + y]
    }

    /// ||sum_{y,k} F_k† F_k - I||_F for input x.
    pub fn completeness_residual(&self, x: usize) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
        for y in 0..self.num_outputs {
            for f in self.ops(x, y) {
                sum = sum.add(&f.adjoint().matmul(f));
            }
        }
        sum.sub(&ComplexMatrix::identity(self.dim)).frobenius_norm()
    }
}

/// A classical-input classical-output quantum-state channel.
#[derive(Debug, Clone)]
pub struct CcQsc {
    inputs: Alphabet,
    outputs: Alphabet,
    dim: usize,
    transfer: Vec<TransferMatrix>,
}

impl CcQsc {
    pub fn from_transfer_family(
        inputs: Alphabet,
        outputs: Alphabet,
        dim: usize,
        transfer: Vec<TransferMatrix>,
    ) -> Result<Self> {
        if transfer.len() != inputs.len() * outputs.len() {
            return Err(Error::Dimension {
                expected: inputs.len() * outputs.len(),
                got: transfer.len(),
                context: "transfer family size",
            });
        }
        let ch = Self {
            inputs,
            outputs,
            dim,
            transfer,
        };
        let report = validate(&ch, DEFAULT_VALIDATION_TOL);
        if !report.pass() {
            if report.min_choi_eigenvalue() < -DEFAULT_VALIDATION_TOL {
                return Err(Error::ChoiNotPsd {
                    min_eig: report.min_choi_eigenvalue(),
                });
            }
            return Err(Error::Format {
                reason: format!(
                    "trace-preservation residual {:.3e} exceeds {:.1e}",
                    report.max_tp_residual(),
                    DEFAULT_VALIDATION_TOL
                ),
            });
        }
        Ok(ch)
    }

    /// Construction without validation; for optimizer internals that must
    /// carry slightly infeasible iterates (finite differences, non-converged
    /// projections).
    pub(crate) fn from_transfer_family_unchecked(
        inputs: Alphabet,
        outputs: Alphabet,
        dim: usize,
        transfer: Vec<TransferMatrix>,
    ) -> Self {
        Self {
            inputs,
            outputs,
            dim,
            transfer,
        }
    }

    /// Builds the channel from per-(x, y) Choi blocks.
    pub fn from_choi_family(
        inputs: Alphabet,
        outputs: Alphabet,
        dim: usize,
        choi: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        let transfer = choi
            .into_iter()
            .map(|m| ChoiMatrix::new(dim, m).map(|c| from_choi(&c)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_transfer_family(inputs, outputs, dim, transfer)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &Alphabet {
        &self.inputs
    }

    pub fn outputs(&self) -> &Alphabet {
        &self.outputs
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn transfer(&self, x: usize, y: usize) -> &TransferMatrix {
        &self.transfer[x * self.outputs.len() + y]
    }

    pub fn choi(&self, x: usize, y: usize) -> ChoiMatrix {
        to_choi(self.transfer(x, y))
    }

    /// All Choi blocks in (x, y) order.
    pub fn choi_family(&self) -> Vec<ComplexMatrix> {
        let mut blocks = Vec::with_capacity(self.transfer.len());
        for x in 0..self.num_inputs() {
            for y in 0..self.num_outputs() {
                blocks.push(to_choi(self.transfer(x, y)).matrix().clone());
            }
        }
        blocks
    }

    /// sum_x Q(x) [W^{y|x}] applied to sigma.
    pub fn apply_input_averaged(&self, q: &[f64], y: usize, sigma: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for (x, &qx) in q.iter().enumerate() {
            if qx == 0.0 {
                continue;
            }
            out = out.add(&self.transfer(x, y).apply(sigma).scale_real(qx));
        }
        out
    }

    /// Row-form (transposed) application of sum_x Q(x) [W^{y|x}].
    pub fn apply_input_averaged_transposed(
        &self,
        q: &[f64],
        y: usize,
        l: &ComplexMatrix,
    ) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for (x, &qx) in q.iter().enumerate() {
            if qx == 0.0 {
                continue;
            }
            out = out.add(&self.transfer(x, y).apply_transposed(l).scale_real(qx));
        }
        out
    }
}

/// Validation outcome: Choi positivity per (x, y) and trace preservation per x.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub tol: f64,
    /// Minimum Choi eigenvalue per (x, y), flattened x-major.
    pub min_choi_eigenvalues: Vec<f64>,
    /// ||sum_y ptr(Choi) - I||_F per input x.
    pub tp_residuals: Vec<f64>,
    pub num_outputs: usize,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.min_choi_eigenvalues.iter().all(|&e| e >= -self.tol)
            && self.tp_residuals.iter().all(|&r| r <= self.tol)
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        self.min_choi_eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_tp_residual(&self) -> f64 {
        self.tp_residuals.iter().copied().fold(0.0, f64::max)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "validation at tol {:.1e}: {}",
            self.tol,
            if self.pass() { "PASS" } else { "FAIL" }
        )?;
        for (x, r) in self.tp_residuals.iter().enumerate() {
            writeln!(f, "  input {x}: trace-preservation residual {r:.3e}")?;
        }
        for (i, e) in self.min_choi_eigenvalues.iter().enumerate() {
            let (x, y) = (i / self.num_outputs, i % self.num_outputs);
            writeln!(f, "  pair (x={x}, y={y}): min Choi eigenvalue {e:.3e}")?;
        }
        Ok(())
    }
}

/// Checks Choi positivity for every (x, y) and the trace-preservation sum
/// condition for every x.
pub fn validate(ch: &CcQsc, tol: f64) -> ValidationReport {
    let d = ch.dim();
    let mut min_eigs = Vec::new();
    let mut tp = Vec::new();
    for x in 0..ch.num_inputs() {
        let mut sum = ComplexMatrix::zeros(d, d);
        for y in 0..ch.num_outputs() {
            let choi = ch.choi(x, y);
            let min_eig = herm_eig(choi.matrix())
                .map(|e| e.eigenvalues[0])
                .unwrap_or(f64::NEG_INFINITY);
            min_eigs.push(min_eig);
            // Partial trace over the output leg s' of the Choi block.
            let ptr = ComplexMatrix::from_fn(d, d, |s, st| {
                (0..d).map(|sp| choi.matrix().get(sp * d + s, sp * d + st)).sum()
            });
            sum = sum.add(&ptr);
        }
        tp.push(sum.sub(&ComplexMatrix::identity(d)).frobenius_norm());
    }
    ValidationReport {
        tol,
        min_choi_eigenvalues: min_eigs,
        tp_residuals: tp,
        num_outputs: ch.num_outputs(),
    }
}

/// Transfer matrices `sum_k kron(F_k, conj(F_k))` of a Kraus family, with no
/// validity checks.
pub(crate) fn transfer_family_from_kraus(kraus: &KrausFamily) -> Vec<TransferMatrix> {
    let d = kraus.dim();
    let mut transfer = Vec::with_capacity(kraus.num_inputs() * kraus.num_outputs());
    for x in 0..kraus.num_inputs() {
        for y in 0..kraus.num_outputs() {
            let mut w = ComplexMatrix::zeros(d * d, d * d);
            for f in kraus.ops(x, y) {
                w = w.add(&f.kron(&f.conjugate()));
            }
            transfer.push(TransferMatrix { dim: d, matrix: w });
        }
    }
    transfer
}

/// Builds a CC-QSC from a Kraus family:
/// `W^{y|x}(s',s,s~',s~) = sum_k F_k(s',s) conj(F_k(s~',s~))`.
pub fn from_kraus(kraus: &KrausFamily, inputs: Alphabet, outputs: Alphabet) -> Result<CcQsc> {
    if inputs.len() != kraus.num_inputs() || outputs.len() != kraus.num_outputs() {
        return Err(Error::Dimension {
            expected: kraus.num_inputs(),
            got: inputs.len(),
            context: "alphabet sizes vs Kraus family",
        });
    }
    for x in 0..kraus.num_inputs() {
        let residual = kraus.completeness_residual(x);
        if residual > DEFAULT_VALIDATION_TOL {
            return Err(Error::Completeness {
                input: inputs.symbol(x).to_string(),
                residual,
            });
        }
    }
    let d = kraus.dim();
    let transfer = transfer_family_from_kraus(kraus);
    CcQsc::from_transfer_family(inputs, outputs, d, transfer)
}

/// Channel-ensemble-measurement configuration: a CPTP map `N` on
/// H_A (x) H_S -> H_B (x) H_S (Kraus form, composite index `a*dim_s + s`),
/// an input ensemble `{rho_A^(x)}`, and a POVM `{Lambda_B^(y)}`.
#[derive(Debug, Clone)]
pub struct ChannelConfig {
    pub dim_a: usize,
    pub dim_b: usize,
    pub dim_s: usize,
    /// Kraus operators of N, each (dim_b*dim_s) x (dim_a*dim_s).
    pub kraus: Vec<ComplexMatrix>,
    pub ensemble: Vec<ComplexMatrix>,
    pub povm: Vec<ComplexMatrix>,
}

impl ChannelConfig {
    pub fn check(&self) -> Result<()> {
        let din = self.dim_a * self.dim_s;
        let dout = self.dim_b * self.dim_s;
        let mut comp = ComplexMatrix::zeros(din, din);
        for g in &self.kraus {
            if g.rows() != dout || g.cols() != din {
                return Err(Error::Dimension {
                    expected: dout,
                    got: g.rows(),
                    context: "configuration Kraus operator",
                });
            }
            comp = comp.add(&g.adjoint().matmul(g));
        }
        let res = comp.sub(&ComplexMatrix::identity(din)).frobenius_norm();
        if res > DEFAULT_VALIDATION_TOL {
            return Err(Error::Completeness {
                input: "configuration map".to_string(),
                residual: res,
            });
        }
        for rho in &self.ensemble {
            DensityOperator::new(rho.clone())?;
        }
        let mut povm_sum = ComplexMatrix::zeros(self.dim_b, self.dim_b);
        for lam in &self.povm {
            let eig = herm_eig(lam)?;
            if eig.eigenvalues[0] < -DEFAULT_VALIDATION_TOL {
                return Err(Error::ChoiNotPsd {
                    min_eig: eig.eigenvalues[0],
                });
            }
            povm_sum = povm_sum.add(lam);
        }
        let res = povm_sum
            .sub(&ComplexMatrix::identity(self.dim_b))
            .frobenius_norm();
        if res > DEFAULT_VALIDATION_TOL {
            return Err(Error::PovmIncomplete { residual: res });
        }
        Ok(())
    }
}

/// Realizes `N^{y|x}(rho_S) = tr_B((Lambda^(y) (x) I_S) N(rho^(x) (x) rho_S))`
/// as a transfer-matrix family.
///
/// Kraus operators of the reduced maps: for eigenpairs `(p_r, u_r)` of
/// `rho^(x)` and `(w_t, v_t)` of `Lambda^(y)`,
/// `F = sqrt(p_r w_t) (<v_t| (x) I_S) G_m (|u_r> (x) I_S)`.
pub fn from_config(cfg: &ChannelConfig, inputs: Alphabet, outputs: Alphabet) -> Result<CcQsc> {
    cfg.check()?;
    if inputs.len() != cfg.ensemble.len() || outputs.len() != cfg.povm.len() {
        return Err(Error::Dimension {
            expected: cfg.ensemble.len(),
            got: inputs.len(),
            context: "alphabet sizes vs configuration",
        });
    }
    let (da, db, ds) = (cfg.dim_a, cfg.dim_b, cfg.dim_s);
    let mut family = KrausFamily::new(ds, inputs.len(), outputs.len());

    // Spectral pieces of the ensemble and POVM, small eigenvalues dropped.
    let spectral = |m: &ComplexMatrix| -> Result<Vec<(f64, Vec<Complex64>)>> {
        let eig = herm_eig(m)?;
        let mut parts = Vec::new();
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > KRAUS_EIG_CUTOFF {
                let v: Vec<Complex64> = (0..m.rows()).map(|i| eig.eigenvectors.get(i, k)).collect();
                parts.push((lam, v));
            }
        }
        Ok(parts)
    };

    for (x, rho) in cfg.ensemble.iter().enumerate() {
        let rho_parts = spectral(rho)?;
        for (y, lam) in cfg.povm.iter().enumerate() {
            let povm_parts = spectral(lam)?;
            let mut ops = Vec::new();
            for g in &cfg.kraus {
                for (p, u) in &rho_parts {
                    // G (|u> (x) I_S): collapse the A input leg.
                    let gu = ComplexMatrix::from_fn(db * ds, ds, |row, s| {
                        (0..da).map(|a| g.get(row, a * ds + s) * u[a]).sum()
                    });
                    for (w, v) in &povm_parts {
                        // (<v| (x) I_S) G (|u> (x) I_S): collapse the B output leg.
                        let f = ComplexMatrix::from_fn(ds, ds, |sp, s| {
                            (0..db)
                                .map(|b| v[b].conj() * gu.get(b * ds + sp, s))
                                .sum::<Complex64>()
                                * Complex64::new((p * w).sqrt(), 0.0)
                        });
                        ops.push(f);
                    }
                }
            }
            family.set_ops(x, y, ops);
        }
    }
    from_kraus(&family, inputs, outputs)
}

/// One step of the channel: unnormalized successor `[W^{y|x}] vec(sigma)`.
///
/// `tr` of the result is the step probability `P(y | x; sigma/tr(sigma)) * tr(sigma)`.
pub fn step(ch: &CcQsc, x: usize, y: usize, sigma: &ComplexMatrix) -> Result<ComplexMatrix> {
    if x >= ch.num_inputs() {
        return Err(Error::UnknownSymbol {
            symbol: format!("input #{x}"),
        });
    }
    if y >= ch.num_outputs() {
        return Err(Error::UnknownSymbol {
            symbol: format!("output #{y}"),
        });
    }
    Ok(ch.transfer(x, y).apply(sigma))
}

/// Exact law of the output string given inputs:
/// `P(y_1..y_n | x_1..x_n; rho0) = tr([W^{y_n|x_n}] ... [W^{y_1|x_1}] vec(rho0))`
/// for every output string, in lexicographic order with y_1 the most
/// significant digit.
pub fn channel_law_exact(
    ch: &CcQsc,
    inputs: &[usize],
    rho0: &DensityOperator,
) -> Result<Vec<f64>> {
    let n = inputs.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let ny = ch.num_outputs();
    let mut pmf = vec![0.0; ny.pow(n as u32)];
    // DFS over output prefixes, carrying the running unnormalized state.
    fn recurse(
        ch: &CcQsc,
        inputs: &[usize],
        level: usize,
        index: usize,
        sigma: &ComplexMatrix,
        pmf: &mut [f64],
    ) {
        if level == inputs.len() {
            pmf[index] = sigma.trace().re;
            return;
        }
        for y in 0..ch.num_outputs() {
            let next = ch.transfer(inputs[level], y).apply(sigma);
            recurse(ch, inputs, level + 1, index * ch.num_outputs() + y, &next, pmf);
        }
    }
    recurse(ch, inputs, 0, 0, rho0.matrix(), &mut pmf);
    Ok(pmf)
}

/// A sampled input/output realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub input_symbols: Vec<String>,
    pub output_symbols: Vec<String>,
    pub seed: u64,
    pub initial_state: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Checks symbol compatibility with a channel's alphabets.
    pub fn check_alphabets(&self, inputs: &Alphabet, outputs: &Alphabet) -> Result<()> {
        if self.input_symbols != inputs.symbols() || self.output_symbols != outputs.symbols() {
            return Err(Error::TrajectoryMismatch {
                context: format!(
                    "trajectory ({:?} -> {:?}) vs channel ({:?} -> {:?})",
                    self.input_symbols,
                    self.output_symbols,
                    inputs.symbols(),
                    outputs.symbols()
                ),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_pmf(q: &[f64], len: usize, context: &str) -> Result<()> {
    if q.len() != len {
        return Err(Error::InvalidPmf {
            reason: format!("{context}: length {} vs alphabet size {len}", q.len()),
        });
    }
    if q.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
        return Err(Error::InvalidPmf {
            reason: format!("{context}: entries outside [0, 1]"),
        });
    }
    let sum: f64 = q.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidPmf {
            reason: format!("{context}: sums to {sum}"),
        });
    }
    Ok(())
}

/// Inverse-CDF draw; one uniform per symbol keeps sampling reproducible and
/// couples runs that share a seed.
fn draw(pmf: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    pmf.len() - 1
}

/// Simulates the channel: inputs i.i.d. from Q, outputs from the per-step
/// conditional of the running normalized memory state.
pub fn sample_trajectory(
    ch: &CcQsc,
    q: &[f64],
    n: usize,
    rho0: &DensityOperator,
    seed: u64,
) -> Result<Trajectory> {
    check_pmf(q, ch.num_inputs(), "input pmf")?;
    if rho0.dim() != ch.dim() {
        return Err(Error::Dimension {
            expected: ch.dim(),
            got: rho0.dim(),
            context: "initial state dimension",
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut sigma = rho0.matrix().clone();
    let ny = ch.num_outputs();
    let mut inputs = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    let mut probs = vec![0.0; ny];
    for step_idx in 0..n {
        let x = draw(q, rng.gen::<f64>());
        let mut successors = Vec::with_capacity(ny);
        let mut total = 0.0;
        for (y, prob) in probs.iter_mut().enumerate() {
            let next = ch.transfer(x, y).apply(&sigma);
            let p = next.trace().re;
            *prob = if p < SAMPLING_PROB_FLOOR { 0.0 } else { p };
            total += *prob;
            successors.push(next);
        }
        if total < 1e-300 {
            return Err(Error::ZeroProbability {
                step: step_idx,
                value: total,
            });
        }
        let normalized: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let y = draw(&normalized, rng.gen::<f64>());
        let tr = successors[y].trace().re;
        sigma = successors[y].scale_real(1.0 / tr);
        inputs.push(x);
        outputs.push(y);
    }
    Ok(Trajectory {
        inputs,
        outputs,
        input_symbols: ch.inputs().symbols().to_vec(),
        output_symbols: ch.outputs().symbols().to_vec(),
        seed,
        initial_state: "ground".to_string(),
    })
}

/// Embeds a classical finite-state-machine channel as a CC-QSC with diagonal
/// structure: `d = |S|` and Kraus list `{sqrt(W(y,s'|x,s)) |s'><s|}` per (x, y).
pub fn embed_fsmc(f: &Fsmc) -> Result<CcQsc> {
    let d = f.num_states();
    let mut family = KrausFamily::new(d, f.num_inputs(), f.num_outputs());
    for x in 0..f.num_inputs() {
        for y in 0..f.num_outputs() {
            let mut ops = Vec::new();
            for s in 0..d {
                for sp in 0..d {
                    let w = f.law(x, s, y, sp);
                    if w > 0.0 {
                        let mut e = ComplexMatrix::zeros(d, d);
                        e.set(sp, s, Complex64::new(w.sqrt(), 0.0));
                        ops.push(e);
                    }
                }
            }
            family.set_ops(x, y, ops);
        }
    }
    from_kraus(
        &family,
        Alphabet::new(f.input_symbols().to_vec()),
        Alphabet::new(f.output_symbols().to_vec()),
    )
}

/// Symbol-wise posteriors `P(X_l | y_1..y_n; rho0)` via normalized forward and
/// backward sweeps over the input-averaged transfer matrices.
pub fn bcjr_posteriors(
    ch: &CcQsc,
    q: &[f64],
    outputs: &[usize],
    rho0: &DensityOperator,
) -> Result<Vec<Vec<f64>>> {
    check_pmf(q, ch.num_inputs(), "input pmf")?;
    let n = outputs.len();
    let d = ch.dim();

    let mut forward = Vec::with_capacity(n + 1);
    forward.push(rho0.matrix().clone());
    for (l, &y) in outputs.iter().enumerate() {
        let next = ch.apply_input_averaged(q, y, &forward[l]);
        let tr = next.trace().re;
        if tr <= 1e-300 {
            return Err(Error::ZeroProbability { step: l, value: tr });
        }
        forward.push(next.scale_real(1.0 / tr));
    }

    let mut backward = vec![ComplexMatrix::zeros(d, d); n + 1];
    backward[n] = ComplexMatrix::identity(d).scale_real(1.0 / d as f64);
    for l in (1..=n).rev() {
        let prev = ch.apply_input_averaged_transposed(q, outputs[l - 1], &backward[l]);
        let tr = prev.trace().re;
        if tr <= 1e-300 {
            return Err(Error::ZeroProbability {
                step: l - 1,
                value: tr,
            });
        }
        backward[l - 1] = prev.scale_real(1.0 / tr);
    }

    // Bilinear pairing of the row-form backward message with an operator.
    let pair = |l: &ComplexMatrix, s: &ComplexMatrix| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += l.get(i, j) * s.get(i, j);
            }
        }
        acc.re
    };

    let mut posteriors = Vec::with_capacity(n);
    for (l, &y) in outputs.iter().enumerate() {
        let mut post = vec![0.0; ch.num_inputs()];
        for (x, &qx) in q.iter().enumerate() {
            if qx == 0.0 {
                continue;
            }
            let advanced = ch.transfer(x, y).apply(&forward[l]);
            post[x] = qx * pair(&backward[l + 1], &advanced);
        }
        let total: f64 = post.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroProbability {
                step: l,
                value: total,
            });
        }
        for p in &mut post {
            *p = (*p / total).max(0.0);
        }
        posteriors.push(post);
    }
    Ok(posteriors)
}

/// Builds the memoryless binary symmetric channel with crossover `p` as a
/// d = 1 CC-QSC (scalar Kraus operators).
pub fn bsc_channel(p: f64) -> Result<CcQsc> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ParameterRange {
            name: "p",
            value: p,
        });
    }
    let mut family = KrausFamily::new(1, 2, 2);
    for x in 0..2 {
        for y in 0..2 {
            let prob = if x == y { 1.0 - p } else { p };
            let mut k = ComplexMatrix::zeros(1, 1);
            k.set(0, 0, Complex64::new(prob.sqrt(), 0.0));
            family.set_ops(x, y, vec![k]);
        }
    }
    from_kraus(&family, Alphabet::binary(), Alphabet::binary())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsmc;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_channel(d: usize) -> CcQsc {
        // Single input/output pair, F = I_d.
        let mut family = KrausFamily::new(d, 1, 1);
        family.set_ops(0, 0, vec![ComplexMatrix::identity(d)]);
        from_kraus(
            &family,
            Alphabet::from_symbols(&["0"]),
            Alphabet::from_symbols(&["0"]),
        )
        .unwrap()
    }

    /// Noiseless channel on a 1-dim memory: y == x deterministically.
    fn noiseless_binary() -> CcQsc {
        bsc_channel(0.0).unwrap()
    }

    #[test]
    fn bsc_embedding_transfer_scalars() {
        let ch = bsc_channel(0.1).unwrap();
        assert_eq!(ch.dim(), 1);
        assert!((ch.transfer(0, 0).matrix().get(0, 0).re - 0.9).abs() < 1e-15);
        assert!((ch.transfer(0, 1).matrix().get(0, 0).re - 0.1).abs() < 1e-15);
        assert!((ch.transfer(1, 1).matrix().get(0, 0).re - 0.9).abs() < 1e-15);
    }

    #[test]
    fn identity_kraus_gives_identity_transfer() {
        let ch = identity_channel(2);
        let id4 = ComplexMatrix::identity(4);
        assert!(ch.transfer(0, 0).matrix().sub(&id4).frobenius_norm() < 1e-14);
    }

    #[test]
    fn from_kraus_rejects_incomplete_family() {
        let mut family = KrausFamily::new(2, 1, 1);
        family.set_ops(0, 0, vec![ComplexMatrix::identity(2).scale_real(0.9)]);
        let err = from_kraus(
            &family,
            Alphabet::from_symbols(&["0"]),
            Alphabet::from_symbols(&["0"]),
        );
        assert!(matches!(err, Err(Error::Completeness { .. })));
    }

    #[test]
    fn choi_round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = crate::numerics::random_complex_gaussian(9, 9, &mut rng);
        let w = TransferMatrix::new(3, m).unwrap();
        let back = from_choi(&to_choi(&w));
        assert_eq!(back.matrix(), w.matrix());
    }

    #[test]
    fn identity_channel_choi_entries() {
        let ch = identity_channel(2);
        let choi = ch.choi(0, 0);
        // W(s',s,s~',s~) = delta_{s's} delta_{s~'s~}: ones at ((a,a),(b,b)).
        for a in 0..2 {
            for b in 0..2 {
                for ap in 0..2 {
                    for bp in 0..2 {
                        let v = choi.matrix().get(a * 2 + ap, b * 2 + bp).re;
                        let expected = if a == ap && b == bp { 1.0 } else { 0.0 };
                        assert!((v - expected).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn choi_of_valid_channel_is_psd() {
        let ch = identity_channel(3);
        let eig = herm_eig(ch.choi(0, 0).matrix()).unwrap();
        assert!(eig.eigenvalues[0] > -1e-12);
    }

    #[test]
    fn kraus_from_choi_identity_rank_one() {
        let ch = identity_channel(2);
        let ops = kraus_from_choi(&ch.choi(0, 0)).unwrap();
        assert_eq!(ops.len(), 1);
        // Up to a global phase the single Kraus operator is the identity.
        let k = &ops[0];
        let ktk = k.adjoint().matmul(k);
        assert!(ktk.sub(&ComplexMatrix::identity(2)).frobenius_norm() < 1e-10);
        assert!(k.get(0, 1).norm() < 1e-10 && k.get(1, 0).norm() < 1e-10);
    }

    #[test]
    fn kraus_from_choi_rejects_negative_eigenvalue() {
        let m = ComplexMatrix::from_real_diag(&[1.0, -0.1, 0.2, 0.3]);
        let c = ChoiMatrix::new(2, m).unwrap();
        assert!(matches!(kraus_from_choi(&c), Err(Error::ChoiNotPsd { .. })));
    }

    #[test]
    fn validate_flags_scaled_transfer() {
        let ch = bsc_channel(0.1).unwrap();
        let mut transfer: Vec<TransferMatrix> = (0..2)
            .flat_map(|x| (0..2).map(move |y| (x, y)))
            .map(|(x, y)| ch.transfer(x, y).clone())
            .collect();
        transfer[0] = TransferMatrix::new(1, transfer[0].matrix().scale_real(1.01)).unwrap();
        let broken = CcQsc {
            inputs: Alphabet::binary(),
            outputs: Alphabet::binary(),
            dim: 1,
            transfer,
        };
        let report = validate(&broken, 1e-9);
        assert!(!report.pass());
        // Scaling 0.9 by 1.01 shifts the TP sum by 0.009 = 0.01 * 0.9 * sqrt(d), d = 1.
        assert!((report.tp_residuals[0] - 0.009).abs() < 1e-12);
    }

    #[test]
    fn step_preserves_total_probability() {
        let params = crate::qgec::QgecParams::base(0.05, 0.95, 1.0);
        let ch = crate::qgec::build_qgec(&params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let rho = DensityOperator::random(2, &mut rng);
            for x in 0..2 {
                let total: f64 = (0..2)
                    .map(|y| step(&ch, x, y, rho.matrix()).unwrap().trace().re)
                    .sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn step_scalar_bsc() {
        let ch = bsc_channel(0.1).unwrap();
        let one = ComplexMatrix::identity(1);
        let out = step(&ch, 0, 0, &one).unwrap();
        assert!((out.get(0, 0).re - 0.9).abs() < 1e-15);
    }

    #[test]
    fn step_identity_channel_leaves_state() {
        let ch = identity_channel(2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = DensityOperator::random(2, &mut rng);
        let out = step(&ch, 0, 0, rho.matrix()).unwrap();
        assert!(out.sub(rho.matrix()).frobenius_norm() < 1e-13);
    }

    #[test]
    fn step_rejects_unknown_symbols() {
        let ch = bsc_channel(0.1).unwrap();
        assert!(step(&ch, 2, 0, &ComplexMatrix::identity(1)).is_err());
    }

    #[test]
    fn exact_law_normalizes() {
        let params = crate::qgec::QgecParams::base(0.05, 0.95, 1.0);
        let ch = crate::qgec::build_qgec(&params).unwrap();
        let pmf = channel_law_exact(&ch, &[0, 1, 0], &DensityOperator::ground(2)).unwrap();
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_law_memoryless_product() {
        let ch = bsc_channel(0.1).unwrap();
        let pmf = channel_law_exact(&ch, &[0, 0], &DensityOperator::ground(1)).unwrap();
        assert!((pmf[0] - 0.81).abs() < 1e-12); // y = (0,0)
        assert!((pmf[3] - 0.01).abs() < 1e-12); // y = (1,1)
    }

    #[test]
    fn exact_law_guards_length() {
        let ch = bsc_channel(0.1).unwrap();
        let inputs = vec![0usize; 13];
        assert!(matches!(
            channel_law_exact(&ch, &inputs, &DensityOperator::ground(1)),
            Err(Error::EnumerationGuard { .. })
        ));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let ch = bsc_channel(0.1).unwrap();
        let q = [0.5, 0.5];
        let rho = DensityOperator::ground(1);
        let t1 = sample_trajectory(&ch, &q, 500, &rho, 99).unwrap();
        let t2 = sample_trajectory(&ch, &q, 500, &rho, 99).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn sampling_bsc_flip_frequency() {
        let ch = bsc_channel(0.1).unwrap();
        let q = [0.5, 0.5];
        let t = sample_trajectory(&ch, &q, 100_000, &DensityOperator::ground(1), 7).unwrap();
        let flips = t
            .inputs
            .iter()
            .zip(&t.outputs)
            .filter(|(x, y)| x != y)
            .count() as f64;
        let freq = flips / t.len() as f64;
        assert!((freq - 0.1).abs() < 0.005, "flip frequency {freq}");
    }

    #[test]
    fn sampling_noiseless_echoes_inputs() {
        let ch = noiseless_binary();
        let t = sample_trajectory(&ch, &[0.5, 0.5], 200, &DensityOperator::ground(1), 3).unwrap();
        assert_eq!(t.inputs, t.outputs);
    }

    #[test]
    fn embedded_fsmc_keeps_diagonal_states() {
        let f = fsmc::gilbert_elliott(0.05, 0.4, 0.1, 0.2).unwrap();
        let ch = embed_fsmc(&f).unwrap();
        let mut sigma = ComplexMatrix::from_real_diag(&[0.3, 0.7]);
        for (x, y) in [(0, 1), (1, 0), (0, 0)] {
            sigma = step(&ch, x, y, &sigma).unwrap();
            assert!(sigma.get(0, 1).norm() < 1e-14);
            assert!(sigma.get(1, 0).norm() < 1e-14);
        }
    }

    #[test]
    fn embedded_fsmc_validates() {
        let f = fsmc::gilbert_elliott(0.05, 0.4, 0.1, 0.2).unwrap();
        let ch = embed_fsmc(&f).unwrap();
        assert!(validate(&ch, 1e-9).pass());
    }

    #[test]
    fn bcjr_output_independent_channel_returns_prior() {
        // Output marginal independent of input: both inputs share the flip law.
        let mut family = KrausFamily::new(1, 2, 2);
        for x in 0..2 {
            let mut k0 = ComplexMatrix::zeros(1, 1);
            k0.set(0, 0, Complex64::new(0.3f64.sqrt(), 0.0));
            let mut k1 = ComplexMatrix::zeros(1, 1);
            k1.set(0, 0, Complex64::new(0.7f64.sqrt(), 0.0));
            family.set_ops(x, 0, vec![k0]);
            family.set_ops(x, 1, vec![k1]);
        }
        let ch = from_kraus(&family, Alphabet::binary(), Alphabet::binary()).unwrap();
        let q = [0.25, 0.75];
        let post = bcjr_posteriors(&ch, &q, &[0, 1, 1], &DensityOperator::ground(1)).unwrap();
        for p in post {
            assert!((p[0] - 0.25).abs() < 1e-12);
            assert!((p[1] - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn bcjr_noiseless_channel_returns_point_mass() {
        let ch = noiseless_binary();
        let outputs = [1, 0, 1];
        let post = bcjr_posteriors(&ch, &[0.5, 0.5], &outputs, &DensityOperator::ground(1)).unwrap();
        for (l, p) in post.iter().enumerate() {
            assert!((p[outputs[l]] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn config_memoryless_map_leaves_memory_untouched() {
        // N = (bit flip on A->B) (x) I_S, orthonormal ensemble, projective POVM.
        let p: f64 = 0.2;
        let ds = 2;
        let x_gate = ComplexMatrix::from_rows(&[
            vec![(0.0, 0.0), (1.0, 0.0)],
            vec![(1.0, 0.0), (0.0, 0.0)],
        ]);
        let k0 = ComplexMatrix::identity(2).scale_real((1.0 - p).sqrt());
        let k1 = x_gate.scale_real(p.sqrt());
        let cfg = ChannelConfig {
            dim_a: 2,
            dim_b: 2,
            dim_s: ds,
            kraus: vec![
                k0.kron(&ComplexMatrix::identity(ds)),
                k1.kron(&ComplexMatrix::identity(ds)),
            ],
            ensemble: vec![
                ComplexMatrix::basis_projector(2, 0),
                ComplexMatrix::basis_projector(2, 1),
            ],
            povm: vec![
                ComplexMatrix::basis_projector(2, 0),
                ComplexMatrix::basis_projector(2, 1),
            ],
        };
        let ch = from_config(&cfg, Alphabet::binary(), Alphabet::binary()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = DensityOperator::random(ds, &mut rng);
        for x in 0..2 {
            for y in 0..2 {
                let out = step(&ch, x, y, rho.matrix()).unwrap();
                let prob = if x == y { 1.0 - p } else { p };
                // Memory untouched: successor is prob * rho.
                assert!(out.sub(&rho.matrix().scale_real(prob)).frobenius_norm() < 1e-12);
            }
        }
    }

    #[test]
    fn config_rejects_incomplete_povm() {
        let cfg = ChannelConfig {
            dim_a: 1,
            dim_b: 2,
            dim_s: 1,
            kraus: vec![ComplexMatrix::from_rows(&[
                vec![(1.0, 0.0)],
                vec![(0.0, 0.0)],
            ])],
            ensemble: vec![ComplexMatrix::identity(1)],
            povm: vec![
                ComplexMatrix::basis_projector(2, 0),
                ComplexMatrix::basis_projector(2, 1).scale_real(0.5),
            ],
        };
        assert!(matches!(
            from_config(&cfg, Alphabet::from_symbols(&["0"]), Alphabet::binary()),
            Err(Error::PovmIncomplete { .. })
        ));
    }

    #[test]
    fn density_operator_validation() {
        assert!(DensityOperator::new(ComplexMatrix::from_real_diag(&[0.5, 0.5])).is_ok());
        assert!(DensityOperator::new(ComplexMatrix::from_real_diag(&[0.9, 0.2])).is_err());
        assert!(DensityOperator::new(ComplexMatrix::from_real_diag(&[1.5, -0.5])).is_err());
    }
}
