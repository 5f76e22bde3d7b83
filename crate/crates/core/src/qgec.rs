//! Quantum Gilbert–Elliott channels.
//!
//! A control qubit selects the flip probability of a bit-flip channel acting
//! on the transmitted qubit (`p_g` when the control is |0>, `p_b` when it is
//! |1>), and evolves unitarily by `V = exp(-i alpha H)` after every use. The
//! variant extends the memory to two qubits of which only one controls the
//! flip. Both constructions use the orthonormal computational ensemble and
//! projective measurement, so they reduce to d = 2 (respectively d = 4)
//! CC-QSCs.
//!
//! Tensor ordering puts the memory ahead of the transmitted qubit:
//! composite index `(s, a) -> 2s + a`.

use crate::channels::{from_kraus, Alphabet, CcQsc, ChannelConfig, KrausFamily};
use crate::numerics::{unitary_exp, ComplexMatrix};
use crate::{Error, Result};
use num_complex::Complex64;

/// Parameters of a quantum Gilbert–Elliott channel.
#[derive(Debug, Clone)]
pub struct QgecParams {
    pub p_g: f64,
    pub p_b: f64,
    pub alpha: f64,
    /// Memory Hamiltonian: 2x2 for the base channel, 4x4 for the variant.
    pub hamiltonian: ComplexMatrix,
    pub variant: bool,
}

impl QgecParams {
    /// Base channel with the default 2x2 Hamiltonian.
    pub fn base(p_g: f64, p_b: f64, alpha: f64) -> Self {
        Self {
            p_g,
            p_b,
            alpha,
            hamiltonian: default_hamiltonian_2(),
            variant: false,
        }
    }

    /// Two-qubit-memory variant with the default 4x4 Hamiltonian.
    pub fn variant(p_g: f64, p_b: f64, alpha: f64) -> Self {
        Self {
            p_g,
            p_b,
            alpha,
            hamiltonian: default_hamiltonian_4(),
            variant: true,
        }
    }

    pub fn with_hamiltonian(mut self, h: ComplexMatrix) -> Self {
        self.hamiltonian = h;
        self
    }

    fn check(&self) -> Result<()> {
        for (name, value) in [("p_g", self.p_g), ("p_b", self.p_b)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ParameterRange { name, value });
            }
        }
        let expected = if self.variant { 4 } else { 2 };
        if self.hamiltonian.rows() != expected || self.hamiltonian.cols() != expected {
            return Err(Error::Dimension {
                expected,
                got: self.hamiltonian.rows(),
                context: "memory Hamiltonian",
            });
        }
        let herm = self.hamiltonian.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::ParameterRange {
                name: "hamiltonian hermiticity",
                value: herm,
            });
        }
        Ok(())
    }
}

/// Default memory Hamiltonian for the base channel. The construction works
/// for any Hermitian choice; this one is fixed so runs are reproducible.
pub fn default_hamiltonian_2() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        vec![(1.0, 0.0), (0.5, -0.5)],
        vec![(0.5, 0.5), (-1.0, 0.0)],
    ])
}

/// Default 4x4 Hamiltonian for the variant: two copies of the 2x2 default on
/// the diagonal, coupled by 0.25 on the off-diagonal blocks.
pub fn default_hamiltonian_4() -> ComplexMatrix {
    let h2 = default_hamiltonian_2();
    let coupling = ComplexMatrix::identity(2).scale_real(0.25);
    ComplexMatrix::from_fn(4, 4, |i, j| {
        let (bi, bj) = (i / 2, j / 2);
        if bi == bj {
            h2.get(i % 2, j % 2)
        } else {
            coupling.get(i % 2, j % 2)
        }
    })
}

/// Kraus pair of the controlled bit-flip channel on memory (x) transmitted
/// qubit, ordering `(s, a) -> 2s + a`.
pub fn cbf_kraus(p_g: f64, p_b: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    for (name, value) in [("p_g", p_g), ("p_b", p_b)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ParameterRange { name, value });
        }
    }
    let (cg, cb) = ((1.0 - p_g).sqrt(), (1.0 - p_b).sqrt());
    let (sg, sb) = (p_g.sqrt(), p_b.sqrt());
    let e0 = ComplexMatrix::from_real_diag(&[cg, cg, cb, cb]);
    let mut e1 = ComplexMatrix::zeros(4, 4);
    e1.set(0, 1, Complex64::new(sg, 0.0));
    e1.set(1, 0, Complex64::new(sg, 0.0));
    e1.set(2, 3, Complex64::new(sb, 0.0));
    e1.set(3, 2, Complex64::new(sb, 0.0));
    Ok((e0, e1))
}

/// Stinespring unitaries of the controlled bit-flip channel, one per control
/// basis state, acting on transmitted qubit (x) environment qubit,
/// ordering `(a, e) -> 2a + e`, environment prepared in |0>.
pub fn stinespring_unitaries(p_g: f64, p_b: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    for (name, value) in [("p_g", p_g), ("p_b", p_b)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ParameterRange { name, value });
        }
    }
    let build = |p: f64| {
        let c = (1.0 - p).sqrt();
        let s = p.sqrt();
        ComplexMatrix::from_rows(&[
            vec![(c, 0.0), (0.0, 0.0), (0.0, 0.0), (-s, 0.0)],
            vec![(0.0, 0.0), (c, 0.0), (s, 0.0), (0.0, 0.0)],
            vec![(0.0, 0.0), (-s, 0.0), (c, 0.0), (0.0, 0.0)],
            vec![(s, 0.0), (0.0, 0.0), (0.0, 0.0), (c, 0.0)],
        ])
    };
    Ok((build(p_g), build(p_b)))
}

/// Contracts a controlled-bit-flip Kraus operator with the classical input
/// `|x>` and measured output `<y|`: the 2x2 memory block `E[(s', y), (s, x)]`.
fn contract_io(e: &ComplexMatrix, x: usize, y: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |sp, s| e.get(2 * sp + y, 2 * s + x))
}

/// Builds the base (d = 2) quantum Gilbert–Elliott channel.
///
/// Per (x, y), the Kraus operators on the memory are `V . <y| E_i |x>` with
/// `V = exp(-i alpha H)` conjugating the post-flip memory, following the
/// circuit picture.
pub fn build_qgec(params: &QgecParams) -> Result<CcQsc> {
    if params.variant {
        return build_qgec_variant(params);
    }
    params.check()?;
    let v = unitary_exp(&params.hamiltonian, params.alpha)?;
    let (e0, e1) = cbf_kraus(params.p_g, params.p_b)?;
    let mut family = KrausFamily::new(2, 2, 2);
    for x in 0..2 {
        for y in 0..2 {
            let ops = [&e0, &e1]
                .iter()
                .map(|e| v.matmul(&contract_io(e, x, y)))
                .collect();
            family.set_ops(x, y, ops);
        }
    }
    from_kraus(&family, Alphabet::binary(), Alphabet::binary())
}

/// Builds the two-qubit-memory variant (d = 4).
///
/// Memory ordering is `S1 (x) S0` with S0 (the minor index) controlling the
/// bit flip; the unitary `V~ = exp(-i alpha H)` acts on the full memory.
pub fn build_qgec_variant(params: &QgecParams) -> Result<CcQsc> {
    if !params.variant {
        return build_qgec(params);
    }
    params.check()?;
    let v = unitary_exp(&params.hamiltonian, params.alpha)?;
    let (e0, e1) = cbf_kraus(params.p_g, params.p_b)?;
    let id2 = ComplexMatrix::identity(2);
    let mut family = KrausFamily::new(4, 2, 2);
    for x in 0..2 {
        for y in 0..2 {
            let ops = [&e0, &e1]
                .iter()
                .map(|e| v.matmul(&id2.kron(&contract_io(e, x, y))))
                .collect();
            family.set_ops(x, y, ops);
        }
    }
    from_kraus(&family, Alphabet::binary(), Alphabet::binary())
}

/// The base channel expressed as a channel-ensemble-measurement configuration
/// (Stinespring route): the two CBF Kraus operators with the memory unitary
/// applied, reordered to the configuration's input-major convention. Used to
/// cross-check `build_qgec` against `from_config`.
pub fn qgec_config(params: &QgecParams) -> Result<ChannelConfig> {
    params.check()?;
    if params.variant {
        return Err(Error::ParameterRange {
            name: "variant (configuration route supports the base channel)",
            value: 1.0,
        });
    }
    let v = unitary_exp(&params.hamiltonian, params.alpha)?;
    let (e0, e1) = cbf_kraus(params.p_g, params.p_b)?;
    let id2 = ComplexMatrix::identity(2);
    // (V (x) I_B) E_i in memory-major ordering, then swap both legs to the
    // configuration's A-major ordering (a*dim_s + s).
    let swap = |m: &ComplexMatrix| -> ComplexMatrix {
        ComplexMatrix::from_fn(4, 4, |r, c| {
            let (a_out, s_out) = (r / 2, r % 2);
            let (a_in, s_in) = (c / 2, c % 2);
            m.get(2 * s_out + a_out, 2 * s_in + a_in)
        })
    };
    let vb = v.kron(&id2);
    let kraus = vec![swap(&vb.matmul(&e0)), swap(&vb.matmul(&e1))];
    Ok(ChannelConfig {
        dim_a: 2,
        dim_b: 2,
        dim_s: 2,
        kraus,
        ensemble: vec![
            ComplexMatrix::basis_projector(2, 0),
            ComplexMatrix::basis_projector(2, 1),
        ],
        povm: vec![
            ComplexMatrix::basis_projector(2, 0),
            ComplexMatrix::basis_projector(2, 1),
        ],
    })
}

/// Which parameter a preset sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweptParameter {
    CrossoverBad { lo: f64, hi: f64 },
    Alpha { lo: f64, hi: f64 },
}

/// One experiment descriptor mirroring the standard parameter sweeps.
#[derive(Debug, Clone)]
pub struct SweepPreset {
    pub name: &'static str,
    pub variant: bool,
    pub p_g: f64,
    pub fixed_p_b: Option<f64>,
    pub fixed_alpha: Option<f64>,
    pub swept: SweptParameter,
    pub n: usize,
}

impl SweepPreset {
    pub fn by_name(name: &str) -> Option<SweepPreset> {
        sweep_presets().into_iter().find(|p| p.name == name)
    }

    /// Evenly spaced grid over the swept range.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        let (lo, hi) = match self.swept {
            SweptParameter::CrossoverBad { lo, hi } => (lo, hi),
            SweptParameter::Alpha { lo, hi } => (lo, hi),
        };
        if points <= 1 {
            return vec![lo];
        }
        (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect()
    }

    /// Instantiates the channel at one grid value, optionally overriding the
    /// default Hamiltonian.
    pub fn channel_at(&self, value: f64, hamiltonian: Option<&ComplexMatrix>) -> Result<CcQsc> {
        let (p_b, alpha) = match self.swept {
            SweptParameter::CrossoverBad { .. } => (
                value,
                self.fixed_alpha.expect("preset fixes alpha"),
            ),
            SweptParameter::Alpha { .. } => (
                self.fixed_p_b.expect("preset fixes p_b"),
                value,
            ),
        };
        let mut params = if self.variant {
            QgecParams::variant(self.p_g, p_b, alpha)
        } else {
            QgecParams::base(self.p_g, p_b, alpha)
        };
        if let Some(h) = hamiltonian {
            params = params.with_hamiltonian(h.clone());
        }
        build_qgec(&params)
    }
}

/// The four standard sweeps: bad-state crossover over [0, 1] at alpha = 1 for
/// the base channel and the variant, and alpha over [0.1, 1.5] at p_b = 0.95
/// for both; p_g = 0.05 and n = 1e5 throughout.
pub fn sweep_presets() -> Vec<SweepPreset> {
    vec![
        SweepPreset {
            name: "fig6a",
            variant: false,
            p_g: 0.05,
            fixed_p_b: None,
            fixed_alpha: Some(1.0),
            swept: SweptParameter::CrossoverBad { lo: 0.0, hi: 1.0 },
            n: 100_000,
        },
        SweepPreset {
            name: "fig6b",
            variant: true,
            p_g: 0.05,
            fixed_p_b: None,
            fixed_alpha: Some(1.0),
            swept: SweptParameter::CrossoverBad { lo: 0.0, hi: 1.0 },
            n: 100_000,
        },
        SweepPreset {
            name: "fig6c",
            variant: false,
            p_g: 0.05,
            fixed_p_b: Some(0.95),
            fixed_alpha: None,
            swept: SweptParameter::Alpha { lo: 0.1, hi: 1.5 },
            n: 100_000,
        },
        SweepPreset {
            name: "fig6d",
            variant: true,
            p_g: 0.05,
            fixed_p_b: Some(0.95),
            fixed_alpha: None,
            swept: SweptParameter::Alpha { lo: 0.1, hi: 1.5 },
            n: 100_000,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{channel_law_exact, from_config, step, validate, DensityOperator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cbf_kraus_zero_noise_is_identity() {
        let (e0, e1) = cbf_kraus(0.0, 0.0).unwrap();
        assert!(e0.sub(&ComplexMatrix::identity(4)).frobenius_norm() < 1e-15);
        assert!(e1.frobenius_norm() < 1e-15);
    }

    #[test]
    fn cbf_kraus_good_block_entries() {
        let (e0, _) = cbf_kraus(0.05, 0.4).unwrap();
        let v = 0.95f64.sqrt();
        assert!((e0.get(0, 0).re - v).abs() < 1e-15);
        assert!((e0.get(1, 1).re - v).abs() < 1e-15);
    }

    #[test]
    fn cbf_kraus_completeness() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let p_g: f64 = rand::Rng::gen(&mut rng);
            let p_b: f64 = rand::Rng::gen(&mut rng);
            let (e0, e1) = cbf_kraus(p_g, p_b).unwrap();
            let sum = e0.adjoint().matmul(&e0).add(&e1.adjoint().matmul(&e1));
            assert!(sum.sub(&ComplexMatrix::identity(4)).frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn stinespring_unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let p: f64 = rand::Rng::gen(&mut rng);
            let (u0, u1) = stinespring_unitaries(p, 1.0 - p).unwrap();
            for u in [&u0, &u1] {
                let utu = u.adjoint().matmul(u);
                assert!(utu.sub(&ComplexMatrix::identity(4)).frobenius_norm() < 1e-12);
            }
        }
    }

    #[test]
    fn stinespring_zero_noise_is_identity() {
        let (u0, _) = stinespring_unitaries(0.0, 0.3).unwrap();
        assert!(u0.sub(&ComplexMatrix::identity(4)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn stinespring_traces_to_bit_flip() {
        // K_e = <e|_E U |0>_E must implement the flip channel of each block.
        let (p_g, p_b) = (0.12, 0.77);
        let (u0, u1) = stinespring_unitaries(p_g, p_b).unwrap();
        let x_gate = ComplexMatrix::from_rows(&[
            vec![(0.0, 0.0), (1.0, 0.0)],
            vec![(1.0, 0.0), (0.0, 0.0)],
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (u, p) in [(&u0, p_g), (&u1, p_b)] {
            let k0 = ComplexMatrix::from_fn(2, 2, |ap, a| u.get(2 * ap, 2 * a));
            let k1 = ComplexMatrix::from_fn(2, 2, |ap, a| u.get(2 * ap + 1, 2 * a));
            let rho = DensityOperator::random(2, &mut rng);
            let via_unitary = k0
                .matmul(rho.matrix())
                .matmul(&k0.adjoint())
                .add(&k1.matmul(rho.matrix()).matmul(&k1.adjoint()));
            let direct = rho
                .matrix()
                .scale_real(1.0 - p)
                .add(&x_gate.matmul(rho.matrix()).matmul(&x_gate).scale_real(p));
            assert!(via_unitary.sub(&direct).frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn base_channel_validates() {
        let ch = build_qgec(&QgecParams::base(0.05, 0.95, 1.0)).unwrap();
        assert!(validate(&ch, 1e-9).pass());
    }

    #[test]
    fn equal_crossovers_give_memoryless_bsc_law() {
        let p = 0.17;
        let ch = build_qgec(&QgecParams::base(p, p, 1.0)).unwrap();
        let inputs = [0, 1, 1, 0];
        let pmf = channel_law_exact(&ch, &inputs, &DensityOperator::ground(2)).unwrap();
        for (code, &prob) in pmf.iter().enumerate() {
            let outputs: Vec<usize> = (0..4).rev().map(|l| (code >> l) & 1).collect();
            let expected: f64 = inputs
                .iter()
                .zip(&outputs)
                .map(|(x, y)| if x == y { 1.0 - p } else { p })
                .product();
            assert!((prob - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_alpha_freezes_good_state() {
        let ch = build_qgec(&QgecParams::base(0.05, 0.95, 0.0)).unwrap();
        let inputs = [1, 0, 1, 1];
        let pmf = channel_law_exact(&ch, &inputs, &DensityOperator::ground(2)).unwrap();
        for (code, &prob) in pmf.iter().enumerate() {
            let outputs: Vec<usize> = (0..4).rev().map(|l| (code >> l) & 1).collect();
            let expected: f64 = inputs
                .iter()
                .zip(&outputs)
                .map(|(x, y)| if x == y { 0.95 } else { 0.05 })
                .product();
            assert!((prob - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn configuration_route_matches_kraus_route() {
        let params = QgecParams::base(0.05, 0.95, 1.0);
        let direct = build_qgec(&params).unwrap();
        let cfg = qgec_config(&params).unwrap();
        let via_config = from_config(&cfg, Alphabet::binary(), Alphabet::binary()).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let diff = direct
                    .transfer(x, y)
                    .matrix()
                    .sub(via_config.transfer(x, y).matrix())
                    .frobenius_norm();
                assert!(diff < 1e-10, "transfer ({x},{y}) differs by {diff}");
            }
        }
    }

    #[test]
    fn variant_validates_and_decouples_spectator() {
        let params = QgecParams::variant(0.05, 0.95, 1.0);
        let ch = build_qgec_variant(&params).unwrap();
        assert!(validate(&ch, 1e-9).pass());

        // V~ = I (x) V acting only on the controlling qubit reduces to the base
        // channel's law whenever the initial state factorizes.
        let v_only = ComplexMatrix::identity(2).kron(&default_hamiltonian_2());
        let reduced = build_qgec_variant(
            &QgecParams::variant(0.05, 0.95, 1.0).with_hamiltonian(v_only),
        )
        .unwrap();
        let base = build_qgec(&QgecParams::base(0.05, 0.95, 1.0)).unwrap();
        let inputs = [0, 1, 0, 1];
        let pmf_variant =
            channel_law_exact(&reduced, &inputs, &DensityOperator::ground(4)).unwrap();
        let pmf_base = channel_law_exact(&base, &inputs, &DensityOperator::ground(2)).unwrap();
        for (a, b) in pmf_variant.iter().zip(&pmf_base) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn variant_equal_crossovers_memoryless() {
        let p = 0.3;
        let ch = build_qgec_variant(&QgecParams::variant(p, p, 1.0)).unwrap();
        let inputs = [1, 0];
        let pmf = channel_law_exact(&ch, &inputs, &DensityOperator::ground(4)).unwrap();
        for (code, &prob) in pmf.iter().enumerate() {
            let outputs = [(code >> 1) & 1, code & 1];
            let expected: f64 = inputs
                .iter()
                .zip(&outputs)
                .map(|(x, y)| if x == y { 1.0 - p } else { p })
                .product();
            assert!((prob - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn per_step_law_depends_on_memory_state() {
        let ch = build_qgec(&QgecParams::base(0.05, 0.95, 1.0)).unwrap();
        let ground = DensityOperator::ground(2);
        let excited = DensityOperator::new(ComplexMatrix::basis_projector(2, 1)).unwrap();
        let p_flip_ground = step(&ch, 0, 1, ground.matrix()).unwrap().trace().re;
        let p_flip_excited = step(&ch, 0, 1, excited.matrix()).unwrap().trace().re;
        assert!((p_flip_ground - 0.05).abs() < 1e-12);
        assert!((p_flip_excited - 0.95).abs() < 1e-12);
    }

    #[test]
    fn presets_match_declared_grids() {
        let presets = sweep_presets();
        assert_eq!(presets.len(), 4);
        let a = SweepPreset::by_name("fig6a").unwrap();
        assert_eq!(a.p_g, 0.05);
        assert_eq!(a.n, 100_000);
        let c = SweepPreset::by_name("fig6c").unwrap();
        assert_eq!(c.fixed_p_b, Some(0.95));
        for preset in &presets {
            let grid = preset.grid(7);
            assert!(grid.windows(2).all(|w| w[1] > w[0]), "grid not monotone");
            let (lo, hi) = match preset.swept {
                SweptParameter::CrossoverBad { lo, hi } => (lo, hi),
                SweptParameter::Alpha { lo, hi } => (lo, hi),
            };
            assert!(grid.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }

    #[test]
    fn preset_channels_validate_across_grid() {
        for preset in sweep_presets() {
            for value in preset.grid(5) {
                let ch = preset.channel_at(value, None).unwrap();
                assert!(validate(&ch, 1e-9).pass(), "{} at {value}", preset.name);
            }
        }
    }
}
