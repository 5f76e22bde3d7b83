//! File formats: channel JSON, FSMC JSON, and plain-text trace files.
//!
//! Channel files carry either a `kraus` block (per-(x, y) operator lists) or
//! a `config` block (channel-ensemble-measurement configuration). Complex
//! entries are `[re, im]` pairs; matrices are row lists. Trace files are
//! line-oriented and diff-able: a small header followed by one
//! `input<TAB>output` pair per line.

use crate::channels::{
    from_config, from_kraus, kraus_from_choi, Alphabet, CcQsc, ChannelConfig, KrausFamily,
    Trajectory,
};
use crate::fsmc::Fsmc;
use crate::numerics::ComplexMatrix;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

type JsonMatrix = Vec<Vec<[f64; 2]>>;

fn matrix_to_json(m: &ComplexMatrix) -> JsonMatrix {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| {
                    let v = m.get(i, j);
                    [v.re, v.im]
                })
                .collect()
        })
        .collect()
}

fn matrix_from_json(rows: &JsonMatrix, context: &str) -> Result<ComplexMatrix> {
    let r = rows.len();
    if r == 0 {
        return Err(Error::Format {
            reason: format!("{context}: empty matrix"),
        });
    }
    let c = rows[0].len();
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Format {
            reason: format!("{context}: ragged matrix rows"),
        });
    }
    Ok(ComplexMatrix::from_fn(r, c, |i, j| {
        Complex64::new(rows[i][j][0], rows[i][j][1])
    }))
}

#[derive(Serialize, Deserialize)]
struct ConfigJson {
    dim_a: usize,
    dim_b: usize,
    dim_s: usize,
    kraus: Vec<JsonMatrix>,
    ensemble: Vec<JsonMatrix>,
    povm: Vec<JsonMatrix>,
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    dim: usize,
    inputs: Vec<String>,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kraus: Option<BTreeMap<String, Vec<JsonMatrix>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<ConfigJson>,
}

/// Parses a channel from its JSON document and validates it.
pub fn channel_from_json(text: &str) -> Result<CcQsc> {
    channel_from_json_inner(text, true)
}

/// Parses a channel without enforcing validity, so that diagnostic commands
/// can report the residuals of a broken file instead of refusing to load it.
pub fn channel_from_json_lenient(text: &str) -> Result<CcQsc> {
    channel_from_json_inner(text, false)
}

fn channel_from_json_inner(text: &str, strict: bool) -> Result<CcQsc> {
    let parsed: ChannelJson = serde_json::from_str(text)?;
    let inputs = Alphabet::new(parsed.inputs.clone());
    let outputs = Alphabet::new(parsed.outputs.clone());
    match (parsed.kraus, parsed.config) {
        (Some(map), None) => {
            let mut family = KrausFamily::new(parsed.dim, inputs.len(), outputs.len());
            for (key, mats) in &map {
                let (xs, ys) = key.split_once(',').ok_or_else(|| Error::Format {
                    reason: format!("kraus key '{key}' is not 'x,y'"),
                })?;
                let x = inputs.index(xs.trim())?;
                let y = outputs.index(ys.trim())?;
                let ops = mats
                    .iter()
                    .map(|m| {
                        let mat = matrix_from_json(m, "kraus operator")?;
                        if mat.rows() != parsed.dim || mat.cols() != parsed.dim {
                            return Err(Error::Dimension {
                                expected: parsed.dim,
                                got: mat.rows(),
                                context: "kraus operator",
                            });
                        }
                        Ok(mat)
                    })
                    .collect::<Result<Vec<_>>>()?;
                family.set_ops(x, y, ops);
            }
            if strict {
                from_kraus(&family, inputs, outputs)
            } else {
                let transfer = crate::channels::transfer_family_from_kraus(&family);
                Ok(CcQsc::from_transfer_family_unchecked(
                    inputs,
                    outputs,
                    parsed.dim,
                    transfer,
                ))
            }
        }
        (None, Some(cfg)) => {
            let config = ChannelConfig {
                dim_a: cfg.dim_a,
                dim_b: cfg.dim_b,
                dim_s: cfg.dim_s,
                kraus: cfg
                    .kraus
                    .iter()
                    .map(|m| matrix_from_json(m, "config kraus"))
                    .collect::<Result<Vec<_>>>()?,
                ensemble: cfg
                    .ensemble
                    .iter()
                    .map(|m| matrix_from_json(m, "config ensemble"))
                    .collect::<Result<Vec<_>>>()?,
                povm: cfg
                    .povm
                    .iter()
                    .map(|m| matrix_from_json(m, "config povm"))
                    .collect::<Result<Vec<_>>>()?,
            };
            if cfg.dim_s != parsed.dim {
                return Err(Error::Dimension {
                    expected: parsed.dim,
                    got: cfg.dim_s,
                    context: "config memory dimension vs channel dim",
                });
            }
            from_config(&config, inputs, outputs)
        }
        (Some(_), Some(_)) => Err(Error::Format {
            reason: "channel file has both 'kraus' and 'config' blocks".to_string(),
        }),
        (None, None) => Err(Error::Format {
            reason: "channel file has neither 'kraus' nor 'config' block".to_string(),
        }),
    }
}

/// Serializes a channel as JSON, extracting a Kraus family per (x, y) from
/// the Choi eigendecomposition.
pub fn channel_to_json(ch: &CcQsc) -> Result<String> {
    let mut map = BTreeMap::new();
    for x in 0..ch.num_inputs() {
        for y in 0..ch.num_outputs() {
            let ops = kraus_from_choi(&ch.choi(x, y))?;
            let key = format!("{},{}", ch.inputs().symbol(x), ch.outputs().symbol(y));
            map.insert(key, ops.iter().map(matrix_to_json).collect());
        }
    }
    let doc = ChannelJson {
        dim: ch.dim(),
        inputs: ch.inputs().symbols().to_vec(),
        outputs: ch.outputs().symbols().to_vec(),
        kraus: Some(map),
        config: None,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn load_channel(path: impl AsRef<Path>) -> Result<CcQsc> {
    channel_from_json(&std::fs::read_to_string(path)?)
}

pub fn load_channel_lenient(path: impl AsRef<Path>) -> Result<CcQsc> {
    channel_from_json_lenient(&std::fs::read_to_string(path)?)
}

pub fn save_channel(ch: &CcQsc, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, channel_to_json(ch)?)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FsmcJson {
    inputs: Vec<String>,
    outputs: Vec<String>,
    states: Vec<String>,
    /// Nested `[x][s][y][s']`.
    law: Vec<Vec<Vec<Vec<f64>>>>,
}

pub fn fsmc_from_json(text: &str) -> Result<Fsmc> {
    let parsed: FsmcJson = serde_json::from_str(text)?;
    let (nx, ny, ns) = (parsed.inputs.len(), parsed.outputs.len(), parsed.states.len());
    let mut law = Vec::with_capacity(nx * ns * ny * ns);
    for x in 0..nx {
        for s in 0..ns {
            for y in 0..ny {
                for sp in 0..ns {
                    let v = parsed
                        .law
                        .get(x)
                        .and_then(|a| a.get(s))
                        .and_then(|a| a.get(y))
                        .and_then(|a| a.get(sp))
                        .copied()
                        .ok_or_else(|| Error::Format {
                            reason: format!("law tensor missing entry [{x}][{s}][{y}][{sp}]"),
                        })?;
                    law.push(v);
                }
            }
        }
    }
    Fsmc::new(parsed.inputs, parsed.outputs, parsed.states, law)
}

pub fn fsmc_to_json(f: &Fsmc) -> Result<String> {
    let (nx, ny, ns) = (f.num_inputs(), f.num_outputs(), f.num_states());
    let law: Vec<Vec<Vec<Vec<f64>>>> = (0..nx)
        .map(|x| {
            (0..ns)
                .map(|s| {
                    (0..ny)
                        .map(|y| (0..ns).map(|sp| f.law(x, s, y, sp)).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let doc = FsmcJson {
        inputs: f.input_symbols().to_vec(),
        outputs: f.output_symbols().to_vec(),
        states: f.state_symbols().to_vec(),
        law,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn load_fsmc(path: impl AsRef<Path>) -> Result<Fsmc> {
    fsmc_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_fsmc(f: &Fsmc, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, fsmc_to_json(f)?)?;
    Ok(())
}

/// Renders a trajectory as a trace file: header comments, then one
/// `input<TAB>output` symbol pair per line.
pub fn trace_to_string(traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str("# qsc-trace v1\n");
    out.push_str(&format!("# inputs: {}\n", traj.input_symbols.join(",")));
    out.push_str(&format!("# outputs: {}\n", traj.output_symbols.join(",")));
    out.push_str(&format!("# n: {}\n", traj.len()));
    out.push_str(&format!("# seed: {}\n", traj.seed));
    out.push_str(&format!("# rho0: {}\n", traj.initial_state));
    for (&x, &y) in traj.inputs.iter().zip(&traj.outputs) {
        out.push_str(&traj.input_symbols[x]);
        out.push('\t');
        out.push_str(&traj.output_symbols[y]);
        out.push('\n');
    }
    out
}

pub fn trace_from_string(text: &str) -> Result<Trajectory> {
    let mut input_symbols: Option<Vec<String>> = None;
    let mut output_symbols: Option<Vec<String>> = None;
    let mut seed = 0u64;
    let mut initial_state = "ground".to_string();
    let mut declared_n: Option<usize> = None;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("inputs:") {
                input_symbols = Some(v.trim().split(',').map(|s| s.trim().to_string()).collect());
            } else if let Some(v) = rest.strip_prefix("outputs:") {
                output_symbols = Some(v.trim().split(',').map(|s| s.trim().to_string()).collect());
            } else if let Some(v) = rest.strip_prefix("seed:") {
                seed = v.trim().parse().map_err(|_| Error::Format {
                    reason: format!("line {}: bad seed", lineno + 1),
                })?;
            } else if let Some(v) = rest.strip_prefix("rho0:") {
                initial_state = v.trim().to_string();
            } else if let Some(v) = rest.strip_prefix("n:") {
                declared_n = Some(v.trim().parse().map_err(|_| Error::Format {
                    reason: format!("line {}: bad count", lineno + 1),
                })?);
            }
            continue;
        }
        let (xs, ys) = line.split_once('\t').ok_or_else(|| Error::Format {
            reason: format!("line {}: expected 'input<TAB>output'", lineno + 1),
        })?;
        let ins = input_symbols.as_ref().ok_or_else(|| Error::Format {
            reason: "trace data before '# inputs:' header".to_string(),
        })?;
        let outs = output_symbols.as_ref().ok_or_else(|| Error::Format {
            reason: "trace data before '# outputs:' header".to_string(),
        })?;
        let x = ins
            .iter()
            .position(|s| s == xs)
            .ok_or_else(|| Error::UnknownSymbol {
                symbol: xs.to_string(),
            })?;
        let y = outs
            .iter()
            .position(|s| s == ys)
            .ok_or_else(|| Error::UnknownSymbol {
                symbol: ys.to_string(),
            })?;
        inputs.push(x);
        outputs.push(y);
    }

    if let Some(n) = declared_n {
        if n != inputs.len() {
            return Err(Error::Format {
                reason: format!("declared n = {n} but found {} pairs", inputs.len()),
            });
        }
    }
    Ok(Trajectory {
        inputs,
        outputs,
        input_symbols: input_symbols.unwrap_or_default(),
        output_symbols: output_symbols.unwrap_or_default(),
        seed,
        initial_state,
    })
}

pub fn write_trace(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, trace_to_string(traj))?;
    Ok(())
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trajectory> {
    trace_from_string(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{sample_trajectory, DensityOperator};
    use crate::qgec::{build_qgec, QgecParams};

    #[test]
    fn channel_json_round_trip_preserves_transfer_matrices() {
        let ch = build_qgec(&QgecParams::base(0.05, 0.95, 1.0)).unwrap();
        let text = channel_to_json(&ch).unwrap();
        let back = channel_from_json(&text).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let diff = ch
                    .transfer(x, y)
                    .matrix()
                    .sub(back.transfer(x, y).matrix())
                    .frobenius_norm();
                assert!(diff < 1e-10, "({x},{y}) differs by {diff}");
            }
        }
    }

    #[test]
    fn channel_json_rejects_malformed_documents() {
        assert!(channel_from_json("{}").is_err());
        assert!(channel_from_json(r#"{"dim":1,"inputs":["0"],"outputs":["0"]}"#).is_err());
    }

    #[test]
    fn fsmc_json_round_trip() {
        let f = crate::fsmc::gilbert_elliott(0.05, 0.4, 0.1, 0.2).unwrap();
        let text = fsmc_to_json(&f).unwrap();
        let back = fsmc_from_json(&text).unwrap();
        assert_eq!(back.law_tensor(), f.law_tensor());
    }

    #[test]
    fn trace_round_trip_is_lossless() {
        let ch = build_qgec(&QgecParams::base(0.05, 0.95, 1.0)).unwrap();
        let traj =
            sample_trajectory(&ch, &[0.5, 0.5], 200, &DensityOperator::ground(2), 5).unwrap();
        let text = trace_to_string(&traj);
        let back = trace_from_string(&text).unwrap();
        assert_eq!(back, traj);
        assert_eq!(trace_to_string(&back), text);
    }

    #[test]
    fn trace_rejects_inconsistent_count() {
        let text = "# inputs: 0,1\n# outputs: 0,1\n# n: 3\n0\t1\n";
        assert!(trace_from_string(text).is_err());
    }
}
