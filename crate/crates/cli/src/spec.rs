//! Channel argument parsing: a channel argument is either a path to a channel
//! JSON file or an inline preset spec:
//!
//! - `bsc:0.1` or `bsc:p=0.1` — memoryless binary symmetric channel;
//! - `gec:pg=0.05,pb=0.4,tgb=0.1,tbg=0.1` — embedded Gilbert–Elliott channel;
//! - `qgec:pg=0.05,pb=0.95,alpha=1` (add `,variant` for the two-qubit-memory
//!   variant) — quantum Gilbert–Elliott channel with the default Hamiltonian.

use qsc_core::{
    build_qgec, embed_fsmc, gilbert_elliott, io, qgec::QgecParams, CcQsc, Error, Result,
};

fn parse_fields(body: &str) -> Result<Vec<(String, String)>> {
    let mut fields = Vec::new();
    for part in body.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        match part.split_once('=') {
            Some((k, v)) => fields.push((k.trim().to_string(), v.trim().to_string())),
            None => fields.push((part.to_string(), String::new())),
        }
    }
    Ok(fields)
}

fn field_f64(fields: &[(String, String)], key: &str, default: Option<f64>) -> Result<f64> {
    for (k, v) in fields {
        if k == key {
            return v.parse().map_err(|_| Error::Format {
                reason: format!("cannot parse '{v}' for '{key}'"),
            });
        }
    }
    default.ok_or_else(|| Error::Format {
        reason: format!("missing field '{key}' in channel spec"),
    })
}

fn has_flag(fields: &[(String, String)], key: &str) -> bool {
    fields.iter().any(|(k, v)| k == key && (v.is_empty() || v == "true"))
}

fn build_preset(kind: &str, body: &str) -> Result<CcQsc> {
    let fields = parse_fields(body)?;
    match kind {
        "bsc" => {
            let p = if fields.len() == 1 && fields[0].1.is_empty() {
                fields[0].0.parse().map_err(|_| Error::Format {
                    reason: format!("cannot parse '{body}' as a crossover probability"),
                })?
            } else {
                field_f64(&fields, "p", None)?
            };
            qsc_core::bsc_channel(p)
        }
        "gec" => {
            let f = gilbert_elliott(
                field_f64(&fields, "pg", None)?,
                field_f64(&fields, "pb", None)?,
                field_f64(&fields, "tgb", Some(0.1))?,
                field_f64(&fields, "tbg", Some(0.1))?,
            )?;
            embed_fsmc(&f)
        }
        "qgec" => {
            let pg = field_f64(&fields, "pg", Some(0.05))?;
            let pb = field_f64(&fields, "pb", Some(0.95))?;
            let alpha = field_f64(&fields, "alpha", Some(1.0))?;
            let params = if has_flag(&fields, "variant") {
                QgecParams::variant(pg, pb, alpha)
            } else {
                QgecParams::base(pg, pb, alpha)
            };
            build_qgec(&params)
        }
        other => Err(Error::Format {
            reason: format!("unknown channel preset '{other}'"),
        }),
    }
}

fn split_preset(spec: &str) -> Option<(&str, &str)> {
    let (kind, body) = spec.split_once(':')?;
    matches!(kind, "bsc" | "gec" | "qgec").then_some((kind, body))
}

/// Resolves a channel argument: preset spec or JSON file path.
pub fn load_channel_spec(spec: &str) -> Result<CcQsc> {
    match split_preset(spec) {
        Some((kind, body)) => build_preset(kind, body),
        None => io::load_channel(spec),
    }
}

/// As `load_channel_spec`, but file channels skip validity enforcement so
/// that diagnostics can report residuals.
pub fn load_channel_spec_lenient(spec: &str) -> Result<CcQsc> {
    match split_preset(spec) {
        Some((kind, body)) => build_preset(kind, body),
        None => io::load_channel_lenient(spec),
    }
}

/// True when the path names an existing trace file.
pub fn is_trace_file(path: &str) -> bool {
    std::fs::read_to_string(path)
        .map(|text| text.starts_with("# qsc-trace"))
        .unwrap_or(false)
}
