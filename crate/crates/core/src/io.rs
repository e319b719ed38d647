//! Instance files (JSON) in; trajectories, surfaces and hill-climb traces
//! (CSV) out.
//!
//! Instance schema:
//!
//! ```json
//! { "name": "optional", "n": 100, "m": 3,
//!   "T": [[0.001, 0.003, 0.0004], [0.03, 0.001, 0.005], [0.03, 0.008, 0.003]],
//!   "r": [1, 1, 1], "weights": [1, 1, 1] }
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::format::fmt12;
use crate::linalg::{DenseMatrix, DenseVector};
use crate::model::{ModelInstance, SimulationResult};
use crate::optimizer::{OptimizationTrace, SurfaceRecord};
use crate::scalar::Scalar;

const KNOWN_KEYS: [&str; 6] = ["name", "n", "m", "T", "r", "weights"];

pub fn load_instance(path: impl AsRef<Path>) -> Result<ModelInstance<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_instance(&text)
}

pub fn parse_instance(text: &str) -> Result<ModelInstance<f64>> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| Error::parse("$", format!("malformed JSON: {e}")))?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::parse("$", "instance must be a JSON object"))?;

    let unknown: Vec<&str> = obj
        .keys()
        .map(String::as_str)
        .filter(|k| !KNOWN_KEYS.contains(k))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::parse("$", format!("unknown keys: {}", unknown.join(", "))));
    }

    let n = count_field(obj, "n")?;
    let m = count_field(obj, "m")?;

    let t_rows = array_field(obj, "T")?
        .ok_or_else(|| Error::parse("T", "missing field"))?;
    if t_rows.len() != m {
        return Err(Error::parse(
            "T",
            format!("expected {m}x{m} matrix (m = {m}), got {} rows", t_rows.len()),
        ));
    }
    let mut t = Vec::with_capacity(m * m);
    for (i, row) in t_rows.iter().enumerate() {
        let row_path = format!("T[{i}]");
        let row = row
            .as_array()
            .ok_or_else(|| Error::parse(&row_path, "expected an array"))?;
        if row.len() != m {
            return Err(Error::parse(
                &row_path,
                format!("expected {m}x{m} matrix (m = {m}), row has {} entries", row.len()),
            ));
        }
        for (j, v) in row.iter().enumerate() {
            t.push(nonnegative(v, &format!("T[{i}][{j}]"))?);
        }
    }

    let r = vector_field(obj, "r", m)?.ok_or_else(|| Error::parse("r", "missing field"))?;
    let weights = vector_field(obj, "weights", m)?;
    if let Some(w) = &weights {
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::parse("weights", "weights must not all be zero"));
        }
    }
    let name = match obj.get("name") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(Error::parse("name", "expected a string")),
    };

    let invalid = |e: Error| Error::parse("$", e.to_string());
    let inst = ModelInstance::new(
        n,
        DenseMatrix::new(m, m, t).map_err(invalid)?,
        DenseVector::new(r).map_err(invalid)?,
        weights.map(DenseVector::new).transpose().map_err(invalid)?,
    )
    .map_err(invalid)?;
    Ok(match name {
        Some(name) => inst.with_name(name),
        None => inst,
    })
}

fn count_field(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    let v = obj.get(key).ok_or_else(|| Error::parse(key, "missing field"))?;
    let n = v
        .as_u64()
        .ok_or_else(|| Error::parse(key, format!("expected a nonnegative integer, got {v}")))?;
    if n == 0 {
        return Err(Error::parse(key, "must be at least 1"));
    }
    usize::try_from(n).map_err(|_| Error::parse(key, "too large"))
}

fn array_field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<Option<&'a Vec<Value>>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Array(a)) => Ok(Some(a)),
        Some(_) => Err(Error::parse(key, "expected an array")),
    }
}

fn vector_field(obj: &Map<String, Value>, key: &str, m: usize) -> Result<Option<Vec<f64>>> {
    let Some(items) = array_field(obj, key)? else {
        return Ok(None);
    };
    if items.len() != m {
        return Err(Error::parse(
            key,
            format!("expected {m} entries (m = {m}), got {}", items.len()),
        ));
    }
    items
        .iter()
        .enumerate()
        .map(|(i, v)| nonnegative(v, &format!("{key}[{i}]")))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn nonnegative(v: &Value, path: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| Error::parse(path, format!("expected a number, got {v}")))?;
    if !x.is_finite() {
        return Err(Error::parse(path, "must be finite"));
    }
    if x < 0.0 {
        return Err(Error::parse(path, format!("must be nonnegative, got {x}")));
    }
    Ok(x)
}

/// Serializes an instance in the schema read by [`parse_instance`].
pub fn instance_to_json<S: Scalar>(inst: &ModelInstance<S>) -> String {
    let num = |x: S| Value::from(x.as_f64());
    let mut obj = Map::new();
    if let Some(name) = inst.name() {
        obj.insert("name".into(), Value::from(name));
    }
    obj.insert("n".into(), Value::from(inst.n()));
    obj.insert("m".into(), Value::from(inst.m()));
    obj.insert(
        "T".into(),
        Value::Array(
            inst.triggering()
                .to_rows()
                .into_iter()
                .map(|row| Value::Array(row.into_iter().map(num).collect()))
                .collect(),
        ),
    );
    obj.insert(
        "r".into(),
        Value::Array(inst.internal().as_slice().iter().map(|&x| num(x)).collect()),
    );
    if let Some(w) = inst.weights() {
        obj.insert(
            "weights".into(),
            Value::Array(w.as_slice().iter().map(|&x| num(x)).collect()),
        );
    }
    serde_json::to_string_pretty(&Value::Object(obj)).expect("JSON values serialize")
}

pub fn write_instance<S: Scalar>(inst: &ModelInstance<S>, path: impl AsRef<Path>) -> Result<()> {
    with_file(path.as_ref(), |w| {
        w.write_all(instance_to_json(inst).as_bytes())?;
        w.write_all(b"\n")
    })
}

fn with_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Header `t,k_1,…,k_m,cumulative_total`, one row per step, then a
/// `# total,…` line with the per-category cumulative knowledge.
pub fn write_trajectory<S: Scalar>(result: &SimulationResult<S>, w: &mut dyn Write) -> std::io::Result<()> {
    let m = result.cumulative.len();
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("k_{i}")));
    header.push("cumulative_total".into());
    writeln!(w, "{}", header.join(","))?;

    let mut running = 0.0;
    for (t, k) in &result.per_step {
        let mut row = vec![t.to_string()];
        for &x in k.as_slice() {
            running += x.as_f64();
            row.push(fmt12(x.as_f64()));
        }
        row.push(fmt12(running));
        writeln!(w, "{}", row.join(","))?;
    }

    let mut summary = vec!["# total".to_string()];
    summary.extend(result.cumulative.as_slice().iter().map(|x| fmt12(x.as_f64())));
    summary.push(fmt12(result.cumulative.total().as_f64()));
    writeln!(w, "{}", summary.join(","))
}

pub fn write_trajectory_csv<S: Scalar>(result: &SimulationResult<S>, path: impl AsRef<Path>) -> Result<()> {
    with_file(path.as_ref(), |w| write_trajectory(result, w))
}

/// Header `n1,n2,n3,objective,rho,feasible`; infeasible rows leave
/// `objective` empty.
pub fn write_surface<S: Scalar>(records: &[SurfaceRecord<S>], w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "n1,n2,n3,objective,rho,feasible")?;
    for rec in records {
        let objective = rec.objective.map(|x| fmt12(x.as_f64())).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            rec.n1,
            rec.n2,
            rec.n3,
            objective,
            fmt12(rec.rho.as_f64()),
            rec.objective.is_some()
        )?;
    }
    Ok(())
}

pub fn write_surface_csv<S: Scalar>(records: &[SurfaceRecord<S>], path: impl AsRef<Path>) -> Result<()> {
    with_file(path.as_ref(), |w| write_surface(records, w))
}

/// Header `iter,n1,…,nm,objective,rho`.
pub fn write_trace<S: Scalar>(trace: &OptimizationTrace<S>, m: usize, w: &mut dyn Write) -> std::io::Result<()> {
    let mut header = vec!["iter".to_string()];
    header.extend((1..=m).map(|i| format!("n{i}")));
    header.push("objective".into());
    header.push("rho".into());
    writeln!(w, "{}", header.join(","))?;
    for step in &trace.steps {
        let mut row = vec![step.iteration.to_string()];
        row.extend(step.distribution.counts().iter().map(usize::to_string));
        row.push(fmt12(step.objective.as_f64()));
        row.push(fmt12(step.rho.as_f64()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_trace_csv<S: Scalar>(trace: &OptimizationTrace<S>, m: usize, path: impl AsRef<Path>) -> Result<()> {
    with_file(path.as_ref(), |w| write_trace(trace, m, w))
}
