//! Parameter sweeps: one config variant per value of a dotted key.
//!
//! Keys start with `meta`, `component.<name>`, `link.<index>` or
//! `traffic.<index>`, followed by field names or array indices, for
//! example `component.hbm.extra_latency` or `traffic.0.len.1`.

use toml::Value;

use crate::config::TopologyConfig;
use crate::error::HarnessError;

/// Splits `KEY=V1,V2,...`, keeping commas inside brackets.
pub fn parse_param(s: &str) -> Result<(String, Vec<String>), HarnessError> {
    let (key, vals) = s
        .split_once('=')
        .ok_or_else(|| HarnessError::config("--param", "expected KEY=V1,V2,..."))?;
    let mut out = Vec::new();
    let (mut depth, mut cur) = (0i32, String::new());
    for ch in vals.chars() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    out.push(cur);
    if key.is_empty() || out.iter().any(|v| v.trim().is_empty()) {
        return Err(HarnessError::config("--param", "empty key or value"));
    }
    Ok((key.trim().to_string(), out.into_iter().map(|v| v.trim().to_string()).collect()))
}

/// A TOML literal, or a bare string if it does not parse as one.
fn literal(v: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("x = {v}"))
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| Value::String(v.to_string()))
}

fn set(doc: &mut Value, key: &str, v: Value) -> Result<(), HarnessError> {
    let err = |m: &str| HarnessError::config(key, m.to_string());
    let mut parts = key.split('.');
    let head = parts.next().unwrap_or_default();
    let mut node = match head {
        "meta" => doc
            .as_table_mut()
            .unwrap()
            .entry("meta")
            .or_insert_with(|| Value::Table(Default::default())),
        "component" | "link" | "traffic" => {
            let sel = parts.next().ok_or_else(|| err("missing selector"))?;
            let list = doc
                .get_mut(head)
                .and_then(Value::as_array_mut)
                .ok_or_else(|| err("no such section"))?;
            let found = if head == "component" {
                list.iter_mut().find(|c| c.get("name").and_then(Value::as_str) == Some(sel))
            } else {
                sel.parse::<usize>().ok().and_then(|i| list.get_mut(i))
            };
            found.ok_or_else(|| err("no such entry"))?
        }
        _ => return Err(err("key must start with meta, component, link or traffic")),
    };
    let rest: Vec<&str> = parts.collect();
    let (last, path) = rest.split_last().ok_or_else(|| err("missing field"))?;
    for p in path {
        node = match node {
            Value::Table(t) => t.get_mut(*p),
            Value::Array(a) => p.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| err("no such field"))?;
    }
    match node {
        Value::Table(t) => {
            t.insert(last.to_string(), v);
        }
        Value::Array(a) => {
            let slot = last
                .parse::<usize>()
                .ok()
                .and_then(|i| a.get_mut(i))
                .ok_or_else(|| err("index out of range"))?;
            *slot = v;
        }
        _ => return Err(err("not a table or array")),
    }
    Ok(())
}

/// One validated config per value.
pub fn variants(text: &str, param: &str) -> Result<Vec<(String, TopologyConfig)>, HarnessError> {
    let (key, vals) = parse_param(param)?;
    let base: Value = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
    vals.into_iter()
        .map(|v| {
            let mut doc = base.clone();
            set(&mut doc, &key, literal(&v))?;
            let cfg: TopologyConfig = doc
                .try_into()
                .map_err(|e: toml::de::Error| HarnessError::config(&key, e.to_string()))?;
            Ok((v, cfg))
        })
        .collect()
}
