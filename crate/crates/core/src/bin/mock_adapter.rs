//! Minimal generator process speaking the external-source protocol, used by
//! the integration tests and as a reference for adapter authors.
//!
//! Usage: mock_adapter [--model echo|toy-ar] [--phi F] [--noise F] [--dims N]
//!        [--context N] [--delay-ms N] [--exit-after N]
//!        [--fault garbage|wrong-id|short|error]

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::time::Duration;

use serde_json::{json, Value};
use tscorrect::RandomStream;

#[derive(Default)]
struct Options {
    model: String,
    phi: f64,
    noise: f64,
    dims: Option<u64>,
    context: Option<u64>,
    delay_ms: u64,
    exit_after: Option<u64>,
    fault: Option<String>,
}

fn parse_args() -> Result<Options, String> {
    let mut o = Options {
        model: "toy-ar".into(),
        phi: 0.5,
        noise: 0.1,
        ..Default::default()
    };
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let mut value = || args.next().ok_or_else(|| format!("{flag} needs a value"));
        let num = |v: String| v.parse::<f64>().map_err(|e| format!("{flag}: {e}"));
        let int = |v: String| v.parse::<u64>().map_err(|e| format!("{flag}: {e}"));
        match flag.as_str() {
            "--model" => o.model = value()?,
            "--phi" => o.phi = num(value()?)?,
            "--noise" => o.noise = num(value()?)?,
            "--dims" => o.dims = Some(int(value()?)?),
            "--context" => o.context = Some(int(value()?)?),
            "--delay-ms" => o.delay_ms = int(value()?)?,
            "--exit-after" => o.exit_after = Some(int(value()?)?),
            "--fault" => o.fault = Some(value()?),
            other => return Err(format!("unknown flag {other}")),
        }
    }
    if o.model != "echo" && o.model != "toy-ar" {
        return Err(format!("unknown model {}", o.model));
    }
    Ok(o)
}

fn propose(o: &Options, context: &[Vec<f64>], seed: u64) -> Vec<f64> {
    let last = context.last().cloned().unwrap_or_default();
    match o.model.as_str() {
        "echo" => last,
        _ => {
            let mut rng = RandomStream::new(seed);
            last.iter().map(|x| o.phi * x + o.noise * rng.standard_normal()).collect()
        }
    }
}

fn parse_context(msg: &Value) -> Option<Vec<Vec<f64>>> {
    msg.get("context")?
        .as_array()?
        .iter()
        .map(|row| row.as_array()?.iter().map(Value::as_f64).collect())
        .collect()
}

fn emit(out: &mut impl Write, msg: &Value) -> io::Result<()> {
    writeln!(out, "{msg}")?;
    out.flush()
}

fn main() -> ExitCode {
    let o = match parse_args() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("mock_adapter: {e}");
            return ExitCode::from(2);
        }
    };
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut served = 0u64;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let msg: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                let _ = emit(&mut out, &json!({"type": "error", "message": e.to_string()}));
                continue;
            }
        };
        let reply = match msg.get("type").and_then(Value::as_str) {
            Some("hello") => json!({
                "type": "ready",
                "version": 1,
                "dims": o.dims.or(msg.get("dims").and_then(Value::as_u64)),
                "context_len": o.context.or(msg.get("context_len").and_then(Value::as_u64)),
            }),
            Some("propose") => {
                if o.exit_after == Some(served) {
                    eprintln!("mock_adapter: exiting after {served} proposals");
                    return ExitCode::from(1);
                }
                served += 1;
                if o.delay_ms > 0 {
                    std::thread::sleep(Duration::from_millis(o.delay_ms));
                }
                let id = msg.get("id").and_then(Value::as_u64);
                match (parse_context(&msg), msg.get("seed").and_then(Value::as_u64), id) {
                    (Some(ctx), Some(seed), Some(id)) => {
                        let mut value = propose(&o, &ctx, seed);
                        match o.fault.as_deref() {
                            Some("garbage") => {
                                let _ = writeln!(out, "not json");
                                let _ = out.flush();
                                continue;
                            }
                            Some("wrong-id") => json!({"type": "proposal", "id": id + 1, "value": value}),
                            Some("short") => {
                                value.pop();
                                json!({"type": "proposal", "id": id, "value": value})
                            }
                            Some("error") => json!({"type": "error", "id": id, "message": "model failure"}),
                            _ => json!({"type": "proposal", "id": id, "value": value}),
                        }
                    }
                    _ => json!({"type": "error", "id": id, "message": "malformed propose request"}),
                }
            }
            Some("shutdown") => return ExitCode::SUCCESS,
            _ => json!({"type": "error", "message": format!("unexpected message: {line}")}),
        };
        if emit(&mut out, &reply).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
