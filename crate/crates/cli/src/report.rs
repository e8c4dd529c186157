use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Human,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub version: &'static str,
    pub inputs: Value,
    pub results: Value,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str, inputs: Value, results: Value, warnings: Vec<String>) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            inputs,
            results,
            warnings,
        }
    }

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        Ok(match format {
            Format::Json => serde_json::to_string_pretty(self)? + "\n",
            Format::Human => {
                let mut out = format!("{} (noninf {})\n", self.command, self.version);
                flatten("", &self.results, &mut out);
                for w in &self.warnings {
                    out.push_str(&format!("warning: {w}\n"));
                }
                out
            }
        })
    }
}

/// Three significant figures; scientific notation below 1e-4.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if x.abs() < 1e-4 || mag >= 6 {
        format!("{x:.2e}")
    } else {
        format!("{:.*}", (2 - mag).max(0) as usize, x)
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        Value::Number(n) => {
            let text = match (n.as_u64(), n.as_i64(), n.as_f64()) {
                (Some(u), _, _) => u.to_string(),
                (_, Some(i), _) => i.to_string(),
                (_, _, Some(f)) => sig3(f),
                _ => n.to_string(),
            };
            out.push_str(&format!("{prefix}: {text}\n"));
        }
        Value::String(s) => out.push_str(&format!("{prefix}: {s}\n")),
        Value::Bool(b) => out.push_str(&format!("{prefix}: {b}\n")),
        Value::Null => out.push_str(&format!("{prefix}: -\n")),
    }
}

#[cfg(test)]
mod tests {
    use super::sig3;

    #[test]
    fn three_significant_figures() {
        assert_eq!(sig3(1.1337e-9), "1.13e-9");
        assert_eq!(sig3(0.60996), "0.610");
        assert_eq!(sig3(0.49442), "0.494");
        assert_eq!(sig3(12.345), "12.3");
        assert_eq!(sig3(4580.0), "4580");
        assert_eq!(sig3(0.000216), "0.000216");
        assert_eq!(sig3(-0.5), "-0.500");
    }
}
