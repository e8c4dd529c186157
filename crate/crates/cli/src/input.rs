use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context};
use noninf::model_fit::GroupSummary;

/// A headed CSV held in memory. `-` reads standard input.
pub struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let mut text = String::new();
        if path.as_os_str() == "-" {
            std::io::stdin().read_to_string(&mut text).context("reading standard input")?;
        } else {
            text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        }
        if text.trim().is_empty() {
            bail!("input {} is empty", path.display());
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader.headers()?.iter().map(str::to_owned).collect();
        let rows = reader
            .records()
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("parsing {}", path.display()))?;
        if rows.is_empty() {
            bail!("input {} has a header but no data rows", path.display());
        }
        Ok(Self { headers, rows })
    }

    fn index(&self, name: &str) -> anyhow::Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("no column named {name:?} (have: {})", self.headers.join(", ")))
    }

    /// Row numbers are 1-based data rows (the header is not counted).
    fn cells<'a>(&'a self, name: &str) -> anyhow::Result<Vec<&'a str>> {
        let i = self.index(name)?;
        let cells: Vec<&str> = self.rows.iter().map(|r| r.get(i).unwrap_or("")).collect();
        let missing: Vec<String> = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_empty() || c.eq_ignore_ascii_case("na"))
            .map(|(row, _)| (row + 1).to_string())
            .collect();
        if !missing.is_empty() {
            bail!("column {name:?} has missing values in rows {}", missing.join(", "));
        }
        Ok(cells)
    }

    pub fn numeric(&self, name: &str) -> anyhow::Result<Vec<f64>> {
        let cells = self.cells(name)?;
        let mut out = Vec::with_capacity(cells.len());
        let mut bad = Vec::new();
        for (row, c) in cells.iter().enumerate() {
            match c.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => bad.push(format!("{} ({c:?})", row + 1)),
            }
        }
        if !bad.is_empty() {
            bail!("column {name:?} is not numeric in rows {}", bad.join(", "));
        }
        Ok(out)
    }

    /// Splits `y` by the levels of `group`, in order of first appearance.
    pub fn grouped(&self, y: &str, group: &str) -> anyhow::Result<(Vec<String>, Vec<Vec<f64>>)> {
        let values = self.numeric(y)?;
        let labels = self.cells(group)?;
        let mut levels: Vec<String> = Vec::new();
        let mut groups: Vec<Vec<f64>> = Vec::new();
        for (v, label) in values.into_iter().zip(labels) {
            match levels.iter().position(|l| l == label) {
                Some(i) => groups[i].push(v),
                None => {
                    levels.push(label.to_owned());
                    groups.push(vec![v]);
                }
            }
        }
        if levels.len() < 2 {
            bail!("group column {group:?} needs at least 2 levels, found {}", levels.len());
        }
        Ok((levels, groups))
    }
}

/// Parses `"n,mean,sd;n,mean,sd;..."`.
pub fn parse_summaries(text: &str) -> anyhow::Result<Vec<GroupSummary>> {
    let groups = text
        .split(';')
        .map(str::trim)
        .filter(|g| !g.is_empty())
        .enumerate()
        .map(|(i, g)| {
            let parts: Vec<&str> = g.split(',').map(str::trim).collect();
            let [n, mean, sd] = parts[..] else {
                bail!("group {}: expected n,mean,sd but got {g:?}", i + 1);
            };
            let n: usize = n.parse().with_context(|| format!("group {}: bad n {n:?}", i + 1))?;
            let mean: f64 = mean.parse().with_context(|| format!("group {}: bad mean {mean:?}", i + 1))?;
            let sd: f64 = sd.parse().with_context(|| format!("group {}: bad sd {sd:?}", i + 1))?;
            Ok(GroupSummary::new(n, mean, sd)?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if groups.len() < 2 {
        bail!("--summaries needs at least two groups");
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::parse_summaries;

    #[test]
    fn summaries_parse() {
        let g = parse_summaries("10,1.5,2; 12,-0.5,1.25;").unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[1].n, 12);
        assert!(parse_summaries("10,1.5").is_err());
        assert!(parse_summaries("10,1,1").is_err());
        assert!(parse_summaries("x,1,1;3,2,1").is_err());
    }
}
