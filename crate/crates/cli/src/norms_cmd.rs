//! `norms`: one lattice norm of a grid function read from JSON or CSV.

use std::path::{Path, PathBuf};

use clap::Args;
use kplane::lattice::{norm_report, ExponentDescriptor, LatticeSpace};
use kplane::GridFunction;
use serde::{Deserialize, Serialize};

use crate::run::{read_json, usage, CliError, CliResult, Outcome, Run};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormsConfig {
    pub space: String,
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct NormsArgs {
    /// lp:P, lorentz:P,Q (Q may be inf), morrey:P,P0, sum:P, varexp:const:P,
    /// varexp:log:P0,PINF or varexp:<exponent.json>.
    #[arg(long)]
    pub space: Option<String>,
    /// Grid function as JSON, or CSV with coordinate columns then `value`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

/// Parses a space, reading `varexp:<file>.json` from disk.
pub fn parse_space(text: &str) -> CliResult<LatticeSpace> {
    if let Some(rest) = text.strip_prefix("varexp:") {
        if rest.ends_with(".json") {
            let exponent: ExponentDescriptor = read_json(Path::new(rest))?;
            let space = LatticeSpace::VarExp { exponent };
            space.validate()?;
            return Ok(space);
        }
    }
    Ok(text.parse::<LatticeSpace>()?)
}

/// Reads a grid from JSON or, for `.csv` files, from cell-centre rows.
pub fn read_grid(path: &Path) -> CliResult<GridFunction> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let g = if is_csv {
        read_grid_csv(path)?
    } else {
        read_json::<GridFunction>(path)?
    };
    g.validate()?;
    Ok(g)
}

fn read_grid_csv(path: &Path) -> CliResult<GridFunction> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |msg: String| CliError::Usage(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.len() < 2 || &header[header.len() - 1] != "value" {
        return Err(bad("expected coordinate columns followed by `value`".into()));
    }
    let n = header.len() - 1;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let nums: Result<Vec<f64>, _> = rec.iter().map(|c| c.trim().parse::<f64>()).collect();
        rows.push(nums.map_err(|e| bad(format!("non-numeric cell: {e}")))?);
    }
    if rows.is_empty() {
        return Err(bad("no data rows".into()));
    }

    // each axis must carry equally spaced centres
    let mut axes = Vec::with_capacity(n);
    for a in 0..n {
        let mut xs: Vec<f64> = rows.iter().map(|r| r[a]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let h = if xs.len() > 1 { xs[1] - xs[0] } else { 1.0 };
        let uniform = xs
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
        if !uniform {
            return Err(bad(format!("axis {a} is not uniformly spaced")));
        }
        axes.push((xs[0], h, xs.len()));
    }
    let cells: Vec<usize> = axes.iter().map(|a| a.2).collect();
    let total: usize = cells.iter().product();
    if rows.len() != total {
        return Err(bad(format!(
            "expected {total} rows for a full grid, got {}",
            rows.len()
        )));
    }
    let center = axes
        .iter()
        .map(|(lo, h, m)| lo + h * (*m as f64 - 1.0) / 2.0)
        .collect();
    let half_width = axes.iter().map(|(_, h, m)| h * *m as f64 / 2.0).collect();
    let mut g = GridFunction::new(center, half_width, cells, vec![0.0; total])?;
    let mut seen = vec![false; total];
    for r in &rows {
        let idx: Vec<usize> = axes
            .iter()
            .enumerate()
            .map(|(a, (lo, h, _))| ((r[a] - lo) / h).round() as usize)
            .collect();
        let i = g.linear_index(&idx);
        if std::mem::replace(&mut seen[i], true) {
            return Err(bad("duplicate cell".into()));
        }
        g.values_mut()[i] = r[n];
    }
    Ok(g)
}

pub fn norms(run: &mut Run, args: &NormsArgs, config: Option<&Path>) -> CliResult<Outcome> {
    let cfg = match config {
        Some(p) => Some(read_json::<NormsConfig>(p)?),
        None => None,
    };
    let space = args
        .space
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.space.clone()));
    let input = args
        .input
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.input.clone()));
    let (Some(space), Some(input)) = (space, input) else {
        return usage("give --space and --input, or a --config naming both");
    };
    let resolved = NormsConfig { space, input };
    run.config = serde_json::to_value(&resolved).expect("serializable config");

    let parsed = parse_space(&resolved.space)?;
    let grid = read_grid(&resolved.input)?;
    let report = norm_report(&grid, &parsed)?;
    run.write_json("norms.json", &report)?;
    Ok(Outcome {
        passed: true,
        summary: serde_json::to_value(&report).expect("serializable report"),
    })
}
