//! SNR grid parsing: `a:b:n` (linear), `a:b:nlog` (log-spaced) or an
//! explicit comma list. Grids must be strictly increasing and nonnegative.

use anyhow::{bail, Context, Result};

pub fn parse(spec: &str) -> Result<Vec<f64>> {
    let grid = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!("grid `{spec}` must be a:b:n or a:b:nlog");
        }
        let a: f64 = parts[0].parse().context("bad grid start")?;
        let b: f64 = parts[1].parse().context("bad grid end")?;
        let (n_str, log) = match parts[2].strip_suffix("log") {
            Some(n) => (n, true),
            None => (parts[2], false),
        };
        let n: usize = n_str.parse().context("bad grid count")?;
        if n < 2 {
            bail!("grid needs at least 2 points, got {n}");
        }
        if log {
            if a <= 0.0 {
                bail!("log grid start must be positive, got {a}");
            }
            let (la, lb) = (a.ln(), b.ln());
            (0..n)
                .map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp())
                .collect()
        } else {
            (0..n)
                .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                .collect()
        }
    } else {
        let parsed: std::result::Result<Vec<f64>, _> =
            spec.split(',').map(|t| t.trim().parse::<f64>()).collect();
        parsed.with_context(|| format!("bad grid list `{spec}`"))?
    };
    if grid.is_empty() {
        bail!("empty snr grid");
    }
    if grid.iter().any(|&s| !s.is_finite() || s < 0.0) {
        bail!("snr grid must be nonnegative and finite");
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        bail!("snr grid must be strictly increasing");
    }
    Ok(grid)
}

pub fn db(snr: f64) -> f64 {
    10.0 * snr.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_and_log_grids() {
        let g = parse("0:10:3").unwrap();
        assert_eq!(g, vec![0.0, 5.0, 10.0]);
        let g = parse("0.01:100:5log").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[0] - 0.01).abs() < 1e-12);
        assert!((g[4] - 100.0).abs() < 1e-9);
        assert!((g[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn comma_list() {
        assert_eq!(parse("0.1, 1, 4").unwrap(), vec![0.1, 1.0, 4.0]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(parse("").is_err());
        assert!(parse("5:1:3").is_err()); // decreasing
        assert!(parse("-1:1:3").is_err()); // negative
        assert!(parse("0:1:1").is_err()); // too few
        assert!(parse("0:100:5log").is_err()); // log from zero
        assert!(parse("1,1,2").is_err()); // not strictly increasing
    }
}
