//! Plain-text model files.
//!
//! Key-value lines, `#` comments, keys case-sensitive:
//!
//! ```text
//! # two-user scalar BPSK MAC at snr 1
//! n_r = 1
//! n_t = 1
//! snr = 1.0
//! c1 = bpsk              # bpsk | qpsk | explicit
//! c2 = bpsk
//! h1 = 1,0               # row-major "re,im" entries; rows split by ';'
//! p1 = 1,0
//! seed = 1               # optional Monte Carlo settings
//! samples = 200000
//! batch = 4096
//! alphabet_cap = 4096    # optional joint-alphabet cap
//! ```
//!
//! Named constellations are per-dimension and raised to the `n_t`-fold
//! product automatically. Explicit constellations use
//! `cK_points = re,im re,im ; ...` (one point per `;`-separated row, one
//! `re,im` entry per dimension), optional `cK_priors = p1 p2 ...` (default
//! uniform) and `cK_normalized = true|false` (default false) to enforce the
//! unit-covariance check. Channel and precoder matrices default to identity.
//!
//! Every parse error carries its 1-based line number.

use crate::model::{Constellation, MacModel, McConfig, UserLink, DEFAULT_ALPHABET_CAP};
use crate::{CMat, CVec, Error, Result, C64};
use std::collections::BTreeMap;

/// A parsed model file: the model plus its Monte Carlo settings.
#[derive(Debug, Clone)]
pub struct ParsedModel {
    pub model: MacModel,
    pub mc: McConfig,
}

/// Parses the key-value model format from a string.
pub fn parse_model_str(text: &str) -> Result<ParsedModel> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim().to_string();
        if entries.contains_key(&key) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("duplicate key `{key}`"),
            });
        }
        entries.insert(key, (line_no, value.trim().to_string()));
    }

    let get = |k: &str| entries.get(k);
    let required_usize = |k: &str| -> Result<usize> {
        let (line, v) = get(k).ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("missing required key `{k}`"),
        })?;
        v.parse().map_err(|_| Error::Parse {
            line: *line,
            msg: format!("`{k}` must be a positive integer, got `{v}`"),
        })
    };
    let opt_f64 = |k: &str| -> Result<Option<f64>> {
        match get(k) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Parse {
                line: *line,
                msg: format!("`{k}` must be a number, got `{v}`"),
            }),
        }
    };

    let n_r = required_usize("n_r")?;
    let n_t = required_usize("n_t")?;
    let snr = opt_f64("snr")?.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "missing required key `snr`".into(),
    })?;

    let parse_matrix =
        |k: &str, rows: usize, cols: usize, default_identity: bool| -> Result<CMat> {
            match get(k) {
                None if default_identity => Ok(CMat::identity(rows, cols)),
                None => Err(Error::Parse {
                    line: 0,
                    msg: format!("missing required key `{k}`"),
                }),
                Some((line, v)) => {
                    let m = parse_cmat(v, *line)?;
                    if m.nrows() != rows || m.ncols() != cols {
                        return Err(Error::Parse {
                            line: *line,
                            msg: format!(
                                "`{k}` must be {rows}x{cols}, got {}x{}",
                                m.nrows(),
                                m.ncols()
                            ),
                        });
                    }
                    Ok(m)
                }
            }
        };

    let h1 = parse_matrix("h1", n_r, n_t, true)?;
    let p1 = parse_matrix("p1", n_t, n_t, true)?;
    let h2 = parse_matrix("h2", n_r, n_t, true)?;
    let p2 = parse_matrix("p2", n_t, n_t, true)?;

    let c1 = parse_constellation("c1", &entries, n_t)?;
    let c2 = parse_constellation("c2", &entries, n_t)?;

    let cap = match get("alphabet_cap") {
        None => DEFAULT_ALPHABET_CAP,
        Some((line, v)) => v.parse().map_err(|_| Error::Parse {
            line: *line,
            msg: format!("`alphabet_cap` must be a positive integer, got `{v}`"),
        })?,
    };

    let link1 = UserLink::new(h1, p1)?;
    let link2 = UserLink::new(h2, p2)?;
    let model = MacModel::with_alphabet_cap(link1, link2, c1, c2, snr, cap)?;

    let mut mc = McConfig::default();
    if let Some((line, v)) = get("seed") {
        mc.seed = v.parse().map_err(|_| Error::Parse {
            line: *line,
            msg: format!("`seed` must be a 64-bit integer, got `{v}`"),
        })?;
    }
    if let Some((line, v)) = get("samples") {
        mc.samples = v.parse().map_err(|_| Error::Parse {
            line: *line,
            msg: format!("`samples` must be a positive integer, got `{v}`"),
        })?;
    }
    if let Some((line, v)) = get("batch") {
        mc.batch = v.parse().map_err(|_| Error::Parse {
            line: *line,
            msg: format!("`batch` must be a positive integer, got `{v}`"),
        })?;
    }
    mc.validate()?;

    Ok(ParsedModel { model, mc })
}

/// Parses a model file from disk.
pub fn parse_model_file(path: &std::path::Path) -> Result<ParsedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_model_str(&text)
}

fn parse_constellation(
    key: &str,
    entries: &BTreeMap<String, (usize, String)>,
    n_t: usize,
) -> Result<Constellation> {
    let kind = entries
        .get(key)
        .map(|(l, v)| (*l, v.as_str()))
        .unwrap_or((0, "bpsk"));
    match kind.1 {
        "bpsk" => Constellation::product_power(&Constellation::bpsk(), n_t),
        "qpsk" => Constellation::product_power(&Constellation::qpsk(), n_t),
        "explicit" => {
            let points_key = format!("{key}_points");
            let (pline, ptext) = entries.get(&points_key).ok_or_else(|| Error::Parse {
                line: kind.0,
                msg: format!("`{key} = explicit` requires `{points_key}`"),
            })?;
            let mat = parse_cmat(ptext, *pline)?;
            if mat.ncols() != n_t {
                return Err(Error::Parse {
                    line: *pline,
                    msg: format!(
                        "`{points_key}` rows must have {n_t} entries, got {}",
                        mat.ncols()
                    ),
                });
            }
            let points: Vec<CVec> = (0..mat.nrows())
                .map(|r| CVec::from_fn(n_t, |c, _| mat[(r, c)]))
                .collect();
            let priors = match entries.get(&format!("{key}_priors")) {
                None => vec![1.0 / points.len() as f64; points.len()],
                Some((line, v)) => {
                    let parsed: std::result::Result<Vec<f64>, _> =
                        v.split_whitespace().map(str::parse).collect();
                    parsed.map_err(|_| Error::Parse {
                        line: *line,
                        msg: format!("`{key}_priors` must be numbers, got `{v}`"),
                    })?
                }
            };
            let normalized = match entries.get(&format!("{key}_normalized")) {
                None => false,
                Some((line, v)) => v.parse().map_err(|_| Error::Parse {
                    line: *line,
                    msg: format!("`{key}_normalized` must be true or false, got `{v}`"),
                })?,
            };
            Constellation::new(points, priors, normalized)
        }
        other => Err(Error::Parse {
            line: kind.0,
            msg: format!("`{key}` must be bpsk, qpsk or explicit, got `{other}`"),
        }),
    }
}

/// Row-major complex matrix: rows split by `;`, entries by whitespace, each
/// entry `re,im` (a bare real is accepted as `re,0`).
fn parse_cmat(text: &str, line: usize) -> Result<CMat> {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for row_text in text.split(';') {
        let mut row = Vec::new();
        for tok in row_text.split_whitespace() {
            let z = match tok.split_once(',') {
                Some((re, im)) => {
                    let re: f64 = re.parse().map_err(|_| bad_entry(line, tok))?;
                    let im: f64 = im.parse().map_err(|_| bad_entry(line, tok))?;
                    C64::new(re, im)
                }
                None => C64::new(tok.parse().map_err(|_| bad_entry(line, tok))?, 0.0),
            };
            row.push(z);
        }
        if !row.is_empty() {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line,
            msg: "empty matrix".into(),
        });
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse {
            line,
            msg: "ragged matrix rows".into(),
        });
    }
    Ok(CMat::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

fn bad_entry(line: usize, tok: &str) -> Error {
    Error::Parse {
        line,
        msg: format!("bad complex entry `{tok}` (expected `re,im`)"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalar_bpsk_mac() {
        let text = "\
# comment line
n_r = 1
n_t = 1
snr = 2.5
c1 = bpsk
c2 = bpsk
seed = 9
samples = 1000
";
        let p = parse_model_str(text).unwrap();
        assert_eq!(p.model.n_r(), 1);
        assert_eq!(p.model.snr(), 2.5);
        assert_eq!(p.model.joint_len(), 4);
        assert_eq!(p.mc.seed, 9);
        assert_eq!(p.mc.samples, 1000);
        assert_eq!(p.mc.batch, McConfig::default().batch);
    }

    #[test]
    fn parses_matrices_and_qpsk() {
        let text = "\
n_r = 2
n_t = 2
snr = 1.0
c1 = qpsk
c2 = qpsk
h1 = 1,0 0,0 ; 0,0 1,0
p1 = 0.5,0 0,0 ; 0,0 0.5,0.1
h2 = 0.9,0.1 0,0 ; 0,0 0.8,0
";
        let p = parse_model_str(text).unwrap();
        assert_eq!(p.model.c1.len(), 16);
        assert_eq!(p.model.link1.p()[(1, 1)], C64::new(0.5, 0.1));
        // p2 defaults to identity
        assert_eq!(p.model.link2.p()[(0, 0)], C64::new(1.0, 0.0));
    }

    #[test]
    fn explicit_constellation() {
        let text = "\
n_r = 1
n_t = 1
snr = 0.5
c1 = explicit
c1_points = 1,0 ; -1,0
c1_normalized = true
c2 = bpsk
";
        let p = parse_model_str(text).unwrap();
        assert_eq!(p.model.c1.len(), 2);
        assert!(p.model.c1.is_normalized());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "n_r = 1\nn_t = 1\nsnr = 1.0\nh1 = 1,0 oops\n";
        match parse_model_str(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("oops"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = "n_r = 1\nnot a key value line\n";
        match parse_model_str(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = "\
n_r = 1
n_t = 1
snr = 1.0
h1 = 1,0 0,0 ; 0,0 1,0
";
        assert!(matches!(
            parse_model_str(text),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn unknown_constellation_name_is_rejected() {
        let text = "n_r = 1\nn_t = 1\nsnr = 1.0\nc1 = octagon\n";
        match parse_model_str(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("octagon"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
