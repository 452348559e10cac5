//! Chain output: per-iteration scalars, thinned state snapshots, and
//! provenance metadata, with a plain-text on-disk layout.
//!
//! Layout of a trace directory:
//!   meta.json    — seed, shape, iteration plan, content hashes
//!   scalars.csv  — one row per post-burn-in iteration
//!   states.txt   — one snapshot per line; Z is run-length encoded

use crate::error::{Error, Result};
use crate::model::{FeatureMatrix, ModelState};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub hyperparams_hash: u64,
    pub data_hash: u64,
    pub n_snvs: usize,
    pub n_samples: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

/// Scalars recorded at every post-burn-in iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarRecord {
    pub iter: usize,
    pub c: usize,
    pub log_joint: f64,
    pub test_loglik: f64,
    /// Fraction of row proposals accepted; None on per-entry Gibbs sweeps.
    pub row_accept: Option<f64>,
    /// Fraction of theta proposals accepted this sweep.
    pub theta_accept: f64,
    pub p0_accept: bool,
    pub rj_attempted: bool,
    pub rj_accepted: bool,
}

#[derive(Debug, Clone)]
pub struct StateSnapshot {
    pub iter: usize,
    pub state: ModelState,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub meta: TraceMeta,
    pub scalars: Vec<ScalarRecord>,
    pub states: Vec<StateSnapshot>,
}

impl Trace {
    /// Iterator over sampled C values, one per post-burn-in iteration.
    pub fn c_values(&self) -> impl Iterator<Item = usize> + '_ {
        self.scalars.iter().map(|r| r.c)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&self.meta)?)?;

        let mut csv = String::from(
            "iter,c,log_joint,test_loglik,accept_row,accept_theta,accept_p0,rj_attempted,rj_accepted\n",
        );
        for r in &self.scalars {
            let row = match r.row_accept {
                Some(v) => format!("{v}"),
                None => String::new(),
            };
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                r.iter,
                r.c,
                r.log_joint,
                r.test_loglik,
                row,
                r.theta_accept,
                r.p0_accept as u8,
                r.rj_attempted as u8,
                r.rj_accepted as u8
            )
            .expect("string write");
        }
        fs::write(dir.join("scalars.csv"), csv)?;

        let mut out = String::new();
        for snap in &self.states {
            let st = &snap.state;
            let theta: Vec<String> = st.theta_raw().iter().map(|v| format!("{v}")).collect();
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                snap.iter,
                st.n_haplotypes(),
                st.p0(),
                encode_rle(st.z()),
                theta.join(",")
            )
            .expect("string write");
        }
        fs::write(dir.join("states.txt"), out)?;
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Trace> {
        let meta_path = dir.join("meta.json");
        let meta: TraceMeta = serde_json::from_slice(&fs::read(&meta_path)?)?;

        let scalars_path = dir.join("scalars.csv");
        let mut scalars = Vec::new();
        for (i, line) in fs::read_to_string(&scalars_path)?.lines().enumerate() {
            if i == 0 || line.is_empty() {
                continue;
            }
            let parse = |msg: &str| Error::Parse {
                path: scalars_path.clone(),
                line: i + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(parse("expected 9 fields"));
            }
            scalars.push(ScalarRecord {
                iter: fields[0].parse().map_err(|_| parse("bad iter"))?,
                c: fields[1].parse().map_err(|_| parse("bad c"))?,
                log_joint: fields[2].parse().map_err(|_| parse("bad log_joint"))?,
                test_loglik: fields[3].parse().map_err(|_| parse("bad test_loglik"))?,
                row_accept: if fields[4].is_empty() {
                    None
                } else {
                    Some(fields[4].parse().map_err(|_| parse("bad accept_row"))?)
                },
                theta_accept: fields[5].parse().map_err(|_| parse("bad accept_theta"))?,
                p0_accept: fields[6] == "1",
                rj_attempted: fields[7] == "1",
                rj_accepted: fields[8] == "1",
            });
        }

        let states_path = dir.join("states.txt");
        let mut states = Vec::new();
        for (i, line) in fs::read_to_string(&states_path)?.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let parse = |msg: String| Error::Parse {
                path: states_path.clone(),
                line: i + 1,
                msg,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(parse("expected 5 tab-separated fields".into()));
            }
            let iter: usize = fields[0]
                .parse()
                .map_err(|_| parse("bad iteration index".into()))?;
            let c: usize = fields[1].parse().map_err(|_| parse("bad c".into()))?;
            let p0: f64 = fields[2].parse().map_err(|_| parse("bad p0".into()))?;
            let z = decode_rle(fields[3], meta.n_snvs, c).map_err(|e| parse(e.to_string()))?;
            let theta: std::result::Result<Vec<f64>, _> =
                fields[4].split(',').map(|v| v.parse::<f64>()).collect();
            let theta = theta.map_err(|_| parse("bad theta values".into()))?;
            let state = ModelState::new(z, theta, meta.n_samples, p0)
                .map_err(|e| parse(e.to_string()))?;
            states.push(StateSnapshot { iter, state });
        }

        Ok(Trace {
            meta,
            scalars,
            states,
        })
    }
}

/// Run-length encoding of the row-major bit sequence: `count`x`bit` tokens.
pub fn encode_rle(z: &FeatureMatrix) -> String {
    let mut out = String::new();
    let mut run_bit = z.get(0, 0);
    let mut run_len = 0usize;
    for s in 0..z.n_rows() {
        for c in 0..z.n_cols() {
            let b = z.get(s, c);
            if b == run_bit {
                run_len += 1;
            } else {
                write!(out, "{}x{} ", run_len, run_bit as u8).expect("string write");
                run_bit = b;
                run_len = 1;
            }
        }
    }
    write!(out, "{}x{}", run_len, run_bit as u8).expect("string write");
    out
}

pub fn decode_rle(text: &str, s: usize, c: usize) -> Result<FeatureMatrix> {
    let mut z = FeatureMatrix::zeros(s, c);
    let mut pos = 0usize;
    let total = s * c;
    for token in text.split_whitespace() {
        let (len, bit) = token
            .split_once('x')
            .ok_or_else(|| Error::validation(format!("bad RLE token {token}")))?;
        let len: usize = len
            .parse()
            .map_err(|_| Error::validation(format!("bad RLE length in {token}")))?;
        let value = match bit {
            "0" => false,
            "1" => true,
            _ => return Err(Error::validation(format!("bad RLE bit in {token}"))),
        };
        for _ in 0..len {
            if pos >= total {
                return Err(Error::validation("RLE longer than matrix"));
            }
            z.set(pos / c, pos % c, value);
            pos += 1;
        }
    }
    if pos != total {
        return Err(Error::validation(format!(
            "RLE covered {pos} of {total} cells"
        )));
    }
    Ok(z)
}
