//! File formats: long-form TSV counts, flat key=value run configuration,
//! and the CSV/JSON summary outputs.

use crate::data::CountData;
use crate::error::{Error, Result};
use crate::model::Hyperparams;
use crate::summary::FitSummary;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Read counts from a long-form TSV with header
/// `snv_id<TAB>sample_id<TAB>n<TAB>N`, one row per (SNV, sample) cell.
/// SNV and sample orderings follow first appearance; every cell must be
/// present exactly once.
pub fn read_counts(path: &Path) -> Result<CountData> {
    let text = fs::read_to_string(path)?;
    let mut snv_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut sample_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut snv_ids: Vec<String> = Vec::new();
    let mut sample_ids: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), (u32, u32)> = BTreeMap::new();

    let err_at = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) => {
            let cols: Vec<&str> = header.split('\t').collect();
            if cols != ["snv_id", "sample_id", "n", "N"] {
                return Err(err_at(
                    1,
                    format!("expected header snv_id\\tsample_id\\tn\\tN, got {header:?}"),
                ));
            }
        }
        None => return Err(err_at(1, "empty file".into())),
    }

    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(err_at(
                line_no,
                format!("expected 4 tab-separated fields, got {}", fields.len()),
            ));
        }
        let n: u32 = fields[2]
            .parse()
            .map_err(|_| err_at(line_no, format!("bad variant count {:?}", fields[2])))?;
        let total: u32 = fields[3]
            .parse()
            .map_err(|_| err_at(line_no, format!("bad total count {:?}", fields[3])))?;
        if n > total {
            return Err(err_at(
                line_no,
                format!(
                    "variant reads exceed total reads for snv {} sample {}: {n} > {total}",
                    fields[0], fields[1]
                ),
            ));
        }
        let s = *snv_index.entry(fields[0].to_string()).or_insert_with(|| {
            snv_ids.push(fields[0].to_string());
            snv_ids.len() - 1
        });
        let t = *sample_index.entry(fields[1].to_string()).or_insert_with(|| {
            sample_ids.push(fields[1].to_string());
            sample_ids.len() - 1
        });
        if cells.insert((s, t), (n, total)).is_some() {
            return Err(err_at(
                line_no,
                format!("duplicate cell for snv {} sample {}", fields[0], fields[1]),
            ));
        }
    }

    let (s_count, t_count) = (snv_ids.len(), sample_ids.len());
    if s_count == 0 || t_count == 0 {
        return Err(Error::validation("file contains no data rows"));
    }
    let mut n = vec![0u32; s_count * t_count];
    let mut total = vec![0u32; s_count * t_count];
    for s in 0..s_count {
        for t in 0..t_count {
            match cells.get(&(s, t)) {
                Some(&(v, m)) => {
                    n[s * t_count + t] = v;
                    total[s * t_count + t] = m;
                }
                None => {
                    return Err(Error::validation(format!(
                        "missing cell for snv {} sample {}; the model has no \
                         missing-data mechanism",
                        snv_ids[s], sample_ids[t]
                    )))
                }
            }
        }
    }
    CountData::new(s_count, t_count, n, total, snv_ids, sample_ids)
}

/// Write counts in the same TSV format `read_counts` accepts.
pub fn write_counts(data: &CountData, path: &Path) -> Result<()> {
    let mut out = String::from("snv_id\tsample_id\tn\tN\n");
    for s in 0..data.n_snvs() {
        for t in 0..data.n_samples() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                data.snv_ids()[s],
                data.sample_ids()[t],
                data.n(s, t),
                data.total(s, t)
            )
            .expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Run configuration: data location, output directory, model and sampler
/// settings, and the number of independent chains.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub hp: Hyperparams,
    pub chains: usize,
}

impl RunConfig {
    pub fn new(hp: Hyperparams) -> Self {
        RunConfig {
            data_path: None,
            output_dir: PathBuf::from("."),
            hp,
            chains: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::argument("chains must be at least 1"));
        }
        if let Some(p) = &self.data_path {
            if !p.exists() {
                return Err(Error::validation(format!(
                    "data file {} does not exist",
                    p.display()
                )));
            }
        }
        self.hp.validate()
    }

    /// Apply `key = value` settings from a flat config file. Nested blocks
    /// use dotted keys (`hyperparams.alpha`, `mcmc.iterations`); `#` starts
    /// a comment. Command-line flags are applied after this and win.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err_at = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err_at("expected key = value".into()))?;
            let key = key.trim();
            let value = value.trim();
            self.apply_kv(key, value)
                .map_err(|e| err_at(e.to_string()))?;
        }
        Ok(())
    }

    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::argument(format!("bad {what} value {value:?}"));
        let as_f64 = || value.parse::<f64>().map_err(|_| bad("numeric"));
        let as_usize = || value.parse::<usize>().map_err(|_| bad("integer"));
        let as_u64 = || value.parse::<u64>().map_err(|_| bad("integer"));
        match key {
            "data_path" => self.data_path = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "chains" => self.chains = as_usize()?,
            "hyperparams.r" => self.hp.r = as_f64()?,
            "hyperparams.alpha" => self.hp.alpha = as_f64()?,
            "hyperparams.a" => self.hp.a = as_f64()?,
            "hyperparams.a0" => self.hp.a0 = as_f64()?,
            "hyperparams.a00" => self.hp.a00 = as_f64()?,
            "hyperparams.b00" => self.hp.b00 = as_f64()?,
            "hyperparams.c_max" => self.hp.c_max = as_usize()?,
            "mcmc.iterations" => self.hp.mcmc.iterations = as_usize()?,
            "mcmc.burn_in" => self.hp.mcmc.burn_in = as_usize()?,
            "mcmc.thin" => self.hp.mcmc.thin = as_usize()?,
            "mcmc.theta_step" => self.hp.mcmc.theta_step = as_f64()?,
            "mcmc.p0_step" => self.hp.mcmc.p0_step = as_f64()?,
            "mcmc.row_flip_prob" => self.hp.mcmc.row_flip_prob = as_f64()?,
            "mcmc.rj_inner_iters" => self.hp.mcmc.rj_inner_iters = as_usize()?,
            "mcmc.rj_prob" => self.hp.mcmc.rj_prob = as_f64()?,
            "mcmc.train_shape1" => self.hp.mcmc.train_shape1 = as_f64()?,
            "mcmc.train_shape2" => self.hp.mcmc.train_shape2 = as_f64()?,
            "mcmc.init_c" => self.hp.mcmc.init_c = as_usize()?,
            "mcmc.seed" => self.hp.mcmc.seed = as_u64()?,
            other => return Err(Error::argument(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }
}

/// Write the summary files: posterior_C.csv, Z_star.csv, w_star.csv and
/// fit.json. The background column of w_star.csv reports w_t0·p0_star, the
/// effective background contribution to each cell.
pub fn write_summary(
    summary: &FitSummary,
    snv_ids: &[String],
    sample_ids: &[String],
    dir: &Path,
) -> Result<()> {
    if snv_ids.len() != summary.z_star.n_rows() || sample_ids.len() != summary.w_star.n_samples()
    {
        return Err(Error::dimension("id vectors do not match summary shape"));
    }
    fs::create_dir_all(dir)?;

    let mut out = String::from("C,probability\n");
    for (c, p) in &summary.posterior_c {
        writeln!(out, "{c},{p}").expect("string write");
    }
    fs::write(dir.join("posterior_C.csv"), out)?;

    let c_star = summary.c_star;
    let mut out = String::from("snv_id");
    for c in 1..=c_star {
        write!(out, ",h{c}").expect("string write");
    }
    out.push('\n');
    for (s, id) in snv_ids.iter().enumerate() {
        write!(out, "{id}").expect("string write");
        for c in 0..c_star {
            write!(out, ",{}", summary.z_star.get(s, c) as u8).expect("string write");
        }
        out.push('\n');
    }
    fs::write(dir.join("Z_star.csv"), out)?;

    let mut out = String::from("sample_id,background");
    for c in 1..=c_star {
        write!(out, ",h{c}").expect("string write");
    }
    out.push('\n');
    for (t, id) in sample_ids.iter().enumerate() {
        write!(out, "{id},{}", summary.w_star.get(t, 0) * summary.p0_star)
            .expect("string write");
        for c in 1..=c_star {
            write!(out, ",{}", summary.w_star.get(t, c)).expect("string write");
        }
        out.push('\n');
    }
    fs::write(dir.join("w_star.csv"), out)?;

    let fit = serde_json::json!({
        "c_star": summary.c_star,
        "p0_star": summary.p0_star,
        "alignment_cost": summary.alignment_cost,
        "posterior_c": summary.posterior_c,
        "n_snvs": snv_ids.len(),
        "n_samples": sample_ids.len(),
    });
    fs::write(dir.join("fit.json"), serde_json::to_vec_pretty(&fit)?)?;
    Ok(())
}

/// Read back a CSV written by this crate: returns (header fields, rows).
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::validation(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}
