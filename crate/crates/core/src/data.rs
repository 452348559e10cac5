//! Observed read-count data.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Variant (`n`) and total (`total`) read counts for S SNVs across T samples.
///
/// Matrices are stored row-major with SNVs as rows. Row and column identity
/// is carried alongside so that outputs can be labeled the same way the input
/// was.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountData {
    s: usize,
    t: usize,
    n: Vec<u32>,
    total: Vec<u32>,
    snv_ids: Vec<String>,
    sample_ids: Vec<String>,
}

impl CountData {
    pub fn new(
        s: usize,
        t: usize,
        n: Vec<u32>,
        total: Vec<u32>,
        snv_ids: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        if s == 0 || t == 0 {
            return Err(Error::validation("need at least one SNV and one sample"));
        }
        if n.len() != s * t || total.len() != s * t {
            return Err(Error::dimension(format!(
                "count matrices must be {s}x{t} = {} cells, got n={} total={}",
                s * t,
                n.len(),
                total.len()
            )));
        }
        if snv_ids.len() != s || sample_ids.len() != t {
            return Err(Error::dimension("id vectors must match matrix shape"));
        }
        let data = CountData {
            s,
            t,
            n,
            total,
            snv_ids,
            sample_ids,
        };
        for s_i in 0..s {
            for t_i in 0..t {
                let (n_st, total_st) = (data.n(s_i, t_i), data.total(s_i, t_i));
                if n_st > total_st {
                    return Err(Error::validation(format!(
                        "variant reads exceed total reads at snv {} sample {}: {} > {}",
                        data.snv_ids[s_i], data.sample_ids[t_i], n_st, total_st
                    )));
                }
            }
        }
        Ok(data)
    }

    /// Build from row-major matrices with generated ids `snv_1.. / sample_1..`.
    pub fn from_matrices(s: usize, t: usize, n: Vec<u32>, total: Vec<u32>) -> Result<Self> {
        let snv_ids = (1..=s).map(|i| format!("snv_{i}")).collect();
        let sample_ids = (1..=t).map(|i| format!("sample_{i}")).collect();
        CountData::new(s, t, n, total, snv_ids, sample_ids)
    }

    pub fn n_snvs(&self) -> usize {
        self.s
    }

    pub fn n_samples(&self) -> usize {
        self.t
    }

    #[inline]
    pub fn n(&self, s: usize, t: usize) -> u32 {
        self.n[s * self.t + t]
    }

    #[inline]
    pub fn total(&self, s: usize, t: usize) -> u32 {
        self.total[s * self.t + t]
    }

    pub fn snv_ids(&self) -> &[String] {
        &self.snv_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    /// Mean variant allele fraction of SNV `s` across samples with coverage.
    pub fn mean_vaf(&self, s: usize) -> f64 {
        let mut acc = 0.0;
        let mut covered = 0usize;
        for t in 0..self.t {
            let total = self.total(s, t);
            if total > 0 {
                acc += self.n(s, t) as f64 / total as f64;
                covered += 1;
            }
        }
        if covered == 0 {
            0.0
        } else {
            acc / covered as f64
        }
    }

    /// Stable 64-bit FNV-1a hash of the full contents, recorded in traces so
    /// a summary can refuse to mix traces from different data sets.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_usize(self.s);
        h.write_usize(self.t);
        for &v in &self.n {
            h.write_u32(v);
        }
        for &v in &self.total {
            h.write_u32(v);
        }
        h.finish()
    }
}

pub(crate) struct Fnv(u64);

impl Fnv {
    pub fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }

    pub fn write_byte(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(0x100000001b3);
    }

    pub fn write_u32(&mut self, v: u32) {
        for b in v.to_le_bytes() {
            self.write_byte(b);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.write_byte(b);
        }
    }

    pub fn write_usize(&mut self, v: usize) {
        self.write_u64(v as u64);
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}
