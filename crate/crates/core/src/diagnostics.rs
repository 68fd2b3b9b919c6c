//! Convergence diagnostics: split-R̂ and effective sample size.
//!
//! R̂ is reported as the maximum of the classic split-R̂ on the raw draws and
//! the rank-normalized bulk and folded split-R̂ values. The classic value
//! reacts to location shifts in proportion to their size; the rank-normalized
//! ones are robust to heavy tails and catch scale differences.
//!
//! ESS uses the multi-chain autocorrelation estimate truncated by Geyer's
//! initial positive sequence, with monotone pair sums.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::hmc::Chain;

pub const RHAT_THRESHOLD: f64 = 1.01;
pub const MIN_ESS: f64 = 100.0;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Classic split-R̂. `None` when undefined (too short, or zero variance).
pub fn split_rhat_classic(chains: &[&[f64]]) -> Option<f64> {
    let n = chains.iter().map(|c| c.len()).min()?;
    if n < 4 {
        return None;
    }
    let half = n / 2;
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        halves.push(&c[..half]);
        halves.push(&c[n - half..n]);
    }
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().zip(&means).map(|(h, &m)| sample_var(h, m)).sum::<f64>()
        / halves.len() as f64;
    let b_over_n = sample_var(&means, mean(&means));
    if !(w > 0.0) || !w.is_finite() {
        return None;
    }
    let nh = half as f64;
    let var_plus = (nh - 1.0) / nh * w + b_over_n;
    Some((var_plus / w).sqrt())
}

/// Replace draws by normal scores of their pooled fractional ranks.
fn rank_normalize(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut pooled: Vec<(f64, usize, usize)> = Vec::new();
    for (c, chain) in chains.iter().enumerate() {
        for (i, &v) in chain.iter().enumerate() {
            pooled.push((v, c, i));
        }
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = pooled.len() as f64;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let z = normal.inverse_cdf((rank - 0.375) / (s + 0.25));
        for p in &pooled[i..=j] {
            out[p.1][p.2] = z;
        }
        i = j + 1;
    }
    out
}

fn median(x: &mut [f64]) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

/// Conservative split-R̂: max of classic, rank-normalized bulk and folded values.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    let classic = split_rhat_classic(chains)?;
    let bulk_z = rank_normalize(chains);
    let bulk_refs: Vec<&[f64]> = bulk_z.iter().map(|c| c.as_slice()).collect();
    let bulk = split_rhat_classic(&bulk_refs)?;

    let mut pooled: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let med = median(&mut pooled);
    let folded: Vec<Vec<f64>> =
        chains.iter().map(|c| c.iter().map(|v| (v - med).abs()).collect()).collect();
    let folded_refs: Vec<&[f64]> = folded.iter().map(|c| c.as_slice()).collect();
    let folded_z = rank_normalize(&folded_refs);
    let folded_z_refs: Vec<&[f64]> = folded_z.iter().map(|c| c.as_slice()).collect();
    let tail = split_rhat_classic(&folded_z_refs).unwrap_or(1.0);
    Some(classic.max(bulk).max(tail))
}

fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64
}

/// Effective sample size across chains. `None` for constant or too-short input.
pub fn ess(chains: &[&[f64]]) -> Option<f64> {
    let n = chains.iter().map(|c| c.len()).min()?;
    if n < 4 {
        return None;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let m = chains.len();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let acov0: Vec<f64> = chains.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, 0)).collect();
    let nf = n as f64;
    let w = acov0.iter().map(|a| a * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let b_over_n = if m > 1 { sample_var(&means, mean(&means)) } else { 0.0 };
    let var_plus = w * (nf - 1.0) / nf + b_over_n;
    if !(var_plus > 0.0) || !var_plus.is_finite() {
        return None;
    }
    let rho = |t: usize| -> f64 {
        let mean_acov = if t == 0 {
            acov0.iter().sum::<f64>() / m as f64
        } else {
            chains.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, t)).sum::<f64>() / m as f64
        };
        1.0 - (w - mean_acov) / var_plus
    };

    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let mut pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        if pair > prev_pair {
            pair = prev_pair;
        }
        sum_pairs += pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / (m as f64 * nf).log10().max(1.0));
    let total = m as f64 * nf;
    Some((total / tau).min(total * total.log10().max(1.0)))
}

/// Per-coordinate diagnostics over a set of chains, with warning flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub chains: usize,
    /// Multi-chain split-R̂ per coordinate; `None` if unavailable or undefined.
    pub split_rhat: Vec<Option<f64>>,
    pub ess: Vec<Option<f64>>,
    pub divergences: usize,
    pub accept_rate: f64,
    pub flags: Vec<String>,
}

impl DiagnosticReport {
    pub fn ok(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Split-R̂, ESS and flags (R̂ > 1.01, any divergence, ESS < 100).
pub fn diagnostics(chains: &[Chain]) -> Result<DiagnosticReport> {
    let first = chains.first().ok_or_else(|| Error::Empty("no chains".into()))?;
    let p = first.dim();
    if chains.iter().any(|c| c.dim() != p || c.draws.is_empty()) {
        return Err(Error::InvalidArgument("chains must be nonempty with equal dimension".into()));
    }
    let mut flags = Vec::new();
    let columns: Vec<Vec<Vec<f64>>> =
        chains.iter().map(|c| (0..p).map(|k| c.column(k)).collect()).collect();

    let mut split = Vec::with_capacity(p);
    let mut ess_out = Vec::with_capacity(p);
    for k in 0..p {
        let refs: Vec<&[f64]> = columns.iter().map(|c| c[k].as_slice()).collect();
        let r = if chains.len() >= 2 { split_rhat(&refs) } else { None };
        match r {
            Some(v) if v > RHAT_THRESHOLD => flags.push(format!("split-Rhat {v:.4} > {RHAT_THRESHOLD} for coordinate {k}")),
            None if chains.len() >= 2 => flags.push(format!("split-Rhat undefined for coordinate {k}")),
            _ => {}
        }
        split.push(r);
        let e = ess(&refs);
        match e {
            Some(v) if v < MIN_ESS => flags.push(format!("ESS {v:.1} < {MIN_ESS} for coordinate {k}")),
            None => flags.push(format!("ESS undefined for coordinate {k}")),
            _ => {}
        }
        ess_out.push(e);
    }
    if chains.len() < 2 {
        flags.push("split-Rhat unavailable with a single chain".into());
    }
    let divergences: usize = chains.iter().map(|c| c.divergences).sum();
    if divergences > 0 {
        flags.push(format!("{divergences} divergent transitions"));
    }
    let accept_rate = chains.iter().map(|c| c.accept_rate).sum::<f64>() / chains.len() as f64;
    Ok(DiagnosticReport {
        chains: chains.len(),
        split_rhat: split,
        ess: ess_out,
        divergences,
        accept_rate,
        flags,
    })
}
