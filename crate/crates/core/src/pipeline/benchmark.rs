//! Wall-clock cost of inserting `N` frames into one key-frame gap.

use std::fmt::Write as _;
use std::time::Instant;

use super::dataset::Dataset;
use super::interpolate::{gate_params, insertion_times, interpolate_pair, InterpolationConfig, Method};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    pub ns: Vec<usize>,
    pub methods: Vec<Method>,
    /// Timed runs per cell; the median is reported.
    pub runs: usize,
    /// Untimed runs per method before measuring.
    pub warmup: usize,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self { ns: vec![1, 3, 10, 20], methods: Method::ALL.to_vec(), runs: 5, warmup: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub method: Method,
    pub n: usize,
    pub total_ms: f64,
    pub per_frame_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub environment: String,
}

impl BenchmarkReport {
    pub fn get(&self, method: Method, n: usize) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.method == method && r.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,N,total_ms,per_frame_ms\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.3},{:.3}", r.method, r.n, r.total_ms, r.per_frame_ms);
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("# {}\n{:<15}{:>6}{:>14}{:>16}\n", self.environment, "method", "N", "total [ms]", "per frame [ms]");
        for r in &self.rows {
            let _ = writeln!(s, "{:<15}{:>6}{:>14.2}{:>16.2}", r.method.to_string(), r.n, r.total_ms, r.per_frame_ms);
        }
        s
    }
}

/// Times the full insertion (estimation, warping, fusion) of `N` frames
/// between the first two frames of `ds`, median over `runs`.
pub fn benchmark_timing(ds: &Dataset, opts: &BenchmarkOptions, cfg: &InterpolationConfig) -> Result<BenchmarkReport> {
    if ds.frames.len() < 2 {
        return Err(Error::invalid("benchmark needs at least two frames"));
    }
    if opts.runs == 0 || opts.ns.contains(&0) {
        return Err(Error::invalid("benchmark needs at least one run and N >= 1"));
    }
    let params = gate_params(ds, cfg)?;
    let events = ds.aligned_events();
    let (i0, i1) = (&ds.frames[0], &ds.frames[1]);
    let mut rows = Vec::new();
    for &method in &opts.methods {
        let cfg = InterpolationConfig { method, ..cfg.clone() };
        for _ in 0..opts.warmup {
            interpolate_pair(i0, i1, &events, &insertion_times(1), &cfg, params.as_ref())?;
        }
        for &n in &opts.ns {
            let times = insertion_times(n);
            let mut samples = Vec::with_capacity(opts.runs);
            for _ in 0..opts.runs {
                let start = Instant::now();
                let out = interpolate_pair(i0, i1, &events, &times, &cfg, params.as_ref())?;
                samples.push(start.elapsed().as_secs_f64() * 1e3);
                std::hint::black_box(out);
            }
            let total_ms = median(&mut samples);
            rows.push(BenchmarkRow { method, n, total_ms, per_frame_ms: total_ms / n as f64 });
        }
    }
    let (h, w) = i0.dims();
    let environment = format!(
        "{w}x{h}x{} frames, {} events in gap, {} threads, {}-{}, {} runs (median), {} warm-up",
        i0.channels(),
        events.window(i0.t(), i1.t()).len(),
        rayon::current_num_threads(),
        std::env::consts::OS,
        std::env::consts::ARCH,
        opts.runs,
        opts.warmup
    );
    Ok(BenchmarkReport { rows, environment })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
