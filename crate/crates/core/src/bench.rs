//! Experiment harness: the orthogonal-regime and impossible-regime tables,
//! CSV output, a JSON-lines manifest and an SVG plot of solve times.
//!
//! Every cell gets its own seed, derived from the master seed and the
//! cell's size parameters, so cells can be run in any order or in parallel
//! and still produce the same accuracy columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelModel, SupportRounding, DEFAULT_GROSS_MAGNITUDE};
use crate::codec;
use crate::lp::SolverOptions;
use crate::matgen::{self, CodeKey, Regime};
use crate::pipeline::{self, Variant};
use crate::rproj::JllParams;
use crate::seeds::{self, tag};

/// The passage the experiments encode, stored as Latin-1.
pub const BUNDLED_CORPUS: &[u8] = include_bytes!("../data/aeneid.txt");

pub const TABLE1_SIZES: [usize; 6] = [80, 128, 216, 248, 320, 408];
pub const TABLE2_CELLS: [(usize, f64); 5] = [(328, 0.3), (328, 0.4), (328, 0.5), (328, 0.8), (1896, 0.3)];

pub const CSV_HEADER: [&str; 13] = [
    "regime",
    "d_or_m",
    "n",
    "variant",
    "mu_err",
    "cpu_seconds",
    "lp_status",
    "seed",
    "k",
    "epsilon",
    "alpha",
    "C",
    "trial_index",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("a plot needs at least two sizes, got {0}")]
    InsufficientData(usize),
    #[error("corpus has {available} characters, a message needs {needed}")]
    CorpusTooShort { needed: usize, available: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub regime: Regime,
    /// Message bits `d` for the orthogonal table.
    pub sizes: Vec<usize>,
    /// `(m, Δ′)` pairs for the impossible table.
    pub cells: Vec<(usize, f64)>,
    pub redundancy: f64,
    pub delta: f64,
    /// Channel error rate for the impossible table; `None` reuses `Δ′`.
    pub channel_delta: Option<f64>,
    pub jll: JllParams,
    pub gross_magnitude: f64,
    pub rounding: SupportRounding,
    pub trials_per_cell: usize,
    pub master_seed: u64,
    /// `None` selects the bundled passage.
    pub corpus_path: Option<PathBuf>,
    /// Worker threads; 0 means all available.
    pub jobs: usize,
    pub solver: SolverOptions,
}

impl ExperimentConfig {
    pub fn table1(master_seed: u64) -> Self {
        Self {
            regime: Regime::Orthogonal,
            sizes: TABLE1_SIZES.to_vec(),
            cells: Vec::new(),
            redundancy: 4.0,
            delta: 0.08,
            channel_delta: None,
            jll: JllParams::default(),
            gross_magnitude: DEFAULT_GROSS_MAGNITUDE,
            rounding: SupportRounding::Round,
            trials_per_cell: 1,
            master_seed,
            corpus_path: None,
            jobs: 0,
            solver: SolverOptions::default(),
        }
    }

    pub fn table2(master_seed: u64) -> Self {
        Self {
            regime: Regime::Impossible,
            sizes: Vec::new(),
            cells: TABLE2_CELLS.to_vec(),
            trials_per_cell: 2,
            ..Self::table1(master_seed)
        }
    }

    pub fn corpus_text(&self) -> Result<String> {
        let bytes = match &self.corpus_path {
            Some(p) => std::fs::read(p)?,
            None => BUNDLED_CORPUS.to_vec(),
        };
        Ok(codec::latin1_to_string(&bytes))
    }

    fn validate(&self, regime: Regime) -> Result<()> {
        if self.regime != regime {
            return Err(BenchError::InvalidConfig(format!(
                "configuration is for the {} regime",
                self.regime
            )));
        }
        if self.trials_per_cell == 0 {
            return Err(BenchError::InvalidConfig("trials_per_cell must be at least 1".into()));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| BenchError::InvalidConfig(e.to_string()))
    }
}

/// One decode of one trial. Optional fields are blank in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub regime: Regime,
    pub d_or_m: usize,
    pub n: usize,
    pub variant: Variant,
    pub mu_err: Option<usize>,
    pub cpu_seconds: Option<f64>,
    pub lp_status: String,
    pub seed: u64,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(rename = "C")]
    pub jll_constant: Option<f64>,
    pub trial_index: usize,
    #[serde(skip)]
    pub decoded_text: Option<String>,
}

/// First `chars` characters of the corpus.
fn message(corpus: &str, chars: usize) -> Result<String> {
    let available = corpus.chars().count();
    if available < chars {
        return Err(BenchError::CorpusTooShort { needed: chars, available });
    }
    Ok(corpus.chars().take(chars).collect())
}

struct Trial<'a> {
    key: std::result::Result<&'a CodeKey, String>,
    d_or_m: usize,
    n: usize,
    text: &'a str,
    delta: f64,
    seed: u64,
    trial_index: usize,
}

/// Both variants see the same corrupted codeword.
fn run_trial(cfg: &ExperimentConfig, t: &Trial) -> Vec<BenchRow> {
    let base = |variant: Variant| BenchRow {
        regime: cfg.regime,
        d_or_m: t.d_or_m,
        n: t.n,
        variant,
        mu_err: None,
        cpu_seconds: None,
        lp_status: String::new(),
        seed: t.seed,
        k: None,
        epsilon: None,
        alpha: None,
        jll_constant: None,
        trial_index: t.trial_index,
        decoded_text: None,
    };
    [Variant::Original, Variant::Projected]
        .into_iter()
        .map(|variant| {
            let mut row = base(variant);
            let key = match &t.key {
                Ok(k) => *k,
                Err(e) => {
                    row.lp_status = format!("error: {e}");
                    return row;
                }
            };
            let outcome = (|| {
                let mut channel = ChannelModel::new(t.delta, cfg.gross_magnitude, seeds::derive_seed(t.seed, &[tag::CHANNEL]))
                    .map_err(|e| e.to_string())?
                    .with_rounding(cfg.rounding);
                let projector = match variant {
                    Variant::Original => None,
                    Variant::Projected => Some(
                        pipeline::projector_for_key(key, &cfg.jll, seeds::derive_seed(t.seed, &[tag::PROJECTOR]))
                            .map_err(|e| e.to_string())?,
                    ),
                };
                pipeline::roundtrip_trial(key, t.text, &mut channel, projector.as_ref(), &cfg.solver).map_err(|e| e.to_string())
            })();
            match outcome {
                Ok(report) => {
                    row.mu_err = report.char_errors;
                    row.cpu_seconds = Some(report.solve_seconds);
                    row.lp_status = report.lp_status.to_string();
                    if let Some(meta) = report.projector_meta {
                        row.k = Some(meta.k);
                        row.epsilon = meta.epsilon;
                        row.alpha = Some(meta.alpha);
                        row.jll_constant = meta.jll_constant;
                    }
                    row.decoded_text = Some(report.decoded_text);
                }
                Err(e) => row.lp_status = format!("error: {e}"),
            }
            row
        })
        .collect()
}

/// Orthogonal regime: for each `d`, `trials_per_cell` independent keys,
/// each used for one corrupted transmission of the first `d/8` corpus
/// characters, decoded with and without projection.
pub fn run_table1(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    cfg.validate(Regime::Orthogonal)?;
    let corpus = cfg.corpus_text()?;
    let texts: Vec<String> = cfg.sizes.iter().map(|&d| message(&corpus, d / 8)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.sizes.len())
        .flat_map(|c| (0..cfg.trials_per_cell).map(move |t| (c, t)))
        .collect();
    let pool = cfg.pool()?;
    let rows: Vec<Vec<BenchRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, trial_index)| {
                let d = cfg.sizes[c];
                let cell_seed = seeds::derive_seed(cfg.master_seed, &[tag::CELL, d as u64]);
                let seed = seeds::derive_seed(cell_seed, &[tag::TRIAL, trial_index as u64]);
                let key = matgen::generate_orthogonal_key(d, cfg.redundancy, seeds::derive_seed(seed, &[tag::KEY]))
                    .map_err(|e| e.to_string());
                let n = (cfg.redundancy * d as f64).round() as usize;
                run_trial(
                    cfg,
                    &Trial {
                        key: key.as_ref().map_err(Clone::clone),
                        d_or_m: d,
                        n,
                        text: &texts[c],
                        delta: cfg.delta,
                        seed,
                        trial_index,
                    },
                )
            })
            .collect()
    });
    Ok(rows.into_iter().flatten().collect())
}

/// Impossible regime: one key per `(m, Δ′)` cell, transmitted
/// `trials_per_cell` times with fresh corruption and projectors.
pub fn run_table2(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    cfg.validate(Regime::Impossible)?;
    let corpus = cfg.corpus_text()?;
    let texts: Vec<String> = cfg.cells.iter().map(|&(m, _)| message(&corpus, m / 8)).collect::<Result<_>>()?;
    let cell_seed = |&(m, dp): &(usize, f64)| seeds::derive_seed(cfg.master_seed, &[tag::CELL, m as u64, dp.to_bits()]);
    let pool = cfg.pool()?;
    pool.install(|| {
        let keys: Vec<std::result::Result<CodeKey, String>> = cfg
            .cells
            .par_iter()
            .map(|cell| {
                matgen::generate_impossible_key_with(cell.0, cell.1, seeds::derive_seed(cell_seed(cell), &[tag::KEY]), &cfg.solver)
                    .map_err(|e| e.to_string())
            })
            .collect();
        let jobs: Vec<(usize, usize)> = (0..cfg.cells.len())
            .flat_map(|c| (0..cfg.trials_per_cell).map(move |t| (c, t)))
            .collect();
        let rows: Vec<Vec<BenchRow>> = jobs
            .par_iter()
            .map(|&(c, trial_index)| {
                let (m, dp) = cfg.cells[c];
                let seed = seeds::derive_seed(cell_seed(&cfg.cells[c]), &[tag::TRIAL, trial_index as u64]);
                run_trial(
                    cfg,
                    &Trial {
                        key: keys[c].as_ref().map_err(Clone::clone),
                        d_or_m: m,
                        n: ((1.0 + dp) * m as f64).round() as usize,
                        text: &texts[c],
                        delta: cfg.channel_delta.unwrap_or(dp),
                        seed,
                        trial_index,
                    },
                )
            })
            .collect();
        Ok(rows.into_iter().flatten().collect())
    })
}

pub fn write_rows<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(CSV_HEADER)?;
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<BenchRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(BenchError::InvalidConfig(format!("unexpected CSV header {header:?}")));
    }
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Writes a config line, an environment line and a summary line.
pub fn write_manifest<W: Write>(mut w: W, cfg: &ExperimentConfig, rows: &[BenchRow]) -> Result<()> {
    let config = serde_json::json!({ "kind": "config", "config": cfg });
    let env = serde_json::json!({
        "kind": "environment",
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
        "threads": std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        "unix_time": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    let failed = rows.iter().filter(|r| r.mu_err.is_none()).count();
    let exact = rows.iter().filter(|r| r.mu_err == Some(0)).count();
    let summary = serde_json::json!({ "kind": "summary", "rows": rows.len(), "exact": exact, "failed": failed });
    for line in [config, env, summary] {
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Median solve time per `(size, variant)`, over rows that have one.
pub fn median_times(rows: &[BenchRow]) -> BTreeMap<(usize, Variant), f64> {
    let mut groups: BTreeMap<(usize, u8), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(t) = r.cpu_seconds {
            groups.entry((r.d_or_m, r.variant as u8)).or_default().push(t);
        }
    }
    groups
        .into_iter()
        .map(|((size, v), mut times)| {
            times.sort_by(f64::total_cmp);
            let mid = times.len() / 2;
            let median = if times.len() % 2 == 1 {
                times[mid]
            } else {
                0.5 * (times[mid - 1] + times[mid])
            };
            let variant = if v == Variant::Original as u8 {
                Variant::Original
            } else {
                Variant::Projected
            };
            ((size, variant), median)
        })
        .collect()
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 400.0;
const MARGIN: f64 = 60.0;

/// Line chart of median solve time against size, one polyline per variant.
/// SVG's y axis points down, so larger times get smaller y coordinates.
pub fn emit_plot(rows: &[BenchRow]) -> Result<String> {
    let medians = median_times(rows);
    let mut sizes: Vec<usize> = medians.keys().map(|k| k.0).collect();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(BenchError::InsufficientData(sizes.len()));
    }
    let (x_min, x_max) = (sizes[0] as f64, sizes[sizes.len() - 1] as f64);
    let y_max = medians.values().cloned().fold(0.0, f64::max).max(1e-9) * 1.05;
    let px = |x: f64| MARGIN + (x - x_min) / (x_max - x_min) * (PLOT_W - 2.0 * MARGIN);
    let py = |y: f64| PLOT_H - MARGIN - y / y_max * (PLOT_H - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, PLOT_H - MARGIN, PLOT_W - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for &s in &sizes {
        let x = px(s as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{s}</text>"#,
            y0 + 16.0
        );
    }
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{v:.2}</text>"#,
            x0 - 6.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">message bits (d or m)</text>"#,
        PLOT_W / 2.0,
        PLOT_H - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">LP solve time (s)</text>"#,
        PLOT_H / 2.0,
        PLOT_H / 2.0
    );
    for (variant, color, ly) in [(Variant::Original, "#c0392b", 20.0), (Variant::Projected, "#27ae60", 38.0)] {
        let points: Vec<String> = sizes
            .iter()
            .filter_map(|&s| medians.get(&(s, variant)).map(|&t| format!("{:.2},{:.2}", px(s as f64), py(t))))
            .collect();
        let name = variant.as_str();
        let _ = writeln!(
            svg,
            r#"<polyline id="{name}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly}" font-size="12" fill="{color}">{name}</text>"#,
            x1 - 80.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(size: usize, variant: Variant, t: f64) -> BenchRow {
        BenchRow {
            regime: Regime::Orthogonal,
            d_or_m: size,
            n: 4 * size,
            variant,
            mu_err: Some(0),
            cpu_seconds: Some(t),
            lp_status: "Optimal".into(),
            seed: 1,
            k: None,
            epsilon: None,
            alpha: None,
            jll_constant: None,
            trial_index: 0,
            decoded_text: None,
        }
    }

    fn polyline_ys(svg: &str, id: &str) -> Vec<f64> {
        let start = svg.find(&format!("id=\"{id}\"")).unwrap();
        let rest = &svg[start..];
        let p = rest.find("points=\"").unwrap() + 8;
        let end = rest[p..].find('"').unwrap();
        rest[p..p + end]
            .split_whitespace()
            .map(|xy| xy.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    }

    #[test]
    fn corpus_is_the_passage_in_latin1() {
        assert!(BUNDLED_CORPUS.starts_with(b"Conticuere omnes intentique ora tenebant\ninde toro pater \xC6neas"));
        assert!(BUNDLED_CORPUS.windows(6).any(|w| w == b"qu\xE6qu\xE6"));
        assert!(BUNDLED_CORPUS.ends_with(b"incipiam.\""));
        assert!(!BUNDLED_CORPUS.iter().any(|&b| b >= 0x80 && b != 0xC6 && b != 0xE6));
        let cfg = ExperimentConfig::table1(0);
        assert!(cfg.corpus_text().unwrap().chars().count() >= 1896 / 8);
    }

    #[test]
    fn plot_structure_and_orientation() {
        let mut rows = Vec::new();
        for (i, s) in TABLE1_SIZES.iter().enumerate() {
            rows.push(row(*s, Variant::Original, 1.0 + i as f64 * 2.0));
            rows.push(row(*s, Variant::Projected, 0.5 + i as f64 * 0.4));
        }
        let svg = emit_plot(&rows).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        let ys = polyline_ys(&svg, "original");
        assert_eq!(ys.len(), 6);
        // increasing times, decreasing y coordinates
        assert!(ys.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(polyline_ys(&svg, "projected").len(), 6);
    }

    #[test]
    fn plot_needs_two_sizes() {
        let rows = vec![row(80, Variant::Original, 1.0), row(80, Variant::Projected, 0.5)];
        assert!(matches!(emit_plot(&rows), Err(BenchError::InsufficientData(1))));
    }

    #[test]
    fn csv_round_trip_keeps_schema() {
        let mut rows = vec![row(80, Variant::Original, 1.25), row(80, Variant::Projected, 0.5)];
        rows[1].k = Some(145);
        rows[1].epsilon = Some(0.2);
        rows[1].alpha = Some(0.02);
        rows[1].jll_constant = Some(1.0);
        rows[0].mu_err = None;
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("regime,d_or_m,n,variant,mu_err,cpu_seconds,lp_status,seed,k,epsilon,alpha,C,trial_index\n"));
        assert!(text.contains("orthogonal,80,320,original,,1.25,Optimal,1,,,,,0"));
        assert_eq!(read_rows(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn medians_by_size_and_variant() {
        let rows = vec![
            row(80, Variant::Original, 3.0),
            row(80, Variant::Original, 1.0),
            row(80, Variant::Original, 2.0),
            row(80, Variant::Projected, 1.0),
            row(80, Variant::Projected, 2.0),
        ];
        let m = median_times(&rows);
        assert_eq!(m[&(80, Variant::Original)], 2.0);
        assert_eq!(m[&(80, Variant::Projected)], 1.5);
    }

    #[test]
    fn small_table_one_is_reproducible() {
        let mut cfg = ExperimentConfig::table1(5);
        cfg.sizes = vec![16, 24];
        cfg.trials_per_cell = 2;
        let a = run_table1(&cfg).unwrap();
        let b = run_table1(&cfg).unwrap();
        assert_eq!(a.len(), 8);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.mu_err, &x.decoded_text, x.seed), (y.mu_err, &y.decoded_text, y.seed));
        }
        assert!(a.iter().all(|r| r.lp_status == "Optimal"));
        let mut manifest = Vec::new();
        write_manifest(&mut manifest, &cfg, &a).unwrap();
        assert_eq!(String::from_utf8(manifest).unwrap().lines().count(), 3);
    }

    #[test]
    fn failed_cells_are_recorded() {
        let mut cfg = ExperimentConfig::table2(1);
        cfg.cells = vec![(12, 0.5)];
        cfg.trials_per_cell = 1;
        let rows = run_table2(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.mu_err.is_none() && r.lp_status.starts_with("error")));
    }

    #[test]
    fn wrong_regime_rejected() {
        assert!(run_table1(&ExperimentConfig::table2(0)).is_err());
        let mut cfg = ExperimentConfig::table1(0);
        cfg.trials_per_cell = 0;
        assert!(run_table1(&cfg).is_err());
    }
}
