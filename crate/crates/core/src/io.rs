//! Series input, configuration files and result files.
//!
//! Floats are written in the shortest form that parses back to the same
//! `f64`, so every CSV value round-trips exactly.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::baselines::{NigHyper, SharedVariance};
use crate::error::{Error, Result};
use crate::fit::{Bh93Settings, FitModel};
use crate::normal::NormalHyper;
use crate::partition::{Partition, YaoPrior};
use crate::samples::{Draw, ModelKind, PosteriorSamples};
use crate::sim::{hyper_preset, McReport, ScenarioSpec, SimulatedSeries};
use crate::summary::{ProductEstimates, SummaryReport};

pub const SUMMARY_FILE: &str = "summary.json";
pub const CHANGE_PROB_MU_FILE: &str = "change_prob_mu.csv";
pub const CHANGE_PROB_SIGMA2_FILE: &str = "change_prob_sigma2.csv";
pub const PRODUCT_FILE: &str = "product_estimates.csv";
pub const SAMPLES_FILE: &str = "samples.csv.gz";

const SAMPLES_MAGIC: &str = "# mcpd samples v1";

/// Shortest round-trip decimal form of `v`.
pub fn format_f64(v: f64) -> String {
    ryu::Buffer::new().format(v).to_string()
}

fn parse_f64(token: &str) -> Option<f64> {
    let t = token.trim();
    if t.contains('\u{2212}') {
        t.replace('\u{2212}', "-").parse().ok()
    } else {
        t.parse().ok()
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads one observation per line. A first line whose token is not numeric
/// is taken as a header; blank lines are skipped.
pub fn read_series_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    parse_series(&read_to_string(path)?, path)
}

pub fn parse_series(text: &str, path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut seen_line = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim().trim_start_matches('\u{feff}');
        if line.is_empty() {
            continue;
        }
        let first = !seen_line;
        seen_line = true;
        if line.contains(',') {
            return Err(parse_error(path, line_no, "expected one value per line"));
        }
        match parse_f64(line) {
            Some(v) if v.is_finite() => out.push(v),
            Some(v) => return Err(parse_error(path, line_no, format!("non-finite value {v}"))),
            None if first => {}
            None => {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("not a number: `{line}`"),
                ))
            }
        }
    }
    if out.is_empty() {
        return Err(parse_error(path, 1, "no observations"));
    }
    Ok(out)
}

pub const CONFIG_KEYS: [&str; 11] = [
    "mu0", "sigma0sq", "a", "d", "alpha1", "beta1", "alpha2", "beta2", "m", "v", "p_max",
];

fn model_keys(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Bmcp => &[
            "mu0", "sigma0sq", "a", "d", "alpha1", "beta1", "alpha2", "beta2",
        ],
        ModelKind::Lcia05 => &["m", "v", "a", "d", "alpha1", "beta1"],
        ModelKind::Bh93 => &["mu0", "sigma0sq", "a", "d", "p_max"],
    }
}

/// Parses flat `key = value` text. `#` starts a comment. Unknown and
/// repeated keys are errors.
pub fn parse_config(text: &str, path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_error(
                path,
                line_no,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(parse_error(
                path,
                line_no,
                format!("unknown key `{key}` (allowed: {})", CONFIG_KEYS.join(", ")),
            ));
        }
        let value = match parse_f64(value) {
            Some(v) if v.is_finite() => v,
            _ => {
                return Err(parse_error(
                    path,
                    line_no,
                    format!(
                        "value of `{key}` is not a finite number: `{}`",
                        value.trim()
                    ),
                ))
            }
        };
        if out.insert(key.to_string(), value).is_some() {
            return Err(parse_error(
                path,
                line_no,
                format!("key `{key}` given twice"),
            ));
        }
    }
    Ok(out)
}

/// Builds a model from its defaults overridden by `values`.
pub fn model_from_config(kind: ModelKind, values: &BTreeMap<String, f64>) -> Result<FitModel> {
    let allowed = model_keys(kind);
    if let Some(key) = values.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Config(format!(
            "key `{key}` does not apply to model {kind} (allowed: {})",
            allowed.join(", ")
        )));
    }
    let get = |k: &str, default: f64| values.get(k).copied().unwrap_or(default);
    let model = match FitModel::default_for(kind) {
        FitModel::Bmcp { hyper, yao1, yao2 } => FitModel::Bmcp {
            hyper: NormalHyper::new(
                get("mu0", hyper.mu0),
                get("sigma0sq", hyper.sigma0sq),
                get("a", hyper.a),
                get("d", hyper.d),
            )?,
            yao1: YaoPrior::new(get("alpha1", yao1.alpha), get("beta1", yao1.beta))?,
            yao2: YaoPrior::new(get("alpha2", yao2.alpha), get("beta2", yao2.beta))?,
        },
        FitModel::Lcia05 { hyper, yao } => FitModel::Lcia05 {
            hyper: NigHyper::new(
                get("m", hyper.m),
                get("v", hyper.v),
                get("a", hyper.a),
                get("d", hyper.d),
            )?,
            yao: YaoPrior::new(get("alpha1", yao.alpha), get("beta1", yao.beta))?,
        },
        FitModel::Bh93(s) => {
            let (a0, d0) = match s.sigma2 {
                SharedVariance::InverseGamma { a, d } => (a, d),
                SharedVariance::Fixed { .. } => unreachable!("default uses a prior"),
            };
            let settings = Bh93Settings {
                mu0: values.get("mu0").copied(),
                sigma0sq: values.get("sigma0sq").copied(),
                sigma2: SharedVariance::InverseGamma {
                    a: get("a", a0),
                    d: get("d", d0),
                },
                p_max: get("p_max", s.p_max),
            };
            // Validate everything that does not depend on the data.
            crate::baselines::Bh93Hyper {
                mu0: settings.mu0.unwrap_or(0.0),
                sigma0sq: settings.sigma0sq.unwrap_or(1.0),
                sigma2: settings.sigma2,
                p_max: settings.p_max,
            }
            .validate()?;
            FitModel::Bh93(settings)
        }
    };
    Ok(model)
}

/// Resolves a `--config` argument: `preset:NAME` selects a built-in
/// hyperparameter setting for the two-partition model, anything else is a
/// path to a `key = value` file. `None` gives the model defaults.
pub fn load_model(kind: ModelKind, config: Option<&str>) -> Result<FitModel> {
    match config {
        None => model_from_config(kind, &BTreeMap::new()),
        Some(arg) => match arg.strip_prefix("preset:") {
            Some(name) => {
                if kind != ModelKind::Bmcp {
                    return Err(Error::Config(format!(
                        "preset `{name}` applies only to model bmcp"
                    )));
                }
                let h = hyper_preset(name)?;
                let values = BTreeMap::from([
                    ("mu0".to_string(), h.mu0),
                    ("sigma0sq".to_string(), h.sigma0sq),
                    ("a".to_string(), h.a),
                    ("d".to_string(), h.d),
                ]);
                model_from_config(kind, &values)
            }
            None => {
                let path = Path::new(arg);
                let values = parse_config(&read_to_string(path)?, path)?;
                model_from_config(kind, &values)
            }
        },
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn finish<W: Write>(mut w: W, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a CSV with an integer first column and float columns.
fn write_table(
    path: &Path,
    header: &[&str],
    first: impl Iterator<Item = usize>,
    cols: &[&[f64]],
) -> Result<()> {
    let mut w = create(path)?;
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for (row, key) in first.enumerate() {
        out.push_str(&key.to_string());
        for c in cols {
            out.push(',');
            out.push_str(&format_f64(c[row]));
        }
        out.push('\n');
    }
    w.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// Reads a CSV written by this module: a header line followed by numeric rows.
pub fn read_table(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let header: Vec<String> = match lines.next() {
        Some((_, h)) => h.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(parse_error(path, 1, "empty file")),
    };
    let mut cols = vec![Vec::new(); header.len()];
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(parse_error(
                path,
                idx + 1,
                format!("expected {} fields, got {}", header.len(), fields.len()),
            ));
        }
        for (c, f) in cols.iter_mut().zip(fields) {
            c.push(
                parse_f64(f)
                    .ok_or_else(|| parse_error(path, idx + 1, format!("not a number: `{f}`")))?,
            );
        }
    }
    Ok((header, cols))
}

/// Reads the probability column of a change-probability CSV.
pub fn read_change_probabilities(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let (_, mut cols) = read_table(path)?;
    Ok(cols.swap_remove(1))
}

pub fn read_product_estimates(path: impl AsRef<Path>) -> Result<ProductEstimates> {
    let (_, c) = read_table(path)?;
    let pairs = |lo: &[f64], hi: &[f64]| lo.iter().copied().zip(hi.iter().copied()).collect();
    Ok(ProductEstimates {
        mu_mean: c[1].clone(),
        mu_hpd: pairs(&c[2], &c[3]),
        sigma2_mean: c[4].clone(),
        sigma2_hpd: pairs(&c[5], &c[6]),
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the summary files (and the raw draws when `samples` is given);
/// returns the paths written.
pub fn write_outputs(
    report: &SummaryReport,
    samples: Option<&PosteriorSamples>,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mut written = Vec::new();

    let path = dir.join(SUMMARY_FILE);
    write_json(&path, report)?;
    written.push(path);

    for (file, summary) in [
        (CHANGE_PROB_MU_FILE, &report.mean),
        (CHANGE_PROB_SIGMA2_FILE, &report.variance),
    ] {
        let path = dir.join(file);
        let probs = &summary.change_probabilities;
        write_table(
            &path,
            &["instant", "probability"],
            1..=probs.len(),
            &[probs],
        )?;
        written.push(path);
    }

    if let Some(pe) = &report.product {
        let path = dir.join(PRODUCT_FILE);
        let split = |v: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { v.iter().copied().unzip() };
        let (mlo, mhi) = split(&pe.mu_hpd);
        let (slo, shi) = split(&pe.sigma2_hpd);
        write_table(
            &path,
            &[
                "instant",
                "mu_mean",
                "mu_hpd_lo",
                "mu_hpd_hi",
                "s2_mean",
                "s2_hpd_lo",
                "s2_hpd_hi",
            ],
            1..=pe.mu_mean.len(),
            &[&pe.mu_mean, &mlo, &mhi, &pe.sigma2_mean, &slo, &shi],
        )?;
        written.push(path);
    }

    if let Some(s) = samples {
        let path = dir.join(SAMPLES_FILE);
        write_samples(s, &path)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<SummaryReport> {
    let path = path.as_ref();
    let report: SummaryReport = serde_json::from_str(&read_to_string(path)?)?;
    report.validate()?;
    Ok(report)
}

fn join_usize(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn join_f64(v: &[f64]) -> String {
    v.iter()
        .map(|&x| format_f64(x))
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes every retained draw as one gzip-compressed CSV row:
/// `draw,p1,p2,mean_endpoints,mean_values,var_endpoints,var_values`, with
/// list fields separated by `;` and an empty `p2` for single-partition models.
pub fn write_samples(samples: &PosteriorSamples, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = GzEncoder::new(BufWriter::new(file), Compression::default());
    let mut buf = format!(
        "{SAMPLES_MAGIC} model={} n={}\ndraw,p1,p2,mean_endpoints,mean_values,var_endpoints,var_values\n",
        samples.model, samples.n
    );
    for (i, d) in samples.draws.iter().enumerate() {
        buf.push_str(&format!(
            "{i},{},{},{},{},{},{}\n",
            format_f64(d.p1),
            d.p2.map(format_f64).unwrap_or_default(),
            join_usize(d.mean_partition.endpoints()),
            join_f64(&d.mean_values),
            join_usize(d.var_partition.endpoints()),
            join_f64(&d.var_values),
        ));
        if buf.len() > 1 << 16 {
            w.write_all(buf.as_bytes())
                .map_err(|e| Error::io(path, e))?;
            buf.clear();
        }
    }
    w.write_all(buf.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    let inner = w.finish().map_err(|e| Error::io(path, e))?;
    finish(inner, path)
}

pub fn read_samples(path: impl AsRef<Path>) -> Result<PosteriorSamples> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    GzDecoder::new(BufReader::new(file))
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let meta = lines
        .next()
        .and_then(|l| l.strip_prefix(SAMPLES_MAGIC))
        .ok_or_else(|| parse_error(path, 1, "not a samples file"))?;
    let mut model = None;
    let mut n = None;
    for kv in meta.split_whitespace() {
        match kv.split_once('=') {
            Some(("model", v)) => model = Some(v.parse::<ModelKind>()?),
            Some(("n", v)) => n = v.parse::<usize>().ok(),
            _ => return Err(parse_error(path, 1, format!("unexpected field `{kv}`"))),
        }
    }
    let (Some(model), Some(n)) = (model, n) else {
        return Err(parse_error(path, 1, "missing model or length"));
    };
    lines.next();
    let mut samples = PosteriorSamples::new(model, n);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 3;
        let err = |msg: &str| parse_error(path, line_no, msg.to_string());
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err("expected 7 fields"));
        }
        let floats = |s: &str| -> Result<Vec<f64>> {
            s.split(';')
                .map(|t| parse_f64(t).ok_or_else(|| err("bad number")))
                .collect()
        };
        let part = |s: &str| -> Result<Partition> {
            let ends = s
                .split(';')
                .map(|t| t.parse::<usize>().map_err(|_| err("bad end point")))
                .collect::<Result<Vec<_>>>()?;
            Partition::new(n, ends).map_err(|e| err(&e.to_string()))
        };
        let draw = Draw {
            p1: parse_f64(f[1]).ok_or_else(|| err("bad p1"))?,
            p2: if f[2].is_empty() {
                None
            } else {
                Some(parse_f64(f[2]).ok_or_else(|| err("bad p2"))?)
            },
            mean_partition: part(f[3])?,
            mean_values: floats(f[4])?,
            var_partition: part(f[5])?,
            var_values: floats(f[6])?,
        };
        if draw.mean_values.len() != draw.mean_partition.num_blocks()
            || draw.var_values.len() != draw.var_partition.num_blocks()
        {
            return Err(err("value count does not match block count"));
        }
        samples.draws.push(draw);
    }
    Ok(samples)
}

/// Writes the files of a replication study.
pub fn write_mc_report(report: &McReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let bands = [
        ("mc_change_prob_mu.csv", &report.change_prob_mean),
        ("mc_change_prob_sigma2.csv", &report.change_prob_var),
    ];
    for (file, band) in bands {
        let path = dir.join(file);
        write_table(
            &path,
            &["instant", "mean", "q05", "q95"],
            1..=band.mean.len(),
            &[&band.mean, &band.q05, &band.q95],
        )?;
        written.push(path);
    }
    let path = dir.join("mc_product_estimates.csv");
    let (m, s) = (&report.product_mu, &report.product_sigma2);
    write_table(
        &path,
        &[
            "instant", "mu_mean", "mu_q05", "mu_q95", "s2_mean", "s2_q05", "s2_q95",
        ],
        1..=m.mean.len(),
        &[&m.mean, &m.q05, &m.q95, &s.mean, &s.q05, &s.q95],
    )?;
    written.push(path);

    let path = dir.join("mc_replications.csv");
    let mut text = String::from("replication,n_changes_mode_mu,n_changes_mode_sigma2,mode_partition_mu,mode_partition_sigma2\n");
    for r in &report.replications {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.index,
            r.mode_n_mean,
            r.mode_n_var,
            join_usize(r.mode_mean_partition.endpoints()),
            join_usize(r.mode_var_partition.endpoints()),
        ));
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = dir.join("mc_n_mode_counts.csv");
    let mut text = String::from("n_changes,count_mu,count_sigma2\n");
    for (c, (a, b)) in report
        .n_mode_counts_mean
        .iter()
        .zip(&report.n_mode_counts_var)
        .enumerate()
    {
        text.push_str(&format!("{c},{a},{b}\n"));
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = dir.join("mc_summary.json");
    write_json(&path, report)?;
    written.push(path);
    Ok(written)
}

/// Writes a generated series (`series.csv`) and its truth (`truth.csv`, `truth.json`).
pub fn write_simulation(
    spec: &ScenarioSpec,
    series: &SimulatedSeries,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let path = dir.join("series.csv");
    let mut text = String::from("x\n");
    for &v in &series.x {
        text.push_str(&format_f64(v));
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let truth = dir.join("truth.csv");
    write_table(
        &truth,
        &["instant", "mu", "sigma2"],
        1..=series.x.len(),
        &[&series.mu, &series.sigma2],
    )?;
    let spec_path = dir.join("truth.json");
    write_json(&spec_path, spec)?;
    Ok(vec![path, truth, spec_path])
}
