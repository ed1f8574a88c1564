use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use uds::harness::{beta_sensitivity, runtime_bench, uds_power, BetaPoint, PowerReport, TimingRow};
use uds::scoring::{uds_exact, uds_pr};
use uds::{beam_search, Dataset, SearchConfig, UdsParams};

use crate::manifest::RunManifest;
use crate::{BenchArgs, BetaArgs, CliError, InputArgs, PowerArgs, ScoreArgs, SearchArgs};

fn load(input: &InputArgs) -> Result<Dataset, CliError> {
    Ok(Dataset::load_csv(&input.input, input.options()?)?)
}

fn input_params(input: &InputArgs) -> serde_json::Value {
    json!({
        "input": input.input.display().to_string(),
        "delimiter": input.delimiter.to_string(),
        "header": !input.no_header,
        "drop_na": input.drop_na,
    })
}

/// A column given by name, or by 1-based position when no name matches.
fn resolve_column(ds: &Dataset, key: &str) -> Result<usize, CliError> {
    if let Ok(id) = ds.column_id(key) {
        return Ok(id);
    }
    match key.parse::<usize>() {
        Ok(i) if (1..=ds.n()).contains(&i) => Ok(i - 1),
        _ => Err(uds::Error::UnknownColumn(key.to_owned()).into()),
    }
}

fn names(ds: &Dataset, dims: &[usize]) -> Vec<String> {
    dims.iter().map(|&d| ds.names()[d].clone()).collect()
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

fn write_timing(dir: &Path, stem: &str, seconds: f64, extra: serde_json::Value) -> Result<(), CliError> {
    let mut value = json!({ "wall_clock_seconds": seconds });
    if let (Some(obj), serde_json::Value::Object(more)) = (value.as_object_mut(), extra) {
        obj.extend(more);
    }
    write_file(dir, &format!("{stem}.timing.json"), &to_json(&value))
}

#[derive(Serialize)]
struct TermOut {
    column: String,
    ce: f64,
    conditional_ce: f64,
}

#[derive(Serialize)]
struct ScoreOut {
    manifest: RunManifest,
    score: f64,
    exact: bool,
    permutation: Vec<String>,
    leading_ce: f64,
    terms: Vec<TermOut>,
    bin_counts: Vec<usize>,
    initial_bins: Vec<usize>,
    numerator: f64,
    denominator: f64,
}

pub fn score(args: &ScoreArgs) -> Result<(), CliError> {
    let ds = load(&args.input)?;
    let dims = args
        .columns
        .iter()
        .map(|c| resolve_column(&ds, c.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    let params = UdsParams::with_beta(args.beta);
    let res = if args.exact {
        uds_exact(&ds, &dims, &params, args.max_exact)?
    } else {
        uds_pr(&ds, &dims, &params)?
    };
    let mut p = input_params(&args.input);
    p["columns"] = json!(names(&ds, &dims));
    p["beta"] = json!(args.beta);
    p["exact"] = json!(args.exact);
    let out = ScoreOut {
        manifest: RunManifest::new("score", p, None).with_input(&args.input.input)?,
        score: res.score,
        exact: args.exact,
        permutation: names(&ds, &res.permutation),
        leading_ce: res.leading_ce,
        terms: res
            .terms
            .iter()
            .map(|t| TermOut {
                column: ds.names()[t.column].clone(),
                ce: t.ce,
                conditional_ce: t.conditional_ce,
            })
            .collect(),
        bin_counts: res.bin_counts,
        initial_bins: res.initial_bins,
        numerator: res.numerator,
        denominator: res.denominator,
    };
    print!("{}", to_json(&out));
    Ok(())
}

#[derive(Serialize)]
struct RankedOut {
    rank: usize,
    dims: Vec<String>,
    dimensionality: usize,
    score: f64,
}

pub fn search(args: &SearchArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let ds = load(&args.input)?;
    let config = SearchConfig {
        beam_width: args.beam_width,
        max_dim: args.max_dim.unwrap_or(ds.n().min(5)),
        top_k: args.top_k,
        min_score: args.min_score,
        params: UdsParams::with_beta(args.beta),
    };
    let found = beam_search(&ds, &config)?;
    let ranked: Vec<RankedOut> = found
        .iter()
        .enumerate()
        .map(|(i, s)| RankedOut {
            rank: i + 1,
            dims: names(&ds, &s.dims),
            dimensionality: s.dims.len(),
            score: s.score,
        })
        .collect();

    let mut p = input_params(&args.input);
    p["beam_width"] = json!(config.beam_width);
    p["max_dim"] = json!(config.max_dim);
    p["top_k"] = json!(config.top_k);
    p["min_score"] = json!(config.min_score);
    p["beta"] = json!(args.beta);
    let manifest = RunManifest::new("search", p, None).with_input(&args.input.input)?;
    write_file(
        &args.out_dir,
        "search.json",
        &to_json(&json!({ "manifest": manifest, "results": ranked })),
    )?;
    let mut tsv = String::from("rank\tdims\tdimensionality\tscore\n");
    for r in &ranked {
        writeln!(tsv, "{}\t{}\t{}\t{:?}", r.rank, r.dims.join(","), r.dimensionality, r.score).unwrap();
    }
    write_file(&args.out_dir, "search.tsv", &tsv)?;
    write_timing(&args.out_dir, "search", start.elapsed().as_secs_f64(), json!({}))?;

    println!("{} subspaces from {} columns x {} rows", ranked.len(), ds.n(), ds.m());
    for r in ranked.iter().take(10) {
        println!("{:>4}  {:.4}  {}", r.rank, r.score, r.dims.join(","));
    }
    println!("wrote {}", args.out_dir.join("search.{json,tsv}").display());
    Ok(())
}

fn score_rows(report: &PowerReport, prefix: &str, tsv: &mut String) {
    let arms = [
        ("null", &report.null_scores, &report.null_dims),
        ("alt", &report.alt_scores, &report.alt_dims),
    ];
    for (arm, scores, dims) in arms {
        for (run, (s, d)) in scores.iter().zip(dims.iter()).enumerate() {
            writeln!(tsv, "{prefix}{arm}\t{run}\t{d}\t{s:?}").unwrap();
        }
    }
}

pub fn power(args: &PowerArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let config = args.exp.config(args.beta)?;
    let report = uds_power(&config)?;
    let mut p = serde_json::to_value(&args.exp).expect("arguments serialize");
    p["beta"] = json!(args.beta);
    let manifest = RunManifest::new("power", p, Some(args.exp.seed));
    let dir = &args.exp.out_dir;
    write_file(dir, "power.json", &to_json(&json!({ "manifest": manifest, "report": report })))?;
    let mut tsv = String::from("arm\trun\tdims\tscore\n");
    score_rows(&report, "", &mut tsv);
    write_file(dir, "power.tsv", &tsv)?;
    write_timing(
        dir,
        "power",
        start.elapsed().as_secs_f64(),
        json!({ "null_seconds": report.timing.null_seconds, "alt_seconds": report.timing.alt_seconds }),
    )?;
    println!(
        "power {:.2} (cutoff {:.6}, {} runs per arm)",
        report.power, report.cutoff, config.runs
    );
    println!("wrote {}", dir.join("power.{json,tsv}").display());
    Ok(())
}

pub fn beta(args: &BetaArgs) -> Result<(), CliError> {
    let start = Instant::now();
    if args.grid.is_empty() {
        return Err(CliError::usage("--grid needs at least one value"));
    }
    let config = args.exp.config(args.grid[0])?;
    for &b in &args.grid {
        UdsParams::with_beta(b).validate().map_err(CliError::usage_from)?;
    }
    let points: Vec<BetaPoint> = beta_sensitivity(&config, &args.grid)?;
    let mut p = serde_json::to_value(&args.exp).expect("arguments serialize");
    p["grid"] = json!(args.grid);
    let manifest = RunManifest::new("beta", p, Some(args.exp.seed));
    let dir = &args.exp.out_dir;
    write_file(dir, "beta.json", &to_json(&json!({ "manifest": manifest, "points": points })))?;
    let mut tsv = String::from("beta\tarm\trun\tdims\tscore\n");
    for point in &points {
        score_rows(&point.report, &format!("{}\t", point.beta), &mut tsv);
    }
    write_file(dir, "beta.tsv", &tsv)?;
    write_timing(dir, "beta", start.elapsed().as_secs_f64(), json!({}))?;
    for point in &points {
        let note = if point.below_stable_range { "  (below stable range)" } else { "" };
        println!("beta {:>3}: power {:.2}{note}", point.beta, point.report.power);
    }
    println!("wrote {}", dir.join("beta.{json,tsv}").display());
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    if args.m_grid.is_empty() || args.n_grid.is_empty() {
        return Err(CliError::usage("--m-grid and --n-grid need at least one value"));
    }
    let params = UdsParams::with_beta(args.beta);
    params.validate().map_err(CliError::usage_from)?;
    let rows: Vec<TimingRow> = runtime_bench(&args.m_grid, &args.n_grid, args.seed, &params, args.repeats)?;
    let p = json!({
        "m_grid": args.m_grid,
        "n_grid": args.n_grid,
        "beta": args.beta,
        "repeats": args.repeats,
    });
    let manifest = RunManifest::new("bench", p, Some(args.seed));
    write_file(&args.out_dir, "bench.json", &to_json(&json!({ "manifest": manifest, "rows": rows })))?;
    let mut tsv = String::from("m\tn\tseconds\n");
    for r in &rows {
        writeln!(tsv, "{}\t{}\t{:?}", r.m, r.n, r.seconds).unwrap();
        println!("m {:>6}  n {:>3}  {:.4}s", r.m, r.n, r.seconds);
    }
    write_file(&args.out_dir, "bench.tsv", &tsv)?;
    println!("wrote {}", args.out_dir.join("bench.{json,tsv}").display());
    Ok(())
}
