use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use permround::concentration::{verify_grid, GridConfig};
use permround::gaussian::haar_orthogonal;
use permround::nconv::{approximate_with, error_report, ApproxOptions, ErrorReport, NconvApprox, Orientation};
use permround::qap::{counterexample, rounding_heuristic, QapInstance};
use permround::rounding::sample_rounding;
use permround::{OrthogonalMatrix, RandomStream, SquareMatrix};
use serde::Serialize;

use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::{CliError, CliResult};

/// Where output goes: a file or standard output.
pub struct Sink {
    path: Option<PathBuf>,
}

impl Sink {
    pub fn new(path: Option<PathBuf>) -> Self {
        Self { path }
    }

    fn writer(&self) -> CliResult<Box<dyn Write>> {
        Ok(match &self.path {
            Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    pub fn table<T: Serialize>(&self, rows: &[T], format: OutputFormat) -> CliResult<()> {
        let mut w = self.writer()?;
        match format {
            OutputFormat::Csv => {
                let mut csv = csv::Writer::from_writer(w);
                for row in rows {
                    csv.serialize(row)?;
                }
                csv.flush()?;
            }
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut w, rows)?;
                writeln!(w)?;
                w.flush()?;
            }
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&self, value: &T) -> CliResult<()> {
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn text(&self, text: &str) -> CliResult<()> {
        let mut w = self.writer()?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_orthogonal(path: &Path) -> CliResult<OrthogonalMatrix> {
    let m = SquareMatrix::parse_any(&read(path)?)?;
    Ok(OrthogonalMatrix::new(m)?)
}

#[derive(Serialize)]
struct RoundRow {
    sample_index: usize,
    permutation: String,
    residual_norm: f64,
}

pub fn round(matrix: &Path, samples: usize, seed: u64, format: OutputFormat, sink: &Sink) -> CliResult<()> {
    let u = load_orthogonal(matrix)?;
    let mut stream = RandomStream::new(seed, 0);
    let rows = (0..samples)
        .map(|i| {
            let s = sample_rounding(&u, &mut stream)?;
            Ok(RoundRow {
                sample_index: i,
                permutation: s.sigma.to_string(),
                residual_norm: s.residual_norm(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    sink.table(&rows, format)
}

#[derive(Serialize)]
struct ApproxOutput<'a> {
    approximation: &'a NconvApprox,
    error_report: &'a ErrorReport,
}

#[derive(Serialize)]
struct ApproxRow {
    n: usize,
    #[serde(rename = "N")]
    samples: usize,
    linf_error: f64,
    frob_error: f64,
    max_col_error: f64,
    weight_dev: f64,
    mean_residual_sq: f64,
}

impl ApproxRow {
    fn new(approx: &NconvApprox, r: &ErrorReport) -> Self {
        Self {
            n: approx.n,
            samples: approx.sample_count,
            linf_error: r.linf,
            frob_error: r.frob,
            max_col_error: r.max_column_error(),
            weight_dev: r.weight_deviation,
            mean_residual_sq: approx.mean_residual_sq,
        }
    }
}

pub struct ApproximateArgs<'a> {
    pub matrix: &'a Path,
    pub samples: usize,
    pub orientation: Orientation,
    pub track_permutations: bool,
}

pub fn approximate(args: ApproximateArgs<'_>, seed: u64, format: OutputFormat, sink: &Sink) -> CliResult<()> {
    let u = load_orthogonal(args.matrix)?;
    let options = ApproxOptions {
        orientation: args.orientation,
        track_permutations: args.track_permutations,
        keep_weight_matrices: false,
    };
    let approx = approximate_with(&u, args.samples, &mut RandomStream::new(seed, 0), options)?;
    let report = error_report(&u, &approx)?;
    match format {
        OutputFormat::Json => sink.json(&ApproxOutput {
            approximation: &approx,
            error_report: &report,
        }),
        OutputFormat::Csv => sink.table(&[ApproxRow::new(&approx, &report)], format),
    }
}

#[derive(Serialize)]
struct ScalingRow {
    n: usize,
    #[serde(rename = "N")]
    samples: usize,
    rep: usize,
    linf_error: f64,
    frob_error: f64,
    max_col_error: f64,
    weight_dev: f64,
    mean_residual_sq: f64,
}

/// One Haar matrix and one approximation per `(n, N, rep)`. Each triple has
/// its own substream, so rows do not depend on the order they run in.
pub fn scaling(config: &ExperimentConfig) -> CliResult<()> {
    config.validate()?;
    let root = RandomStream::new(config.seed, 0);
    let options = ApproxOptions {
        track_permutations: false,
        ..ApproxOptions::default()
    };
    let mut rows = Vec::new();
    let mut index = 0u64;
    for &n in &config.n_values {
        for &samples in &config.sample_counts {
            for rep in 0..config.repetitions {
                let mut s = root.substream(index);
                index += 1;
                let u = haar_orthogonal(n, &mut s);
                let approx = approximate_with(&u, samples, &mut s, options)?;
                let r = error_report(&u, &approx)?;
                let row = ApproxRow::new(&approx, &r);
                rows.push(ScalingRow {
                    n,
                    samples,
                    rep,
                    linf_error: row.linf_error,
                    frob_error: row.frob_error,
                    max_col_error: row.max_col_error,
                    weight_dev: row.weight_dev,
                    mean_residual_sq: row.mean_residual_sq,
                });
            }
        }
    }
    Sink::new(config.output_path.clone()).table(&rows, config.output_format)
}

#[derive(Serialize)]
struct ConcentrationRow {
    n: usize,
    k: usize,
    epsilon: f64,
    alpha_minus: f64,
    alpha_plus: f64,
    /// Bound on the probability that the order statistic leaves
    /// `[alpha_minus, alpha_plus]`.
    bound: f64,
    empirical: f64,
    trials: usize,
}

pub fn concentration(grid: &GridConfig, seed: u64, format: OutputFormat, sink: &Sink) -> CliResult<()> {
    let rows: Vec<ConcentrationRow> = verify_grid(grid, &mut RandomStream::new(seed, 0))?
        .iter()
        .map(|r| ConcentrationRow {
            n: r.bound.n,
            k: r.bound.k,
            epsilon: r.bound.epsilon,
            alpha_minus: r.bound.alpha_minus,
            alpha_plus: r.bound.alpha_plus,
            bound: r.bound.two_sided_bound(),
            empirical: r.empirical(),
            trials: r.trials,
        })
        .collect();
    sink.table(&rows, format)
}

#[derive(Serialize)]
struct QapOutput {
    lower_bound: f64,
    best_value: f64,
    gap: f64,
    permutation: String,
    samples_used: usize,
    distinct_evaluated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    orthogonal_minimizer: Option<OrthogonalMatrix>,
}

pub enum QapSource<'a> {
    File(&'a Path),
    Counterexample(usize),
}

pub fn qap(source: QapSource<'_>, samples: usize, seed: u64, format: OutputFormat, sink: &Sink) -> CliResult<()> {
    let inst = match source {
        QapSource::File(p) => QapInstance::parse_any(&read(p)?)?,
        QapSource::Counterexample(m) => counterexample(m)?,
    };
    let r = rounding_heuristic(&inst, samples, &mut RandomStream::new(seed, 0))?;
    let mut out = QapOutput {
        lower_bound: r.lower_bound,
        best_value: r.best_value,
        gap: r.gap(),
        permutation: r.best_permutation.to_string(),
        samples_used: r.samples_used,
        distinct_evaluated: r.distinct_evaluated,
        orthogonal_minimizer: Some(r.orthogonal_minimizer),
    };
    match format {
        OutputFormat::Json => sink.json(&out),
        OutputFormat::Csv => {
            out.orthogonal_minimizer = None;
            sink.table(&[out], format)
        }
    }
}

pub fn haar(n: usize, seed: u64, format: OutputFormat, sink: &Sink) -> CliResult<()> {
    if n == 0 {
        return Err(CliError::Validation("dimension must be positive".into()));
    }
    let u = haar_orthogonal(n, &mut RandomStream::new(seed, 0));
    match format {
        OutputFormat::Json => sink.json(&u),
        OutputFormat::Csv => sink.text(&u.matrix().to_text()),
    }
}
