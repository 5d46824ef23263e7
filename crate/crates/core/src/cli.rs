//! Command-line front end. Every command writes one artifact (JSON by
//! default, CSV with `--format csv`) to stdout or `--out`.
//!
//! Exit status: 0 on success, 2 for usage and validation errors, 3 for
//! numerical failures.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::curve::{a_charsum, count_brute, CountResult, CurveId};
use crate::error::{Error, Result};
use crate::field::{make_field, make_field_q, FieldSpec};
use crate::moments::{
    bound_ratio, fibre_count, moment_bound, moment_brute, moment_closed, moment_geometric,
    MomentRecord,
};
use crate::polyfit::{
    compare_systems, build_system, default_pair_sets, least_squares_fit, read_pairs_csv,
    select_pairs, system_dimension, FitVerdict, LeastSquaresReport,
};
use crate::scan::{pointless_pairs, q_max, ScanReport};
use crate::sweep::{sweep_and_fit, write_csv, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "fermat", version, about = "Diagonal Fermat curves over finite fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Output {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the artifact here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FieldArgs {
    /// Field size; alternatively give --p and --n.
    #[arg(long)]
    q: Option<u64>,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long, default_value_t = 1)]
    n: u32,
}

impl FieldArgs {
    fn build(&self) -> Result<FieldSpec> {
        match (self.q, self.p) {
            (Some(q), None) => make_field_q(q),
            (None, Some(p)) => make_field(p, self.n),
            (Some(q), Some(p)) => {
                let field = make_field(p, self.n)?;
                if field.q() as u64 != q {
                    return Err(Error::InvalidInput(format!("--q {q} disagrees with --p/--n")));
                }
                Ok(field)
            }
            (None, None) => Err(Error::InvalidInput("give --q or --p".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CountMethodArg {
    Brute,
    Charsum,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MomentMethodArg {
    Brute,
    Closed,
    Geometric,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Modulus, generator and size of a field.
    FieldInfo {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Point count of A x^ell + B y^ell + C z^ell = 0 (default C = -1).
    Count {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        ell: u32,
        #[arg(long = "A", allow_hyphen_values = true)]
        a: String,
        #[arg(long = "B", allow_hyphen_values = true)]
        b: String,
        #[arg(long = "C", allow_hyphen_values = true, default_value = "-1")]
        c: String,
        #[arg(long, value_enum, default_value = "brute")]
        method: CountMethodArg,
        #[command(flatten)]
        output: Output,
    },
    /// k-th moment of a = N - (q + 1) over all (A, B).
    Moment {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        ell: u32,
        #[arg(long)]
        k: u32,
        #[arg(long, value_enum, default_value = "brute")]
        method: MomentMethodArg,
        #[command(flatten)]
        output: Output,
    },
    /// Sum of N^k over projective coefficient triples.
    Fibre {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        ell: u32,
        #[arg(long)]
        k: u32,
        /// Restrict to A B C != 0.
        #[arg(long)]
        smooth_only: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Pointless curves over one field.
    Scan {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        ell: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Largest prime power admitting a pointless curve.
    Qmax {
        #[arg(long)]
        ell: u32,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Compare a moment with its upper bound, or tabulate 2 - d/(2 + d)
    /// when no field is given.
    BoundCheck {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        ell: Option<u32>,
        #[arg(long)]
        k: Option<u32>,
        /// Number of table steps on [0, 1].
        #[arg(long, default_value_t = 10)]
        steps: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Exact moments over a range of (p, ell) and exponent fits.
    Sweep {
        #[arg(long, default_value_t = 11)]
        p_min: u64,
        #[arg(long, default_value_t = 600)]
        p_max: u64,
        #[arg(long, default_value_t = 3)]
        ell_min: u64,
        #[arg(long, default_value_t = 60)]
        ell_max: u64,
        #[arg(long, default_value_t = 10)]
        k_max: u32,
        #[arg(long, default_value_t = 0)]
        pair_cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 50_000_000)]
        budget: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Two independent interpolation systems for the k-th moment.
    Noclosed {
        #[arg(long)]
        k: u32,
        /// CSV pair sets (columns p, ell); chosen deterministically if absent.
        #[arg(long, requires = "set2")]
        set1: Option<PathBuf>,
        #[arg(long, requires = "set1")]
        set2: Option<PathBuf>,
        /// Also run an overdetermined least-squares fit on twice as many pairs.
        #[arg(long)]
        overdetermined: bool,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Serialize)]
struct BoundCheckReport {
    q: u64,
    ell: u32,
    k: u32,
    moment: String,
    bound: String,
    ratio: f64,
    holds: bool,
}

#[derive(Serialize)]
struct ExponentRow {
    delta: f64,
    exponent: f64,
}

#[derive(Serialize)]
struct NoClosedReport {
    square: FitVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    overdetermined: Option<LeastSquaresReport>,
}

fn open_output<'a>(output: &Output, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match &output.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(stdout),
    })
}

fn emit_json<T: Serialize>(value: &T, output: &Output, stdout: &mut dyn Write) -> Result<()> {
    let mut w = open_output(output, stdout)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn emit_csv<T: Serialize>(rows: &[T], output: &Output, stdout: &mut dyn Write) -> Result<()> {
    let w = open_output(output, stdout)?;
    let mut csv = csv::Writer::from_writer(w);
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}

fn emit<T: Serialize, R: Serialize>(
    value: &T,
    csv_rows: impl FnOnce() -> Vec<R>,
    output: &Output,
    stdout: &mut dyn Write,
) -> Result<()> {
    match output.format {
        Format::Json => emit_json(value, output, stdout),
        Format::Csv => emit_csv(&csv_rows(), output, stdout),
    }
}

#[derive(Serialize)]
struct CountRow {
    q: u32,
    ell: u32,
    #[serde(rename = "N")]
    n: u64,
    a: i64,
    method: String,
}

impl From<&CountResult> for CountRow {
    fn from(r: &CountResult) -> Self {
        CountRow {
            q: r.q,
            ell: r.ell,
            n: r.n,
            a: r.a,
            method: serde_json::to_value(r.method)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
        }
    }
}

#[derive(Serialize)]
struct MomentRow {
    q: u64,
    ell: u32,
    k: u32,
    value: String,
    method: String,
}

impl From<&MomentRecord> for MomentRow {
    fn from(r: &MomentRecord) -> Self {
        MomentRow {
            q: r.q,
            ell: r.ell,
            k: r.k,
            value: r.value.to_string(),
            method: serde_json::to_value(r.method)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
        }
    }
}

#[derive(Serialize)]
struct ScanRow {
    q: u64,
    p: u64,
    n: u32,
    ell: u32,
    #[serde(rename = "E_size")]
    e_size: u64,
    witness: String,
}

impl From<&ScanReport> for ScanRow {
    fn from(r: &ScanReport) -> Self {
        ScanRow {
            q: r.q,
            p: r.p,
            n: r.n,
            ell: r.ell,
            e_size: r.e_size,
            witness: r
                .witness
                .as_ref()
                .map(|(a, b)| format!("({a};{b})"))
                .unwrap_or_default(),
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::FieldInfo { field, output } => {
            let info = field.build()?.info();
            #[derive(Serialize)]
            struct Row {
                p: u32,
                n: u32,
                q: u32,
                modulus: String,
                generator: String,
            }
            let row = Row {
                p: info.p,
                n: info.n,
                q: info.q,
                modulus: format!("{:?}", info.modulus).replace(' ', ""),
                generator: info.generator.clone(),
            };
            emit(&info, || vec![row], &output, stdout)
        }
        Command::Count {
            field,
            ell,
            a,
            b,
            c,
            method,
            output,
        } => {
            let f = field.build()?;
            let id = CurveId::with_c(&f, ell, f.parse(&a)?, f.parse(&b)?, f.parse(&c)?)?;
            let charsum = || -> Result<CountResult> {
                let (na, nb) = id.normalized()?;
                a_charsum(&CurveId::new(&f, ell, na, nb)?)
            };
            let results = match method {
                CountMethodArg::Brute => vec![count_brute(&id)?],
                CountMethodArg::Charsum => vec![charsum()?],
                CountMethodArg::Both => {
                    let brute = count_brute(&id)?;
                    let fast = charsum()?;
                    if brute.n != fast.n {
                        return Err(Error::InvalidInput(format!(
                            "brute count {} disagrees with character sum {}",
                            brute.n, fast.n
                        )));
                    }
                    vec![brute, fast]
                }
            };
            let rows: Vec<CountRow> = results.iter().map(CountRow::from).collect();
            if results.len() == 1 {
                emit(&results[0], || rows, &output, stdout)
            } else {
                emit(&results, || rows, &output, stdout)
            }
        }
        Command::Moment {
            field,
            ell,
            k,
            method,
            output,
        } => {
            let record = match method {
                MomentMethodArg::Brute => moment_brute(&field.build()?, ell, k)?,
                MomentMethodArg::Geometric => moment_geometric(&field.build()?, ell, k)?,
                MomentMethodArg::Closed => {
                    let f = field.build()?;
                    crate::charsum::check_order(&f, ell)?;
                    moment_closed(f.q() as u64, ell, k)?
                }
            };
            emit(&record, || vec![MomentRow::from(&record)], &output, stdout)
        }
        Command::Fibre {
            field,
            ell,
            k,
            smooth_only,
            output,
        } => {
            let record = fibre_count(&field.build()?, ell, k, smooth_only)?;
            let row = (record.q, record.ell, record.k, record.smooth_only, record.count.to_string());
            emit(&record, || vec![row], &output, stdout)
        }
        Command::Scan { field, ell, output } => {
            let report = pointless_pairs(&field.build()?, ell)?;
            emit(&report, || vec![ScanRow::from(&report)], &output, stdout)
        }
        Command::Qmax {
            ell,
            workers,
            output,
        } => {
            let report = q_max(ell, workers)?;
            for row in &report.rows {
                writeln!(
                    stderr,
                    "q={} p={} n={} E_size={}{}",
                    row.q,
                    row.p,
                    row.n,
                    row.e_size,
                    if row.extension { " extension" } else { "" }
                )?;
            }
            match report.q_max {
                Some(q) => writeln!(stderr, "Q({ell}) = {q} (ceiling {})", report.bound)?,
                None => writeln!(stderr, "no pointless curve up to {}", report.bound)?,
            }
            emit(
                &report,
                || report.rows.iter().map(ScanRow::from).collect(),
                &output,
                stdout,
            )
        }
        Command::BoundCheck {
            field,
            ell,
            k,
            steps,
            output,
        } => {
            if field.q.is_none() && field.p.is_none() {
                let steps = steps.max(1);
                let table: Vec<ExponentRow> = (0..=steps)
                    .map(|i| {
                        let delta = i as f64 / steps as f64;
                        ExponentRow {
                            delta,
                            exponent: 2.0 - delta / (2.0 + delta),
                        }
                    })
                    .collect();
                return match output.format {
                    Format::Json => emit_json(&table, &output, stdout),
                    Format::Csv => emit_csv(&table, &output, stdout),
                };
            }
            let f = field.build()?;
            let ell = ell.ok_or_else(|| Error::InvalidInput("--ell is required".into()))?;
            let k = k.ok_or_else(|| Error::InvalidInput("--k is required".into()))?;
            let moment = moment_brute(&f, ell, k)?.value;
            let bound = moment_bound(f.q() as u64, ell, k)?;
            let report = BoundCheckReport {
                q: f.q() as u64,
                ell,
                k,
                moment: moment.to_string(),
                bound: bound.to_string(),
                ratio: bound_ratio(&moment, &bound),
                holds: num_rational::BigRational::from_integer(num_traits::Signed::abs(&moment))
                    <= bound,
            };
            match output.format {
                Format::Json => emit_json(&report, &output, stdout),
                Format::Csv => emit_csv(&[report], &output, stdout),
            }
        }
        Command::Sweep {
            p_min,
            p_max,
            ell_min,
            ell_max,
            k_max,
            pair_cap,
            seed,
            workers,
            budget,
            output,
        } => {
            let config = SweepConfig {
                p_min,
                p_max,
                ell_min,
                ell_max,
                k_max,
                pair_cap,
                seed,
                workers,
                work_budget: budget,
            };
            let pairs = config.pairs()?;
            writeln!(
                stderr,
                "sweep: {} pairs, estimated cost {} field elements",
                pairs.len(),
                config.cost()?
            )?;
            let fits = sweep_and_fit(&config)?;
            match output.format {
                Format::Json => emit_json(&fits, &output, stdout),
                Format::Csv => {
                    let w = open_output(&output, stdout)?;
                    write_csv(&fits, w)
                }
            }
        }
        Command::Noclosed {
            k,
            set1,
            set2,
            overdetermined,
            output,
        } => {
            let (a, b) = match (set1, set2) {
                (Some(s1), Some(s2)) => (read_pairs_csv(&s1)?, read_pairs_csv(&s2)?),
                _ => default_pair_sets(k)?,
            };
            let square = compare_systems(&build_system(k, &a)?, &build_system(k, &b)?)?;
            writeln!(stderr, "k={k}: verdict {:?}", square.verdict)?;
            let overdetermined = if overdetermined {
                let pairs = select_pairs(k, 2 * system_dimension(k), &Default::default())?;
                Some(least_squares_fit(k, &pairs)?)
            } else {
                None
            };
            let report = NoClosedReport {
                square,
                overdetermined,
            };
            match output.format {
                Format::Json => emit_json(&report, &output, stdout),
                Format::Csv => {
                    #[derive(Serialize)]
                    struct Row {
                        k: u32,
                        verdict: String,
                        max_abs_diff: f64,
                        threshold: f64,
                        condition_1: f64,
                        condition_2: f64,
                    }
                    let s = &report.square;
                    let row = Row {
                        k: s.k,
                        verdict: format!("{:?}", s.verdict),
                        max_abs_diff: s.max_abs_diff,
                        threshold: s.threshold,
                        condition_1: s.condition_estimates[0],
                        condition_2: s.condition_estimates[1],
                    };
                    emit_csv(&[row], &output, stdout)
                }
            }
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_command<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(stdout, "{}", e.render())
            } else {
                write!(stderr, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["fermat"];
        argv.extend_from_slice(args);
        let code = run_command(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(&[]).0, 2);
        assert_eq!(run(&["count", "--q", "11"]).0, 2);
        assert_eq!(run(&["count", "--q", "12", "--ell", "5", "--A", "1", "--B", "1"]).0, 2);
        assert_eq!(run(&["--help"]).0, 0);
    }

    #[test]
    fn negative_coefficients_accepted() {
        let (code, out, _) = run(&["count", "--q", "7", "--ell", "3", "--A", "1", "--B", "1", "--C", "-1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["N"], 9);
    }
}
