use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use sns_core::bench::{bench_baseline_lepage, bench_baseline_mw, bench_sns, BenchResult};
use sns_core::calibrate::{
    calibrate_limit, CalibrationTarget, ChartTemplate, InputDistribution, StreamModel,
};
use sns_core::chart::{ChartPoint, ChartSpec, CusumSide};
use sns_core::validate::{
    default_grid, mean_ecdf_study, path_gof_study, score_sd_table, TABLE_INDICES,
};
use sns_core::{ScorerSpec, ScoringConvention, VariantSpec};

use crate::plot;
use crate::stream::RowReader;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or incompatible configuration (exit 1).
    Usage(String),
    /// Bad data or I/O failure (exit 2).
    Data(String),
}

#[derive(Parser)]
#[command(
    name = "sns",
    version,
    about = "Sequential normal scores: streaming scoring, control charts, calibration"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transform a stream from stdin into sequential normal scores (CSV to stdout)
    Score {
        #[command(flatten)]
        scorer: ScorerArgs,
    },
    /// Score a stream and run a control chart over the scores
    Chart {
        #[command(flatten)]
        scorer: ScorerArgs,
        #[command(flatten)]
        chart: ChartArgs,
        /// Write the statistic trajectory as an SVG file
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Search the control limit that achieves a target in-control ARL
    Calibrate {
        #[command(flatten)]
        chart: ChartArgs,
        #[arg(long)]
        m: Option<usize>,
        /// Target in-control average run length
        #[arg(long = "target-arl")]
        target_arl: f64,
        /// Relative tolerance on the achieved ARL
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        replications: usize,
        /// Run-length truncation cap (default: 50x the target)
        #[arg(long)]
        cap: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stream model: exact-normal | sns
        #[arg(long, default_value = "exact-normal")]
        stream: String,
        /// Input distribution for --stream sns
        #[arg(long, default_value = "normal")]
        distribution: String,
    },
    /// Regenerate the score-sd reference table (deterministic)
    Table1 {
        /// Accepted for interface uniformity; the table is deterministic
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Finite-sample distribution studies (CSV to stdout)
    DistStudy {
        /// mean-ecdf | path-gof
        #[arg(long)]
        study: String,
        /// Stream length for mean-ecdf
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        replications: usize,
        /// Checkpoints for path-gof, comma separated
        #[arg(long, default_value = "100,300,1000,3000")]
        checkpoints: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Timing harness (CSV to stdout)
    Bench {
        /// Comma-separated subset of: sns, lepage, mw
        #[arg(long, default_value = "sns,lepage")]
        methods: String,
        /// Comma-separated stream lengths (scientific notation accepted)
        #[arg(long = "n", default_value = "1e3,1e4")]
        lengths: String,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Window size for the streaming scorer
        #[arg(long)]
        window: Option<usize>,
    },
}

#[derive(Args)]
struct ScorerArgs {
    /// individual | batched | conditional-individual | conditional-batched
    #[arg(long, default_value = "individual")]
    variant: String,
    /// Batch (subgroup) size, batched variants only
    #[arg(long)]
    m: Option<usize>,
    /// Known quantile, conditional variants only
    #[arg(long)]
    theta: Option<f64>,
    /// Known F(theta), conditional variants only
    #[arg(long = "f-theta")]
    f_theta: Option<f64>,
    /// rankit | vdw | blom | tukey | adaptive-b | fixed:<a>
    #[arg(long, default_value = "rankit")]
    convention: String,
    /// Sliding window over the comparison set
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct ChartArgs {
    /// cusum-mean | cusum-var | ewma
    #[arg(long)]
    chart: String,
    /// upper | lower | both (mean CUSUM)
    #[arg(long, default_value = "upper")]
    side: String,
    /// CUSUM allowance / reference value
    #[arg(long)]
    k: Option<f64>,
    /// CUSUM decision interval (negative for cusum-var)
    #[arg(long)]
    h: Option<f64>,
    /// EWMA smoothing
    #[arg(long)]
    lambda: Option<f64>,
    /// EWMA limit multiplier
    #[arg(long)]
    rho: Option<f64>,
}

impl ScorerArgs {
    fn to_spec(&self) -> Result<ScorerSpec, CliError> {
        let conv: ScoringConvention = self
            .convention
            .parse()
            .map_err(|e| CliError::Usage(format!("{e}")))?;
        let need_m = || {
            self.m.ok_or_else(|| {
                CliError::Usage("batched variants require --m".into())
            })
        };
        let need_cond = || -> Result<(f64, f64), CliError> {
            match (self.theta, self.f_theta) {
                (Some(t), Some(f)) if f > 0.0 && f < 1.0 => Ok((t, f)),
                (Some(_), Some(f)) => Err(CliError::Usage(format!(
                    "--f-theta must lie strictly inside (0, 1), got {f}"
                ))),
                _ => Err(CliError::Usage(
                    "conditional variants require --theta and --f-theta".into(),
                )),
            }
        };
        let variant = match self.variant.as_str() {
            "individual" => VariantSpec::Individual,
            "batched" => VariantSpec::Batched { m: need_m()? },
            "conditional-individual" => {
                let (theta, f_theta) = need_cond()?;
                VariantSpec::ConditionalIndividual { theta, f_theta }
            }
            "conditional-batched" => {
                let (theta, f_theta) = need_cond()?;
                VariantSpec::ConditionalBatched {
                    m: need_m()?,
                    theta,
                    f_theta,
                }
            }
            other => {
                return Err(CliError::Usage(format!("unknown variant `{other}`")));
            }
        };
        Ok(ScorerSpec {
            variant,
            convention: conv,
            window: self.window,
        })
    }
}

impl ChartArgs {
    fn need(&self, what: Option<f64>, name: &str) -> Result<f64, CliError> {
        what.ok_or_else(|| CliError::Usage(format!("--chart {} requires --{name}", self.chart)))
    }

    fn side(&self) -> Result<CusumSide, CliError> {
        match self.side.as_str() {
            "upper" => Ok(CusumSide::Upper),
            "lower" => Ok(CusumSide::Lower),
            "both" => Ok(CusumSide::TwoSided),
            other => Err(CliError::Usage(format!("unknown side `{other}`"))),
        }
    }

    /// Full chart spec; `m` is the subgroup size for subgroup charts.
    fn to_spec(&self, m: usize) -> Result<ChartSpec, CliError> {
        match self.chart.as_str() {
            "cusum-mean" => Ok(ChartSpec::CusumMean {
                side: self.side()?,
                k: self.need(self.k, "k")?,
                h: self.need(self.h, "h")?,
            }),
            "cusum-var" => Ok(ChartSpec::CusumVariance {
                k: self.need(self.k, "k")?,
                h: self.need(self.h, "h")?,
                m,
            }),
            "ewma" => Ok(ChartSpec::Ewma {
                lambda: self.need(self.lambda, "lambda")?,
                rho: self.need(self.rho, "rho")?,
                m,
            }),
            other => Err(CliError::Usage(format!("unknown chart `{other}`"))),
        }
    }

    fn to_template(&self, m: usize) -> Result<ChartTemplate, CliError> {
        match self.chart.as_str() {
            "cusum-mean" => Ok(ChartTemplate::CusumMean {
                side: self.side()?,
                k: self.need(self.k, "k")?,
            }),
            "cusum-var" => Ok(ChartTemplate::CusumVariance {
                k: self.need(self.k, "k")?,
                m,
            }),
            "ewma" => Ok(ChartTemplate::Ewma {
                lambda: self.need(self.lambda, "lambda")?,
                m,
            }),
            other => Err(CliError::Usage(format!("unknown chart `{other}`"))),
        }
    }
}

const HEADER: &str = "index,raw,rank,p,z,chart_statistic,limit,signal";

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match cli.command {
        Command::Score { scorer } => cmd_score(&scorer, &mut out),
        Command::Chart {
            scorer,
            chart,
            plot,
        } => cmd_chart(&scorer, &chart, plot.as_deref(), &mut out),
        Command::Calibrate {
            chart,
            m,
            target_arl,
            tol,
            replications,
            cap,
            seed,
            stream,
            distribution,
        } => cmd_calibrate(
            &chart,
            m,
            target_arl,
            tol,
            replications,
            cap,
            seed,
            &stream,
            &distribution,
            &mut out,
        ),
        Command::Table1 { seed: _ } => cmd_table1(&mut out),
        Command::DistStudy {
            study,
            n,
            replications,
            checkpoints,
            seed,
        } => cmd_dist_study(&study, n, replications, &checkpoints, seed, &mut out),
        Command::Bench {
            methods,
            lengths,
            repeats,
            seed,
            window,
        } => cmd_bench(&methods, &lengths, repeats, seed, window, &mut out),
    }
}

fn write_line(out: &mut impl Write, line: &str) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::Data(format!("write failed: {e}")))
}

fn cmd_score(scorer_args: &ScorerArgs, out: &mut impl Write) -> Result<(), CliError> {
    let spec = scorer_args.to_spec()?;
    let mut scorer = spec
        .build()
        .map_err(|e| CliError::Usage(format!("{e}")))?;
    let width = scorer.step_width();

    write_line(out, HEADER)?;
    let stdin = io::stdin();
    for row in RowReader::new(stdin.lock(), width) {
        let row = row?;
        let scored = scorer
            .score_step(&row)
            .map_err(|e| CliError::Data(format!("{e}")))?;
        for sv in scored {
            write_line(
                out,
                &format!(
                    "{},{},{},{},{},,,",
                    sv.index,
                    fmt6(sv.raw),
                    fmt6(sv.rank),
                    fmt6(sv.p.get()),
                    fmt6(sv.z.get())
                ),
            )?;
        }
    }
    Ok(())
}

fn cmd_chart(
    scorer_args: &ScorerArgs,
    chart_args: &ChartArgs,
    plot_path: Option<&std::path::Path>,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let spec = scorer_args.to_spec()?;
    let mut scorer = spec
        .build()
        .map_err(|e| CliError::Usage(format!("{e}")))?;
    let width = scorer.step_width();
    let chart_spec = chart_args.to_spec(width)?;
    if chart_spec.step_width() != width {
        return Err(CliError::Usage(format!(
            "--chart {} consumes {} score(s) per step but the scorer produces {width}",
            chart_args.chart,
            chart_spec.step_width()
        )));
    }
    let mut engine = chart_spec
        .build()
        .map_err(|e| CliError::Usage(format!("{e}")))?;

    write_line(out, HEADER)?;
    let mut path: Vec<ChartPoint> = Vec::new();
    let stdin = io::stdin();
    let mut zbuf = vec![0.0f64; width];
    for row in RowReader::new(stdin.lock(), width) {
        let row = row?;
        let scored = scorer
            .score_step(&row)
            .map_err(|e| CliError::Data(format!("{e}")))?;
        for (z, sv) in zbuf.iter_mut().zip(&scored) {
            *z = sv.z.get();
        }
        let pt = engine
            .step(&zbuf)
            .map_err(|e| CliError::Data(format!("{e}")))?;
        for sv in &scored {
            write_line(
                out,
                &format!(
                    "{},{},{},{},{},{},{},{}",
                    sv.index,
                    fmt6(sv.raw),
                    fmt6(sv.rank),
                    fmt6(sv.p.get()),
                    fmt6(sv.z.get()),
                    fmt6(pt.value),
                    fmt6(pt.limit),
                    u8::from(pt.signal)
                ),
            )?;
        }
        path.push(pt);
    }

    match engine.first_signal_step() {
        Some(step) => {
            write_line(out, &format!("# signal at step {step}"))?;
            if let Some(cp) = engine.change_point() {
                write_line(out, &format!("# change point at step {cp}"))?;
            }
        }
        None => write_line(out, "# no signal")?,
    }

    if let Some(p) = plot_path {
        plot::write_svg(&path, p)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_calibrate(
    chart_args: &ChartArgs,
    m: Option<usize>,
    target_arl: f64,
    tol: f64,
    replications: usize,
    cap: Option<u64>,
    seed: u64,
    stream: &str,
    distribution: &str,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let m = m.unwrap_or(1);
    let template = chart_args.to_template(m)?;
    let stream = match stream {
        "exact-normal" => StreamModel::ExactNormal,
        "sns" => {
            let dist: InputDistribution = distribution
                .parse()
                .map_err(|e| CliError::Usage(format!("{e}")))?;
            let variant = if m > 1 {
                VariantSpec::Batched { m }
            } else {
                VariantSpec::Individual
            };
            StreamModel::Sns {
                distribution: dist,
                scorer: ScorerSpec {
                    variant,
                    convention: ScoringConvention::Rankit,
                    window: None,
                },
            }
        }
        other => {
            return Err(CliError::Usage(format!("unknown stream model `{other}`")));
        }
    };

    let mut target = CalibrationTarget::new(template, target_arl, stream)
        .map_err(|e| CliError::Usage(format!("{e}")))?;
    target.tolerance = tol;
    target.replications = replications;
    if let Some(c) = cap {
        target.cap = c;
    }

    let (limit, est) =
        calibrate_limit(&target, seed).map_err(|e| CliError::Data(format!("{e}")))?;
    write_line(out, "limit,arl,std_error,replications,censored_fraction")?;
    write_line(
        out,
        &format!(
            "{},{},{},{},{}",
            fmt6(limit),
            fmt6(est.mean_rl),
            fmt6(est.std_error),
            est.replications,
            fmt6(est.censored_fraction)
        ),
    )?;
    Ok(())
}

fn cmd_table1(out: &mut impl Write) -> Result<(), CliError> {
    let rows = score_sd_table(&TABLE_INDICES).map_err(|e| CliError::Data(format!("{e}")))?;
    write_line(out, "i,sd_b1,b_for_unit_sd,b_approx,sd_with_b_approx")?;
    for r in rows {
        write_line(
            out,
            &format!(
                "{},{:.3},{:.3},{:.3},{:.3}",
                r.i, r.sd_b1, r.b_for_unit_sd, r.b_approx, r.sd_with_b_approx
            ),
        )?;
    }
    Ok(())
}

fn cmd_dist_study(
    study: &str,
    n: usize,
    replications: usize,
    checkpoints: &str,
    seed: u64,
    out: &mut impl Write,
) -> Result<(), CliError> {
    match study {
        "mean-ecdf" => {
            let grid = default_grid();
            let s = mean_ecdf_study(n, replications, &grid, seed)
                .map_err(|e| CliError::Usage(format!("{e}")))?;
            write_line(out, "x,mean_ecdf,phi")?;
            for (x, e) in s.grid.iter().zip(&s.mean_ecdf) {
                let p = sns_core::phi(*x).map_err(|e| CliError::Data(format!("{e}")))?;
                write_line(out, &format!("{},{},{}", fmt6(*x), fmt6(*e), fmt6(p)))?;
            }
            write_line(out, &format!("# max_abs_dev={}", fmt6(s.max_abs_dev)))?;
        }
        "path-gof" => {
            let cps: Vec<usize> = checkpoints
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| CliError::Usage(format!("bad checkpoint `{t}`")))
                })
                .collect::<Result<_, _>>()?;
            let results =
                path_gof_study(&cps, seed).map_err(|e| CliError::Usage(format!("{e}")))?;
            write_line(out, "n,a2,p_value")?;
            for (cp, r) in cps.iter().zip(&results) {
                write_line(
                    out,
                    &format!("{},{},{}", cp, fmt6(r.statistic), fmt6(r.p_value)),
                )?;
            }
        }
        other => {
            return Err(CliError::Usage(format!("unknown study `{other}`")));
        }
    }
    Ok(())
}

fn cmd_bench(
    methods: &str,
    lengths: &str,
    repeats: usize,
    seed: u64,
    window: Option<usize>,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let ns: Vec<usize> = lengths
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 1.0)
                .map(|v| v as usize)
                .ok_or_else(|| CliError::Usage(format!("bad stream length `{t}`")))
        })
        .collect::<Result<_, _>>()?;

    write_line(out, "method,n,median_seconds,repeats")?;
    for method in methods.split(',').map(str::trim) {
        for &n in &ns {
            let res: BenchResult = match method {
                "sns" => bench_sns(n, repeats, seed, window),
                "lepage" => bench_baseline_lepage(n, repeats, seed),
                "mw" => bench_baseline_mw(n, repeats, seed),
                other => {
                    return Err(CliError::Usage(format!("unknown method `{other}`")));
                }
            }
            .map_err(|e| CliError::Usage(format!("{e}")))?;
            let secs = match res.median_secs {
                Some(s) => format!("{s:.9}"),
                None => "NA".to_string(),
            };
            write_line(
                out,
                &format!("{},{},{},{}", res.method, res.n, secs, res.repeats),
            )?;
        }
    }
    Ok(())
}
