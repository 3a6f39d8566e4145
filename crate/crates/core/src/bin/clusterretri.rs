use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use clusterretri::align::{save_encoder, train_toy, TrainConfig};
use clusterretri::binarize::{hamming_rank_all, itq_encode, itq_fit, save_itq, DEFAULT_ITERS};
use clusterretri::eval::{distance_histogram, map_at_all, HistogramParams, DEFAULT_PREC_K};
use clusterretri::features::{
    l2_normalize, load_features, load_labels, save_codes, save_csv, save_features, save_labels,
    FeatureFormat,
};
use clusterretri::kmeans::{ari, nmi};
use clusterretri::pipeline::{self, PipelineConfig, DEFAULT_K, DEFAULT_LAMBDA, DEFAULT_M};
use clusterretri::quantizer::{load_codebook, save_codebook, Codebook};
use clusterretri::retrieval::{
    centroid_proxy_rank, load_rankings, rank_adc, rank_exact, rank_fused, rank_queries, save_rankings,
    RankedList,
};
use clusterretri::synth::{generate, two_domain, BenchSpec, TwoDomainSpec};
use clusterretri::{kmeans_fit, seed, Error, FeatureMatrix, KMeansParams, LabelList};

const FORMATS: &str = "\
File formats (all little-endian):
  CRFT  features/codes: \"CRFT\" | version u8 = 1 | dtype u8 (1 = f32, 2 = packed bits)
        | 2 reserved zero bytes | dims u32 | rows u64 | row-major payload.
        Packed bits are LSB-first in ceil(B/64) u64 words per row.
  CSV   comma-separated decimal reals, one row per line, no header.
  labels  UTF-8 text, one class name per line.
  CRCB  codebook: \"CRCB\" | version u8 | D u32 | M u16 | S u16 | K u32 | seed u64,
        then per subspace: width u32 | channel indices u32 | K×width f32 centroids.
  CRIQ  ITQ model: \"CRIQ\" | version u8 | D u32 | B u32 | iters u32 | seed u64
        | mean | projection D×B | rotation B×B (f64, row-major).
  CRTE  toy encoder: \"CRTE\" | version u8 | input u32 | hidden u32 (0 = none)
        | output u32 | f64 parameters.
  rankings  one line per query: <query>\\t<g1> <g2> ... (gallery indices).

Defaults: --k 32, --m 2, --lambda 0.2, --extra-subspaces 0, --itq-iters 50,
--bits = feature dimension, --seed 0, evaluation cutoff 100.
A --config file holds key=value lines (k, m, lambda, extra_subspaces, bits,
itq_iters, seed, normalize, mode, top); flags override it.

Exit codes: 0 success, 1 usage error, 2 data error.";

#[derive(Parser)]
#[command(name = "clusterretri", version, about = "Cluster-then-retrieve gallery ranking", after_help = FORMATS)]
struct Cli {
    /// key=value defaults for the run options; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct RunOpts {
    /// Clusters per subspace [default: 32]
    #[arg(long)]
    k: Option<usize>,
    /// Number of subspaces the channels are split into [default: 2]
    #[arg(long)]
    m: Option<usize>,
    /// Fusion weight of the original features, in [0, 1] [default: 0.2]
    #[arg(long)]
    lambda: Option<f64>,
    /// Additional subspaces cut from fresh permutations [default: 0]
    #[arg(long)]
    extra_subspaces: Option<usize>,
    /// ITQ code length [default: feature dimension]
    #[arg(long)]
    bits: Option<usize>,
    /// ITQ iterations [default: 50]
    #[arg(long)]
    itq_iters: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// L2-normalize feature rows after loading
    #[arg(long)]
    normalize: bool,
}

/// Run options with config-file values filled in and defaults applied.
struct Run {
    k: usize,
    m: usize,
    lambda: f64,
    extra_subspaces: usize,
    bits: Option<usize>,
    itq_iters: usize,
    seed: u64,
    normalize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Convert features between CSV and CRFT (chosen by file extension).
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Write a seeded synthetic benchmark (gallery/queries CRFT + labels).
    Generate {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 25)]
        classes: usize,
        #[arg(long, default_value_t = 40)]
        gallery_per_class: usize,
        #[arg(long, default_value_t = 8)]
        queries_per_class: usize,
        #[arg(long, default_value_t = 512)]
        dims: usize,
        #[arg(long, default_value_t = 4)]
        view_modes: usize,
        #[arg(long, default_value_t = 0.9)]
        mode_spread: f64,
        #[arg(long, default_value_t = 1.0)]
        domain_shift: f64,
        #[arg(long, default_value_t = 2.5)]
        noise: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Full-space K-Means; prints inertia and, with labels, NMI/ARI as JSON.
    Cluster {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Write one cluster id per line.
        #[arg(long)]
        assignments: Option<PathBuf>,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Fit the subspace codebook (CRCB), optionally the full-space proxy model.
    Build {
        #[arg(long)]
        gallery: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also fit full-space K-Means, saved as a single-subspace CRCB.
        #[arg(long)]
        proxy_out: Option<PathBuf>,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Rank the gallery for every query and write a rankings file.
    Retrieve {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        gallery: PathBuf,
        /// CRCB from `build` (fused, adc, binary) or `build --proxy-out` (proxy).
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Keep only the first N gallery indices per query.
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Binary mode: save the ITQ model (CRIQ).
        #[arg(long)]
        itq_out: Option<PathBuf>,
        /// Binary mode: save gallery codes (CRFT packed bits).
        #[arg(long)]
        codes_out: Option<PathBuf>,
        #[command(flatten)]
        run: RunOpts,
    },
    /// mAP@all, precision@k and per-class scores of a rankings file as JSON.
    Eval {
        #[arg(long)]
        rankings: PathBuf,
        #[arg(long)]
        gallery_labels: PathBuf,
        #[arg(long)]
        query_labels: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PREC_K)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the toy encoder on seeded two-domain data.
    Train {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda1: f64,
        #[arg(long, default_value_t = 0.1)]
        lambda3: f64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 16)]
        output_dim: usize,
        /// Width of a tanh hidden layer; linear encoder when absent.
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Module ablation and K sweep on a benchmark, written as CSV.
    Ablation {
        /// Benchmark directory from `generate`; generated in memory if absent.
        #[arg(long)]
        bench_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated K values for the sweep.
        #[arg(long, default_value = "4,8,16,32,64,128")]
        k_sweep: String,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Histogram of sampled positive/negative query–gallery distances (CSV).
    Histogram {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        query_labels: PathBuf,
        #[arg(long)]
        gallery: PathBuf,
        #[arg(long)]
        gallery_labels: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n_pos: usize,
        #[arg(long, default_value_t = 9000)]
        n_neg: usize,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunOpts,
    },
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq, Debug)]
enum Mode {
    Exact,
    Proxy,
    Adc,
    Fused,
    Binary,
}

enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read_config(path: &Path) -> CliResult<HashMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let mut out = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_owned());
    }
    Ok(out)
}

struct Config(HashMap<String, String>);

impl Config {
    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.0
            .get(key)
            .map(|v| v.parse().map_err(|_| usage(format!("config: invalid value {v:?} for {key}"))))
            .transpose()
    }

    fn resolve(&self, o: &RunOpts) -> CliResult<Run> {
        Ok(Run {
            k: o.k.or(self.get("k")?).unwrap_or(DEFAULT_K),
            m: o.m.or(self.get("m")?).unwrap_or(DEFAULT_M),
            lambda: o.lambda.or(self.get("lambda")?).unwrap_or(DEFAULT_LAMBDA),
            extra_subspaces: o.extra_subspaces.or(self.get("extra_subspaces")?).unwrap_or(0),
            bits: o.bits.or(self.get("bits")?),
            itq_iters: o.itq_iters.or(self.get("itq_iters")?).unwrap_or(DEFAULT_ITERS),
            seed: o.seed.or(self.get("seed")?).unwrap_or(0),
            normalize: o.normalize || self.get("normalize")?.unwrap_or(false),
        })
    }
}

impl Run {
    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            k: self.k,
            m: self.m,
            lambda: self.lambda,
            extra_subspaces: self.extra_subspaces,
            seed: self.seed,
        }
    }

    fn features(&self, path: &Path) -> CliResult<FeatureMatrix> {
        let m = load_features(path, FeatureFormat::from_path(path))?;
        if !self.normalize {
            return Ok(m);
        }
        let (m, report) = l2_normalize(&m);
        if report.has_warning() {
            log::warn!("{}: {} zero rows left unnormalized", path.display(), report.zero_rows.len());
        }
        Ok(m)
    }
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| {
        CliError::Data(Error::Io {
            path: path.to_owned(),
            source: e,
        })
    })
}

/// Prints a document, treating a closed pipe as success.
fn print_stdout(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn mean_average_precision(
    rankings: &[RankedList],
    gallery_labels: &LabelList,
    query_labels: &LabelList,
) -> CliResult<(f64, f64)> {
    let r = map_at_all(rankings, gallery_labels, query_labels, DEFAULT_PREC_K)?;
    Ok((r.map_at_all, r.prec_at_k))
}

fn retrieve(
    mode: Mode,
    run: &Run,
    queries: &FeatureMatrix,
    gallery: &FeatureMatrix,
    codebook: Option<Codebook>,
    itq_out: Option<&Path>,
    codes_out: Option<&Path>,
) -> CliResult<Vec<RankedList>> {
    let need = |cb: Option<Codebook>| cb.ok_or_else(|| usage(format!("mode {mode:?} requires --codebook")));
    if !(0.0..=1.0).contains(&run.lambda) {
        return Err(usage(format!("--lambda {} outside [0, 1]", run.lambda)));
    }
    Ok(match mode {
        Mode::Exact => rank_queries(queries, |q| rank_exact(q, gallery))?,
        Mode::Fused => {
            let built = pipeline::fuse_with(gallery, &need(codebook)?, run.lambda)?;
            rank_queries(queries, |q| rank_fused(q, &built.fused))?
        }
        Mode::Adc => {
            if run.lambda != 0.0 {
                return Err(usage(
                    "adc ranks the pure reconstruction; pass --lambda 0 (use --mode fused for lambda > 0)",
                ));
            }
            let cb = need(codebook)?;
            let codes = clusterretri::quantizer::encode(&cb, gallery)?;
            rank_queries(queries, |q| rank_adc(q, &cb, &codes))?
        }
        Mode::Proxy => {
            let model = need(codebook)?
                .to_kmeans()
                .map_err(|_| usage("proxy mode needs the full-space model written by build --proxy-out"))?;
            let asn = clusterretri::kmeans::assign(&model, gallery)?;
            rank_queries(queries, |q| centroid_proxy_rank(q, &model, &asn, gallery))?
        }
        Mode::Binary => {
            let bits = run.bits.unwrap_or(gallery.dims());
            // ITQ is trained on the fused gallery; lambda = 0 is the pure
            // reconstruction. Queries are encoded raw.
            let train = match codebook {
                Some(cb) => pipeline::fuse_with(gallery, &cb, run.lambda)?.fused.features,
                None => gallery.clone(),
            };
            let model = itq_fit(&train, bits, run.itq_iters, run.seed)?;
            let g = itq_encode(&model, &train)?;
            let q = itq_encode(&model, queries)?;
            if let Some(p) = itq_out {
                save_itq(&model, p)?;
            }
            if let Some(p) = codes_out {
                save_codes(&g, p)?;
            }
            hamming_rank_all(&q, &g)?
        }
    })
}

fn bench_files(dir: &Path) -> [PathBuf; 4] {
    ["gallery.crft", "gallery.labels", "queries.crft", "queries.labels"].map(|f| dir.join(f))
}

fn execute(cli: Cli) -> CliResult<()> {
    let config = Config(match &cli.config {
        Some(p) => read_config(p)?,
        None => HashMap::new(),
    });
    match cli.command {
        Command::Convert { input, output, run } => {
            let run = config.resolve(&run)?;
            let m = run.features(&input)?;
            match FeatureFormat::from_path(&output) {
                FeatureFormat::Csv => save_csv(&m, &output)?,
                FeatureFormat::Crft => save_features(&m, &output)?,
            }
        }
        Command::Generate {
            out_dir,
            classes,
            gallery_per_class,
            queries_per_class,
            dims,
            view_modes,
            mode_spread,
            domain_shift,
            noise,
            seed,
        } => {
            let spec = BenchSpec {
                classes,
                gallery_per_class,
                queries_per_class,
                dims,
                view_modes,
                mode_spread,
                domain_shift,
                noise,
                seed,
                ..Default::default()
            };
            let b = generate(&spec)?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            let [g, gl, q, ql] = bench_files(&out_dir);
            save_features(&b.gallery, g)?;
            save_labels(&b.gallery_labels, gl)?;
            save_features(&b.queries, q)?;
            save_labels(&b.query_labels, ql)?;
        }
        Command::Cluster {
            features,
            labels,
            assignments,
            run,
        } => {
            let run = config.resolve(&run)?;
            let x = run.features(&features)?;
            let (model, asn) = kmeans_fit(&x, &KMeansParams::new(run.k, run.seed))?;
            let mut report = serde_json::json!({
                "k": run.k,
                "inertia": model.inertia,
                "iterations": model.iterations_run,
            });
            if let Some(p) = labels {
                let l = load_labels(&p)?;
                l.check_pairs(&x)?;
                report["nmi"] = nmi(l.ids(), asn.ids())?.into();
                report["ari"] = ari(l.ids(), asn.ids())?.into();
            }
            if let Some(p) = assignments {
                let text: String = asn.ids().iter().map(|c| format!("{c}\n")).collect();
                write(&p, &text)?;
            }
            print_stdout(&serde_json::to_string_pretty(&report).expect("json"));
        }
        Command::Build {
            gallery,
            out,
            proxy_out,
            run,
        } => {
            let run = config.resolve(&run)?;
            let g = run.features(&gallery)?;
            let cb = pipeline::build_codebook(&g, &run.pipeline())?;
            save_codebook(&cb, &out)?;
            if let Some(p) = proxy_out {
                let params = KMeansParams::new(run.k, seed::derive(run.seed, seed::PROXY));
                let (model, _) = kmeans_fit(&g, &params)?;
                save_codebook(&Codebook::from_kmeans(&model), p)?;
            }
        }
        Command::Retrieve {
            queries,
            gallery,
            codebook,
            mode,
            top,
            out,
            itq_out,
            codes_out,
            run,
        } => {
            let mode = match mode {
                Some(m) => m,
                None => match config.get::<String>("mode")? {
                    Some(s) => Mode::from_str(&s, true).map_err(|_| usage(format!("config: unknown mode {s:?}")))?,
                    None => return Err(usage("--mode is required")),
                },
            };
            let top = top.or(config.get("top")?);
            let run = config.resolve(&run)?;
            let q = run.features(&queries)?;
            let g = run.features(&gallery)?;
            let cb = codebook.map(load_codebook).transpose()?;
            let lists = retrieve(mode, &run, &q, &g, cb, itq_out.as_deref(), codes_out.as_deref())?;
            save_rankings(&lists, top, &out)?;
        }
        Command::Eval {
            rankings,
            gallery_labels,
            query_labels,
            k,
            out,
        } => {
            let lists = load_rankings(&rankings)?;
            let gl = load_labels(&gallery_labels)?;
            let ql = load_labels(&query_labels)?;
            let json = map_at_all(&lists, &gl, &ql, k)?.to_json();
            match out {
                Some(p) => write(&p, &(json + "\n"))?,
                None => print_stdout(&json),
            }
        }
        Command::Train {
            out_dir,
            lambda1,
            lambda3,
            epochs,
            lr,
            batch_size,
            output_dim,
            hidden,
            seed,
        } => {
            let data = two_domain(&TwoDomainSpec {
                seed,
                ..Default::default()
            })?;
            let cfg = TrainConfig {
                lambda1,
                lambda3,
                learning_rate: lr,
                epochs,
                batch_size,
                seed,
                output_dim,
                hidden,
            };
            let (enc, trace) = train_toy(&data, &cfg)?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            save_encoder(&enc, out_dir.join("encoder.crte"))?;
            write(&out_dir.join("trace.csv"), &trace.to_csv())?;
        }
        Command::Ablation {
            bench_dir,
            out,
            k_sweep,
            run,
        } => {
            let run = config.resolve(&run)?;
            let ks = k_sweep
                .split(',')
                .map(|k| k.trim().parse::<usize>().map_err(|_| usage(format!("--k-sweep: bad value {k:?}"))))
                .collect::<CliResult<Vec<_>>>()?;
            let (g, gl, q, ql) = match bench_dir {
                Some(dir) => {
                    let [g, gl, q, ql] = bench_files(&dir);
                    (run.features(&g)?, load_labels(gl)?, run.features(&q)?, load_labels(ql)?)
                }
                None => {
                    let b = generate(&BenchSpec::default())?;
                    (b.gallery, b.gallery_labels, b.queries, b.query_labels)
                }
            };
            write(&out, &ablation(&run, &ks, &g, &gl, &q, &ql)?)?;
        }
        Command::Histogram {
            queries,
            query_labels,
            gallery,
            gallery_labels,
            n_pos,
            n_neg,
            bins,
            out,
            run,
        } => {
            let run = config.resolve(&run)?;
            let h = distance_histogram(
                &run.features(&queries)?,
                &load_labels(&query_labels)?,
                &run.features(&gallery)?,
                &load_labels(&gallery_labels)?,
                &HistogramParams {
                    n_pos,
                    n_neg,
                    bins,
                    seed: run.seed,
                },
            )?;
            write(&out, &h.to_csv())?;
        }
    }
    Ok(())
}

/// One row per module combination (plus the fusion endpoints) and one per
/// swept K; columns name the enabled modules and the resulting scores.
fn ablation(
    run: &Run,
    ks: &[usize],
    g: &FeatureMatrix,
    gl: &LabelList,
    q: &FeatureMatrix,
    ql: &LabelList,
) -> CliResult<String> {
    let mut rows: Vec<(String, bool, bool, bool, usize, usize, f64)> = vec![
        ("baseline".into(), false, false, false, 0, 0, 1.0),
        ("kmeans".into(), true, false, false, run.k, 1, 0.0),
        ("kmeans+fuse".into(), true, true, false, run.k, 1, run.lambda),
        ("kmeans+subspace".into(), true, false, true, run.k, run.m, 0.0),
        ("kmeans+fuse+subspace".into(), true, true, true, run.k, run.m, run.lambda),
        ("endpoint_lambda1".into(), true, true, true, run.k, run.m, 1.0),
        ("endpoint_lambda0".into(), true, true, true, run.k, run.m, 0.0),
    ];
    rows.extend(ks.iter().map(|&k| (format!("k_sweep_{k}"), true, true, true, k, run.m, run.lambda)));

    let mut out = String::from("name,kmeans,fuse,subspace,k,m,lambda,map_at_all,prec_at_100\n");
    for (name, km, fuse, sub, k, m, lambda) in rows {
        let lists = if km {
            let cfg = PipelineConfig {
                k,
                m,
                lambda,
                extra_subspaces: run.extra_subspaces,
                seed: run.seed,
            };
            let built = pipeline::build(g, &cfg)?;
            rank_queries(q, |x| rank_fused(x, &built.fused))?
        } else {
            rank_queries(q, |x| rank_exact(x, g))?
        };
        let (map, prec) = mean_average_precision(&lists, gl, ql)?;
        log::info!("{name}: mAP {map:.4}");
        writeln!(out, "{name},{km},{fuse},{sub},{k},{m},{lambda},{map},{prec}").unwrap();
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
