//! Command-line front end: structural graph summaries, stabilized homology
//! decompositions, surgery-triangle verification, and Poincaré-series
//! roundtrips, all emitted as deterministic structured-text documents.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use latticehom::charlat::{self, CharVector};
use latticehom::complex::TruncationSpec;
use latticehom::exactseq::{self, TriangleInstance};
use latticehom::graph::{classify, parse_graph, PlumbingGraph};
use latticehom::homology::{self, HomologyError, SummandKind};
use latticehom::matrix::rat_to_string;
use latticehom::series::{self, ModuleShape};

const EXIT_PARSE: u8 = 2;
const EXIT_RADIUS: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;
const EXIT_TRIANGLE: u8 = 5;
const EXIT_SERIES: u8 = 6;

const CACHE_SCHEMA: &str = "latticehom-cache-v1";

#[derive(Parser)]
#[command(name = "latticehom", about = "Lattice homology of plumbing forests")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Structural summary of a plumbing forest file
    Info(InfoArgs),
    /// Stabilized homology decomposition per SpinC class
    Homology(HomologyArgs),
    /// Surgery-triangle verification at a distinguished vertex
    Triangle(TriangleArgs),
    /// Poincaré series table and reconstruction roundtrip
    Series(SeriesArgs),
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HomologyArgs {
    #[arg(long)]
    graph: PathBuf,
    /// SpinC selector: "all" or an explicit representative "K=c1,c2,..."
    #[arg(long, default_value = "all")]
    spinc: String,
    /// truncation exponent n of F[U]/U^n
    #[arg(long, default_value_t = 4)]
    un: u32,
    /// starting box radius
    #[arg(long, default_value_t = 1)]
    radius: i64,
    #[arg(long, default_value_t = 8)]
    radius_cap: i64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// cache directory (default: LATTICEHOM_CACHE)
    #[arg(long)]
    cache: Option<PathBuf>,
    /// worker pool bound; output assembly is single-threaded either way
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct TriangleArgs {
    #[arg(long)]
    graph: PathBuf,
    /// id of the distinguished vertex
    #[arg(long)]
    vertex: String,
    #[arg(long, default_value_t = 2)]
    un: u32,
    /// lattice box radius away from the vertex
    #[arg(long, default_value_t = 1)]
    kradius: i64,
    /// evaluation window half-width at the vertex, in steps of 2
    #[arg(long, default_value_t = 8)]
    pradius: i64,
    /// stabilization cap for the rank consistency check
    #[arg(long, default_value_t = 6)]
    radius_cap: i64,
    /// recorded in the report header; the checks are deterministic
    #[arg(long)]
    seed: Option<u64>,
    /// negative control: perturb the bump map so verification must fail
    #[arg(long, default_value_t = false)]
    corrupt: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SeriesArgs {
    #[arg(long, required_unless_present = "decomposition", conflicts_with = "decomposition")]
    graph: Option<PathBuf>,
    /// synthetic input: a file of "summand kind=<tower|finite:k> top=<p/q> mult=<m>" lines
    #[arg(long)]
    decomposition: Option<PathBuf>,
    #[arg(long, default_value = "all")]
    spinc: String,
    /// largest truncation N; the series is tabulated for n = 1..N
    #[arg(long, default_value_t = 5)]
    un: u32,
    #[arg(long, default_value_t = 1)]
    radius: i64,
    #[arg(long, default_value_t = 8)]
    radius_cap: i64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure carrying the scripted exit code and a message for stderr.
struct Failure(u8, String);

type RunResult = Result<String, Failure>;

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure(code, msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (doc, out) = match &cli.cmd {
        Cmd::Info(a) => (run_info(a), a.out.clone()),
        Cmd::Homology(a) => (run_homology(a), a.out.clone()),
        Cmd::Triangle(a) => (run_triangle(a), a.out.clone()),
        Cmd::Series(a) => (run_series(a), a.out.clone()),
    };
    match doc {
        Ok(text) => match emit(&text, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("latticehom: {e}");
                ExitCode::from(EXIT_PARSE)
            }
        },
        Err(Failure(code, msg)) => {
            eprintln!("latticehom: {msg}");
            ExitCode::from(code)
        }
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<(PlumbingGraph, String), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    let g = parse_graph(&text)
        .map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    Ok((g, text))
}

fn short_hash(input: &str) -> String {
    let digest = Sha256::digest(input.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn spinc_display(k: &[i64]) -> String {
    let parts: Vec<String> = k.iter().map(|c| c.to_string()).collect();
    format!("K={}", parts.join(","))
}

/// Resolve the --spinc selector into representatives: "all" enumerates the
/// classes (finite only when det M != 0), an explicit vector is validated
/// as characteristic.
fn resolve_spinc(g: &PlumbingGraph, selector: &str) -> Result<Vec<CharVector>, Failure> {
    if selector == "all" {
        let classes = charlat::enumerate_spinc(g).map_err(|e| match e {
            charlat::CharlatError::Degenerate => fail(
                EXIT_DEGENERATE,
                "degenerate intersection form: pass an explicit --spinc K=... representative",
            ),
            other => fail(EXIT_PARSE, other.to_string()),
        })?;
        return Ok(classes.into_iter().map(|c| c.representative).collect());
    }
    let body = selector
        .strip_prefix("K=")
        .ok_or_else(|| fail(EXIT_PARSE, format!("bad --spinc selector {selector:?}")))?;
    let k: Vec<i64> = body
        .split(',')
        .map(|s| s.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|e| fail(EXIT_PARSE, format!("bad --spinc vector: {e}")))?;
    if k.len() != g.n() {
        return Err(fail(
            EXIT_PARSE,
            format!("--spinc has {} entries, graph has {} vertices", k.len(), g.n()),
        ));
    }
    charlat::is_characteristic(g, &k)
        .map_err(|e| fail(EXIT_PARSE, format!("--spinc is not characteristic: {e}")))?;
    Ok(vec![k])
}

fn run_info(a: &InfoArgs) -> RunResult {
    let (g, text) = load_graph(&a.graph)?;
    let m = g.intersection_matrix();
    let (sigma, chi) = g.signature_chi();
    let cls = classify(&g, 2);
    let opt_list = |xs: Option<Vec<i128>>| match xs {
        Some(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        None => "-".into(),
    };
    let mut s = String::new();
    let _ = writeln!(s, "latticehom info v1");
    let _ = writeln!(s, "graph-sha256 {}", short_hash(&text));
    let _ = writeln!(s, "vertices {}", g.n());
    let _ = writeln!(s, "edges {}", g.edges().len());
    let _ = writeln!(s, "sigma {sigma}");
    let _ = writeln!(s, "chi {chi}");
    let _ = writeln!(s, "det {}", m.det());
    let _ = writeln!(s, "negative-definite {}", cls.negative_definite);
    let bad: Vec<String> = cls.bad_vertices.iter().cloned().collect();
    let _ = writeln!(s, "bad-vertices {}", if bad.is_empty() { "-".into() } else { bad.join(",") });
    let _ = writeln!(s, "fundamental-cycle {}", opt_list(cls.fundamental_cycle));
    let _ = writeln!(
        s,
        "rational {}",
        cls.rational.map_or("-".into(), |b| b.to_string())
    );
    let _ = writeln!(
        s,
        "type-upper-bound {}",
        cls.type_upper_bound.map_or("-".into(), |k| k.to_string())
    );
    Ok(s)
}

fn render_decomposition(s: &mut String, dec: &homology::ModuleDecomposition) {
    let _ = writeln!(s, "summands {}", dec.summands.len());
    for (&(delta, top, kind), &mult) in &dec.summands {
        let kind = match kind {
            SummandKind::Tower => "tower".into(),
            SummandKind::Finite(k) => format!("finite:{k}"),
        };
        let _ = writeln!(
            s,
            "summand delta={delta} kind={kind} top={} mult={mult}",
            rat_to_string(&top)
        );
    }
}

fn homology_error(e: HomologyError) -> Failure {
    match e {
        HomologyError::RadiusCapExceeded { cap } => {
            fail(EXIT_RADIUS, format!("no stabilization up to radius {cap}"))
        }
        HomologyError::Charlat(charlat::CharlatError::Degenerate) => fail(
            EXIT_DEGENERATE,
            "degenerate intersection form: pass an explicit --spinc K=... representative",
        ),
        other => fail(EXIT_PARSE, other.to_string()),
    }
}

/// One homology block per SpinC class, served from the cache when the
/// (graph content, class, n, radii) key is present.
fn run_homology(a: &HomologyArgs) -> RunResult {
    if a.un < 1 || a.radius < 1 || a.radius_cap < a.radius || a.jobs < 1 {
        return Err(fail(EXIT_PARSE, "need --un >= 1, --radius-cap >= --radius >= 1, --jobs >= 1"));
    }
    let (g, text) = load_graph(&a.graph)?;
    let reps = resolve_spinc(&g, &a.spinc)?;
    let cache_dir = a
        .cache
        .clone()
        .or_else(|| std::env::var_os("LATTICEHOM_CACHE").map(PathBuf::from));

    let mut s = String::new();
    let _ = writeln!(s, "latticehom homology v1");
    let _ = writeln!(s, "graph-sha256 {}", short_hash(&text));
    let _ = writeln!(s, "n {}", a.un);
    let _ = writeln!(s, "radius-start {}", a.radius);
    let _ = writeln!(s, "radius-cap {}", a.radius_cap);
    for k in &reps {
        let key = format!(
            "{CACHE_SCHEMA}\nhomology\n{}\n{}\nn={} r={} cap={}\n",
            short_hash(&text),
            spinc_display(k),
            a.un,
            a.radius,
            a.radius_cap
        );
        let block = cached(cache_dir.as_deref(), &key, || {
            let res = homology::stabilize(&g, k, a.un, a.radius, a.radius_cap)
                .map_err(homology_error)?;
            let mut b = String::new();
            let _ = writeln!(b, "spinc {}", spinc_display(k));
            let _ = writeln!(b, "radii {},{}", res.radii.0, res.radii.1);
            let _ = writeln!(b, "heuristic {}", res.heuristic);
            render_decomposition(&mut b, &res.decomposition);
            Ok(b)
        })?;
        let _ = writeln!(s);
        s.push_str(&block);
    }
    Ok(s)
}

/// Look up `key` in the cache directory, computing and storing on a miss.
/// The key embeds the schema tag, so a format bump invalidates every entry.
fn cached(
    dir: Option<&Path>,
    key: &str,
    compute: impl FnOnce() -> RunResult,
) -> RunResult {
    let Some(dir) = dir else { return compute() };
    let digest = Sha256::digest(key.as_bytes());
    let name: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let path = dir.join(format!("{name}.txt"));
    if let Ok(hit) = std::fs::read_to_string(&path) {
        return Ok(hit);
    }
    let block = compute()?;
    let _ = std::fs::create_dir_all(dir);
    let _ = std::fs::write(&path, &block);
    Ok(block)
}

fn run_triangle(a: &TriangleArgs) -> RunResult {
    if a.un < 1 || a.kradius < 1 || a.pradius < 1 {
        return Err(fail(EXIT_PARSE, "need --un, --kradius, --pradius >= 1"));
    }
    let (g, text) = load_graph(&a.graph)?;
    let v = g
        .vertex_index(&a.vertex)
        .map_err(|e| fail(EXIT_PARSE, e.to_string()))?;
    let inst = TriangleInstance::new(&g, v, a.kradius, a.pradius, TruncationSpec::new(a.un))
        .map_err(|e| fail(EXIT_PARSE, e.to_string()))?;
    let phi = inst.verify_phi();
    let psi = if a.corrupt { inst.verify_psi_corrupted() } else { inst.verify_psi() };
    let pmap = inst.verify_p();
    let compose = inst.psi_phi_zero();
    let factor = inst.psi_factorization();
    let ses = inst.verify_short_exact_hat();
    let les = exactseq::les_rank_check(&g, v, a.un.min(3), a.radius_cap)
        .map_err(|e| fail(EXIT_PARSE, e.to_string()))?;
    let all_ok = phi.ok()
        && psi.ok()
        && pmap.ok()
        && compose.ok()
        && factor.ok()
        && ses.ok()
        && les.ok();

    let mut s = String::new();
    let _ = writeln!(s, "latticehom triangle v1");
    let _ = writeln!(s, "graph-sha256 {}", short_hash(&text));
    let _ = writeln!(s, "vertex {}", a.vertex);
    let _ = writeln!(s, "n {}", a.un);
    let _ = writeln!(s, "kradius {}", a.kradius);
    let _ = writeln!(s, "pradius {}", a.pradius);
    if let Some(seed) = a.seed {
        let _ = writeln!(s, "seed {seed}");
    }
    s.push_str(&exactseq::render_report(&phi, &psi, &pmap, &compose, &factor, &ses, &les));
    if all_ok {
        let _ = writeln!(s, "triangle pass");
        Ok(s)
    } else {
        // the report itself is the diagnostic; print it before failing
        print!("{s}");
        Err(fail(EXIT_TRIANGLE, "triangle verification failed"))
    }
}

fn render_series_block(
    s: &mut String,
    measured: &series::PoincareSeries,
    rec: &ModuleShape,
) {
    for (j, terms) in measured.coeffs.iter().enumerate() {
        let row: Vec<String> = terms
            .iter()
            .map(|(m, c)| format!("{}:{c}", rat_to_string(m)))
            .collect();
        let _ = writeln!(s, "coeff s^{j} {}", if row.is_empty() { "-".into() } else { row.join(" ") });
    }
    for (&(top, kind), &mult) in &rec.summands {
        let kind = match kind {
            SummandKind::Tower => "tower".into(),
            SummandKind::Finite(kk) => format!("finite:{kk}"),
        };
        let _ = writeln!(s, "reconstructed kind={kind} top={} mult={mult}", rat_to_string(&top));
    }
}

/// Reject series inputs whose finite summands outlive the tabulated
/// s-degrees: reconstruction cannot see past the cutoff.
fn check_cutoff(shape: &ModuleShape, nmax: u32) -> Result<(), Failure> {
    if let Some(klen) = shape.max_finite_len() {
        if klen >= nmax {
            return Err(fail(
                EXIT_SERIES,
                series::SeriesError::CutoffTooSmall { len: klen, cutoff: nmax as usize - 1 }
                    .to_string(),
            ));
        }
    }
    Ok(())
}

/// Parse a synthetic decomposition file: one summand per line in the same
/// "summand kind=... top=... mult=..." syntax the homology document emits.
fn parse_shape(text: &str) -> Result<ModuleShape, Failure> {
    let mut shape = ModuleShape::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| {
            fail(EXIT_PARSE, format!("decomposition line {}: {what}", lineno + 1))
        };
        let mut kind = None;
        let mut top = None;
        let mut mult = 1usize;
        let mut fields = line.split_whitespace();
        if fields.next() != Some("summand") {
            return Err(bad("expected a \"summand\" line"));
        }
        for field in fields {
            let (key, value) = field.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            match key {
                "delta" => {}
                "kind" => {
                    kind = Some(if value == "tower" {
                        SummandKind::Tower
                    } else if let Some(k) = value.strip_prefix("finite:") {
                        SummandKind::Finite(
                            k.parse().map_err(|_| bad("bad finite length"))?,
                        )
                    } else {
                        return Err(bad("kind must be tower or finite:k"));
                    });
                }
                "top" => {
                    top = Some(value.parse().map_err(|_| bad("bad top grading"))?);
                }
                "mult" => {
                    mult = value.parse().map_err(|_| bad("bad multiplicity"))?;
                }
                _ => return Err(bad("unknown key")),
            }
        }
        let (Some(kind), Some(top)) = (kind, top) else {
            return Err(bad("kind and top are required"));
        };
        *shape.summands.entry((top, kind)).or_insert(0) += mult;
    }
    Ok(shape)
}

fn run_series_synthetic(a: &SeriesArgs, path: &Path) -> RunResult {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    let shape = parse_shape(&text)?;
    check_cutoff(&shape, a.un)?;
    let measured = series::poincare_series_of_shape(&shape, a.un as usize - 1);
    let rec = series::reconstruct_from_series(&measured)
        .map_err(|e| fail(EXIT_SERIES, e.to_string()))?;
    let mut s = String::new();
    let _ = writeln!(s, "latticehom series v1");
    let _ = writeln!(s, "decomposition-sha256 {}", short_hash(&text));
    let _ = writeln!(s, "n-max {}", a.un);
    let _ = writeln!(s);
    render_series_block(&mut s, &measured, &rec);
    if rec != shape {
        return Err(fail(EXIT_SERIES, "reconstruction disagrees with the input decomposition"));
    }
    let _ = writeln!(s, "roundtrip pass");
    Ok(s)
}

fn run_series(a: &SeriesArgs) -> RunResult {
    if a.un < 2 {
        return Err(fail(EXIT_PARSE, "need --un >= 2 to tabulate a series"));
    }
    if let Some(path) = &a.decomposition {
        return run_series_synthetic(a, &path.clone());
    }
    let (g, text) = load_graph(a.graph.as_ref().unwrap())?;
    let reps = resolve_spinc(&g, &a.spinc)?;
    let nmax = a.un;

    let mut s = String::new();
    let _ = writeln!(s, "latticehom series v1");
    let _ = writeln!(s, "graph-sha256 {}", short_hash(&text));
    let _ = writeln!(s, "n-max {nmax}");
    for k in &reps {
        let _ = writeln!(s);
        let _ = writeln!(s, "spinc {}", spinc_display(k));
        let mut dims = Vec::with_capacity(nmax as usize);
        let mut direct = None;
        for n in 1..=nmax {
            let res = homology::stabilize(&g, k, n, a.radius, a.radius_cap)
                .map_err(homology_error)?;
            dims.push(res.decomposition.graded_dims());
            if n == nmax {
                direct = Some(res.decomposition);
            }
        }
        let direct = direct.unwrap();
        let measured = series::series_from_measured(&dims);
        let direct_shape = ModuleShape::from(&direct);
        check_cutoff(&direct_shape, nmax)?;
        let rec = series::reconstruct_from_series(&measured)
            .map_err(|e| fail(EXIT_SERIES, e.to_string()))?;
        render_series_block(&mut s, &measured, &rec);
        if rec != direct_shape {
            return Err(fail(
                EXIT_SERIES,
                format!("reconstructed decomposition disagrees with the measured one for {}", spinc_display(k)),
            ));
        }
        let _ = writeln!(s, "roundtrip pass");
    }
    Ok(s)
}
