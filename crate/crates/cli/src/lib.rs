//! `specsing` command-line front end.
//!
//! Every subcommand builds a [`Report`] and hands it to the report writer;
//! solvers may run in parallel, but rows are assembled in a fixed order so
//! identical flags give byte-identical output.

pub mod report;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use specsing::contour::Rect;
use specsing::pseudoherm::{self, MatrixFamily};
use specsing::slablaser::{self, NonlinearOptions, SlabSpec};
use specsing::spectral::{self, Family, ResonanceOptions, SearchOptions, SearchOutcome};
use specsing::{Complex64, Error, Structure};

pub use report::{write_report, Cell, Format, Report};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SPECSING_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

/// A closed interval `lo:hi` with an optional point count `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub n: Option<usize>,
}

impl Window {
    pub fn points(&self, default_n: usize) -> usize {
        self.n.unwrap_or(default_n)
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(format!("expected lo:hi or lo:hi:n, got '{s}'"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
        let lo = num(parts[0])?;
        let hi = num(parts[1])?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(format!("window '{s}' is empty (need lo < hi)"));
        }
        let n = match parts.get(2) {
            Some(t) => {
                let n: usize = t.trim().parse().map_err(|_| format!("'{t}' is not a point count"))?;
                if n < 2 {
                    return Err(format!("window '{s}' needs at least 2 points"));
                }
                Some(n)
            }
            None => None,
        };
        Ok(Self { lo, hi, n })
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)?;
        if let Some(n) = self.n {
            write!(f, ":{n}")?;
        }
        Ok(())
    }
}

/// `NAME=lo:hi[:n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamWindow {
    pub name: String,
    pub window: Window,
}

impl FromStr for ParamWindow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, w) = s.split_once('=').ok_or_else(|| format!("expected NAME=lo:hi[:n], got '{s}'"))?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("bad parameter name '{name}'"));
        }
        Ok(Self {
            name: name.to_string(),
            window: w.parse()?,
        })
    }
}

impl fmt::Display for ParamWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.name, self.window)
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a positive number")),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "specsing",
    version,
    about = "Transfer matrices, spectral singularities, resonances, slab lasers and pseudo-Hermitian metrics",
    after_help = "Windows are written lo:hi or lo:hi:n. Set SPECSING_THREADS to fix the worker thread count.\n\
                  Exit status: 0 success, 2 usage or input error, 3 solver failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of stdout
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Medium/potential description file
    #[arg(long)]
    pub input: PathBuf,
    /// Real wavenumber window; n is the coarse grid size
    #[arg(long, default_value = "0.5:10:400", allow_hyphen_values = true)]
    pub k: Window,
    /// Tuned parameter: kappa (Im n), eta (Re n), alpha (delta strengths) or any other name (profile scale)
    #[arg(long, allow_hyphen_values = true)]
    pub param: ParamWindow,
    /// Residual tolerance on the vanishing matrix entry
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    pub tol: f64,
    /// Maximum number of coarse-grid minima refined by Newton
    #[arg(long, default_value_t = 256)]
    pub max_seeds: usize,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transfer matrix, amplitudes and unitarity defect over a k grid
    Scan {
        /// Medium/potential description file
        #[arg(long)]
        input: PathBuf,
        /// Wavenumber grid (k > 0)
        #[arg(long, default_value = "0.1:10:400", allow_hyphen_values = true)]
        k: Window,
        #[command(flatten)]
        out: Output,
    },
    /// Spectral singularities (zeros of M22) over (k, parameter)
    Ss(SearchArgs),
    /// Coherent perfect absorption points (zeros of M11) over (k, parameter)
    Cpa(SearchArgs),
    /// Complex zeros of M22 in a rectangle of the k plane
    Resonances {
        /// Medium/potential description file
        #[arg(long)]
        input: PathBuf,
        /// Real-part window
        #[arg(long, default_value = "0.1:10", allow_hyphen_values = true)]
        re: Window,
        /// Imaginary-part window
        #[arg(long, default_value = "-2:2", allow_hyphen_values = true)]
        im: Window,
        /// Residual tolerance on |M22|
        #[arg(long, default_value_t = 1e-8, value_parser = positive)]
        tol: f64,
        /// Boundary samples per rectangle edge
        #[arg(long, default_value_t = 32)]
        samples_per_edge: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Slab reflectivity and threshold gain
    Threshold {
        /// Real refractive index of the slab
        #[arg(long, default_value_t = 3.0, value_parser = positive)]
        eta: f64,
        /// Slab thickness
        #[arg(long = "L", default_value_t = 1.0, value_parser = positive)]
        length: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Lasing modes (k_m, kappa_m) of a slab in a k window
    Modes {
        /// Real refractive index of the slab
        #[arg(long, default_value_t = 3.0, value_parser = positive)]
        eta: f64,
        /// Slab thickness
        #[arg(long = "L", default_value_t = 1.0, value_parser = positive)]
        length: f64,
        /// Wavenumber window
        #[arg(long, default_value = "10:11", allow_hyphen_values = true)]
        k: Window,
        #[command(flatten)]
        out: Output,
    },
    /// Output intensity versus gain above threshold for a Kerr slab
    Intensity {
        /// Real refractive index of the slab
        #[arg(long, default_value_t = 3.0, value_parser = positive)]
        eta: f64,
        /// Slab thickness
        #[arg(long = "L", default_value_t = 1.0, value_parser = positive)]
        length: f64,
        /// Kerr coefficient
        #[arg(long, default_value_t = 0.01, value_parser = positive)]
        sigma: f64,
        /// Window holding the lasing mode; the lowest mode in it is used
        #[arg(long, default_value = "10:11", allow_hyphen_values = true)]
        k: Window,
        /// Gains as multiples of the mode threshold, within (1, 1.2]
        #[arg(long = "g-rel", default_value = "1.01:1.1:10")]
        g_rel: Window,
        /// Residual tolerance of the shooting solver
        #[arg(long, default_value_t = 1e-10, value_parser = positive)]
        tol: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Biorthonormal system, metric operator and Hermitized matrix
    Metric {
        /// Matrix or matrix-family file
        #[arg(long)]
        input: PathBuf,
        /// Family parameter at which the matrix is evaluated
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
        /// Eigenvalue clustering tolerance
        #[arg(long, default_value_t = 1e-10, value_parser = positive)]
        tol: f64,
        /// Comma-separated positive scale factors N_n for the right eigenvectors (default: unit norm)
        #[arg(long, value_delimiter = ',', value_parser = positive)]
        norms: Option<Vec<f64>>,
        /// Condition number of rho above which the result is flagged
        #[arg(long, default_value_t = 1e6, value_parser = positive)]
        condition_limit: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Exceptional points and degeneracies of a matrix family along t
    EpScan {
        /// Matrix-family file
        #[arg(long)]
        input: PathBuf,
        /// Parameter grid
        #[arg(long, default_value = "-1:1:201", allow_hyphen_values = true)]
        t: Window,
        /// Eigenvalue coincidence tolerance
        #[arg(long, default_value_t = 1e-6, value_parser = positive)]
        tol: f64,
        #[command(flatten)]
        out: Output,
    },
}

/// Failure of a subcommand, with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence { .. }
            | Error::WindingMismatch { .. }
            | Error::ZeroOnContour(_)
            | Error::SpectralSingularity { .. }
            | Error::GridTooCoarse { .. }
            | Error::Defective { .. }
            | Error::ComplexSpectrum { .. }
            | Error::NotPositive { .. }
            | Error::InfiniteThreshold { .. } => EXIT_NO_CONVERGENCE,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

fn input_error(path: &std::path::Path, e: Error) -> Failure {
    match e {
        Error::Parse { line: 0, message } => Failure { code: EXIT_USAGE, message },
        Error::Parse { line, message } => Failure {
            code: EXIT_USAGE,
            message: format!("{}:{line}: {message}", path.display()),
        },
        other => Failure {
            code: EXIT_USAGE,
            message: format!("{}: {other}", path.display()),
        },
    }
}

fn load(path: &std::path::Path) -> Result<Structure, Failure> {
    specsing::potentials::load_structure(path).map_err(|e| input_error(path, e))
}

fn load_matrices(path: &std::path::Path) -> Result<MatrixFamily, Failure> {
    pseudoherm::load_matrix_family(path).map_err(|e| input_error(path, e))
}

fn c_cells(z: Complex64) -> [Cell; 2] {
    [Cell::Num(z.re), Cell::Num(z.im)]
}

fn scan_report(input: &std::path::Path, k: &Window) -> Result<Report, Failure> {
    let s = load(input)?;
    let grid = spectral::linspace(k.lo, k.hi, k.points(400));
    let rows = spectral::scan(&s, &grid)?;
    let mut r = Report::new(
        "scan",
        &[
            "k", "m11_re", "m11_im", "m12_re", "m12_im", "m21_re", "m21_im", "m22_re", "m22_im", "t_re", "t_im", "rl_re",
            "rl_im", "rr_re", "rr_im", "defect_l", "defect_r", "det_defect",
        ],
    );
    r.config("input", input.display()).config("k", k);
    for row in rows {
        let mut cells = vec![Cell::Num(row.k)];
        for z in [row.m.m11, row.m.m12, row.m.m21, row.m.m22] {
            cells.extend(c_cells(z));
        }
        match row.amplitudes {
            Some(a) => {
                for z in [a.t, a.rl, a.rr] {
                    cells.extend(c_cells(z));
                }
            }
            None => cells.extend(std::iter::repeat_n(Cell::Empty, 6)),
        }
        let (dl, dr) = row.unitarity.map_or((Cell::Empty, Cell::Empty), |(l, r)| (l.into(), r.into()));
        cells.push(dl);
        cells.push(dr);
        cells.push(row.m.det_defect().into());
        r.push(cells);
    }
    Ok(r)
}

fn family(base: Structure, name: &str) -> Family<'static> {
    match name {
        "kappa" => Family::kappa(base),
        "eta" => Family::eta(base),
        "alpha" => Family::delta_scale(base),
        other => Family::profile_scale(other.to_string(), base),
    }
}

fn search_report(command: &str, a: &SearchArgs, warn: &mut dyn Write) -> Result<Report, Failure> {
    let s = load(&a.input)?;
    let fam = family(s, &a.param.name);
    let opts = SearchOptions {
        tol: a.tol,
        k_points: a.k.points(400),
        theta_points: a.param.window.points(400),
        max_seeds: a.max_seeds,
        ..SearchOptions::default()
    };
    let outcome: SearchOutcome = if command == "cpa" {
        spectral::find_cpa(&fam, a.k.bounds(), a.param.window.bounds(), &opts)?
    } else {
        spectral::find_ss(&fam, a.k.bounds(), a.param.window.bounds(), &opts)?
    };
    let theta_col = format!("{}_star", a.param.name);
    let mut r = Report::new(command, &["k_star", &theta_col, "residual", "kind", "degenerate"]);
    r.config("input", a.input.display())
        .config("k", a.k)
        .config("param", &a.param)
        .config("tol", a.tol)
        .config("max_seeds", a.max_seeds);
    for root in &outcome.roots {
        let theta = root.tuned_parameter.as_ref().map(|p| p.1);
        r.push(vec![
            root.k_star.re.into(),
            theta.into(),
            root.residual.into(),
            root.kind.as_str().into(),
            root.degenerate.into(),
        ]);
    }
    r.summary("unconverged_seeds", outcome.unconverged.len());
    if !outcome.unconverged.is_empty() {
        let _ = writeln!(warn, "note: {} seed(s) did not converge", outcome.unconverged.len());
    }
    Ok(r)
}

/// Runs one parsed command and returns its report.
pub fn execute(cmd: &Command, warn: &mut dyn Write) -> Result<Report, Failure> {
    match cmd {
        Command::Scan { input, k, .. } => scan_report(input, k),
        Command::Ss(a) => search_report("ss", a, warn),
        Command::Cpa(a) => search_report("cpa", a, warn),
        Command::Resonances {
            input,
            re,
            im,
            tol,
            samples_per_edge,
            ..
        } => {
            let s = load(input)?;
            let rect = Rect::new(re.bounds(), im.bounds())?;
            let mut opts = ResonanceOptions { tol: *tol, ..ResonanceOptions::default() };
            opts.contour.samples_per_edge = *samples_per_edge;
            let found = spectral::find_resonances(&s, &rect, &opts)?;
            let mut r = Report::new("resonances", &["k_re", "k_im", "residual", "kind", "multiplicity"]);
            r.config("input", input.display())
                .config("re", re)
                .config("im", im)
                .config("tol", tol)
                .config("samples_per_edge", samples_per_edge);
            for f in found {
                let [a, b] = c_cells(f.k_star);
                r.push(vec![a, b, f.residual.into(), f.kind.as_str().into(), f.multiplicity.into()]);
            }
            Ok(r)
        }
        Command::Threshold { eta, length, .. } => {
            let mut r = Report::new("threshold", &["eta", "L", "reflectivity", "g_th"]);
            r.config("eta", eta).config("L", length);
            let refl = slablaser::reflectivity(Complex64::new(*eta, 0.0))?;
            let g = match slablaser::threshold_gain(*eta, *length) {
                Ok(g) => g,
                Err(Error::InfiniteThreshold { .. }) => f64::INFINITY,
                Err(e) => return Err(e.into()),
            };
            r.push(vec![(*eta).into(), (*length).into(), refl.re.into(), g.into()]);
            Ok(r)
        }
        Command::Modes { eta, length, k, .. } => {
            let search = slablaser::lasing_modes(*eta, *length, k.bounds())?;
            let g_th = match slablaser::threshold_gain(*eta, *length) {
                Ok(g) => g,
                Err(Error::InfiniteThreshold { .. }) => f64::INFINITY,
                Err(e) => return Err(e.into()),
            };
            let mut r = Report::new("modes", &["index", "k", "kappa", "gain", "wavelength", "residual"]);
            r.config("eta", eta).config("L", length).config("k", k);
            for m in &search.modes {
                r.push(vec![
                    m.index.into(),
                    m.k.into(),
                    m.kappa.into(),
                    m.gain().into(),
                    m.wavelength().into(),
                    m.residual.into(),
                ]);
            }
            r.summary("g_th", g_th);
            if !search.failures.is_empty() {
                let (m, k0, res) = search.failures[0];
                let _ = writeln!(warn, "note: {} mode seed(s) failed, first m={m} k={k0} residual={res:e}", search.failures.len());
            }
            Ok(r)
        }
        Command::Intensity {
            eta,
            length,
            sigma,
            k,
            g_rel,
            tol,
            ..
        } => {
            let spec = SlabSpec::new(*eta, 0.0, *length, *sigma)?;
            let search = slablaser::lasing_modes(*eta, *length, k.bounds())?;
            let seed = search.modes.first().ok_or_else(|| Failure {
                code: EXIT_NO_CONVERGENCE,
                message: format!("no lasing mode in k window {k}"),
            })?;
            let opts = NonlinearOptions { tol: *tol, ..NonlinearOptions::default() };
            let grid = spectral::linspace(g_rel.lo, g_rel.hi, g_rel.points(10));
            let curve = slablaser::intensity_curve(&spec, seed, &grid, &opts)?;
            let mut r = Report::new("intensity", &["g_rel", "g", "kappa", "intensity", "k"]);
            r.config("eta", eta)
                .config("L", length)
                .config("sigma", sigma)
                .config("k", k)
                .config("g_rel", g_rel)
                .config("tol", tol);
            for (p, gr) in curve.points.iter().zip(&grid) {
                r.push(vec![(*gr).into(), p.g.into(), p.kappa.into(), p.intensity.into(), p.k.into()]);
            }
            r.summary("mode_k", seed.k)
                .summary("g_th", curve.g_th)
                .summary("slope", curve.slope)
                .summary("intercept", curve.intercept_i)
                .summary("g_th_fit", curve.g_th_fit)
                .summary("r_squared", curve.r_squared);
            Ok(r)
        }
        Command::Metric {
            input,
            t,
            tol,
            norms,
            condition_limit,
            ..
        } => metric_report(input, *t, *tol, norms.as_deref(), *condition_limit),
        Command::EpScan { input, t, tol, .. } => {
            let fam = load_matrices(input)?;
            let grid = spectral::linspace(t.lo, t.hi, t.points(201));
            let scan = pseudoherm::exceptional_scan(|x| fam.at(x), &grid, *tol)?;
            let mut r = Report::new("ep-scan", &["t", "kind", "defect", "separation", "eigenvalue_re", "eigenvalue_im"]);
            r.config("input", input.display()).config("t", t).config("tol", tol);
            let mut all: Vec<(&str, &pseudoherm::ExceptionalPoint)> = scan
                .exceptional
                .iter()
                .map(|p| ("exceptional", p))
                .chain(scan.degeneracies.iter().map(|p| ("degeneracy", p)))
                .collect();
            all.sort_by(|a, b| a.1.t.total_cmp(&b.1.t));
            for (kind, p) in all {
                let [a, b] = c_cells(p.eigenvalue);
                r.push(vec![p.t.into(), kind.into(), p.defect.into(), p.separation.into(), a, b]);
            }
            Ok(r)
        }
    }
}

fn metric_report(input: &std::path::Path, t: f64, tol: f64, norms: Option<&[f64]>, limit: f64) -> Result<Report, Failure> {
    let fam = load_matrices(input)?;
    let h = fam.at(t);
    let mut sys = pseudoherm::biorth(&h, tol)?;
    if let Some(n) = norms {
        let factors: Vec<Complex64> = n.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        sys = sys.rescale(&factors)?;
    }
    let mo = pseudoherm::metric(&sys, tol)?;
    let herm = pseudoherm::hermitize(&h, &mo, limit)?;
    let intertwine = pseudoherm::intertwine_residual(&h, &mo)?;

    let mut r = Report::new("metric", &["quantity", "i", "j", "re", "im"]);
    r.config("input", input.display()).config("t", t).config("tol", tol).config("condition_limit", limit);
    if let Some(n) = norms {
        let text: Vec<String> = n.iter().map(|v| v.to_string()).collect();
        r.config("norms", text.join(","));
    }
    for (i, e) in sys.eigenvalues().iter().enumerate() {
        let [a, b] = c_cells(*e);
        r.push(vec!["eigenvalue".into(), i.into(), 0usize.into(), a, b]);
    }
    let mut matrix = |name: &str, m: &pseudoherm::CMatrix| {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let [a, b] = c_cells(m[(i, j)]);
                r.push(vec![name.into(), i.into(), j.into(), a, b]);
            }
        }
    };
    matrix("psi", sys.right());
    matrix("phi", sys.left());
    matrix("eta", &mo.eta);
    matrix("rho", &mo.rho);
    matrix("h_hermitian", &herm.h);
    r.summary("biorthonormality_defect", sys.biorthonormality_defect())
        .summary("intertwine_residual", intertwine)
        .summary("hermiticity_defect", herm.hermiticity_defect)
        .summary("rho_condition", herm.condition)
        .summary("ill_conditioned", herm.ill_conditioned);
    Ok(r)
}

fn output_of(cmd: &Command) -> &Output {
    match cmd {
        Command::Scan { out, .. }
        | Command::Resonances { out, .. }
        | Command::Threshold { out, .. }
        | Command::Modes { out, .. }
        | Command::Intensity { out, .. }
        | Command::Metric { out, .. }
        | Command::EpScan { out, .. } => out,
        Command::Ss(a) | Command::Cpa(a) => &a.out,
    }
}

fn configure_threads(err: &mut dyn Write) {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                // a pool may already exist when run() is called repeatedly in-process
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                let _ = writeln!(err, "warning: ignoring {THREADS_ENV}={v}");
            }
        }
    }
}

/// Parses `argv` (program name first), runs the subcommand and writes the
/// report. Returns the process exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    configure_threads(err);
    let report = match execute(&cli.command, err) {
        Ok(r) => r,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            return f.code;
        }
    };
    let o = output_of(&cli.command);
    if let Err(e) = write_report(&report, o.format, o.output.as_deref(), out) {
        let _ = writeln!(err, "error: cannot write report: {e}");
        return EXIT_USAGE;
    }
    if o.format == Format::Csv {
        if let Some(line) = report::summary_line(&report) {
            let _ = writeln!(err, "{line}");
        }
    }
    EXIT_OK
}
