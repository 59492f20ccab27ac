//! Command-line front end.
//!
//! A run is described by a [`RunConfig`], built from an optional JSON file
//! (`--config`) with command-line flags taking precedence. Each subcommand
//! writes its tables and reports to the output directory together with
//! `manifest.json`; a failure leaves the artifacts written so far plus
//! `error.json` and maps to a nonzero exit code.

pub mod emit;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::base::{family_point, tilde_nu, BasePoint, IrregularDivisor, PoleKind};
use crate::error::{Error, Result};
use crate::fourdim::{self, CaseId, FourDimCase, MuMap, ReferenceVariant, SkQuadrature};
use crate::gluing::{self, AnnulusQuadrature, ProfileSet};
use crate::painleve::{solve_psi1, solve_psi2};
use crate::spectral::{local_masses, spectral_roots, RootClass};
use crate::Complex64;

use emit::{plot_data, Emitter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Roots,
    Masses,
    Fiducial,
    ResidualDecay,
    SkSweep,
    FiberTau,
    CaseReport,
    Catalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Geometric,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceArg {
    Printed,
    Rederived,
}

impl From<ReferenceArg> for ReferenceVariant {
    fn from(r: ReferenceArg) -> Self {
        match r {
            ReferenceArg::Printed => ReferenceVariant::Printed,
            ReferenceArg::Rederived => ReferenceVariant::Rederived,
        }
    }
}

/// Command-line arguments. Every flag is optional so that it can override
/// the corresponding config-file value.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "hitchin-asy", version, about = "Large-|t| geometry of irregular Higgs bundle moduli")]
pub struct Args {
    /// Subcommand.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Four-dimensional family (U4, T4, U3S, T3S, U2U2, U2T2, T2T2, U2SS, T2SS).
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu3: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu4: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu5: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu6: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu7: Option<String>,
    #[arg(long)]
    pub t_start: Option<f64>,
    #[arg(long)]
    pub t_stop: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
    /// Single parameter value (sets start = stop and points = 1).
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sk_rel_tol: Option<f64>,
    #[arg(long)]
    pub fiducial_points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho_max: Option<f64>,
    /// Parabolic weight for `fiducial` (solves ψ2 instead of ψ1).
    #[arg(long, allow_hyphen_values = true)]
    pub alpha1: Option<f64>,
    #[arg(long, value_enum)]
    pub reference: Option<ReferenceArg>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

/// A complex number in a config file: `1.5` or `[1.5, -0.2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexValue> for Complex64 {
    fn from(v: ComplexValue) -> Self {
        match v {
            ComplexValue::Real(x) => Complex64::new(x, 0.0),
            ComplexValue::Pair([a, b]) => Complex64::new(a, b),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub spacing: Option<Spacing>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesFile {
    pub sk_rel_tol: Option<f64>,
    pub kappa: Option<f64>,
    pub fiducial_points: Option<usize>,
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub annulus_nodes: Option<usize>,
    pub annulus_growth: Option<f64>,
}

/// Contents of a `--config` file; every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    pub case: Option<String>,
    /// Explicit divisor (for `roots`, `masses`, `residual-decay`).
    pub divisor: Option<IrregularDivisor>,
    /// Free coefficients `ν_0 … ν_{N−4}`; the last is multiplied by `t`.
    pub template: Option<Vec<ComplexValue>>,
    #[serde(default)]
    pub mu: BTreeMap<String, ComplexValue>,
    #[serde(default)]
    pub sweep: SweepFile,
    #[serde(default)]
    pub tolerances: TolerancesFile,
    pub alpha1: Option<f64>,
    pub reference: Option<ReferenceArg>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                let x = k as f64 / n;
                match self.spacing {
                    Spacing::Geometric => self.start * (self.stop / self.start).powf(x),
                    Spacing::Linear => self.start + (self.stop - self.start) * x,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub sk_rel_tol: f64,
    pub kappa: f64,
    pub fiducial_points: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub annulus_nodes: usize,
    pub annulus_growth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let q = AnnulusQuadrature::default();
        Self {
            sk_rel_tol: SkQuadrature::default().rel_tol,
            kappa: 0.3,
            fiducial_points: 2000,
            rho_min: 1e-4,
            rho_max: 20.0,
            annulus_nodes: q.nodes,
            annulus_growth: q.growth,
        }
    }
}

/// What the sweep is run on.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Case { id: CaseId, mu: MuMap },
    Divisor { divisor: IrregularDivisor, template: Vec<Complex64> },
    None,
}

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Default,
    File,
    Flag,
    /// A flag replaced a value from the config file.
    FlagOverFile,
}

/// A validated run description.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub target: Target,
    pub sweep: Sweep,
    pub tolerances: Tolerances,
    pub alpha1: Option<f64>,
    pub reference: ReferenceArg,
    pub output_dir: PathBuf,
    pub threads: usize,
    pub provenance: BTreeMap<String, Source>,
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

/// Parses `1`, `-2.5`, `1+2i`, `0.5-1e-3i`, `3i` or `re,im`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse complex number `{s}`"));
    if let Some((a, b)) = s.split_once(',') {
        let re = a.trim().parse::<f64>().map_err(|_| bad())?;
        let im = b.trim().parse::<f64>().map_err(|_| bad())?;
        return Ok(Complex64::new(re, im));
    }
    if let Some(body) = s.strip_suffix('i') {
        // split at the last sign that is not part of an exponent
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => (body[..k].parse::<f64>().map_err(|_| bad())?, &body[k..]),
            None => (0.0, body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            x => x.parse::<f64>().map_err(|_| bad())?,
        };
        return Ok(Complex64::new(re, im));
    }
    Ok(Complex64::new(s.parse::<f64>().map_err(|_| bad())?, 0.0))
}

/// Reads the config file (if any), applies the flags and validates.
pub fn load_config(args: &Args) -> Result<RunConfig> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    resolve(args, file)
}

fn pick<T: Clone>(prov: &mut BTreeMap<String, Source>, name: &str, flag: Option<T>, file: Option<T>, default: T) -> T {
    let (v, src) = match (flag, file) {
        (Some(f), Some(_)) => (f, Source::FlagOverFile),
        (Some(f), None) => (f, Source::Flag),
        (None, Some(f)) => (f, Source::File),
        (None, None) => (default, Source::Default),
    };
    prov.insert(name.to_string(), src);
    v
}

/// Merges flags over a parsed file config and validates the result.
pub fn resolve(args: &Args, file: FileConfig) -> Result<RunConfig> {
    let mut prov = BTreeMap::new();
    let command = match (args.command, file.command) {
        (Some(c), Some(_)) => {
            prov.insert("command".into(), Source::FlagOverFile);
            c
        }
        (Some(c), _) => {
            prov.insert("command".into(), Source::Flag);
            c
        }
        (None, Some(f)) => {
            prov.insert("command".into(), Source::File);
            f
        }
        (None, None) => return config_err("command: no subcommand given"),
    };

    let case_name = match (&args.case, &file.case) {
        (Some(c), f) => {
            prov.insert("case".into(), if f.is_some() { Source::FlagOverFile } else { Source::Flag });
            Some(c.clone())
        }
        (None, Some(c)) => {
            prov.insert("case".into(), Source::File);
            Some(c.clone())
        }
        _ => None,
    };
    let mut mu: MuMap = file.mu.iter().map(|(k, v)| (k.clone(), Complex64::from(*v))).collect();
    for (name, flag) in [
        ("mu0", &args.mu0),
        ("mu1", &args.mu1),
        ("mu2", &args.mu2),
        ("mu3", &args.mu3),
        ("mu4", &args.mu4),
        ("mu5", &args.mu5),
        ("mu6", &args.mu6),
        ("mu7", &args.mu7),
    ] {
        if let Some(s) = flag {
            mu.insert(name.to_string(), parse_complex(s).map_err(|e| Error::Config(format!("{name}: {e}")))?);
            let src = if file.mu.contains_key(name) { Source::FlagOverFile } else { Source::Flag };
            prov.insert(format!("mu.{name}"), src);
        } else if file.mu.contains_key(name) {
            prov.insert(format!("mu.{name}"), Source::File);
        }
    }
    let target = match (case_name, &file.divisor) {
        (Some(name), _) => {
            let id = CaseId::parse(&name).map_err(|e| Error::Config(format!("case: {e}")))?;
            // Validates the parameter names.
            FourDimCase::get(id).params(&mu).map_err(|e| Error::Config(format!("mu: {e}")))?;
            Target::Case { id, mu }
        }
        (None, Some(div)) => {
            if !mu.is_empty() {
                return config_err("mu: parameters need a case; a divisor carries its own μ data");
            }
            div.validate().map_err(|e| Error::Config(format!("divisor: {e}")))?;
            let n = div.degree() as usize;
            let template: Vec<Complex64> = match &file.template {
                Some(t) => t.iter().map(|v| Complex64::from(*v)).collect(),
                None => {
                    let mut t = vec![Complex64::new(0.0, 0.0); n.saturating_sub(3)];
                    if let Some(last) = t.last_mut() {
                        *last = Complex64::new(1.0, 0.0);
                    }
                    t
                }
            };
            if template.len() + 3 != n {
                return config_err(format!("template: expected {} entries, got {}", n - 3, template.len()));
            }
            Target::Divisor { divisor: div.clone(), template }
        }
        (None, None) => Target::None,
    };
    let needs_case = matches!(command, Command::SkSweep | Command::FiberTau | Command::CaseReport);
    let needs_target = matches!(command, Command::Roots | Command::Masses | Command::ResidualDecay);
    if needs_case && !matches!(target, Target::Case { .. }) {
        return config_err("case: this command needs --case");
    }
    if needs_target && matches!(target, Target::None) {
        return config_err("case: this command needs --case or a divisor in the config file");
    }

    let (flag_start, flag_stop, flag_points) = match args.t {
        Some(t) => (Some(t), Some(t), Some(1)),
        None => (args.t_start, args.t_stop, args.points),
    };
    let sweep = Sweep {
        start: pick(&mut prov, "sweep.start", flag_start, file.sweep.start, 1e2),
        stop: pick(&mut prov, "sweep.stop", flag_stop, file.sweep.stop, 1e4),
        points: pick(&mut prov, "sweep.points", flag_points, file.sweep.points, 5),
        spacing: pick(&mut prov, "sweep.spacing", args.spacing, file.sweep.spacing, Spacing::Geometric),
    };
    if sweep.points == 0 {
        return config_err("sweep.points: must be at least 1");
    }
    if !(sweep.start.is_finite() && sweep.stop.is_finite() && sweep.start > 0.0) {
        return config_err("sweep.start: must be positive and finite");
    }
    if sweep.points > 1 && !(sweep.start < sweep.stop) {
        return config_err(format!("sweep: start ({}) must be below stop ({})", sweep.start, sweep.stop));
    }

    let d = Tolerances::default();
    let ft = &file.tolerances;
    let tol = Tolerances {
        sk_rel_tol: pick(&mut prov, "tolerances.sk_rel_tol", args.sk_rel_tol, ft.sk_rel_tol, d.sk_rel_tol),
        kappa: pick(&mut prov, "tolerances.kappa", args.kappa, ft.kappa, d.kappa),
        fiducial_points: pick(
            &mut prov,
            "tolerances.fiducial_points",
            args.fiducial_points,
            ft.fiducial_points,
            d.fiducial_points,
        ),
        rho_min: pick(&mut prov, "tolerances.rho_min", args.rho_min, ft.rho_min, d.rho_min),
        rho_max: pick(&mut prov, "tolerances.rho_max", args.rho_max, ft.rho_max, d.rho_max),
        annulus_nodes: pick(&mut prov, "tolerances.annulus_nodes", None, ft.annulus_nodes, d.annulus_nodes),
        annulus_growth: pick(&mut prov, "tolerances.annulus_growth", None, ft.annulus_growth, d.annulus_growth),
    };
    for (name, v) in [
        ("sk_rel_tol", tol.sk_rel_tol),
        ("kappa", tol.kappa),
        ("rho_min", tol.rho_min),
        ("rho_max", tol.rho_max),
        ("annulus_growth", tol.annulus_growth - 1.0),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return config_err(format!("tolerances.{name}: must be positive"));
        }
    }
    if tol.fiducial_points < 2 || tol.annulus_nodes < 2 {
        return config_err("tolerances: fiducial_points and annulus_nodes must be at least 2");
    }
    if tol.rho_min >= tol.rho_max {
        return config_err("tolerances.rho_min: must be below rho_max");
    }

    let alpha1 = args.alpha1.or(file.alpha1);
    if args.alpha1.is_some() {
        let src = if file.alpha1.is_some() { Source::FlagOverFile } else { Source::Flag };
        prov.insert("alpha1".into(), src);
    } else if file.alpha1.is_some() {
        prov.insert("alpha1".into(), Source::File);
    }
    let reference = pick(&mut prov, "reference", args.reference, file.reference, ReferenceArg::Printed);
    let output_dir =
        pick(&mut prov, "output_dir", args.out.clone(), file.output_dir.clone(), PathBuf::from("hitchin-asy-out"));
    let mut threads = pick(&mut prov, "threads", args.threads, file.threads, 1);
    if let Ok(v) = std::env::var("HITCHIN_ASY_THREADS") {
        threads = v.trim().parse().map_err(|_| Error::Config(format!("HITCHIN_ASY_THREADS: not a count: `{v}`")))?;
        prov.insert("threads".into(), Source::Flag);
    }
    if threads == 0 {
        return config_err("threads: must be at least 1");
    }
    Ok(RunConfig { command, target, sweep, tolerances: tol, alpha1, reference, output_dir, threads, provenance: prov })
}

/// Exit code for an error: 2 configuration, 3 numerical, 4 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) => 2,
        Error::Numerical(_) => 3,
        Error::Io(_) => 4,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::InvalidInput(_) => "invalid-input",
        Error::Numerical(_) => "numerical",
        Error::Io(_) => "io",
    }
}

/// Runs a validated config, writing artifacts and the manifest.
/// On failure the partial artifacts and `error.json` are kept.
pub fn run(config: &RunConfig) -> Result<Vec<emit::ManifestEntry>> {
    let mut em = Emitter::new(&config.output_dir)?;
    em.write_json("config.json", config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("threads: {e}")))?;
    let result = pool.install(|| dispatch(config, &mut em));
    match result {
        Ok(()) => em.finish(),
        Err(e) => {
            let body = serde_json::json!({
                "error": error_kind(&e),
                "message": e.to_string(),
                "exit_code": exit_code(&e),
                "partial_artifacts": em.artifacts(),
            });
            // Best effort: the original error is what gets reported.
            let _ = em.write_json("error.json", &body);
            let _ = em.finish();
            Err(e)
        }
    }
}

/// Entry point used by the binary: parses, runs, returns the exit code.
pub fn main_with_args(args: Args) -> i32 {
    let config = match load_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(dir) = &args.out {
                let body =
                    serde_json::json!({"error": error_kind(&e), "message": e.to_string(), "exit_code": exit_code(&e)});
                if std::fs::create_dir_all(dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), emit::format_json(&body));
                }
            }
            return exit_code(&e);
        }
    };
    for (k, src) in &config.provenance {
        if *src == Source::FlagOverFile {
            eprintln!("note: {k} from the command line overrides the config file");
        }
    }
    match run(&config) {
        Ok(entries) => {
            for e in entries {
                println!("{}", config.output_dir.join(&e.path).display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn base_at(target: &Target, t: f64) -> Result<BasePoint> {
    let tc = Complex64::new(t, 0.0);
    match target {
        Target::Case { id, mu } => {
            let cs = FourDimCase::get(*id);
            cs.base_point(tc, &cs.params(mu)?)
        }
        Target::Divisor { divisor, template } => family_point(divisor, template, tc),
        Target::None => Err(Error::Config("no case or divisor".into())),
    }
}

fn case_params(config: &RunConfig) -> Result<(FourDimCase, fourdim::Params)> {
    match &config.target {
        Target::Case { id, mu } => {
            let cs = FourDimCase::get(*id);
            let p = cs.params(mu)?;
            Ok((cs, p))
        }
        _ => Err(Error::Config("case: this command needs --case".into())),
    }
}

fn dispatch(config: &RunConfig, em: &mut Emitter) -> Result<()> {
    use rayon::prelude::*;
    let ts = config.sweep.values();
    let tol = &config.tolerances;
    let sk_q = SkQuadrature { rel_tol: tol.sk_rel_tol, ..Default::default() };
    match config.command {
        Command::Catalog => {
            let cat = fourdim::case_catalog();
            em.write_json("catalog.json", &cat)?;
            let mut csv = String::from("case,description,sk_form,exponent_or_log_coefficient,model,kodaira,beta_or_dynkin,tau_model_re,tau_model_im,cone_angle\n");
            for c in &cat {
                let (form, val, cone) = match c.sk_form {
                    fourdim::SkForm::Conic { .. } => {
                        let e = c.sk_form.exponent().unwrap();
                        ("conic", format!("{e:.16e}"), format!("{:.16e}", fourdim::cone_angle(e)))
                    }
                    fourdim::SkForm::Log { .. } => {
                        ("log", format!("{:.16e}", c.sk_form.log_coefficient().unwrap()), String::new())
                    }
                };
                let (model, kod, b, tre, tim) = match c.model {
                    fourdim::ModelMetric::Alg { kodaira, beta_num, beta_den, tau_re, tau_im } => (
                        "ALG",
                        kodaira,
                        format!("{beta_num}/{beta_den}"),
                        format!("{tau_re:.16e}"),
                        format!("{tau_im:.16e}"),
                    ),
                    fourdim::ModelMetric::AlgStar { kodaira, dynkin, .. } => {
                        ("ALG*", kodaira, dynkin.to_string(), String::new(), String::new())
                    }
                };
                csv.push_str(&format!(
                    "{},{},{form},{val},{model},{kod},{b},{tre},{tim},{cone}\n",
                    c.id.name(),
                    c.description.replace(',', ";")
                ));
            }
            em.write_str("catalog.csv", &csv)?;
        }
        Command::Roots | Command::Masses => {
            let data: Vec<_> = ts
                .par_iter()
                .map(|&t| {
                    let b = base_at(&config.target, t)?;
                    let roots = spectral_roots(&b)?;
                    local_masses(&b, &roots)
                })
                .collect::<Result<_>>()?;
            let mut buf = Vec::new();
            for (k, (t, d)) in ts.iter().zip(&data).enumerate() {
                d.write_csv(*t, &mut buf, k == 0)?;
            }
            let name = if config.command == Command::Roots { "roots" } else { "masses" };
            em.write(&format!("{name}.csv"), &buf)?;
            let json: Vec<_> =
                ts.iter().zip(&data).map(|(t, d)| serde_json::json!({"t": t, "roots": d.roots})).collect();
            em.write_json(&format!("{name}.json"), &json)?;
            if config.command == Command::Masses {
                // smallest moving-zero mass: the rate that controls the decay
                let rows: Vec<(f64, f64)> = ts
                    .iter()
                    .zip(&data)
                    .filter_map(|(t, d)| {
                        d.roots
                            .iter()
                            .filter(|r| r.class == RootClass::MovingZero)
                            .map(|r| r.local_mass)
                            .reduce(f64::min)
                            .map(|m| (*t, m))
                    })
                    .collect();
                em.write_str("masses.dat", &plot_data(("t", "min_moving_zero_local_mass"), &rows))?;
            } else {
                let poly: Vec<_> = ts
                    .iter()
                    .map(|&t| {
                        base_at(&config.target, t)
                            .map(|b| serde_json::json!({"t": t, "tilde_nu": tilde_nu(&b).coefficients}))
                    })
                    .collect::<Result<_>>()?;
                em.write_json("tilde_nu.json", &poly)?;
            }
        }
        Command::Fiducial => {
            let p = match config.alpha1 {
                Some(a) => solve_psi2(a, tol.rho_min, tol.rho_max, tol.fiducial_points)?,
                None => solve_psi1(tol.rho_min, tol.rho_max, tol.fiducial_points)?,
            };
            let mut buf = Vec::new();
            p.write_csv(&mut buf)?;
            em.write("profile.csv", &buf)?;
            let summary = serde_json::json!({
                "kind": p.kind,
                "alpha1": p.alpha1,
                "a0": p.a0,
                "amplitude": p.amplitude,
                "rho_min": p.rho_min,
                "rho_max": p.rho_max,
                "grid_points": p.grid.len(),
                "certified_residual": p.certified_residual,
                "log_constant": p.log_constant,
                "log_constant_reference": p.log_constant_reference,
                "newton_iterations": p.newton_iterations,
            });
            em.write_json("profile.json", &summary)?;
            let rows: Vec<(f64, f64)> = p.grid.iter().map(|g| (g.rho, g.psi)).collect();
            em.write_str("profile.dat", &plot_data(("rho", "psi"), &rows))?;
        }
        Command::ResidualDecay => {
            let bases: Vec<BasePoint> = ts.iter().map(|&t| base_at(&config.target, t)).collect::<Result<_>>()?;
            let psi1 = solve_psi1(tol.rho_min, tol.rho_max, tol.fiducial_points)?;
            let mut alphas: Vec<f64> =
                bases[0].divisor.poles.iter().filter(|p| p.kind == PoleKind::Tame).map(|p| p.weights.0).collect();
            alphas.sort_by(f64::total_cmp);
            alphas.dedup();
            let psi2 = alphas
                .iter()
                .map(|&a| solve_psi2(a, tol.rho_min, tol.rho_max, tol.fiducial_points))
                .collect::<Result<Vec<_>>>()?;
            let profiles = ProfileSet { psi1, psi2 };
            let q = AnnulusQuadrature { nodes: tol.annulus_nodes, growth: tol.annulus_growth };
            let reports: Vec<_> = bases
                .par_iter()
                .map(|b| gluing::residual_l2_norm(b, &profiles, tol.kappa, q))
                .collect::<Result<_>>()?;
            let mut buf = Vec::new();
            gluing::write_decay_csv(&reports, &mut buf)?;
            em.write("decay.csv", &buf)?;
            let sigma = reports[0].sigma_value;
            let samples: Vec<(f64, f64)> = reports.iter().map(|r| (r.t, r.log_total_l2)).collect();
            let fit = if samples.len() >= 4 { Some(gluing::decay_fit(&samples, sigma)?) } else { None };
            let free = if samples.len() >= 4 { Some(gluing::decay_fit_free_sigma(&samples)?) } else { None };
            em.write_json(
                "residual.json",
                &serde_json::json!({"sigma": reports[0].sigma, "fit": fit, "free_sigma_fit": free, "reports": reports}),
            )?;
            let rows: Vec<(f64, f64)> = samples.iter().map(|(t, l)| (t.powf(sigma), *l)).collect();
            em.write_str("decay.dat", &plot_data(("t^sigma", "log_total_l2_norm"), &rows))?;
        }
        Command::SkSweep => {
            let (cs, p) = case_params(config)?;
            let gs: Vec<_> = ts
                .par_iter()
                .map(|&t| fourdim::sk_metric_numeric(&cs, Complex64::new(t, 0.0), &p, sk_q))
                .collect::<Result<_>>()?;
            let mut csv = String::from("abs_t,g_sk,g_sk_error_estimate\n");
            for (t, g) in ts.iter().zip(&gs) {
                csv.push_str(&format!("{t:.16e},{:.16e},{:.16e}\n", g.value, g.error));
            }
            em.write_str("sk.csv", &csv)?;
            let samples: Vec<(f64, f64)> = ts.iter().zip(&gs).map(|(t, g)| (*t, g.value)).collect();
            let fit = fourdim::sk_leading_fit(&cs, &samples).ok();
            em.write_json("sk.json", &serde_json::json!({"case": cs.id, "params": p.map(), "values": gs, "fit": fit}))?;
            em.write_str("sk.dat", &plot_data(("abs_t", "g_sk"), &samples))?;
        }
        Command::FiberTau => {
            let (cs, p) = case_params(config)?;
            let variant: ReferenceVariant = config.reference.into();
            let mut anchor = None;
            let mut csv = String::from("abs_t,tau_re,tau_im,tau_ref_re,tau_ref_im,abs_error\n");
            let mut rows = Vec::new();
            let mut max_dev = 0.0f64;
            for &t in &ts {
                let tc = Complex64::new(t, 0.0);
                let tau = fourdim::fiber_tau(&cs, tc, &p, anchor)?;
                anchor = Some(tau);
                let r = fourdim::tau_reference(&cs, tc, &p, variant)?;
                let err = (tau - r).norm();
                max_dev = max_dev.max(err);
                csv.push_str(&format!(
                    "{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{err:.16e}\n",
                    tau.re, tau.im, r.re, r.im
                ));
                rows.push((t, err));
            }
            em.write_str("tau.csv", &csv)?;
            em.write_json(
                "tau.json",
                &serde_json::json!({"case": cs.id, "params": p.map(), "reference": variant, "max_abs_deviation": max_dev}),
            )?;
            em.write_str("tau.dat", &plot_data(("abs_t", "abs_error"), &rows))?;
        }
        Command::CaseReport => {
            let (cs, p) = case_params(config)?;
            let rep = fourdim::case_report(&cs, &ts, &p, config.reference.into(), sk_q)?;
            em.write_json("case_report.json", &rep)?;
            let mut buf = Vec::new();
            rep.write_csv(&mut buf)?;
            em.write("case_report.csv", &buf)?;
            let rows: Vec<(f64, f64)> = rep.rows.iter().map(|r| (r.t, r.g_sk)).collect();
            em.write_str("case_report.dat", &plot_data(("abs_t", "g_sk"), &rows))?;
        }
    }
    Ok(())
}

/// Path helper for tests and callers that want the manifest location.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(cmd: &[&str]) -> Args {
        let mut v = vec!["hitchin-asy"];
        v.extend_from_slice(cmd);
        Args::parse_from(v)
    }

    #[test]
    fn complex_parsing() {
        let c = |a, b| Complex64::new(a, b);
        assert_eq!(parse_complex("1").unwrap(), c(1.0, 0.0));
        assert_eq!(parse_complex("-2.5").unwrap(), c(-2.5, 0.0));
        assert_eq!(parse_complex("1+2i").unwrap(), c(1.0, 2.0));
        assert_eq!(parse_complex("1e-3-4.5i").unwrap(), c(1e-3, -4.5));
        assert_eq!(parse_complex("3i").unwrap(), c(0.0, 3.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("0.5,-1").unwrap(), c(0.5, -1.0));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn minimal_flags_give_geometric_sweep() {
        let cfg = load_config(&args(&[
            "case-report",
            "--case",
            "U4",
            "--t-start",
            "1e2",
            "--t-stop",
            "1e5",
            "--points",
            "7",
        ]))
        .unwrap();
        assert_eq!(cfg.command, Command::CaseReport);
        assert_eq!(cfg.sweep.spacing, Spacing::Geometric);
        let v = cfg.sweep.values();
        assert_eq!(v.len(), 7);
        assert!((v[1] - 1e2 * 10f64.sqrt()).abs() < 1e-9);
        assert_eq!(cfg.threads, 1);
    }

    #[test]
    fn flag_overrides_file() {
        let file: FileConfig = serde_json::from_str(
            r#"{"command": "sk-sweep", "case": "T4", "mu": {"mu5": 2.0}, "sweep": {"start": 100, "stop": 1000, "points": 3}}"#,
        )
        .unwrap();
        let cfg = resolve(&args(&["--mu5", "1", "--points", "5"]), file).unwrap();
        match &cfg.target {
            Target::Case { mu, .. } => assert_eq!(mu["mu5"], Complex64::new(1.0, 0.0)),
            _ => panic!(),
        }
        assert_eq!(cfg.sweep.points, 5);
        assert_eq!(cfg.provenance["sweep.points"], Source::FlagOverFile);
        assert_eq!(cfg.provenance["sweep.start"], Source::File);
        assert_eq!(cfg.provenance["mu.mu5"], Source::FlagOverFile);
        assert_eq!(cfg.provenance["sweep.spacing"], Source::Default);
    }

    #[test]
    fn validation_errors_name_the_field() {
        let e = load_config(&args(&["sk-sweep", "--case", "U4", "--kappa", "-1"])).unwrap_err();
        assert!(e.to_string().contains("kappa") && exit_code(&e) == 2);
        let e = load_config(&args(&["sk-sweep", "--case", "U4", "--t-start", "10", "--t-stop", "5"])).unwrap_err();
        assert!(e.to_string().contains("sweep"));
        let e = load_config(&args(&["sk-sweep"])).unwrap_err();
        assert!(e.to_string().contains("case"));
        let e = load_config(&args(&["sk-sweep", "--case", "U4", "--mu2", "1"])).unwrap_err();
        assert!(e.to_string().contains("mu2"));
        let bad = serde_json::from_str::<FileConfig>(r#"{"command": "catalog", "colour": 1}"#);
        assert!(bad.unwrap_err().to_string().contains("colour"));
    }
}
