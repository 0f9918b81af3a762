//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::cohomology::{
    betti_json, euler_poincare, highorder_complex, mayer_vietoris_filtration, relative_complex, whitney_complex,
};
use crate::error::FeecError;
use crate::hodge::{
    harmonic_gap_study, spectral_study, FortinSource, Hierarchy, HodgeLevel, SpectralReport, Tolerances,
};
use crate::polyform::CompatibleForm;
use crate::report::{self, to_pretty};
use crate::simplicial::{generate, Mesh, MeshKind, SimplicialComplex};
use crate::whitney::{commuting_defect, highorder_span, interpolate, verify_wedge_closure, Cochain};

#[derive(Parser, Debug)]
#[command(name = "feec", version, about = "Whitney forms, simplicial cohomology and discrete Hodge theory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Input {
    /// Mesh file with "vertices" and "cells".
    mesh: Option<PathBuf>,
    /// Built-in mesh, e.g. torus:3,3 or circle:24.
    #[arg(long, value_name = "KIND", value_parser = parse_kind, conflicts_with = "mesh")]
    generate: Option<MeshKind>,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report path; standard output when absent.
    #[arg(short = 'o', value_name = "PATH")]
    output: Option<PathBuf>,
    /// Override a numerical tolerance (null_space, reciprocity, stability).
    #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tol)]
    tol: Vec<(String, f64)>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simplex counts, Euler characteristic, d∘d = 0 and mesh size.
    Check {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
    },
    /// Betti numbers of the Whitney complex, or of X^•_n when n > 1.
    Betti {
        #[command(flatten)]
        input: Input,
        #[arg(short = 'n', default_value_t = 1)]
        order: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Betti numbers relative to the boundary or to a subcomplex file.
    RelativeBetti {
        #[command(flatten)]
        input: Input,
        /// "boundary" or a JSON file with "cells".
        #[arg(long)]
        rel: String,
        #[command(flatten)]
        common: Common,
    },
    /// Mayer–Vietoris exactness over the cell-by-cell assembly of the complex.
    MvCheck {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
    },
    /// Random trials of X^k_m ∧ X^l_n ⊆ X^{k+l}_{m+n}.
    WedgeCheck {
        #[command(flatten)]
        input: Input,
        /// Form degrees k,l.
        #[arg(short = 'k', value_name = "K,L", value_parser = parse_pair)]
        degrees: (usize, usize),
        /// Orders m,n.
        #[arg(short = 'n', value_name = "M,N", value_parser = parse_pair)]
        orders: (usize, usize),
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Interpolate a form file, or check D Π = Π d on random elements of X^k_n.
    Interpolate {
        #[command(flatten)]
        input: Input,
        #[arg(short = 'k')]
        degree: Option<usize>,
        #[arg(short = 'n', default_value_t = 1)]
        order: usize,
        /// Compatible form JSON file.
        #[arg(long)]
        form: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Discrete Hodge decomposition of a cochain file or of a random cochain.
    Hodge {
        #[command(flatten)]
        input: Input,
        #[arg(short = 'k')]
        degree: Option<usize>,
        /// Cochain JSON file.
        #[arg(long)]
        cochain: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Mass-orthonormal basis of the discrete harmonic forms.
    Harmonic {
        #[command(flatten)]
        input: Input,
        #[arg(short = 'k')]
        degree: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Poincaré constants over a refinement family.
    Poincare(Study),
    /// Inf-sup constants over a refinement family.
    Infsup(Study),
    /// Fortin projection: idempotence and harmonic approximation over levels.
    Fortin(Study),
    /// Gaps between consecutive discrete harmonic spaces.
    GapStudy(Study),
    /// Barycentric refinement of a mesh.
    Refine {
        #[command(flatten)]
        input: Input,
        /// Number of subdivision passes.
        #[arg(long, default_value_t = 1)]
        levels: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Write a built-in mesh.
    Generate {
        #[arg(value_parser = parse_kind)]
        kind: MeshKind,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Study {
    #[command(flatten)]
    input: Input,
    #[arg(short = 'k')]
    degree: usize,
    /// Number of meshes in the family, the input included.
    #[arg(long, default_value_t = 2)]
    levels: usize,
    #[command(flatten)]
    common: Common,
}

fn parse_kind(s: &str) -> std::result::Result<MeshKind, String> {
    s.parse().map_err(|e: FeecError| e.to_string())
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated integers, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("bad integer {x:?}"));
    Ok((p(a)?, p(b)?))
}

fn parse_tol(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let value: f64 = value.trim().parse().map_err(|_| format!("bad number {value:?}"))?;
    Tolerances::default().set(name.trim(), value).map_err(|e| e.to_string())?;
    Ok((name.trim().to_string(), value))
}

/// A failed run: a library error or a violated invariant with diagnostics.
enum Failure {
    Domain(FeecError, Option<Value>),
    Invariant { kind: &'static str, message: String, diagnostics: Value },
}

impl From<FeecError> for Failure {
    fn from(e: FeecError) -> Self {
        Failure::Domain(e, None)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_output(argv, &mut std::io::stdout().lock())
}

/// As [`run`], writing reports and error objects to `out`.
pub fn run_with_output<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(message) = configure_threads() {
        eprintln!("error: {message}");
        return 2;
    }
    let output = cli.command.common().output.clone();
    match execute(&cli.command) {
        Ok(value) => match emit(&value, output.as_deref(), out) {
            Ok(()) => 0,
            Err(e) => error_exit(&FeecError::Io(e), out),
        },
        Err(Failure::Domain(e, diagnostics)) => {
            if let Some(d) = diagnostics {
                write_sidecar(output.as_deref(), e.kind(), &e.to_string(), d);
            }
            error_exit(&e, out)
        }
        Err(Failure::Invariant { kind, message, diagnostics }) => {
            write_sidecar(output.as_deref(), kind, &message, diagnostics);
            let _ = out.write_all(to_pretty(&json!({"error": {"kind": kind, "message": message}})).as_bytes());
            1
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(text) = std::env::var("FEEC_THREADS") else {
        return Ok(());
    };
    let n: usize = text.trim().parse().map_err(|_| format!("FEEC_THREADS must be a positive integer, got {text:?}"))?;
    if n == 0 {
        return Err("FEEC_THREADS must be a positive integer".into());
    }
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn error_exit(e: &FeecError, out: &mut dyn Write) -> i32 {
    let _ = out.write_all(to_pretty(&json!({"error": {"kind": e.kind(), "message": e.to_string()}})).as_bytes());
    1
}

fn emit(value: &Value, path: Option<&Path>, out: &mut dyn Write) -> std::io::Result<()> {
    let text = to_pretty(value);
    match path {
        Some(p) => std::fs::write(p, text),
        None => out.write_all(text.as_bytes()),
    }
}

fn sidecar_path(output: Option<&Path>) -> PathBuf {
    match output {
        Some(p) => {
            let mut s = p.as_os_str().to_owned();
            s.push(".diagnostics.json");
            PathBuf::from(s)
        }
        None => PathBuf::from("feec-diagnostics.json"),
    }
}

fn write_sidecar(output: Option<&Path>, kind: &str, message: &str, diagnostics: Value) {
    let path = sidecar_path(output);
    let body = json!({"kind": kind, "message": message, "diagnostics": diagnostics});
    if let Err(e) = std::fs::write(&path, to_pretty(&body)) {
        eprintln!("warning: could not write {}: {e}", path.display());
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Check { common, .. }
            | Command::Betti { common, .. }
            | Command::RelativeBetti { common, .. }
            | Command::MvCheck { common, .. }
            | Command::WedgeCheck { common, .. }
            | Command::Interpolate { common, .. }
            | Command::Hodge { common, .. }
            | Command::Harmonic { common, .. }
            | Command::Refine { common, .. }
            | Command::Generate { common, .. } => common,
            Command::Poincare(s) | Command::Infsup(s) | Command::Fortin(s) | Command::GapStudy(s) => &s.common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Betti { .. } => "betti",
            Command::RelativeBetti { .. } => "relative-betti",
            Command::MvCheck { .. } => "mv-check",
            Command::WedgeCheck { .. } => "wedge-check",
            Command::Interpolate { .. } => "interpolate",
            Command::Hodge { .. } => "hodge",
            Command::Harmonic { .. } => "harmonic",
            Command::Poincare(_) => "poincare",
            Command::Infsup(_) => "infsup",
            Command::Fortin(_) => "fortin",
            Command::GapStudy(_) => "gap-study",
            Command::Refine { .. } => "refine",
            Command::Generate { .. } => "generate",
        }
    }
}

fn load_mesh(input: &Input) -> Outcome<Mesh> {
    match (&input.mesh, input.generate) {
        (_, Some(kind)) => Ok(generate(kind)?),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| FeecError::Parse(format!("cannot read {}: {e}", path.display())))?;
            Ok(Mesh::from_json(&text).map_err(|e| match e {
                FeecError::Parse(_) => e,
                other => FeecError::Parse(other.to_string()),
            })?)
        }
        (None, None) => Err(FeecError::InvalidParameter("give a mesh file or --generate KIND".into()).into()),
    }
}

fn read_json(path: &Path) -> Outcome<Value> {
    let text =
        std::fs::read_to_string(path).map_err(|e| FeecError::Parse(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text).map_err(|e| FeecError::Parse(format!("{}: {e}", path.display())))?)
}

fn tolerances(common: &Common) -> Outcome<Tolerances> {
    let mut t = Tolerances::default();
    for (name, value) in &common.tol {
        t.set(name, *value)?;
    }
    Ok(t)
}

fn check_degree(k: usize, complex: &SimplicialComplex) -> Outcome<()> {
    if k > complex.dim() {
        return Err(FeecError::DegreeOutOfRange { degree: k, min: 0, max: complex.dim() }.into());
    }
    Ok(())
}

fn execute(command: &Command) -> Outcome<Value> {
    let common = command.common();
    let mut value = match command {
        Command::Check { input, .. } => check(&load_mesh(input)?)?,
        Command::Betti { input, order, .. } => betti_report(&load_mesh(input)?, *order)?,
        Command::RelativeBetti { input, rel, .. } => relative_report(&load_mesh(input)?, rel)?,
        Command::MvCheck { input, .. } => mv_report(&load_mesh(input)?)?,
        Command::WedgeCheck { input, degrees, orders, trials, .. } => {
            let mesh = load_mesh(input)?;
            let r = verify_wedge_closure(
                &mesh.complex,
                (degrees.0, orders.0),
                (degrees.1, orders.1),
                *trials,
                common.seed,
            )?;
            if !r.ok() {
                return Err(Failure::Invariant {
                    kind: "wedge_closure_failure",
                    message: format!("{} of {} products left the target space", r.failures.len(), r.trials),
                    diagnostics: r.to_json(),
                });
            }
            r.to_json()
        }
        Command::Interpolate { input, degree, order, form, trials, .. } => {
            let mesh = load_mesh(input)?;
            match form {
                Some(path) => interpolate_file(&mesh, path, *degree)?,
                None => {
                    let k =
                        degree.ok_or_else(|| FeecError::InvalidParameter("-k is required without --form".into()))?;
                    commuting_report(&mesh, k, *order, *trials, common.seed)?
                }
            }
        }
        Command::Hodge { input, degree, cochain, .. } => {
            let mesh = load_mesh(input)?;
            hodge_report(&mesh, *degree, cochain.as_deref(), common.seed, tolerances(common)?)?
        }
        Command::Harmonic { input, degree, .. } => {
            let mesh = load_mesh(input)?;
            check_degree(*degree, &mesh.complex)?;
            harmonic_report(mesh, *degree, tolerances(common)?)?
        }
        Command::Poincare(s) | Command::Infsup(s) => {
            let (mesh, tol) = (load_mesh(&s.input)?, tolerances(common)?);
            check_degree(s.degree, &mesh.complex)?;
            let hierarchy =
                Hierarchy::new(mesh.clone(), s.levels, tol).map_err(|e| with_diagnostics(e, Some(&mesh)))?;
            let r = spectral_study(&hierarchy, s.degree, tol).map_err(|e| with_diagnostics(e, Some(&mesh)))?;
            spectral_json(&r)
        }
        Command::GapStudy(s) => {
            let (mesh, tol) = (load_mesh(&s.input)?, tolerances(common)?);
            let r = harmonic_gap_study(&mesh, s.levels, s.degree, tol).map_err(|e| with_diagnostics(e, Some(&mesh)))?;
            spectral_json(&r)
        }
        Command::Fortin(s) => {
            fortin_report(load_mesh(&s.input)?, s.degree, s.levels, common.seed, tolerances(common)?)?
        }
        Command::Refine { input, levels, .. } => {
            let mut mesh = load_mesh(input)?;
            for _ in 0..*levels {
                mesh = mesh.subdivide()?.mesh;
            }
            mesh.to_json_value()
        }
        Command::Generate { kind, .. } => generate(*kind)?.to_json_value(),
    };
    if let Value::Object(map) = &mut value {
        if !matches!(command, Command::Refine { .. } | Command::Generate { .. }) {
            map.insert("command".into(), json!(command.name()));
            map.insert("seed".into(), json!(common.seed));
        }
    }
    Ok(value)
}

/// Attaches coboundary matrices to invariant violations.
fn with_diagnostics(e: FeecError, mesh: Option<&Mesh>) -> Failure {
    let degrees: Vec<usize> = match &e {
        FeecError::HarmonicBettiMismatch { degree, .. } => vec![degree.wrapping_sub(1), *degree],
        FeecError::NotAComplex { degree } | FeecError::SpanNotDStable { degree } => {
            vec![degree.wrapping_sub(1), *degree]
        }
        _ => return Failure::Domain(e, None),
    };
    let mut d = Map::new();
    if let FeecError::HarmonicBettiMismatch { singular_values, found, expected, .. } = &e {
        d.insert("singular_values".into(), report::floats(singular_values));
        d.insert("found".into(), json!(found));
        d.insert("expected".into(), json!(expected));
    }
    if let Some(mesh) = mesh {
        let k = &mesh.complex;
        let mats: Map<String, Value> = degrees
            .into_iter()
            .filter(|&j| j < k.dim())
            .map(|j| (format!("d{j}"), report::matrix(&k.coboundary(j))))
            .collect();
        d.insert("coboundaries".into(), Value::Object(mats));
    }
    Failure::Domain(e, Some(Value::Object(d)))
}

fn check(mesh: &Mesh) -> Outcome<Value> {
    let k = &mesh.complex;
    let mut dd_zero = true;
    for j in 0..k.dim().saturating_sub(1) {
        dd_zero &= k.coboundary(j + 1).matmul(&k.coboundary(j))?.is_zero();
    }
    Ok(json!({
        "counts": k.counts(),
        "dim": k.dim(),
        "ambient_dim": mesh.realization.ambient_dim(),
        "maximal": k.maximal_simplices().len(),
        "euler": k.euler_characteristic(),
        "dd_zero": dd_zero,
        "h": report::float(mesh.realization.max_edge_length(k)?),
    }))
}

fn betti_report(mesh: &Mesh, order: usize) -> Outcome<Value> {
    if order == 0 {
        return Err(FeecError::InvalidParameter("order must be at least 1".into()).into());
    }
    let c = if order == 1 {
        whitney_complex(&mesh.complex)
    } else {
        highorder_complex(&mesh.complex, order).map_err(|e| with_diagnostics(e, Some(mesh)))?
    };
    let mut v = betti_json(&c);
    v["order"] = json!(order);
    v["dims"] = json!(c.dims());
    Ok(v)
}

fn relative_report(mesh: &Mesh, rel: &str) -> Outcome<Value> {
    let l = if rel == "boundary" {
        mesh.complex.boundary_subcomplex()
    } else {
        let v = read_json(Path::new(rel))?;
        let cells: Vec<Vec<usize>> = v
            .get("cells")
            .cloned()
            .ok_or_else(|| FeecError::Parse(format!("{rel}: missing \"cells\"")))
            .and_then(|c| serde_json::from_value(c).map_err(|e| FeecError::Parse(format!("{rel}: {e}"))))?;
        if cells.is_empty() {
            SimplicialComplex::empty()
        } else {
            SimplicialComplex::build_closure(&cells)?
        }
    };
    let c = relative_complex(&mesh.complex, &l)?;
    let mut v = betti_json(&c);
    v["subcomplex_counts"] = json!(l.counts());
    Ok(v)
}

fn mv_report(mesh: &Mesh) -> Outcome<Value> {
    let reports = mayer_vietoris_filtration(&mesh.complex)?;
    let ok = reports.iter().all(|r| r.ok());
    let steps: Vec<Value> = reports.iter().map(|r| r.to_json()).collect();
    if !ok {
        let failing: Vec<Value> = reports.iter().filter(|r| !r.ok()).map(|r| r.to_json()).collect();
        return Err(Failure::Invariant {
            kind: "mayer_vietoris_failure",
            message: format!("{} of {} gluing steps are not exact", failing.len(), reports.len()),
            diagnostics: json!({"failing": failing}),
        });
    }
    let c = whitney_complex(&mesh.complex);
    let (chi, _) = euler_poincare(&c);
    Ok(json!({
        "betti": crate::cohomology::betti(&c),
        "euler": chi,
        "steps": reports.len(),
        "ok": ok,
        "exactness": steps,
    }))
}

fn interpolate_file(mesh: &Mesh, path: &Path, degree: Option<usize>) -> Outcome<Value> {
    let k = &mesh.complex;
    let u = CompatibleForm::from_json(&read_json(path)?)?;
    if let Some(d) = degree.filter(|&d| d != u.degree()) {
        return Err(FeecError::DegreeMismatch { expected: d, found: u.degree() }.into());
    }
    if let Some((a, b)) = u.compatibility_defect(k)? {
        return Err(FeecError::InvalidParameter(format!("traces of the components on {a} and {b} differ")).into());
    }
    let c = interpolate(&u, k, u.degree())?;
    let mut v = json!({"cochain": c.to_json(k)});
    if u.degree() < k.dim() {
        v["commutes"] = json!(commuting_defect(k, &u)?.is_zero());
    }
    Ok(v)
}

fn commuting_report(mesh: &Mesh, degree: usize, order: usize, trials: usize, seed: u64) -> Outcome<Value> {
    let k = &mesh.complex;
    if degree >= k.dim() {
        return Err(FeecError::DegreeOutOfRange { degree, min: 0, max: k.dim().saturating_sub(1) }.into());
    }
    let space = highorder_span(k, degree, order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for trial in 0..trials {
        let u = space.random_form(k, &mut rng)?;
        if !commuting_defect(k, &u)?.is_zero() {
            failures.push(trial);
        }
    }
    if !failures.is_empty() {
        return Err(Failure::Invariant {
            kind: "commuting_failure",
            message: format!("D Π u ≠ Π du in {} of {trials} trials", failures.len()),
            diagnostics: json!({"degree": degree, "order": order, "failing_trials": failures}),
        });
    }
    Ok(json!({"degree": degree, "order": order, "trials": trials, "dim": space.dim(), "ok": true}))
}

fn hodge_report(
    mesh: &Mesh,
    degree: Option<usize>,
    cochain: Option<&Path>,
    seed: u64,
    tol: Tolerances,
) -> Outcome<Value> {
    let k = &mesh.complex;
    let c = match cochain {
        Some(path) => {
            let c = Cochain::from_json(k, &read_json(path)?)?;
            if let Some(d) = degree.filter(|&d| d != c.degree) {
                return Err(FeecError::DegreeMismatch { expected: d, found: c.degree }.into());
            }
            c
        }
        None => {
            let d = degree.ok_or_else(|| FeecError::InvalidParameter("-k is required without --cochain".into()))?;
            check_degree(d, k)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Cochain::float(d, (0..k.count(d)).map(|_| rng.random_range(-1.0..1.0)).collect())
        }
    };
    let level = HodgeLevel::with_tolerances(mesh.clone(), tol)?;
    let parts = level.hodge_decompose(c.degree, &c.to_f64()).map_err(|e| with_diagnostics(e, Some(mesh)))?;
    Ok(parts.to_json())
}

fn harmonic_report(mesh: Mesh, degree: usize, tol: Tolerances) -> Outcome<Value> {
    let level = HodgeLevel::with_tolerances(mesh.clone(), tol)?;
    let h = level.harmonic_basis(degree).map_err(|e| with_diagnostics(e, Some(&mesh)))?;
    let basis: Vec<Value> = h.vectors.column_iter().map(|c| report::floats(c.as_slice())).collect();
    Ok(json!({
        "degree": degree,
        "dim": h.dim(),
        "betti": level.betti[degree],
        "threshold": report::float(h.threshold),
        "singular_values": report::floats(&h.singular_values),
        "basis": basis,
        "thresholds": tol.to_json(),
    }))
}

fn spectral_json(r: &SpectralReport) -> Value {
    let mut v = r.to_json();
    v["summary"] = json!({
        "reciprocity_defect": report::float(r.reciprocity_defect()),
        "poincare_spread": report::optional_float(r.poincare_spread()),
    });
    v
}

fn fortin_report(mesh: Mesh, degree: usize, levels: usize, seed: u64, tol: Tolerances) -> Outcome<Value> {
    check_degree(degree, &mesh.complex)?;
    let hierarchy = Hierarchy::new(mesh, levels, tol).map_err(|e| with_diagnostics(e, None))?;
    let mut records = Vec::new();
    for (j, level) in hierarchy.levels.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let u: Vec<f64> = (0..level.count(degree)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi = level.fortin_project(degree, &FortinSource::InSpace(&u))?;
        let diff: Vec<f64> = phi.cochain.iter().zip(&u).map(|(a, b)| a - b).collect();
        let rel = level.norm(degree, &diff) / level.norm(degree, &u).max(f64::MIN_POSITIVE);
        records.push(json!({
            "h": report::float(level.h()?),
            "idempotence": report::float(rel),
            "constraint_residual": report::float(phi.constraint_residual),
        }));
    }
    let errors = if levels >= 2 {
        hierarchy.fortin_harmonic_errors(degree).map_err(|e| with_diagnostics(e, None))?
    } else {
        Vec::new()
    };
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    Ok(json!({
        "degree": degree,
        "levels": records,
        "harmonic_errors": report::floats(&errors),
        "decreasing": decreasing,
        "thresholds": tol.to_json(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, Value) {
        let mut out = Vec::new();
        let code = run_with_output(std::iter::once("feec").chain(args.iter().copied()), &mut out);
        let text = String::from_utf8(out).unwrap();
        let value = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap() };
        (code, value)
    }

    #[test]
    fn betti_of_the_torus() {
        let (code, v) = run_capture(&["betti", "--generate", "torus:3,3"]);
        assert_eq!(code, 0);
        assert_eq!(v["betti"], json!([1, 2, 1]));
        assert_eq!(v["euler"], json!(0));
        assert_eq!(v["seed"], json!(1));
    }

    #[test]
    fn relative_betti_of_a_triangle() {
        let (code, v) = run_capture(&["relative-betti", "--generate", "simplex:2", "--rel", "boundary"]);
        assert_eq!(code, 0);
        assert_eq!(v["betti"], json!([0, 0, 1]));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_capture(&["betti", "--bogus"]).0, 2);
        assert_eq!(run_capture(&["nope"]).0, 2);
        assert_eq!(run_capture(&["betti", "--generate", "cube:3"]).0, 2);
        assert_eq!(run_capture(&["hodge", "--generate", "circle:5", "-k", "0", "--tol", "nonsense=1"]).0, 2);
        assert_eq!(run_capture(&["wedge-check", "--generate", "book", "-k", "1", "-n", "1,1"]).0, 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_capture(&["--help"]).0, 0);
        assert_eq!(run_capture(&["--version"]).0, 0);
    }

    #[test]
    fn domain_errors_are_structured() {
        let (code, v) = run_capture(&["harmonic", "--generate", "circle:6", "-k", "3"]);
        assert_eq!(code, 1);
        assert_eq!(v["error"]["kind"], json!("degree_out_of_range"));
        let (code, v) = run_capture(&["check", "/nonexistent/mesh.json"]);
        assert_eq!(code, 1);
        assert_eq!(v["error"]["kind"], json!("parse"));
    }

    #[test]
    fn parsers() {
        assert_eq!(parse_pair("1, 2"), Ok((1, 2)));
        assert!(parse_pair("1").is_err());
        assert_eq!(parse_tol("null_space=1e-6"), Ok(("null_space".into(), 1e-6)));
        assert!(parse_tol("null_space=-1").is_err());
        assert_eq!(sidecar_path(Some(Path::new("r.json"))), PathBuf::from("r.json.diagnostics.json"));
        assert_eq!(sidecar_path(None), PathBuf::from("feec-diagnostics.json"));
    }
}
