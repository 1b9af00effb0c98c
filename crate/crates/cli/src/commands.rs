use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use apot_core::afree::{
    compactify_sequence, standard_moments, ym_moments, AfreeError, CompactifiedField, MomentOptions, PipelineParams,
    Region, TestFunction,
};
use apot_core::diffop::DiffOp;
use apot_core::envelope::{
    check_domain_invariance_with, estimate_envelope_with, parse_integrand, DomainBox, EnvelopeError, EnvelopeEstimate,
    EnvelopeOptions,
};
use apot_core::exactness::{
    certify_constant_rank, falsify_constant_rank, fmt_point, generic_rank, potential_with, verify_exact_pair,
    Certificate, ExactnessError, SynthesisOptions, DEFAULT_MAX_DEPTH,
};
use apot_core::polymat::{parse_rational, rational_to_f64};
use apot_core::spectral::{
    apply_diffop, project_afree, read_afield, read_afield_binary, recover_potential_with, write_afield,
    write_afield_binary, RecoverOptions, SpatialField, SpectralError, TorusField,
};
use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::opfile::{parse_operator, write_operator, OpFileError};
use crate::report::{list, num, Report, Section, Status};

#[derive(Debug, Parser)]
#[command(name = "apot", version, about = "Exact potentials, annihilators and A-free field tools")]
pub struct Cli {
    /// Put the wall time in the report instead of on stderr.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generic rank and characteristic coefficients of the symbol.
    Rank {
        op: PathBuf,
        /// Also decide constant rank (falsifier, then interval subdivision).
        #[arg(long)]
        certify: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        max_depth: u32,
        /// Falsifier budget.
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Same as `rank --certify`.
    Certify {
        op: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        max_depth: u32,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Synthesize a potential B with im B(ξ) = ker A(ξ).
    Potential {
        op: PathBuf,
        #[arg(short = 'o')]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Synthesize an annihilator A with ker A(ξ) = im B(ξ).
    Annihilator {
        op: PathBuf,
        #[arg(short = 'o')]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check A·B ≡ 0 and the rank sum at random rational frequencies.
    Verify {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the sample table as CSV.
        #[arg(short = 'o')]
        output: Option<PathBuf>,
    },
    /// Project a periodic field onto the A-free subspace.
    Project {
        a: PathBuf,
        field: PathBuf,
        #[arg(short = 'o')]
        output: Option<PathBuf>,
        /// Write the compact binary field format.
        #[arg(long)]
        binary: bool,
    },
    /// Recover u with Bu = w for an A-free field w.
    Recover {
        b: PathBuf,
        field: PathBuf,
        #[arg(short = 'o')]
        output: Option<PathBuf>,
        #[arg(long)]
        subtract_mean: bool,
        /// Annihilator used to check that the input is A-free.
        #[arg(long)]
        annihilator: Option<PathBuf>,
        /// Relative tolerance of the A-free check.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        binary: bool,
    },
    /// Upper bound for the envelope of f at η over test potentials of B.
    Envelope {
        b: PathBuf,
        /// Integrand expression or builtin name.
        #[arg(long = "f")]
        integrand: String,
        /// Comma-separated fiber vector; rationals allowed.
        #[arg(long, allow_hyphen_values = true)]
        eta: String,
        #[arg(long, default_value_t = 200)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long, default_value_t = 2)]
        modes: u32,
        #[arg(long, default_value_t = 0.25)]
        margin: f64,
        /// Box `lo1,...,lon:hi1,...,hin` for the domain comparison.
        #[arg(long = "box")]
        domain: Option<String>,
        /// CSV convergence trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compactify a sequence of A-free fields (key = value config file).
    Pipeline {
        a: PathBuf,
        config: PathBuf,
        /// Potential; synthesized from A when absent.
        #[arg(long)]
        potential: Option<PathBuf>,
        /// Directory for the output fields.
        #[arg(short = 'o')]
        output: Option<PathBuf>,
        #[arg(long)]
        binary: bool,
    },
    /// First and second moments, norms and tail masses of fields.
    Moments {
        #[arg(required = true)]
        fields: Vec<PathBuf>,
        /// Average only over points this far from the boundary.
        #[arg(long)]
        inner: Option<f64>,
        #[arg(long)]
        annihilator: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Rank { .. } => "rank",
            Command::Certify { .. } => "certify",
            Command::Potential { .. } => "potential",
            Command::Annihilator { .. } => "annihilator",
            Command::Verify { .. } => "verify",
            Command::Project { .. } => "project",
            Command::Recover { .. } => "recover",
            Command::Envelope { .. } => "envelope",
            Command::Pipeline { .. } => "pipeline",
            Command::Moments { .. } => "moments",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    OpFile { path: String, source: OpFileError },
    #[error("{path}:{line}: {message}")]
    Config { path: String, line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Exactness(#[from] ExactnessError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Afree(#[from] AfreeError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> Report {
    let name = cli.command.name();
    match dispatch(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            let mut r = Report::new(name);
            r.status = Status::Error;
            r.push(Section::new("error").with("message", e));
            r
        }
    }
}

fn dispatch(cmd: &Command) -> Result<Report> {
    let name = cmd.name();
    match cmd {
        Command::Rank {
            op,
            certify,
            max_depth,
            samples,
            seed,
        } => rank(name, op, *certify, *max_depth, *samples, *seed),
        Command::Certify {
            op,
            max_depth,
            samples,
            seed,
        } => rank(name, op, true, *max_depth, *samples, *seed),
        Command::Potential {
            op,
            output,
            samples,
            seed,
        } => synthesize(name, op, output.as_deref(), *samples, *seed, true),
        Command::Annihilator {
            op,
            output,
            samples,
            seed,
        } => synthesize(name, op, output.as_deref(), *samples, *seed, false),
        Command::Verify {
            a,
            b,
            samples,
            seed,
            output,
        } => verify(a, b, *samples, *seed, output.as_deref()),
        Command::Project {
            a,
            field,
            output,
            binary,
        } => project(a, field, output.as_deref(), *binary),
        Command::Recover {
            b,
            field,
            output,
            subtract_mean,
            annihilator,
            tol,
            binary,
        } => recover(b, field, output.as_deref(), *subtract_mean, annihilator.as_deref(), *tol, *binary),
        Command::Envelope {
            b,
            integrand,
            eta,
            budget,
            seed,
            grid,
            modes,
            margin,
            domain,
            trace,
        } => {
            let opts = EnvelopeOptions {
                grid: *grid,
                modes: *modes,
                margin: *margin,
                ..EnvelopeOptions::default()
            };
            envelope(b, integrand, eta, *budget, *seed, &opts, domain.as_deref(), trace.as_deref())
        }
        Command::Pipeline {
            a,
            config,
            potential,
            output,
            binary,
        } => pipeline(a, config, potential.as_deref(), output.as_deref(), *binary),
        Command::Moments {
            fields,
            inner,
            annihilator,
        } => moments(fields, *inner, annihilator.as_deref()),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn load_operator(path: &Path) -> Result<DiffOp> {
    parse_operator(&read_text(path)?).map_err(|source| CliError::OpFile {
        path: path.display().to_string(),
        source,
    })
}

fn load_field(path: &Path) -> Result<TorusField> {
    let bytes = read_bytes(path)?;
    let field = if bytes.starts_with(b"AFIELDB1") {
        read_afield_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| CliError::Usage(format!("{}: not UTF-8", path.display())))?;
        read_afield(&text)
    };
    field.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn store_field(path: &Path, w: &TorusField, binary: bool) -> Result<()> {
    if binary {
        write_atomic(path, &write_afield_binary(w))
    } else {
        write_atomic(path, write_afield(w).as_bytes())
    }
}

fn operator_section(name: &str, path: &Path, op: &DiffOp) -> Section {
    Section::new(name)
        .with("file", path.display())
        .with("n", op.n())
        .with("order", op.order())
        .with("dim_from", op.dim_from())
        .with("dim_to", op.dim_to())
}

fn rank(name: &str, path: &Path, certify: bool, max_depth: u32, samples: usize, seed: u64) -> Result<Report> {
    let a = load_operator(path)?;
    let rr = generic_rank(&a);
    let mut r = Report::new(name);
    r.push(operator_section("operator", path, &a));
    let mut s = Section::new("rank");
    s.add("generic_rank", rr.generic_rank);
    s.add("leading_invariant", rr.leading_invariant());
    for (j, c) in rr.a_coeffs.iter().enumerate() {
        s.add(format!("a{j}"), c);
    }
    r.push(s);
    if certify {
        let mut c = Section::new("certificate");
        c.add("max_depth", max_depth);
        c.add("falsifier_samples", samples);
        c.add("seed", seed);
        if let Some(w) = falsify_constant_rank(&a, samples, seed) {
            r.status = Status::Falsified;
            c.add("result", "falsified").add("source", "sampling").add("witness", fmt_point(&w));
        } else {
            match certify_constant_rank(&a, max_depth) {
                Certificate::Certified { depth } => {
                    c.add("result", "certified").add("depth", depth);
                }
                Certificate::Falsified { witness } => {
                    r.status = Status::Falsified;
                    c.add("result", "falsified")
                        .add("source", "subdivision")
                        .add("witness", fmt_point(&witness));
                }
                Certificate::Inconclusive {
                    min_sampled_value,
                    samples,
                } => {
                    r.status = Status::Inconclusive;
                    c.add("result", "inconclusive")
                        .add("min_sampled_value", num(min_sampled_value))
                        .add("sampled_centres", samples);
                }
            }
        }
        r.push(c);
    }
    Ok(r)
}

fn synthesize(name: &str, path: &Path, output: Option<&Path>, samples: usize, seed: u64, forward: bool) -> Result<Report> {
    let op = load_operator(path)?;
    let opts = SynthesisOptions {
        falsify_budget: samples,
        seed,
    };
    let result = if forward {
        potential_with(&op, &opts)
    } else {
        apot_core::exactness::annihilator_with(&op, &opts)
    };
    let mut r = Report::new(name);
    r.push(operator_section("input", path, &op));
    match result {
        Ok(out) => {
            let text = write_operator(&out);
            let mut s = Section::new("output")
                .with("order", out.order())
                .with("dim_from", out.dim_from())
                .with("dim_to", out.dim_to())
                .with("terms", out.coeffs().count());
            if let Some(o) = output {
                write_atomic(o, text.as_bytes())?;
                s.add("file", o.display());
            } else {
                s = s.body(text);
            }
            r.push(s);
        }
        Err(ExactnessError::NotConstantRank { witness }) => {
            r.status = Status::Falsified;
            r.push(
                Section::new("certificate")
                    .with("result", "falsified")
                    .with("witness", fmt_point(&witness)),
            );
        }
        Err(e) => return Err(e.into()),
    }
    Ok(r)
}

fn verify(pa: &Path, pb: &Path, samples: usize, seed: u64, output: Option<&Path>) -> Result<Report> {
    let a = load_operator(pa)?;
    let b = load_operator(pb)?;
    let mut r = Report::new("verify");
    r.push(operator_section("annihilator", pa, &a));
    r.push(operator_section("potential", pb, &b));
    let mut s = Section::new("verify").with("samples", samples).with("seed", seed);
    match verify_exact_pair(&a, &b, samples, seed) {
        Ok(pair) => {
            s.add("symbolic_zero", pair.symbolic_zero).add("rank_sum", a.dim_from());
            r.push(s);
            let mut csv = String::new();
            let cols: Vec<String> = (1..=a.n()).map(|i| format!("xi{i}")).collect();
            csv.push_str(&format!("{},rank_a,rank_b\n", cols.join(",")));
            for row in &pair.rank_samples {
                let xi: Vec<String> = row.xi.iter().map(apot_core::polymat::format_rational).collect();
                csv.push_str(&format!("{},{},{}\n", xi.join(","), row.rank_a, row.rank_b));
            }
            if let Some(o) = output {
                write_atomic(o, csv.as_bytes())?;
            }
            r.push(Section::new("samples").body(csv));
        }
        Err(ExactnessError::CompositionNonzero { row, col, entry }) => {
            r.status = Status::Falsified;
            s.add("symbolic_zero", false)
                .add("row", row + 1)
                .add("col", col + 1)
                .add("entry", entry);
            r.push(s);
        }
        Err(ExactnessError::RankSumFailure { xi, rank_a, rank_b, dim }) => {
            r.status = Status::Falsified;
            s.add("symbolic_zero", true)
                .add("witness", fmt_point(&xi))
                .add("rank_a", rank_a)
                .add("rank_b", rank_b)
                .add("dim", dim);
            r.push(s);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(r)
}

fn field_section(path: &Path, w: &TorusField) -> Section {
    Section::new("field")
        .with("file", path.display())
        .with("n", w.n())
        .with("grid", w.m())
        .with("d", w.d())
        .with("real", w.is_real())
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a
    } else {
        a / b
    }
}

fn project(pa: &Path, pf: &Path, output: Option<&Path>, binary: bool) -> Result<Report> {
    let a = load_operator(pa)?;
    let w = load_field(pf)?;
    let pw = project_afree(&a, &w)?;
    let residual = ratio(apply_diffop(&a, &pw)?.l2_norm(), w.l2_norm());
    let idem = ratio(project_afree(&a, &pw)?.sub(&pw)?.l2_norm(), pw.l2_norm());
    let mut r = Report::new("project");
    r.push(operator_section("operator", pa, &a));
    r.push(field_section(pf, &w));
    let mut s = Section::new("projection")
        .with("input_l2", num(w.l2_norm()))
        .with("output_l2", num(pw.l2_norm()))
        .with("afree_residual", num(residual))
        .with("idempotency_defect", num(idem));
    if let Some(o) = output {
        store_field(o, &pw, binary)?;
        s.add("file", o.display());
    }
    r.push(s);
    Ok(r)
}

fn recover(
    pb: &Path,
    pf: &Path,
    output: Option<&Path>,
    subtract_mean: bool,
    annihilator: Option<&Path>,
    tol: Option<f64>,
    binary: bool,
) -> Result<Report> {
    let b = load_operator(pb)?;
    let w = load_field(pf)?;
    let opts = RecoverOptions {
        subtract_mean,
        annihilator: annihilator.map(load_operator).transpose()?,
        tol,
    };
    let u = recover_potential_with(&b, &w, &opts)?;
    let mut target = w.clone();
    if subtract_mean {
        if let Some(slot) = target.coeff_mut(&vec![0; w.n()]) {
            for z in slot.iter_mut() {
                *z -= *z;
            }
        }
    }
    let residual = ratio(apply_diffop(&b, &u)?.sub(&target)?.l2_norm(), target.l2_norm());
    let mut r = Report::new("recover");
    r.push(operator_section("operator", pb, &b));
    r.push(field_section(pf, &w));
    let mut s = Section::new("recovery")
        .with("subtract_mean", subtract_mean)
        .with("potential_l2", num(u.l2_norm()))
        .with("residual", num(residual));
    if let Some(o) = output {
        store_field(o, &u, binary)?;
        s.add("file", o.display());
    }
    r.push(s);
    Ok(r)
}

fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim();
    parse_rational(t).map(|q| rational_to_f64(&q)).or_else(|| t.parse().ok())
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| parse_number(s).ok_or_else(|| CliError::Usage(format!("bad {what} entry `{}`", s.trim()))))
        .collect()
}

fn estimate_section(name: &str, est: &EnvelopeEstimate) -> Section {
    let best = &est.best;
    let norm = best.coeffs().iter().map(|c| c * c).sum::<f64>().sqrt();
    Section::new(name)
        .with("f_eta", num(est.f_eta))
        .with("value", num(est.value))
        .with("diverged", est.diverged)
        .with("evaluations", est.evaluations)
        .with(
            "best_restart",
            est.best_restart.map_or("none".to_string(), |r| r.to_string()),
        )
        .with("best_seed", best.seed())
        .with("best_coeff_norm", num(norm))
        .with("best_coeffs", list(best.coeffs()))
}

#[allow(clippy::too_many_arguments)]
fn envelope(
    pb: &Path,
    integrand: &str,
    eta: &str,
    budget: u64,
    seed: u64,
    opts: &EnvelopeOptions,
    domain: Option<&str>,
    trace: Option<&Path>,
) -> Result<Report> {
    let b = load_operator(pb)?;
    let f = parse_integrand(integrand).map_err(EnvelopeError::from)?;
    let eta = parse_list(eta, "eta")?;
    let shape = opts.shape(&b)?;
    let mut r = Report::new("envelope");
    r.push(operator_section("operator", pb, &b));
    r.push(
        Section::new("search")
            .with("f", f.name())
            .with("growth", f.growth())
            .with("eta", list(&eta))
            .with("budget", budget)
            .with("seed", seed)
            .with("grid", opts.grid)
            .with("modes", opts.modes)
            .with("margin", num(opts.margin))
            .with("cutoff_order", shape.cutoff.order())
            .with("floor", num(-opts.floor)),
    );
    let est = match domain {
        None => {
            let est = estimate_envelope_with(&f, &eta, &b, budget, seed, opts)?;
            r.push(estimate_section("envelope", &est));
            est
        }
        Some(text) => {
            let (lo, hi) = text
                .split_once(':')
                .ok_or_else(|| CliError::Usage("--box expects lo1,...:hi1,...".into()))?;
            let dom = DomainBox::new(parse_list(lo, "box")?, parse_list(hi, "box")?)?;
            let rep = check_domain_invariance_with(&f, &eta, &b, &dom, budget, seed, opts)?;
            r.push(estimate_section("envelope", &rep.cube_estimate));
            r.push(estimate_section("box_envelope", &rep.box_estimate));
            let mut s = Section::new("domain")
                .with("lo", list(&dom.lo))
                .with("hi", list(&dom.hi))
                .with("epsilon", num(rep.epsilon))
                .with("shift", list(&rep.shift))
                .with("transferred", num(rep.transferred))
                .with("consistent", rep.consistent);
            match &rep.identity {
                Some(id) => {
                    s.add("identity_grid", id.grid)
                        .add("identity_potential", if id.fallback_seed.is_some() { "seeded" } else { "box_best" })
                        .add("identity_cube_average", num(id.cube_average))
                        .add("identity_rearranged", num(id.rearranged))
                        .add("identity_error", num(id.error()));
                }
                None => {
                    s.add("identity_grid", "none");
                }
            }
            r.push(s);
            rep.cube_estimate
        }
    };
    if let Some(t) = trace {
        write_atomic(t, est.trace_csv().as_bytes())?;
    }
    Ok(r)
}

#[derive(Debug, Default)]
struct PipelineConfig {
    fields: Vec<PathBuf>,
    sine: Vec<u32>,
    grid: Option<usize>,
    sine_component: Option<usize>,
    potential: Option<PathBuf>,
    params: PipelineParams,
}

fn parse_config(path: &Path) -> Result<PipelineConfig> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut cfg = PipelineConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| CliError::Config {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(format!("expected `key = value`, found `{content}`")))?;
        let number = || parse_number(value).ok_or_else(|| err(format!("`{key}` needs a number")));
        let list = || parse_list(value, key).map_err(|e| err(e.to_string()));
        match key {
            "field" => cfg.fields.push(base.join(value)),
            "potential" => cfg.potential = Some(base.join(value)),
            "sine" => {
                cfg.sine = value
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| err(format!("bad frequency `{}`", s.trim()))))
                    .collect::<Result<_>>()?
            }
            "grid" => cfg.grid = Some(value.parse().map_err(|_| err("`grid` needs an integer".into()))?),
            "sine_component" => {
                cfg.sine_component = Some(value.parse().map_err(|_| err("`sine_component` needs an integer".into()))?)
            }
            "alphas" => cfg.params.alphas = Some(list()?),
            "alpha_base" => cfg.params.alpha_base = number()?,
            "alpha_growth" => cfg.params.alpha_growth = number()?,
            "step1_margin" => cfg.params.step1_margin = Some(number()?),
            "mollifier" => cfg.params.mollifier = Some(number()?),
            "min_margin" => cfg.params.min_margin = Some(number()?),
            "subtract_mean" => {
                cfg.params.subtract_mean = value.parse().map_err(|_| err("`subtract_mean` is true or false".into()))?
            }
            _ => return Err(err(format!("unknown key `{key}`"))),
        }
    }
    if cfg.fields.is_empty() && cfg.sine.is_empty() {
        return Err(CliError::Config {
            path: path.display().to_string(),
            line: 0,
            message: "no `field` or `sine` entries".into(),
        });
    }
    if !cfg.fields.is_empty() && !cfg.sine.is_empty() {
        return Err(CliError::Config {
            path: path.display().to_string(),
            line: 0,
            message: "use either `field` or `sine`, not both".into(),
        });
    }
    Ok(cfg)
}

fn band_max(f: &CompactifiedField) -> f64 {
    let mut worst: f64 = 0.0;
    for p in 0..f.field.npoints() {
        let dist = f.field.coords(p).iter().map(|&v| v.min(1.0 - v)).fold(1.0, f64::min);
        if dist <= f.band() {
            worst = f.field.point(p).iter().fold(worst, |m, v| m.max(v.abs()));
        }
    }
    worst
}

fn inner_moments(w: &SpatialField, margin: f64) -> Result<(Vec<String>, Vec<f64>)> {
    let tests = standard_moments(w.d());
    let refs: Vec<&dyn TestFunction> = tests.iter().map(|t| t as &dyn TestFunction).collect();
    let opts = MomentOptions {
        region: Region::Inner(margin),
        ..MomentOptions::default()
    };
    let diag = ym_moments(std::slice::from_ref(w), &refs, &opts)?;
    Ok((diag.names, diag.elements[0].moments.clone()))
}

fn pipeline(pa: &Path, pconfig: &Path, potential: Option<&Path>, output: Option<&Path>, binary: bool) -> Result<Report> {
    let a = load_operator(pa)?;
    let cfg = parse_config(pconfig)?;
    let b = match potential.map(Path::to_path_buf).or(cfg.potential.clone()) {
        Some(p) => load_operator(&p)?,
        None => potential_with(&a, &SynthesisOptions::default())?,
    };
    let inputs: Vec<SpatialField> = if cfg.sine.is_empty() {
        cfg.fields
            .iter()
            .map(|p| load_field(p).map(|w| w.inverse()))
            .collect::<Result<_>>()?
    } else {
        let grid = cfg.grid.ok_or_else(|| CliError::Usage("`sine` needs `grid`".into()))?;
        let d = a.dim_from();
        let comp = cfg.sine_component.unwrap_or(d);
        if comp == 0 || comp > d {
            return Err(CliError::Usage(format!("sine_component must be in 1..={d}")));
        }
        cfg.sine
            .iter()
            .map(|&j| {
                SpatialField::from_fn(a.n(), grid, d, |x| {
                    let mut v = vec![0.0; d];
                    v[comp - 1] = (2.0 * PI * j as f64 * x[0]).sin();
                    v
                })
            })
            .collect()
    };
    let out = compactify_sequence(&a, &b, &inputs, &cfg.params)?;
    if let Some(dir) = output {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    let mut r = Report::new("pipeline");
    r.push(operator_section("annihilator", pa, &a));
    r.push(
        Section::new("sequence")
            .with("elements", inputs.len())
            .with("default_ladder", out.default_ladder)
            .with("subtract_mean", cfg.params.subtract_mean),
    );
    let ext = if binary { "afb" } else { "afield" };
    for (j, (w, f)) in inputs.iter().zip(&out.fields).enumerate() {
        let (names, m_in) = inner_moments(w, f.margin)?;
        let (_, m_out) = inner_moments(&f.field, f.margin)?;
        let err = m_in.iter().zip(&m_out).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let mut s = Section::new(format!("element {}", j + 1))
            .with("alpha", num(f.alpha))
            .with("step1_margin", num(f.step1_margin))
            .with("mollifier", num(f.mollifier))
            .with("margin", num(f.margin))
            .with("band", num(f.band()))
            .with("cutoff_constant", num(f.cutoff_constant))
            .with("mean_removed", list(&f.mean_removed))
            .with("inner_residual", num(f.inner_residual))
            .with("band_max_abs", num(band_max(f)))
            .with("moment_names", names.join(","))
            .with("moments_in", list(&m_in))
            .with("moments_out", list(&m_out))
            .with("moment_error", num(err));
        if let Some(dir) = output {
            let fp = dir.join(format!("field_{}.{ext}", j + 1));
            let pp = dir.join(format!("potential_{}.{ext}", j + 1));
            store_field(&fp, &TorusField::transform(&f.field), binary)?;
            store_field(&pp, &TorusField::transform(&f.potential), binary)?;
            s.add("field_file", fp.display()).add("potential_file", pp.display());
        }
        r.push(s);
    }
    Ok(r)
}

fn moments(paths: &[PathBuf], inner: Option<f64>, annihilator: Option<&Path>) -> Result<Report> {
    let fields: Vec<SpatialField> = paths.iter().map(|p| load_field(p).map(|w| w.inverse())).collect::<Result<_>>()?;
    let d = fields[0].d();
    if fields.iter().any(|w| w.d() != d) {
        return Err(CliError::Usage("all fields must share the fiber dimension".into()));
    }
    let tests = standard_moments(d);
    let refs: Vec<&dyn TestFunction> = tests.iter().map(|t| t as &dyn TestFunction).collect();
    let opts = MomentOptions {
        region: inner.map_or(Region::Cube, Region::Inner),
        annihilator: annihilator.map(load_operator).transpose()?,
        ..MomentOptions::default()
    };
    let diag = ym_moments(&fields, &refs, &opts)?;
    let mut r = Report::new("moments");
    r.push(
        Section::new("moments")
            .with("p", diag.p)
            .with("region", inner.map_or("cube".to_string(), |m| format!("inner {}", num(m))))
            .with("names", diag.names.join(",")),
    );
    for (path, e) in paths.iter().zip(&diag.elements) {
        let mut s = Section::new(format!("field {}", path.display()))
            .with("lp_norm", num(e.lp_norm))
            .with("moments", list(&e.moments));
        if let Some(res) = e.sobolev_residual {
            s.add("sobolev_residual", num(res));
        }
        r.push(s);
    }
    let mut csv = String::from("alpha,tail_mass\n");
    for (alpha, mass) in &diag.tail_ladder {
        csv.push_str(&format!("{},{}\n", num(*alpha), num(*mass)));
    }
    r.push(Section::new("tail_ladder").body(csv));
    Ok(r)
}
