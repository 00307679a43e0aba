use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mixpred_core::adversary::{preset_prior, theta_curve, DiracClassIndex, PresetPrior};
use mixpred_core::bound::{class_losses, reports_to_csv, verify_prior};
use mixpred_core::enumerate::check_budget;
use mixpred_core::loss::mc_loss;
use mixpred_core::prior::build_construction;
use mixpred_core::{ClassSpec, DiscretePrior, Error, Measure, ModelClass};
use serde::{Deserialize, Serialize};

use crate::experiment::{load_class, parse_json, parse_reference, read_text, ExperimentSpec};
use crate::output::{sha256_hex, write_atomic, RunManifest};
use crate::ExperimentArgs;

fn resolve(args: &ExperimentArgs) -> Result<ExperimentSpec> {
    let mut spec = match &args.spec {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some(class) = &args.class {
        spec.class_file = Some(class.clone());
        spec.class = None;
    }
    if let Some(rho) = &args.rho {
        spec.reference = Some(parse_reference(rho)?);
    }
    spec.max_n = args.max_n.or(spec.max_n);
    spec.budget = args.budget.or(spec.budget);
    spec.seed = args.seed.or(spec.seed);
    Ok(spec)
}

fn class_digest(class: &ModelClass) -> String {
    sha256_hex(class.to_json().as_bytes())
}

fn fmt_bits(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:?}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

// ---------------------------------------------------------------------------
// build-class
// ---------------------------------------------------------------------------

pub fn build_class(spec_path: &Path, out: Option<&Path>) -> Result<u8> {
    let spec: ClassSpec = parse_json(&read_text(spec_path)?, &spec_path.display().to_string())?;
    let class = mixpred_core::build_class(&spec)?;
    if let Some(out) = out {
        let json = class.to_json() + "\n";
        let digest = write_atomic(out, json.as_bytes())?;
        let mut manifest =
            RunManifest::new("build-class", sha256_hex(serde_json::to_string(&spec)?.as_bytes()), digest.clone());
        manifest.record(out, digest);
        manifest.write_next_to(out)?;
    }
    println!("{} measures", class.len());
    Ok(0)
}

// ---------------------------------------------------------------------------
// construct
// ---------------------------------------------------------------------------

pub fn construct(args: &ExperimentArgs, out: &Path) -> Result<u8> {
    let spec = resolve(args)?;
    let class = spec.class()?;
    let rho = spec.reference(&class)?;
    let max_n = spec.max_n()?;
    let construction = build_construction(&class, &rho, max_n, spec.budget())?;
    let dump = construction.prior.to_dump_json() + "\n";
    let digest = write_atomic(out, dump.as_bytes())?;

    let mut manifest = RunManifest::new("construct", spec.digest(&class), class_digest(&class));
    manifest.reference = Some(rho.id().to_owned());
    manifest.max_n = Some(max_n);
    manifest.parameters.insert("budget".into(), spec.budget().into());
    manifest.parameters.insert("covering_mass".into(), construction.covering_mass.into());
    manifest.record(out, digest);
    manifest.write_next_to(out)?;
    println!(
        "prior with {} components over {} measures, covering mass {:.6}",
        construction.prior.components().len(),
        class.len(),
        construction.covering_mass
    );
    Ok(0)
}

/// Loads a prior dump and checks it against the manifest written with it.
fn load_prior(path: &Path, class: &ModelClass, rho: &Measure, max_n: usize) -> Result<DiscretePrior> {
    let text = read_text(path)?;
    if let Some(manifest) = RunManifest::load_for(path)? {
        if manifest.class_sha256 != class_digest(class) {
            return Err(Error::Inconsistent(format!("{} was built for a different class", path.display())).into());
        }
        if let Some(reference) = &manifest.reference {
            if reference != rho.id() {
                return Err(Error::Inconsistent(format!(
                    "{} was built for reference {reference}, not {}",
                    path.display(),
                    rho.id()
                ))
                .into());
            }
        }
        if let Some(built) = manifest.max_n {
            if max_n > built {
                return Err(
                    Error::Inconsistent(format!("{} was built for N = {built} < {max_n}", path.display())).into()
                );
            }
        }
        if let Some(recorded) = manifest.outputs.first() {
            if recorded.sha256 != sha256_hex(text.as_bytes()) {
                return Err(
                    Error::Inconsistent(format!("{} does not match its manifest digest", path.display())).into()
                );
            }
        }
    }
    DiscretePrior::from_dump_json(&text, class).with_context(|| format!("loading prior {}", path.display()))
}

fn prior_for(
    spec: &ExperimentSpec,
    prior: Option<&Path>,
    class: &ModelClass,
    rho: &Measure,
    max_n: usize,
) -> Result<DiscretePrior> {
    match prior {
        Some(path) => load_prior(path, class, rho, max_n),
        None => Ok(build_construction(class, rho, max_n, spec.budget())?.prior),
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

pub fn verify(args: &ExperimentArgs, prior: Option<&Path>, out: &Path) -> Result<u8> {
    let spec = resolve(args)?;
    let class = spec.class()?;
    let rho = spec.reference(&class)?;
    let max_n = spec.max_n()?;
    let prior = prior_for(&spec, prior, &class, &rho, max_n)?;
    let reports = verify_prior(&prior, &rho, max_n, spec.budget())?;
    let digest = write_atomic(out, reports_to_csv(&reports).as_bytes())?;

    let mut manifest = RunManifest::new("verify", spec.digest(&class), class_digest(&class));
    manifest.reference = Some(rho.id().to_owned());
    manifest.max_n = Some(max_n);
    manifest.record(out, digest);
    manifest.write_next_to(out)?;

    let passed = reports.iter().filter(|r| r.pass).count();
    let min_margin = reports.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    println!("{passed}/{} rows pass, min margin {min_margin:.4} bits", reports.len());
    Ok(if passed == reports.len() { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

pub const EVALUATE_HEADER: &str =
    "measure_id,n,method,loss_nu_bits,loss_rho_bits,regret_bits,std_error_nu_bits,std_error_rho_bits,seed";

pub fn evaluate(
    args: &ExperimentArgs,
    prior: Option<&Path>,
    horizons: &[usize],
    monte_carlo: bool,
    samples: Option<usize>,
    out: &Path,
) -> Result<u8> {
    let mut spec = resolve(args)?;
    spec.monte_carlo |= monte_carlo;
    spec.samples = samples.or(spec.samples);
    let class = spec.class()?;
    let rho = spec.reference(&class)?;
    let horizons: Vec<usize> = if horizons.is_empty() { (1..=spec.max_n()?).collect() } else { horizons.to_vec() };
    if horizons.contains(&0) {
        return Err(Error::InvalidInput("horizons must be >= 1".into()).into());
    }
    let prior = match prior {
        Some(path) => load_prior(path, &class, &rho, 0)?,
        None => build_construction(&class, &rho, spec.max_n()?, spec.budget())?.prior,
    };
    let nu = prior.measure()?;

    // rows[member][horizon index]
    let mut rows: Vec<Vec<String>> = vec![Vec::new(); class.len()];
    for &n in &horizons {
        match check_budget(class.alphabet(), n, spec.budget()) {
            Ok(_) => {
                let losses = class_losses(&class, &[nu, &rho], n, spec.budget())?;
                for (m, l) in losses.iter().enumerate() {
                    rows[m].push(format!(
                        "{},{n},exact,{},{},{},0.0,0.0,",
                        csv_field(class.get(m).id()),
                        fmt_bits(l[0]),
                        fmt_bits(l[1]),
                        fmt_bits(l[0] - l[1])
                    ));
                }
            }
            Err(e @ Error::BudgetExceeded { .. }) if !spec.monte_carlo => return Err(e.into()),
            Err(Error::BudgetExceeded { .. }) => {
                for (m, mu) in class.measures().iter().enumerate() {
                    let seed = spec.seed().wrapping_add((m * horizons.len() + n) as u64);
                    let a = mc_loss(mu, nu, n, spec.samples(), seed)?;
                    let b = mc_loss(mu, &rho, n, spec.samples(), seed)?;
                    rows[m].push(format!(
                        "{},{n},monte_carlo,{},{},{},{},{},{seed}",
                        csv_field(mu.id()),
                        fmt_bits(a.mean),
                        fmt_bits(b.mean),
                        fmt_bits(a.mean - b.mean),
                        fmt_bits(a.std_error),
                        fmt_bits(b.std_error)
                    ));
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mut csv = String::from(EVALUATE_HEADER);
    csv.push('\n');
    for line in rows.into_iter().flatten() {
        csv.push_str(&line);
        csv.push('\n');
    }
    let digest = write_atomic(out, csv.as_bytes())?;
    let mut manifest = RunManifest::new("evaluate", spec.digest(&class), class_digest(&class));
    manifest.reference = Some(rho.id().to_owned());
    manifest.seed = Some(spec.seed());
    manifest.parameters.insert("horizons".into(), serde_json::json!(horizons));
    manifest.parameters.insert("samples".into(), spec.samples().into());
    manifest.record(out, digest);
    manifest.write_next_to(out)?;
    println!("{} measures x {} horizons evaluated", class.len(), horizons.len());
    Ok(0)
}

// ---------------------------------------------------------------------------
// lower-bound
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LowerBoundSpec {
    prior: Option<PathBuf>,
    class: Option<PathBuf>,
    preset: Option<String>,
    k: Option<usize>,
}

pub struct LowerBoundArgs {
    pub prior: Option<PathBuf>,
    pub class: Option<PathBuf>,
    pub preset: Option<String>,
    pub k: Option<usize>,
    pub spec: Option<PathBuf>,
}

#[derive(Serialize)]
struct Curve<'a> {
    k: usize,
    class: &'a str,
    rows: Vec<mixpred_core::Witness>,
}

pub fn lower_bound(args: LowerBoundArgs, out: &Path, plot_data: Option<&Path>) -> Result<u8> {
    let mut spec = match &args.spec {
        Some(path) => {
            let mut s: LowerBoundSpec = parse_json(&read_text(path)?, &path.display().to_string())?;
            let base = path.parent().unwrap_or(Path::new("."));
            s.prior = s.prior.map(|p| base.join(p));
            s.class = s.class.map(|p| base.join(p));
            s
        }
        None => LowerBoundSpec::default(),
    };
    if args.prior.is_some() || args.preset.is_some() {
        spec.prior = args.prior;
        spec.class = args.class.or(spec.class);
        spec.preset = args.preset;
    }
    spec.k = args.k.or(spec.k);

    let prior = match (&spec.preset, &spec.prior, &spec.class) {
        (Some(name), _, _) => {
            let k = spec.k.ok_or_else(|| Error::InvalidInput("--preset needs --k".into()))?;
            preset_prior(name.parse::<PresetPrior>()?, k)?
        }
        (None, Some(prior), Some(class)) => {
            let class = load_class(class)?;
            DiscretePrior::from_dump_json(&read_text(prior)?, &class)
                .with_context(|| format!("loading prior {}", prior.display()))?
        }
        _ => return Err(Error::InvalidInput("give --preset and --k, or --prior and --class".into()).into()),
    };
    let index = DiracClassIndex::from_class(prior.class())?;
    let k = spec.k.unwrap_or(index.k);
    let rows = theta_curve(&prior, k)?;

    let class = prior.class();
    let curve = Curve { k, class: class.description(), rows };
    let json = serde_json::to_string_pretty(&curve)? + "\n";
    let digest = write_atomic(out, json.as_bytes())?;
    let mut manifest =
        RunManifest::new("lower-bound", sha256_hex(prior.to_dump_json().as_bytes()), class_digest(class));
    manifest.parameters.insert("k".into(), k.into());
    manifest.record(out, digest);
    if let Some(tsv) = plot_data {
        let mut text = String::from("n\twitness_regret_bits\n");
        for w in &curve.rows {
            text.push_str(&format!("{}\t{}\n", w.n, fmt_bits(w.actual_regret_bits)));
        }
        let d = write_atomic(tsv, text.as_bytes())?;
        manifest.record(tsv, d);
    }
    manifest.write_next_to(out)?;
    println!("{} witnesses for K = {k}", curve.rows.len());
    Ok(0)
}
