use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use imfuse_core::io::{curve_to_string, grid_function_to_string, read_contour_path, write_atomic};
use imfuse_core::{
    check_validity, fuse as fuse_contours, necessity, normal_mean_contour, possibility, simulate_study_set,
    CalibratorChoice, Claim, FusionRule, GridFunction, InputLaw, ParameterGrid, StudySpec, ValidityPipeline,
    Verdict,
};
use serde::Serialize;
use serde_json::json;

use crate::{CalibratorArg, CalibratorOpts, CertifyArgs, CliError, CurveArgs, DemoArgs, FuseArgs, InputsArg, MeasureArgs};

type CmdResult = Result<(), CliError>;

fn choice(opts: &CalibratorOpts) -> CalibratorChoice {
    match opts.calibrator {
        CalibratorArg::Closed => CalibratorChoice::Closed,
        CalibratorArg::Mc => CalibratorChoice::MonteCarlo {
            samples: opts.mc_samples,
            seed: opts.seed,
        },
    }
}

fn parse_grid(spec: &str) -> Result<ParameterGrid, CliError> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let bad = || CliError::usage(format!("--grid expects `min,max,points`, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let min: f64 = parts[0].parse().map_err(|_| bad())?;
    let max: f64 = parts[1].parse().map_err(|_| bad())?;
    let points: usize = parts[2].parse().map_err(|_| bad())?;
    Ok(ParameterGrid::uniform(min, max, points)?)
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("{flag}: cannot parse `{}`", p.trim())))
        })
        .collect()
}

/// Writes to stdout; a closed pipe on the reading end is not an error.
fn emit(text: &str) -> CmdResult {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(value: &serde_json::Value) -> CmdResult {
    emit(&format!("{}\n", serde_json::to_string_pretty(value).expect("serializable")))
}

fn with_path(path: &Path, e: imfuse_core::FusionError) -> CliError {
    let mut err = CliError::from(e);
    err.error = err.error.context(format!("reading {}", path.display()));
    err
}

/// Un-normalized output is never written under a `.contour.csv` name.
fn field_output_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    match name.strip_suffix(".contour.csv") {
        Some(stem) => path.with_file_name(format!("{stem}.field.csv")),
        None => path.to_path_buf(),
    }
}

pub fn fuse(args: &FuseArgs) -> CmdResult {
    let contours = args
        .inputs
        .iter()
        .map(|p| read_contour_path(p).map_err(|e| with_path(p, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = args.grid.as_deref().map(parse_grid).transpose()?;
    let rule = args.rule.rule();
    let normalize = !args.no_normalize;

    let (outcome, calibrator) = fuse_contours(
        &rule,
        choice(&args.calibration),
        &contours,
        grid.as_ref(),
        normalize,
        args.calibration.seed,
    )?;

    let (output, body) = match &outcome.contour {
        Some(c) => (args.output.clone(), grid_function_to_string(c)),
        None => (field_output_path(&args.output), grid_function_to_string(&outcome.validified)),
    };
    write_atomic(&output, body.as_bytes())?;

    let g = outcome.validified.grid();
    print_json(&json!({
        "k": contours.len(),
        "rule": rule.name(),
        "calibrator": calibrator.describe(),
        "pre_normalization_max": outcome.pre_normalization_max(),
        "statistic_max": outcome.statistic.max_value(),
        "normalized": normalize,
        "grid": { "min": g.min(), "max": g.max(), "points": g.len() },
        "output": output.display().to_string(),
    }))
}

pub fn certify(args: &CertifyArgs) -> CmdResult {
    let alphas: Vec<f64> = parse_list("--alpha", &args.alpha)?;
    let mut pipeline = ValidityPipeline::new(args.rule.rule())
        .with_calibrator(choice(&args.calibration))
        .with_inputs(match args.inputs {
            InputsArg::Uniform => InputLaw::Uniform,
            InputsArg::Beta21 => InputLaw::Beta21,
        });
    if args.normalize {
        pipeline = pipeline.normalized(StudySpec::with_k(args.k));
    }
    let report = check_validity(&pipeline, args.k, args.replications, &alphas, args.calibration.seed)?;

    if let Some(path) = &args.csv {
        let mut csv = String::from("alpha,exceedance,tolerance,verdict\n");
        for l in &report.levels {
            let verdict = if l.verdict == Verdict::Pass { "pass" } else { "fail" };
            csv.push_str(&format!("{},{},{},{verdict}\n", l.alpha, l.exceedance, l.tolerance));
        }
        write_atomic(path, csv.as_bytes())?;
    }

    let mut value = serde_json::to_value(&report).expect("serializable");
    value["all_pass"] = json!(report.all_pass());
    print_json(&value)
}

pub fn measure(args: &MeasureArgs) -> CmdResult {
    let claim: Claim = args.claim.parse()?;
    let contour = read_contour_path(&args.contour).map_err(|e| with_path(&args.contour, e))?;
    let pos = possibility(&contour, &claim)?;
    let nec = necessity(&contour, &claim)?;
    print_json(&json!({
        "claim": claim.to_string(),
        "possibility": pos,
        "necessity": nec,
    }))
}

#[derive(Serialize)]
struct ManifestEntry {
    role: &'static str,
    path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ybar: Option<f64>,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    k: usize,
    sample_sizes: Vec<usize>,
    theta: f64,
    sigma: f64,
    grid_points: usize,
    files: Vec<ManifestEntry>,
}

pub fn demo(args: &DemoArgs) -> CmdResult {
    let sample_sizes: Vec<usize> = match (&args.n, args.k) {
        (Some(n), k) => {
            let sizes: Vec<usize> = parse_list("--n", n)?;
            if k.is_some_and(|k| k != sizes.len()) {
                return Err(CliError::usage(format!("--k {} disagrees with {} sizes in --n", k.unwrap(), sizes.len())));
            }
            sizes
        }
        (None, k) => StudySpec::with_k(k.unwrap_or(5)).sample_sizes,
    };
    let spec = StudySpec {
        sample_sizes,
        theta: args.theta,
        sigma: args.sigma,
        grid_points: args.grid_points,
    };
    let rules = args
        .rules
        .split(',')
        .map(|r| {
            FusionRule::parse(r.trim()).ok_or_else(|| CliError::usage(format!("--rules: unknown rule `{}`", r.trim())))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let grid = spec.common_grid()?;
    let studies = simulate_study_set(&spec, &grid, args.seed)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display())).map_err(|e| CliError { code: 2, error: e })?;
    let write = |name: &str, body: String| write_atomic(&args.out_dir.join(name), body.as_bytes());

    let mut files = Vec::new();
    for (i, c) in studies.contours.iter().enumerate() {
        let name = format!("study_{}.contour.csv", i + 1);
        write(&name, grid_function_to_string(c))?;
        files.push(ManifestEntry {
            role: "study",
            path: name,
            rule: None,
            n: Some(spec.sample_sizes[i]),
            ybar: Some(studies.ybars[i]),
        });
    }
    for rule in &rules {
        let (out, _) = fuse_contours(
            rule,
            CalibratorChoice::Closed,
            &studies.contours,
            Some(&studies.fusion_grid),
            true,
            args.seed,
        )?;
        let name = format!("fused_{}.contour.csv", rule.name());
        write(&name, grid_function_to_string(&out.contour.expect("normalized")))?;
        files.push(ManifestEntry {
            role: "fused",
            path: name,
            rule: Some(rule.name().to_owned()),
            n: None,
            ybar: None,
        });
    }
    let total_n: usize = spec.sample_sizes.iter().sum();
    let pooled = spec
        .sample_sizes
        .iter()
        .zip(&studies.ybars)
        .map(|(&n, &y)| n as f64 * y)
        .sum::<f64>()
        / total_n as f64;
    let oracle = normal_mean_contour(pooled, total_n, spec.sigma, &grid)?;
    write("oracle.contour.csv", grid_function_to_string(&oracle))?;
    files.push(ManifestEntry {
        role: "oracle",
        path: "oracle.contour.csv".into(),
        rule: None,
        n: Some(total_n),
        ybar: Some(pooled),
    });

    let manifest = Manifest {
        seed: args.seed,
        k: spec.k(),
        sample_sizes: spec.sample_sizes.clone(),
        theta: spec.theta,
        sigma: spec.sigma,
        grid_points: spec.grid_points,
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("serializable");
    write("manifest.json", format!("{json}\n"))?;
    emit(&format!("{json}\n"))
}

pub fn calibration_curve(args: &CurveArgs) -> CmdResult {
    let cal = choice(&args.calibration).build(&args.rule.rule(), args.k, args.calibration.seed)?;
    if args.points < 2 {
        return Err(CliError::usage("--points must be at least 2"));
    }
    let body = curve_to_string(&cal.curve(args.points));
    match &args.output {
        Some(path) => write_atomic(path, body.as_bytes())?,
        None => emit(&body)?,
    }
    Ok(())
}
