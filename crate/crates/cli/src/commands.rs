use std::fs;
use std::path::Path;

use dcset::analyze::analyze_scene;
use dcset::certify::{certify_sset, falsify, Certificate, PsiMode, ProbeConfig, Verdict};
use dcset::render::{render_svg, Layers};
use dcset::scalar::parse_rational;
use dcset::sets::{assemble_and_check, validate_sset, Piece, PlacedSSet, Scene};
use dcset::{scenes, Point, Rational};
use serde_json::{json, Value};

use crate::{Cli, Command, Format, Mode, EXIT_INCONCLUSIVE, EXIT_INTERNAL, EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(message: impl Into<String>) -> CliResult<T> {
    Err(CliError { code: EXIT_USAGE, message: message.into() })
}

fn core<T>(r: dcset::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError { code: EXIT_USAGE, message: e.to_string() })
}

pub fn run(cli: &Cli) -> CliResult<u8> {
    match &cli.command {
        Command::Validate { scene } => validate(cli, scene),
        Command::Certify { scene } => certify(cli, scene),
        Command::Falsify { scene } => falsify_cmd(cli, scene),
        Command::Analyze { scene } => analyze(cli, scene),
        Command::Render { scene } => render(cli, scene),
        Command::GenExample { name } => gen_example(cli, name),
    }
}

/// Parse and structurally check a scene; errors carry `path:line:column`.
pub fn load_scene(path: &Path) -> CliResult<Scene> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError { code: EXIT_USAGE, message: format!("{}: {e}", path.display()) })?;
    let scene = Scene::from_json(&text).map_err(|e| CliError {
        code: EXIT_USAGE,
        message: format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()),
    })?;
    scene.check().map_err(|e| CliError { code: EXIT_USAGE, message: format!("{}: {e}", path.display()) })?;
    Ok(scene)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scene".into())
}

fn emit(cli: &Cli, name: &str, ext: &str, content: &str) -> CliResult<()> {
    match &cli.flags.out {
        Some(dir) => {
            let fail = |e: std::io::Error| CliError { code: EXIT_INTERNAL, message: format!("{}: {e}", dir.display()) };
            fs::create_dir_all(dir).map_err(fail)?;
            let file = dir.join(format!("{name}.{ext}"));
            fs::write(&file, content).map_err(fail)?;
            eprintln!("wrote {}", file.display());
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn sset_pieces(scene: &Scene) -> Vec<&PlacedSSet> {
    scene.set.skeleton.iter().filter_map(|p| if let Piece::Sset(s) = p { Some(s) } else { None }).collect()
}

fn validation(scene: &Scene) -> CliResult<(bool, Value)> {
    let ssets: Vec<_> = sset_pieces(scene).iter().map(|s| validate_sset(&s.sset)).collect();
    let assembly = core(assemble_and_check(&scene.set))?;
    let valid = ssets.iter().all(|r| r.valid) && assembly.passed;
    Ok((valid, json!({ "valid": valid, "ssets": ssets, "assembly": assembly })))
}

fn validate(cli: &Cli, path: &Path) -> CliResult<u8> {
    let scene = load_scene(path)?;
    let (valid, report) = validation(&scene)?;
    let name = format!("{}.validate", stem(path));
    match cli.flags.format {
        Format::Json => emit(cli, &name, "json", &pretty(&report))?,
        Format::Csv => {
            let mut out = String::from("sset,clause,passed,detail\n");
            for (i, s) in sset_pieces(&scene).iter().enumerate() {
                for c in validate_sset(&s.sset).clauses {
                    out.push_str(&format!("{i},{},{},\"{}\"\n", c.name, c.passed, c.detail.replace('"', "\"\"")));
                }
            }
            emit(cli, &name, "csv", &out)?;
        }
        Format::Svg => return usage("validate writes json or csv"),
    }
    Ok(if valid { EXIT_OK } else { EXIT_NEGATIVE })
}

fn psi_mode(m: Mode) -> PsiMode {
    match m {
        Mode::Global => PsiMode::Global,
        Mode::Clamped => PsiMode::Clamped,
    }
}

fn probe_config(cli: &Cli, scene: &Scene) -> ProbeConfig {
    ProbeConfig {
        seed: cli.flags.seed,
        tolerance: cli.flags.tol,
        centers: scene.probes.as_ref().map(|ps| ps.iter().map(|p| p.to_f64()).collect()),
        ..ProbeConfig::default()
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Consistent => EXIT_OK,
        Verdict::Falsified => EXIT_NEGATIVE,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn certify(cli: &Cli, path: &Path) -> CliResult<u8> {
    let scene = load_scene(path)?;
    let Some(placed) = sset_pieces(&scene).into_iter().next() else {
        return usage("certify needs a scene with an (s)-set piece");
    };
    let check = validate_sset(&placed.sset);
    if !check.valid {
        emit(cli, &format!("{}.certify", stem(path)), "json", &pretty(&json!({ "verdict": "invalid", "sset": check })))?;
        return Ok(EXIT_NEGATIVE);
    }
    if cli.flags.n_sweep.is_empty() {
        return usage("empty --n-sweep");
    }
    let cert = core(certify_sset(&placed.sset, &cli.flags.n_sweep, psi_mode(cli.flags.mode), &probe_config(cli, &scene)))?;
    write_certificate(cli, &format!("{}.certify", stem(path)), &cert)?;
    Ok(verdict_code(cert.verdict))
}

fn write_certificate(cli: &Cli, name: &str, cert: &Certificate) -> CliResult<()> {
    match cli.flags.format {
        Format::Json => emit(cli, name, "json", &pretty(cert)),
        Format::Csv if !cert.n_sweep.is_empty() => {
            let mut out = String::from(
                "n,mode,potentials,gap_sum_first,gap_sum_second,telescoped,c,d,sampled_lipschitz,balls,failed_balls,worst_scaled_defect,passed\n",
            );
            for e in &cert.n_sweep {
                let b = &e.budget;
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{:.12e},{:.12e},{},{},{:.12e},{}\n",
                    e.n,
                    serde_json::to_value(e.mode).expect("mode").as_str().unwrap_or(""),
                    e.potentials,
                    b.gap_sum_first,
                    b.gap_sum_second,
                    b.telescoped,
                    b.c,
                    b.d,
                    e.sampled_lipschitz,
                    e.balls,
                    e.failed_balls,
                    e.worst_scaled_defect,
                    e.passed
                ));
            }
            emit(cli, name, "csv", &out)
        }
        Format::Csv => {
            let mut out = String::from("n,khat,increment,oscillations\n");
            if let Some(t) = &cert.blowup {
                for r in &t.rows {
                    let inc = r.increment.map(|v| format!("{v:.12e}")).unwrap_or_default();
                    out.push_str(&format!("{},{:.12e},{},{}\n", r.n, r.khat, inc, r.oscillations));
                }
            }
            emit(cli, name, "csv", &out)
        }
        Format::Svg => usage("certificates are written as json or csv; use the render command for figures"),
    }
}

fn parse_u(cli: &Cli) -> CliResult<Rational> {
    match parse_rational(&cli.flags.u) {
        Some(u) if u > Rational::from_integer(0.into()) => Ok(u),
        _ => usage(format!("--u must be a positive rational, got {:?}", cli.flags.u)),
    }
}

/// Base points for the witness search: declared accumulations, then isolated points.
fn falsify_candidates(scene: &Scene) -> Vec<Point> {
    let mut at: Vec<Point> = scene.declared_accumulations.iter().map(|d| d.point.clone()).collect();
    for p in scene.set.point_features() {
        if !at.contains(&p) {
            at.push(p);
        }
    }
    at
}

fn falsify_cmd(cli: &Cli, path: &Path) -> CliResult<u8> {
    let scene = load_scene(path)?;
    let u = parse_u(cli)?;
    let m = core(scene.set.realize())?;
    let cert = core(falsify(&m, &falsify_candidates(&scene), &u))?;
    write_certificate(cli, &format!("{}.falsify", stem(path)), &cert)?;
    Ok(verdict_code(cert.verdict))
}

fn analyze(cli: &Cli, path: &Path) -> CliResult<u8> {
    let scene = load_scene(path)?;
    let report = core(analyze_scene(&scene))?;
    let name = format!("{}.analyze", stem(path));
    match cli.flags.format {
        Format::Json => {
            emit(cli, &name, "json", &pretty(&report))?;
            if cli.flags.out.is_some() {
                emit(cli, &name, "dot", &report.components.to_dot())?;
            }
        }
        Format::Csv => {
            let mut out = String::from("component,pieces,fills,points,edges\n");
            for (i, c) in report.components.components.iter().enumerate() {
                let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
                out.push_str(&format!("{i},{},{},{},{}\n", join(&c.pieces), join(&c.fills), c.points.len(), c.edges));
            }
            emit(cli, &name, "csv", &out)?;
        }
        Format::Svg => return usage("analyze writes json or csv"),
    }
    Ok(if report.components.discrete && report.isolated.discrete { EXIT_OK } else { EXIT_NEGATIVE })
}

fn render(cli: &Cli, path: &Path) -> CliResult<u8> {
    if cli.flags.format == Format::Csv {
        return usage("render writes svg");
    }
    let scene = load_scene(path)?;
    let psi = match (sset_pieces(&scene).into_iter().next(), cli.flags.n_sweep.first()) {
        (Some(placed), Some(&n)) => Some((core(dcset::certify::build_psi(&placed.sset, n, psi_mode(cli.flags.mode)))?, placed)),
        _ => None,
    };
    let witness = if scene.declared_accumulations.is_empty() {
        None
    } else {
        let u = parse_u(cli)?;
        let m = core(scene.set.realize())?;
        let mut found = None;
        for d in &scene.declared_accumulations {
            if m.contains(&d.point) {
                if let Some(w) = core(dcset::certify::detect_non_dc(&m, &d.point, &u))? {
                    found = Some(w);
                    break;
                }
            }
        }
        found
    };
    let layers = Layers { psi: psi.as_ref().map(|(f, p)| (f, *p)), witnesses: witness.as_ref() };
    let svg = core(render_svg(&scene, layers))?;
    emit(cli, &stem(path), "svg", &svg)?;
    Ok(EXIT_OK)
}

fn gen_example(cli: &Cli, name: &str) -> CliResult<u8> {
    let scene = core(scenes::by_name(name))?;
    let invalid = |msg: String| CliError { code: EXIT_INTERNAL, message: format!("generated scene {name} failed validation: {msg}") };
    scene.check().map_err(|e| invalid(e.to_string()))?;
    let (valid, report) = validation(&scene).map_err(|e| invalid(e.message))?;
    if !valid {
        return Err(invalid(report.to_string()));
    }
    let mut text = scene.to_json();
    text.push('\n');
    emit(cli, name, "json", &text)?;
    Ok(EXIT_OK)
}
