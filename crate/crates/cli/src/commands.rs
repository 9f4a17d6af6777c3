use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use normground_core::biharmonic::{self, BiharmonicModel, PowerSumNonlinearity};
use normground_core::dynamics::{self, PropagatorConfig, StabilityConfig};
use normground_core::energy::multiplier_from_breakdown;
use normground_core::groundstate::{
    self, Curve, GroundStateResult, Scan, ScanGeometry, ScanPoint, SolverConfig, SolverStatus,
};
use normground_core::hartree::Hartree;
use normground_core::spectral::{load_snapshot, save_snapshot};
use normground_core::{
    Complex64,
    ComplexField, EnergyModel, GridSpec, ModelParams, RadialProfile, SchrodingerPoisson, Spectral,
};

use crate::config::{Number, Settings};
use crate::{Command, Common, EvolveArgs, SolverArgs};

const DEFAULT_P: f64 = 8.0 / 3.0;

struct Run {
    command: &'static str,
    settings: Settings,
    out: PathBuf,
    files: Vec<String>,
    extra: BTreeMap<String, Value>,
}

impl Run {
    fn new(command: &'static str, common: &Common) -> Result<Self> {
        let mut settings = Settings::load(common.config.as_deref())?;
        let out = settings.get("out", common.out.as_ref().map(|p| p.display().to_string()), "out".into())?;
        Ok(Self {
            command,
            settings,
            out: PathBuf::from(out),
            files: Vec::new(),
            extra: BTreeMap::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn snapshot(&mut self, name: &str, field: &ComplexField) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        save_snapshot(self.out.join(name), field)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn sp_params(&mut self, p: Option<Number>) -> Result<ModelParams> {
        let p = self.settings.get("p", p, Number::from(DEFAULT_P))?.value;
        let params = ModelParams::schrodinger_poisson(p).map_err(|e| anyhow!("field 'p': {e}"))?;
        self.extra.insert("regime".into(), json!(params.regime().to_string()));
        Ok(params)
    }

    /// Checks that every config entry was used; call before any heavy work.
    fn seal(&mut self) -> Result<BTreeMap<String, String>> {
        self.settings.finish()
    }

    fn finish(mut self, parameters: BTreeMap<String, String>) -> Result<()> {
        let mut manifest = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "parameters": parameters,
        });
        for (k, v) in std::mem::take(&mut self.extra) {
            manifest[k] = v;
        }
        let mut files = self.files.clone();
        files.push("manifest.json".into());
        manifest["files"] = json!(files);
        self.write_json("manifest.json", &manifest)
    }
}

struct Solver {
    spec: GridSpec,
    config: SolverConfig,
}

fn solver(run: &mut Run, args: &SolverArgs, dim: usize, n0: usize, l0: f64, rho: f64) -> Result<Solver> {
    let n = run.settings.get("n", args.n, n0)?;
    let l = run.settings.get("L", args.l, l0)?;
    let spec = GridSpec::new(dim, n, l).map_err(|e| anyhow!("fields 'n'/'L': {e}"))?;
    let defaults = SolverConfig::default();
    let width = run.settings.get("seed-width", args.seed_width, 2.0)?;
    let config = SolverConfig {
        dt: run.settings.get("dt-imag", args.dt_imag, defaults.dt)?,
        tol: run.settings.get("tol", args.tol, defaults.tol)?,
        max_iters: run.settings.get("max-iters", args.max_iters, defaults.max_iters)?,
        rho,
        seed: RadialProfile::gaussian(1.0, width),
        restore_after: defaults.restore_after,
    };
    run.settings.note("restore-after", config.restore_after);
    config.validate().map_err(|e| anyhow!("solver settings: {e}"))?;
    Ok(Solver { spec, config })
}

fn nonlinearity(run: &mut Run, f: Option<String>, default: &str) -> Result<PowerSumNonlinearity> {
    let text = run.settings.get("F", f, default.to_string())?;
    text.parse().map_err(|e| anyhow!("field 'F': {e}"))
}

fn result_json(r: &GroundStateResult) -> Value {
    json!({ "ground_state": r.summary() })
}

fn single_curve(r: &GroundStateResult) -> Curve {
    Curve {
        points: vec![ScanPoint {
            rho: r.rho,
            energy: r.energy(),
            omega: r.omega,
            residual: r.residual,
            iters: r.iters,
            converged: r.converged,
            status: r.status,
            boundary_mass: r.boundary_mass,
            box_length: r.u.spec().length(),
        }],
    }
}

pub fn run(command: Command, common: &Common) -> Result<ExitCode> {
    match command {
        Command::Groundstate { rho, solver: args, strict } => {
            let mut run = Run::new("groundstate", common)?;
            let params = run.sp_params(args.p.clone())?;
            let rho = run.settings.require("rho", rho)?;
            let s = solver(&mut run, &args, 3, 64, 24.0, rho)?;
            let strict = run.settings.get("strict", strict, false)?;
            let parameters = run.seal()?;
            let model = SchrodingerPoisson::new(s.spec, params)?;
            let r = groundstate::minimize(&model, &s.config)?;
            let mut out = result_json(&r);
            out["omega_from_energies"] = json!(multiplier_from_breakdown(&r.breakdown)?);
            run.write_json("result.json", &out)?;
            run.snapshot("u.ngf", &r.u)?;
            run.write("curve.csv", single_curve(&r).to_csv().as_bytes())?;
            run.finish(parameters)?;
            println!(
                "rho = {} I = {:.12e} omega = {:.6e} residual = {:.2e} status = {}",
                r.rho,
                r.energy(),
                r.omega,
                r.residual,
                r.status
            );
            if strict && r.status != SolverStatus::Converged {
                bail!("status {} (boundary mass {:.2e})", r.status, r.boundary_mass);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ScanRho {
            rhos,
            solver: args,
            geometry,
            rho_ref,
            beta,
            warm,
            bisections,
        } => {
            let mut run = Run::new("scan-rho", common)?;
            let params = run.sp_params(args.p.clone())?;
            let rhos = run.settings.require("rhos", rhos)?;
            let s = solver(&mut run, &args, 3, 64, 24.0, rhos.values[0])?;
            let kind = run.settings.get("geometry", geometry, "fixed".to_string())?;
            let geometry = match kind.as_str() {
                "fixed" => ScanGeometry::Fixed { spec: s.spec },
                "dilated" => ScanGeometry::Dilated {
                    spec: s.spec,
                    rho_ref: run.settings.get("rho-ref", rho_ref, 1.0)?,
                    beta: run.settings.get("beta", beta, -2.0)?,
                },
                other => bail!("field 'geometry': expected fixed or dilated, got '{other}'"),
            };
            let warm = run.settings.get("warm", warm, true)?;
            let bisections = run.settings.get("bisections", bisections, 0usize)?;
            let parameters = run.seal()?;
            let make = move |g: GridSpec| SchrodingerPoisson::new(g, params);
            let scan = Scan {
                geometry,
                make_model: &make,
                config: s.config,
                warm_start: warm,
            };
            let (curve, states) = scan.run(&rhos.values)?;
            let threshold = if bisections > 0 || groundstate::first_sign_change(&curve).is_some() {
                scan.threshold(&curve, &states, bisections)?
            } else {
                None
            };
            run.write("curve.csv", curve.to_csv().as_bytes())?;
            run.write_json("result.json", &json!({ "points": curve.points, "threshold": threshold }))?;
            run.finish(parameters)?;
            for p in &curve.points {
                println!("rho = {:.6} I = {:.10e} status = {}", p.rho, p.energy, p.status);
            }
            match threshold {
                Some(t) => println!("sign change in [{:.6}, {:.6}]", t.lower, t.upper),
                None => println!("no sign change on the scan"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Subadd { curve, n_rho, n_mu, tol_rel } => {
            let mut run = Run::new("subadd", common)?;
            let path = run.settings.require("curve", curve.map(|p| p.display().to_string()))?;
            let n_rho = run.settings.get("n-rho", n_rho, 20usize)?;
            let n_mu = run.settings.get("n-mu", n_mu, 20usize)?;
            let tol_rel = run.settings.get("tol-rel", tol_rel, 1e-4)?;
            let parameters = run.seal()?;
            let curve = read_curve(Path::new(&path))?;
            let grid = groundstate::negative_rho_grid(&curve, n_rho);
            let report = groundstate::subadditivity_check(&curve, &grid, n_mu, tol_rel)?;
            let mut csv = String::from("rho,mu,I_rho,margin,violation\n");
            for r in &report.rows {
                csv.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e},{}\n", r.rho, r.mu, r.i_rho, r.margin, r.violation));
            }
            run.write("subadd.csv", csv.as_bytes())?;
            run.write_json(
                "result.json",
                &json!({
                    "violations": report.violations,
                    "rows": report.rows.len(),
                    "min_relative_margin": report.min_relative_margin,
                    "tol_rel": tol_rel,
                }),
            )?;
            run.finish(parameters)?;
            println!("{} rows, {} violations", report.rows.len(), report.violations);
            Ok(ExitCode::SUCCESS)
        }
        Command::SplitTest { p, n, l, radius, amp, separations } => {
            let mut run = Run::new("split-test", common)?;
            let params = run.sp_params(p)?;
            let n = run.settings.get("n", n, 64usize)?;
            let l = run.settings.get("L", l, 24.0)?;
            let radius = run.settings.get("radius", radius, 1.5)?;
            let amp = run.settings.get("amp", amp, 1.0)?;
            let seps = run.settings.get("separations", separations, "2,5,7,9".parse()?)?;
            let parameters = run.seal()?;
            let spec = GridSpec::new(3, n, l)?;
            let bump = RadialProfile::bump(amp, radius);
            let rep = groundstate::splitting_test(spec, &bump, &bump, &seps.values, params.p)?;
            let mut csv = String::from("s,delta_N,delta_M,s_delta_N,overlap\n");
            for r in &rep.rows {
                csv.push_str(&format!(
                    "{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                    r.separation, r.delta_n, r.delta_m, r.s_delta_n, r.overlap
                ));
            }
            run.write("split.csv", csv.as_bytes())?;
            run.write_json("result.json", &rep)?;
            run.finish(parameters)?;
            for r in &rep.rows {
                println!("s = {:.3} dN = {:.6e} dM = {:.3e} s*dN = {:.8e}", r.separation, r.delta_n, r.delta_m, r.s_delta_n);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Evolve { evo, p } => {
            let mut run = Run::new("evolve", common)?;
            let params = run.sp_params(p)?;
            let (psi, reference, cfg) = evolve_inputs(&mut run, &evo)?;
            let parameters = run.seal()?;
            let model = SchrodingerPoisson::new(*psi.spec(), params)?;
            evolve_with(&mut run, &model, &psi, &reference, &cfg)?;
            run.finish(parameters)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BiharmEvolve { evo, f } => {
            let mut run = Run::new("biharm-evolve", common)?;
            let f = nonlinearity(&mut run, f, "-0.25*|s|^4")?;
            let (psi, reference, cfg) = evolve_inputs(&mut run, &evo)?;
            let parameters = run.seal()?;
            let model = BiharmonicModel::new(*psi.spec(), f);
            evolve_with(&mut run, &model, &psi, &reference, &cfg)?;
            run.finish(parameters)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Stability {
            rho,
            solver: args,
            deltas,
            dt,
            t_end,
            stride,
            seed,
            smoothing,
            input,
        } => {
            let mut run = Run::new("stability", common)?;
            let params = run.sp_params(args.p.clone())?;
            let input = run.settings.get("in", input.map(|p| p.display().to_string()), String::new())?;
            let deltas = run.settings.get("deltas", deltas, "0.001,0.01".parse()?)?;
            let propagator = PropagatorConfig {
                dt: run.settings.get("dt", dt, 1e-3)?,
                t_end: run.settings.get("t-end", t_end, 10.0)?,
                record_stride: run.settings.get("stride", stride, 100usize)?,
                strict_conservation: false,
            };
            let cfg = StabilityConfig {
                propagator,
                seed: run.settings.get("seed", seed, 42u64)?,
                smoothing: run.settings.get("smoothing", smoothing, 2.0)?,
            };
            let (u, model, parameters) = if input.is_empty() {
                let rho = run.settings.require("rho", rho)?;
                let s = solver(&mut run, &args, 3, 64, 24.0, rho)?;
                let parameters = run.seal()?;
                let model = SchrodingerPoisson::new(s.spec, params)?;
                let r = groundstate::minimize(&model, &s.config)?;
                if !r.converged {
                    log::warn!("ground state not converged: residual {:.2e}", r.residual);
                }
                run.extra.insert("ground_state".into(), serde_json::to_value(r.summary())?);
                run.snapshot("u.ngf", &r.u)?;
                (r.u, model, parameters)
            } else {
                let u = load_snapshot(&input)?;
                let parameters = run.seal()?;
                let model = SchrodingerPoisson::new(*u.spec(), params)?;
                (u, model, parameters)
            };
            let rep = dynamics::stability_experiment(&model, &u, &deltas.values, &cfg)?;
            let mut csv = String::from("delta,initial_distance,max_distance,final_distance,charge_drift,energy_drift,rescaled\n");
            for r in rep.rows.iter().chain(rep.control.iter()) {
                csv.push_str(&format!(
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                    r.delta, r.initial_distance, r.max_distance, r.final_distance, r.charge_drift, r.energy_drift, r.rescaled
                ));
            }
            run.write("stability.csv", csv.as_bytes())?;
            run.write_json("result.json", &rep)?;
            run.finish(parameters)?;
            for r in &rep.rows {
                println!("delta = {:.1e} max distance = {:.4e}", r.delta, r.max_distance);
            }
            if let Some(s) = rep.slope {
                println!("log-log slope {s:.4}, grid floor {:.3e}", rep.grid_floor);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::BiharmNeg { n_dim, s0, f, rn } => {
            let mut run = Run::new("biharm-neg", common)?;
            let n_dim = run.settings.get("N", n_dim, 5usize)?;
            let s0 = run.settings.get("s0", s0, 1.0)?;
            let f = nonlinearity(&mut run, f, "-1*|s|^3")?;
            let rn = run.settings.get("Rn", rn, "1:400:1".parse()?)?;
            let parameters = run.seal()?;
            let hyp = biharmonic::check_hypotheses(&f, n_dim)?;
            let scan = biharmonic::negativity_scan(s0, &rn.values, &f, n_dim)?;
            run.write("negscan.csv", scan.to_csv().as_bytes())?;
            run.write_json(
                "result.json",
                &json!({
                    "hypotheses": hyp,
                    "negative_from": scan.negative_from,
                    "growth_exponent": scan.growth_exponent,
                    "vanishing_q_range": scan.vanishing_q_range,
                }),
            )?;
            run.finish(parameters)?;
            match scan.negative_from {
                Some(r) => println!("J < 0 from Rn = {r}"),
                None => println!("J does not stay negative on the scan"),
            }
            if let Some(e) = scan.growth_exponent {
                println!("growth exponent {e:.4}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::BiharmGround { d, rho, f, solver: args } => {
            let mut run = Run::new("biharm-ground", common)?;
            let d = run.settings.get("d", d, 1usize)?;
            if !(1..=3).contains(&d) {
                bail!("field 'd': grid dimension must be 1, 2 or 3");
            }
            let f = nonlinearity(&mut run, f, "-0.25*|s|^4")?;
            let rho = run.settings.require("rho", rho)?;
            let s = solver(&mut run, &args, d, 128, 40.0, rho)?;
            let parameters = run.seal()?;
            let model = BiharmonicModel::new(s.spec, f);
            let r = groundstate::minimize(&model, &s.config)?;
            run.write_json("result.json", &result_json(&r))?;
            run.snapshot("u.ngf", &r.u)?;
            run.write("curve.csv", single_curve(&r).to_csv().as_bytes())?;
            run.finish(parameters)?;
            println!("rho = {} J = {:.12e} omega = {:.6e} status = {}", r.rho, r.energy(), r.omega, r.status);
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest => selftest(),
    }
}

fn read_curve(path: &Path) -> Result<Curve> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["rho", "I", "omega", "converged"] {
        bail!("{}: expected header rho,I,omega,converged", path.display());
    }
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse()
                .map_err(|e| anyhow!("{}:{}: column {}: {e}", path.display(), i + 2, &headers[j]))
        };
        let converged: bool = rec[3]
            .parse()
            .map_err(|e| anyhow!("{}:{}: column converged: {e}", path.display(), i + 2))?;
        points.push(ScanPoint {
            rho: num(0)?,
            energy: num(1)?,
            omega: num(2)?,
            residual: f64::NAN,
            iters: 0,
            converged,
            status: if converged { SolverStatus::Converged } else { SolverStatus::NotConverged },
            boundary_mass: f64::NAN,
            box_length: f64::NAN,
        });
    }
    Ok(Curve { points })
}

fn evolve_inputs(run: &mut Run, evo: &EvolveArgs) -> Result<(ComplexField, ComplexField, PropagatorConfig)> {
    let input = run.settings.require("in", evo.input.as_ref().map(|p| p.display().to_string()))?;
    let reference = run.settings.get(
        "reference",
        evo.reference.as_ref().map(|p| p.display().to_string()),
        input.clone(),
    )?;
    let cfg = PropagatorConfig {
        dt: run.settings.get("dt", evo.dt, 1e-3)?,
        t_end: run.settings.get("t-end", evo.t_end, 1.0)?,
        record_stride: run.settings.get("stride", evo.stride, 10usize)?,
        strict_conservation: run.settings.get("strict", evo.strict, true)?,
    };
    cfg.validate().map_err(|e| anyhow!("propagator settings: {e}"))?;
    let psi = load_snapshot(&input).with_context(|| format!("loading {input}"))?;
    let reference = load_snapshot(&reference).with_context(|| format!("loading {reference}"))?;
    Ok((psi, reference, cfg))
}

fn evolve_with<M: EnergyModel>(
    run: &mut Run,
    model: &M,
    psi: &ComplexField,
    reference: &ComplexField,
    cfg: &PropagatorConfig,
) -> Result<()> {
    let evo = dynamics::evolve(model, psi, cfg, Some(reference))?;
    run.write("trajectory.csv", evo.to_csv().as_bytes())?;
    run.snapshot("final.ngf", &evo.psi)?;
    run.write_json(
        "result.json",
        &json!({
            "steps": cfg.steps(),
            "max_charge_drift": evo.max_charge_drift(),
            "max_energy_drift": evo.max_energy_drift(),
            "max_orbit_distance": evo.max_orbit_distance(),
            "abort": evo.abort,
        }),
    )?;
    println!(
        "charge drift {:.3e} energy drift {:.3e} max orbit distance {:.3e}",
        evo.max_charge_drift(),
        evo.max_energy_drift(),
        evo.max_orbit_distance().unwrap_or(f64::NAN)
    );
    if let Some(a) = &evo.abort {
        bail!("aborted: {a:?}");
    }
    Ok(())
}

fn selftest() -> Result<ExitCode> {
    let mut failures = 0;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let spec = GridSpec::new(3, 16, 8.0)?;
    let sp = Spectral::new(spec);
    let f = RadialProfile::gaussian(1.0, 1.0).sample(spec, [0.3, 0.0, -0.2]);
    let back = sp.inverse(&sp.forward(&f));
    let err = back.axpy(Complex64::new(-1.0, 0.0), &f)?.l2_norm() / f.l2_norm();
    check("fft round trip", err < 1e-13, format!("relative error {err:.2e}"));

    let g = GridSpec::new(3, 32, 16.0)?;
    let hartree = Hartree::new(g)?;
    let u = RadialProfile::gaussian(1.0, 1.0).sample(g, [0.0; 3]);
    let n = hartree.energy(&u)?;
    let exact = 2f64.sqrt() / 4.0 * std::f64::consts::PI.powf(2.5);
    let rel = (n - exact).abs() / exact;
    check("gaussian hartree energy", rel < 1e-4, format!("relative error {rel:.2e}"));

    let cubic: PowerSumNonlinearity = "-1*|s|^3".parse()?;
    let plateau = biharmonic::plateau_profile(1.0, 5.0)?;
    let seam = (plateau.value(5.0) - 1.0).abs() + plateau.d1(5.0).abs();
    check("plateau seam", seam < 1e-12, format!("mismatch {seam:.1e}"));
    let c = biharmonic::scaling_check(&plateau, 2.0, &cubic, 5)?;
    check("biharmonic scaling", c.max_rel_error < 1e-8, format!("relative error {:.2e}", c.max_rel_error));

    let model = SchrodingerPoisson::new(GridSpec::new(3, 16, 8.0)?, ModelParams::schrodinger_poisson(3.2)?)?;
    let cfg = SolverConfig {
        rho: 2.0,
        tol: 1e-8,
        dt: 0.5,
        seed: RadialProfile::gaussian(1.0, 1.0),
        ..SolverConfig::default()
    };
    let r = groundstate::minimize(&model, &cfg)?;
    check(
        "ground state solve",
        r.converged && (r.u.l2_norm() - 2.0).abs() < 1e-12,
        format!("residual {:.2e}", r.residual),
    );

    if failures == 0 {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::FAILURE)
    }
}
