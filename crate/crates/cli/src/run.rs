//! Experiment orchestration: build the problem, run the enabled reduction
//! methods, and emit the artifact directory (manifest, ROMs, CSV reports).
//! Outputs are staged and swapped in atomically; a failed run leaves no
//! partial artifacts behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rpod_core::modal::ModalRom;
use rpod_core::numerics::{self, C64};
use rpod_core::pod::{self, BpodRom, ConsistencyReport};
use rpod_core::problems::{
    build_channel, build_duffing_fpk, build_pollutant, build_synthetic, GroundTruth,
};
use rpod_core::report::{self, ExcitationSpec, PipelineDims, ReducedModel};
use rpod_core::snapshots::{simulate_impulse, LtiSystem, SnapshotKind};
use rpod_core::{textmat, Error as CoreError};

use crate::config::{
    EvalExcitation, ExperimentConfig, ProblemConfig, NOISE_SEED_STAGE,
};
use crate::CliError;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub effective_config: ExperimentConfig,
    /// The rpod seed, when the randomized method is enabled; every other
    /// draw in the run derives from it by documented stage offsets.
    pub root_seed: Option<u64>,
    pub versions: Versions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Versions {
    pub rpod_core: String,
    pub rpod_cli: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
}

pub fn build_problem(
    problem: &ProblemConfig,
) -> Result<(LtiSystem, Option<GroundTruth>), CliError> {
    let stage = |e: CoreError| CliError::Stage {
        stage: "problem",
        source: e,
    };
    match problem {
        ProblemConfig::Synthetic(cfg) => {
            let (sys, truth) = build_synthetic(cfg).map_err(stage)?;
            Ok((sys, Some(truth)))
        }
        ProblemConfig::Pollutant { grid, physics } => {
            Ok((build_pollutant(grid, physics).map_err(stage)?, None))
        }
        ProblemConfig::Channel(cfg) => Ok((build_channel(cfg).map_err(stage)?, None)),
        ProblemConfig::DuffingFpk(cfg) => Ok((build_duffing_fpk(cfg).map_err(stage)?, None)),
        ProblemConfig::MatrixFiles { a, b, c, dt } => {
            let a = textmat::read_real(a).map_err(stage)?;
            let b = textmat::read_real(b).map_err(stage)?;
            let c = textmat::read_real(c).map_err(stage)?;
            Ok((LtiSystem::new(a, b, c, *dt).map_err(stage)?, None))
        }
    }
}

pub fn run_experiment(
    cfg_in: &ExperimentConfig,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<RunOutcome, CliError> {
    let mut cfg = cfg_in.clone();
    if let Some(seed) = seed_override {
        match cfg.method.rpod.as_mut() {
            Some(rpod) => rpod.seed = seed,
            None => {
                return Err(CliError::Config(
                    "--seed-override given but method.rpod is disabled".into(),
                ))
            }
        }
    }
    let out_dir: PathBuf = out_override
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os("RPOD_OUT").map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| {
            CliError::Config(
                "no output directory: pass --out, set RPOD_OUT, or set output_dir".into(),
            )
        })?;
    cfg.output_dir = Some(out_dir.clone());

    let primal_steps = cfg.snapshots.primal_steps.materialize()?;
    let adjoint_steps = cfg.snapshots.adjoint_steps.materialize()?;
    let (sys, truth) = build_problem(&cfg.problem)?;
    cfg.validate_against(&sys, primal_steps.len(), adjoint_steps.len())?;

    let staging = staging_dir(&out_dir);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(CliError::Io)?;
    }
    fs::create_dir_all(&staging).map_err(CliError::Io)?;

    let result = run_stages(&cfg, &sys, truth.as_ref(), &primal_steps, &adjoint_steps, &staging);
    match result {
        Ok(()) => {
            if out_dir.exists() {
                fs::remove_dir_all(&out_dir).map_err(CliError::Io)?;
            }
            fs::rename(&staging, &out_dir).map_err(CliError::Io)?;
            Ok(RunOutcome { out_dir })
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

fn staging_dir(out_dir: &Path) -> PathBuf {
    let name = out_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out_dir.with_file_name(format!("{name}.staging"))
}

#[derive(Serialize)]
struct MethodSummary {
    order: usize,
    output_error: report::ErrorAggregates,
    state_error: report::ErrorAggregates,
}

#[derive(Serialize)]
struct RunSummary {
    state_dim: usize,
    svd_size: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    bpod: Option<MethodSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rpod: Option<MethodSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eigenvalue_max_distance: Option<f64>,
}

fn run_stages(
    cfg: &ExperimentConfig,
    sys: &LtiSystem,
    truth: Option<&GroundTruth>,
    primal_steps: &[usize],
    adjoint_steps: &[usize],
    staging: &Path,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        effective_config: cfg.clone(),
        root_seed: cfg.method.rpod.as_ref().map(|r| r.seed),
        versions: Versions {
            rpod_core: VERSION.into(),
            rpod_cli: VERSION.into(),
        },
    };
    write_json(&staging.join("manifest.json"), &manifest)?;

    let mut bpod_rom: Option<BpodRom> = None;
    if cfg.method.bpod {
        let stage = |e: CoreError| CliError::Stage {
            stage: "snapshots",
            source: e,
        };
        let x = simulate_impulse(sys, SnapshotKind::Primal, &sys.b.clone(), primal_steps)
            .map_err(stage)?;
        let y = simulate_impulse(sys, SnapshotKind::Adjoint, &sys.c.transpose(), adjoint_steps)
            .map_err(stage)?;
        let rom = pod::bpod(&x, &y, sys, cfg.order, cfg.rank_tol).map_err(|e| CliError::Stage {
            stage: "bpod",
            source: e,
        })?;
        save_bpod(&rom, &staging.join("bpod").join("rom"))?;
        bpod_rom = Some(rom);
    }

    let mut rpod_rom: Option<ModalRom> = None;
    let mut consistency: Option<ConsistencyReport> = None;
    if let Some(plan) = cfg.sampling_plan(sys, primal_steps, adjoint_steps) {
        let stage = |e: CoreError| CliError::Stage {
            stage: "rpod",
            source: e,
        };
        let match_tol = cfg.match_tol.unwrap_or(1e-6);
        let rom = if plan.trials >= 2 {
            let (rom, rep) =
                pod::rpod_repeated(sys, &plan, cfg.order, plan.trials, cfg.rank_tol, match_tol)
                    .map_err(stage)?;
            consistency = Some(rep);
            rom
        } else {
            pod::rpod(sys, &plan, cfg.order, cfg.rank_tol).map_err(stage)?
        };
        let rom = if cfg.discard_unstable {
            rom.discard_unstable()
        } else {
            rom
        };
        let dir = staging.join("rpod");
        fs::create_dir_all(&dir).map_err(CliError::Io)?;
        rom.save(&dir.join("rom")).map_err(stage)?;
        if let Some(sel) = &rom.selection {
            fs::write(dir.join("selection.json"), sel.to_json().map_err(stage)?)
                .map_err(CliError::Io)?;
        }
        if let Some(rep) = &consistency {
            write_json(&dir.join("consistency.json"), &consistency_json(rep))?;
        }
        rpod_rom = Some(rom);
    }

    // Error evaluation against the full model.
    let excitation = match cfg.evaluation.excitation {
        EvalExcitation::Impulse => ExcitationSpec::Impulses,
        EvalExcitation::Noise => ExcitationSpec::Noise {
            seed: manifest
                .root_seed
                .unwrap_or(0)
                .wrapping_add(NOISE_SEED_STAGE),
            count: cfg.evaluation.noise_count,
        },
    };
    let eval_stage = |e: CoreError| CliError::Stage {
        stage: "evaluation",
        source: e,
    };
    let mut bpod_summary = None;
    if let Some(rom) = &bpod_rom {
        let series = report::compare_outputs(sys, rom, &excitation, cfg.evaluation.steps)
            .map_err(eval_stage)?;
        fs::write(
            staging.join("bpod").join("errors.csv"),
            report::errors_csv(&series),
        )
        .map_err(CliError::Io)?;
        bpod_summary = Some(MethodSummary {
            order: rom.rom_order(),
            output_error: series.output.clone(),
            state_error: series.state.clone(),
        });
    }
    let mut rpod_summary = None;
    if let Some(rom) = &rpod_rom {
        let series = report::compare_outputs(sys, rom, &excitation, cfg.evaluation.steps)
            .map_err(eval_stage)?;
        fs::write(
            staging.join("rpod").join("errors.csv"),
            report::errors_csv(&series),
        )
        .map_err(CliError::Io)?;
        rpod_summary = Some(MethodSummary {
            order: rom.rom_order(),
            output_error: series.output.clone(),
            state_error: series.state.clone(),
        });
    }

    // Eigenvalue comparison table: bpod vs rpod when both ran, otherwise
    // against the synthetic ground truth when available.
    let bpod_eigs: Option<Vec<C64>> = match &bpod_rom {
        Some(rom) => Some(
            numerics::eigenvalues_only(&rom.system.a).map_err(eval_stage)?,
        ),
        None => None,
    };
    let comparison = match (&bpod_eigs, &rpod_rom) {
        (Some(a), Some(r)) => Some(report::compare_eigenvalues(a, &r.eigenvalues)),
        (Some(a), None) => truth.map(|t| report::compare_eigenvalues(&t.eigenvalues, a)),
        (None, Some(r)) => match truth {
            Some(t) => Some(report::compare_eigenvalues(&t.eigenvalues, &r.eigenvalues)),
            None => Some(report::compare_eigenvalues(&r.eigenvalues, &[])),
        },
        (None, None) => None,
    };
    let mut eig_distance = None;
    if let Some(cmp) = &comparison {
        fs::write(staging.join("eigenvalues.csv"), report::eigenvalues_csv(cmp))
            .map_err(CliError::Io)?;
        eig_distance = Some(cmp.max_distance);
    }

    // Cost accounting: the full pipeline against the sub-sampled one.
    let full_dims = PipelineDims {
        inputs: sys.input_dim(),
        outputs: sys.output_dim(),
        primal_snapshots: primal_steps.len(),
        adjoint_snapshots: adjoint_steps.len(),
    };
    let sub_dims = match &cfg.method.rpod {
        Some(r) => PipelineDims {
            inputs: r.r,
            outputs: r.s,
            primal_snapshots: r.m1,
            adjoint_snapshots: r.m2,
        },
        None => full_dims,
    };
    let cost = report::cost_report(full_dims, sub_dims, sys.state_dim());
    fs::write(staging.join("cost.csv"), report::cost_csv(&cost)).map_err(CliError::Io)?;

    let summary = RunSummary {
        state_dim: sys.state_dim(),
        svd_size: cost.size_string(),
        bpod: bpod_summary,
        rpod: rpod_summary,
        eigenvalue_max_distance: eig_distance,
    };
    write_json(&staging.join("summary.json"), &summary)?;
    Ok(())
}

fn save_bpod(rom: &BpodRom, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::Io)?;
    let stage = |e: CoreError| CliError::Stage {
        stage: "bpod",
        source: e,
    };
    textmat::write_real(&dir.join("t_r.txt"), &rom.basis.t_r).map_err(stage)?;
    if let Some(t_l) = &rom.basis.t_l {
        textmat::write_real(&dir.join("t_l.txt"), t_l).map_err(stage)?;
    }
    textmat::write_real(&dir.join("a_r.txt"), &rom.system.a).map_err(stage)?;
    textmat::write_real(&dir.join("b_r.txt"), &rom.system.b).map_err(stage)?;
    textmat::write_real(&dir.join("c_r.txt"), &rom.system.c).map_err(stage)?;
    #[derive(Serialize)]
    struct BpodManifest<'a> {
        kind: &'a str,
        order: usize,
        sigma: &'a [f64],
        hankel_dims: (usize, usize),
        dt: f64,
    }
    write_json(
        &dir.join("manifest.json"),
        &BpodManifest {
            kind: "bpod",
            order: rom.system.state_dim(),
            sigma: &rom.basis.sigma,
            hankel_dims: rom.hankel_dims,
            dt: rom.system.dt,
        },
    )
}

#[derive(Serialize)]
struct ConsistencyJson {
    match_tol: f64,
    max_distance: f64,
    unstable: bool,
    runs: Vec<RunJson>,
    pairwise: Vec<(usize, usize, f64)>,
}

#[derive(Serialize)]
struct RunJson {
    seed: u64,
    retained: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
}

fn consistency_json(rep: &ConsistencyReport) -> ConsistencyJson {
    ConsistencyJson {
        match_tol: rep.match_tol,
        max_distance: rep.max_distance,
        unstable: rep.unstable,
        runs: rep
            .runs
            .iter()
            .map(|r| RunJson {
                seed: r.seed,
                retained: r.retained,
                failure: r.failure.clone(),
            })
            .collect(),
        pairwise: rep.pairwise.clone(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    fs::write(path, text).map_err(CliError::Io)
}

/// (l, eps, beta) -> bound table as CSV, one row per combination.
pub fn bounds_table(
    l_values: &[usize],
    eps_values: &[f64],
    beta_values: &[f64],
    trials: usize,
) -> Result<String, CliError> {
    let mut out = String::from("l,eps,beta,m,gamma,gamma_k\n");
    for &l in l_values {
        for &eps in eps_values {
            for &beta in beta_values {
                let stage = |e: CoreError| CliError::Stage {
                    stage: "bounds",
                    source: e,
                };
                let b = rpod_core::BoundInputs::new(l, eps, beta).map_err(stage)?;
                let m = rpod_core::min_columns(&b).map_err(stage)?;
                let gamma = 1.0 - (1.0 - beta) * (1.0 - beta);
                let gamma_k = rpod_core::combined_failure(beta, trials).map_err(stage)?;
                out.push_str(&format!("{l},{eps},{beta},{m},{gamma:e},{gamma_k:e}\n"));
            }
        }
    }
    Ok(out)
}

/// Human-readable dump of an artifact directory: the manifest plus, for
/// modal ROMs, the extracted eigenvalue table.
pub fn inspect(dir: &Path) -> Result<String, CliError> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", manifest_path.display()))
    })?;
    let mut out = format!("manifest: {}\n{text}\n", manifest_path.display());
    if let Ok(rom) = ModalRom::load(dir) {
        out.push_str(&format!(
            "\nmodal rom: order {}, source {:?}, hankel dims {:?}\n",
            rom.order(),
            rom.source,
            rom.hankel_dims
        ));
        out.push_str("index,re,im,modulus\n");
        for (i, z) in rom.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{i},{:e},{:e},{:e}\n", z.re, z.im, z.norm()));
        }
    }
    Ok(out)
}
