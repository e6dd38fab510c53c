use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;
use rand_distr::{Distribution, StandardNormal};

use fisc_core::effects::{write_fis_csv, EffectCache};
use fisc_core::halo::{export_swarm, halo_curve, halo_surface, write_halo_csv, write_swarm_csv, HaloSpec};
use fisc_core::mlp::{fis_extrema, MlpReport};
use fisc_core::rashomon::{fisc_range, mcr_range, search_all_features, write_model_class, RashomonConfig};
use fisc_core::synthetic::{run_benchmark, BenchmarkOptions, DetectionMethod};
use fisc_core::data::format_float;
use fisc_core::{rng, Dataset, FeatureSet, PredictiveModel};

use crate::config::{BenchConfig, GenerateConfig, Manifest, ModelSpec, RunConfig};
use crate::error::{CliError, CliResult};

/// Records the manifest in `out`, then runs the command there.
pub fn execute(manifest: &Manifest, out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_file(out, "run.json", |w| {
        serde_json::to_writer_pretty(&mut *w, manifest).map_err(fisc_core::Error::from)?;
        writeln!(w).map_err(io_err)
    })?;
    match manifest {
        Manifest::Bench(c) => bench(c, out)?,
        Manifest::Generate(c) => generate(c, out)?,
        Manifest::Search(c) => search(c, out)?,
        Manifest::Fis(c) => fis(c, out)?,
        Manifest::Halo(c) => halo(c, out)?,
        Manifest::Swarm(c) => swarm(c, out)?,
        Manifest::MlpAnalytic(c) => mlp_analytic(c, out)?,
    }
    Ok(())
}

fn write_file(out: &Path, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> CliResult<()>) -> CliResult<()> {
    let path = out.join(name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| CliError::io(&path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().delimiter(b';').from_writer(w)
}

fn csv_err(e: csv::Error) -> CliError {
    fisc_core::Error::from(e).into()
}

fn io_err(e: std::io::Error) -> CliError {
    fisc_core::Error::from(e).into()
}

fn rashomon_config(cfg: &RunConfig, p: usize) -> CliResult<RashomonConfig> {
    let mut rc = RashomonConfig::new(cfg.epsilon, cfg.loss, cfg.replacement(p)?);
    rc.initial_learning_rate = cfg.lr;
    rc.max_steps = cfg.max_steps;
    rc.paper_literal = cfg.paper_literal;
    rc.validate(p)?;
    Ok(rc)
}

fn sets_or_all_pairs(cfg: &RunConfig, data: &Dataset) -> CliResult<Vec<FeatureSet>> {
    let sets = cfg.feature_sets(data.p())?;
    if !sets.is_empty() {
        return Ok(sets);
    }
    if data.p() < 2 {
        return Err(CliError::config("interactions need at least two features"));
    }
    Ok(FeatureSet::all_pairs(data.p()))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| format_float(v)).collect::<Vec<_>>().join(",")
}

fn search(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    cfg.validate()?;
    let data = cfg.load_data()?;
    let model = cfg.reference(&data)?;
    let rc = rashomon_config(cfg, data.p())?;
    let class = search_all_features(&model, &data, &rc)?;
    write_file(out, "models.json", |w| Ok(write_model_class(w, &class)?))?;
    write_file(out, "mcr.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["feature", "mcr_lower", "mcr_upper", "mask_down", "mask_up", "steps", "budget_hit"]).map_err(csv_err)?;
        for (up, down) in &class.trajectories {
            let r = mcr_range(&class, up.feature)?;
            c.write_record(&[
                up.feature.to_string(),
                format_float(r.lower),
                format_float(r.upper),
                format_float(down.extreme()),
                format_float(up.extreme()),
                (up.steps.len() + down.steps.len()).to_string(),
                (up.budget_hit || down.budget_hit).to_string(),
            ]).map_err(csv_err)?;
        }
        c.flush().map_err(io_err)
    })?;
    let sets = cfg.feature_sets(data.p())?;
    if !sets.is_empty() {
        let ranges = sets
            .iter()
            .map(|s| fisc_range(&model, &data, &class, s, &rc))
            .collect::<Result<Vec<_>, _>>()?;
        write_file(out, "fisc.csv", |w| {
            let mut c = csv_writer(w);
            c.write_record(["features", "fis_min", "fis_max", "samples", "argmin_mask", "argmax_mask"]).map_err(csv_err)?;
            for r in &ranges {
                c.write_record(&[
                    r.features.to_string(),
                    format_float(r.min),
                    format_float(r.max),
                    r.samples.to_string(),
                    join(r.argmin_mask.as_slice()),
                    join(r.argmax_mask.as_slice()),
                ]).map_err(csv_err)?;
            }
            c.flush().map_err(io_err)
        })?;
    }
    Ok(())
}

fn fis(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    cfg.validate()?;
    let data = cfg.load_data()?;
    let sets = sets_or_all_pairs(cfg, &data)?;
    if let Some(s) = sets.iter().find(|s| s.len() < 2) {
        return Err(CliError::config(format!("--features {s}: an interaction needs two or more features")));
    }
    let model = cfg.reference(&data)?;
    let strategy = cfg.replacement(data.p())?;
    let cache = EffectCache::new();
    let records = sets
        .iter()
        .map(|s| cache.fis(model.as_ref(), &data, s, cfg.loss, &strategy))
        .collect::<Result<Vec<_>, _>>()?;
    write_file(out, "fis.csv", |w| Ok(write_fis_csv(w, &records, strategy.seed().map(|_| cfg.seed))?))
}

fn halo(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    cfg.validate()?;
    let data = cfg.load_data()?;
    let sets = cfg.feature_sets(data.p())?;
    let [set] = sets.as_slice() else {
        return Err(CliError::config("--features: halo takes exactly one set of two or three features"));
    };
    let model = cfg.reference(&data)?;
    let mut spec = HaloSpec::new(
        set.clone(),
        if cfg.radii.is_empty() { vec![cfg.epsilon] } else { cfg.radii.clone() },
        cfg.epsilon,
    );
    spec.resolution = cfg.grid_resolution;
    spec.loss = cfg.loss;
    spec.validate(data.p())?;
    let points = match set.len() {
        2 => halo_curve(&model, &data, &spec)?,
        _ => halo_surface(&model, &data, &spec)?,
    };
    let flagged = points.iter().filter(|p| p.error.is_some()).count();
    if flagged > 0 {
        log::warn!("{flagged} halo points have an unsolvable side and are flagged");
    }
    write_file(out, "halo.csv", |w| Ok(write_halo_csv(w, &points)?))
}

fn swarm(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    cfg.validate()?;
    let data = cfg.load_data()?;
    let sets = sets_or_all_pairs(cfg, &data)?;
    let model = cfg.reference(&data)?;
    let rc = rashomon_config(cfg, data.p())?;
    let class = search_all_features(&model, &data, &rc)?;
    let records = export_swarm(&model, &data, &class, &sets, &rc)?;
    write_file(out, "swarm.csv", |w| Ok(write_swarm_csv(w, &records, data.p())?))
}

fn mlp_analytic(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    cfg.validate()?;
    if cfg.mask_file.is_some() {
        return Err(CliError::config("mlp-analytic works on the unmasked network; drop --mask-file"));
    }
    let ModelSpec::SigmoidMlp(mlp) = ModelSpec::parse(&cfg.model)? else {
        return Err(CliError::config("mlp-analytic needs --model sigmoid-mlp(...)"));
    };
    let data = cfg.load_data()?;
    if mlp.n_features() != data.p() {
        return Err(CliError::config(format!(
            "model takes {} features but the data has {}",
            mlp.n_features(),
            data.p()
        )));
    }
    let sets = cfg.feature_sets(data.p())?;
    let [pair] = sets.as_slice() else {
        return Err(CliError::config("--features: mlp-analytic takes exactly one pair"));
    };
    if pair.len() != 2 {
        return Err(CliError::config(format!("--features {pair}: mlp-analytic takes a pair")));
    }
    let extrema = fis_extrema(&mlp, &data, pair, cfg.epsilon)?;
    let report = MlpReport::from(&extrema);
    write_file(out, "mlp.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(fisc_core::Error::from)?;
        writeln!(w).map_err(io_err)
    })
}

fn generate(cfg: &GenerateConfig, out: &Path) -> CliResult<()> {
    if cfg.n == 0 {
        return Err(CliError::config("--n must be >= 1"));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(CliError::config("--noise must be >= 0"));
    }
    let spec = ModelSpec::parse(&cfg.model)?;
    let spec = match (spec, cfg.p) {
        (ModelSpec::SumProduct { k, p: None }, Some(p)) => ModelSpec::SumProduct { k, p: Some(p) },
        (s, _) => s,
    };
    let model = spec.build(None, cfg.seed)?;
    let p = model.n_features();
    if cfg.p.is_some_and(|q| q != p) {
        return Err(CliError::config(format!("--p {} disagrees with the model's {p} features", cfg.p.unwrap())));
    }
    let mut xr = rng::rng_for(cfg.seed, &[rng::label("generate-x")]);
    let rows: Vec<Vec<f64>> = (0..cfg.n)
        .map(|_| (0..p).map(|_| StandardNormal.sample(&mut xr)).collect())
        .collect();
    let mut nr = rng::rng_for(cfg.seed, &[rng::label("generate-noise")]);
    let y = rows
        .iter()
        .map(|x| {
            let e: f64 = StandardNormal.sample(&mut nr);
            model.predict_row(x) + cfg.noise * e
        })
        .collect();
    let data = Dataset::from_rows(&rows, y)?;
    write_file(out, "data.csv", |w| Ok(data.to_csv(w)?))
}

fn bench(cfg: &BenchConfig, out: &Path) -> CliResult<()> {
    let opts = BenchmarkOptions {
        shuffle_labels: cfg.shuffle_labels.then_some(cfg.seed),
    };
    let delta = run_benchmark(&cfg.functions, DetectionMethod::Delta, opts)?;
    let ctx = run_benchmark(&cfg.functions, DetectionMethod::FisInContext, opts)?;
    write_file(out, "bench.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["function", "method", "auc"]).map_err(csv_err)?;
        for r in delta.iter().chain(&ctx) {
            c.write_record(&[r.function.to_string(), r.method.to_string(), format_float(r.auc)]).map_err(csv_err)?;
        }
        c.flush().map_err(io_err)
    })?;
    println!("| method | {} |", cfg.functions.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(" | "));
    println!("|---|{}", "---|".repeat(cfg.functions.len()));
    for rows in [&delta, &ctx] {
        println!(
            "| {} | {} |",
            rows[0].method,
            rows.iter().map(|r| format!("{:.4}", r.auc)).collect::<Vec<_>>().join(" | ")
        );
    }
    let misses: Vec<String> = delta
        .iter()
        .chain(&ctx)
        .filter(|r| r.auc != 1.0)
        .map(|r| format!("{}/{}={}", r.function, r.method, r.auc))
        .collect();
    if misses.is_empty() {
        Ok(())
    } else {
        Err(CliError::Bench(format!("AUC below 1.0: {}", misses.join(", "))))
    }
}
