use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use forest_transfer::effort::{
    effort_experiment, pixel_queries, resolution_means, write_effort_csv, EffortRecipe, Extent, ThinningPlan,
};
use forest_transfer::hull::{extrapolation_summary, CalibrationEnvelope};
use forest_transfer::io::{read_plots_csv, write_plots_csv};
use forest_transfer::mapping::{predict_raster, write_bundle};
use forest_transfer::metrics::FitMetrics;
use forest_transfer::raster::{read_stack, write_ascii_grid, write_stack, RasterStack};
use forest_transfer::study::{
    area_extrapolation, fit_dataset, transfer_contrasts, transfer_study, write_extrapolation_csv, FittedDataset, Recipe,
};
use forest_transfer::synth::{synth_generate, SynthConfig};
use forest_transfer::{select_predictors, transfer_matrix, Forest, PlotTable, TransferMatrix};

use crate::{Cli, Command, HullAction, ModelOpts, PlanOpts};

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Synth { out, cellsize } => synth(out, seed, *cellsize),
        Command::Select { plots, out, model } => select(plots, out.as_deref(), &recipe(seed, model)),
        Command::Fit { plots, out, model } => fit(plots, out, &recipe(seed, model)),
        Command::Eval { model, plots, out } => eval(model, plots, out.as_deref()),
        Command::Transfer {
            dir,
            models,
            tests,
            out,
        } => transfer(dir.as_deref(), models, tests, out.as_deref()),
        Command::Hull { action } => match action {
            HullAction::Build { plots, predictors, out } => hull_build(plots, predictors, out),
            HullAction::Classify {
                envelope,
                plots,
                stack,
                out,
            } => hull_classify(envelope, plots.as_deref(), stack.as_deref(), out.as_deref()),
        },
        Command::Thin {
            plots,
            test,
            model,
            envelope,
            stack,
            out,
            plan,
            model_opts,
        } => thin(
            &ThinInputs {
                plots,
                test,
                model,
                envelope,
                stack,
            },
            out,
            seed,
            plan,
            model_opts,
        ),
        Command::Map {
            stack,
            model,
            envelope,
            out,
            name,
            window,
            preview,
        } => map(stack, model, envelope, out, name, window.as_deref(), *preview, cli),
        Command::Demo {
            out,
            cellsize,
            model,
            plan,
        } => demo(out, seed, *cellsize, model, plan),
    }
}

fn recipe(seed: u64, o: &ModelOpts) -> Recipe {
    let d = Recipe::new(seed);
    Recipe {
        n_trees: o.ntrees.unwrap_or(d.n_trees),
        mtry: o.mtry.or(d.mtry),
        min_node_size: o.min_node.unwrap_or(d.min_node_size),
        cap: o.cap.unwrap_or(d.cap),
        ..d
    }
}

fn plan(seed: u64, o: &PlanOpts) -> ThinningPlan {
    let d = ThinningPlan::new(seed);
    ThinningPlan {
        resolutions_km: o.resolutions.clone().unwrap_or(d.resolutions_km),
        iterations: o.iterations.clone().unwrap_or(d.iterations),
        seed,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_model(path: &Path) -> Result<Forest> {
    Forest::from_json(&read_text(path)?).with_context(|| format!("invalid model {}", path.display()))
}

fn load_envelope(path: &Path) -> Result<CalibrationEnvelope> {
    CalibrationEnvelope::from_json(&read_text(path)?).with_context(|| format!("invalid envelope {}", path.display()))
}

fn load_plots(path: &Path) -> Result<PlotTable> {
    Ok(read_plots_csv(path)?)
}

fn load_stack(path: &Path) -> Result<RasterStack> {
    Ok(read_stack(path)?)
}

/// Text to `out`, or stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            write_text(p, text)?;
            println!("{}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn synth_config(seed: u64, cellsize: Option<f64>) -> SynthConfig {
    let d = SynthConfig::with_seed(seed);
    SynthConfig {
        cellsize_m: cellsize.unwrap_or(d.cellsize_m),
        ..d
    }
}

fn synth(out: &Path, seed: u64, cellsize: Option<f64>) -> Result<()> {
    let cfg = synth_config(seed, cellsize);
    let data = synth_generate(&cfg)?;
    create_dir(out)?;
    let mut paths = Vec::new();
    for t in data.locals.iter().chain([&data.regional]) {
        let p = out.join(format!("{}.csv", t.name()));
        write_plots_csv(t, &p)?;
        paths.push(p);
    }
    let stack_dir = out.join("stack");
    write_stack(&data.stack, &stack_dir)?;
    paths.push(stack_dir);
    let truth = out.join("truth.asc");
    write_ascii_grid(&data.truth, &truth)?;
    paths.push(truth);
    let blocks = out.join("blocks.json");
    write_json(&blocks, &json!({ "config": cfg, "blocks": data.blocks }))?;
    paths.push(blocks);
    report(&paths);
    Ok(())
}

fn select(plots: &Path, out: Option<&Path>, recipe: &Recipe) -> Result<()> {
    let table = load_plots(plots)?;
    let result = select_predictors(&table, &recipe.select_options())?;
    emit(out, &(serde_json::to_string_pretty(&result)? + "\n"))
}

/// Artifacts of one fitted dataset, named after the table.
fn write_fitted(f: &FittedDataset, dir: &Path, recipe: &Recipe) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let name = &f.name;
    let mut paths = Vec::new();
    let model = dir.join(format!("{name}_model.json"));
    write_text(&model, &f.forest.to_json()?)?;
    paths.push(model);
    let env = dir.join(format!("{name}_envelope.json"));
    write_text(&env, &f.envelope.to_json()?)?;
    paths.push(env);
    let sel = dir.join(format!("{name}_selection.json"));
    write_json(&sel, &json!({ "recipe": recipe, "selection": f.selection }))?;
    paths.push(sel);
    for (part, table) in [
        ("calib", &f.split.calib),
        ("valid", &f.split.valid),
        ("test", &f.split.test),
        ("train", &f.split.train),
    ] {
        let p = dir.join(format!("{name}_{part}.csv"));
        write_plots_csv(table, &p)?;
        paths.push(p);
    }
    Ok(paths)
}

fn fit(plots: &Path, out: &Path, recipe: &Recipe) -> Result<()> {
    let table = load_plots(plots)?;
    let fitted = fit_dataset(&table, recipe)?;
    report(&write_fitted(&fitted, out, recipe)?);
    Ok(())
}

fn eval(model: &Path, plots: &Path, out: Option<&Path>) -> Result<()> {
    let forest = load_model(model)?;
    let table = load_plots(plots)?;
    let yhat = forest.predict_table(&table)?;
    let m = FitMetrics::compute(&table.ba(), &yhat)?;
    emit(out, &(serde_json::to_string_pretty(&m)? + "\n"))
}

/// Label from a file stem with an optional suffix removed.
fn label(path: &Path, suffix: &str) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.strip_suffix(suffix).map(str::to_string).unwrap_or(stem)
}

fn transfer(dir: Option<&Path>, models: &[PathBuf], tests: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let (models, tests) = match dir {
        Some(dir) => {
            let mut names: Vec<String> = fs::read_dir(dir)
                .with_context(|| format!("cannot read {}", dir.display()))?
                .filter_map(|e| e.ok())
                .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix("_model.json")).map(str::to_string))
                .collect();
            names.sort();
            if names.is_empty() {
                bail!("no *_model.json files in {}", dir.display());
            }
            (
                names.iter().map(|n| dir.join(format!("{n}_model.json"))).collect(),
                names.iter().map(|n| dir.join(format!("{n}_test.csv"))).collect(),
            )
        }
        None => (models.to_vec(), tests.to_vec()),
    };
    if models.is_empty() || tests.is_empty() {
        bail!("transfer needs --dir or both --models and --tests");
    }
    let forests: Vec<(String, Forest)> = models
        .iter()
        .map(|p| Ok((label(p, "_model"), load_model(p)?)))
        .collect::<Result<_>>()?;
    let tables: Vec<(String, PlotTable)> = tests
        .iter()
        .map(|p| Ok((label(p, "_test"), load_plots(p)?)))
        .collect::<Result<_>>()?;
    let m = transfer_matrix(
        &forests.iter().map(|(l, f)| (l.clone(), f)).collect::<Vec<_>>(),
        &tables.iter().map(|(l, t)| (l.clone(), t)).collect::<Vec<_>>(),
    )?;
    emit(out, &matrix_csv(&m)?)
}

fn matrix_csv(m: &TransferMatrix) -> Result<String> {
    let mut buf = Vec::new();
    m.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn hull_build(plots: &Path, predictors: &[String], out: &Path) -> Result<()> {
    let table = load_plots(plots)?;
    let env = CalibrationEnvelope::build(&table, predictors)?;
    write_text(out, &env.to_json()?)?;
    println!("{}", out.display());
    Ok(())
}

fn hull_classify(envelope: &Path, plots: Option<&Path>, stack: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let env = load_envelope(envelope)?;
    match (plots, stack) {
        (Some(plots), _) => {
            let table = load_plots(plots)?;
            let idx: Vec<usize> = env
                .predictors()
                .iter()
                .map(|p| table.predictor_index(p))
                .collect::<forest_transfer::Result<_>>()?;
            let queries: Vec<Vec<f64>> = table
                .plots()
                .iter()
                .map(|p| idx.iter().map(|&j| p.features[j]).collect())
                .collect();
            let classes = env.classify_all(&queries)?;
            let mut text = String::from("id,class,code,distance\n");
            for (p, c) in table.plots().iter().zip(&classes) {
                let name = match c.code() {
                    0 => "inside",
                    1 => "near",
                    _ => "far",
                };
                let dist = c.distance().map_or_else(|| "NA".to_string(), |d| format!("{d}"));
                text.push_str(&format!("{},{name},{},{dist}\n", p.id, c.code()));
            }
            emit(out, &text)
        }
        (None, Some(stack)) => {
            let stack = load_stack(stack)?;
            let queries = pixel_queries(&stack, env.predictors(), usize::MAX, 0)?;
            let s = extrapolation_summary(&env, &queries)?;
            let doc = json!({
                "summary": s,
                "prop_inside": s.prop_inside(),
                "prop_near": s.prop_near(),
                "prop_far": s.prop_far(),
                "mcd": env.mcd(),
            });
            emit(out, &(serde_json::to_string_pretty(&doc)? + "\n"))
        }
        (None, None) => bail!("classify needs --plots or --stack"),
    }
}

struct ThinInputs<'a> {
    plots: &'a Path,
    test: &'a Path,
    model: &'a Path,
    envelope: &'a Path,
    stack: &'a Path,
}

fn thin(inputs: &ThinInputs, out: &Path, seed: u64, plan_opts: &PlanOpts, model_opts: &ModelOpts) -> Result<()> {
    let table = load_plots(inputs.plots)?;
    let test = load_plots(inputs.test)?;
    let forest = load_model(inputs.model)?;
    let env = load_envelope(inputs.envelope)?;
    let stack = load_stack(inputs.stack)?;
    let r = recipe(seed, model_opts);
    let params = forest_transfer::ForestParams {
        n_trees: model_opts.ntrees.unwrap_or(forest.params.n_trees),
        mtry: model_opts.mtry.or(forest.params.mtry),
        min_node_size: model_opts.min_node.unwrap_or(forest.params.min_node_size),
        ..r.forest_params()
    };
    let effort_recipe = EffortRecipe {
        retained: forest.schema.clone(),
        continuous: env.predictors().to_vec(),
        forest: params,
    };
    let queries = pixel_queries(&stack, env.predictors(), plan_opts.queries, seed)?;
    let points = effort_experiment(
        &table,
        Extent::of_stack(&stack),
        &plan(seed, plan_opts),
        &effort_recipe,
        &test,
        &queries,
    )?;
    let mut buf = Vec::new();
    write_effort_csv(&points, &mut buf)?;
    write_text(out, &String::from_utf8(buf)?)?;
    println!("{}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn map(
    stack: &Path,
    model: &Path,
    envelope: &Path,
    out: &Path,
    name: &str,
    window: Option<&[usize]>,
    preview: bool,
    cli: &Cli,
) -> Result<()> {
    let mut stack = load_stack(stack)?;
    if let Some(w) = window {
        stack = stack.crop(w[0], w[1], w[2], w[3])?;
    }
    let forest = load_model(model)?;
    let env = load_envelope(envelope)?;
    let bundle = predict_raster(&stack, &forest, &env)?;
    let args = json!({
        "command": "map",
        "model": model.display().to_string(),
        "envelope": envelope.display().to_string(),
        "window": window,
        "seed": cli.seed,
    });
    report(&write_bundle(&bundle, out, name, preview, args)?);
    Ok(())
}

fn demo(out: &Path, seed: u64, cellsize: Option<f64>, model_opts: &ModelOpts, plan_opts: &PlanOpts) -> Result<()> {
    let cfg = synth_config(seed, cellsize);
    let recipe = recipe(seed, model_opts);
    let plan = plan(seed, plan_opts);
    plan.validate()?;
    let data = synth_generate(&cfg)?;
    create_dir(out)?;
    let mut paths = Vec::new();

    let data_dir = out.join("data");
    create_dir(&data_dir)?;
    let tables: Vec<&PlotTable> = data.locals.iter().chain([&data.regional]).collect();
    for t in &tables {
        let p = data_dir.join(format!("{}.csv", t.name()));
        write_plots_csv(t, &p)?;
        paths.push(p);
    }
    let stack_dir = data_dir.join("stack");
    write_stack(&data.stack, &stack_dir)?;
    paths.push(stack_dir);
    let truth = data_dir.join("truth.asc");
    write_ascii_grid(&data.truth, &truth)?;
    paths.push(truth);

    // one model per dataset
    let model_dir = out.join("models");
    let fitted: Vec<FittedDataset> = tables
        .iter()
        .map(|t| fit_dataset(t, &recipe).with_context(|| format!("fitting {}", t.name())))
        .collect::<Result<_>>()?;
    for f in &fitted {
        paths.extend(write_fitted(f, &model_dir, &recipe)?);
    }

    // transfer matrix
    let matrix = transfer_study(&fitted)?;
    let transfer_path = out.join("transfer.csv");
    write_text(&transfer_path, &matrix_csv(&matrix)?)?;
    paths.push(transfer_path);
    let n_local = data.locals.len();
    let contrasts = transfer_contrasts(&matrix, &(0..n_local).collect::<Vec<_>>());

    // extrapolation over each model's own area
    let mut areas = Vec::new();
    for (f, block) in fitted.iter().zip(&data.blocks) {
        let (r0, c0, nr, nc) = block.window(data.stack.geometry());
        let crop = data.stack.crop(r0, c0, nr, nc)?;
        areas.push(area_extrapolation(&f.name, &block.name, &crop, &f.envelope)?);
    }
    let regional = &fitted[n_local];
    areas.push(area_extrapolation(&regional.name, "aoi", &data.stack, &regional.envelope)?);
    let extrap_path = out.join("extrapolation.csv");
    let mut buf = Vec::new();
    write_extrapolation_csv(&areas, &mut buf)?;
    write_text(&extrap_path, &String::from_utf8(buf)?)?;
    paths.push(extrap_path);

    // effort curves on the regional network
    let effort_recipe = EffortRecipe {
        retained: regional.selection.retained.clone(),
        continuous: regional.selection.continuous.clone(),
        forest: recipe.forest_params(),
    };
    let queries = pixel_queries(&data.stack, &effort_recipe.continuous, plan_opts.queries, seed)?;
    let points = effort_experiment(
        &regional.split.train,
        Extent::of_stack(&data.stack),
        &plan,
        &effort_recipe,
        &regional.split.test,
        &queries,
    )?;
    let effort_path = out.join("effort.csv");
    let mut buf = Vec::new();
    write_effort_csv(&points, &mut buf)?;
    write_text(&effort_path, &String::from_utf8(buf)?)?;
    paths.push(effort_path);

    // maps of the first sub-forest under its own and the regional model
    let block = &data.blocks[0];
    let (r0, c0, nr, nc) = block.window(data.stack.geometry());
    let crop = data.stack.crop(r0, c0, nr, nc)?;
    let map_dir = out.join("maps");
    let mut map_summaries = Vec::new();
    for (f, kind) in [(&fitted[0], "local"), (regional, "regional")] {
        let bundle = predict_raster(&crop, &f.forest, &f.envelope)?;
        let name = format!("{}_{kind}", block.name);
        let args = json!({ "command": "demo", "seed": seed, "model": f.name, "area": block.name, "window": [r0, c0, nr, nc] });
        paths.extend(write_bundle(&bundle, &map_dir, &name, true, args)?);
        map_summaries.push(json!({ "name": name, "summary": bundle.summary }));
    }

    let manifest_path = out.join("demo_manifest.json");
    let manifest = json!({
        "seed": seed,
        "synth": cfg,
        "recipe": recipe,
        "plan": plan,
        "selected": fitted.iter().map(|f| json!({ "dataset": f.name, "retained": f.selection.retained })).collect::<Vec<_>>(),
        "transfer_contrasts": contrasts,
        "effort_means": resolution_means(&points),
        "maps": map_summaries,
        "files": paths.iter().map(|p| p.strip_prefix(out).unwrap_or(p).display().to_string()).collect::<Vec<_>>(),
    });
    write_json(&manifest_path, &manifest)?;
    paths.push(manifest_path);
    report(&paths);
    std::io::stdout().flush()?;
    Ok(())
}
