use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use hea_dvae::data::{
    accuracy, load_dataset, mean_std, roc, split, AlloyRecord, DataSplits, SplitName, SplitSizes,
};
use hea_dvae::design::{self, group_probe, ElementGroup, MapInput};
use hea_dvae::dvae::{supervised_baseline_train, train as train_model, DvaeModel, LatentPoint};
use hea_dvae::explain::{global_importance, ShapOptions};
use hea_dvae::fsio::write_atomic;
use hea_dvae::synth::{self, SynthConfig};
use hea_dvae::{par, Composition, ElementTable};
use hea_dvae_service::{router, serve as serve_api, ServiceState};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::svg::latent_map_svg;
use crate::{
    BaselineArgs, EvalArgs, GenerateArgs, GridArgs, InvertArgs, LatentMapArgs, ReconstructArgs,
    ScreenArgs, ServeArgs, ShapArgs, SynthArgs, TableArgs, TrainArgs,
};

fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_atomic(path, text.as_bytes())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_model(path: &Path) -> CliResult<DvaeModel> {
    DvaeModel::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_records(path: &Path) -> CliResult<Vec<AlloyRecord>> {
    Ok(load_dataset(path)?)
}

fn element_table(args: &TableArgs) -> CliResult<ElementTable> {
    match (&args.elements, &args.pairs) {
        (Some(e), Some(p)) => Ok(ElementTable::load(e, p)?),
        _ => Ok(ElementTable::bundled().clone()),
    }
}

/// Indices of `name` under the split recorded in the checkpoint.
fn checkpoint_split(model: &DvaeModel, n_records: usize, name: SplitName) -> CliResult<Vec<usize>> {
    if name == SplitName::All {
        return Ok((0..n_records).collect());
    }
    model
        .metadata
        .splits(n_records)
        .map(|s| s.indices(name))
        .ok_or_else(|| {
            CliError::Data(format!(
                "checkpoint does not record a split that fits {n_records} records; use --split all"
            ))
        })
}

fn select(
    records: &[AlloyRecord],
    idx: &[usize],
) -> (Vec<Composition>, Vec<hea_dvae::dvae::PhaseLabel>) {
    idx.iter()
        .map(|&i| (records[i].composition, records[i].label))
        .unzip()
}

fn check_probability(name: &str, p: f64) -> CliResult<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{name} must lie in [0, 1], got {p}"
        )))
    }
}

#[derive(Debug, Clone, Serialize)]
struct SeedMetrics {
    seed: u64,
    best_epoch: usize,
    epochs_run: usize,
    train_accuracy: f64,
    val_accuracy: f64,
    test_accuracy: f64,
    train_auc: f64,
    val_auc: f64,
    test_auc: f64,
    test_mae: f64,
}

impl SeedMetrics {
    fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("train_accuracy", self.train_accuracy),
            ("val_accuracy", self.val_accuracy),
            ("test_accuracy", self.test_accuracy),
            ("train_auc", self.train_auc),
            ("val_auc", self.val_auc),
            ("test_auc", self.test_auc),
            ("test_mae", self.test_mae),
        ]
    }
}

#[derive(Debug, Serialize)]
struct MeanStd {
    mean: f64,
    std: f64,
}

fn split_line(s: &SplitSizes) -> String {
    format!(
        "split sizes: labelled {} / unlabelled {} / validation {} / test {}",
        s.labelled, s.unlabelled, s.validation, s.test
    )
}

fn train_one(
    args: &TrainArgs,
    table: &ElementTable,
    records: &[AlloyRecord],
    seed: u64,
) -> CliResult<SeedMetrics> {
    let splits = split(records.len(), args.sizes.sizes(), seed)?;
    let config = args.hyper.config(seed);
    let outcome = train_model(&config, table, records, &splits)?;
    let mut model = outcome.model;
    let dir = args.out.join(format!("seed_{seed}"));

    let mut scores = BTreeMap::new();
    for (tag, name) in [
        ("train", SplitName::Labelled),
        ("val", SplitName::Validation),
        ("test", SplitName::Test),
    ] {
        let (comps, labels) = select(records, &splits.indices(name));
        let p = model.classify_batch(&comps)?;
        let curve = roc(&p, &labels)?;
        write(&dir.join(format!("roc_{tag}.csv")), &curve.to_csv())?;
        scores.insert(tag, (accuracy(&p, &labels)?, curve.auc));
    }
    let (test, _) = select(records, &splits.test);
    let maes = par::try_map(&test, |c| {
        model.reconstruct(c).map(|r| r.composition.mae(c))
    })?;
    let metrics = SeedMetrics {
        seed,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.epochs_run,
        train_accuracy: scores["train"].0,
        val_accuracy: scores["val"].0,
        test_accuracy: scores["test"].0,
        train_auc: scores["train"].1,
        val_auc: scores["val"].1,
        test_auc: scores["test"].1,
        test_mae: maes.iter().sum::<f64>() / maes.len().max(1) as f64,
    };
    for (k, v) in metrics.named() {
        model.metadata.metrics.insert(k.to_string(), v);
    }
    write(&dir.join("checkpoint.json"), &model.to_json())?;
    write(&dir.join("training_log.csv"), &outcome.log.to_csv())?;
    write_json(&dir.join("metrics.json"), &metrics)?;
    log::info!(
        "seed {seed}: best epoch {} val acc {:.3} test acc {:.3} test auc {:.3}",
        metrics.best_epoch,
        metrics.val_accuracy,
        metrics.test_accuracy,
        metrics.test_auc
    );
    Ok(metrics)
}

pub fn train(args: TrainArgs) -> CliResult<()> {
    let seeds = args.seeds.list()?;
    args.hyper.config(0).validate()?;
    let table = element_table(&args.tables)?;
    let records = load_records(&args.data.dataset)?;
    println!("{}", split_line(&args.sizes.sizes()));
    let runs = par::try_map(&seeds, |&seed| train_one(&args, &table, &records, seed))?;

    let mut summary = BTreeMap::new();
    for (k, _) in runs[0].named() {
        let vals: Vec<f64> = runs
            .iter()
            .map(|r| r.named().iter().find(|(n, _)| *n == k).unwrap().1)
            .collect();
        let (mean, std) = mean_std(&vals);
        println!("{k}: {mean:.3} ± {std:.3} (n={})", vals.len());
        summary.insert(k, MeanStd { mean, std });
    }
    let mut csv = String::from("seed,best_epoch,epochs_run");
    for (k, _) in runs[0].named() {
        csv.push(',');
        csv.push_str(k);
    }
    csv.push('\n');
    for r in &runs {
        csv.push_str(&format!("{},{},{}", r.seed, r.best_epoch, r.epochs_run));
        for (_, v) in r.named() {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    write(&args.out.join("metrics_per_seed.csv"), &csv)?;
    write_json(
        &args.out.join("metrics_summary.json"),
        &serde_json::json!({ "split_sizes": args.sizes.sizes(), "seeds": runs, "summary": summary }),
    )
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let model = load_model(&args.model.checkpoint)?;
    let records = load_records(&args.data.dataset)?;
    let idx = checkpoint_split(&model, records.len(), args.split)?;
    let (comps, labels) = select(&records, &idx);
    let p = model.classify_batch(&comps)?;
    let acc = accuracy(&p, &labels)?;
    let curve = roc(&p, &labels)?;
    if let Some(path) = &args.roc_out {
        write(path, &curve.to_csv())?;
    }
    println!(
        "{}",
        serde_json::json!({ "n": idx.len(), "accuracy": acc, "auc": curve.auc })
    );
    Ok(())
}

pub fn reconstruct(args: ReconstructArgs) -> CliResult<()> {
    if !(args.bin_width > 0.0) {
        return Err(CliError::Usage("--bin-width must be positive".into()));
    }
    let model = load_model(&args.model.checkpoint)?;
    let records = load_records(&args.data.dataset)?;
    let idx = checkpoint_split(&model, records.len(), args.split)?;
    let (comps, labels) = select(&records, &idx);
    let recon = par::try_map(&comps, |c| model.reconstruct(c))?;
    let mut csv = String::from("formula,label,probability,reconstruction,mae,z1,z2\n");
    let mut maes = Vec::with_capacity(comps.len());
    for ((c, l), r) in comps.iter().zip(&labels).zip(&recon) {
        let mae = r.composition.mae(c);
        maes.push(mae);
        let z = r.latent.coords();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.format_standard(),
            l.as_f64(),
            r.probability,
            r.composition.format_standard(),
            mae,
            z.first().copied().unwrap_or(f64::NAN),
            z.get(1).copied().unwrap_or(f64::NAN)
        ));
    }
    write(&args.out, &csv)?;
    let max = maes.iter().copied().fold(0.0, f64::max);
    if let Some(path) = &args.hist_out {
        let bins = ((max / args.bin_width).floor() as usize) + 1;
        let mut counts = vec![0usize; bins];
        for m in &maes {
            counts[((m / args.bin_width).floor() as usize).min(bins - 1)] += 1;
        }
        let mut hist = String::from("bin_start,bin_end,count\n");
        for (i, n) in counts.iter().enumerate() {
            hist.push_str(&format!(
                "{},{},{n}\n",
                i as f64 * args.bin_width,
                (i + 1) as f64 * args.bin_width
            ));
        }
        write(path, &hist)?;
    }
    let mean = maes.iter().sum::<f64>() / maes.len().max(1) as f64;
    println!(
        "{}",
        serde_json::json!({ "n": maes.len(), "mean_mae": mean, "max_mae": max })
    );
    Ok(())
}

fn read_candidates(path: &Path) -> CliResult<Vec<Composition>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .peekable();
    let mut column = None;
    if let Some(header) = lines.peek() {
        if let Some(pos) = header.split(',').position(|h| h.trim() == "formula") {
            column = Some(pos);
            lines.next();
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let field = match column {
                Some(c) => line.split(',').nth(c).unwrap_or(""),
                None => line,
            };
            Composition::parse(field.trim())
                .map_err(|e| CliError::Data(format!("candidate {}: {e}", i + 1)))
        })
        .collect()
}

pub fn screen(args: ScreenArgs) -> CliResult<()> {
    let model = load_model(&args.model.checkpoint)?;
    let cutoff = args.cutoff.unwrap_or(model.config.sp_cutoff);
    check_probability("cutoff", cutoff)?;
    let candidates = read_candidates(&args.candidates)?;
    let hits = design::screen(&model, &candidates, cutoff)?;
    let mut csv = String::from("formula,probability\n");
    for h in &hits {
        csv.push_str(&format!("{},{}\n", h.formula, h.probability));
    }
    match &args.out {
        Some(path) => {
            write(path, &csv)?;
            println!(
                "{} of {} candidates at or above {cutoff}",
                hits.len(),
                candidates.len()
            );
        }
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn generate(args: GenerateArgs) -> CliResult<()> {
    let model = load_model(&args.model.checkpoint)?;
    check_probability("--target-p", args.target_p)?;
    let g = design::generate(&model, &LatentPoint(args.z), args.target_p)?;
    println!("{}", serde_json::to_string(&g)?);
    Ok(())
}

pub fn invert(args: InvertArgs) -> CliResult<()> {
    check_probability("--cutoff", args.cutoff)?;
    let model = load_model(&args.model.checkpoint)?;
    let start = Composition::parse(&args.formula).map_err(|e| CliError::Usage(e.to_string()))?;
    let trace = design::invert(&model, &start, args.cutoff, args.max_iters)?;
    if let Some(path) = &args.json_out {
        write_json(path, &trace)?;
    }
    println!("{}", trace.chain());
    println!(
        "converged: {} after {} steps",
        trace.converged,
        trace.steps.len()
    );
    Ok(())
}

pub fn grid(args: GridArgs) -> CliResult<()> {
    for t in &args.targets {
        check_probability("--targets", *t)?;
    }
    let model = load_model(&args.model.checkpoint)?;
    let rows = design::grid_study(&model, &args.z1, &args.z2, &args.targets)?;
    write(&args.out, &design::grid_csv(&rows))?;
    println!("{} rows", rows.len());
    Ok(())
}

pub fn shap(args: ShapArgs) -> CliResult<()> {
    let model = load_model(&args.model.checkpoint)?;
    let records = load_records(&args.data.dataset)?;
    let (eval, _) = select(
        &records,
        &checkpoint_split(&model, records.len(), args.split)?,
    );
    let (bg, _) = select(
        &records,
        &checkpoint_split(&model, records.len(), args.background)?,
    );
    let options = ShapOptions {
        max_background: args.max_background.max(1),
        seed: args.background_seed,
    };
    let gi = global_importance(&model, &eval, &bg, options)?;
    write(&args.csv_out, &gi.to_csv())?;
    let bees = gi.beeswarm();
    if let Some(path) = &args.json_out {
        write_json(path, &bees)?;
    }
    for f in &bees {
        println!(
            "{:<10} mean|shap| {:.4}  direction {:+.3}",
            f.name, f.mean_abs_shap, f.direction
        );
    }
    Ok(())
}

pub fn latent_map(args: LatentMapArgs) -> CliResult<()> {
    let model = load_model(&args.model.checkpoint)?;
    let records = load_records(&args.data.dataset)?;
    let idx = checkpoint_split(&model, records.len(), args.split)?;
    let inputs: Vec<MapInput> = idx
        .iter()
        .map(|&i| MapInput {
            composition: records[i].composition,
            label: Some(records[i].label),
        })
        .collect();
    let map = design::latent_map(&model, &inputs, args.grid)?;
    write_json(&args.out, &map)?;
    if let Some(path) = &args.svg {
        write(path, &latent_map_svg(&map))?;
    }
    if let Some(path) = &args.groups_out {
        write_json(path, &group_probe(&model, &ElementGroup::defaults())?)?;
    }
    println!(
        "{}",
        serde_json::json!({
            "points": map.points.len(),
            "fraction_inside": map.fraction_inside((-2.5, 2.5), (-2.0, 2.0)),
            "bandwidth": map.density.bandwidth,
        })
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct BaselineRow {
    labelled: usize,
    unlabelled: usize,
    seed: u64,
    semi_supervised_test_accuracy: f64,
    baseline_test_accuracy: f64,
}

fn baseline_row(
    args: &BaselineArgs,
    table: &ElementTable,
    records: &[AlloyRecord],
    sizes: SplitSizes,
    seed: u64,
) -> CliResult<BaselineRow> {
    let splits: DataSplits = split(records.len(), sizes, seed)?;
    let config = args.hyper.config(seed);
    let (comps, labels) = select(records, &splits.test);
    let semi = train_model(&config, table, records, &splits)?;
    let base = supervised_baseline_train(&config, table, records, &splits)?;
    Ok(BaselineRow {
        labelled: sizes.labelled,
        unlabelled: sizes.unlabelled,
        seed,
        semi_supervised_test_accuracy: accuracy(&semi.model.classify_batch(&comps)?, &labels)?,
        baseline_test_accuracy: accuracy(&base.model.classify_batch(&comps)?, &labels)?,
    })
}

pub fn baseline(args: BaselineArgs) -> CliResult<()> {
    if args.labelled.len() != args.unlabelled.len() {
        return Err(CliError::Usage(
            "--labelled and --unlabelled need the same number of entries".into(),
        ));
    }
    let seeds = args.seeds.list()?;
    args.hyper.config(0).validate()?;
    let table = element_table(&args.tables)?;
    let records = load_records(&args.data.dataset)?;
    let mut jobs = Vec::new();
    for (&labelled, &unlabelled) in args.labelled.iter().zip(&args.unlabelled) {
        let sizes = SplitSizes {
            labelled,
            unlabelled,
            validation: args.validation,
            test: args.test,
        };
        println!("{}", split_line(&sizes));
        for &seed in &seeds {
            jobs.push((sizes, seed));
        }
    }
    let rows = par::try_map(&jobs, |&(sizes, seed)| {
        baseline_row(&args, &table, &records, sizes, seed)
    })?;
    let mut csv = String::from(
        "labelled,unlabelled,seed,semi_supervised_test_accuracy,baseline_test_accuracy\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.labelled,
            r.unlabelled,
            r.seed,
            r.semi_supervised_test_accuracy,
            r.baseline_test_accuracy
        ));
    }
    write(&args.out, &csv)?;
    for (&labelled, &unlabelled) in args.labelled.iter().zip(&args.unlabelled) {
        let group: Vec<&BaselineRow> = rows.iter().filter(|r| r.labelled == labelled).collect();
        let semi: Vec<f64> = group
            .iter()
            .map(|r| r.semi_supervised_test_accuracy)
            .collect();
        let base: Vec<f64> = group.iter().map(|r| r.baseline_test_accuracy).collect();
        let wins = group
            .iter()
            .filter(|r| r.semi_supervised_test_accuracy >= r.baseline_test_accuracy)
            .count();
        println!(
            "{labelled} labelled / {unlabelled} unlabelled: semi-supervised {:.3}, baseline {:.3}, semi >= baseline in {wins} of {}",
            mean_std(&semi).0,
            mean_std(&base).0,
            group.len()
        );
    }
    Ok(())
}

pub fn serve(args: ServeArgs) -> CliResult<()> {
    let records = match &args.dataset {
        Some(p) => load_records(p)?,
        None => Vec::new(),
    };
    let state = match &args.checkpoint {
        Some(path) => {
            ServiceState::new(load_model(path)?, records).map_err(|e| CliError::Data(e.message))?
        }
        None => {
            log::warn!("no checkpoint given; model endpoints will answer model_not_loaded");
            ServiceState::empty()
        }
    };
    let app = router(Arc::new(state), args.static_dir.clone());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
        serve_api(listener, app).await
    })?;
    Ok(())
}

pub fn synth(args: SynthArgs) -> CliResult<()> {
    let config = SynthConfig {
        n_rows: args.rows,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let rows = synth::generate(&config, ElementTable::bundled())?;
    write(&args.out, &synth::to_csv(&rows))?;
    let sp = rows
        .iter()
        .filter(|r| r.record.label.is_single_phase())
        .count();
    println!(
        "{} rows ({} single phase) -> {}",
        rows.len(),
        sp,
        args.out.display()
    );
    Ok(())
}
