use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cakgcn_core::data::{
    generate_synthetic, load_kg, DatasetBundle, IdSpace, KnowledgeGraph, RawDataset, RawTable, SchemaFile,
    SyntheticSpec, TaskKind, Transform,
};
use cakgcn_core::data::records::interactions_from_table;
use cakgcn_core::explain::{
    export_analysis, extract_attention, render_explanation, select_k, DEFAULT_K_RANGE,
};
use cakgcn_core::model::{Ablation, Checkpoint, Head, Model, ModelConfig, ModelKind};
use cakgcn_core::seed::SeedStreams;
use cakgcn_core::train::{
    evaluate as evaluate_report, grid_search_with, probe_auc, train_with, Grid, ProbeConfig, TrainConfig, TrainOutcome,
};
use cakgcn_core::Error as CoreError;

use crate::args::{
    EvaluateArgs, ExplainArgs, ModelArgs, PrepareArgs, Preset, RunArgs, SynthArgs, TrainArgs, UsageError,
};
use crate::manifest::Manifest;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.tsv";
pub const LEADERBOARD_FILE: &str = "leaderboard.tsv";
pub const REPORT_FILE: &str = "report.txt";
pub const REPORT_TSV_FILE: &str = "report.tsv";
pub const EXPLANATIONS_FILE: &str = "explanations.jsonl";
pub const K_SELECTION_FILE: &str = "k_selection.tsv";
pub const PROBE_FILE: &str = "probe.txt";

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_bundle(dir: &Path) -> Result<DatasetBundle> {
    DatasetBundle::load_dir(dir).with_context(|| format!("loading bundle {}", dir.display()))
}

pub fn prepare(a: &PrepareArgs) -> Result<()> {
    let transforms = a
        .transforms
        .iter()
        .map(|t| t.parse::<Transform>())
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let mut m = Manifest::new("prepare");
    for t in &transforms {
        m.config("transform", t);
    }
    m.seed("split", a.seed);
    m.input(&a.interactions)?.input(&a.schema)?;
    if let Some(kg) = &a.kg {
        m.input(kg)?;
    }
    m.write(&a.out)?;

    let SchemaFile { task, scale, mut schema } = SchemaFile::load(&a.schema)?;
    let mut kg = match &a.kg {
        Some(p) => load_kg(p)?,
        None => KnowledgeGraph::new(),
    };
    let mut table = RawTable::load(&a.interactions)?;
    cakgcn_core::data::transform::apply_all(&transforms, &mut table, &mut kg)?;
    let mut ids = IdSpace::default();
    let records = interactions_from_table(&table, &a.interactions, &mut schema, task, scale, &mut ids)?;
    let raw = RawDataset {
        task,
        scale,
        schema,
        ids,
        records,
        kg,
    };
    let bundle = DatasetBundle::from_raw(raw, &SeedStreams::new(a.seed))?;
    bundle.write_dir(&a.out)?;
    // Reload so the printed stats describe exactly what is on disk.
    let bundle = load_bundle(&a.out)?;
    print!("{}", bundle.stats().render());
    Ok(())
}

fn parse_conditions(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("--conditions expects comma-separated counts, got `{text}`")))
        })
        .collect()
}

fn synth_spec(a: &SynthArgs) -> Result<SyntheticSpec> {
    let mut spec = match a.preset {
        Preset::Recovery => SyntheticSpec::recovery(a.seed),
        Preset::Frappe => SyntheticSpec::frappe_scale(a.seed),
    };
    if let Some(t) = a.task {
        spec.task = t;
    }
    if let Some(v) = a.users {
        spec.users = v;
    }
    if let Some(v) = a.items {
        spec.items = v;
    }
    if let Some(c) = &a.conditions {
        spec.conditions = parse_conditions(c)?;
    }
    if let Some(v) = a.relations {
        spec.relations = v;
    }
    if let Some(v) = a.entities {
        spec.entities = v;
    }
    if let Some(v) = a.interactions {
        spec.interactions = v;
    }
    if let Some(v) = a.noise {
        spec.noise = v;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let spec = synth_spec(a)?;
    if a.probe && spec.task != TaskKind::Ranking {
        bail!(usage("--probe needs a ranking task"));
    }
    let mut m = Manifest::new("synth");
    m.config("task", spec.task)
        .config("users", spec.users)
        .config("items", spec.items)
        .config("conditions", format!("{:?}", spec.conditions))
        .config("relations", spec.relations)
        .config("entities", spec.entities)
        .config("interactions", spec.interactions)
        .config("noise", spec.noise)
        .config("factor_focus", spec.factor_focus)
        .config("relation_focus", spec.relation_focus)
        .config("taste", spec.taste)
        .config("top_fraction", spec.top_fraction)
        .seed("synth", spec.seed);
    m.write(&a.out)?;

    let data = generate_synthetic(&spec)?;
    let paths = data.write_raw(&a.out)?;
    for p in &paths {
        println!("wrote {}", p.display());
    }
    if a.probe {
        let bundle = DatasetBundle::from_raw(data.raw.clone(), &SeedStreams::new(spec.seed))?;
        let cfg = ProbeConfig {
            seed: spec.seed,
            ..ProbeConfig::default()
        };
        let r = probe_auc(&bundle, &cfg)?;
        let text = format!(
            "probe_auc: {}\nfeatures: {}\ntrain_examples: {}\ntest_examples: {}\n",
            r.auc, r.features, r.train_examples, r.test_examples
        );
        write(&a.out.join(PROBE_FILE), &text)?;
        print!("{text}");
    }
    Ok(())
}

/// Resolves model flags into a config, rejecting contradictory combinations.
pub fn model_config(a: &ModelArgs, task: TaskKind) -> Result<ModelConfig> {
    let config = match a.model {
        ModelKind::CaKgcn => {
            let head = match (a.ablation, a.head) {
                (Ablation::PlainMf, Some(h)) if h != Head::Mf => {
                    bail!(usage(format!("--ablation plain-mf implies --head mf, got --head {h}")))
                }
                (Ablation::PlainMf, _) => Head::Mf,
                (_, Some(h)) => h,
                (_, None) => Head::Nfm,
            };
            ModelConfig::new(task)
                .with_aggregator(a.aggregator)
                .with_ablation(a.ablation)
                .with_head(head)
        }
        kind => {
            if a.ablation != Ablation::Full || a.head.is_some() {
                bail!(usage(format!("--model {kind} takes no --ablation or --head")));
            }
            ModelConfig::baseline(kind, task)
        }
    };
    let config = config.with_dim(a.dim);
    config.validate()?;
    Ok(config)
}

fn run_config(a: &RunArgs) -> Result<TrainConfig> {
    let run = TrainConfig {
        lr: a.lr,
        batch: a.batch,
        l2: a.l2,
        dropout: a.dropout,
        epochs: a.epochs,
        patience: a.patience,
        negatives: a.negatives,
        seed: a.seed,
    };
    run.validate()?;
    Ok(run)
}

fn checkpoint_meta(run: &TrainConfig, outcome: &TrainOutcome) -> BTreeMap<String, String> {
    let mut meta: BTreeMap<String, String> = run.echo().into_iter().collect();
    meta.insert("best_epoch".into(), outcome.best_epoch.to_string());
    if let Some(v) = outcome.best_metric {
        meta.insert("valid_metric".into(), v.to_string());
    }
    meta
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let bundle = load_bundle(&a.bundle)?;
    let config = model_config(&a.model, bundle.task)?;
    let run = run_config(&a.run)?;
    let grid = match a.grid.as_deref() {
        None => None,
        Some("default") => Some(Grid::default()),
        Some(spec) => Some(spec.parse::<Grid>()?),
    };
    if config.uses_kg() && bundle.kg.is_empty() {
        return Err(CoreError::Config(format!(
            "model `{}` needs a knowledge graph but {} has no triplets (was prepare run without --kg?)",
            config.label(),
            a.bundle.display()
        ))
        .into());
    }

    let mut m = Manifest::new("train");
    m.config("model", config.label()).config("dim", config.dim);
    for (k, v) in run.echo() {
        if k != "seed" {
            m.config(&k, v);
        }
    }
    if let Some(g) = &grid {
        m.config("grid", g);
    }
    for s in ["init", "sampling", "dropout"] {
        m.seed(s, run.seed);
    }
    m.input_dir(&a.bundle)?;
    m.artifact(a.out.join(CHECKPOINT_FILE)).artifact(a.out.join(HISTORY_FILE));
    if grid.is_some() {
        m.artifact(a.out.join(LEADERBOARD_FILE));
    }
    m.write(&a.out)?;

    let (run, outcome) = match &grid {
        None => {
            let outcome = train_with(&bundle, &config, &run, &mut |r| {
                eprintln!("epoch {}\tloss {:.6}\tvalid {}", r.epoch, r.train_loss, fmt_opt(r.valid_metric));
            })?;
            (run, outcome)
        }
        Some(g) => {
            let out = grid_search_with(&bundle, &config, &run, g, &mut |p, r| {
                eprintln!(
                    "lr {} batch {} l2 {} dropout {}\tepoch {}\tloss {:.6}\tvalid {}",
                    p.lr,
                    p.batch,
                    p.l2,
                    p.dropout,
                    r.epoch,
                    r.train_loss,
                    fmt_opt(r.valid_metric)
                );
            })?;
            write(&a.out.join(LEADERBOARD_FILE), &out.leaderboard_tsv())?;
            (out.best, out.outcome)
        }
    };
    write(&a.out.join(HISTORY_FILE), &outcome.history_tsv())?;
    let meta = checkpoint_meta(&run, &outcome);
    Checkpoint::new(&outcome.model, meta).save(&a.out.join(CHECKPOINT_FILE))?;
    println!(
        "{}: best epoch {} valid {}",
        config.label(),
        outcome.best_epoch,
        fmt_opt(outcome.best_metric)
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into())
}

fn load_checkpoint(path: &Path) -> Result<(Model, BTreeMap<String, String>)> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let meta = ck.meta.clone();
    Ok((ck.into_model()?, meta))
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let mut m = Manifest::new("evaluate");
    if let Some(t) = a.task {
        m.config("task", t);
    }
    m.input(&a.checkpoint)?.input_dir(&a.bundle)?;
    m.artifact(a.out.join(REPORT_FILE)).artifact(a.out.join(REPORT_TSV_FILE));
    m.write(&a.out)?;

    let (model, meta) = load_checkpoint(&a.checkpoint)?;
    let bundle = load_bundle(&a.bundle)?;
    let task = a.task.unwrap_or(model.config().task);
    let mut report = evaluate_report(&model, &bundle, task)?;
    report.seed = meta.get("seed").and_then(|s| s.parse().ok());
    report.config = meta;
    write(&a.out.join(REPORT_FILE), &report.render())?;
    write(
        &a.out.join(REPORT_TSV_FILE),
        &format!("{}\n{}\n", report.tsv_header(), report.tsv_row()),
    )?;
    print!("{}", report.render());
    Ok(())
}

fn parse_k(text: &str) -> Result<Vec<usize>> {
    if text == "auto" {
        return Ok(DEFAULT_K_RANGE.collect());
    }
    match text.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(vec![k]),
        _ => Err(usage(format!("--k expects `auto` or a positive integer, got `{text}`"))),
    }
}

pub fn explain(a: &ExplainArgs) -> Result<()> {
    if a.user.is_none() && !a.cluster {
        bail!(usage("explain needs --user (with --situation) and/or --cluster"));
    }
    if a.user.is_some() != a.situation.is_some() {
        bail!(usage("--user and --situation go together"));
    }
    if a.item.is_some() && a.user.is_none() {
        bail!(usage("--item needs --user and --situation"));
    }
    let ks = parse_k(&a.k)?;

    let mut m = Manifest::new("explain");
    if let (Some(u), Some(s)) = (&a.user, &a.situation) {
        m.config("user", u).config("situation", s);
        if let Some(i) = &a.item {
            m.config("item", i);
        } else {
            m.config("recommend", a.recommend);
        }
        m.config("top_n", a.top_n);
        m.artifact(a.out.join(EXPLANATIONS_FILE));
    }
    if a.cluster {
        m.config("k", &a.k).seed("kmeans", a.seed);
        for f in [
            cakgcn_core::explain::CLUSTERS_FILE,
            cakgcn_core::explain::CENTROIDS_FILE,
            cakgcn_core::explain::ATTENTION_FILE,
            K_SELECTION_FILE,
        ] {
            m.artifact(a.out.join(f));
        }
    }
    m.input(&a.checkpoint)?.input_dir(&a.bundle)?;
    m.write(&a.out)?;

    let (model, _) = load_checkpoint(&a.checkpoint)?;
    let bundle = load_bundle(&a.bundle)?;
    let vocab = bundle.vocabularies();
    if model.vocab() != &vocab {
        return Err(CoreError::Config("checkpoint vocabularies do not match the dataset bundle".into()).into());
    }
    model.check_graph(&bundle.graph)?;

    if let (Some(user), Some(situation)) = (&a.user, &a.situation) {
        let lines = explain_user(&model, &bundle, user, situation, a)?;
        write(&a.out.join(EXPLANATIONS_FILE), &lines)?;
    }
    if a.cluster {
        cluster_users(&model, &bundle, &ks, a.seed, &a.out)?;
    }
    Ok(())
}

fn explain_user(model: &Model, bundle: &DatasetBundle, user: &str, situation: &str, a: &ExplainArgs) -> Result<String> {
    let vocab = model.vocab();
    let u = vocab.users.id(user).ok_or_else(|| CoreError::UnknownId {
        kind: "user",
        name: user.into(),
    })?;
    let cs = vocab.schema.parse_situation(situation)?;
    let items = match &a.item {
        Some(name) => vec![vocab.items.id(name).ok_or_else(|| CoreError::UnknownId {
            kind: "item",
            name: name.clone(),
        })?],
        None => {
            let seen: HashSet<u32> = bundle
                .train
                .iter()
                .filter(|r| r.user == u && r.situation == cs && r.is_positive())
                .map(|r| r.item)
                .collect();
            let candidates: Vec<u32> = (0..vocab.items.len() as u32).filter(|i| !seen.contains(i)).collect();
            let scores = model.score_items(&bundle.graph, u, &cs, &candidates)?;
            let mut ranked: Vec<(u32, f64)> = candidates.into_iter().zip(scores).collect();
            ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            ranked.into_iter().take(a.recommend).map(|(i, _)| i).collect()
        }
    };
    let profile = model.attention(u, &cs)?;
    let mut out = String::new();
    for item in items {
        let e = render_explanation(&profile, item, vocab, &bundle.graph, a.top_n)?;
        println!("{}: {}", e.item, e.sentence);
        out.push_str(&e.to_json_line()?);
        out.push('\n');
    }
    Ok(out)
}

fn cluster_users(model: &Model, bundle: &DatasetBundle, ks: &[usize], seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    let users: Vec<u32> = bundle.test.iter().map(|r| r.user).collect::<BTreeSet<_>>().into_iter().collect();
    let situation = match bundle.test.first() {
        Some(r) => r.situation.clone(),
        None => bail!(CoreError::InvalidArgument("bundle has no test users to cluster".into())),
    };
    let extract = extract_attention(model, &users, std::slice::from_ref(&situation))?;
    let vectors: Vec<Vec<f64>> = extract.factors.iter().map(|v| v.weights.clone()).collect();
    let selection = select_k(&vectors, ks, seed)?;
    let mut paths = export_analysis(&selection.assignment, &extract.factors, model.vocab(), out)?;
    let p = out.join(K_SELECTION_FILE);
    write(&p, &selection.render())?;
    paths.push(p);
    print!("{}", selection.render());
    Ok(paths)
}
