use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use cascade_core::corpus::{ingest_collection, ingest_qrels, ingest_queries, read_word_list, Qrels};
use cascade_core::index::{load_index, save_index, Bm25Params, InvertedIndex, Tokenizer, TokenizerConfig};
use cascade_core::metrics::{compute, report, Metric};
use cascade_core::pipeline::{CostLedger, Pipeline, StageBudget};
use cascade_core::run::RunFile;
use cascade_core::sweep::{sweep, to_csv, CostAxis, SweepContext, SweepGrid};
use cascade_core::toy::{
    pairwise_examples, train_toy_pairwise, train_toy_pointwise, LabeledExample, ToyPairwiseModel, ToyPointwiseModel,
    TrainConfig,
};

use crate::scorers::{self, ScorerChoice};
use crate::{AggName, BuildArgs, Cli, Command, EvaluateArgs, IndexAction, MetricName, ModelKind, SearchArgs, SweepArgs, TrainArgs};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Index { action: IndexAction::Build(a) } => build(a),
        Command::Search(a) => search(a, cli.seed),
        Command::TrainToy(a) => train(a, cli.seed),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => run_sweep(a, cli.seed),
    }
}

fn input_file(path: &Path, what: &str) -> Result<()> {
    ensure!(path.is_file(), "{what} {} does not exist or is not a file", path.display());
    Ok(())
}

fn input_dir(path: &Path, what: &str) -> Result<()> {
    ensure!(path.is_dir(), "{what} {} does not exist or is not a directory", path.display());
    Ok(())
}

fn output_file(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure!(parent.is_dir(), "output directory {} does not exist", parent.display());
    }
    ensure!(!path.is_dir(), "output {} is a directory", path.display());
    Ok(())
}

fn scorer_inputs(choices: &[Option<&ScorerChoice>]) -> Result<()> {
    for path in choices.iter().flatten().filter_map(|s| s.model_path()) {
        input_file(path, "model file")?;
    }
    Ok(())
}

fn metric(name: MetricName, k: usize) -> Metric {
    match name {
        MetricName::Mrr10 => Metric::Mrr10,
        MetricName::Map => Metric::Map,
        MetricName::Recall => Metric::Recall(k),
    }
}

fn bm25_override(base: Bm25Params, saturation: Option<f64>, length_norm: Option<f64>) -> Result<Bm25Params> {
    Ok(Bm25Params::new(
        saturation.unwrap_or(base.saturation),
        length_norm.unwrap_or(base.length_norm),
    )?)
}

fn build(a: &BuildArgs) -> Result<()> {
    input_file(&a.collection, "collection")?;
    if let Some(sw) = &a.stopwords {
        input_file(sw, "stopword list")?;
    }
    let params = Bm25Params::new(a.k1_sat, a.b)?;
    let stopwords = match &a.stopwords {
        Some(p) => read_word_list(p)?,
        None => Vec::new(),
    };
    let store = ingest_collection(&a.collection)?;
    eprintln!("read {} documents from {}", store.len(), a.collection.display());
    let tokenizer = Tokenizer::new(TokenizerConfig { stem: a.stem, stopwords });
    let index = InvertedIndex::build(&store, tokenizer, params)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    save_index(&a.out, &index, &store)?;
    eprintln!(
        "indexed {} documents, {} terms, avg length {:.2} -> {}",
        index.doc_count(),
        index.terms().count(),
        index.avg_doc_length(),
        a.out.display()
    );
    Ok(())
}

fn load_qrels(path: Option<&Path>) -> Result<Option<Qrels>> {
    path.map(|p| ingest_qrels(p).with_context(|| format!("reading qrels {}", p.display())))
        .transpose()
}

fn search(a: &SearchArgs, seed: u64) -> Result<()> {
    input_dir(&a.index, "index")?;
    input_file(&a.queries, "queries")?;
    if let Some(q) = &a.qrels {
        input_file(q, "qrels")?;
    }
    output_file(&a.run_out)?;
    for p in [&a.ledger_out, &a.dump_pairs].into_iter().flatten() {
        output_file(p)?;
    }
    scorer_inputs(&[Some(&a.mono), a.duo.as_ref()])?;
    if a.k1 > 0 && a.duo.is_none() {
        bail!("--k1 {} needs a pairwise scorer (--duo)", a.k1);
    }
    let m = match (a.agg, a.sample_m) {
        (AggName::Sample, Some(m)) => m,
        (AggName::Sample, None) => bail!("--agg sample needs --sample-m"),
        (_, _) => 0,
    };
    let budget = StageBudget::new(a.k0, a.k1, a.agg.method(m, seed))?;

    let (store, index) = load_index(&a.index).with_context(|| format!("loading index {}", a.index.display()))?;
    let index = Arc::new(index);
    let bm25 = bm25_override(index.params(), a.k1_sat, a.b)?;
    let queries = ingest_queries(&a.queries)?;
    let qrels = load_qrels(a.qrels.as_deref())?;
    let mono = scorers::mono(&a.mono, &index, qrels.as_ref(), &a.remote)?;
    let duo = match (&a.duo, a.k1) {
        (Some(choice), k1) if k1 > 0 => Some(scorers::duo(choice, &index, qrels.as_ref(), &a.remote)?),
        _ => None,
    };
    let mut pipeline = Pipeline::new(&store, &index, mono.as_ref()).with_bm25(bm25);
    if let Some(d) = &duo {
        pipeline = pipeline.with_duo(d.as_ref());
    }
    eprintln!("searching {} queries (k0={}, k1={}, agg={})", queries.len(), a.k0, a.k1, budget.aggregation);

    let results = pipeline.run_all(&queries, &budget);
    let mut run = RunFile::new(&a.tag);
    let mut ledger_csv = format!("{}\n", CostLedger::CSV_HEADER);
    let mut pairs_csv = String::from("query_id,i_doc,j_doc,p\n");
    let mut total = CostLedger::default();
    for (q, res) in queries.iter().zip(results) {
        let res = res?;
        run.push_list(res.final_list());
        writeln!(ledger_csv, "{}", res.ledger.csv_row(&q.query_id))?;
        total.mono_inferences += res.ledger.mono_inferences;
        total.duo_inferences += res.ledger.duo_inferences;
        total.total += res.ledger.total;
        if let Some(matrix) = &res.pairs {
            let ids: Vec<&str> = res.r1.doc_ids().collect();
            for (i, j, p) in matrix.cells() {
                writeln!(pairs_csv, "{},{},{},{p:.6}", q.query_id, ids[i], ids[j])?;
            }
        }
    }
    run.write(&a.run_out)?;
    if let Some(p) = &a.ledger_out {
        std::fs::write(p, ledger_csv).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.dump_pairs {
        std::fs::write(p, pairs_csv).with_context(|| format!("writing {}", p.display()))?;
    }
    let n = queries.len().max(1) as f64;
    eprintln!(
        "wrote {} ({} queries); inferences per query: mono {:.1}, duo {:.1}, total {:.1}",
        a.run_out.display(),
        queries.len(),
        total.mono_inferences as f64 / n,
        total.duo_inferences as f64 / n,
        total.total as f64 / n
    );
    Ok(())
}

/// Reads `query_id<TAB>doc_id<TAB>label` rows; commas also separate fields.
fn read_labels(path: &Path) -> Result<Vec<(String, String, u8)>> {
    let content = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains('\t') {
            line.split('\t').collect()
        } else {
            line.split(',').collect()
        };
        let fields: Vec<&str> = fields.iter().map(|f| f.trim()).collect();
        ensure!(fields.len() == 3, "{}:{}: expected query_id, doc_id, label", path.display(), i + 1);
        let label = match fields[2] {
            "0" => 0,
            "1" => 1,
            other => bail!("{}:{}: label must be 0 or 1, got {other:?}", path.display(), i + 1),
        };
        rows.push((fields[0].to_string(), fields[1].to_string(), label));
    }
    Ok(rows)
}

fn train(a: &TrainArgs, seed: u64) -> Result<()> {
    input_file(&a.pairs, "labels")?;
    input_file(&a.collection, "collection")?;
    input_file(&a.queries, "queries")?;
    output_file(&a.out)?;

    let store = ingest_collection(&a.collection)?;
    let index = InvertedIndex::build(&store, Tokenizer::default(), Bm25Params::default())?;
    let queries: HashMap<String, String> = ingest_queries(&a.queries)?
        .into_iter()
        .map(|q| (q.query_id, q.text))
        .collect();
    let mut data = Vec::new();
    for (n, (qid, did, label)) in read_labels(&a.pairs)?.into_iter().enumerate() {
        let query = queries
            .get(&qid)
            .with_context(|| format!("{}: row {}: unknown query {qid}", a.pairs.display(), n + 1))?;
        let doc = store
            .get(&did)
            .with_context(|| format!("{}: row {}: unknown document {did}", a.pairs.display(), n + 1))?;
        data.push(LabeledExample {
            query_id: qid,
            query: query.clone(),
            doc: doc.text.clone(),
            label,
        });
    }
    let cfg = TrainConfig {
        lr: a.lr,
        iterations: a.iters,
        batch_size: a.batch_size,
        seed,
    };
    match a.kind {
        ModelKind::Mono => {
            let model = train_toy_pointwise(&ToyPointwiseModel::default(), &index, &data, &cfg)?;
            let raw: Vec<_> = data.iter().map(|e| model.features(&index, &e.query, &e.doc)).collect();
            let labels: Vec<u8> = data.iter().map(|e| e.label).collect();
            let correct = raw
                .iter()
                .zip(&labels)
                .filter(|(x, &y)| (model.score_features(x) > 0.5) == (y == 1))
                .count();
            eprintln!(
                "trained pointwise model on {} examples: loss {:.4}, accuracy {:.3}",
                data.len(),
                model.loss_on(&raw, &labels),
                correct as f64 / data.len() as f64
            );
            model.save(&a.out)?;
        }
        ModelKind::Duo => {
            let pairs = pairwise_examples(&data);
            ensure!(!pairs.is_empty(), "no query has both a relevant and a non-relevant document");
            let model = train_toy_pairwise(&ToyPairwiseModel::default(), &index, &pairs, &cfg)?;
            let correct = pairs
                .iter()
                .filter(|e| {
                    let p = model.prob(
                        &model.features(&index, &e.query, &e.doc_i),
                        &model.features(&index, &e.query, &e.doc_j),
                    );
                    (p > 0.5) == (e.label == 1)
                })
                .count();
            eprintln!(
                "trained pairwise model on {} ordered pairs: accuracy {:.3}",
                pairs.len(),
                correct as f64 / pairs.len() as f64
            );
            model.save(&a.out)?;
        }
    }
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    input_file(&a.run, "run")?;
    input_file(&a.qrels, "qrels")?;
    let run = RunFile::read(&a.run)?;
    let qrels = ingest_qrels(&a.qrels)?;
    if a.report {
        let rep = report(&run, &qrels, &[a.k]);
        println!("mrr@10\t{:.2}", rep.mrr_at_10 * 100.0);
        println!("map\t{:.2}", rep.map * 100.0);
        for (k, v) in &rep.recall {
            println!("recall@{k}\t{:.2}", v * 100.0);
        }
        println!("queries\t{}", rep.per_query.len());
        if !rep.skipped.is_empty() {
            eprintln!("skipped {} run queries without relevant judgments", rep.skipped.len());
        }
        return Ok(());
    }
    let scores = compute(metric(a.metric, a.k), &run, &qrels);
    if !scores.skipped.is_empty() {
        eprintln!("skipped {} run queries without relevant judgments", scores.skipped.len());
    }
    println!("{:.6}", scores.mean);
    Ok(())
}

fn run_sweep(a: &SweepArgs, seed: u64) -> Result<()> {
    input_dir(&a.index, "index")?;
    input_file(&a.queries, "queries")?;
    input_file(&a.qrels, "qrels")?;
    output_file(&a.csv_out)?;
    scorer_inputs(&[Some(&a.mono), a.duo.as_ref()])?;
    let cost: CostAxis = a.cost.parse()?;
    let grid = SweepGrid {
        k0: a.k0.clone(),
        k1: a.k1.clone(),
        methods: a.methods.iter().map(|m| m.method(1, seed)).collect(),
        m: a.m.clone(),
        trials: a.trials,
        seed,
        metric: metric(a.metric, a.k),
        cost,
    };
    if grid.k1.iter().any(|&k| k > 0) && a.duo.is_none() {
        bail!("the k1 grid has non-zero values; pass --duo");
    }

    let (store, index) = load_index(&a.index).with_context(|| format!("loading index {}", a.index.display()))?;
    let index = Arc::new(index);
    let queries = ingest_queries(&a.queries)?;
    let qrels = ingest_qrels(&a.qrels)?;
    let mono = scorers::mono(&a.mono, &index, Some(&qrels), &a.remote)?;
    let duo = a
        .duo
        .as_ref()
        .map(|choice| scorers::duo(choice, &index, Some(&qrels), &a.remote))
        .transpose()?;
    let ctx = SweepContext {
        store: &store,
        index: &index,
        bm25: index.params(),
        queries: &queries,
        qrels: &qrels,
        mono: mono.as_ref(),
        duo: duo.as_deref(),
    };
    eprintln!("sweeping {} queries", queries.len());
    let out = sweep(&ctx, &grid)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    std::fs::write(&a.csv_out, to_csv(&out.points)).with_context(|| format!("writing {}", a.csv_out.display()))?;
    eprintln!("wrote {} grid points to {}", out.points.len(), a.csv_out.display());
    Ok(())
}
