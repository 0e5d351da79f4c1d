//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. Run with `cargo test --test acceptance`.

use std::time::{Duration, Instant};

use hybriddetect::blockstats::{block_report, run_lengths};
use hybriddetect::bundle::{ModelBundle, TrainParams};
use hybriddetect::corpus::{self, Article, Domain, Label, LabeledDataset, Sentence};
use hybriddetect::experiment::{read_results_csv, run_experiment, ExperimentConfig, ResultsTable, Variant};
use hybriddetect::features::{extract_ngrams, TfidfModel, TfidfParams, TokenSequence};
use hybriddetect::llmclient::{DeterministicLocal, Identity, ParaphraseConfig};
use hybriddetect::metrics::{cohen_kappa, weighted_f1, ConfusionMatrix};
use hybriddetect::nb::NbModel;
use hybriddetect::robustness::paraphrase_attack;
use hybriddetect::synthetic::{self, SyntheticConfig};
use hybriddetect::SparseVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> std::result::Result<(), String> {
    ensure(elapsed < budget, || format!("took {elapsed:.2?}, budget {budget:?}"))
}

fn metric_oracles() -> Check {
    let start = Instant::now();
    let m = ConfusionMatrix::from_counts([[40, 10], [5, 45]]).map_err(|e| e.to_string())?;
    let kappa = cohen_kappa(&m);
    ensure((kappa - 0.70).abs() <= 1e-12, || format!("kappa {kappa}"))?;
    // by hand: F1_h = 80/95, F1_m = 90/105, weights 50/100 each
    let f1 = weighted_f1(&m);
    let oracle = 0.5 * (80.0 / 95.0) + 0.5 * (90.0 / 105.0);
    ensure((f1 - oracle).abs() <= 1e-12, || format!("F1 {f1} vs oracle {oracle}"))?;
    ensure((f1 - 0.849624).abs() <= 1e-6, || format!("F1 {f1}"))?;
    for counts in [[[7, 0], [0, 3]], [[1, 0], [0, 1]], [[500, 0], [0, 2]], [[4, 0], [0, 0]]] {
        let m = ConfusionMatrix::from_counts(counts).map_err(|e| e.to_string())?;
        ensure(cohen_kappa(&m) == 1.0 && weighted_f1(&m) == 1.0, || {
            format!("perfect {counts:?}: kappa {} F1 {}", cohen_kappa(&m), weighted_f1(&m))
        })?;
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(1))?;
    Ok(format!("kappa 0.70, F1 {f1:.6}, perfect matrices 1/1 ({elapsed:.2?})"))
}

/// Dense, probability-space reimplementation of multinomial NB.
fn naive_nb(x: &[Vec<f64>], y: &[usize], v: usize, alpha: f64) -> ([f64; 2], [Vec<f64>; 2]) {
    let mut prior = [0.0; 2];
    let mut theta = [vec![0.0; v], vec![0.0; v]];
    for c in 0..2 {
        let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
        prior[c] = rows.len() as f64 / x.len() as f64;
        let mut total = 0.0;
        for r in &rows {
            for k in 0..v {
                total += r[k];
            }
        }
        for k in 0..v {
            let mut count = 0.0;
            for r in &rows {
                count += r[k];
            }
            theta[c][k] = (alpha + count) / (alpha * v as f64 + total);
        }
    }
    (prior, theta)
}

fn naive_log_posterior(prior: &[f64; 2], theta: &[Vec<f64>; 2], x: &[f64]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for c in 0..2 {
        let mut s = prior[c].ln();
        for (k, &w) in x.iter().enumerate() {
            s += w * theta[c][k].ln();
        }
        out[c] = s;
    }
    out
}

fn random_dense(rng: &mut ChaCha8Rng, v: usize) -> Vec<f64> {
    (0..v)
        .map(|_| if rng.gen_bool(0.4) { rng.gen_range(0.0..3.0) } else { 0.0 })
        .collect()
}

fn sparse(x: &[f64]) -> SparseVector {
    SparseVector::from_entries(x.iter().copied().enumerate())
}

fn nb_brute_force() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for instance in 0..500 {
        let v = rng.gen_range(1..=30);
        let n = rng.gen_range(2..=8);
        let alpha = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.01..2.0) };
        let x: Vec<Vec<f64>> = (0..n).map(|_| random_dense(&mut rng, v)).collect();
        let mut y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        y[0] = 0;
        y[1] = 1;
        let labels: Vec<Label> = y.iter().map(|&c| Label::ALL[c]).collect();
        let vectors: Vec<SparseVector> = x.iter().map(|r| sparse(r)).collect();
        let model = NbModel::fit(&vectors, &labels, v, alpha).map_err(|e| format!("instance {instance}: {e}"))?;
        let (prior, theta) = naive_nb(&x, &y, v, alpha);
        for c in 0..2 {
            worst = worst.max((model.class_log_prior()[c] - prior[c].ln()).abs());
            let fitted = model.feature_log_likelihood(Label::ALL[c]);
            for k in 0..v {
                worst = worst.max((fitted[k] - theta[c][k].ln()).abs());
            }
        }
        for _ in 0..4 {
            let probe = random_dense(&mut rng, v);
            let got = model.log_posterior(&sparse(&probe)).map_err(|e| e.to_string())?;
            let want = naive_log_posterior(&prior, &theta, &probe);
            for c in 0..2 {
                worst = worst.max((got[c] - want[c]).abs());
            }
        }
        ensure(worst <= 1e-10, || format!("instance {instance}: max log-space error {worst:e}"))?;
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(10))?;
    Ok(format!("500 instances, max log-space error {worst:.1e} ({elapsed:.2?})"))
}

fn tfidf_hand_checks() -> Check {
    let start = Instant::now();
    let toy = ["Alpha beta.", "Alpha gamma.", "Alpha delta."];
    let model = TfidfModel::fit(toy, TfidfParams { n_max: 1, min_df: 1 }).map_err(|e| e.to_string())?;
    let df1 = model.idf_of("beta").ok_or("beta missing")?;
    let df_n = model.idf_of("alpha").ok_or("alpha missing")?;
    ensure((df1 - (2f64.ln() + 1.0)).abs() <= 1e-12, || format!("idf(df=1) = {df1}"))?;
    ensure((df_n - 1.0).abs() <= 1e-12, || format!("idf(df=N) = {df_n}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let words = ["a", "b", "c", "d", "e", "f"];
    let mut docs = Vec::new();
    for case in 0..1000 {
        let len = rng.gen_range(0..=20);
        let tokens: TokenSequence = (0..len).map(|_| words[rng.gen_range(0..words.len())].to_string()).collect();
        let n_max = rng.gen_range(1..=5);
        let grams = extract_ngrams(&tokens, n_max).map_err(|e| e.to_string())?;
        let expected: usize = (1..=n_max.min(len)).map(|n| len - n + 1).sum();
        ensure(grams.len() == expected, || {
            format!("case {case}: L={len} n_max={n_max}: {} n-grams, expected {expected}", grams.len())
        })?;
        docs.push(tokens.tokens().join(" "));
    }
    let model = TfidfModel::fit(docs.iter().map(String::as_str), TfidfParams::default()).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for doc in &docs {
        let v = model.transform(doc);
        if !v.is_empty() {
            ensure((v.norm() - 1.0).abs() <= 1e-9, || format!("norm {} for {doc:?}", v.norm()))?;
            checked += 1;
        }
    }
    Ok(format!(
        "idf ln2+1 and 1.0, {checked} unit-norm vectors, 1000 n-gram counts ({:.2?})",
        start.elapsed()
    ))
}

fn synthetic_protocol() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("synthetic.jsonl");
    let corpus = synthetic::generate(&SyntheticConfig::default()).map_err(|e| e.to_string())?;
    corpus::save_dataset(&corpus, &path).map_err(|e| e.to_string())?;
    ensure(corpus.count_domain(Domain::News) == 200 && corpus.count_domain(Domain::Academic) == 800, || {
        "unexpected corpus shape".into()
    })?;

    let run = |workers: usize| -> std::result::Result<(ResultsTable, String, Vec<u8>), String> {
        let mut config = ExperimentConfig::new(&path);
        config.runs = 20;
        config.workers = Some(workers);
        let table = run_experiment(&config).map_err(|e| e.to_string())?;
        let mut csv = Vec::new();
        table.write_csv(&mut csv).map_err(|e| e.to_string())?;
        Ok((table.clone(), table.to_json().map_err(|e| e.to_string())?, csv))
    };
    let (table, json_a, csv_a) = run(1)?;
    let (_, json_b, csv_b) = run(3)?;
    ensure(json_a == json_b && csv_a == csv_b, || "repeated runs differ".into())?;
    ensure(table.variants.len() == 3, || "expected 3 variant rows".into())?;
    for v in &table.variants {
        ensure(v.runs.len() == 20 && v.failures.is_empty(), || {
            format!("{}: {} runs, {} failures", v.variant, v.runs.len(), v.failures.len())
        })?;
    }
    let kappa = |variant| -> std::result::Result<f64, String> {
        table
            .variant(variant)
            .and_then(|v| v.aggregate.as_ref())
            .map(|a| a.kappa.mean)
            .ok_or_else(|| format!("{variant} missing"))
    };
    let (news, under, all) = (kappa(Variant::NewsOnly)?, kappa(Variant::UnderSample)?, kappa(Variant::AllData)?);
    ensure(news >= 0.9, || format!("NewsOnly kappa {news:.4} < 0.9"))?;
    ensure(news >= under && under >= all, || {
        format!("ordering violated: news {news:.4}, under-sample {under:.4}, all {all:.4}")
    })?;
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(300))?;
    Ok(format!(
        "bit-identical K=20 tables; kappa news {news:.3} >= under-sample {under:.3} >= all {all:.3} ({elapsed:.2?})"
    ))
}

fn robustness_fixed_point() -> Check {
    let start = Instant::now();
    let corpus = synthetic::generate(&SyntheticConfig {
        news_articles: 60,
        academic_articles: 0,
        ..SyntheticConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let (train, validation) = corpus::split_articles(&corpus, 0.8, 5).map_err(|e| e.to_string())?;
    let bundle = ModelBundle::train(train.sentences(), TrainParams::default()).map_err(|e| e.to_string())?;
    let config = ParaphraseConfig::default();
    let err = |e: hybriddetect::Error| e.to_string();

    let identity = paraphrase_attack(&validation, &bundle.tfidf, &bundle.nb, &Identity, &config).map_err(err)?;
    for a in &identity.attacked {
        ensure(a.metrics == identity.baseline, || format!("identity changed metrics at {} passes", a.passes))?;
    }
    let local = DeterministicLocal::new(42);
    let one = paraphrase_attack(&validation, &bundle.tfidf, &bundle.nb, &local, &config).map_err(err)?;
    let two = paraphrase_attack(&validation, &bundle.tfidf, &bundle.nb, &local, &config).map_err(err)?;
    ensure(one.to_json().map_err(err)? == two.to_json().map_err(err)?, || {
        "local reports differ".into()
    })?;
    let changed = one
        .records
        .iter()
        .filter(|r| r.rewrites.iter().flatten().any(|t| *t != r.original))
        .count();
    ensure(changed > 0, || "local paraphraser rewrote nothing".into())?;
    let source: Vec<&Sentence> = validation.sentences().collect();
    for report in [&identity, &one] {
        for (record, s) in report.records.iter().zip(&source) {
            if s.label == Label::Human {
                ensure(record.original.as_bytes() == s.text.as_bytes(), || "human text altered".into())?;
                ensure(record.rewrites.iter().all(Option::is_none), || "human sentence rewritten".into())?;
                ensure(record.predictions_after.iter().all(|&p| p == record.prediction_before), || {
                    "human prediction changed".into()
                })?;
            }
        }
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(60))?;
    Ok(format!(
        "identity exact, local byte-identical ({changed} machine sentences rewritten), humans untouched ({elapsed:.2?})"
    ))
}

fn article(id: usize, labels: &[Label]) -> Article {
    Article {
        id: format!("a{id}"),
        domain: Domain::News,
        sentences: labels.iter().map(|&l| Sentence::new(format!("sentence {id}"), l)).collect(),
    }
}

fn block_statistics() -> Check {
    use Label::{Human as H, Machine as M};
    let start = Instant::now();
    let runs = run_lengths(&[H, H, M, M, M, H]).map_err(|e| e.to_string())?;
    ensure(runs == [2, 3, 1], || format!("runs {runs:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let iid: Vec<Article> = (0..200)
        .map(|i| {
            let labels: Vec<Label> = (0..10).map(|_| if rng.gen_bool(0.5) { M } else { H }).collect();
            article(i, &labels)
        })
        .collect();
    let iid = LabeledDataset::new(iid).map_err(|e| e.to_string())?;
    let null = block_report(&iid, 1000, 3).map_err(|e| e.to_string())?;
    // |ratio - 1| within 3 baseline std, expressed in run-length units
    let deviation = (null.observed_mean_run_length - null.baseline_mean).abs();
    ensure(deviation <= 3.0 * null.baseline_std, || {
        format!(
            "null ratio {:.4}: observed {:.4}, baseline {:.4} ± {:.4}",
            null.ratio, null.observed_mean_run_length, null.baseline_mean, null.baseline_std
        )
    })?;

    let single: Vec<Article> = (0..50)
        .map(|i| {
            let k = 1 + i % 8;
            let labels: Vec<Label> = (0..10).map(|j| if (2..2 + k).contains(&j) { M } else { H }).collect();
            article(i, &labels)
        })
        .collect();
    let single = LabeledDataset::new(single).map_err(|e| e.to_string())?;
    let blocky = block_report(&single, 1000, 3).map_err(|e| e.to_string())?;
    ensure(blocky.ratio >= 1.0, || format!("single-block ratio {:.4}", blocky.ratio))?;
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "runs [2,3,1]; null ratio {:.4} (z {:.2}); single-block ratio {:.4} ({elapsed:.2?})",
        null.ratio,
        null.z_score.unwrap_or(0.0),
        blocky.ratio
    ))
}

fn serialization_round_trips() -> Check {
    let err = |e: hybriddetect::Error| e.to_string();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = synthetic::generate(&SyntheticConfig {
        news_articles: 30,
        academic_articles: 30,
        ..SyntheticConfig::default()
    })
    .map_err(err)?;
    let data_path = dir.path().join("data.jsonl");
    corpus::save_dataset(&data, &data_path).map_err(err)?;
    ensure(corpus::load_dataset(&data_path).map_err(err)? == data, || "dataset differs".into())?;

    let bundle = ModelBundle::train(data.sentences(), TrainParams::default()).map_err(err)?;
    let bundle_path = dir.path().join("model.json");
    bundle.save(&bundle_path).map_err(err)?;
    let reloaded = ModelBundle::load(&bundle_path).map_err(err)?;
    ensure(reloaded == bundle, || "bundle differs".into())?;
    for s in data.sentences().take(50) {
        ensure(
            reloaded.nb.log_posterior(&reloaded.vectorize(&s.text)).map_err(err)?
                == bundle.nb.log_posterior(&bundle.vectorize(&s.text)).map_err(err)?,
            || "posterior differs after reload".into(),
        )?;
    }

    let mut config = ExperimentConfig::new(&data_path);
    config.runs = 3;
    config.output_dir = Some(dir.path().join("out"));
    let table = run_experiment(&config).map_err(err)?;
    table.write_to(dir.path().join("out")).map_err(err)?;
    let json = ResultsTable::load(dir.path().join("out/results.json")).map_err(err)?;
    ensure(json == table, || "results.json differs".into())?;
    let csv = std::fs::File::open(dir.path().join("out/results.csv")).map_err(|e| e.to_string())?;
    let rows = read_results_csv(csv).map_err(err)?;
    ensure(rows == table.csv_rows(), || "results.csv differs".into())?;
    Ok("dataset, model bundle, results.json and results.csv reload identically".into())
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("metric oracles", metric_oracles),
        ("naive bayes brute-force equivalence", nb_brute_force),
        ("tf-idf hand checks", tfidf_hand_checks),
        ("synthetic protocol determinism and ordering", synthetic_protocol),
        ("robustness fixed point", robustness_fixed_point),
        ("block statistics", block_statistics),
        ("serialization round-trips", serialization_round_trips),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
