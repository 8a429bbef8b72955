//! Acceptance criteria. Every check prints one PASS or FAIL line with the
//! measured value and the pinned tolerance, then asserts.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use promptfill::constraint::{build_trie, collect_candidates, CandidateSet, Provenance, Schema};
use promptfill::decode::{
    decode_slot, decode_value, moc, rescale, roc, select_by_uncertainty, EnsembleConfig,
    UncertaintyMode, ZeroShot,
};
use promptfill::eval::{
    evaluate, exact_match, load_dataset, make_compositional_split, normalize_sql, run_ablations,
    Example, Split,
};
use promptfill::grammar::{
    clause_from_canonical, compose, fill_slot, ClauseId, Scheme, SchemeDef, NONE_VALUE,
};
use promptfill::lm::{
    detokenize, train_ngram, Distribution, LanguageModel, NgramModel, Smoothing, TokenId,
    Vocabulary,
};
use promptfill::pipeline::{
    grid_search_gamma, read_corpus, ModelBundle, Models, PipelineConfig, TrainOptions,
};
use promptfill::synth::held_out_families;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: &str, ok: bool, detail: impl AsRef<str>) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("{tag} criterion {criterion}: {}", detail.as_ref());
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize, zero_share: f64) -> Distribution {
    let w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(zero_share) {
                0.0
            } else {
                rng.gen::<f64>()
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        return Distribution::uniform(n);
    }
    Distribution::normalized(w).unwrap()
}

#[test]
fn c1_rescaling_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut worst_sum, mut worst_direct) = (0.0f64, 0.0f64);
    let mut off_support = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(2..300);
        let dist = random_dist(&mut rng, n, 0.2);
        let k = rng.gen_range(1..=n);
        let mut ids: Vec<u32> = (0..n as u32).collect();
        ids.shuffle(&mut rng);
        let allowed: BTreeSet<TokenId> = ids[..k].iter().map(|&i| TokenId(i)).collect();
        let (out, fallback) = rescale(&dist, &allowed).unwrap();
        worst_sum = worst_sum.max((out.total() - 1.0).abs());
        let mass: f64 = allowed.iter().map(|&t| dist.prob(t)).sum();
        for i in 0..n {
            let t = TokenId(i as u32);
            let p = out.prob(t);
            if allowed.contains(&t) {
                let direct = if fallback {
                    1.0 / k as f64
                } else {
                    dist.prob(t) / mass
                };
                worst_direct = worst_direct.max((p - direct).abs());
            } else if p != 0.0 {
                off_support += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok_sum = worst_sum <= 1e-9;
    let ok_direct = worst_direct <= 1e-12;
    let ok_time = elapsed < Duration::from_secs(5);
    report(
        "1 sum",
        ok_sum,
        format!("1000 pairs, max |sum - 1| = {worst_sum:.2e} (tol 1e-9)"),
    );
    report(
        "1 support",
        off_support == 0,
        format!("{off_support} nonzero entries outside the allowed set"),
    );
    report(
        "1 direct",
        ok_direct,
        format!("max deviation from p/sum = {worst_direct:.2e} (tol 1e-12)"),
    );
    report("1 time", ok_time, format!("{elapsed:?} (limit 5 s)"));
    assert!(ok_sum && off_support == 0 && ok_direct && ok_time);
}

fn word_vocab(n: usize) -> Vocabulary {
    let mut v = Vocabulary::new();
    for i in 0..n {
        v.insert(&format!("w{i}"));
    }
    v
}

fn random_phrase(rng: &mut ChaCha8Rng, words: usize, max_len: usize) -> String {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| format!("w{}", rng.gen_range(0..words)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Allowed tokens by scanning every candidate: next tokens of candidates
/// extending `prefix`, plus end-of-value for an exact match.
fn naive_allowed(cands: &[Vec<TokenId>], prefix: &[TokenId], eov: TokenId) -> BTreeSet<TokenId> {
    let mut out = BTreeSet::new();
    for c in cands {
        if c.len() >= prefix.len() && &c[..prefix.len()] == prefix {
            out.insert(c.get(prefix.len()).copied().unwrap_or(eov));
        }
    }
    out
}

fn candidate_set(values: &[String]) -> CandidateSet {
    let mut set = CandidateSet::new(ClauseId::from("slot"));
    for v in values {
        set.insert(v.clone(), Provenance::Utterance);
    }
    set
}

#[test]
fn c2_trie_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vocab = word_vocab(12);
    let start = Instant::now();
    let (mut prefixes, mut mismatches) = (0usize, 0usize);
    for _ in 0..200 {
        let n = rng.gen_range(1..=100);
        let values: Vec<String> = (0..n).map(|_| random_phrase(&mut rng, 12, 6)).collect();
        let trie = build_trie(&candidate_set(&values), &vocab).unwrap();
        let toks: Vec<Vec<TokenId>> = values.iter().map(|v| vocab.tokenize(v)).collect();
        let reachable: BTreeSet<Vec<TokenId>> = toks
            .iter()
            .flat_map(|c| (0..=c.len()).map(move |k| c[..k].to_vec()))
            .collect();
        for p in &reachable {
            prefixes += 1;
            if trie.allowed_tokens(p) != naive_allowed(&toks, p, vocab.eov()) {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches == 0;
    let ok_time = elapsed < Duration::from_secs(10);
    report(
        "2 oracle",
        ok,
        format!("200 sets, {prefixes} reachable prefixes, {mismatches} mismatches"),
    );
    report("2 time", ok_time, format!("{elapsed:?} (limit 10 s)"));
    assert!(ok && ok_time);
}

fn random_models(
    rng: &mut ChaCha8Rng,
    vocab: &Vocabulary,
    words: usize,
) -> (NgramModel, NgramModel) {
    let id = |w: usize| vocab.id(&format!("w{w}")).unwrap();
    let few_corpus: Vec<Vec<TokenId>> = (0..300)
        .map(|_| {
            let mut s = vec![vocab.bos()];
            s.extend((0..rng.gen_range(2..8)).map(|_| id(rng.gen_range(0..words))));
            s.push(vocab.eov());
            s
        })
        .collect();
    let zero_corpus: Vec<Vec<TokenId>> = (0..300)
        .map(|_| {
            let mut s = vec![vocab.bos()];
            s.extend((0..rng.gen_range(2..10)).map(|_| id(rng.gen_range(0..words))));
            s.push(vocab.eos());
            s
        })
        .collect();
    let n = vocab.len();
    (
        train_ngram(&few_corpus, n, 3, Smoothing::default_for(3)).unwrap(),
        train_ngram(&zero_corpus, n, 3, Smoothing::default_for(3)).unwrap(),
    )
}

fn greedy_few(
    few: &dyn LanguageModel,
    ctx: &[TokenId],
    eov: TokenId,
    max_len: usize,
) -> Vec<TokenId> {
    let mut input = ctx.to_vec();
    let mut out = Vec::new();
    for _ in 0..max_len {
        let t = few.next_token_dist(&input).unwrap().argmax();
        if t == eov {
            break;
        }
        input.push(t);
        out.push(t);
    }
    out
}

fn greedy_zero_constrained(
    zero: &dyn LanguageModel,
    cands: &[Vec<TokenId>],
    ctx: &[TokenId],
    eov: TokenId,
    max_len: usize,
) -> Vec<TokenId> {
    let mut input = ctx.to_vec();
    let mut out: Vec<TokenId> = Vec::new();
    for _ in 0..max_len {
        let d = zero.next_token_dist(&input).unwrap();
        let allowed = naive_allowed(cands, &out, eov);
        // highest probability, lowest id on ties
        let mut best: Option<(TokenId, f64)> = None;
        for &t in &allowed {
            if best.is_none_or(|(_, p)| d.prob(t) > p) {
                best = Some((t, d.prob(t)));
            }
        }
        let t = best.unwrap().0;
        if t == eov {
            break;
        }
        input.push(t);
        out.push(t);
    }
    out
}

#[test]
fn c3_ensemble_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let words = 15;
    let vocab = word_vocab(words);
    let eov = vocab.eov();
    let (mut contexts, mut few_diff, mut zero_diff, mut invalid_steps, mut steps) = (0, 0, 0, 0, 0);
    for _ in 0..6 {
        let (few, zero) = random_models(&mut rng, &vocab, words);
        for _ in 0..10 {
            contexts += 1;
            let mut ctx = vec![vocab.bos()];
            ctx.extend(vocab.tokenize(&random_phrase(&mut rng, words, 5)));
            let n = rng.gen_range(1..=20);
            let values: Vec<String> = (0..n).map(|_| random_phrase(&mut rng, words, 4)).collect();
            let trie = build_trie(&candidate_set(&values), &vocab).unwrap();
            let toks: Vec<Vec<TokenId>> = values.iter().map(|v| vocab.tokenize(v)).collect();
            let z = Some(ZeroShot {
                model: &zero,
                trie: &trie,
            });
            let max_len = 12;
            let cfg = |gamma| EnsembleConfig {
                gamma,
                max_len,
                ..Default::default()
            };

            let at_one = decode_value(&few, z, eov, &ctx, &cfg(1.0)).unwrap();
            if at_one.tokens != greedy_few(&few, &ctx, eov, max_len) {
                few_diff += 1;
            }
            let at_zero = decode_value(&few, z, eov, &ctx, &cfg(0.0)).unwrap();
            if at_zero.tokens != greedy_zero_constrained(&zero, &toks, &ctx, eov, max_len) {
                zero_diff += 1;
            }
            for gamma in [0.1, 0.25, 0.5, 0.75, 0.9] {
                for s in decode_value(&few, z, eov, &ctx, &cfg(gamma)).unwrap().steps {
                    steps += 1;
                    let d = &s.ensembled;
                    if d.validate().is_err() || (d.total() - 1.0).abs() > 1e-9 {
                        invalid_steps += 1;
                    }
                }
            }
        }
    }
    let ok_contexts = contexts >= 50;
    report(
        "3 fixtures",
        ok_contexts,
        format!("{contexts} contexts (need >= 50)"),
    );
    report(
        "3 gamma=1",
        few_diff == 0,
        format!("{few_diff} contexts differ from few-shot greedy decoding"),
    );
    report(
        "3 gamma=0",
        zero_diff == 0,
        format!("{zero_diff} contexts differ from zero-shot constrained decoding"),
    );
    report(
        "3 mixtures",
        invalid_steps == 0,
        format!("{invalid_steps} of {steps} intermediate-gamma steps are not valid distributions (tol 1e-9)"),
    );
    assert!(ok_contexts && few_diff == 0 && zero_diff == 0 && invalid_steps == 0);
}

fn round_trip(def: &SchemeDef, values: &[(&str, Option<&str>)]) -> String {
    let clauses: Vec<_> = values
        .iter()
        .map(|(id, v)| {
            let spec = def.clause(&ClauseId::from(*id)).unwrap();
            let canonical = fill_slot(&spec.template(), v.unwrap_or(NONE_VALUE)).unwrap();
            clause_from_canonical(&canonical, spec).unwrap()
        })
        .collect();
    compose(&clauses, def.scheme).unwrap()
}

#[test]
fn c4_grammar_fidelity() {
    // Ground-truth rows of the case-study table; its typeset curly quotes
    // stand for ASCII double quotes.
    let cases: [(&str, SchemeDef, Vec<(&str, Option<&str>)>, &str); 3] = [
        (
            "4 geoquery utah",
            SchemeDef::geoquery(),
            vec![
                ("select", Some("state . population")),
                ("from", Some("state")),
                ("where", Some("state . state_name = \"utah\"")),
                ("group_by", None),
                ("order_by", None),
            ],
            "SELECT state . population FROM state WHERE state . state_name = \"utah\"",
        ),
        (
            "4 ecommerce petrol trimmer",
            SchemeDef::ecommerce(),
            vec![
                ("matching", Some("petrol trimmer")),
                ("condition", Some("Price > 100")),
            ],
            "SELECT * FROM ASINs WHERE Maching Algorithm(“petrol trimmer”) == True and Price > 100",
        ),
        (
            "4 ecommerce mi4 mobile phone",
            SchemeDef::ecommerce(),
            vec![
                ("matching", Some("mi4 mobile phone")),
                ("condition", Some("Size = 64 gb")),
            ],
            "SELECT * FROM ASINs WHERE Maching Algorithm(“mi4 mobile phone”) and Size = 64 gb",
        ),
    ];
    let mut all = true;
    for (name, def, values, truth) in cases {
        let truth = truth.replace(['“', '”'], "\"");
        let sql = round_trip(&def, &values);
        let ok = exact_match(&sql, &truth) && normalize_sql(&sql) == normalize_sql(&truth);
        all &= ok;
        report(
            name,
            ok,
            format!("composed `{sql}`, ground truth `{truth}`"),
        );
    }
    assert!(all, "a case-study ground truth did not round-trip");
}

#[test]
fn c5_moc_roc() {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let three = Distribution::new(vec![0.6, 0.3, 0.1]).unwrap();
    let ok_three = close(moc(&three).unwrap(), 0.7) && close(roc(&three).unwrap(), 0.5);
    report(
        "5 {0.6,0.3,0.1}",
        ok_three,
        format!(
            "MoC {} RoC {} (want 0.7, 0.5; tol 1e-12)",
            moc(&three).unwrap(),
            roc(&three).unwrap()
        ),
    );
    let mut ok_uniform = true;
    for k in 2..=20 {
        let u = Distribution::uniform(k);
        ok_uniform &= close(moc(&u).unwrap(), 1.0) && close(roc(&u).unwrap(), 1.0);
    }
    report(
        "5 uniform",
        ok_uniform,
        "uniform over k = 2..20 gives MoC = RoC = 1 (tol 1e-12)",
    );
    let sure = Distribution::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let ok_sure = moc(&sure).unwrap() == 0.0 && roc(&sure).unwrap() == 0.0;
    report("5 one-hot", ok_sure, "point mass gives MoC = RoC = 0");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tied_bad = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..30);
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let top = w[0];
        w[1] = top;
        w.iter_mut().skip(2).for_each(|x| *x = x.min(top) * 0.5);
        let d = Distribution::normalized(w).unwrap();
        if !(close(moc(&d).unwrap(), 1.0) && close(roc(&d).unwrap(), 1.0)) {
            tied_bad += 1;
        }
    }
    report(
        "5 p1 = p2",
        tied_bad == 0,
        format!("{tied_bad} of 100 tied distributions without MoC = RoC = 1"),
    );

    // For a fixed top probability p1, MoC = 1 - p1 + p2 and RoC = p2 / p1, so
    // the MoC threshold t maps monotonically to the RoC threshold (t - 1 + p1) / p1.
    let mut disagreements = 0;
    let mut decisions = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..40);
        let d = random_dist(&mut rng, n, 0.1);
        let (p1, _) = d.top_two();
        for _ in 0..10 {
            let t_moc: f64 = rng.gen();
            let t_roc = (t_moc - 1.0 + p1) / p1;
            let by_moc = select_by_uncertainty(&d, UncertaintyMode::Moc, t_moc, 0, 1).unwrap();
            let by_roc = select_by_uncertainty(&d, UncertaintyMode::Roc, t_roc, 0, 1).unwrap();
            decisions += 1;
            if by_moc != by_roc {
                disagreements += 1;
            }
        }
    }
    report(
        "5 agreement",
        disagreements == 0,
        format!(
            "{disagreements} of {decisions} threshold decisions differ on 100 random distributions"
        ),
    );
    assert!(ok_three && ok_uniform && ok_sure && tied_bad == 0 && disagreements == 0);
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ecommerce")
}

struct Trained {
    cfg: PipelineConfig,
    models: Models,
    dev: Vec<Example>,
    test: Vec<Example>,
}

/// Trains on the shipped ecommerce files exactly as the CLI does.
fn train_shipped() -> Trained {
    let dir = data_dir();
    let cfg = PipelineConfig::load(dir.join("config.json")).unwrap();
    let ds = load_dataset(dir.join("dataset.jsonl"), &cfg.scheme).unwrap();
    let corpus = read_corpus(dir.join("corpus.txt")).unwrap();
    let schema = Schema::load(dir.join("schema.json")).unwrap();
    let opts: TrainOptions =
        serde_json::from_str(&std::fs::read_to_string(dir.join("train_options.json")).unwrap())
            .unwrap();
    let utterances: Vec<String> = ds.examples.iter().map(|e| e.utterance.clone()).collect();
    let train = ds.split(Split::Train);
    let bundle = ModelBundle::train(&train, &utterances, &corpus, &cfg, schema, &opts).unwrap();
    Trained {
        models: bundle.to_models(),
        cfg,
        dev: ds.split(Split::Dev),
        test: ds.split(Split::Test),
    }
}

#[test]
fn c6_compositional_ood() {
    let start = Instant::now();
    let Trained {
        mut cfg,
        models,
        dev,
        test,
    } = train_shipped();
    let search = grid_search_gamma(&dev, &cfg, &models, 0.1).unwrap();
    search.apply(&mut cfg);
    let rows = run_ablations(&test, &cfg, &models).unwrap();
    let full = &rows.iter().find(|r| r.name == "full").unwrap().report;
    let no_zero = &rows.iter().find(|r| r.name == "no_zero").unwrap().report;
    let elapsed = start.elapsed();

    let families = held_out_families();
    let flipped: Vec<&str> = test
        .iter()
        .zip(&no_zero.outcomes)
        .filter(|(ex, o)| {
            families.iter().any(|f| f.matches(&ex.template))
                && o.gold.contains("Price >")
                && o.predicted.as_deref() == Some(o.gold.replace("Price >", "Price <").as_str())
        })
        .map(|(ex, _)| ex.utterance.as_str())
        .collect();

    let ok_gap = full.exact_match > no_zero.exact_match;
    let ok_flip = !flipped.is_empty();
    let ok_time = elapsed < Duration::from_secs(60);
    report(
        "6 gap",
        ok_gap,
        format!(
            "{} test examples, tuned gammas {:?}: exact match {:.4} with zero-shot vs {:.4} few-shot only (need strictly greater)",
            test.len(),
            search.gammas,
            full.exact_match,
            no_zero.exact_match
        ),
    );
    report(
        "6 flip",
        ok_flip,
        format!(
            "{} held-out examples where few-shot only turns `>` into `<`, e.g. {:?}",
            flipped.len(),
            flipped.first()
        ),
    );
    report("6 time", ok_time, format!("{elapsed:?} (limit 60 s)"));
    assert!(ok_gap && ok_flip && ok_time);
}

/// Whole-query decode of one utterance, assembled from the lower-level
/// pieces instead of the pipeline driver.
fn whole_query_sql(utterance: &str, cfg: &PipelineConfig, models: &Models) -> Option<String> {
    let def = SchemeDef::whole_query();
    let spec = &def.clauses[0];
    let vocab = &models.vocab;
    let training = models
        .training_values
        .get(&spec.id)
        .into_iter()
        .flatten()
        .map(String::as_str);
    let mut cands = collect_candidates(spec, &models.schema, utterance, training).ok()?;
    cands.retain_in_vocab(vocab);
    let trie = build_trie(&cands, vocab).ok()?;
    let mut ctx = vec![vocab.bos()];
    ctx.extend(vocab.tokenize(utterance));
    ctx.extend(vocab.tokenize(&spec.prompt));
    let few = models.few_for(&spec.id).ok()?;
    let zero = models
        .zero
        .as_deref()
        .map(|model| ZeroShot { model, trie: &trie });
    let slot = decode_slot(few, zero, vocab.eov(), &ctx, &cfg.ensemble_for(&spec.id)).ok()?;
    let tokens = &slot.value.tokens;
    let value = match trie.surface(tokens) {
        Some(s) => s.to_string(),
        None => detokenize(&vocab.decode_tokens(tokens)),
    };
    let canonical = fill_slot(&spec.template(), &value).ok()?;
    let clause = clause_from_canonical(&canonical, spec).ok()?;
    compose(&[clause], Scheme::WholeQuery).ok()
}

#[test]
fn c7_ablation_identities() {
    let Trained {
        cfg, models, test, ..
    } = train_shipped();
    let rows = run_ablations(&test, &cfg, &models).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
    let ok_rows = names == ["full", "no_seq", "no_zero"];
    report("7 rows", ok_rows, format!("rows {names:?}"));

    let mut gamma_one = cfg.clone();
    gamma_one.default_ensemble.gamma = 1.0;
    for spec in &cfg.scheme.clauses {
        gamma_one.set_gamma(&spec.id, 1.0);
    }
    let independent = evaluate(&test, &gamma_one, &models).unwrap();
    let no_zero = &rows[2].report;
    let same_clauses = independent
        .clauses
        .iter()
        .zip(&no_zero.clauses)
        .all(|(a, b)| a.cascading == b.cascading && a.marginal == b.marginal);
    let ok_zero = independent.exact_match == no_zero.exact_match
        && same_clauses
        && independent.outcomes == no_zero.outcomes;
    report(
        "7 no_zero",
        ok_zero,
        format!(
            "no_zero row {:.4}, separate gamma = 1 evaluation {:.4}",
            no_zero.exact_match, independent.exact_match
        ),
    );

    let whole = cfg.with_flags(true, false);
    let mut right = 0usize;
    let mut same_predictions = true;
    for (ex, o) in test.iter().zip(&rows[1].report.outcomes) {
        let sql = whole_query_sql(&ex.utterance, &whole, &models);
        same_predictions &= sql == o.predicted;
        right += usize::from(sql.as_deref().is_some_and(|s| exact_match(s, &ex.sql)));
    }
    let direct = right as f64 / test.len() as f64;
    let ok_seq = same_predictions && direct == rows[1].report.exact_match;
    report(
        "7 no_seq",
        ok_seq,
        format!(
            "no_seq row {:.4}, direct whole-query decoding {direct:.4}",
            rows[1].report.exact_match
        ),
    );
    assert!(ok_rows && ok_zero && ok_seq);
}

fn toy_example(template: usize, k: usize) -> Example {
    Example {
        utterance: format!("item {template} number {k}"),
        sql: format!(
            "SELECT * FROM ASINs WHERE Maching Algorithm(\"item\") == True and Price < {k}"
        ),
        clauses: BTreeMap::new(),
        template: format!("template {template}"),
        split: None,
    }
}

#[test]
fn c8_split_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut leaks = 0;
    let mut forced_in_train = 0;
    for run in 0..100 {
        let templates = rng.gen_range(10..60);
        let examples: Vec<Example> = (0..templates)
            .flat_map(|t| (0..rng.gen_range(1..6)).map(move |k| (t, k)))
            .map(|(t, k)| toy_example(t, k))
            .collect();
        let a = rng.gen_range(0.5..0.8);
        let b = (1.0 - a) / 2.0;
        let forced = if run % 2 == 0 {
            vec![promptfill::eval::TemplateFamily::new("sevens", "7")]
        } else {
            Vec::new()
        };
        let ds = make_compositional_split(examples, [a, b, 1.0 - a - b], run, &forced).unwrap();
        let mut seen: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
        for ex in &ds.examples {
            seen.entry(&ex.template)
                .or_default()
                .insert(ex.split.unwrap());
            if ex.split == Some(Split::Train) && forced.iter().any(|f| f.matches(&ex.template)) {
                forced_in_train += 1;
            }
        }
        leaks += seen.values().filter(|s| s.len() > 1).count();
        if ds.check_no_leakage().is_err() {
            leaks += 1;
        }
    }
    report(
        "8 leakage",
        leaks == 0,
        format!("100 random splits, {leaks} templates in more than one split"),
    );
    report(
        "8 held out",
        forced_in_train == 0,
        format!("{forced_in_train} held-out family examples in train"),
    );
    assert!(leaks == 0 && forced_in_train == 0);
}
