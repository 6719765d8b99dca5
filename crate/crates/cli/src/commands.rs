use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use spsn::inference::{classify_batch, evaluate_batch, missing_sweep, Mode};
use spsn::learn::{backward, fit, init_params_with, InitOptions, Objective, TrainConfig};
use spsn::oracle::{
    brute_force_mass, downscale, enumeration_size, finite_diff_grad, permutation_sweep,
    randomize_params, Region, MAX_TERMS,
};
use spsn::rng::{item_rng, stream_rng, Stream};
use spsn::sample::{sample_labeled, sample_with};
use spsn::{infer_schema, spsn_network, BuildConfig, Circuit, Schema};

use crate::io::{
    csv_writer, fmt_f64, output, parse_corpus, read_corpus, read_labels, read_model, write_text,
};
use crate::{Cmd, EvalArgs, ObjectiveArg, TrainArgs, ValidationFailed};

pub fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Schema { data, out } => schema(&data, out.as_deref()),
        Cmd::Build {
            schema,
            n_l,
            n_s,
            n_p,
            classes,
            k_cat,
            out,
        } => {
            let config = BuildConfig {
                n_c: classes,
                n_l,
                n_s,
                n_p,
                k_cat,
            };
            build(&schema, &config, &out)
        }
        Cmd::Train(args) => train(&args),
        Cmd::Eval(args) => eval(&args, Mode::Density),
        Cmd::Marginal(args) => eval(&args, Mode::Marginal),
        Cmd::Classify {
            model,
            data,
            labels,
            out,
        } => classify(&model, &data, labels.as_deref(), out.as_deref()),
        Cmd::Sample {
            model,
            n,
            seed,
            out,
            labels_out,
        } => sample(&model, n, seed, out.as_deref(), labels_out.as_deref()),
        Cmd::Validate { model, deep, seed } => validate(&model, deep, seed),
        Cmd::MissingSweep {
            model,
            data,
            labels,
            fractions,
            repeats,
            seed,
            out,
        } => sweep(&model, &data, &labels, &fractions, repeats, seed, out.as_deref()),
    }
}

fn schema(data: &Path, out: Option<&Path>) -> Result<()> {
    let corpus = read_corpus(data)?;
    let schema = infer_schema(&corpus.texts)?;
    let mut w = output(out)?;
    writeln!(w, "{}", schema.to_json())?;
    eprintln!(
        "{} documents, {} leaf and {} collection positions",
        corpus.texts.len(),
        schema.leaf_paths().len(),
        schema.collection_paths().len()
    );
    Ok(())
}

fn build(schema_path: &Path, config: &BuildConfig, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(schema_path)
        .with_context(|| format!("reading {}", schema_path.display()))?;
    let schema = Schema::from_json(&text).context("loading schema")?;
    let circuit = spsn_network(&schema, config)?;
    write_text(out, &circuit.to_json())?;
    let c = circuit.count_units();
    eprintln!(
        "{} sum, {} product, {} set, {} input units; {} parameters",
        c.n_sum, c.n_prod, c.n_set, c.n_input, c.n_params
    );
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let corpus = read_corpus(&a.data)?;
    let trees = parse_corpus(&corpus, model.schema())?;
    let labels = match &a.labels {
        Some(p) => Some(read_labels(p, &corpus.ids, model.n_classes())?),
        None => None,
    };
    let mut start = model;
    if !a.no_init {
        let opts = InitOptions {
            jitter: a.init_jitter,
            ..InitOptions::default()
        };
        init_params_with(&mut start, &trees, a.seed, &opts);
    }
    let config = TrainConfig {
        objective: match a.objective {
            ObjectiveArg::Nll => Objective::Nll,
            ObjectiveArg::Xent => Objective::CrossEntropy,
        },
        step_size: a.step,
        batch_size: a.batch,
        epochs: a.epochs,
        seed: a.seed,
        validation_fraction: a.validation_fraction,
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let (trained, history) = fit(&start, &trees, labels.as_deref(), &config)?;
    write_text(&a.out, &trained.to_json())?;
    if let Some(h) = &a.history {
        let mut w = csv_writer(Some(h))?;
        w.write_record(["epoch", "train_objective", "val_log_score", "val_accuracy", "selected"])?;
        for e in &history.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_objective.map(fmt_f64).unwrap_or_default(),
                fmt_f64(e.val_log_score),
                e.val_accuracy.map(fmt_f64).unwrap_or_default(),
                (e.epoch == history.best_epoch).to_string(),
            ])?;
        }
        w.flush()?;
    }
    let best = &history.epochs[history.best_epoch];
    eprintln!(
        "kept epoch {} of {} ({}): score {:.4}{} in {:.1} s",
        history.best_epoch,
        a.epochs,
        history.selection,
        best.val_log_score,
        best.val_accuracy
            .map(|x| format!(", accuracy {x:.4}"))
            .unwrap_or_default(),
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}

fn eval(a: &EvalArgs, mode: Mode) -> Result<()> {
    let model = read_model(&a.model)?;
    if a.root >= model.n_classes() {
        bail!(spsn::Error::InvalidArgument(format!(
            "root {} out of range for {} roots",
            a.root,
            model.n_classes()
        )));
    }
    let corpus = read_corpus(&a.data)?;
    let trees = parse_corpus(&corpus, model.schema())?;
    let values = evaluate_batch(&model, a.root, &trees, mode);
    let mut w = csv_writer(a.out.as_deref())?;
    w.write_record(["doc_id", "log_density"])?;
    for (id, v) in corpus.ids.iter().zip(values) {
        let v = v.with_context(|| format!("document {id}"))?;
        w.write_record([id.clone(), fmt_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}

fn classify(model: &Path, data: &Path, labels: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let model = read_model(model)?;
    let corpus = read_corpus(data)?;
    let trees = parse_corpus(&corpus, model.schema())?;
    let labels = labels
        .map(|p| read_labels(p, &corpus.ids, model.n_classes()))
        .transpose()?;
    let results = classify_batch(&model, &trees);
    let mut w = csv_writer(out)?;
    let mut header = vec!["doc_id".to_string(), "class".to_string()];
    header.extend((0..model.n_classes()).map(|k| format!("logpost_{k}")));
    w.write_record(&header)?;
    let mut hits = 0;
    for (i, (id, r)) in corpus.ids.iter().zip(results).enumerate() {
        let c = r.with_context(|| format!("document {id}"))?;
        if labels.as_ref().is_some_and(|l| l[i] == c.class) {
            hits += 1;
        }
        let mut row = vec![id.clone(), c.class.to_string()];
        row.extend(c.log_posterior.iter().map(|&x| fmt_f64(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    if labels.is_some() && !trees.is_empty() {
        eprintln!("accuracy {:.4} over {} documents", hits as f64 / trees.len() as f64, trees.len());
    }
    Ok(())
}

fn sample(model: &Path, n: usize, seed: u64, out: Option<&Path>, labels_out: Option<&Path>) -> Result<()> {
    let model = read_model(model)?;
    let draws = sample_labeled(&model, n, seed);
    let mut w = output(out)?;
    for (_, t) in &draws {
        writeln!(w, "{}", t.to_json())?;
    }
    w.flush()?;
    if let Some(p) = labels_out {
        let mut lw = csv_writer(Some(p))?;
        lw.write_record(["doc_id", "label"])?;
        for (i, (y, _)) in draws.iter().enumerate() {
            lw.write_record([i.to_string(), y.to_string()])?;
        }
        lw.flush()?;
    }
    Ok(())
}

/// Outcome of one validation check.
enum Check {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn report(name: &str, check: &Check) -> bool {
    let (tag, detail, ok) = match check {
        Check::Pass(d) => ("PASS", d, true),
        Check::Fail(d) => ("FAIL", d, false),
        Check::Skip(d) => ("SKIP", d, true),
    };
    println!("{tag} {name}: {detail}");
    ok
}

fn validate(model: &Path, deep: bool, seed: u64) -> Result<()> {
    let model = read_model(model)?;
    let structure = model.validate_structure();
    let mut ok = report(
        "structure",
        &if structure.is_ok() {
            Check::Pass(format!(
                "{} units smooth and decomposable",
                model.units().len()
            ))
        } else {
            Check::Fail(
                structure
                    .violations
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        },
    );
    if deep {
        let t0 = Instant::now();
        for (name, check) in deep_checks(&model, seed)? {
            ok &= report(name, &check);
        }
        println!("deep checks took {:.1} s", t0.elapsed().as_secs_f64());
    }
    if ok {
        Ok(())
    } else {
        Err(ValidationFailed("validation failed".into()).into())
    }
}

/// Oracle checks on a discrete stand-in of the model, with the largest
/// cardinality truncation (3, 2 or 1) that keeps enumeration tractable.
fn deep_checks(model: &Circuit, seed: u64) -> Result<Vec<(&'static str, Check)>> {
    let mut small = None;
    for k_max in [3, 2, 1] {
        let d = downscale(model, 2, k_max);
        if enumeration_size(&d)? <= MAX_TERMS {
            small = Some((d, k_max));
            break;
        }
    }
    let mut out = Vec::new();
    let Some((mut d, k_max)) = small else {
        let skip = || Check::Skip(format!("enumeration exceeds {MAX_TERMS:e} terms even with k_max = 1"));
        out.push(("normalization", skip()));
        out.push(("permutation", skip()));
        out.push(("gradient", skip()));
        return Ok(out);
    };
    randomize_params(&mut d, &mut stream_rng(seed, Stream::Oracle));

    let masses: Vec<f64> = (0..d.n_classes())
        .map(|r| brute_force_mass(&d, r, &Region::everything()))
        .collect::<spsn::Result<_>>()?;
    let worst = masses.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    out.push((
        "normalization",
        if worst <= 1e-9 {
            Check::Pass(format!("k_max = {k_max}, max |log mass| = {worst:.2e}"))
        } else {
            Check::Fail(format!("k_max = {k_max}, max |log mass| = {worst:.2e} (tol 1e-9)"))
        },
    ));

    let trees: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let root = i as usize % d.n_classes();
            sample_with(&d, root, &mut item_rng(seed, Stream::Sample, i)).map(|t| (root, t))
        })
        .collect::<spsn::Result<_>>()?;
    let mut dev: f64 = 0.0;
    for (root, t) in &trees {
        dev = dev.max(permutation_sweep(&d, *root, t, 120)?);
    }
    out.push((
        "permutation",
        if dev <= 1e-12 {
            Check::Pass(format!("{} sampled trees, max deviation {dev:.1e}", trees.len()))
        } else {
            Check::Fail(format!("max deviation {dev:.1e} (tol 1e-12)"))
        },
    ));

    let mut bad = 0;
    let mut compared = 0;
    for (root, t) in trees.iter().take(5) {
        let (_, a) = backward(&d, *root, t)?;
        let f = finite_diff_grad(&d, *root, t, 1e-5)?;
        for (a, f) in a.iter().zip(&f) {
            compared += 1;
            if (a - f).abs() > 1e-4 * a.abs().max(f.abs()) + 1e-9 {
                bad += 1;
            }
        }
    }
    out.push((
        "gradient",
        if bad == 0 {
            Check::Pass(format!("{compared} partials agree with finite differences"))
        } else {
            Check::Fail(format!("{bad} of {compared} partials disagree"))
        },
    ));
    Ok(out)
}

fn sweep(
    model: &Path,
    data: &Path,
    labels: &Path,
    fractions: &[f64],
    repeats: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let model = read_model(model)?;
    let corpus = read_corpus(data)?;
    let trees = parse_corpus(&corpus, model.schema())?;
    let labels = read_labels(labels, &corpus.ids, model.n_classes())?;
    let rows = missing_sweep(&model, &trees, &labels, fractions, repeats, seed)?;
    let mut w = csv_writer(out)?;
    w.write_record(["fraction", "repeat", "accuracy"])?;
    for r in &rows {
        w.write_record([fmt_f64(r.fraction), r.repeat.to_string(), fmt_f64(r.accuracy)])?;
    }
    w.flush()?;
    for &f in fractions {
        let accs: Vec<f64> = rows.iter().filter(|r| r.fraction == f).map(|r| r.accuracy).collect();
        if !accs.is_empty() {
            eprintln!("fraction {f}: mean accuracy {:.4}", accs.iter().sum::<f64>() / accs.len() as f64);
        }
    }
    Ok(())
}
