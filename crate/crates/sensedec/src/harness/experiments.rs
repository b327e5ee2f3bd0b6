//! Experiment drivers. Each driver takes a [`Pipeline`] — the trained
//! transmission system plus the data splits it was trained on — sweeps one
//! stress axis, and returns result rows ready for CSV emission:
//!
//! * [`run_snr_sweep`] — channel quality, decision model refit per point;
//! * [`run_expertise_sweep`] — knowledge-base size at a fixed channel;
//! * [`run_capacity_sweep`] — attention capacity via the stress transform;
//! * [`run_alternating`] — rounds of system updates through the decision
//!   model's loss, interleaved with decision-model refits;
//! * [`run_baseline`] — the digital reference chain next to the learned
//!   system on a shared classifier.
//!
//! Every random stream is derived from the master seed and a purpose tag
//! (plus the Monte Carlo run index for evaluation streams), so results are
//! byte-identical across reruns and across worker-thread schedules; the
//! drivers fan work out with rayon and rely on row sorting at emission.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{transmit_digital, DigitalChainConfig};
use crate::error::{Error, Result};
use crate::gcm::{
    fit_gcm, loss_gradients, stress_transform, ExemplarStore, GcmFit, GcmFitConfig, GcmModel,
    GcmParams, StressMode,
};
use crate::harness::config::{DatasetConfig, ExperimentConfig, PresentationConfig};
use crate::harness::metrics::{score_rules, RuleScores, RULES};
use crate::harness::results::{Condition, ResultRow};
use crate::nn::{train_classifier, Activation, DenseNetwork, Gradients, TrainConfig};
use crate::presentation::{
    build_feature_spec, present, present_from_trace, presentation_backward, PresentationSpec,
};
use crate::sinfony::{train_sinfony, SinfonyArch, SinfonySystem, SinfonyTrainConfig};
use crate::source::{
    generate_gaussian_source, generate_image_source, load_idx, sample_knowledge_indices,
    train_val_split, Dataset,
};
use crate::stream::{derive_rng, derive_rng_indexed, derive_seed};

/// Everything the drivers share: the configuration, the train/eval splits,
/// the trained transmission system, and one presentation spec per
/// configured presentation (feature selections are frozen against the
/// trained system, even for drivers that later modify a copy of it).
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: ExperimentConfig,
    pub train: Dataset,
    pub eval: Dataset,
    pub system: SinfonySystem,
    /// `(csv presentation name, spec)` pairs, in configuration order.
    pub presentations: Vec<(String, PresentationSpec)>,
    /// Per-epoch mean training loss of the transmission system.
    pub training_loss: Vec<f64>,
}

/// Materialize the configured data source.
pub fn build_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let seed = derive_seed(config.master_seed, "dataset");
    match &config.dataset {
        DatasetConfig::Gaussian { num_classes, dim, separation, num_samples } => {
            generate_gaussian_source(*num_classes, *dim, *separation, *num_samples, seed)
        }
        DatasetConfig::Images { num_classes, num_samples, noise_sigma } => {
            generate_image_source(*num_classes, *num_samples, *noise_sigma, seed)
        }
        DatasetConfig::Idx { images_path, labels_path } => load_idx(images_path, labels_path),
    }
}

/// Load the data, split it, train the transmission system, and freeze the
/// presentation specs. Every driver runs against the result.
pub fn build_pipeline(config: ExperimentConfig) -> Result<Pipeline> {
    let master = config.master_seed;
    let dataset = build_dataset(&config)?;
    let (train, val) =
        train_val_split(&dataset, config.train_fraction, derive_seed(master, "split"))?;
    // The validation split is already shuffled, so a prefix is an unbiased
    // subsample.
    let eval = match config.eval_samples {
        Some(m) if m < val.len() => val.subset(&(0..m).collect::<Vec<_>>())?,
        _ => val.clone(),
    };

    let view_split = config.views.build(train.dim())?;
    let arch = SinfonyArch {
        encoder_hidden: config.sinfony.encoder_hidden,
        n_tx: config.sinfony.n_tx,
        decoder_hidden: config.sinfony.decoder_hidden,
    };
    let train_config = SinfonyTrainConfig {
        learning_rate: config.sinfony.learning_rate,
        epochs: config.sinfony.epochs,
        batch_size: config.sinfony.batch_size.min(train.len()),
        snr_low_db: config.sinfony.snr_low_db,
        snr_high_db: config.sinfony.snr_high_db,
        seed: derive_seed(master, "sinfony"),
    };
    let (system, training_loss) = train_sinfony(&train, &view_split, &arch, &train_config)?;

    let presentations = config
        .presentations
        .iter()
        .map(|p| {
            let spec = match p {
                PresentationConfig::Categorical => PresentationSpec::Categorical,
                PresentationConfig::Features { count } => build_feature_spec(&system, *count)?,
            };
            Ok((p.name(), spec))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Pipeline { config, train, eval, system, presentations, training_loss })
}

/// One decision model bound to the presentation it consumes.
#[derive(Debug, Clone)]
struct PresentationModel {
    name: String,
    spec: PresentationSpec,
    model: GcmModel,
}

/// Transmit every sample once over a fresh channel realisation.
fn transmit_eval(
    system: &SinfonySystem,
    dataset: &Dataset,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    dataset.samples().iter().map(|s| system.transmit(s, snr_db, rng)).collect()
}

fn decoder_posteriors(system: &SinfonySystem, received: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    received.iter().map(|r| system.decode_posterior(r)).collect()
}

/// Run the configured knowledge samples through the live channel once and
/// present them — one noisy episode per sample.
fn present_pass(
    system: &SinfonySystem,
    train: &Dataset,
    spec: &PresentationSpec,
    knowledge: &[usize],
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    knowledge
        .iter()
        .map(|&i| {
            let received = system.transmit(&train.samples()[i], snr_db, rng)?;
            present(system, &received, spec)
        })
        .collect()
}

/// Build and fit a decision model for one presentation at one operating
/// point. The exemplar store and the fit stream are two independent noisy
/// passes over the same knowledge samples, so the fit measures
/// generalisation across channel noise rather than memorisation of one
/// realisation. `init` warm-starts the fit; `None` starts neutral.
fn build_gcm(
    config: &ExperimentConfig,
    system: &SinfonySystem,
    train: &Dataset,
    scope: &str,
    spec: &PresentationSpec,
    knowledge: &[usize],
    snr_db: f64,
    init: Option<&GcmParams>,
) -> Result<GcmFit> {
    let master = config.master_seed;
    let labels: Vec<usize> = knowledge.iter().map(|&i| train.labels()[i]).collect();

    let mut rng = derive_rng(master, &format!("exemplars/{scope}"));
    let exemplars = present_pass(system, train, spec, knowledge, snr_db, &mut rng)?;
    let mut rng = derive_rng(master, &format!("fitstream/{scope}"));
    let fit_stream = present_pass(system, train, spec, knowledge, snr_db, &mut rng)?;

    let store = ExemplarStore::new(exemplars, labels.clone(), train.num_classes())?;
    let neutral = GcmParams::neutral(spec.dim(system));
    let fit_config = GcmFitConfig {
        learning_rate: config.gcm.learning_rate,
        epochs: config.gcm.epochs,
        batch_size: config.gcm.batch_size.min(fit_stream.len()),
        seed: derive_seed(master, &format!("gcmfit/{scope}")),
    };
    fit_gcm(&store, &fit_stream, &labels, init.unwrap_or(&neutral), &fit_config)
}

/// Expand one scored evaluation into a row per decision rule.
fn rows_for(
    experiment: &str,
    condition: &Condition,
    presentation: &str,
    run: u64,
    scores: &RuleScores,
    channel_uses: f64,
) -> Vec<ResultRow> {
    RULES
        .iter()
        .map(|rule| ResultRow {
            experiment: experiment.into(),
            condition: condition.clone(),
            presentation: presentation.into(),
            rule: (*rule).into(),
            seed: run,
            accuracy: scores.accuracy_for(rule).expect("known rule"),
            mean_ce: scores.mean_ce,
            channel_uses,
        })
        .collect()
}

/// Score one Monte Carlo run of one sweep point. All presentations (and,
/// when `include_direct` is set, the decoder itself under the name
/// `sinfony`) see the same channel realisations, so rule and presentation
/// comparisons are paired. `tag_scope` keys the random streams and must be
/// unique per sweep point.
#[allow(clippy::too_many_arguments)]
fn eval_run_rows(
    p: &Pipeline,
    system: &SinfonySystem,
    experiment: &str,
    condition: &Condition,
    tag_scope: &str,
    snr_db: f64,
    run: u64,
    models: &[PresentationModel],
    include_direct: bool,
) -> Result<Vec<ResultRow>> {
    let master = p.config.master_seed;
    let uses = system.channel_uses() as f64;
    let labels = p.eval.labels();
    let mut rows = Vec::new();

    let mut rng = derive_rng_indexed(master, &format!("eval/{tag_scope}"), run);
    let received = transmit_eval(system, &p.eval, snr_db, &mut rng)?;

    if include_direct {
        let posteriors = decoder_posteriors(system, &received)?;
        let mut rng = derive_rng_indexed(master, &format!("score/{tag_scope}/sinfony"), run);
        let scores = score_rules(&posteriors, labels, &mut rng)?;
        rows.extend(rows_for(experiment, condition, "sinfony", run, &scores, uses));
    }

    for pm in models {
        let posteriors: Vec<Vec<f64>> = received
            .iter()
            .map(|r| pm.model.posterior(&present(system, r, &pm.spec)?))
            .collect::<Result<_>>()?;
        let mut rng = derive_rng_indexed(master, &format!("score/{tag_scope}/{}", pm.name), run);
        let scores = score_rules(&posteriors, labels, &mut rng)?;
        rows.extend(rows_for(experiment, condition, &pm.name, run, &scores, uses));
    }
    Ok(rows)
}

/// Evaluate a list of fitted sweep points: all `(point, run)` pairs in
/// parallel, each with its own derived streams.
fn eval_points(
    p: &Pipeline,
    experiment: &str,
    points: &[(Condition, f64, Vec<PresentationModel>)],
    include_direct: bool,
) -> Result<Vec<ResultRow>> {
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|ci| (0..p.config.monte_carlo_runs).map(move |run| (ci, run)))
        .collect();
    let groups: Vec<Vec<ResultRow>> = jobs
        .into_par_iter()
        .map(|(ci, run)| {
            let (condition, snr_db, models) = &points[ci];
            let tag_scope = format!("{experiment}/{}", condition.label());
            eval_run_rows(
                p,
                &p.system,
                experiment,
                condition,
                &tag_scope,
                *snr_db,
                run,
                models,
                include_direct,
            )
        })
        .collect::<Result<_>>()?;
    Ok(groups.into_iter().flatten().collect())
}

/// Pair every condition index with every presentation index.
fn index_product(conditions: usize, presentations: usize) -> Vec<(usize, usize)> {
    (0..conditions).flat_map(|c| (0..presentations).map(move |q| (c, q))).collect()
}

/// Collect parallel fit results into a per-condition model list.
fn assemble_points(
    p: &Pipeline,
    conditions: Vec<(Condition, f64)>,
    fitted: Vec<((usize, usize), GcmModel)>,
) -> Vec<(Condition, f64, Vec<PresentationModel>)> {
    let mut slots: Vec<Vec<Option<GcmModel>>> =
        vec![vec![None; p.presentations.len()]; conditions.len()];
    for ((ci, pi), model) in fitted {
        slots[ci][pi] = Some(model);
    }
    conditions
        .into_iter()
        .zip(slots)
        .map(|((condition, snr_db), row)| {
            let models = p
                .presentations
                .iter()
                .zip(row)
                .map(|((name, spec), model)| PresentationModel {
                    name: name.clone(),
                    spec: spec.clone(),
                    model: model.expect("every fit job filled its slot"),
                })
                .collect();
            (condition, snr_db, models)
        })
        .collect()
}

/// Sweep channel quality. The decision model is refit at every grid point
/// — the decision maker adapts to the channel it actually observes — on
/// one knowledge base shared across the grid.
pub fn run_snr_sweep(p: &Pipeline) -> Result<Vec<ResultRow>> {
    let config = &p.config;
    let master = config.master_seed;
    let mut rng = derive_rng(master, "knowledge/snr");
    let knowledge = sample_knowledge_indices(&p.train, config.gcm.exemplars, &mut rng)?;

    let conditions: Vec<(Condition, f64)> =
        config.sweep.snr_grid_db.iter().map(|&db| (Condition::Snr(db), db)).collect();
    let fitted: Vec<((usize, usize), GcmModel)> =
        index_product(conditions.len(), p.presentations.len())
            .into_par_iter()
            .map(|(ci, pi)| {
                let (condition, snr_db) = &conditions[ci];
                let (name, spec) = &p.presentations[pi];
                let scope = format!("snr/{}/{name}", condition.label());
                let fit =
                    build_gcm(config, &p.system, &p.train, &scope, spec, &knowledge, *snr_db, None)?;
                Ok(((ci, pi), fit.model))
            })
            .collect::<Result<_>>()?;

    eval_points(p, "snr", &assemble_points(p, conditions, fitted), true)
}

/// Sweep knowledge-base size at the fixed evaluation channel. Each size
/// gets its own stratified knowledge draw, shared across presentations.
pub fn run_expertise_sweep(p: &Pipeline) -> Result<Vec<ResultRow>> {
    let config = &p.config;
    let master = config.master_seed;
    let snr_db = config.sweep.eval_snr_db;
    let sizes = &config.sweep.knowledge_sizes;

    let conditions: Vec<(Condition, f64)> =
        sizes.iter().map(|&s| (Condition::Knowledge(s), snr_db)).collect();
    let fitted: Vec<((usize, usize), GcmModel)> =
        index_product(conditions.len(), p.presentations.len())
            .into_par_iter()
            .map(|(ci, pi)| {
                let size = sizes[ci];
                let mut rng = derive_rng(master, &format!("knowledge/expertise/{size}"));
                let knowledge = sample_knowledge_indices(&p.train, size, &mut rng)?;
                let (name, spec) = &p.presentations[pi];
                let scope = format!("expertise/{}/{name}", conditions[ci].0.label());
                let fit =
                    build_gcm(config, &p.system, &p.train, &scope, spec, &knowledge, snr_db, None)?;
                Ok(((ci, pi), fit.model))
            })
            .collect::<Result<_>>()?;

    eval_points(p, "expertise", &assemble_points(p, conditions, fitted), true)
}

/// Sweep attention capacity. One base model per presentation is fit at the
/// evaluation channel, then stressed — no refit, matching a decision maker
/// whose learned attention is truncated rather than re-learned. Configured
/// capacities above a presentation's dimension act as full capacity; the
/// condition label keeps the configured value.
pub fn run_capacity_sweep(p: &Pipeline) -> Result<Vec<ResultRow>> {
    let config = &p.config;
    let master = config.master_seed;
    let snr_db = config.sweep.eval_snr_db;
    let mut rng = derive_rng(master, "knowledge/capacity");
    let knowledge = sample_knowledge_indices(&p.train, config.gcm.exemplars, &mut rng)?;

    let base: Vec<GcmModel> = p
        .presentations
        .par_iter()
        .map(|(name, spec)| {
            let scope = format!("capacity/base/{name}");
            build_gcm(config, &p.system, &p.train, &scope, spec, &knowledge, snr_db, None)
                .map(|fit| fit.model)
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::new();
    for mode in [StressMode::MostImportant, StressMode::LeastImportant] {
        for &kept in &config.sweep.capacities {
            let models = p
                .presentations
                .iter()
                .zip(&base)
                .map(|((name, spec), model)| {
                    let stressed = stress_transform(model, kept.min(model.dim()), mode)?;
                    Ok(PresentationModel {
                        name: name.clone(),
                        spec: spec.clone(),
                        model: stressed,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            points.push((Condition::Capacity { mode, kept }, snr_db, models));
        }
    }
    eval_points(p, "capacity", &points, true)
}

/// One epoch of system updates driven by the decision model's loss: the
/// gradient enters at the presentation the decision maker sees and flows
/// back through the frozen presentation map, the decoder, the channel
/// (noise held constant), and the encoders. The decision model itself is
/// frozen for the epoch.
fn system_epoch_through_gcm(
    config: &ExperimentConfig,
    system: &mut SinfonySystem,
    train: &Dataset,
    spec: &PresentationSpec,
    gcm: &GcmModel,
    tag: &str,
) -> Result<()> {
    let mut rng = derive_rng(config.master_seed, tag);
    let batch_size = config.sinfony.batch_size.min(train.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng);

    for batch in order.chunks(batch_size) {
        let snr_db = rng.random_range(config.sinfony.snr_low_db..=config.sinfony.snr_high_db);
        let mut enc_grads: Vec<Gradients> =
            system.encoders().iter().map(Gradients::zeros_like).collect();
        let mut dec_grads = Gradients::zeros_like(system.decoder());

        for &i in batch {
            let sample = train.samples()[i].as_slice();
            let trace = system.forward_trace(sample, snr_db, &mut rng)?;
            let presented = present_from_trace(system, &trace, spec)?;
            let g = loss_gradients(gcm, &presented, train.labels()[i])?;
            if !g.loss.is_finite() {
                return Err(Error::Numeric(
                    "non-finite decision loss during a system update epoch".into(),
                ));
            }
            let (layer, grad) = presentation_backward(system, spec, &g.query)?;
            system.backward_trace(sample, &trace, layer, &grad, &mut enc_grads, &mut dec_grads)?;
        }

        let scale = 1.0 / batch.len() as f64;
        for g in &mut enc_grads {
            g.scale(scale);
        }
        dec_grads.scale(scale);
        system.apply_gradients(&enc_grads, &dec_grads, config.sweep.alternation_learning_rate)?;
    }
    Ok(())
}

/// Alternate system updates with decision-model refits, evaluating after
/// every round at the fixed evaluation channel. Round 0 is the plain
/// pipeline with a cold-fit decision model; round `t` applies one system
/// epoch through the round `t-1` model, then refits warm-started from the
/// previous parameters on exemplars regenerated through the updated
/// system. Presentations evolve independently (each gets its own system
/// copy), so no shared decoder rows are emitted.
pub fn run_alternating(p: &Pipeline) -> Result<Vec<ResultRow>> {
    let config = &p.config;
    let master = config.master_seed;
    let snr_db = config.sweep.eval_snr_db;
    let mut rng = derive_rng(master, "knowledge/alternating");
    let knowledge = sample_knowledge_indices(&p.train, config.gcm.exemplars, &mut rng)?;

    let groups: Vec<Vec<ResultRow>> = p
        .presentations
        .par_iter()
        .map(|(name, spec)| {
            let mut system = p.system.clone();
            let mut rows = Vec::new();
            let mut fit = build_gcm(
                config,
                &system,
                &p.train,
                &format!("alternating/{name}/0"),
                spec,
                &knowledge,
                snr_db,
                None,
            )?;
            for t in 0..=config.sweep.alternations {
                if t > 0 {
                    system_epoch_through_gcm(
                        config,
                        &mut system,
                        &p.train,
                        spec,
                        &fit.model,
                        &format!("alt-train/{name}/{t}"),
                    )?;
                    fit = build_gcm(
                        config,
                        &system,
                        &p.train,
                        &format!("alternating/{name}/{t}"),
                        spec,
                        &knowledge,
                        snr_db,
                        Some(&fit.params),
                    )?;
                }
                let condition = Condition::Alternation(t);
                let point = [PresentationModel {
                    name: name.clone(),
                    spec: spec.clone(),
                    model: fit.model.clone(),
                }];
                for run in 0..config.monte_carlo_runs {
                    rows.extend(eval_run_rows(
                        p,
                        &system,
                        "alternating",
                        &condition,
                        &format!("alternating/{name}/{t}"),
                        snr_db,
                        run,
                        &point,
                        false,
                    )?);
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(groups.into_iter().flatten().collect())
}

/// Compare the digital reference chain against the learned system. Both
/// feed the same classifier trained on clean samples; `clean` rows give
/// its ceiling, `digital` rows follow the digital grid with measured
/// channel uses, and `sinfony` rows follow the sweep grid. Requires sample
/// values in `[0, 1]` (pixel data), because the digital chain quantizes.
pub fn run_baseline(p: &Pipeline) -> Result<Vec<ResultRow>> {
    let config = &p.config;
    let master = config.master_seed;
    let num_classes = p.train.num_classes();

    let mut rng = derive_rng(master, "baseline/classifier-init");
    let mut classifier = DenseNetwork::random(
        &[p.train.dim(), config.digital.classifier_hidden, num_classes],
        &[Activation::Relu, Activation::Softmax],
        &mut rng,
    )?;
    let train_config = TrainConfig {
        learning_rate: config.digital.classifier_learning_rate,
        epochs: config.digital.classifier_epochs,
        batch_size: config.digital.classifier_batch_size.min(p.train.len()),
        seed: derive_seed(master, "baseline/classifier-train"),
    };
    train_classifier(&mut classifier, p.train.samples(), p.train.labels(), &train_config)?;
    let chain = DigitalChainConfig::new(config.digital.bits_per_pixel, p.train.samples())?;

    let labels = p.eval.labels();
    let mut rows = Vec::new();

    // The classifier on untransmitted samples: the accuracy ceiling both
    // chains are measured against.
    let clean_posteriors: Vec<Vec<f64>> = p
        .eval
        .samples()
        .iter()
        .map(|s| Ok(classifier.forward(s)?.last().expect("non-empty").clone()))
        .collect::<Result<_>>()?;
    let clean = Condition::Named("clean".into());
    for run in 0..config.monte_carlo_runs {
        let mut rng = derive_rng_indexed(master, "score/baseline/clean", run);
        let scores = score_rules(&clean_posteriors, labels, &mut rng)?;
        rows.extend(rows_for("baseline", &clean, "digital", run, &scores, 0.0));
    }

    let digital_jobs: Vec<(usize, u64)> =
        index_product(config.digital.snr_grid_db.len(), config.monte_carlo_runs as usize)
            .into_iter()
            .map(|(ci, run)| (ci, run as u64))
            .collect();
    let digital_groups: Vec<Vec<ResultRow>> = digital_jobs
        .into_par_iter()
        .map(|(ci, run)| {
            let snr_db = config.digital.snr_grid_db[ci];
            let condition = Condition::Snr(snr_db);
            let mut rng =
                derive_rng_indexed(master, &format!("eval/baseline/digital/{}", condition.label()), run);
            let mut posteriors = Vec::with_capacity(p.eval.len());
            let mut total_uses = 0u64;
            for sample in p.eval.samples() {
                let (reconstruction, uses) = transmit_digital(sample, &chain, snr_db, &mut rng)?;
                total_uses += uses;
                posteriors.push(classifier.forward(&reconstruction)?.last().expect("non-empty").clone());
            }
            let mean_uses = total_uses as f64 / p.eval.len() as f64;
            let mut rng =
                derive_rng_indexed(master, &format!("score/baseline/digital/{}", condition.label()), run);
            let scores = score_rules(&posteriors, labels, &mut rng)?;
            Ok(rows_for("baseline", &condition, "digital", run, &scores, mean_uses))
        })
        .collect::<Result<_>>()?;
    rows.extend(digital_groups.into_iter().flatten());

    let learned_jobs: Vec<(usize, u64)> =
        index_product(config.sweep.snr_grid_db.len(), config.monte_carlo_runs as usize)
            .into_iter()
            .map(|(ci, run)| (ci, run as u64))
            .collect();
    let learned_groups: Vec<Vec<ResultRow>> = learned_jobs
        .into_par_iter()
        .map(|(ci, run)| {
            let snr_db = config.sweep.snr_grid_db[ci];
            let condition = Condition::Snr(snr_db);
            let mut rng =
                derive_rng_indexed(master, &format!("eval/baseline/sinfony/{}", condition.label()), run);
            let received = transmit_eval(&p.system, &p.eval, snr_db, &mut rng)?;
            let posteriors = decoder_posteriors(&p.system, &received)?;
            let mut rng =
                derive_rng_indexed(master, &format!("score/baseline/sinfony/{}", condition.label()), run);
            let scores = score_rules(&posteriors, labels, &mut rng)?;
            Ok(rows_for(
                "baseline",
                &condition,
                "sinfony",
                run,
                &scores,
                p.system.channel_uses() as f64,
            ))
        })
        .collect::<Result<_>>()?;
    rows.extend(learned_groups.into_iter().flatten());

    Ok(rows)
}
