use std::path::{Path, PathBuf};

use super::{
    Command, DataKind, EvalArgs, GenDataArgs, GuideArgs, MatrixKind, PlotArgs, TrainEncoderArgs,
    TrainGanArgs,
};
use crate::error::{Error, Result};
use crate::eval::{draw_exemplars, evaluate, ConfusionMatrix, EvalConfig, IdentificationConfig};
use crate::gan::{train, GanArch, GanModel, History, SampleMode, TrainConfig};
use crate::guide::{generate_from, guide, ExemplarBatch};
use crate::inversion::{train_encoder, EncoderArch, EncoderModel, EncoderTrainConfig};
use crate::io::checkpoint::{load_encoder, load_gan, save_encoder, save_gan};
use crate::io::structext::Document;
use crate::io::{atomic_write, parse_f64_list};
use crate::plot::{confusion_svg, scatter_svg, tile_grid, PointSet};
use crate::synthdata::{
    encode_ppm, gaussian_mixture_dataset, load_image_directory, read_data_file,
    tile_image_dataset_with_noise, write_data_file, DataFile, DatasetMode, LabeledDataset,
    MixtureSpec, Normalization,
};

/// Runs one command and returns the path of its main output.
pub(super) fn execute(command: &Command) -> Result<PathBuf> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::TrainGan(a) => train_gan(a),
        Command::TrainEncoder(a) => train_enc(a),
        Command::Guide(a) => run_guide(a),
        Command::Eval(a) => run_eval(a),
        Command::Plot(a) => run_plot(a),
    }
    .map(|()| out_path(command).to_path_buf())
}

fn out_path(command: &Command) -> &Path {
    match command {
        Command::GenData(a) => &a.out,
        Command::TrainGan(a) => &a.out,
        Command::TrainEncoder(a) => &a.out,
        Command::Guide(a) => &a.out,
        Command::Eval(a) => &a.out,
        Command::Plot(a) => &a.out,
    }
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let ds = match a.mode {
        DataKind::Mixture2d => {
            let spec = MixtureSpec::regular_polygon(a.modes, a.radius, a.std);
            gaussian_mixture_dataset(&spec, a.count, a.seed)?
        }
        DataKind::Tiles => tile_image_dataset_with_noise(a.resolution, a.modes, a.count, a.seed, a.noise)?,
    };
    ds.save(&a.out)?;
    println!(
        "wrote {} samples, m = {}, shape = {:?} to {}",
        ds.len(),
        ds.subcategories(),
        ds.sample_shape(),
        a.out.display()
    );
    Ok(())
}

fn history_table(history: &History) -> String {
    let mut out = String::from("step stage fade loss_d loss_g mean_d_real mean_d_fake\n");
    for r in &history.records {
        out.push_str(&format!(
            "{} {} {:?} {:?} {:?} {:?} {:?}\n",
            r.step,
            r.stage,
            r.fade,
            r.metrics.loss_d,
            r.metrics.loss_g,
            r.metrics.mean_d_real,
            r.metrics.mean_d_fake
        ));
    }
    for g in &history.grow_events {
        out.push_str(&format!("# grow at step {}: {} -> {}\n", g.step, g.from_resolution, g.to_resolution));
    }
    out
}

fn train_gan(a: &TrainGanArgs) -> Result<()> {
    let ds = LabeledDataset::load(&a.data)?;
    let arch = GanArch {
        hidden: a.hidden,
        depth: a.depth,
        pixel_norm: !a.no_pixel_norm,
        equalized: !a.no_equalized,
        ..GanArch::default()
    };
    let model = match ds.mode {
        DatasetMode::Vector2d => GanModel::new_vector(a.latent_dim.unwrap_or(32), ds.features(), arch, a.seed)?,
        DatasetMode::TileImage { resolution } => {
            GanModel::new_image(a.latent_dim.unwrap_or(64), resolution, arch, a.seed)?
        }
    };
    let config = TrainConfig {
        batch_size: a.batch,
        total_steps: a.steps,
        steps_per_stage: a.steps_per_stage,
        fade_fraction: a.fade_fraction,
        seed: a.seed,
        lr_generator: a.lr_g,
        lr_discriminator: a.lr_d,
        beta1: a.beta1,
        variant: a.loss.into(),
    };
    let (model, history) = train(model, &ds, &config).map_err(|f| {
        let steps = f.history.records.len();
        eprintln!("training stopped after {steps} recorded steps");
        f.error
    })?;
    if let Some(path) = &a.history {
        atomic_write(path, history_table(&history).as_bytes())?;
    }
    save_gan(&model, &a.out)?;
    if let Some(last) = history.records.last() {
        println!(
            "trained {} steps: loss_d {:.4} loss_g {:.4} mean D(x) {:.4} mean D(G(z)) {:.4}",
            history.records.len(),
            last.metrics.loss_d,
            last.metrics.loss_g,
            last.metrics.mean_d_real,
            last.metrics.mean_d_fake
        );
    }
    println!("generator provenance {} written to {}", model.provenance_id(), a.out.display());
    Ok(())
}

fn train_enc(a: &TrainEncoderArgs) -> Result<()> {
    let gan = load_gan(&a.gan)?;
    let arch = EncoderArch {
        hidden: a.hidden,
        depth: a.depth,
        ..EncoderArch::default()
    };
    let encoder = EncoderModel::new(&gan, arch, a.seed)?;
    let config = EncoderTrainConfig {
        pairs: a.pairs,
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        learning_rate: a.lr,
        validation_fraction: a.validation_fraction,
    };
    let (encoder, history) = train_encoder(encoder, &gan, &config).map_err(|f| f.error)?;
    println!("untrained validation latent MSE {:.6}", history.baseline_validation_mse);
    for e in &history.epochs {
        println!(
            "epoch {}: train loss {:.6}, validation latent MSE {:.6}",
            e.epoch + 1,
            e.train_loss,
            e.validation_mse
        );
    }
    save_encoder(&encoder, &a.out)
}

fn provenance_check(gan: &GanModel, encoder: &EncoderModel) {
    if encoder.provenance != gan.provenance_id() {
        eprintln!(
            "warning: encoder was trained against generator {} but the loaded generator is {}",
            encoder.provenance,
            gan.provenance_id()
        );
    }
}

fn dataset_mode(gan: &GanModel) -> Result<DatasetMode> {
    match (gan.mode(), gan.resolution()) {
        (SampleMode::Vector { dim: 2 }, _) => Ok(DatasetMode::Vector2d),
        (SampleMode::Image { .. }, Some(resolution)) => Ok(DatasetMode::TileImage { resolution }),
        _ => Err(Error::invalid("generator output has no sample-file representation")),
    }
}

fn run_guide(a: &GuideArgs) -> Result<()> {
    let gan = load_gan(&a.gan)?;
    let encoder = load_encoder(&a.encoder)?;
    provenance_check(&gan, &encoder);
    let mut m = 1;
    let mut meta = Vec::new();
    let batch = if let Some(dir) = &a.exemplar_dir {
        let resolution = gan
            .resolution()
            .ok_or_else(|| Error::invalid("--exemplar-dir needs an image generator"))?;
        load_image_directory(dir, resolution)?
    } else {
        let data = a.data.as_ref().expect("clap enforces --data");
        let ds = LabeledDataset::load(data)?;
        let label = a.exemplar_label.expect("exemplar group");
        if label >= ds.subcategories() {
            return Err(Error::invalid(format!(
                "--exemplar-label {label} out of range for {} subcategories",
                ds.subcategories()
            )));
        }
        m = ds.subcategories();
        let df = DataFile::from(&ds);
        meta.extend(
            df.meta
                .into_iter()
                .filter(|(k, _)| k.starts_with("mixture_") || k == "label_names" || k == "category"),
        );
        draw_exemplars(&ds, label, a.n.expect("clap enforces --n"), a.exemplar_seed)?
    };
    let batch = ExemplarBatch::new(batch.samples().to_vec(), batch.sample_shape().to_vec(), a.exemplar_label)?;
    let out = guide_with_floor(&gan, &encoder, &batch, a)?;
    meta.push(("source".into(), "guided".into()));
    meta.push((
        "guided_label".into(),
        a.exemplar_label.map_or_else(|| "none".into(), |l| l.to_string()),
    ));
    meta.push(("alpha".into(), format!("{:?}", a.alpha)));
    meta.push(("n_exemplars".into(), batch.len().to_string()));
    meta.push(("generator_provenance".into(), gan.provenance_id()));
    let file = DataFile {
        mode: dataset_mode(&gan)?,
        m,
        sample_shape: gan.sample_shape(),
        normalization: Normalization::identity(),
        samples: out.samples.into_data(),
        labels: None,
        meta,
    };
    if let Some(p) = &a.prototype_out {
        out.prototype.save(p)?;
    }
    write_data_file(&a.out, &file)?;
    println!(
        "wrote {} guided samples from {} exemplars (alpha {}) to {}",
        file.count(),
        batch.len(),
        a.alpha,
        a.out.display()
    );
    Ok(())
}

struct Guided {
    samples: crate::tensor::Tensor,
    prototype: crate::guide::PrototypeVector,
}

fn guide_with_floor(gan: &GanModel, encoder: &EncoderModel, batch: &ExemplarBatch, a: &GuideArgs) -> Result<Guided> {
    if !(a.sigma_floor >= 0.0) {
        return Err(Error::invalid("--sigma-floor must be non-negative"));
    }
    if a.sigma_floor == crate::guide::DEFAULT_SIGMA_FLOOR {
        let out = guide(gan, encoder, batch, a.alpha, a.count, a.seed)?;
        return Ok(Guided {
            samples: out.samples,
            prototype: out.prototype,
        });
    }
    let normalized = batch.normalized(&gan.normalization);
    let encoded = crate::guide::encode_exemplars(encoder, &normalized)?;
    let mut prototype = crate::guide::build_prototype(&encoded, a.alpha)?.with_sigma_floor(a.sigma_floor);
    prototype.label = batch.label;
    let latents = prototype.sample(a.count, a.seed)?;
    Ok(Guided {
        samples: generate_from(gan, &latents)?,
        prototype,
    })
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    let gan = load_gan(&a.gan)?;
    let encoder = load_encoder(&a.encoder)?;
    provenance_check(&gan, &encoder);
    let ds = LabeledDataset::load(&a.data)?;
    let config = EvalConfig {
        identification: IdentificationConfig {
            n_exemplars: a.n,
            alpha: a.alpha,
            per_class_count: a.per_class,
            seed: a.seed,
        },
        unguided_per_class: a.unguided_per_class,
        sweep_n: if a.no_sweep { Vec::new() } else { a.sweep_n.clone() },
        sweep_seeds: a.sweep_seeds.clone(),
    };
    let report = evaluate(&gan, &encoder, &ds, &config)?;
    let summary = report.summary();
    if let Some(p) = &a.table_out {
        atomic_write(p, summary.as_bytes())?;
    }
    atomic_write(&a.out, report.to_document().to_string().as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes())
}

fn matrix_from_report(doc: &Document, which: MatrixKind, path: &Path) -> Result<(ConfusionMatrix, Vec<String>)> {
    let section = match which {
        MatrixKind::Guided => "guided",
        MatrixKind::Unguided => "unguided",
    };
    let bad = |m: &str| Error::format(path, m.to_string());
    let m: usize = doc
        .get("report", "subcategories")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("report lacks subcategories"))?;
    let names = doc
        .get("report", "label_names")
        .map(|s| s.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    // rows are stored as percentages; scale to counts out of 10,000 so the
    // matrix reproduces them to two decimals
    let rows = (0..m)
        .map(|k| {
            let row = doc
                .get(section, &format!("confusion_row{k}"))
                .ok_or_else(|| bad("report lacks a confusion row"))?;
            let v = parse_f64_list(row).map_err(|e| bad(&e))?;
            if v.len() != m {
                return Err(bad("confusion row has the wrong length"));
            }
            Ok(v.iter().map(|p| (p * 100.0).round() as usize).collect())
        })
        .collect::<Result<Vec<Vec<usize>>>>()?;
    Ok((ConfusionMatrix::from_counts(rows)?, names))
}

fn run_plot(a: &PlotArgs) -> Result<()> {
    if let Some(report) = &a.report {
        let text = std::fs::read_to_string(report).map_err(|e| Error::io(report, e))?;
        let doc = Document::parse(&text).map_err(|m| Error::format(report, m))?;
        let (matrix, names) = matrix_from_report(&doc, a.matrix, report)?;
        return write_text(&a.out, &confusion_svg(&matrix, &names));
    }
    let path = a.samples.as_ref().expect("input group");
    let file = read_data_file(path)?;
    if file.count() == 0 {
        return Err(Error::invalid(format!("{} holds no samples", path.display())));
    }
    let mut samples = file.samples.clone();
    file.normalization.denormalize(&mut samples, file.features());
    match file.mode {
        DatasetMode::Vector2d => {
            let centers = match &a.data {
                Some(d) => LabeledDataset::load(d)?.mixture.map(|s| s.centers).unwrap_or_default(),
                None => file
                    .meta("mixture_centers")
                    .map(|c| {
                        parse_f64_list(c)
                            .map(|v| v.chunks_exact(2).map(|p| [p[0], p[1]]).collect())
                            .map_err(|e| Error::format(path, e))
                    })
                    .transpose()?
                    .unwrap_or_default(),
            };
            let unguided = match &a.gan {
                Some(g) => {
                    let gan = load_gan(g)?;
                    let z = gan.sample_prior(a.unguided_count, a.seed);
                    generate_from(&gan, &z)?.into_data()
                }
                None => Vec::new(),
            };
            let mut sets = Vec::new();
            if !unguided.is_empty() {
                sets.push(PointSet {
                    name: "unguided",
                    color: "#888888",
                    points: &unguided,
                });
            }
            sets.push(PointSet {
                name: "samples",
                color: "#d62728",
                points: &samples,
            });
            write_text(&a.out, &scatter_svg(&sets, &centers)?)
        }
        DatasetMode::TileImage { resolution } => {
            let len = file.features();
            let take = file.count().min(a.max_tiles) * len;
            let img = tile_grid(&samples[..take], resolution)?;
            atomic_write(&a.out, &encode_ppm(&img))
        }
    }
}

