//! Trains a single Arch4 model on the synthetic blob dataset and reports
//! its test AUC/TPR.
//!
//! ```bash
//! cargo run --release --example train_single
//! ```

use std::sync::Arc;
use std::time::Instant;

use cxr_ensemble::data::{load_manifest, BatchStream, EvalSet, ImageStore};
use cxr_ensemble::ensemble::score_predictions;
use cxr_ensemble::imaging::AugmentationConfig;
use cxr_ensemble::synth::{generate_blob_dataset, SynthConfig};
use cxr_ensemble::training::{build_model, predict_eval_set, train, ArchitectureSpec, TrainingConfig};

fn main() -> cxr_ensemble::Result<()> {
    let dir = std::env::temp_dir().join("cxr_train_single");
    let synth = SynthConfig {
        count: 120,
        seed: 7,
        ..Default::default()
    };
    println!("generating {} synthetic images...", synth.count);
    let manifest_path = generate_blob_dataset(&dir, &synth)?;
    let manifest = load_manifest(&manifest_path)?;

    let plan = cxr_ensemble::data::build_partition_plan(&manifest, 7)?;
    let division = &plan.divisions[0];
    let split = &division.splits[0];
    println!(
        "partition: {} train / {} validation / {} test",
        split.train.len(),
        split.validation.len(),
        division.test.len()
    );

    let store = Arc::new(ImageStore::new(manifest));
    let arch = ArchitectureSpec::by_name("Arch4").unwrap();
    let cfg = TrainingConfig {
        max_epochs: 10,
        patience: 3,
        seed: 7,
        ..Default::default()
    };
    // the blob's side is the label, so horizontal flips would scramble it
    let augmentation = AugmentationConfig {
        horizontal_flip: false,
        ..Default::default()
    };

    let mut model = build_model(&arch, cfg.seed)?;
    let mut stream = BatchStream::new(
        Arc::clone(&store),
        split.train.clone(),
        Some(augmentation),
        cfg.batch_size,
        cfg.seed,
    )?;
    let val = EvalSet::build(&store, &split.validation, cfg.batch_size)?;

    let start = Instant::now();
    let history = train(&mut model, &mut stream, &val, &cfg)?;
    println!(
        "trained {} epochs in {:.1?} (best epoch {})",
        history.epochs(),
        start.elapsed(),
        history.best_epoch + 1
    );
    for e in 0..history.epochs() {
        println!(
            "epoch {:>2}: train_loss {:.4}  val_loss {:.4}  val_acc {:.3}",
            e + 1,
            history.train_loss[e],
            history.val_loss[e],
            history.val_accuracy[e]
        );
    }

    let test = EvalSet::build(&store, &division.test, cfg.batch_size)?;
    let preds = predict_eval_set(&model, &test)?;
    let metrics = score_predictions(&preds, &test.label_indices)?;
    println!("test AUC {:.4}, TPR {:.4}", metrics.auc, metrics.tpr);
    Ok(())
}
