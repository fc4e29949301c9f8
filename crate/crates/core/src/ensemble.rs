//! Ensembles of five CNNs sharing a test set, plus the full
//! 5-division x 5-split experiment protocol and its report.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::data::{BatchStream, Division, EvalSet, ImageStore, PartitionPlan};
use crate::error::{Error, Result};
use crate::imaging::AugmentationConfig;
use crate::metrics::{auc_from_scores, roc_curve, tpr_at_threshold, DEFAULT_THRESHOLD};
use crate::nn::Model;
use crate::rng::derive_seed;
use crate::tensor::Tensor;
use crate::training::{
    build_model, predict, predict_eval_set, save_checkpoint, ArchitectureSpec, CheckpointMeta,
    Prediction, TrainingConfig, TrainingHistory,
};

/// Members per ensemble.
pub const ENSEMBLE_SIZE: usize = 5;

/// Five trained models that share one construction/test division.
pub struct Ensemble {
    pub arch: ArchitectureSpec,
    pub division: usize,
    pub members: Vec<Model<f32>>,
    pub member_seeds: Vec<u64>,
}

impl Ensemble {
    pub fn new(
        arch: ArchitectureSpec,
        division: usize,
        members: Vec<Model<f32>>,
        member_seeds: Vec<u64>,
    ) -> Result<Self> {
        if members.len() != ENSEMBLE_SIZE {
            return Err(Error::Config(format!(
                "an ensemble needs exactly {ENSEMBLE_SIZE} members, got {}",
                members.len()
            )));
        }
        Ok(Ensemble {
            arch,
            division,
            members,
            member_seeds,
        })
    }
}

/// Averages per-class probabilities across predictions of one sample.
pub fn average_predictions(per_member: &[Vec<Prediction>]) -> Vec<Prediction> {
    let n = per_member.len() as f64;
    let samples = per_member[0].len();
    (0..samples)
        .map(|i| {
            let p0 = per_member.iter().map(|m| m[i].probs[0]).sum::<f64>() / n;
            let p1 = per_member.iter().map(|m| m[i].probs[1]).sum::<f64>() / n;
            Prediction { probs: [p0, p1] }
        })
        .collect()
}

/// Ensemble prediction: the arithmetic mean of the five members' probability
/// pairs, which still sums to one per image.
pub fn ensemble_predict(ensemble: &Ensemble, images: &Tensor<f32>) -> Result<Vec<Prediction>> {
    let per_member: Vec<Vec<Prediction>> = ensemble
        .members
        .iter()
        .map(|m| predict(m, images))
        .collect::<Result<_>>()?;
    Ok(average_predictions(&per_member))
}

/// AUC and TPR of one model (or ensemble) on one evaluation set.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MetricsRow {
    pub auc: f64,
    pub tpr: f64,
}

pub fn score_predictions(preds: &[Prediction], labels: &[usize]) -> Result<MetricsRow> {
    let scores: Vec<f64> = preds.iter().map(|p| p.consolidation()).collect();
    Ok(MetricsRow {
        auc: auc_from_scores(&scores, labels)?,
        tpr: tpr_at_threshold(&scores, labels, DEFAULT_THRESHOLD)?,
    })
}

/// Everything produced by one trained member.
pub struct MemberOutcome {
    pub split: usize,
    pub seed: u64,
    pub model: Model<f32>,
    pub history: TrainingHistory,
    pub test_predictions: Vec<Prediction>,
    pub metrics: MetricsRow,
}

/// One division: five members plus ensemble results on the shared test set.
pub struct DivisionOutcome {
    pub division: usize,
    pub members: Vec<MemberOutcome>,
    pub ensemble_predictions: Vec<Prediction>,
    pub ensemble_metrics: MetricsRow,
    pub test_labels: Vec<usize>,
}

/// Seed for one ensemble member, derived from (experiment seed, division,
/// split) so any member is replayable in isolation.
pub fn member_seed(experiment_seed: u64, division: usize, split: usize) -> u64 {
    derive_seed(experiment_seed, &[0x3EED, division as u64, split as u64])
}

/// Trains the five members of one division from scratch (distinct seeds) and
/// evaluates each member and the ensemble on the shared test set.
pub fn run_division(
    store: &Arc<ImageStore>,
    division: &Division,
    division_idx: usize,
    arch: &ArchitectureSpec,
    cfg: &TrainingConfig,
    augmentation: Option<AugmentationConfig>,
) -> Result<DivisionOutcome> {
    let test_set = EvalSet::build(store, &division.test, cfg.batch_size)?;

    let members: Vec<MemberOutcome> = division
        .splits
        .par_iter()
        .enumerate()
        .map(|(split_idx, split)| {
            let run = || -> Result<MemberOutcome> {
                let seed = member_seed(cfg.seed, division_idx, split_idx);
                let mut member_cfg = *cfg;
                member_cfg.seed = seed;
                let mut model = build_model(arch, seed)?;
                let mut stream = BatchStream::new(
                    Arc::clone(store),
                    split.train.clone(),
                    augmentation,
                    cfg.batch_size,
                    seed,
                )?;
                let val = EvalSet::build(store, &split.validation, cfg.batch_size)?;
                let history = crate::training::train(&mut model, &mut stream, &val, &member_cfg)?;
                let test_predictions = predict_eval_set(&model, &test_set)?;
                let metrics = score_predictions(&test_predictions, &test_set.label_indices)?;
                Ok(MemberOutcome {
                    split: split_idx,
                    seed,
                    model,
                    history,
                    test_predictions,
                    metrics,
                })
            };
            run().map_err(|e| Error::Member {
                member: split_idx,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let per_member: Vec<Vec<Prediction>> =
        members.iter().map(|m| m.test_predictions.clone()).collect();
    let ensemble_predictions = average_predictions(&per_member);
    let ensemble_metrics = score_predictions(&ensemble_predictions, &test_set.label_indices)?;

    Ok(DivisionOutcome {
        division: division_idx,
        members,
        ensemble_predictions,
        ensemble_metrics,
        test_labels: test_set.label_indices,
    })
}

/// Sample mean and (n-1) standard deviation; the deviation is absent for
/// fewer than two values.
pub fn mean_and_sample_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct MemberReport {
    pub division: usize,
    pub split: usize,
    pub seed: u64,
    pub auc: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct DivisionReport {
    pub division: usize,
    pub members: Vec<MemberReport>,
    pub ensemble: MetricsRow,
    pub member_auc_mean: f64,
    pub member_auc_std: Option<f64>,
    pub member_tpr_mean: f64,
    pub member_tpr_std: Option<f64>,
}

/// Aggregate over all divisions, shaped like the paper's summary tables:
/// per-division rows plus an "Average" row with mean +/- sample std.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ExperimentReport {
    pub arch: String,
    pub divisions: Vec<DivisionReport>,
    pub ensemble_auc_mean: f64,
    pub ensemble_auc_std: Option<f64>,
    pub ensemble_tpr_mean: f64,
    pub ensemble_tpr_std: Option<f64>,
    pub member_auc_mean: f64,
    pub member_tpr_mean: f64,
}

impl ExperimentReport {
    fn from_outcomes(arch: &ArchitectureSpec, outcomes: &[DivisionOutcome]) -> Self {
        let divisions: Vec<DivisionReport> = outcomes
            .iter()
            .map(|o| {
                let aucs: Vec<f64> = o.members.iter().map(|m| m.metrics.auc).collect();
                let tprs: Vec<f64> = o.members.iter().map(|m| m.metrics.tpr).collect();
                let (auc_mean, auc_std) = mean_and_sample_std(&aucs);
                let (tpr_mean, tpr_std) = mean_and_sample_std(&tprs);
                DivisionReport {
                    division: o.division,
                    members: o
                        .members
                        .iter()
                        .map(|m| MemberReport {
                            division: o.division,
                            split: m.split,
                            seed: m.seed,
                            auc: m.metrics.auc,
                            tpr: m.metrics.tpr,
                        })
                        .collect(),
                    ensemble: o.ensemble_metrics,
                    member_auc_mean: auc_mean,
                    member_auc_std: auc_std,
                    member_tpr_mean: tpr_mean,
                    member_tpr_std: tpr_std,
                }
            })
            .collect();

        let ens_aucs: Vec<f64> = divisions.iter().map(|d| d.ensemble.auc).collect();
        let ens_tprs: Vec<f64> = divisions.iter().map(|d| d.ensemble.tpr).collect();
        let (ensemble_auc_mean, ensemble_auc_std) = mean_and_sample_std(&ens_aucs);
        let (ensemble_tpr_mean, ensemble_tpr_std) = mean_and_sample_std(&ens_tprs);
        let all_member_aucs: Vec<f64> = divisions
            .iter()
            .flat_map(|d| d.members.iter().map(|m| m.auc))
            .collect();
        let all_member_tprs: Vec<f64> = divisions
            .iter()
            .flat_map(|d| d.members.iter().map(|m| m.tpr))
            .collect();

        ExperimentReport {
            arch: arch.name(),
            divisions,
            ensemble_auc_mean,
            ensemble_auc_std,
            ensemble_tpr_mean,
            ensemble_tpr_std,
            member_auc_mean: mean_and_sample_std(&all_member_aucs).0,
            member_tpr_mean: mean_and_sample_std(&all_member_tprs).0,
        }
    }

    pub fn member_rows(&self) -> impl Iterator<Item = &MemberReport> {
        self.divisions.iter().flat_map(|d| d.members.iter())
    }

    /// CSV with one row per member, one per ensemble, then average rows.
    /// Divisions and splits are 1-based as in the tables.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "division,split,model,auc,tpr")?;
        for d in &self.divisions {
            for m in &d.members {
                writeln!(w, "{},{},member,{},{}", d.division + 1, m.split + 1, m.auc, m.tpr)?;
            }
            writeln!(w, "{},,ensemble,{},{}", d.division + 1, d.ensemble.auc, d.ensemble.tpr)?;
        }
        writeln!(w, "average,,members_mean,{},{}", self.member_auc_mean, self.member_tpr_mean)?;
        writeln!(
            w,
            "average,,ensemble_mean,{},{}",
            self.ensemble_auc_mean, self.ensemble_tpr_mean
        )?;
        if let (Some(a), Some(t)) = (self.ensemble_auc_std, self.ensemble_tpr_std) {
            writeln!(w, "average,,ensemble_std,{a},{t}")?;
        }
        Ok(())
    }

    /// Human-readable table in the layout of the paper's summary tables.
    pub fn write_table(&self, mut w: impl Write) -> std::io::Result<()> {
        let fmt_std = |std: Option<f64>| match std {
            Some(s) => format!(" ± {s:.3}"),
            None => String::new(),
        };
        writeln!(w, "Architecture: {}", self.arch)?;
        writeln!(
            w,
            "{:<10} {:<22} {:<22} {:<14} {:<14}",
            "Division", "Member AUC", "Member TPR", "Ensemble AUC", "Ensemble TPR"
        )?;
        for d in &self.divisions {
            writeln!(
                w,
                "{:<10} {:<22} {:<22} {:<14.3} {:<14.3}",
                d.division + 1,
                format!("{:.3}{}", d.member_auc_mean, fmt_std(d.member_auc_std)),
                format!("{:.3}{}", d.member_tpr_mean, fmt_std(d.member_tpr_std)),
                d.ensemble.auc,
                d.ensemble.tpr
            )?;
        }
        writeln!(
            w,
            "{:<10} {:<22} {:<22} {:<14} {:<14}",
            "Average",
            format!("{:.3}", self.member_auc_mean),
            format!("{:.3}", self.member_tpr_mean),
            format!("{:.3}{}", self.ensemble_auc_mean, fmt_std(self.ensemble_auc_std)),
            format!("{:.3}{}", self.ensemble_tpr_mean, fmt_std(self.ensemble_tpr_std))
        )?;
        Ok(())
    }
}

/// Writes one division's artifacts under
/// `<dir>/division_<d>/split_<s>/model.ckpt` plus histories, ROC curves, and
/// a metrics CSV.
pub fn write_division_artifacts(
    dir: &Path,
    outcome: &DivisionOutcome,
    arch: &ArchitectureSpec,
) -> Result<()> {
    let div_dir = dir.join(format!("division_{}", outcome.division + 1));
    for member in &outcome.members {
        let split_dir = div_dir.join(format!("split_{}", member.split + 1));
        std::fs::create_dir_all(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
        let meta = CheckpointMeta::from_history(*arch, member.seed, &member.history);
        save_checkpoint(split_dir.join("model.ckpt"), &member.model, &meta)?;

        let hist_path = split_dir.join("history.csv");
        let mut hist = Vec::new();
        member
            .history
            .write_csv(&mut hist)
            .map_err(|e| Error::io(&hist_path, e))?;
        std::fs::write(&hist_path, hist).map_err(|e| Error::io(&hist_path, e))?;

        let scores: Vec<f64> = member.test_predictions.iter().map(|p| p.consolidation()).collect();
        let roc = roc_curve(&scores, &outcome.test_labels)?;
        let roc_path = split_dir.join("roc.csv");
        let mut buf = Vec::new();
        roc.write_csv(&mut buf).map_err(|e| Error::io(&roc_path, e))?;
        std::fs::write(&roc_path, buf).map_err(|e| Error::io(&roc_path, e))?;
    }

    let scores: Vec<f64> = outcome
        .ensemble_predictions
        .iter()
        .map(|p| p.consolidation())
        .collect();
    let roc = roc_curve(&scores, &outcome.test_labels)?;
    let roc_path = div_dir.join("ensemble_roc.csv");
    let mut buf = Vec::new();
    roc.write_csv(&mut buf).map_err(|e| Error::io(&roc_path, e))?;
    std::fs::write(&roc_path, buf).map_err(|e| Error::io(&roc_path, e))?;

    let metrics_path = div_dir.join("metrics.csv");
    let mut csv = String::from("model,auc,tpr\n");
    for member in &outcome.members {
        csv.push_str(&format!(
            "member_{},{},{}\n",
            member.split + 1,
            member.metrics.auc,
            member.metrics.tpr
        ));
    }
    csv.push_str(&format!(
        "ensemble,{},{}\n",
        outcome.ensemble_metrics.auc, outcome.ensemble_metrics.tpr
    ));
    std::fs::write(&metrics_path, csv).map_err(|e| Error::io(&metrics_path, e))
}

/// Runs every division of the plan. Divisions run sequentially (members in
/// parallel); with `artifacts` set, each division's checkpoints and CSVs are
/// flushed to disk before the next division starts, so a failure preserves
/// partial results.
pub fn run_experiment(
    store: &Arc<ImageStore>,
    plan: &PartitionPlan,
    arch: &ArchitectureSpec,
    cfg: &TrainingConfig,
    augmentation: Option<AugmentationConfig>,
    artifacts: Option<&Path>,
) -> Result<ExperimentReport> {
    let mut outcomes = Vec::with_capacity(plan.divisions.len());
    for (d, division) in plan.divisions.iter().enumerate() {
        let outcome = run_division(store, division, d, arch, cfg, augmentation)?;
        if let Some(dir) = artifacts {
            write_division_artifacts(dir, &outcome, arch)?;
        }
        outcomes.push(outcome);
    }
    Ok(ExperimentReport::from_outcomes(arch, &outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(p1: f64) -> Prediction {
        Prediction {
            probs: [1.0 - p1, p1],
        }
    }

    #[test]
    fn average_is_the_arithmetic_mean() {
        let members: Vec<Vec<Prediction>> = [0.9, 0.8, 0.7, 0.6, 0.5]
            .iter()
            .map(|&p| vec![pred(p)])
            .collect();
        let avg = average_predictions(&members);
        assert!((avg[0].consolidation() - 0.7).abs() < 1e-12);
        assert!((avg[0].probs[0] + avg[0].probs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_members_average_to_themselves() {
        let members: Vec<Vec<Prediction>> = (0..5).map(|_| vec![pred(0.83), pred(0.21)]).collect();
        let avg = average_predictions(&members);
        for (got, want) in [(avg[0], pred(0.83)), (avg[1], pred(0.21))] {
            assert!((got.probs[0] - want.probs[0]).abs() < 1e-12);
            assert!((got.probs[1] - want.probs[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn average_is_bounded_by_member_extremes() {
        let ps = [0.12, 0.93, 0.4, 0.77, 0.5];
        let members: Vec<Vec<Prediction>> = ps.iter().map(|&p| vec![pred(p)]).collect();
        let avg = average_predictions(&members)[0].consolidation();
        let lo = ps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(avg >= lo && avg <= hi);
    }

    #[test]
    fn ensemble_requires_five_members() {
        let arch = ArchitectureSpec::ALL[3];
        let members: Vec<Model<f32>> = (0..3).map(|i| build_model(&arch, i).unwrap()).collect();
        assert!(Ensemble::new(arch, 0, members, vec![0, 1, 2]).is_err());
    }

    #[test]
    fn mean_std_hand_check() {
        let (mean, std) = mean_and_sample_std(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(mean, 3.0);
        assert!((std.unwrap() - (2.5f64).sqrt()).abs() < 1e-12);
        let (_, none) = mean_and_sample_std(&[1.0]);
        assert!(none.is_none());
    }

    #[test]
    fn member_seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for d in 0..5 {
            for s in 0..5 {
                assert!(seen.insert(member_seed(42, d, s)));
            }
        }
        assert_eq!(member_seed(42, 2, 3), member_seed(42, 2, 3));
    }
}
