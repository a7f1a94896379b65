//! End-to-end smoke run at reduced scale; prints the headline numbers for
//! each pipeline stage. Handy when tuning parameters.
//!
//! cargo run --release -p l0ward-core --example pipeline_probe

use std::time::Instant;

use l0ward_core::attack::{accuracy, train_target, AttackConfig};
use l0ward_core::detector::{make_pairs, train_siamese, SiameseOptions};
use l0ward_core::harness::{
    benign_impact, build_ae_dataset, defense_recovery, detection_run, AeDatasetSpec, AttackKind,
};
use l0ward_core::image::synth;
use l0ward_core::inpaint::{InpaintParams, Preprocessor};

fn main() {
    let t0 = Instant::now();
    let train = synth::generate(10_000, 1);
    let val = synth::generate(2_000, 2);
    let test = synth::generate(3_000, 3);
    println!("[{:?}] data generated", t0.elapsed());

    let (model, stats) = train_target(&train, &val, 3, 42).unwrap();
    for s in &stats {
        println!(
            "epoch {}: loss {:.4} val_acc {:.4}",
            s.epoch, s.train_loss, s.val_accuracy
        );
    }
    println!("[{:?}] target trained", t0.elapsed());

    let spec = AeDatasetSpec {
        train_benign: 150,
        train_ae: 150,
        test_benign: 100,
        test_ae: 100,
        attack: AttackKind::Jsma,
        theta: 1.0,
        budget_fraction: 0.1,
        seed: 9,
    };
    let ds = build_ae_dataset(&model, &test, &spec).unwrap();
    println!(
        "[{:?}] attacks: {} attempts, {} successes ({:.1}%)",
        t0.elapsed(),
        ds.attack_attempts,
        ds.attack_successes,
        100.0 * ds.attack_successes as f64 / ds.attack_attempts as f64
    );

    let params = InpaintParams::gray();
    let rec = defense_recovery(&model, &params, &ds.test).unwrap();
    println!("recovery on test AEs: {:?}", rec);
    let imp = benign_impact(&model, &params, &ds.test).unwrap();
    println!(
        "benign impact: {:.4} -> {:.4} (delta {:.4})",
        imp.original_accuracy, imp.processed_accuracy, imp.delta
    );

    let pp = Preprocessor::Inpaint(params);
    let tagged: Vec<_> = ds.train.iter().map(|i| (i.image.clone(), i.adversarial)).collect();
    let train_pairs = make_pairs(&tagged, &pp).unwrap();
    let tagged: Vec<_> = ds.test.iter().map(|i| (i.image.clone(), i.adversarial)).collect();
    let val_pairs = make_pairs(&tagged, &pp).unwrap();
    let opts = SiameseOptions {
        margin: 1.0,
        epochs: 4,
        patience: 2,
        min_delta: 0.001,
        seed: 5,
        softmax_head: true,
    };
    let (det, dstats) = train_siamese(&train_pairs, &val_pairs, &pp, &opts).unwrap();
    for s in &dstats {
        println!(
            "detector epoch {}: loss {:.4} val_acc {:.4} tau {:.4}",
            s.epoch, s.train_loss, s.val_accuracy, s.val_tau
        );
    }
    let (_, report) = detection_run(&det, &pp, &ds.test).unwrap();
    println!(
        "[{:?}] detection: recall {:.4} fpr {:.4} acc {:.4} auc {:?}",
        t0.elapsed(),
        report.recall,
        report.fpr,
        report.accuracy,
        report.roc_auc
    );

    let final_val = accuracy(&model, &val).unwrap();
    println!("final val accuracy: {final_val:.4}");
    let _ = AttackConfig::default();
}
