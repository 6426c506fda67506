//! Metrics CSV (`run,epoch,split,metric,value`) and the per-epoch
//! aggregate table.

use crossling_core::classifier::{EvalMetrics, TrainRunResult};
use crossling_core::eval::Aggregate;

pub const HEADER: &str = "run,epoch,split,metric,value";

/// `v` rounded to 6 significant digits, printed in its shortest form.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("scientific format parses");
    format!("{rounded}")
}

fn push_eval(out: &mut String, run: usize, epoch: usize, m: &EvalMetrics) {
    for (name, v) in [("loss", m.loss), ("accuracy", m.accuracy), ("macro_f1", m.macro_f1)] {
        out.push_str(&format!("{run},{epoch},eval,{name},{}\n", sig6(v)));
    }
}

/// One CSV for all runs. Epoch 0 holds the eval metrics before training.
pub fn metrics_csv(results: &[TrainRunResult]) -> String {
    let mut out = format!("{HEADER}\n");
    for (run, r) in results.iter().enumerate() {
        push_eval(&mut out, run, 0, &r.initial);
        for e in &r.epochs {
            out.push_str(&format!("{run},{},train,loss,{}\n", e.epoch, sig6(e.train_loss)));
            push_eval(
                &mut out,
                run,
                e.epoch,
                &EvalMetrics {
                    loss: e.eval_loss,
                    accuracy: e.eval_accuracy,
                    macro_f1: e.eval_macro_f1,
                },
            );
        }
    }
    out
}

/// Per-epoch loss log of embedding training.
pub fn loss_csv(losses: &[f64]) -> String {
    let mut out = format!("{HEADER}\n");
    for (e, l) in losses.iter().enumerate() {
        out.push_str(&format!("0,{},train,loss,{}\n", e + 1, sig6(*l)));
    }
    out
}

pub fn aggregate_csv(agg: &Aggregate) -> String {
    let mut out = String::from("metric,epoch,mean,min,max\n");
    for (metric, bands) in agg {
        for (e, b) in bands.iter().enumerate() {
            out.push_str(&format!(
                "{metric},{},{},{},{}\n",
                e + 1,
                sig6(b.mean),
                sig6(b.min),
                sig6(b.max)
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(11.0 / 15.0), "0.733333");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(123456789.0), "123457000");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(f64::NAN), "NaN");
    }

    #[test]
    fn csv_layout() {
        let r = TrainRunResult {
            seed: 0,
            initial: EvalMetrics {
                loss: 0.7,
                accuracy: 0.5,
                macro_f1: 1.0 / 3.0,
            },
            epochs: vec![],
            transfer: None,
        };
        let csv = metrics_csv(&[r]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines[3], "0,0,eval,macro_f1,0.333333");
    }
}
