use std::fmt::Write as _;

use super::cv::EvalReport;
use super::metrics::MetricSet;
use crate::kernel::KernelKind;
use crate::subspace::{Method, TrainConfig};

/// Short model label used in reports, e.g. `MS-SVDD-CK_ds1`.
pub fn model_name(config: &TrainConfig, n_modalities: usize) -> String {
    match config.method {
        Method::Svdd => "SVDD".into(),
        Method::OcSvm => "OC-SVM".into(),
        Method::Subspace => {
            if config.effective_modalities(n_modalities) == 1 {
                return "S-SVDD".into();
            }
            let suffix = if config.kernelized && config.kernel.kind == KernelKind::Composite {
                "-CK"
            } else {
                ""
            };
            format!("MS-SVDD{suffix}_{}", config.decision_strategy.name())
        }
    }
}

/// Update-strategy and regularizer column labels for the summary table.
pub fn strategy_columns(config: &TrainConfig, n_modalities: usize) -> (String, String) {
    if config.method == Method::Subspace {
        let os = if config.effective_modalities(n_modalities) == 1 {
            match config.update_strategy.direction(0) {
                crate::subspace::Direction::Descent => "-",
                crate::subspace::Direction::Ascent => "+",
            }
            .to_string()
        } else {
            config.update_strategy.symbol().to_string()
        };
        (os, config.regularizer.symbol().to_string())
    } else {
        ("-".into(), "-".into())
    }
}

const CSV_HEADER: &str =
    "row,d,c,eta,beta,sigma,os,r,ds,tp,fn,fp,tn,sen,spe,pre,f1,acc,gm,max_orthonormality_error";

/// Hyperparameter cells of one fold's configuration.
fn config_cells(config: &TrainConfig, n_modalities: usize) -> String {
    let (os, reg) = strategy_columns(config, n_modalities);
    let sigma = if config.kernelized && config.kernel.kind != KernelKind::Linear {
        format!("{}", config.kernel.sigma)
    } else {
        String::new()
    };
    format!(
        "{},{},{},{},{},{},{},{}",
        config.d,
        config.c_penalty,
        config.eta,
        config.beta,
        sigma,
        os,
        reg,
        config.decision_strategy.name()
    )
}

fn metric_cells(m: &MetricSet) -> String {
    m.as_array()
        .iter()
        .map(|x| format!("{x:.6}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// One row per fold with that fold's configuration, then the fold mean and
/// the pooled confusion matrix. Fixed six-decimal formatting keeps the
/// output byte-stable.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for f in &report.folds {
        let c = &f.confusion;
        let _ = writeln!(
            out,
            "fold{},{},{},{},{},{},{},{:.3e}",
            f.fold,
            config_cells(&f.config, report.n_modalities),
            c.tp,
            c.fn_,
            c.fp,
            c.tn,
            metric_cells(&f.metrics),
            f.max_orthonormality_error
        );
    }
    let _ = writeln!(out, "mean,,,,,,,,,,,,,{},", metric_cells(&report.mean));
    let p = &report.pooled;
    let _ = writeln!(
        out,
        "pooled,,,,,,,,,{},{},{},{},{},{:.3e}",
        p.tp,
        p.fn_,
        p.fp,
        p.tn,
        metric_cells(&report.pooled_metrics),
        report.max_orthonormality_error()
    );
    out
}

/// Fixed-width summary with percentages to two decimals, one line per
/// report. The OS and r columns come from each report's first fold.
pub fn summary_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:>4} {:>5} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "Model", "OS", "r", "Sen", "Spe", "Pre", "F1", "Acc", "GM"
    );
    for r in reports {
        let (os, reg) = r
            .folds
            .first()
            .map(|f| strategy_columns(&f.config, r.n_modalities))
            .unwrap_or_else(|| ("-".into(), "-".into()));
        let m = r.mean.as_array().map(|x| x * 100.0);
        let _ = writeln!(
            out,
            "{:<18} {:>4} {:>5} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2}",
            r.name, os, reg, m[0], m[1], m[2], m[3], m[4], m[5]
        );
    }
    out
}
