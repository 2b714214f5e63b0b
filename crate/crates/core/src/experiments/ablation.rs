use std::collections::HashSet;

use super::curves::CurvePoint;
use super::dataset::Dataset;
use super::train::{train_with_architecture, TrainReport};
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::nn::Architecture;

/// One network configuration of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub architecture: Architecture,
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub name: String,
    pub test_curve: Vec<(usize, f64)>,
    pub final_loss: Option<f64>,
    pub diverged: Option<usize>,
    pub steps: u64,
    pub seconds: f64,
}

impl VariantResult {
    fn from_report(name: String, r: &TrainReport) -> Self {
        Self {
            name,
            test_curve: r.test_curve.clone(),
            final_loss: r.final_test_loss(),
            diverged: r.diverged,
            steps: r.steps,
            seconds: r.seconds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub results: Vec<VariantResult>,
}

impl AblationReport {
    pub fn get(&self, name: &str) -> Option<&VariantResult> {
        self.results.iter().find(|r| r.name == name)
    }

    /// Test-loss curves per variant, plus a `<name>:diverged` row at the
    /// divergence epoch for every variant that blew up.
    pub fn to_points(&self) -> Vec<CurvePoint> {
        let mut out = Vec::new();
        for r in &self.results {
            out.extend(r.test_curve.iter().map(|&(e, l)| CurvePoint::new(r.name.clone(), e as f64, l, 0.0)));
            if let Some(e) = r.diverged {
                out.push(CurvePoint::new(format!("{}:diverged", r.name), e as f64, 1.0, 0.0));
            }
        }
        out
    }

    /// Wall-clock seconds per variant (`x` = optimizer steps).
    pub fn timing_points(&self) -> Vec<CurvePoint> {
        self.results
            .iter()
            .map(|r| CurvePoint::new(r.name.clone(), r.steps as f64, r.seconds, 0.0))
            .collect()
    }
}

fn with_depth(base: &Architecture, layers: usize) -> Architecture {
    let hidden = base.widths[1];
    let io = base.widths[0];
    let mut widths = vec![hidden; layers + 1];
    widths[0] = io;
    widths[layers] = io;
    Architecture { widths, ..base.clone() }
}

fn with_width(base: &Architecture, hidden: usize) -> Architecture {
    let n = base.widths.len();
    let mut widths = base.widths.clone();
    widths[1..n - 1].fill(hidden);
    Architecture { widths, ..base.clone() }
}

/// The base network followed by one-factor changes: each depth, each hidden
/// width, no BN, no skip and each activation swap. Variants identical to an
/// earlier one are dropped, so the base appears once.
pub fn ablation_variants(config: &ScenarioConfig) -> Vec<Variant> {
    let base = config.architecture();
    let a = &config.ablation;
    let mut out = vec![Variant {
        name: "base".into(),
        architecture: base.clone(),
    }];
    let mut push = |name: String, architecture: Architecture| {
        if !out.iter().any(|v| v.architecture == architecture) {
            out.push(Variant { name, architecture });
        }
    };
    for &l in &a.depths {
        push(format!("layers={l}"), with_depth(&base, l));
    }
    for &n in &a.widths {
        push(format!("neurons={n}"), with_width(&base, n));
    }
    if a.structure {
        push("no-bn".into(), Architecture { batch_norm: false, ..base.clone() });
        push("no-residual".into(), Architecture { residual: false, ..base.clone() });
    }
    for &act in &a.activations {
        push(format!("act={}", act.name()), Architecture { activation: act, ..base.clone() });
    }
    out
}

/// Trains every variant on the same data with the same seed for
/// `ablation.epochs` epochs. Diverged variants stay in the report.
pub fn ablation_suite(
    config: &ScenarioConfig,
    variants: &[Variant],
    train_set: &Dataset,
    test_set: &Dataset,
) -> Result<AblationReport> {
    let mut cfg = config.clone();
    cfg.train.epochs = config.ablation.epochs;
    cfg.train.eval_every = cfg.train.eval_every.min(cfg.train.epochs);
    let mut seen = HashSet::new();
    let mut results = Vec::new();
    for v in variants {
        if !seen.insert(v.name.clone()) {
            continue;
        }
        let r = train_with_architecture(&cfg, &v.architecture, train_set, test_set)?;
        results.push(VariantResult::from_report(v.name.clone(), &r));
    }
    Ok(AblationReport { results })
}

/// Training wall-clock per hidden width over `bench.epochs` epochs.
pub fn width_timing(
    config: &ScenarioConfig,
    widths: &[usize],
    train_set: &Dataset,
    test_set: &Dataset,
) -> Result<Vec<(usize, f64)>> {
    let mut cfg = config.clone();
    cfg.train.epochs = config.bench.epochs;
    cfg.train.eval_every = cfg.train.epochs;
    let base = config.architecture();
    widths
        .iter()
        .map(|&w| {
            let r = train_with_architecture(&cfg, &with_width(&base, w), train_set, test_set)?;
            Ok((w, r.seconds))
        })
        .collect()
}
