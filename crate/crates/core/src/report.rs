//! Human-readable structured text rendering of the pipeline outputs. Every
//! report embeds the resolved configuration, the seeds, the library version
//! and the names of the retention rules applied, and is byte-stable for a
//! fixed input regardless of thread count.

use crate::confset::{ModelConfidenceSet, PredictionTable};
use crate::reduction::{ReductionOutcome, StabilityReport};
use crate::simulation::ExperimentReport;
use crate::stats::SigmaMode;
use std::fmt::Write as _;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sigma_mode_label(mode: &SigmaMode) -> String {
    match mode {
        SigmaMode::Known(s) => format!("known({s})"),
        SigmaMode::Estimate => "estimate".into(),
    }
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key} = {value}");
}

fn fmt_set(set: &std::collections::BTreeSet<usize>) -> String {
    let items: Vec<String> = set.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

pub fn render_reduction(outcome: &ReductionOutcome, stability: &StabilityReport) -> String {
    let mut s = String::new();
    let cfg = &outcome.config;
    let _ = writeln!(s, "# reduction trace (coxset {VERSION})");
    kv(
        &mut s,
        "rule.round1",
        format!(
            "top-{}-in->={}-of-{}",
            cfg.top_m, cfg.fibre_vote_round1, cfg.dims_round1
        ),
    );
    kv(
        &mut s,
        "rule.round2",
        format!(
            "significant-at-{}-in->=ceil(d/2)-of-{}",
            cfg.alpha, cfg.dims_round2
        ),
    );
    kv(
        &mut s,
        "rule.vote",
        format!(">={} of {} runs", cfg.votes_needed(), cfg.rerandomisations),
    );
    kv(&mut s, "config.seed", cfg.seed);
    kv(&mut s, "config.sigma", sigma_mode_label(&cfg.sigma));
    kv(&mut s, "config.pair_threshold", cfg.pair_threshold);
    kv(&mut s, "config.subsample_fraction", cfg.subsample_fraction);
    kv(&mut s, "data.n", outcome.n);
    kv(&mut s, "data.p", outcome.p);
    kv(&mut s, "split.part_one", outcome.subsample.0.len());
    kv(&mut s, "split.part_two", outcome.subsample.1.len());
    kv(&mut s, "pairing.groups", outcome.groups.groups.len());
    kv(
        &mut s,
        "pairing.multi_member",
        outcome.groups.multi_member_groups(),
    );
    for run in &outcome.runs {
        let _ = writeln!(
            s,
            "run {} | rounds={} | round1_survivors={} | retained={} | skipped_fibres={} | seeds={:?}",
            run.run,
            run.rounds_run,
            run.round1_survivors.len(),
            fmt_set(&run.retained),
            run.skipped_fibres,
            run.arrangement_seeds,
        );
    }
    kv(&mut s, "comprehensive", fmt_set(&outcome.comprehensive));
    kv(&mut s, "comprehensive.size", outcome.comprehensive.len());
    if stability.applicable {
        kv(
            &mut s,
            "stability.mean_jaccard",
            format!("{:.4}", stability.mean_jaccard),
        );
        kv(&mut s, "stability.fragile", stability.fragile);
        for (a, b, v) in &stability.pairwise {
            let _ = writeln!(s, "stability.jaccard[{a},{b}] = {v:.4}");
        }
        for (idx, freq) in &stability.retention_frequency {
            let _ = writeln!(s, "stability.retention[{idx}] = {freq:.2}");
        }
    } else {
        kv(&mut s, "stability", "not applicable (single run)");
    }
    s
}

pub fn render_confidence_set(mcs: &ModelConfidenceSet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# model confidence set (coxset {VERSION})");
    kv(&mut s, "theta_level", mcs.theta_level);
    kv(&mut s, "s_max", mcs.s_max);
    kv(
        &mut s,
        "comprehensive",
        format!(
            "{{{}}}",
            mcs.comprehensive
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    kv(&mut s, "comprehensive.rank", mcs.comprehensive_rank);
    kv(&mut s, "models.tested", mcs.tested);
    kv(&mut s, "models.accepted", mcs.accepted_count);
    let _ = writeln!(s, "members | w | df | accepted");
    for rec in &mcs.records {
        let members: Vec<String> = rec.members.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(
            s,
            "[{}] | {:.6} | {} | {}",
            members.join(" "),
            rec.w,
            rec.df,
            rec.accepted
        );
    }
    s
}

pub fn render_intervals(table: &PredictionTable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# prediction intervals (coxset {VERSION})");
    kv(&mut s, "level", table.level);
    let _ = writeln!(s, "members | centre | half_width");
    for row in &table.rows {
        let members: Vec<String> = row.members.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(
            s,
            "[{}] | {:.6} | {:.6}",
            members.join(" "),
            row.centre,
            row.half_width
        );
    }
    for (members, reason) in &table.omitted {
        let m: Vec<String> = members.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "omitted [{}]: {}", m.join(" "), reason);
    }
    s
}

pub fn render_experiment(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# experiment: {} (coxset {VERSION})", report.name);
    kv(&mut s, "replicates", report.replicates);
    kv(&mut s, "seed", report.seed);
    for note in &report.notes {
        let _ = writeln!(s, "note: {note}");
    }
    let _ = writeln!(s, "estimate | value | se | target | rule | pass");
    for e in &report.estimates {
        let target = e
            .target
            .map(|t| format!("{t:.6}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{} | {:.6} | {:.6} | {} | {} | {}",
            e.label,
            e.value,
            e.se,
            target,
            e.rule,
            if e.pass { "pass" } else { "FAIL" }
        );
    }
    kv(&mut s, "overall", if report.pass { "pass" } else { "FAIL" });
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{cox_reduce, stability_report, ReductionConfig};
    use crate::rng::rng_from;
    use nalgebra::DVector;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn reduction_report_contains_rules_and_seeds() {
        let mut rng = rng_from(811);
        let x = crate::linalg::centre_matrix(&nalgebra::DMatrix::from_fn(60, 20, |_, _| {
            rng.sample(StandardNormal)
        }))
        .unwrap()
        .values;
        let noise: DVector<f64> = DVector::from_fn(60, |_, _| rng.sample(StandardNormal));
        let y = crate::linalg::centre_vector(&(x.column(0).into_owned() * 2.0 + noise))
            .unwrap()
            .0;
        let cfg = ReductionConfig {
            rerandomisations: 2,
            alpha: 0.05,
            seed: 4,
            ..ReductionConfig::default()
        };
        let outcome = cox_reduce(&y, &x, &cfg).unwrap();
        let text = render_reduction(&outcome, &stability_report(&outcome));
        assert!(text.contains("rule.round1 = top-2-in->=2-of-3"));
        assert!(text.contains("config.seed = 4"));
        assert!(text.contains("comprehensive"));
        // byte-stable
        let again = render_reduction(&outcome, &stability_report(&outcome));
        assert_eq!(text, again);
    }
}
