//! Seeded synthetic tabular data resembling a census income task.
//!
//! Ten features (seven numeric, three categorical), a binary protected
//! attribute `sex` correlated with some features, and an income label whose
//! log-odds carry an explicit bonus for one group.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{ColumnDef, ColumnKind, Schema};

#[derive(Clone, Debug)]
pub struct IncomeSpec {
    pub n: usize,
    pub seed: u64,
    /// Log-odds bonus for the privileged group.
    pub group_bias: f64,
    /// Fraction of `workclass` cells left missing.
    pub missing_rate: f64,
}

impl Default for IncomeSpec {
    fn default() -> Self {
        IncomeSpec {
            n: 5000,
            seed: 42,
            group_bias: 1.0,
            missing_rate: 0.02,
        }
    }
}

const SIGNAL: f64 = 1.6;
const INTERCEPT: f64 = -13.8;

const WORKCLASS: [&str; 4] = ["private", "self_emp", "government", "other"];
const MARITAL: [&str; 3] = ["married", "single", "divorced"];
const OCCUPATION: [&str; 5] = ["craft", "sales", "professional", "service", "clerical"];

pub fn income_schema() -> Schema {
    let num = |n: &str| ColumnDef {
        name: n.into(),
        kind: ColumnKind::Numeric,
    };
    let cat = |n: &str| ColumnDef {
        name: n.into(),
        kind: ColumnKind::Categorical,
    };
    Schema {
        columns: vec![
            num("age"),
            num("education_num"),
            num("hours_per_week"),
            num("capital_gain"),
            num("capital_loss"),
            num("tenure"),
            num("dependents"),
            cat("workclass"),
            cat("marital"),
            cat("occupation"),
            cat("sex"),
            cat("income"),
        ],
        target: "income".into(),
        protected: Some("sex".into()),
        positive_label: Some(">50K".into()),
        include_protected: false,
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// CSV text (with header) for the income-like task.
pub fn income_csv(spec: &IncomeSpec) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std: Normal<f64> = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = String::with_capacity(spec.n * 96);
    out.push_str("age,education_num,hours_per_week,capital_gain,capital_loss,tenure,dependents,workclass,marital,occupation,sex,income\n");
    for _ in 0..spec.n {
        let male = rng.random::<f64>() < 0.67;
        let age = (38.0 + 13.0 * std.sample(&mut rng))
            .clamp(17.0, 90.0)
            .round();
        let edu = (10.0 + 2.6 * std.sample(&mut rng)).clamp(1.0, 16.0).round();
        let hours_mu = if male { 42.0 } else { 36.0 };
        let hours = (hours_mu + 11.0 * std.sample(&mut rng))
            .clamp(1.0, 99.0)
            .round();
        let gain = if rng.random::<f64>() < 0.08 {
            (8.0 + 1.2 * std.sample(&mut rng))
                .exp()
                .round()
                .min(99_999.0)
        } else {
            0.0
        };
        let loss = if rng.random::<f64>() < 0.05 {
            (7.4 + 0.3 * std.sample(&mut rng)).exp().round()
        } else {
            0.0
        };
        let tenure = ((age - 17.0) * rng.random::<f64>()).round();
        let dependents = pick(&mut rng, &[0.4, 0.25, 0.2, 0.1, 0.05]) as f64;
        let work = pick(&mut rng, &[0.7, 0.1, 0.13, 0.07]);
        let marital = if male {
            pick(&mut rng, &[0.6, 0.28, 0.12])
        } else {
            pick(&mut rng, &[0.3, 0.45, 0.25])
        };
        let occ = if male {
            pick(&mut rng, &[0.3, 0.2, 0.25, 0.1, 0.15])
        } else {
            pick(&mut rng, &[0.08, 0.2, 0.25, 0.2, 0.27])
        };

        let mut logit = 0.045 * age + 0.32 * edu + 0.03 * hours - 0.0005 * (age - 45.0).powi(2);
        logit += if gain > 0.0 {
            1.8 + 0.25 * (gain.ln() - 8.0)
        } else {
            0.0
        };
        logit += if loss > 0.0 { 0.8 } else { 0.0 };
        logit += [0.0, 0.35, 0.25, -0.4][work];
        logit += [1.3, -0.9, -0.5][marital];
        logit += [0.0, 0.2, 0.7, -0.8, -0.2][occ];
        logit += 0.01 * tenure - 0.05 * dependents;
        // Interaction: education pays off more for professionals.
        if occ == 2 {
            logit += 0.15 * (edu - 10.0);
        }
        logit = SIGNAL * logit + INTERCEPT;
        if male {
            logit += spec.group_bias;
        }
        let positive = rng.random::<f64>() < 1.0 / (1.0 + (-logit).exp());

        let work_s = if rng.random::<f64>() < spec.missing_rate {
            "?"
        } else {
            WORKCLASS[work]
        };
        writeln!(
            out,
            "{age},{edu},{hours},{gain},{loss},{tenure},{dependents},{work_s},{},{},{},{}",
            MARITAL[marital],
            OCCUPATION[occ],
            if male { "male" } else { "female" },
            if positive { ">50K" } else { "<=50K" },
        )
        .expect("write to string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ingest_csv_str;

    #[test]
    fn shape_and_bias() {
        let spec = IncomeSpec::default();
        let csv = income_csv(&spec);
        let d = ingest_csv_str(&csv, &income_schema()).unwrap();
        assert_eq!(d.n_rows(), 5000);
        assert_eq!(d.n_sources(), 10);
        let groups = d.groups.as_ref().unwrap();
        let rate = |g: u8| {
            let idx: Vec<_> = (0..d.n_rows()).filter(|&i| groups[i] == g).collect();
            idx.iter().filter(|&&i| d.labels[i] == 1).count() as f64 / idx.len() as f64
        };
        let overall = d.labels.iter().filter(|&&y| y == 1).count() as f64 / 5000.0;
        assert!((0.15..0.4).contains(&overall), "positive rate {overall}");
        // Groups sort as female=0, male=1.
        assert!(rate(1) > rate(0) + 0.1);
        assert_eq!(income_csv(&spec), csv);
    }
}
