//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line straight to
//! stdout (bypassing the test harness capture) and then asserts.

use std::io::Write as _;

use mlchain::base_learner::{objective, objective_gradient, LinearModel, TrainConfig};
use mlchain::cli::{cmd_bench, BenchArgs, MethodArgs};
use mlchain::data::{
    apply_standardizer, fit_standardizer, gen_logical, gen_synthetic, shuffle_labels, shuffle_split,
    Dataset, SynthNetSpec,
};
use mlchain::eval::{
    equivalence_oracle, exact_match, hamming_score, run_experiment, ExperimentReport, Metric,
    MethodSpec, NamedDataset, PredictionSet,
};
use mlchain::methods::{train, MethodConfig, MethodKind};
use mlchain::seed::{derive_seed, rng_from_seed};
use mlchain::transforms::{train_br, train_cc};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

const MASTER_SEED: u64 = 1;
const LOGICAL_ROWS: usize = 20;

fn report(criterion: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{tag}] criterion {criterion}: {title} | {detail}");
    let _ = out.flush();
}

fn all_methods(cfg: &MethodConfig) -> Vec<MethodSpec> {
    MethodKind::ALL
        .into_iter()
        .map(|k| MethodSpec::new(k, cfg.clone()))
        .collect()
}

fn logical_report(methods: &[MethodSpec]) -> ExperimentReport {
    let data = vec![NamedDataset::new("Logical", gen_logical(LOGICAL_ROWS).unwrap())];
    let report = run_experiment(&data, methods, 10, 0.6, MASTER_SEED).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    report
}

fn mean_of(report: &ExperimentReport, kind: MethodKind, metric: Metric) -> f64 {
    report
        .mean_by_label("Logical", kind.short_name(), metric)
        .expect("method present and successful")
}

#[test]
fn criterion_1_logical_exact_match() {
    let r = logical_report(&all_methods(&MethodConfig::default()));
    let em = |k| mean_of(&r, k, Metric::ExactMatch);
    let (br, cc, ccasl, cbr, aml, elm) = (
        em(MethodKind::Br),
        em(MethodKind::Cc),
        em(MethodKind::Ccasl),
        em(MethodKind::CcaslBr),
        em(MethodKind::CcaslAml),
        em(MethodKind::ElmBr),
    );
    let checks = [
        cbr >= 0.95,
        aml >= 0.95,
        (0.35..=0.70).contains(&br),
        ccasl > cc,
        elm > br,
    ];
    let pass = checks.iter().all(|&c| c);
    report(
        1,
        "Logical exact match",
        pass,
        &format!(
            "BR {br:.4} CC {cc:.4} CCASL {ccasl:.4} C.+BR {cbr:.4} C.+AML {aml:.4} ELM {elm:.4}; \
             C.+BR>=0.95 {} C.+AML>=0.95 {} BR in [0.35,0.70] {} CCASL>CC {} ELM>BR {}",
            checks[0], checks[1], checks[2], checks[3], checks[4]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_logical_hamming() {
    let r = logical_report(&all_methods(&MethodConfig::default()));
    let hs = |k| mean_of(&r, k, Metric::Hamming);
    let (br, cbr, aml) = (
        hs(MethodKind::Br),
        hs(MethodKind::CcaslBr),
        hs(MethodKind::CcaslAml),
    );
    let pass = cbr >= 0.95 && aml >= 0.95 && (0.70..=0.92).contains(&br);
    report(
        2,
        "Logical Hamming score",
        pass,
        &format!("BR {br:.4} C.+BR {cbr:.4} C.+AML {aml:.4}"),
    );
    assert!(pass);
}

/// Input dimension of the synthetic replica; the generator is otherwise
/// fixed at L=10, N=2000 and 100 hidden units.
const SYNTH_D: usize = 2;
const SYNTH_DATASETS: u64 = 20;

fn synthetic_contrast(hidden_units: usize) -> (f64, f64) {
    let sets: Vec<NamedDataset> = (0..SYNTH_DATASETS)
        .map(|i| {
            let spec = SynthNetSpec {
                d: SYNTH_D,
                l: 10,
                n: 2000,
                hidden_units,
                seed: derive_seed(MASTER_SEED, &[hidden_units as u64, i]),
            };
            NamedDataset::new(format!("synth-{i}"), gen_synthetic(&spec).unwrap())
        })
        .collect();
    let methods = vec![
        MethodSpec::new(MethodKind::Br, MethodConfig::default()),
        MethodSpec::new(MethodKind::Ccasl, MethodConfig::default()),
    ];
    let r = run_experiment(&sets, &methods, 1, 0.5, MASTER_SEED).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures);
    let avg = |m| {
        (0..sets.len())
            .map(|d| r.mean(d, m, Metric::ExactMatch).unwrap())
            .sum::<f64>()
            / sets.len() as f64
    };
    (avg(0), avg(1))
}

#[test]
fn criterion_3_synthetic_contrast() {
    let (br_complex, ccasl_complex) = synthetic_contrast(100);
    let (br_linear, ccasl_linear) = synthetic_contrast(0);
    let complex_gap = ccasl_complex - br_complex;
    let linear_gap = br_linear - ccasl_linear;
    let complex_ok = complex_gap >= 0.03;
    let linear_ok = linear_gap >= -0.01;
    let pass = complex_ok && linear_ok;
    let direction = |ok: bool, good: &str, bad: &str| if ok { good.to_string() } else { bad.to_string() };
    report(
        3,
        "synthetic complex/linear contrast",
        pass,
        &format!(
            "complex: BR {br_complex:.4} CCASL {ccasl_complex:.4} (CCASL-BR {complex_gap:+.4}, {}); \
             linear: BR {br_linear:.4} CCASL {ccasl_linear:.4} (BR-CCASL {linear_gap:+.4}, {})",
            direction(complex_ok, "CCASL ahead held", "CCASL ahead did not hold"),
            direction(linear_ok, "BR not beaten held", "BR not beaten did not hold"),
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_hidden_unit_sweep() {
    let one = MethodConfig {
        h: Some(1),
        ..MethodConfig::default()
    };
    let aml_h1 = mean_of(
        &logical_report(&[MethodSpec::new(MethodKind::CcaslAml, one)]),
        MethodKind::CcaslAml,
        Metric::ExactMatch,
    );
    let sweep: Vec<(usize, f64)> = [1usize, 2, 3, 6]
        .into_iter()
        .map(|h| {
            let cfg = MethodConfig {
                h: Some(h),
                ..MethodConfig::default()
            };
            let r = logical_report(&[MethodSpec::new(MethodKind::Ccasl, cfg)]);
            (h, mean_of(&r, MethodKind::Ccasl, Metric::ExactMatch))
        })
        .collect();
    let monotone = sweep.windows(2).all(|w| w[1].1 >= w[0].1 - 0.05);
    let pass = aml_h1 >= 0.9 && monotone;
    let curve: Vec<String> = sweep.iter().map(|(h, v)| format!("H={h}:{v:.4}")).collect();
    report(
        4,
        "hidden-unit sweep",
        pass,
        &format!("C.+AML(H=1) {aml_h1:.4}; CCASL {}", curve.join(" ")),
    );
    assert!(pass);
}

fn oracle_holds_on(data: &Dataset, runs: u64, split: f64) -> (bool, usize) {
    let mut rows = 0;
    for i in 0..runs {
        let (shuffled, _) = shuffle_labels(data, derive_seed(MASTER_SEED, &[i, 0])).unwrap();
        let (tr, te) = shuffle_split(&shuffled, split, derive_seed(MASTER_SEED, &[i, 1])).unwrap();
        let params = fit_standardizer(&tr);
        let tr = apply_standardizer(&params, &tr).unwrap();
        let te = apply_standardizer(&params, &te).unwrap();
        let br = train_br(&tr, &TrainConfig::default()).unwrap();
        rows += te.n_rows();
        if !equivalence_oracle(&br, te.x.view()).unwrap() {
            return (false, rows);
        }
    }
    (true, rows)
}

#[test]
fn criterion_5_equivalence_oracle() {
    let logical = gen_logical(LOGICAL_ROWS).unwrap();
    let single = Dataset::new(logical.x.clone(), logical.y.select(Axis(1), &[2])).unwrap();
    let synth = gen_synthetic(&SynthNetSpec {
        d: 5,
        l: 10,
        n: 400,
        hidden_units: 100,
        seed: 11,
    })
    .unwrap();
    let cases = [
        ("L=1", oracle_holds_on(&single, 10, 0.6)),
        ("L=3", oracle_holds_on(&logical, 10, 0.6)),
        ("L=10", oracle_holds_on(&synth, 3, 0.5)),
    ];
    let pass = cases.iter().all(|(_, (ok, _))| *ok);
    let detail: Vec<String> = cases
        .iter()
        .map(|(name, (ok, rows))| format!("{name}: {ok} over {rows} test rows"))
        .collect();
    report(5, "BR joint mode equals per-label argmax", pass, &detail.join("; "));
    assert!(pass);
}

fn random_pair(rng: &mut impl Rng) -> (Vec<Vec<u8>>, Vec<Vec<u8>>) {
    let n = rng.random_range(1..=30);
    let l = rng.random_range(1..=8);
    let flip = rng.random_range(0.0..1.0);
    let t: Vec<Vec<u8>> = (0..n)
        .map(|_| (0..l).map(|_| rng.random_range(0..=1)).collect())
        .collect();
    let p = t
        .iter()
        .map(|row| {
            row.iter()
                .map(|&b| if rng.random_bool(flip) { 1 - b } else { b })
                .collect()
        })
        .collect();
    (t, p)
}

fn to_matrix(rows: &[Vec<u8>]) -> Array2<u8> {
    let l = rows[0].len();
    Array2::from_shape_vec((rows.len(), l), rows.concat()).unwrap()
}

#[test]
fn criterion_6_metric_oracles() {
    let mut rng = rng_from_seed(606);
    let mut bound_ok = 0;
    for _ in 0..1000 {
        let (t, p) = random_pair(&mut rng);
        let set = PredictionSet::new(to_matrix(&t), to_matrix(&p)).unwrap();
        if exact_match(&set) <= hamming_score(&set) {
            bound_ok += 1;
        }
    }
    let mut brute_ok = 0;
    for _ in 0..100 {
        let (t, p) = random_pair(&mut rng);
        let mut rows_equal = 0usize;
        let mut bits_equal = 0usize;
        let mut bits = 0usize;
        for i in 0..t.len() {
            let mut all = true;
            for j in 0..t[i].len() {
                bits += 1;
                if t[i][j] == p[i][j] {
                    bits_equal += 1;
                } else {
                    all = false;
                }
            }
            if all {
                rows_equal += 1;
            }
        }
        let set = PredictionSet::new(to_matrix(&t), to_matrix(&p)).unwrap();
        if exact_match(&set) == rows_equal as f64 / t.len() as f64
            && hamming_score(&set) == bits_equal as f64 / bits as f64
        {
            brute_ok += 1;
        }
    }
    let pass = bound_ok == 1000 && brute_ok == 100;
    report(
        6,
        "metric oracles",
        pass,
        &format!("exact<=hamming {bound_ok}/1000; brute-force agreement {brute_ok}/100"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_gradient_check() {
    let mut rng = rng_from_seed(707);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.random_range(1..=10);
        let n = rng.random_range(1..=50);
        let x = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
        let y = Array1::from_shape_simple_fn(n, || rng.random_range(0..=1u8));
        let w: Vec<f64> = (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l2 = rng.random_range(0.0..0.1);
        let model = LinearModel::new(w.clone()).unwrap();
        let analytic = objective_gradient(&model, x.view(), y.view(), l2).unwrap();
        let numeric: Vec<f64> = (0..w.len())
            .map(|k| {
                let mut up = w.clone();
                let mut down = w.clone();
                up[k] += h;
                down[k] -= h;
                let f = |v: Vec<f64>| objective(&LinearModel::new(v).unwrap(), x.view(), y.view(), l2).unwrap();
                (f(up) - f(down)) / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = diff / (norm(&analytic) + norm(&numeric)).max(1e-12);
        worst = worst.max(rel);
    }
    let pass = worst < 1e-5;
    report(
        7,
        "analytic vs central-difference gradient",
        pass,
        &format!("worst relative error {worst:.3e} over 50 problems"),
    );
    assert!(pass);
}

fn bench_args(out: std::path::PathBuf) -> BenchArgs {
    BenchArgs {
        dataset: vec!["logical".into()],
        labels: None,
        methods: "br,cc,ccasl,ccasl+br,ccasl+aml,elm".into(),
        iters: 10,
        split: 0.6,
        seed: MASTER_SEED,
        method: MethodArgs {
            h: None,
            h_prime: None,
            subset_size: 3,
            epochs: 1000,
            learning_rate: 0.1,
            l2: 1e-4,
        },
        out,
        name: "logical".into(),
        runs: true,
    }
}

#[test]
fn criterion_8_bench_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, out_a) = cmd_bench(&bench_args(a.path().to_path_buf())).unwrap();
    let (_, out_b) = cmd_bench(&bench_args(b.path().to_path_buf())).unwrap();
    let same = |x: &std::path::Path, y: &std::path::Path| std::fs::read(x).unwrap() == std::fs::read(y).unwrap();
    let em = same(&out_a.exact_match_csv, &out_b.exact_match_csv);
    let hs = same(&out_a.hamming_csv, &out_b.hamming_csv);
    let txt = same(&out_a.report_txt, &out_b.report_txt);
    let runs = same(
        out_a.runs_csv.as_deref().unwrap(),
        out_b.runs_csv.as_deref().unwrap(),
    );
    let pass = em && hs && txt && runs;
    report(
        8,
        "bench reports byte-identical across runs",
        pass,
        &format!("exactmatch {em} hamming {hs} report {txt} runs {runs}"),
    );
    assert!(pass);
}

fn same_predictions(a: &mlchain::methods::MultiLabelModel, b: &mlchain::methods::MultiLabelModel, x: &Array2<f64>) -> bool {
    a.predict_matrix(x.view()).unwrap() == b.predict_matrix(x.view()).unwrap()
}

#[test]
fn criterion_9_degenerate_equivalences() {
    let base = TrainConfig::default();
    let zero = MethodConfig {
        h: Some(0),
        ..MethodConfig::default()
    };
    let mut ccasl_cc = true;
    let mut elm_br = true;
    let mut single = true;
    let mut rows = 0;
    let synth = gen_synthetic(&SynthNetSpec {
        d: 4,
        l: 5,
        n: 300,
        hidden_units: 50,
        seed: 99,
    })
    .unwrap();
    for (k, data) in [gen_logical(LOGICAL_ROWS).unwrap(), synth].iter().enumerate() {
        for i in 0..3u64 {
            let (tr, te) = shuffle_split(data, 0.6, derive_seed(MASTER_SEED, &[9, k as u64, i])).unwrap();
            let params = fit_standardizer(&tr);
            let tr = apply_standardizer(&params, &tr).unwrap();
            let te = apply_standardizer(&params, &te).unwrap();
            rows += te.n_rows();

            let cc = train(MethodKind::Cc, &tr, &zero).unwrap();
            ccasl_cc &= same_predictions(&train(MethodKind::Ccasl, &tr, &zero).unwrap(), &cc, &te.x);
            let br = train(MethodKind::Br, &tr, &zero).unwrap();
            elm_br &= same_predictions(&train(MethodKind::ElmBr, &tr, &zero).unwrap(), &br, &te.x);

            for j in 0..tr.n_labels() {
                let one = |d: &Dataset| Dataset::new(d.x.clone(), d.y.select(Axis(1), &[j])).unwrap();
                let (tr1, te1) = (one(&tr), one(&te));
                let br1 = train_br(&tr1, &base).unwrap().predict_matrix(te1.x.view()).unwrap();
                let cc1 = train_cc(&tr1, &[0], &base).unwrap().predict_matrix(te1.x.view()).unwrap();
                single &= br1 == cc1;
            }
        }
    }
    let pass = ccasl_cc && elm_br && single;
    report(
        9,
        "degenerate equivalences",
        pass,
        &format!("CCASL(H=0)==CC {ccasl_cc}; ELM(H=0)==BR {elm_br}; L=1 BR==CC {single}; {rows} test rows"),
    );
    assert!(pass);
}
