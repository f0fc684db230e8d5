use pixbis_core::data::{Label, Pai};
use pixbis_core::metrics::{
    apcer_bpcer_acer, apcer_bpcer_acer_oriented, eer_threshold, eer_threshold_oriented, far_frr, hter,
    roc_points, roc_points_oriented, Polarity, ScoreRecord,
};
use proptest::prelude::*;

/// Direct transcription of the sweep: every midpoint of consecutive distinct
/// scores plus the two sentinels, rates counted record by record.
struct Oracle {
    tau: f64,
    eer: f64,
    apcer_per_pai: Vec<(Pai, f64)>,
    apcer: f64,
    bpcer: f64,
    acer: f64,
    far: f64,
    frr: f64,
    hter: f64,
}

fn counts(records: &[ScoreRecord], tau: f64) -> (f64, f64) {
    let (mut acc, mut na, mut rej, mut nb) = (0usize, 0usize, 0usize, 0usize);
    for r in records {
        if r.label == Label::Attack {
            na += 1;
            if r.score >= tau {
                acc += 1;
            }
        } else {
            nb += 1;
            if r.score < tau {
                rej += 1;
            }
        }
    }
    (acc as f64 / na as f64, rej as f64 / nb as f64)
}

fn oracle_candidates(records: &[ScoreRecord]) -> Vec<f64> {
    let mut s: Vec<f64> = records.iter().map(|r| r.score).collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.dedup();
    let mut c = vec![s[0] - f64::max(1.0, s[0].abs())];
    for i in 1..s.len() {
        let m = (s[i - 1] + s[i]) / 2.0;
        c.push(if m > s[i - 1] { m } else { s[i] });
    }
    c.push(s[s.len() - 1] + f64::max(1.0, s[s.len() - 1].abs()));
    c
}

fn oracle(dev: &[ScoreRecord], eval: &[ScoreRecord]) -> Oracle {
    let mut best: Option<(f64, f64, f64)> = None;
    for t in oracle_candidates(dev) {
        let (far, frr) = counts(dev, t);
        let gap = (far - frr).abs();
        let m = (far + frr) / 2.0;
        let take = match best {
            None => true,
            Some((g, bm, bt)) => gap < g || (gap == g && (m < bm || (m == bm && t < bt))),
        };
        if take {
            best = Some((gap, m, t));
        }
    }
    let (_, eer, tau) = best.unwrap();
    let mut apcer_per_pai = Vec::new();
    for pai in Pai::ATTACKS {
        let (mut n, mut acc) = (0usize, 0usize);
        for r in eval.iter().filter(|r| r.pai == pai) {
            n += 1;
            if r.score >= tau {
                acc += 1;
            }
        }
        if n > 0 {
            apcer_per_pai.push((pai, acc as f64 / n as f64));
        }
    }
    let apcer = apcer_per_pai.iter().map(|p| p.1).fold(0.0, f64::max);
    let (far, frr) = counts(eval, tau);
    Oracle {
        tau,
        eer,
        apcer,
        bpcer: frr,
        acer: (apcer + frr) / 2.0,
        far,
        frr,
        hter: (far + frr) / 2.0,
        apcer_per_pai,
    }
}

/// Record sets of 2..=200 entries with both classes and 1-4 PAIs. Scores come
/// from a coarse grid half the time so ties are common.
fn record_set() -> impl Strategy<Value = Vec<ScoreRecord>> {
    (1usize..=4, 2usize..=200, any::<bool>(), any::<u64>()).prop_map(|(npai, n, coarse, seed)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pais = &Pai::ATTACKS[..npai];
        (0..n)
            .map(|i| {
                let pai = match i {
                    0 => Pai::None,
                    1 => pais[0],
                    _ if rng.random_bool(0.4) => Pai::None,
                    _ => pais[rng.random_range(0..npai)],
                };
                let score = if coarse {
                    f64::from(rng.random_range(0..12u8)) / 11.0
                } else {
                    f64::from(rng.random::<f32>())
                };
                ScoreRecord {
                    video_id: format!("v{i}"),
                    label: pai.label(),
                    pai,
                    score,
                }
            })
            .collect()
    })
}

fn negated(records: &[ScoreRecord]) -> Vec<ScoreRecord> {
    records
        .iter()
        .map(|r| ScoreRecord {
            score: -r.score,
            ..r.clone()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matches_brute_force_sweep(dev in record_set(), eval in record_set()) {
        let o = oracle(&dev, &eval);
        let (tau, eer) = eer_threshold(&dev).unwrap();
        prop_assert_eq!(tau, o.tau);
        prop_assert_eq!(eer, o.eer);
        let iso = apcer_bpcer_acer(&eval, tau).unwrap();
        prop_assert_eq!(&iso.apcer_per_pai, &o.apcer_per_pai);
        prop_assert_eq!(iso.apcer, o.apcer);
        prop_assert_eq!(iso.bpcer, o.bpcer);
        prop_assert_eq!(iso.acer, o.acer);
        prop_assert_eq!(far_frr(&eval, tau).unwrap(), (o.far, o.frr));
        prop_assert_eq!(hter(&eval, tau).unwrap(), o.hter);
    }

    #[test]
    fn rates_are_fractions_and_apcer_is_worst(records in record_set()) {
        let (tau, eer) = eer_threshold(&records).unwrap();
        prop_assert!((0.0..=1.0).contains(&eer));
        let iso = apcer_bpcer_acer(&records, tau).unwrap();
        for &(_, a) in &iso.apcer_per_pai {
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(iso.apcer >= a);
        }
        prop_assert_eq!(iso.acer, (iso.apcer + iso.bpcer) / 2.0);
    }

    #[test]
    fn roc_is_monotone_with_full_endpoints(records in record_set()) {
        let roc = roc_points(&records).unwrap();
        let mut distinct: Vec<f64> = records.iter().map(|r| r.score).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        prop_assert_eq!(roc.len(), distinct.len() + 1);
        prop_assert_eq!((roc[0].far, roc[0].frr), (1.0, 0.0));
        let last = roc.last().unwrap();
        prop_assert_eq!((last.far, last.frr), (0.0, 1.0));
        for w in roc.windows(2) {
            prop_assert!(w[0].threshold < w[1].threshold);
            prop_assert!(w[1].far <= w[0].far);
            prop_assert!(w[1].frr >= w[0].frr);
        }
    }

    #[test]
    fn negating_scores_and_flipping_acceptance_changes_nothing(dev in record_set(), eval in record_set()) {
        let (tau, eer) = eer_threshold(&dev).unwrap();
        let (ntau, neer) = eer_threshold_oriented(&negated(&dev), Polarity::LowerIsBonafide).unwrap();
        prop_assert_eq!(ntau, -tau);
        prop_assert_eq!(neer, eer);
        let iso = apcer_bpcer_acer(&eval, tau).unwrap();
        let niso = apcer_bpcer_acer_oriented(&negated(&eval), ntau, Polarity::LowerIsBonafide).unwrap();
        prop_assert_eq!(niso, iso);
        let roc: Vec<_> = roc_points(&eval).unwrap().iter().map(|p| (p.far, p.frr)).collect();
        let nroc: Vec<_> = roc_points_oriented(&negated(&eval), Polarity::LowerIsBonafide)
            .unwrap()
            .iter()
            .map(|p| (p.far, p.frr))
            .rev()
            .collect();
        prop_assert_eq!(nroc, roc);
    }

    /// `x ↦ x³ + 2x + 5` is strictly increasing and keeps grid scores apart.
    #[test]
    fn strictly_monotone_transform_keeps_eer_and_roc(records in record_set()) {
        let f = |x: f64| x * x * x + 2.0 * x + 5.0;
        let moved: Vec<ScoreRecord> = records
            .iter()
            .map(|r| ScoreRecord { score: f(r.score), ..r.clone() })
            .collect();
        prop_assert_eq!(eer_threshold(&moved).unwrap().1, eer_threshold(&records).unwrap().1);
        let a: Vec<_> = roc_points(&records).unwrap().iter().map(|p| (p.far, p.frr)).collect();
        let b: Vec<_> = roc_points(&moved).unwrap().iter().map(|p| (p.far, p.frr)).collect();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn identical_scores_give_half_eer() {
    let records: Vec<ScoreRecord> = [Pai::None, Pai::None, Pai::ReplayMoire, Pai::PrintHalftone]
        .iter()
        .enumerate()
        .map(|(i, &pai)| ScoreRecord {
            video_id: format!("v{i}"),
            label: pai.label(),
            pai,
            score: 0.4,
        })
        .collect();
    assert_eq!(eer_threshold(&records).unwrap().1, 0.5);
    assert_eq!(oracle(&records, &records).eer, 0.5);
}

/// APCER 1.3% and BPCER 12.5% give ACER 6.9%.
#[test]
fn published_acer_arithmetic() {
    let acer = (0.013f64 + 0.125) / 2.0;
    assert_eq!(format!("{:.1}", acer * 100.0), "6.9");
    // 1000 attacks with 13 accepted, 8 bonafide with 1 rejected
    let mut records = Vec::new();
    for i in 0..1000 {
        records.push(ScoreRecord {
            video_id: format!("a{i}"),
            label: Label::Attack,
            pai: Pai::PrintHalftone,
            score: if i < 13 { 0.9 } else { 0.1 },
        });
    }
    for i in 0..8 {
        records.push(ScoreRecord {
            video_id: format!("b{i}"),
            label: Label::Bonafide,
            pai: Pai::None,
            score: if i == 0 { 0.1 } else { 0.9 },
        });
    }
    let iso = apcer_bpcer_acer(&records, 0.5).unwrap();
    assert_eq!(iso.apcer, 0.013);
    assert_eq!(iso.bpcer, 0.125);
    assert_eq!(iso.acer, acer);
    assert_eq!(format!("{:.1}", iso.acer * 100.0), "6.9");
}
