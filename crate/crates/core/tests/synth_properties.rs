use dyad_core::classifiers::ModelFamily;
use dyad_core::data::BlockKind;
use dyad_core::selection::report::median;
use dyad_core::synth::RoleSignal;
use dyad_core::{generate_corpus, nested_cv, paper_shaped_preset, write_corpus, CvSettings, FusionMode, Grid, Role, SynthParams};

fn quick(seed: u64) -> CvSettings {
    CvSettings {
        k_outer: 5,
        k_inner: 3,
        seed,
        ..Default::default()
    }
}

fn negatives(corpus: &dyad_core::Corpus, role: Role) -> (usize, usize) {
    let n = corpus.partners(role).count();
    let neg = corpus.partners(role).filter(|p| p.label().is_negative()).count();
    (neg, n)
}

#[test]
fn class_rates_converge_to_priors() {
    let params = SynthParams {
        n_couples: 10_000,
        negative_rate_male: 0.1,
        negative_rate_female: 0.35,
        seed: 17,
        ..Default::default()
    };
    let corpus = generate_corpus(&params).unwrap();
    for role in Role::ALL {
        let (neg, n) = negatives(&corpus, role);
        assert_eq!(n, 10_000);
        let p = params.negative_rate(role);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let observed = neg as f64 / n as f64;
        assert!((observed - p).abs() <= 3.0 * sigma, "{role}: {observed} vs {p}");
    }
}

#[test]
fn preset_rates_fall_in_binomial_bounds() {
    let params = paper_shaped_preset();
    let corpus = generate_corpus(&params).unwrap();
    for role in Role::ALL {
        let (neg, n) = negatives(&corpus, role);
        let p = params.negative_rate(role);
        let (mean, sd) = (p * n as f64, (n as f64 * p * (1.0 - p)).sqrt());
        assert!((neg as f64 - mean).abs() <= 2.576 * sd, "{role}: {neg} of {n}");
    }
}

#[test]
fn records_carry_consistent_labels() {
    let corpus = generate_corpus(&SynthParams { n_couples: 300, seed: 5, retention_female: 0.8, ..Default::default() }).unwrap();
    for p in Role::ALL.iter().flat_map(|&r| corpus.partners(r)) {
        let m = p.mdmq();
        let mean = (m.good_bad() as f64 + m.happy_sad() as f64) / 2.0;
        assert_eq!(p.label().is_negative(), mean >= 3.5);
        assert!(p.linguistic().as_slice().iter().chain(p.paralinguistic().as_slice()).all(|v| v.is_finite()));
    }
}

#[test]
fn preset_is_byte_identical_per_seed() {
    let bytes = |seed: u64| {
        let mut out = Vec::new();
        write_corpus(&generate_corpus(&SynthParams { seed, ..paper_shaped_preset() }).unwrap(), &mut out).unwrap();
        out
    };
    let a = bytes(7);
    assert_eq!(a, bytes(7));
    assert_ne!(a, bytes(8));
}

#[test]
fn no_signal_means_chance() {
    let corpus = generate_corpus(&SynthParams { n_couples: 400, seed: 21, ..Default::default() }).unwrap();
    for family in ModelFamily::ALL {
        let report = nested_cv(&corpus, Role::Male, FusionMode::Baseline, &Grid::default_for(family), &quick(1)).unwrap();
        let ba = report.pooled_balanced_accuracy;
        assert!((ba - 0.5).abs() <= 0.05, "{family}: {ba}");
    }
}

#[test]
fn strong_self_signal_is_recovered() {
    let params = SynthParams {
        n_couples: 200,
        male: RoleSignal { self_signal: 1.0, ..Default::default() },
        noise_scale: 0.1,
        seed: 2,
        ..Default::default()
    };
    let corpus = generate_corpus(&params).unwrap();
    let report = nested_cv(&corpus, Role::Male, FusionMode::Baseline, &Grid::default_for(ModelFamily::LinearSvm), &quick(0)).unwrap();
    assert!(report.pooled_balanced_accuracy >= 0.95, "{}", report.pooled_balanced_accuracy);
}

/// Median over five seeds of (dyadic - Baseline) pooled balanced accuracy.
fn median_advantage(params: &SynthParams, role: Role, mode: FusionMode) -> f64 {
    let grid = Grid::default_for(ModelFamily::LinearSvm);
    let gaps: Vec<f64> = (1..=5)
        .map(|seed| {
            let corpus = generate_corpus(&SynthParams { seed, ..*params }).unwrap();
            let ba = |m| nested_cv(&corpus, role, m, &grid, &quick(seed)).unwrap().pooled_balanced_accuracy;
            ba(mode) - ba(FusionMode::Baseline)
        })
        .collect();
    median(&gaps)
}

#[test]
fn silent_partner_block_adds_nothing() {
    // male own features carry no signal, so the baseline sits at chance and
    // extra noise columns cannot pull it down
    let mut params = paper_shaped_preset();
    params.male.partner_paralinguistic = 0.0;
    let male = median_advantage(&params, Role::Male, FusionMode::WithPartnerParalinguistic);
    assert!(male.abs() <= 0.03, "male {male}");
}

/// Largest |t| over the coordinates of the partner's `kind` block, comparing
/// the target role's two classes.
fn max_partner_t(params: &SynthParams, target: Role, kind: BlockKind) -> f64 {
    let corpus = generate_corpus(params).unwrap();
    let mut groups: [Vec<&[f64]>; 2] = [Vec::new(), Vec::new()];
    for dyad in corpus.dyads() {
        if let (Some(own), Some(partner)) = (dyad.get(target), dyad.get(target.partner())) {
            groups[own.label().as_u8() as usize].push(partner.block(kind).as_slice());
        }
    }
    let stats = |rows: &[&[f64]], j: usize| {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var / n)
    };
    (0..kind.dim())
        .map(|j| {
            let (m0, v0) = stats(&groups[0], j);
            let (m1, v1) = stats(&groups[1], j);
            ((m1 - m0) / (v0 + v1).sqrt()).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn silent_partner_block_is_independent_of_the_label() {
    let mut params = SynthParams { n_couples: 3000, seed: 8, ..paper_shaped_preset() };
    params.female.partner_linguistic = 0.0;
    params.male.partner_paralinguistic = 0.0;
    // 768 or 176 null t statistics; 4.5 is exceeded with probability < 0.01
    let female = max_partner_t(&params, Role::Female, BlockKind::Linguistic);
    let male = max_partner_t(&params, Role::Male, BlockKind::Paralinguistic);
    assert!(female < 4.5, "female {female}");
    assert!(male < 4.5, "male {male}");

    let loud = SynthParams { n_couples: 3000, seed: 8, ..paper_shaped_preset() };
    assert!(max_partner_t(&loud, Role::Female, BlockKind::Linguistic) > 8.0);
    assert!(max_partner_t(&loud, Role::Male, BlockKind::Paralinguistic) > 8.0);
}
