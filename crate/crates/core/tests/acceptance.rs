//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stdout
//! (bypassing the test harness capture) and then asserts the criterion.

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mlsda::channel::{ChannelModel, SoftObservation};
use mlsda::code::{CodeSpec, Message};
use mlsda::decoder::{decode, Decoder, DecoderConfig, Limit};
use mlsda::exponents::{elimination_window, nats_to_bits, truncation_window, Bsc, Dmc, GallagerChannel};
use mlsda::reference::{exhaustive_ml, viterbi_decode};
use mlsda::sim::{
    paired_difference, run_pair, run_sweep, run_trials, write_csv, EpsilonMap, SimConfig, SimRecord, Sweep,
    TrialOutcome,
};
use mlsda::stack::{Handle, OpenStack, PriorityKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K7: &str = "554,774";
const K9_R3: &str = "557,663,711";
const FIG9_MAX: f64 = 125.42;

fn report(id: u32, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {id:>2} {tag}: {detail}").unwrap();
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn errors(outcomes: &[TrialOutcome]) -> u64 {
    outcomes.iter().map(|o| u64::from(o.bit_errors)).sum()
}

fn ber(outcomes: &[TrialOutcome], msg_len: usize) -> f64 {
    errors(outcomes) as f64 / (outcomes.len() * msg_len) as f64
}

fn branches_per_bit(outcomes: &[TrialOutcome], msg_len: usize) -> f64 {
    outcomes.iter().map(|o| o.branch_computations).sum::<u64>() as f64 / (outcomes.len() * msg_len) as f64
}

/// Runs `cfg.deltas[reference]` at `point` until `target` errors (or
/// `cfg.trials`), then the other windows on exactly the same trials.
fn paired_runs(cfg: &SimConfig, point: usize, reference: usize, target: u64) -> Vec<Vec<TrialOutcome>> {
    let code = cfg.code_spec().unwrap();
    let mut stop = cfg.clone();
    stop.target_errors = Some(target);
    let base = run_pair(&stop, &code, point, reference).unwrap();
    let n = base.len() as u64;
    (0..cfg.deltas.len())
        .map(|d| if d == reference { base.clone() } else { run_trials(cfg, &code, point, d, 0..n).unwrap() })
        .collect()
}

#[test]
fn criterion_01_window_rate_half() {
    let ((rule, r0), t) = timed(|| {
        let ch = Bsc::new(0.045).unwrap();
        (elimination_window(&ch, ch.cutoff_rate(), 6).unwrap(), ch.cutoff_rate())
    });
    let pass = (1.98..=2.02).contains(&rule.ratio) && rule.min_len == 15 && t < Duration::from_secs(1);
    report(
        1,
        pass,
        &format!(
            "eps=0.045 R=R0={:.6} bits m=6: ratio {:.5} (want [1.98, 2.02]), delta_min {} (want 15), {:.1} ms",
            nats_to_bits(r0),
            rule.ratio,
            rule.min_len,
            t.as_secs_f64() * 1e3
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_window_rate_third() {
    let ((rule, r0), t) = timed(|| {
        let ch = Bsc::new(0.095).unwrap();
        (elimination_window(&ch, ch.cutoff_rate(), 8).unwrap(), ch.cutoff_rate())
    });
    let pass = (0.98..=1.02).contains(&rule.ratio) && rule.min_len == 10 && t < Duration::from_secs(1);
    report(
        2,
        pass,
        &format!(
            "eps=0.095 R=R0={:.6} bits m=8: ratio {:.5} (want [0.98, 1.02]), delta_min {} (want 10), {:.1} ms",
            nats_to_bits(r0),
            rule.ratio,
            rule.min_len,
            t.as_secs_f64() * 1e3
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_low_rate_ratio() {
    let ((rule, r0), t) = timed(|| {
        let ch = Bsc::new(0.4).unwrap();
        (truncation_window(&ch, ch.cutoff_rate(), 6).unwrap(), nats_to_bits(ch.cutoff_rate()))
    });
    let pass = (5.79..=5.89).contains(&rule.ratio) && (r0 - 0.0146).abs() <= 0.0003 && t < Duration::from_secs(1);
    report(
        3,
        pass,
        &format!(
            "eps=0.4: ratio {:.5} (want [5.79, 5.89]), R0 {:.6} bits (want 0.0146 +- 0.0003), {:.1} ms",
            rule.ratio,
            r0,
            t.as_secs_f64() * 1e3
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_cutoff_rates() {
    let a = nats_to_bits(Bsc::new(0.045).unwrap().cutoff_rate());
    let b = nats_to_bits(Bsc::new(0.095).unwrap().cutoff_rate());
    let pass = (a - 0.4996).abs() <= 0.001 && (b - 0.3342).abs() <= 0.001;
    report(
        4,
        pass,
        &format!("R0(0.045) = {a:.6} bits (want 0.4996 +- 0.001), R0(0.095) = {b:.6} bits (want 0.3342 +- 0.001)"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_exhaustive_certificate() {
    let (mismatches, t) = timed(|| {
        let code = CodeSpec::new(vec![vec![1, 1, 1], vec![1, 0, 1]], 4).unwrap();
        let mut mismatches = 0;
        for y in 0u32..4096 {
            let obs = SoftObservation::hard((0..12).map(|i| ((y >> i) & 1) as u8).collect()).unwrap();
            let s = decode(&code, &obs, &DecoderConfig::unbounded(u64::from(y))).unwrap().metric;
            let v = viterbi_decode(&code, &obs).unwrap().metric;
            let e = exhaustive_ml(&code, &obs).unwrap().metric;
            if s != v || v != e {
                mismatches += 1;
            }
        }
        mismatches
    });
    let pass = mismatches == 0 && t < Duration::from_secs(10);
    report(
        5,
        pass,
        &format!("(2,1,2) L=4, 4096 observations: {mismatches} metric mismatches, {:.2} s", t.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_06_viterbi_certificate_at_scale() {
    let (summary, t) = timed(|| {
        let code = CodeSpec::from_octal(K7, 6, 64).unwrap();
        let mut decoder = Decoder::new(code.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut summary = Vec::new();
        for eps in [0.045, 0.095] {
            let ch = ChannelModel::bsc(eps).unwrap();
            let mut agree = 0;
            for trial in 0..10_000u64 {
                let msg = Message::new((0..64).map(|_| rng.random_range(0..2)).collect()).unwrap();
                let obs = ch.soften(&ch.transmit(&code.encode(&msg).unwrap(), &mut rng)).unwrap();
                let s = decoder.decode(&obs, &DecoderConfig::unbounded(trial)).unwrap().metric;
                if s == viterbi_decode(&code, &obs).unwrap().metric {
                    agree += 1;
                }
            }
            summary.push((eps, agree));
        }
        summary
    });
    let pass = summary.iter().all(|&(_, a)| a == 10_000) && t < Duration::from_secs(120);
    let detail: Vec<String> = summary.iter().map(|(e, a)| format!("eps={e}: {a}/10000 equal")).collect();
    report(6, pass, &format!("(2,1,6) L=64: {}, {:.1} s", detail.join(", "), t.as_secs_f64()));
    assert!(pass);
}

#[test]
fn criterion_07_early_elimination_fidelity() {
    let cfg = SimConfig {
        sweep: Sweep::Ebn0(vec![2.0, 3.0, 4.0]),
        deltas: vec![Limit::Finite(15), Limit::Unbounded],
        trials: 2_000_000,
        seed: 7,
        ..SimConfig::new(K7, 6, 200)
    };
    let mut pass = true;
    let mut lines = Vec::new();
    for point in 0..3 {
        // stop on the unbounded decoder, which has the fewest errors
        let runs = paired_runs(&cfg, point, 1, 300);
        let (w, full) = (&runs[0], &runs[1]);
        let p = paired_difference(w, full, 200);
        let ok = errors(w) >= 300 && errors(full) >= 300 && p.diff <= 3.0 * p.std_err;
        let cpb_ok = [w, full].iter().all(|o| (2.0..=FIG9_MAX).contains(&branches_per_bit(o, 200)));
        pass &= ok && cpb_ok;
        lines.push(format!(
            "{} dB: T={} errors {}/{} BER {:.3e} vs {:.3e}, diff {:.2e} <= 3se {:.2e}: {}",
            2 + point,
            p.trials,
            errors(w),
            errors(full),
            ber(w, 200),
            ber(full, 200),
            p.diff,
            3.0 * p.std_err,
            if ok && cpb_ok { "ok" } else { "no" }
        ));
    }
    report(7, pass, &format!("(2,1,6) L=200 eps=erfc(sqrt(Eb/N0))/2, delta 15 vs inf; {}", lines.join("; ")));
    assert!(pass);
}

/// Operating points for the Fig. 8 to 11 analogues use hard-decision BPSK at
/// the code rate, `eps = 1/2 erfc(sqrt(R Eb/N0))`.
fn rate_scaled(code: &str, m: usize) -> SimConfig {
    SimConfig { epsilon_map: EpsilonMap::RateScaled, ..SimConfig::new(code, m, 200) }
}

#[test]
fn criterion_08_underestimated_window() {
    let cfg = SimConfig {
        sweep: Sweep::Ebn0(vec![4.0]),
        deltas: vec![Limit::Finite(10), Limit::Finite(12), Limit::Finite(20), Limit::Unbounded],
        trials: 200_000,
        seed: 8,
        ..rate_scaled(K9_R3, 8)
    };
    // margin above 200 so that windows tied with the unbounded decoder also qualify
    let runs = paired_runs(&cfg, 0, 3, 280);
    let b: Vec<f64> = runs.iter().map(|o| ber(o, 200)).collect();
    let e: Vec<u64> = runs.iter().map(|o| errors(o)).collect();
    let ratio = b[0] / b[2];
    let p12 = paired_difference(&runs[1], &runs[3], 200);
    let enough = e.iter().all(|&x| x >= 200);
    let pass = enough && b[0] > b[2] && (1.0..=2.0).contains(&ratio) && p12.diff.abs() <= 3.0 * p12.std_err;
    report(
        8,
        pass,
        &format!(
            "(3,1,8) L=200 4 dB (eps {:.5}), T={}: BER d10 {:.3e}, d12 {:.3e}, d20 {:.3e}, inf {:.3e}; errors {:?}; \
             d10/d20 = {:.3} (want [1, 2]); |d12 - inf| = {:.2e} vs 3se {:.2e}",
            cfg.point(0, &cfg.code_spec().unwrap()).1,
            runs[3].len(),
            b[0],
            b[1],
            b[2],
            b[3],
            e,
            ratio,
            p12.diff.abs(),
            3.0 * p12.std_err
        ),
    );
    assert!(pass);
}

/// Shared by criteria 9 and 10.
fn six_and_twelve_db() -> &'static [SimRecord] {
    static RECORDS: OnceLock<Vec<SimRecord>> = OnceLock::new();
    RECORDS.get_or_init(|| {
        let cfg = SimConfig {
            sweep: Sweep::Ebn0(vec![6.0, 12.0]),
            deltas: vec![Limit::Finite(15), Limit::Unbounded],
            trials: 10_000,
            seed: 9,
            ..rate_scaled(K7, 6)
        };
        run_sweep(&cfg).unwrap()
    })
}

#[test]
fn criterion_09_complexity_envelope() {
    let records = six_and_twelve_db();
    let all_in = records.iter().all(|r| (2.0..=FIG9_MAX).contains(&r.avg_branch_computations_per_bit));
    let (w, full) = (records[0].avg_branch_computations_per_bit, records[1].avg_branch_computations_per_bit);
    let pass = all_in && (3.0..=9.0).contains(&w) && full >= 4.0 * w;
    let all: Vec<String> = records
        .iter()
        .map(|r| format!("{}dB/d{}={:.3}", r.ebn0_db.unwrap(), r.delta, r.avg_branch_computations_per_bit))
        .collect();
    report(
        9,
        pass,
        &format!(
            "(2,1,6) L=200 T=10000: 6 dB delta 15 {w:.3} (want [3, 9]), delta inf {full:.3} (want >= 4x = {:.3}); \
             all in [2, 125.42]: {all_in} ({})",
            4.0 * w,
            all.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_stack_statistics() {
    let records = six_and_twelve_db();
    let (w, full) = (records[0].p999_stack_size, records[1].p999_stack_size);
    let high = records[3].p999_stack_size;
    let pass = 3 * w <= full && high <= 202;
    report(
        10,
        pass,
        &format!("(2,1,6) L=200 T=10000: 6 dB p99.9 stack delta 15 {w}, delta inf {full} (want 3x <= inf); 12 dB delta inf {high} (want <= 202)"),
    );
    assert!(pass);
}

#[test]
fn criterion_11_openmax_robustness() {
    let unbounded = SimConfig {
        sweep: Sweep::Ebn0(vec![4.0, 5.0, 6.0]),
        deltas: vec![Limit::Finite(15)],
        trials: 500_000,
        seed: 11,
        ..rate_scaled(K7, 6)
    };
    let capped = SimConfig { openmax: Limit::Finite(256), ..unbounded.clone() };
    let code = unbounded.code_spec().unwrap();
    let mut pass = true;
    let mut lines = Vec::new();
    for point in 0..3 {
        let stop = SimConfig { target_errors: Some(300), ..unbounded.clone() };
        let base = run_pair(&stop, &code, point, 0).unwrap();
        let cap = run_trials(&capped, &code, point, 0, 0..base.len() as u64).unwrap();
        let p = paired_difference(&cap, &base, 200);
        let ok = p.diff.abs() <= 3.0 * p.std_err;
        pass &= ok;
        let failures = cap.iter().filter(|o| o.failed).count();
        lines.push(format!(
            "{} dB: T={} BER {:.3e} (openmax 256) vs {:.3e}, |diff| {:.2e} <= 3se {:.2e}, {failures} failures: {}",
            4 + point,
            p.trials,
            ber(&cap, 200),
            ber(&base, 200),
            p.diff.abs(),
            3.0 * p.std_err,
            if ok { "ok" } else { "no" }
        ));
    }
    report(11, pass, &format!("(2,1,6) L=200 delta 15: {}", lines.join("; ")));
    assert!(pass);
}

/// Reference order for the stack oracle: metric, then deeper first, then
/// tiebreak. Tiebreaks are unique, so the order is total.
type OracleKey = (i64, Reverse<u32>, u64);

fn stack_oracle_ops(seed: u64, ops: usize, cap: Option<usize>) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stack = OpenStack::new();
    stack.set_capacity_limit(cap);
    let mut oracle: BTreeMap<OracleKey, u32> = BTreeMap::new();
    let mut keys: HashMap<u32, OracleKey> = HashMap::new();
    let mut next_handle = 0u32;
    let mut next_tie = 0u64;
    for _ in 0..ops {
        match rng.random_range(0..10) {
            0..=4 => {
                let key = (rng.random_range(0..50i64), Reverse(rng.random_range(0..20u32)), next_tie);
                next_tie += 1 + rng.random_range(0..3);
                let h = next_handle;
                next_handle += 1;
                let evicted = stack.push(PriorityKey::new(key.0 as f64, key.1 .0, key.2), Handle(h));
                oracle.insert(key, h);
                keys.insert(h, key);
                let expect = match cap {
                    Some(c) if oracle.len() > c => oracle.pop_last().map(|(_, h)| h),
                    _ => None,
                };
                if evicted.map(|e| e.handle.0) != expect {
                    return false;
                }
            }
            5..=6 => {
                let got = stack.pop_best().ok().map(|e| e.handle.0);
                if got != oracle.pop_first().map(|(_, h)| h) {
                    return false;
                }
            }
            7 => {
                if stack.pop_worst().map(|e| e.handle.0) != oracle.pop_last().map(|(_, h)| h) {
                    return false;
                }
            }
            _ => {
                if next_handle == 0 {
                    continue;
                }
                let h = rng.random_range(0..next_handle);
                let live = keys.get(&h).is_some_and(|k| oracle.get(k) == Some(&h));
                match stack.remove(Handle(h)) {
                    Ok(e) if live && e.handle.0 == h => {
                        oracle.remove(&keys[&h]);
                    }
                    Err(_) if !live => {}
                    _ => return false,
                }
            }
        }
        if stack.len() != oracle.len()
            || stack.peek_best().map(|e| e.handle.0) != oracle.first_key_value().map(|(_, &h)| h)
            || stack.peek_worst().map(|e| e.handle.0) != oracle.last_key_value().map(|(_, &h)| h)
        {
            return false;
        }
    }
    true
}

fn random_channel(rng: &mut ChaCha8Rng) -> Box<dyn GallagerChannel> {
    if rng.random_bool(0.5) {
        return Box::new(Bsc::new(rng.random_range(0.001..0.499)).unwrap());
    }
    let (inputs, outputs) = (rng.random_range(2..5), rng.random_range(2..6));
    let mut t = vec![0.0; inputs * outputs];
    for i in 0..inputs {
        let col: Vec<f64> = (0..outputs).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = col.iter().sum();
        for j in 0..outputs {
            t[j * inputs + i] = col[j] / s;
        }
    }
    Box::new(Dmc::uniform(inputs, outputs, t).unwrap())
}

fn csv_without_wall_seconds(cfg: &SimConfig) -> Vec<u8> {
    let mut records = run_sweep(cfg).unwrap();
    for r in &mut records {
        r.wall_seconds = 0.0;
    }
    let mut buf = Vec::new();
    write_csv(&records, &mut buf).unwrap();
    buf
}

#[test]
fn criterion_12_property_suites() {
    let stack_ok = (0..4).all(|s| stack_oracle_ops(s, 10_000, None)) && stack_oracle_ops(9, 10_000, Some(16));

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let exponent_ok = (0..50).all(|_| {
        let ch = random_channel(&mut rng);
        (0..100).all(|i| {
            let rho = i as f64 / 99.0;
            ch.e1(rho) >= ch.e0(rho) - 1e-12
        })
    });

    // decoder assertions (metric monotone, no node expanded twice) are always
    // compiled in; these decodes exercise them with and without restrictions
    let code = CodeSpec::from_octal(K7, 6, 100).unwrap();
    let ch = ChannelModel::bsc(0.06).unwrap();
    let mut decoder = Decoder::new(code.clone());
    for trial in 0..300u64 {
        let msg = Message::new((0..100).map(|_| rng.random_range(0..2)).collect()).unwrap();
        let obs = ch.soften(&ch.transmit(&code.encode(&msg).unwrap(), &mut rng)).unwrap();
        let cfg = DecoderConfig::unbounded(trial)
            .with_delta(if trial % 2 == 0 { Limit::Finite(15) } else { Limit::Unbounded })
            .with_openmax(if trial % 3 == 0 { Limit::Finite(64) } else { Limit::Unbounded });
        let _ = decoder.decode(&obs, &cfg);
    }

    let cfg = SimConfig {
        sweep: Sweep::Ebn0(vec![2.0, 4.0]),
        deltas: vec![Limit::Finite(12), Limit::Unbounded],
        trials: 400,
        seed: 1212,
        ..SimConfig::new(K7, 6, 100)
    };
    let deterministic = csv_without_wall_seconds(&cfg) == csv_without_wall_seconds(&cfg);

    let pass = stack_ok && exponent_ok && deterministic;
    report(
        12,
        pass,
        &format!(
            "open stack vs oracle (5 x 10^4 ops): {stack_ok}; E1 >= E0 on 50 channels: {exponent_ok}; \
             decoder invariants asserted on 300 decodes: true; identical CSV across runs: {deterministic}"
        ),
    );
    assert!(pass);
}
