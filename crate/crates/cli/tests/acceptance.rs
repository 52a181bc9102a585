//! Acceptance suite: one test per shipped criterion, each printing a
//! pass/fail line. Run with `cargo test --test acceptance -- --nocapture`
//! to see every line.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wansim::reproduce;
use wansim::runner;
use wansim_core::{
    compare_rates, energy_for_transfer, steady_state_throughput, Address, ContentDescriptor,
    CtrlKind, LinkSpec, LogRecord, MigrationEvent, NodeId, PowerProfile, RateWinner, Sim,
    SimTime, StartSpec, Topology, TransportParams, VmSpec,
};

fn verdict(n: u32, label: &str, ok: bool) {
    println!(
        "criterion {n} ({label}): {}",
        if ok { "pass" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} ({label}) failed");
}

#[test]
fn criterion_1_delay_sweep_trend() {
    let t0 = Instant::now();
    let report = reproduce::reproduce_table1().expect("preset runs");
    let elapsed = t0.elapsed();
    let ok = report.all_pass() && elapsed.as_secs_f64() < 10.0;
    for c in &report.checks {
        assert!(c.pass, "{}", c.label);
    }
    verdict(
        1,
        "normalized completion time trend over d sweep, <10 s runtime",
        ok,
    );
}

#[test]
fn criterion_2_ratio_at_500ms() {
    let report = reproduce::reproduce_fig5().expect("preset runs");
    verdict(2, "with/without accelerator time ratio at d=500 ms", report.all_pass());
}

#[test]
fn criterion_3_migration_slowdown_and_recovery() {
    let cfg = reproduce::preset_slowdown();

    let plain = runner::run_single(&cfg, None, false, true).expect("runs");
    let pre = plain.throughput_pre_bps.expect("pre-migration window");
    let post = plain.throughput_post_bps.expect("post-migration window");
    let ratio = post / pre;
    // RTT grows 5x after migration, so window-limited throughput drops to
    // one fifth.
    let slowdown_ok = (ratio - 0.2).abs() <= 0.2 * 0.2;

    let accel = runner::run_single(&cfg, None, true, true).expect("runs");
    let apre = accel.throughput_pre_bps.expect("pre-migration window");
    let apost = accel.throughput_post_bps.expect("post-migration window");
    let recovery_ok = (apost - apre).abs() <= 0.10 * apre;

    verdict(
        3,
        "post-migration throughput 1/5 without accelerator, restored with it",
        slowdown_ok && recovery_ok,
    );
}

fn measure_throughput(rwnd: u64, one_way_ms: u64, rate: u64) -> f64 {
    let specs = [LinkSpec {
        a: Address::new(0, 0),
        b: Address::new(1, 0),
        one_way_delay: SimTime::from_millis(one_way_ms),
        rate_bits_per_s: rate,
    }];
    let mut sim = Sim::new(Topology::build(&specs).unwrap());
    sim.listen(Address::new(1, 0));
    let params = TransportParams {
        rwnd_cap: rwnd,
        ..TransportParams::default()
    };
    let conn = sim
        .connect(Address::new(0, 0), Address::new(1, 0), params)
        .unwrap();
    let oracle = steady_state_throughput(rwnd, SimTime::from_millis(2 * one_way_ms), Some(rate))
        .unwrap();
    // Enough payload to stay busy past the measurement window.
    let total = (oracle / 8) * 40 + 1_000_000;
    let handle = sim.send_raw(conn, total);
    let t1 = SimTime::from_secs(10);
    let t2 = SimTime::from_secs(30);
    sim.run_until(t1);
    let d1 = sim.raw_transfer_delivered(handle);
    sim.run_until(t2);
    let d2 = sim.raw_transfer_delivered(handle);
    assert!(d2 > d1, "no progress at rwnd={rwnd} delay={one_way_ms} rate={rate}");
    (d2 - d1) as f64 * 8.0 / (t2 - t1).as_secs_f64()
}

#[test]
fn criterion_4_throughput_oracle_grid() {
    let mut combos: Vec<(u64, u64, u64)> = Vec::new();
    // Window-limited: 4 windows x 4 RTTs on a fast link.
    for rwnd in [16 * 1024u64, 64 * 1024, 256 * 1024, 1024 * 1024] {
        for one_way in [125u64, 250, 375, 500] {
            combos.push((rwnd, one_way, 100_000_000));
        }
    }
    // Rate-limited: big window, slow wire.
    for rate in [1_000_000u64, 2_000_000, 5_000_000, 8_000_000] {
        combos.push((1024 * 1024, 10, rate));
    }
    assert!(combos.len() >= 20);

    let mut all_ok = true;
    let mut includes_reference_point = false;
    for (rwnd, one_way, rate) in combos {
        let oracle =
            steady_state_throughput(rwnd, SimTime::from_millis(2 * one_way), Some(rate)).unwrap();
        if rwnd == 64 * 1024 && one_way == 250 {
            includes_reference_point = true;
            assert_eq!(oracle, 1_048_576);
        }
        let measured = measure_throughput(rwnd, one_way, rate);
        let err = (measured - oracle as f64).abs() / oracle as f64;
        if err >= 0.10 {
            eprintln!(
                "rwnd={rwnd} one_way={one_way}ms rate={rate}: measured {measured:.0} vs oracle {oracle} (err {err:.3})"
            );
            all_ok = false;
        }
    }
    verdict(
        4,
        "steady-state throughput within 10% of min(rate, window/RTT) on >=20 combos",
        all_ok && includes_reference_point,
    );
}

fn handover_sim(pre_one_way_ms: u64, post_one_way_ms: u64) -> Sim {
    let specs = [
        LinkSpec {
            a: Address::new(0, 0),
            b: Address::new(1, 0),
            one_way_delay: SimTime::from_millis(10),
            rate_bits_per_s: 100_000_000,
        },
        LinkSpec {
            a: Address::new(1, 1),
            b: Address::new(2, 0),
            one_way_delay: SimTime::from_millis(pre_one_way_ms - 10),
            rate_bits_per_s: 100_000_000,
        },
        LinkSpec {
            a: Address::new(1, 2),
            b: Address::new(3, 0),
            one_way_delay: SimTime::from_millis(post_one_way_ms - 10),
            rate_bits_per_s: 100_000_000,
        },
    ];
    Sim::new(Topology::build(&specs).unwrap())
}

#[test]
fn criterion_5_randomized_handover_continuity() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let client = Address::new(0, 0);
    let server_a = Address::new(2, 0);
    let server_b = Address::new(3, 0);
    for trial in 0..1000u32 {
        let pre = rng.gen_range(15..100u64);
        let post = rng.gen_range(15..400u64);
        let total = rng.gen_range(1..=1024 * 1024u64);
        let mig_start_ms = rng.gen_range(1_000..6_000u64);
        let mig_dur_ms = rng.gen_range(200..2_000u64);

        let mut sim = handover_sim(pre, post);
        sim.listen(server_a);
        sim.listen(server_b);
        let sess = sim
            .open_session(client, server_a, TransportParams::default())
            .unwrap();
        sim.schedule_transfer(
            sess,
            ContentDescriptor::opaque(total),
            StartSpec::At(SimTime::from_millis(500)),
        )
        .unwrap();
        let vm = VmSpec {
            vm_id: 0,
            current_addr: server_a,
            alternate_addr: server_b,
            host: NodeId(2),
        };
        let ev = MigrationEvent::new(
            SimTime::from_millis(mig_start_ms),
            SimTime::from_millis(mig_dur_ms),
            NodeId(3),
        );
        sim.schedule_migration(vm, ev, sess).unwrap();
        sim.run_to_quiescence(SimTime::from_secs(400));

        assert!(
            !sim.session_failure_occurred(sess),
            "trial {trial}: session failed (pre={pre} post={post} total={total})"
        );
        assert_eq!(
            sim.deliver_stream(sess),
            &[(0, total)],
            "trial {trial}: ledger has gaps or overlaps"
        );
        let (_, completed) = sim.session_transfer_times(sess).unwrap();
        assert!(completed.is_some(), "trial {trial}: transfer incomplete");

        // Notification ordering: address announce before completion signal,
        // then new connection, path switch, old-path teardown.
        let mut notify = None;
        let mut complete = None;
        let mut new_syn = None;
        let mut set_primary = None;
        let mut close_old = None;
        for rec in sim.log() {
            match *rec {
                LogRecord::Ctrl { kind: CtrlKind::NewAddrNotify, at, .. } => {
                    notify = notify.or(Some(at))
                }
                LogRecord::Ctrl { kind: CtrlKind::MigrationComplete, at, .. } => {
                    complete = complete.or(Some(at))
                }
                LogRecord::ConnSyn { at, .. } if complete.is_some() && new_syn.is_none() => {
                    new_syn = Some(at)
                }
                LogRecord::Ctrl { kind: CtrlKind::SetPrimary, at, .. } => {
                    set_primary = set_primary.or(Some(at))
                }
                LogRecord::Ctrl { kind: CtrlKind::CloseOld, at, .. } => {
                    close_old = close_old.or(Some(at))
                }
                _ => {}
            }
        }
        let (notify, complete, new_syn, set_primary, close_old) = (
            notify.unwrap(),
            complete.unwrap(),
            new_syn.unwrap(),
            set_primary.unwrap(),
            close_old.unwrap(),
        );
        assert!(notify < complete, "trial {trial}");
        assert!(complete <= new_syn, "trial {trial}");
        assert!(new_syn < set_primary, "trial {trial}");
        assert!(set_primary <= close_old, "trial {trial}");
    }
    let elapsed = t0.elapsed();
    verdict(
        5,
        "1000 randomized handover trials: exactly-once delivery, ordered notifications, <60 s",
        elapsed.as_secs_f64() < 60.0,
    );
}

fn random_profile(rng: &mut ChaCha8Rng, window_micros: u64) -> PowerProfile {
    let p_fixed = rng.gen_range(0.5..20.0f64);
    let steps = rng.gen_range(1..=3usize);
    let mut ladder = Vec::new();
    let mut rate = rng.gen_range(1_000_000..50_000_000u64);
    let mut watts = rng.gen_range(0.1..2.0f64);
    for _ in 0..steps {
        ladder.push((rate, watts));
        rate = rate.saturating_mul(rng.gen_range(2..20u64));
        watts += rng.gen_range(0.0..3.0f64);
    }
    let p_sleep = rng.gen_range(0.0..(p_fixed + ladder[0].1) * 0.5);
    PowerProfile {
        p_fixed_w: p_fixed,
        p_sleep_w: p_sleep,
        nic_ladder: ladder,
        observation_window: SimTime::from_micros(window_micros),
    }
}

/// Reference evaluation with its own arithmetic path: duration from integer
/// ceil division, NIC step lookup by scan, E = T*P + sleep.
fn reference_energy(bytes: u64, rate: u64, profile: &PowerProfile) -> (f64, f64, f64) {
    let micros = (bytes as u128 * 8 * 1_000_000).div_ceil(rate as u128) as u64;
    let mut p_nic = profile.nic_ladder.last().map_or(0.0, |&(_, w)| w);
    for &(step, w) in &profile.nic_ladder {
        if rate <= step {
            p_nic = w;
            break;
        }
    }
    let active = micros as f64 / 1e6 * (profile.p_fixed_w + p_nic);
    let sleep = (profile.observation_window.as_micros() - micros) as f64 / 1e6 * profile.p_sleep_w;
    (active, sleep, active + sleep)
}

#[test]
fn criterion_6_energy_algebra_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..1000u32 {
        let bytes = rng.gen_range(1..20_000_000u64);
        let rate_low = rng.gen_range(100_000..100_000_000u64);
        let rate_high = rate_low + rng.gen_range(1..1_000_000_000u64);
        // Window sized so even the slow transfer fits.
        let need = (bytes as u128 * 8 * 1_000_000).div_ceil(rate_low as u128) as u64;
        let window = need + rng.gen_range(0..10_000_000u64);
        let profile = random_profile(&mut rng, window);

        let low = energy_for_transfer(bytes, rate_low, &profile).unwrap();
        let (a, s, t) = reference_energy(bytes, rate_low, &profile);
        assert_eq!(low.active_energy_j, a, "trial {trial} active");
        assert_eq!(low.sleep_energy_j, s, "trial {trial} sleep");
        assert_eq!(low.total_j, t, "trial {trial} total");

        let high = energy_for_transfer(bytes, rate_high, &profile).unwrap();
        let (_, _, th) = reference_energy(bytes, rate_high, &profile);
        assert_eq!(high.total_j, th, "trial {trial} high total");

        let cmp = compare_rates(bytes, rate_low, rate_high, &profile).unwrap();
        let expect = if th <= t { RateWinner::High } else { RateWinner::Low };
        assert_eq!(cmp.winner, expect, "trial {trial} winner");
        assert_eq!(cmp.low.total_j, t, "trial {trial} cmp low");
        assert_eq!(cmp.high.total_j, th, "trial {trial} cmp high");
    }
    verdict(
        6,
        "1000 random energy tuples match reference arithmetic exactly",
        true,
    );
}

#[test]
fn criterion_7_energy_ratio_band() {
    let report = reproduce::reproduce_fig6().expect("profile parses");
    verdict(7, "fast-then-sleep energy ratio in [0.08, 0.12]", report.all_pass());
}

#[test]
fn criterion_8_byte_identical_reproduction() {
    let bin = env!("CARGO_BIN_EXE_wansim");
    let dir = std::env::temp_dir();
    let out_a = dir.join("wansim_accept_a.csv");
    let out_b = dir.join("wansim_accept_b.csv");
    for out in [&out_a, &out_b] {
        let status = std::process::Command::new(bin)
            .args(["reproduce", "table1", "--strict", "--out"])
            .arg(out)
            .status()
            .expect("binary runs");
        assert!(status.success());
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    let _ = std::fs::remove_file(&out_a);
    let _ = std::fs::remove_file(&out_b);
    verdict(8, "reproduce table1 twice yields byte-identical CSV", !a.is_empty() && a == b);
}
