use std::ffi::CStr;
use std::ptr;

use ris_equalizer::arise::{self, AriseConfig};
use ris_equalizer::channel::{ChannelModel, FadingParams, Geometry};
use ris_equalizer::env::{EpisodeConfig, RisEnv};
use ris_equalizer::rng::{stream, Stream};
use ris_equalizer_ffi::*;

fn params() -> RisParams {
    let mut p = unsafe { std::mem::zeroed::<RisParams>() };
    assert_eq!(unsafe { ris_params_default(&mut p) }, RisStatus::Ok);
    p
}

fn new_sim(p: &RisParams) -> *mut RisSimulator {
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { ris_simulator_new(p, &mut sim) }, RisStatus::Ok);
    assert!(!sim.is_null());
    sim
}

fn last_error() -> String {
    let p = ris_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn defaults_and_dims() {
    let mut p = params();
    assert_eq!(p.elements, 100);
    assert_eq!(p.delayed_paths, 10);
    p.elements = 8;
    p.delayed_paths = 3;
    let sim = new_sim(&p);
    let (mut m, mut taps) = (0usize, 0usize);
    assert_eq!(unsafe { ris_simulator_dims(sim, &mut m, &mut taps) }, RisStatus::Ok);
    assert_eq!((m, taps), (8, 7));
    let mut n = -1.0;
    assert_eq!(unsafe { ris_simulator_noise_power(sim, &mut n) }, RisStatus::Ok);
    assert!(n > 0.0);
    unsafe { ris_simulator_free(sim) };
}

#[test]
fn arise_and_baselines_match_the_library() {
    let mut p = params();
    p.elements = 16;
    p.delayed_paths = 2;
    p.noise = false;
    p.seed = 5;
    let sim = new_sim(&p);
    let taps = 5;
    let mut gamma = vec![0.0; 32];
    let mut iters = 0usize;
    assert_eq!(
        unsafe { ris_simulator_arise(sim, gamma.as_mut_ptr(), 16, &mut iters) },
        RisStatus::Ok
    );
    assert!(iters > 0);
    for c in gamma.chunks(2) {
        assert!((c[0].hypot(c[1]) - 1.0).abs() < 1e-12);
    }
    let mut y = vec![0.0; 2 * taps];
    assert_eq!(
        unsafe { ris_simulator_pulse(sim, gamma.as_ptr(), 16, false, y.as_mut_ptr(), taps) },
        RisStatus::Ok
    );
    let (mut eta, mut eta_n, mut sinr) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(ris_eta(y.as_ptr(), taps, &mut eta), RisStatus::Ok);
        assert_eq!(ris_eta_norm(y.as_ptr(), taps, &mut eta_n), RisStatus::Ok);
        assert_eq!(ris_sinr_db(y.as_ptr(), taps, 1e-12, &mut sinr), RisStatus::Ok);
    }
    let energy: f64 = y.iter().map(|v| v * v).sum();
    assert!((eta_n - eta / energy).abs() < 1e-12);

    // same streams through the library directly
    let model = ChannelModel::new(
        Geometry {
            elements: 16,
            ..Geometry::default()
        },
        FadingParams {
            delayed_paths: 2,
            ..FadingParams::default()
        },
    )
    .unwrap();
    let env = RisEnv::new(model, EpisodeConfig::default(), 5).unwrap();
    let init = arise::baseline_random(&mut stream(5, Stream::Baseline), 16);
    let (want, trace) = arise::run(env.channel(), &AriseConfig::default(), init).unwrap();
    assert_eq!(iters, trace.iterations_used());
    for (c, w) in gamma.chunks(2).zip(want.as_slice()) {
        assert_eq!((c[0], c[1]), (w.re, w.im));
    }
    assert_eq!(eta_n, trace.final_eta_norm());

    let mut inv = vec![0.0; 32];
    assert_eq!(
        unsafe { ris_simulator_baseline_inverse(sim, inv.as_mut_ptr(), 16) },
        RisStatus::Ok
    );
    let inv_want = arise::baseline_inverse(&env.channel().h_bru);
    for (c, w) in inv.chunks(2).zip(inv_want.as_slice()) {
        assert_eq!((c[0], c[1]), (w.re, w.im));
    }

    assert_eq!(unsafe { ris_simulator_next_block(sim) }, RisStatus::Ok);
    let mut y2 = vec![0.0; 2 * taps];
    unsafe { ris_simulator_pulse(sim, gamma.as_ptr(), 16, false, y2.as_mut_ptr(), taps) };
    assert_ne!(y, y2);
    unsafe { ris_simulator_free(sim) };
}

#[test]
fn hand_checked_metric_values() {
    let mut v = 0.0;
    let y = [0.6, 0.0, 0.0, 0.8];
    assert_eq!(unsafe { ris_eta(y.as_ptr(), 2, &mut v) }, RisStatus::Ok);
    assert!((v + 0.28).abs() < 1e-15);
    let y = [-1.0, 0.0, 0.0, 0.0];
    assert_eq!(unsafe { ris_eta_norm(y.as_ptr(), 2, &mut v) }, RisStatus::Ok);
    assert_eq!(v, -1.0);
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(ris_eta(ptr::null(), 2, &mut v), RisStatus::NullPointer);
        assert!(last_error().contains("y"));
        let zero = [0.0; 4];
        assert_eq!(ris_eta_norm(zero.as_ptr(), 2, &mut v), RisStatus::Degenerate);

        let mut p = params();
        p.elements = 0;
        let mut sim = ptr::null_mut();
        assert_eq!(ris_simulator_new(&p, &mut sim), RisStatus::InvalidArgument);
        assert!(sim.is_null());
        assert!(last_error().contains("elements"), "{}", last_error());

        let mut p = params();
        p.elements = 4;
        p.delayed_paths = 1;
        let sim = new_sim(&p);
        let gamma = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let mut y = [0.0; 6];
        assert_eq!(
            ris_simulator_pulse(sim, gamma.as_ptr(), 3, false, y.as_mut_ptr(), 3),
            RisStatus::Dimension
        );
        let gamma = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert_eq!(
            ris_simulator_pulse(sim, gamma.as_ptr(), 4, true, y.as_mut_ptr(), 2),
            RisStatus::Dimension
        );
        assert_eq!(ris_simulator_next_block(ptr::null_mut()), RisStatus::NullPointer);
        ris_simulator_free(sim);
        ris_simulator_free(ptr::null_mut());
    }
}

#[test]
fn header_is_valid_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = format!("{dir}/include/ris_equalizer.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "ris_simulator_new",
        "ris_simulator_free",
        "ris_simulator_arise",
        "ris_simulator_pulse",
        "ris_eta_norm",
        "ris_last_error",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c", &header])
        .output()
    else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
