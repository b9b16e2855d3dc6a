use std::ffi::{c_int, c_void, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use nashlearn_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(nl_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn by_id(id: &str) -> *mut NlGame {
    let id = CString::new(id).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { nl_game_by_id(id.as_ptr(), &mut g) }, NlStatus::Ok);
    g
}

#[test]
fn benchmark_games_have_expected_shapes() {
    for (id, dim, players) in [("torus", 2, 2), ("pennies", 2, 2), ("lq3", 12, 3), ("particles", 400, 4)] {
        let g = by_id(id);
        unsafe {
            assert_eq!(nl_game_dim(g), dim, "{id}");
            assert_eq!(nl_game_num_players(g), players, "{id}");
            nl_game_free(g);
        }
    }
}

#[test]
fn unknown_id_sets_error_message() {
    let id = CString::new("chess").unwrap();
    let mut g = ptr::null_mut();
    let s = unsafe { nl_game_by_id(id.as_ptr(), &mut g) };
    assert_ne!(s, NlStatus::Ok);
    assert!(g.is_null());
    assert!(last_error().contains("chess"), "{}", last_error());
}

#[test]
fn null_arguments_are_rejected() {
    let mut out = [0.0; 2];
    let s = unsafe { nl_game_form(ptr::null(), [0.0, 0.0].as_ptr(), 2, out.as_mut_ptr(), 2) };
    assert_eq!(s, NlStatus::NullPointer);
    let g = nl_game_torus();
    let s = unsafe { nl_game_form(g, ptr::null(), 2, out.as_mut_ptr(), 2) };
    assert_eq!(s, NlStatus::NullPointer);
    unsafe {
        nl_game_free(g);
        nl_game_free(ptr::null_mut());
        nl_trajectory_free(ptr::null_mut());
        nl_lq_free(ptr::null_mut());
    }
}

#[test]
fn short_output_buffer_is_reported() {
    let g = nl_game_torus();
    let mut out = [0.0; 3];
    let s = unsafe { nl_game_jacobian(g, [0.1, 0.2].as_ptr(), 2, out.as_mut_ptr(), 3) };
    assert_eq!(s, NlStatus::BufferTooSmall);
    assert!(last_error().contains("need 4"));
    unsafe { nl_game_free(g) };
}

#[test]
fn success_clears_error_message() {
    let g = nl_game_torus();
    let mut out = [0.0; 2];
    unsafe {
        assert_eq!(nl_game_form(g, [0.0; 3].as_ptr(), 3, out.as_mut_ptr(), 2), NlStatus::Dimension);
        assert!(!last_error().is_empty());
        assert_eq!(nl_game_form(g, [0.0; 2].as_ptr(), 2, out.as_mut_ptr(), 2), NlStatus::Ok);
        nl_game_free(g);
    }
    assert!(last_error().is_empty());
}

#[test]
fn quadratic_game_matches_its_matrix() {
    // ω = M x + b with a rotation-dominated M
    let m = [2.0, 1.0, -1.0, 3.0];
    let b = [0.5, -1.0];
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(nl_game_quadratic(2, [1, 1].as_ptr(), m.as_ptr(), b.as_ptr(), &mut g), NlStatus::Ok);
        let x = [0.3, -0.7];
        let mut w = [0.0; 2];
        assert_eq!(nl_game_form(g, x.as_ptr(), 2, w.as_mut_ptr(), 2), NlStatus::Ok);
        assert!((w[0] - (2.0 * 0.3 - 0.7 + 0.5)).abs() < 1e-14);
        assert!((w[1] - (-0.3 - 2.1 - 1.0)).abs() < 1e-14);
        let mut j = [0.0; 4];
        assert_eq!(nl_game_jacobian(g, x.as_ptr(), 2, j.as_mut_ptr(), 4), NlStatus::Ok);
        assert_eq!(j, m);

        let mut rate = 0.0;
        let mut present = false;
        assert_eq!(nl_uniform_rate_interval(g, x.as_ptr(), 2, &mut rate, &mut present), NlStatus::Ok);
        assert!(present);
        // eigenvalues 2.5 ± i√3/2, so the bound 2 Re λ / |λ|² is 5/7
        let expected = 5.0 / 7.0;
        assert!((rate - expected).abs() < 1e-10, "{rate} vs {expected}");
        nl_game_free(g);
    }
}

extern "C" fn bilinear_cost(_: *mut c_void, player: usize, x: *const f64, dim: usize, cost: *mut f64) -> c_int {
    let x = unsafe { std::slice::from_raw_parts(x, dim) };
    let (a, b) = (x[0], x[1]);
    unsafe { *cost = if player == 0 { a * a + 2.0 * a * b } else { b * b - 2.0 * a * b } };
    0
}

extern "C" fn failing_cost(_: *mut c_void, _: usize, _: *const f64, _: usize, _: *mut f64) -> c_int {
    7
}

#[test]
fn callback_game_uses_cost_differences() {
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(
            nl_game_from_callbacks(2, [1, 1].as_ptr(), Some(bilinear_cost), None, ptr::null_mut(), &mut g),
            NlStatus::Ok
        );
        let x = [0.4, -0.3];
        let mut w = [0.0; 2];
        assert_eq!(nl_game_form(g, x.as_ptr(), 2, w.as_mut_ptr(), 2), NlStatus::Ok);
        assert!((w[0] - (0.8 - 0.6)).abs() < 1e-8);
        assert!((w[1] - (-0.6 - 0.8)).abs() < 1e-8);
        let mut j = [0.0; 4];
        assert_eq!(nl_game_jacobian(g, x.as_ptr(), 2, j.as_mut_ptr(), 4), NlStatus::Ok);
        for (got, want) in j.iter().zip([2.0, 2.0, -2.0, 2.0]) {
            assert!((got - want).abs() < 1e-6, "{j:?}");
        }
        nl_game_free(g);
    }
}

#[test]
fn callback_failure_becomes_evaluation_error() {
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(
            nl_game_from_callbacks(2, [1, 1].as_ptr(), Some(failing_cost), None, ptr::null_mut(), &mut g),
            NlStatus::Ok
        );
        let mut w = [0.0; 2];
        assert_eq!(nl_game_form(g, [0.0, 0.0].as_ptr(), 2, w.as_mut_ptr(), 2), NlStatus::Evaluation);
        assert!(last_error().contains("returned 7"), "{}", last_error());
        nl_game_free(g);
        let mut h = ptr::null_mut();
        assert_eq!(
            nl_game_from_callbacks(2, [1, 1].as_ptr(), None, None, ptr::null_mut(), &mut h),
            NlStatus::NullPointer
        );
    }
}

#[test]
fn spectral_bounds_and_iteration_bound_agree() {
    let mut g = ptr::null_mut();
    let m = [2.0, 0.0, 0.0, 4.0];
    unsafe {
        assert_eq!(nl_game_quadratic(2, [1, 1].as_ptr(), m.as_ptr(), [0.0, 0.0].as_ptr(), &mut g), NlStatus::Ok);
        let mut sb = NlSpectralBounds::default();
        assert_eq!(nl_spectral_bounds(g, [0.0, 0.0].as_ptr(), 2, 1.0, 50, 3, &mut sb), NlStatus::Ok);
        // constant Jacobian: α = 4, β = 16
        assert!((sb.alpha - 4.0).abs() < 1e-12 && (sb.beta - 16.0).abs() < 1e-12);
        assert!((sb.uniform_rate - 2.0 / 16.0).abs() < 1e-12);
        let mut t = 0u64;
        assert_eq!(nl_iteration_bound_uniform(sb.alpha, sb.beta, 1.0, 1e-3, &mut t), NlStatus::Ok);
        assert_eq!(t, (8.0 * 1000f64.ln()).ceil() as u64);
        assert_eq!(nl_iteration_bound_uniform(sb.alpha, sb.beta, 1.0, 2.0, &mut t), NlStatus::Domain);
        nl_game_free(g);
    }
}

#[test]
fn stochastic_runs_are_seeded() {
    let g = nl_game_torus();
    let kinds = [NlScheduleKind::Inverse, NlScheduleKind::InverseLog];
    let run = |seed| unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(
            nl_simulate_stochastic(
                g,
                [1.0, 1.0].as_ptr(),
                2,
                kinds.as_ptr(),
                [0.0, 0.0].as_ptr(),
                [0.1, 0.1].as_ptr(),
                2,
                0.0,
                500,
                10,
                seed,
                &mut t
            ),
            NlStatus::Ok
        );
        assert_eq!(nl_trajectory_iters(t), 500);
        assert_eq!(nl_trajectory_status(t), 1);
        let n = nl_trajectory_len(t);
        let mut norms = vec![0.0; n];
        assert_eq!(nl_trajectory_omega_norms(t, norms.as_mut_ptr(), n), NlStatus::Ok);
        let mut last = [0.0; 2];
        let mut iter = 0usize;
        assert_eq!(nl_trajectory_point(t, n - 1, last.as_mut_ptr(), 2, &mut iter), NlStatus::Ok);
        assert_eq!(iter, 500);
        assert_eq!(
            nl_trajectory_point(t, n, last.as_mut_ptr(), 2, ptr::null_mut()),
            NlStatus::InvalidArgument
        );
        nl_trajectory_free(t);
        (norms, last)
    };
    let (a, la) = run(1);
    let (b, lb) = run(1);
    let (_, lc) = run(2);
    assert_eq!(a, b);
    assert_eq!(la, lb);
    assert_ne!(la, lc);
    unsafe { nl_game_free(g) };
}

#[test]
fn lq_json_round_trip_and_nash() {
    let lq = nl_lq_benchmark(false);
    let n = unsafe { nl_lq_gain_len(lq) };
    let mut k = vec![0.0; n];
    unsafe {
        assert_eq!(nl_lq_nash(lq, 1e-13, 10_000, k.as_mut_ptr(), n), NlStatus::Ok);
        nl_lq_free(lq);
    }
    let bundle: serde_json::Value = serde_json::from_str(include_str!("../../core/data/lq3.json")).unwrap();
    let json = CString::new(bundle["game"].to_string()).unwrap();
    let mut parsed = ptr::null_mut();
    unsafe {
        assert_eq!(nl_lq_game_from_json(json.as_ptr(), &mut parsed), NlStatus::Ok);
        let mut k2 = vec![0.0; n];
        assert_eq!(nl_lq_nash(parsed, 1e-13, 10_000, k2.as_mut_ptr(), n), NlStatus::Ok);
        assert_eq!(k, k2);
        nl_lq_free(parsed);
        let bad = CString::new("{\"A\": []}").unwrap();
        let mut h = ptr::null_mut();
        assert_eq!(nl_lq_game_from_json(bad.as_ptr(), &mut h), NlStatus::Config);
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps/
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libnashlearn_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = std::env::temp_dir().join(format!("nashlearn_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&out)
        .status()
        .expect("cc runs");
    assert!(status.success(), "C smoke test failed to compile");
    let run = Command::new(&out).output().expect("smoke binary runs");
    let _ = std::fs::remove_file(&out);
    assert!(
        run.status.success(),
        "{}{}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("c smoke ok"));
}
