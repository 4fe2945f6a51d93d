//! End-to-end runs of the `curvesfm` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use curvesfm_cli::format::{
    read_json, to_json_string, Curve3dDoc, FramesDoc, ObservationsDoc, PairsDoc, SceneDoc, SolutionDoc, ViewDoc,
};
use curvesfm_core::geometry::wrap_pi;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn curvesfm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvesfm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) {
    let out = curvesfm(args, dir);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Parse, serialize, parse: the value and the bytes must both survive.
fn assert_round_trip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let value: T = read_json(path).unwrap();
    assert_eq!(to_json_string(&value), text, "{}", path.display());
    let again: T = serde_json::from_str(&to_json_string(&value)).unwrap();
    assert_eq!(again, value);
}

fn pipeline(dir: &Path, seed: &str, frames: &str) {
    ok(&["gen", "--seed", seed, "--frames", frames, "--out", "."], dir);
    ok(&["observe", "--in", "frames.json", "--out", "obs.json"], dir);
}

#[test]
fn gen_observe_solve_recovers_the_scene() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d, "1", "6");
    ok(&["solve", "--in", "obs.json", "--out", "solution.json"], d);
    let scene: SceneDoc = read_json(&d.join("scene.json")).unwrap();
    let sol: SolutionDoc = read_json(&d.join("solution.json")).unwrap();
    let (p, t) = (sol.params, scene.params);
    assert!(
        (p.c - t.c).abs() < 1e-6 && (p.alpha - t.alpha).abs() < 1e-6,
        "{p:?} vs {t:?}"
    );
    assert!(
        (p.beta - t.beta).abs() < 1e-6 && wrap_pi(p.phi - t.phi).abs() < 1e-6,
        "{p:?} vs {t:?}"
    );
    assert!(sol.converged && sol.residual_rms <= 1e-9);
    assert_eq!(sol.per_frame.len(), 6);
    for (pose, m) in sol.per_frame.iter().zip(&scene.motion) {
        assert!(wrap_pi(pose.delta - m.delta).abs() < 1e-6 && (pose.tau - m.tau).abs() < 1e-6);
    }

    ok(
        &[
            "densify",
            "--in",
            "frames.json",
            "--solution",
            "solution.json",
            "--out",
            "curve3d.json",
        ],
        d,
    );
    let curve: Curve3dDoc = read_json(&d.join("curve3d.json")).unwrap();
    assert_eq!(curve.points.len(), scene.samples_per_curve);
    assert_eq!(curve.mirror_flag, "unresolved");
    // The chord comes back at its true length.
    let (a, b) = (curve.points[0], *curve.points.last().unwrap());
    let chord = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt();
    assert!((chord - t.c).abs() < 1e-9);

    assert_round_trip::<SceneDoc>(&d.join("scene.json"));
    assert_round_trip::<FramesDoc>(&d.join("frames.json"));
    assert_round_trip::<ObservationsDoc>(&d.join("obs.json"));
    assert_round_trip::<SolutionDoc>(&d.join("solution.json"));
    assert_round_trip::<Curve3dDoc>(&d.join("curve3d.json"));
}

#[test]
fn three_frames_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), "2", "3");
    let out = curvesfm(&["solve", "--in", "obs.json", "--out", "solution.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(
        err.starts_with("error: insufficient-frames: insufficient frames (need 4)"),
        "{err}"
    );
    assert!(!dir.path().join("solution.json").exists());
}

#[test]
fn non_convergence_still_writes_the_best_candidate() {
    // Noisy frames with the noise-free tolerance: no start can pass.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &["gen", "--seed", "3", "--frames", "6", "--noise", "1e-3", "--out", "."],
        d,
    );
    ok(&["observe", "--in", "frames.json", "--out", "obs.json"], d);
    let out = curvesfm(&["solve", "--in", "obs.json", "--out", "solution.json"], d);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("error: no-convergence:"));
    let sol: SolutionDoc = read_json(&d.join("solution.json")).unwrap();
    let scene: SceneDoc = read_json(&d.join("scene.json")).unwrap();
    assert!(!sol.converged && sol.residual_rms > 1e-10);
    assert!((sol.params.c - scene.params.c).abs() < 0.1);
}

#[test]
fn linearized_method_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), "4", "23");
    ok(
        &[
            "solve",
            "--in",
            "obs.json",
            "--out",
            "lin.json",
            "--method",
            "linearized",
        ],
        dir.path(),
    );
    ok(&["solve", "--in", "obs.json", "--out", "glob.json"], dir.path());
    let lin: SolutionDoc = read_json(&dir.path().join("lin.json")).unwrap();
    let glob: SolutionDoc = read_json(&dir.path().join("glob.json")).unwrap();
    assert_eq!(lin.method, "linearized");
    assert!((lin.params.c - glob.params.c).abs() < 1e-4);
    assert!(wrap_pi(lin.params.phi - glob.params.phi).abs() < 1e-4);
}

#[test]
fn noisy_generation_is_seeded_and_config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &["gen", "--seed", "5", "--frames", "8", "--noise", "1e-4", "--out", "a"],
        d,
    );
    ok(
        &["gen", "--seed", "5", "--frames", "8", "--noise", "1e-4", "--out", "b"],
        d,
    );
    ok(&["gen", "--seed", "5", "--frames", "8", "--out", "clean"], d);
    let read = |p: &str| fs::read(d.join(p)).unwrap();
    assert_eq!(read("a/frames.json"), read("b/frames.json"));
    assert_ne!(read("a/frames.json"), read("clean/frames.json"));

    ok(&["observe", "--in", "a/frames.json", "--out", "obs.json"], d);
    fs::write(d.join("solver.json"), r#"{"noise_sigma": 1e-4, "phi_starts": 16}"#).unwrap();
    ok(
        &[
            "solve",
            "--in",
            "obs.json",
            "--out",
            "sol.json",
            "--config",
            "solver.json",
        ],
        d,
    );
    let scene: SceneDoc = read_json(&d.join("a/scene.json")).unwrap();
    let sol: SolutionDoc = read_json(&d.join("sol.json")).unwrap();
    assert!(sol.converged);
    assert!((sol.params.c - scene.params.c).abs() < 1e-2);

    fs::write(d.join("bad.json"), r#"{"tolerance": 1.0}"#).unwrap();
    let out = curvesfm(
        &["solve", "--in", "obs.json", "--out", "x.json", "--config", "bad.json"],
        d,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: parse:"), "{}", stderr(&out));
}

#[test]
fn planar_views_correspond() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--planar", "--seed", "9", "--out", "."], d);
    ok(
        &[
            "correspond",
            "--in",
            "view1.json",
            "--in",
            "view2.json",
            "--out",
            "pairs.json",
        ],
        d,
    );
    let pairs: PairsDoc = read_json(&d.join("pairs.json")).unwrap();
    let v2: ViewDoc = read_json(&d.join("view2.json")).unwrap();
    let worst = pairs
        .pairs
        .iter()
        .zip(&v2.curve)
        .map(|(p, t)| (p.x2[0] - t[0]).hypot(p.x2[1] - t[1]))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-5, "{worst}");
    assert_round_trip::<ViewDoc>(&d.join("view1.json"));
    assert_round_trip::<PairsDoc>(&d.join("pairs.json"));
}

#[test]
fn plots_are_svg() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d, "6", "4");
    ok(&["plot", "--in", "frames.json", "--out", "plots"], d);
    for i in 0..4 {
        let svg = fs::read_to_string(d.join(format!("plots/frame_{i:03}.svg"))).unwrap();
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(&format!("frame {i}")));
        assert_eq!(svg.matches('<').count(), svg.matches('>').count());
    }
    let out = curvesfm(&["plot", "--in", "obs.json", "--out", "plots"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: invalid-input:"));
}

#[test]
fn malformed_inputs_fail_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("v2.json"), r#"{"v": 2, "observations": []}"#).unwrap();
    let cases: [(&[&str], &str); 4] = [
        (&["solve", "--in", "missing.json"], "error: io:"),
        (&["solve", "--in", "v2.json"], "error: schema-version:"),
        (&["gen", "--frames", "0"], "error: usage:"),
        (&["gen", "--noise", "-1"], "error: usage:"),
    ];
    for (args, prefix) in cases {
        let out = curvesfm(args, d);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = stderr(&out);
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with(prefix), "{args:?}: {err}");
    }
}
