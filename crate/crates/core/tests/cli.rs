use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chromaweak::colorspace::Rgb8;
use chromaweak::pipeline::ImageBuffer;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chromaweak"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().unwrap()
}

fn fitted(dir: &Path, kind: &str) -> PathBuf {
    ok(dir, &["synth", "--kind", kind, "-o", "m.csv"]);
    ok(dir, &["fit", "m.csv", "-o", "fields.cwmf"]);
    dir.join("fields.cwmf")
}

#[test]
fn synth_and_fit_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let synth = ok(d, &["synth", "--kind", "protocol", "--seed", "3", "-o", "m.csv"]);
    assert!(synth.contains("8624 records (77 centers, 2 observers)"), "{synth}");
    let fit = ok(d, &["fit", "m.csv", "-o", "f.cwmf"]);
    assert!(fit.contains("observer normal: 77 ellipsoids"), "{fit}");
    assert!(fit.contains("observer weak: 77 ellipsoids"), "{fit}");
    assert!(fit.contains("wrote 2 field(s)"));
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for tag in ["a", "b"] {
        ok(d, &["synth", "--seed", "11", "--noise", "0.05", "-o", &format!("{tag}.csv")]);
        ok(d, &["fit", &format!("{tag}.csv"), "--observer", "weak", "-o", &format!("{tag}.cwmf")]);
    }
    let read = |name: &str| std::fs::read(d.join(name)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.cwmf"), read("b.cwmf"));
}

#[test]
fn scaling_ratios() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--kind", "scaling", "-o", "m.csv"]);
    let fit = ok(dir.path(), &["fit", "m.csv", "-o", "f.cwmf"]);
    let all = fit.lines().find(|l| l.trim_start().starts_with("all")).unwrap();
    assert!(all.contains("8.0000"), "{all}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["fit", "absent.csv", "-o", "x"]), 2);
    assert_eq!(code(d, &["frobnicate"]), 2);
    fitted(d, "scaling");
    assert_eq!(code(d, &["chart", "fields.cwmf", "--observer", "normal", "--dim", "4", "-o", "c"]), 2);
    ImageBuffer::new(1, 1, vec![Rgb8::new(1, 2, 3)]).unwrap().write_png(d.join("in.png")).unwrap();
    assert_eq!(code(d, &["compensate", "in.png", "--mode", "3d", "-o", "out.png"]), 2);
    assert_eq!(code(d, &["compensate", "in.png", "--mode", "sideways", "-o", "out.png"]), 2);
    assert!(!d.join("out.png").exists());
}

#[test]
fn default_3d_origin() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fitted(d, "scaling");
    let out = ok(
        d,
        &[
            "chart", "fields.cwmf", "--observer", "normal", "--dim", "3", "--polar", "5", "--azimuth", "6",
            "--radial-spacing", "10", "--step", "2", "-o", "c3.cwnc",
        ],
    );
    assert!(out.contains("(30, 0, 0)"), "{out}");
}

#[test]
fn scaling_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fitted(d, "scaling");
    for obs in ["normal", "weak"] {
        ok(
            d,
            &[
                "chart", "fields.cwmf", "--observer", obs, "--dim", "2", "--angles", "24", "--radial-spacing",
                "2", "-o", &format!("{obs}.cwnc"),
            ],
        );
    }
    ok(d, &["map", "--normal", "normal.cwnc", "--weak", "weak.cwnc", "-o", "maps.cwim"]);
    ok(d, &["lightness", "fields.cwmf", "--normal", "normal", "--weak", "weak", "-o", "axis.cwlm"]);

    // low-chroma colors near the chart planes
    let img = ImageBuffer::from_fn(8, 8, |x, y| Rgb8::new(100 + x as u8 * 4, 105 + y as u8 * 3, 110));
    img.write_png(d.join("in.png")).unwrap();
    let report = ok(
        d,
        &[
            "compensate", "in.png", "--mode", "2d+1d", "--maps2d", "maps.cwim", "--lightness", "axis.cwlm",
            "--report", "r.json", "-o", "out.png",
        ],
    );
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["pixels"], 64);
    assert_eq!(json["fallback"], 0);
    assert_eq!(std::fs::read_to_string(d.join("r.json")).unwrap().trim(), report.trim());
    let out = ImageBuffer::read_png(d.join("out.png")).unwrap();
    assert_eq!((out.width(), out.height()), (8, 8));

    let stats = ok(d, &["stats", "--before", "in.png", "--after", "in.png"]);
    assert!(stats.contains("area expansion: 1.0000"), "{stats}");
}

#[test]
fn malformed_sheet_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("sd.csv"),
        "observer_id,image_id,condition,s1,s2,s3,s4,s5,s6,s7,s8\nn1,lake,original,1,2,3,4,5,6,9,1\n",
    )
    .unwrap();
    let out = run(d, &["stats", "--sheets", "sd.csv", "--reference", "n1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}
