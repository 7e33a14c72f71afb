use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use guidegan::synthdata::{read_data_file, write_data_file, DataFile, DatasetMode, Normalization};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_guidegan")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Models {
    dir: tempfile::TempDir,
}

impl Models {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Small dataset, generator and encoder built through the binary.
    fn build(mode: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let m = Models { dir };
        let (d, g, e) = (m.path("d.ggdata"), m.path("g.ckpt"), m.path("e.ckpt"));
        let gen = match mode {
            "tiles" => run(&["gen-data", "--mode", "tiles", "--count", "400", "--modes", "3", "--resolution", "8", "--out", s(&d)]),
            _ => run(&["gen-data", "--mode", "mixture2d", "--count", "2000", "--out", s(&d)]),
        };
        assert_eq!(code(&gen), 0, "{}", String::from_utf8_lossy(&gen.stderr));
        let t = run(&[
            "train-gan", "--data", s(&d), "--out", s(&g), "--latent-dim", "4", "--steps", "60",
            "--steps-per-stage", "20", "--hidden", "16",
        ]);
        assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
        let t = run(&["train-encoder", "--gan", s(&g), "--out", s(&e), "--pairs", "500", "--epochs", "1", "--hidden", "16"]);
        assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
        m
    }
}

#[test]
fn gen_data_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.ggdata"), dir.path().join("b.ggdata"));
    for p in [&a, &b] {
        assert_eq!(code(&run(&["gen-data", "--mode", "mixture2d", "--count", "500", "--seed", "9", "--out", s(p)])), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let echoed = std::fs::read_to_string(dir.path().join("a.ggdata.config")).unwrap();
    assert!(echoed.contains("seed = 9"));
    assert!(echoed.contains("count = 500"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.ggdata");
    assert_eq!(code(&run(&["gen-data", "--mode", "mixture2d"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["gen-data", "--mode", "mixture2d", "--count", "0", "--out", s(&out)])), 2);
    let guide = run(&[
        "guide", "--gan", "g", "--encoder", "e", "--exemplar-dir", "x", "--alpha", "0", "--out", s(&out),
    ]);
    assert_eq!(code(&guide), 2);
    assert!(!out.exists());
}

#[test]
fn config_files_merge_and_reject_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    let out = dir.path().join("d.ggdata");
    std::fs::write(&cfg, "mode = mixture2d\n[gen-data]\ncount = 300\nseed = 4\n").unwrap();
    assert_eq!(code(&run(&["gen-data", "--config", s(&cfg), "--seed", "6", "--out", s(&out)])), 0);
    let f = read_data_file(&out).unwrap();
    assert_eq!(f.count(), 300);
    let echoed = std::fs::read_to_string(dir.path().join("d.ggdata.config")).unwrap();
    assert!(echoed.contains("seed = 6"));

    std::fs::write(&cfg, "mode = mixture2d\ncolour = blue\n").unwrap();
    let r = run(&["gen-data", "--config", s(&cfg), "--out", s(&dir.path().join("e.ggdata"))]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("colour"));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.ckpt");
    let r = run(&["train-gan", "--data", s(&dir.path().join("nope.ggdata")), "--out", s(&out)]);
    assert_eq!(code(&r), 1);
    assert!(String::from_utf8_lossy(&r.stderr).contains("nope.ggdata"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn guide_is_deterministic_and_labels_its_output() {
    let m = Models::build("mixture2d");
    let (d, g, e) = (m.path("d.ggdata"), m.path("g.ckpt"), m.path("e.ckpt"));
    for name in ["s1.ggdata", "s2.ggdata"] {
        let r = run(&[
            "guide", "--gan", s(&g), "--encoder", s(&e), "--exemplar-label", "2", "--data", s(&d), "--n", "16",
            "--count", "50", "--out", s(&m.path(name)), "--prototype-out", s(&m.path("p.txt")),
        ]);
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    }
    let a = std::fs::read(m.path("s1.ggdata")).unwrap();
    assert_eq!(a, std::fs::read(m.path("s2.ggdata")).unwrap());
    let f = read_data_file(&m.path("s1.ggdata")).unwrap();
    assert_eq!(f.count(), 50);
    assert_eq!(f.labels, None);
    assert_eq!(f.meta("guided_label"), Some("2"));
    let proto = std::fs::read_to_string(m.path("p.txt")).unwrap();
    assert!(proto.contains("[prototype]"));

    let r = run(&["guide", "--gan", s(&g), "--encoder", s(&e), "--exemplar-label", "2", "--out", "x"]);
    assert_eq!(code(&r), 2);
}

#[test]
fn eval_and_plots() {
    let m = Models::build("mixture2d");
    let (d, g, e) = (m.path("d.ggdata"), m.path("g.ckpt"), m.path("e.ckpt"));
    let r = run(&[
        "eval", "--gan", s(&g), "--encoder", s(&e), "--data", s(&d), "--out", s(&m.path("r.txt")), "--n", "16",
        "--per-class", "20", "--unguided-per-class", "20", "--no-sweep", "--table-out", s(&m.path("t.txt")),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(std::fs::read_to_string(m.path("r.txt")).unwrap().contains("[guided]"));
    assert!(std::fs::read_to_string(m.path("t.txt")).unwrap().contains("mode4"));

    let r = run(&["plot", "--report", s(&m.path("r.txt")), "--out", s(&m.path("cm.svg"))]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(std::fs::read_to_string(m.path("cm.svg")).unwrap().starts_with("<svg"));

    let r = run(&[
        "guide", "--gan", s(&g), "--encoder", s(&e), "--exemplar-label", "0", "--data", s(&d), "--n", "16",
        "--out", s(&m.path("s.ggdata")),
    ]);
    assert_eq!(code(&r), 0);
    let r = run(&["plot", "--samples", s(&m.path("s.ggdata")), "--data", s(&d), "--out", s(&m.path("s.svg"))]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let svg = std::fs::read_to_string(m.path("s.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 1000);
}

#[test]
fn tile_pipeline_writes_a_grid() {
    let m = Models::build("tiles");
    let (d, g, e) = (m.path("d.ggdata"), m.path("g.ckpt"), m.path("e.ckpt"));
    let r = run(&[
        "guide", "--gan", s(&g), "--encoder", s(&e), "--exemplar-label", "1", "--data", s(&d), "--n", "8",
        "--count", "10", "--out", s(&m.path("s.ggdata")),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let r = run(&["plot", "--samples", s(&m.path("s.ggdata")), "--out", s(&m.path("grid.ppm"))]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let img = guidegan::synthdata::decode_ppm(&std::fs::read(m.path("grid.ppm")).unwrap()).unwrap();
    assert_eq!((img.width, img.height), (32, 32));
}

#[test]
fn empty_sample_file_cannot_be_plotted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.ggdata");
    let file = DataFile {
        mode: DatasetMode::Vector2d,
        m: 1,
        sample_shape: vec![2],
        normalization: Normalization::identity(),
        samples: Vec::new(),
        labels: None,
        meta: Vec::new(),
    };
    write_data_file(&path, &file).unwrap();
    let out = dir.path().join("p.svg");
    let r = run(&["plot", "--samples", s(&path), "--out", s(&out)]);
    assert_eq!(code(&r), 1);
    assert!(!out.exists());
}
