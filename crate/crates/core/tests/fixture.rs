use std::fs;
use std::path::{Path, PathBuf};

use mlqa::synthetic::{generate, GeneratorSpec};

/// Spec of the committed fixture under tests/fixtures/synth.
fn committed_spec() -> GeneratorSpec {
    GeneratorSpec {
        questions: 24,
        terms_per_question: 3,
        fanout: 3,
        synonym_fraction: 0.7,
        noise_rate: 0.4,
        double_annotation: 0.8,
        seed: 0,
        ..GeneratorSpec::default()
    }
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files_under(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

#[test]
fn committed_fixture_matches_generator() {
    let committed = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synth");
    let fresh = tempfile::tempdir().unwrap();
    generate(&committed_spec()).unwrap().write_to(fresh.path()).unwrap();
    let a = files_under(&committed);
    let b = files_under(fresh.path());
    let rel = |files: &[PathBuf], root: &Path| -> Vec<PathBuf> {
        files.iter().map(|f| f.strip_prefix(root).unwrap().to_path_buf()).collect()
    };
    assert_eq!(rel(&a, &committed), rel(&b, fresh.path()));
    for (x, y) in a.iter().zip(&b) {
        assert!(fs::read(x).unwrap() == fs::read(y).unwrap(), "{} differs from a fresh generation", x.display());
    }
}
