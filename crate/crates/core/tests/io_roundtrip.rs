use graphfb::bench::{experiment_problem, run_method, ExperimentSpec};
use graphfb::io::{emit_problems, problem_file_name, read_problem, write_problem};
use graphfb::Preset;

fn spec(dim: usize) -> ExperimentSpec {
    ExperimentSpec {
        dim,
        n_range: vec![3, 5],
        problems_per_n: 1,
        starts_per_problem: 2,
        ..ExperimentSpec::full(77)
    }
}

/// A problem written to disk and read back runs identically to the in-memory
/// instance for every method, inline and with sidecar files.
#[test]
fn written_problems_reproduce_in_memory_runs() {
    for dim in [5, 30] {
        let dir = tempfile::tempdir().unwrap();
        let spec = spec(dim);
        for &n in &spec.n_range {
            let gen = experiment_problem(&spec, n, 0).unwrap();
            let path = dir.path().join(problem_file_name(n, 0));
            write_problem(&gen, &path).unwrap();
            let loaded = read_problem(&path).unwrap();
            assert_eq!(loaded.starts.len(), gen.w0.len());
            let direct = gen.instance().unwrap();
            assert_eq!(loaded.instance.beta(), direct.beta());
            for method in Preset::BENCHMARK {
                for (start, w0) in loaded.starts.iter().enumerate() {
                    assert_eq!(w0, &gen.w0[start]);
                    let a = run_method(method, &loaded.instance, w0, &spec).unwrap();
                    let b = run_method(method, &direct, &gen.w0[start], &spec).unwrap();
                    assert_eq!(a.iterations, b.iterations, "{} dim={dim} n={n}", method.name());
                    assert_eq!(a.x, b.x);
                    assert_eq!(a.final_residual, b.final_residual);
                }
            }
        }
    }
}

#[test]
fn emitted_directory_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec(30);
    let paths = emit_problems(&spec, dir.path()).unwrap();
    assert_eq!(paths.len(), spec.n_range.len() * spec.problems_per_n);
    for p in &paths {
        assert!(p.exists());
        read_problem(p).unwrap();
    }
}
