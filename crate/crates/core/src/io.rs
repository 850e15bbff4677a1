//! Problem and triple files.
//!
//! Both formats are TOML. A problem file lists one record per operator, an
//! optional `beta` and optional starting points:
//!
//! ```toml
//! dim = 2
//! beta = 0.5
//! starts = [[4.0, 0.0]]
//!
//! [[resolvents]]
//! type = "ball"
//! center = [0.0, 0.0]
//! radius = 1.0
//!
//! [[resolvents]]
//! type = "box"
//! lo = [-1.0, -1.0]
//! hi = [1.0, 1.0]
//!
//! [[forwards]]
//! type = "quadratic"
//! matrix = [[2.0, 0.0], [0.0, 1.0]]
//! ```
//!
//! Resolvent types are `zero`, `ball`, `box` and `linear` (`matrix`); forward
//! types are `zero` and `quadratic` (`matrix`, optional `beta`). Any vector or
//! matrix may be replaced by `{ csv = "file.csv" }`, a path relative to the
//! problem file holding one row per matrix row (a vector is a single row).
//! Each start is one vector, copied into every governing variable.
//!
//! A triple file gives the order and the three edge lists:
//!
//! ```toml
//! n = 3
//! g_edges = [[1, 2], [1, 3], [2, 3]]
//! gp_edges = [[1, 2], [2, 3]]
//! gpp_edges = [[1, 2], [2, 3]]
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bench::{experiment_problem, ExperimentSpec, GeneratedProblem};
use crate::error::{Error, Result};
use crate::graph::{AlgorithmicGraph, Edge, GraphTriple};
use crate::operators::{
    BallNormalCone, BoxNormalCone, Forward, LinearMonotone, ProblemInstance, QuadraticGradient,
    Resolvent, Vector, ZeroForward, ZeroOperator,
};

/// Largest dimension written inline; larger data goes to sidecar CSV files.
pub const INLINE_DIM_LIMIT: usize = 20;

/// Inline numbers or a sidecar CSV reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorData {
    Inline(Vec<f64>),
    File { csv: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixData {
    Inline(Vec<Vec<f64>>),
    File { csv: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResolventRecord {
    Zero,
    Ball { center: VectorData, radius: f64 },
    Box { lo: VectorData, hi: VectorData },
    Linear { matrix: MatrixData },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ForwardRecord {
    Zero,
    Quadratic {
        matrix: MatrixData,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
}

/// The on-disk form of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<MatrixData>,
    pub resolvents: Vec<ResolventRecord>,
    pub forwards: Vec<ForwardRecord>,
}

/// A problem read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub instance: ProblemInstance,
    pub starts: Vec<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TripleFile {
    n: usize,
    g_edges: Vec<[usize; 2]>,
    gp_edges: Vec<[usize; 2]>,
    gpp_edges: Vec<[usize; 2]>,
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::FileNotFound(path.display().to_string()))
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    require_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(e.to_string()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{}: `{field}`: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_csv_rows(path: &Path, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Io(e.to_string()))?;
    for row in rows {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

fn vector_from_rows(rows: Vec<Vec<f64>>, dim: usize, what: &'static str) -> Result<Vector> {
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    if values.len() != dim {
        return Err(Error::DimensionMismatch {
            what,
            expected: dim,
            found: values.len(),
        });
    }
    Ok(Vector::from_vec(values))
}

fn matrix_from_rows(rows: &[Vec<f64>], cols: usize, what: &'static str) -> Result<DMatrix<f64>> {
    for row in rows {
        if row.len() != cols {
            return Err(Error::DimensionMismatch {
                what,
                expected: cols,
                found: row.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl VectorData {
    fn resolve(&self, dir: &Path, dim: usize, what: &'static str) -> Result<Vector> {
        match self {
            VectorData::Inline(v) => vector_from_rows(vec![v.clone()], dim, what),
            VectorData::File { csv } => vector_from_rows(read_csv_rows(&dir.join(csv))?, dim, what),
        }
    }
}

impl MatrixData {
    fn rows(&self, dir: &Path) -> Result<Vec<Vec<f64>>> {
        match self {
            MatrixData::Inline(rows) => Ok(rows.clone()),
            MatrixData::File { csv } => read_csv_rows(&dir.join(csv)),
        }
    }

    fn square(&self, dir: &Path, dim: usize) -> Result<DMatrix<f64>> {
        let rows = self.rows(dir)?;
        if rows.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "matrix rows",
                expected: dim,
                found: rows.len(),
            });
        }
        matrix_from_rows(&rows, dim, "matrix columns")
    }
}

impl ProblemFile {
    /// Builds the operators, resolving sidecar files against `dir`.
    pub fn load(&self, dir: &Path) -> Result<LoadedProblem> {
        let d = self.dim;
        let resolvents = self
            .resolvents
            .iter()
            .map(|r| -> Result<Arc<dyn Resolvent>> {
                Ok(match r {
                    ResolventRecord::Zero => Arc::new(ZeroOperator),
                    ResolventRecord::Ball { center, radius } => Arc::new(BallNormalCone::new(
                        center.resolve(dir, d, "ball center")?,
                        *radius,
                    )?),
                    ResolventRecord::Box { lo, hi } => Arc::new(BoxNormalCone::new(
                        lo.resolve(dir, d, "box lower bound")?,
                        hi.resolve(dir, d, "box upper bound")?,
                    )?),
                    ResolventRecord::Linear { matrix } => {
                        Arc::new(LinearMonotone::new(matrix.square(dir, d)?)?)
                    }
                })
            })
            .collect::<Result<_>>()?;
        let forwards = self
            .forwards
            .iter()
            .map(|f| -> Result<Arc<dyn Forward>> {
                Ok(match f {
                    ForwardRecord::Zero => Arc::new(ZeroForward),
                    ForwardRecord::Quadratic { matrix, beta } => {
                        let q = matrix.square(dir, d)?;
                        Arc::new(match beta {
                            Some(b) => QuadraticGradient::with_beta(q, *b)?,
                            None => QuadraticGradient::new(q)?,
                        })
                    }
                })
            })
            .collect::<Result<_>>()?;
        let mut instance = ProblemInstance::new(d, resolvents, forwards)?;
        if let Some(beta) = self.beta {
            instance = instance.with_beta(beta)?;
        }
        let starts = match &self.starts {
            None => Vec::new(),
            Some(data) => {
                let rows = data.rows(dir)?;
                matrix_from_rows(&rows, d, "start dimension")?;
                rows.into_iter().map(Vector::from_vec).collect()
            }
        };
        Ok(LoadedProblem { instance, starts })
    }

    /// The file form of a generated instance. With `sidecar = Some((dir, stem))`
    /// and `dim > INLINE_DIM_LIMIT` the data is written to `dir/stem_*.csv`.
    fn from_generated(p: &GeneratedProblem, sidecar: Option<(&Path, &str)>) -> Result<Self> {
        let inline = p.dim() <= INLINE_DIM_LIMIT || sidecar.is_none();
        let vector = |v: &Vector, name: String| -> Result<VectorData> {
            if inline {
                return Ok(VectorData::Inline(v.iter().copied().collect()));
            }
            let (dir, stem) = sidecar.expect("sidecar target");
            let file = format!("{stem}_{name}.csv");
            write_csv_rows(&dir.join(&file), [v.iter().copied().collect()])?;
            Ok(VectorData::File { csv: file })
        };
        let rows_of = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        let matrix = |rows: Vec<Vec<f64>>, name: String| -> Result<MatrixData> {
            if inline {
                return Ok(MatrixData::Inline(rows));
            }
            let (dir, stem) = sidecar.expect("sidecar target");
            let file = format!("{stem}_{name}.csv");
            write_csv_rows(&dir.join(&file), rows)?;
            Ok(MatrixData::File { csv: file })
        };
        let resolvents = p
            .centers
            .iter()
            .zip(&p.radii)
            .enumerate()
            .map(|(i, (c, &r))| {
                Ok(ResolventRecord::Ball {
                    center: vector(c, format!("center{}", i + 1))?,
                    radius: r,
                })
            })
            .collect::<Result<_>>()?;
        let forwards = p
            .q
            .iter()
            .zip(&p.betas)
            .enumerate()
            .map(|(j, (q, &b))| {
                Ok(ForwardRecord::Quadratic {
                    matrix: matrix(rows_of(q), format!("q{}", j + 1))?,
                    beta: Some(b),
                })
            })
            .collect::<Result<_>>()?;
        let starts = matrix(
            p.w0.iter().map(|w| w.iter().copied().collect()).collect(),
            "starts".to_string(),
        )?;
        Ok(Self {
            dim: p.dim(),
            beta: Some(p.beta),
            starts: Some(starts),
            resolvents,
            forwards,
        })
    }
}

/// Parses problem text; sidecar paths are resolved against `dir`.
pub fn parse_problem(text: &str, dir: &Path) -> Result<LoadedProblem> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.load(dir)
}

pub fn read_problem(path: &Path) -> Result<LoadedProblem> {
    require_file(path)?;
    parse_problem(&fs::read_to_string(path)?, &base_dir(path))
}

/// Writes `problem` to `path`, inline up to [`INLINE_DIM_LIMIT`] and with
/// sidecar CSV files next to `path` above it.
pub fn write_problem(problem: &GeneratedProblem, path: &Path) -> Result<()> {
    let dir = base_dir(path);
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Io(format!("bad problem path {}", path.display())))?;
    let file = ProblemFile::from_generated(problem, Some((&dir, stem)))?;
    write_toml(&file, path)
}

/// The inline TOML text of a generated problem, regardless of its dimension.
pub fn problem_to_string(problem: &GeneratedProblem) -> Result<String> {
    let file = ProblemFile::from_generated(problem, None)?;
    toml::to_string(&file).map_err(|e| Error::Parse(e.to_string()))
}

fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// File name used for `(n, problem_id)` by [`emit_problems`].
pub fn problem_file_name(n: usize, problem_id: usize) -> String {
    format!("problem_n{n}_p{problem_id}.toml")
}

/// Writes every instance of `spec` into `dir`, returning the paths in
/// `(n, problem_id)` order.
pub fn emit_problems(spec: &ExperimentSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for &n in &spec.n_range {
        for pid in 0..spec.problems_per_n {
            let path = dir.join(problem_file_name(n, pid));
            write_problem(&experiment_problem(spec, n, pid)?, &path)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

fn to_edges(list: &[[usize; 2]]) -> Vec<Edge> {
    list.iter().map(|&[a, b]| (a, b)).collect()
}

fn from_edges(g: &AlgorithmicGraph) -> Vec<[usize; 2]> {
    g.edges().iter().map(|&(a, b)| [a, b]).collect()
}

pub fn parse_triple(text: &str) -> Result<GraphTriple> {
    let file: TripleFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    GraphTriple::new(
        AlgorithmicGraph::new(file.n, to_edges(&file.g_edges))?,
        AlgorithmicGraph::new(file.n, to_edges(&file.gp_edges))?,
        AlgorithmicGraph::new(file.n, to_edges(&file.gpp_edges))?,
    )
}

pub fn read_triple(path: &Path) -> Result<GraphTriple> {
    require_file(path)?;
    parse_triple(&fs::read_to_string(path)?)
}

pub fn triple_to_string(triple: &GraphTriple) -> Result<String> {
    let file = TripleFile {
        n: triple.order(),
        g_edges: from_edges(triple.graph()),
        gp_edges: from_edges(triple.laplacian_subgraph()),
        gpp_edges: from_edges(triple.forward_subgraph()),
    };
    toml::to_string(&file).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_triple(triple: &GraphTriple, path: &Path) -> Result<()> {
    fs::write(path, triple_to_string(triple)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::generate_problem;
    use crate::graph::Preset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EXAMPLE: &str = r#"
dim = 2
beta = 0.5
starts = [[4.0, 0.0]]

[[resolvents]]
type = "ball"
center = [0.0, 0.0]
radius = 1.0

[[resolvents]]
type = "box"
lo = [-1.0, -1.0]
hi = [1.0, 1.0]

[[forwards]]
type = "quadratic"
matrix = [[2.0, 0.0], [0.0, 1.0]]
"#;

    #[test]
    fn parses_documented_example() {
        let p = parse_problem(EXAMPLE, Path::new(".")).unwrap();
        assert_eq!(p.instance.order(), 2);
        assert_eq!(p.instance.dim(), 2);
        assert_eq!(p.instance.beta(), 0.5);
        assert_eq!(p.starts, vec![Vector::from_vec(vec![4.0, 0.0])]);
        let x = p.instance.resolvent(1).resolve(1.0, &Vector::from_vec(vec![3.0, 4.0]));
        assert!((x - Vector::from_vec(vec![0.6, 0.8])).norm() < 1e-15);
    }

    #[test]
    fn beta_above_tight_constant_is_rejected() {
        let text = EXAMPLE.replace("beta = 0.5", "beta = 0.9");
        assert!(matches!(
            parse_problem(&text, Path::new(".")),
            Err(Error::BetaTooLarge { .. })
        ));
    }

    #[test]
    fn wrong_lengths_are_reported() {
        let text = EXAMPLE.replace("center = [0.0, 0.0]", "center = [0.0]");
        assert_eq!(
            parse_problem(&text, Path::new(".")).unwrap_err(),
            Error::DimensionMismatch {
                what: "ball center",
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            read_problem(Path::new("/definitely/not/here.toml")),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn inline_text_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = generate_problem(5, 3, 2, &mut rng).unwrap();
        let back = parse_problem(&problem_to_string(&g).unwrap(), Path::new(".")).unwrap();
        assert_eq!(back.starts, g.w0);
        assert_eq!(back.instance.beta(), g.beta);
        let probe = Vector::from_fn(5, |i, _| i as f64 - 1.7);
        let orig = g.instance().unwrap();
        for i in 1..=3 {
            assert_eq!(
                back.instance.resolvent(i).resolve(0.3, &probe),
                orig.resolvent(i).resolve(0.3, &probe)
            );
        }
        for j in 1..=2 {
            assert_eq!(back.instance.forward(j).apply(&probe), orig.forward(j).apply(&probe));
            assert_eq!(back.instance.forward(j).beta(), orig.forward(j).beta());
        }
    }

    #[test]
    fn triple_round_trip() {
        let t = Preset::CompletePar.triple(4).unwrap();
        let back = parse_triple(&triple_to_string(&t).unwrap()).unwrap();
        assert_eq!(back.graph(), t.graph());
        assert_eq!(back.forward_subgraph(), t.forward_subgraph());
        assert_eq!(back.predecessors(), t.predecessors());
    }

    #[test]
    fn triple_errors_propagate() {
        let bad = "n = 3\ng_edges = [[2, 1], [2, 3]]\ngp_edges = []\ngpp_edges = []\n";
        assert_eq!(parse_triple(bad).unwrap_err(), Error::EdgeOrderViolation(2, 1));
    }
}
