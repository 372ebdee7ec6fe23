//! Line-oriented text formats: word vectors, constraint pairs and
//! similarity benchmarks.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lexspec_core::constraints::{strip_language_prefix, ConstraintSet, PairStats, Relation, SourceTag};
use lexspec_core::eval::{SimilarityDataset, SimilarityRecord};
use lexspec_core::VectorSpace;

use crate::error::{Error, Result};

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// How the optional `n d` first line of a vector file is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderPolicy {
    /// a first line of exactly two integers is a header
    #[default]
    Auto,
    Require,
    Forbid,
}

impl FromStr for HeaderPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(HeaderPolicy::Auto),
            "require" => Ok(HeaderPolicy::Require),
            "forbid" => Ok(HeaderPolicy::Forbid),
            _ => Err(format!("unknown header policy `{s}` (auto, require, forbid)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmbeddingStats {
    pub header: Option<(usize, usize)>,
    pub records: usize,
    pub duplicates: usize,
}

fn as_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let n = it.next()?.parse().ok()?;
    let d = it.next()?.parse().ok()?;
    it.next().is_none().then_some((n, d))
}

/// Parses vectors from `reader`; `path` is only used in error messages.
pub fn read_embeddings<R: BufRead>(
    reader: R,
    policy: HeaderPolicy,
    path: &Path,
) -> Result<(VectorSpace, EmbeddingStats)> {
    let mut stats = EmbeddingStats::default();
    let mut records = Vec::new();
    let mut dim: Option<usize> = None;
    let mut first = true;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if first {
            first = false;
            let header = match policy {
                HeaderPolicy::Forbid => None,
                HeaderPolicy::Auto => as_header(&line),
                HeaderPolicy::Require => {
                    Some(as_header(&line).ok_or_else(|| Error::parse(path, lineno, "expected an `n d` header"))?)
                }
            };
            if let Some((n, d)) = header {
                if d == 0 {
                    return Err(Error::parse(path, lineno, "header declares dimension 0"));
                }
                stats.header = Some((n, d));
                dim = Some(d);
                continue;
            }
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(path, lineno, format!("`{f}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let d = *dim.get_or_insert(values.len());
        if values.len() != d || d == 0 {
            return Err(Error::parse(
                path,
                lineno,
                format!("`{token}` has {} values, expected {d}", values.len()),
            ));
        }
        records.push((token, values));
    }
    if records.is_empty() {
        return Err(Error::Validation(format!("{}: no vectors", path.display())));
    }
    stats.records = records.len();
    let (space, duplicates) = VectorSpace::from_records(records)?;
    stats.duplicates = duplicates;
    Ok((space, stats))
}

pub fn load_embeddings(path: &Path, policy: HeaderPolicy) -> Result<(VectorSpace, EmbeddingStats)> {
    read_embeddings(open(path)?, policy, path)
}

/// Writes one `token v1 … vd` line per word with six decimals.
pub fn write_embeddings<W: Write>(space: &VectorSpace, mut out: W, with_header: bool) -> std::io::Result<()> {
    if with_header {
        writeln!(out, "{} {}", space.len(), space.dim())?;
    }
    for (token, v) in space.iter() {
        out.write_all(token.as_bytes())?;
        for x in v {
            write!(out, " {x:.6}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_embeddings(space: &VectorSpace, path: &Path, with_header: bool) -> Result<()> {
    if let Some(bad) = space.words().iter().find(|w| w.chars().any(char::is_whitespace)) {
        return Err(Error::Validation(format!("token `{bad}` contains whitespace")));
    }
    write_embeddings(space, create(path)?, with_header).map_err(|e| Error::io(path, e))
}

/// Reads `a b` pairs, one per line. With `strip_prefix`, `en_`-style
/// language prefixes are removed first.
pub fn read_constraint_pairs<R: BufRead>(
    reader: R,
    relation: Relation,
    tag: SourceTag,
    strip_prefix: bool,
    path: &Path,
) -> Result<(ConstraintSet, PairStats)> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [a, b] => {
                let (a, b) = if strip_prefix {
                    (strip_language_prefix(a), strip_language_prefix(b))
                } else {
                    (*a, *b)
                };
                pairs.push((a.to_string(), b.to_string()));
            }
            _ => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected two tokens, found {}", fields.len()),
                ))
            }
        }
    }
    Ok(ConstraintSet::from_pairs(relation, tag, pairs))
}

pub fn load_constraint_pairs(
    path: &Path,
    relation: Relation,
    tag: SourceTag,
    strip_prefix: bool,
) -> Result<(ConstraintSet, PairStats)> {
    read_constraint_pairs(open(path)?, relation, tag, strip_prefix, path)
}

pub fn save_constraint_pairs<'a, I>(pairs: I, path: &Path) -> Result<()>
where
    I: IntoIterator<Item = &'a lexspec_core::constraints::WordPair>,
{
    let mut out = create(path)?;
    let write = || -> std::io::Result<()> {
        for p in pairs {
            writeln!(out, "{} {}", p.first(), p.second())?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub const DEFAULT_SCORE_COLUMN: &str = "SimLex999";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetFormat {
    /// `word1 word2 score` per line
    Plain3col,
    /// tab-separated with a header row naming `word1`, `word2` and the
    /// score column
    SimlexTsv { score_column: String },
}

impl DatasetFormat {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetFormat::Plain3col => "plain3col",
            DatasetFormat::SimlexTsv { .. } => "simlex_tsv",
        }
    }
}

/// A dataset argument of the form `format:path`, where format is
/// `plain3col`, `simlex_tsv` or `simlex_tsv[Column]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSpec {
    pub format: DatasetFormat,
    pub path: PathBuf,
}

impl FromStr for DatasetSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (fmt, path) = s
            .split_once(':')
            .ok_or_else(|| format!("dataset `{s}` must be written as format:path"))?;
        if path.is_empty() {
            return Err(format!("dataset `{s}` has an empty path"));
        }
        let format = match fmt {
            "plain3col" => DatasetFormat::Plain3col,
            "simlex_tsv" => DatasetFormat::SimlexTsv {
                score_column: DEFAULT_SCORE_COLUMN.into(),
            },
            _ => match fmt.strip_prefix("simlex_tsv[").and_then(|r| r.strip_suffix(']')) {
                Some(col) if !col.is_empty() => DatasetFormat::SimlexTsv {
                    score_column: col.into(),
                },
                _ => return Err(format!("unknown dataset format `{fmt}` (plain3col, simlex_tsv[Column])")),
            },
        };
        Ok(DatasetSpec {
            format,
            path: PathBuf::from(path),
        })
    }
}

impl std::fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.format {
            DatasetFormat::Plain3col => write!(f, "plain3col:{}", self.path.display()),
            DatasetFormat::SimlexTsv { score_column } if score_column == DEFAULT_SCORE_COLUMN => {
                write!(f, "simlex_tsv:{}", self.path.display())
            }
            DatasetFormat::SimlexTsv { score_column } => {
                write!(f, "simlex_tsv[{score_column}]:{}", self.path.display())
            }
        }
    }
}

fn score(field: &str, path: &Path, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(path, line, format!("`{field}` is not a finite score")))
}

pub fn read_similarity_dataset<R: BufRead>(
    reader: R,
    format: &DatasetFormat,
    name: &str,
    path: &Path,
) -> Result<SimilarityDataset> {
    let mut records = Vec::new();
    let mut columns: Option<(usize, usize, usize)> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match format {
            DatasetFormat::Plain3col => {
                let f: Vec<&str> = line.split_whitespace().collect();
                let [a, b, s] = f.as_slice() else {
                    return Err(Error::parse(path, lineno, format!("expected 3 fields, found {}", f.len())));
                };
                records.push(SimilarityRecord {
                    first: a.to_string(),
                    second: b.to_string(),
                    gold: score(s, path, lineno)?,
                });
            }
            DatasetFormat::SimlexTsv { score_column } => {
                let f: Vec<&str> = line.split('\t').map(str::trim).collect();
                let Some((c1, c2, cs)) = columns else {
                    let find = |name: &str| {
                        f.iter()
                            .position(|h| *h == name)
                            .ok_or_else(|| Error::parse(path, lineno, format!("missing column `{name}`")))
                    };
                    columns = Some((find("word1")?, find("word2")?, find(score_column)?));
                    continue;
                };
                let need = c1.max(c2).max(cs);
                if f.len() <= need {
                    return Err(Error::parse(path, lineno, format!("expected at least {} fields", need + 1)));
                }
                records.push(SimilarityRecord {
                    first: f[c1].to_string(),
                    second: f[c2].to_string(),
                    gold: score(f[cs], path, lineno)?,
                });
            }
        }
    }
    SimilarityDataset::new(name, records).map_err(|e| match e {
        lexspec_core::Error::DuplicatePair(a, b) => {
            Error::Validation(format!("{}: duplicate pair ({a}, {b})", path.display()))
        }
        other => other.into(),
    })
}

pub fn load_similarity_dataset(spec: &DatasetSpec) -> Result<SimilarityDataset> {
    let name = spec
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    read_similarity_dataset(open(&spec.path)?, &spec.format, &name, &spec.path)
}

pub fn save_plain3col(ds: &SimilarityDataset, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        for r in ds.records() {
            writeln!(out, "{} {} {}", r.first, r.second, r.gold)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(text: &str, policy: HeaderPolicy) -> Result<(VectorSpace, EmbeddingStats)> {
        read_embeddings(text.as_bytes(), policy, Path::new("mem"))
    }

    #[test]
    fn plain_vectors() {
        let (s, st) = emb("a 1 0\nb 0 1\n", HeaderPolicy::Auto).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 2));
        assert_eq!(s.vector("a").unwrap(), &[1.0, 0.0]);
        assert_eq!(st.header, None);
    }

    #[test]
    fn header_is_consumed() {
        let (s, st) = emb("2 2\na 1 0\nb 0 1", HeaderPolicy::Auto).unwrap();
        assert_eq!(s.words(), ["a", "b"]);
        assert_eq!(st.header, Some((2, 2)));
        assert!(emb("a 1 0\nb 0 1", HeaderPolicy::Require).is_err());
        let (s, _) = emb("2 2\n3 4\n", HeaderPolicy::Forbid).unwrap();
        assert_eq!(s.dim(), 1);
    }

    #[test]
    fn duplicates_first_wins() {
        let (s, st) = emb("a 1 0\na 2 0", HeaderPolicy::Auto).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.vector("a").unwrap(), &[1.0, 0.0]);
        assert_eq!(st.duplicates, 1);
    }

    #[test]
    fn malformed_vectors() {
        assert!(matches!(emb("a 1 0\nb 1", HeaderPolicy::Auto), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(emb("a 1 x", HeaderPolicy::Auto), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(emb("a 1 nan", HeaderPolicy::Auto), Err(Error::Parse { .. })));
        assert!(emb("", HeaderPolicy::Auto).is_err());
        assert!(emb("a", HeaderPolicy::Auto).is_err());
    }

    #[test]
    fn header_line_written() {
        let (s, _) = emb("a 1 0 0 0 0\nb 0 1 0 0 0\nc 0 0 1 0 0", HeaderPolicy::Auto).unwrap();
        let mut buf = Vec::new();
        write_embeddings(&s, &mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("3 5"));
        assert!(text.contains("a 1.000000 0.000000"));
    }

    #[test]
    fn constraint_lines() {
        let p = Path::new("mem");
        let (cs, st) = read_constraint_pairs(
            "hot hot\nen_cold en_chilly\n\nchilly cold\n".as_bytes(),
            Relation::Synonym,
            SourceTag::External,
            true,
            p,
        )
        .unwrap();
        assert_eq!(cs.synonyms().len(), 1);
        assert_eq!((st.self_pairs, st.duplicates), (1, 1));
        let err = read_constraint_pairs("a b c\n".as_bytes(), Relation::Antonym, SourceTag::External, false, p);
        assert!(matches!(err, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn dataset_parsing() {
        let p = Path::new("mem");
        let ds = read_similarity_dataset("cold chilly 8.1\nold new 1.0".as_bytes(), &DatasetFormat::Plain3col, "x", p)
            .unwrap();
        assert_eq!(ds.len(), 2);
        let tsv = "word1\tword2\tPOS\tSimLex999\nold\tnew\tA\t1.58\nsmart\tintelligent\tA\t9.2\n";
        let fmt = DatasetFormat::SimlexTsv {
            score_column: DEFAULT_SCORE_COLUMN.into(),
        };
        let ds = read_similarity_dataset(tsv.as_bytes(), &fmt, "simlex", p).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records()[0].gold, 1.58);
        let other = DatasetFormat::SimlexTsv {
            score_column: "Assoc".into(),
        };
        assert!(read_similarity_dataset(tsv.as_bytes(), &other, "simlex", p).is_err());
        let dup = read_similarity_dataset("a b 1\nb a 2\n".as_bytes(), &DatasetFormat::Plain3col, "d", p);
        assert!(dup.unwrap_err().to_string().contains("(b, a)"));
        assert!(read_similarity_dataset("a b\n".as_bytes(), &DatasetFormat::Plain3col, "d", p).is_err());
    }

    #[test]
    fn dataset_spec_syntax() {
        let s: DatasetSpec = "plain3col:ws.txt".parse().unwrap();
        assert_eq!(s.format, DatasetFormat::Plain3col);
        assert_eq!(s.path, PathBuf::from("ws.txt"));
        let s: DatasetSpec = "simlex_tsv[SimVerb]:data/sv.tsv".parse().unwrap();
        assert_eq!(
            s.format,
            DatasetFormat::SimlexTsv {
                score_column: "SimVerb".into()
            }
        );
        assert_eq!(s.to_string(), "simlex_tsv[SimVerb]:data/sv.tsv");
        assert!("ws.txt".parse::<DatasetSpec>().is_err());
        assert!("csv:ws.txt".parse::<DatasetSpec>().is_err());
    }
}
