//! Plain-text parameter checkpoints.
//!
//! ```text
//! herb-checkpoint 1
//! model herb
//! config <hash>
//! seed 3
//! dims <in> <hidden> <classes> <localizer 0|1>
//! param layer1.weight 1433 32
//! <row values separated by spaces>
//! ...
//! ```
//! Values use Rust's shortest round-trip formatting, so a reload is exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HerbError, Result};
use crate::model::{HerbParams, ModelKind};
use crate::tensor::Matrix;

const MAGIC: &str = "herb-checkpoint 1";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ModelKind,
    pub config_hash: String,
    pub seed: u64,
    pub in_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub params: HerbParams,
}

impl Checkpoint {
    pub fn new(model: ModelKind, config_hash: &str, seed: u64, params: HerbParams) -> Self {
        let w1 = params.params.value(params.layers[0].weight);
        let w2 = params.params.value(params.layers[1].weight);
        Checkpoint {
            model,
            config_hash: config_hash.into(),
            seed,
            in_dim: w1.rows(),
            hidden: w1.cols(),
            classes: w2.cols(),
            params,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "model {}", self.model);
        let _ = writeln!(s, "config {}", self.config_hash);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(
            s,
            "dims {} {} {} {}",
            self.in_dim,
            self.hidden,
            self.classes,
            u8::from(self.params.localizer.is_some())
        );
        for (_, name, t) in self.params.params.iter() {
            let m = &t.value;
            let _ = writeln!(s, "param {name} {} {}", m.rows(), m.cols());
            for i in 0..m.rows() {
                let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| HerbError::io(dir, e))?;
        }
        std::fs::write(path, self.to_text()).map_err(|e| HerbError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HerbError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: String| HerbError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")))
        };
        let (ln, magic) = next("header")?;
        if magic.trim() != MAGIC {
            return Err(err(ln, format!("not a checkpoint (header '{magic}')")));
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (ln, l) = next(key)?;
            match l.split_once(' ') {
                Some((k, v)) if k == key => Ok((ln, v.trim().to_string())),
                _ => Err(err(ln, format!("expected '{key} ...', got '{l}'"))),
            }
        };
        let (ln, model) = field("model")?;
        let model: ModelKind = model.parse().map_err(|e: HerbError| err(ln, e.to_string()))?;
        let (_, config_hash) = field("config")?;
        let (ln, seed) = field("seed")?;
        let seed: u64 = seed.parse().map_err(|_| err(ln, format!("bad seed '{seed}'")))?;
        let (ln, dims) = field("dims")?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(ln, format!("bad dims '{dims}'")))?;
        let [in_dim, hidden, classes, loc] = dims[..] else {
            return Err(err(ln, "dims needs four integers".into()));
        };
        let mut params = HerbParams::init(in_dim, hidden, classes, loc == 1, seed);
        let mut filled = 0;
        while let Ok((ln, header)) = next("param") {
            if header.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = header.split_whitespace().collect();
            let ["param", name, r, c] = parts[..] else {
                return Err(err(ln, format!("expected 'param <name> <rows> <cols>', got '{header}'")));
            };
            let id = params
                .params
                .find(name)
                .ok_or_else(|| err(ln, format!("unknown parameter '{name}'")))?;
            let (rows, cols) = (
                r.parse::<usize>().map_err(|_| err(ln, "bad row count".into()))?,
                c.parse::<usize>().map_err(|_| err(ln, "bad column count".into()))?,
            );
            let expected = params.params.value(id).shape();
            if (rows, cols) != expected {
                return Err(err(ln, format!("{name}: shape {rows}x{cols}, model expects {expected:?}")));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, row) = next("matrix row")?;
                let before = data.len();
                for tok in row.split_whitespace() {
                    data.push(tok.parse::<f64>().map_err(|_| err(ln, format!("bad value '{tok}'")))?);
                }
                if data.len() - before != cols {
                    return Err(err(ln, format!("{name}: row has {} values, expected {cols}", data.len() - before)));
                }
            }
            params.params.get_mut(id).value = Matrix::new(rows, cols, data)?;
            filled += 1;
        }
        if filled != params.params.len() {
            return Err(err(
                0,
                format!("checkpoint holds {filled} of {} parameters", params.params.len()),
            ));
        }
        Ok(Checkpoint {
            model,
            config_hash,
            seed,
            in_dim,
            hidden,
            classes,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let params = HerbParams::init(5, 4, 3, true, 11);
        let ck = Checkpoint::new(ModelKind::Herb, "abc", 11, params.clone());
        let back = Checkpoint::parse(&ck.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back.seed, 11);
        assert_eq!(back.config_hash, "abc");
        for (id, name, t) in params.params.iter() {
            assert_eq!(back.params.params.name(id), name);
            assert_eq!(back.params.params.value(id), &t.value);
        }
    }

    #[test]
    fn shape_mismatch_is_reported_with_line() {
        let ck = Checkpoint::new(ModelKind::Gcn, "h", 0, HerbParams::init(3, 2, 2, false, 0));
        let text = ck.to_text().replace("param layer1.weight 3 2", "param layer1.weight 3 3");
        let e = Checkpoint::parse(&text, Path::new("x")).unwrap_err();
        assert!(matches!(e, HerbError::Parse { line: 6, .. }), "{e}");
    }
}
