//! Single-file model artifact: abstraction settings, the frozen template
//! registry and the final lookup table.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::abstraction::{AbstractionConfig, MaskRule, MinerState};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::table::{self, ScoreTable, Variant};

pub const MODEL_HEADER: &str = "ncc-model v1";

/// Test split the model was trained under, so evaluation can re-derive the held-out logs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Holdout {
    pub test_fraction: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub miner: MinerState,
    pub table: ScoreTable,
    pub holdout: Option<Holdout>,
}

impl Model {
    pub fn train(train: &Corpus, config: &AbstractionConfig, variant: Variant) -> Result<Self> {
        let (miner, table) = table::build(train, config, variant)?;
        Ok(Model {
            miner,
            table,
            holdout: None,
        })
    }

    pub fn with_holdout(mut self, holdout: Option<Holdout>) -> Self {
        self.holdout = holdout;
        self
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let cfg = self.miner.config();
        let mut head = Vec::new();
        let _ = writeln!(head, "{MODEL_HEADER}");
        let _ = writeln!(head, "tree_depth\t{}", cfg.tree_depth);
        let _ = writeln!(head, "similarity_threshold\t{}", cfg.similarity_threshold);
        let _ = writeln!(head, "max_children\t{}", cfg.max_children);
        let _ = writeln!(head, "masks\t{}", cfg.mask_rules.len());
        for r in &cfg.mask_rules {
            let _ = writeln!(head, "mask\t{}\t{}", r.placeholder(), r.pattern());
        }
        match self.holdout {
            Some(h) => {
                let _ = writeln!(head, "holdout\t{}\t{}", h.test_fraction, h.seed);
            }
            None => {
                let _ = writeln!(head, "holdout\tnone");
            }
        }
        self.miner
            .export_templates(&mut head)
            .expect("write to vec");
        out.write_all(&head)
            .map_err(|e| Error::format("model", e.to_string()))?;
        self.table.write_to(out)
    }

    pub fn read_from<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut next = |field: &str| -> Result<String> {
            let mut line = String::new();
            match input.read_line(&mut line) {
                Ok(0) => Err(Error::format(field, "unexpected end of file")),
                Ok(_) => Ok(line.trim_end_matches(['\n', '\r']).to_owned()),
                Err(e) => Err(Error::format(field, e.to_string())),
            }
        };
        let header = next("model header")?;
        if header != MODEL_HEADER {
            return Err(Error::format(
                "model header",
                format!("unsupported version {header:?}, expected {MODEL_HEADER:?}"),
            ));
        }
        let value = |line: String, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('\t'))
                .map(str::to_owned)
                .ok_or_else(|| Error::format(key, line.clone()))
        };
        let num = |s: String, key: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::format(key, s.clone()))
        };
        let tree_depth = num(value(next("tree_depth")?, "tree_depth")?, "tree_depth")?;
        let threshold_text = value(next("similarity_threshold")?, "similarity_threshold")?;
        let similarity_threshold: f64 = threshold_text
            .parse()
            .map_err(|_| Error::format("similarity_threshold", threshold_text.clone()))?;
        let max_children = num(
            value(next("max_children")?, "max_children")?,
            "max_children",
        )?;
        let masks = num(value(next("masks")?, "masks")?, "masks")?;
        let mut mask_rules = Vec::with_capacity(masks);
        for _ in 0..masks {
            let rest = value(next("mask")?, "mask")?;
            let (placeholder, pattern) = rest
                .split_once('\t')
                .ok_or_else(|| Error::format("mask", rest.clone()))?;
            mask_rules.push(
                MaskRule::new(pattern, placeholder)
                    .map_err(|e| Error::format("mask", e.to_string()))?,
            );
        }
        let holdout_text = value(next("holdout")?, "holdout")?;
        let holdout = if holdout_text == "none" {
            None
        } else {
            let (f, s) = holdout_text
                .split_once('\t')
                .ok_or_else(|| Error::format("holdout", holdout_text.clone()))?;
            Some(Holdout {
                test_fraction: f
                    .parse()
                    .map_err(|_| Error::format("holdout", holdout_text.clone()))?,
                seed: s
                    .parse()
                    .map_err(|_| Error::format("holdout", holdout_text.clone()))?,
            })
        };
        let config = AbstractionConfig {
            tree_depth,
            similarity_threshold,
            max_children,
            mask_rules,
        };
        config
            .validate()
            .map_err(|e| Error::format("abstraction settings", e.to_string()))?;
        let miner = MinerState::import_templates(config, input)?;
        let table = ScoreTable::read_from(input)?;
        Ok(Model {
            miner,
            table,
            holdout,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }
}
