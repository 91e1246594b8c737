//! Versioned text dump of trained models. Floating-point values are
//! written with Rust's shortest round-tripping formatting, so a load
//! reproduces `predict_proba` bit-exactly on the same platform.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{
    Dims, Forest, ForestModel, LabelHead, LogisticHead, LogisticModel, Network, NetworkModel,
    Node, TrainedModel, Tree,
};

const MAGIC: &str = "alpool-model v1";

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let content = fs::read_to_string(path)?;
    read_model(&content)
}

pub fn write_model(model: &TrainedModel) -> String {
    let mut out = format!("{MAGIC}\n");
    match model {
        TrainedModel::Logistic(m) => {
            out.push_str(&format!("kind lr\ndim {}\nlabels {}\n", m.dim, m.heads.len()));
            for (j, head) in m.heads.iter().enumerate() {
                match head {
                    LabelHead::Constant(c) => out.push_str(&format!("head {j} constant {c}\n")),
                    LabelHead::Fit(h) => {
                        out.push_str(&format!(
                            "head {j} fit {} {}\nbias {}\nweights {}\n",
                            h.iterations,
                            h.final_loss,
                            h.bias,
                            join_floats(&h.weights)
                        ));
                    }
                }
            }
        }
        TrainedModel::Forest(m) => {
            out.push_str(&format!("kind rf\ndim {}\nlabels {}\n", m.dim, m.heads.len()));
            for (j, head) in m.heads.iter().enumerate() {
                match head {
                    LabelHead::Constant(c) => out.push_str(&format!("head {j} constant {c}\n")),
                    LabelHead::Fit(f) => {
                        out.push_str(&format!("head {j} fit\ntrees {}\n", f.trees.len()));
                        for tree in &f.trees {
                            out.push_str(&format!("tree {}\n", tree.nodes.len()));
                            for node in &tree.nodes {
                                match node {
                                    Node::Split { feature, threshold, left, right } => out
                                        .push_str(&format!(
                                            "split {feature} {threshold} {left} {right}\n"
                                        )),
                                    Node::Leaf { positive } => {
                                        out.push_str(&format!("leaf {}\n", u8::from(*positive)))
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        TrainedModel::Network(m) => {
            let d = &m.net.dims;
            out.push_str(&format!(
                "kind fnn\ndim {}\nlabels {}\nhidden {} {}\nepochs {}\nfinal_loss {}\n",
                d.input, d.output, d.h1, d.h2, m.net.epochs_run, m.net.final_loss
            ));
            for (j, o) in m.overrides.iter().enumerate() {
                if let Some(c) = o {
                    out.push_str(&format!("override {j} {c}\n"));
                }
            }
            out.push_str(&format!("params {}\n", m.net.params.len()));
            for chunk in m.net.params.chunks(256) {
                out.push_str(&join_floats(chunk));
                out.push('\n');
            }
        }
    }
    out
}

fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.iter.next().ok_or_else(|| Error::ModelDump {
            reason: format!("unexpected end of dump at line {}", self.line_no),
        })
    }
}

fn dump_err(line_no: usize, reason: &str) -> Error {
    Error::ModelDump { reason: format!("line {line_no}: {reason}") }
}

fn parse_f64(s: &str, line_no: usize) -> Result<f64> {
    s.parse().map_err(|_| dump_err(line_no, &format!("bad float `{s}`")))
}

fn parse_usize(s: &str, line_no: usize) -> Result<usize> {
    s.parse().map_err(|_| dump_err(line_no, &format!("bad integer `{s}`")))
}

fn parse_floats(s: &str, line_no: usize) -> Result<Vec<f64>> {
    s.split(' ').map(|v| parse_f64(v, line_no)).collect()
}

/// Field `name value...` → values, checking the tag.
fn tagged<'a>(line: &'a str, tag: &str, line_no: usize) -> Result<&'a str> {
    line.strip_prefix(tag)
        .and_then(|rest| rest.strip_prefix(' ').or(Some(rest).filter(|r| r.is_empty())))
        .ok_or_else(|| dump_err(line_no, &format!("expected `{tag} ...`, got `{line}`")))
}

pub fn read_model(content: &str) -> Result<TrainedModel> {
    let mut lines = Lines { iter: content.lines(), line_no: 0 };
    if lines.next()? != MAGIC {
        return Err(dump_err(1, "missing header"));
    }
    let kind = tagged(lines.next()?, "kind", lines.line_no)?.to_string();
    let dim = parse_usize(tagged(lines.next()?, "dim", lines.line_no)?, lines.line_no)?;
    let labels = parse_usize(tagged(lines.next()?, "labels", lines.line_no)?, lines.line_no)?;

    match kind.as_str() {
        "lr" => {
            let mut heads = Vec::with_capacity(labels);
            for j in 0..labels {
                let head_line = tagged(lines.next()?, &format!("head {j}"), lines.line_no)?;
                let parts: Vec<&str> = head_line.split(' ').collect();
                match parts.as_slice() {
                    ["constant", c] => heads.push(LabelHead::Constant(parse_f64(c, lines.line_no)?)),
                    ["fit", iters, loss] => {
                        let iterations = parse_usize(iters, lines.line_no)?;
                        let final_loss = parse_f64(loss, lines.line_no)?;
                        let bias =
                            parse_f64(tagged(lines.next()?, "bias", lines.line_no)?, lines.line_no)?;
                        let weights = parse_floats(
                            tagged(lines.next()?, "weights", lines.line_no)?,
                            lines.line_no,
                        )?;
                        if weights.len() != dim {
                            return Err(dump_err(lines.line_no, "weight count != dim"));
                        }
                        heads.push(LabelHead::Fit(LogisticHead {
                            weights,
                            bias,
                            iterations,
                            final_loss,
                            loss_history: Vec::new(),
                        }));
                    }
                    _ => return Err(dump_err(lines.line_no, "bad head line")),
                }
            }
            Ok(TrainedModel::Logistic(LogisticModel { dim, heads }))
        }
        "rf" => {
            let mut heads = Vec::with_capacity(labels);
            for j in 0..labels {
                let head_line = tagged(lines.next()?, &format!("head {j}"), lines.line_no)?;
                let parts: Vec<&str> = head_line.split(' ').collect();
                match parts.as_slice() {
                    ["constant", c] => heads.push(LabelHead::Constant(parse_f64(c, lines.line_no)?)),
                    ["fit"] => {
                        let n_trees = parse_usize(
                            tagged(lines.next()?, "trees", lines.line_no)?,
                            lines.line_no,
                        )?;
                        let mut trees = Vec::with_capacity(n_trees);
                        for _ in 0..n_trees {
                            let n_nodes = parse_usize(
                                tagged(lines.next()?, "tree", lines.line_no)?,
                                lines.line_no,
                            )?;
                            let mut nodes = Vec::with_capacity(n_nodes);
                            for _ in 0..n_nodes {
                                let line = lines.next()?;
                                let parts: Vec<&str> = line.split(' ').collect();
                                let node = match parts.as_slice() {
                                    ["split", f, t, l, r] => Node::Split {
                                        feature: parse_usize(f, lines.line_no)?,
                                        threshold: parse_f64(t, lines.line_no)?,
                                        left: parse_usize(l, lines.line_no)?,
                                        right: parse_usize(r, lines.line_no)?,
                                    },
                                    ["leaf", v] => Node::Leaf {
                                        positive: parse_usize(v, lines.line_no)? != 0,
                                    },
                                    _ => return Err(dump_err(lines.line_no, "bad node line")),
                                };
                                nodes.push(node);
                            }
                            trees.push(Tree { nodes });
                        }
                        heads.push(LabelHead::Fit(Forest { trees }));
                    }
                    _ => return Err(dump_err(lines.line_no, "bad head line")),
                }
            }
            Ok(TrainedModel::Forest(ForestModel { dim, heads }))
        }
        "fnn" => {
            let hidden = parse_floats(tagged(lines.next()?, "hidden", lines.line_no)?, lines.line_no)?;
            if hidden.len() != 2 {
                return Err(dump_err(lines.line_no, "hidden must list two sizes"));
            }
            let epochs = parse_usize(tagged(lines.next()?, "epochs", lines.line_no)?, lines.line_no)?;
            let final_loss =
                parse_f64(tagged(lines.next()?, "final_loss", lines.line_no)?, lines.line_no)?;
            let dims = Dims {
                input: dim,
                h1: hidden[0] as usize,
                h2: hidden[1] as usize,
                output: labels,
            };
            let mut overrides: Vec<Option<f64>> = vec![None; labels];
            let mut params: Vec<f64> = Vec::new();
            let n_params = loop {
                let line = lines.next()?;
                if let Some(rest) = line.strip_prefix("override ") {
                    let parts: Vec<&str> = rest.split(' ').collect();
                    if parts.len() != 2 {
                        return Err(dump_err(lines.line_no, "bad override line"));
                    }
                    let j = parse_usize(parts[0], lines.line_no)?;
                    if j >= labels {
                        return Err(dump_err(lines.line_no, "override label out of range"));
                    }
                    overrides[j] = Some(parse_f64(parts[1], lines.line_no)?);
                } else if let Some(rest) = line.strip_prefix("params ") {
                    break parse_usize(rest, lines.line_no)?;
                } else {
                    return Err(dump_err(lines.line_no, "expected override or params"));
                }
            };
            if n_params != dims.n_params() {
                return Err(dump_err(lines.line_no, "param count does not match dims"));
            }
            while params.len() < n_params {
                params.extend(parse_floats(lines.next()?, lines.line_no)?);
            }
            if params.len() != n_params {
                return Err(dump_err(lines.line_no, "trailing parameter values"));
            }
            Ok(TrainedModel::Network(NetworkModel {
                net: Network { dims, params, epochs_run: epochs, final_loss },
                overrides,
            }))
        }
        other => Err(Error::UnknownModel { name: other.to_string() }),
    }
}
