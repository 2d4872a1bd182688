//! Model checkpoints: a short text header (kind, seed, config echo, structure)
//! followed by named tensors stored as little-endian `f32` or as text.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::activation::Activation;
use super::lstm::{LstmLayer, LstmModel, SequenceLoss};
use super::network::{DenseLayer, Network};
use super::{ModelKind, Scaling, TupleClassifier};
use crate::error::{Error, Result};

const MAGIC: &str = "drugner-checkpoint 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    fn matrix(name: impl Into<String>, a: &Array2<f64>) -> Self {
        NamedTensor {
            name: name.into(),
            shape: a.shape().to_vec(),
            data: a.iter().map(|&v| v as f32).collect(),
        }
    }

    fn vector(name: impl Into<String>, a: &[f64]) -> Self {
        NamedTensor {
            name: name.into(),
            shape: vec![a.len()],
            data: a.iter().map(|&v| v as f32).collect(),
        }
    }

    fn to_matrix(&self) -> Result<Array2<f64>> {
        let [r, c] = self.shape[..] else {
            return Err(Error::data(format!("tensor `{}` is not a matrix", self.name)));
        };
        Array2::from_shape_vec((r, c), self.data.iter().map(|&v| f64::from(v)).collect())
            .map_err(|e| Error::data(format!("tensor `{}`: {e}", self.name)))
    }

    fn to_vector(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub seed: u64,
    /// Echo of the training configuration.
    pub config: Value,
    /// Non-tensor parts needed to rebuild the model.
    pub structure: Value,
    pub tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct ClassifierStructure {
    activations: Vec<Activation>,
    scaling: &'static str,
}

#[derive(Serialize, Deserialize)]
struct ClassifierStructureOwned {
    activations: Vec<Activation>,
    scaling: String,
}

#[derive(Serialize, Deserialize)]
struct LstmStructure {
    layers: usize,
    loss: SequenceLoss,
    threshold: f64,
}

fn next_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    let n = r.read_line(&mut line).map_err(|e| Error::data(format!("checkpoint: {e}")))?;
    if n == 0 {
        return Err(Error::data("checkpoint truncated"));
    }
    Ok(line.trim_end_matches('\n').to_string())
}

fn field<R: BufRead>(r: &mut R, key: &str) -> Result<String> {
    let line = next_line(r)?;
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .map(str::to_string)
        .ok_or_else(|| Error::data(format!("checkpoint: expected `{key}`, found `{line}`")))
}

impl Checkpoint {
    fn tensor(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::data(format!("checkpoint lacks tensor `{name}`")))
    }

    pub fn from_classifier(model: &TupleClassifier, seed: u64, config: Value) -> Self {
        let mut tensors = Vec::new();
        for (i, layer) in model.network.layers.iter().enumerate() {
            tensors.push(NamedTensor::matrix(format!("layer{i}.weights"), &layer.weights));
            tensors.push(NamedTensor::vector(format!("layer{i}.bias"), layer.bias.as_slice().unwrap()));
        }
        let scaling = match &model.scaling {
            Scaling::Identity => "identity",
            Scaling::Affine => "affine",
            Scaling::MinMax { min, max } => {
                tensors.push(NamedTensor::vector("scaling.min", min));
                tensors.push(NamedTensor::vector("scaling.max", max));
                "min_max"
            }
        };
        let structure = ClassifierStructure {
            activations: model.network.layers.iter().map(|l| l.activation).collect(),
            scaling,
        };
        Checkpoint {
            kind: model.kind,
            seed,
            config,
            structure: serde_json::to_value(structure).expect("serializable"),
            tensors,
        }
    }

    pub fn to_classifier(&self) -> Result<TupleClassifier> {
        if self.kind == ModelKind::Lstm {
            return Err(Error::data("checkpoint holds an LSTM, not a tuple classifier"));
        }
        let s: ClassifierStructureOwned =
            serde_json::from_value(self.structure.clone()).map_err(|e| Error::data(format!("checkpoint structure: {e}")))?;
        let layers = s
            .activations
            .iter()
            .enumerate()
            .map(|(i, &activation)| {
                Ok(DenseLayer {
                    weights: self.tensor(&format!("layer{i}.weights"))?.to_matrix()?,
                    bias: Array1::from(self.tensor(&format!("layer{i}.bias"))?.to_vector()),
                    activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scaling = match s.scaling.as_str() {
            "identity" => Scaling::Identity,
            "affine" => Scaling::Affine,
            "min_max" => Scaling::MinMax {
                min: self.tensor("scaling.min")?.to_vector(),
                max: self.tensor("scaling.max")?.to_vector(),
            },
            other => return Err(Error::data(format!("unknown scaling `{other}`"))),
        };
        Ok(TupleClassifier {
            kind: self.kind,
            scaling,
            network: Network { layers },
        })
    }

    pub fn from_lstm(model: &LstmModel, seed: u64, config: Value) -> Self {
        let mut m = model.clone();
        let shapes: Vec<Vec<usize>> = model
            .layers
            .iter()
            .flat_map(|l| {
                [&l.w_f, &l.w_g, &l.w_o, &l.u_f, &l.u_g, &l.u_o]
                    .into_iter()
                    .map(|a| a.shape().to_vec())
                    .chain([&l.p_f, &l.p_o, &l.b_f, &l.b_g, &l.b_o].into_iter().map(|a| vec![a.len()]))
                    .collect::<Vec<_>>()
            })
            .chain([vec![model.w_out.len()], vec![1]])
            .collect();
        let tensors = m
            .tensors_mut()
            .into_iter()
            .zip(shapes)
            .map(|((name, data), shape)| NamedTensor {
                name,
                shape,
                data: data.iter().map(|&v| v as f32).collect(),
            })
            .collect();
        let structure = LstmStructure {
            layers: model.layers.len(),
            loss: model.loss,
            threshold: model.threshold,
        };
        Checkpoint {
            kind: ModelKind::Lstm,
            seed,
            config,
            structure: serde_json::to_value(structure).expect("serializable"),
            tensors,
        }
    }

    pub fn to_lstm(&self) -> Result<LstmModel> {
        if self.kind != ModelKind::Lstm {
            return Err(Error::data(format!("checkpoint holds a {} model, not an LSTM", self.kind)));
        }
        let s: LstmStructure =
            serde_json::from_value(self.structure.clone()).map_err(|e| Error::data(format!("checkpoint structure: {e}")))?;
        let m = |name: String| self.tensor(&name).and_then(NamedTensor::to_matrix);
        let v = |name: String| self.tensor(&name).map(|t| Array1::from(t.to_vector()));
        let layers = (0..s.layers)
            .map(|i| {
                Ok(LstmLayer {
                    w_f: m(format!("layer{i}.w_f"))?,
                    w_g: m(format!("layer{i}.w_g"))?,
                    w_o: m(format!("layer{i}.w_o"))?,
                    u_f: m(format!("layer{i}.u_f"))?,
                    u_g: m(format!("layer{i}.u_g"))?,
                    u_o: m(format!("layer{i}.u_o"))?,
                    p_f: v(format!("layer{i}.p_f"))?,
                    p_o: v(format!("layer{i}.p_o"))?,
                    b_f: v(format!("layer{i}.b_f"))?,
                    b_g: v(format!("layer{i}.b_g"))?,
                    b_o: v(format!("layer{i}.b_o"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LstmModel {
            layers,
            w_out: v("w_out".into())?,
            b_out: v("b_out".into())?,
            loss: s.loss,
            threshold: s.threshold,
        })
    }

    fn write_header<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "kind {}", self.kind)?;
        writeln!(w, "seed {}", self.seed)?;
        writeln!(w, "config {}", self.config)?;
        writeln!(w, "structure {}", self.structure)?;
        writeln!(w, "tensors {}", self.tensors.len())
    }

    fn shape_string(shape: &[usize]) -> String {
        shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        self.write_header(&mut w)?;
        for t in &self.tensors {
            writeln!(w, "tensor {} {}", t.name, Self::shape_string(&t.shape))?;
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_header(&mut out).expect("in-memory write");
        let mut out = String::from_utf8(out).expect("utf-8 header");
        for t in &self.tensors {
            out.push_str(&format!("tensor {} {}\n", t.name, Self::shape_string(&t.shape)));
            let values: Vec<String> = t.data.iter().map(f32::to_string).collect();
            out.push_str(&values.join(" "));
            out.push('\n');
        }
        out
    }

    /// Reads either variant; `binary` selects how tensor payloads are decoded.
    pub fn read<R: BufRead>(mut r: R, binary: bool) -> Result<Self> {
        if next_line(&mut r)? != MAGIC {
            return Err(Error::data("not a checkpoint file"));
        }
        let kind: ModelKind = field(&mut r, "kind")?.parse()?;
        let seed: u64 = field(&mut r, "seed")?.parse().map_err(|_| Error::data("checkpoint: bad seed"))?;
        let config: Value = serde_json::from_str(&field(&mut r, "config")?).map_err(|e| Error::data(format!("checkpoint config: {e}")))?;
        let structure: Value =
            serde_json::from_str(&field(&mut r, "structure")?).map_err(|e| Error::data(format!("checkpoint structure: {e}")))?;
        let count: usize = field(&mut r, "tensors")?.parse().map_err(|_| Error::data("checkpoint: bad tensor count"))?;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let header = field(&mut r, "tensor")?;
            let (name, shape) = header.split_once(' ').ok_or_else(|| Error::data("checkpoint: bad tensor header"))?;
            let shape: Vec<usize> = shape
                .split('x')
                .map(|d| d.parse().map_err(|_| Error::data(format!("checkpoint: bad shape `{shape}`"))))
                .collect::<Result<_>>()?;
            let len: usize = shape.iter().product();
            let data = if binary {
                let mut bytes = vec![0u8; len * 4 + 1];
                r.read_exact(&mut bytes).map_err(|_| Error::data(format!("checkpoint: tensor `{name}` truncated")))?;
                bytes[..len * 4]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect()
            } else {
                let line = next_line(&mut r)?;
                let values: Vec<f32> = line
                    .split_whitespace()
                    .map(|v| v.parse().map_err(|_| Error::data(format!("checkpoint: bad value `{v}`"))))
                    .collect::<Result<_>>()?;
                if values.len() != len {
                    return Err(Error::data(format!("checkpoint: tensor `{name}` has {} values, shape needs {len}", values.len())));
                }
                values
            };
            tensors.push(NamedTensor {
                name: name.to_string(),
                shape,
                data,
            });
        }
        Ok(Checkpoint {
            kind,
            seed,
            config,
            structure,
            tensors,
        })
    }

    /// Binary unless the extension is `.txt`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = path.extension().is_some_and(|e| e == "txt");
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        if text {
            w.write_all(self.to_text().as_bytes())
        } else {
            self.write_binary(&mut w)
        }
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = path.extension().is_some_and(|e| e == "txt");
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::read(std::io::BufReader::new(file), !text)
    }
}
