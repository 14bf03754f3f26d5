use std::collections::{BTreeSet, HashMap};

use super::graph::{GraphDoc, InputSpec, OpDoc, FORMAT, INPUT_ID};
use super::ops::{self, ConvGeom};
use super::store::TensorStore;
use crate::error::{Error, Result};
use crate::stimgen::SourceImage;

/// Output shape of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Spatial { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl Shape {
    pub fn numel(&self) -> usize {
        match *self {
            Shape::Spatial { c, h, w } => c * h * w,
            Shape::Flat(d) => d,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Conv2d {
        geom: ConvGeom,
        weight: Vec<f32>,
        bias: Option<Vec<f32>>,
    },
    Batchnorm {
        eps: f32,
        gamma: Vec<f32>,
        beta: Vec<f32>,
        mean: Vec<f32>,
        var: Vec<f32>,
    },
    Relu,
    Add,
    GlobalAvgPool,
    Fc {
        weight: Vec<f32>,
        bias: Option<Vec<f32>>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub id: String,
    /// Value slots: 0 is the network input, `k + 1` is node `k`.
    pub inputs: Vec<usize>,
    pub op: Op,
    pub shape: Shape,
}

/// A recorded feature map source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tap {
    pub node: String,
    pub layer: u32,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub(crate) node_index: usize,
    pub(crate) conv_index: Option<usize>,
}

/// One tapped feature map for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub node: String,
    pub layer: u32,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// CHW values.
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f32>,
    pub taps: Vec<FeatureMap>,
}

/// A validated, immutable, evaluable network.
#[derive(Debug, Clone)]
pub struct Model {
    input: InputSpec,
    normalization: Option<(Vec<f32>, Vec<f32>)>,
    pub(crate) nodes: Vec<Node>,
    output: usize,
    taps: Vec<Tap>,
    /// Per node, channels forced to zero after the node runs (masking).
    pub(crate) gates: Vec<Option<Vec<bool>>>,
}

impl Model {
    /// Validates `doc` against `store` (including shape inference over the
    /// whole DAG) and builds an evaluable model.
    pub fn load(doc: &GraphDoc, store: &TensorStore) -> Result<Model> {
        if doc.format != FORMAT {
            return Err(Error::load(
                INPUT_ID,
                format!("unsupported graph format `{}` (expected `{FORMAT}`)", doc.format),
            ));
        }
        let input = doc.input;
        if input.channels == 0 || input.height == 0 || input.width == 0 {
            return Err(Error::load(INPUT_ID, "input dimensions must be nonzero"));
        }
        let normalization = match &doc.normalization {
            None => None,
            Some(n) => {
                if n.mean.len() != input.channels || n.std.len() != input.channels {
                    return Err(Error::load(
                        INPUT_ID,
                        "normalization constants must have one entry per input channel",
                    ));
                }
                if n.std.iter().any(|&s| !(s.is_finite() && s > 0.0))
                    || n.mean.iter().any(|m| !m.is_finite())
                {
                    return Err(Error::load(INPUT_ID, "normalization std must be positive and finite"));
                }
                Some((n.mean.clone(), n.std.clone()))
            }
        };

        let mut doc_index: HashMap<&str, usize> = HashMap::new();
        for (k, node) in doc.nodes.iter().enumerate() {
            if node.id.is_empty() || node.id == INPUT_ID {
                return Err(Error::load(&node.id, "node id is empty or reserved"));
            }
            if doc_index.insert(node.id.as_str(), k).is_some() {
                return Err(Error::load(&node.id, "duplicate node id"));
            }
        }

        // Edges in document indices; `None` is the network input.
        let mut edges: Vec<Vec<Option<usize>>> = Vec::with_capacity(doc.nodes.len());
        for node in &doc.nodes {
            if node.inputs.len() != node.op.arity() {
                return Err(Error::load(
                    &node.id,
                    format!(
                        "{} takes {} input(s), got {}",
                        node.op.name(),
                        node.op.arity(),
                        node.inputs.len()
                    ),
                ));
            }
            let resolved = node
                .inputs
                .iter()
                .map(|src| {
                    if src == INPUT_ID {
                        Ok(None)
                    } else {
                        doc_index
                            .get(src.as_str())
                            .map(|&k| Some(k))
                            .ok_or_else(|| Error::load(&node.id, format!("unknown input `{src}`")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            edges.push(resolved);
        }

        let order = topo_order(doc, &edges)?;
        let mut position = vec![usize::MAX; doc.nodes.len()];
        for (pos, &k) in order.iter().enumerate() {
            position[k] = pos;
        }

        let input_shape = Shape::Spatial {
            c: input.channels,
            h: input.height,
            w: input.width,
        };
        let mut nodes: Vec<Node> = Vec::with_capacity(order.len());
        for &k in &order {
            let nd = &doc.nodes[k];
            let inputs: Vec<usize> = edges[k]
                .iter()
                .map(|e| e.map_or(0, |src| position[src] + 1))
                .collect();
            let in_shapes: Vec<Shape> = inputs
                .iter()
                .map(|&slot| if slot == 0 { input_shape } else { nodes[slot - 1].shape })
                .collect();
            let (op, shape) = build_op(&nd.id, &nd.op, &in_shapes, store)?;
            nodes.push(Node {
                id: nd.id.clone(),
                inputs,
                op,
                shape,
            });
        }

        let output = doc_index
            .get(doc.output.as_str())
            .map(|&k| position[k])
            .ok_or_else(|| Error::load(&doc.output, "output node does not exist"))?;

        let mut taps = Vec::with_capacity(doc.taps.len());
        let mut layers = BTreeSet::new();
        for tap in &doc.taps {
            let node_index = doc_index
                .get(tap.node.as_str())
                .map(|&k| position[k])
                .ok_or_else(|| Error::load(&tap.node, "tap refers to an unknown node"))?;
            let Shape::Spatial { c, h, w } = nodes[node_index].shape else {
                return Err(Error::load(&tap.node, "tap node does not produce a spatial feature map"));
            };
            if !layers.insert(tap.layer) {
                return Err(Error::load(&tap.node, format!("layer index {} tapped twice", tap.layer)));
            }
            let conv_index = match &tap.conv {
                None => None,
                Some(conv) => {
                    let idx = doc_index
                        .get(conv.as_str())
                        .map(|&k| position[k])
                        .ok_or_else(|| Error::load(&tap.node, format!("tap conv `{conv}` does not exist")))?;
                    match &nodes[idx].op {
                        Op::Conv2d { geom, .. } if geom.out_ch == c => Some(idx),
                        _ => {
                            return Err(Error::load(
                                &tap.node,
                                format!("tap conv `{conv}` is not a conv2d with {c} output channels"),
                            ))
                        }
                    }
                }
            };
            taps.push(Tap {
                node: tap.node.clone(),
                layer: tap.layer,
                channels: c,
                height: h,
                width: w,
                node_index,
                conv_index,
            });
        }
        taps.sort_by_key(|t| t.layer);

        let gates = vec![None; nodes.len()];
        Ok(Model {
            input,
            normalization,
            nodes,
            output,
            taps,
            gates,
        })
    }

    pub fn input_spec(&self) -> InputSpec {
        self.input
    }

    /// Taps in ascending layer order.
    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn output_shape(&self) -> Shape {
        self.nodes[self.output].shape
    }

    /// `(id, op name, output shape)` for every node in evaluation order.
    pub fn summary(&self) -> Vec<(String, &'static str, Shape)> {
        self.nodes
            .iter()
            .map(|n| {
                let name = match n.op {
                    Op::Conv2d { .. } => "conv2d",
                    Op::Batchnorm { .. } => "batchnorm",
                    Op::Relu => "relu",
                    Op::Add => "add",
                    Op::GlobalAvgPool => "global_avg_pool",
                    Op::Fc { .. } => "fc",
                };
                (n.id.clone(), name, n.shape)
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match &n.op {
                Op::Conv2d { weight, bias, .. } | Op::Fc { weight, bias } => {
                    weight.len() + bias.as_ref().map_or(0, Vec::len)
                }
                Op::Batchnorm { gamma, .. } => 4 * gamma.len(),
                _ => 0,
            })
            .sum()
    }

    /// Runs one frame and records every tap.
    pub fn forward_with_taps(&self, frame: &SourceImage) -> Result<ForwardOutput> {
        if frame.width() != self.input.width
            || frame.height() != self.input.height
            || SourceImage::CHANNELS != self.input.channels
        {
            return Err(Error::arg(format!(
                "frame is {}x{}x{} but the model expects {}x{}x{}",
                frame.width(),
                frame.height(),
                SourceImage::CHANNELS,
                self.input.width,
                self.input.height,
                self.input.channels
            )));
        }
        self.forward_tensor(frame.data())
    }

    /// Runs a raw CHW input of the model's input shape.
    pub fn forward_tensor(&self, input: &[f32]) -> Result<ForwardOutput> {
        let values = self.run(input)?;
        let taps = self
            .taps
            .iter()
            .map(|t| FeatureMap {
                node: t.node.clone(),
                layer: t.layer,
                channels: t.channels,
                height: t.height,
                width: t.width,
                data: values[t.node_index + 1].clone(),
            })
            .collect();
        let logits = values[self.output + 1].clone();
        Ok(ForwardOutput { logits, taps })
    }

    /// Evaluates all nodes; slot 0 holds the normalized input.
    fn run(&self, input: &[f32]) -> Result<Vec<Vec<f32>>> {
        let numel = self.input.channels * self.input.height * self.input.width;
        if input.len() != numel {
            return Err(Error::arg(format!(
                "input has {} values, model expects {numel}",
                input.len()
            )));
        }
        let mut x = input.to_vec();
        if let Some((mean, std)) = &self.normalization {
            let plane = self.input.height * self.input.width;
            for c in 0..self.input.channels {
                for v in &mut x[c * plane..(c + 1) * plane] {
                    *v = (*v - mean[c]) / std[c];
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                node: INPUT_ID.to_owned(),
            });
        }

        let mut values: Vec<Vec<f32>> = Vec::with_capacity(self.nodes.len() + 1);
        values.push(x);
        for (k, node) in self.nodes.iter().enumerate() {
            let mut out = vec![0.0f32; node.shape.numel()];
            let src = &values[node.inputs[0]];
            match &node.op {
                Op::Conv2d { geom, weight, bias } => {
                    ops::conv2d(geom, src, weight, bias.as_deref(), &mut out);
                }
                Op::Batchnorm {
                    eps,
                    gamma,
                    beta,
                    mean,
                    var,
                } => {
                    out.copy_from_slice(src);
                    ops::batchnorm(&mut out, gamma.len(), gamma, beta, mean, var, *eps);
                }
                Op::Relu => {
                    out.copy_from_slice(src);
                    ops::relu(&mut out);
                }
                Op::Add => ops::add(src, &values[node.inputs[1]], &mut out),
                Op::GlobalAvgPool => {
                    let Shape::Flat(c) = node.shape else { unreachable!() };
                    ops::global_avg_pool(src, c, &mut out);
                }
                Op::Fc { weight, bias } => ops::fc(src, weight, bias.as_deref(), &mut out),
            }
            if let Some(gate) = &self.gates[k] {
                let plane = out.len() / gate.len();
                for (c, &zeroed) in gate.iter().enumerate() {
                    if zeroed {
                        out[c * plane..(c + 1) * plane].fill(0.0);
                    }
                }
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    node: node.id.clone(),
                });
            }
            values.push(out);
        }
        Ok(values)
    }
}

/// Kahn's algorithm, always taking the earliest ready node in document order.
fn topo_order(doc: &GraphDoc, edges: &[Vec<Option<usize>>]) -> Result<Vec<usize>> {
    let n = doc.nodes.len();
    let mut indegree = vec![0usize; n];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, srcs) in edges.iter().enumerate() {
        for src in srcs.iter().flatten() {
            indegree[k] += 1;
            consumers[*src].push(k);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&k| indegree[k] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(k) = ready.pop_first() {
        order.push(k);
        for &c in &consumers[k] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != n {
        let stuck = (0..n).find(|&k| indegree[k] > 0).expect("some node is on a cycle");
        return Err(Error::load(&doc.nodes[stuck].id, "graph contains a cycle"));
    }
    Ok(order)
}

fn tensor(store: &TensorStore, node: &str, name: &str, shape: &[usize]) -> Result<Vec<f32>> {
    let t = store
        .get(name)
        .ok_or_else(|| Error::load(node, format!("missing tensor `{name}`")))?;
    if t.shape != shape {
        return Err(Error::load(
            node,
            format!("tensor `{name}` has shape {:?}, expected {shape:?}", t.shape),
        ));
    }
    Ok(t.data.clone())
}

fn build_op(id: &str, op: &OpDoc, inputs: &[Shape], store: &TensorStore) -> Result<(Op, Shape)> {
    let spatial = |s: Shape| match s {
        Shape::Spatial { c, h, w } => Ok((c, h, w)),
        Shape::Flat(_) => Err(Error::load(id, "expects a spatial input")),
    };
    match op {
        OpDoc::Conv2d {
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
            weight,
            bias,
        } => {
            let (c, h, w) = spatial(inputs[0])?;
            if c != *in_ch {
                return Err(Error::load(id, format!("in_ch is {in_ch} but input has {c} channels")));
            }
            if *out_ch == 0 {
                return Err(Error::load(id, "out_ch must be positive"));
            }
            let geom = ConvGeom {
                in_ch: *in_ch,
                out_ch: *out_ch,
                kernel: *kernel,
                stride: *stride,
                pad: *pad,
                in_h: h,
                in_w: w,
            };
            let (oh, ow) = geom
                .out_dims()
                .ok_or_else(|| Error::load(id, "kernel/stride do not fit the padded input"))?;
            let weight = tensor(store, id, weight, &[*out_ch, *in_ch, *kernel, *kernel])?;
            let bias = bias
                .as_ref()
                .map(|b| tensor(store, id, b, &[*out_ch]))
                .transpose()?;
            Ok((
                Op::Conv2d { geom, weight, bias },
                Shape::Spatial {
                    c: *out_ch,
                    h: oh,
                    w: ow,
                },
            ))
        }
        OpDoc::Batchnorm {
            ch,
            eps,
            gamma,
            beta,
            mean,
            var,
        } => {
            let (c, _, _) = spatial(inputs[0])?;
            if c != *ch {
                return Err(Error::load(id, format!("ch is {ch} but input has {c} channels")));
            }
            if !(eps.is_finite() && *eps >= 0.0) {
                return Err(Error::load(id, "eps must be finite and nonnegative"));
            }
            let op = Op::Batchnorm {
                eps: *eps,
                gamma: tensor(store, id, gamma, &[*ch])?,
                beta: tensor(store, id, beta, &[*ch])?,
                mean: tensor(store, id, mean, &[*ch])?,
                var: tensor(store, id, var, &[*ch])?,
            };
            if let Op::Batchnorm { var, eps, .. } = &op {
                if var.iter().any(|&v| !((v + eps).is_finite() && v + eps > 0.0)) {
                    return Err(Error::load(id, "running variance + eps must be positive"));
                }
            }
            Ok((op, inputs[0]))
        }
        OpDoc::Relu => Ok((Op::Relu, inputs[0])),
        OpDoc::Add => {
            if inputs[0] != inputs[1] {
                return Err(Error::load(
                    id,
                    format!("add operands differ in shape: {:?} vs {:?}", inputs[0], inputs[1]),
                ));
            }
            Ok((Op::Add, inputs[0]))
        }
        OpDoc::GlobalAvgPool => {
            let (c, _, _) = spatial(inputs[0])?;
            Ok((Op::GlobalAvgPool, Shape::Flat(c)))
        }
        OpDoc::Fc {
            in_dim,
            out_dim,
            weight,
            bias,
        } => {
            let d = match inputs[0] {
                Shape::Flat(d) => d,
                Shape::Spatial { .. } => return Err(Error::load(id, "fc expects a flat input")),
            };
            if d != *in_dim {
                return Err(Error::load(id, format!("in_dim is {in_dim} but input has {d} features")));
            }
            let weight = tensor(store, id, weight, &[*out_dim, *in_dim])?;
            let bias = bias
                .as_ref()
                .map(|b| tensor(store, id, b, &[*out_dim]))
                .transpose()?;
            Ok((Op::Fc { weight, bias }, Shape::Flat(*out_dim)))
        }
    }
}
