//! Deterministic fixture models and images.
//!
//! The shipped files under `crates/core/fixtures/` are produced by
//! `cargo run -p freqtag --example make_fixtures`; tests check that the
//! generators below still reproduce them byte for byte.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cifar;
use crate::stimgen::SourceImage;
use crate::tinynet::graph::{GraphDoc, InputSpec, NodeDoc, OpDoc, TapDoc, FORMAT, INPUT_ID};
use crate::tinynet::{NamedTensor, TensorStore};

pub const RESNET_SEED: u64 = 32;
/// Clips the shipped two-filter model mid-modulation on mid-grey images.
pub const TWO_FILTER_BIAS: f32 = -0.375;
pub const IMAGE_SEED: u64 = 10;

/// Directory holding the shipped fixture files.
pub fn shipped_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Accumulates nodes, tensors and taps while a graph is being built.
struct Builder {
    rng: ChaCha8Rng,
    nodes: Vec<NodeDoc>,
    store: TensorStore,
    taps: Vec<TapDoc>,
}

impl Builder {
    fn new(seed: u64) -> Self {
        Builder {
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: Vec::new(),
            store: TensorStore::new(),
            taps: Vec::new(),
        }
    }

    fn tensor(&mut self, name: &str, shape: Vec<usize>, data: Vec<f32>) -> String {
        self.store
            .insert(NamedTensor::new(name, shape, data).expect("fixture shapes are consistent"))
            .expect("fixture names are unique");
        name.to_owned()
    }

    fn uniform(&mut self, n: usize, lo: f32, hi: f32) -> Vec<f32> {
        (0..n).map(|_| self.rng.gen_range(lo..hi)).collect()
    }

    fn node(&mut self, id: &str, inputs: &[&str], op: OpDoc) -> String {
        self.nodes.push(NodeDoc {
            id: id.to_owned(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            op,
        });
        id.to_owned()
    }

    /// He-uniform conv without bias.
    fn conv(&mut self, id: &str, input: &str, in_ch: usize, out_ch: usize, kernel: usize, stride: usize) -> String {
        let fan_in = (in_ch * kernel * kernel) as f32;
        let bound = (6.0 / fan_in).sqrt();
        let w = self.uniform(out_ch * in_ch * kernel * kernel, -bound, bound);
        let weight = self.tensor(&format!("{id}.weight"), vec![out_ch, in_ch, kernel, kernel], w);
        self.node(
            id,
            &[input],
            OpDoc::Conv2d {
                in_ch,
                out_ch,
                kernel,
                stride,
                pad: kernel / 2,
                weight,
                bias: None,
            },
        )
    }

    fn bn(&mut self, id: &str, input: &str, ch: usize, gamma_range: (f32, f32)) -> String {
        let g = self.uniform(ch, gamma_range.0, gamma_range.1);
        let b = self.uniform(ch, -0.1, 0.1);
        let m = self.uniform(ch, -0.1, 0.1);
        let v = self.uniform(ch, 0.8, 1.2);
        let gamma = self.tensor(&format!("{id}.gamma"), vec![ch], g);
        let beta = self.tensor(&format!("{id}.beta"), vec![ch], b);
        let mean = self.tensor(&format!("{id}.running_mean"), vec![ch], m);
        let var = self.tensor(&format!("{id}.running_var"), vec![ch], v);
        self.node(
            id,
            &[input],
            OpDoc::Batchnorm {
                ch,
                eps: 1e-5,
                gamma,
                beta,
                mean,
                var,
            },
        )
    }

    fn relu(&mut self, id: &str, input: &str) -> String {
        self.node(id, &[input], OpDoc::Relu)
    }

    fn tap(&mut self, node: &str, layer: u32, conv: &str) {
        self.taps.push(TapDoc {
            node: node.to_owned(),
            layer,
            conv: Some(conv.to_owned()),
        });
    }

    fn finish(self, input: InputSpec, output: String) -> (GraphDoc, TensorStore) {
        (
            GraphDoc {
                format: FORMAT.to_owned(),
                input,
                normalization: None,
                nodes: self.nodes,
                output,
                taps: self.taps,
            },
            self.store,
        )
    }
}

/// CIFAR-style ResNet: a 16-channel stem, three stages of `blocks_per_stage`
/// basic blocks with widths 16/32/64, global average pooling and a 10-way fc.
///
/// With 5 blocks per stage this is the 32-layer variant: taps are numbered
/// 1..=31 along the main path (stem, then two convs per block). Stage
/// transitions use a strided 1x1 projection shortcut, which is not tapped.
pub fn resnet_cifar(blocks_per_stage: usize, seed: u64) -> (GraphDoc, TensorStore) {
    let mut b = Builder::new(seed);
    let mut layer = 1u32;

    let stem = b.conv("stem.conv", INPUT_ID, 3, 16, 3, 1);
    let stem_bn = b.bn("stem.bn", &stem, 16, (0.8, 1.2));
    let mut x = b.relu("stem.relu", &stem_bn);
    b.tap(&x, layer, &stem);
    layer += 1;

    let mut in_ch = 16;
    for (s, &width) in [16usize, 32, 64].iter().enumerate() {
        for blk in 0..blocks_per_stage {
            let p = format!("s{}.b{}", s + 1, blk + 1);
            let stride = if s > 0 && blk == 0 { 2 } else { 1 };

            let c1 = b.conv(&format!("{p}.conv1"), &x, in_ch, width, 3, stride);
            let n1 = b.bn(&format!("{p}.bn1"), &c1, width, (0.8, 1.2));
            let r1 = b.relu(&format!("{p}.relu1"), &n1);
            b.tap(&r1, layer, &c1);
            layer += 1;

            let c2 = b.conv(&format!("{p}.conv2"), &r1, width, width, 3, 1);
            let n2 = b.bn(&format!("{p}.bn2"), &c2, width, (0.2, 0.4));

            let shortcut = if stride != 1 || in_ch != width {
                let pc = b.conv(&format!("{p}.proj"), &x, in_ch, width, 1, stride);
                b.bn(&format!("{p}.proj_bn"), &pc, width, (0.8, 1.2))
            } else {
                x.clone()
            };
            let sum = b.node(&format!("{p}.add"), &[&n2, &shortcut], OpDoc::Add);
            x = b.relu(&format!("{p}.relu2"), &sum);
            b.tap(&x, layer, &c2);
            layer += 1;
            in_ch = width;
        }
    }

    let pooled = b.node("pool", &[&x], OpDoc::GlobalAvgPool);
    let bound = (1.0 / 64.0f32).sqrt();
    let w = b.uniform(10 * 64, -bound, bound);
    let fc_w = b.tensor("fc.weight", vec![10, 64], w);
    let bias = b.uniform(10, -0.1, 0.1);
    let fc_b = b.tensor("fc.bias", vec![10], bias);
    let out = b.node(
        "fc",
        &[&pooled],
        OpDoc::Fc {
            in_dim: 64,
            out_dim: 10,
            weight: fc_w,
            bias: Some(fc_b),
        },
    );
    b.finish(
        InputSpec {
            channels: 3,
            height: 32,
            width: 32,
        },
        out,
    )
}

/// Two filters whose single 32x32 kernel spans the whole image, so each
/// output sees both halves.
///
/// Filter 0 weighs both halves equally, filter 1 weighs the left half 3:1.
/// On a uniform image of value `v` the pre-activations are `v (c_L + c_R)/2`
/// and `v (3 c_L + c_R)/4`. With `relu_bias = Some(b)` both filters get bias
/// `b` and a relu, and the relu output is tapped; with `None` the bias-free
/// conv itself is tapped and the model is linear in its input.
pub fn two_filter_model(relu_bias: Option<f32>) -> (GraphDoc, TensorStore) {
    let mut b = Builder::new(0);
    let side = 32usize;
    let per_channel = (3 * side * side) as f32;
    let mut w = Vec::with_capacity(2 * 3 * side * side);
    for (left, right) in [(1.0f32, 1.0f32), (1.5, 0.5)] {
        for _c in 0..3 {
            for _y in 0..side {
                for x in 0..side {
                    w.push(if x < side / 2 { left } else { right } / per_channel);
                }
            }
        }
    }
    let weight = b.tensor("tag.weight", vec![2, 3, side, side], w);
    let bias_vals = vec![relu_bias.unwrap_or(0.0); 2];
    let bias = b.tensor("tag.bias", vec![2], bias_vals);
    let conv = b.node(
        "tag",
        &[INPUT_ID],
        OpDoc::Conv2d {
            in_ch: 3,
            out_ch: 2,
            kernel: side,
            stride: 1,
            pad: 0,
            weight,
            bias: Some(bias),
        },
    );
    let tapped = if relu_bias.is_some() {
        b.relu("tag.relu", &conv)
    } else {
        conv.clone()
    };
    b.tap(&tapped, 1, &conv);
    let pooled = b.node("pool", &[&tapped], OpDoc::GlobalAvgPool);
    let fc_w: Vec<f32> = (0..20).map(|k| if k % 3 == 0 { 1.0 } else { -0.5 }).collect();
    let fc_w = b.tensor("fc.weight", vec![10, 2], fc_w);
    let fc_b = b.tensor("fc.bias", vec![10], (0..10).map(|k| k as f32 * 0.01).collect());
    let out = b.node(
        "fc",
        &[&pooled],
        OpDoc::Fc {
            in_dim: 2,
            out_dim: 10,
            weight: fc_w,
            bias: Some(fc_b),
        },
    );
    b.finish(
        InputSpec {
            channels: 3,
            height: side,
            width: side,
        },
        out,
    )
}

/// Smooth synthetic 32x32 images with random labels, quantized to bytes so
/// they survive a CIFAR-10 round trip unchanged.
pub fn synthetic_images(count: usize, seed: u64) -> Vec<(SourceImage, u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = cifar::SIDE;
    (0..count)
        .map(|_| {
            let mut data = Vec::with_capacity(3 * side * side);
            for _c in 0..3 {
                let base: f64 = rng.gen_range(0.3..0.7);
                let waves: Vec<(f64, f64, f64, f64)> = (0..3)
                    .map(|_| {
                        (
                            rng.gen_range(-0.4..0.4),
                            rng.gen_range(-0.4..0.4),
                            rng.gen_range(0.0..std::f64::consts::TAU),
                            rng.gen_range(0.05..0.15),
                        )
                    })
                    .collect();
                for y in 0..side {
                    for x in 0..side {
                        let v = waves.iter().fold(base, |acc, &(kx, ky, ph, amp)| {
                            acc + amp * (kx * x as f64 + ky * y as f64 + ph).sin()
                        });
                        let byte = (v.clamp(0.0, 1.0) * 255.0).round();
                        data.push((byte / 255.0) as f32);
                    }
                }
            }
            let label = rng.gen_range(0..cifar::NUM_CLASSES);
            (
                SourceImage::new(side, side, data).expect("values are clamped to [0, 1]"),
                label,
            )
        })
        .collect()
}

/// A shipped fixture as (graph file, weights file) names.
pub struct FixtureFiles {
    pub graph: &'static str,
    pub weights: &'static str,
}

pub const RESNET32: FixtureFiles = FixtureFiles {
    graph: "resnet32.graph.json",
    weights: "resnet32.ssvw",
};

pub const TWO_FILTER: FixtureFiles = FixtureFiles {
    graph: "two_filter.graph.json",
    weights: "two_filter.ssvw",
};

pub const IMAGES5: &str = "images5.bin";
pub const IMAGES2: &str = "images2.bin";

/// Every shipped file with its expected contents.
pub fn shipped_files() -> Vec<(&'static str, Vec<u8>)> {
    let (rg, rs) = resnet_cifar(5, RESNET_SEED);
    let (tg, ts) = two_filter_model(Some(TWO_FILTER_BIAS));
    let images = synthetic_images(5, IMAGE_SEED);
    vec![
        (RESNET32.graph, rg.to_json().into_bytes()),
        (RESNET32.weights, rs.to_bytes()),
        (TWO_FILTER.graph, tg.to_json().into_bytes()),
        (TWO_FILTER.weights, ts.to_bytes()),
        (IMAGES5, cifar::encode_records(&images).expect("fixture images are 32x32")),
        (IMAGES2, cifar::encode_records(&images[..2]).expect("fixture images are 32x32")),
    ]
}
