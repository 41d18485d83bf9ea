//! The detector network.
//!
//! Layout (input edge S, base width w):
//!
//! ```text
//! stem:    conv3x3 s2 -> conv3x3 s2                        stride 4,  w
//! stage 1: conv3x3 s2 -> cascaded-residual block           stride 8,  w    = P3
//! stage 2: conv3x3 s2 -> cascaded-residual block           stride 16, 2w   = P4
//! stage 3: conv3x3 s2 -> cascaded-residual block -> SPPF   stride 32, 4w   = P5
//! neck:    P5 --up2--> cat P4 -> pconv -> conv1x1          stride 16, 2w   = N4
//!          N4 --up2--> cat P3 -> pconv -> conv1x1          stride 8,  w    = N3
//! heads:   1x1 conv to 5 + num_classes channels on N3, N4, P5
//! ```
//!
//! Heads are anchor-free: each grid cell predicts one box as
//! (tx, ty, tw, th, objectness, per-class scores), all raw logits.

use super::blocks::{ConvLayer, PConv, ResC2Block, Sppf};
use super::config::{ModelConfig, STRIDES};
use super::init::Init;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tape, Tensor};

/// One head's raw output: `[N, 5 + num_classes, grid, grid]` at `stride`.
pub struct PredGrid<T: Scalar> {
    pub tensor: Tensor<T>,
    pub stride: usize,
    pub grid: usize,
}

pub struct Detector<T: Scalar> {
    pub config: ModelConfig,
    stem: [ConvLayer<T>; 2],
    downs: [ConvLayer<T>; 3],
    blocks: [ResC2Block<T>; 3],
    sppf: Sppf<T>,
    neck4_pconv: PConv<T>,
    neck4_conv: ConvLayer<T>,
    neck3_pconv: PConv<T>,
    neck3_conv: ConvLayer<T>,
    heads: [ConvLayer<T>; 3],
}

impl<T: Scalar> Detector<T> {
    /// Build with freshly initialized weights (deterministic in
    /// `config.seed`).
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut init = Init::new(config.seed);
        let w = config.width;
        let n = config.resc2net_n;
        let hc = config.head_channels();
        let stem = [
            ConvLayer::new(&mut init, config.input_channels, w, 3, 2, 1, true),
            ConvLayer::new(&mut init, w, w, 3, 2, 1, true),
        ];
        let downs = [
            ConvLayer::new(&mut init, w, w, 3, 2, 1, true),
            ConvLayer::new(&mut init, w, 2 * w, 3, 2, 1, true),
            ConvLayer::new(&mut init, 2 * w, 4 * w, 3, 2, 1, true),
        ];
        let blocks = [
            ResC2Block::new(&mut init, w, n),
            ResC2Block::new(&mut init, 2 * w, n),
            ResC2Block::new(&mut init, 4 * w, n),
        ];
        let sppf = Sppf::new(&mut init, 4 * w, &config.sppf_kernels);
        let ratio = config.pconv_ratio;
        let neck4_pconv = PConv::new(&mut init, 6 * w, ratio.of(6 * w));
        let neck4_conv = ConvLayer::new(&mut init, 6 * w, 2 * w, 1, 1, 0, true);
        let neck3_pconv = PConv::new(&mut init, 3 * w, ratio.of(3 * w));
        let neck3_conv = ConvLayer::new(&mut init, 3 * w, w, 1, 1, 0, true);
        let heads = [
            ConvLayer::new(&mut init, w, hc, 1, 1, 0, false),
            ConvLayer::new(&mut init, 2 * w, hc, 1, 1, 0, false),
            ConvLayer::new(&mut init, 4 * w, hc, 1, 1, 0, false),
        ];
        Ok(Detector {
            config: config.clone(),
            stem,
            downs,
            blocks,
            sppf,
            neck4_pconv,
            neck4_conv,
            neck3_pconv,
            neck3_conv,
            heads,
        })
    }

    /// Run the network. `input` must be `[N, input_channels, S, S]` with S
    /// equal to the configured input size. Returns one prediction grid per
    /// stride, shallow (8) to deep (32).
    pub fn forward(&self, tape: &mut Tape<T>, input: &Tensor<T>) -> Result<[PredGrid<T>; 3]> {
        let s = input.shape();
        let cfg = &self.config;
        if s.len() != 4 || s[1] != cfg.input_channels || s[2] != cfg.input_size || s[3] != cfg.input_size
        {
            return Err(Error::Shape(format!(
                "detector expects [N, {}, {}, {}], got {s:?}",
                cfg.input_channels, cfg.input_size, cfg.input_size
            )));
        }

        let x = self.stem[0].forward(tape, input)?;
        let x = self.stem[1].forward(tape, &x)?;

        let x = self.downs[0].forward(tape, &x)?;
        let p3 = self.blocks[0].forward(tape, &x)?;
        let x = self.downs[1].forward(tape, &p3)?;
        let p4 = self.blocks[1].forward(tape, &x)?;
        let x = self.downs[2].forward(tape, &p4)?;
        let x = self.blocks[2].forward(tape, &x)?;
        let p5 = self.sppf.forward(tape, &x)?;

        let up5 = tape.upsample_nearest(&p5, 2)?;
        let cat4 = tape.concat(&[&up5, &p4], 1)?;
        let n4 = self.neck4_pconv.forward(tape, &cat4)?;
        let n4 = self.neck4_conv.forward(tape, &n4)?;

        let up4 = tape.upsample_nearest(&n4, 2)?;
        let cat3 = tape.concat(&[&up4, &p3], 1)?;
        let n3 = self.neck3_pconv.forward(tape, &cat3)?;
        let n3 = self.neck3_conv.forward(tape, &n3)?;

        let outs = [
            self.heads[0].forward(tape, &n3)?,
            self.heads[1].forward(tape, &n4)?,
            self.heads[2].forward(tape, &p5)?,
        ];
        let grids = cfg.grid_sizes();
        let mut iter = outs.into_iter();
        Ok([0, 1, 2].map(|i| PredGrid {
            tensor: iter.next().unwrap(),
            stride: STRIDES[i],
            grid: grids[i],
        }))
    }

    /// All trainable parameters in a stable order with stable names.
    pub fn named_params(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::new();
        self.stem[0].collect_params("stem.0", &mut out);
        self.stem[1].collect_params("stem.1", &mut out);
        for (i, (down, block)) in self.downs.iter().zip(self.blocks.iter()).enumerate() {
            down.collect_params(&format!("stage{}.down", i + 1), &mut out);
            block.collect_params(&format!("stage{}.block", i + 1), &mut out);
        }
        self.sppf.collect_params("sppf", &mut out);
        self.neck4_pconv.collect_params("neck4.pconv", &mut out);
        self.neck4_conv.collect_params("neck4.conv", &mut out);
        self.neck3_pconv.collect_params("neck3.pconv", &mut out);
        self.neck3_conv.collect_params("neck3.conv", &mut out);
        for (head, stride) in self.heads.iter().zip(STRIDES) {
            head.collect_params(&format!("head{stride}"), &mut out);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn zero_grads(&self) {
        for (_, t) in self.named_params() {
            t.zero_grad();
        }
    }

    /// Copy every parameter from another detector of the same shape.
    pub fn load_from<U: Scalar>(&self, other: &Detector<U>) {
        let mine = self.named_params();
        let theirs = other.named_params();
        assert_eq!(mine.len(), theirs.len(), "parameter count mismatch");
        for ((name_a, a), (name_b, b)) in mine.iter().zip(theirs.iter()) {
            assert_eq!(name_a, name_b, "parameter order mismatch");
            let src: Tensor<T> = b.cast();
            a.set_data(&src.to_vec());
        }
    }
}
