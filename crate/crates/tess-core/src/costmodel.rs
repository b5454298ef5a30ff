//! Analytical training-cost accounting: multiply-accumulate counts and
//! learning-memory footprints for full-unroll backprop, a step-truncated
//! trace rule, and the local rule implemented here, plus the symbolic
//! complexity comparison across the wider rule family.
//!
//! Conventions. Layer widths run from the input (width 0) through every
//! layer including pools. Forward MACs per layer are its connection count,
//! which for convolutions is output activations times kernel fan-in. Signal
//! MACs for the local rule are two basis passes per trainable layer per
//! update step. The headline memory figures follow the two-scalars-per-width
//! estimate; [`tess_exact_learning_scalars`] gives the per-allocation count
//! (input trace plus optional slope trace per trainable layer), which is
//! what a live allocation audit actually observes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::network::{walk_shapes, LayerSpec, WalkedLayer};
use crate::{CoreError, CoreResult};

/// Training rule whose cost is being modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostRule {
    Bptt,
    Stllr,
    Tess,
}

impl CostRule {
    pub fn name(&self) -> &'static str {
        match self {
            CostRule::Bptt => "bptt",
            CostRule::Stllr => "s-tllr",
            CostRule::Tess => "tess",
        }
    }
}

/// One layer as the cost model sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchLayer {
    pub label: String,
    /// Width feeding the layer.
    pub in_neurons: u64,
    /// Width the layer produces.
    pub neurons: u64,
    /// Forward multiply-accumulates per step.
    pub connections: u64,
    pub weighted: bool,
}

/// Architecture plus run settings, everything the cost formulas consume.
/// Built from layer specs without allocating any weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchDescriptor {
    pub name: String,
    pub input_neurons: u64,
    pub layers: Vec<ArchLayer>,
    pub t_steps: u32,
    /// Step index before which no updates are taken.
    pub t_l: u32,
    pub class_count: u64,
    pub alpha_post_active: bool,
    pub bytes_per_scalar: u64,
}

impl ArchDescriptor {
    pub fn from_layer_specs(
        name: &str,
        input_shape: &[usize],
        specs: &[LayerSpec],
        t_steps: u32,
        t_l: u32,
        class_count: usize,
        alpha_post_active: bool,
    ) -> CoreResult<ArchDescriptor> {
        let walked = walk_shapes(input_shape, specs)?;
        let mut layers = Vec::with_capacity(walked.len());
        for shape in &walked {
            let label = match shape {
                WalkedLayer::Dense { out_len, .. } => format!("dense {out_len}"),
                WalkedLayer::Conv { geom } => {
                    format!("conv {}@{}x{}", geom.out_ch, geom.out_h, geom.out_w)
                }
                WalkedLayer::Pool { ch, in_h, in_w, kernel } => {
                    format!("pool {}@{}x{}", ch, in_h / kernel, in_w / kernel)
                }
            };
            layers.push(ArchLayer {
                label,
                in_neurons: shape.in_len() as u64,
                neurons: shape.out_len() as u64,
                connections: shape.connections(),
                weighted: shape.is_weighted(),
            });
        }
        let arch = ArchDescriptor {
            name: String::from(name),
            input_neurons: input_shape.iter().product::<usize>() as u64,
            layers,
            t_steps,
            t_l,
            class_count: class_count as u64,
            alpha_post_active,
            bytes_per_scalar: 4,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> CoreResult<()> {
        if self.input_neurons == 0
            || self.class_count == 0
            || self.t_steps == 0
            || self.layers.is_empty()
            || self.layers.iter().any(|l| l.neurons == 0)
        {
            return Err(CoreError::InvalidParam { context: "arch counts must be positive" });
        }
        if self.t_l > self.t_steps {
            return Err(CoreError::InvalidParam { context: "update delay exceeds run length" });
        }
        Ok(())
    }

    /// Sum of every width, input and pools included.
    pub fn total_width_sum(&self) -> u64 {
        self.input_neurons + self.layers.iter().map(|l| l.neurons).sum::<u64>()
    }

    /// Sum of trainable-layer output widths.
    pub fn weighted_width_sum(&self) -> u64 {
        self.layers.iter().filter(|l| l.weighted).map(|l| l.neurons).sum()
    }

    /// Forward multiply-accumulates of one full pass.
    pub fn connection_sum(&self) -> u64 {
        self.layers.iter().map(|l| l.connections).sum()
    }

    /// Steps on which updates are taken.
    pub fn update_steps(&self) -> u64 {
        (self.t_steps - self.t_l) as u64
    }
}

/// Per-layer slice of a cost report. The first row covers the input width.
#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub label: String,
    pub macs: u64,
    pub scalars: u64,
}

/// Cost of training one sample under one rule: update multiply-accumulates
/// and learning-memory scalars, per layer and in total, with a byte figure
/// at the descriptor's scalar width.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub rule: CostRule,
    pub rows: Vec<CostRow>,
    pub total_macs: u64,
    pub total_scalars: u64,
    pub total_bytes: u64,
}

fn report(arch: &ArchDescriptor, rule: CostRule, alpha_post_nonzero: bool) -> CostReport {
    let window = arch.update_steps();
    let t = arch.t_steps as u64;
    let mem_width_factor = match rule {
        CostRule::Bptt => t,
        CostRule::Stllr => 2,
        CostRule::Tess => {
            if alpha_post_nonzero {
                2
            } else {
                1
            }
        }
    };
    let mut rows = Vec::with_capacity(arch.layers.len() + 1);
    rows.push(CostRow {
        label: String::from("input"),
        macs: 0,
        scalars: mem_width_factor * arch.input_neurons,
    });
    for layer in &arch.layers {
        let macs = match rule {
            CostRule::Bptt => t * layer.connections,
            CostRule::Stllr => window * layer.connections,
            CostRule::Tess => {
                if layer.weighted {
                    window * 2 * layer.neurons * arch.class_count
                } else {
                    0
                }
            }
        };
        rows.push(CostRow {
            label: layer.label.clone(),
            macs,
            scalars: mem_width_factor * layer.neurons,
        });
    }
    let total_macs = rows.iter().map(|r| r.macs).sum();
    let total_scalars: u64 = rows.iter().map(|r| r.scalars).sum();
    CostReport {
        rule,
        rows,
        total_macs,
        total_scalars,
        total_bytes: total_scalars * arch.bytes_per_scalar,
    }
}

/// Learning-memory estimate: stored activations for full unroll (T scalars
/// per width), two per width for the trace rules, dropping to one when the
/// slope trace is disabled.
pub fn mem_cost(arch: &ArchDescriptor, rule: CostRule, alpha_post_nonzero: bool) -> CostReport {
    report(arch, rule, alpha_post_nonzero)
}

/// Update multiply-accumulates: forward-sized passes for the backprop rules,
/// two basis passes per trainable layer per update step for the local rule.
pub fn mac_cost(arch: &ArchDescriptor, rule: CostRule) -> CostReport {
    report(arch, rule, arch.alpha_post_active)
}

/// Scalars a live run of the local rule actually allocates for learning: one
/// input-width trace per trainable layer plus one output-width trace when
/// the slope trace is on. Tighter than the headline estimate, which charges
/// two scalars to every width including the input and the readout.
pub fn tess_exact_learning_scalars(arch: &ArchDescriptor) -> u64 {
    arch.layers
        .iter()
        .filter(|l| l.weighted)
        .map(|l| l.in_neurons + if arch.alpha_post_active { l.neurons } else { 0 })
        .sum()
}

/// Full-unroll over local-rule update MACs.
pub fn tess_bptt_mac_ratio(arch: &ArchDescriptor) -> f64 {
    let bptt = mac_cost(arch, CostRule::Bptt).total_macs as f64;
    let tess = mac_cost(arch, CostRule::Tess).total_macs as f64;
    bptt / tess
}

/// One row of the symbolic comparison across rule families.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub rule: &'static str,
    pub mem_order: &'static str,
    pub time_order: &'static str,
    /// The order expression evaluated for the given architecture.
    pub mem_scale: u64,
    pub time_scale: u64,
}

fn eval_order(expr: &str, arch: &ArchDescriptor) -> u64 {
    let n = arch.total_width_sum();
    let n2 = arch.connection_sum();
    let cn = arch.class_count * arch.weighted_width_sum();
    let t = arch.t_steps as u64;
    match expr {
        "Ln" => n,
        "Ln²" => n2,
        "LCn" => cn,
        "TLn" => t * n,
        "TLn²" => t * n2,
        _ => unreachable!("order expressions are fixed"),
    }
}

/// The eight-row scaling comparison. Rows other than the first and last
/// describe rules this crate does not execute; their magnitude columns are
/// the order expressions evaluated for the architecture, nothing more.
pub fn complexity_table(arch: &ArchDescriptor) -> Vec<ComplexityRow> {
    let rows: [(&'static str, &'static str, &'static str); 8] = [
        ("bptt", "TLn", "TLn²"),
        ("e-prop", "Ln²", "Ln²"),
        ("ostl", "Ln²", "Ln²"),
        ("etlp", "Ln²", "LCn"),
        ("osttp", "Ln²", "LCn"),
        ("ottt", "Ln", "Ln²"),
        ("s-tllr", "Ln", "Ln²"),
        ("tess", "Ln", "LCn"),
    ];
    rows.iter()
        .map(|&(rule, mem, time)| ComplexityRow {
            rule,
            mem_order: mem,
            time_order: time,
            mem_scale: eval_order(mem, arch),
            time_scale: eval_order(time, arch),
        })
        .collect()
}

/// Benchmark run settings the cost model can be pointed at.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSetting {
    pub name: &'static str,
    pub input_shape: [usize; 3],
    pub t_steps: u32,
    pub t_l: u32,
    pub class_count: usize,
    pub alpha_post_active: bool,
}

/// The four event-camera and static-image settings the nine-layer geometry
/// is evaluated under.
pub fn table_settings() -> Vec<TableSetting> {
    alloc::vec![
        TableSetting {
            name: "cifar10-dvs",
            input_shape: [2, 48, 48],
            t_steps: 10,
            t_l: 8,
            class_count: 10,
            alpha_post_active: false,
        },
        TableSetting {
            name: "dvs-gesture",
            input_shape: [2, 32, 32],
            t_steps: 20,
            t_l: 0,
            class_count: 11,
            alpha_post_active: true,
        },
        TableSetting {
            name: "cifar10",
            input_shape: [3, 32, 32],
            t_steps: 6,
            t_l: 0,
            class_count: 10,
            alpha_post_active: true,
        },
        TableSetting {
            name: "cifar100",
            input_shape: [3, 32, 32],
            t_steps: 6,
            t_l: 0,
            class_count: 100,
            alpha_post_active: true,
        },
    ]
}

/// Nine-layer convolutional stack: four double-convolution blocks with
/// pooling after each, then a dense head. Used by the cost model only; it is
/// far past desk training scale.
pub fn vgg9_specs(class_count: usize) -> Vec<LayerSpec> {
    use crate::lsg::BasisKind::{Identity, SquareWave};
    let conv = |ch| LayerSpec::conv(ch, 3, 1, 1, SquareWave);
    alloc::vec![
        conv(64),
        conv(64),
        LayerSpec::avgpool(2),
        conv(128),
        conv(128),
        LayerSpec::avgpool(2),
        conv(256),
        conv(256),
        LayerSpec::avgpool(2),
        conv(512),
        conv(512),
        LayerSpec::dense(class_count, Identity),
    ]
}

/// The nine-layer geometry under one of the benchmark settings.
pub fn vgg9_arch(setting: &TableSetting) -> CoreResult<ArchDescriptor> {
    ArchDescriptor::from_layer_specs(
        "vgg9-paper",
        &setting.input_shape,
        &vgg9_specs(setting.class_count),
        setting.t_steps,
        setting.t_l,
        setting.class_count,
        setting.alpha_post_active,
    )
}
