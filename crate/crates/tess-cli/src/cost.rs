//! The cost command: evaluates the analytical training-cost model for a
//! preset architecture and prints per-layer and total figures.

use crate::config::{Preset, RunConfig};
use crate::dataset;
use crate::error::{cfg_err, CliError, CliResult};
use crate::trainer::{preset_input_shape, preset_specs};
use tess_core::costmodel::{
    complexity_table, mac_cost, table_settings, tess_bptt_mac_ratio, tess_exact_learning_scalars,
    ArchDescriptor, CostReport, CostRule,
};

pub struct CostRequest {
    pub setting: String,
    pub t_steps: Option<u32>,
    pub classes: Option<usize>,
    pub t_l: Option<u32>,
    pub rule: String,
    pub complexity: bool,
}

fn parse_rules(name: &str) -> CliResult<Vec<CostRule>> {
    match name {
        "bptt" => Ok(vec![CostRule::Bptt]),
        "s-tllr" => Ok(vec![CostRule::Stllr]),
        "tess" => Ok(vec![CostRule::Tess]),
        "all" => Ok(vec![CostRule::Bptt, CostRule::Stllr, CostRule::Tess]),
        _ => Err(CliError::Config(format!(
            "--rule must be bptt, s-tllr, tess or all, got '{name}'"
        ))),
    }
}

/// Builds the descriptor the request names. The nine-layer preset reads its
/// input geometry from a benchmark setting; the toy presets read theirs
/// from the configured data source.
pub fn resolve_arch(cfg: &RunConfig, req: &CostRequest) -> CliResult<ArchDescriptor> {
    match cfg.model_preset {
        Preset::Vgg9Paper => {
            let mut setting = table_settings()
                .into_iter()
                .find(|s| s.name == req.setting)
                .ok_or_else(|| {
                    let names: Vec<&str> =
                        table_settings().iter().map(|s| s.name).collect();
                    CliError::Config(format!(
                        "--setting must be one of {}, got '{}'",
                        names.join(", "),
                        req.setting
                    ))
                })?;
            if let Some(t) = req.t_steps {
                setting.t_steps = t;
            }
            if let Some(c) = req.classes {
                setting.class_count = c;
            }
            if let Some(t_l) = req.t_l {
                setting.t_l = t_l;
            }
            ArchDescriptor::from_layer_specs(
                "vgg9-paper",
                &setting.input_shape,
                &preset_specs(cfg, setting.class_count),
                setting.t_steps,
                setting.t_l,
                setting.class_count,
                setting.alpha_post_active,
            )
            .map_err(cfg_err)
        }
        Preset::ToyDense | Preset::ToyConv => {
            let ds = dataset::load_whole(cfg)?;
            let t_steps = req.t_steps.unwrap_or(ds.t_steps as u32);
            let classes = req.classes.unwrap_or(ds.class_count);
            let t_l = req.t_l.unwrap_or(cfg.update_t_l);
            let input_shape = preset_input_shape(cfg, &ds.frame_shape)?;
            ArchDescriptor::from_layer_specs(
                cfg.model_preset.name(),
                &input_shape,
                &preset_specs(cfg, classes),
                t_steps,
                t_l,
                classes,
                cfg.trace.alpha_post != 0.0,
            )
            .map_err(cfg_err)
        }
    }
}

fn print_report(report: &CostReport) {
    println!("rule {}", report.rule.name());
    println!("  {:<18} {:>16} {:>18}", "layer", "update_macs", "learning_scalars");
    for row in &report.rows {
        println!("  {:<18} {:>16} {:>18}", row.label, row.macs, row.scalars);
    }
    println!(
        "  total update_macs {}  learning_scalars {}  learning_bytes {} ({:.2} MB)",
        report.total_macs,
        report.total_scalars,
        report.total_bytes,
        report.total_bytes as f64 / 1e6
    );
}

pub fn cmd_cost(cfg: &RunConfig, req: &CostRequest) -> CliResult<()> {
    let rules = parse_rules(&req.rule)?;
    let arch = resolve_arch(cfg, req)?;
    println!(
        "arch {}  input {}  classes {}  T {}  t_l {}  alpha_post {}",
        arch.name,
        arch.input_neurons,
        arch.class_count,
        arch.t_steps,
        arch.t_l,
        if arch.alpha_post_active { "on" } else { "off" }
    );
    for rule in &rules {
        print_report(&mac_cost(&arch, *rule));
        if *rule == CostRule::Tess {
            println!(
                "  live learning scalars {} (traces a run actually allocates)",
                tess_exact_learning_scalars(&arch)
            );
        }
    }
    if rules.len() > 1 {
        println!("bptt/tess update mac ratio {:.2}", tess_bptt_mac_ratio(&arch));
    }
    if req.complexity {
        println!();
        println!("{:<8} {:<6} {:>16} {:<6} {:>16}", "rule", "mem", "scalars", "time", "macs");
        for row in complexity_table(&arch) {
            println!(
                "{:<8} {:<6} {:>16} {:<6} {:>16}",
                row.rule, row.mem_order, row.mem_scale, row.time_order, row.time_scale
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tess_core::costmodel::vgg9_arch;

    fn req() -> CostRequest {
        CostRequest {
            setting: String::from("cifar10-dvs"),
            t_steps: None,
            classes: None,
            t_l: None,
            rule: String::from("all"),
            complexity: false,
        }
    }

    #[test]
    fn vgg9_request_reproduces_the_library_descriptor() {
        let mut cfg = RunConfig::default();
        cfg.set("model.preset", "vgg9-paper").unwrap();
        let arch = resolve_arch(&cfg, &req()).unwrap();
        let want = vgg9_arch(&table_settings()[0]).unwrap();
        assert_eq!(arch, want);
    }

    #[test]
    fn overrides_replace_the_setting_fields() {
        let mut cfg = RunConfig::default();
        cfg.set("model.preset", "vgg9-paper").unwrap();
        let mut r = req();
        r.t_steps = Some(12);
        r.classes = Some(20);
        r.t_l = Some(3);
        let arch = resolve_arch(&cfg, &r).unwrap();
        assert_eq!(arch.t_steps, 12);
        assert_eq!(arch.class_count, 20);
        assert_eq!(arch.t_l, 3);
    }

    #[test]
    fn toy_dense_reads_geometry_from_the_data_source() {
        let mut cfg = RunConfig::default();
        cfg.data_source = String::from("synth:3x24x7");
        cfg.data_samples = 9;
        let arch = resolve_arch(&cfg, &req()).unwrap();
        assert_eq!(arch.input_neurons, 24);
        assert_eq!(arch.class_count, 3);
        assert_eq!(arch.t_steps, 7);
        assert_eq!(arch.layers.len(), 2);
        assert_eq!(arch.layers[0].neurons, 64);
        assert_eq!(arch.layers[1].neurons, 3);
    }

    #[test]
    fn unknown_rules_and_settings_are_config_errors() {
        let mut cfg = RunConfig::default();
        assert!(parse_rules("sideways").is_err());
        cfg.set("model.preset", "vgg9-paper").unwrap();
        let mut r = req();
        r.setting = String::from("imagenet");
        match resolve_arch(&cfg, &r) {
            Err(CliError::Config(msg)) => assert!(msg.contains("cifar10-dvs"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
